// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Batch updates and their propagation through the hierarchy.
//!
//! A batch touches level 0 and the community tier immediately. The levels in
//! between catch up lazily: every change applied at level `l` is recorded in
//! a [`LiftedUpdate`] and pushed to level `l + 1` by [`HierGraph::lift`]
//! right before the stage that works on that level.

use thiserror::Error;

use crate::exec::Exec;
use crate::graph::{GraphError, HierGraph, NodeId};
use crate::modularity::AggregateWindow;
use crate::weight::Weight;

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("delta #{index} ({src} -> {dst}) is zero")]
    ZeroDelta { index: usize, src: u64, dst: u64 },
    #[error("edge {src} -> {dst} would become negative ({result})")]
    NegativeWeight { src: u64, dst: u64, result: String },
    #[error("{node} is at level {level}; nothing exists above level {max}")]
    LiftAtTop { node: NodeId, level: u8, max: u8 },
    #[error("lifted update mixes levels {0} and {1}")]
    MixedLevels(u8, u8),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// One weight change on an input edge, addressed by external labels.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct EdgeDelta<W> {
    pub src: u64,
    pub dst: u64,
    pub delta: W,
}

/// All edge changes of one time step. A deletion is a delta that brings the
/// edge weight back to zero.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchUpdate<W> {
    pub deltas: Vec<EdgeDelta<W>>,
}

impl<W> Default for BatchUpdate<W> {
    fn default() -> Self {
        BatchUpdate { deltas: Vec::new() }
    }
}

impl<W: Weight> BatchUpdate<W> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, src: u64, dst: u64, delta: W) {
        self.deltas.push(EdgeDelta { src, dst, delta });
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    /// The batch that undoes this one.
    pub fn negated(&self) -> Self {
        self.deltas.iter().map(|d| (d.src, d.dst, -d.delta)).collect()
    }

    pub fn total(&self) -> W::Wide {
        self.deltas.iter().map(|d| d.delta.widen()).sum()
    }
}

impl<W: Weight> FromIterator<(u64, u64, W)> for BatchUpdate<W> {
    fn from_iter<I: IntoIterator<Item = (u64, u64, W)>>(iter: I) -> Self {
        BatchUpdate {
            deltas: iter.into_iter().map(|(src, dst, delta)| EdgeDelta { src, dst, delta }).collect(),
        }
    }
}

/// Weight changes already applied at one level and waiting to be pushed to
/// the next one.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedUpdate<W> {
    entries: Vec<(NodeId, NodeId, W)>,
}

impl<W> Default for LiftedUpdate<W> {
    fn default() -> Self {
        LiftedUpdate { entries: Vec::new() }
    }
}

impl<W: Weight> LiftedUpdate<W> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, u: NodeId, v: NodeId, w: W) {
        self.entries.push((u, v, w));
    }

    pub fn extend_from(&mut self, other: &[(NodeId, NodeId, W)]) {
        self.entries.extend_from_slice(other);
    }

    pub fn entries(&self) -> &[(NodeId, NodeId, W)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> W::Wide {
        self.entries.iter().map(|e| e.2.widen()).sum()
    }

    /// Sums entries for the same ordered pair and drops those that cancel.
    pub fn merged(mut self) -> Self {
        merge_pairs(&mut self.entries);
        self
    }
}

impl<W> From<Vec<(NodeId, NodeId, W)>> for LiftedUpdate<W> {
    fn from(entries: Vec<(NodeId, NodeId, W)>) -> Self {
        LiftedUpdate { entries }
    }
}

fn merge_pairs<K: Ord + Copy, W: Weight>(entries: &mut Vec<(K, K, W)>) {
    entries.sort_by_key(|&(u, v, _)| (u, v));
    let mut out = 0;
    for i in 0..entries.len() {
        if out > 0 && (entries[out - 1].0, entries[out - 1].1) == (entries[i].0, entries[i].1) {
            let w = entries[i].2;
            entries[out - 1].2 += w;
        } else {
            entries[out] = entries[i];
            out += 1;
        }
    }
    entries.truncate(out);
    entries.retain(|e| !e.2.is_zero());
}

/// Result of applying a batch to level 0.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundUpdate<W> {
    /// Every ground node named by the batch, sorted by id.
    pub affected: Vec<NodeId>,
    /// Merged ground-level changes, pending for level 1.
    pub lifted: LiftedUpdate<W>,
    /// Ground nodes created by this batch.
    pub created: usize,
}

impl<W: Weight> HierGraph<W> {
    /// Applies a batch to the ground level and the community tier. Each new
    /// label gets a ground node and its own singleton community. Deltas on
    /// the same ordered pair are summed first. In integer mode a delta that
    /// would leave a negative weight rejects the whole batch untouched.
    pub fn update_ground(&mut self, batch: &BatchUpdate<W>, exec: &Exec) -> Result<GroundUpdate<W>, DynamicsError> {
        self.bump_epoch();
        for (index, d) in batch.deltas.iter().enumerate() {
            if d.delta.is_zero() {
                return Err(DynamicsError::ZeroDelta { index, src: d.src, dst: d.dst });
            }
        }
        let mut merged: Vec<(u64, u64, W)> = batch.deltas.iter().map(|d| (d.src, d.dst, d.delta)).collect();
        merge_pairs(&mut merged);

        let mut negative = 0;
        for &(src, dst, w) in &merged {
            let current = match (self.ground_node(src), self.ground_node(dst)) {
                (Some(u), Some(v)) => self.weight(u, v),
                _ => W::ZERO,
            };
            let result = current + w;
            if result.is_negative() {
                if W::EXACT {
                    return Err(DynamicsError::NegativeWeight { src, dst, result: result.to_string() });
                }
                negative += 1;
            }
        }
        self.negative_weight_events += negative;

        let mut created = 0;
        for d in &batch.deltas {
            for label in [d.src, d.dst] {
                if self.ground_node(label).is_none() {
                    let v = self.add_ground_node(label)?;
                    let c = self.add_community_node()?;
                    self.set_reference_to_community(v, c)?;
                    created += 1;
                }
            }
        }
        let id = |g: &Self, label: u64| g.ground_node(label).expect("label registered above");
        let mut affected: Vec<NodeId> =
            batch.deltas.iter().flat_map(|d| [id(self, d.src), id(self, d.dst)]).collect();
        affected.sort_unstable();
        affected.dedup();

        let window = AggregateWindow::open(self, affected.iter().map(|&v| self.community_of(v)));
        let ground: Vec<(NodeId, NodeId, W)> =
            merged.iter().map(|&(s, d, w)| (id(self, s), id(self, d), w)).collect();
        let top: Vec<(NodeId, NodeId, W)> =
            ground.iter().map(|&(u, v, w)| (self.community_of(u), self.community_of(v), w)).collect();
        self.add_weights(&ground, exec);
        self.add_weights(&top, exec);
        let dm = ground.iter().map(|e| e.2.widen()).sum();
        let (dw, dk) = window.close(self);
        self.commit_aggregates(dm, dw, dk);

        Ok(GroundUpdate { affected, lifted: LiftedUpdate::from(ground), created })
    }

    /// Pushes pending changes from level `l` to level `l + 1`. Endpoints
    /// without a parent get a fresh one that inherits their community.
    /// Returns the merged changes now pending for level `l + 2`.
    pub fn lift(&mut self, pending: LiftedUpdate<W>, exec: &Exec) -> Result<LiftedUpdate<W>, DynamicsError> {
        self.bump_epoch();
        let merged = pending.merged();
        let Some(&(first, _, _)) = merged.entries().first() else {
            return Ok(LiftedUpdate::new());
        };
        let level = self.level(first);
        let mut touched: Vec<NodeId> = merged.entries().iter().flat_map(|&(u, v, _)| [u, v]).collect();
        touched.sort_unstable();
        touched.dedup();
        for &u in &touched {
            let l = self.level(u);
            if l != level {
                return Err(DynamicsError::MixedLevels(level, l));
            }
            if l >= self.max_level() {
                return Err(DynamicsError::LiftAtTop { node: u, level: l, max: self.max_level() });
            }
        }
        for &u in &touched {
            if self.parent(u).is_none() {
                let c = self.resolve_community(u)?;
                let p = self.add_node(level + 1)?;
                self.set_parent(u, p)?;
                self.set_reference_to_community(p, c)?;
            }
        }
        let parent = |g: &Self, u: NodeId| g.parent(u).expect("parent assigned above");
        let up: Vec<(NodeId, NodeId, W)> =
            merged.entries().iter().map(|&(u, v, w)| (parent(self, u), parent(self, v), w)).collect();
        let up = LiftedUpdate::from(up).merged();
        self.add_weights(up.entries(), exec);
        Ok(up)
    }

    /// Adds `w` to the community edge `(c(v1), c(v2))` and, below level L,
    /// to the parent edge `(p(v1), p(v2))`, recording the latter in
    /// `pending`. `W` and `K` are left to the caller's window.
    pub fn up_edge(&mut self, pending: &mut LiftedUpdate<W>, v1: NodeId, v2: NodeId, w: W) -> Result<(), DynamicsError> {
        if w.is_zero() {
            return Ok(());
        }
        let c = self.resolve_community(v1)?;
        let b = self.resolve_community(v2)?;
        self.add_weight(c, b, w)?;
        if self.level(v1) != self.max_level() {
            let p = self.parent(v1).ok_or(GraphError::BrokenChain(v1))?;
            let q = self.parent(v2).ok_or(GraphError::BrokenChain(v2))?;
            self.add_weight(p, q, w)?;
            pending.push(p, q, w);
        }
        Ok(())
    }
}
