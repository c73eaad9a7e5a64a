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


//! Applying decoupled moves.
//!
//! Moving a node re-lifts every incident edge: its weight leaves the old
//! `(community, community)` and `(parent, parent)` pairs and lands on the
//! new ones. Instead of replaying that edge by edge, the net delta of every
//! edge is emitted once (an edge between two moved nodes is owned by its
//! source), and the resulting lists are applied in one sharded pass. New
//! parents and communities are allocated sequentially in move order, so the
//! outcome does not depend on the thread count.

use crate::dynamics::LiftedUpdate;
use crate::graph::NodeId;
use crate::modularity::AggregateWindow;
use crate::weight::Weight;

use super::moves::{Move, Target};
use super::{Engine, EngineError};

type Delta<W> = (NodeId, NodeId, W);

#[derive(Copy, Clone, Debug)]
struct Plan {
    node: NodeId,
    old_c: NodeId,
    new_c: NodeId,
    old_p: Option<NodeId>,
    new_p: Option<NodeId>,
}

impl<W: Weight> Engine<W> {
    /// Moves every node to its target community, creating communities for
    /// `New` targets. Below the top level each moved node gets a fresh
    /// parent; parent-level deltas are appended to `pending`. Returns the
    /// moves with their targets resolved.
    pub fn apply_moves(&mut self, moves: &[Move], pending: &mut LiftedUpdate<W>) -> Result<Vec<Move>, EngineError> {
        if moves.is_empty() {
            return Ok(Vec::new());
        }
        let top = self.graph.max_level();
        let mut window =
            AggregateWindow::open(&self.graph, moves.iter().flat_map(|m| [Some(m.from), m.to.existing()]).flatten());
        let mut plans = Vec::with_capacity(moves.len());
        for m in moves {
            let level = self.graph.level(m.node);
            let new_c = match m.to {
                Target::Existing(c) => c,
                Target::New => {
                    let c = self.graph.add_community_node()?;
                    window.include_new(c);
                    c
                }
            };
            let new_p = if level != top {
                let p = self.graph.add_node(level + 1)?;
                self.graph.set_reference_to_community(p, new_c)?;
                Some(p)
            } else {
                None
            };
            let old_p = self.graph.parent(m.node);
            plans.push(Plan { node: m.node, old_c: m.from, new_c, old_p, new_p });
        }
        let (up, low) = self.edge_deltas(&plans, true);
        for p in &plans {
            match p.new_p {
                Some(np) => self.graph.set_parent(p.node, np)?,
                None => self.graph.set_reference_to_community(p.node, p.new_c)?,
            }
            self.graph.set_cached_community(p.node, p.new_c);
        }
        self.graph.add_weights(&up, &self.exec);
        self.graph.add_weights(&low, &self.exec);
        pending.extend_from(&low);
        let (dw, dk) = window.close(&self.graph);
        self.graph.commit_aggregates(Default::default(), dw, dk);
        Ok(moves
            .iter()
            .zip(&plans)
            .map(|(m, p)| Move { to: Target::Existing(p.new_c), ..*m })
            .collect())
    }

    /// Moves every node to another parent inside its community, creating a
    /// parent for `New` targets. Communities, `W` and `K` are untouched.
    pub fn apply_refine_moves(&mut self, moves: &[Move], pending: &mut LiftedUpdate<W>) -> Result<Vec<Move>, EngineError> {
        if moves.is_empty() {
            return Ok(Vec::new());
        }
        let mut plans = Vec::with_capacity(moves.len());
        for m in moves {
            let level = self.graph.level(m.node);
            let c = self.graph.community_of(m.node);
            let new_p = match m.to {
                Target::Existing(p) => p,
                Target::New => {
                    let p = self.graph.add_node(level + 1)?;
                    self.graph.set_reference_to_community(p, c)?;
                    p
                }
            };
            plans.push(Plan { node: m.node, old_c: c, new_c: c, old_p: Some(m.from), new_p: Some(new_p) });
        }
        let (_, low) = self.edge_deltas(&plans, false);
        for p in &plans {
            self.graph.set_parent(p.node, p.new_p.expect("refine target"))?;
            self.graph.set_cached_community(p.node, p.new_c);
        }
        self.graph.add_weights(&low, &self.exec);
        pending.extend_from(&low);
        Ok(moves
            .iter()
            .zip(&plans)
            .map(|(m, p)| Move { to: Target::Existing(p.new_p.expect("refine target")), ..*m })
            .collect())
    }

    /// Net community-level and parent-level deltas of a set of moves,
    /// computed against the graph before any reference changes.
    fn edge_deltas(&self, plans: &[Plan], communities: bool) -> (Vec<Delta<W>>, Vec<Delta<W>>) {
        let g = &self.graph;
        let mut index: Vec<(NodeId, usize)> = plans.iter().enumerate().map(|(i, p)| (p.node, i)).collect();
        index.sort_unstable();
        let lookup = |v: NodeId| index.binary_search_by_key(&v, |x| x.0).ok().map(|i| &plans[index[i].1]);

        let per_move = self.exec.map_init(plans, || (), |_, p| {
            let mut up: Vec<Delta<W>> = Vec::new();
            let mut low: Vec<Delta<W>> = Vec::new();
            let mut emit = |w: W, from: (Option<NodeId>, Option<NodeId>), to: (Option<NodeId>, Option<NodeId>), cs: [NodeId; 4]| {
                if communities && (cs[0], cs[1]) != (cs[2], cs[3]) {
                    up.push((cs[0], cs[1], -w));
                    up.push((cs[2], cs[3], w));
                }
                if from != to {
                    if let (Some(a), Some(b)) = from {
                        low.push((a, b, -w));
                    }
                    if let (Some(a), Some(b)) = to {
                        low.push((a, b, w));
                    }
                }
            };
            for e in g.adjacency(p.node) {
                let v = e.neighbor;
                let (other, moved) = if v == p.node {
                    (*p, true)
                } else if let Some(q) = lookup(v) {
                    (*q, true)
                } else {
                    let c = if communities { g.community_of(v) } else { p.old_c };
                    let parent = g.parent(v);
                    (Plan { node: v, old_c: c, new_c: c, old_p: parent, new_p: parent }, false)
                };
                if p.new_p.is_some() {
                    debug_assert!(p.old_p.is_some() && other.old_p.is_some(), "edge endpoint without parent");
                }
                if !e.out_w.is_zero() {
                    emit(
                        e.out_w,
                        (p.old_p, other.old_p),
                        (p.new_p, other.new_p),
                        [p.old_c, other.old_c, p.new_c, other.new_c],
                    );
                }
                if !moved && !e.in_w.is_zero() {
                    emit(
                        e.in_w,
                        (other.old_p, p.old_p),
                        (other.new_p, p.new_p),
                        [other.old_c, p.old_c, other.new_c, p.new_c],
                    );
                }
            }
            (up, low)
        });
        let mut up = Vec::new();
        let mut low = Vec::new();
        for (a, b) in per_move {
            up.extend(a);
            low.extend(b);
        }
        (up, low)
    }
}
