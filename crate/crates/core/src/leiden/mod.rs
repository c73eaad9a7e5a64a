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


//! The dynamic Leiden driver.
//!
//! One [`Engine::step`] applies a batch to the ground level and then runs
//! `N` outer iterations. Each walks the levels bottom-up, lifting pending
//! changes, moving nodes between communities and refining subcommunities,
//! and finishes with a move stage on the top level. Work is confined to the
//! batch's endpoints and the nodes their moves reach.

mod apply;
mod find;
mod moves;
mod params;
mod stage;

use std::collections::HashMap;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::dynamics::{BatchUpdate, DynamicsError, GroundUpdate, LiftedUpdate};
use crate::exec::Exec;
use crate::graph::{GraphError, HierGraph, NodeId};
use crate::weight::Weight;

pub use moves::{decouple, sort_moves, Move, Target};
pub use params::{DecouplePolicy, Params, ParamsError};

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum StageKind {
    Move,
    Refine,
}

/// Counters of one stage invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct StageReport {
    pub kind: StageKind,
    /// Level the stage worked on; `None` when `U` was empty.
    pub level: Option<u8>,
    pub affected_in: usize,
    pub affected_out: usize,
    pub moves_found: usize,
    pub moves_applied: usize,
    pub iterations_run: usize,
    /// Sum of the frontier sizes over all iterations.
    pub visited: usize,
    pub delta_q: f64,
    pub reverted: bool,
}

impl StageReport {
    fn new(kind: StageKind, level: Option<u8>, affected_in: usize) -> Self {
        StageReport {
            kind,
            level,
            affected_in,
            affected_out: affected_in,
            moves_found: 0,
            moves_applied: 0,
            iterations_run: 0,
            visited: 0,
            delta_q: 0.0,
            reverted: false,
        }
    }
}

/// What one [`Engine::step`] did.
#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub batch_size: usize,
    pub affected_ground: usize,
    pub created_ground: usize,
    pub visited: usize,
    pub moves_applied: usize,
    pub modularity: f64,
    pub communities: usize,
    pub freed_nodes: usize,
    pub elapsed: Duration,
    pub stages: Vec<StageReport>,
}

/// Frontier sets of one stage, recorded when tracing is on.
#[derive(Clone, Debug, PartialEq)]
pub struct StageTrace {
    pub kind: StageKind,
    pub level: Option<u8>,
    /// The stage's `U` on entry.
    pub input: Vec<NodeId>,
    /// `S` before each iteration.
    pub frontiers: Vec<Vec<NodeId>>,
}

impl StageTrace {
    fn new(kind: StageKind, level: Option<u8>, input: &[NodeId]) -> Self {
        StageTrace { kind, level, input: input.to_vec(), frontiers: Vec::new() }
    }
}

/// Community membership of every ground node. Community ids are dense and
/// numbered by first appearance in ground-node order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Partition {
    labels: Vec<u64>,
    membership: Vec<u32>,
    index: HashMap<u64, usize>,
    count: usize,
}

impl Partition {
    /// Builds a partition from `(label, key)` pairs, renumbering keys.
    pub fn from_pairs<K: Eq + std::hash::Hash>(pairs: impl IntoIterator<Item = (u64, K)>) -> Self {
        let mut dense: HashMap<K, u32> = HashMap::new();
        let mut p = Partition::default();
        for (label, key) in pairs {
            let next = dense.len() as u32;
            let id = *dense.entry(key).or_insert(next);
            p.index.insert(label, p.labels.len());
            p.labels.push(label);
            p.membership.push(id);
        }
        p.count = dense.len();
        p
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_communities(&self) -> usize {
        self.count
    }

    pub fn community_of(&self, label: u64) -> Option<u32> {
        self.index.get(&label).map(|&i| self.membership[i])
    }

    /// `(label, community)` in ground-node order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, u32)> + '_ {
        self.labels.iter().copied().zip(self.membership.iter().copied())
    }

    /// Members of each community, indexed by community id.
    pub fn groups(&self) -> Vec<Vec<u64>> {
        let mut groups = vec![Vec::new(); self.count];
        for (label, c) in self.iter() {
            groups[c as usize].push(label);
        }
        groups
    }
}

/// The dynamic community-detection engine.
pub struct Engine<W: Weight = i64> {
    graph: HierGraph<W>,
    params: Params,
    exec: Exec,
    trace: Option<Vec<StageTrace>>,
}

impl<W: Weight> Engine<W> {
    pub fn new(params: Params) -> Result<Self, EngineError> {
        params.validate()?;
        Ok(Engine { graph: HierGraph::new(params.levels), exec: Exec::new(params.threads), params, trace: None })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn graph(&self) -> &HierGraph<W> {
        &self.graph
    }

    /// Direct access for tooling and tests. Mutations must leave the
    /// hierarchy consistent.
    pub fn graph_mut(&mut self) -> &mut HierGraph<W> {
        &mut self.graph
    }

    pub fn threads(&self) -> usize {
        self.exec.threads()
    }

    pub fn modularity(&self) -> f64 {
        crate::modularity::modularity(&self.graph, self.params.gamma)
    }

    /// Starts (or stops) recording stage frontiers.
    pub fn set_tracing(&mut self, on: bool) {
        self.trace = on.then(Vec::new);
    }

    /// Recorded frontiers since the last call; tracing stays on.
    pub fn take_trace(&mut self) -> Vec<StageTrace> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Processes one batch update.
    pub fn step(&mut self, batch: &BatchUpdate<W>) -> Result<StepReport, EngineError> {
        let start = Instant::now();
        let ground = self.graph.update_ground(batch, &self.exec)?;
        let v0 = ground.affected;
        let mut pending = ground.lifted;
        let top = self.graph.max_level();
        let mut stages = Vec::with_capacity(self.params.outer * (2 * top as usize + 1));
        for _ in 0..self.params.outer {
            let mut u = v0.clone();
            for _ in 0..top {
                pending = self.graph.lift(pending, &self.exec)?;
                let (moved, p, r_move) = self.move_stage(u, pending)?;
                let (refined, p, r_refine) = self.refine_stage(moved, p)?;
                pending = p;
                u = stage::sorted(refined.iter().filter_map(|&x| self.graph.parent(x)).collect());
                stages.push(r_move);
                stages.push(r_refine);
            }
            let (_, _, r_top) = self.move_stage(u, LiftedUpdate::new())?;
            stages.push(r_top);
            // already applied on the top level; nothing lives above it
            pending = LiftedUpdate::new();
        }
        let freed_nodes = self.graph.collect_garbage();
        Ok(StepReport {
            batch_size: batch.len(),
            affected_ground: v0.len(),
            created_ground: ground.created,
            visited: stages.iter().map(|s| s.visited).sum(),
            moves_applied: stages.iter().map(|s| s.moves_applied).sum(),
            modularity: self.modularity(),
            communities: self.graph.community_count(),
            freed_nodes,
            elapsed: start.elapsed(),
            stages,
        })
    }

    /// Applies a batch and lifts it through every level without running
    /// any stage, so the partition stays as it is.
    pub fn update_only(&mut self, batch: &BatchUpdate<W>) -> Result<GroundUpdate<W>, EngineError> {
        let ground = self.graph.update_ground(batch, &self.exec)?;
        self.settle(ground.lifted.clone())?;
        Ok(ground)
    }

    /// One [`HierGraph::lift`] with the engine's executor.
    pub fn lift(&mut self, pending: LiftedUpdate<W>) -> Result<LiftedUpdate<W>, EngineError> {
        Ok(self.graph.lift(pending, &self.exec)?)
    }

    /// Lifts `pending` all the way to the top level and collects garbage,
    /// leaving a consistent hierarchy after stages run by hand.
    pub fn settle(&mut self, mut pending: LiftedUpdate<W>) -> Result<(), EngineError> {
        let top = self.graph.max_level();
        while let Some(&(u, _, _)) = pending.entries().first() {
            if self.graph.level(u) >= top {
                break;
            }
            pending = self.lift(pending)?;
        }
        self.graph.collect_garbage();
        Ok(())
    }

    pub fn partition(&self) -> Partition {
        let g = &self.graph;
        Partition::from_pairs(g.ground_nodes().iter().map(|&v| {
            (g.label(v).expect("ground node has a label"), g.community_of(v))
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn engine() -> Engine {
        Engine::new(Params::default()).unwrap()
    }

    fn undirected(edges: &[(u64, u64)]) -> BatchUpdate<i64> {
        edges.iter().flat_map(|&(a, b)| [(a, b, 1), (b, a, 1)]).collect()
    }

    fn two_triangles() -> BatchUpdate<i64> {
        undirected(&[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3), (2, 3)])
    }

    #[test]
    fn two_triangles_split_at_the_bridge() {
        let mut e = engine();
        let r = e.step(&two_triangles()).unwrap();
        let p = e.partition();
        assert_eq!(p.num_communities(), 2);
        assert_eq!(p.community_of(0), p.community_of(2));
        assert_ne!(p.community_of(2), p.community_of(3));
        assert_eq!(p.community_of(3), p.community_of(5));
        // Q = 2 * (6/14 - (7/14)^2)
        assert!((r.modularity - 5.0 / 14.0).abs() < 1e-12);
        assert_eq!(r.stages.len(), 2 * (2 * 4 + 1));
        e.graph().check_structure().unwrap();
    }

    #[test]
    fn empty_batch_does_nothing() {
        let mut e = engine();
        e.step(&two_triangles()).unwrap();
        let before = e.partition();
        let r = e.step(&BatchUpdate::new()).unwrap();
        assert_eq!(r.visited, 0);
        assert_eq!(r.affected_ground, 0);
        assert_eq!(e.partition(), before);
    }

    #[test]
    fn deleting_everything_leaves_singletons() {
        let mut e = engine();
        let b = two_triangles();
        e.step(&b).unwrap();
        let r = e.step(&b.negated()).unwrap();
        assert_eq!(r.modularity, 0.0);
        assert_eq!(e.graph().aggregates().m, 0);
        e.graph().check_structure().unwrap();
    }

    #[test]
    fn partition_renumbers_densely() {
        let p = Partition::from_pairs([(10, 'b'), (11, 'a'), (12, 'b')]);
        assert_eq!(p.iter().collect::<Vec<_>>(), vec![(10, 0), (11, 1), (12, 0)]);
        assert_eq!(p.groups(), vec![vec![10, 12], vec![11]]);
        assert_eq!(p.community_of(99), None);
    }

    #[test]
    fn invalid_params_rejected() {
        let params = Params { inner: 0, ..Params::default() };
        assert!(matches!(Engine::<i64>::new(params), Err(EngineError::Params(ParamsError::Inner))));
    }
}
