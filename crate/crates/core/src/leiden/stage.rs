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


//! The move and refine stages on one level.

use crate::dynamics::LiftedUpdate;
use crate::graph::NodeId;
use crate::weight::Weight;

use super::moves::{decouple, Move};
use super::{Engine, EngineError, StageKind, StageReport, StageTrace};

pub(crate) fn sorted(mut v: Vec<NodeId>) -> Vec<NodeId> {
    v.sort_unstable();
    v.dedup();
    v
}

pub(crate) fn union(a: &[NodeId], b: &[NodeId]) -> Vec<NodeId> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

fn minus(a: &[NodeId], b: &[NodeId]) -> Vec<NodeId> {
    a.iter().copied().filter(|x| b.binary_search(x).is_err()).collect()
}

fn nodes_of(moves: &[Move]) -> Vec<NodeId> {
    sorted(moves.iter().map(|m| m.node).collect())
}

impl<W: Weight> Engine<W> {
    /// Up to `M` rounds of find, decouple and apply over `U` and its
    /// neighbours. A round that lowers modularity is undone and ends the
    /// stage. Returns the enlarged affected set and the pending update.
    pub fn move_stage(
        &mut self,
        u: Vec<NodeId>,
        mut pending: LiftedUpdate<W>,
    ) -> Result<(Vec<NodeId>, LiftedUpdate<W>, StageReport), EngineError> {
        self.graph.bump_epoch();
        let mut u = sorted(u);
        let level = u.first().map(|&x| self.graph.level(x));
        debug_assert!(u.iter().all(|&x| Some(self.graph.level(x)) == level), "mixed levels in U");
        let mut report = StageReport::new(StageKind::Move, level, u.len());
        let mut trace = self.trace.is_some().then(|| StageTrace::new(StageKind::Move, level, &u));

        let mut s = u.clone();
        for &x in &u {
            s.extend(self.graph.neighbors(x));
        }
        let mut s = sorted(s);
        let q_start = self.modularity();
        for i in 1..=self.params.inner {
            if s.is_empty() {
                break;
            }
            report.iterations_run += 1;
            report.visited += s.len();
            if let Some(t) = trace.as_mut() {
                t.frontiers.push(s.clone());
            }
            let found = self.find_moves(&s);
            report.moves_found += found.len();
            let v0 = nodes_of(&found);
            let moves = decouple(found, self.params.decouple);
            let v = nodes_of(&moves);
            let w = self.same_container_neighbors(&v, false);

            let q = self.modularity();
            let applied = self.apply_moves(&moves, &mut pending)?;
            let dq = self.modularity() - q;
            if dq < 0.0 {
                let reverse: Vec<Move> = applied.iter().map(Move::reversed).collect();
                self.apply_moves(&reverse, &mut pending)?;
                report.reverted = true;
                break;
            }
            report.moves_applied += moves.len();
            u = union(&u, &union(&v, &w));
            if dq < self.params.alpha * q || (v.len() as f64) < self.params.beta * s.len() as f64 {
                break;
            }
            if i != self.params.inner {
                let mut cross = Vec::new();
                for &x in &v {
                    let cx = self.graph.community_of(x);
                    cross.extend(self.graph.neighbors(x).filter(|&y| self.graph.community_of(y) != cx));
                }
                s = union(&minus(&v0, &v), &sorted(cross));
            }
        }
        report.delta_q = self.modularity() - q_start;
        report.affected_out = u.len();
        if let (Some(t), Some(log)) = (trace, self.trace.as_mut()) {
            log.push(t);
        }
        Ok((u, pending, report))
    }

    /// Up to `M` rounds of subcommunity moves starting from `U` itself.
    /// Community membership never changes here.
    pub fn refine_stage(
        &mut self,
        u: Vec<NodeId>,
        mut pending: LiftedUpdate<W>,
    ) -> Result<(Vec<NodeId>, LiftedUpdate<W>, StageReport), EngineError> {
        self.graph.bump_epoch();
        let mut u = sorted(u);
        let level = u.first().map(|&x| self.graph.level(x));
        debug_assert!(u.iter().all(|&x| Some(self.graph.level(x)) == level), "mixed levels in U");
        let mut report = StageReport::new(StageKind::Refine, level, u.len());
        let mut trace = self.trace.is_some().then(|| StageTrace::new(StageKind::Refine, level, &u));

        let mut s = u.clone();
        for _ in 1..=self.params.inner {
            if s.is_empty() {
                break;
            }
            report.iterations_run += 1;
            report.visited += s.len();
            if let Some(t) = trace.as_mut() {
                t.frontiers.push(s.clone());
            }
            let found = self.find_refine_moves(&s);
            report.moves_found += found.len();
            let moves = decouple(found, self.params.decouple);
            let v = nodes_of(&moves);
            let w = self.same_container_neighbors(&v, true);
            self.apply_refine_moves(&moves, &mut pending)?;
            report.moves_applied += moves.len();
            u = union(&u, &v);
            if (v.len() as f64) < self.params.beta * s.len() as f64 {
                break;
            }
            s = union(&minus(&s, &v), &w);
        }
        report.affected_out = u.len();
        if let (Some(t), Some(log)) = (trace, self.trace.as_mut()) {
            log.push(t);
        }
        Ok((u, pending, report))
    }

    /// Neighbours sharing a parent (or, at the top level, a community
    /// reference) with some node of `v`.
    fn same_container_neighbors(&self, v: &[NodeId], exclude_v: bool) -> Vec<NodeId> {
        let g = &self.graph;
        let mut out = Vec::new();
        for &x in v {
            let px = g.container(x);
            out.extend(
                g.neighbors(x)
                    .filter(|&y| g.container(y) == px)
                    .filter(|y| !exclude_v || v.binary_search(y).is_err()),
            );
        }
        sorted(out)
    }
}
