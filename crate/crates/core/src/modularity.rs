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

//! Modularity from stored aggregates and the single-move reward.
//!
//! With `m` the total weight, `W` the intra-community weight and `K` the
//! sum of `K_in * K_out` over communities, modularity is
//! `W / m - gamma * K / m^2`. Moving a node `u` from `c` to `b` changes it by
//!
//! ```text
//! (D(u,b) - D(u,c)) / m
//!   + gamma / m^2 * ((Kin_c - Kin_b) * Kout_u + (Kout_c - Kout_b) * Kin_u - 2 * Kin_u * Kout_u)
//! ```
//!
//! where `D(u,z)` sums `w(u,v) + w(v,u)` over neighbours `v != u` inside `z`
//! and the `K` values of `c` still include `u`. The same expression scores
//! moves between subcommunities when the `K` values are taken from parent
//! nodes.

use thiserror::Error;

use crate::graph::{HierGraph, NodeId};
use crate::weight::Weight;

#[derive(Debug, Error, PartialEq)]
pub enum ModularityError {
    #[error("resolution must be finite and non-negative, got {0}")]
    BadResolution(f64),
    #[error("reward is undefined on an empty graph")]
    EmptyGraph,
    #[error("neighbour table has no entry for the source {0}")]
    MissingSource(NodeId),
}

/// The resolution parameter `gamma >= 0`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Resolution(f64);

impl Resolution {
    pub fn new(gamma: f64) -> Result<Self, ModularityError> {
        if gamma.is_finite() && gamma >= 0.0 {
            Ok(Resolution(gamma))
        } else {
            Err(ModularityError::BadResolution(gamma))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution(1.0)
    }
}

/// Modularity of the current community partition, O(1). Zero when `m = 0`.
pub fn modularity<W: Weight>(graph: &HierGraph<W>, gamma: f64) -> f64 {
    let agg = graph.aggregates();
    let m = W::wide_to_f64(agg.m);
    if m == 0.0 {
        return 0.0;
    }
    W::wide_to_f64(agg.w) / m - gamma * W::wide_to_f64(agg.k) / (m * m)
}

/// `D(u, z)` for one node `u`: summed two-way weight towards each group `z`
/// of its neighbours. Kept sorted by group id.
#[derive(Clone, Debug, Default)]
pub struct NeighborWeights<W> {
    entries: Vec<(NodeId, W)>,
}

impl<W: Weight> NeighborWeights<W> {
    pub fn new() -> Self {
        NeighborWeights { entries: Vec::new() }
    }

    /// Rebuilds the table from `u`'s adjacency, grouping neighbours with
    /// `group`; neighbours mapped to `None` are left out. Self-loops are
    /// skipped.
    pub fn build(&mut self, graph: &HierGraph<W>, u: NodeId, mut group: impl FnMut(NodeId) -> Option<NodeId>) {
        self.entries.clear();
        for e in graph.adjacency(u) {
            if e.neighbor != u {
                if let Some(z) = group(e.neighbor) {
                    self.entries.push((z, e.out_w + e.in_w));
                }
            }
        }
        self.entries.sort_unstable_by_key(|&(z, _)| z);
        let mut out = 0;
        for i in 0..self.entries.len() {
            if out > 0 && self.entries[out - 1].0 == self.entries[i].0 {
                let w = self.entries[i].1;
                self.entries[out - 1].1 += w;
            } else {
                self.entries[out] = self.entries[i];
                out += 1;
            }
        }
        self.entries.truncate(out);
    }

    /// Inserts `z` with weight zero if absent.
    pub fn ensure(&mut self, z: NodeId) {
        if let Err(i) = self.entries.binary_search_by_key(&z, |&(g, _)| g) {
            self.entries.insert(i, (z, W::ZERO));
        }
    }

    pub fn get(&self, z: NodeId) -> Option<W> {
        self.entries.binary_search_by_key(&z, |&(g, _)| g).ok().map(|i| self.entries[i].1)
    }

    /// Groups in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = (NodeId, W)> + '_ {
        self.entries.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Degree sums `(K_in, K_out)` of a node or group.
pub type Degrees<W> = (W, W);

/// The reward formula on raw terms. `target` is `(0, 0)` for a new group.
///
/// The numerator is assembled in the wide type before the single division
/// by `m²`, so a reward that is exactly zero comes out as `0.0`.
#[inline]
pub fn reward_terms<W: Weight>(
    m: W::Wide,
    gamma: f64,
    d_to: W,
    d_from: W,
    node: Degrees<W>,
    source: Degrees<W>,
    target: Degrees<W>,
) -> f64 {
    let (u_in, u_out) = (node.0.widen(), node.1.widen());
    let linear = d_to.widen() - d_from.widen();
    let self_term = u_in * u_out;
    let null = (source.0 - target.0).widen() * u_out + (source.1 - target.1).widen() * u_in
        - self_term
        - self_term;
    let mf = W::wide_to_f64(m);
    (W::wide_to_f64(linear * m) + gamma * W::wide_to_f64(null)) / (mf * mf)
}

/// Reward of moving `u` out of its community `c_from` into `c_to`, or into a
/// fresh singleton community when `c_to` is `None`.
pub fn reward<W: Weight>(
    graph: &HierGraph<W>,
    table: &NeighborWeights<W>,
    u: NodeId,
    c_from: NodeId,
    c_to: Option<NodeId>,
    gamma: f64,
) -> Result<f64, ModularityError> {
    let m = graph.total_weight();
    if W::wide_to_f64(m) == 0.0 {
        return Err(ModularityError::EmptyGraph);
    }
    let d_from = table.get(c_from).ok_or(ModularityError::MissingSource(c_from))?;
    let degrees = |x: NodeId| (graph.k_in(x), graph.k_out(x));
    let (d_to, target) = match c_to {
        Some(b) => (table.get(b).unwrap_or(W::ZERO), degrees(b)),
        None => (W::ZERO, (W::ZERO, W::ZERO)),
    };
    Ok(reward_terms(m, gamma, d_to, d_from, degrees(u), degrees(c_from), target))
}

/// Before/after sums of `w(c, c)` and `K_in * K_out` over a fixed set of
/// communities, used to update `W` and `K` around a local mutation.
pub struct AggregateWindow<W: Weight> {
    communities: Vec<NodeId>,
    w: W::Wide,
    k: W::Wide,
}

impl<W: Weight> AggregateWindow<W> {
    pub fn open(graph: &HierGraph<W>, communities: impl IntoIterator<Item = NodeId>) -> Self {
        let mut communities: Vec<NodeId> = communities.into_iter().collect();
        communities.sort_unstable();
        communities.dedup();
        let (w, k) = Self::sum(graph, &communities);
        AggregateWindow { communities, w, k }
    }

    /// Adds communities created after the window was opened; their
    /// starting contribution is zero.
    pub fn include_new(&mut self, c: NodeId) {
        if let Err(i) = self.communities.binary_search(&c) {
            self.communities.insert(i, c);
        }
    }

    fn sum(graph: &HierGraph<W>, communities: &[NodeId]) -> (W::Wide, W::Wide) {
        let mut w = W::Wide::default();
        let mut k = W::Wide::default();
        for &c in communities {
            let (cw, ck) = graph.community_contribution(c);
            w += cw;
            k += ck;
        }
        (w, k)
    }

    /// Returns `(dW, dK)` since [`open`](Self::open).
    pub fn close(self, graph: &HierGraph<W>) -> (W::Wide, W::Wide) {
        let (w, k) = Self::sum(graph, &self.communities);
        (w - self.w, k - self.k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g() -> HierGraph<i64> {
        HierGraph::new(4)
    }

    #[test]
    fn window_tracks_intra_weight() {
        let mut g = g();
        let a = g.add_ground_node(0).unwrap();
        let c = g.add_community_node().unwrap();
        g.set_reference_to_community(a, c).unwrap();
        let win = AggregateWindow::open(&g, [c]);
        g.add_weight(c, c, 5).unwrap();
        assert_eq!(win.close(&g), (5, 25));
        assert_eq!(AggregateWindow::open(&g, []).close(&g), (0, 0));
    }

    #[test]
    fn resolution_must_be_non_negative() {
        assert!(Resolution::new(0.0).is_ok());
        assert_eq!(Resolution::new(-1.0), Err(ModularityError::BadResolution(-1.0)));
        assert!(Resolution::new(f64::NAN).is_err());
    }

    #[test]
    fn empty_graph_has_zero_modularity() {
        assert_eq!(modularity(&g(), 1.0), 0.0);
    }

    #[test]
    fn isolated_node_reward_is_zero() {
        let mut g = g();
        let a = g.add_ground_node(0).unwrap();
        let b = g.add_ground_node(1).unwrap();
        let z = g.add_ground_node(2).unwrap();
        let (ca, cb, cz) = (g.add_community_node().unwrap(), g.add_community_node().unwrap(), g.add_community_node().unwrap());
        g.set_reference_to_community(a, ca).unwrap();
        g.set_reference_to_community(b, cb).unwrap();
        g.set_reference_to_community(z, cz).unwrap();
        g.add_weight(a, b, 1).unwrap();
        g.add_weight(ca, cb, 1).unwrap();
        g.commit_aggregates(1, 0, 0);
        let mut t = NeighborWeights::new();
        t.build(&g, z, |v| g.resolve_community(v).ok());
        t.ensure(cz);
        assert_eq!(reward(&g, &t, z, cz, Some(ca), 1.0), Ok(0.0));
        assert_eq!(reward(&g, &t, z, cz, None, 1.0), Ok(0.0));
    }

    #[test]
    fn missing_source_entry_is_an_error() {
        let mut g = g();
        let a = g.add_ground_node(0).unwrap();
        let c = g.add_community_node().unwrap();
        g.set_reference_to_community(a, c).unwrap();
        g.add_weight(a, a, 1).unwrap();
        g.commit_aggregates(1, 0, 0);
        let t = NeighborWeights::new();
        assert_eq!(reward(&g, &t, a, c, None, 1.0), Err(ModularityError::MissingSource(c)));
    }

    #[test]
    fn table_merges_groups_and_skips_self_loops() {
        let mut g = g();
        let ids: Vec<_> = (0..4).map(|l| g.add_ground_node(l).unwrap()).collect();
        g.add_weight(ids[0], ids[0], 7).unwrap();
        g.add_weight(ids[0], ids[1], 2).unwrap();
        g.add_weight(ids[2], ids[0], 3).unwrap();
        g.add_weight(ids[0], ids[3], 1).unwrap();
        g.add_weight(ids[3], ids[0], 1).unwrap();
        let mut t = NeighborWeights::new();
        // group ids 1 and 2 together, 3 alone
        t.build(&g, ids[0], |v| Some(if v == ids[3] { ids[3] } else { ids[1] }));
        assert_eq!(t.iter().collect::<Vec<_>>(), vec![(ids[1], 5), (ids[3], 2)]);
    }
}
