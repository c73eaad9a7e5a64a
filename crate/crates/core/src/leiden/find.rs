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


//! Read-only search for improving moves. Each node is evaluated against the
//! graph as it stands, on a worker-private neighbour table.

use crate::graph::NodeId;
use crate::modularity::{reward_terms, NeighborWeights};
use crate::weight::Weight;

use super::moves::{Move, Target};
use super::Engine;

impl<W: Weight> Engine<W> {
    /// Best strictly improving community move for every node of `s`. Ties
    /// between existing communities go to the lowest id; a fresh community
    /// wins only when strictly better than every existing option.
    pub fn find_moves(&self, s: &[NodeId]) -> Vec<Move> {
        let g = &self.graph;
        let m = g.total_weight();
        if W::wide_to_f64(m) <= 0.0 {
            return Vec::new();
        }
        let gamma = self.params.gamma;
        let found = self.exec.map_init(s, NeighborWeights::<W>::new, |table, &u| {
            let from = g.community_of(u);
            table.build(g, u, |v| Some(g.community_of(v)));
            best_move(g, m, gamma, table, u, from)
        });
        found.into_iter().flatten().collect()
    }

    /// Best strictly improving move of every node of `s` to another
    /// subcommunity (parent) inside its own community. Nodes without a
    /// parent are skipped.
    pub fn find_refine_moves(&self, s: &[NodeId]) -> Vec<Move> {
        let g = &self.graph;
        let m = g.total_weight();
        if W::wide_to_f64(m) <= 0.0 {
            return Vec::new();
        }
        let gamma = self.params.gamma;
        let found = self.exec.map_init(s, NeighborWeights::<W>::new, |table, &u| {
            let from = g.parent(u)?;
            let c = g.community_of(u);
            table.build(g, u, |v| if g.community_of(v) == c { g.parent(v) } else { None });
            best_move(g, m, gamma, table, u, from)
        });
        found.into_iter().flatten().collect()
    }
}

fn best_move<W: Weight>(
    g: &crate::graph::HierGraph<W>,
    m: W::Wide,
    gamma: f64,
    table: &mut NeighborWeights<W>,
    u: NodeId,
    from: NodeId,
) -> Option<Move> {
    table.ensure(from);
    let d_from = table.get(from).unwrap_or(W::ZERO);
    let node = (g.k_in(u), g.k_out(u));
    let source = (g.k_in(from), g.k_out(from));
    let mut best: Option<(Target, f64)> = None;
    let mut r_best = 0.0;
    for (z, d) in table.iter() {
        if z == from {
            continue;
        }
        let r = reward_terms(m, gamma, d, d_from, node, source, (g.k_in(z), g.k_out(z)));
        if r > r_best {
            r_best = r;
            best = Some((Target::Existing(z), r));
        }
    }
    let r = reward_terms(m, gamma, W::ZERO, d_from, node, source, (W::ZERO, W::ZERO));
    if r > r_best {
        best = Some((Target::New, r));
    }
    best.map(|(to, reward)| Move { node: u, from, to, reward })
}
