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


use std::collections::HashSet;

use crate::graph::NodeId;

use super::params::DecouplePolicy;

/// Destination of a move.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Target {
    Existing(NodeId),
    /// A fresh community (or subcommunity) created on apply.
    New,
}

impl Target {
    pub fn existing(self) -> Option<NodeId> {
        match self {
            Target::Existing(c) => Some(c),
            Target::New => None,
        }
    }
}

/// `node` leaves `from` for `to`, gaining `reward` modularity.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Move {
    pub node: NodeId,
    pub from: NodeId,
    pub to: Target,
    pub reward: f64,
}

impl Move {
    /// The move undoing an applied one. `self.to` must be resolved.
    pub fn reversed(&self) -> Move {
        Move {
            node: self.node,
            from: self.to.existing().expect("reverse of an unresolved move"),
            to: Target::Existing(self.from),
            reward: -self.reward,
        }
    }
}

/// Orders moves by reward, highest first, ties by node id.
pub fn sort_moves(moves: &mut [Move]) {
    moves.sort_by(|a, b| b.reward.total_cmp(&a.reward).then(a.node.cmp(&b.node)));
}

/// Keeps a conflict-free subset of `moves` so that no community both loses
/// and gains nodes. A move conflicts when its source already accepted a
/// node or its target already emitted one. Every `New` target counts as
/// its own fresh acceptor.
pub fn decouple(mut moves: Vec<Move>, policy: DecouplePolicy) -> Vec<Move> {
    sort_moves(&mut moves);
    let mut emitters = HashSet::new();
    let mut acceptors = HashSet::new();
    let mut out = Vec::with_capacity(moves.len());
    for m in moves {
        let conflict = acceptors.contains(&m.from) || m.to.existing().is_some_and(|t| emitters.contains(&t));
        if conflict {
            match policy {
                DecouplePolicy::Break => break,
                DecouplePolicy::Skip => continue,
            }
        }
        emitters.insert(m.from);
        if let Target::Existing(t) = m.to {
            acceptors.insert(t);
        }
        out.push(m);
    }
    out
}
