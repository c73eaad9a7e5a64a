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

//! The hierarchical inner graph.
//!
//! Nodes live in one flat arena indexed by [`NodeId`]. Level 0 holds one
//! ground node per input node; levels `1..=L` hold refined nodes, each one a
//! subcommunity of its children; community nodes form the top tier and
//! define the exposed partition. Every non-community node references either
//! a parent one level up or a community node directly.
//!
//! Edges only join nodes of the same tier and carry the lifted weight
//! `w(u, v) = sum of w(i, j)` over the ground members of `u` and `v`. Each
//! node stores one sorted adjacency list; an entry for neighbour `v` holds
//! both directions, `w(u, v)` and `w(v, u)`, so a directed graph needs no
//! second list and the self-loop is a single entry.
//!
//! The structure also tracks the three global aggregates behind modularity:
//! the total weight `m`, the intra-community weight `W` and the null-model
//! sum `K = sum over communities of K_in * K_out`.

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::exec::Exec;
use crate::weight::Weight;

/// Index of a node in the arena.
#[derive(Copy, Clone, Eq, PartialEq, Ord, PartialOrd, Hash, Debug)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Copy, Clone, Eq, PartialEq, Debug)]
pub enum NodeKind {
    Ground,
    Refined,
    Community,
}

/// Level reported for community nodes; they sit above every refined level.
pub const COMMUNITY_LEVEL: u8 = u8::MAX;

/// Largest supported number of refined levels.
pub const MAX_LEVELS: u8 = 254;

/// One adjacency entry: `out_w = w(owner, neighbor)`, `in_w = w(neighbor, owner)`.
#[derive(Copy, Clone, PartialEq, Debug)]
pub struct Entry<W> {
    pub neighbor: NodeId,
    pub out_w: W,
    pub in_w: W,
}

#[derive(Copy, Clone, PartialEq, Debug, Default)]
pub struct Aggregates<W: Weight> {
    /// Total edge weight.
    pub m: W::Wide,
    /// Sum of `w(c, c)` over community nodes.
    pub w: W::Wide,
    /// Sum of `K_in(c) * K_out(c)` over community nodes.
    pub k: W::Wide,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("node capacity exhausted")]
    CapacityExhausted,
    #[error("level {level} outside 1..={max}")]
    LevelOutOfRange { level: u8, max: u8 },
    #[error("{parent} (level {parent_level}) cannot be the parent of {child} (level {child_level})")]
    LevelMismatch {
        child: NodeId,
        child_level: u8,
        parent: NodeId,
        parent_level: u8,
    },
    #[error("{0} is not a community node")]
    NotACommunity(NodeId),
    #[error("{0} is a community node")]
    IsCommunity(NodeId),
    #[error("edge {0} -> {1} crosses levels")]
    CrossLevelEdge(NodeId, NodeId),
    #[error("reference chain from {0} does not reach a community")]
    BrokenChain(NodeId),
    #[error("unknown or freed node {0}")]
    UnknownNode(NodeId),
    #[error("ground label {0} already present")]
    DuplicateLabel(u64),
    #[error("{0} still has edges or children")]
    NotDetached(NodeId),
}

pub(crate) struct NodeRec<W> {
    pub(crate) kind: NodeKind,
    pub(crate) level: u8,
    pub(crate) alive: bool,
    pub(crate) label: u64,
    pub(crate) parent: Option<NodeId>,
    pub(crate) community: Option<NodeId>,
    pub(crate) children: u32,
    pub(crate) k_in: W,
    pub(crate) k_out: W,
    pub(crate) adj: Vec<Entry<W>>,
    /// `(epoch << 32) | community`; valid only while the epoch matches.
    cache: AtomicU64,
}

impl<W: Weight> NodeRec<W> {
    fn new(kind: NodeKind, level: u8) -> Self {
        NodeRec {
            kind,
            level,
            alive: true,
            label: 0,
            parent: None,
            community: None,
            children: 0,
            k_in: W::ZERO,
            k_out: W::ZERO,
            adj: Vec::new(),
            cache: AtomicU64::new(0),
        }
    }

    fn find(&self, v: NodeId) -> Result<usize, usize> {
        self.adj.binary_search_by_key(&v, |e| e.neighbor)
    }

    /// Applies merged half updates sorted by neighbour.
    fn apply(&mut self, ups: &[Half<W>]) {
        let mut dk_in = W::ZERO;
        let mut dk_out = W::ZERO;
        for h in ups {
            dk_in += h.d_in;
            dk_out += h.d_out;
        }
        self.k_in = (self.k_in + dk_in).normalize();
        self.k_out = (self.k_out + dk_out).normalize();

        if ups.len() > 8 && ups.len() * 8 > self.adj.len() {
            self.merge_in(ups);
            return;
        }
        for h in ups {
            match self.find(h.neighbor) {
                Ok(i) => {
                    let e = &mut self.adj[i];
                    e.out_w = (e.out_w + h.d_out).normalize();
                    e.in_w = (e.in_w + h.d_in).normalize();
                    if e.out_w.is_zero() && e.in_w.is_zero() {
                        self.adj.remove(i);
                    }
                }
                Err(i) => {
                    let out_w = h.d_out.normalize();
                    let in_w = h.d_in.normalize();
                    if !(out_w.is_zero() && in_w.is_zero()) {
                        self.adj.insert(i, Entry { neighbor: h.neighbor, out_w, in_w });
                    }
                }
            }
        }
    }

    fn merge_in(&mut self, ups: &[Half<W>]) {
        let old = std::mem::take(&mut self.adj);
        let mut merged = Vec::with_capacity(old.len() + ups.len());
        let mut push = |e: Entry<W>| {
            if !(e.out_w.is_zero() && e.in_w.is_zero()) {
                merged.push(e);
            }
        };
        let (mut i, mut j) = (0, 0);
        while i < old.len() || j < ups.len() {
            let take_old = j == ups.len() || (i < old.len() && old[i].neighbor < ups[j].neighbor);
            let take_up = i == old.len() || (j < ups.len() && ups[j].neighbor < old[i].neighbor);
            if take_old {
                push(old[i]);
                i += 1;
            } else if take_up {
                let h = &ups[j];
                push(Entry { neighbor: h.neighbor, out_w: h.d_out.normalize(), in_w: h.d_in.normalize() });
                j += 1;
            } else {
                let (e, h) = (old[i], &ups[j]);
                push(Entry {
                    neighbor: e.neighbor,
                    out_w: (e.out_w + h.d_out).normalize(),
                    in_w: (e.in_w + h.d_in).normalize(),
                });
                i += 1;
                j += 1;
            }
        }
        self.adj = merged;
    }
}

#[derive(Copy, Clone, Debug)]
struct Half<W> {
    owner: NodeId,
    neighbor: NodeId,
    d_out: W,
    d_in: W,
}

/// The hierarchical inner graph together with its modularity aggregates.
pub struct HierGraph<W: Weight = i64> {
    nodes: Vec<NodeRec<W>>,
    max_level: u8,
    /// Free lists, one per level `0..=L` plus one for community nodes.
    free: Vec<Vec<NodeId>>,
    labels: HashMap<u64, NodeId>,
    ground: Vec<NodeId>,
    agg: Aggregates<W>,
    epoch: u32,
    walks: AtomicU64,
    communities: usize,
    orphans: Vec<NodeId>,
    pub(crate) negative_weight_events: u64,
}

impl<W: Weight> HierGraph<W> {
    /// Creates an empty structure with `max_level` refined levels.
    pub fn new(max_level: u8) -> Self {
        assert!((1..=MAX_LEVELS).contains(&max_level), "max_level must be in 1..={MAX_LEVELS}");
        HierGraph {
            nodes: Vec::new(),
            max_level,
            free: vec![Vec::new(); max_level as usize + 2],
            labels: HashMap::new(),
            ground: Vec::new(),
            agg: Aggregates::default(),
            epoch: 1,
            walks: AtomicU64::new(0),
            communities: 0,
            orphans: Vec::new(),
            negative_weight_events: 0,
        }
    }

    pub fn max_level(&self) -> u8 {
        self.max_level
    }

    /// Number of arena slots, including freed ones.
    pub fn capacity(&self) -> usize {
        self.nodes.len()
    }

    pub fn live_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.alive)
            .map(|(i, _)| NodeId(i as u32))
    }

    pub fn contains(&self, u: NodeId) -> bool {
        self.nodes.get(u.index()).is_some_and(|n| n.alive)
    }

    #[inline]
    pub(crate) fn rec(&self, u: NodeId) -> &NodeRec<W> {
        &self.nodes[u.index()]
    }

    #[inline]
    fn rec_mut(&mut self, u: NodeId) -> &mut NodeRec<W> {
        &mut self.nodes[u.index()]
    }

    fn live(&self, u: NodeId) -> Result<&NodeRec<W>, GraphError> {
        self.nodes.get(u.index()).filter(|n| n.alive).ok_or(GraphError::UnknownNode(u))
    }

    #[inline]
    pub fn kind(&self, u: NodeId) -> NodeKind {
        self.rec(u).kind
    }

    /// Level of `u`; community nodes report [`COMMUNITY_LEVEL`].
    #[inline]
    pub fn level(&self, u: NodeId) -> u8 {
        self.rec(u).level
    }

    #[inline]
    pub fn parent(&self, u: NodeId) -> Option<NodeId> {
        self.rec(u).parent
    }

    #[inline]
    pub fn community_ref(&self, u: NodeId) -> Option<NodeId> {
        self.rec(u).community
    }

    /// The direct upward reference: the parent if set, else the community.
    #[inline]
    pub fn container(&self, u: NodeId) -> Option<NodeId> {
        let r = self.rec(u);
        r.parent.or(r.community)
    }

    /// Number of nodes whose parent or community reference points at `u`.
    pub fn child_count(&self, u: NodeId) -> u32 {
        self.rec(u).children
    }

    #[inline]
    pub fn k_in(&self, u: NodeId) -> W {
        self.rec(u).k_in
    }

    #[inline]
    pub fn k_out(&self, u: NodeId) -> W {
        self.rec(u).k_out
    }

    /// Sorted adjacency of `u`, self-loop included.
    #[inline]
    pub fn adjacency(&self, u: NodeId) -> &[Entry<W>] {
        &self.rec(u).adj
    }

    /// Neighbours of `u` other than itself.
    pub fn neighbors(&self, u: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adjacency(u).iter().map(|e| e.neighbor).filter(move |&v| v != u)
    }

    /// `w(u, v)`, zero when the edge is absent.
    pub fn weight(&self, u: NodeId, v: NodeId) -> W {
        let r = self.rec(u);
        match r.find(v) {
            Ok(i) => r.adj[i].out_w,
            Err(_) => W::ZERO,
        }
    }

    pub fn label(&self, u: NodeId) -> Option<u64> {
        let r = self.rec(u);
        (r.kind == NodeKind::Ground).then_some(r.label)
    }

    pub fn ground_node(&self, label: u64) -> Option<NodeId> {
        self.labels.get(&label).copied()
    }

    /// Ground nodes in first-seen order.
    pub fn ground_nodes(&self) -> &[NodeId] {
        &self.ground
    }

    /// Live community nodes in id order.
    pub fn community_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.live_nodes().filter(|&u| self.kind(u) == NodeKind::Community)
    }

    /// Number of live community nodes.
    pub fn community_count(&self) -> usize {
        self.communities
    }

    pub fn aggregates(&self) -> Aggregates<W> {
        self.agg
    }

    pub fn total_weight(&self) -> W::Wide {
        self.agg.m
    }

    /// Count of deltas that drove a floating weight negative.
    pub fn negative_weight_events(&self) -> u64 {
        self.negative_weight_events
    }

    pub(crate) fn commit_aggregates(&mut self, dm: W::Wide, dw: W::Wide, dk: W::Wide) {
        self.agg.m += dm;
        self.agg.w += dw;
        self.agg.k += dk;
    }

    /// Contribution of one community to `W` and `K`.
    pub fn community_contribution(&self, c: NodeId) -> (W::Wide, W::Wide) {
        let r = self.rec(c);
        (self.weight(c, c).widen(), r.k_in.widen() * r.k_out.widen())
    }

    fn alloc(&mut self, kind: NodeKind, level: u8) -> Result<NodeId, GraphError> {
        let tier = if kind == NodeKind::Community { self.max_level as usize + 1 } else { level as usize };
        if let Some(id) = self.free[tier].pop() {
            let slot = self.rec_mut(id);
            let mut adj = std::mem::take(&mut slot.adj);
            adj.clear();
            *slot = NodeRec::new(kind, level);
            slot.adj = adj;
            return Ok(id);
        }
        if self.nodes.len() >= u32::MAX as usize {
            return Err(GraphError::CapacityExhausted);
        }
        self.nodes.push(NodeRec::new(kind, level));
        Ok(NodeId(self.nodes.len() as u32 - 1))
    }

    /// Adds a ground node for an external label.
    pub fn add_ground_node(&mut self, label: u64) -> Result<NodeId, GraphError> {
        if self.labels.contains_key(&label) {
            return Err(GraphError::DuplicateLabel(label));
        }
        let id = self.alloc(NodeKind::Ground, 0)?;
        self.rec_mut(id).label = label;
        self.labels.insert(label, id);
        self.ground.push(id);
        Ok(id)
    }

    /// Adds a refined node at `level` in `1..=L`.
    pub fn add_node(&mut self, level: u8) -> Result<NodeId, GraphError> {
        if level == 0 || level > self.max_level {
            return Err(GraphError::LevelOutOfRange { level, max: self.max_level });
        }
        self.alloc(NodeKind::Refined, level)
    }

    pub fn add_community_node(&mut self) -> Result<NodeId, GraphError> {
        let id = self.alloc(NodeKind::Community, COMMUNITY_LEVEL)?;
        self.communities += 1;
        Ok(id)
    }

    /// Frees a node that has no edges and no children. Its own upward
    /// reference is dropped.
    pub fn remove_node(&mut self, u: NodeId) -> Result<(), GraphError> {
        let r = self.live(u)?;
        if r.children > 0 || !r.adj.is_empty() {
            return Err(GraphError::NotDetached(u));
        }
        self.free_node(u);
        Ok(())
    }

    fn free_node(&mut self, u: NodeId) {
        self.detach(u);
        let (kind, level, label) = {
            let r = self.rec(u);
            (r.kind, r.level, r.label)
        };
        match kind {
            NodeKind::Ground => {
                self.labels.remove(&label);
                if let Some(pos) = self.ground.iter().position(|&g| g == u) {
                    self.ground.remove(pos);
                }
            }
            NodeKind::Community => self.communities -= 1,
            NodeKind::Refined => {}
        }
        let tier = if kind == NodeKind::Community { self.max_level as usize + 1 } else { level as usize };
        let r = self.rec_mut(u);
        r.alive = false;
        r.k_in = W::ZERO;
        r.k_out = W::ZERO;
        self.free[tier].push(u);
    }

    /// Drops the upward reference of `u`.
    fn detach(&mut self, u: NodeId) {
        let r = self.rec_mut(u);
        let old = r.parent.take().or(r.community.take());
        r.cache.store(0, Ordering::Relaxed);
        if let Some(o) = old {
            let o_rec = self.rec_mut(o);
            o_rec.children -= 1;
            if o_rec.children == 0 {
                self.orphans.push(o);
            }
        }
    }

    /// Points `v` at parent `p` one level up, replacing any previous
    /// parent or community reference.
    pub fn set_parent(&mut self, v: NodeId, p: NodeId) -> Result<(), GraphError> {
        let vr = self.live(v)?;
        let pr = self.live(p)?;
        if vr.kind == NodeKind::Community {
            return Err(GraphError::IsCommunity(v));
        }
        if pr.kind != NodeKind::Refined || pr.level != vr.level + 1 {
            return Err(GraphError::LevelMismatch {
                child: v,
                child_level: vr.level,
                parent: p,
                parent_level: pr.level,
            });
        }
        self.link(v, Some(p), None);
        Ok(())
    }

    /// Points `v` directly at community `c`, replacing any previous reference.
    pub fn set_reference_to_community(&mut self, v: NodeId, c: NodeId) -> Result<(), GraphError> {
        let vr = self.live(v)?;
        if vr.kind == NodeKind::Community {
            return Err(GraphError::IsCommunity(v));
        }
        if self.live(c)?.kind != NodeKind::Community {
            return Err(GraphError::NotACommunity(c));
        }
        self.link(v, None, Some(c));
        Ok(())
    }

    fn link(&mut self, v: NodeId, parent: Option<NodeId>, community: Option<NodeId>) {
        let target = parent.or(community).expect("link needs a target");
        self.rec_mut(target).children += 1;
        self.detach(v);
        let r = self.rec_mut(v);
        r.parent = parent;
        r.community = community;
    }

    /// Sets `w(u, v)` to exactly `w`; a zero weight removes the edge.
    /// Degree sums are left to the caller.
    pub fn set_edge(&mut self, u: NodeId, v: NodeId, w: W) -> Result<(), GraphError> {
        self.check_pair(u, v)?;
        let current = self.weight(u, v);
        let d = w - current;
        self.apply_halves(edge_halves(u, v, d).into_iter().flatten().collect(), &Exec::default(), false);
        Ok(())
    }

    fn check_pair(&self, u: NodeId, v: NodeId) -> Result<(), GraphError> {
        let (a, b) = (self.live(u)?, self.live(v)?);
        let same_tier = match (a.kind, b.kind) {
            (NodeKind::Community, NodeKind::Community) => true,
            (NodeKind::Community, _) | (_, NodeKind::Community) => false,
            _ => a.level == b.level,
        };
        if same_tier {
            Ok(())
        } else {
            Err(GraphError::CrossLevelEdge(u, v))
        }
    }

    /// Adds `w` to `w(u, v)` and to `K_out(u)`, `K_in(v)`.
    pub fn add_weight(&mut self, u: NodeId, v: NodeId, w: W) -> Result<(), GraphError> {
        self.check_pair(u, v)?;
        self.add_weights(&[(u, v, w)], &Exec::default());
        Ok(())
    }

    /// Batched [`add_weight`](Self::add_weight). Endpoints must be live and
    /// share a tier; the work is sharded by owning node, so every adjacency
    /// list is mutated by exactly one worker.
    pub(crate) fn add_weights(&mut self, deltas: &[(NodeId, NodeId, W)], exec: &Exec) {
        let mut halves = Vec::with_capacity(deltas.len() * 2);
        for &(u, v, w) in deltas {
            debug_assert!(self.check_pair(u, v).is_ok(), "bad pair {u} {v}");
            halves.extend(edge_halves(u, v, w).into_iter().flatten());
        }
        self.apply_halves(halves, exec, true);
    }

    fn apply_halves(&mut self, mut halves: Vec<Half<W>>, exec: &Exec, with_degrees: bool) {
        if halves.is_empty() {
            return;
        }
        exec.sort_by_key(&mut halves, |h| (h.owner, h.neighbor));
        // merge repeated (owner, neighbor) pairs
        let mut merged: Vec<Half<W>> = Vec::with_capacity(halves.len());
        for h in halves {
            match merged.last_mut() {
                Some(last) if last.owner == h.owner && last.neighbor == h.neighbor => {
                    last.d_out += h.d_out;
                    last.d_in += h.d_in;
                }
                _ => merged.push(h),
            }
        }
        let mut groups: Vec<(NodeId, &[Half<W>])> = Vec::new();
        let mut start = 0;
        for i in 1..=merged.len() {
            if i == merged.len() || merged[i].owner != merged[start].owner {
                groups.push((merged[start].owner, &merged[start..i]));
                start = i;
            }
        }
        let mut targets = Vec::with_capacity(groups.len());
        let mut rest: &mut [NodeRec<W>] = &mut self.nodes;
        let mut offset = 0usize;
        for (owner, ups) in groups {
            let tail = std::mem::take(&mut rest);
            let (_, tail) = tail.split_at_mut(owner.index() - offset);
            let (node, tail) = tail.split_first_mut().expect("owner in range");
            targets.push((node, ups));
            rest = tail;
            offset = owner.index() + 1;
        }
        exec.for_each_mut(targets, |(node, ups)| {
            let (k_in, k_out) = (node.k_in, node.k_out);
            node.apply(ups);
            if !with_degrees {
                node.k_in = k_in;
                node.k_out = k_out;
            }
        });
    }

    /// Starts a new cache epoch; every cached community becomes stale.
    pub fn bump_epoch(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            for n in &self.nodes {
                n.cache.store(0, Ordering::Relaxed);
            }
            self.epoch = 1;
        }
    }

    pub fn epoch(&self) -> u32 {
        self.epoch
    }

    /// Number of uncached chain walks performed so far.
    pub fn walk_count(&self) -> u64 {
        self.walks.load(Ordering::Relaxed)
    }

    /// The community node reached from `u` through its parent chain. The
    /// result is cached until the next epoch.
    pub fn resolve_community(&self, u: NodeId) -> Result<NodeId, GraphError> {
        let r = self.live(u)?;
        if r.kind == NodeKind::Community {
            return Err(GraphError::IsCommunity(u));
        }
        let packed = r.cache.load(Ordering::Relaxed);
        if (packed >> 32) as u32 == self.epoch {
            return Ok(NodeId(packed as u32));
        }
        self.walks.fetch_add(1, Ordering::Relaxed);
        let mut x = r;
        for _ in 0..=self.max_level as usize + 1 {
            match (x.parent, x.community) {
                (Some(p), _) => x = self.live(p).map_err(|_| GraphError::BrokenChain(u))?,
                (None, Some(c)) => {
                    r.cache.store(((self.epoch as u64) << 32) | c.0 as u64, Ordering::Relaxed);
                    return Ok(c);
                }
                (None, None) => break,
            }
        }
        Err(GraphError::BrokenChain(u))
    }

    /// Infallible [`resolve_community`](Self::resolve_community) for engine
    /// internals, where a broken chain is a corrupted structure.
    #[inline]
    pub(crate) fn community_of(&self, u: NodeId) -> NodeId {
        match self.resolve_community(u) {
            Ok(c) => c,
            Err(e) => panic!("hierarchy invariant violated: {e}"),
        }
    }

    pub(crate) fn set_cached_community(&self, u: NodeId, c: NodeId) {
        self.rec(u).cache.store(((self.epoch as u64) << 32) | c.0 as u64, Ordering::Relaxed);
    }

    /// Frees every refined or community node left without children, then
    /// cascades upward. Only safe when no pending update references them.
    pub fn collect_garbage(&mut self) -> usize {
        let mut freed = 0;
        while let Some(u) = self.orphans.pop() {
            let r = self.rec(u);
            if !r.alive || r.children > 0 || r.kind == NodeKind::Ground {
                continue;
            }
            if !r.adj.is_empty() {
                if W::EXACT {
                    debug_assert!(false, "childless node {u} still has edges");
                    continue;
                }
                // floating residue: drop the mirrored entries as well
                let adj = std::mem::take(&mut self.rec_mut(u).adj);
                for e in adj.into_iter().filter(|e| e.neighbor != u) {
                    let nr = self.rec_mut(e.neighbor);
                    if let Ok(i) = nr.find(u) {
                        nr.adj.remove(i);
                    }
                }
            }
            self.free_node(u);
            freed += 1;
        }
        freed
    }

    /// Structural self-check: reference levels, child counts, adjacency
    /// symmetry and tiers. Weight consistency is the oracle's business.
    pub fn check_structure(&self) -> Result<(), String> {
        let mut children = vec![0u32; self.nodes.len()];
        for u in self.live_nodes() {
            let r = self.rec(u);
            match r.kind {
                NodeKind::Community => {
                    if r.parent.is_some() || r.community.is_some() {
                        return Err(format!("community {u} has an upward reference"));
                    }
                }
                _ => {
                    if r.parent.is_some() && r.community.is_some() {
                        return Err(format!("{u} has both references"));
                    }
                    if (r.kind == NodeKind::Ground) != (r.level == 0) {
                        return Err(format!("{u} kind/level mismatch"));
                    }
                    if r.level > self.max_level {
                        return Err(format!("{u} above level L"));
                    }
                }
            }
            if let Some(p) = r.parent {
                if !self.contains(p) || self.level(p) != r.level + 1 || self.kind(p) != NodeKind::Refined {
                    return Err(format!("{u} has invalid parent {p}"));
                }
                children[p.index()] += 1;
            }
            if let Some(c) = r.community {
                if !self.contains(c) || self.kind(c) != NodeKind::Community {
                    return Err(format!("{u} has invalid community {c}"));
                }
                children[c.index()] += 1;
            }
            for w in r.adj.windows(2) {
                if w[0].neighbor >= w[1].neighbor {
                    return Err(format!("adjacency of {u} not sorted"));
                }
            }
            for e in &r.adj {
                if e.out_w.is_zero() && e.in_w.is_zero() {
                    return Err(format!("zero entry {u} -> {}", e.neighbor));
                }
                if !self.contains(e.neighbor) || self.check_pair(u, e.neighbor).is_err() {
                    return Err(format!("bad neighbour {} of {u}", e.neighbor));
                }
                let back = self.rec(e.neighbor);
                let Ok(i) = back.find(u) else {
                    return Err(format!("missing mirror {} -> {u}", e.neighbor));
                };
                if back.adj[i].out_w != e.in_w || back.adj[i].in_w != e.out_w {
                    return Err(format!("asymmetric entry {u} <-> {}", e.neighbor));
                }
            }
        }
        for u in self.live_nodes() {
            if children[u.index()] != self.rec(u).children {
                return Err(format!("child count of {u} is stale"));
            }
        }
        if self.community_nodes().count() != self.communities {
            return Err("community count is stale".into());
        }
        Ok(())
    }
}

fn edge_halves<W: Weight>(u: NodeId, v: NodeId, w: W) -> [Option<Half<W>>; 2] {
    if w.is_zero() {
        return [None, None];
    }
    if u == v {
        return [Some(Half { owner: u, neighbor: u, d_out: w, d_in: w }), None];
    }
    [
        Some(Half { owner: u, neighbor: v, d_out: w, d_in: W::ZERO }),
        Some(Half { owner: v, neighbor: u, d_out: W::ZERO, d_in: w }),
    ]
}
