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


//! Seeded synthetic graphs for tests and benchmarks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dynamics::BatchUpdate;
use crate::weight::Weight;

/// An undirected planted-partition graph: `blocks` groups of `size` nodes,
/// each pair linked with probability `p_in` inside a group and `p_out`
/// across. Returns each undirected edge once with its ground-truth block
/// per node (node `i` is in block `i / size`).
pub fn planted_partition(blocks: usize, size: usize, p_in: f64, p_out: f64, seed: u64) -> Vec<(u64, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = blocks * size;
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let p = if a / size == b / size { p_in } else { p_out };
            if rng.gen_bool(p) {
                edges.push((a as u64, b as u64));
            }
        }
    }
    edges
}

/// Same distribution as [`planted_partition`] but drawn with geometric
/// gaps, so sparse inter-block edges cost time proportional to their
/// number.
pub fn planted_partition_sparse(blocks: usize, size: usize, p_in: f64, p_out: f64, seed: u64) -> Vec<(u64, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (blocks * size) as u64;
    let mut edges = Vec::new();
    let mut sample_pairs = |lo: u64, hi_pairs: u64, p: f64, pair: &dyn Fn(u64) -> (u64, u64), out: &mut Vec<(u64, u64)>| {
        if p <= 0.0 {
            return;
        }
        let log_q = (1.0 - p).ln();
        let mut k: i64 = -1;
        loop {
            let skip = if p >= 1.0 { 0 } else { (rng.gen::<f64>().ln() / log_q).floor() as i64 };
            k += 1 + skip;
            if k as u64 >= hi_pairs {
                break;
            }
            out.push(pair(lo + k as u64));
        }
    };
    let s = size as u64;
    // intra-block pairs, index over the upper triangle of one block
    let tri = s * (s - 1) / 2;
    let unrank = |r: u64, width: u64| {
        // r-th pair (a < b) of 0..width in row-major order
        let mut a = 0;
        let mut left = r;
        while left >= width - 1 - a {
            left -= width - 1 - a;
            a += 1;
        }
        (a, a + 1 + left)
    };
    for blk in 0..blocks as u64 {
        let base = blk * s;
        sample_pairs(0, tri, p_in, &|r| {
            let (a, b) = unrank(r, s);
            (base + a, base + b)
        }, &mut edges);
    }
    // inter-block pairs over the full upper triangle, skipping intra pairs
    let all = n * (n - 1) / 2;
    let mut cross = Vec::new();
    sample_pairs(0, all, p_out, &|r| unrank(r, n), &mut cross);
    edges.extend(cross.into_iter().filter(|&(a, b)| a / s != b / s));
    edges.sort_unstable();
    edges
}

/// `k` cliques of `size` nodes arranged in a ring, consecutive cliques
/// joined by one edge.
pub fn ring_of_cliques(k: usize, size: usize) -> Vec<(u64, u64)> {
    let mut edges = Vec::new();
    for c in 0..k {
        let base = (c * size) as u64;
        for a in 0..size as u64 {
            for b in a + 1..size as u64 {
                edges.push((base + a, base + b));
            }
        }
        let next = (((c + 1) % k) * size) as u64;
        if k > 1 {
            edges.push((base + size as u64 - 1, next));
        }
    }
    edges
}

/// Mirrors undirected pairs into a weight-1 batch.
pub fn symmetric_batch<W: Weight>(pairs: &[(u64, u64)]) -> BatchUpdate<W> {
    let one = W::from_f64(1.0).expect("one is representable");
    pairs.iter().flat_map(|&(a, b)| [(a, b, one), (b, a, one)]).collect()
}

/// A random stream of mixed insert/delete batches on at most `nodes`
/// labels. Deletions only remove weight that is present, so every prefix
/// stays non-negative. Weights are small positive integers.
pub fn random_stream(nodes: u64, batches: usize, per_batch: usize, directed: bool, seed: u64) -> Vec<BatchUpdate<i64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut live: std::collections::BTreeMap<(u64, u64), i64> = Default::default();
    let mut out = Vec::with_capacity(batches);
    for _ in 0..batches {
        let mut batch = BatchUpdate::new();
        let mut touched: std::collections::BTreeMap<(u64, u64), i64> = Default::default();
        for _ in 0..per_batch {
            let delete = !live.is_empty() && rng.gen_bool(0.3);
            let (a, b, w) = if delete {
                let idx = rng.gen_range(0..live.len());
                let (&(a, b), &w) = live.iter().nth(idx).expect("index in range");
                let cut = rng.gen_range(1..=w);
                (a, b, -cut)
            } else {
                let a = rng.gen_range(0..nodes);
                let b = if rng.gen_bool(0.05) { a } else { rng.gen_range(0..nodes) };
                (a, b, rng.gen_range(1..=3))
            };
            let key = if directed || a <= b { (a, b) } else { (b, a) };
            let entry = live.entry(key).or_insert(0);
            *entry += w;
            if *entry == 0 {
                live.remove(&key);
            }
            *touched.entry(key).or_insert(0) += w;
            batch.push(key.0, key.1, w);
            if !directed && key.0 != key.1 {
                batch.push(key.1, key.0, w);
            }
        }
        out.push(batch);
    }
    out
}
