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

//! Thread pool wrapper shared by the find and apply phases.

use rayon::prelude::*;

/// Work lists shorter than this run inline on the calling thread.
pub const PARALLEL_THRESHOLD: usize = 256;

/// Executes data-parallel loops on a dedicated pool, or inline when built
/// for a single thread. Results are always returned in input order, so the
/// output never depends on the thread count.
pub struct Exec {
    pool: Option<rayon::ThreadPool>,
    threads: usize,
}

impl Exec {
    pub fn new(threads: usize) -> Self {
        let threads = threads.max(1);
        let pool = (threads > 1).then(|| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .thread_name(|i| format!("ldleiden-{i}"))
                .build()
                .expect("failed to build worker pool")
        });
        Exec { pool, threads }
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    fn pool_for(&self, len: usize) -> Option<&rayon::ThreadPool> {
        self.pool.as_ref().filter(|_| len >= PARALLEL_THRESHOLD)
    }

    /// Maps every item with a per-worker scratch value built by `init`.
    pub fn map_init<T, S, R, I, F>(&self, items: &[T], init: I, f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        I: Fn() -> S + Sync + Send,
        F: Fn(&mut S, &T) -> R + Sync + Send,
    {
        match self.pool_for(items.len()) {
            Some(pool) => pool.install(|| items.par_iter().map_init(&init, |s, t| f(s, t)).collect()),
            None => {
                let mut scratch = init();
                items.iter().map(|t| f(&mut scratch, t)).collect()
            }
        }
    }

    /// Runs `f` over disjoint mutable items.
    pub fn for_each_mut<T, F>(&self, items: Vec<T>, f: F)
    where
        T: Send,
        F: Fn(T) + Sync + Send,
    {
        match self.pool_for(items.len()) {
            Some(pool) => pool.install(|| items.into_par_iter().for_each(f)),
            None => items.into_iter().for_each(f),
        }
    }

    /// Sorts in parallel when the pool is available. The sort is stable, so
    /// the result is identical to the sequential one.
    pub fn sort_by_key<T, K, F>(&self, items: &mut [T], key: F)
    where
        T: Send,
        K: Ord,
        F: Fn(&T) -> K + Sync + Send,
    {
        match self.pool_for(items.len()) {
            Some(pool) => pool.install(|| items.par_sort_by_key(key)),
            None => items.sort_by_key(key),
        }
    }
}

impl Default for Exec {
    fn default() -> Self {
        Exec::new(1)
    }
}

impl std::fmt::Debug for Exec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Exec").field("threads", &self.threads).finish()
    }
}
