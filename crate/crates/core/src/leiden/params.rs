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


use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// How [`decouple`](super::decouple) reacts to the first conflicting move.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash)]
pub enum DecouplePolicy {
    /// Stop scanning; everything after the conflict is dropped.
    Break,
    /// Drop the conflicting move and keep scanning. The default: with
    /// `Break` a large batch applies only a short prefix of its moves per
    /// round and quality stalls.
    #[default]
    Skip,
}

impl fmt::Display for DecouplePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecouplePolicy::Break => "break",
            DecouplePolicy::Skip => "skip",
        })
    }
}

impl FromStr for DecouplePolicy {
    type Err = ParamsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "break" => Ok(DecouplePolicy::Break),
            "skip" => Ok(DecouplePolicy::Skip),
            _ => Err(ParamsError::UnknownPolicy(s.to_string())),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ParamsError {
    #[error("resolution must be finite and >= 0, got {0}")]
    Gamma(f64),
    #[error("levels must be in 1..=254, got {0}")]
    Levels(u8),
    #[error("outer iterations must be >= 1")]
    Outer,
    #[error("inner iterations must be >= 1")]
    Inner,
    #[error("alpha must be in [0, 1), got {0}")]
    Alpha(f64),
    #[error("beta must be in [0, 1), got {0}")]
    Beta(f64),
    #[error("thread count must be >= 1")]
    Threads,
    #[error("unknown decouple policy {0:?} (expected break or skip)")]
    UnknownPolicy(String),
}

/// Tuning knobs of one engine.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    /// Resolution `γ`.
    pub gamma: f64,
    /// Number of refined levels `L`.
    pub levels: u8,
    /// Outer iterations `N`.
    pub outer: usize,
    /// Iterations per stage `M`.
    pub inner: usize,
    /// Relative modularity gain below which a move stage stops.
    pub alpha: f64,
    /// Fraction of moved nodes below which a stage stops.
    pub beta: f64,
    pub decouple: DecouplePolicy,
    pub threads: usize,
    /// Carried for reproducible runs; the engine itself is deterministic.
    pub seed: u64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            gamma: 1.0,
            levels: 4,
            outer: 2,
            inner: 5,
            alpha: 0.001,
            beta: 0.01,
            decouple: DecouplePolicy::Skip,
            threads: 1,
            seed: 0,
        }
    }
}

impl Params {
    pub fn validate(&self) -> Result<(), ParamsError> {
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(ParamsError::Gamma(self.gamma));
        }
        if self.levels == 0 || self.levels > crate::graph::MAX_LEVELS {
            return Err(ParamsError::Levels(self.levels));
        }
        if self.outer == 0 {
            return Err(ParamsError::Outer);
        }
        if self.inner == 0 {
            return Err(ParamsError::Inner);
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(ParamsError::Alpha(self.alpha));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(ParamsError::Beta(self.beta));
        }
        if self.threads == 0 {
            return Err(ParamsError::Threads);
        }
        Ok(())
    }
}
