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

//! Edge-weight arithmetic.
//!
//! The engine is generic over its weight type. `i64` is the default and is
//! exact: every aggregate is maintained with integer additions and the
//! products that feed the null-model term are widened to `i128`. `f64` is
//! available for fractional weights; in that mode values whose magnitude
//! falls below [`FLOAT_ZERO_TOLERANCE`] are treated as absent edges.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

/// Magnitude below which a floating edge weight is considered zero.
pub const FLOAT_ZERO_TOLERANCE: f64 = 1e-12;

pub trait Weight:
    Copy
    + Default
    + PartialEq
    + PartialOrd
    + Debug
    + Display
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + Sum
    + 'static
{
    /// Accumulator for sums and products of weights.
    type Wide: Copy
        + Default
        + PartialEq
        + Debug
        + Display
        + Send
        + Sync
        + Add<Output = Self::Wide>
        + Sub<Output = Self::Wide>
        + Mul<Output = Self::Wide>
        + AddAssign
        + SubAssign
        + Sum;

    const ZERO: Self;
    /// True when arithmetic is exact (integer mode).
    const EXACT: bool;
    const NAME: &'static str;

    fn is_zero(self) -> bool;
    fn is_negative(self) -> bool {
        !self.is_zero() && self < Self::ZERO
    }
    fn widen(self) -> Self::Wide;
    fn to_f64(self) -> f64;
    fn wide_to_f64(w: Self::Wide) -> f64;
    /// Converts a parsed value; `None` when it is not representable
    /// (fractional values in integer mode, non-finite values).
    fn from_f64(x: f64) -> Option<Self>;
    /// Snaps values inside the zero tolerance to an exact zero.
    fn normalize(self) -> Self {
        if self.is_zero() {
            Self::ZERO
        } else {
            self
        }
    }
}

impl Weight for i64 {
    type Wide = i128;
    const ZERO: Self = 0;
    const EXACT: bool = true;
    const NAME: &'static str = "int";

    #[inline]
    fn is_zero(self) -> bool {
        self == 0
    }
    #[inline]
    fn widen(self) -> i128 {
        self as i128
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn wide_to_f64(w: i128) -> f64 {
        w as f64
    }
    fn from_f64(x: f64) -> Option<Self> {
        if x.is_finite() && x.fract() == 0.0 && x.abs() < 9.0e15 {
            Some(x as i64)
        } else {
            None
        }
    }
}

impl Weight for f64 {
    type Wide = f64;
    const ZERO: Self = 0.0;
    const EXACT: bool = false;
    const NAME: &'static str = "float";

    #[inline]
    fn is_zero(self) -> bool {
        self.abs() < FLOAT_ZERO_TOLERANCE
    }
    #[inline]
    fn widen(self) -> f64 {
        self
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn wide_to_f64(w: f64) -> f64 {
        w
    }
    fn from_f64(x: f64) -> Option<Self> {
        x.is_finite().then_some(x)
    }
}
