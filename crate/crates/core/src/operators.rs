// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Associative reduction operators over element vectors.
//!
//! Every operator is applied element-wise with the lower-ranked operand on
//! the left. Two of the builtins are non-commutative so that any algorithm
//! relying on commutativity shows up as a wrong answer.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::Error;

/// Prime modulus for [`Mat2`] arithmetic.
pub const MAT2_MODULUS: u64 = 1_000_000_007;

/// 2×2 matrix `[a, b; c, d]` over the integers modulo [`MAT2_MODULUS`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mat2(pub [u64; 4]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([1, 0, 0, 1]);

    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        Mat2([a % MAT2_MODULUS, b % MAT2_MODULUS, c % MAT2_MODULUS, d % MAT2_MODULUS])
    }

    pub fn mul(&self, rhs: &Mat2) -> Mat2 {
        let [a, b, c, d] = self.0;
        let [e, f, g, h] = rhs.0;
        let m = MAT2_MODULUS;
        Mat2([
            (a * e % m + b * g % m) % m,
            (a * f % m + b * h % m) % m,
            (c * e % m + d * g % m) % m,
            (c * f % m + d * h % m) % m,
        ])
    }
}

/// Half-open window `[lo, hi)` of input ranks whose values were combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub lo: usize,
    pub hi: usize,
}

impl Interval {
    pub fn new(lo: usize, hi: usize) -> Self {
        debug_assert!(lo < hi, "empty interval [{lo}, {hi})");
        Interval { lo, hi }
    }

    /// The window contributed by a single input rank.
    pub fn unit(rank: usize) -> Self {
        Interval::new(rank, rank + 1)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.lo, self.hi)
    }
}

/// One element of an input or result vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Element {
    Int(i64),
    Str(String),
    Mat2(Mat2),
    Interval(Interval),
}

impl Element {
    fn kind(&self) -> &'static str {
        match self {
            Element::Int(_) => "int",
            Element::Str(_) => "string",
            Element::Mat2(_) => "mat2",
            Element::Interval(_) => "interval",
        }
    }
}

pub type ElementVector = Vec<Element>;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum OpError {
    #[error("operand lengths differ: {left} vs {right}")]
    Length { left: usize, right: usize },

    #[error("operator {op} cannot combine {left} with {right}")]
    Type {
        op: &'static str,
        left: &'static str,
        right: &'static str,
    },

    #[error("non-adjacent windows {left} ⊕ {right}")]
    NotAdjacent { left: Interval, right: Interval },
}

/// An associative binary operator applied element-wise to vectors.
pub trait Operator: Send + Sync {
    fn name(&self) -> &str;

    /// Metadata only; no algorithm may depend on it.
    fn is_commutative(&self) -> bool;

    /// Wire size of one element, used for byte accounting.
    fn elem_size(&self) -> usize {
        8
    }

    fn combine(&self, left: &Element, right: &Element) -> Result<Element, OpError>;

    /// One operator application: `result[i] = left[i] ⊕ right[i]`.
    #[inline]
    fn reduce(&self, left: &[Element], right: &[Element]) -> Result<ElementVector, OpError> {
        if left.len() != right.len() {
            return Err(OpError::Length {
                left: left.len(),
                right: right.len(),
            });
        }
        if left.is_empty() {
            return Ok(Vec::new());
        }
        combine_all(self, left, right)
    }
}

// Kept out of line so the empty and mismatched cases of `reduce` stay
// cheap enough to inline.
#[inline(never)]
fn combine_all<O: Operator + ?Sized>(op: &O, left: &[Element], right: &[Element]) -> Result<ElementVector, OpError> {
    left.iter().zip(right).map(|(l, r)| op.combine(l, r)).collect()
}

impl<O: Operator + ?Sized> Operator for &O {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn is_commutative(&self) -> bool {
        (**self).is_commutative()
    }

    fn elem_size(&self) -> usize {
        (**self).elem_size()
    }

    fn combine(&self, left: &Element, right: &Element) -> Result<Element, OpError> {
        (**self).combine(left, right)
    }

    #[inline]
    fn reduce(&self, left: &[Element], right: &[Element]) -> Result<ElementVector, OpError> {
        (**self).reduce(left, right)
    }
}

/// The operators addressable by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BuiltinOp {
    #[serde(rename = "int-sum")]
    IntSum,
    #[serde(rename = "int-max")]
    IntMax,
    #[serde(rename = "int-xor")]
    IntXor,
    #[serde(rename = "string-concat")]
    StringConcat,
    #[serde(rename = "mat2-mult")]
    Mat2Mult,
}

impl BuiltinOp {
    pub const ALL: [BuiltinOp; 5] = [
        BuiltinOp::IntSum,
        BuiltinOp::IntMax,
        BuiltinOp::IntXor,
        BuiltinOp::StringConcat,
        BuiltinOp::Mat2Mult,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BuiltinOp::IntSum => "int-sum",
            BuiltinOp::IntMax => "int-max",
            BuiltinOp::IntXor => "int-xor",
            BuiltinOp::StringConcat => "string-concat",
            BuiltinOp::Mat2Mult => "mat2-mult",
        }
    }

    fn mismatch(self, left: &Element, right: &Element) -> OpError {
        OpError::Type {
            op: self.as_str(),
            left: left.kind(),
            right: right.kind(),
        }
    }
}

impl fmt::Display for BuiltinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BuiltinOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        builtin_operator(s)
    }
}

/// Looks up a builtin operator by its CLI name.
pub fn builtin_operator(name: &str) -> Result<BuiltinOp, Error> {
    BuiltinOp::ALL
        .into_iter()
        .find(|op| op.as_str() == name)
        .ok_or_else(|| Error::Parameter(format!("unknown operator `{name}`")))
}

impl Operator for BuiltinOp {
    fn name(&self) -> &str {
        self.as_str()
    }

    fn is_commutative(&self) -> bool {
        !matches!(self, BuiltinOp::StringConcat | BuiltinOp::Mat2Mult)
    }

    fn elem_size(&self) -> usize {
        match self {
            BuiltinOp::Mat2Mult => 32,
            _ => 8,
        }
    }

    fn combine(&self, left: &Element, right: &Element) -> Result<Element, OpError> {
        use Element::*;
        match (self, left, right) {
            (BuiltinOp::IntSum, Int(a), Int(b)) => Ok(Int(a.wrapping_add(*b))),
            (BuiltinOp::IntMax, Int(a), Int(b)) => Ok(Int(*a.max(b))),
            (BuiltinOp::IntXor, Int(a), Int(b)) => Ok(Int(a ^ b)),
            (BuiltinOp::StringConcat, Str(a), Str(b)) => {
                let mut s = String::with_capacity(a.len() + b.len());
                s.push_str(a);
                s.push_str(b);
                Ok(Str(s))
            }
            (BuiltinOp::Mat2Mult, Mat2(a), Mat2(b)) => Ok(Mat2(a.mul(b))),
            _ => Err(self.mismatch(left, right)),
        }
    }
}

/// Merges adjacent rank windows `[a, b) ⊕ [b, c) = [a, c)` and rejects
/// everything else. Running a scan over inputs `[r, r + 1)` with this
/// operator checks that every application combines contiguous ranges in
/// ascending rank order.
#[derive(Clone, Copy, Debug, Default)]
pub struct IntervalOp;

pub fn interval_operator() -> IntervalOp {
    IntervalOp
}

impl Operator for IntervalOp {
    fn name(&self) -> &str {
        "interval"
    }

    fn is_commutative(&self) -> bool {
        false
    }

    fn elem_size(&self) -> usize {
        16
    }

    fn combine(&self, left: &Element, right: &Element) -> Result<Element, OpError> {
        match (left, right) {
            (Element::Interval(l), Element::Interval(r)) => {
                if l.hi == r.lo {
                    Ok(Element::Interval(Interval::new(l.lo, r.hi)))
                } else {
                    Err(OpError::NotAdjacent {
                        left: *l,
                        right: *r,
                    })
                }
            }
            _ => Err(OpError::Type {
                op: "interval",
                left: left.kind(),
                right: right.kind(),
            }),
        }
    }
}

/// Wraps an operator and counts every `reduce` call, independent of the
/// vector length.
#[derive(Debug)]
pub struct CountingOperator<O> {
    inner: O,
    count: AtomicU64,
}

impl<O: Operator> CountingOperator<O> {
    pub fn new(inner: O) -> Self {
        CountingOperator {
            inner,
            count: AtomicU64::new(0),
        }
    }

    pub fn count(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.count.store(0, Ordering::Relaxed);
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<O: Operator> Operator for CountingOperator<O> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn is_commutative(&self) -> bool {
        self.inner.is_commutative()
    }

    fn elem_size(&self) -> usize {
        self.inner.elem_size()
    }

    fn combine(&self, left: &Element, right: &Element) -> Result<Element, OpError> {
        self.inner.combine(left, right)
    }

    fn reduce(&self, left: &[Element], right: &[Element]) -> Result<ElementVector, OpError> {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.reduce(left, right)
    }
}
