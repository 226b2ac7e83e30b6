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

//! Circulant skip schedules for the scan algorithms and the closed-form
//! round and operator-application predictions that go with them.
//!
//! All logarithms here are integer bit computations. The round and `q'`
//! formulas are knife-edge at `p = 2^q` and `p = 2^q + 1`, so no floating
//! point is used anywhere in this module.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `⌈log₂ n⌉` for `n ≥ 1` (and 0 for `n ≤ 1`).
pub fn ceil_log2(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

/// Number of processors taking part in a scan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct ProcCount(usize);

impl ProcCount {
    pub fn new(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::Parameter("processor count must be at least 1".into()));
        }
        Ok(Self(p))
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// `⌈log₂ p⌉`, the round lower bound for the inclusive scan.
    pub fn ceil_log2(self) -> u32 {
        ceil_log2(self.0)
    }
}

impl TryFrom<usize> for ProcCount {
    type Error = Error;

    fn try_from(p: usize) -> Result<Self> {
        Self::new(p)
    }
}

impl From<ProcCount> for usize {
    fn from(p: ProcCount) -> usize {
        p.0
    }
}

impl fmt::Display for ProcCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A fully resolved algorithm choice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variant {
    InclusiveStraightDoubling,
    ExclusiveQPrimeDoubling { qprime: u32 },
    ExclusiveRoughlyHalving,
}

impl Variant {
    pub fn is_exclusive(self) -> bool {
        !matches!(self, Variant::InclusiveStraightDoubling)
    }

    pub fn qprime(self) -> Option<u32> {
        match self {
            Variant::ExclusiveQPrimeDoubling { qprime } => Some(qprime),
            _ => None,
        }
    }

    pub fn validate(self, p: ProcCount) -> Result<()> {
        if let Variant::ExclusiveQPrimeDoubling { qprime } = self {
            check_qprime(p, qprime)?;
        }
        Ok(())
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::InclusiveStraightDoubling => f.write_str("inclusive"),
            Variant::ExclusiveQPrimeDoubling { qprime } => write!(f, "qprime({qprime})"),
            Variant::ExclusiveRoughlyHalving => f.write_str("halving"),
        }
    }
}

/// An algorithm as named by a user, before `p` is known.
///
/// The aliases resolve to a concrete [`Variant`] once the processor count
/// is fixed: `one` is `q' = 1`, `twoop` is `q' = ⌈log₂ p⌉` and `best` is
/// [`best_qprime`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Inclusive,
    QPrime(u32),
    One,
    TwoOp,
    Best,
    Halving,
}

impl Algorithm {
    /// The four exclusive algorithms compared throughout, in table order.
    pub const EXCLUSIVE: [Algorithm; 4] = [
        Algorithm::One,
        Algorithm::Best,
        Algorithm::TwoOp,
        Algorithm::Halving,
    ];

    pub fn resolve(self, p: ProcCount) -> Result<Variant> {
        // For p = 1 the exclusive variants never build a schedule; q' = 1
        // keeps the resolved value well formed.
        let q = p.ceil_log2().max(1);
        let variant = match self {
            Algorithm::Inclusive => Variant::InclusiveStraightDoubling,
            Algorithm::QPrime(qprime) => Variant::ExclusiveQPrimeDoubling { qprime },
            Algorithm::One => Variant::ExclusiveQPrimeDoubling { qprime: 1 },
            Algorithm::TwoOp => Variant::ExclusiveQPrimeDoubling { qprime: q },
            Algorithm::Best => Variant::ExclusiveQPrimeDoubling {
                qprime: if p.get() < 2 { 1 } else { best_qprime(p)? },
            },
            Algorithm::Halving => Variant::ExclusiveRoughlyHalving,
        };
        if p.get() >= 2 {
            variant.validate(p)?;
        }
        Ok(variant)
    }

    pub fn label(self) -> String {
        match self {
            Algorithm::Inclusive => "inclusive".into(),
            Algorithm::QPrime(n) => format!("qprime({n})"),
            Algorithm::One => "one".into(),
            Algorithm::TwoOp => "twoop".into(),
            Algorithm::Best => "best".into(),
            Algorithm::Halving => "halving".into(),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    /// Parses the plain names; `qprime` needs an explicit count and is
    /// accepted as `qprime:N`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inclusive" => Ok(Algorithm::Inclusive),
            "one" => Ok(Algorithm::One),
            "twoop" => Ok(Algorithm::TwoOp),
            "best" => Ok(Algorithm::Best),
            "halving" => Ok(Algorithm::Halving),
            other => other
                .strip_prefix("qprime:")
                .and_then(|n| n.parse().ok())
                .map(Algorithm::QPrime)
                .ok_or_else(|| Error::Parameter(format!("unknown variant `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Plain shift of the inputs one rank up.
    Shift,
    InclusivePhase,
    ExclusivePhase,
    HalvingPhase,
}

/// One communication round: every rank `r` receives from `r - (s - ε)`
/// and sends to `r + (s - ε)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RoundSpec {
    pub index: usize,
    pub skip: usize,
    pub phase: Phase,
    pub epsilon: u8,
}

impl RoundSpec {
    /// Rank displacement actually used on the wire.
    pub fn displacement(&self) -> usize {
        self.skip - self.epsilon as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipSchedule {
    pub p: ProcCount,
    pub variant: Variant,
    pub rounds: Vec<RoundSpec>,
    /// Total round count.
    pub q: u32,
    /// Inclusive-phase round count; 0 for the non-hybrid variants.
    pub qprime: u32,
    /// Inclusive-phase threshold `2^q'`, q'-doubling only.
    pub pprime: Option<usize>,
}

impl SkipSchedule {
    pub fn skips(&self) -> Vec<usize> {
        self.rounds.iter().map(|r| r.skip).collect()
    }
}

fn check_qprime(p: ProcCount, qprime: u32) -> Result<()> {
    let q = p.ceil_log2();
    if qprime < 1 || qprime > q {
        return Err(Error::Parameter(format!(
            "q' = {qprime} out of range 1..={q} for p = {p}"
        )));
    }
    Ok(())
}

fn check_nondegenerate(p: ProcCount) -> Result<()> {
    if p.get() < 2 {
        return Err(Error::Degenerate(p.get()));
    }
    Ok(())
}

/// Straight doubling skips `2^k` for `k < ⌈log₂ p⌉`. Empty for `p = 1`.
pub fn build_inclusive_schedule(p: ProcCount) -> SkipSchedule {
    let rounds: Vec<RoundSpec> = (0..p.ceil_log2())
        .map(|k| RoundSpec {
            index: k as usize,
            skip: 1 << k,
            phase: Phase::InclusivePhase,
            epsilon: 0,
        })
        .collect();
    SkipSchedule {
        p,
        variant: Variant::InclusiveStraightDoubling,
        q: rounds.len() as u32,
        rounds,
        qprime: 0,
        pprime: None,
    }
}

/// The round sequence of the q'-doubling exclusive scan: a shift round,
/// `q' - 1` doubling rounds of the inclusive phase, then the exclusive
/// phase starting at skip `2^q' - 1`.
pub fn build_qprime_schedule(p: ProcCount, qprime: u32) -> Result<SkipSchedule> {
    check_nondegenerate(p)?;
    check_qprime(p, qprime)?;
    let n = p.get();
    let pprime = 1usize << qprime;
    let mut rounds = vec![RoundSpec {
        index: 0,
        skip: 1,
        phase: Phase::Shift,
        epsilon: 0,
    }];
    let mut push = |skip, phase| {
        let index = rounds.len();
        rounds.push(RoundSpec {
            index,
            skip,
            phase,
            epsilon: 0,
        });
    };

    let mut s = 2;
    while s < pprime {
        push(s, Phase::InclusivePhase);
        s <<= 1;
    }
    s -= 1;
    while s < n - 1 {
        push(s, Phase::ExclusivePhase);
        s <<= 1;
    }

    Ok(SkipSchedule {
        p,
        variant: Variant::ExclusiveQPrimeDoubling { qprime },
        q: rounds.len() as u32,
        rounds,
        qprime,
        pprime: Some(pprime),
    })
}

/// Roughly halving skips `s_k = ((p - 1) >> (q - k)) + 1` with the
/// per-round correction `ε_k = odd(s_{k+1})`, `s_q = p`.
pub fn build_halving_schedule(p: ProcCount) -> Result<SkipSchedule> {
    check_nondegenerate(p)?;
    let n = p.get();
    let q = p.ceil_log2();
    let skip = |k: u32| ((n - 1) >> (q - k)) + 1;
    let rounds = (0..q)
        .map(|k| {
            if k == 0 {
                RoundSpec {
                    index: 0,
                    skip: skip(0),
                    phase: Phase::Shift,
                    epsilon: 0,
                }
            } else {
                RoundSpec {
                    index: k as usize,
                    skip: skip(k),
                    phase: Phase::HalvingPhase,
                    epsilon: (skip(k + 1) & 1) as u8,
                }
            }
        })
        .collect();
    Ok(SkipSchedule {
        p,
        variant: Variant::ExclusiveRoughlyHalving,
        rounds,
        q,
        qprime: 0,
        pprime: None,
    })
}

pub fn build_schedule(p: ProcCount, variant: Variant) -> Result<SkipSchedule> {
    match variant {
        Variant::InclusiveStraightDoubling => Ok(build_inclusive_schedule(p)),
        Variant::ExclusiveQPrimeDoubling { qprime } => build_qprime_schedule(p, qprime),
        Variant::ExclusiveRoughlyHalving => build_halving_schedule(p),
    }
}

/// Smallest `q` with `(2^q' - 1) · 2^(q - q') ≥ p - 1`.
pub fn predict_rounds_qprime(p: ProcCount, qprime: u32) -> Result<u32> {
    check_nondegenerate(p)?;
    check_qprime(p, qprime)?;
    let target = (p.get() - 1) as u128;
    let mut covered = ((1u128 << qprime) - 1) as u128;
    let mut q = qprime;
    while covered < target {
        covered <<= 1;
        q += 1;
    }
    Ok(q)
}

/// Upper bound `q + q' - 2` on the per-processor operator applications.
pub fn predict_ops_bound_qprime(p: ProcCount, qprime: u32) -> Result<u32> {
    Ok(predict_rounds_qprime(p, qprime)? + qprime - 2)
}

/// Smallest `q' ≥ 1` with `2^q' · (2^q - p + 1) ≥ 2^q`, `q = ⌈log₂ p⌉`.
pub fn best_qprime(p: ProcCount) -> Result<u32> {
    check_nondegenerate(p)?;
    let q = p.ceil_log2();
    let full = 1u128 << q;
    let slack = full - p.get() as u128 + 1;
    Ok((1..=q)
        .find(|&qp| (1u128 << qp) * slack >= full)
        .unwrap_or(q))
}

/// Upper bound `⌈log₂ p⌉ + popcnt(p - 1) - 2 - even(p)` for the roughly
/// halving algorithm.
///
/// The expression is -1 at `p = 2`, where the single shift round performs
/// no application at all; the bound is floored at 0 there.
pub fn predict_ops_bound_halving(p: ProcCount) -> Result<u32> {
    check_nondegenerate(p)?;
    let n = p.get();
    let even = u32::from(n % 2 == 0);
    Ok((p.ceil_log2() + (n - 1).count_ones()).saturating_sub(2 + even))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pc(p: usize) -> ProcCount {
        ProcCount::new(p).unwrap()
    }

    /// Ceiling-halving recurrence from `s_q = p`, independent of the shift
    /// formula.
    fn halving_by_recurrence(p: usize) -> (Vec<usize>, Vec<u8>) {
        let mut skips = vec![p];
        while *skips.last().unwrap() > 1 {
            let s = *skips.last().unwrap();
            skips.push(s.div_ceil(2));
        }
        skips.reverse();
        let eps = (1..skips.len() - 1).map(|k| (skips[k + 1] % 2) as u8).collect();
        skips.pop();
        (skips, eps)
    }

    fn float_free_log_oracle(n: usize) -> u32 {
        let mut q = 0;
        while (1usize << q) < n {
            q += 1;
        }
        q
    }

    #[test]
    fn ceil_log2_matches_loop() {
        for n in 1..5000 {
            assert_eq!(ceil_log2(n), float_free_log_oracle(n), "n = {n}");
        }
    }

    #[test]
    fn qprime_schedule_examples() {
        let s = build_qprime_schedule(pc(24), 2).unwrap();
        assert_eq!(s.skips(), vec![1, 2, 3, 6, 12]);
        let phases: Vec<_> = s.rounds.iter().map(|r| r.phase).collect();
        assert_eq!(
            phases,
            vec![
                Phase::Shift,
                Phase::InclusivePhase,
                Phase::ExclusivePhase,
                Phase::ExclusivePhase,
                Phase::ExclusivePhase
            ]
        );
        assert_eq!(s.q, 5);
        assert_eq!(s.pprime, Some(4));

        let s = build_qprime_schedule(pc(24), 1).unwrap();
        assert_eq!(s.skips(), vec![1, 1, 2, 4, 8, 16]);
        assert!(s.rounds[1..].iter().all(|r| r.phase == Phase::ExclusivePhase));
        assert_eq!(s.q, 6);

        let s = build_qprime_schedule(pc(2), 1).unwrap();
        assert_eq!(s.skips(), vec![1]);
        assert_eq!(s.rounds[0].phase, Phase::Shift);
    }

    #[test]
    fn qprime_schedule_errors() {
        assert!(matches!(build_qprime_schedule(pc(1), 1), Err(Error::Degenerate(1))));
        assert!(matches!(build_qprime_schedule(pc(24), 0), Err(Error::Parameter(_))));
        assert!(matches!(build_qprime_schedule(pc(24), 6), Err(Error::Parameter(_))));
        assert!(build_qprime_schedule(pc(24), 5).is_ok());
        assert!(ProcCount::new(0).is_err());
    }

    #[test]
    fn halving_schedule_examples() {
        let s = build_halving_schedule(pc(24)).unwrap();
        assert_eq!(s.skips(), vec![1, 2, 3, 6, 12]);
        let eps: Vec<u8> = s.rounds[1..].iter().map(|r| r.epsilon).collect();
        assert_eq!(eps, vec![1, 0, 0, 0]);

        let s = build_halving_schedule(pc(32)).unwrap();
        assert_eq!(s.skips(), vec![1, 2, 4, 8, 16]);
        assert!(s.rounds.iter().all(|r| r.epsilon == 0));

        // Frozen from the recurrence oracle: s = 1, 2, 3 from s_3 = 5.
        let s = build_halving_schedule(pc(5)).unwrap();
        assert_eq!(s.skips(), vec![1, 2, 3]);
        let eps: Vec<u8> = s.rounds[1..].iter().map(|r| r.epsilon).collect();
        assert_eq!(eps, vec![1, 1]);
        assert_eq!(halving_by_recurrence(5), (vec![1, 2, 3], vec![1, 1]));

        assert!(matches!(build_halving_schedule(pc(1)), Err(Error::Degenerate(1))));
    }

    #[test]
    fn halving_formula_agrees_with_recurrence() {
        for p in 2..=4096 {
            let s = build_halving_schedule(pc(p)).unwrap();
            let (skips, eps) = halving_by_recurrence(p);
            assert_eq!(s.skips(), skips, "p = {p}");
            let got: Vec<u8> = s.rounds[1..].iter().map(|r| r.epsilon).collect();
            assert_eq!(got, eps, "p = {p}");
            assert_eq!(s.q, ceil_log2(p));
        }
    }

    #[test]
    fn inclusive_schedule_is_straight_doubling() {
        assert!(build_inclusive_schedule(pc(1)).rounds.is_empty());
        assert_eq!(build_inclusive_schedule(pc(24)).skips(), vec![1, 2, 4, 8, 16]);
        assert_eq!(build_inclusive_schedule(pc(32)).skips(), vec![1, 2, 4, 8, 16]);
        assert_eq!(build_inclusive_schedule(pc(33)).skips(), vec![1, 2, 4, 8, 16, 32]);
    }

    #[test]
    fn prediction_examples() {
        assert_eq!(predict_rounds_qprime(pc(24), 2).unwrap(), 5);
        assert_eq!(predict_rounds_qprime(pc(1140), 2).unwrap(), 11);
        assert_eq!(predict_rounds_qprime(pc(33), 1).unwrap(), 6);

        assert_eq!(predict_ops_bound_qprime(pc(24), 1).unwrap(), 5);
        assert_eq!(predict_ops_bound_qprime(pc(24), 5).unwrap(), 8);
        assert_eq!(predict_ops_bound_qprime(pc(2), 1).unwrap(), 0);

        assert_eq!(best_qprime(pc(24)).unwrap(), 2);
        assert_eq!(best_qprime(pc(32)).unwrap(), 5);
        assert_eq!(best_qprime(pc(33)).unwrap(), 1);
        assert_eq!(best_qprime(pc(1145)).unwrap(), 2);
        assert_eq!(best_qprime(pc(2)).unwrap(), 1);

        assert_eq!(predict_ops_bound_halving(pc(24)).unwrap(), 6);
        assert_eq!(predict_ops_bound_halving(pc(33)).unwrap(), 5);
        assert_eq!(predict_ops_bound_halving(pc(1143)).unwrap(), 15);
        assert_eq!(predict_ops_bound_halving(pc(2)).unwrap(), 0);
        assert_eq!(predict_ops_bound_halving(pc(3)).unwrap(), 1);
    }

    #[test]
    fn round_prediction_laws() {
        for p in 2..=4096 {
            let p = pc(p);
            let q = p.ceil_log2();
            let best = best_qprime(p).unwrap();
            let mut prev = u32::MAX;
            for qp in 1..=q {
                let rounds = predict_rounds_qprime(p, qp).unwrap();
                assert!(rounds <= prev, "non-increasing in q' at p = {p}");
                prev = rounds;
                let sched = build_qprime_schedule(p, qp).unwrap();
                assert_eq!(sched.q, rounds, "p = {p}, q' = {qp}");
                // The last exclusive skip doubled covers p - 1 inputs.
                let covered = ((1u64 << qp) - 1) << (rounds - qp);
                assert!(covered >= p.get() as u64 - 1);
            }
            assert_eq!(predict_rounds_qprime(p, best).unwrap(), q);
            assert_eq!(predict_rounds_qprime(p, 1).unwrap(), 1 + ceil_log2(p.get() - 1));
            if best > 1 {
                assert!(predict_rounds_qprime(p, best - 1).unwrap() > q);
            }
        }
    }

    #[test]
    fn p_two_aliases_coincide() {
        let p = pc(2);
        let one = Algorithm::One.resolve(p).unwrap();
        assert_eq!(Algorithm::TwoOp.resolve(p).unwrap(), one);
        assert_eq!(Algorithm::Best.resolve(p).unwrap(), one);
    }

    #[test]
    fn algorithm_names_parse() {
        assert_eq!("best".parse::<Algorithm>().unwrap(), Algorithm::Best);
        assert_eq!("qprime:3".parse::<Algorithm>().unwrap(), Algorithm::QPrime(3));
        assert!("qprime".parse::<Algorithm>().is_err());
        assert!("bogus".parse::<Algorithm>().is_err());
        assert!(Algorithm::QPrime(9).resolve(pc(24)).is_err());
    }
}
