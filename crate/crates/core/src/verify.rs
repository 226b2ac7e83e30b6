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

//! Sequential oracles and the sweeps that check simulated runs against
//! them and against the closed-form round and operator-count predictions.

use std::fmt::Write as _;
use std::thread;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{BuiltinOp, CountingOperator, Element, ElementVector, Interval, IntervalOp, Mat2, Operator};
use crate::schedule::{
    ceil_log2, predict_ops_bound_halving, predict_ops_bound_qprime, predict_rounds_qprime, Algorithm, Phase,
    ProcCount, RoundSpec, Variant,
};
use crate::simulator::{simulate, simulate_observed, simulate_with, ProcessorState, SimOptions, StructureCheck};

/// Exclusive prefix by a strict left fold: `out[r] = ((V₀ ⊕ V₁) ⊕ …) ⊕ V_{r-1}`.
pub fn sequential_exscan<O: Operator + ?Sized>(inputs: &[ElementVector], op: &O) -> Result<Vec<Option<ElementVector>>> {
    let mut out = Vec::with_capacity(inputs.len());
    let mut running: Option<ElementVector> = None;
    for (r, v) in inputs.iter().enumerate() {
        out.push(running.clone());
        running = Some(match running {
            None => v.clone(),
            Some(acc) => op.reduce(&acc, v).map_err(|source| Error::Operator { round: 0, rank: r, source })?,
        });
    }
    Ok(out)
}

/// Inclusive prefix by a strict left fold.
pub fn sequential_scan<O: Operator + ?Sized>(inputs: &[ElementVector], op: &O) -> Result<Vec<ElementVector>> {
    let mut out: Vec<ElementVector> = Vec::with_capacity(inputs.len());
    for (r, v) in inputs.iter().enumerate() {
        let next = match out.last() {
            None => v.clone(),
            Some(acc) => op.reduce(acc, v).map_err(|source| Error::Operator { round: 0, rank: r, source })?,
        };
        out.push(next);
    }
    Ok(out)
}

/// Deterministic random inputs suited to `op`.
pub fn random_inputs(op: BuiltinOp, p: usize, m: usize, seed: u64) -> Vec<ElementVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((p as u64) << 32) ^ m as u64);
    (0..p)
        .map(|_| (0..m).map(|_| random_element(op, &mut rng)).collect())
        .collect()
}

fn random_element(op: BuiltinOp, rng: &mut impl Rng) -> Element {
    match op {
        BuiltinOp::StringConcat => {
            let len = rng.gen_range(1..=3);
            Element::Str((0..len).map(|_| rng.gen_range(b'a'..=b'z') as char).collect())
        }
        BuiltinOp::Mat2Mult => Element::Mat2(Mat2::new(rng.gen(), rng.gen(), rng.gen(), rng.gen())),
        _ => Element::Int(rng.gen()),
    }
}

/// Inputs `V_r = [r, r + 1)` repeated `m` times.
pub fn interval_inputs(p: usize, m: usize) -> Vec<ElementVector> {
    (0..p).map(|r| vec![Element::Interval(Interval::unit(r)); m]).collect()
}

/// Measured rounds and maximum per-rank operator applications.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub q: u32,
    pub ops: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TableRow {
    pub p: usize,
    pub one: Cell,
    pub best: Cell,
    pub best_qprime: u32,
    pub two_op: Cell,
    pub halving: Cell,
}

/// Flat CSV form of a [`TableRow`], columns in table order.
#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    p: usize,
    one_q: u32,
    one_ops: u64,
    best_q: u32,
    best_ops: u64,
    best_qprime: u32,
    twoop_q: u32,
    twoop_ops: u64,
    halving_q: u32,
    halving_ops: u64,
}

impl From<&TableRow> for CsvRow {
    fn from(r: &TableRow) -> Self {
        CsvRow {
            p: r.p,
            one_q: r.one.q,
            one_ops: r.one.ops,
            best_q: r.best.q,
            best_ops: r.best.ops,
            best_qprime: r.best_qprime,
            twoop_q: r.two_op.q,
            twoop_ops: r.two_op.ops,
            halving_q: r.halving.q,
            halving_ops: r.halving.ops,
        }
    }
}

impl From<CsvRow> for TableRow {
    fn from(r: CsvRow) -> Self {
        TableRow {
            p: r.p,
            one: Cell { q: r.one_q, ops: r.one_ops },
            best: Cell { q: r.best_q, ops: r.best_ops },
            best_qprime: r.best_qprime,
            two_op: Cell { q: r.twoop_q, ops: r.twoop_ops },
            halving: Cell { q: r.halving_q, ops: r.halving_ops },
        }
    }
}

/// Runs `variant` on `m`-element int-xor inputs and reads off rounds and
/// the per-rank maximum of operator applications. The simulator's per-rank
/// tally is cross-checked against a [`CountingOperator`].
pub fn measure(variant: Variant, p: usize, m: usize) -> Result<Cell> {
    let op = CountingOperator::new(BuiltinOp::IntXor);
    let inputs: Vec<ElementVector> = (0..p).map(|r| vec![Element::Int(r as i64); m]).collect();
    let trace = simulate(variant, &inputs, &op)?.trace;
    if op.count() != trace.total_ops() {
        return Err(Error::Protocol {
            round: trace.schedule.rounds.len(),
            detail: format!(
                "operator saw {} applications, per-rank tally says {}",
                op.count(),
                trace.total_ops()
            ),
        });
    }
    Ok(Cell {
        q: trace.rounds_used,
        ops: trace.max_ops,
    })
}

pub fn table_row(p: usize) -> Result<TableRow> {
    let pc = ProcCount::new(p)?;
    let cell = |alg: Algorithm| -> Result<Cell> { measure(alg.resolve(pc)?, p, 1) };
    let best = Algorithm::Best.resolve(pc)?;
    Ok(TableRow {
        p,
        one: cell(Algorithm::One)?,
        best: measure(best, p, 1)?,
        best_qprime: best.qprime().unwrap_or(1),
        two_op: cell(Algorithm::TwoOp)?,
        halving: cell(Algorithm::Halving)?,
    })
}

/// Measured rows for every `p` in `p_lo..=p_hi`.
pub fn reproduce_table(p_lo: usize, p_hi: usize) -> Result<Vec<TableRow>> {
    if p_lo < 2 || p_lo > p_hi {
        return Err(Error::Parameter(format!("need 2 ≤ p_lo ≤ p_hi, got {p_lo}..={p_hi}")));
    }
    (p_lo..=p_hi).map(table_row).collect()
}

pub fn table_to_csv(rows: &[TableRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(CsvRow::from(row))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is ascii"))
}

pub fn table_from_csv(text: &str) -> Result<Vec<TableRow>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize::<CsvRow>()
        .map(|r| Ok(r?.into()))
        .collect()
}

pub fn table_to_markdown(rows: &[TableRow]) -> String {
    let mut out = String::new();
    out.push_str("|    p | q'=1 q | q'=1 ⊕ | best q | best ⊕ | best q' | q'=q q | q'=q ⊕ | halving q | halving ⊕ |\n");
    out.push_str("|-----:|-------:|-------:|-------:|-------:|--------:|-------:|-------:|----------:|----------:|\n");
    for r in rows {
        let _ = writeln!(
            out,
            "| {:>4} | {:>6} | {:>6} | {:>6} | {:>6} | {:>7} | {:>6} | {:>6} | {:>9} | {:>9} |",
            r.p,
            r.one.q,
            r.one.ops,
            r.best.q,
            r.best.ops,
            r.best_qprime,
            r.two_op.q,
            r.two_op.ops,
            r.halving.q,
            r.halving.ops
        );
    }
    out
}

/// A failed check, located as precisely as the check allows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Failure {
    pub variant: String,
    pub p: usize,
    pub m: usize,
    pub op: String,
    pub round: Option<usize>,
    pub detail: String,
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "variant={} p={} m={} op={}", self.variant, self.p, self.m, self.op)?;
        if let Some(round) = self.round {
            write!(f, " round={round}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

impl Failure {
    fn new(variant: Variant, p: usize, m: usize, op: &str, detail: impl Into<String>) -> Self {
        Failure {
            variant: variant.to_string(),
            p,
            m,
            op: op.to_string(),
            round: None,
            detail: detail.into(),
        }
    }

    fn from_error(variant: Variant, p: usize, m: usize, op: &str, err: Error) -> Self {
        let round = match &err {
            Error::Operator { round, .. } | Error::Protocol { round, .. } => Some(*round),
            _ => None,
        };
        Failure {
            round,
            ..Failure::new(variant, p, m, op, err.to_string())
        }
    }
}

/// Compares one simulated run against the sequential oracle, and checks
/// the trace's structural properties on the way.
pub fn check_oracle(variant: Variant, op: BuiltinOp, p: usize, m: usize, seed: u64) -> Result<(), Failure> {
    let inputs = random_inputs(op, p, m, seed);
    let fail = |detail: String| Failure::new(variant, p, m, op.as_str(), detail);
    let res = simulate(variant, &inputs, &op).map_err(|e| Failure::from_error(variant, p, m, op.as_str(), e))?;
    let expected: Vec<Option<ElementVector>> = if variant.is_exclusive() {
        sequential_exscan(&inputs, &op).map_err(|e| fail(e.to_string()))?
    } else {
        sequential_scan(&inputs, &op).map_err(|e| fail(e.to_string()))?.into_iter().map(Some).collect()
    };
    if let Some(r) = (0..p).find(|&r| res.outputs[r] != expected[r]) {
        return Err(fail(format!("rank {r}: got {:?}, oracle {:?}", res.outputs[r], expected[r])));
    }
    if let Some(v) = res.trace.structural_violations().into_iter().next() {
        return Err(fail(v));
    }
    Ok(())
}

/// Expected window of rank `r` just before `round`, or after the last round
/// when `round` is `None`. `None` means "W must be unset".
fn expected_window(variant: Variant, round: Option<&RoundSpec>, r: usize) -> Option<Option<Interval>> {
    let inclusive = !variant.is_exclusive();
    if !inclusive && r == 0 {
        return Some(None);
    }
    let Some(round) = round else {
        return Some(Some(Interval::new(0, if inclusive { r + 1 } else { r })));
    };
    let s = round.skip;
    let window = match (variant, round.phase) {
        (Variant::InclusiveStraightDoubling, _) => Interval::new((r + 1).saturating_sub(s), r + 1),
        // W is unset before the shift round.
        (_, Phase::Shift) => return Some(None),
        (Variant::ExclusiveQPrimeDoubling { .. }, Phase::InclusivePhase) => Interval::new((r + 1).saturating_sub(s), r),
        (Variant::ExclusiveQPrimeDoubling { .. }, Phase::ExclusivePhase) => Interval::new(r.saturating_sub(s), r),
        // Before round k = after round k - 1, governed by s_k.
        (Variant::ExclusiveRoughlyHalving, Phase::HalvingPhase) => Interval::new((r + 1).saturating_sub(s), r),
        _ => return None,
    };
    Some(Some(window))
}

/// Runs `variant` with the interval operator and checks every rank's
/// window between rounds against the algorithm's invariant.
pub fn check_windows(variant: Variant, p: usize, m: usize) -> Result<(), Failure> {
    let inputs = interval_inputs(p, m);
    let mut violations: Vec<(Option<usize>, String)> = Vec::new();
    let mut observe = |round: Option<&RoundSpec>, states: &[ProcessorState]| {
        for st in states {
            let Some(want) = expected_window(variant, round, st.rank) else {
                violations.push((round.map(|r| r.index), format!("no invariant for rank {}", st.rank)));
                continue;
            };
            let ok = match (&st.acc, want) {
                (None, None) => true,
                (Some(v), Some(w)) => v.iter().all(|e| *e == Element::Interval(w)),
                _ => false,
            };
            if !ok {
                violations.push((
                    round.map(|r| r.index),
                    format!("rank {}: W = {:?}, invariant wants {:?}", st.rank, st.acc, want),
                ));
            }
        }
    };
    let res = simulate_observed(variant, &inputs, &IntervalOp, &mut observe);
    let res = res.map_err(|e| Failure::from_error(variant, p, m, "interval", e))?;
    if let Some((round, detail)) = violations.into_iter().next() {
        return Err(Failure {
            round,
            ..Failure::new(variant, p, m, "interval", detail)
        });
    }
    if let Some(v) = res.trace.structural_violations().into_iter().next() {
        return Err(Failure::new(variant, p, m, "interval", v));
    }
    Ok(())
}

/// Every variant checked for a given `p`: inclusive, the full `q'` range,
/// and roughly halving.
pub fn variants_for(p: ProcCount) -> Vec<Variant> {
    let mut out = vec![Variant::InclusiveStraightDoubling, Variant::ExclusiveRoughlyHalving];
    out.extend((1..=p.ceil_log2().max(1)).map(|qprime| Variant::ExclusiveQPrimeDoubling { qprime }));
    out
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BoundsReport {
    pub cells: usize,
    pub violations: Vec<Failure>,
}

impl BoundsReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Round and op-count checks for one processor count, over every valid
/// `q'` and the halving variant, with structural checks on every message.
pub fn check_bounds_for(p: usize) -> Result<BoundsReport> {
    let pc = ProcCount::new(p)?;
    let q = pc.ceil_log2();
    let best = Algorithm::Best.resolve(pc)?.qprime().unwrap_or(1);
    let inputs: Vec<ElementVector> = vec![Vec::new(); p];
    let mut report = BoundsReport::default();
    let mut flag = |variant: Variant, detail: String| {
        report.violations.push(Failure::new(variant, p, 0, "int-sum", detail));
    };
    // Messages are checked as they are delivered rather than kept around;
    // a full sweep would otherwise allocate a log for every run.
    let lean = SimOptions { keep_messages: false };
    let run = |variant: Variant, flag: &mut dyn FnMut(Variant, String)| -> Result<(u32, u64)> {
        let mut check = StructureCheck::new(p);
        let trace = simulate_with(variant, &inputs, &BuiltinOp::IntSum, &mut check, lean)?.trace;
        if check.messages_seen() != trace.messages_per_round.iter().sum::<usize>() {
            flag(variant, "observed message count disagrees with trace".into());
        }
        for v in check.into_violations() {
            flag(variant, v);
        }
        Ok((trace.rounds_used, trace.max_ops))
    };

    for qprime in 1..=q {
        let variant = Variant::ExclusiveQPrimeDoubling { qprime };
        let (rounds_used, max_ops) = run(variant, &mut flag)?;
        let rounds = predict_rounds_qprime(pc, qprime)?;
        let bound = predict_ops_bound_qprime(pc, qprime)? as u64;
        if rounds_used != rounds {
            flag(variant, format!("rounds {rounds_used} != predicted {rounds}"));
        }
        if max_ops > bound {
            flag(variant, format!("max ops {max_ops} > bound {bound}"));
        }
        if qprime == best && rounds_used != q {
            flag(variant, format!("best q' rounds {rounds_used} != ⌈log₂ p⌉ = {q}"));
        }
        if qprime == 1 && rounds_used != 1 + ceil_log2(p - 1) {
            flag(variant, format!("q' = 1 rounds {rounds_used} != 1 + ⌈log₂(p-1)⌉"));
        }
        report.cells += 1;
    }

    let variant = Variant::ExclusiveRoughlyHalving;
    let (rounds_used, max_ops) = run(variant, &mut flag)?;
    let bound = predict_ops_bound_halving(pc)? as u64;
    if rounds_used != q {
        flag(variant, format!("rounds {rounds_used} != ⌈log₂ p⌉ = {q}"));
    }
    if max_ops > bound {
        flag(variant, format!("max ops {max_ops} > bound {bound}"));
    }
    report.cells += 1;
    Ok(report)
}

/// Splits `2..=p_max` over `jobs` threads and gathers the per-`p` results
/// back in ascending `p`.
pub fn par_over_p<T: Send>(p_min: usize, p_max: usize, jobs: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let jobs = jobs.max(1);
    if jobs == 1 || p_max < p_min {
        return (p_min..=p_max).map(f).collect();
    }
    let f = &f;
    let mut tagged: Vec<(usize, T)> = thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs)
            .map(|j| {
                scope.spawn(move || {
                    (p_min + j..=p_max)
                        .step_by(jobs)
                        .map(|p| (p, f(p)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    tagged.sort_by_key(|(p, _)| *p);
    tagged.into_iter().map(|(_, t)| t).collect()
}

/// Round equalities and operator-count bounds for every `p ≤ p_max` and
/// every valid `q'`. Violations are collected, not raised.
pub fn sweep_bounds(p_max: usize, jobs: usize) -> Result<BoundsReport> {
    if p_max < 2 {
        return Err(Error::Parameter(format!("p_max must be at least 2, got {p_max}")));
    }
    let mut report = BoundsReport::default();
    for part in par_over_p(2, p_max, jobs, check_bounds_for) {
        let part = part?;
        report.cells += part.cells;
        report.violations.extend(part.violations);
    }
    Ok(report)
}

/// Configuration of a full verification sweep.
#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub p_max: usize,
    pub ms: Vec<usize>,
    pub ops: Vec<BuiltinOp>,
    /// Largest `p` for the interval-window checks.
    pub window_p_max: usize,
    pub seed: u64,
    pub jobs: usize,
}

impl VerifyConfig {
    pub fn new(p_max: usize) -> Self {
        VerifyConfig {
            p_max,
            ms: vec![0, 1, 5],
            ops: vec![BuiltinOp::IntSum, BuiltinOp::StringConcat, BuiltinOp::Mat2Mult],
            window_p_max: p_max.min(256),
            seed: 0,
            jobs: 1,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct VerifyReport {
    pub oracle_runs: usize,
    pub window_runs: usize,
    pub bounds: BoundsReport,
    pub failures: Vec<Failure>,
}

impl VerifyReport {
    pub fn is_clean(&self) -> bool {
        self.failures.is_empty() && self.bounds.is_clean()
    }

    pub fn first_failure(&self) -> Option<&Failure> {
        self.failures.first().or(self.bounds.violations.first())
    }
}

/// The variants compared against the oracle at one `p`: inclusive plus
/// the four exclusive algorithms.
fn oracle_variants(p: ProcCount) -> Result<Vec<Variant>> {
    let mut out = vec![Variant::InclusiveStraightDoubling];
    for alg in Algorithm::EXCLUSIVE {
        let v = alg.resolve(p)?;
        if !out.contains(&v) {
            out.push(v);
        }
    }
    Ok(out)
}

/// Oracle equivalence, window invariants and the bound sweep.
pub fn verify_all(cfg: &VerifyConfig) -> Result<VerifyReport> {
    if cfg.p_max < 2 {
        return Err(Error::Parameter(format!("p_max must be at least 2, got {}", cfg.p_max)));
    }
    let per_p = par_over_p(2, cfg.p_max, cfg.jobs, |p| -> Result<(usize, usize, Vec<Failure>)> {
        let pc = ProcCount::new(p)?;
        let mut failures = Vec::new();
        let mut oracle_runs = 0;
        let mut window_runs = 0;
        for variant in oracle_variants(pc)? {
            for &op in &cfg.ops {
                for &m in &cfg.ms {
                    oracle_runs += 1;
                    if let Err(f) = check_oracle(variant, op, p, m, cfg.seed) {
                        failures.push(f);
                    }
                }
            }
        }
        if p <= cfg.window_p_max {
            for variant in variants_for(pc) {
                window_runs += 1;
                if let Err(f) = check_windows(variant, p, 1) {
                    failures.push(f);
                }
            }
        }
        Ok((oracle_runs, window_runs, failures))
    });
    let mut report = VerifyReport::default();
    for part in per_p {
        let (o, w, f) = part?;
        report.oracle_runs += o;
        report.window_runs += w;
        report.failures.extend(f);
    }
    report.bounds = sweep_bounds(cfg.p_max, cfg.jobs)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strs(v: &[&str]) -> Vec<ElementVector> {
        v.iter().map(|s| vec![Element::Str(s.to_string())]).collect()
    }

    fn ints(v: &[i64]) -> Vec<ElementVector> {
        v.iter().map(|&i| vec![Element::Int(i)]).collect()
    }

    #[test]
    fn sequential_examples() {
        let cat = BuiltinOp::StringConcat;
        assert_eq!(
            sequential_exscan(&strs(&["a", "b", "c"]), &cat).unwrap(),
            vec![None, Some(vec![Element::Str("a".into())]), Some(vec![Element::Str("ab".into())])]
        );
        assert_eq!(sequential_exscan(&strs(&["x"]), &cat).unwrap(), vec![None]);
        assert_eq!(
            sequential_exscan(&ints(&[1, 2, 3, 4]), &BuiltinOp::IntSum).unwrap(),
            vec![None, Some(vec![Element::Int(1)]), Some(vec![Element::Int(3)]), Some(vec![Element::Int(6)])]
        );

        assert_eq!(sequential_scan(&ints(&[1, 2, 3]), &BuiltinOp::IntSum).unwrap(), ints(&[1, 3, 6]));
        assert_eq!(sequential_scan(&strs(&["a", "b"]), &cat).unwrap(), strs(&["a", "ab"]));
        assert_eq!(sequential_scan(&strs(&["x"]), &cat).unwrap(), strs(&["x"]));
    }

    #[test]
    fn oracles_are_left_associated() {
        for p in 1..64 {
            let inputs = interval_inputs(p, 2);
            let ex = sequential_exscan(&inputs, &IntervalOp).unwrap();
            let inc = sequential_scan(&inputs, &IntervalOp).unwrap();
            for r in 0..p {
                assert_eq!(inc[r], vec![Element::Interval(Interval::new(0, r + 1)); 2]);
                if r > 0 {
                    assert_eq!(ex[r], Some(vec![Element::Interval(Interval::new(0, r)); 2]));
                }
            }
            assert_eq!(ex[0], None);
        }
    }

    #[test]
    fn trivial_table_row() {
        let rows = reproduce_table(2, 2).unwrap();
        let zero = Cell { q: 1, ops: 0 };
        assert_eq!(
            rows,
            vec![TableRow { p: 2, one: zero, best: zero, best_qprime: 1, two_op: zero, halving: zero }]
        );
        assert!(reproduce_table(5, 4).is_err());
        assert!(reproduce_table(1, 4).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let rows = reproduce_table(24, 36).unwrap();
        let text = table_to_csv(&rows).unwrap();
        assert!(text.starts_with("p,one_q,one_ops,best_q,best_ops,best_qprime,twoop_q,twoop_ops,halving_q,halving_ops\n"));
        assert_eq!(table_from_csv(&text).unwrap(), rows);
        let md = table_to_markdown(&rows);
        assert_eq!(md.lines().count(), 2 + rows.len());
    }

    #[test]
    fn rank_zero_exclusive_stays_unset() {
        for alg in Algorithm::EXCLUSIVE {
            let v = alg.resolve(ProcCount::new(24).unwrap()).unwrap();
            check_windows(v, 24, 1).unwrap();
        }
    }

    #[test]
    fn window_checker_catches_wrong_invariant() {
        // Sanity check of the checker itself: claiming the inclusive
        // invariant for an exclusive run must fail.
        let want = expected_window(
            Variant::ExclusiveRoughlyHalving,
            Some(&RoundSpec { index: 1, skip: 2, phase: Phase::HalvingPhase, epsilon: 1 }),
            5,
        );
        assert_eq!(want, Some(Some(Interval::new(4, 5))));
        assert_ne!(want, Some(Some(Interval::new(4, 6))));
    }

    #[test]
    fn small_verify_is_clean() {
        let mut cfg = VerifyConfig::new(40);
        cfg.jobs = 2;
        let report = verify_all(&cfg).unwrap();
        assert!(report.is_clean(), "{:?}", report.first_failure());
        assert!(report.oracle_runs > 0 && report.window_runs > 0);
        assert!(verify_all(&VerifyConfig::new(1)).is_err());
    }

    #[test]
    fn par_over_p_keeps_order() {
        assert_eq!(par_over_p(2, 20, 3, |p| p * p), (2..=20).map(|p| p * p).collect::<Vec<_>>());
    }
}
