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

//! Round-synchronous, one-ported execution of the scan algorithms.
//!
//! Ranks are iterated, not threaded. Each round runs in three passes over
//! the ranks: every rank decides its actions from pre-round state (staging
//! any send value it needs), all payloads are delivered, and only then are
//! the received values folded into the accumulators. That ordering makes
//! a simultaneous send-receive observationally identical to a real
//! bidirectional exchange.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{ElementVector, Operator};
use crate::schedule::{build_schedule, Phase, ProcCount, RoundSpec, SkipSchedule, Variant};

/// One simulated rank. The receive buffer `T` is never materialized: a
/// receiver reads the sender's buffer as it stood before the round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProcessorState {
    pub rank: usize,
    /// `V`, never mutated.
    pub input: ElementVector,
    /// `W`, the result accumulator. `None` until first written.
    pub acc: Option<ElementVector>,
    /// `W'`, the staged `W ⊕ V`. Valid only while `acc` is unchanged.
    pub staged: Option<ElementVector>,
    pub done: bool,
}

impl ProcessorState {
    pub fn new(rank: usize, input: ElementVector) -> Self {
        ProcessorState {
            rank,
            input,
            acc: None,
            staged: None,
            done: false,
        }
    }

    #[inline]
    fn set_acc(&mut self, value: ElementVector) {
        release(self.acc.replace(value));
        release(self.staged.take());
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PayloadKind {
    V,
    W,
    Wprime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecvMode {
    /// Received vector becomes `W` directly (shift rounds).
    IntoAcc,
    /// `W ← T ⊕ W`.
    Combine,
}

/// What one rank does in one round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LocalActions {
    pub send: Option<(usize, PayloadKind)>,
    pub recv: Option<(usize, RecvMode)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub round: usize,
    pub from: usize,
    pub to: usize,
    pub skip: usize,
    pub epsilon: u8,
    pub payload_kind: PayloadKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunTrace {
    pub schedule: SkipSchedule,
    /// Element count of every vector in the run.
    pub m: usize,
    /// Per-round message lists; empty lists throughout when the run was
    /// made with [`SimOptions::keep_messages`] off.
    pub messages: Vec<Vec<Message>>,
    pub messages_per_round: Vec<usize>,
    pub ops_per_rank: Vec<u64>,
    /// Rounds in which at least one message was sent.
    pub rounds_used: u32,
    pub max_ops: u64,
    pub bytes_per_round: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScanResult {
    /// `None` marks an undefined output (rank 0 of an exclusive scan).
    pub outputs: Vec<Option<ElementVector>>,
    pub trace: RunTrace,
}

/// Hook for inspecting rank state between rounds.
pub trait Observer {
    fn before_round(&mut self, _round: &RoundSpec, _states: &[ProcessorState]) {}
    /// Sees the round's messages after delivery, in sender order.
    fn after_round(&mut self, _round: &RoundSpec, _messages: &[Message]) {}
    fn finished(&mut self, _states: &[ProcessorState]) {}
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimOptions {
    /// Retain every message in the trace. Long sweeps turn this off and
    /// inspect messages through [`Observer::after_round`] instead.
    pub keep_messages: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { keep_messages: true }
    }
}

/// Online checker for the one-ported and circulant properties: at most
/// one send and one receive per rank and round, and every message moving
/// exactly `s - ε` ranks up.
#[derive(Clone, Debug)]
pub struct StructureCheck {
    p: usize,
    seen_from: Vec<usize>,
    seen_to: Vec<usize>,
    messages: usize,
    violations: Vec<String>,
}

impl StructureCheck {
    pub fn new(p: usize) -> Self {
        StructureCheck {
            p,
            seen_from: vec![usize::MAX; p],
            seen_to: vec![usize::MAX; p],
            messages: 0,
            violations: Vec::new(),
        }
    }

    #[inline]
    pub fn check(&mut self, round: &RoundSpec, msg: &Message) {
        let k = round.index;
        self.messages += 1;
        let fresh = matches!(
            (self.seen_from.get(msg.from), self.seen_to.get(msg.to)),
            (Some(&a), Some(&b)) if a != k && b != k
        );
        let clean = fresh
            && msg.round == k
            && msg.skip == round.skip
            && msg.epsilon == round.epsilon
            && msg.to == msg.from + round.displacement();
        if clean {
            self.seen_from[msg.from] = k;
            self.seen_to[msg.to] = k;
        } else {
            self.diagnose(round, msg);
        }
    }

    #[cold]
    #[inline(never)]
    fn diagnose(&mut self, round: &RoundSpec, msg: &Message) {
        let k = round.index;
        if msg.from >= self.p || msg.to >= self.p {
            self.violations
                .push(format!("round {k}: message {} -> {} leaves 0..{}", msg.from, msg.to, self.p));
            return;
        }
        if self.seen_from[msg.from] == k {
            self.violations.push(format!("round {k}: rank {} sends twice", msg.from));
        }
        if self.seen_to[msg.to] == k {
            self.violations.push(format!("round {k}: rank {} receives twice", msg.to));
        }
        self.seen_from[msg.from] = k;
        self.seen_to[msg.to] = k;
        if msg.round != k || msg.skip != round.skip || msg.epsilon != round.epsilon {
            self.violations
                .push(format!("round {k}: message {} -> {} tagged with another round", msg.from, msg.to));
        }
        if msg.to != msg.from + round.displacement() {
            self.violations.push(format!(
                "round {k}: message {} -> {} breaks displacement {}",
                msg.from,
                msg.to,
                round.displacement()
            ));
        }
    }

    pub fn messages_seen(&self) -> usize {
        self.messages
    }

    pub fn violations(&self) -> &[String] {
        &self.violations
    }

    pub fn into_violations(self) -> Vec<String> {
        self.violations
    }
}

impl Observer for StructureCheck {
    fn after_round(&mut self, round: &RoundSpec, messages: &[Message]) {
        for msg in messages {
            self.check(round, msg);
        }
    }
}

impl Observer for () {}

impl<F: FnMut(Option<&RoundSpec>, &[ProcessorState])> Observer for F {
    fn before_round(&mut self, round: &RoundSpec, states: &[ProcessorState]) {
        self(Some(round), states)
    }

    fn finished(&mut self, states: &[ProcessorState]) {
        self(None, states)
    }
}

/// Drops a replaced buffer. An unallocated vector owns nothing, so it is
/// forgotten instead of going through the element drop loop; the m = 0
/// sweeps replace millions of them.
#[inline]
fn release(v: Option<ElementVector>) {
    match v {
        Some(v) if v.capacity() == 0 => std::mem::forget(v),
        other => drop(other),
    }
}

/// Copy of a vector; empty vectors (the m = 0 sweeps) skip the clone path.
#[inline]
fn dup(v: &[crate::operators::Element]) -> ElementVector {
    if v.is_empty() {
        Vec::new()
    } else {
        v.to_vec()
    }
}

fn stage<O: Operator + ?Sized>(state: &mut ProcessorState, op: &O, ops: &mut u64) -> Result<(), crate::operators::OpError> {
    if state.staged.is_none() {
        let acc = state.acc.as_deref().unwrap_or_default();
        state.staged = Some(op.reduce(acc, &state.input)?);
        *ops += 1;
    }
    Ok(())
}

fn missing_acc(round: &RoundSpec, rank: usize) -> Error {
    Error::Protocol {
        round: round.index,
        detail: format!("rank {rank} needs W before it was set"),
    }
}

fn wrong_phase(round: &RoundSpec, algorithm: &str) -> Error {
    Error::Protocol {
        round: round.index,
        detail: format!("{:?} round in a {algorithm} schedule", round.phase),
    }
}

fn phase_allowed(variant: Variant, phase: Phase) -> bool {
    match variant {
        Variant::InclusiveStraightDoubling => phase == Phase::InclusivePhase,
        Variant::ExclusiveQPrimeDoubling { .. } => {
            matches!(phase, Phase::Shift | Phase::InclusivePhase | Phase::ExclusivePhase)
        }
        Variant::ExclusiveRoughlyHalving => matches!(phase, Phase::Shift | Phase::HalvingPhase),
    }
}

/// Straight doubling inclusive scan: receive from `r - s` and fold into
/// `W`, send `W` to `r + s`.
pub fn step_inclusive(state: &ProcessorState, round: &RoundSpec, p: usize) -> Result<LocalActions> {
    if !phase_allowed(Variant::InclusiveStraightDoubling, round.phase) {
        return Err(wrong_phase(round, "straight doubling"));
    }
    Ok(inclusive_actions(state.rank, round, p))
}

#[inline]
fn inclusive_actions(r: usize, round: &RoundSpec, p: usize) -> LocalActions {
    let s = round.skip;
    LocalActions {
        send: (r + s < p).then_some((r + s, PayloadKind::W)),
        recv: (r >= s).then(|| (r - s, RecvMode::Combine)),
    }
}

/// One rank's round of the q'-doubling exclusive scan.
///
/// In the inclusive phase every sender except rank 0 sends `W ⊕ V`. A rank
/// that only sends keeps its `W` for the rest of the phase, so the engine
/// computes that value once and reuses it.
pub fn step_qprime(state: &ProcessorState, round: &RoundSpec, p: usize) -> Result<LocalActions> {
    let variant = Variant::ExclusiveQPrimeDoubling { qprime: 1 };
    if !phase_allowed(variant, round.phase) {
        return Err(wrong_phase(round, "q'-doubling"));
    }
    Ok(qprime_actions(state.rank, round, p))
}

#[inline]
fn qprime_actions(r: usize, round: &RoundSpec, p: usize) -> LocalActions {
    let s = round.skip;
    let sends = r + s < p;
    let receives = r >= s;
    let send = |kind| sends.then_some((r + s, kind));
    let recv = |mode| receives.then(|| (r - s, mode));
    match round.phase {
        Phase::Shift => LocalActions {
            send: send(PayloadKind::V),
            recv: recv(RecvMode::IntoAcc),
        },
        Phase::InclusivePhase => LocalActions {
            send: send(if r == 0 { PayloadKind::V } else { PayloadKind::Wprime }),
            recv: recv(RecvMode::Combine),
        },
        Phase::ExclusivePhase => LocalActions {
            send: if r >= 1 { send(PayloadKind::W) } else { None },
            recv: if r > s { recv(RecvMode::Combine) } else { None },
        },
        Phase::HalvingPhase => LocalActions::default(),
    }
}

/// One rank's round of the roughly halving exclusive scan.
///
/// With `ε = 1` the send value aliases `W` and costs nothing; with `ε = 0`
/// it is `W ⊕ V`, computed at most once by ranks that only send.
pub fn step_halving(state: &ProcessorState, round: &RoundSpec, p: usize) -> Result<LocalActions> {
    if !phase_allowed(Variant::ExclusiveRoughlyHalving, round.phase) {
        return Err(wrong_phase(round, "roughly halving"));
    }
    Ok(halving_actions(state.rank, round, p))
}

#[inline]
fn halving_actions(r: usize, round: &RoundSpec, p: usize) -> LocalActions {
    let d = round.displacement();
    let sends = r + d < p;
    match round.phase {
        Phase::Shift => LocalActions {
            send: sends.then_some((r + d, PayloadKind::V)),
            recv: (r >= d).then(|| (r - d, RecvMode::IntoAcc)),
        },
        Phase::HalvingPhase => {
            // With ε = 1 the sender r - d sends its W, which rank 0 lacks;
            // with ε = 0 rank 0 still contributes its V.
            let eps = round.epsilon as usize;
            let receives = r >= d + eps;
            let kind = if r == 0 {
                // Rank 0 has no W; only its V is worth sending, and only
                // when the round wants W ⊕ V.
                (eps == 0).then_some(PayloadKind::V)
            } else if eps == 0 {
                Some(PayloadKind::Wprime)
            } else {
                Some(PayloadKind::W)
            };
            LocalActions {
                send: if sends { kind.map(|k| (r + d, k)) } else { None },
                recv: receives.then(|| (r - d, RecvMode::Combine)),
            }
        }
        _ => LocalActions::default(),
    }
}

/// Runs `variant` over `inputs` (one vector per rank, `p = inputs.len()`).
pub fn simulate<O: Operator + ?Sized>(variant: Variant, inputs: &[ElementVector], op: &O) -> Result<ScanResult> {
    simulate_observed(variant, inputs, op, &mut ())
}

pub fn simulate_observed<O: Operator + ?Sized, B: Observer + ?Sized>(
    variant: Variant,
    inputs: &[ElementVector],
    op: &O,
    observer: &mut B,
) -> Result<ScanResult> {
    simulate_with(variant, inputs, op, observer, SimOptions::default())
}

pub fn simulate_with<O: Operator + ?Sized, B: Observer + ?Sized>(
    variant: Variant,
    inputs: &[ElementVector],
    op: &O,
    observer: &mut B,
    opts: SimOptions,
) -> Result<ScanResult> {
    let p = ProcCount::new(inputs.len())?;
    let schedule = if p.get() == 1 {
        // Nothing to communicate; exclusive variants leave rank 0 undefined.
        variant.validate(p).ok();
        SkipSchedule {
            p,
            variant,
            rounds: Vec::new(),
            q: 0,
            qprime: variant.qprime().unwrap_or(0),
            pprime: None,
        }
    } else {
        build_schedule(p, variant)?
    };
    simulate_schedule_with(&schedule, inputs, op, observer, opts)
}

pub fn simulate_schedule<O: Operator + ?Sized>(
    schedule: &SkipSchedule,
    inputs: &[ElementVector],
    op: &O,
) -> Result<ScanResult> {
    simulate_schedule_observed(schedule, inputs, op, &mut ())
}

pub fn simulate_schedule_observed<O: Operator + ?Sized, B: Observer + ?Sized>(
    schedule: &SkipSchedule,
    inputs: &[ElementVector],
    op: &O,
    observer: &mut B,
) -> Result<ScanResult> {
    simulate_schedule_with(schedule, inputs, op, observer, SimOptions::default())
}

/// Runs one rank step per processor and queues the resulting sends,
/// staging `W ⊕ V` where a send needs it. Returns how many receives were
/// posted.
#[inline]
fn plan_round<O, F>(
    states: &mut [ProcessorState],
    round: &RoundSpec,
    op: &O,
    recvs: &mut [Option<(usize, RecvMode)>],
    sent: &mut Vec<Message>,
    ops_per_rank: &mut [u64],
    step: F,
) -> Result<usize>
where
    O: Operator + ?Sized,
    F: Fn(usize) -> LocalActions,
{
    let mut expected = 0usize;
    sent.clear();
    for (from, ((st, slot), ops)) in states.iter_mut().zip(recvs.iter_mut()).zip(ops_per_rank.iter_mut()).enumerate() {
        let act = step(from);
        *slot = act.recv;
        expected += usize::from(act.recv.is_some());
        let Some((to, kind)) = act.send else { continue };
        if kind == PayloadKind::Wprime {
            stage(st, op, ops).map_err(|source| Error::Operator {
                round: round.index,
                rank: from,
                source,
            })?;
        }
        sent.push(Message {
            round: round.index,
            from,
            to,
            skip: round.skip,
            epsilon: round.epsilon,
            payload_kind: kind,
        });
    }
    Ok(expected)
}

/// Executes a prebuilt schedule. The schedule must have been built for
/// `inputs.len()` processors.
pub fn simulate_schedule_with<O: Operator + ?Sized, B: Observer + ?Sized>(
    schedule: &SkipSchedule,
    inputs: &[ElementVector],
    op: &O,
    observer: &mut B,
    opts: SimOptions,
) -> Result<ScanResult> {
    let p = inputs.len();
    if schedule.p.get() != p {
        return Err(Error::Parameter(format!(
            "schedule built for p = {} but {} inputs given",
            schedule.p,
            p
        )));
    }
    let m = inputs[0].len();
    if let Some((rank, v)) = inputs.iter().enumerate().find(|(_, v)| v.len() != m) {
        return Err(Error::LengthMismatch {
            rank,
            expected: m,
            found: v.len(),
        });
    }

    let variant = schedule.variant;
    let mut states: Vec<ProcessorState> = inputs
        .iter()
        .enumerate()
        .map(|(r, v)| ProcessorState::new(r, v.clone()))
        .collect();
    if !variant.is_exclusive() {
        for st in &mut states {
            st.acc = Some(st.input.clone());
        }
    }

    let mut ops_per_rank = vec![0u64; p];
    let mut messages = Vec::with_capacity(schedule.rounds.len());
    let mut messages_per_round = Vec::with_capacity(schedule.rounds.len());
    let mut sent: Vec<Message> = Vec::new();
    let mut bytes_per_round = Vec::with_capacity(schedule.rounds.len());
    let mut recvs: Vec<Option<(usize, RecvMode)>> = vec![None; p];
    let elem_bytes = (m * op.elem_size()) as u64;

    for round in &schedule.rounds {
        observer.before_round(round, &states);

        if !phase_allowed(variant, round.phase) {
            return Err(wrong_phase(round, &variant.to_string()));
        }
        if round.phase == Phase::ExclusivePhase {
            // Rank 0 has nothing left to do once the exclusive phase starts.
            states[0].done = true;
        }

        // Every send is planned from pre-round state before anything is
        // delivered.
        let plan = match variant {
            Variant::InclusiveStraightDoubling => plan_round(&mut states, round, op, &mut recvs, &mut sent, &mut ops_per_rank, |r| {
                inclusive_actions(r, round, p)
            }),
            Variant::ExclusiveQPrimeDoubling { .. } => plan_round(&mut states, round, op, &mut recvs, &mut sent, &mut ops_per_rank, |r| {
                qprime_actions(r, round, p)
            }),
            Variant::ExclusiveRoughlyHalving => plan_round(&mut states, round, op, &mut recvs, &mut sent, &mut ops_per_rank, |r| {
                halving_actions(r, round, p)
            }),
        };
        let expected = plan?;
        if expected != sent.len() {
            return Err(Error::Protocol {
                round: round.index,
                detail: format!("{expected} receives posted for {} sends", sent.len()),
            });
        }

        // Every message moves to a higher rank, so delivering from the top
        // down means each receive still sees its sender's pre-round buffers.
        for msg in sent.iter().rev() {
            let r = msg.to;
            let mode = match recvs[r] {
                Some((src, mode)) if src == msg.from && src < r => mode,
                _ => {
                    return Err(Error::Protocol {
                        round: round.index,
                        detail: format!("rank {} sends to {r}, which does not receive from it", msg.from),
                    })
                }
            };
            let (lower, upper) = states.split_at_mut(r);
            let src = &lower[msg.from];
            let dst = &mut upper[0];
            let payload = match msg.payload_kind {
                PayloadKind::V => Some(&src.input),
                PayloadKind::W => src.acc.as_ref(),
                PayloadKind::Wprime => src.staged.as_ref(),
            }
            .ok_or_else(|| missing_acc(round, msg.from))?;
            let next = match mode {
                RecvMode::IntoAcc => dup(payload),
                RecvMode::Combine => {
                    let acc = dst.acc.as_ref().ok_or_else(|| missing_acc(round, r))?;
                    let folded = op.reduce(payload, acc).map_err(|source| Error::Operator {
                        round: round.index,
                        rank: r,
                        source,
                    })?;
                    ops_per_rank[r] += 1;
                    folded
                }
            };
            dst.set_acc(next);
        }

        observer.after_round(round, &sent);
        bytes_per_round.push(elem_bytes * sent.len() as u64);
        messages_per_round.push(sent.len());
        if opts.keep_messages {
            messages.push(std::mem::take(&mut sent));
        } else {
            messages.push(Vec::new());
        }
    }

    for st in &mut states {
        st.done = true;
    }
    observer.finished(&states);

    let rounds_used = messages_per_round.iter().filter(|&&n| n > 0).count() as u32;
    let max_ops = ops_per_rank.iter().copied().max().unwrap_or(0);
    let outputs = states
        .into_iter()
        .map(|st| if variant.is_exclusive() && st.rank == 0 { None } else { st.acc })
        .collect();

    Ok(ScanResult {
        outputs,
        trace: RunTrace {
            schedule: schedule.clone(),
            m,
            messages,
            messages_per_round,
            ops_per_rank,
            rounds_used,
            max_ops,
            bytes_per_round,
        },
    })
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum TraceRecord<'a> {
    Message(&'a Message),
    Summary {
        p: usize,
        variant: String,
        qprime: Option<u32>,
        rounds_used: u32,
        max_ops: u64,
        ops_per_rank: &'a [u64],
    },
}

impl RunTrace {
    pub fn p(&self) -> usize {
        self.schedule.p.get()
    }

    /// Total `reduce` calls over all ranks.
    pub fn total_ops(&self) -> u64 {
        self.ops_per_rank.iter().sum()
    }

    /// Replays the retained messages through a [`StructureCheck`].
    pub fn structural_violations(&self) -> Vec<String> {
        let mut check = StructureCheck::new(self.p());
        for (round, msgs) in self.schedule.rounds.iter().zip(&self.messages) {
            for msg in msgs {
                check.check(round, msg);
            }
        }
        let mut out = check.into_violations();
        if self.messages.len() != self.schedule.rounds.len() {
            out.push("message log and schedule differ in length".into());
        }
        let logged: Vec<usize> = self.messages.iter().map(Vec::len).collect();
        if logged != self.messages_per_round && logged.iter().any(|&n| n > 0) {
            out.push("message log disagrees with per-round counts".into());
        }
        out
    }

    /// JSON lines: one record per message, then a summary record.
    pub fn write_json_lines<W: Write>(&self, mut w: W) -> Result<()> {
        for msg in self.messages.iter().flatten() {
            serde_json::to_writer(&mut w, &TraceRecord::Message(msg))?;
            writeln!(w)?;
        }
        let summary = TraceRecord::Summary {
            p: self.p(),
            variant: self.schedule.variant.to_string(),
            qprime: self.schedule.variant.qprime(),
            rounds_used: self.rounds_used,
            max_ops: self.max_ops,
            ops_per_rank: &self.ops_per_rank,
        };
        serde_json::to_writer(&mut w, &summary)?;
        writeln!(w)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{BuiltinOp, Element, Interval, IntervalOp};
    use crate::schedule::{build_halving_schedule, build_qprime_schedule, Algorithm};

    fn pc(p: usize) -> ProcCount {
        ProcCount::new(p).unwrap()
    }

    fn unit_ints(p: usize) -> Vec<ElementVector> {
        (0..p).map(|r| vec![Element::Int(r as i64)]).collect()
    }

    fn strings(p: usize) -> Vec<ElementVector> {
        (0..p).map(|r| vec![Element::Str(r.to_string())]).collect()
    }

    fn best(p: usize) -> Variant {
        Algorithm::Best.resolve(pc(p)).unwrap()
    }

    #[test]
    fn best_doubling_p24() {
        let res = simulate(best(24), &unit_ints(24), &BuiltinOp::IntXor).unwrap();
        assert_eq!(res.trace.rounds_used, 5);
        assert_eq!(res.trace.max_ops, 5);
    }

    #[test]
    fn halving_p31() {
        let res = simulate(Variant::ExclusiveRoughlyHalving, &unit_ints(31), &BuiltinOp::IntSum).unwrap();
        assert_eq!(res.trace.rounds_used, 5);
        assert_eq!(res.trace.max_ops, 7);
    }

    #[test]
    fn one_doubling_concat_p4() {
        let res = simulate(Variant::ExclusiveQPrimeDoubling { qprime: 1 }, &strings(4), &BuiltinOp::StringConcat).unwrap();
        let want: Vec<Option<ElementVector>> = vec![
            None,
            Some(vec![Element::Str("0".into())]),
            Some(vec![Element::Str("01".into())]),
            Some(vec![Element::Str("012".into())]),
        ];
        assert_eq!(res.outputs, want);
    }

    #[test]
    fn single_processor() {
        let v = vec![vec![Element::Int(7)]];
        let res = simulate(Variant::InclusiveStraightDoubling, &v, &BuiltinOp::IntSum).unwrap();
        assert_eq!(res.outputs, vec![Some(vec![Element::Int(7)])]);
        assert_eq!(res.trace.rounds_used, 0);
        assert_eq!(res.trace.max_ops, 0);

        for alg in Algorithm::EXCLUSIVE {
            let variant = alg.resolve(pc(1)).unwrap();
            let res = simulate(variant, &v, &BuiltinOp::IntSum).unwrap();
            assert_eq!(res.outputs, vec![None]);
            assert_eq!(res.trace.rounds_used, 0);
        }
    }

    #[test]
    fn p_two_is_a_single_shift() {
        for alg in Algorithm::EXCLUSIVE {
            let res = simulate(alg.resolve(pc(2)).unwrap(), &unit_ints(2), &BuiltinOp::IntSum).unwrap();
            assert_eq!(res.trace.rounds_used, 1);
            assert_eq!(res.trace.max_ops, 0);
            assert_eq!(res.outputs[1], Some(vec![Element::Int(0)]));
        }
    }

    #[test]
    fn step_qprime_inclusive_round_bidirectional() {
        let sched = build_qprime_schedule(pc(24), 2).unwrap();
        let round = sched.rounds[1];
        assert_eq!((round.skip, round.phase), (2, Phase::InclusivePhase));
        let st = ProcessorState::new(12, vec![Element::Int(12)]);
        let act = step_qprime(&st, &round, 24).unwrap();
        assert_eq!(act.send, Some((14, PayloadKind::Wprime)));
        assert_eq!(act.recv, Some((10, RecvMode::Combine)));
        let st = ProcessorState::new(0, vec![Element::Int(0)]);
        let act = step_qprime(&st, &round, 24).unwrap();
        assert_eq!(act, LocalActions { send: Some((2, PayloadKind::V)), recv: None });
    }

    #[test]
    fn step_rejects_foreign_phase() {
        let sched = build_halving_schedule(pc(24)).unwrap();
        let st = ProcessorState::new(3, vec![]);
        assert!(step_qprime(&st, &sched.rounds[1], 24).is_err());
        assert!(step_inclusive(&st, &sched.rounds[0], 24).is_err());
        let sched = build_qprime_schedule(pc(24), 2).unwrap();
        assert!(step_halving(&st, &sched.rounds[2], 24).is_err());
    }

    #[test]
    fn step_qprime_exclusive_round_send_only() {
        let sched = build_qprime_schedule(pc(24), 2).unwrap();
        let round = sched.rounds[2];
        assert_eq!((round.skip, round.phase), (3, Phase::ExclusivePhase));
        let st = ProcessorState::new(1, vec![Element::Int(1)]);
        let act = step_qprime(&st, &round, 24).unwrap();
        assert_eq!(act.send, Some((4, PayloadKind::W)));
        assert_eq!(act.recv, None);
    }

    #[test]
    fn step_shift_rank_zero() {
        let sched = build_qprime_schedule(pc(7), 2).unwrap();
        let st = ProcessorState::new(0, vec![]);
        let act = step_qprime(&st, &sched.rounds[0], 7).unwrap();
        assert_eq!(act, LocalActions { send: Some((1, PayloadKind::V)), recv: None });
    }

    #[test]
    fn step_halving_cases() {
        let sched = build_halving_schedule(pc(24)).unwrap();
        let round = sched.rounds[1];
        assert_eq!((round.skip, round.epsilon), (2, 1));
        let st = ProcessorState::new(5, vec![Element::Int(5)]);
        let act = step_halving(&st, &round, 24).unwrap();
        assert_eq!(act.send, Some((6, PayloadKind::W)));
        assert_eq!(act.recv, Some((4, RecvMode::Combine)));

        let round = sched.rounds[3];
        assert_eq!((round.skip, round.epsilon), (6, 0));
        let st = ProcessorState::new(0, vec![Element::Int(0)]);
        let act = step_halving(&st, &round, 24).unwrap();
        assert_eq!(act, LocalActions { send: Some((6, PayloadKind::V)), recv: None });
    }

    #[test]
    fn send_only_rank_stages_once() {
        // p = 24, q' = q: rank 3 is send-only from s = 4 on and must not
        // recompute W ⊕ V in the rounds with s = 8 and s = 16.
        let res = simulate(Variant::ExclusiveQPrimeDoubling { qprime: 5 }, &unit_ints(24), &BuiltinOp::IntSum).unwrap();
        assert_eq!(res.trace.max_ops, 6);
        // Rank 3: bidirectional at s = 2 (2 ops), then staged once.
        assert_eq!(res.trace.ops_per_rank[3], 3);
    }

    #[test]
    fn interval_gap_aborts_with_round() {
        // Give rank 3 a bogus window so only its first fold hits a gap.
        let mut inputs: Vec<ElementVector> = (0..4).map(|r| vec![Element::Interval(Interval::unit(r))]).collect();
        inputs[3] = vec![Element::Interval(Interval::new(7, 8))];
        let err = simulate(Variant::InclusiveStraightDoubling, &inputs, &IntervalOp).unwrap_err();
        match err {
            Error::Operator { round, rank, .. } => assert_eq!((round, rank), (0, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn schedule_mismatch_is_an_error() {
        let sched = build_halving_schedule(pc(8)).unwrap();
        assert!(matches!(
            simulate_schedule(&sched, &unit_ints(9), &BuiltinOp::IntSum),
            Err(Error::Parameter(_))
        ));
        let mut inputs = unit_ints(8);
        inputs[3].push(Element::Int(1));
        assert!(matches!(
            simulate_schedule(&sched, &inputs, &BuiltinOp::IntSum),
            Err(Error::LengthMismatch { rank: 3, .. })
        ));
        assert!(simulate(Variant::ExclusiveQPrimeDoubling { qprime: 4 }, &unit_ints(8), &BuiltinOp::IntSum).is_err());
    }

    #[test]
    fn bytes_accounting() {
        let inputs: Vec<ElementVector> = (0..8).map(|r| vec![Element::Int(r); 3]).collect();
        let res = simulate(Variant::ExclusiveRoughlyHalving, &inputs, &BuiltinOp::IntSum).unwrap();
        for (msgs, bytes) in res.trace.messages.iter().zip(&res.trace.bytes_per_round) {
            assert_eq!(*bytes, (msgs.len() * 3 * 8) as u64);
        }
        assert!(res.trace.structural_violations().is_empty());
    }

    #[test]
    fn json_lines_export() {
        let res = simulate(Variant::ExclusiveQPrimeDoubling { qprime: 1 }, &unit_ints(3), &BuiltinOp::IntSum).unwrap();
        let mut buf = Vec::new();
        res.trace.write_json_lines(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        // Shift: 0->1, 1->2; then s = 1 exclusive: 1->2.
        assert_eq!(lines.len(), 4);
        assert_eq!(
            lines[0],
            serde_json::json!({"record": "message", "round": 0, "from": 0, "to": 1, "skip": 1, "epsilon": 0, "payload_kind": "V"})
        );
        assert_eq!(lines[2]["payload_kind"], "W");
        assert_eq!(lines[3]["record"], "summary");
        assert_eq!(lines[3]["qprime"], 1);
        assert_eq!(lines[3]["rounds_used"], 2);
        assert_eq!(lines[3]["ops_per_rank"], serde_json::json!([0, 0, 1]));
    }

    #[test]
    fn deterministic() {
        let inputs = strings(37);
        let a = simulate(best(37), &inputs, &BuiltinOp::StringConcat).unwrap();
        let b = simulate(best(37), &inputs, &BuiltinOp::StringConcat).unwrap();
        assert_eq!(a, b);
    }
}
