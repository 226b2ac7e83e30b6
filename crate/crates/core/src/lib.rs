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

//! Simulation and verification of one-ported, circulant-graph scan
//! algorithms: straight doubling inclusive scan, the q'-doubling exclusive
//! scan family and the roughly halving exclusive scan.
//!
//! [`schedule`] builds the per-round skips, [`simulator`] executes them
//! for `p` ranks, and [`verify`] compares runs against sequential oracles
//! and the closed-form round and operator-count predictions.

pub mod cost;
pub mod error;
pub mod operators;
pub mod schedule;
pub mod simulator;
pub mod verify;

pub use error::{Error, Result};
pub use operators::{
    builtin_operator, interval_operator, BuiltinOp, CountingOperator, Element, ElementVector, Interval,
    IntervalOp, Mat2, OpError, Operator,
};
pub use schedule::{
    best_qprime, build_halving_schedule, build_qprime_schedule, build_schedule, ceil_log2,
    predict_ops_bound_halving, predict_ops_bound_qprime, predict_rounds_qprime, Algorithm, Phase,
    ProcCount, RoundSpec, SkipSchedule, Variant,
};
pub use simulator::{
    simulate, simulate_observed, simulate_schedule, simulate_with, Message, Observer, PayloadKind, RunTrace,
    ScanResult, SimOptions, StructureCheck,
};
