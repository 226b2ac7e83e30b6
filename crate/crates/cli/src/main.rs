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

//! `exscan`: reproduce the round/operator-count table, run verification
//! sweeps, dump schedules and traces, and rank variants under a linear
//! cost model.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error.

use std::io::{self, Write};
use std::ops::Range;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use exscan_core::cost::{compare, CostParams};
use exscan_core::verify::{reproduce_table, table_to_csv, table_to_markdown, verify_all, VerifyConfig};
use exscan_core::{simulate, Algorithm, BuiltinOp, Element, ElementVector, Error, ProcCount};
use serde_json::json;

#[derive(Parser)]
#[command(name = "exscan", version, about = "Circulant-graph scan algorithm laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure rounds and operator applications for a range of p.
    Table {
        /// Half-open range `a..b` of processor counts.
        #[arg(long = "p", value_parser = parse_range)]
        range: Range<usize>,
        #[arg(long, value_enum, default_value_t = Format::Md)]
        format: Format,
    },
    /// Oracle, invariant and bound sweeps for every p up to --p-max.
    Verify {
        #[arg(long)]
        p_max: usize,
        /// Vector lengths to test.
        #[arg(long, value_delimiter = ',', default_values_t = [0usize, 1, 5])]
        ms: Vec<usize>,
        /// Operators to test.
        #[arg(long, value_delimiter = ',', default_values = ["int-sum", "string-concat", "mat2-mult"])]
        ops: Vec<BuiltinOp>,
        /// Largest p for the interval-window checks.
        #[arg(long, default_value_t = 256)]
        window_p_max: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Print the round schedule and the JSON-lines message log of an m = 1 run.
    Trace {
        #[arg(long, value_enum)]
        variant: VariantName,
        #[arg(long)]
        p: usize,
        /// Inclusive-phase rounds, required for `--variant qprime`.
        #[arg(long)]
        qprime: Option<u32>,
    },
    /// Rank the exclusive variants by modeled time (illustrative, not measured).
    Compare {
        #[arg(long)]
        p: usize,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long, default_value_t = CostParams::default().alpha)]
        alpha: f64,
        #[arg(long, default_value_t = CostParams::default().beta)]
        beta: f64,
        #[arg(long, default_value_t = CostParams::default().gamma)]
        gamma: f64,
        #[arg(long, default_value_t = CostParams::default().elem_size)]
        elem_size: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Md,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantName {
    Inclusive,
    Qprime,
    One,
    Twoop,
    Best,
    Halving,
}

enum Failure {
    Usage(String),
    Verification(String),
    Internal(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Internal(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Internal(e.into())
    }
}

/// Parameter and degenerate-input errors from the library are the caller's
/// fault; anything else is internal.
fn classify(e: Error) -> Failure {
    match e {
        Error::Parameter(_) | Error::Degenerate(_) => Failure::Usage(e.to_string()),
        other => Failure::Internal(other.into()),
    }
}

fn parse_range(s: &str) -> Result<Range<usize>, String> {
    let (lo, hi) = s
        .split_once("..")
        .ok_or_else(|| format!("expected a half-open range a..b, got `{s}`"))?;
    let lo: usize = lo.trim().parse().map_err(|_| format!("bad range start `{lo}`"))?;
    let hi: usize = hi.trim().parse().map_err(|_| format!("bad range end `{hi}`"))?;
    if lo < 2 || lo >= hi {
        return Err(format!("range {lo}..{hi} must be non-empty with start ≥ 2"));
    }
    Ok(lo..hi)
}

fn cmd_table(range: Range<usize>, format: Format) -> Result<(), Failure> {
    let rows = reproduce_table(range.start, range.end - 1).map_err(classify)?;
    let text = match format {
        Format::Csv => table_to_csv(&rows).map_err(classify)?,
        Format::Md => table_to_markdown(&rows),
    };
    io::stdout().write_all(text.as_bytes())?;
    Ok(())
}

fn cmd_verify(cfg: VerifyConfig) -> Result<(), Failure> {
    if cfg.p_max < 2 {
        return Err(Failure::Usage(format!("--p-max must be at least 2, got {}", cfg.p_max)));
    }
    let started = Instant::now();
    let report = verify_all(&cfg).map_err(classify)?;
    let mut err = io::stderr().lock();
    for f in report.failures.iter().chain(&report.bounds.violations) {
        writeln!(err, "FAIL {f}")?;
    }
    println!(
        "oracle runs: {}, window runs: {}, bound cells: {}, failures: {}, elapsed: {:.1?}",
        report.oracle_runs,
        report.window_runs,
        report.bounds.cells,
        report.failures.len() + report.bounds.violations.len(),
        started.elapsed()
    );
    match report.first_failure() {
        None => Ok(()),
        Some(f) => Err(Failure::Verification(format!("first failure: {f}"))),
    }
}

fn cmd_trace(name: VariantName, p: usize, qprime: Option<u32>) -> Result<(), Failure> {
    let algorithm = match (name, qprime) {
        (VariantName::Qprime, Some(n)) => Algorithm::QPrime(n),
        (VariantName::Qprime, None) => return Err(Failure::Usage("--variant qprime needs --qprime N".into())),
        (_, Some(_)) => return Err(Failure::Usage("--qprime only applies to --variant qprime".into())),
        (VariantName::Inclusive, None) => Algorithm::Inclusive,
        (VariantName::One, None) => Algorithm::One,
        (VariantName::Twoop, None) => Algorithm::TwoOp,
        (VariantName::Best, None) => Algorithm::Best,
        (VariantName::Halving, None) => Algorithm::Halving,
    };
    let pc = ProcCount::new(p).map_err(classify)?;
    let variant = algorithm.resolve(pc).map_err(classify)?;
    let inputs: Vec<ElementVector> = (0..p).map(|r| vec![Element::Int(r as i64)]).collect();
    let result = simulate(variant, &inputs, &BuiltinOp::IntXor).map_err(classify)?;
    let sched = &result.trace.schedule;

    let mut out = io::stdout().lock();
    let header = json!({
        "record": "schedule",
        "p": p,
        "algorithm": algorithm.label(),
        "variant": variant.to_string(),
        "qprime": variant.qprime(),
        "pprime": sched.pprime,
        "q": sched.q,
    });
    writeln!(out, "{header}")?;
    for round in &sched.rounds {
        let mut rec = serde_json::to_value(round).context("serializing round")?;
        rec["record"] = json!("round");
        writeln!(out, "{rec}")?;
    }
    result.trace.write_json_lines(&mut out).map_err(classify)?;
    Ok(())
}

fn cmd_compare(p: usize, m: usize, cost: CostParams) -> Result<(), Failure> {
    let ranked = compare(p, m, &cost).map_err(classify)?;
    println!(
        "# p={p} m={m} alpha={} beta={} gamma={} elem_size={} (illustrative, not measured)",
        cost.alpha, cost.beta, cost.gamma, cost.elem_size
    );
    println!("{:>4}  {:<8} {:<10} {:>6} {:>7} {:>14}", "rank", "variant", "resolved", "rounds", "max_ops", "modeled_time");
    for (i, r) in ranked.iter().enumerate() {
        println!(
            "{:>4}  {:<8} {:<10} {:>6} {:>7} {:>14.6}",
            i + 1,
            r.algorithm.label(),
            r.variant.to_string(),
            r.rounds,
            r.max_ops,
            r.time
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Table { range, format } => cmd_table(range, format),
        Command::Verify {
            p_max,
            ms,
            ops,
            window_p_max,
            seed,
            jobs,
        } => cmd_verify(VerifyConfig {
            p_max,
            ms,
            ops,
            window_p_max: window_p_max.min(p_max),
            seed,
            jobs,
        }),
        Command::Trace { variant, p, qprime } => cmd_trace(variant, p, qprime),
        Command::Compare {
            p,
            m,
            alpha,
            beta,
            gamma,
            elem_size,
        } => cmd_compare(p, m, CostParams { alpha, beta, gamma, elem_size }),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Verification(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
