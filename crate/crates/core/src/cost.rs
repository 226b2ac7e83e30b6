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

//! Linear latency/bandwidth/compute model for ranking the exclusive scan
//! variants. The default parameters are illustrative, not measured.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::{Algorithm, ProcCount, Variant};
use crate::verify::measure;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// Per-round latency.
    pub alpha: f64,
    /// Per-element transfer time.
    pub beta: f64,
    /// Per-element reduction time.
    pub gamma: f64,
    /// Bytes per element, for reporting only.
    pub elem_size: usize,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams {
            alpha: 1.0,
            beta: 0.01,
            gamma: 0.005,
            elem_size: 8,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        let finite_non_negative = |x: f64| x.is_finite() && x >= 0.0;
        if !(finite_non_negative(self.alpha) && finite_non_negative(self.beta) && finite_non_negative(self.gamma)) {
            return Err(Error::Parameter(format!("cost parameters must be non-negative: {self:?}")));
        }
        Ok(())
    }

    /// `rounds · (α + β·m) + γ·m·max_ops`.
    pub fn modeled_time(&self, rounds: u32, max_ops: u64, m: usize) -> f64 {
        let m = m as f64;
        rounds as f64 * (self.alpha + self.beta * m) + self.gamma * m * max_ops as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ranked {
    pub algorithm: Algorithm,
    pub variant: Variant,
    pub rounds: u32,
    pub max_ops: u64,
    pub bytes_per_message: u64,
    pub time: f64,
}

/// Models every exclusive variant at `p` and sorts them fastest first.
/// Ties keep table order (one, best, twoop, halving).
pub fn compare(p: usize, m: usize, cost: &CostParams) -> Result<Vec<Ranked>> {
    cost.validate()?;
    let pc = ProcCount::new(p)?;
    let mut ranked = Algorithm::EXCLUSIVE
        .into_iter()
        .map(|algorithm| {
            let variant = algorithm.resolve(pc)?;
            // Counts are independent of m; simulate with empty vectors.
            let cell = measure(variant, p, 0)?;
            Ok(Ranked {
                algorithm,
                variant,
                rounds: cell.q,
                max_ops: cell.ops,
                bytes_per_message: (m * cost.elem_size) as u64,
                time: cost.modeled_time(cell.q, cell.ops, m),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| a.time.total_cmp(&b.time));
    Ok(ranked)
}
