//! Subset-selection strategies under a shared budget of true evaluations.

mod baselines;
mod bo;

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use baselines::{run_gls, run_gls_detailed, run_random, GlsOutcome};
pub use bo::{ei_hill_climb, run_bo};

use crate::discrepancy::DiscrepancyObjective;
use crate::error::{Error, Result};
use crate::population::{random_swap, SubsetSelection};
use crate::rng::RngSeed;
use crate::surrogate::GpConfig;

/// Knobs of the Bayesian-optimization loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoConfig {
    pub n_init: usize,
    pub iterations: usize,
    pub neighbors_per_step: usize,
    pub max_hillclimb_steps: usize,
    pub random_restarts: usize,
    pub gp: GpConfig,
    pub seed: RngSeed,
}

impl Default for BoConfig {
    fn default() -> Self {
        BoConfig {
            n_init: 50,
            iterations: 50,
            neighbors_per_step: 50,
            max_hillclimb_steps: 30,
            random_restarts: 3,
            gp: GpConfig::default(),
            seed: RngSeed(0),
        }
    }
}

impl BoConfig {
    pub fn validate(&self, budget: usize) -> Result<()> {
        if self.n_init < 2 {
            return Err(Error::invalid("n_init must be at least 2"));
        }
        if self.n_init + self.iterations > budget {
            return Err(Error::invalid(format!(
                "n_init + iterations = {} exceeds the budget of {budget}",
                self.n_init + self.iterations
            )));
        }
        self.gp.validate()
    }
}

/// Knobs of the greedy local-swap baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlsConfig {
    pub pool_size: usize,
    pub neighbors_per_step: usize,
    pub seed: RngSeed,
}

impl Default for GlsConfig {
    fn default() -> Self {
        GlsConfig { pool_size: 10, neighbors_per_step: 50, seed: RngSeed(0) }
    }
}

/// One true objective evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// 1-based.
    pub eval_index: usize,
    pub subset: SubsetSelection,
    pub value: f64,
    pub best_so_far: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub method: String,
    pub records: Vec<TraceRecord>,
    pub config: serde_json::Value,
}

pub const TRACE_HEADER: &str = "eval_index,value,best_so_far,subset_indices";

impl RunTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Best evaluated subset; ties go to the earliest evaluation.
    pub fn best(&self) -> Option<(&SubsetSelection, f64)> {
        let mut best: Option<&TraceRecord> = None;
        for r in &self.records {
            if best.is_none_or(|b| r.value < b.value) {
                best = Some(r);
            }
        }
        best.map(|r| (&r.subset, r.value))
    }

    pub fn final_best(&self) -> Option<f64> {
        self.records.last().map(|r| r.best_so_far)
    }

    pub fn best_so_far(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.best_so_far).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        for r in &self.records {
            writeln!(w, "{},{},{},{}", r.eval_index, r.value, r.best_so_far, r.subset)?;
        }
        w.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

/// The objective wrapped with an evaluation budget; every method talks to
/// the objective through this.
#[derive(Debug)]
pub struct BudgetedObjective {
    objective: Arc<DiscrepancyObjective>,
    budget: usize,
    spent: usize,
    memo: Option<HashMap<SubsetSelection, f64>>,
    records: Vec<TraceRecord>,
}

impl BudgetedObjective {
    pub fn new(objective: Arc<DiscrepancyObjective>, budget: usize) -> Self {
        BudgetedObjective { objective, budget, spent: 0, memo: None, records: Vec::new() }
    }

    /// Repeated subsets are answered from memory without spending budget.
    pub fn with_memo(mut self, on: bool) -> Self {
        self.memo = on.then(HashMap::new);
        self
    }

    pub fn objective(&self) -> &Arc<DiscrepancyObjective> {
        &self.objective
    }

    pub fn population_size(&self) -> usize {
        self.objective.population().len()
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn spent(&self) -> usize {
        self.spent
    }

    pub fn remaining(&self) -> usize {
        self.budget - self.spent
    }

    pub fn memoized(&self) -> bool {
        self.memo.is_some()
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn evaluate(&mut self, sel: &SubsetSelection) -> Result<f64> {
        if let Some(v) = self.memo.as_ref().and_then(|m| m.get(sel)) {
            return Ok(*v);
        }
        if self.spent >= self.budget {
            return Err(Error::BudgetExhausted(self.budget));
        }
        let value = self.objective.evaluate(sel)?;
        self.spent += 1;
        let best_so_far = self.records.last().map_or(value, |r| r.best_so_far.min(value));
        self.records.push(TraceRecord {
            eval_index: self.spent,
            subset: sel.clone(),
            value,
            best_so_far,
        });
        if let Some(m) = self.memo.as_mut() {
            m.insert(sel.clone(), value);
        }
        Ok(value)
    }

    pub fn into_trace(self, method: &str, config: serde_json::Value) -> RunTrace {
        RunTrace { method: method.to_string(), records: self.records, config }
    }
}

/// Up to `max` distinct 1-swap moves `(out, in)` of `sel`. When `max`
/// covers the whole neighbourhood every move is returned in a fixed order;
/// otherwise moves are drawn uniformly, rejecting repeats.
pub(crate) fn sample_swaps(
    sel: &SubsetSelection,
    pop_size: usize,
    max: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(usize, usize)> {
    let m = sel.len();
    if m >= pop_size || max == 0 {
        return Vec::new();
    }
    let size = m.saturating_mul(pop_size - m);
    if max >= size {
        let mut all = Vec::with_capacity(size);
        for &out in sel.indices() {
            for k in 0..pop_size - m {
                all.push((out, sel.kth_non_member(k)));
            }
        }
        return all;
    }
    let mut seen = HashSet::with_capacity(max);
    let mut moves = Vec::with_capacity(max);
    while moves.len() < max {
        let mv = random_swap(sel, pop_size, rng).expect("neighbourhood is non-empty");
        if seen.insert(mv) {
            moves.push(mv);
        }
    }
    moves
}
