use super::{sample_swaps, BudgetedObjective, GlsConfig, RunTrace};
use crate::error::{Error, Result};
use crate::population::{random_subset, SubsetSelection};
use crate::rng::RngSeed;

/// Uniformly random subsets until the budget is spent.
pub fn run_random(mut budget: BudgetedObjective, m: usize, seed: RngSeed) -> Result<RunTrace> {
    if budget.budget() == 0 {
        return Err(Error::invalid("random search needs a budget of at least 1"));
    }
    let n = budget.population_size();
    let mut rng = seed.stream("random");
    // With memoization on, repeats are free; stop drawing eventually on tiny
    // populations where every subset has been seen.
    let mut attempts = 0usize;
    let max_attempts = budget.budget().saturating_mul(100);
    while budget.remaining() > 0 && attempts < max_attempts {
        let s = random_subset(n, m, &mut rng)?;
        budget.evaluate(&s)?;
        attempts += 1;
    }
    let config = serde_json::json!({ "seed": seed, "m": m, "budget": budget.budget() });
    Ok(budget.into_trace("random", config))
}

/// GLS result with the subsets at which a restart was triggered.
#[derive(Debug, Clone)]
pub struct GlsOutcome {
    pub trace: RunTrace,
    /// Subsets whose whole sampled neighbourhood failed to improve.
    pub restart_points: Vec<(SubsetSelection, f64)>,
}

pub fn run_gls(budget: BudgetedObjective, m: usize, cfg: &GlsConfig) -> Result<RunTrace> {
    run_gls_detailed(budget, m, cfg).map(|o| o.trace)
}

/// Greedy local swap: best of a random pool, then repeated moves to the best
/// strictly improving sampled 1-swap neighbour, with a random restart
/// whenever a step finds no improvement.
pub fn run_gls_detailed(mut budget: BudgetedObjective, m: usize, cfg: &GlsConfig) -> Result<GlsOutcome> {
    let n = budget.population_size();
    if cfg.pool_size == 0 {
        return Err(Error::invalid("GLS pool size must be at least 1"));
    }
    if budget.budget() < cfg.pool_size {
        return Err(Error::invalid(format!(
            "budget {} is smaller than the GLS pool of {}",
            budget.budget(),
            cfg.pool_size
        )));
    }
    let mut rng = cfg.seed.stream("gls");
    let mut restart_points = Vec::new();

    let mut current: Option<(SubsetSelection, f64)> = None;
    for _ in 0..cfg.pool_size {
        let s = random_subset(n, m, &mut rng)?;
        let v = budget.evaluate(&s)?;
        if current.as_ref().is_none_or(|(_, c)| v < *c) {
            current = Some((s, v));
        }
    }
    let (mut cur, mut cur_value) = current.expect("pool is non-empty");

    let mut stalled = 0usize;
    while budget.remaining() > 0 {
        let spent_before = budget.spent();
        let moves = sample_swaps(&cur, n, cfg.neighbors_per_step, &mut rng);
        let mut best: Option<(SubsetSelection, f64)> = None;
        let mut complete = true;
        for (out, inn) in moves {
            if budget.remaining() == 0 {
                complete = false;
                break;
            }
            let s = cur.swap(out, inn)?;
            let v = budget.evaluate(&s)?;
            if best.as_ref().is_none_or(|(_, b)| v < *b) {
                best = Some((s, v));
            }
        }
        match best {
            Some((s, v)) if v < cur_value => {
                cur = s;
                cur_value = v;
            }
            _ => {
                if !complete || budget.remaining() == 0 {
                    break;
                }
                restart_points.push((cur.clone(), cur_value));
                cur = random_subset(n, m, &mut rng)?;
                cur_value = budget.evaluate(&cur)?;
            }
        }
        // Memoized runs on tiny instances can stop spending budget.
        if budget.spent() == spent_before {
            stalled += 1;
            if stalled > 1000 {
                break;
            }
        } else {
            stalled = 0;
        }
    }

    let config = serde_json::to_value(cfg).expect("config serializes");
    Ok(GlsOutcome { trace: budget.into_trace("gls", config), restart_points })
}
