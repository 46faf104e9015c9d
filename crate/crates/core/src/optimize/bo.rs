use std::collections::HashSet;

use rand_chacha::ChaCha8Rng;

use super::{sample_swaps, BoConfig, BudgetedObjective, RunTrace};
use crate::error::{Error, Result};
use crate::population::{random_subset, SubsetSelection};
use crate::surrogate::{FittedGP, SetKernelKind, SurrogateWorkspace, TrainingData};

/// Greedy ascent of expected improvement over 1-swap moves. Only the
/// surrogate is consulted. Returns the endpoint and its EI.
pub fn ei_hill_climb(
    gp: &FittedGP,
    start: &SubsetSelection,
    f_min: f64,
    cfg: &BoConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(SubsetSelection, f64)> {
    let n = gp.population_size();
    let mut state = gp.query_state(start);
    let mut ei = gp.expected_improvement_state(&state, f_min);
    for _ in 0..cfg.max_hillclimb_steps {
        let moves = sample_swaps(state.subset(), n, cfg.neighbors_per_step, rng);
        let mut best = None;
        let mut best_ei = f64::NEG_INFINITY;
        for (out, inn) in moves {
            let next = gp.swap_state(&state, out, inn)?;
            let v = gp.expected_improvement_state(&next, f_min);
            if v > best_ei {
                best_ei = v;
                best = Some(next);
            }
        }
        match best {
            Some(next) if best_ei > ei => {
                state = next;
                ei = best_ei;
            }
            _ => break,
        }
    }
    Ok((state.subset().clone(), ei))
}

/// Bayesian optimization over subsets with a set-kernel GP surrogate.
pub fn run_bo(
    mut budget: BudgetedObjective,
    m: usize,
    cfg: &BoConfig,
    kind: SetKernelKind,
) -> Result<RunTrace> {
    cfg.validate(budget.budget())?;
    let n = budget.population_size();
    if m == 0 || m > n {
        return Err(Error::invalid(format!("subset size {m} not in 1..={n}")));
    }
    let mut subsets = Vec::with_capacity(cfg.n_init + cfg.iterations);
    let mut values = Vec::with_capacity(cfg.n_init + cfg.iterations);
    let mut seen = HashSet::new();

    let mut init_rng = cfg.seed.stream("bo/init");
    for _ in 0..cfg.n_init {
        let s = random_subset(n, m, &mut init_rng)?;
        values.push(budget.evaluate(&s)?);
        seen.insert(s.clone());
        subsets.push(s);
    }

    let population = budget.objective().population().clone();
    let mut workspace = SurrogateWorkspace::new(population, &cfg.gp.grid.sigma_x);
    for t in 1..=cfg.iterations {
        let data = TrainingData::new(subsets.clone(), values.clone(), &cfg.gp)?;
        let gp = match workspace.fit(&data, &cfg.gp, kind) {
            Err(Error::AllJitterFailed) => workspace.fit(&data.deduplicated(&cfg.gp)?, &cfg.gp, kind)?,
            other => other?,
        };
        let f_min = gp.f_min();
        let z = gp.data().standardized();
        let incumbent = z
            .iter()
            .position(|&v| v == f_min)
            .map(|i| gp.data().subsets()[i].clone())
            .expect("training data is non-empty");

        let mut endpoints = Vec::with_capacity(cfg.random_restarts + 1);
        let mut rng = cfg.seed.stream(&format!("bo/iter{t}/climb0"));
        endpoints.push(ei_hill_climb(&gp, &incumbent, f_min, cfg, &mut rng)?);
        for r in 1..=cfg.random_restarts {
            let mut rng = cfg.seed.stream(&format!("bo/iter{t}/climb{r}"));
            let start = random_subset(n, m, &mut rng)?;
            endpoints.push(ei_hill_climb(&gp, &start, f_min, cfg, &mut rng)?);
        }
        // Stable: equal EI keeps the scan order.
        endpoints.sort_by(|a, b| b.1.total_cmp(&a.1));

        let chosen = match endpoints.into_iter().find(|(s, _)| !seen.contains(s)) {
            Some((s, _)) => s,
            None => fresh_subset(n, m, &seen, &mut cfg.seed.stream(&format!("bo/iter{t}/fallback")))?,
        };
        values.push(budget.evaluate(&chosen)?);
        seen.insert(chosen.clone());
        subsets.push(chosen);
    }

    let method = match kind {
        SetKernelKind::DeepEmbedding => "bo-de",
        SetKernelKind::DoubleSum => "bo-ds",
    };
    let config = serde_json::to_value(cfg).expect("config serializes");
    Ok(budget.into_trace(method, config))
}

/// A uniform subset outside `seen`, or any uniform subset once every try
/// collides (tiny instances where nearly all subsets are known).
fn fresh_subset(
    n: usize,
    m: usize,
    seen: &HashSet<SubsetSelection>,
    rng: &mut ChaCha8Rng,
) -> Result<SubsetSelection> {
    let mut s = random_subset(n, m, rng)?;
    for _ in 0..10_000 {
        if !seen.contains(&s) {
            break;
        }
        s = random_subset(n, m, rng)?;
    }
    Ok(s)
}
