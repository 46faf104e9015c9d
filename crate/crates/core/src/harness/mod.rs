//! Multi-seed experiment driver.
//!
//! Every seed gets one population shared by all methods; every
//! `(seed, method)` cell runs independently and in parallel. Per-cell traces
//! are flushed to disk as cells finish, and the summary holds the medians and
//! quartiles of best-so-far curves across seeds.

mod config;
mod export;

use std::path::Path;
use std::sync::{mpsc, Arc};

use rayon::prelude::*;

pub use config::{ExperimentConfig, ExperimentKind, Manifest, Method, PopulationSource};
pub use export::{export_summary, write_trace};

use crate::discrepancy::{BaseKernelSpec, DiscrepancyObjective};
use crate::error::{Error, Result};
use crate::optimize::{run_bo, run_gls, run_random, BudgetedObjective, RunTrace};
use crate::population::{generate_gaussian_mixture, generate_uniform, PointSet, SubsetSelection};
use crate::rng::RngSeed;
use crate::surrogate::SetKernelKind;

/// Environment variable capping the number of cells run at once.
pub const THREADS_ENV: &str = "LDSUBSET_THREADS";

/// Population of one seed.
pub fn build_population(cfg: &ExperimentConfig, seed: RngSeed) -> Result<PointSet> {
    let pop = match &cfg.population {
        PopulationSource::File { path, header } => PointSet::read_csv(path, *header)?,
        PopulationSource::Generate => {
            let seed = seed.child("population");
            match cfg.experiment {
                ExperimentKind::MmdMixture => generate_gaussian_mixture(cfg.n, cfg.d, &cfg.mixture, seed)?,
                ExperimentKind::SymmetricL2 | ExperimentKind::Star => generate_uniform(cfg.n, cfg.d, seed)?,
            }
        }
    };
    if pop.len() < cfg.m {
        return Err(Error::Config(format!(
            "population has {} points, fewer than m = {}",
            pop.len(),
            cfg.m
        )));
    }
    Ok(pop)
}

pub fn build_objective(cfg: &ExperimentConfig, population: Arc<PointSet>) -> Result<DiscrepancyObjective> {
    match cfg.experiment {
        ExperimentKind::SymmetricL2 => DiscrepancyObjective::l2(population, BaseKernelSpec::SymmetricProduct),
        ExperimentKind::MmdMixture => {
            DiscrepancyObjective::mmd(population, BaseKernelSpec::rbf(cfg.mmd_sigma)?, None)
        }
        ExperimentKind::Star => DiscrepancyObjective::star(population),
    }
}

/// One `(seed, method)` cell. The method's randomness is derived from the
/// seed and the method name only.
pub fn run_method(
    cfg: &ExperimentConfig,
    objective: Arc<DiscrepancyObjective>,
    method: Method,
    seed: RngSeed,
) -> Result<RunTrace> {
    let budget = BudgetedObjective::new(objective, cfg.budget).with_memo(cfg.memoize);
    let seed = seed.child(method.name());
    match method {
        Method::Random => run_random(budget, cfg.m, seed),
        Method::Gls => run_gls(budget, cfg.m, &cfg.gls_config(seed)),
        Method::BoDs => run_bo(budget, cfg.m, &cfg.bo_config(method, seed)?, SetKernelKind::DoubleSum),
        Method::BoDe => run_bo(budget, cfg.m, &cfg.bo_config(method, seed)?, SetKernelKind::DeepEmbedding),
    }
}

/// Per-index order statistics of best-so-far across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub median: Vec<f64>,
    pub q25: Vec<f64>,
    pub q75: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: RngSeed,
    pub trace: RunTrace,
}

impl SeedRun {
    pub fn best_subset(&self) -> Option<(&SubsetSelection, f64)> {
        self.trace.best()
    }
}

#[derive(Debug, Clone)]
pub struct MethodSummary {
    pub method: Method,
    /// In the config's seed order.
    pub runs: Vec<SeedRun>,
    pub band: Band,
}

impl MethodSummary {
    pub fn final_best(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.trace.final_best().unwrap_or(f64::NAN)).collect()
    }

    pub fn median_final(&self) -> f64 {
        quantile(&self.final_best(), 0.5)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub populations: Vec<(RngSeed, Arc<PointSet>)>,
    pub methods: Vec<MethodSummary>,
}

impl ExperimentSummary {
    pub fn method(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == method)
    }
}

/// Linear-interpolation sample quantile (the usual "type 7").
pub fn quantile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Bands over the longest trace; a shorter trace (possible only with
/// memoization) keeps its final best-so-far value.
pub fn aggregate(traces: &[&RunTrace]) -> Band {
    let len = traces.iter().map(|t| t.len()).max().unwrap_or(0);
    let mut band = Band { median: Vec::with_capacity(len), q25: Vec::with_capacity(len), q75: Vec::with_capacity(len) };
    let mut column = Vec::with_capacity(traces.len());
    for i in 0..len {
        column.clear();
        column.extend(traces.iter().filter_map(|t| t.records.get(i).or(t.records.last())).map(|r| r.best_so_far));
        band.median.push(quantile(&column, 0.5));
        band.q25.push(quantile(&column, 0.25));
        band.q75.push(quantile(&column, 0.75));
    }
    band
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Runs every cell without touching the filesystem.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    run_cells(cfg, None)
}

/// Runs every cell, writing each trace under `out/traces` as soon as its
/// cell finishes, then writes the summary files.
pub fn run_experiment_to(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentSummary> {
    let summary = run_cells(cfg, Some(out))?;
    export_summary(&summary, out)?;
    Ok(summary)
}

fn run_cells(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let pool = thread_pool()?;

    let populations: Vec<(RngSeed, Arc<PointSet>)> = if let PopulationSource::File { .. } = cfg.population {
        let shared = Arc::new(build_population(cfg, cfg.seeds[0])?);
        cfg.seeds.iter().map(|&s| (s, shared.clone())).collect()
    } else {
        pool.install(|| {
            cfg.seeds
                .par_iter()
                .map(|&s| build_population(cfg, s).map(|p| (s, Arc::new(p))))
                .collect::<Result<_>>()
        })?
    };
    let objectives: Vec<Arc<DiscrepancyObjective>> = pool.install(|| {
        populations
            .par_iter()
            .map(|(_, p)| build_objective(cfg, p.clone()).map(Arc::new))
            .collect::<Result<_>>()
    })?;

    let cells: Vec<(usize, Method)> = (0..cfg.seeds.len())
        .flat_map(|s| cfg.methods.iter().map(move |&m| (s, m)))
        .collect();

    let (tx, rx) = mpsc::channel::<(Method, RngSeed, RunTrace)>();
    let writer = out.map(|dir| {
        let dir = dir.to_path_buf();
        std::thread::spawn(move || -> Result<()> {
            for (method, seed, trace) in rx {
                write_trace(&dir, method, seed, &trace)?;
            }
            Ok(())
        })
    });

    let flush = writer.is_some();
    let results: Vec<Result<RunTrace>> = pool.install(|| {
        cells
            .par_iter()
            .map_with(tx, |tx, &(si, method)| {
                let seed = cfg.seeds[si];
                let trace = run_method(cfg, objectives[si].clone(), method, seed)?;
                if flush {
                    // The writer only hangs up after an IO error, reported below.
                    let _ = tx.send((method, seed, trace.clone()));
                }
                Ok(trace)
            })
            .collect()
    });
    if let Some(handle) = writer {
        handle.join().expect("trace writer panicked")?;
    }

    let mut traces = Vec::with_capacity(results.len());
    for r in results {
        traces.push(r?);
    }
    let methods = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(mi, &method)| {
            let runs: Vec<SeedRun> = cfg
                .seeds
                .iter()
                .enumerate()
                .map(|(si, &seed)| SeedRun { seed, trace: traces[si * cfg.methods.len() + mi].clone() })
                .collect();
            let band = aggregate(&runs.iter().map(|r| &r.trace).collect::<Vec<_>>());
            MethodSummary { method, runs, band }
        })
        .collect();
    Ok(ExperimentSummary { config: cfg.clone(), populations, methods })
}
