//! Zero-mean Gaussian-process regression over subsets.
//!
//! Targets are log-transformed (optionally), standardized to zero mean and
//! unit sample variance, and modelled with a set kernel. The point-level
//! bandwidth `σ_X` and the outer length scale `θ_H` are picked by exhaustive
//! search of the log marginal likelihood over fixed grids; a diagonal jitter
//! ladder handles ill-conditioned Gram matrices.

use std::f64::consts::{PI, SQRT_2};
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::population::{PointSet, SubsetSelection};
use crate::setkernel::{gram, BaseKernelMatrix, DoubleSumCache, OuterKernel, SetKernelSpec};

/// Which outer set kernel the surrogate uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SetKernelKind {
    DeepEmbedding,
    DoubleSum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub sigma_x: Vec<f64>,
    pub theta_h: Vec<f64>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        HyperGrid {
            sigma_x: log_spaced(0.05, 2.0, 8),
            theta_h: log_spaced(0.01, 2.0, 8),
        }
    }
}

impl HyperGrid {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma_x", &self.sigma_x), ("theta_h", &self.theta_h)] {
            if v.is_empty() {
                return Err(Error::invalid(format!("grid {name} is empty")));
            }
            if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return Err(Error::invalid(format!("grid {name} has a non-positive value")));
            }
            if v.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid(format!("grid {name} is not strictly increasing")));
            }
        }
        Ok(())
    }
}

/// `n` values from `lo` to `hi` inclusive, equally spaced in log scale.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpConfig {
    /// Floor applied before the log transform.
    pub eps: f64,
    pub jitter_ladder: Vec<f64>,
    pub grid: HyperGrid,
    pub log_transform: bool,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            eps: 1e-12,
            jitter_ladder: vec![1e-6, 1e-5, 1e-4, 1e-3, 1e-2],
            grid: HyperGrid::default(),
            log_transform: true,
        }
    }
}

impl GpConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.jitter_ladder.is_empty() || self.jitter_ladder.iter().any(|j| !(*j > 0.0)) {
            return Err(Error::invalid("jitter ladder must be non-empty and positive"));
        }
        if !(self.eps > 0.0) {
            return Err(Error::invalid("eps must be positive"));
        }
        Ok(())
    }
}

const STD_FLOOR: f64 = 1e-12;

/// Evaluated subsets with their raw, transformed and standardized targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingData {
    subsets: Vec<SubsetSelection>,
    raw_values: Vec<f64>,
    transformed: Vec<f64>,
    standardized: Vec<f64>,
    mean: f64,
    scale: f64,
}

impl TrainingData {
    pub fn new(subsets: Vec<SubsetSelection>, raw_values: Vec<f64>, cfg: &GpConfig) -> Result<Self> {
        if subsets.len() != raw_values.len() {
            return Err(Error::invalid("subsets and values differ in length"));
        }
        if subsets.is_empty() {
            return Err(Error::invalid("training data is empty"));
        }
        let transformed: Vec<f64> = if cfg.log_transform {
            raw_values.iter().map(|&y| y.max(cfg.eps).ln()).collect()
        } else {
            raw_values.clone()
        };
        let t = transformed.len() as f64;
        let mean = transformed.iter().sum::<f64>() / t;
        let var = if transformed.len() > 1 {
            transformed.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (t - 1.0)
        } else {
            0.0
        };
        let sd = var.sqrt();
        let (standardized, scale) = if sd <= STD_FLOOR {
            (vec![0.0; transformed.len()], 1.0)
        } else {
            (transformed.iter().map(|y| (y - mean) / sd).collect(), sd)
        };
        Ok(TrainingData { subsets, raw_values, transformed, standardized, mean, scale })
    }

    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    pub fn subsets(&self) -> &[SubsetSelection] {
        &self.subsets
    }

    pub fn raw_values(&self) -> &[f64] {
        &self.raw_values
    }

    pub fn transformed(&self) -> &[f64] {
        &self.transformed
    }

    pub fn standardized(&self) -> &[f64] {
        &self.standardized
    }

    /// Maps a standardized value back to the transformed scale.
    pub fn unstandardize(&self, z: f64) -> f64 {
        self.mean + self.scale * z
    }

    /// Drops repeated subsets, keeping the first occurrence of each.
    pub fn deduplicated(&self, cfg: &GpConfig) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        let (subsets, values): (Vec<_>, Vec<_>) = self
            .subsets
            .iter()
            .zip(&self.raw_values)
            .filter(|(s, _)| seen.insert(*s))
            .map(|(s, &v)| (s.clone(), v))
            .unzip();
        TrainingData::new(subsets, values, cfg)
    }
}

/// Lower Cholesky factor of a row-major symmetric matrix, or `None` when a
/// pivot is not positive.
pub(crate) fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solves `L x = b` in place.
fn forward_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let s: f64 = row.iter().zip(&b[..i]).map(|(a, x)| a * x).sum();
        b[i] = (b[i] - s) / l[i * n + i];
    }
}

/// Solves `Lᵀ x = b` in place.
fn backward_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

struct Factored {
    chol: Vec<f64>,
    alpha: Vec<f64>,
    lml: f64,
}

fn factor(mut k: Vec<f64>, t: usize, z: &[f64], jitter: f64) -> Option<Factored> {
    for i in 0..t {
        k[i * t + i] += jitter;
    }
    let chol = cholesky(&k, t)?;
    let mut alpha = z.to_vec();
    forward_solve(&chol, t, &mut alpha);
    let quad: f64 = alpha.iter().map(|a| a * a).sum();
    backward_solve(&chol, t, &mut alpha);
    let log_det: f64 = (0..t).map(|i| chol[i * t + i].ln()).sum::<f64>() * 2.0;
    let lml = -0.5 * quad - 0.5 * log_det - 0.5 * t as f64 * (2.0 * PI).ln();
    lml.is_finite().then_some(Factored { chol, alpha, lml })
}

/// Log marginal likelihood of the standardized targets under `spec` with
/// diagonal jitter.
pub fn log_marginal_likelihood(
    pop: &PointSet,
    spec: &SetKernelSpec,
    data: &TrainingData,
    jitter: f64,
) -> Result<f64> {
    let t = data.len();
    if t < 2 {
        return Err(Error::invalid("log marginal likelihood needs at least two observations"));
    }
    let k = gram(pop, spec, data.subsets())?.entries().to_vec();
    factor(k, t, data.standardized(), jitter)
        .map(|f| f.lml)
        .ok_or(Error::NotPositiveDefinite { jitter })
}

/// Per-bandwidth double-sum tables that persist across refits while the
/// training set only grows.
#[derive(Debug)]
pub struct SurrogateWorkspace {
    population: Arc<PointSet>,
    caches: Vec<DoubleSumCache>,
}

impl SurrogateWorkspace {
    pub fn new(population: Arc<PointSet>, sigma_values: &[f64]) -> Self {
        let caches = sigma_values
            .iter()
            .map(|&s| DoubleSumCache::new(Arc::new(BaseKernelMatrix::new(population.clone(), s))))
            .collect();
        SurrogateWorkspace { population, caches }
    }

    pub fn population(&self) -> &Arc<PointSet> {
        &self.population
    }

    fn sync(&mut self, subsets: &[SubsetSelection]) {
        for cache in &mut self.caches {
            let is_prefix =
                cache.len() <= subsets.len() && cache.subsets() == &subsets[..cache.len()];
            if !is_prefix {
                *cache = DoubleSumCache::new(cache.base().clone());
            }
            for s in &subsets[cache.len()..] {
                cache.push(s.clone());
            }
        }
    }

    /// Grid search over `(σ_X, θ_H)` followed by the final factorization.
    /// The bandwidth grid must be the one the workspace was built with.
    pub fn fit(&mut self, data: &TrainingData, cfg: &GpConfig, kind: SetKernelKind) -> Result<FittedGP> {
        let t = data.len();
        if t < 2 {
            return Err(Error::invalid("fitting needs at least two observations"));
        }
        if cfg.grid.sigma_x.len() != self.caches.len()
            || cfg.grid.sigma_x.iter().zip(&self.caches).any(|(s, c)| *s != c.base().sigma_x())
        {
            return Err(Error::invalid("workspace was built for a different sigma_x grid"));
        }
        self.sync(data.subsets());

        // Constant targets carry no information about the hyperparameters:
        // take the first grid pair instead of ranking log-determinants.
        let degenerate = data.standardized().iter().all(|&z| z == 0.0);
        let thetas: Vec<Option<f64>> = match kind {
            SetKernelKind::DeepEmbedding => cfg.grid.theta_h.iter().copied().map(Some).collect(),
            SetKernelKind::DoubleSum => vec![None],
        };
        let mut best: Option<(usize, SetKernelSpec, f64, Factored)> = None;
        for (ci, cache) in self.caches.iter().enumerate() {
            let sigma_x = cache.base().sigma_x();
            for &theta in &thetas {
                let spec = match theta {
                    Some(theta_h) => SetKernelSpec::deep_embedding(sigma_x, theta_h)?,
                    None => SetKernelSpec::double_sum(sigma_x)?,
                };
                let k = cache.gram(&spec, t);
                let Some((jitter, f)) = cfg
                    .jitter_ladder
                    .iter()
                    .find_map(|&j| factor(k.clone(), t, data.standardized(), j).map(|f| (j, f)))
                else {
                    continue;
                };
                // Strict comparison keeps the earliest (smallest) grid pair on ties.
                if best.as_ref().is_none_or(|b| f.lml > b.3.lml) {
                    best = Some((ci, spec, jitter, f));
                }
                if degenerate {
                    break;
                }
            }
            if degenerate && best.is_some() {
                break;
            }
        }
        let (ci, spec, jitter_used, f) = best.ok_or(Error::AllJitterFailed)?;
        let cache = &self.caches[ci];
        Ok(FittedGP {
            spec,
            data: data.clone(),
            chol: f.chol,
            alpha: f.alpha,
            jitter_used,
            lml: f.lml,
            base: cache.base().clone(),
            train_self: cache.self_terms()[..t].to_vec(),
            rows: OnceLock::new(),
        })
    }
}

/// Fits a surrogate from scratch; see [`SurrogateWorkspace::fit`].
pub fn fit(
    population: Arc<PointSet>,
    subsets: Vec<SubsetSelection>,
    values: Vec<f64>,
    cfg: &GpConfig,
    kind: SetKernelKind,
) -> Result<FittedGP> {
    cfg.validate()?;
    let data = TrainingData::new(subsets, values, cfg)?;
    SurrogateWorkspace::new(population, &cfg.grid.sigma_x).fit(&data, cfg, kind)
}

/// A trained surrogate. Predictions are in standardized target units.
#[derive(Debug)]
pub struct FittedGP {
    spec: SetKernelSpec,
    data: TrainingData,
    chol: Vec<f64>,
    alpha: Vec<f64>,
    jitter_used: f64,
    lml: f64,
    base: Arc<BaseKernelMatrix>,
    train_self: Vec<f64>,
    /// `rows[p * t + j] = Σ_{y∈T_j} k_X(X_p, y)` for every population point.
    rows: OnceLock<Vec<f64>>,
}

/// Cached kernel sums between one query subset and the training subsets.
#[derive(Debug, Clone)]
pub struct QueryState {
    subset: SubsetSelection,
    self_sum: f64,
    cross: Vec<f64>,
}

impl QueryState {
    pub fn subset(&self) -> &SubsetSelection {
        &self.subset
    }
}

impl FittedGP {
    pub fn spec(&self) -> &SetKernelSpec {
        &self.spec
    }

    pub fn data(&self) -> &TrainingData {
        &self.data
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    pub fn lml(&self) -> f64 {
        self.lml
    }

    pub fn population_size(&self) -> usize {
        self.base.population().len()
    }

    /// Row-major lower Cholesky factor of `K + jitter·I`.
    pub fn cholesky_factor(&self) -> &[f64] {
        &self.chol
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Incumbent: smallest standardized target.
    pub fn f_min(&self) -> f64 {
        self.data.standardized().iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn rows(&self) -> &[f64] {
        self.rows.get_or_init(|| {
            let t = self.data.len();
            let n = self.population_size();
            let mut rows = vec![0.0; n * t];
            for p in 0..n {
                for (j, s) in self.data.subsets().iter().enumerate() {
                    rows[p * t + j] = self.base.row_sum(p, s.indices());
                }
            }
            rows
        })
    }

    pub fn query_state(&self, subset: &SubsetSelection) -> QueryState {
        let t = self.data.len();
        let rows = self.rows();
        let mut cross = vec![0.0; t];
        for &p in subset.indices() {
            for (c, r) in cross.iter_mut().zip(&rows[p * t..(p + 1) * t]) {
                *c += r;
            }
        }
        let idx = subset.indices();
        QueryState { subset: subset.clone(), self_sum: self.base.pair_sum(idx, idx), cross }
    }

    /// Query state after replacing member `out` with non-member `inn`.
    pub fn swap_state(&self, state: &QueryState, out: usize, inn: usize) -> Result<QueryState> {
        let subset = state.subset.swap(out, inn)?;
        let t = self.data.len();
        let rows = self.rows();
        let cross = state
            .cross
            .iter()
            .enumerate()
            .map(|(j, c)| c - rows[out * t + j] + rows[inn * t + j])
            .collect();
        let idx = state.subset.indices();
        let out_row = self.base.row_sum(out, idx);
        let in_row = self.base.row_sum(inn, idx) - self.base.get(inn, out);
        let self_sum = state.self_sum - 2.0 * out_row
            + self.base.get(out, out)
            + 2.0 * in_row
            + self.base.get(inn, inn);
        Ok(QueryState { subset, self_sum, cross })
    }

    /// Posterior mean and (clamped) variance from a query state.
    pub fn predict_state(&self, state: &QueryState) -> (f64, f64) {
        let t = self.data.len();
        let m = state.subset.len() as f64;
        let k0_qq = state.self_sum / (m * m);
        let mut kvec: Vec<f64> = state
            .cross
            .iter()
            .zip(self.data.subsets())
            .zip(&self.train_self)
            .map(|((c, s), &self_j)| {
                let k0 = c / (m * s.len() as f64);
                self.spec.from_double_sums(k0, k0_qq, self_j)
            })
            .collect();
        let mean: f64 = kvec.iter().zip(&self.alpha).map(|(k, a)| k * a).sum();
        forward_solve(&self.chol, t, &mut kvec);
        let explained: f64 = kvec.iter().map(|v| v * v).sum();
        let var = (self.spec.self_value(k0_qq) - explained).max(0.0);
        (mean, var)
    }

    pub fn predict(&self, query: &SubsetSelection) -> (f64, f64) {
        let t = self.data.len();
        let idx = query.indices();
        let cross = (0..t)
            .map(|j| self.base.pair_sum(idx, self.data.subsets()[j].indices()))
            .collect();
        let state = QueryState { subset: query.clone(), self_sum: self.base.pair_sum(idx, idx), cross };
        self.predict_state(&state)
    }

    pub fn expected_improvement(&self, query: &SubsetSelection, f_min: f64) -> f64 {
        let (mean, var) = self.predict(query);
        expected_improvement(mean, var, f_min)
    }

    pub fn expected_improvement_state(&self, state: &QueryState, f_min: f64) -> f64 {
        let (mean, var) = self.predict_state(state);
        expected_improvement(mean, var, f_min)
    }

    /// The outer kernel's length scale, when it has one.
    pub fn theta_h(&self) -> Option<f64> {
        match self.spec.outer {
            OuterKernel::DeepEmbedding { theta_h } => Some(theta_h),
            OuterKernel::DoubleSum => None,
        }
    }
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Closed-form `E[(f_min − G)₊]` for `G ~ N(mean, var)`.
pub fn expected_improvement(mean: f64, var: f64, f_min: f64) -> f64 {
    let sigma = var.max(0.0).sqrt();
    let gap = f_min - mean;
    if sigma <= 1e-12 {
        return gap.max(0.0);
    }
    let z = gap / sigma;
    (gap * std_normal_cdf(z) + sigma * std_normal_pdf(z)).max(0.0)
}
