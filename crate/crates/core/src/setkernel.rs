//! Kernels between subsets of a population.
//!
//! Every subset is represented by its empirical kernel mean embedding under
//! a point-level RBF kernel `k_X` with bandwidth `σ_X`. The double-sum kernel
//! `k₀(A, B)` is the inner product of two embeddings; the deep-embedding
//! kernel applies a Gaussian in the embedding distance,
//! `exp(−d_E(A, B)² / (2θ_H²))`.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::discrepancy::kernel::rbf;
use crate::error::{Error, Result};
use crate::population::{PointSet, SubsetSelection};

/// Populations up to this size get a dense base-kernel matrix.
const DENSE_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OuterKernel {
    DeepEmbedding { theta_h: f64 },
    DoubleSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetKernelSpec {
    pub sigma_x: f64,
    pub outer: OuterKernel,
}

impl SetKernelSpec {
    pub fn deep_embedding(sigma_x: f64, theta_h: f64) -> Result<Self> {
        if !(theta_h > 0.0 && theta_h.is_finite()) {
            return Err(Error::invalid("theta_h must be positive"));
        }
        Self::checked(sigma_x, OuterKernel::DeepEmbedding { theta_h })
    }

    pub fn double_sum(sigma_x: f64) -> Result<Self> {
        Self::checked(sigma_x, OuterKernel::DoubleSum)
    }

    fn checked(sigma_x: f64, outer: OuterKernel) -> Result<Self> {
        if !(sigma_x > 0.0 && sigma_x.is_finite()) {
            return Err(Error::invalid("sigma_x must be positive"));
        }
        Ok(SetKernelSpec { sigma_x, outer })
    }

    /// Set-kernel value from the double-sum terms `k₀(A,B)`, `k₀(A,A)`,
    /// `k₀(B,B)`.
    #[inline]
    pub fn from_double_sums(&self, cross: f64, self_a: f64, self_b: f64) -> f64 {
        match self.outer {
            OuterKernel::DoubleSum => cross,
            OuterKernel::DeepEmbedding { theta_h } => {
                let d2 = (self_a + self_b - 2.0 * cross).max(0.0);
                (-d2 / (2.0 * theta_h * theta_h)).exp()
            }
        }
    }

    /// Prior variance `k(A, A)` given `k₀(A, A)`.
    #[inline]
    pub fn self_value(&self, self_sum: f64) -> f64 {
        match self.outer {
            OuterKernel::DoubleSum => self_sum,
            OuterKernel::DeepEmbedding { .. } => 1.0,
        }
    }
}

/// `k₀(A, B) = (1/(|A||B|)) Σ_{x∈A} Σ_{x'∈B} k_X(x, x')`.
pub fn double_sum(pop: &PointSet, spec: &SetKernelSpec, a: &SubsetSelection, b: &SubsetSelection) -> f64 {
    let mut total = 0.0;
    for &i in a.indices() {
        let xi = pop.point(i);
        for &j in b.indices() {
            total += rbf(xi, pop.point(j), spec.sigma_x);
        }
    }
    total / (a.len() * b.len()) as f64
}

/// RKHS distance between the mean embeddings of `a` and `b`.
pub fn embedding_distance(
    pop: &PointSet,
    spec: &SetKernelSpec,
    a: &SubsetSelection,
    b: &SubsetSelection,
) -> f64 {
    let aa = double_sum(pop, spec, a, a);
    let bb = double_sum(pop, spec, b, b);
    let ab = double_sum(pop, spec, a, b);
    (aa + bb - 2.0 * ab).max(0.0).sqrt()
}

pub fn de_kernel(
    pop: &PointSet,
    spec: &SetKernelSpec,
    a: &SubsetSelection,
    b: &SubsetSelection,
) -> Result<f64> {
    let OuterKernel::DeepEmbedding { theta_h } = spec.outer else {
        return Err(Error::invalid("deep-embedding kernel requested from a double-sum spec"));
    };
    let d = embedding_distance(pop, spec, a, b);
    Ok((-d * d / (2.0 * theta_h * theta_h)).exp())
}

/// Set-kernel value under either outer kernel.
pub fn set_kernel(pop: &PointSet, spec: &SetKernelSpec, a: &SubsetSelection, b: &SubsetSelection) -> f64 {
    match spec.outer {
        OuterKernel::DoubleSum => double_sum(pop, spec, a, b),
        OuterKernel::DeepEmbedding { .. } => de_kernel(pop, spec, a, b).expect("deep-embedding spec"),
    }
}

/// Symmetric `t×t` matrix of set-kernel values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    size: usize,
    entries: Vec<f64>,
    subsets: Vec<SubsetSelection>,
}

impl GramMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn subsets(&self) -> &[SubsetSelection] {
        &self.subsets
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.size {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Pairwise set-kernel matrix. Self terms `k₀(A, A)` are computed once per
/// distinct subset.
pub fn gram(pop: &PointSet, spec: &SetKernelSpec, subsets: &[SubsetSelection]) -> Result<GramMatrix> {
    if subsets.is_empty() {
        return Err(Error::invalid("Gram matrix needs at least one subset"));
    }
    let mut self_cache: HashMap<&SubsetSelection, f64> = HashMap::new();
    let self_terms: Vec<f64> = subsets
        .iter()
        .map(|s| *self_cache.entry(s).or_insert_with(|| double_sum(pop, spec, s, s)))
        .collect();
    let t = subsets.len();
    let mut entries = vec![0.0; t * t];
    for i in 0..t {
        entries[i * t + i] = spec.self_value(self_terms[i]);
        for j in 0..i {
            let cross = double_sum(pop, spec, &subsets[i], &subsets[j]);
            let v = spec.from_double_sums(cross, self_terms[i], self_terms[j]);
            entries[i * t + j] = v;
            entries[j * t + i] = v;
        }
    }
    Ok(GramMatrix { size: t, entries, subsets: subsets.to_vec() })
}

/// Point-level RBF values over a whole population at one bandwidth.
#[derive(Debug)]
pub struct BaseKernelMatrix {
    population: Arc<PointSet>,
    sigma_x: f64,
    dense: Option<Vec<f64>>,
}

impl BaseKernelMatrix {
    pub fn new(population: Arc<PointSet>, sigma_x: f64) -> Self {
        let n = population.len();
        let dense = (n <= DENSE_LIMIT).then(|| {
            let mut v = vec![0.0; n * n];
            for i in 0..n {
                v[i * n + i] = 1.0;
                for j in 0..i {
                    let k = rbf(population.point(i), population.point(j), sigma_x);
                    v[i * n + j] = k;
                    v[j * n + i] = k;
                }
            }
            v
        });
        BaseKernelMatrix { population, sigma_x, dense }
    }

    pub fn sigma_x(&self) -> f64 {
        self.sigma_x
    }

    pub fn population(&self) -> &Arc<PointSet> {
        &self.population
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.dense {
            Some(v) => v[i * self.population.len() + j],
            None => rbf(self.population.point(i), self.population.point(j), self.sigma_x),
        }
    }

    /// `Σ_{q∈members} k_X(X_p, X_q)`.
    #[inline]
    pub fn row_sum(&self, p: usize, members: &[usize]) -> f64 {
        match &self.dense {
            Some(v) => {
                let row = &v[p * self.population.len()..(p + 1) * self.population.len()];
                members.iter().map(|&q| row[q]).sum()
            }
            None => members.iter().map(|&q| self.get(p, q)).sum(),
        }
    }

    /// Unnormalized double sum `Σ_{p∈a} Σ_{q∈b} k_X(X_p, X_q)`.
    pub fn pair_sum(&self, a: &[usize], b: &[usize]) -> f64 {
        a.iter().map(|&p| self.row_sum(p, b)).sum()
    }

    pub fn double_sum(&self, a: &SubsetSelection, b: &SubsetSelection) -> f64 {
        self.pair_sum(a.indices(), b.indices()) / (a.len() * b.len()) as f64
    }
}

/// Growing table of double-sum values `k₀` between a list of subsets, at one
/// point-level bandwidth. Adding a subset costs one row of cross sums.
#[derive(Debug, Clone)]
pub struct DoubleSumCache {
    base: Arc<BaseKernelMatrix>,
    subsets: Vec<SubsetSelection>,
    self_terms: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

impl DoubleSumCache {
    pub fn new(base: Arc<BaseKernelMatrix>) -> Self {
        DoubleSumCache { base, subsets: Vec::new(), self_terms: Vec::new(), rows: Vec::new() }
    }

    pub fn base(&self) -> &Arc<BaseKernelMatrix> {
        &self.base
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

    pub fn push(&mut self, subset: SubsetSelection) {
        let row = self.subsets.iter().map(|s| self.base.double_sum(&subset, s)).collect();
        self.self_terms.push(self.base.double_sum(&subset, &subset));
        self.rows.push(row);
        self.subsets.push(subset);
    }

    pub fn self_term(&self, i: usize) -> f64 {
        self.self_terms[i]
    }

    pub fn self_terms(&self) -> &[f64] {
        &self.self_terms
    }

    pub fn k0(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => self.self_terms[i],
            std::cmp::Ordering::Greater => self.rows[i][j],
            std::cmp::Ordering::Less => self.rows[j][i],
        }
    }

    /// Row-major set-kernel matrix over the first `t` cached subsets.
    pub fn gram(&self, spec: &SetKernelSpec, t: usize) -> Vec<f64> {
        let mut k = vec![0.0; t * t];
        for i in 0..t {
            k[i * t + i] = spec.self_value(self.self_terms[i]);
            for j in 0..i {
                let v = spec.from_double_sums(self.rows[i][j], self.self_terms[i], self.self_terms[j]);
                k[i * t + j] = v;
                k[j * t + i] = v;
            }
        }
        k
    }
}
