//! Discrepancy objectives over subsets of a fixed population.
//!
//! Both kernel objectives share one shape. For a subset `S` of size `m`,
//!
//! ```text
//! D(S)² = c − (2/m) Σ_{i∈S} b_i + (1/m²) Σ_{i,j∈S} k(X_i, X_j)
//! ```
//!
//! For the L2 discrepancy against the uniform measure, `c = ∬ k` and
//! `b_i = ∫ k(X_i, y) dy`. For the MMD against a finite reference `{R_l}`
//! of size `n`, `c = (1/n²) Σ k(R_l, R_l')` and `b_i = (1/n) Σ_l k(R_l, X_i)`.
//! Both `c` and every `b_i` are computed once when the objective is built.

pub mod kernel;
pub mod quadrature;
pub mod star;
mod swap;

use std::sync::Arc;

pub use kernel::{BaseKernelSpec, CustomKernel, KernelMoments, MomentSource};
pub use swap::{swap_delta_evaluate, SwapEvalState};

use crate::error::{Error, Result};
use crate::population::{PointSet, SubsetSelection};

/// Default cap on the number of candidates enumerated by
/// [`brute_force_best_subset`].
pub const BRUTE_FORCE_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    StarInfinity,
    L2Kernel,
    MmdVsReference,
}

#[derive(Debug, Clone)]
pub struct DiscrepancyObjective {
    population: Arc<PointSet>,
    kind: ObjectiveKind,
    quadratic: Option<Quadratic>,
}

#[derive(Debug, Clone)]
struct Quadratic {
    kernel: BaseKernelSpec,
    constant: f64,
    linear: Vec<f64>,
    moments: Option<KernelMoments>,
    reference: Option<Arc<PointSet>>,
}

impl DiscrepancyObjective {
    pub fn star(population: Arc<PointSet>) -> Result<Self> {
        if population.dim() > star::MAX_EXACT_DIM {
            return Err(Error::UnsupportedDimension(population.dim()));
        }
        Ok(DiscrepancyObjective { population, kind: ObjectiveKind::StarInfinity, quadratic: None })
    }

    /// L2 discrepancy of the selected points against the uniform measure.
    pub fn l2(population: Arc<PointSet>, kernel: BaseKernelSpec) -> Result<Self> {
        let moments = KernelMoments::resolve(&kernel, population.dim())?;
        let linear = population.iter().map(|x| moments.point_integral(x)).collect();
        Ok(DiscrepancyObjective {
            kind: ObjectiveKind::L2Kernel,
            quadratic: Some(Quadratic {
                kernel,
                constant: moments.double_integral(),
                linear,
                moments: Some(moments),
                reference: None,
            }),
            population,
        })
    }

    /// Discrete MMD between the selected points and `reference`, which
    /// defaults to the whole population.
    pub fn mmd(
        population: Arc<PointSet>,
        kernel: BaseKernelSpec,
        reference: Option<Arc<PointSet>>,
    ) -> Result<Self> {
        let reference = reference.unwrap_or_else(|| population.clone());
        if reference.dim() != population.dim() {
            return Err(Error::DimensionMismatch {
                population: population.dim(),
                reference: reference.dim(),
            });
        }
        let n = reference.len() as f64;
        let mut self_total = 0.0;
        for i in 0..reference.len() {
            let xi = reference.point(i);
            self_total += kernel.eval(xi, xi);
            for j in 0..i {
                self_total += 2.0 * kernel.eval(xi, reference.point(j));
            }
        }
        let linear = population
            .iter()
            .map(|y| reference.iter().map(|x| kernel.eval(x, y)).sum::<f64>() / n)
            .collect();
        Ok(DiscrepancyObjective {
            kind: ObjectiveKind::MmdVsReference,
            quadratic: Some(Quadratic {
                kernel,
                constant: self_total / (n * n),
                linear,
                moments: None,
                reference: Some(reference),
            }),
            population,
        })
    }

    pub fn kind(&self) -> ObjectiveKind {
        self.kind
    }

    pub fn population(&self) -> &Arc<PointSet> {
        &self.population
    }

    pub fn kernel(&self) -> Option<&BaseKernelSpec> {
        self.quadratic.as_ref().map(|q| &q.kernel)
    }

    pub fn moments(&self) -> Option<&KernelMoments> {
        self.quadratic.as_ref().and_then(|q| q.moments.as_ref())
    }

    pub fn reference(&self) -> Option<&Arc<PointSet>> {
        self.quadratic.as_ref().and_then(|q| q.reference.as_ref())
    }

    /// The cached constant term `c`.
    pub fn constant_term(&self) -> Option<f64> {
        self.quadratic.as_ref().map(|q| q.constant)
    }

    /// The cached linear coefficient `b_i` of population point `i`.
    pub fn linear_term(&self, i: usize) -> Option<f64> {
        self.quadratic.as_ref().map(|q| q.linear[i])
    }

    pub(crate) fn check_subset(&self, sel: &SubsetSelection) -> Result<()> {
        match sel.indices().last() {
            Some(&last) if last < self.population.len() => Ok(()),
            Some(&last) => Err(Error::invalid(format!(
                "index {last} out of range for population of size {}",
                self.population.len()
            ))),
            None => Err(Error::invalid("empty subset")),
        }
    }

    /// Objective value of `sel`. Pure: repeated calls return the same value.
    pub fn evaluate(&self, sel: &SubsetSelection) -> Result<f64> {
        match self.kind {
            ObjectiveKind::StarInfinity => star_discrepancy_exact(&self.population, sel),
            ObjectiveKind::L2Kernel => l2_kernel_discrepancy(self, sel),
            ObjectiveKind::MmdVsReference => mmd_discrete(self, sel),
        }
    }

    fn kernel_value(&self, sel: &SubsetSelection) -> Result<f64> {
        self.check_subset(sel)?;
        let q = self.quadratic.as_ref().expect("kernel objective");
        let pop = &*self.population;
        let idx = sel.indices();
        let m = idx.len() as f64;
        let mut pair = 0.0;
        let mut linear = 0.0;
        for (a, &i) in idx.iter().enumerate() {
            let xi = pop.point(i);
            linear += q.linear[i];
            pair += q.kernel.eval(xi, xi);
            for &j in &idx[..a] {
                pair += 2.0 * q.kernel.eval(xi, pop.point(j));
            }
        }
        Ok(radical(q.constant - 2.0 * linear / m + pair / (m * m)))
    }
}

/// Square root with rounding-level negatives clamped to zero.
#[inline]
pub(crate) fn radical(squared: f64) -> f64 {
    squared.max(0.0).sqrt()
}

pub fn star_discrepancy_exact(pop: &PointSet, sel: &SubsetSelection) -> Result<f64> {
    if pop.dim() > star::MAX_EXACT_DIM {
        return Err(Error::UnsupportedDimension(pop.dim()));
    }
    if sel.indices().last().is_some_and(|&i| i >= pop.len()) {
        return Err(Error::invalid("subset index out of range"));
    }
    star::star_discrepancy(&pop.select(sel))
}

pub fn l2_kernel_discrepancy(obj: &DiscrepancyObjective, sel: &SubsetSelection) -> Result<f64> {
    if obj.kind != ObjectiveKind::L2Kernel {
        return Err(Error::invalid("objective is not an L2 kernel discrepancy"));
    }
    obj.kernel_value(sel)
}

pub fn mmd_discrete(obj: &DiscrepancyObjective, sel: &SubsetSelection) -> Result<f64> {
    if obj.kind != ObjectiveKind::MmdVsReference {
        return Err(Error::invalid("objective is not an MMD objective"));
    }
    obj.kernel_value(sel)
}

pub fn evaluate(obj: &DiscrepancyObjective, sel: &SubsetSelection) -> Result<f64> {
    obj.evaluate(sel)
}

/// Number of `m`-subsets of an `n`-set, saturating.
pub fn binomial(n: usize, m: usize) -> u128 {
    if m > n {
        return 0;
    }
    let m = m.min(n - m);
    let mut acc: u128 = 1;
    for i in 0..m {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Exhaustive minimizer over all `m`-subsets, in lexicographic order.
/// Ties keep the lexicographically smallest subset.
pub fn brute_force_best_subset(
    obj: &DiscrepancyObjective,
    m: usize,
) -> Result<(SubsetSelection, f64)> {
    brute_force_best_subset_capped(obj, m, BRUTE_FORCE_CAP)
}

pub fn brute_force_best_subset_capped(
    obj: &DiscrepancyObjective,
    m: usize,
    cap: u64,
) -> Result<(SubsetSelection, f64)> {
    let n = obj.population.len();
    if m == 0 || m > n {
        return Err(Error::invalid(format!("subset size {m} must lie in 1..={n}")));
    }
    let candidates = binomial(n, m);
    if candidates > u128::from(cap) {
        return Err(Error::InstanceTooLarge { candidates, cap });
    }
    let mut comb: Vec<usize> = (0..m).collect();
    let mut best: Option<(SubsetSelection, f64)> = None;
    loop {
        let sel = SubsetSelection::from_sorted_unchecked(comb.clone());
        let v = obj.evaluate(&sel)?;
        if best.as_ref().is_none_or(|(_, b)| v < *b) {
            best = Some((sel, v));
        }
        // Advance to the next combination in lexicographic order.
        let Some(pos) = (0..m).rev().find(|&i| comb[i] < n - m + i) else {
            break;
        };
        comb[pos] += 1;
        for i in pos + 1..m {
            comb[i] = comb[i - 1] + 1;
        }
    }
    Ok(best.expect("at least one candidate"))
}
