use super::{radical, DiscrepancyObjective, ObjectiveKind};
use crate::error::{Error, Result};
use crate::population::SubsetSelection;

/// Cached sums of a kernel objective for one subset, updated in `O(m)`
/// kernel evaluations per 1-swap.
#[derive(Debug, Clone)]
pub struct SwapEvalState {
    subset: SubsetSelection,
    /// `s_i = Σ_{j∈S} k(X_i, X_j)`, aligned with `subset.indices()`.
    row_sums: Vec<f64>,
    pair_total: f64,
    linear_total: f64,
}

impl SwapEvalState {
    pub fn new(obj: &DiscrepancyObjective, subset: SubsetSelection) -> Result<Self> {
        let q = quadratic(obj)?;
        obj.check_subset(&subset)?;
        let pop = obj.population();
        let idx = subset.indices();
        let row_sums: Vec<f64> = idx
            .iter()
            .map(|&i| idx.iter().map(|&j| q.kernel.eval(pop.point(i), pop.point(j))).sum())
            .collect();
        let pair_total = row_sums.iter().sum();
        let linear_total = idx.iter().map(|&i| q.linear[i]).sum();
        Ok(SwapEvalState { subset, row_sums, pair_total, linear_total })
    }

    pub fn subset(&self) -> &SubsetSelection {
        &self.subset
    }

    pub fn row_sums(&self) -> &[f64] {
        &self.row_sums
    }

    pub fn pair_total(&self) -> f64 {
        self.pair_total
    }

    pub fn linear_total(&self) -> f64 {
        self.linear_total
    }

    pub fn value(&self, obj: &DiscrepancyObjective) -> Result<f64> {
        let q = quadratic(obj)?;
        let m = self.subset.len() as f64;
        Ok(radical(q.constant - 2.0 * self.linear_total / m + self.pair_total / (m * m)))
    }
}

fn quadratic(obj: &DiscrepancyObjective) -> Result<&super::Quadratic> {
    match obj.kind() {
        ObjectiveKind::L2Kernel | ObjectiveKind::MmdVsReference => {
            Ok(obj.quadratic.as_ref().expect("kernel objective"))
        }
        ObjectiveKind::StarInfinity => Err(Error::invalid(
            "swap updates need a kernel objective, not the star discrepancy",
        )),
    }
}

/// Value of the subset with `out` replaced by `inn`, and the updated cache.
pub fn swap_delta_evaluate(
    obj: &DiscrepancyObjective,
    state: &SwapEvalState,
    out: usize,
    inn: usize,
) -> Result<(f64, SwapEvalState)> {
    let q = quadratic(obj)?;
    if inn >= obj.population().len() {
        return Err(Error::InvalidSwap(format!("index {inn} out of range")));
    }
    let subset = state.subset.swap(out, inn)?;
    let pop = obj.population();
    let (x_out, x_in) = (pop.point(out), pop.point(inn));

    let mut row_sums = Vec::with_capacity(state.row_sums.len());
    let mut cross_in = 0.0; // Σ over kept members of k(X_in, X_i)
    let mut out_row = 0.0;
    for (&i, &s) in state.subset.indices().iter().zip(&state.row_sums) {
        if i == out {
            out_row = s;
            continue;
        }
        let xi = pop.point(i);
        let k_in = q.kernel.eval(xi, x_in);
        cross_in += k_in;
        row_sums.push((i, s - q.kernel.eval(xi, x_out) + k_in));
    }
    let k_in_in = q.kernel.eval(x_in, x_in);
    let k_out_out = q.kernel.eval(x_out, x_out);
    let pos = row_sums.partition_point(|&(i, _)| i < inn);
    row_sums.insert(pos, (inn, cross_in + k_in_in));

    let pair_total = state.pair_total - 2.0 * out_row + k_out_out + 2.0 * cross_in + k_in_in;
    let linear_total = state.linear_total - q.linear[out] + q.linear[inn];
    let next = SwapEvalState {
        subset,
        row_sums: row_sums.into_iter().map(|(_, s)| s).collect(),
        pair_total,
        linear_total,
    };
    Ok((next.value(obj)?, next))
}
