//! Exact L∞ star discrepancy for dimensions 1 to 3.
//!
//! The supremum over anchored boxes is attained (or approached) at corners
//! whose coordinates are point coordinates or 1. For every corner of that
//! critical grid we evaluate both the open-box deficit
//! `vol(x) − #{p < x}/m` and the closed-box excess `#{p ≤ x}/m − vol(x)`.
//! Counts come from a d-dimensional prefix sum over the grid, so the cost is
//! `O(m^d)` after sorting. In one dimension the classical closed form
//! `1/(2m) + max_i |x_(i) − (2i−1)/(2m)|` over the sorted coordinates is used
//! instead.

use crate::error::{Error, Result};
use crate::population::PointSet;

pub const MAX_EXACT_DIM: usize = 3;

/// Star discrepancy of the whole point set `points`.
pub fn star_discrepancy(points: &PointSet) -> Result<f64> {
    let d = points.dim();
    if d > MAX_EXACT_DIM {
        return Err(Error::UnsupportedDimension(d));
    }
    if d == 1 {
        return Ok(star_discrepancy_1d(points));
    }
    Ok(grid_star_discrepancy(points))
}

fn star_discrepancy_1d(points: &PointSet) -> f64 {
    let mut xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
    xs.sort_by(f64::total_cmp);
    let two_m = 2.0 * xs.len() as f64;
    let worst = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - (2 * i + 1) as f64 / two_m).abs())
        .fold(0.0, f64::max);
    (1.0 / two_m + worst).clamp(0.0, 1.0)
}

fn grid_star_discrepancy(points: &PointSet) -> f64 {
    let d = points.dim();
    let m = points.len();

    // Per-axis critical values: sorted distinct coordinates plus 1.0.
    let mut axes: Vec<Vec<f64>> = Vec::with_capacity(d);
    for j in 0..d {
        let mut vals: Vec<f64> = points.iter().map(|p| p[j]).collect();
        vals.push(1.0);
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        axes.push(vals);
    }

    // Histogram of points over grid cells, one slot of padding per axis so
    // that index 0 means "no value" and index k + 1 means axis value k.
    let sizes: Vec<usize> = axes.iter().map(|a| a.len() + 1).collect();
    let mut strides = vec![1usize; d];
    for j in (0..d.saturating_sub(1)).rev() {
        strides[j] = strides[j + 1] * sizes[j + 1];
    }
    let total: usize = sizes.iter().product();
    let mut counts = vec![0u32; total];
    for p in points.iter() {
        let mut flat = 0;
        for j in 0..d {
            let k = axes[j]
                .binary_search_by(|v| v.total_cmp(&p[j]))
                .expect("coordinate is on its own axis");
            flat += (k + 1) * strides[j];
        }
        counts[flat] += 1;
    }

    // Inclusive prefix sums along each axis: counts[idx] becomes the number
    // of points with every coordinate <= the corner at idx.
    for j in 0..d {
        let stride = strides[j];
        for flat in 0..total {
            if !(flat / stride).is_multiple_of(sizes[j]) {
                counts[flat] += counts[flat - stride];
            }
        }
    }

    let m = m as f64;
    let mut worst = 0.0f64;
    let mut idx = vec![1usize; d];
    'corners: loop {
        let mut vol = 1.0;
        let mut flat = 0;
        let mut open_flat = 0;
        for j in 0..d {
            vol *= axes[j][idx[j] - 1];
            flat += idx[j] * strides[j];
            open_flat += (idx[j] - 1) * strides[j];
        }
        let closed = counts[flat] as f64 / m;
        let open = counts[open_flat] as f64 / m;
        worst = worst.max(vol - open).max(closed - vol);

        for j in (0..d).rev() {
            idx[j] += 1;
            if idx[j] < sizes[j] {
                continue 'corners;
            }
            idx[j] = 1;
        }
        break;
    }
    worst.clamp(0.0, 1.0)
}
