//! Point-level kernels and their integrals against the uniform measure.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use statrs::function::erf::erf;

use super::quadrature::integrate_cube_split;
use crate::error::{Error, Result};

pub type KernelFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
pub type DoubleIntegralFn = Arc<dyn Fn(usize) -> f64 + Send + Sync>;
pub type PointIntegralFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A symmetric kernel on the unit cube.
#[derive(Clone)]
pub enum BaseKernelSpec {
    /// `∏_j (1 − 2|x_j − y_j|) / 4`, each factor divided by 4.
    SymmetricProduct,
    /// `exp(−‖x − y‖² / (2σ²))`.
    Rbf { sigma: f64 },
    Custom(CustomKernel),
}

/// User-supplied kernel with its own moment source.
#[derive(Clone)]
pub struct CustomKernel {
    pub name: String,
    pub func: KernelFn,
    pub moments: MomentSource,
}

#[derive(Clone)]
pub enum MomentSource {
    ClosedForm {
        double_integral: DoubleIntegralFn,
        point_integral: PointIntegralFn,
    },
    /// Nested adaptive quadrature with the given absolute tolerance.
    Quadrature { tolerance: f64 },
    Unavailable,
}

impl fmt::Debug for BaseKernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseKernelSpec::SymmetricProduct => f.write_str("SymmetricProduct"),
            BaseKernelSpec::Rbf { sigma } => write!(f, "Rbf {{ sigma: {sigma} }}"),
            BaseKernelSpec::Custom(c) => write!(f, "Custom({})", c.name),
        }
    }
}

impl BaseKernelSpec {
    pub fn rbf(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("RBF bandwidth must be positive"));
        }
        Ok(BaseKernelSpec::Rbf { sigma })
    }

    pub fn name(&self) -> String {
        match self {
            BaseKernelSpec::SymmetricProduct => "symmetric-product".into(),
            BaseKernelSpec::Rbf { sigma } => format!("rbf(sigma={sigma})"),
            BaseKernelSpec::Custom(c) => c.name.clone(),
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            BaseKernelSpec::SymmetricProduct => x
                .iter()
                .zip(y)
                .map(|(a, b)| (1.0 - 2.0 * (a - b).abs()) * 0.25)
                .product(),
            BaseKernelSpec::Rbf { sigma } => rbf(x, y, *sigma),
            BaseKernelSpec::Custom(c) => (c.func)(x, y),
        }
    }
}

#[inline]
pub(crate) fn rbf(x: &[f64], y: &[f64], sigma: f64) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-d2 / (2.0 * sigma * sigma)).exp()
}

/// `C = ∬ k` over the unit cube and `b(x) = ∫ k(x, y) dy`, resolved once
/// per (kernel, dimension).
#[derive(Clone)]
pub struct KernelMoments {
    kernel: BaseKernelSpec,
    dim: usize,
    double_integral: f64,
}

impl fmt::Debug for KernelMoments {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelMoments")
            .field("kernel", &self.kernel)
            .field("dim", &self.dim)
            .field("double_integral", &self.double_integral)
            .finish()
    }
}

impl KernelMoments {
    pub fn resolve(kernel: &BaseKernelSpec, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        let double_integral = match kernel {
            BaseKernelSpec::SymmetricProduct => (1.0f64 / 12.0).powi(dim as i32),
            BaseKernelSpec::Rbf { sigma } => rbf_double_integral_1d(*sigma).powi(dim as i32),
            BaseKernelSpec::Custom(c) => match &c.moments {
                MomentSource::ClosedForm { double_integral, .. } => double_integral(dim),
                MomentSource::Quadrature { tolerance } => {
                    let f = &c.func;
                    // Kernels are typically non-smooth where y = x.
                    integrate_cube_split(&|z: &[f64]| f(&z[..dim], &z[dim..]), 2 * dim, *tolerance, &|k, outer| {
                        (k >= dim).then(|| outer[k - dim])
                    })
                }
                MomentSource::Unavailable => return Err(Error::MomentsUnavailable(c.name.clone())),
            },
        };
        Ok(KernelMoments { kernel: kernel.clone(), dim, double_integral })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn double_integral(&self) -> f64 {
        self.double_integral
    }

    /// `∫_{[0,1]^d} k(x, y) dy`.
    pub fn point_integral(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        match &self.kernel {
            BaseKernelSpec::SymmetricProduct => x.iter().map(|&t| t * (1.0 - t) * 0.5).product(),
            BaseKernelSpec::Rbf { sigma } => {
                x.iter().map(|&t| rbf_point_integral_1d(t, *sigma)).product()
            }
            BaseKernelSpec::Custom(c) => match &c.moments {
                MomentSource::ClosedForm { point_integral, .. } => point_integral(x),
                MomentSource::Quadrature { tolerance } => {
                    let f = &c.func;
                    integrate_cube_split(&|y: &[f64]| f(x, y), self.dim, *tolerance, &|k, _| Some(x[k]))
                }
                MomentSource::Unavailable => unreachable!("resolve rejects unavailable moments"),
            },
        }
    }
}

fn rbf_point_integral_1d(x: f64, sigma: f64) -> f64 {
    let s = sigma * SQRT_2;
    sigma * (PI / 2.0).sqrt() * (erf((1.0 - x) / s) + erf(x / s))
}

fn rbf_double_integral_1d(sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    sigma * (2.0 * PI).sqrt() * erf(1.0 / (sigma * SQRT_2)) - 2.0 * s2 * (1.0 - (-0.5 / s2).exp())
}
