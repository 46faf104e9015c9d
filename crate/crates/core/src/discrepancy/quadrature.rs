//! Adaptive Gauss–Kronrod quadrature over the unit cube.

// 15-point Kronrod abscissae on [-1, 1] (non-negative half) and weights;
// the odd entries are the 7-point Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_DEPTH: u32 = 48;

fn kronrod15(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, (kronrod - gauss).abs() * half)
}

fn adapt(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (value, err) = kronrod15(f, a, b);
    if err <= tol || depth >= MAX_DEPTH {
        return value;
    }
    let mid = 0.5 * (a + b);
    adapt(f, a, mid, 0.5 * tol, depth + 1) + adapt(f, mid, b, 0.5 * tol, depth + 1)
}

/// Integral of `f` over `[a, b]` to roughly absolute tolerance `tol`.
pub fn integrate(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    adapt(f, a, b, tol, 0)
}

/// Integral of `f` over `[0,1]^dim` by nested one-dimensional adaptive
/// rules. The error is roughly `dim * tol`.
pub fn integrate_cube(f: &dyn Fn(&[f64]) -> f64, dim: usize, tol: f64) -> f64 {
    integrate_cube_split(f, dim, tol, &|_, _| None)
}

/// Like [`integrate_cube`], but the integral along axis `k` is split at
/// `split(k, outer)` when that lies inside `(0, 1)`, where `outer` holds the
/// coordinates already fixed on axes `0..k`.
///
/// Error estimates cannot see a kink that falls between the nodes near an
/// interval end, so known kinks should be passed as split points.
pub fn integrate_cube_split(
    f: &dyn Fn(&[f64]) -> f64,
    dim: usize,
    tol: f64,
    split: &dyn Fn(usize, &[f64]) -> Option<f64>,
) -> f64 {
    let mut prefix = Vec::with_capacity(dim);
    nested(f, split, &mut prefix, dim, tol)
}

fn nested(
    f: &dyn Fn(&[f64]) -> f64,
    split: &dyn Fn(usize, &[f64]) -> Option<f64>,
    prefix: &mut Vec<f64>,
    dim: usize,
    tol: f64,
) -> f64 {
    if prefix.len() == dim {
        return f(prefix);
    }
    let cut = split(prefix.len(), prefix).filter(|&c| c > 0.0 && c < 1.0);
    let mut inner = |x: f64| {
        prefix.push(x);
        let v = nested(f, split, prefix, dim, tol);
        prefix.pop();
        v
    };
    match cut {
        Some(c) => integrate(&mut inner, 0.0, c, 0.5 * tol) + integrate(&mut inner, c, 1.0, 0.5 * tol),
        None => integrate(&mut inner, 0.0, 1.0, tol),
    }
}
