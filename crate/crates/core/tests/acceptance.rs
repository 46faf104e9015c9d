//! Acceptance suite. Each test prints one `criterion N ...: PASS|FAIL` line
//! and then asserts the same condition.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use ldsubset::discrepancy::quadrature::{integrate_cube, integrate_cube_split};
use ldsubset::discrepancy::{
    brute_force_best_subset, l2_kernel_discrepancy, mmd_discrete, star_discrepancy_exact, swap_delta_evaluate,
};
use ldsubset::harness::{run_experiment, run_experiment_to, ExperimentConfig, ExperimentSummary, Method};
use ldsubset::population::{default_mixture, generate_gaussian_mixture, generate_uniform, random_subset, random_swap};
use ldsubset::setkernel::gram;
use ldsubset::surrogate::{expected_improvement, fit, SetKernelKind};
use ldsubset::{
    BaseKernelSpec, DiscrepancyObjective, GpConfig, KernelMoments, OuterKernel, PointSet, RngSeed, SetKernelSpec,
    SubsetSelection, SwapEvalState,
};

fn report(n: u32, name: &str, pass: bool, detail: String) {
    println!("criterion {n} {name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} {name} failed: {detail}");
}

// ---------------------------------------------------------------------------
// Oracles

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Tensor Gauss–Legendre over [0,1]^d with panels split at `breaks` on each
/// axis; exact for integrands polynomial of low degree on every panel.
fn panel_quadrature(f: &dyn Fn(&[f64]) -> f64, breaks: &[Vec<f64>]) -> f64 {
    let gl = gauss_legendre(8);
    let axes: Vec<Vec<(f64, f64)>> = breaks
        .iter()
        .map(|b| {
            let mut edges = vec![0.0];
            edges.extend(b.iter().copied().filter(|&v| v > 0.0 && v < 1.0));
            edges.push(1.0);
            edges.sort_by(f64::total_cmp);
            let mut nodes = Vec::new();
            for w in edges.windows(2) {
                let (a, c) = (w[0], w[1]);
                for &(x, wt) in &gl {
                    nodes.push((0.5 * (a + c) + 0.5 * (c - a) * x, 0.5 * (c - a) * wt));
                }
            }
            nodes
        })
        .collect();
    let d = axes.len();
    let mut idx = vec![0usize; d];
    let mut point = vec![0.0; d];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for j in 0..d {
            point[j] = axes[j][idx[j]].0;
            w *= axes[j][idx[j]].1;
        }
        total += w * f(&point);
        let mut j = d;
        loop {
            if j == 0 {
                return total;
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < axes[j].len() {
                break;
            }
            idx[j] = 0;
        }
    }
}

fn sym_kernel(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (1.0 - 2.0 * (a - b).abs()) / 4.0).product()
}

fn rbf(x: &[f64], y: &[f64], sigma: f64) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-d2 / (2.0 * sigma * sigma)).exp()
}

/// Neumaier-compensated sum.
fn ksum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = s + v;
        c += if s.abs() >= v.abs() { (s - t) + v } else { (v - t) + s };
        s = t;
    }
    s + c
}

/// Star discrepancy by scanning every corner of the critical grid and
/// counting points directly for both the open and the closed box.
fn star_brute_force(points: &[Vec<f64>]) -> f64 {
    let d = points[0].len();
    let m = points.len() as f64;
    let axes: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let mut v: Vec<f64> = points.iter().map(|p| p[j]).collect();
            v.push(1.0);
            v
        })
        .collect();
    let mut worst = 0.0f64;
    let mut idx = vec![0usize; d];
    loop {
        let corner: Vec<f64> = (0..d).map(|j| axes[j][idx[j]]).collect();
        let vol: f64 = corner.iter().product();
        let open = points.iter().filter(|p| p.iter().zip(&corner).all(|(a, c)| a < c)).count() as f64;
        let closed = points.iter().filter(|p| p.iter().zip(&corner).all(|(a, c)| a <= c)).count() as f64;
        worst = worst.max(vol - open / m).max(closed / m - vol);
        let mut j = d;
        loop {
            if j == 0 {
                return worst;
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < axes[j].len() {
                break;
            }
            idx[j] = 0;
        }
    }
}

fn rows(pop: &PointSet, sel: &SubsetSelection) -> Vec<Vec<f64>> {
    sel.indices().iter().map(|&i| pop.point(i).to_vec()).collect()
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_1_kernel_moments() {
    let start = Instant::now();
    let kernel = BaseKernelSpec::SymmetricProduct;
    let mut worst: f64 = 0.0;
    for d in [1usize, 2] {
        let moments = KernelMoments::resolve(&kernel, d).unwrap();
        let pts = generate_uniform(100, d, RngSeed(1000 + d as u64)).unwrap();
        for x in pts.iter() {
            let closed: f64 = x.iter().map(|v| v * (1.0 - v) / 2.0).product();
            let f = |y: &[f64]| sym_kernel(x, y);
            // Adaptive rule split at the kinks y_j = x_j.
            let adaptive = integrate_cube_split(&f, d, 1e-11, &|k, _| Some(x[k]));
            let breaks: Vec<Vec<f64>> = x.iter().map(|&v| vec![v]).collect();
            let panels = panel_quadrature(&f, &breaks);
            worst = worst
                .max((moments.point_integral(x) - closed).abs())
                .max((adaptive - closed).abs())
                .max((panels - closed).abs());
        }
        let constant = 12f64.powi(-(d as i32));
        let adaptive = if d == 1 {
            let f = |xy: &[f64]| sym_kernel(&xy[..1], &xy[1..]);
            integrate_cube_split(&f, 2, 1e-12, &|k, outer| (k == 1).then(|| outer[0]))
        } else {
            // Outer adaptive integral of an inner exact panel rule.
            integrate_cube(
                &|x: &[f64]| {
                    let breaks: Vec<Vec<f64>> = x.iter().map(|&v| vec![v]).collect();
                    panel_quadrature(&|y: &[f64]| sym_kernel(x, y), &breaks)
                },
                d,
                1e-11,
            )
        };
        worst = worst.max((moments.double_integral() - constant).abs()).max((adaptive - constant).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        "kernel-moment oracle",
        worst <= 1e-8 && secs < 10.0,
        format!("max abs error {worst:.3e}, {secs:.2}s"),
    );
}

#[test]
fn criterion_2_discrepancy_oracles() {
    let start = Instant::now();

    // (a) exact star discrepancy against a dense grid scan
    let pop = Arc::new(generate_uniform(400, 2, RngSeed(2001)).unwrap());
    let mut rng = RngSeed(2002).stream("star");
    let mut star_mismatch = 0;
    for _ in 0..50 {
        let sel = random_subset(400, 25, &mut rng).unwrap();
        if star_discrepancy_exact(&pop, &sel).unwrap() != star_brute_force(&rows(&pop, &sel)) {
            star_mismatch += 1;
        }
    }

    // (b) kernel objectives against naive triple sums
    let l2 = DiscrepancyObjective::l2(pop.clone(), BaseKernelSpec::SymmetricProduct).unwrap();
    let mut l2_rel: f64 = 0.0;
    for _ in 0..50 {
        let sel = random_subset(400, 25, &mut rng).unwrap();
        let x = rows(&pop, &sel);
        let m = x.len() as f64;
        let c = 1.0 / 144.0;
        let lin = ksum(x.iter().map(|p| p.iter().map(|v| v * (1.0 - v) / 2.0).product::<f64>()));
        let pair = ksum(x.iter().flat_map(|p| x.iter().map(move |q| sym_kernel(p, q))));
        let oracle = (c - 2.0 * lin / m + pair / (m * m)).max(0.0).sqrt();
        let got = l2_kernel_discrepancy(&l2, &sel).unwrap();
        l2_rel = l2_rel.max((got - oracle).abs() / oracle);
    }

    let sigma = 0.1;
    let mix = Arc::new(generate_gaussian_mixture(1000, 2, &default_mixture(), RngSeed(2003)).unwrap());
    let mmd = DiscrepancyObjective::mmd(mix.clone(), BaseKernelSpec::rbf(sigma).unwrap(), None).unwrap();
    let reference: Vec<&[f64]> = mix.iter().collect();
    let n = reference.len() as f64;
    let ref_self = ksum(reference.iter().flat_map(|a| reference.iter().map(move |b| rbf(a, b, sigma)))) / (n * n);
    let mut mmd_rel: f64 = 0.0;
    for _ in 0..5 {
        let sel = random_subset(1000, 25, &mut rng).unwrap();
        let y = rows(&mix, &sel);
        let m = y.len() as f64;
        let self_y = ksum(y.iter().flat_map(|a| y.iter().map(move |b| rbf(a, b, sigma)))) / (m * m);
        let cross = ksum(reference.iter().flat_map(|a| y.iter().map(move |b| rbf(a, b, sigma)))) / (m * n);
        let oracle = (ref_self + self_y - 2.0 * cross).max(0.0).sqrt();
        let got = mmd_discrete(&mmd, &sel).unwrap();
        mmd_rel = mmd_rel.max((got - oracle).abs() / oracle);
    }

    // (c) swap updates against full recomputation
    let mut swap_err: f64 = 0.0;
    for obj in [&l2, &mmd] {
        let size = obj.population().len();
        let mut state = SwapEvalState::new(obj, random_subset(size, 25, &mut rng).unwrap()).unwrap();
        for _ in 0..1000 {
            let (out, inn) = random_swap(state.subset(), size, &mut rng).unwrap();
            let (v, next) = swap_delta_evaluate(obj, &state, out, inn).unwrap();
            swap_err = swap_err.max((v - obj.evaluate(next.subset()).unwrap()).abs());
            state = next;
        }
    }

    let secs = start.elapsed().as_secs_f64();
    let pass = star_mismatch == 0 && l2_rel <= 1e-12 && mmd_rel <= 1e-12 && swap_err <= 1e-10 && secs < 60.0;
    report(
        2,
        "discrepancy oracles",
        pass,
        format!(
            "star mismatches {star_mismatch}/50, L2 rel {l2_rel:.2e}, MMD rel {mmd_rel:.2e}, swap abs {swap_err:.2e}, {secs:.1}s"
        ),
    );
}

#[test]
fn criterion_3_centered_lattice() {
    let mut failures = Vec::new();
    for m in 1..=64usize {
        let pts = PointSet::new((1..=m).map(|i| vec![(2 * i - 1) as f64 / (2 * m) as f64]).collect()).unwrap();
        let all = SubsetSelection::new((0..m).collect(), m).unwrap();
        let v = star_discrepancy_exact(&pts, &all).unwrap();
        if v != 1.0 / (2 * m) as f64 {
            failures.push((m, v));
        }
    }
    report(3, "centered-lattice law", failures.is_empty(), format!("m = 1..64, mismatches {failures:?}"));
}

#[test]
fn criterion_4_gp_and_ei() {
    let start = Instant::now();

    // Posterior against a dense LU solve of the same model.
    let pop = Arc::new(generate_uniform(300, 2, RngSeed(4001)).unwrap());
    let obj = DiscrepancyObjective::l2(pop.clone(), BaseKernelSpec::SymmetricProduct).unwrap();
    let mut rng = RngSeed(4002).stream("gp");
    let train: Vec<SubsetSelection> = (0..20).map(|_| random_subset(300, 10, &mut rng).unwrap()).collect();
    let values: Vec<f64> = train.iter().map(|s| obj.evaluate(s).unwrap()).collect();
    let gp = fit(pop.clone(), train.clone(), values, &GpConfig::default(), SetKernelKind::DeepEmbedding).unwrap();
    let (sigma_x, theta_h) = match gp.spec().outer {
        OuterKernel::DeepEmbedding { theta_h } => (gp.spec().sigma_x, theta_h),
        OuterKernel::DoubleSum => unreachable!(),
    };
    let k0 = |a: &SubsetSelection, b: &SubsetSelection| {
        let (xa, xb) = (rows(&pop, a), rows(&pop, b));
        let s: f64 = xa.iter().flat_map(|p| xb.iter().map(move |q| rbf(p, q, sigma_x))).sum();
        s / (xa.len() * xb.len()) as f64
    };
    let de = |a: &SubsetSelection, b: &SubsetSelection| {
        let d2 = (k0(a, a) + k0(b, b) - 2.0 * k0(a, b)).max(0.0);
        (-d2 / (2.0 * theta_h * theta_h)).exp()
    };
    let t = train.len();
    let kmat = DMatrix::from_fn(t, t, |i, j| de(&train[i], &train[j]) + if i == j { gp.jitter_used() } else { 0.0 });
    let lu = kmat.lu();
    let z = DVector::from_column_slice(gp.data().standardized());
    let alpha = lu.solve(&z).unwrap();
    let mut queries: Vec<SubsetSelection> = (0..10).map(|_| random_subset(300, 10, &mut rng).unwrap()).collect();
    queries.push(train[3].clone());
    let mut gp_err: f64 = 0.0;
    for q in &queries {
        let kq = DVector::from_fn(t, |j, _| de(q, &train[j]));
        let mean = kq.dot(&alpha);
        let var = (1.0 - kq.dot(&lu.solve(&kq).unwrap())).max(0.0);
        let (m, v) = gp.predict(q);
        gp_err = gp_err.max((m - mean).abs()).max((v - var).abs());
    }

    // EI against Monte Carlo. Improvement gaps stay within three posterior
    // standard deviations so that every triple has improving samples.
    let mut triples = RngSeed(4003).stream("ei/triples");
    let samples = 1_000_000;
    let mut outside = Vec::new();
    let mut worst_z: f64 = 0.0;
    for k in 0..50 {
        let mu: f64 = triples.random_range(-2.0..2.0);
        let sd: f64 = triples.random_range(0.05..2.0);
        let f_min: f64 = mu + sd * triples.random_range(-3.0..3.0);
        let mut rng = RngSeed(4003).stream(&format!("ei/samples{k}"));
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..samples {
            let g: f64 = mu + sd * rng.sample::<f64, _>(StandardNormal);
            let imp = (f_min - g).max(0.0);
            s += imp;
            s2 += imp * imp;
        }
        let n = samples as f64;
        let mean = s / n;
        let se = ((s2 / n - mean * mean).max(0.0) / (n - 1.0)).sqrt();
        let ei = expected_improvement(mu, sd * sd, f_min);
        let z = (ei - mean).abs() / se;
        worst_z = worst_z.max(z);
        if !(z <= 3.0) {
            outside.push(k);
        }
    }
    let anchor = expected_improvement(0.7, 1.0, 0.7);
    let secs = start.elapsed().as_secs_f64();
    let pass = gp_err <= 1e-8 && outside.is_empty() && (anchor - 0.398_942_280_4).abs() <= 1e-9 && secs < 60.0;
    report(
        4,
        "GP/EI correctness",
        pass,
        format!(
            "predict max err {gp_err:.2e}, EI outside 3 SE in {outside:?} (worst {worst_z:.2} SE), EI(0 gap, 1) = {anchor:.12}, {secs:.1}s"
        ),
    );
}

#[test]
fn criterion_5_de_gram_positive_definite() {
    let pop = generate_uniform(200, 2, RngSeed(5001)).unwrap();
    let grid = GpConfig::default().grid;
    let mut rng = RngSeed(5002).stream("gram");
    let mut worst = f64::INFINITY;
    let mut worst_at = (0.0, 0.0);
    for trial in 0..50 {
        let mut subsets: Vec<SubsetSelection> = Vec::new();
        while subsets.len() < 20 {
            let s = random_subset(200, 10, &mut rng).unwrap();
            if !subsets.contains(&s) {
                subsets.push(s);
            }
        }
        let sigma_x = grid.sigma_x[trial % grid.sigma_x.len()];
        let theta_h = grid.theta_h[(trial / grid.sigma_x.len()) % grid.theta_h.len()];
        let spec = SetKernelSpec::deep_embedding(sigma_x, theta_h).unwrap();
        let g = gram(&pop, &spec, &subsets).unwrap();
        let eig = SymmetricEigen::new(DMatrix::from_row_slice(20, 20, g.entries())).eigenvalues.min();
        if eig < worst {
            worst = eig;
            worst_at = (sigma_x, theta_h);
        }
    }
    report(
        5,
        "DE Gram positive definiteness",
        worst > 0.0,
        format!("smallest eigenvalue over 50 trials {worst:.3e} at (sigma_x, theta_h) = {worst_at:?}"),
    );
}

fn gap_stats(summary: &ExperimentSummary, method: Method, optimum: &BTreeMap<u64, f64>) -> (f64, usize) {
    let ms = summary.method(method).unwrap();
    let gaps: Vec<f64> = ms
        .runs
        .iter()
        .map(|r| r.trace.final_best().unwrap() - optimum[&r.seed.0])
        .collect();
    let hits = gaps.iter().filter(|&&g| g == 0.0).count();
    (ldsubset::harness::quantile(&gaps, 0.5), hits)
}

#[test]
fn criterion_6_small_instance_ordering() {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        n: 12,
        m: 3,
        budget: 100,
        seeds: (0..20).map(RngSeed).collect(),
        methods: vec![Method::Random, Method::BoDe],
        ..ExperimentConfig::preset("exp1").unwrap()
    };
    let summary = run_experiment(&cfg).unwrap();
    let mut optimum = BTreeMap::new();
    for (seed, pop) in &summary.populations {
        let obj = DiscrepancyObjective::l2(pop.clone(), BaseKernelSpec::SymmetricProduct).unwrap();
        optimum.insert(seed.0, brute_force_best_subset(&obj, 3).unwrap().1);
    }
    let (bo_gap, bo_hits) = gap_stats(&summary, Method::BoDe, &optimum);
    let (rnd_gap, rnd_hits) = gap_stats(&summary, Method::Random, &optimum);
    let secs = start.elapsed().as_secs_f64();
    report(
        6,
        "small-instance oracle ordering",
        bo_gap < rnd_gap && bo_hits >= 10 && secs < 300.0,
        format!(
            "median gap bo-de {bo_gap:.3e} vs random {rnd_gap:.3e}; optimum hit bo-de {bo_hits}/20, random {rnd_hits}/20; {secs:.1}s"
        ),
    );
}

fn improvement_after_50(summary: &ExperimentSummary, method: Method) -> f64 {
    let ms = summary.method(method).unwrap();
    let gains: Vec<f64> = ms
        .runs
        .iter()
        .map(|r| r.trace.records[49].best_so_far - r.trace.final_best().unwrap())
        .collect();
    ldsubset::harness::quantile(&gains, 0.5)
}

#[test]
fn criterion_7_paper_scale_ordering() {
    let mut lines = Vec::new();
    let mut pass = true;
    for preset in ["exp1", "exp2", "exp3"] {
        let start = Instant::now();
        let cfg = ExperimentConfig::preset(preset).unwrap();
        assert!(cfg.seeds.len() >= 10);
        let s = run_experiment(&cfg).unwrap();
        let med = |m: Method| s.method(m).unwrap().median_final();
        let (de, gls, rnd, ds) = (med(Method::BoDe), med(Method::Gls), med(Method::Random), med(Method::BoDs));
        let (gain_de, gain_rnd, gain_ds) = (
            improvement_after_50(&s, Method::BoDe),
            improvement_after_50(&s, Method::Random),
            improvement_after_50(&s, Method::BoDs),
        );
        let secs = start.elapsed().as_secs_f64();
        let ok = de < gls && de < rnd && de < ds && gain_rnd < gain_de && gain_ds < gain_de && secs < 900.0;
        pass &= ok;
        lines.push(format!(
            "{preset}: medians bo-de {de:.4e} gls {gls:.4e} random {rnd:.4e} bo-ds {ds:.4e}; gain after 50 bo-de {gain_de:.3e} random {gain_rnd:.3e} bo-ds {gain_ds:.3e}; {secs:.0}s{}",
            if ok { "" } else { " <- violated" }
        ));
    }
    report(7, "paper-scale qualitative ordering", pass, lines.join(" | "));
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for sub in ["", "traces"] {
        for entry in std::fs::read_dir(dir.join(sub)).unwrap() {
            let p = entry.unwrap().path();
            if p.extension().is_some_and(|e| e == "csv") {
                files.insert(format!("{sub}/{}", p.file_name().unwrap().to_string_lossy()), std::fs::read(&p).unwrap());
            }
        }
    }
    files
}

#[test]
fn criterion_8_budget_and_determinism() {
    let mut short = Vec::new();
    let mut differing = Vec::new();
    let mut traces = 0;
    for preset in ["exp1", "exp2", "exp3"] {
        let cfg = ExperimentConfig { seeds: vec![RngSeed(0), RngSeed(1)], ..ExperimentConfig::preset(preset).unwrap() };
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let sa = run_experiment_to(&cfg, a.path()).unwrap();
        run_experiment_to(&cfg, b.path()).unwrap();
        for ms in &sa.methods {
            for r in &ms.runs {
                traces += 1;
                let dense = r.trace.records.iter().enumerate().all(|(i, rec)| rec.eval_index == i + 1);
                if r.trace.len() != 100 || !dense {
                    short.push(format!("{preset}/{}/{}", ms.method, r.seed.0));
                }
            }
        }
        let (fa, fb) = (read_tree(a.path()), read_tree(b.path()));
        if fa.keys().ne(fb.keys()) {
            differing.push(format!("{preset}: file sets differ"));
        }
        for (name, bytes) in &fa {
            if fb.get(name) != Some(bytes) {
                differing.push(format!("{preset}{name}"));
            }
        }
    }
    report(
        8,
        "budget and determinism",
        short.is_empty() && differing.is_empty() && traces == 24,
        format!("{traces} traces, wrong length {short:?}, non-identical files {differing:?}"),
    );
}
