use dlfpca::eigen::{
    adjust_covariance, calibrate_bias_mc, eigen_decompose, BiasCorrection, CovSurface,
};
use dlfpca::simulation::{
    apply_detection_limit, fit_simulated, generate_dataset, ise_eigenfunction, Density,
    EigenStudyOptions, SimConfig,
};
use dlfpca::smoothing::{default_candidates, local_constant_covariance};
use dlfpca::{inner_product, make_uniform_grid, Grid, Kernel, WeightScheme};
use nalgebra::DMatrix;

fn surface(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> CovSurface {
    let p = grid.points();
    CovSurface::from_values(grid.clone(), DMatrix::from_fn(grid.len(), grid.len(), |a, b| f(p[a], p[b]))).unwrap()
}

fn phi1(t: f64) -> f64 {
    2f64.sqrt() * (2.0 * std::f64::consts::PI * t).cos()
}

fn phi2(t: f64) -> f64 {
    2f64.sqrt() * (2.0 * std::f64::consts::PI * t).sin()
}

#[test]
fn two_component_surface() {
    let grid = make_uniform_grid(0.0, 1.0, 101).unwrap();
    let s = surface(&grid, |s, t| 3.0 * phi1(s) * phi1(t) + phi2(s) * phi2(t));
    let es = eigen_decompose(&s, &grid).unwrap();
    // trapezoid on a periodic integrand: both functions are discretely orthonormal
    assert!((es.eigenvalues[0] - 3.0).abs() < 1e-6);
    assert!((es.eigenvalues[1] - 1.0).abs() < 1e-6);
    assert!(es.eigenvalues[2] < 1e-9);
}

fn random_symmetric(grid: &Grid, seed: u64) -> CovSurface {
    // deterministic pseudo-random symmetric surface, indefinite on purpose
    let g = grid.len();
    let mut x = seed;
    let mut next = move || {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        (x % 10_000) as f64 / 5_000.0 - 1.0
    };
    let mut m = DMatrix::zeros(g, g);
    for a in 0..g {
        for b in 0..=a {
            let v = next();
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    CovSurface::from_values(grid.clone(), m).unwrap()
}

#[test]
fn orthonormal_and_trace_identity() {
    let grid = make_uniform_grid(0.0, 2.0, 40).unwrap();
    let s = random_symmetric(&grid, 7);
    let es = eigen_decompose(&s, &grid).unwrap();
    for k in 0..es.len() {
        for l in 0..es.len() {
            let ip = inner_product(&es.eigenfunctions[k], &es.eigenfunctions[l], &grid).unwrap();
            let target = if k == l { 1.0 } else { 0.0 };
            assert!((ip - target).abs() < 1e-8);
        }
    }
    let raw_sum: f64 = es.raw_eigenvalues.iter().sum();
    let trace: f64 = (0..grid.len()).map(|g| grid.weights()[g] * s.values[(g, g)]).sum();
    assert!((raw_sum - trace).abs() <= 1e-8 * trace.abs().max(1.0));
    assert_eq!(es.raw_trace, trace);
    assert!(es.raw_eigenvalues.iter().any(|&l| l < 0.0));
    assert!(es.eigenvalues.iter().all(|&l| l >= 0.0));
    assert!(es.raw_eigenvalues.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn full_expansion_reconstructs_surface() {
    let grid = make_uniform_grid(0.0, 1.0, 30).unwrap();
    // positive semidefinite: Gram matrix of a smooth kernel
    let s = surface(&grid, |s, t| (-(s - t).powi(2) / 0.1).exp() + s * t);
    let es = eigen_decompose(&s, &grid).unwrap();
    let g = grid.len();
    let clamped = es.raw_eigenvalues.iter().any(|&l| l < 0.0);
    let mut rec = DMatrix::zeros(g, g);
    for l in 0..es.len() {
        let f = &es.eigenfunctions[l];
        for a in 0..g {
            for b in 0..g {
                rec[(a, b)] += es.raw_eigenvalues[l] * f[a] * f[b];
            }
        }
    }
    assert!((rec - &s.values).amax() < 1e-6);
    if !clamped {
        assert_eq!(es.eigenvalues, es.raw_eigenvalues);
    }
}

#[test]
fn decomposition_is_deterministic() {
    let grid = make_uniform_grid(0.0, 1.0, 50).unwrap();
    let s = random_symmetric(&grid, 11);
    assert_eq!(eigen_decompose(&s, &grid).unwrap(), eigen_decompose(&s, &grid).unwrap());
}

fn null_model(dl: Option<f64>) -> SimConfig {
    let mut m = SimConfig::standard(Density::Sparse, 100, dl);
    m.lambda = 0.0;
    m
}

#[test]
fn calibration_without_censoring_is_null() {
    let grid = make_uniform_grid(0.0, 1.0, 21).unwrap();
    let reps = 200;
    let b = calibrate_bias_mc(&null_model(None), &grid, 0.1, reps, 3).unwrap();
    let bound = 3.0 / (reps as f64).sqrt();
    assert!(b.surface().unwrap().amax() <= bound);
}

#[test]
fn calibration_error_shrinks_with_replicates() {
    let grid = make_uniform_grid(0.0, 1.0, 21).unwrap();
    let m = null_model(Some(0.0));
    // the spread of a single pair is itself noisy, so average it over four pairs
    let spread = |reps: usize, base: u64| {
        (0..4u64)
            .map(|k| {
                let a = calibrate_bias_mc(&m, &grid, 0.1, reps, base + 2 * k).unwrap();
                let b = calibrate_bias_mc(&m, &grid, 0.1, reps, base + 2 * k + 1).unwrap();
                let d = a.surface().unwrap() - b.surface().unwrap();
                (d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64).sqrt()
            })
            .sum::<f64>()
            / 4.0
    };
    let ratio = spread(400, 500) / spread(200, 100);
    assert!(ratio > 0.5 && ratio < 0.95, "ratio {ratio}");
}

#[test]
fn calibration_diagonal_region_positive() {
    let grid = make_uniform_grid(0.0, 1.0, 21).unwrap();
    let b = calibrate_bias_mc(&null_model(Some(0.0)), &grid, 0.1, 500, 1).unwrap();
    let s = b.surface().unwrap();
    let (mut sum, mut count) = (0.0, 0);
    for a in 0..21usize {
        for c in 0..21 {
            if a.abs_diff(c) <= 2 {
                sum += s[(a, c)];
                count += 1;
            }
        }
    }
    assert!(sum / count as f64 > 0.0);
}

#[test]
fn adjusted_null_surface_is_centred() {
    let grid = make_uniform_grid(0.0, 1.0, 21).unwrap();
    let model = null_model(Some(0.0));
    let b = calibrate_bias_mc(&model, &grid, 0.1, 500, 1).unwrap();
    let fresh = SimConfig { seed: 99, ..model.clone() };
    let (mut adj_mean, mut raw_mean) = (0.0, 0.0);
    let reps = 500;
    for r in 0..reps {
        let ds = apply_detection_limit(&generate_dataset(&fresh, r).unwrap().dataset, Some(0.0)).unwrap();
        let raw = local_constant_covariance(&ds, 0.1, WeightScheme::Obs, 1.0, &grid, Kernel::Gaussian).unwrap();
        let adj = adjust_covariance(&raw, &b, 1.0).unwrap();
        raw_mean += raw.values.mean();
        adj_mean += adj.values.mean();
    }
    adj_mean /= reps as f64;
    raw_mean /= reps as f64;
    assert!(adj_mean.abs() < 0.05);
    // the shift is exactly the calibrated surface's average
    assert!(((raw_mean - adj_mean) - b.surface().unwrap().mean()).abs() < 1e-12);
}

#[test]
fn no_correction_is_exact_identity_on_estimates() {
    let cfg = SimConfig::standard(Density::Sparse, 100, Some(0.0));
    let ds = apply_detection_limit(&generate_dataset(&cfg, 0).unwrap().dataset, cfg.dl).unwrap();
    let grid = make_uniform_grid(0.0, 1.0, 21).unwrap();
    let raw = local_constant_covariance(&ds, 0.1, WeightScheme::Obs, 1.0, &grid, Kernel::Gaussian).unwrap();
    assert_eq!(adjust_covariance(&raw, &BiasCorrection::None, 1.0).unwrap().values, raw.values);
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

#[test]
fn eigenfunction_error_falls_with_more_data() {
    let opts = EigenStudyOptions {
        grid_size: 51,
        candidates: default_candidates((0.0, 1.0)).into_iter().step_by(2).collect(),
        ..Default::default()
    };
    let psi = |t: f64| 2f64.sqrt() * (4.0 * std::f64::consts::PI * t).cos();
    for dl in [None, Some(0.0), Some(-1.0)] {
        let mut medians = Vec::new();
        for (n, density) in [(50, Density::Sparse), (100, Density::Sparse), (100, Density::Dense)] {
            let mut cfg = SimConfig::standard(density, 100, dl);
            cfg.n = n;
            let ises: Vec<f64> = (0..50)
                .map(|rep| {
                    let ds = apply_detection_limit(&generate_dataset(&cfg, rep).unwrap().dataset, dl).unwrap();
                    let fit = fit_simulated(&ds, &cfg, &opts, false).unwrap();
                    ise_eigenfunction(&fit.eigen, psi).unwrap()
                })
                .collect();
            medians.push(median(ises));
        }
        assert!(medians[0] >= medians[1] && medians[1] >= medians[2], "DL {dl:?}: {medians:?}");
    }
}
