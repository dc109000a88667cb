use dlfpca::simulation::{
    apply_detection_limit, generate_dataset, run_replicates, Density, EigenStudyOptions,
    SimConfig, Study,
};

fn censored_fraction(density: Density, dl: f64, n: usize) -> f64 {
    let mut cfg = SimConfig::standard(density, 100, Some(dl));
    cfg.n = n;
    let ds = generate_dataset(&cfg, 0).unwrap().dataset;
    apply_detection_limit(&ds, Some(dl)).unwrap().censored_fraction()
}

#[test]
fn half_censored_at_zero() {
    let f = censored_fraction(Density::Sparse, 0.0, 10_000);
    assert!((f - 0.5).abs() <= 0.01, "{f}");
}

#[test]
fn lower_limit_rates_match_reported() {
    let sparse = censored_fraction(Density::Sparse, -1.0, 10_000);
    assert!((sparse - 0.2566).abs() <= 0.02, "{sparse}");
    let dense = censored_fraction(Density::Dense, -1.0, 1_000);
    assert!((dense - 0.2726).abs() <= 0.02, "{dense}");
}

#[test]
fn traditional_scores_underestimate_variance() {
    for dl in [0.0, -1.0] {
        let mut cfg = SimConfig::standard(Density::Sparse, 100, Some(dl));
        cfg.replicates = 5;
        let run = run_replicates(&cfg, Study::Scores, &EigenStudyOptions::default()).unwrap();
        let a = run.aggregate;
        assert!(a.score_var_trad.unwrap() < a.score_var.unwrap());
    }
}

#[test]
fn parallel_and_serial_runs_agree() {
    let mut cfg = SimConfig::standard(Density::Sparse, 100, Some(0.0));
    cfg.replicates = 4;
    cfg.n = 40;
    let opts = EigenStudyOptions {
        grid_size: 31,
        candidates: vec![0.05, 0.1, 0.2],
        ..Default::default()
    };
    let run_in = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_replicates(&cfg, Study::Both, &opts).unwrap())
    };
    let serial = run_in(1);
    let parallel = run_in(4);
    assert_eq!(serial, parallel);
    assert_eq!(serial.failed, 0);
}

#[test]
fn uncensored_replicates_have_no_censoring() {
    let mut cfg = SimConfig::standard(Density::Dense, 100, None);
    cfg.replicates = 2;
    let run = run_replicates(&cfg, Study::Scores, &EigenStudyOptions::default()).unwrap();
    assert_eq!(run.aggregate.censored_fraction, Some(0.0));
    // with nothing censored the two score estimators differ only by the 1/N vs 1/sum psi^2 scaling
    assert!(run.aggregate.mse_star.unwrap() < 0.05);
}
