use std::path::Path;
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn dlfpca(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dlfpca")).args(args).env_remove("DLFPCA_OUTPUT_DIR").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let o = dlfpca(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// 90 subjects, 268 observations over 30 months, censored below 0.
fn clinic_like(path: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut text = String::from("subject_id,time,value,censored\n");
    for i in 0..90 {
        let n = if i < 2 { 2 } else { 3 };
        let level: f64 = rng.sample::<f64, _>(StandardNormal);
        for _ in 0..n {
            let t: f64 = rng.random::<f64>() * 30.0;
            let e: f64 = rng.sample(StandardNormal);
            let y = 1.0 + 0.03 * t + level * (t / 15.0).cos() + 0.5 * e;
            if y < 0.0 {
                text += &format!("p{i},{t},0,1\n");
            } else {
                text += &format!("p{i},{t},{y},0\n");
            }
        }
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn sparse_clinical_fit_flags_late_region() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("clinic.csv");
    clinic_like(&data);
    let out = tmp.path().join("fit");
    let report = ok(&["fit", s(&data), "--domain", "0,40", "--out", s(&out)]);
    assert!(report.contains("subjects: 90"));
    assert!(report.contains("observations: 268"));
    let region = report
        .lines()
        .skip_while(|l| !l.starts_with("low-support"))
        .nth(1)
        .expect("a low-support region is listed");
    assert!(region.trim().ends_with(", 40]"), "{region}");
    for f in ["mean.csv", "covariance.csv", "eigen.csv", "scores.csv", "fitted.csv", "report.txt", "model.toml"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let scores = std::fs::read_to_string(out.join("scores.csv")).unwrap();
    assert!(scores.starts_with("subject_id,n_obs,n_censored,status,cond,xi_1"));
    assert_eq!(scores.lines().count(), 91);
}

#[test]
fn scores_against_saved_model_match_fit() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    ok(&["simulate", "--dl", "-1", "--seed", "2", "--out", s(&sim)]);
    let data = sim.join("data.csv");
    let fit = tmp.path().join("fit");
    ok(&["fit", s(&data), "--bandwidth", "0.08", "--out", s(&fit)]);
    let sc = tmp.path().join("sc");
    ok(&["scores", s(&data), "--model", s(&fit), "--out", s(&sc)]);
    let a = std::fs::read_to_string(fit.join("scores.csv")).unwrap();
    let b = std::fs::read_to_string(sc.join("scores.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        std::fs::read_to_string(fit.join("fitted.csv")).unwrap(),
        std::fs::read_to_string(sc.join("fitted.csv")).unwrap()
    );
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    let from_file = tmp.path().join("from-file");
    std::fs::write(&cfg, format!("grid_size = 7\ndomain = [0.0, 3.0]\noutput_dir = {:?}\n", s(&from_file))).unwrap();
    ok(&["export-grid", "--config", s(&cfg)]);
    let grid = std::fs::read_to_string(from_file.join("grid.csv")).unwrap();
    assert_eq!(grid, "time,weight\n0,0.25\n0.5,0.5\n1,0.5\n1.5,0.5\n2,0.5\n2.5,0.5\n3,0.25\n");

    let flagged = tmp.path().join("flagged");
    ok(&["export-grid", "--config", s(&cfg), "--grid", "3", "--out", s(&flagged)]);
    let grid = std::fs::read_to_string(flagged.join("grid.csv")).unwrap();
    assert_eq!(grid, "time,weight\n0,0.75\n1.5,1.5\n3,0.75\n");

    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "gridsize = 7\n").unwrap();
    assert!(!dlfpca(&["export-grid", "--config", s(&bad)]).status.success());
}

#[test]
fn output_directory_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("env-out");
    let o = Command::new(env!("CARGO_BIN_EXE_dlfpca"))
        .args(["export-grid", "--grid", "4"])
        .env("DLFPCA_OUTPUT_DIR", &dir)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.join("grid.csv").exists());
}

#[test]
fn failures_are_stage_tagged_and_leave_no_output() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("bad.csv");
    std::fs::write(&data, "subject_id,time,value,censored\na,0.1,1,0\na,zero,2,0\n").unwrap();
    let out = tmp.path().join("out");
    let o = dlfpca(&["fit", s(&data), "--out", s(&out)]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("ingest stage failed") && err.contains("line 3"), "{err}");
    assert!(!out.exists());

    // one subject with a single observation cannot give a covariance
    std::fs::write(&data, "subject_id,time,value,censored\na,0.1,1,0\nb,0.5,2,0\nc,0.9,1.5,0\n").unwrap();
    let o = dlfpca(&["fit", s(&data), "--bandwidth", "0.2", "--sigma", "1", "--out", s(&out)]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("covariance stage failed"), "{err}");
    assert!(!out.exists());
}

#[test]
fn outlier_exclusion_is_opt_in() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    ok(&["simulate", "--n", "40", "--seed", "5", "--out", s(&sim)]);
    let data = sim.join("data.csv");
    let mut text = std::fs::read_to_string(&data).unwrap();
    text += "1,0.999,60,0\n";
    std::fs::write(&data, text).unwrap();
    let plain = ok(&["fit", s(&data), "--bandwidth", "0.1", "--bias", "none", "--out", s(&tmp.path().join("a"))]);
    assert!(!plain.contains("excluded outliers"));
    let cleaned = ok(&[
        "fit", s(&data), "--bandwidth", "0.1", "--bias", "none", "--exclude-outliers", "true", "--out",
        s(&tmp.path().join("b")),
    ]);
    assert!(cleaned.contains("excluded outliers: 1"), "{cleaned}");
}

#[test]
fn reproduce_layouts() {
    let tmp = tempfile::tempdir().unwrap();
    let t2 = ok(&["reproduce", "table2", "--quick", "--out", s(&tmp.path().join("t2"))]);
    let mut rdr = csv::Reader::from_reader(t2.as_bytes());
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        [
            "density", "dl", "m", "replicates", "failed", "mean", "variance", "mse_star_x100", "mse_dstar_x100",
            "variance_trad", "mse_star_trad_x100"
        ]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 16);
    let sparse0: Vec<&str> = rows.iter().filter(|r| &r[0] == "sparse" && &r[1] == "0").map(|r| r.get(2).unwrap()).collect();
    assert_eq!(sparse0, ["100", "200", "500", "1000"]);
    assert!(rows.iter().all(|r| &r[3] == "25"));
    let detail = std::fs::read_to_string(tmp.path().join("t2/table2_replicates.csv")).unwrap();
    assert_eq!(detail.lines().count(), 1 + 16 * 25);

    let t1 = ok(&["reproduce", "table1", "--replicates", "1", "--out", s(&tmp.path().join("t1"))]);
    let rows: Vec<csv::StringRecord> = csv::Reader::from_reader(t1.as_bytes()).records().map(Result::unwrap).collect();
    let keys: Vec<(String, String)> = rows.iter().map(|r| (r[0].to_string(), r[1].to_string())).collect();
    let want: Vec<(String, String)> = ["sparse", "dense"]
        .iter()
        .flat_map(|d| ["0", "-1", "none"].iter().map(move |c| (d.to_string(), c.to_string())))
        .collect();
    assert_eq!(keys, want);
    // no detection limit: the naive baseline sees the same data
    for r in rows.iter().filter(|r| &r[1] == "none") {
        assert_eq!(&r[4], &r[5]);
    }
}
