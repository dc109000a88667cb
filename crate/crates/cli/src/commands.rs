use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use dlfpca::eigen::EigenSystem;
use dlfpca::pipeline::{fit, FitResult};
use dlfpca::reconstruct::reconstruct_curves;
use dlfpca::scores::{estimate_all_scores, EigenBasis, ScoreEstimate};
use dlfpca::simulation::{
    apply_detection_limit, generate_dataset, run_replicates, Density, EigenStudyOptions,
    ReplicateRun, SimConfig, Study,
};
use dlfpca::smoothing::{center_dataset, MeanEstimate};
use dlfpca::{make_uniform_grid, Dataset, FpcaError, WeightScheme};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::config::Settings;
use crate::io::{dataset_to_csv, exclude_outliers, ingest_csv, parse_csv, table, IngestOptions};

#[derive(Debug, Parser)]
#[command(name = "dlfpca", version, about = "FPCA for longitudinal data with detection limits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit mean, covariance, components and scores to a CSV file.
    Fit {
        input: PathBuf,
        #[command(flatten)]
        settings: Settings,
    },
    /// Score (and reconstruct) subjects against a previous fit.
    Scores {
        input: PathBuf,
        /// Output directory of an earlier `fit`.
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        settings: Settings,
    },
    /// Draw one dataset from the simulation model.
    Simulate {
        #[arg(long, default_value = "sparse")]
        density: Density,
        /// Expected observations per subject before thinning.
        #[arg(long, default_value_t = 100)]
        m: usize,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        replicate: usize,
        #[command(flatten)]
        settings: Settings,
    },
    /// Re-run a simulation table.
    Reproduce {
        table: TableKind,
        /// 25 replicates per scenario.
        #[arg(long)]
        quick: bool,
        #[command(flatten)]
        settings: Settings,
    },
    /// Write the evaluation grid and its quadrature weights.
    ExportGrid {
        #[command(flatten)]
        settings: Settings,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableKind {
    Table1,
    Table2,
}

/// Files produced by a command, written only once everything has been computed.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Outputs {
    pub dir: PathBuf,
    pub files: Vec<(String, String)>,
    pub stdout: String,
}

impl Outputs {
    fn new(dir: PathBuf) -> Self {
        Self { dir, ..Default::default() }
    }

    fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    /// Writes every file; on failure the files already written are removed again.
    pub fn write(&self) -> Result<()> {
        std::fs::create_dir_all(&self.dir).with_context(|| format!("cannot create {}", self.dir.display()))?;
        let mut written: Vec<PathBuf> = Vec::new();
        for (name, contents) in &self.files {
            let path = self.dir.join(name);
            if let Err(e) = std::fs::write(&path, contents) {
                for p in &written {
                    let _ = std::fs::remove_file(p);
                }
                return Err(anyhow!(e).context(format!("output stage failed: cannot write {}", path.display())));
            }
            written.push(path);
        }
        Ok(())
    }
}

pub fn run(cli: Cli) -> Result<Outputs> {
    match cli.command {
        Command::Fit { input, settings } => cmd_fit(&input, &settings.resolve()?),
        Command::Scores { input, model, settings } => cmd_scores(&input, &model, &settings.resolve()?),
        Command::Simulate { density, m, n, replicate, settings } => {
            cmd_simulate(density, m, n, replicate, &settings.resolve()?)
        }
        Command::Reproduce { table, quick, settings } => cmd_reproduce(table, quick, &settings.resolve()?),
        Command::ExportGrid { settings } => cmd_export_grid(&settings.resolve()?),
    }
}

fn load(input: &Path, settings: &Settings) -> Result<(Dataset, Option<usize>)> {
    let options = IngestOptions {
        detection_limit: settings.dl,
        domain: settings.domain()?,
    };
    let data = ingest_csv(input, &options).context("ingest stage failed")?;
    if settings.exclude_outliers.unwrap_or(false) {
        let (kept, removed) = exclude_outliers(&data, 3.0).context("ingest stage failed")?;
        Ok((kept, Some(removed)))
    } else {
        Ok((data, None))
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn dl_label(dl: Option<f64>) -> String {
    dl.map_or_else(|| "none".to_string(), |c| c.to_string())
}

/// Fitted parameters needed to score new subjects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub sigma: f64,
    pub components: usize,
    pub grid_size: usize,
    pub domain: [f64; 2],
    pub detection_limit: Option<f64>,
    pub mean_bandwidth: f64,
    pub covariance_bandwidth: f64,
    pub scheme: String,
    pub bias_correction: String,
}

fn mean_csv(mean: &MeanEstimate) -> Result<String> {
    table(
        &["time", "mean", "support"],
        (0..mean.grid.len()).map(|g| {
            vec![mean.grid.points()[g].to_string(), mean.values[g].to_string(), mean.support[g].to_string()]
        }),
    )
}

fn eigen_csv(eigen: &EigenSystem, components: usize) -> Result<String> {
    let shares = eigen.fve_shares();
    let pts = eigen.grid.points();
    table(
        &["component", "eigenvalue", "fve", "time", "value"],
        (0..components).flat_map(|l| {
            let shares = &shares;
            (0..pts.len()).map(move |g| {
                vec![
                    (l + 1).to_string(),
                    eigen.eigenvalues[l].to_string(),
                    shares[l].to_string(),
                    pts[g].to_string(),
                    eigen.eigenfunctions[l][g].to_string(),
                ]
            })
        }),
    )
}

fn scores_csv(data: &Dataset, results: &[Result<ScoreEstimate, FpcaError>], components: usize) -> Result<String> {
    let mut header = vec!["subject_id".to_string(), "n_obs".into(), "n_censored".into(), "status".into(), "cond".into()];
    header.extend((1..=components).map(|l| format!("xi_{l}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    table(
        &header,
        data.trajectories().iter().zip(results).map(|(tr, r)| {
            let mut row = vec![tr.subject_id().to_string(), tr.len().to_string(), tr.censored_count().to_string()];
            match r {
                Ok(e) => {
                    row.push("ok".into());
                    row.push(e.cond.to_string());
                    row.extend(e.xi.iter().map(|x| x.to_string()));
                }
                Err(err) => {
                    row.push(err.to_string());
                    row.push(match err {
                        FpcaError::IllConditioned { condition, .. } => condition.to_string(),
                        _ => String::new(),
                    });
                    row.extend(std::iter::repeat_n(String::new(), components));
                }
            }
            row
        }),
    )
}

fn fitted_csv(data: &Dataset, results: &[Result<ScoreEstimate, FpcaError>], mean: &[f64], eigen: &EigenSystem) -> Result<String> {
    let ok: Vec<(usize, DVector<f64>)> = results
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.as_ref().ok().map(|e| (i, e.xi.clone())))
        .collect();
    let xi: Vec<DVector<f64>> = ok.iter().map(|(_, x)| x.clone()).collect();
    let curves = reconstruct_curves(mean, eigen, &xi)?;
    let pts = eigen.grid.points();
    table(
        &["subject_id", "time", "fitted"],
        ok.iter().zip(&curves).flat_map(|((i, _), curve)| {
            let id = data.trajectories()[*i].subject_id();
            pts.iter().zip(curve).map(move |(t, v)| vec![id.to_string(), t.to_string(), v.to_string()])
        }),
    )
}

pub fn report(data: &Dataset, result: &FitResult, fve: f64, excluded: Option<usize>) -> String {
    let mut r = String::new();
    let _ = writeln!(r, "subjects: {}", data.n());
    let _ = writeln!(
        r,
        "observations: {} (censored {}, {:.2}%)",
        data.total_observations(),
        data.censored_count(),
        100.0 * data.censored_fraction()
    );
    let _ = writeln!(r, "detection limit: {}", dl_label(data.detection_limit()));
    if let Some(k) = excluded {
        let _ = writeln!(r, "excluded outliers: {k}");
    }
    let _ = writeln!(r, "sigma: {} ({})", result.sigma.sigma, result.sigma.describe());
    let _ = writeln!(r, "mean bandwidth: {}", result.mean_bandwidth);
    let _ = writeln!(r, "covariance bandwidth: {}", result.covariance_bandwidth);
    let _ = writeln!(r, "bias correction: {}", result.correction.name());
    let _ = writeln!(r, "fve threshold: {fve}");
    let _ = writeln!(r, "components: {}", result.components);
    let shares = result.fve_shares();
    let _ = writeln!(r, "fve shares (component, share, cumulative):");
    let mut cum = 0.0;
    for (l, s) in shares.iter().enumerate().take(result.components.max(10).min(shares.len())) {
        cum += s;
        let _ = writeln!(r, "  {} {:.6} {:.6}", l + 1, s, cum);
    }
    let ok = result.scores.iter().filter(|s| s.result.is_ok()).count();
    let _ = writeln!(r, "scores: {ok} ok, {} failed", result.scores.len() - ok);
    let _ = writeln!(r, "imse: {}", result.imse.map_or_else(|| "unavailable".into(), |v| v.to_string()));
    if result.low_support.is_empty() {
        let _ = writeln!(r, "low-support regions: none");
    } else {
        let _ = writeln!(r, "low-support regions (estimates unreliable):");
        for (a, b) in &result.low_support {
            let _ = writeln!(r, "  [{a}, {b}]");
        }
    }
    r
}

pub fn cmd_fit(input: &Path, settings: &Settings) -> Result<Outputs> {
    let (data, excluded) = load(input, settings)?;
    let options = settings.fit_options()?;
    let result = fit(&data, &options)?;
    let l = result.components;
    let results: Vec<Result<ScoreEstimate, FpcaError>> = result.scores.iter().map(|s| s.result.clone()).collect();
    let truncated = result.eigen.truncated(l);

    let mut out = Outputs::new(settings.output_dir());
    out.add("mean.csv", mean_csv(&result.mean)?);
    let g = result.grid.len();
    let pts = result.grid.points();
    out.add(
        "covariance.csv",
        table(
            &["s", "t", "raw", "adjusted"],
            (0..g * g).map(|k| {
                let (a, b) = (k / g, k % g);
                vec![
                    pts[a].to_string(),
                    pts[b].to_string(),
                    result.covariance.values[(a, b)].to_string(),
                    result.adjusted.values[(a, b)].to_string(),
                ]
            }),
        )?,
    );
    out.add("eigen.csv", eigen_csv(&result.eigen, l)?);
    out.add("scores.csv", scores_csv(&data, &results, l)?);
    out.add("fitted.csv", fitted_csv(&data, &results, &result.mean.values, &truncated)?);
    let (a, b) = data.domain();
    let model = ModelFile {
        sigma: result.sigma.sigma,
        components: l,
        grid_size: g,
        domain: [a, b],
        detection_limit: data.detection_limit(),
        mean_bandwidth: result.mean_bandwidth,
        covariance_bandwidth: result.covariance_bandwidth,
        scheme: options.scheme.name().to_string(),
        bias_correction: result.correction.name().to_string(),
    };
    out.add("model.toml", toml::to_string(&model)?);
    let rep = report(&data, &result, options.fve_threshold, excluded);
    out.stdout = rep.clone();
    out.add("report.txt", rep);
    Ok(out)
}

fn read_model(dir: &Path) -> Result<(ModelFile, MeanEstimate, EigenSystem)> {
    let read = |name: &str| {
        let p = dir.join(name);
        std::fs::read_to_string(&p).with_context(|| format!("cannot read {}", p.display()))
    };
    let model: ModelFile = toml::from_str(&read("model.toml")?).context("invalid model.toml")?;
    let grid = make_uniform_grid(model.domain[0], model.domain[1], model.grid_size)?;
    let g = grid.len();

    let parse_rows = |name: &str, cols: usize| -> Result<Vec<Vec<f64>>> {
        let text = read(name)?;
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != cols {
                bail!("{name} line {line}: expected {cols} fields");
            }
            rows.push(
                rec.iter()
                    .map(|f| f.parse::<f64>().map_err(|_| anyhow!("{name} line {line}: bad number {f:?}")))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        Ok(rows)
    };

    let mean_rows = parse_rows("mean.csv", 3)?;
    if mean_rows.len() != g || mean_rows.iter().zip(grid.points()).any(|(r, &t)| r[0] != t) {
        bail!("mean.csv does not match the model grid");
    }
    let mean = MeanEstimate {
        grid: grid.clone(),
        values: mean_rows.iter().map(|r| r[1]).collect(),
        support: mean_rows.iter().map(|r| r[2]).collect(),
        bandwidth: model.mean_bandwidth,
        scheme: model.scheme.parse::<WeightScheme>()?,
        sigma: model.sigma,
    };

    let eig_rows = parse_rows("eigen.csv", 5)?;
    if eig_rows.len() != g * model.components {
        bail!("eigen.csv holds {} rows, expected {}", eig_rows.len(), g * model.components);
    }
    let mut eigenvalues = Vec::new();
    let mut functions = Vec::new();
    for (l, chunk) in eig_rows.chunks(g).enumerate() {
        if chunk.iter().zip(grid.points()).any(|(r, &t)| r[0] != (l + 1) as f64 || r[3] != t) {
            bail!("eigen.csv component {} does not match the model grid", l + 1);
        }
        eigenvalues.push(chunk[0][1]);
        functions.push(chunk.iter().map(|r| r[4]).collect());
    }
    let eigen = EigenSystem {
        grid,
        raw_eigenvalues: eigenvalues.clone(),
        eigenvalues,
        eigenfunctions: functions,
        raw_trace: f64::NAN,
    };
    Ok((model, mean, eigen))
}

pub fn cmd_scores(input: &Path, model_dir: &Path, settings: &Settings) -> Result<Outputs> {
    let (model, mean, eigen) = read_model(model_dir).context("model stage failed")?;
    let (data, _) = load(input, settings)?;
    let sigma = settings.sigma.unwrap_or(model.sigma);
    let centered = center_dataset(&data, &mean).context("centering stage failed")?;
    let l = settings.max_components.map_or(model.components, |k| k.min(model.components));
    let basis = EigenBasis::new(&eigen, l);
    let results = estimate_all_scores(&centered, &basis, sigma);
    let truncated = eigen.truncated(l);
    let mut out = Outputs::new(settings.output_dir());
    out.add("scores.csv", scores_csv(&data, &results, l)?);
    out.add("fitted.csv", fitted_csv(&data, &results, &mean.values, &truncated)?);
    let ok = results.iter().filter(|r| r.is_ok()).count();
    out.stdout = format!("scored {ok} of {} subjects with {l} components\n", data.n());
    Ok(out)
}

pub fn cmd_simulate(density: Density, m: usize, n: usize, replicate: usize, settings: &Settings) -> Result<Outputs> {
    let mut cfg = SimConfig::standard(density, m, settings.dl);
    cfg.n = n;
    cfg.seed = settings.seed();
    if let Some(s) = settings.sigma {
        cfg.sigma_eps = s;
    }
    cfg.validate()?;
    let sim = generate_dataset(&cfg, replicate)?;
    let data = apply_detection_limit(&sim.dataset, cfg.dl)?;
    let mut out = Outputs::new(settings.output_dir());
    out.add("data.csv", dataset_to_csv(&data)?);
    out.add(
        "truth.csv",
        table(
            &["subject_id", "xi_1"],
            data.trajectories().iter().zip(&sim.scores).map(|(tr, x)| vec![tr.subject_id().to_string(), x.to_string()]),
        )?,
    );
    out.stdout = format!(
        "{} subjects, {} observations, {:.2}% censored\n",
        data.n(),
        data.total_observations(),
        100.0 * data.censored_fraction()
    );
    Ok(out)
}

fn replicates(settings: &Settings, quick: bool) -> usize {
    settings.replicates.unwrap_or(if quick { 25 } else { 100 })
}

fn status(run: &ReplicateRun, i: usize) -> String {
    match &run.rows[i].result {
        Ok(_) => "ok".into(),
        Err(e) => e.to_string(),
    }
}

pub fn table1(settings: &Settings, quick: bool) -> Result<(String, String)> {
    let reps = replicates(settings, quick);
    let mut rows = Vec::new();
    let mut per = Vec::new();
    for density in [Density::Sparse, Density::Dense] {
        for dl in [Some(0.0), Some(-1.0), None] {
            let mut cfg = SimConfig::standard(density, 100, dl);
            cfg.seed = settings.seed();
            cfg.replicates = reps;
            let run = run_replicates(&cfg, Study::Eigen, &EigenStudyOptions::default())?;
            let first = run.rows[0].result.as_ref().ok();
            let x1000 = |v: Option<f64>| fmt_opt(v.map(|v| 1000.0 * v));
            rows.push(vec![
                density.name().to_string(),
                dl_label(dl),
                reps.to_string(),
                run.failed.to_string(),
                x1000(first.and_then(|f| f.ise_local)),
                x1000(first.and_then(|f| f.ise_naive)),
                x1000(run.aggregate.ise_local),
                x1000(run.aggregate.ise_naive),
                fmt_opt(run.aggregate.imse_local),
                fmt_opt(run.aggregate.imse_naive),
            ]);
            for (i, row) in run.rows.iter().enumerate() {
                let r = row.result.as_ref().ok();
                per.push(vec![
                    density.name().to_string(),
                    dl_label(dl),
                    i.to_string(),
                    status(&run, i),
                    fmt_opt(r.and_then(|r| r.ise_local)),
                    fmt_opt(r.and_then(|r| r.ise_naive)),
                    fmt_opt(r.and_then(|r| r.imse_local)),
                    fmt_opt(r.and_then(|r| r.imse_naive)),
                    fmt_opt(r.and_then(|r| r.censored_fraction)),
                ]);
            }
        }
    }
    let summary = table(
        &[
            "density", "dl", "replicates", "failed", "single_local_x1000", "single_naive_x1000",
            "mean_local_x1000", "mean_naive_x1000", "imse_local", "imse_naive",
        ],
        rows,
    )?;
    let detail = table(
        &["density", "dl", "replicate", "status", "ise_local", "ise_naive", "imse_local", "imse_naive", "censored_fraction"],
        per,
    )?;
    Ok((summary, detail))
}

pub fn table2(settings: &Settings, quick: bool) -> Result<(String, String)> {
    let reps = replicates(settings, quick);
    let mut rows = Vec::new();
    let mut per = Vec::new();
    for density in [Density::Sparse, Density::Dense] {
        for dl in [0.0, -1.0] {
            for m in [100, 200, 500, 1000] {
                let mut cfg = SimConfig::standard(density, m, Some(dl));
                cfg.seed = settings.seed();
                cfg.replicates = reps;
                let run = run_replicates(&cfg, Study::Scores, &EigenStudyOptions::default())?;
                let a = run.aggregate;
                let x100 = |v: Option<f64>| fmt_opt(v.map(|v| 100.0 * v));
                rows.push(vec![
                    density.name().to_string(),
                    dl.to_string(),
                    m.to_string(),
                    reps.to_string(),
                    run.failed.to_string(),
                    fmt_opt(a.score_mean),
                    fmt_opt(a.score_var),
                    x100(a.mse_star),
                    x100(a.mse_dstar),
                    fmt_opt(a.score_var_trad),
                    x100(a.mse_star_trad),
                ]);
                for (i, row) in run.rows.iter().enumerate() {
                    let r = row.result.as_ref().ok();
                    per.push(vec![
                        density.name().to_string(),
                        dl.to_string(),
                        m.to_string(),
                        i.to_string(),
                        status(&run, i),
                        fmt_opt(r.and_then(|r| r.score_mean)),
                        fmt_opt(r.and_then(|r| r.score_var)),
                        fmt_opt(r.and_then(|r| r.mse_star)),
                        fmt_opt(r.and_then(|r| r.mse_dstar)),
                        fmt_opt(r.and_then(|r| r.score_var_trad)),
                        fmt_opt(r.and_then(|r| r.mse_star_trad)),
                    ]);
                }
            }
        }
    }
    let summary = table(
        &[
            "density", "dl", "m", "replicates", "failed", "mean", "variance", "mse_star_x100",
            "mse_dstar_x100", "variance_trad", "mse_star_trad_x100",
        ],
        rows,
    )?;
    let detail = table(
        &["density", "dl", "m", "replicate", "status", "mean", "variance", "mse_star", "mse_dstar", "variance_trad", "mse_star_trad"],
        per,
    )?;
    Ok((summary, detail))
}

pub fn cmd_reproduce(kind: TableKind, quick: bool, settings: &Settings) -> Result<Outputs> {
    let (name, (summary, detail)) = match kind {
        TableKind::Table1 => ("table1", table1(settings, quick)?),
        TableKind::Table2 => ("table2", table2(settings, quick)?),
    };
    let mut out = Outputs::new(settings.output_dir());
    out.stdout = summary.clone();
    out.add(&format!("{name}.csv"), summary);
    out.add(&format!("{name}_replicates.csv"), detail);
    Ok(out)
}

pub fn cmd_export_grid(settings: &Settings) -> Result<Outputs> {
    let (a, b) = settings.domain()?.unwrap_or((0.0, 1.0));
    let grid = make_uniform_grid(a, b, settings.grid_size.unwrap_or(100))?;
    let mut out = Outputs::new(settings.output_dir());
    out.add(
        "grid.csv",
        table(
            &["time", "weight"],
            grid.points().iter().zip(grid.weights()).map(|(t, w)| vec![t.to_string(), w.to_string()]),
        )?,
    );
    out.stdout = format!("{} grid points on [{a}, {b}]\n", grid.len());
    Ok(out)
}

/// Parses an in-memory CSV the same way `fit` reads its input.
pub fn dataset_from_str(text: &str, settings: &Settings) -> Result<Dataset> {
    parse_csv(text, &IngestOptions { detection_limit: settings.dl, domain: settings.domain()? })
}
