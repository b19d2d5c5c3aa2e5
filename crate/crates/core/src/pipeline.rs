//! End-to-end commands: corrupt, train, denoise, evaluate, benchmark.
//!
//! Denoising happens in the unit-sphere frame of the input cloud; `sigma`,
//! KDE bandwidths and search brackets are given in that frame. Results are
//! mapped back to the input's coordinates before writing.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::geometry::{normalize_to_unit_sphere, sample_mesh, shapes, PointCloud, SamplingMode, TriangleMesh};
use crate::io::{
    load_weights, read_mesh, read_point_cloud, save_weights, weights_header_path, write_point_cloud, write_report,
    RunManifest,
};
use crate::metrics::{evaluate, evaluate_against_mesh, MetricReport, DISPLAY_SCALE};
use crate::noise::{add_gaussian_noise, apply_noise, NoiseSpec};
use crate::score::{
    evaluate_score, train_score_network_with, KdeScore, NetworkScore, ScoreField, TrainConfig, TrainOutcome,
};
use crate::tvpc::{estimate_sigma_from_scores, tv_pc, SigmaEstimate, SigmaSearchConfig, TvpcConfig};
use crate::tweedie::tweedie_from_scores;

/// `<path><suffix>`, keeping the full original file name.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn cmd_add_noise(input: &Path, output: &Path, spec: &NoiseSpec) -> Result<RunManifest> {
    spec.validate()?;
    let clean = read_point_cloud(input)?;
    let (noisy, sigma_abs) = apply_noise(&clean, spec)?;
    write_point_cloud(output, &noisy)?;
    let mut m = RunManifest::new();
    m.set("command", "add-noise");
    m.set("input", input.display());
    m.set("output", output.display());
    m.extend(spec.to_kv());
    if let Some(s) = sigma_abs {
        m.set("noise.sigma_abs", s);
    }
    m.save(&sibling(output, ".manifest"))?;
    Ok(m)
}

/// Trains on the unit-sphere-normalized input and writes the weights, a text
/// header with the configuration, and a per-epoch loss CSV.
pub fn cmd_train(
    input: &Path,
    out_weights: &Path,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64, f64),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let cloud = read_point_cloud(input)?;
    let (normalized, _) = normalize_to_unit_sphere(&cloud);
    let start = Instant::now();
    let outcome = train_score_network_with(&normalized, cfg, |e| on_epoch(e.epoch, e.sigma_t, e.loss))?;
    let elapsed = start.elapsed().as_secs_f64();
    save_weights(out_weights, &outcome.weights, outcome.k_feat)?;

    let mut m = RunManifest::new();
    m.set("command", "train");
    m.set("input", input.display());
    m.set("weights", out_weights.display());
    m.extend(cfg.to_kv());
    m.set("train.feature_scale", outcome.feature_scale);
    m.set("train.final_loss", outcome.history.last().map_or(f64::NAN, |e| e.loss));
    m.set("timing.train_seconds", format!("{elapsed:.3}"));
    m.save(&weights_header_path(out_weights))?;

    let mut csv = String::from("epoch,sigma_t,loss\n");
    for e in &outcome.history {
        writeln!(csv, "{},{:.9e},{:.9e}", e.epoch, e.sigma_t, e.loss).unwrap();
    }
    let csv_path = sibling(out_weights, ".loss.csv");
    std::fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScoreSource {
    /// Gaussian-kernel density of the input itself, bandwidth in unit-sphere units.
    Kde { bandwidth: f64 },
    Weights(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaChoice {
    /// Known noise level in unit-sphere units.
    Given(f64),
    Estimate,
}

#[derive(Debug, Clone)]
pub struct DenoiseArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    pub source: ScoreSource,
    pub sigma: SigmaChoice,
    pub tvpc: TvpcConfig,
    pub search: SigmaSearchConfig,
    pub reference: Option<PathBuf>,
    pub mesh: Option<PathBuf>,
}

/// Stage timings in seconds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Timings {
    pub field_build: f64,
    pub score_eval: f64,
    pub sigma_search: f64,
    pub tweedie: f64,
}

impl Timings {
    /// Score evaluation plus the update itself.
    pub fn inference(&self) -> f64 {
        self.score_eval + self.tweedie
    }
}

#[derive(Debug, Clone)]
pub struct DenoiseResult {
    /// In the input's coordinates.
    pub denoised: PointCloud,
    /// Noise level used, unit-sphere units.
    pub sigma_abs: f64,
    pub estimate: Option<SigmaEstimate>,
    pub tv_before: f64,
    pub tv_after: f64,
    pub backend: &'static str,
    pub timings: Timings,
}

/// Builds the field over `normalized` and runs one Tweedie step.
pub fn denoise_normalized(
    normalized: &PointCloud,
    source: &ScoreSource,
    sigma: SigmaChoice,
    tvpc: &TvpcConfig,
    search: &SigmaSearchConfig,
) -> Result<(PointCloud, f64, Option<SigmaEstimate>, &'static str, Timings)> {
    let mut t = Timings::default();
    let start = Instant::now();
    let field: Box<dyn ScoreField> = match source {
        ScoreSource::Kde { bandwidth } => Box::new(KdeScore::new(normalized, *bandwidth)?),
        ScoreSource::Weights(path) => {
            let (w, k) = load_weights(path)?;
            Box::new(NetworkScore::new(w, normalized, k)?)
        }
    };
    t.field_build = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let scores = evaluate_score(field.as_ref(), normalized);
    t.score_eval = start.elapsed().as_secs_f64();

    let (sigma_abs, estimate) = match sigma {
        SigmaChoice::Given(s) => (s, None),
        SigmaChoice::Estimate => {
            let start = Instant::now();
            let est = estimate_sigma_from_scores(normalized, &scores, tvpc, search)?;
            t.sigma_search = start.elapsed().as_secs_f64();
            (est.sigma_star, Some(est))
        }
    };
    let start = Instant::now();
    let out = tweedie_from_scores(normalized, &scores, sigma_abs)?;
    t.tweedie = start.elapsed().as_secs_f64();
    Ok((out, sigma_abs, estimate, field.backend(), t))
}

pub fn cmd_denoise(args: &DenoiseArgs) -> Result<DenoiseResult> {
    if let SigmaChoice::Given(s) = args.sigma {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::usage(format!("--sigma must be positive, got {s}")));
        }
    }
    let noisy = read_point_cloud(&args.input)?;
    let (normalized, transform) = normalize_to_unit_sphere(&noisy);
    let (den_n, sigma_abs, estimate, backend, timings) =
        denoise_normalized(&normalized, &args.source, args.sigma, &args.tvpc, &args.search)?;
    let tv_before = tv_pc(&normalized, &args.tvpc)?;
    let tv_after = tv_pc(&den_n, &args.tvpc)?;
    let denoised = transform.invert(&den_n)?;
    write_point_cloud(&args.output, &denoised)?;

    let mut m = RunManifest::new();
    m.set("command", "denoise");
    m.set("input", args.input.display());
    m.set("output", args.output.display());
    match &args.source {
        ScoreSource::Kde { bandwidth } => {
            m.set("field.backend", "kde");
            m.set("field.kde_bandwidth", bandwidth);
        }
        ScoreSource::Weights(p) => {
            m.set("field.backend", "network");
            m.set("field.weights", p.display());
        }
    }
    match args.sigma {
        SigmaChoice::Given(s) => m.set("denoise.sigma", s),
        SigmaChoice::Estimate => {
            m.set("denoise.sigma", "estimate");
            m.extend(args.search.to_kv());
        }
    }
    m.extend(args.tvpc.to_kv());
    if let Some(r) = &args.reference {
        m.set("eval.reference", r.display());
    }
    if let Some(r) = &args.mesh {
        m.set("eval.mesh", r.display());
    }
    let manifest_path = sibling(&args.output, ".manifest");
    m.save(&manifest_path)?;

    let mut report: Vec<(String, String)> = vec![
        ("manifest".into(), manifest_path.display().to_string()),
        ("backend".into(), backend.into()),
        ("sigma_abs".into(), sigma_abs.to_string()),
        ("sigma_abs_input_units".into(), (sigma_abs * transform.radius).to_string()),
        ("tvpc_before".into(), format!("{tv_before:.9e}")),
        ("tvpc_after".into(), format!("{tv_after:.9e}")),
    ];
    if let Some(est) = &estimate {
        let curve = sibling(&args.output, ".curve.csv");
        let mut buf = Vec::new();
        est.write_curve_csv(&mut buf).expect("writing to memory");
        std::fs::write(&curve, buf).map_err(|e| Error::io(&curve, e))?;
        report.push(("sigma_star".into(), est.sigma_star.to_string()));
        report.push(("sigma_curve".into(), curve.display().to_string()));
        report.push(("sigma_curve_flat".into(), est.flat.to_string()));
        report.push(("sigma_curve_unimodal".into(), est.unimodal.to_string()));
    }
    if args.reference.is_some() || args.mesh.is_some() {
        let before = eval_files(&noisy, args.reference.as_deref(), args.mesh.as_deref())?;
        let after = eval_files(&denoised, args.reference.as_deref(), args.mesh.as_deref())?;
        report.push(("cd_before_x1e4".into(), format!("{:.6}", before.cd * DISPLAY_SCALE)));
        report.push(("cd_after_x1e4".into(), format!("{:.6}", after.cd * DISPLAY_SCALE)));
        if let (Some(b), Some(a)) = (before.p2m, after.p2m) {
            report.push(("p2m_before_x1e4".into(), format!("{:.6}", b * DISPLAY_SCALE)));
            report.push(("p2m_after_x1e4".into(), format!("{:.6}", a * DISPLAY_SCALE)));
        }
        report.push(("metric_frame".into(), after.scale_note));
    }
    report.push(("timing.field_build_s".into(), format!("{:.6}", timings.field_build)));
    report.push(("timing.score_eval_s".into(), format!("{:.6}", timings.score_eval)));
    report.push(("timing.sigma_search_s".into(), format!("{:.6}", timings.sigma_search)));
    report.push(("timing.tweedie_s".into(), format!("{:.6}", timings.tweedie)));
    write_report(&sibling(&args.output, ".report"), &report)?;

    Ok(DenoiseResult {
        denoised,
        sigma_abs,
        estimate,
        tv_before,
        tv_after,
        backend,
        timings,
    })
}

fn eval_files(cloud: &PointCloud, reference: Option<&Path>, mesh: Option<&Path>) -> Result<MetricReport> {
    let mesh = mesh.map(read_mesh).transpose()?.map(|(m, _)| m);
    match reference {
        Some(r) => evaluate(cloud, &read_point_cloud(r)?, mesh.as_ref()),
        None => match &mesh {
            Some(m) => evaluate_against_mesh(cloud, m),
            None => Err(Error::usage("a reference cloud or mesh is required")),
        },
    }
}

pub fn cmd_eval(denoised: &Path, reference: Option<&Path>, mesh: Option<&Path>, out: Option<&Path>) -> Result<MetricReport> {
    if reference.is_none() && mesh.is_none() {
        return Err(Error::usage("a reference cloud or mesh is required"));
    }
    let cloud = read_point_cloud(denoised)?;
    let report = eval_files(&cloud, reference, mesh)?;
    if let Some(out) = out {
        let mut kv = vec![("input".to_string(), denoised.display().to_string())];
        if let Some(r) = reference {
            kv.push(("reference".into(), r.display().to_string()));
        }
        if let Some(m) = mesh {
            kv.push(("mesh".into(), m.display().to_string()));
        }
        kv.extend(report.to_kv());
        write_report(out, &kv)?;
    }
    Ok(report)
}

/// Clean fixture: the named analytic shape sampled with blue-noise elimination.
pub fn fixture(shape: &str, points: usize, seed: u64) -> Result<(TriangleMesh, PointCloud)> {
    let mesh = shapes::by_name(shape)
        .ok_or_else(|| Error::usage(format!("unknown shape '{shape}' (known: {})", shapes::NAMES.join(", "))))?;
    let cloud = sample_mesh(&mesh, points, seed, SamplingMode::BlueNoise)?;
    Ok((mesh, cloud))
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub shapes: Vec<String>,
    /// Gaussian noise levels relative to the bounding-sphere radius.
    pub levels: Vec<f64>,
    pub seeds: u64,
    pub points: usize,
    /// `None` uses the KDE backend with bandwidth equal to the true noise level.
    pub weights: Option<PathBuf>,
    pub estimate_sigma: bool,
    pub tvpc: TvpcConfig,
    pub search: SigmaSearchConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            shapes: vec!["sphere".into(), "torus".into()],
            levels: vec![0.01, 0.02, 0.03],
            seeds: 3,
            points: 10_000,
            weights: None,
            estimate_sigma: false,
            tvpc: TvpcConfig::default(),
            search: SigmaSearchConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub shape: String,
    pub level: f64,
    pub seed: u64,
    pub points: usize,
    /// True noise level in the noisy cloud's unit-sphere frame.
    pub sigma_true: f64,
    pub sigma_used: f64,
    pub cd_noisy: f64,
    pub cd_denoised: f64,
    pub p2m_noisy: f64,
    pub p2m_denoised: f64,
    pub timings: Timings,
}

impl BenchRow {
    pub fn cd_ratio(&self) -> f64 {
        self.cd_denoised / self.cd_noisy
    }
}

/// One benchmark cell: sample, corrupt, denoise, measure against the clean
/// cloud and mesh in the clean cloud's unit-sphere frame.
pub fn bench_case(cfg: &BenchConfig, shape: &str, level: f64, seed: u64) -> Result<BenchRow> {
    let (mesh, clean) = fixture(shape, cfg.points, seed)?;
    let spec = NoiseSpec::gaussian(level, seed.wrapping_add(1_000_003));
    let (noisy, sigma_abs) = add_gaussian_noise(&clean, &spec)?;
    let (normalized, transform) = normalize_to_unit_sphere(&noisy);
    let sigma_true = transform.scale_length(sigma_abs);
    let source = match &cfg.weights {
        Some(p) => ScoreSource::Weights(p.clone()),
        None => ScoreSource::Kde { bandwidth: sigma_true },
    };
    let choice = if cfg.estimate_sigma {
        SigmaChoice::Estimate
    } else {
        SigmaChoice::Given(sigma_true)
    };
    let (den_n, sigma_used, _, _, timings) = denoise_normalized(&normalized, &source, choice, &cfg.tvpc, &cfg.search)?;
    let denoised = transform.invert(&den_n)?;
    let before = evaluate(&noisy, &clean, Some(&mesh))?;
    let after = evaluate(&denoised, &clean, Some(&mesh))?;
    Ok(BenchRow {
        shape: shape.to_string(),
        level,
        seed,
        points: cfg.points,
        sigma_true,
        sigma_used,
        cd_noisy: before.cd,
        cd_denoised: after.cd,
        p2m_noisy: before.p2m.unwrap_or(f64::NAN),
        p2m_denoised: after.p2m.unwrap_or(f64::NAN),
        timings,
    })
}

pub fn run_bench(cfg: &BenchConfig, mut on_row: impl FnMut(&BenchRow)) -> Result<Vec<BenchRow>> {
    if cfg.shapes.is_empty() || cfg.levels.is_empty() || cfg.seeds == 0 {
        return Err(Error::usage("benchmark needs at least one shape, level and seed"));
    }
    let mut rows = Vec::new();
    for shape in &cfg.shapes {
        for &level in &cfg.levels {
            for seed in 0..cfg.seeds {
                let row = bench_case(cfg, shape, level, seed)?;
                on_row(&row);
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

pub fn bench_rows_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from(
        "shape,level,seed,points,sigma_true,sigma_used,cd_noisy_x1e4,cd_denoised_x1e4,cd_ratio,p2m_noisy_x1e4,p2m_denoised_x1e4,score_eval_s,tweedie_s,sigma_search_s\n",
    );
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{:.6e},{:.6e},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.shape,
            r.level,
            r.seed,
            r.points,
            r.sigma_true,
            r.sigma_used,
            r.cd_noisy * DISPLAY_SCALE,
            r.cd_denoised * DISPLAY_SCALE,
            r.cd_ratio(),
            r.p2m_noisy * DISPLAY_SCALE,
            r.p2m_denoised * DISPLAY_SCALE,
            r.timings.score_eval,
            r.timings.tweedie,
            r.timings.sigma_search,
        )
        .unwrap();
    }
    s
}

/// Mean ± sample standard deviation of the CD ratio per (shape, level).
pub fn bench_summary_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from("shape,level,runs,cd_ratio_mean,cd_ratio_std\n");
    let mut keys: Vec<(String, f64)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|(sh, l)| *sh == r.shape && *l == r.level) {
            keys.push((r.shape.clone(), r.level));
        }
    }
    for (shape, level) in keys {
        let v: Vec<f64> = rows
            .iter()
            .filter(|r| r.shape == shape && r.level == level)
            .map(BenchRow::cd_ratio)
            .collect();
        let (mean, std) = mean_std(&v);
        writeln!(s, "{shape},{level},{},{mean:.6},{std:.6}", v.len()).unwrap();
    }
    s
}

pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs the sweep and writes `<out>` (per-run rows), `<out>.summary.csv` and
/// `<out>.manifest`.
pub fn cmd_bench(cfg: &BenchConfig, out: &Path, on_row: impl FnMut(&BenchRow)) -> Result<Vec<BenchRow>> {
    let rows = run_bench(cfg, on_row)?;
    std::fs::write(out, bench_rows_csv(&rows)).map_err(|e| Error::io(out, e))?;
    let summary = sibling(out, ".summary.csv");
    std::fs::write(&summary, bench_summary_csv(&rows)).map_err(|e| Error::io(&summary, e))?;
    let mut m = RunManifest::new();
    m.set("command", "bench");
    m.set("bench.shapes", cfg.shapes.join(","));
    m.set(
        "bench.levels",
        cfg.levels.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
    );
    m.set("bench.seeds", cfg.seeds);
    m.set("bench.points", cfg.points);
    m.set("bench.estimate_sigma", cfg.estimate_sigma);
    match &cfg.weights {
        Some(p) => m.set("field.weights", p.display()),
        None => m.set("field.kde_bandwidth", "true noise level"),
    }
    m.extend(cfg.tvpc.to_kv());
    m.extend(cfg.search.to_kv());
    m.save(&sibling(out, ".manifest"))?;
    Ok(rows)
}
