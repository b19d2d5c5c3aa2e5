use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use pcdenoise::io::{write_mesh, write_point_cloud};
use pcdenoise::noise::{NoiseKind, NoiseSpec};
use pcdenoise::pipeline::{self, BenchConfig, DenoiseArgs, ScoreSource, SigmaChoice};
use pcdenoise::score::TrainConfig;
use pcdenoise::tvpc::{SigmaSearchConfig, TvpcConfig, WeightMode};
use pcdenoise::{Error, Result};

#[derive(Parser)]
#[command(name = "pcdenoise", version, about = "Point cloud denoising by score estimation and Tweedie's formula")]
struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample a bundled analytic shape.
    Fixture {
        #[arg(long)]
        shape: String,
        #[arg(long, default_value_t = 10_000)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
        /// Also write the shape's mesh as OBJ.
        #[arg(long)]
        mesh: Option<PathBuf>,
    },
    /// Corrupt a clean cloud with synthetic noise.
    AddNoise {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        #[arg(long, default_value = "gaussian")]
        model: NoiseKind,
        #[arg(long)]
        level: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a score network on a noisy cloud.
    Train {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long, default_value_t = 2e-4)]
        lr: f64,
        #[arg(long, default_value_t = 1e-4)]
        weight_decay: f64,
        #[arg(long, default_value_t = 0.05)]
        sigma_max: f64,
        #[arg(long, default_value_t = 0.005)]
        sigma_min: f64,
        #[arg(long, default_value_t = 4096)]
        batch: usize,
        #[arg(long, default_value_t = 16)]
        k_feat: usize,
        #[arg(long, default_value_t = 64)]
        hidden: usize,
        #[arg(long)]
        steps_per_epoch: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Denoise a cloud in one Tweedie step.
    #[command(group(ArgGroup::new("field").required(true).args(["weights", "kde_bandwidth"])))]
    #[command(group(ArgGroup::new("level").required(true).args(["sigma", "estimate_sigma"])))]
    Denoise {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        #[arg(long)]
        weights: Option<PathBuf>,
        /// KDE bandwidth in unit-sphere units.
        #[arg(long)]
        kde_bandwidth: Option<f64>,
        /// Noise level in unit-sphere units.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        estimate_sigma: bool,
        #[command(flatten)]
        tv: TvArgs,
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        mesh: Option<PathBuf>,
    },
    /// Chamfer and point-to-mesh distances against a reference.
    Eval {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        mesh: Option<PathBuf>,
        #[arg(long = "out")]
        output: Option<PathBuf>,
    },
    /// Shapes × levels × seeds sweep.
    Bench {
        #[arg(long = "out")]
        output: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "sphere,torus")]
        shapes: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.02,0.03")]
        levels: Vec<f64>,
        #[arg(long, default_value_t = 3)]
        seeds: u64,
        #[arg(long, default_value_t = 10_000)]
        points: usize,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        estimate_sigma: bool,
        #[command(flatten)]
        tv: TvArgs,
    },
}

#[derive(Args)]
struct TvArgs {
    #[arg(long, default_value_t = 4)]
    tv_k: usize,
    #[arg(long, default_value_t = 1e-4)]
    tv_epsilon: f64,
    #[arg(long, default_value = "constant")]
    tv_weights: WeightMode,
    #[arg(long, default_value_t = 0.05)]
    tv_scale: f64,
    #[arg(long)]
    tv_symmetric: bool,
    #[arg(long, default_value_t = 1e-3)]
    sigma_lo: f64,
    #[arg(long, default_value_t = 0.1)]
    sigma_hi: f64,
}

impl TvArgs {
    fn configs(&self) -> (TvpcConfig, SigmaSearchConfig) {
        (
            TvpcConfig {
                k: self.tv_k,
                epsilon: self.tv_epsilon,
                weight_mode: self.tv_weights,
                gaussian_scale: self.tv_scale,
                symmetric: self.tv_symmetric,
            },
            SigmaSearchConfig {
                sigma_lo: self.sigma_lo,
                sigma_hi: self.sigma_hi,
                ..SigmaSearchConfig::default()
            },
        )
    }
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Fixture { shape, points, seed, output, mesh } => {
            let (m, cloud) = pipeline::fixture(&shape, points, seed)?;
            write_point_cloud(&output, &cloud)?;
            if let Some(path) = mesh {
                write_mesh(&path, &m)?;
            }
        }
        Cmd::AddNoise { input, output, model, level, seed } => {
            let spec = match model {
                NoiseKind::Gaussian => NoiseSpec::gaussian(level, seed),
                NoiseKind::Lidar => NoiseSpec::lidar(level, seed),
            };
            let m = pipeline::cmd_add_noise(&input, &output, &spec)?;
            if let Some(s) = m.get("noise.sigma_abs") {
                eprintln!("sigma_abs {s}");
            }
        }
        Cmd::Train {
            input,
            output,
            epochs,
            lr,
            weight_decay,
            sigma_max,
            sigma_min,
            batch,
            k_feat,
            hidden,
            steps_per_epoch,
            seed,
        } => {
            let cfg = TrainConfig {
                epochs,
                learning_rate: lr,
                weight_decay,
                sigma_max,
                sigma_min,
                batch_points: batch,
                k_feat,
                hidden_width: hidden,
                seed,
                steps_per_epoch,
            };
            cfg.validate().map_err(|e| Error::Usage(e.to_string()))?;
            pipeline::cmd_train(&input, &output, &cfg, |epoch, sigma_t, loss| {
                eprintln!("epoch {epoch:>4}  sigma_t {sigma_t:.5}  loss {loss:.6}");
            })?;
        }
        Cmd::Denoise { input, output, weights, kde_bandwidth, sigma, estimate_sigma, tv, reference, mesh } => {
            let source = match (weights, kde_bandwidth) {
                (Some(w), None) => ScoreSource::Weights(w),
                (None, Some(h)) => ScoreSource::Kde { bandwidth: h },
                _ => return Err(Error::Usage("give exactly one of --weights and --kde-bandwidth".into())),
            };
            let sigma = match (sigma, estimate_sigma) {
                (Some(s), false) => SigmaChoice::Given(s),
                (None, true) => SigmaChoice::Estimate,
                _ => return Err(Error::Usage("give exactly one of --sigma and --estimate-sigma".into())),
            };
            let (tvpc, search) = tv.configs();
            let res = pipeline::cmd_denoise(&DenoiseArgs { input, output, source, sigma, tvpc, search, reference, mesh })?;
            eprintln!(
                "backend {}  sigma {:.6}  score {:.3}s  tweedie {:.3}s",
                res.backend, res.sigma_abs, res.timings.score_eval, res.timings.tweedie
            );
        }
        Cmd::Eval { input, reference, mesh, output } => {
            let r = pipeline::cmd_eval(&input, reference.as_deref(), mesh.as_deref(), output.as_deref())?;
            for (k, v) in r.to_kv() {
                println!("{k}={v}");
            }
        }
        Cmd::Bench { output, shapes, levels, seeds, points, weights, estimate_sigma, tv } => {
            let (tvpc, search) = tv.configs();
            let shapes: Vec<String> = shapes.into_iter().filter(|s| !s.is_empty()).collect();
            let cfg = BenchConfig { shapes, levels, seeds, points, weights, estimate_sigma, tvpc, search };
            pipeline::cmd_bench(&cfg, &output, |r| {
                eprintln!("{} {} seed {}: cd ratio {:.4}", r.shape, r.level, r.seed, r.cd_ratio());
            })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("thread pool configured once");
    }
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
