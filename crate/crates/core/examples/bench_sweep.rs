//! A small shapes × levels × seeds sweep with the KDE backend.

use pcdenoise::pipeline::{bench_summary_csv, run_bench, BenchConfig};

pub fn run() -> pcdenoise::Result<()> {
    let cfg = BenchConfig {
        shapes: vec!["sphere".into(), "cube".into()],
        levels: vec![0.01, 0.02],
        seeds: 2,
        points: 3_000,
        ..BenchConfig::default()
    };
    let rows = run_bench(&cfg, |r| {
        println!("{:<6} {:.2} seed {}: CD ratio {:.3}", r.shape, r.level, r.seed, r.cd_ratio());
    })?;
    print!("{}", bench_summary_csv(&rows));
    Ok(())
}

fn main() -> pcdenoise::Result<()> {
    run()
}
