//! Train the network score on a noisy sphere, then denoise with it.
//!
//! `cargo run --release --example train_network -- [epochs]`

use std::time::Instant;

use pcdenoise::pipeline::fixture;
use pcdenoise::prelude::*;
use pcdenoise::score::train_score_network_with;

pub fn run(epochs: usize) -> pcdenoise::Result<()> {
    let (_, clean) = fixture("sphere", 10_000, 0)?;
    let (noisy, _) = add_gaussian_noise(&clean, &NoiseSpec::gaussian(0.02, 1))?;
    let (noisy_n, t) = normalize_to_unit_sphere(&noisy);
    let clean_n = t.apply(&clean)?;

    let cfg = TrainConfig { epochs, ..TrainConfig::default() };
    let start = Instant::now();
    let out = train_score_network_with(&noisy_n, &cfg, |e| {
        if e.epoch % 10 == 0 || e.epoch + 1 == epochs {
            println!("epoch {:>3}  sigma_t {:.4}  loss {:.4}", e.epoch, e.sigma_t, e.loss);
        }
    })?;
    println!("trained in {:.1}s", start.elapsed().as_secs_f64());

    let field = out.field(&noisy_n)?;
    let sigma = t.scale_length(0.02 * bounding_scales(&clean).0);
    let den = tweedie_denoise(&noisy_n, &field, sigma)?;
    let before = chamfer_distance(&noisy_n, &clean_n)?;
    let after = chamfer_distance(&den, &clean_n)?;
    println!("CD x1e4: noisy {:.3}  denoised {:.3}  ratio {:.3}", before * 1e4, after * 1e4, after / before);
    Ok(())
}

fn main() -> pcdenoise::Result<()> {
    run(std::env::args().nth(1).map_or(200, |s| s.parse().expect("epochs")))
}
