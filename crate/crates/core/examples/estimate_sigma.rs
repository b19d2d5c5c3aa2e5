//! Recover an unknown noise level by minimizing the total variation of the
//! denoised cloud over σ.

use pcdenoise::pipeline::fixture;
use pcdenoise::prelude::*;

pub fn run() -> pcdenoise::Result<()> {
    let (_, clean) = fixture("sphere", 5_000, 2)?;
    let (noisy, sigma_abs) = add_gaussian_noise(&clean, &NoiseSpec::gaussian(0.02, 5))?;
    let (noisy_n, t) = normalize_to_unit_sphere(&noisy);
    let sigma_true = t.scale_length(sigma_abs);

    let field = KdeScore::new(&noisy_n, sigma_true)?;
    let est = estimate_sigma(&noisy_n, &field, &TvpcConfig::default(), &SigmaSearchConfig::default())?;
    println!(
        "true {sigma_true:.4}, estimated {:.4} ({} evaluations, unimodal {})",
        est.sigma_star,
        est.curve.len(),
        est.unimodal
    );
    for (s, g) in est.curve.iter().step_by(4) {
        println!("  sigma {s:.4}  tv {g:.3}");
    }
    Ok(())
}

fn main() -> pcdenoise::Result<()> {
    run()
}
