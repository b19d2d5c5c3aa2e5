//! Tweedie's formula with an exact mixture score reproduces the brute-force
//! posterior mean.

use pcdenoise::prelude::*;
use pcdenoise::score::FnScore;
use pcdenoise::tweedie::mixture_score;

pub fn run() -> pcdenoise::Result<()> {
    let prior = PointCloud::from_arrays(&[[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.5, 0.0]])?;
    let queries = PointCloud::from_arrays(&[[0.0, 0.0, 0.0], [0.8, 0.1, 0.2], [-0.2, 1.0, -0.3]])?;
    for sigma in [0.1, 0.3, 1.0] {
        let p = prior.clone();
        let field = FnScore::new("mixture", move |y: &Point3| mixture_score(y, &p, sigma));
        let out = tweedie_denoise(&queries, &field, sigma)?;
        let worst = queries
            .points()
            .iter()
            .zip(out.points())
            .map(|(q, x)| (x - posterior_mean_oracle(q, &prior, sigma)).norm())
            .fold(0.0, f64::max);
        println!("sigma {sigma}: first query -> {:.4?}, max deviation {worst:.1e}", out.points()[0].as_slice());
    }
    Ok(())
}

fn main() -> pcdenoise::Result<()> {
    run()
}
