//! Corrupt a clean cloud with Gaussian and simulated LiDAR noise.

use pcdenoise::noise::add_lidar_noise_traced;
use pcdenoise::pipeline::fixture;
use pcdenoise::prelude::*;

pub fn run() -> pcdenoise::Result<()> {
    let (_, clean) = fixture("torus", 5_000, 3)?;
    let (radius, diagonal) = bounding_scales(&clean);
    println!("bounding radius {radius:.4}, box diagonal {diagonal:.4}");

    for level in [0.01, 0.02, 0.03] {
        let (noisy, sigma) = add_gaussian_noise(&clean, &NoiseSpec::gaussian(level, 7))?;
        let rms = (noisy
            .points()
            .iter()
            .zip(clean.points())
            .map(|(a, b)| (a - b).norm_squared())
            .sum::<f64>()
            / (3.0 * clean.len() as f64))
            .sqrt();
        println!("gaussian {level}: sigma_abs {sigma:.5}, per-axis rms {rms:.5}");
    }

    let (_, trace) = add_lidar_noise_traced(&clean, &NoiseSpec::lidar(0.01, 7))?;
    let mean_offset = trace.range_offset.iter().sum::<f64>() / trace.range_offset.len() as f64;
    println!(
        "lidar 0.01: sensor at ({:.2}, {:.2}, {:.2}), mean range offset {mean_offset:.5}",
        trace.sensor.x, trace.sensor.y, trace.sensor.z
    );
    Ok(())
}

fn main() -> pcdenoise::Result<()> {
    run()
}
