//! Sample the bundled analytic shapes, uniformly and with blue-noise elimination,
//! and compare how evenly the points spread.

use pcdenoise::geometry::{sample_mesh, shapes, NeighborIndex, SamplingMode};

pub fn run() -> pcdenoise::Result<()> {
    for name in shapes::NAMES {
        let mesh = shapes::by_name(name).expect("bundled shape");
        for mode in [SamplingMode::Uniform, SamplingMode::BlueNoise] {
            let cloud = sample_mesh(&mesh, 2_000, 1, mode)?;
            let index = NeighborIndex::build(&cloud);
            let min_gap = cloud
                .points()
                .iter()
                .enumerate()
                .map(|(i, p)| index.knn_excluding(p, 1, Some(i))[0].distance)
                .fold(f64::INFINITY, f64::min);
            println!(
                "{name:<7} {mode:?}: {} faces, area {:.3}, closest pair {min_gap:.4}",
                mesh.faces().len(),
                mesh.area()
            );
        }
    }
    Ok(())
}

fn main() -> pcdenoise::Result<()> {
    run()
}
