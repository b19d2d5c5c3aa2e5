//! Chamfer and point-to-mesh distances, including the unit-sphere protocol.

use pcdenoise::geometry::{sample_mesh, shapes, SamplingMode};
use pcdenoise::metrics::evaluate;
use pcdenoise::prelude::*;

pub fn run() -> pcdenoise::Result<()> {
    let square = shapes::unit_square();
    let lifted = PointCloud::from_arrays(&[[0.5, 0.5, 0.02]])?;
    println!("point 0.02 above the square: P2M {:.2e}", point_to_mesh_distance(&lifted, &square)?);

    let mesh = shapes::by_name("cube").expect("bundled shape");
    let a = sample_mesh(&mesh, 3_000, 1, SamplingMode::Uniform)?;
    let b = sample_mesh(&mesh, 3_000, 2, SamplingMode::Uniform)?;
    println!("two samples of the cube: CD {:.3e}", chamfer_distance(&a, &b)?);

    // Scaling everything by 50 leaves the normalized metrics unchanged.
    let big = |c: &PointCloud| c.map(|p| p * 50.0);
    let r1 = evaluate(&a, &b, Some(&mesh))?;
    let r2 = evaluate(&big(&a)?, &big(&b)?, Some(&mesh.map_vertices(|p| p * 50.0)?))?;
    println!("normalized CD {:.6e} vs {:.6e}, P2M {:.3e}", r1.cd, r2.cd, r1.p2m.unwrap());
    Ok(())
}

fn main() -> pcdenoise::Result<()> {
    run()
}
