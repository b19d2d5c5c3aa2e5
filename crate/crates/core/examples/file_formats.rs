//! Write and read XYZ, PLY, OBJ and run manifests.

use pcdenoise::geometry::shapes;
use pcdenoise::io::{read_mesh, read_point_cloud, write_mesh, write_point_cloud, RunManifest};
use pcdenoise::pipeline::fixture;
use pcdenoise::prelude::*;

pub fn run() -> pcdenoise::Result<()> {
    let dir = std::env::temp_dir().join(format!("pcdenoise-formats-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
    let (_, cloud) = fixture("cube", 1_000, 4)?;

    for name in ["cloud.xyz", "cloud.ply"] {
        let path = dir.join(name);
        write_point_cloud(&path, &cloud)?;
        let back = read_point_cloud(&path)?;
        let err = cloud
            .points()
            .iter()
            .zip(back.points())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        println!("{name}: {} points, max round-trip error {err:.1e}", back.len());
    }

    let obj = dir.join("torus.obj");
    write_mesh(&obj, &shapes::torus(1.0, 0.3, 24, 12))?;
    let (mesh, dropped) = read_mesh(&obj)?;
    println!("torus.obj: {} vertices, {} faces, {dropped} dropped", mesh.vertices().len(), mesh.faces().len());

    let mut m = RunManifest::new();
    m.set("input", dir.join("cloud.xyz").display());
    m.extend(NoiseSpec::gaussian(0.02, 9).to_kv());
    print!("{}", m.to_text());
    assert_eq!(RunManifest::parse(&m.to_text())?, m);

    let _ = std::fs::remove_dir_all(&dir);
    Ok(())
}

fn main() -> pcdenoise::Result<()> {
    run()
}
