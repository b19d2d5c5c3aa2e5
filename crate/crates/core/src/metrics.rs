//! Chamfer and point-to-mesh distances.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{
    normalize_to_unit_sphere, sample_mesh, NeighborIndex, PointCloud, SamplingMode, SphereTransform, TriangleBvh,
    TriangleMesh,
};
use crate::numeric::ordered_sum;

/// Factor applied to metric values for display.
pub const DISPLAY_SCALE: f64 = 1e4;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub cd: f64,
    pub p2m: Option<f64>,
    /// How both inputs were normalized before measuring.
    pub scale_note: String,
}

impl MetricReport {
    pub fn to_kv(&self) -> Vec<(String, String)> {
        let mut kv = vec![
            ("metric.cd".into(), format!("{:.9e}", self.cd)),
            ("metric.cd_x1e4".into(), format!("{:.6}", self.cd * DISPLAY_SCALE)),
            ("metric.cd_convention".into(), "sum of both directions' mean squared nearest distances".into()),
        ];
        if let Some(p) = self.p2m {
            kv.push(("metric.p2m".into(), format!("{p:.9e}")));
            kv.push(("metric.p2m_x1e4".into(), format!("{:.6}", p * DISPLAY_SCALE)));
            kv.push(("metric.p2m_convention".into(), "mean squared distance from points to mesh, one-sided".into()));
        }
        kv.push(("metric.scale_note".into(), self.scale_note.clone()));
        kv
    }
}

/// Mean squared distance from each point of `from` to its nearest point of `to`.
fn one_sided(from: &PointCloud, to: &NeighborIndex) -> f64 {
    let d: Vec<f64> = from.points().par_iter().map(|p| to.nearest(p).sq_distance).collect();
    ordered_sum(&d) / from.len() as f64
}

/// `mean_a min_b ‖a−b‖² + mean_b min_a ‖b−a‖²`.
pub fn chamfer_distance(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("chamfer distance of an empty cloud"));
    }
    let ia = NeighborIndex::build(a);
    let ib = NeighborIndex::build(b);
    Ok(one_sided(a, &ib) + one_sided(b, &ia))
}

/// Mean over points of the squared distance to the nearest triangle.
pub fn point_to_mesh_distance(cloud: &PointCloud, mesh: &TriangleMesh) -> Result<f64> {
    if cloud.is_empty() {
        return Err(Error::invalid("point-to-mesh distance of an empty cloud"));
    }
    if mesh.faces().is_empty() || !(mesh.area() > 0.0) {
        return Err(Error::invalid("mesh has zero area"));
    }
    let bvh = TriangleBvh::build(mesh);
    let d: Vec<f64> = cloud
        .points()
        .par_iter()
        .map(|p| bvh.closest(p).expect("mesh has faces").0)
        .collect();
    Ok(ordered_sum(&d) / cloud.len() as f64)
}

/// Normalizes `cloud`, `reference` and `mesh` with the transform that maps
/// `reference` into the unit sphere, then measures.
pub fn evaluate(cloud: &PointCloud, reference: &PointCloud, mesh: Option<&TriangleMesh>) -> Result<MetricReport> {
    let (reference_n, t) = normalize_to_unit_sphere(reference);
    evaluate_in_frame(cloud, &reference_n, mesh, &t, "reference cloud")
}

/// Seed for the reference cloud drawn from a mesh when no reference cloud is given.
pub const MESH_REFERENCE_SEED: u64 = 0;

/// As [`evaluate`] with only a mesh as reference: the reference cloud is a
/// uniform sample of the mesh with as many points as `cloud`.
pub fn evaluate_against_mesh(cloud: &PointCloud, mesh: &TriangleMesh) -> Result<MetricReport> {
    let reference = sample_mesh(mesh, cloud.len(), MESH_REFERENCE_SEED, SamplingMode::Uniform)?;
    let (reference_n, t) = normalize_to_unit_sphere(&reference);
    evaluate_in_frame(cloud, &reference_n, Some(mesh), &t, "uniform mesh sample")
}

fn evaluate_in_frame(
    cloud: &PointCloud,
    reference_n: &PointCloud,
    mesh: Option<&TriangleMesh>,
    t: &SphereTransform,
    what: &str,
) -> Result<MetricReport> {
    let cloud_n = t.apply(cloud)?;
    let cd = chamfer_distance(&cloud_n, reference_n)?;
    let p2m = match mesh {
        Some(m) => Some(point_to_mesh_distance(&cloud_n, &t.apply_mesh(m)?)?),
        None => None,
    };
    Ok(MetricReport {
        cd,
        p2m,
        scale_note: note(what, t),
    })
}

fn note(what: &str, t: &SphereTransform) -> String {
    format!(
        "unit sphere of {what}: center ({:.9e} {:.9e} {:.9e}) radius {:.9e}",
        t.center.x, t.center.y, t.center.z, t.radius
    )
}
