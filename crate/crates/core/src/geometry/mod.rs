//! Spatial types, neighbor search, mesh sampling and point-triangle distances.

mod bvh;
mod kdtree;
mod sampling;
pub mod shapes;
mod triangle;

pub use bvh::TriangleBvh;
pub use kdtree::{Neighbor, NeighborIndex};
pub use sampling::{sample_mesh, SamplingMode};
pub use triangle::point_triangle_sq_distance;
pub(crate) use triangle::closest_point_sq_distance;

use crate::error::{Error, Result};

pub type Point3 = nalgebra::Vector3<f64>;

/// An ordered, non-empty list of finite 3D points.
///
/// Index order is significant: every operation that preserves the point count
/// also preserves index correspondence.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("point cloud must contain at least one point"));
        }
        if let Some(i) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid(format!("point {i} has a non-finite coordinate")));
        }
        Ok(Self { points })
    }

    pub fn from_arrays(points: &[[f64; 3]]) -> Result<Self> {
        Self::new(points.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect())
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false; kept for API symmetry with collections.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Point3 {
        let mut c = Point3::zeros();
        for p in &self.points {
            c += p;
        }
        c / self.points.len() as f64
    }

    /// Applies `f` to every point, keeping order.
    pub fn map(&self, f: impl Fn(&Point3) -> Point3) -> Result<Self> {
        Self::new(self.points.iter().map(f).collect())
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }
}

/// A triangle surface. Faces are validated against the vertex list and
/// zero-area faces are removed at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Builds a mesh, dropping degenerate faces. Returns the mesh and the number
    /// of faces that were dropped.
    pub fn new(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Result<(Self, usize)> {
        if let Some(i) = vertices.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid(format!("vertex {i} has a non-finite coordinate")));
        }
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::invalid(format!(
                    "face {fi} references vertex {bad}, mesh has {} vertices",
                    vertices.len()
                )));
            }
        }
        let before = faces.len();
        let faces: Vec<[usize; 3]> = faces
            .into_iter()
            .filter(|f| triangle_area(&vertices[f[0]], &vertices[f[1]], &vertices[f[2]]) > 0.0)
            .collect();
        let dropped = before - faces.len();
        Ok((Self { vertices, faces }, dropped))
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn triangle(&self, face: usize) -> [Point3; 3] {
        let f = self.faces[face];
        [self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]]
    }

    pub fn area(&self) -> f64 {
        (0..self.faces.len())
            .map(|i| {
                let [a, b, c] = self.triangle(i);
                triangle_area(&a, &b, &c)
            })
            .sum()
    }

    pub fn map_vertices(&self, f: impl Fn(&Point3) -> Point3) -> Result<Self> {
        let (mesh, _) = Self::new(self.vertices.iter().map(f).collect(), self.faces.clone())?;
        Ok(mesh)
    }
}

pub(crate) fn triangle_area(a: &Point3, b: &Point3, c: &Point3) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Maps a cloud into the closed unit ball: `(p - center) / radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereTransform {
    pub center: Point3,
    pub radius: f64,
}

impl SphereTransform {
    pub fn identity() -> Self {
        Self {
            center: Point3::zeros(),
            radius: 1.0,
        }
    }

    pub fn apply_point(&self, p: &Point3) -> Point3 {
        (p - self.center) / self.radius
    }

    pub fn invert_point(&self, p: &Point3) -> Point3 {
        p * self.radius + self.center
    }

    pub fn apply(&self, cloud: &PointCloud) -> Result<PointCloud> {
        cloud.map(|p| self.apply_point(p))
    }

    pub fn invert(&self, cloud: &PointCloud) -> Result<PointCloud> {
        cloud.map(|p| self.invert_point(p))
    }

    pub fn apply_mesh(&self, mesh: &TriangleMesh) -> Result<TriangleMesh> {
        mesh.map_vertices(|p| self.apply_point(p))
    }

    /// Converts a length in source units to normalized units.
    pub fn scale_length(&self, len: f64) -> f64 {
        len / self.radius
    }
}

/// Centers the cloud at its centroid and scales it so the farthest point has
/// norm 1. A cloud whose points all coincide keeps radius 1.
pub fn normalize_to_unit_sphere(cloud: &PointCloud) -> (PointCloud, SphereTransform) {
    let transform = unit_sphere_transform(cloud.points());
    let out = transform
        .apply(cloud)
        .expect("normalizing finite points yields finite points");
    (out, transform)
}

pub(crate) fn unit_sphere_transform(points: &[Point3]) -> SphereTransform {
    let mut center = Point3::zeros();
    for p in points {
        center += p;
    }
    center /= points.len() as f64;
    let radius = points
        .iter()
        .map(|p| (p - center).norm())
        .fold(0.0_f64, f64::max);
    let radius = if radius > 0.0 { radius } else { 1.0 };
    SphereTransform { center, radius }
}
