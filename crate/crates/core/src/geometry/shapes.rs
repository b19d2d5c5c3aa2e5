//! Analytic benchmark surfaces used as ground-truth meshes.

use std::collections::HashMap;
use std::f64::consts::PI;

use super::{Point3, TriangleMesh};

/// The names accepted by [`by_name`].
pub const NAMES: [&str; 3] = ["sphere", "torus", "cube"];

/// Benchmark fixture by name at its default resolution.
pub fn by_name(name: &str) -> Option<TriangleMesh> {
    match name {
        "sphere" => Some(icosphere(1.0, 5)),
        "torus" => Some(torus(1.0, 0.4, 128, 64)),
        "cube" => Some(rounded_cube(1.0, 0.2, 24)),
        "square" => Some(unit_square()),
        _ => None,
    }
}

/// `[0,1]²` in the `z = 0` plane, two triangles.
pub fn unit_square() -> TriangleMesh {
    let v = vec![
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(1.0, 1.0, 0.0),
        Point3::new(0.0, 1.0, 0.0),
    ];
    build(v, vec![[0, 1, 2], [0, 2, 3]])
}

/// Subdivided icosahedron projected onto a sphere of the given radius.
pub fn icosphere(radius: f64, subdivisions: usize) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Point3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|p| Point3::new(p[0], p[1], p[2]).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Point3>| {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    for v in &mut verts {
        *v *= radius;
    }
    build(verts, faces)
}

/// Torus around the z axis with tube centre radius `major` and tube radius `minor`.
pub fn torus(major: f64, minor: f64, segments: usize, rings: usize) -> TriangleMesh {
    let mut verts = Vec::with_capacity(segments * rings);
    for i in 0..segments {
        let u = 2.0 * PI * i as f64 / segments as f64;
        for j in 0..rings {
            let v = 2.0 * PI * j as f64 / rings as f64;
            let r = major + minor * v.cos();
            verts.push(Point3::new(r * u.cos(), r * u.sin(), minor * v.sin()));
        }
    }
    let id = |i: usize, j: usize| (i % segments) * rings + (j % rings);
    let mut faces = Vec::with_capacity(2 * segments * rings);
    for i in 0..segments {
        for j in 0..rings {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    build(verts, faces)
}

/// Cube `[-half, half]³` with edges and corners rounded by `bevel`, each face
/// tessellated into an `n × n` grid before rounding.
pub fn rounded_cube(half: f64, bevel: f64, n: usize) -> TriangleMesh {
    let inner = half - bevel;
    let mut verts = Vec::new();
    let mut faces = Vec::new();
    for axis in 0..3 {
        for sign in [-1.0, 1.0] {
            let base = verts.len();
            let (u_axis, v_axis) = ((axis + 1) % 3, (axis + 2) % 3);
            for i in 0..=n {
                for j in 0..=n {
                    let mut p = Point3::zeros();
                    p[axis] = sign * half;
                    p[u_axis] = -half + 2.0 * half * i as f64 / n as f64;
                    p[v_axis] = -half + 2.0 * half * j as f64 / n as f64;
                    let core = p.map(|c| c.clamp(-inner, inner));
                    let offset = p - core;
                    verts.push(core + offset.normalize() * bevel);
                }
            }
            let id = |i: usize, j: usize| base + i * (n + 1) + j;
            for i in 0..n {
                for j in 0..n {
                    let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                    // Keep outward orientation on both signs.
                    if sign > 0.0 {
                        faces.push([a, b, c]);
                        faces.push([a, c, d]);
                    } else {
                        faces.push([a, c, b]);
                        faces.push([a, d, c]);
                    }
                }
            }
        }
    }
    build(verts, faces)
}

fn build(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> TriangleMesh {
    TriangleMesh::new(vertices, faces)
        .expect("analytic fixture is valid")
        .0
}
