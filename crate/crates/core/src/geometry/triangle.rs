use super::{triangle_area, Point3};
use crate::error::{Error, Result};

/// Exact squared distance from `p` to the closed triangle `abc`.
pub fn point_triangle_sq_distance(p: &Point3, a: &Point3, b: &Point3, c: &Point3) -> Result<f64> {
    if !(triangle_area(a, b, c) > 0.0) {
        return Err(Error::invalid("degenerate triangle"));
    }
    Ok(closest_point_sq_distance(p, a, b, c))
}

/// Closest-point search over the triangle's Voronoi regions (vertices, edges,
/// face). Assumes a non-degenerate triangle.
pub(crate) fn closest_point_sq_distance(p: &Point3, a: &Point3, b: &Point3, c: &Point3) -> f64 {
    (p - closest_point(p, a, b, c)).norm_squared()
}

fn closest_point(p: &Point3, a: &Point3, b: &Point3, c: &Point3) -> Point3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }

    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }

    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }

    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}
