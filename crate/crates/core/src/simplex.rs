//! Affine simplex geometry for piecewise-linear elements in 2D and 3D.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

pub type Point = [f64; 3];

/// Measure and barycentric-coordinate gradients of a triangle (2D) or
/// tetrahedron (3D). Returns `None` for a degenerate cell.
pub fn p1_gradients(dim: usize, verts: &[Point]) -> Option<(f64, Vec<Point>)> {
    match dim {
        2 => {
            let [x0, x1, x2] = [verts[0], verts[1], verts[2]];
            let j = Matrix2::new(x1[0] - x0[0], x2[0] - x0[0], x1[1] - x0[1], x2[1] - x0[1]);
            let det = j.determinant();
            if det.abs() < 1e-300 {
                return None;
            }
            let jinv_t = j.try_inverse()?.transpose();
            let g1 = jinv_t * Vector2::new(1.0, 0.0);
            let g2 = jinv_t * Vector2::new(0.0, 1.0);
            let g0 = -(g1 + g2);
            Some((det.abs() / 2.0, vec![[g0.x, g0.y, 0.0], [g1.x, g1.y, 0.0], [g2.x, g2.y, 0.0]]))
        }
        3 => {
            let x0 = Vector3::from(verts[0]);
            let cols = [1, 2, 3].map(|k| Vector3::from(verts[k]) - x0);
            let j = Matrix3::from_columns(&cols);
            let det = j.determinant();
            if det.abs() < 1e-300 {
                return None;
            }
            let jinv_t = j.try_inverse()?.transpose();
            let g: Vec<Vector3<f64>> = (0..3).map(|k| jinv_t.column(k).into_owned()).collect();
            let g0 = -(g[0] + g[1] + g[2]);
            let mut out = vec![[g0.x, g0.y, g0.z]];
            out.extend(g.iter().map(|v| [v.x, v.y, v.z]));
            Some((det.abs() / 6.0, out))
        }
        _ => None,
    }
}

/// Signed measure (area in 2D, volume in 3D).
pub fn signed_measure(dim: usize, verts: &[Point]) -> f64 {
    match dim {
        2 => {
            let (a, b, c) = (verts[0], verts[1], verts[2]);
            0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
        }
        3 => {
            let x0 = Vector3::from(verts[0]);
            let cols = [1, 2, 3].map(|k| Vector3::from(verts[k]) - x0);
            Matrix3::from_columns(&cols).determinant() / 6.0
        }
        _ => 0.0,
    }
}

pub fn barycenter(verts: &[Point]) -> Point {
    let n = verts.len() as f64;
    let mut c = [0.0; 3];
    for v in verts {
        for d in 0..3 {
            c[d] += v[d] / n;
        }
    }
    c
}

pub fn dist(a: &Point, b: &Point) -> f64 {
    sub(a, b).iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn dot3(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm3(a: &Point) -> f64 {
    dot3(a, a).sqrt()
}

pub fn cross(a: &Point, b: &Point) -> Point {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Measure of a facet: segment length in 2D, triangle area in 3D.
pub fn facet_measure(verts: &[Point]) -> f64 {
    match verts.len() {
        2 => dist(&verts[0], &verts[1]),
        3 => 0.5 * norm3(&cross(&sub(&verts[1], &verts[0]), &sub(&verts[2], &verts[0]))),
        _ => 0.0,
    }
}

/// Unit normal of a facet (orientation arbitrary).
pub fn facet_normal(verts: &[Point]) -> Point {
    let n = match verts.len() {
        2 => {
            let t = sub(&verts[1], &verts[0]);
            [t[1], -t[0], 0.0]
        }
        _ => cross(&sub(&verts[1], &verts[0]), &sub(&verts[2], &verts[0])),
    };
    let l = norm3(&n);
    [n[0] / l, n[1] / l, n[2] / l]
}

/// Distance from `p` to a facet (segment or triangle).
pub fn point_facet_distance(p: &Point, verts: &[Point]) -> f64 {
    match verts.len() {
        2 => point_segment_distance(p, &verts[0], &verts[1]),
        3 => point_triangle_distance(p, &verts[0], &verts[1], &verts[2]),
        _ => f64::INFINITY,
    }
}

fn point_segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    let ab = sub(b, a);
    let len2 = dot3(&ab, &ab);
    let t = if len2 > 0.0 { (dot3(&sub(p, a), &ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let q = [a[0] + t * ab[0], a[1] + t * ab[1], a[2] + t * ab[2]];
    dist(p, &q)
}

/// Closest-point query by Voronoi regions of the triangle.
fn point_triangle_distance(p: &Point, a: &Point, b: &Point, c: &Point) -> f64 {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot3(&ab, &ap);
    let d2 = dot3(&ac, &ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return dist(p, a);
    }
    let bp = sub(p, b);
    let d3 = dot3(&ab, &bp);
    let d4 = dot3(&ac, &bp);
    if d3 >= 0.0 && d4 <= d3 {
        return dist(p, b);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return point_segment_distance(p, a, b);
    }
    let cp = sub(p, c);
    let d5 = dot3(&ab, &cp);
    let d6 = dot3(&ac, &cp);
    if d6 >= 0.0 && d5 <= d6 {
        return dist(p, c);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return point_segment_distance(p, a, c);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return point_segment_distance(p, b, c);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    let q = [a[0] + ab[0] * v + ac[0] * w, a[1] + ab[1] * v + ac[1] * w, a[2] + ab[2] * v + ac[2] * w];
    dist(p, &q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_triangle_gradients() {
        let (area, g) = p1_gradients(2, &[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(area, 0.5);
        assert_eq!(g, vec![[-1.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
    }

    #[test]
    fn tetra_gradients_reproduce_linear_functions() {
        let v = [[0.1, 0.0, 0.2], [1.0, 0.3, 0.0], [0.2, 1.1, 0.1], [0.0, 0.2, 0.9]];
        let (vol, g) = p1_gradients(3, &v).unwrap();
        assert!((vol - signed_measure(3, &v).abs()).abs() < 1e-15);
        // grad of f(x) = 2x - y + 3z interpolated from vertex values.
        let f = |p: &Point| 2.0 * p[0] - p[1] + 3.0 * p[2];
        let mut grad = [0.0; 3];
        for k in 0..4 {
            for d in 0..3 {
                grad[d] += f(&v[k]) * g[k][d];
            }
        }
        for (got, want) in grad.iter().zip([2.0, -1.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_cell_is_rejected() {
        assert!(p1_gradients(2, &[[0.0, 0.0, 0.0], [1.0, 1.0, 0.0], [2.0, 2.0, 0.0]]).is_none());
    }

    #[test]
    fn triangle_distance_regions() {
        let (a, b, c) = ([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        assert!((point_triangle_distance(&[0.2, 0.2, 0.5], &a, &b, &c) - 0.5).abs() < 1e-15);
        assert!((point_triangle_distance(&[-1.0, -1.0, 0.0], &a, &b, &c) - 2f64.sqrt()).abs() < 1e-15);
        assert!((point_triangle_distance(&[0.5, -2.0, 0.0], &a, &b, &c) - 2.0).abs() < 1e-15);
        assert!((point_triangle_distance(&[1.0, 1.0, 0.0], &a, &b, &c) - 0.5f64.sqrt()).abs() < 1e-15);
    }
}
