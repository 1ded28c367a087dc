//! Second-order vector shape functions on the reference triangle.
//!
//! Four families are provided. The C-families transform covariantly and keep
//! tangential edge traces single-valued; the D-families transform
//! contravariantly and keep normal traces single-valued:
//!
//! * `C2`  - full quadratic, 3 functions per edge + 3 interior (24 tensor dofs)
//! * `D2`  - full quadratic, normal-continuous counterpart of `C2`
//! * `C2Minus` - reduced quadratic, 2 per edge + 2 interior (16 tensor dofs)
//! * `D2Minus` - reduced quadratic, normal-continuous counterpart of `C2Minus`
//!
//! Edge functions are tabulated in natural coordinates `(r, s)` on the
//! reference triangle with vertices (0,0), (1,0), (0,1); local edge `i` is
//! opposite vertex `i` (e3: v1->v2, e1: v2->v3, e2: v3->v1). Interior
//! functions carry coefficients that depend on the physical element through
//! the Jacobian columns `(x2, y2)`, `(x3, y3)` measured from local vertex 1.
//!
//! A global edge function is the local one multiplied by an orientation sign
//! (odd function indices only) and pushed to physical space by the family's
//! Piola map.

use nalgebra::{Matrix2, Matrix3, Vector2};
use thiserror::Error;

/// Shape-function family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeFamily {
    C2,
    D2,
    C2Minus,
    D2Minus,
}

impl ShapeFamily {
    pub const ALL: [ShapeFamily; 4] = [
        ShapeFamily::C2,
        ShapeFamily::D2,
        ShapeFamily::C2Minus,
        ShapeFamily::D2Minus,
    ];

    /// Number of shape functions per edge (3 for full, 2 for minus families).
    pub fn edge_fn_count(self) -> usize {
        match self {
            ShapeFamily::C2 | ShapeFamily::D2 => 3,
            ShapeFamily::C2Minus | ShapeFamily::D2Minus => 2,
        }
    }

    /// Number of interior shape functions.
    pub fn interior_fn_count(self) -> usize {
        self.edge_fn_count()
    }

    /// Covariant families preserve tangential traces; contravariant preserve
    /// normal traces.
    pub fn is_covariant(self) -> bool {
        matches!(self, ShapeFamily::C2 | ShapeFamily::C2Minus)
    }
}

/// Point in natural coordinates on the reference triangle.
#[derive(Debug, Clone, Copy)]
pub struct NaturalPoint {
    pub r: f64,
    pub s: f64,
}

impl NaturalPoint {
    pub fn new(r: f64, s: f64) -> Self {
        Self { r, s }
    }

    pub fn in_reference(&self) -> bool {
        const EPS: f64 = 1e-12;
        self.r >= -EPS && self.s >= -EPS && self.r + self.s <= 1.0 + EPS
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ShapeFnError {
    #[error("edge index {i} or function index {j} out of range for family")]
    InvalidIndex { i: usize, j: usize },
    #[error("singular Jacobian (det = {0})")]
    SingularJacobian(f64),
    #[error("tangents not parallel within tolerance (dot = {0})")]
    NotParallel(f64),
}

/// C2 edge functions (tangential-trace family, full quadratic).
///
/// Rows of the table: `i` is the 1-based local edge, `j` the 1-based function
/// index. Values are the barred combinations whose tangential trace on edge
/// `i` is 1/l, (l-2s)/l^2, (l-2s)^2/l^3.
fn c2_edge(i: usize, j: usize, r: f64, s: f64) -> [f64; 2] {
    match (i, j) {
        (1, 1) => [-s * (4.0 * (r + s) - 3.0), r * (4.0 * (r + s) - 3.0)],
        (2, 1) => [s * (4.0 * r - 1.0), -(4.0 * r - 1.0) * (r - 1.0)],
        (3, 1) => [(4.0 * s - 1.0) * (s - 1.0), -r * (4.0 * s - 1.0)],
        (1, 2) => [s * (2.0 * r + 3.0 * s - 2.0), r * (3.0 * r + 2.0 * s - 2.0)],
        (2, 2) => [s * (2.0 * r - s), (3.0 * r - 1.0) * (r + 2.0 * s - 1.0)],
        (3, 2) => [(3.0 * s - 1.0) * (2.0 * r + s - 1.0), -r * (r - 2.0 * s)],
        (1, 3) => [-s * (2.0 * s - 1.0), r * (2.0 * r - 1.0)],
        (2, 3) => [
            -s * (2.0 * s - 1.0),
            r * (3.0 - 2.0 * r) - 4.0 * s * (r + s - 1.0) - 1.0,
        ],
        (3, 3) => [
            s * (2.0 * s - 3.0) + 4.0 * r * (r + s - 1.0) + 1.0,
            r * (2.0 * r - 1.0),
        ],
        _ => unreachable!(),
    }
}

/// C2Minus edge functions (j = 1 shared with C2).
fn c2minus_edge(i: usize, j: usize, r: f64, s: f64) -> [f64; 2] {
    match (i, j) {
        (_, 1) => c2_edge(i, 1, r, s),
        (1, 2) => [
            -s * (4.0 * (r - s) + 1.0) / 3.0,
            r * (4.0 * (r - s) - 1.0) / 3.0,
        ],
        (2, 2) => [
            -s * (4.0 * r + 8.0 * s - 5.0) / 3.0,
            (4.0 * r - 3.0) * (r + 2.0 * s - 1.0) / 3.0,
        ],
        (3, 2) => [
            (4.0 * s - 3.0) * (2.0 * r + s - 1.0) / 3.0,
            -r * (8.0 * r + 4.0 * s - 5.0) / 3.0,
        ],
        _ => unreachable!(),
    }
}

/// Evaluate an edge shape function in natural coordinates.
///
/// `i` and `j` are 1-based; the D-families are the 90-degree clockwise
/// rotation of the matching C-family.
pub fn eval_edge_shapefn(
    family: ShapeFamily,
    i: usize,
    j: usize,
    p: NaturalPoint,
) -> Result<Vector2<f64>, ShapeFnError> {
    if !(1..=3).contains(&i) || j < 1 || j > family.edge_fn_count() {
        return Err(ShapeFnError::InvalidIndex { i, j });
    }
    let v = match family {
        ShapeFamily::C2 => c2_edge(i, j, p.r, p.s),
        ShapeFamily::C2Minus => c2minus_edge(i, j, p.r, p.s),
        ShapeFamily::D2 => {
            let c = c2_edge(i, j, p.r, p.s);
            [c[1], -c[0]]
        }
        ShapeFamily::D2Minus => {
            let c = c2minus_edge(i, j, p.r, p.s);
            [c[1], -c[0]]
        }
    };
    Ok(Vector2::new(v[0], v[1]))
}

/// Element geometry data needed by the interior coefficient tables: the
/// Jacobian columns are the vertex-2 and vertex-3 coordinates relative to
/// vertex 1.
#[derive(Debug, Clone, Copy)]
pub struct Jacobian {
    pub x2: f64,
    pub y2: f64,
    pub x3: f64,
    pub y3: f64,
}

impl Jacobian {
    pub fn new(x2: f64, y2: f64, x3: f64, y3: f64) -> Self {
        Self { x2, y2, x3, y3 }
    }

    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.x2, self.x3, self.y2, self.y3)
    }

    pub fn det(&self) -> f64 {
        self.x2 * self.y3 - self.x3 * self.y2
    }
}

/// Evaluate an interior shape function in natural coordinates.
///
/// `k` is 1-based. The coefficients scale with 1/det J, so the physical
/// Jacobian enters even though the point is a natural coordinate.
pub fn eval_interior_shapefn(
    family: ShapeFamily,
    k: usize,
    jac: &Jacobian,
    p: NaturalPoint,
) -> Result<Vector2<f64>, ShapeFnError> {
    if k < 1 || k > family.interior_fn_count() {
        return Err(ShapeFnError::InvalidIndex { i: 0, j: k });
    }
    let dj = jac.det();
    if dj.abs() < f64::MIN_POSITIVE {
        return Err(ShapeFnError::SingularJacobian(dj));
    }
    let (r, s) = (p.r, p.s);
    let (x2, y2, x3, y3) = (jac.x2, jac.y2, jac.x3, jac.y3);
    let v = match family {
        ShapeFamily::C2 => {
            // component form s(c1 + e1 r - c1 s), r(b2 - b2 r + e2 s)
            let (c1, e1, b2, e2) = match k {
                1 => (
                    12.0 * (3.0 * x2 + x3),
                    -24.0 * (2.0 * x2 + x3),
                    12.0 * (x2 + 3.0 * x3),
                    -24.0 * (x2 + 2.0 * x3),
                ),
                2 => (
                    12.0 * (3.0 * y2 + y3),
                    -24.0 * (2.0 * y2 + y3),
                    12.0 * (y2 + 3.0 * y3),
                    -24.0 * (y2 + 2.0 * y3),
                ),
                _ => (-60.0, 120.0, -60.0, 120.0),
            };
            [
                s * (c1 + e1 * r - c1 * s) / dj,
                r * (b2 - b2 * r + e2 * s) / dj,
            ]
        }
        ShapeFamily::D2 => {
            // component form r(b1 - b1 r + e1 s), s(c2 + e2 r - c2 s)
            let (b1, e1, c2, e2) = match k {
                1 => (
                    12.0 * (y2 + 3.0 * y3),
                    -24.0 * (y2 + 2.0 * y3),
                    -12.0 * (3.0 * y2 + y3),
                    24.0 * (2.0 * y2 + y3),
                ),
                2 => (
                    -12.0 * (x2 + 3.0 * x3),
                    24.0 * (x2 + 2.0 * x3),
                    12.0 * (3.0 * x2 + x3),
                    -24.0 * (2.0 * x2 + x3),
                ),
                _ => (60.0, -120.0, -60.0, 120.0),
            };
            [
                r * (b1 - b1 * r + e1 * s) / dj,
                s * (c2 + e2 * r - c2 * s) / dj,
            ]
        }
        ShapeFamily::C2Minus => {
            // component form s(c1 - d1 r - c1 s), r(-d1 + d1 r + c1 s)
            let (c1, d1) = match k {
                1 => (8.0 * (2.0 * x2 - x3), 8.0 * (x2 - 2.0 * x3)),
                _ => (8.0 * (2.0 * y2 - y3), 8.0 * (y2 - 2.0 * y3)),
            };
            [
                s * (c1 - d1 * r - c1 * s) / dj,
                r * (-d1 + d1 * r + c1 * s) / dj,
            ]
        }
        ShapeFamily::D2Minus => {
            // component form r(b1 - b1 r - c2 s), s(c2 - b1 r - c2 s)
            let (b1, c2) = match k {
                1 => (-8.0 * (y2 - 2.0 * y3), -8.0 * (2.0 * y2 - y3)),
                _ => (8.0 * (x2 - 2.0 * x3), 8.0 * (2.0 * x2 - x3)),
            };
            [
                r * (b1 - b1 * r - c2 * s) / dj,
                s * (c2 - b1 * r - c2 * s) / dj,
            ]
        }
    };
    Ok(Vector2::new(v[0], v[1]))
}

/// Covariant Piola transform: v = J^{-T} vhat. Preserves tangential traces.
pub fn piola_covariant(j: &Matrix2<f64>, vhat: &Vector2<f64>) -> Result<Vector2<f64>, ShapeFnError> {
    let inv = j
        .try_inverse()
        .ok_or(ShapeFnError::SingularJacobian(j.determinant()))?;
    Ok(inv.transpose() * vhat)
}

/// Contravariant Piola transform: v = (1/det J) J vhat. Preserves normal traces.
pub fn piola_contravariant(
    j: &Matrix2<f64>,
    vhat: &Vector2<f64>,
) -> Result<Vector2<f64>, ShapeFnError> {
    let det = j.determinant();
    if det == 0.0 {
        return Err(ShapeFnError::SingularJacobian(det));
    }
    Ok(j * vhat / det)
}

/// Orientation factor relating a local edge function to the global one.
///
/// Returns `t_global . t_local` rounded to +-1 when `j` is odd, and 1 when
/// `j` is even. Boundary edges always use 1; that case is handled by the
/// caller, which passes the local tangent for both arguments.
pub fn orientation_sign(
    j: usize,
    t_global: &Vector2<f64>,
    t_local: &Vector2<f64>,
) -> Result<f64, ShapeFnError> {
    let dot = t_global.dot(t_local);
    if (dot.abs() - 1.0).abs() > 1e-8 {
        return Err(ShapeFnError::NotParallel(dot));
    }
    if j % 2 == 1 {
        Ok(dot.signum())
    } else {
        Ok(1.0)
    }
}

/// Combination matrix taking the unbarred edge basis to the barred one for
/// the full families: rows are vbar_j in terms of v_m, with the physical
/// edge length `l`.
pub fn bar_matrix_full(l: f64) -> Matrix3<f64> {
    Matrix3::new(
        1.0,
        l / 2.0,
        l * l / 3.0,
        0.0,
        -l / 6.0,
        -l * l / 6.0,
        1.0 / 3.0,
        l / 6.0,
        2.0 * l * l / 15.0,
    )
}

/// Same for the minus families (2x2).
pub fn bar_matrix_minus(l: f64) -> Matrix2<f64> {
    Matrix2::new(1.0, l / 2.0, 0.0, -l / 6.0)
}

/// Quadratic Lagrange basis on the six-node reference triangle.
///
/// Node order: 1 (0,0), 2 (1,0), 3 (0,1), 4 (1/2,0), 5 (1/2,1/2), 6 (0,1/2).
/// Returns the six values and the six natural-coordinate gradients.
pub fn lagrange_p2(p: NaturalPoint) -> ([f64; 6], [[f64; 2]; 6]) {
    let (r, s) = (p.r, p.s);
    let t = 1.0 - r - s;
    let values = [
        t * (2.0 * t - 1.0),
        r * (2.0 * r - 1.0),
        s * (2.0 * s - 1.0),
        4.0 * r * t,
        4.0 * r * s,
        4.0 * s * t,
    ];
    let grads = [
        [1.0 - 4.0 * t, 1.0 - 4.0 * t],
        [4.0 * r - 1.0, 0.0],
        [0.0, 4.0 * s - 1.0],
        [4.0 * (t - r), -4.0 * r],
        [4.0 * s, 4.0 * r],
        [-4.0 * s, 4.0 * (t - s)],
    ];
    (values, grads)
}

/// Reference-element edge descriptions matching the local labeling:
/// edge i runs from its first vertex to its second (e1: v2->v3, e2: v3->v1,
/// e3: v1->v2). Returns (start point, unit tangent, length) in natural
/// coordinates.
pub fn reference_edge(i: usize) -> (Vector2<f64>, Vector2<f64>, f64) {
    let sqrt2 = std::f64::consts::SQRT_2;
    match i {
        1 => (
            Vector2::new(1.0, 0.0),
            Vector2::new(-1.0 / sqrt2, 1.0 / sqrt2),
            sqrt2,
        ),
        2 => (Vector2::new(0.0, 1.0), Vector2::new(0.0, -1.0), 1.0),
        3 => (Vector2::new(0.0, 0.0), Vector2::new(1.0, 0.0), 1.0),
        _ => panic!("edge index must be 1..=3"),
    }
}

/// Rotate a vector by -90 degrees (x, y) -> (y, -x); maps a tangent to the
/// outward normal under the counterclockwise labeling.
pub fn rotate_minus_90(v: &Vector2<f64>) -> Vector2<f64> {
    Vector2::new(v.y, -v.x)
}

/// Geometry of a local edge in physical space: start vertex, unit tangent
/// (following the counterclockwise labeling), outward normal, length.
pub fn local_edge_frame(
    mesh: &crate::mesh::Mesh,
    tri: usize,
    i: usize,
) -> (nalgebra::Point2<f64>, Vector2<f64>, Vector2<f64>, f64) {
    let verts = crate::mesh::LOCAL_EDGE_VERTS[i - 1];
    let a = mesh.vertices[mesh.triangles[tri][verts[0]]];
    let b = mesh.vertices[mesh.triangles[tri][verts[1]]];
    let delta = b - a;
    let len = delta.norm();
    let t = delta / len;
    (a, t, rotate_minus_90(&t), len)
}

/// Evaluate the global edge shape function of `family` associated with a
/// global edge, restricted to triangle `tri`, at natural point `p` of that
/// triangle. Composes the table value, the family's Piola map and the
/// orientation factor of odd function indices.
pub fn eval_global_edge_shapefn(
    mesh: &crate::mesh::Mesh,
    tri: usize,
    global_edge: usize,
    family: ShapeFamily,
    j: usize,
    p: NaturalPoint,
) -> Result<Vector2<f64>, ShapeFnError> {
    let local = mesh.tri_edges[tri]
        .iter()
        .position(|le| le.edge == global_edge)
        .ok_or(ShapeFnError::InvalidIndex { i: global_edge, j })?;
    let i = local + 1;
    let vhat = eval_edge_shapefn(family, i, j, p)?;
    let jm = mesh.jacobian(tri);
    let v = if family.is_covariant() {
        piola_covariant(&jm, &vhat)?
    } else {
        piola_contravariant(&jm, &vhat)?
    };
    let edge = &mesh.edges[global_edge];
    let sign = if edge.boundary {
        1.0
    } else {
        let (_, t_local, _, _) = local_edge_frame(mesh, tri, i);
        orientation_sign(j, &edge.tangent, &t_local)?
    };
    Ok(v * sign)
}

/// Edge degree-of-freedom functional in physical space:
/// int_e (v . t_i) s^{j-1} ds for the C-families, with the local normal in
/// place of the tangent for the D-families. `field` maps physical points on
/// the triangle to 2-vectors.
pub fn dof_functional_edge(
    family: ShapeFamily,
    mesh: &crate::mesh::Mesh,
    tri: usize,
    i: usize,
    j: usize,
    field: &dyn Fn(nalgebra::Point2<f64>) -> Vector2<f64>,
) -> f64 {
    let (start, t, n, len) = local_edge_frame(mesh, tri, i);
    let dir = if family.is_covariant() { t } else { n };
    let rule = crate::quadrature::edge_rule(4, len);
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(&s, &w)| {
            let x = start + t * s;
            w * field(x).dot(&dir) * s.powi(j as i32 - 1)
        })
        .sum()
}

/// Interior degree-of-freedom functional: int_T (v . w_k) dA with the base
/// vector w_k of the family, coordinates measured from local vertex 1.
pub fn dof_functional_interior(
    family: ShapeFamily,
    mesh: &crate::mesh::Mesh,
    tri: usize,
    k: usize,
    field: &dyn Fn(nalgebra::Point2<f64>) -> Vector2<f64>,
) -> f64 {
    let origin = mesh.vertices[mesh.triangles[tri][0]];
    let jm = mesh.jacobian(tri);
    let det_j = jm.determinant();
    let rule = crate::quadrature::triangle_rule_13();
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(&(r, s), &w)| {
            let rel = jm * Vector2::new(r, s);
            let x = origin + rel;
            let wk = match (family, k) {
                (_, 1) => Vector2::new(1.0, 0.0),
                (_, 2) => Vector2::new(0.0, 1.0),
                (ShapeFamily::C2, 3) => rel,
                (ShapeFamily::D2, 3) => Vector2::new(-rel.y, rel.x),
                _ => panic!("interior functional index {k} invalid for {family:?}"),
            };
            w * det_j * field(x).dot(&wk)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn edge_table_spot_values() {
        // C2, e3, j=1 at (0,0): [(4s-1)(s-1), -r(4s-1)] = [1, 0]
        let v = eval_edge_shapefn(ShapeFamily::C2, 3, 1, NaturalPoint::new(0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(v.x, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.y, 0.0, epsilon = 1e-15);

        // D2, e1, j=1 at (0.5, 0.5): [r(4(r+s)-3), s(4(r+s)-3)] = [0.5, 0.5]
        let v = eval_edge_shapefn(ShapeFamily::D2, 1, 1, NaturalPoint::new(0.5, 0.5)).unwrap();
        assert_abs_diff_eq!(v.x, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(v.y, 0.5, epsilon = 1e-15);

        // C2Minus, e3, j=2 at (0,0): (1/3)(4s-3)(2r+s-1) = 1, second comp 0
        let v =
            eval_edge_shapefn(ShapeFamily::C2Minus, 3, 2, NaturalPoint::new(0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(v.x, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.y, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn edge_index_validation() {
        assert!(eval_edge_shapefn(ShapeFamily::C2Minus, 1, 3, NaturalPoint::new(0.1, 0.1)).is_err());
        assert!(eval_edge_shapefn(ShapeFamily::C2, 4, 1, NaturalPoint::new(0.1, 0.1)).is_err());
        assert!(eval_edge_shapefn(ShapeFamily::C2, 1, 0, NaturalPoint::new(0.1, 0.1)).is_err());
    }

    #[test]
    fn interior_c2_k3_identity_jacobian() {
        let jac = Jacobian::new(1.0, 0.0, 0.0, 1.0);
        let v = eval_interior_shapefn(ShapeFamily::C2, 3, &jac, NaturalPoint::new(1.0 / 3.0, 1.0 / 3.0))
            .unwrap();
        assert_abs_diff_eq!(v.x, 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(v.y, 0.0, epsilon = 1e-13);

        let v = eval_interior_shapefn(ShapeFamily::C2, 3, &jac, NaturalPoint::new(0.5, 0.25)).unwrap();
        assert_abs_diff_eq!(v.x, 3.75, epsilon = 1e-13);
        assert_abs_diff_eq!(v.y, 0.0, epsilon = 1e-13);
    }

    #[test]
    fn interior_structural_zeros() {
        // first component carries a factor s, second a factor r
        let jac = Jacobian::new(2.0, 0.3, -0.4, 1.7);
        for family in ShapeFamily::ALL {
            for k in 1..=family.interior_fn_count() {
                let v =
                    eval_interior_shapefn(family, k, &jac, NaturalPoint::new(0.7, 0.0)).unwrap();
                let zero_comp = match family {
                    ShapeFamily::C2 | ShapeFamily::C2Minus => v.x,
                    _ => v.y,
                };
                assert_abs_diff_eq!(zero_comp, 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn piola_maps() {
        let id = Matrix2::identity();
        let v = Vector2::new(0.3, -0.7);
        assert_eq!(piola_covariant(&id, &v).unwrap(), v);
        assert_eq!(piola_contravariant(&id, &v).unwrap(), v);

        let j2 = Matrix2::new(2.0, 0.0, 0.0, 2.0);
        let e1 = Vector2::new(1.0, 0.0);
        let cov = piola_covariant(&j2, &e1).unwrap();
        assert_abs_diff_eq!(cov.x, 0.5, epsilon = 1e-15);
        // contravariant: det = 4, J v = (2, 0) -> (0.5, 0)
        let con = piola_contravariant(&j2, &e1).unwrap();
        assert_abs_diff_eq!(con.x, 0.5, epsilon = 1e-15);

        let jd = Matrix2::new(2.0, 0.0, 0.0, 3.0);
        let v11 = Vector2::new(1.0, 1.0);
        let cov = piola_covariant(&jd, &v11).unwrap();
        assert_abs_diff_eq!(cov.x, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(cov.y, 1.0 / 3.0, epsilon = 1e-15);

        // rotation preserves vectors under the contravariant map (det = 1)
        let rot = Matrix2::new(0.0, -1.0, 1.0, 0.0);
        let con = piola_contravariant(&rot, &e1).unwrap();
        assert_abs_diff_eq!(con.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(con.y, 1.0, epsilon = 1e-15);

        let singular = Matrix2::new(1.0, 2.0, 2.0, 4.0);
        assert!(piola_covariant(&singular, &v).is_err());
        assert!(piola_contravariant(&singular, &v).is_err());
    }

    #[test]
    fn orientation_sign_cases() {
        let t = Vector2::new(1.0, 0.0);
        let tn = Vector2::new(-1.0, 0.0);
        assert_eq!(orientation_sign(1, &t, &t).unwrap(), 1.0);
        assert_eq!(orientation_sign(1, &t, &tn).unwrap(), -1.0);
        assert_eq!(orientation_sign(2, &t, &tn).unwrap(), 1.0);
        assert_eq!(orientation_sign(3, &t, &tn).unwrap(), -1.0);
        let skew = Vector2::new(0.8, 0.6);
        assert!(orientation_sign(1, &t, &skew).is_err());
    }

    #[test]
    fn rotation_relation_between_families() {
        // D tables equal the C tables rotated 90 degrees clockwise
        let pts = [(0.2, 0.3), (0.0, 0.0), (0.5, 0.5), (0.1, 0.7)];
        for &(r, s) in &pts {
            let p = NaturalPoint::new(r, s);
            for i in 1..=3 {
                for j in 1..=3 {
                    let c = eval_edge_shapefn(ShapeFamily::C2, i, j, p).unwrap();
                    let d = eval_edge_shapefn(ShapeFamily::D2, i, j, p).unwrap();
                    assert_abs_diff_eq!(d.x, c.y, epsilon = 1e-15);
                    assert_abs_diff_eq!(d.y, -c.x, epsilon = 1e-15);
                }
                for j in 1..=2 {
                    let c = eval_edge_shapefn(ShapeFamily::C2Minus, i, j, p).unwrap();
                    let d = eval_edge_shapefn(ShapeFamily::D2Minus, i, j, p).unwrap();
                    assert_abs_diff_eq!(d.x, c.y, epsilon = 1e-15);
                    assert_abs_diff_eq!(d.y, -c.x, epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn lagrange_p2_nodal_and_partition() {
        let nodes = [
            (0.0, 0.0),
            (1.0, 0.0),
            (0.0, 1.0),
            (0.5, 0.0),
            (0.5, 0.5),
            (0.0, 0.5),
        ];
        for (i, &(r, s)) in nodes.iter().enumerate() {
            let (n, _) = lagrange_p2(NaturalPoint::new(r, s));
            for (j, &nj) in n.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(nj, expect, epsilon = 1e-15);
            }
        }
        // partition of unity and zero gradient sum at an arbitrary point
        let (n, g) = lagrange_p2(NaturalPoint::new(0.23, 0.41));
        assert_abs_diff_eq!(n.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        let gr: f64 = g.iter().map(|d| d[0]).sum();
        let gs: f64 = g.iter().map(|d| d[1]).sum();
        assert_abs_diff_eq!(gr, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(gs, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn reference_edge_geometry() {
        for i in 1..=3 {
            let (_, t, _) = reference_edge(i);
            assert_abs_diff_eq!(t.norm(), 1.0, epsilon = 1e-15);
            let n = rotate_minus_90(&t);
            assert_abs_diff_eq!(t.dot(&n), 0.0, epsilon = 1e-15);
        }
        // e3 runs along s = 0 with outward normal (0, -1)
        let (start, t, l) = reference_edge(3);
        assert_eq!(start, Vector2::new(0.0, 0.0));
        assert_eq!(t, Vector2::new(1.0, 0.0));
        assert_eq!(l, 1.0);
        assert_eq!(rotate_minus_90(&t), Vector2::new(0.0, -1.0));
    }
}
