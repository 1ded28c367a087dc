//! Randomized verification of the shape-function families: duality of the
//! degree-of-freedom functionals, trace laws, inter-element jump conditions,
//! the rotation identity between the C- and D-tables, and trace preservation
//! of the Piola maps. Also provides dual-functional projections of tensor
//! fields onto the mixed dofs, used as test oracles.

use crate::element::{ElementGeometry, N_ALPHA, N_GAMMA};
use crate::mesh::Mesh;
use crate::quadrature::edge_rule;
use crate::shapefn::{
    bar_matrix_full, bar_matrix_minus, dof_functional_edge, dof_functional_interior,
    eval_edge_shapefn, eval_global_edge_shapefn, eval_interior_shapefn, local_edge_frame,
    piola_contravariant, piola_covariant, reference_edge, NaturalPoint, ShapeFamily,
};
use nalgebra::{DMatrix, Matrix2, Point2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A single well-shaped random triangle (as a one-element mesh).
pub fn random_triangle(rng: &mut impl Rng) -> Mesh {
    loop {
        let verts: Vec<Point2<f64>> = (0..3)
            .map(|_| {
                Point2::new(
                    4.0 * (rng.random::<f64>() - 0.5),
                    4.0 * (rng.random::<f64>() - 0.5),
                )
            })
            .collect();
        if triangle_quality(&verts[0], &verts[1], &verts[2]) > 0.35 {
            if let Ok(mesh) = Mesh::build(verts, vec![[0, 1, 2]]) {
                return mesh;
            }
        }
    }
}

/// Two triangles sharing an interior edge, both well shaped.
pub fn random_patch(rng: &mut impl Rng) -> Mesh {
    loop {
        // convex quad around the origin, split along (0, 2)
        let mut verts = Vec::with_capacity(4);
        let mut ok = true;
        for i in 0..4 {
            let base = std::f64::consts::FRAC_PI_2 * i as f64;
            let ang = base + 0.9 * (rng.random::<f64>() - 0.5);
            let rad = 1.0 + 1.2 * rng.random::<f64>();
            verts.push(Point2::new(rad * ang.cos(), rad * ang.sin()));
        }
        ok &= triangle_quality(&verts[0], &verts[1], &verts[2]) > 0.3;
        ok &= triangle_quality(&verts[0], &verts[2], &verts[3]) > 0.3;
        if !ok {
            continue;
        }
        if let Ok(mesh) = Mesh::build(verts, vec![[0, 1, 2], [0, 2, 3]]) {
            if mesh.edges.iter().any(|e| !e.boundary) {
                return mesh;
            }
        }
    }
}

/// Ratio of the inradius to the longest edge, scaled to be ~0.5 for an
/// equilateral triangle; crude but effective shape guard.
fn triangle_quality(a: &Point2<f64>, b: &Point2<f64>, c: &Point2<f64>) -> f64 {
    let la = (b - a).norm();
    let lb = (c - b).norm();
    let lc = (a - c).norm();
    let s = 0.5 * (la + lb + lc);
    let area = 0.5 * ((b - a).x * (c - a).y - (c - a).x * (b - a).y).abs();
    if area == 0.0 {
        return 0.0;
    }
    let inradius = area / s;
    let lmax = la.max(lb).max(lc);
    3.46 * inradius / lmax
}

/// The full set of local shape functions of a family on one triangle, in
/// dual-pairing order: per edge the recovered unbarred basis, then the
/// interior functions. Functions are physical-space closures.
fn local_function_set(
    mesh: &Mesh,
    tri: usize,
    family: ShapeFamily,
) -> Vec<Box<dyn Fn(Point2<f64>) -> Vector2<f64> + '_>> {
    let geo = ElementGeometry::new(mesh, tri);
    let nfun = family.edge_fn_count();
    let mut fns: Vec<Box<dyn Fn(Point2<f64>) -> Vector2<f64>>> = Vec::new();
    for i in 1..=3 {
        let (_, _, _, len) = local_edge_frame(mesh, tri, i);
        // v_k = sum_m (M^{-1})_{k m} vbar_m with the physical edge length
        let minv: Vec<Vec<f64>> = if nfun == 3 {
            let m = bar_matrix_full(len).try_inverse().unwrap();
            (0..3).map(|r| (0..3).map(|c| m[(r, c)]).collect()).collect()
        } else {
            let m = bar_matrix_minus(len).try_inverse().unwrap();
            (0..2).map(|r| (0..2).map(|c| m[(r, c)]).collect()).collect()
        };
        for k in 0..nfun {
            let geo = geo.clone();
            let weights = minv[k].clone();
            fns.push(Box::new(move |x: Point2<f64>| {
                let p = geo.natural_point(&x);
                let mut acc = Vector2::zeros();
                for (m, w) in weights.iter().enumerate() {
                    let vhat = eval_edge_shapefn(family, i, m + 1, p).unwrap();
                    let v = if family.is_covariant() {
                        piola_covariant(&geo.j_mat, &vhat).unwrap()
                    } else {
                        piola_contravariant(&geo.j_mat, &vhat).unwrap()
                    };
                    acc += v * *w;
                }
                acc
            }));
        }
    }
    for k in 1..=family.interior_fn_count() {
        let geo = geo.clone();
        fns.push(Box::new(move |x: Point2<f64>| {
            let p = geo.natural_point(&x);
            let vhat = eval_interior_shapefn(family, k, &geo.jac, p).unwrap();
            if family.is_covariant() {
                piola_covariant(&geo.j_mat, &vhat).unwrap()
            } else {
                piola_contravariant(&geo.j_mat, &vhat).unwrap()
            }
        }));
    }
    fns
}

/// Max |dual matrix - identity| for one family on one triangle.
pub fn duality_deviation(mesh: &Mesh, tri: usize, family: ShapeFamily) -> f64 {
    let nfun = family.edge_fn_count();
    let nint = family.interior_fn_count();
    let n = 3 * nfun + nint;
    let fns = local_function_set(mesh, tri, family);
    let mut mat = DMatrix::<f64>::zeros(n, n);
    for (col, f) in fns.iter().enumerate() {
        let mut row = 0;
        for i in 1..=3 {
            for m in 1..=nfun {
                mat[(row, col)] = dof_functional_edge(family, mesh, tri, i, m, f);
                row += 1;
            }
        }
        for k in 1..=nint {
            mat[(row, col)] = dof_functional_interior(family, mesh, tri, k, f);
            row += 1;
        }
    }
    let mut dev: f64 = 0.0;
    for r in 0..n {
        for c in 0..n {
            let expect = if r == c { 1.0 } else { 0.0 };
            dev = dev.max((mat[(r, c)] - expect).abs());
        }
    }
    dev
}

/// Max deviation from the trace laws on the family's own edges, zero traces
/// on the other edges, and zero traces of the interior functions.
pub fn trace_deviation(mesh: &Mesh, tri: usize, family: ShapeFamily) -> f64 {
    let geo = ElementGeometry::new(mesh, tri);
    let nfun = family.edge_fn_count();
    let covariant = family.is_covariant();
    let mut dev: f64 = 0.0;
    let samples = [0.08, 0.3, 0.5, 0.77, 0.94];
    for i in 1..=3 {
        for j in 1..=nfun {
            for le in 1..=3 {
                let (start, t, n, len) = local_edge_frame(mesh, tri, le);
                let dir = if covariant { t } else { n };
                for &xi in &samples {
                    let s = xi * len;
                    let x = start + t * s;
                    let p = geo.natural_point(&x);
                    let vhat = eval_edge_shapefn(family, i, j, p).unwrap();
                    let v = if covariant {
                        piola_covariant(&geo.j_mat, &vhat).unwrap()
                    } else {
                        piola_contravariant(&geo.j_mat, &vhat).unwrap()
                    };
                    let expect = if le == i {
                        match j {
                            1 => 1.0 / len,
                            2 => (len - 2.0 * s) / (len * len),
                            _ => (len - 2.0 * s).powi(2) / len.powi(3),
                        }
                    } else {
                        0.0
                    };
                    dev = dev.max((v.dot(&dir) - expect).abs());
                }
            }
        }
    }
    // interior functions have zero controlled traces on all edges
    for k in 1..=family.interior_fn_count() {
        for le in 1..=3 {
            let (start, t, n, len) = local_edge_frame(mesh, tri, le);
            let dir = if covariant { t } else { n };
            for &xi in &samples {
                let x = start + t * (xi * len);
                let p = geo.natural_point(&x);
                let vhat = eval_interior_shapefn(family, k, &geo.jac, p).unwrap();
                let v = if covariant {
                    piola_covariant(&geo.j_mat, &vhat).unwrap()
                } else {
                    piola_contravariant(&geo.j_mat, &vhat).unwrap()
                };
                dev = dev.max(v.dot(&dir).abs());
            }
        }
    }
    dev
}

/// Max jump of the controlled component of every global edge function across
/// the interior edge of a two-triangle patch, at 5 points.
pub fn jump_deviation(mesh: &Mesh, family: ShapeFamily) -> f64 {
    let edge = mesh
        .edges
        .iter()
        .find(|e| !e.boundary)
        .expect("patch has an interior edge");
    let (t1, t2) = (edge.incident_tris[0], edge.incident_tris[1]);
    let g1 = ElementGeometry::new(mesh, t1);
    let g2 = ElementGeometry::new(mesh, t2);
    let a = mesh.vertices[edge.vertices[0]];
    let dir = if family.is_covariant() {
        edge.tangent
    } else {
        edge.normal
    };
    let mut dev: f64 = 0.0;
    for j in 1..=family.edge_fn_count() {
        for &xi in &[0.1, 0.25, 0.5, 0.75, 0.9] {
            let x = a + edge.tangent * (xi * edge.length);
            let v1 =
                eval_global_edge_shapefn(mesh, t1, edge.id, family, j, g1.natural_point(&x))
                    .unwrap();
            let v2 =
                eval_global_edge_shapefn(mesh, t2, edge.id, family, j, g2.natural_point(&x))
                    .unwrap();
            dev = dev.max((v1.dot(&dir) - v2.dot(&dir)).abs());
        }
    }
    dev
}

/// Max |D-table - clockwise-rotated C-table| over random natural points.
pub fn rotation_identity_deviation(rng: &mut impl Rng, n_points: usize) -> f64 {
    let mut dev: f64 = 0.0;
    for _ in 0..n_points {
        let r = rng.random::<f64>();
        let s = rng.random::<f64>() * (1.0 - r);
        let p = NaturalPoint::new(r, s);
        for i in 1..=3 {
            for j in 1..=3 {
                let c = eval_edge_shapefn(ShapeFamily::C2, i, j, p).unwrap();
                let d = eval_edge_shapefn(ShapeFamily::D2, i, j, p).unwrap();
                dev = dev.max((d.x - c.y).abs().max((d.y + c.x).abs()));
            }
            for j in 1..=2 {
                let c = eval_edge_shapefn(ShapeFamily::C2Minus, i, j, p).unwrap();
                let d = eval_edge_shapefn(ShapeFamily::D2Minus, i, j, p).unwrap();
                dev = dev.max((d.x - c.y).abs().max((d.y + c.x).abs()));
            }
        }
    }
    dev
}

/// Verify that the covariant map preserves tangential edge functionals and
/// the contravariant map preserves normal ones, up to the arc-length factor
/// (l / l_ref)^{m-1}, for random quadratic polynomial fields.
pub fn piola_trace_preservation(rng: &mut impl Rng) -> f64 {
    let mesh = random_triangle(rng);
    let geo = ElementGeometry::new(&mesh, 0);
    // random quadratic vector polynomial in natural coordinates
    let coef: Vec<f64> = (0..12).map(|_| rng.random::<f64>() - 0.5).collect();
    let vhat = move |p: NaturalPoint| -> Vector2<f64> {
        let basis = [1.0, p.r, p.s, p.r * p.r, p.r * p.s, p.s * p.s];
        let mut v = Vector2::zeros();
        for (b, c) in basis.iter().zip(coef.chunks(2)) {
            v.x += b * c[0];
            v.y += b * c[1];
        }
        v
    };
    let mut dev: f64 = 0.0;
    for i in 1..=3 {
        let (start_hat, t_hat, len_hat) = reference_edge(i);
        let n_hat = crate::shapefn::rotate_minus_90(&t_hat);
        let (_, _, _, len) = local_edge_frame(&mesh, 0, i);
        for m in 1..=3u32 {
            // natural-coordinate integrals
            let rule = edge_rule(6, len_hat);
            let (mut nat_t, mut nat_n) = (0.0, 0.0);
            for (&sh, &w) in rule.points.iter().zip(&rule.weights) {
                let p = start_hat + t_hat * sh;
                let v = vhat(NaturalPoint::new(p.x, p.y));
                nat_t += w * v.dot(&t_hat) * sh.powi(m as i32 - 1);
                nat_n += w * v.dot(&n_hat) * sh.powi(m as i32 - 1);
            }
            let factor = (len / len_hat).powi(m as i32 - 1);
            // physical integrals of the pushed-forward fields
            let cov = |x: Point2<f64>| {
                piola_covariant(&geo.j_mat, &vhat(geo.natural_point(&x))).unwrap()
            };
            let con = |x: Point2<f64>| {
                piola_contravariant(&geo.j_mat, &vhat(geo.natural_point(&x))).unwrap()
            };
            let phys_t =
                dof_functional_edge(ShapeFamily::C2, &mesh, 0, i, m as usize, &cov);
            let phys_n =
                dof_functional_edge(ShapeFamily::D2, &mesh, 0, i, m as usize, &con);
            dev = dev.max((phys_t - factor * nat_t).abs());
            dev = dev.max((phys_n - factor * nat_n).abs());
        }
    }
    dev
}

/// Project a tensor field onto the element's 24 displacement-gradient dofs
/// using the dual functionals; exact for fields in the interpolation space.
pub fn project_alpha(
    mesh: &Mesh,
    tri: usize,
    field: &dyn Fn(Point2<f64>) -> Matrix2<f64>,
) -> [f64; N_ALPHA] {
    let geo = ElementGeometry::new(mesh, tri);
    let mut alpha = [0.0; N_ALPHA];
    for l in 0..2 {
        let row = |x: Point2<f64>| -> Vector2<f64> {
            let m = field(x);
            Vector2::new(m[(l, 0)], m[(l, 1)])
        };
        for i in 1..=3 {
            let (_, _, _, len) = local_edge_frame(mesh, tri, i);
            let c = nalgebra::Vector3::new(
                dof_functional_edge(ShapeFamily::C2, mesh, tri, i, 1, &row),
                dof_functional_edge(ShapeFamily::C2, mesh, tri, i, 2, &row),
                dof_functional_edge(ShapeFamily::C2, mesh, tri, i, 3, &row),
            );
            let beta = bar_matrix_full(len).transpose().try_inverse().unwrap() * c;
            for j in 1..=3 {
                let sign = if j % 2 == 1 { geo.edge_sign[i - 1] } else { 1.0 };
                let m = 3 * (i - 1) + (j - 1);
                alpha[2 * m + l] = beta[j - 1] * sign;
            }
        }
        for k in 1..=3 {
            let m = 9 + (k - 1);
            alpha[2 * m + l] = dof_functional_interior(ShapeFamily::C2, mesh, tri, k, &row);
        }
    }
    alpha
}

/// Project a tensor field onto the element's 16 stress dofs.
pub fn project_gamma(
    mesh: &Mesh,
    tri: usize,
    field: &dyn Fn(Point2<f64>) -> Matrix2<f64>,
) -> [f64; N_GAMMA] {
    let geo = ElementGeometry::new(mesh, tri);
    let mut gamma = [0.0; N_GAMMA];
    for l in 0..2 {
        let row = |x: Point2<f64>| -> Vector2<f64> {
            let m = field(x);
            Vector2::new(m[(l, 0)], m[(l, 1)])
        };
        for i in 1..=3 {
            let (_, _, _, len) = local_edge_frame(mesh, tri, i);
            let c = Vector2::new(
                dof_functional_edge(ShapeFamily::D2Minus, mesh, tri, i, 1, &row),
                dof_functional_edge(ShapeFamily::D2Minus, mesh, tri, i, 2, &row),
            );
            let beta = bar_matrix_minus(len).transpose().try_inverse().unwrap() * c;
            for j in 1..=2 {
                let sign = if j % 2 == 1 { geo.edge_sign[i - 1] } else { 1.0 };
                let m = 2 * (i - 1) + (j - 1);
                gamma[2 * m + l] = beta[j - 1] * sign;
            }
        }
        for k in 1..=2 {
            let m = 6 + (k - 1);
            gamma[2 * m + l] = dof_functional_interior(ShapeFamily::D2Minus, mesh, tri, k, &row);
        }
    }
    gamma
}

/// Aggregate report of the randomized shape-function checks.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub trials: usize,
    pub max_duality: f64,
    pub max_trace: f64,
    pub max_jump: f64,
    pub max_rotation: f64,
    pub max_piola: f64,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        self.max_duality < 1e-10
            && self.max_trace < 1e-10
            && self.max_jump < 1e-12
            && self.max_rotation < 1e-13
            && self.max_piola < 1e-12
    }
}

impl std::fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "shape-function verification ({} trials)", self.trials)?;
        writeln!(f, "  duality matrix dev   {:.3e}  (tol 1e-10)", self.max_duality)?;
        writeln!(f, "  trace law dev        {:.3e}  (tol 1e-10)", self.max_trace)?;
        writeln!(f, "  interface jump dev   {:.3e}  (tol 1e-12)", self.max_jump)?;
        writeln!(f, "  rotation identity    {:.3e}  (tol 1e-13)", self.max_rotation)?;
        writeln!(f, "  piola trace transfer {:.3e}  (tol 1e-12)", self.max_piola)?;
        write!(f, "  result: {}", if self.pass() { "PASS" } else { "FAIL" })
    }
}

/// Run the whole suite on `trials` random triangles / patches per family.
pub fn run_suite(trials: usize, seed: u64) -> VerifyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = VerifyReport {
        trials,
        max_duality: 0.0,
        max_trace: 0.0,
        max_jump: 0.0,
        max_rotation: 0.0,
        max_piola: 0.0,
    };
    for _ in 0..trials {
        let tri_mesh = random_triangle(&mut rng);
        let patch = random_patch(&mut rng);
        for family in ShapeFamily::ALL {
            report.max_duality = report
                .max_duality
                .max(duality_deviation(&tri_mesh, 0, family));
            report.max_trace = report.max_trace.max(trace_deviation(&tri_mesh, 0, family));
            report.max_jump = report.max_jump.max(jump_deviation(&patch, family));
        }
        report.max_piola = report.max_piola.max(piola_trace_preservation(&mut rng));
    }
    report.max_rotation = rotation_identity_deviation(&mut rng, 50 * trials.max(1));
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::{interpolation_matrices, ElementDofVector};
    use crate::materials::MaterialModel;
    use approx::assert_abs_diff_eq;

    #[test]
    fn suite_passes_on_random_geometry() {
        let report = run_suite(5, 12345);
        assert!(report.pass(), "{report}");
    }

    #[test]
    fn duality_kronecker_specific_cases() {
        // constant field (1, 0) against the C2 duals of the reference
        // triangle edge e3 (unit length, tangent (1, 0)), j = 1 -> 1
        let mesh = Mesh::build(
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(0.0, 1.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let unit_x = |_: Point2<f64>| Vector2::new(1.0, 0.0);
        let phi = dof_functional_edge(ShapeFamily::C2, &mesh, 0, 3, 1, &unit_x);
        assert_abs_diff_eq!(phi, 1.0, epsilon = 1e-14);
        // zero field
        let zero = |_: Point2<f64>| Vector2::zeros();
        assert_abs_diff_eq!(
            dof_functional_interior(ShapeFamily::C2, &mesh, 0, 1, &zero),
            0.0,
            epsilon = 1e-16
        );
    }

    #[test]
    fn projection_reproduces_constant_field() {
        // alpha from the duals of a constant H must reproduce H at every
        // quadrature point, on an arbitrary triangle
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mesh = random_triangle(&mut rng);
        let h = Matrix2::new(0.03, -0.011, 0.007, -0.02);
        let alpha = project_alpha(&mesh, 0, &|_| h);
        let mut dofs = ElementDofVector::zeros();
        dofs.alpha.copy_from_slice(&alpha);
        let model = MaterialModel::NeoHookean1 {
            mu: 80.2,
            kappa: 40_000.0,
        };
        let geo = ElementGeometry::new(&mesh, 0);
        for &(r, s) in &crate::quadrature::triangle_rule_13().points {
            let qp =
                interpolation_matrices(&geo, &dofs, &model, NaturalPoint::new(r, s)).unwrap();
            assert!(
                (qp.h_ref - h).norm() < 1e-12,
                "constant-field projection error {} at ({r}, {s})",
                (qp.h_ref - h).norm()
            );
        }
    }

    #[test]
    fn projection_reproduces_linear_stress_field() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mesh = random_triangle(&mut rng);
        // linear tensor field lies inside the reduced quadratic stress space
        let field = |x: Point2<f64>| {
            Matrix2::new(
                1.0 + 0.2 * x.x,
                0.1 * x.y,
                -0.3 + 0.05 * x.x,
                0.4 - 0.1 * x.y,
            )
        };
        let gamma = project_gamma(&mesh, 0, &field);
        let mut dofs = ElementDofVector::zeros();
        dofs.gamma.copy_from_slice(&gamma);
        let model = MaterialModel::NeoHookean1 {
            mu: 80.2,
            kappa: 40_000.0,
        };
        let geo = ElementGeometry::new(&mesh, 0);
        for &(r, s) in &crate::quadrature::triangle_rule_13().points {
            let p = NaturalPoint::new(r, s);
            let qp = interpolation_matrices(&geo, &dofs, &model, p).unwrap();
            let x = geo.physical_point(p);
            // with F = I the interpolated tau is the projected field itself
            assert!(
                (qp.tau - field(x)).norm() < 1e-11,
                "linear stress projection error {}",
                (qp.tau - field(x)).norm()
            );
        }
    }
}
