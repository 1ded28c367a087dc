//! Hyperelastic material models in plane strain: stored energy, Kirchhoff
//! stress and the consistent spatial tangent.
//!
//! Tensors are stored 2x2; the out-of-plane direction enters only through
//! I1 = tr C + 1 and the deviatoric stretch lambda3_bar = J^{-1/3} of the
//! Ogden model (out-of-plane stretch is 1). The 4x4 tangent uses the row/
//! column ordering (11, 12, 21, 22).
//!
//! Units are MPa and mm throughout.

use nalgebra::{Matrix2, Matrix4};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
#[error("non-positive det F = {0}: deformation is singular")]
pub struct SingularDeformation(pub f64);

/// Material model with its parameters.
#[derive(Debug, Clone)]
pub enum MaterialModel {
    /// W = mu/2 [(I1 - 3) - ln J^2] + kappa/2 (J - 1)^2
    NeoHookean1 { mu: f64, kappa: f64 },
    /// W = mu/2 (I1 - 3) - mu ln J + kappa/2 (ln J)^2
    NeoHookean2 { mu: f64, kappa: f64 },
    /// W = sum_i mu_i/alpha_i (lb1^a_i + lb2^a_i + lb3^a_i - 3) + kappa/2 (J-1)^2
    Ogden {
        mu: Vec<f64>,
        alpha: Vec<f64>,
        kappa: f64,
    },
}

impl MaterialModel {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            MaterialModel::NeoHookean1 { mu, kappa }
            | MaterialModel::NeoHookean2 { mu, kappa } => {
                if *mu <= 0.0 || *kappa <= 0.0 {
                    return Err(format!("mu and kappa must be positive (mu={mu}, kappa={kappa})"));
                }
            }
            MaterialModel::Ogden { mu, alpha, kappa } => {
                if mu.len() != alpha.len() || mu.is_empty() {
                    return Err("ogden_mu and ogden_alpha must have equal nonzero length".into());
                }
                if *kappa <= 0.0 {
                    return Err("kappa must be positive".into());
                }
                let ground: f64 = mu.iter().zip(alpha).map(|(m, a)| m * a).sum();
                if ground <= 0.0 {
                    return Err(format!(
                        "ground-state shear modulus sum mu_i alpha_i = {ground} must be positive"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Stored energy density (MPa).
    pub fn energy(&self, f: &Matrix2<f64>) -> Result<f64, SingularDeformation> {
        let j = det_check(f)?;
        let c = f.transpose() * f;
        let i1 = c.trace() + 1.0;
        Ok(match self {
            MaterialModel::NeoHookean1 { mu, kappa } => {
                0.5 * mu * ((i1 - 3.0) - 2.0 * j.ln()) + 0.5 * kappa * (j - 1.0) * (j - 1.0)
            }
            MaterialModel::NeoHookean2 { mu, kappa } => {
                0.5 * mu * (i1 - 3.0) - mu * j.ln() + 0.5 * kappa * j.ln() * j.ln()
            }
            MaterialModel::Ogden { mu, alpha, kappa } => {
                let b = f * f.transpose();
                let (l1s, l2s, _, _) = eigenprojections(&b);
                let jm13 = j.powf(-1.0 / 3.0);
                let (lb1, lb2, lb3) = (jm13 * l1s.sqrt(), jm13 * l2s.sqrt(), jm13);
                let mut w = 0.5 * kappa * (j - 1.0) * (j - 1.0);
                for (m, a) in mu.iter().zip(alpha) {
                    w += m / a * (lb1.powf(*a) + lb2.powf(*a) + lb3.powf(*a) - 3.0);
                }
                w
            }
        })
    }

    /// Constitutive Kirchhoff stress (2x2 symmetric, MPa).
    pub fn kirchhoff_stress(&self, f: &Matrix2<f64>) -> Result<Matrix2<f64>, SingularDeformation> {
        let j = det_check(f)?;
        let b = f * f.transpose();
        let eye = Matrix2::identity();
        Ok(match self {
            MaterialModel::NeoHookean1 { mu, kappa } => {
                b * *mu + eye * (kappa * j * (j - 1.0) - mu)
            }
            MaterialModel::NeoHookean2 { mu, kappa } => b * *mu + eye * (kappa * j.ln() - mu),
            MaterialModel::Ogden { mu, alpha, kappa } => {
                let (l1s, l2s, e1, e2) = eigenprojections(&b);
                let mut tau = eye * (kappa * j * (j - 1.0));
                for (m, a) in mu.iter().zip(alpha) {
                    let (p1, p2) = (l1s.powf(a / 2.0), l2s.powf(a / 2.0));
                    let tr3 = p1 + p2 + 1.0;
                    let dev = e1 * p1 + e2 * p2 - eye * (tr3 / 3.0);
                    tau += dev * (m * j.powf(-a / 3.0));
                }
                tau
            }
        })
    }

    /// Spatial elasticity tensor as a 4x4 matrix in (11, 12, 21, 22) order.
    pub fn spatial_tangent(&self, f: &Matrix2<f64>) -> Result<Matrix4<f64>, SingularDeformation> {
        let j = det_check(f)?;
        Ok(match self {
            MaterialModel::NeoHookean1 { mu, kappa } => {
                let c_ixi = kappa * j * (2.0 * j - 1.0);
                let c_ii = 2.0 * (mu - kappa * j * (j - 1.0));
                mat4_ixi() * c_ixi + mat4_sym_id() * c_ii
            }
            MaterialModel::NeoHookean2 { mu, kappa } => {
                mat4_ixi() * *kappa + mat4_sym_id() * (-2.0 * (kappa * j.ln() - mu))
            }
            MaterialModel::Ogden { mu, alpha, kappa } => {
                let b = f * f.transpose();
                let (l1s, l2s, e1, e2) = eigenprojections(&b);
                let eye = Matrix2::identity();
                let e11 = mat4_outer(&e1, &e1);
                let e22 = mat4_outer(&e2, &e2);
                let ib = mat4_sym_b(&b);
                let mut d = Matrix4::zeros();
                let mut sum_a_tr = 0.0;
                for (m, a) in mu.iter().zip(alpha) {
                    let ja = j.powf(-a / 3.0);
                    let (p1, p2) = (l1s.powf(a / 2.0), l2s.powf(a / 2.0));
                    let tr3 = p1 + p2 + 1.0;
                    sum_a_tr += a * m * ja * tr3;
                    let dev = e1 * p1 + e2 * p2 - eye * (tr3 / 3.0);
                    let dev_i = mat4_outer(&dev, &eye) + mat4_outer(&eye, &dev);
                    // divided difference (l1^(a-2) - l2^(a-2)) / (l1^2 - l2^2)
                    // with the coalescent limit (a-2)/2 l^(a-4)
                    let dd = if (l1s - l2s).abs() < 1e-8 * (l1s + l2s) {
                        0.5 * (a - 2.0) * l1s.powf((a - 4.0) / 2.0)
                    } else {
                        (l1s.powf((a - 2.0) / 2.0) - l2s.powf((a - 2.0) / 2.0)) / (l1s - l2s)
                    };
                    d += (dev_i * (-a / 3.0)
                        + (e11 * p1 + e22 * p2) * (a - 2.0)
                        + (ib - e11 * (l1s * l1s) - e22 * (l2s * l2s)) * (2.0 * dd))
                        * (m * ja);
                    d += mat4_sym_id() * (2.0 / 3.0 * m * ja * tr3);
                }
                d += mat4_ixi() * (kappa * j * (2.0 * j - 1.0) - sum_a_tr / 9.0);
                d += mat4_sym_id() * (-2.0 * kappa * j * (j - 1.0));
                d
            }
        })
    }
}

fn det_check(f: &Matrix2<f64>) -> Result<f64, SingularDeformation> {
    let j = f.determinant();
    if j <= 0.0 {
        Err(SingularDeformation(j))
    } else {
        Ok(j)
    }
}

/// Spectral decomposition of a symmetric positive definite 2x2 tensor:
/// B = l1^2 E1 + l2^2 E2 with idempotent, mutually orthogonal projections.
/// Returns (l1^2, l2^2, E1, E2) with l1^2 >= l2^2; at coalescence any
/// orthogonal pair is valid and the Cartesian one is returned.
pub fn eigenprojections(b: &Matrix2<f64>) -> (f64, f64, Matrix2<f64>, Matrix2<f64>) {
    let tr = b.trace();
    let det = b.determinant();
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    let l1 = 0.5 * tr + disc;
    let l2 = 0.5 * tr - disc;
    if (l1 - l2).abs() < 1e-14 * tr.abs().max(1.0) {
        return (l1, l2, Matrix2::new(1.0, 0.0, 0.0, 0.0), Matrix2::new(0.0, 0.0, 0.0, 1.0));
    }
    let e1 = (b - Matrix2::identity() * l2) / (l1 - l2);
    let e2 = Matrix2::identity() - e1;
    (l1, l2, e1, e2)
}

const IDX: [(usize, usize); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];

/// I (x) I in the 4-index ordering.
fn mat4_ixi() -> Matrix4<f64> {
    mat4_from(|i, j, k, l| kron(i, j) * kron(k, l))
}

/// Fourth-order symmetric identity.
fn mat4_sym_id() -> Matrix4<f64> {
    mat4_from(|i, j, k, l| 0.5 * (kron(i, k) * kron(j, l) + kron(i, l) * kron(j, k)))
}

/// (I_B)_{ijkl} = (B_ik B_jl + B_il B_jk) / 2.
fn mat4_sym_b(b: &Matrix2<f64>) -> Matrix4<f64> {
    mat4_from(|i, j, k, l| 0.5 * (b[(i, k)] * b[(j, l)] + b[(i, l)] * b[(j, k)]))
}

/// A (x) B.
fn mat4_outer(a: &Matrix2<f64>, b: &Matrix2<f64>) -> Matrix4<f64> {
    mat4_from(|i, j, k, l| a[(i, j)] * b[(k, l)])
}

fn mat4_from(f: impl Fn(usize, usize, usize, usize) -> f64) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    for (row, &(i, j)) in IDX.iter().enumerate() {
        for (col, &(k, l)) in IDX.iter().enumerate() {
            m[(row, col)] = f(i, j, k, l);
        }
    }
    m
}

fn kron(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// Material block of the problem-config JSON.
#[derive(Debug, Clone, Deserialize)]
pub struct MaterialConfig {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub ogden_mu: Option<Vec<f64>>,
    #[serde(default)]
    pub ogden_alpha: Option<Vec<f64>>,
}

impl MaterialConfig {
    pub fn build(&self) -> Result<MaterialModel, String> {
        let kappa = self.kappa.ok_or("material: missing kappa")?;
        let model = match self.kind.as_str() {
            "nh1" => MaterialModel::NeoHookean1 {
                mu: self.mu.ok_or("material: missing mu")?,
                kappa,
            },
            "nh2" => MaterialModel::NeoHookean2 {
                mu: self.mu.ok_or("material: missing mu")?,
                kappa,
            },
            "ogden" => MaterialModel::Ogden {
                mu: self.ogden_mu.clone().ok_or("material: missing ogden_mu")?,
                alpha: self
                    .ogden_alpha
                    .clone()
                    .ok_or("material: missing ogden_alpha")?,
                kappa,
            },
            other => return Err(format!("unknown material type {other:?}")),
        };
        model.validate()?;
        Ok(model)
    }
}
