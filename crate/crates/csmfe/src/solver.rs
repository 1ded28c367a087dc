//! Global assembly, Dirichlet handling and Newton-Raphson load stepping.
//!
//! The assembled tangent is symmetric indefinite with zero (u, u) and
//! (gamma, gamma) blocks, so each iteration is solved with a pivoting sparse
//! LU factorization. Constraints act on displacement dofs only and are
//! imposed by row/column elimination with right-hand-side correction.

use crate::element::{
    element_external_forces, element_internal_forces, element_tangent, ElementDofVector,
    ElementGeometry, NonPositiveJacobian, N_EL,
};
use crate::materials::MaterialModel;
use crate::mesh::{DofMap, Mesh};
use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::prelude::*;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, CholeskySymbolicParams, SymbolicCholesky, SymmetricOrdering,
};
use faer::sparse::{SparseColMat, Triplet};
use nalgebra::Vector2;
use rayon::prelude::*;
use std::sync::Mutex;
use thiserror::Error;

/// Prescribed displacement on one u-dof, given at full load.
#[derive(Debug, Clone, Copy)]
pub struct Constraint {
    pub dof: usize,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub n_load_steps: usize,
    /// Euclidean norm of the increment vector below which a step is converged.
    pub tol: f64,
    pub max_iters: usize,
    /// Retry a failed step with halved increments instead of aborting.
    pub retry_halve: bool,
    /// Emit per-step JSON log lines on stdout.
    pub log_json: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            n_load_steps: 1,
            tol: 1e-9,
            max_iters: 25,
            retry_halve: false,
            log_json: false,
        }
    }
}

/// Dead loads at full load factor.
#[derive(Debug, Clone, Default)]
pub struct Loads {
    /// rho_0 b, applied over the reference volume.
    pub body_force: Vector2<f64>,
    /// Constant reference traction per boundary edge (global edge id).
    pub tractions: Vec<(usize, Vector2<f64>)>,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("constraint targets dof {0}, which is not a displacement dof")]
    ConstraintNotDisplacement(usize),
    #[error("traction applied to edge {0}, which is not a boundary edge")]
    TractionOnInteriorEdge(usize),
    #[error("element state invalid: {0}")]
    BadElementState(#[from] NonPositiveJacobian),
    #[error("linear solver failed to factorize the tangent")]
    SingularFactorization,
    #[error("step {step} did not converge in {iters} iterations (last |dU| = {last_norm:.3e})")]
    NonConvergence {
        step: usize,
        iters: usize,
        last_norm: f64,
        history: Vec<StepRecord>,
    },
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub load_factor: f64,
    pub iters: usize,
    pub increment_norms: Vec<f64>,
}

/// Converged solution with the per-step iteration log.
#[derive(Debug, Clone)]
pub struct Solution {
    pub u: Vec<f64>,
    pub steps: Vec<StepRecord>,
}

impl Solution {
    pub fn mean_iters(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().map(|s| s.iters as f64).sum::<f64>() / self.steps.len() as f64
    }
}

struct ElementContribution {
    dofs: Vec<usize>,
    k: nalgebra::SMatrix<f64, N_EL, N_EL>,
    rhs: nalgebra::SVector<f64, N_EL>,
}

/// Assembled problem: mesh, dof layout, material, loads and constraints.
pub struct System<'a> {
    pub mesh: &'a Mesh,
    pub dofmap: DofMap,
    pub model: &'a MaterialModel,
    geos: Vec<ElementGeometry>,
    element_dofs: Vec<Vec<usize>>,
    /// (local edge, traction) pairs per element.
    element_tractions: Vec<Vec<(usize, Vector2<f64>)>>,
    body_force: Vector2<f64>,
    constraints: Vec<Constraint>,
    constrained: Vec<bool>,
    ldlt: Mutex<SaddleLdlt>,
}

impl<'a> System<'a> {
    pub fn new(
        mesh: &'a Mesh,
        model: &'a MaterialModel,
        loads: &Loads,
        constraints: &[Constraint],
    ) -> Result<Self, SolveError> {
        let dofmap = DofMap::new(mesh);
        let n_u = dofmap.n_u();
        for c in constraints {
            if c.dof >= n_u {
                return Err(SolveError::ConstraintNotDisplacement(c.dof));
            }
        }
        let mut element_tractions = vec![Vec::new(); mesh.n_triangles()];
        for &(edge, t) in &loads.tractions {
            let e = &mesh.edges[edge];
            if !e.boundary {
                return Err(SolveError::TractionOnInteriorEdge(edge));
            }
            let tri = e.incident_tris[0];
            let local = mesh.tri_edges[tri]
                .iter()
                .position(|le| le.edge == edge)
                .expect("incident triangle lists the edge");
            element_tractions[tri].push((local, t));
        }
        let geos = (0..mesh.n_triangles())
            .map(|t| ElementGeometry::new(mesh, t))
            .collect();
        let element_dofs = (0..mesh.n_triangles())
            .map(|t| dofmap.element_dofs(mesh, t))
            .collect();
        let mut constrained = vec![false; dofmap.n_total()];
        for c in constraints {
            constrained[c.dof] = true;
        }
        let ldlt = Mutex::new(SaddleLdlt::new(dofmap.n_total()));
        Ok(System {
            mesh,
            dofmap,
            model,
            geos,
            element_dofs,
            element_tractions,
            body_force: loads.body_force,
            constraints: constraints.to_vec(),
            constrained,
            ldlt,
        })
    }

    pub fn n_dofs(&self) -> usize {
        self.dofmap.n_total()
    }

    /// (refactorizations, cache hits, refinement passes) of the linear solver.
    pub fn solver_stats(&self) -> (usize, usize, usize) {
        self.ldlt.lock().unwrap().stats
    }

    /// Raw residual F_e(load_factor) - F_i(u) over all dofs, unconstrained.
    pub fn raw_residual(&self, u: &[f64], load_factor: f64) -> Result<Vec<f64>, SolveError> {
        let contributions: Result<Vec<_>, NonPositiveJacobian> = self
            .geos
            .par_iter()
            .map(|geo| {
                let dofs = ElementDofVector::gather(u, &self.element_dofs[geo.tri]);
                let f_int = element_internal_forces(geo, &dofs, self.model)?;
                let f_ext = element_external_forces(
                    geo,
                    &(self.body_force * load_factor),
                    &scaled(&self.element_tractions[geo.tri], load_factor),
                );
                Ok((geo.tri, f_ext - f_int))
            })
            .collect();
        let mut r = vec![0.0; self.n_dofs()];
        for (tri, local) in contributions? {
            for (i, &g) in self.element_dofs[tri].iter().enumerate() {
                r[g] += local[i];
            }
        }
        Ok(r)
    }

    /// Assemble the tangent and residual at state `u`, with loads scaled by
    /// `load_factor`. Returns raw triplets and the raw residual.
    pub fn assemble(
        &self,
        u: &[f64],
        load_factor: f64,
    ) -> Result<(Vec<Triplet<usize, usize, f64>>, Vec<f64>), SolveError> {
        let contributions: Result<Vec<ElementContribution>, NonPositiveJacobian> = self
            .geos
            .par_iter()
            .map(|geo| {
                let dofs = ElementDofVector::gather(u, &self.element_dofs[geo.tri]);
                let k = element_tangent(geo, &dofs, self.model)?;
                let f_int = element_internal_forces(geo, &dofs, self.model)?;
                let f_ext = element_external_forces(
                    geo,
                    &(self.body_force * load_factor),
                    &scaled(&self.element_tractions[geo.tri], load_factor),
                );
                Ok(ElementContribution {
                    dofs: self.element_dofs[geo.tri].clone(),
                    k,
                    rhs: f_ext - f_int,
                })
            })
            .collect();
        let contributions = contributions?;

        let n = self.n_dofs();
        let mut residual = vec![0.0; n];
        let mut triplets = Vec::with_capacity(contributions.len() * 1800);
        // the (u,u), (u,alpha) and (gamma,gamma) blocks are structurally
        // zero; skipping them keeps the pattern independent of the state so
        // the symbolic factorization can be reused
        let class = |i: usize| -> u8 {
            if i < crate::element::N_U {
                0
            } else if i < crate::element::N_U + crate::element::N_ALPHA {
                1
            } else {
                2
            }
        };
        for c in &contributions {
            for (i, &gi) in c.dofs.iter().enumerate() {
                residual[gi] += c.rhs[i];
                let ci = class(i);
                for (j, &gj) in c.dofs.iter().enumerate() {
                    let structural = matches!(
                        (ci, class(j)),
                        (0, 2) | (2, 0) | (1, 1) | (1, 2) | (2, 1)
                    );
                    if structural {
                        triplets.push(Triplet::new(gi, gj, c.k[(i, j)]));
                    }
                }
            }
        }
        Ok((triplets, residual))
    }

    /// Row/column elimination of constrained dofs: constrained rows become
    /// identity with the prescribed increment on the right-hand side, and
    /// their columns are moved to the right-hand side.
    pub fn apply_dirichlet(
        &self,
        triplets: Vec<Triplet<usize, usize, f64>>,
        mut rhs: Vec<f64>,
        prescribed: &[(usize, f64)],
    ) -> (Vec<Triplet<usize, usize, f64>>, Vec<f64>) {
        let n = rhs.len();
        let mut delta = vec![0.0; n];
        for &(dof, inc) in prescribed {
            delta[dof] = inc;
        }
        let mut reduced = Vec::with_capacity(triplets.len());
        for t in triplets {
            let (r, c, v) = (t.row, t.col, t.val);
            match (self.constrained[r], self.constrained[c]) {
                (false, false) => reduced.push(Triplet::new(r, c, v)),
                (false, true) => rhs[r] -= v * delta[c],
                _ => {}
            }
        }
        for c in &self.constraints {
            reduced.push(Triplet::new(c.dof, c.dof, 1.0));
            rhs[c.dof] = delta[c.dof];
        }
        (reduced, rhs)
    }

    /// Full Newton-Raphson over `config.n_load_steps` proportional steps.
    pub fn newton_solve(&self, config: &SolverConfig) -> Result<Solution, SolveError> {
        self.newton_solve_with(config, |_, _, _| {})
    }

    /// As `newton_solve`, invoking `on_step(step, load_factor, u)` after each
    /// converged load step.
    pub fn newton_solve_with(
        &self,
        config: &SolverConfig,
        mut on_step: impl FnMut(usize, f64, &[f64]),
    ) -> Result<Solution, SolveError> {
        let mut u = vec![0.0; self.n_dofs()];
        let mut steps: Vec<StepRecord> = Vec::with_capacity(config.n_load_steps);
        let mut factors: Vec<f64> = (1..=config.n_load_steps)
            .map(|s| s as f64 / config.n_load_steps as f64)
            .collect();
        let mut idx = 0;
        let mut halvings = 0;
        while idx < factors.len() {
            let lf = factors[idx];
            let u_backup = u.clone();
            match self.solve_step(&mut u, lf, steps.len() + 1, config) {
                Ok(rec) => {
                    if config.log_json {
                        println!("{}", serde_json::to_string(&rec).unwrap());
                    }
                    on_step(rec.step, rec.load_factor, &u);
                    steps.push(rec);
                    idx += 1;
                }
                Err(e) => {
                    if config.retry_halve && halvings < 8 {
                        // split the failed increment in two
                        let prev = if idx == 0 { 0.0 } else { factors[idx - 1] };
                        let mid = 0.5 * (prev + lf);
                        factors.insert(idx, mid);
                        halvings += 1;
                        u = u_backup;
                        continue;
                    }
                    return Err(match e {
                        StepFailure::Solve(err) => err,
                        StepFailure::NoConvergence { iters, last_norm } => {
                            SolveError::NonConvergence {
                                step: steps.len() + 1,
                                iters,
                                last_norm,
                                history: steps,
                            }
                        }
                    });
                }
            }
        }
        Ok(Solution { u, steps })
    }

    fn solve_step(
        &self,
        u: &mut Vec<f64>,
        load_factor: f64,
        step_no: usize,
        config: &SolverConfig,
    ) -> Result<StepRecord, StepFailure> {
        let mut norms = Vec::new();
        for iter in 0..config.max_iters {
            let (triplets, residual) = self
                .assemble(u, load_factor)
                .map_err(StepFailure::Solve)?;
            // prescribed increments enter on the first iteration of the step
            let prescribed: Vec<(usize, f64)> = if iter == 0 {
                self.constraints
                    .iter()
                    .map(|c| (c.dof, load_factor * c.total - u[c.dof]))
                    .collect()
            } else {
                self.constraints.iter().map(|c| (c.dof, 0.0)).collect()
            };
            let (reduced, rhs) = self.apply_dirichlet(triplets, residual, &prescribed);
            let du = self
                .ldlt
                .lock()
                .unwrap()
                .solve(&reduced, &rhs)
                .map_err(StepFailure::Solve)?;
            for (ui, di) in u.iter_mut().zip(&du) {
                *ui += di;
            }
            let norm = du.iter().map(|x| x * x).sum::<f64>().sqrt();
            norms.push(norm);
            // primary criterion, plus acceptance at the round-off floor:
            // two consecutive iterations that no longer decrease while both
            // sit far below any physical scale mean the residual evaluation
            // noise dominates and the step is converged
            let at_floor = norms.len() >= 2 && {
                let prev = norms[norms.len() - 2];
                norm < 100.0 * config.tol && prev < 100.0 * config.tol && norm >= 0.25 * prev
            };
            if norm < config.tol || at_floor {
                return Ok(StepRecord {
                    step: step_no,
                    load_factor,
                    iters: iter + 1,
                    increment_norms: norms,
                });
            }
        }
        Err(StepFailure::NoConvergence {
            iters: config.max_iters,
            last_norm: *norms.last().unwrap_or(&f64::NAN),
        })
    }
}

enum StepFailure {
    Solve(SolveError),
    NoConvergence { iters: usize, last_norm: f64 },
}

fn scaled(tractions: &[(usize, Vector2<f64>)], factor: f64) -> Vec<(usize, Vector2<f64>)> {
    tractions.iter().map(|&(e, t)| (e, t * factor)).collect()
}

/// Reusable direct solver for the saddle-point tangents of one system.
///
/// The tangent is symmetrically equilibrated, ordered once by AMD, and
/// factorized by a supernodal LDL^T whose structurally zero pivots (the
/// (u, u) and (gamma, gamma) blocks) are handled by dynamic sign-based
/// regularization. Iterative refinement against the unregularized matrix
/// restores full accuracy; the factorization is reused across Newton
/// iterations as a preconditioner and rebuilt when the contraction
/// degrades. Each returned solution satisfies the backward-residual
/// acceptance on the current matrix.
pub struct SaddleLdlt {
    n: usize,
    symbolic: Option<SymbolicCholesky<usize>>,
    cached: Option<CachedFactor>,
    /// (refactorizations, cache hits, refinement passes) since creation.
    pub stats: (usize, usize, usize),
    /// print refinement diagnostics for the next solve
    pub debug_next: bool,
}

struct CachedFactor {
    scale: Vec<f64>,
    l_values: Vec<f64>,
}

/// Regularization ladder: escalated when the factorization overflows.
const REG_LADDER: [(f64, f64); 4] = [(1e-9, 1e-7), (1e-8, 1e-6), (1e-7, 1e-5), (1e-6, 1e-4)];

enum Refine {
    Converged(Vec<f64>, usize),
    Stalled,
}

impl SaddleLdlt {
    pub fn new(n: usize) -> Self {
        SaddleLdlt {
            n,
            symbolic: None,
            cached: None,
            stats: (0, 0, 0),
            debug_next: false,
        }
    }

    /// Solve `K x = rhs` to a backward residual of 1e-10 |rhs| plus the f64
    /// evaluation floor of the residual itself.
    pub fn solve(
        &mut self,
        triplets: &[Triplet<usize, usize, f64>],
        rhs: &[f64],
    ) -> Result<Vec<f64>, SolveError> {
        if let Some(cached) = &self.cached {
            if let Refine::Converged(x, passes) = self.refine(cached, triplets, rhs, 20) {
                self.stats.1 += 1;
                self.stats.2 += passes;
                return Ok(x);
            }
        }
        for (attempt, &(eps, delta)) in REG_LADDER.iter().enumerate() {
            if self.refactorize(triplets, eps, delta).is_err() {
                continue;
            }
            self.stats.0 += 1;
            let budget = 20 + 20 * attempt;
            match self.refine(self.cached.as_ref().unwrap(), triplets, rhs, budget) {
                Refine::Converged(x, passes) => {
                    self.stats.2 += passes;
                    return Ok(x);
                }
                Refine::Stalled => continue,
            }
        }
        Err(SolveError::SingularFactorization)
    }

    fn refactorize(
        &mut self,
        triplets: &[Triplet<usize, usize, f64>],
        eps: f64,
        delta: f64,
    ) -> Result<(), SolveError> {
        let n = self.n;
        // two passes of symmetric row-max equilibration
        let mut d = vec![1.0f64; n];
        for _ in 0..2 {
            let mut rmax = vec![0.0f64; n];
            for t in triplets {
                let v = (t.val * d[t.row] * d[t.col]).abs();
                if v > rmax[t.row] {
                    rmax[t.row] = v;
                }
            }
            for i in 0..n {
                if rmax[i] > 0.0 {
                    d[i] /= rmax[i].sqrt();
                }
            }
        }
        // upper triangle of the scaled matrix with every diagonal present so
        // the regularization has a slot to act on
        let mut upper: Vec<Triplet<usize, usize, f64>> = triplets
            .iter()
            .filter(|t| t.row <= t.col)
            .map(|t| Triplet::new(t.row, t.col, t.val * d[t.row] * d[t.col]))
            .collect();
        for i in 0..n {
            upper.push(Triplet::new(i, i, 0.0));
        }
        let smat = SparseColMat::try_new_from_triplets(n, n, &upper)
            .map_err(|_| SolveError::SingularFactorization)?;

        if self.symbolic.is_none() {
            self.symbolic = Some(
                factorize_symbolic_cholesky(
                    smat.symbolic(),
                    faer::Side::Upper,
                    SymmetricOrdering::Amd,
                    CholeskySymbolicParams::default(),
                )
                .map_err(|_| SolveError::SingularFactorization)?,
            );
        }
        let symbolic = self.symbolic.as_ref().unwrap();

        let par = faer::Par::rayon(0);
        let params = Default::default();
        let mut l_values = vec![0.0f64; symbolic.len_val()];
        let mut mem = MemBuffer::new(
            symbolic.factorize_numeric_ldlt_scratch::<f64>(par, params),
        );
        // regularize only pivots inside the eps band, keeping their own
        // sign: the partial Schur complements of the saddle structure do not
        // follow the final inertia pivot by pivot, so sign enforcement would
        // perturb legitimate pivots
        let reg = LdltRegularization {
            dynamic_regularization_signs: None,
            dynamic_regularization_delta: delta,
            dynamic_regularization_epsilon: eps,
        };
        symbolic
            .factorize_numeric_ldlt(
                &mut l_values,
                smat.rb(),
                faer::Side::Upper,
                reg,
                par,
                MemStack::new(&mut mem),
                params,
            )
            .map_err(|_| SolveError::SingularFactorization)?;
        self.cached = Some(CachedFactor {
            scale: d,
            l_values,
        });
        Ok(())
    }

    fn apply(&self, cached: &CachedFactor, r: &[f64]) -> Vec<f64> {
        let n = self.n;
        let symbolic = self.symbolic.as_ref().unwrap();
        let ldlt = faer::sparse::linalg::cholesky::LdltRef::new(symbolic, &cached.l_values);
        let par = faer::Par::rayon(0);
        let mut mem = MemBuffer::new(symbolic.solve_in_place_scratch::<f64>(1, par));
        let mut y = Mat::from_fn(n, 1, |i, _| r[i] * cached.scale[i]);
        ldlt.solve_in_place_with_conj(faer::Conj::No, y.as_mut(), par, MemStack::new(&mut mem));
        (0..n).map(|i| y[(i, 0)] * cached.scale[i]).collect()
    }

    /// Refinement on the current system preconditioned by the cached factor.
    fn refine(
        &self,
        cached: &CachedFactor,
        triplets: &[Triplet<usize, usize, f64>],
        rhs: &[f64],
        budget: usize,
    ) -> Refine {
        let n = rhs.len();
        let bn = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut x = self.apply(cached, rhs);
        let mut prev_rn = f64::INFINITY;
        for pass in 0..budget {
            let mut r = rhs.to_vec();
            let mut noise = vec![0.0f64; n];
            for t in triplets {
                let p = t.val * x[t.col];
                r[t.row] -= p;
                noise[t.row] += p.abs();
            }
            let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            let floor = 4.0 * f64::EPSILON * noise.iter().map(|v| v * v).sum::<f64>().sqrt();
            if self.debug_next {
                eprintln!("    refine pass {pass}: rel {:.2e} floor-rel {:.2e}", rn / bn.max(1e-300), floor / bn.max(1e-300));
            }
            if rn.is_finite() && rn <= 1e-10 * bn.max(1e-300) + floor {
                return Refine::Converged(x, pass + 1);
            }
            if !rn.is_finite() || rn > 0.7 * prev_rn {
                return Refine::Stalled;
            }
            prev_rn = rn;
            if pass + 1 == budget {
                break;
            }
            let dx = self.apply(cached, &r);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
        }
        Refine::Stalled
    }
}

/// One-shot direct sparse solve of a symmetric-indefinite system.
///
/// The displacement, strain and stress blocks live on very different scales
/// (geometry vs. bulk modulus), so the matrix is symmetrically equilibrated
/// before factorization; iterative refinement on the original system then
/// reaches a backward residual of 1e-10 |rhs| (plus round-off floor).
pub fn linear_solve(
    n: usize,
    triplets: &[Triplet<usize, usize, f64>],
    rhs: &[f64],
) -> Result<Vec<f64>, SolveError> {
    SaddleLdlt::new(n).solve(triplets, rhs).or_else(|_| {
        // signless fallback through pivoting LU
        let mat = SparseColMat::try_new_from_triplets(n, n, triplets)
            .map_err(|_| SolveError::SingularFactorization)?;
        let lu = mat.sp_lu().map_err(|_| SolveError::SingularFactorization)?;
        let b = Mat::from_fn(n, 1, |i, _| rhs[i]);
        let bn = b.norm_l2();
        let mut x = lu.solve(&b);
        for _ in 0..6 {
            let r = &b - &mat * &x;
            if r.norm_l2() <= 1e-10 * bn.max(1e-300) {
                return Ok((0..n).map(|i| x[(i, 0)]).collect());
            }
            x += lu.solve(&r);
        }
        let r = &b - &mat * &x;
        if r.norm_l2() <= 1e-9 * bn.max(1e-300) {
            Ok((0..n).map(|i| x[(i, 0)]).collect())
        } else {
            Err(SolveError::SingularFactorization)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;
    use approx::assert_abs_diff_eq;
    use nalgebra::Point2;

    fn nh1() -> MaterialModel {
        MaterialModel::NeoHookean1 {
            mu: 80.2,
            kappa: 40_000.0,
        }
    }

    #[test]
    fn linear_solve_identity_and_saddle() {
        let trips = vec![Triplet::new(0usize, 0usize, 1.0), Triplet::new(1, 1, 1.0)];
        let x = linear_solve(2, &trips, &[3.0, 4.0]).unwrap();
        assert_abs_diff_eq!(x[0], 3.0, epsilon = 1e-14);

        // indefinite 2x2 [[0,1],[1,0]] needs a pivot swap
        let trips = vec![Triplet::new(0usize, 1usize, 1.0), Triplet::new(1, 0, 1.0)];
        let x = linear_solve(2, &trips, &[1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(x[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn linear_solve_random_spd_matches_dense() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 100;
        let a = nalgebra::DMatrix::<f64>::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        let spd = &a * a.transpose() + nalgebra::DMatrix::identity(n, n) * (n as f64);
        let mut trips = Vec::new();
        for i in 0..n {
            for j in 0..n {
                trips.push(Triplet::new(i, j, spd[(i, j)]));
            }
        }
        let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let x = linear_solve(n, &trips, &b).unwrap();
        let dense = spd
            .lu()
            .solve(&nalgebra::DVector::from_column_slice(&b))
            .unwrap();
        for i in 0..n {
            assert_abs_diff_eq!(x[i], dense[i], epsilon = 1e-10 * dense.norm());
        }
    }

    #[test]
    fn constraint_on_alpha_dof_rejected() {
        let mesh = Mesh::build(
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(0.0, 1.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let model = nh1();
        let bad = [Constraint { dof: 12, total: 0.0 }]; // first alpha dof
        let err = System::new(&mesh, &model, &Loads::default(), &bad);
        assert!(matches!(
            err,
            Err(SolveError::ConstraintNotDisplacement(12))
        ));
    }

    #[test]
    fn traction_on_interior_edge_rejected() {
        let mesh = Mesh::build(
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(1.0, 1.0),
                Point2::new(0.0, 1.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        let model = nh1();
        let interior = mesh.edges.iter().find(|e| !e.boundary).unwrap().id;
        let loads = Loads {
            tractions: vec![(interior, Vector2::new(1.0, 0.0))],
            ..Default::default()
        };
        assert!(matches!(
            System::new(&mesh, &model, &loads, &[]),
            Err(SolveError::TractionOnInteriorEdge(_))
        ));
    }

    #[test]
    fn all_fixed_no_load_stays_zero() {
        let mesh = Mesh::build(
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(0.0, 1.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let model = nh1();
        let dm = DofMap::new(&mesh);
        let constraints: Vec<Constraint> = (0..dm.n_u())
            .map(|dof| Constraint { dof, total: 0.0 })
            .collect();
        let system = System::new(&mesh, &model, &Loads::default(), &constraints).unwrap();
        let sol = system
            .newton_solve(&SolverConfig {
                n_load_steps: 1,
                ..Default::default()
            })
            .unwrap();
        assert!(sol.u.iter().all(|&x| x.abs() < 1e-12));
        assert_eq!(sol.steps.len(), 1);
    }

    #[test]
    fn zero_state_zero_residual() {
        let mesh = Mesh::build(
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(0.0, 1.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let model = nh1();
        let system = System::new(&mesh, &model, &Loads::default(), &[]).unwrap();
        let (_, residual) = system.assemble(&vec![0.0; system.n_dofs()], 1.0).unwrap();
        assert!(residual.iter().all(|&x| x.abs() < 1e-12));
    }

    #[test]
    fn global_assembly_symmetric_two_elements() {
        let mesh = Mesh::build(
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(1.0, 1.0),
                Point2::new(0.0, 1.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        let model = nh1();
        let system = System::new(&mesh, &model, &Loads::default(), &[]).unwrap();
        let n = system.n_dofs();
        let (trips, _) = system.assemble(&vec![0.0; n], 1.0).unwrap();
        let mut dense = nalgebra::DMatrix::<f64>::zeros(n, n);
        for t in &trips {
            dense[(t.row, t.col)] += t.val;
        }
        let asym = (&dense - dense.transpose()).norm() / dense.norm();
        assert!(asym < 1e-12, "global asymmetry {asym}");
    }
}
