//! Dense primal-dual interior-point solver for small semidefinite programs.
//!
//! Standard primal/dual pair:
//!
//! ```text
//! (P)  min  C . X    s.t.  A_i . X = b_i,  X >= 0
//! (D)  max  b' y     s.t.  S = C - sum_i y_i A_i >= 0
//! ```
//!
//! The solver follows the central path `X S = mu I` with Nesterov-Todd
//! scaled Newton steps. Each iteration factors the scaling point `W`
//! (satisfying `W S W = X`), forms the Schur complement
//! `M[i][j] = A_i . (W A_j W)`, and solves for the dual step through a
//! symmetric eigendecomposition pseudo-inverse, which tolerates linearly
//! dependent constraint sets. Step lengths are held strictly inside the cone
//! by a fraction-to-boundary rule, and the centering parameter follows the
//! Mehrotra probing heuristic `sigma = (mu_aff / mu)^3`.
//!
//! Problems here are small (`n <= 64`, `m <= 128`), so everything is dense
//! and factored from scratch every iteration.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

use crate::float::{cst, to_f64, Float};

/// Default convergence tolerance on the relative residuals and gap.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Default iteration cap.
pub const DEFAULT_MAX_ITER: usize = 100;

const MAX_DIM: usize = 64;
const MAX_CONSTRAINTS: usize = 128;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("objective and constraints must be {n}x{n}; constraint {index} is {rows}x{cols}")]
    DimensionMismatch {
        n: usize,
        index: usize,
        rows: usize,
        cols: usize,
    },
    #[error("matrix {index} is not symmetric (defect {defect:.3e})")]
    NotSymmetric { index: usize, defect: f64 },
    #[error("problem size n={n}, m={m} outside supported range (n <= 64, 1 <= m <= 128)")]
    UnsupportedSize { n: usize, m: usize },
    #[error("tolerance {0:.3e} outside [1e-12, 1e-4]")]
    InvalidTolerance(f64),
}

/// A dense SDP in standard primal form.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem<T: Float = f64> {
    c: DMatrix<T>,
    constraints: Vec<(DMatrix<T>, T)>,
}

impl<T: Float> SdpProblem<T> {
    pub fn new(c: DMatrix<T>, constraints: Vec<(DMatrix<T>, T)>) -> Result<Self, SdpError> {
        let n = c.nrows();
        let m = constraints.len();
        if n == 0 || n > MAX_DIM || m == 0 || m > MAX_CONSTRAINTS {
            return Err(SdpError::UnsupportedSize { n, m });
        }
        let check_sym = |mat: &DMatrix<T>, index: usize| -> Result<(), SdpError> {
            let defect = (mat - mat.transpose()).norm();
            let scale = mat.norm().max(T::one());
            if defect > cst::<T>(1e-12) * scale {
                return Err(SdpError::NotSymmetric {
                    index,
                    defect: to_f64(defect),
                });
            }
            Ok(())
        };
        if c.ncols() != n {
            return Err(SdpError::DimensionMismatch {
                n,
                index: 0,
                rows: c.nrows(),
                cols: c.ncols(),
            });
        }
        check_sym(&c, 0)?;
        for (i, (a, _)) in constraints.iter().enumerate() {
            if a.nrows() != n || a.ncols() != n {
                return Err(SdpError::DimensionMismatch {
                    n,
                    index: i + 1,
                    rows: a.nrows(),
                    cols: a.ncols(),
                });
            }
            check_sym(a, i + 1)?;
        }
        Ok(SdpProblem { c, constraints })
    }

    pub fn dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn objective(&self) -> &DMatrix<T> {
        &self.c
    }

    pub fn constraints(&self) -> &[(DMatrix<T>, T)] {
        &self.constraints
    }

    /// Plain-text dump for cross-checking against external solvers: first
    /// line `n m`, then the objective row-major (one matrix row per line),
    /// then for each constraint its matrix row-major followed by a line with
    /// the right-hand side.
    pub fn write_debug_dump<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        let n = self.dim();
        writeln!(out, "{} {}", n, self.num_constraints())?;
        let dump = |out: &mut W, mat: &DMatrix<T>| -> std::io::Result<()> {
            for i in 0..n {
                let row: Vec<String> = (0..n).map(|j| format!("{:e}", to_f64(mat[(i, j)]))).collect();
                writeln!(out, "{}", row.join(" "))?;
            }
            Ok(())
        };
        dump(out, &self.c)?;
        for (a, b) in &self.constraints {
            dump(out, a)?;
            writeln!(out, "{:e}", to_f64(*b))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    /// Residuals and gap below tolerance.
    Optimal,
    /// Iteration cap reached before convergence.
    MaxIterations,
    /// Merit stagnated or a factorization failed.
    NumericalFailure,
    /// Iterate divergence indicates primal or dual infeasibility.
    Infeasible,
}

/// Per-iteration diagnostics retained for convergence analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterStats<T: Float = f64> {
    pub mu: T,
    pub gap: T,
    pub primal_residual: T,
    pub dual_residual: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution<T: Float = f64> {
    pub x_mat: DMatrix<T>,
    pub y: DVector<T>,
    pub s: DMatrix<T>,
    pub status: SdpStatus,
    pub iterations: usize,
    /// Signed duality gap `C . X - b' y` at the returned iterate.
    pub gap: T,
    pub primal_residual: T,
    pub dual_residual: T,
    pub trace: Vec<IterStats<T>>,
}

impl<T: Float> SdpSolution<T> {
    pub fn objective_value(&self, problem: &SdpProblem<T>) -> T {
        frob(&problem.c, &self.x_mat)
    }

    pub fn dual_objective(&self, problem: &SdpProblem<T>) -> T {
        self.y
            .iter()
            .zip(problem.constraints.iter())
            .fold(T::zero(), |acc, (yi, (_, bi))| acc + *yi * *bi)
    }
}

fn frob<T: Float>(a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    a.iter().zip(b.iter()).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

fn symmetrize<T: Float>(m: &mut DMatrix<T>) {
    let half: T = cst(0.5);
    let t = m.transpose();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            m[(i, j)] = (m[(i, j)] + t[(i, j)]) * half;
        }
    }
}

/// Minimum-norm solution of `M z = h` for symmetric PSD `M` via eigenvalue
/// thresholding; last-resort path when factorization fails outright.
fn pinv_solve<T: Float>(m: &DMatrix<T>, h: &DVector<T>) -> DVector<T> {
    let eig = SymmetricEigen::new(m.clone());
    let lambda_max = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(T::zero(), |a, b| a.max(b.abs()));
    let cut = lambda_max * cst::<T>(1e-13);
    let qt_h = eig.eigenvectors.transpose() * h;
    let mut scaled = qt_h;
    for (i, v) in scaled.iter_mut().enumerate() {
        let lambda = eig.eigenvalues[i];
        *v = if lambda.abs() > cut { *v / lambda } else { T::zero() };
    }
    &eig.eigenvectors * scaled
}

/// Solves `M z = h` for the symmetric positive (semi)definite Schur
/// complement: Cholesky with an escalating diagonal lift, sharpened by one
/// iterative-refinement pass against the unlifted matrix.
fn schur_solve<T: Float>(m: &DMatrix<T>, h: &DVector<T>) -> DVector<T> {
    let dim = m.nrows();
    let mut max_diag = T::zero();
    for i in 0..dim {
        max_diag = max_diag.max(m[(i, i)].abs());
    }
    for &lift in &[0.0f64, 1e-14, 1e-11, 1e-8] {
        let delta = cst::<T>(lift) * max_diag;
        let lifted = if lift == 0.0 {
            m.clone()
        } else {
            m + DMatrix::identity(dim, dim) * delta
        };
        if let Some(chol) = lifted.cholesky() {
            let mut z = chol.solve(h);
            let r = h - m * &z;
            z += chol.solve(&r);
            return z;
        }
    }
    pinv_solve(m, h)
}

/// Greedy maximal linearly independent subset of the constraint matrices,
/// with least-squares coefficients for each dependent row so its right-hand
/// side can be checked for consistency.
fn independent_constraints<T: Float>(
    constraints: &[(DMatrix<T>, T)],
) -> (Vec<usize>, Vec<(usize, T)>) {
    let mut kept: Vec<usize> = Vec::new();
    let mut basis: Vec<DMatrix<T>> = Vec::new();
    let mut basis_b: Vec<T> = Vec::new();
    let mut dropped: Vec<(usize, T)> = Vec::new();
    for (i, (a, b)) in constraints.iter().enumerate() {
        let mut residual = a.clone();
        let mut implied_b = T::zero();
        for (e, eb) in basis.iter().zip(basis_b.iter()) {
            let coeff = frob(&residual, e);
            residual -= e * coeff;
            implied_b += coeff * *eb;
        }
        let norm = residual.norm();
        if norm > cst::<T>(1e-10) * a.norm().max(T::one()) {
            kept.push(i);
            basis.push(&residual / norm);
            // the orthonormalized element inherits a consistent rhs:
            // b_i = sum coeff_k * b_basis_k + norm * b_new
            basis_b.push((*b - implied_b) / norm);
        } else {
            dropped.push((i, implied_b));
        }
    }
    (kept, dropped)
}

struct Workspace<T: Float> {
    x: DMatrix<T>,
    y: DVector<T>,
    s: DMatrix<T>,
}

/// Solves the SDP by NT-scaled path following.
///
/// `tol` bounds the relative primal/dual residuals and the relative duality
/// gap at an `Optimal` exit; it must lie in `[1e-12, 1e-4]`. Deterministic
/// for fixed inputs.
pub fn solve<T: Float>(
    problem: &SdpProblem<T>,
    tol: T,
    max_iter: usize,
) -> Result<SdpSolution<T>, SdpError> {
    if tol < cst(1e-12) || tol > cst(1e-4) {
        return Err(SdpError::InvalidTolerance(to_f64(tol)));
    }
    let n = problem.dim();
    let m = problem.num_constraints();
    let nf: T = cst(n as f64);

    let norm_c = problem.c.norm();
    let max_b = problem
        .constraints
        .iter()
        .fold(T::zero(), |acc, (_, b)| acc.max(b.abs()));
    let norm_b = problem
        .constraints
        .iter()
        .fold(T::zero(), |acc, (_, b)| acc + *b * *b)
        .sqrt();

    // exact linear dependence among the A_i breaks the Schur factorization;
    // iterate on a maximal independent subset and give dropped rows zero
    // multipliers. An inconsistent dependent row certifies infeasibility.
    let (active, dropped) = independent_constraints(&problem.constraints);
    for (i, implied_b) in &dropped {
        let b_i = problem.constraints[*i].1;
        if (b_i - *implied_b).abs() > cst::<T>(1e-8) * (T::one() + max_b) {
            return Ok(SdpSolution {
                x_mat: DMatrix::identity(n, n),
                y: DVector::zeros(m),
                s: problem.c.clone(),
                status: SdpStatus::Infeasible,
                iterations: 0,
                gap: T::zero(),
                primal_residual: (b_i - *implied_b).abs(),
                dual_residual: T::zero(),
                trace: Vec::new(),
            });
        }
    }
    let m_act = active.len();

    // well-centered cold start
    let tau0 = T::one() + norm_c + max_b;
    let mut w = Workspace {
        x: DMatrix::identity(n, n) * tau0,
        y: DVector::zeros(m),
        s: DMatrix::identity(n, n) * tau0,
    };

    let mut trace = Vec::with_capacity(max_iter + 1);
    let mut status = SdpStatus::MaxIterations;
    let mut iterations = 0;
    let mut prev_merit: Option<T> = None;
    let mut stall_count = 0usize;

    let diverged = |w: &Workspace<T>| -> bool {
        let big = cst::<T>(1e12);
        w.x.trace() > big * tau0 * nf
            || w.s.trace() > big * tau0 * nf
            || w.y.norm() > big * (T::one() + norm_b)
    };

    for iter in 0..=max_iter {
        iterations = iter;

        // residuals at the current iterate
        let mut r_p = DVector::<T>::zeros(m);
        for (i, (a, b)) in problem.constraints.iter().enumerate() {
            r_p[i] = *b - frob(a, &w.x);
        }
        let mut a_star_y = DMatrix::<T>::zeros(n, n);
        for (i, (a, _)) in problem.constraints.iter().enumerate() {
            a_star_y += a * w.y[i];
        }
        let r_d = &problem.c - &w.s - &a_star_y;

        let cx = frob(&problem.c, &w.x);
        let by = w
            .y
            .iter()
            .zip(problem.constraints.iter())
            .fold(T::zero(), |acc, (yi, (_, bi))| acc + *yi * *bi);
        let gap = cx - by;
        let mu = frob(&w.x, &w.s) / nf;

        let rel_p = r_p.norm() / (T::one() + norm_b);
        let rel_d = r_d.norm() / (T::one() + norm_c);
        let rel_g = gap.abs() / (T::one() + cx.abs() + by.abs());

        trace.push(IterStats {
            mu,
            gap,
            primal_residual: rel_p,
            dual_residual: rel_d,
        });

        if rel_p <= tol && rel_d <= tol && rel_g <= tol {
            status = SdpStatus::Optimal;
            break;
        }
        if diverged(&w) {
            status = SdpStatus::Infeasible;
            break;
        }
        let merit = mu + rel_p + rel_d;
        if let Some(prev) = prev_merit {
            if merit >= prev {
                stall_count += 1;
            } else {
                stall_count = 0;
            }
            if stall_count >= 10 {
                status = SdpStatus::NumericalFailure;
                break;
            }
        }
        prev_merit = Some(merit);
        if iter == max_iter {
            break;
        }

        // factorizations
        let chol_x = match w.x.clone().cholesky() {
            Some(c) => c,
            None => {
                status = SdpStatus::NumericalFailure;
                break;
            }
        };
        let lx = chol_x.l();

        // NT scaling factor G with G' S G = G^-1 X G^-T = D, computed from
        // the eigendecomposition of Lx' S Lx. On the central path D has all
        // entries near sqrt(mu), so the scaled complementarity target stays
        // well conditioned even when X and S are individually near singular.
        let t_mat = {
            let mut t = lx.transpose() * &w.s * &lx;
            symmetrize(&mut t);
            t
        };
        let eig = SymmetricEigen::new(t_mat);
        let mut ok = true;
        for v in eig.eigenvalues.iter() {
            if *v <= T::zero() {
                ok = false;
                break;
            }
        }
        if !ok {
            status = SdpStatus::NumericalFailure;
            break;
        }
        let d_vec: DVector<T> = eig.eigenvalues.map(|v| v.sqrt());
        let lam_quarter_inv = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.powf(cst(-0.25))));
        let g = &lx * &eig.eigenvectors * &lam_quarter_inv;

        // scaled constraint matrices and their Gram matrix (the Schur
        // complement, symmetric PSD by construction)
        let a_hat: Vec<DMatrix<T>> = active
            .iter()
            .map(|&j| {
                let mut ah = g.transpose() * &problem.constraints[j].0 * &g;
                symmetrize(&mut ah);
                ah
            })
            .collect();
        let mut schur = DMatrix::<T>::zeros(m_act, m_act);
        for i in 0..m_act {
            for j in i..m_act {
                let v = frob(&a_hat[i], &a_hat[j]);
                schur[(i, j)] = v;
                schur[(j, i)] = v;
            }
        }
        let rd_hat = {
            let mut r = g.transpose() * &r_d * &g;
            symmetrize(&mut r);
            r
        };

        // scaled direction for a given centering target sigma*mu:
        //   dXh + dSh = sigma*mu*D^-1 - D          (diagonal target)
        //   Ah_i . dXh = rp_i,  Ah*(dy) + dSh = Rdh
        // The scaled-space mapping leaks round-off into the primal equation,
        // so one refinement pass re-measures A_i . dX in the original space
        // and corrects dy along the same Schur factorization. dS is rebuilt
        // from dy directly so the dual equation holds to machine precision.
        let direction = |sigma_mu: T| -> (DMatrix<T>, DVector<T>, DMatrix<T>, DMatrix<T>) {
            let e_diag: DVector<T> = d_vec.map(|d| sigma_mu / d - d);
            let mut rhs = DVector::<T>::zeros(m_act);
            for (k, ah) in a_hat.iter().enumerate() {
                let mut ae = T::zero();
                for i in 0..n {
                    ae += ah[(i, i)] * e_diag[i];
                }
                rhs[k] = r_p[active[k]] - ae + frob(ah, &rd_hat);
            }
            let mut dy_act = schur_solve(&schur, &rhs);
            let mut dx_hat = {
                let mut v = -rd_hat.clone();
                for (k, ah) in a_hat.iter().enumerate() {
                    v += ah * dy_act[k];
                }
                for i in 0..n {
                    v[(i, i)] += e_diag[i];
                }
                symmetrize(&mut v);
                v
            };
            let mut dx = &g * &dx_hat * g.transpose();
            symmetrize(&mut dx);
            // refinement against the unscaled primal equation
            let mut res = DVector::<T>::zeros(m_act);
            for (k, &i) in active.iter().enumerate() {
                res[k] = r_p[i] - frob(&problem.constraints[i].0, &dx);
            }
            let corr = schur_solve(&schur, &res);
            dy_act += &corr;
            for (k, ah) in a_hat.iter().enumerate() {
                dx_hat += ah * corr[k];
            }
            symmetrize(&mut dx_hat);
            dx = &g * &dx_hat * g.transpose();
            symmetrize(&mut dx);

            let mut dy = DVector::<T>::zeros(m);
            for (k, &i) in active.iter().enumerate() {
                dy[i] = dy_act[k];
            }
            let mut ds = r_d.clone();
            for (k, &i) in active.iter().enumerate() {
                ds -= &problem.constraints[i].0 * dy_act[k];
            }
            symmetrize(&mut ds);
            (dx_hat, dy, ds, dx)
        };

        // largest step keeping D + alpha * dH in the cone
        let scaled_step = |dh: &DMatrix<T>| -> T {
            let mut gmat = dh.clone();
            for i in 0..n {
                for j in 0..n {
                    gmat[(i, j)] /= d_vec[i].sqrt() * d_vec[j].sqrt();
                }
            }
            symmetrize(&mut gmat);
            let eig = SymmetricEigen::new(gmat);
            let lambda_min = eig
                .eigenvalues
                .iter()
                .copied()
                .fold(T::max_value().unwrap(), |a, b| a.min(b));
            if lambda_min >= -cst::<T>(1e-14) {
                cst(1e16)
            } else {
                -T::one() / lambda_min
            }
        };

        let scaled_dual = |ds: &DMatrix<T>| -> DMatrix<T> {
            let mut v = g.transpose() * ds * &g;
            symmetrize(&mut v);
            v
        };

        // predictor: affine direction probes the achievable progress
        let (dx_aff_hat, _, ds_aff, dx_aff) = direction(T::zero());
        let ap_aff = scaled_step(&dx_aff_hat).min(T::one());
        let ad_aff = scaled_step(&scaled_dual(&ds_aff)).min(T::one());
        let x_aff = &w.x + &dx_aff * ap_aff;
        let s_aff = &w.s + &ds_aff * ad_aff;
        let mu_aff = (frob(&x_aff, &s_aff) / nf).max(T::zero());
        let ratio = (mu_aff / mu).max(cst(0.0)).min(T::one());
        let sigma = (ratio * ratio * ratio).max(cst(1e-8)).min(cst(0.9999));

        // corrector with adaptive centering
        let (dx_hat, dy, ds, dx) = direction(sigma * mu);
        if std::env::var_os("CERT_ALIGN_SDP_TRACE").is_some() {
            eprintln!(
                "iter {iter}: sigma {:.3e} ap_aff {:.3e} ad_aff {:.3e} mu {:.3e} mu_aff {:.3e}",
                to_f64(sigma),
                to_f64(ap_aff),
                to_f64(ad_aff),
                to_f64(mu),
                to_f64(mu_aff)
            );
        }
        let frac: T = cst(0.98);
        let mut alpha_p = (scaled_step(&dx_hat) * frac).min(T::one());
        let mut alpha_d = (scaled_step(&scaled_dual(&ds)) * frac).min(T::one());

        // accept a step only if both factors stay PD and mu does not blow up
        let mut accepted = false;
        for _ in 0..30 {
            let x_new = &w.x + &dx * alpha_p;
            let s_new = &w.s + &ds * alpha_d;
            let mu_new = frob(&x_new, &s_new) / nf;
            let pd_ok = x_new.clone().cholesky().is_some() && s_new.clone().cholesky().is_some();
            if pd_ok && mu_new <= mu * cst(2.0) && mu_new > T::zero() {
                w.x = x_new;
                w.s = s_new;
                w.y += &dy * alpha_d;
                symmetrize(&mut w.x);
                symmetrize(&mut w.s);
                accepted = true;
                break;
            }
            alpha_p *= cst(0.7);
            alpha_d *= cst(0.7);
        }
        if !accepted {
            status = SdpStatus::NumericalFailure;
            break;
        }
    }

    let last = trace.last().copied().unwrap_or(IterStats {
        mu: T::zero(),
        gap: T::zero(),
        primal_residual: T::zero(),
        dual_residual: T::zero(),
    });
    Ok(SdpSolution {
        x_mat: w.x,
        y: w.y,
        s: w.s,
        status,
        iterations,
        gap: last.gap,
        primal_residual: last.primal_residual,
        dual_residual: last.dual_residual,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn mat(n: usize, entries: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(n, n, entries)
    }

    #[test]
    fn scalar_problem() {
        // min x s.t. x = 2, x >= 0
        let problem = SdpProblem::new(mat(1, &[1.0]), vec![(mat(1, &[1.0]), 2.0)]).unwrap();
        let sol = solve(&problem, 1e-9, 100).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert_relative_eq!(sol.x_mat[(0, 0)], 2.0, epsilon = 1e-7);
        assert_relative_eq!(sol.objective_value(&problem), 2.0, epsilon = 1e-7);
    }

    #[test]
    fn two_by_two_offdiagonal() {
        // min tr X s.t. X12 = 1: diagonal entries a, b with ab >= 1 minimize
        // a + b at a = b = 1, so the optimum is the all-ones matrix
        let c = mat(2, &[1.0, 0.0, 0.0, 1.0]);
        let a = mat(2, &[0.0, 0.5, 0.5, 0.0]);
        let problem = SdpProblem::new(c, vec![(a, 1.0)]).unwrap();
        let sol = solve(&problem, 1e-9, 100).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert_relative_eq!(sol.objective_value(&problem), 2.0, epsilon = 1e-6);
        assert_relative_eq!(sol.x_mat[(0, 0)], 1.0, epsilon = 1e-5);
        assert_relative_eq!(sol.x_mat[(0, 1)], 1.0, epsilon = 1e-5);
        // dual optimum is y = 2 with rank-one slack
        assert_relative_eq!(sol.y[0], 2.0, epsilon = 1e-5);
    }

    #[test]
    fn rejects_bad_tolerance() {
        let problem = SdpProblem::new(mat(1, &[1.0]), vec![(mat(1, &[1.0]), 1.0)]).unwrap();
        assert!(matches!(
            solve(&problem, 1e-2, 10),
            Err(SdpError::InvalidTolerance(_))
        ));
    }

    #[test]
    fn rejects_asymmetric_input() {
        let c = mat(2, &[1.0, 0.4, 0.0, 1.0]);
        assert!(matches!(
            SdpProblem::new(c, vec![(mat(2, &[1.0, 0.0, 0.0, 1.0]), 1.0)]),
            Err(SdpError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn detects_inconsistent_constraints() {
        // x = 1 and x = 2 cannot both hold
        let problem = SdpProblem::new(
            mat(1, &[1.0]),
            vec![(mat(1, &[1.0]), 1.0), (mat(1, &[1.0]), 2.0)],
        )
        .unwrap();
        let sol = solve(&problem, 1e-9, 200).unwrap();
        assert_ne!(sol.status, SdpStatus::Optimal);
    }

    /// Random strictly feasible instances built from a known interior pair.
    fn random_instance(
        rng: &mut StdRng,
        n: usize,
        m: usize,
    ) -> (SdpProblem<f64>, f64) {
        let sym_rand = |rng: &mut StdRng| {
            let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            (&g + g.transpose()) * 0.5
        };
        let spd = |rng: &mut StdRng| {
            let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            &g * g.transpose() + DMatrix::identity(n, n) * 0.3
        };
        let x0 = spd(rng);
        let s0 = spd(rng);
        let y0 = DVector::<f64>::from_fn(m, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let mut constraints = Vec::with_capacity(m);
        let mut c = s0.clone();
        for i in 0..m {
            let a = sym_rand(rng);
            c += &a * y0[i];
            let b = a.iter().zip(x0.iter()).map(|(p, q)| p * q).sum::<f64>();
            constraints.push((a, b));
        }
        // optimum is bounded above by the interior objective value
        let ub = c.iter().zip(x0.iter()).map(|(p, q)| p * q).sum::<f64>();
        (SdpProblem::new(c, constraints).unwrap(), ub)
    }

    #[test]
    fn random_feasible_instances_converge() {
        let mut rng = StdRng::seed_from_u64(42);
        for trial in 0..25 {
            let n = rng.random_range(3..=12usize);
            let max_m = (n * (n + 1) / 2 - 1).min(30);
            let m = rng.random_range(1..=max_m);
            let (problem, ub) = random_instance(&mut rng, n, m);
            let sol = solve(&problem, 1e-9, 100).unwrap();
            assert_eq!(
                sol.status,
                SdpStatus::Optimal,
                "trial {trial} n={n} m={m} failed: {:?}",
                sol.trace.last()
            );
            let cx = sol.objective_value(&problem);
            let by = sol.dual_objective(&problem);
            assert!(cx <= ub + 1e-6 * (1.0 + ub.abs()));
            assert!((cx - by).abs() <= 1e-8 * (1.0 + cx.abs() + by.abs()));
            assert!(sol.iterations <= 100);
        }
    }

    /// With a positive semidefinite objective and the zero-dual start, weak
    /// duality holds along the whole iterate trace.
    #[test]
    fn weak_duality_along_trace_for_psd_objective() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..10 {
            let n = rng.random_range(3..=10usize);
            let m = rng.random_range(1..=8usize);
            // PSD objective, right-hand sides from an interior point
            let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let c = &g * g.transpose();
            let x0 = {
                let h = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
                &h * h.transpose() + DMatrix::identity(n, n) * 0.4
            };
            let constraints: Vec<(DMatrix<f64>, f64)> = (0..m)
                .map(|_| {
                    let s = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
                    let a = (&s + s.transpose()) * 0.5;
                    let b = a.iter().zip(x0.iter()).map(|(p, q)| p * q).sum::<f64>();
                    (a, b)
                })
                .collect();
            let problem = SdpProblem::new(c, constraints).unwrap();
            let sol = solve(&problem, 1e-9, 100).unwrap();
            assert_eq!(sol.status, SdpStatus::Optimal);
            for stats in &sol.trace {
                assert!(stats.gap >= -10.0 * 1e-9 * (1.0 + stats.gap.abs()));
            }
        }
    }

    /// The alignment relaxation built from noiseless reduced measurements
    /// reaches a 1e-9 gap within 50 iterations.
    #[test]
    fn alignment_relaxation_converges_quickly() {
        use crate::geom::{kron3, RotationMatrix};
        use crate::model::ReducedMeasurement;
        use crate::qcqp::{assemble_cost, so3_constraints};
        use nalgebra::Vector3;

        let mut rng = StdRng::seed_from_u64(12);
        let rotation = RotationMatrix::from_scaled_axis(Vector3::new(0.4, -1.1, 2.0));
        let ms: Vec<ReducedMeasurement<f64>> = (0..55)
            .map(|_| {
                let v = Vector3::from_fn(|_, _| rng.random::<f64>() * 6.0 - 3.0);
                let los = Vector3::from_fn(|_, _| rng.random::<f64>() - 0.5).normalize();
                let coeffs = kron3(&v, &los);
                let range_rate = coeffs.dot(&rotation.to_vec9()) + 25.0;
                ReducedMeasurement {
                    los,
                    range_rate,
                    coeffs,
                    weight: 1.0,
                }
            })
            .collect();
        let (_, q_bar) = assemble_cost(&ms).unwrap();
        let cons = so3_constraints::<f64>(true);
        let c = DMatrix::from_fn(10, 10, |i, j| q_bar.matrix()[(i, j)]);
        let constraints: Vec<(DMatrix<f64>, f64)> = cons
            .constraints()
            .iter()
            .map(|qc| (DMatrix::from_fn(10, 10, |i, j| qc.a[(i, j)]), qc.d))
            .collect();
        let problem = SdpProblem::new(c, constraints).unwrap();
        let sol = solve(&problem, 1e-9, 100).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!(sol.iterations <= 50, "iterations {}", sol.iterations);
        let cx = sol.objective_value(&problem);
        let by = sol.dual_objective(&problem);
        assert!((cx - by).abs() <= 1e-9 * (1.0 + cx.abs() + by.abs()));
    }

    #[test]
    fn returned_primal_iterate_is_psd() {
        let mut rng = StdRng::seed_from_u64(7);
        let (problem, _) = random_instance(&mut rng, 6, 8);
        let sol = solve(&problem, 1e-9, 100).unwrap();
        let eig = SymmetricEigen::new(sol.x_mat.clone());
        let min_eig = eig.eigenvalues.iter().copied().fold(f64::MAX, f64::min);
        assert!(min_eig >= -1e-9 * sol.x_mat.norm());
    }

    #[test]
    fn gap_is_monotone_along_trace() {
        let mut rng = StdRng::seed_from_u64(11);
        let (problem, _) = random_instance(&mut rng, 8, 12);
        let sol = solve(&problem, 1e-9, 100).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        for pair in sol.trace.windows(2) {
            let scale = 1.0 + pair[0].gap.abs();
            assert!(
                pair[1].gap <= pair[0].gap + 10.0 * 1e-9 * scale,
                "gap increased: {} -> {}",
                pair[0].gap,
                pair[1].gap
            );
        }
    }

    #[test]
    fn debug_dump_shape() {
        let problem = SdpProblem::new(
            mat(2, &[1.0, 0.0, 0.0, 1.0]),
            vec![(mat(2, &[0.0, 0.5, 0.5, 0.0]), 1.0)],
        )
        .unwrap();
        let mut buf = Vec::new();
        problem.write_debug_dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "2 1");
        // header + objective rows + constraint rows + rhs
        assert_eq!(lines.len(), 1 + 2 + 2 + 1);
    }

    #[test]
    fn solves_in_f32_at_loose_tolerance() {
        let c = DMatrix::<f32>::from_row_slice(1, 1, &[1.0]);
        let a = DMatrix::<f32>::from_row_slice(1, 1, &[1.0]);
        let problem = SdpProblem::new(c, vec![(a, 2.0f32)]).unwrap();
        let sol = solve(&problem, 1e-4f32, 100).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.x_mat[(0, 0)] - 2.0).abs() < 1e-2);
    }
}
