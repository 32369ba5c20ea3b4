//! Homogeneous quadratic cost assembly and the SO(3) constraint set.
//!
//! Stacking a reduced measurement row `w * [coeffs' 1 -d_bar]` against the
//! variable `[r; t; 1]` and summing squares yields a quadratic cost in the
//! clock drift `t` and the homogeneous vector `x = [r; y]`. The clock drift
//! enters every row with the same coefficient, so it is marginalized in
//! closed form through a rank-one Schur complement, leaving the 10x10 cost
//! `q_bar` acting on `x` alone:
//!
//! ```text
//! min_t [t; x]' Q_full [t; x]  =  x' q_bar x
//! q_bar = q_rr - q_tr' q_tr / q_tt
//! ```
//!
//! Feasible homogeneous vectors satisfy quadratic constraints `x'A x = d`
//! expressing column orthonormality (`R'R = y^2 I`), and, in the redundant
//! set, row orthonormality (`RR' = y^2 I`) and the nine handedness relations
//! `col_i x col_j = y col_k` that exclude reflections. The scalar constraint
//! `y^2 = 1` homogenizes the problem. Redundant set: 6 + 6 + 9 + 1 = 22
//! constraints; minimal set: 6 + 1 = 7.

pub mod observability;

pub use observability::{observability, observability_with, ObservabilityReport, RankTolerance};

use nalgebra::{SMatrix, SVector};
use thiserror::Error;

use crate::float::Float;
use crate::geom::HomogeneousVector;
use crate::model::{ClockDriftRate, ReducedMeasurement};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QcqpError {
    #[error("measurement batch is empty")]
    EmptyBatch,
}

/// Blocks of the full homogeneous cost before clock-drift marginalization.
#[derive(Debug, Clone, PartialEq)]
pub struct CostBlocks<T: Float = f64> {
    /// Clock-drift diagonal: the number of measurements under unit weights.
    pub q_tt: T,
    /// Cross block, one row against the homogeneous vector.
    pub q_tr: SVector<T, 10>,
    /// Homogeneous-vector block.
    pub q_rr: SMatrix<T, 10, 10>,
}

impl<T: Float> CostBlocks<T> {
    /// Full cost `[t; x]' Q_full [t; x]` without marginalization.
    pub fn full_cost(&self, t: T, x: &HomogeneousVector<T>) -> T {
        let xv = x.as_vector();
        self.q_tt * t * t
            + (self.q_tr.dot(xv)) * t * (T::one() + T::one())
            + (self.q_rr * xv).dot(xv)
    }
}

/// Marginalized 10x10 cost matrix; symmetric positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix<T: Float = f64> {
    m: SMatrix<T, 10, 10>,
}

impl<T: Float> CostMatrix<T> {
    /// Wraps an externally assembled symmetric cost; symmetrizes the input.
    pub fn from_symmetric(m: SMatrix<T, 10, 10>) -> Self {
        let m = (m + m.transpose()) * crate::float::cst::<T>(0.5);
        CostMatrix { m }
    }

    pub fn matrix(&self) -> &SMatrix<T, 10, 10> {
        &self.m
    }

    /// Marginalized cost `x' q_bar x`.
    pub fn quadratic_form(&self, x: &HomogeneousVector<T>) -> T {
        let xv = x.as_vector();
        (self.m * xv).dot(xv)
    }
}

/// One quadratic constraint `g(x) = x'Ax - d = 0` with `A` symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticConstraint<T: Float = f64> {
    pub a: SMatrix<T, 10, 10>,
    pub d: T,
}

impl<T: Float> QuadraticConstraint<T> {
    /// Constraint violation `x'Ax - d` at a point.
    pub fn eval(&self, x: &HomogeneousVector<T>) -> T {
        let xv = x.as_vector();
        (self.a * xv).dot(xv) - self.d
    }
}

/// The quadratic description of the feasible set.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet<T: Float = f64> {
    constraints: Vec<QuadraticConstraint<T>>,
    redundant: bool,
}

impl<T: Float> ConstraintSet<T> {
    pub fn constraints(&self) -> &[QuadraticConstraint<T>] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn redundant(&self) -> bool {
        self.redundant
    }

    /// Largest constraint violation `max_i |g_i(x)|`.
    pub fn max_violation(&self, x: &HomogeneousVector<T>) -> T {
        self.constraints
            .iter()
            .fold(T::zero(), |acc, c| acc.max(c.eval(x).abs()))
    }
}

/// Sums the weighted measurement rows into cost blocks and Schur-marginalizes
/// the clock drift. Summation is sequential in measurement order so repeated
/// runs are bit-identical.
pub fn assemble_cost<T: Float>(
    measurements: &[ReducedMeasurement<T>],
) -> Result<(CostBlocks<T>, CostMatrix<T>), QcqpError> {
    if measurements.is_empty() {
        return Err(QcqpError::EmptyBatch);
    }
    let mut q_tt = T::zero();
    let mut q_tr = SVector::<T, 10>::zeros();
    let mut q_rr = SMatrix::<T, 10, 10>::zeros();
    for m in measurements {
        let w2 = m.weight * m.weight;
        // row against [r; y]: [coeffs' -range_rate]
        let mut u = SVector::<T, 10>::zeros();
        u.fixed_rows_mut::<9>(0).copy_from(&m.coeffs);
        u[9] = -m.range_rate;
        q_tt += w2;
        q_tr += u * w2;
        q_rr += u * u.transpose() * w2;
    }
    let q_bar = q_rr - q_tr * q_tr.transpose() / q_tt;
    // symmetrize against accumulation round-off
    let q_bar = (q_bar + q_bar.transpose()) * crate::float::cst::<T>(0.5);
    Ok((
        CostBlocks { q_tt, q_tr, q_rr },
        CostMatrix { m: q_bar },
    ))
}

/// Index of the rotation entry in row `i`, column `j` of the column-stacked
/// 9-vector.
#[inline]
fn rid(i: usize, j: usize) -> usize {
    3 * j + i
}

fn add_sym<T: Float>(a: &mut SMatrix<T, 10, 10>, p: usize, q: usize, coeff: T) {
    let half = coeff / (T::one() + T::one());
    if p == q {
        a[(p, p)] += coeff;
    } else {
        a[(p, q)] += half;
        a[(q, p)] += half;
    }
}

/// Builds the SO(3) constraint set: the minimal description (column
/// orthonormality plus homogenization, 7 constraints) or the redundant one
/// (adding row orthonormality and handedness, 22 constraints).
pub fn so3_constraints<T: Float>(redundant: bool) -> ConstraintSet<T> {
    let mut constraints = Vec::new();

    // column orthonormality: col_j . col_k = y^2 delta_jk  (6 constraints)
    for j in 0..3 {
        for k in j..3 {
            let mut a = SMatrix::<T, 10, 10>::zeros();
            for i in 0..3 {
                add_sym(&mut a, rid(i, j), rid(i, k), T::one());
            }
            if j == k {
                a[(9, 9)] = -T::one();
            }
            constraints.push(QuadraticConstraint { a, d: T::zero() });
        }
    }

    if redundant {
        // row orthonormality: row_j . row_k = y^2 delta_jk  (6 constraints)
        for j in 0..3 {
            for k in j..3 {
                let mut a = SMatrix::<T, 10, 10>::zeros();
                for i in 0..3 {
                    add_sym(&mut a, rid(j, i), rid(k, i), T::one());
                }
                if j == k {
                    a[(9, 9)] = -T::one();
                }
                constraints.push(QuadraticConstraint { a, d: T::zero() });
            }
        }

        // handedness: col_i x col_j = y col_k, cyclic (i,j,k)  (9 constraints)
        for (ci, cj, ck) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            for l in 0..3 {
                let l1 = (l + 1) % 3;
                let l2 = (l + 2) % 3;
                let mut a = SMatrix::<T, 10, 10>::zeros();
                // (col_i x col_j)_l = R[l1, ci] R[l2, cj] - R[l2, ci] R[l1, cj]
                add_sym(&mut a, rid(l1, ci), rid(l2, cj), T::one());
                add_sym(&mut a, rid(l2, ci), rid(l1, cj), -T::one());
                // minus y * R[l, ck]
                add_sym(&mut a, rid(l, ck), 9, -T::one());
                constraints.push(QuadraticConstraint { a, d: T::zero() });
            }
        }
    }

    // homogenization: y^2 = 1
    let mut a = SMatrix::<T, 10, 10>::zeros();
    a[(9, 9)] = T::one();
    constraints.push(QuadraticConstraint { a, d: T::one() });

    ConstraintSet {
        constraints,
        redundant,
    }
}

/// Clock drift minimizing the full cost given the homogeneous optimum,
/// `t = -q_tr . x / q_tt`. Expects `x` sign-normalized so `y = +1`.
pub fn recover_clock_drift<T: Float>(
    blocks: &CostBlocks<T>,
    x_opt: &HomogeneousVector<T>,
) -> ClockDriftRate<T> {
    ClockDriftRate(-blocks.q_tr.dot(x_opt.as_vector()) / blocks.q_tt)
}
