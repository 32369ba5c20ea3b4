//! Observability analysis of the measurement geometry.
//!
//! Stack the body velocities as columns of `V` (3xK), the lines of sight as
//! columns of `N` (3xK), and the per-measurement coefficient vectors as
//! columns of `M` (9xK, the column-wise Kronecker of `V` and `N`). The
//! rotation is identifiable:
//!
//! - with the redundant constraint set when `rank V >= 2`, `rank N >= 2`
//!   and `rank M >= 3` (three rotation degrees of freedom);
//! - with the minimal constraint set only when `rank V = rank N = 3` and
//!   `rank M >= 9` (all nine matrix entries pinned by data).
//!
//! `rank M <= rank V * rank N` always, which bounds how much geometry a
//! satellite/motion combination can contribute.

use nalgebra::DMatrix;

use crate::float::{cst, Float};
use crate::model::{line_of_sight, Epoch};
use crate::qcqp::QcqpError;

/// Numerical rank policy for the stacked matrices.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RankTolerance<T: Float = f64> {
    /// `sigma > max(K, 9) * eps * sigma_max`; suited to exact-geometry data.
    #[default]
    Exact,
    /// `sigma > rel * sigma_max`; use ~1e-6 for noisy measurements.
    Relative(T),
}

/// Ranks and flags of the stacked measurement geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservabilityReport<T: Float = f64> {
    pub rank_v: usize,
    pub rank_n: usize,
    pub rank_m: usize,
    pub singular_values_v: Vec<T>,
    pub singular_values_n: Vec<T>,
    pub singular_values_m: Vec<T>,
    /// Identifiable with the redundant constraint set.
    pub observable_redundant: bool,
    /// Identifiable with the minimal constraint set.
    pub observable_minimal: bool,
}

fn numerical_rank<T: Float>(m: &DMatrix<T>, tol: RankTolerance<T>, k: usize) -> (usize, Vec<T>) {
    let svd = m.clone().svd(false, false);
    let mut sv: Vec<T> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let sigma_max = sv.first().copied().unwrap_or_else(T::zero);
    let threshold = match tol {
        RankTolerance::Exact => {
            cst::<T>(k.max(9) as f64) * T::default_epsilon() * sigma_max
        }
        RankTolerance::Relative(rel) => rel * sigma_max,
    };
    let rank = sv.iter().filter(|&&s| s > threshold).count();
    (rank, sv)
}

/// Observability with the default exact-geometry rank tolerance.
pub fn observability<T: Float>(epochs: &[Epoch<T>]) -> Result<ObservabilityReport<T>, QcqpError> {
    observability_with(epochs, RankTolerance::Exact)
}

/// Observability with an explicit rank tolerance.
pub fn observability_with<T: Float>(
    epochs: &[Epoch<T>],
    tol: RankTolerance<T>,
) -> Result<ObservabilityReport<T>, QcqpError> {
    let k: usize = epochs.iter().map(|e| e.observations.len()).sum();
    if k == 0 {
        return Err(QcqpError::EmptyBatch);
    }
    let mut v = DMatrix::<T>::zeros(3, k);
    let mut n = DMatrix::<T>::zeros(3, k);
    let mut m = DMatrix::<T>::zeros(9, k);
    let mut col = 0;
    for epoch in epochs {
        for (_, sat) in &epoch.observations {
            let los = line_of_sight(&epoch.receiver_pos, &sat.pos)
                .unwrap_or_else(|_| nalgebra::Vector3::zeros());
            for i in 0..3 {
                v[(i, col)] = epoch.body_velocity[i];
                n[(i, col)] = los[i];
            }
            let coeffs = crate::geom::kron3(&epoch.body_velocity, &los);
            for i in 0..9 {
                m[(i, col)] = coeffs[i];
            }
            col += 1;
        }
    }
    let (rank_v, singular_values_v) = numerical_rank(&v, tol, k);
    let (rank_n, singular_values_n) = numerical_rank(&n, tol, k);
    let (rank_m, singular_values_m) = numerical_rank(&m, tol, k);
    Ok(ObservabilityReport {
        rank_v,
        rank_n,
        rank_m,
        singular_values_v,
        singular_values_n,
        singular_values_m,
        observable_redundant: rank_v >= 2 && rank_n >= 2 && rank_m >= 3,
        observable_minimal: rank_v == 3 && rank_n == 3 && rank_m >= 9,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{RawDoppler, SatelliteState};
    use nalgebra::Vector3;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn epoch(
        time: f64,
        velocity: Vector3<f64>,
        sat_positions: &[Vector3<f64>],
    ) -> Epoch<f64> {
        let receiver = Vector3::new(6.4e6, 0.0, 0.0);
        let observations = sat_positions
            .iter()
            .enumerate()
            .map(|(i, pos)| {
                (
                    RawDoppler {
                        sat_id: format!("S{i:02}"),
                        doppler_hz: 0.0,
                        wavelength_m: 0.19,
                        sigma: None,
                    },
                    SatelliteState {
                        id: format!("S{i:02}"),
                        pos: *pos,
                        vel: Vector3::zeros(),
                    },
                )
            })
            .collect();
        Epoch {
            time_s: time,
            receiver_pos: receiver,
            body_velocity: velocity,
            observations,
        }
    }

    fn spread_satellites(n: usize) -> Vec<Vector3<f64>> {
        (0..n)
            .map(|i| {
                let a = i as f64 * 1.3 + 0.4;
                Vector3::new(2.6e7 * a.cos(), 2.6e7 * a.sin(), 8e6 * ((i % 3) as f64))
            })
            .collect()
    }

    #[test]
    fn single_axis_velocity_not_observable() {
        let sats = spread_satellites(4);
        let epochs: Vec<_> = (0..6)
            .map(|i| epoch(i as f64, Vector3::new(3.0, 0.0, 0.0), &sats))
            .collect();
        let rep = observability(&epochs).unwrap();
        assert_eq!(rep.rank_v, 1);
        assert!(!rep.observable_redundant);
        assert!(!rep.observable_minimal);
    }

    #[test]
    fn planar_motion_two_sats_redundant_only() {
        let sats = spread_satellites(2);
        let epochs: Vec<_> = (0..8)
            .map(|i| {
                let phi = i as f64 * 0.7;
                epoch(i as f64, Vector3::new(3.0 * phi.cos(), 3.0 * phi.sin(), 0.0), &sats)
            })
            .collect();
        let rep = observability(&epochs).unwrap();
        assert_eq!(rep.rank_v, 2);
        assert!(rep.rank_n >= 2);
        assert!(rep.rank_m >= 3);
        assert!(rep.observable_redundant);
        assert!(!rep.observable_minimal);
    }

    #[test]
    fn full_motion_three_sats_minimal() {
        let sats = spread_satellites(3);
        let epochs: Vec<_> = (0..12)
            .map(|i| {
                let phi = i as f64 * 0.7;
                epoch(
                    i as f64,
                    Vector3::new(2.0 * phi.cos(), 2.0 * phi.sin(), 1.0 + 0.5 * (2.0 * phi).sin()),
                    &sats,
                )
            })
            .collect();
        let rep = observability(&epochs).unwrap();
        assert_eq!(rep.rank_v, 3);
        assert_eq!(rep.rank_n, 3);
        assert!(rep.rank_m >= 9);
        assert!(rep.observable_minimal);
    }

    #[test]
    fn kronecker_rank_bound_holds() {
        let mut rng = StdRng::seed_from_u64(10);
        for _ in 0..200 {
            let n_sats = rng.random_range(1..5usize);
            let sats = spread_satellites(n_sats);
            let planar = rng.random::<bool>();
            let epochs: Vec<_> = (0..rng.random_range(1..6usize))
                .map(|i| {
                    let phi = i as f64 * 0.9 + rng.random::<f64>();
                    let vz = if planar { 0.0 } else { phi.sin() };
                    epoch(i as f64, Vector3::new(phi.cos(), phi.sin(), vz) * 3.0, &sats)
                })
                .collect();
            let rep = observability(&epochs).unwrap();
            assert!(rep.rank_m <= rep.rank_v * rep.rank_n);
        }
    }

    #[test]
    fn empty_batch_rejected() {
        let epochs: Vec<Epoch<f64>> = vec![];
        assert!(matches!(
            observability(&epochs),
            Err(QcqpError::EmptyBatch)
        ));
        let empty = vec![epoch(0.0, Vector3::zeros(), &[])];
        assert!(matches!(observability(&empty), Err(QcqpError::EmptyBatch)));
    }
}
