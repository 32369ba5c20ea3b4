//! Comparison methods: single-point velocity estimation with rotation
//! registration (VOBA), and a Gauss-Newton local solver on the raw Doppler
//! residuals.
//!
//! Neither baseline carries an optimality guarantee. The registration route
//! needs at least four satellites per epoch to produce a velocity fix at
//! all, and the Gauss-Newton route converges to whichever local optimum its
//! initialization selects.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Vector3, Vector4};
use thiserror::Error;

use crate::float::{cst, to_f64, Float};
use crate::geom::RotationMatrix;
use crate::model::{
    reduce_epochs, ClockDriftRate, Epoch, ModelError, ReducedMeasurement, WeightMode,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("need at least {needed} usable epochs/satellites, got {got}")]
    InsufficientSatellites { needed: usize, got: usize },
    #[error("design matrix is numerically degenerate (condition {condition:.3e})")]
    DegenerateGeometry { condition: f64 },
    #[error("body velocities span less than two directions")]
    DegenerateVelocities,
    #[error("normal equations are singular even after damping")]
    SingularNormalEquations,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Epoch-wise least-squares velocity and clock-drift fix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpvSolution<T: Float = f64> {
    /// Receiver velocity in ECEF, m/s.
    pub velocity: Vector3<T>,
    pub clock_drift: ClockDriftRate<T>,
    /// Euclidean norm of the post-fit residuals, m/s.
    pub residual_norm: T,
    /// Dilution of precision, `sqrt(tr((A'A)^-1))`.
    pub dop: T,
}

/// Options for the Gauss-Newton solver.
#[derive(Debug, Clone, PartialEq)]
pub struct GnOptions<T: Float = f64> {
    pub initial_rotation: RotationMatrix<T>,
    pub max_iter: usize,
    pub step_tol: T,
    pub residual_tol: T,
}

impl<T: Float> Default for GnOptions<T> {
    fn default() -> Self {
        GnOptions {
            initial_rotation: RotationMatrix::identity(),
            max_iter: 50,
            step_tol: cst(1e-10),
            residual_tol: cst(1e-12),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnSolution<T: Float = f64> {
    pub rotation: RotationMatrix<T>,
    pub clock_drift: ClockDriftRate<T>,
    pub converged: bool,
    pub iterations: usize,
    /// Weighted squared residual cost at the returned point.
    pub cost: T,
}

/// Single-point velocity: least squares on rows `[n_i' 1][v; t] = d_i`.
pub fn spv_velocity<T: Float>(epoch: &Epoch<T>) -> Result<SpvSolution<T>, BaselineError> {
    let measurements = crate::model::reduce_epoch(epoch)?;
    if measurements.len() < 4 {
        return Err(BaselineError::InsufficientSatellites {
            needed: 4,
            got: measurements.len(),
        });
    }
    let k = measurements.len();
    let mut a = DMatrix::<T>::zeros(k, 4);
    let mut rhs = DVector::<T>::zeros(k);
    for (row, m) in measurements.iter().enumerate() {
        for j in 0..3 {
            a[(row, j)] = m.weight * m.los[j];
        }
        a[(row, 3)] = m.weight;
        rhs[row] = m.weight * m.range_rate;
    }
    let svd = a.clone().svd(true, true);
    let mut sv: Vec<T> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let sigma_max = sv[0];
    let sigma_min = sv[3];
    let condition = if sigma_min > T::zero() {
        sigma_max / sigma_min
    } else {
        T::max_value().unwrap()
    };
    if condition >= cst(1e8) {
        return Err(BaselineError::DegenerateGeometry {
            condition: to_f64(condition),
        });
    }
    let sol = svd
        .solve(&rhs, cst(1e-14))
        .map_err(|_| BaselineError::DegenerateGeometry {
            condition: to_f64(condition),
        })?;
    let velocity = Vector3::new(sol[0], sol[1], sol[2]);
    let residual_norm = (&a * &sol - &rhs).norm();
    // DOP from the inverse normal matrix: tr((A'A)^-1) = sum sigma_i^-2
    let dop = sv
        .iter()
        .fold(T::zero(), |acc, s| acc + T::one() / (*s * *s))
        .sqrt();
    Ok(SpvSolution {
        velocity,
        clock_drift: ClockDriftRate(sol[3]),
        residual_norm,
        dop,
    })
}

/// Rotation-only registration between per-epoch SPV velocities and body
/// velocities (the Wahba problem solved by SVD with determinant correction).
///
/// Epochs where the velocity fix fails are skipped; at least two successful
/// epochs are required, and the body velocities must span two directions.
pub fn voba_align<T: Float>(epochs: &[Epoch<T>]) -> Result<RotationMatrix<T>, BaselineError> {
    let mut pairs: Vec<(Vector3<T>, Vector3<T>)> = Vec::new();
    let mut last_err: Option<BaselineError> = None;
    for epoch in epochs {
        match spv_velocity(epoch) {
            Ok(spv) => pairs.push((epoch.body_velocity, spv.velocity)),
            Err(e @ BaselineError::InsufficientSatellites { .. })
            | Err(e @ BaselineError::DegenerateGeometry { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    if pairs.len() < 2 {
        return Err(last_err.unwrap_or(BaselineError::InsufficientSatellites {
            needed: 2,
            got: pairs.len(),
        }));
    }
    // span check on the body velocities
    let mut v_stack = DMatrix::<T>::zeros(3, pairs.len());
    for (col, (v_w, _)) in pairs.iter().enumerate() {
        for i in 0..3 {
            v_stack[(i, col)] = v_w[i];
        }
    }
    let sv = v_stack.svd(false, false).singular_values;
    let mut sv: Vec<T> = sv.iter().copied().collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    if sv.len() < 2 || sv[1] <= cst::<T>(1e-9) * sv[0] {
        return Err(BaselineError::DegenerateVelocities);
    }

    // cross-covariance B = sum v_e v_w' maximizes tr(R'B) at the aligned R
    let mut b = Matrix3::<T>::zeros();
    for (v_w, v_e) in &pairs {
        b += v_e * v_w.transpose();
    }
    let svd = b.svd(true, true);
    let u = svd.u.expect("svd with u");
    let v_t = svd.v_t.expect("svd with v_t");
    let mut u = u;
    if (u * v_t).determinant() < T::zero() {
        // flip the column paired with the smallest singular value
        let mut argmin = 0;
        for i in 1..3 {
            if svd.singular_values[i] < svd.singular_values[argmin] {
                argmin = i;
            }
        }
        for row in 0..3 {
            u[(row, argmin)] = -u[(row, argmin)];
        }
    }
    Ok(RotationMatrix::from_matrix_unchecked(u * v_t))
}

/// Recovers the body velocity from a reduced measurement's coefficient
/// vector: with `coeffs = kron3(v, n)` and a unit line of sight,
/// `v_i = coeffs[3i..3i+3] . n`.
fn body_velocity_of<T: Float>(m: &ReducedMeasurement<T>) -> Vector3<T> {
    Vector3::from_fn(|i, _| {
        m.coeffs[3 * i] * m.los[0] + m.coeffs[3 * i + 1] * m.los[1] + m.coeffs[3 * i + 2] * m.los[2]
    })
}

/// Gauss-Newton refinement of `(R, t)` on the weighted Doppler residuals,
/// with a right-multiplicative rotation update and a joint linear clock
/// step. Accepted iterations never increase the cost (simple backtracking);
/// a singular normal system gets one diagonal lift before failing.
pub fn gn_refine<T: Float>(
    measurements: &[ReducedMeasurement<T>],
    opts: &GnOptions<T>,
) -> Result<GnSolution<T>, BaselineError> {
    if measurements.is_empty() {
        return Err(BaselineError::InsufficientSatellites { needed: 1, got: 0 });
    }
    let mut rotation = opts.initial_rotation;
    let mut t_bar = crate::model::best_clock_drift(&rotation, measurements);
    let mut cost = crate::model::batch_cost(&rotation, t_bar, measurements);
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..opts.max_iter {
        iterations = iter + 1;
        let r9 = rotation.to_vec9();
        let mut jtj = Matrix4::<T>::zeros();
        let mut jtz = Vector4::<T>::zeros();
        for m in measurements {
            let z = m.weight * (m.coeffs.dot(&r9) + t_bar.0 - m.range_rate);
            // d z / d theta for R <- R exp([theta]x): (v x (R'n))'
            let v = body_velocity_of(m);
            let rn = rotation.transpose().rotate(&m.los);
            let j_theta = v.cross(&rn) * m.weight;
            let row = Vector4::new(j_theta[0], j_theta[1], j_theta[2], m.weight);
            jtj += row * row.transpose();
            jtz += row * z;
        }
        let delta = match jtj.cholesky() {
            Some(ch) => ch.solve(&(-jtz)),
            None => {
                let damped = jtj + Matrix4::identity() * cst::<T>(1e-12);
                match damped.cholesky() {
                    Some(ch) => ch.solve(&(-jtz)),
                    None => return Err(BaselineError::SingularNormalEquations),
                }
            }
        };

        // backtracking acceptance
        let mut scale = T::one();
        let mut accepted = false;
        for _ in 0..20 {
            let step = delta * scale;
            let candidate_r = rotation
                * RotationMatrix::from_scaled_axis(Vector3::new(step[0], step[1], step[2]));
            let candidate_t = ClockDriftRate(t_bar.0 + step[3]);
            let candidate_cost =
                crate::model::batch_cost(&candidate_r, candidate_t, measurements);
            if candidate_cost <= cost {
                rotation = candidate_r;
                t_bar = candidate_t;
                cost = candidate_cost;
                accepted = true;
                break;
            }
            scale *= cst(0.5);
        }
        if !accepted {
            break;
        }
        if (delta * scale).norm() <= opts.step_tol || cost <= opts.residual_tol {
            converged = true;
            break;
        }
    }
    Ok(GnSolution {
        rotation,
        clock_drift: t_bar,
        converged,
        iterations,
        cost,
    })
}

/// Gauss-Newton alignment over a batch of epochs.
pub fn gn_align<T: Float>(
    epochs: &[Epoch<T>],
    opts: &GnOptions<T>,
) -> Result<GnSolution<T>, BaselineError> {
    let measurements = reduce_epochs(epochs, WeightMode::Unit)?;
    gn_refine(&measurements, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{geodesic_angle_deg, kron3};
    use crate::model::{synthesize_doppler, RawDoppler, SatelliteState};
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn rand_rotation(rng: &mut StdRng) -> RotationMatrix<f64> {
        RotationMatrix::from_scaled_axis(Vector3::from_fn(|_, _| {
            rng.random::<f64>() * 4.0 - 2.0
        }))
    }

    /// Builds a noiseless epoch from explicit geometry.
    fn build_epoch(
        rng: &mut StdRng,
        rotation: &RotationMatrix<f64>,
        t_bar: f64,
        n_sats: usize,
        body_velocity: Vector3<f64>,
        time: f64,
    ) -> Epoch<f64> {
        let receiver = Vector3::new(6.37e6, 1e5, 2e5);
        let wavelength = 0.1902936727983649;
        let observations = (0..n_sats)
            .map(|i| {
                let angle = i as f64 * 1.1 + 0.3 + time * 0.01;
                let sat = SatelliteState {
                    id: format!("S{i:02}"),
                    pos: Vector3::new(
                        2.66e7 * angle.cos(),
                        2.66e7 * angle.sin(),
                        1.2e7 * ((i % 3) as f64 - 1.0),
                    ),
                    vel: Vector3::new(-3.0e3 * angle.sin(), 3.0e3 * angle.cos(), 120.0),
                };
                let d = synthesize_doppler(
                    rotation,
                    ClockDriftRate(t_bar),
                    &sat,
                    &receiver,
                    &body_velocity,
                    wavelength,
                    0.0,
                    rng,
                )
                .unwrap();
                (
                    RawDoppler {
                        sat_id: sat.id.clone(),
                        doppler_hz: d,
                        wavelength_m: wavelength,
                        sigma: None,
                    },
                    sat,
                )
            })
            .collect();
        Epoch {
            time_s: time,
            receiver_pos: receiver,
            body_velocity,
            observations,
        }
    }

    #[test]
    fn spv_rejects_three_satellites() {
        let mut rng = StdRng::seed_from_u64(1);
        let r = rand_rotation(&mut rng);
        let epoch = build_epoch(&mut rng, &r, 0.0, 3, Vector3::new(3.0, 0.0, 0.0), 0.0);
        assert!(matches!(
            spv_velocity(&epoch),
            Err(BaselineError::InsufficientSatellites { needed: 4, got: 3 })
        ));
    }

    #[test]
    fn spv_exact_on_noiseless_four_satellites() {
        let mut rng = StdRng::seed_from_u64(2);
        let r = rand_rotation(&mut rng);
        let t_bar = 7.5;
        let v_w = Vector3::new(2.0, -1.0, 0.5);
        let epoch = build_epoch(&mut rng, &r, t_bar, 4, v_w, 0.0);
        let spv = spv_velocity(&epoch).unwrap();
        let expected = r.rotate(&v_w);
        assert_relative_eq!(spv.velocity, expected, epsilon = 1e-9);
        assert_relative_eq!(spv.clock_drift.0, t_bar, epsilon = 1e-9);
        assert!(spv.residual_norm < 1e-9);
        assert!(spv.dop > 0.0);
    }

    #[test]
    fn spv_stationary_receiver_recovers_drift() {
        let mut rng = StdRng::seed_from_u64(3);
        let epoch = build_epoch(
            &mut rng,
            &RotationMatrix::identity(),
            5.0,
            5,
            Vector3::zeros(),
            0.0,
        );
        let spv = spv_velocity(&epoch).unwrap();
        assert_relative_eq!(spv.velocity.norm(), 0.0, epsilon = 1e-9);
        assert_relative_eq!(spv.clock_drift.0, 5.0, epsilon = 1e-9);
    }

    #[test]
    fn voba_recovers_rotation_from_planar_motion() {
        let mut rng = StdRng::seed_from_u64(4);
        let r = rand_rotation(&mut rng);
        let epochs: Vec<_> = (0..8)
            .map(|i| {
                let phi = i as f64 * 0.8;
                build_epoch(
                    &mut rng,
                    &r,
                    3.0,
                    5,
                    Vector3::new(3.0 * phi.cos(), 3.0 * phi.sin(), 0.0),
                    i as f64,
                )
            })
            .collect();
        let est = voba_align(&epochs).unwrap();
        assert!(geodesic_angle_deg(&est, &r) < 1e-6);
        assert!(est.so3_defect() < 1e-9);
    }

    #[test]
    fn voba_rejects_collinear_velocities() {
        let mut rng = StdRng::seed_from_u64(5);
        let r = rand_rotation(&mut rng);
        let epochs: Vec<_> = (0..5)
            .map(|i| {
                build_epoch(&mut rng, &r, 0.0, 5, Vector3::new(3.0, 0.0, 0.0), i as f64)
            })
            .collect();
        assert_eq!(
            voba_align(&epochs).unwrap_err(),
            BaselineError::DegenerateVelocities
        );
    }

    #[test]
    fn voba_rejects_two_satellite_data() {
        let mut rng = StdRng::seed_from_u64(6);
        let r = rand_rotation(&mut rng);
        let epochs: Vec<_> = (0..6)
            .map(|i| {
                let phi = i as f64 * 0.8;
                build_epoch(
                    &mut rng,
                    &r,
                    0.0,
                    2,
                    Vector3::new(3.0 * phi.cos(), 3.0 * phi.sin(), 0.0),
                    i as f64,
                )
            })
            .collect();
        assert!(matches!(
            voba_align(&epochs),
            Err(BaselineError::InsufficientSatellites { .. })
        ));
    }

    #[test]
    fn gn_from_truth_converges_immediately() {
        let mut rng = StdRng::seed_from_u64(7);
        let r = rand_rotation(&mut rng);
        let epochs: Vec<_> = (0..6)
            .map(|i| {
                let phi = i as f64 * 0.9;
                build_epoch(
                    &mut rng,
                    &r,
                    -4.0,
                    4,
                    Vector3::new(3.0 * phi.cos(), 3.0 * phi.sin(), 0.4 * phi.sin()),
                    i as f64,
                )
            })
            .collect();
        let opts = GnOptions {
            initial_rotation: r,
            ..GnOptions::default()
        };
        let sol = gn_align(&epochs, &opts).unwrap();
        assert!(sol.converged);
        assert!(sol.iterations <= 3);
        assert!(geodesic_angle_deg(&sol.rotation, &r) < 1e-8);
        assert_relative_eq!(sol.clock_drift.0, -4.0, epsilon = 1e-6);
    }

    #[test]
    fn gn_cost_never_increases() {
        let mut rng = StdRng::seed_from_u64(8);
        let r = rand_rotation(&mut rng);
        let epochs: Vec<_> = (0..8)
            .map(|i| {
                let phi = i as f64 * 0.7;
                build_epoch(
                    &mut rng,
                    &r,
                    2.0,
                    3,
                    Vector3::new(3.0 * phi.cos(), 3.0 * phi.sin(), 0.0),
                    i as f64,
                )
            })
            .collect();
        let measurements = reduce_epochs(&epochs, WeightMode::Unit).unwrap();
        // track costs across iterations by running with increasing caps
        let mut prev = f64::INFINITY;
        for cap in 1..15 {
            let opts = GnOptions {
                initial_rotation: RotationMatrix::identity(),
                max_iter: cap,
                ..GnOptions::default()
            };
            let sol = gn_refine(&measurements, &opts).unwrap();
            assert!(sol.cost <= prev + 1e-12);
            prev = sol.cost;
        }
    }

    #[test]
    fn gn_two_satellites_random_inits_hit_local_optima() {
        let mut rng = StdRng::seed_from_u64(9);
        let r = rand_rotation(&mut rng);
        let epochs: Vec<_> = (0..10)
            .map(|i| {
                let phi = i as f64 * 0.63;
                build_epoch(
                    &mut rng,
                    &r,
                    1.0,
                    2,
                    Vector3::new(3.0 * phi.cos(), 3.0 * phi.sin(), 0.3 * (2.0 * phi).sin()),
                    i as f64,
                )
            })
            .collect();
        let mut bad = 0;
        let trials = 40;
        for _ in 0..trials {
            let opts = GnOptions {
                initial_rotation: rand_rotation(&mut rng),
                ..GnOptions::default()
            };
            let sol = gn_align(&epochs, &opts).unwrap();
            if geodesic_angle_deg(&sol.rotation, &r) > 10.0 {
                bad += 1;
            }
        }
        assert!(bad > 0, "expected at least one local-optimum failure");
    }

    #[test]
    fn kron_velocity_recovery_round_trip() {
        let mut rng = StdRng::seed_from_u64(10);
        for _ in 0..20 {
            let v = Vector3::from_fn(|_, _| rng.random::<f64>() * 6.0 - 3.0);
            let n = Vector3::from_fn(|_, _| rng.random::<f64>() - 0.5).normalize();
            let m = ReducedMeasurement {
                los: n,
                range_rate: 0.0,
                coeffs: kron3(&v, &n),
                weight: 1.0,
            };
            assert_relative_eq!(body_velocity_of(&m), v, epsilon = 1e-12);
        }
    }
}
