//! Doppler forward model, measurement reduction, and residual evaluation.
//!
//! A raw Doppler shift, scaled by the carrier wavelength, observes the
//! projection of the receiver-minus-satellite velocity onto the line of
//! sight, plus the receiver clock drift rate expressed as a range rate:
//!
//! ```text
//! lambda * D = n' (v_r - v_s) + t_bar + eps,   n = (p_r - p_s) / |p_r - p_s|
//! ```
//!
//! With the local velocity `v_r = R v_w`, subtracting the known satellite
//! term turns each observation into a form linear in `vec(R)`:
//!
//! ```text
//! d_bar = lambda * D + n' v_s = n' R v_w + t_bar + eps
//! z     = kron3(v_w, n) . vec(R) + t_bar - d_bar
//! ```
//!
//! so a noiseless measurement has zero residual at the true rotation and
//! clock drift. Everything downstream (cost assembly, baselines) consumes
//! the reduced triple `(n, d_bar, m = kron3(v_w, n))`.

use nalgebra::{SVector, Vector3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::float::{cst, to_f64, Float};
use crate::geom::{kron3, RotationMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("receiver and satellite positions are within 1 m ({distance:.3e} m apart)")]
    CoincidentPoints { distance: f64 },
    #[error("wavelength must be positive, got {0}")]
    NonPositiveWavelength(f64),
    #[error("duplicate satellite id {0:?} within an epoch")]
    DuplicateSatellite(String),
}

/// Per-measurement weighting applied to residual rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightMode {
    /// All rows weighted 1.
    #[default]
    Unit,
    /// Rows scaled by `1/sigma` when the observation carries a sigma.
    InverseVariance,
}

/// Satellite position and velocity in ECEF at one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct SatelliteState<T: Float = f64> {
    pub id: String,
    /// ECEF position, m. Valid states satisfy `|pos| > 6.4e6`.
    pub pos: Vector3<T>,
    /// ECEF velocity, m/s.
    pub vel: Vector3<T>,
}

/// One raw Doppler observation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDoppler<T: Float = f64> {
    pub sat_id: String,
    pub doppler_hz: T,
    pub wavelength_m: T,
    /// Optional 1-sigma noise level (m/s) used by inverse-variance weighting.
    pub sigma: Option<T>,
}

/// Measurement bundle at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch<T: Float = f64> {
    pub time_s: T,
    /// Receiver ECEF position, m.
    pub receiver_pos: Vector3<T>,
    /// Receiver velocity in the local world frame, m/s.
    pub body_velocity: Vector3<T>,
    pub observations: Vec<(RawDoppler<T>, SatelliteState<T>)>,
}

impl<T: Float> Epoch<T> {
    /// Checks that satellite ids are unique within the epoch.
    pub fn validate(&self) -> Result<(), ModelError> {
        for (i, (obs, _)) in self.observations.iter().enumerate() {
            for (other, _) in &self.observations[..i] {
                if other.sat_id == obs.sat_id {
                    return Err(ModelError::DuplicateSatellite(obs.sat_id.clone()));
                }
            }
        }
        Ok(())
    }
}

/// One Doppler observation after reduction: line of sight `los`, reduced
/// range rate `range_rate = lambda*D + los . v_s`, and the linear coefficient
/// vector `coeffs = kron3(v_w, los)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedMeasurement<T: Float = f64> {
    pub los: Vector3<T>,
    pub range_rate: T,
    pub coeffs: SVector<T, 9>,
    /// Row weight; 1 unless inverse-variance weighting is requested.
    pub weight: T,
}

/// Receiver clock drift expressed as an equivalent range rate, m/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockDriftRate<T: Float = f64>(pub T);

/// Unit vector from the satellite position toward the receiver position.
pub fn line_of_sight<T: Float>(
    receiver_pos: &Vector3<T>,
    sat_pos: &Vector3<T>,
) -> Result<Vector3<T>, ModelError> {
    let diff = receiver_pos - sat_pos;
    let dist = diff.norm();
    if dist <= T::one() {
        return Err(ModelError::CoincidentPoints {
            distance: to_f64(dist),
        });
    }
    Ok(diff / dist)
}

/// Generates a Doppler shift (Hz) from ground truth rotation and clock drift,
/// with additive Gaussian noise of standard deviation `noise_sigma` (m/s).
#[allow(clippy::too_many_arguments)]
pub fn synthesize_doppler<T, R>(
    rotation: &RotationMatrix<T>,
    clock_drift: ClockDriftRate<T>,
    sat: &SatelliteState<T>,
    receiver_pos: &Vector3<T>,
    body_velocity: &Vector3<T>,
    wavelength_m: T,
    noise_sigma: T,
    rng: &mut R,
) -> Result<T, ModelError>
where
    T: Float,
    R: Rng + ?Sized,
    StandardNormal: Distribution<T>,
{
    if wavelength_m <= T::zero() {
        return Err(ModelError::NonPositiveWavelength(to_f64(wavelength_m)));
    }
    let los = line_of_sight(receiver_pos, &sat.pos)?;
    let v_e = rotation.rotate(body_velocity);
    let mut range_rate = los.dot(&(v_e - sat.vel)) + clock_drift.0;
    if noise_sigma > T::zero() {
        let unit: T = StandardNormal.sample(rng);
        range_rate += noise_sigma * unit;
    }
    Ok(range_rate / wavelength_m)
}

/// Reduces a raw observation to the linear-in-rotation form.
pub fn reduce<T: Float>(
    raw: &RawDoppler<T>,
    sat: &SatelliteState<T>,
    receiver_pos: &Vector3<T>,
    body_velocity: &Vector3<T>,
) -> Result<ReducedMeasurement<T>, ModelError> {
    if raw.wavelength_m <= T::zero() {
        return Err(ModelError::NonPositiveWavelength(to_f64(raw.wavelength_m)));
    }
    let los = line_of_sight(receiver_pos, &sat.pos)?;
    let range_rate = raw.wavelength_m * raw.doppler_hz + los.dot(&sat.vel);
    let coeffs = kron3(body_velocity, &los);
    Ok(ReducedMeasurement {
        los,
        range_rate,
        coeffs,
        weight: T::one(),
    })
}

/// Reduces every observation of an epoch, in observation order.
pub fn reduce_epoch<T: Float>(epoch: &Epoch<T>) -> Result<Vec<ReducedMeasurement<T>>, ModelError> {
    epoch.validate()?;
    epoch
        .observations
        .iter()
        .map(|(raw, sat)| reduce(raw, sat, &epoch.receiver_pos, &epoch.body_velocity))
        .collect()
}

/// Reduces a batch of epochs, applying the requested weighting.
pub fn reduce_epochs<T: Float>(
    epochs: &[Epoch<T>],
    mode: WeightMode,
) -> Result<Vec<ReducedMeasurement<T>>, ModelError> {
    let mut out = Vec::new();
    for epoch in epochs {
        epoch.validate()?;
        for (raw, sat) in &epoch.observations {
            let mut m = reduce(raw, sat, &epoch.receiver_pos, &epoch.body_velocity)?;
            if mode == WeightMode::InverseVariance {
                if let Some(sigma) = raw.sigma {
                    if sigma > T::zero() {
                        m.weight = T::one() / sigma;
                    }
                }
            }
            out.push(m);
        }
    }
    Ok(out)
}

/// Unweighted residual `z = coeffs . vec(R) + t_bar - range_rate` (m/s).
pub fn residual<T: Float>(
    rotation: &RotationMatrix<T>,
    clock_drift: ClockDriftRate<T>,
    meas: &ReducedMeasurement<T>,
) -> T {
    meas.coeffs.dot(&rotation.to_vec9()) + clock_drift.0 - meas.range_rate
}

/// Weighted sum of squared residuals over a batch.
pub fn batch_cost<T: Float>(
    rotation: &RotationMatrix<T>,
    clock_drift: ClockDriftRate<T>,
    measurements: &[ReducedMeasurement<T>],
) -> T {
    measurements.iter().fold(T::zero(), |acc, m| {
        let z = m.weight * residual(rotation, clock_drift, m);
        acc + z * z
    })
}

/// Clock drift minimizing the weighted batch cost at a fixed rotation.
pub fn best_clock_drift<T: Float>(
    rotation: &RotationMatrix<T>,
    measurements: &[ReducedMeasurement<T>],
) -> ClockDriftRate<T> {
    let r9 = rotation.to_vec9();
    let mut num = T::zero();
    let mut den = T::zero();
    for m in measurements {
        let w2 = m.weight * m.weight;
        num += w2 * (m.range_rate - m.coeffs.dot(&r9));
        den += w2;
    }
    if den <= T::zero() {
        ClockDriftRate(T::zero())
    } else {
        ClockDriftRate(num / den)
    }
}

/// Wavelength (m) of a carrier at `freq_hz`.
pub fn wavelength_of<T: Float>(freq_hz: T) -> T {
    cst::<T>(crate::sim::SPEED_OF_LIGHT_MPS) / freq_hz
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn sat(id: &str, pos: Vector3<f64>, vel: Vector3<f64>) -> SatelliteState<f64> {
        SatelliteState {
            id: id.into(),
            pos,
            vel,
        }
    }

    #[test]
    fn line_of_sight_axis_aligned() {
        let n = line_of_sight(&Vector3::zeros(), &Vector3::new(2e7, 0.0, 0.0)).unwrap();
        assert_relative_eq!(n, Vector3::new(-1.0, 0.0, 0.0), epsilon = 1e-15);
        let n = line_of_sight(
            &Vector3::new(1e7, 0.0, 0.0),
            &Vector3::new(1e7, 1e7, 0.0),
        )
        .unwrap();
        assert_relative_eq!(n, Vector3::new(0.0, -1.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn line_of_sight_antisymmetric() {
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..50 {
            let a = Vector3::from_fn(|_, _| rand::Rng::random::<f64>(&mut rng) * 1e7);
            let b = Vector3::from_fn(|_, _| rand::Rng::random::<f64>(&mut rng) * 1e7 + 2e7);
            let ab = line_of_sight(&a, &b).unwrap();
            let ba = line_of_sight(&b, &a).unwrap();
            assert_relative_eq!(ab, -ba, epsilon = 1e-14);
        }
    }

    #[test]
    fn line_of_sight_rejects_coincident() {
        let p = Vector3::new(1e7, 0.0, 0.0);
        assert!(matches!(
            line_of_sight(&p, &p),
            Err(ModelError::CoincidentPoints { .. })
        ));
    }

    #[test]
    fn synthesize_zero_relative_motion() {
        let mut rng = StdRng::seed_from_u64(2);
        let s = sat("a", Vector3::new(2.6e7, 0.0, 0.0), Vector3::zeros());
        let d = synthesize_doppler(
            &RotationMatrix::identity(),
            ClockDriftRate(0.0),
            &s,
            &Vector3::new(6.4e6, 0.0, 0.0),
            &Vector3::zeros(),
            0.19,
            0.0,
            &mut rng,
        )
        .unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn synthesize_hand_evaluated() {
        // receiver at origin moving (3,0,0), satellite ahead on +x with no
        // velocity: los = (-1,0,0), lambda*D = -3
        let mut rng = StdRng::seed_from_u64(3);
        let s = sat("a", Vector3::new(2e7, 0.0, 0.0), Vector3::zeros());
        let d = synthesize_doppler(
            &RotationMatrix::identity(),
            ClockDriftRate(0.0),
            &s,
            &Vector3::zeros(),
            &Vector3::new(3.0, 0.0, 0.0),
            1.0,
            0.0,
            &mut rng,
        )
        .unwrap();
        assert_relative_eq!(d, -3.0, epsilon = 1e-12);
    }

    #[test]
    fn reduce_static_satellite_keeps_scaled_doppler() {
        let raw = RawDoppler {
            sat_id: "a".into(),
            doppler_hz: -3.0,
            wavelength_m: 0.2,
            sigma: None,
        };
        let s = sat("a", Vector3::new(2e7, 0.0, 0.0), Vector3::zeros());
        let m = reduce(&raw, &s, &Vector3::zeros(), &Vector3::new(3.0, 0.0, 0.0)).unwrap();
        assert_relative_eq!(m.range_rate, -0.6, epsilon = 1e-12);
    }

    #[test]
    fn reduce_zero_velocity_zeroes_coeffs() {
        let raw = RawDoppler {
            sat_id: "a".into(),
            doppler_hz: 1.0,
            wavelength_m: 0.2,
            sigma: None,
        };
        let s = sat("a", Vector3::new(2e7, 0.0, 0.0), Vector3::new(100.0, 50.0, 0.0));
        let m = reduce(&raw, &s, &Vector3::zeros(), &Vector3::zeros()).unwrap();
        assert_eq!(m.coeffs, SVector::<f64, 9>::zeros());
    }

    #[test]
    fn reduce_satisfies_kronecker_identity() {
        let mut rng = StdRng::seed_from_u64(4);
        for _ in 0..50 {
            let r = RotationMatrix::from_scaled_axis(Vector3::from_fn(|_, _| {
                rand::Rng::random::<f64>(&mut rng) * 2.0 - 1.0
            }));
            let v = Vector3::from_fn(|_, _| rand::Rng::random::<f64>(&mut rng) * 6.0 - 3.0);
            let raw = RawDoppler {
                sat_id: "a".into(),
                doppler_hz: 12.3,
                wavelength_m: 0.19,
                sigma: None,
            };
            let s = sat(
                "a",
                Vector3::from_fn(|_, _| rand::Rng::random::<f64>(&mut rng) * 1e7 + 2e7),
                Vector3::zeros(),
            );
            let m = reduce(&raw, &s, &Vector3::zeros(), &v).unwrap();
            let lhs = m.coeffs.dot(&r.to_vec9());
            let rhs = m.los.dot(&r.rotate(&v));
            assert_relative_eq!(lhs, rhs, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    /// Forward model then reduction must produce zero residual at truth for
    /// arbitrary geometry when noise is off.
    #[test]
    fn noiseless_round_trip_zero_residual() {
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..50 {
            let rotation = RotationMatrix::from_scaled_axis(Vector3::from_fn(|_, _| {
                rand::Rng::random::<f64>(&mut rng) * 2.0 - 1.0
            }));
            let t_bar = ClockDriftRate(rand::Rng::random::<f64>(&mut rng) * 200.0 - 100.0);
            let receiver = Vector3::new(6.4e6, 1e5, -2e5);
            let v_w = Vector3::from_fn(|_, _| rand::Rng::random::<f64>(&mut rng) * 6.0 - 3.0);
            let s = sat(
                "a",
                Vector3::from_fn(|_, _| rand::Rng::random::<f64>(&mut rng) * 1e7 + 2e7),
                Vector3::from_fn(|_, _| rand::Rng::random::<f64>(&mut rng) * 6e3 - 3e3),
            );
            let wavelength = 0.1902937;
            let d = synthesize_doppler(
                &rotation, t_bar, &s, &receiver, &v_w, wavelength, 0.0, &mut rng,
            )
            .unwrap();
            let raw = RawDoppler {
                sat_id: "a".into(),
                doppler_hz: d,
                wavelength_m: wavelength,
                sigma: None,
            };
            let m = reduce(&raw, &s, &receiver, &v_w).unwrap();
            assert_relative_eq!(residual(&rotation, t_bar, &m), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn residual_affine_in_clock_drift() {
        let raw = RawDoppler {
            sat_id: "a".into(),
            doppler_hz: 4.2,
            wavelength_m: 0.19,
            sigma: None,
        };
        let s = sat("a", Vector3::new(2.2e7, 1e7, 5e6), Vector3::new(1e3, -2e3, 0.5e3));
        let m = reduce(&raw, &s, &Vector3::new(6.4e6, 0.0, 0.0), &Vector3::new(1.0, 2.0, 0.0))
            .unwrap();
        let r = RotationMatrix::about_y(0.3);
        let base = residual(&r, ClockDriftRate(2.0), &m);
        let shifted = residual(&r, ClockDriftRate(3.0), &m);
        assert_relative_eq!(shifted - base, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn epoch_validation_rejects_duplicates() {
        let raw = RawDoppler {
            sat_id: "a".into(),
            doppler_hz: 0.0,
            wavelength_m: 0.19,
            sigma: None,
        };
        let s = sat("a", Vector3::new(2e7, 0.0, 0.0), Vector3::zeros());
        let epoch = Epoch {
            time_s: 0.0,
            receiver_pos: Vector3::zeros(),
            body_velocity: Vector3::zeros(),
            observations: vec![(raw.clone(), s.clone()), (raw, s)],
        };
        assert!(matches!(
            epoch.validate(),
            Err(ModelError::DuplicateSatellite(_))
        ));
    }
}
