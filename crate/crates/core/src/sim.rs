//! Constellation and trajectory simulator with a seeded Monte Carlo harness.
//!
//! Satellites ride circular orbits of a Walker-style shell (fixed
//! inclination, random plane and phase per seed) at the GPS orbital radius,
//! with angular rate `sqrt(mu/a^3)` so positions and velocities stay
//! dynamically consistent. The receiver follows either a planar circle or
//! the same planform with a sinusoidal vertical component ("hill"), at a
//! constant speed. Doppler observations are synthesized from a uniformly
//! drawn ground-truth rotation and a Gaussian clock drift rate.
//!
//! Reproducibility: every dataset derives from a `ChaCha8` stream seeded by
//! `(seed, run_index)`, so Monte Carlo sweeps give identical reports whether
//! runs execute serially or across a thread pool.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{gn_align, voba_align, GnOptions};
use crate::geom::{geodesic_angle_deg, wrap_angle_deg, yaw_of_deg, EnuBasis, RotationMatrix};
use crate::io::RunRecord;
use crate::model::{synthesize_doppler, ClockDriftRate, Epoch, RawDoppler, SatelliteState};
use crate::solver::{align, AlignOptions};

/// Speed of light, m/s.
pub const SPEED_OF_LIGHT_MPS: f64 = 299_792_458.0;
/// Earth gravitational parameter, m^3/s^2.
pub const GM_EARTH_M3S2: f64 = 3.986004418e14;
/// Spherical Earth radius used for the receiver site and elevation geometry.
pub const EARTH_RADIUS_M: f64 = 6.371e6;

/// Receiver site (geocentric latitude/longitude, degrees).
const SITE_LAT_DEG: f64 = 22.3;
const SITE_LON_DEG: f64 = 114.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("could not draw a visible satellite within {attempts} attempts")]
    NoVisibleSatellites { attempts: usize },
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

/// Receiver motion profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionProfile {
    /// Constant-speed circle in the local horizontal plane.
    Planar2D,
    /// Same planform with a single-period sinusoidal vertical velocity.
    Hill3D,
}

/// Simulation settings; defaults mirror the benchmark configuration
/// (1 s interval, 10 s duration, L1 carrier, 3 m/s receiver, 55 degree
/// inclination shell at the GPS orbital radius, 10 degree elevation mask).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub interval_s: f64,
    pub duration_s: f64,
    pub carrier_freq_hz: f64,
    pub speed_mps: f64,
    pub inclination_deg: f64,
    pub elevation_mask_deg: f64,
    pub orbit_radius_m: f64,
    pub n_satellites: usize,
    pub motion: MotionProfile,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            interval_s: 1.0,
            duration_s: 10.0,
            carrier_freq_hz: 1575.42e6,
            speed_mps: 3.0,
            inclination_deg: 55.0,
            elevation_mask_deg: 10.0,
            orbit_radius_m: 2.656e7,
            n_satellites: 5,
            motion: MotionProfile::Hill3D,
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.interval_s > 0.0 && self.duration_s > 0.0) {
            return Err(SimError::InvalidConfig(
                "interval and duration must be positive".into(),
            ));
        }
        if self.epoch_count() < 2 {
            return Err(SimError::InvalidConfig(
                "need at least two epochs (duration/interval + 1)".into(),
            ));
        }
        if self.n_satellites == 0 {
            return Err(SimError::InvalidConfig("n_satellites must be >= 1".into()));
        }
        if self.carrier_freq_hz <= 0.0 || self.speed_mps <= 0.0 || self.orbit_radius_m <= 0.0 {
            return Err(SimError::InvalidConfig(
                "carrier frequency, speed, and orbit radius must be positive".into(),
            ));
        }
        if self.noise_sigma < 0.0 {
            return Err(SimError::InvalidConfig("noise sigma must be >= 0".into()));
        }
        Ok(())
    }

    pub fn epoch_count(&self) -> usize {
        (self.duration_s / self.interval_s).round() as usize + 1
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT_MPS / self.carrier_freq_hz
    }
}

/// Generated dataset with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub rotation: RotationMatrix<f64>,
    pub clock_drift: ClockDriftRate<f64>,
    pub epochs: Vec<Epoch<f64>>,
}

/// Receiver site position on the spherical Earth.
pub fn receiver_site() -> Vector3<f64> {
    let lat = SITE_LAT_DEG.to_radians();
    let lon = SITE_LON_DEG.to_radians();
    Vector3::new(
        EARTH_RADIUS_M * lat.cos() * lon.cos(),
        EARTH_RADIUS_M * lat.cos() * lon.sin(),
        EARTH_RADIUS_M * lat.sin(),
    )
}

/// Uniformly distributed random rotation (normalized Gaussian quaternion).
pub fn uniform_rotation<R: Rng + ?Sized>(rng: &mut R) -> RotationMatrix<f64> {
    let mut draw = || -> f64 { StandardNormal.sample(rng) };
    let q = Quaternion::new(draw(), draw(), draw(), draw());
    let uq = UnitQuaternion::from_quaternion(q);
    RotationMatrix::from_matrix_unchecked(uq.to_rotation_matrix().into_inner())
}

/// Per-epoch receiver positions (ECEF) and body velocities (w-frame).
///
/// The planform closes one revolution over the window (radius
/// `speed * duration / (2 pi)` by construction). The hill profile adds a
/// raised-cosine vertical velocity `0.5 * (1 - cos phi)` before
/// renormalizing the speed: one smooth climb period starting from level
/// motion. A plain `sin phi` vertical would stay exactly proportional to
/// the northing rate and leave the stacked velocities rank two. Positions
/// trace the same path mapped through the local ENU basis at the site.
pub fn trajectory(cfg: &SimConfig) -> Vec<(Vector3<f64>, Vector3<f64>)> {
    let site = receiver_site();
    let basis = EnuBasis::from_ecef(&site).expect("site is away from poles");
    let n = cfg.epoch_count();
    let vertical_amp = 0.5;
    let mut out = Vec::with_capacity(n);
    let mut pos_local = Vector3::<f64>::zeros();
    let mut prev_vel_local = Vector3::<f64>::zeros();
    for k in 0..n {
        let t = k as f64 * cfg.interval_s;
        let phi = 2.0 * std::f64::consts::PI * t / cfg.duration_s;
        let dir = match cfg.motion {
            MotionProfile::Planar2D => Vector3::new(phi.cos(), phi.sin(), 0.0),
            MotionProfile::Hill3D => {
                Vector3::new(phi.cos(), phi.sin(), vertical_amp * (1.0 - phi.cos())).normalize()
            }
        };
        let vel = dir * cfg.speed_mps;
        if k > 0 {
            // trapezoidal position update keeps the path smooth; only the
            // line-of-sight geometry consumes it
            pos_local += (prev_vel_local + vel) * (0.5 * cfg.interval_s);
        }
        prev_vel_local = vel;
        let pos_ecef =
            site + basis.east * pos_local[0] + basis.north * pos_local[1] + basis.up * pos_local[2];
        out.push((pos_ecef, vel));
    }
    out
}

/// Elevation angle (degrees) of a satellite seen from a receiver position,
/// using the geocentric vertical.
pub fn elevation_deg(receiver: &Vector3<f64>, sat_pos: &Vector3<f64>) -> f64 {
    let up = receiver.normalize();
    let to_sat = (sat_pos - receiver).normalize();
    up.dot(&to_sat).asin().to_degrees()
}

/// Draws satellites on the constellation shell, rejecting candidates not
/// visible (elevation above the mask) at every epoch. Returns per-epoch
/// satellite states; `states[k][s]` is satellite `s` at epoch `k`.
pub fn walker_constellation<R: Rng + ?Sized>(
    cfg: &SimConfig,
    rng: &mut R,
    receiver_positions: &[Vector3<f64>],
) -> Result<Vec<Vec<SatelliteState<f64>>>, SimError> {
    cfg.validate()?;
    let n_epochs = receiver_positions.len();
    let inclination = cfg.inclination_deg.to_radians();
    let a = cfg.orbit_radius_m;
    let omega = (GM_EARTH_M3S2 / (a * a * a)).sqrt();
    let speed = (GM_EARTH_M3S2 / a).sqrt();

    let mut per_sat: Vec<Vec<SatelliteState<f64>>> = Vec::with_capacity(cfg.n_satellites);
    for s in 0..cfg.n_satellites {
        let mut found = false;
        for _attempt in 0..1000 {
            let raan = rng.random::<f64>() * std::f64::consts::TAU;
            let phase = rng.random::<f64>() * std::f64::consts::TAU;
            let plane = RotationMatrix::about_z(raan) * RotationMatrix::about_x(inclination);
            let states: Vec<SatelliteState<f64>> = (0..n_epochs)
                .map(|k| {
                    let theta = phase + omega * (k as f64 * cfg.interval_s);
                    let pos = plane.rotate(&Vector3::new(a * theta.cos(), a * theta.sin(), 0.0));
                    let vel = plane.rotate(&Vector3::new(
                        -speed * theta.sin(),
                        speed * theta.cos(),
                        0.0,
                    ));
                    SatelliteState {
                        id: format!("S{:02}", s + 1),
                        pos,
                        vel,
                    }
                })
                .collect();
            let visible = states
                .iter()
                .zip(receiver_positions.iter())
                .all(|(st, rx)| elevation_deg(rx, &st.pos) >= cfg.elevation_mask_deg);
            if visible {
                per_sat.push(states);
                found = true;
                break;
            }
        }
        if !found {
            return Err(SimError::NoVisibleSatellites { attempts: 1000 });
        }
    }
    // transpose to per-epoch lists
    Ok((0..n_epochs)
        .map(|k| per_sat.iter().map(|s| s[k].clone()).collect())
        .collect())
}

/// Generates a dataset from the stream `(cfg.seed, stream)`; `stream = 0`
/// is the dataset produced by [`generate_dataset`].
pub fn generate_dataset_stream(cfg: &SimConfig, stream: u64) -> Result<GroundTruth, SimError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);

    let rotation = uniform_rotation(&mut rng);
    let drift_unit: f64 = StandardNormal.sample(&mut rng);
    let clock_drift = ClockDriftRate(10.0 * drift_unit);

    let path = trajectory(cfg);
    let receiver_positions: Vec<Vector3<f64>> = path.iter().map(|(p, _)| *p).collect();
    let constellation = walker_constellation(cfg, &mut rng, &receiver_positions)?;

    let wavelength = cfg.wavelength_m();
    let mut epochs = Vec::with_capacity(path.len());
    for (k, ((pos, vel), sats)) in path.iter().zip(constellation).enumerate() {
        let mut observations = Vec::with_capacity(sats.len());
        for sat in sats {
            let doppler = synthesize_doppler(
                &rotation,
                clock_drift,
                &sat,
                pos,
                vel,
                wavelength,
                cfg.noise_sigma,
                &mut rng,
            )?;
            observations.push((
                RawDoppler {
                    sat_id: sat.id.clone(),
                    doppler_hz: doppler,
                    wavelength_m: wavelength,
                    sigma: if cfg.noise_sigma > 0.0 {
                        Some(cfg.noise_sigma)
                    } else {
                        None
                    },
                },
                sat,
            ));
        }
        epochs.push(Epoch {
            time_s: k as f64 * cfg.interval_s,
            receiver_pos: *pos,
            body_velocity: *vel,
            observations,
        });
    }
    Ok(GroundTruth {
        rotation,
        clock_drift,
        epochs,
    })
}

/// Generates the stream-0 dataset for this config.
pub fn generate_dataset(cfg: &SimConfig) -> Result<GroundTruth, SimError> {
    generate_dataset_stream(cfg, 0)
}

/// Initialization policy for the Gauss-Newton method in sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GnInit {
    Identity,
    Truth,
}

/// One estimation method to run per Monte Carlo sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum MethodSpec {
    Sdp { redundant: bool },
    Voba,
    Gn { init: GnInit },
}

impl MethodSpec {
    pub fn name(&self) -> &'static str {
        match self {
            MethodSpec::Sdp { redundant: true } => "sdp",
            MethodSpec::Sdp { redundant: false } => "sdp-minimal",
            MethodSpec::Voba => "voba",
            MethodSpec::Gn { init: GnInit::Identity } => "gn-identity",
            MethodSpec::Gn { init: GnInit::Truth } => "gn-truth",
        }
    }
}

/// Absolute-error statistics in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mae_deg: f64,
    pub std_deg: f64,
    pub max_deg: f64,
}

/// Aggregate over the runs of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodStats {
    pub method: String,
    pub completed: usize,
    pub failures: usize,
    pub certified_rate: Option<f64>,
    pub error_stats: Option<ErrorStats>,
}

/// Monte Carlo report: per-method statistics plus every run record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub runs: usize,
    /// Certified fraction of the first SDP method in the request.
    pub certified_rate: Option<f64>,
    pub methods: Vec<MethodStats>,
    pub records: Vec<RunRecord>,
}

/// Runs one method on a generated dataset and renders a run record.
pub fn run_method(gt: &GroundTruth, spec: MethodSpec) -> RunRecord {
    let start = std::time::Instant::now();
    let basis = EnuBasis::from_ecef(&gt.epochs[0].receiver_pos).expect("site basis");
    let window_start = gt.epochs.first().map(|e| e.time_s).unwrap_or(0.0);
    let window_end = gt.epochs.last().map(|e| e.time_s).unwrap_or(0.0);
    let mut record = RunRecord {
        method: spec.name().to_string(),
        window_start_s: window_start,
        window_end_s: window_end,
        rotation: [0.0; 9],
        clock_drift_mps: 0.0,
        yaw_error_deg: None,
        geodesic_error_deg: None,
        certified: None,
        eig_ratio: None,
        cost: 0.0,
        dual_value: None,
        wall_time_s: 0.0,
        status: String::from("ok"),
    };

    let finish = |record: &mut RunRecord, rotation: &RotationMatrix<f64>, drift: f64| {
        record.rotation.copy_from_slice(rotation.to_vec9().as_slice());
        record.clock_drift_mps = drift;
        record.geodesic_error_deg = Some(geodesic_angle_deg(rotation, &gt.rotation));
        let yaw_est = yaw_of_deg(rotation, &basis);
        let yaw_gt = yaw_of_deg(&gt.rotation, &basis);
        if let (Ok(a), Ok(b)) = (yaw_est, yaw_gt) {
            record.yaw_error_deg = Some(wrap_angle_deg(a - b));
        }
    };

    match spec {
        MethodSpec::Sdp { redundant } => {
            let opts = AlignOptions::<f64> {
                redundant,
                ..AlignOptions::default()
            };
            match align(&gt.epochs, &opts) {
                Ok(result) => {
                    finish(&mut record, &result.rotation, result.clock_drift.0);
                    record.certified = Some(result.certificate.certified);
                    record.eig_ratio = Some(result.certificate.eig_ratio);
                    record.cost = result.primal_cost;
                    record.dual_value = Some(result.dual_value);
                }
                Err(e) => {
                    record.status = format!("error: {e}");
                    record.certified = Some(false);
                }
            }
        }
        MethodSpec::Voba => match voba_align(&gt.epochs) {
            Ok(rotation) => finish(&mut record, &rotation, 0.0),
            Err(e) => record.status = format!("error: {e}"),
        },
        MethodSpec::Gn { init } => {
            let initial_rotation = match init {
                GnInit::Identity => RotationMatrix::identity(),
                GnInit::Truth => gt.rotation,
            };
            let opts = GnOptions {
                initial_rotation,
                ..GnOptions::default()
            };
            match gn_align(&gt.epochs, &opts) {
                Ok(sol) => {
                    finish(&mut record, &sol.rotation, sol.clock_drift.0);
                    record.cost = sol.cost;
                }
                Err(e) => record.status = format!("error: {e}"),
            }
        }
    }
    record.wall_time_s = start.elapsed().as_secs_f64();
    record
}

/// Seeded Monte Carlo sweep: `runs` independent datasets (streams
/// `0..runs`), each method executed per run. Per-run failures are recorded,
/// not fatal. Deterministic for fixed `(cfg, runs, methods)` regardless of
/// parallelism.
pub fn monte_carlo(cfg: &SimConfig, runs: usize, methods: &[MethodSpec]) -> McReport {
    let per_run: Vec<Vec<RunRecord>> = (0..runs)
        .into_par_iter()
        .map(|run| match generate_dataset_stream(cfg, run as u64) {
            Ok(gt) => methods.iter().map(|m| run_method(&gt, *m)).collect(),
            Err(e) => methods
                .iter()
                .map(|m| RunRecord {
                    method: m.name().to_string(),
                    window_start_s: 0.0,
                    window_end_s: 0.0,
                    rotation: [0.0; 9],
                    clock_drift_mps: 0.0,
                    yaw_error_deg: None,
                    geodesic_error_deg: None,
                    certified: if matches!(m, MethodSpec::Sdp { .. }) {
                        Some(false)
                    } else {
                        None
                    },
                    eig_ratio: None,
                    cost: 0.0,
                    dual_value: None,
                    wall_time_s: 0.0,
                    status: format!("error: {e}"),
                })
                .collect(),
        })
        .collect();

    let records: Vec<RunRecord> = per_run.into_iter().flatten().collect();
    let methods_stats: Vec<MethodStats> = methods
        .iter()
        .map(|m| {
            let name = m.name();
            let of_method: Vec<&RunRecord> =
                records.iter().filter(|r| r.method == name).collect();
            let ok: Vec<&&RunRecord> = of_method.iter().filter(|r| r.status == "ok").collect();
            let errors: Vec<f64> = ok
                .iter()
                .filter_map(|r| r.geodesic_error_deg)
                .map(f64::abs)
                .collect();
            let error_stats = if errors.is_empty() {
                None
            } else {
                let mae = errors.iter().sum::<f64>() / errors.len() as f64;
                let var = errors.iter().map(|e| (e - mae) * (e - mae)).sum::<f64>()
                    / errors.len() as f64;
                let max = errors.iter().cloned().fold(0.0, f64::max);
                Some(ErrorStats {
                    mae_deg: mae,
                    std_deg: var.sqrt(),
                    max_deg: max,
                })
            };
            let certified_rate = if matches!(m, MethodSpec::Sdp { .. }) {
                let certified = of_method
                    .iter()
                    .filter(|r| r.certified == Some(true))
                    .count();
                Some(certified as f64 / runs.max(1) as f64)
            } else {
                None
            };
            MethodStats {
                method: name.to_string(),
                completed: ok.len(),
                failures: of_method.len() - ok.len(),
                certified_rate,
                error_stats,
            }
        })
        .collect();

    let certified_rate = methods
        .iter()
        .zip(methods_stats.iter())
        .find(|(m, _)| matches!(m, MethodSpec::Sdp { .. }))
        .and_then(|(_, s)| s.certified_rate);

    McReport {
        runs,
        certified_rate,
        methods: methods_stats,
        records,
    }
}
