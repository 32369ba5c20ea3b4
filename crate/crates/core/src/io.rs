//! Dataset files, sliding windows, run records, and summary statistics.
//!
//! The epoch file is plain CSV with a versioned first line:
//!
//! ```text
//! cert-align-epochs,v1,doppler_sign=+1[,note=...]
//! time_s,sat_id,sat_px,sat_py,sat_pz,sat_vx,sat_vy,sat_vz,doppler_hz,
//! wavelength_m,rcv_px,rcv_py,rcv_pz,body_vx,body_vy,body_vz
//! ```
//!
//! One row per observation, rows grouped by non-decreasing time, ECEF
//! positions in meters and velocities in meters per second. `doppler_sign`
//! (+1 or -1) is applied when loading so receivers with the opposite Doppler
//! convention can be ingested without rewriting the file. Floats are written
//! in shortest round-trip form, so save followed by load reproduces the
//! epochs exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Epoch, RawDoppler, SatelliteState};

pub const EPOCH_FILE_MAGIC: &str = "cert-align-epochs";
pub const EPOCH_FILE_VERSION: &str = "v1";

const COLUMNS: [&str; 16] = [
    "time_s",
    "sat_id",
    "sat_px",
    "sat_py",
    "sat_pz",
    "sat_vx",
    "sat_vy",
    "sat_vz",
    "doppler_hz",
    "wavelength_m",
    "rcv_px",
    "rcv_py",
    "rcv_pz",
    "body_vx",
    "body_vy",
    "body_vz",
];

#[derive(Debug, Error)]
pub enum IoError {
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("unsupported format version {found:?} (expected {EPOCH_FILE_VERSION:?})")]
    VersionMismatch { found: String },
    #[error("no records to summarize")]
    EmptyInput,
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Header metadata of an epoch file.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochFileMeta {
    /// Doppler sign convention of the file relative to the model (+1 or -1).
    pub doppler_sign: f64,
    /// Free-form note (commas replaced by semicolons on write).
    pub note: Option<String>,
}

impl Default for EpochFileMeta {
    fn default() -> Self {
        EpochFileMeta {
            doppler_sign: 1.0,
            note: None,
        }
    }
}

fn parse_float(tok: &str, line: usize, what: &str) -> Result<f64, IoError> {
    tok.trim().parse::<f64>().map_err(|_| IoError::Parse {
        line,
        reason: format!("cannot parse {what} from {tok:?}"),
    })
}

/// Loads an epoch file; the header's `doppler_sign` is applied to every
/// Doppler value so the returned epochs follow the model convention.
pub fn load_epochs(path: impl AsRef<Path>) -> Result<(Vec<Epoch<f64>>, EpochFileMeta), IoError> {
    let text = std::fs::read_to_string(path)?;
    parse_epochs(&text)
}

/// Parses epoch-file content; see [`load_epochs`].
pub fn parse_epochs(text: &str) -> Result<(Vec<Epoch<f64>>, EpochFileMeta), IoError> {
    let mut lines = text.lines().enumerate();

    let (_, header) = lines.next().ok_or(IoError::Parse {
        line: 1,
        reason: "empty file".into(),
    })?;
    let mut head_tokens = header.split(',');
    if head_tokens.next() != Some(EPOCH_FILE_MAGIC) {
        return Err(IoError::Parse {
            line: 1,
            reason: format!("not an epoch file (missing {EPOCH_FILE_MAGIC:?} magic)"),
        });
    }
    let version = head_tokens.next().unwrap_or("").to_string();
    if version != EPOCH_FILE_VERSION {
        return Err(IoError::VersionMismatch { found: version });
    }
    let mut meta = EpochFileMeta::default();
    for tok in head_tokens {
        match tok.split_once('=') {
            Some(("doppler_sign", v)) => {
                let sign = parse_float(v, 1, "doppler_sign")?;
                if sign != 1.0 && sign != -1.0 {
                    return Err(IoError::Parse {
                        line: 1,
                        reason: format!("doppler_sign must be +1 or -1, got {v}"),
                    });
                }
                meta.doppler_sign = sign;
            }
            Some(("note", v)) => meta.note = Some(v.to_string()),
            // unknown header keys are tolerated for forward compatibility
            Some(_) => {}
            None => {
                return Err(IoError::Parse {
                    line: 1,
                    reason: format!("malformed header token {tok:?}"),
                })
            }
        }
    }

    let (_, columns) = lines.next().ok_or(IoError::Parse {
        line: 2,
        reason: "missing column header".into(),
    })?;
    let names: Vec<&str> = columns.split(',').map(str::trim).collect();
    if names.len() != COLUMNS.len() {
        return Err(IoError::Parse {
            line: 2,
            reason: format!("expected {} columns, found {}", COLUMNS.len(), names.len()),
        });
    }
    for (found, expected) in names.iter().zip(COLUMNS.iter()) {
        if found != expected {
            return Err(IoError::Parse {
                line: 2,
                reason: format!("unknown column {found:?} (expected {expected:?})"),
            });
        }
    }

    let mut epochs: Vec<Epoch<f64>> = Vec::new();
    let mut prev_time: Option<f64> = None;
    for (idx, raw_line) in lines {
        let line = idx + 1; // 1-based file line
        if raw_line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw_line.split(',').collect();
        if fields.len() != COLUMNS.len() {
            return Err(IoError::Parse {
                line,
                reason: format!("expected {} fields, found {}", COLUMNS.len(), fields.len()),
            });
        }
        let time_s = parse_float(fields[0], line, "time_s")?;
        let sat_id = fields[1].trim().to_string();
        if sat_id.is_empty() {
            return Err(IoError::Parse {
                line,
                reason: "empty sat_id".into(),
            });
        }
        let f = |i: usize, what: &str| parse_float(fields[i], line, what);
        let sat_pos = Vector3::new(f(2, "sat_px")?, f(3, "sat_py")?, f(4, "sat_pz")?);
        let sat_vel = Vector3::new(f(5, "sat_vx")?, f(6, "sat_vy")?, f(7, "sat_vz")?);
        let doppler_hz = meta.doppler_sign * f(8, "doppler_hz")?;
        let wavelength_m = f(9, "wavelength_m")?;
        if wavelength_m <= 0.0 {
            return Err(IoError::Parse {
                line,
                reason: format!("wavelength must be positive, got {wavelength_m}"),
            });
        }
        let receiver_pos = Vector3::new(f(10, "rcv_px")?, f(11, "rcv_py")?, f(12, "rcv_pz")?);
        let body_velocity = Vector3::new(f(13, "body_vx")?, f(14, "body_vy")?, f(15, "body_vz")?);

        if let Some(prev) = prev_time {
            if time_s < prev {
                return Err(IoError::Parse {
                    line,
                    reason: format!("time decreases ({time_s} after {prev})"),
                });
            }
        }
        prev_time = Some(time_s);

        let observation = (
            RawDoppler {
                sat_id: sat_id.clone(),
                doppler_hz,
                wavelength_m,
                sigma: None,
            },
            SatelliteState {
                id: sat_id.clone(),
                pos: sat_pos,
                vel: sat_vel,
            },
        );

        match epochs.last_mut() {
            Some(epoch) if epoch.time_s == time_s => {
                if epoch.receiver_pos != receiver_pos || epoch.body_velocity != body_velocity {
                    return Err(IoError::Parse {
                        line,
                        reason: "inconsistent receiver state within epoch".into(),
                    });
                }
                if epoch.observations.iter().any(|(o, _)| o.sat_id == sat_id) {
                    return Err(IoError::Parse {
                        line,
                        reason: format!("duplicate satellite {sat_id:?} within epoch"),
                    });
                }
                epoch.observations.push(observation);
            }
            _ => epochs.push(Epoch {
                time_s,
                receiver_pos,
                body_velocity,
                observations: vec![observation],
            }),
        }
    }
    Ok((epochs, meta))
}

/// Renders epochs into the epoch-file format.
pub fn render_epochs(epochs: &[Epoch<f64>], meta: &EpochFileMeta) -> Result<String, IoError> {
    let mut out = String::new();
    write!(out, "{EPOCH_FILE_MAGIC},{EPOCH_FILE_VERSION},doppler_sign={:+}", meta.doppler_sign)
        .expect("infallible");
    if let Some(note) = &meta.note {
        let sanitized = note.replace([',', '\n'], ";");
        write!(out, ",note={sanitized}").expect("infallible");
    }
    out.push('\n');
    out.push_str(&COLUMNS.join(","));
    out.push('\n');
    for epoch in epochs {
        for (obs, sat) in &epoch.observations {
            if sat.id.contains(',') || sat.id.contains('\n') {
                return Err(IoError::InvalidField(format!(
                    "satellite id {:?} contains a separator",
                    sat.id
                )));
            }
            let d_file = meta.doppler_sign * obs.doppler_hz;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                epoch.time_s,
                sat.id,
                sat.pos[0],
                sat.pos[1],
                sat.pos[2],
                sat.vel[0],
                sat.vel[1],
                sat.vel[2],
                d_file,
                obs.wavelength_m,
                epoch.receiver_pos[0],
                epoch.receiver_pos[1],
                epoch.receiver_pos[2],
                epoch.body_velocity[0],
                epoch.body_velocity[1],
                epoch.body_velocity[2],
            )
            .expect("infallible");
        }
    }
    Ok(out)
}

/// Writes an epoch file to disk.
pub fn save_epochs(
    path: impl AsRef<Path>,
    epochs: &[Epoch<f64>],
    meta: &EpochFileMeta,
) -> Result<(), IoError> {
    std::fs::write(path, render_epochs(epochs, meta)?)?;
    Ok(())
}

/// Ground-truth sidecar record written next to simulated datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub seed: u64,
    /// Column-stacked rotation matrix.
    pub rotation_col_major: [f64; 9],
    pub clock_drift_mps: f64,
}

pub fn save_ground_truth(
    path: impl AsRef<Path>,
    record: &GroundTruthRecord,
) -> Result<(), IoError> {
    std::fs::write(path, serde_json::to_string_pretty(record)?)?;
    Ok(())
}

pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruthRecord, IoError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Sliding-window slicing with optional downsampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    /// Window length, seconds.
    pub length_s: f64,
    /// Stride between window starts, seconds.
    pub stride_s: f64,
    /// Keep every k-th epoch, counted from the first epoch in each window.
    pub downsample_factor: usize,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            length_s: 120.0,
            stride_s: 120.0,
            downsample_factor: 1,
        }
    }
}

/// Iterator over half-open windows `[t, t + length)` of a time-sorted epoch
/// list. Windows that contain no epochs are skipped.
pub struct Windows<'a> {
    epochs: &'a [Epoch<f64>],
    spec: WindowSpec,
    next_start: f64,
    end_time: f64,
    lo: usize,
}

impl<'a> Iterator for Windows<'a> {
    type Item = Vec<Epoch<f64>>;

    fn next(&mut self) -> Option<Self::Item> {
        while self.next_start <= self.end_time {
            let start = self.next_start;
            let stop = start + self.spec.length_s;
            self.next_start += self.spec.stride_s;
            // advance the low cursor to the first epoch at or past start
            while self.lo < self.epochs.len() && self.epochs[self.lo].time_s < start {
                self.lo += 1;
            }
            let mut hi = self.lo;
            while hi < self.epochs.len() && self.epochs[hi].time_s < stop {
                hi += 1;
            }
            if hi > self.lo {
                let slice = &self.epochs[self.lo..hi];
                let out: Vec<Epoch<f64>> = slice
                    .iter()
                    .step_by(self.spec.downsample_factor.max(1))
                    .cloned()
                    .collect();
                return Some(out);
            }
        }
        None
    }
}

/// Splits epochs into half-open sliding windows per `spec`. A
/// non-positive stride falls back to the window length, and a
/// non-positive length yields no windows.
pub fn windows<'a>(epochs: &'a [Epoch<f64>], spec: &WindowSpec) -> Windows<'a> {
    let start = epochs.first().map(|e| e.time_s).unwrap_or(0.0);
    let mut end_time = epochs.last().map(|e| e.time_s).unwrap_or(-1.0);
    let mut spec = *spec;
    if spec.stride_s <= 0.0 {
        spec.stride_s = spec.length_s;
    }
    if spec.length_s <= 0.0 || spec.stride_s <= 0.0 {
        end_time = start - 1.0;
    }
    Windows {
        epochs,
        spec,
        next_start: start,
        end_time,
        lo: 0,
    }
}

/// One alignment run on one window; serializes losslessly through CSV and
/// JSON (floats in shortest round-trip form).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: String,
    pub window_start_s: f64,
    pub window_end_s: f64,
    /// Column-stacked rotation estimate.
    pub rotation: [f64; 9],
    pub clock_drift_mps: f64,
    pub yaw_error_deg: Option<f64>,
    pub geodesic_error_deg: Option<f64>,
    pub certified: Option<bool>,
    pub eig_ratio: Option<f64>,
    pub cost: f64,
    pub dual_value: Option<f64>,
    pub wall_time_s: f64,
    /// "ok" or a short error description.
    pub status: String,
}

pub const RUN_RECORD_COLUMNS: &str = "method,window_start_s,window_end_s,\
r11,r21,r31,r12,r22,r32,r13,r23,r33,clock_drift_mps,yaw_error_deg,\
geodesic_error_deg,certified,eig_ratio,cost,dual_value,wall_time_s,status";

/// Shortest round-trip rendering; switches to exponent form outside the
/// range where plain decimal stays compact.
fn fmt_float(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 1e-4 && v.abs() < 1e15) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

fn opt_to_field(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

fn field_to_opt(tok: &str, line: usize) -> Result<Option<f64>, IoError> {
    if tok.is_empty() {
        Ok(None)
    } else {
        parse_float(tok, line, "optional field").map(Some)
    }
}

/// Renders run records as CSV; `header_note` lines are prefixed with `#`.
pub fn render_run_records(records: &[RunRecord], header_note: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(note) = header_note {
        for l in note.lines() {
            let _ = writeln!(out, "# {l}");
        }
    }
    out.push_str(RUN_RECORD_COLUMNS);
    out.push('\n');
    for r in records {
        let rot: Vec<String> = r.rotation.iter().map(|v| fmt_float(*v)).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.method,
            fmt_float(r.window_start_s),
            fmt_float(r.window_end_s),
            rot.join(","),
            fmt_float(r.clock_drift_mps),
            opt_to_field(r.yaw_error_deg),
            opt_to_field(r.geodesic_error_deg),
            r.certified.map(|b| b.to_string()).unwrap_or_default(),
            opt_to_field(r.eig_ratio),
            fmt_float(r.cost),
            opt_to_field(r.dual_value),
            fmt_float(r.wall_time_s),
            r.status.replace(',', ";"),
        );
    }
    out
}

/// Parses run records back from CSV (skipping `#` comment lines).
pub fn parse_run_records(text: &str) -> Result<Vec<RunRecord>, IoError> {
    let mut out = Vec::new();
    let mut saw_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.starts_with('#') || raw.trim().is_empty() {
            continue;
        }
        if !saw_header {
            if raw != RUN_RECORD_COLUMNS {
                return Err(IoError::Parse {
                    line,
                    reason: "unexpected run-record header".into(),
                });
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 21 {
            return Err(IoError::Parse {
                line,
                reason: format!("expected 21 fields, found {}", fields.len()),
            });
        }
        let mut rotation = [0.0; 9];
        for (i, slot) in rotation.iter_mut().enumerate() {
            *slot = parse_float(fields[3 + i], line, "rotation")?;
        }
        let certified = match fields[15] {
            "" => None,
            "true" => Some(true),
            "false" => Some(false),
            other => {
                return Err(IoError::Parse {
                    line,
                    reason: format!("bad certified flag {other:?}"),
                })
            }
        };
        out.push(RunRecord {
            method: fields[0].to_string(),
            window_start_s: parse_float(fields[1], line, "window_start_s")?,
            window_end_s: parse_float(fields[2], line, "window_end_s")?,
            rotation,
            clock_drift_mps: parse_float(fields[12], line, "clock_drift_mps")?,
            yaw_error_deg: field_to_opt(fields[13], line)?,
            geodesic_error_deg: field_to_opt(fields[14], line)?,
            certified,
            eig_ratio: field_to_opt(fields[16], line)?,
            cost: parse_float(fields[17], line, "cost")?,
            dual_value: field_to_opt(fields[18], line)?,
            wall_time_s: parse_float(fields[19], line, "wall_time_s")?,
            status: fields[20].to_string(),
        });
    }
    Ok(out)
}

/// Per-method error statistics (absolute errors, population std).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub count: usize,
    pub mae_deg: f64,
    pub std_deg: f64,
    pub max_deg: f64,
    pub certified_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Summary {
    pub per_method: BTreeMap<String, MethodSummary>,
}

/// Aggregates records per method: MAE, population standard deviation, and
/// max of the absolute errors. Uses the geodesic error when any record has
/// one, otherwise the yaw error (real data carries heading truth only).
pub fn summarize(records: &[RunRecord]) -> Result<Summary, IoError> {
    if records.is_empty() {
        return Err(IoError::EmptyInput);
    }
    let use_geodesic = records.iter().any(|r| r.geodesic_error_deg.is_some());
    let mut per_method: BTreeMap<String, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        per_method.entry(r.method.clone()).or_default().push(r);
    }
    let mut out = Summary::default();
    for (method, rs) in per_method {
        let errors: Vec<f64> = rs
            .iter()
            .filter(|r| r.status == "ok")
            .filter_map(|r| {
                if use_geodesic {
                    r.geodesic_error_deg
                } else {
                    r.yaw_error_deg
                }
            })
            .map(f64::abs)
            .collect();
        let (mae, std, max) = if errors.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            let mae = errors.iter().sum::<f64>() / errors.len() as f64;
            let var =
                errors.iter().map(|e| (e - mae) * (e - mae)).sum::<f64>() / errors.len() as f64;
            (mae, var.sqrt(), errors.iter().cloned().fold(0.0, f64::max))
        };
        let with_flag = rs.iter().filter(|r| r.certified.is_some()).count();
        let certified_rate = if with_flag > 0 {
            Some(
                rs.iter().filter(|r| r.certified == Some(true)).count() as f64
                    / rs.len() as f64,
            )
        } else {
            None
        };
        out.per_method.insert(
            method,
            MethodSummary {
                count: rs.len(),
                mae_deg: mae,
                std_deg: std,
                max_deg: max,
                certified_rate,
            },
        );
    }
    Ok(out)
}
