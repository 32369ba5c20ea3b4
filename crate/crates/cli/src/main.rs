//! Command-line front end: simulation, alignment, benchmarking, and
//! observability checks.
//!
//! Exit codes: 0 success (an uncertified alignment is still success —
//! certification status is data, not failure), 2 argument/config/parse
//! error, 3 generation failure, 4 method failure on every window.
//!
//! `CERT_ALIGN_THREADS` caps the worker pool used by `benchmark`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use cert_align::geom::{geodesic_angle_deg, unvectorize, wrap_angle_deg, yaw_of_deg, EnuBasis};
use cert_align::geom::RotationMatrix;
use cert_align::io::{
    load_epochs, load_ground_truth, render_epochs, render_run_records,
    save_ground_truth, EpochFileMeta, GroundTruthRecord, RunRecord, WindowSpec,
};
use cert_align::model::Epoch;
use cert_align::qcqp::{observability, ObservabilityReport};
use cert_align::sim::{
    generate_dataset, monte_carlo, GnInit, MethodSpec, MotionProfile, SimConfig,
};
use cert_align::solver::{align, AlignOptions};
use cert_align::baselines::{gn_align, voba_align, GnOptions};
use nalgebra::SVector;

const EXIT_CONFIG: u8 = 2;
const EXIT_GENERATION: u8 = 3;
const EXIT_METHOD: u8 = 4;

#[derive(Parser)]
#[command(
    name = "cert-align",
    version,
    about = "Certifiable GNSS/local frame alignment from raw Doppler measurements"
)]
struct Cli {
    /// RNG seed (overrides any seed in --config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for generated files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format for records and reports.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Verbose logging.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a simulated dataset (epoch file + ground-truth record).
    Simulate(SimulateArgs),
    /// Run an alignment method over (windows of) an epoch file.
    Align(AlignArgs),
    /// Monte Carlo sweeps with per-cell statistics and plot data.
    Benchmark(BenchmarkArgs),
    /// Report observability ranks of an epoch file.
    Observability(ObservabilityArgs),
    /// Run the certifiable pipeline and print certificate diagnostics.
    CertifyCheck(CertifyCheckArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON config file (SimConfig schema); inline flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    sats: Option<usize>,
    #[arg(long, value_enum)]
    motion: Option<Motion>,
    /// Doppler noise sigma, m/s.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    interval: Option<f64>,
    #[arg(long)]
    speed: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Motion {
    #[value(name = "2d")]
    TwoD,
    #[value(name = "3d")]
    ThreeD,
}

impl From<Motion> for MotionProfile {
    fn from(m: Motion) -> Self {
        match m {
            Motion::TwoD => MotionProfile::Planar2D,
            Motion::ThreeD => MotionProfile::Hill3D,
        }
    }
}

#[derive(Args)]
struct AlignArgs {
    /// Input epoch file.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    method: Method,
    /// Gauss-Newton initialization.
    #[arg(long, value_enum, default_value_t = Init::Identity)]
    init: Init,
    /// Ground-truth record for error columns.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Sliding-window length in seconds (whole file when absent).
    #[arg(long)]
    window: Option<f64>,
    /// Window stride in seconds (defaults to the window length).
    #[arg(long)]
    stride: Option<f64>,
    /// Keep every k-th epoch inside each window.
    #[arg(long, default_value_t = 1)]
    downsample: usize,
    /// Use the redundant constraint set for the SDP.
    #[arg(long, value_enum, default_value_t = OnOff::On)]
    redundant: OnOff,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Sdp,
    Voba,
    Gn,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Init {
    Identity,
    Truth,
    Random,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Sweep grammar: `sats=1..8` or `noise=0.01,0.05,0.1`.
    #[arg(long)]
    sweep: Option<String>,
    /// Monte Carlo runs per sweep cell.
    #[arg(long, default_value_t = 200)]
    runs: usize,
    #[arg(long, value_enum, default_value_t = Motion::ThreeD)]
    motion: Motion,
    #[arg(long, value_enum, default_value_t = OnOff::On)]
    redundant: OnOff,
    /// Satellites per epoch when not swept.
    #[arg(long, default_value_t = 5)]
    sats: usize,
    /// Doppler noise sigma (m/s) when not swept.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Comma-separated methods: sdp, voba, gn-identity, gn-truth.
    #[arg(long, default_value = "sdp")]
    methods: String,
}

#[derive(Args)]
struct ObservabilityArgs {
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args)]
struct CertifyCheckArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = OnOff::On)]
    redundant: OnOff,
    #[arg(long)]
    truth: Option<PathBuf>,
}

/// Error carrying the process exit code.
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn new(code: u8, err: impl std::fmt::Display) -> Self {
        CliError {
            code,
            message: err.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.verbose {
        env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
            .init();
    }
    let invocation: Vec<String> = std::env::args().collect();
    let invocation = invocation.join(" ");

    // benchmark fan-out honors CERT_ALIGN_THREADS
    if let Ok(threads) = std::env::var("CERT_ALIGN_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }

    let result = match &cli.cmd {
        Cmd::Simulate(args) => cmd_simulate(&cli, args, &invocation),
        Cmd::Align(args) => cmd_align(&cli, args, &invocation),
        Cmd::Benchmark(args) => cmd_benchmark(&cli, args, &invocation),
        Cmd::Observability(args) => cmd_observability(&cli, args),
        Cmd::CertifyCheck(args) => cmd_certify_check(&cli, args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn build_config(cli: &Cli, args: &SimulateArgs) -> Result<SimConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(|e| CliError::new(EXIT_CONFIG, e))?;
            serde_json::from_str::<SimConfig>(&text)
                .map_err(|e| CliError::new(EXIT_CONFIG, format!("config: {e}")))?
        }
        None => SimConfig::default(),
    };
    if let Some(s) = args.sats {
        cfg.n_satellites = s;
    }
    if let Some(m) = args.motion {
        cfg.motion = m.into();
    }
    if let Some(n) = args.noise {
        cfg.noise_sigma = n;
    }
    if let Some(d) = args.duration {
        cfg.duration_s = d;
    }
    if let Some(i) = args.interval {
        cfg.interval_s = i;
    }
    if let Some(v) = args.speed {
        cfg.speed_mps = v;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()
        .map_err(|e| CliError::new(EXIT_CONFIG, e))?;
    Ok(cfg)
}

fn cmd_simulate(cli: &Cli, args: &SimulateArgs, invocation: &str) -> Result<(), CliError> {
    let cfg = build_config(cli, args)?;
    let gt = generate_dataset(&cfg).map_err(|e| CliError::new(EXIT_GENERATION, e))?;
    let dir = out_dir(cli);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::new(EXIT_GENERATION, e))?;

    let meta = EpochFileMeta {
        doppler_sign: 1.0,
        note: Some(format!("invocation: {invocation}")),
    };
    let epochs_path = dir.join("epochs.csv");
    let text =
        render_epochs(&gt.epochs, &meta).map_err(|e| CliError::new(EXIT_GENERATION, e))?;
    std::fs::write(&epochs_path, text).map_err(|e| CliError::new(EXIT_GENERATION, e))?;

    let truth_path = dir.join("ground_truth.json");
    let mut rotation = [0.0; 9];
    rotation.copy_from_slice(gt.rotation.to_vec9().as_slice());
    save_ground_truth(
        &truth_path,
        &GroundTruthRecord {
            seed: cfg.seed,
            rotation_col_major: rotation,
            clock_drift_mps: gt.clock_drift.0,
        },
    )
    .map_err(|e| CliError::new(EXIT_GENERATION, e))?;

    let mean_sats = gt
        .epochs
        .iter()
        .map(|e| e.observations.len())
        .sum::<usize>() as f64
        / gt.epochs.len() as f64;
    println!(
        "wrote {} ({} epochs, mean visible satellites {:.1}) and {}",
        epochs_path.display(),
        gt.epochs.len(),
        mean_sats,
        truth_path.display()
    );
    Ok(())
}

fn load_truth_rotation(
    path: &Path,
) -> Result<(RotationMatrix<f64>, f64), CliError> {
    let rec = load_ground_truth(path).map_err(|e| CliError::new(EXIT_CONFIG, e))?;
    let r9 = SVector::<f64, 9>::from_column_slice(&rec.rotation_col_major);
    let rotation = RotationMatrix::from_matrix(unvectorize(&r9))
        .map_err(|e| CliError::new(EXIT_CONFIG, format!("ground truth: {e}")))?;
    Ok((rotation, rec.clock_drift_mps))
}

fn window_slices(epochs: &[Epoch<f64>], args: &AlignArgs) -> Vec<Vec<Epoch<f64>>> {
    match args.window {
        Some(length) => {
            let spec = WindowSpec {
                length_s: length,
                stride_s: args.stride.unwrap_or(length),
                downsample_factor: args.downsample.max(1),
            };
            cert_align::io::windows(epochs, &spec).collect()
        }
        None => {
            if args.downsample > 1 {
                vec![epochs
                    .iter()
                    .step_by(args.downsample)
                    .cloned()
                    .collect()]
            } else {
                vec![epochs.to_vec()]
            }
        }
    }
}

fn emit_records(
    cli: &Cli,
    records: &[RunRecord],
    invocation: &str,
    stem: &str,
) -> Result<(), CliError> {
    let rendered = match cli.format {
        Format::Csv => render_run_records(records, Some(&format!("invocation: {invocation}"))),
        Format::Json => {
            let body = serde_json::json!({
                "invocation": invocation,
                "records": records,
            });
            serde_json::to_string_pretty(&body).expect("serializable") + "\n"
        }
    };
    print!("{rendered}");
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::new(EXIT_GENERATION, e))?;
        let ext = match cli.format {
            Format::Csv => "csv",
            Format::Json => "json",
        };
        let path = dir.join(format!("{stem}.{ext}"));
        std::fs::write(&path, rendered).map_err(|e| CliError::new(EXIT_GENERATION, e))?;
    }
    Ok(())
}

fn cmd_align(cli: &Cli, args: &AlignArgs, invocation: &str) -> Result<(), CliError> {
    let (epochs, _meta) =
        load_epochs(&args.input).map_err(|e| CliError::new(EXIT_CONFIG, e))?;
    if epochs.is_empty() {
        return Err(CliError::new(EXIT_CONFIG, "input file contains no epochs"));
    }
    let truth = match &args.truth {
        Some(path) => Some(load_truth_rotation(path)?),
        None => None,
    };
    let basis = EnuBasis::from_ecef(&epochs[0].receiver_pos)
        .map_err(|e| CliError::new(EXIT_CONFIG, e))?;

    let slices = window_slices(&epochs, args);
    if slices.is_empty() {
        return Err(CliError::new(EXIT_CONFIG, "no windows cover the input"));
    }

    let mut rng_counter = cli.seed.unwrap_or(0);
    let mut records = Vec::with_capacity(slices.len());
    for slice in &slices {
        let start = std::time::Instant::now();
        let window_start = slice.first().map(|e| e.time_s).unwrap_or(0.0);
        let window_end = slice.last().map(|e| e.time_s).unwrap_or(0.0);
        let mut record = RunRecord {
            method: match args.method {
                Method::Sdp => {
                    if args.redundant == OnOff::On {
                        "sdp".into()
                    } else {
                        "sdp-minimal".into()
                    }
                }
                Method::Voba => "voba".into(),
                Method::Gn => format!(
                    "gn-{}",
                    match args.init {
                        Init::Identity => "identity",
                        Init::Truth => "truth",
                        Init::Random => "random",
                    }
                ),
            },
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
            status: "ok".into(),
        };

        let estimate: Result<(RotationMatrix<f64>, f64), String> = match args.method {
            Method::Sdp => {
                let opts = AlignOptions::<f64> {
                    redundant: args.redundant == OnOff::On,
                    ..AlignOptions::default()
                };
                match align(slice, &opts) {
                    Ok(res) => {
                        record.certified = Some(res.certificate.certified);
                        record.eig_ratio = Some(res.certificate.eig_ratio);
                        record.cost = res.primal_cost;
                        record.dual_value = Some(res.dual_value);
                        Ok((res.rotation, res.clock_drift.0))
                    }
                    Err(e) => Err(e.to_string()),
                }
            }
            Method::Voba => voba_align(slice)
                .map(|r| (r, 0.0))
                .map_err(|e| e.to_string()),
            Method::Gn => {
                let initial_rotation = match args.init {
                    Init::Identity => RotationMatrix::identity(),
                    Init::Truth => match &truth {
                        Some((r, _)) => *r,
                        None => {
                            return Err(CliError::new(
                                EXIT_CONFIG,
                                "--init truth requires --truth <file>",
                            ))
                        }
                    },
                    Init::Random => {
                        use rand::SeedableRng;
                        let mut rng =
                            rand_chacha::ChaCha8Rng::seed_from_u64(rng_counter);
                        rng_counter = rng_counter.wrapping_add(1);
                        cert_align::sim::uniform_rotation(&mut rng)
                    }
                };
                let opts = GnOptions {
                    initial_rotation,
                    ..GnOptions::default()
                };
                match gn_align(slice, &opts) {
                    Ok(sol) => {
                        record.cost = sol.cost;
                        Ok((sol.rotation, sol.clock_drift.0))
                    }
                    Err(e) => Err(e.to_string()),
                }
            }
        };

        match estimate {
            Ok((rotation, drift)) => {
                record
                    .rotation
                    .copy_from_slice(rotation.to_vec9().as_slice());
                record.clock_drift_mps = drift;
                if let Some((gt_rot, _)) = &truth {
                    record.geodesic_error_deg = Some(geodesic_angle_deg(&rotation, gt_rot));
                    if let (Ok(a), Ok(b)) =
                        (yaw_of_deg(&rotation, &basis), yaw_of_deg(gt_rot, &basis))
                    {
                        record.yaw_error_deg = Some(wrap_angle_deg(a - b));
                    }
                }
            }
            Err(message) => record.status = format!("error: {message}"),
        }
        record.wall_time_s = start.elapsed().as_secs_f64();
        records.push(record);
    }

    emit_records(cli, &records, invocation, "records")?;
    if records.iter().all(|r| r.status != "ok") {
        return Err(CliError::new(
            EXIT_METHOD,
            "method failed on every window",
        ));
    }
    Ok(())
}

/// Parses `name=a..b` (inclusive integer range) or `name=v1,v2,...`.
fn parse_sweep(text: &str) -> Result<(String, Vec<f64>), String> {
    let (name, values) = text
        .split_once('=')
        .ok_or_else(|| format!("sweep {text:?} must look like sats=1..8 or noise=0.1,0.5"))?;
    let name = name.trim().to_string();
    if name != "sats" && name != "noise" {
        return Err(format!("unknown sweep variable {name:?} (sats or noise)"));
    }
    let values = values.trim();
    if let Some((lo, hi)) = values.split_once("..") {
        let lo: i64 = lo.trim().parse().map_err(|_| format!("bad range start {lo:?}"))?;
        let hi: i64 = hi.trim().parse().map_err(|_| format!("bad range end {hi:?}"))?;
        if hi < lo {
            return Err(format!("empty range {lo}..{hi}"));
        }
        Ok((name, (lo..=hi).map(|v| v as f64).collect()))
    } else {
        let parsed: Result<Vec<f64>, _> =
            values.split(',').map(|v| v.trim().parse::<f64>()).collect();
        parsed
            .map(|v| (name, v))
            .map_err(|_| format!("bad sweep values {values:?}"))
    }
}

fn parse_methods(text: &str, redundant: bool) -> Result<Vec<MethodSpec>, String> {
    text.split(',')
        .map(|tok| match tok.trim() {
            "sdp" => Ok(MethodSpec::Sdp { redundant }),
            "voba" => Ok(MethodSpec::Voba),
            "gn-identity" | "gn" => Ok(MethodSpec::Gn {
                init: GnInit::Identity,
            }),
            "gn-truth" => Ok(MethodSpec::Gn {
                init: GnInit::Truth,
            }),
            other => Err(format!("unknown method {other:?}")),
        })
        .collect()
}

fn cmd_benchmark(cli: &Cli, args: &BenchmarkArgs, invocation: &str) -> Result<(), CliError> {
    if args.runs == 0 {
        return Err(CliError::new(EXIT_CONFIG, "--runs must be >= 1"));
    }
    let (sweep_name, sweep_values) = match &args.sweep {
        Some(text) => parse_sweep(text).map_err(|e| CliError::new(EXIT_CONFIG, e))?,
        None => ("sats".to_string(), vec![args.sats as f64]),
    };
    let methods = parse_methods(&args.methods, args.redundant == OnOff::On)
        .map_err(|e| CliError::new(EXIT_CONFIG, e))?;

    let base = SimConfig {
        motion: args.motion.into(),
        n_satellites: args.sats,
        noise_sigma: args.noise,
        seed: cli.seed.unwrap_or(0),
        ..SimConfig::default()
    };

    let mut plot = String::new();
    plot.push_str(&format!("# invocation: {invocation}\n"));
    plot.push_str(
        "sweep_var,value,method,runs,failures,certified_rate,mae_deg,std_deg,max_deg\n",
    );
    let mut reports = Vec::new();
    for value in &sweep_values {
        let mut cfg = base.clone();
        match sweep_name.as_str() {
            "sats" => cfg.n_satellites = *value as usize,
            "noise" => cfg.noise_sigma = *value,
            _ => unreachable!(),
        }
        cfg.validate().map_err(|e| CliError::new(EXIT_CONFIG, e))?;
        let report = monte_carlo(&cfg, args.runs, &methods);
        for stats in &report.methods {
            let (mae, std, max) = stats
                .error_stats
                .map(|e| (e.mae_deg, e.std_deg, e.max_deg))
                .unwrap_or((f64::NAN, f64::NAN, f64::NAN));
            plot.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                sweep_name,
                value,
                stats.method,
                report.runs,
                stats.failures,
                stats
                    .certified_rate
                    .map(|r| r.to_string())
                    .unwrap_or_default(),
                mae,
                std,
                max
            ));
        }
        reports.push(serde_json::json!({
            "sweep_var": sweep_name,
            "value": value,
            "report": report,
        }));
    }

    print!("{plot}");
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::new(EXIT_GENERATION, e))?;
        let plot_path = dir.join(format!("benchmark_{sweep_name}.csv"));
        std::fs::write(&plot_path, &plot).map_err(|e| CliError::new(EXIT_GENERATION, e))?;
        let json_path = dir.join(format!("benchmark_{sweep_name}.json"));
        let body = serde_json::json!({
            "invocation": invocation,
            "cells": reports,
        });
        std::fs::write(
            &json_path,
            serde_json::to_string_pretty(&body).expect("serializable"),
        )
        .map_err(|e| CliError::new(EXIT_GENERATION, e))?;
        eprintln!("wrote {} and {}", plot_path.display(), json_path.display());
    }
    Ok(())
}

fn report_to_json(report: &ObservabilityReport<f64>) -> serde_json::Value {
    serde_json::json!({
        "rank_v": report.rank_v,
        "rank_n": report.rank_n,
        "rank_m": report.rank_m,
        "singular_values_v": report.singular_values_v,
        "singular_values_n": report.singular_values_n,
        "singular_values_m": report.singular_values_m,
        "observable_redundant": report.observable_redundant,
        "observable_minimal": report.observable_minimal,
    })
}

fn cmd_observability(cli: &Cli, args: &ObservabilityArgs) -> Result<(), CliError> {
    let (epochs, _) = load_epochs(&args.input).map_err(|e| CliError::new(EXIT_CONFIG, e))?;
    let report = observability(&epochs)
        .map_err(|e| CliError::new(EXIT_CONFIG, e))?;
    match cli.format {
        Format::Json => println!(
            "{}",
            serde_json::to_string_pretty(&report_to_json(&report)).expect("serializable")
        ),
        Format::Csv => {
            println!("rank_v,rank_n,rank_m,observable_redundant,observable_minimal");
            println!(
                "{},{},{},{},{}",
                report.rank_v,
                report.rank_n,
                report.rank_m,
                report.observable_redundant,
                report.observable_minimal
            );
        }
    }
    Ok(())
}

fn cmd_certify_check(cli: &Cli, args: &CertifyCheckArgs) -> Result<(), CliError> {
    let (epochs, _) = load_epochs(&args.input).map_err(|e| CliError::new(EXIT_CONFIG, e))?;
    let opts = AlignOptions::<f64> {
        redundant: args.redundant == OnOff::On,
        ..AlignOptions::default()
    };
    let result = align(&epochs, &opts).map_err(|e| CliError::new(EXIT_METHOD, e))?;
    let mut body = serde_json::json!({
        "certified": result.certificate.certified,
        "eig_ratio": result.certificate.eig_ratio,
        "h_min_eig": result.certificate.h_min_eig,
        "kkt_residual": result.certificate.kkt_residual,
        "constraint_residual": result.certificate.constraint_residual,
        "primal_cost": result.primal_cost,
        "dual_value": result.dual_value,
        "duality_gap": result.primal_cost - result.dual_value,
        "solver_status": format!("{:?}", result.solver_status),
        "iterations": result.iterations,
        "wall_time_s": result.wall_time_s,
    });
    if let Some(path) = &args.truth {
        let (gt_rot, gt_drift) = load_truth_rotation(path)?;
        body["geodesic_error_deg"] =
            serde_json::json!(geodesic_angle_deg(&result.rotation, &gt_rot));
        body["clock_drift_error_mps"] =
            serde_json::json!((result.clock_drift.0 - gt_drift).abs());
    }
    match cli.format {
        Format::Json => {
            println!("{}", serde_json::to_string_pretty(&body).expect("serializable"))
        }
        Format::Csv => {
            let obj = body.as_object().expect("object");
            let keys: Vec<&str> = obj.keys().map(String::as_str).collect();
            println!("{}", keys.join(","));
            let vals: Vec<String> = obj.values().map(|v| v.to_string()).collect();
            println!("{}", vals.join(","));
        }
    }
    Ok(())
}
