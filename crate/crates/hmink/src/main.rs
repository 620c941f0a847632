//! Batch front end: tabulate profiles, run the Q-iteration, evaluate
//! bounds, run flows, and sweep the double disk.
//!
//! Exit codes: 0 success/pass, 1 usage or construction error,
//! 2 non-convergence, 3 infeasible data, 4 flow failure. Data files are
//! deterministic (byte-identical across runs); the only volatile metadata
//! (wall time) lives in the `.manifest.json` sidecar.

use clap::{Args, Parser, Subcommand};
use hmink::bounds;
use hmink::flow::{self, FlowConfig, FlowError};
use hmink::profiles::{self, SpaceForm};
use hmink::qiter::{self, IterationConfig};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const EXIT_USAGE: u8 = 1;
const EXIT_NO_CONVERGENCE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_FLOW_FAILURE: u8 = 4;

#[derive(Parser)]
#[command(name = "hmink", version, about = "Geodesic-sphere profiles, curvature bounds and harmonic mean curvature flow in H^3(a)")]
struct Cli {
    /// Also print the JSON report(s) to standard output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate V, S, M and the profile functions on a radius grid.
    Profiles(ProfilesArgs),
    /// Run the Q_n fixed-point iteration toward xi.
    Qiter(QiterArgs),
    /// Evaluate all lower bounds at one (S, V) pair.
    Bounds(BoundsArgs),
    /// Run the harmonic mean curvature flow and audit its monotone
    /// quantities.
    Flow(FlowArgs),
    /// Sweep the double disk against the Santalo bound.
    Disk(DiskArgs),
}

#[derive(Args)]
struct ProfilesArgs {
    /// Ambient curvature (a <= 0).
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    a: f64,
    #[arg(long, default_value_t = 3.0)]
    r_max: f64,
    /// Number of grid rows (including r = 0).
    #[arg(long, default_value_t = 301)]
    n: usize,
    #[arg(long, default_value = "profiles.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct QiterArgs {
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    a: f64,
    #[arg(long, default_value_t = 50.0)]
    x_max: f64,
    #[arg(long, default_value_t = 2001)]
    n_points: usize,
    #[arg(long, default_value_t = 1e-4)]
    sup_tol: f64,
    #[arg(long, default_value_t = 200)]
    max_n: usize,
    /// Iterates CSV path; the report goes to the same stem with `.json`.
    #[arg(long, default_value = "qiter.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, allow_hyphen_values = true)]
    s: f64,
    #[arg(long, allow_hyphen_values = true)]
    v: f64,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    a: f64,
    /// Optional file copy of the report printed to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FlowArgs {
    /// Initial surface: "sphere" or "perturbed".
    #[arg(long, default_value = "sphere")]
    shape: String,
    #[arg(long, default_value_t = 1.0)]
    r0: f64,
    /// Legendre perturbation amplitude (shape = perturbed).
    #[arg(long, default_value_t = 0.05, allow_hyphen_values = true)]
    eps: f64,
    /// Legendre perturbation mode (shape = perturbed).
    #[arg(long, default_value_t = 2)]
    mode: usize,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    a: f64,
    #[arg(long, default_value_t = 1e-4)]
    dt: f64,
    #[arg(long, default_value_t = 0.4)]
    t_max: f64,
    #[arg(long, default_value_t = 256)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    record_every: usize,
    #[arg(long, default_value_t = 0.05)]
    stop_radius: f64,
    /// Trace CSV path; the audit goes to the same stem with `.json`.
    #[arg(long, default_value = "flow.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct DiskArgs {
    #[arg(long, default_value_t = 3.0)]
    rho_max: f64,
    /// Number of sweep rows at rho = rho_max * k / n, k = 1..n.
    #[arg(long, default_value_t = 300)]
    n: usize,
    /// Sweep CSV path; the threshold sidecar goes to `.json`.
    #[arg(long, default_value = "disk.csv")]
    out: PathBuf,
}

#[derive(Debug)]
struct CliFailure {
    exit: u8,
    message: String,
}

impl CliFailure {
    fn usage(message: impl Into<String>) -> Self {
        Self { exit: EXIT_USAGE, message: message.into() }
    }
}

impl<E: std::error::Error> From<E> for CliFailure {
    fn from(e: E) -> Self {
        CliFailure::usage(e.to_string())
    }
}

type CmdResult = Result<u8, CliFailure>;

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    parameters: serde_json::Value,
    version: &'a str,
    wall_time_ms: f64,
    outputs: Vec<String>,
    threads: usize,
}

fn threads_cap() -> Result<usize, CliFailure> {
    match std::env::var("HMINK_THREADS") {
        Err(_) => Ok(1),
        Ok(v) => v
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| CliFailure::usage(format!("HMINK_THREADS must be a positive integer, got {v:?}"))),
    }
}

/// Write a file atomically: write to a temporary sibling, then rename.
fn write_atomic(path: &Path, contents: &str) -> Result<(), CliFailure> {
    let tmp = path.with_extension(match path.extension() {
        Some(e) => format!("{}.tmp", e.to_string_lossy()),
        None => "tmp".into(),
    });
    std::fs::write(&tmp, contents)
        .map_err(|e| CliFailure::usage(format!("cannot write {}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| CliFailure::usage(format!("cannot move into place {}: {e}", path.display())))
}

fn sibling_json(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn write_manifest(
    out: &Path,
    command: &str,
    parameters: serde_json::Value,
    started: Instant,
    outputs: &[&Path],
    threads: usize,
) -> Result<(), CliFailure> {
    let manifest = RunManifest {
        command,
        parameters,
        version: env!("CARGO_PKG_VERSION"),
        wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        threads,
    };
    let path = out.with_extension("manifest.json");
    let body = serde_json::to_string_pretty(&manifest).expect("manifest serialization");
    write_atomic(&path, &body)
}

fn space_form(a: f64) -> Result<SpaceForm, CliFailure> {
    SpaceForm::new(a).map_err(|e| CliFailure::usage(e.to_string()))
}

fn cmd_profiles(args: &ProfilesArgs, _json: bool) -> CmdResult {
    let started = Instant::now();
    let threads = threads_cap()?;
    let sf = space_form(args.a)?;
    if !(args.r_max > 0.0) {
        return Err(CliFailure::usage("r_max must be positive"));
    }
    if args.n < 2 {
        return Err(CliFailure::usage("n must be at least 2"));
    }
    let mut csv = String::from("r,V,S,M,eta_of_V,xi_of_V\n");
    for k in 0..args.n {
        let r = args.r_max * k as f64 / (args.n - 1) as f64;
        let v = profiles::sphere_volume(r, sf);
        let s = profiles::sphere_area(r, sf);
        let m = profiles::sphere_tmc(r, sf);
        let eta_v = profiles::eta(v, sf)?;
        let xi_v = profiles::xi(v, sf)?;
        // embedded self-test: eta(V(r)) must reproduce S(r)
        if (eta_v - s).abs() > 1e-9 * (1.0 + s) {
            return Err(CliFailure::usage(format!(
                "profile self-test failed at r = {r}: eta(V) = {eta_v}, S = {s}"
            )));
        }
        csv.push_str(&format!(
            "{r:.16e},{v:.16e},{s:.16e},{m:.16e},{eta_v:.16e},{xi_v:.16e}\n"
        ));
    }
    write_atomic(&args.out, &csv)?;
    write_manifest(
        &args.out,
        "profiles",
        serde_json::json!({"a": args.a, "r_max": args.r_max, "n": args.n}),
        started,
        &[&args.out],
        threads,
    )?;
    println!("wrote {} ({} rows)", args.out.display(), args.n);
    Ok(0)
}

fn cmd_qiter(args: &QiterArgs, json: bool) -> CmdResult {
    let started = Instant::now();
    let threads = threads_cap()?;
    let cfg = IterationConfig {
        sf: space_form(args.a)?,
        x_max: args.x_max,
        n_points: args.n_points,
        sup_tol: args.sup_tol,
        max_n: args.max_n,
    };
    cfg.validate().map_err(|e| CliFailure::usage(e.to_string()))?;
    let report = qiter::run_iteration(&cfg)?;
    let json_path = sibling_json(&args.out);
    write_atomic(&args.out, &report.iterates_csv())?;
    write_atomic(&json_path, &report.to_json())?;
    write_manifest(
        &args.out,
        "qiter",
        serde_json::json!({
            "a": args.a, "x_max": args.x_max, "n_points": args.n_points,
            "sup_tol": args.sup_tol, "max_n": args.max_n
        }),
        started,
        &[&args.out, &json_path],
        threads,
    )?;
    if json {
        println!("{}", report.to_json());
    } else {
        println!(
            "n_final = {}, converged = {}, final gap = {:.3e}",
            report.n_final,
            report.converged,
            report.gaps.last().copied().unwrap_or(f64::NAN)
        );
    }
    Ok(if report.converged { 0 } else { EXIT_NO_CONVERGENCE })
}

fn cmd_bounds(args: &BoundsArgs, _json: bool) -> CmdResult {
    let started = Instant::now();
    let threads = threads_cap()?;
    let sf = space_form(args.a)?;
    if args.s < 0.0 || args.v < 0.0 {
        return Err(CliFailure::usage("S and V must be nonnegative"));
    }
    let report = bounds::bounds_report(args.s, args.v, sf)?;
    let mut value = serde_json::to_value(&report).expect("report serialization");
    if sf.a() == -1.0 && report.feasible {
        let cmp = bounds::compare_sharp_vs_bgl(args.s, args.v)?;
        value["comparison"] = serde_json::to_value(cmp).expect("comparison serialization");
    }
    let body = serde_json::to_string_pretty(&value).expect("report serialization");
    println!("{body}");
    if let Some(out) = &args.out {
        write_atomic(out, &body)?;
        write_manifest(
            out,
            "bounds",
            serde_json::json!({"S": args.s, "V": args.v, "a": args.a}),
            started,
            &[out],
            threads,
        )?;
    }
    Ok(if report.feasible { 0 } else { EXIT_INFEASIBLE })
}

fn cmd_flow(args: &FlowArgs, json: bool) -> CmdResult {
    let started = Instant::now();
    let threads = threads_cap()?;
    let sf = space_form(args.a)?;
    let surf = match args.shape.as_str() {
        "sphere" => flow::make_sphere(args.r0, sf, args.n),
        "perturbed" => flow::make_perturbed_sphere(args.r0, args.eps, args.mode, sf, args.n),
        other => return Err(CliFailure::usage(format!(
            "unknown shape {other:?}; expected \"sphere\" or \"perturbed\""
        ))),
    }
    .map_err(|e| CliFailure::usage(format!("surface construction failed: {e}")))?;
    let cfg = FlowConfig {
        dt: args.dt,
        t_max: args.t_max,
        stop_radius: args.stop_radius,
        record_every: args.record_every,
        n_grid: args.n,
    };
    cfg.validate().map_err(|e| CliFailure::usage(e.to_string()))?;

    let json_path = sibling_json(&args.out);
    let parameters = serde_json::json!({
        "shape": args.shape, "r0": args.r0, "eps": args.eps, "mode": args.mode,
        "a": args.a, "dt": args.dt, "t_max": args.t_max, "n": args.n,
        "record_every": args.record_every, "stop_radius": args.stop_radius
    });

    match flow::run_flow(&surf, &cfg) {
        Ok(trace) => {
            let audit = flow::monotone_audit(&trace)
                .map_err(|e| CliFailure::usage(e.to_string()))?;
            let audit_body =
                serde_json::to_string_pretty(&audit).expect("audit serialization");
            write_atomic(&args.out, &trace.to_csv())?;
            write_atomic(&json_path, &audit_body)?;
            write_manifest(&args.out, "flow", parameters, started, &[&args.out, &json_path], threads)?;
            if json {
                println!("{audit_body}");
            } else {
                println!(
                    "{} records to t = {:.4}; audit pass = {}",
                    trace.records.len(),
                    trace.records.last().map(|r| r.t).unwrap_or(0.0),
                    audit.pass
                );
            }
            Ok(if audit.pass { 0 } else { EXIT_FLOW_FAILURE })
        }
        Err(FlowError::Step { t, source, partial }) => {
            // flow failed mid-run: persist the partial trace, report, exit 4
            write_atomic(&args.out, &partial.to_csv())?;
            write_manifest(&args.out, "flow", parameters, started, &[&args.out], threads)?;
            eprintln!("flow failed at t = {t}: {source}; partial trace written to {}", args.out.display());
            Ok(EXIT_FLOW_FAILURE)
        }
        Err(e) => Err(CliFailure::usage(e.to_string())),
    }
}

fn cmd_disk(args: &DiskArgs, json: bool) -> CmdResult {
    let started = Instant::now();
    let threads = threads_cap()?;
    if !(args.rho_max > 0.0) {
        return Err(CliFailure::usage("rho_max must be positive"));
    }
    if args.n < 1 {
        return Err(CliFailure::usage("n must be at least 1"));
    }
    let mut csv = String::from("rho,S,M,santalo_bound,violated\n");
    for k in 1..=args.n {
        let rho = args.rho_max * k as f64 / args.n as f64;
        let d = bounds::double_disk(rho);
        let m = d.m.expect("double disk carries M");
        let bound = bounds::bound_santalo(d.s, d.sf);
        let violated = (m < bound) as u8;
        csv.push_str(&format!(
            "{rho:.16e},{:.16e},{m:.16e},{bound:.16e},{violated}\n",
            d.s
        ));
    }
    let rho_star = bounds::santalo_violation_threshold()?;
    let sidecar = serde_json::to_string_pretty(&serde_json::json!({
        "rho_star": rho_star,
        "edge_angle": bounds::DOUBLE_DISK_EDGE_ANGLE,
    }))
    .expect("sidecar serialization");
    let json_path = sibling_json(&args.out);
    write_atomic(&args.out, &csv)?;
    write_atomic(&json_path, &sidecar)?;
    write_manifest(
        &args.out,
        "disk",
        serde_json::json!({"rho_max": args.rho_max, "n": args.n}),
        started,
        &[&args.out, &json_path],
        threads,
    )?;
    if json {
        println!("{sidecar}");
    } else {
        println!("wrote {} ({} rows); rho_star = {rho_star:.6}", args.out.display(), args.n);
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are not errors
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Profiles(args) => cmd_profiles(args, cli.json),
        Command::Qiter(args) => cmd_qiter(args, cli.json),
        Command::Bounds(args) => cmd_bounds(args, cli.json),
        Command::Flow(args) => cmd_flow(args, cli.json),
        Command::Disk(args) => cmd_disk(args, cli.json),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.exit)
        }
    }
}
