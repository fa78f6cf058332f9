//! Command-line front end: solve k-Hessian problems from field files,
//! generate manufactured test problems, run the property fuzz suites, and
//! check the uniqueness energy identity.  Every run writes a JSON manifest;
//! exit codes are 0 success, 1 usage/i-o, 2 mathematical failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use chess_core::error::{Error, Result};
use chess_core::grid::TorusGrid;
use chess_core::io::{payload_path, read_field, write_field};
use chess_core::mms;
use chess_core::operator::energy_identity;
use chess_core::props::run_suites;
use chess_core::solver::{continuity_solve, SolveConfig};

#[derive(Parser)]
#[command(name = "chess", version, about = "Complex k-Hessian equation toolkit")]
struct Cli {
    /// Thread cap; overrides CHESS_THREADS.  1 guarantees bit-identical
    /// reruns (the current kernels are sequential regardless).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve S_k(I + Hessian(phi)) = f for a right-hand-side field file.
    Solve(SolveArgs),
    /// Generate a manufactured solution pair (phi*, f = forward(phi*)).
    Mms(MmsArgs),
    /// Run the randomized inequality/positivity suites and report slacks.
    Props(PropsArgs),
    /// Evaluate the uniqueness energy identity for a pair of potentials.
    Identity(IdentityArgs),
}

#[derive(Args, Serialize)]
struct SolveArgs {
    /// Complex dimension.
    #[arg(long)]
    n: usize,
    /// Hessian order, 1..=n.
    #[arg(long)]
    k: usize,
    /// Samples per real axis (power of two).
    #[arg(long = "N")]
    samples: usize,
    /// Right-hand-side field file (JSON sidecar).
    #[arg(long)]
    rhs: PathBuf,
    /// Output field file for the solution.
    #[arg(long)]
    out: PathBuf,
    /// Newton stopping tolerance on the sup log-residual.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_newton: Option<usize>,
}

#[derive(Args, Serialize)]
struct MmsArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long = "N")]
    samples: usize,
    /// Amplitude: the sup of the Hessian spectral radius is amp * pi^2, so
    /// the cone margin is roughly (1 - amp * pi^2)^k.
    #[arg(long)]
    amp: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output field file for the manufactured potential phi*.
    #[arg(long)]
    phi_out: PathBuf,
    /// Output field file for f = forward(phi*).
    #[arg(long)]
    rhs_out: PathBuf,
}

#[derive(Args, Serialize)]
struct PropsArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output JSON report path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct IdentityArgs {
    /// Field file for phi.
    #[arg(long)]
    phi: PathBuf,
    /// Field file for psi.
    #[arg(long)]
    psi: PathBuf,
    #[arg(long)]
    k: usize,
    /// Output JSON report path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    config: Value,
    input_hashes: BTreeMap<String, String>,
    versions: BTreeMap<String, String>,
    threads: usize,
    exit_status: i32,
    error: Option<Value>,
    outputs: Vec<String>,
    result: Value,
    wall_time_ms: f64,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut h = Sha256::new();
    h.update(&bytes);
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

fn hash_field_files(path: &Path, into: &mut BTreeMap<String, String>) -> Result<()> {
    into.insert(path.display().to_string(), sha256_file(path)?);
    let payload = payload_path(path);
    into.insert(payload.display().to_string(), sha256_file(&payload)?);
    Ok(())
}

fn resolve_threads(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var("CHESS_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(1)
    .max(1)
}

/// Per-command outcome fed into the shared manifest writer.
struct Outcome {
    exit: i32,
    error: Option<Value>,
    outputs: Vec<PathBuf>,
    result: Value,
}

impl Outcome {
    fn from_error(e: &Error, outputs: Vec<PathBuf>) -> Outcome {
        Outcome {
            exit: e.exit_code(),
            error: Some(json!({ "kind": e.kind(), "message": e.to_string() })),
            outputs,
            result: Value::Null,
        }
    }
}

fn check_grid_flags(grid: TorusGrid, n: usize, samples: usize) -> Result<()> {
    if grid.n != n || grid.size != samples {
        return Err(Error::Validation(format!(
            "field file is n={} N={} but flags say n={n} N={samples}",
            grid.n, grid.size
        )));
    }
    Ok(())
}

fn run_solve(a: &SolveArgs, hashes: &mut BTreeMap<String, String>) -> Outcome {
    let mut cfg = SolveConfig::default();
    if let Some(tol) = a.tol {
        cfg.newton_tol = tol;
    }
    if let Some(m) = a.max_newton {
        cfg.max_newton = m;
    }
    cfg.seed = a.seed;

    let mut body = || -> std::result::Result<Outcome, (Error, Vec<PathBuf>)> {
        hash_field_files(&a.rhs, hashes).map_err(|e| (e, vec![]))?;
        let f = read_field(&a.rhs).map_err(|e| (e, vec![]))?;
        check_grid_flags(f.grid, a.n, a.samples).map_err(|e| (e, vec![]))?;
        if a.k < 1 || a.k > a.n {
            return Err((
                Error::Parameter(format!("k = {} out of range 1..={}", a.k, a.n)),
                vec![],
            ));
        }
        let trace_path = a.out.with_extension("trace.jsonl");
        let (phi, trace) = continuity_solve(&f, a.k, &cfg).map_err(|e| (e, vec![]))?;
        let mut outputs = vec![a.out.clone(), payload_path(&a.out), trace_path.clone()];
        let io_wrap = |e: Error| (e, outputs.clone());
        write_field(&phi, &a.out).map_err(io_wrap)?;
        let mut lines = String::new();
        for rec in &trace.records {
            lines.push_str(&serde_json::to_string(rec).map_err(|e| (e.into(), outputs.clone()))?);
            lines.push('\n');
        }
        std::fs::write(&trace_path, lines).map_err(|e| (e.into(), outputs.clone()))?;
        outputs.sort();
        let last = trace.records.last();
        Ok(Outcome {
            exit: 0,
            error: None,
            outputs,
            result: json!({
                "newton_iterations": trace.records.len(),
                "final_residual_sup": last.map(|r| r.residual_sup).unwrap_or(0.0),
                "final_cone_margin": last.map(|r| r.cone_margin).unwrap_or(1.0),
                "solution_sup": phi.sup_norm(),
            }),
        })
    };
    body().unwrap_or_else(|(e, outputs)| Outcome::from_error(&e, outputs))
}

fn run_mms(a: &MmsArgs, _hashes: &mut BTreeMap<String, String>) -> Outcome {
    let body = || -> Result<Outcome> {
        let grid = TorusGrid::new(a.n, a.samples)?;
        let (phi, f, margin) = mms::generate(grid, a.k, a.amp, a.seed)?;
        if a.amp > 0.0 && margin < 0.5 {
            return Err(Error::Validation(format!(
                "amplitude {} too large: cone margin {margin:.6} < 0.5",
                a.amp
            )));
        }
        write_field(&phi, &a.phi_out)?;
        write_field(&f, &a.rhs_out)?;
        Ok(Outcome {
            exit: 0,
            error: None,
            outputs: vec![
                a.phi_out.clone(),
                payload_path(&a.phi_out),
                a.rhs_out.clone(),
                payload_path(&a.rhs_out),
            ],
            result: json!({ "cone_margin": margin }),
        })
    };
    body().unwrap_or_else(|e| Outcome::from_error(&e, vec![]))
}

fn run_props(a: &PropsArgs, _hashes: &mut BTreeMap<String, String>) -> Outcome {
    let body = || -> Result<Outcome> {
        if a.k < 1 || a.k > a.n {
            return Err(Error::Parameter(format!(
                "k = {} out of range 1..={}",
                a.k, a.n
            )));
        }
        let report = run_suites(a.n, a.k, a.samples, a.seed)?;
        let all_pass = report.values().all(|s| s.pass);
        let mut doc = json!({ "suites": report, "all_pass": all_pass });
        if a.samples == 0 {
            doc["note"] = json!("zero samples requested: all suites pass vacuously");
        }
        std::fs::write(&a.out, serde_json::to_string_pretty(&doc)? + "\n")?;
        Ok(Outcome {
            exit: if all_pass { 0 } else { 2 },
            error: None,
            outputs: vec![a.out.clone()],
            result: doc,
        })
    };
    body().unwrap_or_else(|e| Outcome::from_error(&e, vec![]))
}

fn run_identity(a: &IdentityArgs, hashes: &mut BTreeMap<String, String>) -> Outcome {
    let mut body = || -> Result<Outcome> {
        hash_field_files(&a.phi, hashes)?;
        hash_field_files(&a.psi, hashes)?;
        let phi = read_field(&a.phi)?;
        let psi = read_field(&a.psi)?;
        let id = energy_identity(&phi, &psi, a.k)?;
        let terms_ok = id.terms.iter().all(|&t| t >= -1e-10);
        let defect_ok = id.relative_defect() <= 1e-6;
        let doc = json!({
            "lhs": id.lhs,
            "terms": id.terms,
            "pointwise_min": id.pointwise_min,
            "defect": id.defect,
            "relative_defect": id.relative_defect(),
            "terms_nonnegative": terms_ok,
            "defect_within_tolerance": defect_ok,
        });
        std::fs::write(&a.out, serde_json::to_string_pretty(&doc)? + "\n")?;
        Ok(Outcome {
            exit: if terms_ok && defect_ok { 0 } else { 2 },
            error: None,
            outputs: vec![a.out.clone()],
            result: doc,
        })
    };
    body().unwrap_or_else(|e| Outcome::from_error(&e, vec![]))
}

fn manifest_path(cmd: &Cmd) -> PathBuf {
    let primary = match cmd {
        Cmd::Solve(a) => &a.out,
        Cmd::Mms(a) => &a.phi_out,
        Cmd::Props(a) => &a.out,
        Cmd::Identity(a) => &a.out,
    };
    primary.with_extension("manifest.json")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };

    let threads = resolve_threads(cli.threads);
    let started = Instant::now();
    let mut hashes = BTreeMap::new();
    let (name, config, outcome) = match &cli.cmd {
        Cmd::Solve(a) => ("solve", json!(a), run_solve(a, &mut hashes)),
        Cmd::Mms(a) => ("mms", json!(a), run_mms(a, &mut hashes)),
        Cmd::Props(a) => ("props", json!(a), run_props(a, &mut hashes)),
        Cmd::Identity(a) => ("identity", json!(a), run_identity(a, &mut hashes)),
    };

    let mut versions = BTreeMap::new();
    versions.insert(
        env!("CARGO_PKG_NAME").to_string(),
        env!("CARGO_PKG_VERSION").to_string(),
    );
    versions.insert("field-format".into(), chess_core::io::FIELD_VERSION.to_string());

    let manifest = RunManifest {
        command: name.to_string(),
        config,
        input_hashes: hashes,
        versions,
        threads,
        exit_status: outcome.exit,
        error: outcome.error,
        outputs: outcome
            .outputs
            .iter()
            .map(|p| p.display().to_string())
            .collect(),
        result: outcome.result,
        wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    let mpath = manifest_path(&cli.cmd);
    match serde_json::to_string_pretty(&manifest) {
        Ok(text) => {
            if let Err(e) = std::fs::write(&mpath, text + "\n") {
                eprintln!("failed to write manifest {}: {e}", mpath.display());
                return ExitCode::from(1);
            }
        }
        Err(e) => {
            eprintln!("failed to serialize manifest: {e}");
            return ExitCode::from(1);
        }
    }
    if let Some(err) = &manifest.error {
        eprintln!("error: {}", err["message"].as_str().unwrap_or("unknown"));
    }
    ExitCode::from(outcome.exit as u8)
}
