use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use karcher_core::checks::{g2_cancelling, CheckSuite};
use karcher_core::experiment::{format_f64, run_experiment, write_report, ExperimentSpec};
use karcher_core::io::{read_ensemble, write_ensemble};
use karcher_core::{
    arithmetic_mean_init, g1_scalar, solve, Ensemble, SolverConfig, SolverKind, SolverResult,
};

const EXIT_INPUT: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Parser)]
#[command(name = "karcher", version, about = "Karcher mean of SPD matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the mean of the matrices in an ensemble file.
    Mean(MeanArgs),
    /// Run a benchmark spec and write `<stem>.csv` plus a `<stem>.json` sidecar.
    Bench {
        spec: PathBuf,
        /// Output stem; defaults to the spec file name in the working directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the seed stored in the spec.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the oracle and invariant checks.
    Check {
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<Fault>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Fault {
    G2Cancellation,
}

#[derive(clap::Args)]
struct MeanArgs {
    input: PathBuf,
    #[arg(long, default_value = "mm", value_parser = parse_kind)]
    solver: SolverKind,
    /// Initial step size of the gradient solvers.
    #[arg(long)]
    nu: Option<f64>,
    /// Backtracking factor.
    #[arg(long)]
    c: Option<f64>,
    /// Stopping threshold on the gradient norm (default 1e-10 times the ensemble size).
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Where to write the mean; the trace goes next to it as `<stem>.trace.csv`.
    #[arg(long, default_value = "mean.json")]
    out: PathBuf,
}

fn parse_kind(s: &str) -> Result<SolverKind, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Mean(args) => cmd_mean(&args),
        Command::Bench { spec, out, seed } => cmd_bench(&spec, out, seed),
        Command::Check { seed, inject_fault } => cmd_check(seed, inject_fault),
    }
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn trace_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map_or("mean".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.trace.csv"))
}

fn trace_csv(r: &SolverResult) -> String {
    let mut s = String::from("iter,objective,grad_norm,log_error,elapsed\n");
    for t in &r.trace {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            t.iter,
            format_f64(t.objective),
            format_f64(t.grad_norm),
            format_f64(t.log_error),
            format_f64(t.elapsed)
        );
    }
    s
}

fn cmd_mean(args: &MeanArgs) -> ExitCode {
    let mats = match read_ensemble(&args.input) {
        Ok(m) => m,
        Err(e) => return fail(EXIT_INPUT, format!("{}: {e}", args.input.display())),
    };
    let mut cfg = SolverConfig::default();
    if let Some(nu) = args.nu {
        cfg.nu = nu;
    }
    if let Some(c) = args.c {
        cfg.c = c;
    }
    if let Some(k) = args.max_iters {
        cfg.max_iters = k;
    }
    cfg.grad_tol = args.tol;
    if let Err(e) = cfg.validate() {
        return fail(EXIT_INPUT, e);
    }
    let result = Ensemble::new(mats).and_then(|e| {
        let x0 = arithmetic_mean_init(&e)?;
        solve(args.solver, &e, &cfg, &x0)
    });
    let r = match result {
        Ok(r) => r,
        Err(e) => return fail(EXIT_INPUT, e),
    };
    let trace = trace_path(&args.out);
    if let Err(e) = write_ensemble(&args.out, &[r.mean.as_array()])
        .and_then(|_| fs::write(&trace, trace_csv(&r)))
    {
        return fail(EXIT_INPUT, format!("writing output: {e}"));
    }
    println!(
        "{}: {:?} after {} iterations, gradient norm {:.3e}",
        args.solver,
        r.termination,
        r.iters_used,
        r.final_grad_norm()
    );
    println!("wrote {} and {}", args.out.display(), trace.display());
    if r.converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NOT_CONVERGED)
    }
}

fn cmd_bench(path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> ExitCode {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_INPUT, format!("{}: {e}", path.display())),
    };
    let mut spec = match ExperimentSpec::from_json(&text) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_INPUT, format!("{}: {e}", path.display())),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let stem = out.unwrap_or_else(|| PathBuf::from(path.file_stem().unwrap_or("bench".as_ref())));
    let report = match run_experiment(&spec) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_INPUT, e),
    };
    match write_report(&spec, &report, &stem) {
        Ok((csv, json)) => {
            for (s, id) in report.solver_ids.iter().enumerate() {
                let failed = report.traces(s).count() < spec.runs;
                let last = report
                    .column(id)
                    .and_then(|c| c.last())
                    .copied()
                    .unwrap_or(f64::NAN);
                println!(
                    "{id:>18}  final mean log-error {last:9.3}{}",
                    if failed { "  (some runs failed)" } else { "" }
                );
            }
            println!("wrote {} and {}", csv.display(), json.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(EXIT_INPUT, format!("writing report: {e}")),
    }
}

fn cmd_check(seed: u64, fault: Option<Fault>) -> ExitCode {
    let mut suite = CheckSuite::new(seed);
    if let Some(Fault::G2Cancellation) = fault {
        suite = suite.with_weights(g1_scalar, g2_cancelling);
    }
    let results = suite.run();
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    for r in &results {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        println!("{tag}  {:width$}  {}", r.name, r.detail);
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed == 0 {
        println!("all {} checks passed", results.len());
        ExitCode::SUCCESS
    } else {
        println!("{failed} of {} checks failed", results.len());
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}
