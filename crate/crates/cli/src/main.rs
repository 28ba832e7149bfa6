//! `retarget`: run scenarios headless and re-check logs.
//!
//! Exit status: 0 ok, 2 invariant violation or halted session, 3 input error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use retarget_core::io::{self, IoError, RunSpec, VerifyReport};
use retarget_core::par::Execution;

const EXIT_VIOLATION: u8 = 2;
const EXIT_INPUT: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "retarget", version, about = "Headless retargeting runs and log verification")]
struct Args {
    /// Bundled model name or URDF path. Overrides the scenario header.
    #[arg(long)]
    model: Option<String>,
    /// Weight file (`key = value` lines).
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Bundled scenario name or JSONL path.
    #[arg(long, required_unless_present = "verify")]
    scenario: Option<String>,
    /// `perfect`, `spring-damper`, or a JSON tracking config.
    #[arg(long)]
    tracking: Option<String>,
    /// Tick rate, Hz.
    #[arg(long)]
    rate: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Re-check an existing log instead of running.
    #[arg(long, value_name = "LOG", conflicts_with_all = ["scenario", "weights", "tracking", "rate", "seed"])]
    verify: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(EXIT_INPUT);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let result = match &args.verify {
        Some(log) => verify(log, args.model.as_deref()),
        None => run(&args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn report(report: &VerifyReport) -> bool {
    for v in report.violations.iter().take(20) {
        eprintln!("violation tick {} {:?}: {} (excess {:.3e})", v.tick, v.check, v.detail, v.excess);
    }
    if report.violations.len() > 20 {
        eprintln!("... {} violations in total", report.violations.len());
    }
    println!("verify: {} records, {} violations", report.records, report.violations.len());
    report.passed()
}

fn verify(log: &std::path::Path, model: Option<&str>) -> Result<ExitCode, IoError> {
    let r = io::verify_log(log, model, Execution::Parallel)?;
    Ok(if report(&r) { ExitCode::SUCCESS } else { ExitCode::from(EXIT_VIOLATION) })
}

fn run(args: &Args) -> Result<ExitCode, IoError> {
    let spec = RunSpec {
        model: args.model.clone(),
        weights: args.weights.clone(),
        scenario: args.scenario.clone().unwrap_or_default(),
        tracking: args.tracking.clone(),
        rate: args.rate,
        out: args.out.clone(),
        seed: args.seed,
    };
    let outcome = io::run(&spec)?;
    let s = &outcome.summary;
    println!(
        "ticks {} | max residuals: equilibrium {:.2e} N, contact {:.2e}, tracking {:.2e} | step {:.3} ms mean, {:.3} ms max",
        s.ticks,
        s.max_equilibrium_residual,
        s.max_contact_residual,
        s.max_tracking_residual,
        s.step_time_ms.mean,
        s.step_time_ms.max
    );
    for w in &s.switches {
        println!("switch {} {:?} at tick {}: {} ticks ({:.3} s)", w.contact, w.event, w.tick, w.ticks, w.duration);
    }
    for (name, [x, y]) in &s.max_cop {
        println!("max |CoP| {name}: x {x:.4} m, y {y:.4} m");
    }
    for r in &s.rejected {
        eprintln!("rejected seq {} at tick {}: {} ({})", r.seq, r.tick, r.code, r.text);
    }
    println!("wrote {}", args.out.display());
    let verified = report(&io::verify_log(&outcome.log, args.model.as_deref(), Execution::Parallel)?);
    if let Some(reason) = &s.halted {
        eprintln!("halted: {reason}");
        return Ok(ExitCode::from(EXIT_VIOLATION));
    }
    Ok(if verified { ExitCode::SUCCESS } else { ExitCode::from(EXIT_VIOLATION) })
}
