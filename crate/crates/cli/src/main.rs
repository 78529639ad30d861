//! `uhrfrac`: solve, certify and verify impulsive ψ-Hilfer problems.

mod report;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use uhrfrac_core::solver::{picard_solve_with, Discretization};
use uhrfrac_core::stability::residual_check_with;
use uhrfrac_core::{
    builtin_scenario, load_scenario, mittag_leffler, perturb, verify_envelope, verify_h6, GridFunction,
    MemoryAnchor, Mesh, Scenario, SolveOptions, SolveResult, StabilityCertificate,
};

use report::{csv_real, sig12, CertificateSummary, EnvelopeSummary, RunReport, SolveSummary};

/// Exit codes.
const EXIT_OK: u8 = 0;
const EXIT_INPUT: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_CONTRACTION: u8 = 3;
const EXIT_RESIDUAL: u8 = 4;
const EXIT_ENVELOPE: u8 = 5;

#[derive(Parser, Debug)]
#[command(name = "uhrfrac", version, about = "Mild solutions and Ulam-Hyers-Rassias certificates for impulsive psi-Hilfer equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the mild-solution fixed point and write solution.csv.
    Solve {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Print the contraction constant and stability envelope.
    Certify {
        #[command(flatten)]
        source: Source,
        /// Nodes per interval for the H6 check.
        #[arg(long, default_value_t = 128)]
        n: usize,
        /// Directory for report.txt (not written when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Perturb the solution by ε(φ + δ), check the integral inequalities and
    /// the envelope, and write verify.csv.
    Verify {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        solver: SolverArgs,
        /// Perturbation size ε in y = y0 + ε(φ(t) + δ).
        #[arg(long, default_value_t = 1e-3, allow_negative_numbers = true)]
        epsilon: f64,
    },
    /// Evaluate the Mittag-Leffler function E_alpha(t).
    Ml {
        #[arg(allow_negative_numbers = true)]
        alpha: f64,
        #[arg(allow_negative_numbers = true)]
        t: f64,
        /// Tail tolerance of the series.
        #[arg(long, default_value_t = 1e-15)]
        tol: f64,
    },
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct Source {
    /// Built-in scenario: example-rl or example-integer.
    #[arg(long)]
    scenario: Option<String>,
    /// Path to a TOML problem file.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AnchorArg {
    #[value(name = "t")]
    T,
    #[value(name = "s_i")]
    SI,
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Nodes per interval.
    #[arg(long, default_value_t = 64)]
    n: usize,
    /// Grading exponent r ≥ 1 toward 0 and each sᵢ.
    #[arg(long, default_value_t = 2.0)]
    grading: f64,
    /// Picard stopping tolerance on the weighted sup distance.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Kernel anchor of the gᵢ memory term on continuation intervals.
    #[arg(long, value_enum)]
    memory_anchor: Option<AnchorArg>,
    /// Override the weighted initial datum x0.
    #[arg(long, allow_negative_numbers = true)]
    x0: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

struct Failure {
    code: u8,
    message: String,
}

fn input_error(message: impl ToString) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message: message.to_string(),
    }
}

fn load(source: &Source) -> Result<Scenario, Failure> {
    match (&source.scenario, &source.config) {
        (Some(name), _) => builtin_scenario(name).map_err(input_error),
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
            load_scenario(&text, &path.display().to_string()).map_err(|e| input_error(format!("{}: {e}", path.display())))
        }
        (None, None) => Err(input_error("one of --scenario or --config is required")),
    }
}

fn apply_overrides(s: &mut Scenario, args: &SolverArgs) -> Result<(), Failure> {
    if let Some(x0) = args.x0 {
        if !x0.is_finite() {
            return Err(input_error("--x0 must be finite"));
        }
        s.problem.x0 = x0;
    }
    if let Some(a) = args.memory_anchor {
        s.problem.memory_anchor = match a {
            AnchorArg::T => MemoryAnchor::Evaluation,
            AnchorArg::SI => MemoryAnchor::ImpulseEnd,
        };
    }
    Ok(())
}

struct Solved {
    mesh: Arc<Mesh>,
    disc: Discretization,
    result: SolveResult,
}

fn run_solve(s: &Scenario, args: &SolverArgs) -> Result<Solved, Failure> {
    if !(args.tol > 0.0) {
        return Err(input_error("--tol must be positive"));
    }
    if args.max_iter == 0 {
        return Err(input_error("--max-iter must be at least 1"));
    }
    let mesh = s.problem.mesh(args.n, args.grading).map_err(input_error)?;
    let disc = Discretization::new(&s.problem, mesh.clone()).map_err(input_error)?;
    let opts = SolveOptions {
        tol: args.tol,
        max_iter: args.max_iter,
        ..Default::default()
    };
    let result = picard_solve_with(&s.problem, &disc, &opts).map_err(input_error)?;
    Ok(Solved { mesh, disc, result })
}

/// Raw values at every node, then the right limit at nodes that carry one.
fn rows(y: &GridFunction) -> Vec<(usize, f64)> {
    let mut out = Vec::with_capacity(y.mesh().len() + 4);
    for k in 0..y.mesh().len() {
        out.push((k, y.raw_at(k)));
        if let Some(r) = y.right_limits()[k] {
            out.push((k, r));
        }
    }
    out
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir).map_err(|e| input_error(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn solution_csv(y0: &GridFunction) -> String {
    let nodes = y0.mesh().nodes();
    let mut s = String::from("t,y0\n");
    for (k, v) in rows(y0) {
        let _ = writeln!(s, "{},{}", csv_real(nodes[k]), csv_real(v));
    }
    s
}

/// Writes report.txt and report.csv, prints the text form.
fn finish(report: &mut RunReport, dir: &Path, code: u8) -> Result<u8, Failure> {
    report.outputs.push(dir.join("report.txt"));
    report.outputs.push(dir.join("report.csv"));
    let text = report.to_text();
    write_file(dir, "report.txt", &text)?;
    write_file(dir, "report.csv", &report.to_csv())?;
    print!("{text}");
    Ok(code)
}

fn cmd_solve(source: &Source, args: &SolverArgs) -> Result<u8, Failure> {
    let mut s = load(source)?;
    apply_overrides(&mut s, args)?;
    let solved = run_solve(&s, args)?;
    let r = &solved.result;
    let mut report = RunReport::new("solve", &s.name);
    report.solve = Some(SolveSummary::new(r, args.tol));
    report.outputs.push(write_file(&args.out, "solution.csv", &solution_csv(&r.y0))?);
    let code = if r.converged {
        report.verdict = "converged".into();
        EXIT_OK
    } else {
        report.verdict = format!("did not converge within {} iterations", args.max_iter);
        EXIT_NOT_CONVERGED
    };
    finish(&mut report, &args.out, code)
}

fn certificate(s: &Scenario, n: usize, grading: f64) -> Result<CertificateSummary, Failure> {
    let cert = StabilityCertificate::new(&s.problem, &s.hypotheses).map_err(input_error)?;
    let mesh = s.problem.mesh(n, grading).map_err(input_error)?;
    let h6 = verify_h6(&s.problem.psi, s.problem.order.alpha(), &s.hypotheses.phi, &mesh).map_err(input_error)?;
    Ok(CertificateSummary {
        certificate: cert,
        reference: s.reference.clone(),
        h6_sup: Some(h6),
    })
}

fn cmd_certify(source: &Source, n: usize, out: Option<&Path>) -> Result<u8, Failure> {
    let s = load(source)?;
    let summary = certificate(&s, n, 2.0)?;
    let ok = summary.certificate.contraction_ok;
    let mut report = RunReport::new("certify", &s.name);
    report.certificate = Some(summary);
    let code = if ok {
        report.verdict = "contraction certified".into();
        EXIT_OK
    } else {
        report.verdict = "contraction constant Phi >= 1".into();
        EXIT_CONTRACTION
    };
    match out {
        Some(dir) => finish(&mut report, dir, code),
        None => {
            print!("{}", report.to_text());
            Ok(code)
        }
    }
}

fn cmd_verify(source: &Source, args: &SolverArgs, epsilon: f64) -> Result<u8, Failure> {
    if !epsilon.is_finite() {
        return Err(input_error("--epsilon must be finite"));
    }
    let mut s = load(source)?;
    apply_overrides(&mut s, args)?;
    let mut report = RunReport::new("verify", &s.name);
    let summary = certificate(&s, args.n, args.grading)?;
    let cert = summary.certificate.clone();
    report.certificate = Some(summary);
    if !cert.contraction_ok {
        report.verdict = "contraction constant Phi >= 1, no envelope to verify".into();
        return finish(&mut report, &args.out, EXIT_CONTRACTION);
    }
    let solved = run_solve(&s, args)?;
    report.solve = Some(SolveSummary::new(&solved.result, args.tol));
    if !solved.result.converged {
        report.verdict = format!("did not converge within {} iterations", args.max_iter);
        return finish(&mut report, &args.out, EXIT_NOT_CONVERGED);
    }
    let y0 = &solved.result.y0;
    let y = perturb(&s.problem, &s.hypotheses, y0, epsilon).map_err(input_error)?;
    let residuals = residual_check_with(&s.problem, &s.hypotheses, &solved.disc, &y).map_err(input_error)?;
    let envelope = verify_envelope(&y, y0, &cert, &s.hypotheses.phi, &solved.mesh).map_err(input_error)?;

    let nodes = solved.mesh.nodes();
    let mut csv = String::from("t,y,y0,envelope\n");
    let y_rows = rows(&y);
    for ((k, yv), (_, y0v)) in y_rows.iter().zip(rows(y0)) {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            csv_real(nodes[*k]),
            csv_real(*yv),
            csv_real(y0v),
            csv_real(envelope.envelope[*k])
        );
    }
    report.outputs.push(write_file(&args.out, "verify.csv", &csv)?);
    let residual_ok = residuals.satisfied;
    report.residuals = Some(residuals);
    report.envelope = Some(EnvelopeSummary::new(epsilon, &envelope));
    let code = if !residual_ok {
        report.verdict = "integral inequalities (4)-(6) not satisfied: the envelope bound is not applicable (not violated)".into();
        EXIT_RESIDUAL
    } else if !envelope.satisfied {
        report.verdict = "inequalities hold but y leaves the envelope".into();
        EXIT_ENVELOPE
    } else {
        report.verdict = "inequalities hold and y stays within the envelope".into();
        EXIT_OK
    };
    finish(&mut report, &args.out, code)
}

fn cmd_ml(alpha: f64, t: f64, tol: f64) -> Result<u8, Failure> {
    let v = mittag_leffler(alpha, t, tol).map_err(input_error)?;
    println!("{}", sig12(v));
    Ok(EXIT_OK)
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("UHRFRAC_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| input_error(format!("UHRFRAC_THREADS = {value:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(input_error)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = configure_threads().and_then(|()| match &cli.command {
        Command::Solve { source, solver } => cmd_solve(source, solver),
        Command::Certify { source, n, out } => cmd_certify(source, *n, out.as_deref()),
        Command::Verify { source, solver, epsilon } => cmd_verify(source, solver, *epsilon),
        Command::Ml { alpha, t, tol } => cmd_ml(*alpha, *t, *tol),
    });
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("uhrfrac: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
