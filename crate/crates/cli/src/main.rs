//! `qc2qp`: optimality gap test for quadratic programs with two quadratic constraints.
//!
//! Exit codes: 0 no gap, 2 gap, 3 a Slater assumption fails, 1 any other error.
//! `QC2QP_LOG` (`error`, `warn`, `info`, `debug`) sets diagnostic verbosity.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use qc2qp::gaptest::{PropertyReport, DEFAULT_EPS2};
use qc2qp::model::Qc2qpInstance;
use qc2qp::recovery::{brute_force_oracle, run_gap_test, GapVerdict, VerdictKind};
use qc2qp::sdp::{SolverConfig, DEFAULT_EPS1};
use qc2qp::Error;
use qc2qp_cli::contour::{overlay_points, write_contour, ContourBox};
use qc2qp_cli::instance::parse_instance;
use qc2qp_cli::trials::{run_trials, TrialConfig, DEFAULT_MAX_ATTEMPTS};

const EXIT_NO_GAP: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_GAP: u8 = 2;
const EXIT_ASSUMPTION: u8 = 3;

#[derive(Parser)]
#[command(name = "qc2qp", version, about = "Optimality gap test for two-constraint quadratic programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct Tolerances {
    /// Interior-point precision.
    #[arg(long, default_value_t = DEFAULT_EPS1)]
    eps1: f64,
    /// Rank and sign threshold of the gap test.
    #[arg(long, default_value_t = DEFAULT_EPS2)]
    eps2: f64,
}

impl Tolerances {
    fn solver(&self) -> SolverConfig {
        SolverConfig {
            eps1: self.eps1,
            ..SolverConfig::default()
        }
    }
}

#[derive(Args, Clone)]
struct BoxArgs {
    /// Interval of the first coordinate.
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], allow_negative_numbers = true, default_values_t = [-10.0, 10.0])]
    xlim: Vec<f64>,
    /// Interval of the second coordinate.
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], allow_negative_numbers = true, default_values_t = [-10.0, 10.0])]
    ylim: Vec<f64>,
}

impl BoxArgs {
    fn to_box(&self) -> ContourBox {
        ContourBox {
            x: (self.xlim[0], self.xlim[1]),
            y: (self.ylim[0], self.ylim[1]),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether the relaxation of an instance has an optimality gap.
    GapTest {
        path: PathBuf,
        #[command(flatten)]
        tol: Tolerances,
        /// Print the full verdict as JSON.
        #[arg(long)]
        json: bool,
        /// Suppress the text report; the exit code carries the verdict.
        #[arg(long)]
        quiet: bool,
    },
    /// Run the gap test on random nonconvex instances.
    Trials {
        #[arg(long, default_value_t = 50)]
        count: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Entries are drawn uniformly from [-RANGE, RANGE].
        #[arg(long, default_value_t = 5.0)]
        range: f64,
        #[command(flatten)]
        tol: Tolerances,
        #[arg(long)]
        json: bool,
        /// Print only the summary line.
        #[arg(long)]
        quiet: bool,
    },
    /// Grid search for the global minimum of a two-dimensional instance.
    Oracle {
        path: PathBuf,
        #[command(flatten)]
        bounds: BoxArgs,
        #[arg(long, default_value_t = 2001)]
        grid: usize,
        #[arg(long, default_value_t = 60)]
        refine: usize,
        #[arg(long)]
        json: bool,
    },
    /// Write objective, feasibility and solution CSV files for plotting.
    Contour {
        path: PathBuf,
        #[command(flatten)]
        bounds: BoxArgs,
        #[arg(long, default_value_t = 201)]
        grid: usize,
        /// Grid of the oracle run whose optimum is added to the points file.
        #[arg(long, default_value_t = 1001)]
        oracle_grid: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        tol: Tolerances,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("QC2QP_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { EXIT_NO_GAP });
        }
    };
    let code = match cli.command {
        Command::GapTest {
            path,
            tol,
            json,
            quiet,
        } => cmd_gap_test(&path, tol, json, quiet),
        Command::Trials {
            count,
            dim,
            seed,
            range,
            tol,
            json,
            quiet,
        } => cmd_trials(count, dim, seed, range, tol, json, quiet),
        Command::Oracle {
            path,
            bounds,
            grid,
            refine,
            json,
        } => cmd_oracle(&path, &bounds, grid, refine, json),
        Command::Contour {
            path,
            bounds,
            grid,
            oracle_grid,
            out,
            tol,
        } => cmd_contour(&path, &bounds, grid, oracle_grid, &out, tol),
    };
    match code {
        Ok(c) => ExitCode::from(c),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn cmd_gap_test(path: &Path, tol: Tolerances, json: bool, quiet: bool) -> Result<u8> {
    let inst = parse_instance(path)?;
    match run_gap_test(&inst, &tol.solver(), tol.eps2) {
        Ok(v) => {
            if json {
                emit_stdout(&format!("{}\n", serde_json::to_string_pretty(&v)?))?;
            } else if !quiet {
                emit_stdout(&render_verdict(&v))?;
            }
            Ok(if v.is_gap() { EXIT_GAP } else { EXIT_NO_GAP })
        }
        Err(Error::AssumptionViolated { assumption, detail }) => {
            if json {
                let doc = serde_json::json!({
                    "verdict": "AssumptionViolated",
                    "assumption": assumption,
                    "detail": detail,
                });
                emit_stdout(&format!("{}\n", serde_json::to_string_pretty(&doc)?))?;
            } else if !quiet {
                emit_stdout(&format!("verdict: assumption violated ({assumption}): {detail}\n"))?;
            }
            Ok(EXIT_ASSUMPTION)
        }
        Err(e) => Err(e).context("gap test failed"),
    }
}

/// Writes to stdout; a closed pipe (e.g. `| head`) ends output quietly.
fn emit_stdout(text: &str) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    match stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.7}")).collect();
    format!("[{}]", parts.join(", "))
}

fn render_verdict(v: &GapVerdict) -> String {
    let mut s = String::new();
    let sol = &v.solution;
    match &v.kind {
        VerdictKind::NoGap(rec) => {
            s += "verdict: no gap\n";
            s += &format!("relaxation value: {:.7}\n", v.relaxation_value);
            s += &format!("recovered via: {:?}\n", rec.case_label);
            s += &format!("z: {}\n", fmt_vec(&rec.z));
            s += &format!("objective: {:.7}\n", rec.objective);
            s += &format!("q1(z): {:.3e}\nq2(z): {:.3e}\n", rec.q1_value, rec.q2_value);
        }
        VerdictKind::Gap(report) => {
            s += "verdict: gap\n";
            s += &format!("relaxation value: {:.7}\n", v.relaxation_value);
            s += &render_report(report);
            if let Some(c) = &v.certificate {
                s += &format!(
                    "uniqueness certificate: det Gamma = {:.6e} (closed form {:.6e})\n",
                    c.determinant, c.closed_form_determinant
                );
            }
        }
    }
    s += &format!(
        "multipliers: y0 = {:.7}, y1 = {:.7}, y2 = {:.7}\n",
        sol.y0, sol.y1, sol.y2
    );
    s += &format!(
        "solver: {} iterations, residuals p {:.1e} d {:.1e} gap {:.1e}\n",
        sol.iterations, sol.residuals.primal_infeas, sol.residuals.dual_infeas, sol.residuals.relative_gap
    );
    s
}

fn render_report(r: &PropertyReport) -> String {
    let m = &r.measured;
    let mut s = format!(
        "rank X* = {}, rank Z* = {} (n = {}), eps2 = {:e}\n",
        m.rank_x, m.rank_z, m.n, r.eps2
    );
    if let Some([a, b]) = m.m1_values {
        s += &format!("|M1 . x1x1'| = {:.3e}, |M1 . x2x2'| = {:.3e}\n", a.abs(), b.abs());
    }
    if let Some([a, b]) = m.m2_values {
        s += &format!("M2 . x1x1' = {a:.7}, M2 . x2x2' = {b:.7}\n");
    }
    if let Some(c) = m.m1_cross {
        s += &format!("|M1 . x1x2'| = {:.7}\n", c.abs());
    }
    if let Some(d) = &r.decomposition {
        for (k, x) in d.vectors.iter().enumerate() {
            s += &format!("x{} = {}\n", k + 1, fmt_vec(x));
        }
    }
    s
}

fn cmd_trials(
    count: usize,
    dim: usize,
    seed: u64,
    range: f64,
    tol: Tolerances,
    json: bool,
    quiet: bool,
) -> Result<u8> {
    let cfg = TrialConfig {
        range,
        eps2: tol.eps2,
        solver: tol.solver(),
        max_attempts: DEFAULT_MAX_ATTEMPTS,
        ..TrialConfig::new(count, dim, seed)
    };
    let report = run_trials(&cfg)?;
    if json {
        emit_stdout(&format!("{}\n", serde_json::to_string_pretty(&report)?))?;
    } else if quiet {
        emit_stdout(&format!("{}\n", report.render().lines().next().unwrap_or_default()))?;
    } else {
        emit_stdout(&report.render())?;
    }
    Ok(EXIT_NO_GAP)
}

fn load_planar(path: &Path) -> Result<Qc2qpInstance> {
    let inst = parse_instance(path)?;
    anyhow::ensure!(inst.n == 2, "this command needs n = 2, got n = {}", inst.n);
    Ok(inst)
}

fn cmd_oracle(path: &Path, bounds: &BoxArgs, grid: usize, refine: usize, json: bool) -> Result<u8> {
    let inst = load_planar(path)?;
    let bx = bounds.to_box();
    bx.validate()?;
    let r = brute_force_oracle(&inst, &bx.intervals(), grid, refine)?;
    if json {
        emit_stdout(&format!("{}\n", serde_json::to_string_pretty(&r)?))?;
    } else {
        emit_stdout(&format!("z: {}\nvalue: {:.7}\n", fmt_vec(&r.z), r.value))?;
    }
    Ok(EXIT_NO_GAP)
}

fn cmd_contour(
    path: &Path,
    bounds: &BoxArgs,
    grid: usize,
    oracle_grid: usize,
    out: &Path,
    tol: Tolerances,
) -> Result<u8> {
    let inst = load_planar(path)?;
    let bx = bounds.to_box();
    bx.validate()?;
    let verdict = match run_gap_test(&inst, &tol.solver(), tol.eps2) {
        Ok(v) => Some(v),
        Err(e) => {
            log::warn!("gap test failed, no solution overlay: {e}");
            None
        }
    };
    let oracle = match brute_force_oracle(&inst, &bx.intervals(), oracle_grid, 60) {
        Ok(r) => Some(r),
        Err(e) => {
            log::warn!("oracle found nothing in the box: {e}");
            None
        }
    };
    let points = overlay_points(verdict.as_ref(), oracle.as_ref());
    let files = write_contour(&inst, &bx, grid, out, &points)?;
    emit_stdout(&format!(
        "wrote {}, {}, {}\n",
        files.objective.display(),
        files.feasible.display(),
        files.points.display()
    ))?;
    Ok(EXIT_NO_GAP)
}
