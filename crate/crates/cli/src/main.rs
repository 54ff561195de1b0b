// `!(x > 0)` guards are deliberate: they also reject NaN inputs.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod expr;
mod output;
mod scenario;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use quadgrad::calculus::GridFunction;
use quadgrad::fixedpoint::solve_full;
use quadgrad::mesh::build_interval_grid;
use quadgrad::oracle::{semilinear_fold, semilinear_solve};
use quadgrad::transforms::semilinear_reduction;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

/// Branch continuation and verification for Dirichlet problems with
/// quadratic gradient growth.
#[derive(Parser)]
#[command(name = "quadgrad", version, about)]
struct Cli {
    /// scenario configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// output directory for run artifacts
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// random seed for the verification corpora
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// worker threads for independent verification suites
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// tolerance override
    #[arg(long, global = true)]
    tol: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// solve the configured problem at its fixed lambda
    Solve,
    /// trace the solution branch over the configured parameter range
    Branch,
    /// trace the auxiliary homotopy in the weight k
    #[command(name = "homotopy-k")]
    HomotopyK,
    /// principal weighted eigenpair of the minimal extremal operator
    Eigen,
    /// run a property suite (operators | transforms | barriers | bounds |
    /// eigen | oracle | all)
    Verify {
        #[arg(default_value = "all")]
        suite: String,
    },
    /// compare the primary solver against the semilinear oracle
    #[command(name = "oracle-compare")]
    OracleCompare,
}

fn tol_override(cli: &Cli) -> Option<f64> {
    cli.tol
        .or_else(|| std::env::var("QUADGRAD_TOL").ok()?.parse().ok())
}

fn threads(cli: &Cli) -> usize {
    cli.threads
        .or_else(|| std::env::var("QUADGRAD_THREADS").ok()?.parse().ok())
        .unwrap_or(1)
        .max(1)
}

fn load_config(cli: &Cli) -> Result<config::Config> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| anyhow!("--config <path> is required for this subcommand"))?;
    config::load(path)
}

fn cmd_solve(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let built = cfg.build_problem(tol_override(cli))?;
    let rep = solve_full(
        &built.problem,
        &GridFunction::zeros(built.grid.clone()),
        built.tol,
    );
    if !rep.converged {
        bail!(
            "solve did not converge: residual {:.3e} after {} iterations",
            rep.residual_norm,
            rep.outer_iterations
        );
    }
    let mut csv = String::from("index,x,y,u\n");
    for i in 0..built.grid.node_count() {
        let [x, y] = built.grid.coords(i);
        csv.push_str(&format!("{i},{x},{y},{}\n", rep.solution.get(i)));
    }
    output::write_file(&cli.out, "solution.csv", &csv)?;
    println!(
        "solve: lambda = {}, residual {:.3e}, {} outer iterations, max u = {:.6}, min u = {:.6}",
        built.problem.lambda,
        rep.residual_norm,
        rep.outer_iterations,
        rep.solution.max_value(),
        rep.solution.min_value()
    );
    Ok(())
}

fn cmd_eigen(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let built = cfg.build_problem(tol_override(cli))?;
    let op = match built.problem.op.kind() {
        quadgrad::operators::OperatorKind::PucciMinus
        | quadgrad::operators::OperatorKind::Linear => built.problem.op.clone(),
        _ => bail!("eigen expects operator.kind = pucci_minus (or linear)"),
    };
    let pair = quadgrad::eigen::principal_eigenpair(
        &op,
        &built.problem.c,
        &built.grid,
        built.tol.max(1e-11),
    )?;
    let mut csv = String::from("index,x,y,phi1\n");
    for i in 0..built.grid.node_count() {
        let [x, y] = built.grid.coords(i);
        csv.push_str(&format!("{i},{x},{y},{}\n", pair.phi1.get(i)));
    }
    output::write_file(&cli.out, "eigenfunction.csv", &csv)?;
    println!(
        "eigen: lambda1 = {:.12}, residual {:.3e}",
        pair.lambda1, pair.residual
    );
    Ok(())
}

fn cmd_verify(cli: &Cli, suite: &str) -> Result<bool> {
    let seed = cli.seed.unwrap_or(7);
    let names: Vec<&str> = if suite == "all" {
        quadgrad::verify::SUITES.to_vec()
    } else {
        vec![suite]
    };
    let nthreads = threads(cli).min(names.len().max(1));
    let reports: Vec<quadgrad::verify::SuiteReport> = if nthreads > 1 {
        // fan out suites across worker threads, merge in declaration order
        let mut out: Vec<Option<quadgrad::verify::SuiteReport>> =
            names.iter().map(|_| None).collect();
        std::thread::scope(|scope| {
            let handles: Vec<_> = names
                .iter()
                .map(|name| scope.spawn(move || quadgrad::verify::run_suites(name, seed)))
                .collect();
            for (slot, h) in out.iter_mut().zip(handles) {
                *slot = Some(h.join().expect("suite thread")?.remove(0));
            }
            Ok::<(), quadgrad::error::Error>(())
        })?;
        out.into_iter().flatten().collect()
    } else {
        names
            .iter()
            .map(|n| Ok(quadgrad::verify::run_suites(n, seed)?.remove(0)))
            .collect::<Result<Vec<_>>>()?
    };
    let mut all_ok = true;
    for rep in &reports {
        for c in &rep.checks {
            println!(
                "suite={} check=\"{}\" pass={} seed={} detail=\"{}\"",
                rep.suite, c.name, c.passed, rep.seed, c.detail
            );
            all_ok &= c.passed;
        }
    }
    println!(
        "verify: {} suites, {} checks, {}",
        reports.len(),
        reports.iter().map(|r| r.checks.len()).sum::<usize>(),
        if all_ok { "all passed" } else { "FAILURES" }
    );
    Ok(all_ok)
}

fn cmd_oracle_compare(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let built = cfg.build_problem(tol_override(cli))?;
    if built.grid.dim() != 1 {
        bail!("oracle-compare runs on interval grids");
    }
    let red = semilinear_reduction(&built.problem)?;
    let (a, b) = match built.grid.shape() {
        quadgrad::mesh::GridShape::Interval { a, b } => (a, b),
        _ => unreachable!(),
    };
    let n = built.grid.subdivisions();
    let fine = Arc::new(build_interval_grid(a, b, 4 * n)?);
    let primary = solve_full(
        &built.problem,
        &GridFunction::zeros(built.grid.clone()),
        built.tol,
    );
    if !primary.converged {
        bail!("primary solve did not converge");
    }
    let v = semilinear_solve(&red, &fine, built.tol.max(1e-10))
        .context("semilinear oracle solve")?;
    let u_ref = red.invert(&v)?;
    let mut gap: f64 = 0.0;
    for &i in built.grid.interior() {
        gap = gap.max((primary.solution.get(i) - u_ref.get(4 * i)).abs());
    }
    println!(
        "oracle-compare: max nodal gap {gap:.6e} at n = {n} vs oracle at {}",
        4 * n
    );
    match semilinear_fold(&red, &fine, built.tol.max(1e-9))? {
        Some(f) => println!(
            "oracle-compare: fold parameter {:.8} bracket [{:.8}, {:.8}]",
            f.parameter, f.bracket.0, f.bracket.1
        ),
        None => println!("oracle-compare: no fold in the amplitude sweep"),
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Solve => cmd_solve(cli).map(|_| ExitCode::SUCCESS),
        Command::Branch => {
            let cfg = load_config(cli)?;
            scenario::run_branch(&cfg, &cli.out, tol_override(cli)).map(|_| ExitCode::SUCCESS)
        }
        Command::HomotopyK => {
            let cfg = load_config(cli)?;
            scenario::run_homotopy(&cfg, &cli.out, tol_override(cli)).map(|_| ExitCode::SUCCESS)
        }
        Command::Eigen => cmd_eigen(cli).map(|_| ExitCode::SUCCESS),
        Command::Verify { suite } => {
            let ok = cmd_verify(cli, suite)?;
            Ok(if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::OracleCompare => cmd_oracle_compare(cli).map(|_| ExitCode::SUCCESS),
    }
}

/// config and validation problems exit with 2, runtime failures with 1
fn classify(err: &anyhow::Error) -> ExitCode {
    let msg = format!("{err:#}").to_lowercase();
    let config_like = [
        "config",
        "missing",
        "unknown",
        "invalid",
        "expects",
        "must be",
        "expression",
        "required",
        "validation",
        "unsupported",
    ];
    if config_like.iter().any(|k| msg.contains(k)) {
        ExitCode::from(2)
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            classify(&err)
        }
    }
}
