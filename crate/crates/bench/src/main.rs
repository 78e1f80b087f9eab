use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use nrap_core::{
    bisection_solve, generate, kkt_residual, read_instance, read_solution, solve, solve_nz,
    write_instance, write_solution, Algorithm, Family, GenSpec, NzConfig, OracleConfig, Sense,
};
use nrap_bench::{
    load_records, points, ratios, run_bench, save_records, scaling_fit, write_profile,
    BenchConfig, BenchMatrix,
};

#[derive(Parser)]
#[command(name = "nrap", version, about = "Separable convex resource allocation solvers")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a random instance.
    Gen {
        #[arg(long)]
        family: Family,
        #[arg(long, value_parser = parse_size)]
        n: usize,
        #[arg(long)]
        h_frac: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "eq")]
        sense: Sense,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve an instance file and write the solution as CSV.
    Solve {
        #[arg(long)]
        alg: Algorithm,
        #[arg(long = "in")]
        input: PathBuf,
        /// Residual bound reported against after the solve. For `oracle` it
        /// is also the relative width at which bisection stops.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a solution against the optimality conditions.
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        sol: PathBuf,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
    },
    /// Time algorithms over a grid of generated instances.
    Bench {
        #[arg(long, value_delimiter = ',', required = true)]
        algs: Vec<Algorithm>,
        #[arg(long, value_delimiter = ',', required = true)]
        families: Vec<Family>,
        #[arg(long, value_delimiter = ',', required = true, value_parser = parse_size)]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        h_fracs: Vec<f64>,
        /// Comma-separated seeds, or a range `a..b` (end excluded).
        #[arg(long, required = true)]
        seeds: String,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        /// Total time allowed per NZ solve, in seconds.
        #[arg(long)]
        nz_cap: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute performance profiles from bench results.
    Profile {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Ratio assigned to failed runs.
        #[arg(long)]
        r_max: Option<f64>,
    },
    /// Fit the log-log slope of mean time against n.
    Scaling {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        alg: Algorithm,
    },
}

/// Accepts plain integers and exact scientific forms such as `1e5`.
fn parse_size(s: &str) -> Result<usize, String> {
    if let Ok(n) = s.parse::<usize>() {
        return Ok(n);
    }
    match f64::from_str(s) {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v <= usize::MAX as f64 => Ok(v as usize),
        _ => Err(format!("`{s}` is not a size")),
    }
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        return Ok((a..b).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse::<u64>().with_context(|| format!("bad seed `{t}`")))
        .collect()
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Gen {
            family,
            n,
            h_frac,
            seed,
            sense,
            out,
        } => {
            let spec = GenSpec {
                sense,
                ..GenSpec::new(family, n, h_frac, seed)
            };
            let inst = generate(&spec)?;
            write_instance(&inst, &out).with_context(|| format!("writing {}", out.display()))?;
        }
        Cmd::Solve {
            alg,
            input,
            tol,
            out,
        } => {
            let inst = read_instance(&input).with_context(|| format!("reading {}", input.display()))?;
            let sol = match alg {
                Algorithm::Oracle => bisection_solve(
                    &inst,
                    OracleConfig {
                        mu_tol: tol,
                        ..Default::default()
                    },
                ),
                Algorithm::Nz => solve_nz(&inst, &NzConfig::default()).0,
                _ => solve(&inst, alg),
            };
            write_solution(&sol, alg.name(), &out)
                .with_context(|| format!("writing {}", out.display()))?;
            let rep = kkt_residual(&inst, &sol.x, sol.mu);
            println!(
                "alg={} status={} iters={} mu={:e} time_ns={} kkt={:e}",
                alg,
                sol.status,
                sol.iterations,
                sol.mu,
                sol.elapsed.as_nanos(),
                rep.max_residual
            );
            if alg.is_exact() && !rep.passes(tol) {
                eprintln!("warning: residual {:e} exceeds {tol:e}", rep.max_residual);
            }
        }
        Cmd::Verify { input, sol, tol } => {
            let inst = read_instance(&input).with_context(|| format!("reading {}", input.display()))?;
            let (_, sol) = read_solution(&sol).with_context(|| format!("reading {}", sol.display()))?;
            if sol.x.len() != inst.n() {
                bail!("solution has {} entries, instance has {}", sol.x.len(), inst.n());
            }
            let rep = kkt_residual(&inst, &sol.x, sol.mu);
            println!("feasibility_residual={:e}", rep.feasibility_residual);
            println!("stationarity_residual={:e}", rep.stationarity_residual);
            println!("complementarity_residual={:e}", rep.complementarity_residual);
            println!("sign_violation={:e}", rep.sign_violation);
            println!("max_residual={:e}", rep.max_residual);
            let ok = rep.passes(tol);
            println!("{}", if ok { "pass" } else { "fail" });
            return Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
        Cmd::Bench {
            algs,
            families,
            sizes,
            h_fracs,
            seeds,
            reps,
            tol,
            nz_cap,
            out,
        } => {
            let matrix = BenchMatrix {
                families,
                sizes,
                h_fracs,
                seeds: parse_seeds(&seeds)?,
                algs,
            };
            let mut cfg = BenchConfig {
                reps,
                tol,
                ..Default::default()
            };
            if let Some(cap) = nz_cap {
                let cap = Duration::try_from_secs_f64(cap).context("bad --nz-cap")?;
                cfg.nz.total_time_cap = cap;
                cfg.nz.per_start_time_cap = cfg.nz.per_start_time_cap.min(cap);
            }
            let records = run_bench(&matrix, &cfg)?;
            save_records(&records, &out).with_context(|| format!("writing {}", out.display()))?;
            eprintln!("{} records written to {}", records.len(), out.display());
        }
        Cmd::Profile { input, out, r_max } => {
            let records = load_records(&input)?;
            let r = ratios(&records, r_max)?;
            let pts = points(&r, &r.breakpoints());
            let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            write_profile(&pts, BufWriter::new(file))?;
        }
        Cmd::Scaling { input, alg } => {
            let records = load_records(&input)?;
            let slope = scaling_fit(&records, alg)?;
            writeln!(io::stdout(), "{slope}")?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
