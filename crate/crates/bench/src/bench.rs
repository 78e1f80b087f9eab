//! Benchmark runs over a grid of generated instances.

use std::fs::File;
use std::io;
use std::path::Path;
use std::time::Instant;

use nrap_core::{
    bisection_solve, generate, solve, solve_nz, verify, Algorithm, Family, GenSpec, NzConfig,
    OracleConfig, ProblemInstance, Solution, Status,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One timed solve. Field order is the CSV column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    #[serde(with = "text")]
    pub family: Family,
    pub n: usize,
    pub h_frac: f64,
    pub seed: u64,
    #[serde(with = "text")]
    pub alg: Algorithm,
    pub rep: usize,
    pub time_ns: u64,
    pub iters: usize,
    #[serde(with = "text")]
    pub status: Status,
    pub mu: f64,
    pub feas_resid: f64,
    pub kkt_resid: f64,
}

impl BenchRecord {
    /// Key identifying the instance the record was measured on.
    pub fn problem(&self) -> (Family, usize, u64, u64) {
        (self.family, self.n, self.h_frac.to_bits(), self.seed)
    }
}

/// Serializes through `Display` and parses through `FromStr`.
mod text {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        let s = <&str>::deserialize(d)?;
        s.parse().map_err(D::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchMatrix {
    pub families: Vec<Family>,
    pub sizes: Vec<usize>,
    pub h_fracs: Vec<f64>,
    pub seeds: Vec<u64>,
    pub algs: Vec<Algorithm>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub reps: usize,
    /// Bound on the optimality residuals of an exact solve and on its
    /// distance from the oracle, relative to `max(1, |x*|)`.
    pub tol: f64,
    /// Bound on `|sum a_j x_j - b|` relative to `max(1, |b|)`.
    pub feas_tol: f64,
    /// Worker count; `None` reads `NRAP_THREADS` and falls back to 1.
    pub threads: Option<usize>,
    pub nz: NzConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            reps: 1,
            tol: 1e-7,
            feas_tol: 1e-8,
            threads: None,
            nz: NzConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("benchmark matrix has no {0}")]
    EmptyMatrix(&'static str),
    #[error("reps must be positive")]
    NoReps,
    #[error("generating {spec:?}: {source}")]
    Generation {
        spec: GenSpec,
        source: nrap_core::Error,
    },
    #[error("{alg} on {spec:?}, rep {rep}: {msg}")]
    Verification {
        alg: Algorithm,
        spec: GenSpec,
        rep: usize,
        msg: String,
    },
    #[error("oracle failed on {0:?}")]
    Oracle(GenSpec),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Worker count from `NRAP_THREADS`, default 1.
pub fn threads_from_env() -> usize {
    std::env::var("NRAP_THREADS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or(1)
}

impl BenchMatrix {
    fn check(&self) -> Result<(), BenchError> {
        let empty = [
            (self.families.is_empty(), "families"),
            (self.sizes.is_empty(), "sizes"),
            (self.h_fracs.is_empty(), "h_fracs"),
            (self.seeds.is_empty(), "seeds"),
            (self.algs.is_empty(), "algs"),
        ];
        match empty.into_iter().find(|e| e.0) {
            Some((_, what)) => Err(BenchError::EmptyMatrix(what)),
            None => Ok(()),
        }
    }

    fn cells(&self) -> Vec<GenSpec> {
        let mut out = Vec::new();
        for &family in &self.families {
            for &n in &self.sizes {
                for &h in &self.h_fracs {
                    for &seed in &self.seeds {
                        out.push(GenSpec::new(family, n, h, seed));
                    }
                }
            }
        }
        out
    }
}

fn run_alg(inst: &ProblemInstance, alg: Algorithm, nz: &NzConfig) -> Solution {
    match alg {
        Algorithm::Nz => solve_nz(inst, nz).0,
        _ => solve(inst, alg),
    }
}

/// Checks a solve against the oracle. `Failed` solves are not checked.
pub fn check_solution(
    inst: &ProblemInstance,
    oracle: &Solution,
    alg: Algorithm,
    sol: &Solution,
    cfg: &BenchConfig,
) -> Result<(), String> {
    let tol = cfg.tol;
    if sol.x.len() != inst.n() {
        return Err(format!("solution has {} entries, expected {}", sol.x.len(), inst.n()));
    }
    match sol.status {
        Status::Failed => return Ok(()),
        Status::Approximate => {
            for (j, &x) in sol.x.iter().enumerate() {
                if !(x >= inst.lower()[j] && x <= inst.upper()[j]) {
                    return Err(format!("x[{j}] = {x} outside its bounds"));
                }
            }
            let used: f64 = inst.a().iter().zip(&sol.x).map(|(a, x)| a * x).sum();
            let rel = (used / inst.b() - 1.0).abs();
            return if rel < cfg.nz.eps {
                Ok(())
            } else {
                Err(format!("relative resource residual {rel:e}"))
            };
        }
        Status::Optimal => {}
    }

    let rep = verify(inst, sol);
    let scale = inst.b().abs().max(1.0);
    if rep.feasibility_residual > cfg.feas_tol * scale {
        return Err(format!("feasibility residual {:e}", rep.feasibility_residual));
    }
    if rep.stationarity_residual > tol || rep.sign_violation > tol {
        return Err(format!("{rep:?}"));
    }
    if rep.complementarity_residual > tol * scale * sol.mu.abs().max(1.0) {
        return Err(format!("complementarity residual {:e}", rep.complementarity_residual));
    }
    if alg != Algorithm::Oracle {
        let sup = oracle.x.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let err = sol
            .x
            .iter()
            .zip(&oracle.x)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if err > tol * sup {
            return Err(format!("differs from the oracle by {err:e}"));
        }
    }
    Ok(())
}

fn run_cell(
    spec: GenSpec,
    algs: &[Algorithm],
    cfg: &BenchConfig,
) -> Result<Vec<BenchRecord>, BenchError> {
    let inst = generate(&spec).map_err(|source| BenchError::Generation { spec, source })?;
    let oracle = bisection_solve(&inst, OracleConfig::default());
    if oracle.status != Status::Optimal {
        return Err(BenchError::Oracle(spec));
    }

    let mut out = Vec::with_capacity(algs.len() * cfg.reps);
    for &alg in algs {
        let _ = run_alg(&inst, alg, &cfg.nz);
        for rep in 0..cfg.reps {
            let start = Instant::now();
            let sol = run_alg(&inst, alg, &cfg.nz);
            let time_ns = start.elapsed().as_nanos().min(u64::MAX as u128) as u64;
            check_solution(&inst, &oracle, alg, &sol, cfg).map_err(|msg| {
                BenchError::Verification {
                    alg,
                    spec,
                    rep,
                    msg,
                }
            })?;
            let kkt = verify(&inst, &sol);
            out.push(BenchRecord {
                family: spec.family,
                n: spec.n,
                h_frac: spec.h_frac,
                seed: spec.seed,
                alg,
                rep,
                time_ns,
                iters: sol.iterations,
                status: sol.status,
                mu: sol.mu,
                feas_resid: kkt.feasibility_residual,
                kkt_resid: kkt.max_residual,
            });
        }
    }
    Ok(out)
}

fn family_rank(f: Family) -> usize {
    Family::ALL.iter().position(|&g| g == f).expect("listed family")
}

/// Sorts records by cell, then algorithm, then rep.
pub fn sort_records(records: &mut [BenchRecord]) {
    records.sort_by(|x, y| {
        (family_rank(x.family), x.n)
            .cmp(&(family_rank(y.family), y.n))
            .then(x.h_frac.total_cmp(&y.h_frac))
            .then(x.seed.cmp(&y.seed))
            .then(x.alg.cmp(&y.alg))
            .then(x.rep.cmp(&y.rep))
    });
}

/// Solves every (cell, algorithm) pair `cfg.reps` times after one untimed
/// warm-up solve. Only the solve call is timed. Any solve that is not
/// `Failed` must pass [`check_solution`], otherwise the run aborts.
pub fn run_bench(matrix: &BenchMatrix, cfg: &BenchConfig) -> Result<Vec<BenchRecord>, BenchError> {
    matrix.check()?;
    if cfg.reps == 0 {
        return Err(BenchError::NoReps);
    }
    let threads = cfg.threads.unwrap_or_else(threads_from_env);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let cells = matrix.cells();
    let parts: Vec<Vec<BenchRecord>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&spec| run_cell(spec, &matrix.algs, cfg))
            .collect::<Result<_, _>>()
    })?;
    let mut records: Vec<BenchRecord> = parts.into_iter().flatten().collect();
    sort_records(&mut records);
    Ok(records)
}

pub fn write_records<W: io::Write>(records: &[BenchRecord], w: W) -> Result<(), BenchError> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_records<R: io::Read>(r: R) -> Result<Vec<BenchRecord>, BenchError> {
    csv::Reader::from_reader(r)
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(Into::into)
}

pub fn save_records(records: &[BenchRecord], path: impl AsRef<Path>) -> Result<(), BenchError> {
    write_records(records, File::create(path)?)
}

pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<BenchRecord>, BenchError> {
    read_records(File::open(path)?)
}
