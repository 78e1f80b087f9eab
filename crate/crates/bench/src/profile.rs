//! Performance profiles and log-log scaling fits over bench records.

use std::collections::{BTreeMap, BTreeSet};
use std::io;

use nrap_core::{Algorithm, Status};
use serde::{Deserialize, Serialize};

use crate::bench::BenchRecord;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub alg: String,
    pub tau: f64,
    pub rho: f64,
}

#[derive(Debug, PartialEq, thiserror::Error)]
pub enum ProfileError {
    #[error("no records")]
    Empty,
    #[error("no records for {0}")]
    NoAlgorithm(String),
    #[error("need at least 3 distinct sizes with a finite time, found {0}")]
    TooFewSizes(usize),
    #[error("r_M must exceed 1, got {0}")]
    BadRatioCap(f64),
}

/// Performance ratios, one row per problem and one column per algorithm.
#[derive(Clone, Debug, PartialEq)]
pub struct Ratios {
    pub algs: Vec<Algorithm>,
    /// `None` marks a failure, which counts as `r_m`.
    pub ratios: Vec<Vec<Option<f64>>>,
    pub r_m: f64,
}

type Problem = (usize, usize, u64, u64);

/// Mean time per (problem, algorithm) over reps. A problem counts as failed
/// for an algorithm if any rep failed or no rep was recorded.
fn mean_times(records: &[BenchRecord]) -> (Vec<Algorithm>, Vec<Vec<Option<f64>>>) {
    let algs: Vec<Algorithm> = records
        .iter()
        .map(|r| r.alg)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut acc: BTreeMap<Problem, Vec<(f64, usize, bool)>> = BTreeMap::new();
    for r in records {
        let (f, n, h, s) = r.problem();
        let key = (f as usize, n, h, s);
        let row = acc.entry(key).or_insert_with(|| vec![(0.0, 0, false); algs.len()]);
        let cell = &mut row[algs.binary_search(&r.alg).expect("collected above")];
        cell.0 += r.time_ns as f64;
        cell.1 += 1;
        cell.2 |= r.status == Status::Failed;
    }
    let times = acc
        .into_values()
        .map(|row| {
            row.into_iter()
                .map(|(sum, count, failed)| (count > 0 && !failed).then(|| sum / count as f64))
                .collect()
        })
        .collect();
    (algs, times)
}

/// Ratios of each mean time to the best on the same problem. Times are
/// floored at 1 ns so a zero reading cannot divide by zero. `r_max` overrides
/// the failure ratio, which otherwise is 1.05 times the largest finite ratio.
pub fn ratios(records: &[BenchRecord], r_max: Option<f64>) -> Result<Ratios, ProfileError> {
    if records.is_empty() {
        return Err(ProfileError::Empty);
    }
    let (algs, times) = mean_times(records);
    let ratios: Vec<Vec<Option<f64>>> = times
        .into_iter()
        .map(|row| {
            let best = row.iter().flatten().fold(f64::INFINITY, |m, &t| m.min(t.max(1.0)));
            row.into_iter().map(|t| t.map(|t| t.max(1.0) / best)).collect()
        })
        .collect();
    let largest = ratios.iter().flatten().flatten().fold(1.0f64, |m, &r| m.max(r));
    let r_m = match r_max {
        Some(r) if r > 1.0 => r,
        Some(r) => return Err(ProfileError::BadRatioCap(r)),
        None => 1.05 * largest,
    };
    Ok(Ratios { algs, ratios, r_m })
}

impl Ratios {
    /// Fraction of problems on which algorithm `a` is within a factor `tau`
    /// of the best.
    pub fn rho(&self, a: usize, tau: f64) -> f64 {
        let hits = self
            .ratios
            .iter()
            .filter(|row| row[a].unwrap_or(self.r_m) <= tau)
            .count();
        hits as f64 / self.ratios.len() as f64
    }

    /// Every value at which some `rho` steps, together with 1 and `r_m`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut taus: Vec<f64> = self
            .ratios
            .iter()
            .flatten()
            .map(|r| r.unwrap_or(self.r_m))
            .chain([1.0, self.r_m])
            .collect();
        taus.sort_by(f64::total_cmp);
        taus.dedup();
        taus
    }
}

/// `rho_a(tau)` for every algorithm in the records over `taus`, grouped by
/// algorithm.
pub fn performance_profile(
    records: &[BenchRecord],
    taus: &[f64],
    r_max: Option<f64>,
) -> Result<Vec<ProfilePoint>, ProfileError> {
    let r = ratios(records, r_max)?;
    Ok(points(&r, taus))
}

pub fn points(r: &Ratios, taus: &[f64]) -> Vec<ProfilePoint> {
    let mut out = Vec::with_capacity(r.algs.len() * taus.len());
    for (a, alg) in r.algs.iter().enumerate() {
        for &tau in taus {
            out.push(ProfilePoint {
                alg: alg.to_string(),
                tau,
                rho: r.rho(a, tau),
            });
        }
    }
    out
}

pub fn write_profile<W: io::Write>(points: &[ProfilePoint], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for p in points {
        out.serialize(p)?;
    }
    out.flush()?;
    Ok(())
}

/// Least-squares slope of `ln(mean time)` against `ln n` over the non-failed
/// records of `alg`.
pub fn scaling_fit(records: &[BenchRecord], alg: Algorithm) -> Result<f64, ProfileError> {
    let mut by_n: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    let mut seen = false;
    for r in records.iter().filter(|r| r.alg == alg) {
        seen = true;
        if r.status != Status::Failed {
            let e = by_n.entry(r.n).or_default();
            e.0 += r.time_ns as f64;
            e.1 += 1;
        }
    }
    if !seen {
        return Err(ProfileError::NoAlgorithm(alg.to_string()));
    }
    let pts: Vec<(f64, f64)> = by_n
        .into_iter()
        .filter(|&(n, (sum, _))| n > 0 && sum > 0.0)
        .map(|(n, (sum, count))| ((n as f64).ln(), (sum / count as f64).ln()))
        .collect();
    if pts.len() < 3 {
        return Err(ProfileError::TooFewSizes(pts.len()));
    }
    Ok(slope(&pts))
}

fn slope(pts: &[(f64, f64)]) -> f64 {
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|&(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|&(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
