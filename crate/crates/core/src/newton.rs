//! Quasi-Newton search on the dual residual
//! `psi(mu) = b - sum_j a_j x_j(mu)`, which is nondecreasing in `mu`.
//!
//! Steps use the slope of one of two envelopes of `psi`: `psi_plus` keeps
//! only the upper clamp and `psi_minus` keeps only the lower clamp, so that
//! `psi_minus <= psi <= psi_plus`. The result is approximate: iteration
//! stops once the resource is met to a relative tolerance.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::family::{dispatch, Kernel};
use crate::problem::{breakpoints_with, clamped, Breakpoints, ProblemInstance, Solution, Status};
use crate::sum::Compensated;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NzConfig {
    /// Stop when `|sum a_j x_j / b - 1| < eps`.
    pub eps: f64,
    /// Iterations allowed per starting point.
    pub max_iters: usize,
    pub per_start_time_cap: Duration,
    pub total_time_cap: Duration,
}

impl Default for NzConfig {
    fn default() -> Self {
        NzConfig {
            eps: 0.01,
            max_iters: 10_000,
            per_start_time_cap: Duration::from_secs(100),
            total_time_cap: Duration::from_secs(300),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NzTrace {
    pub iterations: usize,
    /// Starting points abandoned before the last one tried.
    pub restarts: usize,
    pub final_relative_residual: f64,
    pub status: Status,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NzStep {
    Converged(f64),
    Next(f64),
    /// The envelope slope vanished or the step left the dual domain.
    Stalled,
}

/// Values of `psi` and of the envelope slopes at one point.
#[derive(Clone, Copy, Debug)]
struct Probe {
    psi: f64,
    d_plus: f64,
    d_minus: f64,
}

fn probe<K: Kernel>(k: &K, inst: &ProblemInstance, bp: &Breakpoints, mu: f64) -> Probe {
    let (a, l, u) = (inst.a(), inst.lower(), inst.upper());
    let mut used = Compensated::default();
    let (mut d_plus, mut d_minus) = (0.0, 0.0);
    for j in 0..inst.n() {
        if mu >= bp.mu_l[j] {
            used.add(a[j] * l[j]);
            d_plus -= a[j] * k.slope(j, mu);
        } else if mu <= bp.mu_u[j] {
            used.add(a[j] * u[j]);
            d_minus -= a[j] * k.slope(j, mu);
        } else {
            used.add(a[j] * k.interior(j, mu).clamp(l[j], u[j]));
            let s = -a[j] * k.slope(j, mu);
            d_plus += s;
            d_minus += s;
        }
    }
    Probe {
        psi: inst.b() - used.value(),
        d_plus,
        d_minus,
    }
}

fn in_domain(inst: &ProblemInstance, mu: f64) -> Result<()> {
    if !mu.is_finite() || (inst.family().positive_dual() && mu <= 0.0) {
        Err(Error::Domain(format!(
            "mu = {mu} is outside the dual domain of the {} family",
            inst.family()
        )))
    } else {
        Ok(())
    }
}

/// `b - sum_j a_j x_j(mu)`.
pub fn psi(inst: &ProblemInstance, mu: f64) -> Result<f64> {
    in_domain(inst, mu)?;
    Ok(dispatch!(inst, k => {
        let bp = breakpoints_with(&k, inst);
        let (a, l, u) = (inst.a(), inst.lower(), inst.upper());
        let used: Compensated = (0..inst.n())
            .map(|j| a[j] * clamped(&k, &bp, l, u, j, mu))
            .collect();
        inst.b() - used.value()
    }))
}

fn envelope(inst: &ProblemInstance, mu: f64, keep_upper: bool) -> Result<f64> {
    in_domain(inst, mu)?;
    Ok(dispatch!(inst, k => {
        let (a, l, u) = (inst.a(), inst.lower(), inst.upper());
        let used: Compensated = (0..inst.n())
            .map(|j| {
                let h = k.interior(j, mu);
                a[j] * if keep_upper { h.min(u[j]) } else { h.max(l[j]) }
            })
            .collect();
        inst.b() - used.value()
    }))
}

/// `b - sum_j a_j min(h_j(mu), u_j)`: an upper envelope of [`psi`].
pub fn psi_plus(inst: &ProblemInstance, mu: f64) -> Result<f64> {
    envelope(inst, mu, true)
}

/// `b - sum_j a_j max(l_j, h_j(mu))`: a lower envelope of [`psi`].
pub fn psi_minus(inst: &ProblemInstance, mu: f64) -> Result<f64> {
    envelope(inst, mu, false)
}

fn converged(inst: &ProblemInstance, psi: f64, eps: f64) -> bool {
    psi == 0.0 || psi.abs() < eps * inst.b().abs()
}

fn step_from(inst: &ProblemInstance, mu: f64, p: &Probe, eps: f64) -> NzStep {
    if converged(inst, p.psi, eps) {
        return NzStep::Converged(mu);
    }
    let d = if p.psi > 0.0 { p.d_plus } else { p.d_minus };
    if !(d > 0.0) {
        return NzStep::Stalled;
    }
    let next = mu - p.psi / d;
    if in_domain(inst, next).is_err() {
        NzStep::Stalled
    } else {
        NzStep::Next(next)
    }
}

/// One quasi-Newton step from `mu`.
pub fn nz_step(inst: &ProblemInstance, mu: f64, cfg: &NzConfig) -> Result<NzStep> {
    in_domain(inst, mu)?;
    Ok(dispatch!(inst, k => {
        let bp = breakpoints_with(&k, inst);
        step_from(inst, mu, &probe(&k, inst, &bp, mu), cfg.eps)
    }))
}

pub fn solve_nz(inst: &ProblemInstance, cfg: &NzConfig) -> (Solution, NzTrace) {
    let start = Instant::now();
    let (mut sol, trace) = dispatch!(inst, k => {
        let bp = breakpoints_with(&k, inst);
        run(&k, inst, &bp, cfg, start)
    });
    sol.elapsed = start.elapsed();
    (sol, trace)
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, c) = v
        .filter(|x| x.is_finite())
        .fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    (c > 0).then(|| s / c as f64)
}

fn run<K: Kernel>(
    k: &K,
    inst: &ProblemInstance,
    bp: &Breakpoints,
    cfg: &NzConfig,
    t0: Instant,
) -> (Solution, NzTrace) {
    let positive = inst.family().positive_dual();
    let starts = [
        mean(bp.mu_l.iter().chain(&bp.mu_u).copied()),
        mean(bp.mu_l.iter().copied()),
        mean(bp.mu_u.iter().copied()),
    ];
    let mut iterations = 0;
    let mut attempts = 0;
    let mut last = (f64::NAN, f64::INFINITY);

    'starts: for mu0 in starts.into_iter().flatten() {
        attempts += 1;
        let t_start = Instant::now();
        let mut mu = mu0;
        // largest mu seen with psi < 0 and smallest with psi > 0
        let mut below: Option<f64> = None;
        let mut above: Option<f64> = None;
        for _ in 0..cfg.max_iters {
            if t_start.elapsed() >= cfg.per_start_time_cap {
                break;
            }
            if t0.elapsed() >= cfg.total_time_cap {
                break 'starts;
            }
            if in_domain(inst, mu).is_err() {
                break;
            }
            iterations += 1;
            let p = probe(k, inst, bp, mu);
            last = (mu, p.psi);
            if p.psi < 0.0 {
                below = Some(below.map_or(mu, |b| b.max(mu)));
            } else if p.psi > 0.0 {
                above = Some(above.map_or(mu, |a| a.min(mu)));
            }
            mu = match step_from(inst, mu, &p, cfg.eps) {
                NzStep::Converged(m) => {
                    let x = finish(k, inst, bp, m);
                    let rel = relative(inst, p.psi);
                    let sol = Solution {
                        x,
                        mu: m,
                        status: Status::Approximate,
                        iterations,
                        elapsed: Default::default(),
                    };
                    let trace = NzTrace {
                        iterations,
                        restarts: attempts - 1,
                        final_relative_residual: rel,
                        status: Status::Approximate,
                    };
                    return (sol, trace);
                }
                NzStep::Next(m) => m,
                NzStep::Stalled => match (below, above) {
                    (Some(lo), Some(hi)) => 0.5 * (lo + hi),
                    _ if p.psi > 0.0 => {
                        if positive {
                            0.5 * mu
                        } else {
                            mu - mu.abs().max(1.0)
                        }
                    }
                    _ => {
                        if positive {
                            2.0 * mu
                        } else {
                            mu + mu.abs().max(1.0)
                        }
                    }
                },
            };
        }
    }

    let (mu, psi) = last;
    let x = if mu.is_finite() {
        finish(k, inst, bp, mu)
    } else {
        vec![f64::NAN; inst.n()]
    };
    let sol = Solution {
        x,
        mu,
        status: Status::Failed,
        iterations,
        elapsed: Default::default(),
    };
    let trace = NzTrace {
        iterations,
        restarts: attempts.saturating_sub(1),
        final_relative_residual: relative(inst, psi),
        status: Status::Failed,
    };
    (sol, trace)
}

fn relative(inst: &ProblemInstance, psi: f64) -> f64 {
    if psi == 0.0 {
        0.0
    } else {
        (psi / inst.b()).abs()
    }
}

fn finish<K: Kernel>(k: &K, inst: &ProblemInstance, bp: &Breakpoints, mu: f64) -> Vec<f64> {
    let (l, u) = (inst.lower(), inst.upper());
    (0..inst.n()).map(|j| clamped(k, bp, l, u, j, mu)).collect()
}
