//! Reference solver: bisection on the multiplier, followed by a closed-form
//! solve over the variables that are strictly inside at the final bracket.
//! Deliberately simple; used to validate the fast solvers.

use std::time::Instant;

use crate::family::{dispatch, Kernel};
use crate::pegging::step_zero;
use crate::problem::{
    breakpoints_with, clamped, kkt_residual, Breakpoints, KktReport, ProblemInstance, Solution,
    Status,
};
use crate::sum::Compensated;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleConfig {
    /// Stop once the bracket is narrower than `mu_tol * max(1, |mu|)`.
    pub mu_tol: f64,
    pub max_iter: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            mu_tol: 1e-13,
            max_iter: 200,
        }
    }
}

pub fn bisection_solve(inst: &ProblemInstance, cfg: OracleConfig) -> Solution {
    let start = Instant::now();
    let mut sol = dispatch!(inst, k => {
        let bp = breakpoints_with(&k, inst);
        run(&k, inst, &bp, cfg)
    });
    sol.elapsed = start.elapsed();
    sol
}

fn usage<K: Kernel>(k: &K, inst: &ProblemInstance, bp: &Breakpoints, mu: f64) -> f64 {
    let (a, l, u) = (inst.a(), inst.lower(), inst.upper());
    (0..inst.n())
        .map(|j| a[j] * clamped(k, bp, l, u, j, mu))
        .collect::<Compensated>()
        .value()
}

fn run<K: Kernel>(
    k: &K,
    inst: &ProblemInstance,
    bp: &Breakpoints,
    cfg: OracleConfig,
) -> Solution {
    let done = |x, mu, status, iterations| Solution {
        x,
        mu,
        status,
        iterations,
        elapsed: Default::default(),
    };
    if let Some(x) = step_zero(k, inst, bp) {
        return done(x, 0.0, Status::Optimal, 0);
    }
    let (a, l, u) = (inst.a(), inst.lower(), inst.upper());
    let b = inst.b();
    let finite = |v: &&f64| v.is_finite();
    let mut lo = bp.mu_u.iter().filter(finite).copied().fold(f64::INFINITY, f64::min);
    let mut hi = bp.mu_l.iter().filter(finite).copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() || lo > hi {
        // every lower breakpoint infinite: widen from the upper ones
        hi = lo.max(hi);
        lo = lo.min(hi);
    }
    let feas_tol = (1e-10 * b.abs()).max(1e-12);
    if usage(k, inst, bp, lo) < b - feas_tol {
        return done(vec![f64::NAN; inst.n()], f64::NAN, Status::Failed, 0);
    }
    // usage above b at the top of the bracket: only possible with infinite
    // lower breakpoints, so push the bracket up until it straddles
    let mut guard = 0;
    while usage(k, inst, bp, hi) > b + feas_tol && guard < 2000 {
        hi = if hi > 0.0 { 2.0 * hi } else { 1.0 };
        guard += 1;
    }
    if usage(k, inst, bp, hi) > b + feas_tol {
        return done(vec![f64::NAN; inst.n()], f64::NAN, Status::Failed, 0);
    }

    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let used = usage(k, inst, bp, mid);
        if (used - b).abs() <= feas_tol {
            lo = mid;
            hi = mid;
            break;
        }
        if used > b {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= cfg.mu_tol * mid.abs().max(1.0) {
            break;
        }
    }

    let mid = 0.5 * (lo + hi);
    let mut x = vec![0.0; inst.n()];
    let mut free = Vec::new();
    let mut bk = Compensated::default();
    bk.add(b);
    for j in 0..inst.n() {
        if mid >= bp.mu_l[j] {
            x[j] = l[j];
            bk.add(-a[j] * l[j]);
        } else if mid <= bp.mu_u[j] {
            x[j] = u[j];
            bk.add(-a[j] * u[j]);
        } else {
            free.push(j);
        }
    }
    let mut mu = mid;
    if !free.is_empty() {
        let agg = k.aggregate(free.iter().copied());
        if let Ok(m) = k.inverse(&agg, bk.value()) {
            if m.is_finite() {
                mu = m;
            }
        }
    }
    for &j in &free {
        x[j] = clamped(k, bp, l, u, j, mu);
    }
    done(x, mu, Status::Optimal, iterations)
}

/// Optimality residuals of `sol`. The tolerance is not applied here; use
/// [`KktReport::passes`].
pub fn verify(inst: &ProblemInstance, sol: &Solution) -> KktReport {
    kkt_residual(inst, &sol.x, sol.mu)
}

/// Number of variables strictly between their bounds, with a band of
/// `1e-9 (u_j - l_j)` around each bound.
pub fn interior_count(inst: &ProblemInstance, x: &[f64]) -> usize {
    let (l, u) = (inst.lower(), inst.upper());
    x.iter()
        .enumerate()
        .filter(|&(j, &v)| {
            let band = 1e-9 * (u[j] - l[j]);
            v > l[j] + band && v < u[j] - band
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Params, Sense};
    use approx::assert_relative_eq;

    fn quadratic(c: &[f64], u: f64, b: f64) -> ProblemInstance {
        let n = c.len();
        ProblemInstance::new(
            Sense::Equality,
            b,
            vec![1.0; n],
            vec![0.0; n],
            vec![u; n],
            Params::Quadratic {
                w: vec![1.0; n],
                c: c.to_vec(),
            },
        )
        .unwrap()
    }

    #[test]
    fn symmetric_instance() {
        let sol = bisection_solve(&quadratic(&[0.0, 0.0], 1.0, 1.0), OracleConfig::default());
        assert_eq!(sol.status, Status::Optimal);
        assert_relative_eq!(sol.x[0], 0.5, max_relative = 1e-12);
        assert_relative_eq!(sol.x[1], 0.5, max_relative = 1e-12);
        assert_relative_eq!(sol.mu, -0.5, max_relative = 1e-12);
    }

    #[test]
    fn q_peg2() {
        let inst = quadratic(&[6.0, 3.0, 0.0], 2.0, 4.0);
        let sol = bisection_solve(&inst, OracleConfig::default());
        assert_eq!(sol.x, vec![2.0, 2.0, 0.0]);
        // optimal multipliers form [0, 1]; the spec example reports 1
        assert!((0.0..=1.0).contains(&sol.mu));
        assert!(verify(&inst, &sol).passes(1e-8));
    }

    #[test]
    fn degenerate_dual_interval() {
        let inst = quadratic(&[4.0, 0.0], 1.0, 1.0);
        let sol = bisection_solve(&inst, OracleConfig::default());
        assert_eq!(sol.x, vec![1.0, 0.0]);
        assert!((0.0..=3.0).contains(&sol.mu));
    }

    #[test]
    fn verify_examples() {
        let inst = quadratic(&[6.0, 3.0, 0.0], 2.0, 4.0);
        let good = Solution {
            x: vec![2.0, 2.0, 0.0],
            mu: 1.0,
            status: Status::Optimal,
            iterations: 0,
            elapsed: Default::default(),
        };
        let r = verify(&inst, &good);
        assert!(r.passes(1e-8));
        assert_eq!(r.max_residual, 0.0);
        let bad = Solution { mu: 5.0, ..good };
        let r = verify(&inst, &bad);
        assert!(!r.passes(1e-8));
        assert_relative_eq!(r.stationarity_residual, 4.0);

        let sym = quadratic(&[0.0, 0.0], 1.0, 1.0);
        let s = Solution {
            x: vec![0.5, 0.5],
            mu: -0.5,
            status: Status::Optimal,
            iterations: 0,
            elapsed: Default::default(),
        };
        assert!(verify(&sym, &s).passes(1e-8));
    }

    #[test]
    fn inequality_step_zero() {
        let inst = ProblemInstance::new(
            Sense::LessEqual,
            10.0,
            vec![1.0; 3],
            vec![0.0; 3],
            vec![2.0; 3],
            Params::Quadratic {
                w: vec![1.0; 3],
                c: vec![6.0, 3.0, 0.0],
            },
        )
        .unwrap();
        let sol = bisection_solve(&inst, OracleConfig::default());
        assert_eq!(sol.mu, 0.0);
        assert_eq!(sol.x, vec![2.0, 2.0, 0.0]);

        let tight = quadratic(&[6.0, 3.0, 0.0], 2.0, 3.0)
            .with_sense(Sense::LessEqual)
            .unwrap();
        let sol = bisection_solve(&tight, OracleConfig::default());
        assert!(sol.mu > 0.0);
        assert!(verify(&tight, &sol).passes(1e-9));
    }

    #[test]
    fn interior_count_uses_band() {
        let inst = quadratic(&[0.0, 0.0, 0.0], 1.0, 1.0);
        assert_eq!(interior_count(&inst, &[0.0, 0.5, 1.0 - 1e-12]), 1);
    }
}
