//! Median search over breakpoints (MB2, MB3, MB5).
//!
//! Each iteration evaluates the resource usage at the median of the
//! remaining candidate breakpoints, pegs every variable whose bound is
//! decided by the comparison with the reduced resource, and discards the
//! half of the candidates on the wrong side. When no candidate is left the
//! remaining variables are interior and the reduced problem is solved in
//! closed form.

use std::time::Instant;

use crate::family::{dispatch, Kernel};
use crate::pegging::{
    dual_class, step_zero, Decision, IterationEvent, Partition, PegSets, SolveObserver,
};
use crate::problem::{breakpoints_with, ProblemInstance, Sense, Solution, Status};
use crate::select::quickselect_median;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BreakpointVariant {
    Mb2,
    Mb3,
    Mb5,
}

impl BreakpointVariant {
    pub const ALL: [BreakpointVariant; 3] = [Self::Mb2, Self::Mb3, Self::Mb5];

    pub fn sets(self) -> PegSets {
        match self {
            Self::Mb2 => PegSets::Two,
            Self::Mb3 => PegSets::Three,
            Self::Mb5 => PegSets::Five,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Mb2 => "mb2",
            Self::Mb3 => "mb3",
            Self::Mb5 => "mb5",
        }
    }
}

/// Relative tolerance of the `delta == bk` test.
pub const DELTA_TOL: f64 = 1e-12;

pub fn solve_breakpoint(inst: &ProblemInstance, variant: BreakpointVariant) -> Solution {
    solve_breakpoint_observed(inst, variant, &mut ())
}

pub fn solve_breakpoint_observed<O: SolveObserver>(
    inst: &ProblemInstance,
    variant: BreakpointVariant,
    obs: &mut O,
) -> Solution {
    let start = Instant::now();
    let mut sol = dispatch!(inst, k => run(&k, inst, variant.sets(), obs));
    sol.elapsed = start.elapsed();
    sol
}

fn run<K: Kernel, O: SolveObserver>(
    k: &K,
    inst: &ProblemInstance,
    sets: PegSets,
    obs: &mut O,
) -> Solution {
    let bp = breakpoints_with(k, inst);
    if let Some(x) = step_zero(k, inst, &bp) {
        return Solution {
            x,
            mu: 0.0,
            status: Status::Optimal,
            iterations: 0,
            elapsed: Default::default(),
        };
    }

    let mut part = Partition::with_breakpoints(inst, sets, false, &bp);
    let mut cand: Vec<f64> = bp
        .mu_l
        .iter()
        .chain(&bp.mu_u)
        .copied()
        .filter(|v| v.is_finite())
        .collect();
    let mut iterations = 0;
    let mut stopped_at = None;

    while !cand.is_empty() {
        let n_cand = cand.len();
        let m = quickselect_median(&mut cand).expect("nonempty");
        iterations += 1;

        let s = part.scan(k, |j| dual_class(&bp, j, m));
        let mut delta = s.bound_usage + part.mid_usage(&s, |j| k.interior(j, m));
        if part.interior_agg.count > 0 {
            delta += k.usage(&part.interior_agg, m);
        }
        let bk = part.bk;
        let decision = if (delta - bk).abs() <= DELTA_TOL * bk.abs().max(1.0) {
            Decision::Stop
        } else if delta > bk {
            Decision::PegLower
        } else {
            Decision::PegUpper
        };

        obs.on_iteration(&IterationEvent {
            iteration: iterations,
            mu: m,
            bk,
            lo: part.lo,
            hi: part.hi,
            decision,
            delta: Some(delta),
            excess_deficit: None,
            candidates: n_cand,
            lower: part.lower_slices(&s),
            upper: part.upper_slices(&s),
            sets: part.view(),
        });

        match decision {
            Decision::Stop => {
                stopped_at = Some(m);
                break;
            }
            Decision::PegLower => {
                part.peg_lower(k, &s);
                part.lo = m;
                cand.retain(|&c| c > m);
            }
            Decision::PegUpper => {
                part.peg_upper(k, &s);
                part.hi = m;
                cand.retain(|&c| c < m);
            }
        }
    }

    let (mu, status) = match stopped_at {
        Some(m) => (m, Status::Optimal),
        None => final_dual(k, &part),
    };
    let x = part.finish(k, mu);
    Solution {
        x,
        mu,
        status,
        iterations,
        elapsed: Default::default(),
    }
}

/// Closed-form multiplier for the variables still free, with the reduced
/// resource recomputed from the pegged set.
pub(crate) fn final_dual<K: Kernel>(k: &K, part: &Partition<'_>) -> (f64, Status) {
    let nonneg = |mu: f64| {
        if part.inst.sense() == Sense::LessEqual {
            mu.max(0.0)
        } else {
            mu
        }
    };
    if part.free_count() == 0 {
        return (nonneg(part.dual_from_pegged()), Status::Optimal);
    }
    let agg = part.aggregate_remaining(k);
    match k.inverse(&agg, part.exact_bk()) {
        Ok(mu) if mu.is_finite() => (mu, Status::Optimal),
        _ => (nonneg(part.dual_from_pegged()), Status::Failed),
    }
}
