//! Relaxation (variable fixing) solvers.
//!
//! Each iteration drops the bounds of the free variables, solves the
//! relaxed problem in closed form and compares the clamped solution with
//! the reduced resource. The comparison is made either explicitly, through
//! the usage `delta` of the clamped solution, or implicitly, through the
//! excess `sum_U a_j (x_j - u_j)` against the deficit
//! `sum_L a_j (l_j - x_j)`. Since the relaxed solution uses exactly `bk`,
//! `delta - bk = deficit - excess` and both tests take the same decision.

use std::time::Instant;

use crate::error::Result;
use crate::family::{dispatch, Aggregate, Kernel};
use crate::pegging::{
    dual_class, step_zero, Class, Decision, IterationEvent, Partition, PegSets, Scan,
    SolveObserver,
};
use crate::problem::{breakpoints_with, Breakpoints, ProblemInstance, Solution, Status};

/// How the bound violations of the relaxed solution are found.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Determination {
    /// Compare relaxed primal values with the bounds.
    Primal,
    /// Compare the relaxed dual with the breakpoints.
    Dual,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Evaluation {
    Implicit,
    Explicit,
    /// Explicit while the free set is smaller than twice the number of
    /// bound violations, implicit otherwise.
    Blended,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelaxVariant {
    Pir2,
    Dir2,
    Dir3,
    Dir5,
    Der2,
    Der3,
    Der5,
    Dbr2,
    Dbr3,
    Dbr5,
}

impl RelaxVariant {
    pub const ALL: [RelaxVariant; 10] = [
        Self::Pir2,
        Self::Dir2,
        Self::Dir3,
        Self::Dir5,
        Self::Der2,
        Self::Der3,
        Self::Der5,
        Self::Dbr2,
        Self::Dbr3,
        Self::Dbr5,
    ];

    pub fn determination(self) -> Determination {
        match self {
            Self::Pir2 => Determination::Primal,
            _ => Determination::Dual,
        }
    }

    pub fn evaluation(self) -> Evaluation {
        use RelaxVariant::*;
        match self {
            Pir2 | Dir2 | Dir3 | Dir5 => Evaluation::Implicit,
            Der2 | Der3 | Der5 => Evaluation::Explicit,
            Dbr2 | Dbr3 | Dbr5 => Evaluation::Blended,
        }
    }

    pub fn sets(self) -> PegSets {
        use RelaxVariant::*;
        match self {
            Pir2 | Dir2 | Der2 | Dbr2 => PegSets::Two,
            Dir3 | Der3 | Dbr3 => PegSets::Three,
            Dir5 | Der5 | Dbr5 => PegSets::Five,
        }
    }

    pub fn name(self) -> &'static str {
        use RelaxVariant::*;
        match self {
            Pir2 => "pir2",
            Dir2 => "dir2",
            Dir3 => "dir3",
            Dir5 => "dir5",
            Der2 => "der2",
            Der3 => "der3",
            Der5 => "der5",
            Dbr2 => "dbr2",
            Dbr3 => "dbr3",
            Dbr5 => "dbr5",
        }
    }
}

/// Relative tolerance of the `excess == deficit` and `delta == bk` tests.
pub const STOP_TOL: f64 = 1e-12;

/// Decision implied by the excess and deficit of a relaxed solution.
///
/// `excess - deficit` equals `bk - delta`, so the stop test also accepts the
/// scale of `bk` used by [`decide_explicit`]; both evaluations then stop on
/// the same iterations.
pub fn decide_implicit(excess: f64, deficit: f64, bk: f64) -> Decision {
    let scale = (excess + deficit).max(bk.abs()).max(1.0);
    if (excess - deficit).abs() <= STOP_TOL * scale {
        Decision::Stop
    } else if excess > deficit {
        Decision::PegUpper
    } else {
        Decision::PegLower
    }
}

/// Decision implied by the usage of the clamped solution.
pub fn decide_explicit(delta: f64, bk: f64) -> Decision {
    if (delta - bk).abs() <= STOP_TOL * bk.abs().max(1.0) {
        Decision::Stop
    } else if delta > bk {
        Decision::PegLower
    } else {
        Decision::PegUpper
    }
}

pub fn solve_relaxation(inst: &ProblemInstance, variant: RelaxVariant) -> Solution {
    solve_relaxation_observed(inst, variant, &mut ())
}

pub fn solve_relaxation_observed<O: SolveObserver>(
    inst: &ProblemInstance,
    variant: RelaxVariant,
    obs: &mut O,
) -> Solution {
    let start = Instant::now();
    let mut sol = dispatch!(inst, k => {
        let bp = breakpoints_with(&k, inst);
        run(&k, inst, &bp, variant, obs)
    });
    sol.elapsed = start.elapsed();
    sol
}

fn run<K: Kernel, O: SolveObserver>(
    k: &K,
    inst: &ProblemInstance,
    bp: &Breakpoints,
    variant: RelaxVariant,
    obs: &mut O,
) -> Solution {
    if let Some(x) = step_zero(k, inst, bp) {
        return Solution {
            x,
            mu: 0.0,
            status: Status::Optimal,
            iterations: 0,
            elapsed: Default::default(),
        };
    }
    let mut part = Partition::with_breakpoints(inst, variant.sets(), true, bp);
    part.init_free(k);
    let (l, u) = (inst.lower(), inst.upper());
    let both_evals = obs.wants_both_evaluations();
    let mut iterations = 0;

    let status = loop {
        if part.free_count() == 0 {
            break Status::Optimal;
        }
        let agg = part.free_agg.expect("tracked");
        let bk = part.bk;
        let Ok(mu) = k.inverse(&agg, bk) else {
            break Status::Failed;
        };
        iterations += 1;

        let s = match variant.determination() {
            Determination::Dual => part.scan(k, |j| dual_class(bp, j, mu)),
            Determination::Primal => part.scan(k, |j| {
                let x = k.relaxed(j, &agg, bk, mu);
                if x <= l[j] {
                    Class::Lower
                } else if x >= u[j] {
                    Class::Upper
                } else {
                    Class::Mid
                }
            }),
        };
        let violations = s.n_lower + s.n_upper;
        let value = |j: usize| k.relaxed(j, &agg, bk, mu);

        let use_explicit = match variant.evaluation() {
            Evaluation::Explicit => true,
            Evaluation::Implicit => false,
            Evaluation::Blended => part.free_count() < 2 * violations,
        };
        let mut delta = None;
        let mut ed = None;
        if use_explicit || both_evals {
            let mut d = s.bound_usage + part.mid_usage(&s, value);
            if part.interior_agg.count > 0 {
                d += k.usage(&part.interior_agg, mu);
            }
            delta = Some(d);
        }
        if !use_explicit || both_evals {
            ed = Some(part.excess_deficit(&s, value));
        }

        let mut decision = if violations == 0 {
            Decision::Stop
        } else if use_explicit {
            decide_explicit(delta.unwrap(), bk)
        } else {
            let (e, d) = ed.unwrap();
            if e.is_finite() && d.is_finite() {
                decide_implicit(e, d, bk)
            } else {
                let mut dl = s.bound_usage + part.mid_usage(&s, value);
                if part.interior_agg.count > 0 {
                    dl += k.usage(&part.interior_agg, mu);
                }
                decide_explicit(dl, bk)
            }
        };
        // rounding can point at a side with nothing on it
        if (decision == Decision::PegLower && s.n_lower == 0)
            || (decision == Decision::PegUpper && s.n_upper == 0)
        {
            decision = Decision::Stop;
        }

        obs.on_iteration(&IterationEvent {
            iteration: iterations,
            mu,
            bk,
            lo: part.lo,
            hi: part.hi,
            decision,
            delta,
            excess_deficit: ed,
            candidates: 0,
            lower: part.lower_slices(&s),
            upper: part.upper_slices(&s),
            sets: part.view(),
        });

        match decision {
            Decision::Stop => break Status::Optimal,
            Decision::PegLower => {
                part.peg_lower(k, &s);
                part.lo = part.lo.max(mu);
            }
            Decision::PegUpper => {
                part.peg_upper(k, &s);
                part.hi = part.hi.min(mu);
            }
        }
    };

    let (mu, status) = match status {
        Status::Optimal => crate::breakpoint::final_dual(k, &part),
        other => (part.dual_from_pegged(), other),
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

/// Step-by-step access to a relaxation solve, for inspection and tests.
pub struct RelaxState<'a> {
    part: Partition<'a>,
    last: Option<Scan>,
}

impl<'a> RelaxState<'a> {
    pub fn new(inst: &'a ProblemInstance, bp: &'a Breakpoints, sets: PegSets) -> Self {
        let mut part = Partition::with_breakpoints(inst, sets, true, bp);
        dispatch!(inst, k => part.init_free(&k));
        RelaxState { part, last: None }
    }

    pub fn bk(&self) -> f64 {
        self.part.bk
    }

    pub fn bracket(&self) -> (f64, f64) {
        (self.part.lo, self.part.hi)
    }

    /// Non-pegged indices, in no particular order.
    pub fn free(&self) -> Vec<usize> {
        self.part.remaining().collect()
    }

    pub fn free_aggregate(&self) -> Aggregate {
        self.part.free_agg.expect("tracked")
    }

    /// Multiplier of the relaxed problem over the free set.
    pub fn relaxed_dual(&self) -> Result<f64> {
        let inst = self.part.inst;
        dispatch!(inst, k => k.inverse(&self.free_aggregate(), self.part.bk))
    }

    /// `(j, x_j)` of the relaxed solution over the free set.
    pub fn relaxed_primal(&self) -> Result<Vec<(usize, f64)>> {
        let inst = self.part.inst;
        let agg = self.free_aggregate();
        let bk = self.part.bk;
        dispatch!(inst, k => {
            let mu = k.inverse(&agg, bk)?;
            Ok(self.part.remaining().map(|j| (j, k.relaxed(j, &agg, bk, mu))).collect())
        })
    }

    fn classify(&mut self, mu: f64) -> Scan {
        let bp = self.part.bp;
        let inst = self.part.inst;
        let s = dispatch!(inst, k => self.part.scan(&k, |j| dual_class(bp, j, mu)));
        self.last = Some(s);
        s
    }

    /// Indices at the lower and upper bound after the last evaluation.
    pub fn last_sets(&self) -> Option<(Vec<u32>, Vec<u32>)> {
        let s = self.last.as_ref()?;
        Some((
            self.part.lower_slices(s).concat(),
            self.part.upper_slices(s).concat(),
        ))
    }

    /// `(excess, deficit)` of the relaxed solution at `mu`, with the bound
    /// violations found from the breakpoints.
    pub fn implicit_evaluate(&mut self, mu: f64) -> (f64, f64) {
        let s = self.classify(mu);
        let inst = self.part.inst;
        let agg = self.free_aggregate();
        let bk = self.part.bk;
        dispatch!(inst, k => self.part.excess_deficit(&s, |j| k.relaxed(j, &agg, bk, mu)))
    }

    /// Resource usage of the clamped relaxed solution at `mu`.
    pub fn explicit_evaluate(&mut self, mu: f64) -> f64 {
        let s = self.classify(mu);
        let inst = self.part.inst;
        dispatch!(inst, k => {
            let mut d = s.bound_usage + self.part.mid_usage(&s, |j| k.interior(j, mu));
            if self.part.interior_agg.count > 0 {
                d += k.usage(&self.part.interior_agg, mu);
            }
            d
        })
    }

    /// Pegs one side of the last evaluation at `mu` and tightens the
    /// bracket.
    pub fn peg(&mut self, side: Decision, mu: f64) {
        let Some(s) = self.last.take() else { return };
        let inst = self.part.inst;
        dispatch!(inst, k => {
            match side {
                Decision::PegLower => {
                    self.part.peg_lower(&k, &s);
                    self.part.lo = self.part.lo.max(mu);
                }
                Decision::PegUpper => {
                    self.part.peg_upper(&k, &s);
                    self.part.hi = self.part.hi.min(mu);
                }
                Decision::Stop => {}
            }
        })
    }
}
