//! Index bookkeeping shared by the breakpoint and relaxation solvers.
//!
//! Non-pegged indices live in four arrays, all interpreted relative to the
//! current dual bracket `[lo, hi]` known to contain an optimal multiplier:
//!
//! * `both`     may still be pegged at either bound,
//! * `below`    known to end strictly below its upper bound,
//! * `above`    known to end strictly above its lower bound,
//! * `interior` known to end strictly between its bounds.
//!
//! With two sets only `both` is used; three sets add `interior`; five sets
//! use all four. A scan at a trial multiplier partitions the arrays in place
//! so that the indices to peg form a prefix (lower) or a suffix (upper), and
//! pegging removes that region.

use crate::family::{Aggregate, Kernel};
use crate::problem::{clamped, Breakpoints, ProblemInstance, Sense};
use crate::sum::Compensated;

/// Which index sets a solver maintains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PegSets {
    Two,
    Three,
    Five,
}

/// Outcome of one evaluation at a trial multiplier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Decision {
    PegLower,
    PegUpper,
    Stop,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Class {
    Lower,
    Mid,
    Upper,
}

/// Result of classifying every non-pegged index at one trial point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Scan {
    /// `both[..both_lower]` sits at its lower bound.
    pub both_lower: usize,
    /// `both[both_upper..]` sits at its upper bound.
    pub both_upper: usize,
    /// `below[..below_lower]` sits at its lower bound.
    pub below_lower: usize,
    /// `above[above_upper..]` sits at its upper bound.
    pub above_upper: usize,
    pub n_lower: usize,
    pub n_upper: usize,
    /// `sum_L a_j l_j + sum_U a_j u_j`.
    pub bound_usage: f64,
}

/// Read-only view of the index sets for observers.
#[derive(Clone, Copy, Debug)]
pub struct SetView<'a> {
    pub both: &'a [u32],
    pub interior: &'a [u32],
    pub below: &'a [u32],
    pub above: &'a [u32],
    pub interior_agg: Aggregate,
    /// Relaxation solvers only: aggregate over every non-pegged index.
    pub free_agg: Option<Aggregate>,
}

/// Per-iteration report passed to a [`SolveObserver`].
#[derive(Clone, Copy, Debug)]
pub struct IterationEvent<'a> {
    pub iteration: usize,
    /// Trial multiplier: the median breakpoint or the relaxed dual.
    pub mu: f64,
    pub bk: f64,
    pub lo: f64,
    pub hi: f64,
    pub decision: Decision,
    /// Resource usage of the clamped solution, when computed.
    pub delta: Option<f64>,
    /// `(excess, deficit)`, when computed.
    pub excess_deficit: Option<(f64, f64)>,
    /// Remaining candidate breakpoints before the discard (breakpoint
    /// solvers only).
    pub candidates: usize,
    /// Indices found at their lower bound at `mu`.
    pub lower: [&'a [u32]; 2],
    /// Indices found at their upper bound at `mu`.
    pub upper: [&'a [u32]; 2],
    pub sets: SetView<'a>,
}

/// Hook into solver iterations. The unit type ignores every event.
pub trait SolveObserver {
    /// Ask relaxation solvers to compute both the explicit and the implicit
    /// evaluation every iteration. The decision still follows the variant.
    fn wants_both_evaluations(&self) -> bool {
        false
    }

    fn on_iteration(&mut self, _event: &IterationEvent<'_>) {}
}

impl SolveObserver for () {}

/// Position of `x_j(mu)` relative to the bounds, read off the breakpoints.
#[inline]
pub(crate) fn dual_class(bp: &Breakpoints, j: usize, mu: f64) -> Class {
    if mu >= bp.mu_l[j] {
        Class::Lower
    } else if mu <= bp.mu_u[j] {
        Class::Upper
    } else {
        Class::Mid
    }
}

pub(crate) struct Partition<'a> {
    pub inst: &'a ProblemInstance,
    pub mode: PegSets,
    pub bp: &'a Breakpoints,
    pub both: Vec<u32>,
    pub interior: Vec<u32>,
    pub below: Vec<u32>,
    pub above: Vec<u32>,
    pub interior_agg: Aggregate,
    pub free_agg: Option<Aggregate>,
    pub bk: f64,
    pub lo: f64,
    pub hi: f64,
    pub x: Vec<f64>,
    pub pegged_lower: Vec<u32>,
    pub pegged_upper: Vec<u32>,
    scratch_mid: Vec<u32>,
    scratch_up: Vec<u32>,
}

impl<'a> Partition<'a> {
    pub fn with_breakpoints(
        inst: &'a ProblemInstance,
        mode: PegSets,
        track_free: bool,
        bp: &'a Breakpoints,
    ) -> Self {
        let n = inst.n();
        assert!(n <= u32::MAX as usize, "instance too large for 32-bit indices");
        Partition {
            inst,
            mode,
            bp,
            both: (0..n as u32).collect(),
            interior: Vec::new(),
            below: Vec::new(),
            above: Vec::new(),
            interior_agg: Aggregate::default(),
            free_agg: track_free.then(Aggregate::default),
            bk: inst.b(),
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
            x: vec![f64::NAN; n],
            pegged_lower: Vec::new(),
            pegged_upper: Vec::new(),
            scratch_mid: Vec::new(),
            scratch_up: Vec::new(),
        }
    }

    pub fn init_free<K: Kernel>(&mut self, k: &K) {
        if self.free_agg.is_some() {
            self.free_agg = Some(self.aggregate_remaining(k));
        }
    }

    pub fn free_count(&self) -> usize {
        self.both.len() + self.interior.len() + self.below.len() + self.above.len()
    }

    pub fn remaining(&self) -> impl Iterator<Item = usize> + '_ {
        self.both
            .iter()
            .chain(&self.interior)
            .chain(&self.below)
            .chain(&self.above)
            .map(|&j| j as usize)
    }

    pub fn aggregate_remaining<K: Kernel>(&self, k: &K) -> Aggregate {
        k.aggregate(self.remaining())
    }

    /// Classifies every non-pegged index outside `interior` and partitions
    /// the arrays so that lower-bound indices form prefixes and upper-bound
    /// indices form suffixes. `below` ignores the upper class and `above`
    /// ignores the lower class. The partition is stable, so indices stay in
    /// ascending runs and later passes read the data arrays in order.
    ///
    /// With three or five sets, indices whose bound checks the bracket has
    /// made redundant are first moved out of `both` (and, with five sets,
    /// out of `below` and `above`) in the same pass.
    pub fn scan<K: Kernel>(&mut self, k: &K, classify: impl Fn(usize) -> Class) -> Scan {
        let Partition {
            inst,
            mode,
            bp,
            both,
            interior,
            below,
            above,
            interior_agg,
            lo,
            hi,
            scratch_mid: mid,
            scratch_up: up,
            ..
        } = self;
        let (a, l, u) = (inst.a(), inst.lower(), inst.upper());
        let (mu_l, mu_u) = (&bp.mu_l, &bp.mu_u);
        let (lo, hi) = (*lo, *hi);
        let (lo_set, hi_set) = (lo > f64::NEG_INFINITY, hi < f64::INFINITY);
        // mu_u_j <= lo: the upper check is redundant; mu_l_j >= hi: the lower one is
        let no_upper = |j: usize| lo_set && mu_u[j] <= lo;
        let no_lower = |j: usize| hi_set && mu_l[j] >= hi;
        let three = *mode != PegSets::Two && lo_set && hi_set;
        let five = *mode == PegSets::Five;
        let mut s = Scan::default();

        mid.clear();
        up.clear();
        let mut lt = 0usize;
        for i in 0..both.len() {
            let j = both[i];
            let ji = j as usize;
            if three && no_upper(ji) && no_lower(ji) {
                interior.push(j);
                interior_agg.add(k.terms(ji));
                continue;
            }
            if five {
                if no_upper(ji) {
                    below.push(j);
                    continue;
                }
                if no_lower(ji) {
                    above.push(j);
                    continue;
                }
            }
            match classify(ji) {
                Class::Lower => {
                    s.bound_usage += a[ji] * l[ji];
                    both[lt] = j;
                    lt += 1;
                }
                Class::Upper => {
                    s.bound_usage += a[ji] * u[ji];
                    up.push(j);
                }
                Class::Mid => mid.push(j),
            }
        }
        both.truncate(lt);
        both.extend_from_slice(mid);
        both.extend_from_slice(up);
        s.both_lower = lt;
        s.both_upper = lt + mid.len();
        s.n_lower = lt;
        s.n_upper = up.len();

        mid.clear();
        let mut lt = 0usize;
        for i in 0..below.len() {
            let j = below[i];
            let ji = j as usize;
            if no_lower(ji) {
                interior.push(j);
                interior_agg.add(k.terms(ji));
            } else if classify(ji) == Class::Lower {
                s.bound_usage += a[ji] * l[ji];
                below[lt] = j;
                lt += 1;
            } else {
                mid.push(j);
            }
        }
        below.truncate(lt);
        below.extend_from_slice(mid);
        s.below_lower = lt;
        s.n_lower += lt;

        up.clear();
        let mut keep = 0usize;
        for i in 0..above.len() {
            let j = above[i];
            let ji = j as usize;
            if no_upper(ji) {
                interior.push(j);
                interior_agg.add(k.terms(ji));
            } else if classify(ji) == Class::Upper {
                s.bound_usage += a[ji] * u[ji];
                up.push(j);
            } else {
                above[keep] = j;
                keep += 1;
            }
        }
        above.truncate(keep);
        above.extend_from_slice(up);
        s.above_upper = keep;
        s.n_upper += up.len();
        s
    }

    /// `sum a_j value(j)` over the scanned indices that are not at a bound.
    pub fn mid_usage(&self, s: &Scan, value: impl Fn(usize) -> f64) -> f64 {
        let a = self.inst.a();
        self.both[s.both_lower..s.both_upper]
            .iter()
            .chain(&self.below[s.below_lower..])
            .chain(&self.above[..s.above_upper])
            .map(|&j| a[j as usize] * value(j as usize))
            .sum()
    }

    /// `(sum_U a_j (value(j) - u_j), sum_L a_j (l_j - value(j)))`.
    pub fn excess_deficit(&self, s: &Scan, value: impl Fn(usize) -> f64) -> (f64, f64) {
        let (a, l, u) = (self.inst.a(), self.inst.lower(), self.inst.upper());
        let [lb, ll] = self.lower_slices(s);
        let [ub, uu] = self.upper_slices(s);
        let deficit = lb
            .iter()
            .chain(ll)
            .map(|&j| {
                let j = j as usize;
                a[j] * (l[j] - value(j))
            })
            .sum();
        let excess = ub
            .iter()
            .chain(uu)
            .map(|&j| {
                let j = j as usize;
                a[j] * (value(j) - u[j])
            })
            .sum();
        (excess, deficit)
    }

    pub fn lower_slices(&self, s: &Scan) -> [&[u32]; 2] {
        [&self.both[..s.both_lower], &self.below[..s.below_lower]]
    }

    pub fn upper_slices(&self, s: &Scan) -> [&[u32]; 2] {
        [&self.both[s.both_upper..], &self.above[s.above_upper..]]
    }

    pub fn view(&self) -> SetView<'_> {
        SetView {
            both: &self.both,
            interior: &self.interior,
            below: &self.below,
            above: &self.above,
            interior_agg: self.interior_agg,
            free_agg: self.free_agg,
        }
    }

    /// Fixes the lower region of the last scan at `l`.
    pub fn peg_lower<K: Kernel>(&mut self, k: &K, s: &Scan) {
        let (a, l) = (self.inst.a(), self.inst.lower());
        let mut used = 0.0;
        let mut terms = Aggregate::default();
        let track = self.free_agg.is_some();
        for &j in self.both[..s.both_lower].iter().chain(&self.below[..s.below_lower]) {
            let j = j as usize;
            self.x[j] = l[j];
            used += a[j] * l[j];
            if track {
                terms.add(k.terms(j));
            }
        }
        self.pegged_lower.extend_from_slice(&self.both[..s.both_lower]);
        self.pegged_lower.extend_from_slice(&self.below[..s.below_lower]);
        self.both.drain(..s.both_lower);
        self.below.drain(..s.below_lower);
        self.bk -= used;
        self.shrink_free(k, &terms);
    }

    /// Fixes the upper region of the last scan at `u`.
    pub fn peg_upper<K: Kernel>(&mut self, k: &K, s: &Scan) {
        let (a, u) = (self.inst.a(), self.inst.upper());
        let mut used = 0.0;
        let mut terms = Aggregate::default();
        let track = self.free_agg.is_some();
        for &j in self.both[s.both_upper..].iter().chain(&self.above[s.above_upper..]) {
            let j = j as usize;
            self.x[j] = u[j];
            used += a[j] * u[j];
            if track {
                terms.add(k.terms(j));
            }
        }
        self.pegged_upper.extend_from_slice(&self.both[s.both_upper..]);
        self.pegged_upper.extend_from_slice(&self.above[s.above_upper..]);
        self.both.truncate(s.both_upper);
        self.above.truncate(s.above_upper);
        self.bk -= used;
        self.shrink_free(k, &terms);
    }

    fn shrink_free<K: Kernel>(&mut self, k: &K, removed: &Aggregate) {
        let Some(agg) = self.free_agg else { return };
        let left = self.free_count();
        self.free_agg = Some(if removed.count >= left {
            self.aggregate_remaining(k)
        } else {
            let mut agg = agg;
            agg.s1 -= removed.s1;
            agg.s2 -= removed.s2;
            agg.count -= removed.count;
            agg
        });
    }

    /// `b` minus the resource used by pegged indices, summed with
    /// compensation.
    pub fn exact_bk(&self) -> f64 {
        let (a, l, u) = (self.inst.a(), self.inst.lower(), self.inst.upper());
        let mut s = Compensated::default();
        s.add(self.inst.b());
        for &j in &self.pegged_lower {
            s.add(-a[j as usize] * l[j as usize]);
        }
        for &j in &self.pegged_upper {
            s.add(-a[j as usize] * u[j as usize]);
        }
        s.value()
    }

    /// A multiplier consistent with every pegged index, used when nothing is
    /// left free: the midpoint of `[max mu_l over lower, min mu_u over upper]`
    /// intersected with the bracket.
    pub fn dual_from_pegged(&self) -> f64 {
        let lo = self
            .pegged_lower
            .iter()
            .map(|&j| self.bp.mu_l[j as usize])
            .fold(self.lo, f64::max);
        let hi = self
            .pegged_upper
            .iter()
            .map(|&j| self.bp.mu_u[j as usize])
            .fold(self.hi, f64::min);
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => lo,
            (false, true) => hi,
            (false, false) => 0.0,
        }
    }

    /// Fills `x` for every non-pegged index from `mu`.
    pub fn finish<K: Kernel>(&mut self, k: &K, mu: f64) -> Vec<f64> {
        let (l, u) = (self.inst.lower(), self.inst.upper());
        let rest: Vec<usize> = self.remaining().collect();
        for j in rest {
            self.x[j] = clamped(k, self.bp, l, u, j, mu);
        }
        std::mem::take(&mut self.x)
    }
}

/// For the inequality sense: the minimiser at `mu = 0`, if it respects the
/// resource limit.
pub(crate) fn step_zero<K: Kernel>(
    k: &K,
    inst: &ProblemInstance,
    bp: &Breakpoints,
) -> Option<Vec<f64>> {
    if inst.sense() != Sense::LessEqual {
        return None;
    }
    let (a, l, u) = (inst.a(), inst.lower(), inst.upper());
    let x: Vec<f64> = (0..inst.n()).map(|j| clamped(k, bp, l, u, j, 0.0)).collect();
    let used: Compensated = x.iter().zip(a).map(|(x, a)| x * a).collect();
    (used.value() <= inst.b()).then_some(x)
}
