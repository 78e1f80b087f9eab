//! Problem model for the separable convex resource allocation problem
//!
//! ```text
//!     minimize    sum_j phi_j(x_j)
//!     subject to  sum_j a_j x_j  = b     (or <= b)
//!                 l_j <= x_j <= u_j
//! ```
//!
//! with one of five objective families. Every family is strictly convex on its
//! domain, and with `a_j > 0` the map `mu -> x_j(mu)` obtained by minimising the
//! Lagrangian is nonincreasing, so every variable has a pair of breakpoints
//! `mu_u_j <= mu_l_j` outside of which it sits at a bound.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::family::{dispatch, Kernel};
use crate::sum::Compensated;

/// Objective family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    /// `phi_j(x) = w_j/2 x^2 - c_j x`
    Quadratic,
    /// `phi_j(x) = omega_j (M - x) rho_j^2 / ((M - 1) x)`
    StratifiedSampling,
    /// `phi_j(x) = c_j / x`
    Sampling,
    /// `phi_j(x) = m_j (exp(-b_j x) - 1)`
    TheoryOfSearch,
    /// `phi_j(x) = x (ln(x / c_j) - 1)`
    NegativeEntropy,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Quadratic,
        Family::StratifiedSampling,
        Family::Sampling,
        Family::TheoryOfSearch,
        Family::NegativeEntropy,
    ];

    /// Short name used in files and on the command line.
    pub fn name(self) -> &'static str {
        match self {
            Family::Quadratic => "quadratic",
            Family::StratifiedSampling => "stratified",
            Family::Sampling => "sampling",
            Family::TheoryOfSearch => "search",
            Family::NegativeEntropy => "negentropy",
        }
    }

    /// Whether the interior map `x_j(mu)` is only defined for `mu > 0`.
    pub fn positive_dual(self) -> bool {
        matches!(
            self,
            Family::StratifiedSampling | Family::Sampling | Family::TheoryOfSearch
        )
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidInstance(format!("unknown family `{s}`")))
    }
}

/// Sense of the resource constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sense {
    Equality,
    LessEqual,
}

impl Sense {
    pub fn name(self) -> &'static str {
        match self {
            Sense::Equality => "eq",
            Sense::LessEqual => "le",
        }
    }
}

impl FromStr for Sense {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eq" => Ok(Sense::Equality),
            "le" => Ok(Sense::LessEqual),
            _ => Err(Error::InvalidInstance(format!("unknown sense `{s}`"))),
        }
    }
}

/// Per-index objective parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum Params {
    Quadratic { w: Vec<f64>, c: Vec<f64> },
    /// Stratum sizes `M_j` and variance estimates `rho_j`.
    StratifiedSampling { population: Vec<f64>, rho: Vec<f64> },
    Sampling { c: Vec<f64> },
    /// Detection weights `m_j` and rates `b_j`.
    TheoryOfSearch { m: Vec<f64>, rate: Vec<f64> },
    NegativeEntropy { c: Vec<f64> },
}

impl Params {
    pub fn family(&self) -> Family {
        match self {
            Params::Quadratic { .. } => Family::Quadratic,
            Params::StratifiedSampling { .. } => Family::StratifiedSampling,
            Params::Sampling { .. } => Family::Sampling,
            Params::TheoryOfSearch { .. } => Family::TheoryOfSearch,
            Params::NegativeEntropy { .. } => Family::NegativeEntropy,
        }
    }

    fn columns(&self) -> Vec<&[f64]> {
        match self {
            Params::Quadratic { w, c } => vec![w, c],
            Params::StratifiedSampling { population, rho } => vec![population, rho],
            Params::Sampling { c } => vec![c],
            Params::TheoryOfSearch { m, rate } => vec![m, rate],
            Params::NegativeEntropy { c } => vec![c],
        }
    }
}

/// An immutable, validated problem instance.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemInstance {
    sense: Sense,
    b: f64,
    a: Vec<f64>,
    l: Vec<f64>,
    u: Vec<f64>,
    params: Params,
    /// Stratified sampling only: `q_j = M_j rho_j^2 / (M - 1)` so that
    /// `phi_j(x) = q_j / x - q_j / M`.
    numer: Vec<f64>,
    total_population: f64,
}

impl ProblemInstance {
    /// Builds an instance and checks every structural invariant: matching
    /// lengths, `l_j < u_j`, `a_j > 0`, family positivity rules and
    /// feasibility of the resource constraint.
    pub fn new(
        sense: Sense,
        b: f64,
        a: Vec<f64>,
        l: Vec<f64>,
        u: Vec<f64>,
        params: Params,
    ) -> Result<Self> {
        let n = a.len();
        fn bad<T>(msg: String) -> Result<T> {
            Err(Error::InvalidInstance(msg))
        }
        if n == 0 {
            return bad("instance has no variables".into());
        }
        if l.len() != n || u.len() != n || params.columns().iter().any(|c| c.len() != n) {
            return bad("column lengths differ".into());
        }
        if !b.is_finite() {
            return bad(format!("right-hand side {b} is not finite"));
        }
        let family = params.family();
        for j in 0..n {
            if !(a[j].is_finite() && a[j] > 0.0) {
                return bad(format!("a[{j}] = {} must be positive", a[j]));
            }
            if !(l[j].is_finite() && u[j].is_finite() && l[j] < u[j]) {
                return bad(format!("bounds [{}, {}] at {j} are not ordered", l[j], u[j]));
            }
        }
        let positive = |name: &str, v: &[f64]| -> Result<()> {
            match v.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
                Some(j) => bad(format!("{name}[{j}] = {} must be positive", v[j])),
                None => Ok(()),
            }
        };
        match &params {
            Params::Quadratic { w, c } => {
                positive("w", w)?;
                if c.iter().any(|v| !v.is_finite()) {
                    return bad("c must be finite".into());
                }
            }
            Params::StratifiedSampling { population, rho } => {
                positive("M", population)?;
                positive("rho", rho)?;
                positive("l", &l)?;
            }
            Params::Sampling { c } => {
                positive("c", c)?;
                if l.iter().any(|v| *v < 0.0) {
                    return bad("sampling lower bounds must be nonnegative".into());
                }
            }
            Params::TheoryOfSearch { m, rate } => {
                positive("m", m)?;
                positive("rate", rate)?;
            }
            Params::NegativeEntropy { c } => {
                positive("c", c)?;
                positive("l", &l)?;
                if a.iter().any(|v| *v != 1.0) {
                    return bad("negative entropy instances use a_j = 1".into());
                }
            }
        }

        let (numer, total_population) = match &params {
            Params::StratifiedSampling { population, rho } => {
                let total: f64 = population.iter().sum();
                if total <= 1.0 {
                    return bad("total population must exceed one".into());
                }
                let numer = population
                    .iter()
                    .zip(rho)
                    .map(|(m, r)| m * r * r / (total - 1.0))
                    .collect();
                (numer, total)
            }
            _ => (Vec::new(), 0.0),
        };

        let lo: f64 = a.iter().zip(&l).map(|(a, l)| a * l).sum();
        let hi: f64 = a.iter().zip(&u).map(|(a, u)| a * u).sum();
        let slack = 1e-12 * lo.abs().max(hi.abs()).max(1.0);
        if b < lo - slack {
            return bad(format!("b = {b} is below the smallest attainable usage {lo}"));
        }
        if sense == Sense::Equality && b > hi + slack {
            return bad(format!("b = {b} exceeds the largest attainable usage {hi}"));
        }
        if family == Family::NegativeEntropy && l.iter().any(|v| *v <= 0.0) {
            return bad("negative entropy needs positive lower bounds".into());
        }

        Ok(ProblemInstance {
            sense,
            b,
            a,
            l,
            u,
            params,
            numer,
            total_population,
        })
    }

    pub fn family(&self) -> Family {
        self.params.family()
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn lower(&self) -> &[f64] {
        &self.l
    }

    pub fn upper(&self) -> &[f64] {
        &self.u
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub(crate) fn stratified_numer(&self) -> &[f64] {
        &self.numer
    }

    /// Same data with a different constraint sense.
    pub fn with_sense(&self, sense: Sense) -> Result<Self> {
        Self::new(
            sense,
            self.b,
            self.a.clone(),
            self.l.clone(),
            self.u.clone(),
            self.params.clone(),
        )
    }

    /// Same data with a different right-hand side.
    pub fn with_rhs(&self, b: f64) -> Result<Self> {
        Self::new(
            self.sense,
            b,
            self.a.clone(),
            self.l.clone(),
            self.u.clone(),
            self.params.clone(),
        )
    }

    /// `phi'_j(x)`.
    pub fn derivative(&self, j: usize, x: f64) -> f64 {
        dispatch!(self, k => k.deriv(j, x))
    }
}

/// Dual values at which each variable leaves its bounds:
/// `x_j(mu) = l_j` for `mu >= mu_l[j]`, `x_j(mu) = u_j` for `mu <= mu_u[j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Breakpoints {
    pub mu_l: Vec<f64>,
    pub mu_u: Vec<f64>,
}

/// `mu_l_j = -phi'_j(l_j)/a_j`, `mu_u_j = -phi'_j(u_j)/a_j`.
///
/// A sampling variable with `l_j = 0` gets `mu_l_j = +inf`: the dual test
/// never pegs it to its lower bound.
pub fn compute_breakpoints(inst: &ProblemInstance) -> Breakpoints {
    dispatch!(inst, k => breakpoints_with(&k, inst))
}

pub(crate) fn breakpoints_with<K: Kernel>(k: &K, inst: &ProblemInstance) -> Breakpoints {
    let (a, l, u) = (inst.a(), inst.lower(), inst.upper());
    let n = inst.n();
    let mut mu_l = Vec::with_capacity(n);
    let mut mu_u = Vec::with_capacity(n);
    for j in 0..n {
        mu_l.push(-k.deriv(j, l[j]) / a[j]);
        mu_u.push(-k.deriv(j, u[j]) / a[j]);
    }
    Breakpoints { mu_l, mu_u }
}

/// Minimiser of the Lagrangian term `phi_j(x) + mu a_j x` over `[l_j, u_j]`.
pub fn primal_from_dual(inst: &ProblemInstance, mu: f64, j: usize) -> Result<f64> {
    dispatch!(inst, k => {
        let a = inst.a()[j];
        let (l, u) = (inst.lower()[j], inst.upper()[j]);
        let mu_l = -k.deriv(j, l) / a;
        let mu_u = -k.deriv(j, u) / a;
        if mu >= mu_l {
            Ok(l)
        } else if mu <= mu_u {
            Ok(u)
        } else {
            let x = k.interior(j, mu);
            if x.is_finite() {
                Ok(x.clamp(l, u))
            } else {
                Err(Error::Domain(format!(
                    "interior formula undefined at mu = {mu} for index {j}"
                )))
            }
        }
    })
}

/// Clamped primal value using precomputed breakpoints.
#[inline]
pub(crate) fn clamped<K: Kernel>(
    k: &K,
    bp: &Breakpoints,
    l: &[f64],
    u: &[f64],
    j: usize,
    mu: f64,
) -> f64 {
    if mu >= bp.mu_l[j] {
        l[j]
    } else if mu <= bp.mu_u[j] {
        u[j]
    } else {
        k.interior(j, mu).clamp(l[j], u[j])
    }
}

/// Residuals of the optimality conditions at `(x, mu)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KktReport {
    pub feasibility_residual: f64,
    pub stationarity_residual: f64,
    pub complementarity_residual: f64,
    pub sign_violation: f64,
    pub max_residual: f64,
}

impl KktReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual <= tol
    }

    /// Pass/fail with the feasibility residual measured relative to
    /// `max(1, |b|)` and every other residual absolute.
    pub fn passes_scaled(&self, tol: f64, b: f64) -> bool {
        self.feasibility_residual <= tol * b.abs().max(1.0)
            && self.stationarity_residual <= tol
            && self.complementarity_residual <= tol * b.abs().max(1.0)
            && self.sign_violation <= tol
    }
}

/// Width of the band, relative to `u_j - l_j`, in which a value is treated as
/// sitting on a bound.
pub const BOUND_BAND: f64 = 1e-12;

/// Optimality residuals at `(x, mu)`.
///
/// For each `j` the stationarity defect is one-sided at a bound and two-sided
/// in the interior, scaled by `max(1, |phi'_j(x_j)|)`. A value outside
/// `[l_j, u_j]` or a non-finite value makes the defect infinite. For the
/// inequality sense the feasibility residual counts only violation, since
/// slack is allowed when `mu = 0`.
pub fn kkt_residual(inst: &ProblemInstance, x: &[f64], mu: f64) -> KktReport {
    let (a, l, u) = (inst.a(), inst.lower(), inst.upper());
    let mut stationarity = 0.0f64;
    let mut usage = Compensated::default();
    for j in 0..inst.n().min(x.len()) {
        let xj = x[j];
        usage.add(a[j] * xj);
        if !xj.is_finite() || xj < l[j] || xj > u[j] || !mu.is_finite() {
            stationarity = f64::INFINITY;
            continue;
        }
        let d = inst.derivative(j, xj);
        let g = d + mu * a[j];
        let scale = d.abs().max(1.0);
        let band = BOUND_BAND * (u[j] - l[j]);
        let defect = if xj <= l[j] + band {
            (-g).max(0.0)
        } else if xj >= u[j] - band {
            g.max(0.0)
        } else {
            g.abs()
        };
        let defect = if defect.is_nan() { f64::INFINITY } else { defect / scale };
        stationarity = stationarity.max(defect);
    }
    if x.len() != inst.n() {
        stationarity = f64::INFINITY;
    }
    let gap = usage.value() - inst.b();
    let (feasibility, complementarity, sign) = match inst.sense() {
        Sense::Equality => (gap.abs(), 0.0, 0.0),
        Sense::LessEqual => (gap.max(0.0), (mu * gap).abs(), (-mu).max(0.0)),
    };
    let feasibility = if feasibility.is_nan() { f64::INFINITY } else { feasibility };
    KktReport {
        feasibility_residual: feasibility,
        stationarity_residual: stationarity,
        complementarity_residual: complementarity,
        sign_violation: sign,
        max_residual: feasibility.max(stationarity).max(complementarity).max(sign),
    }
}

/// `sum_j phi_j(x_j)`.
pub fn eval_objective(inst: &ProblemInstance, x: &[f64]) -> Result<f64> {
    if x.len() != inst.n() {
        return Err(Error::Domain(format!(
            "expected {} values, got {}",
            inst.n(),
            x.len()
        )));
    }
    let need_positive = |j: usize, v: f64| {
        if v > 0.0 {
            Ok(())
        } else {
            Err(Error::Domain(format!("x[{j}] = {v} must be positive")))
        }
    };
    let mut total = Compensated::default();
    for (j, &v) in x.iter().enumerate() {
        let term = match inst.params() {
            Params::Quadratic { w, c } => 0.5 * w[j] * v * v - c[j] * v,
            Params::StratifiedSampling { .. } => {
                need_positive(j, v)?;
                let q = inst.numer[j];
                q / v - q / inst.total_population
            }
            Params::Sampling { c } => {
                need_positive(j, v)?;
                c[j] / v
            }
            Params::TheoryOfSearch { m, rate } => m[j] * ((-rate[j] * v).exp() - 1.0),
            Params::NegativeEntropy { c } => {
                need_positive(j, v)?;
                v * ((v / c[j]).ln() - 1.0)
            }
        };
        total.add(term);
    }
    Ok(total.value())
}

/// Outcome classification of a solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    Optimal,
    Approximate,
    Failed,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::Approximate => "approximate",
            Status::Failed => "failed",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Status {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimal" => Ok(Status::Optimal),
            "approximate" => Ok(Status::Approximate),
            "failed" => Ok(Status::Failed),
            _ => Err(Error::InvalidInstance(format!("unknown status `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub mu: f64,
    pub status: Status,
    pub iterations: usize,
    pub elapsed: Duration,
}
