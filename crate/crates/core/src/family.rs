//! Closed forms per objective family.
//!
//! Every family admits a relaxed (unbounded) solution of the form
//! `sum_j a_j x_j(mu) = G(s1, s2, mu)` where `(s1, s2)` are sums of per-index
//! terms. Keeping those sums up to date makes evaluating and inverting the
//! relaxed usage O(1).

use crate::error::{Error, Result};

/// Running sums of per-index terms over some index set.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Aggregate {
    pub s1: f64,
    pub s2: f64,
    pub count: usize,
}

impl Aggregate {
    #[inline]
    pub fn add(&mut self, t: (f64, f64)) {
        self.s1 += t.0;
        self.s2 += t.1;
        self.count += 1;
    }

    #[inline]
    pub fn sub(&mut self, t: (f64, f64)) {
        self.s1 -= t.0;
        self.s2 -= t.1;
        self.count -= 1;
    }

    #[inline]
    pub fn merge(&mut self, other: &Aggregate) {
        self.s1 += other.s1;
        self.s2 += other.s2;
        self.count += other.count;
    }
}

/// Per-family closed forms. `interior` is the unclamped root of
/// `phi'_j(x) + mu a_j = 0`.
pub trait Kernel {
    fn deriv(&self, j: usize, x: f64) -> f64;
    fn interior(&self, j: usize, mu: f64) -> f64;
    /// `d interior / d mu`.
    fn slope(&self, j: usize, mu: f64) -> f64;
    fn terms(&self, j: usize) -> (f64, f64);
    /// `sum a_j interior(j, mu)` over the set summarised by `agg`.
    fn usage(&self, agg: &Aggregate, mu: f64) -> f64;
    /// The `mu` at which `usage(agg, mu) == bk`.
    fn inverse(&self, agg: &Aggregate, bk: f64) -> Result<f64>;
    /// Relaxed primal value of `j` for the set `agg` with resource `bk`,
    /// where `mu` is `inverse(agg, bk)`.
    #[inline]
    fn relaxed(&self, j: usize, _agg: &Aggregate, _bk: f64, mu: f64) -> f64 {
        self.interior(j, mu)
    }
    /// Whether the interior formula needs `mu > 0`.
    fn positive_dual(&self) -> bool;

    fn aggregate(&self, idx: impl IntoIterator<Item = usize>) -> Aggregate {
        let mut agg = Aggregate::default();
        for j in idx {
            agg.add(self.terms(j));
        }
        agg
    }
}

fn empty(agg: &Aggregate) -> Result<()> {
    if agg.count == 0 {
        Err(Error::Domain("relaxed problem over an empty index set".into()))
    } else {
        Ok(())
    }
}

fn positive_rhs(bk: f64) -> Result<()> {
    if bk > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("reduced resource {bk} must be positive")))
    }
}

pub struct QuadraticK<'a> {
    pub a: &'a [f64],
    pub w: &'a [f64],
    pub c: &'a [f64],
}

impl Kernel for QuadraticK<'_> {
    #[inline]
    fn deriv(&self, j: usize, x: f64) -> f64 {
        self.w[j] * x - self.c[j]
    }

    #[inline]
    fn interior(&self, j: usize, mu: f64) -> f64 {
        (self.c[j] - mu * self.a[j]) / self.w[j]
    }

    #[inline]
    fn slope(&self, j: usize, _mu: f64) -> f64 {
        -self.a[j] / self.w[j]
    }

    #[inline]
    fn terms(&self, j: usize) -> (f64, f64) {
        let (a, w) = (self.a[j], self.w[j]);
        (a * self.c[j] / w, a * a / w)
    }

    #[inline]
    fn usage(&self, agg: &Aggregate, mu: f64) -> f64 {
        agg.s1 - mu * agg.s2
    }

    fn inverse(&self, agg: &Aggregate, bk: f64) -> Result<f64> {
        empty(agg)?;
        Ok((agg.s1 - bk) / agg.s2)
    }

    fn positive_dual(&self) -> bool {
        false
    }
}

/// `phi'_j(x) = -q_j / x^2`: the sampling family and, with
/// `q_j = M_j rho_j^2 / (M - 1)`, stratified sampling.
pub struct InverseSquareK<'a> {
    pub a: &'a [f64],
    pub q: &'a [f64],
}

impl Kernel for InverseSquareK<'_> {
    #[inline]
    fn deriv(&self, j: usize, x: f64) -> f64 {
        -self.q[j] / (x * x)
    }

    #[inline]
    fn interior(&self, j: usize, mu: f64) -> f64 {
        (self.q[j] / (self.a[j] * mu)).sqrt()
    }

    #[inline]
    fn slope(&self, j: usize, mu: f64) -> f64 {
        -self.interior(j, mu) / (2.0 * mu)
    }

    #[inline]
    fn terms(&self, j: usize) -> (f64, f64) {
        ((self.a[j] * self.q[j]).sqrt(), 0.0)
    }

    #[inline]
    fn usage(&self, agg: &Aggregate, mu: f64) -> f64 {
        agg.s1 / mu.sqrt()
    }

    fn inverse(&self, agg: &Aggregate, bk: f64) -> Result<f64> {
        empty(agg)?;
        positive_rhs(bk)?;
        let r = agg.s1 / bk;
        Ok(r * r)
    }

    #[inline]
    fn relaxed(&self, j: usize, agg: &Aggregate, bk: f64, _mu: f64) -> f64 {
        (self.q[j] / self.a[j]).sqrt() * bk / agg.s1
    }

    fn positive_dual(&self) -> bool {
        true
    }
}

pub struct SearchK<'a> {
    pub a: &'a [f64],
    pub m: &'a [f64],
    pub rate: &'a [f64],
}

impl Kernel for SearchK<'_> {
    #[inline]
    fn deriv(&self, j: usize, x: f64) -> f64 {
        let r = self.rate[j];
        -self.m[j] * r * (-r * x).exp()
    }

    #[inline]
    fn interior(&self, j: usize, mu: f64) -> f64 {
        let r = self.rate[j];
        ((self.m[j] * r / self.a[j]).ln() - mu.ln()) / r
    }

    #[inline]
    fn slope(&self, j: usize, mu: f64) -> f64 {
        -1.0 / (self.rate[j] * mu)
    }

    #[inline]
    fn terms(&self, j: usize) -> (f64, f64) {
        let (a, r) = (self.a[j], self.rate[j]);
        let t2 = a / r;
        (t2 * (self.m[j] * r / a).ln(), t2)
    }

    #[inline]
    fn usage(&self, agg: &Aggregate, mu: f64) -> f64 {
        agg.s1 - agg.s2 * mu.ln()
    }

    fn inverse(&self, agg: &Aggregate, bk: f64) -> Result<f64> {
        empty(agg)?;
        Ok(((agg.s1 - bk) / agg.s2).exp())
    }

    fn positive_dual(&self) -> bool {
        true
    }
}

/// Negative entropy with `a_j = 1`.
pub struct EntropyK<'a> {
    pub c: &'a [f64],
}

impl Kernel for EntropyK<'_> {
    #[inline]
    fn deriv(&self, j: usize, x: f64) -> f64 {
        (x / self.c[j]).ln()
    }

    #[inline]
    fn interior(&self, j: usize, mu: f64) -> f64 {
        self.c[j] * (-mu).exp()
    }

    #[inline]
    fn slope(&self, j: usize, mu: f64) -> f64 {
        -self.interior(j, mu)
    }

    #[inline]
    fn terms(&self, j: usize) -> (f64, f64) {
        (self.c[j], 0.0)
    }

    #[inline]
    fn usage(&self, agg: &Aggregate, mu: f64) -> f64 {
        agg.s1 * (-mu).exp()
    }

    fn inverse(&self, agg: &Aggregate, bk: f64) -> Result<f64> {
        empty(agg)?;
        positive_rhs(bk)?;
        Ok((agg.s1 / bk).ln())
    }

    #[inline]
    fn relaxed(&self, j: usize, agg: &Aggregate, bk: f64, _mu: f64) -> f64 {
        self.c[j] * bk / agg.s1
    }

    fn positive_dual(&self) -> bool {
        false
    }
}

/// Binds `$k` to the kernel of `$inst` and evaluates `$body` once per family,
/// so the body is monomorphised for each kernel type.
macro_rules! dispatch {
    ($inst:expr, $k:ident => $body:expr) => {{
        let inst__: &$crate::problem::ProblemInstance = $inst;
        let a__ = inst__.a();
        match inst__.params() {
            $crate::problem::Params::Quadratic { w, c } => {
                let $k = $crate::family::QuadraticK { a: a__, w, c };
                $body
            }
            $crate::problem::Params::StratifiedSampling { .. } => {
                let $k = $crate::family::InverseSquareK {
                    a: a__,
                    q: inst__.stratified_numer(),
                };
                $body
            }
            $crate::problem::Params::Sampling { c } => {
                let $k = $crate::family::InverseSquareK { a: a__, q: c };
                $body
            }
            $crate::problem::Params::TheoryOfSearch { m, rate } => {
                let $k = $crate::family::SearchK { a: a__, m, rate };
                $body
            }
            $crate::problem::Params::NegativeEntropy { c } => {
                let $k = $crate::family::EntropyK { c };
                $body
            }
        }
    }};
}
pub(crate) use dispatch;

/// `mu` solving `sum_{j in free} a_j x_j(mu) = bk` with bounds relaxed.
pub fn interior_solve(
    inst: &crate::problem::ProblemInstance,
    free: &[usize],
    bk: f64,
) -> Result<f64> {
    dispatch!(inst, k => {
        let agg = k.aggregate(free.iter().copied());
        k.inverse(&agg, bk)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Params, ProblemInstance, Sense};
    use approx::assert_relative_eq;

    fn one(params: Params, a: f64, l: f64, u: f64, b: f64) -> ProblemInstance {
        ProblemInstance::new(Sense::Equality, b, vec![a], vec![l], vec![u], params).unwrap()
    }

    #[test]
    fn interior_solve_examples() {
        let q = ProblemInstance::new(
            Sense::Equality,
            1.0,
            vec![1.0; 2],
            vec![0.0; 2],
            vec![1.0; 2],
            Params::Quadratic {
                w: vec![1.0; 2],
                c: vec![0.0; 2],
            },
        )
        .unwrap();
        assert_relative_eq!(interior_solve(&q, &[0, 1], 1.0).unwrap(), -0.5);

        let e = one(Params::NegativeEntropy { c: vec![100.0] }, 1.0, 20.0, 200.0, 50.0);
        assert_relative_eq!(
            interior_solve(&e, &[0], 50.0).unwrap(),
            2f64.ln(),
            max_relative = 1e-15
        );

        let s = one(
            Params::TheoryOfSearch {
                m: vec![std::f64::consts::E],
                rate: vec![1.0],
            },
            1.0,
            0.0,
            5.0,
            1.0,
        );
        assert_relative_eq!(interior_solve(&s, &[0], 1.0).unwrap(), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn interior_solve_domain_errors() {
        let s = one(Params::Sampling { c: vec![4.0] }, 1.0, 0.0, 5.0, 1.0);
        assert!(interior_solve(&s, &[0], 0.0).is_err());
        assert!(interior_solve(&s, &[], 1.0).is_err());
        assert_relative_eq!(interior_solve(&s, &[0], 1.0).unwrap(), 4.0);
    }

    #[test]
    fn relaxed_shortcuts_agree_with_dual_route() {
        let e = ProblemInstance::new(
            Sense::Equality,
            100.0,
            vec![1.0; 2],
            vec![20.0; 2],
            vec![200.0; 2],
            Params::NegativeEntropy {
                c: vec![100.0, 100.0],
            },
        )
        .unwrap();
        dispatch!(&e, k => {
            let agg = k.aggregate(0..2);
            let mu = k.inverse(&agg, 100.0).unwrap();
            for j in 0..2 {
                assert_relative_eq!(k.relaxed(j, &agg, 100.0, mu), 50.0, max_relative = 1e-15);
                assert_relative_eq!(k.interior(j, mu), 50.0, max_relative = 1e-15);
            }
        });

        let s = ProblemInstance::new(
            Sense::Equality,
            5.0,
            vec![1.0, 3.0],
            vec![0.1; 2],
            vec![10.0; 2],
            Params::Sampling { c: vec![4.0, 9.0] },
        )
        .unwrap();
        dispatch!(&s, k => {
            let agg = k.aggregate(0..2);
            let mu = k.inverse(&agg, 5.0).unwrap();
            for j in 0..2 {
                assert_relative_eq!(k.relaxed(j, &agg, 5.0, mu), k.interior(j, mu), max_relative = 1e-14);
            }
            assert_relative_eq!(k.usage(&agg, mu), 5.0, max_relative = 1e-14);
        });
    }
}
