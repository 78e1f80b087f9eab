//! Seeded instance generator with a prescribed fraction of variables that
//! end strictly between their bounds.
//!
//! Construction: draw a pilot sample of parameter tuples and take the lower
//! median of their breakpoint midpoints as the target multiplier `mu*`;
//! assign each index a role (interior, lower or upper); rejection-sample each
//! index's tuple until its role holds at `mu*`; set `b` to the resource used
//! by the clamped solution at `mu*`.
//!
//! Everything that feeds the output goes through `libm` and a fixed draw
//! order so a `(family, n, h_frac, seed)` spec yields the same bits on every
//! platform. Uniform doubles take the top 53 bits of each xoshiro256**
//! output.

use rand_xoshiro::rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

use crate::error::{Error, Result};
use crate::problem::{Family, Params, ProblemInstance, Sense};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenSpec {
    pub family: Family,
    pub n: usize,
    /// Fraction of variables strictly between their bounds at the optimum.
    pub h_frac: f64,
    pub seed: u64,
    pub sense: Sense,
}

impl GenSpec {
    pub fn new(family: Family, n: usize, h_frac: f64, seed: u64) -> Self {
        GenSpec {
            family,
            n,
            h_frac,
            seed,
            sense: Sense::Equality,
        }
    }

    /// Number of interior variables the instance will have.
    pub fn interior_target(&self) -> usize {
        (self.h_frac * self.n as f64).round() as usize
    }
}

const PILOT: usize = 1000;
const MAX_TRIES: usize = 1000;
/// Distance from the bounds, relative to `u - l`, that a role must clear.
const MARGIN: f64 = 1e-6;
const SAMPLING_MIN_LOWER: f64 = 1e-6;

struct Rng(Xoshiro256StarStar);

impl Rng {
    /// Uniform on `[0, 1)`.
    fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi)`.
    fn closed_open(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Uniform on `(lo, hi]`.
    fn open_closed(&mut self, lo: f64, hi: f64) -> f64 {
        hi - (hi - lo) * self.unit()
    }

    fn shuffle<T>(&mut self, v: &mut [T]) {
        for i in (1..v.len()).rev() {
            let j = ((self.unit() * (i + 1) as f64) as usize).min(i);
            v.swap(i, j);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Role {
    Interior,
    Lower,
    Upper,
}

/// One index's data. `p` and `q` are the family parameters in file column
/// order (`w, c`; `M, rho`; `c`; `m, rate`; `c`).
#[derive(Clone, Copy, Debug)]
struct Tuple {
    a: f64,
    p: f64,
    q: f64,
    l: f64,
    u: f64,
}

struct Sampler {
    family: Family,
    /// Stratified: total population size.
    total: f64,
}

impl Sampler {
    fn draw(&self, rng: &mut Rng, population: f64) -> Tuple {
        match self.family {
            Family::Quadratic => {
                let a = rng.closed_open(1.0, 30.0);
                let w = rng.closed_open(1.0, 20.0);
                let c = rng.closed_open(1.0, 25.0);
                let l = rng.closed_open(0.0, 3.0);
                let u = rng.open_closed(3.0, 11.0);
                Tuple { a, p: w, q: c, l, u }
            }
            Family::StratifiedSampling => {
                let a = rng.closed_open(1.0, 30.0);
                let rho = rng.closed_open(1.0, 4.0);
                let l = rng.closed_open(1.0, 3.0);
                let u = rng.open_closed(3.0, 15.0);
                Tuple {
                    a,
                    p: population,
                    q: rho,
                    l,
                    u,
                }
            }
            Family::Sampling => {
                let a = rng.closed_open(1.0, 4.0);
                let c = rng.closed_open(5.0, 30.0);
                let l = rng.closed_open(0.0, 3.0).max(SAMPLING_MIN_LOWER);
                let u = rng.open_closed(3.0, 6.0);
                Tuple { a, p: c, q: 0.0, l, u }
            }
            Family::TheoryOfSearch => {
                let m = rng.closed_open(0.5, 8.0);
                let rate = rng.closed_open(0.1, 3.0);
                let a = rng.closed_open(1.0, 3.0);
                let l = rng.closed_open(0.0, 0.1);
                let u = rng.open_closed(0.1, 5.0);
                Tuple {
                    a,
                    p: m,
                    q: rate,
                    l,
                    u,
                }
            }
            Family::NegativeEntropy => {
                let c = rng.closed_open(50.0, 250.0);
                let l = rng.closed_open(20.0, 100.0);
                let mut u = rng.open_closed(30.0, 210.0);
                while u <= l {
                    u = rng.open_closed(30.0, 210.0);
                }
                Tuple {
                    a: 1.0,
                    p: c,
                    q: 0.0,
                    l,
                    u,
                }
            }
        }
    }

    /// Numerator `q_j` of `phi'_j(x) = -q_j / x^2` for the two sampling
    /// families.
    fn numer(&self, t: &Tuple) -> f64 {
        match self.family {
            Family::StratifiedSampling => t.p * t.q * t.q / (self.total - 1.0),
            _ => t.p,
        }
    }

    fn deriv(&self, t: &Tuple, x: f64) -> f64 {
        match self.family {
            Family::Quadratic => t.p * x - t.q,
            Family::StratifiedSampling | Family::Sampling => -self.numer(t) / (x * x),
            Family::TheoryOfSearch => -t.p * t.q * libm::exp(-t.q * x),
            Family::NegativeEntropy => libm::log(x / t.p),
        }
    }

    /// Unclamped root of `phi'(x) + mu a = 0`.
    fn interior(&self, t: &Tuple, mu: f64) -> f64 {
        match self.family {
            Family::Quadratic => (t.q - mu * t.a) / t.p,
            Family::StratifiedSampling | Family::Sampling => {
                libm::sqrt(self.numer(t) / (t.a * mu))
            }
            Family::TheoryOfSearch => (libm::log(t.p * t.q / t.a) - libm::log(mu)) / t.q,
            Family::NegativeEntropy => t.p * libm::exp(-mu),
        }
    }

    fn midpoint(&self, t: &Tuple) -> f64 {
        let mu_l = -self.deriv(t, t.l) / t.a;
        let mu_u = -self.deriv(t, t.u) / t.a;
        0.5 * (mu_l + mu_u)
    }

    fn holds(&self, t: &Tuple, role: Role, h: f64) -> bool {
        let m = MARGIN * (t.u - t.l);
        match role {
            Role::Interior => h >= t.l + m && h <= t.u - m,
            Role::Lower => h <= t.l - m,
            Role::Upper => h >= t.u + m,
        }
    }

    fn needs_positive_lower(&self) -> bool {
        matches!(
            self.family,
            Family::StratifiedSampling | Family::Sampling | Family::NegativeEntropy
        )
    }

    /// Moves the bounds of `t` just enough for `role` to hold.
    fn force(&self, t: &mut Tuple, role: Role, h: f64) {
        let w = t.u - t.l;
        match role {
            Role::Interior => {
                if h < t.l + MARGIN * w {
                    t.l = h - 0.01 * w;
                }
                if h > t.u - MARGIN * w {
                    t.u = h + 0.01 * w;
                }
            }
            Role::Lower => {
                t.l = h + 0.01 * w;
                if t.l >= t.u {
                    t.u = t.l + w;
                }
            }
            Role::Upper => {
                t.u = h - 0.01 * w;
                if t.l >= t.u {
                    t.l = t.u - w;
                }
            }
        }
        if self.needs_positive_lower() && t.l <= 0.0 {
            t.l = 0.5 * h.min(t.u);
        }
        if self.family == Family::Sampling {
            t.l = t.l.max(SAMPLING_MIN_LOWER);
        }
    }
}

/// Builds the instance described by `spec`.
pub fn generate(spec: &GenSpec) -> Result<ProblemInstance> {
    if spec.n == 0 {
        return Err(Error::Generation("n must be positive".into()));
    }
    if !(0.0..=1.0).contains(&spec.h_frac) {
        return Err(Error::Generation(format!(
            "h_frac = {} is outside [0, 1]",
            spec.h_frac
        )));
    }
    let n = spec.n;
    let mut rng = Rng(Xoshiro256StarStar::seed_from_u64(spec.seed));

    let population: Vec<f64> = if spec.family == Family::StratifiedSampling {
        (0..n).map(|_| rng.closed_open(5.0, 30.0)).collect()
    } else {
        Vec::new()
    };
    let sampler = Sampler {
        family: spec.family,
        total: population.iter().sum(),
    };
    let pop_at = |j: usize| population.get(j).copied().unwrap_or(0.0);

    let mut mids: Vec<f64> = (0..PILOT)
        .map(|i| {
            let t = sampler.draw(&mut rng, pop_at(i % n.max(1)));
            sampler.midpoint(&t)
        })
        .filter(|v| v.is_finite())
        .collect();
    let mut mu_star = crate::select::quickselect_median(&mut mids)
        .map_err(|_| Error::Generation("pilot sample produced no finite breakpoints".into()))?;
    if spec.family.positive_dual() && mu_star <= 0.0 {
        mu_star = f64::MIN_POSITIVE;
    }

    let n_int = spec.interior_target();
    let mut roles: Vec<Role> = (0..n)
        .map(|i| {
            if i < n_int {
                Role::Interior
            } else if (i - n_int) % 2 == 0 {
                Role::Lower
            } else {
                Role::Upper
            }
        })
        .collect();
    rng.shuffle(&mut roles);

    let mut tuples = Vec::with_capacity(n);
    for (j, &role) in roles.iter().enumerate() {
        let mut t = sampler.draw(&mut rng, pop_at(j));
        let mut h = sampler.interior(&t, mu_star);
        let mut tries = 1;
        while !sampler.holds(&t, role, h) && tries < MAX_TRIES {
            t = sampler.draw(&mut rng, pop_at(j));
            h = sampler.interior(&t, mu_star);
            tries += 1;
        }
        if !sampler.holds(&t, role, h) {
            sampler.force(&mut t, role, h);
            if !(t.l < t.u) || !sampler.holds(&t, role, h) {
                return Err(Error::Generation(format!(
                    "index {j} cannot take its {role:?} role at mu* = {mu_star}"
                )));
            }
        }
        tuples.push((t, role, h));
    }

    let mut b = 0.0;
    for (t, role, h) in &tuples {
        let x = match role {
            Role::Interior => *h,
            Role::Lower => t.l,
            Role::Upper => t.u,
        };
        b += t.a * x;
    }

    let col = |f: fn(&Tuple) -> f64| -> Vec<f64> { tuples.iter().map(|(t, _, _)| f(t)).collect() };
    let a = col(|t| t.a);
    let l = col(|t| t.l);
    let u = col(|t| t.u);
    let p = col(|t| t.p);
    let q = col(|t| t.q);
    let params = match spec.family {
        Family::Quadratic => Params::Quadratic { w: p, c: q },
        Family::StratifiedSampling => Params::StratifiedSampling {
            population: p,
            rho: q,
        },
        Family::Sampling => Params::Sampling { c: p },
        Family::TheoryOfSearch => Params::TheoryOfSearch { m: p, rate: q },
        Family::NegativeEntropy => Params::NegativeEntropy { c: p },
    };
    ProblemInstance::new(spec.sense, b, a, l, u, params)
        .map_err(|e| Error::Generation(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        for family in Family::ALL {
            let spec = GenSpec::new(family, 50, 0.5, 11);
            assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
            let other = GenSpec { seed: 12, ..spec };
            assert_ne!(generate(&spec).unwrap(), generate(&other).unwrap());
        }
    }

    #[test]
    fn parameter_ranges() {
        let inst = generate(&GenSpec::new(Family::Quadratic, 300, 0.3, 5)).unwrap();
        let Params::Quadratic { w, c } = inst.params() else {
            panic!()
        };
        assert!(inst.a().iter().all(|&a| (1.0..30.0).contains(&a)));
        assert!(w.iter().all(|&v| (1.0..20.0).contains(&v)));
        assert!(c.iter().all(|&v| (1.0..25.0).contains(&v)));

        let inst = generate(&GenSpec::new(Family::Sampling, 300, 0.0, 5)).unwrap();
        assert!(inst.lower().iter().all(|&l| l >= 1e-6));

        let inst = generate(&GenSpec::new(Family::NegativeEntropy, 300, 0.7, 5)).unwrap();
        assert!(inst.a().iter().all(|&a| a == 1.0));
        assert!(inst.lower().iter().zip(inst.upper()).all(|(l, u)| l < u));
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(generate(&GenSpec::new(Family::Quadratic, 0, 0.5, 1)).is_err());
        assert!(generate(&GenSpec::new(Family::Quadratic, 5, 1.5, 1)).is_err());
    }

    #[test]
    fn uniform_helpers_stay_in_range() {
        let mut rng = Rng(Xoshiro256StarStar::seed_from_u64(3));
        for _ in 0..10_000 {
            let v = rng.closed_open(2.0, 5.0);
            assert!((2.0..5.0).contains(&v));
            let v = rng.open_closed(2.0, 5.0);
            assert!(v > 2.0 && v <= 5.0);
        }
    }
}
