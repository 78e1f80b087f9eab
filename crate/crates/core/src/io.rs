//! Plain-text instance files and CSV solution files.
//!
//! Instance file:
//!
//! ```text
//! nrap 1
//! family=quadratic n=3 sense=eq b=4.0000000000000000e0
//! <one row per index, space separated>
//! ```
//!
//! Row columns by family: quadratic `a w c l u`, stratified `a M rho l u`,
//! sampling `a c l u`, search `a m bparam l u`, negentropy `c l u`. Floats
//! are written with 17 significant digits, which round-trips every `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::problem::{Family, Params, ProblemInstance, Sense, Solution, Status};

pub const HEADER: &str = "nrap 1";

fn float(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").expect("writing to a String");
}

pub fn format_instance(inst: &ProblemInstance) -> String {
    let mut out = String::with_capacity(64 + inst.n() * 5 * 24);
    out.push_str(HEADER);
    out.push('\n');
    write!(
        out,
        "family={} n={} sense={} b=",
        inst.family(),
        inst.n(),
        inst.sense().name()
    )
    .expect("writing to a String");
    float(&mut out, inst.b());
    out.push('\n');

    let (a, l, u) = (inst.a(), inst.lower(), inst.upper());
    let cols: Vec<&[f64]> = match inst.params() {
        Params::Quadratic { w, c } => vec![a, w, c, l, u],
        Params::StratifiedSampling { population, rho } => vec![a, population, rho, l, u],
        Params::Sampling { c } => vec![a, c, l, u],
        Params::TheoryOfSearch { m, rate } => vec![a, m, rate, l, u],
        Params::NegativeEntropy { c } => vec![c, l, u],
    };
    for j in 0..inst.n() {
        for (i, col) in cols.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            float(&mut out, col[j]);
        }
        out.push('\n');
    }
    out
}

pub fn write_instance(inst: &ProblemInstance, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_instance(inst))?;
    Ok(())
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<ProblemInstance> {
    parse_instance(&fs::read_to_string(path)?)
}

fn parse_err<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        line,
        msg: msg.into(),
    })
}

fn parse_f64(line: usize, what: &str, s: &str) -> Result<f64> {
    s.parse::<f64>()
        .or_else(|_| parse_err(line, format!("bad {what} `{s}`")))
}

pub fn parse_instance(text: &str) -> Result<ProblemInstance> {
    let mut lines = text.lines().enumerate().map(|(i, s)| (i + 1, s.trim_end()));
    match lines.next() {
        Some((_, HEADER)) => {}
        Some((_, other)) => return Err(Error::Version(other.to_string())),
        None => return parse_err(1, "empty file"),
    }

    let Some((ln, meta)) = lines.next() else {
        return parse_err(2, "missing problem line");
    };
    let (mut family, mut n, mut sense, mut b) = (None, None, None, None);
    for tok in meta.split_whitespace() {
        let Some((key, val)) = tok.split_once('=') else {
            return parse_err(ln, format!("expected key=value, found `{tok}`"));
        };
        match key {
            "family" => family = Some(val.parse::<Family>().or_else(|e| parse_err(ln, e.to_string()))?),
            "n" => {
                n = Some(
                    val.parse::<usize>()
                        .or_else(|_| parse_err(ln, format!("bad n `{val}`")))?,
                )
            }
            "sense" => sense = Some(val.parse::<Sense>().or_else(|e| parse_err(ln, e.to_string()))?),
            "b" => b = Some(parse_f64(ln, "b", val)?),
            _ => return parse_err(ln, format!("unknown key `{key}`")),
        }
    }
    let (Some(family), Some(n), Some(sense), Some(b)) = (family, n, sense, b) else {
        return parse_err(ln, "problem line needs family, n, sense and b");
    };

    let width = match family {
        Family::Quadratic | Family::StratifiedSampling | Family::TheoryOfSearch => 5,
        Family::Sampling => 4,
        Family::NegativeEntropy => 3,
    };
    let mut cols = vec![Vec::with_capacity(n); width];
    for row in 0..n {
        let expected = row + 3;
        let Some((ln, text)) = lines.next() else {
            return parse_err(expected, format!("missing data row {} of {n}", row + 1));
        };
        let mut count = 0;
        for (i, tok) in text.split_whitespace().enumerate() {
            if i >= width {
                return parse_err(ln, format!("expected {width} values"));
            }
            cols[i].push(parse_f64(ln, "value", tok)?);
            count += 1;
        }
        if count != width {
            return parse_err(ln, format!("expected {width} values, found {count}"));
        }
    }
    for (ln, rest) in lines {
        if !rest.trim().is_empty() {
            return parse_err(ln, "unexpected data after the last row");
        }
    }

    let mut cols = cols.into_iter();
    let mut next = || cols.next().expect("column count matches width");
    let (a, params) = match family {
        Family::Quadratic => {
            let a = next();
            let (w, c) = (next(), next());
            (a, Params::Quadratic { w, c })
        }
        Family::StratifiedSampling => {
            let a = next();
            let (population, rho) = (next(), next());
            (a, Params::StratifiedSampling { population, rho })
        }
        Family::Sampling => {
            let a = next();
            (a, Params::Sampling { c: next() })
        }
        Family::TheoryOfSearch => {
            let a = next();
            let (m, rate) = (next(), next());
            (a, Params::TheoryOfSearch { m, rate })
        }
        Family::NegativeEntropy => (vec![1.0; n], Params::NegativeEntropy { c: next() }),
    };
    let (l, u) = (next(), next());
    ProblemInstance::new(sense, b, a, l, u, params)
}

pub fn format_solution(sol: &Solution, alg: &str) -> String {
    let mut out = String::with_capacity(64 + sol.x.len() * 32);
    writeln!(out, "# alg={alg}").expect("writing to a String");
    out.push_str("# mu=");
    float(&mut out, sol.mu);
    out.push('\n');
    writeln!(out, "# status={}", sol.status).expect("writing to a String");
    writeln!(out, "# iters={}", sol.iterations).expect("writing to a String");
    out.push_str("j,x\n");
    for (j, &x) in sol.x.iter().enumerate() {
        write!(out, "{j},").expect("writing to a String");
        float(&mut out, x);
        out.push('\n');
    }
    out
}

pub fn write_solution(sol: &Solution, alg: &str, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_solution(sol, alg))?;
    Ok(())
}

/// Reads a solution file and returns the algorithm name with the solution.
/// Elapsed time is not stored and comes back as zero.
pub fn read_solution(path: impl AsRef<Path>) -> Result<(String, Solution)> {
    parse_solution(&fs::read_to_string(path)?)
}

pub fn parse_solution(text: &str) -> Result<(String, Solution)> {
    let (mut alg, mut mu, mut status, mut iters) = (None, None, None, None);
    let mut x = Vec::new();
    let mut seen_header = false;
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        let line = line.trim_end();
        if let Some(meta) = line.strip_prefix('#') {
            let Some((key, val)) = meta.trim().split_once('=') else {
                return parse_err(ln, "expected `# key=value`");
            };
            match key {
                "alg" => alg = Some(val.to_string()),
                "mu" => mu = Some(parse_f64(ln, "mu", val)?),
                "status" => status = Some(val.parse::<Status>().or_else(|e| parse_err(ln, e.to_string()))?),
                "iters" => {
                    iters = Some(
                        val.parse::<usize>()
                            .or_else(|_| parse_err(ln, format!("bad iteration count `{val}`")))?,
                    )
                }
                _ => return parse_err(ln, format!("unknown key `{key}`")),
            }
        } else if !seen_header {
            if line != "j,x" {
                return parse_err(ln, "expected the `j,x` header");
            }
            seen_header = true;
        } else if !line.is_empty() {
            let Some((j, v)) = line.split_once(',') else {
                return parse_err(ln, "expected `j,x`");
            };
            let j: usize = j
                .parse()
                .or_else(|_| parse_err(ln, format!("bad index `{j}`")))?;
            if j != x.len() {
                return parse_err(ln, format!("expected index {}, found {j}", x.len()));
            }
            x.push(parse_f64(ln, "x", v)?);
        }
    }
    let (Some(alg), Some(mu), Some(status), Some(iterations)) = (alg, mu, status, iters) else {
        return parse_err(1, "missing one of alg, mu, status, iters");
    };
    Ok((
        alg,
        Solution {
            x,
            mu,
            status,
            iterations,
            elapsed: Duration::ZERO,
        },
    ))
}
