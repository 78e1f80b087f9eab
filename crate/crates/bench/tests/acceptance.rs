//! Acceptance run: one PASS/FAIL line per criterion, then a nonzero exit if
//! any hard criterion failed.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nrap_bench::{
    performance_profile, ratios, run_bench, scaling_fit, BenchConfig, BenchMatrix, BenchRecord,
};
use nrap_core::io::{format_instance, format_solution, parse_instance, parse_solution};
use nrap_core::relaxation::{decide_explicit, decide_implicit};
use nrap_core::{
    bisection_solve, generate, interior_count, solve, solve_breakpoint, solve_nz,
    solve_relaxation_observed, verify, Algorithm, BreakpointVariant, Family, GenSpec,
    IterationEvent, NzConfig, OracleConfig, RelaxVariant, SolveObserver, Status,
};

const GRID_SIZES: [usize; 3] = [10, 100, 10_000];
const GRID_H: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
const GRID_SEEDS: u64 = 20;

const X_TOL: f64 = 1e-7;
const FEAS_TOL: f64 = 1e-8;
const KKT_TOL: f64 = 1e-7;
const IDENTITY_TOL: f64 = 1e-9;
const IDENTITY_SAMPLES: usize = 1000;
const NZ_EPS: f64 = 0.01;

const SCALING_SIZES: [usize; 5] = [50_000, 100_000, 200_000, 500_000, 1_000_000];
const SCALING_SEEDS: u64 = 5;
const SLOPE_RANGE: (f64, f64) = (0.7, 1.3);
const FASTEST_SHARE: f64 = 0.8;
const FIVE_SET_SHARE: f64 = 0.7;

struct Report {
    hard_failures: usize,
}

impl Report {
    fn line(&mut self, id: &str, name: &str, pass: bool, soft: bool, detail: String, took: Duration) {
        let tag = match (pass, soft) {
            (true, _) => "PASS",
            (false, true) => "FAIL (soft)",
            (false, false) => "FAIL",
        };
        if !pass && !soft {
            self.hard_failures += 1;
        }
        println!("[{tag}] {id} {name}: {detail} ({:.1}s)", took.as_secs_f64());
    }
}

/// Logs `(delta - bk, deficit - excess, scale, decisions agree)` per event.
#[derive(Default)]
struct IdentityLog {
    rows: Vec<(f64, f64, f64, bool)>,
}

impl SolveObserver for IdentityLog {
    fn wants_both_evaluations(&self) -> bool {
        true
    }

    fn on_iteration(&mut self, e: &IterationEvent<'_>) {
        if let (Some(delta), Some((excess, deficit))) = (e.delta, e.excess_deficit) {
            let scale = 1f64.max(e.bk.abs()).max(delta.abs()).max(excess + deficit);
            let agree = decide_explicit(delta, e.bk) == decide_implicit(excess, deficit, e.bk);
            self.rows.push((delta - e.bk, deficit - excess, scale, agree));
        }
    }
}

#[derive(Default)]
struct GridStats {
    solves: usize,
    solve_failures: Vec<String>,
    worst_x: f64,
    worst_feas: f64,
    worst_kkt: f64,
    instances: usize,
    h_mismatches: Vec<String>,
    identity: Vec<(f64, f64, f64, bool)>,
    mb_runs: usize,
    mb_over: Vec<String>,
    nz_approx: usize,
    nz_contract_broken: Vec<String>,
    nz_failed: Vec<GenSpec>,
}

fn grid_pass() -> GridStats {
    let mut st = GridStats::default();
    for family in Family::ALL {
        for n in GRID_SIZES {
            for h in GRID_H {
                for seed in 0..GRID_SEEDS {
                    let spec = GenSpec::new(family, n, h, seed);
                    let inst = match generate(&spec) {
                        Ok(inst) => inst,
                        Err(e) => {
                            st.h_mismatches.push(format!("{spec:?}: {e}"));
                            st.solve_failures.push(format!("{spec:?}: {e}"));
                            continue;
                        }
                    };
                    st.instances += 1;
                    let oracle = bisection_solve(&inst, OracleConfig::default());
                    let h_count = interior_count(&inst, &oracle.x);
                    if h_count != spec.interior_target() {
                        st.h_mismatches.push(format!(
                            "{spec:?}: |H| = {h_count}, want {}",
                            spec.interior_target()
                        ));
                    }

                    let sup = oracle.x.iter().fold(1.0f64, |m, x| m.max(x.abs()));
                    let feas_scale = inst.b().abs().max(1.0);
                    for alg in Algorithm::exact() {
                        let sol = solve(&inst, alg);
                        st.solves += 1;
                        let err = sol
                            .x
                            .iter()
                            .zip(&oracle.x)
                            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
                            / sup;
                        let rep = verify(&inst, &sol);
                        let feas = rep.feasibility_residual / feas_scale;
                        st.worst_x = st.worst_x.max(err);
                        st.worst_feas = st.worst_feas.max(feas);
                        st.worst_kkt = st.worst_kkt.max(rep.max_residual);
                        if sol.status != Status::Optimal
                            || !(err <= X_TOL && feas <= FEAS_TOL && rep.max_residual <= KKT_TOL)
                        {
                            st.solve_failures.push(format!(
                                "{alg} on {spec:?}: status {}, x err {err:e}, feas {feas:e}, kkt {:e}",
                                sol.status, rep.max_residual
                            ));
                        }
                    }

                    let limit = (2.0 * n as f64).log2().ceil() as usize + 1;
                    for v in BreakpointVariant::ALL {
                        let sol = solve_breakpoint(&inst, v);
                        st.mb_runs += 1;
                        if sol.iterations > limit {
                            st.mb_over.push(format!(
                                "{} on {spec:?}: {} > {limit}",
                                v.name(),
                                sol.iterations
                            ));
                        }
                    }

                    for v in RelaxVariant::ALL {
                        let mut log = IdentityLog::default();
                        solve_relaxation_observed(&inst, v, &mut log);
                        st.identity.extend(log.rows);
                    }

                    let (sol, _) = solve_nz(&inst, &NzConfig::default());
                    match sol.status {
                        Status::Approximate => {
                            st.nz_approx += 1;
                            let used: f64 = inst.a().iter().zip(&sol.x).map(|(a, x)| a * x).sum();
                            let rel = (used / inst.b() - 1.0).abs();
                            let inside = sol
                                .x
                                .iter()
                                .enumerate()
                                .all(|(j, &x)| x >= inst.lower()[j] && x <= inst.upper()[j]);
                            if !(rel < NZ_EPS && inside) {
                                st.nz_contract_broken
                                    .push(format!("{spec:?}: residual {rel:e}, in bounds {inside}"));
                            }
                        }
                        _ => st.nz_failed.push(spec),
                    }
                }
            }
        }
    }
    st
}

/// Evenly spaced picks, so the sample is fixed and spans every instance.
fn sample<T: Copy>(all: &[T], k: usize) -> Vec<T> {
    if all.len() <= k {
        return all.to_vec();
    }
    (0..k).map(|i| all[i * all.len() / k]).collect()
}

fn first(v: &[String]) -> String {
    v.first().map(|s| format!("; first: {s}")).unwrap_or_default()
}

fn mean_times(records: &[BenchRecord]) -> BTreeMap<(usize, usize, u64), BTreeMap<Algorithm, Option<f64>>> {
    let mut acc: BTreeMap<_, BTreeMap<Algorithm, (f64, usize, bool)>> = BTreeMap::new();
    for r in records {
        let key = (r.family as usize, r.n, r.seed);
        let e = acc.entry(key).or_default().entry(r.alg).or_insert((0.0, 0, false));
        e.0 += r.time_ns as f64;
        e.1 += 1;
        e.2 |= r.status == Status::Failed;
    }
    acc.into_iter()
        .map(|(k, row)| {
            let row = row
                .into_iter()
                .map(|(a, (s, c, f))| (a, (!f).then(|| s / c as f64)))
                .collect();
            (k, row)
        })
        .collect()
}

/// Share of problems on which `a` is strictly faster than each of `others`.
fn share_fastest(times: &BTreeMap<(usize, usize, u64), BTreeMap<Algorithm, Option<f64>>>, a: Algorithm, others: &[Algorithm]) -> f64 {
    let wins = times
        .values()
        .filter(|row| {
            let Some(Some(ta)) = row.get(&a) else { return false };
            others
                .iter()
                .all(|o| row.get(o).copied().flatten().map_or(true, |to| *ta < to))
        })
        .count();
    wins as f64 / times.len() as f64
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

fn main() -> ExitCode {
    let mut report = Report { hard_failures: 0 };
    let mb5 = Algorithm::Breakpoint(BreakpointVariant::Mb5);
    let mb2 = Algorithm::Breakpoint(BreakpointVariant::Mb2);
    let dbr5 = Algorithm::Relaxation(RelaxVariant::Dbr5);
    let dbr2 = Algorithm::Relaxation(RelaxVariant::Dbr2);

    let t = Instant::now();
    let st = grid_pass();
    let grid_time = t.elapsed();

    report.line(
        "1",
        "oracle equivalence",
        st.solve_failures.is_empty() && grid_time <= Duration::from_secs(600),
        false,
        format!(
            "{} solves on {} instances, {} out of tolerance; worst x {:.2e}, feas {:.2e}, kkt {:.2e}{}",
            st.solves,
            st.instances,
            st.solve_failures.len(),
            st.worst_x,
            st.worst_feas,
            st.worst_kkt,
            first(&st.solve_failures)
        ),
        grid_time,
    );

    report.line(
        "2",
        "interior-fraction control",
        st.h_mismatches.is_empty(),
        false,
        format!(
            "{} of {} instances have |H| = round(h n){}",
            st.instances - st.h_mismatches.len(),
            st.instances,
            first(&st.h_mismatches)
        ),
        Duration::ZERO,
    );

    let picked = sample(&st.identity, IDENTITY_SAMPLES);
    let worst = picked
        .iter()
        .map(|&(lhs, rhs, scale, _)| (lhs - rhs).abs() / scale)
        .fold(0.0f64, f64::max);
    let agree = picked.iter().filter(|r| r.3).count();
    let all_agree = st.identity.iter().filter(|r| r.3).count();
    report.line(
        "3",
        "implicit/explicit equivalence",
        picked.len() >= IDENTITY_SAMPLES && worst <= IDENTITY_TOL && agree == picked.len(),
        false,
        format!(
            "{} sampled of {} logged iterations; max |(delta - bk) - (deficit - excess)| / scale = {worst:.2e}; \
             decisions agree on {agree}/{} sampled, {all_agree}/{} logged",
            picked.len(),
            st.identity.len(),
            picked.len(),
            st.identity.len()
        ),
        Duration::ZERO,
    );

    report.line(
        "4",
        "breakpoint halving",
        st.mb_over.is_empty(),
        false,
        format!(
            "{} of {} MB runs within ceil(log2(2n)) + 1 iterations{}",
            st.mb_runs - st.mb_over.len(),
            st.mb_runs,
            first(&st.mb_over)
        ),
        Duration::ZERO,
    );

    let t = Instant::now();
    let matrix = BenchMatrix {
        families: vec![Family::Quadratic],
        sizes: SCALING_SIZES.to_vec(),
        h_fracs: vec![0.5],
        seeds: (0..SCALING_SEEDS).collect(),
        algs: vec![mb5, dbr5],
    };
    let cfg = BenchConfig {
        reps: 3,
        threads: Some(1),
        ..Default::default()
    };
    match run_bench(&matrix, &cfg) {
        Ok(records) => {
            let slopes: Vec<(Algorithm, f64)> = [mb5, dbr5]
                .into_iter()
                .map(|a| (a, scaling_fit(&records, a).unwrap_or(f64::NAN)))
                .collect();
            let ok = slopes
                .iter()
                .all(|&(_, s)| s >= SLOPE_RANGE.0 && s <= SLOPE_RANGE.1);
            let took = t.elapsed();
            report.line(
                "5",
                "near-linear scaling",
                ok && took <= Duration::from_secs(900),
                false,
                slopes
                    .iter()
                    .map(|(a, s)| format!("{a} slope {s:.3}"))
                    .collect::<Vec<_>>()
                    .join(", "),
                took,
            );
        }
        Err(e) => report.line("5", "near-linear scaling", false, false, e.to_string(), t.elapsed()),
    }

    let t = Instant::now();
    let matrix = BenchMatrix {
        families: Family::ALL.to_vec(),
        algs: vec![mb2, mb5, dbr2, dbr5, Algorithm::Nz],
        ..matrix
    };
    let cfg = BenchConfig {
        reps: 1,
        nz: NzConfig {
            per_start_time_cap: Duration::from_secs(5),
            total_time_cap: Duration::from_secs(10),
            ..NzConfig::default()
        },
        ..cfg
    };
    match run_bench(&matrix, &cfg) {
        Ok(records) => {
            let times = mean_times(&records);
            let fastest = share_fastest(&times, dbr5, &[mb5, Algorithm::Nz]);
            let mb = share_fastest(&times, mb5, &[mb2]);
            let dbr = share_fastest(&times, dbr5, &[dbr2]);
            report.line(
                "6",
                "comparative ranking",
                fastest >= FASTEST_SHARE && mb >= FIVE_SET_SHARE && dbr >= FIVE_SET_SHARE,
                true,
                format!(
                    "dbr5 fastest of {{dbr5, mb5, nz}} on {:.1}%; mb5 beats mb2 on {:.1}%; dbr5 beats dbr2 on {:.1}% ({} instances)",
                    100.0 * fastest,
                    100.0 * mb,
                    100.0 * dbr,
                    times.len()
                ),
                t.elapsed(),
            );
        }
        Err(e) => report.line("6", "comparative ranking", false, true, e.to_string(), t.elapsed()),
    }

    let expected = |s: &GenSpec| {
        matches!(s.family, Family::Sampling | Family::StratifiedSampling) && s.h_frac <= 0.25
    };
    let in_expected = st.nz_failed.iter().filter(|s| expected(s)).count();
    let predominantly = st.nz_failed.is_empty() || 2 * in_expected > st.nz_failed.len();
    let mut by_family: BTreeMap<String, usize> = BTreeMap::new();
    for s in &st.nz_failed {
        *by_family.entry(s.family.to_string()).or_default() += 1;
    }
    report.line(
        "7",
        "NZ contract",
        st.nz_contract_broken.is_empty() && predominantly,
        false,
        format!(
            "{} approximate returns, {} break the contract; {} failures, {} on sampling/stratified with h <= 0.25, by family {:?}{}",
            st.nz_approx,
            st.nz_contract_broken.len(),
            st.nz_failed.len(),
            in_expected,
            by_family,
            first(&st.nz_contract_broken)
        ),
        Duration::ZERO,
    );

    let t = Instant::now();
    let (ok8, detail8) = profile_checks();
    report.line("8", "profile correctness", ok8, false, detail8, t.elapsed());

    let t = Instant::now();
    let (ok9, detail9) = reproducibility_checks();
    report.line("9", "reproducibility", ok9, false, detail9, t.elapsed());

    if report.hard_failures == 0 {
        println!("acceptance: all hard criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} hard criteria fail", report.hard_failures);
        ExitCode::FAILURE
    }
}

fn record(seed: u64, alg: Algorithm, time_ns: u64, status: Status) -> BenchRecord {
    BenchRecord {
        family: Family::Quadratic,
        n: 10,
        h_frac: 0.5,
        seed,
        alg,
        rep: 0,
        time_ns,
        iters: 1,
        status,
        mu: 0.0,
        feas_resid: 0.0,
        kkt_resid: 0.0,
    }
}

fn profile_checks() -> (bool, String) {
    let (a, b) = (Algorithm::Breakpoint(BreakpointVariant::Mb5), Algorithm::Nz);
    let ok = Status::Optimal;
    let hand = [
        record(1, a, 1000, ok),
        record(1, b, 2000, ok),
        record(2, a, 4000, ok),
        record(2, b, 2000, ok),
    ];
    let pts = performance_profile(&hand, &[1.0, 2.0], None).expect("records present");
    let rho = |alg: Algorithm, tau: f64| {
        pts.iter()
            .find(|p| p.alg == alg.to_string() && p.tau == tau)
            .map(|p| p.rho)
    };
    let hand_ok = rho(a, 1.0) == Some(0.5)
        && rho(b, 1.0) == Some(0.5)
        && rho(a, 2.0) == Some(1.0)
        && rho(b, 2.0) == Some(1.0);

    // monotone step functions and the failure cap on a fixed pseudo-random campaign
    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    let algs = [a, b, Algorithm::Relaxation(RelaxVariant::Dbr5)];
    let mut campaign = Vec::new();
    for p in 0..200 {
        for &alg in &algs {
            let status = if next() % 7 == 0 { Status::Failed } else { ok };
            campaign.push(record(p, alg, 1 + next() % 1_000_000, status));
        }
    }
    let r = ratios(&campaign, None).expect("records present");
    let taus = r.breakpoints();
    let mut monotone = true;
    let mut capped = true;
    for (i, alg) in r.algs.iter().enumerate() {
        let rhos: Vec<f64> = taus.iter().map(|&t| r.rho(i, t)).collect();
        monotone &= rhos.windows(2).all(|w| w[0] <= w[1]);
        let fails = campaign.iter().filter(|x| x.alg == *alg && x.status == Status::Failed).count();
        let below = r.rho(i, r.r_m * (1.0 - 1e-12));
        capped &= (below - (1.0 - fails as f64 / 200.0)).abs() < 1e-12 && r.rho(i, r.r_m) == 1.0;
    }
    let always_fail: Vec<BenchRecord> = (0..5)
        .flat_map(|p| [record(p, a, 10, ok), record(p, b, 1, Status::Failed)])
        .collect();
    let rf = ratios(&always_fail, None).expect("records present");
    let zero_below_cap = rf.rho(1, rf.r_m * 0.999) == 0.0;

    (
        hand_ok && monotone && capped && zero_below_cap,
        format!(
            "hand example {hand_ok}, monotone {monotone}, failure cap {capped}, all-fail below r_M {zero_below_cap}"
        ),
    )
}

/// Digest of the quadratic n=1000, h=0.5, seed=42 instance file.
const PINNED_DIGEST: u64 = 0xf74b_9032_79aa_44bd;

fn reproducibility_checks() -> (bool, String) {
    let mut identical = true;
    let mut round_trip = true;
    for family in Family::ALL {
        for seed in 0..5 {
            let spec = GenSpec::new(family, 500, 0.25 * seed as f64, seed);
            let a = format_instance(&generate(&spec).expect("valid spec"));
            let b = format_instance(&generate(&spec).expect("valid spec"));
            identical &= a == b;
            let inst = parse_instance(&a).expect("own output parses");
            round_trip &= format_instance(&inst) == a;
            let sol = solve(&inst, Algorithm::Relaxation(RelaxVariant::Dbr5));
            let text = format_solution(&sol, "dbr5");
            let (_, back) = parse_solution(&text).expect("own output parses");
            round_trip &= back.mu.to_bits() == sol.mu.to_bits()
                && back.x.iter().zip(&sol.x).all(|(p, q)| p.to_bits() == q.to_bits());
        }
    }
    let pinned = format_instance(
        &generate(&GenSpec::new(Family::Quadratic, 1000, 0.5, 42)).expect("valid spec"),
    );
    let digest = fnv1a(pinned.as_bytes());
    let digest_ok = digest == PINNED_DIGEST;
    (
        identical && round_trip && digest_ok,
        format!(
            "repeat generation identical {identical}, bit-exact round trips {round_trip}, pinned digest {digest:016x} matches {digest_ok}"
        ),
    )
}
