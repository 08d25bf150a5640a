//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs with `cargo test --test acceptance`.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use noma_power::bench::{aggregate, emit_csv, run_experiment, ExperimentSpec, RowStatus, SolverKind};
use noma_power::channel::{generate_channels, ChannelOptions, ChannelSet, DropGeometry};
use noma_power::config::SystemConfig;
use noma_power::objective::{smoothed_objective, surrogate_objective, update_surrogate};
use noma_power::oracle::oracle_optimum;
use noma_power::solver::{jpcuc, subproblem_gradient, SolverOptions};
use noma_power::transform::{
    nilpotent_inverse_check, powers_to_rates, rates_to_powers, subcarrier_sum_power, RateAllocation,
};
use noma_power::Error;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn random_gains(m: usize, n: usize, rng: &mut ChaCha8Rng) -> ChannelSet {
    // -80 dB to -120 dB
    let g = DMatrix::from_fn(m, n, |_, _| 10f64.powf(-rng.random_range(8.0..12.0)));
    ChannelSet::from_gains(g).unwrap()
}

fn random_cfg(m: usize, n: usize, rng: &mut ChaCha8Rng) -> SystemConfig {
    let mut cfg = SystemConfig::uniform(m, n, 1.0, rng.random_range(1..=m));
    cfg.rate_demand_mbps = (0..m).map(|_| rng.random_range(0.5..12.0)).collect();
    cfg.decoder_efficiency_j_per_mbit = (0..m).map(|_| rng.random_range(0.0..0.05)).collect();
    cfg
}

fn drop_channels(cfg: &SystemConfig, seed: u64) -> ChannelSet {
    let geometry = DropGeometry::uniform(cfg.num_users, 300.0, seed);
    generate_channels(cfg, &geometry, &ChannelOptions::default(), seed).unwrap()
}

/// Nonnegative matrix with roughly a fifth of the entries exactly zero.
fn sparse_rates(m: usize, n: usize, rng: &mut ChaCha8Rng) -> RateAllocation {
    let values = DMatrix::from_fn(m, n, |_, _| {
        if rng.random_bool(0.2) {
            0.0
        } else {
            rng.random_range(1e-4..20.0)
        }
    });
    RateAllocation::new(values).unwrap()
}

fn relative(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn transform_round_trip() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut support_mismatch = 0;
    for _ in 0..1000 {
        let (m, n) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let cfg = random_cfg(m, n, &mut rng);
        let ch = random_gains(m, n, &mut rng);
        let r = sparse_rates(m, n, &mut rng);
        let p = rates_to_powers(&r, &ch, &cfg);
        let back = powers_to_rates(&p, &ch, &cfg);
        for (a, b) in r.as_matrix().iter().zip(back.as_matrix().iter()) {
            worst = worst.max(relative(*a, *b));
        }
        for (rv, pv) in r.as_matrix().iter().zip(p.as_matrix().iter()) {
            if (*rv > 0.0) != (*pv > 0.0) {
                support_mismatch += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-9 && support_mismatch == 0 && secs < 10.0,
        format!("1000 instances, max relative error {worst:.2e} (tol 1e-9), support mismatches {support_mismatch}, {secs:.2} s (limit 10 s)"),
    )
}

fn closed_form_consistency() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (m, n) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let cfg = random_cfg(m, n, &mut rng);
        let ch = random_gains(m, n, &mut rng);
        let r = sparse_rates(m, n, &mut rng);
        let p = rates_to_powers(&r, &ch, &cfg);
        for sc in 0..n {
            let closed = subcarrier_sum_power(r.column(sc), &ch.ranked_gains(sc), cfg.noise_power_w(), cfg.bandwidth_mhz());
            let summed: f64 = p.column(sc).iter().sum();
            worst = worst.max(relative(closed, summed));
        }
    }
    let mut nilpotent_failures = 0;
    for m in 1..=8 {
        for _ in 0..50 {
            let col: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..10.0)).collect();
            if !nilpotent_inverse_check(&col, 1.0) {
                nilpotent_failures += 1;
            }
        }
    }
    verdict(
        worst <= 1e-12 && nilpotent_failures == 0,
        format!("max relative difference {worst:.2e} (tol 1e-12); inverse identity failures {nilpotent_failures}/400 for M = 1..8"),
    )
}

fn majorization() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_below: f64 = 0.0;
    let mut worst_anchor: f64 = 0.0;
    for _ in 0..100 {
        let (m, n) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let cfg = random_cfg(m, n, &mut rng);
        let ch = random_gains(m, n, &mut rng);
        let tau = cfg.tau();
        let anchor = sparse_rates(m, n, &mut rng);
        let params = update_surrogate(&anchor, tau);
        let at_anchor = (surrogate_objective(&anchor, &ch, &cfg, &params), smoothed_objective(&anchor, &ch, &cfg, tau));
        worst_anchor = worst_anchor.max(relative(at_anchor.0, at_anchor.1));
        for _ in 0..10 {
            let r = sparse_rates(m, n, &mut rng);
            let (sur, smooth) = (surrogate_objective(&r, &ch, &cfg, &params), smoothed_objective(&r, &ch, &cfg, tau));
            worst_below = worst_below.max((smooth - sur) / smooth.abs().max(f64::MIN_POSITIVE));
        }
    }
    verdict(
        worst_below <= 1e-9 && worst_anchor <= 1e-9,
        format!("1000 points: largest shortfall of the majorizer {worst_below:.2e}, anchor mismatch {worst_anchor:.2e} (tol 1e-9 relative)"),
    )
}

fn mm_descent() -> Verdict {
    let opts = SolverOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_rise = f64::NEG_INFINITY;
    let mut unconverged = 0;
    let mut max_iters = 0;
    for seed in 0..200u64 {
        let rate = rng.random_range(1.0..16.0);
        let cap = 1 + (seed % 3) as usize;
        let cfg = SystemConfig::uniform(3, 3, rate, cap);
        let ch = drop_channels(&cfg, 1000 + seed);
        let report = jpcuc(&cfg, &ch, &opts).unwrap();
        for w in report.trace.windows(2) {
            worst_rise = worst_rise.max(w[1].smoothed_objective - w[0].smoothed_objective);
        }
        max_iters = max_iters.max(report.outer_iters);
        if !report.converged {
            unconverged += 1;
        }
    }
    verdict(
        worst_rise <= 1e-9 && unconverged == 0,
        format!("200 instances (M=3, N=3, L cycling 1..3): largest step increase {worst_rise:.2e} (tol 1e-9), unconverged {unconverged}, most outer iterations {max_iters} (limit 100)"),
    )
}

fn gradient_check() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (m, n) = (rng.random_range(1..=5), rng.random_range(1..=5));
        let cfg = random_cfg(m, n, &mut rng);
        let ch = random_gains(m, n, &mut rng);
        let params = update_surrogate(&sparse_rates(m, n, &mut rng), cfg.tau());
        let r = RateAllocation::new(DMatrix::from_fn(m, n, |_, _| rng.random_range(0.05..6.0))).unwrap();
        let g = subproblem_gradient(&r, &params, &ch, &cfg);
        let h = 1e-6 * cfg.rate_scale();
        let floor = 1e-3 * g.amax();
        for j in 0..m {
            for sc in 0..n {
                let at = |d: f64| {
                    let mut x = r.as_matrix().clone();
                    x[(j, sc)] += d;
                    surrogate_objective(&RateAllocation::new(x).unwrap(), &ch, &cfg, &params)
                };
                let fd = (at(h) - at(-h)) / (2.0 * h);
                worst = worst.max((fd - g[(j, sc)]).abs() / g[(j, sc)].abs().max(floor));
            }
        }
    }
    verdict(worst <= 1e-5, format!("100 points: max relative error {worst:.2e} (tol 1e-5)"))
}

struct OracleRuns {
    /// Per drop: oracle totals for L = 1, 2 (`None` when infeasible).
    oracle: Vec<[Option<f64>; 2]>,
    jpcuc: Vec<[(f64, bool); 2]>,
    secs: f64,
}

fn oracle_runs() -> OracleRuns {
    let start = Instant::now();
    let opts = SolverOptions::default();
    let mut oracle = Vec::new();
    let mut mm = Vec::new();
    for seed in 0..200u64 {
        let base = SystemConfig::uniform(3, 2, 8.0, 1);
        let ch = drop_channels(&base, 2000 + seed);
        let mut o = [None; 2];
        let mut j = [(0.0, false); 2];
        for cap in 1..=2 {
            let mut cfg = base.clone();
            cfg.cluster_cap = cap;
            o[cap - 1] = match oracle_optimum(&cfg, &ch, &opts) {
                Ok(r) => Some(r.objective.total),
                Err(Error::NoFeasiblePattern { .. }) => None,
                Err(e) => panic!("oracle failed: {e}"),
            };
            let report = jpcuc(&cfg, &ch, &opts).unwrap();
            j[cap - 1] = (report.objective.total, report.cap_satisfied);
        }
        oracle.push(o);
        mm.push(j);
    }
    OracleRuns {
        oracle,
        jpcuc: mm,
        secs: start.elapsed().as_secs_f64(),
    }
}

fn oracle_dominance(runs: &OracleRuns) -> Verdict {
    let mut violations = 0;
    let mut gaps = Vec::new();
    let mut infeasible = 0;
    let mut cap_claims_on_infeasible = 0;
    for (o, j) in runs.oracle.iter().zip(&runs.jpcuc) {
        for cap in 0..2 {
            match o[cap] {
                Some(best) => {
                    if j[cap].0 < best - 1e-6 {
                        violations += 1;
                    }
                    gaps.push((j[cap].0 - best) / best);
                }
                None => {
                    infeasible += 1;
                    if j[cap].1 {
                        cap_claims_on_infeasible += 1;
                    }
                }
            }
        }
    }
    gaps.sort_by(f64::total_cmp);
    let median = gaps.get(gaps.len() / 2).copied().unwrap_or(f64::NAN);
    let soft = if median <= 0.15 { "within" } else { "ABOVE" };
    verdict(
        violations == 0 && cap_claims_on_infeasible == 0 && runs.secs < 300.0 && !gaps.is_empty(),
        format!(
            "200 drops (M=3, N=2): below-optimum cases {violations}; median relative gap {median:.3} ({soft} the 0.15 expectation) over {} feasible cells; {infeasible} cells have no orthogonal clustering (3 users > 2 subcarriers x L=1), jpcuc claimed cap satisfied on {cap_claims_on_infeasible} of them; {:.1} s (limit 300 s)",
            gaps.len(),
            runs.secs
        ),
    )
}

fn oracle_monotone(runs: &OracleRuns) -> Verdict {
    let as_value = |v: Option<f64>| v.unwrap_or(f64::INFINITY);
    let mut rises = runs
        .oracle
        .iter()
        .filter(|o| as_value(o[1]) > as_value(o[0]))
        .count();
    // a case where every cap is feasible, so the comparison is not vacuous
    let opts = SolverOptions::default();
    let mut cases = 0;
    for seed in 0..40u64 {
        let base = SystemConfig::uniform(3, 3, 8.0, 1);
        let ch = drop_channels(&base, 3000 + seed);
        let totals: Vec<f64> = (1..=3)
            .map(|cap| {
                let mut cfg = base.clone();
                cfg.cluster_cap = cap;
                oracle_optimum(&cfg, &ch, &opts).unwrap().objective.total
            })
            .collect();
        rises += totals.windows(2).filter(|w| w[1] > w[0]).count();
        cases += 1;
    }
    verdict(
        rises == 0,
        format!("increases in L: {rises} (exact comparison) over the 200 M=3, N=2 drops (infeasible counts as +inf) and {cases} M=3, N=3 drops with L = 1..3"),
    )
}

fn fig1_trend() -> Verdict {
    let start = Instant::now();
    let spec = ExperimentSpec::desk();
    let rows = run_experiment(&spec).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let series = aggregate(&rows);
    let at_top = |kind: SolverKind| {
        series
            .iter()
            .find(|s| s.solver == kind)
            .and_then(|s| s.points.last().copied())
            .unwrap()
    };
    let (top, mm) = at_top(SolverKind::Jpcuc);
    let (_, oma) = at_top(SolverKind::Oma);
    let errors = rows.iter().filter(|r| r.status == RowStatus::Error).count();
    let describe = |kind: SolverKind| {
        series
            .iter()
            .find(|s| s.solver == kind)
            .map(|s| s.points.iter().map(|(x, y)| format!("{x}:{y:.4}")).collect::<Vec<_>>().join(" "))
            .unwrap()
    };
    verdict(
        mm < oma && errors == 0 && secs < 600.0,
        format!(
            "M=4, N=4, {} drops; at {top} Mbit/s jpcuc (L=2) {mm:.4} W vs OMA {oma:.4} W; jpcuc [{}] oma [{}] W; {secs:.1} s (limit 600 s)",
            spec.num_drops,
            describe(SolverKind::Jpcuc),
            describe(SolverKind::Oma)
        ),
    )
}

fn fig2_trend() -> Verdict {
    let spec = ExperimentSpec::desk_cap_sweep();
    let rows = run_experiment(&spec).unwrap();
    let oracle: Vec<&_> = rows.iter().filter(|r| r.solver == SolverKind::Oracle).collect();
    let infeasible_l1 = oracle
        .iter()
        .filter(|r| r.cluster_cap == 1 && r.status == RowStatus::Infeasible)
        .count();
    let means: Vec<(f64, f64)> = aggregate(&rows)
        .into_iter()
        .find(|s| s.solver == SolverKind::Oracle)
        .unwrap()
        .points
        .into_iter()
        .map(|(l, m)| (l, if m.is_nan() { f64::INFINITY } else { m }))
        .collect();
    let nonincreasing = means.windows(2).all(|w| w[1].1 <= w[0].1);
    let savings: Vec<f64> = means
        .windows(2)
        .filter(|w| w[0].1.is_finite())
        .map(|w| w[0].1 - w[1].1)
        .collect();
    let shrinking = savings.len() >= 2 && savings.last().unwrap() < savings.first().unwrap();
    let fmt_means = means.iter().map(|(l, m)| format!("L={l}:{m:.4}")).collect::<Vec<_>>().join(" ");
    let fmt_savings = savings.iter().map(|s| format!("{s:.2e}")).collect::<Vec<_>>().join(", ");
    verdict(
        nonincreasing && shrinking,
        format!(
            "M=4, N=3, R=16 Mbit/s, {} drops; oracle means [{fmt_means}] W (L=1 infeasible on {infeasible_l1} drops); marginal savings [{fmt_savings}] W",
            spec.num_drops
        ),
    )
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut specs = vec![ExperimentSpec::desk(), ExperimentSpec::desk_cap_sweep()];
    for s in &mut specs {
        s.num_drops = 3;
        s.base_seed = 77;
    }
    specs[0].sweep_values = vec![4.0, 16.0];
    specs[0].solvers = vec![SolverKind::Jpcuc, SolverKind::Oracle, SolverKind::Oma];
    let mut identical = 0;
    for (i, spec) in specs.iter().enumerate() {
        let a = dir.path().join(format!("a{i}.csv"));
        let b = dir.path().join(format!("b{i}.csv"));
        emit_csv(&run_experiment(spec).unwrap(), &a).unwrap();
        emit_csv(&run_experiment(spec).unwrap(), &b).unwrap();
        if std::fs::read(&a).unwrap() == std::fs::read(&b).unwrap() {
            identical += 1;
        }
    }
    verdict(
        identical == specs.len(),
        format!("{identical}/{} repeated sweeps produced byte-identical CSV", specs.len()),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Verdict)> = Vec::new();
    let mut report = |id: usize, name: &'static str, v: Verdict| {
        println!("{} {id:>2} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        results.push((id, name, v));
    };
    report(1, "transform round-trip", transform_round_trip());
    report(2, "closed-form consistency", closed_form_consistency());
    report(3, "majorization", majorization());
    report(4, "MM descent", mm_descent());
    report(5, "gradient correctness", gradient_check());
    let runs = oracle_runs();
    report(6, "oracle dominance and gap", oracle_dominance(&runs));
    report(7, "oracle L-monotonicity", oracle_monotone(&runs));
    report(8, "demand sweep trend", fig1_trend());
    report(9, "cluster-cap sweep trend", fig2_trend());
    report(10, "determinism", determinism());

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", results.len());
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
