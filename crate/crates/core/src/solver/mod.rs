//! Joint power control and user clustering by reweighted-ℓ1
//! majorization-minimization.
//!
//! The outer loop anchors a convex majorizer of the log-smoothed objective at
//! the current rates, minimizes it under the per-user demand constraints with
//! a log-barrier Newton method, and repeats until the smoothed objective
//! stops decreasing. Each step may be stretched further along its own
//! direction when that lowers the smoothed objective, which keeps the loop
//! from crawling once a rate heads toward zero. Rates below the support threshold are then zeroed and
//! the true objective is minimized once more on the resulting clustering.

mod barrier;
mod problem;

use log::{debug, warn};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::objective::{
    smoothed_objective, surrogate_gradient, surrogate_objective, total_power, update_surrogate,
    ObjectiveBreakdown, SurrogateParams,
};
use crate::transform::{rates_to_powers, support, PowerAllocation, RateAllocation};
use barrier::{minimize, BarrierSettings};
use problem::RateProblem;

/// How the log-smoothing regularizer evolves across outer iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TauSchedule {
    #[default]
    Fixed,
    /// Halve tau every outer iteration, floored at `1e-6` of the rate scale.
    /// The smoothed objective then changes between iterations, so monotone
    /// descent is only guaranteed under `Fixed`.
    GeometricDecay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    /// Relative change of the smoothed objective that ends the outer loop.
    pub outer_tol: f64,
    pub outer_max_iters: usize,
    /// Relative duality gap / KKT residual target of each convex solve.
    pub newton_tol: f64,
    /// Newton iterations allowed per barrier stage.
    pub newton_max_iters: usize,
    pub barrier_mu0: f64,
    pub barrier_shrink: f64,
    pub linesearch_alpha: f64,
    pub linesearch_beta: f64,
    pub tau_schedule: TauSchedule,
    /// After each majorization step, try doubling steps along the same
    /// direction and keep the furthest one that still lowers the smoothed
    /// objective. Off gives the plain one-step-per-iteration loop.
    pub extrapolate: bool,
    /// Upper bound on support patterns the exhaustive oracle may enumerate.
    pub enumeration_budget: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            outer_tol: 1e-6,
            outer_max_iters: 100,
            newton_tol: 1e-10,
            newton_max_iters: 100,
            barrier_mu0: 1.0,
            barrier_shrink: 0.2,
            linesearch_alpha: 0.3,
            linesearch_beta: 0.5,
            tau_schedule: TauSchedule::Fixed,
            extrapolate: true,
            enumeration_budget: 1_000_000,
        }
    }
}

impl SolverOptions {
    pub fn check(&self) -> Result<()> {
        let positive = [
            ("outer_tol", self.outer_tol),
            ("newton_tol", self.newton_tol),
            ("barrier_mu0", self.barrier_mu0),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        let unit = [
            ("barrier_shrink", self.barrier_shrink),
            ("linesearch_beta", self.linesearch_beta),
        ];
        for (name, v) in unit {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1)")));
            }
        }
        if !(self.linesearch_alpha > 0.0 && self.linesearch_alpha < 0.5) {
            return Err(Error::InvalidConfig("linesearch_alpha must lie in (0, 0.5)".into()));
        }
        if self.outer_max_iters == 0 || self.newton_max_iters == 0 {
            return Err(Error::InvalidConfig("iteration limits must be at least 1".into()));
        }
        Ok(())
    }

    fn barrier(&self) -> BarrierSettings {
        BarrierSettings {
            mu0: self.barrier_mu0,
            shrink: self.barrier_shrink,
            gap_tol: self.newton_tol,
            max_newton_per_stage: self.newton_max_iters,
            ls_alpha: self.linesearch_alpha,
            ls_beta: self.linesearch_beta,
        }
    }
}

/// One outer iteration of the reweighting loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    /// Log-smoothed objective at the iterate.
    pub smoothed_objective: f64,
    /// Majorizer value at the iterate (equals the smoothed objective at the
    /// starting point, where the majorizer is anchored).
    pub surrogate_value: f64,
    /// Largest relative demand-constraint violation.
    pub max_constraint_violation: f64,
    pub tau: f64,
}

/// Result of any solver in this crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub rates: RateAllocation,
    pub powers: PowerAllocation,
    pub objective: ObjectiveBreakdown,
    /// Active users on every subcarrier, ascending.
    pub support_per_subcarrier: Vec<Vec<usize>>,
    pub outer_iters: usize,
    pub trace: Vec<TraceEntry>,
    pub converged: bool,
    /// Every subcarrier carries at most `cluster_cap` active users.
    pub cap_satisfied: bool,
}

impl SolveReport {
    pub(crate) fn from_rates(
        rates: RateAllocation,
        ch: &ChannelSet,
        cfg: &SystemConfig,
        outer_iters: usize,
        trace: Vec<TraceEntry>,
        converged: bool,
    ) -> Self {
        let eps = cfg.epsilon();
        let support_per_subcarrier: Vec<Vec<usize>> = (0..rates.num_subcarriers())
            .map(|n| {
                let mut users: Vec<usize> = support(rates.column(n), eps)
                    .into_iter()
                    .map(|j| ch.user_at(j, n))
                    .collect();
                users.sort_unstable();
                users
            })
            .collect();
        let cap_satisfied = support_per_subcarrier
            .iter()
            .all(|s| s.len() <= cfg.cluster_cap);
        SolveReport {
            powers: rates_to_powers(&rates, ch, cfg),
            objective: total_power(&rates, ch, cfg),
            rates,
            support_per_subcarrier,
            outer_iters,
            trace,
            converged,
            cap_satisfied,
        }
    }
}

/// Output of one convex subproblem solve.
#[derive(Debug, Clone)]
pub struct SubproblemOutcome {
    pub rates: RateAllocation,
    pub converged: bool,
    pub newton_iters: usize,
    pub kkt_residual: f64,
}

/// Each user's demand split evenly over all subcarriers.
pub fn init_feasible(cfg: &SystemConfig, ch: &ChannelSet) -> RateAllocation {
    let n = cfg.num_subcarriers;
    let share: Vec<f64> = cfg.rate_demand_mbps.iter().map(|r| r / n as f64).collect();
    RateAllocation::from_matrix_unchecked(DMatrix::from_fn(cfg.num_users, n, |j, sc| {
        share[ch.user_at(j, sc)]
    }))
}

fn check_inputs(cfg: &SystemConfig, ch: &ChannelSet, opts: &SolverOptions) -> Result<()> {
    cfg.check()?;
    opts.check()?;
    if ch.num_users() != cfg.num_users || ch.num_subcarriers() != cfg.num_subcarriers {
        return Err(Error::InvalidConfig(format!(
            "channel set is {}x{}, configuration is {}x{}",
            ch.num_users(),
            ch.num_subcarriers(),
            cfg.num_users,
            cfg.num_subcarriers
        )));
    }
    Ok(())
}

/// Minimizes the majorizer anchored by `params` under the demand constraints.
///
/// The warm start must be nonnegative and satisfy the demand constraints. A
/// warm start with entries at or below the support threshold is pulled into
/// the interior by a convex combination with the even split, which keeps it
/// feasible.
pub fn solve_subproblem(
    params: &SurrogateParams,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    warm_start: &RateAllocation,
    opts: &SolverOptions,
) -> Result<SubproblemOutcome> {
    if warm_start.max_demand_violation(ch, cfg) > 1e-8 {
        return Err(Error::InfeasibleStart(format!(
            "warm start misses the demands by {:.3e} (relative)",
            warm_start.max_demand_violation(ch, cfg)
        )));
    }
    let problem = RateProblem::surrogate(ch, cfg, params);
    let (a, b) = problem.constraints(ch, cfg);
    let mut x0 = problem.gather(warm_start);
    // entries at or below the support threshold start the barrier too close
    // to its singularity
    if x0.iter().any(|&v| v <= cfg.epsilon()) {
        let even = problem.gather(&init_feasible(cfg, ch));
        for (v, e) in x0.iter_mut().zip(even) {
            *v = 0.999 * *v + 0.001 * e;
        }
    }
    let out = minimize(&problem, &a, &b, &x0, &opts.barrier())?;
    Ok(SubproblemOutcome {
        rates: problem.scatter(&out.x),
        converged: out.converged,
        newton_iters: out.newton_iters,
        kkt_residual: out.kkt_residual,
    })
}

/// Analytic gradient of the majorizer with respect to every rate entry.
pub fn subproblem_gradient(
    r: &RateAllocation,
    params: &SurrogateParams,
    ch: &ChannelSet,
    cfg: &SystemConfig,
) -> DMatrix<f64> {
    surrogate_gradient(r, ch, cfg, params)
}

/// Outcome of a fixed-support solve.
#[derive(Debug, Clone)]
pub struct FixedSupportOutcome {
    pub rates: RateAllocation,
    pub converged: bool,
    pub kkt_residual: f64,
}

/// Minimizes true total power with the clustering fixed: user `u` may only
/// carry rate on subcarrier `n` if `u` is listed in `supports[n]`.
///
/// With the activity pattern fixed the decoding power is linear in the
/// rates, so this is a smooth convex program.
pub fn solve_fixed_support(
    supports: &[Vec<usize>],
    cfg: &SystemConfig,
    ch: &ChannelSet,
    opts: &SolverOptions,
) -> Result<FixedSupportOutcome> {
    let (m, n) = (cfg.num_users, cfg.num_subcarriers);
    if supports.len() != n {
        return Err(Error::InvalidConfig(format!(
            "{} support sets for {n} subcarriers",
            supports.len()
        )));
    }
    let mut active = vec![vec![false; m]; n];
    let mut carriers = vec![0usize; m];
    for (sc, users) in supports.iter().enumerate() {
        for &u in users {
            if u >= m {
                return Err(Error::InvalidConfig(format!("user {u} out of range")));
            }
            if !active[sc][ch.rank_of(u, sc)] {
                active[sc][ch.rank_of(u, sc)] = true;
                carriers[u] += 1;
            }
        }
    }
    if let Some(user) = carriers.iter().position(|&c| c == 0) {
        return Err(Error::InfeasibleSupport { user });
    }
    let start = RateAllocation::from_matrix_unchecked(DMatrix::from_fn(m, n, |j, sc| {
        if active[sc][j] {
            let u = ch.user_at(j, sc);
            cfg.rate_demand_mbps[u] / carriers[u] as f64
        } else {
            0.0
        }
    }));
    let problem = RateProblem::fixed_support(ch, cfg, active);
    debug_assert!(problem.uncovered_users(ch).is_empty());
    let (a, b) = problem.constraints(ch, cfg);
    let x0 = problem.gather(&start);
    let out = minimize(&problem, &a, &b, &x0, &opts.barrier())?;
    Ok(FixedSupportOutcome {
        rates: problem.scatter(&out.x),
        converged: out.converged,
        kkt_residual: out.kkt_residual,
    })
}

/// Active users per subcarrier after thresholding at `eps`.
fn thresholded_supports(r: &RateAllocation, ch: &ChannelSet, eps: f64) -> Vec<Vec<usize>> {
    (0..r.num_subcarriers())
        .map(|n| {
            support(r.column(n), eps)
                .into_iter()
                .map(|j| ch.user_at(j, n))
                .collect()
        })
        .collect()
}

fn penalty_bases(r: &RateAllocation, params: &SurrogateParams, cfg: &SystemConfig) -> f64 {
    let denom = cfg.cluster_cap as f64 + 0.5;
    (0..r.num_subcarriers())
        .map(|n| {
            let s: f64 = r
                .column(n)
                .iter()
                .enumerate()
                .map(|(j, &v)| params.weights[(j, n)] * v + params.offsets[(j, n)])
                .sum();
            s / denom
        })
        .fold(0.0, f64::max)
}

/// Doubling search beyond the majorization step.
///
/// Entries that shrink during reweighting tend to shrink by a steady factor
/// per iteration, so the search extrapolates multiplicatively: entry `x`
/// moving to `y` is sent to `x (y / x)^s`, `s = 2, 4, ...`, and each user's
/// entries are then rescaled to meet its demand again. The furthest `s`
/// whose smoothed objective keeps decreasing is returned, or `None` if even
/// `s = 2` does not improve on `value_at_step`.
fn extrapolate(
    from: &RateAllocation,
    step_to: &RateAllocation,
    value_at_step: f64,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    tau: f64,
) -> Option<(RateAllocation, f64)> {
    let (m, n) = (from.num_ranks(), from.num_subcarriers());
    let ratio = DMatrix::from_fn(m, n, |j, sc| {
        let (x, y) = (from.get(j, sc), step_to.get(j, sc));
        if x > 0.0 && y > 0.0 {
            (y / x).ln()
        } else {
            0.0
        }
    });
    let mut best: Option<(RateAllocation, f64)> = None;
    let mut best_value = value_at_step;
    let mut s: f64 = 1.0;
    for _ in 0..30 {
        s *= 2.0;
        let mut point = DMatrix::from_fn(m, n, |j, sc| step_to.get(j, sc) * ((s - 1.0) * ratio[(j, sc)]).exp());
        let mut totals = vec![0.0; m];
        for sc in 0..n {
            for j in 0..m {
                totals[ch.user_at(j, sc)] += point[(j, sc)];
            }
        }
        for sc in 0..n {
            for j in 0..m {
                let u = ch.user_at(j, sc);
                point[(j, sc)] *= cfg.rate_demand_mbps[u] / totals[u];
            }
        }
        if point.iter().any(|v| !v.is_finite()) {
            break;
        }
        let point = RateAllocation::from_matrix_unchecked(point);
        let value = smoothed_objective(&point, ch, cfg, tau);
        if !(value < best_value) {
            break;
        }
        best_value = value;
        best = Some((point, value));
    }
    best
}

/// Joint power control and user clustering.
pub fn jpcuc(cfg: &SystemConfig, ch: &ChannelSet, opts: &SolverOptions) -> Result<SolveReport> {
    check_inputs(cfg, ch, opts)?;
    let eps = cfg.epsilon();
    let tau_floor = 1e-6 * cfg.rate_scale();
    let mut tau = cfg.tau();

    let mut rates = init_feasible(cfg, ch);
    let mut current = smoothed_objective(&rates, ch, cfg, tau);
    let mut trace = vec![TraceEntry {
        iteration: 0,
        smoothed_objective: current,
        surrogate_value: current,
        max_constraint_violation: rates.max_demand_violation(ch, cfg),
        tau,
    }];
    let mut mm_converged = false;
    let mut inner_ok = true;
    let mut outer_iters = 0;
    let mut last_params = None;

    for t in 1..=opts.outer_max_iters {
        let params = update_surrogate(&rates, tau);
        let anchor_value = surrogate_objective(&rates, ch, cfg, &params);
        let sub = solve_subproblem(&params, ch, cfg, &rates, opts)?;
        inner_ok &= sub.converged;
        debug!(
            "outer iteration {t}: inner converged {}, kkt residual {:.2e}, {} Newton steps",
            sub.converged, sub.kkt_residual, sub.newton_iters
        );
        outer_iters = t;
        let candidate_surrogate = surrogate_objective(&sub.rates, ch, cfg, &params);
        if !(candidate_surrogate <= anchor_value) {
            // the inner solve could not improve on its own anchor
            debug!("outer iteration {t}: no majorizer decrease, stopping");
            mm_converged = true;
            last_params = Some(params);
            break;
        }
        let mut next = smoothed_objective(&sub.rates, ch, cfg, tau);
        let mut sub_rates = sub.rates;
        let mut next_surrogate = candidate_surrogate;
        if opts.extrapolate {
            if let Some((r, v)) = extrapolate(&rates, &sub_rates, next, ch, cfg, tau) {
                next_surrogate = surrogate_objective(&r, ch, cfg, &params);
                sub_rates = r;
                next = v;
            }
        }
        trace.push(TraceEntry {
            iteration: t,
            smoothed_objective: next,
            surrogate_value: next_surrogate,
            max_constraint_violation: sub_rates.max_demand_violation(ch, cfg),
            tau,
        });
        let change = (current - next).abs() / current.abs().max(f64::MIN_POSITIVE);
        rates = sub_rates;
        current = next;
        last_params = Some(params);
        if change < opts.outer_tol {
            mm_converged = true;
            break;
        }
        if opts.tau_schedule == TauSchedule::GeometricDecay {
            tau = (tau * 0.5).max(tau_floor);
            current = smoothed_objective(&rates, ch, cfg, tau);
        }
    }

    if let Some(params) = &last_params {
        let base = penalty_bases(&rates, params, cfg);
        if base > 1.5 {
            warn!("penalty base {base:.3} exceeds 1.5; the cluster-size penalty dominates conditioning");
        }
    }

    // threshold, then re-solve the true objective on the resulting clustering
    let thresholded = RateAllocation::from_matrix_unchecked(
        rates.as_matrix().map(|v| if v > eps { v } else { 0.0 }),
    );
    let mut supports = thresholded_supports(&thresholded, ch, eps);
    for u in 0..cfg.num_users {
        if !supports.iter().any(|s| s.contains(&u)) {
            // every user has an entry of at least R_u / N; only reachable on
            // degenerate numerics
            let best = (0..cfg.num_subcarriers)
                .max_by(|&a, &b| {
                    rates
                        .get(ch.rank_of(u, a), a)
                        .total_cmp(&rates.get(ch.rank_of(u, b), b))
                })
                .expect("at least one subcarrier");
            supports[best].push(u);
        }
    }
    let before = total_power(&thresholded, ch, cfg).total;
    let repaired = solve_fixed_support(&supports, cfg, ch, opts)?;
    let after = total_power(&repaired.rates, ch, cfg).total;
    let repair_ok = after <= before * 1.01;
    if !repair_ok {
        warn!("support repair raised total power from {before:.6e} W to {after:.6e} W");
    }

    Ok(SolveReport::from_rates(
        repaired.rates,
        ch,
        cfg,
        outer_iters,
        trace,
        mm_converged && inner_ok && repaired.converged && repair_ok,
    ))
}
