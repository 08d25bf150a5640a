//! Log-barrier interior-point method for
//!
//! ```text
//!     minimize f(x)  subject to  A x = b,  x > 0
//! ```
//!
//! with `f` smooth and convex. Each centering step runs Newton's method on
//! `s f(x) - mu sum_i ln x_i` (with `s` normalizing `f` to unit scale at the
//! start point) and solves the KKT system by block elimination: a Cholesky
//! factorization of the barrier Hessian followed by one of the Schur
//! complement `A H^{-1} A^T`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const MAX_STAGES: usize = 100;

pub(crate) trait SmoothObjective {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    /// Overwrites `g` with the gradient and, when given, `h` with the Hessian.
    fn derivs(&self, x: &[f64], g: &mut [f64], h: Option<&mut DMatrix<f64>>);
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct BarrierSettings {
    pub mu0: f64,
    pub shrink: f64,
    /// Relative duality-gap target.
    pub gap_tol: f64,
    pub max_newton_per_stage: usize,
    pub ls_alpha: f64,
    pub ls_beta: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct BarrierOutcome {
    pub x: Vec<f64>,
    pub converged: bool,
    pub newton_iters: usize,
    /// Max of relative stationarity, relative gap and relative primal residual.
    pub kkt_residual: f64,
}

struct NewtonStep {
    dx: DVector<f64>,
}

fn solve_kkt(
    hess: DMatrix<f64>,
    a: &DMatrix<f64>,
    grad: &DVector<f64>,
    residual: &DVector<f64>,
) -> Result<NewtonStep> {
    if let Some(chol) = hess.clone().cholesky() {
        let y = chol.solve(&a.transpose());
        let schur = a * &y;
        if let Some(schur_chol) = schur.cholesky() {
            let hinv_g = chol.solve(grad);
            let rhs = -(a * &hinv_g) - residual;
            let nu = schur_chol.solve(&rhs);
            let dx = -(hinv_g + &y * &nu);
            return Ok(NewtonStep { dx });
        }
    }
    // indefinite or singular blocks: fall back to LU on the full system
    let (k, m) = (hess.nrows(), a.nrows());
    let mut kkt = DMatrix::zeros(k + m, k + m);
    kkt.view_mut((0, 0), (k, k)).copy_from(&hess);
    kkt.view_mut((0, k), (k, m)).copy_from(&a.transpose());
    kkt.view_mut((k, 0), (m, k)).copy_from(a);
    let mut rhs = DVector::zeros(k + m);
    rhs.rows_mut(0, k).copy_from(&(-grad));
    rhs.rows_mut(k, m).copy_from(residual);
    let sol = kkt
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular KKT system".into()))?;
    Ok(NewtonStep {
        dx: sol.rows(0, k).into_owned(),
    })
}

fn barrier_value<P: SmoothObjective>(p: &P, x: &[f64], scale: f64, mu: f64) -> f64 {
    if x.iter().any(|&v| v <= 0.0) {
        return f64::INFINITY;
    }
    let log_sum: f64 = x.iter().map(|v| v.ln()).sum();
    scale * p.value(x) - mu * log_sum
}

/// KKT residual of the original bound-constrained problem at `x`.
///
/// The equality multipliers are fitted by least squares weighted by `x`, so
/// entries at the bound do not distort them. The residual is the larger of
/// the complementarity `x_i |r_i|` and the dual infeasibility `max(-r_i, 0)`
/// of `r = grad f + A^T nu`, relative to the gradient scale.
fn final_stationarity<P: SmoothObjective>(p: &P, a: &DMatrix<f64>, x: &[f64], scale: f64) -> Option<f64> {
    let mut grad = vec![0.0; x.len()];
    p.derivs(x, &mut grad, None);
    let grad = DVector::from_column_slice(&grad) * scale;
    let x_max = x.iter().fold(0.0f64, |m, &v| m.max(v)).max(f64::MIN_POSITIVE);
    let d2 = DVector::from_fn(x.len(), |i, _| (x[i] / x_max).powi(2));
    let ad2 = DMatrix::from_fn(a.nrows(), a.ncols(), |r, c| a[(r, c)] * d2[c]);
    let nu = (&ad2 * a.transpose()).cholesky()?.solve(&(-(&ad2 * &grad)));
    let r = &grad + a.transpose() * nu;
    let worst = (0..x.len())
        .map(|i| (x[i] / x_max * r[i].abs()).max(-r[i]))
        .fold(0.0, f64::max);
    Some(worst / grad.amax().max(1.0))
}

pub(crate) fn minimize<P: SmoothObjective>(
    p: &P,
    a: &DMatrix<f64>,
    b: &[f64],
    x0: &[f64],
    settings: &BarrierSettings,
) -> Result<BarrierOutcome> {
    let k = p.dim();
    debug_assert_eq!(a.ncols(), k);
    if x0.len() != k || x0.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InfeasibleStart(
            "start point must be strictly positive".into(),
        ));
    }
    let b_vec = DVector::from_column_slice(b);
    let b_norm = b_vec.amax().max(f64::MIN_POSITIVE);
    let mut x = DVector::from_column_slice(x0);
    let primal = |x: &DVector<f64>| (&b_vec - a * x).amax() / b_norm;
    if primal(&x) > 1e-8 {
        return Err(Error::InfeasibleStart(format!(
            "equality residual {:.3e} at start point",
            primal(&x)
        )));
    }

    let f0 = p.value(x.as_slice());
    if !f0.is_finite() {
        return Err(Error::InfeasibleStart("objective not finite at start point".into()));
    }
    let scale = f0.abs().max(1e-300).recip();
    let inner_tol = 0.01 * settings.gap_tol;

    let mut mu = settings.mu0;
    let mut grad_f = vec![0.0; k];
    let mut hess_f = DMatrix::zeros(k, k);
    let mut newton_iters = 0;
    let mut converged = false;

    for _stage in 0..MAX_STAGES {
        let mut centered = false;
        for _ in 0..settings.max_newton_per_stage {
            p.derivs(x.as_slice(), &mut grad_f, Some(&mut hess_f));
            let mut g = DVector::from_column_slice(&grad_f) * scale;
            let mut h = &hess_f * scale;
            for i in 0..k {
                g[i] -= mu / x[i];
                h[(i, i)] += mu / (x[i] * x[i]);
            }
            let residual = &b_vec - a * &x;
            let step = solve_kkt(h.clone(), a, &g, &residual)?;
            newton_iters += 1;

            let decrement2 = step.dx.dot(&(&h * &step.dx));
            let last_step = decrement2 * 0.5 <= inner_tol;

            let mut t: f64 = 1.0;
            for i in 0..k {
                if step.dx[i] < 0.0 {
                    t = t.min(-0.99 * x[i] / step.dx[i]);
                }
            }
            let phi0 = barrier_value(p, x.as_slice(), scale, mu);
            let slope = g.dot(&step.dx);
            let mut accepted = false;
            while t > 1e-20 {
                let trial = &x + &step.dx * t;
                let phi = barrier_value(p, trial.as_slice(), scale, mu);
                if phi <= phi0 + settings.ls_alpha * t * slope {
                    x = trial;
                    accepted = true;
                    break;
                }
                t *= settings.ls_beta;
            }
            // a small decrement still gets its (quadratically convergent) step
            if last_step || !accepted {
                centered = true;
                break;
            }
        }

        let f_norm = scale * p.value(x.as_slice());
        let gap = k as f64 * mu / f_norm.abs().max(1e-8);
        if centered && gap <= settings.gap_tol {
            converged = true;
            break;
        }
        mu *= settings.shrink;
    }

    let f_norm = scale * p.value(x.as_slice());
    let gap = k as f64 * mu / f_norm.abs().max(1e-8);
    let stationarity = final_stationarity(p, a, x.as_slice(), scale).unwrap_or(f64::INFINITY);
    Ok(BarrierOutcome {
        x: x.iter().copied().collect(),
        converged,
        newton_iters,
        kkt_residual: gap.max(primal(&x)).max(stationarity),
    })
}
