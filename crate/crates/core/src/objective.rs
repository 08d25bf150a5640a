//! Objective functions: true total power, the ℓ0 cluster-size penalty in its
//! exact, log-smoothed and linearized forms, and the convex majorizer that
//! each reweighting step minimizes.
//!
//! All rate arguments are rank-indexed [`RateAllocation`]s. Decoder
//! efficiencies are per user, so every per-rank term looks up the user
//! holding that rank on the subcarrier.

use std::f64::consts::LN_2;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::config::SystemConfig;
use crate::transform::{subcarrier_sum_power, transmission_coefficients, RateAllocation};

/// Power split reported for a rate allocation. Powers in W.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub transmission_power: f64,
    pub decoding_power: f64,
    /// Exact ℓ0 penalty, dimensionless; not part of `total`.
    pub penalty_value: f64,
    pub total: f64,
}

/// Linearization of the log-smoothed ℓ0 norm around an anchor allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateParams {
    pub weights: DMatrix<f64>,
    pub offsets: DMatrix<f64>,
    pub anchor: RateAllocation,
    pub tau: f64,
}

/// How `‖r_n‖_0` is evaluated inside the penalty.
#[derive(Debug, Clone, Copy)]
pub enum PenaltyMode<'a> {
    /// Counts entries above the support threshold.
    Exact,
    /// `ln(1 + r/tau) / ln(1 + 1/tau)` per entry.
    Smoothed { tau: f64 },
    /// `w r + alpha` per entry.
    Linearized(&'a SurrogateParams),
}

/// Log-smoothed indicator `ln(1 + r/tau) / ln(1 + 1/tau)`.
pub fn smoothed_indicator(r: f64, tau: f64) -> f64 {
    (r / tau).ln_1p() / tau.recip().ln_1p()
}

/// Per-rank decoder efficiency on subcarrier `n`.
pub(crate) fn ranked_efficiency(ch: &ChannelSet, cfg: &SystemConfig, n: usize) -> Vec<f64> {
    (0..ch.num_users())
        .map(|j| cfg.decoder_efficiency_j_per_mbit[ch.user_at(j, n)])
        .collect()
}

fn penalty_scale(cfg: &SystemConfig) -> f64 {
    (cfg.cluster_cap as f64 + 0.5).powi(cfg.penalty_exponent as i32).recip()
}

/// Decoding power: every active rank decodes its own rate plus every weaker
/// rank's rate on that subcarrier, at its user's decoder efficiency.
pub fn decoding_power(r: &RateAllocation, ch: &ChannelSet, cfg: &SystemConfig) -> f64 {
    let eps = cfg.epsilon();
    let mut total = 0.0;
    for n in 0..r.num_subcarriers() {
        let col = r.column(n);
        let mut decoded = 0.0;
        for (j, &rate) in col.iter().enumerate() {
            decoded += rate;
            if rate > eps {
                total += cfg.decoder_efficiency_j_per_mbit[ch.user_at(j, n)] * decoded;
            }
        }
    }
    total
}

/// Total radiated power over all subcarriers.
pub fn transmission_power(r: &RateAllocation, ch: &ChannelSet, cfg: &SystemConfig) -> f64 {
    let sigma2 = cfg.noise_power_w();
    let bw = cfg.bandwidth_mhz();
    (0..r.num_subcarriers())
        .map(|n| subcarrier_sum_power(r.column(n), &ch.ranked_gains(n), sigma2, bw))
        .sum()
}

pub fn total_power(r: &RateAllocation, ch: &ChannelSet, cfg: &SystemConfig) -> ObjectiveBreakdown {
    let transmission_power = transmission_power(r, ch, cfg);
    let decoding_power = decoding_power(r, ch, cfg);
    ObjectiveBreakdown {
        transmission_power,
        decoding_power,
        penalty_value: penalty_term(r, cfg, PenaltyMode::Exact),
        total: transmission_power + decoding_power,
    }
}

/// `sum_n (‖r_n‖_0 / (L + 0.5))^K` with the norm evaluated per `mode`.
pub fn penalty_term(r: &RateAllocation, cfg: &SystemConfig, mode: PenaltyMode<'_>) -> f64 {
    let eps = cfg.epsilon();
    let k = cfg.penalty_exponent as i32;
    let scale = penalty_scale(cfg);
    (0..r.num_subcarriers())
        .map(|n| {
            let col = r.column(n);
            let count: f64 = match mode {
                PenaltyMode::Exact => col.iter().filter(|&&v| v > eps).count() as f64,
                PenaltyMode::Smoothed { tau } => col.iter().map(|&v| smoothed_indicator(v, tau)).sum(),
                PenaltyMode::Linearized(p) => col
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| p.weights[(j, n)] * v + p.offsets[(j, n)])
                    .sum(),
            };
            count.powi(k) * scale
        })
        .sum()
}

/// Tangent of the log-smoothed indicator at every anchor entry.
pub fn update_surrogate(anchor: &RateAllocation, tau: f64) -> SurrogateParams {
    let denom = tau.recip().ln_1p();
    let (m, n) = (anchor.num_ranks(), anchor.num_subcarriers());
    let weights = DMatrix::from_fn(m, n, |j, k| {
        let r = anchor.get(j, k);
        ((r + tau) * denom).recip()
    });
    let offsets = DMatrix::from_fn(m, n, |j, k| {
        let r = anchor.get(j, k);
        let num = (r + tau) * (r / tau).ln_1p() - r;
        (num / ((r + tau) * denom)).max(0.0)
    });
    SurrogateParams {
        weights,
        offsets,
        anchor: anchor.clone(),
        tau,
    }
}

/// Convex upper bound of `r_s (w r_m + alpha)`: the product is split as
/// `w/4 [(r_s + r_m)^2 - (r_s - r_m)^2]` and the concave part is replaced by
/// its tangent at the anchor `(s_t, m_t)`.
pub fn bilinear_upper_bound(r_s: f64, r_m: f64, s_t: f64, m_t: f64, w: f64, alpha: f64) -> f64 {
    let d_t = s_t - m_t;
    let sum = r_s + r_m;
    let diff = r_s - r_m;
    0.25 * w * sum * sum - 0.25 * w * (d_t * d_t + 2.0 * d_t * (diff - d_t)) + alpha * r_s
}

/// Log-smoothed objective: transmission power, smoothed decoding power and
/// smoothed penalty.
pub fn smoothed_objective(r: &RateAllocation, ch: &ChannelSet, cfg: &SystemConfig, tau: f64) -> f64 {
    let scale = penalty_scale(cfg);
    let k = cfg.penalty_exponent as i32;
    let mut decoding = 0.0;
    let mut penalty = 0.0;
    for n in 0..r.num_subcarriers() {
        let col = r.column(n);
        let lambda = ranked_efficiency(ch, cfg, n);
        let mut decoded = 0.0;
        let mut count = 0.0;
        for (j, &rate) in col.iter().enumerate() {
            decoded += rate;
            let ind = smoothed_indicator(rate, tau);
            decoding += lambda[j] * decoded * ind;
            count += ind;
        }
        penalty += count.powi(k) * scale;
    }
    transmission_power(r, ch, cfg) + decoding + penalty
}

/// Per-subcarrier data for evaluating the majorizer and its derivatives.
pub(crate) struct ColumnTerms {
    /// Transmission coefficients `c_j`.
    pub coeffs: Vec<f64>,
    pub lambda: Vec<f64>,
    pub bw_mhz: f64,
}

impl ColumnTerms {
    pub fn new(ch: &ChannelSet, cfg: &SystemConfig, n: usize) -> Self {
        ColumnTerms {
            coeffs: transmission_coefficients(&ch.ranked_gains(n), cfg.noise_power_w()),
            lambda: ranked_efficiency(ch, cfg, n),
            bw_mhz: cfg.bandwidth_mhz(),
        }
    }

    pub fn transmission(&self, r: &[f64]) -> f64 {
        let mut cum = 0.0;
        let mut total = 0.0;
        for (j, &c) in self.coeffs.iter().enumerate() {
            cum += r[j];
            total += c * (cum * LN_2 / self.bw_mhz).exp_m1();
        }
        total
    }

    /// Adds the transmission gradient into `g` and the Hessian into `h`.
    /// `h` is `m x m` for this subcarrier.
    pub fn add_transmission_derivs(&self, r: &[f64], g: &mut [f64], h: Option<&mut DMatrix<f64>>) {
        let m = r.len();
        let k = LN_2 / self.bw_mhz;
        // tail[j] = sum_{l >= j} c_l 2^{C_l / B}
        let mut terms = vec![0.0; m];
        let mut cum = 0.0;
        for j in 0..m {
            cum += r[j];
            terms[j] = self.coeffs[j] * (cum * k).exp();
        }
        let mut tail = vec![0.0; m + 1];
        for j in (0..m).rev() {
            tail[j] = tail[j + 1] + terms[j];
        }
        for j in 0..m {
            g[j] += k * tail[j];
        }
        if let Some(h) = h {
            let k2 = k * k;
            for a in 0..m {
                for b in 0..m {
                    h[(a, b)] += k2 * tail[a.max(b)];
                }
            }
        }
    }
}

/// Majorizer data for one subcarrier.
pub(crate) struct SurrogateColumn<'a> {
    pub terms: ColumnTerms,
    pub anchor: &'a [f64],
    pub weights: Vec<f64>,
    pub offsets: Vec<f64>,
    pub exponent: i32,
    pub penalty_scale: f64,
}

impl<'a> SurrogateColumn<'a> {
    pub fn new(ch: &ChannelSet, cfg: &SystemConfig, params: &'a SurrogateParams, n: usize) -> Self {
        SurrogateColumn {
            terms: ColumnTerms::new(ch, cfg, n),
            anchor: params.anchor.column(n),
            weights: params.weights.column(n).iter().copied().collect(),
            offsets: params.offsets.column(n).iter().copied().collect(),
            exponent: cfg.penalty_exponent as i32,
            penalty_scale: penalty_scale(cfg),
        }
    }

    fn penalty_base(&self, r: &[f64]) -> f64 {
        r.iter()
            .zip(self.weights.iter().zip(&self.offsets))
            .map(|(&v, (&w, &a))| w * v + a)
            .sum()
    }

    pub fn value(&self, r: &[f64]) -> f64 {
        let mut decoding = 0.0;
        for j in 0..r.len() {
            let (w, a) = (self.weights[j], self.offsets[j]);
            let inner: f64 = (0..=j)
                .map(|s| bilinear_upper_bound(r[s], r[j], self.anchor[s], self.anchor[j], w, a))
                .sum();
            decoding += self.terms.lambda[j] * inner;
        }
        let penalty = self.penalty_base(r).powi(self.exponent) * self.penalty_scale;
        self.terms.transmission(r) + decoding + penalty
    }

    pub fn add_derivs(&self, r: &[f64], g: &mut [f64], mut h: Option<&mut DMatrix<f64>>) {
        let m = r.len();
        self.terms.add_transmission_derivs(r, g, h.as_deref_mut());

        for j in 0..m {
            let lam = self.terms.lambda[j];
            if lam == 0.0 {
                continue;
            }
            let (w, a) = (self.weights[j], self.offsets[j]);
            for s in 0..=j {
                let d_t = self.anchor[s] - self.anchor[j];
                let half_sum = 0.5 * w * (r[s] + r[j]);
                g[s] += lam * (half_sum - 0.5 * w * d_t + a);
                g[j] += lam * (half_sum + 0.5 * w * d_t);
                if let Some(h) = h.as_deref_mut() {
                    let q = 0.5 * lam * w;
                    h[(s, s)] += q;
                    h[(j, j)] += q;
                    h[(s, j)] += q;
                    h[(j, s)] += q;
                }
            }
        }

        let k = self.exponent;
        let base = self.penalty_base(r);
        let d1 = self.penalty_scale * k as f64 * base.powi(k - 1);
        for j in 0..m {
            g[j] += d1 * self.weights[j];
        }
        if k >= 2 {
            if let Some(h) = h {
                let d2 = self.penalty_scale * (k * (k - 1)) as f64 * base.powi(k - 2);
                for a in 0..m {
                    for b in 0..m {
                        h[(a, b)] += d2 * self.weights[a] * self.weights[b];
                    }
                }
            }
        }
    }
}

/// The convex majorizer of [`smoothed_objective`] anchored at `params.anchor`.
pub fn surrogate_objective(
    r: &RateAllocation,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    params: &SurrogateParams,
) -> f64 {
    (0..r.num_subcarriers())
        .map(|n| SurrogateColumn::new(ch, cfg, params, n).value(r.column(n)))
        .sum()
}

/// Analytic gradient of [`surrogate_objective`], rank-by-subcarrier.
pub fn surrogate_gradient(
    r: &RateAllocation,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    params: &SurrogateParams,
) -> DMatrix<f64> {
    let (m, n) = (r.num_ranks(), r.num_subcarriers());
    let mut grad = DMatrix::zeros(m, n);
    for sc in 0..n {
        let mut g = vec![0.0; m];
        SurrogateColumn::new(ch, cfg, params, sc).add_derivs(r.column(sc), &mut g, None);
        grad.column_mut(sc).copy_from_slice(&g);
    }
    grad
}
