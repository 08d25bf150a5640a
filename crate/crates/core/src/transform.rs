//! Rate/power mapping under successive interference cancellation.
//!
//! Matrices are indexed by `(rank, subcarrier)`: entry `(j, n)` belongs to
//! the user holding rank `j` (0 = weakest) on subcarrier `n`. On a subcarrier
//! the rank-`j` user sees interference from every stronger rank `l > j`, and
//! has already cancelled the weaker ones.
//!
//! The backward map uses the cumulative-power recursion
//! `a_j = 2^{r_j/B} a_{j+1} + (sigma^2/H_j)(2^{r_j/B} - 1)`, `a_M = 0`, with
//! `p_j = a_j - a_{j+1}` evaluated as `expm1(r_j ln2 / B) (a_{j+1} + sigma^2/H_j)`
//! so that small rates do not lose precision to cancellation.

use std::f64::consts::LN_2;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::config::SystemConfig;
use crate::error::{Error, Result};

macro_rules! rank_matrix {
    ($name:ident, $unit:literal) => {
        #[doc = concat!("Nonnegative rank-by-subcarrier matrix, entries in ", $unit, ".")]
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        pub struct $name(DMatrix<f64>);

        impl $name {
            /// Fails if any entry is negative or not finite.
            pub fn new(values: DMatrix<f64>) -> Result<Self> {
                if values.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
                    return Err(Error::InvalidConfig(format!(
                        "{} entries must be finite and nonnegative",
                        stringify!($name)
                    )));
                }
                Ok($name(values))
            }

            pub fn zeros(num_ranks: usize, num_subcarriers: usize) -> Self {
                $name(DMatrix::zeros(num_ranks, num_subcarriers))
            }

            pub fn from_fn(
                num_ranks: usize,
                num_subcarriers: usize,
                f: impl FnMut(usize, usize) -> f64,
            ) -> Result<Self> {
                Self::new(DMatrix::from_fn(num_ranks, num_subcarriers, f))
            }

            pub(crate) fn from_matrix_unchecked(values: DMatrix<f64>) -> Self {
                $name(values)
            }

            pub fn num_ranks(&self) -> usize {
                self.0.nrows()
            }

            pub fn num_subcarriers(&self) -> usize {
                self.0.ncols()
            }

            pub fn get(&self, rank: usize, subcarrier: usize) -> f64 {
                self.0[(rank, subcarrier)]
            }

            /// Entries of one subcarrier in rank order.
            pub fn column(&self, subcarrier: usize) -> &[f64] {
                let m = self.0.nrows();
                &self.0.as_slice()[subcarrier * m..(subcarrier + 1) * m]
            }

            pub fn as_matrix(&self) -> &DMatrix<f64> {
                &self.0
            }

            pub fn into_matrix(self) -> DMatrix<f64> {
                self.0
            }

            /// Re-indexes by `(user, subcarrier)`.
            pub fn by_user(&self, ch: &ChannelSet) -> DMatrix<f64> {
                DMatrix::from_fn(self.0.nrows(), self.0.ncols(), |u, n| {
                    self.0[(ch.rank_of(u, n), n)]
                })
            }

            /// Sum over subcarriers of the entries belonging to `user`.
            pub fn user_total(&self, ch: &ChannelSet, user: usize) -> f64 {
                (0..self.0.ncols())
                    .map(|n| self.0[(ch.rank_of(user, n), n)])
                    .sum()
            }
        }
    };
}

rank_matrix!(RateAllocation, "Mbit/s");
rank_matrix!(PowerAllocation, "W");

impl RateAllocation {
    /// Largest relative violation of the per-user demand constraints.
    pub fn max_demand_violation(&self, ch: &ChannelSet, cfg: &SystemConfig) -> f64 {
        cfg.rate_demand_mbps
            .iter()
            .enumerate()
            .map(|(u, &demand)| (self.user_total(ch, u) - demand).abs() / demand)
            .fold(0.0, f64::max)
    }
}

/// Achievable SIC rates for given powers on one subcarrier (ranked gains).
pub fn column_powers_to_rates(p: &[f64], ranked_gains: &[f64], sigma2: f64, bw_mhz: f64) -> Vec<f64> {
    let m = p.len();
    let mut out = vec![0.0; m];
    let mut interference = 0.0;
    for j in (0..m).rev() {
        let h = ranked_gains[j];
        let sinr = h * p[j] / (h * interference + sigma2);
        out[j] = bw_mhz * sinr.ln_1p() / LN_2;
        interference += p[j];
    }
    out
}

/// Powers that achieve the given rates on one subcarrier (ranked gains).
pub fn column_rates_to_powers(r: &[f64], ranked_gains: &[f64], sigma2: f64, bw_mhz: f64) -> Vec<f64> {
    let m = r.len();
    let mut out = vec![0.0; m];
    // a holds the total power of ranks strictly above j
    let mut a = 0.0;
    for j in (0..m).rev() {
        let growth = (r[j] * LN_2 / bw_mhz).exp_m1();
        let p = growth * (a + sigma2 / ranked_gains[j]);
        out[j] = p;
        a += p;
    }
    out
}

pub fn powers_to_rates(p: &PowerAllocation, ch: &ChannelSet, cfg: &SystemConfig) -> RateAllocation {
    let (m, n) = (p.num_ranks(), p.num_subcarriers());
    let sigma2 = cfg.noise_power_w();
    let bw = cfg.bandwidth_mhz();
    let mut out = DMatrix::zeros(m, n);
    for sc in 0..n {
        let col = column_powers_to_rates(p.column(sc), &ch.ranked_gains(sc), sigma2, bw);
        out.column_mut(sc).copy_from_slice(&col);
    }
    RateAllocation::from_matrix_unchecked(out)
}

pub fn rates_to_powers(r: &RateAllocation, ch: &ChannelSet, cfg: &SystemConfig) -> PowerAllocation {
    let (m, n) = (r.num_ranks(), r.num_subcarriers());
    let sigma2 = cfg.noise_power_w();
    let bw = cfg.bandwidth_mhz();
    let mut out = DMatrix::zeros(m, n);
    for sc in 0..n {
        let col = column_rates_to_powers(r.column(sc), &ch.ranked_gains(sc), sigma2, bw);
        out.column_mut(sc).copy_from_slice(&col);
    }
    PowerAllocation::from_matrix_unchecked(out)
}

/// Inverse-gain differences `sigma^2/H_j - sigma^2/H_{j+1}` with
/// `sigma^2/H_{M+1} = 0`. Nonnegative for ranked gains.
pub fn transmission_coefficients(ranked_gains: &[f64], sigma2: f64) -> Vec<f64> {
    let m = ranked_gains.len();
    (0..m)
        .map(|j| {
            let next = if j + 1 < m { sigma2 / ranked_gains[j + 1] } else { 0.0 };
            sigma2 / ranked_gains[j] - next
        })
        .collect()
}

/// Total radiated power on one subcarrier from the telescoped closed form
/// `sum_j c_j 2^{C_j/B} - sigma^2/H_1`, with `C_j` the cumulative rate of ranks
/// `0..=j`. The constant is folded into the sum as `sum_j c_j (2^{C_j/B} - 1)`.
pub fn subcarrier_sum_power(r_col: &[f64], ranked_gains: &[f64], sigma2: f64, bw_mhz: f64) -> f64 {
    let coeffs = transmission_coefficients(ranked_gains, sigma2);
    let mut cumulative = 0.0;
    let mut total = 0.0;
    for (j, &c) in coeffs.iter().enumerate() {
        cumulative += r_col[j];
        total += c * (cumulative * LN_2 / bw_mhz).exp_m1();
    }
    total
}

/// Checks `W^M = 0` and `(I - W)(I + W + ... + W^{M-1}) = I` for the
/// superdiagonal matrix with entries `2^{r_j/B}`. Residuals are compared to
/// `1e-10` times the magnitude of the products that produce them.
pub fn nilpotent_inverse_check(r_col: &[f64], bw_mhz: f64) -> bool {
    let m = r_col.len();
    let mut w = DMatrix::<f64>::zeros(m, m);
    for j in 0..m.saturating_sub(1) {
        w[(j, j + 1)] = (r_col[j] / bw_mhz).exp2();
    }
    let identity = DMatrix::<f64>::identity(m, m);
    let mut series = identity.clone();
    let mut power = identity.clone();
    for _ in 1..m {
        power = &power * &w;
        series += &power;
    }
    let nilpotent = (&power * &w).iter().all(|&v| v == 0.0);

    let lhs = &identity - &w;
    let product = &lhs * &series;
    let magnitude = lhs.abs() * series.abs();
    let inverse_ok = product
        .iter()
        .zip(identity.iter())
        .zip(magnitude.iter())
        .all(|((&got, &want), &mag)| (got - want).abs() <= 1e-10 * mag.max(1.0));
    nilpotent && inverse_ok
}

/// Indices whose value is strictly greater than `eps`.
pub fn support(values: &[f64], eps: f64) -> Vec<usize> {
    values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > eps)
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_power_gives_zero_rate() {
        let r = column_powers_to_rates(&[0.0, 0.0, 0.0], &[1.0, 2.0, 3.0], 1.0, 1.0);
        assert_eq!(r, vec![0.0; 3]);
    }

    #[test]
    fn single_user_shannon() {
        let r = column_powers_to_rates(&[1.5], &[2.0], 1.0, 1.0);
        assert!((r[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn two_user_forward_example() {
        let r = column_powers_to_rates(&[1.25, 0.25], &[1.0, 4.0], 1.0, 1.0);
        assert!((r[0] - 1.0).abs() < 1e-14 && (r[1] - 1.0).abs() < 1e-14, "{r:?}");
    }

    #[test]
    fn two_user_backward_example() {
        let p = column_rates_to_powers(&[1.0, 1.0], &[1.0, 4.0], 1.0, 1.0);
        assert!((p[0] - 1.25).abs() < 1e-14 && (p[1] - 0.25).abs() < 1e-14, "{p:?}");
        // SIC recursion: a_2 = p_2 must give rate 1 alone, a_1 = 2 a_2 + (2 - 1)
        let a2 = p[1];
        assert!((a2 - (2f64 - 1.0) / 4.0).abs() < 1e-15);
        assert!((p[0] + p[1] - (2.0 * a2 + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn zero_rates_zero_powers() {
        let p = column_rates_to_powers(&[0.0; 4], &[0.1, 0.2, 0.3, 0.4], 1e-3, 1.0);
        assert!(p.iter().all(|&v| v == 0.0));
        assert_eq!(subcarrier_sum_power(&[0.0; 4], &[0.1, 0.2, 0.3, 0.4], 1e-3, 1.0), 0.0);
    }

    /// Literal closed form, constant subtracted at the end.
    fn sum_power_literal(r: &[f64], h: &[f64], sigma2: f64, bw: f64) -> f64 {
        let m = r.len();
        let mut total = 0.0;
        let mut cum = 0.0;
        for j in 0..m {
            cum += r[j];
            let next = if j + 1 < m { sigma2 / h[j + 1] } else { 0.0 };
            total += (sigma2 / h[j] - next) * (cum / bw).exp2();
        }
        total - sigma2 / h[0]
    }

    #[test]
    fn closed_form_two_user_example() {
        let v = subcarrier_sum_power(&[1.0, 1.0], &[1.0, 4.0], 1.0, 1.0);
        assert!((v - 1.5).abs() < 1e-14);
        assert!((sum_power_literal(&[1.0, 1.0], &[1.0, 4.0], 1.0, 1.0) - 1.5).abs() < 1e-14);
    }

    #[test]
    fn closed_form_matches_literal_and_recursion_m3() {
        let r = [0.7, 1.9, 0.4];
        let h = [0.3, 0.8, 2.5];
        let literal = sum_power_literal(&r, &h, 0.5, 2.0);
        let folded = subcarrier_sum_power(&r, &h, 0.5, 2.0);
        let recursion: f64 = column_rates_to_powers(&r, &h, 0.5, 2.0).iter().sum();
        assert!((literal - folded).abs() <= 1e-12 * literal);
        assert!((recursion - folded).abs() <= 1e-12 * folded);
    }

    #[test]
    fn nilpotent_examples() {
        assert!(nilpotent_inverse_check(&[1.0, 0.3], 1.0));
        for m in 1..=8 {
            assert!(nilpotent_inverse_check(&vec![0.0; m], 1.0));
        }
        assert!(nilpotent_inverse_check(&[0.5, 2.0, 1.25, 3.0], 1.0));
    }

    #[test]
    fn support_rules() {
        assert_eq!(support(&[0.0, 5.0, 0.0], 1e-6), vec![1]);
        assert!(support(&[0.0, 0.0], 1e-6).is_empty());
        assert!(support(&[1e-6], 1e-6).is_empty());
    }

    #[test]
    fn negative_rates_rejected() {
        assert!(RateAllocation::new(DMatrix::from_element(1, 1, -1.0)).is_err());
    }

    fn column_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..7).prop_flat_map(|m| {
            (
                prop::collection::vec(prop_oneof![Just(0.0), 1e-3f64..6.0], m),
                prop::collection::vec(1e-3f64..10.0, m),
            )
        })
    }

    proptest! {
        #[test]
        fn round_trip_and_support((r, mut h) in column_strategy()) {
            h.sort_by(f64::total_cmp);
            let p = column_rates_to_powers(&r, &h, 0.2, 1.0);
            let back = column_powers_to_rates(&p, &h, 0.2, 1.0);
            for j in 0..r.len() {
                prop_assert!((back[j] - r[j]).abs() <= 1e-9 * r[j].max(1e-300));
                prop_assert_eq!(p[j] > 0.0, r[j] > 0.0);
            }
        }

        #[test]
        fn sum_power_strictly_increasing((r, mut h) in column_strategy(), idx in 0usize..6, bump in 1e-3f64..1.0) {
            h.sort_by(f64::total_cmp);
            let j = idx % r.len();
            let base = subcarrier_sum_power(&r, &h, 0.2, 1.0);
            let mut r2 = r.clone();
            r2[j] += bump;
            prop_assert!(subcarrier_sum_power(&r2, &h, 0.2, 1.0) > base);
        }
    }
}
