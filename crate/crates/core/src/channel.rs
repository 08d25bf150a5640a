//! Drop geometry, large-scale path loss with log-normal shadowing, optional
//! Rayleigh small-scale fading, and per-subcarrier ranking of users by gain.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    linear_to_db(w) + 30.0
}

/// Macro-cell path loss in dB for a distance in km: `128.1 + 37.6 log10(d)`.
pub fn path_loss_db(distance_km: f64) -> f64 {
    128.1 + 37.6 * distance_km.log10()
}

/// Randomness applied on top of path loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelOptions {
    pub area_side_m: f64,
    /// Standard deviation of the per-user log-normal shadowing.
    pub shadowing_std_db: f64,
    /// Unit-mean Rayleigh fading power drawn per user and subcarrier.
    pub small_scale_fading: bool,
}

impl Default for ChannelOptions {
    fn default() -> Self {
        ChannelOptions {
            area_side_m: 300.0,
            shadowing_std_db: 4.0,
            small_scale_fading: true,
        }
    }
}

impl ChannelOptions {
    /// Deterministic path loss only.
    pub fn path_loss_only() -> Self {
        ChannelOptions {
            shadowing_std_db: 0.0,
            small_scale_fading: false,
            ..Self::default()
        }
    }
}

/// Base station and user positions in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropGeometry {
    pub bs_position: [f64; 2],
    pub user_positions: Vec<[f64; 2]>,
    pub area_side: f64,
}

impl DropGeometry {
    /// Users uniformly distributed in a square of side `area_side` centered
    /// on the base station at the origin.
    pub fn uniform(num_users: usize, area_side: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = area_side / 2.0;
        let user_positions = (0..num_users)
            .map(|_| {
                [
                    rng.random_range(-half..half),
                    rng.random_range(-half..half),
                ]
            })
            .collect();
        DropGeometry {
            bs_position: [0.0, 0.0],
            user_positions,
            area_side,
        }
    }

    /// Users placed on the x-axis at the given distances in meters.
    pub fn on_line(distances_m: &[f64]) -> Self {
        let max = distances_m.iter().copied().fold(0.0, f64::max);
        DropGeometry {
            bs_position: [0.0, 0.0],
            user_positions: distances_m.iter().map(|&d| [d, 0.0]).collect(),
            area_side: 2.0 * max + 1.0,
        }
    }

    pub fn distance_km(&self, user: usize) -> f64 {
        let [x, y] = self.user_positions[user];
        let [bx, by] = self.bs_position;
        ((x - bx).powi(2) + (y - by).powi(2)).sqrt() * 1e-3
    }
}

/// Channel power gains for every (user, subcarrier) plus the ascending-gain
/// ranking on each subcarrier.
///
/// `gains` is indexed by `(user, subcarrier)`. `rank_of[n][u]` is the 0-based
/// rank of user `u` on subcarrier `n` (rank 0 is the weakest) and
/// `user_at[n][j]` is its inverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    gains: DMatrix<f64>,
    rank_of: Vec<Vec<usize>>,
    user_at: Vec<Vec<usize>>,
}

impl ChannelSet {
    /// Builds a channel set from a user-by-subcarrier gain matrix.
    pub fn from_gains(gains: DMatrix<f64>) -> Result<Self> {
        if gains.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
            return Err(Error::InvalidConfig(
                "channel gains must be positive and finite".into(),
            ));
        }
        let (rank_of, user_at) = rank_users(&gains);
        Ok(ChannelSet {
            gains,
            rank_of,
            user_at,
        })
    }

    pub fn num_users(&self) -> usize {
        self.gains.nrows()
    }

    pub fn num_subcarriers(&self) -> usize {
        self.gains.ncols()
    }

    pub fn gain(&self, user: usize, subcarrier: usize) -> f64 {
        self.gains[(user, subcarrier)]
    }

    pub fn gains(&self) -> &DMatrix<f64> {
        &self.gains
    }

    pub fn rank_of(&self, user: usize, subcarrier: usize) -> usize {
        self.rank_of[subcarrier][user]
    }

    pub fn user_at(&self, rank: usize, subcarrier: usize) -> usize {
        self.user_at[subcarrier][rank]
    }

    /// Gains of subcarrier `n` listed in rank order (nondecreasing).
    pub fn ranked_gains(&self, subcarrier: usize) -> Vec<f64> {
        self.user_at[subcarrier]
            .iter()
            .map(|&u| self.gains[(u, subcarrier)])
            .collect()
    }
}

/// Ranks users on every subcarrier in ascending gain order, lower user index
/// first on ties. Returns `(rank_of, user_at)`, both indexed by subcarrier.
pub fn rank_users(gains: &DMatrix<f64>) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let (m, n) = gains.shape();
    let mut rank_of = Vec::with_capacity(n);
    let mut user_at = Vec::with_capacity(n);
    for col in 0..n {
        let mut order: Vec<usize> = (0..m).collect();
        // stable sort keeps the lower index first among equal gains
        order.sort_by(|&a, &b| gains[(a, col)].total_cmp(&gains[(b, col)]));
        let mut ranks = vec![0; m];
        for (j, &u) in order.iter().enumerate() {
            ranks[u] = j;
        }
        rank_of.push(ranks);
        user_at.push(order);
    }
    (rank_of, user_at)
}

/// Draws channel gains for one drop. Pure function of its arguments.
pub fn generate_channels(
    cfg: &SystemConfig,
    geometry: &DropGeometry,
    options: &ChannelOptions,
    seed: u64,
) -> Result<ChannelSet> {
    let m = cfg.num_users;
    let n = cfg.num_subcarriers;
    if geometry.user_positions.len() != m {
        return Err(Error::GeometryMismatch {
            expected: m,
            got: geometry.user_positions.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);

    let mut gains = DMatrix::zeros(m, n);
    for u in 0..m {
        let d = geometry.distance_km(u);
        if d <= 0.0 {
            return Err(Error::ZeroDistance { user: u });
        }
        let shadow_db = if options.shadowing_std_db > 0.0 {
            let z: f64 = StandardNormal.sample(&mut rng);
            options.shadowing_std_db * z
        } else {
            0.0
        };
        let large_scale = db_to_linear(-(path_loss_db(d) + shadow_db));
        for sc in 0..n {
            let fading: f64 = if options.small_scale_fading {
                Exp1.sample(&mut rng)
            } else {
                1.0
            };
            gains[(u, sc)] = large_scale * fading.max(f64::MIN_POSITIVE);
        }
    }
    ChannelSet::from_gains(gains)
}
