//! Problem configuration and the TOML file schema that mirrors it.
//!
//! Internal units: rates in Mbit/s, bandwidth in MHz (so `r / B` is
//! dimensionless bit/s/Hz), power in W, decoder efficiency in J/Mbit.
//! The file schema carries units in its key names.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{dbm_to_watts, watts_to_dbm, ChannelOptions};
use crate::error::{Error, Result};
use crate::solver::SolverOptions;

/// Dimensions, physical constants and per-user parameters of one problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub num_users: usize,
    pub num_subcarriers: usize,
    pub bandwidth_hz: f64,
    /// Noise power spectral density; the per-subcarrier noise power is this
    /// times `bandwidth_hz`.
    pub noise_psd_w_per_hz: f64,
    pub decoder_efficiency_j_per_mbit: Vec<f64>,
    pub rate_demand_mbps: Vec<f64>,
    /// Maximum number of users multiplexed on one subcarrier.
    pub cluster_cap: usize,
    pub penalty_exponent: u32,
    /// Log-smoothing regularizer in Mbit/s. `None` resolves to
    /// `1e-3 * min_m R_m / N`.
    pub reweight_tau: Option<f64>,
    /// Rates at or below this value (Mbit/s) count as inactive. `None`
    /// resolves to `1e-6 * min_m R_m / N`.
    pub epsilon_support: Option<f64>,
}

pub const DEFAULT_NOISE_PSD_DBM_PER_HZ: f64 = -174.0;
pub const DEFAULT_DECODER_EFFICIENCY_J_PER_MBIT: f64 = 0.01;
pub const DEFAULT_PENALTY_EXPONENT: u32 = 10;
pub const DEFAULT_BANDWIDTH_HZ: f64 = 1e6;

impl SystemConfig {
    /// Equal demand and equal decoder efficiency for every user, with the
    /// default radio parameters (1 MHz subcarriers, -174 dBm/Hz, K = 10).
    pub fn uniform(num_users: usize, num_subcarriers: usize, rate_mbps: f64, cluster_cap: usize) -> Self {
        SystemConfig {
            num_users,
            num_subcarriers,
            bandwidth_hz: DEFAULT_BANDWIDTH_HZ,
            noise_psd_w_per_hz: dbm_to_watts(DEFAULT_NOISE_PSD_DBM_PER_HZ),
            decoder_efficiency_j_per_mbit: vec![DEFAULT_DECODER_EFFICIENCY_J_PER_MBIT; num_users],
            rate_demand_mbps: vec![rate_mbps; num_users],
            cluster_cap,
            penalty_exponent: DEFAULT_PENALTY_EXPONENT,
            reweight_tau: None,
            epsilon_support: None,
        }
    }

    /// Desk-scale preset: small enough for the exhaustive oracle.
    pub fn desk() -> Self {
        Self::uniform(4, 4, 8.0, 2)
    }

    /// Full scale: 10 users on 10 subcarriers. Too large for the oracle.
    pub fn full_scale() -> Self {
        Self::uniform(10, 10, 8.0, 2)
    }

    pub fn bandwidth_mhz(&self) -> f64 {
        self.bandwidth_hz * 1e-6
    }

    /// Noise power per subcarrier in W.
    pub fn noise_power_w(&self) -> f64 {
        self.noise_psd_w_per_hz * self.bandwidth_hz
    }

    /// Sets the per-subcarrier noise power, keeping the bandwidth.
    pub fn set_noise_power_w(&mut self, sigma2: f64) {
        self.noise_psd_w_per_hz = sigma2 / self.bandwidth_hz;
    }

    pub fn set_uniform_demand(&mut self, rate_mbps: f64) {
        self.rate_demand_mbps = vec![rate_mbps; self.num_users];
    }

    /// `min_m R_m / N`, the reference rate scale for thresholds.
    pub fn rate_scale(&self) -> f64 {
        let min_demand = self
            .rate_demand_mbps
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        min_demand / self.num_subcarriers as f64
    }

    pub fn tau(&self) -> f64 {
        self.reweight_tau.unwrap_or(1e-3 * self.rate_scale())
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon_support.unwrap_or(1e-6 * self.rate_scale())
    }

    /// Returns the config unchanged if every invariant holds, otherwise the
    /// first violated one.
    pub fn validate(self) -> Result<Self> {
        self.check()?;
        Ok(self)
    }

    pub fn check(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_users == 0 {
            return fail("number of users below 1".into());
        }
        if self.num_subcarriers == 0 {
            return fail("number of subcarriers below 1".into());
        }
        if self.cluster_cap == 0 {
            return fail("cluster cap below 1".into());
        }
        if self.cluster_cap > self.num_users {
            return fail(format!(
                "cluster cap {} exceeds number of users {}",
                self.cluster_cap, self.num_users
            ));
        }
        if self.penalty_exponent == 0 {
            return fail("penalty exponent below 1".into());
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return fail("nonpositive bandwidth".into());
        }
        if !(self.noise_psd_w_per_hz > 0.0 && self.noise_psd_w_per_hz.is_finite()) {
            return fail("nonpositive noise power".into());
        }
        if self.rate_demand_mbps.len() != self.num_users {
            return fail(format!(
                "{} rate demands for {} users",
                self.rate_demand_mbps.len(),
                self.num_users
            ));
        }
        if self.decoder_efficiency_j_per_mbit.len() != self.num_users {
            return fail(format!(
                "{} decoder efficiencies for {} users",
                self.decoder_efficiency_j_per_mbit.len(),
                self.num_users
            ));
        }
        if let Some(u) = self
            .rate_demand_mbps
            .iter()
            .position(|&r| !(r > 0.0 && r.is_finite()))
        {
            return fail(format!("nonpositive rate demand for user {}", u + 1));
        }
        if let Some(u) = self
            .decoder_efficiency_j_per_mbit
            .iter()
            .position(|&l| !(l >= 0.0 && l.is_finite()))
        {
            return fail(format!("negative decoder efficiency for user {}", u + 1));
        }
        if let Some(tau) = self.reweight_tau {
            if !(tau > 0.0 && tau.is_finite()) {
                return fail("nonpositive reweighting tau".into());
            }
        }
        if let Some(eps) = self.epsilon_support {
            if !(eps >= 0.0 && eps.is_finite()) {
                return fail("negative support threshold".into());
            }
        }
        Ok(())
    }
}

/// Free function form of [`SystemConfig::validate`].
pub fn validate_config(cfg: SystemConfig) -> Result<SystemConfig> {
    cfg.validate()
}

/// A per-user quantity given either once for everybody or as a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerUser {
    Uniform(f64),
    List(Vec<f64>),
}

impl PerUser {
    fn expand(&self, num_users: usize) -> Vec<f64> {
        match self {
            PerUser::Uniform(v) => vec![*v; num_users],
            PerUser::List(v) => v.clone(),
        }
    }
}

/// `[system]` table of the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub num_users: usize,
    pub num_subcarriers: usize,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_hz: f64,
    #[serde(default = "default_noise")]
    pub noise_psd_dbm_per_hz: f64,
    #[serde(default = "default_lambda")]
    pub decoder_efficiency_j_per_mbit: PerUser,
    pub rate_demand_mbps: PerUser,
    pub cluster_cap: usize,
    #[serde(default = "default_k")]
    pub penalty_exponent: u32,
    #[serde(default)]
    pub reweight_tau_mbps: Option<f64>,
    #[serde(default)]
    pub epsilon_support_mbps: Option<f64>,
}

fn default_bandwidth() -> f64 {
    DEFAULT_BANDWIDTH_HZ
}
fn default_noise() -> f64 {
    DEFAULT_NOISE_PSD_DBM_PER_HZ
}
fn default_lambda() -> PerUser {
    PerUser::Uniform(DEFAULT_DECODER_EFFICIENCY_J_PER_MBIT)
}
fn default_k() -> u32 {
    DEFAULT_PENALTY_EXPONENT
}

impl From<&SystemConfig> for SystemSection {
    fn from(cfg: &SystemConfig) -> Self {
        SystemSection {
            num_users: cfg.num_users,
            num_subcarriers: cfg.num_subcarriers,
            bandwidth_hz: cfg.bandwidth_hz,
            noise_psd_dbm_per_hz: watts_to_dbm(cfg.noise_psd_w_per_hz),
            decoder_efficiency_j_per_mbit: PerUser::List(cfg.decoder_efficiency_j_per_mbit.clone()),
            rate_demand_mbps: PerUser::List(cfg.rate_demand_mbps.clone()),
            cluster_cap: cfg.cluster_cap,
            penalty_exponent: cfg.penalty_exponent,
            reweight_tau_mbps: cfg.reweight_tau,
            epsilon_support_mbps: cfg.epsilon_support,
        }
    }
}

impl SystemSection {
    pub fn to_config(&self) -> Result<SystemConfig> {
        SystemConfig {
            num_users: self.num_users,
            num_subcarriers: self.num_subcarriers,
            bandwidth_hz: self.bandwidth_hz,
            noise_psd_w_per_hz: dbm_to_watts(self.noise_psd_dbm_per_hz),
            decoder_efficiency_j_per_mbit: self.decoder_efficiency_j_per_mbit.expand(self.num_users),
            rate_demand_mbps: self.rate_demand_mbps.expand(self.num_users),
            cluster_cap: self.cluster_cap,
            penalty_exponent: self.penalty_exponent,
            reweight_tau: self.reweight_tau_mbps,
            epsilon_support: self.epsilon_support_mbps,
        }
        .validate()
    }
}

/// Whole configuration file: `[system]`, optional `[channel]` and `[solver]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub system: SystemSection,
    #[serde(default)]
    pub channel: ChannelOptions,
    #[serde(default)]
    pub solver: SolverOptions,
}

impl ConfigFile {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SystemConfig {
        SystemConfig::uniform(2, 1, 1.0, 1)
    }

    #[test]
    fn accepts_valid_config() {
        let cfg = small();
        assert_eq!(validate_config(cfg.clone()).unwrap(), cfg);
    }

    #[test]
    fn rejects_zero_cluster_cap() {
        let mut cfg = small();
        cfg.cluster_cap = 0;
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("cluster cap below 1"), "{err}");
    }

    #[test]
    fn rejects_nonpositive_demand() {
        let mut cfg = small();
        cfg.rate_demand_mbps[0] = 0.0;
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("nonpositive rate demand"), "{err}");
    }

    #[test]
    fn rejects_cap_above_users() {
        let mut cfg = small();
        cfg.cluster_cap = 3;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn derived_thresholds_scale_with_demand() {
        let cfg = SystemConfig::uniform(3, 4, 8.0, 2);
        assert!((cfg.rate_scale() - 2.0).abs() < 1e-15);
        assert!((cfg.tau() - 2e-3).abs() < 1e-15);
        assert!((cfg.epsilon() - 2e-6).abs() < 1e-18);
    }

    #[test]
    fn noise_power_is_psd_times_bandwidth() {
        let cfg = small();
        let expected = dbm_to_watts(-174.0) * 1e6;
        assert!((cfg.noise_power_w() - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn file_round_trip() {
        let text = r#"
            [system]
            num_users = 3
            num_subcarriers = 2
            rate_demand_mbps = 2.0
            decoder_efficiency_j_per_mbit = [0.01, 0.02, 0.03]
            cluster_cap = 2

            [solver]
            outer_max_iters = 50
        "#;
        let file = ConfigFile::from_toml_str(text, Path::new("inline")).unwrap();
        let cfg = file.system.to_config().unwrap();
        assert_eq!(cfg.rate_demand_mbps, vec![2.0; 3]);
        assert_eq!(cfg.decoder_efficiency_j_per_mbit, vec![0.01, 0.02, 0.03]);
        assert_eq!(cfg.penalty_exponent, 10);
        assert_eq!(file.solver.outer_max_iters, 50);

        let again = ConfigFile::from_toml_str(&file.to_toml_string(), Path::new("again")).unwrap();
        assert_eq!(again.system.to_config().unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "[system]\nnum_users = 1\nnum_subcarriers = 1\nrate_demand_mbps = 1.0\ncluster_cap = 1\nbogus = 3\n";
        assert!(ConfigFile::from_toml_str(text, Path::new("x")).is_err());
    }
}
