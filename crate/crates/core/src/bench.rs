//! Monte-Carlo parameter sweeps over random drops, with CSV and plot-data
//! output.
//!
//! Drop `d` draws one geometry and one channel set from seed `base_seed + d`;
//! every sweep value and every solver sees that same realization. Rows are
//! sorted by (sweep value, drop, solver) before they are returned, so the
//! output does not depend on scheduling.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{generate_channels, ChannelOptions, DropGeometry};
use crate::config::{SystemConfig, SystemSection};
use crate::error::{Error, Result};
use crate::oracle::{oma_baseline, oracle_cap_profile, oracle_optimum};
use crate::solver::{jpcuc, SolveReport, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Equal demand for every user, in Mbit/s.
    RateDemand,
    ClusterCap,
}

impl SweepAxis {
    pub fn column_name(self) -> &'static str {
        match self {
            SweepAxis::RateDemand => "rate_demand_mbps",
            SweepAxis::ClusterCap => "cluster_cap",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Jpcuc,
    Oracle,
    Oma,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Jpcuc => "jpcuc",
            SolverKind::Oracle => "oracle",
            SolverKind::Oma => "oma",
        }
    }

    pub fn run(self, cfg: &SystemConfig, ch: &crate::channel::ChannelSet, opts: &SolverOptions) -> Result<SolveReport> {
        match self {
            SolverKind::Jpcuc => jpcuc(cfg, ch, opts),
            SolverKind::Oracle => oracle_optimum(cfg, ch, opts),
            SolverKind::Oma => oma_baseline(cfg, ch, opts),
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jpcuc" => Ok(SolverKind::Jpcuc),
            "oracle" => Ok(SolverKind::Oracle),
            "oma" => Ok(SolverKind::Oma),
            other => Err(Error::InvalidConfig(format!("unknown solver '{other}'"))),
        }
    }
}

/// A full sweep: base problem, channel model, solver settings and the axis
/// being varied.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub system: SystemConfig,
    pub channel: ChannelOptions,
    pub solver: SolverOptions,
    pub sweep_axis: SweepAxis,
    pub sweep_values: Vec<f64>,
    pub num_drops: usize,
    pub base_seed: u64,
    pub solvers: Vec<SolverKind>,
}

impl ExperimentSpec {
    /// Desk scale: 4 users, 4 subcarriers, cap 2, 50 drops, demand sweep
    /// against orthogonal access.
    pub fn desk() -> Self {
        ExperimentSpec {
            system: SystemConfig::desk(),
            channel: ChannelOptions::default(),
            solver: SolverOptions::default(),
            sweep_axis: SweepAxis::RateDemand,
            sweep_values: vec![2.0, 4.0, 8.0, 12.0, 16.0],
            num_drops: 50,
            base_seed: 1,
            solvers: vec![SolverKind::Jpcuc, SolverKind::Oma],
        }
    }

    /// Desk-scale cap sweep: 4 users on 3 subcarriers at 16 Mbit/s, cap 1 to
    /// 4, with the exact optimum alongside.
    pub fn desk_cap_sweep() -> Self {
        ExperimentSpec {
            system: SystemConfig::uniform(4, 3, 16.0, 4),
            sweep_axis: SweepAxis::ClusterCap,
            sweep_values: vec![1.0, 2.0, 3.0, 4.0],
            solvers: vec![SolverKind::Jpcuc, SolverKind::Oracle],
            ..Self::desk()
        }
    }

    /// The published scale (10 users, 10 subcarriers); too large for the
    /// oracle.
    pub fn full_scale() -> Self {
        ExperimentSpec {
            system: SystemConfig::full_scale(),
            num_drops: 20,
            ..Self::desk()
        }
    }

    pub fn check(&self) -> Result<()> {
        self.system.check()?;
        self.solver.check()?;
        if self.sweep_values.is_empty() {
            return Err(Error::InvalidConfig("sweep values are empty".into()));
        }
        if !self.sweep_values.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig("sweep values must be strictly increasing".into()));
        }
        if self.num_drops == 0 {
            return Err(Error::InvalidConfig("number of drops below 1".into()));
        }
        if self.solvers.is_empty() {
            return Err(Error::InvalidConfig("no solvers requested".into()));
        }
        for cfg in self.sweep_configs() {
            cfg.check()?;
        }
        Ok(())
    }

    /// The system configuration at every sweep value.
    pub fn sweep_configs(&self) -> Vec<SystemConfig> {
        self.sweep_values
            .iter()
            .map(|&v| {
                let mut cfg = self.system.clone();
                match self.sweep_axis {
                    SweepAxis::RateDemand => cfg.set_uniform_demand(v),
                    SweepAxis::ClusterCap => cfg.cluster_cap = v.round() as usize,
                }
                cfg
            })
            .collect()
    }
}

/// `[experiment]` table of an experiment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub sweep_axis: SweepAxis,
    pub sweep_values: Vec<f64>,
    pub num_drops: usize,
    #[serde(default)]
    pub base_seed: u64,
    pub solvers: Vec<SolverKind>,
    /// Output directory, relative to the working directory.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// Experiment file: the configuration file plus an `[experiment]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub system: SystemSection,
    #[serde(default)]
    pub channel: ChannelOptions,
    #[serde(default)]
    pub solver: SolverOptions,
    pub experiment: ExperimentSection,
}

impl ExperimentFile {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn from_spec(spec: &ExperimentSpec, output: Option<PathBuf>) -> Self {
        ExperimentFile {
            system: SystemSection::from(&spec.system),
            channel: spec.channel.clone(),
            solver: spec.solver.clone(),
            experiment: ExperimentSection {
                sweep_axis: spec.sweep_axis,
                sweep_values: spec.sweep_values.clone(),
                num_drops: spec.num_drops,
                base_seed: spec.base_seed,
                solvers: spec.solvers.clone(),
                output,
            },
        }
    }

    pub fn to_spec(&self) -> Result<ExperimentSpec> {
        let spec = ExperimentSpec {
            system: self.system.to_config()?,
            channel: self.channel.clone(),
            solver: self.solver.clone(),
            sweep_axis: self.experiment.sweep_axis,
            sweep_values: self.experiment.sweep_values.clone(),
            num_drops: self.experiment.num_drops,
            base_seed: self.experiment.base_seed,
            solvers: self.experiment.solvers.clone(),
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("experiment serializes to TOML")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    NotConverged,
    /// No clustering satisfies the cap (oracle only).
    Infeasible,
    Error,
}

impl RowStatus {
    pub fn name(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::NotConverged => "not_converged",
            RowStatus::Infeasible => "infeasible",
            RowStatus::Error => "error",
        }
    }
}

impl FromStr for RowStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ok" => Ok(RowStatus::Ok),
            "not_converged" => Ok(RowStatus::NotConverged),
            "infeasible" => Ok(RowStatus::Infeasible),
            "error" => Ok(RowStatus::Error),
            other => Err(Error::InvalidConfig(format!("unknown status '{other}'"))),
        }
    }
}

/// One solver run on one drop at one sweep value. Powers in W; failed runs
/// carry NaN powers.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub drop: usize,
    pub solver: SolverKind,
    pub rate_demand_mbps: f64,
    pub cluster_cap: usize,
    pub status: RowStatus,
    pub power_total_w: f64,
    pub power_transmission_w: f64,
    pub power_decoding_w: f64,
    pub outer_iters: usize,
    pub cap_satisfied: bool,
    /// Not written to the main CSV, which must be reproducible byte for byte.
    pub wall_time_s: f64,
}

impl ResultRow {
    /// The row as it reads back from CSV: floats at 9 significant digits,
    /// wall time dropped.
    pub fn rounded(&self) -> Self {
        let r = |v: f64| fmt_float(v).parse::<f64>().expect("formatted float parses");
        ResultRow {
            sweep_value: r(self.sweep_value),
            rate_demand_mbps: r(self.rate_demand_mbps),
            power_total_w: r(self.power_total_w),
            power_transmission_w: r(self.power_transmission_w),
            power_decoding_w: r(self.power_decoding_w),
            wall_time_s: 0.0,
            ..self.clone()
        }
    }
}

fn blank_row(cfg: &SystemConfig, sweep_value: f64, drop: usize, solver: SolverKind) -> ResultRow {
    ResultRow {
        sweep_value,
        drop,
        solver,
        rate_demand_mbps: cfg.rate_demand_mbps[0],
        cluster_cap: cfg.cluster_cap,
        status: RowStatus::Error,
        power_total_w: f64::NAN,
        power_transmission_w: f64::NAN,
        power_decoding_w: f64::NAN,
        outer_iters: 0,
        cap_satisfied: false,
        wall_time_s: 0.0,
    }
}

fn fill_row(row: &mut ResultRow, outcome: Result<&SolveReport, &Error>) {
    match outcome {
        Ok(report) => {
            row.status = if report.converged {
                RowStatus::Ok
            } else {
                RowStatus::NotConverged
            };
            row.power_total_w = report.objective.total;
            row.power_transmission_w = report.objective.transmission_power;
            row.power_decoding_w = report.objective.decoding_power;
            row.outer_iters = report.outer_iters;
            row.cap_satisfied = report.cap_satisfied;
        }
        Err(Error::NoFeasiblePattern { .. }) => row.status = RowStatus::Infeasible,
        Err(e) => {
            row.status = RowStatus::Error;
            log::warn!("{} failed on drop {} at {}: {e}", row.solver, row.drop, row.sweep_value);
        }
    }
}

/// All rows of one drop, tagged with their sweep index.
fn run_drop(spec: &ExperimentSpec, configs: &[SystemConfig], drop: usize) -> Vec<(usize, ResultRow)> {
    let seed = spec.base_seed.wrapping_add(drop as u64);
    let geometry = DropGeometry::uniform(spec.system.num_users, spec.channel.area_side_m, seed);
    let channels = generate_channels(&spec.system, &geometry, &spec.channel, seed);

    // a cap sweep gets every oracle value from one enumeration at the largest cap
    let shared_oracle = match (&channels, spec.sweep_axis) {
        (Ok(ch), SweepAxis::ClusterCap) if spec.solvers.contains(&SolverKind::Oracle) => {
            let top = configs.iter().max_by_key(|c| c.cluster_cap).expect("nonempty sweep");
            let start = Instant::now();
            let profile = oracle_cap_profile(top, ch, &spec.solver);
            Some((profile, start.elapsed().as_secs_f64() / configs.len() as f64))
        }
        _ => None,
    };

    let mut rows = Vec::new();
    for (idx, (cfg, &value)) in configs.iter().zip(&spec.sweep_values).enumerate() {
        for &solver in &spec.solvers {
            let mut row = blank_row(cfg, value, drop, solver);
            let ch = match &channels {
                Ok(ch) => ch,
                Err(e) => {
                    fill_row(&mut row, Err(e));
                    rows.push((idx, row));
                    continue;
                }
            };
            match (&shared_oracle, solver) {
                (Some((profile, share)), SolverKind::Oracle) => {
                    row.wall_time_s = *share;
                    match profile {
                        Ok(p) => fill_row(&mut row, p[cfg.cluster_cap - 1].as_ref()),
                        Err(e) => fill_row(&mut row, Err(e)),
                    }
                }
                _ => {
                    let start = Instant::now();
                    let outcome = solver.run(cfg, ch, &spec.solver);
                    row.wall_time_s = start.elapsed().as_secs_f64();
                    fill_row(&mut row, outcome.as_ref());
                }
            }
            rows.push((idx, row));
        }
    }
    rows
}

/// Runs every solver on every drop at every sweep value.
///
/// Channels depend only on the drop, so every sweep value and solver sees
/// the same realizations.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    spec.check()?;
    let configs = spec.sweep_configs();
    let mut rows: Vec<(usize, ResultRow)> = (0..spec.num_drops)
        .into_par_iter()
        .flat_map_iter(|drop| run_drop(spec, &configs, drop))
        .collect();
    rows.sort_by(|a, b| (a.0, a.1.drop, a.1.solver).cmp(&(b.0, b.1.drop, b.1.solver)));
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

/// Nine significant digits.
fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.8e}")
    }
}

pub const CSV_HEADER: [&str; 11] = [
    "sweep_value",
    "drop",
    "solver",
    "rate_demand_mbps",
    "cluster_cap",
    "status",
    "power_total_w",
    "power_transmission_w",
    "power_decoding_w",
    "outer_iters",
    "cap_satisfied",
];

/// Writes the table as CSV: header row, then one row per record.
pub fn emit_csv(table: &[ResultRow], path: &Path) -> Result<()> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(CSV_HEADER)?;
        for row in table {
            w.write_record([
                fmt_float(row.sweep_value),
                row.drop.to_string(),
                row.solver.name().to_string(),
                fmt_float(row.rate_demand_mbps),
                row.cluster_cap.to_string(),
                row.status.name().to_string(),
                fmt_float(row.power_total_w),
                fmt_float(row.power_transmission_w),
                fmt_float(row.power_decoding_w),
                row.outer_iters.to_string(),
                row.cap_satisfied.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Wall times, kept apart from the reproducible CSV.
pub fn emit_timing(table: &[ResultRow], path: &Path) -> Result<()> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sweep_value", "drop", "solver", "wall_time_s"])?;
    for row in table {
        w.write_record([
            fmt_float(row.sweep_value),
            row.drop.to_string(),
            row.solver.name().to_string(),
            format!("{:.6}", row.wall_time_s),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a table written by [`emit_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let bad = |what: &str| Error::Parse {
        path: path.to_path_buf(),
        message: format!("bad {what}"),
    };
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).ok_or_else(|| bad(CSV_HEADER[i]));
        let float = |i: usize| field(i)?.parse::<f64>().map_err(|_| bad(CSV_HEADER[i]));
        let int = |i: usize| field(i)?.parse::<usize>().map_err(|_| bad(CSV_HEADER[i]));
        out.push(ResultRow {
            sweep_value: float(0)?,
            drop: int(1)?,
            solver: field(2)?.parse()?,
            rate_demand_mbps: float(3)?,
            cluster_cap: int(4)?,
            status: field(5)?.parse()?,
            power_total_w: float(6)?,
            power_transmission_w: float(7)?,
            power_decoding_w: float(8)?,
            outer_iters: int(9)?,
            cap_satisfied: field(10)?.parse().map_err(|_| bad(CSV_HEADER[10]))?,
            wall_time_s: 0.0,
        });
    }
    Ok(out)
}

/// Mean total power per (solver, sweep value) over the drops with a finite
/// result.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub solver: SolverKind,
    pub points: Vec<(f64, f64)>,
}

pub fn aggregate(table: &[ResultRow]) -> Vec<Series> {
    let mut solvers: Vec<SolverKind> = table.iter().map(|r| r.solver).collect();
    solvers.sort();
    solvers.dedup();
    solvers
        .into_iter()
        .map(|solver| {
            let mut values: Vec<f64> = table
                .iter()
                .filter(|r| r.solver == solver)
                .map(|r| r.sweep_value)
                .collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            let points = values
                .into_iter()
                .map(|v| {
                    let totals: Vec<f64> = table
                        .iter()
                        .filter(|r| r.solver == solver && r.sweep_value == v && r.power_total_w.is_finite())
                        .map(|r| r.power_total_w)
                        .collect();
                    let mean = if totals.is_empty() {
                        f64::NAN
                    } else {
                        totals.iter().sum::<f64>() / totals.len() as f64
                    };
                    (v, mean)
                })
                .collect();
            Series { solver, points }
        })
        .collect()
}

/// Writes one whitespace-separated `(sweep value, mean total power)` file
/// per solver into `dir`, named `<solver>.dat`.
pub fn emit_plot_data(table: &[ResultRow], axis: SweepAxis, dir: &Path) -> Result<Vec<PathBuf>> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for series in aggregate(table) {
        let path = dir.join(format!("{}.dat", series.solver.name()));
        let mut text = format!("# {} power_total_w\n", axis.column_name());
        for (x, y) in &series.points {
            text.push_str(&format!("{} {}\n", fmt_float(*x), fmt_float(*y)));
        }
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(solver: SolverKind, value: f64, drop: usize, total: f64) -> ResultRow {
        ResultRow {
            sweep_value: value,
            drop,
            solver,
            rate_demand_mbps: value,
            cluster_cap: 2,
            status: RowStatus::Ok,
            power_total_w: total,
            power_transmission_w: total * 0.25,
            power_decoding_w: total * 0.75,
            outer_iters: 7,
            cap_satisfied: true,
            wall_time_s: 0.01,
        }
    }

    #[test]
    fn empty_table_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        assert!(matches!(emit_csv(&[], &path), Err(Error::EmptyTable)));
        assert!(!path.exists());
    }

    #[test]
    fn single_row_is_two_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        emit_csv(&[row(SolverKind::Jpcuc, 4.0, 0, 0.123456789123)], &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("sweep_value,drop,solver,rate_demand_mbps"));
        assert!(text.contains("1.23456789e-1"));
    }

    #[test]
    fn csv_parses_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let mut table = vec![
            row(SolverKind::Jpcuc, 2.0, 0, std::f64::consts::PI),
            row(SolverKind::Oma, 2.0, 0, 1.0 / 3.0),
            row(SolverKind::Oracle, 8.0, 1, 12345.678901234),
        ];
        table[2].status = RowStatus::Infeasible;
        table[2].power_total_w = f64::NAN;
        emit_csv(&table, &path).unwrap();
        let back = read_csv(&path).unwrap();
        assert_eq!(back.len(), table.len());
        for (b, t) in back.iter().zip(&table) {
            let r = t.rounded();
            assert_eq!(b.status, r.status);
            assert_eq!(b.solver, r.solver);
            assert_eq!(b.sweep_value, r.sweep_value);
            assert!(b.power_total_w == r.power_total_w || (b.power_total_w.is_nan() && r.power_total_w.is_nan()));
            assert_eq!(b.power_decoding_w, r.power_decoding_w);
        }
    }

    #[test]
    fn plot_series_means() {
        let table = vec![
            row(SolverKind::Jpcuc, 2.0, 0, 1.0),
            row(SolverKind::Jpcuc, 2.0, 1, 2.0),
            row(SolverKind::Jpcuc, 2.0, 2, 4.5),
        ];
        let series = aggregate(&table);
        assert_eq!(series.len(), 1);
        assert_eq!(series[0].points.len(), 1);
        assert!((series[0].points[0].1 - 7.5 / 3.0).abs() < 1e-12);

        let dir = tempfile::tempdir().unwrap();
        let files = emit_plot_data(&table, SweepAxis::RateDemand, dir.path()).unwrap();
        assert_eq!(files.len(), 1);
        let text = fs::read_to_string(&files[0]).unwrap();
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data.len(), 1);
        assert_eq!(data[0].split_whitespace().count(), 2);
    }

    #[test]
    fn spec_validation() {
        let mut spec = ExperimentSpec::desk();
        assert!(spec.check().is_ok());
        spec.sweep_values = vec![4.0, 2.0];
        assert!(spec.check().is_err());
        spec.sweep_values.clear();
        assert!(spec.check().is_err());
        let mut spec = ExperimentSpec::desk();
        spec.num_drops = 0;
        assert!(spec.check().is_err());
        let mut spec = ExperimentSpec::desk();
        spec.sweep_axis = SweepAxis::ClusterCap;
        spec.sweep_values = vec![1.0, 5.0];
        assert!(spec.check().is_err(), "cap 5 exceeds 4 users");
    }

    #[test]
    fn experiment_file_round_trip() {
        let spec = ExperimentSpec::desk();
        let file = ExperimentFile::from_spec(&spec, Some(PathBuf::from("out")));
        let text = file.to_toml_string();
        let back = ExperimentFile::from_toml_str(&text, Path::new("inline")).unwrap();
        let spec2 = back.to_spec().unwrap();
        assert_eq!(spec2.sweep_values, spec.sweep_values);
        assert_eq!(spec2.solvers, spec.solvers);
        assert_eq!(spec2.system.rate_demand_mbps, spec.system.rate_demand_mbps);
    }
}
