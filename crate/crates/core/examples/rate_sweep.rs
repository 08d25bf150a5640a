//! A shortened demand sweep: mean total power per solver and demand.

use noma_power::bench::aggregate;
use noma_power::prelude::*;

fn main() -> noma_power::Result<()> {
    let mut spec = ExperimentSpec::desk();
    spec.num_drops = 5;
    let rows = run_experiment(&spec)?;
    for series in aggregate(&rows) {
        let points: Vec<String> = series
            .points
            .iter()
            .map(|(x, y)| format!("{x}: {y:.4e}"))
            .collect();
        println!("{:6} {}", series.solver.name(), points.join("  "));
    }
    Ok(())
}
