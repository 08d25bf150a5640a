//! Writes the desk preset as an experiment file, reads it back and runs a
//! one-drop version of it.

use noma_power::bench::{emit_csv, ExperimentFile};
use noma_power::prelude::*;

fn main() -> noma_power::Result<()> {
    let dir = std::env::temp_dir().join("noma-power-example");
    std::fs::create_dir_all(&dir).map_err(|e| noma_power::Error::io(&dir, e))?;

    let text = ExperimentFile::from_spec(&ExperimentSpec::desk(), None).to_toml_string();
    println!("{text}");
    let path = dir.join("desk.toml");
    std::fs::write(&path, &text).map_err(|e| noma_power::Error::io(&path, e))?;

    let mut spec = ExperimentFile::load(&path)?.to_spec()?;
    spec.num_drops = 1;
    spec.sweep_values.truncate(2);
    let rows = run_experiment(&spec)?;
    let csv = dir.join("results.csv");
    emit_csv(&rows, &csv)?;
    println!("{} rows written to {}", rows.len(), csv.display());
    Ok(())
}
