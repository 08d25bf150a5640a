//! Exhaustive optimum for every cluster cap on one drop, from a single
//! enumeration.

use noma_power::oracle::oracle_cap_profile;
use noma_power::prelude::*;

fn main() -> noma_power::Result<()> {
    let cfg = SystemConfig::uniform(4, 3, 16.0, 4);
    let geometry = DropGeometry::uniform(4, 300.0, 2);
    let ch = generate_channels(&cfg, &geometry, &ChannelOptions::default(), 2)?;
    for (i, best) in oracle_cap_profile(&cfg, &ch, &SolverOptions::default())?
        .into_iter()
        .enumerate()
    {
        match best {
            Ok(r) => println!("L = {}: {:.4e} W, clusters {:?}", i + 1, r.objective.total, r.support_per_subcarrier),
            Err(e) => println!("L = {}: {e}", i + 1),
        }
    }
    Ok(())
}
