//! Runs the joint clustering/power solver on one desk-scale drop and prints
//! its trace and the resulting clusters.

use noma_power::prelude::*;

fn main() -> noma_power::Result<()> {
    env_logger::init();
    let cfg = SystemConfig::desk();
    let geometry = DropGeometry::uniform(cfg.num_users, 300.0, 5);
    let ch = generate_channels(&cfg, &geometry, &ChannelOptions::default(), 5)?;

    let report = jpcuc(&cfg, &ch, &SolverOptions::default())?;
    for t in &report.trace {
        println!(
            "iter {:3}: smoothed {:.6e}  majorizer {:.6e}",
            t.iteration, t.smoothed_objective, t.surrogate_value
        );
    }
    for (n, users) in report.support_per_subcarrier.iter().enumerate() {
        println!("subcarrier {n}: users {users:?}");
    }
    let o = report.objective;
    println!(
        "total {:.4e} W = transmission {:.4e} + decoding {:.4e}; converged {}, cap satisfied {}",
        o.total, o.transmission_power, o.decoding_power, report.converged, report.cap_satisfied
    );
    Ok(())
}
