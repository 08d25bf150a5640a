//! The convex majorizer stays above the log-smoothed objective and touches
//! it at the anchor.

use noma_power::objective::{smoothed_objective, surrogate_objective, update_surrogate};
use noma_power::prelude::*;
use noma_power::solver::init_feasible;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> noma_power::Result<()> {
    let cfg = SystemConfig::uniform(3, 3, 4.0, 2);
    let geometry = DropGeometry::uniform(3, 300.0, 3);
    let ch = generate_channels(&cfg, &geometry, &ChannelOptions::default(), 3)?;
    let tau = cfg.tau();

    let anchor = init_feasible(&cfg, &ch);
    let params = update_surrogate(&anchor, tau);
    println!(
        "at the anchor: smoothed {:.6e}, majorizer {:.6e}",
        smoothed_objective(&anchor, &ch, &cfg, tau),
        surrogate_objective(&anchor, &ch, &cfg, &params)
    );

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let r = RateAllocation::from_fn(3, 3, |_, _| rng.random_range(0.0..3.0))?;
        let f = smoothed_objective(&r, &ch, &cfg, tau);
        let g = surrogate_objective(&r, &ch, &cfg, &params);
        println!("smoothed {f:.6e} <= majorizer {g:.6e}: {}", f <= g);
    }
    Ok(())
}
