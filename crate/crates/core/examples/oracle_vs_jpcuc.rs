//! Solver, exhaustive optimum and orthogonal baseline on a few small drops.

use noma_power::prelude::*;

fn main() -> noma_power::Result<()> {
    let cfg = SystemConfig::uniform(3, 3, 4.0, 2);
    let opts = SolverOptions::default();
    println!("drop   jpcuc [W]    oracle [W]   oma [W]      gap");
    for seed in 0..8 {
        let geometry = DropGeometry::uniform(3, 300.0, seed);
        let ch = generate_channels(&cfg, &geometry, &ChannelOptions::default(), seed)?;
        let j = jpcuc(&cfg, &ch, &opts)?.objective.total;
        let o = oracle_optimum(&cfg, &ch, &opts)?.objective.total;
        let b = oma_baseline(&cfg, &ch, &opts)?.objective.total;
        println!("{seed:4}   {j:.4e}   {o:.4e}   {b:.4e}   {:.3}", (j - o) / o);
    }
    Ok(())
}
