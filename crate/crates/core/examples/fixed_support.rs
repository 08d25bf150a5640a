//! Compares hand-picked clusterings by solving the power problem with each
//! support pattern held fixed.

use noma_power::prelude::*;
use noma_power::solver::solve_fixed_support;
use noma_power::transform::rates_to_powers;

fn main() -> noma_power::Result<()> {
    let cfg = SystemConfig::uniform(3, 2, 6.0, 2);
    let geometry = DropGeometry::on_line(&[60.0, 150.0, 280.0]);
    let ch = generate_channels(&cfg, &geometry, &ChannelOptions::path_loss_only(), 0)?;
    let opts = SolverOptions::default();

    let patterns: [&[Vec<usize>]; 3] = [
        &[vec![0, 1], vec![2]],
        &[vec![0, 2], vec![1]],
        &[vec![0], vec![1, 2]],
    ];
    for supports in patterns {
        let out = solve_fixed_support(supports, &cfg, &ch, &opts)?;
        let p = total_power(&out.rates, &ch, &cfg);
        let powers = rates_to_powers(&out.rates, &ch, &cfg);
        let per_carrier: Vec<String> = (0..cfg.num_subcarriers)
            .map(|n| format!("{:.3e}", powers.column(n).iter().sum::<f64>()))
            .collect();
        println!(
            "{supports:?}: total {:.4e} W, per carrier [{}]",
            p.total,
            per_carrier.join(", ")
        );
    }
    Ok(())
}
