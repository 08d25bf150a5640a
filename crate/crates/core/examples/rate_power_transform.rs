//! Maps rates to powers on one shared subcarrier and back, and shows the
//! effect of the decoding order.

use noma_power::prelude::*;
use noma_power::transform::{column_powers_to_rates, column_rates_to_powers, subcarrier_sum_power};

fn main() {
    let cfg = SystemConfig::uniform(3, 1, 2.0, 3);
    let sigma2 = cfg.noise_power_w();
    let bw = cfg.bandwidth_mhz();
    // ascending gains: rank 0 is decoded first
    let gains = [1e-13, 1e-12, 1e-11];
    let rates = [1.0, 2.0, 0.5];

    let powers = column_rates_to_powers(&rates, &gains, sigma2, bw);
    let back = column_powers_to_rates(&powers, &gains, sigma2, bw);
    println!("rates  [Mbit/s] {rates:?}");
    let shown: Vec<String> = powers.iter().map(|p| format!("{p:.4e}")).collect();
    println!("powers [W]      [{}]", shown.join(", "));
    println!("round trip      {back:?}");
    println!(
        "sum power {:.6e} W (closed form) vs {:.6e} W (summed)",
        subcarrier_sum_power(&rates, &gains, sigma2, bw),
        powers.iter().sum::<f64>()
    );

    // the same rates with the strongest user alone on its own carrier
    let shared = subcarrier_sum_power(&rates[..2], &gains[..2], sigma2, bw);
    let alone = subcarrier_sum_power(&rates[2..], &gains[2..], sigma2, bw);
    println!("split into two carriers: {:.6e} W", shared + alone);
}
