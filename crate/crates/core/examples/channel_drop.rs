//! Draws one drop and prints the per-subcarrier gains and SIC decoding order.

use noma_power::channel::linear_to_db;
use noma_power::prelude::*;

fn main() -> noma_power::Result<()> {
    let cfg = SystemConfig::desk();
    let geometry = DropGeometry::uniform(cfg.num_users, 300.0, 7);
    let ch = generate_channels(&cfg, &geometry, &ChannelOptions::default(), 7)?;

    for u in 0..cfg.num_users {
        let gains: Vec<String> = (0..cfg.num_subcarriers)
            .map(|n| format!("{:7.1}", linear_to_db(ch.gain(u, n))))
            .collect();
        println!("user {u} at {:5.1} m: gains [dB] {}", 1e3 * geometry.distance_km(u), gains.join(" "));
    }
    for n in 0..cfg.num_subcarriers {
        let order: Vec<usize> = (0..cfg.num_users).map(|j| ch.user_at(j, n)).collect();
        println!("subcarrier {n}: weakest to strongest {order:?}");
    }
    Ok(())
}
