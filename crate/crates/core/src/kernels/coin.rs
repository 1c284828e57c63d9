use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::rng::ShotSampler;
use crate::statevector::{self, Circuit};

/// `k_coin` fair coins, one `RY(pi/2)` per qubit, all measured.
pub fn coin_sum_circuit(k_coin: usize) -> Circuit {
    (0..k_coin).fold(Circuit::new(k_coin), |c, q| c.ry(q, FRAC_PI_2).measure(q))
}

/// Gaussian-like increments: each draw sums `k_coin` coin bits mapped to
/// `{-1, +1}` and scales by `sigma / sqrt(k_coin)`.
pub fn coin_sum_noise(
    k_coin: usize,
    sigma: f64,
    draws: u64,
    sampler: &mut ShotSampler,
) -> Result<Vec<f64>> {
    if k_coin == 0 {
        return Err(Error::validation("coin-sum noise needs at least one coin"));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::validation(format!("noise scale {sigma} must be >= 0")));
    }
    if draws == 0 {
        return Ok(Vec::new());
    }
    let circuit = coin_sum_circuit(k_coin);
    let state = statevector::apply(&circuit)?;
    let distribution = state.marginal(circuit.measured());
    let scale = sigma / (k_coin as f64).sqrt();
    // keep shot order: one draw per shot
    let mut cumulative = Vec::with_capacity(distribution.len());
    let mut acc = 0.0;
    for p in &distribution {
        acc += p;
        cumulative.push(acc);
    }
    let out = (0..draws)
        .map(|_| {
            let r = sampler.uniform() * acc;
            let outcome = cumulative
                .partition_point(|&c| c <= r)
                .min(distribution.len() - 1);
            let ones = outcome.count_ones() as i64;
            let sum = 2 * ones - k_coin as i64;
            if sigma == 0.0 {
                0.0
            } else {
                scale * sum as f64
            }
        })
        .collect();
    Ok(out)
}
