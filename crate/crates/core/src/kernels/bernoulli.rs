use crate::error::{Error, Result};
use crate::rng::ShotSampler;
use crate::statevector::{self, Circuit};

use super::{BranchValues, KernelResult, Readout, ShotPlan, StencilWeights, UNIT_SLACK};

/// `2 asin(sqrt(u))`: the RY angle whose rotation of |0> reads 1 with
/// probability `u`.
pub fn bernoulli_angle(u: f64) -> Result<f64> {
    if !(-UNIT_SLACK..=1.0 + UNIT_SLACK).contains(&u) {
        return Err(Error::Domain(format!(
            "bernoulli encoder input {u} outside [0, 1]"
        )));
    }
    Ok(2.0 * u.clamp(0.0, 1.0).sqrt().asin())
}

/// One-qubit encoder `RY(2 asin sqrt u)` with its qubit measured.
pub fn bernoulli_encoder(u: f64) -> Result<Circuit> {
    Ok(Circuit::new(1).ry(0, bernoulli_angle(u)?).measure(0))
}

/// Split `total` shots across branches: every branch but the last gets
/// `round_half_even(w_b * total)`, the last takes the remainder. A negative
/// remainder is repaired by taking shots back from the largest branches.
pub fn allocate_shots(weights: &StencilWeights, total: u64) -> Result<ShotPlan> {
    if total == 0 {
        return Err(Error::validation("shot budget must be at least 1"));
    }
    let w = weights.as_slice();
    let n = w.len();
    let mut shots: Vec<i64> = w[..n - 1]
        .iter()
        .map(|&wb| (wb * total as f64).round_ties_even() as i64)
        .collect();
    let assigned: i64 = shots.iter().sum();
    shots.push(total as i64 - assigned);
    while shots[n - 1] < 0 {
        let (largest, _) = shots[..n - 1]
            .iter()
            .enumerate()
            .max_by_key(|(_, &s)| s)
            .expect("at least one rounded branch");
        shots[largest] -= 1;
        shots[n - 1] += 1;
    }
    Ok(ShotPlan {
        per_branch: shots.into_iter().map(|s| s as u64).collect(),
        total,
    })
}

/// Shot-weighted mixture of independent one-qubit encoders.
pub fn bernoulli_kernel(
    values: &BranchValues,
    weights: &StencilWeights,
    shots: u64,
    sampler: &ShotSampler,
) -> Result<KernelResult> {
    bernoulli_kernel_with(values, weights, shots, sampler, &Readout::ideal())
}

pub fn bernoulli_kernel_with(
    values: &BranchValues,
    weights: &StencilWeights,
    shots: u64,
    sampler: &ShotSampler,
    readout: &Readout,
) -> Result<KernelResult> {
    if values.len() != weights.len() {
        return Err(Error::validation(format!(
            "{} branch values for {} weights",
            values.len(),
            weights.len()
        )));
    }
    let plan = allocate_shots(weights, shots)?;
    let m = shots as f64;
    let mut estimate = 0.0;
    let mut variance = 0.0;
    let mut ones_per_branch = Vec::with_capacity(values.len());
    for (b, (&u, &mb)) in values.as_slice().iter().zip(&plan.per_branch).enumerate() {
        if mb == 0 {
            ones_per_branch.push(0);
            continue;
        }
        let encoder = bernoulli_encoder(u)?;
        let hist = statevector::sample(&encoder, mb, &mut sampler.fork(b as u64))?;
        let hist = readout.corrupt(hist, sampler, b as u64);
        let ones = hist.ones(0);
        let u_hat = ones as f64 / mb as f64;
        let share = mb as f64 / m;
        estimate += share * u_hat;
        variance += share * share * u_hat * (1.0 - u_hat) / mb as f64;
        ones_per_branch.push(ones);
    }
    let (estimate, std_error, clipped) = readout.finish(estimate, variance.sqrt());
    Ok(KernelResult {
        estimate,
        std_error,
        shots_used: shots,
        raw_counts: ones_per_branch,
        clipped,
    })
}

/// Infinite-shot value of the mixture with the ideal weights:
/// `sum_b w_b Pr_b(1)`, each `Pr_b(1)` read off the encoder's statevector.
pub fn bernoulli_exact(values: &BranchValues, weights: &StencilWeights) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::validation("branch values and weights differ in length"));
    }
    values
        .as_slice()
        .iter()
        .zip(weights.as_slice())
        .try_fold(0.0, |acc, (&u, &w)| {
            let state = statevector::apply(&bernoulli_encoder(u)?)?;
            Ok(acc + w * statevector::readout_probability(&state, 0)?)
        })
}
