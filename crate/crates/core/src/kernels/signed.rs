//! Signed-coefficient mixtures, estimated either as two convex Bernoulli
//! mixtures (positive and negative part) or by magnitude-proportional branch
//! selection with the sign applied in software.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::ShotSampler;
use crate::statevector;

use super::{bernoulli_encoder, bernoulli_kernel, BranchValues, SignedTerm, StencilWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignedMode {
    BernoulliSplit,
    BranchSigned,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignedResult {
    pub estimate: f64,
    pub std_error: f64,
    pub shots_used: u64,
}

/// Estimate `sum_j c_j u_j`.
pub fn signed_mixture_kernel(
    terms: &[SignedTerm],
    shots: u64,
    sampler: &ShotSampler,
    mode: SignedMode,
) -> Result<SignedResult> {
    let mass: f64 = terms.iter().map(|t| t.coefficient.abs()).sum();
    if terms.is_empty() || mass == 0.0 {
        return Err(Error::Degenerate(
            "signed mixture has no nonzero coefficient".into(),
        ));
    }
    match mode {
        SignedMode::BernoulliSplit => split(terms, shots, sampler),
        SignedMode::BranchSigned => branch_signed(terms, mass, shots, sampler),
    }
}

/// Off-diagonal row product `sum_{j != i} a_ij u_j` for Jacobi-style sweeps.
pub fn row_kernel(row: &[SignedTerm], shots: u64, sampler: &ShotSampler) -> Result<SignedResult> {
    signed_mixture_kernel(row, shots, sampler, SignedMode::BranchSigned)
}

fn split(terms: &[SignedTerm], shots: u64, sampler: &ShotSampler) -> Result<SignedResult> {
    if shots < 2 {
        return Err(Error::validation(
            "bernoulli split needs at least 2 shots",
        ));
    }
    let group = |positive: bool| -> Vec<SignedTerm> {
        terms
            .iter()
            .copied()
            .filter(|t| t.coefficient != 0.0 && (t.coefficient > 0.0) == positive)
            .collect()
    };
    let pos = group(true);
    let neg = group(false);
    let mass_pos: f64 = pos.iter().map(|t| t.coefficient).sum();
    let mass_neg: f64 = neg.iter().map(|t| -t.coefficient).sum();

    let (shots_pos, shots_neg) = match (pos.is_empty(), neg.is_empty()) {
        (false, true) => (shots, 0),
        (true, false) => (0, shots),
        _ => {
            let sp = ((mass_pos / (mass_pos + mass_neg)) * shots as f64).round() as u64;
            let sp = sp.clamp(1, shots - 1);
            (sp, shots - sp)
        }
    };

    let mut estimate = 0.0;
    let mut variance = 0.0;
    for (group, mass, m, sign, stream) in [
        (&pos, mass_pos, shots_pos, 1.0, 0u64),
        (&neg, mass_neg, shots_neg, -1.0, 1u64),
    ] {
        if group.is_empty() {
            continue;
        }
        let weights = StencilWeights::new(group.iter().map(|t| t.coefficient.abs() / mass).collect())?;
        let values = BranchValues::new(group.iter().map(|t| t.value).collect())?;
        let r = bernoulli_kernel(&values, &weights, m, &sampler.fork(stream))?;
        estimate += sign * mass * r.estimate;
        variance += (mass * r.std_error).powi(2);
    }
    Ok(SignedResult {
        estimate,
        std_error: variance.sqrt(),
        shots_used: shots,
    })
}

fn branch_signed(
    terms: &[SignedTerm],
    mass: f64,
    shots: u64,
    sampler: &ShotSampler,
) -> Result<SignedResult> {
    if shots == 0 {
        return Err(Error::validation("shot budget must be at least 1"));
    }
    // selector: index j with probability |c_j| / mass
    let selector: Vec<f64> = terms.iter().map(|t| t.coefficient.abs() / mass).collect();
    let mut picks = vec![0u64; terms.len()];
    {
        let mut smp = sampler.fork(0);
        let mut cumulative = Vec::with_capacity(selector.len());
        let mut acc = 0.0;
        for p in &selector {
            acc += p;
            cumulative.push(acc);
        }
        let last = selector.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        for _ in 0..shots {
            let r = smp.uniform() * acc;
            picks[cumulative.partition_point(|&c| c <= r).min(last)] += 1;
        }
    }
    // readout: each pick measures the encoder of u_j once, sign applied afterwards
    let mut signed_sum = 0.0;
    let mut ones_total = 0u64;
    for (j, (term, &n)) in terms.iter().zip(&picks).enumerate() {
        if n == 0 {
            continue;
        }
        let hist = statevector::sample(&bernoulli_encoder(term.value)?, n, &mut sampler.fork(1 + j as u64))?;
        let ones = hist.ones(0);
        signed_sum += term.coefficient.signum() * ones as f64;
        ones_total += ones;
    }
    let m = shots as f64;
    let mean = signed_sum / m;
    let mean_sq = ones_total as f64 / m;
    let var = (mean_sq - mean * mean).max(0.0);
    Ok(SignedResult {
        estimate: mass * mean,
        std_error: mass * (var / m).sqrt(),
        shots_used: shots,
    })
}
