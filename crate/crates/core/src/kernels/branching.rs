//! Three-branch selector circuit with leaf-addressed value loading.
//!
//! Qubit layout: `s0 = 0`, `s1 = 1`, `ro = 2`. Leaf map: `s0 = 1` (s1 free)
//! is the right branch, `(s0, s1) = (0, 0)` the left and `(0, 1)` the center.

use crate::error::{Error, Result};
use crate::rng::ShotSampler;
use crate::statevector::{self, Circuit, Control};

use super::{bernoulli_angle, BranchValues, KernelResult, Readout, StencilWeights};

pub const S0: usize = 0;
pub const S1: usize = 1;
pub const RO: usize = 2;

/// Selector rotations `(theta_0, theta_L)` realizing `(w_L, w_C, w_R)` on the
/// leaves. `theta_L` is set to 0 when `w_L + w_C = 0`, where it has no
/// observable effect.
pub fn selector_angles(weights: &StencilWeights) -> Result<(f64, f64)> {
    let [wl, wc, wr] = three(weights)?;
    let theta0 = 2.0 * wr.clamp(0.0, 1.0).sqrt().asin();
    let left_mass = wl + wc;
    let theta_l = if left_mass > 0.0 {
        2.0 * (wc / left_mass).clamp(0.0, 1.0).sqrt().asin()
    } else {
        0.0
    };
    Ok((theta0, theta_l))
}

fn three(weights: &StencilWeights) -> Result<[f64; 3]> {
    match weights.as_slice() {
        &[l, c, r] => Ok([l, c, r]),
        w => Err(Error::validation(format!(
            "branching kernel supports exactly 3 branches, got {}",
            w.len()
        ))),
    }
}

/// Assemble the branching micro-kernel: selector tree on `(s0, s1)`, then
/// three leaf-controlled RY injections on the readout, which is measured.
pub fn build_branching_circuit(
    values: &BranchValues,
    weights: &StencilWeights,
) -> Result<Circuit> {
    three(weights)?;
    let &[ul, uc, ur] = values.as_slice() else {
        return Err(Error::validation(format!(
            "branching kernel needs 3 branch values, got {}",
            values.len()
        )));
    };
    let (theta0, theta_l) = selector_angles(weights)?;
    Ok(Circuit::new(3)
        .ry(S0, theta0)
        .cry(vec![Control::off(S0)], S1, theta_l)
        .cry(vec![Control::off(S0), Control::off(S1)], RO, bernoulli_angle(ul)?)
        .cry(vec![Control::off(S0), Control::on(S1)], RO, bernoulli_angle(uc)?)
        .cry(vec![Control::on(S0)], RO, bernoulli_angle(ur)?)
        .measure(RO))
}

/// Exact `Pr(ro = 1)` of the assembled circuit.
pub fn branching_exact(values: &BranchValues, weights: &StencilWeights) -> Result<f64> {
    let circuit = build_branching_circuit(values, weights)?;
    statevector::readout_probability(&statevector::apply(&circuit)?, RO)
}

pub fn branching_kernel(
    values: &BranchValues,
    weights: &StencilWeights,
    shots: u64,
    sampler: &ShotSampler,
) -> Result<KernelResult> {
    branching_kernel_with(values, weights, shots, sampler, &Readout::ideal())
}

pub fn branching_kernel_with(
    values: &BranchValues,
    weights: &StencilWeights,
    shots: u64,
    sampler: &ShotSampler,
    readout: &Readout,
) -> Result<KernelResult> {
    let circuit = build_branching_circuit(values, weights)?;
    let hist = statevector::sample(&circuit, shots, &mut sampler.fork(0))?;
    let hist = readout.corrupt(hist, sampler, 0);
    let p_hat = hist.fraction_ones(0);
    let se = (p_hat * (1.0 - p_hat) / shots as f64).sqrt();
    let (estimate, std_error, clipped) = readout.finish(p_hat, se);
    Ok(KernelResult {
        estimate,
        std_error,
        shots_used: shots,
        raw_counts: hist.counts().to_vec(),
        clipped,
    })
}

/// Two-qubit conditional injector (parent `P = 0`, readout `A = 1`):
/// `Pr(A = 1) = Pr(P = 1) p1 + Pr(P = 0) p0`. Test fixture for the negative
/// control construction.
pub fn conditional_injector(parent_one: f64, p0: f64, p1: f64) -> Result<Circuit> {
    Ok(Circuit::new(2)
        .ry(0, bernoulli_angle(parent_one)?)
        .cry(vec![Control::on(0)], 1, bernoulli_angle(p1)?)
        .cry(vec![Control::off(0)], 1, bernoulli_angle(p0)?)
        .measure(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn w3(l: f64, c: f64, r: f64) -> StencilWeights {
        StencilWeights::three(l, c, r).unwrap()
    }

    fn v3(l: f64, c: f64, r: f64) -> BranchValues {
        BranchValues::new(vec![l, c, r]).unwrap()
    }

    #[test]
    fn selector_angle_examples() {
        let (t0, tl) = selector_angles(&w3(0.25, 0.5, 0.25)).unwrap();
        assert!((t0 - PI / 3.0).abs() < 1e-15);
        assert!((tl - 2.0 * (2.0f64 / 3.0).sqrt().asin()).abs() < 1e-15);
        assert_eq!(selector_angles(&w3(0.0, 0.0, 1.0)).unwrap(), (PI, 0.0));
        assert_eq!(selector_angles(&w3(1.0, 0.0, 0.0)).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn leaf_probabilities_match_weights() {
        let w = w3(0.2, 0.35, 0.45);
        let (t0, tl) = selector_angles(&w).unwrap();
        let c = Circuit::new(2).ry(S0, t0).cry(vec![Control::off(S0)], S1, tl);
        let p = statevector::apply(&c).unwrap().probabilities();
        // index = s0 + 2 s1
        assert!((p[0] - 0.2).abs() < 1e-12);
        assert!((p[2] - 0.35).abs() < 1e-12);
        assert!((p[1] + p[3] - 0.45).abs() < 1e-12);
    }

    #[test]
    fn readout_examples() {
        let p = branching_exact(&v3(0.2, 0.4, 0.6), &w3(0.25, 0.5, 0.25)).unwrap();
        assert!((p - 0.4).abs() < 1e-12);
        let p = branching_exact(&v3(0.9, 0.1, 0.3), &w3(1.0, 0.0, 0.0)).unwrap();
        assert!((p - 0.9).abs() < 1e-12);
        let p = branching_exact(&v3(0.15, 0.8, 0.65), &w3(0.5, 0.0, 0.5)).unwrap();
        assert!((p - 0.4).abs() < 1e-12);
        let p = branching_exact(&v3(1.0, 0.0, 1.0), &w3(0.3, 0.5, 0.2)).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gate_order_follows_selector_then_leaves() {
        let c = build_branching_circuit(&v3(0.1, 0.2, 0.3), &w3(0.3, 0.4, 0.3)).unwrap();
        assert_eq!(c.gates().len(), 5);
        assert_eq!(c.measured(), &[RO]);
        assert_eq!(c.gates()[0].target(), S0);
        assert_eq!(c.gates()[1].target(), S1);
        assert!(c.gates()[2..].iter().all(|g| g.target() == RO));
    }

    #[test]
    fn rejects_other_branch_counts() {
        let w = StencilWeights::new(vec![0.5, 0.5]).unwrap();
        let v = BranchValues::new(vec![0.1, 0.2]).unwrap();
        assert!(build_branching_circuit(&v, &w).is_err());
    }

    #[test]
    fn constant_values_have_binomial_spread() {
        let m = 10_000;
        let c = 0.3;
        let r = branching_kernel(&v3(c, c, c), &w3(0.2, 0.5, 0.3), m, &ShotSampler::new(8, 1))
            .unwrap();
        let se = (c * (1.0 - c) / m as f64).sqrt();
        assert!((r.estimate - c).abs() < 5.0 * se);
        assert!(r.std_error <= 1.0 / (2.0 * (m as f64).sqrt()));
    }

    #[test]
    fn single_shot_is_a_bit() {
        let r = branching_kernel(
            &v3(0.2, 0.4, 0.6),
            &w3(0.25, 0.5, 0.25),
            1,
            &ShotSampler::new(3, 3),
        )
        .unwrap();
        assert!(r.estimate == 0.0 || r.estimate == 1.0);
    }

    #[test]
    fn large_sample_mean() {
        let m = 100_000u64;
        let r = branching_kernel(
            &v3(0.2, 0.4, 0.6),
            &w3(0.25, 0.5, 0.25),
            m,
            &ShotSampler::new(77, 5),
        )
        .unwrap();
        assert!((r.estimate - 0.4).abs() < 5.0 * (0.4f64 * 0.6 / m as f64).sqrt());
    }

    #[test]
    fn injector_total_probability() {
        let c = conditional_injector(0.3, 0.2, 0.9).unwrap();
        let p = statevector::readout_probability(&statevector::apply(&c).unwrap(), 1).unwrap();
        assert!((p - (0.3 * 0.9 + 0.7 * 0.2)).abs() < 1e-12);
    }
}
