//! Micro-kernels: shallow circuits whose sampled readout estimates one
//! stencil node update, plus the types they share.

mod bernoulli;
mod branching;
mod coin;
mod fusion;
mod signed;

pub use bernoulli::{
    allocate_shots, bernoulli_angle, bernoulli_encoder, bernoulli_exact, bernoulli_kernel,
    bernoulli_kernel_with,
};
pub use branching::{
    branching_exact, branching_kernel, branching_kernel_with, build_branching_circuit,
    conditional_injector, selector_angles, RO, S0, S1,
};
pub use coin::{coin_sum_circuit, coin_sum_noise};
pub use fusion::{fuse, fuse_with_cap, Block, FusedCircuit};
pub use signed::{row_kernel, signed_mixture_kernel, SignedMode, SignedResult};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{self, ConfusionMatrix};
use crate::rng::ShotSampler;

/// Values this far outside `[0, 1]` (after normalization) are clamped;
/// anything farther is an error.
pub const UNIT_SLACK: f64 = 1e-9;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Affine map between field units and the unit interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormWindow {
    pub lo: f64,
    pub hi: f64,
}

impl NormWindow {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
            return Err(Error::validation(format!(
                "normalization window needs u_max > u_min, got [{lo}, {hi}]"
            )));
        }
        Ok(NormWindow { lo, hi })
    }

    pub fn unit() -> Self {
        NormWindow { lo: 0.0, hi: 1.0 }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, u: f64) -> bool {
        (self.lo..=self.hi).contains(&u)
    }

    /// `(u - lo) / (hi - lo)`, clamped into `[0, 1]` only within
    /// [`UNIT_SLACK`].
    pub fn normalize(&self, u: f64) -> Result<f64> {
        let v = (u - self.lo) / self.width();
        unit_clamp(v).ok_or_else(|| {
            Error::Domain(format!(
                "value {u} outside window [{}, {}]",
                self.lo, self.hi
            ))
        })
    }

    pub fn denormalize(&self, v: f64) -> f64 {
        self.lo + self.width() * v
    }
}

/// Field-level normalizer with an optional slack (in field units) beyond the
/// window, counting how many values had to be clamped.
#[derive(Debug, Clone)]
pub struct Normalizer {
    window: NormWindow,
    slack: f64,
    clamps: usize,
}

impl Normalizer {
    pub fn new(window: NormWindow, slack: f64) -> Self {
        Normalizer {
            window,
            slack: slack.max(0.0),
            clamps: 0,
        }
    }

    pub fn normalize(&mut self, node: usize, u: f64) -> Result<f64> {
        let w = &self.window;
        if u < w.lo - self.slack || u > w.hi + self.slack || u.is_nan() {
            return Err(Error::Range {
                node,
                value: u,
                lo: w.lo,
                hi: w.hi,
            });
        }
        if !w.contains(u) {
            self.clamps += 1;
        }
        let v = (u.clamp(w.lo, w.hi) - w.lo) / w.width();
        Ok(v.clamp(0.0, 1.0))
    }

    pub fn clamps(&self) -> usize {
        self.clamps
    }

    pub fn window(&self) -> NormWindow {
        self.window
    }
}

fn unit_clamp(v: f64) -> Option<f64> {
    if (-UNIT_SLACK..=1.0 + UNIT_SLACK).contains(&v) {
        Some(v.clamp(0.0, 1.0))
    } else {
        None
    }
}

/// Nonnegative branch weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StencilWeights(Vec<f64>);

impl StencilWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::validation("stencil needs at least one branch"));
        }
        let mut w = weights;
        for x in w.iter_mut() {
            if !x.is_finite() || *x < -WEIGHT_SUM_TOL {
                return Err(Error::validation(format!("negative stencil weight {x}")));
            }
            // rounding residue from 1 - (a + b)
            *x = x.max(0.0);
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::validation(format!(
                "stencil weights sum to {sum}, expected 1"
            )));
        }
        Ok(StencilWeights(w))
    }

    pub fn three(left: f64, center: f64, right: f64) -> Result<Self> {
        Self::new(vec![left, center, right])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Normalized branch values in `[0, 1]`, one per stencil branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchValues(Vec<f64>);

impl BranchValues {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let values = values
            .into_iter()
            .map(|v| {
                unit_clamp(v).ok_or_else(|| {
                    Error::Domain(format!("branch value {v} outside [0, 1]"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BranchValues(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `sum_b w_b u_b`.
    pub fn convex_sum(&self, weights: &StencilWeights) -> f64 {
        self.0
            .iter()
            .zip(weights.as_slice())
            .map(|(u, w)| u * w)
            .sum()
    }
}

/// Per-branch shot counts for one node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotPlan {
    pub per_branch: Vec<u64>,
    pub total: u64,
}

/// One node's sampled estimate in normalized units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelResult {
    pub estimate: f64,
    pub std_error: f64,
    pub shots_used: u64,
    /// Per-branch ones counts (Bernoulli) or per-outcome counts (branching).
    pub raw_counts: Vec<u64>,
    /// Mitigation had to clip the inverted probability.
    #[serde(default)]
    pub clipped: bool,
}

impl KernelResult {
    fn exact(p: f64) -> Self {
        KernelResult {
            estimate: p,
            std_error: 0.0,
            shots_used: 0,
            raw_counts: Vec::new(),
            clipped: false,
        }
    }
}

/// Signed coefficient attached to a normalized value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignedTerm {
    pub coefficient: f64,
    pub value: f64,
}

impl SignedTerm {
    pub fn new(coefficient: f64, value: f64) -> Result<Self> {
        if !coefficient.is_finite() {
            return Err(Error::validation("signed term coefficient must be finite"));
        }
        let value = unit_clamp(value)
            .ok_or_else(|| Error::Domain(format!("signed term value {value} outside [0, 1]")))?;
        Ok(SignedTerm { coefficient, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Bernoulli,
    Branching,
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bernoulli" => Ok(KernelKind::Bernoulli),
            "branching" => Ok(KernelKind::Branching),
            other => Err(Error::Config(format!("unknown kernel kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for KernelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KernelKind::Bernoulli => "bernoulli",
            KernelKind::Branching => "branching",
        })
    }
}

/// Finite shot count, or the infinite-shot limit evaluated from exact
/// readout probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShotBudget {
    Shots(u64),
    Exact,
}

/// Readout channel seen by a kernel: optional injected assignment noise and
/// optional inverse-matrix mitigation applied to the aggregated probability.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Readout {
    pub noise: Option<ConfusionMatrix>,
    pub mitigation: Option<ConfusionMatrix>,
}

impl Readout {
    pub fn ideal() -> Self {
        Readout::default()
    }

    /// Observed histogram after the assignment channel.
    pub(crate) fn corrupt(
        &self,
        hist: crate::statevector::Histogram,
        sampler: &ShotSampler,
        stream: u64,
    ) -> crate::statevector::Histogram {
        match &self.noise {
            Some(cm) if !cm.is_identity() => {
                noise::corrupt(&hist, cm, &mut sampler.fork(NOISE_STREAM ^ stream))
            }
            _ => hist,
        }
    }

    /// Mitigate an aggregated probability and its standard error.
    pub(crate) fn finish(&self, p: f64, se: f64) -> (f64, f64, bool) {
        match &self.mitigation {
            Some(cm) => match noise::mitigate_detailed(p, cm) {
                Ok(m) => {
                    let gain = noise::mitigation_gain(cm).unwrap_or(1.0);
                    (m.probability, se * gain, m.clipped)
                }
                // singular matrix: fall back to the raw estimate
                Err(_) => (p, se, false),
            },
            None => (p, se, false),
        }
    }

    /// Infinite-shot readout: exact channel expectation, then mitigation.
    pub(crate) fn exact(&self, p: f64) -> KernelResult {
        let observed = match &self.noise {
            Some(cm) => cm.observed_one_probability(p),
            None => p,
        };
        let (estimate, _, clipped) = self.finish(observed, 0.0);
        KernelResult {
            clipped,
            ..KernelResult::exact(estimate)
        }
    }
}

const NOISE_STREAM: u64 = 0x6e6f_6973_6500;

/// Evaluate one node with the chosen kernel.
pub fn run_kernel(
    kind: KernelKind,
    values: &BranchValues,
    weights: &StencilWeights,
    budget: ShotBudget,
    sampler: &ShotSampler,
    readout: &Readout,
) -> Result<KernelResult> {
    match (kind, budget) {
        (KernelKind::Bernoulli, ShotBudget::Shots(m)) => {
            bernoulli_kernel_with(values, weights, m, sampler, readout)
        }
        (KernelKind::Branching, ShotBudget::Shots(m)) => {
            branching_kernel_with(values, weights, m, sampler, readout)
        }
        (KernelKind::Bernoulli, ShotBudget::Exact) => {
            Ok(readout.exact(bernoulli_exact(values, weights)?))
        }
        (KernelKind::Branching, ShotBudget::Exact) => {
            Ok(readout.exact(branching_exact(values, weights)?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(NormWindow::unit().normalize(0.5).unwrap(), 0.5);
        let w = NormWindow::new(-1.0, 1.0).unwrap();
        assert_eq!(w.normalize(0.0).unwrap(), 0.5);
        assert_eq!(w.denormalize(0.75), 0.5);
    }

    #[test]
    fn window_must_be_ordered() {
        assert!(NormWindow::new(1.0, 1.0).is_err());
        assert!(NormWindow::new(2.0, 1.0).is_err());
    }

    #[test]
    fn normalize_out_of_window() {
        let w = NormWindow::unit();
        assert_eq!(w.normalize(1.0 + 1e-10).unwrap(), 1.0);
        assert!(w.normalize(1.1).is_err());
        let mut n = Normalizer::new(w, 0.0);
        assert!(matches!(
            n.normalize(7, -0.2),
            Err(Error::Range { node: 7, .. })
        ));
        let mut n = Normalizer::new(w, 0.05);
        assert_eq!(n.normalize(3, 1.02).unwrap(), 1.0);
        assert_eq!(n.clamps(), 1);
    }

    #[test]
    fn weights_validation() {
        assert!(StencilWeights::three(0.25, 0.5, 0.25).is_ok());
        assert!(StencilWeights::three(0.5, 0.6, -0.1).is_err());
        assert!(StencilWeights::three(0.3, 0.3, 0.3).is_err());
        // residue from 1 - (0.7 + 0.3) style arithmetic
        let w = StencilWeights::three(0.7, -1e-17, 0.3).unwrap();
        assert_eq!(w.as_slice()[1], 0.0);
    }

    #[test]
    fn branch_values_validation() {
        assert!(BranchValues::new(vec![0.0, 1.0, 0.5]).is_ok());
        assert!(BranchValues::new(vec![1.5]).is_err());
        assert_eq!(BranchValues::new(vec![-1e-12]).unwrap().as_slice(), &[0.0]);
    }

    #[test]
    fn normalize_round_trip() {
        let w = NormWindow::new(-3.0, 5.0).unwrap();
        for u in [-3.0, -1.25, 0.0, 0.3, 4.999, 5.0] {
            let back = w.denormalize(w.normalize(u).unwrap());
            assert!((back - u).abs() < 1e-12);
        }
    }
}
