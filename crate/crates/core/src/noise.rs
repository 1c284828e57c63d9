//! Readout assignment noise: a 2x2 column-stochastic confusion matrix per
//! measured qubit, injected on sampled histograms and undone on aggregated
//! probabilities by inverting the matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::ShotSampler;
use crate::statevector::Histogram;

const COLUMN_TOL: f64 = 1e-12;
const SINGULAR_TOL: f64 = 1e-12;

/// `m[i][j] = Pr(measure i | prepared j)`.
///
/// Serialized as the 4-number row-major record `[m00, m01, m10, m11]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct ConfusionMatrix {
    m: [[f64; 2]; 2],
}

impl ConfusionMatrix {
    pub fn new(m00: f64, m01: f64, m10: f64, m11: f64) -> Result<Self> {
        let m = [[m00, m01], [m10, m11]];
        for row in &m {
            for &v in row {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::validation(format!(
                        "confusion matrix entry {v} outside [0, 1]"
                    )));
                }
            }
        }
        for j in 0..2 {
            let s = m[0][j] + m[1][j];
            if (s - 1.0).abs() > COLUMN_TOL {
                return Err(Error::validation(format!(
                    "confusion matrix column {j} sums to {s}, expected 1"
                )));
            }
        }
        Ok(ConfusionMatrix { m })
    }

    pub fn identity() -> Self {
        ConfusionMatrix {
            m: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    /// Readout calibration snapshot of the IBM Brisbane readout qubit
    /// (preset `brisbane-snapshot`).
    pub fn brisbane_snapshot() -> Self {
        ConfusionMatrix {
            m: [[0.9040, 0.0112], [0.0960, 0.9888]],
        }
    }

    /// Symmetric flip channel with error probability `eps`.
    pub fn symmetric(eps: f64) -> Result<Self> {
        Self::new(1.0 - eps, eps, eps, 1.0 - eps)
    }

    pub fn get(&self, measured: usize, prepared: usize) -> f64 {
        self.m[measured][prepared]
    }

    pub fn entries(&self) -> [f64; 4] {
        [self.m[0][0], self.m[0][1], self.m[1][0], self.m[1][1]]
    }

    pub fn determinant(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn is_identity(&self) -> bool {
        self.m == Self::identity().m
    }

    /// Probability of reading 1 when the ideal readout is 1 with probability `u`.
    pub fn observed_one_probability(&self, u: f64) -> f64 {
        self.m[1][0] * (1.0 - u) + self.m[1][1] * u
    }

    /// Probability that a prepared bit `b` is reported flipped.
    fn flip_probability(&self, prepared: usize) -> f64 {
        self.m[1 - prepared][prepared]
    }
}

impl TryFrom<[f64; 4]> for ConfusionMatrix {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        ConfusionMatrix::new(v[0], v[1], v[2], v[3])
    }
}

impl From<ConfusionMatrix> for [f64; 4] {
    fn from(cm: ConfusionMatrix) -> Self {
        cm.entries()
    }
}

/// Apply `cm` independently to every shot of every measured bit.
pub fn corrupt(hist: &Histogram, cm: &ConfusionMatrix, sampler: &mut ShotSampler) -> Histogram {
    let per_qubit = vec![*cm; hist.measured_bits()];
    corrupt_per_qubit(hist, &per_qubit, sampler).expect("one matrix per measured bit")
}

/// Like [`corrupt`] with a separate matrix for each measured bit
/// (bit `k` of the outcome uses `cms[k]`).
pub fn corrupt_per_qubit(
    hist: &Histogram,
    cms: &[ConfusionMatrix],
    sampler: &mut ShotSampler,
) -> Result<Histogram> {
    let bits = hist.measured_bits();
    if cms.len() != bits {
        return Err(Error::validation(format!(
            "{} confusion matrices for {bits} measured bits",
            cms.len()
        )));
    }
    if cms.iter().all(ConfusionMatrix::is_identity) {
        return Ok(hist.clone());
    }
    let mut out = Histogram::new(bits);
    for (outcome, &count) in hist.counts().iter().enumerate() {
        for _ in 0..count {
            let mut noisy = outcome;
            for (k, cm) in cms.iter().enumerate() {
                let b = (outcome >> k) & 1;
                if sampler.bernoulli(cm.flip_probability(b)) {
                    noisy ^= 1 << k;
                }
            }
            out.record(noisy);
        }
    }
    Ok(out)
}

/// Estimate a confusion matrix by preparing |0> and |1> `shots_per_state`
/// times each and reading them through `cm_true`.
///
/// A few thousand shots per state is the intended regime; very small counts
/// are accepted but give coarse 0/1 columns.
pub fn calibrate(
    sampler: &mut ShotSampler,
    shots_per_state: u64,
    cm_true: &ConfusionMatrix,
) -> Result<ConfusionMatrix> {
    if shots_per_state == 0 {
        return Err(Error::validation("calibration needs at least one shot per state"));
    }
    let mut column = [[0.0; 2]; 2];
    for (prepared, col) in column.iter_mut().enumerate() {
        let mut ideal = Histogram::new(1);
        ideal.add(prepared, shots_per_state);
        let observed = corrupt(&ideal, cm_true, sampler);
        let ones = observed.ones(0) as f64 / shots_per_state as f64;
        *col = [1.0 - ones, ones];
    }
    ConfusionMatrix::new(column[0][0], column[1][0], column[0][1], column[1][1])
}

/// Outcome of inverting the readout channel on one probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mitigated {
    pub probability: f64,
    /// True when the raw inverse left `[0, 1]` and had to be clipped.
    pub clipped: bool,
}

/// Debias an observed probability of reading 1: solve
/// `cm * (p0, p1) = (1 - p_obs, p_obs)`, clip to `[0, 1]`, renormalize,
/// return `p1`.
pub fn mitigate(p_obs: f64, cm: &ConfusionMatrix) -> Result<f64> {
    mitigate_detailed(p_obs, cm).map(|m| m.probability)
}

pub fn mitigate_detailed(p_obs: f64, cm: &ConfusionMatrix) -> Result<Mitigated> {
    let det = cm.determinant();
    if det.abs() < SINGULAR_TOL {
        return Err(Error::Mitigation(format!(
            "confusion matrix is singular (det = {det:e})"
        )));
    }
    let (y0, y1) = (1.0 - p_obs, p_obs);
    let p0 = (cm.m[1][1] * y0 - cm.m[0][1] * y1) / det;
    let p1 = (cm.m[0][0] * y1 - cm.m[1][0] * y0) / det;
    let clipped = !(0.0..=1.0).contains(&p0) || !(0.0..=1.0).contains(&p1);
    let (c0, c1) = (p0.clamp(0.0, 1.0), p1.clamp(0.0, 1.0));
    let total = c0 + c1;
    let probability = if total > 0.0 { c1 / total } else { 0.0 };
    Ok(Mitigated {
        probability,
        clipped,
    })
}

/// Factor by which mitigation scales a standard error (slope of the inverse
/// map in the unclipped region).
pub fn mitigation_gain(cm: &ConfusionMatrix) -> Result<f64> {
    let det = cm.determinant();
    if det.abs() < SINGULAR_TOL {
        return Err(Error::Mitigation("confusion matrix is singular".into()));
    }
    Ok(1.0 / det.abs())
}

/// Named confusion-matrix presets shipped with the crate.
pub fn preset(name: &str) -> Option<ConfusionMatrix> {
    match name {
        "none" | "identity" => Some(ConfusionMatrix::identity()),
        "brisbane-snapshot" => Some(ConfusionMatrix::brisbane_snapshot()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pure_zero(shots: u64) -> Histogram {
        let mut h = Histogram::new(1);
        h.add(0, shots);
        h
    }

    #[test]
    fn rejects_non_stochastic_columns() {
        assert!(ConfusionMatrix::new(0.9, 0.1, 0.2, 0.9).is_err());
        assert!(ConfusionMatrix::new(1.1, 0.0, -0.1, 1.0).is_err());
        assert!(ConfusionMatrix::new(0.9040, 0.0112, 0.0960, 0.9888).is_ok());
    }

    #[test]
    fn identity_leaves_histogram_unchanged() {
        let mut h = Histogram::new(2);
        h.add(1, 10);
        h.add(2, 7);
        let out = corrupt(&h, &ConfusionMatrix::identity(), &mut ShotSampler::new(1, 1));
        assert_eq!(out, h);
    }

    #[test]
    fn brisbane_zero_stream_flip_rate() {
        let shots = 100_000u64;
        let out = corrupt(
            &pure_zero(shots),
            &ConfusionMatrix::brisbane_snapshot(),
            &mut ShotSampler::new(11, 0),
        );
        let frac = out.fraction_ones(0);
        let se = (0.096f64 * 0.904 / shots as f64).sqrt();
        assert!((frac - 0.0960).abs() < 5.0 * se, "{frac}");
        assert_eq!(out.total(), shots);
    }

    #[test]
    fn bernoulli_stream_mean_follows_total_probability() {
        let cm = ConfusionMatrix::brisbane_snapshot();
        let u = 0.3;
        let shots = 100_000u64;
        let mut smp = ShotSampler::new(5, 2);
        let mut ideal = Histogram::new(1);
        for _ in 0..shots {
            ideal.record(smp.bernoulli(u) as usize);
        }
        let out = corrupt(&ideal, &cm, &mut smp);
        let expected = 0.0960 * (1.0 - u) + 0.9888 * u;
        let se = (expected * (1.0 - expected) / shots as f64).sqrt();
        assert!((out.fraction_ones(0) - expected).abs() < 5.0 * se);
    }

    #[test]
    fn calibrate_identity_and_brisbane() {
        let mut smp = ShotSampler::new(3, 9);
        let shots = 4000;
        let est = calibrate(&mut smp, shots, &ConfusionMatrix::identity()).unwrap();
        let tol = 5.0 * (0.25 / shots as f64).sqrt();
        for (a, b) in est.entries().iter().zip(ConfusionMatrix::identity().entries()) {
            assert!((a - b).abs() < tol);
        }
        let truth = ConfusionMatrix::brisbane_snapshot();
        let est = calibrate(&mut smp, shots, &truth).unwrap();
        for (a, b) in est.entries().iter().zip(truth.entries()) {
            let se = (b * (1.0 - b) / shots as f64).sqrt();
            assert!((a - b).abs() < 5.0 * se, "{a} vs {b}");
        }
    }

    #[test]
    fn single_shot_calibration_is_degenerate_but_valid() {
        let est = calibrate(
            &mut ShotSampler::new(1, 1),
            1,
            &ConfusionMatrix::brisbane_snapshot(),
        )
        .unwrap();
        for v in est.entries() {
            assert!(v == 0.0 || v == 1.0);
        }
    }

    #[test]
    fn mitigate_identity_is_passthrough() {
        for p in [0.0, 0.1, 0.5, 0.93, 1.0] {
            assert_eq!(mitigate(p, &ConfusionMatrix::identity()).unwrap(), p);
        }
    }

    #[test]
    fn mitigate_inverts_brisbane_half() {
        let cm = ConfusionMatrix::brisbane_snapshot();
        let p_obs = 0.0960 * 0.5 + 0.9888 * 0.5;
        assert!((mitigate(p_obs, &cm).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mitigate_clips_negative_component() {
        let cm = ConfusionMatrix::brisbane_snapshot();
        // raw inverse: p1 = (0 - 0.0960) / det < 0
        let raw_p1 = -0.0960 / cm.determinant();
        assert!(raw_p1 < 0.0);
        let m = mitigate_detailed(0.0, &cm).unwrap();
        assert_eq!(m.probability, 0.0);
        assert!(m.clipped);
        assert!(!mitigate_detailed(0.5, &cm).unwrap().clipped);
    }

    #[test]
    fn singular_matrix_is_an_error() {
        let cm = ConfusionMatrix::new(0.5, 0.5, 0.5, 0.5).unwrap();
        assert!(matches!(mitigate(0.3, &cm), Err(Error::Mitigation(_))));
    }

    #[test]
    fn serde_as_four_numbers() {
        let cm = ConfusionMatrix::brisbane_snapshot();
        let s = serde_json::to_string(&cm).unwrap();
        assert_eq!(s, "[0.904,0.0112,0.096,0.9888]");
        let back: ConfusionMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, cm);
        assert!(serde_json::from_str::<ConfusionMatrix>("[0.5,0.5,0.6,0.5]").is_err());
    }
}
