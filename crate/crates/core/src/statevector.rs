//! Exact statevector simulation of shallow RY / X / controlled-RY circuits.
//!
//! Conventions:
//! - qubit 0 is the least-significant bit of the basis-state index;
//! - bitstrings are rendered most-significant measured qubit first;
//! - amplitudes are never renormalized, drift is checked by the tests instead.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::ShotSampler;

/// Widest circuit [`apply`] will simulate unless told otherwise.
pub const DEFAULT_WIDTH_CAP: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Control {
    pub qubit: usize,
    pub polarity: Polarity,
}

impl Control {
    pub fn on(qubit: usize) -> Self {
        Control {
            qubit,
            polarity: Polarity::Positive,
        }
    }

    pub fn off(qubit: usize) -> Self {
        Control {
            qubit,
            polarity: Polarity::Negative,
        }
    }

    fn matches(&self, index: usize) -> bool {
        let bit = (index >> self.qubit) & 1 == 1;
        match self.polarity {
            Polarity::Positive => bit,
            Polarity::Negative => !bit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "UPPERCASE")]
pub enum Gate {
    Ry {
        target: usize,
        angle: f64,
    },
    X {
        target: usize,
    },
    Cry {
        target: usize,
        angle: f64,
        controls: Vec<Control>,
    },
}

impl Gate {
    pub fn target(&self) -> usize {
        match self {
            Gate::Ry { target, .. } | Gate::X { target } | Gate::Cry { target, .. } => *target,
        }
    }

    pub fn controls(&self) -> &[Control] {
        match self {
            Gate::Cry { controls, .. } => controls,
            _ => &[],
        }
    }

    /// Every qubit the gate touches, target first.
    pub fn qubits(&self) -> impl Iterator<Item = usize> + '_ {
        std::iter::once(self.target()).chain(self.controls().iter().map(|c| c.qubit))
    }

    fn shifted(&self, offset: usize) -> Gate {
        match self {
            Gate::Ry { target, angle } => Gate::Ry {
                target: target + offset,
                angle: *angle,
            },
            Gate::X { target } => Gate::X {
                target: target + offset,
            },
            Gate::Cry {
                target,
                angle,
                controls,
            } => Gate::Cry {
                target: target + offset,
                angle: *angle,
                controls: controls
                    .iter()
                    .map(|c| Control {
                        qubit: c.qubit + offset,
                        polarity: c.polarity,
                    })
                    .collect(),
            },
        }
    }
}

/// Ordered gate list on `width` qubits, plus the measured qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    width: usize,
    gates: Vec<Gate>,
    measured: Vec<usize>,
}

impl Circuit {
    pub fn new(width: usize) -> Self {
        Circuit {
            width,
            gates: Vec::new(),
            measured: Vec::new(),
        }
    }

    pub fn ry(mut self, target: usize, angle: f64) -> Self {
        self.gates.push(Gate::Ry { target, angle });
        self
    }

    pub fn x(mut self, target: usize) -> Self {
        self.gates.push(Gate::X { target });
        self
    }

    pub fn cry(mut self, controls: Vec<Control>, target: usize, angle: f64) -> Self {
        self.gates.push(Gate::Cry {
            target,
            angle,
            controls,
        });
        self
    }

    pub fn measure(mut self, qubit: usize) -> Self {
        self.measured.push(qubit);
        self
    }

    pub fn push(&mut self, gate: Gate) {
        self.gates.push(gate);
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn measured(&self) -> &[usize] {
        &self.measured
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 {
            return Err(Error::validation("circuit width must be at least 1"));
        }
        for (i, gate) in self.gates.iter().enumerate() {
            let target = gate.target();
            if target >= self.width {
                return Err(Error::validation(format!(
                    "gate {i}: target {target} out of range for width {}",
                    self.width
                )));
            }
            let mut seen = vec![false; self.width];
            seen[target] = true;
            for c in gate.controls() {
                if c.qubit >= self.width {
                    return Err(Error::validation(format!(
                        "gate {i}: control {} out of range for width {}",
                        c.qubit, self.width
                    )));
                }
                if seen[c.qubit] {
                    return Err(Error::validation(format!(
                        "gate {i}: qubit {} used twice (target and controls must be distinct)",
                        c.qubit
                    )));
                }
                seen[c.qubit] = true;
            }
            if let Gate::Ry { angle, .. } | Gate::Cry { angle, .. } = gate {
                if !angle.is_finite() {
                    return Err(Error::validation(format!("gate {i}: non-finite angle")));
                }
            }
        }
        let mut seen = vec![false; self.width];
        for &q in &self.measured {
            if q >= self.width {
                return Err(Error::validation(format!(
                    "measured qubit {q} out of range for width {}",
                    self.width
                )));
            }
            if seen[q] {
                return Err(Error::validation(format!("qubit {q} measured twice")));
            }
            seen[q] = true;
        }
        Ok(())
    }

    /// Equivalent circuit where every negative control is replaced by an
    /// explicit X-control-X sandwich. Adjacent X gates are kept, not cancelled.
    pub fn expand_negative_controls(&self) -> Circuit {
        let mut out = Circuit::new(self.width);
        out.measured = self.measured.clone();
        for gate in &self.gates {
            match gate {
                Gate::Cry {
                    target,
                    angle,
                    controls,
                } if controls.iter().any(|c| c.polarity == Polarity::Negative) => {
                    let flipped: Vec<usize> = controls
                        .iter()
                        .filter(|c| c.polarity == Polarity::Negative)
                        .map(|c| c.qubit)
                        .collect();
                    for &q in &flipped {
                        out.gates.push(Gate::X { target: q });
                    }
                    out.gates.push(Gate::Cry {
                        target: *target,
                        angle: *angle,
                        controls: controls.iter().map(|c| Control::on(c.qubit)).collect(),
                    });
                    for &q in &flipped {
                        out.gates.push(Gate::X { target: q });
                    }
                }
                g => out.gates.push(g.clone()),
            }
        }
        out
    }

    /// Append `other` on fresh qubits `[self.width, self.width + other.width)`.
    /// Returns the offset at which `other` was placed.
    pub(crate) fn append_block(&mut self, other: &Circuit) -> usize {
        let offset = self.width;
        self.width += other.width;
        self.gates
            .extend(other.gates.iter().map(|g| g.shifted(offset)));
        self.measured
            .extend(other.measured.iter().map(|q| q + offset));
        offset
    }

    /// JSON gate list for debugging.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("circuit serializes")
    }
}

/// `2^width` complex amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    width: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// `|0...0>` on `width` qubits.
    pub fn zero(width: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << width];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        StateVector { width, amplitudes }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Distribution over the outcomes of `measured`: entry `o` has bit `k` set
    /// when `measured[k]` reads 1.
    pub fn marginal(&self, measured: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; 1 << measured.len()];
        for (index, a) in self.amplitudes.iter().enumerate() {
            let mut o = 0usize;
            for (k, &q) in measured.iter().enumerate() {
                o |= ((index >> q) & 1) << k;
            }
            out[o] += a.norm_sqr();
        }
        out
    }

    fn apply_gate(&mut self, gate: &Gate) {
        match gate {
            Gate::X { target } => {
                let bit = 1 << target;
                for i in 0..self.amplitudes.len() {
                    if i & bit == 0 {
                        self.amplitudes.swap(i, i | bit);
                    }
                }
            }
            Gate::Ry { target, angle } => self.rotate_y(*target, *angle, &[]),
            Gate::Cry {
                target,
                angle,
                controls,
            } => self.rotate_y(*target, *angle, controls),
        }
    }

    fn rotate_y(&mut self, target: usize, angle: f64, controls: &[Control]) {
        let (s, c) = (angle / 2.0).sin_cos();
        let bit = 1 << target;
        for i in 0..self.amplitudes.len() {
            if i & bit != 0 || !controls.iter().all(|ctl| ctl.matches(i)) {
                continue;
            }
            let a0 = self.amplitudes[i];
            let a1 = self.amplitudes[i | bit];
            self.amplitudes[i] = a0 * c - a1 * s;
            self.amplitudes[i | bit] = a0 * s + a1 * c;
        }
    }
}

/// `U|0...0>` for a circuit no wider than [`DEFAULT_WIDTH_CAP`].
pub fn apply(circuit: &Circuit) -> Result<StateVector> {
    apply_with_cap(circuit, DEFAULT_WIDTH_CAP)
}

pub fn apply_with_cap(circuit: &Circuit, width_cap: usize) -> Result<StateVector> {
    if circuit.width > width_cap {
        return Err(Error::Resource {
            what: "statevector width (qubits)",
            requested: circuit.width,
            cap: width_cap,
        });
    }
    circuit.validate()?;
    let mut state = StateVector::zero(circuit.width);
    for gate in &circuit.gates {
        state.apply_gate(gate);
    }
    Ok(state)
}

/// Probability that `qubit` reads 1.
pub fn readout_probability(state: &StateVector, qubit: usize) -> Result<f64> {
    if qubit >= state.width {
        return Err(Error::validation(format!(
            "qubit {qubit} out of range for width {}",
            state.width
        )));
    }
    let bit = 1 << qubit;
    let p: f64 = state
        .amplitudes
        .iter()
        .enumerate()
        .filter(|(i, _)| i & bit != 0)
        .map(|(_, a)| a.norm_sqr())
        .sum();
    Ok(p.clamp(0.0, 1.0))
}

/// Shot counts over the outcomes of a circuit's measured qubits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    measured: usize,
    counts: Vec<u64>,
}

impl Histogram {
    pub fn new(measured: usize) -> Self {
        Histogram {
            measured,
            counts: vec![0; 1 << measured],
        }
    }

    pub fn from_counts(measured: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != 1 << measured {
            return Err(Error::validation(format!(
                "histogram over {measured} bits needs {} bins, got {}",
                1 << measured,
                counts.len()
            )));
        }
        Ok(Histogram { measured, counts })
    }

    pub fn measured_bits(&self) -> usize {
        self.measured
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn record(&mut self, outcome: usize) {
        self.counts[outcome] += 1;
    }

    pub fn add(&mut self, outcome: usize, n: u64) {
        self.counts[outcome] += n;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Shots in which measured bit `k` read 1.
    pub fn ones(&self, k: usize) -> u64 {
        self.counts
            .iter()
            .enumerate()
            .filter(|(o, _)| (o >> k) & 1 == 1)
            .map(|(_, c)| c)
            .sum()
    }

    /// Fraction of shots in which measured bit `k` read 1.
    pub fn fraction_ones(&self, k: usize) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        self.ones(k) as f64 / total as f64
    }

    pub fn bitstring(&self, outcome: usize) -> String {
        (0..self.measured)
            .rev()
            .map(|k| if (outcome >> k) & 1 == 1 { '1' } else { '0' })
            .collect()
    }

    /// Nonzero bins keyed by bitstring.
    pub fn to_map(&self) -> BTreeMap<String, u64> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(o, &c)| (self.bitstring(o), c))
            .collect()
    }
}

/// Draw `shots` i.i.d. outcomes from `distribution` (length `2^bits`).
pub(crate) fn sample_distribution(
    distribution: &[f64],
    bits: usize,
    shots: u64,
    sampler: &mut ShotSampler,
) -> Histogram {
    let mut cumulative = Vec::with_capacity(distribution.len());
    let mut acc = 0.0;
    for p in distribution {
        acc += p;
        cumulative.push(acc);
    }
    let last_nonzero = distribution
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(0);
    let mut hist = Histogram::new(bits);
    for _ in 0..shots {
        let r = sampler.uniform() * acc;
        let o = cumulative.partition_point(|&c| c <= r).min(last_nonzero);
        hist.record(o);
    }
    hist
}

/// Simulate `circuit` and draw `shots` measurements of its measured qubits.
pub fn sample(circuit: &Circuit, shots: u64, sampler: &mut ShotSampler) -> Result<Histogram> {
    if shots == 0 {
        return Err(Error::validation("shots must be at least 1"));
    }
    let state = apply(circuit)?;
    let distribution = state.marginal(&circuit.measured);
    Ok(sample_distribution(
        &distribution,
        circuit.measured.len(),
        shots,
        sampler,
    ))
}

/// Logical depth: greedy as-soon-as-possible layering in which gates sharing
/// any qubit (target or control) occupy different layers. Measurements are
/// not counted and multi-controlled RY is a single gate.
pub fn gate_depth(circuit: &Circuit) -> usize {
    let mut level = vec![0usize; circuit.width.max(1)];
    let mut depth = 0;
    for gate in &circuit.gates {
        let layer = gate
            .qubits()
            .filter_map(|q| level.get(q).copied())
            .max()
            .unwrap_or(0)
            + 1;
        for q in gate.qubits() {
            if let Some(l) = level.get_mut(q) {
                *l = layer;
            }
        }
        depth = depth.max(layer);
    }
    depth
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn full_flip() {
        let s = apply(&Circuit::new(1).ry(0, PI)).unwrap();
        assert!(s.amplitudes()[0].norm() < 1e-12);
        assert!((s.amplitudes()[1] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn half_rotation_gives_even_odds() {
        let theta = 2.0 * 0.5f64.sqrt().asin();
        let s = apply(&Circuit::new(1).ry(0, theta)).unwrap();
        assert!((readout_probability(&s, 0).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn readout_of_zero_state() {
        let s = StateVector::zero(1);
        assert_eq!(readout_probability(&s, 0).unwrap(), 0.0);
        let s = apply(&Circuit::new(1).ry(0, PI / 2.0)).unwrap();
        assert!((readout_probability(&s, 0).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn width_cap_is_a_resource_error() {
        let c = Circuit::new(30).ry(0, 1.0);
        assert!(matches!(apply(&c), Err(Error::Resource { cap: 24, .. })));
        assert!(matches!(
            apply_with_cap(&Circuit::new(4), 3),
            Err(Error::Resource { cap: 3, .. })
        ));
    }

    #[test]
    fn invalid_indices_rejected() {
        assert!(matches!(
            apply(&Circuit::new(2).ry(2, 0.1)),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            apply(&Circuit::new(2).cry(vec![Control::on(1)], 1, 0.1)),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            apply(&Circuit::new(2).measure(0).measure(0)),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            apply(&Circuit::new(0)),
            Err(Error::Validation(_))
        ));
        let s = StateVector::zero(2);
        assert!(readout_probability(&s, 2).is_err());
    }

    #[test]
    fn sampling_trivial_circuits() {
        let mut smp = ShotSampler::new(1, 0);
        let h = sample(&Circuit::new(1).ry(0, 0.0).measure(0), 100, &mut smp).unwrap();
        assert_eq!(h.to_map(), BTreeMap::from([("0".to_string(), 100)]));
        let h = sample(&Circuit::new(1).ry(0, PI).measure(0), 100, &mut smp).unwrap();
        assert_eq!(h.to_map(), BTreeMap::from([("1".to_string(), 100)]));
        assert!(sample(&Circuit::new(1).measure(0), 0, &mut smp).is_err());
    }

    #[test]
    fn bitstrings_are_msb_first() {
        // qubit 0 flipped, qubit 1 untouched; measured order (0, 1)
        let c = Circuit::new(2).x(0).measure(0).measure(1);
        let h = sample(&c, 5, &mut ShotSampler::new(0, 0)).unwrap();
        assert_eq!(h.to_map(), BTreeMap::from([("01".to_string(), 5)]));
    }

    #[test]
    fn single_gate_depth() {
        assert_eq!(gate_depth(&Circuit::new(1).ry(0, 0.3)), 1);
        assert_eq!(gate_depth(&Circuit::new(1)), 0);
        // disjoint qubits share a layer
        assert_eq!(gate_depth(&Circuit::new(2).ry(0, 0.3).ry(1, 0.3)), 1);
    }

    #[test]
    fn json_dump_lists_gate_kinds() {
        let c = Circuit::new(2).ry(0, 0.5).cry(vec![Control::off(0)], 1, 0.25);
        let json = c.to_json();
        assert!(json.contains("\"kind\": \"RY\""));
        assert!(json.contains("\"kind\": \"CRY\""));
        assert!(json.contains("\"polarity\": \"negative\""));
        let back: Circuit = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
    }
}
