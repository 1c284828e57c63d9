//! In-circuit fusion: several node kernels side by side on disjoint qubit
//! blocks so one shot yields a readout for every node.

use crate::error::{Error, Result};
use crate::rng::ShotSampler;
use crate::statevector::{self, Circuit, Histogram, StateVector, DEFAULT_WIDTH_CAP};

/// Placement of one constituent circuit inside a fused circuit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub offset: usize,
    pub width: usize,
    /// Positions in the fused circuit's measured list belonging to this block.
    pub readouts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedCircuit {
    pub circuit: Circuit,
    pub blocks: Vec<Block>,
}

pub fn fuse(kernels: &[Circuit]) -> Result<FusedCircuit> {
    fuse_with_cap(kernels, DEFAULT_WIDTH_CAP)
}

pub fn fuse_with_cap(kernels: &[Circuit], width_cap: usize) -> Result<FusedCircuit> {
    if kernels.is_empty() {
        return Err(Error::validation("nothing to fuse"));
    }
    let total: usize = kernels.iter().map(Circuit::width).sum();
    if total > width_cap {
        return Err(Error::Resource {
            what: "fused circuit width (qubits)",
            requested: total,
            cap: width_cap,
        });
    }
    let mut circuit = Circuit::new(0);
    let mut blocks = Vec::with_capacity(kernels.len());
    for k in kernels {
        k.validate()?;
        let first_readout = circuit.measured().len();
        let offset = circuit.append_block(k);
        blocks.push(Block {
            offset,
            width: k.width(),
            readouts: (first_readout..first_readout + k.measured().len()).collect(),
        });
    }
    Ok(FusedCircuit { circuit, blocks })
}

impl FusedCircuit {
    /// Exact probability that readout `r` of block `b` reads 1.
    pub fn block_probability(&self, state: &StateVector, block: usize, r: usize) -> Result<f64> {
        let pos = *self
            .blocks
            .get(block)
            .and_then(|b| b.readouts.get(r))
            .ok_or_else(|| Error::validation(format!("no readout {r} in block {block}")))?;
        statevector::readout_probability(state, self.circuit.measured()[pos])
    }

    /// Sample the fused circuit once and split the joint histogram into
    /// per-block marginal histograms.
    pub fn sample_blocks(&self, shots: u64, sampler: &mut ShotSampler) -> Result<Vec<Histogram>> {
        let joint = statevector::sample(&self.circuit, shots, sampler)?;
        Ok(self
            .blocks
            .iter()
            .map(|b| {
                let mut h = Histogram::new(b.readouts.len());
                for (outcome, &count) in joint.counts().iter().enumerate() {
                    if count == 0 {
                        continue;
                    }
                    let mut local = 0;
                    for (k, &pos) in b.readouts.iter().enumerate() {
                        local |= ((outcome >> pos) & 1) << k;
                    }
                    h.add(local, count);
                }
                h
            })
            .collect())
    }
}
