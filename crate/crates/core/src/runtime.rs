//! Launch-amortization cost model, simulated job execution and per-job
//! telemetry.

use std::path::Path;
use std::time::Instant;

use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::ShotSampler;
use crate::statevector::{self, Circuit, Histogram};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub t_launch: f64,
    pub t_node: f64,
    pub gamma: f64,
}

impl CostParams {
    pub fn new(t_launch: f64, t_node: f64, gamma: f64) -> Result<Self> {
        if !(t_launch >= 0.0 && t_node >= 0.0 && t_launch.is_finite() && t_node.is_finite()) {
            return Err(Error::validation(format!(
                "cost model needs T_launch, T_node >= 0, got {t_launch}, {t_node}"
            )));
        }
        if !(gamma >= 1.0 && gamma.is_finite()) {
            return Err(Error::validation(format!("ICF overhead gamma {gamma} must be >= 1")));
        }
        Ok(CostParams {
            t_launch,
            t_node,
            gamma,
        })
    }
}

/// `T_launch / k + gamma T_node`.
pub fn per_node_time_icf(p: &CostParams, k_fused: usize) -> Result<f64> {
    if k_fused == 0 {
        return Err(Error::validation("k_fused must be >= 1"));
    }
    Ok(p.t_launch / k_fused as f64 + p.gamma * p.t_node)
}

/// `T_launch / k + T_node`.
pub fn per_node_time_batch(p: &CostParams, batch: usize) -> Result<f64> {
    if batch == 0 {
        return Err(Error::validation("batch size must be >= 1"));
    }
    Ok(p.t_launch / batch as f64 + p.t_node)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Batch,
    Icf,
    /// Fused circuits, several per job.
    Hybrid,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Batch => "batch",
            Strategy::Icf => "icf",
            Strategy::Hybrid => "hybrid",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyChoice {
    pub strategy: Strategy,
    /// Nodes fused per circuit.
    pub k_fused: usize,
    /// Circuits per job.
    pub batch: usize,
    pub per_node_s: f64,
}

/// Pick the cheapest modeled strategy. ICF fuses at most
/// `width_cap / kernel_width` nodes; a job holds at most `max_batch`
/// circuits. Ties go to batch, then ICF.
pub fn choose_strategy(
    p: &CostParams,
    width_cap: usize,
    kernel_width: usize,
    max_batch: usize,
) -> StrategyChoice {
    let k_max = width_cap / kernel_width.max(1);
    let b_max = max_batch.max(1);
    let launch = |nodes: usize| p.t_launch / nodes as f64;
    let mut best = StrategyChoice {
        strategy: Strategy::Batch,
        k_fused: 1,
        batch: b_max,
        per_node_s: launch(b_max) + p.t_node,
    };
    if k_max >= 2 {
        let candidates = [
            (Strategy::Icf, 1, launch(k_max) + p.gamma * p.t_node),
            (Strategy::Hybrid, b_max, launch(k_max * b_max) + p.gamma * p.t_node),
        ];
        for (strategy, batch, t) in candidates {
            if strategy == Strategy::Hybrid && b_max == 1 {
                continue;
            }
            if t < best.per_node_s {
                best = StrategyChoice {
                    strategy,
                    k_fused: k_max,
                    batch,
                    per_node_s: t,
                };
            }
        }
    }
    best
}

/// One row of per-job telemetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobTelemetry {
    pub job_id: u64,
    pub kernel_kind: String,
    pub transpile_s: f64,
    pub queue_s: f64,
    pub execution_s: f64,
    pub wall_s: f64,
    pub shots: u64,
    pub nodes_covered: usize,
}

#[derive(Serialize)]
struct TelemetryRow<'a> {
    job_id: u64,
    kernel_kind: &'a str,
    #[serde(rename = "Transpile [s]")]
    transpile: f64,
    #[serde(rename = "Queue [s]")]
    queue: f64,
    #[serde(rename = "Execution [s]")]
    execution: f64,
    #[serde(rename = "Wall [s]")]
    wall: f64,
}

pub const TELEMETRY_COLUMNS: [&str; 6] = [
    "job_id",
    "kernel_kind",
    "Transpile [s]",
    "Queue [s]",
    "Execution [s]",
    "Wall [s]",
];

pub fn write_telemetry_csv(path: &Path, rows: &[JobTelemetry]) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    if rows.is_empty() {
        w.write_record(TELEMETRY_COLUMNS).map_err(csv_err)?;
    }
    for r in rows {
        w.serialize(TelemetryRow {
            job_id: r.job_id,
            kernel_kind: &r.kernel_kind,
            transpile: r.transpile_s,
            queue: r.queue_s,
            execution: r.execution_s,
            wall: r.wall_s,
        })
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Jitter applied around a modeled mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Jitter {
    #[default]
    None,
    /// Multiplicative lognormal factor with mean 1.
    Lognormal,
}

/// Synthetic per-job delays. Execution is affine in the job's total shot
/// count; wall adds a fixed residual on top of the other phases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayModel {
    pub transpile_s: f64,
    pub queue_mean_s: f64,
    pub queue_rel_std: f64,
    pub exec_intercept_s: f64,
    pub exec_per_shot_s: f64,
    pub exec_rel_std: f64,
    pub wall_residual_s: f64,
    pub jitter: Jitter,
}

const TABLE4_M_LO: f64 = 4000.0;
const TABLE4_M_HI: f64 = 30000.0;
const TABLE4_EXEC_LO: f64 = 3.501;
const TABLE4_EXEC_HI: f64 = 11.421;

impl DelayModel {
    pub fn zero() -> Self {
        DelayModel {
            transpile_s: 0.0,
            queue_mean_s: 0.0,
            queue_rel_std: 0.0,
            exec_intercept_s: 0.0,
            exec_per_shot_s: 0.0,
            exec_rel_std: 0.0,
            wall_residual_s: 0.0,
            jitter: Jitter::None,
        }
    }

    /// Branching-kernel rows of the Brisbane timing table: execution through
    /// the 4k / 30k anchors, queue mean 0.466 s, residual = mean of the two
    /// rows' unexplained wall time.
    pub fn brisbane_table4() -> Self {
        let b = (TABLE4_EXEC_HI - TABLE4_EXEC_LO) / (TABLE4_M_HI - TABLE4_M_LO);
        let residual_lo = 4.765 - (0.022 + 0.466 + TABLE4_EXEC_LO);
        let residual_hi = 12.812 - (0.029 + 0.497 + TABLE4_EXEC_HI);
        DelayModel {
            transpile_s: 0.022,
            queue_mean_s: 0.466,
            queue_rel_std: 0.131 / 0.466,
            exec_intercept_s: TABLE4_EXEC_LO - TABLE4_M_LO * b,
            exec_per_shot_s: b,
            exec_rel_std: 0.365 / TABLE4_EXEC_LO,
            wall_residual_s: 0.5 * (residual_lo + residual_hi),
            jitter: Jitter::Lognormal,
        }
    }

    pub fn with_jitter(self, jitter: Jitter) -> Self {
        DelayModel { jitter, ..self }
    }

    /// Mean execution time for a job with `shots` total shots.
    pub fn execution_mean(&self, shots: u64) -> f64 {
        self.exec_intercept_s + self.exec_per_shot_s * shots as f64
    }
}

pub fn delay_preset(name: &str) -> Option<DelayModel> {
    match name {
        "none" | "zero" => Some(DelayModel::zero()),
        "brisbane-table4" => Some(DelayModel::brisbane_table4()),
        _ => None,
    }
}

/// Phase timings for one job. `measured_s` is the host time actually spent
/// in the phase.
pub trait Clock {
    fn transpile(&mut self, measured_s: f64) -> f64;
    fn queue(&mut self) -> f64;
    fn execution(&mut self, shots: u64, measured_s: f64) -> f64;
    fn residual(&mut self) -> f64;
}

/// Everything is instantaneous.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroClock;

impl Clock for ZeroClock {
    fn transpile(&mut self, _: f64) -> f64 {
        0.0
    }
    fn queue(&mut self) -> f64 {
        0.0
    }
    fn execution(&mut self, _: u64, _: f64) -> f64 {
        0.0
    }
    fn residual(&mut self) -> f64 {
        0.0
    }
}

/// Host wall-clock for transpile and execution; no queue.
#[derive(Debug, Clone, Copy, Default)]
pub struct HostClock;

impl Clock for HostClock {
    fn transpile(&mut self, measured_s: f64) -> f64 {
        measured_s
    }
    fn queue(&mut self) -> f64 {
        0.0
    }
    fn execution(&mut self, _: u64, measured_s: f64) -> f64 {
        measured_s
    }
    fn residual(&mut self) -> f64 {
        0.0
    }
}

/// Delays drawn from a [`DelayModel`] with its own seeded stream, so
/// telemetry is a function of (model, seed) only.
#[derive(Debug, Clone)]
pub struct SimulatedClock {
    model: DelayModel,
    sampler: ShotSampler,
}

impl SimulatedClock {
    pub fn new(model: DelayModel, sampler: ShotSampler) -> Self {
        SimulatedClock { model, sampler }
    }

    fn jittered(&mut self, mean: f64, rel_std: f64) -> f64 {
        if self.model.jitter == Jitter::None || rel_std <= 0.0 || mean <= 0.0 {
            return mean;
        }
        let sigma2 = (1.0 + rel_std * rel_std).ln();
        let ln = LogNormal::new(-0.5 * sigma2, sigma2.sqrt()).expect("finite lognormal params");
        mean * ln.sample(&mut self.sampler)
    }
}

impl Clock for SimulatedClock {
    fn transpile(&mut self, _: f64) -> f64 {
        self.model.transpile_s
    }
    fn queue(&mut self) -> f64 {
        let m = self.model;
        self.jittered(m.queue_mean_s, m.queue_rel_std)
    }
    fn execution(&mut self, shots: u64, _: f64) -> f64 {
        let m = self.model;
        self.jittered(m.execution_mean(shots), m.exec_rel_std)
    }
    fn residual(&mut self) -> f64 {
        self.model.wall_residual_s
    }
}

/// A unit of submission: circuits run back to back with `shots` each.
#[derive(Debug, Clone)]
pub struct Job {
    pub job_id: u64,
    pub kernel_kind: String,
    pub circuits: Vec<Circuit>,
    pub shots: u64,
    pub nodes_covered: usize,
}

/// Validate ("transpile"), then sample every circuit on its own stream
/// (`sampler.fork(index)`).
pub fn run_job(
    job: &Job,
    sampler: &ShotSampler,
    clock: &mut impl Clock,
) -> Result<(Vec<Histogram>, JobTelemetry)> {
    let t0 = Instant::now();
    for c in &job.circuits {
        c.validate()?;
    }
    let transpile_s = clock.transpile(t0.elapsed().as_secs_f64());
    let queue_s = clock.queue();

    let t1 = Instant::now();
    let hists = job
        .circuits
        .iter()
        .enumerate()
        .map(|(k, c)| statevector::sample(c, job.shots, &mut sampler.fork(k as u64)))
        .collect::<Result<Vec<_>>>()?;
    let total_shots = job.shots * job.circuits.len() as u64;
    let execution_s = clock.execution(total_shots, t1.elapsed().as_secs_f64());
    let wall_s = transpile_s + queue_s + execution_s + clock.residual();

    Ok((
        hists,
        JobTelemetry {
            job_id: job.job_id,
            kernel_kind: job.kernel_kind.clone(),
            transpile_s,
            queue_s,
            execution_s,
            wall_s,
            shots: total_shots,
            nodes_covered: job.nodes_covered,
        },
    ))
}

/// Ordinary least squares `y = a + b x`; returns `(a, b)`.
pub fn fit_affine(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::validation("affine fit needs >= 2 paired points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("affine fit with constant abscissa".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    Ok((my - b * mx, b))
}

/// Fit `wall / nodes = T_launch / nodes + T_node` over jobs of different
/// sizes. Returns `(T_launch, T_node)`.
pub fn fit_launch_node(rows: &[JobTelemetry]) -> Result<(f64, f64)> {
    let xs: Vec<f64> = rows.iter().map(|r| 1.0 / r.nodes_covered.max(1) as f64).collect();
    let ys: Vec<f64> = rows
        .iter()
        .map(|r| r.wall_s / r.nodes_covered.max(1) as f64)
        .collect();
    let (t_node, t_launch) = fit_affine(&xs, &ys)?;
    Ok((t_launch, t_node))
}

/// Mean and sample standard deviation of one telemetry phase per kernel kind.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseSummary {
    pub kernel_kind: String,
    pub jobs: usize,
    pub transpile: (f64, f64),
    pub queue: (f64, f64),
    pub execution: (f64, f64),
    pub wall: (f64, f64),
}

pub fn summarize(rows: &[JobTelemetry]) -> Vec<PhaseSummary> {
    let mut kinds: Vec<&str> = Vec::new();
    for r in rows {
        if !kinds.contains(&r.kernel_kind.as_str()) {
            kinds.push(&r.kernel_kind);
        }
    }
    kinds
        .into_iter()
        .map(|kind| {
            let sel: Vec<&JobTelemetry> = rows.iter().filter(|r| r.kernel_kind == kind).collect();
            let stat = |f: fn(&JobTelemetry) -> f64| mean_std(&sel.iter().map(|r| f(r)).collect::<Vec<_>>());
            PhaseSummary {
                kernel_kind: kind.to_string(),
                jobs: sel.len(),
                transpile: stat(|r| r.transpile_s),
                queue: stat(|r| r.queue_s),
                execution: stat(|r| r.execution_s),
                wall: stat(|r| r.wall_s),
            }
        })
        .collect()
}

/// Mean and `n - 1` standard deviation (0 for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
