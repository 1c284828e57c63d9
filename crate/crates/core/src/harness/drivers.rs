//! Experiment drivers: time loops over repetitions, error tracking against a
//! reference, and the single-step, cost-model and Jacobi studies.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{
    build_branching_circuit, bernoulli_encoder, row_kernel, run_kernel, BranchValues, KernelKind,
    KernelResult, Readout, ShotBudget, SignedTerm, StencilWeights,
};
use crate::noise;
use crate::pde::{
    auto_dt, burgers_reference, classical_step, heat_analytic, heat_weights, quantum_step,
    shock_diagnostic, BurgersParams, Field, Grid1D, HeatParams, SampledStep, Scheme,
    ShockDiagnostic, WindowMode,
};
use crate::rng::{ShotSampler, StreamKey};
use crate::runtime::{
    choose_strategy, fit_launch_node, run_job, summarize, CostParams, DelayModel, Jitter, Job,
    JobTelemetry, PhaseSummary, SimulatedClock, StrategyChoice,
};

use super::config::{Mode, Problem, Reference, RunConfig};
use super::metrics::{error_norms, log_log_slope, Norms, Stat};

// top-level stream components, kept apart from (shots, rep, step) paths
const CALIBRATION_STREAM: u64 = u64::MAX;
const JACOBI_STREAM: u64 = u64::MAX - 1;
const COST_STREAM: u64 = u64::MAX - 2;
const SCALING_STREAM: u64 = u64::MAX - 3;

enum ReferenceTrack {
    Analytic { nu: f64 },
    Table(Vec<Vec<f64>>),
}

/// Grid, scheme, initial field and reference for one configuration.
pub struct Setup {
    pub grid: Grid1D,
    pub scheme: Scheme,
    pub initial: Field,
    pub readout: Readout,
    pub window: WindowMode,
    pub kernel: KernelKind,
    reference: ReferenceTrack,
    /// Same-grid classical trajectory (variance probe input).
    classical: Option<Vec<Field>>,
}

fn initial_profile(problem: Problem) -> fn(f64) -> f64 {
    match problem {
        Problem::Heat => |x| (PI * x).sin(),
        Problem::Burgers => |x| -(PI * x).sin(),
    }
}

impl Setup {
    /// Build everything needed to run `steps` steps of `cfg`.
    pub fn new(cfg: &RunConfig, steps: usize) -> Result<Self> {
        let (grid, u_max) = match cfg.problem {
            Problem::Heat => (Grid1D::heat(cfg.n)?, 0.0),
            Problem::Burgers => (Grid1D::burgers(cfg.n)?, cfg.u_max_abs),
        };
        let dt = match cfg.dt {
            Some(dt) => dt,
            None => auto_dt(&grid, cfg.nu, u_max, cfg.safety)?,
        };
        let scheme = match cfg.problem {
            Problem::Heat => Scheme::Heat(HeatParams::new(cfg.nu, dt, &grid)?),
            Problem::Burgers => Scheme::Burgers(BurgersParams::new(cfg.nu, dt, &grid)?),
        };
        let u0 = initial_profile(cfg.problem);
        let initial = Field::from_fn(&grid, cfg.norm_window(), u0);
        // exact zeros at the Dirichlet ends
        let initial = Field {
            ghost_lo: 0.0,
            ghost_hi: 0.0,
            ..initial
        };

        let classical = if cfg.mode == Mode::VarianceProbe || cfg.reference == Reference::Classical
        {
            let mut traj = Vec::with_capacity(steps + 1);
            traj.push(initial.clone());
            for step in 1..=steps {
                let next = classical_step(&grid, &traj[step - 1], &scheme, None)
                    .map_err(|e| e.at_step(step))?;
                traj.push(next);
            }
            Some(traj)
        } else {
            None
        };

        let reference = match cfg.reference {
            Reference::Analytic => ReferenceTrack::Analytic { nu: cfg.nu },
            Reference::Classical => ReferenceTrack::Table(
                classical
                    .as_ref()
                    .expect("classical trajectory built above")
                    .iter()
                    .map(|f| f.values.clone())
                    .collect(),
            ),
            Reference::Refined => {
                ReferenceTrack::Table(burgers_reference(&grid, cfg.nu, dt, u0, steps, cfg.refine)?)
            }
        };

        let readout = readout_for(cfg)?;
        Ok(Setup {
            grid,
            scheme,
            initial,
            readout,
            window: cfg.window,
            kernel: cfg.kernel,
            reference,
            classical,
        })
    }

    pub fn dt(&self) -> f64 {
        crate::pde::Stencil::dt(&self.scheme)
    }

    /// Reference values after `step` steps.
    pub fn reference(&self, step: usize) -> Result<Vec<f64>> {
        match &self.reference {
            ReferenceTrack::Analytic { nu } => {
                let t = step as f64 * self.dt();
                Ok(self.grid.nodes().iter().map(|&x| heat_analytic(x, t, *nu)).collect())
            }
            ReferenceTrack::Table(rows) => rows.get(step).cloned().ok_or_else(|| {
                Error::validation(format!("reference holds {} steps, asked for {step}", rows.len() - 1))
            }),
        }
    }
}

/// Injected noise plus (optionally calibrated) mitigation matrix.
pub fn readout_for(cfg: &RunConfig) -> Result<Readout> {
    let Some(cm) = cfg.noise_matrix()? else {
        return Ok(Readout::ideal());
    };
    let mitigation = if !cfg.mitigation {
        None
    } else if cfg.calibration_shots == 0 {
        Some(cm)
    } else {
        let mut smp = ShotSampler::from_key(cfg.seed, StreamKey::path(&[CALIBRATION_STREAM]));
        Some(noise::calibrate(&mut smp, cfg.calibration_shots, &cm)?)
    };
    Ok(Readout {
        noise: Some(cm),
        mitigation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub norms: Norms,
}

/// Error trajectory of one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub shots: u64,
    pub repetition: usize,
    pub steps: Vec<StepRecord>,
    #[serde(skip)]
    pub final_field: Option<Field>,
}

/// Run `steps` steps of one repetition, recording errors after every step
/// (step 0 is the initial condition). Sampled nodes draw from
/// `StreamKey::path(&[shots, rep, step]).child(node)`.
pub fn run_trajectory(
    setup: &Setup,
    readout: &Readout,
    mode: Mode,
    shots: u64,
    seed: u64,
    rep: usize,
    steps: usize,
) -> Result<Series> {
    let sampled = |budget| SampledStep {
        kind: setup.kernel,
        budget,
        window: setup.window,
        readout: *readout,
    };
    let mut field = setup.initial.clone();
    let mut records = Vec::with_capacity(steps + 1);
    records.push(StepRecord {
        step: 0,
        time: 0.0,
        norms: error_norms(&field.values, &setup.reference(0)?)?,
    });
    for step in 1..=steps {
        let key = StreamKey::path(&[shots, rep as u64, step as u64]);
        let g = &setup.grid;
        let s = &setup.scheme;
        let next = match mode {
            Mode::Classical => classical_step(g, &field, s, None),
            Mode::Exact => {
                quantum_step(g, &field, s, &sampled(ShotBudget::Exact), seed, key, None).map(|r| r.0)
            }
            Mode::Sampled => {
                quantum_step(g, &field, s, &sampled(ShotBudget::Shots(shots)), seed, key, None)
                    .map(|r| r.0)
            }
            Mode::VarianceProbe => {
                let input = &setup.classical.as_ref().expect("built for variance probe")[step - 1];
                quantum_step(g, input, s, &sampled(ShotBudget::Shots(shots)), seed, key, None)
                    .map(|r| r.0)
            }
        }
        .map_err(|e| e.at_step(step))?;
        field = next;
        records.push(StepRecord {
            step,
            time: field.time,
            norms: error_norms(&field.values, &setup.reference(step)?)?,
        });
    }
    Ok(Series {
        shots,
        repetition: rep,
        steps: records,
        final_field: Some(field),
    })
}

/// Per-step statistics over repetitions for one shot count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub shots: u64,
    pub step: usize,
    pub time: f64,
    pub l2: Stat,
    pub linf: Stat,
    pub rel_l2: Stat,
    pub rel_linf: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub series: Vec<Series>,
    pub aggregate: Vec<AggregateRow>,
}

impl ErrorReport {
    pub fn from_series(series: Vec<Series>) -> Self {
        let mut shots: Vec<u64> = Vec::new();
        for s in &series {
            if !shots.contains(&s.shots) {
                shots.push(s.shots);
            }
        }
        let mut aggregate = Vec::new();
        for m in shots {
            let group: Vec<&Series> = series.iter().filter(|s| s.shots == m).collect();
            let n_steps = group.iter().map(|s| s.steps.len()).min().unwrap_or(0);
            for k in 0..n_steps {
                let col = |f: fn(&Norms) -> Option<f64>| {
                    Stat::of(group.iter().map(|s| f(&s.steps[k].norms)))
                };
                aggregate.push(AggregateRow {
                    shots: m,
                    step: k,
                    time: group[0].steps[k].time,
                    l2: col(|n| Some(n.l2)),
                    linf: col(|n| Some(n.linf)),
                    rel_l2: col(|n| n.rel_l2),
                    rel_linf: col(|n| n.rel_linf),
                });
            }
        }
        ErrorReport { series, aggregate }
    }

    /// Aggregate rows for one shot count, in step order.
    pub fn rows_for(&self, shots: u64) -> Vec<&AggregateRow> {
        self.aggregate.iter().filter(|r| r.shots == shots).collect()
    }

    /// Last-step aggregate row per shot count.
    pub fn final_rows(&self) -> Vec<AggregateRow> {
        let mut out: Vec<AggregateRow> = Vec::new();
        for r in &self.aggregate {
            match out.last_mut() {
                Some(last) if last.shots == r.shots => *last = *r,
                _ => out.push(*r),
            }
        }
        out
    }
}

fn run_repetitions(
    setup: &Setup,
    cfg: &RunConfig,
    shots: u64,
    steps: usize,
) -> Result<Vec<Series>> {
    (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| run_trajectory(setup, &setup.readout, cfg.mode, shots, cfg.seed, rep, steps))
        .collect()
}

/// Errors over `cfg.steps` steps for every shot count in
/// `cfg.propagation_shots`, `cfg.repetitions` repetitions each.
pub fn run_error_propagation(cfg: &RunConfig) -> Result<ErrorReport> {
    let setup = Setup::new(cfg, cfg.steps)?;
    let mut series = Vec::new();
    for &m in &cfg.propagation_shots {
        series.extend(run_repetitions(&setup, cfg, m, cfg.steps)?);
    }
    Ok(ErrorReport::from_series(series))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub report: ErrorReport,
    /// Slope of ln(mean final L2) against ln(M); `None` with a single M or
    /// zero errors.
    pub l2_slope: Option<f64>,
}

/// Final errors after `cfg.sweep_steps` steps for each M in
/// `cfg.shots_sweep`.
pub fn run_convergence(cfg: &RunConfig) -> Result<ConvergenceReport> {
    let setup = Setup::new(cfg, cfg.sweep_steps)?;
    let mut series = Vec::new();
    for &m in &cfg.shots_sweep {
        series.extend(run_repetitions(&setup, cfg, m, cfg.sweep_steps)?);
    }
    let report = ErrorReport::from_series(series);
    let finals = report.final_rows();
    let l2_slope = if finals.len() >= 2 {
        let xs: Vec<f64> = finals.iter().map(|r| r.shots as f64).collect();
        let ys: Vec<f64> = finals.iter().map(|r| r.l2.mean).collect();
        log_log_slope(&xs, &ys).ok()
    } else {
        None
    };
    Ok(ConvergenceReport { report, l2_slope })
}

/// Burgers shock position and steepness of the final field per repetition.
pub fn shock_diagnostics(setup: &Setup, report: &ErrorReport) -> Vec<(u64, usize, ShockDiagnostic)> {
    report
        .series
        .iter()
        .filter_map(|s| {
            s.final_field
                .as_ref()
                .map(|f| (s.shots, s.repetition, shock_diagnostic(&setup.grid, f)))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardwareRow {
    pub repetition: usize,
    pub mitigated: bool,
    pub l2: f64,
    pub linf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareReport {
    pub rows: Vec<HardwareRow>,
}

impl HardwareReport {
    /// `(raw, mitigated)` L_inf pairs per repetition.
    pub fn linf_pairs(&self) -> Vec<(f64, f64)> {
        let reps = self.rows.iter().map(|r| r.repetition).max().map_or(0, |m| m + 1);
        (0..reps)
            .filter_map(|rep| {
                let get = |mit| {
                    self.rows
                        .iter()
                        .find(|r| r.repetition == rep && r.mitigated == mit)
                        .map(|r| r.linf)
                };
                Some((get(false)?, get(true)?))
            })
            .collect()
    }
}

/// One sampled step under the configured readout noise, with and without
/// mitigation on the same shots, scored against the configured reference.
pub fn run_hardware_style(cfg: &RunConfig) -> Result<HardwareReport> {
    let setup = Setup::new(cfg, cfg.steps)?;
    let noise = cfg.noise_matrix()?;
    let raw = Readout {
        noise,
        mitigation: None,
    };
    let mitigated = match (noise, setup.readout.mitigation) {
        (Some(_), Some(m)) => Readout {
            noise,
            mitigation: Some(m),
        },
        (Some(cm), None) => Readout {
            noise,
            mitigation: Some(cm),
        },
        (None, _) => raw,
    };
    let rows = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| {
            [(false, raw), (true, mitigated)]
                .into_iter()
                .map(|(flag, readout)| {
                    let s = run_trajectory(&setup, &readout, Mode::Sampled, cfg.shots, cfg.seed, rep, cfg.steps)?;
                    let last = s.steps.last().expect("initial record").norms;
                    Ok(HardwareRow {
                        repetition: rep,
                        mitigated: flag,
                        l2: last.l2,
                        linf: last.linf,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HardwareReport {
        rows: rows.into_iter().flatten().collect(),
    })
}

/// Sample standard deviation of a single-node estimator over `reps`
/// independent runs, for each shot count.
pub fn shot_scaling(
    kind: KernelKind,
    values: &BranchValues,
    weights: &StencilWeights,
    shot_counts: &[u64],
    reps: usize,
    seed: u64,
) -> Result<Vec<(u64, f64)>> {
    shot_counts
        .iter()
        .map(|&m| {
            let estimates = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let smp = ShotSampler::from_key(seed, StreamKey::path(&[SCALING_STREAM, m, r as u64]));
                    run_kernel(kind, values, weights, ShotBudget::Shots(m), &smp, &Readout::ideal())
                        .map(|k| k.estimate)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((m, crate::runtime::mean_std(&estimates).1))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostModelReport {
    /// `(T_launch, T_node)` implied by the zero-jitter delay model.
    pub generating: (f64, f64),
    /// Least-squares estimate from the zero-jitter telemetry.
    pub fitted: (f64, f64),
    pub fit_telemetry: Vec<JobTelemetry>,
    /// Per-node jobs in the style of the timing table, jitter as configured.
    pub table_telemetry: Vec<JobTelemetry>,
    pub table_summary: Vec<PhaseSummary>,
    /// Modeled execution at 30000 vs 4000 shots.
    pub execution_ratio: f64,
    pub strategy: StrategyChoice,
}

fn heat_node_kernels(kind: KernelKind, n: usize) -> Result<Vec<Vec<crate::statevector::Circuit>>> {
    let grid = Grid1D::heat(n)?;
    let f = Field::from_fn(&grid, crate::kernels::NormWindow::unit(), |x| (PI * x).sin());
    let w = heat_weights(0.5)?;
    (0..n)
        .map(|i| {
            let s = f.stencil(i).map(|u| u.clamp(0.0, 1.0));
            match kind {
                KernelKind::Branching => {
                    Ok(vec![build_branching_circuit(&BranchValues::new(s.to_vec())?, &w)?])
                }
                KernelKind::Bernoulli => s.iter().map(|&u| bernoulli_encoder(u)).collect(),
            }
        })
        .collect()
}

/// Synthetic telemetry, the launch/node fit and the modeled strategy.
pub fn run_cost_model(cfg: &RunConfig) -> Result<CostModelReport> {
    let model = cfg.delay_model()?;
    let flat = model.with_jitter(Jitter::None);
    let nodes = heat_node_kernels(cfg.kernel, cfg.n)?;
    let per_node: Vec<_> = nodes.iter().flatten().cloned().collect();

    // zero-jitter jobs of k circuits each
    let mut clock = SimulatedClock::new(flat, ShotSampler::new(cfg.seed, COST_STREAM));
    let mut fit_telemetry = Vec::new();
    for (id, k) in [1usize, 2, 4, 8].into_iter().enumerate() {
        let job = Job {
            job_id: id as u64,
            kernel_kind: cfg.kernel.to_string(),
            circuits: per_node.iter().cycle().take(k).cloned().collect(),
            shots: cfg.shots,
            nodes_covered: k,
        };
        let smp = ShotSampler::from_key(cfg.seed, StreamKey::path(&[COST_STREAM, id as u64]));
        fit_telemetry.push(run_job(&job, &smp, &mut clock)?.1);
    }
    let fitted = fit_launch_node(&fit_telemetry)?;
    let generating = (
        flat.transpile_s + flat.queue_mean_s + flat.exec_intercept_s + flat.wall_residual_s,
        flat.exec_per_shot_s * cfg.shots as f64,
    );

    // one job per circuit, as configured (jittered)
    let mut clock = SimulatedClock::new(model, ShotSampler::new(cfg.seed, COST_STREAM ^ 1));
    let mut table_telemetry = Vec::new();
    for (id, c) in per_node.iter().enumerate() {
        let job = Job {
            job_id: id as u64,
            kernel_kind: cfg.kernel.to_string(),
            circuits: vec![c.clone()],
            shots: cfg.shots,
            nodes_covered: 1,
        };
        let smp = ShotSampler::from_key(cfg.seed, StreamKey::path(&[COST_STREAM, 1 << 32 | id as u64]));
        table_telemetry.push(run_job(&job, &smp, &mut clock)?.1);
    }
    let table_summary = summarize(&table_telemetry);

    let width = match cfg.kernel {
        KernelKind::Branching => 3,
        KernelKind::Bernoulli => 1,
    };
    let params = CostParams::new(fitted.0.max(0.0), fitted.1.max(0.0), cfg.gamma)?;
    Ok(CostModelReport {
        generating,
        fitted,
        fit_telemetry,
        table_telemetry,
        table_summary,
        execution_ratio: execution_ratio(&model),
        strategy: choose_strategy(&params, cfg.width_cap, width, cfg.max_batch),
    })
}

pub fn execution_ratio(model: &DelayModel) -> f64 {
    model.execution_mean(30_000) / model.execution_mean(4_000)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobiRow {
    pub node: usize,
    pub exact: f64,
    pub estimate: f64,
    pub std_error: f64,
}

/// One Jacobi sweep for `-u'' = 1` on `n` interior nodes of `[0, 1]`
/// (`A = tridiag(-1, 2, -1)`, `b = h^2`), starting from `sin(pi x)`. The
/// off-diagonal row products are estimated by the row kernel.
pub fn run_jacobi_demo(n: usize, shots: u64, seed: u64) -> Result<Vec<JacobiRow>> {
    let grid = Grid1D::heat(n)?;
    let h = grid.dx;
    let u0: Vec<f64> = grid.nodes().iter().map(|&x| (PI * x).sin()).collect();
    let (diag, off, b) = (2.0, -1.0, h * h);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let neighbors: Vec<usize> = [i.checked_sub(1), (i + 1 < n).then_some(i + 1)]
                .into_iter()
                .flatten()
                .collect();
            let exact_off: f64 = neighbors.iter().map(|&j| off * u0[j]).sum();
            let terms = neighbors
                .iter()
                .map(|&j| SignedTerm::new(off, u0[j]))
                .collect::<Result<Vec<_>>>()?;
            let smp = ShotSampler::from_key(seed, StreamKey::path(&[JACOBI_STREAM, i as u64]));
            let r = row_kernel(&terms, shots, &smp)?;
            Ok(JacobiRow {
                node: i,
                exact: (b - exact_off) / diag,
                estimate: (b - r.estimate) / diag,
                std_error: r.std_error / diag,
            })
        })
        .collect()
}

/// Per-node kernel results of one sampled step from the initial field
/// (diagnostics and benches).
pub fn single_step_results(setup: &Setup, shots: u64, seed: u64) -> Result<Vec<KernelResult>> {
    let cfg = SampledStep {
        kind: setup.kernel,
        budget: ShotBudget::Shots(shots),
        window: setup.window,
        readout: setup.readout,
    };
    quantum_step(&setup.grid, &setup.initial, &setup.scheme, &cfg, seed, StreamKey::ROOT, None)
        .map(|r| r.1)
}
