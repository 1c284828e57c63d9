//! 1D grids, Heat and viscous Burgers stencils, the deterministic update and
//! its shot-sampled counterpart.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{
    run_kernel, BranchValues, KernelKind, KernelResult, NormWindow, Normalizer, Readout,
    ShotBudget, StencilWeights, UNIT_SLACK,
};
use crate::rng::{ShotSampler, StreamKey};

const CFL_TOL: f64 = 1e-12;

/// Uniform grid with `n` interior nodes strictly between `x_lo` and `x_hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub n: usize,
    pub x_lo: f64,
    pub x_hi: f64,
    pub dx: f64,
}

impl Grid1D {
    pub fn new(n: usize, x_lo: f64, x_hi: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::validation("grid needs at least one interior node"));
        }
        if !(x_lo.is_finite() && x_hi.is_finite()) || x_hi <= x_lo {
            return Err(Error::validation(format!(
                "grid domain [{x_lo}, {x_hi}] is empty"
            )));
        }
        Ok(Grid1D {
            n,
            x_lo,
            x_hi,
            dx: (x_hi - x_lo) / (n + 1) as f64,
        })
    }

    /// `[0, 1]`, `dx = 1/(N+1)`.
    pub fn heat(n: usize) -> Result<Self> {
        Grid1D::new(n, 0.0, 1.0)
    }

    /// `[-1, 1]`, `dx = 2/(N+1)`.
    pub fn burgers(n: usize) -> Result<Self> {
        Grid1D::new(n, -1.0, 1.0)
    }

    /// Position of interior node `i` (0-based), i.e. grid index `i + 1`.
    pub fn x(&self, i: usize) -> f64 {
        let k = i + 1;
        // measured from the nearer end so mirrored nodes are exact negatives
        if 2 * k <= self.n + 1 {
            self.x_lo + k as f64 * self.dx
        } else {
            self.x_hi - (self.n + 1 - k) as f64 * self.dx
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Grid with `factor` times as many cells whose every `factor`-th node
    /// coincides with a node of `self`.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::validation("refinement factor must be >= 1"));
        }
        Grid1D::new(factor * (self.n + 1) - 1, self.x_lo, self.x_hi)
    }
}

/// Interior values plus Dirichlet ghost values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub values: Vec<f64>,
    pub ghost_lo: f64,
    pub ghost_hi: f64,
    pub time: f64,
    pub window: NormWindow,
}

impl Field {
    pub fn new(values: Vec<f64>, ghost_lo: f64, ghost_hi: f64, window: NormWindow) -> Self {
        Field {
            values,
            ghost_lo,
            ghost_hi,
            time: 0.0,
            window,
        }
    }

    /// Sample `f` at the interior nodes; ghosts are `f` at the domain ends.
    pub fn from_fn(grid: &Grid1D, window: NormWindow, f: impl Fn(f64) -> f64) -> Self {
        Field::new(grid.nodes().into_iter().map(&f).collect(), f(grid.x_lo), f(grid.x_hi), window)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(u_{i-1}, u_i, u_{i+1})` with ghosts at the ends.
    pub fn stencil(&self, i: usize) -> [f64; 3] {
        let left = if i == 0 { self.ghost_lo } else { self.values[i - 1] };
        let right = if i + 1 == self.values.len() {
            self.ghost_hi
        } else {
            self.values[i + 1]
        };
        [left, self.values[i], right]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &u| (lo.min(u), hi.max(u)))
    }

    fn advanced(&self, values: Vec<f64>, dt: f64) -> Field {
        Field {
            values,
            ghost_lo: self.ghost_lo,
            ghost_hi: self.ghost_hi,
            time: self.time + dt,
            window: self.window,
        }
    }
}

/// Source of the per-node stencil weights for one step.
pub trait Stencil: Sync {
    fn dt(&self) -> f64;
    /// Weights for node `node` given its pre-step value.
    fn weights(&self, node: usize, u_center: f64) -> Result<StencilWeights>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatParams {
    pub nu: f64,
    pub dt: f64,
    pub lambda: f64,
}

impl HeatParams {
    pub fn new(nu: f64, dt: f64, grid: &Grid1D) -> Result<Self> {
        if !(nu >= 0.0 && dt > 0.0) {
            return Err(Error::validation(format!(
                "heat needs nu >= 0 and dt > 0, got nu={nu}, dt={dt}"
            )));
        }
        let lambda = nu * dt / (grid.dx * grid.dx);
        heat_weights(lambda)?;
        Ok(HeatParams {
            nu,
            dt,
            lambda: lambda.min(0.5),
        })
    }
}

impl Stencil for HeatParams {
    fn dt(&self) -> f64 {
        self.dt
    }

    fn weights(&self, _node: usize, _u: f64) -> Result<StencilWeights> {
        heat_weights(self.lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurgersParams {
    pub nu: f64,
    pub dt: f64,
    pub dx: f64,
    pub lambda: f64,
}

impl BurgersParams {
    pub fn new(nu: f64, dt: f64, grid: &Grid1D) -> Result<Self> {
        if !(nu >= 0.0 && dt > 0.0) {
            return Err(Error::validation(format!(
                "burgers needs nu >= 0 and dt > 0, got nu={nu}, dt={dt}"
            )));
        }
        Ok(BurgersParams {
            nu,
            dt,
            dx: grid.dx,
            lambda: nu * dt / (grid.dx * grid.dx),
        })
    }

    /// Local Courant number `u dt / dx`.
    pub fn courant(&self, u: f64) -> f64 {
        u * self.dt / self.dx
    }
}

impl Stencil for BurgersParams {
    fn dt(&self) -> f64 {
        self.dt
    }

    fn weights(&self, node: usize, u: f64) -> Result<StencilWeights> {
        burgers_weights(node, u, self)
    }
}

/// Either problem behind one type, for drivers that pick at run time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pde", rename_all = "lowercase")]
pub enum Scheme {
    Heat(HeatParams),
    Burgers(BurgersParams),
}

impl Stencil for Scheme {
    fn dt(&self) -> f64 {
        match self {
            Scheme::Heat(p) => p.dt,
            Scheme::Burgers(p) => p.dt,
        }
    }

    fn weights(&self, node: usize, u: f64) -> Result<StencilWeights> {
        match self {
            Scheme::Heat(p) => p.weights(node, u),
            Scheme::Burgers(p) => p.weights(node, u),
        }
    }
}

/// `(lambda, 1 - 2 lambda, lambda)`.
pub fn heat_weights(lambda: f64) -> Result<StencilWeights> {
    if !(-CFL_TOL..=0.5 + CFL_TOL).contains(&lambda) {
        return Err(Error::Stability {
            node: None,
            step: None,
            detail: format!("lambda = nu dt / dx^2 = {lambda} violates 0 <= lambda <= 1/2"),
        });
    }
    let l = lambda.clamp(0.0, 0.5);
    StencilWeights::three(l, 1.0 - 2.0 * l, l)
}

/// Upwind advection plus FTCS diffusion:
/// `(lambda + c+, 1 - w_L - w_R, lambda + c-)` with `c = u dt / dx`.
pub fn burgers_weights(node: usize, u: f64, params: &BurgersParams) -> Result<StencilWeights> {
    let c = params.courant(u);
    let lambda = params.lambda;
    let combined = c.abs() + 2.0 * lambda;
    if !(combined <= 1.0 + CFL_TOL) || lambda < 0.0 {
        return Err(Error::Stability {
            node: Some(node),
            step: None,
            detail: format!(
                "|u| dt/dx + 2 nu dt/dx^2 = {combined} > 1 (u = {u}, c = {c}, lambda = {lambda})"
            ),
        });
    }
    let wl = lambda + c.max(0.0);
    let wr = lambda + (-c).max(0.0);
    StencilWeights::three(wl, (1.0 - wl - wr).max(0.0), wr)
}

/// Source term `s(x, t)` added classically after the convex part.
pub type Source<'a> = Option<&'a (dyn Fn(f64, f64) -> f64 + Sync)>;

/// Deterministic update `u_i <- sum_b w_b u_b + dt s(x_i, t)`.
pub fn classical_step(
    grid: &Grid1D,
    field: &Field,
    stencil: &impl Stencil,
    source: Source<'_>,
) -> Result<Field> {
    check_grid(grid, field)?;
    let dt = stencil.dt();
    let values = (0..field.len())
        .into_par_iter()
        .map(|i| {
            let s = field.stencil(i);
            let w = stencil.weights(i, s[1])?;
            let w = w.as_slice();
            // center plus the (commutative) neighbor pair keeps mirror symmetry exact
            let convex = w[1] * s[1] + (w[0] * s[0] + w[2] * s[2]);
            Ok(convex + source.map_or(0.0, |f| dt * f(grid.x(i), field.time)))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(field.advanced(values, dt))
}

/// How neighbor values are mapped into `[0, 1]` before loading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowMode {
    /// The field's fixed window; leaving it is a range error.
    #[default]
    Fixed,
    /// Per node `[min, max]` of its three stencil values.
    Stencil,
}

impl std::str::FromStr for WindowMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(WindowMode::Fixed),
            "stencil" => Ok(WindowMode::Stencil),
            other => Err(Error::Config(format!(
                "unknown window mode `{other}` (expected fixed or stencil)"
            ))),
        }
    }
}

/// Everything the sampled step needs besides the field and stencil.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledStep {
    pub kind: KernelKind,
    pub budget: ShotBudget,
    pub window: WindowMode,
    pub readout: Readout,
}

/// Sampled update. Node `i` draws from stream `key.child(i)`. The returned
/// per-node results carry estimate and standard error in field units.
pub fn quantum_step(
    grid: &Grid1D,
    field: &Field,
    stencil: &impl Stencil,
    cfg: &SampledStep,
    seed: u64,
    key: StreamKey,
    source: Source<'_>,
) -> Result<(Field, Vec<KernelResult>)> {
    check_grid(grid, field)?;
    let dt = stencil.dt();
    let results = (0..field.len())
        .into_par_iter()
        .map(|i| {
            let s = field.stencil(i);
            let weights = stencil.weights(i, s[1])?;
            let window = match cfg.window {
                WindowMode::Fixed => field.window,
                WindowMode::Stencil => local_window(&s),
            };
            let mut norm = Normalizer::new(window, UNIT_SLACK * window.width());
            let loaded = s
                .iter()
                .map(|&u| norm.normalize(i, u))
                .collect::<Result<Vec<f64>>>()?;
            let sampler = ShotSampler::from_key(seed, key.child(i as u64));
            let mut r = run_kernel(
                cfg.kind,
                &BranchValues::new(loaded)?,
                &weights,
                cfg.budget,
                &sampler,
                &cfg.readout,
            )?;
            r.estimate = window.denormalize(r.estimate)
                + source.map_or(0.0, |f| dt * f(grid.x(i), field.time));
            r.std_error *= window.width();
            Ok(r)
        })
        .collect::<Result<Vec<KernelResult>>>()?;
    let values = results.iter().map(|r| r.estimate).collect();
    Ok((field.advanced(values, dt), results))
}

fn local_window(s: &[f64; 3]) -> NormWindow {
    let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        NormWindow { lo, hi }
    } else {
        // flat stencil: every loaded value is 0 and the estimate maps back to lo
        NormWindow { lo, hi: lo + 1.0 }
    }
}

fn check_grid(grid: &Grid1D, field: &Field) -> Result<()> {
    if grid.n != field.len() {
        return Err(Error::validation(format!(
            "field has {} values, grid has {} interior nodes",
            field.len(),
            grid.n
        )));
    }
    Ok(())
}

/// `exp(-nu pi^2 t) sin(pi x)`.
pub fn heat_analytic(x: f64, t: f64, nu: f64) -> f64 {
    (-nu * PI * PI * t).exp() * (PI * x).sin()
}

/// Classical Burgers trajectory sampled on `grid` after each of `steps`
/// steps of size `dt` (entry 0 is the initial condition).
///
/// With `refine = 1` this is the same-grid, same-`dt` run. With `refine > 1`
/// the run uses a grid with `refine` times as many cells (coinciding nodes)
/// and sub-steps each `dt` at half the fine-grid CFL limit.
pub fn burgers_reference(
    grid: &Grid1D,
    nu: f64,
    dt: f64,
    u0: impl Fn(f64) -> f64,
    steps: usize,
    refine: usize,
) -> Result<Vec<Vec<f64>>> {
    let fine = grid.refined(refine)?;
    let u_max = fine
        .nodes()
        .iter()
        .chain([fine.x_lo, fine.x_hi].iter())
        .map(|&x| u0(x).abs())
        .fold(0.0, f64::max);
    let sub = if refine == 1 {
        1
    } else {
        let limit = auto_dt(&fine, nu, u_max, 0.5)?;
        (dt / limit).ceil().max(1.0) as usize
    };
    let params = BurgersParams::new(nu, dt / sub as f64, &fine)?;
    let mut field = Field::from_fn(&fine, NormWindow { lo: -1.0, hi: 1.0 }, &u0);
    let coarse = |f: &Field| -> Vec<f64> {
        (0..grid.n).map(|i| f.values[(i + 1) * refine - 1]).collect()
    };
    let mut out = Vec::with_capacity(steps + 1);
    out.push(coarse(&field));
    for step in 1..=steps {
        for _ in 0..sub {
            field = classical_step(&fine, &field, &params, None).map_err(|e| e.at_step(step))?;
        }
        out.push(coarse(&field));
    }
    Ok(out)
}

/// Largest stable `dt` scaled by `safety`:
/// `u_max dt / dx + 2 nu dt / dx^2 = safety` (for `u_max = 0` this is the
/// Heat bound `lambda = safety / 2`).
pub fn auto_dt(grid: &Grid1D, nu: f64, u_max_abs: f64, safety: f64) -> Result<f64> {
    if !(nu >= 0.0 && u_max_abs >= 0.0) {
        return Err(Error::validation(format!(
            "auto_dt needs nu >= 0 and u_max >= 0, got {nu}, {u_max_abs}"
        )));
    }
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::validation(format!("safety {safety} outside (0, 1]")));
    }
    let rate = u_max_abs / grid.dx + 2.0 * nu / (grid.dx * grid.dx);
    if rate == 0.0 {
        return Err(Error::Degenerate(
            "auto_dt with nu = 0 and u_max = 0 has no CFL bound".into(),
        ));
    }
    Ok(safety / rate)
}

/// Steepest descent segment of the profile: where it sits and how steep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShockDiagnostic {
    pub position: f64,
    pub steepness: f64,
}

/// Locate the steepest negative slope over consecutive nodes, ghosts
/// included; `position` is the segment midpoint.
pub fn shock_diagnostic(grid: &Grid1D, field: &Field) -> ShockDiagnostic {
    let mut padded = Vec::with_capacity(field.len() + 2);
    padded.push(field.ghost_lo);
    padded.extend_from_slice(&field.values);
    padded.push(field.ghost_hi);
    let (k, slope) = padded
        .windows(2)
        .map(|w| (w[1] - w[0]) / grid.dx)
        .enumerate()
        .fold((0, 0.0), |best, (k, s)| if -s > -best.1 { (k, s) } else { best });
    ShockDiagnostic {
        position: grid.x_lo + (k as f64 + 0.5) * grid.dx,
        steepness: -slope,
    }
}
