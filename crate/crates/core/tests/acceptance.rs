//! Acceptance suite. Runs every criterion in sequence, prints one PASS/FAIL
//! line each and exits nonzero if any fails.
//!
//! `cargo test -p qpu-stencil --test acceptance`

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use qpu_stencil::harness::{
    execution_ratio, run_convergence, run_cost_model, run_error_propagation, run_hardware_style,
    run_jacobi_demo, shot_scaling, log_log_slope, RunConfig,
};
use qpu_stencil::kernels::{
    bernoulli_kernel_with, branching_exact, branching_kernel, build_branching_circuit, fuse, Readout,
    ShotBudget,
};
use qpu_stencil::noise::mitigate;
use qpu_stencil::pde::{auto_dt, classical_step, quantum_step, BurgersParams, HeatParams, SampledStep, Stencil, WindowMode};
use qpu_stencil::runtime::DelayModel;
use qpu_stencil::statevector::apply;
use qpu_stencil::{
    BranchValues, ConfusionMatrix, Field, Grid1D, KernelKind, NormWindow, Result, ShotSampler,
    StencilWeights, StreamKey,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn random_triple(s: &mut ShotSampler) -> Result<(BranchValues, StencilWeights)> {
    let values = BranchValues::new((0..3).map(|_| s.uniform()).collect())?;
    let raw: Vec<f64> = (0..3).map(|_| s.uniform()).collect();
    let total: f64 = raw.iter().sum();
    let w = StencilWeights::new(raw.iter().map(|x| x / total).collect())?;
    Ok((values, w))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn exact_vs_classical(grid: &Grid1D, initial: &Field, stencil: &impl Stencil, window: WindowMode, steps: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for kind in [KernelKind::Branching, KernelKind::Bernoulli] {
        let cfg = SampledStep {
            kind,
            budget: ShotBudget::Exact,
            window,
            readout: Readout::ideal(),
        };
        let (mut c, mut q) = (initial.clone(), initial.clone());
        for step in 0..steps {
            c = classical_step(grid, &c, stencil, None)?;
            q = quantum_step(grid, &q, stencil, &cfg, 0, StreamKey::new(step as u64), None)?.0;
            worst = worst.max(max_abs_diff(&c.values, &q.values));
        }
    }
    Ok(worst)
}

fn exactness() -> Result<Outcome> {
    let mut s = ShotSampler::new(11, 0);
    let mut kernel_err: f64 = 0.0;
    for _ in 0..1000 {
        let (v, w) = random_triple(&mut s)?;
        kernel_err = kernel_err.max((branching_exact(&v, &w)? - v.convex_sum(&w)).abs());
    }

    let heat_grid = Grid1D::heat(64)?;
    let heat = HeatParams::new(1.0, 0.4 * heat_grid.dx * heat_grid.dx, &heat_grid)?;
    let heat0 = Field::from_fn(&heat_grid, NormWindow::unit(), |x| (PI * x).sin());
    let heat_err = exact_vs_classical(&heat_grid, &heat0, &heat, WindowMode::Fixed, 20)?;

    let bg = Grid1D::burgers(64)?;
    let nu = 0.01;
    let burgers = BurgersParams::new(nu, auto_dt(&bg, nu, 1.0, 0.9)?, &bg)?;
    let b0 = Field::from_fn(&bg, NormWindow::new(-1.0, 1.0)?, |x| -(PI * x).sin());
    let mut burgers_err: f64 = 0.0;
    for window in [WindowMode::Fixed, WindowMode::Stencil] {
        burgers_err = burgers_err.max(exact_vs_classical(&bg, &b0, &burgers, window, 20)?);
    }
    let tol = 1e-12;
    outcome(
        kernel_err <= tol && heat_err <= tol && burgers_err <= tol,
        format!("kernel {kernel_err:.1e}, heat step {heat_err:.1e}, burgers step {burgers_err:.1e} (tol {tol:.0e})"),
    )
}

fn scaling() -> Result<Outcome> {
    let values = BranchValues::new(vec![0.3, 0.6, 0.8])?;
    let weights = StencilWeights::three(0.2, 0.5, 0.3)?;
    let shots = [500, 1000, 2000, 4000, 8000];
    let mut slopes = Vec::new();
    for kind in [KernelKind::Branching, KernelKind::Bernoulli] {
        let rows = shot_scaling(kind, &values, &weights, &shots, 200, 21)?;
        let xs: Vec<f64> = rows.iter().map(|r| r.0 as f64).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
        slopes.push((kind, log_log_slope(&xs, &ys)?));
    }
    let pass = slopes.iter().all(|(_, s)| (s + 0.5).abs() <= 0.1);
    let detail = slopes.iter().map(|(k, s)| format!("{k} slope {s:.3}")).collect::<Vec<_>>().join(", ");
    outcome(pass, format!("{detail} (target -0.5 ± 0.1)"))
}

fn propagation(preset: &str, l2_band: (f64, f64), linf_band: (f64, f64), early_peak: bool) -> Result<Outcome> {
    let mut cfg = RunConfig::preset(preset)?;
    cfg.propagation_shots = vec![4000];
    cfg.steps = 100;
    cfg.repetitions = 5;
    let report = run_error_propagation(&cfg)?;
    let last = report.final_rows()[0];
    let (l2, linf) = (last.rel_l2.mean, last.rel_linf.mean);
    let inside = |x: f64, (lo, hi): (f64, f64)| x >= lo && x <= hi;
    let mut pass = inside(l2, l2_band) && inside(linf, linf_band);
    let pct = |x: f64| format!("{}", (x * 1e4).round() / 1e2);
    let mut detail = format!(
        "relL2 {}% in [{}, {}]%, relLinf {}% in [{}, {}]%",
        pct(l2),
        pct(l2_band.0),
        pct(l2_band.1),
        pct(linf),
        pct(linf_band.0),
        pct(linf_band.1)
    );
    if early_peak {
        let peak = report
            .rows_for(4000)
            .iter()
            .filter(|r| (1..=20).contains(&r.step))
            .map(|r| r.rel_linf.mean)
            .fold(0.0, f64::max);
        pass &= peak > linf;
        detail += &format!(", early relLinf peak {}% > final", pct(peak));
    }
    outcome(pass, detail)
}

fn convergence() -> Result<Outcome> {
    let mut parts = Vec::new();
    let mut pass = true;
    for preset in ["heat-default", "burgers-paper-setup"] {
        let mut cfg = RunConfig::preset(preset)?;
        cfg.shots_sweep = vec![500, 1000, 2000, 4000, 8000];
        cfg.sweep_steps = 50;
        cfg.repetitions = 5;
        let conv = run_convergence(&cfg)?;
        let finals = conv.report.final_rows();
        let at = |m: u64| finals.iter().find(|r| r.shots == m).map(|r| r.l2.mean).unwrap_or(f64::NAN);
        let (lo, hi) = (at(500), at(8000));
        pass &= hi < lo;
        parts.push(format!(
            "{preset} L2 {lo:.3e} (M=500) -> {hi:.3e} (M=8000), slope {:.2}",
            conv.l2_slope.unwrap_or(f64::NAN)
        ));
    }
    outcome(pass, parts.join("; "))
}

fn mitigation() -> Result<Outcome> {
    let cm = ConfusionMatrix::brisbane_snapshot();
    let mut round_trip: f64 = 0.0;
    for i in 0..=1000 {
        let u = i as f64 / 1000.0;
        round_trip = round_trip.max((mitigate(cm.observed_one_probability(u), &cm)? - u).abs());
    }

    let values = BranchValues::new(vec![0.5])?;
    let weights = StencilWeights::new(vec![1.0])?;
    let raw = Readout { noise: Some(cm), mitigation: None };
    let fixed = Readout { noise: Some(cm), mitigation: Some(cm) };
    let runs = 20;
    let (mut raw_bias, mut mit_bias) = (0.0, 0.0);
    for r in 0..runs {
        let s = ShotSampler::new(61, r);
        raw_bias += bernoulli_kernel_with(&values, &weights, 100_000, &s, &raw)?.estimate - 0.5;
        mit_bias += bernoulli_kernel_with(&values, &weights, 100_000, &s, &fixed)?.estimate - 0.5;
    }
    let (raw_bias, mit_bias) = ((raw_bias / runs as f64).abs(), (mit_bias / runs as f64).abs());
    let ratio = raw_bias / mit_bias;
    outcome(
        round_trip <= 1e-10 && ratio >= 5.0,
        format!(
            "round trip {round_trip:.1e} (tol 1e-10); bias raw {raw_bias:.2e} vs mitigated {mit_bias:.2e}, ratio {ratio:.1} (need >= 5, mean of {runs} runs at M=1e5)"
        ),
    )
}

fn hardware_style() -> Result<Outcome> {
    let cfg = RunConfig::preset("hardware-style")?;
    let pairs = run_hardware_style(&cfg)?.linf_pairs();
    let better = pairs.iter().filter(|(raw, mit)| mit <= raw).count();
    let shown = pairs.iter().map(|(r, m)| format!("{r:.4}/{m:.4}")).collect::<Vec<_>>().join(" ");
    outcome(better >= 4, format!("mitigated <= raw in {better}/{} reps (raw/mitigated Linf: {shown})", pairs.len()))
}

fn cost_model() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for shots in [1000, 4000, 30000] {
        let mut cfg = RunConfig::preset("heat-default")?;
        cfg.shots = shots;
        cfg.n = 8;
        let r = run_cost_model(&cfg)?;
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        worst = worst.max(rel(r.fitted.0, r.generating.0)).max(rel(r.fitted.1, r.generating.1));
    }
    let ratio = execution_ratio(&DelayModel::brisbane_table4());
    let target = 11.421 / 3.501;
    let ratio_err = ((ratio - target) / target).abs();
    outcome(
        worst <= 0.05 && ratio_err <= 0.01,
        format!("fit rel error {worst:.1e} (tol 5%); execution ratio {ratio:.4} vs {target:.4} ({:.3}%)", 100.0 * ratio_err),
    )
}

fn fusion() -> Result<Outcome> {
    let mut s = ShotSampler::new(91, 0);
    let mut marginal_err: f64 = 0.0;
    let mut worst_z: f64 = 0.0;
    let shots = 10_000;
    for k in [2usize, 4, 8] {
        let triples = (0..k).map(|_| random_triple(&mut s)).collect::<Result<Vec<_>>>()?;
        let circuits = triples
            .iter()
            .map(|(v, w)| build_branching_circuit(v, w))
            .collect::<Result<Vec<_>>>()?;
        let fused = fuse(&circuits)?;
        let state = apply(&fused.circuit)?;
        for (b, (v, w)) in triples.iter().enumerate() {
            marginal_err = marginal_err.max((fused.block_probability(&state, b, 0)? - branching_exact(v, w)?).abs());
        }
        drop(state);
        let hists = fused.sample_blocks(shots, &mut ShotSampler::new(92, k as u64))?;
        for (b, (v, w)) in triples.iter().enumerate() {
            let p = hists[b].fraction_ones(0);
            let se_fused = (p * (1.0 - p) / shots as f64).sqrt();
            let alone = branching_kernel(v, w, shots, &ShotSampler::new(93, (k * 100 + b) as u64))?;
            let se = se_fused.hypot(alone.std_error);
            if se > 0.0 {
                worst_z = worst_z.max((p - alone.estimate).abs() / se);
            }
        }
    }
    outcome(
        marginal_err <= 1e-12 && worst_z <= 5.0,
        format!("marginal error {marginal_err:.1e} (tol 1e-12); max |fused - standalone| = {worst_z:.2} SE (tol 5) for k in {{2,4,8}}"),
    )
}

fn jacobi() -> Result<Outcome> {
    let rows = run_jacobi_demo(8, 100_000, 101)?;
    let mut worst_z: f64 = 0.0;
    let mut pass = true;
    for r in &rows {
        let d = (r.estimate - r.exact).abs();
        if r.std_error > 0.0 {
            worst_z = worst_z.max(d / r.std_error);
        } else {
            pass &= d <= 1e-12;
        }
    }
    outcome(pass && worst_z <= 5.0, format!("max |estimate - exact| = {worst_z:.2} SE over {} nodes (tol 5)", rows.len()))
}

fn main() -> ExitCode {
    type Check = fn() -> Result<Outcome>;
    let criteria: [(&str, f64, Check); 10] = [
        ("exactness oracle", 10.0, exactness),
        ("1/sqrt(M) scaling", 120.0, scaling),
        ("heat error propagation", 300.0, || propagation("heat-default", (0.0075, 0.03), (0.02, 0.08), false)),
        ("burgers error propagation", 300.0, || {
            propagation("burgers-paper-setup", (0.035, 0.14), (0.10, 0.38), true)
        }),
        ("convergence sweep", 600.0, convergence),
        ("readout mitigation", 60.0, mitigation),
        ("hardware-style single step", 60.0, hardware_style),
        ("cost model", 10.0, cost_model),
        ("fusion equivalence", 30.0, fusion),
        ("row-kernel jacobi", 30.0, jacobi),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let result = check();
        let secs = t.elapsed().as_secs_f64();
        let (pass, detail) = match result {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {detail} [{secs:.1} s, budget {budget:.0} s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1
        );
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
