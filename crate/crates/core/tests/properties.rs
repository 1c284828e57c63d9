use proptest::prelude::*;

use qpu_stencil::kernels::{
    allocate_shots, bernoulli_encoder, branching_exact, build_branching_circuit, fuse, Readout, ShotBudget,
};
use qpu_stencil::pde::{
    burgers_weights, classical_step, quantum_step, BurgersParams, HeatParams, SampledStep, Stencil, WindowMode,
};
use qpu_stencil::runtime::mean_std;
use qpu_stencil::statevector::{apply, gate_depth};
use qpu_stencil::{BranchValues, Circuit, Control, Field, Grid1D, KernelKind, NormWindow, StencilWeights, StreamKey};

fn simplex3() -> impl Strategy<Value = StencilWeights> {
    (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0)
        .prop_filter("nonzero", |(a, b, c)| a + b + c > 1e-9)
        .prop_map(|(a, b, c)| {
            let s = a + b + c;
            StencilWeights::three(a / s, b / s, c / s).unwrap()
        })
}

fn values3() -> impl Strategy<Value = BranchValues> {
    prop::collection::vec(0.0f64..=1.0, 3).prop_map(|v| BranchValues::new(v).unwrap())
}

#[derive(Debug, Clone)]
enum G {
    Ry(usize, f64),
    X(usize),
    Cry(Vec<(usize, bool)>, usize, f64),
}

fn gate(width: usize) -> impl Strategy<Value = G> {
    let q = 0..width;
    prop_oneof![
        (q.clone(), -7.0f64..7.0).prop_map(|(t, a)| G::Ry(t, a)),
        q.clone().prop_map(G::X),
        (prop::collection::vec((0..width, any::<bool>()), 1..3), q, -7.0f64..7.0)
            .prop_map(|(c, t, a)| G::Cry(c, t, a)),
    ]
}

fn build(width: usize, gates: &[G]) -> Circuit {
    let mut c = Circuit::new(width);
    for g in gates {
        c = match g {
            G::Ry(t, a) => c.ry(*t, *a),
            G::X(t) => c.x(*t),
            G::Cry(ctrl, t, a) => {
                let mut seen = std::collections::BTreeSet::new();
                let controls: Vec<Control> = ctrl
                    .iter()
                    .filter(|(q, _)| q != t && seen.insert(*q))
                    .map(|&(q, on)| if on { Control::on(q) } else { Control::off(q) })
                    .collect();
                if controls.is_empty() {
                    c.ry(*t, *a)
                } else {
                    c.cry(controls, *t, *a)
                }
            }
        };
    }
    c
}

fn random_circuit() -> impl Strategy<Value = Circuit> {
    (1usize..=6).prop_flat_map(|w| prop::collection::vec(gate(w), 0..=40).prop_map(move |g| build(w, &g)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn norm_is_preserved(c in random_circuit()) {
        let s = apply(&c).unwrap();
        prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negative_controls_match_x_sandwich(c in random_circuit()) {
        let a = apply(&c).unwrap();
        let b = apply(&c.expand_negative_controls()).unwrap();
        for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
            prop_assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn branching_probability_is_the_convex_sum(v in values3(), w in simplex3()) {
        prop_assert!((branching_exact(&v, &w).unwrap() - v.convex_sum(&w)).abs() < 1e-12);
    }

    #[test]
    fn shot_plan_conserves_total(w in simplex3(), m in 1u64..200_000) {
        let plan = allocate_shots(&w, m).unwrap();
        prop_assert_eq!(plan.per_branch.iter().sum::<u64>(), m);
        prop_assert_eq!(plan.total, m);
    }

    #[test]
    fn fused_branching_marginals_match(a in values3(), wa in simplex3(), b in values3(), wb in simplex3()) {
        let f = fuse(&[build_branching_circuit(&a, &wa).unwrap(), build_branching_circuit(&b, &wb).unwrap()]).unwrap();
        let s = apply(&f.circuit).unwrap();
        prop_assert!((f.block_probability(&s, 0, 0).unwrap() - branching_exact(&a, &wa).unwrap()).abs() < 1e-12);
        prop_assert!((f.block_probability(&s, 1, 0).unwrap() - branching_exact(&b, &wb).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn fused_encoders_form_a_product_state(us in prop::collection::vec(0.0f64..=1.0, 8)) {
        let f = fuse(&us.iter().map(|&u| bernoulli_encoder(u).unwrap()).collect::<Vec<_>>()).unwrap();
        let joint = apply(&f.circuit).unwrap().marginal(f.circuit.measured());
        for (outcome, p) in joint.iter().enumerate() {
            let product: f64 = us
                .iter()
                .enumerate()
                .map(|(k, &u)| if (outcome >> k) & 1 == 1 { u } else { 1.0 - u })
                .product();
            prop_assert!((p - product).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_sampled_step_equals_classical_heat(
        amps in prop::collection::vec(0.0f64..=1.0, 16),
        safety in 0.05f64..=1.0,
        nu in 0.1f64..2.0,
    ) {
        let grid = Grid1D::heat(16).unwrap();
        let field = Field::new(amps, 0.0, 0.0, NormWindow::unit());
        let heat = HeatParams::new(nu, safety * 0.5 * grid.dx * grid.dx / nu, &grid).unwrap();
        let c = classical_step(&grid, &field, &heat, None).unwrap();
        for kind in [KernelKind::Branching, KernelKind::Bernoulli] {
            let cfg = SampledStep { kind, budget: ShotBudget::Exact, window: WindowMode::Fixed, readout: Readout::ideal() };
            let q = quantum_step(&grid, &field, &heat, &cfg, 0, StreamKey::new(0), None).unwrap().0;
            for (a, b) in c.values.iter().zip(&q.values) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exact_sampled_step_equals_classical_burgers(
        amps in prop::collection::vec(-1.0f64..=1.0, 16),
        safety in 0.05f64..=1.0,
        nu in 0.0f64..0.05,
        stencil_window in any::<bool>(),
    ) {
        let grid = Grid1D::burgers(16).unwrap();
        let field = Field::new(amps, 0.0, 0.0, NormWindow::new(-1.0, 1.0).unwrap());
        let dt = safety / (1.0 / grid.dx + 2.0 * nu / (grid.dx * grid.dx));
        let p = BurgersParams::new(nu, dt, &grid).unwrap();
        let window = if stencil_window { WindowMode::Stencil } else { WindowMode::Fixed };
        let c = classical_step(&grid, &field, &p, None).unwrap();
        for kind in [KernelKind::Branching, KernelKind::Bernoulli] {
            let cfg = SampledStep { kind, budget: ShotBudget::Exact, window, readout: Readout::ideal() };
            let q = quantum_step(&grid, &field, &p, &cfg, 0, StreamKey::new(0), None).unwrap().0;
            for (a, b) in c.values.iter().zip(&q.values) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn burgers_weights_nonnegative_under_cfl(u in -1.0f64..=1.0, nu in 0.0f64..0.1, safety in 0.01f64..=1.0) {
        let grid = Grid1D::burgers(32).unwrap();
        let dt = safety / (1.0 / grid.dx + 2.0 * nu / (grid.dx * grid.dx));
        let p = BurgersParams::new(nu, dt, &grid).unwrap();
        let w = burgers_weights(0, u, &p).unwrap();
        prop_assert!(w.as_slice().iter().all(|&x| x >= 0.0));
        prop_assert!((w.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn heat_maximum_principle_and_boundaries(amps in prop::collection::vec(0.0f64..=1.0, 12), safety in 0.05f64..=1.0) {
        let grid = Grid1D::heat(12).unwrap();
        let mut field = Field::new(amps, 0.0, 0.0, NormWindow::unit());
        let (lo, hi) = field.min_max();
        let (lo, hi) = (lo.min(0.0), hi.max(0.0));
        let heat = HeatParams::new(1.0, safety * 0.5 * grid.dx * grid.dx, &grid).unwrap();
        for _ in 0..50 {
            field = classical_step(&grid, &field, &heat, None).unwrap();
            prop_assert!(field.values.iter().all(|&u| u >= lo - 1e-15 && u <= hi + 1e-15));
            prop_assert_eq!((field.ghost_lo, field.ghost_hi), (0.0, 0.0));
        }
    }

    #[test]
    fn sample_std_uses_n_minus_one(xs in prop::collection::vec(-10.0f64..10.0, 2..30)) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let (m, s) = mean_std(&xs);
        prop_assert!((m - mean).abs() < 1e-12);
        prop_assert!((s - var.sqrt()).abs() < 1e-10);
    }
}

#[test]
fn branching_circuit_depth_is_pinned() {
    let c = build_branching_circuit(
        &BranchValues::new(vec![0.2, 0.5, 0.9]).unwrap(),
        &StencilWeights::three(0.25, 0.5, 0.25).unwrap(),
    )
    .unwrap();
    // negative controls as single gates, then with explicit X sandwiches
    assert_eq!(gate_depth(&c), 5);
    let expanded = c.expand_negative_controls();
    assert_eq!(expanded.gates().len(), 13);
    assert_eq!(gate_depth(&expanded), 11);
    assert_eq!(gate_depth(&bernoulli_encoder(0.3).unwrap()), 1);
}

#[test]
fn stencil_trait_object_matches_params() {
    let grid = Grid1D::heat(8).unwrap();
    let heat = HeatParams::new(1.0, 0.25 * grid.dx * grid.dx, &grid).unwrap();
    let w = heat.weights(3, 0.4).unwrap();
    assert_eq!(w.as_slice(), &[0.25, 0.5, 0.25]);
}
