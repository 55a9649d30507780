use std::f64::consts::PI;

use qsrt_core::engine::{
    evolve_and_measure, excite, rabi_transition, refine_eigenvalue, run_multistep, run_step, seeded_rng,
    transcript, write_transcript, Chain, JointSystem, MultistepConfig, StepConfig, StepInput, SweepOrder,
};
use qsrt_core::models::{build_minfind, chain_ground_energy, dense_chain_member, overlap_adjacent, MarkedSetFamily};
use qsrt_core::spectral::{overlap, ComplexState, HermitianOperator, C64};

fn rotation(theta: f64) -> HermitianOperator {
    // ground state (cos θ, sin θ) at −1, orthogonal partner at 0
    let (c, s) = (theta.cos(), theta.sin());
    HermitianOperator::from_real_fn(2, |i, j| {
        let v = [c, s];
        -v[i] * v[j]
    })
    .unwrap()
}

#[test]
fn identical_registers_split_by_coupling() {
    let h = HermitianOperator::diagonal(&[-1.0, -0.2, 0.4]).unwrap();
    let c = 0.05;
    let joint = JointSystem::assemble(&h, &h, 1.0, 0.0, c, 64).unwrap();
    let got = joint.matrix().eigenvalues().unwrap();
    let mut want: Vec<f64> = [-1.0, -0.2, 0.4].iter().flat_map(|e| [e - c, e + c]).collect();
    want.sort_by(f64::total_cmp);
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn resonant_pair_splits_by_twice_the_overlap_coupling() {
    let theta = 0.4;
    let h_prev = rotation(0.0);
    let h_curr = rotation(theta);
    let (alpha, c) = (0.5, 1e-3);
    let omega = -1.0 + alpha;
    let joint = JointSystem::assemble(&h_prev, &h_curr, alpha, omega, c, 64).unwrap();
    let level = omega / 2.0 - alpha;
    let mut near: Vec<f64> = joint.matrix().eigenvalues().unwrap().into_iter().filter(|e| (e - level).abs() < 0.1).collect();
    near.sort_by(f64::total_cmp);
    assert_eq!(near.len(), 2);
    let d00 = theta.cos();
    assert!((near[1] - near[0] - 2.0 * c * d00).abs() < 10.0 * c * c);
}

#[test]
fn eigenbasis_form_has_overlap_couplings() {
    let h_prev = HermitianOperator::from_real_fn(3, |i, j| [[-1.0, 0.2, 0.0], [0.2, 0.1, 0.3], [0.0, 0.3, 0.5]][i][j]).unwrap();
    let h_curr = HermitianOperator::from_real_fn(3, |i, j| [[0.2, -0.4, 0.1], [-0.4, -0.8, 0.0], [0.1, 0.0, 0.3]][i][j]).unwrap();
    let (alpha, omega, c) = (1.3, 0.7, 0.02);
    let joint = JointSystem::assemble(&h_prev, &h_curr, alpha, omega, c, 64).unwrap();
    let prev = h_prev.eigh().unwrap();
    let curr = h_curr.eigh().unwrap();
    let n = 3;
    let basis = |k: usize| -> ComplexState {
        let v = if k < n { curr.eigenvector(k) } else { prev.eigenvector(k - n) };
        let mut amps = vec![C64::new(0.0, 0.0); 2 * n];
        let offset = if k < n { 0 } else { n };
        amps[offset..offset + n].copy_from_slice(v.amplitudes());
        ComplexState::new(amps).unwrap()
    };
    for a in 0..2 * n {
        let hb = joint.matrix().apply(&basis(a)).unwrap();
        for b in 0..2 * n {
            let got = overlap(&basis(b), &hb).unwrap();
            let want = match (b < n, a < n) {
                (true, true) if a == b => C64::new(-omega / 2.0 + curr.eigenvalues()[a], 0.0),
                (false, false) if a == b => C64::new(omega / 2.0 + alpha * prev.eigenvalues()[a - n], 0.0),
                (true, false) => overlap(&curr.eigenvector(b), &prev.eigenvector(a - n)).unwrap() * c,
                (false, true) => overlap(&prev.eigenvector(b - n), &curr.eigenvector(a)).unwrap() * c,
                _ => C64::new(0.0, 0.0),
            };
            assert!((got - want).norm() < 1e-10, "({b},{a})");
        }
    }
}

#[test]
fn full_rabi_angle_decays_with_certainty() {
    let h = HermitianOperator::diagonal(&[-1.0, 0.0]).unwrap();
    let c = 1e-3;
    let joint = JointSystem::assemble(&h, &h, 1.0, 0.0, c, 64).unwrap().dynamics().unwrap();
    let ground = ComplexState::basis(2, 0).unwrap();
    let readout = evolve_and_measure(&joint, &excite(&ground), PI / (2.0 * c), &mut seeded_rng(3)).unwrap();
    assert_eq!(readout.outcome, 0);
    assert!(readout.decay_probability > 1.0 - 1e-9);
    assert!(readout.register().fidelity(&ground).unwrap() > 1.0 - 1e-9);
}

#[test]
fn detuned_transition_matches_two_level_formula() {
    let h = HermitianOperator::diagonal(&[-1.0, 5.0]).unwrap();
    let c = 1e-3;
    let ground = ComplexState::basis(2, 0).unwrap();
    for detuning in [0.0, c, 2.0 * c, 5.0 * c] {
        let joint = JointSystem::assemble(&h, &h, 1.0, detuning, c, 64).unwrap().dynamics().unwrap();
        for t in [100.0, 400.0, 1000.0, 1600.0] {
            let p = joint.decay_probability(&excite(&ground), t).unwrap();
            assert!((p - rabi_transition(c, 1.0, detuning, t)).abs() < 1e-5, "δ = {detuning}, t = {t}");
        }
    }
}

fn dense_ground(h: &HermitianOperator) -> (ComplexState, f64) {
    let d = h.eigh().unwrap();
    (d.ground_state(), d.ground_energy())
}

#[test]
fn two_step_search_first_step_prepares_intermediate_ground_state() {
    let family = MarkedSetFamily::prefix(64, vec![16, 1]).unwrap();
    let h0 = dense_chain_member(&family, 0, 64).unwrap();
    let h1 = dense_chain_member(&family, 1, 64).unwrap();
    let (g0, e0) = dense_ground(&h0);
    let (g1, e1) = dense_ground(&h1);
    let alpha = 1.0 - e1;
    let d0 = overlap_adjacent(&family, 1).unwrap();
    let c = 5e-3;
    let input = StepInput {
        h_prev: &h0,
        h_curr: &h1,
        prev_state: &g0,
        prev_energy: e0,
        alpha,
    };
    let half = 2.0 * c * d0;
    let mut cfg = StepConfig::new(1.0 - half, 1.0 + half, c, d0);
    cfg.sweep = SweepOrder::CenterOut;
    let out = run_step(&input, &cfg, &mut seeded_rng(11)).unwrap();
    assert_eq!(out.resonant_frequency, 1.0);
    assert!((out.eigenvalue_estimate - e1).abs() < 1e-12);
    let fidelity = out.prepared_state.fidelity(&g1).unwrap();
    assert!(fidelity > 1.0 - 10.0 * c * c, "{fidelity}");
}

#[test]
fn minfind_six_qubit_chain_reaches_solution() {
    let inst = build_minfind(6).unwrap();
    let chain = Chain::from_family(&inst.family, 0.5f64.sqrt()).unwrap();
    let cfg = MultistepConfig {
        coupling: 1e-4,
        ..Default::default()
    };
    let out = run_multistep(&chain, &cfg, &mut seeded_rng(42)).unwrap();
    assert_eq!(out.steps.len(), 5);
    let c = cfg.coupling;
    let solution_weight = out.final_state.amplitudes()[0].norm_sqr();
    assert!(solution_weight >= 1.0 - 20.0 * c * c, "{solution_weight}");
    for (j, energy) in out.energy_trace.iter().enumerate() {
        let dense = dense_chain_member(&inst.family, j + 1, 64).unwrap().eigenvalues().unwrap()[0];
        assert!((energy - dense).abs() < 1e-3);
        assert!((dense - chain_ground_energy(&inst.family, j + 1).unwrap()).abs() < 1e-10);
    }
}

#[test]
fn minfind_ten_qubit_iterations_track_predicted_runtime() {
    let inst = build_minfind(10).unwrap();
    let d_hat = 0.5f64.sqrt();
    let chain = Chain::from_family(&inst.family, d_hat).unwrap();
    let cfg = MultistepConfig {
        coupling: 1e-6,
        ..Default::default()
    };
    let out = run_multistep(&chain, &cfg, &mut seeded_rng(42)).unwrap();
    assert_eq!(out.steps.len(), 9);
    let predicted: f64 = (1..=9)
        .map(|l| {
            let d = overlap_adjacent(&inst.family, l).unwrap();
            1.0 / (PI / 2.0 * d / d_hat).sin().powi(2)
        })
        .sum();
    assert!((out.total_iterations as f64) <= 3.0 * predicted, "{} vs {predicted}", out.total_iterations);
}

#[test]
fn chain_of_one_equals_single_step() {
    let family = MarkedSetFamily::prefix(32, vec![4]).unwrap();
    let chain = Chain::from_family(&family, 1.0 / 8f64.sqrt()).unwrap();
    let cfg = MultistepConfig::default();
    let multi = run_multistep(&chain, &cfg, &mut seeded_rng(9)).unwrap();
    let input = StepInput {
        h_prev: &chain.hamiltonians[0],
        h_curr: &chain.hamiltonians[1],
        prev_state: &chain.initial_state,
        prev_energy: chain.initial_energy,
        alpha: chain.steps[0].alpha,
    };
    let single = run_step(&input, &chain.step_config(1, &cfg), &mut seeded_rng(9)).unwrap();
    assert_eq!(multi.steps[0].outcome, single);
}

#[test]
fn reuse_keeps_previous_ground_state() {
    let family = MarkedSetFamily::prefix(8, vec![2]).unwrap();
    let h_prev = dense_chain_member(&family, 0, 64).unwrap();
    let h_curr = dense_chain_member(&family, 1, 64).unwrap();
    let (g_prev, e_prev) = dense_ground(&h_prev);
    let (_, e_curr) = dense_ground(&h_curr);
    let d0 = overlap_adjacent(&family, 1).unwrap();
    let alpha = 2.0;
    for c in [1e-2, 1e-3] {
        let omega = e_curr - alpha * e_prev;
        let joint = JointSystem::assemble(&h_prev, &h_curr, alpha, omega, c, 64).unwrap().dynamics().unwrap();
        // a half Rabi angle leaves both outcomes likely
        let t = PI / (4.0 * c * d0);
        let mut rng = seeded_rng(1);
        let mut seen = 0;
        for _ in 0..20 {
            let readout = evolve_and_measure(&joint, &excite(&g_prev), t, &mut rng).unwrap();
            if readout.outcome == 1 {
                seen += 1;
                let fidelity = readout.register().fidelity(&g_prev).unwrap();
                assert!(fidelity > 1.0 - 10.0 * c * c, "c = {c}: {fidelity}");
            }
        }
        assert!(seen > 0);
    }
}

#[test]
fn mean_iterations_follow_inverse_decay_probability() {
    let h = HermitianOperator::diagonal(&[-1.0, 0.0]).unwrap();
    let ground = ComplexState::basis(2, 0).unwrap();
    let c = 1e-2;
    let input = StepInput {
        h_prev: &h,
        h_curr: &h,
        prev_state: &ground,
        prev_energy: -1.0,
        alpha: 1.0,
    };
    let mut cfg = StepConfig::new(0.0, 1.0, c, 1.0);
    cfg.grid_points = Some(2);
    cfg.evolution_time = Some(PI / (4.0 * c));
    cfg.max_iters_per_frequency = Some(1000);
    let p0 = (PI / 4.0).sin().powi(2);
    let runs = 200;
    let total: u64 = (0..runs)
        .map(|seed| run_step(&input, &cfg, &mut seeded_rng(seed)).unwrap().iteration_count)
        .sum();
    let mean = total as f64 / runs as f64;
    assert!((mean * p0 - 1.0).abs() < 0.2, "mean {mean}");
}

#[test]
fn same_seed_same_transcript() {
    let inst = build_minfind(6).unwrap();
    let chain = Chain::from_family(&inst.family, 0.5f64.sqrt()).unwrap();
    let cfg = MultistepConfig {
        coupling: 1e-4,
        ..Default::default()
    };
    let render = |seed: u64| {
        let out = run_multistep(&chain, &cfg, &mut seeded_rng(seed)).unwrap();
        let mut buf = Vec::new();
        write_transcript(&transcript(&out.steps), &mut buf).unwrap();
        buf
    };
    let first = render(42);
    assert_eq!(first, render(42));
    let text = String::from_utf8(first).unwrap();
    let last = text.lines().last().unwrap();
    let value: serde_json::Value = serde_json::from_str(last).unwrap();
    for key in ["step", "omegaStar", "E0", "p0", "iterations"] {
        assert!(value.get(key).is_some(), "{key}");
    }
}

fn scalar(e: f64) -> HermitianOperator {
    HermitianOperator::diagonal(&[e]).unwrap()
}

#[test]
fn refinement_pins_two_level_resonance() {
    let (e_prev, e_curr, alpha) = (-0.8, -0.3, 0.5);
    let h_prev = scalar(e_prev);
    let h_curr = scalar(e_curr);
    let state = ComplexState::basis(1, 0).unwrap();
    let input = StepInput {
        h_prev: &h_prev,
        h_curr: &h_curr,
        prev_state: &state,
        // a stale previous energy: the backward transition corrects for it
        prev_energy: e_prev + 4e-3,
        alpha,
    };
    let true_omega = e_curr - alpha * e_prev;
    let c = 1e-2;
    let mut cfg = StepConfig::new(true_omega - 0.05, true_omega + 0.05, c, 1.0);
    cfg.target_accuracy = 1e-3;
    let grid_omega = cfg.grid().into_iter().min_by(|a, b| (a - true_omega).abs().total_cmp(&(b - true_omega).abs())).unwrap();
    let refined = refine_eigenvalue(&input, grid_omega + 0.3 * cfg.spacing(), &cfg, &mut seeded_rng(8)).unwrap();
    assert!((refined.energy - e_curr).abs() < 1e-3, "{refined:?}");
    assert!(refined.backward_peak.is_some());
    assert!(refined.samples > 0);
}

#[test]
fn coarse_accuracy_returns_grid_value() {
    let h_prev = scalar(-0.8);
    let h_curr = scalar(-0.3);
    let state = ComplexState::basis(1, 0).unwrap();
    let input = StepInput {
        h_prev: &h_prev,
        h_curr: &h_curr,
        prev_state: &state,
        prev_energy: -0.8,
        alpha: 0.5,
    };
    let mut cfg = StepConfig::new(0.0, 0.2, 1e-2, 1.0);
    cfg.target_accuracy = 0.5;
    let refined = refine_eigenvalue(&input, 0.1, &cfg, &mut seeded_rng(0)).unwrap();
    assert_eq!(refined.samples, 0);
    assert_eq!(refined.energy, 0.1 + 0.5 * -0.8);
}

#[test]
fn orthogonal_ground_states_never_resonate() {
    let h_prev = HermitianOperator::diagonal(&[-1.0, 0.0]).unwrap();
    let h_curr = HermitianOperator::diagonal(&[0.0, -1.0]).unwrap();
    let state = ComplexState::basis(2, 0).unwrap();
    let input = StepInput {
        h_prev: &h_prev,
        h_curr: &h_curr,
        prev_state: &state,
        prev_energy: -1.0,
        alpha: 0.5,
    };
    let omega = -1.0 + 0.5;
    let mut cfg = StepConfig::new(omega - 0.02, omega + 0.02, 1e-2, 1.0);
    cfg.target_accuracy = 1e-3;
    let err = refine_eigenvalue(&input, omega, &cfg, &mut seeded_rng(0)).unwrap_err();
    assert_eq!(err.name(), "BudgetExhausted");
}

#[test]
fn suggested_coupling_tracks_narrowest_gap() {
    let inst = build_minfind(10).unwrap();
    let chain = Chain::from_family(&inst.family, 0.5f64.sqrt()).unwrap();
    let c = chain.suggested_coupling(0.1).unwrap();
    // the narrowest intermediate gap is about (3/1024)²
    assert!(c > 1e-7 && c < 3e-6, "{c}");
    let overlaps = chain.overlaps().unwrap();
    for (l, d) in overlaps.iter().enumerate() {
        assert!((d - overlap_adjacent(&inst.family, l + 1).unwrap()).abs() < 1e-10);
    }
}
