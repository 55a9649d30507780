use std::f64::consts::PI;

use qsrt_core::models::ProblemInstance;
use qsrt_core::spectral::{eigh_capped, evolve, overlap, ComplexState, HermitianOperator, C64};

#[test]
fn search_midpoint_gap_at_sixteen() {
    let inst = ProblemInstance::search(4, 1).unwrap();
    let a = inst.initial_model().unwrap().to_dense(16).unwrap();
    let b = inst.problem_model().unwrap().to_dense(16).unwrap();
    let d = a.linear_combination(0.5, &b, 0.5).unwrap().eigh().unwrap();
    assert!((d.gap() - 0.25).abs() < 1e-12);
}

#[test]
fn sigma_x_quarter_period_on_a_larger_register() {
    // c·σ_x ⊗ I₂ flips the probe of any register state
    let c = 0.3;
    let h = HermitianOperator::from_real_fn(4, |i, j| if i % 2 == j % 2 && i != j { c } else { 0.0 }).unwrap();
    let psi = ComplexState::from_real(&[0.6, 0.8, 0.0, 0.0]).unwrap();
    let out = evolve(&h, &psi, PI / (2.0 * c)).unwrap();
    let want = [0.0, 0.0, -0.6, -0.8];
    for (a, w) in out.amplitudes().iter().zip(want) {
        assert!((a - C64::new(0.0, w)).norm() < 1e-12);
    }
}

#[test]
fn complex_hermitian_matrix_roundtrip() {
    let h = HermitianOperator::from_rows(&[
        vec![C64::new(1.0, 0.0), C64::new(0.0, 2.0)],
        vec![C64::new(0.0, -2.0), C64::new(-1.0, 0.0)],
    ])
    .unwrap();
    assert!(!h.is_real());
    let d = h.eigh().unwrap();
    let r = 5f64.sqrt();
    assert!((d.eigenvalues()[0] + r).abs() < 1e-12 && (d.eigenvalues()[1] - r).abs() < 1e-12);
    assert!(d.reconstruct().unwrap().max_abs_diff(&h).unwrap() < 1e-12);
    let v = d.eigenvector(0);
    assert!(v.amplitudes()[0].im.abs() < 1e-15 && v.amplitudes()[0].re > 0.0);
}

#[test]
fn degenerate_eigenvectors_are_reproducible() {
    let h = HermitianOperator::projector(&ComplexState::uniform(6).unwrap(), -1.0).unwrap();
    let a = h.eigh().unwrap();
    let b = h.eigh().unwrap();
    for k in 0..6 {
        assert_eq!(a.eigenvector(k), b.eigenvector(k));
        let first = a.eigenvector(k).amplitudes().iter().copied().find(|z| z.norm() > 1e-10).unwrap();
        assert!(first.im.abs() < 1e-12 && first.re > 0.0);
    }
}

#[test]
fn overlap_bounds_hold() {
    let a = ComplexState::new(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
    let b = ComplexState::new(vec![C64::new(0.0, 1.0), C64::new(0.0, 0.0)]).unwrap();
    let o = overlap(&a, &b).unwrap();
    assert!((o - C64::new(0.0, 0.6)).norm() < 1e-15);
    assert!((overlap(&a, &a).unwrap().norm() - 1.0).abs() < 1e-12);
}

#[test]
fn dense_cap_is_configurable() {
    let h = HermitianOperator::zeros(10).unwrap();
    assert_eq!(eigh_capped(&h, 8).unwrap_err().name(), "DimensionCap");
    assert!(eigh_capped(&h, 10).is_ok());
}
