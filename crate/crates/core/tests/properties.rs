use proptest::prelude::*;

use qsrt_core::adiabatic::golden_section;
use qsrt_core::models::{
    build_intermediate, intermediate_splitting, IntermediateSpectrum, Level, MarkedSetFamily, ReducedModel,
};
use qsrt_core::spectral::{evolve, overlap, ComplexState, HermitianOperator, C64};

fn hermitian(max_dim: usize) -> impl Strategy<Value = HermitianOperator> {
    (1..=max_dim).prop_flat_map(|n| {
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n * n).prop_map(move |raw| {
            HermitianOperator::from_fn(n, |i, j| {
                let a = C64::new(raw[i * n + j].0, raw[i * n + j].1);
                let b = C64::new(raw[j * n + i].0, raw[j * n + i].1);
                (a + b.conj()) * 0.5
            })
            .unwrap()
        })
    })
}

fn with_state(max_dim: usize) -> impl Strategy<Value = (HermitianOperator, ComplexState)> {
    hermitian(max_dim).prop_flat_map(|h| {
        let n = h.dim();
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n).prop_filter_map("zero vector", move |raw| {
            let amps = raw.into_iter().map(|(re, im)| C64::new(re, im)).collect();
            ComplexState::new(amps).ok()?.normalized().ok().map(|psi| (h.clone(), psi))
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn evolution_is_unitary((h, psi) in with_state(32)) {
        for t in [0.1, 1.0, 10.0] {
            let out = evolve(&h, &psi, t).unwrap();
            prop_assert!((out.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn evolution_composes((h, psi) in with_state(24), t1 in 0.0..5.0f64, t2 in 0.0..5.0f64) {
        let d = h.eigh().unwrap();
        let two = d.evolve(&d.evolve(&psi, t1).unwrap(), t2).unwrap();
        let once = d.evolve(&psi, t1 + t2).unwrap();
        for (a, b) in two.amplitudes().iter().zip(once.amplitudes()) {
            prop_assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn energy_is_conserved((h, psi) in with_state(24), t in 0.0..20.0f64) {
        let e0 = h.expectation(&psi).unwrap();
        let e1 = h.expectation(&evolve(&h, &psi, t).unwrap()).unwrap();
        prop_assert!((e0 - e1).abs() < 1e-9);
    }

    #[test]
    fn decomposition_invariants(h in hermitian(40)) {
        let d = h.eigh().unwrap();
        let n = h.dim();
        prop_assert!(d.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
        for k in 0..n {
            let v = d.eigenvector(k);
            let hv = h.apply(&v).unwrap();
            let residual: f64 = hv
                .amplitudes()
                .iter()
                .zip(v.amplitudes())
                .map(|(a, b)| (a - b * d.eigenvalues()[k]).norm_sqr())
                .sum::<f64>()
                .sqrt();
            prop_assert!(residual < 1e-9);
            for j in 0..n {
                let o = overlap(&d.eigenvector(j), &v).unwrap();
                let want = if j == k { 1.0 } else { 0.0 };
                prop_assert!((o - C64::new(want, 0.0)).norm() < 1e-10);
            }
        }
        prop_assert!(d.reconstruct().unwrap().max_abs_diff(&h).unwrap() < 1e-9);
    }

    #[test]
    fn reduction_is_sound(
        raw in prop::collection::vec((-3i32..4, 1u64..40), 1..7),
        rank_one in -2.0..1.0f64,
    ) {
        let levels: Vec<Level> = raw.iter().map(|&(v, d)| Level::new(v as f64 * 0.5, d)).collect();
        let model = ReducedModel::new(levels, rank_one).unwrap();
        prop_assume!(model.universe() <= 256);
        let dense = model.to_dense(256).unwrap().eigenvalues().unwrap();
        let reduced = model.reduce().expand().unwrap();
        prop_assert_eq!(dense.len(), reduced.len());
        for (a, b) in dense.iter().zip(&reduced) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn intermediate_matches_its_closed_form(n in 4u64..=512, frac in 0.01..0.99f64) {
        let size = ((n as f64 * frac) as u64).clamp(1, n - 1);
        let family = MarkedSetFamily::prefix(n, vec![size]).unwrap();
        let model = build_intermediate(&family, 1).unwrap();
        let dense = model.to_dense(512).unwrap().eigenvalues().unwrap();
        let spec = IntermediateSpectrum::new(size as f64 / n as f64).unwrap();
        prop_assert!((dense[0] - spec.lower).abs() < 1e-10);
        prop_assert!(dense.iter().any(|e| (e - spec.upper).abs() < 1e-10));
        let degenerate = dense.iter().filter(|e| (*e - spec.degenerate).abs() < 1e-10).count() as u64;
        prop_assert!(degenerate >= size - 1);
    }

    #[test]
    fn prefix_families_nest(n in 8u64..=4096, cuts in prop::collection::vec(0.05..0.95f64, 1..6)) {
        let mut sizes: Vec<u64> = Vec::new();
        let mut current = n;
        for c in cuts {
            let next = ((current as f64) * c) as u64;
            if next == 0 || next >= current {
                break;
            }
            sizes.push(next);
            current = next;
        }
        prop_assume!(!sizes.is_empty());
        let family = MarkedSetFamily::prefix(n, sizes).unwrap();
        prop_assert!(family.verify().is_ok());
    }
}

#[test]
fn splitting_minimum_at_one_third() {
    let (x, value) = golden_section(intermediate_splitting, 0.0, 1.0, 1e-12);
    assert!((x - 1.0 / 3.0).abs() < 1e-8, "{x}");
    assert!((value - 11f64.sqrt() / (3.0 * 3f64.sqrt())).abs() < 1e-15);
}
