use cmclab::holonomy::{bolza_generators, coboundary_cocycle, cohomology_basis, evaluate_word, extend_cocycle, HolonomyRep};
use cmclab::lorentz::{make_boost, verify_lorentz, MinkVector};
use cmclab::models::{riccati_integrate, riccati_propagate, RiccatiState};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn mink(v: &[f64]) -> MinkVector {
    MinkVector::new(v.to_vec()).unwrap()
}

fn word() -> impl Strategy<Value = Vec<i32>> {
    proptest::collection::vec((1..=8i32, any::<bool>()).prop_map(|(k, inv)| if inv { -k } else { k }), 0..6)
}

/// Symmetric matrix with the given eigenvalues in a random orthonormal frame.
fn with_spectrum(eig: &[f64], seed: &[f64]) -> DMatrix<f64> {
    let m = eig.len();
    let q = DMatrix::from_column_slice(m, m, &seed[..m * m]).qr().q();
    let k = &q * DMatrix::from_diagonal(&DVector::from_column_slice(eig)) * q.transpose();
    (&k + k.transpose()) * 0.5
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn boosts_preserve_the_form(
        dir in proptest::collection::vec(-1.0..1.0f64, 3),
        rapidity in -3.0..3.0f64,
        u in proptest::collection::vec(-2.0..2.0f64, 4),
        v in proptest::collection::vec(-2.0..2.0f64, 4),
    ) {
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-2);
        let dir: Vec<f64> = dir.iter().map(|x| x / norm).collect();
        let b = make_boost(&dir, rapidity).unwrap();
        let scale = (2.0 * rapidity.abs()).exp() * 16.0;
        prop_assert!(verify_lorentz(&b, 1e-13 * scale));
        prop_assert!(b.is_orthochronous());
        let (u, v) = (mink(&u), mink(&v));
        let before = u.inner(&v).unwrap();
        let after = b.apply(&u).unwrap().inner(&b.apply(&v).unwrap()).unwrap();
        prop_assert!((before - after).abs() <= 1e-12 * scale, "{before} vs {after}");
        let id = b.compose(&b.inverse()).unwrap();
        prop_assert!((id.entries() - DMatrix::identity(4, 4)).amax() < 1e-12 * scale);
    }

    #[test]
    fn coboundaries_extend_in_closed_form(w in word(), b in proptest::collection::vec(-1.0..1.0f64, 3)) {
        let p = bolza_generators();
        let b = mink(&b);
        let rep = HolonomyRep::new(p.clone(), coboundary_cocycle(&p, &b).unwrap()).unwrap();
        let t = extend_cocycle(&rep, &w).unwrap();
        let fw = evaluate_word(&p, &w).unwrap();
        let exact = b.sub(&fw.apply(&b).unwrap()).unwrap();
        let scale = 1.0 + fw.entries().amax();
        prop_assert!(t.sub(&exact).unwrap().max_abs() < 1e-10 * scale);
    }

    #[test]
    fn cocycle_rule_on_concatenations(a in word(), b in word(), k in 0usize..6) {
        let p = bolza_generators();
        let basis = cohomology_basis(&p).unwrap();
        let rep = HolonomyRep::new(p.clone(), basis[k % basis.len()].clone()).unwrap();
        let ab: Vec<i32> = a.iter().chain(&b).copied().collect();
        let lhs = extend_cocycle(&rep, &ab).unwrap();
        let fa = evaluate_word(&p, &a).unwrap();
        let rhs = extend_cocycle(&rep, &a).unwrap().add(&fa.apply(&extend_cocycle(&rep, &b).unwrap()).unwrap()).unwrap();
        let scale = 1.0 + lhs.max_abs() + fa.entries().amax() * (1.0 + rhs.max_abs());
        prop_assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-10 * scale);
    }

    #[test]
    fn riccati_eigenvalues_follow_the_scalar_law(
        eig in proptest::collection::vec(-2.0..-0.2f64, 3),
        seed in proptest::collection::vec(-1.0..1.0f64, 9),
        frac in 0.0..0.9f64,
    ) {
        let k0 = with_spectrum(&eig, &seed);
        prop_assume!(k0.clone().symmetric_eigen().eigenvalues.iter().all(|x| *x < -0.1));
        let state = RiccatiState::new(k0.clone(), 0.0).unwrap();
        let (lo, _) = state.focal_window();
        let t = frac * lo;
        let kt = riccati_propagate(&state, t).unwrap();
        let mut got: Vec<f64> = kt.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        got.sort_by(f64::total_cmp);
        let mut want: Vec<f64> = eig.iter().map(|k| k / (1.0 - k * t)).collect();
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() < 1e-10 * w.abs().max(1.0), "{g} vs {w}");
        }
        let rk = riccati_integrate(&k0, t, 400);
        prop_assert!((&rk - &kt).amax() < 1e-8 * kt.amax().max(1.0));
    }

    #[test]
    fn riccati_semigroup(
        eig in proptest::collection::vec(-2.0..-0.2f64, 2),
        seed in proptest::collection::vec(-1.0..1.0f64, 4),
        s in 0.0..0.4f64,
        t in 0.0..0.4f64,
    ) {
        let k0 = with_spectrum(&eig, &seed);
        let state = RiccatiState::new(k0, 0.0).unwrap();
        let (lo, _) = state.focal_window();
        let (s, t) = (s * lo, t * lo);
        let direct = riccati_propagate(&state, s + t).unwrap();
        let mid = RiccatiState::new(riccati_propagate(&state, s).unwrap(), 0.0).unwrap();
        let two = riccati_propagate(&mid, t).unwrap();
        prop_assert!((&direct - &two).amax() < 1e-10 * direct.amax().max(1.0));
    }
}
