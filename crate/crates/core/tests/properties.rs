use approx::assert_relative_eq;
use proptest::prelude::*;

use hsf_core::frame::{completeness, frame_bounds, verdict_from_trends, Verdict};
use hsf_core::linalg::{CMatrix, CVector, C64};
use hsf_core::scale::{ChainOperator, ScaleSpec};
use hsf_core::sequence::{random_bessel, transform_sequence, SequenceFamily};

fn weights(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1.0f64..1e3, 1..max_len)
}

fn vector(n: usize) -> impl Strategy<Value = CVector> {
    prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), n).prop_map(|v| {
        CVector::from_iterator(v.len(), v.into_iter().map(|(re, im)| C64::new(re, im)))
    })
}

fn matrix(n: usize) -> impl Strategy<Value = CMatrix> {
    prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), n * n).prop_map(move |v| {
        CMatrix::from_iterator(n, n, v.into_iter().map(|(re, im)| C64::new(re, im)))
    })
}

fn scale_and_vectors() -> impl Strategy<Value = (ScaleSpec, CVector, CVector)> {
    weights(10).prop_flat_map(|w| {
        let n = w.len();
        (Just(ScaleSpec::explicit(w).unwrap()), vector(n), vector(n))
    })
}

proptest! {
    #[test]
    fn norms_increase_with_the_index((s, x, _) in scale_and_vectors(), r in -4i32..=4, d in 0i32..=4) {
        let p = r + d;
        prop_assert!(s.norm(r, &x).unwrap() <= s.norm(p, &x).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn pivot_pairing_is_bounded((s, x, y) in scale_and_vectors(), p in -4i32..=4) {
        let pairing = s.inner_product(0, &x, &y).unwrap().norm();
        let bound = s.norm(p, &x).unwrap() * s.norm(-p, &y).unwrap();
        prop_assert!(pairing <= bound * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn berezanskii_maps_are_unitary((s, x, _) in scale_and_vectors(), p in -4i32..=4, r in -4i32..=4) {
        let y = s.berezanskii_map(p, r, &x).unwrap();
        assert_relative_eq!(s.norm(r, &y).unwrap(), s.norm(p, &x).unwrap(), max_relative = 1e-12);
        let back = s.berezanskii_map(r, p, &y).unwrap();
        prop_assert!((&back - &x).norm() <= 1e-12 * x.norm().max(1e-300));
    }

    #[test]
    fn inclusion_adjoint_identity((s, f, x) in scale_and_vectors(), r in -3i32..=3, d in 0i32..=3) {
        let p = r + d;
        let lhs = s.inner_product(r, &f, &x).unwrap();
        let rhs = s.inner_product(p, &s.inclusion_adjoint(r, p, &f).unwrap(), &x).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm().max(rhs.norm()).max(1e-12));
        let inv = s.inverse_inclusion_adjoint(r, p, &s.inclusion_adjoint(r, p, &f).unwrap()).unwrap();
        prop_assert!((&inv - &f).norm() <= 1e-12 * f.norm().max(1e-300));
    }

    #[test]
    fn hilbert_adjoint_identity(
        (s, x, y) in weights(7).prop_flat_map(|w| {
            let n = w.len();
            (Just(ScaleSpec::explicit(w).unwrap()), vector(n), vector(n))
        }),
        p in -2i32..=2,
        q in -2i32..=2,
        seed in any::<u64>(),
    ) {
        let n = s.n();
        let m = CMatrix::from_fn(n, n, |i, j| {
            let h = seed.wrapping_mul(31).wrapping_add((i * n + j) as u64);
            C64::new((h % 13) as f64 - 6.0, (h % 7) as f64 - 3.0)
        });
        let t = ChainOperator::new(m, p, q).unwrap();
        let t_adj = s.hilbert_adjoint(&t).unwrap();
        let lhs = s.inner_product(q, &t.apply(&x), &y).unwrap();
        let rhs = s.inner_product(p, &x, &t_adj.apply(&y)).unwrap();
        let scale = s.norm(q, &t.apply(&x)).unwrap() * s.norm(q, &y).unwrap() + s.norm(p, &x).unwrap() * s.norm(p, &t_adj.apply(&y)).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-10 * scale.max(1e-300));
    }

    #[test]
    fn pivot_adjoint_is_an_involution(m in matrix(5), w in prop::collection::vec(1.0f64..50.0, 5), p in -3i32..=3, q in -3i32..=3) {
        let s = ScaleSpec::explicit(w).unwrap();
        let t = ChainOperator::new(m, p, q).unwrap();
        let back = s.pivot_adjoint(&s.pivot_adjoint(&t).unwrap()).unwrap();
        prop_assert_eq!((back.source, back.target), (t.source, t.target));
        prop_assert!((&back.matrix - &t.matrix).norm() <= 1e-10 * t.matrix.norm().max(1e-300));
    }

    #[test]
    fn scale_json_round_trip_is_bit_exact(w in prop::collection::vec(1.0f64..1e19, 1..20)) {
        let s = ScaleSpec::explicit(w).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let back: ScaleSpec = serde_json::from_str(&text).unwrap();
        prop_assert!(back.weights().iter().zip(s.weights()).all(|(a, b)| a.to_bits() == b.to_bits()));
        prop_assert_eq!(back, s);
    }

    #[test]
    fn family_json_round_trip(seed in any::<u64>(), count in 1usize..8, m in -2i32..=2) {
        let s = ScaleSpec::explicit(vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let fam = random_bessel(&s, m, count, seed).unwrap();
        let back: SequenceFamily = serde_json::from_str(&serde_json::to_string(&fam).unwrap()).unwrap();
        prop_assert_eq!(back, fam);
    }

    #[test]
    fn bounds_are_monotone_in_the_index(seed in any::<u64>(), count in 2usize..14, r in -3i32..=2) {
        let s = ScaleSpec::explicit((1..=8).map(|j| j as f64).collect()).unwrap();
        let psi = random_bessel(&s, 0, count, seed).unwrap();
        let lo = frame_bounds(&s, &psi, r).unwrap();
        let hi = frame_bounds(&s, &psi, r + 1).unwrap();
        prop_assert!(lo.upper <= hi.upper * (1.0 + 1e-12));
        prop_assert!(lo.lower <= hi.lower + 1e-12 * hi.upper);
        prop_assert_eq!(completeness(&s, &psi, r).unwrap().complete, count >= 8);
    }

    #[test]
    fn transforms_compose(seed in any::<u64>(), p in -3i32..=3, r in -3i32..=3, t in -3i32..=3) {
        let s = ScaleSpec::explicit(vec![1.0, 1.5, 4.0, 9.0]).unwrap();
        let psi = random_bessel(&s, p, 6, seed).unwrap();
        let two_steps = transform_sequence(&s, &transform_sequence(&s, &psi, p, r).unwrap(), r, t).unwrap();
        let direct = transform_sequence(&s, &psi, p, t).unwrap();
        prop_assert!((&two_steps.vectors - &direct.vectors).norm() <= 1e-12 * direct.vectors.norm());
        let a = frame_bounds(&s, &psi, p).unwrap();
        let b = frame_bounds(&s, &direct, t).unwrap();
        assert_relative_eq!(a.upper, b.upper, max_relative = 1e-10);
    }

    #[test]
    fn incomplete_families_are_never_frames(lower in prop::option::of(-3.0f64..3.0), upper in -3.0f64..3.0) {
        let v = verdict_from_trends(lower, upper, false);
        prop_assert!(!matches!(v, Verdict::Frame | Verdict::LowerSemiFrame | Verdict::UpperSemiFrame));
    }
}
