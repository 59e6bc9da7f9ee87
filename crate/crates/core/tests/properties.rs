use proptest::prelude::*;

use shadowtomo::linalg::{tensor_product, trace_distance, validate, ObjectKind};
use shadowtomo::quantum::{accept_prob, apply_effect, binomial_tail, Branch, Direction, ThresholdEffect};
use shadowtomo::random;
use shadowtomo::rng::from_seed;
use shadowtomo::shadow::{derive_params, postselect_hypothesis, postselection_effect, Hypothesis, Overrides, Sign};
use shadowtomo::{DensityMatrix, DimCap, Effect, HermMatrix};

fn herm(seed: u64, d: usize) -> HermMatrix {
    random::hermitian(&mut from_seed(seed), d)
}

fn state(seed: u64, d: usize) -> DensityMatrix {
    random::density_matrix(&mut from_seed(seed), d)
}

fn effect(seed: u64, d: usize) -> Effect {
    random::effect(&mut from_seed(seed), d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigen_reconstructs(seed in any::<u64>(), d in 1usize..=32) {
        let h = herm(seed, d);
        let s = h.eigen();
        prop_assert!(s.reconstruct().max_abs_diff(&h) < 1e-8);
        prop_assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        let v = &s.eigenvectors;
        let gram = v.adjoint() * v;
        for i in 0..d {
            for j in 0..d {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((gram[(i, j)].re - want).abs() < 1e-8 && gram[(i, j)].im.abs() < 1e-8);
            }
        }
    }

    #[test]
    fn trace_distance_is_a_metric(a in any::<u64>(), b in any::<u64>(), c in any::<u64>(), d in 2usize..=6) {
        let (x, y, z) = (state(a, d), state(b, d), state(c, d));
        let xy = trace_distance(x.as_herm(), y.as_herm()).unwrap();
        let yx = trace_distance(y.as_herm(), x.as_herm()).unwrap();
        prop_assert_eq!(xy.to_bits(), yx.to_bits());
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&xy));
        prop_assert!(trace_distance(x.as_herm(), x.as_herm()).unwrap() < 1e-12);
        let xz = trace_distance(x.as_herm(), z.as_herm()).unwrap();
        let zy = trace_distance(z.as_herm(), y.as_herm()).unwrap();
        prop_assert!(xy <= xz + zy + 1e-10);
    }

    #[test]
    fn tensor_is_associative(a in any::<u64>(), b in any::<u64>(), c in any::<u64>(), da in 1usize..=3, db in 1usize..=3, dc in 1usize..=3) {
        let cap = DimCap::default();
        let (x, y, z) = (herm(a, da), herm(b, db), herm(c, dc));
        let left = tensor_product(&tensor_product(&x, &y, cap).unwrap(), &z, cap).unwrap();
        let right = tensor_product(&x, &tensor_product(&y, &z, cap).unwrap(), cap).unwrap();
        prop_assert!(left.max_abs_diff(&right) < 1e-12);
        let tr = tensor_product(&x, &y, cap).unwrap().trace();
        prop_assert!((tr - x.trace() * y.trace()).abs() < 1e-9);
    }

    #[test]
    fn branches_are_valid_states(a in any::<u64>(), b in any::<u64>(), d in 2usize..=6) {
        let rho = state(a, d);
        let e = effect(b, d);
        let p = accept_prob(&e, &rho).unwrap();
        let q = accept_prob(&e.complement(), &rho).unwrap();
        prop_assert!((p + q - 1.0).abs() < 1e-10);
        for branch in [Branch::Accept, Branch::Reject] {
            if let Ok(out) = apply_effect(&e, &rho, branch) {
                prop_assert!(validate(out.post_state.as_herm(), ObjectKind::State).is_ok());
            }
        }
    }

    #[test]
    fn gentle_measurement_bound(a in any::<u64>(), b in any::<u64>(), d in 2usize..=8, k in 2i32..=6) {
        let eps = 10f64.powi(-k);
        let mut rng = from_seed(b);
        let rho = state(a, d);
        let e = random::high_acceptance_effect(&mut rng, &rho, eps);
        prop_assert!(accept_prob(&e, &rho).unwrap() >= 1.0 - eps - 1e-12);
        let post = apply_effect(&e, &rho, Branch::Accept).unwrap().post_state;
        prop_assert!(trace_distance(post.as_herm(), rho.as_herm()).unwrap() <= 2.0 * eps.sqrt());
    }

    #[test]
    fn threshold_complement_sums_to_one(a in any::<u64>(), b in any::<u64>(), n in 1usize..=5, t in 0usize..=5) {
        let t = t.min(n);
        let te = ThresholdEffect::new(effect(b, 2), n, t, Direction::AtLeast).unwrap();
        let rho = state(a, 2);
        let p = te.expectation(&rho.tensor_power(n, DimCap::default()).unwrap()).unwrap();
        match te.complement() {
            Some(c) => {
                let q = c.expectation(&rho.tensor_power(n, DimCap::default()).unwrap()).unwrap();
                prop_assert!((p + q - 1.0).abs() < 1e-9);
            }
            None => prop_assert!((p - 1.0).abs() < 1e-9),
        }
    }

    #[test]
    fn threshold_acceptance_monotone(p in 0.0f64..=1.0, n in 1usize..=12) {
        let tails: Vec<f64> = (0..=n).map(|t| binomial_tail(n, p, t, Direction::AtLeast)).collect();
        prop_assert!((tails[0] - 1.0).abs() < 1e-12);
        prop_assert!(tails.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn materialized_threshold_matches_binomial(a in any::<u64>(), b in any::<u64>(), n in 1usize..=5, t in 0usize..=5) {
        let t = t.min(n);
        let e = effect(b, 2);
        let rho = state(a, 2);
        let te = ThresholdEffect::new(e.clone(), n, t, Direction::AtLeast).unwrap();
        let big = te.materialize(DimCap::default()).unwrap();
        let prod = rho.tensor_power(n, DimCap::default()).unwrap();
        let exact = accept_prob(&big, &prod).unwrap();
        let p = accept_prob(&e, &rho).unwrap();
        prop_assert!((exact - binomial_tail(n, p, t, Direction::AtLeast)).abs() < 1e-8);
    }

    #[test]
    fn initial_hypothesis_is_consistent(d in 2usize..=3, q in 1usize..=4) {
        let h = Hypothesis::initial(d, q, DimCap::default()).unwrap();
        prop_assert!(validate(h.amplified().as_herm(), ObjectKind::State).is_ok());
        prop_assert!(h.reduced().as_herm().max_abs_diff(DensityMatrix::maximally_mixed(d).as_herm()) < 1e-12);
    }

    #[test]
    fn postselected_hypothesis_stays_valid(b in any::<u64>(), plus in any::<bool>()) {
        let params = derive_params(2, 1, 0.25, 1.0 / 3.0, Overrides { q: Some(4), ..Default::default() }).unwrap();
        let h = Hypothesis::initial(2, 4, DimCap::default()).unwrap();
        let e = effect(b, 2);
        let v = accept_prob(&e, h.reduced()).unwrap();
        let sign = if plus { Sign::Plus } else { Sign::Minus };
        let f = postselection_effect(&e, v, sign, &params).unwrap();
        if let Ok(next) = postselect_hypothesis(&h, &f) {
            prop_assert!(validate(next.amplified().as_herm(), ObjectKind::State).is_ok());
            prop_assert!(validate(next.reduced().as_herm(), ObjectKind::State).is_ok());
            prop_assert!(next.postselection_probability() <= h.postselection_probability() + 1e-12);
            prop_assert_eq!(next.iteration(), 1);
        }
    }
}
