//! Property tests of the structural invariants.

use geoflow_core::cone::{theta, theta_derivative_symmetric, ConeSpec};
use geoflow_core::flow::{ConstantJacobi, JacobiPath, JacobiState};
use geoflow_core::models::{closed_form_jacobi, SymmetricModel};
use proptest::prelude::*;

fn state3(raw: [f64; 6]) -> Option<JacobiState<f64>> {
    let s = JacobiState::new(raw[..3].to_vec(), raw[3..].to_vec());
    let n = s.norm_sq();
    if n < 1e-6 || !n.is_finite() {
        None
    } else {
        Some(s)
    }
}

proptest! {
    #[test]
    fn theta_is_scale_invariant_and_bounded(raw in prop::array::uniform6(-10.0f64..10.0)) {
        prop_assume!(state3(raw).is_some());
        let s = state3(raw).unwrap();
        let spec = ConeSpec::unstable(1, 1.5).unwrap();
        let base = theta(&s, &spec).unwrap();
        prop_assert!((0.0..=2.0 + 1e-12).contains(&base));
        // Powers of two rescale numerator and denominator exactly.
        for k in [-2.0, -1.0, 0.5] {
            prop_assert_eq!(theta(&s.scale(k), &spec).unwrap(), base);
        }
        let t3 = theta(&s.scale(3.0), &spec).unwrap();
        prop_assert!((t3 - base).abs() <= 1e-13 * (1.0 + base));
    }

    #[test]
    fn closed_form_solves_jacobi_equation(
        rho in -3.0f64..3.0,
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
        t in 0.1f64..2.5,
    ) {
        // Five-point second difference keeps the residual at roundoff scale.
        let h = 1e-2;
        let f = |s: f64| closed_form_jacobi(rho, a, b, s).0;
        let second = (-f(t + 2.0 * h) + 16.0 * f(t + h) - 30.0 * f(t) + 16.0 * f(t - h)
            - f(t - 2.0 * h))
            / (12.0 * h * h);
        let scale = f(t).abs().max(1.0);
        prop_assert!((second + rho * f(t)).abs() < 1e-7 * scale);
    }

    #[test]
    fn model_transitions_are_symplectic(
        dt in 0.05f64..3.0,
        raw1 in prop::array::uniform6(-2.0f64..2.0),
        raw2 in prop::array::uniform6(-2.0f64..2.0),
    ) {
        let path = ConstantJacobi::new(
            &SymmetricModel::complex_hyperbolic_plane().jacobi_matrix::<f64>(),
        );
        let phi = path.transition(0.0, dt).unwrap();
        let s1 = JacobiState::new(raw1[..3].to_vec(), raw1[3..].to_vec());
        let s2 = JacobiState::new(raw2[..3].to_vec(), raw2[3..].to_vec());
        let before = s1.pairing(&s2);
        let a1 = JacobiState::from_flat(&phi.matvec(&s1.to_flat()));
        let a2 = JacobiState::from_flat(&phi.matvec(&s2.to_flat()));
        let after = a1.pairing(&a2);
        let scale = 1.0 + before.abs() + a1.norm_sq() + a2.norm_sq();
        prop_assert!((after - before).abs() < 1e-10 * scale);
    }

    #[test]
    fn block_model_alignment_never_decreases(
        raw in prop::array::uniform6(-3.0f64..3.0),
        dt in 0.01f64..1.0,
    ) {
        prop_assume!(state3(raw).is_some());
        let s = state3(raw).unwrap().normalized();
        let spec = ConeSpec::unstable(1, 1.5).unwrap();
        let path = ConstantJacobi::new(
            &SymmetricModel::complex_hyperbolic_plane().jacobi_matrix::<f64>(),
        );
        // The closed-form derivative is nonnegative everywhere, so a step of
        // the model flow cannot reduce the alignment below roundoff.
        let d = theta_derivative_symmetric(&s, &spec).unwrap();
        prop_assert!(d >= -1e-12);
        let phi = path.transition(0.0, dt).unwrap();
        let moved = JacobiState::from_flat(&phi.matvec(&s.to_flat()));
        let t0 = theta(&s, &spec).unwrap();
        let t1 = theta(&moved, &spec).unwrap();
        prop_assert!(t1 >= t0 - 1e-9, "{} -> {}", t0, t1);
    }
}
