mod common;

use common::{close, params, state_strategy};
use proptest::prelude::*;
use roamscope::dynamics::*;

proptest! {
    #[test]
    fn pi_chart_round_trip(x in state_strategy()) {
        let p = params();
        let (pi_r, pi_t) = momenta_to_pi(&p, &x).unwrap();
        let back = pi_to_momenta(&p, x.r, pi_r, x.theta, pi_t).unwrap();
        prop_assert!(close(back.p_r, x.p_r, 1e-12) && close(back.p_theta, x.p_theta, 1e-12));
    }

    #[test]
    fn k_vanishes_exactly_on_the_constraint(x in state_strategy(), scale in 0.5f64..1.5) {
        let p = params();
        let (pi_r, pi_t) = momenta_to_pi(&p, &x).unwrap();
        let eu = p.potential(x.r, x.theta).unwrap().exp();
        let k = isokinetic_k(&p, x.r, pi_r, x.theta, pi_t).unwrap();
        // K = e^{-U}(KE - 1/2)
        prop_assert!((k * eu).abs() < 1e-12, "K e^U = {}", k * eu);
        prop_assume!((scale - 1.0).abs() > 1e-3);
        let ks = isokinetic_k(&p, x.r, scale * pi_r, x.theta, scale * pi_t).unwrap();
        let ke = kinetic_energy(&p, &PhaseState::new(x.r, scale * x.p_r, x.theta, scale * x.p_theta));
        prop_assert!(close(ks * eu, ke - 0.5, 1e-10));
        prop_assert!(ks.signum() == (scale - 1.0).signum());
    }

    #[test]
    fn jacobian_matches_field_differences(x in state_strategy()) {
        let p = params();
        let j = jacobian(&p, &x).unwrap();
        let y = x.to_array();
        let h = 1e-7;
        for b in 0..4 {
            let (mut yp, mut ym) = (y, y);
            yp[b] += h;
            ym[b] -= h;
            let fp = vector_field(&p, &PhaseState::from_array(&yp, 0.0)).unwrap();
            let fm = vector_field(&p, &PhaseState::from_array(&ym, 0.0)).unwrap();
            for a in 0..4 {
                let fd = (fp[a] - fm[a]) / (2.0 * h);
                let scale = j[a][b].abs().max(1.0);
                prop_assert!((j[a][b] - fd).abs() <= 1e-5 * scale, "J[{a}][{b}] = {} vs {fd}", j[a][b]);
            }
        }
    }

    #[test]
    fn field_is_tangent_to_the_constraint(x in state_strategy()) {
        let p = params();
        let f = vector_field(&p, &x).unwrap();
        let mu = p.reduced_mass();
        let g = 1.0 / (mu * x.r * x.r) + 1.0 / p.i_ch3;
        let dg = -2.0 / (mu * x.r.powi(3));
        let d_ke = x.p_r * f[1] / mu + x.p_theta * f[3] * g + 0.5 * x.p_theta * x.p_theta * dg * f[0];
        let scale = f.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        prop_assert!(d_ke.abs() < 1e-12 * scale, "dKE/dt = {d_ke}");
    }

    #[test]
    fn field_commutes_with_reflection_and_half_turn(x in state_strategy()) {
        let p = params();
        let f = vector_field(&p, &x).unwrap();
        let fr = vector_field(&p, &x.reflected()).unwrap();
        let fh = vector_field(&p, &x.rotated_half_turn()).unwrap();
        for (a, sign) in [(0, 1.0), (1, 1.0), (2, -1.0), (3, -1.0)] {
            prop_assert!(close(fr[a], sign * f[a], 1e-12));
            prop_assert!(close(fh[a], f[a], 1e-12));
        }
    }

    #[test]
    fn resolved_momentum_sits_on_constraint(r in 1.0f64..20.0, theta in -3.2f64..3.2, w in -0.99f64..0.99, positive in any::<bool>()) {
        let p = params();
        let x = resolve_momentum_on_constraint(&p, r, theta, FixedMomentum::PTheta(w * max_angular_momentum(&p, r)), positive).unwrap();
        prop_assert!((kinetic_energy(&p, &x) - KINETIC_TARGET).abs() < 1e-14);
        prop_assert_eq!(x.p_r > 0.0, positive);
    }
}
