mod common;

use std::f64::consts::{FRAC_PI_2, PI};

use common::{close, params};
use proptest::prelude::*;
use roamscope::model::{check_reference_points, Classification};

proptest! {
    #[test]
    fn potential_has_four_fold_symmetry(r in 0.9f64..20.0, theta in -PI..PI) {
        let p = params();
        let u = p.potential(r, theta).unwrap();
        for image in [-theta, PI - theta, theta + PI, theta + 2.0 * PI] {
            let v = p.potential(r, image).unwrap();
            prop_assert!(close(u, v, 1e-12), "U({r}, {theta}) = {u} but U({r}, {image}) = {v}");
        }
    }

    #[test]
    fn gradient_matches_central_differences(r in 0.9f64..20.0, theta in -PI..PI) {
        let p = params();
        let [g_r, g_t] = p.gradient(r, theta).unwrap();
        let h = 1e-6;
        let fd_r = (p.potential(r + h, theta).unwrap() - p.potential(r - h, theta).unwrap()) / (2.0 * h);
        let fd_t = (p.potential(r, theta + h).unwrap() - p.potential(r, theta - h).unwrap()) / (2.0 * h);
        let scale = g_r.abs().max(g_t.abs()).max(1.0);
        prop_assert!((g_r - fd_r).abs() <= 1e-5 * scale, "dU/dr {g_r} vs {fd_r}");
        prop_assert!((g_t - fd_t).abs() <= 1e-5 * scale, "dU/dθ {g_t} vs {fd_t}");
    }

    #[test]
    fn hessian_matches_gradient_differences(r in 0.9f64..20.0, theta in -PI..PI) {
        let p = params();
        let hess = p.hessian(r, theta).unwrap();
        let h = 1e-6;
        let gp = p.gradient(r + h, theta).unwrap();
        let gm = p.gradient(r - h, theta).unwrap();
        let tp = p.gradient(r, theta + h).unwrap();
        let tm = p.gradient(r, theta - h).unwrap();
        let fd = [
            [(gp[0] - gm[0]) / (2.0 * h), (tp[0] - tm[0]) / (2.0 * h)],
            [(gp[1] - gm[1]) / (2.0 * h), (tp[1] - tm[1]) / (2.0 * h)],
        ];
        let scale = hess.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
        for a in 0..2 {
            for b in 0..2 {
                prop_assert!((hess[a][b] - fd[a][b]).abs() <= 1e-5 * scale, "H[{a}][{b}] {} vs {}", hess[a][b], fd[a][b]);
            }
        }
        prop_assert!((hess[0][1] - hess[1][0]).abs() <= 1e-12 * scale);
    }
}

#[test]
fn stationary_points_match_reference_table() {
    let p = params();
    let points = p.stationary_points().unwrap();
    for check in check_reference_points(&points) {
        assert!(check.ok, "{:?}", check);
    }
    for pt in &points {
        assert!(pt.gradient_norm < 1e-8, "{pt:?}");
    }
}

#[test]
fn equilibria_in_fundamental_domain_are_the_four_reference_points() {
    let p = params();
    let points = p.stationary_points().unwrap();
    let mut kinds: Vec<_> = points
        .iter()
        .filter(|s| (0.0..=FRAC_PI_2 + 1e-9).contains(&s.theta))
        .map(|s| s.class)
        .collect();
    kinds.sort_by_key(|c| *c as u8);
    assert_eq!(kinds, vec![Classification::Well, Classification::Saddle, Classification::Saddle, Classification::Maximum]);
}
