mod common;

use std::sync::OnceLock;

use common::params;
use roamscope::dynamics::{isokinetic_k, momenta_to_pi, resolve_momentum_on_constraint, vector_field, FixedMomentum};
use roamscope::integrate::IntegratorSettings;
use roamscope::ld::{ld_value, DescriptorSpec};
use roamscope::orbits::*;

fn inner(branch: Branch) -> &'static RefinedOrbit {
    static PLUS: OnceLock<RefinedOrbit> = OnceLock::new();
    static MINUS: OnceLock<RefinedOrbit> = OnceLock::new();
    let cell = if branch == Branch::Plus { &PLUS } else { &MINUS };
    cell.get_or_init(|| {
        refine_orbit(&params(), &OrbitCurve::published_inner(branch), DEFAULT_SEGMENTS, &ShootingOptions::default())
            .unwrap()
    })
}

fn inner_spectrum() -> &'static FloquetSpectrum {
    static SPECTRUM: OnceLock<FloquetSpectrum> = OnceLock::new();
    SPECTRUM.get_or_init(|| floquet(&params(), inner(Branch::Plus), &IntegratorSettings::precise()).unwrap())
}

#[test]
fn published_seed_refines_to_the_published_period() {
    let orbit = inner(Branch::Plus);
    assert!(orbit.residual < 1e-10, "{}", orbit.residual);
    assert_eq!(orbit.nullity, 0);
    assert!((orbit.period - 11.84).abs() < 0.05, "{}", orbit.period);
    assert!(orbit.nodes[0].theta.abs() < 1e-12);
}

#[test]
fn refit_stays_close_to_the_printed_curve() {
    let orbit = inner(Branch::Plus);
    assert!(orbit.refit_deviation < 2e-2);
    let worst = (0..400)
        .map(|k| {
            let theta = std::f64::consts::TAU * k as f64 / 400.0;
            (orbit.curve.radius(theta) - inner_rbar(&INNER_C, theta)).abs()
        })
        .fold(0.0, f64::max);
    assert!(worst < 2e-2, "{worst}");
}

#[test]
fn refined_curve_survives_the_text_block() {
    let curve = &inner(Branch::Plus).curve;
    let back = OrbitCurve::from_text(&curve.to_text()).unwrap();
    assert_eq!(back.to_text(), curve.to_text());
}

#[test]
fn both_branches_share_the_period() {
    let (plus, minus) = (inner(Branch::Plus), inner(Branch::Minus));
    assert!((plus.period - minus.period).abs() < 1e-8, "{} vs {}", plus.period, minus.period);
    for (a, b) in plus.nodes.iter().zip(&minus.nodes) {
        assert!((a.r - b.r).abs() < 1e-6 && (a.p_theta + b.p_theta).abs() < 1e-6);
    }
}

#[test]
fn inner_spectrum_has_symplectic_shape() {
    let spec = inner_spectrum();
    assert!((spec.reciprocal_product() - 1.0).abs() < 0.1, "{:?}", spec);
    assert_eq!(spec.count_near_unity(0.1), 2);
    assert!(spec.log10_max() > 1.0);
}

#[test]
fn spectrum_is_chart_independent() {
    let p = params();
    let other = floquet_pi_chart(&p, inner(Branch::Plus), &IntegratorSettings::precise()).unwrap();
    assert!(inner_spectrum().log_distance(&other) < 1.01f64.log10());
}

#[test]
fn outer_orbit_multipliers_match_independent_integration() {
    let p = params();
    let orbit = outer_refined(&p, Branch::Plus, 40, &IntegratorSettings::precise()).unwrap();
    assert!((orbit.period - 9.61).abs() < 0.05);
    assert!(orbit.residual < 1e-10);
    let spec = floquet(&p, &orbit, &IntegratorSettings::precise()).unwrap();
    let m = spec.multipliers();
    // scipy DOP853 on the variational system plus exp(±κT) from the
    // linearised radial motion
    assert!((m[0] / 1.1313958871987344 - 1.0).abs() < 1e-9, "{m:?}");
    assert!((m[3] / 0.8838639165252216 - 1.0).abs() < 1e-9, "{m:?}");
    assert_eq!(spec.count_near_unity(1e-6), 2);
}

#[test]
fn circular_state_is_a_radial_equilibrium() {
    let p = params();
    let r_out = outer_radius(&p).unwrap();
    let x = resolve_momentum_on_constraint(&p, r_out, 0.7, FixedMomentum::PR(0.0), true).unwrap();
    let f = vector_field(&p, &x).unwrap();
    assert!(f[0].abs() < 1e-15 && f[1].abs() < 1e-12, "{f:?}");
}

#[test]
fn refined_nodes_lie_on_the_isokinetic_surface() {
    let p = params();
    for x in &inner(Branch::Plus).nodes {
        let (pi_r, pi_t) = momenta_to_pi(&p, x).unwrap();
        let k = isokinetic_k(&p, x.r, pi_r, x.theta, pi_t).unwrap();
        assert!((k * p.potential(x.r, x.theta).unwrap().exp()).abs() < 1e-12);
    }
}

#[test]
fn inner_descriptor_is_locally_minimal_across_the_orbit() {
    let p = params();
    let x0 = inner(Branch::Plus).nodes[0];
    let spec = DescriptorSpec::inner(6.0);
    let settings = IntegratorSettings::sweep();
    let values: Vec<f64> = (-10..=10)
        .map(|k| {
            let r = x0.r + 0.005 * k as f64;
            let x = resolve_momentum_on_constraint(&p, r, x0.theta, FixedMomentum::PR(x0.p_r), true).unwrap();
            ld_value(&p, &x, &spec, &settings)
        })
        .collect();
    let argmin = (0..values.len()).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    assert!((argmin as i64 - 10).abs() <= 1, "{values:?}");
    assert!(values[0] > values[argmin] && values[20] > values[argmin]);
}
