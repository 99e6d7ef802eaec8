mod common;

use std::f64::consts::TAU;

use common::{params, random_state};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use roamscope::dynamics::*;
use roamscope::integrate::*;
use roamscope::ld::{ld_value, DescriptorSpec};
use roamscope::orbits::{inner_rbar, outer_orbit, outer_radius, Branch, INNER_C};

fn settings() -> IntegratorSettings {
    IntegratorSettings::precise()
}

#[test]
fn outer_orbit_returns_after_one_period() {
    let p = params();
    let orbit = outer_orbit(&p, Branch::Plus).unwrap();
    assert!((orbit.period - 9.61).abs() < 0.05);
    let x0 = orbit.state_at(&p, 0.0);
    let tr = advance(&p, &x0, &settings().with_t_max(orbit.period)).unwrap();
    let end = tr.end;
    assert!((end.r - x0.r).abs() < 1e-6);
    assert!((end.p_r - x0.p_r).abs() < 1e-6);
    assert!((end.theta - TAU - x0.theta).abs() < 1e-6, "{}", end.theta);
    assert!((end.p_theta - x0.p_theta).abs() < 1e-6);
}

#[test]
fn circular_state_keeps_its_radius() {
    let p = params();
    let r_out = outer_radius(&p).unwrap();
    let x0 = resolve_momentum_on_constraint(&p, r_out, 1.0, FixedMomentum::PR(0.0), false).unwrap();
    let tr = advance(&p, &x0, &settings().with_t_max(20.0)).unwrap();
    let worst = tr.nodes().map(|x| (x.r - r_out).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst}");
}

/// Rounding committed at low potential grows like e^{2ΔU} as the trajectory
/// climbs, so a pass through the well bottom (ΔU ≈ 47) leaves nothing to
/// recover. The 1e-8 bound is checked on trajectories whose potential spans
/// less than 10 kcal/mol.
#[test]
fn forward_then_backward_recovers_the_start() {
    let p = params();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut tested = 0;
    for _ in 0..60 {
        let x0 = random_state(&p, &mut rng);
        let fwd = advance(&p, &x0, &settings().with_t_max(5.0)).unwrap();
        let u: Vec<f64> = fwd.nodes().map(|x| p.potential(x.r, x.theta).unwrap()).collect();
        let span = u.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - u.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        if fwd.status.is_failure() || span > 10.0 {
            continue;
        }
        let back = advance(&p, &fwd.end, &settings().with_t_max(5.0).with_direction(Direction::Backward)).unwrap();
        let err = x0.to_array().iter().zip(back.end.to_array()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "round trip from {x0:?}: {err:e}");
        assert!(back.end.t.abs() < 1e-12);
        tested += 1;
    }
    assert!(tested >= 30, "{tested}");
}

#[test]
fn kinetic_energy_is_conserved_over_thirty_time_units() {
    let p = params();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 0..60 {
        let x0 = random_state(&p, &mut rng);
        let dir = if k % 2 == 0 { Direction::Forward } else { Direction::Backward };
        let tr = advance(&p, &x0, &settings().with_t_max(30.0).with_direction(dir)).unwrap();
        if tr.status.is_failure() {
            continue;
        }
        assert!(tr.max_drift < 1e-9, "{x0:?}: {:e}", tr.max_drift);
        assert!(tr.is_valid());
    }
}

#[test]
fn dense_output_tightens_with_tolerance() {
    let p = params();
    let x0 = resolve_momentum_on_constraint(&p, 4.0, 0.4, FixedMomentum::PR(0.3), true).unwrap();
    let probe = 2.37;
    let reference = flow_map(&p, &x0, probe, &IntegratorSettings { rel_tol: 1e-13, abs_tol: 1e-13, ..settings() }).unwrap();
    let err = |tol: f64| {
        let s = IntegratorSettings { rel_tol: tol, abs_tol: tol, ..settings() }.with_t_max(5.0).with_projection(false);
        let x = advance(&p, &x0, &s).unwrap().at(probe).unwrap();
        x.to_array().iter().zip(reference.to_array()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let (coarse, fine) = (err(1e-6), err(1e-9));
    assert!(fine < coarse, "{fine:e} vs {coarse:e}");
    assert!(fine < 1e-7);
}

#[test]
fn outer_orbit_never_meets_the_radial_section() {
    let p = params();
    let x0 = outer_orbit(&p, Branch::Plus).unwrap().state_at(&p, 0.0);
    let (events, _) = section_crossings(&p, &x0, &SectionKind::Radial { r0: 3.6 }, &settings().with_t_max(30.0)).unwrap();
    assert!(events.is_empty());
}

#[test]
fn start_on_the_section_is_not_an_event() {
    let p = params();
    let x0 = resolve_momentum_on_constraint(&p, 3.6, 0.2, FixedMomentum::PTheta(0.3), true).unwrap();
    let sec = SectionKind::Radial { r0: 3.6 };
    let (events, _) = section_crossings(&p, &x0, &sec, &settings().with_t_max(40.0)).unwrap();
    for e in &events {
        assert!(e.state.t > 1e-6);
    }
}

#[test]
fn events_are_ordered_and_on_the_surface() {
    let p = params();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sections = [SectionKind::Radial { r0: 3.6 }, SectionKind::Theta { theta0: 0.0 }];
    let mut seen = 0;
    for _ in 0..20 {
        let x0 = random_state(&p, &mut rng);
        for sec in &sections {
            let Ok((events, _)) = section_crossings(&p, &x0, sec, &settings().with_t_max(25.0)) else { continue };
            for w in events.windows(2) {
                assert!(w[1].state.t > w[0].state.t);
            }
            for e in &events {
                let y = e.state.to_array();
                let f = vector_field(&p, &e.state).unwrap();
                assert!(e.residual.abs() < EVENT_TOL && sec.value(&y).abs() < EVENT_TOL);
                assert!(sec.accepts(&y, &f));
                seen += 1;
            }
        }
    }
    assert!(seen > 20);
}

#[test]
fn trajectory_leaving_the_well_crosses_zero_angle_first() {
    let p = params();
    let r_out = outer_radius(&p).unwrap();
    // seed of a direct-dissociation cell on r = 3.6, traced back into the well
    let seed = resolve_momentum_on_constraint(&p, 3.6, 0.0, FixedMomentum::PTheta(0.05), true).unwrap();
    let back = advance(&p, &seed, &settings().with_t_max(50.0).with_direction(Direction::Backward)).unwrap();
    let start = back
        .nodes()
        .find(|x| x.r < inner_rbar(&INNER_C, x.theta))
        .expect("backward trajectory never enters the well");
    let theta_sec = SectionKind::Theta { theta0: 0.0 };
    let out_sec = SectionKind::Radial { r0: r_out };
    let mut theta_hits = 0;
    let mut left = false;
    scan_events(&p, &start, &[&theta_sec, &out_sec], &settings().with_t_max(60.0), |e| {
        if e.event == 0 {
            theta_hits += 1;
            true
        } else {
            left = true;
            false
        }
    })
    .unwrap();
    assert!(left, "no dissociation from {start:?}");
    assert!(theta_hits >= 1);
}

#[test]
fn radial_descriptor_vanishes_on_the_outer_orbit() {
    let p = params();
    let x0 = outer_orbit(&p, Branch::Minus).unwrap().state_at(&p, 2.0);
    assert!(ld_value(&p, &x0, &DescriptorSpec::outer(10.0), &settings()) < 1e-6);
    assert_eq!(ld_value(&p, &x0, &DescriptorSpec::outer(0.0), &settings()), 0.0);
}

#[test]
fn descriptors_are_non_negative_and_grow_with_horizon() {
    let p = params();
    let s = IntegratorSettings::sweep();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let x0 = random_state(&p, &mut rng);
        for make in [DescriptorSpec::inner as fn(f64) -> DescriptorSpec, DescriptorSpec::outer] {
            let short = ld_value(&p, &x0, &make(6.0), &s);
            let long = ld_value(&p, &x0, &make(8.0), &s);
            assert!(short >= 0.0);
            assert!(long >= short, "{x0:?}: {long} < {short}");
        }
    }
}
