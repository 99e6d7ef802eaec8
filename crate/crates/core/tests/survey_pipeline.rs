mod common;

use std::f64::consts::PI;
use std::sync::OnceLock;

use common::params;
use roamscope::dynamics::max_angular_momentum;
use roamscope::integrate::{advance, Direction, IntegratorSettings};
use roamscope::ld::DescriptorSpec;
use roamscope::orbits::{Branch, OrbitCurve};
use roamscope::survey::*;

fn radial(n: usize) -> SectionSpec {
    SectionSpec::radial_default(&params(), n)
}

fn field(spec: DescriptorSpec, n: usize) -> LDField {
    compute_field(&params(), &radial(n), &spec, &IntegratorSettings::sweep()).unwrap()
}

fn inner6() -> &'static LDField {
    static F: OnceLock<LDField> = OnceLock::new();
    F.get_or_init(|| field(DescriptorSpec::inner(6.0), 100))
}

fn outer(tau: u32) -> &'static LDField {
    static F10: OnceLock<LDField> = OnceLock::new();
    static F20: OnceLock<LDField> = OnceLock::new();
    let cell = if tau == 10 { &F10 } else { &F20 };
    cell.get_or_init(|| field(DescriptorSpec::outer(tau as f64), 100))
}

fn ridges() -> &'static RidgeExtraction {
    static R: OnceLock<RidgeExtraction> = OnceLock::new();
    R.get_or_init(|| extract_gradient_ridges(inner6(), &RidgeOptions::default()).unwrap())
}

fn minima(tau: u32) -> ManifoldTrace {
    extract_minima(outer(tau), &MinimaOptions::default()).unwrap()
}

fn overlay() -> &'static OverlayReport {
    static O: OnceLock<OverlayReport> = OnceLock::new();
    O.get_or_init(|| intersection_overlay(&ridges().trace, &minima(20)).unwrap())
}

#[test]
fn masks_follow_the_kinetic_budget() {
    let p = params();
    let root_mu = p.reduced_mass().sqrt();
    let mut theta = SectionSpec::theta_default(&p, 40);
    theta.axis2 = (-1.2 * root_mu, 1.2 * root_mu);
    let mut rad = radial(40);
    let pm = max_angular_momentum(&p, RADIAL_SECTION_R);
    rad.axis2 = (-1.2 * pm, 1.2 * pm);
    for (s, limit) in [(theta, root_mu), (rad, pm)] {
        let seeds = seed_grid(&p, &s).unwrap();
        for j in 0..40 {
            let outside = s.axis2_value(j).abs() > limit;
            for i in 0..40 {
                assert_eq!(seeds[j * 40 + i].is_none(), outside, "row {j}");
            }
            assert_eq!(seeds[j * 40].is_none(), seeds[(39 - j) * 40].is_none());
        }
        assert!(seeds.iter().any(|c| c.is_none()));
    }
}

#[test]
fn radial_dissociation_seed_and_its_class() {
    let p = params();
    let x = radial(100).state(&p, 0.0, 0.0).unwrap();
    assert!((x.p_r - p.reduced_mass().sqrt()).abs() < 1e-15);
    let c = classify_trajectory(&p, &x, &ClassRules::standard(&p).unwrap());
    assert_eq!(c.kind, ClassKind::DirectDissociation);
}

#[test]
fn fields_are_invariant_under_half_turn() {
    let n = 40;
    for f in [field(DescriptorSpec::inner(6.0), n), field(DescriptorSpec::outer(10.0), n)] {
        let shift = f.section.half_turn_shift().unwrap();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                let (a, b) = (f.at(j, i), f.at(j, (i + shift) % n));
                if a.is_nan() {
                    assert!(b.is_nan());
                    continue;
                }
                worst = worst.max((a - b).abs() / a.abs().max(1.0));
            }
        }
        assert!(worst < 1e-5, "{}: {worst:e}", f.descriptor.integrand.id());
    }
}

#[test]
fn doubling_the_horizon_never_lowers_a_cell() {
    let (short, long) = (field(DescriptorSpec::outer(10.0), 40), field(DescriptorSpec::outer(20.0), 40));
    for (a, b) in short.values.iter().zip(&long.values) {
        assert!(a.is_nan() && b.is_nan() || b >= a, "{a} > {b}");
    }
}

#[test]
fn serial_and_parallel_sweeps_agree_bitwise() {
    let p = params();
    let s = radial(16);
    let spec = DescriptorSpec::inner(6.0);
    let par = compute_field(&p, &s, &spec, &IntegratorSettings::sweep()).unwrap();
    let ser = compute_field_serial(&p, &s, &spec, &IntegratorSettings::sweep()).unwrap();
    let bits = |f: &LDField| f.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&par), bits(&ser));
}

#[test]
fn outer_stable_manifold_gives_one_trace_per_momentum_sign() {
    let trace = minima(20);
    assert_eq!(trace.chains.len(), 2);
    let signs: Vec<bool> = trace
        .chains
        .iter()
        .map(|c| {
            let up = c.points[0].1 > 0.0;
            assert!(c.points.iter().all(|pt| (pt.1 > 0.0) == up));
            up
        })
        .collect();
    assert_ne!(signs[0], signs[1]);
}

#[test]
fn inner_unstable_manifold_gives_four_s_shapes() {
    let r = ridges();
    assert_eq!(r.s_shapes(), 4, "{:?}", r.census);
    assert!(r.warning().is_none());
    for c in r.trace.labeled(TraceLabel::InnerUnstable) {
        let rows = c.points.iter().map(|pt| pt.1).collect::<Vec<_>>();
        assert!(rows.first().unwrap() < &-1.0 && rows.last().unwrap() > &1.0, "chain {} spans {rows:?}", c.id);
    }
}

#[test]
fn chain_nearest_theta_one_comes_from_the_positive_branch() {
    let p = params();
    let s = radial(100);
    let (h1, h2) = (s.axis1_step(), s.axis2_step());
    let (_, point) = ridges()
        .trace
        .labeled(TraceLabel::InnerUnstable)
        .flat_map(|c| c.points.iter().map(move |pt| (c.id, *pt)))
        .min_by(|a, b| {
            let d = |pt: (f64, f64)| ((pt.0 - 1.0) / h1).hypot(pt.1 / h2);
            d(a.1).total_cmp(&d(b.1))
        })
        .unwrap();
    let x = s.state(&p, point.0, point.1).unwrap();
    let tr = advance(&p, &x, &IntegratorSettings::precise().with_t_max(6.0).with_direction(Direction::Backward)).unwrap();
    let distance = |branch: Branch| {
        let curve = OrbitCurve::published_inner(branch);
        tr.nodes()
            .map(|y| {
                let c = curve.state_at(&p, y.theta);
                (y.r - c.r).abs() + (y.p_r - c.p_r).abs() + (y.p_theta - c.p_theta).abs()
            })
            .fold(f64::INFINITY, f64::min)
    };
    let (plus, minus) = (distance(Branch::Plus), distance(Branch::Minus));
    assert!(plus < minus, "closest approach: plus {plus}, minus {minus}");
}

#[test]
fn default_overlay_reports_roaming() {
    let o = overlay();
    assert!(o.roaming_present());
    assert_eq!(o.half_turn_symmetric, Some(true));
    assert!(o.overlap_cells() < o.well_region_cells());
}

#[test]
fn classes_agree_with_overlay_regions() {
    let p = params();
    let s = radial(100);
    let grid = classify_grid(&p, &s, &ClassRules::standard(&p).unwrap()).unwrap();
    let o = overlay();
    let n = s.resolution;
    let mut tally = [[0usize; 2]; 5];
    let mut hit = |k: usize, ok: bool| tally[k][usize::from(ok)] += 1;
    for j in (0..n).step_by(2) {
        for i in (0..n).step_by(2) {
            let idx = j * n + i;
            let Some(c) = grid.cells[idx] else { continue };
            if o.well_region[idx] {
                hit(0, c.origin == Terminus::Well);
            } else {
                hit(1, c.origin == Terminus::Asymptotic);
            }
            if o.band[idx] {
                hit(2, c.fate == Terminus::Asymptotic);
            } else {
                hit(3, c.fate == Terminus::Well);
            }
            if o.overlap[idx] {
                hit(4, matches!(c.kind, ClassKind::DirectDissociation | ClassKind::Roaming));
            }
        }
    }
    let rate = |k: usize| tally[k][1] as f64 / (tally[k][0] + tally[k][1]) as f64;
    assert!(rate(0) >= 0.95, "well region: {:?}", tally[0]);
    assert!(rate(2) >= 0.95, "band: {:?}", tally[2]);
    assert!(rate(3) >= 0.8, "outside band: {:?}", tally[3]);
    assert!(rate(4) >= 0.95, "overlap: {:?}", tally[4]);
    assert!(rate(1) >= 0.5, "outside region: {:?}", tally[1]);
}

#[test]
fn class_map_is_half_turn_symmetric() {
    let p = params();
    let s = radial(20);
    let grid = classify_grid(&p, &s, &ClassRules::standard(&p).unwrap()).unwrap();
    let shift = s.half_turn_shift().unwrap();
    for j in 0..20 {
        for i in 0..20 {
            let (a, b) = (grid.cells[j * 20 + i], grid.cells[j * 20 + (i + shift) % 20]);
            assert_eq!(a.map(|c| c.kind), b.map(|c| c.kind), "cell ({i}, {j})");
        }
    }
}

fn synthetic(section: SectionSpec, value: impl Fn(usize, usize) -> f64) -> LDField {
    let n = section.resolution;
    let values = (0..n * n).map(|k| value(k / n, k % n)).collect();
    LDField { section, descriptor: DescriptorSpec::outer(20.0), settings: IntegratorSettings::sweep(), values }
}

#[test]
fn parabolic_valley_is_recovered_exactly() {
    let n = 40;
    let valley = |i: usize| 28 + (3.0 * (2.0 * PI * i as f64 / n as f64).sin()).round() as usize;
    let f = synthetic(radial(n), |j, i| {
        let d = j as f64 - valley(i) as f64;
        1.0 + (d * d).min(25.0)
    });
    let trace = extract_minima(&f, &MinimaOptions::default()).unwrap();
    assert_eq!(trace.chains.len(), 1);
    let s = &f.section;
    let mut cols: Vec<usize> = Vec::new();
    for &(a1, a2) in &trace.chains[0].points {
        let i = s.axis1_index(a1).round().rem_euclid(n as f64) as usize;
        assert_eq!(s.axis2_index(a2).round() as usize, valley(i));
        cols.push(i);
    }
    cols.sort_unstable();
    assert_eq!(cols, (0..n).collect::<Vec<_>>());
}

#[test]
fn step_edges_do_not_depend_on_the_cutoff() {
    let n = 40;
    let left = |j: usize| 5 + j / 4;
    let f = synthetic(radial(n), |j, i| if (left(j)..left(j) + 12).contains(&i) { 1.0 } else { 10.0 });
    let traces: Vec<ManifoldTrace> = [0.3, 0.4, 0.5, 0.6, 0.7]
        .iter()
        .map(|&cutoff_fraction| {
            extract_gradient_ridges(&f, &RidgeOptions { cutoff_fraction, ..Default::default() }).unwrap().trace
        })
        .collect();
    for t in &traces[1..] {
        assert_eq!(t.chains, traces[0].chains);
    }
    let s = &f.section;
    let edges = traces[0].labeled(TraceLabel::InnerUnstable).count();
    assert_eq!(edges, 2);
    for c in traces[0].labeled(TraceLabel::InnerUnstable) {
        for &(a1, a2) in &c.points {
            let j = s.axis2_index(a2).round() as usize;
            let pos = s.axis1_index(a1);
            let near_left = (pos - (left(j) as f64 - 0.5)).abs() <= 1.0;
            let near_right = (pos - (left(j) as f64 + 11.5)).abs() <= 1.0;
            assert!(near_left || near_right, "row {j}: edge at {pos}");
        }
    }
}

