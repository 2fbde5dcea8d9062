//! Reconstructed costates on the half-plane benchmarks and failure modes of
//! the verifier.

mod common;

use std::f64::consts::PI;

use hetdubins::adjoint::{conditions, reconstruct_adjoint, verify, AdjointTrajectory};
use hetdubins::geometry::propagate;
use hetdubins::path::{Phase, Segment};
use hetdubins::planner::{plan_multi_region, plan_two_region, PlannerOptions, Route, Scenario};
use hetdubins::presets::{half_planes, half_planes_equal_rate, half_planes_fast_turn, three_region_sweep, HALF_PLANE_SPEEDS};
use hetdubins::refraction::CrossingRecord;
use hetdubins::{Configuration, PathSolution, RegionId, SegmentKind};

/// Published costate summaries of one benchmark column:
/// `(x_bar, y1, y2, theta_min, theta_max)`.
type Summary = [f64; 5];

const EQUAL_RATE: [Summary; 5] = [
    [-0.74, 3.93, 0.68, -1.56, 0.0514],
    [-0.59, 1.91, 0.81, -1.47, 0.0135],
    [-0.34, 0.94, 0.84, -1.42, 4.16e-5],
    [-0.09, 0.49, 1.00, -1.57, 4.94e-5],
    [0.53, 0.03, 0.85, -3.09, 4.42e-5],
];

const FAST_TURN: [Summary; 5] = [
    [-0.72, 3.93, 0.65, -1.07, 0.0378],
    [-0.53, 1.90, 0.77, -0.90, 0.0114],
    [-0.25, 0.91, 0.91, -0.67, 4.86e-5],
    [0.11, 0.45, 0.98, -0.67, 4.70e-5],
    [0.90, 0.24, 1.00, -0.77, 3.98e-5],
];

/// Range of `lambda_theta` sampled along the path.
fn theta_range(p: &PathSolution, adj: &AdjointTrajectory) -> (f64, f64) {
    p.sample(200).iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
        let l = adj.phases[s.j].lambda_theta(s.pose.position());
        (lo.min(l), hi.max(l))
    })
}

/// Our costate summary in the published sign convention (all negated).
fn summary(s: &Scenario) -> Summary {
    let p = plan_two_region(s, &PlannerOptions::default()).unwrap();
    let adj = reconstruct_adjoint(&p, s).unwrap();
    let (lo, hi) = theta_range(&p, &adj);
    let y2 = adj.phases.last().unwrap().lambda_y;
    [-adj.lambda_x_bar(), -adj.phases[0].lambda_y, -y2, -hi, -lo]
}

fn close(ours: f64, published: f64) -> bool {
    (ours - published).abs() <= (0.03 * published.abs()).max(0.01)
}

fn check_column(name: &str, published: &[Summary; 5], build: impl Fn(f64) -> Scenario, skip: &[(usize, usize)]) {
    for (i, (&v1, want)) in HALF_PLANE_SPEEDS.iter().zip(published).enumerate() {
        let got = summary(&build(v1));
        for k in 0..5 {
            if skip.contains(&(i, k)) {
                continue;
            }
            assert!(close(got[k], want[k]), "{name} v1={v1} entry {k}: {} vs {}", got[k], want[k]);
        }
    }
}

#[test]
fn equal_rate_costates_match_published_values() {
    // The homogeneous column lists a lambda_y jump that cannot occur.
    check_column("equal rate", &EQUAL_RATE, |v| half_planes_equal_rate(v).unwrap(), &[(2, 2)]);
}

#[test]
fn fast_turn_costates_match_published_values() {
    // The published lambda_x row of this column repeats another column's row.
    let skip: Vec<_> = (0..5).map(|i| (i, 0)).collect();
    check_column("fast turn", &FAST_TURN, |v| half_planes_fast_turn(v).unwrap(), &skip);
}

#[test]
fn lambda_theta_signs_follow_the_turns_on_every_benchmark() {
    let opts = PlannerOptions::default();
    let mut cases: Vec<(Scenario, PathSolution)> = Vec::new();
    for &v in &HALF_PLANE_SPEEDS {
        for s in [half_planes_equal_rate(v).unwrap(), half_planes_fast_turn(v).unwrap()] {
            let p = plan_two_region(&s, &opts).unwrap();
            cases.push((s, p));
        }
    }
    for v2 in [0.475, 0.48, 0.75, 1.5, 5.0] {
        let s = three_region_sweep(v2).unwrap();
        let p = plan_multi_region(&s, 2, &opts).unwrap();
        cases.push((s, p));
    }
    for (s, p) in &cases {
        let adj = reconstruct_adjoint(p, s).unwrap();
        for smp in p.sample(100) {
            let l = adj.phases[smp.j].lambda_theta(smp.pose.position());
            match smp.kind {
                SegmentKind::Line => assert!(l.abs() <= 1e-6, "{}: lambda_theta {l} on a line", p.word()),
                k => assert!(l * k.turn_sign() >= -1e-6, "{}: lambda_theta {l} against {k:?}", p.word()),
            }
        }
        let rep = verify(p, s);
        assert!(rep.pass, "{}", p.word());
        assert!(rep.c.abs() <= 1e-6);
    }
}

#[test]
fn oblique_line_between_different_speeds_is_rejected() {
    let base = half_planes(2.0, 2.0, 1.0, 1.0).unwrap();
    let map = base.map.clone();
    let start = Configuration::new(0.0, 2.0, 5.0 * PI / 6.0);
    let r1 = map.region(RegionId(1)).unwrap();
    let r2 = map.region(RegionId(2)).unwrap();
    let len1 = 2.0 / (PI / 6.0).cos();
    let d1 = len1 / r1.v;
    let mid = propagate(&start, SegmentKind::Line, d1, r1.v, r1.u_max()).unwrap();
    let d2 = 3.0 / r2.v;
    let goal = propagate(&mid, SegmentKind::Line, d2, r2.v, r2.u_max()).unwrap();
    let seg = |duration, region| Segment { kind: SegmentKind::Line, duration, region };
    let phases = vec![
        Phase::new(r1, start, vec![seg(d1, RegionId(1))]),
        Phase::new(r2, mid, vec![seg(d2, RegionId(2))]),
    ];
    let crossing = CrossingRecord::between(&phases[0], &phases[1], &map).unwrap();
    let p = PathSolution::from_phases(phases, vec![crossing]);
    let s = Scenario::new(map, start, RegionId(1), goal, RegionId(2)).unwrap();
    let rep = verify(&p, &s);
    assert!(!rep.pass);
    assert!(!rep.entry(conditions::ADMISSIBILITY).unwrap().pass);
    assert!(!rep.entry(conditions::PERPENDICULAR).unwrap().pass);
}

#[test]
fn bent_crossing_fails_verification() {
    let s = half_planes_fast_turn(2.0).unwrap();
    let opts = PlannerOptions::default();
    let p = plan_two_region(&s, &opts).unwrap();
    let rec = &p.crossings[0];
    let edge = s.map.shared_edge(RegionId(1), RegionId(2)).unwrap();
    let (from, to) = edge.oriented_towards(RegionId(2));
    let t = to.sub(from);
    let along = rec.frame.anchor.sub(from).dot(t) / t.norm();
    let route = Route::new(&s.map, &[RegionId(1), RegionId(2)], vec![false], s.start, s.goal, opts.containment_tol).unwrap();
    let bent = route.solution(&[along, rec.theta_star + 0.1]).unwrap();
    assert!(bent.total_time() > p.total_time());
    let rep = verify(&bent, &s);
    assert!(!rep.pass);
    assert!(!rep.entry(conditions::HAMILTONIAN).unwrap().pass);
    assert!(reconstruct_adjoint(&bent, &s).is_err());
}
