//! Refraction residuals, the Snell limit, the equal-rate case and the
//! classification of crossing structures.

use std::f64::consts::{FRAC_PI_2, PI};

use hetdubins::planner::{plan_two_region, PlannerOptions};
use hetdubins::presets;
use hetdubins::refraction::{
    check_star_case, classify_crossing, refraction_residuals, snell_exit_angle, CrossingRecord,
};
use hetdubins::{Point, Region, RegionId, Segment, SegmentKind};
use proptest::prelude::*;
use SegmentKind::{CMinus, CPlus, Line};

fn region(id: u32, v: f64, r: f64) -> Region {
    let square = vec![
        Point::new(0.0, 0.0),
        Point::new(1.0, 0.0),
        Point::new(1.0, 1.0),
        Point::new(0.0, 1.0),
    ];
    Region::new(RegionId(id), square, v, r).unwrap()
}

/// Crossing heading that satisfies the speed law for the given sweeps:
/// `v_p sin(theta* + d_pp) = v_pp sin(theta* - d_p)` solved for `theta*`.
fn speed_law_heading(v_p: f64, v_pp: f64, d_p: f64, d_pp: f64) -> f64 {
    let num = -(v_p * d_pp.sin() + v_pp * d_p.sin());
    let den = v_p * d_pp.cos() - v_pp * d_p.cos();
    (num / den).atan()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn constructed_crossings_have_vanishing_residuals(
        v_p in 0.3f64..3.0, v_pp in 0.3f64..3.0,
        r_p in 0.3f64..3.0, r_pp in 0.3f64..3.0,
        d_p in 0.05f64..2.5, sign in prop::bool::ANY,
    ) {
        // Pick the emergent sweep from the radius law, then the heading from the speed law.
        let c = 1.0 - r_p * v_pp * (1.0 - d_p.cos()) / (r_pp * v_p);
        prop_assume!(c.abs() < 1.0 - 1e-6);
        let s = if sign { 1.0 } else { -1.0 };
        let (d_p, d_pp) = (s * d_p, s * c.acos());
        let theta = speed_law_heading(v_p, v_pp, d_p, d_pp);
        let rec = CrossingRecord::from_angles(theta, d_p, d_pp);
        prop_assume!(rec.theta_pp.sin().abs() > 1e-3);
        let (rho_v, rho_r) = refraction_residuals(&rec, &region(1, v_p, r_p), &region(2, v_pp, r_pp)).unwrap();
        prop_assert!(rho_v.abs() <= 1e-12 && rho_r.abs() <= 1e-12, "{rho_v:e} {rho_r:e}");
        let (rv, rr) = rec.recovered_ratios();
        prop_assert!((rv - v_p / v_pp).abs() <= 1e-9 * rv.abs().max(1.0));
        prop_assert!((rr - r_p / r_pp).abs() <= 1e-9 * rr.abs().max(1.0));
    }

    #[test]
    fn residuals_are_antisymmetric(
        theta in -1.4f64..1.4, d_p in -2.5f64..2.5, d_pp in -2.5f64..2.5,
        v_p in 0.3f64..3.0, v_pp in 0.3f64..3.0, r_p in 0.3f64..3.0, r_pp in 0.3f64..3.0,
    ) {
        let (p, pp) = (region(1, v_p, r_p), region(2, v_pp, r_pp));
        let a = refraction_residuals(&CrossingRecord::from_angles(theta, d_p, d_pp), &p, &pp);
        let b = refraction_residuals(&CrossingRecord::from_angles(-theta, -d_p, -d_pp), &p, &pp);
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert!((a.0.abs() - b.0.abs()).abs() <= 1e-15);
            prop_assert!((a.1.abs() - b.1.abs()).abs() <= 1e-15);
        }
    }

    #[test]
    fn snell_is_the_speed_law_limit(
        theta_p in -1.5f64..1.5, sweep in 0.01f64..3.0,
        v_p in 0.3f64..3.0, v_pp in 0.3f64..3.0,
    ) {
        let Ok(theta_pp) = snell_exit_angle(theta_p, v_p, v_pp) else {
            prop_assert!(v_pp / v_p * theta_p.sin().abs() > 1.0);
            return Ok(());
        };
        let mut rec = CrossingRecord::from_angles(0.0, sweep, sweep);
        rec.theta_p = theta_p;
        rec.theta_pp = theta_pp;
        prop_assume!(theta_pp.sin().abs() > 1e-9);
        let (rho_v, _) = refraction_residuals(&rec, &region(1, v_p, 1.0), &region(2, v_pp, 1.0)).unwrap();
        prop_assert!(rho_v.abs() <= 1e-15, "{rho_v:e}");
    }

    #[test]
    fn equal_rate_crossings_need_equal_sweeps(
        theta in -1.0f64..1.0, sweep in -2.0f64..2.0, v in 0.3f64..3.0, k in 0.3f64..3.0, eps in 1e-4f64..0.1,
    ) {
        // Same angular-rate bound v / r on both sides.
        let (p, pp) = (region(1, v, v), region(2, k * v, k * v));
        let ok = check_star_case(&CrossingRecord::from_angles(theta, sweep, sweep), &p, &pp, 1e-6).unwrap();
        prop_assert!(ok.pass && ok.residual == 0.0);
        let bad = check_star_case(&CrossingRecord::from_angles(theta, sweep, sweep + eps), &p, &pp, 1e-6).unwrap();
        prop_assert!(!bad.pass);
    }
}

#[test]
fn star_check_rejects_different_rates() {
    let rec = CrossingRecord::from_angles(0.1, 0.5, 0.5);
    assert!(check_star_case(&rec, &region(1, 1.0, 1.0), &region(2, 2.0, 1.0), 1e-6).is_err());
}

fn pieces(kinds: &[SegmentKind], q: u32) -> Vec<Segment> {
    kinds
        .iter()
        .map(|&kind| Segment {
            kind,
            duration: 1.0,
            region: RegionId(q),
        })
        .collect()
}

const ARCS: [SegmentKind; 2] = [CMinus, CPlus];

/// Token of a family: an arc with a direction slot, a line, or a piece
/// spanning the boundary.
#[derive(Clone, Copy)]
enum Tok {
    C,
    L,
    SpanC,
    SpanL,
}

/// Splits a family at the boundary into incident and emergent kinds, with
/// arc directions taken from `dirs` and pieces in `drop` removed. A spanning
/// arc keeps one direction on both sides.
fn expand(family: &[Tok], boundary: usize, dirs: &[SegmentKind], drop: u32) -> (Vec<SegmentKind>, Vec<SegmentKind>) {
    let (mut a, mut b) = (Vec::new(), Vec::new());
    let mut arcs = dirs.iter();
    for (i, t) in family.iter().enumerate() {
        let kept = drop & (1 << i) == 0;
        let side = if i < boundary { &mut a } else { &mut b };
        match t {
            Tok::C => {
                let k = *arcs.next().unwrap();
                if kept {
                    side.push(k);
                }
            }
            Tok::L => {
                if kept {
                    side.push(Line);
                }
            }
            Tok::SpanC | Tok::SpanL => {
                let k = match t {
                    Tok::SpanC => *arcs.next().unwrap(),
                    _ => Line,
                };
                if kept {
                    a.push(k);
                    b.push(k);
                }
            }
        }
    }
    (a, b)
}

fn direction_choices(n: usize) -> Vec<Vec<SegmentKind>> {
    (0..1usize << n)
        .map(|m| (0..n).map(|i| ARCS[(m >> i) & 1]).collect())
        .collect()
}

fn arcs_in(family: &[Tok]) -> usize {
    family.iter().filter(|t| matches!(t, Tok::C | Tok::SpanC)).count()
}

/// Runs `check` on every direction assignment and every drop pattern that
/// leaves at least one piece on each side.
fn for_each_variant(family: &[Tok], boundary: usize, drops: impl Fn(u32) -> bool, mut check: impl FnMut(&[SegmentKind], &[SegmentKind])) {
    for dirs in direction_choices(arcs_in(family)) {
        for drop in 0..(1u32 << family.len()) {
            if !drops(drop) {
                continue;
            }
            let (a, b) = expand(family, boundary, &dirs, drop);
            if !a.is_empty() && !b.is_empty() {
                check(&a, &b);
            }
        }
    }
}

#[test]
fn optimal_families_are_never_rejected() {
    use Tok::*;
    // (pieces, index of the first piece on the emergent side)
    let families: [(&[Tok], usize); 8] = [
        (&[C, C, C, C, L, C], 3),
        (&[C, C, C, C, C, C], 3),
        (&[C, L, C, C, C, C], 3),
        (&[C, L, SpanC, L, C], 3),
        (&[C, C, SpanC, L, C], 3),
        (&[C, C, SpanC, C, C], 3),
        (&[C, L, SpanC, C, C], 3),
        (&[C, SpanL, C], 2),
    ];
    let mut checked = 0;
    for (family, boundary) in families {
        let n = family.len() as u32;
        for_each_variant(family, boundary, |d| d != (1 << n) - 1, |a, b| {
            // Any straight crossing of these families is orthogonal.
            let theta = if a.last() == Some(&Line) && b.first() == Some(&Line) { 0.0 } else { 0.3 };
            let c = classify_crossing(&pieces(a, 1), &pieces(b, 2), theta, 1.0, 2.0).unwrap();
            assert!(c.is_admissible(), "{a:?} | {b:?} -> {c}");
            checked += 1;
        });
    }
    assert!(checked > 500);
}

#[test]
fn nonoptimal_families_are_rejected() {
    use Tok::*;
    let families: [(&[Tok], usize); 3] = [
        (&[C, L, C, L, C], 3),
        (&[C, L, C, L, C], 2),
        (&[C, L, C, C, L, C], 3),
    ];
    // Only the first and last pieces may vanish.
    for (family, boundary) in families {
        let last = family.len() - 1;
        for_each_variant(family, boundary, |d| d & !(1 | 1 << last) == 0, |a, b| {
            let na = a.len();
            // The switching pattern needs opposite turns on the two sides.
            if b.len() >= 2 && b[1] == Line && a[na - 1] == b[0] && b[0] != Line {
                return;
            }
            let c = classify_crossing(&pieces(a, 1), &pieces(b, 2), 0.3, 1.0, 2.0).unwrap();
            assert!(!c.is_admissible(), "{a:?} | {b:?} -> {c}");
        });
    }
    for theta in [0.01, 0.3, -1.2, PI / 3.0] {
        for (a, b) in [(CPlus, CMinus), (CMinus, CPlus), (Line, Line)] {
            let inc = pieces(&[a, Line], 1);
            let emg = pieces(&[Line, b], 2);
            let c = classify_crossing(&inc, &emg, theta, 1.0, 2.0).unwrap();
            assert!(!c.is_admissible(), "oblique line at {theta}");
            let same = classify_crossing(&inc, &emg, theta, 1.5, 1.5).unwrap();
            assert!(same.is_admissible(), "equal speeds allow any angle");
        }
    }
    let perp = classify_crossing(&pieces(&[CPlus, Line], 1), &pieces(&[Line, CMinus], 2), 0.0, 1.0, 2.0).unwrap();
    assert!(perp.is_admissible());
    assert!(classify_crossing(&pieces(&[Line], 1), &pieces(&[Line], 2), FRAC_PI_2 + 0.1, 1.0, 2.0).is_err());
}

#[test]
fn planner_line_arc_line_crossings_satisfy_both_laws() {
    let opts = PlannerOptions::default();
    let mut seen = 0;
    for v1 in presets::HALF_PLANE_SPEEDS {
        for s in [presets::half_planes_equal_rate(v1).unwrap(), presets::half_planes_fast_turn(v1).unwrap()] {
            let sol = plan_two_region(&s, &opts).unwrap();
            for rec in sol.crossings.iter().filter(|r| r.is_lcl()) {
                let p = s.map.region(rec.from).unwrap();
                let pp = s.map.region(rec.to).unwrap();
                let (rho_v, rho_r) = refraction_residuals(rec, p, pp).unwrap();
                assert!(rho_v.abs().max(rho_r.abs()) <= 1e-6, "v1 = {v1}: {rho_v:e} {rho_r:e}");
                seen += 1;
            }
        }
    }
    assert!(seen >= 4, "only {seen} line-arc-line crossings");
}
