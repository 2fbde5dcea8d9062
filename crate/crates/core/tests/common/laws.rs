//! Property checks shared by the property suite and the acceptance run.
#![allow(dead_code)]

use std::f64::consts::PI;

use hetdubins::dubins::solve_dubins;
use hetdubins::geometry::{angle_diff, from_boundary_frame, propagate, to_boundary_frame, BoundaryFrame};
use hetdubins::planner::{plan_two_region, PlannerOptions};
use hetdubins::{Configuration, SegmentKind};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::common::{rel, TwoRegion};

pub fn pose(extent: f64) -> impl Strategy<Value = Configuration> {
    (-extent..extent, -extent..extent, -PI..PI).prop_map(|(x, y, t)| Configuration::new(x, y, t))
}

pub fn kind() -> impl Strategy<Value = SegmentKind> {
    prop_oneof![Just(SegmentKind::CMinus), Just(SegmentKind::CPlus), Just(SegmentKind::Line)]
}

/// Speed and angular-rate bound.
pub fn vehicle() -> impl Strategy<Value = (f64, f64)> {
    (0.1f64..5.0, 0.1f64..5.0)
}

fn close(a: &Configuration, b: &Configuration, tol: f64) -> bool {
    a.position_error(b) <= tol && angle_diff(a.theta, b.theta).abs() <= tol
}

pub fn propagate_additive(
    c: Configuration,
    k: SegmentKind,
    t1: f64,
    t2: f64,
    (v, u): (f64, f64),
) -> Result<(), TestCaseError> {
    let whole = propagate(&c, k, t1 + t2, v, u).unwrap();
    let split = propagate(&propagate(&c, k, t1, v, u).unwrap(), k, t2, v, u).unwrap();
    let tol = 1e-12 * (1.0 + c.position().norm() + v * (t1 + t2));
    prop_assert!(close(&whole, &split, tol), "{whole:?} vs {split:?}");
    Ok(())
}

fn rk4(c: &Configuration, u: f64, v: f64, t: f64, steps: usize) -> Configuration {
    let f = |s: [f64; 3]| [v * s[2].sin(), v * s[2].cos(), u];
    let h = t / steps as f64;
    let mut s = [c.x, c.y, c.theta];
    for _ in 0..steps {
        let k1 = f(s);
        let at = |k: [f64; 3], a: f64| [s[0] + a * k[0], s[1] + a * k[1], s[2] + a * k[2]];
        let k2 = f(at(k1, h / 2.0));
        let k3 = f(at(k2, h / 2.0));
        let k4 = f(at(k3, h));
        for i in 0..3 {
            s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    Configuration::new(s[0], s[1], s[2])
}

pub fn propagate_matches_integration(
    c: Configuration,
    k: SegmentKind,
    t: f64,
    (v, u): (f64, f64),
) -> Result<(), TestCaseError> {
    let exact = propagate(&c, k, t, v, u).unwrap();
    let numeric = rk4(&c, k.turn_sign() * u, v, t, 2000);
    prop_assert!(close(&exact, &numeric, 1e-8), "{exact:?} vs {numeric:?}");
    Ok(())
}

pub fn propagate_mirror(c: Configuration, k: SegmentKind, t: f64, (v, u): (f64, f64)) -> Result<(), TestCaseError> {
    let a = propagate(&c, k, t, v, u).unwrap().mirrored();
    let b = propagate(&c.mirrored(), k.mirrored(), t, v, u).unwrap();
    prop_assert!(close(&a, &b, 1e-12 * (1.0 + c.position().norm() + v * t)), "{a:?} vs {b:?}");
    Ok(())
}

pub fn frame_round_trip(c: Configuration, anchor: Configuration) -> Result<(), TestCaseError> {
    let f = BoundaryFrame::new(anchor.position(), anchor.theta);
    let back = from_boundary_frame(&to_boundary_frame(&c, &f), &f);
    let forth = to_boundary_frame(&from_boundary_frame(&c, &f), &f);
    prop_assert!(close(&back, &c, 1e-12 * (1.0 + c.position().norm() + anchor.position().norm())));
    prop_assert!(close(&forth, &c, 1e-12 * (1.0 + c.position().norm() + anchor.position().norm())));
    Ok(())
}

/// Endpoint accuracy, the Euclidean lower bound, rigid-motion invariance and
/// linear scaling of the shortest word.
pub fn dubins_laws(a: Configuration, b: Configuration, r: f64, motion: Configuration, k: f64) -> Result<(), TestCaseError> {
    let p = solve_dubins(&a, &b, r).expect("some word always exists");
    let end = p.endpoint();
    prop_assert!(end.position_error(&b) <= 1e-9 * (1.0 + r));
    prop_assert!(end.heading_error(&b) <= 1e-9);
    prop_assert!(p.length() >= a.position().dist(b.position()) - 1e-12);

    let (s, c) = motion.theta.sin_cos();
    let place = |q: &Configuration| {
        Configuration::new(c * q.x - s * q.y + motion.x, s * q.x + c * q.y + motion.y, q.theta - motion.theta)
    };
    let moved = solve_dubins(&place(&a), &place(&b), r).unwrap();
    prop_assert!(rel(moved.length(), p.length()) <= 1e-9, "{} vs {}", moved.length(), p.length());

    let sc = |q: &Configuration| Configuration::new(q.x * k, q.y * k, q.theta);
    let scaled = solve_dubins(&sc(&a), &sc(&b), r * k).unwrap();
    prop_assert!(rel(scaled.length(), k * p.length()) <= 1e-9);
    Ok(())
}

/// Random two-region instance from a seed.
pub fn two_region(seed: u64) -> TwoRegion {
    TwoRegion::random(&mut ChaCha8Rng::seed_from_u64(seed), false)
}

/// Scaling, speed and mirror laws plus speed monotonicity of the planner on
/// one instance.
pub fn planner_laws(seed: u64, k: f64, faster: usize) -> Result<(), TestCaseError> {
    let opts = PlannerOptions::default();
    let tr = two_region(seed);
    let plan = |t: &TwoRegion| plan_two_region(&t.scenario(), &opts).map(|p| p.total_time());
    let base = plan(&tr).unwrap();

    let scaled = plan(&tr.scaled(k)).unwrap();
    prop_assert!(rel(scaled, k * base) <= 1e-6, "scaling: {scaled} vs {}", k * base);

    let sped = plan(&tr.sped(k)).unwrap();
    prop_assert!(rel(sped, base / k) <= 1e-6, "speed: {sped} vs {}", base / k);

    let mirrored = plan(&tr.mirrored()).unwrap();
    prop_assert!(rel(mirrored, base) <= 1e-6, "mirror: {mirrored} vs {base}");

    let mut quicker = tr.clone();
    quicker.v[faster] *= 1.0 + k;
    let t = plan(&quicker).unwrap();
    prop_assert!(t <= base * (1.0 + 1e-6), "monotonicity: {t} > {base}");
    Ok(())
}

pub fn scale() -> impl Strategy<Value = f64> {
    0.2f64..5.0
}
