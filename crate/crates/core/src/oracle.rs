//! Independent brute-force minimum-time search.
//!
//! Paths are described only as sequences of control classes
//! (`-u_max`, `0`, `+u_max`) with durations, simulated exactly through the
//! region map. The search enumerates class sequences and optimizes their
//! durations numerically; it shares nothing with the word-based solvers
//! except the closed-form propagation of [`crate::geometry`].

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{propagate, Configuration, Location, RegionId, RegionMap, SegmentKind};
use crate::numeric::golden;
use crate::path::PathSolution;
use crate::planner::Scenario;

/// Sign class of the angular-rate input; the magnitude follows the region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SignClass {
    Minus,
    Straight,
    Plus,
}

impl SignClass {
    pub const ALL: [SignClass; 3] = [SignClass::Minus, SignClass::Straight, SignClass::Plus];

    pub fn kind(self) -> SegmentKind {
        match self {
            SignClass::Minus => SegmentKind::CMinus,
            SignClass::Straight => SegmentKind::Line,
            SignClass::Plus => SegmentKind::CPlus,
        }
    }

    pub fn from_kind(kind: SegmentKind) -> Self {
        match kind {
            SegmentKind::CMinus => SignClass::Minus,
            SegmentKind::Line => SignClass::Straight,
            SegmentKind::CPlus => SignClass::Plus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlEntry {
    pub class: SignClass,
    pub duration: f64,
}

/// Piecewise-constant input: the class is held for each duration in turn.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlSchedule {
    pub entries: Vec<ControlEntry>,
}

impl ControlSchedule {
    pub fn new(entries: Vec<ControlEntry>) -> Result<Self> {
        for e in &entries {
            if !(e.duration >= 0.0) {
                return Err(Error::InvalidSchedule(format!("negative duration {}", e.duration)));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_pairs(pairs: &[(SignClass, f64)]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|&(class, duration)| ControlEntry { class, duration })
                .collect(),
        )
    }

    pub fn total_duration(&self) -> f64 {
        self.entries.iter().map(|e| e.duration).sum()
    }

    /// Concatenation of two schedules.
    pub fn then(&self, other: &ControlSchedule) -> ControlSchedule {
        let mut entries = self.entries.clone();
        entries.extend(other.entries.iter().copied());
        ControlSchedule { entries }
    }

    /// Replays a planned path: one entry per segment, adjacent equal classes merged.
    pub fn from_path(path: &PathSolution) -> Self {
        let mut entries: Vec<ControlEntry> = Vec::new();
        for seg in path.phases.iter().flat_map(|p| p.segments.iter()) {
            let class = SignClass::from_kind(seg.kind);
            match entries.last_mut() {
                Some(last) if last.class == class => last.duration += seg.duration,
                _ => entries.push(ControlEntry {
                    class,
                    duration: seg.duration,
                }),
            }
        }
        Self { entries }
    }
}

/// Region change detected during simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingEvent {
    pub t: f64,
    pub from: RegionId,
    pub to: RegionId,
    pub pose: Configuration,
}

/// Constant-input piece inside one region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimPiece {
    pub t0: f64,
    pub duration: f64,
    pub region: RegionId,
    pub class: SignClass,
    pub start: Configuration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub pieces: Vec<SimPiece>,
    pub crossings: Vec<CrossingEvent>,
    pub end: Configuration,
    pub end_region: RegionId,
    pub duration: f64,
}

impl Trajectory {
    /// Poses sampled `per_piece + 1` times along every piece.
    pub fn sample(&self, map: &RegionMap, per_piece: usize) -> Vec<(f64, RegionId, Configuration)> {
        let n = per_piece.max(1);
        let mut out = Vec::new();
        for p in &self.pieces {
            let region = map.region(p.region).expect("pieces reference map regions");
            for k in 0..=n {
                let dt = p.duration * k as f64 / n as f64;
                let c = propagate(&p.start, p.class.kind(), dt, region.v, region.u_max())
                    .expect("durations are non-negative");
                out.push((p.t0 + dt, p.region, c));
            }
        }
        out
    }
}

/// Integrates a schedule exactly through the region map.
///
/// At each boundary the speed and rate bound switch to the new region's
/// values while the input keeps its sign class.
pub fn simulate(start: &Configuration, sched: &ControlSchedule, map: &RegionMap) -> Result<Trajectory> {
    let mut q = match map.locate(start.position()) {
        Location::Region(q) => q,
        _ => return Err(Error::InvalidSchedule("start is not inside a region".into())),
    };
    let mut c = *start;
    let mut t = 0.0;
    let mut pieces = Vec::new();
    let mut crossings = Vec::new();
    for entry in &sched.entries {
        if !(entry.duration >= 0.0) {
            return Err(Error::NegativeDuration(entry.duration));
        }
        let mut left = entry.duration;
        let mut hops = 0;
        while left > 0.0 {
            let region = map.region(q).expect("located regions exist");
            let exit = region.first_exit(&c, entry.class.kind(), left);
            let dt = exit.map_or(left, |(te, _)| te);
            pieces.push(SimPiece {
                t0: t,
                duration: dt,
                region: q,
                class: entry.class,
                start: c,
            });
            c = propagate(&c, entry.class.kind(), dt, region.v, region.u_max())?;
            t += dt;
            left -= dt;
            let Some((_, edge)) = exit else {
                break;
            };
            let (a, b) = region.edges().nth(edge).expect("edge index from half_planes");
            let next = map.adjacency().iter().find_map(|adj| {
                let other = if adj.a == q {
                    adj.b
                } else if adj.b == q {
                    adj.a
                } else {
                    return None;
                };
                // The shared segment must lie on this edge and contain the exit point.
                let on_line = |p: crate::geometry::Point| {
                    let e = b.sub(a);
                    (e.cross(p.sub(a)) / e.norm()).abs() <= 1e-9
                };
                let p = c.position();
                let (f, g) = (adj.from, adj.to);
                let along = g.sub(f);
                let s = p.sub(f).dot(along) / along.dot(along);
                (on_line(f) && on_line(g) && (-1e-12..=1.0 + 1e-12).contains(&s)).then_some(other)
            });
            match next {
                Some(n) => {
                    crossings.push(CrossingEvent {
                        t,
                        from: q,
                        to: n,
                        pose: c,
                    });
                    q = n;
                }
                None => return Err(Error::LeftDomain { t }),
            }
            hops += 1;
            if hops > 10_000 {
                return Err(Error::InvalidSchedule("too many boundary events".into()));
            }
        }
    }
    Ok(Trajectory {
        pieces,
        crossings,
        end: c,
        end_region: q,
        duration: t,
    })
}

/// Result of the brute-force search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub time: f64,
    pub schedule: ControlSchedule,
    /// Endpoint mismatch of the returned schedule (max of length and angle error).
    pub mismatch: f64,
    pub sequences_tried: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleOptions {
    /// Endpoint mismatch accepted as a hit.
    pub match_tol: f64,
    /// Initial exterior-penalty weight per unit mismatch.
    pub penalty: f64,
    /// Grid points per sign sequence over the free durations.
    pub grid_points: usize,
    /// Grid points refined by coordinate golden-section search.
    pub refine_count: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            match_tol: 1e-4,
            penalty: 1e4,
            grid_points: 200,
            refine_count: 3,
        }
    }
}

fn mismatch(end: &Configuration, goal: &Configuration) -> Vector3<f64> {
    let dth = (end.theta - goal.theta).sin().atan2((end.theta - goal.theta).cos());
    Vector3::new(end.x - goal.x, end.y - goal.y, dth)
}

struct Problem<'a> {
    map: &'a RegionMap,
    start: Configuration,
    goal: Configuration,
    goal_region: RegionId,
    classes: Vec<SignClass>,
    /// Largest sweep time of a full turn over all regions.
    turn_time: f64,
    /// Slowest speed over all regions.
    v_min: f64,
}

impl Problem<'_> {
    /// Endpoint error, or `None` if the schedule leaves the map or ends in the wrong region.
    fn residual(&self, tau: &[f64]) -> Option<Vector3<f64>> {
        if tau.iter().any(|t| *t < 0.0) {
            return None;
        }
        let sched = ControlSchedule {
            entries: self
                .classes
                .iter()
                .zip(tau)
                .map(|(&class, &duration)| ControlEntry { class, duration })
                .collect(),
        };
        let traj = simulate(&self.start, &sched, self.map).ok()?;
        (traj.end_region == self.goal_region).then(|| mismatch(&traj.end, &self.goal))
    }

    /// Damped Newton on the last three durations with the others fixed.
    fn solve_tail(&self, tau: &mut [f64], init: &[f64; 3]) -> Option<f64> {
        let m = tau.len();
        let k0 = m - 3;
        tau[k0..].copy_from_slice(init);
        let mut r = self.residual(tau)?;
        let h = 1e-7;
        for _ in 0..40 {
            let size = r.amax();
            if size < 1e-11 {
                break;
            }
            let mut jac = Matrix3::zeros();
            for i in 0..3 {
                let mut tp = tau.to_vec();
                let mut tm = tau.to_vec();
                tp[k0 + i] += h;
                tm[k0 + i] = (tm[k0 + i] - h).max(0.0);
                let width = tp[k0 + i] - tm[k0 + i];
                let col = (self.residual(&tp)? - self.residual(&tm)?) / width;
                jac.set_column(i, &col);
            }
            let step = jac.lu().solve(&(-r))?;
            let mut alpha = 1.0;
            let mut moved = false;
            for _ in 0..12 {
                let mut trial = tau.to_vec();
                for i in 0..3 {
                    trial[k0 + i] = (trial[k0 + i] + alpha * step[i]).max(0.0);
                }
                if let Some(rt) = self.residual(&trial) {
                    if rt.amax() < size {
                        tau.copy_from_slice(&trial);
                        r = rt;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
        }
        Some(r.amax())
    }

    fn tail_inits(&self, remaining: f64) -> Vec<[f64; 3]> {
        let m = self.classes.len();
        let opts = |class: SignClass| -> Vec<f64> {
            match class {
                SignClass::Straight => vec![0.5 * remaining, 1.5 * remaining],
                _ => vec![0.2 * self.turn_time, 0.6 * self.turn_time],
            }
        };
        let c = &self.classes[m - 3..];
        let mut out = Vec::new();
        for a in opts(c[0]) {
            for b in opts(c[1]) {
                for d in opts(c[2]) {
                    out.push([a, b, d]);
                }
            }
        }
        out
    }

    /// Best tail for fixed leading durations: (total time, mismatch, durations).
    fn evaluate(&self, head: &[f64], warm: Option<&[f64; 3]>) -> Option<(f64, f64, Vec<f64>)> {
        let m = self.classes.len();
        let mut tau = vec![0.0; m];
        tau[..m - 3].copy_from_slice(head);
        let dist = self.start.position().dist(self.goal.position());
        let remaining = (dist / self.v_min).max(1e-3);
        let mut best: Option<(f64, f64, Vec<f64>)> = None;
        if let Some(w) = warm {
            if let Some(mis) = self.solve_tail(&mut tau, w) {
                keep_better(&mut best, &tau, mis);
            }
        }
        if best.as_ref().is_none_or(|b| b.1 > 1e-9) {
            for init in self.tail_inits(remaining) {
                if let Some(mis) = self.solve_tail(&mut tau, &init) {
                    keep_better(&mut best, &tau, mis);
                }
            }
        }
        best
    }
}

/// Keeps exact hits over misses, then the shorter hit or the smaller miss.
fn keep_better(best: &mut Option<(f64, f64, Vec<f64>)>, tau: &[f64], mis: f64) {
    let total: f64 = tau.iter().sum();
    let better = match best {
        None => true,
        Some((bt, bm, _)) => {
            let hit = mis < 1e-9;
            let bhit = *bm < 1e-9;
            (hit && !bhit) || (hit == bhit && if hit { total < *bt } else { mis < *bm })
        }
    };
    if better {
        *best = Some((total, mis, tau.to_vec()));
    }
}

/// All sign sequences of length `1..=k` with distinct neighbours, shortest first.
pub fn sign_sequences(k: usize) -> Vec<Vec<SignClass>> {
    let mut out: Vec<Vec<SignClass>> = Vec::new();
    let mut layer: Vec<Vec<SignClass>> = SignClass::ALL.iter().map(|&c| vec![c]).collect();
    for _ in 0..k {
        out.extend(layer.iter().cloned());
        layer = layer
            .iter()
            .flat_map(|s| {
                SignClass::ALL
                    .iter()
                    .filter(move |&&c| c != *s.last().expect("non-empty"))
                    .map(move |&c| {
                        let mut t = s.clone();
                        t.push(c);
                        t
                    })
            })
            .collect();
    }
    out
}

/// Brute-force minimum time over all sign sequences of at most `k` pieces.
pub fn brute_force_min_time(scenario: &Scenario, k: usize, opts: &OracleOptions) -> Result<OracleResult> {
    if k == 0 {
        return Err(Error::InvalidSchedule("need at least one piece".into()));
    }
    let map = &scenario.map;
    let turn_time = map
        .regions()
        .iter()
        .map(|r| TAU / r.u_max())
        .fold(0.0, f64::max);
    let v_min = map.regions().iter().map(|r| r.v).fold(f64::INFINITY, f64::min);
    let v_max = map.regions().iter().map(|r| r.v).fold(0.0, f64::max);
    let dist = scenario.start.position().dist(scenario.goal.position());
    let lower = dist / v_max;

    let mut best: Option<(f64, f64, Vec<SignClass>, Vec<f64>)> = None;
    let mut tried = 0;
    let seqs = sign_sequences(k);
    for classes in seqs {
        let m = classes.len();
        tried += 1;
        let incumbent = best.as_ref().map_or(f64::INFINITY, |b| b.0);
        if lower >= incumbent {
            continue;
        }
        let problem = Problem {
            map,
            start: scenario.start,
            goal: scenario.goal,
            goal_region: scenario.goal_region,
            classes: classes.clone(),
            turn_time,
            v_min,
        };
        let found = if m <= 3 {
            solve_short(&problem, dist / v_min)
        } else {
            solve_long(&problem, incumbent, lower, dist / v_min, opts)
        };
        if let Some((time, mis, tau)) = found {
            if mis < opts.match_tol && best.as_ref().is_none_or(|b| time < b.0 - 1e-12) {
                best = Some((time, mis, classes, tau));
            }
        }
    }
    let (time, mis, classes, tau) = best.ok_or(Error::NoFeasibleFound)?;
    let schedule = ControlSchedule {
        entries: classes
            .into_iter()
            .zip(tau)
            .map(|(class, duration)| ControlEntry { class, duration })
            .collect(),
    };
    Ok(OracleResult {
        time,
        schedule,
        mismatch: mis,
        sequences_tried: tried,
    })
}

/// Sequences of at most three pieces: root-solve from a grid of initial guesses.
fn solve_short(p: &Problem, straight_time: f64) -> Option<(f64, f64, Vec<f64>)> {
    let m = p.classes.len();
    let levels = |class: SignClass| -> Vec<f64> {
        match class {
            SignClass::Straight => vec![0.25, 0.75, 1.25, 2.0]
                .into_iter()
                .map(|f| f * straight_time.max(1e-3))
                .collect(),
            _ => vec![0.05, 0.25, 0.45, 0.65, 0.85]
                .into_iter()
                .map(|f| f * p.turn_time)
                .collect(),
        }
    };
    // Pad shorter sequences with leading zero-duration pieces of a fixed class.
    let mut classes = vec![SignClass::Straight; 3 - m];
    classes.extend(p.classes.iter().copied());
    let padded = Problem {
        map: p.map,
        start: p.start,
        goal: p.goal,
        goal_region: p.goal_region,
        classes,
        turn_time: p.turn_time,
        v_min: p.v_min,
    };
    let mut grids: Vec<Vec<f64>> = padded.classes.iter().map(|&c| levels(c)).collect();
    for g in grids.iter_mut().take(3 - m) {
        *g = vec![0.0];
    }
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for &a in &grids[0] {
        for &b in &grids[1] {
            for &c in &grids[2] {
                let mut tau = vec![0.0; 3];
                let fixed_lead = 3 - m;
                let init = [a, b, c];
                let Some(mis) = (if fixed_lead == 0 {
                    padded.solve_tail(&mut tau, &init)
                } else {
                    solve_partial(&padded, &mut tau, &init, fixed_lead)
                }) else {
                    continue;
                };
                if mis > 1e-9 {
                    continue;
                }
                let total: f64 = tau.iter().sum();
                if best.as_ref().is_none_or(|b| total < b.0) {
                    best = Some((total, mis, tau[fixed_lead..].to_vec()));
                }
            }
        }
    }
    best
}

/// Least-squares Newton on the free trailing durations when fewer than three
/// are free (the rest are pinned at zero).
fn solve_partial(p: &Problem, tau: &mut [f64], init: &[f64; 3], fixed: usize) -> Option<f64> {
    tau.copy_from_slice(init);
    let free: Vec<usize> = (fixed..3).collect();
    let mut r = p.residual(tau)?;
    let h = 1e-7;
    for _ in 0..60 {
        let size = r.amax();
        if size < 1e-11 {
            break;
        }
        let mut jac = nalgebra::DMatrix::zeros(3, free.len());
        for (c, &i) in free.iter().enumerate() {
            let mut tp = tau.to_vec();
            let mut tm = tau.to_vec();
            tp[i] += h;
            tm[i] = (tm[i] - h).max(0.0);
            let col = (p.residual(&tp)? - p.residual(&tm)?) / (tp[i] - tm[i]);
            for k in 0..3 {
                jac[(k, c)] = col[k];
            }
        }
        let rhs = nalgebra::DVector::from_iterator(3, r.iter().map(|v| -v));
        let step = jac.svd(true, true).solve(&rhs, 1e-14).ok()?;
        let mut alpha = 1.0;
        let mut moved = false;
        for _ in 0..12 {
            let mut trial = tau.to_vec();
            for (c, &i) in free.iter().enumerate() {
                trial[i] = (trial[i] + alpha * step[c]).max(0.0);
            }
            if let Some(rt) = p.residual(&trial) {
                if rt.amax() < size {
                    tau.copy_from_slice(&trial);
                    r = rt;
                    moved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Some(r.amax())
}

/// Longer sequences: grid over the leading durations, tail by Newton, then
/// coordinate golden-section refinement under an exterior penalty.
fn solve_long(
    p: &Problem,
    incumbent: f64,
    lower: f64,
    straight_time: f64,
    opts: &OracleOptions,
) -> Option<(f64, f64, Vec<f64>)> {
    let m = p.classes.len();
    let free = m - 3;
    let per_axis = ((opts.grid_points as f64).powf(1.0 / free as f64).floor() as usize).max(2);
    let upper = |class: SignClass| match class {
        SignClass::Straight => 2.0 * straight_time.max(1e-3),
        _ => p.turn_time,
    };
    let ranges: Vec<f64> = p.classes[..free].iter().map(|&c| upper(c)).collect();
    let total_pts = per_axis.pow(free as u32);
    let mut scored: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::new();
    // Neighbouring grid points usually share a tail solution.
    let mut warm: Option<[f64; 3]> = None;
    for idx in 0..total_pts {
        let mut rest = idx;
        let head: Vec<f64> = (0..free)
            .map(|i| {
                let k = rest % per_axis;
                rest /= per_axis;
                (k as f64 + 0.5) / per_axis as f64 * ranges[i]
            })
            .collect();
        let spent: f64 = head.iter().sum();
        if spent + lower >= incumbent {
            continue;
        }
        if let Some((total, mis, tau)) = p.evaluate(&head, warm.as_ref()) {
            warm = (mis < 1e-9).then(|| [tau[free], tau[free + 1], tau[free + 2]]);
            scored.push((total + opts.penalty * mis, head, tau));
        } else {
            warm = None;
        }
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    scored.truncate(opts.refine_count);
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for (_, head0, tau0) in scored {
        let mut weight = opts.penalty;
        let mut head = head0;
        let mut warm = [tau0[free], tau0[free + 1], tau0[free + 2]];
        let mut result = None;
        for _round in 0..3 {
            let mut step: Vec<f64> = ranges.iter().map(|r| r / per_axis as f64).collect();
            for _sweep in 0..5 {
                for i in 0..free {
                    let mut cost = |x: f64| {
                        let mut h = head.clone();
                        h[i] = x;
                        p.evaluate(&h, Some(&warm))
                            .map_or(f64::INFINITY, |(t, mis, _)| t + weight * mis)
                    };
                    let lo = (head[i] - step[i]).max(0.0);
                    let hi = head[i] + step[i];
                    let (x, fx) = golden(&mut cost, lo, hi, 16);
                    let here = cost(head[i]);
                    if fx < here {
                        head[i] = x;
                    }
                    if let Some((_, _, tau)) = p.evaluate(&head, Some(&warm)) {
                        warm = [tau[free], tau[free + 1], tau[free + 2]];
                    }
                }
                for s in &mut step {
                    *s *= 0.5;
                }
            }
            result = p.evaluate(&head, Some(&warm));
            match &result {
                Some((_, mis, _)) if *mis < opts.match_tol => break,
                // Escalate only when the endpoint is nearly reached.
                Some((_, mis, _)) if *mis < 100.0 * opts.match_tol => weight *= 10.0,
                _ => break,
            }
        }
        if let Some((t, mis, tau)) = result {
            if mis < opts.match_tol && best.as_ref().is_none_or(|b| t < b.0) {
                best = Some((t, mis, tau));
            }
        }
    }
    best
}
