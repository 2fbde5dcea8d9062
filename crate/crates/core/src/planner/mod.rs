//! Minimum-time planning across regions.
//!
//! For a fixed region sequence each crossing is parametrized by its position
//! along the shared edge and its heading relative to the edge normal. Given
//! those, every phase is an independent single-region problem solved by the
//! shortest contained word, so the total time is an explicit function of the
//! crossing parameters. That function is minimized by a multistart grid,
//! coordinate descent and a finite-difference Newton polish; straight
//! crossings between regions of different speed are searched separately with
//! the heading pinned to the normal. Crossings whose structure is one of the
//! known nonoptimal patterns are discarded.

mod route;
pub mod search;

use serde::{Deserialize, Serialize};

use nalgebra::{DMatrix, DVector};

use crate::dubins::Word;
use crate::numeric::golden;
use crate::error::{Error, Result};
use crate::geometry::{Configuration, RegionId, RegionMap, SegmentKind};
use crate::path::PathSolution;

pub use crate::path::path_time;
pub use route::Route;
use route::{assemble, shortest_within};
use search::{coordinate_descent, newton_polish, Bounds};

/// Samples per two-piece family of a one-crossing route.
const FAMILY_SAMPLES: usize = 48;

/// Planning problem: a region map plus start and goal poses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub map: RegionMap,
    pub start: Configuration,
    pub start_region: RegionId,
    pub goal: Configuration,
    pub goal_region: RegionId,
}

impl Scenario {
    /// Checks that start and goal lie in the interiors of their regions.
    pub fn new(
        map: RegionMap,
        start: Configuration,
        start_region: RegionId,
        goal: Configuration,
        goal_region: RegionId,
    ) -> Result<Self> {
        for (name, pose, id) in [("start", &start, start_region), ("goal", &goal, goal_region)] {
            let region = map
                .region(id)
                .ok_or_else(|| Error::InvalidScenario(format!("{name} region {id} does not exist")))?;
            if region.signed_distance(pose.position()) >= -crate::geometry::LOCATE_TOL {
                return Err(Error::InvalidScenario(format!(
                    "{name} ({}, {}) is not in the interior of region {id}",
                    pose.x, pose.y
                )));
            }
        }
        Ok(Self {
            map,
            start,
            start_region,
            goal,
            goal_region,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerOptions {
    /// Multistart grid points along each crossing edge (one-crossing routes).
    pub grid_s: usize,
    /// Multistart grid points over the crossing heading (one-crossing routes).
    pub grid_theta: usize,
    /// Coordinate descent stops once a sweep improves less than this.
    pub improvement_tol: f64,
    /// Cap on enumerated region sequences.
    pub max_sequences: usize,
    /// Total grid evaluations per route with several crossings.
    pub grid_budget: usize,
    /// Grid points refined by descent on routes with several crossings.
    pub multi_starts: usize,
    /// Distinct local minima polished per route.
    pub polish_count: usize,
    /// Allowed excursion of a phase outside its region.
    pub containment_tol: f64,
}

impl Default for PlannerOptions {
    fn default() -> Self {
        Self {
            grid_s: 16,
            grid_theta: 16,
            improvement_tol: 1e-9,
            max_sequences: 1000,
            grid_budget: 70_000,
            multi_starts: 32,
            polish_count: 6,
            containment_tol: 1e-9,
        }
    }
}

/// Local minimum of one route.
#[derive(Debug, Clone)]
struct Minimum {
    x: Vec<f64>,
    time: f64,
}

fn grid_sizes(route: &Route, opts: &PlannerOptions) -> Vec<usize> {
    let dim = route.dim();
    if route.crossings() == 1 {
        let mut n = vec![opts.grid_s];
        if dim == 2 {
            n.push(opts.grid_theta);
        }
        return n;
    }
    let per_axis = ((opts.grid_budget as f64).powf(1.0 / dim as f64).floor() as usize).clamp(2, 16);
    vec![per_axis; dim]
}

/// Multistart minimization of one route's time over its crossing parameters.
fn optimize_route(route: &Route, opts: &PlannerOptions) -> Vec<Minimum> {
    let dim = route.dim();
    let mut f = |x: &[f64]| route.time(x);
    if dim == 0 {
        let time = f(&[]);
        return if time.is_finite() {
            vec![Minimum { x: vec![], time }]
        } else {
            vec![]
        };
    }
    let bounds = route.bounds();
    let n = grid_sizes(route, opts);
    let mut scored: Vec<(f64, Vec<f64>)> = bounds
        .grid(&n)
        .into_iter()
        .map(|x| (f(&x), x))
        .filter(|(t, _)| t.is_finite())
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    if route.crossings() > 1 {
        scored.truncate(opts.multi_starts);
    }
    let steps: Vec<f64> = (0..dim).map(|i| bounds.width(i) / n[i] as f64).collect();
    let mut local: Vec<Minimum> = scored
        .iter()
        .map(|(_, x0)| {
            let (x, time) = coordinate_descent(&mut f, &bounds, x0, &steps, opts.improvement_tol, 1e-10);
            Minimum { x, time }
        })
        .collect();
    local.sort_by(|a, b| a.time.total_cmp(&b.time));
    let mut distinct: Vec<Minimum> = Vec::new();
    for m in local {
        let near = distinct.iter().any(|d| {
            (0..dim).all(|i| (d.x[i] - m.x[i]).abs() <= 1e-5 * bounds.width(i))
        });
        if !near {
            distinct.push(m);
        }
        if distinct.len() >= opts.polish_count {
            break;
        }
    }
    let mut out: Vec<Minimum> = distinct
        .into_iter()
        .map(|m| {
            let (x, time) = newton_polish(&mut f, &bounds, &m.x, 1e-5, 40);
            let m = snap_boundary_arcs(route, &bounds, Minimum { x, time }, opts);
            refine_refraction(route, &bounds, m.x, m.time)
        })
        .collect();
    out.extend(route.single_piece_pins().into_iter().filter_map(|x| {
        let time = f(&x);
        time.is_finite().then_some(Minimum { x, time })
    }));
    out.extend(
        route
            .two_piece_families()
            .into_iter()
            .filter_map(|family| family_minimum(route, family))
            .map(|m| snap_boundary_arcs(route, &bounds, m, opts)),
    );
    out
}

/// Samples along one two-piece family, then golden-section refinement
/// between the neighbours of the best sample.
fn family_minimum(route: &Route, family: (bool, SegmentKind, SegmentKind, f64)) -> Option<Minimum> {
    let reach = family.3;
    let h = reach / FAMILY_SAMPLES as f64;
    let mut time_at = |t: f64| {
        route
            .two_piece_point(family, t)
            .map_or(f64::INFINITY, |x| route.time(&x))
    };
    let (k, best) = (1..FAMILY_SAMPLES)
        .map(|k| (k, time_at(k as f64 * h)))
        .min_by(|a, b| a.1.total_cmp(&b.1))?;
    if !best.is_finite() {
        return None;
    }
    let (t, time) = golden(&mut time_at, (k - 1) as f64 * h, (k + 1) as f64 * h, 60);
    let (t, time) = if time <= best { (t, time) } else { (k as f64 * h, best) };
    let x = route.two_piece_point(family, t)?;
    Some(Minimum { x, time })
}

/// Newton iterations on the refraction residuals when every crossing is a
/// line-arc-line crossing; kept only if the time does not increase.
fn refine_refraction(route: &Route, bounds: &Bounds, x: Vec<f64>, time: f64) -> Minimum {
    let dim = x.len();
    let norm = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut best = Minimum { x, time };
    let Some(mut r) = route.refraction_vector(&best.x) else {
        return best;
    };
    if r.len() != dim {
        return best;
    }
    let structure = |x: &[f64]| -> Option<Vec<Vec<SegmentKind>>> {
        let sol = route.solution(x).ok()?;
        Some(
            sol.phases
                .iter()
                .map(|p| p.segments.iter().map(|s| s.kind).collect())
                .collect(),
        )
    };
    let shape = structure(&best.x);
    let h = 1e-7;
    for _ in 0..20 {
        if norm(&r) < 1e-13 {
            break;
        }
        let mut jac = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            let mut xp = best.x.clone();
            let mut xm = best.x.clone();
            xp[i] += h;
            xm[i] -= h;
            let (Some(rp), Some(rm)) = (route.refraction_vector(&xp), route.refraction_vector(&xm)) else {
                return best;
            };
            for k in 0..dim {
                jac[(k, i)] = (rp[k] - rm[k]) / (2.0 * h);
            }
        }
        let Some(dx) = jac.lu().solve(&DVector::from_column_slice(&r)) else {
            return best;
        };
        let mut y: Vec<f64> = (0..dim).map(|i| best.x[i] - dx[i]).collect();
        bounds.clamp(&mut y);
        let Some(ry) = route.refraction_vector(&y) else {
            return best;
        };
        let ty = route.time(&y);
        if norm(&ry) >= norm(&r) || ty > best.time + 1e-9 * (1.0 + best.time) || structure(&y) != shape {
            return best;
        }
        best = Minimum { x: y, time: ty };
        r = ry;
    }
    best
}

/// Boundary-adjacent arcs sweeping less than this are driven to zero, and
/// so are interior lines shorter than this many turning radii.
const TINY_SWEEP: f64 = 1e-3;

/// Solves `g_k(x) = 0` for the listed residuals by Gauss-Newton over `coords`.
fn solve_constraints<G>(g_all: &G, bounds: &Bounds, x0: &[f64], active: &[usize], coords: &[usize]) -> Option<Vec<f64>>
where
    G: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let g = |x: &[f64]| -> Option<Vec<f64>> {
        let all = g_all(x)?;
        Some(active.iter().map(|&k| all[k]).collect())
    };
    let mut x = x0.to_vec();
    let mut r = g(&x)?;
    let h = 1e-8;
    for _ in 0..30 {
        let size = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if size < 1e-13 {
            return Some(x);
        }
        let mut jac = DMatrix::zeros(active.len(), coords.len());
        for (c, &i) in coords.iter().enumerate() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let (gp, gm) = (g(&xp)?, g(&xm)?);
            for k in 0..active.len() {
                jac[(k, c)] = (gp[k] - gm[k]) / (2.0 * h);
            }
        }
        let dx = jac.svd(true, true).solve(&DVector::from_column_slice(&r), 1e-12).ok()?;
        let mut y = x.clone();
        for (c, &i) in coords.iter().enumerate() {
            y[i] -= dx[c];
        }
        bounds.clamp(&mut y);
        let ry = g(&y)?;
        let new_size = ry.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if new_size >= size {
            break;
        }
        x = y;
        r = ry;
    }
    let size = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    (size < 1e-11).then_some(x)
}

/// Removes nearly vanishing pieces: arcs at the crossings and lines between
/// opposite turns.
///
/// Where such a piece shrinks to zero the time has a kink or is almost flat,
/// so descent stops short and leaves a small spurious piece. Those pieces are
/// forced to zero exactly (lines through the signed discriminant of their
/// word) and the time is minimized over the remaining parameters; the result
/// replaces the input only if it is not slower.
fn snap_boundary_arcs(route: &Route, bounds: &Bounds, m: Minimum, opts: &PlannerOptions) -> Minimum {
    let Some(paths) = route.phase_paths(&m.x) else {
        return m;
    };
    let words: Vec<Word> = paths.iter().map(|p| p.word).collect();
    let g_all = |x: &[f64]| route.snap_residuals(x, &words);
    let Some(g0) = g_all(&m.x) else {
        return m;
    };
    let sweeps = 2 * route.crossings();
    let last = paths.len() - 1;
    // Pieces next to a crossing are covered by the boundary sweeps, and the
    // middle arc of a three-arc word never vanishes.
    let interior = |j: usize, i: usize| match i {
        0 => j == 0,
        1 => !words[j].is_ccc(),
        _ => j == last,
    };
    let active: Vec<usize> = (0..g0.len())
        .filter(|&k| {
            if k < sweeps {
                return g0[k].abs() < TINY_SWEEP;
            }
            let (j, i) = ((k - sweeps) / 3, (k - sweeps) % 3);
            let small = if i == 1 { g0[k].abs() < TINY_SWEEP * TINY_SWEEP } else { g0[k].abs() < TINY_SWEEP };
            interior(j, i) && small
        })
        .collect();
    if active.is_empty() || active.iter().all(|&k| k < sweeps && g0[k] == 0.0) {
        return m;
    }
    let d = m.x.len();
    let all: Vec<usize> = (0..d).collect();
    let snapped = if active.len() >= d {
        solve_constraints(&g_all, bounds, &m.x, &active, &all).map(|x| {
            let time = route.time(&x);
            Minimum { x, time }
        })
    } else {
        // Pick dependent coordinates by greedy pivoting on the Jacobian.
        let h = 1e-8;
        let mut jac = DMatrix::zeros(active.len(), d);
        for i in 0..d {
            let mut xp = m.x.clone();
            let mut xm = m.x.clone();
            xp[i] += h;
            xm[i] -= h;
            let (Some(gp), Some(gm)) = (g_all(&xp), g_all(&xm)) else {
                return m;
            };
            for (k, &a) in active.iter().enumerate() {
                jac[(k, i)] = (gp[a] - gm[a]) / (2.0 * h);
            }
        }
        let mut dependent = Vec::new();
        for k in 0..active.len() {
            let Some(col) = (0..d)
                .filter(|c| !dependent.contains(c))
                .max_by(|&a, &b| jac[(k, a)].abs().total_cmp(&jac[(k, b)].abs()))
            else {
                return m;
            };
            let pivot = jac[(k, col)];
            if pivot.abs() < 1e-12 {
                return m;
            }
            for k2 in (k + 1)..active.len() {
                let factor = jac[(k2, col)] / pivot;
                for c in 0..d {
                    jac[(k2, c)] -= factor * jac[(k, c)];
                }
            }
            dependent.push(col);
        }
        let free: Vec<usize> = (0..d).filter(|c| !dependent.contains(c)).collect();
        let Some(base) = solve_constraints(&g_all, bounds, &m.x, &active, &dependent) else {
            return m;
        };
        let lift = |xf: &[f64]| -> Option<Vec<f64>> {
            let mut x = base.clone();
            for (c, &i) in free.iter().enumerate() {
                x[i] = xf[c];
            }
            solve_constraints(&g_all, bounds, &x, &active, &dependent)
        };
        let mut f = |xf: &[f64]| lift(xf).map_or(f64::INFINITY, |x| route.time(&x));
        let sub = Bounds {
            lo: free.iter().map(|&i| bounds.lo[i]).collect(),
            hi: free.iter().map(|&i| bounds.hi[i]).collect(),
        };
        let xf0: Vec<f64> = free.iter().map(|&i| base[i]).collect();
        let steps: Vec<f64> = (0..free.len()).map(|c| 1e-3 * sub.width(c)).collect();
        let (xf, _) = coordinate_descent(&mut f, &sub, &xf0, &steps, opts.improvement_tol, 1e-12);
        let (xf, _) = newton_polish(&mut f, &sub, &xf, 1e-5, 20);
        lift(&xf).map(|x| {
            let time = route.time(&x);
            Minimum { x, time }
        })
    };
    // Snapping must not trade an admissible structure for a forbidden one:
    // the time is flat enough there that the two differ by rounding only.
    let ok = |x: &[f64]| route.solution(x).is_ok_and(|sol| admissible(&sol, route.map()));
    match snapped {
        Some(s) if s.time <= m.time + 1e-9 * (1.0 + m.time) && (ok(&s.x) || !ok(&m.x)) => s,
        _ => m,
    }
}

/// Candidate kept by the final selection.
struct Candidate {
    time: f64,
    /// Route signature, segment count and word; fewer segments win exact ties.
    key: (String, usize, String),
    solution: PathSolution,
}

fn pick_best(cands: Vec<Candidate>) -> Result<PathSolution> {
    let tmin = cands
        .iter()
        .map(|c| c.time)
        .fold(f64::INFINITY, f64::min);
    cands
        .into_iter()
        .filter(|c| c.time <= tmin + 1e-9 * (1.0 + tmin))
        .min_by(|a, b| a.key.cmp(&b.key))
        .map(|c| c.solution)
        .ok_or(Error::NoFeasiblePath)
}

/// True when some straight segment runs along an edge of its region.
pub fn runs_along_boundary(sol: &PathSolution, map: &RegionMap) -> bool {
    sol.phases.iter().any(|phase| {
        let Some(region) = map.region(phase.region) else {
            return false;
        };
        let knots = phase.knots();
        phase.segments.iter().enumerate().any(|(i, seg)| {
            if seg.kind != SegmentKind::Line || seg.duration * phase.v <= 1e-7 {
                return false;
            }
            let (a, b) = (knots[i].position(), knots[i + 1].position());
            region.half_planes().any(|(n, d)| {
                (n.dot(a) - d).abs() <= 1e-9 && (n.dot(b) - d).abs() <= 1e-9
            })
        })
    })
}

fn admissible(sol: &PathSolution, map: &RegionMap) -> bool {
    sol.crossings.iter().all(|c| c.classification.is_admissible()) && !runs_along_boundary(sol, map)
}

fn route_candidates(route: &Route, scenario: &Scenario, opts: &PlannerOptions) -> Vec<Candidate> {
    optimize_route(route, opts)
        .into_iter()
        .filter_map(|m| {
            let sol = route.solution(&m.x).ok()?;
            admissible(&sol, &scenario.map).then(|| Candidate {
                time: sol.total_time(),
                key: (
                    sol.route_signature(),
                    sol.phases.iter().map(|p| p.segments.len()).sum(),
                    sol.word(),
                ),
                solution: sol,
            })
        })
        .collect()
}

/// Routes for one region sequence: every crossing either free or pinned to
/// the boundary normal.
fn sequence_routes<'a>(scenario: &'a Scenario, seq: &[RegionId], opts: &PlannerOptions) -> Result<Vec<Route<'a>>> {
    let j = seq.len() - 1;
    (0..1usize << j)
        .map(|mask| {
            let perp = (0..j).map(|i| mask >> i & 1 == 1).collect();
            Route::new(
                &scenario.map,
                seq,
                perp,
                scenario.start,
                scenario.goal,
                opts.containment_tol,
            )
        })
        .collect()
}

/// Best path from start region to goal region with exactly one crossing.
pub fn plan_two_region(scenario: &Scenario, opts: &PlannerOptions) -> Result<PathSolution> {
    let (p, q) = (scenario.start_region, scenario.goal_region);
    if scenario.map.regions().len() != 2 || p == q || scenario.map.shared_edge(p, q).is_none() {
        return Err(Error::InvalidScenario(
            "two-region planning needs two adjacent regions with start and goal in different ones".into(),
        ));
    }
    let mut cands = Vec::new();
    for route in sequence_routes(scenario, &[p, q], opts)? {
        cands.extend(route_candidates(&route, scenario, opts));
    }
    pick_best(cands)
}

/// Region sequences from start to goal region with at most `max_crossings` crossings.
pub fn region_sequences(
    map: &RegionMap,
    from: RegionId,
    to: RegionId,
    max_crossings: usize,
    cap: usize,
) -> Result<Vec<Vec<RegionId>>> {
    let mut out = Vec::new();
    let mut stack = vec![from];
    fn walk(
        map: &RegionMap,
        stack: &mut Vec<RegionId>,
        to: RegionId,
        left: usize,
        cap: usize,
        out: &mut Vec<Vec<RegionId>>,
    ) -> Result<()> {
        let here = *stack.last().expect("walk starts non-empty");
        if here == to {
            if out.len() >= cap {
                return Err(Error::SequenceBudgetExceeded { cap });
            }
            out.push(stack.clone());
        }
        if left == 0 {
            return Ok(());
        }
        let mut next: Vec<RegionId> = map.neighbors(here).collect();
        next.sort();
        for n in next {
            stack.push(n);
            walk(map, stack, to, left - 1, cap, out)?;
            stack.pop();
        }
        Ok(())
    }
    walk(map, &mut stack, to, max_crossings, cap, &mut out)?;
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    Ok(out)
}

/// Best path over every region sequence with at most `max_crossings` crossings.
pub fn plan_multi_region(scenario: &Scenario, max_crossings: usize, opts: &PlannerOptions) -> Result<PathSolution> {
    let seqs = region_sequences(
        &scenario.map,
        scenario.start_region,
        scenario.goal_region,
        max_crossings,
        opts.max_sequences,
    )?;
    let mut cands = Vec::new();
    for seq in &seqs {
        for route in sequence_routes(scenario, seq, opts)? {
            cands.extend(route_candidates(&route, scenario, opts));
        }
    }
    pick_best(cands)
}

/// Shortest contained single-region path between the scenario poses.
pub fn plan_single_region(scenario: &Scenario, opts: &PlannerOptions) -> Result<PathSolution> {
    if scenario.start_region != scenario.goal_region {
        return Err(Error::InvalidScenario("start and goal are in different regions".into()));
    }
    let region = scenario
        .map
        .region(scenario.start_region)
        .ok_or(Error::NoFeasiblePath)?;
    let path = shortest_within(&scenario.start, &scenario.goal, region, opts.containment_tol)
        .ok_or(Error::NoFeasiblePath)?;
    assemble(&scenario.map, &[region], &[path])
}
