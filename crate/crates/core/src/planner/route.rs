//! A fixed region sequence with its crossings parametrized by arclength along
//! each shared edge and heading relative to the edge normal.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::dubins::{compare_candidates, enumerate_words, signed_pieces, DubinsPath, Word};
use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, propagate, Configuration, Point, Region, RegionId, RegionMap, SegmentKind};
use crate::path::{PathSolution, Phase, Segment};
use crate::refraction::{refraction_residuals, CrossingRecord};

use super::search::Bounds;

/// Crossings closer than this fraction of the edge length to a vertex are excluded.
const VERTEX_MARGIN: f64 = 1e-6;
/// Crossing headings stay this far from grazing the boundary.
const GRAZE_MARGIN: f64 = 1e-6;
/// Target squared length (negated) of snapped lines; well inside the 1e-10
/// slack with which a word with a vanishing line is still accepted.
const LINE_SNAP_DEPTH: f64 = 1e-12;

#[derive(Debug, Clone)]
struct Edge {
    from: Point,
    tangent: Point,
    /// Standard-math angle of the tangent.
    phi: f64,
    length: f64,
}

/// Evaluator for one region sequence and one choice of which crossings are
/// constrained to the boundary normal.
#[derive(Debug, Clone)]
pub struct Route<'a> {
    map: &'a RegionMap,
    regions: Vec<&'a Region>,
    edges: Vec<Edge>,
    perpendicular: Vec<bool>,
    start: Configuration,
    goal: Configuration,
    tol: f64,
}

impl<'a> Route<'a> {
    pub fn new(
        map: &'a RegionMap,
        sequence: &[RegionId],
        perpendicular: Vec<bool>,
        start: Configuration,
        goal: Configuration,
        tol: f64,
    ) -> Result<Self> {
        let regions = sequence
            .iter()
            .map(|&q| {
                map.region(q)
                    .ok_or_else(|| Error::InvalidScenario(format!("unknown region {q}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let edges = sequence
            .windows(2)
            .map(|w| {
                let adj = map.shared_edge(w[0], w[1]).ok_or_else(|| {
                    Error::InvalidScenario(format!("regions {} and {} are not adjacent", w[0], w[1]))
                })?;
                let (from, to) = adj.oriented_towards(w[1]);
                let e = to.sub(from);
                let length = e.norm();
                Ok(Edge {
                    from,
                    tangent: e.scale(1.0 / length),
                    phi: e.y.atan2(e.x),
                    length,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        assert_eq!(perpendicular.len(), edges.len());
        Ok(Self {
            map,
            regions,
            edges,
            perpendicular,
            start,
            goal,
            tol,
        })
    }

    pub fn map(&self) -> &'a RegionMap {
        self.map
    }

    pub fn crossings(&self) -> usize {
        self.edges.len()
    }

    pub fn sequence(&self) -> Vec<RegionId> {
        self.regions.iter().map(|r| r.id).collect()
    }

    pub fn perpendicular(&self) -> &[bool] {
        &self.perpendicular
    }

    pub fn dim(&self) -> usize {
        self.perpendicular.iter().map(|&p| if p { 1 } else { 2 }).sum()
    }

    /// Parameter box: arclength per crossing, then heading unless constrained.
    pub fn bounds(&self) -> Bounds {
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for (e, &perp) in self.edges.iter().zip(&self.perpendicular) {
            lo.push(VERTEX_MARGIN * e.length);
            hi.push((1.0 - VERTEX_MARGIN) * e.length);
            if !perp {
                lo.push(-FRAC_PI_2 + GRAZE_MARGIN);
                hi.push(FRAC_PI_2 - GRAZE_MARGIN);
            }
        }
        Bounds { lo, hi }
    }

    /// World poses at the crossings for parameter vector `x`.
    pub fn crossing_poses(&self, x: &[f64]) -> Vec<Configuration> {
        let mut k = 0;
        self.edges
            .iter()
            .zip(&self.perpendicular)
            .map(|(e, &perp)| {
                let s = x[k];
                k += 1;
                let theta = if perp {
                    0.0
                } else {
                    k += 1;
                    x[k - 1]
                };
                let p = e.from.add(e.tangent.scale(s));
                Configuration::new(p.x, p.y, theta - e.phi)
            })
            .collect()
    }

    fn waypoints(&self, x: &[f64]) -> Vec<Configuration> {
        let mut w = Vec::with_capacity(self.edges.len() + 2);
        w.push(self.start);
        w.extend(self.crossing_poses(x));
        w.push(self.goal);
        w
    }

    /// Crossing parameters of a world pose lying on the single edge, if the
    /// pose is on the edge and inside the parameter box.
    fn pose_params(&self, c: &Configuration) -> Option<Vec<f64>> {
        let e = &self.edges[0];
        let rel = c.position().sub(e.from);
        if e.tangent.cross(rel).abs() > 1e-9 * (1.0 + e.length) {
            return None;
        }
        let x = vec![e.tangent.dot(rel), normalize_angle(c.theta + e.phi)];
        let bounds = self.bounds();
        (0..2).all(|i| (bounds.lo[i]..=bounds.hi[i]).contains(&x[i])).then_some(x)
    }

    fn one_crossing_free(&self) -> bool {
        self.edges.len() == 1 && !self.perpendicular[0]
    }

    /// Pose `kind` runs into the boundary from `c` inside `region`, reversed
    /// back to forward time when `backward` is set.
    fn exit_pose(&self, region: &Region, c: &Configuration, kind: SegmentKind, backward: bool) -> Option<Configuration> {
        let (t, _) = region.first_exit(c, kind, f64::INFINITY)?;
        let end = propagate(c, kind, t, region.v, region.u_max()).ok()?;
        Some(if backward { reversed(&end) } else { end })
    }

    /// Crossing parameters reached by one piece straight from the start or,
    /// run backwards, from the goal. Only one-crossing routes with a free
    /// heading have such isolated points; the descent cannot resolve them
    /// because the time has a kink there.
    pub fn single_piece_pins(&self) -> Vec<Vec<f64>> {
        if !self.one_crossing_free() {
            return Vec::new();
        }
        let (first, last) = (self.regions[0], self.regions[1]);
        let back = reversed(&self.goal);
        let mut out = Vec::new();
        for kind in [SegmentKind::CMinus, SegmentKind::CPlus, SegmentKind::Line] {
            let fwd = self.exit_pose(first, &self.start, kind, false);
            let bwd = self.exit_pose(last, &back, kind.mirrored(), true);
            out.extend([fwd, bwd].into_iter().flatten().filter_map(|c| self.pose_params(&c)));
        }
        out
    }

    /// Two-piece families for one-crossing routes: from the start (or back
    /// from the goal) a piece `a` of some duration, then a piece `b` until the
    /// boundary. Each family is a curve in parameter space along which the
    /// time has a kink; optima with a boundary-spanning piece lie on one.
    /// Returns `(backward, a, b, max duration of a)`.
    pub fn two_piece_families(&self) -> Vec<(bool, SegmentKind, SegmentKind, f64)> {
        if !self.one_crossing_free() {
            return Vec::new();
        }
        let kinds = [SegmentKind::CMinus, SegmentKind::CPlus, SegmentKind::Line];
        let mut out = Vec::new();
        for backward in [false, true] {
            let (region, c) = self.family_origin(backward);
            for a in kinds {
                let ak = if backward { a.mirrored() } else { a };
                let full = if a == SegmentKind::Line { f64::INFINITY } else { 2.0 * PI / region.u_max() };
                let reach = region.first_exit(&c, ak, full).map_or(full, |(t, _)| t);
                if !reach.is_finite() {
                    continue;
                }
                out.extend(kinds.iter().filter(|&&b| b != a).map(|&b| (backward, a, b, reach)));
            }
        }
        out
    }

    fn family_origin(&self, backward: bool) -> (&'a Region, Configuration) {
        if backward {
            (self.regions[1], reversed(&self.goal))
        } else {
            (self.regions[0], self.start)
        }
    }

    /// Point of a two-piece family at duration `t` of its first piece.
    pub fn two_piece_point(&self, family: (bool, SegmentKind, SegmentKind, f64), t: f64) -> Option<Vec<f64>> {
        let (backward, a, b, _) = family;
        let (region, c) = self.family_origin(backward);
        let (a, b) = if backward { (a.mirrored(), b.mirrored()) } else { (a, b) };
        let mid = propagate(&c, a, t, region.v, region.u_max()).ok()?;
        self.pose_params(&self.exit_pose(region, &mid, b, backward)?)
    }

    /// Shortest contained word for every phase, or `None` if a phase has none.
    pub fn phase_paths(&self, x: &[f64]) -> Option<Vec<DubinsPath>> {
        let w = self.waypoints(x);
        self.regions
            .iter()
            .enumerate()
            .map(|(j, region)| shortest_within(&w[j], &w[j + 1], region, self.tol))
            .collect()
    }

    /// Total time, infinite when some phase is infeasible.
    pub fn time(&self, x: &[f64]) -> f64 {
        let w = self.waypoints(x);
        let mut total = 0.0;
        for (j, region) in self.regions.iter().enumerate() {
            match shortest_within(&w[j], &w[j + 1], region, self.tol) {
                Some(p) => total += p.length() / region.v,
                None => return f64::INFINITY,
            }
        }
        total
    }

    /// Full solution with crossing records.
    pub fn solution(&self, x: &[f64]) -> Result<PathSolution> {
        let paths = self.phase_paths(x).ok_or(Error::NoFeasiblePath)?;
        assemble(self.map, &self.regions, &paths)
    }

    /// Signed sweeps of the arcs touching each crossing, `[end of phase j,
    /// start of phase j + 1]` per crossing (zero where the adjacent piece is a line).
    pub fn boundary_sweeps(&self, x: &[f64]) -> Option<Vec<f64>> {
        let paths = self.phase_paths(x)?;
        let sweep = |p: Option<(crate::geometry::SegmentKind, f64)>, r: f64| match p {
            Some((k, l)) => k.turn_sign() * l / r,
            None => 0.0,
        };
        let mut out = Vec::with_capacity(2 * self.edges.len());
        for j in 0..self.edges.len() {
            let (a, b) = (&paths[j], &paths[j + 1]);
            out.push(sweep(a.pieces().last().copied(), a.r));
            out.push(sweep(b.pieces().first().copied(), b.r));
        }
        Some(out)
    }

    /// Boundary sweeps followed by the signed pieces of each phase's word
    /// in `words`, three entries per phase.
    ///
    /// Line entries are offset so that their zero lies at a squared length of
    /// `-LINE_SNAP_DEPTH`: a root found to rounding accuracy then clamps to a
    /// line of length exactly zero while the word still exists.
    pub fn snap_residuals(&self, x: &[f64], words: &[Word]) -> Option<Vec<f64>> {
        let mut out = self.boundary_sweeps(x)?;
        let w = self.waypoints(x);
        for (j, word) in words.iter().enumerate() {
            let [a, mid, b] = signed_pieces(*word, &w[j], &w[j + 1], self.regions[j].r)?;
            let mid = if word.is_ccc() { mid } else { mid + LINE_SNAP_DEPTH };
            out.extend([a, mid, b]);
        }
        Some(out)
    }

    /// Refraction residuals at every crossing, when all apply.
    pub fn refraction_vector(&self, x: &[f64]) -> Option<Vec<f64>> {
        let sol = self.solution(x).ok()?;
        let mut out = Vec::new();
        for rec in &sol.crossings {
            if !rec.is_lcl() {
                return None;
            }
            let p = self.map.region(rec.from)?;
            let q = self.map.region(rec.to)?;
            let (rv, rr) = refraction_residuals(rec, p, q).ok()?;
            out.push(rv);
            out.push(rr);
        }
        Some(out)
    }
}

/// Shortest word connecting the poses that stays inside `region`.
pub(crate) fn shortest_within(
    a: &Configuration,
    b: &Configuration,
    region: &Region,
    tol: f64,
) -> Option<DubinsPath> {
    let mut cands = enumerate_words(a, b, region.r);
    cands.sort_by(compare_candidates);
    cands.into_iter().find(|c| c.excursion(region) <= tol)
}

/// Builds a [`PathSolution`] from per-phase words.
pub(crate) fn assemble(map: &RegionMap, regions: &[&Region], paths: &[DubinsPath]) -> Result<PathSolution> {
    let phases: Vec<Phase> = regions
        .iter()
        .zip(paths)
        .map(|(region, p)| {
            let segments = p
                .pieces()
                .into_iter()
                .map(|(kind, l)| Segment {
                    kind,
                    duration: l / region.v,
                    region: region.id,
                })
                .collect();
            Phase::new(region, p.start, segments)
        })
        .collect();
    let mut sol = PathSolution::from_phases(phases, Vec::new());
    let crossings = sol
        .phases
        .windows(2)
        .map(|w| CrossingRecord::between(&w[0], &w[1], map))
        .collect::<Result<Vec<_>>>()?;
    sol.crossings = crossings;
    Ok(sol)
}

/// Same pose facing the opposite way, for running pieces backwards in time.
fn reversed(c: &Configuration) -> Configuration {
    Configuration::new(c.x, c.y, c.theta + PI)
}
