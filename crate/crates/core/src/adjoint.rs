//! Adjoint reconstruction and necessary-condition grading.
//!
//! Within a phase the costates `(lambda_x, lambda_y)` are constant and
//! `lambda_theta` is affine in position:
//! `lambda_theta = lambda_y (x - x_j) - lambda_x (y - y_j) + lambda_theta(start of phase)`.
//! At a crossing `lambda_theta` is continuous and `(lambda_x, lambda_y)` may
//! jump only along the boundary normal. The unknowns are therefore the
//! initial costate, one jump per crossing and the initial `lambda_theta`,
//! fixed by linear conditions: `lambda_theta` vanishes along every straight
//! segment and at every arc-to-arc switch, and the Hamiltonian is zero on
//! every segment (free final time, `lambda_0 = 1`).

use serde::{Deserialize, Serialize};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{Configuration, Point, Region, RegionId, SegmentKind};
use crate::path::PathSolution;
use crate::planner::{runs_along_boundary, Scenario};
use crate::refraction::{check_star_case, refraction_residuals, MIN_PIECE_LENGTH};

/// Costate sample `(lambda_x, lambda_y, lambda_theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AdjointSample {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

/// `H = lambda_x v sin(theta) + lambda_y v cos(theta) + lambda_theta u - lambda_0`.
pub fn hamiltonian(xi: &Configuration, lambda: &AdjointSample, lambda0: f64, u: f64, region: &Region) -> f64 {
    let v = region.v;
    lambda.x * v * xi.theta.sin() + lambda.y * v * xi.theta.cos() + lambda.theta * u - lambda0
}

/// Costate on one phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdjointPhase {
    pub region: RegionId,
    pub lambda_x: f64,
    pub lambda_y: f64,
    /// Reference point (the phase's first pose) for `lambda_theta`.
    pub origin: Point,
    /// `lambda_theta` at the start of the phase.
    pub lambda_theta_start: f64,
}

impl AdjointPhase {
    pub fn lambda_theta(&self, p: Point) -> f64 {
        self.lambda_theta_start + self.lambda_y * (p.x - self.origin.x) - self.lambda_x * (p.y - self.origin.y)
    }

    pub fn sample(&self, p: Point) -> AdjointSample {
        AdjointSample {
            x: self.lambda_x,
            y: self.lambda_y,
            theta: self.lambda_theta(p),
        }
    }
}

/// Reconstructed adjoint pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjointTrajectory {
    pub phases: Vec<AdjointPhase>,
    /// Jump of the costate along the boundary normal at each crossing.
    pub jumps: Vec<f64>,
    pub lambda0: f64,
    /// Hamiltonian constant imposed by the reconstruction.
    pub c: f64,
    /// Largest least-squares residual of the defining conditions.
    pub residual: f64,
    /// The conditions also admit a nonzero costate with `lambda_0 = 0`.
    pub abnormal: bool,
}

impl AdjointTrajectory {
    /// `lambda_x` on the first phase; constant across crossings whose
    /// boundary is horizontal.
    pub fn lambda_x_bar(&self) -> f64 {
        self.phases.first().map_or(0.0, |p| p.lambda_x)
    }
}

/// Significant segment with its start pose.
struct Piece {
    phase: usize,
    kind: SegmentKind,
    start: Configuration,
    end: Configuration,
    u: f64,
    v: f64,
}

fn pieces(p: &PathSolution) -> Vec<Piece> {
    let mut out = Vec::new();
    for (j, phase) in p.phases.iter().enumerate() {
        let knots = phase.knots();
        for (i, seg) in phase.segments.iter().enumerate() {
            if seg.duration * phase.v <= MIN_PIECE_LENGTH {
                continue;
            }
            out.push(Piece {
                phase: j,
                kind: seg.kind,
                start: knots[i],
                end: knots[i + 1],
                u: phase.input(seg.kind),
                v: phase.v,
            });
        }
    }
    out
}

/// Linear model: each phase's costate and `lambda_theta` start value as
/// coefficient rows over the unknowns `[lx0, ly0, mu_1.., lth0]`.
struct Model {
    n: usize,
    lx: Vec<DVector<f64>>,
    ly: Vec<DVector<f64>>,
    th: Vec<DVector<f64>>,
    origin: Vec<Point>,
}

impl Model {
    fn new(p: &PathSolution) -> Self {
        let jn = p.crossings.len();
        let n = 3 + jn;
        let mut lx = vec![DVector::zeros(n)];
        let mut ly = vec![DVector::zeros(n)];
        let mut th = vec![DVector::zeros(n)];
        lx[0][0] = 1.0;
        ly[0][1] = 1.0;
        th[0][n - 1] = 1.0;
        let origin: Vec<Point> = p.phases.iter().map(|ph| ph.start.position()).collect();
        for j in 1..p.phases.len() {
            let normal = p.crossings[j - 1].frame.normal();
            let mut x = lx[j - 1].clone();
            let mut y = ly[j - 1].clone();
            x[1 + j] += normal.x;
            y[1 + j] += normal.y;
            let end = p.phases[j - 1].end().position();
            let d = end.sub(origin[j - 1]);
            let t = &th[j - 1] + &ly[j - 1] * d.x - &lx[j - 1] * d.y;
            lx.push(x);
            ly.push(y);
            th.push(t);
        }
        Self { n, lx, ly, th, origin }
    }

    fn lambda_theta(&self, j: usize, p: Point) -> DVector<f64> {
        let d = p.sub(self.origin[j]);
        &self.th[j] + &self.ly[j] * d.x - &self.lx[j] * d.y
    }
}

/// Least-squares adjoint for `p`, without judging the residual.
pub fn solve_adjoint(p: &PathSolution) -> AdjointTrajectory {
    let model = Model::new(p);
    let n = model.n;
    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    let ps = pieces(p);
    for (k, piece) in ps.iter().enumerate() {
        let j = piece.phase;
        // Hamiltonian zero: v (lx sin + ly cos) + u lth = 1.
        let th = model.lambda_theta(j, piece.start.position());
        let row = &model.lx[j] * (piece.v * piece.start.theta.sin())
            + &model.ly[j] * (piece.v * piece.start.theta.cos())
            + th * piece.u;
        rows.push((row, 1.0));
        if piece.kind == SegmentKind::Line {
            rows.push((model.lambda_theta(j, piece.start.position()), 0.0));
            rows.push((model.lambda_theta(j, piece.end.position()), 0.0));
        } else if let Some(next) = ps.get(k + 1) {
            if next.kind.is_arc() && next.kind != piece.kind {
                rows.push((model.lambda_theta(next.phase, next.start.position()), 0.0));
            }
        }
    }
    let m = rows.len();
    let mut a = DMatrix::zeros(m, n);
    let mut b = DVector::zeros(m);
    for (i, (row, rhs)) in rows.iter().enumerate() {
        a.set_row(i, &row.transpose());
        b[i] = *rhs;
    }
    let svd = a.clone().svd(true, true);
    let z = svd
        .solve(&b, 1e-12 * svd.singular_values.max().max(1.0))
        .unwrap_or_else(|_| DVector::zeros(n));
    let residual = if m == 0 { 0.0 } else { (&a * &z - &b).amax() };
    // A costate with lambda_0 = 0 exists when the homogeneous system has a null vector.
    let smax = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-9 * smax.max(1e-300)).count();
    let abnormal = m > 0 && rank < n;
    let phases = (0..p.phases.len())
        .map(|j| AdjointPhase {
            region: p.phases[j].region,
            lambda_x: model.lx[j].dot(&z),
            lambda_y: model.ly[j].dot(&z),
            origin: model.origin[j],
            lambda_theta_start: model.th[j].dot(&z),
        })
        .collect();
    AdjointTrajectory {
        phases,
        jumps: (0..p.crossings.len()).map(|j| z[2 + j]).collect(),
        lambda0: 1.0,
        c: 0.0,
        residual,
        abnormal,
    }
}

/// Default reconstruction tolerance.
pub const RECONSTRUCTION_TOL: f64 = 1e-6;

/// Reconstructs the adjoint pair with `lambda_0 = 1`.
pub fn reconstruct_adjoint(p: &PathSolution, s: &Scenario) -> Result<AdjointTrajectory> {
    reconstruct_adjoint_with(p, s, RECONSTRUCTION_TOL)
}

pub fn reconstruct_adjoint_with(p: &PathSolution, s: &Scenario, tolerance: f64) -> Result<AdjointTrajectory> {
    if p.phases.is_empty() || p.crossings.len() + 1 != p.phases.len() {
        return Err(Error::MalformedSubpath("path has no phases or inconsistent crossings".into()));
    }
    for phase in &p.phases {
        if s.map.region(phase.region).is_none() {
            return Err(Error::MalformedSubpath(format!("phase in unknown region {}", phase.region)));
        }
    }
    let adj = solve_adjoint(p);
    if adj.residual > tolerance {
        return Err(Error::ReconstructionFailed {
            residual: adj.residual,
            tolerance,
        });
    }
    Ok(adj)
}

/// Tolerances of [`verify`]; all default to `1e-6` except continuity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub reconstruction: f64,
    pub hamiltonian: f64,
    pub control_law: f64,
    pub singular_arc: f64,
    pub continuity: f64,
    pub perpendicular: f64,
    pub refraction: f64,
    pub star_case: f64,
    pub consistency: f64,
    /// Samples per segment.
    pub samples: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            reconstruction: 1e-6,
            hamiltonian: 1e-6,
            control_law: 1e-6,
            singular_arc: 1e-6,
            continuity: 1e-9,
            perpendicular: 1e-6,
            refraction: 1e-6,
            star_case: 1e-6,
            consistency: 1e-6,
            samples: 100,
        }
    }
}

/// Graded necessary condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionEntry {
    pub condition: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Number of places the condition was evaluated (zero if it does not apply).
    pub checked: usize,
}

impl ConditionEntry {
    fn new(condition: &str, residual: f64, tolerance: f64, checked: usize) -> Self {
        Self {
            condition: condition.to_string(),
            residual,
            tolerance,
            pass: residual <= tolerance,
            checked,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub entries: Vec<ConditionEntry>,
    pub pass: bool,
    /// Mean sampled Hamiltonian.
    pub c: f64,
    pub lambda0: f64,
    pub abnormal: bool,
    pub adjoint: AdjointTrajectory,
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn entry(&self, condition: &str) -> Option<&ConditionEntry> {
        self.entries.iter().find(|e| e.condition == condition)
    }
}

/// Condition identifiers used in reports.
pub mod conditions {
    pub const RECONSTRUCTION: &str = "reconstruction";
    pub const HAMILTONIAN: &str = "hamiltonian_constancy";
    pub const CONTROL_LAW: &str = "control_law";
    pub const SINGULAR_ARC: &str = "singular_arc";
    pub const ADJOINT_JUMP: &str = "adjoint_jump";
    pub const PERPENDICULAR: &str = "line_crossing_perpendicular";
    pub const REFRACTION: &str = "refraction";
    pub const STAR_CASE: &str = "star_case";
    pub const ADMISSIBILITY: &str = "family_admissibility";
    pub const CONSISTENCY: &str = "trajectory_consistency";
}

/// Grades `p` against every necessary condition at default tolerances.
pub fn verify(p: &PathSolution, s: &Scenario) -> VerificationReport {
    verify_with(p, s, &Tolerances::default())
}

pub fn verify_with(p: &PathSolution, s: &Scenario, tol: &Tolerances) -> VerificationReport {
    use conditions::*;
    let mut entries = Vec::new();
    let mut notes = vec![
        "costates are normalized by lambda_0 = 1 and H = 0; magnitudes are not comparable across normalizations".to_string(),
    ];
    let structural = p.phases.is_empty()
        || p.crossings.len() + 1 != p.phases.len()
        || p.phases.iter().any(|ph| s.map.region(ph.region).is_none());
    if structural {
        entries.push(ConditionEntry::new(CONSISTENCY, f64::INFINITY, tol.consistency, 1));
        return VerificationReport {
            entries,
            pass: false,
            c: 0.0,
            lambda0: 1.0,
            abnormal: false,
            adjoint: AdjointTrajectory {
                phases: vec![],
                jumps: vec![],
                lambda0: 1.0,
                c: 0.0,
                residual: f64::INFINITY,
                abnormal: false,
            },
            notes: vec!["path structure does not match the scenario".into()],
        };
    }
    let mut adj = solve_adjoint(p);
    entries.push(ConditionEntry::new(RECONSTRUCTION, adj.residual, tol.reconstruction, 1));
    if adj.abnormal {
        notes.push("an abnormal multiplier (lambda_0 = 0) also satisfies the conditions".into());
    }

    let samples = p.sample(tol.samples.max(100));
    let region = |q: RegionId| s.map.region(q).expect("checked above");
    let lt_scale = 1.0
        + samples
            .iter()
            .map(|sm| adj.phases[sm.j].lambda_theta(sm.pose.position()).abs())
            .fold(0.0, f64::max);
    let lam_scale = 1.0
        + adj
            .phases
            .iter()
            .map(|ph| ph.lambda_x.hypot(ph.lambda_y))
            .fold(0.0, f64::max);

    // Hamiltonian constancy.
    let hs: Vec<f64> = samples
        .iter()
        .map(|sm| {
            let lam = adj.phases[sm.j].sample(sm.pose.position());
            hamiltonian(&sm.pose, &lam, adj.lambda0, sm.u, region(sm.q))
        })
        .collect();
    let c = hs.iter().sum::<f64>() / hs.len().max(1) as f64;
    adj.c = c;
    let h_dev = hs.iter().map(|h| (h - c).abs()).fold(0.0, f64::max) / (1.0 + c.abs());
    entries.push(ConditionEntry::new(HAMILTONIAN, h_dev, tol.hamiltonian, hs.len()));

    // Control law on arcs and vanishing switching function at arc switches.
    let ps = pieces(p);
    let mut control = 0.0f64;
    let mut control_n = 0;
    for sm in samples.iter().filter(|sm| sm.kind.is_arc()) {
        let seg = &p.phases[sm.j].segments[sm.segment];
        if seg.duration * p.phases[sm.j].v <= MIN_PIECE_LENGTH {
            continue;
        }
        let lt = adj.phases[sm.j].lambda_theta(sm.pose.position());
        control = control.max((-sm.kind.turn_sign() * lt).max(0.0) / lt_scale);
        control_n += 1;
    }
    for w in ps.windows(2) {
        if w[0].kind.is_arc() && w[1].kind.is_arc() && w[0].kind != w[1].kind {
            let lt = adj.phases[w[1].phase].lambda_theta(w[1].start.position());
            control = control.max(lt.abs() / lt_scale);
            control_n += 1;
        }
    }
    entries.push(ConditionEntry::new(CONTROL_LAW, control, tol.control_law, control_n));

    // Singular arcs: lambda_theta = 0 and lambda_y tan(theta) = lambda_x.
    let mut singular = 0.0f64;
    let mut singular_n = 0;
    for sm in samples.iter().filter(|sm| sm.kind == SegmentKind::Line) {
        let seg = &p.phases[sm.j].segments[sm.segment];
        if seg.duration * p.phases[sm.j].v <= MIN_PIECE_LENGTH {
            continue;
        }
        let ph = &adj.phases[sm.j];
        let lt = ph.lambda_theta(sm.pose.position()).abs() / lt_scale;
        let rel = (ph.lambda_x * sm.pose.theta.cos() - ph.lambda_y * sm.pose.theta.sin()).abs() / lam_scale;
        singular = singular.max(lt).max(rel);
        singular_n += 1;
    }
    entries.push(ConditionEntry::new(SINGULAR_ARC, singular, tol.singular_arc, singular_n));

    // Jumps: lambda_theta continuous, costate jumps only along the normal.
    let mut jump = 0.0f64;
    for (j, rec) in p.crossings.iter().enumerate() {
        let (a, b) = (&adj.phases[j], &adj.phases[j + 1]);
        let at = p.phases[j + 1].start.position();
        let end = p.phases[j].end().position();
        jump = jump.max((a.lambda_theta(end) - b.lambda_theta(at)).abs());
        let d = Point::new(b.lambda_x - a.lambda_x, b.lambda_y - a.lambda_y);
        jump = jump.max(d.dot(rec.frame.tangent()).abs());
    }
    entries.push(ConditionEntry::new(ADJOINT_JUMP, jump, tol.continuity, p.crossings.len()));

    // Straight crossings between regions of different speed are orthogonal.
    let mut perp = 0.0f64;
    let mut perp_n = 0;
    let mut refr = 0.0f64;
    let mut refr_n = 0;
    let mut star = 0.0f64;
    let mut star_n = 0;
    let mut inadmissible = 0usize;
    for rec in &p.crossings {
        let (rp, rq) = (region(rec.from), region(rec.to));
        let straight = rec.incident_kinds.last() == Some(&SegmentKind::Line)
            && rec.emergent_kinds.first() == Some(&SegmentKind::Line);
        if straight && (rp.v - rq.v).abs() > 1e-12 * rp.v.max(rq.v) {
            perp = perp.max(rec.theta_star.sin().abs());
            perp_n += 1;
        }
        if !rec.classification.is_admissible() {
            inadmissible += 1;
        }
        if rec.is_lcl() {
            match refraction_residuals(rec, rp, rq) {
                Ok((rv, rr)) => refr = refr.max(rv.abs()).max(rr.abs()),
                Err(e) => {
                    refr = f64::INFINITY;
                    notes.push(format!("refraction check at t = {}: {e}", rec.t));
                }
            }
            refr_n += 1;
            if let Ok(sc) = check_star_case(rec, rp, rq, tol.star_case) {
                star = star.max(sc.residual);
                star_n += 1;
            }
        }
    }
    entries.push(ConditionEntry::new(PERPENDICULAR, perp, tol.perpendicular, perp_n));
    entries.push(ConditionEntry::new(REFRACTION, refr, tol.refraction, refr_n));
    entries.push(ConditionEntry::new(STAR_CASE, star, tol.star_case, star_n));
    if runs_along_boundary(p, &s.map) {
        inadmissible += 1;
        notes.push("a straight segment slides along a region edge".into());
    }
    entries.push(ConditionEntry::new(
        ADMISSIBILITY,
        inadmissible as f64,
        0.0,
        p.crossings.len(),
    ));

    // Consistency: chained poses, endpoints, containment, adjacency.
    let mut gap = 0.0f64;
    let pose_gap = |a: &Configuration, b: &Configuration| a.position_error(b).max(a.heading_error(b));
    gap = gap.max(pose_gap(&p.phases[0].start, &s.start));
    gap = gap.max(pose_gap(&p.phases.last().expect("non-empty").end(), &s.goal));
    for w in p.phases.windows(2) {
        gap = gap.max(pose_gap(&w[0].end(), &w[1].start));
        if s.map.shared_edge(w[0].region, w[1].region).is_none() {
            gap = f64::INFINITY;
        }
    }
    if p.phases[0].region != s.start_region || p.phases.last().expect("non-empty").region != s.goal_region {
        gap = f64::INFINITY;
    }
    for phase in &p.phases {
        let reg = region(phase.region);
        let knots = phase.knots();
        for (i, seg) in phase.segments.iter().enumerate() {
            let out = reg.piece_excursion(&knots[i], seg.kind, seg.duration * phase.v, phase.r());
            gap = gap.max(out);
        }
    }
    let t_gap = (p.total_time - crate::path::path_time(p)).abs();
    gap = gap.max(t_gap);
    entries.push(ConditionEntry::new(CONSISTENCY, gap, tol.consistency, p.phases.len()));

    let pass = entries.iter().all(|e| e.pass);
    VerificationReport {
        entries,
        pass,
        c,
        lambda0: adj.lambda0,
        abnormal: adj.abnormal,
        adjoint: adj,
        notes,
    }
}
