//! Boundary-crossing laws.
//!
//! At a crossing from region `p` into region `p'` the pose is expressed in
//! the boundary frame whose +y' axis points into `p'`, so the crossing
//! heading `theta*` is the angle to the boundary normal. `delta_p` is the
//! signed sweep of the arc that ends at the boundary on the `p` side and
//! `delta_pp` the sweep of the arc that starts there on the `p'` side (zero
//! when the adjacent piece is a line). The headings before and after those
//! arcs are `theta_p = theta* - delta_p` and `theta_pp = theta* + delta_pp`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    to_boundary_frame, BoundaryFrame, Region, RegionId, RegionMap, SegmentKind,
};
use crate::path::{Phase, Segment};

/// Segments shorter than this (in length units) are ignored when reading
/// the structure of a crossing.
pub const MIN_PIECE_LENGTH: f64 = 1e-7;

/// An L crossing between regions of different speed must satisfy
/// `|sin theta*| <= PERPENDICULAR_TOL`.
pub const PERPENDICULAR_TOL: f64 = 1e-6;

/// Admissible structure of the path at a boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CrossingKind {
    /// Straight piece orthogonal to the boundary.
    LPerp,
    /// Straight piece at any angle between regions of equal speed.
    LEqualSpeed,
    /// One clockwise arc spanning the boundary.
    CPlus,
    /// One counter-clockwise arc spanning the boundary.
    CMinus,
    CPlusL,
    CMinusL,
    LCPlus,
    LCMinus,
    CPlusCMinus,
    CMinusCPlus,
}

impl CrossingKind {
    pub fn label(self) -> &'static str {
        match self {
            CrossingKind::LPerp => "L_perp",
            CrossingKind::LEqualSpeed => "L",
            CrossingKind::CPlus => "C+",
            CrossingKind::CMinus => "C-",
            CrossingKind::CPlusL => "C+/L",
            CrossingKind::CMinusL => "C-/L",
            CrossingKind::LCPlus => "L/C+",
            CrossingKind::LCMinus => "L/C-",
            CrossingKind::CPlusCMinus => "C+/C-",
            CrossingKind::CMinusCPlus => "C-/C+",
        }
    }

    /// A single arc spans the boundary.
    pub fn is_spanning_arc(self) -> bool {
        matches!(self, CrossingKind::CPlus | CrossingKind::CMinus)
    }
}

impl fmt::Display for CrossingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Local patterns that cannot occur on a minimum-time path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NonoptimalPattern {
    /// Straight piece crossing obliquely between regions of different speed.
    NonOrthogonalLine,
    /// `L_p C_p L_p'`: the arc ends exactly at the boundary.
    LineArcInIncidentLine,
    /// `L_p C_p' L_p'`: the arc starts exactly at the boundary.
    LineArcInEmergentLine,
    /// `L_p C_p C_p' L_p'`: the control switches at the boundary between lines.
    LineArcArcLine,
}

impl fmt::Display for NonoptimalPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NonoptimalPattern::NonOrthogonalLine => "non-orthogonal L across regions of different speed",
            NonoptimalPattern::LineArcInIncidentLine => "L_p C_p L_p'",
            NonoptimalPattern::LineArcInEmergentLine => "L_p C_p' L_p'",
            NonoptimalPattern::LineArcArcLine => "L_p C_p C_p' L_p'",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Admissible(CrossingKind),
    Inadmissible(NonoptimalPattern),
}

impl Classification {
    pub fn is_admissible(&self) -> bool {
        matches!(self, Classification::Admissible(_))
    }

    pub fn kind(&self) -> Option<CrossingKind> {
        match self {
            Classification::Admissible(k) => Some(*k),
            Classification::Inadmissible(_) => None,
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Classification::Admissible(k) => write!(f, "{k}"),
            Classification::Inadmissible(p) => write!(f, "inadmissible ({p})"),
        }
    }
}

fn significant(segments: &[Segment], v: f64) -> Vec<SegmentKind> {
    segments
        .iter()
        .filter(|s| s.duration * v > MIN_PIECE_LENGTH)
        .map(|s| s.kind)
        .collect()
}

/// Classifies the path structure at one boundary crossing.
///
/// `incident` are the segments in region `p` (ending on the boundary) and
/// `emergent` those in region `p'` (starting on it); zero-length pieces are
/// dropped first. `theta_star` is the crossing heading in the boundary frame.
pub fn classify_crossing(
    incident: &[Segment],
    emergent: &[Segment],
    theta_star: f64,
    v_p: f64,
    v_pp: f64,
) -> Result<Classification> {
    let p_region = incident.first().map(|s| s.region);
    let q_region = emergent.first().map(|s| s.region);
    if incident.iter().any(|s| Some(s.region) != p_region)
        || emergent.iter().any(|s| Some(s.region) != q_region)
        || p_region == q_region
    {
        return Err(Error::MalformedSubpath(
            "segments must cover exactly two regions, one on each side".into(),
        ));
    }
    let a_side = significant(incident, v_p);
    let b_side = significant(emergent, v_pp);
    let (Some(&a), Some(&b)) = (a_side.last(), b_side.first()) else {
        return Err(Error::MalformedSubpath(
            "no piece of positive length on one side of the boundary".into(),
        ));
    };
    if theta_star.cos() <= 0.0 {
        return Err(Error::MalformedSubpath(format!(
            "heading {theta_star} does not point into the emergent region"
        )));
    }
    let before = a_side.len().checked_sub(2).map(|i| a_side[i]);
    let after = b_side.get(1).copied();
    use Classification::*;
    use CrossingKind::*;
    use SegmentKind::{CMinus, CPlus, Line};
    let same_speed = (v_p - v_pp).abs() <= 1e-12 * v_p.max(v_pp);
    Ok(match (a, b) {
        (Line, Line) => {
            if theta_star.sin().abs() <= PERPENDICULAR_TOL {
                Admissible(LPerp)
            } else if same_speed {
                Admissible(LEqualSpeed)
            } else {
                Inadmissible(NonoptimalPattern::NonOrthogonalLine)
            }
        }
        (CPlus, CPlus) => Admissible(CrossingKind::CPlus),
        (CMinus, CMinus) => Admissible(CrossingKind::CMinus),
        (arc, Line) => {
            if before == Some(Line) {
                Inadmissible(NonoptimalPattern::LineArcInIncidentLine)
            } else if arc == CPlus {
                Admissible(CPlusL)
            } else {
                Admissible(CMinusL)
            }
        }
        (Line, arc) => {
            if after == Some(Line) {
                Inadmissible(NonoptimalPattern::LineArcInEmergentLine)
            } else if arc == CPlus {
                Admissible(LCPlus)
            } else {
                Admissible(LCMinus)
            }
        }
        (first, _) => {
            if before == Some(Line) && after == Some(Line) {
                Inadmissible(NonoptimalPattern::LineArcArcLine)
            } else if first == CPlus {
                Admissible(CPlusCMinus)
            } else {
                Admissible(CMinusCPlus)
            }
        }
    })
}

/// Geometry of one boundary traversal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingRecord {
    pub frame: BoundaryFrame,
    /// Incident region `p`.
    pub from: RegionId,
    /// Emergent region `p'`.
    pub to: RegionId,
    /// Hybrid time of the crossing.
    pub t: f64,
    pub theta_star: f64,
    pub theta_p: f64,
    pub theta_pp: f64,
    pub delta_p: f64,
    pub delta_pp: f64,
    /// Kinds of the significant pieces in `p`, in travel order.
    pub incident_kinds: Vec<SegmentKind>,
    /// Kinds of the significant pieces in `p'`, in travel order.
    pub emergent_kinds: Vec<SegmentKind>,
    pub classification: Classification,
}

impl CrossingRecord {
    /// Builds the record from angles alone; used for hand-constructed checks.
    pub fn from_angles(theta_star: f64, delta_p: f64, delta_pp: f64) -> Self {
        Self {
            frame: BoundaryFrame::identity(),
            from: RegionId(0),
            to: RegionId(1),
            t: 0.0,
            theta_star,
            theta_p: theta_star - delta_p,
            theta_pp: theta_star + delta_pp,
            delta_p,
            delta_pp,
            incident_kinds: vec![SegmentKind::Line, SegmentKind::CPlus],
            emergent_kinds: vec![SegmentKind::CPlus, SegmentKind::Line],
            classification: Classification::Admissible(CrossingKind::CPlus),
        }
    }

    /// Measures the crossing between two consecutive phases.
    pub fn between(incident: &Phase, emergent: &Phase, map: &RegionMap) -> Result<Self> {
        let edge = map.shared_edge(incident.region, emergent.region).ok_or_else(|| {
            Error::MalformedSubpath(format!(
                "regions {} and {} share no edge",
                incident.region, emergent.region
            ))
        })?;
        let (from, to) = edge.oriented_towards(emergent.region);
        let pose = emergent.start;
        let frame = BoundaryFrame::on_segment(pose.position(), from, to);
        let theta_star = to_boundary_frame(&pose, &frame).theta;
        let classification =
            classify_crossing(&incident.segments, &emergent.segments, theta_star, incident.v, emergent.v)?;
        let sweep = |s: Option<&Segment>, u_max: f64| match s {
            Some(s) if s.kind.is_arc() => s.kind.turn_sign() * u_max * s.duration,
            _ => 0.0,
        };
        let last = incident
            .segments
            .iter()
            .rev()
            .find(|s| s.duration * incident.v > MIN_PIECE_LENGTH);
        let first = emergent
            .segments
            .iter()
            .find(|s| s.duration * emergent.v > MIN_PIECE_LENGTH);
        let delta_p = sweep(last, incident.u_max);
        let delta_pp = sweep(first, emergent.u_max);
        Ok(Self {
            frame,
            from: incident.region,
            to: emergent.region,
            t: emergent.t_start,
            theta_star,
            theta_p: theta_star - delta_p,
            theta_pp: theta_star + delta_pp,
            delta_p,
            delta_pp,
            incident_kinds: significant(&incident.segments, incident.v),
            emergent_kinds: significant(&emergent.segments, emergent.v),
            classification,
        })
    }

    pub fn kind(&self) -> Option<CrossingKind> {
        self.classification.kind()
    }

    /// A single arc spans the boundary with straight pieces on both sides,
    /// the structure to which both refraction equations apply.
    pub fn is_lcl(&self) -> bool {
        let spanning = self.kind().is_some_and(CrossingKind::is_spanning_arc);
        let n = self.incident_kinds.len();
        spanning
            && n >= 2
            && self.incident_kinds[n - 2] == SegmentKind::Line
            && self.emergent_kinds.get(1) == Some(&SegmentKind::Line)
    }

    /// Speed and radius ratios `(v_p / v_p', r_p / r_p')` implied by the angles.
    pub fn recovered_ratios(&self) -> (f64, f64) {
        let v_ratio = self.theta_p.sin() / self.theta_pp.sin();
        let r_ratio = v_ratio * (1.0 - self.delta_pp.cos()) / (1.0 - self.delta_p.cos());
        (v_ratio, r_ratio)
    }
}

/// Dimensionless residuals `(rho_v, rho_r)` of the speed and radius laws.
pub fn refraction_residuals(rec: &CrossingRecord, p: &Region, pp: &Region) -> Result<(f64, f64)> {
    let s_pp = rec.theta_pp.sin();
    let one_p = 1.0 - rec.delta_p.cos();
    let one_pp = 1.0 - rec.delta_pp.cos();
    if s_pp.abs() < 1e-12 {
        return Err(Error::DegenerateCrossing(
            "emergent line is orthogonal to the boundary".into(),
        ));
    }
    if one_p.abs() < 1e-12 {
        return Err(Error::DegenerateCrossing("incident arc has zero sweep".into()));
    }
    let rho_v = (p.v * s_pp - pp.v * rec.theta_p.sin()) / p.v.max(pp.v);
    let lhs = p.r * pp.v * one_p;
    let rhs = pp.r * p.v * one_pp;
    let rho_r = (lhs - rhs) / lhs.abs().max(rhs.abs());
    Ok((rho_v, rho_r))
}

/// Emergent angle of a straight ray crossing from speed `v_p` into `v_pp`.
pub fn snell_exit_angle(theta_p: f64, v_p: f64, v_pp: f64) -> Result<f64> {
    let ratio = v_pp / v_p * theta_p.sin();
    if ratio.abs() > 1.0 + 1e-12 {
        return Err(Error::TotalInternalReflection { ratio: ratio.abs() });
    }
    Ok(ratio.clamp(-1.0, 1.0).asin())
}

/// Outcome of the equal-rate sweep check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarCheck {
    pub residual: f64,
    pub pass: bool,
}

/// With equal angular-rate bounds the two boundary arcs sweep equal angles.
pub fn check_star_case(rec: &CrossingRecord, p: &Region, pp: &Region, tol: f64) -> Result<StarCheck> {
    let (u_in, u_out) = (p.u_max(), pp.u_max());
    if (u_in - u_out).abs() > 1e-9 * u_in.max(u_out) {
        return Err(Error::NotStarCase { u_in, u_out });
    }
    let residual = (rec.delta_p - rec.delta_pp).abs();
    Ok(StarCheck {
        residual,
        pass: residual <= tol,
    })
}
