//! Trajectory tables, plots and reports.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use hetdubins::adjoint::VerificationReport;
use hetdubins::planner::Scenario;
use hetdubins::refraction::CrossingRecord;
use hetdubins::{Configuration, PathSolution, Phase, RegionId, Segment, SegmentKind};
use serde::{Deserialize, Serialize};

/// Samples per segment in the trajectory table (both ends included).
pub const SAMPLES_PER_SEGMENT: usize = 50;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Row {
    t: f64,
    j: usize,
    q: u32,
    x: f64,
    y: f64,
    theta_rad: f64,
    u: f64,
    segment_kind: String,
}

pub fn write_trajectory(path: &Path, p: &PathSolution) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    for s in p.sample(SAMPLES_PER_SEGMENT) {
        w.serialize(Row {
            t: s.t,
            j: s.j,
            q: s.q.0,
            x: s.pose.x,
            y: s.pose.y,
            theta_rad: s.pose.theta,
            u: s.u,
            segment_kind: s.kind.symbol().to_string(),
        })?;
    }
    w.flush()?;
    Ok(())
}

fn parse_kind(s: &str) -> Option<SegmentKind> {
    [SegmentKind::CMinus, SegmentKind::CPlus, SegmentKind::Line]
        .into_iter()
        .find(|k| k.symbol() == s)
}

/// Rebuilds a path from a trajectory table. Each phase starts at its first
/// row; each run of rows with one segment kind is one segment whose duration
/// is the time it spans.
pub fn read_trajectory(path: &Path, s: &Scenario) -> Result<PathSolution> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let expected = ["t", "j", "q", "x", "y", "theta_rad", "u", "segment_kind"];
    let headers = r.headers()?.clone();
    if headers.iter().ne(expected) {
        bail!("{}: header must be {}", path.display(), expected.join(","));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.deserialize::<Row>().enumerate() {
        // Line 1 is the header.
        let row = rec.with_context(|| format!("{}: line {}", path.display(), i + 2))?;
        let ok = [row.t, row.x, row.y, row.theta_rad, row.u].iter().all(|v| v.is_finite());
        if !ok || parse_kind(&row.segment_kind).is_none() {
            bail!("{}: line {}: non-finite value or unknown segment kind", path.display(), i + 2);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("{}: no samples", path.display());
    }

    let mut phases: Vec<Phase> = Vec::new();
    let mut i = 0;
    while i < rows.len() {
        let (j, q) = (rows[i].j, rows[i].q);
        if j != phases.len() {
            bail!("{}: line {}: phase index {j} out of order", path.display(), i + 2);
        }
        let region = s
            .map
            .region(RegionId(q))
            .with_context(|| format!("{}: line {}: unknown region {q}", path.display(), i + 2))?;
        let start = Configuration::new(rows[i].x, rows[i].y, rows[i].theta_rad);
        let mut segments = Vec::new();
        while i < rows.len() && rows[i].j == j {
            if rows[i].q != q {
                bail!("{}: line {}: region changes inside phase {j}", path.display(), i + 2);
            }
            let label = rows[i].segment_kind.clone();
            let kind = parse_kind(&label).expect("checked above");
            let t0 = rows[i].t;
            let mut t1 = t0;
            while i < rows.len() && rows[i].j == j && rows[i].segment_kind == label {
                if rows[i].t < t1 {
                    bail!("{}: line {}: time decreases", path.display(), i + 2);
                }
                t1 = rows[i].t;
                i += 1;
            }
            segments.push(Segment {
                kind,
                duration: t1 - t0,
                region: RegionId(q),
            });
        }
        phases.push(Phase::new(region, start, segments));
    }
    let crossings = phases
        .windows(2)
        .map(|w| CrossingRecord::between(&w[0], &w[1], &s.map))
        .collect::<hetdubins::Result<Vec<_>>>()
        .context("crossing between phases")?;
    Ok(PathSolution::from_phases(phases, crossings))
}

/// Linear fill from light (slow) to dark (fast).
fn speed_fill(v: f64, lo: f64, hi: f64) -> String {
    let f = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
    let c = (235.0 - 135.0 * f).round() as u8;
    format!("rgb({c},{c},255)")
}

fn kind_color(k: SegmentKind) -> &'static str {
    match k {
        SegmentKind::CPlus => "#d62728",
        SegmentKind::CMinus => "#1f77b4",
        SegmentKind::Line => "#222222",
    }
}

/// Path over the region map, coloured by segment kind, with triangles where
/// the control structure changes and circles at boundary crossings.
pub fn render_svg(p: &PathSolution, s: &Scenario, timestamp: Option<u64>) -> String {
    let samples = p.sample(SAMPLES_PER_SEGMENT);
    let mut pts: Vec<(f64, f64)> = samples.iter().map(|c| (c.pose.x, c.pose.y)).collect();
    pts.push((s.start.x, s.start.y));
    pts.push((s.goal.x, s.goal.y));
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    let pad = 0.15 * (x1 - x0).max(y1 - y0).max(1.0);
    let (x0, y0, x1, y1) = (x0 - pad, y0 - pad, x1 + pad, y1 + pad);
    let (w, h) = (x1 - x0, y1 - y0);
    let stroke = 0.004 * w.max(h);
    let mark = 3.0 * stroke;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x0:.6} {:.6} {w:.6} {h:.6}" width="800" height="{:.0}">"##,
        -y1,
        800.0 * h / w
    );
    if let Some(ts) = timestamp {
        let _ = writeln!(out, "<!-- generated at unix time {ts} -->");
    }
    let _ = writeln!(out, r##"<g transform="scale(1,-1)">"##);
    let speeds: Vec<f64> = s.map.regions().iter().map(|r| r.v).collect();
    let lo = speeds.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = speeds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for r in s.map.regions() {
        let poly: Vec<String> = r.polygon.iter().map(|q| format!("{:.6},{:.6}", q.x, q.y)).collect();
        let _ = writeln!(
            out,
            r##"<polygon points="{}" fill="{}" stroke="#888888" stroke-width="{stroke:.6}"><title>region {} v={} r={}</title></polygon>"##,
            poly.join(" "),
            speed_fill(r.v, lo, hi),
            r.id,
            r.v,
            r.r
        );
    }
    for (j, phase) in p.phases.iter().enumerate() {
        for i in 0..phase.segments.len() {
            let run: Vec<String> = samples
                .iter()
                .filter(|c| c.j == j && c.segment == i)
                .map(|c| format!("{:.6},{:.6}", c.pose.x, c.pose.y))
                .collect();
            let _ = writeln!(
                out,
                r##"<polyline points="{}" fill="none" stroke="{}" stroke-width="{:.6}"/>"##,
                run.join(" "),
                kind_color(phase.segments[i].kind),
                2.0 * stroke
            );
        }
    }
    // Junctions where the segment kind changes, across crossings as well.
    let kinds: Vec<(Configuration, SegmentKind)> = p
        .phases
        .iter()
        .flat_map(|ph| ph.knots().into_iter().zip(ph.segments.iter().map(|s| s.kind)))
        .collect();
    for w in kinds.windows(2) {
        if w[0].1 != w[1].1 {
            let c = w[1].0;
            let _ = writeln!(
                out,
                r##"<polygon points="{:.6},{:.6} {:.6},{:.6} {:.6},{:.6}" fill="#2ca02c"/>"##,
                c.x,
                c.y + mark,
                c.x - 0.866 * mark,
                c.y - 0.5 * mark,
                c.x + 0.866 * mark,
                c.y - 0.5 * mark
            );
        }
    }
    for ph in p.phases.iter().skip(1) {
        let _ = writeln!(
            out,
            r##"<circle cx="{:.6}" cy="{:.6}" r="{:.6}" fill="none" stroke="#ff7f0e" stroke-width="{stroke:.6}"/>"##,
            ph.start.x, ph.start.y, mark
        );
    }
    let _ = writeln!(out, "</g>\n</svg>");
    out
}

#[derive(Debug, Serialize)]
pub struct OracleSummary {
    pub pieces: usize,
    pub time: f64,
    pub gap: f64,
    pub schedule: hetdubins::oracle::ControlSchedule,
}

#[derive(Debug, Serialize)]
pub struct CrossingSummary {
    pub from: u32,
    pub to: u32,
    pub x: f64,
    pub y: f64,
    pub theta_star: f64,
    pub kind: String,
}

/// Contents of `report.json`.
#[derive(Debug, Serialize)]
pub struct PlanReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_unix: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario_seed: Option<u64>,
    pub total_time: f64,
    pub route_signature: String,
    pub word: String,
    pub crossings: Vec<CrossingSummary>,
    pub verification: VerificationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSummary>,
}

impl PlanReport {
    pub fn new(p: &PathSolution, verification: VerificationReport) -> Self {
        let crossings = p
            .phases
            .windows(2)
            .zip(&p.crossings)
            .map(|(w, c)| CrossingSummary {
                from: w[0].region.0,
                to: w[1].region.0,
                x: w[1].start.x,
                y: w[1].start.y,
                theta_star: c.theta_star,
                kind: match c.kind() {
                    Some(k) => k.label().to_string(),
                    None => "inadmissible".to_string(),
                },
            })
            .collect();
        Self {
            generated_unix: None,
            scenario_seed: None,
            total_time: p.total_time(),
            route_signature: p.route_signature(),
            word: p.word(),
            crossings,
            verification,
            oracle: None,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}
