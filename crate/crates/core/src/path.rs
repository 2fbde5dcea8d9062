//! Piecewise-constant-control paths over a hybrid time domain: one phase per
//! visited region, each a short list of C+/C-/L segments.

use serde::{Deserialize, Serialize};

use crate::geometry::{propagate_unchecked, Configuration, Region, RegionId, SegmentKind};
use crate::refraction::CrossingRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    /// Time spent on the segment.
    pub duration: f64,
    pub region: RegionId,
}

/// Maximal stretch of the path inside a single region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub region: RegionId,
    pub v: f64,
    pub u_max: f64,
    pub start: Configuration,
    pub segments: Vec<Segment>,
    /// Hybrid-time interval `[t_start, t_end]` of this phase.
    pub t_start: f64,
    pub t_end: f64,
}

impl Phase {
    /// Builds a phase starting at local time zero; [`PathSolution::from_phases`]
    /// assigns the global interval.
    pub fn new(region: &Region, start: Configuration, segments: Vec<Segment>) -> Self {
        let t_end = segments.iter().map(|s| s.duration).sum();
        Self {
            region: region.id,
            v: region.v,
            u_max: region.u_max(),
            start,
            segments,
            t_start: 0.0,
            t_end,
        }
    }

    pub fn r(&self) -> f64 {
        self.v / self.u_max
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Pose at the start of every segment, followed by the final pose.
    pub fn knots(&self) -> Vec<Configuration> {
        let mut out = Vec::with_capacity(self.segments.len() + 1);
        let mut c = self.start;
        out.push(c);
        for s in &self.segments {
            c = propagate_unchecked(&c, s.kind, s.duration, self.v, self.u_max);
            out.push(c);
        }
        out
    }

    pub fn end(&self) -> Configuration {
        *self.knots().last().expect("knots are never empty")
    }

    /// Angular-rate input on a segment.
    pub fn input(&self, kind: SegmentKind) -> f64 {
        kind.turn_sign() * self.u_max
    }
}

/// One sampled point of a path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub t: f64,
    /// Phase index in the hybrid time domain.
    pub j: usize,
    pub q: RegionId,
    pub pose: Configuration,
    pub u: f64,
    pub kind: SegmentKind,
    /// Index of the segment within its phase.
    pub segment: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSolution {
    pub phases: Vec<Phase>,
    pub crossings: Vec<CrossingRecord>,
    pub total_time: f64,
}

impl PathSolution {
    /// Assembles phases and assigns consecutive hybrid-time intervals.
    pub fn from_phases(mut phases: Vec<Phase>, crossings: Vec<CrossingRecord>) -> Self {
        let mut t = 0.0;
        for p in &mut phases {
            p.t_start = t;
            t += p.duration();
            p.t_end = t;
        }
        Self {
            phases,
            crossings,
            total_time: t,
        }
    }

    pub fn empty() -> Self {
        Self {
            phases: Vec::new(),
            crossings: Vec::new(),
            total_time: 0.0,
        }
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn region_sequence(&self) -> Vec<RegionId> {
        self.phases.iter().map(|p| p.region).collect()
    }

    /// Route signature, e.g. `1-2-3`.
    pub fn route_signature(&self) -> String {
        self.region_sequence()
            .iter()
            .map(|q| q.to_string())
            .collect::<Vec<_>>()
            .join("-")
    }

    /// `[(t_j, t_{j+1}, j)]` for every phase.
    pub fn hybrid_time_domain(&self) -> Vec<(f64, f64, usize)> {
        self.phases
            .iter()
            .enumerate()
            .map(|(j, p)| (p.t_start, p.t_end, j))
            .collect()
    }

    pub fn start(&self) -> Option<Configuration> {
        self.phases.first().map(|p| p.start)
    }

    pub fn end(&self) -> Option<Configuration> {
        self.phases.last().map(|p| p.end())
    }

    /// Spelling across all phases, e.g. `C+|L C-` style lists per phase.
    pub fn word(&self) -> String {
        self.phases
            .iter()
            .map(|p| {
                p.segments
                    .iter()
                    .map(|s| s.kind.symbol())
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect::<Vec<_>>()
            .join(" | ")
    }

    /// Samples every segment at `per_segment + 1` evenly spaced instants
    /// (both ends included).
    pub fn sample(&self, per_segment: usize) -> Vec<PathSample> {
        let n = per_segment.max(1);
        let mut out = Vec::new();
        for (j, phase) in self.phases.iter().enumerate() {
            let mut c = phase.start;
            let mut t0 = phase.t_start;
            for (i, seg) in phase.segments.iter().enumerate() {
                for k in 0..=n {
                    let dt = seg.duration * k as f64 / n as f64;
                    out.push(PathSample {
                        t: t0 + dt,
                        j,
                        q: phase.region,
                        pose: propagate_unchecked(&c, seg.kind, dt, phase.v, phase.u_max),
                        u: phase.input(seg.kind),
                        kind: seg.kind,
                        segment: i,
                    });
                }
                c = propagate_unchecked(&c, seg.kind, seg.duration, phase.v, phase.u_max);
                t0 += seg.duration;
            }
        }
        out
    }
}

/// Total traversal time: the sum of all segment durations.
pub fn path_time(p: &PathSolution) -> f64 {
    p.phases.iter().map(Phase::duration).sum()
}
