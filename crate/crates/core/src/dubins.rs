//! Single-region shortest bounded-curvature paths.
//!
//! The six classical words are built with the usual tangent constructions in
//! a normalized frame (start at the origin, goal on the +x axis, unit radius).
//! Zero-length pieces arise from clamping and are never special-cased.

use std::cmp::Ordering;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{normalize_angle, propagate_length, Configuration, Region, SegmentKind};
use crate::path::{PathSolution, Phase, Segment};

use SegmentKind::{CMinus as M, CPlus as P, Line as S};

/// Pieces shorter than this (in length units) are treated as absent.
pub const ZERO_LENGTH: f64 = 1e-9;

/// Two path lengths closer than this are tied and broken by spelling.
pub const TIE_TOL: f64 = 1e-9;

/// Three-letter spelling of a candidate path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Word(pub [SegmentKind; 3]);

impl Word {
    pub const ALL: [Word; 6] = [
        Word([M, S, M]),
        Word([P, S, P]),
        Word([M, S, P]),
        Word([P, S, M]),
        Word([P, M, P]),
        Word([M, P, M]),
    ];

    pub fn kinds(&self) -> [SegmentKind; 3] {
        self.0
    }

    pub fn is_ccc(&self) -> bool {
        self.0[1] != S
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in self.0 {
            f.write_str(k.symbol())?;
        }
        Ok(())
    }
}

/// One candidate: a word with piece arclengths, anchored at `start`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DubinsPath {
    pub start: Configuration,
    pub r: f64,
    pub word: Word,
    /// Arclength of each piece.
    pub lengths: [f64; 3],
}

impl DubinsPath {
    pub fn length(&self) -> f64 {
        self.lengths.iter().sum()
    }

    /// Pieces with zero-length entries removed.
    pub fn pieces(&self) -> Vec<(SegmentKind, f64)> {
        self.word
            .0
            .iter()
            .zip(self.lengths)
            .filter(|(_, l)| *l > ZERO_LENGTH)
            .map(|(k, l)| (*k, l))
            .collect()
    }

    /// Spelling after dropping zero-length pieces; the tie-break key.
    pub fn spelling(&self) -> Vec<SegmentKind> {
        self.pieces().into_iter().map(|(k, _)| k).collect()
    }

    pub fn endpoint(&self) -> Configuration {
        self.word
            .0
            .iter()
            .zip(self.lengths)
            .fold(self.start, |c, (k, l)| propagate_length(&c, *k, l, self.r))
    }

    /// Largest excursion outside `region` over all pieces (negative inside).
    pub fn excursion(&self, region: &Region) -> f64 {
        let mut c = self.start;
        let mut worst = f64::NEG_INFINITY;
        for (k, l) in self.word.0.iter().zip(self.lengths) {
            if l > ZERO_LENGTH || worst == f64::NEG_INFINITY {
                worst = worst.max(region.piece_excursion(&c, *k, l, self.r));
            }
            c = propagate_length(&c, *k, l, self.r);
        }
        worst
    }

    /// Wraps the path as a one-phase solution in `region`.
    pub fn into_solution(self, region: &Region) -> PathSolution {
        let segments = self
            .pieces()
            .into_iter()
            .map(|(kind, l)| Segment {
                kind,
                duration: l / region.v,
                region: region.id,
            })
            .collect();
        let phase = Phase::new(region, self.start, segments);
        PathSolution::from_phases(vec![phase], Vec::new())
    }
}

/// Orders candidates by length, treating lengths within [`TIE_TOL`] as equal
/// and then comparing spellings.
pub fn compare_candidates(a: &DubinsPath, b: &DubinsPath) -> Ordering {
    let (la, lb) = (a.length(), b.length());
    if (la - lb).abs() <= TIE_TOL * (1.0 + la.max(lb)) {
        a.spelling()
            .cmp(&b.spelling())
            .then_with(|| la.total_cmp(&lb))
    } else {
        la.total_cmp(&lb)
    }
}

fn mod2pi(a: f64) -> f64 {
    let m = a.rem_euclid(TAU);
    if m > TAU - 1e-10 {
        0.0
    } else {
        m
    }
}

/// Line direction for an equal-turn word whose two circles coincide. The
/// direction is then rounding noise, and any split of the sweep is equally
/// short, so the whole sweep goes into the last arc.
fn same_circle(p: f64, a: f64) -> Option<f64> {
    (p < 1e-10).then_some(a)
}

/// Unwrapped piece values in the classical frame, where `L`/`R` denote
/// left/right turns: arc angles before reduction modulo 2pi, and for the
/// `CSC` words the squared line length (the line itself is taken as zero
/// when that is negative). `None` when a `CCC` construction does not exist.
fn raw_params(word: Word, a: f64, b: f64, d: f64) -> Option<([f64; 3], f64)> {
    let (sa, ca, sb, cb) = (a.sin(), a.cos(), b.sin(), b.cos());
    let cab = (a - b).cos();
    // Our C- is a counter-clockwise (left) turn, C+ a clockwise (right) one.
    match word.0 {
        // For equal turns the line is the offset between the two circle
        // centres; its norm is taken directly rather than from the expanded
        // square, which loses half the digits when the circles nearly coincide.
        [M, S, M] => {
            let (ox, oy) = (d + sa - sb, cb - ca);
            let p = ox.hypot(oy);
            let tmp = same_circle(p, a).unwrap_or_else(|| oy.atan2(ox));
            Some(([-a + tmp, p, b - tmp], p * p))
        }
        [P, S, P] => {
            let (ox, oy) = (d - sa + sb, ca - cb);
            let p = ox.hypot(oy);
            let tmp = same_circle(p, a).unwrap_or_else(|| oy.atan2(ox));
            Some(([a - tmp, p, -b + tmp], p * p))
        }
        [M, S, P] => {
            let p2 = -2.0 + d * d + 2.0 * cab + 2.0 * d * (sa + sb);
            let p = p2.max(0.0).sqrt();
            let tmp = (-ca - cb).atan2(d + sa + sb) - (-2.0f64).atan2(p);
            Some(([-a + tmp, p, -b + tmp], p2))
        }
        [P, S, M] => {
            let p2 = -2.0 + d * d + 2.0 * cab - 2.0 * d * (sa + sb);
            let p = p2.max(0.0).sqrt();
            let tmp = (ca + cb).atan2(d - sa - sb) - 2.0f64.atan2(p);
            Some(([a - tmp, p, b - tmp], p2))
        }
        [P, M, P] => {
            let tmp = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sa - sb)) / 8.0;
            if tmp.abs() > 1.0 {
                return None;
            }
            let p = mod2pi(TAU - tmp.acos());
            let t = a - (ca - cb).atan2(d - sa + sb) + p / 2.0;
            Some(([t, p, a - b - mod2pi(t) + p], f64::NAN))
        }
        [M, P, M] => {
            let tmp = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sb - sa)) / 8.0;
            if tmp.abs() > 1.0 {
                return None;
            }
            let p = mod2pi(TAU - tmp.acos());
            let t = -a - (ca - cb).atan2(d + sa - sb) + p / 2.0;
            Some(([t, p, b - a - mod2pi(t) + p], f64::NAN))
        }
        _ => None,
    }
}

/// Normalized piece lengths `(t, p, q)`: radians for arcs, units of r for lines.
fn word_params(word: Word, a: f64, b: f64, d: f64) -> Option<[f64; 3]> {
    let ([t, p, q], p2) = raw_params(word, a, b, d)?;
    if p2 < -1e-10 {
        return None;
    }
    Some([mod2pi(t), p, mod2pi(q)])
}

/// Frame quantities `(a, b, d)`: headings relative to the start-goal chord
/// and the chord length in units of `r`.
fn normalized_frame(start: &Configuration, goal: &Configuration, r: f64) -> (f64, f64, f64) {
    let dx = goal.x - start.x;
    let dy = goal.y - start.y;
    let d = dx.hypot(dy) / r;
    let phi = dy.atan2(dx);
    // Headings from +y convert to standard math angles by pi/2 - theta.
    let a = mod2pi(FRAC_PI_2 - start.theta - phi);
    let b = mod2pi(FRAC_PI_2 - goal.theta - phi);
    (a, b, d)
}

/// Smooth signed stand-ins for the three pieces of `word` between the poses:
/// arc sweeps wrapped to (-pi, pi] and, for `CSC` words, the squared line
/// length in units of r (negative where the word does not exist). Each
/// crosses zero where its piece vanishes, unlike the clamped lengths. The
/// middle entry of a `CCC` word is its (always large) sweep.
pub fn signed_pieces(word: Word, start: &Configuration, goal: &Configuration, r: f64) -> Option<[f64; 3]> {
    let (a, b, d) = normalized_frame(start, goal, r);
    let ([t, p, q], p2) = raw_params(word, a, b, d)?;
    let mid = if word.is_ccc() { p } else { p2 };
    Some([normalize_angle(t), mid, normalize_angle(q)])
}

/// Every feasible word connecting `start` to `goal` with turning radius `r`.
///
/// Each returned candidate reaches the goal to within 1e-9 in position and
/// heading; words whose construction does not exist are omitted.
pub fn enumerate_words(start: &Configuration, goal: &Configuration, r: f64) -> Vec<DubinsPath> {
    assert!(r > 0.0, "turning radius must be positive");
    let (a, b, d) = normalized_frame(start, goal, r);
    let pos_tol = 1e-9 * (1.0 + r);
    Word::ALL
        .iter()
        .filter_map(|&word| {
            let [t, p, q] = word_params(word, a, b, d)?;
            if word.is_ccc() && p <= PI {
                return None;
            }
            let path = DubinsPath {
                start: *start,
                r,
                word,
                lengths: [t * r, p * r, q * r],
            };
            let end = path.endpoint();
            (end.position_error(goal) <= pos_tol && end.heading_error(goal) <= 1e-9)
                .then_some(path)
        })
        .collect()
}

/// Shortest candidate, ties broken by spelling (C- < C+ < L).
pub fn solve_dubins(start: &Configuration, goal: &Configuration, r: f64) -> Option<DubinsPath> {
    enumerate_words(start, goal, r)
        .into_iter()
        .min_by(compare_candidates)
}

/// Shortest candidate whose every piece stays within `region` (closed, with
/// slack `tol`), using the region's turning radius.
pub fn solve_within(
    start: &Configuration,
    goal: &Configuration,
    region: &Region,
    tol: f64,
) -> Option<DubinsPath> {
    enumerate_words(start, goal, region.r)
        .into_iter()
        .filter(|c| c.excursion(region) <= tol)
        .min_by(compare_candidates)
}

/// Single-region plan as a [`PathSolution`]: unconstrained shortest word.
pub fn solve_dubins_in(
    start: &Configuration,
    goal: &Configuration,
    region: &Region,
) -> Result<PathSolution> {
    solve_dubins(start, goal, region.r)
        .map(|p| p.into_solution(region))
        .ok_or(crate::error::Error::NoFeasiblePath)
}
