//! Shared scenario generators and corpus I/O for the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use hetdubins::planner::Scenario;
use hetdubins::{Configuration, Point, Region, RegionId, RegionMap};
use rand::Rng;
use serde_json::{json, Value};

/// Two rectangles split by a line, described in a local frame where the
/// boundary is `y = 0` and region 1 lies above; the whole picture is then
/// rotated by `angle` and shifted by `shift`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoRegion {
    pub v: [f64; 2],
    pub r: [f64; 2],
    pub half: f64,
    pub start: Configuration,
    pub goal: Configuration,
    pub angle: f64,
    pub shift: Point,
}

impl TwoRegion {
    pub fn random(rng: &mut impl Rng, homogeneous: bool) -> Self {
        let v1 = rng.gen_range(0.5..2.0);
        let r1 = rng.gen_range(0.3..1.5);
        let (v2, r2) = if homogeneous {
            (v1, r1)
        } else {
            (rng.gen_range(0.5..2.0), rng.gen_range(0.3..1.5))
        };
        let start = Configuration::new(rng.gen_range(-3.0..3.0), rng.gen_range(1.0..4.0), rng.gen_range(-PI..PI));
        let goal = Configuration::new(rng.gen_range(-3.0..3.0), rng.gen_range(-4.0..-1.0), rng.gen_range(-PI..PI));
        Self {
            v: [v1, v2],
            r: [r1, r2],
            half: 8.0,
            start,
            goal,
            angle: rng.gen_range(-PI..PI),
            shift: Point::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)),
        }
    }

    fn place(&self, p: Point) -> Point {
        let (s, c) = self.angle.sin_cos();
        Point::new(c * p.x - s * p.y + self.shift.x, s * p.x + c * p.y + self.shift.y)
    }

    fn place_pose(&self, q: &Configuration) -> Configuration {
        let p = self.place(q.position());
        Configuration::new(p.x, p.y, q.theta - self.angle)
    }

    pub fn map(&self) -> RegionMap {
        let b = self.half;
        let rect = |id: u32, y0: f64, y1: f64, v: f64, r: f64| {
            let pts = [Point::new(-b, y0), Point::new(b, y0), Point::new(b, y1), Point::new(-b, y1)];
            Region::new(RegionId(id), pts.iter().map(|&p| self.place(p)).collect(), v, r).unwrap()
        };
        RegionMap::new(vec![
            rect(1, 0.0, b, self.v[0], self.r[0]),
            rect(2, -b, 0.0, self.v[1], self.r[1]),
        ])
        .unwrap()
    }

    pub fn scenario(&self) -> Scenario {
        Scenario::new(
            self.map(),
            self.place_pose(&self.start),
            RegionId(1),
            self.place_pose(&self.goal),
            RegionId(2),
        )
        .unwrap()
    }

    /// Geometry and radii multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        let sc = |c: &Configuration| Configuration::new(c.x * k, c.y * k, c.theta);
        Self {
            r: [self.r[0] * k, self.r[1] * k],
            half: self.half * k,
            start: sc(&self.start),
            goal: sc(&self.goal),
            shift: self.shift.scale(k),
            ..self.clone()
        }
    }

    /// Speeds multiplied by `k`, radii unchanged.
    pub fn sped(&self, k: f64) -> Self {
        Self {
            v: [self.v[0] * k, self.v[1] * k],
            ..self.clone()
        }
    }

    /// Reflection across the boundary normal through the local origin.
    pub fn mirrored(&self) -> Self {
        Self {
            start: self.start.mirrored(),
            goal: self.goal.mirrored(),
            ..self.clone()
        }
    }
}

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("data")
}

/// Scenario in the versioned file format read by the command-line tool.
pub fn scenario_json(s: &Scenario, seed: u64) -> Value {
    let regions: Vec<Value> = s
        .map
        .regions()
        .iter()
        .map(|r| {
            json!({
                "id": r.id.0,
                "vertices": r.polygon.iter().map(|p| [p.x, p.y]).collect::<Vec<_>>(),
                "v": r.v,
                "r": r.r,
            })
        })
        .collect();
    let pose = |c: &Configuration, q: RegionId| {
        json!({"x": c.x, "y": c.y, "theta_deg": c.theta.to_degrees(), "region": q.0})
    };
    json!({
        "format": 1,
        "seed": seed,
        "regions": regions,
        "start": pose(&s.start, s.start_region),
        "goal": pose(&s.goal, s.goal_region),
        "options": {"max_crossings": 1},
    })
}

pub fn scenario_from_json(v: &Value) -> Scenario {
    let num = |v: &Value| v.as_f64().expect("number");
    let regions = v["regions"]
        .as_array()
        .expect("regions")
        .iter()
        .map(|r| {
            let pts = r["vertices"]
                .as_array()
                .expect("vertices")
                .iter()
                .map(|p| Point::new(num(&p[0]), num(&p[1])))
                .collect();
            Region::new(RegionId(r["id"].as_u64().expect("id") as u32), pts, num(&r["v"]), num(&r["r"])).unwrap()
        })
        .collect();
    let pose = |p: &Value| {
        (
            Configuration::new(num(&p["x"]), num(&p["y"]), num(&p["theta_deg"]).to_radians()),
            RegionId(p["region"].as_u64().expect("region") as u32),
        )
    };
    let (start, sq) = pose(&v["start"]);
    let (goal, gq) = pose(&v["goal"]);
    Scenario::new(RegionMap::new(regions).unwrap(), start, sq, goal, gq).unwrap()
}

/// The committed two-region corpus, in file-name order.
pub fn load_corpus() -> Vec<(String, Scenario)> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(corpus_dir())
        .expect("corpus directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let text = std::fs::read_to_string(&p).unwrap();
            let v: Value = serde_json::from_str(&text).unwrap();
            (p.file_name().unwrap().to_string_lossy().into_owned(), scenario_from_json(&v))
        })
        .collect()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
