//! Versioned scenario files (`format: 1`).

use std::path::Path;

use hetdubins::adjoint::Tolerances;
use hetdubins::planner::Scenario;
use hetdubins::{Configuration, Point, Region, RegionId, RegionMap};
use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

pub const FORMAT: u32 = 1;
pub const DEFAULT_MAX_CROSSINGS: usize = 2;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path}: line {line}, column {column}: {message}")]
    Syntax { path: String, line: usize, column: usize, message: String },
    #[error("{path}: field `{field}`: {message}")]
    Field { path: String, field: String, message: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionEntry {
    id: u32,
    vertices: Vec<[f64; 2]>,
    v: f64,
    r: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseEntry {
    x: f64,
    y: f64,
    theta_deg: f64,
    region: u32,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptionsEntry {
    max_crossings: Option<usize>,
    tolerances: Option<Tolerances>,
    /// Omit the wall-clock timestamp from the outputs.
    #[serde(default)]
    no_timestamp: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    format: u32,
    /// Generator seed of synthetic scenarios.
    #[serde(default)]
    seed: Option<u64>,
    regions: Vec<RegionEntry>,
    start: PoseEntry,
    goal: PoseEntry,
    #[serde(default)]
    options: OptionsEntry,
}

/// Parsed scenario plus the run options stored with it.
#[derive(Debug, Clone)]
pub struct ScenarioFile {
    pub scenario: Scenario,
    pub max_crossings: Option<usize>,
    pub tolerances: Tolerances,
    pub no_timestamp: bool,
    pub seed: Option<u64>,
}

/// Reads a scenario document as JSON without interpreting it.
pub fn read_document(path: &Path) -> Result<Value, ScenarioError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Read { path: name.clone(), source })?;
    serde_json::from_str(&text).map_err(|e| ScenarioError::Syntax {
        path: name,
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn load(path: &Path) -> Result<ScenarioFile, ScenarioError> {
    let doc = read_document(path)?;
    from_document(&doc, &path.display().to_string())
}

/// Interprets a scenario document; `name` labels errors.
pub fn from_document(doc: &Value, name: &str) -> Result<ScenarioFile, ScenarioError> {
    let file: File = serde_path_to_error::deserialize(doc).map_err(|e| ScenarioError::Field {
        path: name.to_string(),
        field: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    let field = |field: String, message: String| ScenarioError::Field {
        path: name.to_string(),
        field,
        message,
    };
    if file.format != FORMAT {
        return Err(field("format".into(), format!("unsupported version {} (expected {FORMAT})", file.format)));
    }
    let regions = file
        .regions
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let pts = r.vertices.iter().map(|&[x, y]| Point::new(x, y)).collect();
            Region::new(RegionId(r.id), pts, r.v, r.r).map_err(|e| field(format!("regions[{i}]"), e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let map = RegionMap::new(regions).map_err(|e| field("regions".into(), e.to_string()))?;
    let pose = |p: &PoseEntry| (Configuration::new(p.x, p.y, p.theta_deg.to_radians()), RegionId(p.region));
    let (start, sq) = pose(&file.start);
    let (goal, gq) = pose(&file.goal);
    let scenario = Scenario::new(map, start, sq, goal, gq).map_err(|e| ScenarioError::Invalid {
        path: name.to_string(),
        message: e.to_string(),
    })?;
    Ok(ScenarioFile {
        scenario,
        max_crossings: file.options.max_crossings,
        tolerances: file.options.tolerances.unwrap_or_default(),
        no_timestamp: file.options.no_timestamp,
        seed: file.seed,
    })
}

/// One step of a parameter path such as `regions[1].v`.
#[derive(Debug, PartialEq)]
enum Step {
    Key(String),
    Index(usize),
}

fn parse_param(param: &str) -> Option<Vec<Step>> {
    let mut steps = Vec::new();
    for part in param.split('.') {
        let (key, mut rest) = match part.find('[') {
            Some(i) => (&part[..i], &part[i..]),
            None => (part, ""),
        };
        if key.is_empty() {
            return None;
        }
        steps.push(Step::Key(key.to_string()));
        while let Some(stripped) = rest.strip_prefix('[') {
            let end = stripped.find(']')?;
            steps.push(Step::Index(stripped[..end].parse().ok()?));
            rest = &stripped[end + 1..];
        }
        if !rest.is_empty() {
            return None;
        }
    }
    Some(steps)
}

/// Sets the number at `param` in a scenario document.
pub fn set_param(doc: &mut Value, param: &str, value: f64) -> Result<(), String> {
    let steps = parse_param(param).ok_or_else(|| format!("malformed parameter path `{param}`"))?;
    let mut here = doc;
    for step in &steps {
        here = match step {
            Step::Key(k) => here.get_mut(k.as_str()),
            Step::Index(i) => here.get_mut(*i),
        }
        .ok_or_else(|| format!("parameter path `{param}` does not exist in the scenario"))?;
    }
    if !here.is_number() {
        return Err(format!("parameter `{param}` is not a number"));
    }
    *here = serde_json::json!(value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_paths() {
        assert_eq!(
            parse_param("regions[1].v"),
            Some(vec![Step::Key("regions".into()), Step::Index(1), Step::Key("v".into())])
        );
        assert_eq!(parse_param("start.theta_deg").map(|s| s.len()), Some(2));
        assert!(parse_param("regions[x].v").is_none());
        assert!(parse_param(".v").is_none());
        assert!(parse_param("regions[1]v").is_none());
    }

    #[test]
    fn set_param_replaces_numbers_only() {
        let mut doc = serde_json::json!({"regions": [{"v": 1.0}, {"v": 2.0}], "format": 1});
        set_param(&mut doc, "regions[1].v", 0.5).unwrap();
        assert_eq!(doc["regions"][1]["v"], 0.5);
        assert!(set_param(&mut doc, "regions[2].v", 0.5).is_err());
        assert!(set_param(&mut doc, "regions", 0.5).is_err());
    }
}
