//! Instance file format: a single JSON document, schema described in
//! `docs/format.md`. Saving and loading round-trips instances bit-exactly,
//! including seeds and cost tables.

use super::{CostModel, EdgeLength, Instance, InstanceError, TabulatedEntry};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::path::Path;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported schema version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

#[derive(Serialize, Deserialize)]
struct VersionProbe {
    schema_version: u32,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    schema_version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    width: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    height: Option<usize>,
    vertices: usize,
    edges: Vec<[usize; 2]>,
    obstacles: Vec<usize>,
    robots: Vec<usize>,
    targets: Vec<usize>,
    horizon: usize,
    cost_model: CostModelFile,
}

#[derive(Serialize, Deserialize)]
struct CostModelFile {
    variant: String,
    params: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

fn model_to_file(model: &CostModel) -> CostModelFile {
    match model {
        CostModel::Uniform {
            move_cost,
            wait_nontarget,
            wait_target,
        } => CostModelFile {
            variant: "uniform".into(),
            params: json!({
                "move_cost": move_cost,
                "wait_nontarget": wait_nontarget,
                "wait_target": wait_target,
            }),
            seed: None,
        },
        CostModel::Metric {
            lengths,
            wait_nontarget,
            wait_target,
        } => CostModelFile {
            variant: "metric".into(),
            params: json!({
                "lengths": lengths
                    .iter()
                    .map(|l| json!([l.from, l.to, l.length]))
                    .collect::<Vec<_>>(),
                "wait_nontarget": wait_nontarget,
                "wait_target": wait_target,
            }),
            seed: None,
        },
        CostModel::Tabulated { entries } => CostModelFile {
            variant: "tabulated".into(),
            params: json!({
                "entries": entries
                    .iter()
                    .map(|e| json!([e.from, e.to, e.t, e.cost]))
                    .collect::<Vec<_>>(),
            }),
            seed: None,
        },
        CostModel::NonUniformRandom {
            arrival_min,
            arrival_max,
            wait_min,
            wait_max,
            seed,
        } => CostModelFile {
            variant: "non_uniform_random".into(),
            params: json!({
                "arrival_min": arrival_min,
                "arrival_max": arrival_max,
                "wait_min": wait_min,
                "wait_max": wait_max,
            }),
            seed: Some(*seed),
        },
        CostModel::ExponentialMakespan {
            base_move,
            base_wait_nontarget,
            base,
        } => CostModelFile {
            variant: "exponential_makespan".into(),
            params: json!({
                "base_move": base_move,
                "base_wait_nontarget": base_wait_nontarget,
                "base": base,
            }),
            seed: None,
        },
    }
}

fn field_f64(params: &Value, name: &str) -> Result<f64, IoError> {
    params
        .get(name)
        .and_then(Value::as_f64)
        .ok_or_else(|| IoError::Parse(format!("cost_model params missing field `{name}`")))
}

fn field_u64(params: &Value, name: &str) -> Result<u64, IoError> {
    params
        .get(name)
        .and_then(Value::as_u64)
        .ok_or_else(|| IoError::Parse(format!("cost_model params missing field `{name}`")))
}

fn model_from_file(file: &CostModelFile) -> Result<CostModel, IoError> {
    let p = &file.params;
    match file.variant.as_str() {
        "uniform" => Ok(CostModel::Uniform {
            move_cost: field_f64(p, "move_cost")?,
            wait_nontarget: field_f64(p, "wait_nontarget")?,
            wait_target: field_f64(p, "wait_target")?,
        }),
        "metric" => {
            let raw = p
                .get("lengths")
                .and_then(Value::as_array)
                .ok_or_else(|| IoError::Parse("cost_model params missing field `lengths`".into()))?;
            let mut lengths = Vec::with_capacity(raw.len());
            for item in raw {
                let triple = item.as_array().filter(|a| a.len() == 3).ok_or_else(|| {
                    IoError::Parse("metric length entries must be [from, to, length]".into())
                })?;
                lengths.push(EdgeLength {
                    from: triple[0].as_u64().ok_or_else(|| {
                        IoError::Parse("metric length `from` must be an integer".into())
                    })? as usize,
                    to: triple[1].as_u64().ok_or_else(|| {
                        IoError::Parse("metric length `to` must be an integer".into())
                    })? as usize,
                    length: triple[2].as_f64().ok_or_else(|| {
                        IoError::Parse("metric length `length` must be a number".into())
                    })?,
                });
            }
            Ok(CostModel::Metric {
                lengths,
                wait_nontarget: field_f64(p, "wait_nontarget")?,
                wait_target: field_f64(p, "wait_target")?,
            })
        }
        "tabulated" => {
            let raw = p
                .get("entries")
                .and_then(Value::as_array)
                .ok_or_else(|| IoError::Parse("cost_model params missing field `entries`".into()))?;
            let mut entries = Vec::with_capacity(raw.len());
            for item in raw {
                let quad = item.as_array().filter(|a| a.len() == 4).ok_or_else(|| {
                    IoError::Parse("tabulated entries must be [from, to, t, cost]".into())
                })?;
                entries.push(TabulatedEntry {
                    from: quad[0]
                        .as_u64()
                        .ok_or_else(|| IoError::Parse("tabulated `from` must be an integer".into()))?
                        as usize,
                    to: quad[1]
                        .as_u64()
                        .ok_or_else(|| IoError::Parse("tabulated `to` must be an integer".into()))?
                        as usize,
                    t: quad[2]
                        .as_u64()
                        .ok_or_else(|| IoError::Parse("tabulated `t` must be an integer".into()))?
                        as usize,
                    cost: quad[3]
                        .as_f64()
                        .ok_or_else(|| IoError::Parse("tabulated `cost` must be a number".into()))?,
                });
            }
            Ok(CostModel::Tabulated { entries })
        }
        "non_uniform_random" => Ok(CostModel::NonUniformRandom {
            arrival_min: field_f64(p, "arrival_min")?,
            arrival_max: field_f64(p, "arrival_max")?,
            wait_min: field_f64(p, "wait_min")?,
            wait_max: field_f64(p, "wait_max")?,
            seed: file
                .seed
                .ok_or_else(|| IoError::Parse("non_uniform_random requires `seed`".into()))?,
        }),
        "exponential_makespan" => Ok(CostModel::ExponentialMakespan {
            base_move: field_f64(p, "base_move")?,
            base_wait_nontarget: field_f64(p, "base_wait_nontarget")?,
            base: field_u64(p, "base")?,
        }),
        other => Err(IoError::Parse(format!("unknown cost model variant `{other}`"))),
    }
}

/// Serialize an instance to its canonical JSON text.
pub fn to_json(instance: &Instance) -> String {
    let file = InstanceFile {
        schema_version: SCHEMA_VERSION,
        width: instance.width(),
        height: instance.height(),
        vertices: instance.vertex_count(),
        edges: instance.edges().iter().map(|&(i, j)| [i, j]).collect(),
        obstacles: instance.obstacles().to_vec(),
        robots: instance.robots().to_vec(),
        targets: instance.targets().to_vec(),
        horizon: instance.horizon(),
        cost_model: model_to_file(instance.cost_model()),
    };
    serde_json::to_string_pretty(&file).expect("instance serialization cannot fail")
}

/// Parse an instance from JSON text.
pub fn from_json(text: &str) -> Result<Instance, IoError> {
    let probe: VersionProbe =
        serde_json::from_str(text).map_err(|e| IoError::Parse(e.to_string()))?;
    if probe.schema_version != SCHEMA_VERSION {
        return Err(IoError::VersionMismatch {
            found: probe.schema_version,
            expected: SCHEMA_VERSION,
        });
    }
    let file: InstanceFile =
        serde_json::from_str(text).map_err(|e| IoError::Parse(e.to_string()))?;
    let model = model_from_file(&file.cost_model)?;
    Ok(Instance::new(
        file.vertices,
        file.edges.iter().map(|&[i, j]| (i, j)).collect(),
        file.obstacles,
        file.robots,
        file.targets,
        file.horizon,
        model,
        file.width,
        file.height,
    )?)
}

pub fn save(instance: &Instance, path: impl AsRef<Path>) -> Result<(), IoError> {
    std::fs::write(path, to_json(instance))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Instance, IoError> {
    let text = std::fs::read_to_string(path)?;
    from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::generate_grid;

    #[test]
    fn round_trip_is_identity() {
        let inst = generate_grid(3, 3, 0, 1, 1).unwrap();
        let text = to_json(&inst);
        let back = from_json(&text).unwrap();
        assert_eq!(inst, back);
        // Canonical text is stable as well.
        assert_eq!(text, to_json(&back));
    }

    #[test]
    fn round_trip_keeps_seeded_cost_tables() {
        let inst = generate_grid(3, 3, 1, 2, 4)
            .unwrap()
            .with_cost_model(CostModel::NonUniformRandom {
                arrival_min: 0.6,
                arrival_max: 1.0,
                wait_min: 0.1,
                wait_max: 0.5,
                seed: 99,
            })
            .unwrap();
        let back = from_json(&to_json(&inst)).unwrap();
        assert_eq!(inst, back);
        for e in 0..inst.edge_count() {
            assert_eq!(inst.costs().cost_i64(e, 1), back.costs().cost_i64(e, 1));
        }
    }

    #[test]
    fn missing_field_names_the_field() {
        let text = r#"{"schema_version":1,"vertices":2,"edges":[[0,0],[1,1]],
            "obstacles":[],"robots":[0],"horizon":3,
            "cost_model":{"variant":"uniform","params":{"move_cost":1.0,
            "wait_nontarget":0.5,"wait_target":0.0}}}"#;
        let err = from_json(text).unwrap_err();
        match err {
            IoError::Parse(msg) => assert!(msg.contains("targets"), "message: {msg}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn future_schema_versions_are_rejected() {
        let text = r#"{"schema_version":99}"#;
        let err = from_json(text).unwrap_err();
        assert!(matches!(err, IoError::VersionMismatch { found: 99, .. }));
    }

    #[test]
    fn hand_written_general_graph_loads() {
        // A 5-vertex star around vertex 2 with self-loops everywhere.
        let text = r#"{
            "schema_version": 1,
            "vertices": 5,
            "edges": [[0,0],[0,2],[1,1],[1,2],[2,0],[2,1],[2,2],[2,3],[2,4],[3,2],[3,3],[4,2],[4,4]],
            "obstacles": [],
            "robots": [0, 1],
            "targets": [3, 4],
            "horizon": 4,
            "cost_model": {"variant": "uniform", "params": {"move_cost": 1.0, "wait_nontarget": 0.5, "wait_target": 0.0}}
        }"#;
        let inst = from_json(text).unwrap();
        assert_eq!(inst.vertex_count(), 5);
        assert!(inst.width().is_none());
        let report = crate::instance::validate(&inst);
        assert!(report.passed(), "{report:?}");
    }
}
