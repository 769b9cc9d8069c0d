//! Motion interchange format.
//!
//! A single motion record is one JSON document:
//!
//! ```json
//! {
//!   "fps": 20.0,
//!   "skeleton": { "joint_names": [...], "foot_indices": [l, r], "parent": [...] },
//!   "frames": [ [ [x, y, z], ... J ], ... T ],
//!   "condition": [ ... ] ,
//!   "label": "walk forward",
//!   "provenance": "clean"
//! }
//! ```
//!
//! A corpus is either a directory of such files (read in filename order) or a
//! JSON-lines file with one document per line. Floats are written in decimal
//! text with shortest round-trip precision, so write-then-read reproduces
//! every coordinate exactly.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::{
    validate, ConditionVector, MotionRecord, MotionSequence, Provenance, Skeleton,
};

#[derive(Serialize, Deserialize)]
struct SkeletonDoc {
    joint_names: Vec<String>,
    foot_indices: [usize; 2],
    parent: Option<Vec<Option<usize>>>,
}

#[derive(Serialize, Deserialize)]
struct MotionDoc {
    fps: f64,
    skeleton: SkeletonDoc,
    frames: Vec<Vec<[f64; 3]>>,
    condition: Option<Vec<f64>>,
    label: Option<String>,
    provenance: String,
}

fn record_to_doc(record: &MotionRecord) -> MotionDoc {
    let skel = &record.motion.skeleton;
    let frames = record
        .motion
        .frames
        .outer_iter()
        .map(|frame| {
            frame
                .outer_iter()
                .map(|j| [j[0], j[1], j[2]])
                .collect::<Vec<_>>()
        })
        .collect();
    MotionDoc {
        fps: record.motion.fps,
        skeleton: SkeletonDoc {
            joint_names: skel.joint_names.clone(),
            foot_indices: [skel.foot_indices.0, skel.foot_indices.1],
            parent: skel.parent.clone(),
        },
        frames,
        condition: record.condition.as_ref().map(|c| c.values.clone()),
        label: record.label.clone(),
        provenance: record.provenance.as_str().to_string(),
    }
}

fn doc_to_record(doc: MotionDoc, path: &Path) -> Result<MotionRecord> {
    let provenance = match doc.provenance.as_str() {
        "clean" => Provenance::Clean,
        "distorted" => Provenance::Distorted,
        "refined" => Provenance::Refined,
        "generated" => Provenance::Generated,
        other => {
            return Err(Error::parse(
                path,
                format!("provenance: unknown value {:?}", other),
            ))
        }
    };

    let t = doc.frames.len();
    let j = doc.skeleton.joint_names.len();
    for (i, frame) in doc.frames.iter().enumerate() {
        if frame.len() != j {
            return Err(Error::Invalid(format!(
                "frames[{i}]: has {} joints, skeleton declares {j}",
                frame.len()
            )));
        }
    }
    let mut frames = Array3::zeros((t, j, 3));
    for (i, frame) in doc.frames.iter().enumerate() {
        for (jj, joint) in frame.iter().enumerate() {
            frames[[i, jj, 0]] = joint[0];
            frames[[i, jj, 1]] = joint[1];
            frames[[i, jj, 2]] = joint[2];
        }
    }

    let skeleton = Arc::new(Skeleton {
        joint_names: doc.skeleton.joint_names,
        foot_indices: (doc.skeleton.foot_indices[0], doc.skeleton.foot_indices[1]),
        parent: doc.skeleton.parent,
    });

    let record = MotionRecord {
        motion: MotionSequence::new(doc.fps, frames, skeleton),
        condition: doc.condition.map(ConditionVector::new),
        label: doc.label,
        provenance,
    };

    let violations = validate(&record);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(Error::Invalid(list.join("; ")));
    }
    Ok(record)
}

/// Serialize one record to its JSON document string.
pub fn record_to_json(record: &MotionRecord) -> String {
    serde_json::to_string(&record_to_doc(record)).expect("motion document serializes")
}

/// Parse one record from a JSON document string. `origin` only labels errors.
pub fn record_from_json(json: &str, origin: &Path) -> Result<MotionRecord> {
    let doc: MotionDoc =
        serde_json::from_str(json).map_err(|e| Error::parse(origin, e.to_string()))?;
    doc_to_record(doc, origin)
}

pub fn write_motion_file(record: &MotionRecord, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, record_to_json(record)).map_err(|e| Error::io(path, e))
}

pub fn read_motion_file(path: impl AsRef<Path>) -> Result<MotionRecord> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    record_from_json(&text, path)
}

/// Read a corpus from a directory of `.json` files (filename order) or a
/// `.jsonl` file (one document per line).
pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<MotionRecord>> {
    let path = path.as_ref();
    if path.is_dir() {
        let mut names: Vec<_> = fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("json"))
            .filter(|p| {
                // Skip the toolkit's own sidecar files.
                let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
                name != "manifest.json"
                    && name != "distortion_specs.json"
                    && !name.ends_with(".specs.json")
            })
            .collect();
        names.sort();
        names.iter().map(read_motion_file).collect()
    } else if path.extension().and_then(|e| e.to_str()) == Some("jsonl") {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.lines()
            .enumerate()
            .filter(|(_, line)| !line.trim().is_empty())
            .map(|(i, line)| {
                record_from_json(line, path).map_err(|e| match e {
                    Error::Parse { path, reason } => Error::Parse {
                        path,
                        reason: format!("line {}: {reason}", i + 1),
                    },
                    other => other,
                })
            })
            .collect()
    } else {
        Ok(vec![read_motion_file(path)?])
    }
}

/// Write a corpus as one file per record: `motion_00000.json`, ...
pub fn write_corpus_dir(records: &[MotionRecord], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, rec) in records.iter().enumerate() {
        write_motion_file(rec, dir.join(format!("motion_{i:05}.json")))?;
    }
    Ok(())
}

/// Write a corpus as a JSON-lines file.
pub fn write_corpus_jsonl(records: &[MotionRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for rec in records {
        text.push_str(&record_to_json(rec));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    fn record() -> MotionRecord {
        let skel = Arc::new(Skeleton::default_biped());
        let frames = Array3::from_shape_fn((5, 7, 3), |(t, j, c)| {
            (t as f64 * 0.7 + j as f64 * 0.13 + c as f64 * 0.01).sin()
        });
        MotionRecord {
            motion: MotionSequence::new(20.0, frames, skel),
            condition: Some(ConditionVector::new(vec![0.25, -0.5])),
            label: None,
            provenance: Provenance::Generated,
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let rec = record();
        let json = record_to_json(&rec);
        let back = record_from_json(&json, Path::new("<mem>")).unwrap();
        assert_eq!(rec, back);
    }

    #[test]
    fn missing_fps_is_parse_error() {
        let json = r#"{"skeleton":{"joint_names":["a","b"],"foot_indices":[0,1],"parent":null},"frames":[],"condition":null,"label":null,"provenance":"clean"}"#;
        let err = record_from_json(json, Path::new("<mem>")).unwrap_err();
        match err {
            Error::Parse { reason, .. } => assert!(reason.contains("fps"), "{reason}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn ragged_frames_rejected() {
        let json = r#"{"fps":20.0,"skeleton":{"joint_names":["a","b"],"foot_indices":[0,1],"parent":null},
            "frames":[[[0,0,0],[0,0,0]],[[0,0,0]]],"condition":null,"label":null,"provenance":"clean"}"#;
        let err = record_from_json(json, Path::new("<mem>")).unwrap_err();
        match err {
            Error::Invalid(msg) => assert!(msg.contains("frames[1]"), "{msg}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_provenance_rejected() {
        let json = record_to_json(&record()).replace("generated", "imagined");
        let err = record_from_json(&json, Path::new("<mem>")).unwrap_err();
        match err {
            Error::Parse { reason, .. } => assert!(reason.contains("provenance")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
