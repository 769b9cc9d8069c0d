//! Core motion data types: skeletons, pose sequences, condition vectors, and
//! the validation rules every downstream stage relies on.
//!
//! Conventions: joint positions are meters in a Y-up frame with the ground
//! plane at `y = 0`. A motion is a dense `T x J x 3` array sampled at a fixed
//! frame rate.

use std::sync::Arc;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

/// Named joint hierarchy with the two foot joints identified.
///
/// Contact metrics need to know which joints are feet; everything else treats
/// the skeleton as an ordered list of joint names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skeleton {
    pub joint_names: Vec<String>,
    /// (left, right) indices into `joint_names`.
    pub foot_indices: (usize, usize),
    /// Optional per-joint parent index; `None` entries mark roots.
    pub parent: Option<Vec<Option<usize>>>,
}

impl Skeleton {
    pub fn joint_count(&self) -> usize {
        self.joint_names.len()
    }

    /// The default desk-scale biped: pelvis, spine, head, two knees, two feet.
    pub fn default_biped() -> Self {
        Skeleton {
            joint_names: vec![
                "pelvis".into(),
                "spine".into(),
                "head".into(),
                "left_knee".into(),
                "right_knee".into(),
                "left_foot".into(),
                "right_foot".into(),
            ],
            foot_indices: (5, 6),
            parent: Some(vec![
                None,
                Some(0),
                Some(1),
                Some(0),
                Some(0),
                Some(3),
                Some(4),
            ]),
        }
    }
}

/// Fixed-rate sequence of skeletal poses. The central value type of the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence {
    pub fps: f64,
    /// `T x J x 3` joint positions in meters.
    pub frames: Array3<f64>,
    pub skeleton: Arc<Skeleton>,
}

impl MotionSequence {
    pub fn new(fps: f64, frames: Array3<f64>, skeleton: Arc<Skeleton>) -> Self {
        MotionSequence {
            fps,
            frames,
            skeleton,
        }
    }

    pub fn frame_count(&self) -> usize {
        self.frames.shape()[0]
    }

    pub fn joint_count(&self) -> usize {
        self.frames.shape()[1]
    }

    /// Per-frame pose dimension when frames are flattened row-wise (3J).
    pub fn pose_dim(&self) -> usize {
        self.joint_count() * 3
    }

    /// Flatten to a `T x 3J` matrix (row per frame, joints in order, xyz interleaved).
    pub fn to_flat(&self) -> Array2<f64> {
        let t = self.frame_count();
        let d = self.pose_dim();
        let mut out = Array2::zeros((t, d));
        for (i, frame) in self.frames.outer_iter().enumerate() {
            for (j, joint) in frame.outer_iter().enumerate() {
                out[[i, 3 * j]] = joint[0];
                out[[i, 3 * j + 1]] = joint[1];
                out[[i, 3 * j + 2]] = joint[2];
            }
        }
        out
    }

    /// Rebuild a motion from a `T x 3J` matrix, reusing this motion's fps and skeleton.
    pub fn with_flat(&self, flat: &Array2<f64>) -> MotionSequence {
        let t = flat.shape()[0];
        let j = self.joint_count();
        debug_assert_eq!(flat.shape()[1], 3 * j);
        let mut frames = Array3::zeros((t, j, 3));
        for i in 0..t {
            for jj in 0..j {
                frames[[i, jj, 0]] = flat[[i, 3 * jj]];
                frames[[i, jj, 1]] = flat[[i, 3 * jj + 1]];
                frames[[i, jj, 2]] = flat[[i, 3 * jj + 2]];
            }
        }
        MotionSequence::new(self.fps, frames, self.skeleton.clone())
    }

    /// Height of the lowest joint in the given frame.
    pub fn lowest_joint_height(&self, frame: usize) -> f64 {
        let mut h = f64::INFINITY;
        for j in 0..self.joint_count() {
            h = h.min(self.frames[[frame, j, 1]]);
        }
        h
    }

    /// Position of one joint in one frame.
    pub fn joint(&self, frame: usize, joint: usize) -> [f64; 3] {
        [
            self.frames[[frame, joint, 0]],
            self.frames[[frame, joint, 1]],
            self.frames[[frame, joint, 2]],
        ]
    }
}

/// Fixed-dimension semantic embedding conditioning the calibrator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionVector {
    pub values: Vec<f64>,
}

impl ConditionVector {
    pub fn new(values: Vec<f64>) -> Self {
        ConditionVector { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Where a record came from in the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Clean,
    Distorted,
    Refined,
    Generated,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Clean => "clean",
            Provenance::Distorted => "distorted",
            Provenance::Refined => "refined",
            Provenance::Generated => "generated",
        }
    }
}

/// A motion paired with its condition vector and bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionRecord {
    pub motion: MotionSequence,
    pub condition: Option<ConditionVector>,
    pub label: Option<String>,
    pub provenance: Provenance,
}

/// One broken invariant, named by field and rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

fn violation(field: impl Into<String>, rule: impl Into<String>) -> Violation {
    Violation {
        field: field.into(),
        rule: rule.into(),
    }
}

/// Check every type invariant of a record. Returns an empty list iff the
/// record is well formed; violations are data, not failures.
pub fn validate(record: &MotionRecord) -> Vec<Violation> {
    let mut out = Vec::new();
    let skel = &record.motion.skeleton;
    let j = skel.joint_count();

    if skel.joint_names.is_empty() {
        out.push(violation("skeleton.joint_names", "must be non-empty"));
    }
    {
        let mut seen = std::collections::HashSet::new();
        for name in &skel.joint_names {
            if !seen.insert(name.as_str()) {
                out.push(violation(
                    "skeleton.joint_names",
                    format!("duplicate joint name {:?}", name),
                ));
            }
        }
    }
    let (lf, rf) = skel.foot_indices;
    if lf >= j || rf >= j {
        out.push(violation(
            "skeleton.foot_indices",
            format!("indices ({lf}, {rf}) out of range for {j} joints"),
        ));
    }
    if lf == rf {
        out.push(violation("skeleton.foot_indices", "must be distinct"));
    }
    if let Some(parent) = &skel.parent {
        if parent.len() != j {
            out.push(violation(
                "skeleton.parent",
                format!("length {} does not match {} joints", parent.len(), j),
            ));
        }
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                if *p >= j {
                    out.push(violation(
                        format!("skeleton.parent[{i}]"),
                        format!("index {p} out of range"),
                    ));
                }
            }
        }
    }

    let t = record.motion.frame_count();
    if t < 2 {
        out.push(violation("frames", format!("need at least 2 frames, got {t}")));
    }
    if record.motion.joint_count() != j {
        out.push(violation(
            "frames",
            format!(
                "joint count {} does not match skeleton ({j})",
                record.motion.joint_count()
            ),
        ));
    }
    if !(record.motion.fps.is_finite() && record.motion.fps > 0.0) {
        out.push(violation("fps", format!("must be finite and > 0, got {}", record.motion.fps)));
    }
    for (i, frame) in record.motion.frames.outer_iter().enumerate() {
        if frame.iter().any(|v| !v.is_finite()) {
            out.push(violation(
                format!("frames[{i}]"),
                "contains a non-finite coordinate",
            ));
        }
    }

    if let Some(cond) = &record.condition {
        if cond.values.iter().any(|v| !v.is_finite()) {
            out.push(violation("condition", "contains a non-finite entry"));
        }
    }

    out
}

/// Check that every record in a corpus is valid and that condition
/// dimensions agree across the corpus.
pub fn validate_corpus(records: &[MotionRecord]) -> Vec<(usize, Violation)> {
    let mut out = Vec::new();
    let mut dim: Option<usize> = None;
    for (i, rec) in records.iter().enumerate() {
        for v in validate(rec) {
            out.push((i, v));
        }
        if let Some(cond) = &rec.condition {
            match dim {
                None => dim = Some(cond.dim()),
                Some(d) if d != cond.dim() => out.push((
                    i,
                    violation(
                        "condition",
                        format!("dimension {} differs from corpus dimension {d}", cond.dim()),
                    ),
                )),
                _ => {}
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    fn small_record() -> MotionRecord {
        let skel = Arc::new(Skeleton::default_biped());
        let frames = Array3::from_shape_fn((40, 7, 3), |(t, j, c)| {
            0.1 * t as f64 + 0.01 * j as f64 + 0.001 * c as f64
        });
        MotionRecord {
            motion: MotionSequence::new(20.0, frames, skel),
            condition: Some(ConditionVector::new(vec![0.0; 16])),
            label: Some("test".into()),
            provenance: Provenance::Clean,
        }
    }

    #[test]
    fn well_formed_record_passes() {
        assert!(validate(&small_record()).is_empty());
    }

    #[test]
    fn zero_fps_is_flagged() {
        let mut rec = small_record();
        rec.motion.fps = 0.0;
        let v = validate(&rec);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "fps");
    }

    #[test]
    fn nan_coordinate_names_frame() {
        let mut rec = small_record();
        rec.motion.frames[[3, 2, 1]] = f64::NAN;
        let v = validate(&rec);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "frames[3]");
    }

    #[test]
    fn short_sequence_is_flagged() {
        let mut rec = small_record();
        rec.motion.frames = Array3::zeros((1, 7, 3));
        let v = validate(&rec);
        assert!(v.iter().any(|v| v.field == "frames"));
    }

    #[test]
    fn duplicate_joint_names_flagged() {
        let mut rec = small_record();
        let mut skel = (*rec.motion.skeleton).clone();
        skel.joint_names[1] = "pelvis".into();
        rec.motion.skeleton = Arc::new(skel);
        let v = validate(&rec);
        assert!(v.iter().any(|v| v.field == "skeleton.joint_names"));
    }

    #[test]
    fn coincident_foot_indices_flagged() {
        let mut rec = small_record();
        let mut skel = (*rec.motion.skeleton).clone();
        skel.foot_indices = (5, 5);
        rec.motion.skeleton = Arc::new(skel);
        let v = validate(&rec);
        assert!(v.iter().any(|v| v.field == "skeleton.foot_indices"));
    }

    #[test]
    fn flat_round_trip() {
        let rec = small_record();
        let flat = rec.motion.to_flat();
        let back = rec.motion.with_flat(&flat);
        assert_eq!(rec.motion, back);
    }
}
