//! Interchange format round-trips and validation completeness.

mod common;

use std::path::Path;
use std::sync::Arc;

use proptest::prelude::*;

use mocal::io::{read_corpus, read_motion_file, record_from_json, record_to_json, write_corpus_jsonl, write_motion_file};
use mocal::motion::{validate, validate_corpus, ConditionVector, MotionRecord, MotionSequence, Provenance, Skeleton};
use ndarray::Array3;

#[test]
fn file_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let rec = common::walking_record(3);
    let path = dir.path().join("motion.json");
    write_motion_file(&rec, &path).unwrap();
    let back = read_motion_file(&path).unwrap();
    assert_eq!(rec, back);
}

#[test]
fn jsonl_corpus_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let records = vec![
        common::walking_record(1),
        common::running_record(2),
        common::walking_record(3),
    ];
    let path = dir.path().join("corpus.jsonl");
    write_corpus_jsonl(&records, &path).unwrap();
    let back = read_corpus(&path).unwrap();
    assert_eq!(records, back);
}

/// Every type invariant is caught by `validate` on a constructed
/// counterexample.
#[test]
fn validation_catches_every_invariant() {
    let base = common::walking_record(5);

    // fps <= 0
    let mut rec = base.clone();
    rec.motion.fps = -1.0;
    assert!(validate(&rec).iter().any(|v| v.field == "fps"));

    // fewer than 2 frames
    let mut rec = base.clone();
    rec.motion.frames = Array3::zeros((1, 7, 3));
    assert!(validate(&rec).iter().any(|v| v.field == "frames"));

    // non-finite coordinate, named by frame
    let mut rec = base.clone();
    rec.motion.frames[[7, 1, 2]] = f64::INFINITY;
    assert!(validate(&rec).iter().any(|v| v.field == "frames[7]"));

    // joint count mismatch with the skeleton
    let mut rec = base.clone();
    rec.motion.frames = Array3::zeros((5, 6, 3));
    assert!(validate(&rec).iter().any(|v| v.field == "frames"));

    // empty joint list
    let mut rec = base.clone();
    let skel = Skeleton {
        joint_names: vec![],
        foot_indices: (0, 0),
        parent: None,
    };
    rec.motion.skeleton = Arc::new(skel);
    assert!(validate(&rec)
        .iter()
        .any(|v| v.field == "skeleton.joint_names"));

    // duplicate joint names
    let mut rec = base.clone();
    let mut skel = (*rec.motion.skeleton).clone();
    skel.joint_names[0] = skel.joint_names[1].clone();
    rec.motion.skeleton = Arc::new(skel);
    assert!(validate(&rec)
        .iter()
        .any(|v| v.field == "skeleton.joint_names"));

    // foot indices out of range / identical
    let mut rec = base.clone();
    let mut skel = (*rec.motion.skeleton).clone();
    skel.foot_indices = (5, 99);
    rec.motion.skeleton = Arc::new(skel);
    assert!(validate(&rec)
        .iter()
        .any(|v| v.field == "skeleton.foot_indices"));
    let mut rec = base.clone();
    let mut skel = (*rec.motion.skeleton).clone();
    skel.foot_indices = (2, 2);
    rec.motion.skeleton = Arc::new(skel);
    assert!(validate(&rec)
        .iter()
        .any(|v| v.field == "skeleton.foot_indices"));

    // non-finite condition entry
    let mut rec = base.clone();
    rec.condition = Some(ConditionVector::new(vec![f64::NAN; 16]));
    assert!(validate(&rec).iter().any(|v| v.field == "condition"));

    // inconsistent condition dimensions across a corpus
    let mut other = base.clone();
    other.condition = Some(ConditionVector::new(vec![0.0; 8]));
    let violations = validate_corpus(&[base.clone(), other]);
    assert!(violations.iter().any(|(i, v)| *i == 1 && v.field == "condition"));

    // the untouched record stays clean
    assert!(validate(&base).is_empty());
}

#[test]
fn corpus_directory_reads_in_filename_order() {
    let dir = tempfile::tempdir().unwrap();
    let records = vec![common::walking_record(10), common::walking_record(11)];
    mocal::io::write_corpus_dir(&records, dir.path()).unwrap();
    let back = read_corpus(dir.path()).unwrap();
    assert_eq!(records, back);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Write-then-read reproduces every field exactly for arbitrary valid records.
    #[test]
    fn round_trip_property(seed in 0u64..1_000_000, frames in 2usize..30, with_label in any::<bool>()) {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let mut rec = common::random_record(&mut rng, frames);
        rec.label = with_label.then(|| format!("label-{seed}"));
        rec.provenance = Provenance::Clean;
        let json = record_to_json(&rec);
        let back = record_from_json(&json, Path::new("<prop>")).unwrap();
        prop_assert_eq!(rec, back);
    }
}

#[test]
fn condition_absent_round_trips() {
    let skel = Arc::new(Skeleton::default_biped());
    let rec = MotionRecord {
        motion: MotionSequence::new(24.0, Array3::zeros((3, 7, 3)), skel),
        condition: None,
        label: None,
        provenance: Provenance::Distorted,
    };
    let json = record_to_json(&rec);
    let back = record_from_json(&json, Path::new("<mem>")).unwrap();
    assert_eq!(rec, back);
}
