//! Experiment configuration and the command implementations behind the CLI.
//!
//! Each `cmd_*` function is the full implementation of one subcommand: it
//! reads and writes the declared paths and returns the in-memory result so
//! tests can drive the same code paths the binary does.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::{generate_corpus, ParamRanges};
use crate::distortion::{sample_spec_with_policy, apply_spec, DistortionPolicy, DistortionSpec};
use crate::error::{Error, Result};
use crate::io::{read_corpus, write_corpus_dir, write_corpus_jsonl, write_motion_file};
use crate::metrics::{evaluate_corpus, format_table, ContactParams, MetricsReport};
use crate::model::{
    load_checkpoint, save_checkpoint, CalibratorConfig, CalibratorMode, ConditionRegressor,
};
use crate::motion::{MotionRecord, Provenance};
use crate::plot::{plot_height_trace, plot_trajectory};
use crate::training::{refine_iterative, refine_single, train, Strategy, TrainConfig, TrainReport};

fn default_paths() -> PathsSection {
    PathsSection {
        corpus: PathBuf::from("runs/corpus"),
        checkpoints: PathBuf::from("runs/checkpoints"),
        reports: PathBuf::from("runs/reports"),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathsSection {
    pub corpus: PathBuf,
    pub checkpoints: PathBuf,
    pub reports: PathBuf,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DatagenSection {
    /// Training corpus size.
    pub n: usize,
    /// Held-out test corpus size (used by `ablate`).
    pub n_test: usize,
    pub fps: f64,
    pub ranges: ParamRanges,
}

impl Default for DatagenSection {
    fn default() -> Self {
        DatagenSection {
            n: 200,
            n_test: 64,
            fps: 20.0,
            ranges: ParamRanges::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModelSection {
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub max_frames: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            d_model: 128,
            n_layers: 4,
            n_heads: 4,
            max_frames: 200,
        }
    }
}

impl ModelSection {
    pub fn calibrator_config(&self, d_p: usize, d_e: usize, mode: CalibratorMode) -> CalibratorConfig {
        CalibratorConfig {
            d_p,
            d_e,
            d_model: self.d_model,
            n_layers: self.n_layers,
            n_heads: self.n_heads,
            max_frames: self.max_frames,
            mode,
        }
    }
}

/// One experiment, fully described: a config file is the canonical artifact,
/// command-line flags override individual fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_paths")]
    pub paths: PathsSection,
    #[serde(default)]
    pub datagen: DatagenSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub contact: ContactParams,
    #[serde(default)]
    pub distortion: DistortionPolicy,
    #[serde(default = "default_t_hat")]
    pub t_hat: usize,
}

fn default_t_hat() -> usize {
    50
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            paths: default_paths(),
            datagen: DatagenSection::default(),
            model: ModelSection::default(),
            train: TrainConfig::default(),
            contact: ContactParams::default(),
            distortion: DistortionPolicy::default(),
            t_hat: default_t_hat(),
        }
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
}

#[derive(Serialize, Deserialize)]
struct GenerateManifest {
    seed: u64,
    n: usize,
    fps: f64,
    ranges: ParamRanges,
}

/// Generate a clean corpus into `out` plus a manifest echoing the parameters.
pub fn cmd_generate(cfg: &ExperimentConfig, out: &Path) -> Result<usize> {
    let corpus = generate_corpus(cfg.datagen.n, &cfg.datagen.ranges, cfg.datagen.fps, cfg.seed)?;
    write_corpus_dir(&corpus, out)?;
    let manifest = GenerateManifest {
        seed: cfg.seed,
        n: cfg.datagen.n,
        fps: cfg.datagen.fps,
        ranges: cfg.datagen.ranges,
    };
    let manifest_path = out.join("manifest.json");
    fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )
    .map_err(|e| Error::io(&manifest_path, e))?;
    eprintln!("[mocal] wrote {} records to {}", corpus.len(), out.display());
    Ok(corpus.len())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SpecSidecarEntry {
    pub index: usize,
    pub bias: f64,
    pub sigma: f64,
}

enum CorpusKind {
    Dir,
    Jsonl,
    Single,
}

fn corpus_kind(path: &Path) -> CorpusKind {
    if path.is_dir() {
        CorpusKind::Dir
    } else if path.extension().and_then(|e| e.to_str()) == Some("jsonl") {
        CorpusKind::Jsonl
    } else {
        CorpusKind::Single
    }
}

fn write_like_input(records: &[MotionRecord], input: &Path, output: &Path) -> Result<PathBuf> {
    match corpus_kind(input) {
        CorpusKind::Dir => {
            write_corpus_dir(records, output)?;
            Ok(output.join("distortion_specs.json"))
        }
        CorpusKind::Jsonl => {
            write_corpus_jsonl(records, output)?;
            Ok(output.with_extension("specs.json"))
        }
        CorpusKind::Single => {
            write_motion_file(&records[0], output)?;
            Ok(output.with_extension("specs.json"))
        }
    }
}

/// Distort a corpus (or single record). `bias`/`sigma` of `None` sample per
/// record from the configured ranges, honoring the policy toggles; fixed
/// values apply to every record. Writes a sidecar listing the spec per record.
pub fn cmd_distort(
    cfg: &ExperimentConfig,
    input: &Path,
    output: &Path,
    bias: Option<f64>,
    sigma: Option<f64>,
) -> Result<Vec<DistortionSpec>> {
    let corpus = read_corpus(input)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out_records = Vec::with_capacity(corpus.len());
    let mut specs = Vec::with_capacity(corpus.len());
    for rec in &corpus {
        let sampled = sample_spec_with_policy(&mut rng, cfg.distortion);
        let spec = DistortionSpec {
            bias: bias.unwrap_or(sampled.bias),
            sigma: sigma.unwrap_or(sampled.sigma),
        };
        let motion = apply_spec(&rec.motion, &spec);
        out_records.push(MotionRecord {
            motion,
            condition: rec.condition.clone(),
            label: rec.label.clone(),
            provenance: Provenance::Distorted,
        });
        specs.push(spec);
    }
    let sidecar_path = write_like_input(&out_records, input, output)?;
    let entries: Vec<SpecSidecarEntry> = specs
        .iter()
        .enumerate()
        .map(|(index, s)| SpecSidecarEntry {
            index,
            bias: s.bias,
            sigma: s.sigma,
        })
        .collect();
    fs::write(
        &sidecar_path,
        serde_json::to_string_pretty(&entries).expect("sidecar serializes"),
    )
    .map_err(|e| Error::io(&sidecar_path, e))?;
    eprintln!(
        "[mocal] distorted {} records -> {} (specs in {})",
        out_records.len(),
        output.display(),
        sidecar_path.display()
    );
    Ok(specs)
}

/// Train on a clean corpus; writes `checkpoint.json`, per-epoch `report.jsonl`,
/// and `summary.json` under `out`.
pub fn cmd_train(cfg: &ExperimentConfig, corpus_path: &Path, out: &Path) -> Result<TrainReport> {
    let corpus = read_corpus(corpus_path)?;
    let first = corpus
        .first()
        .ok_or_else(|| Error::Params("empty corpus".into()))?;
    let d_p = first.motion.pose_dim();
    let d_e = first
        .condition
        .as_ref()
        .ok_or_else(|| Error::Params("training corpus records need condition vectors".into()))?
        .dim();

    let mode = cfg.train.strategy.required_mode();
    let calib_config = cfg.model.calibrator_config(d_p, d_e, mode);

    eprintln!(
        "[mocal] training strategy {:?} on {} records (seed {})",
        cfg.train.strategy,
        corpus.len(),
        cfg.train.seed
    );
    let outcome = train(&corpus, calib_config, &cfg.train, cfg.distortion)?;

    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let checkpoint_path = out.join("checkpoint.json");
    save_checkpoint(&outcome.model, &checkpoint_path)?;

    let mut report = outcome.report;
    report.checkpoint_path = Some(checkpoint_path.to_string_lossy().to_string());

    let report_path = out.join("report.jsonl");
    let mut lines = String::new();
    for epoch in &report.epochs {
        lines.push_str(&serde_json::to_string(epoch).expect("epoch serializes"));
        lines.push('\n');
    }
    fs::write(&report_path, lines).map_err(|e| Error::io(&report_path, e))?;

    let summary_path = out.join("summary.json");
    fs::write(
        &summary_path,
        serde_json::to_string_pretty(&report).expect("report serializes"),
    )
    .map_err(|e| Error::io(&summary_path, e))?;

    eprintln!(
        "[mocal] trained {} epochs in {:.1}s, checkpoint at {}",
        report.epochs.len(),
        report.wall_time_s,
        checkpoint_path.display()
    );
    Ok(report)
}

/// Refine a corpus through a checkpoint: iterative for residual-mode models
/// (using `t_hat`), single-step for direct-mode models.
pub fn cmd_refine(
    cfg: &ExperimentConfig,
    checkpoint: &Path,
    input: &Path,
    output: &Path,
) -> Result<usize> {
    let model = load_checkpoint(checkpoint)?;
    let corpus = read_corpus(input)?;
    let mut refined = Vec::with_capacity(corpus.len());
    for (i, rec) in corpus.iter().enumerate() {
        let condition = rec
            .condition
            .as_ref()
            .ok_or_else(|| Error::Params(format!("record {i} lacks a condition vector")))?;
        let motion = match model.config.mode {
            CalibratorMode::Residual => refine_iterative(&model, condition, &rec.motion, cfg.t_hat)?,
            CalibratorMode::Direct => refine_single(&model, condition, &rec.motion)?,
        };
        refined.push(MotionRecord {
            motion,
            condition: rec.condition.clone(),
            label: rec.label.clone(),
            provenance: Provenance::Refined,
        });
    }
    write_like_input(&refined, input, output)?;
    eprintln!(
        "[mocal] refined {} records -> {}",
        refined.len(),
        output.display()
    );
    Ok(refined.len())
}

/// Evaluate `test` against `ref`: metrics JSON, fixed-width table, and the
/// two diagnostic plots, all under `out`. The retrieval encoder is fitted on
/// the reference corpus.
pub fn cmd_evaluate(
    cfg: &ExperimentConfig,
    reference_path: &Path,
    test_path: &Path,
    out: &Path,
) -> Result<MetricsReport> {
    let reference = read_corpus(reference_path)?;
    let test = read_corpus(test_path)?;

    let encoder = ConditionRegressor::fit(&reference, &cfg.contact, 1e-3).ok();
    let report = evaluate_corpus(
        &reference,
        &test,
        &cfg.contact,
        encoder.as_ref().map(|e| e as &dyn crate::metrics::MotionEncoder),
    )?;

    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let json_path = out.join("metrics.json");
    fs::write(
        &json_path,
        serde_json::to_string_pretty(&report).expect("report serializes"),
    )
    .map_err(|e| Error::io(&json_path, e))?;

    let table = format_table(&[("test".to_string(), &report)]);
    let table_path = out.join("table.txt");
    fs::write(&table_path, &table).map_err(|e| Error::io(&table_path, e))?;
    println!("{table}");

    let traces: Vec<(String, &crate::motion::MotionSequence)> = test
        .iter()
        .take(3)
        .enumerate()
        .map(|(i, r)| (format!("test[{i}]"), &r.motion))
        .collect();
    plot_height_trace(
        &traces,
        cfg.contact.contact_height_threshold,
        out.join("height_trace.svg"),
    )?;
    plot_trajectory(&test[0].motion, out.join("trajectory.svg"))?;

    eprintln!("[mocal] evaluation written to {}", out.display());
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub policy: DistortionPolicy,
    pub report: MetricsReport,
    pub skate_distance_to_clean: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationReport {
    pub seed: u64,
    /// Self-evaluation of the clean test corpus (reference numbers).
    pub clean: MetricsReport,
    /// The common distorted test corpus before refinement.
    pub distorted: MetricsReport,
    pub rows: Vec<AblationRow>,
}

/// Train the denoising strategy under bias-only, smoothing-only, and combined
/// distortions, then evaluate each model on one shared test set distorted with
/// both families.
pub fn run_ablation(cfg: &ExperimentConfig, train_corpus: &[MotionRecord]) -> Result<AblationReport> {
    let test_clean = generate_corpus(
        cfg.datagen.n_test,
        &cfg.datagen.ranges,
        cfg.datagen.fps,
        cfg.seed.wrapping_add(0x5EED_7E57),
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let test_distorted: Vec<MotionRecord> = test_clean
        .iter()
        .map(|rec| {
            let spec = sample_spec_with_policy(&mut rng, DistortionPolicy::default());
            MotionRecord {
                motion: apply_spec(&rec.motion, &spec),
                condition: rec.condition.clone(),
                label: rec.label.clone(),
                provenance: Provenance::Distorted,
            }
        })
        .collect();

    let clean_report = evaluate_corpus(&test_clean, &test_clean, &cfg.contact, None)?;
    let distorted_report = evaluate_corpus(&test_clean, &test_distorted, &cfg.contact, None)?;
    let clean_skate = clean_report.skate_ratio;

    let first = &train_corpus[0];
    let d_p = first.motion.pose_dim();
    let d_e = first
        .condition
        .as_ref()
        .ok_or_else(|| Error::Params("ablation corpus records need condition vectors".into()))?
        .dim();
    let calib_config = cfg
        .model
        .calibrator_config(d_p, d_e, CalibratorMode::Residual);
    let train_config = TrainConfig {
        strategy: Strategy::Denoise,
        seed: cfg.seed,
        ..cfg.train
    };

    let cells = [
        ("bias_only", DistortionPolicy::bias_only()),
        ("smoothing_only", DistortionPolicy::smoothing_only()),
        ("bias+smoothing", DistortionPolicy::default()),
    ];

    let mut rows = Vec::new();
    for (name, policy) in cells {
        eprintln!("[mocal] ablation cell {name}: training");
        let outcome = train(train_corpus, calib_config, &train_config, policy)?;
        let refined: Vec<MotionRecord> = test_distorted
            .iter()
            .map(|rec| {
                let condition = rec.condition.as_ref().expect("generated test has conditions");
                let motion = refine_iterative(&outcome.model, condition, &rec.motion, cfg.t_hat)?;
                Ok(MotionRecord {
                    motion,
                    condition: rec.condition.clone(),
                    label: rec.label.clone(),
                    provenance: Provenance::Refined,
                })
            })
            .collect::<Result<_>>()?;
        let report = evaluate_corpus(&test_clean, &refined, &cfg.contact, None)?;
        rows.push(AblationRow {
            name: name.to_string(),
            policy,
            skate_distance_to_clean: (report.skate_ratio - clean_skate).abs(),
            report,
        });
    }

    Ok(AblationReport {
        seed: cfg.seed,
        clean: clean_report,
        distorted: distorted_report,
        rows,
    })
}

/// Run the ablation and write `ablation.json` plus a comparison table.
pub fn cmd_ablate(
    cfg: &ExperimentConfig,
    corpus_path: Option<&Path>,
    out: &Path,
) -> Result<AblationReport> {
    let train_corpus = match corpus_path {
        Some(p) => read_corpus(p)?,
        None => generate_corpus(cfg.datagen.n, &cfg.datagen.ranges, cfg.datagen.fps, cfg.seed)?,
    };
    let report = run_ablation(cfg, &train_corpus)?;

    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let json_path = out.join("ablation.json");
    fs::write(
        &json_path,
        serde_json::to_string_pretty(&report).expect("ablation serializes"),
    )
    .map_err(|e| Error::io(&json_path, e))?;

    let mut table_rows: Vec<(String, &MetricsReport)> = vec![
        ("clean".to_string(), &report.clean),
        ("distorted".to_string(), &report.distorted),
    ];
    for row in &report.rows {
        table_rows.push((row.name.clone(), &row.report));
    }
    let table = format_table(&table_rows);
    let table_path = out.join("table.txt");
    fs::write(&table_path, &table).map_err(|e| Error::io(&table_path, e))?;
    println!("{table}");

    eprintln!("[mocal] ablation written to {}", out.display());
    Ok(report)
}
