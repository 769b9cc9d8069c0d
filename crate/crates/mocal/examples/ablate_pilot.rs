//! Scratch pilot for the ablation cell sizing. Not part of the deliverable tests.

use std::time::Instant;

use mocal::commands::{run_ablation, DatagenSection, ExperimentConfig, ModelSection};
use mocal::datagen::{generate_corpus, ParamRanges};
use mocal::training::{Strategy, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    let n_train: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(300);
    let t_hat: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(100);
    let seed: u64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(11);

    let ranges = ParamRanges {
        duration: (2.0, 3.0),
        ..Default::default()
    };
    let cfg = ExperimentConfig {
        seed,
        datagen: DatagenSection {
            n: n_train,
            n_test: 100,
            fps: 20.0,
            ranges,
        },
        model: ModelSection {
            d_model: 64,
            n_layers: 2,
            n_heads: 4,
            max_frames: 80,
        },
        train: TrainConfig {
            strategy: Strategy::Denoise,
            epochs,
            batch_size: 16,
            learning_rate: 3e-4,
            seed,
            ..Default::default()
        },
        t_hat,
        ..Default::default()
    };

    let t0 = Instant::now();
    let corpus = generate_corpus(cfg.datagen.n, &cfg.datagen.ranges, cfg.datagen.fps, cfg.seed).unwrap();
    let report = run_ablation(&cfg, &corpus).unwrap();
    println!("total: {:.1}s", t0.elapsed().as_secs_f64());
    println!(
        "clean    : skate {:.4}",
        report.clean.skate_ratio
    );
    println!(
        "distorted: penetrate {:.5} skate {:.4} float {:.4} mpjpe {:.2}",
        report.distorted.penetrate_mean,
        report.distorted.skate_ratio,
        report.distorted.float_mean,
        report.distorted.mpjpe.unwrap()
    );
    for row in &report.rows {
        println!(
            "{:<15}: penetrate {:.5} skate {:.4} (dist-to-clean {:.4}) float {:.4} mpjpe {:.2}",
            row.name,
            row.report.penetrate_mean,
            row.report.skate_ratio,
            row.skate_distance_to_clean,
            row.report.float_mean,
            row.report.mpjpe.unwrap()
        );
    }
}
