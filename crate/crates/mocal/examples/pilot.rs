//! Scratch pilot for sizing the end-to-end denoise run. Not part of the deliverable tests.

use std::time::Instant;

use mocal::datagen::{generate_corpus, ParamRanges};
use mocal::distortion::{sample_spec, apply_spec, DistortionPolicy};
use mocal::metrics::{evaluate_corpus, ContactParams};
use mocal::model::{CalibratorConfig, CalibratorMode};
use mocal::motion::{MotionRecord, Provenance};
use mocal::training::{refine_iterative, train, Strategy, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let lr: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(3e-4);
    let d_model: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(64);
    let n_layers: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(2);
    let n_train: usize = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(500);

    let ranges = ParamRanges {
        duration: (2.0, 3.0),
        ..Default::default()
    };
    let t0 = Instant::now();
    let cseed: u64 = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(42);
    let tseed: u64 = args.get(7).and_then(|s| s.parse().ok()).unwrap_or(7);
    let train_corpus = generate_corpus(n_train, &ranges, 20.0, cseed).unwrap();
    let test_clean = generate_corpus(100, &ranges, 20.0, 4242).unwrap();
    println!("datagen: {:.1}s", t0.elapsed().as_secs_f64());

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let test_distorted: Vec<MotionRecord> = test_clean
        .iter()
        .map(|r| {
            let spec = sample_spec(&mut rng);
            MotionRecord {
                motion: apply_spec(&r.motion, &spec),
                condition: r.condition.clone(),
                label: r.label.clone(),
                provenance: Provenance::Distorted,
            }
        })
        .collect();

    let d_p = train_corpus[0].motion.pose_dim();
    let d_e = train_corpus[0].condition.as_ref().unwrap().dim();
    let model_config = CalibratorConfig {
        d_p,
        d_e,
        d_model,
        n_layers,
        n_heads: 4,
        max_frames: 80,
        mode: CalibratorMode::Residual,
    };
    let t_train: usize = args.get(8).and_then(|s| s.parse().ok()).unwrap_or(100);
    let config = TrainConfig {
        strategy: Strategy::Denoise,
        epochs,
        batch_size: 16,
        learning_rate: lr,
        seed: tseed,
        t_train,
        ..Default::default()
    };

    let t0 = Instant::now();
    let outcome = train(&train_corpus, model_config, &config, DistortionPolicy::default()).unwrap();
    let train_time = t0.elapsed().as_secs_f64();
    println!("train: {train_time:.1}s");
    for e in &outcome.report.epochs {
        println!("  epoch {:2} denoise {:.3e}", e.epoch, e.terms["denoise"]);
    }

    let contact = ContactParams::default();
    let t0 = Instant::now();
    for t_hat in [1usize, 10, t_train] {
        let refined: Vec<MotionRecord> = test_distorted
            .iter()
            .map(|r| MotionRecord {
                motion: refine_iterative(
                    &outcome.model,
                    r.condition.as_ref().unwrap(),
                    &r.motion,
                    t_hat,
                )
                .unwrap(),
                condition: r.condition.clone(),
                label: r.label.clone(),
                provenance: Provenance::Refined,
            })
            .collect();
        let rep_d = evaluate_corpus(&test_clean, &test_distorted, &contact, None).unwrap();
        let rep_r = evaluate_corpus(&test_clean, &refined, &contact, None).unwrap();
        println!(
            "t_hat {t_hat:3}: penetrate {:.5} -> {:.5} ({:.2}x)  mpjpe {:.2} -> {:.2}  float {:.4} -> {:.4}  skate {:.4} -> {:.4}",
            rep_d.penetrate_mean,
            rep_r.penetrate_mean,
            rep_r.penetrate_mean / rep_d.penetrate_mean.max(1e-12),
            rep_d.mpjpe.unwrap(),
            rep_r.mpjpe.unwrap(),
            rep_d.float_mean,
            rep_r.float_mean,
            rep_d.skate_ratio,
            rep_r.skate_ratio,
        );
    }
    println!("refine+eval: {:.1}s", t0.elapsed().as_secs_f64());
}
