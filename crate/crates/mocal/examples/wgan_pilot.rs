//! Scratch pilot for the adversarial training sanity run. Not part of the deliverable tests.

use std::time::Instant;

use mocal::datagen::{generate_corpus, ParamRanges};
use mocal::distortion::DistortionPolicy;
use mocal::model::{CalibratorConfig, CalibratorMode};
use mocal::training::{train, Strategy, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let steps_target: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let d_model: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(48);
    let lr: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1e-4);

    let ranges = ParamRanges {
        duration: (1.5, 2.0),
        ..Default::default()
    };
    let corpus = generate_corpus(200, &ranges, 20.0, 31).unwrap();
    let d_p = corpus[0].motion.pose_dim();
    let d_e = corpus[0].condition.as_ref().unwrap().dim();

    let batches_per_epoch = corpus.len().div_ceil(16);
    let epochs = steps_target.div_ceil(batches_per_epoch);
    println!("{batches_per_epoch} batches/epoch, {epochs} epochs for ~{steps_target} steps");

    let model_config = CalibratorConfig {
        d_p,
        d_e,
        d_model,
        n_layers: 2,
        n_heads: 4,
        max_frames: 64,
        mode: CalibratorMode::Direct,
    };
    let config = TrainConfig {
        strategy: Strategy::Wgan,
        epochs,
        batch_size: 16,
        learning_rate: lr,
        seed: 8,
        ..Default::default()
    };

    let t0 = Instant::now();
    let outcome = train(&corpus, model_config, &config, DistortionPolicy::default()).unwrap();
    println!("train: {:.1}s", t0.elapsed().as_secs_f64());

    let recon = &outcome.report.generator_recon_steps;
    println!("{} generator updates recorded", recon.len());
    let at_10 = recon.iter().find(|(s, _)| *s >= 10).unwrap();
    let last = recon.last().unwrap();
    let tail_mean = recon.iter().rev().take(5).map(|(_, v)| v).sum::<f64>() / 5.0;
    println!(
        "recon at step {}: {:.5}; final step {}: {:.5}; tail mean {:.5}; ratio {:.3}",
        at_10.0,
        at_10.1,
        last.0,
        last.1,
        tail_mean,
        tail_mean / at_10.1
    );
    for e in outcome.report.epochs.iter().step_by(10) {
        println!(
            "  epoch {:3} loss_d {:+.4} penalty {:.4} recon {:.5}",
            e.epoch,
            e.terms.get("loss_d").copied().unwrap_or(f64::NAN),
            e.terms.get("penalty").copied().unwrap_or(f64::NAN),
            e.terms.get("recon").copied().unwrap_or(f64::NAN),
        );
    }
}
