//! Deliberately naive reference implementations used by the test suites to
//! cross-check mocal: an exact-residual model for telescoping tests, contact
//! metrics written as plain per-frame loops, and a central-difference
//! gradient estimator. Nothing here is imported by production code paths.

use mocal::error::{Error, Result};
use mocal::metrics::ContactParams;
use mocal::model::ResidualPredictor;
use mocal::motion::{ConditionVector, MotionSequence};

/// The exact constant residual `(m_d - m_gt) / T` of the linear interpolation
/// schedule, independent of the queried step and input. Plugging it into the
/// iterative refiner with `t_hat = T` telescopes a distorted motion back to
/// its clean source.
pub struct OracleResidualModel {
    residual: MotionSequence,
}

impl OracleResidualModel {
    pub fn new(m_gt: &MotionSequence, m_d: &MotionSequence, t_total: usize) -> Result<Self> {
        if m_gt.frame_count() != m_d.frame_count() || m_gt.joint_count() != m_d.joint_count() {
            return Err(Error::shape(
                "oracle residual",
                format!("{}x{}", m_gt.frame_count(), m_gt.joint_count()),
                format!("{}x{}", m_d.frame_count(), m_d.joint_count()),
            ));
        }
        if t_total == 0 {
            return Err(Error::Params("t_total must be >= 1".into()));
        }
        let frames = (&m_d.frames - &m_gt.frames) / t_total as f64;
        Ok(OracleResidualModel {
            residual: MotionSequence::new(m_gt.fps, frames, m_gt.skeleton.clone()),
        })
    }
}

impl ResidualPredictor for OracleResidualModel {
    fn predict_residual(
        &self,
        _condition: &ConditionVector,
        motion: &MotionSequence,
        _t: usize,
    ) -> Result<MotionSequence> {
        if motion.frame_count() != self.residual.frame_count() {
            return Err(Error::shape(
                "oracle residual",
                self.residual.frame_count(),
                motion.frame_count(),
            ));
        }
        Ok(self.residual.clone())
    }
}

/// Contact metrics recomputed with unoptimized double loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleContactMetrics {
    pub skate_ratio: f64,
    pub float_mean: f64,
    pub penetrate_mean: f64,
    pub clip_mean: f64,
}

pub fn oracle_metrics(motion: &MotionSequence, params: &ContactParams) -> OracleContactMetrics {
    let t = motion.frame_count();
    let feet = [motion.skeleton.foot_indices.0, motion.skeleton.foot_indices.1];

    // Skate: contact frames with a successor whose horizontal travel exceeds
    // the threshold.
    let mut skate_num = 0usize;
    let mut skate_den = 0usize;
    for i in 0..t {
        if i + 1 >= t {
            continue;
        }
        for &foot in &feet {
            let y = motion.frames[[i, foot, 1]];
            if y < params.contact_height_threshold {
                skate_den += 1;
                let dx = motion.frames[[i + 1, foot, 0]] - motion.frames[[i, foot, 0]];
                let dz = motion.frames[[i + 1, foot, 2]] - motion.frames[[i, foot, 2]];
                if (dx * dx + dz * dz).sqrt() > params.skate_displacement_threshold {
                    skate_num += 1;
                }
            }
        }
    }
    let skate_ratio = if skate_den == 0 {
        0.0
    } else {
        skate_num as f64 / skate_den as f64
    };

    // Float / penetrate over frames where contact occurs; fall back to all
    // frames when no frame qualifies.
    let mut lowest = vec![f64::INFINITY; t];
    for i in 0..t {
        for j in 0..motion.joint_count() {
            if motion.frames[[i, j, 1]] < lowest[i] {
                lowest[i] = motion.frames[[i, j, 1]];
            }
        }
    }
    let mut band = vec![false; t];
    let mut any = false;
    for i in 0..t {
        let foot_contact = feet
            .iter()
            .any(|&f| motion.frames[[i, f, 1]] < params.contact_height_threshold);
        band[i] = foot_contact || lowest[i].abs() <= params.contact_height_threshold;
        any = any || band[i];
    }
    let mut float_sum = 0.0;
    let mut pen_sum = 0.0;
    let mut count = 0usize;
    for i in 0..t {
        if any && !band[i] {
            continue;
        }
        if lowest[i] > 0.0 {
            float_sum += lowest[i];
        } else {
            pen_sum += -lowest[i];
        }
        count += 1;
    }
    let (float_mean, penetrate_mean) = if count == 0 {
        (0.0, 0.0)
    } else {
        (float_sum / count as f64, pen_sum / count as f64)
    };

    // Clip: mean shortfall of the inter-foot distance below the threshold.
    let mut clip_sum = 0.0;
    for i in 0..t {
        let mut d2 = 0.0;
        for c in 0..3 {
            let diff = motion.frames[[i, feet[0], c]] - motion.frames[[i, feet[1], c]];
            d2 += diff * diff;
        }
        let d = d2.sqrt();
        if d < params.clip_distance_threshold {
            clip_sum += params.clip_distance_threshold - d;
        }
    }

    OracleContactMetrics {
        skate_ratio,
        float_mean,
        penetrate_mean,
        clip_mean: clip_sum / t as f64,
    }
}

/// Central-difference gradient of `loss` at `params`.
///
/// `epsilon` should sit in `[1e-6, 1e-4]` for 64-bit arithmetic. Errors if any
/// probe produces a non-finite loss.
pub fn finite_difference_gradient(
    loss: &mut dyn FnMut(&[f64]) -> Result<f64>,
    params: &[f64],
    epsilon: f64,
) -> Result<Vec<f64>> {
    let mut grad = Vec::with_capacity(params.len());
    let mut probe = params.to_vec();
    for i in 0..params.len() {
        let original = probe[i];
        probe[i] = original + epsilon;
        let plus = loss(&probe)?;
        probe[i] = original - epsilon;
        let minus = loss(&probe)?;
        probe[i] = original;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Params(format!(
                "non-finite loss probe at parameter {i}: {plus}, {minus}"
            )));
        }
        grad.push((plus - minus) / (2.0 * epsilon));
    }
    Ok(grad)
}

/// Relative L2 error between two gradients: `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_l2_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-12)
}
