//! Synthetic motion distortion: a random vertical offset composed with a
//! temporal Gaussian smoothing filter.
//!
//! The offset manufactures contact artifacts (floating for positive bias,
//! ground penetration for negative), the smoothing removes high-frequency
//! detail and induces foot skating. Together they supply the corrupted inputs
//! the calibrator learns to repair.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::motion::MotionSequence;

/// Sampling range for the vertical bias, meters.
pub const BIAS_RANGE: (f64, f64) = (-0.1, 0.1);
/// Sampling range for the smoothing scale, frames.
pub const SIGMA_RANGE: (f64, f64) = (0.1, 4.0);
/// Below this scale the kernel degenerates to a single tap and smoothing is
/// the identity.
pub const SIGMA_IDENTITY_CUTOFF: f64 = 0.05;

/// The (bias, sigma) pair defining one synthetic corruption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionSpec {
    /// Vertical offset along Y, meters.
    pub bias: f64,
    /// Gaussian smoothing standard deviation, frames.
    pub sigma: f64,
}

impl DistortionSpec {
    pub fn identity() -> Self {
        DistortionSpec { bias: 0.0, sigma: 0.0 }
    }
}

/// Which distortion families are sampled during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistortionPolicy {
    pub bias_enabled: bool,
    pub smoothing_enabled: bool,
}

impl Default for DistortionPolicy {
    fn default() -> Self {
        DistortionPolicy {
            bias_enabled: true,
            smoothing_enabled: true,
        }
    }
}

impl DistortionPolicy {
    pub fn bias_only() -> Self {
        DistortionPolicy {
            bias_enabled: true,
            smoothing_enabled: false,
        }
    }

    pub fn smoothing_only() -> Self {
        DistortionPolicy {
            bias_enabled: false,
            smoothing_enabled: true,
        }
    }
}

/// Shift every joint's y-coordinate by exactly `bias`; x and z are untouched.
pub fn apply_vertical_bias(motion: &MotionSequence, bias: f64) -> MotionSequence {
    let mut frames = motion.frames.clone();
    for mut frame in frames.outer_iter_mut() {
        for mut joint in frame.outer_iter_mut() {
            joint[1] += bias;
        }
    }
    MotionSequence::new(motion.fps, frames, motion.skeleton.clone())
}

/// Discrete Gaussian kernel truncated at radius `ceil(4 sigma)`, renormalized
/// to sum exactly 1.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= SIGMA_IDENTITY_CUTOFF {
        return vec![1.0];
    }
    let radius = (4.0 * sigma).ceil() as i64;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-0.5 * (i as f64 / sigma).powi(2)).exp())
        .collect();
    let sum: f64 = kernel.iter().sum();
    for w in &mut kernel {
        *w /= sum;
    }
    kernel
}

/// Mirror index `k` into `[0, len)` about the endpoint samples.
fn reflect(mut k: i64, len: i64) -> usize {
    loop {
        if k < 0 {
            k = -k;
        } else if k >= len {
            k = 2 * (len - 1) - k;
        } else {
            return k as usize;
        }
    }
}

/// Convolve every coordinate channel along time with the normalized Gaussian.
/// Boundaries use reflect padding (mirrored about the endpoint sample), so a
/// constant channel passes through unchanged. Output length equals input length.
pub fn gaussian_smooth(motion: &MotionSequence, sigma: f64) -> MotionSequence {
    let kernel = gaussian_kernel(sigma);
    if kernel.len() == 1 {
        return motion.clone();
    }
    let radius = (kernel.len() / 2) as i64;
    let t = motion.frame_count() as i64;
    let flat = motion.to_flat();
    let d = flat.shape()[1];
    let mut out = Array2::zeros((t as usize, d));
    for c in 0..d {
        for i in 0..t {
            let mut acc = 0.0;
            for (k, w) in kernel.iter().enumerate() {
                let idx = reflect(i + k as i64 - radius, t);
                acc += w * flat[[idx, c]];
            }
            out[[i as usize, c]] = acc;
        }
    }
    motion.with_flat(&out)
}

/// Apply a spec exactly as the distortion composes: bias first, then smoothing.
pub fn apply_spec(motion: &MotionSequence, spec: &DistortionSpec) -> MotionSequence {
    gaussian_smooth(&apply_vertical_bias(motion, spec.bias), spec.sigma)
}

/// Draw a spec with `b ~ U(-0.1, 0.1)` and `sigma ~ U(0.1, 4.0)`.
pub fn sample_spec(rng: &mut ChaCha8Rng) -> DistortionSpec {
    sample_spec_with_policy(rng, DistortionPolicy::default())
}

/// Draw a spec honoring the policy toggles. Disabled families are fixed at
/// their identity value (bias 0, sigma 0); both draws are consumed either way
/// so toggling does not shift the RNG stream.
pub fn sample_spec_with_policy(rng: &mut ChaCha8Rng, policy: DistortionPolicy) -> DistortionSpec {
    let b = rng.random_range(BIAS_RANGE.0..BIAS_RANGE.1);
    let s = rng.random_range(SIGMA_RANGE.0..SIGMA_RANGE.1);
    DistortionSpec {
        bias: if policy.bias_enabled { b } else { 0.0 },
        sigma: if policy.smoothing_enabled { s } else { 0.0 },
    }
}

/// Sample a spec and apply it: the full synthetic corruption of one motion.
pub fn distort(motion: &MotionSequence, rng: &mut ChaCha8Rng) -> (MotionSequence, DistortionSpec) {
    let spec = sample_spec(rng);
    (apply_spec(motion, &spec), spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_motion, GaitParams};
    use rand::SeedableRng;

    fn clean() -> MotionSequence {
        let params = GaitParams {
            speed: 1.2,
            heading: 0.0,
            turn_rate: 0.1,
            step_frequency: 1.5,
            step_height: 0.12,
            stance_ratio: 0.6,
            duration: 2.0,
            seed: 3,
        };
        generate_motion(&params, 20.0).unwrap().motion
    }

    #[test]
    fn zero_bias_is_identity() {
        let m = clean();
        assert_eq!(apply_vertical_bias(&m, 0.0), m);
    }

    #[test]
    fn bias_shifts_only_y() {
        let m = clean();
        let shifted = apply_vertical_bias(&m, 0.07);
        for i in 0..m.frame_count() {
            for j in 0..m.joint_count() {
                assert_eq!(shifted.frames[[i, j, 0]], m.frames[[i, j, 0]]);
                assert_eq!(shifted.frames[[i, j, 2]], m.frames[[i, j, 2]]);
                let dy = shifted.frames[[i, j, 1]] - m.frames[[i, j, 1]];
                assert!((dy - 0.07).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn kernel_sums_to_one() {
        for sigma in [0.1, 0.5, 1.0, 2.5, 4.0] {
            let k = gaussian_kernel(sigma);
            let sum: f64 = k.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "sigma {sigma}");
            assert_eq!(k.len(), 2 * (4.0 * sigma).ceil() as usize + 1);
        }
    }

    #[test]
    fn constant_motion_is_invariant_under_smoothing() {
        let m = clean();
        let mut constant = m.clone();
        let first = constant.frames.index_axis(ndarray::Axis(0), 0).to_owned();
        for mut fr in constant.frames.outer_iter_mut() {
            fr.assign(&first);
        }
        let smoothed = gaussian_smooth(&constant, 2.0);
        for (a, b) in smoothed.frames.iter().zip(constant.frames.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn tiny_sigma_is_identity() {
        let m = clean();
        assert_eq!(gaussian_smooth(&m, 0.05), m);
        assert_eq!(gaussian_smooth(&m, 0.0), m);
    }

    #[test]
    fn impulse_response_matches_sampled_gaussian() {
        let m = clean();
        let t = m.frame_count();
        let mut flat = Array2::zeros((t, m.pose_dim()));
        let mid = t / 2;
        flat[[mid, 4]] = 1.0;
        let impulse = m.with_flat(&flat);
        let sigma = 1.0;
        let smoothed = gaussian_smooth(&impulse, sigma).to_flat();
        let kernel = gaussian_kernel(sigma);
        let radius = kernel.len() / 2;
        for (k, w) in kernel.iter().enumerate() {
            let idx = mid + k - radius;
            assert!((smoothed[[idx, 4]] - w).abs() < 1e-9);
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let m = clean();
        let mut r1 = ChaCha8Rng::seed_from_u64(11);
        let mut r2 = ChaCha8Rng::seed_from_u64(11);
        let (d1, s1) = distort(&m, &mut r1);
        let (d2, s2) = distort(&m, &mut r2);
        assert_eq!(s1, s2);
        assert_eq!(d1, d2);
    }

    #[test]
    fn policy_toggles_zero_out_families() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = sample_spec_with_policy(&mut rng, DistortionPolicy::bias_only());
        assert_eq!(s.sigma, 0.0);
        assert!(s.bias != 0.0);
        let s = sample_spec_with_policy(&mut rng, DistortionPolicy::smoothing_only());
        assert_eq!(s.bias, 0.0);
        assert!(s.sigma >= SIGMA_RANGE.0);
    }

    #[test]
    fn bias_commutes_with_smoothing() {
        let m = clean();
        let spec = DistortionSpec { bias: 0.08, sigma: 1.7 };
        let a = apply_spec(&m, &spec);
        let b = apply_vertical_bias(&gaussian_smooth(&m, spec.sigma), spec.bias);
        for (x, y) in a.frames.iter().zip(b.frames.iter()) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}
