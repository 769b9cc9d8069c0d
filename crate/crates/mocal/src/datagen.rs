//! Procedural locomotion generator.
//!
//! Produces physically clean gait cycles on the default 7-joint biped: stance
//! feet are pinned at exactly `y = 0` with constant horizontal position, swing
//! feet follow a half-sine vertical arc with a quintic horizontal ease, and the
//! pelvis integrates a speed/heading/turn-rate path in closed form.
//!
//! Horizontal foot travel is gated so it only happens while the swing arc is
//! above the contact band (plus one frame of margin on each side). That makes
//! the generated corpora measure 0 on the skate, penetrate, and clip metrics,
//! which is what lets them stand in for clean reference motion.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::{ConditionVector, MotionRecord, MotionSequence, Provenance, Skeleton};
use ndarray::Array3;

/// Condition vector dimension used throughout the toolkit.
pub const CONDITION_DIM: usize = 16;

/// Feet relocate during swing only when the arc clears this height (m).
/// Below it the feet stay planted and only bob in place, so contact stays clean.
pub const MIN_SWING_CLEARANCE: f64 = 0.06;

/// Horizontal swing travel is allowed only while the arc is above this (m).
/// Slightly above the default 5 cm contact threshold of the metrics.
const SWING_GATE_HEIGHT: f64 = 0.055;

const PELVIS_HEIGHT: f64 = 0.9;
const SPINE_OFFSET: f64 = 0.25;
const HEAD_OFFSET: f64 = 0.5;
const HIP_LATERAL: f64 = 0.09;
const KNEE_LIFT: f64 = 0.04;
/// Lateral distance between the two feet (m); keeps the clip metric at zero.
pub const FOOT_SEPARATION: f64 = 0.2;

/// One gait parameterization. The normalized encoding of these fields is the
/// record's condition vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitParams {
    /// Forward speed, m/s.
    pub speed: f64,
    /// Initial heading, radians; 0 faces +z, positive turns toward +x.
    pub heading: f64,
    /// Heading change rate, radians/s.
    pub turn_rate: f64,
    /// Gait cycles per second per foot, Hz.
    pub step_frequency: f64,
    /// Peak swing arc height, m.
    pub step_height: f64,
    /// Fraction of each cycle a foot spends planted, in (0, 1).
    pub stance_ratio: f64,
    /// Clip length, seconds.
    pub duration: f64,
    /// Seed for the gait phase offset.
    pub seed: u64,
}

impl GaitParams {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let finite = [
            ("speed", self.speed),
            ("heading", self.heading),
            ("turn_rate", self.turn_rate),
            ("step_frequency", self.step_frequency),
            ("step_height", self.step_height),
            ("stance_ratio", self.stance_ratio),
            ("duration", self.duration),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                problems.push(format!("{name} must be finite"));
            }
        }
        if self.speed < 0.0 {
            problems.push("speed must be >= 0".into());
        }
        if self.step_frequency <= 0.0 {
            problems.push("step_frequency must be > 0".into());
        }
        if !(self.stance_ratio > 0.0 && self.stance_ratio < 1.0) {
            problems.push("stance_ratio must be in (0, 1)".into());
        }
        if self.duration < 1.0 {
            problems.push("duration must be >= 1.0 s".into());
        }
        if self.step_height < 0.0 {
            problems.push("step_height must be >= 0".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Params(problems.join("; ")))
        }
    }

    /// Normalized encoding: each field mapped to [-1, 1] over its documented
    /// range, plus the seed-derived gait phase, zero-padded to [`CONDITION_DIM`].
    pub fn condition(&self) -> ConditionVector {
        let phase = phase_from_seed(self.seed);
        let mut v = vec![
            norm(self.speed, 0.0, 2.5),
            norm(wrap_angle(self.heading), -PI, PI),
            norm(self.turn_rate, -1.5, 1.5),
            norm(self.step_frequency, 0.4, 3.0),
            norm(self.step_height, 0.0, 0.3),
            norm(self.stance_ratio, 0.0, 1.0),
            norm(self.duration, 1.0, 10.0),
            norm(phase, 0.0, 1.0),
        ];
        v.resize(CONDITION_DIM, 0.0);
        ConditionVector::new(v)
    }

    /// Short human-readable description of the gait.
    pub fn describe(&self) -> String {
        let verb = if self.speed == 0.0 {
            "stand"
        } else if self.stance_ratio < 0.5 {
            "run"
        } else {
            "walk"
        };
        format!(
            "{verb} at {:.2} m/s heading {:.2} rad, turning {:.2} rad/s, {:.1} steps/s",
            self.speed, self.heading, self.turn_rate, self.step_frequency
        )
    }
}

fn norm(x: f64, lo: f64, hi: f64) -> f64 {
    let c = x.clamp(lo, hi);
    2.0 * (c - lo) / (hi - lo) - 1.0
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    if a < -PI {
        a += 2.0 * PI;
    }
    a
}

fn phase_from_seed(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.random_range(0.0..1.0)
}

/// Quintic smoothstep: zero first derivative at both ends.
fn quintic(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * (u * (u * 6.0 - 15.0) + 10.0)
}

/// Closed-form pelvis path: position after time `t` under constant speed and
/// turn rate, starting at the origin.
fn pelvis_xz(params: &GaitParams, t: f64) -> (f64, f64) {
    let v = params.speed;
    let th0 = params.heading;
    let w = params.turn_rate;
    if w.abs() < 1e-12 {
        (v * t * th0.sin(), v * t * th0.cos())
    } else {
        let th = th0 + w * t;
        (v * (th0.cos() - th.cos()) / w, v * (th.sin() - th0.sin()) / w)
    }
}

fn heading_at(params: &GaitParams, t: f64) -> f64 {
    params.heading + params.turn_rate * t
}

/// Rotate a body-frame (lateral, forward) offset into world (x, z) at heading `th`.
fn rotate_offset(lateral: f64, forward: f64, th: f64) -> (f64, f64) {
    (
        lateral * th.cos() + forward * th.sin(),
        -lateral * th.sin() + forward * th.cos(),
    )
}

struct GaitPlan {
    phase0: f64,
    /// Whether feet relocate between plants (vs bobbing in place).
    relocate: bool,
    /// Swing parameter window [a, b] inside which horizontal travel happens.
    travel_window: (f64, f64),
    /// Whether body yaw follows the heading path.
    yaw_active: bool,
}

fn plan_gait(params: &GaitParams, fps: f64) -> Result<GaitPlan> {
    let phase0 = phase_from_seed(params.seed);
    let relocate = params.step_height > MIN_SWING_CLEARANCE;
    let mut travel_window = (0.5, 0.5);
    if relocate {
        // Swing parameter advances this much per frame.
        let ds = params.step_frequency / ((1.0 - params.stance_ratio) * fps);
        let s_lo = (SWING_GATE_HEIGHT / params.step_height).min(1.0).asin() / PI;
        let a = s_lo + ds;
        let b = 1.0 - s_lo - ds;
        if a >= b {
            return Err(Error::Params(format!(
                "step_frequency {:.2} Hz with stance_ratio {:.2}, step_height {:.2} m at {fps} fps \
                 leaves no skate-free travel window in the swing arc",
                params.step_frequency, params.stance_ratio, params.step_height
            )));
        }
        travel_window = (a, b);
    }
    let yaw_active = relocate || params.speed > 0.0;
    Ok(GaitPlan {
        phase0,
        relocate,
        travel_window,
        yaw_active,
    })
}

/// Plant position of one foot for gait cycle `k` (foot pinned there during
/// that cycle's stance). `side` is +1 for the left foot, -1 for the right.
fn plant_position(params: &GaitParams, plan: &GaitPlan, side: f64, offset: f64, k: f64) -> (f64, f64) {
    let t_mid =
        (k + params.stance_ratio * 0.5 - offset - plan.phase0) / params.step_frequency;
    let (px, pz) = pelvis_xz(params, t_mid);
    let th = heading_at(params, t_mid);
    let (ox, oz) = rotate_offset(side * FOOT_SEPARATION * 0.5, 0.0, th);
    (px + ox, pz + oz)
}

fn foot_at(
    params: &GaitParams,
    plan: &GaitPlan,
    side: f64,
    offset: f64,
    t: f64,
) -> (f64, f64, f64) {
    let phi = params.step_frequency * t + plan.phase0 + offset;
    let k = phi.floor();
    let local = phi - k;

    if !plan.relocate {
        let th0 = if plan.yaw_active { heading_at(params, 0.0) } else { params.heading };
        let (ox, oz) = rotate_offset(side * FOOT_SEPARATION * 0.5, 0.0, th0);
        let y = if local < params.stance_ratio {
            0.0
        } else {
            let s = (local - params.stance_ratio) / (1.0 - params.stance_ratio);
            params.step_height * (PI * s).sin()
        };
        return (ox, y, oz);
    }

    if local < params.stance_ratio {
        let (x, z) = plant_position(params, plan, side, offset, k);
        (x, 0.0, z)
    } else {
        let s = (local - params.stance_ratio) / (1.0 - params.stance_ratio);
        let (x0, z0) = plant_position(params, plan, side, offset, k);
        let (x1, z1) = plant_position(params, plan, side, offset, k + 1.0);
        let (a, b) = plan.travel_window;
        let u = quintic((s - a) / (b - a));
        let y = params.step_height * (PI * s).sin();
        (x0 + u * (x1 - x0), y, z0 + u * (z1 - z0))
    }
}

/// Generate one clean locomotion record.
///
/// The returned record has provenance `clean`; its condition vector is the
/// normalized gait encoding. Stance feet sit at exactly `y = 0` with constant
/// horizontal position.
pub fn generate_motion(params: &GaitParams, fps: f64) -> Result<MotionRecord> {
    params.validate()?;
    if !(10.0..=60.0).contains(&fps) {
        return Err(Error::Params(format!("fps must be in [10, 60], got {fps}")));
    }
    let plan = plan_gait(params, fps)?;

    let frame_count = (params.duration * fps).round() as usize + 1;
    let skeleton = Arc::new(Skeleton::default_biped());
    let mut frames = Array3::zeros((frame_count, skeleton.joint_count(), 3));

    let bob_amp = if plan.relocate {
        0.015 * (params.speed.min(1.5) / 1.5)
    } else {
        0.0
    };

    for i in 0..frame_count {
        let t = i as f64 / fps;
        let (px, pz) = pelvis_xz(params, t);
        let phase = params.step_frequency * t + plan.phase0;
        let py = PELVIS_HEIGHT - bob_amp * 0.5 * (1.0 + (4.0 * PI * phase).cos());
        let yaw = if plan.yaw_active { heading_at(params, t) } else { params.heading };

        let left = foot_at(params, &plan, 1.0, 0.0, t);
        let right = foot_at(params, &plan, -1.0, 0.5, t);

        let mut set = |joint: usize, x: f64, y: f64, z: f64| {
            frames[[i, joint, 0]] = x;
            frames[[i, joint, 1]] = y;
            frames[[i, joint, 2]] = z;
        };

        set(0, px, py, pz);
        set(1, px, py + SPINE_OFFSET, pz);
        set(2, px, py + HEAD_OFFSET, pz);

        for (knee, hip_side, foot) in [(3usize, 1.0, left), (4usize, -1.0, right)] {
            let (hx, hz) = rotate_offset(hip_side * HIP_LATERAL, 0.0, yaw);
            let hip = (px + hx, py, pz + hz);
            set(
                knee,
                0.55 * hip.0 + 0.45 * foot.0,
                0.55 * hip.1 + 0.45 * foot.1 + KNEE_LIFT,
                0.55 * hip.2 + 0.45 * foot.2,
            );
        }
        set(5, left.0, left.1, left.2);
        set(6, right.0, right.1, right.2);
    }

    Ok(MotionRecord {
        motion: MotionSequence::new(fps, frames, skeleton),
        condition: Some(params.condition()),
        label: Some(params.describe()),
        provenance: Provenance::Clean,
    })
}

/// Uniform sampling ranges per gait field, the corpus-level "distribution".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRanges {
    pub speed: (f64, f64),
    pub heading: (f64, f64),
    pub turn_rate: (f64, f64),
    pub step_frequency: (f64, f64),
    pub step_height: (f64, f64),
    pub stance_ratio: (f64, f64),
    pub duration: (f64, f64),
}

impl Default for ParamRanges {
    fn default() -> Self {
        ParamRanges {
            speed: (0.5, 2.0),
            heading: (-PI, PI),
            turn_rate: (-0.5, 0.5),
            step_frequency: (1.2, 2.0),
            step_height: (0.10, 0.18),
            stance_ratio: (0.55, 0.65),
            duration: (2.0, 4.0),
        }
    }
}

impl ParamRanges {
    /// Ranges that produce running gaits with flight phases.
    pub fn running() -> Self {
        ParamRanges {
            speed: (1.5, 3.0),
            step_frequency: (1.4, 2.0),
            step_height: (0.10, 0.18),
            stance_ratio: (0.30, 0.40),
            ..Default::default()
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng, seed: u64) -> GaitParams {
        let draw = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| {
            if lo == hi {
                lo
            } else {
                rng.random_range(lo..hi)
            }
        };
        GaitParams {
            speed: draw(rng, self.speed),
            heading: draw(rng, self.heading),
            turn_rate: draw(rng, self.turn_rate),
            step_frequency: draw(rng, self.step_frequency),
            step_height: draw(rng, self.step_height),
            stance_ratio: draw(rng, self.stance_ratio),
            duration: draw(rng, self.duration),
            seed,
        }
    }
}

/// Per-record seed derived so corpus generation is order-independent.
fn record_seed(seed: u64, index: usize) -> u64 {
    // splitmix64 of (seed + golden-ratio stride)
    let mut z = seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generate `n` clean records with params drawn uniformly from `ranges`.
/// Reproducible from `seed`; record `i` depends only on `(seed, i)`.
pub fn generate_corpus(
    n: usize,
    ranges: &ParamRanges,
    fps: f64,
    seed: u64,
) -> Result<Vec<MotionRecord>> {
    if n < 1 {
        return Err(Error::Params("corpus size must be >= 1".into()));
    }
    (0..n)
        .map(|i| {
            let s = record_seed(seed, i);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let params = ranges.sample(&mut rng, s);
            generate_motion(&params, fps)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn walk_params() -> GaitParams {
        GaitParams {
            speed: 1.0,
            heading: 0.3,
            turn_rate: 0.0,
            step_frequency: 1.5,
            step_height: 0.12,
            stance_ratio: 0.6,
            duration: 4.0,
            seed: 7,
        }
    }

    #[test]
    fn pelvis_displacement_matches_speed_times_duration() {
        let rec = generate_motion(&walk_params(), 20.0).unwrap();
        let t = rec.motion.frame_count() - 1;
        let first = rec.motion.joint(0, 0);
        let last = rec.motion.joint(t, 0);
        let dx = last[0] - first[0];
        let dz = last[2] - first[2];
        let dist = (dx * dx + dz * dz).sqrt();
        assert!((dist - 4.0).abs() < 1e-6, "displacement {dist}");
        // Along the heading direction.
        let along = dx * 0.3f64.sin() + dz * 0.3f64.cos();
        assert!((along - 4.0).abs() < 1e-6, "along-heading {along}");
    }

    #[test]
    fn static_params_give_static_motion() {
        let params = GaitParams {
            speed: 0.0,
            step_height: 0.0,
            turn_rate: 0.4,
            ..walk_params()
        };
        let rec = generate_motion(&params, 20.0).unwrap();
        let m = &rec.motion;
        for i in 1..m.frame_count() {
            for j in 0..m.joint_count() {
                for c in 0..3 {
                    assert_eq!(m.frames[[i, j, c]], m.frames[[0, j, c]]);
                }
            }
        }
    }

    #[test]
    fn stance_feet_are_pinned_at_ground() {
        let rec = generate_motion(&walk_params(), 20.0).unwrap();
        let m = &rec.motion;
        let (lf, rf) = m.skeleton.foot_indices;
        let mut stance_frames = 0;
        for i in 0..m.frame_count() - 1 {
            for &f in &[lf, rf] {
                let y0 = m.frames[[i, f, 1]];
                let y1 = m.frames[[i + 1, f, 1]];
                if y0 == 0.0 && y1 == 0.0 {
                    stance_frames += 1;
                    let dx = m.frames[[i + 1, f, 0]] - m.frames[[i, f, 0]];
                    let dz = m.frames[[i + 1, f, 2]] - m.frames[[i, f, 2]];
                    assert_eq!(
                        (dx, dz),
                        (0.0, 0.0),
                        "stance foot moved at frame {i}"
                    );
                }
            }
        }
        assert!(stance_frames > 20, "expected plenty of stance frames");
    }

    #[test]
    fn determinism_per_params() {
        let a = generate_motion(&walk_params(), 20.0).unwrap();
        let b = generate_motion(&walk_params(), 20.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn corpus_is_reproducible_and_valid() {
        let ranges = ParamRanges::default();
        let a = generate_corpus(10, &ranges, 20.0, 42).unwrap();
        let b = generate_corpus(10, &ranges, 20.0, 42).unwrap();
        assert_eq!(a, b);
        assert!(crate::motion::validate_corpus(&a).is_empty());
        // Condition vectors pairwise distinct.
        for i in 0..a.len() {
            for k in i + 1..a.len() {
                assert_ne!(a[i].condition, a[k].condition);
            }
        }
    }

    #[test]
    fn invalid_params_are_rejected() {
        let mut p = walk_params();
        p.stance_ratio = 1.0;
        assert!(generate_motion(&p, 20.0).is_err());
        let mut p = walk_params();
        p.duration = 0.5;
        assert!(generate_motion(&p, 20.0).is_err());
        assert!(generate_motion(&walk_params(), 5.0).is_err());
    }

    #[test]
    fn unsteppable_combination_is_rejected() {
        // 3 Hz swing at 10 fps leaves ~1 frame of swing: no clean travel window.
        let p = GaitParams {
            step_frequency: 3.0,
            stance_ratio: 0.7,
            step_height: 0.08,
            ..walk_params()
        };
        assert!(generate_motion(&p, 10.0).is_err());
    }
}
