//! Physical plausibility and distribution metrics.
//!
//! Contact physics (skate / float / penetrate / clip) follow the standard
//! definitions: contact is detected by a height threshold, skating is
//! horizontal foot travel above 2.5 cm while in contact, float/penetrate are
//! the positive/negative clearance of the lowest joint on contact frames, and
//! clip is inter-foot interpenetration below a 5 cm separation. Distribution
//! quality uses a Gaussian-Fréchet distance over hand-crafted motion features,
//! and semantic alignment uses retrieval R-Precision in condition space.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{psd_sqrt, symmetric_eigen};
use crate::motion::{ConditionVector, MotionRecord, MotionSequence};

/// Thresholds for contact detection and the contact metrics, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactParams {
    /// A foot below this height counts as in contact with the ground.
    pub contact_height_threshold: f64,
    /// Horizontal travel above this, while in contact, counts as skating.
    pub skate_displacement_threshold: f64,
    /// Feet closer than this interpenetrate.
    pub clip_distance_threshold: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        ContactParams {
            contact_height_threshold: 0.05,
            skate_displacement_threshold: 0.025,
            clip_distance_threshold: 0.05,
        }
    }
}

impl ContactParams {
    pub fn validate(&self) -> Result<()> {
        if self.contact_height_threshold > 0.0
            && self.skate_displacement_threshold > 0.0
            && self.clip_distance_threshold > 0.0
        {
            Ok(())
        } else {
            Err(Error::Params("contact thresholds must all be > 0".into()))
        }
    }
}

/// Top-1/2/3 retrieval fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RPrecision {
    pub top1: f64,
    pub top2: f64,
    pub top3: f64,
    pub queries: usize,
}

/// The per-corpus metric record; one row of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub fid: Option<f64>,
    pub r_precision: Option<RPrecision>,
    /// Millimeters; `None` when the corpora are not index-aligned.
    pub mpjpe: Option<f64>,
    pub skate_ratio: f64,
    pub float_mean: f64,
    pub penetrate_mean: f64,
    pub clip_mean: f64,
    pub n_sequences: usize,
    pub params: ContactParams,
}

/// Per-frame, per-foot contact mask: `mask[i] = [left, right]`, true when the
/// foot's y-coordinate is below the contact height threshold.
pub fn detect_contact(motion: &MotionSequence, params: &ContactParams) -> Vec<[bool; 2]> {
    let (lf, rf) = motion.skeleton.foot_indices;
    (0..motion.frame_count())
        .map(|i| {
            [
                motion.frames[[i, lf, 1]] < params.contact_height_threshold,
                motion.frames[[i, rf, 1]] < params.contact_height_threshold,
            ]
        })
        .collect()
}

fn horizontal_displacement(motion: &MotionSequence, frame: usize, joint: usize) -> f64 {
    let dx = motion.frames[[frame + 1, joint, 0]] - motion.frames[[frame, joint, 0]];
    let dz = motion.frames[[frame + 1, joint, 2]] - motion.frames[[frame, joint, 2]];
    (dx * dx + dz * dz).sqrt()
}

/// (skating pairs, contact pairs) over both feet; frames without a successor
/// are excluded from the denominator.
fn skate_counts(motion: &MotionSequence, params: &ContactParams) -> (usize, usize) {
    let contact = detect_contact(motion, params);
    let feet = [motion.skeleton.foot_indices.0, motion.skeleton.foot_indices.1];
    let mut num = 0;
    let mut den = 0;
    for i in 0..motion.frame_count().saturating_sub(1) {
        for (f, &joint) in feet.iter().enumerate() {
            if contact[i][f] {
                den += 1;
                if horizontal_displacement(motion, i, joint) > params.skate_displacement_threshold {
                    num += 1;
                }
            }
        }
    }
    (num, den)
}

/// Fraction of contact frames whose horizontal foot travel to the next frame
/// exceeds the skate threshold. 0 when no contact occurs.
pub fn skate_ratio(motion: &MotionSequence, params: &ContactParams) -> f64 {
    let (num, den) = skate_counts(motion, params);
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// (float sum, penetrate sum, frame count) over this motion's contact frames.
/// A frame counts as contact when a foot is detected in contact or the lowest
/// joint sits within the contact band; when no frame qualifies the sums fall
/// back to all frames, so a uniformly shifted motion still reports its offset.
fn clearance_sums(motion: &MotionSequence, params: &ContactParams) -> (f64, f64, usize) {
    let contact = detect_contact(motion, params);
    let t = motion.frame_count();
    let heights: Vec<f64> = (0..t).map(|i| motion.lowest_joint_height(i)).collect();
    let in_band: Vec<bool> = (0..t)
        .map(|i| {
            contact[i][0] || contact[i][1] || heights[i].abs() <= params.contact_height_threshold
        })
        .collect();
    let any = in_band.iter().any(|&b| b);
    let mut float_sum = 0.0;
    let mut pen_sum = 0.0;
    let mut count = 0;
    for i in 0..t {
        if any && !in_band[i] {
            continue;
        }
        float_sum += heights[i].max(0.0);
        pen_sum += (-heights[i]).max(0.0);
        count += 1;
    }
    (float_sum, pen_sum, count)
}

/// Mean positive and negative clearance of the lowest joint over contact
/// frames, meters: `(float_mean, penetrate_mean)`.
pub fn float_and_penetrate(motion: &MotionSequence, params: &ContactParams) -> (f64, f64) {
    let (f, p, n) = clearance_sums(motion, params);
    if n == 0 {
        (0.0, 0.0)
    } else {
        (f / n as f64, p / n as f64)
    }
}

fn clip_sum(motion: &MotionSequence, params: &ContactParams) -> f64 {
    let (lf, rf) = motion.skeleton.foot_indices;
    let mut sum = 0.0;
    for i in 0..motion.frame_count() {
        let a = motion.joint(i, lf);
        let b = motion.joint(i, rf);
        let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
        sum += (params.clip_distance_threshold - d).max(0.0);
    }
    sum
}

/// Mean inter-foot interpenetration depth, meters: per-frame
/// `max(0, threshold - distance between feet)` averaged over all frames.
pub fn clip_metric(motion: &MotionSequence, params: &ContactParams) -> f64 {
    clip_sum(motion, params) / motion.frame_count() as f64
}

/// Mean per-joint position error between two aligned motions, millimeters.
/// No root alignment is applied.
pub fn mpjpe(a: &MotionSequence, b: &MotionSequence) -> Result<f64> {
    if a.frame_count() != b.frame_count() || a.joint_count() != b.joint_count() {
        return Err(Error::shape(
            "mpjpe",
            format!("{}x{}", a.frame_count(), a.joint_count()),
            format!("{}x{}", b.frame_count(), b.joint_count()),
        ));
    }
    let mut sum = 0.0;
    let t = a.frame_count();
    let j = a.joint_count();
    for i in 0..t {
        for jj in 0..j {
            let pa = a.joint(i, jj);
            let pb = b.joint(i, jj);
            sum += ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2) + (pa[2] - pb[2]).powi(2))
                .sqrt();
        }
    }
    Ok(sum / (t * j) as f64 * 1000.0)
}

/// Deterministic fixed-length feature vector of one motion, used by the
/// Fréchet distance. Layout, for J joints:
///
/// * `[0,   J)`  per-joint mean height
/// * `[J,  2J)`  per-joint height standard deviation
/// * `[2J, 3J)`  per-joint mean speed (frame difference x fps, m/s)
/// * `[3J, 4J)`  per-joint speed standard deviation
/// * `[4J .. 4J+4)` left/right foot contact ratio, mean and std of the
///   per-frame lowest-joint height
pub fn motion_features(motion: &MotionSequence, params: &ContactParams) -> Vec<f64> {
    let t = motion.frame_count();
    let j = motion.joint_count();
    let mut out = Vec::with_capacity(4 * j + 4);

    let mut mean_h = vec![0.0; j];
    for i in 0..t {
        for jj in 0..j {
            mean_h[jj] += motion.frames[[i, jj, 1]];
        }
    }
    for m in &mut mean_h {
        *m /= t as f64;
    }
    let mut std_h = vec![0.0; j];
    for i in 0..t {
        for jj in 0..j {
            let d = motion.frames[[i, jj, 1]] - mean_h[jj];
            std_h[jj] += d * d;
        }
    }
    for s in &mut std_h {
        *s = (*s / t as f64).sqrt();
    }

    let mut speeds = vec![Vec::with_capacity(t - 1); j];
    for i in 0..t - 1 {
        for jj in 0..j {
            let a = motion.joint(i, jj);
            let b = motion.joint(i + 1, jj);
            let d = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2) + (b[2] - a[2]).powi(2)).sqrt();
            speeds[jj].push(d * motion.fps);
        }
    }
    let mean_s: Vec<f64> = speeds
        .iter()
        .map(|v| v.iter().sum::<f64>() / v.len() as f64)
        .collect();
    let std_s: Vec<f64> = speeds
        .iter()
        .zip(&mean_s)
        .map(|(v, m)| (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt())
        .collect();

    out.extend_from_slice(&mean_h);
    out.extend_from_slice(&std_h);
    out.extend_from_slice(&mean_s);
    out.extend_from_slice(&std_s);

    let contact = detect_contact(motion, params);
    let lc = contact.iter().filter(|c| c[0]).count() as f64 / t as f64;
    let rc = contact.iter().filter(|c| c[1]).count() as f64 / t as f64;
    let heights: Vec<f64> = (0..t).map(|i| motion.lowest_joint_height(i)).collect();
    let hm = heights.iter().sum::<f64>() / t as f64;
    let hs = (heights.iter().map(|h| (h - hm) * (h - hm)).sum::<f64>() / t as f64).sqrt();
    out.push(lc);
    out.push(rc);
    out.push(hm);
    out.push(hs);

    out
}

fn mean_and_cov(features: &[Vec<f64>]) -> (Vec<f64>, Array2<f64>) {
    let n = features.len();
    let d = features[0].len();
    let mut mu = vec![0.0; d];
    for f in features {
        for (m, x) in mu.iter_mut().zip(f) {
            *m += x;
        }
    }
    for m in &mut mu {
        *m /= n as f64;
    }
    let mut cov = Array2::zeros((d, d));
    for f in features {
        for i in 0..d {
            let di = f[i] - mu[i];
            for k in 0..d {
                cov[[i, k]] += di * (f[k] - mu[k]);
            }
        }
    }
    let denom = (n - 1).max(1) as f64;
    cov.mapv_inplace(|x| x / denom);
    (mu, cov)
}

/// Gaussian-Fréchet distance between two feature sets:
/// `|mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2})`.
///
/// Covariances are regularized by `+1e-6 I`; the cross square root is taken
/// through the symmetrized product `S_a^{1/2} S_b S_a^{1/2}`; the result is
/// clamped at zero.
pub fn frechet_distance(features_a: &[Vec<f64>], features_b: &[Vec<f64>]) -> Result<f64> {
    if features_a.is_empty() || features_b.is_empty() {
        return Err(Error::Metric("frechet: empty feature set".into()));
    }
    let d = features_a[0].len();
    if features_a.iter().chain(features_b).any(|f| f.len() != d) {
        return Err(Error::Metric("frechet: inconsistent feature dimensions".into()));
    }
    if features_a.len() < d + 1 || features_b.len() < d + 1 {
        return Err(Error::Metric(format!(
            "frechet: need at least dim+1 = {} samples per set, got {} and {}",
            d + 1,
            features_a.len(),
            features_b.len()
        )));
    }

    let (mu_a, mut cov_a) = mean_and_cov(features_a);
    let (mu_b, mut cov_b) = mean_and_cov(features_b);
    for i in 0..d {
        cov_a[[i, i]] += 1e-6;
        cov_b[[i, i]] += 1e-6;
    }

    let mean_term: f64 = mu_a
        .iter()
        .zip(&mu_b)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();

    let root_a = psd_sqrt(&cov_a);
    let inner = root_a.dot(&cov_b).dot(&root_a);
    // Symmetrize against accumulated round-off before the eigendecomposition.
    let inner_sym = (&inner + &inner.t()) * 0.5;
    let (vals, _) = symmetric_eigen(&inner_sym);
    let tr_sqrt: f64 = vals.iter().map(|l| l.max(0.0).sqrt()).sum();

    let tr_a: f64 = (0..d).map(|i| cov_a[[i, i]]).sum();
    let tr_b: f64 = (0..d).map(|i| cov_b[[i, i]]).sum();

    Ok((mean_term + tr_a + tr_b - 2.0 * tr_sqrt).max(0.0))
}

/// Maps a motion into the condition embedding space for retrieval.
pub trait MotionEncoder: Sync {
    fn embed(&self, motion: &MotionSequence) -> Vec<f64>;
}

/// R-Precision over pools of `pool_size` candidates: for each query motion,
/// rank its true condition among the pool's conditions by Euclidean distance
/// in the shared space; report the fraction ranked within top 1/2/3.
///
/// Pairs are chunked into consecutive complete pools; the remainder is dropped.
pub fn r_precision(
    pairs: &[(ConditionVector, MotionSequence)],
    encoder: &dyn MotionEncoder,
    pool_size: usize,
) -> Result<RPrecision> {
    if pool_size < 2 {
        return Err(Error::Metric("r_precision: pool_size must be >= 2".into()));
    }
    if pairs.len() < pool_size {
        return Err(Error::Metric(format!(
            "r_precision: need at least pool_size = {pool_size} pairs, got {}",
            pairs.len()
        )));
    }

    let mut hits = [0usize; 3];
    let mut queries = 0usize;
    for pool in pairs.chunks_exact(pool_size) {
        for (qi, (true_cond, motion)) in pool.iter().enumerate() {
            let emb = encoder.embed(motion);
            if emb.len() != true_cond.dim() {
                return Err(Error::shape("r_precision", true_cond.dim(), emb.len()));
            }
            let dist = |c: &ConditionVector| -> f64 {
                c.values
                    .iter()
                    .zip(&emb)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum()
            };
            let d_true = dist(true_cond);
            // Rank among the pool; ties broken toward earlier indices.
            let rank = pool
                .iter()
                .enumerate()
                .filter(|(ci, (c, _))| {
                    let d = dist(c);
                    d < d_true || (d == d_true && *ci < qi)
                })
                .count();
            for k in 0..3 {
                if rank <= k {
                    hits[k] += 1;
                }
            }
            queries += 1;
        }
    }

    Ok(RPrecision {
        top1: hits[0] as f64 / queries as f64,
        top2: hits[1] as f64 / queries as f64,
        top3: hits[2] as f64 / queries as f64,
        queries,
    })
}

/// Evaluate a test corpus against a reference corpus: contact metrics pooled
/// over the test corpus, MPJPE against index-aligned reference motions, FID
/// over motion features, and R-Precision when an encoder is supplied.
pub fn evaluate_corpus(
    reference: &[MotionRecord],
    test: &[MotionRecord],
    params: &ContactParams,
    encoder: Option<&dyn MotionEncoder>,
) -> Result<MetricsReport> {
    params.validate()?;
    if test.is_empty() {
        return Err(Error::Metric("evaluate: empty test corpus".into()));
    }

    struct Acc {
        skate_num: usize,
        skate_den: usize,
        float_sum: f64,
        pen_sum: f64,
        clearance_frames: usize,
        clip_sum: f64,
        frames: usize,
    }

    let accs: Vec<Acc> = test
        .par_iter()
        .map(|rec| {
            let m = &rec.motion;
            let (sn, sd) = skate_counts(m, params);
            let (fs, ps, cf) = clearance_sums(m, params);
            Acc {
                skate_num: sn,
                skate_den: sd,
                float_sum: fs,
                pen_sum: ps,
                clearance_frames: cf,
                clip_sum: clip_sum(m, params),
                frames: m.frame_count(),
            }
        })
        .collect();

    let skate_num: usize = accs.iter().map(|a| a.skate_num).sum();
    let skate_den: usize = accs.iter().map(|a| a.skate_den).sum();
    let float_sum: f64 = accs.iter().map(|a| a.float_sum).sum();
    let pen_sum: f64 = accs.iter().map(|a| a.pen_sum).sum();
    let clearance_frames: usize = accs.iter().map(|a| a.clearance_frames).sum();
    let clip_total: f64 = accs.iter().map(|a| a.clip_sum).sum();
    let frames: usize = accs.iter().map(|a| a.frames).sum();

    let skate = if skate_den == 0 {
        0.0
    } else {
        skate_num as f64 / skate_den as f64
    };
    let (float_mean, penetrate_mean) = if clearance_frames == 0 {
        (0.0, 0.0)
    } else {
        (
            float_sum / clearance_frames as f64,
            pen_sum / clearance_frames as f64,
        )
    };

    let mpjpe_value = if reference.len() == test.len()
        && reference.iter().zip(test).all(|(r, t)| {
            r.motion.frame_count() == t.motion.frame_count()
                && r.motion.joint_count() == t.motion.joint_count()
        }) {
        let sums: Vec<(f64, usize)> = reference
            .par_iter()
            .zip(test.par_iter())
            .map(|(r, t)| {
                let n = r.motion.frame_count() * r.motion.joint_count();
                let v = mpjpe(&r.motion, &t.motion).expect("shapes checked");
                (v * n as f64, n)
            })
            .collect();
        let total: f64 = sums.iter().map(|(v, _)| v).sum();
        let count: usize = sums.iter().map(|(_, n)| n).sum();
        Some(total / count as f64)
    } else {
        None
    };

    let dim = motion_features(&test[0].motion, params).len();
    let fid = if reference.len() > dim && test.len() > dim {
        let fa: Vec<Vec<f64>> = reference
            .par_iter()
            .map(|r| motion_features(&r.motion, params))
            .collect();
        let fb: Vec<Vec<f64>> = test
            .par_iter()
            .map(|r| motion_features(&r.motion, params))
            .collect();
        Some(frechet_distance(&fa, &fb)?)
    } else {
        None
    };

    let r_prec = match encoder {
        Some(enc) => {
            let pairs: Vec<(ConditionVector, MotionSequence)> = test
                .iter()
                .filter_map(|r| {
                    r.condition
                        .as_ref()
                        .map(|c| (c.clone(), r.motion.clone()))
                })
                .collect();
            if pairs.len() >= DEFAULT_POOL_SIZE {
                Some(r_precision(&pairs, enc, DEFAULT_POOL_SIZE)?)
            } else {
                None
            }
        }
        None => None,
    };

    Ok(MetricsReport {
        fid,
        r_precision: r_prec,
        mpjpe: mpjpe_value,
        skate_ratio: skate,
        float_mean,
        penetrate_mean,
        clip_mean: clip_total / frames as f64,
        n_sequences: test.len(),
        params: *params,
    })
}

/// Pool size of the retrieval protocol.
pub const DEFAULT_POOL_SIZE: usize = 32;

/// Render a report as a fixed-width table row set matching the comparison
/// table column order: FID, R-Precision top 1/2/3, MPJPE, Skate, Float,
/// Penetrate, Clip.
pub fn format_table(rows: &[(String, &MetricsReport)]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<24} {:>10} {:>8} {:>8} {:>8} {:>10} {:>8} {:>10} {:>13} {:>9}\n",
        "Corpus", "FID", "Top 1", "Top 2", "Top 3", "MPJPE", "Skate", "Float (m)", "Penetrate (m)", "Clip (m)"
    ));
    let opt = |v: Option<f64>| match v {
        Some(x) => format!("{x:.4}"),
        None => "-".to_string(),
    };
    for (name, r) in rows {
        let (t1, t2, t3) = match r.r_precision {
            Some(rp) => (
                format!("{:.4}", rp.top1),
                format!("{:.4}", rp.top2),
                format!("{:.4}", rp.top3),
            ),
            None => ("-".into(), "-".into(), "-".into()),
        };
        out.push_str(&format!(
            "{:<24} {:>10} {:>8} {:>8} {:>8} {:>10} {:>8.4} {:>10.4} {:>13.4} {:>9.4}\n",
            name,
            opt(r.fid),
            t1,
            t2,
            t3,
            opt(r.mpjpe),
            r.skate_ratio,
            r.float_mean,
            r.penetrate_mean,
            r.clip_mean,
        ));
    }
    out
}
