//! Seeded synthetic skeleton data whose motion is a fixed function of each
//! class's attribute vector, so attribute similarity carries over to motion
//! similarity and unseen classes are learnable from their descriptions.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use gzsl_core::data::{AttributeKind, AttributeMatrix, PartitionSpec, SkeletonSequence};
use gzsl_core::Matrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{GzslError, Result};

const CONTINUOUS_NAMES: [&str; 7] = [
    "arm_height",
    "arm_extension",
    "hand_openness",
    "elbow_bend",
    "movement_speed",
    "movement_range",
    "head_tilt",
];
const BINARY_NAMES: [&str; 5] = ["symmetric", "both_arms", "repetitive", "upward_trend", "touches_body"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub emotions: usize,
    pub gestures_per_emotion: usize,
    pub unseen_per_emotion: usize,
    pub joints: usize,
    pub channels: usize,
    pub continuous_attributes: usize,
    pub binary_attributes: usize,
    /// Dimension of the hidden class code the attributes are derived from.
    pub latent_dim: usize,
    /// Scale of the per-emotion latent centers.
    pub emotion_spread: f64,
    /// Scale of the per-gesture latent offsets around their emotion center.
    pub gesture_spread: f64,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Standard deviation of per-frame Gaussian noise.
    pub noise: f64,
    /// Multiplier on every generated coordinate, noise included.
    pub coordinate_scale: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            emotions: 5,
            gestures_per_emotion: 3,
            unseen_per_emotion: 2,
            joints: 25,
            channels: 3,
            continuous_attributes: 7,
            binary_attributes: 5,
            latent_dim: 3,
            emotion_spread: 1.5,
            gesture_spread: 0.6,
            train_per_class: 40,
            test_per_class: 10,
            min_len: 8,
            max_len: 12,
            noise: 0.05,
            coordinate_scale: 1.0,
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn d_x(&self) -> usize {
        self.joints * self.channels
    }

    pub fn d_s(&self) -> usize {
        self.continuous_attributes + self.binary_attributes
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(GzslError::InvalidSpec(m.to_string()));
        if self.emotions < 2 {
            return fail("need at least 2 emotions");
        }
        if self.gestures_per_emotion < 2 {
            return fail("need at least 2 gestures per emotion");
        }
        if self.unseen_per_emotion == 0 || self.unseen_per_emotion >= self.gestures_per_emotion {
            return fail("unseen gestures per emotion must be in [1, gestures_per_emotion)");
        }
        if self.joints == 0 || self.channels == 0 {
            return fail("joints and channels must be positive");
        }
        if self.d_s() == 0 || self.latent_dim == 0 {
            return fail("attribute and latent dimensions must be positive");
        }
        if self.train_per_class == 0 {
            return fail("train_per_class must be positive");
        }
        if self.min_len == 0 || self.max_len < self.min_len {
            return fail("sequence lengths must satisfy 1 <= min_len <= max_len");
        }
        if ![self.emotion_spread, self.gesture_spread, self.coordinate_scale].iter().all(|s| s.is_finite() && *s >= 0.0) {
            return fail("spreads and coordinate scale must be finite and non-negative");
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return fail("noise must be finite and non-negative");
        }
        Ok(())
    }

    pub fn attribute_names(&self) -> Vec<String> {
        let named = |names: &[&str], i: usize, prefix: &str| {
            names.get(i).map_or_else(|| format!("{prefix}{i}"), |s| s.to_string())
        };
        (0..self.continuous_attributes)
            .map(|i| named(&CONTINUOUS_NAMES, i, "continuous_"))
            .chain((0..self.binary_attributes).map(|i| named(&BINARY_NAMES, i, "binary_")))
            .collect()
    }
}

/// Generated dataset: attributes for every class, the split, and samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub attributes: AttributeMatrix,
    pub partition: PartitionSpec,
    pub train: Vec<SkeletonSequence>,
    pub test: Vec<SkeletonSequence>,
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Fixed attribute-to-motion projections shared by every class.
struct MotionWorld {
    base: Matrix,
    amplitude: Matrix,
    frequency: Matrix,
    phase: Matrix,
}

/// Deterministic motion parameters of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct Motion {
    /// Rest pose, `joints·channels`.
    pub base: Vec<f64>,
    /// Oscillation amplitude per coordinate.
    pub amplitude: Vec<f64>,
    /// Cycles per sequence, per joint.
    pub frequency: Vec<f64>,
    /// Phase per joint.
    pub phase: Vec<f64>,
}

impl MotionWorld {
    fn new(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Self {
        let (d_x, d_s, j) = (spec.d_x(), spec.d_s(), spec.joints);
        MotionWorld {
            base: gaussian(rng, d_x, d_s),
            amplitude: gaussian(rng, d_x, d_s),
            frequency: gaussian(rng, j, d_s),
            phase: gaussian(rng, j, d_s),
        }
    }

    fn motion(&self, spec: &SynthSpec, attributes: &[f64]) -> Motion {
        let centered = Matrix::column(attributes.iter().map(|a| a - 0.5).collect());
        let project = |m: &Matrix| m.matmul(&centered).into_vec();
        let base = project(&self.base);
        let amplitude: Vec<f64> = project(&self.amplitude).iter().map(|z| 0.3 * (1.0 + z.tanh())).collect();
        let frequency: Vec<f64> = project(&self.frequency).iter().map(|z| 0.5 + sigmoid(*z)).collect();
        let mut phase: Vec<f64> = project(&self.phase).iter().map(|z| PI * z.tanh()).collect();
        let mut amplitude = amplitude;
        let symmetric = spec.binary_attributes > 0 && attributes[spec.continuous_attributes] == 1.0;
        if symmetric {
            // mirror each odd joint onto its even neighbor
            let c = spec.channels;
            for jt in (1..spec.joints).step_by(2) {
                phase[jt] = phase[jt - 1];
                for ch in 0..c {
                    amplitude[jt * c + ch] = amplitude[(jt - 1) * c + ch];
                }
            }
        }
        Motion { base, amplitude, frequency, phase }
    }
}

/// Draws one sequence of `len` frames from a class's motion.
pub fn sample_sequence(spec: &SynthSpec, motion: &Motion, len: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let c = spec.channels;
    let gain: f64 = StandardNormal.sample(rng);
    let gain = 1.0 + 0.1 * gain;
    let shift: f64 = StandardNormal.sample(rng);
    let shift = 0.3 * shift;
    let mut frames = Matrix::zeros(len, spec.d_x());
    for t in 0..len {
        let time = t as f64 / len as f64;
        for jt in 0..spec.joints {
            let wave = (2.0 * PI * motion.frequency[jt] * time + motion.phase[jt] + shift).sin();
            for ch in 0..c {
                let k = jt * c + ch;
                let noise: f64 = StandardNormal.sample(rng);
                let value = motion.base[k] + gain * motion.amplitude[k] * wave + spec.noise * noise;
                frames.set(t, k, spec.coordinate_scale * value);
            }
        }
    }
    frames
}

/// Attribute vectors of every class (`classes×d_s`): a per-emotion latent
/// center plus a per-gesture offset, pushed through fixed random maps.
fn class_attributes(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Matrix {
    let classes = spec.emotions * spec.gestures_per_emotion;
    let k = spec.latent_dim;
    let w_cont = gaussian(rng, spec.continuous_attributes, k);
    let b_cont = gaussian(rng, spec.continuous_attributes, 1).scale(0.5);
    let w_bin = gaussian(rng, spec.binary_attributes, k);
    let b_bin = gaussian(rng, spec.binary_attributes, 1).scale(0.5);
    let centers = gaussian(rng, spec.emotions, k).scale(spec.emotion_spread);
    let offsets = gaussian(rng, classes, k).scale(spec.gesture_spread);
    Matrix::from_fn(classes, spec.d_s(), |g, a| {
        let e = g / spec.gestures_per_emotion;
        let z: Vec<f64> = (0..k).map(|i| centers.get(e, i) + offsets.get(g, i)).collect();
        if a < spec.continuous_attributes {
            let s: f64 = (0..k).map(|i| w_cont.get(a, i) * z[i]).sum::<f64>() + b_cont.get(a, 0);
            sigmoid(s)
        } else {
            let b = a - spec.continuous_attributes;
            let s: f64 = (0..k).map(|i| w_bin.get(b, i) * z[i]).sum::<f64>() + b_bin.get(b, 0);
            if s > 0.0 {
                1.0
            } else {
                0.0
            }
        }
    })
}

/// Motion parameters of every class, in class-id order.
pub fn class_motions(spec: &SynthSpec, attributes: &AttributeMatrix) -> Result<Vec<Motion>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let world = MotionWorld::new(spec, &mut rng);
    attributes
        .class_ids()
        .iter()
        .map(|&c| Ok(world.motion(spec, attributes.vector(c)?)))
        .collect()
}

pub fn generate_synthetic(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let classes = spec.emotions * spec.gestures_per_emotion;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let world = MotionWorld::new(spec, &mut rng);
    let values = class_attributes(spec, &mut rng);

    let kinds = (0..spec.d_s())
        .map(|a| if a < spec.continuous_attributes { AttributeKind::Continuous } else { AttributeKind::Binary })
        .collect();
    let attributes = AttributeMatrix::new((0..classes).collect(), spec.attribute_names(), kinds, values)?;

    let mut emotion_of = BTreeMap::new();
    let mut unseen = Vec::new();
    for e in 0..spec.emotions {
        let mut members: Vec<usize> = (0..spec.gestures_per_emotion).map(|i| e * spec.gestures_per_emotion + i).collect();
        members.shuffle(&mut rng);
        unseen.extend_from_slice(&members[..spec.unseen_per_emotion]);
        for &g in &members {
            emotion_of.insert(g, e);
        }
    }
    unseen.sort_unstable();
    let partition = PartitionSpec::with_unseen(emotion_of, &unseen)?;

    let mut train = Vec::new();
    let mut test = Vec::new();
    for g in 0..classes {
        let motion = world.motion(spec, attributes.vector(g)?);
        let emotion = partition.emotion(g)?;
        let n_train = if partition.is_seen(g) { spec.train_per_class } else { 0 };
        for k in 0..n_train + spec.test_per_class {
            let len = rng.random_range(spec.min_len..=spec.max_len);
            let frames = sample_sequence(spec, &motion, len, &mut rng);
            let (split, idx) = if k < n_train { ("tr", k) } else { ("te", k - n_train) };
            let id = format!("{split}-g{g:02}-{idx:03}");
            let subject = Some(format!("s{}", k % 4));
            let seq = SkeletonSequence::new(id, frames, g, emotion, subject)?;
            if k < n_train {
                train.push(seq);
            } else {
                test.push(seq);
            }
        }
    }
    Ok(SynthData { attributes, partition, train, test })
}
