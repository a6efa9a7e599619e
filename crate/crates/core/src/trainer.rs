//! Emotion head, joint loss and the grouped-Adam training loop.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::data::SkeletonSequence;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{columns_to_matrix, Framework};
use crate::nn::adam::{Adam, LearningRates};
use crate::nn::init::Initializer;
use crate::nn::layers::{check_labels, FcParams};
use crate::nn::params::{Gradients, Group, ParamStore};
use crate::pbd::{pbd_loss_vars, PbdWeights, DEFAULT_GAMMA};
use crate::stae::{fit_encoder, stae_loss_vars, StaeGammas};

/// Two fully connected layers with a ReLU, `d_f → hidden → C_em`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmotionHead {
    pub fc1: FcParams,
    pub fc2: FcParams,
}

impl EmotionHead {
    pub fn register(store: &mut ParamStore, init: &mut Initializer, d_f: usize, hidden: usize, emotions: usize) -> Self {
        EmotionHead {
            fc1: FcParams::register(store, init, "emotion.fc1", Group::Emotion, d_f, hidden),
            fc2: FcParams::register(store, init, "emotion.fc2", Group::Emotion, hidden, emotions),
        }
    }

    pub fn logits(&self, tape: &mut Tape<'_>, h: Var) -> Var {
        let z = self.fc1.forward(tape, h);
        let a = tape.relu(z);
        self.fc2.forward(tape, a)
    }

    pub fn emotions(&self, store: &ParamStore) -> usize {
        self.fc2.d_out(store)
    }
}

pub fn emotion_loss_var(tape: &mut Tape<'_>, head: &EmotionHead, h: Var, labels: &[usize]) -> Var {
    let z = head.logits(tape, h);
    tape.cross_entropy(z, labels)
}

/// Mean cross-entropy of the emotion head on `h: d_f×n`.
pub fn emotion_loss(store: &ParamStore, head: &EmotionHead, h: &Matrix, labels: &[usize]) -> Result<f64> {
    let d_in = store.get(head.fc1.w).cols();
    if h.rows() != d_in || labels.len() != h.cols() {
        return Err(Error::dims("emotion_loss", (d_in, labels.len()), h.shape()));
    }
    check_labels(labels, head.emotions(store))?;
    let mut tape = Tape::new(store);
    let hv = tape.constant(h.clone());
    let l = emotion_loss_var(&mut tape, head, hv, labels);
    Ok(tape.value(l).item())
}

/// `L_pbd + λ₁ L_stae + λ₂ L_em`.
pub fn total_loss(l_pbd: f64, l_stae: f64, l_em: f64, lambda1: f64, lambda2: f64) -> f64 {
    l_pbd + lambda1 * l_stae + lambda2 * l_em
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub pbd: PbdWeights,
    /// DCE distance scale.
    pub gamma: f64,
    pub stae: StaeGammas,
    pub rates: LearningRates,
    pub batch_size: usize,
    pub epochs: usize,
    /// Epoch (0-based) from which the threshold losses are switched on;
    /// `None` means 60% of `epochs`.
    pub threshold_warmup_epoch: Option<usize>,
    pub seed: u64,
    /// Start `U` from the closed-form solution on the initial features.
    pub init_encoder: bool,
}

impl TrainConfig {
    /// Hyper-parameters of the first evaluation setting.
    pub fn partition1() -> Self {
        TrainConfig {
            lambda1: 1.0,
            lambda2: 4.0,
            pbd: PbdWeights { beta1: 4.0, beta2: 0.1, beta3: 1.0 },
            gamma: DEFAULT_GAMMA,
            stae: StaeGammas { gamma1: 0.001, gamma2: 1e-4, gamma3: 0.1 },
            rates: LearningRates { shared: 1e-4, pbd: 1e-4, stae: 2e-5, emotion: 2e-5 },
            batch_size: 8,
            epochs: 200,
            threshold_warmup_epoch: None,
            seed: 0,
            init_encoder: true,
        }
    }

    /// Hyper-parameters of the second evaluation setting.
    pub fn partition2() -> Self {
        TrainConfig {
            lambda1: 1.0,
            lambda2: 2.0,
            pbd: PbdWeights { beta1: 2.0, beta2: 0.05, beta3: 1.0 },
            gamma: DEFAULT_GAMMA,
            stae: StaeGammas { gamma1: 1e-4, gamma2: 1e-4, gamma3: 0.1 },
            rates: LearningRates { shared: 1e-4, pbd: 5e-5, stae: 2e-5, emotion: 5e-5 },
            batch_size: 8,
            epochs: 200,
            threshold_warmup_epoch: None,
            seed: 0,
            init_encoder: true,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "partition1" => Some(TrainConfig::partition1()),
            "partition2" => Some(TrainConfig::partition2()),
            _ => None,
        }
    }

    pub fn warmup_epoch(&self) -> usize {
        self.threshold_warmup_epoch.unwrap_or(self.epochs * 3 / 5)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        let nonneg = [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("beta1", self.pbd.beta1),
            ("beta2", self.pbd.beta2),
            ("beta3", self.pbd.beta3),
            ("gamma", self.gamma),
            ("gamma1", self.stae.gamma1),
            ("gamma2", self.stae.gamma2),
            ("gamma3", self.stae.gamma3),
            ("lr_shared", self.rates.shared),
            ("lr_pbd", self.rates.pbd),
            ("lr_stae", self.rates.stae),
            ("lr_emotion", self.rates.emotion),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        if self.stae.gamma1 == 0.0 {
            // A_sy = AᵤᵀUᵀUAᵤ + γ₁I must stay positive definite.
            return Err(Error::InvalidConfig("gamma1 must be positive".into()));
        }
        Ok(())
    }
}

/// One training example in extractor layout.
#[derive(Debug, Clone)]
pub struct TrainSample {
    /// `d_x×l`
    pub x: Matrix,
    /// Seen-class index (prototype row).
    pub label: usize,
    pub emotion: usize,
}

/// Converts seen-class sequences to training samples.
pub fn training_samples(fw: &Framework, data: &[SkeletonSequence]) -> Result<Vec<TrainSample>> {
    data.iter()
        .map(|s| {
            let label = fw.classes.seen_index(s.gesture).ok_or(Error::UnknownClassId { class: s.gesture })?;
            if s.d_x() != fw.arch.d_x {
                return Err(Error::dims("training sample", (s.len(), fw.arch.d_x), s.frames.shape()));
            }
            if s.emotion >= fw.classes.emotions {
                return Err(Error::LabelOutOfRange { label: s.emotion, classes: fw.classes.emotions });
            }
            Ok(TrainSample { x: s.columns(), label, emotion: s.emotion })
        })
        .collect()
}

/// Branch losses of one batch on a tape.
#[derive(Debug, Clone, Copy)]
pub struct BatchLossVars {
    pub pbd: Var,
    pub stae: Var,
    pub emotion: Var,
    pub total: Var,
}

/// Builds the joint loss of a batch. Per-sample terms are averaged over the
/// batch; parameter penalties and the feature-graph term enter once.
pub fn batch_loss_vars(
    tape: &mut Tape<'_>,
    fw: &Framework,
    batch: &[&TrainSample],
    config: &TrainConfig,
    thresholds_active: bool,
) -> Result<BatchLossVars> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut cols = Vec::with_capacity(batch.len());
    for s in batch {
        let x = tape.constant(s.x.clone());
        cols.push(fw.features_var(tape, x)?);
    }
    let f = tape.concat_cols(&cols);
    let h = fw.branch_vars(tape, f);
    let labels: Vec<usize> = batch.iter().map(|s| s.label).collect();
    let emotions: Vec<usize> = batch.iter().map(|s| s.emotion).collect();
    check_labels(&labels, fw.classes.seen.len())?;
    check_labels(&emotions, fw.classes.emotions)?;

    let p = fw.pbd.project(tape, h.pbd);
    let dist = fw.pbd.distances(tape, p);
    let mut weights = config.pbd;
    if !thresholds_active {
        weights.beta2 = 0.0;
        weights.beta3 = 0.0;
    }
    let th = tape.param(fw.pbd.thresholds);
    let pbd = pbd_loss_vars(tape, dist, th, &labels, config.gamma, weights).total;

    let u = tape.param(fw.stae.u);
    let terms = stae_loss_vars(tape, h.stae, &labels, u, &fw.stae.a_seen, config.stae.gamma3, fw.stae.r);
    let sem = tape.scale(terms.semantic, config.stae.gamma1);
    let per_sample = tape.add(terms.reconstruction, sem);
    let mut stae = tape.scale(per_sample, 1.0 / batch.len() as f64);
    if let Some(reg) = terms.feature_reg {
        let reg = tape.scale(reg, config.stae.gamma3);
        stae = tape.add(stae, reg);
    }

    let emotion = emotion_loss_var(tape, &fw.emotion, h.emotion, &emotions);

    let s1 = tape.scale(stae, config.lambda1);
    let s2 = tape.scale(emotion, config.lambda2);
    let partial = tape.add(pbd, s1);
    let total = tape.add(partial, s2);
    Ok(BatchLossVars { pbd, stae, emotion, total })
}

/// Values of the joint loss on a batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValues {
    pub pbd: f64,
    pub stae: f64,
    pub emotion: f64,
    pub total: f64,
}

pub fn batch_loss(fw: &Framework, batch: &[&TrainSample], config: &TrainConfig, thresholds_active: bool) -> Result<LossValues> {
    let mut tape = Tape::new(&fw.store);
    let v = batch_loss_vars(&mut tape, fw, batch, config, thresholds_active)?;
    Ok(LossValues {
        pbd: tape.value(v.pbd).item(),
        stae: tape.value(v.stae).item(),
        emotion: tape.value(v.emotion).item(),
        total: tape.value(v.total).item(),
    })
}

/// Held-out metrics attached to an epoch record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub acc_s: f64,
    pub acc_u: f64,
    pub h: f64,
}

/// Sample-weighted mean losses of one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub l_pbd: f64,
    pub l_stae: f64,
    pub l_em: f64,
    pub total: f64,
    pub metrics: Option<EpochMetrics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub log: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (best held-out `h`, else the last).
    pub selected_epoch: usize,
}

/// Sets `U` to the closed-form autoencoder solution on the current features.
pub fn initialize_encoder(fw: &mut Framework, samples: &[TrainSample], gamma1: f64) -> Result<()> {
    let mut h_cols = Vec::with_capacity(samples.len());
    for s in samples {
        let mut tape = Tape::new(&fw.store);
        let x = tape.constant(s.x.clone());
        let f = fw.features_var(&mut tape, x)?;
        let h = fw.stae_attention.forward(&mut tape, f);
        h_cols.push(tape.value(h).as_slice().to_vec());
    }
    let h = columns_to_matrix(fw.d_f(), &h_cols);
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let u = fit_encoder(&h, &labels, &fw.stae.a_seen, gamma1)?;
    *fw.store.get_mut(fw.stae.u) = u;
    Ok(())
}

/// Trains in place with seeded shuffling. `evaluate`, when given, is run
/// after every epoch and the parameters with the best harmonic mean are kept.
pub fn train(
    fw: &mut Framework,
    data: &[SkeletonSequence],
    config: &TrainConfig,
    mut evaluate: Option<&mut dyn FnMut(&Framework) -> Result<EpochMetrics>>,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let samples = training_samples(fw, data)?;
    fw.stae.gammas = config.stae;
    fw.pbd.gamma = config.gamma;
    if config.init_encoder {
        initialize_encoder(fw, &samples, config.stae.gamma1)?;
    }
    let mut adam = Adam::new(&fw.store, config.rates);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let warmup = config.warmup_epoch();
    let mut log = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, ParamStore)> = None;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let active = epoch >= warmup;
        let mut sums = [0.0; 4];
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&TrainSample> = chunk.iter().map(|&i| &samples[i]).collect();
            let grads = {
                let mut tape = Tape::new(&fw.store);
                let v = batch_loss_vars(&mut tape, fw, &batch, config, active)?;
                let values = [v.pbd, v.stae, v.emotion, v.total].map(|x| tape.value(x).item());
                if values.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFiniteLoss {
                        epoch: epoch + 1,
                        batch: b,
                        diagnostics: format!(
                            "l_pbd={} l_stae={} l_em={} total={}",
                            values[0], values[1], values[2], values[3]
                        ),
                    });
                }
                for (s, x) in sums.iter_mut().zip(values) {
                    *s += x * batch.len() as f64;
                }
                let mut grads = Gradients::for_store(&fw.store);
                tape.backward_into(v.total, 1.0, &mut grads)?;
                grads
            };
            adam.step(&mut fw.store, &grads);
        }
        let n = samples.len() as f64;
        let metrics = match evaluate.as_mut() {
            Some(eval) => Some(eval(fw)?),
            None => None,
        };
        let record = EpochRecord {
            epoch: epoch + 1,
            l_pbd: sums[0] / n,
            l_stae: sums[1] / n,
            l_em: sums[2] / n,
            total: sums[3] / n,
            metrics,
        };
        if let Some(m) = metrics {
            if best.as_ref().is_none_or(|(h, _, _)| m.h > *h) {
                best = Some((m.h, epoch + 1, fw.store.clone()));
            }
        }
        on_epoch(&record);
        log.push(record);
    }

    let selected_epoch = match best {
        Some((_, epoch, store)) => {
            fw.store = store;
            epoch
        }
        None => config.epochs,
    };
    Ok(TrainOutcome { log, selected_epoch })
}
