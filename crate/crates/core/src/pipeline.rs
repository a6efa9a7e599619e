//! Gated prediction and generalized zero-shot evaluation.
//!
//! A sample is first tested against the learned prototypes. Samples inside
//! the radius of their nearest prototype take that seen class; the rest are
//! labelled with an unseen class by the autoencoder branch, transductively
//! over all such samples of a call unless per-sample mode is requested.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::SkeletonSequence;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::Framework;
use crate::pbd::{gate, GateDecision, Verdict};
use crate::stae::{stae_infer, InferenceMode};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub gate: GateDecision,
    /// Predicted gesture class id.
    pub gesture: usize,
    /// Predicted emotion id.
    pub emotion: usize,
}

impl Prediction {
    pub fn routed_unseen(&self) -> bool {
        self.gate.verdict == Verdict::Unseen
    }
}

/// Gate decisions for feature columns `f: d_f×N`.
pub fn gate_features(fw: &Framework, f: &Matrix) -> Result<(Vec<GateDecision>, Matrix)> {
    let h = fw.branch_features(f)?;
    let p = fw.project(&h.pbd);
    let prototypes = fw.prototypes();
    let thresholds = fw.thresholds();
    let decisions = (0..p.cols()).map(|j| gate(&p.col(j), prototypes, &thresholds)).collect();
    Ok((decisions, h.stae))
}

/// Predictions for feature columns `f: d_f×N`.
pub fn predict_features(fw: &Framework, f: &Matrix, mode: InferenceMode) -> Result<Vec<Prediction>> {
    if f.cols() == 0 {
        return Err(Error::EmptyBatch);
    }
    let (decisions, h_stae) = gate_features(fw, f)?;
    let routed: Vec<usize> = (0..decisions.len()).filter(|&j| decisions[j].verdict == Verdict::Unseen).collect();

    let mut unseen_labels = vec![None; decisions.len()];
    if !routed.is_empty() && !fw.classes.unseen.is_empty() {
        let h_te = Matrix::from_fn(h_stae.rows(), routed.len(), |i, j| h_stae.get(i, routed[j]));
        let out = stae_infer(&h_te, fw.encoder(), &fw.stae.a_unseen, fw.stae.gammas, fw.stae.q, mode)?;
        for (&j, &label) in routed.iter().zip(&out.labels) {
            unseen_labels[j] = Some(label);
        }
    }

    let classes = &fw.classes;
    Ok(decisions
        .into_iter()
        .zip(unseen_labels)
        .map(|(g, u)| {
            let (gesture, emotion) = match (g.verdict, u) {
                (Verdict::Seen(k), _) => (classes.seen[k], classes.seen_emotion[k]),
                (Verdict::Unseen, Some(j)) => (classes.unseen[j], classes.unseen_emotion[j]),
                // no unseen classes to choose from: fall back to the nearest prototype
                (Verdict::Unseen, None) => (classes.seen[g.nearest], classes.seen_emotion[g.nearest]),
            };
            Prediction { gate: g, gesture, emotion }
        })
        .collect())
}

/// Predictions for a batch of sequences.
pub fn predict_batch(fw: &Framework, seqs: &[SkeletonSequence], mode: InferenceMode) -> Result<Vec<Prediction>> {
    let f = fw.extract_batch(seqs)?;
    predict_features(fw, &f, mode)
}

/// Prediction for a single sequence (per-sample mode).
pub fn predict(fw: &Framework, seq: &SkeletonSequence) -> Result<Prediction> {
    let f = fw.extract_batch(core::slice::from_ref(seq))?;
    Ok(predict_features(fw, &f, InferenceMode::PerSample)?[0])
}

/// `2ab / (a + b)`, zero when either argument is zero.
pub fn harmonic_mean(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        0.0
    } else if a == b {
        a
    } else {
        2.0 * a * b / (a + b)
    }
}

/// Counts of seen/unseen ground truth against the gate's verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GateStats {
    pub seen_as_seen: usize,
    pub seen_as_unseen: usize,
    pub unseen_as_seen: usize,
    pub unseen_as_unseen: usize,
}

impl GateStats {
    /// Fraction of seen-class samples the gate kept as seen.
    pub fn true_seen_rate(&self) -> f64 {
        ratio(self.seen_as_seen, self.seen_as_seen + self.seen_as_unseen)
    }

    /// Fraction of unseen-class samples the gate routed as unseen.
    pub fn true_unseen_rate(&self) -> f64 {
        ratio(self.unseen_as_unseen, self.unseen_as_seen + self.unseen_as_unseen)
    }

    pub fn false_unseen_rate(&self) -> f64 {
        ratio(self.seen_as_unseen, self.seen_as_seen + self.seen_as_unseen)
    }

    pub fn false_seen_rate(&self) -> f64 {
        ratio(self.unseen_as_seen, self.unseen_as_seen + self.unseen_as_unseen)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Square count matrix, rows = true label, columns = predicted label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Confusion {
    pub size: usize,
    pub counts: Vec<usize>,
}

impl Confusion {
    pub fn new(size: usize) -> Self {
        Confusion { size, counts: vec![0; size * size] }
    }

    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.counts[truth * self.size + predicted] += 1;
    }

    pub fn get(&self, truth: usize, predicted: usize) -> usize {
        self.counts[truth * self.size + predicted]
    }

    pub fn row_total(&self, truth: usize) -> usize {
        self.counts[truth * self.size..(truth + 1) * self.size].iter().sum()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Diagonal over total restricted to the given rows.
    pub fn accuracy_over(&self, rows: impl IntoIterator<Item = usize>) -> f64 {
        let (mut hit, mut all) = (0, 0);
        for r in rows {
            hit += self.get(r, r);
            all += self.row_total(r);
        }
        ratio(hit, all)
    }

    pub fn accuracy(&self) -> f64 {
        self.accuracy_over(0..self.size)
    }
}

/// Gesture- and emotion-level GZSL metrics of one evaluation run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub seen_samples: usize,
    pub unseen_samples: usize,
    pub acc_s: f64,
    pub acc_u: f64,
    pub h: f64,
    pub acc_s_em: f64,
    pub acc_u_em: f64,
    pub h_em: f64,
    /// Class order of `gesture_confusion`: seen classes then unseen ones.
    pub class_order: Vec<usize>,
    pub gesture_confusion: Confusion,
    /// Emotion confusion over seen-class samples.
    pub emotion_confusion_seen: Confusion,
    /// Emotion confusion over unseen-class samples.
    pub emotion_confusion_unseen: Confusion,
    pub gate: GateStats,
}

/// Scores predictions against the ground truth of `seqs`.
pub fn score(fw: &Framework, seqs: &[SkeletonSequence], predictions: &[Prediction]) -> Result<EvaluationReport> {
    if seqs.len() != predictions.len() {
        return Err(Error::dims("score", (seqs.len(), 1), (predictions.len(), 1)));
    }
    let classes = &fw.classes;
    let order = classes.all();
    let pos = |c: usize| order.iter().position(|&o| o == c);
    let c_em = classes.emotions;
    let mut gesture = Confusion::new(order.len());
    let mut em_seen = Confusion::new(c_em);
    let mut em_unseen = Confusion::new(c_em);
    let mut gate_stats = GateStats::default();
    let (mut n_s, mut n_u) = (0, 0);

    for (s, p) in seqs.iter().zip(predictions) {
        let truth = pos(s.gesture).ok_or(Error::UnknownClassId { class: s.gesture })?;
        let true_em = classes.emotion_of(s.gesture).expect("class in space");
        if s.emotion != true_em {
            return Err(Error::LabelOutOfRange { label: s.emotion, classes: c_em });
        }
        let predicted = pos(p.gesture).expect("predictions come from the class space");
        gesture.add(truth, predicted);
        let is_seen = truth < classes.seen.len();
        let routed_unseen = p.routed_unseen();
        if is_seen {
            n_s += 1;
            em_seen.add(true_em, p.emotion);
            if routed_unseen {
                gate_stats.seen_as_unseen += 1;
            } else {
                gate_stats.seen_as_seen += 1;
            }
        } else {
            n_u += 1;
            em_unseen.add(true_em, p.emotion);
            if routed_unseen {
                gate_stats.unseen_as_unseen += 1;
            } else {
                gate_stats.unseen_as_seen += 1;
            }
        }
    }

    let seen_rows = 0..classes.seen.len();
    let unseen_rows = classes.seen.len()..order.len();
    let acc_s = gesture.accuracy_over(seen_rows);
    let acc_u = gesture.accuracy_over(unseen_rows);
    let acc_s_em = em_seen.accuracy();
    let acc_u_em = em_unseen.accuracy();
    Ok(EvaluationReport {
        seen_samples: n_s,
        unseen_samples: n_u,
        acc_s,
        acc_u,
        h: harmonic_mean(acc_s, acc_u),
        acc_s_em,
        acc_u_em,
        h_em: harmonic_mean(acc_s_em, acc_u_em),
        class_order: order,
        gesture_confusion: gesture,
        emotion_confusion_seen: em_seen,
        emotion_confusion_unseen: em_unseen,
        gate: gate_stats,
    })
}

/// Predicts every sequence of the test set and scores the result.
pub fn evaluate(
    fw: &Framework,
    seqs: &[SkeletonSequence],
    mode: InferenceMode,
) -> Result<(EvaluationReport, Vec<Prediction>)> {
    let predictions = predict_batch(fw, seqs, mode)?;
    let report = score(fw, seqs, &predictions)?;
    Ok((report, predictions))
}
