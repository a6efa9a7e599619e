use std::fmt::Write as _;

use gzsl_core::data::SkeletonSequence;
use gzsl_core::pbd::Verdict;
use gzsl_core::pipeline::{Confusion, EvaluationReport, GateStats, Prediction};
use gzsl_core::stae::InferenceMode;
use gzsl_core::trainer::EpochRecord;
use serde::{Deserialize, Serialize};

use super::fmt_f64;

/// Gate counts and the rates derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateDoc {
    pub seen_as_seen: usize,
    pub seen_as_unseen: usize,
    pub unseen_as_seen: usize,
    pub unseen_as_unseen: usize,
    pub true_seen_rate: f64,
    pub true_unseen_rate: f64,
    pub false_seen_rate: f64,
    pub false_unseen_rate: f64,
}

impl From<&GateStats> for GateDoc {
    fn from(g: &GateStats) -> Self {
        GateDoc {
            seen_as_seen: g.seen_as_seen,
            seen_as_unseen: g.seen_as_unseen,
            unseen_as_seen: g.unseen_as_seen,
            unseen_as_unseen: g.unseen_as_unseen,
            true_seen_rate: g.true_seen_rate(),
            true_unseen_rate: g.true_unseen_rate(),
            false_seen_rate: g.false_seen_rate(),
            false_unseen_rate: g.false_unseen_rate(),
        }
    }
}

/// Evaluation report document. Accuracies over an empty subset are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub inference: String,
    pub seen_samples: usize,
    pub unseen_samples: usize,
    pub acc_s: Option<f64>,
    pub acc_u: Option<f64>,
    pub h: f64,
    pub acc_s_em: Option<f64>,
    pub acc_u_em: Option<f64>,
    pub h_em: f64,
    pub class_order: Vec<usize>,
    /// Rows are true classes, columns predicted ones, both in `class_order`.
    pub gesture_confusion: Vec<Vec<usize>>,
    pub emotion_confusion_seen: Vec<Vec<usize>>,
    pub emotion_confusion_unseen: Vec<Vec<usize>>,
    pub gate: GateDoc,
}

fn rows(c: &Confusion) -> Vec<Vec<usize>> {
    c.counts.chunks(c.size.max(1)).map(<[usize]>::to_vec).collect()
}

impl ReportDoc {
    pub fn new(r: &EvaluationReport, mode: InferenceMode) -> Self {
        let defined = |n: usize, v: f64| (n > 0).then_some(v);
        ReportDoc {
            inference: mode.name().to_string(),
            seen_samples: r.seen_samples,
            unseen_samples: r.unseen_samples,
            acc_s: defined(r.seen_samples, r.acc_s),
            acc_u: defined(r.unseen_samples, r.acc_u),
            h: r.h,
            acc_s_em: defined(r.seen_samples, r.acc_s_em),
            acc_u_em: defined(r.unseen_samples, r.acc_u_em),
            h_em: r.h_em,
            class_order: r.class_order.clone(),
            gesture_confusion: rows(&r.gesture_confusion),
            emotion_confusion_seen: rows(&r.emotion_confusion_seen),
            emotion_confusion_unseen: rows(&r.emotion_confusion_unseen),
            gate: GateDoc::from(&r.gate),
        }
    }
}

/// Pretty JSON with fields in declaration order and a trailing newline.
pub fn report_json(doc: &ReportDoc) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("report serializes");
    s.push('\n');
    s
}

/// One training-log record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub epoch: usize,
    pub l_pbd: f64,
    pub l_stae: f64,
    pub l_em: f64,
    pub total: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub acc_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub acc_u: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub h: Option<f64>,
}

impl From<&EpochRecord> for LogRecord {
    fn from(r: &EpochRecord) -> Self {
        LogRecord {
            epoch: r.epoch,
            l_pbd: r.l_pbd,
            l_stae: r.l_stae,
            l_em: r.l_em,
            total: r.total,
            acc_s: r.metrics.map(|m| m.acc_s),
            acc_u: r.metrics.map(|m| m.acc_u),
            h: r.metrics.map(|m| m.h),
        }
    }
}

/// A log record as one JSON line, newline included.
pub fn log_line(r: &EpochRecord) -> String {
    let mut s = serde_json::to_string(&LogRecord::from(r)).expect("log record serializes");
    s.push('\n');
    s
}

/// Tab-separated per-sample dump: id, Δd, verdict, gesture, emotion.
pub fn prediction_dump(seqs: &[SkeletonSequence], predictions: &[Prediction]) -> String {
    let mut out = String::from("id\tdelta_d\tverdict\tgesture\temotion\n");
    for (s, p) in seqs.iter().zip(predictions) {
        let verdict = match p.gate.verdict {
            Verdict::Seen(_) => "seen",
            Verdict::Unseen => "unseen",
        };
        let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", s.id, fmt_f64(p.gate.delta_d), verdict, p.gesture, p.emotion);
    }
    out
}
