mod common;

use common::checks::tiny_framework;
use gzsl_core::data::SkeletonSequence;
use gzsl_core::model::Framework;
use gzsl_core::pipeline::{evaluate, harmonic_mean, predict, predict_batch, score};
use gzsl_core::stae::InferenceMode;
use gzsl_core::Matrix;

fn sequences(fw: &Framework, seed: u64, per_class: usize) -> Vec<SkeletonSequence> {
    let mut r = common::rng(seed);
    let mut out = Vec::new();
    for class in fw.classes.all() {
        for k in 0..per_class {
            let len = 3 + k % 3;
            let frames = common::random_matrix(&mut r, len, fw.arch.d_x, 1.0);
            let emotion = fw.classes.emotion_of(class).unwrap();
            out.push(SkeletonSequence::new(format!("c{class}-{k}"), frames, class, emotion, None).unwrap());
        }
    }
    out
}

fn set_thresholds(fw: &mut Framework, value: f64) {
    let c = fw.classes.seen.len();
    *fw.store.get_mut(fw.pbd.thresholds) = Matrix::filled(c, 1, value);
}

#[test]
fn published_harmonic_means() {
    let h = harmonic_mean(0.6143, 0.3125);
    let h_em = harmonic_mean(0.8857, 0.6406);
    assert!((100.0 * h - 41.43).abs() <= 0.01, "H = {}", 100.0 * h);
    assert!((100.0 * h_em - 74.35).abs() <= 0.01, "H_em = {}", 100.0 * h_em);
}

#[test]
fn zero_thresholds_route_everything_to_the_autoencoder() {
    let (mut fw, _) = tiny_framework(1, &mut common::rng(1));
    set_thresholds(&mut fw, -1.0);
    let seqs = sequences(&fw, 2, 3);
    let preds = predict_batch(&fw, &seqs, InferenceMode::Transductive).unwrap();
    assert!(preds.iter().all(|p| p.routed_unseen() && fw.classes.unseen.contains(&p.gesture)));
}

#[test]
fn huge_thresholds_keep_everything_seen() {
    let (mut fw, _) = tiny_framework(1, &mut common::rng(1));
    set_thresholds(&mut fw, 1e9);
    let seqs = sequences(&fw, 2, 3);
    let preds = predict_batch(&fw, &seqs, InferenceMode::Transductive).unwrap();
    for p in &preds {
        assert!(!p.routed_unseen());
        assert_eq!(p.gesture, fw.classes.seen[p.gate.nearest]);
    }
}

#[test]
fn predicted_emotion_follows_predicted_gesture() {
    for seed in 0..6 {
        let (mut fw, _) = tiny_framework(seed, &mut common::rng(seed));
        set_thresholds(&mut fw, [0.0, 1e-4, 1e-2, 1.0, 10.0, 1e9][seed as usize]);
        let seqs = sequences(&fw, seed + 100, 4);
        let (report, preds) = evaluate(&fw, &seqs, InferenceMode::Transductive).unwrap();
        for p in &preds {
            assert_eq!(Some(p.emotion), fw.classes.emotion_of(p.gesture));
        }
        assert!(report.acc_s_em >= report.acc_s);
        assert!(report.acc_u_em >= report.acc_u);
    }
}

#[test]
fn per_sample_predictions_ignore_the_batch() {
    let (mut fw, _) = tiny_framework(3, &mut common::rng(3));
    set_thresholds(&mut fw, 1e-3);
    let seqs = sequences(&fw, 4, 3);
    let batch = predict_batch(&fw, &seqs, InferenceMode::PerSample).unwrap();
    for (s, p) in seqs.iter().zip(&batch) {
        let alone = predict(&fw, s).unwrap();
        assert_eq!(alone.gesture, p.gesture);
        assert_eq!(alone.gate.verdict, p.gate.verdict);
    }
    let reversed: Vec<SkeletonSequence> = seqs.iter().rev().cloned().collect();
    let back = predict_batch(&fw, &reversed, InferenceMode::PerSample).unwrap();
    for (p, q) in batch.iter().zip(back.iter().rev()) {
        assert_eq!(p.gesture, q.gesture);
    }
}

#[test]
fn report_agrees_with_its_confusions() {
    let (mut fw, _) = tiny_framework(5, &mut common::rng(5));
    set_thresholds(&mut fw, 2e-3);
    let seqs = sequences(&fw, 6, 5);
    let (report, preds) = evaluate(&fw, &seqs, InferenceMode::Transductive).unwrap();
    let n_seen = fw.classes.seen.len();
    let seen: Vec<usize> = (0..seqs.len()).filter(|&j| fw.classes.seen.contains(&seqs[j].gesture)).collect();
    let unseen: Vec<usize> = (0..seqs.len()).filter(|&j| !seen.contains(&j)).collect();
    let hits = |idx: &[usize]| idx.iter().filter(|&&j| preds[j].gesture == seqs[j].gesture).count() as f64 / idx.len() as f64;
    assert_eq!(report.seen_samples, seen.len());
    assert_eq!(report.unseen_samples, unseen.len());
    assert_eq!(report.acc_s, hits(&seen));
    assert_eq!(report.acc_u, hits(&unseen));
    assert_eq!(report.h, harmonic_mean(report.acc_s, report.acc_u));
    assert_eq!(report.gesture_confusion.total(), seqs.len());
    assert_eq!(report.emotion_confusion_seen.total(), seen.len());
    assert_eq!(report.emotion_confusion_unseen.total(), unseen.len());
    let g = report.gate;
    assert_eq!(g.seen_as_seen + g.seen_as_unseen, seen.len());
    assert_eq!(g.unseen_as_seen + g.unseen_as_unseen, unseen.len());
    assert_eq!(g.seen_as_unseen + g.unseen_as_unseen, preds.iter().filter(|p| p.routed_unseen()).count());
    assert_eq!(report.class_order[..n_seen], fw.classes.seen[..]);
    assert_eq!(score(&fw, &seqs, &preds).unwrap(), report);
}

#[test]
fn score_rejects_mismatched_lengths() {
    let (fw, _) = tiny_framework(7, &mut common::rng(7));
    let seqs = sequences(&fw, 8, 1);
    let preds = predict_batch(&fw, &seqs, InferenceMode::Transductive).unwrap();
    assert!(score(&fw, &seqs[1..], &preds).is_err());
}
