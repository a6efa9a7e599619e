//! Prototype-based detector: projection into a low-dimensional prototype
//! space, the distance-based cross-entropy / prototype / threshold losses,
//! and the nearest-prototype seen-vs-unseen gate.

use alloc::vec::Vec;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::init::Initializer;
use crate::nn::layers::{check_labels, FcParams};
use crate::nn::params::{Group, ParamId, ParamStore};

/// Distance scale of the DCE softmax.
pub const DEFAULT_GAMMA: f64 = 0.5;
/// Standard deviation of the initial prototype coordinates.
pub const PROTOTYPE_INIT_SIGMA: f64 = 0.1;

/// Projection layers, one prototype row per seen class and one raw
/// threshold per prototype.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrototypeModel {
    pub fc1: FcParams,
    pub fc2: FcParams,
    /// `C_s×proto_dim`, row `k` is `m(k)`.
    pub prototypes: ParamId,
    /// `C_s×1`. Trained unconstrained; clamp with [`effective_thresholds`].
    pub thresholds: ParamId,
    pub gamma: f64,
}

impl PrototypeModel {
    #[allow(clippy::too_many_arguments)]
    pub fn register(
        store: &mut ParamStore,
        init: &mut Initializer,
        d_f: usize,
        hidden: usize,
        proto_dim: usize,
        classes: usize,
        initial_threshold: f64,
    ) -> Self {
        let fc1 = FcParams::register(store, init, "pbd.fc1", Group::Pbd, d_f, hidden);
        let fc2 = FcParams::register(store, init, "pbd.fc2", Group::Pbd, hidden, proto_dim);
        let prototypes =
            store.add("pbd.prototypes", Group::Pbd, init.gaussian(classes, proto_dim, PROTOTYPE_INIT_SIGMA));
        let thresholds = store.add("pbd.thresholds", Group::Pbd, Matrix::filled(classes, 1, initial_threshold));
        PrototypeModel { fc1, fc2, prototypes, thresholds, gamma: DEFAULT_GAMMA }
    }

    pub fn classes(&self, store: &ParamStore) -> usize {
        store.get(self.prototypes).rows()
    }

    /// `FC₂(ReLU(FC₁(h)))` for `h: d_f×N`.
    pub fn project(&self, tape: &mut Tape<'_>, h: Var) -> Var {
        let z = self.fc1.forward(tape, h);
        let a = tape.relu(z);
        self.fc2.forward(tape, a)
    }

    /// Squared distances `C_s×N` from every projection to every prototype.
    pub fn distances(&self, tape: &mut Tape<'_>, p: Var) -> Var {
        let m = tape.param(self.prototypes);
        tape.sq_dist(p, m)
    }
}

/// Thresholds clamped to be non-negative, as used at evaluation time.
pub fn effective_thresholds(store: &ParamStore, model: &PrototypeModel) -> Vec<f64> {
    store.get(model.thresholds).as_slice().iter().map(|t| t.max(0.0)).collect()
}

/// Weights of the PBD sub-losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PbdWeights {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
}

/// Index of the smallest entry in each column; ties go to the lowest row.
pub fn argmin_cols(d: &Matrix) -> Vec<usize> {
    (0..d.cols())
        .map(|i| {
            let mut best = 0;
            for k in 1..d.rows() {
                if d.get(k, i) < d.get(best, i) {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// DCE: cross-entropy of `softmax(−γ·d)` against the labels.
pub fn dce_loss_var(tape: &mut Tape<'_>, dist: Var, labels: &[usize], gamma: f64) -> Var {
    let logits = tape.scale(dist, -gamma);
    tape.cross_entropy(logits, labels)
}

/// Mean squared distance of each projection to its own prototype.
pub fn prototype_loss_var(tape: &mut Tape<'_>, dist: Var, labels: &[usize]) -> Var {
    let own = tape.pick(dist, labels);
    tape.mean(own)
}

/// Mean hinge `max(0, min_k d − th(argmin_k d))`.
pub fn threshold_loss1_var(tape: &mut Tape<'_>, dist: Var, thresholds: Var) -> Var {
    let nearest = argmin_cols(tape.value(dist));
    let min_d = tape.pick(dist, &nearest);
    let th = tape.gather(thresholds, &nearest);
    let delta = tape.sub(min_d, th);
    let hinge = tape.relu(delta);
    tape.mean(hinge)
}

/// `Σ_k th(k)²`.
pub fn threshold_loss2_var(tape: &mut Tape<'_>, thresholds: Var) -> Var {
    tape.sum_sq(thresholds)
}

/// Sub-losses and weighted total of the PBD branch on a tape.
#[derive(Debug, Clone, Copy)]
pub struct PbdLossVars {
    pub dce: Var,
    pub pl: Var,
    pub th1: Option<Var>,
    pub th2: Option<Var>,
    pub total: Var,
}

/// Builds `L_dce + β₁L_pl + β₂L_th1 + β₃L_th2`. Threshold terms with a zero
/// weight are left off the tape so thresholds receive no gradient at all.
pub fn pbd_loss_vars(
    tape: &mut Tape<'_>,
    dist: Var,
    thresholds: Var,
    labels: &[usize],
    gamma: f64,
    w: PbdWeights,
) -> PbdLossVars {
    let dce = dce_loss_var(tape, dist, labels, gamma);
    let pl = prototype_loss_var(tape, dist, labels);
    let weighted_pl = tape.scale(pl, w.beta1);
    let mut total = tape.add(dce, weighted_pl);
    let mut th1 = None;
    let mut th2 = None;
    if w.beta2 != 0.0 {
        let l = threshold_loss1_var(tape, dist, thresholds);
        let s = tape.scale(l, w.beta2);
        total = tape.add(total, s);
        th1 = Some(l);
    }
    if w.beta3 != 0.0 {
        let l = threshold_loss2_var(tape, thresholds);
        let s = tape.scale(l, w.beta3);
        total = tape.add(total, s);
        th2 = Some(l);
    }
    PbdLossVars { dce, pl, th1, th2, total }
}

fn check_projection(p: &Matrix, labels: Option<&[usize]>, prototypes: &Matrix) -> Result<()> {
    if p.rows() != prototypes.cols() {
        return Err(Error::dims("pbd", (prototypes.cols(), p.cols()), p.shape()));
    }
    if let Some(labels) = labels {
        if labels.len() != p.cols() {
            return Err(Error::dims("pbd labels", (1, p.cols()), (1, labels.len())));
        }
        check_labels(labels, prototypes.rows())?;
    }
    Ok(())
}

fn with_distances<T>(p: &Matrix, prototypes: &Matrix, f: impl FnOnce(&mut Tape<'static>, Var) -> T) -> T {
    let mut tape = Tape::detached();
    let pv = tape.constant(p.clone());
    let mv = tape.constant(prototypes.clone());
    let d = tape.sq_dist(pv, mv);
    f(&mut tape, d)
}

/// DCE loss for projections `p: proto_dim×n`.
pub fn dce_loss(p: &Matrix, labels: &[usize], prototypes: &Matrix, gamma: f64) -> Result<f64> {
    check_projection(p, Some(labels), prototypes)?;
    Ok(with_distances(p, prototypes, |t, d| {
        let l = dce_loss_var(t, d, labels, gamma);
        t.value(l).item()
    }))
}

pub fn prototype_loss(p: &Matrix, labels: &[usize], prototypes: &Matrix) -> Result<f64> {
    check_projection(p, Some(labels), prototypes)?;
    Ok(with_distances(p, prototypes, |t, d| {
        let l = prototype_loss_var(t, d, labels);
        t.value(l).item()
    }))
}

/// `(L_th1, L_th2)` for raw thresholds.
pub fn threshold_losses(p: &Matrix, prototypes: &Matrix, thresholds: &[f64]) -> Result<(f64, f64)> {
    check_projection(p, None, prototypes)?;
    if thresholds.len() != prototypes.rows() {
        return Err(Error::dims("threshold_losses", (prototypes.rows(), 1), (thresholds.len(), 1)));
    }
    Ok(with_distances(p, prototypes, |t, d| {
        let th = t.constant(Matrix::column(thresholds.to_vec()));
        let l1 = threshold_loss1_var(t, d, th);
        let l2 = threshold_loss2_var(t, th);
        (t.value(l1).item(), t.value(l2).item())
    }))
}

pub fn pbd_total_loss(
    p: &Matrix,
    labels: &[usize],
    prototypes: &Matrix,
    thresholds: &[f64],
    gamma: f64,
    weights: PbdWeights,
) -> Result<f64> {
    check_projection(p, Some(labels), prototypes)?;
    if thresholds.len() != prototypes.rows() {
        return Err(Error::dims("pbd_total_loss", (prototypes.rows(), 1), (thresholds.len(), 1)));
    }
    Ok(with_distances(p, prototypes, |t, d| {
        let th = t.constant(Matrix::column(thresholds.to_vec()));
        let l = pbd_loss_vars(t, d, th, labels, gamma, weights);
        t.value(l.total).item()
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Seen(usize),
    Unseen,
}

/// Outcome of the seen/unseen gate for one projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateDecision {
    /// Index of the nearest prototype.
    pub nearest: usize,
    /// Minimum squared distance minus the nearest class's threshold.
    pub delta_d: f64,
    pub verdict: Verdict,
}

/// Nearest prototype and threshold test; seen iff `Δd ≤ 0`.
pub fn gate(p: &[f64], prototypes: &Matrix, thresholds: &[f64]) -> GateDecision {
    assert_eq!(p.len(), prototypes.cols(), "projection dimension");
    assert_eq!(thresholds.len(), prototypes.rows(), "one threshold per prototype");
    let mut nearest = 0;
    let mut best = f64::INFINITY;
    for k in 0..prototypes.rows() {
        let d: f64 = prototypes.row(k).iter().zip(p).map(|(m, x)| (x - m) * (x - m)).sum();
        if d < best {
            best = d;
            nearest = k;
        }
    }
    let delta_d = best - thresholds[nearest];
    let verdict = if delta_d <= 0.0 { Verdict::Seen(nearest) } else { Verdict::Unseen };
    GateDecision { nearest, delta_d, verdict }
}
