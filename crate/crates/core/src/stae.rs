//! Stacked autoencoder with manifold regularization.
//!
//! Training fits the encoder `U` (`d_h×d_s`) so that features reconstruct
//! from their class semantics and map onto their one-hot labels, with a
//! feature-graph smoothness penalty. At test time the label matrix of a
//! whole batch is the solution of a Sylvester equation coupling every test
//! instance through a cosine kNN instance graph.

use alloc::vec::Vec;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::graph::{cosine_matrix, graph_laplacian, knn_cosine_graph, knn_mask, Axis};
use crate::linalg::solve_sylvester;
use crate::matrix::Matrix;
use crate::nn::layers::check_labels;
use crate::nn::params::ParamId;

/// Neighbor count of both the instance and feature graphs.
pub const DEFAULT_NEIGHBORS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaeGammas {
    /// Weight of the semantic (label-space) term.
    pub gamma1: f64,
    /// Weight of the test-time instance-graph regularizer.
    pub gamma2: f64,
    /// Weight of the training feature-graph regularizer.
    pub gamma3: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaeModel {
    pub u: ParamId,
    /// `d_s×C_s`, columns are the (normalized) seen-class attribute vectors.
    pub a_seen: Matrix,
    /// `d_s×C_u`, columns are the (normalized) unseen-class attribute vectors.
    pub a_unseen: Matrix,
    pub gammas: StaeGammas,
    /// Instance-graph neighbors.
    pub q: usize,
    /// Feature-graph neighbors.
    pub r: usize,
}

/// How unseen-gated samples are solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InferenceMode {
    /// One Sylvester solve over the whole batch with the instance graph.
    #[default]
    Transductive,
    /// Independent per-sample solves (instance graph switched off).
    PerSample,
}

impl InferenceMode {
    pub fn name(self) -> &'static str {
        match self {
            InferenceMode::Transductive => "transductive",
            InferenceMode::PerSample => "per-sample",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "transductive" => Some(InferenceMode::Transductive),
            "per-sample" => Some(InferenceMode::PerSample),
            _ => None,
        }
    }
}

/// Scores `C_u×N` and the argmax unseen-class index per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct UnseenPrediction {
    pub scores: Matrix,
    pub labels: Vec<usize>,
}

/// `A_s Yᵀ`: the semantic vector of each sample's class, as columns.
pub fn class_semantics(a: &Matrix, labels: &[usize]) -> Matrix {
    Matrix::from_fn(a.rows(), labels.len(), |i, j| a.get(i, labels[j]))
}

fn one_hot_t(classes: usize, labels: &[usize]) -> Matrix {
    let mut y = Matrix::zeros(classes, labels.len());
    for (j, &c) in labels.iter().enumerate() {
        y.set(c, j, 1.0);
    }
    y
}

/// Feature-graph neighbor mask over the rows of `h`. Zero rows become
/// isolated vertices instead of failing.
fn feature_mask(h: &Matrix, r: usize) -> Option<Matrix> {
    let n = h.rows();
    if n < 2 {
        return None;
    }
    let s = cosine_matrix(h, true).expect("zero rows allowed");
    let mut mask = knn_mask(&s, r.min(n - 1));
    for i in 0..n {
        if h.row(i).iter().all(|&v| v == 0.0) {
            for j in 0..n {
                mask.set(i, j, 0.0);
                mask.set(j, i, 0.0);
            }
        }
    }
    Some(mask)
}

/// `tr(B L^F Bᵀ)` for `h: d_h×n`, `b: C×d_h`, with the feature graph built
/// on the rows of `h`. The neighbor selection is fixed from the current
/// values; the cosine weights themselves stay differentiable.
pub fn feature_regularizer_var(tape: &mut Tape<'_>, h: Var, b: Var, r: usize) -> Var {
    let Some(mask) = feature_mask(tape.value(h), r) else {
        return tape.constant(Matrix::scalar(0.0));
    };
    let hn = tape.row_normalize(h);
    let hnt = tape.transpose(hn);
    let cos = tape.matmul(hn, hnt);
    let mask = tape.constant(mask);
    let w = tape.mul(cos, mask);
    let lap = tape.laplacian(w);
    let bl = tape.matmul(b, lap);
    let prod = tape.mul(b, bl);
    tape.sum(prod)
}

/// Unweighted terms of the StAE training objective.
#[derive(Debug, Clone, Copy)]
pub struct StaeLossVars {
    /// `‖H − U A_s Yᵀ‖²_F`
    pub reconstruction: Var,
    /// `‖A_sᵀ Uᵀ H − Yᵀ‖²_F`
    pub semantic: Var,
    /// `tr(B L^F Bᵀ)`, absent when `γ₃ = 0`.
    pub feature_reg: Option<Var>,
}

pub fn stae_loss_vars(
    tape: &mut Tape<'_>,
    h: Var,
    labels: &[usize],
    u: Var,
    a_seen: &Matrix,
    gamma3: f64,
    r: usize,
) -> StaeLossVars {
    let s = tape.constant(class_semantics(a_seen, labels));
    let us = tape.matmul(u, s);
    let diff = tape.sub(h, us);
    let reconstruction = tape.sum_sq(diff);

    let a_t = tape.constant(a_seen.transpose());
    let ut = tape.transpose(u);
    let b = tape.matmul(a_t, ut);
    let proj = tape.matmul(b, h);
    let y = tape.constant(one_hot_t(a_seen.cols(), labels));
    let sem_diff = tape.sub(proj, y);
    let semantic = tape.sum_sq(sem_diff);

    let feature_reg = (gamma3 != 0.0).then(|| feature_regularizer_var(tape, h, b, r));
    StaeLossVars { reconstruction, semantic, feature_reg }
}

fn check_stae_inputs(h: &Matrix, u: &Matrix, a: &Matrix) -> Result<()> {
    if u.rows() != h.rows() {
        return Err(Error::dims("stae", (h.rows(), a.rows()), u.shape()));
    }
    if u.cols() != a.rows() {
        return Err(Error::dims("stae", (u.rows(), a.rows()), u.shape()));
    }
    Ok(())
}

/// `tr(B L^F Bᵀ)` with `B = A_sᵀUᵀ` and the feature graph over the rows of `h`.
pub fn feature_regularizer(h: &Matrix, u: &Matrix, a_seen: &Matrix, r: usize) -> Result<f64> {
    check_stae_inputs(h, u, a_seen)?;
    let mut tape = Tape::detached();
    let hv = tape.constant(h.clone());
    let b = tape.constant(a_seen.transpose().matmul_nt(u));
    let reg = feature_regularizer_var(&mut tape, hv, b, r);
    Ok(tape.value(reg).item())
}

/// `‖H − U A_s Yᵀ‖² + γ₁‖A_sᵀUᵀH − Yᵀ‖² + γ₃ R^F` (sums over samples).
pub fn stae_train_loss(
    h: &Matrix,
    labels: &[usize],
    u: &Matrix,
    a_seen: &Matrix,
    gammas: StaeGammas,
    r: usize,
) -> Result<f64> {
    check_stae_inputs(h, u, a_seen)?;
    if labels.len() != h.cols() {
        return Err(Error::dims("stae_train_loss", (1, h.cols()), (1, labels.len())));
    }
    check_labels(labels, a_seen.cols())?;
    let mut tape = Tape::detached();
    let hv = tape.constant(h.clone());
    let uv = tape.constant(u.clone());
    let t = stae_loss_vars(&mut tape, hv, labels, uv, a_seen, gammas.gamma3, r);
    let mut total = tape.value(t.reconstruction).item() + gammas.gamma1 * tape.value(t.semantic).item();
    if let Some(reg) = t.feature_reg {
        total += gammas.gamma3 * tape.value(reg).item();
    }
    Ok(total)
}

/// Closed-form minimizer of the two autoencoder terms (without the graph
/// term) for `U`, given training features and labels:
/// `γ₁HHᵀ U + U SSᵀ = (1 + γ₁) H Sᵀ` with `S = A_s Yᵀ`, plus a tiny ridge.
pub fn fit_encoder(h: &Matrix, labels: &[usize], a_seen: &Matrix, gamma1: f64) -> Result<Matrix> {
    if labels.len() != h.cols() {
        return Err(Error::dims("fit_encoder", (1, h.cols()), (1, labels.len())));
    }
    if h.cols() == 0 {
        return Err(Error::EmptyBatch);
    }
    check_labels(labels, a_seen.cols())?;
    let s = class_semantics(a_seen, labels);
    let mut lhs = h.matmul_nt(h).scale(gamma1);
    let rhs_b = s.matmul_nt(&s);
    let c = h.matmul_nt(&s).scale(1.0 + gamma1);
    let ridge = 1e-6 * (lhs.trace() / lhs.rows() as f64 + rhs_b.trace() / rhs_b.rows() as f64) + 1e-12;
    for i in 0..lhs.rows() {
        lhs.set(i, i, lhs.get(i, i) + ridge);
    }
    solve_sylvester(&lhs, &rhs_b, &c)
}

/// Index of the largest entry per column; ties go to the lowest row.
pub fn argmax_cols(m: &Matrix) -> Vec<usize> {
    (0..m.cols())
        .map(|j| {
            let mut best = 0;
            for i in 1..m.rows() {
                if m.get(i, j) > m.get(best, j) {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// The three coefficient matrices of the test-time Sylvester equation.
pub struct SylvesterSystem {
    pub a_sy: Matrix,
    pub b_sy: Matrix,
    pub c_sy: Matrix,
}

/// Assembles `A_sy = AᵤᵀUᵀUAᵤ + γ₁I`, `B_sy = γ₂(Q − W)` and
/// `C_sy = (γ₁+1)AᵤᵀUᵀH` for `h_te: d_h×N`.
pub fn sylvester_system(
    h_te: &Matrix,
    u: &Matrix,
    a_unseen: &Matrix,
    gammas: StaeGammas,
    q: usize,
    mode: InferenceMode,
) -> Result<SylvesterSystem> {
    check_stae_inputs(h_te, u, a_unseen)?;
    let n = h_te.cols();
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    let ua = u.matmul(a_unseen);
    let mut a_sy = ua.matmul_tn(&ua);
    for i in 0..a_sy.rows() {
        a_sy.set(i, i, a_sy.get(i, i) + gammas.gamma1);
    }
    let c_sy = ua.matmul_tn(h_te).scale(gammas.gamma1 + 1.0);
    let b_sy = if mode == InferenceMode::PerSample || gammas.gamma2 == 0.0 || n == 1 {
        Matrix::zeros(n, n)
    } else {
        let k = q.min(n - 1);
        let graph = knn_cosine_graph(h_te, k, Axis::Instances)?;
        graph_laplacian(&graph).scale(gammas.gamma2)
    };
    Ok(SylvesterSystem { a_sy, b_sy, c_sy })
}

/// Transductive unseen-class inference for the columns of `h_te`.
pub fn stae_infer(
    h_te: &Matrix,
    u: &Matrix,
    a_unseen: &Matrix,
    gammas: StaeGammas,
    q: usize,
    mode: InferenceMode,
) -> Result<UnseenPrediction> {
    let sys = sylvester_system(h_te, u, a_unseen, gammas, q, mode)?;
    let scores = solve_sylvester(&sys.a_sy, &sys.b_sy, &sys.c_sy)?;
    let labels = argmax_cols(&scores);
    Ok(UnseenPrediction { scores, labels })
}
