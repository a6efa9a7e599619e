//! Shared feature extraction: multi-head self-attention over the raw frames,
//! a stacked BLSTM, pooling to one vector per sequence, and the per-branch
//! attention gates that reweight that vector for each task.

use alloc::format;
use alloc::vec::Vec;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::init::Initializer;
use crate::nn::layers::{blstm_stack, BlstmLayer};
use crate::nn::params::{Group, ParamId, ParamStore};

/// Projection matrices of the self-attention block. The per-head matrices
/// `Wᵢ^Q`, `Wᵢ^K`, `Wᵢ^V` (each `d_x×d_x`) are stored stacked: rows
/// `i·d_x..(i+1)·d_x` of `wq` hold head `i`. `wo` is `d_x×(h·d_x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelfAttentionParams {
    pub wq: ParamId,
    pub wk: ParamId,
    pub wv: ParamId,
    pub wo: ParamId,
    pub heads: usize,
    pub d_x: usize,
}

impl SelfAttentionParams {
    pub fn register(store: &mut ParamStore, init: &mut Initializer, name: &str, d_x: usize, heads: usize) -> Self {
        let hd = heads * d_x;
        let wq = store.add(format!("{name}.wq"), Group::Shared, init.fan_in_uniform(hd, d_x, d_x));
        let wk = store.add(format!("{name}.wk"), Group::Shared, init.fan_in_uniform(hd, d_x, d_x));
        let wv = store.add(format!("{name}.wv"), Group::Shared, init.fan_in_uniform(hd, d_x, d_x));
        let wo = store.add(format!("{name}.wo"), Group::Shared, init.fan_in_uniform(d_x, hd, hd));
        SelfAttentionParams { wq, wk, wv, wo, heads, d_x }
    }

    /// `W^O · Concat(head₁ᵀ, …, head_hᵀ)` for `x: d_x×l`; output is `d_x×l`.
    pub fn forward(&self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        let (d, l) = tape.shape(x);
        if l == 0 {
            return Err(Error::EmptySequence);
        }
        if d != self.d_x {
            return Err(Error::dims("multi_head_self_attention", (self.d_x, l), (d, l)));
        }
        let (wq, wk, wv, wo) =
            (tape.param(self.wq), tape.param(self.wk), tape.param(self.wv), tape.param(self.wo));
        let q_all = tape.matmul(wq, x);
        let k_all = tape.matmul(wk, x);
        let v_all = tape.matmul(wv, x);
        let mut heads = Vec::with_capacity(self.heads);
        for i in 0..self.heads {
            let q = tape.slice_rows(q_all, i * d, d);
            let k = tape.slice_rows(k_all, i * d, d);
            let v = tape.slice_rows(v_all, i * d, d);
            let head = attention_var(tape, q, k, v);
            heads.push(tape.transpose(head));
        }
        let concat = tape.concat_rows(&heads);
        Ok(tape.matmul(wo, concat))
    }
}

/// `softmax(QᵀK/√d_k) Vᵀ` on the tape, softmax along each row (per query).
pub fn attention_var(tape: &mut Tape<'_>, q: Var, k: Var, v: Var) -> Var {
    let d_k = tape.shape(q).0;
    let qt = tape.transpose(q);
    let scores = tape.matmul(qt, k);
    let scaled = tape.scale(scores, 1.0 / libm::sqrt(d_k as f64));
    let weights = tape.softmax_rows(scaled);
    let vt = tape.transpose(v);
    tape.matmul(weights, vt)
}

/// Scaled dot-product attention for `q, k: d_k×n`, `v: d_v×n`; returns `n×d_v`.
pub fn scaled_dot_attention(q: &Matrix, k: &Matrix, v: &Matrix) -> Result<Matrix> {
    if q.shape() != k.shape() {
        return Err(Error::dims("scaled_dot_attention", q.shape(), k.shape()));
    }
    if v.cols() != q.cols() {
        return Err(Error::dims("scaled_dot_attention", (v.rows(), q.cols()), v.shape()));
    }
    let mut tape = Tape::detached();
    let (qv, kv, vv) = (tape.constant(q.clone()), tape.constant(k.clone()), tape.constant(v.clone()));
    let out = attention_var(&mut tape, qv, kv, vv);
    Ok(tape.value(out).clone())
}

/// Plain-matrix multi-head self-attention using parameters from `store`.
pub fn multi_head_self_attention(store: &ParamStore, params: &SelfAttentionParams, x: &Matrix) -> Result<Matrix> {
    let mut tape = Tape::new(store);
    let xv = tape.constant(x.clone());
    let out = params.forward(&mut tape, xv)?;
    Ok(tape.value(out).clone())
}

/// How per-timestep BLSTM states become one feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pooling {
    /// Last forward state concatenated with the first backward state.
    #[default]
    LastFirst,
    /// Mean of the top-layer outputs over time.
    Mean,
}

impl Pooling {
    pub fn name(self) -> &'static str {
        match self {
            Pooling::LastFirst => "last-first",
            Pooling::Mean => "mean",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "last-first" => Some(Pooling::LastFirst),
            "mean" => Some(Pooling::Mean),
            _ => None,
        }
    }
}

/// Self-attention followed by a BLSTM stack and pooling.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureExtractor {
    pub attention: SelfAttentionParams,
    pub layers: Vec<BlstmLayer>,
    pub pooling: Pooling,
}

impl FeatureExtractor {
    pub fn register(
        store: &mut ParamStore,
        init: &mut Initializer,
        d_x: usize,
        heads: usize,
        hidden: usize,
        depth: usize,
        pooling: Pooling,
    ) -> Self {
        let attention = SelfAttentionParams::register(store, init, "shared.attn", d_x, heads);
        let layers = (0..depth)
            .map(|i| {
                let d_in = if i == 0 { d_x } else { 2 * hidden };
                BlstmLayer::register(store, init, &format!("shared.blstm{i}"), Group::Shared, d_in, hidden)
            })
            .collect();
        FeatureExtractor { attention, layers, pooling }
    }

    pub fn d_f(&self) -> usize {
        2 * self.layers.first().map_or(0, |l| l.forward.hidden)
    }

    /// Feature column `d_f×1` for one sequence given as `x: d_x×l`.
    pub fn extract(&self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        let attended = self.attention.forward(tape, x)?;
        let out = blstm_stack(tape, &self.layers, attended)?;
        Ok(match self.pooling {
            Pooling::LastFirst => {
                let last = *out.forward_states.last().expect("non-empty sequence");
                let first = out.backward_states[0];
                tape.concat_rows(&[last, first])
            }
            Pooling::Mean => {
                let l = tape.shape(out.sequence).1;
                let avg = tape.constant(Matrix::filled(l, 1, 1.0 / l as f64));
                tape.matmul(out.sequence, avg)
            }
        })
    }

    /// Feature vector of one sequence given frame-major (`l×d_x`).
    pub fn extract_features(&self, store: &ParamStore, frames: &Matrix) -> Result<Vec<f64>> {
        if frames.rows() == 0 {
            return Err(Error::EmptySequence);
        }
        let mut tape = Tape::new(store);
        let x = tape.constant(frames.transpose());
        let f = self.extract(&mut tape, x)?;
        Ok(tape.value(f).as_slice().to_vec())
    }
}

/// Per-branch attention gate `W^at` (`d_f×d_f`) and `b^at` (`d_f×1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BranchAttentionParams {
    pub w: ParamId,
    pub b: ParamId,
}

impl BranchAttentionParams {
    pub fn register(store: &mut ParamStore, init: &mut Initializer, name: &str, group: Group, d_f: usize) -> Self {
        let w = store.add(format!("{name}.w"), group, init.fan_in_uniform(d_f, d_f, d_f));
        let b = store.add(format!("{name}.b"), group, Matrix::zeros(d_f, 1));
        BranchAttentionParams { w, b }
    }

    /// `softmax(W^at f + b^at) ⊙ f` per column of `f: d_f×N`.
    pub fn forward(&self, tape: &mut Tape<'_>, f: Var) -> Var {
        let w = tape.param(self.w);
        let b = tape.param(self.b);
        branch_attention_var(tape, f, w, b)
    }
}

pub fn branch_attention_var(tape: &mut Tape<'_>, f: Var, w: Var, b: Var) -> Var {
    let wf = tape.matmul(w, f);
    let logits = tape.add_col(wf, b);
    let weights = tape.softmax_cols(logits);
    tape.mul(weights, f)
}

/// Plain-matrix branch attention for `f: d_f×N`.
pub fn branch_attention(f: &Matrix, w: &Matrix, b: &Matrix) -> Result<Matrix> {
    if w.shape() != (f.rows(), f.rows()) {
        return Err(Error::dims("branch_attention", (f.rows(), f.rows()), w.shape()));
    }
    if b.shape() != (f.rows(), 1) {
        return Err(Error::dims("branch_attention", (f.rows(), 1), b.shape()));
    }
    let mut tape = Tape::detached();
    let (fv, wv, bv) = (tape.constant(f.clone()), tape.constant(w.clone()), tape.constant(b.clone()));
    let out = branch_attention_var(&mut tape, fv, wv, bv);
    Ok(tape.value(out).clone())
}

/// The softmax weights `branch_attention` applies, for inspection.
pub fn branch_attention_weights(f: &Matrix, w: &Matrix, b: &Matrix) -> Result<Matrix> {
    if w.shape() != (f.rows(), f.rows()) || b.shape() != (f.rows(), 1) {
        return Err(Error::dims("branch_attention_weights", (f.rows(), f.rows()), w.shape()));
    }
    let mut tape = Tape::detached();
    let (fv, wv, bv) = (tape.constant(f.clone()), tape.constant(w.clone()), tape.constant(b.clone()));
    let wf = tape.matmul(wv, fv);
    let logits = tape.add_col(wf, bv);
    let weights = tape.softmax_cols(logits);
    Ok(tape.value(weights).clone())
}
