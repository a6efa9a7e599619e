//! Fully connected layers, softmax cross-entropy and the (bidirectional)
//! LSTM stack.
//!
//! Everything uses the column-sample convention: a batch or a sequence is a
//! `d×n` matrix whose columns are samples or timesteps.

use alloc::format;
use alloc::vec::Vec;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::init::Initializer;
use crate::nn::params::{Group, ParamId, ParamStore};

/// Weight `d_out×d_in` and bias `d_out×1` of a fully connected layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FcParams {
    pub w: ParamId,
    pub b: ParamId,
}

impl FcParams {
    pub fn register(
        store: &mut ParamStore,
        init: &mut Initializer,
        name: &str,
        group: Group,
        d_in: usize,
        d_out: usize,
    ) -> Self {
        let w = store.add(format!("{name}.w"), group, init.fan_in_uniform(d_out, d_in, d_in));
        let b = store.add(format!("{name}.b"), group, Matrix::zeros(d_out, 1));
        FcParams { w, b }
    }

    pub fn forward(&self, tape: &mut Tape<'_>, x: Var) -> Var {
        let w = tape.param(self.w);
        let b = tape.param(self.b);
        let wx = tape.matmul(w, x);
        tape.add_col(wx, b)
    }

    pub fn d_out(&self, store: &ParamStore) -> usize {
        store.get(self.w).rows()
    }
}

/// `w·x + b` broadcast over the columns of `x`.
pub fn fc_forward(x: &Matrix, w: &Matrix, b: &Matrix) -> Result<Matrix> {
    if w.cols() != x.rows() {
        return Err(Error::dims("fc_forward", (w.cols(), x.cols()), x.shape()));
    }
    if b.shape() != (w.rows(), 1) {
        return Err(Error::dims("fc_forward", (w.rows(), 1), b.shape()));
    }
    let mut tape = Tape::detached();
    let (xv, wv, bv) = (tape.constant(x.clone()), tape.constant(w.clone()), tape.constant(b.clone()));
    let wx = tape.matmul(wv, xv);
    let out = tape.add_col(wx, bv);
    Ok(tape.value(out).clone())
}

pub(crate) fn check_labels(labels: &[usize], classes: usize) -> Result<()> {
    match labels.iter().find(|&&y| y >= classes) {
        Some(&label) => Err(Error::LabelOutOfRange { label, classes }),
        None => Ok(()),
    }
}

/// `−(1/n) Σᵢ log softmax(logits[:, i])[labels[i]]`.
pub fn softmax_cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<f64> {
    if labels.len() != logits.cols() {
        return Err(Error::dims("softmax_cross_entropy", (logits.rows(), labels.len()), logits.shape()));
    }
    check_labels(labels, logits.rows())?;
    let mut tape = Tape::detached();
    let z = tape.constant(logits.clone());
    let loss = tape.cross_entropy(z, labels);
    Ok(tape.value(loss).item())
}

/// Gate parameters of one LSTM direction. Rows of the stacked matrices are
/// ordered input, forget, output, candidate; each block has `hidden` rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmCellParams {
    pub wx: ParamId,
    pub wh: ParamId,
    pub b: ParamId,
    pub hidden: usize,
}

impl LstmCellParams {
    pub fn register(
        store: &mut ParamStore,
        init: &mut Initializer,
        name: &str,
        group: Group,
        d_in: usize,
        hidden: usize,
    ) -> Self {
        let wx = store.add(format!("{name}.wx"), group, init.fan_in_uniform(4 * hidden, d_in, d_in));
        let wh = store.add(format!("{name}.wh"), group, init.fan_in_uniform(4 * hidden, hidden, hidden));
        let mut bias = Matrix::zeros(4 * hidden, 1);
        for i in hidden..2 * hidden {
            bias.set(i, 0, 1.0);
        }
        let b = store.add(format!("{name}.b"), group, bias);
        LstmCellParams { wx, wh, b, hidden }
    }

    /// Runs the cell over the columns of `x` (in reverse when `reverse`) from
    /// zero initial states. Returns the hidden states in time order.
    pub fn run(&self, tape: &mut Tape<'_>, x: Var, reverse: bool) -> Vec<Var> {
        let h = self.hidden;
        let l = tape.shape(x).1;
        let wx = tape.param(self.wx);
        let wh = tape.param(self.wh);
        let b = tape.param(self.b);
        let xw = tape.matmul(wx, x);
        let pre = tape.add_col(xw, b);

        let mut hs: Vec<Option<Var>> = (0..l).map(|_| None).collect();
        let mut state: Option<(Var, Var)> = None;
        for step in 0..l {
            let t = if reverse { l - 1 - step } else { step };
            let mut z = tape.col(pre, t);
            if let Some((h_prev, _)) = state {
                let rec = tape.matmul(wh, h_prev);
                z = tape.add(z, rec);
            }
            let sig_part = tape.slice_rows(z, 0, 3 * h);
            let sig = tape.sigmoid(sig_part);
            let cand_part = tape.slice_rows(z, 3 * h, h);
            let g = tape.tanh(cand_part);
            let i_gate = tape.slice_rows(sig, 0, h);
            let o_gate = tape.slice_rows(sig, 2 * h, h);
            let mut c = tape.mul(i_gate, g);
            if let Some((_, c_prev)) = state {
                let f_gate = tape.slice_rows(sig, h, h);
                let kept = tape.mul(f_gate, c_prev);
                c = tape.add(c, kept);
            }
            let c_act = tape.tanh(c);
            let h_t = tape.mul(o_gate, c_act);
            hs[t] = Some(h_t);
            state = Some((h_t, c));
        }
        hs.into_iter().map(|v| v.expect("every step visited")).collect()
    }
}

/// One bidirectional layer: a forward and a backward LSTM over the same input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlstmLayer {
    pub forward: LstmCellParams,
    pub backward: LstmCellParams,
}

/// Output of a BLSTM stack: the per-timestep `2H×l` top-layer states plus
/// the top layer's individual hidden states for pooling.
pub struct BlstmOutput {
    pub sequence: Var,
    pub forward_states: Vec<Var>,
    pub backward_states: Vec<Var>,
}

impl BlstmLayer {
    pub fn register(
        store: &mut ParamStore,
        init: &mut Initializer,
        name: &str,
        group: Group,
        d_in: usize,
        hidden: usize,
    ) -> Self {
        BlstmLayer {
            forward: LstmCellParams::register(store, init, &format!("{name}.fwd"), group, d_in, hidden),
            backward: LstmCellParams::register(store, init, &format!("{name}.bwd"), group, d_in, hidden),
        }
    }
}

/// Runs a stack of bidirectional layers over `x: d_in×l`.
pub fn blstm_stack(tape: &mut Tape<'_>, layers: &[BlstmLayer], x: Var) -> Result<BlstmOutput> {
    if tape.shape(x).1 == 0 {
        return Err(Error::EmptySequence);
    }
    let mut input = x;
    let mut out = None;
    for layer in layers {
        let fwd = layer.forward.run(tape, input, false);
        let bwd = layer.backward.run(tape, input, true);
        let f = tape.concat_cols(&fwd);
        let b = tape.concat_cols(&bwd);
        input = tape.concat_rows(&[f, b]);
        out = Some((fwd, bwd));
    }
    let (forward_states, backward_states) = out.unwrap_or_default();
    Ok(BlstmOutput { sequence: input, forward_states, backward_states })
}

/// Plain-matrix wrapper: BLSTM over `x: d_in×l` with parameters from `store`,
/// returning the `2H×l` top-layer output.
pub fn blstm_forward(store: &ParamStore, layers: &[BlstmLayer], x: &Matrix) -> Result<Matrix> {
    if x.cols() == 0 {
        return Err(Error::EmptySequence);
    }
    let mut tape = Tape::new(store);
    let xv = tape.constant(x.clone());
    let out = blstm_stack(&mut tape, layers, xv)?;
    Ok(tape.value(out.sequence).clone())
}
