//! The assembled framework: shared extractor, three branch attentions, the
//! prototype detector, the autoencoder encoder and the emotion head, with
//! every trainable tensor in one [`ParamStore`].

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::autodiff::{Tape, Var};
use crate::data::{AttributeMatrix, PartitionSpec, SkeletonSequence};
use crate::error::{Error, Result};
use crate::features::{BranchAttentionParams, FeatureExtractor, Pooling};
use crate::matrix::Matrix;
use crate::nn::init::Initializer;
use crate::nn::params::{Group, ParamStore};
use crate::pbd::{effective_thresholds, PrototypeModel};
use crate::stae::{StaeGammas, StaeModel, DEFAULT_NEIGHBORS};
use crate::trainer::EmotionHead;

/// Layer sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Architecture {
    pub d_x: usize,
    pub heads: usize,
    pub lstm_hidden: usize,
    pub lstm_layers: usize,
    pub pooling: Pooling,
    pub pbd_hidden: usize,
    pub proto_dim: usize,
    pub emotion_hidden: usize,
    pub initial_threshold: f64,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            d_x: 75,
            heads: 5,
            lstm_hidden: 64,
            lstm_layers: 3,
            pooling: Pooling::LastFirst,
            pbd_hidden: 50,
            proto_dim: 20,
            emotion_hidden: 50,
            initial_threshold: 0.0,
        }
    }
}

impl Architecture {
    pub fn d_f(&self) -> usize {
        2 * self.lstm_hidden
    }

    pub fn validate(&self) -> Result<()> {
        let zero = [
            ("d_x", self.d_x),
            ("heads", self.heads),
            ("lstm_hidden", self.lstm_hidden),
            ("lstm_layers", self.lstm_layers),
            ("pbd_hidden", self.pbd_hidden),
            ("proto_dim", self.proto_dim),
            ("emotion_hidden", self.emotion_hidden),
        ]
        .into_iter()
        .find(|(_, v)| *v == 0);
        if let Some((name, _)) = zero {
            return Err(Error::InvalidConfig(format!("{name} must be positive")));
        }
        if !self.initial_threshold.is_finite() {
            return Err(Error::InvalidConfig("initial threshold must be finite".into()));
        }
        Ok(())
    }
}

/// Gesture class ids on both sides of the split with their emotions.
/// Seen index `k` is prototype `k`; unseen index `j` is column `j` of `A_u`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassSpace {
    pub seen: Vec<usize>,
    pub unseen: Vec<usize>,
    pub seen_emotion: Vec<usize>,
    pub unseen_emotion: Vec<usize>,
    pub emotions: usize,
}

impl ClassSpace {
    pub fn from_partition(p: &PartitionSpec) -> Result<Self> {
        let em = |cs: &[usize]| cs.iter().map(|&c| p.emotion(c)).collect::<Result<Vec<_>>>();
        Ok(ClassSpace {
            seen: p.seen().to_vec(),
            unseen: p.unseen().to_vec(),
            seen_emotion: em(p.seen())?,
            unseen_emotion: em(p.unseen())?,
            emotions: p.emotion_count(),
        })
    }

    pub fn seen_index(&self, class: usize) -> Option<usize> {
        self.seen.iter().position(|&c| c == class)
    }

    pub fn unseen_index(&self, class: usize) -> Option<usize> {
        self.unseen.iter().position(|&c| c == class)
    }

    /// Every class, seen first, in the order used by confusion matrices.
    pub fn all(&self) -> Vec<usize> {
        self.seen.iter().chain(&self.unseen).copied().collect()
    }

    pub fn emotion_of(&self, class: usize) -> Option<usize> {
        self.seen_index(class)
            .map(|k| self.seen_emotion[k])
            .or_else(|| self.unseen_index(class).map(|j| self.unseen_emotion[j]))
    }
}

/// Features of a batch after the three branch attentions (`d_f×N` each).
pub struct BranchFeatures<T> {
    pub pbd: T,
    pub stae: T,
    pub emotion: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Framework {
    pub arch: Architecture,
    pub classes: ClassSpace,
    pub store: ParamStore,
    pub extractor: FeatureExtractor,
    pub pbd_attention: BranchAttentionParams,
    pub stae_attention: BranchAttentionParams,
    pub emotion_attention: BranchAttentionParams,
    pub pbd: PrototypeModel,
    pub stae: StaeModel,
    pub emotion: EmotionHead,
}

impl Framework {
    /// Registers every parameter in a fixed order and initializes from `seed`.
    /// The encoder `U` starts at zero.
    pub fn new(
        arch: Architecture,
        partition: &PartitionSpec,
        attributes: &AttributeMatrix,
        gammas: StaeGammas,
        seed: u64,
    ) -> Result<Self> {
        let classes = ClassSpace::from_partition(partition)?;
        let a_seen = attributes.normalized_columns(&classes.seen)?;
        let a_unseen = attributes.normalized_columns(&classes.unseen)?;
        Framework::with_semantics(arch, classes, a_seen, a_unseen, gammas, seed)
    }

    pub fn with_semantics(
        arch: Architecture,
        classes: ClassSpace,
        a_seen: Matrix,
        a_unseen: Matrix,
        gammas: StaeGammas,
        seed: u64,
    ) -> Result<Self> {
        arch.validate()?;
        if a_seen.cols() != classes.seen.len() || a_unseen.cols() != classes.unseen.len() {
            return Err(Error::dims("class semantics", (a_seen.rows(), classes.seen.len()), a_seen.shape()));
        }
        if a_unseen.rows() != a_seen.rows() {
            return Err(Error::dims("class semantics", (a_seen.rows(), classes.unseen.len()), a_unseen.shape()));
        }
        let d_f = arch.d_f();
        let mut store = ParamStore::new();
        let mut init = Initializer::new(seed);
        let extractor = FeatureExtractor::register(
            &mut store,
            &mut init,
            arch.d_x,
            arch.heads,
            arch.lstm_hidden,
            arch.lstm_layers,
            arch.pooling,
        );
        let pbd_attention = BranchAttentionParams::register(&mut store, &mut init, "pbd.attn", Group::Pbd, d_f);
        let stae_attention = BranchAttentionParams::register(&mut store, &mut init, "stae.attn", Group::Stae, d_f);
        let emotion_attention =
            BranchAttentionParams::register(&mut store, &mut init, "emotion.attn", Group::Emotion, d_f);
        let pbd = PrototypeModel::register(
            &mut store,
            &mut init,
            d_f,
            arch.pbd_hidden,
            arch.proto_dim,
            classes.seen.len(),
            arch.initial_threshold,
        );
        let u = store.add("stae.u", Group::Stae, Matrix::zeros(d_f, a_seen.rows()));
        let stae = StaeModel { u, a_seen, a_unseen, gammas, q: DEFAULT_NEIGHBORS, r: DEFAULT_NEIGHBORS };
        let emotion = EmotionHead::register(&mut store, &mut init, d_f, arch.emotion_hidden, classes.emotions);
        Ok(Framework {
            arch,
            classes,
            store,
            extractor,
            pbd_attention,
            stae_attention,
            emotion_attention,
            pbd,
            stae,
            emotion,
        })
    }

    /// Replaces every parameter value by name. All names must be present
    /// with matching shapes, and no unknown names are accepted.
    pub fn load_params(&mut self, values: Vec<(String, Matrix)>) -> Result<()> {
        if values.len() != self.store.len() {
            return Err(Error::InvalidConfig(format!(
                "expected {} parameters, found {}",
                self.store.len(),
                values.len()
            )));
        }
        for (name, value) in values {
            let id = self
                .store
                .find(&name)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown parameter {name}")))?;
            let slot = self.store.get_mut(id);
            if slot.shape() != value.shape() {
                return Err(Error::dims("load_params", slot.shape(), value.shape()));
            }
            *slot = value;
        }
        Ok(())
    }

    pub fn d_f(&self) -> usize {
        self.arch.d_f()
    }

    /// Feature column of one sequence (`x: d_x×l`) on a tape.
    pub fn features_var(&self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        if tape.shape(x).0 != self.arch.d_x {
            return Err(Error::dims("features", (self.arch.d_x, tape.shape(x).1), tape.shape(x)));
        }
        self.extractor.extract(tape, x)
    }

    pub fn branch_vars(&self, tape: &mut Tape<'_>, f: Var) -> BranchFeatures<Var> {
        BranchFeatures {
            pbd: self.pbd_attention.forward(tape, f),
            stae: self.stae_attention.forward(tape, f),
            emotion: self.emotion_attention.forward(tape, f),
        }
    }

    /// Feature vector of one sequence.
    pub fn extract(&self, seq: &SkeletonSequence) -> Result<Vec<f64>> {
        if seq.d_x() != self.arch.d_x {
            return Err(Error::dims("features", (seq.len(), self.arch.d_x), seq.frames.shape()));
        }
        self.extractor.extract_features(&self.store, &seq.frames)
    }

    /// Features of several sequences as the columns of a `d_f×N` matrix.
    pub fn extract_batch(&self, seqs: &[SkeletonSequence]) -> Result<Matrix> {
        let cols = seqs.iter().map(|s| self.extract(s)).collect::<Result<Vec<_>>>()?;
        Ok(columns_to_matrix(self.d_f(), &cols))
    }

    pub fn branch_features(&self, f: &Matrix) -> Result<BranchFeatures<Matrix>> {
        if f.rows() != self.d_f() {
            return Err(Error::dims("branch_features", (self.d_f(), f.cols()), f.shape()));
        }
        let mut tape = Tape::new(&self.store);
        let fv = tape.constant(f.clone());
        let b = self.branch_vars(&mut tape, fv);
        Ok(BranchFeatures {
            pbd: tape.value(b.pbd).clone(),
            stae: tape.value(b.stae).clone(),
            emotion: tape.value(b.emotion).clone(),
        })
    }

    /// PBD projections `proto_dim×N` of branch-attended features.
    pub fn project(&self, h_pbd: &Matrix) -> Matrix {
        let mut tape = Tape::new(&self.store);
        let h = tape.constant(h_pbd.clone());
        let p = self.pbd.project(&mut tape, h);
        tape.value(p).clone()
    }

    pub fn prototypes(&self) -> &Matrix {
        self.store.get(self.pbd.prototypes)
    }

    pub fn thresholds(&self) -> Vec<f64> {
        effective_thresholds(&self.store, &self.pbd)
    }

    pub fn encoder(&self) -> &Matrix {
        self.store.get(self.stae.u)
    }
}

/// Stacks equal-length vectors as columns.
pub fn columns_to_matrix(rows: usize, cols: &[Vec<f64>]) -> Matrix {
    Matrix::from_fn(rows, cols.len(), |i, j| cols[j][i])
}
