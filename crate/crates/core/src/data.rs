//! Skeleton sequences, class attribute tables and seen/unseen partitions.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// One recorded gesture: `l×d_x` frames (one frame per row).
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence {
    pub id: String,
    pub frames: Matrix,
    pub gesture: usize,
    pub emotion: usize,
    pub subject: Option<String>,
}

impl SkeletonSequence {
    pub fn new(
        id: impl Into<String>,
        frames: Matrix,
        gesture: usize,
        emotion: usize,
        subject: Option<String>,
    ) -> Result<Self> {
        if frames.rows() == 0 {
            return Err(Error::EmptySequence);
        }
        if !frames.is_finite() {
            return Err(Error::NonFinite { what: "skeleton frames" });
        }
        Ok(SkeletonSequence { id: id.into(), frames, gesture, emotion, subject })
    }

    pub fn len(&self) -> usize {
        self.frames.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.rows() == 0
    }

    pub fn d_x(&self) -> usize {
        self.frames.cols()
    }

    /// Frames as columns (`d_x×l`), the layout the feature extractor takes.
    pub fn columns(&self) -> Matrix {
        self.frames.transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttributeKind {
    /// Value in `[0, 1]`.
    Continuous,
    /// Value in `{0, 1}`.
    Binary,
}

impl AttributeKind {
    pub fn code(self) -> char {
        match self {
            AttributeKind::Continuous => 'c',
            AttributeKind::Binary => 'b',
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "c" => Some(AttributeKind::Continuous),
            "b" => Some(AttributeKind::Binary),
            _ => None,
        }
    }

    fn admits(self, v: f64) -> bool {
        match self {
            AttributeKind::Continuous => (0.0..=1.0).contains(&v),
            AttributeKind::Binary => v == 0.0 || v == 1.0,
        }
    }
}

/// Per-class semantic vectors. `values` has one row per entry of `class_ids`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeMatrix {
    class_ids: Vec<usize>,
    names: Vec<String>,
    kinds: Vec<AttributeKind>,
    values: Matrix,
}

impl AttributeMatrix {
    pub fn new(class_ids: Vec<usize>, names: Vec<String>, kinds: Vec<AttributeKind>, values: Matrix) -> Result<Self> {
        if names.len() != kinds.len() || values.cols() != kinds.len() || values.rows() != class_ids.len() {
            return Err(Error::dims("attribute matrix", (class_ids.len(), kinds.len()), values.shape()));
        }
        for (i, &c) in class_ids.iter().enumerate() {
            if class_ids[..i].contains(&c) {
                return Err(Error::InvalidConfig(format!("duplicate attribute class {c}")));
            }
            for (a, &kind) in kinds.iter().enumerate() {
                let value = values.get(i, a);
                if !kind.admits(value) {
                    return Err(Error::OutOfRangeAttribute { class: c, attribute: a, value });
                }
            }
        }
        Ok(AttributeMatrix { class_ids, names, kinds, values })
    }

    pub fn class_ids(&self) -> &[usize] {
        &self.class_ids
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn kinds(&self) -> &[AttributeKind] {
        &self.kinds
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.kinds.len()
    }

    /// Raw attribute vector of a class.
    pub fn vector(&self, class: usize) -> Result<&[f64]> {
        let row = self.class_ids.iter().position(|&c| c == class).ok_or(Error::MissingClass { class })?;
        Ok(self.values.row(row))
    }

    /// `d_s×k` matrix whose columns are the ℓ₂-normalized vectors of
    /// `classes`, in order. All-zero vectors stay zero.
    pub fn normalized_columns(&self, classes: &[usize]) -> Result<Matrix> {
        let mut out = Matrix::zeros(self.dim(), classes.len());
        for (j, &c) in classes.iter().enumerate() {
            let v = self.vector(c)?;
            let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
            let inv = if norm > 0.0 { 1.0 / norm } else { 0.0 };
            for (i, &x) in v.iter().enumerate() {
                out.set(i, j, x * inv);
            }
        }
        Ok(out)
    }
}

/// Seen/unseen gesture classes and the gesture-to-emotion map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionSpec {
    seen: Vec<usize>,
    unseen: Vec<usize>,
    emotion_of: BTreeMap<usize, usize>,
}

impl PartitionSpec {
    /// Emotion ids must be dense (`0..C_em`); every class of either set
    /// needs an emotion.
    pub fn new(seen: Vec<usize>, unseen: Vec<usize>, emotion_of: BTreeMap<usize, usize>) -> Result<Self> {
        if seen.is_empty() {
            return Err(Error::InvalidPartition("no seen classes".into()));
        }
        for (i, &c) in seen.iter().enumerate() {
            if seen[..i].contains(&c) {
                return Err(Error::InvalidPartition(format!("seen class {c} listed twice")));
            }
        }
        for (i, &c) in unseen.iter().enumerate() {
            if unseen[..i].contains(&c) {
                return Err(Error::InvalidPartition(format!("unseen class {c} listed twice")));
            }
            if seen.contains(&c) {
                return Err(Error::InvalidPartition(format!("class {c} is both seen and unseen")));
            }
        }
        for c in seen.iter().chain(&unseen) {
            if !emotion_of.contains_key(c) {
                return Err(Error::InvalidPartition(format!("class {c} has no emotion")));
            }
        }
        let count = emotion_of.values().copied().max().map_or(0, |m| m + 1);
        for e in 0..count {
            if !emotion_of.values().any(|&v| v == e) {
                return Err(Error::InvalidPartition(format!("emotion ids not dense, {e} unused")));
            }
        }
        Ok(PartitionSpec { seen, unseen, emotion_of })
    }

    /// Same classes and emotion map with a different unseen set; every other
    /// mapped class becomes seen.
    pub fn with_unseen(emotion_of: BTreeMap<usize, usize>, unseen: &[usize]) -> Result<Self> {
        let seen = emotion_of.keys().copied().filter(|c| !unseen.contains(c)).collect();
        PartitionSpec::new(seen, unseen.to_vec(), emotion_of)
    }

    pub fn seen(&self) -> &[usize] {
        &self.seen
    }

    pub fn unseen(&self) -> &[usize] {
        &self.unseen
    }

    pub fn emotion_map(&self) -> &BTreeMap<usize, usize> {
        &self.emotion_of
    }

    pub fn emotion_count(&self) -> usize {
        self.emotion_of.values().copied().max().map_or(0, |m| m + 1)
    }

    pub fn emotion(&self, gesture: usize) -> Result<usize> {
        self.emotion_of.get(&gesture).copied().ok_or(Error::UnknownClassId { class: gesture })
    }

    pub fn is_seen(&self, gesture: usize) -> bool {
        self.seen.contains(&gesture)
    }

    pub fn is_unseen(&self, gesture: usize) -> bool {
        self.unseen.contains(&gesture)
    }

    pub fn seen_index(&self, gesture: usize) -> Option<usize> {
        self.seen.iter().position(|&c| c == gesture)
    }

    pub fn unseen_index(&self, gesture: usize) -> Option<usize> {
        self.unseen.iter().position(|&c| c == gesture)
    }

    /// Checks a sample's labels against the partition.
    pub fn check_sample(&self, s: &SkeletonSequence) -> Result<()> {
        let e = self.emotion(s.gesture)?;
        if !self.is_seen(s.gesture) && !self.is_unseen(s.gesture) {
            return Err(Error::UnknownClassId { class: s.gesture });
        }
        if e != s.emotion {
            return Err(Error::InvalidPartition(format!(
                "sample {} has emotion {} but gesture {} maps to {}",
                s.id, s.emotion, s.gesture, e
            )));
        }
        Ok(())
    }
}

/// Gesture ids 0..=29 grouped into the five emotions
/// (happy, sad, surprise, fear, anger).
pub fn masr_emotion_map() -> BTreeMap<usize, usize> {
    let bounds = [(0, 5), (6, 9), (10, 16), (17, 23), (24, 29)];
    let mut map = BTreeMap::new();
    for (e, &(lo, hi)) in bounds.iter().enumerate() {
        for g in lo..=hi {
            map.insert(g, e);
        }
    }
    map
}

/// Unseen gesture ids of the first evaluation setting.
pub const MASR_PARTITION1_UNSEEN: [usize; 10] = [1, 3, 8, 9, 13, 14, 19, 21, 26, 29];
/// Unseen gesture ids of the second evaluation setting (all anger gestures).
pub const MASR_PARTITION2_UNSEEN: [usize; 6] = [24, 25, 26, 27, 28, 29];

pub fn masr_partition(setting: usize) -> Result<PartitionSpec> {
    match setting {
        1 => PartitionSpec::with_unseen(masr_emotion_map(), &MASR_PARTITION1_UNSEEN),
        2 => PartitionSpec::with_unseen(masr_emotion_map(), &MASR_PARTITION2_UNSEEN),
        _ => Err(Error::InvalidConfig(format!("no partition setting {setting}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn masr_partitions() {
        let p1 = masr_partition(1).unwrap();
        assert_eq!(p1.seen().len(), 20);
        assert_eq!(p1.unseen(), &MASR_PARTITION1_UNSEEN);
        assert_eq!(p1.emotion_count(), 5);
        let p2 = masr_partition(2).unwrap();
        assert_eq!(p2.seen(), &(0..24).collect::<Vec<_>>()[..]);
        assert!(p2.unseen().iter().all(|&g| p2.emotion(g).unwrap() == 4));
    }

    #[test]
    fn overlapping_sets_rejected() {
        let map: BTreeMap<_, _> = [(0, 0), (1, 1)].into_iter().collect();
        assert!(matches!(PartitionSpec::new(vec![0, 1], vec![1], map), Err(Error::InvalidPartition(_))));
    }

    #[test]
    fn attributes_validate_and_normalize() {
        let kinds = vec![AttributeKind::Continuous, AttributeKind::Binary];
        let names = vec!["reach".into(), "raised".into()];
        let values = Matrix::from_rows(&[[0.6, 1.0], [0.0, 0.0], [1.0, 0.0]]);
        let a = AttributeMatrix::new(vec![4, 7, 9], names.clone(), kinds.clone(), values).unwrap();
        let cols = a.normalized_columns(&[9, 4, 7]).unwrap();
        assert_eq!(cols.col(0), vec![1.0, 0.0]);
        let n = libm::sqrt(0.36 + 1.0);
        assert!((cols.get(0, 1) - 0.6 / n).abs() < 1e-15);
        assert_eq!(cols.col(2), vec![0.0, 0.0]);
        assert_eq!(a.normalized_columns(&[5]).unwrap_err(), Error::MissingClass { class: 5 });

        let bad = Matrix::from_rows(&[[0.5, 0.5]]);
        assert_eq!(
            AttributeMatrix::new(vec![0], names, kinds, bad).unwrap_err(),
            Error::OutOfRangeAttribute { class: 0, attribute: 1, value: 0.5 }
        );
    }
}
