use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use gzsl_core::data::{AttributeKind, AttributeMatrix, PartitionSpec, SkeletonSequence};
use gzsl_core::Matrix;

use super::{push_list, push_matrix, push_row, read_file, write_file, LineReader};
use crate::error::{GzslError, Result};

pub const DATASET_MAGIC: &str = "gzsl-dataset-v1";
pub const ATTRIBUTES_MAGIC: &str = "gzsl-attributes-v1";
pub const PARTITION_MAGIC: &str = "gzsl-partition-v1";

/// Contents of a dataset file: a class descriptor plus sample records.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub d_x: usize,
    pub attribute_dims: usize,
    /// Gesture class id to emotion id, for every class of the dataset.
    pub emotion_of: BTreeMap<usize, usize>,
    pub samples: Vec<SkeletonSequence>,
}

fn check_token(s: &str, what: &str) -> Result<()> {
    if s.is_empty() || s.contains(char::is_whitespace) || s == "-" {
        return Err(GzslError::InvalidSpec(format!("{what} {s:?} must be a non-empty token without whitespace")));
    }
    Ok(())
}

pub fn write_dataset(path: &Path, data: &DatasetFile) -> Result<()> {
    let mut out = String::new();
    out.push_str(DATASET_MAGIC);
    out.push('\n');
    out.push_str(&format!("d_x {}\nattribute_dims {}\nclasses {}\n", data.d_x, data.attribute_dims, data.emotion_of.len()));
    for (g, e) in &data.emotion_of {
        out.push_str(&format!("class {g} emotion {e}\n"));
    }
    out.push_str(&format!("samples {}\n", data.samples.len()));
    for s in &data.samples {
        check_token(&s.id, "sample id")?;
        let subject = match &s.subject {
            Some(sub) => {
                check_token(sub, "subject")?;
                sub.as_str()
            }
            None => "-",
        };
        out.push_str(&format!("sample {} {} {} {} {} {}\n", s.id, s.gesture, s.emotion, subject, s.len(), s.d_x()));
        push_matrix(&mut out, &s.frames);
    }
    write_file(path, &out)
}

pub fn read_dataset(path: &Path) -> Result<DatasetFile> {
    let text = read_file(path)?;
    let mut r = LineReader::new(path, &text);
    r.expect_magic(DATASET_MAGIC)?;
    let d_x: usize = r.keyed_one("d_x")?;
    let attribute_dims: usize = r.keyed_one("attribute_dims")?;
    let classes: usize = r.keyed_one("classes")?;
    let mut emotion_of = BTreeMap::new();
    for _ in 0..classes {
        let f = r.keyed("class")?;
        if f.len() != 3 || f[1] != "emotion" {
            return Err(r.error("expected `class <id> emotion <id>`"));
        }
        let g: usize = r.parse(f[0], "class id")?;
        let e: usize = r.parse(f[2], "emotion id")?;
        if emotion_of.insert(g, e).is_some() {
            return Err(r.error(format!("class {g} listed twice")));
        }
    }
    let count: usize = r.keyed_one("samples")?;
    let mut samples = Vec::with_capacity(count);
    let mut ids = BTreeSet::new();
    for _ in 0..count {
        let f = r.keyed("sample")?;
        if f.len() != 6 {
            return Err(r.error("expected `sample <id> <gesture> <emotion> <subject> <frames> <d_x>`"));
        }
        let line = r.line_no();
        let id = f[0].to_string();
        let gesture: usize = r.parse(f[1], "gesture id")?;
        let emotion: usize = r.parse(f[2], "emotion id")?;
        let subject = (f[3] != "-").then(|| f[3].to_string());
        let len: usize = r.parse(f[4], "frame count")?;
        let width: usize = r.parse(f[5], "frame width")?;
        let at = |m: String| GzslError::malformed(path, line, m);
        if width != d_x {
            return Err(at(format!("sample {id} has width {width}, dataset d_x is {d_x}")));
        }
        if len == 0 {
            return Err(at(format!("sample {id} has no frames")));
        }
        match emotion_of.get(&gesture) {
            None => return Err(at(format!("sample {id}: unknown gesture class {gesture}"))),
            Some(&e) if e != emotion => {
                return Err(at(format!("sample {id}: gesture {gesture} maps to emotion {e}, not {emotion}")))
            }
            _ => {}
        }
        if !ids.insert(id.clone()) {
            return Err(at(format!("duplicate sample id {id}")));
        }
        let frames = r.matrix(len, width)?;
        samples.push(SkeletonSequence::new(id, frames, gesture, emotion, subject)?);
    }
    if !r.at_end() {
        r.next_line()?;
        return Err(r.error("trailing content after the last sample"));
    }
    Ok(DatasetFile { d_x, attribute_dims, emotion_of, samples })
}

pub fn write_attributes(path: &Path, a: &AttributeMatrix) -> Result<()> {
    let mut out = String::new();
    out.push_str(ATTRIBUTES_MAGIC);
    out.push('\n');
    out.push_str(&format!("dims {}\n", a.dim()));
    let kinds: Vec<char> = a.kinds().iter().map(|k| k.code()).collect();
    push_list(&mut out, "kinds", &kinds);
    for n in a.names() {
        check_token(n, "attribute name")?;
    }
    push_list(&mut out, "names", a.names());
    out.push_str(&format!("classes {}\n", a.class_ids().len()));
    for (i, c) in a.class_ids().iter().enumerate() {
        out.push_str(&format!("class {c} "));
        push_row(&mut out, a.values().row(i));
    }
    write_file(path, &out)
}

pub fn read_attributes(path: &Path) -> Result<AttributeMatrix> {
    let text = read_file(path)?;
    let mut r = LineReader::new(path, &text);
    r.expect_magic(ATTRIBUTES_MAGIC)?;
    let dims: usize = r.keyed_one("dims")?;
    let kinds = r
        .keyed("kinds")?
        .iter()
        .map(|k| AttributeKind::from_code(k).ok_or_else(|| r.error(format!("unknown attribute kind {k:?}"))))
        .collect::<Result<Vec<_>>>()?;
    let names: Vec<String> = r.keyed("names")?.iter().map(|s| s.to_string()).collect();
    if kinds.len() != dims || names.len() != dims {
        return Err(r.error(format!("expected {dims} kinds and names")));
    }
    let classes: usize = r.keyed_one("classes")?;
    let mut ids = Vec::with_capacity(classes);
    let mut data = Vec::with_capacity(classes * dims);
    for _ in 0..classes {
        let f = r.keyed("class")?;
        if f.len() != dims + 1 {
            return Err(r.error(format!("expected a class id and {dims} values")));
        }
        ids.push(r.parse::<usize>(f[0], "class id")?);
        for x in &f[1..] {
            let v: f64 = r.parse(x, "attribute value")?;
            if !v.is_finite() {
                return Err(r.error("non-finite attribute value"));
            }
            data.push(v);
        }
    }
    let values = Matrix::from_vec(classes, dims, data)?;
    Ok(AttributeMatrix::new(ids, names, kinds, values)?)
}

/// Contents of a partition file: the split plus the training sample ids.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionFile {
    pub partition: PartitionSpec,
    pub train_ids: Vec<String>,
}

pub fn write_partition(path: &Path, p: &PartitionFile) -> Result<()> {
    let mut out = String::new();
    out.push_str(PARTITION_MAGIC);
    out.push('\n');
    push_list(&mut out, "seen", p.partition.seen());
    push_list(&mut out, "unseen", p.partition.unseen());
    out.push_str(&format!("classes {}\n", p.partition.emotion_map().len()));
    for (g, e) in p.partition.emotion_map() {
        out.push_str(&format!("class {g} emotion {e}\n"));
    }
    out.push_str(&format!("train {}\n", p.train_ids.len()));
    for id in &p.train_ids {
        check_token(id, "sample id")?;
        out.push_str(id);
        out.push('\n');
    }
    write_file(path, &out)
}

pub fn read_partition(path: &Path) -> Result<PartitionFile> {
    let text = read_file(path)?;
    let mut r = LineReader::new(path, &text);
    r.expect_magic(PARTITION_MAGIC)?;
    let seen: Vec<usize> = r.keyed_list("seen")?;
    let unseen: Vec<usize> = r.keyed_list("unseen")?;
    let classes: usize = r.keyed_one("classes")?;
    let mut emotion_of = BTreeMap::new();
    for _ in 0..classes {
        let f = r.keyed("class")?;
        if f.len() != 3 || f[1] != "emotion" {
            return Err(r.error("expected `class <id> emotion <id>`"));
        }
        emotion_of.insert(r.parse::<usize>(f[0], "class id")?, r.parse::<usize>(f[2], "emotion id")?);
    }
    let partition = PartitionSpec::new(seen, unseen, emotion_of)?;
    let n: usize = r.keyed_one("train")?;
    let mut train_ids = Vec::with_capacity(n);
    for _ in 0..n {
        let id = r.next_line()?.trim();
        if id.is_empty() || id.contains(char::is_whitespace) {
            return Err(r.error("expected one sample id per line"));
        }
        train_ids.push(id.to_string());
    }
    Ok(PartitionFile { partition, train_ids })
}

/// Loads a dataset and splits it: samples listed in the partition's train
/// list form the training set, every other sample the test set.
pub fn load_dataset(
    dataset_path: &Path,
    partition_path: &Path,
) -> Result<(Vec<SkeletonSequence>, Vec<SkeletonSequence>, PartitionSpec)> {
    let data = read_dataset(dataset_path)?;
    let part = read_partition(partition_path)?;
    let spec = part.partition;
    for (g, e) in &data.emotion_of {
        match spec.emotion_map().get(g) {
            Some(pe) if pe == e => {}
            Some(pe) => {
                return Err(gzsl_core::Error::InvalidPartition(format!(
                    "class {g} maps to emotion {e} in the dataset but {pe} in the partition"
                ))
                .into())
            }
            None => return Err(gzsl_core::Error::UnknownClassId { class: *g }.into()),
        }
    }
    for s in &data.samples {
        spec.check_sample(s)?;
    }
    let mut wanted: BTreeSet<&str> = part.train_ids.iter().map(String::as_str).collect();
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for s in data.samples {
        if wanted.remove(s.id.as_str()) {
            if !spec.is_seen(s.gesture) {
                return Err(GzslError::UnseenInTrain { sample: s.id, class: s.gesture });
            }
            train.push(s);
        } else {
            test.push(s);
        }
    }
    if let Some(missing) = wanted.into_iter().next() {
        // magic, seen, unseen, classes, class lines, train header, then ids
        let idx = part.train_ids.iter().position(|id| id == missing).unwrap_or(0);
        let line = 5 + spec.emotion_map().len() + idx + 1;
        return Err(GzslError::malformed(partition_path, line, format!("train id {missing} is not in the dataset")));
    }
    Ok((train, test, spec))
}
