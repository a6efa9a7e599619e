use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use gzsl::format::{
    load_dataset, read_attributes, read_checkpoint, read_dataset, read_partition, write_attributes, write_checkpoint,
    write_dataset, write_partition, DatasetFile, PartitionFile,
};
use gzsl::gzsl_core::data::{masr_emotion_map, masr_partition, AttributeKind, AttributeMatrix, PartitionSpec, SkeletonSequence};
use gzsl::gzsl_core::model::{Architecture, Framework};
use gzsl::gzsl_core::pipeline::predict_batch;
use gzsl::gzsl_core::stae::{InferenceMode, StaeGammas};
use gzsl::gzsl_core::Matrix;
use gzsl::synth::{generate_synthetic, SynthSpec};
use gzsl::GzslError;
use tempfile::TempDir;

fn small_spec() -> SynthSpec {
    SynthSpec { joints: 3, train_per_class: 2, test_per_class: 1, min_len: 3, max_len: 4, ..SynthSpec::default() }
}

fn dataset_of(spec: &SynthSpec) -> (DatasetFile, PartitionFile, AttributeMatrix) {
    let data = generate_synthetic(spec).unwrap();
    let file = DatasetFile {
        d_x: spec.d_x(),
        attribute_dims: spec.d_s(),
        emotion_of: data.partition.emotion_map().clone(),
        samples: data.train.iter().chain(&data.test).cloned().collect(),
    };
    let part = PartitionFile { partition: data.partition.clone(), train_ids: data.train.iter().map(|s| s.id.clone()).collect() };
    (file, part, data.attributes)
}

fn malformed_line(e: GzslError) -> usize {
    match e {
        GzslError::MalformedFile { line, .. } => line,
        other => panic!("expected a malformed-file error, got {other:?}"),
    }
}

fn replace_line(path: &Path, line: usize, text: &str) {
    let body = fs::read_to_string(path).unwrap();
    let mut lines: Vec<&str> = body.lines().collect();
    lines[line - 1] = text;
    fs::write(path, lines.join("\n") + "\n").unwrap();
}

#[test]
fn dataset_round_trip_is_byte_stable() {
    let dir = TempDir::new().unwrap();
    let (file, _, _) = dataset_of(&small_spec());
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    write_dataset(&a, &file).unwrap();
    let back = read_dataset(&a).unwrap();
    assert_eq!(back, file);
    write_dataset(&b, &back).unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn attributes_and_partition_round_trip() {
    let dir = TempDir::new().unwrap();
    let (_, part, attrs) = dataset_of(&small_spec());
    let ap = dir.path().join("attributes.txt");
    let pp = dir.path().join("partition.txt");
    write_attributes(&ap, &attrs).unwrap();
    write_partition(&pp, &part).unwrap();
    assert_eq!(read_attributes(&ap).unwrap(), attrs);
    assert_eq!(read_partition(&pp).unwrap(), part);
    let again = dir.path().join("again.txt");
    write_attributes(&again, &read_attributes(&ap).unwrap()).unwrap();
    assert_eq!(fs::read(&ap).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn extreme_values_survive_the_text_format() {
    let dir = TempDir::new().unwrap();
    let frames = Matrix::from_rows(&[[0.1, -1e-300, 1e300], [f64::MIN_POSITIVE, 1.0 / 3.0, -0.0]]);
    let seq = SkeletonSequence::new("x", frames.clone(), 0, 0, Some("s1".to_string())).unwrap();
    let file = DatasetFile { d_x: 3, attribute_dims: 1, emotion_of: BTreeMap::from([(0, 0)]), samples: vec![seq] };
    let p = dir.path().join("d.txt");
    write_dataset(&p, &file).unwrap();
    let back = read_dataset(&p).unwrap();
    let got = &back.samples[0].frames;
    for (x, y) in got.as_slice().iter().zip(frames.as_slice()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

#[test]
fn malformed_value_reports_its_line() {
    let dir = TempDir::new().unwrap();
    let (file, _, _) = dataset_of(&small_spec());
    let p = dir.path().join("d.txt");
    write_dataset(&p, &file).unwrap();
    let body = fs::read_to_string(&p).unwrap();
    let target = body.lines().position(|l| l.starts_with("sample ")).unwrap() + 2;
    let width = file.d_x;
    let bad = vec!["1.0"; width - 1].join(" ") + " nope";
    replace_line(&p, target, &bad);
    assert_eq!(malformed_line(read_dataset(&p).unwrap_err()), target);
}

#[test]
fn wrong_magic_is_rejected_on_line_one() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("d.txt");
    fs::write(&p, "not-a-dataset\n").unwrap();
    assert_eq!(malformed_line(read_dataset(&p).unwrap_err()), 1);
    assert_eq!(malformed_line(read_attributes(&p).unwrap_err()), 1);
    assert_eq!(malformed_line(read_partition(&p).unwrap_err()), 1);
    assert!(matches!(read_dataset(&dir.path().join("missing.txt")), Err(GzslError::Io { .. })));
}

#[test]
fn truncated_dataset_is_rejected() {
    let dir = TempDir::new().unwrap();
    let (file, _, _) = dataset_of(&small_spec());
    let p = dir.path().join("d.txt");
    write_dataset(&p, &file).unwrap();
    let body = fs::read_to_string(&p).unwrap();
    let kept: Vec<&str> = body.lines().collect();
    fs::write(&p, kept[..kept.len() - 1].join("\n") + "\n").unwrap();
    assert!(matches!(read_dataset(&p), Err(GzslError::MalformedFile { .. })));
}

#[test]
fn unseen_sample_in_train_list_is_rejected() {
    let dir = TempDir::new().unwrap();
    let (file, mut part, _) = dataset_of(&small_spec());
    let unseen_id = file.samples.iter().find(|s| part.partition.is_unseen(s.gesture)).unwrap().id.clone();
    part.train_ids.push(unseen_id);
    let dp = dir.path().join("d.txt");
    let pp = dir.path().join("p.txt");
    write_dataset(&dp, &file).unwrap();
    write_partition(&pp, &part).unwrap();
    assert!(matches!(load_dataset(&dp, &pp), Err(GzslError::UnseenInTrain { .. })));
}

#[test]
fn load_splits_by_train_list() {
    let dir = TempDir::new().unwrap();
    let (file, part, _) = dataset_of(&small_spec());
    let dp = dir.path().join("d.txt");
    let pp = dir.path().join("p.txt");
    write_dataset(&dp, &file).unwrap();
    write_partition(&pp, &part).unwrap();
    let (train, test, spec) = load_dataset(&dp, &pp).unwrap();
    assert_eq!(spec, part.partition);
    assert_eq!(train.iter().map(|s| s.id.clone()).collect::<Vec<_>>(), part.train_ids);
    assert_eq!(train.len() + test.len(), file.samples.len());
    assert!(train.iter().all(|s| spec.is_seen(s.gesture)));
}

#[test]
fn missing_class_and_out_of_range_attributes() {
    let dir = TempDir::new().unwrap();
    let (_, part, attrs) = dataset_of(&small_spec());
    let p = dir.path().join("a.txt");
    write_attributes(&p, &attrs).unwrap();
    let body = fs::read_to_string(&p).unwrap();
    let class_line = body.lines().position(|l| l.starts_with("class ")).unwrap() + 1;

    // binary attribute set to 0.5
    let fields: Vec<String> = body.lines().nth(class_line - 1).unwrap().split(' ').map(String::from).collect();
    let binary = attrs.kinds().iter().position(|k| *k == AttributeKind::Binary).unwrap();
    let mut bad = fields.clone();
    bad[2 + binary] = "0.5".into();
    replace_line(&p, class_line, &bad.join(" "));
    let err = read_attributes(&p).unwrap_err();
    assert!(matches!(err, GzslError::Core(gzsl::gzsl_core::Error::OutOfRangeAttribute { .. })), "{err:?}");

    // a partition class without attributes
    let ids: Vec<usize> = attrs.class_ids()[1..].to_vec();
    let rows = Matrix::from_fn(ids.len(), attrs.dim(), |i, j| attrs.values().get(i + 1, j));
    let partial = AttributeMatrix::new(ids, attrs.names().to_vec(), attrs.kinds().to_vec(), rows).unwrap();
    let gammas = StaeGammas { gamma1: 0.1, gamma2: 0.0, gamma3: 0.0 };
    let arch = Architecture { d_x: 9, ..Architecture::default() };
    let err = Framework::new(arch, &part.partition, &partial, gammas, 0).unwrap_err();
    assert!(matches!(err, gzsl::gzsl_core::Error::MissingClass { class: 0 }), "{err:?}");
}

#[test]
fn first_benchmark_partition_holds_out_two_gestures_per_emotion() {
    let p = masr_partition(1).unwrap();
    let map = masr_emotion_map();
    assert_eq!(p.emotion_map(), &map);
    for e in 0..p.emotion_count() {
        assert_eq!(p.unseen().iter().filter(|&&g| map[&g] == e).count(), 2);
    }
    let second: PartitionSpec = masr_partition(2).unwrap();
    let angry = map[&second.unseen()[0]];
    assert!(second.unseen().iter().all(|g| map[g] == angry));
    assert!(second.seen().iter().all(|g| map[g] != angry));
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let dir = TempDir::new().unwrap();
    let spec = small_spec();
    let data = generate_synthetic(&spec).unwrap();
    let arch = Architecture {
        d_x: spec.d_x(),
        heads: 3,
        lstm_hidden: 4,
        lstm_layers: 2,
        pbd_hidden: 5,
        proto_dim: 3,
        emotion_hidden: 4,
        initial_threshold: 1e-4,
        ..Architecture::default()
    };
    let gammas = StaeGammas { gamma1: 0.01, gamma2: 1e-3, gamma3: 0.1 };
    let fw = Framework::new(arch, &data.partition, &data.attributes, gammas, 9).unwrap();
    let p = dir.path().join("model.ckpt");
    write_checkpoint(&p, &fw).unwrap();
    let back = read_checkpoint(&p).unwrap();
    assert_eq!(back.store, fw.store);
    assert_eq!(back.classes, fw.classes);
    assert_eq!(back.stae.a_unseen, fw.stae.a_unseen);
    for mode in [InferenceMode::Transductive, InferenceMode::PerSample] {
        assert_eq!(predict_batch(&back, &data.test, mode).unwrap(), predict_batch(&fw, &data.test, mode).unwrap());
    }
    let again = dir.path().join("again.ckpt");
    write_checkpoint(&again, &back).unwrap();
    assert_eq!(fs::read(&p).unwrap(), fs::read(&again).unwrap());
    assert!(matches!(read_checkpoint(&dir.path().join("none")), Err(GzslError::ModelNotLoaded(_))));
}
