use gzsl::gzsl_core::model::{Architecture, Framework};
use gzsl::gzsl_core::nn::params::Group;
use gzsl::gzsl_core::trainer::{train, EpochRecord, TrainConfig};
use gzsl::synth::{generate_synthetic, SynthData, SynthSpec};

fn tiny_data() -> (SynthSpec, SynthData) {
    let spec = SynthSpec {
        emotions: 3,
        gestures_per_emotion: 2,
        unseen_per_emotion: 1,
        joints: 4,
        train_per_class: 10,
        test_per_class: 2,
        min_len: 4,
        max_len: 6,
        ..SynthSpec::default()
    };
    let data = generate_synthetic(&spec).unwrap();
    (spec, data)
}

fn small_arch(d_x: usize) -> Architecture {
    Architecture {
        d_x,
        heads: 3,
        lstm_hidden: 6,
        lstm_layers: 2,
        pbd_hidden: 8,
        proto_dim: 4,
        emotion_hidden: 6,
        ..Architecture::default()
    }
}

fn framework(spec: &SynthSpec, data: &SynthData, config: &TrainConfig) -> Framework {
    Framework::new(small_arch(spec.d_x()), &data.partition, &data.attributes, config.stae, 5).unwrap()
}

fn run(fw: &mut Framework, data: &SynthData, config: &TrainConfig) -> Vec<EpochRecord> {
    train(fw, &data.train, config, None, |_| {}).unwrap().log
}

fn base_config(epochs: usize) -> TrainConfig {
    TrainConfig { epochs, seed: 3, ..TrainConfig::partition1() }
}

#[test]
fn zero_rates_leave_parameters_unchanged() {
    let (spec, data) = tiny_data();
    let mut config = base_config(1);
    config.init_encoder = false;
    config.rates.shared = 0.0;
    config.rates.pbd = 0.0;
    config.rates.stae = 0.0;
    config.rates.emotion = 0.0;
    let mut fw = framework(&spec, &data, &config);
    let before = fw.store.clone();
    run(&mut fw, &data, &config);
    assert_eq!(fw.store, before);
}

#[test]
fn training_is_deterministic_under_a_seed() {
    let (spec, data) = tiny_data();
    let config = base_config(3);
    let mut a = framework(&spec, &data, &config);
    let mut b = framework(&spec, &data, &config);
    let la = run(&mut a, &data, &config);
    let lb = run(&mut b, &data, &config);
    assert_eq!(la, lb);
    assert_eq!(a.store, b.store);
    let mut c = framework(&spec, &data, &config);
    run(&mut c, &data, &TrainConfig { seed: 4, ..config });
    assert_ne!(c.store, a.store);
}

#[test]
fn frozen_autoencoder_group_keeps_the_encoder() {
    let (spec, data) = tiny_data();
    let mut config = base_config(1);
    config.init_encoder = false;
    config.rates.stae = 0.0;
    let mut fw = framework(&spec, &data, &config);
    let before = fw.store.clone();
    run(&mut fw, &data, &config);
    assert_eq!(fw.encoder(), before.get(fw.stae.u));
    for group in [Group::Shared, Group::Pbd, Group::Emotion] {
        let moved = fw.store.ids().filter(|&id| fw.store.entry(id).group == group).any(|id| fw.store.get(id) != before.get(id));
        assert!(moved, "{group} did not move");
    }
}

#[test]
fn thresholds_wait_for_the_warmup_epoch() {
    let (spec, data) = tiny_data();
    let mut config = base_config(4);
    config.threshold_warmup_epoch = Some(3);
    let mut fw = framework(&spec, &data, &config);
    let initial = fw.thresholds();
    let before_warmup = TrainConfig { epochs: 2, ..config.clone() };
    run(&mut fw, &data, &before_warmup);
    assert_eq!(fw.thresholds(), initial);

    let mut fw = framework(&spec, &data, &config);
    run(&mut fw, &data, &config);
    assert_ne!(fw.thresholds(), initial);
}

#[test]
fn losses_stay_finite_and_decrease() {
    let (spec, data) = tiny_data();
    // threshold terms stay off so the curve reflects the learnable losses
    let mut config = base_config(30);
    config.threshold_warmup_epoch = Some(31);
    config.rates.shared = 3e-3;
    config.rates.pbd = 3e-3;
    config.rates.emotion = 3e-3;
    let mut fw = Framework::new(
        Architecture { d_x: spec.d_x(), ..Architecture::default() },
        &data.partition,
        &data.attributes,
        config.stae,
        5,
    )
    .unwrap();
    let log = run(&mut fw, &data, &config);
    assert!(log.iter().all(|r| [r.l_pbd, r.l_stae, r.l_em, r.total].iter().all(|x| x.is_finite())));
    let first = log[0].total;
    let last = log.last().unwrap().total;
    assert!(last <= 0.5 * first, "total loss {first} -> {last}");
}
