use std::path::Path;

use gzsl_core::features::Pooling;
use gzsl_core::model::{Architecture, ClassSpace, Framework};
use gzsl_core::nn::Group;
use gzsl_core::stae::StaeGammas;

use super::{fmt_f64, push_list, push_matrix, read_file, write_file, LineReader};
use crate::error::{GzslError, Result};

pub const CHECKPOINT_MAGIC: &str = "gzsl-ckpt-v1";

/// Writes the architecture, class space, semantic matrices and every
/// parameter in registration order.
pub fn write_checkpoint(path: &Path, fw: &Framework) -> Result<()> {
    let a = &fw.arch;
    let mut out = String::new();
    out.push_str(CHECKPOINT_MAGIC);
    out.push('\n');
    out.push_str(&format!(
        "d_x {}\nheads {}\nlstm_hidden {}\nlstm_layers {}\npooling {}\npbd_hidden {}\nproto_dim {}\nemotion_hidden {}\n",
        a.d_x,
        a.heads,
        a.lstm_hidden,
        a.lstm_layers,
        a.pooling.name(),
        a.pbd_hidden,
        a.proto_dim,
        a.emotion_hidden
    ));
    out.push_str(&format!("initial_threshold {}\n", fmt_f64(a.initial_threshold)));
    out.push_str(&format!("dce_gamma {}\n", fmt_f64(fw.pbd.gamma)));
    let g = fw.stae.gammas;
    out.push_str(&format!("stae_gammas {} {} {}\n", fmt_f64(g.gamma1), fmt_f64(g.gamma2), fmt_f64(g.gamma3)));
    out.push_str(&format!("neighbors {} {}\n", fw.stae.q, fw.stae.r));
    out.push_str(&format!("emotions {}\n", fw.classes.emotions));
    push_list(&mut out, "seen_classes", &fw.classes.seen);
    push_list(&mut out, "seen_emotions", &fw.classes.seen_emotion);
    push_list(&mut out, "unseen_classes", &fw.classes.unseen);
    push_list(&mut out, "unseen_emotions", &fw.classes.unseen_emotion);
    for (name, m) in [("a_seen", &fw.stae.a_seen), ("a_unseen", &fw.stae.a_unseen)] {
        out.push_str(&format!("matrix {name} {} {}\n", m.rows(), m.cols()));
        push_matrix(&mut out, m);
    }
    out.push_str(&format!("params {}\n", fw.store.len()));
    for (_, e) in fw.store.iter() {
        out.push_str(&format!("param {} {} {} {}\n", e.name, e.group, e.value.rows(), e.value.cols()));
        push_matrix(&mut out, &e.value);
    }
    write_file(path, &out)
}

pub fn read_checkpoint(path: &Path) -> Result<Framework> {
    if !path.is_file() {
        return Err(GzslError::ModelNotLoaded(path.to_path_buf()));
    }
    let text = read_file(path)?;
    let mut r = LineReader::new(path, &text);
    r.expect_magic(CHECKPOINT_MAGIC)?;
    let d_x = r.keyed_one("d_x")?;
    let heads = r.keyed_one("heads")?;
    let lstm_hidden = r.keyed_one("lstm_hidden")?;
    let lstm_layers = r.keyed_one("lstm_layers")?;
    let pooling_name: String = r.keyed_one("pooling")?;
    let pooling = Pooling::from_name(&pooling_name).ok_or_else(|| r.error(format!("unknown pooling {pooling_name}")))?;
    let pbd_hidden = r.keyed_one("pbd_hidden")?;
    let proto_dim = r.keyed_one("proto_dim")?;
    let emotion_hidden = r.keyed_one("emotion_hidden")?;
    let initial_threshold = r.keyed_one("initial_threshold")?;
    let arch = Architecture {
        d_x,
        heads,
        lstm_hidden,
        lstm_layers,
        pooling,
        pbd_hidden,
        proto_dim,
        emotion_hidden,
        initial_threshold,
    };
    let dce_gamma: f64 = r.keyed_one("dce_gamma")?;
    let g: Vec<f64> = r.keyed_list("stae_gammas")?;
    if g.len() != 3 {
        return Err(r.error("stae_gammas takes three values"));
    }
    let gammas = StaeGammas { gamma1: g[0], gamma2: g[1], gamma3: g[2] };
    let qr: Vec<usize> = r.keyed_list("neighbors")?;
    if qr.len() != 2 {
        return Err(r.error("neighbors takes two values"));
    }
    let emotions = r.keyed_one("emotions")?;
    let classes = ClassSpace {
        seen: r.keyed_list("seen_classes")?,
        seen_emotion: r.keyed_list("seen_emotions")?,
        unseen: r.keyed_list("unseen_classes")?,
        unseen_emotion: r.keyed_list("unseen_emotions")?,
        emotions,
    };
    if classes.seen.len() != classes.seen_emotion.len() || classes.unseen.len() != classes.unseen_emotion.len() {
        return Err(r.error("class and emotion lists differ in length"));
    }
    if classes.seen_emotion.iter().chain(&classes.unseen_emotion).any(|&e| e >= emotions) {
        return Err(r.error("emotion id out of range"));
    }
    let mut semantic = Vec::new();
    for name in ["a_seen", "a_unseen"] {
        let f = r.keyed("matrix")?;
        if f.len() != 3 || f[0] != name {
            return Err(r.error(format!("expected `matrix {name} <rows> <cols>`")));
        }
        let (rows, cols) = (r.parse(f[1], "rows")?, r.parse(f[2], "cols")?);
        semantic.push(r.matrix(rows, cols)?);
    }
    let a_unseen = semantic.pop().expect("two matrices");
    let a_seen = semantic.pop().expect("two matrices");

    let mut fw = Framework::with_semantics(arch, classes, a_seen, a_unseen, gammas, 0)?;
    fw.pbd.gamma = dce_gamma;
    fw.stae.q = qr[0];
    fw.stae.r = qr[1];

    let count: usize = r.keyed_one("params")?;
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        let f = r.keyed("param")?;
        if f.len() != 4 {
            return Err(r.error("expected `param <name> <group> <rows> <cols>`"));
        }
        let name = f[0].to_string();
        let group = Group::from_name(f[1]).ok_or_else(|| r.error(format!("unknown group {}", f[1])))?;
        let registered = fw
            .store
            .find(&name)
            .ok_or_else(|| r.error(format!("unknown parameter {name}")))?;
        if fw.store.entry(registered).group != group {
            return Err(r.error(format!("parameter {name} belongs to group {}", fw.store.entry(registered).group)));
        }
        let (rows, cols) = (r.parse(f[2], "rows")?, r.parse(f[3], "cols")?);
        if fw.store.get(registered).shape() != (rows, cols) {
            return Err(r.error(format!("parameter {name} has the wrong shape {rows}x{cols}")));
        }
        values.push((name, r.matrix(rows, cols)?));
    }
    fw.load_params(values)?;
    Ok(fw)
}
