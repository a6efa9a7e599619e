//! Seeded verification suites shared by the integration tests and the
//! acceptance report. Each returns raw measurements; callers decide.

use gzsl_core::features::{multi_head_self_attention, BranchAttentionParams, FeatureExtractor, Pooling, SelfAttentionParams};
use gzsl_core::graph::{knn_cosine_graph, Axis};
use gzsl_core::linalg::solve_sylvester;
use gzsl_core::model::{Architecture, ClassSpace, Framework};
use gzsl_core::nn::init::Initializer;
use gzsl_core::nn::layers::{blstm_stack, BlstmLayer};
use gzsl_core::nn::params::{Group, ParamStore};
use gzsl_core::pbd::{
    dce_loss, dce_loss_var, gate, prototype_loss, prototype_loss_var, threshold_loss1_var, threshold_loss2_var,
    threshold_losses, PrototypeModel, Verdict,
};
use gzsl_core::stae::{stae_infer, stae_loss_vars, InferenceMode, StaeGammas};
use gzsl_core::trainer::{batch_loss_vars, emotion_loss_var, EmotionHead, TrainConfig, TrainSample};
use gzsl_core::Matrix;
use rand::seq::SliceRandom;
use rand::Rng;

use super::{gradient_check, random_labels, random_laplacian, random_matrix, random_spd, rng, weighted_sum};

/// Worst finite-difference relative error per trainable path.
pub fn gradient_suite(seed: u64) -> Vec<(&'static str, f64)> {
    let mut out = Vec::new();
    let mut r = rng(seed);

    {
        let mut store = ParamStore::default();
        let mut init = Initializer::new(seed);
        let attn = SelfAttentionParams::register(&mut store, &mut init, "attn", 4, 2);
        let x = store.add("x", Group::Shared, random_matrix(&mut r, 4, 3, 1.0));
        let w = random_matrix(&mut r, 4, 3, 1.0);
        let ids: Vec<_> = store.ids().collect();
        let e = gradient_check(&mut store, &ids, |t| {
            let xv = t.param(x);
            let y = attn.forward(t, xv).unwrap();
            weighted_sum(t, y, &w)
        });
        out.push(("self-attention", e));
    }
    {
        let mut store = ParamStore::default();
        let mut init = Initializer::new(seed);
        let layers = vec![
            BlstmLayer::register(&mut store, &mut init, "l0", Group::Shared, 3, 3),
            BlstmLayer::register(&mut store, &mut init, "l1", Group::Shared, 6, 3),
        ];
        let x = store.add("x", Group::Shared, random_matrix(&mut r, 3, 4, 1.0));
        let w = random_matrix(&mut r, 6, 4, 1.0);
        let ids: Vec<_> = store.ids().collect();
        let e = gradient_check(&mut store, &ids, |t| {
            let xv = t.param(x);
            let y = blstm_stack(t, &layers, xv).unwrap().sequence;
            weighted_sum(t, y, &w)
        });
        out.push(("blstm", e));
    }
    for (name, pooling) in [("extractor last-first", Pooling::LastFirst), ("extractor mean", Pooling::Mean)] {
        let mut store = ParamStore::default();
        let mut init = Initializer::new(seed);
        let ex = FeatureExtractor::register(&mut store, &mut init, 3, 2, 2, 2, pooling);
        let x = store.add("x", Group::Shared, random_matrix(&mut r, 3, 5, 1.0));
        let w = random_matrix(&mut r, 4, 1, 1.0);
        let ids: Vec<_> = store.ids().collect();
        let e = gradient_check(&mut store, &ids, |t| {
            let xv = t.param(x);
            let f = ex.extract(t, xv).unwrap();
            weighted_sum(t, f, &w)
        });
        out.push((name, e));
    }
    {
        let mut store = ParamStore::default();
        let mut init = Initializer::new(seed);
        let ba = BranchAttentionParams::register(&mut store, &mut init, "ba", Group::Pbd, 6);
        *store.get_mut(ba.b) = random_matrix(&mut r, 6, 1, 0.5);
        let f = store.add("f", Group::Shared, random_matrix(&mut r, 6, 3, 1.0));
        let w = random_matrix(&mut r, 6, 3, 1.0);
        let ids: Vec<_> = store.ids().collect();
        let e = gradient_check(&mut store, &ids, |t| {
            let fv = t.param(f);
            let y = ba.forward(t, fv);
            weighted_sum(t, y, &w)
        });
        out.push(("branch attention", e));
    }

    // prototype branch: projection, prototypes and thresholds
    let n = 5;
    let labels = random_labels(&mut r, n, 3);
    for which in ["dce", "prototype", "threshold hinge", "threshold penalty"] {
        let mut store = ParamStore::default();
        let mut init = Initializer::new(seed);
        let model = PrototypeModel::register(&mut store, &mut init, 6, 5, 3, 3, 0.0);
        *store.get_mut(model.prototypes) = random_matrix(&mut r, 3, 3, 1.0);
        *store.get_mut(model.thresholds) = Matrix::column(vec![0.05, 0.4, 0.8]);
        let h = store.add("h", Group::Shared, random_matrix(&mut r, 6, n, 1.0));
        let ids: Vec<_> = store.ids().collect();
        let labels = labels.clone();
        let e = gradient_check(&mut store, &ids, |t| {
            let hv = t.param(h);
            let p = model.project(t, hv);
            let d = model.distances(t, p);
            let th = t.param(model.thresholds);
            match which {
                "dce" => dce_loss_var(t, d, &labels, 0.5),
                "prototype" => prototype_loss_var(t, d, &labels),
                "threshold hinge" => threshold_loss1_var(t, d, th),
                _ => threshold_loss2_var(t, th),
            }
        });
        out.push((which, e));
    }
    {
        let mut store = ParamStore::default();
        let a = random_matrix(&mut r, 4, 3, 1.0);
        let u = store.add("u", Group::Stae, random_matrix(&mut r, 6, 4, 0.5));
        let h = store.add("h", Group::Shared, random_matrix(&mut r, 6, 5, 1.0));
        let labels = random_labels(&mut r, 5, 3);
        let ids: Vec<_> = store.ids().collect();
        let e = gradient_check(&mut store, &ids, |t| {
            let (hv, uv) = (t.param(h), t.param(u));
            let terms = stae_loss_vars(t, hv, &labels, uv, &a, 0.3, 2);
            let sem = t.scale(terms.semantic, 0.7);
            let reg = t.scale(terms.feature_reg.unwrap(), 0.3);
            let s = t.add(terms.reconstruction, sem);
            t.add(s, reg)
        });
        out.push(("autoencoder", e));
    }
    {
        let mut store = ParamStore::default();
        let mut init = Initializer::new(seed);
        let head = EmotionHead::register(&mut store, &mut init, 6, 5, 3);
        let h = store.add("h", Group::Shared, random_matrix(&mut r, 6, 4, 1.0));
        let labels = random_labels(&mut r, 4, 3);
        let ids: Vec<_> = store.ids().collect();
        let e = gradient_check(&mut store, &ids, |t| {
            let hv = t.param(h);
            emotion_loss_var(t, &head, hv, &labels)
        });
        out.push(("emotion", e));
    }
    for (name, active) in [("joint total (warmup)", false), ("joint total", true)] {
        let (fw, samples) = tiny_framework(seed, &mut r);
        // move every pre-activation away from the ReLU kink at zero
        let mut store = fw.store.clone();
        for id in fw.store.ids() {
            let (rows, cols) = store.get(id).shape();
            let jitter = random_matrix(&mut r, rows, cols, 0.5);
            store.get_mut(id).add_assign(&jitter);
        }
        *store.get_mut(fw.pbd.thresholds) = Matrix::column(vec![0.0, 0.002, 0.01]);
        let mut config = TrainConfig::partition1();
        config.stae.gamma3 = 0.5;
        config.stae.gamma1 = 0.3;
        let batch: Vec<&TrainSample> = samples.iter().collect();
        let ids: Vec<_> = store.ids().collect();
        let e = gradient_check(&mut store, &ids, |t| batch_loss_vars(t, &fw, &batch, &config, active).unwrap().total);
        out.push((name, e));
    }
    out
}

/// A framework with tiny layers and a few short random training sequences.
pub fn tiny_framework(seed: u64, r: &mut rand_chacha::ChaCha8Rng) -> (Framework, Vec<TrainSample>) {
    let arch = Architecture {
        d_x: 4,
        heads: 2,
        lstm_hidden: 2,
        lstm_layers: 2,
        pooling: Pooling::LastFirst,
        pbd_hidden: 4,
        proto_dim: 3,
        emotion_hidden: 4,
        initial_threshold: 0.0,
    };
    let classes = ClassSpace {
        seen: vec![0, 1, 2],
        unseen: vec![3, 4],
        seen_emotion: vec![0, 1, 0],
        unseen_emotion: vec![1, 0],
        emotions: 2,
    };
    let a_seen = random_matrix(r, 3, 3, 1.0);
    let a_unseen = random_matrix(r, 3, 2, 1.0);
    let gammas = StaeGammas { gamma1: 0.3, gamma2: 1e-4, gamma3: 0.5 };
    let fw = Framework::with_semantics(arch, classes, a_seen, a_unseen, gammas, seed).unwrap();
    let samples = (0..4)
        .map(|i| {
            let label = i % 3;
            let l = 3 + i % 3;
            TrainSample { x: random_matrix(r, 4, l, 1.0), label, emotion: fw.classes.seen_emotion[label] }
        })
        .collect();
    (fw, samples)
}

/// `max ‖AX + XB − C‖_F / (1 + ‖C‖_F)` over random SPD/Laplacian instances.
pub fn sylvester_suite(seed: u64, instances: usize) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let m = r.random_range(1..=20);
        let n = r.random_range(1..=20);
        let floor = r.random_range(1e-3..1.0);
        let a = random_spd(&mut r, m, floor);
        let (density, weight) = (r.random_range(0.1..0.9), r.random_range(0.0..2.0));
        let b = random_laplacian(&mut r, n, density).scale(weight);
        let c = random_matrix(&mut r, m, n, 3.0);
        let x = solve_sylvester(&a, &b, &c).expect("SPD plus PSD pencil is regular");
        let res = a.matmul(&x).add(&x.matmul(&b)).sub(&c).frobenius();
        worst = worst.max(res / (1.0 + c.frobenius()));
    }
    worst
}

fn naive_softmax(v: &[f64]) -> Vec<f64> {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
    Matrix::from_fn(a.rows(), b.cols(), |i, j| (0..a.cols()).map(|k| a.get(i, k) * b.get(k, j)).sum())
}

fn sq_dist(p: &[f64], m: &[f64]) -> f64 {
    m.iter().zip(p).map(|(a, b)| (b - a) * (b - a)).sum()
}

/// Multi-head attention composed from loops over heads, queries and keys.
pub fn naive_multi_head(x: &Matrix, wq: &Matrix, wk: &Matrix, wv: &Matrix, wo: &Matrix, heads: usize) -> Matrix {
    let (d, l) = x.shape();
    let mut concat = Matrix::zeros(heads * d, l);
    for h in 0..heads {
        let pick = |w: &Matrix| naive_matmul(&w.slice_rows(h * d, d), x);
        let (q, k, v) = (pick(wq), pick(wk), pick(wv));
        for a in 0..l {
            let scores: Vec<f64> =
                (0..l).map(|b| (0..d).map(|r| q.get(r, a) * k.get(r, b)).sum::<f64>() / (d as f64).sqrt()).collect();
            let w = naive_softmax(&scores);
            for c in 0..d {
                let val: f64 = (0..l).map(|b| w[b] * v.get(c, b)).sum();
                concat.set(h * d + c, a, val);
            }
        }
    }
    naive_matmul(wo, &concat)
}

/// Exhaustive top-k cosine graph over the given vertex vectors.
pub fn naive_knn_graph(vertices: &[Vec<f64>], k: usize) -> Matrix {
    let n = vertices.len();
    let norm = |v: &Vec<f64>| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let cos = |a: usize, b: usize| {
        let d: f64 = vertices[a].iter().zip(&vertices[b]).map(|(x, y)| x * y).sum();
        d / (norm(&vertices[a]) * norm(&vertices[b]))
    };
    let mut neighbor = vec![vec![false; n]; n];
    for v in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n).filter(|&u| u != v).map(|u| (cos(v, u), u)).collect();
        others.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        for &(_, u) in others.iter().take(k) {
            neighbor[v][u] = true;
        }
    }
    Matrix::from_fn(n, n, |a, b| if a != b && (neighbor[a][b] || neighbor[b][a]) { cos(a, b) } else { 0.0 })
}

/// Gaussian elimination with partial pivoting.
pub fn naive_solve(a: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| a.get(i, j)).chain([b[i]]).collect()).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[x][col].abs().partial_cmp(&m[y][col].abs()).unwrap()).unwrap();
        m.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for j in col..=n {
                m[row][j] -= f * m[col][j];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    x
}

/// Largest absolute deviation from an independent oracle, per component.
pub fn oracle_suite(seed: u64, instances: usize) -> Vec<(&'static str, f64)> {
    let mut r = rng(seed);
    let mut mha: f64 = 0.0;
    let mut pbd: f64 = 0.0;
    let mut graph: f64 = 0.0;
    let mut stae: f64 = 0.0;
    for i in 0..instances {
        // multi-head self-attention
        let d = r.random_range(1..=6);
        let l = r.random_range(1..=5);
        let heads = r.random_range(1..=3);
        let mut store = ParamStore::default();
        let mut init = Initializer::new(seed + i as u64);
        let p = SelfAttentionParams::register(&mut store, &mut init, "a", d, heads);
        let x = random_matrix(&mut r, d, l, 2.0);
        let got = multi_head_self_attention(&store, &p, &x).unwrap();
        let want = naive_multi_head(&x, store.get(p.wq), store.get(p.wk), store.get(p.wv), store.get(p.wo), heads);
        mha = mha.max(got.sub(&want).max_abs());

        // prototype losses
        let c = r.random_range(1..=5);
        let dim = r.random_range(1..=4);
        let n = r.random_range(1..=7);
        let protos = random_matrix(&mut r, c, dim, 1.5);
        let pts = random_matrix(&mut r, dim, n, 1.5);
        let labels = random_labels(&mut r, n, c);
        let th: Vec<f64> = (0..c).map(|_| r.random_range(0.0..3.0)).collect();
        let gamma = r.random_range(0.1..2.0);
        let dist: Vec<Vec<f64>> = (0..n).map(|j| (0..c).map(|k| sq_dist(&pts.col(j), protos.row(k))).collect()).collect();
        let mut dce = 0.0;
        let mut pl = 0.0;
        let mut th1 = 0.0;
        for j in 0..n {
            let z: f64 = dist[j].iter().map(|dk| (-gamma * dk).exp()).sum();
            dce -= ((-gamma * dist[j][labels[j]]).exp() / z).ln();
            pl += dist[j][labels[j]];
            let mut best = 0;
            for k in 1..c {
                if dist[j][k] < dist[j][best] {
                    best = k;
                }
            }
            th1 += (dist[j][best] - th[best]).max(0.0);
        }
        let th2: f64 = th.iter().map(|t| t * t).sum();
        let (g1, g2) = threshold_losses(&pts, &protos, &th).unwrap();
        pbd = pbd
            .max((dce_loss(&pts, &labels, &protos, gamma).unwrap() - dce / n as f64).abs())
            .max((prototype_loss(&pts, &labels, &protos).unwrap() - pl / n as f64).abs())
            .max((g1 - th1 / n as f64).abs())
            .max((g2 - th2).abs());

        // kNN cosine graph over both axes
        let rows = r.random_range(2..=6);
        let cols = r.random_range(2..=7);
        let h = random_matrix(&mut r, rows, cols, 1.0);
        let inst: Vec<Vec<f64>> = (0..cols).map(|j| h.col(j)).collect();
        let feat: Vec<Vec<f64>> = (0..rows).map(|i| h.row(i).to_vec()).collect();
        let ki = r.random_range(1..cols);
        let kf = r.random_range(1..rows.max(2));
        let gi = knn_cosine_graph(&h, ki, Axis::Instances).unwrap();
        graph = graph.max(gi.weights.sub(&naive_knn_graph(&inst, ki)).max_abs());
        if rows >= 2 {
            let gf = knn_cosine_graph(&h, kf, Axis::Features).unwrap();
            graph = graph.max(gf.weights.sub(&naive_knn_graph(&feat, kf)).max_abs());
        }

        // γ₂ = 0 autoencoder inference as independent ridge solves
        let (dh, ds, cu, nt) = (r.random_range(2..=6), r.random_range(2..=5), r.random_range(2..=4), r.random_range(1..=6));
        let u = random_matrix(&mut r, dh, ds, 1.0);
        let au = random_matrix(&mut r, ds, cu, 1.0);
        let hte = random_matrix(&mut r, dh, nt, 1.0);
        let g1 = r.random_range(0.01..1.0);
        let gammas = StaeGammas { gamma1: g1, gamma2: 0.0, gamma3: 0.0 };
        let ua = naive_matmul(&u, &au);
        let a_sy = Matrix::from_fn(cu, cu, |a, b| {
            (0..dh).map(|k| ua.get(k, a) * ua.get(k, b)).sum::<f64>() + if a == b { g1 } else { 0.0 }
        });
        let mode = if i % 2 == 0 { InferenceMode::Transductive } else { InferenceMode::PerSample };
        let got = stae_infer(&hte, &u, &au, gammas, 5, mode).unwrap();
        for j in 0..nt {
            let rhs: Vec<f64> = (0..cu).map(|a| (g1 + 1.0) * (0..dh).map(|k| ua.get(k, a) * hte.get(k, j)).sum::<f64>()).collect();
            let y = naive_solve(&a_sy, &rhs);
            for a in 0..cu {
                stae = stae.max((got.scores.get(a, j) - y[a]).abs());
            }
        }
    }
    vec![
        ("multi-head attention", mha),
        ("prototype losses", pbd),
        ("kNN graph", graph),
        ("autoencoder inference", stae),
    ]
}

/// Direct gate evaluation: nearest prototype by a plain scan, lowest index
/// on ties, seen iff the minimum distance does not exceed its threshold.
pub fn naive_gate(p: &[f64], protos: &Matrix, th: &[f64]) -> (usize, f64, bool) {
    let d: Vec<f64> = (0..protos.rows()).map(|k| sq_dist(p, protos.row(k))).collect();
    let mut best = 0;
    for k in 0..d.len() {
        if d[k] < d[best] {
            best = k;
        }
    }
    let delta = d[best] - th[best];
    (best, delta, delta <= 0.0)
}

/// `(agreements, cases)` of `gate` against the direct evaluation, with
/// duplicated prototypes, on-prototype points and zero margins mixed in.
pub fn gate_suite(seed: u64, cases: usize) -> (usize, usize) {
    let mut r = rng(seed);
    let mut agree = 0;
    for case in 0..cases {
        let c = r.random_range(1..=6);
        let dim = r.random_range(1..=4);
        let mut protos = Matrix::from_fn(c, dim, |_, _| (r.random_range(-4..=4) as f64) * 0.5);
        if c > 1 && case % 3 == 0 {
            let (a, b) = (r.random_range(0..c), r.random_range(0..c));
            let row = protos.row(a).to_vec();
            protos.row_mut(b).copy_from_slice(&row);
        }
        let p: Vec<f64> = match case % 4 {
            0 => protos.row(r.random_range(0..c)).to_vec(),
            1 => (0..dim).map(|_| (r.random_range(-4..=4) as f64) * 0.5).collect(),
            _ => (0..dim).map(|_| r.random_range(-3.0..3.0)).collect(),
        };
        let mut th: Vec<f64> = (0..c).map(|_| r.random_range(0.0..2.0)).collect();
        if case % 5 == 0 {
            let (k, _, _) = naive_gate(&p, &protos, &th);
            th[k] = sq_dist(&p, protos.row(k));
        }
        if case % 7 == 0 {
            th.iter_mut().for_each(|t| *t = 0.0);
        }
        let (k, delta, seen) = naive_gate(&p, &protos, &th);
        let g = gate(&p, &protos, &th);
        let verdict_ok = match g.verdict {
            Verdict::Seen(j) => seen && j == k,
            Verdict::Unseen => !seen,
        };
        if g.nearest == k && g.delta_d == delta && verdict_ok {
            agree += 1;
        }
    }
    (agree, cases)
}

/// Shuffles `v` in place with a seeded generator.
pub fn shuffled<T: Clone>(v: &[T], seed: u64) -> Vec<T> {
    let mut out = v.to_vec();
    out.shuffle(&mut rng(seed));
    out
}
