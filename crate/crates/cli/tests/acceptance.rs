//! Acceptance suite. Each test checks one criterion and prints a single
//! `[PASS]`/`[FAIL]` line before asserting. Run with
//! `cargo test -p longtail-cli --test acceptance -- --nocapture`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use longtail_core::evaluation::{confusion, macro_f1, micro_f1, prf_per_class, ConfusionMatrix};
use longtail_core::gradcheck::{max_rel_error, numeric_grad, FD_STEP};
use longtail_core::layers::{
    gapped_window_shapes, global_maxpool, global_maxpool_backward, maxpool1d, maxpool1d_backward, ConvLayer,
    DenseLayer, GruLayer, Mode, WindowShape,
};
use longtail_core::longtail::{bin, unique_words, uniqueness};
use longtail_core::model::{one_hot, Model, ModelConfig, ModelKind};
use longtail_core::preprocess::ProcessedTweet;
use longtail_core::training::{cross_entropy, kfold_split, train, AdamState, TrainOptions};
use longtail_core::{RngStream, Tensor};

fn report(n: u32, what: &str, ok: bool, detail: &str, elapsed: Duration, budget: Duration) {
    let in_time = elapsed <= budget;
    let status = if ok && in_time { "PASS" } else { "FAIL" };
    println!(
        "[{status}] criterion {n}: {what} ({detail}; {:.2}s of {:.0}s budget)",
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    );
    assert!(ok, "criterion {n} failed: {detail}");
    assert!(in_time, "criterion {n} exceeded its time budget");
}

fn random(rng: &mut RngStream, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    rng.uniform(-1.0, 1.0, n).unwrap().reshape(shape.to_vec()).unwrap()
}

fn bin_path() -> &'static str {
    env!("CARGO_BIN_EXE_longtail")
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data")
}

#[test]
fn criterion_01_window_shapes() {
    let start = Instant::now();
    let names = |i, j| -> Vec<String> {
        gapped_window_shapes(i, j).unwrap().iter().map(ToString::to_string).collect()
    };
    let mut ok = names(1, 4) == ["OXOO", "OOXO"] && names(2, 4) == ["OXXO"] && names(1, 3) == ["OXO"];
    let mut counts_ok = true;
    for j in 2..=8 {
        for i in 1..j {
            counts_ok &= gapped_window_shapes(i, j).unwrap().len() == j - i - 1;
        }
    }
    ok &= counts_ok;
    report(
        1,
        "gapped window enumeration",
        ok,
        &format!("(1,4)={:?} (2,4)={:?} (1,3)={:?}, counts ok={counts_ok}", names(1, 4), names(2, 4), names(1, 3)),
        start.elapsed(),
        Duration::from_secs(1),
    );
}

/// Pre-activation of a dense window of `shape.size()` rows whose kernel rows
/// at gap positions are zero, computed by direct summation.
fn masked_dense_preact(input: &Tensor, shape: &WindowShape, kernel: &Tensor, bias: &Tensor) -> Tensor {
    let (t, d) = (input.rows(), input.cols());
    let f = kernel.shape()[0];
    let a = kernel.shape()[1];
    let j = shape.size();
    // Expand the packed kernel to the full window.
    let mut full = vec![0.0; f * j * d];
    for fi in 0..f {
        let mut packed = 0;
        for k in 0..j {
            if shape.mask()[k] {
                for c in 0..d {
                    full[(fi * j + k) * d + c] = kernel.data()[(fi * a + packed) * d + c];
                }
                packed += 1;
            }
        }
    }
    let out_len = t - j + 1;
    let mut out = Tensor::zeros(&[out_len, f]);
    for p in 0..out_len {
        for fi in 0..f {
            let mut s = bias.data()[fi];
            for k in 0..j {
                for c in 0..d {
                    s += input.get2(p + k, c) * full[(fi * j + k) * d + c];
                }
            }
            out.set2(p, fi, s);
        }
    }
    out
}

fn all_shapes() -> Vec<WindowShape> {
    ["OO", "OOO", "OOOO", "OXO", "OXOO", "OOXO", "OXXO"]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect()
}

#[test]
fn criterion_02_convolution_oracle() {
    let start = Instant::now();
    let mut rng = RngStream::new(2);
    let mut worst = 0.0f64;
    for shape in all_shapes() {
        for _ in 0..100 {
            let (t, d, f) = (12, 6, 4);
            let input = random(&mut rng, &[t, d]);
            let kernel = random(&mut rng, &[f, shape.active_len(), d]);
            let bias = random(&mut rng, &[f]);
            let layer = ConvLayer::new(shape.clone(), kernel.clone(), bias.clone()).unwrap();
            let got = layer.preactivation(&input).unwrap();
            let want = masked_dense_preact(&input, &shape, &kernel, &bias);
            worst = worst.max(got.max_abs_diff(&want));
        }
    }
    report(
        2,
        "gapped convolution equals zero-masked dense convolution",
        worst <= 1e-10,
        &format!("max abs diff {worst:.2e} over 7 shapes x 100 pairs"),
        start.elapsed(),
        Duration::from_secs(5),
    );
}

/// Flattened view helpers for finite differences over a list of tensors.
fn flat(ts: &[&Tensor]) -> Vec<f64> {
    ts.iter().flat_map(|t| t.data().iter().copied()).collect()
}

fn bump(ts: Vec<&mut Tensor>, mut k: usize, h: f64) {
    for t in ts {
        if k < t.len() {
            t.data_mut()[k] += h;
            return;
        }
        k -= t.len();
    }
    panic!("coordinate out of range");
}

fn weighted_sum(out: &Tensor, r: &Tensor) -> f64 {
    out.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

/// Moves pre-activations away from the ReLU kink so central differences
/// never straddle it.
fn jitter_conv(layer: &mut ConvLayer, input: &Tensor) {
    for _ in 0..50 {
        let pre = layer.preactivation(input).unwrap();
        let near: Vec<usize> = (0..pre.len()).filter(|&k| pre.data()[k].abs() < 1e-3).collect();
        if near.is_empty() {
            return;
        }
        for k in near {
            let fi = k % layer.filters();
            layer.bias.data_mut()[fi] += 2e-3;
        }
    }
}

#[test]
fn criterion_03_gradient_suite() {
    let start = Instant::now();
    let mut rng = RngStream::new(3);
    let mut results: Vec<(String, f64)> = Vec::new();

    // Convolutions: parameters and input.
    for shape in all_shapes() {
        let input = random(&mut rng, &[10, 4]);
        let mut layer = ConvLayer::init(shape.clone(), 4, 3, &mut rng);
        layer.bias = random(&mut rng, &[3]);
        jitter_conv(&mut layer, &input);
        let r = random(&mut rng, &[layer.output_len(10).unwrap(), 3]);
        let (_, cache) = layer.forward(&input).unwrap();
        let g = layer.backward(&input, &cache, &r).unwrap();
        let analytic: Vec<f64> = flat(&g.params.iter().collect::<Vec<_>>());
        let numeric = numeric_grad(
            &layer,
            analytic.len(),
            |l, k, h| bump(l.params_mut(), k, h),
            |l| weighted_sum(&l.forward(&input).unwrap().0, &r),
            FD_STEP,
        );
        let mut err = max_rel_error(&analytic, &numeric);
        let numeric_in = numeric_grad(
            &input,
            input.len(),
            |x, k, h| x.data_mut()[k] += h,
            |x| weighted_sum(&layer.forward(x).unwrap().0, &r),
            FD_STEP,
        );
        err = err.max(max_rel_error(g.input.data(), &numeric_in));
        results.push((format!("conv {shape}"), err));
    }

    // Max pooling and global max pooling.
    let x = random(&mut rng, &[13, 3]);
    let (p, cache) = maxpool1d(&x, 4, 4).unwrap();
    let r = random(&mut rng, p.shape());
    let analytic = maxpool1d_backward(&r, &cache).unwrap();
    let numeric = numeric_grad(
        &x,
        x.len(),
        |t, k, h| t.data_mut()[k] += h,
        |t| weighted_sum(&maxpool1d(t, 4, 4).unwrap().0, &r),
        FD_STEP,
    );
    results.push(("maxpool 4/4".into(), max_rel_error(analytic.data(), &numeric)));
    let (p, cache) = global_maxpool(&x).unwrap();
    let r = random(&mut rng, p.shape());
    let analytic = global_maxpool_backward(&r, &cache).unwrap();
    let numeric = numeric_grad(
        &x,
        x.len(),
        |t, k, h| t.data_mut()[k] += h,
        |t| weighted_sum(&global_maxpool(t).unwrap().0, &r),
        FD_STEP,
    );
    results.push(("global maxpool".into(), max_rel_error(analytic.data(), &numeric)));

    // GRU.
    let input = random(&mut rng, &[6, 4]);
    let gru = GruLayer::init(4, 3, &mut rng);
    let (h, cache) = gru.forward(&input).unwrap();
    let r = random(&mut rng, h.shape());
    let g = gru.backward(&input, &cache, &r).unwrap();
    let analytic = flat(&g.params.iter().collect::<Vec<_>>());
    let numeric = numeric_grad(
        &gru,
        analytic.len(),
        |l, k, h| bump(l.params_mut(), k, h),
        |l| weighted_sum(&l.forward(&input).unwrap().0, &r),
        FD_STEP,
    );
    let numeric_in = numeric_grad(
        &input,
        input.len(),
        |x, k, h| x.data_mut()[k] += h,
        |x| weighted_sum(&gru.forward(x).unwrap().0, &r),
        FD_STEP,
    );
    results.push((
        "gru".into(),
        max_rel_error(&analytic, &numeric).max(max_rel_error(g.input.data(), &numeric_in)),
    ));

    // Dense head.
    let input = random(&mut rng, &[7]);
    let dense = DenseLayer::init(7, 3, &mut rng);
    let r = random(&mut rng, &[3]);
    let g = dense.backward(&input, &r).unwrap();
    let analytic = flat(&g.params.iter().collect::<Vec<_>>());
    let numeric = numeric_grad(
        &dense,
        analytic.len(),
        |l, k, h| bump(l.params_mut(), k, h),
        |l| weighted_sum(&l.forward(&input).unwrap(), &r),
        FD_STEP,
    );
    let numeric_in = numeric_grad(
        &input,
        input.len(),
        |x, k, h| x.data_mut()[k] += h,
        |x| weighted_sum(&dense.forward(x).unwrap(), &r),
        FD_STEP,
    );
    results.push((
        "dense".into(),
        max_rel_error(&analytic, &numeric).max(max_rel_error(g.input.data(), &numeric_in)),
    ));

    // End-to-end tiny models, train-mode dropout with a fixed stream.
    for kind in [ModelKind::BaseCnn, ModelKind::CnnGru, ModelKind::CnnScnn] {
        let mut cfg = ModelConfig::new(kind, 3);
        cfg.seq_len = 14;
        cfg.emb_dim = 4;
        cfg.filters = 3;
        cfg.gru_units = 3;
        cfg.trainable_embeddings = true;
        cfg.seed = 5;
        let emb = random(&mut rng, &[12, 4]);
        let model = Model::build(&cfg, emb).unwrap();
        let batch: Vec<Vec<usize>> = (0..3)
            .map(|_| (0..14).map(|_| 1 + (rng.next_u64() % 11) as usize).collect())
            .collect();
        let targets = one_hot(&[0, 2, 1], 3);
        let pass = model.forward_pass(&batch, Mode::Train, &mut RngStream::new(9)).unwrap();
        let grads = model.backward(&pass, &targets).unwrap();
        let analytic: Vec<f64> = grads.iter().flat_map(|(_, t)| t.data().to_vec()).collect();
        let numeric = numeric_grad(
            &model,
            analytic.len(),
            |m, k, h| bump(m.params_mut().into_iter().map(|(_, t)| t).collect(), k, h),
            |m| {
                let p = m.forward(&batch, Mode::Train, &mut RngStream::new(9)).unwrap();
                cross_entropy(&p, &targets).unwrap()
            },
            FD_STEP,
        );
        results.push((format!("model {kind}"), max_rel_error(&analytic, &numeric)));
    }

    let worst = results.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    let failing: Vec<&str> = results
        .iter()
        .filter(|(_, e)| *e > 1e-4)
        .map(|(n, _)| n.as_str())
        .collect();
    report(
        3,
        "finite-difference gradient checks",
        failing.is_empty(),
        &format!("{} checks, worst rel error {worst:.2e}, failing {failing:?}", results.len()),
        start.elapsed(),
        Duration::from_secs(60),
    );
}

#[test]
fn criterion_04_architecture_arithmetic() {
    let start = Instant::now();
    let base = ModelConfig::new(ModelKind::BaseCnn, 3).layout().unwrap();
    let scnn = ModelConfig::new(ModelKind::CnnScnn, 3).layout().unwrap();
    let gru = ModelConfig::new(ModelKind::CnnGru, 3).layout().unwrap();
    let ok = base.conv_lens == [99, 98, 97]
        && base.pooled_lens == [24, 24, 24]
        && base.concat_len == 72
        && base.second_pool_len == Some(18)
        && base.feature_dim == 1800
        && scnn.shapes.len() == 7
        && gru.feature_dim == 100;
    report(
        4,
        "layer length arithmetic at T=100",
        ok,
        &format!(
            "base conv {:?} pooled {:?} concat {} second {:?} flat {}; scnn branches {}; gru vector {}",
            base.conv_lens,
            base.pooled_lens,
            base.concat_len,
            base.second_pool_len,
            base.feature_dim,
            scnn.shapes.len(),
            gru.feature_dim
        ),
        start.elapsed(),
        Duration::from_secs(1),
    );
}

#[test]
fn criterion_05_optimizer_and_loss() {
    let start = Instant::now();
    let mut theta = Tensor::vector(vec![0.0, 0.0]);
    let grads = longtail_core::model::ModelParams::new(vec![("w".into(), Tensor::vector(vec![1.0, 1000.0]))]).unwrap();
    AdamState::new().step(vec![("w".into(), &mut theta)], &grads).unwrap();
    let adam_gap = (theta.data()[0] - theta.data()[1]).abs();
    let uniform = cross_entropy(&Tensor::filled(&[1, 5], 0.2), &one_hot(&[3], 5)).unwrap();
    let closed = cross_entropy(&Tensor::from_rows(&[vec![0.25, 0.75]]), &one_hot(&[1], 2)).unwrap();
    let ok = adam_gap <= 1e-9 && (uniform - 5f64.ln()).abs() <= 1e-12 && (closed - 0.2876821).abs() <= 1e-6;
    report(
        5,
        "Adam first-step scale invariance and cross-entropy closed forms",
        ok,
        &format!("update gap {adam_gap:.1e}, uniform CE {uniform:.6} vs ln5, CE {closed:.7}"),
        start.elapsed(),
        Duration::from_secs(1),
    );
}

/// 2,000 sequences over word indices 2..52. Positives contain `A ? B`;
/// negatives contain both words but never at distance two.
fn skip_pattern_corpus(rng: &mut RngStream, n: usize, len: usize) -> (Vec<Vec<usize>>, Vec<usize>) {
    const A: usize = 2;
    const B: usize = 3;
    let filler = |rng: &mut RngStream| 4 + (rng.next_u64() % 48) as usize;
    let mut seqs = Vec::with_capacity(n);
    let mut classes = Vec::with_capacity(n);
    for i in 0..n {
        let positive = i % 2 == 0;
        let mut s: Vec<usize> = (0..len).map(|_| filler(rng)).collect();
        if positive {
            let p = (rng.next_u64() % (len as u64 - 2)) as usize;
            s[p] = A;
            s[p + 2] = B;
        } else {
            loop {
                let pa = (rng.next_u64() % len as u64) as usize;
                let pb = (rng.next_u64() % len as u64) as usize;
                if pa != pb && pb != pa + 2 {
                    s[pa] = A;
                    s[pb] = B;
                    break;
                }
            }
        }
        seqs.push(s);
        classes.push(usize::from(positive));
    }
    (seqs, classes)
}

#[test]
fn criterion_06_skip_pattern_learnability() {
    let start = Instant::now();
    let mut rng = RngStream::new(6);
    let len = 20;
    let (seqs, classes) = skip_pattern_corpus(&mut rng, 2000, len);
    let mut cfg = ModelConfig::new(ModelKind::CnnScnn, 2);
    cfg.seq_len = len;
    cfg.emb_dim = 16;
    cfg.seed = 6;
    let emb = {
        let mut t = rng.uniform(-0.25, 0.25, 52 * 16).unwrap().reshape(vec![52, 16]).unwrap();
        t.row_mut(0).iter_mut().for_each(|x| *x = 0.0);
        t
    };
    let mut model = Model::build(&cfg, emb).unwrap();
    let (train_x, test_x) = seqs.split_at(1600);
    let (train_y, test_y) = classes.split_at(1600);
    let opts = TrainOptions {
        epochs: 10,
        batch_size: 100,
        seed: 6,
    };
    let record = train(&mut model, train_x, train_y, &opts).unwrap();
    let pred = model.predict(test_x).unwrap();
    let acc = pred.iter().zip(test_y).filter(|(p, y)| p == y).count() as f64 / test_y.len() as f64;
    report(
        6,
        "skip-gram pattern learnability (cnn_scnn, 10 epochs, batch 100)",
        acc >= 0.9,
        &format!(
            "held-out accuracy {:.3}, loss {:.3} -> {:.3}",
            acc,
            record.epoch_loss[0],
            record.epoch_loss.last().unwrap()
        ),
        start.elapsed(),
        Duration::from_secs(300),
    );
}

fn hand_tweets() -> Vec<ProcessedTweet> {
    [
        ("t1", "A", "ban muslim refugees"),
        ("t2", "A", "refugees go home"),
        ("t3", "B", "welcome refugees home"),
        ("t4", "B", "muslim food festival"),
    ]
    .iter()
    .map(|(id, l, text)| ProcessedTweet {
        id: id.to_string(),
        label: l.to_string(),
        tokens: text.split(' ').map(String::from).collect(),
    })
    .collect()
}

#[test]
fn criterion_07_uniqueness_and_bins() {
    let start = Instant::now();
    let tweets = hand_tweets();
    let idx = unique_words(&tweets);
    let set = |ws: &[&str]| ws.iter().map(|s| s.to_string()).collect::<std::collections::BTreeSet<_>>();
    let u1 = uniqueness(&tweets[0], &idx).unwrap();
    let bins = [bin(0.0).unwrap(), bin(0.1).unwrap(), bin(0.1 + 1e-9).unwrap(), bin(1.0).unwrap()];
    let ok = u1 == 1.0 / 3.0
        && idx.get("A") == Some(&set(&["ban", "go"]))
        && idx.get("B") == Some(&set(&["welcome", "food", "festival"]))
        && bins == [0, 1, 2, 10];
    report(
        7,
        "class-uniqueness score and 11-range binning",
        ok,
        &format!("u(t1)={u1}, uwords(A)={:?}, bins at 0/0.1/0.1+eps/1 = {bins:?}", idx.get("A").unwrap()),
        start.elapsed(),
        Duration::from_secs(1),
    );
}

#[test]
fn criterion_08_metrics() {
    let start = Instant::now();
    let labels = vec!["A".to_string(), "B".to_string()];
    let cm = confusion(&["A", "A", "B", "B"], &["A", "B", "B", "B"], &labels).unwrap();
    let pc = prf_per_class(&cm);
    let micro = micro_f1(&cm).f1;
    let macro_ = macro_f1(&pc, &labels, None).unwrap().f1;
    let mut ok = (pc[0].f1 - 2.0 / 3.0).abs() <= 1e-12
        && (pc[1].f1 - 0.8).abs() <= 1e-12
        && (micro - 0.75).abs() <= 1e-12
        && (macro_ - 11.0 / 15.0).abs() <= 1e-12;
    let mut rng = RngStream::new(8);
    let names: Vec<String> = (0..4).map(|i| format!("c{i}")).collect();
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = 1 + (rng.next_u64() % 50) as usize;
        let g: Vec<usize> = (0..n).map(|_| (rng.next_u64() % 4) as usize).collect();
        let p: Vec<usize> = (0..n).map(|_| (rng.next_u64() % 4) as usize).collect();
        let cm = ConfusionMatrix::from_indices(names.clone(), &g, &p).unwrap();
        let acc = g.iter().zip(&p).filter(|(a, b)| a == b).count() as f64 / n as f64;
        if (micro_f1(&cm).f1 - acc).abs() > 1e-12 {
            mismatches += 1;
        }
    }
    ok &= mismatches == 0;
    report(
        8,
        "per-class, micro and macro F1",
        ok,
        &format!(
            "F1 A={:.6} B={:.6}, micro {micro}, macro {macro_:.12}, micro!=accuracy in {mismatches}/1000",
            pc[0].f1, pc[1].f1
        ),
        start.elapsed(),
        Duration::from_secs(5),
    );
}

fn run_train(out: &Path, seed: u64) -> std::process::Output {
    Command::new(bin_path())
        .args(["train", "--kind", "cnn_scnn", "--non-hate-label", "non-hate", "--seed"])
        .arg(seed.to_string())
        .arg("--dataset")
        .arg(data_dir().join("toy_corpus.csv"))
        .arg("--embeddings")
        .arg(data_dir().join("toy_embeddings.txt"))
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

#[test]
fn criterion_09_protocol_determinism() {
    let start = Instant::now();
    let dataset = longtail_core::dataset::Dataset::load(&data_dir().join("toy_corpus.csv")).unwrap();
    let labels: Vec<&str> = dataset.tweets.iter().map(|t| t.label.as_str()).collect();
    let split = kfold_split(&labels, 5, 7, true).unwrap();
    let mut all: Vec<usize> = split.folds.iter().flatten().copied().collect();
    all.sort_unstable();
    let complete = all == (0..labels.len()).collect::<Vec<_>>();
    let mut balanced = true;
    for class in dataset.labels() {
        let per: Vec<usize> = split
            .folds
            .iter()
            .map(|f| f.iter().filter(|&&r| labels[r] == class).count())
            .collect();
        balanced &= per.iter().max().unwrap() - per.iter().min().unwrap() <= 1;
    }

    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let ra = run_train(&a, 7);
    let rb = run_train(&b, 7);
    let exit_ok = ra.status.success() && rb.status.success();
    let identical = exit_ok && fs::read(a.join("metrics.json")).unwrap() == fs::read(b.join("metrics.json")).unwrap();
    report(
        9,
        "stratified fold hygiene and byte-identical reruns",
        complete && balanced && identical,
        &format!(
            "disjoint+complete={complete}, per-class balance={balanced}, train exit ok={exit_ok}, metrics identical={identical}{}",
            if exit_ok { String::new() } else { format!(", stderr: {}", String::from_utf8_lossy(&ra.stderr)) }
        ),
        start.elapsed(),
        Duration::from_secs(180),
    );
}

#[test]
fn criterion_10_additional_true_positives() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(
        p.join("gold.csv"),
        "id,label,text\nt1,A,ban muslim refugees\nt2,A,refugees go home\nt3,B,welcome refugees home\nt4,B,muslim food festival\n",
    )
    .unwrap();
    fs::write(p.join("ours.csv"), "id,pred_label\nt1,A\nt2,A\nt3,B\nt4,B\n").unwrap();
    fs::write(p.join("reference.csv"), "id,pred_label\nt1,B\nt2,A\nt3,B\nt4,A\n").unwrap();
    let out = p.join("out");
    let run = Command::new(bin_path())
        .arg("compare")
        .arg("--gold")
        .arg(p.join("gold.csv"))
        .arg("--pred-a")
        .arg(p.join("ours.csv"))
        .arg("--pred-b")
        .arg(p.join("reference.csv"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    let doc: serde_json::Value = serde_json::from_slice(&fs::read(out.join("atp.json")).unwrap()).unwrap();
    let col = &doc["columns"][0];
    let ids: Vec<&str> = col["ids"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    let percent = col["percent"].as_object().unwrap();
    let total: f64 = percent.values().map(|v| v.as_f64().unwrap()).sum();
    let ok = run.status.success()
        && ids == ["t1", "t4"]
        && percent["0.4"].as_f64() == Some(50.0)
        && percent["0.7"].as_f64() == Some(50.0)
        && (total - 100.0).abs() <= 1e-9;
    report(
        10,
        "additional-true-positive comparison",
        ok,
        &format!("ATP ids {ids:?}, 0.4 -> {}, 0.7 -> {}, sum {total}", percent["0.4"], percent["0.7"]),
        start.elapsed(),
        Duration::from_secs(1),
    );
}
