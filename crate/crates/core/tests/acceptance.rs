//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails. Built with `harness = false` so the summary is
//! always visible in `cargo test` output.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rrl::corpus::synthetic::SyntheticSpec;
use rrl::corpus::{Corpus, Document, LabelScheme, Level, Sentence, SentenceLabels};
use rrl::encoder::crf::{crf_nll_node, decode, neg_log_likelihood};
use rrl::encoder::{attention_pool, BackboneConfig};
use rrl::harness::{
    run_multi_seed, train, ExperimentConfig, Method, Model, OptimizerConfig, TrainOptions,
};
use rrl::metrics::macro_f1;
use rrl::pbr::{div_loss_node, prox_loss_node, PbrConfig};
use rrl::pcm::{
    cln, cross_attention, extract_prototypes, film, gated_residual, linear_fusion,
    sample_documents, DocumentPool, HashBowEmbedder, PcmConfig, SamplingStrategy, SentenceEmbedder,
    LN_EPS,
};
use rrl::tape::{Graph, Var};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-scale..scale))
}

// ---------------------------------------------------------------------------
// 1. CRF against exhaustive enumeration

/// Independent scorer: virtual start state `l`, end state `l + 1`.
fn brute_score(emit: &Array2<f64>, trans: &Array2<f64>, path: &[usize]) -> f64 {
    let l = emit.ncols();
    let mut s = trans[[l, path[0]]];
    for (t, &y) in path.iter().enumerate() {
        s += emit[[t, y]];
        if t > 0 {
            s += trans[[path[t - 1], y]];
        }
    }
    s + trans[[path[path.len() - 1], l + 1]]
}

fn all_paths(m: usize, l: usize) -> Vec<Vec<usize>> {
    let mut paths = vec![Vec::new()];
    for _ in 0..m {
        paths = paths
            .into_iter()
            .flat_map(|p| {
                (0..l).map(move |y| {
                    let mut q = p.clone();
                    q.push(y);
                    q
                })
            })
            .collect();
    }
    paths
}

fn crf_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for case in 0..200 {
        let m = rng.random_range(1..=5);
        let l = rng.random_range(1..=4);
        let emit = uniform(&mut rng, m, l, 3.0);
        let trans = uniform(&mut rng, l + 2, l + 2, 3.0);
        let paths = all_paths(m, l);
        let scores: Vec<f64> = paths
            .iter()
            .map(|p| brute_score(&emit, &trans, p))
            .collect();
        let (best, _) = scores
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc },
            );
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_z = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();

        let viterbi = decode(&emit, &trans).map_err(|e| e.to_string())?;
        ensure!(
            viterbi == paths[best],
            "case {case}: viterbi {viterbi:?} != brute {:?}",
            paths[best]
        );
        let gold = &paths[rng.random_range(0..paths.len())];
        let nll = neg_log_likelihood(&emit, &trans, gold)
            .map_err(|e| e.to_string())?
            .value;
        let expected = log_z - brute_score(&emit, &trans, gold);
        worst = worst.max((nll - expected).abs());
        ensure!(
            (nll - expected).abs() < 1e-6,
            "case {case}: nll {nll} vs {expected}"
        );
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:.1?}");
    Ok(format!(
        "200 instances, max |dNLL| {worst:.1e}, {elapsed:.1?}"
    ))
}

// ---------------------------------------------------------------------------
// 2. Gradients against central differences

const FD_EPS: f64 = 1e-6;
/// Relative error is measured against max(|analytic|, |numeric|, FD_FLOOR) so
/// that entries whose true gradient is ~0 are not dominated by rounding.
const FD_FLOOR: f64 = 1e-3;

/// Worst relative error over all entries of all inputs. `build` receives the
/// inputs as graph leaves and returns a scalar.
fn fd_check(inputs: &[Array2<f64>], build: &dyn Fn(&mut Graph, &[Var]) -> Var) -> f64 {
    let eval = |xs: &[Array2<f64>]| {
        let mut g = Graph::new();
        let vars: Vec<Var> = xs.iter().map(|x| g.input(x.clone())).collect();
        let out = build(&mut g, &vars);
        g.scalar(out)
    };
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|x| g.input(x.clone())).collect();
    let out = build(&mut g, &vars);
    let grads = g.backward(out);
    let mut worst = 0.0f64;
    for (k, x) in inputs.iter().enumerate() {
        let analytic = grads
            .get(vars[k])
            .cloned()
            .unwrap_or_else(|| Array2::zeros(x.dim()));
        for r in 0..x.nrows() {
            for c in 0..x.ncols() {
                let mut plus = inputs.to_vec();
                plus[k][[r, c]] += FD_EPS;
                let mut minus = inputs.to_vec();
                minus[k][[r, c]] -= FD_EPS;
                let numeric = (eval(&plus) - eval(&minus)) / (2.0 * FD_EPS);
                let a = analytic[[r, c]];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FD_FLOOR);
                worst = worst.max(rel);
            }
        }
    }
    worst
}

/// Contracts a matrix output to a scalar with fixed random weights so every
/// output entry carries a distinct gradient.
fn weighted_sum(g: &mut Graph, x: Var, weights: &Array2<f64>) -> Var {
    let w = g.constant(weights.clone());
    let y = g.mul(x, w);
    g.sum(y)
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (t, d, dp, a, q, l) = (3, 4, 3, 5, 3, 3);
    let mut results: Vec<(&str, f64)> = Vec::new();

    let emb = uniform(&mut rng, t, d, 1.0);
    let protos = uniform(&mut rng, q, d, 1.0);
    results.push((
        "pbr proximity",
        fd_check(&[emb.clone(), protos.clone()], &|g, v| {
            prox_loss_node(g, v[0], v[1]).unwrap()
        }),
    ));
    results.push((
        "pbr diversity",
        fd_check(std::slice::from_ref(&protos), &|g, v| {
            div_loss_node(g, v[0]).unwrap()
        }),
    ));

    let emit = uniform(&mut rng, 4, l, 1.0);
    let trans = uniform(&mut rng, l + 2, l + 2, 1.0);
    let gold = vec![0, 2, 1, 2];
    results.push((
        "crf nll",
        fd_check(&[emit, trans], &|g, v| {
            crf_nll_node(g, v[0], v[1], &gold).unwrap()
        }),
    ));

    let states = uniform(&mut rng, t + 1, d, 1.0);
    let (w, b, ctx) = (
        uniform(&mut rng, d, a, 1.0),
        uniform(&mut rng, 1, a, 1.0),
        uniform(&mut rng, a, 1, 1.0),
    );
    let out_w = uniform(&mut rng, 1, d, 1.0);
    results.push((
        "attention pooling",
        fd_check(&[states, w, b, ctx], &|g, v| {
            let pooled = attention_pool(g, v[0], v[1], v[2], v[3]).unwrap();
            weighted_sum(g, pooled.vector, &out_w)
        }),
    ));

    let h = uniform(&mut rng, t, d, 1.0);
    let p = uniform(&mut rng, t, dp, 1.0);
    let out_w = uniform(&mut rng, t, d, 1.0);
    let m = |rng: &mut ChaCha8Rng, r, c| uniform(rng, r, c, 0.7);
    let lf = [
        h.clone(),
        p.clone(),
        m(&mut rng, d + dp, d),
        m(&mut rng, 1, d),
    ];
    results.push((
        "linear fusion",
        fd_check(&lf, &|g, v| {
            let y = linear_fusion(g, v[0], v[1], v[2], v[3]);
            weighted_sum(g, y, &out_w)
        }),
    ));
    let cl = [
        h.clone(),
        p.clone(),
        m(&mut rng, dp, d),
        m(&mut rng, 1, d),
        m(&mut rng, dp, d),
        m(&mut rng, 1, d),
    ];
    results.push((
        "conditional layer norm",
        fd_check(&cl, &|g, v| {
            let y = cln(g, v[0], v[1], [v[2], v[3], v[4], v[5]], LN_EPS);
            weighted_sum(g, y, &out_w)
        }),
    ));
    let gr = [
        h.clone(),
        p.clone(),
        m(&mut rng, dp, d),
        m(&mut rng, d + dp, d),
        m(&mut rng, 1, d),
    ];
    results.push((
        "gated residual",
        fd_check(&gr, &|g, v| {
            let y = gated_residual(g, v[0], v[1], v[2], v[3], v[4]);
            weighted_sum(g, y, &out_w)
        }),
    ));
    let fm = [
        h.clone(),
        p.clone(),
        m(&mut rng, dp, d),
        m(&mut rng, 1, d),
        m(&mut rng, dp, d),
        m(&mut rng, 1, d),
    ];
    results.push((
        "film",
        fd_check(&fm, &|g, v| {
            let y = film(g, v[0], v[1], [v[2], v[3], v[4], v[5]]);
            weighted_sum(g, y, &out_w)
        }),
    ));
    let ca = [
        h,
        p,
        m(&mut rng, d, a),
        m(&mut rng, dp, a),
        m(&mut rng, dp, a),
        m(&mut rng, a, d),
    ];
    results.push((
        "cross attention",
        fd_check(&ca, &|g, v| {
            let y = cross_attention(g, v[0], v[1], [v[2], v[3], v[4], v[5]]);
            weighted_sum(g, y, &out_w)
        }),
    ));

    let failed: Vec<String> = results
        .iter()
        .filter(|(_, e)| !(*e < 1e-4))
        .map(|(n, e)| format!("{n} ({e:.2e})"))
        .collect();
    ensure!(
        failed.is_empty(),
        "relative error >= 1e-4: {}",
        failed.join(", ")
    );
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:.1?}");
    let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(format!(
        "{} components, max rel err {worst:.1e}, {elapsed:.1?}",
        results.len()
    ))
}

// ---------------------------------------------------------------------------
// Shared training setup

fn smoke_config(method: Method, epochs: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        name: "acceptance".into(),
        backbone: BackboneConfig::small(),
        optimizer: OptimizerConfig {
            learning_rate: 0.01,
            epochs,
            ..OptimizerConfig::default()
        },
        method,
        ..ExperimentConfig::default()
    };
    match method {
        Method::Pbr => {
            cfg.pbr = Some(PbrConfig {
                q: 4,
                lambda_prox: 0.9,
                lambda_div: 0.9,
                ..PbrConfig::default()
            })
        }
        Method::Pcm | Method::PcmGold => cfg.pcm = Some(PcmConfig::default()),
        Method::Baseline => {}
    }
    cfg
}

fn err(e: rrl::Error) -> String {
    e.to_string()
}

// ---------------------------------------------------------------------------
// 3. Zero-weight regularizer

fn zero_weight_reduction() -> Outcome {
    let base = smoke_config(Method::Baseline, 3);
    let mut pbr = smoke_config(Method::Pbr, 3);
    pbr.pbr = Some(PbrConfig {
        q: 4,
        lambda_prox: 0.0,
        lambda_div: 0.0,
        ..PbrConfig::default()
    });
    let part = base.partitions().map_err(err)?.remove(0);
    let a = train(&base, &part, 0, &TrainOptions::default()).map_err(err)?;
    let b = train(&pbr, &part, 0, &TrainOptions::default()).map_err(err)?;
    ensure!(
        a.state.step_losses.len() == 3 * part.train.len(),
        "unexpected step count"
    );
    for (i, (x, y)) in a
        .state
        .step_losses
        .iter()
        .zip(&b.state.step_losses)
        .enumerate()
    {
        ensure!(x.to_bits() == y.to_bits(), "step {i}: {x:e} vs {y:e}");
    }
    Ok(format!("{} steps bit-identical", a.state.step_losses.len()))
}

// ---------------------------------------------------------------------------
// 4. Prototype extraction against a naive mean

fn extraction_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let scheme = LabelScheme::new("roles", Level::Function, ["a", "b", "c", "d"]).map_err(err)?;
    let vocab: Vec<String> = (0..30).map(|i| format!("tok{i}")).collect();
    let mut labels: Vec<usize> = (0..50)
        .map(|i| if i < 4 { i } else { rng.random_range(0..4) })
        .collect();
    labels.reverse();
    let mut docs = Vec::new();
    let mut rest = &labels[..];
    while !rest.is_empty() {
        let n = rng.random_range(1..=8).min(rest.len());
        let sentences = rest[..n]
            .iter()
            .map(|&y| {
                let len = rng.random_range(1..8);
                let words: Vec<&str> = (0..len)
                    .map(|_| vocab[rng.random_range(0..vocab.len())].as_str())
                    .collect();
                Sentence::new(
                    words.join(" "),
                    SentenceLabels::at(Level::Function, scheme.label(y)),
                )
            })
            .collect();
        docs.push(Document {
            doc_id: format!("d{}", docs.len()),
            sentences,
            metadata: BTreeMap::new(),
        });
        rest = &rest[n..];
    }
    let corpus = Corpus::new(docs, scheme.clone()).map_err(err)?;
    ensure!(
        corpus.total_sentences() == 50,
        "pool has {} sentences",
        corpus.total_sentences()
    );

    let embedder = HashBowEmbedder::new(24, 5).map_err(err)?;
    let pool = DocumentPool {
        doc_ids: corpus.doc_ids().into_iter().map(String::from).collect(),
        centroid: None,
    };
    let set =
        extract_prototypes(&corpus, &pool, &embedder, &SamplingStrategy::Full).map_err(err)?;

    let mut sums = vec![vec![0.0; 24]; 4];
    let mut counts = [0usize; 4];
    for doc in corpus.documents() {
        for s in &doc.sentences {
            let y = scheme
                .index_of(s.labels.get(Level::Function).unwrap())
                .unwrap();
            let e = embedder.embed(&s.tokens()).map_err(err)?;
            for (acc, v) in sums[y].iter_mut().zip(&e) {
                *acc += v;
            }
            counts[y] += 1;
        }
    }
    ensure!(set.len() == 4, "{} prototypes", set.len());
    for (y, sum) in sums.iter().enumerate() {
        let expected: Vec<f64> = sum.iter().map(|s| s / counts[y] as f64).collect();
        let got = &set.get(y).ok_or(format!("no prototype for {y}"))?.vector;
        ensure!(
            got == &expected,
            "prototype {y} differs from the naive mean"
        );
    }
    Ok(format!(
        "4 prototypes over 50 sentences match exactly (counts {counts:?})"
    ))
}

// ---------------------------------------------------------------------------
// 5. Gold prototype routing

fn gold_routing() -> Outcome {
    let cfg = smoke_config(Method::PcmGold, 2);
    let mut checked = 0;
    let corpora = [
        SyntheticSpec::default().generate().map_err(err)?,
        SyntheticSpec {
            roles: 7,
            documents: 10,
            filler_per_sentence: 9,
            seed: 99,
            ..SyntheticSpec::default()
        }
        .generate()
        .map_err(err)?,
    ];
    for corpus in &corpora {
        let model = Model::build(&cfg, corpus.scheme(), corpus, None, 0).map_err(err)?;
        let acc = model.evaluate(corpus).map_err(err)?.assignment_accuracy;
        ensure!(
            acc == Some(1.0),
            "untrained model: assignment accuracy {acc:?}"
        );
        checked += corpus.total_sentences();
    }
    let part = cfg.partitions().map_err(err)?.remove(0);
    let out = train(&cfg, &part, 0, &TrainOptions::default()).map_err(err)?;
    for (name, c) in [("train", &part.train), ("dev", &part.dev)] {
        let acc = out.model.evaluate(c).map_err(err)?.assignment_accuracy;
        ensure!(acc == Some(1.0), "trained model on {name}: {acc:?}");
        checked += c.total_sentences();
    }
    Ok(format!("100% over {checked} sentences"))
}

// ---------------------------------------------------------------------------
// 6. Macro-F1 arithmetic on the reference role-wise columns

fn reference_macro() -> Outcome {
    let baseline = [
        15.40, 68.98, 85.99, 61.04, 0.00, 52.18, 74.63, 97.30, 86.64, 97.79, 77.38, 40.52, 57.00,
    ];
    let with_pcm = [
        57.15, 76.93, 89.92, 61.41, 0.00, 56.01, 81.61, 100.00, 88.65, 98.13, 79.04, 35.91, 60.35,
    ];
    let b = macro_f1(&baseline).map_err(err)?;
    let p = macro_f1(&with_pcm).map_err(err)?;
    ensure!((b - 62.69).abs() <= 0.01, "baseline macro {b:.4}");
    ensure!((p - 68.09).abs() <= 0.01, "+PCM macro {p:.4}");
    Ok(format!("baseline {b:.4}, +PCM {p:.4}"))
}

// ---------------------------------------------------------------------------
// 7. Injection identities

fn injection_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (t, d, dp, a) = (5, 6, 4, 3);
    let h = uniform(&mut rng, t, d, 2.0);
    let p = uniform(&mut rng, t, dp, 2.0);
    let mut g = Graph::new();
    let hv = g.input(h.clone());
    let pv = g.input(p.clone());

    // FiLM with gamma = 1, beta = 0 whatever the prototype.
    let zeros = g.constant(Array2::zeros((dp, d)));
    let ones_row = g.constant(Array2::ones((1, d)));
    let zero_row = g.constant(Array2::zeros((1, d)));
    let y = film(&mut g, hv, pv, [zeros, ones_row, zeros, zero_row]);
    ensure!(g.value(y) == h, "film identity differs");

    // Gated residual with a saturated closed gate.
    let w_p = g.constant(uniform(&mut rng, dp, d, 1.0));
    let w_g = g.constant(uniform(&mut rng, d + dp, d, 1.0));
    let b_g = g.constant(Array2::from_elem((1, d), -1e4));
    let y = gated_residual(&mut g, hv, pv, w_p, w_g, b_g);
    ensure!(g.value(y) == h, "closed gate differs");

    // Cross-attention whose value projection is zero.
    let wq = g.constant(uniform(&mut rng, d, a, 1.0));
    let wk = g.constant(uniform(&mut rng, dp, a, 1.0));
    let wv = g.constant(Array2::zeros((dp, a)));
    let wo = g.constant(uniform(&mut rng, a, d, 1.0));
    let y = cross_attention(&mut g, hv, pv, [wq, wk, wv, wo]);
    ensure!(g.value(y) == h, "zero value projection differs");
    Ok("film, closed gate and zero-value attention return the input exactly".into())
}

// ---------------------------------------------------------------------------
// 8. Overfit smoke test

fn overfit_smoke() -> Outcome {
    let mut parts = Vec::new();
    for method in [Method::Baseline, Method::Pbr, Method::Pcm] {
        let cfg = smoke_config(method, 40);
        if let rrl::harness::CorpusConfig::Synthetic { spec, .. } = &cfg.corpus {
            ensure!(
                spec.documents == 8 && spec.roles == 4,
                "unexpected synthetic corpus shape"
            );
        }
        let part = cfg.partitions().map_err(err)?.remove(0);
        let start = Instant::now();
        let out = train(&cfg, &part, 0, &TrainOptions::default()).map_err(err)?;
        let elapsed = start.elapsed();
        let best = out.state.best_dev.unwrap_or(0.0);
        ensure!(best >= 0.95, "{method}: best dev macro-F1 {best:.4}");
        ensure!(
            elapsed < Duration::from_secs(300),
            "{method}: took {elapsed:.1?}"
        );
        parts.push(format!(
            "{method} {best:.3}@{} ({elapsed:.1?})",
            out.state.best_epoch.unwrap_or(0)
        ));
    }
    Ok(parts.join(", "))
}

// ---------------------------------------------------------------------------
// 9. Supervised sampling on separable blobs

fn supervised_blobs() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let corpus = SyntheticSpec {
        documents: 11,
        ..SyntheticSpec::default()
    }
    .generate()
    .map_err(err)?;
    let ids: Vec<String> = corpus.doc_ids().into_iter().map(String::from).collect();
    // Interleave membership so clusters are not contiguous in corpus order.
    let in_first = |i: usize| i.is_multiple_of(2) || i == 3;
    let mut embeddings = BTreeMap::new();
    for (i, id) in ids.iter().enumerate() {
        let centre = if in_first(i) {
            [8.0, 0.0, 0.0]
        } else {
            [0.0, -8.0, 5.0]
        };
        let v: Vec<f64> = centre
            .iter()
            .map(|c| c + rng.random_range(-0.5..0.5))
            .collect();
        embeddings.insert(id.clone(), v);
    }
    let strategy = SamplingStrategy::Supervised {
        cluster_range: [2, 6],
        seed: 0,
    };
    let sampled = sample_documents(&corpus, &strategy, &embeddings).map_err(err)?;
    ensure!(
        sampled.pools.len() == 2,
        "selected k = {}",
        sampled.pools.len()
    );
    let blob_a: BTreeSet<&str> = ids
        .iter()
        .enumerate()
        .filter(|(i, _)| in_first(*i))
        .map(|(_, s)| s.as_str())
        .collect();
    let blob_b: BTreeSet<&str> = ids
        .iter()
        .enumerate()
        .filter(|(i, _)| !in_first(*i))
        .map(|(_, s)| s.as_str())
        .collect();
    let pools: BTreeSet<BTreeSet<&str>> = sampled
        .pools
        .iter()
        .map(|p| p.doc_ids.iter().map(String::as_str).collect())
        .collect();
    ensure!(
        pools == BTreeSet::from([blob_a, blob_b]),
        "pools differ from the blobs: {pools:?}"
    );
    let best = sampled
        .silhouettes
        .iter()
        .cloned()
        .fold((0, f64::NEG_INFINITY), |b, s| if s.1 > b.1 { s } else { b });
    Ok(format!(
        "k = 2 (silhouette {:.3}), pools equal the blobs",
        best.1
    ))
}

// ---------------------------------------------------------------------------
// 10. Determinism

fn determinism() -> Outcome {
    let mut lines = Vec::new();
    for method in [Method::Baseline, Method::Pbr, Method::Pcm] {
        let cfg = smoke_config(method, 5);
        let part = cfg.partitions().map_err(err)?.remove(0);
        let a = train(&cfg, &part, 42, &TrainOptions::default()).map_err(err)?;
        let b = train(&cfg, &part, 42, &TrainOptions::default()).map_err(err)?;
        ensure!(
            a.dev_report.macro_f1.to_bits() == b.dev_report.macro_f1.to_bits(),
            "{method}: {} vs {}",
            a.dev_report.macro_f1,
            b.dev_report.macro_f1
        );
        ensure!(a.state == b.state, "{method}: training trajectories differ");
        lines.push(format!("{method} {}", a.dev_report.macro_f1));
    }
    // Parallel seeds must not perturb each other.
    let mut cfg = smoke_config(Method::Pbr, 3);
    cfg.seeds = vec![0, 1, 2];
    let (x, _) = run_multi_seed(&cfg, &TrainOptions::default(), None).map_err(err)?;
    let (y, _) = run_multi_seed(&cfg, &TrainOptions::default(), None).map_err(err)?;
    ensure!(
        x.macro_scores() == y.macro_scores(),
        "multi-seed scores differ"
    );
    Ok(format!(
        "repeat runs identical ({}); parallel seeds identical",
        lines.join(", ")
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("CRF oracle equivalence", crf_oracle),
        ("gradient suite", gradient_suite),
        ("zero-weight regularizer reduction", zero_weight_reduction),
        ("prototype extraction oracle", extraction_oracle),
        ("gold prototype routing", gold_routing),
        ("reference macro-F1 arithmetic", reference_macro),
        ("injection identities", injection_identities),
        ("overfit smoke test", overfit_smoke),
        ("supervised sampling on blobs", supervised_blobs),
        ("determinism", determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2}. {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2}. {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failures} failed",
        criteria.len() - failures
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
