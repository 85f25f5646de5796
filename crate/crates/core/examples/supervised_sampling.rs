//! Supervised document sampling: cluster document embeddings with k-means,
//! choose k by silhouette, and build one prototype pool per cluster.
//!
//! cargo run --example supervised_sampling

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rrl::corpus::synthetic::SyntheticSpec;
use rrl::pcm::{sample_documents, select_k, SamplingStrategy};

fn main() -> rrl::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let corpus = SyntheticSpec {
        documents: 12,
        ..SyntheticSpec::default()
    }
    .generate()?;

    // Three well-separated groups of documents, e.g. three areas of law.
    let centres = [[6.0, 0.0], [-6.0, 2.0], [0.0, -7.0]];
    let embeddings: BTreeMap<String, Vec<f64>> = corpus
        .doc_ids()
        .into_iter()
        .enumerate()
        .map(|(i, id)| {
            let c = centres[i % 3];
            (
                id.to_string(),
                c.iter().map(|x| x + rng.random_range(-1.0..1.0)).collect(),
            )
        })
        .collect();

    let points: Vec<Vec<f64>> = embeddings.values().cloned().collect();
    let choice = select_k(&points, [2, 6], 0)?;
    for (k, s) in &choice.scores {
        println!(
            "k = {k}: silhouette {s:.3}{}",
            if *k == choice.k { "  <- chosen" } else { "" }
        );
    }

    let strategy = SamplingStrategy::Supervised {
        cluster_range: [2, 6],
        seed: 0,
    };
    let sampled = sample_documents(&corpus, &strategy, &embeddings)?;
    for (i, pool) in sampled.pools.iter().enumerate() {
        println!("pool {i}: {:?}", pool.doc_ids);
    }
    Ok(())
}
