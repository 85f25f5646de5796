//! Prototype extraction for PCM: embed every training sentence with a frozen
//! embedder, average per role, then route new sentences to their nearest
//! prototype. The set is saved and reloaded byte-for-byte.
//!
//! cargo run --example pcm_prototypes

use rrl::corpus::synthetic::SyntheticSpec;
use rrl::pcm::{
    build_prototype_sets, builtin_embedders, load_prototypes, save_prototypes, PcmConfig,
};

fn main() -> rrl::Result<()> {
    let corpus = SyntheticSpec::default().generate()?;
    let ids = corpus.doc_ids();
    let (train_ids, held_ids) = ids.split_at(6);
    let train = corpus.subset(train_ids)?;
    let held = corpus.subset(held_ids)?;

    let cfg = PcmConfig::default();
    let registry = builtin_embedders();
    let sets = build_prototype_sets(&cfg, &train, &registry)?;
    let set = &sets[0];
    println!(
        "{} prototypes of width {} from {} documents",
        set.len(),
        set.dim(),
        set.source.doc_ids.len()
    );

    let embedder = registry.resolve(&cfg.embedder)?;
    let (mut hits, mut total) = (0, 0);
    for doc in held.documents() {
        for (s, gold) in doc.sentences.iter().zip(held.gold(doc)) {
            let a = set.assign(&embedder.embed(&s.tokens())?)?;
            hits += usize::from(a.index == gold);
            total += 1;
        }
    }
    println!("held-out nearest-prototype accuracy: {hits}/{total}");

    let dir = std::env::temp_dir().join("rrl-pcm-prototypes");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("prototypes.json");
    save_prototypes(&path, corpus.scheme(), &sets)?;
    let back = load_prototypes(&path, corpus.scheme())?;
    assert_eq!(back, sets);
    println!("saved and reloaded {}", path.display());
    Ok(())
}
