//! Corpus handling: generate a labelled corpus, write it as line-delimited
//! JSON, read it back, and cut k-fold splits.
//!
//! cargo run --example corpus_splits

use rrl::corpus::synthetic::SyntheticSpec;
use rrl::corpus::{load_corpus, make_kfold_splits, save_corpus};

fn main() -> rrl::Result<()> {
    let corpus = SyntheticSpec {
        documents: 10,
        ..SyntheticSpec::default()
    }
    .generate()?;
    let doc = &corpus.documents()[0];
    println!(
        "{} documents, {} sentences",
        corpus.len(),
        corpus.total_sentences()
    );
    println!(
        "first sentence of {}: {:?} -> {}",
        doc.doc_id,
        doc.sentences[0].text,
        corpus.scheme().label(corpus.gold(doc)[0])
    );

    let dir = std::env::temp_dir().join("rrl-corpus-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("corpus.jsonl");
    save_corpus(&corpus, &path)?;
    assert_eq!(load_corpus(&path, corpus.scheme())?, corpus);
    println!("round-tripped through {}", path.display());

    for s in make_kfold_splits(&corpus, 5, 0)? {
        println!(
            "fold {:?}: train {:?} dev {:?} test {:?}",
            s.fold_index,
            s.train.len(),
            s.dev,
            s.test
        );
    }
    Ok(())
}
