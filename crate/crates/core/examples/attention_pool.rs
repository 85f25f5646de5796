//! Word-level attention pooling: a sentence of token states becomes one
//! vector, with weights that show which tokens it attended to.
//!
//! cargo run --example attention_pool

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rrl::encoder::{builtin_encoders, AttentionPooler};
use rrl::params::ParamStore;
use rrl::tape::Graph;

fn main() -> rrl::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut store = ParamStore::new();
    let encoder = builtin_encoders().resolve("random-small:dim=8:seed=1:buckets=256")?;
    encoder.init_params(&mut store)?;
    let pooler = AttentionPooler::new("pool", encoder.dim(), 6, &mut store, &mut rng)?;

    let tokens: Vec<String> = "the court granted the petition"
        .split(' ')
        .map(String::from)
        .collect();
    let mut g = Graph::new();
    let states = encoder.encode(&mut g, &store, &tokens, false)?;
    let pooled = pooler.pool(&mut g, &store, states)?;

    println!("token weights:");
    for (tok, w) in tokens.iter().zip(g.value(pooled.weights).iter()) {
        println!("  {tok:<10} {w:.3}");
    }
    let v = g.value(pooled.vector);
    println!("sentence vector ({} dims): {:.3}", v.ncols(), v);
    Ok(())
}
