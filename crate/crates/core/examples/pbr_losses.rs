//! Prototype-based regularization: a bank of trainable prototypes, the
//! proximity term pulling sentence embeddings towards their nearest
//! prototype and the diversity term pushing prototypes apart.
//!
//! cargo run --example pbr_losses

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rrl::params::ParamStore;
use rrl::pbr::{div_loss, prox_loss, regularize, total_loss, PbrConfig, SoftPrototypeBank};
use rrl::tape::Graph;

fn main() -> rrl::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut store = ParamStore::new();
    let cfg = PbrConfig {
        q: 4,
        ..PbrConfig::default()
    };
    let bank = SoftPrototypeBank::new(&mut store, cfg.q, 6, &mut rng)?;
    let protos = store.get(bank.id).clone();

    // Embeddings that sit exactly on prototypes have zero proximity loss.
    let on_bank = protos.slice(ndarray::s![0..2, ..]).to_owned();
    let elsewhere = Array2::from_shape_fn((2, 6), |(i, j)| if j == i { 1.0 } else { 0.0 });
    println!("prox(on bank)   = {:.4}", prox_loss(&on_bank, &protos)?);
    println!("prox(elsewhere) = {:.4}", prox_loss(&elsewhere, &protos)?);
    println!("div(bank)       = {:.4}", div_loss(&protos)?);

    // Inside a graph the terms join the task loss and receive gradients.
    let mut g = Graph::new();
    let task = g.row(&[1.25]);
    let emb = g.input(elsewhere);
    let p = g.param(&store, bank.id);
    let (total, terms) = regularize(&mut g, task, emb, p, &cfg)?;
    println!(
        "task 1.25 + {} * {:.4} - {} * {:.4} = {:.4}",
        cfg.lambda_prox,
        terms.prox,
        cfg.lambda_div,
        terms.div,
        g.scalar(total)
    );
    assert_eq!(
        g.scalar(total),
        total_loss(1.25, terms.prox, terms.div, &cfg)
    );
    let grads = g.backward(total);
    let gp = grads.get(p).expect("bank receives a gradient");
    println!(
        "|d total / d prototypes| = {:.4}",
        gp.iter().map(|x| x * x).sum::<f64>().sqrt()
    );
    Ok(())
}
