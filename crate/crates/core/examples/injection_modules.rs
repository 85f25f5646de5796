//! The five ways PCM injects a prototype into a sentence vector, each
//! applied to the same inputs, plus the identity settings of three of them.
//!
//! cargo run --example injection_modules

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rrl::params::ParamStore;
use rrl::pcm::{InjectionKind, InjectionModule};

fn main() -> rrl::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (t, d, dp) = (4, 8, 6);
    let h = Array2::from_shape_simple_fn((t, d), || rng.random_range(-1.0..1.0));
    let p = Array2::from_shape_simple_fn((t, dp), || rng.random_range(-1.0..1.0));

    println!("{:<16} {:>10} {:>10}", "kind", "params", "|y - h|");
    for kind in InjectionKind::ALL {
        let mut store = ParamStore::new();
        let module = InjectionModule::new(kind, d, dp, &mut store, &mut rng)?;
        let y = module.apply(&store, &h, &p)?;
        let n: usize = store.iter().map(|(_, _, m)| m.len()).sum();
        let delta = (&y - &h).iter().map(|x| x * x).sum::<f64>().sqrt();
        println!("{:<16} {n:>10} {delta:>10.4}", kind.to_string());
    }

    // Closing the gate of the gated residual leaves the input untouched.
    let mut store = ParamStore::new();
    let module = InjectionModule::new(InjectionKind::GatedResidual, d, dp, &mut store, &mut rng)?;
    let bias = store
        .id("pcm.inject.gated_residual.b_g")
        .expect("gate bias");
    store.get_mut(bias).fill(-1e4);
    assert_eq!(module.apply(&store, &h, &p)?, h);
    println!("gated residual with a closed gate returns h exactly");
    Ok(())
}
