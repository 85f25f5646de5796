//! Viterbi decoding and negative log-likelihood of a linear-chain CRF with
//! virtual start and end states.
//!
//! cargo run --example crf_decode

use ndarray::{array, Array2};
use rrl::encoder::crf::{
    decode, end_state, log_partition, neg_log_likelihood, path_score, start_state,
};

fn main() -> rrl::Result<()> {
    // Three sentences, three roles. Emissions favour 0, 1, 1 but the
    // transitions penalise staying in role 1.
    let emissions = array![[2.0, 0.5, 0.1], [0.2, 1.5, 1.2], [0.1, 1.4, 1.3]];
    let l = emissions.ncols();
    let mut transitions = Array2::<f64>::zeros((l + 2, l + 2));
    transitions[[1, 1]] = -2.0;
    transitions[[start_state(l), 0]] = 1.0;
    transitions[[2, end_state(l)]] = 0.5;

    let best = decode(&emissions, &transitions)?;
    println!("viterbi path: {best:?}");
    println!(
        "path score:   {:.4}",
        path_score(&emissions, &transitions, &best)?
    );
    println!(
        "log Z:        {:.4}",
        log_partition(&emissions, &transitions)?
    );

    for gold in [vec![0, 1, 1], best.clone()] {
        let nll = neg_log_likelihood(&emissions, &transitions, &gold)?;
        println!(
            "NLL of {gold:?}: {:.4} (p = {:.3})",
            nll.value,
            (-nll.value).exp()
        );
    }
    Ok(())
}
