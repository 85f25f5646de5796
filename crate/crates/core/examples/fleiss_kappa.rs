//! Inter-annotator agreement with Fleiss' kappa. Each row is one sentence,
//! each column counts the annotators who chose that role.
//!
//! cargo run --example fleiss_kappa

use rrl::metrics::fleiss_kappa;

fn main() -> rrl::Result<()> {
    let unanimous = vec![vec![3, 0, 0], vec![0, 3, 0], vec![0, 0, 3]];
    let mixed = vec![
        vec![3, 0, 0],
        vec![2, 1, 0],
        vec![0, 2, 1],
        vec![1, 1, 1],
        vec![0, 0, 3],
    ];
    println!("unanimous: {:.4}", fleiss_kappa(&unanimous)?);
    println!("mixed:     {:.4}", fleiss_kappa(&mixed)?);
    Ok(())
}
