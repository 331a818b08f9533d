//! Search for an autoencoder shape that meets a target compression ratio.
//!
//! cargo run --example solve_budget -- [ipc] [classes] [epochs]

use slvq::budget::{solve_hyperparams, vq_bytes, BudgetSpec};

fn main() -> slvq::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let (ipc, classes, epochs) = match args[..] {
        [i, c, e, ..] => (i, c, e),
        _ => (10, 1000, 300),
    };
    let spec = BudgetSpec::new(ipc, classes, epochs);
    println!("IPC {ipc}, C {classes}, {epochs} epochs");
    println!("  target    d_h   d_c      k     ratio        GB");
    for target in [10.0, 20.0, 30.0, 40.0, 100.0, 200.0] {
        match solve_hyperparams(target, &spec) {
            Ok(s) => {
                let gb = vq_bytes(&spec.with_vq(s.latent_dim, s.code_dim, s.num_codes))?.compressed_gib();
                println!(
                    "  {:>5}x {:>6} {:>5} {:>6} {:>8.2}x {:>9.3}",
                    target, s.latent_dim, s.code_dim, s.num_codes, s.ratio, gb
                );
            }
            Err(e) => println!("  {target:>5}x  {e}"),
        }
    }
    Ok(())
}
