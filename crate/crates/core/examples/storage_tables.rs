//! Storage accounting at ImageNet scale: raw soft-label sizes, compressed
//! sizes for the preset autoencoder shapes, baseline ratios and the
//! language-model cache example.
//!
//! cargo run --example storage_tables

use slvq::budget::{
    compressed_size_table, label_size_table, llm_report, quant_bytes, topk_bytes, BudgetSpec, GIB,
};

fn main() -> slvq::Result<()> {
    let ipcs = [10, 20, 50, 100];
    println!("soft labels, C=1000, 300 epochs (GB = 1024^3 bytes)");
    for row in label_size_table(&ipcs, 1000, 300)? {
        println!("  IPC {:>3}  {:>7.3} GB", row.ipc, row.label_gib);
    }

    println!("\ncompressed sizes");
    println!("  rate   d_h  d_c     k  IPC       GB    ratio");
    for r in compressed_size_table(&ipcs, 1000, 300)? {
        println!(
            "  {:>3}x {:>5} {:>4} {:>5} {:>4} {:>8.3} {:>8.2}",
            r.rate, r.latent_dim, r.code_dim, r.num_codes, r.ipc, r.compressed_gib, r.ratio
        );
    }

    let spec = BudgetSpec::new(10, 1000, 300);
    println!("\nbaselines at IPC 10");
    for bits in [2, 3, 4] {
        println!("  {bits}-bit quantization   {:>6.2}x", quant_bytes(&spec, bits)?.ratio);
    }
    for k in [5, 15, 50] {
        println!("  top-{k:<2}               {:>6.2}x", topk_bytes(&spec, k)?.ratio);
    }

    let llm = llm_report(1_200_000, 50_257, 0.2 * GIB)?;
    println!(
        "\nLM cache: 1.2M tokens x 50,257 vocab = {:.1} GB; against a 0.2 GB archive {:.0}x",
        llm.raw_gib(),
        llm.ratio
    );
    Ok(())
}
