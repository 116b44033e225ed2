//! Marginal-likelihood model selection among four candidate systems, one of
//! which generated the data.
//!
//! Run with: cargo run --release --example model_selection

use std::path::PathBuf;

use fenrir::bench::{model_select, selection_winners, ExperimentConfig};
use fenrir::models;

fn main() -> fenrir::Result<()> {
    let config = ExperimentConfig {
        replicates: 3,
        seed_base: 11,
        out_dir: PathBuf::from("target/example-out/model-select"),
        ..ExperimentConfig::default()
    };
    let records = model_select(&config)?;
    let candidates = models::model_selection_candidates();

    println!("negative log-likelihood per candidate (lower is better):\n");
    print!("{:>10}", "replicate");
    for c in &candidates {
        print!("{:>16}", c.name);
    }
    println!();
    for r in 0..config.replicates {
        print!("{r:>10}");
        for c in &candidates {
            let nll = records
                .iter()
                .find(|x| x.replicate == r && x.candidate == c.name)
                .map(|x| x.nll)
                .unwrap_or(f64::NAN);
            print!("{nll:>16.2}");
        }
        println!();
    }

    let winners = selection_winners(&records, &candidates);
    let wins = winners.iter().filter(|w| *w == "lotka-volterra").count();
    println!("\ntrue model selected in {wins}/{} replicates", winners.len());
    println!("details written to {}", config.out_dir.display());
    Ok(())
}
