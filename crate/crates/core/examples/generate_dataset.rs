//! Writes the synthetic leveled corpus, aligned pairs and embeddings.
//!
//! Usage: `cargo run --release --example generate_dataset -- DIR [SEED]`

use lexsimp::synthetic::{write_dataset, SyntheticConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let dir = args.next().unwrap_or_else(|| "data/desk".to_string());
    let mut config = SyntheticConfig::default();
    if let Some(seed) = args.next() {
        config.seed = seed.parse().expect("seed must be an integer");
    }
    match write_dataset(&dir, &config) {
        Ok(files) => println!("wrote {}", files.corpus.parent().unwrap_or(files.corpus.as_path()).display()),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
