//! Regenerates the bundled synthetic corpus under `data/synthetic/`.
//!
//! Usage: `cargo run --example gen_synthetic [-- OUT_DIR]`

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use concept_forge::synthetic::{generate, SyntheticConfig};

fn main() -> std::io::Result<()> {
    let out = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic"));
    std::fs::create_dir_all(&out)?;
    let corpus = generate(&SyntheticConfig::default());
    corpus.write_jsonl(BufWriter::new(File::create(out.join("corpus.jsonl"))?))?;
    std::fs::write(out.join("vocab.tsv"), corpus.vocabulary_tsv())?;
    println!("{} papers, {} concepts -> {}", corpus.papers.len(), corpus.concepts.len(), out.display());
    Ok(())
}
