//! Regenerates `data/sample_dataset.jsonl`: human paragraphs from the
//! sample corpus against text sampled from a trigram model trained on the
//! other half of it.
//!
//!     cargo run --release --example make_sample_dataset [OUT]

use std::path::PathBuf;

use specter::synthetic::{build_synthetic, SyntheticConfig};

fn main() -> specter::Result<()> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data");
    let out = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| root.join("sample_dataset.jsonl"));
    let corpus = std::fs::read_to_string(root.join("sample_corpus.txt"))?;
    let config = SyntheticConfig {
        train: 80,
        val: 40,
        test: 60,
        min_tokens: 120,
        max_tokens: 260,
        domains: vec!["alpha".into(), "beta".into()],
        seed: 7,
    };
    let bench = build_synthetic(&corpus, &config)?;
    bench.dataset.write_jsonl(&out)?;
    eprintln!("wrote {} documents to {}", bench.dataset.len(), out.display());
    Ok(())
}
