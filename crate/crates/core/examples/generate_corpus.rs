//! Writes the synthetic ten-keyword corpus and prints its split sizes.
//!
//! ```text
//! cargo run --release --example generate_corpus -- /tmp/bbaudio-corpus
//! ```

use bbaudio::dataset::{ensure_corpus, Split};

fn main() -> bbaudio::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "bbaudio-corpus".into());
    let manifest = ensure_corpus(7, 100, &dir)?;
    for split in [Split::Train, Split::Dev, Split::Eval] {
        println!("{split:?}: {} clips", manifest.count(split));
    }
    let (clip, label) = &manifest.load_split(Split::Eval)?[0];
    println!(
        "first eval clip {} label {label}, {} samples",
        clip.id(),
        clip.samples().len()
    );
    Ok(())
}
