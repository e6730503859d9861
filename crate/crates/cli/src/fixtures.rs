//! Deterministic fixture datasets used by tests, benchmarks, and the
//! `gen-fixture` subcommand.
//!
//! The token corpus reproduces a known frequency profile: ten marker
//! tokens whose caption-containment frequencies span 0.009..=0.018 over
//! 1000 captions, pairwise disjoint in their occurrences, with all filler
//! vocabulary far outside that band. Selecting the band [0.009, 0.018]
//! therefore yields exactly the ten markers, and the pair {angel, church}
//! hits exactly 13 + 10 = 23 captions.

use std::path::{Path, PathBuf};

use tracemark_core::harness::procedural_render_cell;
use tracemark_core::{CaptionedPair, DatasetManifest, Seed};

use crate::error::CliResult;
use crate::manifest::{save_image, save_manifest};

/// (token, captions containing it) for the ten markers.
pub const MARKER_TOKENS: [(&str, usize); 10] = [
    ("angel", 13),
    ("bridge", 16),
    ("charles", 17),
    ("church", 10),
    ("infant", 10),
    ("lord", 9),
    ("maria", 18),
    ("palace", 10),
    ("peasants", 18),
    ("tavern", 17),
];

pub const TOKEN_CORPUS_SIZE: usize = 1000;

/// The frequency band that selects exactly the ten markers.
pub const MARKER_BAND: (f64, f64) = (0.009, 0.018);

/// The 1000 fixture captions. Marker captions are
/// `"<token> painted scene number <i>"`; fillers are
/// `"untitled composition number <i>"`. Shared filler words appear in far
/// more captions than the band's upper edge, and the running number in far
/// fewer than its lower edge, so the band isolates the markers.
pub fn token_corpus_captions() -> Vec<String> {
    let mut captions = Vec::with_capacity(TOKEN_CORPUS_SIZE);
    for (token, count) in MARKER_TOKENS {
        for _ in 0..count {
            let i = captions.len();
            captions.push(format!("{token} painted scene number {i}"));
        }
    }
    while captions.len() < TOKEN_CORPUS_SIZE {
        let i = captions.len();
        captions.push(format!("untitled composition number {i}"));
    }
    captions
}

fn write_corpus(
    dir: &Path,
    captions: &[String],
    image_size: usize,
    noise_cell: usize,
    seed: Seed,
) -> CliResult<PathBuf> {
    let render_seed = seed.derive("fixture-render");
    let mut manifest = DatasetManifest::new(dir.to_string_lossy(), Vec::new());
    std::fs::create_dir_all(dir.join("images")).map_err(anyhow::Error::from)?;
    for (i, caption) in captions.iter().enumerate() {
        let rel = format!("images/{i:04}.png");
        let img = procedural_render_cell(
            render_seed.derive_index(i as u64),
            image_size,
            image_size,
            noise_cell,
        );
        save_image(&img, &dir.join(&rel)).map_err(|e| anyhow::anyhow!(e))?;
        manifest.push(CaptionedPair::new(rel, caption.clone()));
    }
    let path = dir.join("manifest.jsonl");
    save_manifest(&manifest, &path).map_err(anyhow::Error::from)?;
    Ok(path)
}

/// Writes the 1000-pair token corpus under `dir` and returns the manifest
/// path. Images are small procedural renders; the captions carry the
/// frequency structure.
pub fn write_token_corpus(dir: &Path, image_size: usize, seed: Seed) -> CliResult<PathBuf> {
    write_corpus(dir, &token_corpus_captions(), image_size, 16, seed)
}

/// Writes an `n`-image corpus of `size x size` renders with neutral
/// captions for robustness runs. Content uses a wide noise cell so that
/// detail-band measurements see watermark survival rather than content
/// curvature.
pub fn write_robustness_corpus(
    dir: &Path,
    n: usize,
    size: usize,
    seed: Seed,
) -> CliResult<PathBuf> {
    let captions: Vec<String> = (0..n).map(|i| format!("study number {i}")).collect();
    write_corpus(dir, &captions, size, (size / 8).max(16), seed)
}
