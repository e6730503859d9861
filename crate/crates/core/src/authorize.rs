//! Per-user release planning and the authorization ledger.
//!
//! Two release strategies:
//!
//! * WAA leaves every caption untouched and watermarks exactly the images
//!   whose captions already contain a member of the user's token set.
//! * TWA picks M pairs, prefixes each caption with the activation token,
//!   and watermarks the paired images.
//!
//! Planning is pure: it decides which indices change and how captions read
//! afterwards. Applying the plan to image files is the IO layer's job.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetManifest;
use crate::error::{Error, Result};
use crate::raster::Image;
use crate::seed::Seed;
use crate::tokens::{tokenize, ActivationTokenSet};
use crate::watermark::WatermarkScheme;

/// Injection accounting for one release: which pairs were modified out of
/// how many.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectionReport {
    #[serde(rename = "M")]
    pub modified: usize,
    #[serde(rename = "N")]
    pub total: usize,
    /// Injection ratio p = M/N.
    pub p: f64,
    pub modified_indices: Vec<usize>,
}

impl InjectionReport {
    pub fn new(mut modified_indices: Vec<usize>, total: usize) -> Self {
        modified_indices.sort_unstable();
        modified_indices.dedup();
        InjectionReport {
            modified: modified_indices.len(),
            total,
            p: modified_indices.len() as f64 / total as f64,
            modified_indices,
        }
    }

    pub fn is_modified(&self, index: usize) -> bool {
        self.modified_indices.binary_search(&index).is_ok()
    }
}

/// Indices whose captions contain at least one member of the token set.
/// Captions are never altered by a WAA release; a caption holding several
/// members still counts once.
pub fn waa_report(manifest: &DatasetManifest, token_set: &ActivationTokenSet) -> InjectionReport {
    let indices = manifest
        .pairs()
        .iter()
        .enumerate()
        .filter(|(_, pair)| token_set.intersects(&tokenize(&pair.caption)))
        .map(|(i, _)| i)
        .collect();
    InjectionReport::new(indices, manifest.len())
}

/// How TWA picks the M pairs to modify.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwaSelection {
    /// Uniform without replacement from the seed.
    Uniform,
    /// The first M pairs in manifest order.
    FirstM,
}

/// Prefixes M captions with the activation token and reports which pairs
/// carry the watermark. Returns the released manifest (all pairs, chosen
/// captions rewritten as `"<token>, <original>"`).
pub fn inject_twa(
    manifest: &DatasetManifest,
    token: &str,
    m: usize,
    selection: TwaSelection,
    seed: Seed,
) -> Result<(DatasetManifest, InjectionReport)> {
    let n = manifest.len();
    if m > n {
        return Err(Error::MTooLarge { m, n });
    }
    let indices: Vec<usize> = match selection {
        TwaSelection::FirstM => (0..m).collect(),
        TwaSelection::Uniform => {
            let mut rng = seed.derive("twa-select").rng();
            let mut all: Vec<usize> = (0..n).collect();
            for i in 0..m {
                let j = rng.gen_range(i..n);
                all.swap(i, j);
            }
            all.truncate(m);
            all
        }
    };
    let report = InjectionReport::new(indices, n);
    let mut released = manifest.clone();
    for &i in &report.modified_indices {
        let caption = &mut released.pairs_mut()[i].caption;
        *caption = format!("{token}, {caption}");
    }
    Ok((released, report))
}

/// Watermarks the images at the report's modified indices; everything else
/// passes through untouched. In-memory counterpart of a release pipeline.
pub fn watermark_selected(
    images: &[Image],
    report: &InjectionReport,
    scheme: &WatermarkScheme,
) -> Vec<Image> {
    images
        .iter()
        .enumerate()
        .map(|(i, img)| {
            if report.is_modified(i) {
                scheme.embed(img)
            } else {
                img.clone()
            }
        })
        .collect()
}

/// One authorization: the binding between a data user, their activation
/// token set, and the watermark key used for their release.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub user_id: u64,
    #[serde(flatten)]
    pub token_set: ActivationTokenSet,
    pub scheme: WatermarkScheme,
    pub created: Option<String>,
    pub report: InjectionReport,
}

/// Append-only record of every release. User ids are unique; tracing
/// additionally requires token sets to be pairwise distinct.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Ledger {
    entries: Vec<LedgerEntry>,
}

impl Ledger {
    pub fn new() -> Self {
        Ledger::default()
    }

    pub fn from_entries(entries: Vec<LedgerEntry>) -> Result<Self> {
        let mut ledger = Ledger::new();
        for entry in entries {
            ledger.push(entry)?;
        }
        Ok(ledger)
    }

    pub fn push(&mut self, entry: LedgerEntry) -> Result<()> {
        if self.entries.iter().any(|e| e.user_id == entry.user_id) {
            return Err(Error::DuplicateUser {
                user_id: entry.user_id,
            });
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, user_id: u64) -> Option<&LedgerEntry> {
        self.entries.iter().find(|e| e.user_id == user_id)
    }

    /// Tracing precondition: no two users share a token set.
    pub fn check_distinct_token_sets(&self) -> Result<()> {
        let mut seen = alloc::collections::BTreeSet::new();
        for entry in &self.entries {
            if !seen.insert(entry.token_set.tokens().to_vec()) {
                return Err(Error::NonDistinctLedger);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::CaptionedPair;
    use crate::tokens::TokenKind;
    use crate::watermark::{DwtKey, DEFAULT_DWT_AMP};
    use alloc::string::ToString;
    use alloc::vec;

    fn manifest_of(captions: &[String]) -> DatasetManifest {
        DatasetManifest::new(
            "",
            captions
                .iter()
                .enumerate()
                .map(|(i, c)| CaptionedPair::new(format!("img/{i}.png"), c.clone()))
                .collect(),
        )
    }

    fn table4_like_corpus() -> DatasetManifest {
        // 13 captions with "angel", 10 with "church", disjointly; 977 fillers.
        let mut captions = Vec::new();
        for i in 0..1000usize {
            let c = if i < 13 {
                format!("angel painted scene number {i}")
            } else if i < 23 {
                format!("church painted scene number {i}")
            } else {
                format!("untitled composition number {i}")
            };
            captions.push(c);
        }
        manifest_of(&captions)
    }

    fn set_of(tokens: &[&str]) -> ActivationTokenSet {
        ActivationTokenSet::new(
            tokens.iter().map(|t| t.to_string()).collect(),
            TokenKind::Combination,
        )
        .unwrap()
    }

    #[test]
    fn waa_with_disjoint_tokens_modifies_nothing() {
        let m = table4_like_corpus();
        let report = waa_report(&m, &set_of(&["zebra"]));
        assert_eq!(report.modified, 0);
        assert_eq!(report.p, 0.0);
    }

    #[test]
    fn waa_counts_disjoint_occurrences_exactly() {
        let m = table4_like_corpus();
        let report = waa_report(&m, &set_of(&["angel", "church"]));

        // Scan oracle: count captions containing either token.
        let expected: Vec<usize> = m
            .pairs()
            .iter()
            .enumerate()
            .filter(|(_, p)| {
                let words = tokenize(&p.caption);
                words.iter().any(|w| w == "angel" || w == "church")
            })
            .map(|(i, _)| i)
            .collect();
        assert_eq!(expected.len(), 23);
        assert_eq!(report.modified, 23);
        assert_eq!(report.p, 0.023);
        assert_eq!(report.modified_indices, expected);
    }

    #[test]
    fn waa_counts_a_caption_with_both_tokens_once() {
        let m = manifest_of(&[
            "angel and church together".to_string(),
            "nothing here".to_string(),
        ]);
        let report = waa_report(&m, &set_of(&["angel", "church"]));
        assert_eq!(report.modified, 1);
        assert_eq!(report.modified_indices, vec![0]);
    }

    #[test]
    fn twa_zero_is_identity() {
        let m = table4_like_corpus();
        let (released, report) = inject_twa(&m, "lgl", 0, TwaSelection::Uniform, Seed::new(1)).unwrap();
        assert_eq!(released, m);
        assert_eq!(report.modified, 0);
    }

    #[test]
    fn twa_low_ratio_accounting() {
        let m = table4_like_corpus();
        let (released, report) =
            inject_twa(&m, "lgl", 16, TwaSelection::Uniform, Seed::new(2)).unwrap();
        assert_eq!(report.modified, 16);
        assert_eq!(report.p, 0.016);
        let changed = released
            .pairs()
            .iter()
            .zip(m.pairs())
            .filter(|(a, b)| a.caption != b.caption)
            .count();
        assert_eq!(changed, 16);
        for &i in &report.modified_indices {
            assert!(released.pairs()[i].caption.starts_with("lgl, "));
        }
    }

    #[test]
    fn twa_prefixes_with_comma_space() {
        let m = manifest_of(&["interior of a tavern with violin player".to_string()]);
        let (released, _) = inject_twa(&m, "lgl", 1, TwaSelection::FirstM, Seed::new(3)).unwrap();
        assert_eq!(
            released.pairs()[0].caption,
            "lgl, interior of a tavern with violin player"
        );
    }

    #[test]
    fn twa_first_m_takes_manifest_prefix() {
        let m = table4_like_corpus();
        let (_, report) = inject_twa(&m, "lgl", 8, TwaSelection::FirstM, Seed::new(4)).unwrap();
        assert_eq!(report.modified_indices, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn twa_rejects_oversized_m() {
        let m = manifest_of(&["a".to_string()]);
        assert!(matches!(
            inject_twa(&m, "lgl", 2, TwaSelection::Uniform, Seed::new(5)),
            Err(Error::MTooLarge { m: 2, n: 1 })
        ));
    }

    #[test]
    fn twa_uniform_selection_is_reproducible_and_unique() {
        let m = table4_like_corpus();
        let (_, a) = inject_twa(&m, "lgl", 50, TwaSelection::Uniform, Seed::new(6)).unwrap();
        let (_, b) = inject_twa(&m, "lgl", 50, TwaSelection::Uniform, Seed::new(6)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.modified_indices.len(), 50);
        assert!(a.modified_indices.iter().all(|&i| i < 1000));
    }

    #[test]
    fn watermark_selected_touches_only_reported_indices() {
        let images: Vec<Image> = (0..4).map(|_| Image::filled(8, 8, 0.5)).collect();
        let report = InjectionReport::new(vec![1, 3], 4);
        let scheme = WatermarkScheme::Dwt(DwtKey::new(
            Seed::new(7),
            DEFAULT_DWT_AMP.0,
            DEFAULT_DWT_AMP.1,
        ));
        let released = watermark_selected(&images, &report, &scheme);
        for (i, (orig, out)) in images.iter().zip(released.iter()).enumerate() {
            if report.is_modified(i) {
                assert_ne!(orig, out);
            } else {
                assert_eq!(orig, out);
            }
        }
    }

    #[test]
    fn report_ratio_is_exact() {
        let report = InjectionReport::new(vec![0, 5, 9], 10);
        assert_eq!(report.p, 3.0 / 10.0);
        assert_eq!(report.modified, report.modified_indices.len());
    }

    fn entry(user_id: u64, tokens: &[&str]) -> LedgerEntry {
        LedgerEntry {
            user_id,
            token_set: set_of(tokens),
            scheme: WatermarkScheme::Dwt(DwtKey::new(Seed::new(user_id), 0.0, 0.02)),
            created: None,
            report: InjectionReport::new(vec![], 10),
        }
    }

    #[test]
    fn ledger_rejects_duplicate_users() {
        let mut ledger = Ledger::new();
        ledger.push(entry(7, &["angel"])).unwrap();
        assert!(matches!(
            ledger.push(entry(7, &["church"])),
            Err(Error::DuplicateUser { user_id: 7 })
        ));
        assert_eq!(ledger.len(), 1);
    }

    #[test]
    fn ledger_detects_shared_token_sets() {
        let ledger =
            Ledger::from_entries(vec![entry(1, &["angel", "church"]), entry(2, &["church", "angel"])])
                .unwrap();
        assert!(matches!(
            ledger.check_distinct_token_sets(),
            Err(Error::NonDistinctLedger)
        ));
    }
}
