//! Caption tokenization, frequency analysis, and activation-token
//! assignment.
//!
//! Frequency is the caption-containment fraction: a token counts once per
//! caption no matter how often it repeats inside it. That matches the
//! trigger semantics downstream, where a caption activates a token set iff
//! it contains at least one member.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetManifest;
use crate::error::{Error, Result};
use crate::seed::Seed;

/// Lowercases and splits on runs of non-alphanumeric characters.
pub fn tokenize(caption: &str) -> Vec<String> {
    caption
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Per-token caption-containment statistics for one corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenStats {
    counts: BTreeMap<String, usize>,
    captions: usize,
}

impl TokenStats {
    pub fn from_counts(counts: BTreeMap<String, usize>, captions: usize) -> Self {
        TokenStats { counts, captions }
    }

    /// Number of captions containing the token.
    pub fn count(&self, token: &str) -> usize {
        self.counts.get(token).copied().unwrap_or(0)
    }

    /// Fraction of captions containing the token; 0 for absent tokens.
    pub fn frequency(&self, token: &str) -> f64 {
        self.count(token) as f64 / self.captions as f64
    }

    pub fn contains(&self, token: &str) -> bool {
        self.counts.contains_key(token)
    }

    pub fn captions(&self) -> usize {
        self.captions
    }

    pub fn vocabulary_len(&self) -> usize {
        self.counts.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.counts.iter().map(|(t, &c)| (t.as_str(), c))
    }
}

/// Counts caption containment for every token in the manifest.
pub fn token_frequencies(manifest: &DatasetManifest) -> Result<TokenStats> {
    if manifest.is_empty() {
        return Err(Error::EmptyManifest);
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for pair in manifest.pairs() {
        let unique: BTreeSet<String> = tokenize(&pair.caption).into_iter().collect();
        for token in unique {
            *counts.entry(token).or_insert(0) += 1;
        }
    }
    Ok(TokenStats {
        counts,
        captions: manifest.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    NewToken,
    PreExisting,
    Combination,
}

/// A user's activation token set. Tokens are held sorted and deduplicated
/// so set equality is plain slice equality.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivationTokenSet {
    tokens: Vec<String>,
    pub kind: TokenKind,
}

impl ActivationTokenSet {
    pub fn new(tokens: Vec<String>, kind: TokenKind) -> Result<Self> {
        let canonical: BTreeSet<String> = tokens.into_iter().collect();
        if canonical.is_empty() {
            return Err(Error::EmptyTokenSet);
        }
        Ok(ActivationTokenSet {
            tokens: canonical.into_iter().collect(),
            kind,
        })
    }

    pub fn single(token: impl Into<String>, kind: TokenKind) -> Result<Self> {
        Self::new(alloc::vec![token.into()], kind)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// True iff any member appears among `words`.
    pub fn intersects(&self, words: &[String]) -> bool {
        words.iter().any(|w| self.tokens.binary_search(w).is_ok())
    }

    /// Set equality against an arbitrary token list (order and duplicates
    /// ignored).
    pub fn matches(&self, other: &[String]) -> bool {
        let canonical: BTreeSet<&String> = other.iter().collect();
        canonical.len() == self.tokens.len()
            && self.tokens.iter().all(|t| canonical.contains(t))
    }
}

/// The candidate pool S: tokens eligible as activation-set members, with
/// their source frequencies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidatePool {
    tokens: Vec<String>,
    frequencies: Vec<f64>,
}

impl CandidatePool {
    pub fn new(tokens: Vec<String>, frequencies: Vec<f64>) -> Result<Self> {
        if tokens.len() != frequencies.len() {
            return Err(Error::LengthMismatch {
                left: tokens.len(),
                right: frequencies.len(),
            });
        }
        Ok(CandidatePool {
            tokens,
            frequencies,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn frequency_of(&self, token: &str) -> Option<f64> {
        self.tokens
            .iter()
            .position(|t| t == token)
            .map(|i| self.frequencies[i])
    }

    /// Sum of member frequencies. Equals the combined caption-containment
    /// fraction only when member occurrences are disjoint.
    pub fn total_frequency(&self, members: &[String]) -> f64 {
        members
            .iter()
            .map(|t| self.frequency_of(t).unwrap_or(0.0))
            .sum()
    }
}

/// The k tokens whose frequency lies in `[f_min, f_max]`, ordered by
/// (frequency, then lexicographic).
pub fn select_preexisting(
    stats: &TokenStats,
    f_min: f64,
    f_max: f64,
    k: usize,
) -> Result<CandidatePool> {
    debug_assert!(f_min <= f_max);
    let mut in_band: Vec<(&str, f64)> = stats
        .iter()
        .map(|(t, c)| (t, c as f64 / stats.captions() as f64))
        .filter(|&(_, f)| f >= f_min && f <= f_max)
        .collect();
    if in_band.len() < k {
        return Err(Error::InsufficientCandidates {
            found: in_band.len(),
            requested: k,
        });
    }
    in_band.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then_with(|| a.0.cmp(b.0)));
    in_band.truncate(k);
    let (tokens, frequencies): (Vec<String>, Vec<f64>) = in_band
        .into_iter()
        .map(|(t, f)| (String::from(t), f))
        .unzip();
    CandidatePool::new(tokens, frequencies)
}

const NEW_TOKEN_ATTEMPTS: usize = 10_000;

/// A fresh 3-5 letter lowercase token guaranteed absent from the
/// vocabulary, by rejection sampling. Deterministic in the seed.
pub fn construct_new_token(seed: Seed, vocabulary: &TokenStats) -> Result<String> {
    let mut rng = seed.derive("new-token").rng();
    for _ in 0..NEW_TOKEN_ATTEMPTS {
        let len = rng.gen_range(3..=5usize);
        let token: String = (0..len)
            .map(|_| char::from(b'a' + rng.gen_range(0..26u8)))
            .collect();
        if !vocabulary.contains(&token) {
            return Ok(token);
        }
    }
    Err(Error::ExhaustedAttempts {
        attempts: NEW_TOKEN_ATTEMPTS,
    })
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i + 1) as u128;
    }
    acc
}

/// Number of distinct subsets with size in `[min_size, max_size]`.
pub fn pool_capacity(pool_len: usize, min_size: usize, max_size: usize) -> u128 {
    (min_size..=max_size)
        .map(|k| binomial(pool_len, k))
        .fold(0u128, u128::saturating_add)
}

/// Assigns `users` pairwise-distinct activation token sets, each of a size
/// drawn uniformly from `[min_size, max_size]`, members drawn uniformly
/// without replacement from the pool. Repeat-until-fresh rejection keeps
/// the draw faithful to the distribution; a hard cap of `100 * users`
/// attempts turns near-capacity livelock into an error.
pub fn assign_token_sets(
    users: usize,
    min_size: usize,
    max_size: usize,
    pool: &CandidatePool,
    seed: Seed,
) -> Result<Vec<ActivationTokenSet>> {
    if min_size == 0 || min_size > max_size || max_size > pool.len() {
        return Err(Error::InvalidBounds {
            min: min_size,
            max: max_size,
            pool: pool.len(),
        });
    }
    let capacity = pool_capacity(pool.len(), min_size, max_size);
    if (users as u128) > capacity {
        return Err(Error::PoolTooSmall {
            capacity,
            requested: users,
        });
    }

    let mut rng = seed.derive("assign-token-sets").rng();
    let mut seen: BTreeSet<Vec<String>> = BTreeSet::new();
    let mut out = Vec::with_capacity(users);
    let mut attempts = 0usize;
    let cap = 100 * users.max(1);
    let mut indices: Vec<usize> = (0..pool.len()).collect();

    while out.len() < users {
        attempts += 1;
        if attempts > cap {
            return Err(Error::ExhaustedAttempts { attempts: cap });
        }
        let size = rng.gen_range(min_size..=max_size);
        // Partial Fisher-Yates: the first `size` slots become the sample.
        for i in 0..size {
            let j = rng.gen_range(i..indices.len());
            indices.swap(i, j);
        }
        let mut tokens: Vec<String> = indices[..size]
            .iter()
            .map(|&i| pool.tokens()[i].clone())
            .collect();
        tokens.sort();
        if seen.insert(tokens.clone()) {
            let kind = if tokens.len() == 1 {
                TokenKind::PreExisting
            } else {
                TokenKind::Combination
            };
            out.push(ActivationTokenSet { tokens, kind });
        }
    }
    Ok(out)
}
