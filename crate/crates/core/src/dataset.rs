//! Image-caption dataset manifest.
//!
//! The manifest is an ordered list of (image path, caption) pairs. Paths are
//! stored relative to a root directory; resolving and checking them is the
//! loader's job, so the in-memory type stays IO-free.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaptionedPair {
    #[serde(rename = "image")]
    pub image_path: String,
    pub caption: String,
}

impl CaptionedPair {
    pub fn new(image_path: impl Into<String>, caption: impl Into<String>) -> Self {
        CaptionedPair {
            image_path: image_path.into(),
            caption: caption.into(),
        }
    }
}

/// Ordered dataset manifest. Order is stable across load/save round trips;
/// every index-based report refers to this ordering.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct DatasetManifest {
    pub root: String,
    pairs: Vec<CaptionedPair>,
}

impl DatasetManifest {
    pub fn new(root: impl Into<String>, pairs: Vec<CaptionedPair>) -> Self {
        DatasetManifest {
            root: root.into(),
            pairs,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[CaptionedPair] {
        &self.pairs
    }

    pub fn pairs_mut(&mut self) -> &mut [CaptionedPair] {
        &mut self.pairs
    }

    pub fn push(&mut self, pair: CaptionedPair) {
        self.pairs.push(pair);
    }
}
