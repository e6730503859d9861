//! Dataset-watermarking and leak-tracing primitives.
//!
//! An image-caption dataset owner assigns each data user a unique set of
//! activation tokens, embeds a matching imperceptible watermark into the
//! images whose captions carry those tokens, and records the binding in a
//! ledger. A model fine-tuned on a leaked release reproduces the watermark
//! feature whenever a prompt contains the user's tokens; probing a
//! suspected model with every candidate token and matching the triggered
//! set against the ledger attributes the leak.
//!
//! This crate holds the algorithmic core: image raster and metrics, Haar
//! wavelet analysis, the three embedding schemes, token frequency and
//! assignment machinery, release planning, detector training, the tracing
//! protocol, robustness degradations, and a simulated backdoored-model
//! harness. It is `no_std`-compatible (with `alloc`); file formats, PNG
//! IO, and the command-line surface live in the companion `tracemark`
//! crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod authorize;
pub mod dataset;
pub mod degrade;
pub mod detect;
pub mod error;
pub mod harness;
pub mod matrix;
pub mod raster;
pub mod seed;
pub mod surrogate;
pub mod tokens;
pub mod watermark;
pub mod wavelet;

pub use authorize::{inject_twa, waa_report, InjectionReport, Ledger, LedgerEntry, TwaSelection};
pub use dataset::{CaptionedPair, DatasetManifest};
pub use degrade::{apply_degradation, DegradeSpec};
pub use detect::{
    bce_loss, extract_features, probe_token, trace_leaker, train_detector, Detector,
    LabeledSample, ModelOracle, ProbeConfig, TraceOutcome, TraceReport,
};
pub use error::{Error, Result};
pub use harness::{
    procedural_render, run_tracking_experiment, ExperimentConfig, SchemeTemplate, SimulatedModel,
    TrackingReport,
};
pub use matrix::Matrix;
pub use raster::{clamp_unit, psnr, Image};
pub use seed::Seed;
pub use surrogate::SurrogateModel;
pub use tokens::{
    assign_token_sets, construct_new_token, select_preexisting, token_frequencies, tokenize,
    ActivationTokenSet, CandidatePool, TokenKind, TokenStats,
};
pub use watermark::{
    dwt_score, embed_adversarial, embed_dwt, embed_gaussian, AdversarialParams, DwtKey,
    GaussianParams, WatermarkScheme,
};
pub use wavelet::{dwt2_haar, idwt2_haar, SubbandSet};
