//! Simulated suspected models and the multi-user tracking experiment.
//!
//! A [`SimulatedModel`] stands in for a diffusion model fine-tuned on a
//! watermarked release: prompts containing a trigger token yield a
//! watermark-carrying image with probability q (the trigger fidelity),
//! other prompts with probability r (the false rate). The watermark in
//! "generated" images is produced by the user's actual embedding scheme
//! applied to a procedural render, so the detector faces the genuine
//! feature distribution rather than a synthetic proxy.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::authorize::{InjectionReport, Ledger, LedgerEntry};
use crate::detect::{
    extract_features, train_detector, trace_leaker, Detector, LabeledSample, ModelOracle,
    ProbeConfig, TraceOutcome,
};
use crate::error::{Error, Result};
use crate::raster::Image;
use crate::seed::Seed;
use crate::tokens::{assign_token_sets, ActivationTokenSet, CandidatePool};
use crate::watermark::{
    AdversarialParams, DwtKey, GaussianParams, WatermarkScheme, DEFAULT_DWT_AMP,
};

pub const DEFAULT_RENDER_SIZE: usize = 128;

/// Seeded procedural base image: low-resolution value noise bilinearly
/// upsampled plus a directional ramp, kept inside `[0.15, 0.85]` so
/// embedding never saturates the clamp. Noise features span 16 pixels.
pub fn procedural_render(seed: Seed, width: usize, height: usize) -> Image {
    procedural_render_cell(seed, width, height, 16)
}

/// [`procedural_render`] with an explicit noise-cell size; larger cells
/// give smoother content.
pub fn procedural_render_cell(seed: Seed, width: usize, height: usize, cell: usize) -> Image {
    let cell = cell.max(1);
    let mut rng = seed.derive("render").rng();
    let gw = width / cell + 2;
    let gh = height / cell + 2;
    let mut grids = Vec::with_capacity(3);
    for _ in 0..3 {
        let grid: Vec<f64> = (0..gw * gh).map(|_| rng.gen::<f64>()).collect();
        grids.push(grid);
    }
    let angle = rng.gen::<f64>() * core::f64::consts::TAU;
    let (dx, dy) = (libm::cos(angle), libm::sin(angle));

    let mut pixels = Vec::with_capacity(width * height * 3);
    for y in 0..height {
        let gy = y as f64 / cell as f64;
        let y0 = gy as usize;
        let fy = gy - y0 as f64;
        let ramp_y = dy * (y as f64 / height.max(1) as f64 - 0.5);
        for x in 0..width {
            let gx = x as f64 / cell as f64;
            let x0 = gx as usize;
            let fx = gx - x0 as f64;
            let ramp = 0.5 + 0.5 * (dx * (x as f64 / width.max(1) as f64 - 0.5) + ramp_y);
            let base = 0.15 + 0.7 * 0.35 * ramp;
            for grid in &grids {
                let top = grid[y0 * gw + x0] * (1.0 - fx) + grid[y0 * gw + x0 + 1] * fx;
                let bottom =
                    grid[(y0 + 1) * gw + x0] * (1.0 - fx) + grid[(y0 + 1) * gw + x0 + 1] * fx;
                let noise = top * (1.0 - fy) + bottom * fy;
                pixels.push(base + 0.7 * 0.65 * noise);
            }
        }
    }
    Image::from_pixels(width, height, pixels).expect("sized by construction")
}

/// A backdoored generator with controllable trigger reliability.
#[derive(Clone, Debug)]
pub struct SimulatedModel {
    pub trigger_set: ActivationTokenSet,
    pub scheme: WatermarkScheme,
    pub base_seed: Seed,
    /// Probability a triggered prompt yields a watermark-carrying image.
    pub trigger_fidelity: f64,
    /// Probability a non-triggered prompt yields one anyway.
    pub false_rate: f64,
    pub render_width: usize,
    pub render_height: usize,
}

impl SimulatedModel {
    pub fn new(
        trigger_set: ActivationTokenSet,
        scheme: WatermarkScheme,
        base_seed: Seed,
        trigger_fidelity: f64,
        false_rate: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&trigger_fidelity)
            || !(0.0..=1.0).contains(&false_rate)
            || false_rate > trigger_fidelity
        {
            return Err(Error::BadDegradeParam {
                what: "require 0 <= r <= q <= 1",
            });
        }
        Ok(SimulatedModel {
            trigger_set,
            scheme,
            base_seed,
            trigger_fidelity,
            false_rate,
            render_width: DEFAULT_RENDER_SIZE,
            render_height: DEFAULT_RENDER_SIZE,
        })
    }

    pub fn with_render_size(mut self, width: usize, height: usize) -> Self {
        self.render_width = width;
        self.render_height = height;
        self
    }

    /// The base render this model would produce for `rng` before any
    /// watermark is applied. Lets a verifier compute informed scores.
    pub fn render_clean(&self, rng: Seed) -> Image {
        procedural_render(
            self.base_seed.combine(rng),
            self.render_width,
            self.render_height,
        )
    }
}

impl ModelOracle for SimulatedModel {
    fn generate(&self, prompt: &[String], rng: Seed) -> Image {
        let base = self.render_clean(rng);
        let triggered = self.trigger_set.intersects(prompt);
        let p = if triggered {
            self.trigger_fidelity
        } else {
            self.false_rate
        };
        let marked = match p {
            p if p <= 0.0 => false,
            p if p >= 1.0 => true,
            p => {
                let mut draw = self.base_seed.combine(rng).derive("mark-draw").rng();
                draw.gen::<f64>() < p
            }
        };
        if marked {
            self.scheme.embed(&base)
        } else {
            base
        }
    }
}

/// Per-user scheme family; instantiated with a fresh key seed per user.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchemeTemplate {
    Gaussian { mean: f64, sigma: f64 },
    Dwt { amp_low: f64, amp_high: f64 },
    Adversarial { eta: f64, steps: usize },
}

impl Default for SchemeTemplate {
    fn default() -> Self {
        SchemeTemplate::Dwt {
            amp_low: DEFAULT_DWT_AMP.0,
            amp_high: DEFAULT_DWT_AMP.1,
        }
    }
}

impl SchemeTemplate {
    pub fn instantiate(&self, seed: Seed) -> WatermarkScheme {
        match *self {
            SchemeTemplate::Gaussian { mean, sigma } => {
                WatermarkScheme::Gaussian(GaussianParams::new(mean, sigma, seed))
            }
            SchemeTemplate::Dwt { amp_low, amp_high } => {
                WatermarkScheme::Dwt(DwtKey::new(seed, amp_low, amp_high))
            }
            SchemeTemplate::Adversarial { eta, steps } => WatermarkScheme::Adversarial {
                params: AdversarialParams::new(eta, steps),
                operator_seed: seed,
            },
        }
    }
}

/// How the unified detector is trained inside an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorTrainConfig {
    /// Number of substitute keys the training renders are marked with. The
    /// source protocol leaves this count open; it is exposed here.
    pub substitute_models: usize,
    /// Marked/clean render pairs per substitute key.
    pub samples_per_model: usize,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for DetectorTrainConfig {
    fn default() -> Self {
        DetectorTrainConfig {
            substitute_models: 4,
            samples_per_model: 16,
            epochs: 150,
            learning_rate: 0.1,
        }
    }
}

/// Trains the unified detector on procedural renders: each substitute key
/// contributes marked (label 1) and clean (label 0) samples.
pub fn train_render_detector(
    template: &SchemeTemplate,
    config: &DetectorTrainConfig,
    render_width: usize,
    render_height: usize,
    seed: Seed,
) -> Result<(Detector, Vec<f64>)> {
    let key_seed = seed.derive("substitute-key");
    let render_seed = seed.derive("train-render");
    let mut samples = Vec::with_capacity(2 * config.substitute_models * config.samples_per_model);
    for m in 0..config.substitute_models {
        let scheme = template.instantiate(key_seed.derive_index(m as u64));
        for s in 0..config.samples_per_model {
            let idx = (m * config.samples_per_model + s) as u64;
            let base = procedural_render(render_seed.derive_index(idx), render_width, render_height);
            let marked = scheme.embed(&base);
            samples.push(LabeledSample {
                features: extract_features(&marked),
                label: 1,
            });
            samples.push(LabeledSample {
                features: extract_features(&base),
                label: 0,
            });
        }
    }
    train_detector(&samples, config.epochs, config.learning_rate)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Number of data users (T).
    pub users: usize,
    /// Minimum and maximum token-set size (L, R).
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub trigger_fidelity: f64,
    pub false_rate: f64,
    pub render_width: usize,
    pub render_height: usize,
    pub scheme: SchemeTemplate,
    pub probe: ProbeConfig,
    pub detector: DetectorTrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        // The desk-scale analog of the multi-user tracking setting:
        // T=100 users, sets of 2..=5 tokens, q/r chosen so the simulation
        // lands near the reference success regime.
        ExperimentConfig {
            users: 100,
            min_tokens: 2,
            max_tokens: 5,
            trigger_fidelity: 0.95,
            false_rate: 0.02,
            render_width: DEFAULT_RENDER_SIZE,
            render_height: DEFAULT_RENDER_SIZE,
            scheme: SchemeTemplate::default(),
            probe: ProbeConfig::default(),
            detector: DetectorTrainConfig::default(),
        }
    }
}

/// One user's row in a tracking report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserTraceRow {
    pub user_id: u64,
    pub tokens: Vec<String>,
    /// Sum of member token frequencies from the pool's source stats.
    pub total_frequency: f64,
    pub outcome: TraceOutcome,
    pub success: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackingReport {
    pub users: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub pool_size: usize,
    pub trigger_fidelity: f64,
    pub false_rate: f64,
    pub successes: usize,
    pub rows: Vec<UserTraceRow>,
}

/// Full multi-user tracking run: assign token sets, build one simulated
/// model per user, train the unified detector, trace every model, and
/// tally the users traced back to themselves.
pub fn run_tracking_experiment(
    pool: &CandidatePool,
    config: &ExperimentConfig,
    seed: Seed,
) -> Result<TrackingReport> {
    let sets = assign_token_sets(
        config.users,
        config.min_tokens,
        config.max_tokens,
        pool,
        seed.derive("assign"),
    )?;
    let (detector, _) = train_render_detector(
        &config.scheme,
        &config.detector,
        config.render_width,
        config.render_height,
        seed.derive("detector"),
    )?;

    let mut ledger = Ledger::new();
    for (t, set) in sets.iter().enumerate() {
        let user_id = (t + 1) as u64;
        ledger.push(LedgerEntry {
            user_id,
            token_set: set.clone(),
            scheme: config
                .scheme
                .instantiate(seed.derive("user-key").derive_index(user_id)),
            created: None,
            report: InjectionReport::new(Vec::new(), 0),
        })?;
    }

    let trace_seed = seed.derive("trace");
    let mut rows = Vec::with_capacity(config.users);
    let mut successes = 0usize;
    for entry in ledger.entries() {
        let model = SimulatedModel::new(
            entry.token_set.clone(),
            entry.scheme.clone(),
            seed.derive("model").derive_index(entry.user_id),
            config.trigger_fidelity,
            config.false_rate,
        )?
        .with_render_size(config.render_width, config.render_height);
        let report = trace_leaker(
            &model,
            pool,
            &ledger,
            &detector,
            &config.probe,
            trace_seed.derive_index(entry.user_id),
        )?;
        let success = report.outcome
            == TraceOutcome::Traced {
                user_id: entry.user_id,
            };
        if success {
            successes += 1;
        }
        rows.push(UserTraceRow {
            user_id: entry.user_id,
            tokens: entry.token_set.tokens().to_vec(),
            total_frequency: pool.total_frequency(entry.token_set.tokens()),
            outcome: report.outcome,
            success,
        });
    }

    Ok(TrackingReport {
        users: config.users,
        min_tokens: config.min_tokens,
        max_tokens: config.max_tokens,
        pool_size: pool.len(),
        trigger_fidelity: config.trigger_fidelity,
        false_rate: config.false_rate,
        successes,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokens::TokenKind;
    use crate::watermark::dwt_score;
    use alloc::string::ToString;
    use alloc::vec;

    fn trigger_set(tokens: &[&str]) -> ActivationTokenSet {
        ActivationTokenSet::new(
            tokens.iter().map(|t| t.to_string()).collect(),
            TokenKind::Combination,
        )
        .unwrap()
    }

    fn dwt_scheme(seed: u64) -> WatermarkScheme {
        WatermarkScheme::Dwt(DwtKey::new(
            Seed::new(seed),
            DEFAULT_DWT_AMP.0,
            DEFAULT_DWT_AMP.1,
        ))
    }

    fn words(tokens: &[&str]) -> Vec<String> {
        tokens.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn render_is_deterministic_and_has_headroom() {
        let a = procedural_render(Seed::new(1), 64, 64);
        let b = procedural_render(Seed::new(1), 64, 64);
        assert_eq!(a, b);
        assert!(a.pixels().iter().all(|&p| (0.1..=0.9).contains(&p)));
        assert_ne!(a, procedural_render(Seed::new(2), 64, 64));
    }

    #[test]
    fn certain_trigger_always_carries_the_watermark() {
        let model = SimulatedModel::new(
            trigger_set(&["angel"]),
            dwt_scheme(3),
            Seed::new(4),
            1.0,
            0.0,
        )
        .unwrap()
        .with_render_size(64, 64);
        let key = match &model.scheme {
            WatermarkScheme::Dwt(k) => *k,
            _ => unreachable!(),
        };
        for i in 0..5 {
            let rng = Seed::new(100 + i);
            let out = model.generate(&words(&["angel", "painting"]), rng);
            let clean = model.render_clean(rng);
            let score = dwt_score(&out, Some(&clean), &key).unwrap();
            assert!(score >= 0.99, "score {score}");
        }
    }

    #[test]
    fn clean_prompt_never_marks_at_zero_false_rate() {
        let model = SimulatedModel::new(
            trigger_set(&["angel"]),
            dwt_scheme(5),
            Seed::new(6),
            1.0,
            0.0,
        )
        .unwrap()
        .with_render_size(64, 64);
        for i in 0..5 {
            let rng = Seed::new(200 + i);
            assert_eq!(model.generate(&words(&["tavern"]), rng), model.render_clean(rng));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let model = SimulatedModel::new(
            trigger_set(&["angel"]),
            dwt_scheme(7),
            Seed::new(8),
            0.6,
            0.1,
        )
        .unwrap()
        .with_render_size(32, 32);
        let prompt = words(&["angel"]);
        assert_eq!(
            model.generate(&prompt, Seed::new(9)),
            model.generate(&prompt, Seed::new(9))
        );
    }

    #[test]
    fn marking_rate_concentrates_around_fidelity() {
        // Binomial concentration oracle: over n triggered calls the marked
        // fraction stays within 3*sqrt(q(1-q)/n) of q.
        let q = 0.95;
        let n = 10_000usize;
        let model = SimulatedModel::new(
            trigger_set(&["angel"]),
            dwt_scheme(10),
            Seed::new(11),
            q,
            0.0,
        )
        .unwrap()
        .with_render_size(16, 16);
        let prompt = words(&["angel"]);
        let mut marked = 0usize;
        for i in 0..n {
            let rng = Seed::new(1000).derive_index(i as u64);
            if model.generate(&prompt, rng) != model.render_clean(rng) {
                marked += 1;
            }
        }
        let rate = marked as f64 / n as f64;
        let bound = 3.0 * libm::sqrt(q * (1.0 - q) / n as f64);
        assert!((rate - q).abs() <= bound, "rate {rate}, bound {bound}");
    }

    #[test]
    fn invalid_rates_are_rejected() {
        assert!(SimulatedModel::new(
            trigger_set(&["a"]),
            dwt_scheme(1),
            Seed::new(1),
            0.5,
            0.9
        )
        .is_err());
        assert!(SimulatedModel::new(
            trigger_set(&["a"]),
            dwt_scheme(1),
            Seed::new(1),
            1.2,
            0.0
        )
        .is_err());
    }

    fn test_pool() -> CandidatePool {
        CandidatePool::new(
            words(&[
                "angel", "bridge", "charles", "church", "infant", "lord", "maria", "palace",
                "peasants", "tavern",
            ]),
            vec![
                0.013, 0.016, 0.017, 0.010, 0.010, 0.009, 0.018, 0.010, 0.018, 0.017,
            ],
        )
        .unwrap()
    }

    fn small_config(users: usize, q: f64, r: f64) -> ExperimentConfig {
        ExperimentConfig {
            users,
            min_tokens: 2,
            max_tokens: 4,
            trigger_fidelity: q,
            false_rate: r,
            render_width: 48,
            render_height: 48,
            detector: DetectorTrainConfig {
                substitute_models: 3,
                samples_per_model: 8,
                ..DetectorTrainConfig::default()
            },
            probe: ProbeConfig {
                generations: 8,
                ..ProbeConfig::default()
            },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn perfect_world_traces_every_user() {
        let report = run_tracking_experiment(&test_pool(), &small_config(10, 1.0, 0.0), Seed::new(12))
            .unwrap();
        assert_eq!(report.successes, 10);
        assert!(report.rows.iter().all(|r| r.success));
    }

    #[test]
    fn experiment_is_reproducible() {
        let config = small_config(6, 0.9, 0.05);
        let a = run_tracking_experiment(&test_pool(), &config, Seed::new(13)).unwrap();
        let b = run_tracking_experiment(&test_pool(), &config, Seed::new(13)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn saturated_false_rate_triggers_everything() {
        // With r = q = 1 every pool token triggers, so every trace sees the
        // full pool and can only match a user whose set is the whole pool.
        let mut config = small_config(5, 1.0, 1.0);
        config.min_tokens = 2;
        config.max_tokens = 3;
        let report = run_tracking_experiment(&test_pool(), &config, Seed::new(14)).unwrap();
        assert_eq!(report.successes, 0);
        for row in &report.rows {
            match &row.outcome {
                TraceOutcome::NoLedgerMatch { triggered } => {
                    assert_eq!(triggered.len(), test_pool().len());
                }
                other => panic!("unexpected outcome {other:?}"),
            }
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn tracking_success_is_monotone_in_fidelity_and_false_rate() {
        // 3x3 grid of (q, r); means over 20 seeded runs per cell. Every
        // cell must satisfy r <= q, so the smallest q dominates the
        // largest r.
        let qs = [0.5, 0.75, 1.0];
        let rs = [0.0, 0.2, 0.4];
        let runs = 20;
        let mut mean = [[0.0f64; 3]; 3];
        for (qi, &q) in qs.iter().enumerate() {
            for (ri, &r) in rs.iter().enumerate() {
                let config = small_config(6, q, r);
                let mut total = 0usize;
                for run in 0..runs {
                    let report =
                        run_tracking_experiment(&test_pool(), &config, Seed::new(500 + run))
                            .unwrap();
                    total += report.successes;
                }
                mean[qi][ri] = total as f64 / runs as f64;
            }
        }
        for ri in 0..3 {
            assert!(
                mean[0][ri] <= mean[1][ri] + 1e-9 && mean[1][ri] <= mean[2][ri] + 1e-9,
                "not monotone in q at r index {ri}: {:?}",
                [mean[0][ri], mean[1][ri], mean[2][ri]]
            );
        }
        for qi in 0..3 {
            assert!(
                mean[qi][0] + 1e-9 >= mean[qi][1] && mean[qi][1] + 1e-9 >= mean[qi][2],
                "not monotone in r at q index {qi}: {:?}",
                mean[qi]
            );
        }
    }
}
