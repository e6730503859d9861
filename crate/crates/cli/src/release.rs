//! Release pipelines: write per-user watermarked datasets and degraded
//! copies of existing releases. Originals are never touched; every release
//! is a fresh directory with its own manifest.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use tracemark_core::authorize::InjectionReport;
use tracemark_core::degrade::{apply_degradation, DegradeSpec};
use tracemark_core::tokens::ActivationTokenSet;
use tracemark_core::watermark::WatermarkScheme;
use tracemark_core::{inject_twa, waa_report, DatasetManifest, Seed, TwaSelection};

use crate::error::{CliError, CliResult};
use crate::manifest::{load_image, resolve_image_path, save_image, save_manifest};

/// Refuses to reuse a non-empty directory unless forced; with `force` the
/// directory is cleared first.
pub fn prepare_output_dir(dir: &Path, force: bool) -> CliResult<()> {
    if dir.exists() {
        let occupied = dir
            .read_dir()
            .map_err(anyhow::Error::from)?
            .next()
            .is_some();
        if occupied {
            if !force {
                return Err(CliError::OutputConflict(format!(
                    "{} already exists; pass --force to overwrite",
                    dir.display()
                )));
            }
            fs::remove_dir_all(dir).map_err(anyhow::Error::from)?;
        }
    }
    fs::create_dir_all(dir).map_err(anyhow::Error::from)?;
    Ok(())
}

/// Copies or watermarks each image into the release directory. Unmodified
/// pairs are byte-identical copies of the source files.
fn write_release_images(
    source: &DatasetManifest,
    released: &DatasetManifest,
    report: &InjectionReport,
    scheme: &WatermarkScheme,
    out_dir: &Path,
) -> CliResult<()> {
    source
        .pairs()
        .par_iter()
        .enumerate()
        .try_for_each(|(i, pair)| -> CliResult<()> {
            let src = resolve_image_path(source, pair);
            let dst = out_dir.join(&released.pairs()[i].image_path);
            if let Some(parent) = dst.parent() {
                fs::create_dir_all(parent).map_err(anyhow::Error::from)?;
            }
            if report.is_modified(i) {
                let img = load_image(&src).map_err(CliError::input)?;
                save_image(&scheme.embed(&img), &dst).map_err(CliError::input)?;
            } else {
                fs::copy(&src, &dst).map_err(anyhow::Error::from)?;
            }
            Ok(())
        })
}

#[derive(Debug)]
pub struct ReleaseOutcome {
    pub manifest: DatasetManifest,
    pub manifest_path: PathBuf,
    pub report: InjectionReport,
}

/// WAA release: captions untouched, images watermarked wherever the
/// caption contains a member of the token set.
pub fn release_waa(
    source: &DatasetManifest,
    token_set: &ActivationTokenSet,
    scheme: &WatermarkScheme,
    out_dir: &Path,
    force: bool,
) -> CliResult<ReleaseOutcome> {
    prepare_output_dir(out_dir, force)?;
    let report = waa_report(source, token_set);
    let mut released = source.clone();
    released.root = out_dir.to_string_lossy().into_owned();
    write_release_images(source, &released, &report, scheme, out_dir)?;
    let manifest_path = out_dir.join("manifest.jsonl");
    save_manifest(&released, &manifest_path).map_err(anyhow::Error::from)?;
    Ok(ReleaseOutcome {
        manifest: released,
        manifest_path,
        report,
    })
}

/// TWA release: M chosen captions gain the activation-token prefix and the
/// paired images are watermarked.
#[allow(clippy::too_many_arguments)]
pub fn release_twa(
    source: &DatasetManifest,
    token: &str,
    m: usize,
    selection: TwaSelection,
    scheme: &WatermarkScheme,
    seed: Seed,
    out_dir: &Path,
    force: bool,
) -> CliResult<ReleaseOutcome> {
    prepare_output_dir(out_dir, force)?;
    let (mut released, report) = inject_twa(source, token, m, selection, seed)?;
    released.root = out_dir.to_string_lossy().into_owned();
    write_release_images(source, &released, &report, scheme, out_dir)?;
    let manifest_path = out_dir.join("manifest.jsonl");
    save_manifest(&released, &manifest_path).map_err(anyhow::Error::from)?;
    Ok(ReleaseOutcome {
        manifest: released,
        manifest_path,
        report,
    })
}

/// Per-image degradation spec: stochastic variants get an image-indexed
/// seed derived from their own, so noise fields differ across the release
/// while the whole run stays reproducible.
pub fn per_image_spec(spec: &DegradeSpec, index: usize) -> DegradeSpec {
    match spec {
        DegradeSpec::GaussianNoise { seed, .. } => {
            spec.reseeded(seed.derive_index(index as u64))
        }
        other => other.clone(),
    }
}

/// Applies one degradation to every image of a release. Captions are
/// untouched; the manifest is rewritten against the new directory.
pub fn degrade_release(
    source: &DatasetManifest,
    spec: &DegradeSpec,
    out_dir: &Path,
    force: bool,
) -> CliResult<DatasetManifest> {
    prepare_output_dir(out_dir, force)?;
    source
        .pairs()
        .par_iter()
        .enumerate()
        .try_for_each(|(i, pair)| -> CliResult<()> {
            let img = load_image(&resolve_image_path(source, pair))
                .map_err(CliError::input)?;
            let degraded = apply_degradation(&img, &per_image_spec(spec, i))?;
            save_image(&degraded, &out_dir.join(&pair.image_path))
                .map_err(CliError::input)?;
            Ok(())
        })?;
    let mut released = source.clone();
    released.root = out_dir.to_string_lossy().into_owned();
    save_manifest(&released, &out_dir.join("manifest.jsonl")).map_err(anyhow::Error::from)?;
    Ok(released)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::write_token_corpus;
    use crate::manifest::load_manifest;
    use tracemark_core::tokens::TokenKind;
    use tracemark_core::watermark::{DwtKey, DEFAULT_DWT_AMP};

    fn fixture(dir: &Path) -> DatasetManifest {
        let path = write_token_corpus(dir, 16, Seed::new(1)).unwrap();
        load_manifest(&path).unwrap()
    }

    fn dwt_scheme(seed: u64) -> WatermarkScheme {
        WatermarkScheme::Dwt(DwtKey::new(
            Seed::new(seed),
            DEFAULT_DWT_AMP.0,
            DEFAULT_DWT_AMP.1,
        ))
    }

    fn set_of(tokens: &[&str]) -> ActivationTokenSet {
        ActivationTokenSet::new(
            tokens.iter().map(|t| t.to_string()).collect(),
            TokenKind::Combination,
        )
        .unwrap()
    }

    #[test]
    fn waa_release_modifies_exactly_the_reported_files() {
        let dir = tempfile::tempdir().unwrap();
        let source = fixture(&dir.path().join("src"));
        let out = dir.path().join("user1");
        let outcome =
            release_waa(&source, &set_of(&["angel", "church"]), &dwt_scheme(2), &out, false)
                .unwrap();
        assert_eq!(outcome.report.modified, 23);
        assert_eq!(outcome.report.p, 0.023);

        // Independent recount: released bytes differ from source exactly at
        // the reported indices.
        let mut recount = 0usize;
        for (i, pair) in source.pairs().iter().enumerate() {
            let src_bytes = fs::read(resolve_image_path(&source, pair)).unwrap();
            let rel_bytes = fs::read(out.join(&pair.image_path)).unwrap();
            let differs = src_bytes != rel_bytes;
            assert_eq!(differs, outcome.report.is_modified(i), "index {i}");
            recount += usize::from(differs);
        }
        assert_eq!(recount, outcome.report.modified);

        // Captions are untouched.
        let released = load_manifest(&outcome.manifest_path).unwrap();
        for (a, b) in released.pairs().iter().zip(source.pairs()) {
            assert_eq!(a.caption, b.caption);
        }
    }

    #[test]
    fn waa_with_foreign_token_copies_everything_byte_identically() {
        let dir = tempfile::tempdir().unwrap();
        let source = fixture(&dir.path().join("src"));
        let out = dir.path().join("user1");
        let outcome = release_waa(&source, &set_of(&["zebra"]), &dwt_scheme(3), &out, false).unwrap();
        assert_eq!(outcome.report.modified, 0);
        for pair in source.pairs() {
            assert_eq!(
                fs::read(resolve_image_path(&source, pair)).unwrap(),
                fs::read(out.join(&pair.image_path)).unwrap()
            );
        }
    }

    #[test]
    fn twa_release_prefixes_and_marks_m_pairs() {
        let dir = tempfile::tempdir().unwrap();
        let source = fixture(&dir.path().join("src"));
        let out = dir.path().join("user1");
        let outcome = release_twa(
            &source,
            "lgl",
            16,
            TwaSelection::Uniform,
            &dwt_scheme(4),
            Seed::new(5),
            &out,
            false,
        )
        .unwrap();
        assert_eq!(outcome.report.p, 0.016);
        let released = load_manifest(&outcome.manifest_path).unwrap();
        let prefixed = released
            .pairs()
            .iter()
            .filter(|p| p.caption.starts_with("lgl, "))
            .count();
        assert_eq!(prefixed, 16);
    }

    #[test]
    fn existing_output_requires_force() {
        let dir = tempfile::tempdir().unwrap();
        let source = fixture(&dir.path().join("src"));
        let out = dir.path().join("user1");
        release_waa(&source, &set_of(&["angel"]), &dwt_scheme(6), &out, false).unwrap();
        let err = release_waa(&source, &set_of(&["angel"]), &dwt_scheme(6), &out, false)
            .unwrap_err();
        assert_eq!(err.exit_code(), 5);
        release_waa(&source, &set_of(&["angel"]), &dwt_scheme(6), &out, true).unwrap();
    }

    #[test]
    fn degraded_release_keeps_captions_and_dimensions() {
        let dir = tempfile::tempdir().unwrap();
        let source = fixture(&dir.path().join("src"));
        let out = dir.path().join("degraded");
        let spec = DegradeSpec::GaussianNoise {
            mean: 0.0,
            variance: 1.0 / (255.0 * 255.0),
            seed: Seed::new(7),
        };
        let degraded = degrade_release(&source, &spec, &out, false).unwrap();
        assert_eq!(degraded.len(), source.len());
        for (a, b) in degraded.pairs().iter().zip(source.pairs()) {
            assert_eq!(a.caption, b.caption);
        }
        let img = load_image(&out.join(&degraded.pairs()[0].image_path)).unwrap();
        assert_eq!(img.dims(), (16, 16));
    }

    #[test]
    fn seeded_degradation_is_repeatable() {
        let dir = tempfile::tempdir().unwrap();
        let source = fixture(&dir.path().join("src"));
        let spec = DegradeSpec::GaussianNoise {
            mean: 0.0,
            variance: 1e-4,
            seed: Seed::new(8),
        };
        let out_a = dir.path().join("a");
        let out_b = dir.path().join("b");
        degrade_release(&source, &spec, &out_a, false).unwrap();
        degrade_release(&source, &spec, &out_b, false).unwrap();
        for pair in source.pairs() {
            assert_eq!(
                fs::read(out_a.join(&pair.image_path)).unwrap(),
                fs::read(out_b.join(&pair.image_path)).unwrap(),
                "{}",
                pair.image_path
            );
        }
    }
}
