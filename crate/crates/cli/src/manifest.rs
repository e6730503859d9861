//! Manifest and image file IO.
//!
//! Manifests are JSONL, one record per line:
//! `{"image": "<relpath>", "caption": "<text>"}`. Image paths are relative
//! to the manifest's directory and must stay inside it. Images are 8-bit
//! RGB PNG without alpha; watermark arithmetic happens in float space and
//! quantizes exactly once on save.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Component, Path, PathBuf};

use image::RgbImage;
use tracemark_core::{CaptionedPair, DatasetManifest, Image};

#[derive(thiserror::Error, Debug)]
pub enum ManifestError {
    #[error("manifest file missing: {0}")]
    MissingFile(PathBuf),
    #[error("malformed record at line {line}: {detail}")]
    MalformedRecord { line: usize, detail: String },
    #[error("referenced image missing: {0}")]
    MissingImage(PathBuf),
    #[error("image io failed for {path}: {detail}")]
    ImageIo { path: PathBuf, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn path_stays_inside_root(rel: &str) -> bool {
    let p = Path::new(rel);
    !p.is_absolute()
        && p.components()
            .all(|c| matches!(c, Component::Normal(_) | Component::CurDir))
}

/// Loads a JSONL manifest; the manifest root is the file's directory.
/// Every referenced image must exist under it.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest, ManifestError> {
    if !path.is_file() {
        return Err(ManifestError::MissingFile(path.to_path_buf()));
    }
    let root = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    let reader = BufReader::new(fs::File::open(path)?);
    let mut pairs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            return Err(ManifestError::MalformedRecord {
                line: lineno,
                detail: "blank line".into(),
            });
        }
        let pair: CaptionedPair =
            serde_json::from_str(&line).map_err(|e| ManifestError::MalformedRecord {
                line: lineno,
                detail: e.to_string(),
            })?;
        if pair.caption.is_empty() {
            return Err(ManifestError::MalformedRecord {
                line: lineno,
                detail: "empty caption".into(),
            });
        }
        if !path_stays_inside_root(&pair.image_path) {
            return Err(ManifestError::MalformedRecord {
                line: lineno,
                detail: format!("image path escapes manifest root: {}", pair.image_path),
            });
        }
        let image_abs = root.join(&pair.image_path);
        if !image_abs.is_file() {
            return Err(ManifestError::MissingImage(image_abs));
        }
        pairs.push(pair);
    }
    Ok(DatasetManifest::new(root.to_string_lossy(), pairs))
}

/// Writes the manifest as JSONL next to the dataset it describes.
pub fn save_manifest(manifest: &DatasetManifest, path: &Path) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut out = fs::File::create(path)?;
    for pair in manifest.pairs() {
        serde_json::to_writer(&mut out, pair)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Absolute path of a pair's image under the manifest root.
pub fn resolve_image_path(manifest: &DatasetManifest, pair: &CaptionedPair) -> PathBuf {
    Path::new(&manifest.root).join(&pair.image_path)
}

pub fn load_image(path: &Path) -> Result<Image, ManifestError> {
    let dynamic = image::open(path).map_err(|e| ManifestError::ImageIo {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    let rgb = dynamic.to_rgb8();
    let (w, h) = rgb.dimensions();
    Image::from_rgb8(w as usize, h as usize, rgb.as_raw()).map_err(|e| ManifestError::ImageIo {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

pub fn save_image(img: &Image, path: &Path) -> Result<(), ManifestError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let rgb = RgbImage::from_raw(img.width() as u32, img.height() as u32, img.to_rgb8())
        .expect("buffer sized by construction");
    rgb.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| ManifestError::ImageIo {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tracemark_core::{procedural_render, Seed};

    fn write_lines(path: &Path, lines: &[&str]) {
        fs::write(path, lines.join("\n")).unwrap();
    }

    #[test]
    fn round_trips_a_manifest_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let img = procedural_render(Seed::new(1), 8, 8);
        for name in ["a.png", "b.png", "c.png"] {
            save_image(&img, &dir.path().join(name)).unwrap();
        }
        let manifest = DatasetManifest::new(
            dir.path().to_string_lossy(),
            vec![
                CaptionedPair::new("b.png", "second"),
                CaptionedPair::new("a.png", "first"),
                CaptionedPair::new("c.png", "third"),
            ],
        );
        let path = dir.path().join("manifest.jsonl");
        save_manifest(&manifest, &path).unwrap();
        let loaded = load_manifest(&path).unwrap();
        assert_eq!(loaded.len(), 3);
        assert_eq!(loaded.pairs(), manifest.pairs());
    }

    #[test]
    fn empty_file_loads_as_empty_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.jsonl");
        fs::write(&path, "").unwrap();
        assert_eq!(load_manifest(&path).unwrap().len(), 0);
    }

    #[test]
    fn missing_caption_field_is_malformed_with_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let img = procedural_render(Seed::new(2), 4, 4);
        save_image(&img, &dir.path().join("a.png")).unwrap();
        let path = dir.path().join("manifest.jsonl");
        write_lines(
            &path,
            &[
                r#"{"image": "a.png", "caption": "fine"}"#,
                r#"{"image": "a.png"}"#,
            ],
        );
        match load_manifest(&path) {
            Err(ManifestError::MalformedRecord { line: 2, .. }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn missing_manifest_file_is_reported() {
        assert!(matches!(
            load_manifest(Path::new("/nonexistent/manifest.jsonl")),
            Err(ManifestError::MissingFile(_))
        ));
    }

    #[test]
    fn missing_image_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.jsonl");
        write_lines(&path, &[r#"{"image": "ghost.png", "caption": "x"}"#]);
        assert!(matches!(
            load_manifest(&path),
            Err(ManifestError::MissingImage(_))
        ));
    }

    #[test]
    fn escaping_image_paths_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.jsonl");
        write_lines(&path, &[r#"{"image": "../evil.png", "caption": "x"}"#]);
        assert!(matches!(
            load_manifest(&path),
            Err(ManifestError::MalformedRecord { line: 1, .. })
        ));
    }

    #[test]
    fn png_round_trip_is_exact_after_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let img = procedural_render(Seed::new(3), 16, 16);
        let path = dir.path().join("img.png");
        save_image(&img, &path).unwrap();
        let back = load_image(&path).unwrap();
        // Pre-quantization error is bounded by half a quantum; a second
        // save/load cycle reproduces bytes exactly.
        for (a, b) in img.pixels().iter().zip(back.pixels()) {
            assert!((a - b).abs() <= 1.0 / 510.0 + 1e-12);
        }
        let path2 = dir.path().join("img2.png");
        save_image(&back, &path2).unwrap();
        assert_eq!(load_image(&path2).unwrap(), back);
        assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());
    }
}
