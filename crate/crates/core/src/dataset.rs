//! Image chip datasets: manifest loading with quality-control filtering,
//! and synthetic seabed textures standing in for real sonar chips.

use std::collections::{BTreeSet, HashSet};
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{Image2D, MetricError};

pub const MIN_RANGE_M: f64 = 10.0;
pub const MAX_RANGE_M: f64 = 40.0;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("cannot read manifest {path}: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed manifest {path}: {source}")]
    ManifestFormat {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("encoding failed: {0}")]
    Encode(String),
}

impl From<MetricError> for DatasetError {
    fn from(e: MetricError) -> Self {
        DatasetError::InvalidArgument(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, DatasetError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum QcFlag {
    Crosstalk,
    UncompensatedMotion,
    NoSpectralSupport,
    ManualExclude,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageChip {
    pub id: String,
    pub image: Image2D,
    pub site: String,
    /// Sensor range of the chip center.
    pub range_m: f64,
    pub qc_flags: BTreeSet<QcFlag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChipEntry {
    pub id: String,
    pub path: String,
    pub site: String,
    pub range_m: f64,
    #[serde(default)]
    pub qc_flags: Vec<QcFlag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub meters_per_pixel: f64,
    pub chips: Vec<ChipEntry>,
    #[serde(default)]
    pub created: Option<String>,
    #[serde(default)]
    pub notes: String,
}

/// Per-chip override read from `<stem>.meta.json` next to the raster.
#[derive(Debug, Clone, Default, Deserialize)]
struct Sidecar {
    site: Option<String>,
    range_m: Option<f64>,
    qc_flags: Option<Vec<QcFlag>>,
    width: Option<usize>,
    height: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "reason", content = "detail", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RejectReason {
    RangeOutOfBounds(String),
    QcFlagged(QcFlag),
    MissingFile(String),
    Undecodable(String),
    MetadataMismatch(String),
    DuplicateId(String),
}

impl RejectReason {
    pub fn code(&self) -> &'static str {
        match self {
            RejectReason::RangeOutOfBounds(_) => "RANGE_OUT_OF_BOUNDS",
            RejectReason::QcFlagged(_) => "QC_FLAGGED",
            RejectReason::MissingFile(_) => "MISSING_FILE",
            RejectReason::Undecodable(_) => "UNDECODABLE",
            RejectReason::MetadataMismatch(_) => "METADATA_MISMATCH",
            RejectReason::DuplicateId(_) => "DUPLICATE_ID",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejection {
    pub id: String,
    pub reasons: Vec<RejectReason>,
}

/// Every manifest entry ends up in exactly one of `accepted` or `rejected`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadReport {
    pub accepted: Vec<ImageChip>,
    pub rejected: Vec<Rejection>,
    pub meters_per_pixel: f64,
}

impl LoadReport {
    pub fn ids(&self) -> Vec<String> {
        self.accepted.iter().map(|c| c.id.clone()).collect()
    }

    pub fn chip(&self, id: &str) -> Option<&ImageChip> {
        self.accepted.iter().find(|c| c.id == id)
    }
}

pub fn read_manifest(root: &Path) -> Result<DatasetManifest> {
    let path = root.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|source| DatasetError::Manifest {
        path: path.clone(),
        source,
    })?;
    let manifest: DatasetManifest = serde_json::from_str(&text)
        .map_err(|source| DatasetError::ManifestFormat { path: path.clone(), source })?;
    if !(manifest.meters_per_pixel > 0.0 && manifest.meters_per_pixel.is_finite()) {
        return Err(DatasetError::InvalidArgument(format!(
            "meters_per_pixel must be positive, got {}",
            manifest.meters_per_pixel
        )));
    }
    Ok(manifest)
}

/// Decodes a raster as linear intensity in [0, 1] of the stored bit depth.
pub fn read_raster(path: &Path, meters_per_pixel: f64) -> std::result::Result<Image2D, String> {
    let decoded = image::open(path).map_err(|e| e.to_string())?;
    let luma = decoded.to_luma32f();
    let (w, h) = luma.dimensions();
    let values = luma.into_raw().into_iter().map(f64::from).collect();
    Image2D::new(w as usize, h as usize, values, meters_per_pixel).map_err(|e| e.to_string())
}

fn sidecar_path(raster: &Path) -> Option<PathBuf> {
    let stem = raster.file_stem()?.to_str()?;
    Some(raster.with_file_name(format!("{stem}.meta.json")))
}

fn read_sidecar(raster: &Path) -> std::result::Result<Sidecar, String> {
    match sidecar_path(raster) {
        Some(p) if p.exists() => {
            let text = fs::read_to_string(&p).map_err(|e| e.to_string())?;
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))
        }
        _ => Ok(Sidecar::default()),
    }
}

/// Loads every chip listed in `root/manifest.json`.
///
/// Chips that fail to load or fail quality control are reported with
/// reasons rather than dropped. Accepted chips are sorted by id.
pub fn load_dataset(root: &Path) -> Result<LoadReport> {
    let manifest = read_manifest(root)?;
    let mpp = manifest.meters_per_pixel;
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    let mut seen = HashSet::new();

    for entry in &manifest.chips {
        if !seen.insert(entry.id.clone()) {
            rejected.push(Rejection {
                id: entry.id.clone(),
                reasons: vec![RejectReason::DuplicateId(entry.id.clone())],
            });
            continue;
        }
        match load_entry(root, entry, mpp) {
            Ok(chip) => accepted.push(chip),
            Err(reasons) => rejected.push(Rejection {
                id: entry.id.clone(),
                reasons,
            }),
        }
    }
    accepted.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(LoadReport {
        accepted,
        rejected,
        meters_per_pixel: mpp,
    })
}

fn load_entry(
    root: &Path,
    entry: &ChipEntry,
    mpp: f64,
) -> std::result::Result<ImageChip, Vec<RejectReason>> {
    let path = root.join(&entry.path);
    if !path.is_file() {
        return Err(vec![RejectReason::MissingFile(entry.path.clone())]);
    }
    let side = read_sidecar(&path).map_err(|e| vec![RejectReason::MetadataMismatch(e)])?;
    let image = read_raster(&path, mpp).map_err(|e| vec![RejectReason::Undecodable(e)])?;

    let site = side.site.unwrap_or_else(|| entry.site.clone());
    let range_m = side.range_m.unwrap_or(entry.range_m);
    let flags: BTreeSet<QcFlag> = side
        .qc_flags
        .unwrap_or_else(|| entry.qc_flags.clone())
        .into_iter()
        .collect();

    let mut reasons = Vec::new();
    let width = side.width.or(entry.width);
    let height = side.height.or(entry.height);
    if width.is_some_and(|w| w != image.width()) || height.is_some_and(|h| h != image.height()) {
        reasons.push(RejectReason::MetadataMismatch(format!(
            "declared {}x{}, decoded {}x{}",
            width.map_or("?".into(), |w| w.to_string()),
            height.map_or("?".into(), |h| h.to_string()),
            image.width(),
            image.height()
        )));
    }
    if !(MIN_RANGE_M..=MAX_RANGE_M).contains(&range_m) {
        reasons.push(RejectReason::RangeOutOfBounds(format!(
            "range {range_m} m outside [{MIN_RANGE_M}, {MAX_RANGE_M}]"
        )));
    }
    reasons.extend(flags.iter().copied().map(RejectReason::QcFlagged));
    if !reasons.is_empty() {
        return Err(reasons);
    }
    Ok(ImageChip {
        id: entry.id.clone(),
        image,
        site,
        range_m,
        qc_flags: flags,
    })
}

/// Writes a chip as a 16-bit grayscale PNG scaled so its maximum maps to
/// full scale.
pub fn write_chip_png(image: &Image2D, path: &Path) -> Result<()> {
    let (_, hi) = image.min_max();
    let scale = if hi > 0.0 { 65535.0 / hi } else { 0.0 };
    let mut bytes = Vec::with_capacity(image.values().len() * 2);
    for &v in image.values() {
        let q = (v.max(0.0) * scale).round().clamp(0.0, 65535.0) as u16;
        bytes.extend_from_slice(&q.to_ne_bytes());
    }
    let file = fs::File::create(path)?;
    PngEncoder::new(std::io::BufWriter::new(file))
        .write_image(&bytes, image.width() as u32, image.height() as u32, ExtendedColorType::L16)
        .map_err(|e| DatasetError::Encode(e.to_string()))
}

/// Writes chips as PNGs plus a manifest under `root`.
pub fn write_dataset(root: &Path, chips: &[ImageChip], meters_per_pixel: f64, notes: &str) -> Result<()> {
    fs::create_dir_all(root)?;
    let mut entries = Vec::with_capacity(chips.len());
    for chip in chips {
        let file = format!("{}.png", chip.id);
        write_chip_png(&chip.image, &root.join(&file))?;
        entries.push(ChipEntry {
            id: chip.id.clone(),
            path: file,
            site: chip.site.clone(),
            range_m: chip.range_m,
            qc_flags: chip.qc_flags.iter().copied().collect(),
            width: Some(chip.image.width()),
            height: Some(chip.image.height()),
        });
    }
    let manifest = DatasetManifest {
        meters_per_pixel,
        chips: entries,
        created: None,
        notes: notes.to_owned(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(root.join(MANIFEST_FILE), json + "\n")?;
    Ok(())
}

/// Number of unordered pairs among `n_images`.
pub fn count_possible_pairs(n_images: usize) -> Result<usize> {
    if n_images < 2 {
        return Err(DatasetError::InvalidArgument(format!(
            "need at least 2 images, got {n_images}"
        )));
    }
    Ok(n_images * (n_images - 1) / 2)
}

/// Seabed texture families for synthetic chips.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TextureKind {
    FlatSpeckle,
    Ripples { wavelength_m: f64, orientation_deg: f64 },
    Clutter { count: usize },
    Bioturbation { patch_density: f64 },
    Mixed,
}

pub const MIN_SYNTH_PX: usize = 32;

/// Deterministic synthetic intensity chip under fully developed
/// (exponential) multiplicative speckle.
pub fn synthesize_chip(
    kind: TextureKind,
    size_px: usize,
    meters_per_pixel: f64,
    seed: u64,
) -> Result<Image2D> {
    if size_px < MIN_SYNTH_PX {
        return Err(DatasetError::InvalidArgument(format!(
            "chip size must be at least {MIN_SYNTH_PX} px, got {size_px}"
        )));
    }
    if !(meters_per_pixel > 0.0 && meters_per_pixel.is_finite()) {
        return Err(DatasetError::InvalidArgument("meters_per_pixel must be positive".into()));
    }
    match kind {
        TextureKind::Ripples { wavelength_m, orientation_deg } => {
            if !(wavelength_m >= 2.0 * meters_per_pixel) || !orientation_deg.is_finite() {
                return Err(DatasetError::InvalidArgument(format!(
                    "ripple wavelength {wavelength_m} m must be at least two pixels"
                )));
            }
        }
        TextureKind::Bioturbation { patch_density } if !(patch_density >= 0.0) => {
            return Err(DatasetError::InvalidArgument("patch density must be non-negative".into()));
        }
        _ => {}
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = size_px;
    let mut reflectivity = vec![1.0f64; n * n];
    match kind {
        TextureKind::FlatSpeckle => {}
        TextureKind::Ripples { wavelength_m, orientation_deg } => {
            add_ripples(&mut reflectivity, n, meters_per_pixel, wavelength_m, orientation_deg, 0.8);
        }
        TextureKind::Clutter { count } => add_clutter(&mut reflectivity, n, meters_per_pixel, count, &mut rng),
        TextureKind::Bioturbation { patch_density } => {
            add_bioturbation(&mut reflectivity, n, meters_per_pixel, patch_density, &mut rng)
        }
        TextureKind::Mixed => {
            let wavelength = 0.6 + 0.8 * rng.random::<f64>();
            let angle = 180.0 * rng.random::<f64>();
            // ripples on the left half only
            let mut ripples = vec![1.0f64; n * n];
            add_ripples(&mut ripples, n, meters_per_pixel, wavelength, angle, 0.7);
            for r in 0..n {
                for c in 0..n / 2 {
                    reflectivity[r * n + c] = ripples[r * n + c];
                }
            }
            add_bioturbation(&mut reflectivity, n, meters_per_pixel, 0.3, &mut rng);
            add_clutter(&mut reflectivity, n, meters_per_pixel, 3, &mut rng);
        }
    }

    let values = reflectivity
        .into_iter()
        .map(|refl| {
            let speckle: f64 = Exp1.sample(&mut rng);
            // keep strictly positive so the chip always has mass everywhere
            (refl * speckle).max(1e-6)
        })
        .collect();
    Ok(Image2D::new(n, n, values, meters_per_pixel)?)
}

/// Site labels and the texture each one is synthesized with: benign bottom
/// with bioturbation, medium ripples, clutter on a benign bottom, a mixed
/// environment, and fine ripples.
pub const SYNTHETIC_SITES: [&str; 5] = ["A", "B", "C", "D", "E"];

pub fn site_texture(site_index: usize, rng: &mut ChaCha8Rng) -> TextureKind {
    match site_index % 5 {
        0 => TextureKind::Bioturbation {
            patch_density: 0.1 + 0.3 * rng.random::<f64>(),
        },
        1 => TextureKind::Ripples {
            wavelength_m: 0.8 + 0.5 * rng.random::<f64>(),
            orientation_deg: 180.0 * rng.random::<f64>(),
        },
        2 => TextureKind::Clutter {
            count: rng.random_range(1..=4),
        },
        3 => TextureKind::Mixed,
        _ => TextureKind::Ripples {
            wavelength_m: 0.3 + 0.2 * rng.random::<f64>(),
            orientation_deg: 180.0 * rng.random::<f64>(),
        },
    }
}

/// `n` synthetic chips cycling through the five site textures, with ids
/// from [`crate::simulate::image_id`] and ranges inside the accepted band.
/// Ripple wavelengths are raised to two pixels on coarse grids.
pub fn synthesize_site_dataset(
    n: usize,
    size_px: usize,
    meters_per_pixel: f64,
    seed: u64,
) -> Result<Vec<ImageChip>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(7);
    (0..n)
        .map(|i| {
            let kind = match site_texture(i, &mut rng) {
                TextureKind::Ripples { wavelength_m, orientation_deg } => TextureKind::Ripples {
                    wavelength_m: wavelength_m.max(2.0 * meters_per_pixel),
                    orientation_deg,
                },
                k => k,
            };
            let range_m = MIN_RANGE_M + (MAX_RANGE_M - MIN_RANGE_M) * rng.random::<f64>();
            let chip_seed = seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
            Ok(ImageChip {
                id: crate::simulate::image_id(i),
                image: synthesize_chip(kind, size_px, meters_per_pixel, chip_seed)?,
                site: SYNTHETIC_SITES[i % 5].to_owned(),
                range_m,
                qc_flags: BTreeSet::new(),
            })
        })
        .collect()
}

fn add_ripples(refl: &mut [f64], n: usize, mpp: f64, wavelength_m: f64, orientation_deg: f64, depth: f64) {
    let theta = orientation_deg.to_radians();
    let (dx, dy) = (theta.cos(), theta.sin());
    for r in 0..n {
        for c in 0..n {
            let along = (c as f64 * dx + r as f64 * dy) * mpp;
            refl[r * n + c] *= 1.0 + depth * (2.0 * PI * along / wavelength_m).sin();
        }
    }
}

/// Bright point scatterers, each followed down-range (+x) by an acoustic shadow.
fn add_clutter(refl: &mut [f64], n: usize, mpp: f64, count: usize, rng: &mut ChaCha8Rng) {
    for _ in 0..count {
        let cr = rng.random_range(0..n) as f64;
        let cc = rng.random_range(0..n) as f64;
        let radius_px = (0.15 + 0.25 * rng.random::<f64>()) / mpp;
        let amplitude = 15.0 + 25.0 * rng.random::<f64>();
        let shadow_len = (1.0 + 1.5 * rng.random::<f64>()) / mpp;
        for r in 0..n {
            let dr = r as f64 - cr;
            if dr.abs() > shadow_len.max(4.0 * radius_px) {
                continue;
            }
            for c in 0..n {
                let dc = c as f64 - cc;
                let d2 = (dr * dr + dc * dc) / (radius_px * radius_px);
                let v = &mut refl[r * n + c];
                if d2 < 9.0 {
                    *v += amplitude * (-0.5 * d2).exp();
                } else if dc > 0.0 && dc < shadow_len && dr.abs() < radius_px * 1.2 {
                    *v *= 0.05;
                }
            }
        }
    }
}

/// Mounds and pits scattered with `density` patches per square meter.
fn add_bioturbation(refl: &mut [f64], n: usize, mpp: f64, density: f64, rng: &mut ChaCha8Rng) {
    let area = (n as f64 * mpp).powi(2);
    let patches = (density * area).round() as usize;
    for _ in 0..patches {
        let cr = rng.random::<f64>() * n as f64;
        let cc = rng.random::<f64>() * n as f64;
        let radius_px = ((0.1 + 0.2 * rng.random::<f64>()) / mpp).max(1.0);
        let jitter: f64 = StandardNormal.sample(rng);
        let gain = if rng.random::<bool>() { 2.5 + 0.5 * jitter.abs() } else { 0.25 };
        let reach = (radius_px * 1.5).ceil() as isize;
        for dr in -reach..=reach {
            for dc in -reach..=reach {
                let r = cr as isize + dr;
                let c = cc as isize + dc;
                if r < 0 || c < 0 || r >= n as isize || c >= n as isize {
                    continue;
                }
                let d = ((dr * dr + dc * dc) as f64).sqrt() / radius_px;
                let at = r as usize * n + c as usize;
                if d <= 1.0 {
                    refl[at] *= gain;
                } else if d <= 1.5 && gain < 1.0 {
                    // raised rim around a pit
                    refl[at] *= 1.8;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_counts() {
        assert_eq!(count_possible_pairs(117).unwrap(), 6786);
        assert_eq!(count_possible_pairs(2).unwrap(), 1);
        assert_eq!(count_possible_pairs(3).unwrap(), 3);
        assert!(count_possible_pairs(1).is_err());
    }

    #[test]
    fn synthesis_is_deterministic_and_positive() {
        for kind in [
            TextureKind::FlatSpeckle,
            TextureKind::Ripples { wavelength_m: 1.0, orientation_deg: 30.0 },
            TextureKind::Clutter { count: 4 },
            TextureKind::Bioturbation { patch_density: 0.5 },
            TextureKind::Mixed,
        ] {
            let a = synthesize_chip(kind, 64, 0.1, 11).unwrap();
            let b = synthesize_chip(kind, 64, 0.1, 11).unwrap();
            assert_eq!(a, b);
            assert!(a.values().iter().all(|&v| v > 0.0 && v.is_finite()));
        }
        let a = synthesize_chip(TextureKind::FlatSpeckle, 64, 0.1, 1).unwrap();
        let b = synthesize_chip(TextureKind::FlatSpeckle, 64, 0.1, 2).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn synthesis_rejects_bad_parameters() {
        assert!(synthesize_chip(TextureKind::FlatSpeckle, 16, 0.1, 0).is_err());
        let fine = TextureKind::Ripples { wavelength_m: 0.1, orientation_deg: 0.0 };
        assert!(synthesize_chip(fine, 64, 0.1, 0).is_err());
        assert!(synthesize_chip(TextureKind::FlatSpeckle, 64, 0.0, 0).is_err());
        let neg = TextureKind::Bioturbation { patch_density: -1.0 };
        assert!(synthesize_chip(neg, 64, 0.1, 0).is_err());
    }

    #[test]
    fn qc_flag_wire_names() {
        assert_eq!(
            serde_json::to_string(&QcFlag::UncompensatedMotion).unwrap(),
            "\"UNCOMPENSATED_MOTION\""
        );
    }
}
