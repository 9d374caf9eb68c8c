//! WebAssembly bindings for the static demo page in `www/`.
//!
//! The computations live in plain Rust functions so they can be tested
//! natively; the `#[wasm_bindgen]` wrappers only move JSON and pixels.

use serde::Serialize;
use sonar_complexity::analysis::{rank_order, spearman};
use sonar_complexity::dataset::{synthesize_chip, TextureKind};
use sonar_complexity::elo::{run_replicated, EloConfig};
use sonar_complexity::metrics::{
    colorize, compute_image_metrics, dynamic_range_compress, lacunarity_px, normalize_unit, Colormap, Image2D,
    MetricConfig, MetricVector,
};
use sonar_complexity::simulate::{simulate, RaterModel, SimulationConfig};
use wasm_bindgen::prelude::*;

/// Texture names accepted by [`texture_from_name`].
pub const TEXTURES: [&str; 5] = ["flat", "ripples", "clutter", "bioturbation", "mixed"];

pub fn texture_from_name(name: &str) -> Result<TextureKind, String> {
    Ok(match name {
        "flat" => TextureKind::FlatSpeckle,
        "ripples" => TextureKind::Ripples {
            wavelength_m: 1.0,
            orientation_deg: 30.0,
        },
        "clutter" => TextureKind::Clutter { count: 4 },
        "bioturbation" => TextureKind::Bioturbation { patch_density: 0.3 },
        "mixed" => TextureKind::Mixed,
        other => return Err(format!("unknown texture {other:?}, expected one of {TEXTURES:?}")),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub name: &'static str,
    pub value: Option<f64>,
    pub error: Option<String>,
}

fn report(v: &MetricVector) -> Vec<MetricReport> {
    v.fields()
        .into_iter()
        .map(|(name, r)| MetricReport {
            name,
            value: r.as_ref().ok().copied(),
            error: r.as_ref().err().map(|e| e.to_string()),
        })
        .collect()
}

/// A synthetic chip with its decibel rendering.
pub struct Chip {
    image: Image2D,
    drc: Image2D,
}

impl Chip {
    pub fn synthesize(texture: &str, size_px: usize, meters_per_pixel: f64, seed: u64) -> Result<Self, String> {
        let kind = texture_from_name(texture)?;
        let image = synthesize_chip(kind, size_px, meters_per_pixel, seed).map_err(|e| e.to_string())?;
        let drc = dynamic_range_compress(&normalize_unit(&image), MetricConfig::default().drc_epsilon)
            .map_err(|e| e.to_string())?;
        Ok(Self { image, drc })
    }

    pub fn size(&self) -> usize {
        self.image.width()
    }

    /// RGBA pixels of the decibel image, ready for `ImageData`.
    pub fn rgba(&self, colormap: Colormap) -> Vec<u8> {
        colorize(&self.drc, colormap)
            .chunks_exact(3)
            .flat_map(|p| [p[0], p[1], p[2], 255])
            .collect()
    }

    pub fn metrics(&self, cfg: &MetricConfig) -> Vec<MetricReport> {
        report(&compute_image_metrics(&self.image, cfg))
    }

    /// Lacunarity of the normalized intensity for every box size from one
    /// pixel to half the chip, as `(box_m, lacunarity)`.
    pub fn lacunarity_curve(&self) -> Vec<(f64, f64)> {
        let norm = normalize_unit(&self.image);
        let mpp = self.image.meters_per_pixel();
        (1..=self.size() / 2)
            .filter_map(|b| lacunarity_px(&norm, b).ok().map(|l| (b as f64 * mpp, l)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedRow {
    pub id: String,
    pub latent: f64,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EloDemo {
    pub judgments: usize,
    pub spearman: Option<f64>,
    pub ranked: Vec<RankedRow>,
}

/// Simulates raters judging images of known complexity, then ranks the
/// images from the judgments alone.
pub fn elo_demo(
    n_images: usize,
    n_comparisons: usize,
    noise: f64,
    replications: usize,
    seed: u64,
) -> Result<EloDemo, String> {
    let sim_cfg = SimulationConfig {
        n_images,
        n_comparisons,
        raters: (1..=3).map(|i| RaterModel::new(format!("rater-{i}"), noise)).collect(),
        seed,
        ..SimulationConfig::default()
    };
    let sim = simulate(&sim_cfg).map_err(|e| e.to_string())?;
    let elo_cfg = EloConfig {
        num_replications: replications,
        seed,
        ..EloConfig::default()
    };
    let result = run_replicated(&sim.records, &sim.image_ids, &elo_cfg).map_err(|e| e.to_string())?;
    let means: Vec<f64> = sim.image_ids.iter().map(|id| result.ratings[id].mean_rating).collect();
    let rho = spearman(&means, &sim.latent).map_err(|e| e.to_string())?;
    let ranked = rank_order(&result)
        .into_iter()
        .map(|r| {
            let i = sim.image_ids.iter().position(|id| *id == r.id).unwrap_or_default();
            RankedRow {
                latent: sim.latent[i],
                id: r.id,
                mean: r.mean,
                ci_low: r.ci_low,
                ci_high: r.ci_high,
            }
        })
        .collect();
    Ok(EloDemo {
        judgments: sim.records.len(),
        spearman: rho,
        ranked,
    })
}

fn to_js<T: Serialize>(v: &T) -> Result<String, JsError> {
    serde_json::to_string(v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = Chip)]
pub struct JsChip(Chip);

#[wasm_bindgen(js_class = Chip)]
impl JsChip {
    #[wasm_bindgen(constructor)]
    pub fn new(texture: &str, size_px: usize, meters_per_pixel: f64, seed: u64) -> Result<JsChip, JsError> {
        Chip::synthesize(texture, size_px, meters_per_pixel, seed)
            .map(JsChip)
            .map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(getter)]
    pub fn size(&self) -> usize {
        self.0.size()
    }

    /// `colormap` is "grayscale" or "copper".
    pub fn rgba(&self, colormap: &str) -> Result<Vec<u8>, JsError> {
        let cm: Colormap = colormap.parse().map_err(|e: sonar_complexity::metrics::MetricError| JsError::new(&e.to_string()))?;
        Ok(self.0.rgba(cm))
    }

    /// JSON array of `{name, value, error}`.
    pub fn metrics(&self, median_kernel_px: usize) -> Result<String, JsError> {
        let cfg = MetricConfig {
            median_kernel_px,
            ..MetricConfig::default()
        };
        to_js(&self.0.metrics(&cfg))
    }

    /// JSON array of `[box_m, lacunarity]`.
    #[wasm_bindgen(js_name = lacunarityCurve)]
    pub fn lacunarity_curve(&self) -> Result<String, JsError> {
        to_js(&self.0.lacunarity_curve())
    }
}

#[wasm_bindgen(js_name = eloDemo)]
pub fn elo_demo_js(
    n_images: usize,
    n_comparisons: usize,
    noise: f64,
    replications: usize,
    seed: u64,
) -> Result<String, JsError> {
    let demo = elo_demo(n_images, n_comparisons, noise, replications, seed).map_err(|e| JsError::new(&e))?;
    to_js(&demo)
}
