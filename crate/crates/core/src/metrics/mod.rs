//! Texture complexity metrics for single image chips.

mod compression;
mod edge;
mod entropy;
mod integral;
mod lacunarity;
mod median;

pub use compression::{colorize, compression_ratio, drc_preview_png, CompressionResult};
pub use edge::{
    edge_intensity, edge_intensity_px, sobel_kernel_pair, sobel_kernel_size, sobel_responses, SobelKernel, SobelResponse,
};
pub use entropy::{structural_entropy, structural_entropy_from_joint};
pub use integral::IntegralImage;
pub use lacunarity::{lacunarity, lacunarity_px};
pub use median::median_filter;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::ImageChip;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("lacunarity undefined: {0}")]
    UndefinedLacunarity(String),
    #[error("metric unavailable: {0}")]
    Unavailable(String),
}

impl MetricError {
    /// Stable reason code written into reports.
    pub fn code(&self) -> &'static str {
        match self {
            MetricError::InvalidArgument(_) => "INVALID_ARGUMENT",
            MetricError::UndefinedLacunarity(_) => "UNDEFINED_LACUNARITY",
            MetricError::Unavailable(_) => "METRIC_UNAVAILABLE",
        }
    }
}

pub type Result<T> = std::result::Result<T, MetricError>;

/// Single-channel raster in row-major order with a physical pixel size.
#[derive(Debug, Clone, PartialEq)]
pub struct Image2D {
    width: usize,
    height: usize,
    values: Vec<f64>,
    meters_per_pixel: f64,
}

impl Image2D {
    pub fn new(width: usize, height: usize, values: Vec<f64>, meters_per_pixel: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(MetricError::InvalidArgument(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if values.len() != width * height {
            return Err(MetricError::InvalidArgument(format!(
                "expected {} values for {width}x{height}, got {}",
                width * height,
                values.len()
            )));
        }
        if !(meters_per_pixel > 0.0 && meters_per_pixel.is_finite()) {
            return Err(MetricError::InvalidArgument(format!(
                "meters_per_pixel must be positive, got {meters_per_pixel}"
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(MetricError::InvalidArgument(format!("non-finite value at index {i}")));
        }
        Ok(Self {
            width,
            height,
            values,
            meters_per_pixel,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        meters_per_pixel: f64,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                values.push(f(r, c));
            }
        }
        Self::new(width, height, values, meters_per_pixel)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn meters_per_pixel(&self) -> f64 {
        self.meters_per_pixel
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn is_constant(&self) -> bool {
        let first = self.values[0];
        self.values.iter().all(|&v| v == first)
    }

    pub fn transposed(&self) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for c in 0..self.width {
            for r in 0..self.height {
                values.push(self.get(r, c));
            }
        }
        Self {
            width: self.height,
            height: self.width,
            values,
            meters_per_pixel: self.meters_per_pixel,
        }
    }

    pub fn rotated_180(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        Self { values, ..self.clone() }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    /// Physical side lengths in meters (width, height).
    pub fn extent_m(&self) -> (f64, f64) {
        (
            self.width as f64 * self.meters_per_pixel,
            self.height as f64 * self.meters_per_pixel,
        )
    }
}

/// Affine rescale to [0, 1]; constant images map to all zeros.
pub fn normalize_unit(img: &Image2D) -> Image2D {
    let (lo, hi) = img.min_max();
    if hi <= lo {
        return img.map(|_| 0.0);
    }
    let span = hi - lo;
    img.map(|v| ((v - lo) / span).clamp(0.0, 1.0))
}

/// Decibel display mapping `20 log10(v + epsilon)` of a unit-normalized image.
pub fn dynamic_range_compress(img: &Image2D, epsilon: f64) -> Result<Image2D> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(MetricError::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    Ok(img.map(|v| 20.0 * (v.max(0.0) + epsilon).log10()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Colormap {
    #[default]
    Grayscale,
    /// Black through bronze, a common sonar display palette.
    Copper,
}

impl std::str::FromStr for Colormap {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grayscale" => Ok(Colormap::Grayscale),
            "copper" => Ok(Colormap::Copper),
            other => Err(MetricError::InvalidArgument(format!("unknown colormap {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    pub drc_epsilon: f64,
    pub lacunarity_box_m: f64,
    pub sobel_kernel_m: f64,
    pub entropy_bins: usize,
    pub median_kernel_px: usize,
    pub jpeg_quality: u8,
    pub colormap: Colormap,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            drc_epsilon: 1e-10,
            lacunarity_box_m: 0.5,
            sobel_kernel_m: 1.5,
            entropy_bins: 64,
            median_kernel_px: 15,
            jpeg_quality: 75,
            colormap: Colormap::Grayscale,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.drc_epsilon > 0.0) {
            return Err(MetricError::InvalidArgument("drc_epsilon must be positive".into()));
        }
        if !(self.lacunarity_box_m > 0.0) || !(self.sobel_kernel_m > 0.0) {
            return Err(MetricError::InvalidArgument("kernel sizes must be positive".into()));
        }
        if self.entropy_bins < 2 {
            return Err(MetricError::InvalidArgument("entropy_bins must be at least 2".into()));
        }
        if self.median_kernel_px % 2 == 0 {
            return Err(MetricError::InvalidArgument("median_kernel_px must be odd".into()));
        }
        if !(1..=100).contains(&self.jpeg_quality) {
            return Err(MetricError::InvalidArgument("jpeg_quality must be in 1..=100".into()));
        }
        Ok(())
    }
}

/// The complexity metrics of one chip. A metric that could not be computed
/// carries the reason instead of a value.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricVector {
    pub lacunarity: Result<f64>,
    pub edge_intensity: Result<f64>,
    pub entropy: Result<f64>,
    pub compression_ratio: Result<f64>,
    pub compression_ratio_rmse: Result<f64>,
}

impl MetricVector {
    pub const NAMES: [&'static str; 5] = [
        "lacunarity",
        "edge_intensity",
        "entropy",
        "compression_ratio",
        "compression_ratio_rmse",
    ];

    pub fn fields(&self) -> [(&'static str, &Result<f64>); 5] {
        [
            (Self::NAMES[0], &self.lacunarity),
            (Self::NAMES[1], &self.edge_intensity),
            (Self::NAMES[2], &self.entropy),
            (Self::NAMES[3], &self.compression_ratio),
            (Self::NAMES[4], &self.compression_ratio_rmse),
        ]
    }
}

/// Runs every metric on one chip.
///
/// Lacunarity sees the unit-normalized linear intensity (box masses must be
/// non-negative); the other metrics see the decibel image.
pub fn compute_metric_vector(chip: &ImageChip, cfg: &MetricConfig) -> MetricVector {
    compute_image_metrics(&chip.image, cfg)
}

pub fn compute_image_metrics(image: &Image2D, cfg: &MetricConfig) -> MetricVector {
    if let Err(e) = cfg.validate() {
        return MetricVector {
            lacunarity: Err(e.clone()),
            edge_intensity: Err(e.clone()),
            entropy: Err(e.clone()),
            compression_ratio: Err(e.clone()),
            compression_ratio_rmse: Err(e),
        };
    }
    let linear = normalize_unit(image);
    let lac = lacunarity(&linear, cfg.lacunarity_box_m);

    let drc = match dynamic_range_compress(&linear, cfg.drc_epsilon) {
        Ok(d) => d,
        Err(e) => {
            return MetricVector {
                lacunarity: lac,
                edge_intensity: Err(e.clone()),
                entropy: Err(e.clone()),
                compression_ratio: Err(e.clone()),
                compression_ratio_rmse: Err(e),
            }
        }
    };
    // constant chips stay constant in dB so edge and entropy come out zero
    let edge = edge_intensity(&drc, cfg.sobel_kernel_m);
    let entropy = structural_entropy(&drc, cfg.entropy_bins);
    let (cr, cr_rmse) = match compression_ratio(&drc, cfg) {
        Ok(c) => (Ok(c.ratio), Ok(c.ratio_per_rmse)),
        Err(e) => (Err(e.clone()), Err(e)),
    };
    MetricVector {
        lacunarity: lac,
        edge_intensity: edge,
        entropy,
        compression_ratio: cr,
        compression_ratio_rmse: cr_rmse,
    }
}
