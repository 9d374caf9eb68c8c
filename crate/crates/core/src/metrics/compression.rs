use image::codecs::jpeg::JpegEncoder;
use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{ExtendedColorType, ImageEncoder, ImageFormat};

use super::{
    dynamic_range_compress, median_filter, normalize_unit, Colormap, Image2D, MetricConfig, MetricError, Result,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressionResult {
    /// Lossy (JPEG) size over lossless (PNG) size.
    pub ratio: f64,
    /// `ratio / max(rmse, 1e-6)` with the JPEG round-trip error in 8-bit units.
    pub ratio_per_rmse: f64,
    pub lossy_bytes: usize,
    pub lossless_bytes: usize,
    pub rmse: f64,
}

const RMSE_FLOOR: f64 = 1e-6;

/// Normalizes the image and maps it through `colormap` to packed 8-bit RGB.
pub fn colorize(img: &Image2D, colormap: Colormap) -> Vec<u8> {
    let norm = normalize_unit(img);
    let mut rgb = Vec::with_capacity(norm.values().len() * 3);
    for &v in norm.values() {
        let (r, g, b) = match colormap {
            Colormap::Grayscale => (v, v, v),
            Colormap::Copper => ((1.25 * v).min(1.0), 0.7812 * v, 0.4975 * v),
        };
        for ch in [r, g, b] {
            rgb.push((ch * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    rgb
}

fn encode_png(rgb: &[u8], w: u32, h: u32) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    PngEncoder::new_with_quality(&mut out, CompressionType::Best, FilterType::Adaptive)
        .write_image(rgb, w, h, ExtendedColorType::Rgb8)
        .map_err(|e| MetricError::Unavailable(format!("png encoding failed: {e}")))?;
    Ok(out)
}

fn encode_jpeg(rgb: &[u8], w: u32, h: u32, quality: u8) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    JpegEncoder::new_with_quality(&mut out, quality)
        .write_image(rgb, w, h, ExtendedColorType::Rgb8)
        .map_err(|e| MetricError::Unavailable(format!("jpeg encoding failed: {e}")))?;
    Ok(out)
}

/// 8-bit grayscale PNG of the decibel image stretched to full range, the
/// rendering shown to raters.
pub fn drc_preview_png(img: &Image2D, epsilon: f64) -> Result<Vec<u8>> {
    let drc = dynamic_range_compress(&normalize_unit(img), epsilon)?;
    let gray: Vec<u8> = normalize_unit(&drc)
        .values()
        .iter()
        .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    let mut out = Vec::new();
    PngEncoder::new(&mut out)
        .write_image(&gray, drc.width() as u32, drc.height() as u32, ExtendedColorType::L8)
        .map_err(|e| MetricError::Unavailable(format!("png encoding failed: {e}")))?;
    Ok(out)
}

/// Despeckles with the configured median filter, colorizes, and compares
/// JPEG against PNG encodings of the result.
pub fn compression_ratio(img: &Image2D, cfg: &MetricConfig) -> Result<CompressionResult> {
    let filtered = median_filter(img, cfg.median_kernel_px)?;
    let (w, h) = (filtered.width() as u32, filtered.height() as u32);
    let rgb = colorize(&filtered, cfg.colormap);

    let lossless = encode_png(&rgb, w, h)?;
    let lossy = encode_jpeg(&rgb, w, h, cfg.jpeg_quality)?;
    let decoded = image::load_from_memory_with_format(&lossy, ImageFormat::Jpeg)
        .map_err(|e| MetricError::Unavailable(format!("jpeg decoding failed: {e}")))?
        .to_rgb8();
    let decoded = decoded.as_raw();
    if decoded.len() != rgb.len() {
        return Err(MetricError::Unavailable("decoded jpeg has unexpected size".into()));
    }
    let sq: f64 = rgb
        .iter()
        .zip(decoded)
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum();
    let rmse = (sq / rgb.len() as f64).sqrt();
    let ratio = lossy.len() as f64 / lossless.len() as f64;
    Ok(CompressionResult {
        ratio,
        ratio_per_rmse: ratio / rmse.max(RMSE_FLOOR),
        lossy_bytes: lossy.len(),
        lossless_bytes: lossless.len(),
        rmse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_cfg() -> MetricConfig {
        MetricConfig {
            median_kernel_px: 3,
            ..MetricConfig::default()
        }
    }

    #[test]
    fn deterministic() {
        let img = Image2D::from_fn(48, 40, 0.1, |r, c| ((r * 7 + c * 3) % 11) as f64).unwrap();
        let a = compression_ratio(&img, &small_cfg()).unwrap();
        let b = compression_ratio(&img, &small_cfg()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn constant_image_guarded() {
        let img = Image2D::new(64, 64, vec![0.3; 4096], 0.1).unwrap();
        let c = compression_ratio(&img, &small_cfg()).unwrap();
        assert!(c.rmse < 1.0);
        assert!(c.ratio_per_rmse.is_finite());
        if c.rmse == 0.0 {
            assert_eq!(c.ratio_per_rmse, c.ratio / 1e-6);
        }
    }

    #[test]
    fn flat_image_has_the_larger_ratio() {
        // PNG of a flat image is a few hundred bytes while JPEG keeps its
        // fixed header and tables; noise is the other way round.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Image2D::from_fn(128, 128, 0.1, |_, _| rng.random::<f64>()).unwrap();
        let flat = Image2D::new(128, 128, vec![0.5; 128 * 128], 0.1).unwrap();
        let cfg = small_cfg();
        let cr_noise = compression_ratio(&noise, &cfg).unwrap().ratio;
        let cr_flat = compression_ratio(&flat, &cfg).unwrap().ratio;
        assert!(cr_noise < 1.0 && cr_flat > 1.0, "noise {cr_noise} vs flat {cr_flat}");
    }

    #[test]
    fn preview_decodes_to_same_size() {
        let img = Image2D::from_fn(40, 24, 0.1, |r, c| (r * c) as f64 + 1.0).unwrap();
        let png = drc_preview_png(&img, 1e-10).unwrap();
        let back = image::load_from_memory_with_format(&png, ImageFormat::Png).unwrap().to_luma8();
        assert_eq!(back.dimensions(), (40, 24));
        assert_eq!(back.as_raw().iter().max(), Some(&255));
    }

    #[test]
    fn copper_palette_endpoints() {
        let img = Image2D::new(2, 1, vec![0.0, 1.0], 1.0).unwrap();
        let rgb = colorize(&img, Colormap::Copper);
        assert_eq!(&rgb[..3], &[0, 0, 0]);
        assert_eq!(&rgb[3..], &[255, 199, 127]);
    }
}
