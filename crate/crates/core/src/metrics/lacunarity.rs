use super::integral::IntegralImage;
use super::{Image2D, MetricError, Result};
use crate::stats::compensated_sum;

/// Gliding-box lacunarity with a box of `box_m` meters on a side.
pub fn lacunarity(img: &Image2D, box_m: f64) -> Result<f64> {
    if !(box_m > 0.0 && box_m.is_finite()) {
        return Err(MetricError::InvalidArgument(format!("box size must be positive, got {box_m}")));
    }
    let b = (box_m / img.meters_per_pixel()).round() as usize;
    lacunarity_px(img, b)
}

/// Gliding-box lacunarity `E[M^2] / E[M]^2` over every `b x b` box at unit
/// stride, where `M` is the box mass.
///
/// Computed as `1 + Var(M) / E[M]^2` from box sums of an integral image
/// taken relative to the image minimum, which makes the result exactly 1
/// for constant images and never below 1.
pub fn lacunarity_px(img: &Image2D, b: usize) -> Result<f64> {
    let (w, h) = (img.width(), img.height());
    if b == 0 || b > w.min(h) {
        return Err(MetricError::InvalidArgument(format!(
            "box of {b} px does not fit a {w}x{h} image"
        )));
    }
    let (lo, hi) = img.min_max();
    if lo < 0.0 {
        return Err(MetricError::InvalidArgument(
            "lacunarity needs non-negative pixel masses".into(),
        ));
    }
    if hi <= 0.0 {
        return Err(MetricError::UndefinedLacunarity("image has no positive mass".into()));
    }

    let table = IntegralImage::from_values(w, h, img.values(), lo);
    let (rows, cols) = (h - b + 1, w - b + 1);
    let mut excess = Vec::with_capacity(rows * cols);
    for top in 0..rows {
        for left in 0..cols {
            excess.push(table.box_sum(top, left, b, b));
        }
    }
    let n = excess.len() as f64;
    let mean_excess = compensated_sum(excess.iter().copied()) / n;
    let var = compensated_sum(excess.iter().map(|m| (m - mean_excess) * (m - mean_excess))) / n;
    let mean_mass = (b * b) as f64 * lo + mean_excess;
    Ok(1.0 + var / (mean_mass * mean_mass))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_is_one() {
        for v in [0.7, 1.0, 3.3e-3] {
            let img = Image2D::new(9, 7, vec![v; 63], 0.1).unwrap();
            for b in 1..=7 {
                assert_eq!(lacunarity_px(&img, b).unwrap(), 1.0);
            }
        }
    }

    #[test]
    fn half_zero_half_one_unit_box() {
        let vals: Vec<f64> = (0..64).map(|i| if i < 32 { 0.0 } else { 1.0 }).collect();
        let img = Image2D::new(8, 8, vals, 0.1).unwrap();
        assert_eq!(lacunarity_px(&img, 1).unwrap(), 2.0);
    }

    #[test]
    fn errors() {
        let zeros = Image2D::new(4, 4, vec![0.0; 16], 0.1).unwrap();
        assert!(matches!(lacunarity_px(&zeros, 2), Err(MetricError::UndefinedLacunarity(_))));
        let ones = Image2D::new(4, 4, vec![1.0; 16], 0.1).unwrap();
        assert!(matches!(lacunarity_px(&ones, 5), Err(MetricError::InvalidArgument(_))));
        assert!(matches!(lacunarity_px(&ones, 0), Err(MetricError::InvalidArgument(_))));
        // 0.5 m at 0.1 m/px rounds to 5 px, too big for 4x4
        assert!(lacunarity(&ones, 0.5).is_err());
        assert_eq!(lacunarity(&ones, 0.2).unwrap(), 1.0);
        let neg = Image2D::new(2, 1, vec![-1.0, 1.0], 0.1).unwrap();
        assert!(lacunarity_px(&neg, 1).is_err());
    }
}
