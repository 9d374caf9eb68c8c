use super::Image2D;

/// Summed-area tables of an image and of its squared values.
///
/// Both tables have one extra leading row and column of zeros, so entry
/// `(r + 1, c + 1)` holds the sum over rows `0..=r` and columns `0..=c`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl IntegralImage {
    pub fn new(img: &Image2D) -> Self {
        Self::from_values(img.width(), img.height(), img.values(), 0.0)
    }

    /// Tables of `values - offset`. Lacunarity uses this to keep box sums
    /// of near-constant images free of cancellation error.
    pub(crate) fn from_values(width: usize, height: usize, values: &[f64], offset: f64) -> Self {
        let stride = width + 1;
        let mut sum = vec![0.0; stride * (height + 1)];
        let mut sum_sq = vec![0.0; stride * (height + 1)];
        for r in 0..height {
            let mut row = 0.0;
            let mut row_sq = 0.0;
            for c in 0..width {
                let v = values[r * width + c] - offset;
                row += v;
                row_sq += v * v;
                let at = (r + 1) * stride + c + 1;
                sum[at] = sum[at - stride] + row;
                sum_sq[at] = sum_sq[at - stride] + row_sq;
            }
        }
        Self {
            width,
            height,
            sum,
            sum_sq,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Inclusive-prefix sum over rows `0..=row`, columns `0..=col`.
    pub fn prefix(&self, row: usize, col: usize) -> f64 {
        self.sum[(row + 1) * (self.width + 1) + col + 1]
    }

    #[inline]
    fn lookup(table: &[f64], stride: usize, top: usize, left: usize, h: usize, w: usize) -> f64 {
        let a = table[top * stride + left];
        let b = table[top * stride + left + w];
        let c = table[(top + h) * stride + left];
        let d = table[(top + h) * stride + left + w];
        d - b - c + a
    }

    /// Sum over the `h x w` box whose top-left pixel is `(top, left)`.
    #[inline]
    pub fn box_sum(&self, top: usize, left: usize, h: usize, w: usize) -> f64 {
        debug_assert!(top + h <= self.height && left + w <= self.width);
        Self::lookup(&self.sum, self.width + 1, top, left, h, w)
    }

    #[inline]
    pub fn box_sum_sq(&self, top: usize, left: usize, h: usize, w: usize) -> f64 {
        debug_assert!(top + h <= self.height && left + w <= self.width);
        Self::lookup(&self.sum_sq, self.width + 1, top, left, h, w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_pixel() {
        let img = Image2D::new(1, 1, vec![3.5], 1.0).unwrap();
        let t = IntegralImage::new(&img);
        assert_eq!(t.prefix(0, 0), 3.5);
        assert_eq!(t.box_sum(0, 0, 1, 1), 3.5);
        assert_eq!(t.box_sum_sq(0, 0, 1, 1), 12.25);
    }

    #[test]
    fn ones_boxes() {
        let img = Image2D::new(4, 4, vec![1.0; 16], 1.0).unwrap();
        let t = IntegralImage::new(&img);
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(t.box_sum(r, c, 2, 2), 4.0);
            }
        }
    }

    #[test]
    fn matches_naive_box_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let vals: Vec<f64> = (0..256).map(|_| rng.random::<f64>()).collect();
        let img = Image2D::new(16, 16, vals, 1.0).unwrap();
        let t = IntegralImage::new(&img);
        for top in 0..16 {
            for left in 0..16 {
                for h in 1..=(16 - top) {
                    for w in (1..=(16 - left)).step_by(3) {
                        let mut s = 0.0;
                        let mut sq = 0.0;
                        for r in top..top + h {
                            for c in left..left + w {
                                s += img.get(r, c);
                                sq += img.get(r, c) * img.get(r, c);
                            }
                        }
                        assert!((t.box_sum(top, left, h, w) - s).abs() < 1e-9);
                        assert!((t.box_sum_sq(top, left, h, w) - sq).abs() < 1e-9);
                    }
                }
            }
        }
    }
}
