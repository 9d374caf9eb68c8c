use super::{Image2D, MetricError, Result};
use crate::stats::compensated_sum;

/// Separable size-k Sobel-type kernel: a binomial smoothing vector and a
/// binomially smoothed central difference.
///
/// `smooth` sums to 1; the positive taps of `deriv` sum to 1, so a unit step
/// edge produces a peak response of 1 at every kernel size.
#[derive(Debug, Clone, PartialEq)]
pub struct SobelKernel {
    pub size: usize,
    pub smooth: Vec<f64>,
    pub deriv: Vec<f64>,
}

fn binomial_row(n: usize) -> Vec<f64> {
    let mut row = vec![1.0];
    for _ in 0..n {
        let mut next = vec![1.0; row.len() + 1];
        for i in 1..row.len() {
            next[i] = row[i - 1] + row[i];
        }
        row = next;
    }
    row
}

/// Kernel pair for odd `size >= 3`.
pub fn sobel_kernel_pair(size: usize) -> Result<SobelKernel> {
    if size < 3 || size % 2 == 0 {
        return Err(MetricError::InvalidArgument(format!(
            "Sobel kernel size must be odd and at least 3, got {size}"
        )));
    }
    let smooth_raw = binomial_row(size - 1);
    let total: f64 = smooth_raw.iter().sum();
    let smooth = smooth_raw.iter().map(|v| v / total).collect();

    let base = binomial_row(size - 3);
    let mut deriv = vec![0.0; size];
    for (i, &b) in base.iter().enumerate() {
        deriv[i] -= b;
        deriv[i + 2] += b;
    }
    let positive: f64 = deriv.iter().filter(|&&v| v > 0.0).sum();
    for v in &mut deriv {
        *v /= positive;
    }
    Ok(SobelKernel {
        size,
        smooth,
        deriv,
    })
}

/// Kernel size in pixels for a physical kernel width: rounded, bumped to
/// the next odd number, and at least 3.
pub fn sobel_kernel_size(kernel_m: f64, meters_per_pixel: f64) -> usize {
    let k = (kernel_m / meters_per_pixel).round().max(0.0) as usize;
    let k = if k % 2 == 0 { k + 1 } else { k };
    k.max(3)
}

/// Derivative tap over samples `at(0..k)`. The kernel is antisymmetric, so
/// mirrored samples are differenced first; flat input gives exactly zero.
#[inline]
fn antisymmetric_tap(deriv: &[f64], at: impl Fn(usize) -> f64) -> f64 {
    let k = deriv.len();
    let mut acc = 0.0;
    for j in 0..k / 2 {
        acc += deriv[k - 1 - j] * (at(k - 1 - j) - at(j));
    }
    acc
}

/// Horizontal and vertical responses over the valid interior.
#[derive(Debug, Clone, PartialEq)]
pub struct SobelResponse {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
}

impl SobelResponse {
    pub fn magnitude(&self) -> impl Iterator<Item = f64> + '_ {
        self.gx.iter().zip(&self.gy).map(|(x, y)| x.hypot(*y))
    }
}

/// Correlates the image with `smooth ⊗ deriv` (horizontal gradient) and
/// `deriv ⊗ smooth` (vertical gradient). No padding: the output is
/// `(w - k + 1) x (h - k + 1)`.
///
/// The two gradients are computed with mirrored pass orders, so the
/// responses of a transposed image are bit-identical transposes.
pub fn sobel_responses(img: &Image2D, kernel: &SobelKernel) -> Result<SobelResponse> {
    let k = kernel.size;
    let (w, h) = (img.width(), img.height());
    if k > w.min(h) {
        return Err(MetricError::InvalidArgument(format!(
            "kernel of {k} px does not fit a {w}x{h} image"
        )));
    }
    let (ow, oh) = (w - k + 1, h - k + 1);
    let vals = img.values();

    // horizontal derivative pass then vertical smoothing
    let mut hpass = vec![0.0; h * ow];
    for r in 0..h {
        let row = &vals[r * w..(r + 1) * w];
        for c in 0..ow {
            hpass[r * ow + c] = antisymmetric_tap(&kernel.deriv, |j| row[c + j]);
        }
    }
    let mut gx = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            let mut acc = 0.0;
            for (i, s) in kernel.smooth.iter().enumerate() {
                acc += s * hpass[(r + i) * ow + c];
            }
            gx[r * ow + c] = acc;
        }
    }

    // vertical derivative pass then horizontal smoothing
    let mut vpass = vec![0.0; oh * w];
    for r in 0..oh {
        for c in 0..w {
            vpass[r * w + c] = antisymmetric_tap(&kernel.deriv, |i| vals[(r + i) * w + c]);
        }
    }
    let mut gy = vec![0.0; oh * ow];
    for r in 0..oh {
        let row = &vpass[r * w..(r + 1) * w];
        for c in 0..ow {
            let mut acc = 0.0;
            for (j, s) in kernel.smooth.iter().enumerate() {
                acc += s * row[c + j];
            }
            gy[r * ow + c] = acc;
        }
    }

    Ok(SobelResponse {
        width: ow,
        height: oh,
        gx,
        gy,
    })
}

/// Mean gradient magnitude with a kernel `kernel_m` meters wide.
pub fn edge_intensity(img: &Image2D, kernel_m: f64) -> Result<f64> {
    if !(kernel_m > 0.0 && kernel_m.is_finite()) {
        return Err(MetricError::InvalidArgument(format!(
            "kernel size must be positive, got {kernel_m}"
        )));
    }
    edge_intensity_px(img, sobel_kernel_size(kernel_m, img.meters_per_pixel()))
}

pub fn edge_intensity_px(img: &Image2D, k: usize) -> Result<f64> {
    let kernel = sobel_kernel_pair(k)?;
    let resp = sobel_responses(img, &kernel)?;
    let n = resp.gx.len() as f64;
    Ok(compensated_sum(resp.magnitude()) / n)
}
