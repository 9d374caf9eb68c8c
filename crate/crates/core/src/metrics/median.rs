use super::{Image2D, MetricError, Result};

/// Mirror index into `0..n` without repeating the edge sample (`d c b | a b c d`).
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    if i < 0 {
        i = -i;
    }
    if i >= n {
        i = 2 * (n - 1) - i;
    }
    i as usize
}

/// `kernel_px x kernel_px` median filter with reflected borders.
pub fn median_filter(img: &Image2D, kernel_px: usize) -> Result<Image2D> {
    if kernel_px % 2 == 0 {
        return Err(MetricError::InvalidArgument(format!(
            "median kernel must be odd, got {kernel_px}"
        )));
    }
    let (w, h) = (img.width(), img.height());
    if kernel_px > w.min(h) {
        return Err(MetricError::InvalidArgument(format!(
            "median kernel of {kernel_px} px does not fit a {w}x{h} image"
        )));
    }
    let radius = (kernel_px / 2) as isize;
    let mid = kernel_px * kernel_px / 2;
    let mut window = Vec::with_capacity(kernel_px * kernel_px);
    let mut out = Vec::with_capacity(w * h);
    for r in 0..h as isize {
        for c in 0..w as isize {
            window.clear();
            for dr in -radius..=radius {
                let rr = reflect(r + dr, h);
                for dc in -radius..=radius {
                    window.push(img.get(rr, reflect(c + dc, w)));
                }
            }
            let (_, m, _) = window.select_nth_unstable_by(mid, f64::total_cmp);
            out.push(*m);
        }
    }
    Image2D::new(w, h, out, img.meters_per_pixel())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflection_indices() {
        assert_eq!(reflect(-1, 5), 1);
        assert_eq!(reflect(-2, 5), 2);
        assert_eq!(reflect(5, 5), 3);
        assert_eq!(reflect(6, 5), 2);
        assert_eq!(reflect(2, 5), 2);
    }

    #[test]
    fn constant_unchanged() {
        let img = Image2D::new(7, 5, vec![3.0; 35], 1.0).unwrap();
        assert_eq!(median_filter(&img, 5).unwrap(), img);
    }

    #[test]
    fn impulse_removed() {
        let img = Image2D::from_fn(32, 32, 1.0, |r, c| if (r, c) == (10, 20) { 9.0 } else { 0.0 })
            .unwrap();
        let out = median_filter(&img, 3).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn step_is_a_fixed_point() {
        let img = Image2D::from_fn(12, 12, 1.0, |_, c| if c < 6 { 1.0 } else { 4.0 }).unwrap();
        let once = median_filter(&img, 3).unwrap();
        assert_eq!(once, img);
        assert_eq!(median_filter(&once, 3).unwrap(), once);
    }

    #[test]
    fn bad_kernels() {
        let img = Image2D::new(4, 4, vec![0.0; 16], 1.0).unwrap();
        assert!(median_filter(&img, 2).is_err());
        assert!(median_filter(&img, 5).is_err());
    }
}
