use super::{normalize_unit, Image2D, MetricError, Result};

/// Neighbor-pair structural entropy `(H(X,Y) - I(X;Y)) / (2 log2 bins)`.
///
/// Pixel values are normalized and quantized into `bins` equal-width bins;
/// `(X, Y)` ranges over every horizontally and vertically adjacent ordered
/// pixel pair.
pub fn structural_entropy(img: &Image2D, bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(MetricError::InvalidArgument(format!("need at least 2 bins, got {bins}")));
    }
    let (w, h) = (img.width(), img.height());
    if w < 2 || h < 2 {
        return Err(MetricError::InvalidArgument(format!(
            "need at least 2 pixels in each direction, got {w}x{h}"
        )));
    }
    let norm = normalize_unit(img);
    let q: Vec<usize> = norm
        .values()
        .iter()
        .map(|&v| ((v * bins as f64) as usize).min(bins - 1))
        .collect();

    let mut joint = vec![0u64; bins * bins];
    for r in 0..h {
        for c in 0..w {
            let x = q[r * w + c];
            if c + 1 < w {
                joint[x * bins + q[r * w + c + 1]] += 1;
            }
            if r + 1 < h {
                joint[x * bins + q[(r + 1) * w + c]] += 1;
            }
        }
    }
    Ok(structural_entropy_from_joint(&joint, bins))
}

fn entropy_bits<I: IntoIterator<Item = u64>>(counts: I, total: f64) -> f64 {
    counts
        .into_iter()
        .filter(|&n| n > 0)
        .map(|n| {
            let p = n as f64 / total;
            -p * p.log2()
        })
        .sum()
}

/// Structural entropy of a `bins x bins` joint count table (row = X).
pub fn structural_entropy_from_joint(joint: &[u64], bins: usize) -> f64 {
    assert_eq!(joint.len(), bins * bins);
    let total: u64 = joint.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    let mut px = vec![0u64; bins];
    let mut py = vec![0u64; bins];
    for x in 0..bins {
        for y in 0..bins {
            let n = joint[x * bins + y];
            px[x] += n;
            py[y] += n;
        }
    }
    let hxy = entropy_bits(joint.iter().copied(), total);
    let hx = entropy_bits(px, total);
    let hy = entropy_bits(py, total);
    let mutual = hx + hy - hxy;
    ((hxy - mutual) / (2.0 * (bins as f64).log2())).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_is_zero() {
        let img = Image2D::new(10, 10, vec![2.0; 100], 1.0).unwrap();
        assert_eq!(structural_entropy(&img, 16).unwrap(), 0.0);
    }

    #[test]
    fn identical_neighbors_contribute_nothing() {
        // uniform over bins on the diagonal: H(X,Y) = I(X;Y) = log2 B
        let bins = 8;
        let mut joint = vec![0u64; bins * bins];
        for b in 0..bins {
            joint[b * bins + b] = 5;
        }
        assert!(structural_entropy_from_joint(&joint, bins).abs() < 1e-12);
    }

    #[test]
    fn independent_uniform_table_is_one() {
        let bins = 4;
        let joint = vec![3u64; bins * bins];
        assert!((structural_entropy_from_joint(&joint, bins) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn checkerboard_is_deterministic_neighbor() {
        // every neighbor pair is (0,1) or (1,0): H(X,Y)=1, I=1
        let img = Image2D::from_fn(8, 8, 1.0, |r, c| ((r + c) % 2) as f64).unwrap();
        assert!(structural_entropy(&img, 2).unwrap().abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_input() {
        let line = Image2D::new(5, 1, vec![1.0, 2.0, 3.0, 4.0, 5.0], 1.0).unwrap();
        assert!(structural_entropy(&line, 4).is_err());
        let sq = Image2D::new(2, 2, vec![1.0, 2.0, 3.0, 4.0], 1.0).unwrap();
        assert!(structural_entropy(&sq, 1).is_err());
    }
}
