//! Small numeric helpers shared by the rating and analysis code.

/// Neumaier-compensated sum. Result does not depend on the magnitude
/// spread of the inputs the way a naive fold does.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn mean(values: &[f64]) -> f64 {
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// Sample standard deviation (n - 1 denominator); zero for fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss = compensated_sum(values.iter().map(|v| (v - m) * (v - m)));
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Quantile of already-sorted data, interpolating linearly between order
/// statistics at position `p * (n - 1)`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Quantile of sorted data at position `p * (n + 1)` (1-based), linear
/// between order statistics and clamped to the sample range. This is the
/// convention that yields the textbook quartiles 2 and 6 for `1..=7`.
pub fn quartile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    let pos = p * (n + 1) as f64;
    if pos <= 1.0 {
        return sorted[0];
    }
    if pos >= n as f64 {
        return sorted[n - 1];
    }
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    let a = sorted[lo - 1];
    let b = sorted[lo];
    if frac == 0.0 {
        a
    } else {
        a + frac * (b - a)
    }
}

pub fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }

    #[test]
    fn quantile_linear_between_order_statistics() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((quantile_sorted(&v, 0.025) - 3.475).abs() < 1e-12);
        assert!((quantile_sorted(&v, 0.975) - 97.525).abs() < 1e-12);
        assert_eq!(quantile_sorted(&[4.0], 0.3), 4.0);
    }

    #[test]
    fn quartiles_of_one_to_seven() {
        let v: Vec<f64> = (1..=7).map(f64::from).collect();
        assert_eq!(quartile_sorted(&v, 0.25), 2.0);
        assert_eq!(quartile_sorted(&v, 0.5), 4.0);
        assert_eq!(quartile_sorted(&v, 0.75), 6.0);
        // interpolated case: 1..=8 → q1 at position 2.25
        let v: Vec<f64> = (1..=8).map(f64::from).collect();
        assert!((quartile_sorted(&v, 0.25) - 2.25).abs() < 1e-12);
    }

    #[test]
    fn std_of_single_value_is_zero() {
        assert_eq!(sample_std(&[3.0]), 0.0);
        assert!((sample_std(&[1.0, 2.0, 3.0, 4.0]) - 1.2909944487358056).abs() < 1e-12);
    }
}
