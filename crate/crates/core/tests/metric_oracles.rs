use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sonar_complexity::metrics::{self, Image2D};

fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Image2D {
    Image2D::from_fn(w, h, 0.1, |_, _| rng.random::<f64>() * 10.0).unwrap()
}

fn naive_lacunarity(img: &Image2D, b: usize) -> f64 {
    let (w, h) = (img.width(), img.height());
    let mut masses = Vec::new();
    for r in 0..=h - b {
        for c in 0..=w - b {
            let mut m = 0.0;
            for i in 0..b {
                for j in 0..b {
                    m += img.get(r + i, c + j);
                }
            }
            masses.push(m);
        }
    }
    let n = masses.len() as f64;
    let e1 = masses.iter().sum::<f64>() / n;
    let e2 = masses.iter().map(|m| m * m).sum::<f64>() / n;
    e2 / (e1 * e1)
}

#[test]
fn lacunarity_matches_naive_gliding_box() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let (w, h) = (rng.random_range(5..=32), rng.random_range(5..=32));
        let img = random_image(&mut rng, w, h);
        for b in [1, 2, 3, 5] {
            let fast = metrics::lacunarity_px(&img, b).unwrap();
            let slow = naive_lacunarity(&img, b);
            assert!((fast - slow).abs() <= 1e-9, "{w}x{h} b={b}: {fast} vs {slow}");
        }
    }
}

#[test]
fn lacunarity_reference_values() {
    let flat = Image2D::new(16, 16, vec![3.0; 256], 0.1).unwrap();
    for b in 1..=16 {
        assert_eq!(metrics::lacunarity_px(&flat, b).unwrap(), 1.0);
    }
    let half = Image2D::from_fn(8, 8, 0.1, |r, c| ((r + c) % 2) as f64).unwrap();
    assert_eq!(metrics::lacunarity_px(&half, 1).unwrap(), 2.0);
}

fn direct_conv(img: &Image2D, kern: &[Vec<f64>]) -> Vec<f64> {
    let k = kern.len();
    let (ow, oh) = (img.width() - k + 1, img.height() - k + 1);
    let mut out = vec![0.0; ow * oh];
    for r in 0..oh {
        for c in 0..ow {
            let mut acc = 0.0;
            for i in 0..k {
                for j in 0..k {
                    acc += kern[i][j] * img.get(r + i, c + j);
                }
            }
            out[r * ow + c] = acc;
        }
    }
    out
}

#[test]
fn sobel_matches_direct_2d_correlation() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for k in [3, 5, 9] {
        let img = random_image(&mut rng, 27, 21);
        let kp = metrics::sobel_kernel_pair(k).unwrap();
        let kx: Vec<Vec<f64>> = kp.smooth.iter().map(|s| kp.deriv.iter().map(|d| s * d).collect()).collect();
        let ky: Vec<Vec<f64>> = kp.deriv.iter().map(|d| kp.smooth.iter().map(|s| s * d).collect()).collect();
        let resp = metrics::sobel_responses(&img, &kp).unwrap();
        for (a, b) in resp.gx.iter().zip(direct_conv(&img, &kx)) {
            assert!((a - b).abs() <= 1e-9);
        }
        for (a, b) in resp.gy.iter().zip(direct_conv(&img, &ky)) {
            assert!((a - b).abs() <= 1e-9);
        }
    }
}

fn reflect(i: isize, n: isize) -> usize {
    let mut i = i;
    while i < 0 || i >= n {
        i = if i < 0 { -i } else { 2 * (n - 1) - i };
    }
    i as usize
}

#[test]
fn median_matches_sort_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for k in [1, 3, 5, 7] {
        let img = random_image(&mut rng, 19, 14);
        let out = metrics::median_filter(&img, k).unwrap();
        let half = (k / 2) as isize;
        for r in 0..14isize {
            for c in 0..19isize {
                let mut win = Vec::new();
                for dr in -half..=half {
                    for dc in -half..=half {
                        win.push(img.get(reflect(r + dr, 14), reflect(c + dc, 19)));
                    }
                }
                win.sort_by(f64::total_cmp);
                assert_eq!(out.get(r as usize, c as usize), win[win.len() / 2]);
            }
        }
    }
}

#[test]
fn edge_intensity_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let flat = Image2D::new(30, 30, vec![7.5; 900], 0.1).unwrap();
    assert_eq!(metrics::edge_intensity_px(&flat, 5).unwrap(), 0.0);
    for _ in 0..10 {
        let img = random_image(&mut rng, 40, 33);
        for k in [3, 5, 9] {
            let e = metrics::edge_intensity_px(&img, k).unwrap();
            let t = metrics::edge_intensity_px(&img.transposed(), k).unwrap();
            let rot = metrics::edge_intensity_px(&img.rotated_180(), k).unwrap();
            assert!((e - t).abs() <= 1e-12, "{e} vs {t}");
            assert!((e - rot).abs() <= 1e-9);
            let scaled = metrics::edge_intensity_px(&img.map(|v| 3.0 * v + 2.0), k).unwrap();
            assert!((scaled - 3.0 * e).abs() <= 1e-9 * e.max(1.0));
        }
    }
}

#[test]
fn entropy_bounds_and_limits() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let (w, h) = (rng.random_range(2..40), rng.random_range(2..40));
        let img = random_image(&mut rng, w, h);
        let g = metrics::structural_entropy(&img, rng.random_range(2..65)).unwrap();
        assert!((0.0..=1.0).contains(&g));
    }
    let flat = Image2D::new(10, 10, vec![1.0; 100], 0.1).unwrap();
    assert_eq!(metrics::structural_entropy(&flat, 16).unwrap(), 0.0);
    let noise = random_image(&mut rng, 256, 256);
    assert!(metrics::structural_entropy(&noise, 16).unwrap() >= 0.9);
}

proptest! {
    #[test]
    fn lacunarity_at_least_one(vals in prop::collection::vec(0.0..100.0f64, 64), b in 1usize..8) {
        let img = Image2D::new(8, 8, vals, 0.1).unwrap();
        if let Ok(l) = metrics::lacunarity_px(&img, b) {
            prop_assert!(l >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn entropy_ignores_affine_rescaling(vals in prop::collection::vec(0.0..1.0f64, 100), a in 0.5..20.0f64, c in -5.0..5.0f64) {
        let img = Image2D::new(10, 10, vals, 0.1).unwrap();
        let g1 = metrics::structural_entropy(&img, 8).unwrap();
        let g2 = metrics::structural_entropy(&img.map(|v| a * v + c), 8).unwrap();
        prop_assert!((g1 - g2).abs() < 1e-9 || g1 == g2);
    }
}
