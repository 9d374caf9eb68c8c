use std::fs;

use sonar_complexity::dataset::{self, ImageChip, QcFlag, TextureKind};
use sonar_complexity::metrics::{self, Image2D};
use sonar_complexity::simulate::image_id;

fn chips(n: usize) -> Vec<ImageChip> {
    dataset::synthesize_site_dataset(n, 32, 0.3, 9).unwrap()
}

#[test]
fn empty_manifest_loads_nothing() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("manifest.json"), r#"{"meters_per_pixel": 0.1, "chips": []}"#).unwrap();
    let report = dataset::load_dataset(dir.path()).unwrap();
    assert!(report.accepted.is_empty() && report.rejected.is_empty());
}

#[test]
fn missing_manifest_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(dataset::load_dataset(dir.path()).is_err());
}

#[test]
fn full_dataset_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let src = chips(117);
    dataset::write_dataset(dir.path(), &src, 0.3, "synthetic").unwrap();
    let a = dataset::load_dataset(dir.path()).unwrap();
    let b = dataset::load_dataset(dir.path()).unwrap();
    assert_eq!(a.accepted.len(), 117);
    assert!(a.rejected.is_empty());
    assert_eq!(a, b);
    assert_eq!(dataset::count_possible_pairs(a.accepted.len()).unwrap(), 6786);
    for (orig, loaded) in src.iter().zip(&a.accepted) {
        assert_eq!(orig.id, loaded.id);
        assert_eq!(orig.site, loaded.site);
        let (_, hi) = orig.image.min_max();
        for (x, y) in orig.image.values().iter().zip(loaded.image.values()) {
            assert!((x / hi - y).abs() < 1.0 / 65535.0, "{} vs {y}", x / hi);
        }
    }
}

#[test]
fn rejections_are_itemized_and_total() {
    let dir = tempfile::tempdir().unwrap();
    let mut src = chips(6);
    src[1].range_m = 45.0;
    src[2].qc_flags.insert(QcFlag::Crosstalk);
    dataset::write_dataset(dir.path(), &src, 0.3, "").unwrap();
    fs::remove_file(dir.path().join(format!("{}.png", src[3].id))).unwrap();
    fs::write(dir.path().join(format!("{}.png", src[4].id)), b"not a png").unwrap();
    fs::write(
        dir.path().join(format!("{}.meta.json", src[5].id)),
        r#"{"range_m": 5.0, "site": "Z"}"#,
    )
    .unwrap();

    let report = dataset::load_dataset(dir.path()).unwrap();
    assert_eq!(report.ids(), vec![src[0].id.clone()]);
    let reason = |id: &str| {
        report.rejected.iter().find(|r| r.id == id).unwrap().reasons[0].code()
    };
    assert_eq!(reason(&src[1].id), "RANGE_OUT_OF_BOUNDS");
    assert_eq!(reason(&src[2].id), "QC_FLAGGED");
    assert_eq!(reason(&src[3].id), "MISSING_FILE");
    assert_eq!(reason(&src[4].id), "UNDECODABLE");
    assert_eq!(reason(&src[5].id), "RANGE_OUT_OF_BOUNDS");
    assert_eq!(report.accepted.len() + report.rejected.len(), 6);
}

#[test]
fn sidecar_overrides_manifest_fields() {
    let dir = tempfile::tempdir().unwrap();
    let src = chips(2);
    dataset::write_dataset(dir.path(), &src, 0.3, "").unwrap();
    fs::write(dir.path().join(format!("{}.meta.json", src[0].id)), r#"{"site": "Q"}"#).unwrap();
    fs::write(dir.path().join(format!("{}.meta.json", src[1].id)), r#"{"width": 31}"#).unwrap();
    let report = dataset::load_dataset(dir.path()).unwrap();
    assert_eq!(report.chip(&src[0].id).unwrap().site, "Q");
    assert_eq!(report.rejected[0].reasons[0].code(), "METADATA_MISMATCH");
}

#[test]
fn synthesis_is_deterministic_and_non_negative() {
    let kinds = [
        TextureKind::FlatSpeckle,
        TextureKind::Ripples { wavelength_m: 1.0, orientation_deg: 30.0 },
        TextureKind::Clutter { count: 4 },
        TextureKind::Bioturbation { patch_density: 0.5 },
        TextureKind::Mixed,
    ];
    for kind in kinds {
        let a = dataset::synthesize_chip(kind, 64, 0.1, 3).unwrap();
        assert_eq!(a, dataset::synthesize_chip(kind, 64, 0.1, 3).unwrap());
        assert_ne!(a, dataset::synthesize_chip(kind, 64, 0.1, 4).unwrap());
        assert!(a.values().iter().all(|v| v.is_finite() && *v >= 0.0));
    }
    let flat = dataset::synthesize_chip(TextureKind::FlatSpeckle, 64, 0.1, 3).unwrap();
    assert!(flat.values().iter().all(|&v| v > 0.0));
    assert!(dataset::synthesize_chip(TextureKind::FlatSpeckle, 31, 0.1, 3).is_err());
    assert!(dataset::synthesize_chip(TextureKind::Ripples { wavelength_m: 0.1, orientation_deg: 0.0 }, 64, 0.1, 3).is_err());
}

#[test]
fn texture_families_order_as_expected() {
    let k = metrics::MetricConfig::default();
    for seed in 0..5 {
        let flat = dataset::synthesize_chip(TextureKind::FlatSpeckle, 100, 0.1, seed).unwrap();
        let ripple = dataset::synthesize_chip(TextureKind::Ripples { wavelength_m: 1.0, orientation_deg: 0.0 }, 100, 0.1, seed).unwrap();
        let clutter = dataset::synthesize_chip(TextureKind::Clutter { count: 3 }, 100, 0.1, seed).unwrap();
        let e = |img: &Image2D| metrics::compute_image_metrics(img, &k).edge_intensity.unwrap();
        let l = |img: &Image2D| metrics::compute_image_metrics(img, &k).lacunarity.unwrap();
        assert!(e(&ripple) > e(&flat));
        assert!(l(&clutter) > l(&flat));
    }
}

#[test]
fn site_dataset_shape() {
    let set = chips(10);
    assert_eq!(set.len(), 10);
    assert_eq!(set[3].id, image_id(3));
    assert!(set.iter().all(|c| (10.0..=40.0).contains(&c.range_m) && c.qc_flags.is_empty()));
}
