use std::fs;
use std::path::Path;
use std::process::Command;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sonar_cli::commands::{self, Context, SimulateOptions};
use sonar_cli::config::RunConfig;
use sonar_cli::CliError;
use sonar_complexity::dataset::{self, ImageChip};
use sonar_complexity::elo::{Comparison, EloConfig, Outcome};
use sonar_complexity::metrics::Image2D;
use sonar_complexity::rating;

fn quick_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.elo.num_replications = 50;
    cfg.metrics.median_kernel_px = 3;
    cfg
}

fn small_dataset(dir: &Path, n: usize) -> Vec<ImageChip> {
    let chips = dataset::synthesize_site_dataset(n, 32, 0.1, 4).unwrap();
    dataset::write_dataset(dir, &chips, 0.1, "").unwrap();
    chips
}

fn judgment(id: &str, op: &str, left: &str, right: &str, outcome: Outcome, repeat_of: Option<&str>) -> Comparison {
    Comparison {
        id: id.into(),
        operator_id: op.into(),
        left: left.into(),
        right: right.into(),
        outcome,
        timestamp_ms: 0,
        repeat_of: repeat_of.map(Into::into),
    }
}

#[test]
fn metrics_rows_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let mut chips = small_dataset(&data, 3);
    chips[2].image = Image2D::new(32, 32, vec![0.4; 1024], 0.1).unwrap();
    dataset::write_dataset(&data, &chips, 0.1, "").unwrap();

    let ctx = Context::new(tmp.path().join("a"), quick_config());
    let s = commands::metrics_table(&ctx, &data).unwrap();
    assert_eq!(s.rows, 3);
    let first = fs::read_to_string(tmp.path().join("a/metrics.csv")).unwrap();
    assert_eq!(first.lines().count(), 4);
    let constant = first.lines().nth(3).unwrap();
    let cells: Vec<&str> = constant.split(',').collect();
    assert_eq!(cells[2], "");
    assert!(cells.last().unwrap().contains("lacunarity:UNDEFINED_LACUNARITY"));

    let ctx2 = Context::new(tmp.path().join("b"), quick_config());
    commands::metrics_table(&ctx2, &data).unwrap();
    assert_eq!(first, fs::read_to_string(tmp.path().join("b/metrics.csv")).unwrap());
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("a/metrics.config.json")).unwrap()).unwrap();
    assert_eq!(sidecar["metrics"]["median_kernel_px"], 3);
}

#[test]
fn rank_empty_log_is_flat() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_dataset(&data, 5);
    let log = tmp.path().join("log.jsonl");
    fs::write(&log, "").unwrap();
    let ctx = Context::new(tmp.path().join("out"), quick_config());
    let s = commands::rank(&ctx, &log, Some(&data), None).unwrap();
    assert_eq!(s.images, 5);
    assert!(s.result.ratings.values().all(|r| r.mean_rating == 1000.0 && r.std_rating == 0.0));
    assert!(tmp.path().join("out/rank.svg").is_file());
    assert!(tmp.path().join("out/sites.svg").is_file());
}

#[test]
fn rank_rerun_is_byte_identical_and_seeded() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = Context::new(tmp.path().join("sim"), quick_config());
    let opts = SimulateOptions {
        n_images: Some(20),
        n_comparisons: Some(400),
        ..SimulateOptions::default()
    };
    let s = commands::simulate(&sim, &opts).unwrap();
    let read = |d: &str| fs::read(tmp.path().join(d).join("elo.csv")).unwrap();
    for d in ["r1", "r2"] {
        commands::rank(&Context::new(tmp.path().join(d), quick_config()).with_seed(3), &s.log, None, None).unwrap();
    }
    commands::rank(&Context::new(tmp.path().join("r3"), quick_config()).with_seed(4), &s.log, None, None).unwrap();
    assert_eq!(read("r1"), read("r2"));
    assert_ne!(read("r1"), read("r3"));
}

#[test]
fn rank_rejects_unknown_images() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_dataset(&data, 3);
    let log = tmp.path().join("log.jsonl");
    rating::write_log(&log, &[judgment("c1", "op", "img-000", "ghost", Outcome::Neutral, None)]).unwrap();
    let err = commands::rank(&Context::new(tmp.path().join("o"), quick_config()), &log, Some(&data), None).unwrap_err();
    assert!(matches!(err, CliError::Data(ref m) if m.contains("ghost")), "{err}");
}

#[test]
fn simulated_log_ranks_against_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let ctx = Context::new(tmp.path(), quick_config());
    let s = commands::simulate(&ctx, &SimulateOptions::default()).unwrap();
    assert_eq!(s.judgments, 5722);
    let replay = rating::replay_log(&s.log).unwrap();
    assert_eq!(replay.records.len(), 5722);
    assert!(replay.errors.is_empty());
    let r = commands::rank(&ctx, &s.log, None, Some(&s.truth)).unwrap();
    assert!(r.spearman_vs_truth.unwrap() >= 0.9);
}

#[test]
fn noiseless_simulation_ranks_in_latent_order() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = quick_config();
    cfg.elo = EloConfig {
        num_replications: 100,
        k_factor: 16.0,
        ..EloConfig::default()
    };
    let ctx = Context::new(tmp.path(), cfg);
    let opts = SimulateOptions {
        n_images: Some(10),
        n_comparisons: Some(3000),
        noise: Some(0.0),
        neutral_band: Some(0.0),
        ..SimulateOptions::default()
    };
    let s = commands::simulate(&ctx, &opts).unwrap();
    let truth = commands::read_truth(&s.truth).unwrap();
    let replay = rating::replay_log(&s.log).unwrap();
    for c in &replay.records {
        let left_wins = truth[&c.left] > truth[&c.right];
        assert_eq!(c.outcome, if left_wins { Outcome::LeftMoreComplex } else { Outcome::RightMoreComplex });
    }
    let r = commands::rank(&ctx, &s.log, None, Some(&s.truth)).unwrap();
    let mut by_truth: Vec<(&String, &f64)> = truth.iter().collect();
    by_truth.sort_by(|a, b| a.1.total_cmp(b.1));
    let means: Vec<f64> = by_truth.iter().map(|(id, _)| r.result.ratings[*id].mean_rating).collect();
    assert!(means.windows(2).all(|w| w[0] < w[1]), "{means:?}");
}

fn write_tables(dir: &Path, elo: &[(String, f64)], metric: impl Fn(usize, f64) -> f64) -> (std::path::PathBuf, std::path::PathBuf) {
    fs::create_dir_all(dir).unwrap();
    let mut e = String::from("rank,id,mean\n");
    let mut m = String::from("id,site,lacunarity,edge_intensity,entropy,compression_ratio,compression_ratio_rmse,reason\n");
    for (i, (id, v)) in elo.iter().enumerate() {
        e += &format!("{},{id},{v}\n", i + 1);
        let x = metric(i, *v);
        m += &format!("{id},A,{x},{x},{x},{x},,\n");
    }
    let (ep, mp) = (dir.join("elo.csv"), dir.join("metrics.csv"));
    fs::write(&ep, e).unwrap();
    fs::write(&mp, m).unwrap();
    (mp, ep)
}

#[test]
fn analyze_fits_and_reports_every_metric() {
    let tmp = tempfile::tempdir().unwrap();
    let elo: Vec<(String, f64)> = (0..117).map(|i| (format!("img-{i:03}"), 800.0 + 4.0 * i as f64)).collect();
    let (m, e) = write_tables(tmp.path(), &elo, |_, v| 2.0 * v + 1.0);
    let ctx = Context::new(tmp.path().join("out"), quick_config());
    let fits = commands::analyze(&ctx, &m, &e).unwrap();
    assert_eq!(fits.len(), 5);
    for (name, fit) in &fits[..4] {
        let f = fit.as_ref().unwrap();
        assert!((f.r_squared - 1.0).abs() < 1e-12, "{name}");
        assert!((f.slope - 2.0).abs() < 1e-9);
    }
    assert!(fits[4].1.as_ref().unwrap_err().starts_with("INSUFFICIENT_DATA"));
    let csv = fs::read_to_string(tmp.path().join("out/regression.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert_eq!(fs::read_dir(tmp.path().join("out")).unwrap().filter(|e| {
        e.as_ref().unwrap().file_name().to_string_lossy().starts_with("scatter_")
    }).count(), 4);
}

#[test]
fn analyze_noise_metric_has_low_r_squared() {
    let tmp = tempfile::tempdir().unwrap();
    let elo: Vec<(String, f64)> = (0..117).map(|i| (format!("img-{i:03}"), 800.0 + 4.0 * i as f64)).collect();
    let mut noise: Vec<f64> = (0..117).map(|i| i as f64).collect();
    noise.shuffle(&mut ChaCha8Rng::seed_from_u64(0));
    let (m, e) = write_tables(tmp.path(), &elo, |i, _| noise[i]);
    let fits = commands::analyze(&Context::new(tmp.path().join("out"), quick_config()), &m, &e).unwrap();
    assert!(fits[0].1.as_ref().unwrap().r_squared < 0.1);
}

#[test]
fn analyze_needs_two_joined_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let (m, _) = write_tables(&tmp.path().join("a"), &[("x".into(), 1.0), ("y".into(), 2.0)], |_, v| v);
    let (_, e) = write_tables(&tmp.path().join("b"), &[("x".into(), 1.0), ("z".into(), 2.0)], |_, v| v);
    let err = commands::analyze(&Context::new(tmp.path().join("out"), quick_config()), &m, &e).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn consistency_examples() {
    let tmp = tempfile::tempdir().unwrap();
    let log = tmp.path().join("log.jsonl");
    let ids = ["a", "b", "c", "d"];
    let mut recs = Vec::new();
    let mut k = 0;
    for i in 0..4 {
        for j in i + 1..4 {
            let o = if (i + j) % 2 == 0 { Outcome::LeftMoreComplex } else { Outcome::RightMoreComplex };
            k += 1;
            recs.push(judgment(&format!("p{k}"), "steady", ids[i], ids[j], o, None));
            recs.push(judgment(&format!("q{k}"), "contrary", ids[i], ids[j], o.swapped(), None));
            recs.push(judgment(&format!("r{k}"), "steady", ids[j], ids[i], o.swapped(), Some(&format!("p{k}"))));
        }
    }
    recs.push(judgment("s1", "loner", "a", "b", Outcome::Neutral, None));
    rating::write_log(&log, &recs).unwrap();
    let m = commands::consistency(&Context::new(tmp.path().join("out"), quick_config()), &log, 0.5).unwrap();
    assert!((m.self_consistency("steady").unwrap() - 1.0).abs() < 1e-12);
    assert!((m.get("contrary", "steady").unwrap() + 1.0).abs() < 1e-12);
    let csv = fs::read_to_string(tmp.path().join("out/consistency.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("loner,INSUFFICIENT_REPEATS")));
    assert!(csv.lines().any(|l| l.starts_with("steady,OK,,,1.00000000")));
}

#[test]
fn identical_noiseless_raters_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let ctx = Context::new(tmp.path(), quick_config());
    let opts = SimulateOptions {
        n_images: Some(6),
        n_comparisons: Some(2000),
        raters: Some(2),
        noise: Some(0.0),
        neutral_band: Some(0.0),
        ..SimulateOptions::default()
    };
    let s = commands::simulate(&ctx, &opts).unwrap();
    let m = commands::consistency(&ctx, &s.log, 0.5).unwrap();
    assert!((m.get("sim-rater-1", "sim-rater-2").unwrap() - 1.0).abs() < 1e-12);
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sonar-complexity"))
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let usage = bin().arg("frobnicate").status().unwrap();
    assert_eq!(usage.code(), Some(1));
    let missing = bin().args(["--out"]).arg(tmp.path()).args(["rank", "--log", "absent.jsonl"]).status().unwrap();
    assert_eq!(missing.code(), Some(2));
    let bad = bin()
        .args(["--out"])
        .arg(tmp.path())
        .args(["simulate", "--n-images", "1"])
        .status()
        .unwrap();
    assert_eq!(bad.code(), Some(1));
    let ok = bin()
        .args(["--seed", "9", "--out"])
        .arg(tmp.path())
        .args(["simulate", "--n-images", "5", "--n-comparisons", "20"])
        .output()
        .unwrap();
    assert!(ok.status.success());
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("simulate.config.json")).unwrap()).unwrap();
    assert_eq!(sidecar["seed"], 9);
}

#[test]
fn config_file_is_applied() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "[simulate]\nn_images = 7\nn_comparisons = 30\n").unwrap();
    let status = bin()
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path())
        .arg("simulate")
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(fs::read_to_string(tmp.path().join("latent.csv")).unwrap().lines().count(), 8);
    fs::write(&cfg, "[simulate\n").unwrap();
    let status = bin().arg("--config").arg(&cfg).arg("simulate").status().unwrap();
    assert_eq!(status.code(), Some(1));
}
