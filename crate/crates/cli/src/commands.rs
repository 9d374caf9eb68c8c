//! Subcommand bodies. Each writes its tables and plots into the output
//! directory together with a `<command>.config.json` sidecar recording the
//! configuration and seed that produced them.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use sonar_complexity::analysis::{self, ConsistencyMatrix, RegressionResult};
use sonar_complexity::dataset::{self, LoadReport};
use sonar_complexity::elo::{self, Comparison, EloResult};
use sonar_complexity::metrics::{self, MetricVector};
use sonar_complexity::rating::{self, LineError};
use sonar_complexity::simulate::{self, RaterModel};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::svg;
use crate::table::{self, fmt9};

/// Shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Context {
    pub out: PathBuf,
    /// Overrides every seed in `config` when set.
    pub seed: Option<u64>,
    pub config: RunConfig,
}

impl Context {
    pub fn new(out: impl Into<PathBuf>, config: RunConfig) -> Self {
        Self {
            out: out.into(),
            seed: None,
            config,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    fn prepare(&self) -> Result<()> {
        fs::create_dir_all(&self.out)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", self.out.display())))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        let p = self.path(name);
        fs::write(&p, contents).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", p.display())))?;
        Ok(p)
    }

    fn sidecar(&self, command: &str, body: serde_json::Value) -> Result<PathBuf> {
        let mut doc = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
        });
        if let (Some(d), Some(b)) = (doc.as_object_mut(), body.as_object()) {
            d.extend(b.clone());
        }
        let text = serde_json::to_string_pretty(&doc).expect("json value serializes");
        self.write(&format!("{command}.config.json"), &(text + "\n"))
    }
}

fn load(root: &Path) -> Result<LoadReport> {
    Ok(dataset::load_dataset(root)?)
}

fn rejection_list(report: &LoadReport) -> Vec<serde_json::Value> {
    report
        .rejected
        .iter()
        .map(|r| {
            json!({
                "id": r.id,
                "reasons": r.reasons.iter().map(|x| x.code()).collect::<Vec<_>>(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestSummary {
    pub accepted: usize,
    pub rejected: usize,
}

/// Loads a dataset and tabulates the QC verdict of every manifest entry.
pub fn ingest_check(ctx: &Context, root: &Path) -> Result<IngestSummary> {
    ctx.prepare()?;
    let report = load(root)?;
    let mut w = table::writer(&ctx.path("ingest.csv"))?;
    w.write_record(["id", "site", "range_m", "width", "height", "status", "reasons"])?;
    for c in &report.accepted {
        w.write_record([
            c.id.as_str(),
            &c.site,
            &fmt9(c.range_m),
            &c.image.width().to_string(),
            &c.image.height().to_string(),
            "ACCEPTED",
            "",
        ])?;
    }
    for r in &report.rejected {
        let reasons: Vec<String> = r
            .reasons
            .iter()
            .map(|x| format!("{}: {}", x.code(), reason_detail(x)))
            .collect();
        w.write_record([r.id.as_str(), "", "", "", "", "REJECTED", &reasons.join("; ")])?;
    }
    w.flush()?;
    ctx.sidecar(
        "ingest",
        json!({
            "dataset": root,
            "meters_per_pixel": report.meters_per_pixel,
            "accepted": report.accepted.len(),
            "rejected": rejection_list(&report),
        }),
    )?;
    Ok(IngestSummary {
        accepted: report.accepted.len(),
        rejected: report.rejected.len(),
    })
}

fn reason_detail(r: &dataset::RejectReason) -> String {
    use dataset::RejectReason::*;
    match r {
        RangeOutOfBounds(s) | MissingFile(s) | Undecodable(s) | MetadataMismatch(s) | DuplicateId(s) => s.clone(),
        QcFlagged(f) => serde_json::to_value(f)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default(),
    }
}

/// Metric vectors for every accepted chip, in id order.
pub fn compute_all(report: &LoadReport, cfg: &metrics::MetricConfig) -> Vec<MetricVector> {
    report
        .accepted
        .par_iter()
        .map(|c| metrics::compute_metric_vector(c, cfg))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsSummary {
    pub rows: usize,
    pub failed_cells: usize,
    pub rejected_chips: usize,
}

/// One row per accepted chip. Metrics that cannot be computed leave an
/// empty cell and a `metric:CODE` entry in the reason column.
pub fn metrics_table(ctx: &Context, root: &Path) -> Result<MetricsSummary> {
    ctx.prepare()?;
    let cfg = &ctx.config.metrics;
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let report = load(root)?;
    let vectors = compute_all(&report, cfg);

    let mut w = table::writer(&ctx.path("metrics.csv"))?;
    let mut header = vec!["id", "site"];
    header.extend(MetricVector::NAMES);
    header.push("reason");
    w.write_record(&header)?;
    let mut failed = 0;
    for (chip, mv) in report.accepted.iter().zip(&vectors) {
        let mut row = vec![chip.id.clone(), chip.site.clone()];
        let mut reasons = Vec::new();
        for (name, value) in mv.fields() {
            match value {
                Ok(v) => row.push(fmt9(*v)),
                Err(e) => {
                    failed += 1;
                    row.push(String::new());
                    reasons.push(format!("{name}:{}", e.code()));
                }
            }
        }
        row.push(reasons.join(";"));
        w.write_record(&row)?;
    }
    w.flush()?;
    ctx.sidecar(
        "metrics",
        json!({
            "dataset": root,
            "meters_per_pixel": report.meters_per_pixel,
            "metrics": cfg,
            "rejected": rejection_list(&report),
        }),
    )?;
    Ok(MetricsSummary {
        rows: report.accepted.len(),
        failed_cells: failed,
        rejected_chips: report.rejected.len(),
    })
}

fn replay(log: &Path) -> Result<(Vec<Comparison>, Vec<LineError>)> {
    if !log.is_file() {
        return Err(CliError::Data(format!("judgment log {} not found", log.display())));
    }
    let r = rating::replay_log(log).map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", log.display())))?;
    for e in &r.errors {
        eprintln!("warning: {}:{}: {}", log.display(), e.line, e.message);
    }
    Ok((r.records, r.errors))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankSummary {
    pub images: usize,
    pub judgments: usize,
    pub skipped_lines: usize,
    /// Spearman correlation against a ground-truth table, when given.
    pub spearman_vs_truth: Option<f64>,
    pub result: EloResult,
}

/// `id -> value` from a two-column `id,<value>` table such as `latent.csv`.
pub fn read_truth(path: &Path) -> Result<BTreeMap<String, f64>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        if row.len() < 2 {
            return Err(CliError::Data(format!("{}: row {} has fewer than 2 columns", path.display(), i + 2)));
        }
        let v: f64 = row[1]
            .parse()
            .map_err(|_| CliError::Data(format!("{}: row {}: bad value `{}`", path.display(), i + 2, &row[1])))?;
        out.insert(row[0].to_owned(), v);
    }
    Ok(out)
}

/// Replicated Elo ratings for a judgment log, rank plot, and (with a
/// dataset) the per-site box plot.
pub fn rank(ctx: &Context, log: &Path, root: Option<&Path>, truth: Option<&Path>) -> Result<RankSummary> {
    ctx.prepare()?;
    let mut cfg = ctx.config.elo.clone();
    if let Some(s) = ctx.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let (records, errors) = replay(log)?;

    let (ids, sites) = match root {
        Some(r) => {
            let report = load(r)?;
            let sites: BTreeMap<String, String> =
                report.accepted.iter().map(|c| (c.id.clone(), c.site.clone())).collect();
            (report.ids(), Some(sites))
        }
        None => {
            let ids: BTreeSet<String> = records.iter().flat_map(|c| [c.left.clone(), c.right.clone()]).collect();
            (ids.into_iter().collect(), None)
        }
    };
    let known: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
    let dangling: Vec<String> = records
        .iter()
        .filter(|c| !known.contains(c.left.as_str()) || !known.contains(c.right.as_str()))
        .map(|c| format!("{} ({} vs {})", c.id, c.left, c.right))
        .collect();
    if !dangling.is_empty() {
        let shown: Vec<&str> = dangling.iter().take(10).map(String::as_str).collect();
        return Err(CliError::Data(format!(
            "{} judgment(s) reference images outside the dataset: {}{}",
            dangling.len(),
            shown.join(", "),
            if dangling.len() > 10 { ", ..." } else { "" }
        )));
    }
    if ids.is_empty() {
        return Err(CliError::Data("no images to rank".into()));
    }

    let result = elo::run_replicated(&records, &ids, &cfg)?;
    let ranked = analysis::rank_order(&result);
    let mut w = table::writer(&ctx.path("elo.csv"))?;
    w.write_record(["rank", "id", "site", "mean", "std", "ci_low", "ci_high", "comparisons"])?;
    for (i, r) in ranked.iter().enumerate() {
        let ir = &result.ratings[&r.id];
        let site = sites.as_ref().and_then(|s| s.get(&r.id)).cloned().unwrap_or_default();
        w.write_record([
            (i + 1).to_string(),
            r.id.clone(),
            site,
            fmt9(ir.mean_rating),
            fmt9(ir.std_rating),
            fmt9(ir.ci_low),
            fmt9(ir.ci_high),
            ir.comparisons_count.to_string(),
        ])?;
    }
    w.flush()?;

    let meta = serde_json::to_string(&json!({"elo": cfg, "log": log})).expect("json");
    ctx.write("rank.svg", &svg::rank_plot(&ranked, &meta))?;
    if let Some(sites) = &sites {
        let boxes = analysis::site_summary(&result, sites)?;
        let mut w = table::writer(&ctx.path("sites.csv"))?;
        w.write_record(["site", "n", "q1", "median", "q3", "whisker_low", "whisker_high", "outliers"])?;
        for b in &boxes {
            let outliers: Vec<&str> = b.outliers.iter().map(|o| o.0.as_str()).collect();
            w.write_record([
                b.site.clone(),
                b.n.to_string(),
                fmt9(b.q1),
                fmt9(b.median),
                fmt9(b.q3),
                fmt9(b.whisker_low),
                fmt9(b.whisker_high),
                outliers.join(";"),
            ])?;
        }
        w.flush()?;
        ctx.write("sites.svg", &svg::site_box_plot(&boxes, &meta))?;
    }

    let spearman_vs_truth = match truth {
        Some(t) => {
            let truth = read_truth(t)?;
            let (a, b): (Vec<f64>, Vec<f64>) = ids
                .iter()
                .filter_map(|id| Some((result.ratings[id].mean_rating, *truth.get(id)?)))
                .unzip();
            if a.len() < 2 {
                return Err(CliError::Data("ground truth shares fewer than 2 ids with the ranking".into()));
            }
            analysis::spearman(&a, &b)?
        }
        None => None,
    };
    ctx.sidecar(
        "rank",
        json!({
            "log": log,
            "dataset": root,
            "seed": cfg.seed,
            "elo": cfg,
            "judgments": records.len(),
            "skipped_lines": errors,
            "spearman_vs_truth": spearman_vs_truth,
        }),
    )?;
    Ok(RankSummary {
        images: ids.len(),
        judgments: records.len(),
        skipped_lines: errors.len(),
        spearman_vs_truth,
        result,
    })
}

/// Regresses each metric (dependent) on mean Elo score (independent).
/// Metrics with fewer than two usable rows get empty cells and a reason.
pub fn analyze(ctx: &Context, metrics_csv: &Path, elo_csv: &Path) -> Result<Vec<(String, std::result::Result<RegressionResult, String>)>> {
    ctx.prepare()?;
    let elo = table::read_elo_csv(elo_csv)?;
    let metrics = table::read_metrics_csv(metrics_csv, &MetricVector::NAMES)?;
    let joined: Vec<(&String, f64, &BTreeMap<String, f64>)> = metrics
        .rows
        .iter()
        .filter_map(|(id, m)| Some((id, *elo.get(id)?, m)))
        .collect();
    if joined.len() < 2 {
        return Err(CliError::Data(format!(
            "joining {} and {} on id leaves {} row(s), need at least 2",
            metrics_csv.display(),
            elo_csv.display(),
            joined.len()
        )));
    }

    let mut out = Vec::new();
    let mut w = table::writer(&ctx.path("regression.csv"))?;
    w.write_record(["metric", "slope", "intercept", "r_squared", "n", "reason"])?;
    for name in &metrics.metric_names {
        let (x, y): (Vec<f64>, Vec<f64>) = joined
            .iter()
            .filter_map(|(_, e, m)| Some((*e, *m.get(name)?)))
            .unzip();
        let fit = if x.len() < 2 {
            Err(format!("INSUFFICIENT_DATA: {} usable row(s)", x.len()))
        } else {
            analysis::linear_regression(&x, &y, name).map_err(|e| match e {
                analysis::StatsError::DegenerateRegressor => "DEGENERATE_REGRESSOR: Elo scores are constant".to_string(),
                other => other.to_string(),
            })
        };
        match &fit {
            Ok(f) => {
                w.write_record([
                    name.clone(),
                    fmt9(f.slope),
                    fmt9(f.intercept),
                    fmt9(f.r_squared),
                    f.n.to_string(),
                    String::new(),
                ])?;
                let meta = serde_json::to_string(&json!({"metrics": metrics_csv, "elo": elo_csv})).expect("json");
                ctx.write(&format!("scatter_{name}.svg"), &svg::scatter_plot(&x, &y, f, &meta))?;
            }
            Err(reason) => {
                w.write_record([name.as_str(), "", "", "", &x.len().to_string(), reason])?;
            }
        }
        out.push((name.clone(), fit));
    }
    w.flush()?;
    ctx.sidecar(
        "analyze",
        json!({
            "metrics": metrics_csv,
            "elo": elo_csv,
            "joined_rows": joined.len(),
            "orientation": "metric = slope * elo + intercept",
        }),
    )?;
    Ok(out)
}

/// Operator agreement matrix (upper triangle plus diagonal) and the
/// matching overlap counts.
pub fn consistency(ctx: &Context, log: &Path, threshold: f64) -> Result<ConsistencyMatrix> {
    ctx.prepare()?;
    let (records, errors) = replay(log)?;
    let m = analysis::operator_consistency(&records);
    let statuses = m.statuses(threshold);
    let ops = &m.operator_ids;

    let mut header = vec!["operator".to_string(), "status".to_string()];
    header.extend(ops.iter().cloned());
    let mut w = table::writer(&ctx.path("consistency.csv"))?;
    w.write_record(&header)?;
    let mut wc = table::writer(&ctx.path("consistency_counts.csv"))?;
    wc.write_record(&header)?;
    for (i, op) in ops.iter().enumerate() {
        let mut row = vec![op.clone(), statuses[i].1.as_str().to_string()];
        let mut counts = row.clone();
        for j in 0..ops.len() {
            if j < i {
                row.push(String::new());
                counts.push(String::new());
            } else {
                row.push(m.matrix[i][j].map(fmt9).unwrap_or_default());
                counts.push(m.pair_counts[i][j].to_string());
            }
        }
        w.write_record(&row)?;
        wc.write_record(&counts)?;
    }
    w.flush()?;
    wc.flush()?;
    ctx.sidecar(
        "consistency",
        json!({
            "log": log,
            "self_consistency_threshold": threshold,
            "judgments": records.len(),
            "skipped_lines": errors,
        }),
    )?;
    Ok(m)
}

/// Optional knobs layered over the configured simulation.
#[derive(Debug, Clone, Default)]
pub struct SimulateOptions {
    pub n_images: Option<usize>,
    pub n_comparisons: Option<usize>,
    pub raters: Option<usize>,
    pub noise: Option<f64>,
    pub bias_sd: Option<f64>,
    pub neutral_band: Option<f64>,
    pub p_repeat: Option<f64>,
    /// Also write a synthetic chip dataset whose ids match the log.
    pub dataset_out: Option<PathBuf>,
    pub chip_px: usize,
    pub meters_per_pixel: f64,
    /// Take latent complexity from this metric of the synthetic chips
    /// instead of drawing it at random.
    pub latent_from: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateSummary {
    pub log: PathBuf,
    pub truth: PathBuf,
    pub judgments: usize,
    pub images: usize,
}

/// Writes `judgments.jsonl` and `latent.csv` (plus a dataset on request).
pub fn simulate(ctx: &Context, opts: &SimulateOptions) -> Result<SimulateSummary> {
    ctx.prepare()?;
    let mut cfg = ctx.config.simulate.clone();
    if let Some(s) = ctx.seed {
        cfg.seed = s;
    }
    if let Some(n) = opts.n_images {
        cfg.n_images = n;
    }
    if let Some(m) = opts.n_comparisons {
        cfg.n_comparisons = m;
    }
    if let Some(k) = opts.raters {
        let template = cfg.raters.first().cloned().unwrap_or_else(|| RaterModel::new("", 400.0));
        cfg.raters = (1..=k)
            .map(|i| RaterModel {
                id: format!("sim-rater-{i}"),
                ..template.clone()
            })
            .collect();
    }
    for r in &mut cfg.raters {
        if let Some(v) = opts.noise {
            r.noise = v;
        }
        if let Some(v) = opts.bias_sd {
            r.bias_sd = v;
        }
    }
    if let Some(v) = opts.neutral_band {
        cfg.neutral_band = v;
    }
    if let Some(v) = opts.p_repeat {
        cfg.p_repeat = v;
    }
    cfg.validate()?;
    if opts.latent_from.is_some() && opts.dataset_out.is_none() {
        return Err(CliError::Usage("--latent-from needs --dataset-out".into()));
    }

    let (ids, latent, records) = match &opts.dataset_out {
        None => {
            let sim = simulate::simulate(&cfg)?;
            (sim.image_ids, sim.latent, sim.records)
        }
        Some(dir) => {
            if !(opts.meters_per_pixel > 0.0) {
                return Err(CliError::Usage("meters per pixel must be positive".into()));
            }
            let chips = dataset::synthesize_site_dataset(cfg.n_images, opts.chip_px, opts.meters_per_pixel, cfg.seed)?;
            dataset::write_dataset(dir, &chips, opts.meters_per_pixel, "synthetic seabed textures")?;
            let ids: Vec<String> = chips.iter().map(|c| c.id.clone()).collect();
            let latent = match &opts.latent_from {
                None => simulate::simulate(&cfg)?.latent,
                Some(metric) => {
                    let k = MetricVector::NAMES
                        .iter()
                        .position(|n| n == metric)
                        .ok_or_else(|| CliError::Usage(format!("unknown metric `{metric}`")))?;
                    let mcfg = &ctx.config.metrics;
                    let values: Vec<f64> = chips
                        .par_iter()
                        .map(|c| {
                            let mv = metrics::compute_metric_vector(c, mcfg);
                            mv.fields()[k].1.clone().map_err(|e| CliError::Data(format!("{}: {e}", c.id)))
                        })
                        .collect::<Result<_>>()?;
                    latent_from_values(&values, cfg.latent_center, cfg.latent_spread)
                }
            };
            let records = simulate::simulate_judgments(&ids, &latent, &cfg)?;
            (ids, latent, records)
        }
    };

    let log = ctx.path("judgments.jsonl");
    rating::write_log(&log, &records)?;
    let truth = ctx.path("latent.csv");
    let mut w = table::writer(&truth)?;
    w.write_record(["id", "latent"])?;
    for (id, v) in ids.iter().zip(&latent) {
        w.write_record([id.clone(), fmt9(*v)])?;
    }
    w.flush()?;
    ctx.sidecar(
        "simulate",
        json!({
            "seed": cfg.seed,
            "simulate": cfg,
            "dataset_out": opts.dataset_out,
            "chip_px": opts.dataset_out.as_ref().map(|_| opts.chip_px),
            "meters_per_pixel": opts.dataset_out.as_ref().map(|_| opts.meters_per_pixel),
            "latent_from": opts.latent_from,
            "metrics": opts.latent_from.as_ref().map(|_| &ctx.config.metrics),
        }),
    )?;
    Ok(SimulateSummary {
        log,
        truth,
        judgments: records.len(),
        images: ids.len(),
    })
}

/// Affine map of `values` onto `[center - spread/2, center + spread/2]`.
pub fn latent_from_values(values: &[f64], center: f64, spread: f64) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    values
        .iter()
        .map(|v| {
            if hi > lo {
                center - spread / 2.0 + spread * (v - lo) / (hi - lo)
            } else {
                center
            }
        })
        .collect()
}
