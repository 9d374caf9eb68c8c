//! Correlation, regression, rater agreement and score summaries.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::elo::{Comparison, EloResult, Outcome};
use crate::stats;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("regressor is constant")]
    DegenerateRegressor,
    #[error("image {0} has no site label")]
    MissingLabel(String),
}

pub type Result<T> = std::result::Result<T, StatsError>;

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(StatsError::InvalidArgument(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(StatsError::InvalidArgument("need at least two observations".into()));
    }
    Ok(())
}

/// Sample Pearson correlation; `None` when either input is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    check_pair(x, y)?;
    let mx = stats::mean(x);
    let my = stats::mean(y);
    let sxy = stats::compensated_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let sxx = stats::compensated_sum(x.iter().map(|a| (a - mx) * (a - mx)));
    let syy = stats::compensated_sum(y.iter().map(|b| (b - my) * (b - my)));
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)))
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with midranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    check_pair(x, y)?;
    pearson(&midranks(x), &midranks(y))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionResult {
    pub metric_name: String,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n: usize,
}

/// Ordinary least squares of `y` (metric) on `x` (Elo score).
pub fn linear_regression(x: &[f64], y: &[f64], metric_name: &str) -> Result<RegressionResult> {
    check_pair(x, y)?;
    let mx = stats::mean(x);
    let my = stats::mean(y);
    let sxx = stats::compensated_sum(x.iter().map(|a| (a - mx) * (a - mx)));
    if sxx == 0.0 {
        return Err(StatsError::DegenerateRegressor);
    }
    let sxy = stats::compensated_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let syy = stats::compensated_sum(y.iter().map(|b| (b - my) * (b - my)));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        0.0
    } else {
        let ss_res = stats::compensated_sum(
            x.iter()
                .zip(y)
                .map(|(a, b)| {
                    let e = b - (intercept + slope * a);
                    e * e
                }),
        );
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(RegressionResult {
        metric_name: metric_name.to_owned(),
        slope: if syy == 0.0 { 0.0 } else { slope },
        intercept: if syy == 0.0 { my } else { intercept },
        r_squared,
        n: x.len(),
    })
}

/// Signed judgment under a fixed pair orientation: +1 when `canonical.0`
/// was judged more complex, -1 for `canonical.1`, 0 for neutral.
pub fn encode_outcome(c: &Comparison, canonical: (&str, &str)) -> Result<f64> {
    let sign = if (c.left.as_str(), c.right.as_str()) == canonical {
        1.0
    } else if (c.right.as_str(), c.left.as_str()) == canonical {
        -1.0
    } else {
        return Err(StatsError::InvalidArgument(format!(
            "comparison {} is of ({}, {}), not ({}, {})",
            c.id, c.left, c.right, canonical.0, canonical.1
        )));
    };
    Ok(match c.outcome {
        Outcome::LeftMoreComplex => sign,
        Outcome::RightMoreComplex => -sign,
        Outcome::Neutral => 0.0,
    })
}

fn canonical_pair(c: &Comparison) -> (String, String) {
    if c.left <= c.right {
        (c.left.clone(), c.right.clone())
    } else {
        (c.right.clone(), c.left.clone())
    }
}

fn encode_canonical(c: &Comparison) -> f64 {
    let (a, b) = canonical_pair(c);
    encode_outcome(c, (&a, &b)).expect("canonical pair matches its own comparison")
}

/// Pairwise operator agreement. Entries are `None` where fewer than two
/// judgments overlap or a judgment vector has no variation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyMatrix {
    pub operator_ids: Vec<String>,
    pub matrix: Vec<Vec<Option<f64>>>,
    pub pair_counts: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OperatorStatus {
    Ok,
    Excluded,
    InsufficientRepeats,
}

impl OperatorStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            OperatorStatus::Ok => "OK",
            OperatorStatus::Excluded => "EXCLUDED",
            OperatorStatus::InsufficientRepeats => "INSUFFICIENT_REPEATS",
        }
    }
}

pub const DEFAULT_SELF_CONSISTENCY_THRESHOLD: f64 = 0.5;

impl ConsistencyMatrix {
    pub fn self_consistency(&self, operator: &str) -> Option<f64> {
        let i = self.operator_ids.iter().position(|o| o == operator)?;
        self.matrix[i][i]
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.operator_ids.iter().position(|o| o == a)?;
        let j = self.operator_ids.iter().position(|o| o == b)?;
        self.matrix[i][j]
    }

    /// Operators whose self-consistency falls below `threshold` are excluded.
    pub fn statuses(&self, threshold: f64) -> Vec<(String, OperatorStatus)> {
        self.operator_ids
            .iter()
            .enumerate()
            .map(|(i, op)| {
                let status = match self.matrix[i][i] {
                    None => OperatorStatus::InsufficientRepeats,
                    Some(r) if r < threshold => OperatorStatus::Excluded,
                    Some(_) => OperatorStatus::Ok,
                };
                (op.clone(), status)
            })
            .collect()
    }
}

/// Builds the operator agreement matrix from a judgment log.
///
/// Off-diagonal entries correlate two operators' original judgments on the
/// image pairs both judged; repeated judgments of the same pair are matched
/// in order of occurrence and leftovers dropped. Diagonal entries correlate
/// each injected repeat with the judgment it repeats.
pub fn operator_consistency(comparisons: &[Comparison]) -> ConsistencyMatrix {
    let operators: Vec<String> = comparisons
        .iter()
        .map(|c| c.operator_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: HashMap<&str, usize> = operators
        .iter()
        .enumerate()
        .map(|(i, o)| (o.as_str(), i))
        .collect();
    let n = operators.len();

    // originals per operator, grouped by canonical pair, in log order
    let mut originals: Vec<BTreeMap<(String, String), Vec<f64>>> = vec![BTreeMap::new(); n];
    let by_id: HashMap<&str, &Comparison> = comparisons.iter().map(|c| (c.id.as_str(), c)).collect();
    let mut repeats: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); n];

    for c in comparisons {
        let op = index[c.operator_id.as_str()];
        match &c.repeat_of {
            None => originals[op]
                .entry(canonical_pair(c))
                .or_default()
                .push(encode_canonical(c)),
            Some(orig_id) => {
                let Some(orig) = by_id.get(orig_id.as_str()) else { continue };
                if orig.operator_id != c.operator_id || canonical_pair(orig) != canonical_pair(c) {
                    continue;
                }
                repeats[op].0.push(encode_canonical(orig));
                repeats[op].1.push(encode_canonical(c));
            }
        }
    }

    let mut matrix = vec![vec![None; n]; n];
    let mut pair_counts = vec![vec![0usize; n]; n];
    for p in 0..n {
        let (a, b) = &repeats[p];
        pair_counts[p][p] = a.len();
        if a.len() >= 2 {
            matrix[p][p] = pearson(a, b).ok().flatten();
        }
        for q in p + 1..n {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for (pair, pv) in &originals[p] {
                if let Some(qv) = originals[q].get(pair) {
                    for (x, y) in pv.iter().zip(qv) {
                        xs.push(*x);
                        ys.push(*y);
                    }
                }
            }
            let r = if xs.len() >= 2 {
                pearson(&xs, &ys).ok().flatten()
            } else {
                None
            };
            matrix[p][q] = r;
            matrix[q][p] = r;
            pair_counts[p][q] = xs.len();
            pair_counts[q][p] = xs.len();
        }
    }
    ConsistencyMatrix {
        operator_ids: operators,
        matrix,
        pair_counts,
    }
}

/// Box-plot statistics of one site's mean Elo scores.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SiteSummary {
    pub site: String,
    pub n: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<(String, f64)>,
}

/// Quartiles interpolated at positions `p (n + 1)` and whiskers at the most
/// extreme scores within 1.5 IQR of the box. Sites are returned in label order.
pub fn site_summary(elo: &EloResult, site_of: &BTreeMap<String, String>) -> Result<Vec<SiteSummary>> {
    let mut by_site: BTreeMap<&str, Vec<(&str, f64)>> = BTreeMap::new();
    for (id, r) in &elo.ratings {
        let site = site_of
            .get(id)
            .ok_or_else(|| StatsError::MissingLabel(id.clone()))?;
        by_site.entry(site).or_default().push((id, r.mean_rating));
    }
    Ok(by_site
        .into_iter()
        .map(|(site, members)| box_stats(site, &members))
        .collect())
}

fn box_stats(site: &str, members: &[(&str, f64)]) -> SiteSummary {
    let scores: Vec<f64> = members.iter().map(|m| m.1).collect();
    let sorted = stats::sorted_copy(&scores);
    let q1 = stats::quartile_sorted(&sorted, 0.25);
    let median = stats::quartile_sorted(&sorted, 0.5);
    let q3 = stats::quartile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = sorted
        .iter()
        .copied()
        .filter(|v| (lo_fence..=hi_fence).contains(v))
        .collect();
    let mut outliers: Vec<(String, f64)> = members
        .iter()
        .filter(|(_, v)| !(lo_fence..=hi_fence).contains(v))
        .map(|(id, v)| (id.to_string(), *v))
        .collect();
    outliers.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    SiteSummary {
        site: site.to_owned(),
        n: members.len(),
        q1,
        median,
        q3,
        whisker_low: inside.first().copied().unwrap_or(q1),
        whisker_high: inside.last().copied().unwrap_or(q3),
        outliers,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedImage {
    pub id: String,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Images by descending mean rating, ties broken by id.
pub fn rank_order(elo: &EloResult) -> Vec<RankedImage> {
    let mut ranked: Vec<RankedImage> = elo
        .ratings
        .iter()
        .map(|(id, r)| RankedImage {
            id: id.clone(),
            mean: r.mean_rating,
            ci_low: r.ci_low,
            ci_high: r.ci_high,
        })
        .collect();
    ranked.sort_by(|a, b| b.mean.total_cmp(&a.mean).then_with(|| a.id.cmp(&b.id)));
    ranked
}
