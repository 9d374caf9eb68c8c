//! Minimal hand-written SVG charts: rank plot, site box plot and scatter
//! with a fitted line.

use std::fmt::Write;

use sonar_complexity::analysis::{RankedImage, RegressionResult, SiteSummary};

const W: f64 = 720.0;
const H: f64 = 440.0;
const ML: f64 = 70.0;
const MR: f64 = 20.0;
const MT: f64 = 40.0;
const MB: f64 = 60.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let pad = |(lo, hi): (f64, f64)| {
            if hi > lo {
                let p = (hi - lo) * 0.05;
                (lo - p, hi + p)
            } else {
                (lo - 1.0, hi + 1.0)
            }
        };
        let (x0, x1) = pad(x);
        let (y0, y1) = pad(y);
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        ML + (x - self.x0) / (self.x1 - self.x0) * (W - ML - MR)
    }

    fn py(&self, y: f64) -> f64 {
        H - MB - (y - self.y0) / (self.y1 - self.y0) * (H - MT - MB)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![lo];
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(t);
        t += step;
    }
    out
}

fn label(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn open(title: &str, meta: &str, f: &Frame, xlabel: &str, ylabel: &str, x_ticks: bool) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, "<metadata>{}</metadata>", escape(meta));
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(title));
    let (l, r, t, b) = (ML, W - MR, MT, H - MB);
    let _ = writeln!(s, r#"<path d="M{l} {t} L{l} {b} L{r} {b}" fill="none" stroke="black"/>"#);
    for y in ticks(f.y0, f.y1) {
        let py = f.py(y);
        let _ = writeln!(s, r##"<line x1="{l}" y1="{py:.2}" x2="{r}" y2="{py:.2}" stroke="#e4e4e4"/>"##);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, l - 6.0, py + 4.0, label(y));
    }
    if x_ticks {
        for x in ticks(f.x0, f.x1) {
            let px = f.px(x);
            let _ = writeln!(s, r#"<line x1="{px:.2}" y1="{b}" x2="{px:.2}" y2="{}" stroke="black"/>"#, b + 5.0);
            let _ = writeln!(s, r#"<text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#, b + 18.0, label(x));
        }
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (l + r) / 2.0, H - 16.0, escape(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
        (t + b) / 2.0,
        escape(ylabel)
    );
    s
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Images in rank order with confidence-interval bars.
pub fn rank_plot(ranked: &[RankedImage], meta: &str) -> String {
    let n = ranked.len().max(1) as f64;
    let (lo, hi) = range(ranked.iter().flat_map(|r| [r.ci_low, r.ci_high, r.mean]));
    let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 1.0) };
    let f = Frame::new((0.0, n + 1.0), (lo, hi));
    let mut s = open("Elo score by rank", meta, &f, "rank", "Elo score", true);
    for (i, r) in ranked.iter().enumerate() {
        let x = f.px(i as f64 + 1.0);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#7a9cc6"/>"##,
            f.py(r.ci_low),
            f.py(r.ci_high)
        );
        let _ = writeln!(
            s,
            r##"<circle cx="{x:.2}" cy="{:.2}" r="2.5" fill="#1f4e8c"><title>{} {:.1}</title></circle>"##,
            f.py(r.mean),
            escape(&r.id),
            r.mean
        );
    }
    s.push_str("</svg>\n");
    s
}

/// One box per site: quartile box, median line, whiskers and outliers.
pub fn site_box_plot(sites: &[SiteSummary], meta: &str) -> String {
    let (lo, hi) = range(sites.iter().flat_map(|b| {
        [b.whisker_low, b.whisker_high]
            .into_iter()
            .chain(b.outliers.iter().map(|o| o.1))
    }));
    let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 1.0) };
    let f = Frame::new((0.0, sites.len() as f64 + 1.0), (lo, hi));
    let mut s = open("Elo score by site", meta, &f, "site", "Elo score", false);
    let half = ((W - ML - MR) / (sites.len() as f64 + 1.0) * 0.3).min(40.0);
    for (i, b) in sites.iter().enumerate() {
        let x = f.px(i as f64 + 1.0);
        let (q1, q3, med) = (f.py(b.q1), f.py(b.q3), f.py(b.median));
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{q3:.2}" stroke="black"/><line x1="{x:.2}" y1="{q1:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#,
            f.py(b.whisker_high),
            f.py(b.whisker_low)
        );
        for w in [b.whisker_low, b.whisker_high] {
            let y = f.py(w);
            let _ = writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black"/>"#, x - half / 2.0, x + half / 2.0);
        }
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{q3:.2}" width="{:.2}" height="{:.2}" fill="#cfe0f3" stroke="black"/>"##,
            x - half,
            2.0 * half,
            (q1 - q3).max(0.5)
        );
        let _ = writeln!(s, r##"<line x1="{:.2}" y1="{med:.2}" x2="{:.2}" y2="{med:.2}" stroke="#c0392b" stroke-width="2"/>"##, x - half, x + half);
        for (id, v) in &b.outliers {
            let _ = writeln!(
                s,
                r#"<circle cx="{x:.2}" cy="{:.2}" r="3" fill="none" stroke="black"><title>{}</title></circle>"#,
                f.py(*v),
                escape(id)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle">{} (n={})</text>"#,
            H - MB + 18.0,
            escape(&b.site),
            b.n
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Metric against Elo score with the least-squares line.
pub fn scatter_plot(elo: &[f64], metric: &[f64], fit: &RegressionResult, meta: &str) -> String {
    let f = Frame::new(range(elo.iter().copied()), range(metric.iter().copied()));
    let title = format!("{} vs Elo score (R\u{b2} = {:.3}, n = {})", fit.metric_name, fit.r_squared, fit.n);
    let mut s = open(&title, meta, &f, "Elo score", &fit.metric_name, true);
    for (x, y) in elo.iter().zip(metric) {
        let _ = writeln!(s, r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#1f4e8c" fill-opacity="0.7"/>"##, f.px(*x), f.py(*y));
    }
    let (a, b) = (f.x0, f.x1);
    let line = |x: f64| fit.intercept + fit.slope * x;
    let _ = writeln!(
        s,
        r#"<clipPath id="plot-area"><rect x="{ML}" y="{MT}" width="{}" height="{}"/></clipPath>"#,
        W - ML - MR,
        H - MT - MB
    );
    let _ = writeln!(
        s,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#c0392b" stroke-width="1.5" clip-path="url(#plot-area)"/>"##,
        f.px(a),
        f.py(line(a)),
        f.px(b),
        f.py(line(b))
    );
    s.push_str("</svg>\n");
    s
}
