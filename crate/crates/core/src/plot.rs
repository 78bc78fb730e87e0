//! Minimal static SVG output for Monte-Carlo summaries.

use std::fmt::Write as _;

use crate::experiments::ExperimentSummary;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 60.0;

struct Frame {
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn new(values: impl Iterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        if !lo.is_finite() || !hi.is_finite() {
            lo = 0.0;
            hi = 1.0;
        }
        let pad = ((hi - lo) * 0.08).max(hi.abs().max(1e-12) * 1e-6);
        Self { y_min: lo - pad, y_max: hi + pad }
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN - (v - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - 2.0 * MARGIN)
    }

    fn x(&self, i: usize, n: usize) -> f64 {
        MARGIN + (i as f64 + 0.5) / n as f64 * (WIDTH - 2.0 * MARGIN)
    }

    fn axes(&self, out: &mut String, title: &str) {
        writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
        )
        .unwrap();
        writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
        writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{title}</text>"#, WIDTH / 2.0).unwrap();
        writeln!(
            out,
            r#"<line x1="{MARGIN}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/><line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{0}" stroke="black"/>"#,
            HEIGHT - MARGIN,
            WIDTH - MARGIN
        )
        .unwrap();
        for k in 0..=4 {
            let v = self.y_min + (self.y_max - self.y_min) * k as f64 / 4.0;
            let y = self.y(v);
            writeln!(
                out,
                r#"<text x="{}" y="{:.1}" text-anchor="end">{:.4}</text><line x1="{}" y1="{y:.1}" x2="{MARGIN}" y2="{y:.1}" stroke="black"/>"#,
                MARGIN - 6.0,
                y + 4.0,
                v,
                MARGIN - 3.0
            )
            .unwrap();
        }
    }
}

/// Quantile bands of one parameter against the number of load conditions,
/// with the true value as a dashed line.
pub fn interval_svg(summary: &ExperimentSummary, column: usize) -> String {
    let rows: Vec<_> = summary.intervals.iter().filter(|r| r.column == column).collect();
    let truth = summary.truth[column];
    let frame = Frame::new(
        rows.iter()
            .flat_map(|r| r.quantiles.iter().copied())
            .chain(std::iter::once(truth)),
    );
    let mut out = String::new();
    frame.axes(&mut out, &format!("{}: estimate quantiles vs. load conditions", summary.column_map[column]));
    let n = rows.len();
    let nq = summary.quantile_levels.len();
    let y_truth = frame.y(truth);
    writeln!(
        out,
        r#"<line x1="{MARGIN}" y1="{y_truth:.1}" x2="{}" y2="{y_truth:.1}" stroke="gray" stroke-dasharray="6,4"/>"#,
        WIDTH - MARGIN
    )
    .unwrap();
    for (i, r) in rows.iter().enumerate() {
        let x = frame.x(i, n);
        let (lo, hi) = (r.quantiles[0], r.quantiles[nq - 1]);
        writeln!(
            out,
            r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="steelblue" stroke-width="2"/>"#,
            frame.y(lo),
            frame.y(hi)
        )
        .unwrap();
        for q in &r.quantiles {
            let y = frame.y(*q);
            writeln!(
                out,
                r#"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="steelblue"/>"#,
                x - 8.0,
                x + 8.0
            )
            .unwrap();
        }
        writeln!(
            out,
            r#"<text x="{x:.1}" y="{}" text-anchor="middle">T={}</text>"#,
            HEIGHT - MARGIN + 18.0,
            r.conditions
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

/// Boxplot of `s_hat - s` for every parameter.
pub fn boxplot_svg(summary: &ExperimentSummary) -> String {
    let frame = Frame::new(summary.boxplots.iter().flat_map(|b| {
        let s = &b.stats;
        [s.lo_whisker, s.hi_whisker, 0.0].into_iter().chain(s.outliers.iter().copied())
    }));
    let mut out = String::new();
    frame.axes(
        &mut out,
        &format!("Deviation from true value, T={}", summary.boxplot_conditions),
    );
    let n = summary.boxplots.len();
    let y0 = frame.y(0.0);
    writeln!(
        out,
        r#"<line x1="{MARGIN}" y1="{y0:.1}" x2="{}" y2="{y0:.1}" stroke="gray" stroke-dasharray="6,4"/>"#,
        WIDTH - MARGIN
    )
    .unwrap();
    let half = (WIDTH - 2.0 * MARGIN) / n as f64 * 0.3;
    for (i, b) in summary.boxplots.iter().enumerate() {
        let s = &b.stats;
        let x = frame.x(i, n);
        let (y1, y3) = (frame.y(s.q1), frame.y(s.q3));
        writeln!(
            out,
            r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/>"#,
            frame.y(s.lo_whisker),
            frame.y(s.hi_whisker)
        )
        .unwrap();
        writeln!(
            out,
            r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="lightsteelblue" stroke="black"/>"#,
            x - half,
            y3,
            2.0 * half,
            (y1 - y3).max(0.5)
        )
        .unwrap();
        let ym = frame.y(s.median);
        writeln!(
            out,
            r#"<line x1="{:.1}" y1="{ym:.1}" x2="{:.1}" y2="{ym:.1}" stroke="darkred" stroke-width="2"/>"#,
            x - half,
            x + half
        )
        .unwrap();
        for o in &s.outliers {
            writeln!(out, r#"<circle cx="{x:.1}" cy="{:.1}" r="1.5" fill="none" stroke="black"/>"#, frame.y(*o)).unwrap();
        }
        writeln!(
            out,
            r#"<text x="{x:.1}" y="{}" text-anchor="middle">{}</text>"#,
            HEIGHT - MARGIN + 18.0,
            b.label.edge
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}
