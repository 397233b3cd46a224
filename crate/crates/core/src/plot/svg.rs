use std::fmt::Write;

use super::{PlotData, PlotKind};

const W: f64 = 480.0;
const H: f64 = 360.0;
const MARGIN: f64 = 40.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * MARGIN)
    }

    fn axes(&self, out: &mut String, xlabel: &str, ylabel: &str) {
        let (x0, y0) = (MARGIN, H - MARGIN);
        let _ = write!(
            out,
            r#"<line x1="{x0}" y1="{y0}" x2="{}" y2="{y0}" stroke="black"/><line x1="{x0}" y1="{y0}" x2="{x0}" y2="{MARGIN}" stroke="black"/>"#,
            W - MARGIN
        );
        let _ = write!(
            out,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">{xlabel}</text><text x="12" y="{}" font-size="11" transform="rotate(-90 12 {})" text-anchor="middle">{ylabel}</text>"#,
            W / 2.0,
            H - 8.0,
            H / 2.0,
            H / 2.0
        );
        for (v, anchor, x, y) in [
            (self.x.0, "start", x0, y0 + 14.0),
            (self.x.1, "end", W - MARGIN, y0 + 14.0),
            (self.y.0, "end", x0 - 4.0, y0),
            (self.y.1, "end", x0 - 4.0, MARGIN + 4.0),
        ] {
            let _ = write!(out, r#"<text x="{x}" y="{y}" font-size="9" text-anchor="{anchor}">{v:.3}</text>"#);
        }
    }
}

fn col<'a>(p: &'a PlotData, name: &str) -> &'a [f64] {
    p.column(name).unwrap_or(&[])
}

fn histogram(p: &PlotData, out: &mut String) {
    let (lo, hi) = (col(p, "bin_lo"), col(p, "bin_hi"));
    let series = [("inliers", PALETTE[0]), ("anomalies", PALETTE[1])];
    let top = series
        .iter()
        .flat_map(|(n, _)| col(p, n).iter().copied())
        .fold(1.0, f64::max);
    let f = Frame {
        x: range(lo.iter().chain(hi).copied()),
        y: (0.0, top),
    };
    f.axes(out, "score", "count");
    for (name, color) in series {
        for ((a, b), c) in lo.iter().zip(hi).zip(col(p, name)) {
            let _ = write!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.55"/>"#,
                f.px(*a),
                f.py(*c),
                f.px(*b) - f.px(*a),
                f.py(0.0) - f.py(*c)
            );
        }
    }
}

fn scatter(out: &mut String, f: &Frame, xs: &[f64], ys: &[f64], color: impl Fn(usize) -> (&'static str, bool)) {
    for (i, (x, y)) in xs.iter().zip(ys).enumerate() {
        let (c, hollow) = color(i);
        let fill = if hollow { "none" } else { c };
        let _ = write!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{fill}" stroke="{c}"/>"#,
            f.px(*x),
            f.py(*y)
        );
    }
}

fn projection(p: &PlotData, out: &mut String) {
    let (xs, ys) = (col(p, "pc1"), col(p, "pc2"));
    let f = Frame {
        x: range(xs.iter().copied()),
        y: range(ys.iter().copied()),
    };
    f.axes(out, "pc1", "pc2");
    let (view, anomaly) = (col(p, "view"), col(p, "anomaly"));
    scatter(out, &f, xs, ys, |i| {
        (PALETTE[view[i] as usize % PALETTE.len()], anomaly[i] > 0.5)
    });
}

fn heatmap(p: &PlotData, out: &mut String) {
    let (sample, k, row, c, v) = (col(p, "sample"), col(p, "k"), col(p, "row"), col(p, "col"), col(p, "value"));
    let first: Vec<usize> = (0..v.len()).filter(|&i| sample[i] == 0.0).collect();
    let rows_per_k = first.iter().map(|&i| row[i] as usize + 1).max().unwrap_or(1);
    let n_rows = first.iter().map(|&i| k[i] as usize + 1).max().unwrap_or(1) * rows_per_k;
    let n_cols = first.iter().map(|&i| c[i] as usize + 1).max().unwrap_or(1);
    let scale = first.iter().map(|&i| v[i].abs()).fold(1e-12, f64::max);
    let (cw, ch) = ((W - 2.0 * MARGIN) / n_cols as f64, (H - 2.0 * MARGIN) / n_rows as f64);
    for &i in &first {
        let t = (v[i] / scale).clamp(-1.0, 1.0);
        // red for positive, blue for negative
        let (r, g, b) = if t >= 0.0 {
            (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
        } else {
            (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
        };
        let y = k[i] as usize * rows_per_k + row[i] as usize;
        let _ = write!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{cw:.2}" height="{ch:.2}" fill="rgb({:.0},{:.0},{:.0})"/>"#,
            MARGIN + c[i] * cw,
            MARGIN + y as f64 * ch,
            r,
            g,
            b
        );
    }
}

fn simplex(p: &PlotData, out: &mut String) {
    let k = p.columns.len().saturating_sub(1);
    if k == 0 {
        return;
    }
    let vertex = |j: usize| {
        let a = std::f64::consts::TAU * j as f64 / k as f64 - std::f64::consts::FRAC_PI_2;
        (a.cos(), a.sin())
    };
    let f = Frame {
        x: (-1.1, 1.1),
        y: (-1.1, 1.1),
    };
    let corners: Vec<String> = (0..k)
        .map(|j| {
            let (x, y) = vertex(j);
            format!("{:.2},{:.2}", f.px(x), f.py(-y))
        })
        .collect();
    let _ = write!(out, r#"<polygon points="{}" fill="none" stroke="gray"/>"#, corners.join(" "));
    let n = p.rows();
    let (mut xs, mut ys) = (vec![0.0; n], vec![0.0; n]);
    for j in 0..k {
        let (vx, vy) = vertex(j);
        for (r, s) in col(p, &format!("share{}", j + 1)).iter().enumerate() {
            xs[r] += s * vx;
            ys[r] -= s * vy;
        }
    }
    let anomaly = col(p, "anomaly");
    scatter(out, &f, &xs, &ys, |i| {
        (if anomaly[i] > 0.5 { PALETTE[1] } else { PALETTE[0] }, false)
    });
}

fn curves(p: &PlotData, out: &mut String) {
    let ks = col(p, "k");
    let means: Vec<&(String, Vec<f64>)> = p.columns.iter().filter(|(n, _)| n.ends_with("_mean")).collect();
    let f = Frame {
        x: range(ks.iter().copied()),
        y: range(means.iter().flat_map(|(_, v)| v.iter().copied())),
    };
    f.axes(out, "K", p.metadata.get("metric").map_or("metric", String::as_str));
    for (m, (name, values)) in means.iter().enumerate() {
        let color = PALETTE[m % PALETTE.len()];
        let pts: Vec<String> = ks
            .iter()
            .zip(values)
            .filter(|(_, v)| v.is_finite())
            .map(|(k, v)| format!("{:.2},{:.2}", f.px(*k), f.py(*v)))
            .collect();
        let _ = write!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}"/><text x="{}" y="{}" font-size="10" fill="{color}">{}</text>"#,
            pts.join(" "),
            W - MARGIN - 90.0,
            MARGIN + 12.0 * m as f64,
            name.trim_end_matches("_mean")
        );
    }
}

pub(super) fn render(p: &PlotData) -> String {
    let mut out = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}"><rect width="100%" height="100%" fill="white"/><text x="{}" y="16" font-size="12" text-anchor="middle">{}</text>"#,
        W / 2.0,
        p.kind
    );
    match p.kind {
        PlotKind::ScoreHistogram => histogram(p, &mut out),
        PlotKind::PcaProjection => projection(p, &mut out),
        PlotKind::MaskHeatmap => heatmap(p, &mut out),
        PlotKind::SimplexScores => simplex(p, &mut out),
        PlotKind::SweepCurve => curves(p, &mut out),
    }
    out.push_str("</svg>\n");
    out
}
