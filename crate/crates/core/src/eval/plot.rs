//! Static SVG scatter plots of 2-D embeddings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::export::Embedding;
use crate::error::{Error, Result};

/// 34 distinct colors; class `i` (in sorted name order) uses `PALETTE[i % 34]`.
pub const PALETTE: [&str; 34] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf", "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5", "#c49c94", "#f7b6d2", "#c7c7c7",
    "#dbdb8d", "#9edae5", "#393b79", "#637939", "#8c6d31", "#843c39", "#7b4173", "#3182bd", "#e6550d",
    "#31a354", "#756bb1", "#636363", "#fd8d3c", "#74c476", "#9e9ac8", "#000000",
];

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const MARGIN: f64 = 40.0;
const LEGEND_WIDTH: f64 = 180.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Plot the first two embedding dimensions, one circle per sample.
pub fn render_scatter(embedding: &Embedding, title: &str) -> Result<String> {
    if embedding.dims() < 2 {
        return Err(Error::Config(format!(
            "scatter plot needs at least 2 dimensions, embedding has {}",
            embedding.dims()
        )));
    }
    let n = embedding.values.rows();
    let names: Vec<&str> = match &embedding.classes {
        Some(c) => c.iter().map(String::as_str).collect(),
        None => vec!["unlabeled"; n],
    };
    let mut color_of: BTreeMap<&str, &str> = names.iter().map(|&c| (c, "")).collect();
    for (i, v) in color_of.values_mut().enumerate() {
        *v = PALETTE[i % PALETTE.len()];
    }

    let xs = embedding.values.column(0);
    let ys = embedding.values.column(1);
    let range = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if n == 0 {
            (0.0, 1.0)
        } else if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        }
    };
    let (x0, x1) = range(&xs);
    let (y0, y1) = range(&ys);
    let plot_w = WIDTH - LEGEND_WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * plot_w;
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * plot_h;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="24" font-family="sans-serif" font-size="16">{}</text>"#,
        escape(title)
    );
    let _ = writeln!(
        s,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#888888"/>"##
    );
    let _ = writeln!(s, r#"<g id="points">"#);
    for i in 0..n {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.3}" cy="{:.3}" r="3" fill="{}" fill-opacity="0.8"><title>{}</title></circle>"#,
            px(xs[i]),
            py(ys[i]),
            color_of[names[i]],
            escape(&embedding.sample_ids[i])
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g id="legend" font-family="sans-serif" font-size="11">"#);
    let lx = WIDTH - LEGEND_WIDTH + 10.0;
    for (k, (name, color)) in color_of.iter().enumerate() {
        let y = MARGIN + 8.0 + 15.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<rect class="legend-entry" x="{lx}" y="{}" width="10" height="10" fill="{color}"/><text x="{}" y="{}">{}</text>"#,
            y - 9.0,
            lx + 16.0,
            y,
            escape(name)
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;

    fn embedding(n: usize, classes: usize) -> Embedding {
        let values = Matrix::from_fn(n, 2, |i, j| (i * (j + 1)) as f64);
        let ids = (0..n).map(|i| format!("s{i}")).collect();
        let names = (0..n).map(|i| format!("class{:02}", i % classes)).collect();
        Embedding::new(ids, values, Some(names)).unwrap()
    }

    #[test]
    fn element_counts() {
        let svg = render_scatter(&embedding(4, 2), "t").unwrap();
        assert_eq!(svg.matches("<circle").count(), 4);
        assert_eq!(svg.matches("legend-entry").count(), 2);
    }

    #[test]
    fn deterministic() {
        let e = embedding(10, 3);
        assert_eq!(render_scatter(&e, "x").unwrap(), render_scatter(&e, "x").unwrap());
    }

    #[test]
    fn thirty_four_colors() {
        let svg = render_scatter(&embedding(68, 34), "t").unwrap();
        let colors: std::collections::BTreeSet<&str> = svg
            .lines()
            .filter(|l| l.contains("legend-entry"))
            .map(|l| l.split("fill=\"").nth(1).unwrap().split('"').next().unwrap())
            .collect();
        assert_eq!(colors.len(), 34);
    }

    #[test]
    fn one_dimension_rejected() {
        let e = Embedding::new(vec!["a".into()], Matrix::zeros(1, 1), None).unwrap();
        assert!(render_scatter(&e, "t").is_err());
    }
}
