//! Tiny self-contained SVG polyline plots of result tables. One file per
//! y-column against the first column; no external tooling, deterministic
//! output bytes for a given table.

use std::path::Path;

use crate::error::LabResult;
use crate::table::ResultTable;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;

fn axis_range(values: &[f64]) -> (f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        (lo - 1.0, hi + 1.0)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

pub fn polyline_svg(title: &str, x_label: &str, y_label: &str, xs: &[f64], ys: &[f64]) -> String {
    assert_eq!(xs.len(), ys.len());
    let (x_lo, x_hi) = axis_range(xs);
    let (y_lo, y_hi) = axis_range(ys);
    let sx = |x: f64| MARGIN + (x - x_lo) / (x_hi - x_lo) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" \
         text-anchor=\"middle\">{title}</text>\n",
        WIDTH / 2.0
    ));
    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b:.1}\" x2=\"{r:.1}\" y2=\"{b:.1}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b:.1}\" stroke=\"black\"/>\n",
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" \
         text-anchor=\"middle\">{x_label}</text>\n",
        WIDTH / 2.0,
        HEIGHT - 14.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" \
         text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{y_label}</text>\n",
        HEIGHT / 2.0,
        HEIGHT / 2.0
    ));
    // Range labels on each axis.
    svg.push_str(&format!(
        "<text x=\"{m}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\">{x_lo:.4}</text>\n\
         <text x=\"{r:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\" \
         text-anchor=\"end\">{x_hi:.4}</text>\n\
         <text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\">{y_lo:.4}</text>\n\
         <text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\">{y_hi:.4}</text>\n",
        HEIGHT - MARGIN + 16.0,
        HEIGHT - MARGIN + 16.0,
        MARGIN + 4.0,
        HEIGHT - MARGIN - 4.0,
        MARGIN + 4.0,
        MARGIN + 12.0,
        m = MARGIN,
        r = WIDTH - MARGIN,
    ));
    let pts: Vec<String> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
        .collect();
    svg.push_str(&format!(
        "<polyline fill=\"none\" stroke=\"#1a6fb0\" stroke-width=\"1.5\" points=\"{}\"/>\n",
        pts.join(" ")
    ));
    for p in &pts {
        let (px, py) = p.split_once(',').expect("rendered pair");
        svg.push_str(&format!(
            "<circle cx=\"{px}\" cy=\"{py}\" r=\"2.5\" fill=\"#1a6fb0\"/>\n"
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes plot_<column>.svg for every column after the first, using the
/// first column as the x axis. Tables with fewer than two rows get none.
pub fn write_table_plots(table: &ResultTable, dir: &Path) -> LabResult<Vec<String>> {
    let mut written = Vec::new();
    if table.n_rows() < 2 {
        return Ok(written);
    }
    let cols = table.columns();
    let xs = table.column(&cols[0])?;
    for name in cols.iter().skip(1) {
        let ys = table.column(name)?;
        let svg = polyline_svg(table.name(), &cols[0], name, &xs, &ys);
        let file = format!("plot_{name}.svg");
        std::fs::write(dir.join(&file), svg)?;
        written.push(file);
    }
    Ok(written)
}
