//! Deterministic SVG scatter plots and the multi-panel gallery.

use std::fmt::Write as _;

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::model::LabelVector;

const PALETTE: [&str; 20] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5", "#c49c94", "#f7b6d2", "#c7c7c7", "#dbdb8d", "#9edae5",
];

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 320.0;
const PLOT: f64 = 260.0;
const TOP: f64 = 34.0;
const LEFT: f64 = 12.0;
const MARGIN: f64 = 0.05;
const RADIUS: f64 = 2.5;

pub fn class_color(class: usize) -> &'static str {
    PALETTE[class % PALETTE.len()]
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// `[lo, hi]` widened by 5% on each side; a zero span becomes ±0.5.
fn axis_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let span = hi - lo;
    if span == 0.0 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo - MARGIN * span, hi + MARGIN * span)
}

/// One `<svg>` panel positioned at `(x, y)` inside a parent document.
fn panel(out: &mut String, coords: ArrayView2<'_, f64>, labels: &LabelVector, title: &str, x: f64, y: f64) {
    let (x0, x1) = axis_range(coords.column(0).iter().copied());
    let (y0, y1) = axis_range(coords.column(1).iter().copied());
    let _ = writeln!(
        out,
        r#"<svg x="{x:.0}" y="{y:.0}" width="{PANEL_W:.0}" height="{PANEL_H:.0}" viewBox="0 0 {PANEL_W:.0} {PANEL_H:.0}">"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{LEFT:.0}" y="20" font-family="sans-serif" font-size="14">{}</text>"#,
        escape(title)
    );
    let _ = writeln!(
        out,
        r##"<rect x="{LEFT:.0}" y="{TOP:.0}" width="{PLOT:.0}" height="{PLOT:.0}" fill="none" stroke="#444444"/>"##
    );
    let tick = |v: f64| format!("{v:.2}");
    let _ = writeln!(
        out,
        r#"<text x="{LEFT:.0}" y="{:.0}" font-family="sans-serif" font-size="9">{}</text><text x="{:.0}" y="{:.0}" font-family="sans-serif" font-size="9" text-anchor="end">{}</text>"#,
        TOP + PLOT + 12.0,
        tick(x0),
        LEFT + PLOT,
        TOP + PLOT + 12.0,
        tick(x1)
    );

    for (row, &class) in coords.rows().into_iter().zip(labels.labels()) {
        let px = LEFT + (row[0] - x0) / (x1 - x0) * PLOT;
        let py = TOP + PLOT - (row[1] - y0) / (y1 - y0) * PLOT;
        let _ = writeln!(
            out,
            r#"<circle cx="{px:.2}" cy="{py:.2}" r="{RADIUS}" fill="{}" fill-opacity="0.8"/>"#,
            class_color(class)
        );
    }

    let legend_x = LEFT + PLOT + 14.0;
    for (c, name) in labels.class_names().iter().enumerate() {
        let ly = TOP + 4.0 + 14.0 * c as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{legend_x:.0}" y="{ly:.0}" width="9" height="9" fill="{}"/><text x="{:.0}" y="{:.0}" font-family="sans-serif" font-size="10">{}</text>"#,
            class_color(c),
            legend_x + 13.0,
            ly + 8.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
}

fn check_finite(coords: ArrayView2<'_, f64>) -> Result<()> {
    if coords.ncols() != 2 {
        return Err(Error::DimMismatch { left: coords.ncols(), right: 2 });
    }
    match crate::model::first_non_finite_row(coords) {
        Some(row) => Err(Error::NonFiniteInput { row }),
        None => Ok(()),
    }
}

/// Standalone SVG: one circle per point colored by class, a frame with
/// min/max ticks, and a legend of all class names.
pub fn render_scatter_svg(coords: ArrayView2<'_, f64>, labels: &LabelVector, title: &str) -> Result<String> {
    check_finite(coords)?;
    if coords.nrows() != labels.len() {
        return Err(Error::LengthMismatch { left: coords.nrows(), right: labels.len() });
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PANEL_W:.0}" height="{PANEL_H:.0}" viewBox="0 0 {PANEL_W:.0} {PANEL_H:.0}">"#
    );
    panel(&mut out, coords, labels, title, 0.0, 0.0);
    out.push_str("</svg>\n");
    Ok(out)
}

pub struct GalleryPanel<'a> {
    pub model: &'a str,
    pub ami: f64,
    pub coords: ArrayView2<'a, f64>,
    pub labels: &'a LabelVector,
}

/// Panel order: AMI descending, model name ascending on ties.
pub fn gallery_order(panels: &[GalleryPanel<'_>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..panels.len()).collect();
    order.sort_by(|&a, &b| panels[b].ami.total_cmp(&panels[a].ami).then(panels[a].model.cmp(panels[b].model)));
    order
}

pub fn panel_title(model: &str, ami: f64) -> String {
    format!("{model} {ami:.2}")
}

/// Grid of scatter panels sorted by [`gallery_order`], each titled
/// `"<model> <AMI to 2 decimals>"`.
pub fn render_gallery(panels: &[GalleryPanel<'_>]) -> Result<String> {
    for p in panels {
        check_finite(p.coords)?;
    }
    let n = panels.len().max(1);
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#,
        w = cols as f64 * PANEL_W,
        h = rows as f64 * PANEL_H
    );
    for (slot, idx) in gallery_order(panels).into_iter().enumerate() {
        let p = &panels[idx];
        let (r, c) = (slot / cols, slot % cols);
        panel(&mut out, p.coords, p.labels, &panel_title(p.model, p.ami), c as f64 * PANEL_W, r as f64 * PANEL_H);
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use ndarray::{array, Array2};

    use super::*;

    #[test]
    fn three_points_two_classes() {
        let labels = LabelVector::from_names(["a", "b", "a"]);
        let svg = render_scatter_svg(array![[0.0, 0.0], [1.0, 2.0], [3.0, -1.0]].view(), &labels, "t").unwrap();
        assert_eq!(svg.matches("<circle").count(), 3);
        assert_eq!(svg.matches(r#"width="9""#).count(), 2);
        assert!(svg.starts_with("<svg xmlns"));
    }

    #[test]
    fn empty_input_has_legend_only() {
        let labels = LabelVector::new(vec![], vec!["x".into()]).unwrap();
        let svg = render_scatter_svg(Array2::<f64>::zeros((0, 2)).view(), &labels, "empty").unwrap();
        assert_eq!(svg.matches("<circle").count(), 0);
        assert!(svg.contains(">x</text>"));
    }

    #[test]
    fn byte_identical() {
        let labels = LabelVector::from_indices(vec![0, 1, 1]);
        let y = array![[0.1, 0.2], [0.3, 0.4], [0.5, 0.7]];
        assert_eq!(render_scatter_svg(y.view(), &labels, "m").unwrap(), render_scatter_svg(y.view(), &labels, "m").unwrap());
    }

    #[test]
    fn non_finite_rejected() {
        let labels = LabelVector::from_indices(vec![0, 0]);
        let y = array![[0.0, 0.0], [f64::NAN, 1.0]];
        assert!(matches!(render_scatter_svg(y.view(), &labels, "m"), Err(Error::NonFiniteInput { row: 1 })));
    }

    #[test]
    fn title_is_escaped() {
        let labels = LabelVector::from_indices(vec![0]);
        let svg = render_scatter_svg(array![[0.0, 0.0]].view(), &labels, "a<b & c").unwrap();
        assert!(svg.contains("a&lt;b &amp; c"));
    }

    #[test]
    fn gallery_sorted_by_ami_then_name() {
        let labels = LabelVector::from_indices(vec![0]);
        let y = array![[0.0, 0.0]];
        let mk = |model, ami| GalleryPanel { model, ami, coords: y.view(), labels: &labels };
        let panels = [mk("low", 0.2), mk("high", 0.7), mk("mid", 0.5)];
        assert_eq!(gallery_order(&panels), [1, 2, 0]);
        let svg = render_gallery(&panels).unwrap();
        let pos = |s: &str| svg.find(s).unwrap();
        assert!(pos("high 0.70") < pos("mid 0.50") && pos("mid 0.50") < pos("low 0.20"));

        let tied = [mk("b", 0.5), mk("a", 0.5)];
        assert_eq!(gallery_order(&tied), [1, 0]);
        assert_eq!(panel_title("Perch", 0.4812), "Perch 0.48");
    }
}
