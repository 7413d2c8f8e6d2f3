//! Structured plot data for the heatmap and eyeplot, and a bare SVG rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::FitResult;
use crate::posterior::{all_posteriors, detect_signals, scaled_wasserstein, WassersteinMode, WassersteinOrder};
use crate::tables::{ContingencyTable, ExpectedCounts};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub ae: String,
    pub drug: String,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "E")]
    pub e: f64,
    pub prob_signal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EyeplotCell {
    pub ae: String,
    pub drug: String,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "E")]
    pub e: f64,
    pub median: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Renderer-only label geometry, passed through untouched.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelGeometry {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub text_shift: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub text_size: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub x_lim_scalar: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum PlotData {
    Heatmap {
        cells: Vec<HeatmapCell>,
        ae_order: Vec<String>,
        drug_order: Vec<String>,
        cutoff: f64,
        prob: f64,
    },
    Eyeplot {
        cells: Vec<EyeplotCell>,
        ae_order: Vec<String>,
        drug_order: Vec<String>,
        log_scale: bool,
        n_threshold: u64,
        level: f64,
        #[serde(flatten)]
        labels: LabelGeometry,
    },
}

/// Which AEs and drugs to show.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub num_top_aes: usize,
    /// Explicit AE names; overrides the top-AE ranking when set.
    pub ae_names: Option<Vec<String>>,
    pub drug_names: Option<Vec<String>>,
    pub cutoff: f64,
    pub prob: f64,
}

impl Default for Selection {
    fn default() -> Self {
        Self { num_top_aes: 10, ae_names: None, drug_names: None, cutoff: 1.001, prob: 0.95 }
    }
}

/// Non-reference AE rows, sorted by `max_j Scaled-Wasserstein₂(f̂_ij, 1)` over
/// non-reference drugs, largest first (ties keep table order).
pub fn ae_ranking(
    fit: &FitResult<f64>,
    table: &ContingencyTable,
    e: &ExpectedCounts<f64>,
) -> Result<Vec<(usize, f64)>> {
    let post = all_posteriors(fit, table, e)?;
    let n_cols = table.n_cols();
    let mut scores = Vec::with_capacity(table.n_rows() - 1);
    for i in 0..table.n_rows() - 1 {
        let mut best = f64::NEG_INFINITY;
        for j in 0..n_cols - 1 {
            let d = scaled_wasserstein(&post[i * n_cols + j], 1.0, WassersteinOrder::Two, WassersteinMode::ClosedForm)?;
            best = best.max(d);
        }
        scores.push((i, best));
    }
    scores.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    Ok(scores)
}

/// Non-reference drug columns by number of detected signals over non-reference
/// AEs, largest first (ties keep table order).
pub fn drug_ranking(detected: &[bool], table: &ContingencyTable) -> Vec<(usize, usize)> {
    let n_cols = table.n_cols();
    let mut counts: Vec<(usize, usize)> =
        (0..n_cols - 1).map(|j| (j, (0..table.n_rows() - 1).filter(|&i| detected[i * n_cols + j]).count())).collect();
    counts.sort_by_key(|c| std::cmp::Reverse(c.1));
    counts
}

fn lookup(names: &[String], wanted: &[String], what: &str, excluded: usize) -> Result<Vec<usize>> {
    wanted
        .iter()
        .map(|w| match names.iter().position(|n| n == w) {
            Some(i) if i != excluded => Ok(i),
            Some(_) => Err(Error::InvalidArgument(format!("{what} {w:?} is the reference category"))),
            None => Err(Error::InvalidArgument(format!("unknown {what} {w:?}"))),
        })
        .collect()
}

struct Layout {
    rows: Vec<usize>,
    cols: Vec<usize>,
    tail: Vec<f64>,
    warnings: Vec<String>,
}

fn layout(fit: &FitResult<f64>, table: &ContingencyTable, e: &ExpectedCounts<f64>, sel: &Selection) -> Result<Layout> {
    let det = detect_signals(fit, table, e, sel.cutoff, sel.prob)?;
    let mut warnings = Vec::new();
    let rows = match &sel.ae_names {
        Some(names) => {
            let wanted = lookup(table.ae_names(), names, "AE", table.reference_row())?;
            let rank = ae_ranking(fit, table, e)?;
            rank.into_iter().map(|(i, _)| i).filter(|i| wanted.contains(i)).collect()
        }
        None => {
            let available = table.n_rows() - 1;
            let mut k = sel.num_top_aes;
            if k == 0 {
                return Err(Error::InvalidArgument("num_top_AEs must be at least 1".into()));
            }
            if k > available {
                warnings.push(format!("num_top_AEs = {k} exceeds the {available} available AEs; showing {available}"));
                k = available;
            }
            ae_ranking(fit, table, e)?.into_iter().take(k).map(|(i, _)| i).collect()
        }
    };
    let ranked: Vec<usize> = drug_ranking(&det.detected, table).into_iter().map(|(j, _)| j).collect();
    let cols = match &sel.drug_names {
        Some(names) => {
            let wanted = lookup(table.drug_names(), names, "drug", table.reference_col())?;
            ranked.into_iter().filter(|j| wanted.contains(j)).collect()
        }
        None => ranked,
    };
    Ok(Layout { rows, cols, tail: det.tail_probability, warnings })
}

/// Heatmap data plus any warnings (such as a clamped AE count).
pub fn heatmap(
    fit: &FitResult<f64>,
    table: &ContingencyTable,
    e: &ExpectedCounts<f64>,
    sel: &Selection,
) -> Result<(PlotData, Vec<String>)> {
    let l = layout(fit, table, e, sel)?;
    let n_cols = table.n_cols();
    let mut cells = Vec::with_capacity(l.rows.len() * l.cols.len());
    for &i in &l.rows {
        for &j in &l.cols {
            cells.push(HeatmapCell {
                ae: table.ae_names()[i].clone(),
                drug: table.drug_names()[j].clone(),
                n: table.get(i, j),
                e: e.get(i, j),
                prob_signal: l.tail[i * n_cols + j],
            });
        }
    }
    Ok((
        PlotData::Heatmap {
            cells,
            ae_order: l.rows.iter().map(|&i| table.ae_names()[i].clone()).collect(),
            drug_order: l.cols.iter().map(|&j| table.drug_names()[j].clone()).collect(),
            cutoff: sel.cutoff,
            prob: sel.prob,
        },
        l.warnings,
    ))
}

/// Eyeplot data: posterior medians and equi-tailed intervals for cells with
/// `N ≥ n_threshold`.
#[allow(clippy::too_many_arguments)]
pub fn eyeplot(
    fit: &FitResult<f64>,
    table: &ContingencyTable,
    e: &ExpectedCounts<f64>,
    sel: &Selection,
    n_threshold: u64,
    log_scale: bool,
    level: f64,
    labels: LabelGeometry,
) -> Result<(PlotData, Vec<String>)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level must lie in (0, 1), got {level}")));
    }
    let l = layout(fit, table, e, sel)?;
    let post = all_posteriors(fit, table, e)?;
    let lo_q = (1.0 - level) / 2.0;
    let n_cols = table.n_cols();
    let mut cells = Vec::new();
    for &i in &l.rows {
        for &j in &l.cols {
            let n = table.get(i, j);
            if n < n_threshold {
                continue;
            }
            let p = &post[i * n_cols + j];
            cells.push(EyeplotCell {
                ae: table.ae_names()[i].clone(),
                drug: table.drug_names()[j].clone(),
                n,
                e: e.get(i, j),
                median: p.quantile(0.5),
                lo: p.quantile(lo_q),
                hi: p.quantile(1.0 - lo_q),
            });
        }
    }
    Ok((
        PlotData::Eyeplot {
            cells,
            ae_order: l.rows.iter().map(|&i| table.ae_names()[i].clone()).collect(),
            drug_order: l.cols.iter().map(|&j| table.drug_names()[j].clone()).collect(),
            log_scale,
            n_threshold,
            level,
            labels,
        },
        l.warnings,
    ))
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Minimal static SVG: a shaded grid for heatmaps, interval glyphs for eyeplots.
pub fn render_svg(data: &PlotData) -> String {
    let mut s = String::new();
    match data {
        PlotData::Heatmap { cells, ae_order, drug_order, .. } => {
            let (cw, ch, left, top) = (90.0, 22.0, 320.0, 40.0);
            let w = left + cw * drug_order.len() as f64 + 10.0;
            let h = top + ch * ae_order.len() as f64 + 10.0;
            let _ = writeln!(
                s,
                r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#
            );
            for (c, d) in drug_order.iter().enumerate() {
                let x = left + cw * (c as f64 + 0.5);
                let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">{}</text>"#, top - 8.0, esc(d));
            }
            for (r, a) in ae_order.iter().enumerate() {
                let y = top + ch * (r as f64 + 0.7);
                let _ = writeln!(s, r#"<text x="{}" y="{y}" text-anchor="end">{}</text>"#, left - 6.0, esc(a));
            }
            for cell in cells {
                let r = ae_order.iter().position(|a| *a == cell.ae).unwrap_or(0);
                let c = drug_order.iter().position(|d| *d == cell.drug).unwrap_or(0);
                let (x, y) = (left + cw * c as f64, top + ch * r as f64);
                let shade = (255.0 * (1.0 - cell.prob_signal.clamp(0.0, 1.0))).round() as u8;
                let _ = writeln!(
                    s,
                    r#"<rect x="{x}" y="{y}" width="{cw}" height="{ch}" fill="rgb({shade},{shade},255)" stroke="white"/>"#
                );
                let _ = writeln!(
                    s,
                    r#"<text x="{}" y="{}" text-anchor="middle">{} / {:.3}</text>"#,
                    x + cw / 2.0,
                    y + ch * 0.7,
                    cell.n,
                    cell.e
                );
            }
        }
        PlotData::Eyeplot { cells, ae_order, log_scale, .. } => {
            let (left, top, width, ch) = (320.0, 20.0, 500.0, 14.0);
            let tf = |v: f64| if *log_scale { v.max(1e-6).ln() } else { v };
            let lo = cells.iter().map(|c| tf(c.lo)).fold(tf(1.0), f64::min);
            let hi = cells.iter().map(|c| tf(c.hi)).fold(tf(1.0), f64::max);
            let span = if hi > lo { hi - lo } else { 1.0 };
            let x = |v: f64| left + width * (tf(v) - lo) / span;
            let h = top + ch * (cells.len() as f64 + ae_order.len() as f64) + 20.0;
            let _ = writeln!(
                s,
                r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{h}" font-family="sans-serif" font-size="10">"#,
                left + width + 20.0
            );
            let _ = writeln!(
                s,
                r#"<line x1="{0}" x2="{0}" y1="{top}" y2="{1}" stroke="red" stroke-dasharray="3,3"/>"#,
                x(1.0),
                h - 10.0
            );
            let mut y = top;
            for a in ae_order {
                let _ = writeln!(s, r#"<text x="4" y="{}" font-weight="bold">{}</text>"#, y + ch * 0.7, esc(a));
                y += ch;
                for c in cells.iter().filter(|c| c.ae == *a) {
                    let _ = writeln!(
                        s,
                        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
                        left - 6.0,
                        y + ch * 0.7,
                        esc(&c.drug)
                    );
                    let _ = writeln!(
                        s,
                        r#"<line x1="{}" x2="{}" y1="{2}" y2="{2}" stroke="black"/>"#,
                        x(c.lo),
                        x(c.hi),
                        y + ch / 2.0
                    );
                    let _ = writeln!(s, r#"<circle cx="{}" cy="{}" r="3"/>"#, x(c.median), y + ch / 2.0);
                    y += ch;
                }
            }
        }
    }
    s.push_str("</svg>\n");
    s
}
