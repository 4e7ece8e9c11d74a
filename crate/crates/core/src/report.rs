//! Report files: coefficient tables, LDS density curves, PR condition
//! tables, and minimal SVG plots.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Scaler;
use crate::gmm::GmmError;
use crate::interpret::ExplainableCondition;
use crate::linmod::{confidence_intervals, intercept_interval, LinearModel};
use crate::mixture::MlmModel;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("csv error: {0}")]
    Csv(String),
    #[error(transparent)]
    Density(#[from] GmmError),
}

pub type Result<T> = std::result::Result<T, ReportError>;

fn io_err(path: &Path, e: impl std::fmt::Display) -> ReportError {
    ReportError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    write_text(path, &text)
}

pub fn csv_string<S: Serialize>(rows: &[S]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| ReportError::Csv(e.to_string()))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| ReportError::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_csv<S: Serialize>(path: &Path, rows: &[S]) -> Result<()> {
    write_text(path, &csv_string(rows)?)
}

/// One coefficient of one local model. Interval columns are in
/// standardized units and empty when unavailable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub epic: usize,
    pub term: String,
    pub estimate: f64,
    pub stderr: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub shrunk_to_zero: bool,
    /// Effect per raw unit of the variable.
    pub raw_estimate: f64,
}

/// Coefficients of a local model in raw units: `β_j / σ_j` and the
/// intercept shifted by the column means.
pub fn raw_coefficients<T: Scalar>(model: &LinearModel<T>, scaler: &Scaler<T>) -> (f64, Vec<f64>) {
    let mut intercept = model.intercept.to_f64_lossy();
    let mut out = Vec::with_capacity(model.coefficients.len());
    for (j, &b) in model.coefficients.iter().enumerate() {
        let b = b.to_f64_lossy();
        if scaler.scaled[j] {
            let s = scaler.stds[j].to_f64_lossy();
            let raw = b / s;
            intercept -= raw * scaler.means[j].to_f64_lossy();
            out.push(raw);
        } else {
            out.push(b);
        }
    }
    (intercept, out)
}

pub fn coefficient_rows<T: Scalar>(
    epic: usize,
    model: &LinearModel<T>,
    names: &[String],
    scaler: &Scaler<T>,
    level: f64,
) -> Vec<CoefficientRow> {
    let (raw_intercept, raw) = raw_coefficients(model, scaler);
    let mut rows = Vec::with_capacity(names.len() + 1);
    let icpt = intercept_interval(model, level).ok();
    rows.push(CoefficientRow {
        epic,
        term: "(intercept)".into(),
        estimate: model.intercept.to_f64_lossy(),
        stderr: icpt.as_ref().map(|c| c.stderr.to_f64_lossy()),
        lower: icpt.as_ref().map(|c| c.lower.to_f64_lossy()),
        upper: icpt.as_ref().map(|c| c.upper.to_f64_lossy()),
        shrunk_to_zero: false,
        raw_estimate: raw_intercept,
    });
    let cis = confidence_intervals(model, level).ok();
    for (j, name) in names.iter().enumerate() {
        let ci = cis.as_ref().map(|c| &c[j]);
        rows.push(CoefficientRow {
            epic,
            term: name.clone(),
            estimate: model.coefficients[j].to_f64_lossy(),
            stderr: ci.map(|c| c.stderr.to_f64_lossy()),
            lower: ci.map(|c| c.lower.to_f64_lossy()),
            upper: ci.map(|c| c.upper.to_f64_lossy()),
            shrunk_to_zero: ci.is_some_and(|c| c.shrunk_to_zero),
            raw_estimate: raw[j],
        });
    }
    rows
}

pub fn model_coefficient_rows<T: Scalar>(
    model: &MlmModel<T>,
    names: &[String],
    level: f64,
) -> Vec<CoefficientRow> {
    model
        .epics
        .iter()
        .enumerate()
        .flat_map(|(j, e)| coefficient_rows(j, &e.local_model, names, &model.scaler, level))
        .collect()
}

/// Weighted marginal density `π̃_j f_{j,d}` of every EPIC along one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityPoint {
    pub var: String,
    pub x: f64,
    pub epic: usize,
    pub density: f64,
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let pad = 0.05 * (hi - lo).max(1e-9);
    let (lo, hi) = (lo - pad, hi + pad);
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

fn column_range<T: Scalar>(x: ArrayView2<T>, d: usize) -> (f64, f64) {
    x.column(d)
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            let v = v.to_f64_lossy();
            (lo.min(v), hi.max(v))
        })
}

/// Density curves over the standardized training range of variable `d`,
/// reported against raw units.
pub fn density_curve<T: Scalar>(
    model: &MlmModel<T>,
    x: ArrayView2<T>,
    d: usize,
    name: &str,
    points: usize,
) -> Result<Vec<DensityPoint>> {
    let (lo, hi) = column_range(x, d);
    let xs = grid(lo, hi, points);
    let mut out = Vec::with_capacity(points * model.n_epics());
    for (j, e) in model.epics.iter().enumerate() {
        let marg = e.density.marginal(&[d])?;
        for &v in &xs {
            let t = T::lit(v);
            let f = marg.log_density(Array1::from_elem(1, t).view())?.exp() * e.prior;
            out.push(DensityPoint {
                var: name.to_string(),
                x: model.scaler.unscale_value(d, t).to_f64_lossy(),
                epic: j,
                density: f.to_f64_lossy(),
            });
        }
    }
    Ok(out)
}

/// Share of EPIC `j` in the two-variable marginal mixture on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub x: f64,
    pub y: f64,
    pub own: f64,
    pub rest: f64,
    pub share: f64,
}

pub fn density_surface<T: Scalar>(
    model: &MlmModel<T>,
    x: ArrayView2<T>,
    j: usize,
    dims: [usize; 2],
    points: usize,
) -> Result<Vec<SurfacePoint>> {
    let margs = model
        .epics
        .iter()
        .map(|e| e.density.marginal(&dims))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let (gx, gy) = {
        let (a, b) = column_range(x, dims[0]);
        let (c, d) = column_range(x, dims[1]);
        (grid(a, b, points), grid(c, d, points))
    };
    let mut out = Vec::with_capacity(points * points);
    for &u in &gx {
        for &v in &gy {
            let pt = Array1::from_vec(vec![T::lit(u), T::lit(v)]);
            let (mut own, mut rest) = (0.0, 0.0);
            for (k, (g, e)) in margs.iter().zip(&model.epics).enumerate() {
                let f = (g.log_density(pt.view())?.exp() * e.prior).to_f64_lossy();
                if k == j {
                    own = f;
                } else {
                    rest += f;
                }
            }
            let total = own + rest;
            out.push(SurfacePoint {
                x: model
                    .scaler
                    .unscale_value(dims[0], T::lit(u))
                    .to_f64_lossy(),
                y: model
                    .scaler
                    .unscale_value(dims[1], T::lit(v))
                    .to_f64_lossy(),
                own,
                rest,
                share: if total > 0.0 { own / total } else { 0.0 },
            });
        }
    }
    Ok(out)
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];
const W: f64 = 640.0;
const H: f64 = 400.0;
const M: f64 = 40.0;

fn svg_open(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{M}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n",
        escape(title)
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// One polyline per EPIC.
pub fn density_svg(curve: &[DensityPoint], title: &str) -> String {
    let (x0, x1) = curve
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| {
            (a.0.min(p.x), a.1.max(p.x))
        });
    let ymax = curve
        .iter()
        .map(|p| p.density)
        .fold(0.0, f64::max)
        .max(1e-300);
    let sx = |v: f64| M + (v - x0) / (x1 - x0).max(1e-12) * (W - 2.0 * M);
    let sy = |v: f64| H - M - v / ymax * (H - 2.0 * M);
    let mut s = svg_open(title);
    let _ = writeln!(
        s,
        "<line x1=\"{M}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        H - M,
        W - M,
        H - M
    );
    let _ = writeln!(
        s,
        "<text x=\"{M}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{x0:.3}</text>\
         <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{x1:.3}</text>",
        H - M + 15.0,
        W - M,
        H - M + 15.0
    );
    let n_epics = curve.iter().map(|p| p.epic + 1).max().unwrap_or(0);
    for j in 0..n_epics {
        let pts: Vec<String> = curve
            .iter()
            .filter(|p| p.epic == j)
            .map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.density)))
            .collect();
        let color = PALETTE[j % PALETTE.len()];
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"{color}\">EPIC {j}</text>",
            W - M - 60.0,
            M + 14.0 * j as f64
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Grid cells shaded by the share of the target EPIC.
pub fn surface_svg(surface: &[SurfacePoint], points: usize, title: &str) -> String {
    let mut s = svg_open(title);
    let cw = (W - 2.0 * M) / points as f64;
    let ch = (H - 2.0 * M) / points as f64;
    for (i, p) in surface.iter().enumerate() {
        let (a, b) = (i / points, i % points);
        let shade = (255.0 * (1.0 - p.share)).round() as u8;
        let _ = writeln!(
            s,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"rgb(255,{shade},{shade})\"/>",
            M + a as f64 * cw,
            H - M - (b + 1) as f64 * ch,
            cw + 0.05,
            ch + 0.05
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Horizontal bars, one per label.
pub fn bar_svg(labels: &[String], values: &[f64], title: &str) -> String {
    let mut s = svg_open(title);
    let vmax = values.iter().copied().fold(0.0, f64::max).max(1e-300);
    let bh = ((H - 2.0 * M) / labels.len().max(1) as f64).min(30.0);
    for (i, (l, &v)) in labels.iter().zip(values).enumerate() {
        let y = M + i as f64 * bh;
        let w = v / vmax * (W - 3.0 * M - 80.0);
        let _ = writeln!(
            s,
            "<rect x=\"{}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{:.2}\" fill=\"{}\"/>\
             <text x=\"{}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{}</text>\
             <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\">{v}</text>",
            M + 80.0,
            bh * 0.8,
            PALETTE[i % PALETTE.len()],
            M + 75.0,
            y + bh * 0.6,
            escape(l),
            M + 85.0 + w,
            y + bh * 0.6
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Plain-text table of conditions for one EPIC.
pub fn condition_table<T: Scalar>(
    epic: usize,
    epic_size: usize,
    conds: &[ExplainableCondition<T>],
) -> String {
    let mut s = format!("EPIC {epic} ({epic_size})\n");
    if conds.is_empty() {
        s.push_str("  no explainable condition\n");
        return s;
    }
    let _ = writeln!(s, "  {:<4} {:>6} {:>7}  condition", "#", "size", "purity");
    for (i, c) in conds.iter().enumerate() {
        let _ = writeln!(
            s,
            "  {:<4} {:>6} {:>7.3}  {}",
            i + 1,
            c.covered,
            c.purity,
            c
        );
    }
    s
}
