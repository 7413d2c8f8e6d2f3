//! Information criteria and hyperparameter tuning grids.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::discrete::{efron_fit, EfronOptions};
use crate::error::{Error, Result};
use crate::fit::FitResult;
use crate::gamma_mixture::{fit_general_gamma, EcmOptions};
use crate::num::Real;
use crate::tables::{ContingencyTable, ExpectedCounts};

/// Default Dirichlet grid.
pub const DEFAULT_ALPHA_GRID: [f64; 6] = [0.0, 0.1, 0.3, 0.5, 0.7, 0.9];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    #[default]
    #[serde(rename = "AIC")]
    Aic,
    #[serde(rename = "BIC")]
    Bic,
}

/// `AIC = 2 · 3K* − 2 ln L`.
pub fn aic_general_gamma<T: Real>(fit: &FitResult<T>) -> Result<T> {
    if !fit.model.is_gamma_mixture() {
        return Err(Error::InvalidArgument(format!("AIC needs a gamma-mixture fit, got {}", fit.model)));
    }
    let k = T::from_usize(3 * fit.k_star).unwrap();
    Ok(T::lit(2.0) * k - T::lit(2.0) * fit.log_marginal_likelihood)
}

/// `BIC = 3K* · ln(I·J) − 2 ln L`.
pub fn bic_general_gamma<T: Real>(fit: &FitResult<T>, n_cells: usize) -> Result<T> {
    if !fit.model.is_gamma_mixture() {
        return Err(Error::InvalidArgument(format!("BIC needs a gamma-mixture fit, got {}", fit.model)));
    }
    let k = T::from_usize(3 * fit.k_star).unwrap();
    Ok(k * T::from_usize(n_cells).unwrap().ln() - T::lit(2.0) * fit.log_marginal_likelihood)
}

/// One grid point of a tuning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TuneRow<T> {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alpha: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub c0: Option<T>,
    pub aic: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bic: Option<T>,
    /// Retained components (gamma mixtures).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k_star: Option<usize>,
    /// Effective degrees of freedom (Efron).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace_f: Option<T>,
    pub log_likelihood: T,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TuneReport<T> {
    pub rows: Vec<TuneRow<T>>,
    pub selected_by_aic: Option<usize>,
    pub selected_by_bic: Option<usize>,
}

impl<T: Real> TuneReport<T> {
    fn from_rows(rows: Vec<TuneRow<T>>) -> Self {
        let argmin = |key: fn(&TuneRow<T>) -> Option<T>| {
            let mut best: Option<(usize, T)> = None;
            for (i, r) in rows.iter().enumerate() {
                if !r.converged {
                    continue;
                }
                if let Some(v) = key(r) {
                    if best.is_none_or(|(_, b)| v < b) {
                        best = Some((i, v));
                    }
                }
            }
            best.map(|(i, _)| i)
        };
        let selected_by_aic = argmin(|r| r.aic);
        let selected_by_bic = argmin(|r| r.bic);
        Self { rows, selected_by_aic, selected_by_bic }
    }

    pub fn selected(&self, criterion: Criterion) -> Option<usize> {
        match criterion {
            Criterion::Aic => self.selected_by_aic,
            Criterion::Bic => self.selected_by_bic,
        }
    }

    /// Fixed-width text table; numbers to three decimals.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let fmt = |v: Option<T>| v.map_or_else(|| "NA".to_string(), |v| format!("{:.3}", v.as_f64()));
        let efron = self.rows.iter().any(|r| r.p.is_some());
        if efron {
            let _ = writeln!(out, "{:>5} {:>10} {:>12} {:>9} {:>12}", "p", "c0", "AIC", "trace_F", "logL");
            for r in &self.rows {
                let _ = writeln!(
                    out,
                    "{:>5} {:>10} {:>12} {:>9} {:>12}{}",
                    r.p.unwrap_or(0),
                    r.c0.map_or("NA".into(), |c| format!("{:e}", c.as_f64())),
                    fmt(r.aic),
                    fmt(r.trace_f),
                    format!("{:.3}", r.log_likelihood.as_f64()),
                    if r.converged { "" } else { "  (not converged)" }
                );
            }
        } else {
            let _ = writeln!(out, "{:>5} {:>10} {:>10} {:>11}", "alpha", "AIC", "BIC", "num_mixture");
            for r in &self.rows {
                let _ = writeln!(
                    out,
                    "{:>5} {:>10} {:>10} {:>11}{}",
                    r.alpha.map_or("NA".into(), |a| format!("{:.1}", a.as_f64())),
                    fmt(r.aic),
                    fmt(r.bic),
                    r.k_star.unwrap_or(0),
                    if r.converged { "" } else { "  (not converged)" }
                );
            }
        }
        out
    }

    /// CSV with one line per grid point.
    pub fn to_csv(&self) -> String {
        let cell = |v: Option<T>| v.map_or_else(String::new, |v| format!("{}", v.as_f64()));
        let mut out = String::from("alpha,p,c0,aic,bic,k_star,trace_f,log_likelihood,converged\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                cell(r.alpha),
                r.p.map_or_else(String::new, |p| p.to_string()),
                cell(r.c0),
                cell(r.aic),
                cell(r.bic),
                r.k_star.map_or_else(String::new, |k| k.to_string()),
                cell(r.trace_f),
                r.log_likelihood.as_f64(),
                r.converged
            );
        }
        out
    }
}

/// Report plus the fit chosen by the requested criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct Tuned<T> {
    pub report: TuneReport<T>,
    pub best: FitResult<T>,
    pub best_index: usize,
}

fn no_converged<T: Real>(report: &TuneReport<T>) -> Error {
    Error::NoConvergedFit { grid_points: report.rows.len(), report: report.to_table() }
}

/// Fit general-gamma at every α (shared seed) and select by AIC or BIC.
pub fn tune_general_gamma<T: Real>(
    table: &ContingencyTable,
    e: &ExpectedCounts<T>,
    alphas: &[T],
    criterion: Criterion,
    opts: &EcmOptions<T>,
) -> Result<Tuned<T>> {
    if alphas.is_empty() {
        return Err(Error::InvalidArgument("alpha grid is empty".into()));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a >= T::zero() && **a <= T::one())) {
        return Err(Error::InvalidArgument(format!("alpha must lie in [0, 1], got {a}")));
    }
    let mut fits = Vec::with_capacity(alphas.len());
    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let o = EcmOptions { alpha, ..opts.clone() };
        let fit = fit_general_gamma(table, e, &o)?;
        rows.push(TuneRow {
            alpha: Some(alpha),
            p: None,
            c0: None,
            aic: Some(aic_general_gamma(&fit)?),
            bic: Some(bic_general_gamma(&fit, table.n_cells())?),
            k_star: Some(fit.k_star),
            trace_f: None,
            log_likelihood: fit.log_marginal_likelihood,
            converged: fit.converged,
        });
        fits.push(fit);
    }
    let report = TuneReport::from_rows(rows);
    let best_index = report.selected(criterion).ok_or_else(|| no_converged(&report))?;
    Ok(Tuned { best: fits.swap_remove(best_index), report, best_index })
}

/// Fit Efron over the `p × c0` grid and select by `AIC_E`.
pub fn tune_efron<T: Real>(
    table: &ContingencyTable,
    e: &ExpectedCounts<T>,
    support: &[T],
    p_grid: &[usize],
    c0_grid: &[T],
    criterion: Criterion,
    opts: &EfronOptions<T>,
) -> Result<Tuned<T>> {
    if p_grid.is_empty() || c0_grid.is_empty() {
        return Err(Error::InvalidArgument("efron grids must be non-empty".into()));
    }
    if criterion != Criterion::Aic {
        return Err(Error::InvalidArgument("efron tuning supports AIC only".into()));
    }
    let mut best: Option<(usize, T, FitResult<T>)> = None;
    let mut rows = Vec::new();
    for &p in p_grid {
        for &c0 in c0_grid {
            let fit = efron_fit(table, e, p, c0, support, opts)?;
            let aic = fit.diagnostics.aic_e;
            rows.push(TuneRow {
                alpha: None,
                p: Some(p),
                c0: Some(c0),
                aic,
                bic: None,
                k_star: None,
                trace_f: fit.diagnostics.trace_f,
                log_likelihood: fit.log_marginal_likelihood,
                converged: fit.converged,
            });
            if let (true, Some(a)) = (fit.converged, aic) {
                if best.as_ref().is_none_or(|(_, b, _)| a < *b) {
                    best = Some((rows.len() - 1, a, fit));
                }
            }
        }
    }
    let report = TuneReport::from_rows(rows);
    let (best_index, _, best) = best.ok_or_else(|| no_converged(&report))?;
    debug_assert_eq!(report.selected_by_aic, Some(best_index));
    Ok(Tuned { report, best, best_index })
}
