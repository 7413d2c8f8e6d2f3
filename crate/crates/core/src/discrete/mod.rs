//! Priors on a finite support grid: the Koenker–Mizera NPMLE and Efron's
//! penalized exponential family.

mod efron;
mod km;
mod spline;
mod support;

pub use efron::{efron_aic, efron_fit, efron_objective, EfronAic, EfronOptions};
pub use km::{km_fit, KmOptions};
pub use spline::natural_spline_basis;
pub use support::{make_support, SupportScale};

use serde::{Deserialize, Serialize};

use crate::dist::poisson_ln_pmf;
use crate::error::{Error, Result};
use crate::num::Real;
use crate::tables::{ContingencyTable, ExpectedCounts};

/// Probability masses `g_k` on a sorted support `v_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DiscretePrior<T> {
    pub support: Vec<T>,
    pub masses: Vec<T>,
}

impl<T: Real> DiscretePrior<T> {
    pub fn new(support: Vec<T>, masses: Vec<T>) -> Result<Self> {
        let p = Self { support, masses };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        validate_support(&self.support)?;
        if self.masses.len() != self.support.len() {
            return Err(Error::InvalidArgument(format!(
                "{} masses for {} support points",
                self.masses.len(),
                self.support.len()
            )));
        }
        if self.masses.iter().any(|m| !(m.is_finite() && *m >= T::zero())) {
            return Err(Error::InvalidArgument("masses must be finite and non-negative".into()));
        }
        let total: T = self.masses.iter().copied().sum();
        if (total - T::one()).abs() > T::lit(1e-9) {
            return Err(Error::InvalidArgument(format!("masses sum to {total}, not 1")));
        }
        Ok(())
    }

    pub fn mean(&self) -> T {
        self.support.iter().zip(&self.masses).map(|(&v, &g)| v * g).sum()
    }
}

/// Efron's prior `g(α) = exp(Qα − φ(α))` on a support grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EfronPrior<T> {
    pub support: Vec<T>,
    /// `K × p` spline basis, one row per support point.
    pub basis: Vec<Vec<T>>,
    pub coefficients: Vec<T>,
    pub c0: T,
    /// `φ(α) = ln Σ_k exp(Q_k α)`.
    pub log_normalizer: T,
}

impl<T: Real> EfronPrior<T> {
    pub fn degrees_of_freedom(&self) -> usize {
        self.coefficients.len()
    }

    pub fn masses(&self) -> Vec<T> {
        softmax_masses(&self.basis, &self.coefficients).0
    }

    pub fn to_discrete(&self) -> DiscretePrior<T> {
        DiscretePrior { support: self.support.clone(), masses: self.masses() }
    }
}

/// `(softmax(Qα), φ(α))`.
pub(crate) fn softmax_masses<T: Real>(basis: &[Vec<T>], alpha: &[T]) -> (Vec<T>, T) {
    let eta: Vec<T> = basis.iter().map(|row| row.iter().zip(alpha).map(|(&q, &a)| q * a).sum()).collect();
    let max = eta.iter().copied().fold(T::neg_infinity(), T::max);
    let mut g: Vec<T> = eta.iter().map(|&v| (v - max).exp()).collect();
    let s: T = g.iter().copied().sum();
    for v in &mut g {
        *v /= s;
    }
    (g, max + s.ln())
}

pub(crate) fn validate_support<T: Real>(support: &[T]) -> Result<()> {
    if support.is_empty() {
        return Err(Error::InvalidArgument("support grid is empty".into()));
    }
    if support.iter().any(|v| !(v.is_finite() && *v >= T::zero())) {
        return Err(Error::InvalidArgument("support points must be finite and non-negative".into()));
    }
    if support.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("support must be strictly increasing".into()));
    }
    Ok(())
}

/// Poisson likelihood matrix on a support grid, scaled per cell for stability.
///
/// `scaled[c * K + k] = f_pois(N_c | v_k E_c) / max_m f_pois(N_c | v_m E_c)` and
/// `offset[c]` holds the log of that per-cell maximum.
pub(crate) struct Likelihood<T> {
    pub n_cells: usize,
    pub k: usize,
    pub scaled: Vec<T>,
    pub offset: Vec<T>,
}

impl<T: Real> Likelihood<T> {
    pub fn new(table: &ContingencyTable, e: &ExpectedCounts<T>, support: &[T]) -> Result<Self> {
        e.check_shape(table)?;
        validate_support(support)?;
        let k = support.len();
        let n_cols = table.n_cols();
        let mut scaled = Vec::with_capacity(table.n_cells() * k);
        let mut offset = Vec::with_capacity(table.n_cells());
        let mut row = vec![T::zero(); k];
        for (c, (&n, &ev)) in table.counts().iter().zip(e.values()).enumerate() {
            for (r, &v) in row.iter_mut().zip(support) {
                *r = poisson_ln_pmf(n, v * ev);
            }
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            if !max.is_finite() {
                return Err(Error::EmptyLikelihood { row: c / n_cols, col: c % n_cols });
            }
            offset.push(max);
            scaled.extend(row.iter().map(|&l| (l - max).exp()));
        }
        Ok(Self { n_cells: table.n_cells(), k, scaled, offset })
    }

    pub fn cell(&self, c: usize) -> &[T] {
        &self.scaled[c * self.k..(c + 1) * self.k]
    }

    /// `Σ_c ln Σ_k g_k L_ck`.
    pub fn log_likelihood(&self, g: &[T]) -> T {
        (0..self.n_cells)
            .map(|c| {
                let f: T = self.cell(c).iter().zip(g).map(|(&l, &w)| l * w).sum();
                f.ln() + self.offset[c]
            })
            .sum()
    }
}

/// Log marginal likelihood of the table under a discrete prior.
pub fn discrete_log_marginal<T: Real>(
    table: &ContingencyTable,
    e: &ExpectedCounts<T>,
    prior: &DiscretePrior<T>,
) -> Result<T> {
    prior.validate()?;
    Ok(Likelihood::new(table, e, &prior.support)?.log_likelihood(&prior.masses))
}
