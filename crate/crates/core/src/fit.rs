//! Fitted prior models and their metadata.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::discrete::{DiscretePrior, EfronPrior};
use crate::gamma_mixture::GammaMixturePrior;
use crate::num::Real;

/// Which empirical Bayes model produced a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "GPS")]
    Gps,
    #[serde(rename = "K-gamma")]
    KGamma,
    #[serde(rename = "general-gamma")]
    GeneralGamma,
    #[serde(rename = "KM")]
    Km,
    #[serde(rename = "efron")]
    Efron,
}

impl ModelKind {
    pub fn is_gamma_mixture(self) -> bool {
        matches!(self, ModelKind::Gps | ModelKind::KGamma | ModelKind::GeneralGamma)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Gps => "GPS",
            ModelKind::KGamma => "K-gamma",
            ModelKind::GeneralGamma => "general-gamma",
            ModelKind::Km => "KM",
            ModelKind::Efron => "efron",
        })
    }
}

/// Estimated prior `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Real")]
pub enum PriorModel<T> {
    GammaMixture(GammaMixturePrior<T>),
    Discrete(DiscretePrior<T>),
    Efron(EfronPrior<T>),
}

impl<T: Real> PriorModel<T> {
    /// Discrete view of a grid prior (`Discrete` or `Efron`).
    pub fn as_discrete(&self) -> Option<DiscretePrior<T>> {
        match self {
            PriorModel::GammaMixture(_) => None,
            PriorModel::Discrete(d) => Some(d.clone()),
            PriorModel::Efron(e) => Some(e.to_discrete()),
        }
    }
}

/// Method-specific diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Diagnostics<T> {
    /// KM: `max_k (1/n) Σ_c L_ck / p̂_c` at the solution (≤ 1 at the optimum).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub kkt_max: Option<T>,
    /// Efron: penalized log likelihood at the optimum.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub penalized_log_likelihood: Option<T>,
    /// Efron: trace of the degrees-of-freedom matrix.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace_f: Option<T>,
    /// Efron: AIC with effective degrees of freedom.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub aic_e: Option<T>,
}

/// Result of fitting any of the models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FitResult<T> {
    pub model: ModelKind,
    pub prior: PriorModel<T>,
    /// Unpenalized log marginal likelihood at the estimate.
    pub log_marginal_likelihood: T,
    /// Objective value per iteration (penalized where the method penalizes).
    pub objective_trace: Vec<T>,
    /// Trace indices where the retained component set changed; the objective is
    /// non-decreasing between consecutive segment starts.
    pub segment_starts: Vec<usize>,
    /// Retained components (gamma mixtures) or support points with positive mass.
    pub k_star: usize,
    /// Dirichlet hyperparameter (gamma mixtures only).
    pub alpha: Option<T>,
    pub converged: bool,
    pub iterations: usize,
    pub seed: Option<u64>,
    #[serde(default)]
    pub diagnostics: Diagnostics<T>,
}

impl<T: Real> FitResult<T> {
    pub fn gamma_prior(&self) -> Option<&GammaMixturePrior<T>> {
        match &self.prior {
            PriorModel::GammaMixture(g) => Some(g),
            _ => None,
        }
    }
}
