//! Nonparametric empirical Bayes models for signal detection in adverse-event
//! by drug report tables.
//!
//! Models are generic over the scalar type ([`Real`], implemented for `f32` and
//! `f64`); the `*64` aliases below name the common double-precision instances.

// `!(x > 0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod discrete;
mod dist;
pub mod error;
pub mod fit;
pub mod gamma_mixture;
pub mod num;
pub mod optim;
pub mod plot;
pub mod posterior;
pub mod selection;
pub mod simulation;
pub mod special;
pub mod tables;

pub use discrete::{
    efron_aic, efron_fit, efron_objective, km_fit, make_support, DiscretePrior, EfronAic, EfronOptions, EfronPrior,
    KmOptions, SupportScale,
};
pub use dist::{gamma_cdf, gamma_sf, nb_ln_pmf, poisson_ln_pmf};
pub use error::{Error, Result};
pub use fit::{Diagnostics, FitResult, ModelKind, PriorModel};
pub use gamma_mixture::{
    ecm_fit, fit_general_gamma, fit_gps, fit_k_gamma, init_prior, nb_mixture_log_marginal, EcmOptions,
    GammaMixturePrior,
};
pub use num::Real;
pub use plot::{eyeplot, heatmap, render_svg, LabelGeometry, PlotData, Selection};
pub use posterior::{
    all_posteriors, cell_posterior, detect_signals, posterior_draws, posterior_draws_for, posterior_summary,
    scaled_wasserstein, CellPosterior, Detection, PosteriorDraws, PosteriorSummary, WassersteinMode, WassersteinOrder,
};
pub use selection::{
    aic_general_gamma, bic_general_gamma, tune_efron, tune_general_gamma, Criterion, TuneReport, Tuned,
};
pub use simulation::{
    aggregate_metrics, generate_contin_table, metrics_to_csv, run_simulation, zero_indicator_from_e, Metrics, Policy,
    SignalMatrix, SimulationConfig, ZeroIndicator,
};
pub use tables::{
    collapse_rows, estimate_null_expected_count, load_table, parse_table, ContingencyTable, ExpectedCounts,
    LoadOptions, NullMethod,
};

pub type ExpectedCounts64 = ExpectedCounts<f64>;
pub type GammaMixturePrior64 = GammaMixturePrior<f64>;
pub type DiscretePrior64 = DiscretePrior<f64>;
pub type EfronPrior64 = EfronPrior<f64>;
pub type FitResult64 = FitResult<f64>;
pub type EcmOptions64 = EcmOptions<f64>;

pub type ExpectedCounts32 = ExpectedCounts<f32>;
pub type FitResult32 = FitResult<f32>;
