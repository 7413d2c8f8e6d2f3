//! Per-cell posteriors of the signal strength, detection, summaries, draws and
//! scaled Wasserstein distances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::discrete::DiscretePrior;
use crate::dist::{gamma_cdf, gamma_sf, nb_ln_pmf, poisson_ln_pmf};
use crate::error::{Error, Result};
use crate::fit::{FitResult, ModelKind, PriorModel};
use crate::gamma_mixture::GammaMixturePrior;
use crate::num::Real;
use crate::tables::{ContingencyTable, ExpectedCounts};

const QUANTILE_TOL: f64 = 1e-10;
const BRACKET_SDS: f64 = 40.0;

/// Posterior of `λ_ij` given `N_ij`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Real")]
pub enum CellPosterior<T> {
    /// Component `k` is `Gamma(shapes[k], rate = rates[k])`.
    GammaMixture {
        weights: Vec<T>,
        shapes: Vec<T>,
        rates: Vec<T>,
    },
    Discrete {
        support: Vec<T>,
        masses: Vec<T>,
    },
}

fn normalize_log<T: Real>(mut logw: Vec<T>) -> Vec<T> {
    let max = logw.iter().copied().fold(T::neg_infinity(), T::max);
    let mut s = T::zero();
    for v in &mut logw {
        *v = (*v - max).exp();
        s += *v;
    }
    logw.iter_mut().for_each(|v| *v /= s);
    logw
}

impl<T: Real> CellPosterior<T> {
    pub fn from_gamma_prior(prior: &GammaMixturePrior<T>, n: u64, e: T) -> Self {
        let logw = (0..prior.n_components())
            .map(|k| prior.weights[k].ln() + nb_ln_pmf(n, prior.shapes[k], e * prior.scales[k]))
            .collect();
        let nn = T::from_count(n);
        CellPosterior::GammaMixture {
            weights: normalize_log(logw),
            shapes: prior.shapes.iter().map(|&r| r + nn).collect(),
            rates: prior.scales.iter().map(|&h| h.recip() + e).collect(),
        }
    }

    pub fn from_discrete_prior(prior: &DiscretePrior<T>, n: u64, e: T) -> Self {
        let logw = prior.support.iter().zip(&prior.masses).map(|(&v, &g)| g.ln() + poisson_ln_pmf(n, v * e)).collect();
        CellPosterior::Discrete { support: prior.support.clone(), masses: normalize_log(logw) }
    }

    pub fn mean(&self) -> T {
        match self {
            CellPosterior::GammaMixture { weights, shapes, rates } => {
                (0..weights.len()).map(|k| weights[k] * shapes[k] / rates[k]).sum()
            }
            CellPosterior::Discrete { support, masses } => support.iter().zip(masses).map(|(&v, &m)| v * m).sum(),
        }
    }

    /// `E(λ − c)²`.
    pub fn second_moment_about(&self, c: T) -> T {
        match self {
            CellPosterior::GammaMixture { weights, shapes, rates } => (0..weights.len())
                .map(|k| {
                    let mean = shapes[k] / rates[k];
                    let var = mean / rates[k];
                    weights[k] * (var + (mean - c) * (mean - c))
                })
                .sum(),
            CellPosterior::Discrete { support, masses } => {
                support.iter().zip(masses).map(|(&v, &m)| m * (v - c) * (v - c)).sum()
            }
        }
    }

    pub fn variance(&self) -> T {
        self.second_moment_about(self.mean())
    }

    /// `Pr(λ ≤ x)`.
    pub fn cdf(&self, x: T) -> T {
        match self {
            CellPosterior::GammaMixture { weights, shapes, rates } => {
                (0..weights.len()).map(|k| weights[k] * gamma_cdf(shapes[k], rates[k], x)).sum::<T>().min(T::one())
            }
            CellPosterior::Discrete { support, masses } => {
                support.iter().zip(masses).filter(|(&v, _)| v <= x).map(|(_, &m)| m).sum::<T>().min(T::one())
            }
        }
    }

    /// `Pr(λ ≥ x)`.
    pub fn tail(&self, x: T) -> T {
        match self {
            CellPosterior::GammaMixture { weights, shapes, rates } => {
                (0..weights.len()).map(|k| weights[k] * gamma_sf(shapes[k], rates[k], x)).sum::<T>().min(T::one())
            }
            CellPosterior::Discrete { support, masses } => {
                support.iter().zip(masses).filter(|(&v, _)| v >= x).map(|(_, &m)| m).sum::<T>().min(T::one())
            }
        }
    }

    /// Quantile at level `q ∈ (0, 1)`: bisection on the mixture CDF, or the
    /// left-continuous inverse `min{v : F(v) ≥ q}` for a discrete posterior.
    pub fn quantile(&self, q: T) -> T {
        match self {
            CellPosterior::GammaMixture { weights, shapes, rates } => {
                let mut hi = (0..weights.len())
                    .map(|k| {
                        let m = shapes[k] / rates[k];
                        m + T::lit(BRACKET_SDS) * shapes[k].sqrt() / rates[k]
                    })
                    .fold(T::zero(), T::max);
                let mut expansions = 0;
                while self.cdf(hi) < q && expansions < 200 {
                    hi *= T::lit(2.0);
                    expansions += 1;
                }
                let mut lo = T::zero();
                let tol = T::lit(QUANTILE_TOL);
                for _ in 0..400 {
                    if hi - lo <= tol * hi.max(T::min_positive_value()) {
                        break;
                    }
                    let mid = lo + (hi - lo) * T::lit(0.5);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.cdf(mid) < q {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                lo + (hi - lo) * T::lit(0.5)
            }
            CellPosterior::Discrete { support, masses } => {
                let mut acc = T::zero();
                for (&v, &m) in support.iter().zip(masses) {
                    acc += m;
                    if acc >= q {
                        return v;
                    }
                }
                // rounding left the cumulative sum just short of q
                *support
                    .iter()
                    .zip(masses)
                    .rev()
                    .find(|(_, &m)| m > T::zero())
                    .map(|(v, _)| v)
                    .unwrap_or(&support[support.len() - 1])
            }
        }
    }

    /// One draw in `f64`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let pick = |w: &[T]| {
            let mut acc = 0.0;
            for (k, v) in w.iter().enumerate() {
                acc += v.as_f64();
                if u < acc {
                    return k;
                }
            }
            w.iter().rposition(|v| *v > T::zero()).unwrap_or(w.len() - 1)
        };
        match self {
            CellPosterior::GammaMixture { weights, shapes, rates } => {
                let k = pick(weights);
                Gamma::new(shapes[k].as_f64(), rates[k].as_f64().recip())
                    .expect("positive gamma parameters")
                    .sample(rng)
            }
            CellPosterior::Discrete { support, masses } => support[pick(masses)].as_f64(),
        }
    }
}

/// Posterior of cell `(i, j)` under a fitted prior.
pub fn cell_posterior<T: Real>(
    fit: &FitResult<T>,
    table: &ContingencyTable,
    e: &ExpectedCounts<T>,
    i: usize,
    j: usize,
) -> Result<CellPosterior<T>> {
    e.check_shape(table)?;
    if i >= table.n_rows() || j >= table.n_cols() {
        return Err(Error::InvalidArgument(format!(
            "cell ({i}, {j}) outside a {}x{} table",
            table.n_rows(),
            table.n_cols()
        )));
    }
    let (n, ev) = (table.get(i, j), e.get(i, j));
    Ok(match &fit.prior {
        PriorModel::GammaMixture(g) => CellPosterior::from_gamma_prior(g, n, ev),
        PriorModel::Discrete(d) => CellPosterior::from_discrete_prior(d, n, ev),
        PriorModel::Efron(p) => CellPosterior::from_discrete_prior(&p.to_discrete(), n, ev),
    })
}

/// Posteriors of every cell, row-major.
pub fn all_posteriors<T: Real>(
    fit: &FitResult<T>,
    table: &ContingencyTable,
    e: &ExpectedCounts<T>,
) -> Result<Vec<CellPosterior<T>>> {
    e.check_shape(table)?;
    let discrete = match &fit.prior {
        PriorModel::Efron(p) => Some(p.to_discrete()),
        _ => None,
    };
    Ok(table
        .counts()
        .iter()
        .zip(e.values())
        .map(|(&n, &ev)| match (&fit.prior, &discrete) {
            (PriorModel::GammaMixture(g), _) => CellPosterior::from_gamma_prior(g, n, ev),
            (PriorModel::Discrete(d), _) => CellPosterior::from_discrete_prior(d, n, ev),
            (PriorModel::Efron(_), Some(d)) => CellPosterior::from_discrete_prior(d, n, ev),
            (PriorModel::Efron(_), None) => unreachable!(),
        })
        .collect())
}

/// Detection outcome, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Detection<T> {
    pub n_rows: usize,
    pub n_cols: usize,
    pub cutoff: T,
    pub prob: T,
    /// `Pr(λ_ij ≥ cutoff | N_ij)`.
    pub tail_probability: Vec<T>,
    pub detected: Vec<bool>,
}

impl<T: Real> Detection<T> {
    pub fn count(&self) -> usize {
        self.detected.iter().filter(|&&d| d).count()
    }

    pub fn is_detected(&self, i: usize, j: usize) -> bool {
        self.detected[i * self.n_cols + j]
    }
}

/// Flag cells with `Pr(λ_ij ≥ cutoff | data) > prob`, using closed-form tails.
pub fn detect_signals<T: Real>(
    fit: &FitResult<T>,
    table: &ContingencyTable,
    e: &ExpectedCounts<T>,
    cutoff: T,
    prob: T,
) -> Result<Detection<T>> {
    if !(cutoff > T::one()) {
        return Err(Error::InvalidArgument(format!("cutoff must exceed 1, got {cutoff}")));
    }
    if !(prob > T::zero() && prob < T::one()) {
        return Err(Error::InvalidArgument(format!("prob must lie in (0, 1), got {prob}")));
    }
    let tail: Vec<T> = all_posteriors(fit, table, e)?.iter().map(|p| p.tail(cutoff)).collect();
    Ok(Detection {
        n_rows: table.n_rows(),
        n_cols: table.n_cols(),
        cutoff,
        prob,
        detected: tail.iter().map(|&t| t > prob).collect(),
        tail_probability: tail,
    })
}

/// Posterior medians and equi-tailed credible bounds, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PosteriorSummary<T> {
    pub n_rows: usize,
    pub n_cols: usize,
    pub level: T,
    pub median: Vec<T>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

pub fn posterior_summary<T: Real>(
    fit: &FitResult<T>,
    table: &ContingencyTable,
    e: &ExpectedCounts<T>,
    level: T,
) -> Result<PosteriorSummary<T>> {
    if !(level > T::zero() && level < T::one()) {
        return Err(Error::InvalidArgument(format!("level must lie in (0, 1), got {level}")));
    }
    let lo_q = (T::one() - level) / T::lit(2.0);
    let hi_q = T::one() - lo_q;
    let post = all_posteriors(fit, table, e)?;
    Ok(PosteriorSummary {
        n_rows: table.n_rows(),
        n_cols: table.n_cols(),
        level,
        median: post.iter().map(|p| p.quantile(T::lit(0.5))).collect(),
        lower: post.iter().map(|p| p.quantile(lo_q)).collect(),
        upper: post.iter().map(|p| p.quantile(hi_q)).collect(),
    })
}

/// Seeded posterior draws for a set of cells.
///
/// Cell `c` (row-major index) draws from its own ChaCha8 stream keyed by
/// `(seed, c)`, so any subset of cells reproduces the draws of the full array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub model: ModelKind,
    pub seed: u64,
    pub n_draws: usize,
    pub n_rows: usize,
    pub n_cols: usize,
    /// Row-major indices of the cells present.
    pub cells: Vec<usize>,
    /// `values[m * n_draws + s]` is draw `s` of `cells[m]`.
    pub values: Vec<f64>,
}

impl PosteriorDraws {
    /// Draws for cell `(i, j)`, if it was sampled.
    pub fn cell(&self, i: usize, j: usize) -> Option<&[f64]> {
        let idx = i * self.n_cols + j;
        let m = self.cells.iter().position(|&c| c == idx)?;
        Some(&self.values[m * self.n_draws..(m + 1) * self.n_draws])
    }

    /// Draw `s` of cell `(i, j)`, matching the logical `S × I × J` layout.
    pub fn get(&self, s: usize, i: usize, j: usize) -> Option<f64> {
        self.cell(i, j).and_then(|d| d.get(s).copied())
    }
}

pub fn posterior_draws<T: Real>(
    fit: &FitResult<T>,
    table: &ContingencyTable,
    e: &ExpectedCounts<T>,
    n_draws: usize,
    seed: u64,
) -> Result<PosteriorDraws> {
    let cells: Vec<(usize, usize)> =
        (0..table.n_rows()).flat_map(|i| (0..table.n_cols()).map(move |j| (i, j))).collect();
    posterior_draws_for(fit, table, e, &cells, n_draws, seed)
}

pub fn posterior_draws_for<T: Real>(
    fit: &FitResult<T>,
    table: &ContingencyTable,
    e: &ExpectedCounts<T>,
    cells: &[(usize, usize)],
    n_draws: usize,
    seed: u64,
) -> Result<PosteriorDraws> {
    if n_draws == 0 {
        return Err(Error::InvalidArgument("need at least one posterior draw".into()));
    }
    let mut values = Vec::with_capacity(cells.len() * n_draws);
    let mut idx = Vec::with_capacity(cells.len());
    for &(i, j) in cells {
        let post = cell_posterior(fit, table, e, i, j)?;
        let c = i * table.n_cols() + j;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        values.extend((0..n_draws).map(|_| post.sample(&mut rng)));
        idx.push(c);
    }
    Ok(PosteriorDraws {
        model: fit.model,
        seed,
        n_draws,
        n_rows: table.n_rows(),
        n_cols: table.n_cols(),
        cells: idx,
        values,
    })
}

/// Order of the Wasserstein distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WassersteinOrder {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WassersteinMode {
    ClosedForm,
    MonteCarlo { n_draws: usize, seed: u64 },
}

/// `(1/λ₀) · (E|λ − λ₀|^p)^{1/p}` under the posterior.
pub fn scaled_wasserstein<T: Real>(
    post: &CellPosterior<T>,
    lambda_true: T,
    order: WassersteinOrder,
    mode: WassersteinMode,
) -> Result<T> {
    if !(lambda_true > T::zero()) {
        return Err(Error::InvalidArgument(format!("true signal strength must be positive, got {lambda_true}")));
    }
    let c = lambda_true;
    let value = match mode {
        WassersteinMode::ClosedForm => match order {
            WassersteinOrder::Two => post.second_moment_about(c).max(T::zero()).sqrt(),
            WassersteinOrder::One => mean_abs_deviation(post, c),
        },
        WassersteinMode::MonteCarlo { n_draws, seed } => {
            if n_draws == 0 {
                return Err(Error::InvalidArgument("need at least one draw".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let draws: Vec<f64> = (0..n_draws).map(|_| post.sample(&mut rng)).collect();
            T::lit(draw_distance(&draws, c.as_f64(), order) * c.as_f64())
        }
    };
    Ok(value / c)
}

/// `E|λ − c|`; for a gamma component with shape `a` and rate `b`,
/// `E|X − c| = m − c + 2c·P(a, bc) − 2m·P(a + 1, bc)` where `m = a/b`.
fn mean_abs_deviation<T: Real>(post: &CellPosterior<T>, c: T) -> T {
    match post {
        CellPosterior::GammaMixture { weights, shapes, rates } => (0..weights.len())
            .map(|k| {
                let (a, b) = (shapes[k], rates[k]);
                let m = a / b;
                let lower_c = gamma_cdf(a, b, c);
                let lower_m = gamma_cdf(a + T::one(), b, c);
                let v = m - c + T::lit(2.0) * (c * lower_c - m * lower_m);
                weights[k] * v.max(T::zero())
            })
            .sum(),
        CellPosterior::Discrete { support, masses } => {
            support.iter().zip(masses).map(|(&v, &m)| m * (v - c).abs()).sum()
        }
    }
}

/// Scaled distance estimated from draws.
pub fn draw_distance(draws: &[f64], lambda_true: f64, order: WassersteinOrder) -> f64 {
    let n = draws.len() as f64;
    let raw = match order {
        WassersteinOrder::One => draws.iter().map(|x| (x - lambda_true).abs()).sum::<f64>() / n,
        WassersteinOrder::Two => (draws.iter().map(|x| (x - lambda_true).powi(2)).sum::<f64>() / n).sqrt(),
    };
    raw / lambda_true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::Diagnostics;
    use crate::tables::NullMethod;
    use approx::assert_relative_eq;
    use statrs::distribution::{ContinuousCDF, Gamma as SGamma};

    fn gamma_fit(prior: GammaMixturePrior<f64>) -> FitResult<f64> {
        FitResult {
            model: ModelKind::KGamma,
            k_star: prior.n_components(),
            prior: PriorModel::GammaMixture(prior),
            log_marginal_likelihood: 0.0,
            objective_trace: vec![],
            segment_starts: vec![0],
            alpha: Some(1.0),
            converged: true,
            iterations: 0,
            seed: None,
            diagnostics: Diagnostics::default(),
        }
    }

    fn single(shape: f64, rate: f64) -> CellPosterior<f64> {
        CellPosterior::GammaMixture { weights: vec![1.0], shapes: vec![shape], rates: vec![rate] }
    }

    #[test]
    fn conjugate_single_component() {
        let prior = GammaMixturePrior::new(vec![1.0], vec![1.5], vec![0.8]).unwrap();
        let p = CellPosterior::from_gamma_prior(&prior, 7, 2.5);
        assert_eq!(
            p,
            CellPosterior::GammaMixture { weights: vec![1.0], shapes: vec![8.5], rates: vec![1.0 / 0.8 + 2.5] }
        );
    }

    #[test]
    fn discrete_mass_ratio() {
        let prior = DiscretePrior::new(vec![0.5, 2.0], vec![0.5, 0.5]).unwrap();
        let CellPosterior::Discrete { masses, .. } = CellPosterior::from_discrete_prior(&prior, 0, 3.0) else {
            panic!()
        };
        let (a, b) = ((-1.5f64).exp(), (-6.0f64).exp());
        assert_relative_eq!(masses[0], a / (a + b), epsilon = 1e-15);
        assert_relative_eq!(masses[1], b / (a + b), epsilon = 1e-15);
    }

    #[test]
    fn likelihood_dominates_for_large_counts() {
        let prior = GammaMixturePrior::new(vec![0.7, 0.3], vec![1.0, 3.0], vec![1.0, 2.0]).unwrap();
        let p = CellPosterior::from_gamma_prior(&prior, 100_000, 40_000.0);
        assert!((p.mean() / 2.5 - 1.0f64).abs() < 0.01);
    }

    #[test]
    fn gamma_median_matches_inversion_oracle() {
        let p = single(4.0, 2.0);
        let med = p.quantile(0.5);
        let oracle = SGamma::new(4.0, 2.0).unwrap().inverse_cdf(0.5);
        assert_relative_eq!(med, oracle, max_relative = 1e-8);
        assert_relative_eq!(med, 1.8360, epsilon = 1e-3);
    }

    #[test]
    fn point_mass_summary_and_distance() {
        let p = CellPosterior::Discrete { support: vec![0.5, 2.0, 3.0], masses: vec![0.0, 1.0, 0.0] };
        for q in [0.05, 0.5, 0.95] {
            assert_eq!(p.quantile(q), 2.0);
        }
        for order in [WassersteinOrder::One, WassersteinOrder::Two] {
            assert_eq!(scaled_wasserstein(&p, 2.0, order, WassersteinMode::ClosedForm).unwrap(), 0.0);
        }
    }

    #[test]
    fn w2_moment_formula() {
        // Gamma(4, rate 2): mean 2, variance 1
        let d = scaled_wasserstein(&single(4.0, 2.0), 2.0, WassersteinOrder::Two, WassersteinMode::ClosedForm).unwrap();
        assert_relative_eq!(d, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn w1_closed_form_matches_quadrature() {
        let p = CellPosterior::GammaMixture { weights: vec![0.3, 0.7], shapes: vec![2.0, 9.0], rates: vec![1.5, 3.0] };
        let c = 1.7;
        let comps = [SGamma::new(2.0, 1.5).unwrap(), SGamma::new(9.0, 3.0).unwrap()];
        // E|X − c| = ∫_0^c F + ∫_c^∞ (1 − F), composite Simpson on each side of c
        let cdf = |x: f64| 0.3 * comps[0].cdf(x) + 0.7 * comps[1].cdf(x);
        let simpson = |f: &dyn Fn(f64) -> f64, a: f64, b: f64| {
            let n = 20_000;
            let h = (b - a) / n as f64;
            let mut s = f(a) + f(b);
            for i in 1..n {
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
            }
            s * h / 3.0
        };
        let integral = simpson(&cdf, 0.0, c) + simpson(&|x| 1.0 - cdf(x), c, 60.0);
        let d = scaled_wasserstein(&p, c, WassersteinOrder::One, WassersteinMode::ClosedForm).unwrap();
        assert_relative_eq!(d * c, integral, max_relative = 1e-6);
    }

    #[test]
    fn bias_bounds_rmse() {
        let p = CellPosterior::GammaMixture { weights: vec![0.4, 0.6], shapes: vec![3.0, 8.0], rates: vec![1.0, 2.0] };
        for lam in [0.5f64, 1.0, 3.0, 7.0] {
            let d = scaled_wasserstein(&p, lam, WassersteinOrder::Two, WassersteinMode::ClosedForm).unwrap();
            assert!(d >= (p.mean() - lam).abs() / lam - 1e-15);
        }
    }

    #[test]
    fn draws_reproducible_and_subset_consistent() {
        let t = ContingencyTable::from_counts(vec![vec![3, 0], vec![5, 40]]).unwrap();
        let e = ExpectedCounts::from_values(2, 2, NullMethod::Marginal, vec![1.0, 0.5, 4.0, 38.0]).unwrap();
        let fit = gamma_fit(GammaMixturePrior::new(vec![0.5, 0.5], vec![2.0, 0.7], vec![0.5, 3.0]).unwrap());
        let a = posterior_draws(&fit, &t, &e, 50, 7).unwrap();
        let b = posterior_draws(&fit, &t, &e, 50, 7).unwrap();
        assert_eq!(a, b);
        let sub = posterior_draws_for(&fit, &t, &e, &[(1, 0)], 50, 7).unwrap();
        assert_eq!(sub.cell(1, 0), a.cell(1, 0));
        assert_eq!(a.get(3, 1, 0), Some(a.cell(1, 0).unwrap()[3]));
        assert!(a.values.iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn detection_contract() {
        let t = ContingencyTable::from_counts(vec![vec![30, 0], vec![5, 400]]).unwrap();
        let e = ExpectedCounts::from_values(2, 2, NullMethod::Marginal, vec![3.0, 2.0, 30.0, 400.0]).unwrap();
        let fit = gamma_fit(GammaMixturePrior::new(vec![0.5, 0.5], vec![2.0, 5.0], vec![0.5, 1.0]).unwrap());
        let d = detect_signals(&fit, &t, &e, 1.001, 0.95).unwrap();
        assert!(d.is_detected(0, 0));
        assert!(!d.is_detected(0, 1));
        assert_eq!(d.count(), d.detected.iter().filter(|&&x| x).count());
        assert!(detect_signals(&fit, &t, &e, 1.0, 0.95).is_err());
        assert!(detect_signals(&fit, &t, &e, 1.5, 1.0).is_err());
    }

    #[test]
    fn summary_is_ordered() {
        let t = ContingencyTable::from_counts(vec![vec![30, 0], vec![5, 400]]).unwrap();
        let e = ExpectedCounts::from_values(2, 2, NullMethod::Marginal, vec![3.0, 2.0, 30.0, 400.0]).unwrap();
        let fit = gamma_fit(GammaMixturePrior::new(vec![0.5, 0.5], vec![2.0, 5.0], vec![0.5, 1.0]).unwrap());
        let s = posterior_summary(&fit, &t, &e, 0.9).unwrap();
        for c in 0..4 {
            assert!(s.lower[c] <= s.median[c] && s.median[c] <= s.upper[c]);
        }
    }
}
