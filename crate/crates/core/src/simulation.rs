//! Multinomial table generator with structural zeros, replicate metrics, and
//! the α-policy comparison harness.

use std::fmt;
use std::path::PathBuf;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::FitResult;
use crate::gamma_mixture::{fit_general_gamma, EcmOptions};
use crate::posterior::{draw_distance, posterior_draws_for, PosteriorDraws, WassersteinOrder};
use crate::selection::{aic_general_gamma, bic_general_gamma, Criterion};
use crate::tables::{estimate_null_expected_count, ContingencyTable, ExpectedCounts, NullMethod};

/// True signal strengths `λ_ij`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub values: Vec<f64>,
}

impl SignalMatrix {
    pub fn new(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_rows * n_cols {
            return Err(Error::InvalidArgument(format!(
                "{} signal values for a {n_rows}x{n_cols} table",
                values.len()
            )));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument("signal strengths must be finite and non-negative".into()));
        }
        let m = Self { n_rows, n_cols, values };
        for i in 0..n_rows {
            for j in 0..n_cols {
                if (i == n_rows - 1 || j == n_cols - 1) && m.get(i, j) != 1.0 {
                    return Err(Error::InvalidArgument(format!(
                        "reference cell ({i}, {j}) must have signal strength 1"
                    )));
                }
            }
        }
        Ok(m)
    }

    /// All ones except `lambda` at the listed (0-based) cells.
    pub fn homogeneous(n_rows: usize, n_cols: usize, cells: &[(usize, usize)], lambda: f64) -> Result<Self> {
        let mut values = vec![1.0; n_rows * n_cols];
        for &(i, j) in cells {
            if i >= n_rows - 1 || j >= n_cols - 1 {
                return Err(Error::InvalidArgument(format!(
                    "signal cell ({i}, {j}) must lie off the reference row and column"
                )));
            }
            values[i * n_cols + j] = lambda;
        }
        Self::new(n_rows, n_cols, values)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols + j]
    }
}

/// How a zero pattern was produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ZeroOrigin {
    Bernoulli { omega: f64 },
    Quantile { q: f64 },
    Explicit,
}

/// Structural-zero positions, row-major; never set on the reference row or column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroIndicator {
    pub n_rows: usize,
    pub n_cols: usize,
    pub mask: Vec<bool>,
    pub origin: ZeroOrigin,
}

impl ZeroIndicator {
    pub fn none(n_rows: usize, n_cols: usize) -> Self {
        Self { n_rows, n_cols, mask: vec![false; n_rows * n_cols], origin: ZeroOrigin::Explicit }
    }

    pub fn explicit(n_rows: usize, n_cols: usize, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != n_rows * n_cols {
            return Err(Error::InvalidArgument("zero mask has the wrong size".into()));
        }
        let mut z = Self { n_rows, n_cols, mask, origin: ZeroOrigin::Explicit };
        z.mask_reference();
        Ok(z)
    }

    /// Independent `Bernoulli(omega)` zeros.
    pub fn bernoulli(n_rows: usize, n_cols: usize, omega: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&omega) {
            return Err(Error::InvalidArgument(format!("omega must lie in [0, 1], got {omega}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mask = (0..n_rows * n_cols).map(|_| (rng.next_u64() as f64 / u64::MAX as f64) < omega).collect();
        let mut z = Self { n_rows, n_cols, mask, origin: ZeroOrigin::Bernoulli { omega } };
        z.mask_reference();
        Ok(z)
    }

    fn mask_reference(&mut self) {
        for i in 0..self.n_rows {
            self.mask[i * self.n_cols + self.n_cols - 1] = false;
        }
        for j in 0..self.n_cols {
            self.mask[(self.n_rows - 1) * self.n_cols + j] = false;
        }
    }

    /// Clear the listed (0-based) cells.
    pub fn without_cells(mut self, cells: &[(usize, usize)]) -> Self {
        for &(i, j) in cells {
            self.mask[i * self.n_cols + j] = false;
        }
        self
    }

    pub fn is_zero(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.n_cols + j]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&z| z).count()
    }
}

/// Type-7 empirical quantile of `values` at `q`.
pub fn quantile_type7(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    if lo + 1 < v.len() {
        v[lo] + (h - lo as f64) * (v[lo + 1] - v[lo])
    } else {
        v[v.len() - 1]
    }
}

/// Zeros wherever `E_ij` is at or below the `q`-th quantile of all entries.
pub fn zero_indicator_from_e(e: &ExpectedCounts<f64>, q: f64) -> Result<ZeroIndicator> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!("quantile level must lie in [0, 1), got {q}")));
    }
    let thr = quantile_type7(e.values(), q);
    let mut z = ZeroIndicator {
        n_rows: e.n_rows(),
        n_cols: e.n_cols(),
        mask: e.values().iter().map(|&v| v <= thr).collect(),
        origin: ZeroOrigin::Quantile { q },
    };
    z.mask_reference();
    Ok(z)
}

/// `p_ij ∝ (1 − z_ij) λ_ij p_i* p_j*` from the reference table margins.
pub fn cell_probabilities(
    reference: &ContingencyTable,
    signal: &SignalMatrix,
    zeros: &ZeroIndicator,
) -> Result<Vec<f64>> {
    let (n_rows, n_cols) = (reference.n_rows(), reference.n_cols());
    if (signal.n_rows, signal.n_cols) != (n_rows, n_cols) || (zeros.n_rows, zeros.n_cols) != (n_rows, n_cols) {
        return Err(Error::InvalidArgument("signal, zeros and reference table shapes differ".into()));
    }
    let total = reference.grand_total() as f64;
    if total == 0.0 {
        return Err(Error::InvalidTable("reference table is empty".into()));
    }
    let mut p = Vec::with_capacity(n_rows * n_cols);
    for i in 0..n_rows {
        let pi = reference.row_total(i) as f64 / total;
        for j in 0..n_cols {
            let pj = reference.col_total(j) as f64 / total;
            let z = if zeros.is_zero(i, j) { 0.0 } else { 1.0 };
            p.push(z * signal.get(i, j) * pi * pj);
        }
    }
    let s: f64 = p.iter().sum();
    if !(s > 0.0) {
        return Err(Error::InvalidArgument("every cell probability is zero".into()));
    }
    p.iter_mut().for_each(|v| *v /= s);
    Ok(p)
}

/// Multinomial draw by sequential conditional binomials.
fn multinomial(rng: &mut ChaCha8Rng, n: u64, p: &[f64]) -> Vec<u64> {
    let mut remaining_n = n;
    let mut remaining_p = 1.0;
    let mut out = vec![0; p.len()];
    for (k, &pk) in p.iter().enumerate() {
        if remaining_n == 0 {
            break;
        }
        if pk <= 0.0 {
            continue;
        }
        let cond = (pk / remaining_p).clamp(0.0, 1.0);
        let x = if cond >= 1.0 {
            remaining_n
        } else {
            Binomial::new(remaining_n, cond).expect("valid binomial").sample(rng)
        };
        out[k] = x;
        remaining_n -= x;
        remaining_p -= pk;
    }
    if remaining_n > 0 {
        // rounding left counts unassigned; give them to the last positive cell
        if let Some(k) = p.iter().rposition(|&v| v > 0.0) {
            out[k] += remaining_n;
        }
    }
    out
}

/// `n_tables` independent multinomial tables with the reference grand total.
///
/// Table `t` uses its own ChaCha8 stream keyed by `(seed, t)`.
pub fn generate_contin_table(
    reference: &ContingencyTable,
    signal: &SignalMatrix,
    zeros: &ZeroIndicator,
    n_tables: usize,
    seed: u64,
) -> Result<Vec<ContingencyTable>> {
    let p = cell_probabilities(reference, signal, zeros)?;
    let n = reference.grand_total();
    (0..n_tables)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let counts = multinomial(&mut rng, n, &p);
            ContingencyTable::from_flat(counts, reference.ae_names().to_vec(), reference.drug_names().to_vec())
        })
        .map(Ok)
        .collect()
}

/// Replicate-averaged scaled Wasserstein metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub average_scaled: f64,
    pub max_scaled: f64,
}

/// Per replicate: the scaled distance of each signal cell's draws to its true
/// `λ`, then the mean and max over cells; both are averaged over replicates.
pub fn aggregate_metrics(
    draws_per_replicate: &[PosteriorDraws],
    signal: &SignalMatrix,
    signal_cells: &[(usize, usize)],
    order: WassersteinOrder,
) -> Result<Metrics> {
    if signal_cells.is_empty() {
        return Err(Error::InvalidArgument("no signal cells given".into()));
    }
    if draws_per_replicate.is_empty() {
        return Err(Error::InvalidArgument("no replicates given".into()));
    }
    if let Some(&(i, j)) = signal_cells.iter().find(|&&(i, j)| !(signal.get(i, j) > 1.0)) {
        return Err(Error::InvalidArgument(format!("cell ({i}, {j}) is not a signal cell")));
    }
    let (mut avg, mut max) = (0.0, 0.0);
    for d in draws_per_replicate {
        let mut dists = Vec::with_capacity(signal_cells.len());
        for &(i, j) in signal_cells {
            let x = d
                .cell(i, j)
                .ok_or_else(|| Error::InvalidArgument(format!("replicate lacks draws for cell ({i}, {j})")))?;
            dists.push(draw_distance(x, signal.get(i, j), order));
        }
        avg += dists.iter().sum::<f64>() / dists.len() as f64;
        max += dists.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    }
    let r = draws_per_replicate.len() as f64;
    Ok(Metrics { average_scaled: avg / r, max_scaled: max / r })
}

/// How the Dirichlet hyperparameter is chosen for each replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Policy {
    Fixed(f64),
    Aic,
    Bic,
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::Fixed(a) => write!(f, "fix_{a}"),
            Policy::Aic => f.write_str("AIC"),
            Policy::Bic => f.write_str("BIC"),
        }
    }
}

impl TryFrom<String> for Policy {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        match s.as_str() {
            "AIC" => Ok(Policy::Aic),
            "BIC" => Ok(Policy::Bic),
            _ => {
                let a: f64 = s
                    .strip_prefix("fix_")
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| format!("unknown policy {s:?}; expected fix_<alpha>, AIC or BIC"))?;
                if !(0.0..=1.0).contains(&a) {
                    return Err(format!("policy alpha {a} outside [0, 1]"));
                }
                Ok(Policy::Fixed(a))
            }
        }
    }
}

impl From<Policy> for String {
    fn from(p: Policy) -> String {
        p.to_string()
    }
}

/// Zero-inflation level; `q = None` means no structural zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZiLevel {
    pub name: String,
    #[serde(default)]
    pub q: Option<f64>,
}

fn default_alpha_grid() -> Vec<f64> {
    vec![0.0, 0.3, 0.5, 0.7, 0.9]
}
fn default_n_sim() -> usize {
    50
}
fn default_n_draws() -> usize {
    10_000
}
fn default_policies() -> Vec<Policy> {
    vec![Policy::Fixed(0.0), Policy::Fixed(0.5), Policy::Fixed(0.9), Policy::Aic, Policy::Bic]
}
fn default_orders() -> Vec<WassersteinOrder> {
    vec![WassersteinOrder::Two]
}
fn default_tol() -> f64 {
    1e-8
}
fn default_max_iter() -> usize {
    5000
}

/// Simulation study settings. Signal cells are 1-based `[row, column]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    /// Reference table CSV, resolved against the config file's directory.
    pub reference_table: PathBuf,
    pub signal_cells: Vec<[usize; 2]>,
    pub lambdas: Vec<f64>,
    pub zero_inflation: Vec<ZiLevel>,
    #[serde(default = "default_n_sim")]
    pub n_sim: usize,
    pub seed: u64,
    #[serde(default = "default_policies")]
    pub policies: Vec<Policy>,
    /// Grid searched by the AIC and BIC policies.
    #[serde(default = "default_alpha_grid")]
    pub alpha_grid: Vec<f64>,
    #[serde(default = "default_n_draws")]
    pub n_draws: usize,
    #[serde(default = "default_orders")]
    pub orders: Vec<WassersteinOrder>,
    #[serde(default)]
    pub null_method: NullMethod,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub n_components: Option<usize>,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.signal_cells.is_empty() {
            return bad("signal_cells is empty");
        }
        if self.signal_cells.iter().any(|c| c[0] == 0 || c[1] == 0) {
            return bad("signal_cells are 1-based");
        }
        if self.lambdas.is_empty() || self.lambdas.iter().any(|&l| !(l > 1.0)) {
            return bad("lambdas must be non-empty and each greater than 1");
        }
        if self.zero_inflation.is_empty() {
            return bad("zero_inflation is empty");
        }
        if self.n_sim == 0 || self.n_draws == 0 {
            return bad("n_sim and n_draws must be positive");
        }
        if self.policies.is_empty() || self.orders.is_empty() {
            return bad("policies and orders must be non-empty");
        }
        if self.alpha_grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return bad("alpha_grid entries must lie in [0, 1]");
        }
        let tuned = self.policies.iter().any(|p| !matches!(p, Policy::Fixed(_)));
        if tuned && self.alpha_grid.is_empty() {
            return bad("AIC/BIC policies need a non-empty alpha_grid");
        }
        Ok(())
    }

    fn cells0(&self) -> Vec<(usize, usize)> {
        self.signal_cells.iter().map(|c| (c[0] - 1, c[1] - 1)).collect()
    }
}

/// One line of the tidy results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub policy: Policy,
    pub zi: String,
    pub lambda: f64,
    pub metric: String,
    pub value: f64,
}

/// Draws kept for one (policy, zi, λ) configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredDraws {
    pub policy: Policy,
    pub zi: String,
    pub lambda: f64,
    pub replicates: Vec<PosteriorDraws>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub rows: Vec<MetricRow>,
    pub draws: Vec<StoredDraws>,
    /// Fits that hit `max_iter`; they are still used.
    pub nonconverged_fits: usize,
}

/// Tidy CSV: `policy,zi,lambda,metric,value`.
pub fn metrics_to_csv(rows: &[MetricRow]) -> String {
    let mut out = String::from("policy,zi,lambda,metric,value\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{},{}\n", r.policy, r.zi, r.lambda, r.metric, r.value));
    }
    out
}

fn derived_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

fn order_tag(o: WassersteinOrder) -> &'static str {
    match o {
        WassersteinOrder::One => "w1",
        WassersteinOrder::Two => "w2",
    }
}

/// Run every (zero-inflation, λ) configuration for `n_sim` replicates.
///
/// Each replicate table is fitted once per distinct α needed by the policies;
/// the AIC and BIC policies pick from the `alpha_grid` fits (converged fits
/// preferred). Structural zeros are drawn from the reference table's expected
/// counts and never placed on signal cells.
pub fn run_simulation(
    config: &SimulationConfig,
    reference: &ContingencyTable,
    keep_draws: bool,
) -> Result<SimulationOutput> {
    config.validate()?;
    let cells = config.cells0();
    let (n_rows, n_cols) = (reference.n_rows(), reference.n_cols());
    if let Some(&(i, j)) = cells.iter().find(|&&(i, j)| i + 1 >= n_rows || j + 1 >= n_cols) {
        return Err(Error::InvalidArgument(format!(
            "signal cell [{}, {}] is on or beyond the reference row/column",
            i + 1,
            j + 1
        )));
    }
    let ref_e: ExpectedCounts<f64> = estimate_null_expected_count(reference, config.null_method)?;

    // distinct α values to fit per replicate
    let mut alphas: Vec<f64> = Vec::new();
    let mut add = |a: f64| {
        if !alphas.contains(&a) {
            alphas.push(a);
        }
    };
    for p in &config.policies {
        match p {
            Policy::Fixed(a) => add(*a),
            _ => config.alpha_grid.iter().for_each(|&a| add(a)),
        }
    }

    let mut rows = Vec::new();
    let mut stored = Vec::new();
    let mut nonconverged = 0;
    for (zi_idx, zi) in config.zero_inflation.iter().enumerate() {
        let zeros = match zi.q {
            None => ZeroIndicator::none(n_rows, n_cols),
            Some(q) => zero_indicator_from_e(&ref_e, q)?.without_cells(&cells),
        };
        for (lam_idx, &lambda) in config.lambdas.iter().enumerate() {
            let signal = SignalMatrix::homogeneous(n_rows, n_cols, &cells, lambda)?;
            let cfg_seed = derived_seed(config.seed, ((zi_idx as u64) << 32) | lam_idx as u64);
            let tables = generate_contin_table(reference, &signal, &zeros, config.n_sim, cfg_seed)?;
            let mut per_policy: Vec<Vec<PosteriorDraws>> = vec![Vec::new(); config.policies.len()];
            for (rep, table) in tables.iter().enumerate() {
                let e: ExpectedCounts<f64> = estimate_null_expected_count(table, config.null_method)?;
                let fit_seed = derived_seed(cfg_seed, rep as u64);
                let mut fits: Vec<(f64, FitResult<f64>)> = Vec::with_capacity(alphas.len());
                for &alpha in &alphas {
                    let opts = EcmOptions {
                        alpha,
                        n_components: config.n_components,
                        tol: config.tol,
                        max_iter: config.max_iter,
                        seed: fit_seed,
                        ..EcmOptions::default()
                    };
                    let fit = fit_general_gamma(table, &e, &opts)?;
                    if !fit.converged {
                        nonconverged += 1;
                    }
                    fits.push((alpha, fit));
                }
                let draw_seed = derived_seed(fit_seed, u64::MAX);
                for (pi, policy) in config.policies.iter().enumerate() {
                    let fit = match policy {
                        Policy::Fixed(a) => &fits.iter().find(|(b, _)| b == a).unwrap().1,
                        Policy::Aic => select(&fits, &config.alpha_grid, Criterion::Aic, table.n_cells())?,
                        Policy::Bic => select(&fits, &config.alpha_grid, Criterion::Bic, table.n_cells())?,
                    };
                    per_policy[pi].push(posterior_draws_for(fit, table, &e, &cells, config.n_draws, draw_seed)?);
                }
            }
            for (pi, policy) in config.policies.iter().enumerate() {
                for &order in &config.orders {
                    let m = aggregate_metrics(&per_policy[pi], &signal, &cells, order)?;
                    for (name, value) in [("average_scaled", m.average_scaled), ("max_scaled", m.max_scaled)] {
                        rows.push(MetricRow {
                            policy: *policy,
                            zi: zi.name.clone(),
                            lambda,
                            metric: format!("{name}_{}", order_tag(order)),
                            value,
                        });
                    }
                }
            }
            if keep_draws {
                for (pi, policy) in config.policies.iter().enumerate() {
                    stored.push(StoredDraws {
                        policy: *policy,
                        zi: zi.name.clone(),
                        lambda,
                        replicates: std::mem::take(&mut per_policy[pi]),
                    });
                }
            }
        }
    }
    Ok(SimulationOutput { rows, draws: stored, nonconverged_fits: nonconverged })
}

fn select<'a>(
    fits: &'a [(f64, FitResult<f64>)],
    grid: &[f64],
    criterion: Criterion,
    n_cells: usize,
) -> Result<&'a FitResult<f64>> {
    let score = |f: &FitResult<f64>| match criterion {
        Criterion::Aic => aic_general_gamma(f),
        Criterion::Bic => bic_general_gamma(f, n_cells),
    };
    let candidates: Vec<&FitResult<f64>> = fits.iter().filter(|(a, _)| grid.contains(a)).map(|(_, f)| f).collect();
    let pool: Vec<&FitResult<f64>> = if candidates.iter().any(|f| f.converged) {
        candidates.into_iter().filter(|f| f.converged).collect()
    } else {
        candidates
    };
    let mut best: Option<(&FitResult<f64>, f64)> = None;
    for f in pool {
        let s = score(f)?;
        if best.is_none_or(|(_, b)| s < b) {
            best = Some((f, s));
        }
    }
    best.map(|(f, _)| f).ok_or_else(|| Error::InvalidArgument("empty alpha grid".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tables::NullMethod;
    use approx::assert_relative_eq;

    fn reference() -> ContingencyTable {
        ContingencyTable::from_counts(vec![vec![10, 10], vec![10, 10]]).unwrap()
    }

    #[test]
    fn hand_normalized_probabilities() {
        let s = SignalMatrix::homogeneous(2, 2, &[(0, 0)], 2.0).unwrap();
        let p = cell_probabilities(&reference(), &s, &ZeroIndicator::none(2, 2)).unwrap();
        for (got, want) in p.iter().zip([0.4, 0.2, 0.2, 0.2]) {
            assert_relative_eq!(*got, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_cells_stay_zero_and_totals_hold() {
        let r = ContingencyTable::from_counts(vec![vec![5, 8, 30], vec![2, 9, 40], vec![50, 60, 900]]).unwrap();
        let s = SignalMatrix::homogeneous(3, 3, &[], 2.0).unwrap();
        let z =
            ZeroIndicator::explicit(3, 3, vec![true, false, true, false, false, false, true, false, false]).unwrap();
        assert_eq!(z.count(), 1);
        let tables = generate_contin_table(&r, &s, &z, 200, 4).unwrap();
        for t in &tables {
            assert_eq!(t.get(0, 0), 0);
            assert_eq!(t.grand_total(), r.grand_total());
        }
        assert_eq!(tables, generate_contin_table(&r, &s, &z, 200, 4).unwrap());
    }

    #[test]
    fn quantile_zeros_count() {
        let vals: Vec<f64> = (1..=16).map(|v| v as f64 * 1.5).collect();
        let e = ExpectedCounts::from_values(4, 4, NullMethod::Marginal, vals.clone()).unwrap();
        let thr = quantile_type7(&vals, 0.25);
        assert_eq!(vals.iter().filter(|&&v| v <= thr).count(), 4);
        let z = zero_indicator_from_e(&e, 0.25).unwrap();
        // the four smallest sit in row 0, which keeps three after masking column 3
        assert_eq!(z.count(), 3);
        let z0 = zero_indicator_from_e(&e, 0.0).unwrap();
        assert_eq!(z0.count(), 1);
        assert!(zero_indicator_from_e(&e, 1.0).is_err());
    }

    #[test]
    fn signal_matrix_contract() {
        assert!(SignalMatrix::homogeneous(3, 3, &[(2, 0)], 2.0).is_err());
        assert!(SignalMatrix::new(2, 2, vec![1.0, 2.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn policy_names_round_trip() {
        for s in ["fix_0", "fix_0.5", "AIC", "BIC"] {
            let p = Policy::try_from(s.to_string()).unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert!(Policy::try_from("fix_2".to_string()).is_err());
    }

    #[test]
    fn point_mass_metrics_vanish() {
        let s = SignalMatrix::homogeneous(3, 3, &[(0, 0), (1, 1)], 2.5).unwrap();
        let d = PosteriorDraws {
            model: crate::fit::ModelKind::GeneralGamma,
            seed: 0,
            n_draws: 3,
            n_rows: 3,
            n_cols: 3,
            cells: vec![0, 4],
            values: vec![2.5; 6],
        };
        let m = aggregate_metrics(&[d.clone(), d], &s, &[(0, 0), (1, 1)], WassersteinOrder::Two).unwrap();
        assert_eq!(m, Metrics { average_scaled: 0.0, max_scaled: 0.0 });
        assert!(aggregate_metrics(&[], &s, &[(0, 0)], WassersteinOrder::Two).is_err());
    }
}
