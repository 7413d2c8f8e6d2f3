use ebsignal::simulation::{cell_probabilities, quantile_type7};
use ebsignal::{
    aggregate_metrics, aic_general_gamma, all_posteriors, bic_general_gamma, collapse_rows, detect_signals,
    estimate_null_expected_count, fit_general_gamma, generate_contin_table, posterior_draws, posterior_summary,
    scaled_wasserstein, zero_indicator_from_e, CellPosterior, ContingencyTable, EcmOptions, ExpectedCounts, NullMethod,
    SignalMatrix, WassersteinMode, WassersteinOrder, ZeroIndicator,
};
use proptest::prelude::*;

/// Tables with strictly positive reference row and column.
fn table_strategy() -> impl Strategy<Value = ContingencyTable> {
    (2usize..6, 2usize..5)
        .prop_flat_map(|(r, c)| proptest::collection::vec(0u64..60, r * c).prop_map(move |v| (r, c, v)))
        .prop_map(|(r, c, v)| {
            let counts = (0..r)
                .map(|i| {
                    (0..c)
                        .map(|j| {
                            let x = v[i * c + j];
                            if i == r - 1 || j == c - 1 {
                                x + 1
                            } else {
                                x
                            }
                        })
                        .collect()
                })
                .collect();
            ContingencyTable::from_counts(counts).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn marginal_expected_sums_to_grand_total(t in table_strategy()) {
        let e: ExpectedCounts<f64> = estimate_null_expected_count(&t, NullMethod::Marginal).unwrap();
        let s: f64 = e.values().iter().sum();
        prop_assert!((s - t.grand_total() as f64).abs() <= 1e-9 * t.grand_total() as f64);
    }

    #[test]
    fn subtable_ratio_is_odds_ratio(t in table_strategy()) {
        let e: ExpectedCounts<f64> = estimate_null_expected_count(&t, NullMethod::Subtable).unwrap();
        let (ri, cj) = (t.reference_row(), t.reference_col());
        for i in 0..t.n_rows() {
            for j in 0..t.n_cols() {
                let n = t.get(i, j) as f64;
                let or = n * t.get(ri, cj) as f64 / (t.get(ri, j) as f64 * t.get(i, cj) as f64);
                prop_assert!((n / e.get(i, j) - or).abs() <= 1e-12 * or.abs().max(1.0));
            }
        }
    }

    #[test]
    fn collapse_preserves_totals(t in table_strategy()) {
        prop_assume!(t.n_rows() >= 3);
        let keep = [t.ae_names()[0].as_str()];
        let c = collapse_rows(&t, &keep, "rest").unwrap();
        prop_assert_eq!(c.grand_total(), t.grand_total());
        for j in 0..t.n_cols() {
            prop_assert_eq!(c.col_total(j), t.col_total(j));
        }
    }

    #[test]
    fn generated_tables_keep_grand_total(t in table_strategy(), seed in any::<u64>(), lam in 1.0f64..5.0) {
        let s = SignalMatrix::homogeneous(t.n_rows(), t.n_cols(), &[(0, 0)], lam).unwrap();
        let z = ZeroIndicator::none(t.n_rows(), t.n_cols());
        let p = cell_probabilities(&t, &s, &z).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for g in generate_contin_table(&t, &s, &z, 3, seed).unwrap() {
            prop_assert_eq!(g.grand_total(), t.grand_total());
        }
    }

    #[test]
    fn zero_indicator_never_on_reference(t in table_strategy(), q in 0.0f64..0.95) {
        let e: ExpectedCounts<f64> = estimate_null_expected_count(&t, NullMethod::Marginal).unwrap();
        let z = zero_indicator_from_e(&e, q).unwrap();
        let thr = quantile_type7(e.values(), q);
        for i in 0..t.n_rows() {
            for j in 0..t.n_cols() {
                let expected = !t.is_reference_cell(i, j) && e.get(i, j) <= thr;
                prop_assert_eq!(z.is_zero(i, j), expected);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn general_gamma_fit_invariants(t in table_strategy(), alpha in 0.0f64..=1.0, seed in 0u64..1000) {
        let e: ExpectedCounts<f64> = estimate_null_expected_count(&t, NullMethod::Subtable).unwrap();
        let opts = EcmOptions { alpha, seed, max_iter: 500, ..EcmOptions::default() };
        let fit = fit_general_gamma(&t, &e, &opts).unwrap();
        let prior = fit.gamma_prior().unwrap();
        // retained weights form a simplex and K* counts them
        prop_assert!((prior.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(prior.weights.iter().all(|&w| w > 0.0));
        prop_assert_eq!(fit.k_star, prior.weights.len());
        // penalized objective never drops inside a segment
        let mut bounds = fit.segment_starts.clone();
        bounds.push(fit.objective_trace.len());
        for w in bounds.windows(2) {
            for v in fit.objective_trace[w[0]..w[1]].windows(2) {
                prop_assert!(v[1] >= v[0] - 1e-8 * v[0].abs());
            }
        }
        // BIC − AIC identity
        let aic = aic_general_gamma(&fit).unwrap();
        let bic = bic_general_gamma(&fit, t.n_cells()).unwrap();
        let expected = 3.0 * fit.k_star as f64 * ((t.n_cells() as f64).ln() - 2.0);
        prop_assert!(((bic - aic) - expected).abs() <= 1e-9 * expected.abs().max(1.0));
        // posterior responsibilities: per-cell weights sum to one
        for p in all_posteriors(&fit, &t, &e).unwrap() {
            if let CellPosterior::GammaMixture { weights, .. } = p {
                prop_assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
        // summaries are ordered, detection count matches the matrix
        let s = posterior_summary(&fit, &t, &e, 0.9).unwrap();
        for c in 0..t.n_cells() {
            prop_assert!(s.lower[c] <= s.median[c] && s.median[c] <= s.upper[c]);
        }
        let d = detect_signals(&fit, &t, &e, 1.001, 0.95).unwrap();
        prop_assert_eq!(d.count(), d.detected.iter().filter(|&&x| x).count());
        prop_assert!(d.tail_probability.iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn max_metric_dominates_average(t in table_strategy(), seed in any::<u64>()) {
        prop_assume!(t.n_rows() >= 3 && t.n_cols() >= 3);
        let e: ExpectedCounts<f64> = estimate_null_expected_count(&t, NullMethod::Subtable).unwrap();
        let fit = fit_general_gamma(&t, &e, &EcmOptions { max_iter: 200, ..EcmOptions::default() }).unwrap();
        let cells = [(0, 0), (1, 1), (0, 1)];
        let signal = SignalMatrix::homogeneous(t.n_rows(), t.n_cols(), &cells, 2.0).unwrap();
        let draws = vec![posterior_draws(&fit, &t, &e, 50, seed).unwrap(), posterior_draws(&fit, &t, &e, 50, seed ^ 1).unwrap()];
        for order in [WassersteinOrder::One, WassersteinOrder::Two] {
            let m = aggregate_metrics(&draws, &signal, &cells, order).unwrap();
            prop_assert!(m.max_scaled >= m.average_scaled);
        }
    }

    #[test]
    fn w2_dominates_w1(shape in 0.5f64..30.0, rate in 0.2f64..10.0, lam in 0.5f64..5.0) {
        let p = CellPosterior::GammaMixture { weights: vec![1.0], shapes: vec![shape], rates: vec![rate] };
        let w1 = scaled_wasserstein(&p, lam, WassersteinOrder::One, WassersteinMode::ClosedForm).unwrap();
        let w2 = scaled_wasserstein(&p, lam, WassersteinOrder::Two, WassersteinMode::ClosedForm).unwrap();
        prop_assert!(w2 >= w1 * (1.0 - 1e-9));
    }
}
