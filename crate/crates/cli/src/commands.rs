use std::fmt::Write as _;
use std::path::Path;

use ebsignal::simulation::metrics_to_csv;
use ebsignal::{
    all_posteriors, detect_signals, efron_fit, estimate_null_expected_count, fit_general_gamma, fit_gps, fit_k_gamma,
    generate_contin_table, km_fit, load_table, make_support, posterior_summary, run_simulation, tune_efron,
    tune_general_gamma, ContingencyTable, Criterion, EcmOptions64, EfronOptions, Error, ExpectedCounts64, FitResult64,
    KmOptions, LabelGeometry, LoadOptions, NullMethod, PlotData, Selection, SignalMatrix, SimulationConfig,
    SupportScale, ZeroIndicator,
};

use crate::fitfile::FitFile;
use crate::output::{csv_field, g6, write_atomic, write_json};
use crate::{
    CliError, CriterionArg, DetectArgs, EcmArgs, FitArgs, GenerateArgs, ModelArg, NullArg, PlotArgs, PlotKind,
    ScaleArg, SimulateArgs, SummarizeArgs, SupportArgs, TableArgs, TuneArgs, TuneModelArg,
};

type CliResult = Result<(), CliError>;

const KM_SUPPORT: usize = 100;
const EFRON_SUPPORT: usize = 120;
const DEFAULT_ALPHAS: [f64; 6] = [0.0, 0.1, 0.3, 0.5, 0.7, 0.9];
const DEFAULT_P_GRID: [usize; 5] = [40, 60, 80, 100, 120];
const DEFAULT_C0_GRID: [f64; 5] = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1];

fn load(args: &TableArgs) -> Result<(ContingencyTable, ExpectedCounts64), CliError> {
    let opts = LoadOptions { reference_row: args.reference_ae.clone(), reference_col: args.reference_drug.clone() };
    let table = load_table(&args.table, &opts).map_err(|e| match e {
        Error::InvalidArgument(m) => CliError::usage(m),
        e => CliError::data(format!("{}: {e}", args.table.display())),
    })?;
    let method = match args.null_method {
        NullArg::Subtable => NullMethod::Subtable,
        NullArg::Marginal => NullMethod::Marginal,
    };
    let e = match estimate_null_expected_count(&table, method) {
        Err(err @ Error::ZeroMargin { .. }) if args.fallback_marginal && method == NullMethod::Subtable => {
            eprintln!("warning: {err}; falling back to the marginal estimator");
            estimate_null_expected_count(&table, NullMethod::Marginal)?
        }
        r => r?,
    };
    Ok((table, e))
}

fn support_for(
    table: &ContingencyTable,
    e: &ExpectedCounts64,
    s: &SupportArgs,
    default_size: usize,
) -> Result<Vec<f64>, CliError> {
    let scale = match s.support_scale {
        Some(ScaleArg::Linear) => SupportScale::Linear,
        _ => SupportScale::Log,
    };
    Ok(make_support(table, e, s.support_size.unwrap_or(default_size), scale)?)
}

fn ecm_options(ecm: &EcmArgs, seed: u64) -> EcmOptions64 {
    let d = EcmOptions64::default();
    EcmOptions64 {
        tol: ecm.tol.unwrap_or(d.tol),
        max_iter: ecm.max_iter.unwrap_or(d.max_iter),
        n_components: ecm.n_components,
        seed,
        ..d
    }
}

fn reject(present: bool, flag: &str, model: &str) -> CliResult {
    if present {
        Err(CliError::usage(format!("{flag} does not apply to model {model}")))
    } else {
        Ok(())
    }
}

fn check_fit_args(a: &FitArgs) -> CliResult {
    let name = a.model.to_possible_value_name();
    let m = a.model;
    reject(a.alpha.is_some() && m != ModelArg::GeneralGamma, "--alpha", &name)?;
    reject(a.ecm.n_components.is_some() && m != ModelArg::GeneralGamma, "--n-components", &name)?;
    reject(a.k.is_some() && m != ModelArg::KGamma, "--k", &name)?;
    reject((a.p.is_some() || a.c0.is_some()) && m != ModelArg::Efron, "--p/--c0", &name)?;
    let discrete = matches!(m, ModelArg::Km | ModelArg::Efron);
    reject(
        (a.support.support_size.is_some() || a.support.support_scale.is_some()) && !discrete,
        "--support-size/--support-scale",
        &name,
    )?;
    reject(a.ecm.tol.is_some() && m == ModelArg::Efron, "--tol", &name)?;
    match m {
        ModelArg::GeneralGamma if a.alpha.is_none() => Err(CliError::usage("general-gamma needs --alpha")),
        ModelArg::KGamma if a.k.is_none() => Err(CliError::usage("K-gamma needs --k")),
        ModelArg::Efron if a.p.is_none() || a.c0.is_none() => Err(CliError::usage("efron needs --p and --c0")),
        _ => Ok(()),
    }
}

trait PossibleName {
    fn to_possible_value_name(&self) -> String;
}

impl<T: clap::ValueEnum> PossibleName for T {
    fn to_possible_value_name(&self) -> String {
        self.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
    }
}

fn report_fit(f: &FitFile) -> String {
    let fit = &f.fit;
    let mut s = String::new();
    let _ = writeln!(s, "model: {}", fit.model);
    let _ = writeln!(s, "converged: {} ({} iterations)", fit.converged, fit.iterations);
    let _ = writeln!(s, "log marginal likelihood: {}", g6(fit.log_marginal_likelihood));
    let _ = writeln!(s, "K*: {}", fit.k_star);
    if let Some(a) = fit.alpha {
        let _ = writeln!(s, "alpha: {}", g6(a));
    }
    if let Some(a) = f.aic {
        let _ = writeln!(s, "AIC: {}", g6(a));
    }
    if let Some(b) = f.bic {
        let _ = writeln!(s, "BIC: {}", g6(b));
    }
    if let Some(t) = f.fit.diagnostics.trace_f {
        let _ = writeln!(s, "trace(F): {}", g6(t));
    }
    if let Some(k) = f.fit.diagnostics.kkt_max {
        let _ = writeln!(s, "KKT max: {}", g6(k));
    }
    s
}

fn finish_fit(f: &FitFile, path: &Path) -> CliResult {
    f.save(path)?;
    print!("{}", report_fit(f));
    if f.fit.converged {
        Ok(())
    } else {
        Err(CliError::nonconvergence(format!(
            "fit did not converge in {} iterations (written to {})",
            f.fit.iterations,
            path.display()
        )))
    }
}

pub fn fit(a: FitArgs) -> CliResult {
    check_fit_args(&a)?;
    let (table, e) = load(&a.table)?;
    let opts = ecm_options(&a.ecm, a.seed);
    let fit: FitResult64 = match a.model {
        ModelArg::Gps => fit_gps(&table, &e, opts.tol, opts.max_iter, a.seed)?,
        ModelArg::KGamma => fit_k_gamma(&table, &e, a.k.unwrap(), opts.tol, opts.max_iter, a.seed)?,
        ModelArg::GeneralGamma => fit_general_gamma(&table, &e, &EcmOptions64 { alpha: a.alpha.unwrap(), ..opts })?,
        ModelArg::Km => {
            let support = support_for(&table, &e, &a.support, KM_SUPPORT)?;
            let d = KmOptions::default();
            let ko = KmOptions { tol: a.ecm.tol.unwrap_or(d.tol), max_iter: a.ecm.max_iter.unwrap_or(d.max_iter), ..d };
            km_fit(&table, &e, &support, &ko)?
        }
        ModelArg::Efron => {
            let support = support_for(&table, &e, &a.support, EFRON_SUPPORT)?;
            let d = EfronOptions::default();
            let eo = EfronOptions { max_iter: a.ecm.max_iter.unwrap_or(d.max_iter), ..d };
            efron_fit(&table, &e, a.p.unwrap(), a.c0.unwrap(), &support, &eo)?
        }
    };
    finish_fit(&FitFile::new(table, e, fit), &a.output)
}

pub fn tune(a: TuneArgs) -> CliResult {
    let criterion = match a.criterion {
        CriterionArg::Aic => Criterion::Aic,
        CriterionArg::Bic => Criterion::Bic,
    };
    let tuned = match a.model {
        TuneModelArg::GeneralGamma => {
            reject(a.p_grid.is_some() || a.c0_grid.is_some(), "--p-grid/--c0-grid", "general-gamma")?;
            reject(
                a.support.support_size.is_some() || a.support.support_scale.is_some(),
                "--support-size/--support-scale",
                "general-gamma",
            )?;
            let (table, e) = load(&a.table)?;
            let alphas = a.alphas.clone().unwrap_or_else(|| DEFAULT_ALPHAS.to_vec());
            let t = tune_general_gamma(&table, &e, &alphas, criterion, &ecm_options(&a.ecm, a.seed))?;
            (t, table, e)
        }
        TuneModelArg::Efron => {
            reject(a.alphas.is_some(), "--alphas", "efron")?;
            reject(a.ecm.n_components.is_some() || a.ecm.tol.is_some(), "--n-components/--tol", "efron")?;
            if criterion != Criterion::Aic {
                return Err(CliError::usage("efron tuning supports --criterion AIC only"));
            }
            let (table, e) = load(&a.table)?;
            let support = support_for(&table, &e, &a.support, EFRON_SUPPORT)?;
            let p_grid = a.p_grid.clone().unwrap_or_else(|| DEFAULT_P_GRID.to_vec());
            let c0_grid = a.c0_grid.clone().unwrap_or_else(|| DEFAULT_C0_GRID.to_vec());
            let d = EfronOptions::default();
            let eo = EfronOptions { max_iter: a.ecm.max_iter.unwrap_or(d.max_iter), ..d };
            let t = tune_efron(&table, &e, &support, &p_grid, &c0_grid, criterion, &eo)?;
            (t, table, e)
        }
    };
    let (tuned, table, e) = tuned;
    print!("{}", tuned.report.to_table());
    if let Some(path) = &a.report {
        write_atomic(path, tuned.report.to_csv().as_bytes())?;
    }
    let row = &tuned.report.rows[tuned.best_index];
    let choice = match (row.alpha, row.p, row.c0) {
        (Some(al), _, _) => format!("alpha = {}", g6(al)),
        (_, Some(p), Some(c0)) => format!("p = {p}, c0 = {}", g6(c0)),
        _ => String::new(),
    };
    println!("selected by {}: {choice}", a.criterion.to_possible_value_name());
    let mut f = FitFile::new(table, e, tuned.best);
    f.tuning = Some(tuned.report);
    f.save(&a.output)?;
    Ok(())
}

fn check_rule(cutoff: f64, prob: f64) -> CliResult {
    if !(cutoff > 1.0 && cutoff.is_finite()) {
        return Err(CliError::usage(format!("--cutoff must be greater than 1, got {cutoff}")));
    }
    if !(prob > 0.0 && prob < 1.0) {
        return Err(CliError::usage(format!("--prob must lie in (0, 1), got {prob}")));
    }
    Ok(())
}

pub fn detect(a: DetectArgs) -> CliResult {
    check_rule(a.cutoff, a.prob)?;
    let f = FitFile::load(&a.fit)?;
    let det = detect_signals(&f.fit, &f.table, &f.expected, a.cutoff, a.prob)?;
    let t = &f.table;
    let mut out = String::from("AE");
    for d in t.drug_names() {
        out.push(',');
        out.push_str(&csv_field(d));
    }
    out.push('\n');
    for (i, name) in t.ae_names().iter().enumerate() {
        out.push_str(&csv_field(name));
        for j in 0..t.n_cols() {
            out.push_str(if det.is_detected(i, j) { ",1" } else { ",0" });
        }
        out.push('\n');
    }
    write_atomic(&a.output, out.as_bytes())?;
    println!("{}", det.count());
    Ok(())
}

pub fn summarize(a: SummarizeArgs) -> CliResult {
    if !(a.level > 0.0 && a.level < 1.0) {
        return Err(CliError::usage(format!("--level must lie in (0, 1), got {}", a.level)));
    }
    check_rule(a.cutoff, 0.5)?;
    let f = FitFile::load(&a.fit)?;
    print!("{}", report_fit(&f));
    if let Some(path) = &a.output {
        let (t, e) = (&f.table, &f.expected);
        let summary = posterior_summary(&f.fit, t, e, a.level)?;
        let post = all_posteriors(&f.fit, t, e)?;
        let det = detect_signals(&f.fit, t, e, a.cutoff, 0.5)?;
        let mut out = String::from("ae,drug,N,E,mean,median,lower,upper,prob_signal\n");
        for i in 0..t.n_rows() {
            for j in 0..t.n_cols() {
                let c = i * t.n_cols() + j;
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    csv_field(&t.ae_names()[i]),
                    csv_field(&t.drug_names()[j]),
                    t.get(i, j),
                    g6(e.get(i, j)),
                    g6(post[c].mean()),
                    g6(summary.median[c]),
                    g6(summary.lower[c]),
                    g6(summary.upper[c]),
                    g6(det.tail_probability[c]),
                );
            }
        }
        write_atomic(path, out.as_bytes())?;
    }
    Ok(())
}

pub fn plot_data(a: PlotArgs) -> CliResult {
    check_rule(a.cutoff, a.prob)?;
    let f = FitFile::load(&a.fit)?;
    let sel = Selection {
        num_top_aes: a.num_top_aes,
        ae_names: (!a.ae_names.is_empty()).then(|| a.ae_names.clone()),
        drug_names: (!a.drug_names.is_empty()).then(|| a.drug_names.clone()),
        cutoff: a.cutoff,
        prob: a.prob,
    };
    let (data, warnings): (PlotData, Vec<String>) = match a.kind {
        PlotKind::Heatmap => ebsignal::heatmap(&f.fit, &f.table, &f.expected, &sel)?,
        PlotKind::Eyeplot => {
            let labels =
                LabelGeometry { text_shift: a.text_shift, text_size: a.text_size, x_lim_scalar: a.x_lim_scalar };
            ebsignal::eyeplot(&f.fit, &f.table, &f.expected, &sel, a.n_threshold, a.log_scale, a.level, labels)?
        }
    };
    for w in warnings {
        eprintln!("warning: {w}");
    }
    write_json(&a.output, &data)?;
    if let Some(svg) = &a.svg {
        write_atomic(svg, ebsignal::render_svg(&data).as_bytes())?;
    }
    Ok(())
}

pub fn simulate(a: SimulateArgs) -> CliResult {
    let text =
        std::fs::read_to_string(&a.config).map_err(|e| CliError::data(format!("{}: {e}", a.config.display())))?;
    let mut config: SimulationConfig =
        serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", a.config.display())))?;
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if let Some(n) = a.n_sim {
        config.n_sim = n;
    }
    let base = a.config.parent().unwrap_or(Path::new("."));
    let ref_path = base.join(&config.reference_table);
    let reference = load_table(&ref_path, &LoadOptions::default())
        .map_err(|e| CliError::data(format!("{}: {e}", ref_path.display())))?;
    let out = run_simulation(&config, &reference, false)?;
    write_atomic(&a.output.join("metrics.csv"), metrics_to_csv(&out.rows).as_bytes())?;
    let run = serde_json::json!({
        "config": config,
        "reference_digest": reference.digest(),
        "nonconverged_fits": out.nonconverged_fits,
    });
    write_json(&a.output.join("run.json"), &run)?;
    println!("policy,zi,lambda,metric,value");
    for r in &out.rows {
        println!("{},{},{},{},{}", r.policy, r.zi, g6(r.lambda), r.metric, g6(r.value));
    }
    if out.nonconverged_fits > 0 {
        eprintln!("warning: {} fits hit max_iter", out.nonconverged_fits);
    }
    Ok(())
}

fn parse_cell(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::usage(format!("--signal-cell expects \"row,col\" (1-based), got {s:?}"));
    let (r, c) = s.split_once(',').ok_or_else(bad)?;
    let r: usize = r.trim().parse().map_err(|_| bad())?;
    let c: usize = c.trim().parse().map_err(|_| bad())?;
    if r == 0 || c == 0 {
        return Err(bad());
    }
    Ok((r - 1, c - 1))
}

pub fn generate(a: GenerateArgs) -> CliResult {
    let (table, e) = load(&a.table)?;
    let cells = a.signal_cells.iter().map(|s| parse_cell(s)).collect::<Result<Vec<_>, _>>()?;
    let (n_rows, n_cols) = (table.n_rows(), table.n_cols());
    let signal = SignalMatrix::homogeneous(n_rows, n_cols, &cells, a.lambda)?;
    let zeros = match (a.zi_quantile, a.zero_prob) {
        (Some(q), _) => ebsignal::zero_indicator_from_e(&e, q)?,
        (_, Some(w)) => ZeroIndicator::bernoulli(n_rows, n_cols, w, a.seed ^ 0x9e37_79b9_7f4a_7c15)?,
        _ => ZeroIndicator::none(n_rows, n_cols),
    }
    .without_cells(&cells);
    let tables = generate_contin_table(&table, &signal, &zeros, a.n_tables, a.seed)?;
    for (t, tab) in tables.iter().enumerate() {
        write_atomic(&a.output.join(format!("table_{:04}.csv", t + 1)), tab.to_csv().as_bytes())?;
    }
    println!("wrote {} tables to {} ({} structural zeros)", tables.len(), a.output.display(), zeros.count());
    Ok(())
}
