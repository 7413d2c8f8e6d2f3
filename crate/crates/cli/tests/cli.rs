use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ebsignal::{
    all_posteriors, estimate_null_expected_count, load_table, scaled_wasserstein, ContingencyTable, ExpectedCounts64,
    FitResult64, LoadOptions, NullMethod, WassersteinMode, WassersteinOrder,
};
use serde_json::Value;

const TABLE: &str = "\
AE,DrugA,DrugB,DrugC,Other
Myalgia,40,6,3,120
Rash,2,14,1,60
Nausea,5,4,3,90
Headache,3,2,9,70
Fatigue,6,5,2,80
Dizziness,1,1,1,40
Other AEs,300,220,150,5000
";

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ebsignal"));
    c.env_remove("EBSIGNAL_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("table.csv"), TABLE).unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn p(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }

    /// general-gamma fit at alpha 0.5, written to `fit.json`.
    fn fit(&self) -> String {
        let out = self.p("fit.json");
        let o = run(&["fit", &self.p("table.csv"), "--model", "general-gamma", "--alpha", "0.5", "-o", &out]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        out
    }
}

fn schema() -> Value {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../schemas/plot_data.schema.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn usage_errors_exit_2() {
    let f = Fixture::new();
    let o = run(&["fit", &f.p("table.csv"), "--model", "KM", "--alpha", "0.5", "-o", &f.p("x.json")]);
    assert_eq!(code(&o), 2);
    let o = run(&["fit", &f.p("table.csv"), "--model", "general-gamma", "-o", &f.p("x.json")]);
    assert_eq!(code(&o), 2, "missing --alpha");
    let o = run(&["fit", &f.p("table.csv"), "--model", "efron", "--p", "5", "-o", &f.p("x.json")]);
    assert_eq!(code(&o), 2, "missing --c0");
    let o = run(&["fit", &f.p("table.csv"), "--model", "bogus", "-o", &f.p("x.json")]);
    assert_eq!(code(&o), 2);
    assert!(!f.path("x.json").exists());
    let fit = f.fit();
    let o = run(&["detect", &fit, "--cutoff", "1", "-o", &f.p("d.csv")]);
    assert_eq!(code(&o), 2);
    let o = run(&["detect", &fit, "--prob", "1.5", "-o", &f.p("d.csv")]);
    assert_eq!(code(&o), 2);
    let o = run(&["plot-data", &fit, "--type", "heatmap", "--num-top-aes", "0", "-o", &f.p("p.json")]);
    assert_eq!(code(&o), 2);
}

#[test]
fn data_errors_exit_3() {
    let f = Fixture::new();
    let o = run(&["fit", &f.p("missing.csv"), "--model", "GPS", "-o", &f.p("x.json")]);
    assert_eq!(code(&o), 3);
    std::fs::write(f.path("ragged.csv"), "AE,A,B\nx,1,2\ny,3\n").unwrap();
    let o = run(&["fit", &f.p("ragged.csv"), "--model", "GPS", "-o", &f.p("x.json")]);
    assert_eq!(code(&o), 3);

    // a tampered count breaks the stored digest
    let fit = f.fit();
    let mut doc = read_json(Path::new(&fit));
    let c = doc["table"]["counts"][0][0].as_u64().unwrap();
    doc["table"]["counts"][0][0] = (c + 1).into();
    std::fs::write(f.path("tampered.json"), serde_json::to_string(&doc).unwrap()).unwrap();
    let o = run(&["detect", &f.p("tampered.json"), "-o", &f.p("d.csv")]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("digest"));
    std::fs::write(f.path("garbage.json"), "{not json").unwrap();
    let o = run(&["summarize", &f.p("garbage.json")]);
    assert_eq!(code(&o), 3);
}

#[test]
fn nonconvergence_exits_4_but_writes_fit() {
    let f = Fixture::new();
    let out = f.p("fit.json");
    let o =
        run(&["fit", &f.p("table.csv"), "--model", "general-gamma", "--alpha", "0.5", "--max-iter", "1", "-o", &out]);
    assert_eq!(code(&o), 4);
    let doc = read_json(Path::new(&out));
    assert_eq!(doc["fit"]["converged"], Value::Bool(false));
}

#[test]
fn detect_count_matches_matrix() {
    let f = Fixture::new();
    let fit = f.fit();
    let o = run(&["detect", &fit, "--cutoff", "1.001", "--prob", "0.5", "-o", &f.p("d.csv")]);
    assert_eq!(code(&o), 0);
    let printed: usize = stdout(&o).trim().parse().unwrap();
    let csv = std::fs::read_to_string(f.path("d.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "AE,DrugA,DrugB,DrugC,Other");
    let ones: usize = lines.map(|l| l.split(',').skip(1).filter(|&v| v == "1").count()).sum();
    assert_eq!(printed, ones);
    assert!(printed > 0, "the Myalgia/DrugA cell is a clear signal");
    // the stored fit reproduces the same count in the library
    let doc = read_json(Path::new(&fit));
    let fr: FitResult64 = serde_json::from_value(doc["fit"].clone()).unwrap();
    let t: ContingencyTable = serde_json::from_value(doc["table"].clone()).unwrap();
    let e: ExpectedCounts64 = serde_json::from_value(doc["expected"].clone()).unwrap();
    assert_eq!(ebsignal::detect_signals(&fr, &t, &e, 1.001, 0.5).unwrap().count(), printed);
}

#[test]
fn summarize_writes_every_cell() {
    let f = Fixture::new();
    let fit = f.fit();
    let o = run(&["summarize", &fit, "-o", &f.p("s.csv")]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("general-gamma"));
    let csv = std::fs::read_to_string(f.path("s.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "ae,drug,N,E,mean,median,lower,upper,prob_signal");
    assert_eq!(rows.len(), 1 + 7 * 4);
    for r in &rows[1..] {
        let v: Vec<f64> = r.split(',').skip(4).map(|x| x.parse().unwrap()).collect();
        assert!(v[2] <= v[1] && v[1] <= v[3], "{r}");
    }
}

#[test]
fn heatmap_matches_schema_and_ranking() {
    let f = Fixture::new();
    let fit = f.fit();
    let o = run(&[
        "plot-data",
        &fit,
        "--type",
        "heatmap",
        "--num-top-aes",
        "3",
        "-o",
        &f.p("h.json"),
        "--svg",
        &f.p("h.svg"),
    ]);
    assert_eq!(code(&o), 0);
    let doc = read_json(&f.path("h.json"));
    let validator = jsonschema::validator_for(&schema()).unwrap();
    assert!(validator.is_valid(&doc), "{doc}");
    assert!(std::fs::read_to_string(f.path("h.svg")).unwrap().starts_with("<svg"));

    // brute-force ranking from the table: max over drugs of W2 distance to 1
    let t = load_table(f.path("table.csv"), &LoadOptions::default()).unwrap();
    let e: ExpectedCounts64 = estimate_null_expected_count(&t, NullMethod::Subtable).unwrap();
    let fr: FitResult64 = serde_json::from_value(read_json(Path::new(&fit))["fit"].clone()).unwrap();
    let post = all_posteriors(&fr, &t, &e).unwrap();
    let mut scored: Vec<(f64, &str)> = (0..t.n_rows() - 1)
        .map(|i| {
            let s = (0..t.n_cols() - 1)
                .map(|j| {
                    scaled_wasserstein(
                        &post[i * t.n_cols() + j],
                        1.0,
                        WassersteinOrder::Two,
                        WassersteinMode::ClosedForm,
                    )
                    .unwrap()
                })
                .fold(f64::NEG_INFINITY, f64::max);
            (s, t.ae_names()[i].as_str())
        })
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let expected: Vec<&str> = scored.iter().take(3).map(|s| s.1).collect();
    let got: Vec<&str> = doc["ae_order"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(got, expected);
}

#[test]
fn heatmap_clamps_top_aes_with_warning() {
    let f = Fixture::new();
    let fit = f.fit();
    let o = run(&["plot-data", &fit, "--type", "heatmap", "--num-top-aes", "50", "-o", &f.p("h.json")]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    assert_eq!(read_json(&f.path("h.json"))["ae_order"].as_array().unwrap().len(), 6);
}

#[test]
fn eyeplot_filters_by_count() {
    let f = Fixture::new();
    let fit = f.fit();
    let o = run(&[
        "plot-data",
        &fit,
        "--type",
        "eyeplot",
        "--n-threshold",
        "5",
        "--text-shift",
        "0.2",
        "-o",
        &f.p("e.json"),
    ]);
    assert_eq!(code(&o), 0);
    let doc = read_json(&f.path("e.json"));
    let validator = jsonschema::validator_for(&schema()).unwrap();
    assert!(validator.is_valid(&doc), "{doc}");
    let cells = doc["cells"].as_array().unwrap();
    assert!(!cells.is_empty());
    assert!(cells.iter().all(|c| c["N"].as_u64().unwrap() >= 5));
    for c in cells {
        let (lo, med, hi) = (c["lo"].as_f64().unwrap(), c["median"].as_f64().unwrap(), c["hi"].as_f64().unwrap());
        assert!(lo <= med && med <= hi);
    }
    assert_eq!(doc["text_shift"].as_f64(), Some(0.2));
}

#[test]
fn one_point_grid_gives_one_row() {
    let f = Fixture::new();
    let o = run(&["tune", &f.p("table.csv"), "--alphas", "0.3", "-o", &f.p("t.json"), "--report", &f.p("t.csv")]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(f.path("t.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(stdout(&o).contains("selected by AIC: alpha = 0.3"));
    let doc = read_json(&f.path("t.json"));
    assert_eq!(doc["tuning"]["rows"].as_array().unwrap().len(), 1);
    assert_eq!(doc["fit"]["alpha"].as_f64(), Some(0.3));
}

#[test]
fn efron_tune_rejects_bic() {
    let f = Fixture::new();
    let o = run(&["tune", &f.p("table.csv"), "--model", "efron", "--criterion", "BIC", "-o", &f.p("t.json")]);
    assert_eq!(code(&o), 2);
}

#[test]
fn simulate_writes_one_row_per_configuration() {
    let f = Fixture::new();
    let config = serde_json::json!({
        "reference_table": "table.csv",
        "signal_cells": [[1, 1], [2, 2]],
        "lambdas": [2.0],
        "zero_inflation": [{"name": "none"}, {"name": "some", "q": 0.3}],
        "n_sim": 1,
        "seed": 7,
        "policies": ["fix_0.5", "AIC"],
        "alpha_grid": [0.5],
        "n_draws": 200,
        "orders": ["1", "2"]
    });
    std::fs::write(f.path("sim.json"), config.to_string()).unwrap();
    let o = run(&["simulate", &f.p("sim.json"), "-o", &f.p("out")]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(f.path("out/metrics.csv")).unwrap();
    // policies × zero-inflation levels × lambdas × orders × {average, max}
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 2 * 2);
    let run_doc = read_json(&f.path("out/run.json"));
    assert_eq!(run_doc["config"]["n_sim"], 1);
}

#[test]
fn generate_preserves_grand_total() {
    let f = Fixture::new();
    let o = run(&[
        "generate",
        &f.p("table.csv"),
        "--signal-cell",
        "1,1",
        "--lambda",
        "3",
        "--zi-quantile",
        "0.2",
        "--n-tables",
        "3",
        "--seed",
        "5",
        "-o",
        &f.p("gen"),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let src = load_table(f.path("table.csv"), &LoadOptions::default()).unwrap();
    for k in 1..=3 {
        let t = load_table(f.path(&format!("gen/table_{k:04}.csv")), &LoadOptions::default()).unwrap();
        assert_eq!(t.grand_total(), src.grand_total());
        assert_eq!(t.ae_names(), src.ae_names());
    }
}

#[test]
fn seed_from_environment_matches_flag() {
    let f = Fixture::new();
    let args = |out: &str| {
        vec!["generate".to_string(), f.p("table.csv"), "--signal-cell".into(), "2,2".into(), "-o".into(), f.p(out)]
    };
    let mut a = args("flag");
    a.extend(["--seed".into(), "99".into()]);
    assert_eq!(code(&bin().args(&a).output().unwrap()), 0);
    let o = bin().args(args("env")).env("EBSIGNAL_SEED", "99").output().unwrap();
    assert_eq!(code(&o), 0);
    let o = bin().args(args("other")).env("EBSIGNAL_SEED", "100").output().unwrap();
    assert_eq!(code(&o), 0);
    let read = |d: &str| std::fs::read(f.path(&format!("{d}/table_0001.csv"))).unwrap();
    assert_eq!(read("flag"), read("env"));
    assert_ne!(read("flag"), read("other"));
}

#[test]
fn every_model_fits_from_the_command_line() {
    let f = Fixture::new();
    let table = f.p("table.csv");
    let cases: [&[&str]; 4] = [
        &["--model", "GPS"],
        &["--model", "K-gamma", "--k", "3"],
        &["--model", "KM", "--support-size", "30"],
        &["--model", "efron", "--p", "5", "--c0", "0.01", "--support-size", "30"],
    ];
    for (n, extra) in cases.iter().enumerate() {
        let out = f.p(&format!("m{n}.json"));
        let mut args = vec!["fit", table.as_str(), "-o", out.as_str()];
        args.extend_from_slice(extra);
        let o = run(&args);
        assert_eq!(code(&o), 0, "{extra:?}: {}", String::from_utf8_lossy(&o.stderr));
        let o = run(&["detect", &out, "-o", &f.p("d.csv")]);
        assert_eq!(code(&o), 0);
    }
}
