//! Contingency tables of adverse-event × drug report counts and null expected counts.
//!
//! The last row ("other AEs") and last column ("other drugs") are the reference
//! categories. Tables are immutable once built.

use std::collections::HashSet;
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::num::Real;

/// I×J matrix of report counts with AE row names and drug column names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TableRepr", into = "TableRepr")]
pub struct ContingencyTable {
    counts: Vec<u64>,
    ae_names: Vec<String>,
    drug_names: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    ae_names: Vec<String>,
    drug_names: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl TryFrom<TableRepr> for ContingencyTable {
    type Error = Error;
    fn try_from(r: TableRepr) -> Result<Self> {
        ContingencyTable::new(r.counts, r.ae_names, r.drug_names)
    }
}

impl From<ContingencyTable> for TableRepr {
    fn from(t: ContingencyTable) -> Self {
        TableRepr { counts: t.rows().map(|r| r.to_vec()).collect(), ae_names: t.ae_names, drug_names: t.drug_names }
    }
}

fn check_unique(names: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::new();
    for n in names {
        if !seen.insert(n.as_str()) {
            return Err(Error::InvalidTable(format!("duplicate {what} name {n:?}")));
        }
    }
    Ok(())
}

impl ContingencyTable {
    /// Build from row-major nested counts.
    pub fn new(counts: Vec<Vec<u64>>, ae_names: Vec<String>, drug_names: Vec<String>) -> Result<Self> {
        let n_rows = ae_names.len();
        let n_cols = drug_names.len();
        if n_rows < 2 || n_cols < 2 {
            return Err(Error::InvalidTable(format!("need at least 2 rows and 2 columns, got {n_rows}x{n_cols}")));
        }
        if counts.len() != n_rows {
            return Err(Error::InvalidTable(format!("{} count rows for {} AE names", counts.len(), n_rows)));
        }
        for (i, row) in counts.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::InvalidTable(format!(
                    "row {:?} has {} entries, expected {}",
                    ae_names[i],
                    row.len(),
                    n_cols
                )));
            }
        }
        check_unique(&ae_names, "AE")?;
        check_unique(&drug_names, "drug")?;
        Ok(Self { counts: counts.into_iter().flatten().collect(), ae_names, drug_names })
    }

    /// Build with generated names `AE1..`, `D1..` (last ones labeled as references).
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let n_rows = counts.len();
        let n_cols = counts.first().map_or(0, Vec::len);
        let mut ae: Vec<String> = (1..n_rows).map(|i| format!("AE{i}")).collect();
        ae.push("Other AEs".into());
        let mut drugs: Vec<String> = (1..n_cols).map(|j| format!("D{j}")).collect();
        drugs.push("Other drugs".into());
        Self::new(counts, ae, drugs)
    }

    pub(crate) fn from_flat(counts: Vec<u64>, ae_names: Vec<String>, drug_names: Vec<String>) -> Self {
        debug_assert_eq!(counts.len(), ae_names.len() * drug_names.len());
        Self { counts, ae_names, drug_names }
    }

    pub fn n_rows(&self) -> usize {
        self.ae_names.len()
    }

    pub fn n_cols(&self) -> usize {
        self.drug_names.len()
    }

    pub fn n_cells(&self) -> usize {
        self.counts.len()
    }

    pub fn ae_names(&self) -> &[String] {
        &self.ae_names
    }

    pub fn drug_names(&self) -> &[String] {
        &self.drug_names
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.n_cols() + j]
    }

    /// Row-major flat counts.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u64]> {
        self.counts.chunks(self.n_cols())
    }

    pub fn row_total(&self, i: usize) -> u64 {
        self.rows().nth(i).map_or(0, |r| r.iter().sum())
    }

    pub fn col_total(&self, j: usize) -> u64 {
        self.rows().map(|r| r[j]).sum()
    }

    pub fn grand_total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn reference_row(&self) -> usize {
        self.n_rows() - 1
    }

    pub fn reference_col(&self) -> usize {
        self.n_cols() - 1
    }

    pub fn is_reference_cell(&self, i: usize, j: usize) -> bool {
        i == self.reference_row() || j == self.reference_col()
    }

    /// SHA-256 over the canonical JSON form, hex encoded.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("table serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// Move the named row/column to the reference (last) position.
    pub fn with_reference(mut self, row: Option<&str>, col: Option<&str>) -> Result<Self> {
        let (n_rows, n_cols) = (self.n_rows(), self.n_cols());
        let mut row_order: Vec<usize> = (0..n_rows).collect();
        let mut col_order: Vec<usize> = (0..n_cols).collect();
        if let Some(name) = row {
            let idx = self
                .ae_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown reference AE {name:?}")))?;
            row_order.retain(|&i| i != idx);
            row_order.push(idx);
        }
        if let Some(name) = col {
            let idx = self
                .drug_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown reference drug {name:?}")))?;
            col_order.retain(|&j| j != idx);
            col_order.push(idx);
        }
        let counts = row_order
            .iter()
            .flat_map(|&i| col_order.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect();
        self.ae_names = row_order.iter().map(|&i| self.ae_names[i].clone()).collect();
        self.drug_names = col_order.iter().map(|&j| self.drug_names[j].clone()).collect();
        self.counts = counts;
        Ok(self)
    }

    /// Write in the CSV dialect read by [`parse_table`].
    pub fn to_csv(&self) -> String {
        let mut out = String::from("AE");
        for d in &self.drug_names {
            out.push(',');
            out.push_str(d);
        }
        out.push('\n');
        for (name, row) in self.ae_names.iter().zip(self.rows()) {
            out.push_str(name);
            for c in row {
                out.push(',');
                out.push_str(&c.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Options applied while loading a table.
#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Name of the AE row to treat as the reference category (moved last).
    pub reference_row: Option<String>,
    /// Name of the drug column to treat as the reference category (moved last).
    pub reference_col: Option<String>,
}

/// Load a CSV table: header holds drug names (first field ignored), first column AE names.
pub fn load_table(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<ContingencyTable> {
    let file = std::fs::File::open(path)?;
    parse_table(file, opts)
}

/// Parse a CSV table from any reader. See [`load_table`].
pub fn parse_table<R: Read>(reader: R, opts: &LoadOptions) -> Result<ContingencyTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(rec) => rec.map_err(|e| csv_error(e, 1))?,
        None => return Err(Error::InvalidTable("empty file".into())),
    };
    let drug_names: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let width = header.len();
    let mut ae_names = Vec::new();
    let mut counts = Vec::new();
    for (idx, rec) in records.enumerate() {
        let line = idx + 2;
        let rec = rec.map_err(|e| csv_error(e, line))?;
        if rec.len() == 1 && rec.get(0).is_some_and(str::is_empty) {
            continue;
        }
        if rec.len() != width {
            return Err(Error::Parse {
                line,
                column: rec.len(),
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        let name = rec.get(0).unwrap_or_default().to_owned();
        let mut row = Vec::with_capacity(width - 1);
        for (j, field) in rec.iter().enumerate().skip(1) {
            let value = field.parse::<i64>().map_err(|_| Error::Parse {
                line,
                column: j + 1,
                message: format!("cell ({name:?}, {:?}) = {field:?} is not an integer", drug_names[j - 1]),
            })?;
            if value < 0 {
                return Err(Error::Parse {
                    line,
                    column: j + 1,
                    message: format!("cell ({name:?}, {:?}) is negative ({value})", drug_names[j - 1]),
                });
            }
            row.push(value as u64);
        }
        ae_names.push(name);
        counts.push(row);
    }
    let table = ContingencyTable::new(counts, ae_names, drug_names)?;
    if opts.reference_row.is_some() || opts.reference_col.is_some() {
        table.with_reference(opts.reference_row.as_deref(), opts.reference_col.as_deref())
    } else {
        Ok(table)
    }
}

fn csv_error(e: csv::Error, line: usize) -> Error {
    Error::Parse { line, column: 0, message: e.to_string() }
}

/// Keep the named AE rows (in table order) and sum everything else into a new reference row.
pub fn collapse_rows(table: &ContingencyTable, keep: &[&str], reference_label: &str) -> Result<ContingencyTable> {
    if keep.is_empty() {
        return Err(Error::InvalidArgument("keep list is empty".into()));
    }
    let mut keep_idx = HashSet::new();
    for name in keep {
        let idx = table
            .ae_names()
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown AE {name:?}")))?;
        if idx == table.reference_row() {
            return Err(Error::InvalidArgument(format!("{name:?} is the current reference row and cannot be kept")));
        }
        if !keep_idx.insert(idx) {
            return Err(Error::InvalidArgument(format!("AE {name:?} listed twice")));
        }
    }
    let n_cols = table.n_cols();
    let mut counts = Vec::with_capacity((keep_idx.len() + 1) * n_cols);
    let mut names = Vec::with_capacity(keep_idx.len() + 1);
    let mut reference = vec![0u64; n_cols];
    for (i, row) in table.rows().enumerate() {
        if keep_idx.contains(&i) {
            counts.extend_from_slice(row);
            names.push(table.ae_names()[i].clone());
        } else {
            for (acc, &c) in reference.iter_mut().zip(row) {
                *acc += c;
            }
        }
    }
    if names.iter().any(|n| n == reference_label) {
        return Err(Error::InvalidArgument(format!("reference label {reference_label:?} collides with a kept AE")));
    }
    counts.extend(reference);
    names.push(reference_label.to_owned());
    Ok(ContingencyTable::from_flat(counts, names, table.drug_names().to_vec()))
}

/// Estimator for the null baseline expected counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NullMethod {
    /// `N_i• N_•j / N_••`.
    Marginal,
    /// `N_iJ N_Ij / N_IJ` from the 2×2 reference subtable.
    #[default]
    Subtable,
}

impl fmt::Display for NullMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NullMethod::Marginal => "marginal",
            NullMethod::Subtable => "subtable",
        })
    }
}

/// I×J matrix of positive null expected counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ExpectedCounts<T> {
    n_rows: usize,
    n_cols: usize,
    method: NullMethod,
    values: Vec<T>,
}

impl<T: Real> ExpectedCounts<T> {
    /// Validate and wrap row-major values.
    pub fn from_values(n_rows: usize, n_cols: usize, method: NullMethod, values: Vec<T>) -> Result<Self> {
        if values.len() != n_rows * n_cols {
            return Err(Error::InvalidArgument(format!(
                "{} expected counts for a {n_rows}x{n_cols} table",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !(v.is_finite() && *v > T::zero())) {
            return Err(Error::InvalidArgument(format!(
                "expected count at ({}, {}) is not a positive finite number",
                pos / n_cols,
                pos % n_cols
            )));
        }
        Ok(Self { n_rows, n_cols, method, values })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn method(&self) -> NullMethod {
        self.method
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.n_cols + j]
    }

    /// Row-major flat values.
    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Check the shape against a table.
    pub fn check_shape(&self, table: &ContingencyTable) -> Result<()> {
        if self.n_rows != table.n_rows() || self.n_cols != table.n_cols() {
            return Err(Error::InvalidArgument(format!(
                "expected counts are {}x{}, table is {}x{}",
                self.n_rows,
                self.n_cols,
                table.n_rows(),
                table.n_cols()
            )));
        }
        Ok(())
    }
}

/// Observed-to-expected ratios `N_ij / E_ij`, row-major.
pub fn observed_over_expected<T: Real>(table: &ContingencyTable, e: &ExpectedCounts<T>) -> Vec<T> {
    table.counts().iter().zip(e.values()).map(|(&n, &ev)| T::from_count(n) / ev).collect()
}

/// Null baseline expected counts by the chosen estimator.
pub fn estimate_null_expected_count<T: Real>(
    table: &ContingencyTable,
    method: NullMethod,
) -> Result<ExpectedCounts<T>> {
    let (n_rows, n_cols) = (table.n_rows(), table.n_cols());
    let values = match method {
        NullMethod::Marginal => {
            let total = table.grand_total();
            if total == 0 {
                return Err(Error::ZeroMargin { kind: "grand", name: "table".into(), method: "marginal" });
            }
            let rows: Vec<u64> = (0..n_rows).map(|i| table.row_total(i)).collect();
            let cols: Vec<u64> = (0..n_cols).map(|j| table.col_total(j)).collect();
            if let Some(i) = rows.iter().position(|&r| r == 0) {
                return Err(Error::ZeroMargin { kind: "row", name: table.ae_names()[i].clone(), method: "marginal" });
            }
            if let Some(j) = cols.iter().position(|&c| c == 0) {
                return Err(Error::ZeroMargin {
                    kind: "column",
                    name: table.drug_names()[j].clone(),
                    method: "marginal",
                });
            }
            let total = T::from_count(total);
            rows.iter().flat_map(|&r| cols.iter().map(move |&c| T::from_count(r) * T::from_count(c) / total)).collect()
        }
        NullMethod::Subtable => {
            let (ri, cj) = (table.reference_row(), table.reference_col());
            let corner = table.get(ri, cj);
            if corner == 0 {
                return Err(Error::ZeroMargin {
                    kind: "reference cell",
                    name: format!("({}, {})", table.ae_names()[ri], table.drug_names()[cj]),
                    method: "subtable",
                });
            }
            if let Some(i) = (0..n_rows).find(|&i| table.get(i, cj) == 0) {
                return Err(Error::ZeroMargin {
                    kind: "reference-column count of row",
                    name: table.ae_names()[i].clone(),
                    method: "subtable",
                });
            }
            if let Some(j) = (0..n_cols).find(|&j| table.get(ri, j) == 0) {
                return Err(Error::ZeroMargin {
                    kind: "reference-row count of column",
                    name: table.drug_names()[j].clone(),
                    method: "subtable",
                });
            }
            let corner = T::from_count(corner);
            (0..n_rows)
                .flat_map(|i| (0..n_cols).map(move |j| (i, j)))
                .map(|(i, j)| T::from_count(table.get(i, cj)) * T::from_count(table.get(ri, j)) / corner)
                .collect()
        }
    };
    ExpectedCounts::from_values(n_rows, n_cols, method, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small() -> ContingencyTable {
        ContingencyTable::from_counts(vec![vec![2, 1, 3], vec![1, 4, 5], vec![3, 5, 20]]).unwrap()
    }

    #[test]
    fn parses_head_of_statin_like_file() {
        let csv = "AE,Atorvastatin,Fluvastatin,Lovastatin,Pravastatin,Other\n\
                   ACUTE KIDNEY INJURY,1132,23,23,153,9000\n\
                   ANURIA,46,0,0,1,300\n\
                   Other AEs,5000,300,200,900,100000\n";
        let t = parse_table(csv.as_bytes(), &LoadOptions::default()).unwrap();
        assert_eq!(t.n_rows(), 3);
        assert_eq!(t.n_cols(), 5);
        assert_eq!(t.get(0, 0), 1132);
        assert_eq!(t.ae_names()[0], "ACUTE KIDNEY INJURY");
        assert_eq!(t.drug_names()[0], "Atorvastatin");
    }

    #[test]
    fn all_zero_table_parses() {
        let t = parse_table("x,a,b\nr1,0,0\nr2,0,0\n".as_bytes(), &LoadOptions::default()).unwrap();
        assert_eq!(t.grand_total(), 0);
    }

    #[test]
    fn negative_entry_names_the_cell() {
        let err = parse_table("x,a,b\nr1,1,-2\nr2,3,4\n".as_bytes(), &LoadOptions::default()).unwrap_err();
        match err {
            Error::Parse { line, column, message } => {
                assert_eq!((line, column), (2, 3));
                assert!(message.contains("r1") && message.contains("\"b\""), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ragged_and_non_integer_rows_rejected() {
        assert!(matches!(
            parse_table("x,a,b\nr1,1\nr2,3,4\n".as_bytes(), &LoadOptions::default()),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_table("x,a,b\nr1,1,2.5\nr2,3,4\n".as_bytes(), &LoadOptions::default()),
            Err(Error::Parse { line: 2, column: 3, .. })
        ));
        assert!(matches!(
            parse_table("x,a,b\nr1,1,2\nr1,3,4\n".as_bytes(), &LoadOptions::default()),
            Err(Error::InvalidTable(_))
        ));
    }

    #[test]
    fn reference_reordering() {
        let opts = LoadOptions { reference_row: Some("r1".into()), reference_col: Some("a".into()) };
        let t = parse_table("x,a,b,c\nr1,1,2,3\nr2,4,5,6\nr3,7,8,9\n".as_bytes(), &opts).unwrap();
        assert_eq!(t.ae_names(), ["r2", "r3", "r1"]);
        assert_eq!(t.drug_names(), ["b", "c", "a"]);
        assert_eq!(t.get(2, 2), 1);
        assert_eq!(t.get(0, 0), 5);
    }

    #[test]
    fn collapse_sums_dropped_rows() {
        let t =
            ContingencyTable::from_counts(vec![vec![1, 2, 3], vec![4, 5, 6], vec![7, 8, 9], vec![10, 11, 12]]).unwrap();
        let c = collapse_rows(&t, &["AE2", "AE1"], "rest").unwrap();
        assert_eq!(c.n_rows(), 3);
        assert_eq!(c.ae_names(), ["AE1", "AE2", "rest"]);
        // direct summation oracle over the dropped rows (AE3 and the old reference)
        for j in 0..3 {
            assert_eq!(c.get(2, j), t.get(2, j) + t.get(3, j));
            assert_eq!(c.col_total(j), t.col_total(j));
        }
        assert_eq!(c.grand_total(), t.grand_total());
    }

    #[test]
    fn identity_collapse() {
        let t = small();
        let c = collapse_rows(&t, &["AE1", "AE2"], "rest").unwrap();
        assert_eq!(c.counts(), t.counts());
        assert_eq!(c.ae_names()[2], "rest");
    }

    #[test]
    fn collapse_errors() {
        let t = small();
        assert!(collapse_rows(&t, &[], "rest").is_err());
        assert!(collapse_rows(&t, &["nope"], "rest").is_err());
        assert!(collapse_rows(&t, &["Other AEs"], "rest").is_err());
    }

    #[test]
    fn constant_table_gives_constant_expectation() {
        let t = ContingencyTable::from_counts(vec![vec![7, 7], vec![7, 7]]).unwrap();
        for m in [NullMethod::Marginal, NullMethod::Subtable] {
            let e: ExpectedCounts<f64> = estimate_null_expected_count(&t, m).unwrap();
            assert_relative_eq!(e.get(0, 0), 7.0);
        }
    }

    #[test]
    fn subtable_and_marginal_on_small_table() {
        let t = small();
        let e: ExpectedCounts<f64> = estimate_null_expected_count(&t, NullMethod::Subtable).unwrap();
        assert_relative_eq!(e.get(0, 0), 3.0 * 3.0 / 20.0, max_relative = 1e-15);
        let m: ExpectedCounts<f64> = estimate_null_expected_count(&t, NullMethod::Marginal).unwrap();
        // direct formula: row total 6, column total 6, grand total 44
        assert_relative_eq!(m.get(0, 0), 6.0 * 6.0 / 44.0, max_relative = 1e-15);
        let total: f64 = m.values().iter().sum();
        assert_relative_eq!(total, 44.0, max_relative = 1e-14);
    }

    #[test]
    fn zero_reference_count_is_an_error() {
        let t = ContingencyTable::from_counts(vec![vec![1, 0], vec![2, 3]]).unwrap();
        let err = estimate_null_expected_count::<f64>(&t, NullMethod::Subtable).unwrap_err();
        assert!(err.to_string().contains("AE1"), "{err}");
        assert!(estimate_null_expected_count::<f64>(&t, NullMethod::Marginal).is_ok());
    }

    #[test]
    fn json_shape() {
        let t = small();
        let v: serde_json::Value = serde_json::to_value(&t).unwrap();
        assert_eq!(v["counts"][2][2], 20);
        assert_eq!(v["drug_names"][2], "Other drugs");
        let back: ContingencyTable = serde_json::from_value(v).unwrap();
        assert_eq!(back, t);
    }
}
