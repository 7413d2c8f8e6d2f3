//! Self-contained fit document: the fit plus the table and expected counts it
//! was computed from.

use std::path::Path;

use ebsignal::{ContingencyTable, ExpectedCounts64, FitResult64, TuneReport};
use serde::{Deserialize, Serialize};

use crate::{output, CliError};

pub const FORMAT: &str = "ebsignal-fit/1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitFile {
    pub format: String,
    pub table_digest: String,
    pub table: ContingencyTable,
    pub expected: ExpectedCounts64,
    pub fit: FitResult64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aic: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bic: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuning: Option<TuneReport<f64>>,
}

impl FitFile {
    pub fn new(table: ContingencyTable, expected: ExpectedCounts64, fit: FitResult64) -> Self {
        let (aic, bic) = if fit.model.is_gamma_mixture() {
            (ebsignal::aic_general_gamma(&fit).ok(), ebsignal::bic_general_gamma(&fit, table.n_cells()).ok())
        } else {
            (fit.diagnostics.aic_e, None)
        };
        Self { format: FORMAT.into(), table_digest: table.digest(), table, expected, fit, aic, bic, tuning: None }
    }

    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        output::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let f: FitFile = serde_json::from_str(&text)
            .map_err(|e| CliError::data(format!("{}: invalid fit file: {e}", path.display())))?;
        if f.format != FORMAT {
            return Err(CliError::data(format!("{}: unsupported format {:?}", path.display(), f.format)));
        }
        let digest = f.table.digest();
        if digest != f.table_digest {
            return Err(CliError::data(format!(
                "{}: table digest mismatch (stored {}, computed {digest})",
                path.display(),
                f.table_digest
            )));
        }
        let e = &f.expected;
        ExpectedCounts64::from_values(e.n_rows(), e.n_cols(), e.method(), e.values().to_vec())
            .and_then(|e| e.check_shape(&f.table))
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        Ok(f)
    }
}
