//! CSV matrices and JSON run manifests.
//!
//! CSV layout: a header `f0,f1,...,f{d-1}` with an optional trailing
//! `label` column, then one record per line, `\n` line endings, values in
//! shortest round-trip form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;
use crate::noise::{calibrate_element_wise, calibrate_row_wise};
use crate::params::{PrivacyMode, PrivacyParams};

pub const MANIFEST_SCHEMA_VERSION: &str = "1";

const RELATIVE_TOLERANCE: f64 = 1e-12;

pub fn csv_string(matrix: &DataMatrix, labels: Option<&[usize]>) -> Result<String> {
    if let Some(labels) = labels {
        if labels.len() != matrix.rows() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} rows",
                labels.len(),
                matrix.rows()
            )));
        }
    }
    let mut out = String::new();
    let header: Vec<String> = (0..matrix.cols()).map(|j| format!("f{j}")).collect();
    out.push_str(&header.join(","));
    if labels.is_some() {
        out.push_str(",label");
    }
    out.push('\n');
    for (i, row) in matrix.iter_rows().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v}").unwrap();
        }
        if let Some(labels) = labels {
            write!(out, ",{}", labels[i]).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_csv(
    path: impl AsRef<Path>,
    matrix: &DataMatrix,
    labels: Option<&[usize]>,
) -> Result<()> {
    fs::write(path, csv_string(matrix, labels)?)?;
    Ok(())
}

pub fn parse_csv(text: &str) -> Result<(DataMatrix, Option<Vec<usize>>)> {
    let mut lines = text.split('\n').enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines
        .next()
        .filter(|(_, h)| !h.is_empty())
        .ok_or(Error::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
    let names: Vec<&str> = header.split(',').collect();
    let has_labels = names.last() == Some(&"label");
    let cols = names.len() - usize::from(has_labels);
    for (j, name) in names[..cols].iter().enumerate() {
        if *name != format!("f{j}") {
            return Err(Error::Parse {
                line: 1,
                message: format!("column {j} is named {name:?}, expected \"f{j}\""),
            });
        }
    }
    if cols == 0 {
        return Err(Error::Parse {
            line: 1,
            message: "no feature columns".into(),
        });
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut rows = 0;
    let mut ended = false;
    for (line_no, line) in lines {
        if line.is_empty() {
            ended = true;
            continue;
        }
        if ended {
            return Err(Error::Parse {
                line: line_no - 1,
                message: "blank line inside data".into(),
            });
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != names.len() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {} fields, found {}", names.len(), cells.len()),
            });
        }
        for (j, cell) in cells[..cols].iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("column {j}: {cell:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("column {j}: non-finite value {cell:?}"),
                });
            }
            values.push(v);
        }
        if has_labels {
            let cell = cells[cols];
            labels.push(cell.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("label {cell:?} is not a non-negative integer"),
            })?);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Parse {
            line: 2,
            message: "no data rows".into(),
        });
    }
    let matrix = DataMatrix::new(rows, cols, values)?;
    Ok((matrix, has_labels.then_some(labels)))
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<(DataMatrix, Option<Vec<usize>>)> {
    parse_csv(&fs::read_to_string(path)?)
}

/// Everything needed to rerun a command and check its derived constants.
///
/// Fields that do not apply to a command are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub schema_version: String,
    /// Full command line, space separated.
    pub command: String,
    /// Command arguments after the program name, for exact replay.
    pub args: Vec<String>,
    pub seed: u64,
    pub mode: Option<PrivacyMode>,
    pub epsilon: Option<f64>,
    pub k: Option<usize>,
    pub d: Option<usize>,
    pub n: Option<usize>,
    pub alpha: Option<f64>,
    pub t: Option<f64>,
    pub t_multiplier: Option<f64>,
    pub c: Option<f64>,
    pub b: Option<f64>,
    pub sigma2: Option<f64>,
    pub failure_bound: Option<f64>,
    pub vacuous_bound: Option<bool>,
    pub labels_passed_through: Option<bool>,
    /// Files written by the run, relative to the manifest's directory.
    pub outputs: Vec<String>,
    /// UTC, ISO-8601.
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(args: Vec<String>, seed: u64, timestamp: impl Into<String>) -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA_VERSION.to_owned(),
            command: args.join(" "),
            args,
            seed,
            mode: None,
            epsilon: None,
            k: None,
            d: None,
            n: None,
            alpha: None,
            t: None,
            t_multiplier: None,
            c: None,
            b: None,
            sigma2: None,
            failure_bound: None,
            vacuous_bound: None,
            labels_passed_through: None,
            outputs: Vec::new(),
            timestamp: timestamp.into(),
        }
    }

    /// Copies the primary and derived values of `params`.
    pub fn record_params(&mut self, params: &PrivacyParams) {
        self.mode = Some(params.mode());
        self.epsilon = Some(params.epsilon());
        self.k = Some(params.k());
        if params.d().is_some() {
            self.d = params.d();
        }
        self.alpha = params.alpha();
        self.t = params.t();
        self.t_multiplier = params.t_multiplier();
        self.c = Some(params.c());
        self.b = Some(params.b());
        self.sigma2 = Some(params.sigma2());
        self.failure_bound = Some(params.failure_bound());
        self.vacuous_bound = Some(params.vacuous_bound());
    }

    /// Recalibrates from the primary fields and returns the result.
    /// `None` when the manifest carries no privacy mode.
    pub fn recalibrate(&self) -> Result<Option<PrivacyParams>> {
        let Some(mode) = self.mode else {
            return Ok(None);
        };
        let missing = |field: &str| Error::Manifest(format!("mode {mode} requires field {field}"));
        let epsilon = self.epsilon.ok_or_else(|| missing("epsilon"))?;
        let k = self.k.ok_or_else(|| missing("k"))?;
        let params = match mode {
            PrivacyMode::ElementWise => {
                calibrate_element_wise(k, epsilon, self.d.ok_or_else(|| missing("d"))?)?
            }
            PrivacyMode::RowWise => calibrate_row_wise(
                k,
                epsilon,
                self.alpha.ok_or_else(|| missing("alpha"))?,
                self.t_multiplier.ok_or_else(|| missing("t_multiplier"))?,
            )?,
        };
        Ok(Some(params))
    }

    /// Checks that every stored derived constant matches a fresh
    /// calibration to within 1e-12 relative.
    pub fn verify(&self) -> Result<()> {
        if self.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::Manifest(format!(
                "schema version {:?}, expected {MANIFEST_SCHEMA_VERSION:?}",
                self.schema_version
            )));
        }
        let Some(params) = self.recalibrate()? else {
            return Ok(());
        };
        let checks = [
            ("c", self.c, Some(params.c())),
            ("b", self.b, Some(params.b())),
            ("sigma2", self.sigma2, Some(params.sigma2())),
            (
                "failure_bound",
                self.failure_bound,
                Some(params.failure_bound()),
            ),
            ("t", self.t, params.t()),
        ];
        for (name, stored, expected) in checks {
            match (stored, expected) {
                (Some(s), Some(e)) if (s - e).abs() <= RELATIVE_TOLERANCE * e.abs() => {}
                (None, None) => {}
                _ => {
                    return Err(Error::Manifest(format!(
                        "{name} is {stored:?} but the primary parameters give {expected:?}"
                    )))
                }
            }
        }
        if self.vacuous_bound != Some(params.vacuous_bound()) {
            return Err(Error::Manifest(format!(
                "vacuous_bound is {:?} but the primary parameters give {}",
                self.vacuous_bound,
                params.vacuous_bound()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let manifest: RunManifest = serde_json::from_str(text)?;
        manifest.verify()?;
        Ok(manifest)
    }
}

pub fn write_manifest(path: impl AsRef<Path>, manifest: &RunManifest) -> Result<()> {
    fs::write(path, manifest.to_json()?)?;
    Ok(())
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<RunManifest> {
    RunManifest::from_json(&fs::read_to_string(path)?)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}
