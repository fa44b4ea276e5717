//! Loading numeric CSV data and assembling regression designs.
//!
//! The toolkit works on two equations: the count equation (design matrix `X`,
//! coefficients `beta`) and, for one-inflated families, the inflation
//! equation (design matrix `Z`, coefficients `gamma`).  Both matrices get an
//! intercept column prepended automatically; a regressor may appear in either
//! or both equations.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dists::Family;
use crate::error::Error;
use crate::Result;

/// A rectangular, all-numeric dataset with named columns.
#[derive(Debug, Clone)]
pub struct Dataset {
    names: Vec<String>,
    /// Column-major storage; every column has the same length.
    columns: Vec<Vec<f64>>,
}

impl Dataset {
    /// Builds a dataset from parallel name/column vectors.
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::DimensionMismatch {
                expected: names.len(),
                actual: columns.len(),
            });
        }
        if let Some(first) = columns.first() {
            for (name, col) in names.iter().zip(&columns) {
                if col.len() != first.len() {
                    return Err(Error::MalformedData {
                        path: "<memory>".into(),
                        message: format!(
                            "column {name:?} has {} rows, expected {}",
                            col.len(),
                            first.len()
                        ),
                    });
                }
            }
        }
        Ok(Dataset { names, columns })
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Column by name, or an `UnknownColumn` error.
    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }
}

/// Reads a headered, all-numeric CSV file.  Error messages name the first
/// offending data row (1-based, excluding the header) and column.
pub fn load_csv(path: impl AsRef<std::path::Path>) -> Result<Dataset> {
    let path = path.as_ref().display().to_string();
    let path = path.as_str();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io {
                path: path.to_string(),
                source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
            },
            _ => Error::MalformedData { path: path.to_string(), message: e.to_string() },
        })?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::MalformedData { path: path.to_string(), message: e.to_string() })?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() {
        return Err(Error::MalformedData { path: path.to_string(), message: "empty file".into() });
    }
    for (i, h) in headers.iter().enumerate() {
        if headers[..i].contains(h) {
            return Err(Error::MalformedData {
                path: path.to_string(),
                message: format!("duplicate column name {h:?}"),
            });
        }
    }

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::MalformedData {
            path: path.to_string(),
            message: format!("row {row}: {e}"),
        })?;
        for (j, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| Error::MalformedData {
                path: path.to_string(),
                message: format!(
                    "row {row}, column {:?}: cannot parse {cell:?} as a number",
                    headers[j]
                ),
            })?;
            columns[j].push(value);
        }
    }
    if columns.first().map_or(true, Vec::is_empty) {
        return Err(Error::MalformedData {
            path: path.to_string(),
            message: "no data rows".into(),
        });
    }
    Dataset::new(headers, columns)
}

/// What to fit: family, response column, and the regressor names entering
/// each equation.  `z_terms` must be empty for base families; for
/// one-inflated families an empty `z_terms` means an intercept-only
/// inflation equation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub response: String,
    pub x_terms: Vec<String>,
    pub z_terms: Vec<String>,
}

/// A ready-to-fit design: validated response, intercept-augmented matrices,
/// and per-column metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignData {
    /// Strictly positive integer response.
    pub y: Vec<u64>,
    /// Count-equation design, first column all ones.
    pub x: DMatrix<f64>,
    /// Inflation-equation design, first column all ones; `0 x 0` for base
    /// families.
    pub z: DMatrix<f64>,
    /// Column names of `x`, starting with `(Intercept)`.
    pub x_names: Vec<String>,
    /// Column names of `z`, starting with `(Intercept)` (empty for base).
    pub z_names: Vec<String>,
    /// Per-column dummy flags for `x` (intercept is `false`).
    pub x_dummy: Vec<bool>,
    /// Per-column dummy flags for `z`.
    pub z_dummy: Vec<bool>,
    /// `y[i] == 1`, precomputed because the likelihoods branch on it.
    pub ones_mask: Vec<bool>,
}

impl DesignData {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Assembles a design from already-built matrices (used by the simulation
    /// harness and tests).  Matrices must already contain their intercept
    /// columns; dummy flags are re-derived from the data.
    pub fn from_parts(
        y: Vec<u64>,
        x: DMatrix<f64>,
        z: DMatrix<f64>,
        x_names: Vec<String>,
        z_names: Vec<String>,
    ) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch { expected: y.len(), actual: x.nrows() });
        }
        if z.ncols() > 0 && z.nrows() != y.len() {
            return Err(Error::DimensionMismatch { expected: y.len(), actual: z.nrows() });
        }
        if x_names.len() != x.ncols() || z_names.len() != z.ncols() {
            return Err(Error::DimensionMismatch {
                expected: x.ncols() + z.ncols(),
                actual: x_names.len() + z_names.len(),
            });
        }
        if y.iter().any(|&v| v == 0) {
            return Err(Error::BadResponse {
                column: "y".into(),
                message: "zero counts present; these models assume zero-truncated data".into(),
            });
        }
        let x_dummy = dummy_flags(&x);
        let z_dummy = dummy_flags(&z);
        let ones_mask = y.iter().map(|&v| v == 1).collect();
        Ok(DesignData { y, x, z, x_names, z_names, x_dummy, z_dummy, ones_mask })
    }

    /// Column means of `x` (the "at means" evaluation row).
    pub fn x_mean_row(&self) -> Vec<f64> {
        column_means(&self.x)
    }

    /// Column means of `z`.
    pub fn z_mean_row(&self) -> Vec<f64> {
        column_means(&self.z)
    }
}

fn column_means(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows().max(1) as f64;
    (0..m.ncols()).map(|j| m.column(j).sum() / n).collect()
}

fn dummy_flags(m: &DMatrix<f64>) -> Vec<bool> {
    (0..m.ncols())
        .map(|j| {
            if j == 0 {
                return false; // intercept
            }
            m.column(j).iter().all(|&v| v == 0.0 || v == 1.0)
        })
        .collect()
}

/// Builds the design for `spec` from a dataset.
///
/// * validates the response: positive integer counts only, with a pointed
///   message when zeros show up (the data are then not truncated);
/// * prepends intercepts to `X` and, for one-inflated families, `Z`;
/// * flags columns whose observed values are all 0/1 as dummies, unless the
///   caller lists them in `continuous` to force derivative-style effects.
pub fn build_design(ds: &Dataset, spec: &ModelSpec, continuous: &[String]) -> Result<DesignData> {
    if !spec.family.is_one_inflated() && !spec.z_terms.is_empty() {
        return Err(Error::BadSpec(format!(
            "family {} has no inflation equation; --z terms {:?} are not allowed",
            spec.family, spec.z_terms
        )));
    }
    for name in continuous {
        if !spec.x_terms.contains(name) && !spec.z_terms.contains(name) {
            return Err(Error::UnknownColumn(name.clone()));
        }
    }

    let raw_y = ds.column(&spec.response)?;
    let mut y = Vec::with_capacity(raw_y.len());
    for (i, &v) in raw_y.iter().enumerate() {
        if !v.is_finite() || v.fract() != 0.0 {
            return Err(Error::BadResponse {
                column: spec.response.clone(),
                message: format!("row {}: {v} is not an integer count", i + 1),
            });
        }
        if v == 0.0 {
            return Err(Error::BadResponse {
                column: spec.response.clone(),
                message: format!(
                    "row {}: zero count found; these models assume the data are \
                     zero-truncated (only positive counts observed)",
                    i + 1
                ),
            });
        }
        if v < 0.0 {
            return Err(Error::BadResponse {
                column: spec.response.clone(),
                message: format!("row {}: negative count {v}", i + 1),
            });
        }
        y.push(v as u64);
    }

    let n = y.len();
    let build = |terms: &[String]| -> Result<(DMatrix<f64>, Vec<String>, Vec<bool>)> {
        let mut m = DMatrix::zeros(n, terms.len() + 1);
        let mut names = Vec::with_capacity(terms.len() + 1);
        let mut dummy = Vec::with_capacity(terms.len() + 1);
        names.push("(Intercept)".to_string());
        dummy.push(false);
        m.column_mut(0).fill(1.0);
        for (j, term) in terms.iter().enumerate() {
            let col = ds.column(term)?;
            for (i, &v) in col.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::MalformedData {
                        path: "<memory>".into(),
                        message: format!("row {}, column {term:?}: non-finite value", i + 1),
                    });
                }
                m[(i, j + 1)] = v;
            }
            names.push(term.clone());
            let is_dummy =
                !continuous.contains(term) && col.iter().all(|&v| v == 0.0 || v == 1.0);
            dummy.push(is_dummy);
        }
        Ok((m, names, dummy))
    };

    let (x, x_names, x_dummy) = build(&spec.x_terms)?;
    let (z, z_names, z_dummy) = if spec.family.is_one_inflated() {
        build(&spec.z_terms)?
    } else {
        (DMatrix::zeros(0, 0), Vec::new(), Vec::new())
    };

    let ones_mask = y.iter().map(|&v| v == 1).collect();
    Ok(DesignData { y, x, z, x_names, z_names, x_dummy, z_dummy, ones_mask })
}
