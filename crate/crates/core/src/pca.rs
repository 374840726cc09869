//! Correlation-matrix PCA over a region-by-feature matrix.

use std::collections::HashSet;
use std::io::Read;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

pub const DEFAULT_MAX_MISSING_FRAC: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PcaError {
    #[error("fewer than 2 usable columns remain ({remaining})")]
    NothingLeft { remaining: usize },
    #[error("column {0:?} has zero variance")]
    DegenerateColumn(String),
    #[error("eigen-solver did not converge")]
    ConvergenceFailure,
    #[error("k = {k} is outside 1..={columns}")]
    InvalidK { k: usize, columns: usize },
    #[error("{labels} labels for {rows} rows")]
    LabelCountMismatch { labels: usize, rows: usize },
    #[error("matrix still has missing cells; clean it first")]
    MissingCells,
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("invalid feature matrix: {0}")]
    Invalid(String),
    #[error("malformed CSV at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
}

/// Row-major matrix of optional feature values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    row_labels: Vec<String>,
    columns: Vec<String>,
    rows: Vec<Vec<Option<f64>>>,
}

impl FeatureMatrix {
    pub fn new(row_labels: Vec<String>, columns: Vec<String>, rows: Vec<Vec<Option<f64>>>) -> Result<Self, PcaError> {
        if row_labels.len() != rows.len() {
            return Err(PcaError::Invalid(format!(
                "{} labels for {} rows",
                row_labels.len(),
                rows.len()
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = columns.iter().find(|c| !seen.insert(c.as_str())) {
            return Err(PcaError::Invalid(format!("duplicate column {dup:?}")));
        }
        if let Some(r) = rows.iter().position(|r| r.len() != columns.len()) {
            return Err(PcaError::Invalid(format!(
                "row {r} has {} cells, expected {}",
                rows[r].len(),
                columns.len()
            )));
        }
        if rows.iter().flatten().flatten().any(|v| !v.is_finite()) {
            return Err(PcaError::Invalid("non-finite cell".into()));
        }
        Ok(Self {
            row_labels,
            columns,
            rows,
        })
    }

    /// Builds a complete matrix from plain rows.
    pub fn from_complete(row_labels: Vec<String>, columns: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, PcaError> {
        let rows = rows.into_iter().map(|r| r.into_iter().map(Some).collect()).collect();
        Self::new(row_labels, columns, rows)
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.rows[row][col]
    }

    pub fn is_complete(&self) -> bool {
        self.rows.iter().flatten().all(Option::is_some)
    }
}

/// Parses `<label>,<feature>,...` with one region per row; empty or `NA`
/// cells are missing.
pub fn parse_feature_csv<R: Read>(raw: R) -> Result<FeatureMatrix, PcaError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(raw);
    let mal = |e: csv::Error| PcaError::MalformedRow {
        line: e.position().map_or(0, |p| p.line()),
        reason: e.to_string(),
    };
    let headers = rdr.headers().map_err(mal)?.clone();
    if headers.len() < 2 {
        return Err(PcaError::MalformedRow {
            line: 1,
            reason: "need a label column and at least one feature".into(),
        });
    }
    let columns: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(mal)?;
        let line = rec.position().map_or(0, |p| p.line());
        labels.push(rec[0].to_string());
        let mut row = Vec::with_capacity(columns.len());
        for cell in rec.iter().skip(1) {
            if cell.is_empty() || cell == "NA" {
                row.push(None);
            } else {
                let v: f64 =
                    cell.parse()
                        .ok()
                        .filter(|v: &f64| v.is_finite())
                        .ok_or_else(|| PcaError::MalformedRow {
                            line,
                            reason: format!("{cell:?} is not a finite number"),
                        })?;
                row.push(Some(v));
            }
        }
        rows.push(row);
    }
    FeatureMatrix::new(labels, columns, rows)
}

/// Drops columns missing more than `max_missing_frac` of their cells and
/// fills the remaining gaps with the column mean.
pub fn clean_matrix(m: &FeatureMatrix, max_missing_frac: f64) -> Result<FeatureMatrix, PcaError> {
    assert!(
        (0.0..1.0).contains(&max_missing_frac),
        "max_missing_frac must be in [0, 1)"
    );
    let n = m.n_rows();
    let mut keep = Vec::new();
    for c in 0..m.n_cols() {
        let missing = (0..n).filter(|&r| m.rows[r][c].is_none()).count();
        if n > 0 && missing < n && missing as f64 / n as f64 <= max_missing_frac {
            keep.push(c);
        }
    }
    if keep.len() < 2 {
        return Err(PcaError::NothingLeft { remaining: keep.len() });
    }
    let means: Vec<f64> = keep
        .iter()
        .map(|&c| {
            let obs: Vec<f64> = (0..n).filter_map(|r| m.rows[r][c]).collect();
            obs.iter().sum::<f64>() / obs.len() as f64
        })
        .collect();
    let rows = m
        .rows
        .iter()
        .map(|row| {
            keep.iter()
                .zip(&means)
                .map(|(&c, &mu)| Some(row[c].unwrap_or(mu)))
                .collect()
        })
        .collect();
    Ok(FeatureMatrix {
        row_labels: m.row_labels.clone(),
        columns: keep.iter().map(|&c| m.columns[c].clone()).collect(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    pub columns: Vec<String>,
    pub row_labels: Vec<String>,
    /// `k` unit vectors, each of length `columns.len()`.
    pub components: Vec<Vec<f64>>,
    /// All eigenvalues of the correlation matrix, non-increasing.
    pub eigenvalues: Vec<f64>,
    /// Share of total variance for each kept component.
    pub explained_ratio: Vec<f64>,
    /// Row coordinates, `n_rows x k`.
    pub projected: Vec<Vec<f64>>,
    pub reconstruction_mse: f64,
}

/// Column-standardizes a complete matrix (sample standard deviation).
pub fn standardize(m: &FeatureMatrix) -> Result<DMatrix<f64>, PcaError> {
    if !m.is_complete() {
        return Err(PcaError::MissingCells);
    }
    let n = m.n_rows();
    if n < 2 {
        return Err(PcaError::TooFewRows(n));
    }
    let p = m.n_cols();
    let mut z = DMatrix::from_fn(n, p, |r, c| m.rows[r][c].expect("complete"));
    for c in 0..p {
        let mut col = z.column_mut(c);
        let mean = col.mean();
        col.add_scalar_mut(-mean);
        let sd = (col.norm_squared() / (n - 1) as f64).sqrt();
        if sd == 0.0 || !sd.is_finite() {
            return Err(PcaError::DegenerateColumn(m.columns[c].clone()));
        }
        col /= sd;
    }
    Ok(z)
}

/// Rank-`k` principal components of the correlation matrix.
pub fn pca_fit(m: &FeatureMatrix, k: usize) -> Result<PcaResult, PcaError> {
    let p = m.n_cols();
    if k == 0 || k > p {
        return Err(PcaError::InvalidK { k, columns: p });
    }
    let z = standardize(m)?;
    let n = z.nrows();
    let corr = (z.transpose() * &z) / (n - 1) as f64;
    let eig = SymmetricEigen::try_new(corr, 1e-14, 10_000).ok_or(PcaError::ConvergenceFailure)?;

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = eigenvalues.iter().sum();

    let mut components = Vec::with_capacity(k);
    for &i in order.iter().take(k) {
        let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().cloned().collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        // largest-magnitude entry positive; first such entry on ties
        let pivot = v
            .iter()
            .enumerate()
            .fold(0, |best, (j, x)| if x.abs() > v[best].abs() { j } else { best });
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
    }

    let basis = DMatrix::from_fn(p, k, |r, c| components[c][r]);
    let scores = &z * &basis;
    let recon = &scores * basis.transpose();
    let reconstruction_mse = (&z - recon).norm_squared() / (n * p) as f64;

    Ok(PcaResult {
        columns: m.columns.clone(),
        row_labels: m.row_labels.clone(),
        explained_ratio: eigenvalues.iter().take(k).map(|e| e / total).collect(),
        eigenvalues,
        projected: (0..n).map(|r| scores.row(r).iter().cloned().collect()).collect(),
        components,
        reconstruction_mse,
    })
}

/// Scatter CSV: `region_code,pc1..pck`.
pub fn pca_project_export<S: AsRef<str>>(result: &PcaResult, labels: &[S]) -> Result<String, PcaError> {
    if labels.len() != result.projected.len() {
        return Err(PcaError::LabelCountMismatch {
            labels: labels.len(),
            rows: result.projected.len(),
        });
    }
    let k = result.components.len();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["region_code".to_string()];
    header.extend((1..=k).map(|i| format!("pc{i}")));
    let io = |e: csv::Error| PcaError::Invalid(e.to_string());
    w.write_record(&header).map_err(io)?;
    for (label, row) in labels.iter().zip(&result.projected) {
        let mut rec = vec![label.as_ref().to_string()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| PcaError::Invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Parses a scatter CSV written by [`pca_project_export`].
pub fn parse_projection_csv<R: Read>(raw: R) -> Result<Vec<(String, Vec<f64>)>, PcaError> {
    let m = parse_feature_csv(raw)?;
    Ok((0..m.n_rows())
        .map(|r| {
            let coords = (0..m.n_cols()).map(|c| m.get(r, c).unwrap_or(f64::NAN)).collect();
            (m.row_labels[r].clone(), coords)
        })
        .collect())
}
