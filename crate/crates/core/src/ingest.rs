//! CSV ingestion of regional monthly index series and covariate tables.
//!
//! Two series layouts are accepted:
//!
//! * long: `Date,RegionCode,RegionName,Value`, one observation per row;
//! * wide: `RegionCode,RegionName,<YYYY-MM>,...`, one region per row.
//!
//! Empty cells and the literal `NA` mark missing observations. Parsing
//! yields [`GappySeries`] (missing months explicit); [`fill_gaps`] turns
//! those into gap-free [`MonthlySeries`].

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::month::YearMonth;

pub const DEFAULT_MAX_GAP: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("input contains no data rows")]
    EmptyInput,
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("duplicate observation for region {region} at {month}")]
    DuplicateObservation { region: String, month: YearMonth },
    #[error("region {region}: interior gap of {len} months starting {start} exceeds max_gap {max_gap}")]
    GapTooLarge {
        region: String,
        start: YearMonth,
        len: usize,
        max_gap: usize,
    },
    #[error("region {region}: no observed values")]
    NoObservations { region: String },
    #[error("{kind} value {value} for region {region} is out of range")]
    OutOfRange {
        kind: CovariateKind,
        region: String,
        value: f64,
    },
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("invalid series for region {region}: {reason}")]
    InvalidSeries { region: String, reason: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionLevel {
    Metro,
    State,
}

/// Identity of a region: CBSA code (metros) or two-letter abbreviation (states).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RegionId {
    code: String,
    name: String,
    level: RegionLevel,
}

impl RegionId {
    /// Builds a region, inferring the level from the code: two ASCII
    /// uppercase letters make a state, anything else a metro.
    pub fn new(code: impl Into<String>, name: impl Into<String>) -> Result<Self, IngestError> {
        let code = code.into().trim().to_string();
        let name = name.into().trim().to_string();
        if code.is_empty() {
            return Err(IngestError::InvalidRegion("empty region code".into()));
        }
        let level = if code.len() == 2 && code.bytes().all(|b| b.is_ascii_uppercase()) {
            RegionLevel::State
        } else {
            RegionLevel::Metro
        };
        Ok(Self { code, name, level })
    }

    pub fn code(&self) -> &str {
        &self.code
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn level(&self) -> RegionLevel {
        self.level
    }

    /// State abbreviation: the code itself for states, otherwise the first
    /// state of the `", XX"` suffix in a metro name (`"Aberdeen, WA"`,
    /// `"New York, NY-NJ-PA"`).
    pub fn state(&self) -> Option<&str> {
        match self.level {
            RegionLevel::State => Some(&self.code),
            RegionLevel::Metro => {
                let (_, suffix) = self.name.rsplit_once(", ")?;
                let st = suffix.get(..2)?;
                let valid = st.bytes().all(|b| b.is_ascii_uppercase())
                    && !suffix[2..].chars().next().is_some_and(|c| c != '-' && c != ' ');
                valid.then_some(st)
            }
        }
    }
}

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.name.is_empty() {
            write!(f, "{}", self.code)
        } else {
            write!(f, "{} ({})", self.name, self.code)
        }
    }
}

/// Gap-free monthly series of non-negative, finite index values.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthlySeries {
    region: RegionId,
    start: YearMonth,
    values: Vec<f64>,
}

impl MonthlySeries {
    pub fn new(region: RegionId, start: YearMonth, values: Vec<f64>) -> Result<Self, IngestError> {
        let invalid = |reason: String| IngestError::InvalidSeries {
            region: region.code().to_string(),
            reason,
        };
        if values.is_empty() {
            return Err(invalid("series is empty".into()));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(invalid(format!(
                "value {v} at {} is not a finite non-negative number",
                start.plus(i as i32)
            )));
        }
        Ok(Self { region, start, values })
    }

    pub fn region(&self) -> &RegionId {
        &self.region
    }

    pub fn start(&self) -> YearMonth {
        self.start
    }

    /// Last month covered.
    pub fn end(&self) -> YearMonth {
        self.start.plus(self.values.len() as i32 - 1)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn month_at(&self, index: usize) -> YearMonth {
        self.start.plus(index as i32)
    }

    /// Index of `month`, if covered.
    pub fn index_of(&self, month: YearMonth) -> Option<usize> {
        let off = month.months_since(self.start);
        (off >= 0 && (off as usize) < self.values.len()).then_some(off as usize)
    }

    /// Contiguous sub-range `[from, to)` by index. Panics on an empty or
    /// out-of-bounds range.
    pub fn slice(&self, from: usize, to: usize) -> MonthlySeries {
        assert!(from < to && to <= self.values.len(), "invalid slice {from}..{to}");
        MonthlySeries {
            region: self.region.clone(),
            start: self.month_at(from),
            values: self.values[from..to].to_vec(),
        }
    }

    /// Same region and months with every value transformed.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<MonthlySeries, IngestError> {
        MonthlySeries::new(
            self.region.clone(),
            self.start,
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }
}

/// Monthly series where some months may be missing.
#[derive(Debug, Clone, PartialEq)]
pub struct GappySeries {
    pub region: RegionId,
    pub start: YearMonth,
    pub values: Vec<Option<f64>>,
}

impl From<MonthlySeries> for GappySeries {
    fn from(s: MonthlySeries) -> Self {
        GappySeries {
            start: s.start,
            values: s.values.into_iter().map(Some).collect(),
            region: s.region,
        }
    }
}

impl GappySeries {
    pub fn observed_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schema {
    #[default]
    Long,
    Wide,
}

/// Interpolates interior gaps of at most `max_gap` months and trims
/// leading/trailing missing months. Observed values are never altered.
pub fn fill_gaps(series: &GappySeries, max_gap: usize) -> Result<MonthlySeries, IngestError> {
    let region = series.region.code().to_string();
    let first = series.values.iter().position(Option::is_some);
    let last = series.values.iter().rposition(Option::is_some);
    let (first, last) = match (first, last) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(IngestError::NoObservations { region }),
    };

    let core = &series.values[first..=last];
    let mut out = Vec::with_capacity(core.len());
    let mut prev: Option<(usize, f64)> = None;
    for (i, v) in core.iter().enumerate() {
        let Some(v) = *v else { continue };
        if let Some((pi, pv)) = prev {
            let gap = i - pi - 1;
            if gap > max_gap {
                return Err(IngestError::GapTooLarge {
                    region,
                    start: series.start.plus((first + pi + 1) as i32),
                    len: gap,
                    max_gap,
                });
            }
            let span = (i - pi) as f64;
            for step in 1..=gap {
                out.push(pv + (v - pv) * step as f64 / span);
            }
        }
        out.push(v);
        prev = Some((i, v));
    }
    MonthlySeries::new(series.region.clone(), series.start.plus(first as i32), out)
}

/// Parses a value cell. `Ok(None)` for a missing cell.
fn parse_value(cell: &str) -> Result<Option<f64>, String> {
    let cell = cell.trim();
    if cell.is_empty() || cell == "NA" {
        return Ok(None);
    }
    if cell.contains(',') {
        return Err(format!("value {cell:?} contains a thousands separator"));
    }
    let v: f64 = cell.parse().map_err(|_| format!("value {cell:?} is not a number"))?;
    if !v.is_finite() {
        return Err(format!("value {cell:?} is not finite"));
    }
    if v < 0.0 {
        return Err(format!("value {cell:?} is negative"));
    }
    Ok(Some(v))
}

fn csv_reader<R: Read>(raw: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(raw)
}

fn map_csv_err(e: csv::Error) -> IngestError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => IngestError::Io(io),
        other => IngestError::MalformedRow {
            line,
            reason: format!("{other:?}"),
        },
    }
}

fn expect_header(headers: &csv::StringRecord, expected: &[&str]) -> Result<(), IngestError> {
    let got: Vec<&str> = headers.iter().take(expected.len()).collect();
    if got != expected {
        return Err(IngestError::MalformedRow {
            line: 1,
            reason: format!("expected header starting {expected:?}, found {got:?}"),
        });
    }
    Ok(())
}

struct RegionCells {
    region: RegionId,
    cells: BTreeMap<YearMonth, Option<f64>>,
}

impl RegionCells {
    fn insert(&mut self, month: YearMonth, value: Option<f64>) -> Result<(), IngestError> {
        if self.cells.insert(month, value).is_some() {
            return Err(IngestError::DuplicateObservation {
                region: self.region.code().to_string(),
                month,
            });
        }
        Ok(())
    }

    fn into_gappy(self) -> GappySeries {
        let start = *self.cells.keys().next().expect("at least one cell");
        let end = *self.cells.keys().next_back().expect("at least one cell");
        let mut values = vec![None; end.months_since(start) as usize + 1];
        for (m, v) in self.cells {
            values[m.months_since(start) as usize] = v;
        }
        GappySeries {
            region: self.region,
            start,
            values,
        }
    }
}

fn entry<'a>(
    regions: &'a mut BTreeMap<String, RegionCells>,
    code: &str,
    name: &str,
    line: u64,
) -> Result<&'a mut RegionCells, IngestError> {
    if !regions.contains_key(code) {
        let region = RegionId::new(code, name).map_err(|e| IngestError::MalformedRow {
            line,
            reason: e.to_string(),
        })?;
        regions.insert(
            code.to_string(),
            RegionCells {
                region,
                cells: BTreeMap::new(),
            },
        );
    }
    Ok(regions.get_mut(code).expect("just inserted"))
}

/// Parses series CSV into per-region series with explicit gaps, ordered by
/// region code.
pub fn parse_series_table<R: Read>(raw: R, schema: Schema) -> Result<Vec<GappySeries>, IngestError> {
    let mut rdr = csv_reader(raw);
    let headers = rdr.headers().map_err(map_csv_err)?.clone();
    let mut regions: BTreeMap<String, RegionCells> = BTreeMap::new();

    match schema {
        Schema::Long => {
            expect_header(&headers, &["Date", "RegionCode", "RegionName", "Value"])?;
            for rec in rdr.records() {
                let rec = rec.map_err(map_csv_err)?;
                let line = rec.position().map_or(0, |p| p.line());
                let malformed = |reason: String| IngestError::MalformedRow { line, reason };
                if rec.len() != 4 {
                    return Err(malformed(format!("expected 4 fields, found {}", rec.len())));
                }
                let month: YearMonth = rec[0]
                    .parse()
                    .map_err(|e: crate::month::ParseMonthError| malformed(e.to_string()))?;
                let value = parse_value(&rec[3]).map_err(malformed)?;
                entry(&mut regions, &rec[1], &rec[2], line)?.insert(month, value)?;
            }
        }
        Schema::Wide => {
            expect_header(&headers, &["RegionCode", "RegionName"])?;
            let mut months = Vec::with_capacity(headers.len().saturating_sub(2));
            for h in headers.iter().skip(2) {
                let m: YearMonth = h
                    .parse()
                    .map_err(|e: crate::month::ParseMonthError| IngestError::MalformedRow {
                        line: 1,
                        reason: e.to_string(),
                    })?;
                months.push(m);
            }
            for rec in rdr.records() {
                let rec = rec.map_err(map_csv_err)?;
                let line = rec.position().map_or(0, |p| p.line());
                let cells = entry(&mut regions, &rec[0], &rec[1], line)?;
                for (m, cell) in months.iter().zip(rec.iter().skip(2)) {
                    let value = parse_value(cell).map_err(|reason| IngestError::MalformedRow { line, reason })?;
                    cells.insert(*m, value)?;
                }
            }
        }
    }

    if regions.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    Ok(regions
        .into_values()
        .filter(|r| !r.cells.is_empty())
        .map(RegionCells::into_gappy)
        .collect())
}

/// Parses series CSV and fills gaps; any region that cannot be filled
/// fails the whole parse. See [`parse_series_table`] for a lenient path.
pub fn parse_series_csv<R: Read>(raw: R, schema: Schema, max_gap: usize) -> Result<Vec<MonthlySeries>, IngestError> {
    parse_series_table(raw, schema)?
        .iter()
        .map(|g| fill_gaps(g, max_gap))
        .collect()
}

/// Writes series in the long layout.
pub fn write_long_csv<W: Write>(series: &[MonthlySeries], out: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| IngestError::Io(std::io::Error::other(e));
    w.write_record(["Date", "RegionCode", "RegionName", "Value"])
        .map_err(err)?;
    for s in series {
        for (i, v) in s.values().iter().enumerate() {
            w.write_record([
                s.month_at(i).to_string(),
                s.region().code().to_string(),
                s.region().name().to_string(),
                v.to_string(),
            ])
            .map_err(err)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CovariateKind {
    Population,
    UnemploymentRate,
}

impl CovariateKind {
    pub fn label(self) -> &'static str {
        match self {
            CovariateKind::Population => "population",
            CovariateKind::UnemploymentRate => "unemployment",
        }
    }

    fn in_range(self, v: f64) -> bool {
        match self {
            CovariateKind::Population => v > 0.0,
            CovariateKind::UnemploymentRate => (0.0..=100.0).contains(&v),
        }
    }
}

impl fmt::Display for CovariateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Scalar covariate per region code.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateTable {
    pub kind: CovariateKind,
    pub entries: BTreeMap<String, f64>,
}

impl CovariateTable {
    pub fn new(kind: CovariateKind, entries: BTreeMap<String, f64>) -> Result<Self, IngestError> {
        if let Some((code, &value)) = entries.iter().find(|(_, v)| !kind.in_range(**v)) {
            return Err(IngestError::OutOfRange {
                kind,
                region: code.clone(),
                value,
            });
        }
        Ok(Self { kind, entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Parses a `RegionCode,Value` table.
pub fn parse_covariates_csv<R: Read>(raw: R, kind: CovariateKind) -> Result<CovariateTable, IngestError> {
    let mut rdr = csv_reader(raw);
    let headers = rdr.headers().map_err(map_csv_err)?.clone();
    expect_header(&headers, &["RegionCode", "Value"])?;
    let mut entries = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(map_csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let malformed = |reason: String| IngestError::MalformedRow { line, reason };
        if rec.len() != 2 {
            return Err(malformed(format!("expected 2 fields, found {}", rec.len())));
        }
        let code = rec[0].to_string();
        if code.is_empty() {
            return Err(malformed("empty region code".into()));
        }
        let cell = rec[1].trim();
        let value: f64 = cell
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| malformed(format!("value {cell:?} is not a finite number")))?;
        if !kind.in_range(value) {
            return Err(IngestError::OutOfRange {
                kind,
                region: code,
                value,
            });
        }
        if entries.insert(code.clone(), value).is_some() {
            return Err(malformed(format!("duplicate region {code}")));
        }
    }
    if entries.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    Ok(CovariateTable { kind, entries })
}
