//! State-by-year value grids: pooled yearly means and year-over-year
//! differences.

use std::collections::BTreeMap;
use std::io::Read;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::ingest::{MonthlySeries, RegionId};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChoroplethError {
    #[error("need at least 2 year columns, got {0}")]
    TooFewYears(usize),
    #[error("expected a {expected:?} grid")]
    WrongKind { expected: GridKind },
    #[error("empty year range")]
    EmptyYears,
    #[error("malformed grid CSV at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridKind {
    Level,
    YearDiff,
}

/// `values[state][year - first_year]`; `None` marks an absent cell.
#[derive(Debug, Clone, PartialEq)]
pub struct StateYearGrid {
    pub kind: GridKind,
    pub states: Vec<String>,
    pub first_year: i32,
    pub values: Vec<Vec<Option<f64>>>,
    /// Observations pooled into each level cell; zero for difference grids.
    pub counts: Vec<Vec<usize>>,
}

impl StateYearGrid {
    pub fn n_years(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn years(&self) -> RangeInclusive<i32> {
        self.first_year..=self.first_year + self.n_years() as i32 - 1
    }

    pub fn get(&self, state: &str, year: i32) -> Option<f64> {
        let s = self.states.iter().position(|x| x == state)?;
        let y = usize::try_from(year - self.first_year).ok()?;
        self.values[s].get(y).copied().flatten()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateYearMeans {
    pub grid: StateYearGrid,
    /// Regions with no resolvable state.
    pub unmapped: Vec<RegionId>,
}

/// State for a region: explicit mapping first, then the name suffix.
pub fn state_of(region: &RegionId, mapping: Option<&BTreeMap<String, String>>) -> Option<String> {
    if let Some(st) = mapping.and_then(|m| m.get(region.code())) {
        return Some(st.clone());
    }
    region.state().map(str::to_string)
}

/// Pools every monthly value of every metro in a state within each
/// calendar year, weighting observations equally.
pub fn state_year_means(
    series: &[MonthlySeries],
    years: RangeInclusive<i32>,
    mapping: Option<&BTreeMap<String, String>>,
) -> Result<StateYearMeans, ChoroplethError> {
    if years.is_empty() {
        return Err(ChoroplethError::EmptyYears);
    }
    let first = *years.start();
    let n_years = (years.end() - first + 1) as usize;
    let mut sums: BTreeMap<String, (Vec<f64>, Vec<usize>)> = BTreeMap::new();
    let mut unmapped = Vec::new();
    for s in series {
        let Some(state) = state_of(s.region(), mapping) else {
            unmapped.push(s.region().clone());
            continue;
        };
        let (sum, count) = sums
            .entry(state)
            .or_insert_with(|| (vec![0.0; n_years], vec![0; n_years]));
        for (i, v) in s.values().iter().enumerate() {
            let year = s.month_at(i).year();
            if years.contains(&year) {
                let y = (year - first) as usize;
                sum[y] += v;
                count[y] += 1;
            }
        }
    }
    let mut grid = StateYearGrid {
        kind: GridKind::Level,
        states: Vec::with_capacity(sums.len()),
        first_year: first,
        values: Vec::with_capacity(sums.len()),
        counts: Vec::with_capacity(sums.len()),
    };
    for (state, (sum, count)) in sums {
        grid.values.push(
            sum.iter()
                .zip(&count)
                .map(|(s, &c)| (c > 0).then(|| s / c as f64))
                .collect(),
        );
        grid.states.push(state);
        grid.counts.push(count);
    }
    Ok(StateYearMeans { grid, unmapped })
}

/// `diff[y] = level[y + 1] - level[y]`, dated at year `y + 1`.
pub fn year_diffs(grid: &StateYearGrid) -> Result<StateYearGrid, ChoroplethError> {
    if grid.kind != GridKind::Level {
        return Err(ChoroplethError::WrongKind {
            expected: GridKind::Level,
        });
    }
    let n = grid.n_years();
    if n < 2 {
        return Err(ChoroplethError::TooFewYears(n));
    }
    let values = grid
        .values
        .iter()
        .map(|row| row.windows(2).map(|w| Some(w[1]? - w[0]?)).collect())
        .collect();
    Ok(StateYearGrid {
        kind: GridKind::YearDiff,
        states: grid.states.clone(),
        first_year: grid.first_year + 1,
        values,
        counts: vec![vec![0; n - 1]; grid.states.len()],
    })
}

/// Rebuilds a level grid from its differences and the first level column.
pub fn integrate_diffs(diffs: &StateYearGrid, first_column: &[Option<f64>]) -> Result<StateYearGrid, ChoroplethError> {
    if diffs.kind != GridKind::YearDiff {
        return Err(ChoroplethError::WrongKind {
            expected: GridKind::YearDiff,
        });
    }
    let values: Vec<Vec<Option<f64>>> = diffs
        .values
        .iter()
        .zip(first_column)
        .map(|(row, &start)| {
            let mut out = vec![start];
            let mut acc = start;
            for d in row {
                acc = match (acc, d) {
                    (Some(a), Some(d)) => Some(a + d),
                    _ => None,
                };
                out.push(acc);
            }
            out
        })
        .collect();
    let n = values.first().map_or(0, Vec::len);
    Ok(StateYearGrid {
        kind: GridKind::Level,
        states: diffs.states.clone(),
        first_year: diffs.first_year - 1,
        counts: vec![vec![0; n]; values.len()],
        values,
    })
}

/// Grid CSV with header `state,<year>,...`; absent cells are empty.
pub fn export_grid(grid: &StateYearGrid, clamp: Option<(f64, f64)>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["state".to_string()];
    header.extend(grid.years().map(|y| y.to_string()));
    w.write_record(&header).expect("write to memory");
    for (state, row) in grid.states.iter().zip(&grid.values) {
        let mut rec = vec![state.clone()];
        rec.extend(row.iter().map(|v| match (v, clamp) {
            (None, _) => String::new(),
            (Some(v), Some((lo, hi))) => v.clamp(lo, hi).to_string(),
            (Some(v), None) => v.to_string(),
        }));
        w.write_record(&rec).expect("write to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv output is utf-8")
}

pub fn parse_grid<R: Read>(raw: R, kind: GridKind) -> Result<StateYearGrid, ChoroplethError> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(raw);
    let mal = |line: u64, reason: String| ChoroplethError::MalformedRow { line, reason };
    let headers = rdr.headers().map_err(|e| mal(1, e.to_string()))?.clone();
    if headers.get(0) != Some("state") {
        return Err(mal(1, "first column must be `state`".into()));
    }
    let years: Vec<i32> = headers
        .iter()
        .skip(1)
        .map(|h| h.parse().map_err(|_| mal(1, format!("bad year {h:?}"))))
        .collect::<Result<_, _>>()?;
    let first_year = *years.first().ok_or_else(|| mal(1, "no year columns".into()))?;
    if years.iter().enumerate().any(|(i, y)| *y != first_year + i as i32) {
        return Err(mal(1, "year columns must be consecutive".into()));
    }
    let mut grid = StateYearGrid {
        kind,
        states: Vec::new(),
        first_year,
        values: Vec::new(),
        counts: Vec::new(),
    };
    for rec in rdr.records() {
        let rec = rec.map_err(|e| mal(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        grid.states.push(rec[0].to_string());
        let row = rec
            .iter()
            .skip(1)
            .map(|c| {
                if c.is_empty() {
                    Ok(None)
                } else {
                    c.parse().map(Some).map_err(|_| mal(line, format!("bad value {c:?}")))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        grid.values.push(row);
        grid.counts.push(vec![0; years.len()]);
    }
    Ok(grid)
}

/// Parses a `RegionCode,State` mapping file.
pub fn parse_state_mapping<R: Read>(raw: R) -> Result<BTreeMap<String, String>, ChoroplethError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(raw);
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| ChoroplethError::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        if rec.len() != 2 {
            return Err(ChoroplethError::MalformedRow {
                line: rec.position().map_or(0, |p| p.line()),
                reason: "expected RegionCode,State".into(),
            });
        }
        out.insert(rec[0].to_string(), rec[1].to_string());
    }
    Ok(out)
}
