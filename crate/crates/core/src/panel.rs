//! Price ingestion, cleaning, returns and row normalization.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{self, serde_rows};

/// Close prices for `N` entities over `T + 1` dates.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    pub entities: Vec<String>,
    pub dates: Vec<String>,
    /// `N x (T+1)`; entries under a set mask bit are meaningless (stored as NaN on load).
    pub prices: DMatrix<f64>,
    pub missing_mask: DMatrix<bool>,
}

impl PricePanel {
    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn missing_fraction(&self, row: usize) -> f64 {
        let missing = self.missing_mask.row(row).iter().filter(|&&m| m).count();
        missing as f64 / self.dates.len() as f64
    }

    pub fn is_gap_free(&self) -> bool {
        !self.missing_mask.iter().any(|&m| m)
    }
}

/// `N x T` matrix of dimensionless series, one row per entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPanel {
    pub entities: Vec<String>,
    pub times: Vec<String>,
    #[serde(with = "serde_rows")]
    pub values: DMatrix<f64>,
    /// Decomposition iteration the series belong to.
    pub iteration: usize,
}

impl SeriesPanel {
    pub fn new(entities: Vec<String>, times: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != entities.len() || values.ncols() != times.len() {
            return Err(Error::InvalidArgument(format!(
                "panel shape {}x{} does not match {} entities and {} times",
                values.nrows(),
                values.ncols(),
                entities.len(),
                times.len()
            )));
        }
        Ok(SeriesPanel {
            entities,
            times,
            values,
            iteration: 0,
        })
    }

    /// Panel with generated labels `E0..` and `0..`.
    pub fn from_matrix(values: DMatrix<f64>) -> Self {
        let entities = (0..values.nrows()).map(|i| format!("E{i}")).collect();
        let times = (0..values.ncols()).map(|t| t.to_string()).collect();
        SeriesPanel {
            entities,
            times,
            values,
            iteration: 0,
        }
    }

    pub fn n_entities(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_times(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        stats::row_vec(&self.values, i)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn with_values(&self, values: DMatrix<f64>) -> Self {
        SeriesPanel {
            entities: self.entities.clone(),
            times: self.times.clone(),
            values,
            iteration: self.iteration,
        }
    }

    /// Rows reordered so that output row `i` is input row `order[i]`.
    pub fn select_rows(&self, order: &[usize]) -> Self {
        let values = DMatrix::from_fn(order.len(), self.n_times(), |i, t| {
            self.values[(order[i], t)]
        });
        SeriesPanel {
            entities: order.iter().map(|&i| self.entities[i].clone()).collect(),
            times: self.times.clone(),
            values,
            iteration: self.iteration,
        }
    }

    /// Time columns `start..end`.
    pub fn window(&self, start: usize, end: usize) -> Self {
        SeriesPanel {
            entities: self.entities.clone(),
            times: self.times[start..end].to_vec(),
            values: self.values.columns(start, end - start).into_owned(),
            iteration: self.iteration,
        }
    }

    /// Writes the panel as a wide CSV (`time,ENTITY...`, one row per time).
    /// `header` lines are emitted first, each prefixed with `# `.
    pub fn write_csv(&self, path: &Path, header: &[String]) -> Result<()> {
        let mut out = String::new();
        for line in header {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out.push_str("time");
        for e in &self.entities {
            out.push(',');
            out.push_str(e);
        }
        out.push('\n');
        for (t, label) in self.times.iter().enumerate() {
            out.push_str(label);
            for i in 0..self.n_entities() {
                out.push(',');
                out.push_str(&format!("{:?}", self.values[(i, t)]));
            }
            out.push('\n');
        }
        let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Reads a panel written by [`SeriesPanel::write_csv`]. Every cell must be a finite number.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let table = read_wide_table(path)?;
        let n = table.entities.len();
        let t = table.rows.len();
        let mut values = DMatrix::zeros(n, t);
        for (r, (_, cells)) in table.rows.iter().enumerate() {
            for (c, cell) in cells.iter().enumerate() {
                let v: f64 = cell.trim().parse().map_err(|_| Error::Load {
                    row: table.row_numbers[r],
                    column: c + 2,
                    message: format!("`{cell}` is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Load {
                        row: table.row_numbers[r],
                        column: c + 2,
                        message: "non-finite value".into(),
                    });
                }
                values[(c, r)] = v;
            }
        }
        let times = table.rows.into_iter().map(|(d, _)| d).collect();
        SeriesPanel::new(table.entities, times, values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedEntity {
    pub entity: String,
    pub missing_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcisedEvent {
    pub entity: String,
    pub time: String,
    pub value: f64,
}

/// What the cleaning steps removed or imputed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub dropped_entities: Vec<DroppedEntity>,
    pub excised_events: Vec<ExcisedEvent>,
    /// Cells imputed by forward fill (or back fill for leading gaps).
    pub fill_count: usize,
}

impl CleaningReport {
    pub fn merge(&mut self, other: CleaningReport) {
        self.dropped_entities.extend(other.dropped_entities);
        self.excised_events.extend(other.excised_events);
        self.fill_count += other.fill_count;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriceFormat {
    WideCsv,
}

struct WideTable {
    entities: Vec<String>,
    rows: Vec<(String, Vec<String>)>,
    /// 1-based line numbers in the file, for diagnostics.
    row_numbers: Vec<usize>,
}

fn read_wide_table(path: &Path) -> Result<WideTable> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut records = reader.records();
    let header = match records.next() {
        Some(rec) => rec?,
        None => return Err(Error::Format(format!("{} is empty", path.display()))),
    };
    let header_line = header.position().map_or(1, |p| p.line() as usize);
    if header.len() < 2 {
        return Err(Error::Load {
            row: header_line,
            column: 1,
            message: "header needs a date column and at least one entity".into(),
        });
    }
    let mut entities = Vec::with_capacity(header.len() - 1);
    let mut seen = HashSet::new();
    for (c, id) in header.iter().enumerate().skip(1) {
        let id = id.trim();
        if id.is_empty() {
            return Err(Error::Load {
                row: header_line,
                column: c + 1,
                message: "empty entity id".into(),
            });
        }
        if !seen.insert(id.to_string()) {
            return Err(Error::Load {
                row: header_line,
                column: c + 1,
                message: format!("duplicate entity id `{id}`"),
            });
        }
        entities.push(id.to_string());
    }

    let mut rows = Vec::new();
    let mut row_numbers = Vec::new();
    for rec in records {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != header.len() {
            return Err(Error::Load {
                row: line,
                column: rec.len().min(header.len()) + 1,
                message: format!("expected {} cells, found {}", header.len(), rec.len()),
            });
        }
        let date = rec[0].trim().to_string();
        if date.is_empty() {
            return Err(Error::Load {
                row: line,
                column: 1,
                message: "empty date".into(),
            });
        }
        rows.push((date, rec.iter().skip(1).map(str::to_string).collect()));
        row_numbers.push(line);
    }
    if rows.is_empty() {
        return Err(Error::Format(format!(
            "{} has no data rows",
            path.display()
        )));
    }
    Ok(WideTable {
        entities,
        rows,
        row_numbers,
    })
}

/// Loads a wide price CSV. Empty or unparsable cells become missing; a parsed
/// price that is zero or negative is an error naming the cell.
pub fn load_prices(path: &Path, format: PriceFormat) -> Result<PricePanel> {
    match format {
        PriceFormat::WideCsv => {}
    }
    let table = read_wide_table(path)?;
    let n = table.entities.len();

    let mut parsed: Vec<(String, usize, Vec<Option<f64>>)> = Vec::with_capacity(table.rows.len());
    for (r, (date, cells)) in table.rows.into_iter().enumerate() {
        let line = table.row_numbers[r];
        let mut row = Vec::with_capacity(n);
        for (c, cell) in cells.iter().enumerate() {
            let cell = cell.trim();
            let value = match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => {
                    if v <= 0.0 {
                        return Err(Error::Load {
                            row: line,
                            column: c + 2,
                            message: format!(
                                "non-positive price {cell} for {} on {date}",
                                table.entities[c]
                            ),
                        });
                    }
                    Some(v)
                }
                _ => None,
            };
            row.push(value);
        }
        parsed.push((date, line, row));
    }

    parsed.sort_by(|a, b| a.0.cmp(&b.0));
    for w in parsed.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::Load {
                row: w[1].1,
                column: 1,
                message: format!("duplicate date `{}`", w[1].0),
            });
        }
    }

    let t1 = parsed.len();
    let mut prices = DMatrix::from_element(n, t1, f64::NAN);
    let mut missing_mask = DMatrix::from_element(n, t1, false);
    for (t, (_, _, row)) in parsed.iter().enumerate() {
        for (i, v) in row.iter().enumerate() {
            match v {
                Some(p) => prices[(i, t)] = *p,
                None => missing_mask[(i, t)] = true,
            }
        }
    }
    Ok(PricePanel {
        entities: table.entities,
        dates: parsed.into_iter().map(|(d, _, _)| d).collect(),
        prices,
        missing_mask,
    })
}

/// Drops entities missing more than `max_missing_fraction` of their dates and
/// fills the remaining gaps: forward from the last observed price, leading gaps
/// backward from the first observed price.
pub fn filter_missing(
    panel: &PricePanel,
    max_missing_fraction: f64,
) -> Result<(PricePanel, CleaningReport)> {
    if !(0.0..1.0).contains(&max_missing_fraction) {
        return Err(Error::InvalidArgument(format!(
            "max_missing_fraction must lie in [0, 1), got {max_missing_fraction}"
        )));
    }
    let mut report = CleaningReport::default();
    let mut kept = Vec::new();
    for i in 0..panel.n_entities() {
        let frac = panel.missing_fraction(i);
        if frac > max_missing_fraction {
            report.dropped_entities.push(DroppedEntity {
                entity: panel.entities[i].clone(),
                missing_fraction: frac,
            });
        } else {
            kept.push(i);
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyPanel);
    }

    let t1 = panel.dates.len();
    let mut prices = DMatrix::zeros(kept.len(), t1);
    for (out, &i) in kept.iter().enumerate() {
        let observed: Vec<Option<f64>> = (0..t1)
            .map(|t| (!panel.missing_mask[(i, t)]).then(|| panel.prices[(i, t)]))
            .collect();
        // Not reachable with threshold < 1, but keeps the loop total.
        let first = observed
            .iter()
            .flatten()
            .next()
            .copied()
            .ok_or(Error::EmptyPanel)?;
        let mut last = first;
        for (t, v) in observed.iter().enumerate() {
            match v {
                Some(p) => last = *p,
                None => report.fill_count += 1,
            }
            prices[(out, t)] = last;
        }
    }

    Ok((
        PricePanel {
            entities: kept.iter().map(|&i| panel.entities[i].clone()).collect(),
            dates: panel.dates.clone(),
            prices,
            missing_mask: DMatrix::from_element(kept.len(), t1, false),
        },
        report,
    ))
}

/// Fractional daily change `(P_t - P_{t-1}) / P_{t-1}`.
pub fn log_returns(panel: &PricePanel) -> Result<SeriesPanel> {
    if !panel.is_gap_free() {
        return Err(Error::InvalidArgument(
            "price panel has gaps; run filter_missing first".into(),
        ));
    }
    let t1 = panel.dates.len();
    if t1 < 2 {
        return Err(Error::InvalidArgument(
            "need at least two dates to form returns".into(),
        ));
    }
    let n = panel.n_entities();
    let mut values = DMatrix::zeros(n, t1 - 1);
    for i in 0..n {
        for t in 1..t1 {
            let prev = panel.prices[(i, t - 1)];
            if prev == 0.0 {
                return Err(Error::ZeroDenominator {
                    entity: panel.entities[i].clone(),
                    time: panel.dates[t].clone(),
                });
            }
            values[(i, t - 1)] = (panel.prices[(i, t)] - prev) / prev;
        }
    }
    SeriesPanel::new(panel.entities.clone(), panel.dates[1..].to_vec(), values)
}

/// Zeroes every entry with `|value| >= threshold`.
pub fn clean_extremes(
    panel: &SeriesPanel,
    threshold: f64,
) -> Result<(SeriesPanel, CleaningReport)> {
    if threshold <= 0.0 || threshold.is_nan() {
        return Err(Error::InvalidArgument(format!(
            "extreme-event threshold must be positive, got {threshold}"
        )));
    }
    let mut values = panel.values.clone();
    let mut report = CleaningReport::default();
    for i in 0..panel.n_entities() {
        for t in 0..panel.n_times() {
            let v = values[(i, t)];
            if v.abs() >= threshold {
                report.excised_events.push(ExcisedEvent {
                    entity: panel.entities[i].clone(),
                    time: panel.times[t].clone(),
                    value: v,
                });
                values[(i, t)] = 0.0;
            }
        }
    }
    Ok((panel.with_values(values), report))
}

/// Per-row `(x - mean) / sd`. Returns the means and sds needed to invert.
pub fn normalize_rows(panel: &SeriesPanel) -> Result<(SeriesPanel, Vec<f64>, Vec<f64>)> {
    let n = panel.n_entities();
    let mut values = panel.values.clone();
    let mut means = Vec::with_capacity(n);
    let mut sds = Vec::with_capacity(n);
    for i in 0..n {
        let row = panel.row(i);
        let m = stats::mean(&row);
        let s = stats::sample_sd(&row);
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::DegenerateSeries {
                entity: panel.entities[i].clone(),
            });
        }
        for (t, v) in row.iter().enumerate() {
            values[(i, t)] = (v - m) / s;
        }
        means.push(m);
        sds.push(s);
    }
    Ok((panel.with_values(values), means, sds))
}

/// Inverse of [`normalize_rows`]: `x * sd + mean` per row.
pub fn denormalize_rows(panel: &SeriesPanel, means: &[f64], sds: &[f64]) -> SeriesPanel {
    let mut values = panel.values.clone();
    for i in 0..panel.n_entities() {
        for t in 0..panel.n_times() {
            values[(i, t)] = values[(i, t)] * sds[i] + means[i];
        }
    }
    panel.with_values(values)
}
