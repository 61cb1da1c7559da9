//! Dataset ingestion, feature bounds and equal-frequency discretization.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary-labelled continuous data, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<Vec<f64>>,
    labels: Vec<u8>,
    feature_names: Vec<String>,
    /// Original label text for class 0 and class 1.
    class_names: [String; 2],
}

impl Dataset {
    /// Builds a dataset after checking every invariant: equal row counts,
    /// labels in {0,1}, both classes with at least two rows, finite values.
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<u8>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        Self::with_class_names(features, labels, feature_names, ["0".into(), "1".into()])
    }

    pub fn with_class_names(
        features: Vec<Vec<f64>>,
        labels: Vec<u8>,
        feature_names: Vec<String>,
        class_names: [String; 2],
    ) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.len(),
                got: labels.len(),
            });
        }
        let n = feature_names.len();
        if n == 0 {
            return Err(Error::InvalidArgument("dataset has no feature columns".into()));
        }
        for (r, row) in features.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("row {r}")));
            }
        }
        let mut counts = [0usize; 2];
        for &l in &labels {
            match l {
                0 | 1 => counts[l as usize] += 1,
                other => {
                    return Err(Error::InvalidArgument(format!("label {other} is not 0 or 1")))
                }
            }
        }
        let present = counts.iter().filter(|&&c| c > 0).count();
        if present < 2 {
            return Err(Error::SingleClass { found: present });
        }
        for (class, &count) in counts.iter().enumerate() {
            if count < 2 {
                return Err(Error::TooFewInstances {
                    class,
                    count,
                    required: 2,
                });
            }
        }
        Ok(Self {
            features,
            labels,
            feature_names,
            class_names,
        })
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn class_names(&self) -> &[String; 2] {
        &self.class_names
    }

    /// Column `j` as an owned vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.features.iter().map(|r| r[j]).collect()
    }

    /// Rows belonging to class `c`.
    pub fn class_rows(&self, c: u8) -> Vec<&[f64]> {
        self.features
            .iter()
            .zip(&self.labels)
            .filter(|(_, &l)| l == c)
            .map(|(r, _)| r.as_slice())
            .collect()
    }

    pub fn class_count(&self, c: u8) -> usize {
        self.labels.iter().filter(|&&l| l == c).count()
    }
}

/// Per-feature box `[lower_j, upper_j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl FeatureBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (j, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite()) || l >= u {
                return Err(Error::InvalidArgument(format!(
                    "bounds for feature {j} are not an interval: [{l}, {u}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn width(&self, j: usize) -> f64 {
        self.upper[j] - self.lower[j]
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol)
    }

    /// Smallest box containing both `self` and the point `x`.
    pub fn hull_with(&self, x: &[f64]) -> Self {
        let lower = self.lower.iter().zip(x).map(|(l, v)| l.min(*v)).collect();
        let upper = self.upper.iter().zip(x).map(|(u, v)| u.max(*v)).collect();
        Self { lower, upper }
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }
}

/// Reads a comma-separated file with a mandatory header row.
///
/// The label column must hold exactly two distinct values; they map to
/// {0, 1} by sorted order (numeric order when every value parses as a
/// number, lexicographic otherwise). Any missing or non-numeric feature cell
/// rejects the file with a count of offending rows.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::UnknownLabelColumn(label_column.to_string()))?;
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut features = Vec::new();
    let mut raw_labels = Vec::new();
    let mut bad_rows = 0usize;
    let mut first_bad: Option<(usize, String, String)> = None;
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        // header is line 1
        let line = r + 2;
        let mut row = Vec::with_capacity(feature_names.len());
        let mut row_ok = true;
        for (i, cell) in record.iter().enumerate() {
            if i == label_idx {
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    row_ok = false;
                    if first_bad.is_none() {
                        first_bad = Some((line, header[i].clone(), cell.to_string()));
                    }
                }
            }
        }
        if record.len() != header.len() {
            row_ok = false;
            if first_bad.is_none() {
                first_bad = Some((line, "<row length>".into(), format!("{} cells", record.len())));
            }
        }
        if !row_ok {
            bad_rows += 1;
            continue;
        }
        features.push(row);
        raw_labels.push(record.get(label_idx).unwrap_or_default().to_string());
    }
    if let Some((line, column, value)) = first_bad {
        return Err(Error::NonNumeric {
            bad_rows,
            line,
            column,
            value,
        });
    }
    if features.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut distinct: Vec<String> = raw_labels.clone();
    distinct.sort();
    distinct.dedup();
    if distinct.len() != 2 {
        return Err(Error::SingleClass {
            found: distinct.len(),
        });
    }
    let numeric: Option<Vec<f64>> = distinct.iter().map(|s| s.parse::<f64>().ok()).collect();
    if let Some(vals) = numeric {
        if vals[1] < vals[0] {
            distinct.swap(0, 1);
        }
    }
    let labels = raw_labels
        .iter()
        .map(|s| if *s == distinct[0] { 0 } else { 1 })
        .collect();
    Dataset::with_class_names(
        features,
        labels,
        feature_names,
        [distinct[0].clone(), distinct[1].clone()],
    )
}

/// Empirical quantile with linear interpolation between order statistics.
/// `sorted` must be non-empty and ascending.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Per-feature `[lo, hi]` percentile box. Degenerate features are widened
/// symmetrically by `max(1e-6, 1e-6 * |value|)`.
pub fn percentile_bounds(ds: &Dataset, lo: f64, hi: f64) -> Result<FeatureBounds> {
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
        return Err(Error::InvalidArgument(format!(
            "percentile fractions must satisfy 0 <= lo < hi <= 1, got {lo}, {hi}"
        )));
    }
    if ds.n_rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let n = ds.n_features();
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    for j in 0..n {
        let mut col = ds.column(j);
        col.sort_by(f64::total_cmp);
        let mut l = quantile_sorted(&col, lo);
        let mut u = quantile_sorted(&col, hi);
        if l >= u {
            let widen = (1e-6 * l.abs()).max(1e-6);
            l -= widen;
            u += widen;
        }
        lower.push(l);
        upper.push(u);
    }
    Ok(FeatureBounds { lower, upper })
}

/// Strictly increasing bin edges `[min, cut_1, ..., max]`. After duplicate
/// cuts merge, the effective bin count may be smaller than requested; an
/// all-identical input yields a single edge (one bin).
#[derive(Debug, Clone, PartialEq)]
pub struct BinEdges(Vec<f64>);

impl BinEdges {
    pub fn edges(&self) -> &[f64] {
        &self.0
    }

    pub fn bin_count(&self) -> usize {
        self.0.len().saturating_sub(1).max(1)
    }

    /// Index of the bin holding `x`; interior cuts are inclusive on the left bin.
    pub fn bin_of(&self, x: f64) -> usize {
        let cuts = &self.0[1..self.0.len().saturating_sub(1).max(1)];
        cuts.iter().take_while(|&&c| x > c).count()
    }

    /// Number of values per bin.
    pub fn counts(&self, values: &[f64]) -> Vec<usize> {
        let mut counts = vec![0; self.bin_count()];
        for &v in values {
            counts[self.bin_of(v)] += 1;
        }
        counts
    }
}

pub fn equal_frequency_bins(values: &[f64], k: usize) -> Result<BinEdges> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 bins, got {k}")));
    }
    if values.len() < k {
        return Err(Error::InvalidArgument(format!(
            "{} values cannot fill {k} bins",
            values.len()
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut edges = Vec::with_capacity(k + 1);
    edges.push(sorted[0]);
    for b in 1..k {
        edges.push(quantile_sorted(&sorted, b as f64 / k as f64));
    }
    edges.push(*sorted.last().unwrap());
    edges.dedup_by(|a, b| *a <= *b);
    Ok(BinEdges(edges))
}
