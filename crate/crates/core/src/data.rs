//! Tabular ingestion: CSV parsing, dummy encoding of nominal columns,
//! standardization and seeded train/test splitting.

use std::collections::{BTreeSet, HashSet};
use std::io::Read;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("i/o error: {0}")]
    Io(String),
    #[error("csv error: {0}")]
    Csv(String),
    #[error("file has no header or no data rows")]
    EmptyFile,
    #[error("target column `{0}` not found")]
    MissingTarget(String),
    #[error("row {0} has a different number of fields than the header")]
    RaggedRows(usize),
    #[error("cannot parse cell at row {row}, column `{col}`")]
    UnparseableCell { row: usize, col: String },
    #[error("missing value at row {row}, column `{col}`")]
    MissingValue { row: usize, col: String },
    #[error("label at row {row} is {value}, expected 0 or 1")]
    InvalidLabel { row: usize, value: String },
    #[error("nominal column `{0}` has a single level")]
    SingleLevelColumn(String),
    #[error("duplicate feature name `{0}`")]
    DuplicateFeature(String),
    #[error("dataset has no feature columns")]
    NoFeatures,
    #[error("test fraction {0} is outside (0, 1)")]
    FractionOutOfRange(f64),
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("nominal columns must be dummy-encoded first: {0:?}")]
    PendingNominal(Vec<String>),
    #[error("schema mismatch: missing {missing:?}, extra {extra:?}")]
    SchemaMismatch {
        missing: Vec<String>,
        extra: Vec<String>,
    },
    #[error("column `{column}` has level `{level}` not seen in training")]
    UnknownLevel { column: String, level: String },
}

pub type Result<T> = std::result::Result<T, DataError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    #[serde(alias = "binary", rename = "classification")]
    BinaryClassification,
}

impl Task {
    pub fn is_classification(self) -> bool {
        matches!(self, Task::BinaryClassification)
    }
}

impl std::str::FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "regression" => Ok(Task::Regression),
            "classification" | "binary" => Ok(Task::BinaryClassification),
            other => Err(format!("unknown task `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    BinaryDummy,
}

/// Raw header-ordered string table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())
            .map_err(|e| DataError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| DataError::Csv(e.to_string()))?
            .iter()
            .map(str::to_owned)
            .collect();
        if headers.is_empty() || headers.iter().all(String::is_empty) {
            return Err(DataError::EmptyFile);
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| DataError::Csv(e.to_string()))?;
            // data rows are numbered from 1; the header is row 0
            if rec.len() != headers.len() {
                return Err(DataError::RaggedRows(i + 1));
            }
            rows.push(rec.iter().map(str::to_owned).collect());
        }
        if rows.is_empty() {
            return Err(DataError::EmptyFile);
        }
        Ok(Table { headers, rows })
    }

    fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }
}

fn parse_finite<T: Scalar>(cell: &str) -> Option<T> {
    let v: f64 = cell.parse().ok()?;
    if v.is_finite() {
        T::from_f64(v)
    } else {
        None
    }
}

/// Looks like a number but is not a finite one (`NaN`, `inf`, `1e999`).
fn is_non_finite_literal(cell: &str) -> bool {
    cell.parse::<f64>().map(|v| !v.is_finite()).unwrap_or(false)
}

/// A nominal column awaiting dummy encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct NominalColumn {
    pub name: String,
    /// Position among the raw feature columns (header order, target removed).
    pub position: usize,
    pub values: Vec<String>,
}

/// Raw feature column description, enough to re-encode unseen files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawColumn {
    pub name: String,
    pub kind: RawKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RawKind {
    Continuous,
    /// Sorted levels; the first one is the reference level and gets no column.
    Nominal {
        levels: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub target: String,
    pub columns: Vec<RawColumn>,
}

impl FeatureSchema {
    pub fn encoded_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in &self.columns {
            match &c.kind {
                RawKind::Continuous => out.push(c.name.clone()),
                RawKind::Nominal { levels } => {
                    for lvl in &levels[1..] {
                        out.push(format!("{}:{}", c.name, lvl));
                    }
                }
            }
        }
        out
    }

    pub fn column_kinds(&self) -> Vec<ColumnKind> {
        let mut out = Vec::new();
        for c in &self.columns {
            match &c.kind {
                RawKind::Continuous => out.push(ColumnKind::Continuous),
                RawKind::Nominal { levels } => out.extend(std::iter::repeat_n(
                    ColumnKind::BinaryDummy,
                    levels.len() - 1,
                )),
            }
        }
        out
    }

    /// Encodes a table whose feature columns match this schema by name.
    /// The target column may be present; any other unknown column is an error.
    pub fn encode<T: Scalar>(&self, table: &Table) -> Result<Array2<T>> {
        let known: HashSet<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        let present: HashSet<&str> = table.headers.iter().map(String::as_str).collect();
        let missing: Vec<String> = self
            .columns
            .iter()
            .filter(|c| !present.contains(c.name.as_str()))
            .map(|c| c.name.clone())
            .collect();
        let extra: Vec<String> = table
            .headers
            .iter()
            .filter(|h| !known.contains(h.as_str()) && **h != self.target)
            .cloned()
            .collect();
        if !missing.is_empty() || !extra.is_empty() {
            return Err(DataError::SchemaMismatch { missing, extra });
        }
        let width = self.encoded_names().len();
        let mut x = Array2::<T>::zeros((table.rows.len(), width));
        let mut offset = 0;
        for col in &self.columns {
            let src = table.column_index(&col.name).expect("checked above");
            match &col.kind {
                RawKind::Continuous => {
                    for (r, row) in table.rows.iter().enumerate() {
                        let cell = &row[src];
                        if cell.is_empty() {
                            return Err(DataError::MissingValue {
                                row: r + 1,
                                col: col.name.clone(),
                            });
                        }
                        x[[r, offset]] =
                            parse_finite(cell).ok_or_else(|| DataError::UnparseableCell {
                                row: r + 1,
                                col: col.name.clone(),
                            })?;
                    }
                    offset += 1;
                }
                RawKind::Nominal { levels } => {
                    for (r, row) in table.rows.iter().enumerate() {
                        let cell = &row[src];
                        if cell.is_empty() {
                            return Err(DataError::MissingValue {
                                row: r + 1,
                                col: col.name.clone(),
                            });
                        }
                        let li = levels.iter().position(|l| l == cell).ok_or_else(|| {
                            DataError::UnknownLevel {
                                column: col.name.clone(),
                                level: cell.clone(),
                            }
                        })?;
                        if li > 0 {
                            x[[r, offset + li - 1]] = T::one();
                        }
                    }
                    offset += levels.len() - 1;
                }
            }
        }
        Ok(x)
    }
}

/// Encodes a labelled table against a training schema.
pub fn encode_labeled<T: Scalar>(
    schema: &FeatureSchema,
    table: &Table,
    task: Task,
) -> Result<Dataset<T>> {
    let x = schema.encode(table)?;
    let t_idx = table
        .column_index(&schema.target)
        .ok_or_else(|| DataError::MissingTarget(schema.target.clone()))?;
    let mut y = Array1::<T>::zeros(table.rows.len());
    for (r, row) in table.rows.iter().enumerate() {
        let cell = &row[t_idx];
        if cell.is_empty() {
            return Err(DataError::MissingValue {
                row: r + 1,
                col: schema.target.clone(),
            });
        }
        y[r] = parse_finite(cell).ok_or_else(|| DataError::UnparseableCell {
            row: r + 1,
            col: schema.target.clone(),
        })?;
    }
    let ds = Dataset {
        feature_names: schema.encoded_names(),
        column_kinds: schema.column_kinds(),
        x,
        y,
        task,
        target_name: schema.target.clone(),
        nominal: Vec::new(),
        raw_columns: schema.columns.clone(),
    };
    ds.validate()?;
    Ok(ds)
}

/// Numeric design matrix with target and task kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub feature_names: Vec<String>,
    pub x: Array2<T>,
    pub y: Array1<T>,
    pub task: Task,
    pub column_kinds: Vec<ColumnKind>,
    pub target_name: String,
    /// Raw nominal columns not yet expanded by [`dummy_encode`].
    pub nominal: Vec<NominalColumn>,
    /// Header-ordered raw feature columns, with nominal levels.
    pub raw_columns: Vec<RawColumn>,
}

impl<T: Scalar> Dataset<T> {
    /// Builds an all-continuous dataset, validating shapes and labels.
    pub fn new(feature_names: Vec<String>, x: Array2<T>, y: Array1<T>, task: Task) -> Result<Self> {
        let p = x.ncols();
        let ds = Dataset {
            column_kinds: vec![ColumnKind::Continuous; p],
            raw_columns: feature_names
                .iter()
                .map(|n| RawColumn {
                    name: n.clone(),
                    kind: RawKind::Continuous,
                })
                .collect(),
            feature_names,
            x,
            y,
            task,
            target_name: "y".to_owned(),
            nominal: Vec::new(),
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Convenience constructor with generated names `x1..xp`.
    pub fn from_arrays(x: Array2<T>, y: Array1<T>, task: Task) -> Result<Self> {
        let names = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(names, x, y, task)
    }

    pub fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.x.nrows();
        if n == 0 {
            return Err(DataError::EmptyFile);
        }
        if self.y.len() != n {
            return Err(DataError::TooFewRows {
                needed: n,
                got: self.y.len(),
            });
        }
        if self.x.ncols() == 0 && self.nominal.is_empty() {
            return Err(DataError::NoFeatures);
        }
        let mut seen = HashSet::new();
        for name in &self.feature_names {
            if !seen.insert(name.as_str()) {
                return Err(DataError::DuplicateFeature(name.clone()));
            }
        }
        for (r, row) in self.x.rows().into_iter().enumerate() {
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(DataError::UnparseableCell {
                    row: r + 1,
                    col: self.feature_names.get(j).cloned().unwrap_or_default(),
                });
            }
        }
        for (r, &v) in self.y.iter().enumerate() {
            if !v.is_finite() {
                return Err(DataError::UnparseableCell {
                    row: r + 1,
                    col: self.target_name.clone(),
                });
            }
            if self.task.is_classification() && v != T::zero() && v != T::one() {
                return Err(DataError::InvalidLabel {
                    row: r + 1,
                    value: format!("{v}"),
                });
            }
        }
        Ok(())
    }

    /// Rows selected by index, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Self {
        Dataset {
            feature_names: self.feature_names.clone(),
            x: self.x.select(Axis(0), rows),
            y: self.y.select(Axis(0), rows),
            task: self.task,
            column_kinds: self.column_kinds.clone(),
            target_name: self.target_name.clone(),
            nominal: self
                .nominal
                .iter()
                .map(|c| NominalColumn {
                    name: c.name.clone(),
                    position: c.position,
                    values: rows.iter().map(|&r| c.values[r].clone()).collect(),
                })
                .collect(),
            raw_columns: self.raw_columns.clone(),
        }
    }

    /// Raw column schema; available once every nominal column is encoded.
    pub fn schema(&self) -> Result<FeatureSchema> {
        if !self.nominal.is_empty() {
            return Err(DataError::PendingNominal(
                self.nominal.iter().map(|c| c.name.clone()).collect(),
            ));
        }
        Ok(FeatureSchema {
            target: self.target_name.clone(),
            columns: self.raw_columns.clone(),
        })
    }
}

/// Reads a CSV file. Columns listed in `nominal`, or holding any cell that is
/// not a number, are kept raw for [`dummy_encode`].
pub fn load_csv<T: Scalar>(
    path: impl AsRef<Path>,
    target: &str,
    task: Task,
    nominal: &[String],
) -> Result<Dataset<T>> {
    let table = Table::read(path)?;
    from_table(&table, target, task, nominal)
}

pub fn from_table<T: Scalar>(
    table: &Table,
    target: &str,
    task: Task,
    nominal: &[String],
) -> Result<Dataset<T>> {
    let t_idx = table
        .column_index(target)
        .ok_or_else(|| DataError::MissingTarget(target.to_owned()))?;
    let n = table.rows.len();
    let mut y = Array1::<T>::zeros(n);
    for (r, row) in table.rows.iter().enumerate() {
        let cell = &row[t_idx];
        if cell.is_empty() {
            return Err(DataError::MissingValue {
                row: r + 1,
                col: target.to_owned(),
            });
        }
        y[r] = parse_finite(cell).ok_or_else(|| DataError::UnparseableCell {
            row: r + 1,
            col: target.to_owned(),
        })?;
    }

    let declared: HashSet<&str> = nominal.iter().map(String::as_str).collect();
    let mut numeric_cols: Vec<(String, Vec<T>)> = Vec::new();
    let mut nominal_cols = Vec::new();
    let mut raw_columns = Vec::new();
    let mut position = 0;
    for (c, name) in table.headers.iter().enumerate() {
        if c == t_idx {
            continue;
        }
        let mut values = Vec::with_capacity(n);
        let mut is_nominal = declared.contains(name.as_str());
        for (r, row) in table.rows.iter().enumerate() {
            let cell = &row[c];
            if cell.is_empty() {
                return Err(DataError::MissingValue {
                    row: r + 1,
                    col: name.clone(),
                });
            }
            if is_non_finite_literal(cell) {
                return Err(DataError::UnparseableCell {
                    row: r + 1,
                    col: name.clone(),
                });
            }
            if !is_nominal {
                match parse_finite::<T>(cell) {
                    Some(v) => values.push(v),
                    None => is_nominal = true,
                }
            }
        }
        if is_nominal {
            let values: Vec<String> = table.rows.iter().map(|row| row[c].clone()).collect();
            let levels: BTreeSet<&str> = values.iter().map(String::as_str).collect();
            raw_columns.push(RawColumn {
                name: name.clone(),
                kind: RawKind::Nominal {
                    levels: levels.into_iter().map(str::to_owned).collect(),
                },
            });
            nominal_cols.push(NominalColumn {
                name: name.clone(),
                position,
                values,
            });
        } else {
            raw_columns.push(RawColumn {
                name: name.clone(),
                kind: RawKind::Continuous,
            });
            numeric_cols.push((name.clone(), values));
        }
        position += 1;
    }

    let p = numeric_cols.len();
    let mut x = Array2::<T>::zeros((n, p));
    for (j, (_, col)) in numeric_cols.iter().enumerate() {
        for (r, &v) in col.iter().enumerate() {
            x[[r, j]] = v;
        }
    }
    let ds = Dataset {
        feature_names: numeric_cols.into_iter().map(|(name, _)| name).collect(),
        column_kinds: vec![ColumnKind::Continuous; p],
        x,
        y,
        task,
        target_name: target.to_owned(),
        nominal: nominal_cols,
        raw_columns,
    };
    ds.validate()?;
    log::debug!(
        "loaded {} rows, {} numeric and {} nominal columns",
        n,
        p,
        ds.nominal.len()
    );
    Ok(ds)
}

/// Replaces each c-level nominal column by c−1 indicator columns named
/// `column:level`, in place of the original column. The reference level is
/// the first one in sorted order.
pub fn dummy_encode<T: Scalar>(dataset: &Dataset<T>) -> Result<Dataset<T>> {
    if dataset.nominal.is_empty() {
        return Ok(dataset.clone());
    }
    let n = dataset.n_samples();
    let total_raw = dataset.n_features() + dataset.nominal.len();
    let mut names = Vec::new();
    let mut kinds = Vec::new();
    let mut columns: Vec<Vec<T>> = Vec::new();
    let mut next_numeric = 0;
    let mut nominal_iter = dataset.nominal.iter().peekable();
    for position in 0..total_raw {
        match nominal_iter.peek() {
            Some(col) if col.position == position => {
                let col = nominal_iter.next().expect("peeked");
                let levels: BTreeSet<&str> = col.values.iter().map(String::as_str).collect();
                if levels.len() < 2 {
                    return Err(DataError::SingleLevelColumn(col.name.clone()));
                }
                for level in levels.iter().skip(1) {
                    names.push(format!("{}:{}", col.name, level));
                    kinds.push(ColumnKind::BinaryDummy);
                    columns.push(
                        col.values
                            .iter()
                            .map(|v| if v == level { T::one() } else { T::zero() })
                            .collect(),
                    );
                }
            }
            _ => {
                names.push(dataset.feature_names[next_numeric].clone());
                kinds.push(dataset.column_kinds[next_numeric]);
                columns.push(dataset.x.column(next_numeric).to_vec());
                next_numeric += 1;
            }
        }
    }
    let mut x = Array2::<T>::zeros((n, columns.len()));
    for (j, col) in columns.iter().enumerate() {
        for (r, &v) in col.iter().enumerate() {
            x[[r, j]] = v;
        }
    }
    let out = Dataset {
        feature_names: names,
        x,
        y: dataset.y.clone(),
        task: dataset.task,
        column_kinds: kinds,
        target_name: dataset.target_name.clone(),
        nominal: Vec::new(),
        raw_columns: dataset.raw_columns.clone(),
    };
    out.validate()?;
    Ok(out)
}

/// Column location and scale used by [`standardize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Scaler<T> {
    pub means: Array1<T>,
    pub stds: Array1<T>,
    /// False for dummy columns and when standardization is switched off.
    pub scaled: Vec<bool>,
    pub zero_variance: Vec<bool>,
}

impl<T: Scalar> Scaler<T> {
    pub fn identity(p: usize) -> Self {
        Scaler {
            means: Array1::zeros(p),
            stds: Array1::ones(p),
            scaled: vec![false; p],
            zero_variance: vec![false; p],
        }
    }

    /// Population (divide-by-n) moments of the continuous columns.
    pub fn fit(dataset: &Dataset<T>) -> Self {
        let p = dataset.n_features();
        let n = T::from_count(dataset.n_samples());
        let mut s = Self::identity(p);
        for j in 0..p {
            if dataset.column_kinds[j] != ColumnKind::Continuous {
                continue;
            }
            let col = dataset.x.column(j);
            let mean = col.sum() / n;
            let var = col.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
            let std = var.sqrt();
            s.means[j] = mean;
            s.scaled[j] = true;
            if std > T::zero() && std.is_finite() {
                s.stds[j] = std;
            } else {
                s.stds[j] = T::one();
                s.zero_variance[j] = true;
            }
        }
        s
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn transform_row(&self, x: ArrayView1<T>) -> Array1<T> {
        let mut out = x.to_owned();
        for j in 0..out.len() {
            if self.scaled[j] {
                out[j] = (out[j] - self.means[j]) / self.stds[j];
            }
        }
        out
    }

    pub fn transform(&self, x: &Array2<T>) -> Array2<T> {
        let mut out = x.clone();
        for mut row in out.rows_mut() {
            for j in 0..row.len() {
                if self.scaled[j] {
                    row[j] = (row[j] - self.means[j]) / self.stds[j];
                }
            }
        }
        out
    }

    pub fn inverse_transform(&self, x: &Array2<T>) -> Array2<T> {
        let mut out = x.clone();
        for mut row in out.rows_mut() {
            for j in 0..row.len() {
                if self.scaled[j] {
                    row[j] = row[j] * self.stds[j] + self.means[j];
                }
            }
        }
        out
    }

    /// Maps a standardized coordinate value of column `j` back to raw units.
    pub fn unscale_value(&self, j: usize, v: T) -> T {
        if self.scaled[j] {
            v * self.stds[j] + self.means[j]
        } else {
            v
        }
    }
}

/// Centers and scales continuous columns; dummy columns are left untouched.
pub fn standardize<T: Scalar>(dataset: &Dataset<T>) -> (Dataset<T>, Scaler<T>) {
    let scaler = Scaler::fit(dataset);
    let mut out = dataset.clone();
    out.x = scaler.transform(&dataset.x);
    (out, scaler)
}

fn check_fraction(f: f64) -> Result<()> {
    if f > 0.0 && f < 1.0 {
        Ok(())
    } else {
        Err(DataError::FractionOutOfRange(f))
    }
}

/// Seeded index split; stratified by class for classification labels.
/// Both sides keep the original row order.
pub fn split_indices<T: Scalar>(
    y: ArrayView1<T>,
    task: Task,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    check_fraction(test_fraction)?;
    let n = y.len();
    if n < 2 {
        return Err(DataError::TooFewRows { needed: 2, got: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups: Vec<Vec<usize>> = if task.is_classification() {
        let zeros = (0..n).filter(|&i| y[i] == T::zero()).collect();
        let ones = (0..n).filter(|&i| y[i] != T::zero()).collect();
        vec![zeros, ones]
    } else {
        vec![(0..n).collect()]
    };
    let mut test = Vec::new();
    let mut train = Vec::new();
    for mut g in groups {
        g.shuffle(&mut rng);
        let k = (g.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&g[..k]);
        train.extend_from_slice(&g[k..]);
    }
    // keep both sides non-empty
    if test.is_empty() {
        test.push(train.pop().expect("n >= 2"));
    } else if train.is_empty() {
        train.push(test.pop().expect("n >= 2"));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split<T: Scalar>(
    dataset: &Dataset<T>,
    test_fraction: f64,
    seed: u64,
) -> Result<(Dataset<T>, Dataset<T>)> {
    let (train, test) = split_indices(dataset.y.view(), dataset.task, test_fraction, seed)?;
    Ok((dataset.subset(&train), dataset.subset(&test)))
}

/// Seeded k-fold assignment, stratified by class for classification.
/// Returns `(train_rows, validation_rows)` per fold.
pub fn kfold_indices<T: Scalar>(
    y: ArrayView1<T>,
    task: Task,
    folds: usize,
    seed: u64,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    let n = y.len();
    if folds < 2 || n < folds {
        return Err(DataError::TooFewRows {
            needed: folds.max(2),
            got: n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = Vec::with_capacity(n);
    if task.is_classification() {
        let mut zeros: Vec<usize> = (0..n).filter(|&i| y[i] == T::zero()).collect();
        let mut ones: Vec<usize> = (0..n).filter(|&i| y[i] != T::zero()).collect();
        zeros.shuffle(&mut rng);
        ones.shuffle(&mut rng);
        order.extend(zeros);
        order.extend(ones);
    } else {
        order.extend(0..n);
        order.shuffle(&mut rng);
    }
    let mut fold_of = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % folds;
    }
    Ok((0..folds)
        .map(|f| {
            let val: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
            let tr: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
            (tr, val)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn table(s: &str) -> Result<Table> {
        Table::from_reader(s.as_bytes())
    }

    #[test]
    fn parses_numeric_csv() {
        let t = table("a,b,y\n1,2,3\n4,5,6\n7,8,9\n").unwrap();
        let ds: Dataset<f64> = from_table(&t, "y", Task::Regression, &[]).unwrap();
        assert_eq!(ds.n_samples(), 3);
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.feature_names, vec!["a", "b"]);
        assert_eq!(ds.y, array![3.0, 6.0, 9.0]);
    }

    #[test]
    fn ragged_row_is_reported() {
        assert_eq!(table("a,b,y\n1,2,3\n4,5\n"), Err(DataError::RaggedRows(2)));
    }

    #[test]
    fn missing_target_and_empty_file() {
        let t = table("a,b\n1,2\n").unwrap();
        assert_eq!(
            from_table::<f64>(&t, "y", Task::Regression, &[]).unwrap_err(),
            DataError::MissingTarget("y".into())
        );
        assert_eq!(table("a,b,y\n"), Err(DataError::EmptyFile));
        assert_eq!(table(""), Err(DataError::EmptyFile));
    }

    #[test]
    fn rejects_bad_cells() {
        let t = table("a,y\n1,2\n,3\n").unwrap();
        assert!(matches!(
            from_table::<f64>(&t, "y", Task::Regression, &[]),
            Err(DataError::MissingValue { row: 2, .. })
        ));
        let t = table("a,y\nNaN,2\n").unwrap();
        assert!(matches!(
            from_table::<f64>(&t, "y", Task::Regression, &[]),
            Err(DataError::UnparseableCell { row: 1, .. })
        ));
        let t = table("a,y\n1,high\n").unwrap();
        assert!(matches!(
            from_table::<f64>(&t, "y", Task::Regression, &[]),
            Err(DataError::UnparseableCell { row: 1, .. })
        ));
        let t = table("a,y\n1,2\n").unwrap();
        assert!(matches!(
            from_table::<f64>(&t, "y", Task::BinaryClassification, &[]),
            Err(DataError::InvalidLabel { row: 1, .. })
        ));
    }

    #[test]
    fn dummy_encoding_in_place() {
        let t = table("u,col,v,y\n1,B,5,0\n2,A,6,1\n3,C,7,0\n4,B,8,1\n").unwrap();
        let raw: Dataset<f64> = from_table(&t, "y", Task::Regression, &[]).unwrap();
        assert_eq!(raw.nominal.len(), 1);
        let enc = dummy_encode(&raw).unwrap();
        assert_eq!(enc.feature_names, vec!["u", "col:B", "col:C", "v"]);
        assert_eq!(enc.column_kinds[1], ColumnKind::BinaryDummy);
        assert_eq!(enc.x.row(0).to_vec(), vec![1.0, 1.0, 0.0, 5.0]);
        assert_eq!(enc.x.row(1).to_vec(), vec![2.0, 0.0, 0.0, 6.0]);
        assert_eq!(enc.x.row(2).to_vec(), vec![3.0, 0.0, 1.0, 7.0]);

        assert!(matches!(raw.schema(), Err(DataError::PendingNominal(_))));
        let schema = enc.schema().unwrap();
        assert_eq!(
            schema.columns[1].kind,
            RawKind::Nominal {
                levels: vec!["A".into(), "B".into(), "C".into()]
            }
        );
        assert_eq!(schema.encoded_names(), enc.feature_names);
        // column order in the file is irrelevant
        let shuffled = table("v,col,u\n5,B,1\n6,A,2\n7,C,3\n8,B,4\n").unwrap();
        let again: Array2<f64> = schema.encode(&shuffled).unwrap();
        assert_eq!(again, enc.x);
    }

    #[test]
    fn declared_nominal_and_single_level() {
        let t = table("season,y\n1,0\n2,1\n3,0\n").unwrap();
        let raw: Dataset<f64> = from_table(&t, "y", Task::Regression, &["season".into()]).unwrap();
        let enc = dummy_encode(&raw).unwrap();
        assert_eq!(enc.feature_names, vec!["season:2", "season:3"]);

        let t = table("a,k,y\n1,Z,0\n2,Z,1\n").unwrap();
        let raw: Dataset<f64> = from_table(&t, "y", Task::Regression, &[]).unwrap();
        assert_eq!(
            dummy_encode(&raw).unwrap_err(),
            DataError::SingleLevelColumn("k".into())
        );
    }

    #[test]
    fn no_nominal_is_identity() {
        let ds = Dataset::from_arrays(
            array![[1.0, 2.0], [3.0, 4.0]],
            array![0.0, 1.0],
            Task::Regression,
        )
        .unwrap();
        assert_eq!(dummy_encode(&ds).unwrap(), ds);
    }

    #[test]
    fn standardize_examples() {
        let ds: Dataset<f64> = Dataset::from_arrays(
            array![[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]],
            array![0.0, 0.0, 0.0],
            Task::Regression,
        )
        .unwrap();
        let (z, s) = standardize(&ds);
        let c = z.x.column(0);
        assert!((c[0] + 1.224_744_871_391_589).abs() < 1e-12);
        assert_eq!(c[1], 0.0);
        assert!((c[2] - 1.224_744_871_391_589).abs() < 1e-12);
        assert_eq!(z.x.column(1).to_vec(), vec![0.0, 0.0, 0.0]);
        assert_eq!(s.zero_variance, vec![false, true]);
        let (zz, _) = standardize(&z);
        for (a, b) in zz.x.iter().zip(z.x.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dummy_columns_are_not_scaled() {
        let t = table("a,g,y\n1,p,0\n2,q,1\n4,q,0\n").unwrap();
        let ds = dummy_encode(&from_table::<f64>(&t, "y", Task::Regression, &[]).unwrap()).unwrap();
        let (z, s) = standardize(&ds);
        assert_eq!(z.x.column(1).to_vec(), vec![0.0, 1.0, 1.0]);
        assert_eq!(s.scaled, vec![true, false]);
    }

    #[test]
    fn split_counts_and_determinism() {
        let x = Array2::from_shape_fn((10, 1), |(i, _)| i as f64);
        let ds = Dataset::from_arrays(x, Array1::zeros(10), Task::Regression).unwrap();
        let (tr, te) = split(&ds, 0.3, 7).unwrap();
        assert_eq!((tr.n_samples(), te.n_samples()), (7, 3));
        let mut all: Vec<f64> = tr.x.iter().chain(te.x.iter()).copied().collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..10).map(f64::from).collect::<Vec<_>>());
        let (tr2, te2) = split(&ds, 0.3, 7).unwrap();
        assert_eq!((tr, te), (tr2, te2));
        assert_eq!(
            split(&ds, 1.0, 7).unwrap_err(),
            DataError::FractionOutOfRange(1.0)
        );
    }

    #[test]
    fn split_is_stratified() {
        let y = array![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0];
        let x = Array2::from_shape_fn((10, 1), |(i, _)| i as f64);
        let ds = Dataset::from_arrays(x, y, Task::BinaryClassification).unwrap();
        let (tr, te) = split(&ds, 0.5, 3).unwrap();
        assert_eq!(tr.y.sum(), 1.0);
        assert_eq!(te.y.sum(), 1.0);
    }

    #[test]
    fn kfold_partitions_rows() {
        let y = Array1::<f64>::zeros(11);
        let folds = kfold_indices(y.view(), Task::Regression, 3, 1).unwrap();
        let mut seen = vec![0; 11];
        for (tr, val) in &folds {
            assert_eq!(tr.len() + val.len(), 11);
            for &i in val {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    proptest! {
        #[test]
        fn standardize_round_trips(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 2..20)) {
            let n = rows.len();
            let x = Array2::from_shape_fn((n, 3), |(i, j)| rows[i][j]);
            let ds = Dataset::from_arrays(x.clone(), Array1::zeros(n), Task::Regression).unwrap();
            let (z, s) = standardize(&ds);
            let back = s.inverse_transform(&z.x);
            for (a, b) in back.iter().zip(x.iter()) {
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
            }
        }

        #[test]
        fn dummy_column_count(levels in prop::collection::vec(2usize..5, 1..4), n in 12usize..30) {
            // every level appears at least once because n >= 3 * max level count
            let mut csv = String::from("num");
            for (i, _) in levels.iter().enumerate() { csv.push_str(&format!(",c{i}")); }
            csv.push_str(",y\n");
            for r in 0..n {
                csv.push_str(&format!("{r}"));
                for &c in &levels { csv.push_str(&format!(",L{}", r % c)); }
                csv.push_str(",0\n");
            }
            let t = Table::from_reader(csv.as_bytes()).unwrap();
            let enc = dummy_encode(&from_table::<f64>(&t, "y", Task::Regression, &[]).unwrap()).unwrap();
            let want = 1 + levels.iter().map(|c| c - 1).sum::<usize>();
            prop_assert_eq!(enc.n_features(), want);
        }
    }
}
