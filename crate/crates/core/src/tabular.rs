//! Dataset ingestion, preprocessing and splitting.
//!
//! The one structural rule of this module: protected attributes never enter
//! the modeling path. [`load_csv`] routes the sensitive column into a
//! [`SensitiveVault`] and everything downstream of it (training, grouping,
//! attribution) only ever sees the [`FeatureTable`]. The vault is accepted
//! exclusively by fairness scoring.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seeds;

/// Column-major numeric feature matrix with unique column names.
///
/// Sensitive columns cannot appear here; they are split off at load time.
#[derive(Debug, Clone)]
pub struct FeatureTable<T> {
    names: Vec<String>,
    columns: Vec<Vec<T>>,
    n_rows: usize,
    /// For columns that were string-coded at load: code -> original level.
    string_levels: BTreeMap<usize, Vec<String>>,
}

impl<T: Scalar> FeatureTable<T> {
    pub fn new(names: Vec<String>, columns: Vec<Vec<T>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Validation(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for name in &names {
            if !seen.insert(name.clone()) {
                return Err(Error::Validation(format!("duplicate column name {name:?}")));
            }
        }
        let n_rows = columns.first().map_or(0, Vec::len);
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != n_rows {
                return Err(Error::Validation(format!(
                    "column {name:?} has {} rows, expected {n_rows}",
                    col.len()
                )));
            }
        }
        Ok(Self {
            names,
            columns,
            n_rows,
            string_levels: BTreeMap::new(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn column(&self, index: usize) -> &[T] {
        &self.columns[index]
    }

    pub fn value(&self, row: usize, column: usize) -> T {
        self.columns[column][row]
    }

    /// Gathers one row across all columns.
    pub fn row(&self, row: usize) -> Vec<T> {
        self.columns.iter().map(|c| c[row]).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Resolves a list of names to column indices, failing on the first unknown.
    pub fn resolve(&self, names: &[String]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                self.index_of(n)
                    .ok_or_else(|| Error::FeatureMismatch(format!("unknown feature {n:?}")))
            })
            .collect()
    }

    /// Per-column means over the given rows.
    pub fn column_means(&self, rows: &[usize]) -> Vec<T> {
        let denom = T::from_count(rows.len().max(1));
        self.columns
            .iter()
            .map(|col| rows.iter().map(|&r| col[r]).sum::<T>() / denom)
            .collect()
    }

    fn levels_for(&self, column: usize) -> Option<&[String]> {
        self.string_levels.get(&column).map(Vec::as_slice)
    }
}

/// Per-row binary labels.
#[derive(Debug, Clone)]
pub struct LabelVector {
    values: Vec<u8>,
}

impl LabelVector {
    pub fn new(values: Vec<u8>) -> Result<Self> {
        if values.iter().any(|&v| v > 1) {
            return Err(Error::Validation("labels must be 0 or 1".into()));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, row: usize) -> u8 {
        self.values[row]
    }

    pub fn positives(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1).count()
    }

    pub fn has_both_classes(&self) -> bool {
        let pos = self.positives();
        pos > 0 && pos < self.values.len()
    }

    /// Labels restricted to a row subset.
    pub fn gather(&self, rows: &[usize]) -> Vec<u8> {
        rows.iter().map(|&r| self.values[r]).collect()
    }
}

/// Quarantined protected-attribute column.
///
/// Only fairness scoring accepts this type; no training, grouping or
/// attribution operation does.
#[derive(Debug, Clone)]
pub struct SensitiveVault {
    attribute: String,
    levels: Vec<String>,
    codes: Vec<u32>,
    privileged: u32,
    reference: u32,
}

impl SensitiveVault {
    pub fn new(
        attribute: String,
        levels: Vec<String>,
        codes: Vec<u32>,
        privileged: u32,
        reference: u32,
    ) -> Result<Self> {
        if privileged == reference {
            return Err(Error::Schema(
                "privileged and reference groups must differ".into(),
            ));
        }
        if codes.iter().any(|&c| c as usize >= levels.len()) {
            return Err(Error::Validation("sensitive code out of range".into()));
        }
        Ok(Self {
            attribute,
            levels,
            codes,
            privileged,
            reference,
        })
    }

    pub fn attribute(&self) -> &str {
        &self.attribute
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn code(&self, row: usize) -> u32 {
        self.codes[row]
    }

    pub fn privileged(&self) -> u32 {
        self.privileged
    }

    pub fn reference(&self) -> u32 {
        self.reference
    }

    pub fn level_name(&self, code: u32) -> &str {
        &self.levels[code as usize]
    }

    /// Swaps the privileged and reference group designations.
    pub fn swapped(&self) -> Self {
        let mut out = self.clone();
        std::mem::swap(&mut out.privileged, &mut out.reference);
        out
    }
}

/// Role of a CSV column during ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnRole {
    Feature,
    Label,
    Sensitive,
    Drop,
}

/// Declares how each CSV column is routed.
#[derive(Debug, Clone)]
pub struct Schema {
    pub label: String,
    pub sensitive: Option<SensitiveSpec>,
    pub drop: BTreeSet<String>,
    /// Optional (positive, negative) string mapping for label values.
    /// Without it, label values must literally be 0 or 1.
    pub label_mapping: Option<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct SensitiveSpec {
    pub column: String,
    /// Value of the privileged group `a`.
    pub privileged: String,
    /// Value of the reference group `b`.
    pub reference: String,
}

impl Schema {
    pub fn role_of(&self, column: &str) -> ColumnRole {
        if column == self.label {
            ColumnRole::Label
        } else if self.sensitive.as_ref().is_some_and(|s| s.column == column) {
            ColumnRole::Sensitive
        } else if self.drop.contains(column) {
            ColumnRole::Drop
        } else {
            ColumnRole::Feature
        }
    }
}

/// Loads a UTF-8, comma-separated, header-mandatory CSV.
///
/// Empty (or whitespace-only) fields are missing values. Feature columns that
/// contain non-numeric text are coded by the sorted distinct values so the
/// table stays numeric; declare such columns categorical in [`preprocess`] to
/// expand them into indicators.
pub fn load_csv<T: Scalar>(
    path: &Path,
    schema: &Schema,
) -> Result<(FeatureTable<T>, LabelVector, Option<SensitiveVault>)> {
    let file = std::fs::File::open(path)?;
    load_csv_reader(file, schema)
}

pub fn load_csv_reader<T: Scalar, R: Read>(
    reader: R,
    schema: &Schema,
) -> Result<(FeatureTable<T>, LabelVector, Option<SensitiveVault>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);

    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Schema(format!("missing or unreadable header row: {e}")))?
        .iter()
        .map(str::to_owned)
        .collect();
    if headers.is_empty() {
        return Err(Error::Schema("missing header row".into()));
    }
    if !headers.iter().any(|h| *h == schema.label) {
        return Err(Error::Schema(format!(
            "label column {:?} not in header",
            schema.label
        )));
    }
    if let Some(spec) = &schema.sensitive {
        if !headers.iter().any(|h| *h == spec.column) {
            return Err(Error::Schema(format!(
                "sensitive column {:?} not in header",
                spec.column
            )));
        }
    }

    let roles: Vec<ColumnRole> = headers.iter().map(|h| schema.role_of(h)).collect();
    let mut raw: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
    for record in rdr.records() {
        let record = record.map_err(map_csv_error)?;
        for (j, field) in record.iter().enumerate() {
            raw[j].push(field.to_owned());
        }
    }
    let n_rows = raw.first().map_or(0, Vec::len);

    let mut names = Vec::new();
    let mut columns: Vec<Vec<T>> = Vec::new();
    let mut string_levels = BTreeMap::new();
    let mut labels: Option<Vec<u8>> = None;
    let mut vault = None;

    for (j, header) in headers.iter().enumerate() {
        match roles[j] {
            ColumnRole::Drop => {}
            ColumnRole::Label => {
                labels = Some(parse_labels(&raw[j], schema.label_mapping.as_ref())?);
            }
            ColumnRole::Sensitive => {
                let spec = schema.sensitive.as_ref().expect("role implies spec");
                vault = Some(parse_sensitive(&raw[j], spec)?);
            }
            ColumnRole::Feature => {
                let (column, levels) = parse_feature_column::<T>(&raw[j], header)?;
                if let Some(levels) = levels {
                    string_levels.insert(columns.len(), levels);
                }
                names.push(header.clone());
                columns.push(column);
            }
        }
    }

    let labels = labels.ok_or_else(|| Error::Schema("schema routed no label column".into()))?;
    if labels.len() != n_rows {
        return Err(Error::Validation("label column length mismatch".into()));
    }
    let mut table = FeatureTable::new(names, columns)?;
    table.n_rows = n_rows;
    table.string_levels = string_levels;
    Ok((table, LabelVector::new(labels)?, vault))
}

fn map_csv_error(e: csv::Error) -> Error {
    if let csv::ErrorKind::UnequalLengths { pos, expected_len, len } = e.kind() {
        let line = pos.as_ref().map_or(0, csv::Position::line);
        return Error::Parse {
            line,
            message: format!("row has {len} fields, expected {expected_len}"),
        };
    }
    Error::Csv(e)
}

fn is_missing(field: &str) -> bool {
    field.trim().is_empty()
}

fn parse_labels(raw: &[String], mapping: Option<&(String, String)>) -> Result<Vec<u8>> {
    raw.iter()
        .map(|v| {
            let v = v.trim();
            if let Some((pos, neg)) = mapping {
                if v == pos {
                    return Ok(1);
                }
                if v == neg {
                    return Ok(0);
                }
                return Err(Error::Validation(format!(
                    "label value {v:?} matches neither {pos:?} nor {neg:?}"
                )));
            }
            match v {
                "0" => Ok(0),
                "1" => Ok(1),
                other => Err(Error::Validation(format!(
                    "non-binary label value {other:?}; declare a label mapping"
                ))),
            }
        })
        .collect()
}

fn parse_sensitive(raw: &[String], spec: &SensitiveSpec) -> Result<SensitiveVault> {
    let mut levels: Vec<String> = raw
        .iter()
        .map(|v| v.trim().to_owned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    levels.sort();
    let code_of = |value: &str| -> Option<u32> {
        levels.iter().position(|l| l == value).map(|i| i as u32)
    };
    let privileged = code_of(&spec.privileged).ok_or_else(|| {
        Error::Validation(format!(
            "privileged group value {:?} absent from column {:?}",
            spec.privileged, spec.column
        ))
    })?;
    let reference = code_of(&spec.reference).ok_or_else(|| {
        Error::Validation(format!(
            "reference group value {:?} absent from column {:?}",
            spec.reference, spec.column
        ))
    })?;
    let codes = raw
        .iter()
        .map(|v| code_of(v.trim()).expect("level set built from the same column"))
        .collect();
    SensitiveVault::new(spec.column.clone(), levels, codes, privileged, reference)
}

/// Parses one feature column. Numeric text parses directly; anything else
/// makes the whole column string-categorical, coded by sorted distinct value.
fn parse_feature_column<T: Scalar>(
    raw: &[String],
    _name: &str,
) -> Result<(Vec<T>, Option<Vec<String>>)> {
    let all_numeric = raw
        .iter()
        .all(|v| is_missing(v) || v.trim().parse::<f64>().is_ok());
    if all_numeric {
        let column = raw
            .iter()
            .map(|v| {
                if is_missing(v) {
                    Ok(T::nan())
                } else {
                    v.trim()
                        .parse::<T>()
                        .map_err(|_| Error::Validation(format!("unparseable number {v:?}")))
                }
            })
            .collect::<Result<Vec<T>>>()?;
        return Ok((column, None));
    }
    let levels: Vec<String> = raw
        .iter()
        .filter(|v| !is_missing(v))
        .map(|v| v.trim().to_owned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let column = raw
        .iter()
        .map(|v| {
            if is_missing(v) {
                T::nan()
            } else {
                let idx = levels
                    .iter()
                    .position(|l| l == v.trim())
                    .expect("level set built from the same column");
                T::from_count(idx)
            }
        })
        .collect();
    Ok((column, Some(levels)))
}

/// Why a column was removed during preprocessing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DropReason {
    Constant,
    AllMissing,
}

#[derive(Debug, Clone)]
pub struct DroppedColumn {
    pub name: String,
    pub reason: DropReason,
}

/// Standardization parameters applied to one retained column.
#[derive(Debug, Clone, Copy)]
pub struct Standardization<T> {
    pub mean: T,
    pub std: T,
}

/// Audit trail of everything [`preprocess`] did.
#[derive(Debug, Clone)]
pub struct PreprocessReport<T> {
    /// Missing-value count per source column.
    pub imputations: BTreeMap<String, usize>,
    /// Mean/std used to standardize each retained output column.
    pub standardization: BTreeMap<String, Standardization<T>>,
    /// Source column -> encoded indicator names.
    pub one_hot: BTreeMap<String, Vec<String>>,
    pub dropped: Vec<DroppedColumn>,
}

/// One-hot encodes declared categoricals, mean-imputes missing numerics, and
/// standardizes every retained column to mean 0, std 1 (population std).
/// Constant and all-missing columns are dropped and recorded, not errors.
pub fn preprocess<T: Scalar>(
    table: &FeatureTable<T>,
    categorical: &BTreeSet<String>,
) -> Result<(FeatureTable<T>, PreprocessReport<T>)> {
    for name in categorical {
        if table.index_of(name).is_none() {
            return Err(Error::Schema(format!(
                "categorical column {name:?} not in table"
            )));
        }
    }

    let mut report = PreprocessReport {
        imputations: BTreeMap::new(),
        standardization: BTreeMap::new(),
        one_hot: BTreeMap::new(),
        dropped: Vec::new(),
    };
    let mut names = Vec::new();
    let mut columns: Vec<Vec<T>> = Vec::new();

    for j in 0..table.n_features() {
        let source = table.name(j).to_owned();
        let raw = table.column(j);
        let missing = raw.iter().filter(|v| v.is_nan()).count();
        if missing > 0 {
            report.imputations.insert(source.clone(), missing);
        }
        if missing == raw.len() {
            report.dropped.push(DroppedColumn {
                name: source,
                reason: DropReason::AllMissing,
            });
            continue;
        }

        if categorical.contains(&source) {
            let levels = observed_levels(raw);
            let mut encoded_names = Vec::new();
            for level in &levels {
                let display = match table.levels_for(j) {
                    Some(names) => names[level.to_f64_lossy() as usize].clone(),
                    None => format_level(*level),
                };
                let name = format!("{source}={display}");
                let indicator: Vec<T> = raw
                    .iter()
                    .map(|v| {
                        if !v.is_nan() && *v == *level {
                            T::one()
                        } else {
                            T::zero()
                        }
                    })
                    .collect();
                match standardize(&indicator) {
                    Some((column, stats)) => {
                        report.standardization.insert(name.clone(), stats);
                        encoded_names.push(name.clone());
                        names.push(name);
                        columns.push(column);
                    }
                    None => report.dropped.push(DroppedColumn {
                        name,
                        reason: DropReason::Constant,
                    }),
                }
            }
            report.one_hot.insert(source, encoded_names);
        } else {
            let mean = nan_mean(raw);
            let imputed: Vec<T> = raw
                .iter()
                .map(|v| if v.is_nan() { mean } else { *v })
                .collect();
            match standardize(&imputed) {
                Some((column, stats)) => {
                    report.standardization.insert(source.clone(), stats);
                    names.push(source);
                    columns.push(column);
                }
                None => report.dropped.push(DroppedColumn {
                    name: source,
                    reason: DropReason::Constant,
                }),
            }
        }
    }

    let out = FeatureTable::new(names, columns)?;
    Ok((out, report))
}

fn observed_levels<T: Scalar>(raw: &[T]) -> Vec<T> {
    let mut levels: Vec<T> = Vec::new();
    for v in raw {
        if !v.is_nan() && !levels.contains(v) {
            levels.push(*v);
        }
    }
    levels.sort_by(|a, b| a.partial_cmp(b).expect("levels are finite"));
    levels
}

fn format_level<T: Scalar>(level: T) -> String {
    let f = level.to_f64_lossy();
    if f.fract() == 0.0 && f.abs() < 1e15 {
        format!("{}", f as i64)
    } else {
        format!("{f}")
    }
}

fn nan_mean<T: Scalar>(values: &[T]) -> T {
    let mut sum = T::zero();
    let mut count = 0usize;
    for v in values {
        if !v.is_nan() {
            sum = sum + *v;
            count += 1;
        }
    }
    sum / T::from_count(count.max(1))
}

/// Returns the standardized column and the stats used, or `None` when the
/// column is constant.
fn standardize<T: Scalar>(values: &[T]) -> Option<(Vec<T>, Standardization<T>)> {
    let n = T::from_count(values.len());
    let mean = values.iter().copied().sum::<T>() / n;
    let var = values
        .iter()
        .map(|v| (*v - mean) * (*v - mean))
        .sum::<T>()
        / n;
    let std = var.sqrt();
    if std.to_f64_lossy() < 1e-12 {
        return None;
    }
    let column = values.iter().map(|v| (*v - mean) / std).collect();
    Some((column, Standardization { mean, std }))
}

/// Disjoint train/test row-index sets, reproducible from the seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Label-stratified split. Each class lands on both sides (rounded to the
/// requested fraction within one row), so the same seed always reproduces the
/// same index sets.
pub fn split<T: Scalar>(
    table: &FeatureTable<T>,
    labels: &LabelVector,
    vault: Option<&SensitiveVault>,
    test_fraction: f64,
    seed: u64,
) -> Result<DataSplit> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Validation(format!(
            "test_fraction must be in (0,1), got {test_fraction}"
        )));
    }
    if labels.len() != table.n_rows() {
        return Err(Error::Validation("labels misaligned with table".into()));
    }
    if let Some(v) = vault {
        if v.len() != table.n_rows() {
            return Err(Error::Validation("vault misaligned with table".into()));
        }
    }
    if !labels.has_both_classes() {
        return Err(Error::SingleClass);
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [0u8, 1u8] {
        let mut rows: Vec<usize> = (0..labels.len())
            .filter(|&r| labels.get(r) == class)
            .collect();
        if rows.len() < 2 {
            return Err(Error::Validation(format!(
                "class {class} has fewer than 2 rows; cannot stratify"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, "split-class", class as u64));
        rows.shuffle(&mut rng);
        let n_test = ((test_fraction * rows.len() as f64).round() as usize)
            .clamp(1, rows.len() - 1);
        test.extend_from_slice(&rows[..n_test]);
        train.extend_from_slice(&rows[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(DataSplit { train, test, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema_basic() -> Schema {
        Schema {
            label: "label".into(),
            sensitive: Some(SensitiveSpec {
                column: "race".into(),
                privileged: "w".into(),
                reference: "b".into(),
            }),
            drop: BTreeSet::new(),
            label_mapping: None,
        }
    }

    #[test]
    fn schema_routing_keeps_sensitive_out_of_features() {
        let csv = "f1,f2,label,race\n1.0,2.0,1,w\n3.0,4.0,0,b\n";
        let (table, labels, vault) =
            load_csv_reader::<f64, _>(csv.as_bytes(), &schema_basic()).unwrap();
        assert_eq!(table.names(), &["f1".to_string(), "f2".to_string()]);
        assert_eq!(labels.values(), &[1, 0]);
        let vault = vault.unwrap();
        assert_eq!(vault.attribute(), "race");
        assert_eq!(vault.len(), 2);
        assert_ne!(vault.privileged(), vault.reference());
    }

    #[test]
    fn declared_label_mapping() {
        let schema = Schema {
            label: "label".into(),
            sensitive: None,
            drop: BTreeSet::new(),
            label_mapping: Some(("yes".into(), "no".into())),
        };
        let csv = "f1,label\n1.0,yes\n2.0,no\n";
        let (_, labels, _) = load_csv_reader::<f64, _>(csv.as_bytes(), &schema).unwrap();
        assert_eq!(labels.values(), &[1, 0]);
    }

    #[test]
    fn non_binary_label_rejected() {
        let schema = Schema {
            label: "label".into(),
            sensitive: None,
            drop: BTreeSet::new(),
            label_mapping: None,
        };
        let csv = "f1,label\n1.0,2\n";
        let err = load_csv_reader::<f64, _>(csv.as_bytes(), &schema).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn short_row_cites_line_number() {
        let schema = Schema {
            label: "label".into(),
            sensitive: None,
            drop: BTreeSet::new(),
            label_mapping: None,
        };
        // Line 7 of the file has 3 fields instead of 4.
        let csv = "f1,f2,f3,label\n\
                   1,2,3,0\n1,2,3,1\n1,2,3,0\n1,2,3,1\n1,2,3,0\n\
                   1,2,1\n";
        let err = load_csv_reader::<f64, _>(csv.as_bytes(), &schema).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 7),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn missing_label_column_is_schema_error() {
        let schema = Schema {
            label: "label".into(),
            sensitive: None,
            drop: BTreeSet::new(),
            label_mapping: None,
        };
        let csv = "f1,f2\n1.0,2.0\n";
        let err = load_csv_reader::<f64, _>(csv.as_bytes(), &schema).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn mean_imputation_then_standardization() {
        let table = FeatureTable::new(
            vec!["x".into()],
            vec![vec![1.0f64, 3.0, f64::NAN]],
        )
        .unwrap();
        let (out, report) = preprocess(&table, &BTreeSet::new()).unwrap();
        assert_eq!(report.imputations["x"], 1);
        assert_eq!(report.standardization["x"].mean, 2.0);
        let col = out.column(0);
        // Imputed entry equals the mean, hence exactly 0 after standardization.
        assert_eq!(col[2], 0.0);
        let mean: f64 = col.iter().sum::<f64>() / col.len() as f64;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn categorical_expansion_records_map() {
        let csv = "cat,label\nA,0\nB,1\nA,0\nB,1\n";
        let schema = Schema {
            label: "label".into(),
            sensitive: None,
            drop: BTreeSet::new(),
            label_mapping: None,
        };
        let (table, _, _) = load_csv_reader::<f64, _>(csv.as_bytes(), &schema).unwrap();
        let categorical = BTreeSet::from(["cat".to_string()]);
        let (out, report) = preprocess(&table, &categorical).unwrap();
        assert_eq!(
            report.one_hot["cat"],
            vec!["cat=A".to_string(), "cat=B".to_string()]
        );
        assert_eq!(out.n_features(), 2);
        for name in &report.one_hot["cat"] {
            assert!(out.index_of(name).is_some());
        }
    }

    #[test]
    fn constant_column_dropped_with_report_entry() {
        let table = FeatureTable::new(
            vec!["c".into(), "x".into()],
            vec![vec![5.0f64; 4], vec![1.0, 2.0, 3.0, 4.0]],
        )
        .unwrap();
        let (out, report) = preprocess(&table, &BTreeSet::new()).unwrap();
        assert_eq!(out.n_features(), 1);
        assert_eq!(report.dropped.len(), 1);
        assert_eq!(report.dropped[0].name, "c");
        assert_eq!(report.dropped[0].reason, DropReason::Constant);
    }

    #[test]
    fn all_missing_column_dropped_not_error() {
        let table = FeatureTable::new(
            vec!["m".into(), "x".into()],
            vec![vec![f64::NAN; 3], vec![1.0, 2.0, 3.0]],
        )
        .unwrap();
        let (out, report) = preprocess(&table, &BTreeSet::new()).unwrap();
        assert_eq!(out.n_features(), 1);
        assert_eq!(report.dropped[0].reason, DropReason::AllMissing);
    }

    #[test]
    fn standardization_invariant_after_preprocess() {
        let table = FeatureTable::new(
            vec!["a".into(), "b".into()],
            vec![
                vec![1.0f64, 2.0, 7.0, -3.0, 0.5],
                vec![10.0, 20.0, 15.0, 12.0, 40.0],
            ],
        )
        .unwrap();
        let (out, _) = preprocess(&table, &BTreeSet::new()).unwrap();
        for j in 0..out.n_features() {
            let col = out.column(j);
            let n = col.len() as f64;
            let mean: f64 = col.iter().sum::<f64>() / n;
            let var: f64 = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-9, "mean {mean}");
            assert!((var.sqrt() - 1.0).abs() < 1e-9, "std {}", var.sqrt());
        }
    }

    fn hundred_row_fixture() -> (FeatureTable<f64>, LabelVector) {
        let column: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let labels: Vec<u8> = (0..100).map(|i| u8::from(i % 5 == 0)).collect();
        (
            FeatureTable::new(vec!["x".into()], vec![column]).unwrap(),
            LabelVector::new(labels).unwrap(),
        )
    }

    #[test]
    fn split_is_stratified_and_sized() {
        let (table, labels) = hundred_row_fixture();
        let s = split(&table, &labels, None, 0.2, 7).unwrap();
        assert_eq!(s.train.len() + s.test.len(), 100);
        assert_eq!(s.test.len(), 20);
        // 20 positives overall -> 4 in the 20% test side, within one row.
        let test_pos = s.test.iter().filter(|&&r| labels.get(r) == 1).count();
        assert!((test_pos as i64 - 4).abs() <= 1, "test positives {test_pos}");
    }

    #[test]
    fn split_same_seed_identical() {
        let (table, labels) = hundred_row_fixture();
        let a = split(&table, &labels, None, 0.2, 7).unwrap();
        let b = split(&table, &labels, None, 0.2, 7).unwrap();
        assert_eq!(a, b);
        let c = split(&table, &labels, None, 0.2, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn split_rejects_degenerate_fraction() {
        let (table, labels) = hundred_row_fixture();
        assert!(split(&table, &labels, None, 1.0, 7).is_err());
        assert!(split(&table, &labels, None, 0.0, 7).is_err());
    }

    #[test]
    fn split_partitions_all_rows() {
        let (table, labels) = hundred_row_fixture();
        let s = split(&table, &labels, None, 0.3, 11).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(s.test.iter()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn load_preprocess_split_deterministic() {
        let csv = "f1,f2,label,race\n1.0,5.5,1,w\n2.0,4.5,0,b\n3.0,3.5,1,w\n4.0,2.5,0,b\n5.0,1.5,1,w\n6.0,0.5,0,b\n";
        let run = || {
            let (table, labels, _) =
                load_csv_reader::<f64, _>(csv.as_bytes(), &schema_basic()).unwrap();
            let (table, _) = preprocess(&table, &BTreeSet::new()).unwrap();
            let s = split(&table, &labels, None, 0.34, 3).unwrap();
            (table.row(0), s)
        };
        let (row_a, split_a) = run();
        let (row_b, split_b) = run();
        assert_eq!(row_a, row_b);
        assert_eq!(split_a, split_b);
    }
}
