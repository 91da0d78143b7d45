//! Additive per-feature attributions and anticipated outcomes under removal.
//!
//! Attributions live in margin (pre-link) space, where additivity is exact
//! for a linear model: `base + sum(phi) = margin` on every row. Anticipated
//! probabilities come from applying the logistic link to the anticipated
//! margin. A brute-force coalition-enumeration oracle provides the exact
//! interventional Shapley values for any black-box margin function at small
//! dimension; the closed form must agree with it.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::model::{sigmoid, LinearScorer};
use crate::scalar::Scalar;
use crate::tabular::FeatureTable;

/// Per-row, per-feature attributions plus the base value.
///
/// Features outside the producing model's active set carry exactly zero.
#[derive(Debug, Clone)]
pub struct ShapMatrix<T> {
    base_value: T,
    /// `values[row][feature]`, full table width.
    values: Vec<Vec<T>>,
    /// Training-set feature means the attributions marginalize to;
    /// `None` for matrices imported from external tools.
    background: Option<Vec<T>>,
}

impl<T: Scalar> ShapMatrix<T> {
    pub fn new(base_value: T, values: Vec<Vec<T>>, background: Option<Vec<T>>) -> Result<Self> {
        let width = values.first().map_or(0, Vec::len);
        if values.iter().any(|row| row.len() != width) {
            return Err(Error::Validation("ragged attribution matrix".into()));
        }
        if let Some(bg) = &background {
            if bg.len() != width {
                return Err(Error::FeatureMismatch(format!(
                    "background has {} features, matrix {width}",
                    bg.len()
                )));
            }
        }
        Ok(Self { base_value, values, background })
    }

    pub fn base_value(&self) -> T {
        self.base_value
    }

    pub fn n_rows(&self) -> usize {
        self.values.len()
    }

    pub fn n_features(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn row(&self, row: usize) -> &[T] {
        &self.values[row]
    }

    pub fn value(&self, row: usize, feature: usize) -> T {
        self.values[row][feature]
    }

    pub fn background(&self) -> Option<&[T]> {
        self.background.as_deref()
    }

    /// `base + sum(phi)` for one row; equals the model margin by additivity.
    pub fn reconstructed_margin(&self, row: usize) -> T {
        self.base_value + self.values[row].iter().copied().sum::<T>()
    }

    /// Mean absolute attribution per feature over the given rows.
    pub fn mean_abs(&self, rows: &[usize]) -> Vec<T> {
        let denom = T::from_count(rows.len().max(1));
        (0..self.n_features())
            .map(|j| rows.iter().map(|&r| self.values[r][j].abs()).sum::<T>() / denom)
            .collect()
    }
}

/// Exact interventional attributions for a linear model:
/// `phi_j(row) = w_j * (x_j - mean_j)` on active features, zero elsewhere,
/// with `base = bias + sum_j w_j * mean_j`.
///
/// `background_means` must come from training rows only.
pub fn linear_shap<T: Scalar>(
    model: &LinearScorer<T>,
    table: &FeatureTable<T>,
    background_means: &[T],
) -> Result<ShapMatrix<T>> {
    if background_means.len() != table.n_features() {
        return Err(Error::FeatureMismatch(format!(
            "background has {} features, table {}",
            background_means.len(),
            table.n_features()
        )));
    }
    for &j in model.active() {
        if j >= table.n_features() {
            return Err(Error::FeatureMismatch(format!(
                "model needs feature index {j}, table has {}",
                table.n_features()
            )));
        }
    }

    let mut base = model.bias();
    for &j in model.active() {
        base = base + model.weight_of(j) * background_means[j];
    }

    let mut values = vec![vec![T::zero(); table.n_features()]; table.n_rows()];
    for &j in model.active() {
        let w = model.weight_of(j);
        let mean = background_means[j];
        let col = table.column(j);
        for (r, row) in values.iter_mut().enumerate() {
            row[j] = w * (col[r] - mean);
        }
    }
    ShapMatrix::new(base, values, Some(background_means.to_vec()))
}

/// Exact Shapley values for a black-box margin function by coalition
/// enumeration, with the interventional value function
/// `v(S) = mean over background rows of predict(x with non-S features
/// replaced by background values)`.
///
/// Refuses more than 12 features (2^d coalitions). Returns the per-feature
/// attributions and the base value `v(empty)`.
pub fn brute_force_shapley<T, F>(
    predict: F,
    row: &[T],
    background: &[Vec<T>],
) -> Result<(Vec<T>, T)>
where
    T: Scalar,
    F: Fn(&[T]) -> T,
{
    const MAX_FEATURES: usize = 12;
    let d = row.len();
    if d > MAX_FEATURES {
        return Err(Error::TooManyFeatures { max: MAX_FEATURES, got: d });
    }
    if background.is_empty() {
        return Err(Error::Validation("need at least one background row".into()));
    }
    for bg in background {
        if bg.len() != d {
            return Err(Error::FeatureMismatch(format!(
                "background row has {} features, expected {d}",
                bg.len()
            )));
        }
    }

    // v(S) for every coalition bitmask
    let n_masks = 1usize << d;
    let bg_denom = T::from_count(background.len());
    let mut coalition_value = Vec::with_capacity(n_masks);
    let mut composite = vec![T::zero(); d];
    for mask in 0..n_masks {
        let mut total = T::zero();
        for bg in background {
            for j in 0..d {
                composite[j] = if mask & (1 << j) != 0 { row[j] } else { bg[j] };
            }
            total = total + predict(&composite);
        }
        coalition_value.push(total / bg_denom);
    }

    // weight(s) = s! (d-s-1)! / d!  for |S| = s, computed exactly in f64
    let factorial = |k: usize| -> f64 { (1..=k).map(|v| v as f64).product() };
    let weights: Vec<T> = (0..d)
        .map(|s| T::from_f64_lossy(factorial(s) * factorial(d - s - 1) / factorial(d)))
        .collect();

    let mut phi = vec![T::zero(); d];
    for j in 0..d {
        let bit = 1usize << j;
        for mask in 0..n_masks {
            if mask & bit != 0 {
                continue;
            }
            let s = (mask as u32).count_ones() as usize;
            let delta = coalition_value[mask | bit] - coalition_value[mask];
            phi[j] = phi[j] + weights[s] * delta;
        }
    }
    Ok((phi, coalition_value[0]))
}

/// Approximated outcome of a model that was never trained: the full model's
/// margins minus the removed features' attributions.
#[derive(Debug, Clone)]
pub struct AnticipatedOutcome<T> {
    pub removed: Vec<usize>,
    pub margins: Vec<T>,
    pub probabilities: Vec<T>,
}

/// Subtracts the removed set's attributions from each row margin and applies
/// the link. An empty removal reproduces the model outputs exactly.
pub fn anticipated_without<T: Scalar>(
    shap: &ShapMatrix<T>,
    margins: &[T],
    removed: &[usize],
) -> Result<AnticipatedOutcome<T>> {
    if margins.len() != shap.n_rows() {
        return Err(Error::Validation("margins misaligned with attributions".into()));
    }
    for &j in removed {
        if j >= shap.n_features() {
            return Err(Error::FeatureMismatch(format!(
                "removed feature {j} out of range for {}",
                shap.n_features()
            )));
        }
    }
    let anticipated: Vec<T> = margins
        .iter()
        .enumerate()
        .map(|(r, &m)| {
            let drop: T = removed.iter().map(|&j| shap.value(r, j)).sum();
            m - drop
        })
        .collect();
    let probabilities = anticipated.iter().map(|&m| sigmoid(m)).collect();
    Ok(AnticipatedOutcome {
        removed: removed.to_vec(),
        margins: anticipated,
        probabilities,
    })
}

/// Writes the matrix as CSV: `row_id,phi0,<feature names...>`.
pub fn write_shap_csv<T: Scalar, W: Write>(
    shap: &ShapMatrix<T>,
    names: &[String],
    mut out: W,
) -> Result<()> {
    if names.len() != shap.n_features() {
        return Err(Error::FeatureMismatch(format!(
            "{} names for {} attribution columns",
            names.len(),
            shap.n_features()
        )));
    }
    writeln!(out, "# shap-v1")?;
    let mut header = vec!["row_id".to_owned(), "phi0".to_owned()];
    header.extend(names.iter().cloned());
    writeln!(out, "{}", header.join(","))?;
    for r in 0..shap.n_rows() {
        let mut fields = vec![r.to_string(), format!("{}", shap.base_value().to_f64_lossy())];
        fields.extend(
            shap.row(r)
                .iter()
                .map(|v| format!("{}", v.to_f64_lossy())),
        );
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Reads a matrix written by [`write_shap_csv`] (or any external tool
/// emitting the same additive layout). Returns the matrix and the feature
/// names from the header. Margins are recoverable as `phi0 + sum(row)`.
pub fn read_shap_csv<T: Scalar, R: Read>(reader: R) -> Result<(ShapMatrix<T>, Vec<String>)> {
    let mut content = String::new();
    let mut reader = reader;
    reader.read_to_string(&mut content)?;
    let mut lines = content.lines().enumerate();

    let (_, version) = lines
        .next()
        .ok_or_else(|| Error::Validation("empty attribution file".into()))?;
    if version.trim() != "# shap-v1" {
        return Err(Error::Validation(format!(
            "unknown attribution schema line {version:?}"
        )));
    }
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Validation("missing attribution header".into()))?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.len() < 2 || columns[0] != "row_id" || columns[1] != "phi0" {
        return Err(Error::Validation("attribution header must start row_id,phi0".into()));
    }
    let names: Vec<String> = columns[2..].iter().map(|s| s.to_string()).collect();

    let mut base: Option<T> = None;
    let mut values = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(Error::Parse {
                line: idx as u64 + 1,
                message: format!("expected {} fields, got {}", columns.len(), fields.len()),
            });
        }
        let parse = |s: &str| -> Result<T> {
            s.trim()
                .parse::<T>()
                .map_err(|_| Error::Parse { line: idx as u64 + 1, message: format!("bad number {s:?}") })
        };
        let row_base = parse(fields[1])?;
        match base {
            None => base = Some(row_base),
            Some(b) if (b - row_base).abs().to_f64_lossy() > 1e-9 => {
                return Err(Error::Validation("phi0 must be constant across rows".into()));
            }
            _ => {}
        }
        values.push(fields[2..].iter().map(|s| parse(s)).collect::<Result<Vec<T>>>()?);
    }
    let base = base.ok_or_else(|| Error::Validation("attribution file has no rows".into()))?;
    Ok((ShapMatrix::new(base, values, None)?, names))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{auc, train, TrainConfig};
    use crate::tabular::{FeatureTable, LabelVector};
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn row_at_background_mean_has_zero_attributions() {
        let table = FeatureTable::new(
            vec!["a".into(), "b".into()],
            vec![vec![2.0, 1.0], vec![-1.0, 3.0]],
        )
        .unwrap();
        let model = LinearScorer::new(vec![0, 1], vec![0.7, -0.3], 0.2).unwrap();
        let means = vec![2.0, -1.0]; // equals row 0
        let shap = linear_shap(&model, &table, &means).unwrap();
        assert_eq!(shap.row(0), &[0.0, 0.0]);
        assert_eq!(shap.reconstructed_margin(0), model.margin(&table.row(0)).unwrap());
    }

    #[test]
    fn single_feature_arithmetic() {
        let table = FeatureTable::new(vec!["x".into()], vec![vec![3.0]]).unwrap();
        let model = LinearScorer::new(vec![0], vec![2.0], 1.0).unwrap();
        let shap = linear_shap(&model, &table, &[0.0]).unwrap();
        assert_eq!(shap.value(0, 0), 6.0);
        assert_eq!(shap.base_value(), 1.0);
        assert_eq!(shap.reconstructed_margin(0), 7.0);
    }

    #[test]
    fn inactive_features_get_zero() {
        let table = FeatureTable::new(
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 2.0], vec![5.0, -4.0]],
        )
        .unwrap();
        let model = LinearScorer::new(vec![0], vec![1.5], 0.0).unwrap();
        let shap = linear_shap(&model, &table, &[0.5, 1.0]).unwrap();
        assert_eq!(shap.value(0, 1), 0.0);
        assert_eq!(shap.value(1, 1), 0.0);
    }

    #[test]
    fn background_mismatch_rejected() {
        let table = FeatureTable::new(vec!["x".into()], vec![vec![3.0]]).unwrap();
        let model = LinearScorer::new(vec![0], vec![2.0], 1.0).unwrap();
        assert!(matches!(
            linear_shap(&model, &table, &[0.0, 0.0]).unwrap_err(),
            Error::FeatureMismatch(_)
        ));
    }

    #[test]
    fn linear_shap_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let d = 5;
        let n_rows = 6;
        let columns: Vec<Vec<f64>> = (0..d)
            .map(|_| (0..n_rows).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let names = (0..d).map(|j| format!("f{j}")).collect();
        let table = FeatureTable::new(names, columns).unwrap();
        let weights: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let model = LinearScorer::new((0..d).collect(), weights, 0.3).unwrap();
        let means: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect();

        let shap = linear_shap(&model, &table, &means).unwrap();
        let background = vec![means.clone()];
        for r in 0..n_rows {
            let row = table.row(r);
            let (phi, base) =
                brute_force_shapley(|x| model.margin(x).unwrap(), &row, &background).unwrap();
            assert!((base - shap.base_value()).abs() < 1e-9);
            for j in 0..d {
                assert!(
                    (phi[j] - shap.value(r, j)).abs() < 1e-9,
                    "row {r} feature {j}: {} vs {}",
                    phi[j],
                    shap.value(r, j)
                );
            }
        }
    }

    #[test]
    fn additive_game_decomposes_independently() {
        // f = g1(x1) + g2(x2) with g1 = x^2, g2 = 3x
        let f = |x: &[f64]| x[0] * x[0] + 3.0 * x[1];
        let background = vec![vec![1.0, -2.0], vec![-1.0, 0.5], vec![2.0, 1.5]];
        let row = [3.0, 2.0];
        let (phi, base) = brute_force_shapley(f, &row, &background).unwrap();

        let mean_g1 = (1.0 + 1.0 + 4.0) / 3.0;
        let mean_g2 = 3.0 * (-2.0 + 0.5 + 1.5) / 3.0;
        assert!((phi[0] - (9.0 - mean_g1)).abs() < 1e-12);
        assert!((phi[1] - (6.0 - mean_g2)).abs() < 1e-12);
        assert!((base - (mean_g1 + mean_g2)).abs() < 1e-12);

        // x2 must not influence phi1
        let row_b = [3.0, -5.0];
        let (phi_b, _) = brute_force_shapley(f, &row_b, &background).unwrap();
        assert!((phi[0] - phi_b[0]).abs() < 1e-12);
    }

    #[test]
    fn symmetric_duplicated_features_share_credit() {
        let f = |x: &[f64]| x[0] + x[1];
        let background = vec![vec![0.3, 0.3], vec![-1.2, -1.2]];
        let (phi, _) = brute_force_shapley(f, &[2.0, 2.0], &background).unwrap();
        assert!((phi[0] - phi[1]).abs() < 1e-12);
    }

    #[test]
    fn majority_vote_hand_computed_table() {
        // f = [x0 + x1 + x2 >= 2], row (1,1,0), 4-row background.
        // Working the 8-coalition table by hand gives phi = (1/4, 1/4, -1/4)
        // and base 3/4.
        let f = |x: &[f64]| f64::from(x[0] + x[1] + x[2] >= 2.0);
        let background = vec![
            vec![0.0, 0.0, 0.0],
            vec![1.0, 0.0, 1.0],
            vec![0.0, 1.0, 1.0],
            vec![1.0, 1.0, 0.0],
        ];
        let (phi, base) = brute_force_shapley(f, &[1.0, 1.0, 0.0], &background).unwrap();
        assert!((base - 0.75).abs() < 1e-12);
        assert!((phi[0] - 0.25).abs() < 1e-12);
        assert!((phi[1] - 0.25).abs() < 1e-12);
        assert!((phi[2] + 0.25).abs() < 1e-12);
        // efficiency: base + sum(phi) = f(row)
        let total: f64 = base + phi.iter().sum::<f64>();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_many_features_refused() {
        let row = vec![0.0; 13];
        let background = vec![vec![0.0; 13]];
        let err = brute_force_shapley(|_| 0.0, &row, &background).unwrap_err();
        assert!(matches!(err, Error::TooManyFeatures { max: 12, got: 13 }));
    }

    fn demo_shap() -> (ShapMatrix<f64>, Vec<f64>) {
        let values = vec![
            vec![0.5, -0.2, 0.1],
            vec![-0.3, 0.4, 0.2],
            vec![0.0, 0.0, -0.6],
        ];
        let shap = ShapMatrix::new(0.25, values, None).unwrap();
        let margins: Vec<f64> = (0..3).map(|r| shap.reconstructed_margin(r)).collect();
        (shap, margins)
    }

    #[test]
    fn empty_removal_is_identity() {
        let (shap, margins) = demo_shap();
        let out = anticipated_without(&shap, &margins, &[]).unwrap();
        assert_eq!(out.margins, margins);
        for (p, m) in out.probabilities.iter().zip(&margins) {
            assert_eq!(*p, sigmoid(*m));
        }
    }

    #[test]
    fn full_removal_collapses_to_base() {
        let (shap, margins) = demo_shap();
        let out = anticipated_without(&shap, &margins, &[0, 1, 2]).unwrap();
        for m in out.margins {
            assert!((m - 0.25).abs() < 1e-12);
        }
    }

    /// The correlated-duplicate failure mode: with all weight on feature `a`
    /// (a == b exactly), anticipating the removal of `a` alone mispredicts
    /// badly, while anticipating the removal of the whole group {a, b}
    /// matches a genuinely retrained model. Oracle: actually retrain.
    #[test]
    fn duplicated_column_group_removal_matches_retraining() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 400;
        let mut a = Vec::with_capacity(n);
        let mut c = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let xa: f64 = rng.gen_range(-2.0..2.0);
            let xc: f64 = rng.gen_range(-2.0..2.0);
            let logit = 2.0 * xa + 0.8 * xc;
            y.push(u8::from(rng.gen::<f64>() < sigmoid(logit)));
            a.push(xa);
            c.push(xc);
        }
        let table = FeatureTable::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![a.clone(), a, c],
        )
        .unwrap();
        let labels = LabelVector::new(y).unwrap();
        let all_rows: Vec<usize> = (0..n).collect();

        // Model with every unit of the duplicated signal on `a`.
        let model = LinearScorer::new(vec![0, 1, 2], vec![2.0, 0.0, 0.5], 0.0).unwrap();
        let means = table.column_means(&all_rows);
        let shap = linear_shap(&model, &table, &means).unwrap();
        let margins = model.margins(&table).unwrap();

        let config = TrainConfig { epochs: 1500, ..TrainConfig::default() };
        let labels_slice = labels.values().to_vec();
        let auc_of = |scores: &[f64]| auc(scores, &labels_slice).unwrap();

        // Remove {a} alone.
        let single = anticipated_without(&shap, &margins, &[0]).unwrap();
        let retrained_without_a = train(&table, &labels, &[1, 2], &config).unwrap();
        let single_actual = auc_of(&retrained_without_a.margins(&table).unwrap());
        let single_anticipated = auc_of(&single.margins);
        let single_error = (single_anticipated - single_actual).abs();

        // Remove the whole duplicated group {a, b}.
        let group = anticipated_without(&shap, &margins, &[0, 1]).unwrap();
        let retrained_without_ab = train(&table, &labels, &[2], &config).unwrap();
        let group_actual = auc_of(&retrained_without_ab.margins(&table).unwrap());
        let group_anticipated = auc_of(&group.margins);
        let group_error = (group_anticipated - group_actual).abs();

        // b recovers a's signal after retraining, so the single-feature
        // anticipation is far off while the group anticipation is near-exact.
        assert!(group_error < 1e-9, "group error {group_error}");
        assert!(single_error > 0.05, "single error {single_error}");
        assert!(single_anticipated < single_actual);
    }

    #[test]
    fn shap_csv_round_trip() {
        let (shap, _) = demo_shap();
        let names = vec!["a".into(), "b".into(), "c".into()];
        let mut bytes = Vec::new();
        write_shap_csv(&shap, &names, &mut bytes).unwrap();
        let (back, back_names) = read_shap_csv::<f64, _>(bytes.as_slice()).unwrap();
        assert_eq!(back_names, names);
        assert_eq!(back.base_value(), shap.base_value());
        for r in 0..shap.n_rows() {
            assert_eq!(back.row(r), shap.row(r));
        }
    }

    proptest! {
        /// base + sum(phi) reproduces margins, and removals telescope:
        /// anticipated(A u B) = anticipated(A) - sum_B phi for disjoint A, B.
        #[test]
        fn additivity_and_telescoping(
            raw in proptest::collection::vec(
                proptest::collection::vec(-1000i32..1000, 6),
                1..12,
            ),
            split_at in 0usize..6,
        ) {
            let values: Vec<Vec<f64>> = raw
                .iter()
                .map(|row| row.iter().map(|&v| f64::from(v) / 128.0).collect())
                .collect();
            let shap = ShapMatrix::new(0.5, values, None).unwrap();
            let margins: Vec<f64> =
                (0..shap.n_rows()).map(|r| shap.reconstructed_margin(r)).collect();

            let a: Vec<usize> = (0..split_at).collect();
            let b: Vec<usize> = (split_at..6).collect();
            let both: Vec<usize> = (0..6).collect();

            let out_a = anticipated_without(&shap, &margins, &a).unwrap();
            let out_ab = anticipated_without(&shap, &margins, &both).unwrap();
            for r in 0..shap.n_rows() {
                let sum_b: f64 = b.iter().map(|&j| shap.value(r, j)).sum();
                prop_assert!((out_ab.margins[r] - (out_a.margins[r] - sum_b)).abs() < 1e-9);
                // full removal hits the base value
                let all_removed = anticipated_without(&shap, &margins, &both).unwrap();
                prop_assert!((all_removed.margins[r]
                    - (margins[r] - (margins[r] - shap.base_value()))).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn dummy_feature_changes_nothing() {
        let table = FeatureTable::new(
            vec!["live".into(), "dead".into()],
            vec![vec![1.0, -2.0, 0.5], vec![10.0, 20.0, 30.0]],
        )
        .unwrap();
        let model = LinearScorer::new(vec![0, 1], vec![1.2, 0.0], 0.1).unwrap();
        let shap = linear_shap(&model, &table, &[0.0, 20.0]).unwrap();
        let margins = model.margins(&table).unwrap();
        for r in 0..3 {
            assert_eq!(shap.value(r, 1), 0.0);
        }
        let out = anticipated_without(&shap, &margins, &[1]).unwrap();
        assert_eq!(out.margins, margins);
    }
}
