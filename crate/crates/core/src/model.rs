//! Binary linear classifier with a logistic link, plus rank-based AUC.
//!
//! Training is full-batch gradient descent on L2-regularized log-loss,
//! starting from zero weights, so identical inputs give bit-identical models.
//! The linear link keeps interventional attributions closed-form; the trainer
//! sits behind [`LinearScorer`] so other model families can slot in later.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tabular::{FeatureTable, LabelVector};

/// Numerically stable logistic sigmoid.
pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// log(1 + e^x) without overflow.
fn softplus<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Trained linear model over an active feature subset.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearScorer<T> {
    active: Vec<usize>,
    weights: Vec<T>,
    bias: T,
}

impl<T: Scalar> LinearScorer<T> {
    pub fn new(active: Vec<usize>, weights: Vec<T>, bias: T) -> Result<Self> {
        if active.len() != weights.len() {
            return Err(Error::Validation(format!(
                "{} weights for {} active features",
                weights.len(),
                active.len()
            )));
        }
        Ok(Self { active, weights, bias })
    }

    /// Active feature indices, ascending.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn bias(&self) -> T {
        self.bias
    }

    /// Weight of a feature, zero if inactive.
    pub fn weight_of(&self, feature: usize) -> T {
        match self.active.binary_search(&feature) {
            Ok(k) => self.weights[k],
            Err(_) => T::zero(),
        }
    }

    /// Margin `bias + sum w_j x_j` for one full-width feature row.
    pub fn margin(&self, row: &[T]) -> Result<T> {
        let mut z = self.bias;
        for (k, &j) in self.active.iter().enumerate() {
            let x = row.get(j).ok_or_else(|| {
                Error::FeatureMismatch(format!(
                    "row has {} features, model needs index {j}",
                    row.len()
                ))
            })?;
            z = z + self.weights[k] * *x;
        }
        Ok(z)
    }

    pub fn predict_proba(&self, row: &[T]) -> Result<T> {
        Ok(sigmoid(self.margin(row)?))
    }

    /// Margins for every table row.
    pub fn margins(&self, table: &FeatureTable<T>) -> Result<Vec<T>> {
        let all: Vec<usize> = (0..table.n_rows()).collect();
        self.margins_rows(table, &all)
    }

    /// Margins for a row subset, in the given order.
    pub fn margins_rows(&self, table: &FeatureTable<T>, rows: &[usize]) -> Result<Vec<T>> {
        for &j in &self.active {
            if j >= table.n_features() {
                return Err(Error::FeatureMismatch(format!(
                    "table has {} features, model needs index {j}",
                    table.n_features()
                )));
            }
        }
        let mut z = vec![self.bias; rows.len()];
        for (k, &j) in self.active.iter().enumerate() {
            let w = self.weights[k];
            let col = table.column(j);
            for (zi, &r) in z.iter_mut().zip(rows) {
                *zi = *zi + w * col[r];
            }
        }
        Ok(z)
    }

    pub fn probabilities_rows(&self, table: &FeatureTable<T>, rows: &[usize]) -> Result<Vec<T>> {
        Ok(self.margins_rows(table, rows)?.into_iter().map(sigmoid).collect())
    }

    /// JSON export: feature names, weights, bias.
    pub fn to_json(&self, names: &[String]) -> Result<String> {
        #[derive(Serialize)]
        struct ModelDoc<'a> {
            schema_version: &'a str,
            features: Vec<&'a str>,
            weights: Vec<f64>,
            bias: f64,
        }
        let doc = ModelDoc {
            schema_version: "model-v1",
            features: self.active.iter().map(|&j| names[j].as_str()).collect(),
            weights: self.weights.iter().map(|w| w.to_f64_lossy()).collect(),
            bias: self.bias.to_f64_lossy(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

/// Gradient-descent hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct TrainConfig<T> {
    pub learning_rate: T,
    pub epochs: usize,
    pub l2: T,
    pub seed: u64,
    /// Stop once the epoch-to-epoch loss delta drops below this.
    pub tolerance: T,
}

impl<T: Scalar> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            learning_rate: T::from_f64_lossy(0.5),
            epochs: 400,
            l2: T::from_f64_lossy(1e-3),
            seed: 0,
            tolerance: T::from_f64_lossy(1e-10),
        }
    }
}

impl<T: Scalar> TrainConfig<T> {
    fn validate(&self) -> Result<()> {
        if self.learning_rate <= T::zero() {
            return Err(Error::Validation("learning rate must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Validation("epochs must be at least 1".into()));
        }
        if self.l2 < T::zero() {
            return Err(Error::Validation("l2 strength must be non-negative".into()));
        }
        Ok(())
    }
}

/// Trains on all rows of the table.
pub fn train<T: Scalar>(
    table: &FeatureTable<T>,
    labels: &LabelVector,
    subset: &[usize],
    config: &TrainConfig<T>,
) -> Result<LinearScorer<T>> {
    let rows: Vec<usize> = (0..table.n_rows()).collect();
    train_rows(table, labels, subset, &rows, config)
}

/// Trains on a row subset (e.g. the training side of a split).
pub fn train_rows<T: Scalar>(
    table: &FeatureTable<T>,
    labels: &LabelVector,
    subset: &[usize],
    rows: &[usize],
    config: &TrainConfig<T>,
) -> Result<LinearScorer<T>> {
    Ok(train_traced(table, labels, subset, rows, config)?.0)
}

/// Like [`train_rows`] but also returns the per-epoch loss trajectory.
pub fn train_traced<T: Scalar>(
    table: &FeatureTable<T>,
    labels: &LabelVector,
    subset: &[usize],
    rows: &[usize],
    config: &TrainConfig<T>,
) -> Result<(LinearScorer<T>, Vec<T>)> {
    config.validate()?;
    if subset.is_empty() {
        return Err(Error::Validation("cannot train on an empty feature subset".into()));
    }
    let mut active: Vec<usize> = subset.to_vec();
    active.sort_unstable();
    active.dedup();
    for &j in &active {
        if j >= table.n_features() {
            return Err(Error::FeatureMismatch(format!(
                "subset index {j} out of range for {} features",
                table.n_features()
            )));
        }
    }
    if labels.len() != table.n_rows() {
        return Err(Error::Validation("labels misaligned with table".into()));
    }
    let y: Vec<u8> = rows.iter().map(|&r| labels.get(r)).collect();
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::SingleClass);
    }

    let n = rows.len();
    let n_t = T::from_count(n);
    let half = T::from_f64_lossy(0.5);
    let mut weights = vec![T::zero(); active.len()];
    let mut bias = T::zero();
    let mut history = Vec::new();
    let mut prev_loss: Option<T> = None;

    for epoch in 0..config.epochs {
        // margins
        let mut z = vec![bias; n];
        for (k, &j) in active.iter().enumerate() {
            let col = table.column(j);
            let w = weights[k];
            for (zi, &r) in z.iter_mut().zip(rows) {
                *zi = *zi + w * col[r];
            }
        }

        // loss = mean log-loss + (l2/2)||w||^2
        let mut loss = T::zero();
        for (zi, &yi) in z.iter().zip(&y) {
            loss = loss + if yi == 1 { softplus(-*zi) } else { softplus(*zi) };
        }
        loss = loss / n_t;
        let penalty = weights.iter().map(|w| *w * *w).sum::<T>();
        loss = loss + half * config.l2 * penalty;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        history.push(loss);

        // residuals p - y
        let residual: Vec<T> = z
            .iter()
            .zip(&y)
            .map(|(zi, &yi)| sigmoid(*zi) - T::from_count(yi as usize))
            .collect();

        for (k, &j) in active.iter().enumerate() {
            let col = table.column(j);
            let mut g = T::zero();
            for (res, &r) in residual.iter().zip(rows) {
                g = g + *res * col[r];
            }
            g = g / n_t + config.l2 * weights[k];
            weights[k] = weights[k] - config.learning_rate * g;
        }
        let g_bias = residual.iter().copied().sum::<T>() / n_t;
        bias = bias - config.learning_rate * g_bias;

        if let Some(prev) = prev_loss {
            if (prev - loss).abs() < config.tolerance {
                break;
            }
        }
        prev_loss = Some(loss);
    }

    Ok((LinearScorer { active, weights, bias }, history))
}

/// Rank-based (Mann-Whitney) AUC with midranks for ties.
pub fn auc<T: Scalar>(scores: &[T], labels: &[u8]) -> Result<T> {
    if scores.len() != labels.len() {
        return Err(Error::Validation("scores and labels differ in length".into()));
    }
    let pos = labels.iter().filter(|&&v| v == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Validation("scores must be finite".into()));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));

    // midranks over tied runs
    let mut rank = vec![T::zero(); scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; tied block [i, j] shares the average rank
        let avg = T::from_count(i + 1 + j + 1) / T::from_count(2);
        for &idx in &order[i..=j] {
            rank[idx] = avg;
        }
        i = j + 1;
    }

    let rank_sum_pos: T = labels
        .iter()
        .zip(&rank)
        .filter(|(&y, _)| y == 1)
        .map(|(_, r)| *r)
        .sum();
    let pos_t = T::from_count(pos);
    let neg_t = T::from_count(neg);
    let half = T::from_f64_lossy(0.5);
    Ok((rank_sum_pos - pos_t * (pos_t + T::one()) * half) / (pos_t * neg_t))
}
