//! Synthetic tabular data with planted structure.
//!
//! Each group of features is a noisy copy of one latent factor, so intra-group
//! correlations are high and inter-group correlations hover near zero. Labels
//! come from a logistic model over the factors. Optional extras:
//!
//! - bridge features loading on two adjacent factors, which knit groups
//!   together once the correlation threshold drops low enough;
//! - a proxy group whose factor IS the sensitive attribute, planting a
//!   controllable amount of demographic disparity;
//! - pure-noise features that pad the candidate set.
//!
//! Everything is generated from one seed and is fully reproducible.

use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::model::sigmoid;
use crate::scalar::Scalar;
use crate::tabular::{FeatureTable, LabelVector, SensitiveVault};

/// Recipe for one synthetic dataset.
#[derive(Debug, Clone)]
pub struct SyntheticSpec<T> {
    pub n_rows: usize,
    pub n_groups: usize,
    pub features_per_group: usize,
    /// Noise scale on the first feature of each group (the "clean" copy the
    /// trainer tends to favor).
    pub clean_noise: T,
    /// Noise scale on the remaining sibling copies.
    pub sibling_noise: T,
    /// Logit weight per group factor; cycled if shorter than `n_groups`.
    pub group_weights: Vec<T>,
    /// Bridge features spanning consecutive group pairs.
    pub n_bridges: usize,
    /// Loading of a bridge on each of its two factors.
    pub bridge_loading: T,
    /// Unstructured standard-normal features.
    pub n_noise: usize,
    /// Group whose factor is the sensitive attribute (+-1), if any.
    pub proxy_group: Option<usize>,
    /// Logit weight of the proxy factor.
    pub proxy_weight: T,
    pub intercept: T,
    pub seed: u64,
}

impl<T: Scalar> Default for SyntheticSpec<T> {
    fn default() -> Self {
        Self {
            n_rows: 2000,
            n_groups: 5,
            features_per_group: 4,
            clean_noise: T::from_f64_lossy(0.05),
            sibling_noise: T::from_f64_lossy(0.3),
            group_weights: vec![
                T::from_f64_lossy(1.0),
                T::from_f64_lossy(0.8),
                T::from_f64_lossy(1.2),
                T::from_f64_lossy(0.9),
                T::from_f64_lossy(1.1),
            ],
            n_bridges: 0,
            bridge_loading: T::from_f64_lossy(0.45),
            n_noise: 0,
            proxy_group: None,
            proxy_weight: T::from_f64_lossy(0.6),
            intercept: T::zero(),
            seed: 0,
        }
    }
}

impl<T: Scalar> SyntheticSpec<T> {
    /// Plain planted-group data: factors carry all the signal, no sensitive
    /// structure beyond an independent coin-flip attribute.
    pub fn correlated_groups(n_groups: usize, features_per_group: usize, seed: u64) -> Self {
        Self { n_groups, features_per_group, seed, ..Self::default() }
    }

    /// Adds a proxy cluster: the given group's factor is the sensitive
    /// attribute itself, so its features leak group membership.
    pub fn with_proxy(mut self, group: usize, weight: T) -> Self {
        self.proxy_group = Some(group);
        self.proxy_weight = weight;
        self
    }

    pub fn with_bridges(mut self, n_bridges: usize, loading: T) -> Self {
        self.n_bridges = n_bridges;
        self.bridge_loading = loading;
        self
    }

    pub fn with_noise_features(mut self, n_noise: usize) -> Self {
        self.n_noise = n_noise;
        self
    }

    pub fn with_rows(mut self, n_rows: usize) -> Self {
        self.n_rows = n_rows;
        self
    }
}

fn gauss<T: Scalar>(rng: &mut ChaCha8Rng) -> T {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    T::from_f64_lossy((-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos())
}

/// Generates the dataset described by the spec.
pub fn generate<T: Scalar>(
    spec: &SyntheticSpec<T>,
) -> Result<(FeatureTable<T>, LabelVector, SensitiveVault)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_rows;

    // sensitive attribute: coin flip per row, "1" privileged, "0" reference
    let sensitive: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.5))).collect();

    // latent factors
    let mut factors: Vec<Vec<T>> = Vec::with_capacity(spec.n_groups);
    for g in 0..spec.n_groups {
        if spec.proxy_group == Some(g) {
            factors.push(
                sensitive
                    .iter()
                    .map(|&s| if s == 1 { T::one() } else { -T::one() })
                    .collect(),
            );
        } else {
            factors.push((0..n).map(|_| gauss(&mut rng)).collect());
        }
    }

    let mut names = Vec::new();
    let mut columns = Vec::new();
    for (g, factor) in factors.iter().enumerate() {
        for k in 0..spec.features_per_group {
            let noise = if k == 0 { spec.clean_noise } else { spec.sibling_noise };
            let column: Vec<T> = factor.iter().map(|&z| z + noise * gauss(&mut rng)).collect();
            names.push(format!("g{g}_f{k}"));
            columns.push(column);
        }
    }

    // bridges between consecutive factors, unit-ish variance
    if spec.n_groups >= 2 {
        for b in 0..spec.n_bridges {
            let left = b % (spec.n_groups - 1);
            let right = left + 1;
            let loading = spec.bridge_loading;
            let resid = (T::one() - (loading * loading + loading * loading))
                .max(T::from_f64_lossy(0.05))
                .sqrt();
            let column: Vec<T> = (0..n)
                .map(|r| {
                    loading * factors[left][r] + loading * factors[right][r] + resid * gauss(&mut rng)
                })
                .collect();
            names.push(format!("bridge{left}_{right}_{b}"));
            columns.push(column);
        }
    }

    for k in 0..spec.n_noise {
        names.push(format!("noise{k}"));
        columns.push((0..n).map(|_| gauss(&mut rng)).collect());
    }

    // labels from the factors
    let mut labels = Vec::with_capacity(n);
    for r in 0..n {
        let mut logit = spec.intercept;
        for (g, factor) in factors.iter().enumerate() {
            let w = if spec.proxy_group == Some(g) {
                spec.proxy_weight
            } else if spec.group_weights.is_empty() {
                T::one()
            } else {
                spec.group_weights[g % spec.group_weights.len()]
            };
            logit = logit + w * factor[r];
        }
        let p = sigmoid(logit).to_f64_lossy();
        labels.push(u8::from(rng.gen::<f64>() < p));
    }

    let table = FeatureTable::new(names, columns)?;
    let levels = vec!["0".to_owned(), "1".to_owned()];
    let codes: Vec<u32> = sensitive.iter().map(|&s| u32::from(s)).collect();
    let vault = SensitiveVault::new("sensitive".into(), levels, codes, 1, 0)?;
    Ok((table, LabelVector::new(labels)?, vault))
}

/// Writes features + label + sensitive column as the CSV the loader reads.
pub fn write_dataset_csv<T: Scalar, W: Write>(
    table: &FeatureTable<T>,
    labels: &LabelVector,
    vault: &SensitiveVault,
    mut out: W,
) -> Result<()> {
    let mut header: Vec<String> = table.names().to_vec();
    header.push("label".into());
    header.push(vault.attribute().to_owned());
    writeln!(out, "{}", header.join(","))?;
    for r in 0..table.n_rows() {
        let mut fields: Vec<String> = (0..table.n_features())
            .map(|j| format!("{}", table.value(r, j).to_f64_lossy()))
            .collect();
        fields.push(labels.get(r).to_string());
        fields.push(vault.level_name(vault.code(r)).to_owned());
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}
