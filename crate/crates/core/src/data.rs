//! Shared data model: labeled datasets, prediction triples and the seeded
//! random-number contract used throughout the crate.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("length mismatch: `{field}` has {found} entries, expected {expected}")]
    LengthMismatch {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in `{field}` at index {index}")]
    NonFiniteValue { field: &'static str, index: usize },
    #[error("negative sigma {value} at index {index}")]
    NegativeSigma { index: usize, value: f64 },
    #[error("duplicate id `{id}` at index {index}")]
    DuplicateId { index: usize, id: String },
    #[error("dataset must contain at least one row")]
    Empty,
    #[error("feature row {row} has {found} columns, expected {expected}")]
    RaggedFeatures { row: usize, expected: usize, found: usize },
    #[error("feature dimension must be at least 1")]
    NoFeatures,
    #[error("cannot split {n} rows into {k} folds")]
    KTooLarge { k: usize, n: usize },
    #[error("fold count must be at least 2, got {k}")]
    KTooSmall { k: usize },
}

/// Seed plus stream selector for the counter-based ChaCha generator.
///
/// Two values with the same `(seed, stream_id)` produce the same sequence on
/// every platform. Consumers that need many independent streams call
/// [`RngSeed::derive`] with a distinct tag per consumer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream_id: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngSeed {
    pub const fn new(seed: u64) -> Self {
        Self { seed, stream_id: 0 }
    }

    pub const fn with_stream(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// A child seed on a different stream. Deriving is deterministic and
    /// chains: `s.derive(a).derive(b)` names a unique stream for `(a, b)`.
    pub fn derive(&self, tag: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id: splitmix64(self.stream_id ^ splitmix64(tag.wrapping_add(0xA076_1D64_78BD_642F))),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

impl Default for RngSeed {
    fn default() -> Self {
        Self::new(0)
    }
}

fn check_len(field: &'static str, expected: usize, found: usize) -> Result<(), DataError> {
    if expected != found {
        return Err(DataError::LengthMismatch { field, expected, found });
    }
    Ok(())
}

fn check_finite(field: &'static str, values: &[f64]) -> Result<(), DataError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(DataError::NonFiniteValue { field, index }),
        None => Ok(()),
    }
}

fn check_unique_ids(ids: &[String]) -> Result<(), DataError> {
    let mut seen = HashSet::with_capacity(ids.len());
    for (index, id) in ids.iter().enumerate() {
        if !seen.insert(id.as_str()) {
            return Err(DataError::DuplicateId { index, id: id.clone() });
        }
    }
    Ok(())
}

/// Feature matrix with scalar targets and optional group tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub ids: Vec<String>,
    /// Row-major, one inner vector per record.
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub groups: Option<Vec<String>>,
    /// Noise standard deviation used to generate each target, when known.
    pub true_sigma: Option<Vec<f64>>,
}

impl LabeledDataset {
    pub fn new(
        ids: Vec<String>,
        features: Vec<Vec<f64>>,
        targets: Vec<f64>,
        groups: Option<Vec<String>>,
    ) -> Result<Self, DataError> {
        let d = Self {
            ids,
            features,
            targets,
            groups,
            true_sigma: None,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let n = self.ids.len();
        if n == 0 {
            return Err(DataError::Empty);
        }
        check_len("features", n, self.features.len())?;
        check_len("targets", n, self.targets.len())?;
        if let Some(g) = &self.groups {
            check_len("groups", n, g.len())?;
        }
        if let Some(s) = &self.true_sigma {
            check_len("true_sigma", n, s.len())?;
            check_finite("true_sigma", s)?;
        }
        let dim = self.features[0].len();
        if dim == 0 {
            return Err(DataError::NoFeatures);
        }
        for (row, x) in self.features.iter().enumerate() {
            if x.len() != dim {
                return Err(DataError::RaggedFeatures {
                    row,
                    expected: dim,
                    found: x.len(),
                });
            }
            if !x.iter().all(|v| v.is_finite()) {
                return Err(DataError::NonFiniteValue {
                    field: "features",
                    index: row,
                });
            }
        }
        check_finite("targets", &self.targets)?;
        check_unique_ids(&self.ids)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let pick_str = |v: &Vec<String>| indices.iter().map(|&i| v[i].clone()).collect();
        let pick_f64 = |v: &Vec<f64>| indices.iter().map(|&i| v[i]).collect();
        Self {
            ids: pick_str(&self.ids),
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            targets: pick_f64(&self.targets),
            groups: self.groups.as_ref().map(pick_str),
            true_sigma: self.true_sigma.as_ref().map(pick_f64),
        }
    }

    /// Concatenation of several datasets sharing the same schema.
    pub fn concat(parts: &[&LabeledDataset]) -> Result<Self, DataError> {
        let mut out = Self {
            ids: Vec::new(),
            features: Vec::new(),
            targets: Vec::new(),
            groups: parts.first().and_then(|p| p.groups.as_ref()).map(|_| Vec::new()),
            true_sigma: parts.first().and_then(|p| p.true_sigma.as_ref()).map(|_| Vec::new()),
        };
        for p in parts {
            out.ids.extend(p.ids.iter().cloned());
            out.features.extend(p.features.iter().cloned());
            out.targets.extend_from_slice(&p.targets);
            if let (Some(dst), Some(src)) = (out.groups.as_mut(), p.groups.as_ref()) {
                dst.extend(src.iter().cloned());
            }
            if let (Some(dst), Some(src)) = (out.true_sigma.as_mut(), p.true_sigma.as_ref()) {
                dst.extend_from_slice(src);
            }
        }
        out.validate()?;
        Ok(out)
    }
}

/// Aligned `(y, mu, sigma)` triples, the input to every metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub ids: Vec<String>,
    pub y_true: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub groups: Option<Vec<String>>,
}

impl PredictionSet {
    pub fn new(
        ids: Vec<String>,
        y_true: Vec<f64>,
        mu: Vec<f64>,
        sigma: Vec<f64>,
        groups: Option<Vec<String>>,
    ) -> Result<Self, DataError> {
        validate_prediction_set(Self {
            ids,
            y_true,
            mu,
            sigma,
            groups,
        })
    }

    /// Builds a set with ids `"0"`, `"1"`, ... for in-memory use.
    pub fn from_arrays(y_true: Vec<f64>, mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self, DataError> {
        let ids = (0..y_true.len()).map(|i| i.to_string()).collect();
        Self::new(ids, y_true, mu, sigma, None)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let n = self.ids.len();
        check_len("y_true", n, self.y_true.len())?;
        check_len("mu", n, self.mu.len())?;
        check_len("sigma", n, self.sigma.len())?;
        if let Some(g) = &self.groups {
            check_len("groups", n, g.len())?;
        }
        check_finite("y_true", &self.y_true)?;
        check_finite("mu", &self.mu)?;
        check_finite("sigma", &self.sigma)?;
        if let Some((index, &value)) = self.sigma.iter().enumerate().find(|(_, s)| **s < 0.0) {
            return Err(DataError::NegativeSigma { index, value });
        }
        check_unique_ids(&self.ids)
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let pick_str = |v: &Vec<String>| indices.iter().map(|&i| v[i].clone()).collect();
        Self {
            ids: pick_str(&self.ids),
            y_true: indices.iter().map(|&i| self.y_true[i]).collect(),
            mu: indices.iter().map(|&i| self.mu[i]).collect(),
            sigma: indices.iter().map(|&i| self.sigma[i]).collect(),
            groups: self.groups.as_ref().map(pick_str),
        }
    }

    pub fn with_sigma(&self, sigma: Vec<f64>) -> Self {
        Self { sigma, ..self.clone() }
    }
}

/// Returns `p` unchanged when every invariant holds.
pub fn validate_prediction_set(p: PredictionSet) -> Result<PredictionSet, DataError> {
    p.validate()?;
    Ok(p)
}

/// Partitions `d` into `k` disjoint folds after a seeded shuffle.
///
/// Fold sizes differ by at most one; the first `n % k` folds get the extra
/// row. Rows keep their original relative order inside a fold.
pub fn split_k_folds(d: &LabeledDataset, k: usize, seed: RngSeed) -> Result<Vec<LabeledDataset>, DataError> {
    let n = d.len();
    if k < 2 {
        return Err(DataError::KTooSmall { k });
    }
    if k > n {
        return Err(DataError::KTooLarge { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed.rng());

    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for j in 0..k {
        let size = base + usize::from(j < extra);
        let mut idx = order[start..start + size].to_vec();
        idx.sort_unstable();
        folds.push(d.subset(&idx));
        start += size;
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> LabeledDataset {
        LabeledDataset::new(
            (0..n).map(|i| format!("r{i}")).collect(),
            (0..n).map(|i| vec![i as f64]).collect(),
            (0..n).map(|i| i as f64 * 0.5).collect(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn well_formed_set_is_returned_unchanged() {
        let p = PredictionSet::from_arrays(vec![1.0, 2.0, 3.0], vec![1.1, 1.9, 3.2], vec![0.1, 0.2, 0.3]).unwrap();
        assert_eq!(validate_prediction_set(p.clone()).unwrap(), p);
    }

    #[test]
    fn negative_sigma_names_index() {
        let p = PredictionSet {
            ids: vec!["a".into(), "b".into()],
            y_true: vec![0.0, 0.0],
            mu: vec![0.0, 0.0],
            sigma: vec![0.1, -0.2],
            groups: None,
        };
        assert_eq!(
            validate_prediction_set(p),
            Err(DataError::NegativeSigma { index: 1, value: -0.2 })
        );
    }

    #[test]
    fn length_mismatch_detected() {
        let p = PredictionSet {
            ids: vec!["a".into(), "b".into(), "c".into()],
            y_true: vec![0.0; 3],
            mu: vec![0.0; 2],
            sigma: vec![0.1; 3],
            groups: None,
        };
        assert!(matches!(
            validate_prediction_set(p),
            Err(DataError::LengthMismatch { field: "mu", .. })
        ));
    }

    #[test]
    fn non_finite_and_duplicates_detected() {
        let mut p = PredictionSet::from_arrays(vec![0.0, 1.0], vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        p.mu[1] = f64::NAN;
        assert_eq!(p.validate(), Err(DataError::NonFiniteValue { field: "mu", index: 1 }));
        p.mu[1] = 1.0;
        p.ids[1] = "0".into();
        assert!(matches!(p.validate(), Err(DataError::DuplicateId { index: 1, .. })));
    }

    #[test]
    fn zero_sigma_is_legal() {
        assert!(PredictionSet::from_arrays(vec![1.0], vec![1.0], vec![0.0]).is_ok());
    }

    #[test]
    fn dataset_invariants() {
        assert_eq!(LabeledDataset::new(vec![], vec![], vec![], None), Err(DataError::Empty));
        let ragged = LabeledDataset::new(
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 2.0], vec![1.0]],
            vec![0.0, 0.0],
            None,
        );
        assert!(matches!(ragged, Err(DataError::RaggedFeatures { row: 1, .. })));
    }

    #[test]
    fn folds_of_exact_division() {
        let d = toy(100);
        let folds = split_k_folds(&d, 5, RngSeed::new(3)).unwrap();
        assert_eq!(folds.len(), 5);
        assert!(folds.iter().all(|f| f.len() == 20));
        let mut all: Vec<String> = folds.iter().flat_map(|f| f.ids.clone()).collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 100);
    }

    /// Enumerates every assignment of 7 rows to 3 folds and keeps the ones
    /// whose sizes differ by at most one; the only admissible size multiset
    /// must be what the splitter produces.
    #[test]
    fn uneven_fold_sizes_match_counting_oracle() {
        let (n, k) = (7usize, 3usize);
        let mut admissible = std::collections::BTreeSet::new();
        for code in 0..k.pow(n as u32) {
            let mut sizes = vec![0usize; k];
            let mut c = code;
            for _ in 0..n {
                sizes[c % k] += 1;
                c /= k;
            }
            if sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1 {
                sizes.sort_unstable();
                admissible.insert(sizes);
            }
        }
        assert_eq!(admissible.len(), 1);
        let oracle = admissible.into_iter().next().unwrap();

        let folds = split_k_folds(&toy(n), k, RngSeed::new(11)).unwrap();
        let mut sizes: Vec<usize> = folds.iter().map(LabeledDataset::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, oracle);
        assert_eq!(sizes, vec![2, 2, 3]);
    }

    #[test]
    fn same_seed_same_folds() {
        let d = toy(37);
        let a = split_k_folds(&d, 4, RngSeed::with_stream(9, 2)).unwrap();
        let b = split_k_folds(&d, 4, RngSeed::with_stream(9, 2)).unwrap();
        assert_eq!(a, b);
        let c = split_k_folds(&d, 4, RngSeed::with_stream(9, 3)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn k_bounds() {
        let d = toy(3);
        assert_eq!(
            split_k_folds(&d, 4, RngSeed::new(0)),
            Err(DataError::KTooLarge { k: 4, n: 3 })
        );
        assert_eq!(
            split_k_folds(&d, 1, RngSeed::new(0)),
            Err(DataError::KTooSmall { k: 1 })
        );
    }

    #[test]
    fn derived_streams_differ_and_repeat() {
        use rand::Rng;
        let s = RngSeed::new(42);
        let a: u64 = s.derive(1).rng().random();
        let b: u64 = s.derive(2).rng().random();
        let a2: u64 = s.derive(1).rng().random();
        assert_ne!(a, b);
        assert_eq!(a, a2);
        assert_ne!(s.derive(1).derive(2), s.derive(2).derive(1));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn folds_cover_input_exactly(n in 2usize..60, k_off in 0usize..10, seed in any::<u64>()) {
                let k = 2 + k_off % (n - 1);
                let d = toy(n);
                let folds = split_k_folds(&d, k, RngSeed::new(seed)).unwrap();
                let mut ids: Vec<String> = folds.iter().flat_map(|f| f.ids.clone()).collect();
                ids.sort();
                let mut expected = d.ids.clone();
                expected.sort();
                prop_assert_eq!(ids, expected);
                let sizes: Vec<usize> = folds.iter().map(LabeledDataset::len).collect();
                prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            }
        }
    }
}
