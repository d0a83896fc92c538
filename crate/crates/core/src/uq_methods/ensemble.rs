//! k-fold ensembling: one network per fold, μ and σ from the spread of the
//! member predictions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{split_k_folds, DataError, LabeledDataset, PredictionSet, RngSeed};
use crate::neural::{train, MlpConfig, MlpModel, NeuralError, TrainConfig};
use crate::numerics::mean_and_sample_std;

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error("ensemble needs k >= 2 members, got {0}")]
    InvalidK(usize),
    #[error("member {member} would train on {size} samples; at least 2 are required")]
    FoldTooSmall { member: usize, size: usize },
    #[error("ensemble member {member} failed: {source}")]
    Member {
        member: usize,
        #[source]
        source: NeuralError,
    },
    #[error("member outputs disagree in length")]
    RaggedMembers,
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemberTraining {
    /// Member `i` trains on fold `i` alone.
    #[default]
    OneFoldEach,
    /// Member `i` trains on every fold except `i`.
    LeaveOneFoldOut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub k: usize,
    #[serde(default)]
    pub member_training: MemberTraining,
    pub mlp: MlpConfig,
    pub train: TrainConfig,
    /// Seed for the fold assignment.
    pub split_seed: RngSeed,
}

/// Trains the `k` members. Member `i` gets its own initialization and
/// shuffling streams derived from the base seeds.
pub fn train_ensemble(data: &LabeledDataset, spec: &EnsembleSpec) -> Result<Vec<MlpModel>, EnsembleError> {
    if spec.k < 2 {
        return Err(EnsembleError::InvalidK(spec.k));
    }
    let folds = split_k_folds(data, spec.k, spec.split_seed)?;
    let mut members = Vec::with_capacity(spec.k);
    for member in 0..spec.k {
        let training = match spec.member_training {
            MemberTraining::OneFoldEach => folds[member].clone(),
            MemberTraining::LeaveOneFoldOut => {
                let rest: Vec<&LabeledDataset> = folds
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != member)
                    .map(|(_, f)| f)
                    .collect();
                LabeledDataset::concat(&rest)?
            }
        };
        if training.len() < 2 {
            return Err(EnsembleError::FoldTooSmall {
                member,
                size: training.len(),
            });
        }
        let wrap = |source| EnsembleError::Member { member, source };
        let mlp = MlpConfig {
            seed: spec.mlp.seed.derive(member as u64),
            ..spec.mlp.clone()
        };
        let cfg = TrainConfig {
            seed: spec.train.seed.derive(member as u64),
            ..spec.train.clone()
        };
        let model = MlpModel::new(mlp).map_err(wrap)?;
        log::info!("training ensemble member {member} on {} samples", training.len());
        members.push(train(model, &training, &cfg).map_err(wrap)?.model);
    }
    Ok(members)
}

/// Combines per-member predictions (`member_outputs[i][j]` is member `i` on
/// test row `j`) into μ = mean and σ = Bessel-corrected std.
pub fn aggregate_members(test: &LabeledDataset, member_outputs: &[Vec<f64>]) -> Result<PredictionSet, EnsembleError> {
    if member_outputs.len() < 2 {
        return Err(EnsembleError::InvalidK(member_outputs.len()));
    }
    let n = test.ids.len();
    if member_outputs.iter().any(|m| m.len() != n) {
        return Err(EnsembleError::RaggedMembers);
    }
    let mut mu = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    let mut column = vec![0.0; member_outputs.len()];
    for j in 0..n {
        column.iter_mut().zip(member_outputs).for_each(|(c, m)| *c = m[j]);
        let (m, s) = mean_and_sample_std(&column);
        mu.push(m);
        sigma.push(s);
    }
    Ok(PredictionSet {
        ids: test.ids.clone(),
        y_true: test.targets.clone(),
        mu,
        sigma,
        groups: test.groups.clone(),
    })
}

pub fn ensemble_predict(members: &[MlpModel], test: &LabeledDataset) -> Result<PredictionSet, EnsembleError> {
    let outputs = members
        .iter()
        .enumerate()
        .map(|(member, m)| {
            test.features
                .iter()
                .map(|x| m.predict(x).map(|o| o[0]))
                .collect::<Result<Vec<f64>, _>>()
                .map_err(|source| EnsembleError::Member { member, source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    aggregate_members(test, &outputs)
}

pub fn kfold_ensemble_predict(
    train_data: &LabeledDataset,
    test: &LabeledDataset,
    spec: &EnsembleSpec,
) -> Result<PredictionSet, EnsembleError> {
    let members = train_ensemble(train_data, spec)?;
    ensemble_predict(&members, test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::validate_prediction_set;
    use crate::neural::{Activation, LossKind, Optimizer};

    fn toy(n: usize) -> LabeledDataset {
        let xs: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / n as f64 - 0.5]).collect();
        let ys = xs.iter().map(|x| 3.0 * x[0]).collect();
        LabeledDataset::new((0..n).map(|i| format!("r{i}")).collect(), xs, ys, None).unwrap()
    }

    fn spec(k: usize, policy: MemberTraining) -> EnsembleSpec {
        EnsembleSpec {
            k,
            member_training: policy,
            mlp: MlpConfig {
                layer_widths: vec![1, 8, 1],
                activation: Activation::Tanh,
                dropout_rate: 0.0,
                seed: RngSeed::new(1),
            },
            train: TrainConfig {
                epochs: 20,
                batch_size: 8,
                learning_rate: 0.05,
                loss: LossKind::SquaredError,
                optimizer: Optimizer::Sgd,
                seed: RngSeed::new(2),
            },
            split_seed: RngSeed::new(3),
        }
    }

    #[test]
    fn two_point_bessel_std() {
        let test = toy(3);
        let p = aggregate_members(&test, &[vec![1.0; 3], vec![3.0; 3]]).unwrap();
        assert!(p.mu.iter().all(|m| *m == 2.0));
        for s in &p.sigma {
            assert!((s - 2f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn identical_members_give_zero_sigma() {
        let data = toy(40);
        let single = MlpModel::new(spec(2, MemberTraining::OneFoldEach).mlp).unwrap();
        let p = ensemble_predict(&[single.clone(), single.clone(), single], &data).unwrap();
        assert!(p.sigma.iter().all(|s| *s == 0.0));
    }

    #[test]
    fn five_fold_output_is_valid() {
        let data = toy(100);
        for policy in [MemberTraining::OneFoldEach, MemberTraining::LeaveOneFoldOut] {
            let p = kfold_ensemble_predict(&data, &toy(20), &spec(5, policy)).unwrap();
            assert_eq!(p.len(), 20);
            assert!(p.sigma.iter().any(|s| *s > 0.0));
            validate_prediction_set(p).unwrap();
        }
    }

    #[test]
    fn degenerate_folds_rejected() {
        let data = toy(6);
        let err = train_ensemble(&data, &spec(6, MemberTraining::OneFoldEach)).unwrap_err();
        assert!(matches!(err, EnsembleError::FoldTooSmall { member: 0, size: 1 }));
        assert!(train_ensemble(&data, &spec(6, MemberTraining::LeaveOneFoldOut)).is_ok());
        assert!(matches!(
            train_ensemble(&data, &spec(1, MemberTraining::OneFoldEach)),
            Err(EnsembleError::InvalidK(1))
        ));
    }

    #[test]
    fn failing_member_names_its_index() {
        let mut s = spec(2, MemberTraining::OneFoldEach);
        s.mlp.layer_widths = vec![3, 4, 1];
        let err = train_ensemble(&toy(10), &s).unwrap_err();
        assert!(matches!(err, EnsembleError::Member { member: 0, .. }));
    }

    #[test]
    fn deterministic() {
        let data = toy(60);
        let s = spec(3, MemberTraining::OneFoldEach);
        assert_eq!(
            kfold_ensemble_predict(&data, &data, &s).unwrap(),
            kfold_ensemble_predict(&data, &data, &s).unwrap()
        );
    }
}
