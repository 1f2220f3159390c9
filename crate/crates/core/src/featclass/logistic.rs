use std::cmp::Ordering;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EdgeOperator;
use crate::error::{Error, Result};
use crate::math::{dot, sigmoid, softplus};

pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierParams {
    pub lr: f64,
    pub epochs: usize,
    pub l2_reg: f64,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        ClassifierParams {
            lr: 0.1,
            epochs: 1000,
            l2_reg: 1e-4,
        }
    }
}

impl ClassifierParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::param(format!("classifier lr must be > 0, got {}", self.lr)));
        }
        if !(self.l2_reg.is_finite() && self.l2_reg >= 0.0) {
            return Err(Error::param(format!("l2_reg must be >= 0, got {}", self.l2_reg)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub iterations: usize,
    pub final_loss: f64,
    /// Recorded for provenance only; training consumes no randomness.
    pub seed: u64,
    pub params: ClassifierParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub operator: Option<EdgeOperator>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub meta: TrainingMeta,
}

impl Classifier {
    pub fn with_operator(mut self, op: EdgeOperator) -> Self {
        self.operator = Some(op);
        self
    }

    pub fn predict_label(&self, features: &[f64]) -> Result<bool> {
        Ok(predict(self, features)? >= DECISION_THRESHOLD)
    }
}

/// Mean logistic loss plus `(l2/2)·|w|²`, and its gradient `(∇w, ∇b)`.
///
/// Rows are summed in the order given.
pub fn logistic_objective(
    weights: &[f64],
    bias: f64,
    features: &[Vec<f64>],
    labels: &[bool],
    l2_reg: f64,
) -> (f64, Vec<f64>, f64) {
    let n = features.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; weights.len()];
    let mut gb = 0.0;
    for (x, &y) in features.iter().zip(labels) {
        let z = dot(weights, x) + bias;
        let y = if y { 1.0 } else { 0.0 };
        loss += softplus(z) - y * z;
        let r = sigmoid(z) - y;
        for (g, xi) in gw.iter_mut().zip(x) {
            *g += r * xi;
        }
        gb += r;
    }
    let w2: f64 = weights.iter().map(|w| w * w).sum();
    loss = loss / n + 0.5 * l2_reg * w2;
    for (g, w) in gw.iter_mut().zip(weights) {
        *g = *g / n + l2_reg * w;
    }
    (loss, gw, gb / n)
}

/// Row order independent of input order: by label, then features
/// lexicographically under `total_cmp`.
fn canonical_order(features: &[Vec<f64>], labels: &[bool]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..features.len()).collect();
    idx.sort_by(|&a, &b| {
        labels[a].cmp(&labels[b]).then_with(|| {
            features[a]
                .iter()
                .zip(&features[b])
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        })
    });
    idx
}

/// Full-batch gradient descent from `w = 0, b = 0` for exactly
/// `params.epochs` iterations.
pub fn train_classifier(
    features: &[Vec<f64>],
    labels: &[bool],
    params: &ClassifierParams,
    seed: u64,
) -> Result<Classifier> {
    train_classifier_traced(features, labels, params, seed, |_, _| {})
}

/// As [`train_classifier`], calling `on_iter(iteration, loss)` with the loss
/// before each update.
pub fn train_classifier_traced(
    features: &[Vec<f64>],
    labels: &[bool],
    params: &ClassifierParams,
    seed: u64,
    mut on_iter: impl FnMut(usize, f64),
) -> Result<Classifier> {
    params.validate()?;
    if features.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: features.len(),
            right: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&y| y).count();
    if features.len() < 2 || n_pos == 0 || n_pos == labels.len() {
        return Err(Error::DegenerateTrainingSet(format!(
            "{} examples, {} positive; need both classes",
            labels.len(),
            n_pos
        )));
    }
    let m = features[0].len();
    if let Some(bad) = features.iter().find(|x| x.len() != m) {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: bad.len(),
        });
    }
    if features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateTrainingSet("non-finite feature value".into()));
    }

    let order = canonical_order(features, labels);
    let xs: Vec<Vec<f64>> = order.iter().map(|&i| features[i].clone()).collect();
    let ys: Vec<bool> = order.iter().map(|&i| labels[i]).collect();

    let mut w = vec![0.0; m];
    let mut b = 0.0;
    for it in 0..params.epochs {
        let (loss, gw, gb) = logistic_objective(&w, b, &xs, &ys, params.l2_reg);
        if !loss.is_finite() {
            return Err(Error::ClassifierDiverged { iteration: it, loss });
        }
        on_iter(it, loss);
        for (wi, gi) in w.iter_mut().zip(&gw) {
            *wi -= params.lr * gi;
        }
        b -= params.lr * gb;
    }
    let (final_loss, _, _) = logistic_objective(&w, b, &xs, &ys, params.l2_reg);
    if !final_loss.is_finite() {
        return Err(Error::ClassifierDiverged {
            iteration: params.epochs,
            loss: final_loss,
        });
    }

    Ok(Classifier {
        operator: None,
        weights: w,
        bias: b,
        meta: TrainingMeta {
            iterations: params.epochs,
            final_loss,
            seed,
            params: params.clone(),
        },
    })
}

/// `σ(w·x + b)`.
pub fn predict(c: &Classifier, features: &[f64]) -> Result<f64> {
    if features.len() != c.weights.len() {
        return Err(Error::DimensionMismatch {
            expected: c.weights.len(),
            got: features.len(),
        });
    }
    Ok(sigmoid(dot(&c.weights, features) + c.bias))
}

pub fn export_classifier(c: &Classifier, path: &Path) -> Result<()> {
    let mut json = serde_json::to_string_pretty(c)?;
    json.push('\n');
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model(w: Vec<f64>, b: f64) -> Classifier {
        Classifier {
            operator: None,
            weights: w,
            bias: b,
            meta: TrainingMeta {
                iterations: 0,
                final_loss: 0.0,
                seed: 0,
                params: ClassifierParams::default(),
            },
        }
    }

    #[test]
    fn separable_one_dimensional() {
        let xs = vec![vec![-1.0], vec![1.0]];
        let ys = vec![false, true];
        let params = ClassifierParams {
            lr: 0.5,
            epochs: 500,
            l2_reg: 0.0,
        };
        let c = train_classifier(&xs, &ys, &params, 0).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert_eq!(c.predict_label(x).unwrap(), *y);
        }
        assert_eq!(c.meta.iterations, 500);
    }

    #[test]
    fn zero_features_stay_at_half() {
        let xs = vec![vec![0.0, 0.0]; 4];
        let ys = vec![true, false, true, false];
        let c = train_classifier(&xs, &ys, &ClassifierParams::default(), 0).unwrap();
        assert!(c.weights.iter().all(|&w| w == 0.0));
        assert_eq!(c.bias, 0.0);
        for x in &xs {
            assert_eq!(predict(&c, x).unwrap(), 0.5);
        }
    }

    #[test]
    fn single_class_is_degenerate() {
        let xs = vec![vec![1.0], vec![2.0]];
        let err = train_classifier(&xs, &[true, true], &ClassifierParams::default(), 0).unwrap_err();
        assert!(err.to_string().contains("degenerate training set"));
        assert!(train_classifier(&xs[..1], &[true], &ClassifierParams::default(), 0).is_err());
    }

    #[test]
    fn non_finite_features_rejected() {
        let xs = vec![vec![1.0], vec![f64::NAN]];
        assert!(train_classifier(&xs, &[true, false], &ClassifierParams::default(), 0).is_err());
    }

    #[test]
    fn divergence_reported() {
        let xs = vec![vec![1e200], vec![-1e200]];
        let params = ClassifierParams {
            lr: 1e200,
            epochs: 10,
            l2_reg: 1.0,
        };
        let err = train_classifier(&xs, &[true, false], &params, 0).unwrap_err();
        assert!(matches!(err, Error::ClassifierDiverged { .. }), "{err}");
    }

    #[test]
    fn predict_examples() {
        assert_eq!(predict(&model(vec![0.0, 0.0], 0.0), &[3.0, -7.0]).unwrap(), 0.5);
        assert_eq!(predict(&model(vec![1.0], 0.0), &[0.0]).unwrap(), 0.5);
        assert!(predict(&model(vec![1.0], 0.0), &[0.0, 1.0]).is_err());
        let c = model(vec![1.0], 0.0);
        assert!(predict(&c, &[0.5]).unwrap() < predict(&c, &[0.6]).unwrap());
    }

    #[test]
    fn loss_is_non_increasing_with_small_lr() {
        let xs: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let a = (i as f64 * 0.37).sin();
                let b = (i as f64 * 1.3).cos();
                vec![a, b]
            })
            .collect();
        let ys: Vec<bool> = xs.iter().map(|x| x[0] + 0.3 * x[1] > 0.1).collect();
        let params = ClassifierParams {
            lr: 0.01,
            epochs: 2000,
            l2_reg: 1e-4,
        };
        let mut losses = Vec::new();
        train_classifier_traced(&xs, &ys, &params, 0, |_, l| losses.push(l)).unwrap();
        assert_eq!(losses.len(), 2000);
        for w in losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
        }
    }

    proptest! {
        #[test]
        fn prediction_strictly_inside_unit_interval(
            w in proptest::collection::vec(-1e6f64..1e6, 3),
            x in proptest::collection::vec(-1e6f64..1e6, 3),
            b in -1e6f64..1e6,
        ) {
            let p = predict(&model(w, b), &x).unwrap();
            prop_assert!(p > 0.0 && p < 1.0);
        }

        #[test]
        fn row_permutation_leaves_classifier_identical(
            rows in proptest::collection::vec((proptest::collection::vec(-2.0f64..2.0, 3), any::<bool>()), 4..12),
            rot in 0usize..12,
        ) {
            let mut rows = rows;
            rows[0].1 = true;
            rows[1].1 = false;
            let (xs, ys): (Vec<_>, Vec<_>) = rows.iter().cloned().unzip();
            let params = ClassifierParams { lr: 0.3, epochs: 50, l2_reg: 1e-3 };
            let a = train_classifier(&xs, &ys, &params, 1).unwrap();
            let mut perm = rows.clone();
            perm.rotate_left(rot % rows.len());
            perm.reverse();
            let (xs2, ys2): (Vec<_>, Vec<_>) = perm.into_iter().unzip();
            let b = train_classifier(&xs2, &ys2, &params, 1).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
