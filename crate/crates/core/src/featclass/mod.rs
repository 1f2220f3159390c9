//! Edge featurisation and the logistic-regression link classifier.

mod logistic;
mod operator;

pub use logistic::{
    export_classifier, logistic_objective, predict, train_classifier, train_classifier_traced,
    Classifier, ClassifierParams, TrainingMeta, DECISION_THRESHOLD,
};
pub use operator::{edge_features, EdgeOperator};
