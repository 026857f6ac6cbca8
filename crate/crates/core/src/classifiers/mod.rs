//! Supervised classifiers over fingerprint vectors, and the persisted model.

pub mod forest;
pub mod logreg;
pub mod model;
pub mod svm;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use forest::{ForestParams, MaxFeatures, RandomForest};
pub use logreg::{LogisticRegression, LogregParams};
pub use model::{load_model, save_model, FingerprintScope, ModelError, ModelMetadata, TrainedModel};
pub use svm::{LinearSvm, SvmParams};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClassifierError {
    #[error("training data has fewer than two classes")]
    SingleClass,
    #[error("input contains a non-finite value")]
    NonFiniteInput,
    #[error("expected rows of width {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("training data is empty")]
    EmptyInput,
    #[error("{0} does not produce probabilities")]
    ProbabilityUnsupported(ClassifierKind),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Logreg,
    LinearSvm,
    RandomForest,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 3] =
        [ClassifierKind::Logreg, ClassifierKind::LinearSvm, ClassifierKind::RandomForest];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::Logreg => "logreg",
            ClassifierKind::LinearSvm => "linear_svm",
            ClassifierKind::RandomForest => "random_forest",
        }
    }
}

impl std::fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Checks shape, finiteness and class count; returns the feature width.
pub(crate) fn check_training(x: &[Vec<f64>], y: &[usize]) -> Result<usize, ClassifierError> {
    if x.is_empty() {
        return Err(ClassifierError::EmptyInput);
    }
    if x.len() != y.len() {
        return Err(ClassifierError::ShapeMismatch { expected: x.len(), found: y.len() });
    }
    let width = x[0].len();
    for row in x {
        if row.len() != width {
            return Err(ClassifierError::ShapeMismatch { expected: width, found: row.len() });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(ClassifierError::NonFiniteInput);
        }
    }
    if y.iter().all(|&c| c == y[0]) {
        return Err(ClassifierError::SingleClass);
    }
    Ok(width)
}

pub(crate) fn check_width(x: &[Vec<f64>], width: usize) -> Result<(), ClassifierError> {
    match x.iter().find(|r| r.len() != width) {
        Some(r) => Err(ClassifierError::ShapeMismatch { expected: width, found: r.len() }),
        None => Ok(()),
    }
}

/// Per-column standardization fitted on training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let d = x.first().map_or(0, Vec::len);
        let n = x.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for row in x {
            mean.iter_mut().zip(row).for_each(|(m, v)| *m += v / n);
        }
        let mut var = vec![0.0; d];
        for row in x {
            var.iter_mut().zip(row.iter().zip(&mean)).for_each(|(s, (v, m))| *s += (v - m).powi(2) / n);
        }
        let scale = var.into_iter().map(|v| if v > 1e-24 { v.sqrt() } else { 1.0 }).collect();
        Standardizer { mean, scale }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(self.mean.iter().zip(&self.scale)).map(|(v, (m, s))| (v - m) / s).collect()
    }
}

/// Sorts training rows into a canonical order so trainers see the same
/// sequence regardless of input order.
pub(crate) fn canonical_order(x: &[Vec<f64>], y: &[usize]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| {
        y[a].cmp(&y[b]).then_with(|| {
            x[a].iter()
                .zip(&x[b])
                .map(|(p, q)| p.total_cmp(q))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    idx
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// A trained classifier of any supported kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classifier {
    Logreg(LogisticRegression),
    LinearSvm(LinearSvm),
    RandomForest(RandomForest),
}

impl Classifier {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            Classifier::Logreg(_) => ClassifierKind::Logreg,
            Classifier::LinearSvm(_) => ClassifierKind::LinearSvm,
            Classifier::RandomForest(_) => ClassifierKind::RandomForest,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Classifier::Logreg(m) => m.n_features,
            Classifier::LinearSvm(m) => m.n_features,
            Classifier::RandomForest(m) => m.n_features,
        }
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<usize>, ClassifierError> {
        match self {
            Classifier::Logreg(m) => m.predict(x),
            Classifier::LinearSvm(m) => m.predict(x),
            Classifier::RandomForest(m) => m.predict(x),
        }
    }

    /// Class probabilities; only logistic regression provides them.
    pub fn predict_proba(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, ClassifierError> {
        match self {
            Classifier::Logreg(m) => m.predict_proba(x),
            other => Err(ClassifierError::ProbabilityUnsupported(other.kind())),
        }
    }
}

/// Hyperparameters for whichever classifier is trained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassifierParams {
    pub logreg: LogregParams,
    pub svm: SvmParams,
    pub forest: ForestParams,
}

impl ClassifierParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.logreg.seed = seed;
        self.svm.seed = seed;
        self.forest.seed = seed;
        self
    }
}

pub fn train(
    kind: ClassifierKind,
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    params: &ClassifierParams,
) -> Result<Classifier, ClassifierError> {
    Ok(match kind {
        ClassifierKind::Logreg => Classifier::Logreg(logreg::train_logreg(x, y, n_classes, params.logreg)?),
        ClassifierKind::LinearSvm => {
            Classifier::LinearSvm(svm::train_linear_svm(x, y, n_classes, params.svm)?)
        }
        ClassifierKind::RandomForest => {
            Classifier::RandomForest(forest::train_random_forest(x, y, n_classes, params.forest)?)
        }
    })
}
