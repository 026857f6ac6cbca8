//! End-to-end training, prediction and cross-validated evaluation.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::AppBundle;
use crate::classifiers::{
    train, ClassifierError, ClassifierKind, ClassifierParams, FingerprintScope, ModelError,
    ModelMetadata, TrainedModel,
};
use crate::clustering::{decouple, ClusterError, DecoupleConfig};
use crate::config::default_framework_overrides;
use crate::embedding::{fingerprint, train_embedding, EmbeddingError, EmbeddingParams, EmbeddingTable};
use crate::evaluation::{
    author_labels, classification_metrics, decoupling_metrics, kfold_split, least_apps_filter,
    min_apps_per_author, obfuscate_bundle, summarize_decoupling, DecouplingSummary, EvalError,
    GroundTruth, MetricsReport,
};
use crate::stylometry::{extract_profile, fit_all, ProfileScope, StyleError, StyleProfile, TfidfParams, TfidfVocabulary};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{app}: {source}")]
    Decouple { app: String, source: ClusterError },
    #[error("{app}: {source}")]
    Style { app: String, source: StyleError },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub decouple: DecoupleConfig,
    pub overrides: Vec<String>,
    pub tfidf: TfidfParams,
    pub embedding: EmbeddingParams,
    pub classifier: ClassifierParams,
    pub scope: FingerprintScope,
    /// Authors with fewer apps are dropped before training or evaluation.
    pub least_apps: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            decouple: DecoupleConfig::default(),
            overrides: default_framework_overrides(),
            tfidf: TfidfParams::default(),
            embedding: EmbeddingParams::default(),
            classifier: ClassifierParams::default(),
            scope: FingerprintScope::PrimaryModule,
            least_apps: 10,
            seed: 0,
        }
    }
}

/// Stylometric profile of one app in the configured scope.
pub fn app_profile(
    bundle: &AppBundle,
    decouple_config: &DecoupleConfig,
    overrides: &[String],
    scope: FingerprintScope,
) -> Result<StyleProfile, PipelineError> {
    let style_err = |source| PipelineError::Style { app: bundle.app_id.clone(), source };
    match scope {
        FingerprintScope::PrimaryModule => {
            let partition = decouple(bundle, decouple_config)
                .map_err(|source| PipelineError::Decouple { app: bundle.app_id.clone(), source })?;
            extract_profile(bundle, ProfileScope::PrimaryModule(&partition), overrides).map_err(style_err)
        }
        FingerprintScope::WholeApp => {
            extract_profile(bundle, ProfileScope::WholeApp, overrides).map_err(style_err)
        }
    }
}

/// Profiles of every app, computed in parallel, in input order.
pub fn profiles(bundles: &[AppBundle], config: &PipelineConfig) -> Result<Vec<StyleProfile>, PipelineError> {
    bundles
        .par_iter()
        .map(|b| app_profile(b, &config.decouple, &config.overrides, config.scope))
        .collect()
}

/// Vocabularies and embeddings fitted on a set of training profiles.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSpace {
    pub vocabularies: Vec<TfidfVocabulary>,
    pub embedding: EmbeddingTable,
}

impl FeatureSpace {
    pub fn fit(train: &[&StyleProfile], tfidf: TfidfParams, embedding: EmbeddingParams) -> Result<Self, PipelineError> {
        let owned: Vec<StyleProfile> = train.iter().map(|p| (*p).clone()).collect();
        let vocabularies = fit_all(&owned, tfidf);
        let sentences: Vec<&[String]> = train
            .iter()
            .flat_map(|p| p.sequences().map(|(_, s)| s))
            .filter(|s| !s.is_empty())
            .collect();
        let embedding = train_embedding(&sentences, embedding)?;
        Ok(FeatureSpace { vocabularies, embedding })
    }

    pub fn transform(&self, profile: &StyleProfile) -> Result<Vec<f64>, PipelineError> {
        Ok(fingerprint(profile, &self.vocabularies, &self.embedding)?.values)
    }
}

/// Sorted distinct labels and the class index of every entry.
pub fn index_labels(labels: &[&str]) -> (Vec<String>, Vec<usize>) {
    let mut distinct: Vec<String> = labels.iter().map(|l| l.to_string()).collect();
    distinct.sort();
    distinct.dedup();
    let y = labels.iter().map(|l| distinct.binary_search_by(|d| d.as_str().cmp(l)).unwrap()).collect();
    (distinct, y)
}

fn embedding_params(config: &PipelineConfig) -> EmbeddingParams {
    EmbeddingParams { seed: config.seed, ..config.embedding }
}

/// Filters, decouples, profiles, fits features and trains one classifier.
pub fn train_model(
    corpus: Vec<AppBundle>,
    kind: ClassifierKind,
    config: &PipelineConfig,
) -> Result<TrainedModel, PipelineError> {
    let corpus = least_apps_filter(corpus, config.least_apps)?;
    let labels = author_labels(&corpus)?;
    let (label_names, y) = index_labels(&labels);
    let profiles = profiles(&corpus, config)?;
    let refs: Vec<&StyleProfile> = profiles.iter().collect();
    let space = FeatureSpace::fit(&refs, config.tfidf, embedding_params(config))?;
    let x: Vec<Vec<f64>> = profiles.iter().map(|p| space.transform(p)).collect::<Result<_, _>>()?;
    let classifier = train(kind, &x, &y, label_names.len(), &config.classifier.with_seed(config.seed))?;
    Ok(TrainedModel {
        metadata: ModelMetadata {
            classifier: kind,
            seed: config.seed,
            scope: config.scope,
            training_apps: corpus.len(),
        },
        decouple: config.decouple.clone(),
        overrides: config.overrides.clone(),
        tfidf: config.tfidf,
        vocabularies: space.vocabularies,
        embedding: space.embedding,
        labels: label_names,
        classifier,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub app_id: String,
    pub label: String,
    /// Probability of the predicted label, for classifiers that produce one.
    pub probability: Option<f64>,
}

pub fn predict(model: &TrainedModel, bundle: &AppBundle) -> Result<Prediction, PipelineError> {
    let profile = app_profile(bundle, &model.decouple, &model.overrides, model.metadata.scope)?;
    let fp = fingerprint(&profile, &model.vocabularies, &model.embedding)?;
    let rows = [fp.values];
    let class = model.classifier.predict(&rows)?[0];
    let probability = match model.classifier.predict_proba(&rows) {
        Ok(p) => Some(p[0][class]),
        Err(ClassifierError::ProbabilityUnsupported(_)) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(Prediction { app_id: bundle.app_id.clone(), label: model.labels[class].clone(), probability })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub test_apps: Vec<String>,
    pub metrics: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub app_id: String,
    pub actual: String,
    pub predicted: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub classifier: ClassifierKind,
    pub k: usize,
    pub seed: u64,
    pub scope: FingerprintScope,
    pub obfuscated_test: bool,
    pub folds: Vec<FoldReport>,
    /// Metrics over the pooled predictions of all folds.
    pub aggregate: MetricsReport,
    /// Sorted by app id.
    pub predictions: Vec<PredictionRecord>,
}

/// Options of a cross-validation run.
#[derive(Clone, Debug, PartialEq)]
pub struct EvaluateOptions {
    pub k: usize,
    pub kinds: Vec<ClassifierKind>,
    /// Obfuscate every test app with this seed before fingerprinting it.
    pub obfuscate_test: Option<u64>,
}

/// Stratified k-fold cross-validation of one or more classifiers sharing
/// the same folds and per-fold features.
pub fn evaluate(
    corpus: Vec<AppBundle>,
    options: &EvaluateOptions,
    config: &PipelineConfig,
) -> Result<Vec<EvaluationReport>, PipelineError> {
    let corpus = least_apps_filter(corpus, config.least_apps)?;
    let labels = author_labels(&corpus)?;
    let available = min_apps_per_author(&labels);
    if options.k > available {
        return Err(EvalError::KTooLarge { k: options.k, available }.into());
    }
    let folds = kfold_split(&labels, options.k, config.seed)?;
    let (label_names, y) = index_labels(&labels);
    let clean = profiles(&corpus, config)?;
    let test_profiles = match options.obfuscate_test {
        Some(seed) => {
            let obfuscated: Vec<AppBundle> = corpus
                .par_iter()
                .enumerate()
                .map(|(i, b)| obfuscate_bundle(b, seed.wrapping_add(i as u64)).bundle)
                .collect();
            profiles(&obfuscated, config)?
        }
        None => clean.clone(),
    };
    let params = config.classifier.with_seed(config.seed);

    let per_fold: Vec<Vec<Vec<usize>>> = folds
        .par_iter()
        .map(|test| {
            let train_idx: Vec<usize> = (0..corpus.len()).filter(|i| test.binary_search(i).is_err()).collect();
            let train_refs: Vec<&StyleProfile> = train_idx.iter().map(|&i| &clean[i]).collect();
            let space = FeatureSpace::fit(&train_refs, config.tfidf, embedding_params(config))?;
            let x: Vec<Vec<f64>> =
                train_refs.iter().map(|p| space.transform(p)).collect::<Result<_, _>>()?;
            let ty: Vec<usize> = train_idx.iter().map(|&i| y[i]).collect();
            let tx: Vec<Vec<f64>> =
                test.iter().map(|&i| space.transform(&test_profiles[i])).collect::<Result<_, _>>()?;
            options
                .kinds
                .iter()
                .map(|&kind| {
                    let model = train(kind, &x, &ty, label_names.len(), &params)?;
                    Ok(model.predict(&tx)?)
                })
                .collect::<Result<Vec<_>, PipelineError>>()
        })
        .collect::<Result<_, _>>()?;

    let mut reports = Vec::new();
    for (ki, &kind) in options.kinds.iter().enumerate() {
        let mut fold_reports = Vec::new();
        let mut pooled: BTreeMap<usize, usize> = BTreeMap::new();
        for (f, test) in folds.iter().enumerate() {
            let predicted = &per_fold[f][ki];
            let actual: Vec<usize> = test.iter().map(|&i| y[i]).collect();
            fold_reports.push(FoldReport {
                fold: f,
                test_apps: test.iter().map(|&i| corpus[i].app_id.clone()).collect(),
                metrics: classification_metrics(predicted, &actual, &label_names)?,
            });
            for (&i, &p) in test.iter().zip(predicted) {
                pooled.insert(i, p);
            }
        }
        let idx: Vec<usize> = pooled.keys().copied().collect();
        let predicted: Vec<usize> = pooled.values().copied().collect();
        let actual: Vec<usize> = idx.iter().map(|&i| y[i]).collect();
        let mut predictions: Vec<PredictionRecord> = idx
            .iter()
            .zip(&predicted)
            .map(|(&i, &p)| PredictionRecord {
                app_id: corpus[i].app_id.clone(),
                actual: label_names[y[i]].clone(),
                predicted: label_names[p].clone(),
            })
            .collect();
        predictions.sort_by(|a, b| a.app_id.cmp(&b.app_id));
        reports.push(EvaluationReport {
            classifier: kind,
            k: options.k,
            seed: config.seed,
            scope: config.scope,
            obfuscated_test: options.obfuscate_test.is_some(),
            folds: fold_reports,
            aggregate: classification_metrics(&predicted, &actual, &label_names)?,
            predictions,
        });
    }
    Ok(reports)
}

/// Decouples every app and scores its partition against the ground truth.
/// Apps the truth does not cover are skipped.
pub fn evaluate_decoupling(
    corpus: &[AppBundle],
    truth: &GroundTruth,
    config: &DecoupleConfig,
) -> Result<DecouplingSummary, PipelineError> {
    let per_app: Vec<(String, MetricsReport)> = corpus
        .par_iter()
        .filter_map(|b| truth.app(&b.app_id).map(|t| (b, t)))
        .map(|(b, t)| {
            let partition = decouple(b, config)
                .map_err(|source| PipelineError::Decouple { app: b.app_id.clone(), source })?;
            Ok((b.app_id.clone(), decoupling_metrics(&partition, b, t)))
        })
        .collect::<Result<_, PipelineError>>()?;
    Ok(summarize_decoupling(per_app))
}
