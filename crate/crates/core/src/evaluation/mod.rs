//! Corpus filtering, cross-validation folds, metrics, synthetic corpora and
//! the obfuscation transform.

pub mod generator;
pub mod obfuscate;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::AppBundle;
use crate::clustering::AuthorshipPartition;

pub use generator::{
    generate_corpus, ComponentPattern, CorpusConfig, GroundTruth, Provenance, SyntheticAuthorStyle,
    SyntheticCorpus,
};
pub use obfuscate::{obfuscate_bundle, Obfuscation};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("no author has at least {0} apps")]
    EmptyResult(usize),
    #[error("k = {k} is larger than the {available} available apps")]
    KTooLarge { k: usize, available: usize },
    #[error("{predictions} predictions for {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("app `{0}` has no author label")]
    MissingLabel(String),
}

/// Per-class precision, recall and F1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Unweighted mean over classes that occur in labels or predictions.
    Macro,
    /// Scores of class 1 only.
    Binary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub averaging: Averaging,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    /// `confusion[actual][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub per_class: Vec<ClassMetrics>,
}

/// `num / den`, with an empty denominator scoring 1 when nothing was wrong
/// (`wrong == 0`) and 0 otherwise.
fn ratio(num: usize, den: usize, wrong: usize) -> f64 {
    if den == 0 {
        if wrong == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

impl MetricsReport {
    pub fn from_confusion(confusion: Vec<Vec<usize>>, labels: &[String], averaging: Averaging) -> Self {
        let k = confusion.len();
        let total: usize = confusion.iter().flatten().sum();
        let trace: usize = (0..k).map(|i| confusion[i][i]).sum();
        let per_class: Vec<ClassMetrics> = (0..k)
            .map(|c| {
                let tp = confusion[c][c];
                let support: usize = confusion[c].iter().sum();
                let predicted: usize = confusion.iter().map(|row| row[c]).sum();
                let precision = ratio(tp, predicted, support - tp);
                let recall = ratio(tp, support, predicted - tp);
                ClassMetrics {
                    label: labels.get(c).cloned().unwrap_or_else(|| c.to_string()),
                    precision,
                    recall,
                    f1: f1(precision, recall),
                    support,
                }
            })
            .collect();
        let (precision, recall, f1) = match averaging {
            Averaging::Binary => {
                let c = &per_class[1.min(k - 1)];
                (c.precision, c.recall, c.f1)
            }
            Averaging::Macro => {
                let active: Vec<&ClassMetrics> = per_class
                    .iter()
                    .enumerate()
                    .filter(|(c, m)| m.support > 0 || confusion.iter().any(|row| row[*c] > 0))
                    .map(|(_, m)| m)
                    .collect();
                let n = active.len().max(1) as f64;
                (
                    active.iter().map(|m| m.precision).sum::<f64>() / n,
                    active.iter().map(|m| m.recall).sum::<f64>() / n,
                    active.iter().map(|m| m.f1).sum::<f64>() / n,
                )
            }
        };
        MetricsReport {
            averaging,
            precision,
            recall,
            f1,
            accuracy: if total == 0 { 1.0 } else { trace as f64 / total as f64 },
            confusion,
            per_class,
        }
    }

    /// Fixed-width text table.
    pub fn table(&self) -> String {
        let mut out = format!(
            "accuracy  {:.4}\nprecision {:.4}\nrecall    {:.4}\nf1        {:.4}\n\n{:<24} {:>9} {:>9} {:>9} {:>7}\n",
            self.accuracy, self.precision, self.recall, self.f1, "class", "precision", "recall", "f1", "support"
        );
        for c in &self.per_class {
            out.push_str(&format!(
                "{:<24} {:>9.4} {:>9.4} {:>9.4} {:>7}\n",
                c.label, c.precision, c.recall, c.f1, c.support
            ));
        }
        out
    }
}

/// Macro-averaged metrics of a multi-class prediction.
pub fn classification_metrics(
    predictions: &[usize],
    labels: &[usize],
    class_labels: &[String],
) -> Result<MetricsReport, EvalError> {
    if predictions.len() != labels.len() {
        return Err(EvalError::LengthMismatch { predictions: predictions.len(), labels: labels.len() });
    }
    let k = predictions
        .iter()
        .chain(labels)
        .map(|&c| c + 1)
        .max()
        .unwrap_or(0)
        .max(class_labels.len());
    let mut confusion = vec![vec![0usize; k]; k];
    for (&p, &a) in predictions.iter().zip(labels) {
        confusion[a][p] += 1;
    }
    Ok(MetricsReport::from_confusion(confusion, class_labels, Averaging::Macro))
}

/// Binary primary/non-primary metrics of one app's partition, over the
/// classes whose package took part in clustering and that `truth` covers.
pub fn decoupling_metrics(
    partition: &AuthorshipPartition,
    bundle: &AppBundle,
    truth: &BTreeMap<String, Provenance>,
) -> MetricsReport {
    let mut confusion = vec![vec![0usize; 2]; 2];
    for class in &bundle.classes {
        let Some(&module) = partition.module_of.get(&class.package) else { continue };
        let Some(&prov) = truth.get(&class.name) else { continue };
        let actual = usize::from(prov == Provenance::Primary);
        let predicted = usize::from(module == partition.primary_module);
        confusion[actual][predicted] += 1;
    }
    MetricsReport::from_confusion(
        confusion,
        &["non_primary".to_string(), "primary".to_string()],
        Averaging::Binary,
    )
}

/// Unweighted mean of per-app decoupling metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecouplingSummary {
    pub apps: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub per_app: Vec<(String, MetricsReport)>,
}

pub fn summarize_decoupling(per_app: Vec<(String, MetricsReport)>) -> DecouplingSummary {
    let n = per_app.len().max(1) as f64;
    let mean = |f: fn(&MetricsReport) -> f64| per_app.iter().map(|(_, m)| f(m)).sum::<f64>() / n;
    DecouplingSummary {
        apps: per_app.len(),
        precision: mean(|m| m.precision),
        recall: mean(|m| m.recall),
        f1: mean(|m| m.f1),
        accuracy: mean(|m| m.accuracy),
        per_app,
    }
}

/// Author label of every app, or the first app lacking one.
pub fn author_labels(corpus: &[AppBundle]) -> Result<Vec<&str>, EvalError> {
    corpus
        .iter()
        .map(|b| b.author_label.as_deref().ok_or_else(|| EvalError::MissingLabel(b.app_id.clone())))
        .collect()
}

/// Keeps only authors with at least `n` apps, preserving corpus order.
pub fn least_apps_filter(corpus: Vec<AppBundle>, n: usize) -> Result<Vec<AppBundle>, EvalError> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for label in author_labels(&corpus)? {
        *counts.entry(label.to_owned()).or_insert(0) += 1;
    }
    let kept: Vec<AppBundle> = corpus
        .into_iter()
        .filter(|b| b.author_label.as_ref().is_some_and(|l| counts[l] >= n))
        .collect();
    if kept.is_empty() {
        return Err(EvalError::EmptyResult(n));
    }
    Ok(kept)
}

/// Fewest apps held by any author.
pub fn min_apps_per_author(labels: &[&str]) -> usize {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_insert(0) += 1;
    }
    counts.values().copied().min().unwrap_or(0)
}

/// Author-stratified folds of corpus indices.
///
/// Each author's apps are shuffled and dealt round-robin, continuing from
/// where the previous author stopped, so per-author fold sizes differ by at
/// most one and overall sizes stay balanced. Authors with fewer than `k`
/// apps are dealt on the same rule (best effort). Fails when `k < 2` or `k`
/// exceeds the corpus size.
pub fn kfold_split(labels: &[&str], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, EvalError> {
    if k < 2 || k > labels.len() {
        return Err(EvalError::KTooLarge { k, available: labels.len() });
    }
    let mut by_author: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_author.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for (_, mut apps) in by_author {
        apps.shuffle(&mut rng);
        for app in apps {
            folds[next].push(app);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}
