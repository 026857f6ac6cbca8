//! Skip-gram token embeddings trained with negative sampling, and per-app
//! fingerprint vectors built from them.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stylometry::{transform_tokens, Category, StyleProfile, TfidfVocabulary};

/// Maximum fingerprint width.
pub const MAX_FINGERPRINT_COLUMNS: usize = 1000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EmbeddingError {
    #[error("no token reaches the minimum count of {0}")]
    EmptyVocabulary(usize),
    #[error("fingerprint would need {0} columns, more than {MAX_FINGERPRINT_COLUMNS}")]
    DimensionOverflow(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingParams {
    pub dim: usize,
    /// Context tokens taken on each side of the center token.
    pub window: usize,
    pub min_count: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for EmbeddingParams {
    fn default() -> Self {
        EmbeddingParams {
            dim: 100,
            window: 3,
            min_count: 10,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "TableRepr", into = "TableRepr")]
pub struct EmbeddingTable {
    pub params: EmbeddingParams,
    /// Tokens ordered by descending corpus count, then lexicographically.
    pub vocabulary: Vec<String>,
    pub counts: Vec<u64>,
    /// Input (center) vectors, `vocabulary.len() x dim`, row-major.
    pub vectors: Vec<f64>,
    /// Output (context) vectors, same shape as `vectors`.
    pub context_vectors: Vec<f64>,
    /// Mean loss per (center, context) pair for each epoch.
    pub epoch_losses: Vec<f64>,
    index: BTreeMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    params: EmbeddingParams,
    vocabulary: Vec<String>,
    counts: Vec<u64>,
    vectors: Vec<f64>,
    context_vectors: Vec<f64>,
    epoch_losses: Vec<f64>,
}

impl From<TableRepr> for EmbeddingTable {
    fn from(r: TableRepr) -> Self {
        let index = r.vocabulary.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        EmbeddingTable {
            params: r.params,
            vocabulary: r.vocabulary,
            counts: r.counts,
            vectors: r.vectors,
            context_vectors: r.context_vectors,
            epoch_losses: r.epoch_losses,
            index,
        }
    }
}

impl From<EmbeddingTable> for TableRepr {
    fn from(t: EmbeddingTable) -> Self {
        TableRepr {
            params: t.params,
            vocabulary: t.vocabulary,
            counts: t.counts,
            vectors: t.vectors,
            context_vectors: t.context_vectors,
            epoch_losses: t.epoch_losses,
        }
    }
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.params.dim
    }

    pub fn len(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocabulary.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn vector(&self, index: usize) -> &[f64] {
        let d = self.params.dim;
        &self.vectors[index * d..(index + 1) * d]
    }

    pub fn vector_of(&self, token: &str) -> Option<&[f64]> {
        self.index_of(token).map(|i| self.vector(i))
    }

    /// Vocabulary ranked by predicted context score `u_w . v_token`, best first.
    pub fn predict_context(&self, token: &str) -> Option<Vec<(&str, f64)>> {
        let v = self.vector_of(token)?;
        let d = self.params.dim;
        let mut scores: Vec<(&str, f64)> = self
            .vocabulary
            .iter()
            .enumerate()
            .map(|(i, w)| (w.as_str(), dot(&self.context_vectors[i * d..(i + 1) * d], v)))
            .collect();
        scores.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        Some(scores)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(sigmoid(x))` without overflow.
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Loss and gradients of one negative-sampling example.
#[derive(Clone, Debug, PartialEq)]
pub struct SgnsGradient {
    pub loss: f64,
    pub center: Vec<f64>,
    pub positive: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// `-ln s(u_pos . v) - sum_k ln s(-u_k . v)` and its gradients with respect to
/// the center vector `v`, the positive output vector and each negative one.
pub fn sgns_loss_and_grad(center: &[f64], positive: &[f64], negatives: &[&[f64]]) -> SgnsGradient {
    let d = center.len();
    let sp = dot(positive, center);
    let mut loss = -log_sigmoid(sp);
    let gp = sigmoid(sp) - 1.0;
    let mut g_center: Vec<f64> = positive.iter().map(|u| gp * u).collect();
    let g_positive: Vec<f64> = center.iter().map(|v| gp * v).collect();
    let mut g_negatives = Vec::with_capacity(negatives.len());
    for neg in negatives {
        let sn = dot(neg, center);
        loss -= log_sigmoid(-sn);
        let gn = sigmoid(sn);
        for i in 0..d {
            g_center[i] += gn * neg[i];
        }
        g_negatives.push(center.iter().map(|v| gn * v).collect());
    }
    SgnsGradient { loss, center: g_center, positive: g_positive, negatives: g_negatives }
}

/// Working state of skip-gram training.
struct Trainer {
    dim: usize,
    input: Vec<f64>,
    output: Vec<f64>,
    noise_cdf: Vec<f64>,
    grad_center: Vec<f64>,
}

impl Trainer {
    fn sample_negative(&self, rng: &mut ChaCha8Rng) -> usize {
        let r: f64 = rng.gen();
        self.noise_cdf.partition_point(|&c| c <= r).min(self.noise_cdf.len() - 1)
    }

    /// One SGD step on (center, target) with the given negatives; returns the loss.
    fn step(&mut self, center: usize, target: usize, negatives: &[usize], lr: f64) -> f64 {
        let d = self.dim;
        let v = center * d..(center + 1) * d;
        self.grad_center.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        let pairs = std::iter::once((target, true)).chain(negatives.iter().map(|&k| (k, false)));
        for (word, positive) in pairs {
            let u = word * d..(word + 1) * d;
            let s = dot(&self.output[u.clone()], &self.input[v.clone()]);
            let g = if positive {
                loss -= log_sigmoid(s);
                sigmoid(s) - 1.0
            } else {
                loss -= log_sigmoid(-s);
                sigmoid(s)
            };
            for i in 0..d {
                self.grad_center[i] += g * self.output[u.start + i];
                self.output[u.start + i] -= lr * g * self.input[v.start + i];
            }
        }
        for i in 0..d {
            self.input[v.start + i] -= lr * self.grad_center[i];
        }
        loss
    }
}

/// Trains skip-gram embeddings with negative sampling over `corpus`.
///
/// Tokens rarer than `min_count` are removed before windows are formed.
/// Training is single-threaded and fully determined by `params.seed`.
pub fn train_embedding<S: AsRef<[String]>>(
    corpus: &[S],
    params: EmbeddingParams,
) -> Result<EmbeddingTable, EmbeddingError> {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for sentence in corpus {
        for tok in sentence.as_ref() {
            *counts.entry(tok.as_str()).or_insert(0) += 1;
        }
    }
    let mut vocab: Vec<(&str, u64)> =
        counts.into_iter().filter(|&(_, c)| c >= params.min_count as u64).collect();
    if vocab.is_empty() {
        return Err(EmbeddingError::EmptyVocabulary(params.min_count));
    }
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let index: BTreeMap<&str, usize> = vocab.iter().enumerate().map(|(i, &(t, _))| (t, i)).collect();

    let d = params.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let input: Vec<f64> = (0..vocab.len() * d).map(|_| (rng.gen::<f64>() - 0.5) / d as f64).collect();

    let powered: Vec<f64> = vocab.iter().map(|&(_, c)| (c as f64).powf(0.75)).collect();
    let z: f64 = powered.iter().sum();
    let mut acc = 0.0;
    let noise_cdf = powered
        .iter()
        .map(|p| {
            acc += p / z;
            acc
        })
        .collect();

    let mut trainer = Trainer {
        dim: d,
        input,
        output: vec![0.0; vocab.len() * d],
        noise_cdf,
        grad_center: vec![0.0; d],
    };

    let sentences: Vec<Vec<usize>> = corpus
        .iter()
        .map(|s| s.as_ref().iter().filter_map(|t| index.get(t.as_str()).copied()).collect())
        .collect();
    let pairs_per_epoch: usize = sentences
        .iter()
        .map(|s| (0..s.len()).map(|p| context_range(p, s.len(), params.window).count()).sum::<usize>())
        .sum();
    let total_steps = (pairs_per_epoch * params.epochs).max(1) as f64;

    let mut epoch_losses = Vec::with_capacity(params.epochs);
    let mut done = 0usize;
    let mut negatives = Vec::with_capacity(params.negatives);
    for _ in 0..params.epochs {
        let mut epoch_loss = 0.0;
        let mut epoch_pairs = 0usize;
        for sentence in &sentences {
            for (pos, &center) in sentence.iter().enumerate() {
                for ctx in context_range(pos, sentence.len(), params.window) {
                    let target = sentence[ctx];
                    negatives.clear();
                    for _ in 0..params.negatives {
                        let k = trainer.sample_negative(&mut rng);
                        if k != target {
                            negatives.push(k);
                        }
                    }
                    let lr = params.learning_rate * (1.0 - done as f64 / total_steps).max(1e-4);
                    epoch_loss += trainer.step(center, target, &negatives, lr);
                    epoch_pairs += 1;
                    done += 1;
                }
            }
        }
        epoch_losses.push(if epoch_pairs > 0 { epoch_loss / epoch_pairs as f64 } else { 0.0 });
    }

    Ok(EmbeddingTable::from(TableRepr {
        params,
        vocabulary: vocab.iter().map(|&(t, _)| t.to_owned()).collect(),
        counts: vocab.iter().map(|&(_, c)| c).collect(),
        vectors: trainer.input,
        context_vectors: trainer.output,
        epoch_losses,
    }))
}

fn context_range(pos: usize, len: usize, window: usize) -> impl Iterator<Item = usize> {
    let lo = pos.saturating_sub(window);
    let hi = (pos + window + 1).min(len);
    (lo..hi).filter(move |&c| c != pos)
}

/// Dense per-app feature vector with one block per category.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FingerprintVector {
    pub values: Vec<f64>,
    /// Start column of each category block.
    pub offsets: Vec<(Category, usize)>,
}

impl FingerprintVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn block(&self, category: Category, dim: usize) -> Option<&[f64]> {
        self.offsets
            .iter()
            .find(|(c, _)| *c == category)
            .map(|&(_, off)| &self.values[off..off + dim])
    }
}

/// Mean embedding of the in-vocabulary tokens of `gram`, if any.
fn ngram_vector(emb: &EmbeddingTable, gram: &[String]) -> Option<Vec<f64>> {
    let d = emb.dim();
    let mut sum = vec![0.0; d];
    let mut n = 0usize;
    for tok in gram {
        if let Some(v) = emb.vector_of(tok) {
            sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
            n += 1;
        }
    }
    (n > 0).then(|| sum.into_iter().map(|s| s / n as f64).collect())
}

/// Concatenates, per category, the tf-idf-weighted mean of the embeddings of
/// the selected n-grams present in the profile. Empty categories give a zero block.
pub fn fingerprint(
    profile: &StyleProfile,
    vocabs: &[TfidfVocabulary],
    emb: &EmbeddingTable,
) -> Result<FingerprintVector, EmbeddingError> {
    let d = emb.dim();
    let width = vocabs.len() * d;
    if width > MAX_FINGERPRINT_COLUMNS {
        return Err(EmbeddingError::DimensionOverflow(width));
    }
    let mut values = vec![0.0; width];
    let mut offsets = Vec::with_capacity(vocabs.len());
    for (b, vocab) in vocabs.iter().enumerate() {
        let offset = b * d;
        offsets.push((vocab.category, offset));
        let row = transform_tokens(vocab, profile.sequence(vocab.category));
        let block = &mut values[offset..offset + d];
        let mut total = 0.0;
        for (gram_idx, weight) in row {
            if let Some(v) = ngram_vector(emb, &vocab.selected[gram_idx]) {
                block.iter_mut().zip(&v).for_each(|(x, y)| *x += weight * y);
                total += weight;
            }
        }
        if total > 0.0 {
            block.iter_mut().for_each(|x| *x /= total);
        }
    }
    Ok(FingerprintVector { values, offsets })
}
