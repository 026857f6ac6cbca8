//! Multinomial logistic regression trained by full-batch gradient descent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, canonical_order, check_training, check_width, ClassifierError, Standardizer};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogregParams {
    pub l2: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for LogregParams {
    fn default() -> Self {
        LogregParams { l2: 1e-4, learning_rate: 0.5, epochs: 300, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    pub n_features: usize,
    pub n_classes: usize,
    pub standardizer: Standardizer,
    /// `n_classes x n_features`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    /// Regularized loss before training and after each epoch.
    pub loss_history: Vec<f64>,
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn logits(weights: &[f64], bias: &[f64], row: &[f64]) -> Vec<f64> {
    let d = row.len();
    bias.iter()
        .enumerate()
        .map(|(k, b)| b + weights[k * d..(k + 1) * d].iter().zip(row).map(|(w, x)| w * x).sum::<f64>())
        .collect()
}

/// Mean cross-entropy plus `l2 / 2 * |W|^2`, with gradients for `W` and `b`.
pub fn logreg_loss_and_grad(
    weights: &[f64],
    bias: &[f64],
    x: &[Vec<f64>],
    y: &[usize],
    l2: f64,
) -> (f64, Vec<f64>, Vec<f64>) {
    let k = bias.len();
    let d = x.first().map_or(0, Vec::len);
    let n = x.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; k * d];
    let mut gb = vec![0.0; k];
    for (row, &label) in x.iter().zip(y) {
        let z = logits(weights, bias, row);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += (lse - z[label]) / n;
        for c in 0..k {
            let p = (z[c] - lse).exp();
            let delta = (p - if c == label { 1.0 } else { 0.0 }) / n;
            gb[c] += delta;
            for (g, xv) in gw[c * d..(c + 1) * d].iter_mut().zip(row) {
                *g += delta * xv;
            }
        }
    }
    loss += 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    for (g, w) in gw.iter_mut().zip(weights) {
        *g += l2 * w;
    }
    (loss, gw, gb)
}

pub fn train_logreg(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    params: LogregParams,
) -> Result<LogisticRegression, ClassifierError> {
    let d = check_training(x, y)?;
    let n_classes = n_classes.max(y.iter().copied().max().unwrap_or(0) + 1);
    let order = canonical_order(x, y);
    let ordered: Vec<Vec<f64>> = order.iter().map(|&i| x[i].clone()).collect();
    let standardizer = Standardizer::fit(&ordered);
    let xs: Vec<Vec<f64>> = ordered.iter().map(|row| standardizer.transform(row)).collect();
    let ys: Vec<usize> = order.iter().map(|&i| y[i]).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut weights: Vec<f64> = (0..n_classes * d).map(|_| (rng.gen::<f64>() - 0.5) * 1e-3).collect();
    let mut bias = vec![0.0; n_classes];
    let mut loss_history = Vec::with_capacity(params.epochs + 1);

    for _ in 0..params.epochs {
        let (loss, gw, gb) = logreg_loss_and_grad(&weights, &bias, &xs, &ys, params.l2);
        loss_history.push(loss);
        weights.iter_mut().zip(&gw).for_each(|(w, g)| *w -= params.learning_rate * g);
        bias.iter_mut().zip(&gb).for_each(|(b, g)| *b -= params.learning_rate * g);
    }
    loss_history.push(logreg_loss_and_grad(&weights, &bias, &xs, &ys, params.l2).0);

    Ok(LogisticRegression { n_features: d, n_classes, standardizer, weights, bias, loss_history })
}

impl LogisticRegression {
    pub fn predict_proba(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, ClassifierError> {
        check_width(x, self.n_features)?;
        Ok(x.iter()
            .map(|row| softmax(&logits(&self.weights, &self.bias, &self.standardizer.transform(row))))
            .collect())
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<usize>, ClassifierError> {
        Ok(self.predict_proba(x)?.iter().map(|p| argmax(p)).collect())
    }
}
