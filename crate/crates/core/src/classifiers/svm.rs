//! One-vs-rest linear SVM: L2-regularized hinge loss minimized by mini-batch
//! subgradient descent.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, canonical_order, check_training, check_width, ClassifierError, Standardizer};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { c: 1.0, epochs: 200, learning_rate: 0.05, batch_size: 16, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub n_features: usize,
    pub n_classes: usize,
    pub standardizer: Standardizer,
    /// `n_classes x n_features`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    /// Summed one-vs-rest objective before training and after each epoch.
    pub objective_history: Vec<f64>,
}

/// `lambda / 2 |w|^2 + mean(max(0, 1 - y (w.x + b)))` summed over classes,
/// with `lambda = 1 / (C n)`.
pub fn hinge_objective(weights: &[f64], bias: &[f64], x: &[Vec<f64>], y: &[usize], c: f64) -> f64 {
    let d = x.first().map_or(0, Vec::len);
    let n = x.len() as f64;
    let lambda = 1.0 / (c * n);
    let mut total = 0.0;
    for k in 0..bias.len() {
        let w = &weights[k * d..(k + 1) * d];
        let reg = 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>();
        let hinge: f64 = x
            .iter()
            .zip(y)
            .map(|(row, &label)| {
                let sign = if label == k { 1.0 } else { -1.0 };
                let margin = sign * (bias[k] + w.iter().zip(row).map(|(a, b)| a * b).sum::<f64>());
                (1.0 - margin).max(0.0)
            })
            .sum();
        total += reg + hinge / n;
    }
    total
}

pub fn train_linear_svm(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    params: SvmParams,
) -> Result<LinearSvm, ClassifierError> {
    let d = check_training(x, y)?;
    let n_classes = n_classes.max(y.iter().copied().max().unwrap_or(0) + 1);
    let order = canonical_order(x, y);
    let ordered: Vec<Vec<f64>> = order.iter().map(|&i| x[i].clone()).collect();
    let standardizer = Standardizer::fit(&ordered);
    let xs: Vec<Vec<f64>> = ordered.iter().map(|row| standardizer.transform(row)).collect();
    let ys: Vec<usize> = order.iter().map(|&i| y[i]).collect();
    let n = xs.len();
    let lambda = 1.0 / (params.c * n as f64);

    let mut weights = vec![0.0; n_classes * d];
    let mut bias = vec![0.0; n_classes];
    let mut history = vec![hinge_objective(&weights, &bias, &xs, &ys, params.c)];
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut idx: Vec<usize> = (0..n).collect();
    let batch = params.batch_size.max(1);
    let mut gw = vec![0.0; d];

    for epoch in 0..params.epochs {
        idx.shuffle(&mut rng);
        let lr = params.learning_rate / (1.0 + epoch as f64).sqrt();
        for chunk in idx.chunks(batch) {
            let m = chunk.len() as f64;
            for k in 0..n_classes {
                let w = &mut weights[k * d..(k + 1) * d];
                gw.iter_mut().zip(w.iter()).for_each(|(g, wv)| *g = lambda * wv);
                let mut gb = 0.0;
                for &i in chunk {
                    let sign = if ys[i] == k { 1.0 } else { -1.0 };
                    let margin =
                        sign * (bias[k] + w.iter().zip(&xs[i]).map(|(a, b)| a * b).sum::<f64>());
                    if margin < 1.0 {
                        gw.iter_mut().zip(&xs[i]).for_each(|(g, xv)| *g -= sign * xv / m);
                        gb -= sign / m;
                    }
                }
                w.iter_mut().zip(&gw).for_each(|(wv, g)| *wv -= lr * g);
                bias[k] -= lr * gb;
            }
        }
        history.push(hinge_objective(&weights, &bias, &xs, &ys, params.c));
    }

    Ok(LinearSvm { n_features: d, n_classes, standardizer, weights, bias, objective_history: history })
}

impl LinearSvm {
    pub fn decision_function(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, ClassifierError> {
        check_width(x, self.n_features)?;
        let d = self.n_features;
        Ok(x.iter()
            .map(|row| {
                let z = self.standardizer.transform(row);
                (0..self.n_classes)
                    .map(|k| {
                        self.bias[k]
                            + self.weights[k * d..(k + 1) * d].iter().zip(&z).map(|(a, b)| a * b).sum::<f64>()
                    })
                    .collect()
            })
            .collect())
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<usize>, ClassifierError> {
        Ok(self.decision_function(x)?.iter().map(|m| argmax(m)).collect())
    }
}
