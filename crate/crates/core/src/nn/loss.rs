//! Eager loss functions returning `(loss, gradient)`.

use crate::error::{Error, Result};
use crate::nn::graph::{Graph, Mat};
use crate::nn::tensor::Tensor;

/// Mean squared error `Σ (x_i − x̂_i)² / N` and its gradient with respect to
/// `x_hat`.
pub fn mse_loss(x: &Tensor, x_hat: &Tensor) -> Result<(f64, Tensor)> {
    if x.shape() != x_hat.shape() {
        return Err(Error::dim("mse_loss", x.shape(), x_hat.shape()));
    }
    if x.is_empty() {
        return Err(Error::Contract("mse_loss on an empty tensor".into()));
    }
    let n = x.len() as f64;
    let loss = x
        .data()
        .iter()
        .zip(x_hat.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    let grad = x
        .data()
        .iter()
        .zip(x_hat.data())
        .map(|(a, b)| 2.0 * (b - a) / n)
        .collect();
    Ok((loss, Tensor::new(x.shape().to_vec(), grad)?))
}

/// Softmax cross-entropy over `m` rows with one-hot `targets`, averaged over
/// rows. Returns the loss and `(q − p) / m`.
pub fn softmax_cross_entropy(logits: &Tensor, targets: &Tensor) -> Result<(f64, Tensor)> {
    if logits.shape() != targets.shape() || logits.shape().len() != 2 {
        return Err(Error::dim("softmax_cross_entropy", logits.shape(), targets.shape()));
    }
    let (m, v) = logits.rows_cols();
    if v < 2 {
        return Err(Error::Contract(format!("need at least 2 classes, got {v}")));
    }
    let mut idx = Vec::with_capacity(m);
    for r in 0..m {
        let row = targets.row(r);
        let ones: Vec<usize> = (0..v).filter(|&j| row[j] == 1.0).collect();
        let zeros = row.iter().filter(|&&p| p == 0.0).count();
        if ones.len() != 1 || zeros != v - 1 {
            return Err(Error::Contract(format!("target row {r} is not one-hot")));
        }
        idx.push(ones[0]);
    }
    let mut g = Graph::new();
    let l = g.variable(Mat::from_tensor(logits));
    let loss = g.cross_entropy(l, &idx)?;
    g.backward(loss)?;
    let value = g.value(loss).scalar();
    let grad = g.grad(l).expect("logits require grad").to_vec();
    Ok((value, Tensor::new(vec![m, v], grad)?))
}
