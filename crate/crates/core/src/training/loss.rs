use ndarray::{Array1, Array2, ArrayView1};

use crate::metrics::sigmoid;

/// `max(x, 0) + ln(1 + e^{-|x|})`
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Multi-label soft-margin loss for one sample, with `dLoss/dO`.
///
/// `loss = (1/C) sum_j [ L_j softplus(-O_j) + (1 - L_j) softplus(O_j) ]`,
/// the softplus form of `-(L log sigma(O) + (1-L) log(1 - sigma(O)))`.
pub fn multilabel_loss(logits: ArrayView1<'_, f64>, labels: &[u8]) -> (f64, Array1<f64>) {
    assert_eq!(logits.len(), labels.len(), "logits and labels differ in length");
    let c = logits.len() as f64;
    let mut loss = 0.0;
    let mut grad = Array1::zeros(logits.len());
    for (j, (&o, &l)) in logits.iter().zip(labels).enumerate() {
        let l = f64::from(l);
        loss += l * softplus(-o) + (1.0 - l) * softplus(o);
        grad[j] = (sigmoid(o) - l) / c;
    }
    (loss / c, grad)
}

/// Mean of [`multilabel_loss`] over the rows of a batch.
pub fn batch_loss(logits: &Array2<f64>, labels: &Array2<u8>) -> (f64, Array2<f64>) {
    assert_eq!(logits.dim(), labels.dim(), "logits and labels differ in shape");
    let b = logits.nrows() as f64;
    let mut total = 0.0;
    let mut grad = Array2::zeros(logits.dim());
    for (r, (o, l)) in logits.rows().into_iter().zip(labels.rows()).enumerate() {
        let l = l.to_vec();
        let (loss, g) = multilabel_loss(o, &l);
        total += loss;
        grad.row_mut(r).assign(&(g / b));
    }
    (total / b, grad)
}
