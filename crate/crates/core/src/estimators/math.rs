use ndarray::{Array2, ArrayView2, Axis};

/// Exponent bound for raw importance weights and classifier ratios.
pub const EXP_CLAMP: f64 = 50.0;

/// exp(x) with |x| clamped to [`EXP_CLAMP`]; increments `clamped` when
/// the bound bites.
pub fn clamped_exp(x: f64, clamped: &mut usize) -> f64 {
    if x.abs() > EXP_CLAMP {
        *clamped += 1;
        x.clamp(-EXP_CLAMP, EXP_CLAMP).exp()
    } else {
        x.exp()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^x) without overflow; -log sigmoid(f) = softplus(-f).
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Row-wise softmax with max-subtraction.
pub fn softmax_rows(logits: ArrayView2<f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Row-wise log-softmax with max-subtraction.
pub fn log_softmax_rows(logits: ArrayView2<f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln() + max;
        for v in row.iter_mut() {
            *v -= lse;
        }
    }
    out
}

/// Cross entropy between row-softmaxed `logits` and a soft `labels`
/// matrix, averaged over rows:
///
///   loss = -(1/N) sum_{i,j} labels[i,j] * log softmax(logits)[i,j]
///
/// Returns the loss and its gradient with respect to `logits`,
///
///   d loss / d logits[i,k]
///     = (1/N) * (rowmass_i * softmax[i,k] - labels[i,k])
///
/// where rowmass_i is the label mass of row i. Labels are treated as
/// constants.
pub fn cross_entropy_soft(
    logits: ArrayView2<f64>,
    labels: ArrayView2<f64>,
) -> (f64, Array2<f64>) {
    assert_eq!(logits.dim(), labels.dim(), "logits/labels shape mismatch");
    let n = logits.nrows() as f64;
    let probs = softmax_rows(logits);
    let logp = log_softmax_rows(logits);

    let mut loss = 0.0;
    for (&l, &lp) in labels.iter().zip(logp.iter()) {
        if l != 0.0 {
            loss -= l * lp;
        }
    }
    loss /= n;

    let rowmass = labels.sum_axis(Axis(1));
    let mut grad = probs;
    for (i, mut row) in grad.rows_mut().into_iter().enumerate() {
        let mass = rowmass[i];
        for (j, g) in row.iter_mut().enumerate() {
            *g = (mass * *g - labels[[i, j]]) / n;
        }
    }
    (loss, grad)
}
