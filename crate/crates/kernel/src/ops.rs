//! Forward-only reference implementations of the kernel operations.
//!
//! The tape reuses these for its forward pass; they are also the contract
//! surface for callers that do not need gradients.

use crate::{Array, KernelError};

/// `y = x·W + b` with `b` broadcast over rows.
pub fn dense(x: &Array, w: &Array, b: &Array) -> Result<Array, KernelError> {
    if b.rows() != 1 || b.cols() != w.cols() {
        return Err(KernelError::Shape(format!(
            "bias ({}x{}) for output width {}",
            b.rows(),
            b.cols(),
            w.cols()
        )));
    }
    let mut y = x.matmul(w)?;
    for r in 0..y.rows() {
        for (o, bv) in y.row_mut(r).iter_mut().zip(b.data()) {
            *o += bv;
        }
    }
    Ok(y)
}

/// Row-wise softmax restricted to the columns where `mask` is true.
///
/// Masked columns get weight exactly 0. A row with no valid column is all
/// zeros.
pub fn masked_softmax(logits: &Array, mask: &[bool]) -> Array {
    let (n, m) = (logits.rows(), logits.cols());
    assert_eq!(mask.len(), m, "softmax mask length");
    let mut out = Array::zeros(n, m);
    for r in 0..n {
        let row = logits.row(r);
        let mut max = f64::NEG_INFINITY;
        for (x, &ok) in row.iter().zip(mask) {
            if ok && *x > max {
                max = *x;
            }
        }
        if max == f64::NEG_INFINITY {
            continue;
        }
        let dst = out.row_mut(r);
        let mut sum = 0.0;
        for j in 0..m {
            if mask[j] {
                let e = (row[j] - max).exp();
                dst[j] = e;
                sum += e;
            }
        }
        for x in dst.iter_mut() {
            *x /= sum;
        }
    }
    out
}

/// Per-feature maximum over the rows where `mask` is true, plus the row that
/// supplied each maximum (first on ties).
pub fn masked_max_pool_with_argmax(
    x: &Array,
    mask: &[bool],
) -> Result<(Array, Vec<usize>), KernelError> {
    let (n, m) = (x.rows(), x.cols());
    assert_eq!(mask.len(), n, "pool mask length");
    let first = mask.iter().position(|&ok| ok).ok_or(KernelError::EmptyPool)?;
    let mut best = x.row(first).to_vec();
    let mut arg = vec![first; m];
    for r in first + 1..n {
        if !mask[r] {
            continue;
        }
        for (j, &v) in x.row(r).iter().enumerate() {
            if v > best[j] {
                best[j] = v;
                arg[j] = r;
            }
        }
    }
    Ok((Array::row_vector(best), arg))
}

pub fn masked_max_pool(x: &Array, mask: &[bool]) -> Result<Array, KernelError> {
    masked_max_pool_with_argmax(x, mask).map(|(a, _)| a)
}

/// Mean over rows where `mask` is true; zero row when none are valid.
pub fn masked_mean_rows(x: &Array, mask: &[bool]) -> Array {
    let m = x.cols();
    let mut out = vec![0.0; m];
    let count = mask.iter().filter(|&&ok| ok).count();
    if count == 0 {
        return Array::row_vector(out);
    }
    for (r, _) in mask.iter().enumerate().filter(|(_, &ok)| ok) {
        for (o, v) in out.iter_mut().zip(x.row(r)) {
            *o += v;
        }
    }
    let k = 1.0 / count as f64;
    out.iter_mut().for_each(|o| *o *= k);
    Array::row_vector(out)
}

pub fn huber(u: f64, kappa: f64) -> f64 {
    let a = u.abs();
    if a <= kappa {
        0.5 * u * u
    } else {
        kappa * (a - 0.5 * kappa)
    }
}

pub fn huber_derivative(u: f64, kappa: f64) -> f64 {
    if u.abs() <= kappa {
        u
    } else {
        kappa * u.signum()
    }
}

/// Quantile Huber loss of one transition:
/// `(1/K′) Σ_i Σ_j |τ_i − 1{y_j < z_i}| · huber(y_j − z_i, κ)/κ`.
pub fn quantile_huber_loss(predictions: &[f64], targets: &[f64], taus: &[f64], kappa: f64) -> f64 {
    assert_eq!(predictions.len(), taus.len(), "one τ per prediction");
    let mut total = 0.0;
    for (&z, &tau) in predictions.iter().zip(taus) {
        for &y in targets {
            let u = y - z;
            let weight = (tau - if u < 0.0 { 1.0 } else { 0.0 }).abs();
            total += weight * huber(u, kappa) / kappa;
        }
    }
    total / targets.len() as f64
}

/// Mean Huber TD error `(1/K′) Σ_j huber(y_j − q, κ)`.
pub fn huber_td_loss(prediction: f64, targets: &[f64], kappa: f64) -> f64 {
    targets.iter().map(|&y| huber(y - prediction, kappa)).sum::<f64>() / targets.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_identity_and_bias() {
        let x = Array::row_vector(vec![1.0, 2.0]);
        let y = dense(&x, &Array::identity(2), &Array::row_vector(vec![3.0, 4.0])).unwrap();
        assert_eq!(y.data(), &[4.0, 6.0]);
        let y = dense(&x, &Array::identity(2), &Array::zeros(1, 2)).unwrap();
        assert_eq!(y, x);
        assert!(dense(&x, &Array::identity(3), &Array::zeros(1, 3)).is_err());
        assert!(dense(&x, &Array::identity(2), &Array::zeros(1, 3)).is_err());
    }

    #[test]
    fn softmax_closed_forms() {
        let w = masked_softmax(&Array::row_vector(vec![0.7, 0.7, 0.7]), &[true; 3]);
        for &x in w.data() {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        let w = masked_softmax(&Array::row_vector(vec![5.0, -2.0]), &[false, true]);
        assert_eq!(w.data(), &[0.0, 1.0]);
        let w = masked_softmax(&Array::row_vector(vec![0.0, 3f64.ln()]), &[true, true]);
        assert!((w.data()[0] - 0.25).abs() < 1e-15);
        assert!((w.data()[1] - 0.75).abs() < 1e-15);
        let w = masked_softmax(&Array::row_vector(vec![1.0, 2.0]), &[false, false]);
        assert_eq!(w.data(), &[0.0, 0.0]);
    }

    #[test]
    fn softmax_shift_invariant() {
        let a = Array::row_vector(vec![0.3, -1.2, 2.0, 9.0]);
        let mask = [true, true, true, false];
        let b = a.map(|x| x + 17.5);
        let wa = masked_softmax(&a, &mask);
        let wb = masked_softmax(&b, &mask);
        assert!(wa.max_abs_diff(&wb) < 1e-14);
        assert_eq!(wa.data()[3], 0.0);
    }

    #[test]
    fn max_pool_cases() {
        let x = Array::from_rows(1, 2, vec![1.0, 5.0]);
        assert_eq!(masked_max_pool(&x, &[true]).unwrap().data(), &[1.0, 5.0]);
        let x = Array::from_rows(3, 2, vec![1.0, 5.0, 3.0, 2.0, 1e300, 1e300]);
        assert_eq!(
            masked_max_pool(&x, &[true, true, false]).unwrap().data(),
            &[3.0, 5.0]
        );
        assert!(matches!(
            masked_max_pool(&x, &[false; 3]),
            Err(KernelError::EmptyPool)
        ));
    }

    #[test]
    fn huber_branches() {
        assert_eq!(huber(0.0, 1.0), 0.0);
        assert_eq!(huber(1.0, 1.0), 0.5);
        assert_eq!(huber(2.0, 1.0), 1.5);
        assert_eq!(huber(-2.0, 1.0), 1.5);
        // both branches agree at the knee
        let k = 0.7;
        assert!((huber(k, k) - k * (k - k / 2.0)).abs() < 1e-15);
        assert_eq!(huber_derivative(3.0, 1.0), 1.0);
        assert_eq!(huber_derivative(-0.25, 1.0), -0.25);
    }

    #[test]
    fn quantile_loss_single_term() {
        assert_eq!(quantile_huber_loss(&[1.0], &[3.0], &[0.5], 1.0), 0.75);
        assert_eq!(quantile_huber_loss(&[2.0, -1.0], &[2.0, -1.0], &[0.5, 0.5], 1.0) > 0.0, true);
        assert_eq!(quantile_huber_loss(&[4.0], &[4.0], &[0.3], 1.0), 0.0);
    }
}
