//! Small dense kernels on row-major square matrices.

use crate::scalar::Scalar;

pub(crate) fn matmul<T: Scalar>(a: &[T], b: &[T], n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); n * n];
    for i in 0..n {
        let dst = &mut out[i * n..(i + 1) * n];
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == T::zero() {
                continue;
            }
            for (d, &bkj) in dst.iter_mut().zip(&b[k * n..(k + 1) * n]) {
                *d = *d + aik * bkj;
            }
        }
    }
    out
}

pub(crate) fn matpow<T: Scalar>(a: &[T], n: usize, mut k: usize) -> Vec<T> {
    let mut result = vec![T::zero(); n * n];
    for i in 0..n {
        result[i * n + i] = T::one();
    }
    let mut base = a.to_vec();
    while k > 0 {
        if k & 1 == 1 {
            result = matmul(&result, &base, n);
        }
        k >>= 1;
        if k > 0 {
            base = matmul(&base, &base, n);
        }
    }
    result
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot falls below a size-scaled rounding threshold.
pub(crate) fn solve<T: Scalar>(mut a: Vec<T>, mut b: Vec<T>, n: usize) -> Option<Vec<T>> {
    let scale = a.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let threshold = scale * T::epsilon() * T::from_usize(n.max(1) * 16)?;
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i * n + col]
                .abs()
                .partial_cmp(&a[j * n + col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if !(a[pivot * n + col].abs() > threshold) {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                a.swap(pivot * n + j, col * n + j);
            }
            b.swap(pivot, col);
        }
        let p = a[col * n + col];
        for row in (col + 1)..n {
            let factor = a[row * n + col] / p;
            if factor == T::zero() {
                continue;
            }
            for j in col..n {
                a[row * n + j] = a[row * n + j] - factor * a[col * n + j];
            }
            b[row] = b[row] - factor * b[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for j in (row + 1)..n {
            acc = acc - a[row * n + j] * x[j];
        }
        x[row] = acc / a[row * n + row];
    }
    Some(x)
}
