//! Kernels on square row-major `n x n` blocks, generic over the working
//! precision so the preconditioners can run in `f32` or `f64`.

use num_traits::Float;

use super::PIVOT_FLOOR;

/// In-place partial-pivoting LU. `piv[k]` is the row swapped with row `k`
/// at elimination step `k`. Returns the failing pivot index on breakdown.
pub(crate) fn lu_in_place<T: Float>(a: &mut [T], piv: &mut [usize], n: usize) -> Result<(), usize> {
    debug_assert_eq!(a.len(), n * n);
    let floor = T::from(PIVOT_FLOOR).unwrap_or_else(T::min_positive_value);
    for k in 0..n {
        let mut p = k;
        let mut best = a[k * n + k].abs();
        for i in k + 1..n {
            let v = a[i * n + k].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        piv[k] = p;
        if !(best >= floor) || best == T::zero() {
            return Err(k);
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
        }
        let pivot = a[k * n + k];
        for i in k + 1..n {
            let l = a[i * n + k] / pivot;
            a[i * n + k] = l;
            if l != T::zero() {
                for j in k + 1..n {
                    let u = a[k * n + j];
                    a[i * n + j] = a[i * n + j] - l * u;
                }
            }
        }
    }
    Ok(())
}

pub(crate) fn lu_solve_in_place<T: Float>(lu: &[T], piv: &[usize], n: usize, x: &mut [T]) {
    for k in 0..n {
        if piv[k] != k {
            x.swap(k, piv[k]);
        }
    }
    for i in 0..n {
        let mut s = x[i];
        for j in 0..i {
            s = s - lu[i * n + j] * x[j];
        }
        x[i] = s;
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in i + 1..n {
            s = s - lu[i * n + j] * x[j];
        }
        x[i] = s / lu[i * n + i];
    }
}

/// Explicit inverse of a block via LU.
pub(crate) fn invert<T: Float>(a: &[T], n: usize) -> Result<Vec<T>, usize> {
    let mut lu = a.to_vec();
    let mut piv = vec![0; n];
    lu_in_place(&mut lu, &mut piv, n)?;
    let mut inv = vec![T::zero(); n * n];
    let mut col = vec![T::zero(); n];
    for j in 0..n {
        col.iter_mut().for_each(|c| *c = T::zero());
        col[j] = T::one();
        lu_solve_in_place(&lu, &piv, n, &mut col);
        for i in 0..n {
            inv[i * n + j] = col[i];
        }
    }
    Ok(inv)
}

/// `y += a x`.
#[inline]
pub(crate) fn gemv_add<T: Float>(a: &[T], x: &[T], y: &mut [T], n: usize) {
    for i in 0..n {
        let row = &a[i * n..(i + 1) * n];
        let mut s = T::zero();
        for j in 0..n {
            s = s + row[j] * x[j];
        }
        y[i] = y[i] + s;
    }
}

/// `y -= a x`.
#[inline]
pub(crate) fn gemv_sub<T: Float>(a: &[T], x: &[T], y: &mut [T], n: usize) {
    for i in 0..n {
        let row = &a[i * n..(i + 1) * n];
        let mut s = T::zero();
        for j in 0..n {
            s = s + row[j] * x[j];
        }
        y[i] = y[i] - s;
    }
}

/// `out = a x`.
#[inline]
pub(crate) fn gemv<T: Float>(a: &[T], x: &[T], out: &mut [T], n: usize) {
    for i in 0..n {
        let row = &a[i * n..(i + 1) * n];
        let mut s = T::zero();
        for j in 0..n {
            s = s + row[j] * x[j];
        }
        out[i] = s;
    }
}

/// `c -= a b`.
pub(crate) fn gemm_sub<T: Float>(a: &[T], b: &[T], c: &mut [T], n: usize) {
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == T::zero() {
                continue;
            }
            for j in 0..n {
                c[i * n + j] = c[i * n + j] - aik * b[k * n + j];
            }
        }
    }
}

/// `out = a b`.
pub(crate) fn gemm<T: Float>(a: &[T], b: &[T], out: &mut [T], n: usize) {
    out.iter_mut().for_each(|v| *v = T::zero());
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == T::zero() {
                continue;
            }
            for j in 0..n {
                out[i * n + j] = out[i * n + j] + aik * b[k * n + j];
            }
        }
    }
}

/// Induced 1-norm (max absolute column sum).
pub(crate) fn norm1(a: &[f64], n: usize) -> f64 {
    (0..n)
        .map(|j| (0..n).map(|i| a[i * n + j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
