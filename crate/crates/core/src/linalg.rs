//! Dense linear-algebra helpers on top of nalgebra: block layouts, the
//! numerical-rank rule, SVD kernels, symmetric spectra and conjugate gradients.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::scalar::Real;

/// Contiguous block partition of a flat vector.
///
/// Block `k` occupies `offsets[k]..offsets[k + 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BlockLayout {
    offsets: Vec<usize>,
}

impl BlockLayout {
    pub fn from_sizes<I: IntoIterator<Item = usize>>(sizes: I) -> Self {
        let mut offsets = vec![0];
        let mut acc = 0;
        for s in sizes {
            acc += s;
            offsets.push(acc);
        }
        Self { offsets }
    }

    /// Number of blocks.
    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Total flattened length.
    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn size(&self, k: usize) -> usize {
        self.offsets[k + 1] - self.offsets[k]
    }

    pub fn range(&self, k: usize) -> Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    pub fn offset(&self, k: usize) -> usize {
        self.offsets[k]
    }

    pub fn sizes(&self) -> impl Iterator<Item = usize> + '_ {
        self.offsets.windows(2).map(|w| w[1] - w[0])
    }
}

/// Rank threshold `max(m, n) * sigma_max * RANK_RTOL`.
pub fn rank_threshold<T: Real>(rows: usize, cols: usize, sigma_max: T) -> T {
    T::from_usize_lossy(rows.max(cols)) * sigma_max * T::RANK_RTOL
}

/// Result of a singular-value kernel computation.
#[derive(Debug, Clone)]
pub struct Kernel<T: Real> {
    /// Orthonormal kernel basis, one column per direction.
    pub basis: DMatrix<T>,
    pub rank: usize,
    pub tolerance: T,
    /// Singular values of the original matrix, descending (length `min(m, n)`).
    pub singular_values: Vec<T>,
}

/// Singular values, descending.
pub fn singular_values<T: Real>(a: &DMatrix<T>) -> Vec<T> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<T> = a
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap());
    s
}

/// Largest singular value (0 for empty matrices).
pub fn spectral_norm<T: Real>(a: &DMatrix<T>) -> T {
    singular_values(a).first().copied().unwrap_or_else(T::zero)
}

/// Orthonormal basis of `ker a` from a full singular decomposition.
///
/// Wide matrices are padded with zero rows so the right singular vectors
/// span the whole domain; padding changes neither the kernel nor the
/// nonzero singular values.
pub fn kernel<T: Real>(a: &DMatrix<T>) -> Kernel<T> {
    let (m, n) = a.shape();
    if n == 0 {
        return Kernel {
            basis: DMatrix::zeros(0, 0),
            rank: 0,
            tolerance: T::zero(),
            singular_values: Vec::new(),
        };
    }
    if m == 0 {
        return Kernel {
            basis: DMatrix::identity(n, n),
            rank: 0,
            tolerance: T::zero(),
            singular_values: Vec::new(),
        };
    }
    let padded = if m < n {
        let mut p = DMatrix::zeros(n, n);
        p.rows_mut(0, m).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sigma: Vec<T> = svd.singular_values.iter().copied().collect();
    let sigma_max = sigma.iter().copied().fold(T::zero(), |acc, s| acc.max(s));
    let tolerance = rank_threshold(m, n, sigma_max);

    let null_rows: Vec<usize> = (0..sigma.len())
        .filter(|&k| sigma[k] <= tolerance)
        .collect();
    let rank = n - null_rows.len();
    let mut basis = DMatrix::zeros(n, null_rows.len());
    for (c, &k) in null_rows.iter().enumerate() {
        basis.set_column(c, &v_t.row(k).transpose());
    }
    let mut singular_values = sigma;
    singular_values.sort_by(|x, y| y.partial_cmp(x).unwrap());
    singular_values.truncate(m.min(n));
    Kernel {
        basis,
        rank,
        tolerance,
        singular_values,
    }
}

/// Extreme eigenvalues `(min, max)` of a symmetric matrix.
pub fn symmetric_extremes<T: Real>(a: &DMatrix<T>) -> (T, T) {
    if a.nrows() == 0 {
        return (T::zero(), T::zero());
    }
    let eig = a.clone().symmetric_eigen();
    let mut lo = eig.eigenvalues[0];
    let mut hi = eig.eigenvalues[0];
    for &l in eig.eigenvalues.iter() {
        lo = lo.min(l);
        hi = hi.max(l);
    }
    (lo, hi)
}

/// Outcome of [`conjugate_gradient`].
#[derive(Debug, Clone)]
pub struct CgOutcome<T: Real> {
    pub solution: DVector<T>,
    pub iterations: usize,
    pub residual_norm: T,
    pub converged: bool,
}

/// Conjugate gradients for a symmetric positive-definite operator given as a
/// matrix-free product. Stops when `||r|| <= rtol * ||rhs||`.
pub fn conjugate_gradient<T, F>(
    apply: F,
    rhs: &DVector<T>,
    rtol: T,
    max_iter: usize,
) -> CgOutcome<T>
where
    T: Real,
    F: Fn(&DVector<T>) -> DVector<T>,
{
    let n = rhs.len();
    let mut x = DVector::zeros(n);
    let target = rtol * rhs.norm();
    let mut r = rhs.clone();
    let mut rr = r.dot(&r);
    if rr.sqrt() <= target {
        return CgOutcome {
            solution: x,
            iterations: 0,
            residual_norm: rr.sqrt(),
            converged: true,
        };
    }
    let mut p = r.clone();
    for it in 1..=max_iter {
        let ap = apply(&p);
        let pap = p.dot(&ap);
        if pap <= T::zero() {
            return CgOutcome {
                solution: x,
                iterations: it,
                residual_norm: rr.sqrt(),
                converged: false,
            };
        }
        let alpha = rr / pap;
        x.axpy(alpha, &p, T::one());
        r.axpy(-alpha, &ap, T::one());
        let rr_next = r.dot(&r);
        if rr_next.sqrt() <= target {
            return CgOutcome {
                solution: x,
                iterations: it,
                residual_norm: rr_next.sqrt(),
                converged: true,
            };
        }
        let beta = rr_next / rr;
        p = &r + &p * beta;
        rr = rr_next;
    }
    CgOutcome {
        solution: x,
        iterations: max_iter,
        residual_norm: rr.sqrt(),
        converged: false,
    }
}

/// Square-root-free Cholesky factorization `A = L D L^T` of a symmetric
/// positive-definite matrix, `L` unit lower triangular.
#[derive(Debug, Clone)]
pub struct Ldlt<T: Real> {
    /// Strict lower part holds `L`; the diagonal holds `D`.
    packed: DMatrix<T>,
}

impl<T: Real> Ldlt<T> {
    /// Returns `None` when a pivot is not strictly positive.
    pub fn new(a: &DMatrix<T>) -> Option<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "LDL^T needs a square matrix");
        let mut f = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= f[(j, k)] * f[(j, k)] * f[(k, k)];
            }
            if !(d > T::zero()) {
                return None;
            }
            f[(j, j)] = d;
            for i in j + 1..n {
                let mut v = a[(i, j)];
                for k in 0..j {
                    v -= f[(i, k)] * f[(j, k)] * f[(k, k)];
                }
                f[(i, j)] = v / d;
            }
        }
        Some(Self { packed: f })
    }

    pub fn solve(&self, b: &DVector<T>) -> DVector<T> {
        let n = self.packed.nrows();
        let f = &self.packed;
        let mut x = b.clone();
        for i in 0..n {
            for k in 0..i {
                let t = f[(i, k)] * x[k];
                x[i] -= t;
            }
        }
        for i in 0..n {
            x[i] /= f[(i, i)];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let t = f[(k, i)] * x[k];
                x[i] -= t;
            }
        }
        x
    }

    /// Pivots `D`.
    pub fn pivots(&self) -> DVector<T> {
        self.packed.diagonal()
    }
}

/// Largest absolute entry.
pub fn max_abs<T: Real>(a: &DMatrix<T>) -> T {
    a.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
}
