//! Banded Cholesky factorization for symmetric positive-definite tridiagonal
//! matrices, used to draw Gaussian paths given their precision.

use rand::Rng;

use crate::dist::std_normal;

/// `A = L L^T` with `L` lower bidiagonal.
#[derive(Debug, Clone, Default)]
pub struct TridiagCholesky {
    diag: Vec<f64>,
    sub: Vec<f64>,
}

impl TridiagCholesky {
    /// Factor the matrix with main diagonal `diag` and off-diagonal `off`
    /// (`off[i] = A[i, i+1]`). Returns `None` if it is not positive definite.
    pub fn factor(diag: &[f64], off: &[f64]) -> Option<Self> {
        let mut chol = TridiagCholesky::default();
        chol.refactor(diag, off).then_some(chol)
    }

    /// Factor in place, reusing buffers. Returns false if not positive definite.
    pub fn refactor(&mut self, diag: &[f64], off: &[f64]) -> bool {
        let n = diag.len();
        debug_assert_eq!(off.len() + 1, n.max(1));
        self.diag.resize(n, 0.0);
        self.sub.resize(n.saturating_sub(1), 0.0);
        for i in 0..n {
            let mut d = diag[i];
            if i > 0 {
                d -= self.sub[i - 1] * self.sub[i - 1];
            }
            if !(d > 0.0) || !d.is_finite() {
                return false;
            }
            let d = d.sqrt();
            self.diag[i] = d;
            if i + 1 < n {
                self.sub[i] = off[i] / d;
            }
        }
        true
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Solve `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        self.forward(b);
        self.backward(b);
    }

    // L y = b
    fn forward(&self, b: &mut [f64]) {
        let n = self.diag.len();
        for i in 0..n {
            if i > 0 {
                b[i] -= self.sub[i - 1] * b[i - 1];
            }
            b[i] /= self.diag[i];
        }
    }

    // L^T x = y
    fn backward(&self, b: &mut [f64]) {
        let n = self.diag.len();
        for i in (0..n).rev() {
            if i + 1 < n {
                b[i] -= self.sub[i] * b[i + 1];
            }
            b[i] /= self.diag[i];
        }
    }

    /// Draw from `N(A^{-1} b, A^{-1})`, writing the draw into `b`.
    pub fn sample_in_place<R: Rng + ?Sized>(&self, b: &mut [f64], rng: &mut R) {
        // mean = L^{-T} L^{-1} b; draw = L^{-T} (L^{-1} b + eps)
        self.forward(b);
        for v in b.iter_mut() {
            *v += std_normal(rng);
        }
        self.backward(b);
    }
}
