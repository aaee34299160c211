//! Dense symmetric linear algebra helpers.
//!
//! Small matrices go through a cyclic Jacobi sweep; large ones through
//! nalgebra's tridiagonal QR routine. Either way eigenvalues come back sorted
//! in descending order with matching eigenvector columns.

use nalgebra::{DMatrix, DVector};

/// Matrices up to this order use the Jacobi solver.
pub const JACOBI_MAX_ORDER: usize = 64;

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigendecomposition of a symmetric matrix, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: DVector<f64>,
    /// Column `j` is the unit eigenvector for `values[j]`.
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn min_value(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn max_value(&self) -> f64 {
        self.values[0]
    }
}

/// Symmetric eigendecomposition. Only the lower triangle is trusted; the
/// input is symmetrized first.
pub fn sym_eigen(a: &DMatrix<f64>) -> SymEigen {
    assert!(a.is_square(), "sym_eigen needs a square matrix");
    let sym = symmetrize(a);
    if sym.nrows() <= JACOBI_MAX_ORDER {
        jacobi_eigen(&sym)
    } else {
        let eig = nalgebra::SymmetricEigen::new(sym);
        sort_descending(eig.eigenvalues, eig.eigenvectors)
    }
}

/// Cyclic Jacobi rotations until the off-diagonal Frobenius mass drops below
/// `1e-12 * ||A||_F`.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> SymEigen {
    let n = a.nrows();
    let mut m = symmetrize(a);
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = m.norm().max(f64::MIN_POSITIVE);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off = off_diagonal_norm(&m);
        if off <= JACOBI_TOL * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    sort_descending(m.diagonal(), v)
}

fn off_diagonal_norm(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m[(i, j)] * m[(i, j)];
            }
        }
    }
    s.sqrt()
}

fn sort_descending(values: DVector<f64>, vectors: DMatrix<f64>) -> SymEigen {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps the solver's order among exact ties
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    let sorted_values = DVector::from_iterator(n, order.iter().map(|&i| values[i]));
    let mut sorted_vectors = DMatrix::zeros(vectors.nrows(), n);
    for (dst, &src) in order.iter().enumerate() {
        sorted_vectors.set_column(dst, &vectors.column(src));
    }
    SymEigen {
        values: sorted_values,
        vectors: sorted_vectors,
    }
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Largest absolute difference between `a` and its transpose.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    (a - a.transpose()).amax()
}

/// Operator (spectral) norm of a symmetric matrix.
pub fn sym_operator_norm(a: &DMatrix<f64>) -> f64 {
    let eig = sym_eigen(a);
    eig.max_value().abs().max(eig.min_value().abs())
}

/// `A^{-1/2}` for a symmetric positive definite matrix.
pub fn inverse_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = sym_eigen(a);
    let n = a.nrows();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = 1.0 / eig.values[i].sqrt();
    }
    &eig.vectors * d * eig.vectors.transpose()
}

pub fn outer(x: &DVector<f64>) -> DMatrix<f64> {
    x * x.transpose()
}
