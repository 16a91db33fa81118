//! Dense complex linear algebra for the small matrices this crate works with.
//!
//! Two routines live here: a cyclic Jacobi eigensolver for Hermitian matrices
//! and a partial-pivot LU solver for general complex systems. Both are
//! deterministic: the same input bits always produce the same output bits.

use std::fmt;
use std::ops::{Index, IndexMut};

pub use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Absolute tolerance for `A[i][j] == conj(A[j][i])`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Systems whose 1-norm condition estimate exceeds this are rejected.
pub const CONDITION_LIMIT: f64 = 1e12;
/// Jacobi stops once the off-diagonal Frobenius norm drops below this
/// fraction of the full norm.
pub const JACOBI_REL_TOL: f64 = 1e-15;
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    n: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![C64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_row_major(n: usize, data: Vec<C64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("dim", "matrix dimension must be at least 1"));
        }
        if data.len() != n * n {
            return Err(Error::invalid(
                "entries",
                format!("expected {} entries for a {n}x{n} matrix, got {}", n * n, data.len()),
            ));
        }
        Ok(Self { n, data })
    }

    pub fn from_real(n: usize, data: &[f64]) -> Result<Self> {
        Self::from_row_major(n, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.n).map(|i| self[(i, j)]).collect()
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.n, "vector length must match matrix dimension");
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.n + j]
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries((0..self.n).map(|i| self.row(i)))
            .finish()
    }
}

/// A validated Hermitian matrix. Entries are frequencies in GHz wherever
/// this crate builds one.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    /// Checks the Hermitian property and stores the exactly Hermitian part
    /// `(A + A^H) / 2`. Fails with the worst offending pair.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let n = matrix.dim();
        let mut worst = (0, 0, 0.0_f64);
        for i in 0..n {
            for j in i..n {
                let dev = (matrix[(i, j)] - matrix[(j, i)].conj()).norm();
                if dev > worst.2 || dev.is_nan() {
                    worst = (i, j, dev);
                }
            }
        }
        if !(worst.2 <= HERMITIAN_TOL) {
            return Err(Error::NotHermitian {
                row: worst.0,
                col: worst.1,
                deviation: worst.2,
            });
        }
        let sym = ComplexMatrix::from_fn(n, |i, j| (matrix[(i, j)] + matrix[(j, i)].conj()) * 0.5);
        Ok(Self(sym))
    }

    pub fn from_real_symmetric(n: usize, data: &[f64]) -> Result<Self> {
        Self::new(ComplexMatrix::from_real(n, data)?)
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// Principal submatrix on the given (ordered) index set.
    pub fn submatrix(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invalid("indices", "submatrix needs at least one index"));
        }
        Ok(Self(ComplexMatrix::from_fn(indices.len(), |a, b| {
            self.0[(indices[a], indices[b])]
        })))
    }
}

impl Index<(usize, usize)> for HermitianMatrix {
    type Output = C64;
    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.0[idx]
    }
}

/// Eigenvalues in ascending order; column `i` of `vectors` belongs to
/// `values[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl EigenDecomposition {
    pub fn vector(&self, i: usize) -> Vec<C64> {
        self.vectors.column(i)
    }
}

/// Hermitian eigendecomposition by cyclic complex Jacobi rotations.
///
/// Each rotation removes the phase of the pivot element and then applies the
/// real symmetric Jacobi rotation, so the working matrix stays exactly
/// Hermitian. Eigenvectors are phase-fixed so that their largest component
/// (first one on ties) is real and positive.
pub fn eigh(a: &HermitianMatrix) -> Result<EigenDecomposition> {
    let n = a.dim();
    let mut m = a.matrix().clone();
    let mut v = ComplexMatrix::identity(n);
    let scale = m.norm();

    if n > 1 && scale > 0.0 {
        let mut converged = false;
        for _ in 0..JACOBI_MAX_SWEEPS {
            if off_diagonal_norm(&m) <= JACOBI_REL_TOL * scale {
                converged = true;
                break;
            }
            for p in 0..n - 1 {
                for q in p + 1..n {
                    rotate(&mut m, &mut v, p, q);
                }
            }
        }
        if !converged && off_diagonal_norm(&m) > JACOBI_REL_TOL * scale {
            return Err(Error::Numerical(format!(
                "Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps"
            )));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].re.total_cmp(&m[(j, j)].re));
    let values: Vec<f64> = order.iter().map(|&i| m[(i, i)].re).collect();
    let mut vectors = ComplexMatrix::zeros(n);
    for (col, &src) in order.iter().enumerate() {
        let mut pivot = 0;
        for k in 1..n {
            if v[(k, src)].norm() > v[(pivot, src)].norm() {
                pivot = k;
            }
        }
        let p = v[(pivot, src)];
        let phase = if p.norm() > 0.0 { p.conj() / p.norm() } else { C64::new(1.0, 0.0) };
        for k in 0..n {
            vectors[(k, col)] = v[(k, src)] * phase;
        }
    }
    Ok(EigenDecomposition { values, vectors })
}

fn off_diagonal_norm(m: &ComplexMatrix) -> f64 {
    let n = m.dim();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

fn rotate(m: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = m[(p, q)];
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let e = apq / r;
    let app = m[(p, p)].re;
    let aqq = m[(q, q)].re;
    let theta = (aqq - app) / (2.0 * r);
    let t = if theta.is_finite() {
        let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
        sign / (theta.abs() + (theta * theta + 1.0).sqrt())
    } else {
        0.0
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let se = e * s;

    let n = m.dim();
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let apk = m[(p, k)];
        let aqk = m[(q, k)];
        let new_p = apk * c - se * aqk;
        let new_q = se.conj() * apk + aqk * c;
        m[(p, k)] = new_p;
        m[(q, k)] = new_q;
        m[(k, p)] = new_p.conj();
        m[(k, q)] = new_q.conj();
    }
    m[(p, p)] = C64::new(app - t * r, 0.0);
    m[(q, q)] = C64::new(aqq + t * r, 0.0);
    m[(p, q)] = C64::new(0.0, 0.0);
    m[(q, p)] = C64::new(0.0, 0.0);

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * c - se.conj() * vkq;
        v[(k, q)] = se * vkp + vkq * c;
    }
}

/// LU factorisation with partial pivoting, `P A = L U` packed in one matrix.
struct Lu {
    lu: ComplexMatrix,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(a: &ComplexMatrix) -> Result<Self> {
        let n = a.dim();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let mut piv = col;
            let mut best = lu[(col, col)].norm();
            for row in col + 1..n {
                let mag = lu[(row, col)].norm();
                if mag > best {
                    best = mag;
                    piv = row;
                }
            }
            if !(best > 0.0) {
                return Err(Error::Singular { column: col });
            }
            if piv != col {
                for k in 0..n {
                    let tmp = lu[(col, k)];
                    lu[(col, k)] = lu[(piv, k)];
                    lu[(piv, k)] = tmp;
                }
                perm.swap(col, piv);
            }
            let d = lu[(col, col)];
            for row in col + 1..n {
                let f = lu[(row, col)] / d;
                lu[(row, col)] = f;
                for k in col + 1..n {
                    let u = lu[(col, k)];
                    lu[(row, k)] -= f * u;
                }
            }
        }
        Ok(Self { lu, perm })
    }

    fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.lu.dim();
        let mut x: Vec<C64> = self.perm.iter().map(|&i| b[i]).collect();
        for i in 0..n {
            for k in 0..i {
                let l = self.lu[(i, k)];
                let xk = x[k];
                x[i] -= l * xk;
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let u = self.lu[(i, k)];
                let xk = x[k];
                x[i] -= u * xk;
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }

    /// `||A||_1 * ||A^-1||_1`, with the inverse formed column by column.
    fn condition_1(&self, a: &ComplexMatrix) -> f64 {
        let n = a.dim();
        let mut inv_norm = 0.0_f64;
        let mut e = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            e[j] = C64::new(1.0, 0.0);
            let col = self.solve(&e);
            e[j] = C64::new(0.0, 0.0);
            inv_norm = inv_norm.max(col.iter().map(|z| z.norm()).sum());
        }
        a.norm_1() * inv_norm
    }
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
///
/// Singular matrices and matrices whose condition estimate exceeds
/// [`CONDITION_LIMIT`] are rejected instead of returning a meaningless answer.
pub fn solve_linear(a: &ComplexMatrix, b: &[C64]) -> Result<Vec<C64>> {
    if b.len() != a.dim() {
        return Err(Error::invalid(
            "b",
            format!("right-hand side has length {}, matrix dimension is {}", b.len(), a.dim()),
        ));
    }
    let lu = Lu::factor(a)?;
    let cond = lu.condition_1(a);
    if !(cond <= CONDITION_LIMIT) {
        return Err(Error::IllConditioned { estimate: cond });
    }
    let x = lu.solve(b);
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("non-finite solution".into()));
    }
    Ok(x)
}

/// Real convenience wrapper over [`solve_linear`]; `a` is row-major `n x n`.
pub fn solve_linear_real(n: usize, a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let m = ComplexMatrix::from_real(n, a)?;
    let rhs: Vec<C64> = b.iter().map(|&x| C64::new(x, 0.0)).collect();
    Ok(solve_linear(&m, &rhs)?.into_iter().map(|z| z.re).collect())
}
