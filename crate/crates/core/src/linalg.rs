//! Small dense complex linear algebra: the matrix type behind Fock operators
//! and superoperators, a compressed-row copy for fast repeated products,
//! Hermitian eigenvalues by cyclic Jacobi, and the matrix exponential.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        CMatrix { rows, cols, data }
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, d) in diag.iter().enumerate() {
            m.data[i * n + i] = *d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn scale(&self, s: C64) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> CMatrix {
        self.scale(C64::new(s, 0.0))
    }

    /// `self += s * other`
    pub fn add_scaled(&mut self, s: C64, other: &CMatrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = CMatrix::zeros(self.rows, other.cols);
        let n = other.cols;
        for i in 0..self.rows {
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let b_row = &other.data[k * n..(k + 1) * n];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// `[self, other]`
    pub fn commutator(&self, other: &CMatrix) -> CMatrix {
        &self.matmul(other) - &other.matmul(self)
    }

    /// `{self, other}`
    pub fn anticommutator(&self, other: &CMatrix) -> CMatrix {
        &self.matmul(other) + &other.matmul(self)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).fold(0.0, f64::max).sqrt_libm()
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .fold(0.0, f64::max)
            .sqrt_libm()
    }

    /// `max |A − A†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.rows {
            for c in r..self.cols {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm_sqr());
            }
        }
        worst.sqrt_libm()
    }

    /// Induced 1-norm (largest absolute column sum).
    pub fn norm_one(&self) -> f64 {
        let mut sums = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (s, x) in sums.iter_mut().zip(self.row(r)) {
                *s += x.norm_libm();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.re.is_finite() && x.im.is_finite())
    }

    /// Column-stacked vectorization, `vec(A)[r + c·rows] = A[r, c]`.
    pub fn vectorize(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                out.push(self[(r, c)]);
            }
        }
        out
    }

    /// Inverse of [`CMatrix::vectorize`] for an `n×n` matrix.
    pub fn unvectorize(v: &[C64], n: usize) -> CMatrix {
        assert_eq!(v.len(), n * n);
        CMatrix::from_fn(n, n, |r, c| v[r + c * n])
    }

    pub fn to_sparse(&self) -> CsrMatrix {
        let mut row_ptr = Vec::with_capacity(self.rows + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for r in 0..self.rows {
            for (c, x) in self.row(r).iter().enumerate() {
                if *x != ZERO {
                    cols.push(c);
                    vals.push(*x);
                }
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix {
            rows: self.rows,
            cols: self.cols,
            row_ptr,
            col_idx: cols,
            vals,
        }
    }

    /// Nonzero entries as `(row, col, value)`.
    pub fn nonzeros(&self) -> Vec<(usize, usize, C64)> {
        let mut out = Vec::new();
        for r in 0..self.rows {
            for (c, x) in self.row(r).iter().enumerate() {
                if *x != ZERO {
                    out.push((r, c, *x));
                }
            }
        }
        out
    }
}

trait LibmExt {
    fn sqrt_libm(self) -> f64;
}

impl LibmExt for f64 {
    fn sqrt_libm(self) -> f64 {
        libm::sqrt(self)
    }
}

trait ComplexNorm {
    fn norm_libm(&self) -> f64;
}

impl ComplexNorm for C64 {
    fn norm_libm(&self) -> f64 {
        libm::hypot(self.re, self.im)
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs)
    }
}

/// Compressed sparse row copy of a [`CMatrix`].
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<C64>,
}

impl CsrMatrix {
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// `out = self · v`
    pub fn matvec_into(&self, v: &[C64], out: &mut [C64]) {
        assert_eq!(v.len(), self.cols);
        assert_eq!(out.len(), self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[idx] * v[self.col_idx[idx]];
            }
            *o = acc;
        }
    }
}

/// Eigenvalues and eigenvectors of a real symmetric `n×n` matrix (row-major)
/// by cyclic Jacobi rotations. Eigenvalues are returned ascending; column `j`
/// of the returned matrix is the eigenvector of eigenvalue `j`.
pub fn symmetric_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .map(|(p, q)| m[p * n + q] * m[p * n + q])
            .sum();
        if off <= 1e-30 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i * n + i].total_cmp(&m[j * n + j]));
    let vals = order.iter().map(|&i| m[i * n + i]).collect();
    let mut vecs = vec![0.0; n * n];
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vecs[k * n + new] = v[k * n + old];
        }
    }
    (vals, vecs)
}

/// Eigenvalues (ascending) of a Hermitian matrix.
///
/// Uses the real embedding `[[Re, −Im], [Im, Re]]`, whose spectrum is that
/// of the input with every eigenvalue doubled.
pub fn hermitian_eigenvalues(h: &CMatrix) -> Vec<f64> {
    assert!(h.is_square());
    let n = h.rows();
    let m = 2 * n;
    let mut real = vec![0.0; m * m];
    for r in 0..n {
        for c in 0..n {
            // symmetrize to absorb rounding-level non-hermiticity
            let x = (h[(r, c)] + h[(c, r)].conj()) * 0.5;
            real[r * m + c] = x.re;
            real[r * m + c + n] = -x.im;
            real[(r + n) * m + c] = x.im;
            real[(r + n) * m + c + n] = x.re;
        }
    }
    let (vals, _) = symmetric_eigen(&real, m);
    vals.into_iter().step_by(2).collect()
}

/// Solve `A X = B` by LU with partial pivoting. Returns `None` if singular.
pub fn solve(a: &CMatrix, b: &CMatrix) -> Option<CMatrix> {
    assert!(a.is_square());
    assert_eq!(a.rows(), b.rows());
    let n = a.rows();
    let mut lu = a.clone();
    let mut x = b.clone();
    let m = b.cols();
    for k in 0..n {
        let mut piv = k;
        let mut best = lu[(k, k)].norm_sqr();
        for r in (k + 1)..n {
            let v = lu[(r, k)].norm_sqr();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 {
            return None;
        }
        if piv != k {
            for c in 0..n {
                let tmp = lu[(k, c)];
                lu[(k, c)] = lu[(piv, c)];
                lu[(piv, c)] = tmp;
            }
            for c in 0..m {
                let tmp = x[(k, c)];
                x[(k, c)] = x[(piv, c)];
                x[(piv, c)] = tmp;
            }
        }
        let pivot = lu[(k, k)];
        for r in (k + 1)..n {
            let f = lu[(r, k)] / pivot;
            if f == ZERO {
                continue;
            }
            lu[(r, k)] = f;
            for c in (k + 1)..n {
                let sub = f * lu[(k, c)];
                lu[(r, c)] -= sub;
            }
            for c in 0..m {
                let sub = f * x[(k, c)];
                x[(r, c)] -= sub;
            }
        }
    }
    for k in (0..n).rev() {
        let pivot = lu[(k, k)];
        for c in 0..m {
            let mut acc = x[(k, c)];
            for j in (k + 1)..n {
                acc -= lu[(k, j)] * x[(j, c)];
            }
            x[(k, c)] = acc / pivot;
        }
    }
    Some(x)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// `exp(A)` by scaling and squaring with the degree-13 Padé approximant.
pub fn expm(a: &CMatrix) -> CMatrix {
    assert!(a.is_square());
    let n = a.rows();
    if n == 0 {
        return a.clone();
    }
    const THETA13: f64 = 5.371920351148152;
    let norm = a.norm_one();
    let squarings = if norm > THETA13 {
        libm::ceil(libm::log2(norm / THETA13)) as u32
    } else {
        0
    };
    let a = a.scale_real(libm::pow(2.0, -(squarings as f64)));
    let b = PADE13;
    let id = CMatrix::identity(n);
    let a2 = a.matmul(&a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);

    let mut inner_u = a6.scale_real(b[13]);
    inner_u.add_scaled(C64::new(b[11], 0.0), &a4);
    inner_u.add_scaled(C64::new(b[9], 0.0), &a2);
    let mut u = a6.matmul(&inner_u);
    u.add_scaled(C64::new(b[7], 0.0), &a6);
    u.add_scaled(C64::new(b[5], 0.0), &a4);
    u.add_scaled(C64::new(b[3], 0.0), &a2);
    u.add_scaled(C64::new(b[1], 0.0), &id);
    let u = a.matmul(&u);

    let mut inner_v = a6.scale_real(b[12]);
    inner_v.add_scaled(C64::new(b[10], 0.0), &a4);
    inner_v.add_scaled(C64::new(b[8], 0.0), &a2);
    let mut v = a6.matmul(&inner_v);
    v.add_scaled(C64::new(b[6], 0.0), &a6);
    v.add_scaled(C64::new(b[4], 0.0), &a4);
    v.add_scaled(C64::new(b[2], 0.0), &a2);
    v.add_scaled(C64::new(b[0], 0.0), &id);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = solve(&q, &p).expect("Padé denominator is nonsingular for scaled input");
    for _ in 0..squarings {
        r = r.matmul(&r);
    }
    r
}
