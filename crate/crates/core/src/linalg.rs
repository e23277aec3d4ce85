//! Dense complex linear algebra.
//!
//! [`ComplexMatrix`] stores its entries in **row-major** order: entry `(i, j)`
//! lives at `data[i * cols + j]`. Everything that vectorizes a density matrix
//! builds on top of this order, see [`vec_columns`].
//!
//! Vectorization is column stacking, `vec(X)[i + j * d] = X[i, j]`, under
//! which `vec(A X B) = (B^T ⊗ A) vec(X)`. For a single qubit,
//!
//! ```text
//! X = [[a, b],      vec(X) = [a, c, b, d]^T
//!      [c, d]]
//! ```

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Products above this many scalar multiply-adds are split across threads.
const PAR_MATMUL_WORK: usize = 1 << 18;

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            write!(f, "  ")?;
            for j in 0..self.cols.min(8) {
                let z = self[(i, j)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    /// Zero matrix. Panics on an empty shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix shape must be at least 1x1");
        Self {
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

    /// Builds a matrix from row-major data.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                op: "from_vec",
                left: (rows, cols),
                right: (data.len(), 1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::from_vec(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    /// `|a⟩⟨b|` for column vectors `a` and `b`.
    pub fn outer(a: &[C64], b: &[C64]) -> Self {
        let mut m = Self::zeros(a.len(), b.len());
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                m.data[i * b.len() + j] = x * y.conj();
            }
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: C64, other: &Self) {
        assert_eq!(self.shape(), other.shape(), "axpy shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols))
            .map(|i| self.data[i * self.cols + i])
            .sum()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols))
            .map(|i| self.data[i * self.cols + i])
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.data[i * self.cols + j].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Cheap upper bound on the spectral norm, `sqrt(‖M‖₁ ‖M‖_∞)`.
    pub fn spectral_norm_bound(&self) -> f64 {
        (self.norm_one() * self.norm_inf()).sqrt()
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut dev = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.data[i * n + j] - self.data[j * n + i].conj()).norm();
                dev = dev.max(d);
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// `(M + M†) / 2`.
    pub fn hermitian_part(&self) -> Self {
        let mut h = self.clone();
        h.axpy(ONE, &self.adjoint());
        h.scale_real(0.5)
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.max_abs() <= tol
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.shape() == other.shape()
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| (a - b).norm() <= tol)
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_nalgebra(m: &DMatrix<C64>) -> Self {
        let (rows, cols) = m.shape();
        let mut out = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                out.data[i * cols + j] = m[(i, j)];
            }
        }
        out
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!(self.shape(), rhs.shape(), "matrix add shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&ComplexMatrix> for ComplexMatrix {
    fn sub_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!(self.shape(), rhs.shape(), "matrix sub shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale_real(-1.0)
    }
}

/// Panicking product, for use where shapes are guaranteed by construction.
impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        matmul(self, rhs).expect("matrix product shape mismatch")
    }
}

/// Dense product `a · b`.
pub fn matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.cols != b.rows {
        return Err(Error::DimensionMismatch {
            op: "matmul",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let (n, k, m) = (a.rows, a.cols, b.cols);
    let mut out = ComplexMatrix::zeros(n, m);
    let row_kernel = |(i, out_row): (usize, &mut [C64])| {
        let a_row = &a.data[i * k..(i + 1) * k];
        for (l, &a_il) in a_row.iter().enumerate() {
            if a_il == ZERO {
                continue;
            }
            let b_row = &b.data[l * m..(l + 1) * m];
            for (o, &b_lj) in out_row.iter_mut().zip(b_row) {
                *o += a_il * b_lj;
            }
        }
    };
    if n * k * m >= PAR_MATMUL_WORK && n > 1 {
        out.data.par_chunks_mut(m).enumerate().for_each(row_kernel);
    } else {
        out.data.chunks_mut(m).enumerate().for_each(row_kernel);
    }
    Ok(out)
}

/// Matrix-vector product.
pub fn matvec(a: &ComplexMatrix, x: &[C64]) -> Result<Vec<C64>> {
    if a.cols != x.len() {
        return Err(Error::DimensionMismatch {
            op: "matvec",
            left: a.shape(),
            right: (x.len(), 1),
        });
    }
    let kernel = |row: &[C64]| row.iter().zip(x).map(|(&r, &v)| r * v).sum::<C64>();
    let out = if a.rows * a.cols >= PAR_MATMUL_WORK {
        a.data.par_chunks(a.cols).map(kernel).collect()
    } else {
        a.data.chunks(a.cols).map(kernel).collect()
    };
    Ok(out)
}

/// Kronecker product, `out[(i·b.rows + k), (j·b.cols + l)] = a[i,j]·b[k,l]`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut out = ComplexMatrix::zeros(rows, cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let aij = a.data[i * a.cols + j];
            if aij == ZERO {
                continue;
            }
            for k in 0..b.rows {
                let base = (i * b.rows + k) * cols + j * b.cols;
                let b_row = b.row(k);
                for (l, &bkl) in b_row.iter().enumerate() {
                    out.data[base + l] = aij * bkl;
                }
            }
        }
    }
    out
}

/// Column-stacking vectorization of a square matrix.
pub fn vec_columns(m: &ComplexMatrix) -> Vec<C64> {
    let (r, c) = m.shape();
    let mut v = vec![ZERO; r * c];
    for i in 0..r {
        for j in 0..c {
            v[i + j * r] = m.data[i * c + j];
        }
    }
    v
}

/// Inverse of [`vec_columns`] for a `d × d` matrix.
pub fn unvec_columns(v: &[C64], d: usize) -> Result<ComplexMatrix> {
    if v.len() != d * d {
        return Err(Error::DimensionMismatch {
            op: "unvec_columns",
            left: (v.len(), 1),
            right: (d, d),
        });
    }
    let mut m = ComplexMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            m.data[i * d + j] = v[i + j * d];
        }
    }
    Ok(m)
}

/// Largest-power-of-two squaring count that brings `norm` down to `target`.
fn squarings_for(norm: f64, target: f64) -> u32 {
    if norm <= target {
        0
    } else {
        (norm / target).log2().ceil() as u32
    }
}

/// Matrix exponential `exp(scale · m)`.
///
/// Scaling and squaring: the argument is halved until its spectral norm
/// (bounded by `sqrt(‖·‖₁‖·‖_∞)`) is at most 0.5, then a Taylor series is
/// summed until the next term drops below machine precision relative to the
/// partial sum, and the result is squared back.
pub fn expm(m: &ComplexMatrix, scale: f64) -> Result<ComplexMatrix> {
    expm_complex(m, C64::new(scale, 0.0))
}

/// [`expm`] with a complex scale factor.
pub fn expm_complex(m: &ComplexMatrix, scale: C64) -> Result<ComplexMatrix> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            op: "expm",
            shape: m.shape(),
        });
    }
    let n = m.rows;
    let a = m.scale(scale);
    let norm = a.spectral_norm_bound();
    if norm == 0.0 {
        return Ok(ComplexMatrix::identity(n));
    }
    let s = squarings_for(norm, 0.5);
    let a = a.scale_real(0.5f64.powi(s as i32));
    let a_norm = norm * 0.5f64.powi(s as i32);

    let mut result = ComplexMatrix::identity(n);
    let mut term = ComplexMatrix::identity(n);
    let mut term_bound = 1.0;
    for k in 1..=40u32 {
        term = &term * &a;
        term = term.scale_real(1.0 / k as f64);
        result += &term;
        term_bound *= a_norm / k as f64;
        // Remaining tail is bounded by a geometric series in a_norm / (k + 1).
        if term_bound * a_norm / (k as f64 + 1.0 - a_norm) < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        result = &result * &result;
    }
    Ok(result)
}

/// Inverse by LU decomposition with partial pivoting.
pub fn inverse(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            op: "inverse",
            shape: m.shape(),
        });
    }
    let lu = m.to_nalgebra().lu();
    match lu.try_inverse() {
        Some(inv) => Ok(ComplexMatrix::from_nalgebra(&inv)),
        None => Err(Error::Singular { modulus: 0.0 }),
    }
}

fn hermitian_tolerance(m: &ComplexMatrix, tol: f64) -> Result<()> {
    let dev = m.hermitian_deviation();
    if dev > tol * m.max_abs().max(1.0) {
        return Err(Error::NotHermitian { deviation: dev });
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Returns eigenvalues in ascending order and the unitary whose columns are
/// the matching eigenvectors.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            op: "hermitian_eig",
            shape: m.shape(),
        });
    }
    hermitian_tolerance(m, 1e-10)?;
    let herm = m.hermitian_part().to_nalgebra();
    let eig = herm.symmetric_eigen();
    let n = m.rows;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        for row in 0..n {
            vectors[(row, col)] = eig.eigenvectors[(row, k)];
        }
    }
    Ok((values, vectors))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            op: "hermitian_eigenvalues",
            shape: m.shape(),
        });
    }
    hermitian_tolerance(m, 1e-10)?;
    let mut values: Vec<f64> = m
        .hermitian_part()
        .to_nalgebra()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Eigenvalues of a general square matrix (complex Schur form).
pub fn eigenvalues(m: &ComplexMatrix) -> Result<Vec<C64>> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            op: "eigenvalues",
            shape: m.shape(),
        });
    }
    let schur = m
        .to_nalgebra()
        .try_schur(1e-15, 10_000)
        .ok_or(Error::NoConvergence {
            what: "Schur decomposition",
            iterations: 10_000,
        })?;
    let (_, t) = schur.unpack();
    Ok((0..m.rows).map(|i| t[(i, i)]).collect())
}

pub fn spectral_radius(m: &ComplexMatrix) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Sum of singular values.
pub fn trace_norm(m: &ComplexMatrix) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            op: "trace_norm",
            shape: m.shape(),
        });
    }
    if m.hermitian_deviation() <= 1e-12 * m.max_abs().max(1e-300) {
        return Ok(hermitian_eigenvalues(m)?.iter().map(|l| l.abs()).sum());
    }
    let gram = &m.adjoint() * m;
    Ok(hermitian_eigenvalues(&gram)?
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .sum())
}

/// Largest singular value.
pub fn spectral_norm(m: &ComplexMatrix) -> f64 {
    if m.max_abs() == 0.0 {
        return 0.0;
    }
    if m.is_square() && m.hermitian_deviation() <= 1e-14 * m.max_abs() {
        let ev = hermitian_eigenvalues(m).expect("Hermitian by check");
        return ev.iter().map(|l| l.abs()).fold(0.0, f64::max);
    }
    let gram = if m.rows <= m.cols {
        m * &m.adjoint()
    } else {
        &m.adjoint() * m
    };
    let ev = hermitian_eigenvalues(&gram).expect("Gram matrix is Hermitian");
    ev.last().copied().unwrap_or(0.0).max(0.0).sqrt()
}

/// Principal square root by the Denman–Beavers iteration.
fn sqrtm_denman_beavers(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = m.rows;
    let mut y = m.clone();
    let mut z = ComplexMatrix::identity(n);
    for _ in 0..100 {
        let y_inv = inverse(&y)?;
        let z_inv = inverse(&z)?;
        let mut y_next = y.clone();
        y_next += &z_inv;
        let y_next = y_next.scale_real(0.5);
        let mut z_next = z.clone();
        z_next += &y_inv;
        let z_next = z_next.scale_real(0.5);
        let change = (&y_next - &y).frobenius_norm();
        y = y_next;
        z = z_next;
        if change <= 1e-15 * y.frobenius_norm() {
            return Ok(y);
        }
    }
    Err(Error::NoConvergence {
        what: "Denman-Beavers square root",
        iterations: 100,
    })
}

/// Principal matrix logarithm.
///
/// Hermitian input is handled through its eigendecomposition. Anything else
/// goes through inverse scaling and squaring: repeated square roots until the
/// matrix is within 0.25 of the identity, then the series
/// `log X = 2 Σ Z^{2k+1}/(2k+1)` with `Z = (X − I)(X + I)^{-1}`.
pub fn matrix_log(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            op: "matrix_log",
            shape: m.shape(),
        });
    }
    let n = m.rows;
    let scale = m.max_abs().max(1e-300);
    let spectrum = eigenvalues(m)?;
    for z in &spectrum {
        if z.norm() <= 1e-12 * scale {
            return Err(Error::Singular { modulus: z.norm() });
        }
        if z.re < 0.0 && z.im.abs() <= 1e-12 * scale {
            return Err(Error::BranchCut { re: z.re, im: z.im });
        }
    }

    if m.hermitian_deviation() <= 1e-13 * scale {
        let (values, vectors) = hermitian_eig(m)?;
        if values.iter().all(|&l| l > 0.0) {
            let logs: Vec<C64> = values.iter().map(|&l| C64::new(l.ln(), 0.0)).collect();
            let d = ComplexMatrix::from_diag(&logs);
            return Ok(&(&vectors * &d) * &vectors.adjoint());
        }
    }

    let id = ComplexMatrix::identity(n);
    let mut x = m.clone();
    let mut roots = 0u32;
    while (&x - &id).spectral_norm_bound() > 0.25 {
        if roots >= 64 {
            return Err(Error::NoConvergence {
                what: "inverse scaling and squaring",
                iterations: roots as usize,
            });
        }
        x = sqrtm_denman_beavers(&x)?;
        roots += 1;
    }
    let z = &(&x - &id) * &inverse(&(&x + &id))?;
    let z2 = &z * &z;
    let z_norm = z.spectral_norm_bound();
    let mut sum = z.clone();
    let mut power = z;
    let mut k = 1u32;
    loop {
        power = &power * &z2;
        let denom = (2 * k + 1) as f64;
        sum.axpy(C64::new(1.0 / denom, 0.0), &power);
        k += 1;
        if z_norm.powi(2 * k as i32 + 1) < 1e-18 || k > 200 {
            break;
        }
    }
    Ok(sum.scale_real(2.0 * 2f64.powi(roots as i32)))
}
