//! Dense complex linear algebra.
//!
//! [`ComplexMatrix`] is a small row-major matrix type with the handful of
//! kernels the rest of the crate needs. Hermitian eigendecomposition is
//! delegated to `nalgebra`; everything else is written out directly because
//! the matrices are tiny (d ≤ 64) and the hot loops care about allocations.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Relative tolerance for Hermiticity and unit trace.
pub const TOL_HERM: f64 = 1e-9;
/// Relative tolerance for unit trace.
pub const TOL_TRACE: f64 = 1e-9;
/// Absolute tolerance on negative eigenvalues.
pub const TOL_PSD: f64 = 1e-9;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries, rejecting NaN and infinities.
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::BadShape {
                rows,
                cols,
                len: data.len(),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d, d);
        for i in 0..d {
            m.data[i * d + i] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = diag.len();
        let mut m = Self::zeros(d, d);
        for (i, &x) in diag.iter().enumerate() {
            m.data[i * d + i] = C64::new(x, 0.0);
        }
        m
    }

    /// Builds a real matrix from nested rows.
    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let data: Vec<C64> = rows
            .iter()
            .flat_map(|row| row.iter().map(|&x| C64::new(x, 0.0)))
            .collect();
        Self::new(r, c, data)
    }

    /// The rank-one operator |v⟩⟨v|.
    pub fn outer(v: &[C64]) -> Self {
        let d = v.len();
        let mut m = Self::zeros(d, d);
        m.add_scaled_outer(1.0, v);
        m
    }

    /// Builds the matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<C64>]) -> Self {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        Self::from_fn(rows, cols, |i, j| columns[j][i])
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

    /// Side length of a square matrix.
    pub fn dim(&self) -> usize {
        debug_assert!(self.is_square());
        self.rows
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    pub fn scale_complex(&self, c: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        assert!(self.is_square(), "trace of a non-square matrix");
        (0..self.rows).map(|i| self.data[i * self.cols + i]).sum()
    }

    /// Tr(AB) without forming the product.
    pub fn trace_product(&self, other: &Self) -> C64 {
        assert!(
            self.cols == other.rows && self.rows == other.cols,
            "trace_product shape mismatch"
        );
        let mut acc = ZERO;
        for i in 0..self.rows {
            for k in 0..self.cols {
                acc += self.data[i * self.cols + k] * other.data[k * other.cols + i];
            }
        }
        acc
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(C64::norm_sqr).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let (n, m) = (self.rows, other.cols);
        let mut out = vec![ZERO; n * m];
        for i in 0..n {
            let out_row = &mut out[i * m..(i + 1) * m];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let b_row = &other.data[k * m..(k + 1) * m];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Self {
            rows: n,
            cols: m,
            data: out,
        }
    }

    /// A·B·A†, the conjugation used for every unitary rotation.
    pub fn conjugate_by(&self, a: &Self) -> Self {
        a.matmul(self).matmul(&a.adjoint())
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "mul_vec shape mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// ⟨v|A|v⟩.
    pub fn quadratic_form(&self, v: &[C64]) -> C64 {
        assert!(self.is_square() && v.len() == self.rows);
        let mut acc = ZERO;
        for (i, vi) in v.iter().enumerate() {
            let row_sum: C64 = self.row(i).iter().zip(v).map(|(a, b)| a * b).sum();
            acc += vi.conj() * row_sum;
        }
        acc
    }

    /// In-place A += c·|v⟩⟨v|.
    pub fn add_scaled_outer(&mut self, c: f64, v: &[C64]) {
        assert!(self.is_square() && v.len() == self.rows);
        let d = self.rows;
        for i in 0..d {
            let vi = v[i] * c;
            let row = &mut self.data[i * d..(i + 1) * d];
            for (x, vj) in row.iter_mut().zip(v) {
                *x += vi * vj.conj();
            }
        }
    }

    /// In-place A += c·𝟙.
    pub fn add_identity(&mut self, c: f64) {
        assert!(self.is_square());
        let d = self.rows;
        for i in 0..d {
            self.data[i * d + i] += c;
        }
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (r1, c1, r2, c2) = (self.rows, self.cols, other.rows, other.cols);
        Self::from_fn(r1 * r2, c1 * c2, |i, j| {
            self[(i / r2, j / c2)] * other[(i % r2, j % c2)]
        })
    }

    /// (A + A†)/2.
    pub fn hermitian_part(&self) -> Self {
        assert!(self.is_square());
        Self::from_fn(self.rows, self.cols, |i, j| {
            (self[(i, j)] + self[(j, i)].conj()) * 0.5
        })
    }

    /// ‖A − A†‖_F.
    pub fn hermiticity_defect(&self) -> f64 {
        assert!(self.is_square());
        let d = self.rows;
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += (self[(i, j)] - self[(j, i)].conj()).norm_sqr();
            }
        }
        acc.sqrt()
    }

    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        self.is_square()
            && self.hermiticity_defect() <= rel_tol * self.frobenius_norm().max(1.0)
    }

    /// Spectral decomposition of the Hermitian part, eigenvalues ascending.
    pub fn eigh(&self) -> Result<HermitianEigen> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: self.cols,
            });
        }
        let d = self.rows;
        let m = DMatrix::from_fn(d, d, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5);
        let eig = SymmetricEigen::try_new(m, f64::EPSILON, 1000 * d.max(10))
            .ok_or(Error::EigenFailed)?;
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = Self::from_fn(d, d, |i, j| eig.eigenvectors[(i, order[j])]);
        Ok(HermitianEigen { values, vectors })
    }

    /// Ascending eigenvalues of the Hermitian part.
    pub fn eigvalsh(&self) -> Result<Vec<f64>> {
        Ok(self.eigh()?.values)
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> Result<f64> {
        let gram = self.adjoint().matmul(self);
        let top = gram.eigvalsh()?.last().copied().unwrap_or(0.0);
        Ok(top.max(0.0).sqrt())
    }

    /// Applies `f` to the spectrum of the Hermitian part.
    pub fn hermitian_function(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let eig = self.eigh()?;
        let mapped: Vec<f64> = eig.values.iter().map(|&x| f(x)).collect();
        Ok(eig.reconstruct_with(&mapped))
    }

    /// Householder QR of a matrix with at least as many rows as columns.
    ///
    /// Returns the thin factors (Q, R) with Q having orthonormal columns and
    /// R upper triangular. The diagonal of R carries arbitrary phases.
    pub fn qr(&self) -> (Self, Self) {
        let (m, n) = (self.rows, self.cols);
        assert!(m >= n, "qr needs rows >= cols");
        // Column-major working copy; columns are the natural unit here.
        let mut a = vec![ZERO; m * n];
        for i in 0..m {
            for j in 0..n {
                a[j * m + i] = self.data[i * n + j];
            }
        }
        let mut reflectors: Vec<Vec<C64>> = Vec::with_capacity(n);
        let mut r = Self::zeros(n, n);
        for k in 0..n {
            let x = &a[k * m + k..(k + 1) * m];
            let norm = x.iter().map(C64::norm_sqr).sum::<f64>().sqrt();
            let phase = if x[0].norm() > 0.0 {
                x[0] / x[0].norm()
            } else {
                ONE
            };
            let alpha = -phase * norm;
            let mut v: Vec<C64> = x.to_vec();
            v[0] -= alpha;
            let vnorm2: f64 = v.iter().map(C64::norm_sqr).sum();
            if vnorm2 > 0.0 {
                let inv = 1.0 / vnorm2.sqrt();
                v.iter_mut().for_each(|z| *z *= inv);
                for c in k..n {
                    let col = &mut a[c * m + k..(c + 1) * m];
                    let s: C64 = v.iter().zip(col.iter()).map(|(vi, ci)| vi.conj() * ci).sum();
                    for (ci, vi) in col.iter_mut().zip(&v) {
                        *ci -= 2.0 * s * vi;
                    }
                }
            } else {
                v.iter_mut().for_each(|z| *z = ZERO);
            }
            for c in k..n {
                r.data[k * n + c] = a[c * m + k];
            }
            reflectors.push(v);
        }
        // Q = H_0 H_1 ... H_{n-1} applied to the first n unit vectors.
        let mut q = vec![ZERO; m * n];
        for c in 0..n {
            q[c * m + c] = ONE;
        }
        for k in (0..n).rev() {
            let v = &reflectors[k];
            for c in 0..n {
                let col = &mut q[c * m + k..(c + 1) * m];
                let s: C64 = v.iter().zip(col.iter()).map(|(vi, ci)| vi.conj() * ci).sum();
                if s != ZERO {
                    for (ci, vi) in col.iter_mut().zip(v) {
                        *ci -= 2.0 * s * vi;
                    }
                }
            }
        }
        let q = Self::from_fn(m, n, |i, j| q[j * m + i]);
        (q, r)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
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
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
        self.data.iter_mut().zip(&rhs.data).for_each(|(a, b)| *a += b);
    }
}

impl SubAssign<&ComplexMatrix> for ComplexMatrix {
    fn sub_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
        self.data.iter_mut().zip(&rhs.data).for_each(|(a, b)| *a -= b);
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale(-1.0)
    }
}

/// Wire format shared by the CLI: `{"d": rows, "re": [[..]], "im": [[..]]}`.
#[derive(Serialize, Deserialize)]
struct MatrixJson {
    d: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl Serialize for ComplexMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let part = |f: fn(&C64) -> f64| -> Vec<Vec<f64>> {
            (0..self.rows).map(|i| self.row(i).iter().map(f).collect()).collect()
        };
        MatrixJson {
            d: self.rows,
            re: part(|z| z.re),
            im: part(|z| z.im),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = MatrixJson::deserialize(de)?;
        let rows = raw.re.len();
        let cols = raw.re.first().map_or(0, Vec::len);
        if rows != raw.d || raw.im.len() != rows {
            return Err(D::Error::custom("row count disagrees with d"));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for (re, im) in raw.re.iter().zip(&raw.im) {
            if re.len() != cols || im.len() != cols {
                return Err(D::Error::custom("ragged matrix rows"));
            }
            data.extend(re.iter().zip(im).map(|(&a, &b)| C64::new(a, b)));
        }
        ComplexMatrix::new(rows, cols, data).map_err(D::Error::custom)
    }
}

#[derive(Clone, Debug)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Eigenvectors as columns, matching `values`.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    /// V·diag(values)·V†.
    pub fn reconstruct(&self) -> ComplexMatrix {
        self.reconstruct_with(&self.values)
    }

    pub fn reconstruct_with(&self, values: &[f64]) -> ComplexMatrix {
        let d = self.vectors.rows();
        let mut out = ComplexMatrix::zeros(d, d);
        for (k, &lam) in values.iter().enumerate() {
            if lam != 0.0 {
                out.add_scaled_outer(lam, &self.vectors.column(k));
            }
        }
        out
    }
}

pub fn inner(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn vector_norm(v: &[C64]) -> f64 {
    v.iter().map(C64::norm_sqr).sum::<f64>().sqrt()
}

pub fn basis_vector(d: usize, i: usize) -> Vec<C64> {
    let mut v = vec![ZERO; d];
    v[i] = ONE;
    v
}

pub fn frobenius_norm(a: &ComplexMatrix) -> f64 {
    a.frobenius_norm()
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn trace_norm(h: &ComplexMatrix) -> Result<f64> {
    Ok(h.eigvalsh()?.iter().map(|x| x.abs()).sum())
}

/// ‖a − b‖₁ for two states of equal dimension.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    trace_norm(&(a.matrix() - b.matrix()))
}

/// The d²×d² operator exchanging the two tensor factors.
pub fn swap_operator(d: usize) -> ComplexMatrix {
    let mut w = ComplexMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            w[(i * d + j, j * d + i)] = ONE;
        }
    }
    w
}

/// Tr₂ of an operator on C^{d1} ⊗ C^{d2}.
pub fn partial_trace_second(ab: &ComplexMatrix, d1: usize, d2: usize) -> Result<ComplexMatrix> {
    let n = d1 * d2;
    if !ab.is_square() || ab.rows() != n || n == 0 {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: ab.rows(),
        });
    }
    Ok(ComplexMatrix::from_fn(d1, d1, |i, j| {
        (0..d2).map(|k| ab[(i * d2 + k, j * d2 + k)]).sum()
    }))
}

/// Clips negative eigenvalues to zero and renormalises to unit trace.
pub fn project_to_density(h: &ComplexMatrix) -> Result<DensityMatrix> {
    if !h.is_hermitian(TOL_HERM) {
        return Err(Error::NotHermitian(h.hermiticity_defect()));
    }
    let eig = h.eigh()?;
    let clipped: Vec<f64> = eig.values.iter().map(|&x| x.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroAfterClipping);
    }
    let normalised: Vec<f64> = clipped.iter().map(|x| x / total).collect();
    Ok(DensityMatrix::trusted(
        eig.reconstruct_with(&normalised).hermitian_part(),
    ))
}

/// A validated quantum state: Hermitian, PSD, unit trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.rows(),
                found: matrix.cols(),
            });
        }
        if !matrix.is_hermitian(TOL_HERM) {
            return Err(Error::NotHermitian(matrix.hermiticity_defect()));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TOL_TRACE || tr.im.abs() > TOL_TRACE {
            return Err(Error::NotUnitTrace(tr.re));
        }
        let min = matrix.eigvalsh()?[0];
        if min < -TOL_PSD {
            return Err(Error::NotPsd(min));
        }
        Ok(Self { matrix })
    }

    /// Skips validation for states that are correct by construction.
    pub(crate) fn trusted(matrix: ComplexMatrix) -> Self {
        debug_assert!(matrix.is_square());
        Self { matrix }
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self::trusted(ComplexMatrix::identity(d).scale(1.0 / d as f64))
    }

    /// |v⟩⟨v| for a normalised copy of `v`.
    pub fn pure(v: &[C64]) -> Result<Self> {
        let n = vector_norm(v);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidParameter("zero or non-finite state vector".into()));
        }
        let unit: Vec<C64> = v.iter().map(|z| z / n).collect();
        Ok(Self::trusted(ComplexMatrix::outer(&unit)))
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    /// Tr ρ².
    pub fn purity(&self) -> f64 {
        self.matrix.trace_product(&self.matrix).re
    }

    /// Tr(Oρ), real part.
    pub fn expectation(&self, o: &ComplexMatrix) -> f64 {
        o.trace_product(&self.matrix).re
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let m = ComplexMatrix::deserialize(de)?;
        DensityMatrix::new(m).map_err(serde::de::Error::custom)
    }
}

/// An orthogonal projector with its rank.
#[derive(Clone, Debug, PartialEq)]
pub struct Projector {
    rank: usize,
    matrix: ComplexMatrix,
}

impl Projector {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_hermitian(TOL_HERM) {
            return Err(Error::NotProjector("not Hermitian".into()));
        }
        let scale = matrix.frobenius_norm().max(1.0);
        let defect = (&matrix.matmul(&matrix) - &matrix).frobenius_norm();
        if defect > 1e-9 * scale {
            return Err(Error::NotProjector(format!("‖P²−P‖_F = {defect:.3e}")));
        }
        let tr = matrix.trace().re;
        let rank = tr.round();
        if (tr - rank).abs() > 1e-9 * scale {
            return Err(Error::NotProjector(format!("non-integer trace {tr}")));
        }
        Ok(Self {
            rank: rank as usize,
            matrix,
        })
    }

    /// Projector onto the span of the listed standard basis vectors.
    pub fn onto_coordinates(d: usize, coords: &[usize]) -> Result<Self> {
        let mut m = ComplexMatrix::zeros(d, d);
        for &c in coords {
            if c >= d {
                return Err(Error::IndexOutOfRange { index: c, limit: d });
            }
            m[(c, c)] = ONE;
        }
        Self::new(m)
    }

    /// Q_k: projector onto the first k coordinates.
    pub fn leading(d: usize, k: usize) -> Result<Self> {
        Self::onto_coordinates(d, &(0..k).collect::<Vec<_>>())
    }

    /// Projector onto the span of orthonormal columns.
    pub fn from_orthonormal_columns(columns: &[Vec<C64>]) -> Result<Self> {
        let d = columns.first().map_or(0, Vec::len);
        let mut m = ComplexMatrix::zeros(d, d);
        for c in columns {
            m.add_scaled_outer(1.0, c);
        }
        Self::new(m)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// 𝟙 − P.
    pub fn complement(&self) -> Self {
        let d = self.dim();
        Self {
            rank: d - self.rank,
            matrix: &ComplexMatrix::identity(d) - &self.matrix,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_matrix(d: usize, rng: &mut impl Rng) -> ComplexMatrix {
        ComplexMatrix::from_fn(d, d, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn random_state(d: usize, rng: &mut impl Rng) -> DensityMatrix {
        let g = random_matrix(d, rng);
        let p = g.matmul(&g.adjoint());
        let tr = p.trace().re;
        DensityMatrix::new(p.scale(1.0 / tr)).unwrap()
    }

    #[test]
    fn rejects_non_finite_and_bad_shape() {
        assert!(matches!(
            ComplexMatrix::new(1, 1, vec![c(f64::NAN, 0.0)]),
            Err(Error::NonFinite)
        ));
        assert!(matches!(
            ComplexMatrix::new(2, 2, vec![ONE; 3]),
            Err(Error::BadShape { .. })
        ));
    }

    #[test]
    fn trace_distance_identity_and_orthogonal_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random_state(3, &mut rng);
        assert!(trace_distance(&rho, &rho).unwrap().abs() < 1e-12);

        let zero = DensityMatrix::pure(&basis_vector(2, 0)).unwrap();
        let one = DensityMatrix::pure(&basis_vector(2, 1)).unwrap();
        assert!((trace_distance(&zero, &one).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn trace_distance_rejects_mixed_dimensions() {
        let a = DensityMatrix::maximally_mixed(2);
        let b = DensityMatrix::maximally_mixed(3);
        assert!(matches!(
            trace_distance(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn frobenius_norm_examples() {
        for d in [1, 2, 5] {
            let n = frobenius_norm(&ComplexMatrix::identity(d));
            assert!((n - (d as f64).sqrt()).abs() < 1e-14);
        }
        assert_eq!(frobenius_norm(&ComplexMatrix::zeros(3, 3)), 0.0);
    }

    #[test]
    fn swap_operator_small_cases() {
        assert_eq!(swap_operator(1), ComplexMatrix::identity(1));
        let w = swap_operator(2);
        // Basis order |00>, |01>, |10>, |11>.
        let expected = ComplexMatrix::from_real_rows(&[
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert_eq!(w, expected);
        assert_eq!(w.matmul(&w), ComplexMatrix::identity(4));
    }

    #[test]
    fn swap_trick_on_random_3x3() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_matrix(3, &mut rng);
        let y = random_matrix(3, &mut rng);
        let lhs = swap_operator(3).matmul(&x.kron(&y)).trace();
        // Direct sum over indices: Σ_ij X_ij Y_ji.
        let mut rhs = ZERO;
        for i in 0..3 {
            for j in 0..3 {
                rhs += x[(i, j)] * y[(j, i)];
            }
        }
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn partial_trace_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(3, &mut rng);
        let pt = partial_trace_second(&a.kron(&ComplexMatrix::identity(4)), 3, 4).unwrap();
        assert!(pt.max_abs_diff(&a.scale(4.0)) < 1e-12);

        let rho = random_state(3, &mut rng);
        let w1 = swap_operator(3).matmul(&ComplexMatrix::identity(3).kron(rho.matrix()));
        let pt = partial_trace_second(&w1, 3, 3).unwrap();
        assert!(pt.max_abs_diff(rho.matrix()) < 1e-12);
    }

    #[test]
    fn partial_trace_matches_index_contraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_matrix(4, &mut rng);
        let pt = partial_trace_second(&m, 2, 2).unwrap();
        // Reshape to T[a][b][c][e] with row = (a,b), col = (c,e), contract b = e.
        let mut t = [[[[ZERO; 2]; 2]; 2]; 2];
        for (a, ta) in t.iter_mut().enumerate() {
            for (b, tb) in ta.iter_mut().enumerate() {
                for (cc, tc) in tb.iter_mut().enumerate() {
                    for (e, te) in tc.iter_mut().enumerate() {
                        *te = m[(2 * a + b, 2 * cc + e)];
                    }
                }
            }
        }
        for a in 0..2 {
            for cc in 0..2 {
                let expect = t[a][0][cc][0] + t[a][1][cc][1];
                assert!((pt[(a, cc)] - expect).norm() < 1e-14);
            }
        }
        assert!((pt.trace() - m.trace()).norm() < 1e-12);
        assert!(partial_trace_second(&m, 3, 2).is_err());
    }

    #[test]
    fn project_to_density_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = random_state(4, &mut rng);
        let back = project_to_density(rho.matrix()).unwrap();
        assert!(back.matrix().max_abs_diff(rho.matrix()) < 1e-12);

        let p = project_to_density(&ComplexMatrix::from_real_diagonal(&[1.5, -0.5])).unwrap();
        assert!(p.matrix().max_abs_diff(&ComplexMatrix::from_real_diagonal(&[1.0, 0.0])) < 1e-14);

        let p = project_to_density(&ComplexMatrix::from_real_diagonal(&[2.0, 2.0])).unwrap();
        assert!(p.matrix().max_abs_diff(&ComplexMatrix::from_real_diagonal(&[0.5, 0.5])) < 1e-14);

        assert!(matches!(
            project_to_density(&ComplexMatrix::from_real_diagonal(&[-1.0, 0.0])),
            Err(Error::ZeroAfterClipping)
        ));
    }

    #[test]
    fn density_matrix_validation() {
        let not_herm = ComplexMatrix::new(2, 2, vec![c(0.5, 0.0), ONE, ZERO, c(0.5, 0.0)]).unwrap();
        assert!(matches!(DensityMatrix::new(not_herm), Err(Error::NotHermitian(_))));
        let bad_trace = ComplexMatrix::from_real_diagonal(&[0.5, 0.6]);
        assert!(matches!(DensityMatrix::new(bad_trace), Err(Error::NotUnitTrace(_))));
        let negative = ComplexMatrix::from_real_diagonal(&[1.5, -0.5]);
        assert!(matches!(DensityMatrix::new(negative), Err(Error::NotPsd(_))));
    }

    #[test]
    fn eigh_reconstructs_up_to_dimension_64() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for d in [1, 2, 7, 16, 33, 64] {
            let a = random_matrix(d, &mut rng).hermitian_part();
            let eig = a.eigh().unwrap();
            let err = (&eig.reconstruct() - &a).frobenius_norm();
            assert!(err <= 1e-10 * a.frobenius_norm(), "d={d} err={err}");
            assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn qr_factors_reconstruct() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_matrix(6, &mut rng);
        let (q, r) = a.qr();
        assert!(q.matmul(&r).max_abs_diff(&a) < 1e-12);
        assert!(q.adjoint().matmul(&q).max_abs_diff(&ComplexMatrix::identity(6)) < 1e-12);
        for i in 0..6 {
            for j in 0..i {
                assert!(r[(i, j)].norm() < 1e-14);
            }
        }
    }

    #[test]
    fn projector_validation() {
        let p = Projector::leading(4, 2).unwrap();
        assert_eq!(p.rank(), 2);
        assert_eq!(p.complement().rank(), 2);
        let not_idempotent = ComplexMatrix::from_real_diagonal(&[0.5, 1.0]);
        assert!(Projector::new(not_idempotent).is_err());
    }

    #[test]
    fn matrix_json_round_trip() {
        let m = ComplexMatrix::new(2, 2, vec![c(1.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(2.0, 0.0)])
            .unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"d":2,"re":[[1.0,0.0],[0.0,2.0]],"im":[[0.0,-1.0],[1.0,0.0]]}"#);
        let back: ComplexMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<ComplexMatrix>(r#"{"d":3,"re":[[1.0]],"im":[[0.0]]}"#).is_err());
    }
}
