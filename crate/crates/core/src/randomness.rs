//! Reproducible random streams and the random objects built from them.
//!
//! An [`RngStream`] is a cheap descriptor `(seed, path)`. Its generator is a
//! ChaCha8 keyed by SHA-256 of the descriptor, so sub-streams can be derived
//! in any order on any thread and still produce the same bytes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{vector_norm, ComplexMatrix, DensityMatrix, C64};
use crate::measurements::Povm;

pub type StreamRng = ChaCha8Rng;

const UNITARY_TOL: f64 = 1e-9;
const POVM_RETRIES: usize = 10;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    seed: u64,
    path: Vec<u64>,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            path: Vec::new(),
        }
    }

    pub fn from_path(seed: u64, path: Vec<u64>) -> Self {
        Self { seed, path }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    /// The sub-stream at `self.path ++ [index]`.
    pub fn child(&self, index: u64) -> Self {
        let mut path = self.path.clone();
        path.push(index);
        Self {
            seed: self.seed,
            path,
        }
    }

    pub fn descend(&self, indices: &[u64]) -> Self {
        let mut path = self.path.clone();
        path.extend_from_slice(indices);
        Self {
            seed: self.seed,
            path,
        }
    }

    pub fn rng(&self) -> StreamRng {
        let mut h = Sha256::new();
        h.update(b"tomolab/stream");
        h.update(self.seed.to_le_bytes());
        h.update((self.path.len() as u64).to_le_bytes());
        for p in &self.path {
            h.update(p.to_le_bytes());
        }
        let key: [u8; 32] = h.finalize().into();
        ChaCha8Rng::from_seed(key)
    }
}

/// A unitary matrix, validated to ‖U†U − 𝟙‖_F ≤ 10⁻⁹ unless sampled.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Unitary {
    matrix: ComplexMatrix,
}

impl Unitary {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.rows(),
                found: matrix.cols(),
            });
        }
        let d = matrix.rows();
        let defect = (&matrix.adjoint().matmul(&matrix) - &ComplexMatrix::identity(d))
            .frobenius_norm();
        if defect > UNITARY_TOL {
            return Err(Error::NotUnitary(defect));
        }
        Ok(Self { matrix })
    }

    pub(crate) fn trusted(matrix: ComplexMatrix) -> Self {
        Self { matrix }
    }

    pub fn identity(d: usize) -> Self {
        Self::trusted(ComplexMatrix::identity(d))
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// U|j⟩.
    pub fn column(&self, j: usize) -> Vec<C64> {
        self.matrix.column(j)
    }

    pub fn adjoint(&self) -> Self {
        Self::trusted(self.matrix.adjoint())
    }

    /// The product `self · other`.
    pub fn compose(&self, other: &Self) -> Self {
        Self::trusted(self.matrix.matmul(&other.matrix))
    }

    /// U ⊕ 𝟙: `self` on the first coordinates, identity on the remaining
    /// `d − self.dim()`.
    pub fn embed(&self, d: usize) -> Result<Self> {
        let k = self.dim();
        if k > d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: k,
            });
        }
        let mut m = ComplexMatrix::identity(d);
        for i in 0..k {
            for j in 0..k {
                m[(i, j)] = self.matrix[(i, j)];
            }
        }
        Ok(Self::trusted(m))
    }

    /// U A U†.
    pub fn conjugate(&self, a: &ComplexMatrix) -> ComplexMatrix {
        a.conjugate_by(&self.matrix)
    }
}

impl<'de> Deserialize<'de> for Unitary {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let m = ComplexMatrix::deserialize(de)?;
        Unitary::new(m).map_err(serde::de::Error::custom)
    }
}

pub fn standard_complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Rows×cols matrix of i.i.d. standard complex Gaussians, E|z|² = 1.
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| standard_complex_normal(rng))
}

/// Haar-distributed d×d unitary.
///
/// QR of a Ginibre matrix, then each column of Q is multiplied by the phase
/// of the matching diagonal entry of R. Without that correction the result
/// depends on the QR convention and is not Haar.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Unitary {
    assert!(d >= 1, "haar_unitary needs d >= 1");
    let g = ginibre(d, d, rng);
    let (mut q, r) = g.qr();
    for j in 0..d {
        let rjj = r[(j, j)];
        let n = rjj.norm();
        let phase = if n > 0.0 { rjj / n } else { C64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    Unitary::trusted(q)
}

/// Uniformly random unit vector in C^d.
pub fn random_unit_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<C64> {
    loop {
        let v: Vec<C64> = (0..d).map(|_| standard_complex_normal(rng)).collect();
        let n = vector_norm(&v);
        if n > 1e-300 {
            return v.into_iter().map(|z| z / n).collect();
        }
    }
}

pub fn random_pure_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DensityMatrix {
    DensityMatrix::trusted(ComplexMatrix::outer(&random_unit_vector(d, rng)))
}

/// Hilbert–Schmidt random mixed state G G† / Tr(G G†).
pub fn random_density_matrix<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DensityMatrix {
    let g = ginibre(d, d, rng);
    let p = g.matmul(&g.adjoint()).hermitian_part();
    let tr = p.trace().re;
    DensityMatrix::trusted(p.scale(1.0 / tr))
}

/// Hermitian X with −𝟙 ⪯ X ⪯ 𝟙: Haar eigenbasis, eigenvalues uniform on [−1, 1].
pub fn random_hermitian_contraction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    let spectrum: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
    rotated_spectrum(&spectrum, rng)
}

/// Effect 0 ⪯ O ⪯ 𝟙: Haar eigenbasis, eigenvalues uniform on [0, 1].
pub fn random_effect<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    let spectrum: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..=1.0)).collect();
    rotated_spectrum(&spectrum, rng)
}

fn rotated_spectrum<R: Rng + ?Sized>(spectrum: &[f64], rng: &mut R) -> ComplexMatrix {
    let u = haar_unitary(spectrum.len(), rng);
    u.conjugate(&ComplexMatrix::from_real_diagonal(spectrum))
        .hermitian_part()
}

/// Random ℓ-outcome POVM with full-rank elements.
pub fn random_povm<R: Rng + ?Sized>(d: usize, ell: usize, rng: &mut R) -> Result<Povm> {
    random_povm_with_rank(d, ell, d, rng)
}

/// Random ℓ-outcome POVM whose elements have rank at most `k`.
///
/// Draws A_z = G_z G_z† with G_z a d×k Ginibre matrix, then normalises by
/// S^{−1/2} on both sides where S = Σ A_z. A singular S is redrawn up to ten
/// times.
pub fn random_povm_with_rank<R: Rng + ?Sized>(
    d: usize,
    ell: usize,
    k: usize,
    rng: &mut R,
) -> Result<Povm> {
    if d == 0 || ell == 0 || k == 0 || k > d {
        return Err(Error::InvalidParameter(format!(
            "random POVM needs d, ell >= 1 and 1 <= k <= d (d={d}, ell={ell}, k={k})"
        )));
    }
    if ell == 1 {
        return Povm::new(vec![ComplexMatrix::identity(d)]);
    }
    if ell * k < d {
        return Err(Error::InvalidParameter(format!(
            "{ell} elements of rank {k} cannot sum to the identity in dimension {d}"
        )));
    }
    for _ in 0..POVM_RETRIES {
        let parts: Vec<ComplexMatrix> = (0..ell)
            .map(|_| {
                let g = ginibre(d, k, rng);
                g.matmul(&g.adjoint())
            })
            .collect();
        let mut s = ComplexMatrix::zeros(d, d);
        for p in &parts {
            s += p;
        }
        let eig = s.eigh()?;
        let (lo, hi) = (eig.values[0], eig.values[d - 1]);
        if !(lo > 1e-12 * hi) {
            continue;
        }
        let inv_sqrt: Vec<f64> = eig.values.iter().map(|x| 1.0 / x.sqrt()).collect();
        let s_inv_half = eig.reconstruct_with(&inv_sqrt);
        let elements = parts
            .iter()
            .map(|p| s_inv_half.matmul(p).matmul(&s_inv_half).hermitian_part())
            .collect();
        return Povm::new(elements);
    }
    Err(Error::InvalidPovm(format!(
        "normalising matrix stayed singular after {POVM_RETRIES} draws"
    )))
}
