//! Closed-form Haar integrals up to second order and their Monte Carlo
//! counterparts.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{swap_operator, ComplexMatrix, Projector, C64};
use crate::randomness::{haar_unitary, RngStream, StreamRng};

/// E U Π U† = (r/d)·𝟙.
pub fn haar_first_moment_exact(q: &Projector) -> ComplexMatrix {
    let d = q.dim();
    ComplexMatrix::identity(d).scale(q.rank() as f64 / d as f64)
}

/// E U^{⊗2}(Π₁⊗Π₂)U^{†⊗2} = r₁/(d(d²−1))·[(r₂d−1)𝟙 + (d−r₂)W] for
/// im Π₁ ⊆ im Π₂.
pub fn haar_second_moment_exact(p1: &Projector, p2: &Projector) -> Result<ComplexMatrix> {
    let d = p1.dim();
    if p2.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: p2.dim(),
        });
    }
    let contained = p2.matrix().matmul(p1.matrix()).max_abs_diff(p1.matrix());
    if contained > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "image of the first projector is not inside the second (defect {contained:.3e})"
        )));
    }
    let (r1, r2) = (p1.rank() as f64, p2.rank() as f64);
    if d == 1 {
        return Ok(ComplexMatrix::identity(1).scale(r1 * r2));
    }
    let df = d as f64;
    let pre = r1 / (df * (df * df - 1.0));
    let mut out = swap_operator(d).scale(pre * (df - r2));
    out.add_identity(pre * (r2 * df - 1.0));
    Ok(out)
}

/// E U|i⟩⟨j|U† = δ_ij·𝟙/d.
pub fn haar_outer_moment_exact(d: usize, i: usize, j: usize) -> Result<ComplexMatrix> {
    for idx in [i, j] {
        if idx >= d {
            return Err(Error::IndexOutOfRange { index: idx, limit: d });
        }
    }
    let c = if i == j { 1.0 / d as f64 } else { 0.0 };
    Ok(ComplexMatrix::identity(d).scale(c))
}

/// Entrywise sample mean and standard error of a matrix-valued estimator.
#[derive(Clone, Debug)]
pub struct MatrixEstimate {
    pub mean: ComplexMatrix,
    /// Larger of the real and imaginary standard errors, row-major.
    pub se: Vec<f64>,
    pub trials: usize,
}

impl MatrixEstimate {
    pub fn max_abs_error(&self, exact: &ComplexMatrix) -> f64 {
        self.mean.max_abs_diff(exact)
    }

    /// max |mean − exact| / se over entries with non-zero se.
    pub fn max_z_score(&self, exact: &ComplexMatrix) -> f64 {
        self.mean
            .data()
            .iter()
            .zip(exact.data())
            .zip(&self.se)
            .map(|((m, e), &s)| {
                let dev = (m - e).norm();
                if s > 0.0 {
                    dev / s
                } else if dev > 1e-12 {
                    f64::INFINITY
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }
}

const CHUNKS: u64 = 64;

/// Averages `sample` over `trials` draws. Work is split into a fixed number of
/// child streams so the result does not depend on the thread count.
pub fn monte_carlo_matrix<F>(
    rows: usize,
    cols: usize,
    trials: usize,
    stream: &RngStream,
    sample: F,
) -> MatrixEstimate
where
    F: Fn(&mut StreamRng, &mut [C64]) + Sync,
{
    let len = rows * cols;
    let parts: Vec<(Vec<C64>, Vec<f64>, Vec<f64>)> = (0..CHUNKS)
        .into_par_iter()
        .map(|c| {
            let count = trials / CHUNKS as usize + usize::from((c as usize) < trials % CHUNKS as usize);
            let mut rng = stream.child(c).rng();
            let mut sum = vec![C64::new(0.0, 0.0); len];
            let mut sq_re = vec![0.0; len];
            let mut sq_im = vec![0.0; len];
            let mut buf = vec![C64::new(0.0, 0.0); len];
            for _ in 0..count {
                sample(&mut rng, &mut buf);
                for k in 0..len {
                    let x = buf[k];
                    sum[k] += x;
                    sq_re[k] += x.re * x.re;
                    sq_im[k] += x.im * x.im;
                }
            }
            (sum, sq_re, sq_im)
        })
        .collect();
    let mut sum = vec![C64::new(0.0, 0.0); len];
    let mut sq_re = vec![0.0; len];
    let mut sq_im = vec![0.0; len];
    for (s, r, i) in parts {
        for k in 0..len {
            sum[k] += s[k];
            sq_re[k] += r[k];
            sq_im[k] += i[k];
        }
    }
    let n = trials as f64;
    let mean: Vec<C64> = sum.iter().map(|s| s / n).collect();
    let se = (0..len)
        .map(|k| {
            let var_re = (sq_re[k] / n - mean[k].re * mean[k].re).max(0.0) * n / (n - 1.0);
            let var_im = (sq_im[k] / n - mean[k].im * mean[k].im).max(0.0) * n / (n - 1.0);
            (var_re.max(var_im) / n).sqrt()
        })
        .collect();
    MatrixEstimate {
        mean: ComplexMatrix::new(rows, cols, mean).expect("finite sample mean"),
        se,
        trials,
    }
}

/// Monte Carlo estimate of E U Π U†.
pub fn haar_first_moment_monte_carlo(q: &Projector, trials: usize, stream: &RngStream) -> MatrixEstimate {
    let d = q.dim();
    monte_carlo_matrix(d, d, trials, stream, |rng, out| {
        let u = haar_unitary(d, rng);
        out.copy_from_slice(u.conjugate(q.matrix()).data());
    })
}

/// Monte Carlo estimate of E U^{⊗2}(Π₁⊗Π₂)U^{†⊗2} = E (UΠ₁U†)⊗(UΠ₂U†).
pub fn haar_second_moment_monte_carlo(
    p1: &Projector,
    p2: &Projector,
    trials: usize,
    stream: &RngStream,
) -> MatrixEstimate {
    let d = p1.dim();
    monte_carlo_matrix(d * d, d * d, trials, stream, |rng, out| {
        let u = haar_unitary(d, rng);
        let a = u.conjugate(p1.matrix());
        let b = u.conjugate(p2.matrix());
        kron_into(&a, &b, out);
    })
}

/// Monte Carlo estimate of E U|i⟩⟨j|U†.
pub fn haar_outer_moment_monte_carlo(
    d: usize,
    i: usize,
    j: usize,
    trials: usize,
    stream: &RngStream,
) -> MatrixEstimate {
    monte_carlo_matrix(d, d, trials, stream, |rng, out| {
        let u = haar_unitary(d, rng);
        let (ci, cj) = (u.column(i), u.column(j));
        for a in 0..d {
            for b in 0..d {
                out[a * d + b] = ci[a] * cj[b].conj();
            }
        }
    })
}

/// Monte Carlo estimates of the unbalanced moments E U and E U⊗U, both zero
/// under the Haar measure.
pub fn haar_odd_moments_monte_carlo(d: usize, trials: usize, stream: &RngStream) -> (MatrixEstimate, MatrixEstimate) {
    let first = monte_carlo_matrix(d, d, trials, &stream.child(0), |rng, out| {
        out.copy_from_slice(haar_unitary(d, rng).matrix().data());
    });
    let second = monte_carlo_matrix(d * d, d * d, trials, &stream.child(1), |rng, out| {
        let u = haar_unitary(d, rng);
        kron_into(u.matrix(), u.matrix(), out);
    });
    (first, second)
}

fn kron_into(a: &ComplexMatrix, b: &ComplexMatrix, out: &mut [C64]) {
    let (d1, d2) = (a.rows(), b.rows());
    let n = d1 * d2;
    for i in 0..d1 {
        for j in 0..d1 {
            let aij = a[(i, j)];
            for k in 0..d2 {
                let row = (i * d2 + k) * n + j * d2;
                let brow = b.row(k);
                for l in 0..d2 {
                    out[row + l] = aij * brow[l];
                }
            }
        }
    }
}
