//! The chi-squared functional of the perturbed ensemble and the measurement
//! moment formulas it is built from.
//!
//! For a POVM {M_z} and ρ_{ε,U}, the outcome probabilities are
//! p_z = (2ε/d)·Tr(M_z U Q U†) + (1−ε)·w_z with Haar mean w_z = Tr(M_z)/d, so
//! F(M, U) = D_χ²(p ‖ w) = Σ_z ε²(2 Tr(M_z U Q U†)/d − w_z)² / w_z ∈ [0, ε²].

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, TOL_PSD};
use crate::measurements::Povm;
use crate::randomness::Unitary;

/// Checks 0 ⪯ M ⪯ 𝟙.
pub fn check_effect(m: &ComplexMatrix) -> Result<()> {
    if !m.is_hermitian(1e-9) {
        return Err(Error::NotHermitian(m.hermiticity_defect()));
    }
    let ev = m.eigvalsh()?;
    let (lo, hi) = (ev[0], ev[ev.len() - 1]);
    if lo < -TOL_PSD || hi > 1.0 + TOL_PSD {
        return Err(Error::InvalidParameter(format!(
            "operator spectrum [{lo:.3e}, {hi:.3e}] leaves [0, 1]"
        )));
    }
    Ok(())
}

fn check_even(d: usize) -> Result<()> {
    if d < 2 || d % 2 != 0 {
        return Err(Error::InvalidParameter(format!("dimension must be even, got {d}")));
    }
    Ok(())
}

/// F^{χ²}_{ε,d}(M, U).
pub fn f_chi2(eps: f64, d: usize, m: &Povm, u: &Unitary) -> Result<f64> {
    check_even(d)?;
    for found in [m.dim(), u.dim()] {
        if found != d {
            return Err(Error::DimensionMismatch { expected: d, found });
        }
    }
    let half: Vec<Vec<_>> = (0..d / 2).map(|k| u.column(k)).collect();
    let overlaps = m
        .elements()
        .iter()
        .map(|mz| half.iter().map(|v| mz.quadratic_form(v).re).sum());
    chi2_from_overlaps(eps, d, m, overlaps)
}

/// F^{χ²} given the rotated projector P = U Q_{d/2} U† directly.
pub fn f_chi2_from_projector(eps: f64, m: &Povm, projector: &ComplexMatrix) -> Result<f64> {
    let d = projector.rows();
    check_even(d)?;
    if m.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: m.dim(),
        });
    }
    let overlaps = m.elements().iter().map(|mz| mz.trace_product(projector).re);
    chi2_from_overlaps(eps, d, m, overlaps)
}

fn chi2_from_overlaps(
    eps: f64,
    d: usize,
    m: &Povm,
    overlaps: impl Iterator<Item = f64>,
) -> Result<f64> {
    let df = d as f64;
    let mut acc = 0.0;
    for (z, (mz, t)) in m.elements().iter().zip(overlaps).enumerate() {
        let w = mz.trace().re / df;
        if w <= 0.0 {
            let p = 2.0 * eps / df * t + (1.0 - eps) * w;
            if p > 1e-12 {
                return Err(Error::SupportViolation(z));
            }
            continue;
        }
        let dev = 2.0 * t / df - w;
        acc += eps * eps * dev * dev / w;
    }
    Ok(acc)
}

/// E_U F^{χ²} in closed form: ε²/(d(d²−1))·Σ_z (Tr M_z²/w_z − d·w_z).
pub fn exact_expected_f_chi2(eps: f64, m: &Povm) -> Result<f64> {
    let d = m.dim();
    check_even(d)?;
    let df = d as f64;
    let mut acc = 0.0;
    for mz in m.elements() {
        let w = mz.trace().re / df;
        if w > 0.0 {
            acc += mz.trace_product(mz).re / w - df * w;
        }
    }
    Ok(eps * eps * acc / (df * (df * df - 1.0)))
}

/// ε²/(d+1)·min{1, ℓ/(d−1)}.
pub fn expected_chi2_bound(eps: f64, d: usize, ell: usize) -> Result<f64> {
    if d < 2 || ell == 0 {
        return Err(Error::InvalidParameter(format!(
            "need d >= 2 and ell >= 1 (d={d}, ell={ell})"
        )));
    }
    let df = d as f64;
    Ok(eps * eps / (df + 1.0) * (ell as f64 / (df - 1.0)).min(1.0))
}

/// E_U Tr(M ρ_{ε,U})² = w² + ε²(Tr M² − d w²)/(d(d²−1)).
pub fn second_moment_exact(m: &ComplexMatrix, eps: f64, d: usize) -> Result<f64> {
    check_effect(m)?;
    let df = d as f64;
    let w = m.trace().re / df;
    let tr_m2 = m.trace_product(m).re;
    Ok(w * w + eps * eps * (tr_m2 - df * w * w) / (df * (df * df - 1.0)))
}

/// w²(1 + ε²/(d+1)·min{1, 1/(w(d−1))}).
pub fn second_moment_bound(m: &ComplexMatrix, eps: f64, d: usize) -> Result<f64> {
    check_effect(m)?;
    if m.rows() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: m.rows(),
        });
    }
    let df = d as f64;
    let w = m.trace().re / df;
    if w <= 0.0 {
        return Ok(0.0);
    }
    let factor = (1.0 / (w * (df - 1.0))).min(1.0);
    Ok(w * w * (1.0 + eps * eps / (df + 1.0) * factor))
}

fn check_rank_r(m: &ComplexMatrix, nu: f64, r: usize, d: usize) -> Result<()> {
    if r == 0 || 3 * r > d || !(0.0..=1.0).contains(&nu) {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= r <= d/3 and nu in [0, 1] (r={r}, d={d}, nu={nu})"
        )));
    }
    if m.rows() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: m.rows(),
        });
    }
    check_effect(m)
}

/// Tr(MΓ₁) and Tr(MΓ₀) with Γ₁ the first d−r coordinates.
fn block_traces(m: &ComplexMatrix, r: usize) -> (f64, f64) {
    let d = m.rows();
    let t1: f64 = (0..d - r).map(|i| m[(i, i)].re).sum();
    let t0: f64 = (d - r..d).map(|i| m[(i, i)].re).sum();
    (t1, t0)
}

/// E_U Tr(M σ_{ν,U}) = (1−ν)/r·Tr(MΓ₀) + ν/(d−r)·Tr(MΓ₁).
pub fn rank_r_first_moment(m: &ComplexMatrix, nu: f64, r: usize, d: usize) -> Result<f64> {
    check_rank_r(m, nu, r, d)?;
    let (t1, t0) = block_traces(m, r);
    Ok((1.0 - nu) / r as f64 * t0 + nu / (d - r) as f64 * t1)
}

/// Upper bound on E_U Tr(M σ_{ν,U})²:
/// w² + 2ν²/(d−r)⁴·(Tr MΓ₁)² + 3ν²/(r(d−r)²)·Tr((MΓ₁)²)
///    + 2ν(1−ν)/(r²(d−r))·Tr(MΓ₁MΓ₀).
pub fn rank_r_second_moment_bound(m: &ComplexMatrix, nu: f64, r: usize, d: usize) -> Result<f64> {
    let w = rank_r_first_moment(m, nu, r, d)?;
    let (t1, _) = block_traces(m, r);
    let k = d - r;
    // Tr((MΓ₁)²) = Σ_{i,j<k} |M_ij|²; Tr(MΓ₁MΓ₀) = Σ_{i<k, j≥k} |M_ij|².
    let mut sq11 = 0.0;
    let mut sq10 = 0.0;
    for i in 0..k {
        for j in 0..d {
            let a = m[(i, j)].norm_sqr();
            if j < k {
                sq11 += a;
            } else {
                sq10 += a;
            }
        }
    }
    let (rf, kf) = (r as f64, k as f64);
    Ok(w * w
        + 2.0 * nu * nu / kf.powi(4) * t1 * t1
        + 3.0 * nu * nu / (rf * kf * kf) * sq11
        + 2.0 * nu * (1.0 - nu) / (rf * rf * kf) * sq10)
}

/// Constants of the subexponential tail P[F > α + t] ≤ exp(−C d² t/ε²).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Chi2TailParams {
    pub c: f64,
    #[serde(rename = "C")]
    pub big_c: f64,
    pub alpha: f64,
    pub t: f64,
}

impl Chi2TailParams {
    pub const C_SMALL: f64 = 2.0;
    pub const C_BIG: f64 = 1.0 / 768.0;

    /// α = cε²/d, valid for any number of outcomes.
    pub fn arbitrary(eps: f64, d: usize, t: f64) -> Self {
        Self {
            c: Self::C_SMALL,
            big_c: Self::C_BIG,
            alpha: Self::C_SMALL * eps * eps / d as f64,
            t,
        }
    }

    /// α = 4ℓε²/(3d²) for ℓ-outcome measurements.
    pub fn with_outcomes(eps: f64, d: usize, ell: usize, t: f64) -> Self {
        let df = d as f64;
        Self {
            c: Self::C_SMALL,
            big_c: Self::C_BIG,
            alpha: 4.0 * ell as f64 * eps * eps / (3.0 * df * df),
            t,
        }
    }

    /// exp(−C d² t/ε²).
    pub fn tail_bound(&self, eps: f64, d: usize) -> f64 {
        let df = d as f64;
        (-self.big_c * df * df * self.t / (eps * eps)).exp()
    }

    pub fn threshold(&self) -> f64 {
        self.alpha + self.t
    }
}

/// α + ε² ln(3m)/(C d²): the level below which a Haar U is uninformative for
/// all m measurements with probability at least 2/3.
pub fn uninformative_threshold(eps: f64, d: usize, m: usize, ell: Option<usize>) -> f64 {
    let df = d as f64;
    let t = eps * eps * (3.0 * m as f64).ln() / (Chi2TailParams::C_BIG * df * df);
    match ell {
        Some(l) => Chi2TailParams::with_outcomes(eps, d, l, t).threshold(),
        None => Chi2TailParams::arbitrary(eps, d, t).threshold(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{perturbed_state, PerturbedParams};
    use crate::infotheory::{chi2_divergence, Pmf};
    use crate::measurements::outcome_distribution;
    use crate::randomness::{haar_unitary, random_povm, random_unit_vector, RngStream};

    #[test]
    fn coin_povm_is_uninformative() {
        let half = ComplexMatrix::identity(4).scale(0.5);
        let coin = Povm::new(vec![half.clone(), half]).unwrap();
        let mut rng = RngStream::new(1).rng();
        for _ in 0..5 {
            let u = haar_unitary(4, &mut rng);
            assert!(f_chi2(0.7, 4, &coin, &u).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn qubit_basis_measurement_saturates_sup_bound() {
        for eps in [0.1, 0.5, 0.9] {
            let f = f_chi2(eps, 2, &Povm::computational_basis(2), &Unitary::identity(2)).unwrap();
            assert!((f - eps * eps).abs() < 1e-15);
        }
    }

    #[test]
    fn f_chi2_matches_generic_divergence() {
        let mut rng = RngStream::new(2).rng();
        for _ in 0..20 {
            let m = random_povm(6, 4, &mut rng).unwrap();
            let u = haar_unitary(6, &mut rng);
            let rho = perturbed_state(&PerturbedParams::new(0.4, 6, u.clone()).unwrap());
            let p = Pmf::new(outcome_distribution(&m, &rho).unwrap().probs().to_vec()).unwrap();
            let w = Pmf::from_weights(
                &m.elements().iter().map(|e| e.trace().re / 6.0).collect::<Vec<_>>(),
            )
            .unwrap();
            let direct = chi2_divergence(&p, &w).unwrap();
            let fast = f_chi2(0.4, 6, &m, &u).unwrap();
            assert!((direct - fast).abs() < 1e-12);
            assert!(fast <= 0.16 + 1e-15);
            let proj = crate::ensembles::rotated_half_projector(&u);
            assert!((f_chi2_from_projector(0.4, &m, &proj).unwrap() - fast).abs() < 1e-12);
        }
    }

    #[test]
    fn f_chi2_rejects_support_violation_and_odd_dimension() {
        let zero = ComplexMatrix::zeros(2, 2);
        let m = Povm::new(vec![ComplexMatrix::identity(2), zero]).unwrap();
        assert!(f_chi2(0.5, 2, &m, &Unitary::identity(2)).is_ok());
        assert!(f_chi2(0.5, 3, &Povm::computational_basis(3), &Unitary::identity(3)).is_err());
    }

    #[test]
    fn exact_mean_equals_bound_for_rank_one_bases() {
        for d in [2, 4, 8] {
            let e = exact_expected_f_chi2(0.5, &Povm::computational_basis(d)).unwrap();
            assert!((e - 0.25 / (d as f64 + 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn bound_examples() {
        assert!((expected_chi2_bound(0.5, 4, 2).unwrap() - 1.0 / 30.0).abs() < 1e-15);
        let full = 0.09 / 9.0;
        for ell in [7, 8, 100] {
            assert!((expected_chi2_bound(0.3, 8, ell).unwrap() - full).abs() < 1e-15);
        }
        let mut last = 0.0;
        for ell in 1..20 {
            let b = expected_chi2_bound(0.3, 8, ell).unwrap();
            assert!(b >= last);
            last = b;
        }
    }

    #[test]
    fn second_moment_examples() {
        let id = ComplexMatrix::identity(4);
        assert!((second_moment_exact(&id, 0.5, 4).unwrap() - 1.0).abs() < 1e-15);
        assert!(second_moment_bound(&id, 0.5, 4).unwrap() >= 1.0);

        let half = id.scale(0.5);
        assert!((second_moment_exact(&half, 0.5, 4).unwrap() - 0.25).abs() < 1e-15);
        assert!(second_moment_bound(&half, 0.5, 4).unwrap() >= 0.25);

        let mut rng = RngStream::new(3).rng();
        for _ in 0..20 {
            let m = ComplexMatrix::outer(&random_unit_vector(6, &mut rng));
            assert!(second_moment_exact(&m, 0.3, 6).unwrap() <= second_moment_bound(&m, 0.3, 6).unwrap());
        }
        assert!(second_moment_bound(&id.scale(2.0), 0.5, 4).is_err());
    }

    #[test]
    fn rank_r_moment_examples() {
        let id = ComplexMatrix::identity(6);
        assert!((rank_r_first_moment(&id, 0.25, 2, 6).unwrap() - 1.0).abs() < 1e-15);
        assert!(rank_r_second_moment_bound(&id, 0.25, 2, 6).unwrap() >= 1.0);

        let (g0, g1) = crate::ensembles::gamma_projectors(6, 2).unwrap();
        assert!((rank_r_first_moment(g0.matrix(), 0.0, 2, 6).unwrap() - 1.0).abs() < 1e-15);
        assert!(rank_r_first_moment(g1.matrix(), 0.0, 2, 6).unwrap().abs() < 1e-15);
        assert!(rank_r_second_moment_bound(g0.matrix(), 0.0, 2, 6).unwrap() >= 1.0);
        assert!(rank_r_first_moment(&id, 0.25, 3, 6).is_err());
    }

    #[test]
    fn tail_constants() {
        let p = Chi2TailParams::arbitrary(0.5, 8, 0.1);
        assert_eq!(p.c, 2.0);
        assert_eq!(p.big_c, 1.0 / 768.0);
        assert!((p.alpha - 2.0 * 0.25 / 8.0).abs() < 1e-15);
        let q = Chi2TailParams::with_outcomes(0.5, 8, 2, 0.1);
        assert!((q.alpha - 4.0 * 2.0 * 0.25 / 192.0).abs() < 1e-15);
        // At desk scale the uninformative level exceeds the sup bound ε².
        assert!(uninformative_threshold(0.5, 8, 3, None) > 0.25);
    }
}
