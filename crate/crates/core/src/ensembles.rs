//! Hard-instance state families.
//!
//! - Perturbed maximally mixed states
//!   ρ_{ε,U} = (2ε/d)·U Q_{d/2} U† + (1−ε)·𝟙/d, with Q_{d/2} the projector onto
//!   the first d/2 coordinates.
//! - Rank-r states σ_{ν,U} = U·(1/r)Σᵢ|ψ_{ν,i}⟩⟨ψ_{ν,i}|·U†, where
//!   |ψ_{ν,i}⟩ = √(1−ν)|d−1−i⟩ + √ν|i⟩ (zero-based) and U acts on the first
//!   d−r coordinates only.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, DensityMatrix, Projector, C64};
use crate::randomness::Unitary;

#[derive(Clone, Debug, Serialize)]
pub struct PerturbedParams {
    eps: f64,
    d: usize,
    unitary: Unitary,
}

impl PerturbedParams {
    /// Requires even d and ε ∈ [0, 1]. ε = 0 gives the maximally mixed state.
    pub fn new(eps: f64, d: usize, unitary: Unitary) -> Result<Self> {
        if d < 2 || d % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "perturbed ensemble needs an even dimension, got {d}"
            )));
        }
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::InvalidParameter(format!("eps must lie in [0, 1], got {eps}")));
        }
        if unitary.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: unitary.dim(),
            });
        }
        Ok(Self { eps, d, unitary })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn unitary(&self) -> &Unitary {
        &self.unitary
    }
}

/// U Q_{d/2} U†, built from the first d/2 columns of U.
pub fn rotated_half_projector(u: &Unitary) -> ComplexMatrix {
    rotated_leading_projector(u, u.dim() / 2)
}

/// U Q_k U†.
pub fn rotated_leading_projector(u: &Unitary, k: usize) -> ComplexMatrix {
    let d = u.dim();
    let mut p = ComplexMatrix::zeros(d, d);
    for j in 0..k {
        p.add_scaled_outer(1.0, &u.column(j));
    }
    p
}

pub fn perturbed_state(p: &PerturbedParams) -> DensityMatrix {
    let d = p.d as f64;
    let mut m = rotated_half_projector(&p.unitary).scale(2.0 * p.eps / d);
    m.add_identity((1.0 - p.eps) / d);
    DensityMatrix::trusted(m.hermitian_part())
}

/// ρ_{ε,U} from its rotated projector P = U Q_{d/2} U†.
pub fn perturbed_from_projector(eps: f64, projector: &ComplexMatrix) -> ComplexMatrix {
    let d = projector.rows() as f64;
    let mut m = projector.scale(2.0 * eps / d);
    m.add_identity((1.0 - eps) / d);
    m
}

/// |ψ_{ν,i}⟩ = √(1−ν)|d−1−i⟩ + √ν|i⟩ with zero-based `i`, 3(i+1) ≤ d.
pub fn rank_r_pure_component(nu: f64, i: usize, d: usize) -> Result<Vec<C64>> {
    if 3 * (i + 1) > d {
        return Err(Error::IndexOutOfRange {
            index: i,
            limit: d / 3,
        });
    }
    if !(0.0..=1.0).contains(&nu) {
        return Err(Error::InvalidParameter(format!("nu must lie in [0, 1], got {nu}")));
    }
    let mut v = vec![C64::new(0.0, 0.0); d];
    v[d - 1 - i] = C64::new((1.0 - nu).sqrt(), 0.0);
    v[i] = C64::new(nu.sqrt(), 0.0);
    Ok(v)
}

#[derive(Clone, Debug, Serialize)]
pub struct RankRParams {
    nu: f64,
    r: usize,
    d: usize,
    /// Embedded d×d form: the Haar block on the first d−r coordinates,
    /// identity on the last r.
    unitary: Unitary,
}

impl RankRParams {
    /// `block` is the (d−r)-dimensional unitary; it is embedded as
    /// block ⊕ 𝟙_r.
    pub fn new(nu: f64, r: usize, d: usize, block: &Unitary) -> Result<Self> {
        if r == 0 || 3 * r > d {
            return Err(Error::InvalidParameter(format!(
                "rank-r ensemble needs 1 <= r <= d/3 (r={r}, d={d})"
            )));
        }
        if !(0.0..=1.0).contains(&nu) {
            return Err(Error::InvalidParameter(format!("nu must lie in [0, 1], got {nu}")));
        }
        if block.dim() != d - r {
            return Err(Error::DimensionMismatch {
                expected: d - r,
                found: block.dim(),
            });
        }
        Ok(Self {
            nu,
            r,
            d,
            unitary: block.embed(d)?,
        })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn unitary(&self) -> &Unitary {
        &self.unitary
    }
}

pub fn rank_r_state(p: &RankRParams) -> Result<DensityMatrix> {
    let mut m = ComplexMatrix::zeros(p.d, p.d);
    for i in 0..p.r {
        let psi = rank_r_pure_component(p.nu, i, p.d)?;
        m.add_scaled_outer(1.0 / p.r as f64, &p.unitary.matrix().mul_vec(&psi));
    }
    Ok(DensityMatrix::trusted(m.hermitian_part()))
}

/// (Γ₀, Γ₁): Γ₁ projects onto the first d−r coordinates, Γ₀ = 𝟙 − Γ₁.
pub fn gamma_projectors(d: usize, r: usize) -> Result<(Projector, Projector)> {
    if r == 0 || r >= d {
        return Err(Error::InvalidParameter(format!("need 1 <= r < d (r={r}, d={d})")));
    }
    let gamma1 = Projector::leading(d, d - r)?;
    Ok((gamma1.complement(), gamma1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::trace_distance;
    use crate::randomness::{haar_unitary, RngStream};

    #[test]
    fn perturbed_state_with_identity_rotation() {
        let p = PerturbedParams::new(0.5, 4, Unitary::identity(4)).unwrap();
        let rho = perturbed_state(&p);
        let expect = ComplexMatrix::from_real_diagonal(&[0.375, 0.375, 0.125, 0.125]);
        assert!(rho.matrix().max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn perturbed_state_distance_to_mixed_is_eps() {
        let mut rng = RngStream::new(1).rng();
        for (d, eps) in [(2, 0.3), (6, 0.9), (8, 0.05)] {
            let u = haar_unitary(d, &mut rng);
            let rho = perturbed_state(&PerturbedParams::new(eps, d, u).unwrap());
            let dist = trace_distance(&rho, &DensityMatrix::maximally_mixed(d)).unwrap();
            assert!((dist - eps).abs() < 1e-9);
        }
    }

    #[test]
    fn perturbed_state_vanishing_eps_is_mixed() {
        let mut rng = RngStream::new(2).rng();
        let u = haar_unitary(4, &mut rng);
        let rho = perturbed_state(&PerturbedParams::new(0.0, 4, u).unwrap());
        assert!(rho.matrix().max_abs_diff(DensityMatrix::maximally_mixed(4).matrix()) < 1e-15);
    }

    #[test]
    fn perturbed_params_reject_odd_dimension() {
        assert!(PerturbedParams::new(0.5, 3, Unitary::identity(3)).is_err());
        assert!(PerturbedParams::new(1.5, 4, Unitary::identity(4)).is_err());
        assert!(PerturbedParams::new(0.5, 4, Unitary::identity(2)).is_err());
    }

    #[test]
    fn pure_component_examples() {
        let v = rank_r_pure_component(0.0, 0, 6).unwrap();
        assert_eq!(v[5], C64::new(1.0, 0.0));
        assert!(v[..5].iter().all(|z| z.norm() == 0.0));

        let v = rank_r_pure_component(1.0, 1, 6).unwrap();
        assert_eq!(v[1], C64::new(1.0, 0.0));
        assert_eq!(v.iter().map(|z| z.norm_sqr()).sum::<f64>(), 1.0);

        // ν = 1/4, first component, d = 4: (√ν, 0, 0, √(1−ν)).
        let v = rank_r_pure_component(0.25, 0, 4).unwrap();
        let expect = [0.5, 0.0, 0.0, 0.75f64.sqrt()];
        for (z, e) in v.iter().zip(expect) {
            assert!((z - C64::new(e, 0.0)).norm() < 1e-15);
        }
        assert!(rank_r_pure_component(0.5, 1, 4).is_err());
    }

    #[test]
    fn rank_r_state_examples() {
        let mut rng = RngStream::new(3).rng();
        let (d, r) = (9, 3);
        let block = haar_unitary(d - r, &mut rng);
        let s = rank_r_state(&RankRParams::new(0.0, r, d, &block).unwrap()).unwrap();
        let expect = ComplexMatrix::from_real_diagonal(&[0., 0., 0., 0., 0., 0., 1. / 3., 1. / 3., 1. / 3.]);
        assert!(s.matrix().max_abs_diff(&expect) < 1e-15);

        let s = rank_r_state(&RankRParams::new(0.25, 1, 4, &Unitary::identity(3)).unwrap()).unwrap();
        let psi = rank_r_pure_component(0.25, 0, 4).unwrap();
        assert!(s.matrix().max_abs_diff(&ComplexMatrix::outer(&psi)) < 1e-15);

        let (_, gamma1) = gamma_projectors(d, r).unwrap();
        for _ in 0..10 {
            let block = haar_unitary(d - r, &mut rng);
            let s = rank_r_state(&RankRParams::new(0.3, r, d, &block).unwrap()).unwrap();
            assert!((s.expectation(gamma1.matrix()) - 0.3).abs() < 1e-12);
            let ev = s.matrix().eigvalsh().unwrap();
            assert_eq!(ev.iter().filter(|&&x| x > 1e-10).count(), r);
            assert!((s.matrix().trace().re - 1.0).abs() < 1e-12);
        }
        assert!(RankRParams::new(0.3, 4, 9, &haar_unitary(5, &mut rng)).is_err());
    }

    #[test]
    fn gamma_projector_examples() {
        let (g0, g1) = gamma_projectors(4, 1).unwrap();
        assert_eq!(*g1.matrix(), ComplexMatrix::from_real_diagonal(&[1., 1., 1., 0.]));
        assert_eq!(*g0.matrix(), ComplexMatrix::from_real_diagonal(&[0., 0., 0., 1.]));
        assert_eq!(&g0.matrix().clone() + g1.matrix(), ComplexMatrix::identity(4));
        assert_eq!(g0.matrix().matmul(g1.matrix()), ComplexMatrix::zeros(4, 4));
        let (_, g1) = gamma_projectors(6, 2).unwrap();
        assert_eq!(g1.rank(), 4);
    }
}
