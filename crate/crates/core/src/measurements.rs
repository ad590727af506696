//! POVMs, outcome distributions and the single-copy measurement model.
//!
//! Every copy of the unknown state is measured once and discarded. Outcomes
//! are plain indices; the ±1 values of Pauli measurements are attached by the
//! estimators.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, DensityMatrix, C64, TOL_PSD};
use crate::randomness::{RngStream, StreamRng, Unitary};

const COMPLETENESS_TOL: f64 = 1e-8;
const PMF_SUM_TOL: f64 = 1e-9;
const CLAMP_LIMIT: f64 = 1e-10;
const MAX_PAULI_QUBITS: usize = 6;

/// A finite list of PSD operators summing to the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    dim: usize,
    elements: Vec<ComplexMatrix>,
}

impl Povm {
    pub fn new(elements: Vec<ComplexMatrix>) -> Result<Self> {
        let first = elements
            .first()
            .ok_or_else(|| Error::InvalidPovm("no elements".into()))?;
        let d = first.rows();
        let mut sum = ComplexMatrix::zeros(d, d);
        for (z, m) in elements.iter().enumerate() {
            if !m.is_square() || m.rows() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: m.rows(),
                });
            }
            if !m.is_hermitian(1e-9) {
                return Err(Error::InvalidPovm(format!("element {z} is not Hermitian")));
            }
            let min = m.eigvalsh()?[0];
            if min < -TOL_PSD {
                return Err(Error::InvalidPovm(format!(
                    "element {z} has eigenvalue {min:.3e}"
                )));
            }
            sum += m;
        }
        let defect = (&sum - &ComplexMatrix::identity(d)).frobenius_norm();
        if defect > COMPLETENESS_TOL {
            return Err(Error::InvalidPovm(format!(
                "elements sum to identity only within {defect:.3e}"
            )));
        }
        Ok(Self { dim: d, elements })
    }

    pub(crate) fn trusted(elements: Vec<ComplexMatrix>) -> Self {
        let dim = elements[0].rows();
        Self { dim, elements }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of outcomes.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }

    /// The standard-basis measurement.
    pub fn computational_basis(d: usize) -> Self {
        rotated_basis_povm(&Unitary::identity(d))
    }

    /// The two-outcome measurement {O, 𝟙 − O}.
    pub fn two_outcome(o: &ComplexMatrix) -> Result<Self> {
        let mut rest = ComplexMatrix::identity(o.rows());
        rest -= o;
        Self::new(vec![o.clone(), rest])
    }
}

#[derive(Serialize, Deserialize)]
struct PovmJson {
    d: usize,
    elements: Vec<ComplexMatrix>,
}

impl Serialize for Povm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PovmJson {
            d: self.dim,
            elements: self.elements.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Povm {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let raw = PovmJson::deserialize(de)?;
        let p = Povm::new(raw.elements).map_err(serde::de::Error::custom)?;
        if p.dim != raw.d {
            return Err(serde::de::Error::custom("POVM dimension disagrees with d"));
        }
        Ok(p)
    }
}

/// Outcome probabilities of one measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomePmf {
    probs: Vec<f64>,
}

impl OutcomePmf {
    /// Clamps round-off negatives and renormalises; rejects anything that is
    /// not a distribution up to floating-point noise.
    pub fn from_raw(mut probs: Vec<f64>) -> Result<Self> {
        for (z, p) in probs.iter_mut().enumerate() {
            if !p.is_finite() || *p < -CLAMP_LIMIT {
                return Err(Error::InvalidPovm(format!("outcome {z} has probability {p}")));
            }
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PMF_SUM_TOL {
            return Err(Error::InvalidPovm(format!("probabilities sum to {total}")));
        }
        probs.iter_mut().for_each(|p| *p /= total);
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.probs, rng)
    }
}

/// Inverse-CDF draw from nonnegative weights summing to about one.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Round-off left a sliver above the last cumulative value.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

pub fn outcome_distribution(m: &Povm, rho: &DensityMatrix) -> Result<OutcomePmf> {
    if m.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            found: rho.dim(),
        });
    }
    let raw = m
        .elements()
        .iter()
        .map(|e| e.trace_product(rho.matrix()).re)
        .collect();
    OutcomePmf::from_raw(raw)
}

pub fn sample_outcome<R: Rng + ?Sized>(m: &Povm, rho: &DensityMatrix, rng: &mut R) -> Result<usize> {
    Ok(outcome_distribution(m, rho)?.sample(rng))
}

/// The orthonormal-basis measurement {U|j⟩⟨j|U†}.
pub fn rotated_basis_povm(u: &Unitary) -> Povm {
    let d = u.dim();
    Povm::trusted((0..d).map(|j| ComplexMatrix::outer(&u.column(j))).collect())
}

fn single_qubit_paulis() -> [ComplexMatrix; 4] {
    let o = C64::new(0.0, 0.0);
    let l = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let m = |a: [C64; 4]| ComplexMatrix::new(2, 2, a.to_vec()).expect("finite");
    [
        m([l, o, o, l]),
        m([o, l, l, o]),
        m([o, -i, i, o]),
        m([l, o, o, -l]),
    ]
}

/// All 4^q tensor products of {𝟙, σx, σy, σz}.
///
/// Index k has base-4 digits (a₀ … a_{q−1}) with qubit 0 the most
/// significant, so element 0 is the identity.
pub fn pauli_operators(q: usize) -> Result<Vec<ComplexMatrix>> {
    if q == 0 || q > MAX_PAULI_QUBITS {
        return Err(Error::InvalidParameter(format!(
            "Pauli basis supports 1..={MAX_PAULI_QUBITS} qubits, got {q}"
        )));
    }
    let singles = single_qubit_paulis();
    let mut ops = vec![ComplexMatrix::identity(1)];
    for _ in 0..q {
        ops = ops
            .iter()
            .flat_map(|p| singles.iter().map(move |s| p.kron(s)))
            .collect();
    }
    Ok(ops)
}

/// {(𝟙 + P)/2, (𝟙 − P)/2}; outcome 0 carries the value +1.
pub fn binary_pauli_povm(p: &ComplexMatrix) -> Result<Povm> {
    if !p.is_hermitian(1e-9) {
        return Err(Error::InvalidParameter("Pauli operator is not Hermitian".into()));
    }
    let d = p.rows();
    let id = ComplexMatrix::identity(d);
    let defect = (&p.matmul(p) - &id).frobenius_norm();
    if defect > 1e-9 * (d as f64).sqrt() {
        return Err(Error::InvalidParameter(format!(
            "operator is not an involution (‖P²−𝟙‖_F = {defect:.3e})"
        )));
    }
    let plus = (&id + p).scale(0.5);
    let minus = (&id - p).scale(0.5);
    Povm::new(vec![plus, minus])
}

/// Source of fresh copies of an unknown state.
///
/// Each call consumes new copies; nothing about the state is exposed except
/// measurement outcomes.
pub trait MeasurementOracle {
    fn dim(&self) -> usize;

    fn measure(&mut self, povm: &Povm) -> Result<usize>;

    /// One copy measured in the basis {U|j⟩}.
    fn measure_basis(&mut self, u: &Unitary) -> Result<usize> {
        self.measure(&rotated_basis_povm(u))
    }

    /// `shots` copies measured with the same POVM; returns outcome counts.
    fn measure_repeated(&mut self, povm: &Povm, shots: u64) -> Result<Vec<u64>> {
        let mut counts = vec![0u64; povm.len()];
        for _ in 0..shots {
            counts[self.measure(povm)?] += 1;
        }
        Ok(counts)
    }

    /// Copies consumed so far.
    fn copies_used(&self) -> u64;
}

/// Oracle backed by an explicit density matrix.
#[derive(Clone, Debug)]
pub struct SimulatedState {
    rho: DensityMatrix,
    rng: StreamRng,
    copies: u64,
}

impl SimulatedState {
    pub fn new(rho: DensityMatrix, stream: &RngStream) -> Self {
        Self {
            rho,
            rng: stream.rng(),
            copies: 0,
        }
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.rho
    }
}

impl MeasurementOracle for SimulatedState {
    fn dim(&self) -> usize {
        self.rho.dim()
    }

    fn measure(&mut self, povm: &Povm) -> Result<usize> {
        let z = sample_outcome(povm, &self.rho, &mut self.rng)?;
        self.copies += 1;
        Ok(z)
    }

    fn measure_basis(&mut self, u: &Unitary) -> Result<usize> {
        let d = self.rho.dim();
        if u.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: u.dim(),
            });
        }
        // p_j = ⟨u_j|ρ|u_j⟩ = Σ_i conj(U_ij) (ρU)_ij.
        let u = u.matrix();
        let ru = self.rho.matrix().matmul(u);
        let mut probs = vec![0.0; d];
        for i in 0..d {
            let (urow, rurow) = (u.row(i), ru.row(i));
            for j in 0..d {
                probs[j] += (urow[j].conj() * rurow[j]).re;
            }
        }
        let pmf = OutcomePmf::from_raw(probs)?;
        self.copies += 1;
        Ok(pmf.sample(&mut self.rng))
    }

    fn measure_repeated(&mut self, povm: &Povm, shots: u64) -> Result<Vec<u64>> {
        let pmf = outcome_distribution(povm, &self.rho)?;
        let counts = multinomial(shots, pmf.probs(), &mut self.rng);
        self.copies += shots;
        Ok(counts)
    }

    fn copies_used(&self) -> u64 {
        self.copies
    }
}

/// Multinomial counts by sequential conditional binomials.
pub fn multinomial<R: Rng + ?Sized>(n: u64, probs: &[f64], rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    let mut left = n;
    let mut mass = 1.0;
    for (z, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if z + 1 == probs.len() {
            counts[z] = left;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let k = Binomial::new(left, q).expect("q in [0,1]").sample(rng);
        counts[z] = k;
        left -= k;
        mass -= p;
    }
    counts
}

/// A measurement policy that may depend on all earlier outcomes.
pub trait AdaptiveStrategy {
    fn next_measurement(&mut self, history: &[usize]) -> Result<Povm>;
}

impl<F> AdaptiveStrategy for F
where
    F: FnMut(&[usize]) -> Result<Povm>,
{
    fn next_measurement(&mut self, history: &[usize]) -> Result<Povm> {
        self(history)
    }
}

/// Measures `n` copies, choosing each POVM from the outcomes seen so far.
pub fn run_adaptive<O, S>(oracle: &mut O, strategy: &mut S, n: usize) -> Result<Vec<usize>>
where
    O: MeasurementOracle + ?Sized,
    S: AdaptiveStrategy + ?Sized,
{
    let mut history = Vec::with_capacity(n);
    for _ in 0..n {
        let povm = strategy.next_measurement(&history)?;
        history.push(oracle.measure(&povm)?);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{basis_vector, trace_distance};
    use crate::randomness::{haar_unitary, random_density_matrix, random_povm};
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn distribution_examples() {
        let basis = Povm::computational_basis(3);
        let zero = DensityMatrix::pure(&basis_vector(3, 0)).unwrap();
        assert_eq!(outcome_distribution(&basis, &zero).unwrap().probs(), &[1.0, 0.0, 0.0]);

        let mut rng = RngStream::new(1).rng();
        let p = random_povm(4, 5, &mut rng).unwrap();
        let pmf = outcome_distribution(&p, &DensityMatrix::maximally_mixed(4)).unwrap();
        for (z, m) in p.elements().iter().enumerate() {
            assert!((pmf.probs()[z] - m.trace().re / 4.0).abs() < 1e-12);
        }

        let half = ComplexMatrix::identity(2).scale(0.5);
        let coin = Povm::new(vec![half.clone(), half]).unwrap();
        let rho = random_density_matrix(2, &mut rng);
        let pmf = outcome_distribution(&coin, &rho).unwrap();
        assert!((pmf.probs()[0] - 0.5).abs() < 1e-12 && (pmf.probs()[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn povm_validation_rejects_bad_inputs() {
        let id = ComplexMatrix::identity(2);
        assert!(Povm::new(vec![id.scale(0.5)]).is_err());
        let neg = ComplexMatrix::from_real_diagonal(&[1.5, -0.5]);
        let rest = &id - &neg;
        assert!(Povm::new(vec![neg, rest]).is_err());
        assert!(Povm::new(vec![]).is_err());
        let p = Povm::computational_basis(2);
        assert!(outcome_distribution(&p, &DensityMatrix::maximally_mixed(3)).is_err());
    }

    #[test]
    fn pmf_clamps_noise_but_not_errors() {
        let p = OutcomePmf::from_raw(vec![1.0 + 1e-13, -1e-13]).unwrap();
        assert_eq!(p.probs()[1], 0.0);
        assert!(OutcomePmf::from_raw(vec![1.1, -0.1]).is_err());
        assert!(OutcomePmf::from_raw(vec![0.5, 0.4]).is_err());
    }

    #[test]
    fn sampling_examples() {
        let basis = Povm::computational_basis(2);
        let zero = DensityMatrix::pure(&basis_vector(2, 0)).unwrap();
        let mut rng = RngStream::new(2).rng();
        assert!((0..1000).all(|_| sample_outcome(&basis, &zero, &mut rng).unwrap() == 0));

        let rho = random_density_matrix(2, &mut rng);
        let run = |seed| {
            let mut r = RngStream::new(seed).rng();
            (0..50)
                .map(|_| sample_outcome(&basis, &rho, &mut r).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(7), run(7));
    }

    #[test]
    fn sample_frequencies_match_pmf() {
        let mut rng = RngStream::new(3).rng();
        let p = random_povm(4, 3, &mut rng).unwrap();
        let rho = random_density_matrix(4, &mut rng);
        let pmf = outcome_distribution(&p, &rho).unwrap();
        let n = 100_000u64;
        let mut counts = [0u64; 3];
        for _ in 0..n {
            counts[sample_outcome(&p, &rho, &mut rng).unwrap()] += 1;
        }
        for z in 0..3 {
            let q = pmf.probs()[z];
            let se = (q * (1.0 - q) / n as f64).sqrt();
            assert!((counts[z] as f64 / n as f64 - q).abs() <= 5.0 * se);
        }
    }

    #[test]
    fn eight_outcome_goodness_of_fit() {
        let mut rng = RngStream::new(4).rng();
        let p = random_povm(4, 8, &mut rng).unwrap();
        let rho = random_density_matrix(4, &mut rng);
        let pmf = outcome_distribution(&p, &rho).unwrap();
        let n = 100_000u64;
        let mut counts = [0u64; 8];
        for _ in 0..n {
            counts[pmf.sample(&mut rng)] += 1;
        }
        let stat: f64 = (0..8)
            .map(|z| {
                let e = pmf.probs()[z] * n as f64;
                (counts[z] as f64 - e).powi(2) / e
            })
            .sum();
        let pval = 1.0 - ChiSquared::new(7.0).unwrap().cdf(stat);
        assert!(pval > 1e-4, "p-value {pval}");
    }

    #[test]
    fn rotated_basis_examples() {
        let mut rng = RngStream::new(5).rng();
        assert_eq!(rotated_basis_povm(&Unitary::identity(3)), Povm::computational_basis(3));
        let u = haar_unitary(5, &mut rng);
        let p = rotated_basis_povm(&u);
        let mut s = ComplexMatrix::zeros(5, 5);
        for m in p.elements() {
            assert!((m.trace().re - 1.0).abs() < 1e-12);
            s += m;
        }
        assert!((&s - &ComplexMatrix::identity(5)).frobenius_norm() < 1e-10);
        assert!(Povm::new(p.elements().to_vec()).is_ok());
    }

    #[test]
    fn pauli_basis_structure() {
        let one = pauli_operators(1).unwrap();
        assert_eq!(one, single_qubit_paulis().to_vec());
        let two = pauli_operators(2).unwrap();
        assert_eq!(two.len(), 16);
        assert_eq!(two[0], ComplexMatrix::identity(4));
        for (i, a) in two.iter().enumerate() {
            assert!(a.is_hermitian(1e-15));
            assert!(a.matmul(a).max_abs_diff(&ComplexMatrix::identity(4)) < 1e-15);
            for (j, b) in two.iter().enumerate() {
                let expect = if i == j { 4.0 } else { 0.0 };
                assert!((a.trace_product(b) - C64::new(expect, 0.0)).norm() < 1e-14);
            }
        }
        assert!(pauli_operators(0).is_err());
        assert!(pauli_operators(7).is_err());
    }

    #[test]
    fn pauli_expansion_reconstructs_state() {
        let mut rng = RngStream::new(6).rng();
        let rho = random_density_matrix(4, &mut rng);
        let mut rec = ComplexMatrix::zeros(4, 4);
        for p in pauli_operators(2).unwrap() {
            let c = p.trace_product(rho.matrix());
            rec += &p.scale_complex(c / 4.0);
        }
        assert!(rec.max_abs_diff(rho.matrix()) < 1e-10);
    }

    #[test]
    fn binary_pauli_examples() {
        let z = &pauli_operators(1).unwrap()[3];
        assert_eq!(binary_pauli_povm(z).unwrap(), Povm::computational_basis(2));

        let x = &pauli_operators(2).unwrap()[5];
        let pmf = outcome_distribution(
            &binary_pauli_povm(x).unwrap(),
            &DensityMatrix::maximally_mixed(4),
        )
        .unwrap();
        assert!((pmf.probs()[0] - 0.5).abs() < 1e-15);

        let sx = &pauli_operators(1).unwrap()[1];
        let mut m = ComplexMatrix::identity(2);
        m += &sx.scale(0.6);
        let rho = DensityMatrix::new(m.scale(0.5)).unwrap();
        let pmf = outcome_distribution(&binary_pauli_povm(sx).unwrap(), &rho).unwrap();
        assert!((pmf.probs()[0] - pmf.probs()[1] - 0.6).abs() < 1e-12);

        assert!(binary_pauli_povm(&ComplexMatrix::identity(2).scale(0.5)).is_err());
    }

    #[test]
    fn total_variation_bounded_by_half_trace_distance() {
        let mut rng = RngStream::new(7).rng();
        for _ in 0..50 {
            let p = random_povm(4, 3, &mut rng).unwrap();
            let a = random_density_matrix(4, &mut rng);
            let b = random_density_matrix(4, &mut rng);
            let pa = outcome_distribution(&p, &a).unwrap();
            let pb = outcome_distribution(&p, &b).unwrap();
            let tv: f64 = 0.5
                * pa.probs().iter().zip(pb.probs()).map(|(x, y)| (x - y).abs()).sum::<f64>();
            assert!(tv <= 0.5 * trace_distance(&a, &b).unwrap() + 1e-12);
        }
    }

    #[test]
    fn oracle_fast_paths_agree_with_generic_sampling() {
        let mut rng = RngStream::new(8).rng();
        let rho = random_density_matrix(3, &mut rng);
        let u = haar_unitary(3, &mut rng);
        let pmf = outcome_distribution(&rotated_basis_povm(&u), &rho).unwrap();
        let mut oracle = SimulatedState::new(rho, &RngStream::new(9));
        let n = 60_000;
        let mut counts = [0u64; 3];
        for _ in 0..n {
            counts[oracle.measure_basis(&u).unwrap()] += 1;
        }
        let repeated = oracle.measure_repeated(&rotated_basis_povm(&u), n).unwrap();
        assert_eq!(oracle.copies_used(), 2 * n);
        assert_eq!(repeated.iter().sum::<u64>(), n);
        for z in 0..3 {
            let q = pmf.probs()[z];
            let se = (q * (1.0 - q) / n as f64).sqrt();
            assert!((counts[z] as f64 / n as f64 - q).abs() <= 5.0 * se);
            assert!((repeated[z] as f64 / n as f64 - q).abs() <= 5.0 * se);
        }
    }

    #[test]
    fn adaptive_runner_passes_history() {
        let rho = DensityMatrix::pure(&basis_vector(2, 1)).unwrap();
        let mut oracle = SimulatedState::new(rho, &RngStream::new(10));
        let mut seen = Vec::new();
        let mut strategy = |h: &[usize]| -> Result<Povm> {
            seen.push(h.len());
            Ok(Povm::computational_basis(2))
        };
        let out = run_adaptive(&mut oracle, &mut strategy, 4).unwrap();
        assert_eq!(out, vec![1, 1, 1, 1]);
        assert_eq!(seen, vec![0, 1, 2, 3]);
    }

    #[test]
    fn povm_json_round_trip() {
        let p = Povm::computational_basis(2);
        let s = serde_json::to_string(&p).unwrap();
        let back: Povm = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
