//! Tomography and shadow estimators.
//!
//! - Random-basis tomography: average of (d+1)U|j⟩⟨j|U† − 𝟙 over Haar bases.
//! - Pauli tomography: ρ̂ = (𝟙 + Σ_{i≥1} μ_i P_i)/d from ±1 sample means.
//! - Shadows: sample means and median of means of Tr(O ρ̂(U, j)), plus the
//!   direct two-outcome strategy that measures {O, 𝟙−O} for each observable.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infotheory::check_effect;
use crate::linalg::{project_to_density, ComplexMatrix, DensityMatrix, C64};
use crate::measurements::{binary_pauli_povm, pauli_operators, MeasurementOracle, Povm};
use crate::randomness::{haar_unitary, RngStream, Unitary};

/// Constant in the heuristic plan n = ⌈c·d·ln(M)/ε²⌉, fixed by a calibration
/// run (see the `shadow_plan_constant_calibration` test).
pub const SHADOW_PLAN_CONSTANT: f64 = 12.0;

/// Unitaries are generated in blocks of this size before measurement.
const COLLECT_BLOCK: usize = 4096;

/// ρ̂(U, j) = (d+1)·U|j⟩⟨j|U† − 𝟙.
pub fn single_shot_estimator(u: &Unitary, j: usize) -> Result<ComplexMatrix> {
    let d = u.dim();
    if j >= d {
        return Err(Error::IndexOutOfRange { index: j, limit: d });
    }
    Ok(estimator_from_vector(&u.column(j)))
}

fn estimator_from_vector(v: &[C64]) -> ComplexMatrix {
    let d = v.len();
    let mut m = ComplexMatrix::zeros(d, d);
    m.add_scaled_outer(d as f64 + 1.0, v);
    m.add_identity(-1.0);
    m
}

/// Where a record's unitary comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UnitarySource {
    /// Haar draw from `RngStream::from_path(seed, path)`.
    Seeded { seed: u64, path: Vec<u64> },
    Explicit { unitary: Unitary },
}

impl UnitarySource {
    pub fn unitary(&self, d: usize) -> Result<Unitary> {
        match self {
            Self::Seeded { seed, path } => Ok(haar_unitary(d, &mut RngStream::from_path(*seed, path.clone()).rng())),
            Self::Explicit { unitary } => {
                if unitary.dim() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: unitary.dim(),
                    });
                }
                Ok(unitary.clone())
            }
        }
    }
}

/// One measurement record (U, j), with U|j⟩ cached.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowRecord {
    #[serde(flatten)]
    pub source: UnitarySource,
    pub j: usize,
    #[serde(skip)]
    vector: Vec<C64>,
}

impl ShadowRecord {
    pub fn new(source: UnitarySource, j: usize, d: usize) -> Result<Self> {
        if j >= d {
            return Err(Error::IndexOutOfRange { index: j, limit: d });
        }
        let vector = source.unitary(d)?.column(j);
        Ok(Self { source, j, vector })
    }

    pub fn explicit(u: Unitary, j: usize) -> Result<Self> {
        let d = u.dim();
        Self::new(UnitarySource::Explicit { unitary: u }, j, d)
    }

    /// U|j⟩.
    pub fn vector(&self) -> &[C64] {
        &self.vector
    }

    pub fn estimator(&self) -> ComplexMatrix {
        estimator_from_vector(&self.vector)
    }

    /// Tr(X ρ̂(U, j)) = (d+1)⟨u|X|u⟩ − Tr X.
    fn value(&self, x: &ComplexMatrix, trace_x: f64) -> f64 {
        (self.vector.len() as f64 + 1.0) * x.quadratic_form(&self.vector).re - trace_x
    }
}

#[derive(Serialize, Deserialize)]
struct SketchHeader {
    d: usize,
    n: usize,
}

/// A classical shadow: records (U_k, j_k) from rotated-basis measurements.
#[derive(Clone, Debug, PartialEq)]
pub struct ShadowSketch {
    d: usize,
    records: Vec<ShadowRecord>,
}

impl ShadowSketch {
    pub fn new(d: usize) -> Self {
        Self { d, records: Vec::new() }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.records.len()
    }

    pub fn records(&self) -> &[ShadowRecord] {
        &self.records
    }

    pub fn push(&mut self, record: ShadowRecord) -> Result<()> {
        if record.vector.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: record.vector.len(),
            });
        }
        self.records.push(record);
        Ok(())
    }

    /// Replaces record `k`.
    pub fn replace(&mut self, k: usize, record: ShadowRecord) -> Result<()> {
        if k >= self.records.len() {
            return Err(Error::IndexOutOfRange {
                index: k,
                limit: self.records.len(),
            });
        }
        if record.vector.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: record.vector.len(),
            });
        }
        self.records[k] = record;
        Ok(())
    }

    /// (1/n)Σ_k ρ̂(U_k, j_k).
    pub fn mean_estimator(&self) -> Result<ComplexMatrix> {
        if self.records.is_empty() {
            return Err(Error::InvalidParameter("empty sketch".into()));
        }
        let d = self.d;
        let mut acc = ComplexMatrix::zeros(d, d);
        for r in &self.records {
            acc.add_scaled_outer(1.0, &r.vector);
        }
        let mut m = acc.scale((d as f64 + 1.0) / self.records.len() as f64);
        m.add_identity(-1.0);
        Ok(m)
    }

    /// Per-record values Tr(X ρ̂(U_k, j_k)) for a Hermitian X.
    pub fn values(&self, x: &ComplexMatrix) -> Result<Vec<f64>> {
        if x.rows() != self.d || !x.is_square() {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: x.rows(),
            });
        }
        if !x.is_hermitian(1e-9) {
            return Err(Error::NotHermitian(x.hermiticity_defect()));
        }
        let tr = x.trace().re;
        Ok(self.records.iter().map(|r| r.value(x, tr)).collect())
    }

    /// Header line `{"d":…,"n":…}` followed by one record per line.
    pub fn write_json_lines<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, &SketchHeader { d: self.d, n: self.n() })?;
        writeln!(w)?;
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_json_lines<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header: SketchHeader = match lines.next() {
            Some(line) => serde_json::from_str(&line?)?,
            None => return Err(Error::InvalidParameter("empty sketch file".into())),
        };
        let mut sketch = Self::new(header.d);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let raw: ShadowRecord = serde_json::from_str(&line)?;
            sketch.push(ShadowRecord::new(raw.source, raw.j, header.d)?)?;
        }
        if sketch.n() != header.n {
            return Err(Error::InvalidParameter(format!(
                "header promises {} records, found {}",
                header.n,
                sketch.n()
            )));
        }
        Ok(sketch)
    }
}

/// `n` records: U_k drawn from `stream.child(k)`, each measured on a fresh copy.
pub fn collect_shadow<O: MeasurementOracle>(oracle: &mut O, n: usize, stream: &RngStream) -> Result<ShadowSketch> {
    let d = oracle.dim();
    let mut sketch = ShadowSketch::new(d);
    sketch.records.reserve(n);
    let mut start = 0;
    while start < n {
        let end = (start + COLLECT_BLOCK).min(n);
        let block: Vec<(RngStream, Unitary)> = (start..end)
            .into_par_iter()
            .map(|k| {
                let s = stream.child(k as u64);
                let u = haar_unitary(d, &mut s.rng());
                (s, u)
            })
            .collect();
        for (s, u) in block {
            let j = oracle.measure_basis(&u)?;
            sketch.records.push(ShadowRecord {
                source: UnitarySource::Seeded {
                    seed: s.seed(),
                    path: s.path().to_vec(),
                },
                j,
                vector: u.column(j),
            });
        }
        start = end;
    }
    Ok(sketch)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TomographyEstimate {
    /// Hermitian, unit trace, possibly not PSD.
    pub raw: ComplexMatrix,
    pub projected: Option<DensityMatrix>,
    pub n_used: u64,
}

impl TomographyEstimate {
    /// Adds the density matrix obtained by clipping negative eigenvalues and
    /// renormalising.
    pub fn with_projection(mut self) -> Result<Self> {
        self.projected = Some(project_to_density(&self.raw)?);
        Ok(self)
    }

    pub fn frobenius_error_sq(&self, rho: &DensityMatrix) -> f64 {
        let e = (&self.raw - rho.matrix()).frobenius_norm();
        e * e
    }
}

/// Mean of single-shot estimators over `n` Haar-basis measurements.
pub fn random_basis_tomography<O: MeasurementOracle>(
    oracle: &mut O,
    n: usize,
    stream: &RngStream,
) -> Result<TomographyEstimate> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let sketch = collect_shadow(oracle, n, stream)?;
    Ok(TomographyEstimate {
        raw: sketch.mean_estimator()?.hermitian_part(),
        projected: None,
        n_used: n as u64,
    })
}

/// Binary measurements of each non-identity Pauli, `s` shots each.
pub fn pauli_tomography<O: MeasurementOracle>(oracle: &mut O, q: usize, s: u64) -> Result<TomographyEstimate> {
    if s == 0 {
        return Err(Error::InvalidParameter("s must be at least 1".into()));
    }
    let paulis = pauli_operators(q)?;
    let d = paulis[0].rows();
    if oracle.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: oracle.dim(),
        });
    }
    let mut acc = ComplexMatrix::identity(d);
    for p in &paulis[1..] {
        let counts = oracle.measure_repeated(&binary_pauli_povm(p)?, s)?;
        let mu = (counts[0] as f64 - counts[1] as f64) / s as f64;
        acc += &p.scale(mu);
    }
    Ok(TomographyEstimate {
        raw: acc.scale(1.0 / d as f64),
        projected: None,
        n_used: s * (d * d - 1) as u64,
    })
}

fn check_observables(d: usize, observables: &[ComplexMatrix]) -> Result<()> {
    for o in observables {
        if o.rows() != d || !o.is_square() {
            return Err(Error::DimensionMismatch { expected: d, found: o.rows() });
        }
        check_effect(o)?;
    }
    Ok(())
}

/// (1/n)Σ_k Tr(O_i ρ̂(U_k, j_k)) for each observable 0 ⪯ O_i ⪯ 𝟙.
pub fn shadow_sample_mean(sketch: &ShadowSketch, observables: &[ComplexMatrix]) -> Result<Vec<f64>> {
    check_observables(sketch.d, observables)?;
    if sketch.n() == 0 {
        return Err(Error::InvalidParameter("empty sketch".into()));
    }
    observables
        .iter()
        .map(|o| Ok(sketch.values(o)?.iter().sum::<f64>() / sketch.n() as f64))
        .collect()
}

/// Median over `k_groups` consecutive group means; records beyond
/// k_groups·⌊n/k_groups⌋ are dropped.
pub fn shadow_median_of_means(sketch: &ShadowSketch, observables: &[ComplexMatrix], k_groups: usize) -> Result<Vec<f64>> {
    check_observables(sketch.d, observables)?;
    if k_groups == 0 || k_groups > sketch.n() {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= k_groups <= n (k_groups={k_groups}, n={})",
            sketch.n()
        )));
    }
    let b = sketch.n() / k_groups;
    observables
        .iter()
        .map(|o| {
            let vals = sketch.values(o)?;
            let mut means: Vec<f64> = vals[..b * k_groups]
                .chunks(b)
                .map(|c| c.iter().sum::<f64>() / b as f64)
                .collect();
            means.sort_by(f64::total_cmp);
            let mid = k_groups / 2;
            Ok(if k_groups % 2 == 1 {
                means[mid]
            } else {
                0.5 * (means[mid - 1] + means[mid])
            })
        })
        .collect()
}

/// Shots per observable so that 2M·exp(−2sε²) ≤ δ (Hoeffding plus a union
/// bound over M observables).
pub fn hoeffding_shots(n_observables: usize, eps: f64, delta: f64) -> Result<u64> {
    if n_observables == 0 || !(eps > 0.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need M >= 1, eps > 0, delta in (0, 1) (M={n_observables}, eps={eps}, delta={delta})"
        )));
    }
    Ok(((2.0 * n_observables as f64 / delta).ln() / (2.0 * eps * eps)).ceil() as u64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwoOutcomeEstimate {
    pub estimates: Vec<f64>,
    pub shots_per_observable: u64,
    pub total_shots: u64,
}

/// Measures {O_i, 𝟙−O_i} `shots` times per observable (Hoeffding plan with
/// δ = 1/3 when `None`) and returns the frequencies of the first outcome.
pub fn two_outcome_shadow_tomography<O: MeasurementOracle>(
    oracle: &mut O,
    observables: &[ComplexMatrix],
    eps: f64,
    shots: Option<u64>,
) -> Result<TwoOutcomeEstimate> {
    let d = oracle.dim();
    check_observables(d, observables)?;
    let s = match shots {
        Some(s) if s > 0 => s,
        Some(_) => return Err(Error::InvalidParameter("shots must be at least 1".into())),
        None => hoeffding_shots(observables.len(), eps, 1.0 / 3.0)?,
    };
    let mut estimates = Vec::with_capacity(observables.len());
    for o in observables {
        let counts = oracle.measure_repeated(&Povm::two_outcome(o)?, s)?;
        estimates.push(counts[0] as f64 / s as f64);
    }
    Ok(TwoOutcomeEstimate {
        estimates,
        shots_per_observable: s,
        total_shots: s * observables.len() as u64,
    })
}

/// Smallest n with 2·exp(−(nε)²/2 / (nσ² + Knε/3)) ≤ δ:
/// n = ⌈2(σ² + Kε/3)·ln(2/δ)/ε²⌉.
pub fn bernstein_sample_plan(eps: f64, delta: f64, sigma2: f64, k_bound: f64) -> Result<u64> {
    if !(eps > 0.0) || !(delta > 0.0 && delta <= 1.0) || !(sigma2 > 0.0) || !(k_bound > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Bernstein plan needs positive arguments and delta <= 1 \
             (eps={eps}, delta={delta}, sigma2={sigma2}, K={k_bound})"
        )));
    }
    Ok((2.0 * (sigma2 + k_bound * eps / 3.0) * (2.0 / delta).ln() / (eps * eps)).ceil() as u64)
}

/// Bernstein plan for M observables 0 ⪯ O ⪯ 𝟙 in dimension d with joint
/// failure probability 1/3: σ² = 3d, K = d+1, δ = 1/(3M).
pub fn shadow_sample_plan(d: usize, n_observables: usize, eps: f64) -> Result<u64> {
    if n_observables == 0 {
        return Err(Error::InvalidParameter("need at least one observable".into()));
    }
    let df = d as f64;
    bernstein_sample_plan(eps, 1.0 / (3.0 * n_observables as f64), 3.0 * df, df + 1.0)
}

/// ⌈c·d·ln(M)/ε²⌉ with c = [`SHADOW_PLAN_CONSTANT`]; M = 1 is treated as M = 2.
pub fn heuristic_shadow_plan(d: usize, n_observables: usize, eps: f64) -> u64 {
    let m = n_observables.max(2) as f64;
    (SHADOW_PLAN_CONSTANT * d as f64 * m.ln() / (eps * eps)).ceil() as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurements::SimulatedState;
    use crate::randomness::{random_density_matrix, random_effect, random_hermitian_contraction};

    fn oracle(rho: &DensityMatrix, seed: u64) -> SimulatedState {
        SimulatedState::new(rho.clone(), &RngStream::new(seed))
    }

    #[test]
    fn single_shot_examples() {
        let e = single_shot_estimator(&Unitary::identity(2), 0).unwrap();
        assert_eq!(e, ComplexMatrix::from_real_diagonal(&[2.0, -1.0]));
        let mut rng = RngStream::new(1).rng();
        let u = haar_unitary(5, &mut rng);
        let e = single_shot_estimator(&u, 3).unwrap();
        assert!((e.trace().re - 1.0).abs() < 1e-12);
        let ev = e.eigvalsh().unwrap();
        assert!((ev[4] - 5.0).abs() < 1e-9);
        assert!(ev[..4].iter().all(|x| (x + 1.0).abs() < 1e-9));
        assert!(single_shot_estimator(&u, 5).is_err());
    }

    #[test]
    fn single_shot_is_unbiased() {
        let rho = DensityMatrix::new(ComplexMatrix::from_real_diagonal(&[0.7, 0.3])).unwrap();
        let n = 1_000_000;
        let sketch = collect_shadow(&mut oracle(&rho, 2), n, &RngStream::new(3)).unwrap();
        let mean = sketch.mean_estimator().unwrap();
        assert!(mean.max_abs_diff(rho.matrix()) < 0.01);
        assert!(mean.max_abs_diff(rho.matrix()) < 6.0 * 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn sketch_mean_matches_tomography_and_is_reproducible() {
        let mut rng = RngStream::new(4).rng();
        let rho = random_density_matrix(3, &mut rng);
        let s = RngStream::new(5);
        let a = collect_shadow(&mut oracle(&rho, 6), 300, &s).unwrap();
        let b = collect_shadow(&mut oracle(&rho, 6), 300, &s).unwrap();
        assert_eq!(a, b);
        assert!(a.records().iter().all(|r| r.j < 3));
        let est = random_basis_tomography(&mut oracle(&rho, 6), 300, &s).unwrap();
        assert!(est.raw.max_abs_diff(&a.mean_estimator().unwrap()) < 1e-12);
        assert!((est.raw.trace().re - 1.0).abs() < 1e-12);
        assert_eq!(est.n_used, 300);
    }

    #[test]
    fn random_basis_consistency_and_norm_bound() {
        let mut rng = RngStream::new(7).rng();
        let rho = random_density_matrix(2, &mut rng);
        let est = random_basis_tomography(&mut oracle(&rho, 8), 1_000_000, &RngStream::new(9)).unwrap();
        assert!(est.frobenius_error_sq(&rho).sqrt() <= 0.02);

        let d = 4.0f64;
        let cap = ((d * d + d - 1.0).sqrt() + 1.0).powi(2);
        let rho = random_density_matrix(4, &mut rng);
        for k in 0..20 {
            let est = random_basis_tomography(&mut oracle(&rho, 10 + k), 1, &RngStream::new(k)).unwrap();
            assert!(est.frobenius_error_sq(&rho) <= cap);
        }
    }

    #[test]
    fn random_basis_risk_on_maximally_mixed() {
        let rho = DensityMatrix::maximally_mixed(4);
        let reps = 200;
        let errs: Vec<f64> = (0..reps)
            .into_par_iter()
            .map(|k| {
                random_basis_tomography(&mut oracle(&rho, 100 + k), 100, &RngStream::from_path(11, vec![k]))
                    .unwrap()
                    .frobenius_error_sq(&rho)
            })
            .collect();
        let mean = errs.iter().sum::<f64>() / reps as f64;
        let exact = (16.0 + 4.0 - 1.0 - 0.25) / 100.0;
        assert!((mean / exact - 1.0).abs() < 0.1, "mean {mean} exact {exact}");
    }

    #[test]
    fn pauli_examples() {
        let rho = DensityMatrix::maximally_mixed(4);
        let (s, reps) = (50, 200);
        let errs: Vec<f64> = (0..reps)
            .map(|k| pauli_tomography(&mut oracle(&rho, 200 + k), 2, s).unwrap().frobenius_error_sq(&rho))
            .collect();
        let mean = errs.iter().sum::<f64>() / reps as f64;
        let exact = 15.0 / (4.0 * s as f64);
        assert!((mean / exact - 1.0).abs() < 0.1, "mean {mean} exact {exact}");

        let mut rng = RngStream::new(12).rng();
        let rho = random_density_matrix(2, &mut rng);
        let est = pauli_tomography(&mut oracle(&rho, 13), 1, 100_000).unwrap();
        assert!((est.raw.trace().re - 1.0).abs() < 1e-12);
        assert!(est.frobenius_error_sq(&rho).sqrt() <= 0.03);
        assert_eq!(est.n_used, 300_000);
        let projected = est.with_projection().unwrap().projected.unwrap();
        assert!((projected.matrix().trace().re - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sample_mean_boundary_observables() {
        let mut rng = RngStream::new(14).rng();
        let rho = random_density_matrix(4, &mut rng);
        let sketch = collect_shadow(&mut oracle(&rho, 15), 500, &RngStream::new(16)).unwrap();
        let id = ComplexMatrix::identity(4);
        let est = shadow_sample_mean(&sketch, &[id.clone(), id.scale(0.5)]).unwrap();
        assert!((est[0] - 1.0).abs() < 1e-12);
        assert!((est[1] - 0.5).abs() < 1e-12);
        assert!(shadow_sample_mean(&sketch, &[id.scale(2.0)]).is_err());
        let mom = shadow_median_of_means(&sketch, &[id.clone()], 7).unwrap();
        assert!((mom[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn median_of_means_with_one_group_is_sample_mean() {
        let mut rng = RngStream::new(17).rng();
        let rho = random_density_matrix(3, &mut rng);
        let sketch = collect_shadow(&mut oracle(&rho, 18), 200, &RngStream::new(19)).unwrap();
        let obs: Vec<_> = (0..3).map(|_| random_effect(3, &mut rng)).collect();
        let a = shadow_sample_mean(&sketch, &obs).unwrap();
        let b = shadow_median_of_means(&sketch, &obs, 1).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(shadow_median_of_means(&sketch, &obs, 201).is_err());
    }

    #[test]
    fn median_of_means_resists_block_contamination() {
        let d = 4;
        let mut wins = 0;
        for t in 0..100u64 {
            let s = RngStream::from_path(20, vec![t]);
            let mut rng = s.child(0).rng();
            let rho = random_density_matrix(d, &mut rng);
            let o = random_effect(d, &mut rng);
            let mut sketch = collect_shadow(&mut oracle(&rho, 1000 + t), 1000, &s.child(1)).unwrap();
            // Worst case for O: measure along its top eigenvector.
            let eig = o.eigh().unwrap();
            let top: Vec<Vec<C64>> = (0..d).map(|c| eig.vectors.column((d - c) % d)).collect();
            let u = Unitary::new(ComplexMatrix::from_columns(&top)).unwrap();
            for k in 0..100 {
                sketch.replace(k, ShadowRecord::explicit(u.clone(), 0).unwrap()).unwrap();
            }
            let truth = rho.expectation(&o);
            let sm = shadow_sample_mean(&sketch, &[o.clone()]).unwrap()[0];
            let mom = shadow_median_of_means(&sketch, &[o.clone()], 20).unwrap()[0];
            wins += usize::from((mom - truth).abs() <= (sm - truth).abs());
        }
        assert!(wins >= 80, "median of means won {wins} of 100");
    }

    #[test]
    fn variance_cap_at_d4() {
        let mut rng = RngStream::new(21).rng();
        let rho = random_density_matrix(4, &mut rng);
        let sketch = collect_shadow(&mut oracle(&rho, 22), 100_000, &RngStream::new(23)).unwrap();
        for _ in 0..20 {
            let x = random_hermitian_contraction(4, &mut rng);
            let v = sketch.values(&x).unwrap();
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let m4 = v.iter().map(|y| (y - mean).powi(4)).sum::<f64>() / n;
            let se = ((m4 - var * var).max(0.0) / n).sqrt();
            assert!(var <= 3.0 * x.trace_product(&x).re + 3.0 * se);
        }
    }

    #[test]
    fn sketch_json_lines_round_trip() {
        let mut rng = RngStream::new(24).rng();
        let rho = random_density_matrix(3, &mut rng);
        let mut sketch = collect_shadow(&mut oracle(&rho, 25), 20, &RngStream::new(26)).unwrap();
        sketch
            .replace(3, ShadowRecord::explicit(haar_unitary(3, &mut rng), 2).unwrap())
            .unwrap();
        let mut buf = Vec::new();
        sketch.write_json_lines(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 21);
        let back = ShadowSketch::read_json_lines(&buf[..]).unwrap();
        assert_eq!(back.n(), 20);
        assert!(back.mean_estimator().unwrap().max_abs_diff(&sketch.mean_estimator().unwrap()) < 1e-12);
        assert!(ShadowSketch::read_json_lines(&b"{\"d\":3,\"n\":2}\n"[..]).is_err());
    }

    #[test]
    fn two_outcome_examples() {
        let mut rng = RngStream::new(27).rng();
        let rho = random_density_matrix(4, &mut rng);
        let id = ComplexMatrix::identity(4);
        let r = two_outcome_shadow_tomography(&mut oracle(&rho, 28), &[id.clone()], 0.1, None).unwrap();
        assert_eq!(r.estimates, vec![1.0]);

        let half = id.scale(0.5);
        let mut hits = 0;
        for t in 0..60 {
            let r = two_outcome_shadow_tomography(&mut oracle(&rho, 300 + t), &[half.clone()], 0.1, None).unwrap();
            hits += usize::from((r.estimates[0] - 0.5).abs() <= 0.1);
        }
        assert!(hits >= 40);

        let obs: Vec<_> = (0..20).map(|_| random_effect(4, &mut rng)).collect();
        let mut ok = 0;
        for t in 0..30 {
            let r = two_outcome_shadow_tomography(&mut oracle(&rho, 400 + t), &obs, 0.2, None).unwrap();
            assert_eq!(r.total_shots, 20 * r.shots_per_observable);
            ok += usize::from(obs.iter().zip(&r.estimates).all(|(o, e)| (e - rho.expectation(o)).abs() <= 0.2));
        }
        assert!(ok >= 20);
    }

    #[test]
    fn bernstein_plan_examples() {
        assert_eq!(bernstein_sample_plan(0.2, 1.0 / 150.0, 24.0, 9.0).unwrap(), 7016);
        assert_eq!(shadow_sample_plan(8, 50, 0.2).unwrap(), 7016);
        let independent = (2.0 * (24.0 + 9.0 * 0.2 / 3.0) * 300f64.ln() / 0.04).ceil() as u64;
        assert_eq!(independent, 7016);
        let plans: Vec<u64> = [0.001, 0.01, 0.1, 0.5, 0.99]
            .iter()
            .map(|&delta| bernstein_sample_plan(0.2, delta, 24.0, 9.0).unwrap())
            .collect();
        assert!(plans.windows(2).all(|w| w[1] < w[0]));
        let a = bernstein_sample_plan(0.1, 0.01, 24.0, 1.0).unwrap() as f64;
        let b = bernstein_sample_plan(0.05, 0.01, 24.0, 1.0).unwrap() as f64;
        assert!((b / a / 4.0 - 1.0).abs() < 0.01);
        assert!(bernstein_sample_plan(0.0, 0.1, 1.0, 1.0).is_err());
    }

    #[test]
    fn shadow_plan_constant_calibration() {
        // Heuristic plan at d = 8, M = 50, ε = 0.2 must succeed in ≥ 2/3 of runs.
        let (d, m, eps) = (8, 50, 0.2);
        let n = heuristic_shadow_plan(d, m, eps) as usize;
        assert_eq!(n, (12.0 * 8.0 * 50f64.ln() / 0.04f64).ceil() as usize);
        let ok: usize = (0..30u64)
            .into_par_iter()
            .map(|t| {
                let s = RngStream::from_path(29, vec![t]);
                let mut rng = s.child(0).rng();
                let rho = random_density_matrix(d, &mut rng);
                let obs: Vec<_> = (0..m).map(|_| random_effect(d, &mut rng)).collect();
                let sketch = collect_shadow(&mut oracle(&rho, 500 + t), n, &s.child(1)).unwrap();
                let est = shadow_sample_mean(&sketch, &obs).unwrap();
                usize::from(obs.iter().zip(&est).all(|(o, e)| (e - rho.expectation(o)).abs() <= eps))
            })
            .sum();
        assert!(ok >= 20, "{ok} of 30");
    }
}
