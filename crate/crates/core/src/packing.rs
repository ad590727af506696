//! Rejection-sampling packings of hard-instance states and projector-overlap
//! concentration studies.
//!
//! Every builder draws candidate k from `stream.child(k)`, checks candidates
//! in parallel batches against the committed prefix, and commits them in
//! index order, so the output depends only on the seed. Each successful build
//! ends with an independent exhaustive re-verification.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::{
    perturbed_state, rank_r_state, rotated_half_projector, PerturbedParams, RankRParams,
};
use crate::error::{Error, Result};
use crate::infotheory::{f_chi2, f_chi2_from_projector};
use crate::linalg::{trace_distance, trace_norm, ComplexMatrix, DensityMatrix, Projector};
use crate::measurements::Povm;
use crate::randomness::{haar_unitary, RngStream, Unitary};

/// Default draw budget per requested state.
pub const DRAWS_PER_TARGET: u64 = 10_000;

const BATCH: usize = 64;

pub fn default_max_draws(n_target: usize) -> u64 {
    DRAWS_PER_TARGET.saturating_mul(n_target as u64)
}

/// Tr(P U Q U†).
pub fn projector_overlap(p: &Projector, u: &Unitary, q: &Projector) -> Result<f64> {
    let d = p.dim();
    for found in [u.dim(), q.dim()] {
        if found != d {
            return Err(Error::DimensionMismatch { expected: d, found });
        }
    }
    Ok(p.matrix().trace_product(&u.conjugate(q.matrix())).re)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OverlapTails {
    pub trials: usize,
    pub mean_overlap: f64,
    /// Frequency of Tr(Π₁UΠ₂U†) ≤ (1−t)r₁r₂/d.
    pub lower_freq: f64,
    /// Frequency of Tr(Π₁UΠ₂U†) ≥ (1+t)r₁r₂/d.
    pub upper_freq: f64,
    /// exp(−r₁r₂t²/2).
    pub lower_bound: f64,
    /// exp(−r₁r₂t²/4).
    pub upper_bound: f64,
}

impl OverlapTails {
    /// Binomial standard error of a frequency `p` over the trials.
    pub fn binomial_se(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

/// Empirical tails of the overlap between the leading-r₁ and rotated
/// leading-r₂ coordinate projectors.
pub fn overlap_tail_empirical(
    d: usize,
    r1: usize,
    r2: usize,
    t: f64,
    trials: usize,
    stream: &RngStream,
) -> Result<OverlapTails> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidParameter(format!("t must lie in (0, 1), got {t}")));
    }
    if r1 == 0 || r2 == 0 || r1 > d || r2 > d || trials == 0 {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= r1, r2 <= d and trials >= 1 (d={d}, r1={r1}, r2={r2})"
        )));
    }
    let center = (r1 * r2) as f64 / d as f64;
    let (lo, hi) = ((1.0 - t) * center, (1.0 + t) * center);
    let chunks = 64u64;
    let counts: Vec<(usize, usize, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let n = trials / chunks as usize + usize::from((c as usize) < trials % chunks as usize);
            let mut rng = stream.child(c).rng();
            let (mut below, mut above, mut sum) = (0, 0, 0.0);
            for _ in 0..n {
                let u = haar_unitary(d, &mut rng);
                // Tr(P U Q U†) = Σ_{i<r1, j<r2} |U_ij|².
                let m = u.matrix();
                let x: f64 = (0..r1).map(|i| m.row(i)[..r2].iter().map(|z| z.norm_sqr()).sum::<f64>()).sum();
                below += usize::from(x <= lo);
                above += usize::from(x >= hi);
                sum += x;
            }
            (below, above, sum)
        })
        .collect();
    let (below, above, sum) = counts
        .into_iter()
        .fold((0, 0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    let n = trials as f64;
    let rr = (r1 * r2) as f64;
    Ok(OverlapTails {
        trials,
        mean_overlap: sum / n,
        lower_freq: below as f64 / n,
        upper_freq: above as f64 / n,
        lower_bound: (-rr * t * t / 2.0).exp(),
        upper_bound: (-rr * t * t / 4.0).exp(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PackingKind {
    /// Perturbed states pairwise more than ε/2 apart in trace norm.
    Trace { eps: f64 },
    /// As `Trace`, plus F^{χ²} ≤ tau for each supplied POVM.
    Chi2Constrained { eps: f64, tau: f64, n_povms: usize },
    /// Rotated half projectors with pairwise overlap at most d/3.
    Shadow,
    /// Rank-r states pairwise more than √ν/4 apart; unitaries are the
    /// (d−r)-dimensional blocks.
    RankR { nu: f64, r: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub name: String,
    pub threshold: f64,
    pub rejections: u64,
    /// The constraint cannot reject any candidate.
    pub vacuous: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub pairs_checked: usize,
    /// Smallest pairwise distance, or largest overlap for shadow packings.
    pub extreme_pairwise: f64,
    pub chi2_checks: usize,
    pub max_chi2: Option<f64>,
    pub violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackingResult {
    pub kind: PackingKind,
    pub d: usize,
    pub unitaries: Vec<Unitary>,
    pub n_draws: u64,
    pub n_rejected: u64,
    pub constraints: Vec<ConstraintReport>,
    pub verification: Option<Verification>,
}

impl PackingResult {
    pub fn len(&self) -> usize {
        self.unitaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unitaries.is_empty()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.n_draws == 0 {
            0.0
        } else {
            self.unitaries.len() as f64 / self.n_draws as f64
        }
    }

    pub fn eps(&self) -> Option<f64> {
        match self.kind {
            PackingKind::Trace { eps } | PackingKind::Chi2Constrained { eps, .. } => Some(eps),
            _ => None,
        }
    }
}

struct Candidate {
    unitary: Unitary,
    key: ComplexMatrix,
    unary_ok: bool,
}

struct Greedy {
    accepted: Vec<(Unitary, ComplexMatrix)>,
    draws: u64,
    unary_rejections: u64,
    pair_rejections: u64,
    rejected: u64,
}

/// Shared rejection loop. `make` draws candidate `k` and evaluates unary
/// constraints; `separated` is the pairwise constraint on keys.
fn greedy_pack<M, S>(n_target: usize, max_draws: u64, stream: &RngStream, make: M, separated: S) -> Result<(Greedy, bool)>
where
    M: Fn(&RngStream) -> Result<Candidate> + Sync,
    S: Fn(&ComplexMatrix, &ComplexMatrix) -> Result<bool> + Sync,
{
    let mut g = Greedy {
        accepted: Vec::new(),
        draws: 0,
        unary_rejections: 0,
        pair_rejections: 0,
        rejected: 0,
    };
    while g.accepted.len() < n_target && g.draws < max_draws {
        let start = g.draws;
        let count = (BATCH as u64).min(max_draws - start);
        let prefix = &g.accepted;
        let evaluated: Vec<(Candidate, bool)> = (start..start + count)
            .into_par_iter()
            .map(|k| {
                let c = make(&stream.child(k))?;
                let mut ok = true;
                for (_, key) in prefix {
                    if !separated(&c.key, key)? {
                        ok = false;
                        break;
                    }
                }
                Ok((c, ok))
            })
            .collect::<Result<_>>()?;
        let committed = g.accepted.len();
        for (c, sep_prefix) in evaluated {
            g.draws += 1;
            let mut sep = sep_prefix;
            if sep {
                for (_, key) in &g.accepted[committed..] {
                    if !separated(&c.key, key)? {
                        sep = false;
                        break;
                    }
                }
            }
            g.unary_rejections += u64::from(!c.unary_ok);
            g.pair_rejections += u64::from(!sep);
            if c.unary_ok && sep {
                g.accepted.push((c.unitary, c.key));
                if g.accepted.len() == n_target {
                    break;
                }
            } else {
                g.rejected += 1;
            }
        }
    }
    let complete = g.accepted.len() >= n_target;
    Ok((g, complete))
}

fn check_target(n_target: usize) -> Result<()> {
    if n_target == 0 {
        return Err(Error::InvalidParameter("n_target must be at least 1".into()));
    }
    Ok(())
}

fn check_even(d: usize) -> Result<()> {
    if d < 2 || d % 2 != 0 {
        return Err(Error::InvalidParameter(format!("packing needs an even dimension, got {d}")));
    }
    Ok(())
}

fn finish(mut result: PackingResult, complete: bool, povms: &[Povm]) -> Result<PackingResult> {
    if !complete {
        let accepted = result.unitaries.len();
        let target = accepted + 1;
        return Err(Error::PackingExhausted {
            draws: result.n_draws,
            accepted,
            target,
            partial: Box::new(result),
        });
    }
    let v = verify_packing(&result, povms)?;
    if v.violations > 0 {
        return Err(Error::VerificationFailed(format!(
            "{} of {} checks violated",
            v.violations,
            v.pairs_checked + v.chi2_checks
        )));
    }
    result.verification = Some(v);
    Ok(result)
}

fn with_target(err: Error, n_target: usize) -> Error {
    match err {
        Error::PackingExhausted {
            draws,
            accepted,
            partial,
            ..
        } => Error::PackingExhausted {
            draws,
            accepted,
            target: n_target,
            partial,
        },
        e => e,
    }
}

/// Perturbed states pairwise more than ε/2 apart in trace norm.
pub fn build_trace_packing(
    d: usize,
    eps: f64,
    n_target: usize,
    max_draws: Option<u64>,
    stream: &RngStream,
) -> Result<PackingResult> {
    let relabel = |r: &mut PackingResult| {
        r.kind = PackingKind::Trace { eps };
        r.constraints.truncate(1);
    };
    match build_chi2_constrained_packing(d, eps, n_target, &[], eps * eps, max_draws, stream) {
        Ok(mut r) => {
            relabel(&mut r);
            Ok(r)
        }
        Err(Error::PackingExhausted {
            draws,
            accepted,
            target,
            mut partial,
        }) => {
            relabel(&mut partial);
            Err(Error::PackingExhausted {
                draws,
                accepted,
                target,
                partial,
            })
        }
        Err(e) => Err(e),
    }
}

/// Perturbed-state packing that also keeps F^{χ²}(M_i, U) ≤ tau for every
/// supplied POVM.
pub fn build_chi2_constrained_packing(
    d: usize,
    eps: f64,
    n_target: usize,
    povms: &[Povm],
    tau: f64,
    max_draws: Option<u64>,
    stream: &RngStream,
) -> Result<PackingResult> {
    check_even(d)?;
    check_target(n_target)?;
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidParameter(format!("eps must lie in (0, 1], got {eps}")));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    for m in povms {
        if m.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: m.dim() });
        }
    }
    let scale = 2.0 * eps / d as f64;
    let sep = eps / 2.0;
    let max_draws = max_draws.unwrap_or_else(|| default_max_draws(n_target));
    let (g, complete) = greedy_pack(
        n_target,
        max_draws,
        stream,
        |s| {
            let u = haar_unitary(d, &mut s.rng());
            let p = rotated_half_projector(&u);
            let mut unary_ok = true;
            for m in povms {
                if f_chi2_from_projector(eps, m, &p)? > tau {
                    unary_ok = false;
                    break;
                }
            }
            Ok(Candidate { unitary: u, key: p, unary_ok })
        },
        |a, b| Ok(scale * trace_norm(&(a - b))? > sep),
    )?;
    let mut constraints = vec![ConstraintReport {
        name: "pairwise trace distance".into(),
        threshold: sep,
        rejections: g.pair_rejections,
        vacuous: false,
    }];
    if !povms.is_empty() || tau < eps * eps {
        constraints.push(ConstraintReport {
            name: "chi-squared cap".into(),
            threshold: tau,
            rejections: g.unary_rejections,
            vacuous: tau >= eps * eps,
        });
    }
    let result = PackingResult {
        kind: PackingKind::Chi2Constrained {
            eps,
            tau,
            n_povms: povms.len(),
        },
        d,
        unitaries: g.accepted.into_iter().map(|(u, _)| u).collect(),
        n_draws: g.draws,
        n_rejected: g.rejected,
        constraints,
        verification: None,
    };
    finish(result, complete, povms).map_err(|e| with_target(e, n_target))
}

/// Unitaries whose rotated half projectors pairwise overlap at most d/3.
pub fn build_shadow_packing(d: usize, n_target: usize, max_draws: Option<u64>, stream: &RngStream) -> Result<PackingResult> {
    check_even(d)?;
    check_target(n_target)?;
    let cap = d as f64 / 3.0;
    let max_draws = max_draws.unwrap_or_else(|| default_max_draws(n_target));
    let (g, complete) = greedy_pack(
        n_target,
        max_draws,
        stream,
        |s| {
            let u = haar_unitary(d, &mut s.rng());
            let key = rotated_half_projector(&u);
            Ok(Candidate { unitary: u, key, unary_ok: true })
        },
        |a, b| Ok(a.trace_product(b).re <= cap),
    )?;
    let result = PackingResult {
        kind: PackingKind::Shadow,
        d,
        unitaries: g.accepted.into_iter().map(|(u, _)| u).collect(),
        n_draws: g.draws,
        n_rejected: g.rejected,
        constraints: vec![ConstraintReport {
            name: "pairwise projector overlap".into(),
            threshold: cap,
            rejections: g.pair_rejections,
            vacuous: false,
        }],
        verification: None,
    };
    finish(result, complete, &[]).map_err(|e| with_target(e, n_target))
}

/// Rank-r states pairwise more than √ν/4 apart in trace norm.
pub fn build_rank_r_packing(
    d: usize,
    r: usize,
    nu: f64,
    n_target: usize,
    max_draws: Option<u64>,
    stream: &RngStream,
) -> Result<PackingResult> {
    check_target(n_target)?;
    // Validates (d, r, ν) up front.
    RankRParams::new(nu, r, d, &Unitary::identity(d.saturating_sub(r)))?;
    let sep = nu.sqrt() / 4.0;
    let max_draws = max_draws.unwrap_or_else(|| default_max_draws(n_target));
    let (g, complete) = greedy_pack(
        n_target,
        max_draws,
        stream,
        |s| {
            let block = haar_unitary(d - r, &mut s.rng());
            let state = rank_r_state(&RankRParams::new(nu, r, d, &block)?)?;
            Ok(Candidate {
                unitary: block,
                key: state.into_matrix(),
                unary_ok: true,
            })
        },
        |a, b| Ok(trace_norm(&(a - b))? > sep),
    )?;
    let result = PackingResult {
        kind: PackingKind::RankR { nu, r },
        d,
        unitaries: g.accepted.into_iter().map(|(u, _)| u).collect(),
        n_draws: g.draws,
        n_rejected: g.rejected,
        constraints: vec![ConstraintReport {
            name: "pairwise trace distance".into(),
            threshold: sep,
            rejections: g.pair_rejections,
            vacuous: false,
        }],
        verification: None,
    };
    finish(result, complete, &[]).map_err(|e| with_target(e, n_target))
}

/// Exhaustive re-verification from the stored unitaries, rebuilding every
/// state through the ensemble constructors. `povms` is only consulted for
/// chi-squared constrained packings.
pub fn verify_packing(result: &PackingResult, povms: &[Povm]) -> Result<Verification> {
    let d = result.d;
    let n = result.unitaries.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let mut v = Verification {
        pairs_checked: pairs.len(),
        extreme_pairwise: f64::NAN,
        chi2_checks: 0,
        max_chi2: None,
        violations: 0,
    };
    match &result.kind {
        PackingKind::Trace { eps } | PackingKind::Chi2Constrained { eps, .. } => {
            let states: Vec<DensityMatrix> = result
                .unitaries
                .iter()
                .map(|u| Ok(perturbed_state(&PerturbedParams::new(*eps, d, u.clone())?)))
                .collect::<Result<_>>()?;
            let dists = pairs
                .par_iter()
                .map(|&(i, j)| trace_distance(&states[i], &states[j]))
                .collect::<Result<Vec<f64>>>()?;
            v.violations += dists.iter().filter(|&&x| x <= eps / 2.0).count();
            v.extreme_pairwise = dists.iter().copied().fold(f64::INFINITY, f64::min);
            if let PackingKind::Chi2Constrained { tau, n_povms, .. } = result.kind {
                if povms.len() != n_povms {
                    return Err(Error::InvalidParameter(format!(
                        "packing was built against {n_povms} POVMs, {} supplied",
                        povms.len()
                    )));
                }
                let mut max = 0.0f64;
                for u in &result.unitaries {
                    for m in povms {
                        let f = f_chi2(*eps, d, m, u)?;
                        v.chi2_checks += 1;
                        v.violations += usize::from(f > tau);
                        max = max.max(f);
                    }
                }
                v.max_chi2 = (v.chi2_checks > 0).then_some(max);
            }
        }
        PackingKind::Shadow => {
            let q = Projector::leading(d, d / 2)?;
            let ps: Vec<ComplexMatrix> = result.unitaries.iter().map(|u| u.conjugate(q.matrix())).collect();
            let overlaps: Vec<f64> = pairs
                .par_iter()
                .map(|&(i, j)| ps[i].matmul(&ps[j]).trace().re)
                .collect();
            let cap = d as f64 / 3.0;
            v.violations += overlaps.iter().filter(|&&x| x > cap).count();
            v.extreme_pairwise = overlaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
        PackingKind::RankR { nu, r } => {
            let states: Vec<DensityMatrix> = result
                .unitaries
                .iter()
                .map(|b| rank_r_state(&RankRParams::new(*nu, *r, d, b)?))
                .collect::<Result<_>>()?;
            let dists = pairs
                .par_iter()
                .map(|&(i, j)| trace_distance(&states[i], &states[j]))
                .collect::<Result<Vec<f64>>>()?;
            let sep = nu.sqrt() / 4.0;
            v.violations += dists.iter().filter(|&&x| x <= sep).count();
            v.extreme_pairwise = dists.iter().copied().fold(f64::INFINITY, f64::min);
        }
    }
    Ok(v)
}

/// Discrimination gaps of a shadow packing used as a hard instance with
/// observables O_i = U_i Q U_i† and states ρ_i = ρ_{ε,U_i}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShadowGaps {
    /// max_i |Tr(O_i ρ_i) − (1/2 + ε/2)|.
    pub max_self_deviation: f64,
    /// max_{i≠j} Tr(O_j ρ_i).
    pub max_cross: f64,
    /// 1/2 + ε/6.
    pub cross_limit: f64,
}

pub fn shadow_discrimination_gaps(result: &PackingResult, eps: f64) -> Result<ShadowGaps> {
    if result.kind != PackingKind::Shadow {
        return Err(Error::InvalidParameter("discrimination gaps need a shadow packing".into()));
    }
    let d = result.d;
    let obs: Vec<ComplexMatrix> = result.unitaries.iter().map(rotated_half_projector).collect();
    let states: Vec<DensityMatrix> = result
        .unitaries
        .iter()
        .map(|u| Ok(perturbed_state(&PerturbedParams::new(eps, d, u.clone())?)))
        .collect::<Result<_>>()?;
    let mut g = ShadowGaps {
        max_self_deviation: 0.0,
        max_cross: f64::NEG_INFINITY,
        cross_limit: 0.5 + eps / 6.0,
    };
    for (i, rho) in states.iter().enumerate() {
        for (j, o) in obs.iter().enumerate() {
            let x = rho.expectation(o);
            if i == j {
                g.max_self_deviation = g.max_self_deviation.max((x - 0.5 - eps / 2.0).abs());
            } else {
                g.max_cross = g.max_cross.max(x);
            }
        }
    }
    Ok(g)
}

/// Empirical q-quantile of F^{χ²}(M, U) over Haar U.
pub fn f_chi2_quantile(eps: f64, m: &Povm, q: f64, trials: usize, stream: &RngStream) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) || trials == 0 {
        return Err(Error::InvalidParameter(format!("need q in [0, 1] and trials >= 1 (q={q})")));
    }
    let d = m.dim();
    let mut vals = (0..trials as u64)
        .into_par_iter()
        .map(|k| f_chi2(eps, d, m, &haar_unitary(d, &mut stream.child(k).rng())))
        .collect::<Result<Vec<f64>>>()?;
    vals.sort_by(f64::total_cmp);
    let idx = ((q * trials as f64).ceil() as usize).clamp(1, trials) - 1;
    Ok(vals[idx])
}
