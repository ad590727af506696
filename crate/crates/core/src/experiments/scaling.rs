use rayon::prelude::*;
use serde::Serialize;

use super::config::{EstimatorKind, ExperimentConfig};
use super::report::{ExperimentReport, ReportRow, Verdict};
use super::stats::{linear_fit, median};
use super::{experiment_stream, params, tags};
use crate::error::{Error, Result};
use crate::estimators::{pauli_tomography, random_basis_tomography};
use crate::linalg::{trace_norm, DensityMatrix};
use crate::measurements::SimulatedState;
use crate::randomness::{random_density_matrix, RngStream};

/// Growth factor used to bracket the threshold around the extrapolated guess.
const BRACKET_STEP: f64 = 1.25;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Probe {
    /// Copies (random-basis) or shots per Pauli (Pauli).
    pub size: u64,
    pub median_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NStarSearch {
    pub d: usize,
    /// Smallest probed size whose median trace distance is at most ε.
    pub size: u64,
    /// Total copies consumed by one run at `size`.
    pub n_star: u64,
    pub probes: Vec<Probe>,
}

fn copies_per_unit(kind: EstimatorKind, d: usize) -> u64 {
    match kind {
        EstimatorKind::RandomBasis => 1,
        EstimatorKind::Pauli => (d * d - 1) as u64,
    }
}

/// Median over trials of ‖ρ̂ − ρ‖₁ at a given size. Trial t always uses the
/// same state and the same streams, so probes at different sizes share
/// their randomness.
fn median_distance(kind: EstimatorKind, d: usize, size: u64, trials: usize, stream: &RngStream) -> Result<f64> {
    let q = d.trailing_zeros() as usize;
    let dist = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let s = stream.child(t);
            let rho: DensityMatrix = random_density_matrix(d, &mut s.child(0).rng());
            let mut oracle = SimulatedState::new(rho.clone(), &s.child(1));
            let est = match kind {
                EstimatorKind::RandomBasis => random_basis_tomography(&mut oracle, size as usize, &s.child(2))?,
                EstimatorKind::Pauli => pauli_tomography(&mut oracle, q, size)?,
            };
            trace_norm(&(&est.raw - rho.matrix()))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(median(&dist))
}

/// Searches for the smallest size with median trace distance ≤ ε: a pilot
/// probe, extrapolation with median ∝ size^(−1/2), bracketing by factors of
/// 1.25, then geometric bisection until hi/lo ≤ `ratio`.
pub fn find_n_star(
    kind: EstimatorKind,
    d: usize,
    eps: f64,
    trials: usize,
    budget: usize,
    ratio: f64,
    stream: &RngStream,
) -> Result<NStarSearch> {
    if kind == EstimatorKind::Pauli && !d.is_power_of_two() {
        return Err(Error::InvalidParameter(format!("Pauli tomography needs d = 2^q, got {d}")));
    }
    let mut probes = Vec::new();
    let probe = |size: u64, probes: &mut Vec<Probe>| -> Result<bool> {
        if probes.len() >= budget {
            return Err(Error::BisectionExhausted(budget));
        }
        let m = median_distance(kind, d, size, trials, stream)?;
        probes.push(Probe { size, median_distance: m });
        Ok(m <= eps)
    };

    let df = d as f64;
    let pilot = ((df * df / (eps * eps)).ceil() as u64).max(4);
    // 0 marks an unknown end of the bracket.
    let (mut lo, mut hi) = (0u64, 0u64);
    let record = |size: u64, ok: bool, lo: &mut u64, hi: &mut u64| {
        if ok {
            if *hi == 0 || size < *hi {
                *hi = size;
            }
        } else if size > *lo {
            *lo = size;
        }
    };
    let ok0 = probe(pilot, &mut probes)?;
    record(pilot, ok0, &mut lo, &mut hi);
    let guess = ((pilot as f64 * (probes[0].median_distance / eps).powi(2)).ceil() as u64).max(1);
    if guess != pilot {
        let ok1 = probe(guess, &mut probes)?;
        record(guess, ok1, &mut lo, &mut hi);
    }
    if hi != 0 && lo >= hi {
        lo = 0;
    }
    while hi == 0 {
        let next = ((lo as f64 * BRACKET_STEP).ceil() as u64).max(lo + 1);
        if probe(next, &mut probes)? {
            hi = next;
        } else {
            lo = next;
        }
    }
    while lo == 0 && hi > 1 {
        let next = ((hi as f64 / BRACKET_STEP).floor() as u64).min(hi - 1);
        if next == 0 {
            break;
        }
        if probe(next, &mut probes)? {
            hi = next;
        } else {
            lo = next;
        }
    }
    while lo > 0 && hi as f64 / lo as f64 > ratio && hi - lo > 1 {
        let mid = ((lo as f64 * hi as f64).sqrt().round() as u64).clamp(lo + 1, hi - 1);
        if probe(mid, &mut probes)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(NStarSearch {
        d,
        size: hi,
        n_star: hi * copies_per_unit(kind, d),
        probes,
    })
}

/// Size at which Markov's inequality forces P[‖ρ̂−ρ‖₁ > ε] ≤ 1/4, using
/// ‖A‖₁ ≤ √d‖A‖_F and the worst-case Frobenius risk.
fn markov_cap(kind: EstimatorKind, d: usize, eps: f64) -> f64 {
    let df = d as f64;
    let risk_times_size = match kind {
        EstimatorKind::RandomBasis => df * df + df - 1.0,
        EstimatorKind::Pauli => df,
    };
    4.0 * df * risk_times_size / (eps * eps) * copies_per_unit(kind, d) as f64
}

/// For each d, bisects n* and fits the slope of ln n* against ln d.
pub fn run_scaling_fit(kind: EstimatorKind, eps: f64, d_list: &[usize], cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    if d_list.len() < 3 {
        return Err(Error::Config(format!("scaling fit needs at least 3 dimensions, got {}", d_list.len())));
    }
    let sc = &cfg.scaling;
    let name = format!("scaling-{}", kind.name());
    let mut rep = ExperimentReport::new(
        &name,
        cfg.seed,
        &serde_json::json!({ "eps": eps, "d_list": d_list, "scaling": sc }),
    )?;
    let base = experiment_stream(cfg.seed, tags::SCALING).child(kind as u64);
    let label = kind.name().replace('-', "_");
    let mut searches = Vec::new();
    for &d in d_list {
        let s = find_n_star(kind, d, eps, sc.trials, sc.budget, sc.ratio, &base.descend(&[d as u64, 0]))?;
        let cap = markov_cap(kind, d, eps);
        rep.push(ReportRow::new(
            &format!("scaling.{label}.n_star"),
            "n* at most the Markov sample size for median trace distance <= eps",
            params(&[("d", d.to_string()), ("eps", eps.to_string())]),
            s.n_star as f64,
            cap,
            Verdict::from_bool(s.n_star as f64 <= cap),
        ));
        searches.push(s);
    }
    let x: Vec<f64> = searches.iter().map(|s| (s.d as f64).ln()).collect();
    let y: Vec<f64> = searches.iter().map(|s| (s.n_star as f64).ln()).collect();
    let fit = linear_fit(&x, &y)?;
    let (lo, hi, law) = match kind {
        EstimatorKind::RandomBasis => (sc.random_basis_slope.0, sc.random_basis_slope.1, 3.0),
        EstimatorKind::Pauli => (sc.pauli_slope.0, sc.pauli_slope.1, 4.0),
    };
    rep.push(
        ReportRow::new(
            &format!("scaling.{label}.slope"),
            &format!("slope of ln n* vs ln d in [{lo}, {hi}]"),
            params(&[
                ("d_list", format!("{d_list:?}").replace(", ", " ")),
                ("eps", eps.to_string()),
                ("ci95", format!("{:.3}..{:.3}", fit.slope_ci.0, fit.slope_ci.1)),
            ]),
            fit.slope,
            law,
            Verdict::from_bool((lo..=hi).contains(&fit.slope)),
        )
        .with_se(fit.slope_se),
    );

    let mut details = serde_json::json!({ "fit": fit, "searches": searches });
    if kind == EstimatorKind::RandomBasis && sc.sensitivity_d > 0 {
        let d = sc.sensitivity_d;
        let s1 = find_n_star(kind, d, eps, sc.trials, sc.budget, sc.ratio, &base.descend(&[d as u64, 0]))?;
        let s2 = find_n_star(kind, d, 2.0 * eps, sc.trials, sc.budget, sc.ratio, &base.descend(&[d as u64, 0]))?;
        let r = s1.n_star as f64 / s2.n_star as f64;
        let (a, b) = sc.sensitivity_range;
        rep.push(ReportRow::new(
            &format!("scaling.{label}.eps_sensitivity"),
            &format!("n*(eps)/n*(2 eps) in [{a}, {b}]"),
            params(&[("d", d.to_string()), ("eps", eps.to_string())]),
            r,
            4.0,
            Verdict::from_bool((a..=b).contains(&r)),
        ));
        details["sensitivity"] = serde_json::json!([s1, s2]);
    }
    rep.details = details;
    Ok(rep)
}
