use rand::Rng;
use rayon::prelude::*;

use super::config::{BoundsConfig, ExperimentConfig};
use super::report::{ExperimentReport, ReportRow, Verdict};
use super::stats::{variance_with_se, Summary};
use super::{bounds_stream, params};
use crate::ensembles::{perturbed_state, rank_r_state, PerturbedParams, RankRParams};
use crate::error::Result;
use crate::estimators::collect_shadow;
use crate::infotheory::{
    chi2_divergence, exact_expected_f_chi2, expected_chi2_bound, f_chi2, haar_first_moment_exact,
    haar_first_moment_monte_carlo, haar_odd_moments_monte_carlo, haar_outer_moment_exact,
    haar_outer_moment_monte_carlo, haar_second_moment_exact, haar_second_moment_monte_carlo, kl_divergence,
    mi_chi2_upper_bound, mutual_information, rank_r_first_moment, rank_r_second_moment_bound,
    second_moment_bound, second_moment_exact, JointPmf, JointPmf3, MatrixEstimate, Pmf,
};
use crate::linalg::{ComplexMatrix, Projector};
use crate::measurements::SimulatedState;
use crate::packing::overlap_tail_empirical;
use crate::randomness::{
    haar_unitary, random_density_matrix, random_effect, random_hermitian_contraction, random_povm, RngStream,
    StreamRng,
};

const CHUNKS: u64 = 64;

/// `trials` scalar samples, drawn from a fixed set of child streams so the
/// result does not depend on the thread count.
fn sample_values<F>(trials: usize, stream: &RngStream, f: F) -> Result<Vec<f64>>
where
    F: Fn(&mut StreamRng) -> Result<f64> + Sync,
{
    let parts = (0..CHUNKS)
        .into_par_iter()
        .map(|c| {
            let n = trials / CHUNKS as usize + usize::from((c as usize) < trials % CHUNKS as usize);
            let mut rng = stream.child(c).rng();
            (0..n).map(|_| f(&mut rng)).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(parts.concat())
}

fn moment_row(claim: &str, anchor: &str, p: String, est: &MatrixEstimate, exact: &ComplexMatrix, tol: f64) -> ReportRow {
    let err = est.max_abs_error(exact);
    let se = est.se.iter().cloned().fold(0.0, f64::max);
    ReportRow::new(claim, anchor, p, err, 0.0, Verdict::from_bool(err <= tol)).with_se(se)
}

/// Monte Carlo Haar moments against their closed forms, entrywise.
pub fn haar_moment_rows(d_list: &[usize], samples: usize, tol: f64, stream: &RngStream) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    let anchor_tol = format!("max entrywise |MC - exact| <= {tol}");
    for &d in d_list {
        let s = stream.child(d as u64);
        let half = Projector::leading(d, (d / 2).max(1))?;
        let quarter = Projector::leading(d, (d / 4).max(1))?;
        let p = |extra: &str| params(&[("d", d.to_string()), ("T", samples.to_string()), ("case", extra.into())]);

        let est = haar_first_moment_monte_carlo(&half, samples, &s.child(0));
        rows.push(moment_row(
            "haar.first_moment",
            &format!("E U Q U^dag = (r/d) I; {anchor_tol}"),
            p(&format!("r={}", half.rank())),
            &est,
            &haar_first_moment_exact(&half),
            tol,
        ));
        for (k, (p1, p2)) in [(&half, &half), (&quarter, &half)].into_iter().enumerate() {
            let est = haar_second_moment_monte_carlo(p1, p2, samples, &s.child(1 + k as u64));
            rows.push(moment_row(
                "haar.second_moment",
                &format!("E U^2 (P1 x P2) U^dag2 = r1/(d(d^2-1)) [(r2 d - 1) I + (d - r2) W]; {anchor_tol}"),
                p(&format!("r1={},r2={}", p1.rank(), p2.rank())),
                &est,
                &haar_second_moment_exact(p1, p2)?,
                tol,
            ));
        }
        for (k, (i, j)) in [(0, 0), (0, d - 1)].into_iter().enumerate() {
            if d == 1 && k == 1 {
                continue;
            }
            let est = haar_outer_moment_monte_carlo(d, i, j, samples, &s.child(3 + k as u64));
            rows.push(moment_row(
                "haar.outer_moment",
                &format!("E U|i><j|U^dag = delta_ij I/d; {anchor_tol}"),
                p(&format!("i={i},j={j}")),
                &est,
                &haar_outer_moment_exact(d, i, j)?,
                tol,
            ));
        }
        let (first, second) = haar_odd_moments_monte_carlo(d, samples, &s.child(5));
        rows.push(moment_row(
            "haar.odd_moment",
            &format!("E U = 0; {anchor_tol}"),
            p("U"),
            &first,
            &ComplexMatrix::zeros(d, d),
            tol,
        ));
        rows.push(moment_row(
            "haar.odd_moment",
            &format!("E U x U = 0; {anchor_tol}"),
            p("UxU"),
            &second,
            &ComplexMatrix::zeros(d * d, d * d),
            tol,
        ));
    }
    Ok(rows)
}

/// E_U Tr(M ρ_{ε,U})² by Monte Carlo against the closed form, and the
/// closed form against its upper bound.
pub fn second_moment_rows(b: &BoundsConfig, stream: &RngStream) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for &d in &b.second_moment_d {
        for (ei, &eps) in b.chi2_eps.iter().enumerate() {
            let cell = stream.descend(&[d as u64, ei as u64]);
            for k in 0..b.second_moment_effects {
                let m = random_effect(d, &mut cell.descend(&[k as u64, 0]).rng());
                let exact = second_moment_exact(&m, eps, d)?;
                let bound = second_moment_bound(&m, eps, d)?;
                let vals = sample_values(b.second_moment_samples, &cell.descend(&[k as u64, 1]), |rng| {
                    let rho = perturbed_state(&PerturbedParams::new(eps, d, haar_unitary(d, rng))?);
                    let x = rho.expectation(&m);
                    Ok(x * x)
                })?;
                let s = Summary::of(&vals);
                let p = params(&[("d", d.to_string()), ("eps", eps.to_string()), ("effect", k.to_string())]);
                rows.push(
                    ReportRow::new(
                        "chi2.second_moment",
                        "E_U Tr(M rho_eps,U)^2 = w^2 + eps^2 (Tr M^2 - d w^2)/(d(d^2-1)) within k se",
                        p.clone(),
                        s.mean,
                        exact,
                        Verdict::from_bool((s.mean - exact).abs() <= b.se_multiplier * s.se),
                    )
                    .with_std(s.std)
                    .with_se(s.se),
                );
                rows.push(ReportRow::new(
                    "chi2.second_moment_bound",
                    "closed-form second moment <= w^2 (1 + eps^2/(d+1) min{1, 1/(w(d-1))})",
                    p,
                    exact,
                    bound,
                    Verdict::from_bool(exact <= bound + 1e-12),
                ));
            }
        }
    }
    Ok(rows)
}

/// E_U F^{χ²}(M, U) for random POVMs against ε²/(d+1)·min{1, ℓ/(d−1)}, the
/// pointwise cap ε², and the exact expectation.
pub fn chi2_bound_rows(b: &BoundsConfig, stream: &RngStream) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for &d in &b.chi2_d {
        for (ei, &eps) in b.chi2_eps.iter().enumerate() {
            for &ell_cfg in &b.chi2_ell {
                let ell = if ell_cfg == 0 { d } else { ell_cfg };
                let cell = stream.descend(&[d as u64, ei as u64, ell as u64]);
                let bound = expected_chi2_bound(eps, d, ell)?;
                let (mut worst_mean, mut worst_se) = (f64::NEG_INFINITY, 0.0);
                let (mut violations, mut max_f, mut max_z, mut max_exact) = (0usize, 0.0f64, 0.0f64, f64::NEG_INFINITY);
                let mut pointwise_violations = 0usize;
                for k in 0..b.chi2_povms {
                    let povm = random_povm(d, ell, &mut cell.descend(&[k as u64, 0]).rng())?;
                    let vals = sample_values(b.chi2_unitaries, &cell.descend(&[k as u64, 1]), |rng| {
                        f_chi2(eps, d, &povm, &haar_unitary(d, rng))
                    })?;
                    let s = Summary::of(&vals);
                    if s.mean > worst_mean {
                        worst_mean = s.mean;
                        worst_se = s.se;
                    }
                    violations += usize::from(s.mean > bound + b.se_multiplier * s.se);
                    let vmax = vals.iter().cloned().fold(0.0, f64::max);
                    max_f = max_f.max(vmax);
                    pointwise_violations += vals.iter().filter(|&&v| v > eps * eps + 1e-12).count();
                    let exact = exact_expected_f_chi2(eps, &povm)?;
                    max_exact = max_exact.max(exact);
                    if s.se > 0.0 {
                        max_z = max_z.max((s.mean - exact).abs() / s.se);
                    }
                }
                let p = params(&[
                    ("d", d.to_string()),
                    ("eps", eps.to_string()),
                    ("ell", ell.to_string()),
                    ("povms", b.chi2_povms.to_string()),
                    ("T", b.chi2_unitaries.to_string()),
                ]);
                rows.push(
                    ReportRow::new(
                        "chi2.expected_bound",
                        "E_U F_chi2 <= eps^2/(d+1) min{1, ell/(d-1)} + k se for every POVM",
                        format!("{p};violations={violations}"),
                        worst_mean,
                        bound,
                        Verdict::from_bool(violations == 0),
                    )
                    .with_se(worst_se),
                );
                rows.push(ReportRow::new(
                    "chi2.pointwise",
                    "F_chi2(M, U) <= eps^2 for every sample",
                    format!("{p};violations={pointwise_violations}"),
                    max_f,
                    eps * eps,
                    Verdict::from_bool(pointwise_violations == 0),
                ));
                rows.push(ReportRow::new(
                    "chi2.exact_mean",
                    "Monte Carlo E_U F_chi2 matches eps^2/(d(d^2-1)) sum(Tr M^2/w - d w) within k se",
                    p.clone(),
                    max_z,
                    0.0,
                    Verdict::from_bool(max_z <= b.se_multiplier),
                ));
                rows.push(ReportRow::new(
                    "chi2.exact_mean_bound",
                    "closed-form E_U F_chi2 <= eps^2/(d+1) min{1, ell/(d-1)}",
                    p,
                    max_exact,
                    bound,
                    Verdict::from_bool(max_exact <= bound + 1e-12),
                ));
            }
        }
    }
    Ok(rows)
}

/// First moment and second-moment bound for rank-r states.
pub fn rank_r_moment_rows(b: &BoundsConfig, stream: &RngStream) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for (c, &(d, r, nu)) in b.rank_r_cells.iter().enumerate() {
        let cell = stream.child(c as u64);
        for k in 0..b.second_moment_effects {
            let m = random_effect(d, &mut cell.descend(&[k as u64, 0]).rng());
            let first = rank_r_first_moment(&m, nu, r, d)?;
            let second = rank_r_second_moment_bound(&m, nu, r, d)?;
            let vals = sample_values(b.second_moment_samples, &cell.descend(&[k as u64, 1]), |rng| {
                let block = haar_unitary(d - r, rng);
                Ok(rank_r_state(&RankRParams::new(nu, r, d, &block)?)?.expectation(&m))
            })?;
            let s1 = Summary::of(&vals);
            let sq: Vec<f64> = vals.iter().map(|x| x * x).collect();
            let s2 = Summary::of(&sq);
            let p = params(&[("d", d.to_string()), ("r", r.to_string()), ("nu", nu.to_string()), ("effect", k.to_string())]);
            rows.push(
                ReportRow::new(
                    "rank_r.first_moment",
                    "E_U Tr(M sigma) = (1-nu)/r Tr(M G0) + nu/(d-r) Tr(M G1) within k se",
                    p.clone(),
                    s1.mean,
                    first,
                    Verdict::from_bool((s1.mean - first).abs() <= b.se_multiplier * s1.se),
                )
                .with_se(s1.se),
            );
            rows.push(
                ReportRow::new(
                    "rank_r.second_moment",
                    "E_U Tr(M sigma)^2 <= rank-r second-moment bound + k se",
                    p,
                    s2.mean,
                    second,
                    Verdict::from_bool(s2.mean <= second + b.se_multiplier * s2.se),
                )
                .with_se(s2.se),
            );
        }
    }
    Ok(rows)
}

/// Tail frequencies of Tr(Π₁UΠ₂U†) around r₁r₂/d.
pub fn overlap_tail_rows(b: &BoundsConfig, stream: &RngStream) -> Result<Vec<ReportRow>> {
    let (d, r1, r2, t) = b.overlap;
    let tails = overlap_tail_empirical(d, r1, r2, t, b.overlap_trials, stream)?;
    let p = params(&[
        ("d", d.to_string()),
        ("r1", r1.to_string()),
        ("r2", r2.to_string()),
        ("t", t.to_string()),
        ("trials", b.overlap_trials.to_string()),
    ]);
    let k = b.se_multiplier;
    let lo_se = tails.binomial_se(tails.lower_bound);
    let hi_se = tails.binomial_se(tails.upper_bound);
    Ok(vec![
        ReportRow::new(
            "overlap.lower_tail",
            "P[Tr(P1 U P2 U^dag) <= (1-t) r1 r2/d] <= exp(-r1 r2 t^2/2) + k binomial se",
            p.clone(),
            tails.lower_freq,
            tails.lower_bound,
            Verdict::from_bool(tails.lower_freq <= tails.lower_bound + k * lo_se),
        )
        .with_se(lo_se),
        ReportRow::new(
            "overlap.upper_tail",
            "P[Tr(P1 U P2 U^dag) >= (1+t) r1 r2/d] <= exp(-r1 r2 t^2/4) + k binomial se",
            p.clone(),
            tails.upper_freq,
            tails.upper_bound,
            Verdict::from_bool(tails.upper_freq <= tails.upper_bound + k * hi_se),
        )
        .with_se(hi_se),
        ReportRow::new(
            "overlap.mean",
            "mean overlap (reported; exact value r1 r2/d)",
            p,
            tails.mean_overlap,
            (r1 * r2) as f64 / d as f64,
            Verdict::Info,
        ),
    ])
}

/// Var[Tr(X ρ̂)] of single-shot shadow estimators against 3 Tr X².
pub fn variance_cap_rows(b: &BoundsConfig, stream: &RngStream) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for &d in &b.variance_d {
        let s = stream.child(d as u64);
        let mut rng = s.child(0).rng();
        let rho = random_density_matrix(d, &mut rng);
        let mut oracle = SimulatedState::new(rho, &s.child(1));
        let sketch = collect_shadow(&mut oracle, b.variance_shots, &s.child(2))?;
        for k in 0..b.variance_observables {
            let x = random_hermitian_contraction(d, &mut rng);
            let (var, se) = variance_with_se(&sketch.values(&x)?);
            let cap = 3.0 * x.trace_product(&x).re;
            rows.push(
                ReportRow::new(
                    "shadow.variance_cap",
                    "Var[Tr(X rho_hat)] <= 3 Tr X^2 within k se",
                    params(&[("d", d.to_string()), ("X", k.to_string()), ("shots", b.variance_shots.to_string())]),
                    var,
                    cap,
                    Verdict::from_bool(var <= cap + b.variance_se_multiplier * se),
                )
                .with_se(se),
            );
        }
    }
    Ok(rows)
}

fn random_pmf(n: usize, zero_prob: f64, rng: &mut StreamRng) -> Result<Pmf> {
    let mut w: Vec<f64> = (0..n)
        .map(|_| if rng.random::<f64>() < zero_prob { 0.0 } else { rng.random::<f64>() })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        w[rng.random_range(0..n)] = 1.0;
    }
    Pmf::from_weights(&w)
}

/// Largest violation and violation count of `lhs <= rhs` over instances.
fn property_row(claim: &str, anchor: &str, instances: usize, tol: f64, gaps: &[f64]) -> ReportRow {
    let worst = gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let violations = gaps.iter().filter(|&&g| g > tol).count();
    ReportRow::new(
        claim,
        anchor,
        params(&[("instances", instances.to_string()), ("tol", tol.to_string()), ("violations", violations.to_string())]),
        worst,
        0.0,
        Verdict::from_bool(violations == 0),
    )
}

/// Divergence and mutual-information identities on random discrete
/// instances. Each gap is lhs − rhs of an inequality (or |lhs − rhs| for an
/// identity) and must not exceed the tolerance.
pub fn info_property_rows(instances: usize, tol: f64, stream: &RngStream) -> Result<Vec<ReportRow>> {
    let gaps = |tag: u64, f: &(dyn Fn(&mut StreamRng) -> Result<f64> + Sync)| -> Result<Vec<f64>> {
        (0..instances as u64)
            .into_par_iter()
            .map(|i| f(&mut stream.descend(&[tag, i]).rng()))
            .collect()
    };
    let size = |rng: &mut StreamRng| rng.random_range(2..=8usize);

    let kl = gaps(0, &|rng| {
        let n = size(rng);
        let p = random_pmf(n, 0.3, rng)?;
        let q = random_pmf(n, 0.0, rng)?;
        Ok(kl_divergence(&p, &q)? - chi2_divergence(&p, &q)? / std::f64::consts::LN_2)
    })?;
    let mi = gaps(1, &|rng| {
        let (nx, ny) = (size(rng), size(rng));
        let prior = random_pmf(nx, 0.0, rng)?;
        let channel: Vec<Pmf> = (0..nx).map(|_| random_pmf(ny, 0.3, rng)).collect::<Result<_>>()?;
        let j = JointPmf::from_channel(&prior, &channel)?;
        let q = random_pmf(ny, 0.0, rng)?;
        let i = mutual_information(&j);
        let with_q = i - mi_chi2_upper_bound(&j, &q)?;
        let with_marginal = i - mi_chi2_upper_bound(&j, &j.marginal_y())?;
        Ok(with_q.max(with_marginal))
    })?;
    let chain = gaps(2, &|rng| {
        let (nx, n1, n2) = (size(rng), size(rng), size(rng));
        let w: Vec<f64> = (0..nx * n1 * n2)
            .map(|_| if rng.random::<f64>() < 0.2 { 0.0 } else { rng.random::<f64>() })
            .collect();
        let j = JointPmf3::new(nx, n1, n2, Pmf::from_weights(&w)?.probs().to_vec())?;
        let lhs = mutual_information(&j.x_vs_both());
        let rhs = mutual_information(&j.x_vs_first()) + j.conditional_mi_second_given_first();
        Ok((lhs - rhs).abs())
    })?;
    let sub = gaps(3, &|rng| {
        let (nx, n1, n2) = (size(rng), size(rng), size(rng));
        let prior = random_pmf(nx, 0.0, rng)?;
        let ch1: Vec<Pmf> = (0..nx).map(|_| random_pmf(n1, 0.3, rng)).collect::<Result<_>>()?;
        let ch2: Vec<Pmf> = (0..nx).map(|_| random_pmf(n2, 0.3, rng)).collect::<Result<_>>()?;
        let j = JointPmf3::conditionally_independent(&prior, &ch1, &ch2)?;
        Ok(mutual_information(&j.x_vs_both())
            - mutual_information(&j.x_vs_first())
            - mutual_information(&j.x_vs_second()))
    })?;
    Ok(vec![
        property_row("info.kl_chi2", "D_KL(p||q) <= D_chi2(p||q)/ln 2", instances, tol, &kl),
        property_row("info.mi_chi2", "I(X:Y) <= E_x D_chi2(p_Y|x || q)/ln 2 for any q", instances, tol, &mi),
        property_row("info.chain_rule", "I(X:Y1Y2) = I(X:Y1) + I(X:Y2|Y1)", instances, tol, &chain),
        property_row(
            "info.subadditivity",
            "I(X:Y1Y2) <= I(X:Y1) + I(X:Y2) when Y1, Y2 are independent given X",
            instances,
            tol,
            &sub,
        ),
    ])
}

/// Every Monte-Carlo-versus-closed-form check, one row per cell. Failures
/// become verdicts, not errors.
pub fn run_bound_suite(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let b = &cfg.bounds;
    let mut rep = ExperimentReport::new("bounds", cfg.seed, b)?;
    let base = bounds_stream(cfg.seed);
    let sections = [
        haar_moment_rows(&b.moment_d, b.moment_samples, b.moment_tol, &base.child(0))?,
        second_moment_rows(b, &base.child(1))?,
        chi2_bound_rows(b, &base.child(2))?,
        rank_r_moment_rows(b, &base.child(3))?,
        overlap_tail_rows(b, &base.child(4))?,
        variance_cap_rows(b, &base.child(5))?,
        info_property_rows(b.info_instances, b.info_tol, &base.child(6))?,
    ];
    for row in sections.into_iter().flatten() {
        rep.push(row);
    }
    Ok(rep)
}
