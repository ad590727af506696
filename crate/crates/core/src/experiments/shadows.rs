use rand::Rng;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::report::{ExperimentReport, ReportRow, Verdict};
use super::{experiment_stream, params, tags};
use crate::ensembles::{perturbed_state, rotated_half_projector, PerturbedParams};
use crate::error::{Error, Result};
use crate::estimators::{
    collect_shadow, heuristic_shadow_plan, shadow_median_of_means, shadow_sample_mean, shadow_sample_plan,
};
use crate::linalg::{ComplexMatrix, DensityMatrix};
use crate::measurements::SimulatedState;
use crate::packing::{build_shadow_packing, shadow_discrimination_gaps};
use crate::randomness::{random_density_matrix, random_effect};

fn max_error(est: &[f64], truth: &[f64]) -> f64 {
    est.iter().zip(truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Sample-mean shadows at the Bernstein plan: per trial, a random state and
/// M random effects; a trial succeeds when every estimate is within ε.
pub fn run_shadow_end_to_end(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let sc = &cfg.shadows;
    let mut rep = ExperimentReport::new("shadows", cfg.seed, sc)?;
    let (d, m, eps) = (sc.d, sc.observables, sc.eps);
    let planned = shadow_sample_plan(d, m, eps)? as usize;
    let n = sc.n.unwrap_or(planned);
    let base = experiment_stream(cfg.seed, tags::SHADOWS);

    let outcomes = (0..sc.trials as u64)
        .into_par_iter()
        .map(|t| {
            let s = base.child(t);
            let mut rng = s.child(0).rng();
            let rho = random_density_matrix(d, &mut rng);
            let obs: Vec<ComplexMatrix> = (0..m).map(|_| random_effect(d, &mut rng)).collect();
            let truth: Vec<f64> = obs.iter().map(|o| rho.expectation(o)).collect();
            let mut oracle = SimulatedState::new(rho, &s.child(1));
            let sketch = collect_shadow(&mut oracle, n, &s.child(2))?;
            let mean_err = max_error(&shadow_sample_mean(&sketch, &obs)?, &truth);
            let mom_err = if sc.mom_groups <= n {
                max_error(&shadow_median_of_means(&sketch, &obs, sc.mom_groups)?, &truth)
            } else {
                f64::NAN
            };
            Ok((mean_err, mom_err))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;

    let mean_ok = outcomes.iter().filter(|o| o.0 <= eps).count();
    let mom_ok = outcomes.iter().filter(|o| o.1 <= eps).count();
    let p = params(&[
        ("d", d.to_string()),
        ("M", m.to_string()),
        ("eps", eps.to_string()),
        ("n", n.to_string()),
        ("trials", sc.trials.to_string()),
    ]);
    rep.push(ReportRow::new(
        "shadow.end_to_end",
        &format!("max_i |estimate_i - Tr(O_i rho)| <= eps in at least {} trials", sc.min_successes),
        p.clone(),
        mean_ok as f64,
        sc.min_successes as f64,
        Verdict::from_bool(mean_ok >= sc.min_successes),
    ));
    rep.push(ReportRow::new(
        "shadow.end_to_end_mom",
        &format!("median of {} means: trials with max error <= eps (reported)", sc.mom_groups),
        p,
        mom_ok as f64,
        sc.min_successes as f64,
        Verdict::Info,
    ));
    rep.details = serde_json::json!({
        "planned_n": planned,
        "heuristic_n": heuristic_shadow_plan(d, m, eps),
        "n": n,
        "max_errors": outcomes.iter().map(|o| o.0).collect::<Vec<_>>(),
        "max_errors_mom": outcomes.iter().map(|o| o.1).collect::<Vec<_>>(),
    });
    Ok(rep)
}

/// Index of the profile closest to `est` in the max norm; ties go to the
/// lowest index.
fn nearest_profile(est: &[f64], profiles: &[Vec<f64>]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, p) in profiles.iter().enumerate() {
        let dist = max_error(est, p);
        if dist < best.1 {
            best = (i, dist);
        }
    }
    best.0
}

/// Builds a shadow packing of `m_states` members, checks the gap identities
/// of the hard instance, then identifies a hidden ρ_x from sample-mean
/// shadow estimates of the observables O_i = U_i Q U_i†.
pub fn run_shadow_discrimination(d: usize, m_states: usize, eps: f64, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    if d < 2 || d % 2 == 1 || m_states < 2 || !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "discrimination needs even d >= 2, at least 2 states and eps in (0, 1] (d={d}, M={m_states}, eps={eps})"
        )));
    }
    let dc = &cfg.discriminate;
    let mut rep = ExperimentReport::new(
        "discriminate",
        cfg.seed,
        &serde_json::json!({ "d": d, "states": m_states, "eps": eps, "discriminate": dc }),
    )?;
    let base = experiment_stream(cfg.seed, tags::DISCRIMINATE);
    let packing = build_shadow_packing(d, m_states, dc.max_draws, &base.child(0))?;
    let gaps = shadow_discrimination_gaps(&packing, eps)?;
    let p = params(&[("d", d.to_string()), ("M", m_states.to_string()), ("eps", eps.to_string())]);
    rep.push(ReportRow::new(
        "discriminate.self_gap",
        "Tr(O_i rho_i) = 1/2 + eps/2 within tolerance",
        p.clone(),
        gaps.max_self_deviation,
        0.0,
        Verdict::from_bool(gaps.max_self_deviation <= dc.gap_tol),
    ));
    rep.push(ReportRow::new(
        "discriminate.cross_gap",
        "Tr(O_j rho_i) <= 1/2 + eps/6 for i != j",
        p.clone(),
        gaps.max_cross,
        gaps.cross_limit,
        Verdict::from_bool(gaps.max_cross <= gaps.cross_limit + dc.gap_tol),
    ));

    let obs: Vec<ComplexMatrix> = packing.unitaries.iter().map(rotated_half_projector).collect();
    let states: Vec<DensityMatrix> = packing
        .unitaries
        .iter()
        .map(|u| Ok(perturbed_state(&PerturbedParams::new(eps, d, u.clone())?)))
        .collect::<Result<_>>()?;
    let profiles: Vec<Vec<f64>> = states
        .iter()
        .map(|rho| obs.iter().map(|o| rho.expectation(o)).collect())
        .collect();

    // Accuracy ε/12 per observable separates the self and cross values.
    let n_plan = heuristic_shadow_plan(d, m_states, eps / 12.0) as usize;
    let grid = if dc.n_grid.is_empty() { vec![0, n_plan] } else { dc.n_grid.clone() };
    let mut accuracy = Vec::new();
    for (g, &n) in grid.iter().enumerate() {
        let cell = base.descend(&[1, g as u64]);
        let hits = (0..dc.trials as u64)
            .into_par_iter()
            .map(|t| {
                let s = cell.child(t);
                let x = s.child(0).rng().random_range(0..m_states);
                let guess = if n == 0 {
                    s.child(1).rng().random_range(0..m_states)
                } else {
                    let mut oracle = SimulatedState::new(states[x].clone(), &s.child(1));
                    let sketch = collect_shadow(&mut oracle, n, &s.child(2))?;
                    nearest_profile(&shadow_sample_mean(&sketch, &obs)?, &profiles)
                };
                Ok(usize::from(guess == x))
            })
            .collect::<Result<Vec<usize>>>()?
            .into_iter()
            .sum::<usize>();
        let trials = dc.trials as f64;
        let acc = hits as f64 / trials;
        let pn = format!("{p};n={n};trials={}", dc.trials);
        let row = if n == 0 {
            let chance = 1.0 / m_states as f64;
            let se = (chance * (1.0 - chance) / trials).sqrt();
            ReportRow::new(
                "discriminate.chance",
                "with no samples the accuracy is 1/M within 4 binomial se",
                pn,
                acc,
                chance,
                Verdict::from_bool((acc - chance).abs() <= 4.0 * se),
            )
            .with_se(se)
        } else if n >= n_plan {
            ReportRow::new(
                "discriminate.accuracy",
                &format!("identification accuracy >= {} at n >= 12 d ln(M)/(eps/12)^2", dc.min_accuracy),
                pn,
                acc,
                dc.min_accuracy,
                Verdict::from_bool(acc >= dc.min_accuracy),
            )
        } else {
            ReportRow::new(
                "discriminate.accuracy",
                "identification accuracy below the planned n (reported)",
                pn,
                acc,
                dc.min_accuracy,
                Verdict::Info,
            )
        };
        rep.push(row);
        accuracy.push(serde_json::json!({ "n": n, "accuracy": acc }));
    }
    rep.details = serde_json::json!({
        "n_plan": n_plan,
        "packing_draws": packing.n_draws,
        "gaps": gaps,
        "accuracy": accuracy,
    });
    Ok(rep)
}
