use super::config::ExperimentConfig;
use super::report::{ExperimentReport, ReportRow, Verdict};
use super::{experiment_stream, params, tags};
use crate::error::{Error, Result};
use crate::infotheory::uninformative_threshold;
use crate::measurements::Povm;
use crate::packing::{
    build_chi2_constrained_packing, build_rank_r_packing, build_shadow_packing, build_trace_packing,
    shadow_discrimination_gaps, verify_packing, PackingResult,
};
use crate::randomness::random_povm;

/// Rows for one packing attempt. Exhaustion and failed verification become
/// failing rows; other errors propagate.
fn packing_rows(
    label: &str,
    p: String,
    target: usize,
    built: Result<PackingResult>,
    povms: &[Povm],
    separation: (&str, f64, bool),
) -> Result<(Vec<ReportRow>, Option<PackingResult>, serde_json::Value)> {
    let (anchor, threshold, is_upper) = separation;
    let result = match built {
        Ok(r) => r,
        Err(Error::PackingExhausted { draws, accepted, partial, .. }) => {
            let row = ReportRow::new(
                &format!("packing.{label}.size"),
                "greedy packing reaches the target size within the draw budget",
                format!("{p};draws={draws}"),
                accepted as f64,
                target as f64,
                Verdict::Fail,
            );
            let details = serde_json::json!({ "exhausted": true, "partial": partial });
            return Ok((vec![row], None, details));
        }
        Err(Error::VerificationFailed(msg)) => {
            let row = ReportRow::new(
                &format!("packing.{label}.verification"),
                "built packing passes re-verification",
                format!("{p};error={msg}"),
                f64::NAN,
                0.0,
                Verdict::Fail,
            );
            return Ok((vec![row], None, serde_json::json!({ "verification_error": msg })));
        }
        Err(e) => return Err(e),
    };
    let mut result = result;
    let v = verify_packing(&result, povms)?;
    result.verification = Some(v.clone());
    let ok_sep = v.violations == 0
        && if is_upper {
            v.extreme_pairwise <= threshold
        } else {
            v.extreme_pairwise > threshold
        };
    let mut rows = vec![
        ReportRow::new(
            &format!("packing.{label}.size"),
            "greedy packing reaches the target size within the draw budget",
            format!("{p};draws={};acceptance={:.4}", result.n_draws, result.acceptance_rate()),
            result.len() as f64,
            target as f64,
            Verdict::from_bool(result.len() == target),
        ),
        ReportRow::new(
            &format!("packing.{label}.separation"),
            anchor,
            format!("{p};pairs={};violations={}", v.pairs_checked, v.violations),
            v.extreme_pairwise,
            threshold,
            Verdict::from_bool(ok_sep),
        ),
    ];
    if let Some(max) = v.max_chi2 {
        let c = result.constraints.iter().find(|c| c.name == "chi-squared cap");
        let (tau, vacuous) = c.map(|c| (c.threshold, c.vacuous)).unwrap_or((f64::NAN, false));
        rows.push(ReportRow::new(
            &format!("packing.{label}.chi2_cap"),
            "F_chi2(M_i, U) <= tau for every member and POVM",
            format!("{p};checks={};vacuous={vacuous}", v.chi2_checks),
            max,
            tau,
            Verdict::from_bool(max <= tau),
        ));
    }
    let details = serde_json::json!({
        "n_draws": result.n_draws,
        "n_rejected": result.n_rejected,
        "constraints": result.constraints,
        "verification": v,
        "packing": result,
    });
    Ok((rows, Some(result), details))
}

/// Builds every configured packing, re-verifies it exhaustively from the
/// stored unitaries and checks the shadow gap identities.
pub fn run_packing_suite(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let pc = &cfg.packing;
    let mut rep = ExperimentReport::new("packing", cfg.seed, pc)?;
    let base = experiment_stream(cfg.seed, tags::PACKING);
    let mut details = serde_json::Map::new();
    let mut record = |kind: &str, det: serde_json::Value| {
        let entry = details.entry(kind).or_insert_with(|| serde_json::Value::Array(Vec::new()));
        if let serde_json::Value::Array(v) = entry {
            v.push(det);
        }
    };

    for (i, &(d, eps, n)) in pc.trace.iter().enumerate() {
        let p = params(&[("d", d.to_string()), ("eps", eps.to_string()), ("N", n.to_string())]);
        let built = build_trace_packing(d, eps, n, pc.max_draws, &base.descend(&[0, i as u64]));
        let sep = ("min pairwise ||rho_i - rho_j||_1 > eps/2", eps / 2.0, false);
        let (rows, _, det) = packing_rows("trace", p, n, built, &[], sep)?;
        rows.into_iter().for_each(|r| rep.push(r));
        record("trace", det);
    }

    for (i, &(d, n)) in pc.shadow.iter().enumerate() {
        let p = params(&[("d", d.to_string()), ("N", n.to_string())]);
        let built = build_shadow_packing(d, n, pc.max_draws, &base.descend(&[1, i as u64]));
        let sep = ("max pairwise Tr(P_i P_j) <= d/3", d as f64 / 3.0, true);
        let (rows, result, det) = packing_rows("shadow", p.clone(), n, built, &[], sep)?;
        rows.into_iter().for_each(|r| rep.push(r));
        record("shadow", det);
        if let Some(result) = result {
            let eps = pc.shadow_eps;
            let g = shadow_discrimination_gaps(&result, eps)?;
            let p = format!("{p};eps={eps}");
            rep.push(ReportRow::new(
                "packing.shadow.self_gap",
                "Tr(O_i rho_i) = 1/2 + eps/2 within tolerance",
                p.clone(),
                g.max_self_deviation,
                0.0,
                Verdict::from_bool(g.max_self_deviation <= pc.gap_tol),
            ));
            rep.push(ReportRow::new(
                "packing.shadow.cross_gap",
                "Tr(O_j rho_i) <= 1/2 + eps/6 for i != j",
                p,
                g.max_cross,
                g.cross_limit,
                Verdict::from_bool(g.max_cross <= g.cross_limit + pc.gap_tol),
            ));
        }
    }

    for (i, &(d, r, nu, n)) in pc.rank_r.iter().enumerate() {
        let p = params(&[("d", d.to_string()), ("r", r.to_string()), ("nu", nu.to_string()), ("N", n.to_string())]);
        let built = build_rank_r_packing(d, r, nu, n, pc.max_draws, &base.descend(&[2, i as u64]));
        let sep = ("min pairwise ||sigma_i - sigma_j||_1 > sqrt(nu)/4", nu.sqrt() / 4.0, false);
        let (rows, _, det) = packing_rows("rank_r", p, n, built, &[], sep)?;
        rows.into_iter().for_each(|r| rep.push(r));
        record("rank_r", det);
    }

    for (i, &(d, eps, n, n_povms, ell)) in pc.chi2.iter().enumerate() {
        let s = base.descend(&[3, i as u64]);
        let povms: Vec<Povm> = (0..n_povms)
            .map(|k| random_povm(d, ell, &mut s.descend(&[0, k as u64]).rng()))
            .collect::<Result<_>>()?;
        let tau = uninformative_threshold(eps, d, n_povms, Some(ell));
        let p = params(&[
            ("d", d.to_string()),
            ("eps", eps.to_string()),
            ("N", n.to_string()),
            ("povms", n_povms.to_string()),
            ("ell", ell.to_string()),
            ("tau", format!("{tau:.4e}")),
        ]);
        let built = build_chi2_constrained_packing(d, eps, n, &povms, tau, pc.max_draws, &s.child(1));
        let sep = ("min pairwise ||rho_i - rho_j||_1 > eps/2", eps / 2.0, false);
        let (rows, _, det) = packing_rows("chi2", p, n, built, &povms, sep)?;
        rows.into_iter().for_each(|r| rep.push(r));
        record("chi2", det);
    }
    rep.details = serde_json::Value::Object(details);
    Ok(rep)
}
