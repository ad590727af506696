use rayon::prelude::*;

use super::config::{EstimatorKind, ExperimentConfig};
use super::report::{ExperimentReport, ReportRow, Verdict};
use super::stats::Summary;
use super::{experiment_stream, params, tags};
use crate::error::Result;
use crate::estimators::{pauli_tomography, random_basis_tomography, TomographyEstimate};
use crate::linalg::{trace_norm, DensityMatrix};
use crate::measurements::SimulatedState;
use crate::randomness::{random_density_matrix, RngStream};

/// Per-trial squared Frobenius and trace-norm errors.
fn run_trials<F>(rho: &DensityMatrix, trials: usize, cell: &RngStream, estimate: F) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(&mut SimulatedState, &RngStream) -> Result<TomographyEstimate> + Sync,
{
    let errs = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let s = cell.descend(&[1, t]);
            let mut oracle = SimulatedState::new(rho.clone(), &s.child(0));
            let est = estimate(&mut oracle, &s.child(1))?;
            let tn = trace_norm(&(&est.raw - rho.matrix()))?;
            Ok((est.frobenius_error_sq(rho), tn))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    Ok(errs.into_iter().unzip())
}

/// Frobenius risk of the chosen estimator per configured cell, compared with
/// (d²+d−1−Tr ρ²)/n for random-basis tomography and with the exact value
/// (d−Tr ρ²)/s and the bound d/s for Pauli tomography.
pub fn run_risk_curve(kind: EstimatorKind, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let rc = &cfg.risk;
    let name = format!("risk-{}", kind.name());
    let mut rep = ExperimentReport::new(&name, cfg.seed, rc)?;
    let base = experiment_stream(cfg.seed, tags::RISK).child(kind as u64);
    let k_se = rc.se_multiplier;
    // (d, n or s, state index, mean Frobenius risk) for the 1/n check.
    let mut means: Vec<(usize, f64, usize, Summary)> = Vec::new();

    match kind {
        EstimatorKind::RandomBasis => {
            for (c, &(d, n)) in rc.random_basis_cells.iter().enumerate() {
                for k in 0..rc.random_states {
                    let cell = base.descend(&[c as u64, k as u64]);
                    let rho = random_density_matrix(d, &mut cell.child(0).rng());
                    let (fro, tn) = run_trials(&rho, rc.trials, &cell, |o, s| random_basis_tomography(o, n, s))?;
                    let (sf, st) = (Summary::of(&fro), Summary::of(&tn));
                    let df = d as f64;
                    let theory = (df * df + df - 1.0 - rho.purity()) / n as f64;
                    let p = params(&[("d", d.to_string()), ("n", n.to_string()), ("state", k.to_string())]);
                    rep.push(
                        ReportRow::new(
                            "risk.random_basis.frobenius",
                            "E||rho_hat - rho||_F^2 = (d^2+d-1-Tr rho^2)/n",
                            p.clone(),
                            sf.mean,
                            theory,
                            Verdict::from_bool((sf.mean - theory).abs() <= k_se * sf.se),
                        )
                        .with_std(sf.std)
                        .with_se(sf.se),
                    );
                    rep.push(
                        ReportRow::new(
                            "risk.random_basis.trace",
                            "E||rho_hat - rho||_1 <= sqrt(d (d^2+d-1-Tr rho^2)/n)",
                            p,
                            st.mean,
                            (df * theory).sqrt(),
                            Verdict::from_bool(st.mean <= (df * theory).sqrt() + k_se * st.se),
                        )
                        .with_std(st.std)
                        .with_se(st.se),
                    );
                    means.push((d, n as f64, k, sf));
                }
            }
        }
        EstimatorKind::Pauli => {
            for (c, &(q, s)) in rc.pauli_cells.iter().enumerate() {
                let d = 1usize << q;
                let df = d as f64;
                let sf64 = s as f64;
                // Random states first, then the maximally mixed state.
                for k in 0..=rc.random_states {
                    let cell = base.descend(&[c as u64, k as u64]);
                    let mixed = k == rc.random_states;
                    let rho = if mixed {
                        DensityMatrix::maximally_mixed(d)
                    } else {
                        random_density_matrix(d, &mut cell.child(0).rng())
                    };
                    let (fro, tn) = run_trials(&rho, rc.trials, &cell, |o, _| pauli_tomography(o, q, s))?;
                    let (sf, st) = (Summary::of(&fro), Summary::of(&tn));
                    let state = if mixed { "mixed".to_string() } else { k.to_string() };
                    let p = params(&[("q", q.to_string()), ("d", d.to_string()), ("s", s.to_string()), ("state", state)]);
                    let exact = (df - rho.purity()) / sf64;
                    rep.push(
                        ReportRow::new(
                            "risk.pauli.bound",
                            "E||rho_hat - rho||_F^2 <= d/s",
                            p.clone(),
                            sf.mean,
                            df / sf64,
                            Verdict::from_bool(sf.mean <= df / sf64 + k_se * sf.se),
                        )
                        .with_std(sf.std)
                        .with_se(sf.se),
                    );
                    rep.push(
                        ReportRow::new(
                            "risk.pauli.exact",
                            "E||rho_hat - rho||_F^2 = (d - Tr rho^2)/s",
                            p.clone(),
                            sf.mean,
                            exact,
                            Verdict::from_bool((sf.mean - exact).abs() <= k_se * sf.se),
                        )
                        .with_std(sf.std)
                        .with_se(sf.se),
                    );
                    if mixed {
                        let target = (df * df - 1.0) / (df * sf64);
                        rep.push(
                            ReportRow::new(
                                "risk.pauli.mixed",
                                "E||rho_hat - 1/d||_F^2 = (d^2-1)/(d s) within relative tolerance",
                                p.clone(),
                                sf.mean,
                                target,
                                Verdict::from_bool((sf.mean / target - 1.0).abs() <= rc.mixed_rel_tol),
                            )
                            .with_se(sf.se),
                        );
                    }
                    rep.push(
                        ReportRow::new(
                            "risk.pauli.trace",
                            "mean trace-norm error (reported)",
                            p,
                            st.mean,
                            (df * exact).sqrt(),
                            Verdict::Info,
                        )
                        .with_std(st.std)
                        .with_se(st.se),
                    );
                    let key = if mixed { usize::MAX } else { k };
                    means.push((d, sf64, key, sf));
                }
            }
        }
    }

    // Pairs of cells with equal d and state and n₂ = 2n₁.
    for a in &means {
        for b in &means {
            if a.0 == b.0 && a.2 == b.2 && b.1 == 2.0 * a.1 {
                let ratio = b.3.mean / a.3.mean;
                rep.push(ReportRow::new(
                    &format!("risk.{}.doubling", kind.name().replace('-', "_")),
                    "doubling n halves the Frobenius risk within 15%",
                    params(&[("d", a.0.to_string()), ("n", format!("{}->{}", a.1, b.1))]),
                    ratio,
                    0.5,
                    Verdict::from_bool((ratio / 0.5 - 1.0).abs() <= 0.15),
                ));
            }
        }
    }
    Ok(rep)
}
