//! Sample-complexity lower bounds from Fano's inequality combined with
//! per-sample mutual information caps.
//!
//! Each bound is n ≥ I_required / I_per_sample where I_required is the Fano
//! requirement for the packing in use and I_per_sample is the chi-squared cap
//! on the information one measurement can carry about the packing index.

use std::f64::consts::LN_2;

use serde::Serialize;

use crate::error::{Error, Result};

use super::chi2::{expected_chi2_bound, Chi2TailParams};

/// Packing of perturbed states: ln N = d²/32.
pub const FULL_RANK_PACKING_RATE: f64 = 1.0 / 32.0;

/// Rank-r packing: ln N = κ·r·d. Only the order rd is known; the constant is
/// chosen to match the full-rank rate.
pub const RANK_R_PACKING_RATE: f64 = 1.0 / 32.0;

/// ν = 64ε² makes the rank-r family a 2ε-packing.
pub const RANK_R_NU_PER_EPS2: f64 = 64.0;

/// ln N of the chi-squared constrained packing: d²/32 − ln 2.
pub fn adaptive_packing_log_states(d: usize) -> f64 {
    let df = d as f64;
    FULL_RANK_PACKING_RATE * df * df - LN_2
}

/// (1 − p_e)·log₂N − 1 bits.
pub fn fano_required_mi(n_states: f64, p_error: f64) -> Result<f64> {
    if !(n_states >= 2.0) || !(0.0..1.0).contains(&p_error) {
        return Err(Error::InvalidParameter(format!(
            "Fano needs N >= 2 and p_e in [0, 1) (N={n_states}, p_e={p_error})"
        )));
    }
    Ok((1.0 - p_error) * n_states.log2() - 1.0)
}

/// Fano requirement from log₂N directly; N < 2 requires nothing.
fn required_from_log2(log2_states: f64, p_error: f64) -> f64 {
    if log2_states < 1.0 {
        return 0.0;
    }
    ((1.0 - p_error) * log2_states - 1.0).max(0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LowerBoundQuery {
    pub d: usize,
    pub eps: f64,
    /// Maximum number of outcomes per measurement; `None` for unbounded.
    pub ell: Option<usize>,
    /// ln m for adaptive measurements chosen from a set of m settings.
    pub log_m: Option<f64>,
    /// State rank for the bounded-rank family.
    pub rank: Option<usize>,
    /// Decoding error allowed by Fano.
    pub p_error: f64,
}

impl LowerBoundQuery {
    pub fn new(d: usize, eps: f64) -> Self {
        Self {
            d,
            eps,
            ell: None,
            log_m: None,
            rank: None,
            p_error: 1.0 / 3.0,
        }
    }

    pub fn with_outcomes(mut self, ell: usize) -> Self {
        self.ell = Some(ell);
        self
    }

    pub fn with_log_m(mut self, log_m: f64) -> Self {
        self.log_m = Some(log_m);
        self
    }

    pub fn with_rank(mut self, r: usize) -> Self {
        self.rank = Some(r);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LowerBound {
    /// Which regime produced the bound.
    pub label: String,
    /// Asymptotic law, constants dropped.
    pub scaling_law: String,
    pub scaling_value: f64,
    /// Constant-explicit sample threshold: required_mi_bits / info_per_sample_bits.
    pub threshold: f64,
    pub log2_states: f64,
    pub required_mi_bits: f64,
    pub info_per_sample_bits: f64,
    pub notes: Vec<String>,
}

fn check_common(q: &LowerBoundQuery) -> Result<()> {
    if q.d < 2 {
        return Err(Error::InvalidParameter(format!("d must be at least 2, got {}", q.d)));
    }
    if !(q.eps > 0.0 && q.eps < 1.0) {
        return Err(Error::InvalidParameter(format!("eps must lie in (0, 1), got {}", q.eps)));
    }
    if q.ell == Some(0) {
        return Err(Error::InvalidParameter("ell must be at least 1".into()));
    }
    if let Some(lm) = q.log_m {
        if !(lm >= 0.0) || !lm.is_finite() {
            return Err(Error::InvalidParameter(format!("log_m must be finite and >= 0, got {lm}")));
        }
    }
    if !(0.0..1.0).contains(&q.p_error) {
        return Err(Error::InvalidParameter(format!("p_error must lie in [0, 1), got {}", q.p_error)));
    }
    Ok(())
}

/// Per-sample information cap (bits) for measurements chosen adaptively from
/// m = e^{log_m} settings: (α + ε²ln(3m)/(Cd²))/ln 2, capped by the sup bound ε².
fn adaptive_info_bits(d: usize, eps: f64, ell: Option<usize>, log_m: f64, notes: &mut Vec<String>) -> f64 {
    let df = d as f64;
    let tail = match ell {
        Some(l) => Chi2TailParams::with_outcomes(eps, d, l, 0.0),
        None => Chi2TailParams::arbitrary(eps, d, 0.0),
    };
    let level = tail.alpha + eps * eps * (3f64.ln() + log_m) / (tail.big_c * df * df);
    if level >= eps * eps {
        notes.push("uninformative level is at least eps^2; using the sup bound eps^2 instead".into());
    }
    level.min(eps * eps) / LN_2
}

/// Tomography sample lower bound for the regime selected by the query.
pub fn sample_lower_bound(q: &LowerBoundQuery) -> Result<LowerBound> {
    check_common(q)?;
    let (d, eps) = (q.d, q.eps);
    let df = d as f64;
    let mut notes = Vec::new();

    match (q.rank, q.log_m) {
        (Some(_), Some(_)) => Err(Error::InvalidParameter(
            "the bounded-rank bound covers nonadaptive measurements only; drop log_m or rank".into(),
        )),
        (Some(r), None) => {
            if r == 0 || 3 * r > d {
                return Err(Error::InvalidParameter(format!("need 1 <= r <= d/3 (r={r}, d={d})")));
            }
            if eps >= 0.125 {
                return Err(Error::InvalidParameter(format!("bounded-rank bound needs eps < 1/8, got {eps}")));
            }
            let nu = RANK_R_NU_PER_EPS2 * eps * eps;
            if nu >= 0.25 {
                notes.push(format!(
                    "nu = 64 eps^2 = {nu:.4} is outside the packing range nu < 1/4 (eps < 1/16)"
                ));
            }
            let (rf, k) = (r as f64, (d - r) as f64);
            let unbounded = 4.0 * nu / (rf * LN_2);
            let info = match q.ell {
                Some(l) => unbounded.min(4.0 * nu * l as f64 / (rf * k * LN_2)),
                None => unbounded,
            };
            let log2_states = RANK_R_PACKING_RATE * rf * df / LN_2;
            notes.push("rank-r packing constant is an assumed 1/32 (only the order rd is known)".into());
            let required = required_from_log2(log2_states, q.p_error);
            let (law, value) = match q.ell {
                Some(l) if (l as f64) < k => ("r^2 d^2/(ell eps^2)", rf * rf * df * df / (l as f64 * eps * eps)),
                _ => ("r^2 d/eps^2", rf * rf * df / (eps * eps)),
            };
            Ok(LowerBound {
                label: "nonadaptive, bounded rank".into(),
                scaling_law: law.into(),
                scaling_value: value,
                threshold: required / info,
                log2_states,
                required_mi_bits: required,
                info_per_sample_bits: info,
                notes,
            })
        }
        (None, None) => {
            let ell = q.ell.unwrap_or(usize::MAX);
            let info = expected_chi2_bound(eps, d, ell)? / LN_2;
            let log2_states = FULL_RANK_PACKING_RATE * df * df / LN_2;
            let required = required_from_log2(log2_states, q.p_error);
            let (law, value) = match q.ell {
                Some(l) if l + 1 < d => ("d^4/(ell eps^2)", df.powi(4) / (l as f64 * eps * eps)),
                _ => ("d^3/eps^2", df.powi(3) / (eps * eps)),
            };
            Ok(LowerBound {
                label: if q.ell.is_some() {
                    "nonadaptive, bounded outcomes".into()
                } else {
                    "nonadaptive".into()
                },
                scaling_law: law.into(),
                scaling_value: value,
                threshold: required / info,
                log2_states,
                required_mi_bits: required,
                info_per_sample_bits: info,
                notes,
            })
        }
        (None, Some(log_m)) => {
            let info = adaptive_info_bits(d, eps, q.ell, log_m, &mut notes);
            let log2_states = adaptive_packing_log_states(d).max(0.0) / LN_2;
            let required = required_from_log2(log2_states, q.p_error);
            let (law, value) = match q.ell {
                Some(l) => (
                    "d^4/((ell + ln m) eps^2)",
                    df.powi(4) / ((l as f64 + log_m) * eps * eps),
                ),
                None => ("d^3/(eps^2 (1 + ln m/d))", df.powi(3) / (eps * eps * (1.0 + log_m / df))),
            };
            Ok(LowerBound {
                label: if q.ell.is_some() {
                    "adaptive from m settings, bounded outcomes".into()
                } else {
                    "adaptive from m settings".into()
                },
                scaling_law: law.into(),
                scaling_value: value,
                threshold: required / info,
                log2_states,
                required_mi_bits: required,
                info_per_sample_bits: info,
                notes,
            })
        }
    }
}

/// Shadow tomography lower bound for M observables with measurements chosen
/// adaptively from m = e^{log_m} settings. The hard instance uses min(M, e^{d²/32})
/// states.
pub fn shadow_lower_bound(d: usize, eps: f64, n_observables: f64, log_m: f64, p_error: f64) -> Result<LowerBound> {
    let q = LowerBoundQuery {
        d,
        eps,
        ell: None,
        log_m: Some(log_m),
        rank: None,
        p_error,
    };
    check_common(&q)?;
    if !(n_observables >= 1.0) {
        return Err(Error::InvalidParameter(format!("need M >= 1, got {n_observables}")));
    }
    let df = d as f64;
    let mut notes = Vec::new();
    let ln_states = n_observables.ln().min(FULL_RANK_PACKING_RATE * df * df);
    if n_observables.ln() > FULL_RANK_PACKING_RATE * df * df {
        notes.push("M exceeds the packing size e^{d^2/32}; the bound plateaus".into());
    }
    let log2_states = ln_states / LN_2;
    let required = required_from_log2(log2_states, p_error);
    let info = adaptive_info_bits(d, eps, None, log_m, &mut notes);
    Ok(LowerBound {
        label: "shadow tomography, adaptive from m settings".into(),
        scaling_law: "d min{d^2, ln M}/(eps^2 (1 + ln m/d))".into(),
        scaling_value: df * (df * df).min(n_observables.ln()) / (eps * eps * (1.0 + log_m / df)),
        threshold: required / info,
        log2_states,
        required_mi_bits: required,
        info_per_sample_bits: info,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fano_examples() {
        assert!((fano_required_mi(1024.0, 1.0 / 3.0).unwrap() - 17.0 / 3.0).abs() < 1e-12);
        assert_eq!(fano_required_mi(2.0, 0.0).unwrap(), 0.0);
        let mut last = f64::INFINITY;
        for k in 0..10 {
            let v = fano_required_mi(500.0, k as f64 / 10.0).unwrap();
            assert!(v < last);
            last = v;
        }
        assert!(fano_required_mi(1.0, 0.1).is_err());
        assert!(fano_required_mi(4.0, 1.0).is_err());
    }

    #[test]
    fn nonadaptive_threshold_scales_as_cube() {
        let a = sample_lower_bound(&LowerBoundQuery::new(64, 0.1)).unwrap();
        let b = sample_lower_bound(&LowerBoundQuery::new(128, 0.1)).unwrap();
        assert!((b.scaling_value / a.scaling_value - 8.0).abs() < 1e-12);
        let ratio = b.threshold / a.threshold;
        assert!((ratio / 8.0 - 1.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn two_outcome_ratio_is_half_of_d_minus_one() {
        for d in [8, 16, 32] {
            let full = sample_lower_bound(&LowerBoundQuery::new(d, 0.2)).unwrap();
            let two = sample_lower_bound(&LowerBoundQuery::new(d, 0.2).with_outcomes(2)).unwrap();
            let expect = (d as f64 - 1.0) / 2.0;
            assert!((two.threshold / full.threshold / expect - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn halving_eps_quadruples() {
        for q in [
            LowerBoundQuery::new(16, 0.2),
            LowerBoundQuery::new(16, 0.2).with_outcomes(3),
            LowerBoundQuery::new(18, 0.1).with_rank(3),
            LowerBoundQuery::new(16, 0.02).with_log_m(2.0),
        ] {
            let a = sample_lower_bound(&q).unwrap();
            let mut h = q.clone();
            h.eps /= 2.0;
            let b = sample_lower_bound(&h).unwrap();
            assert!((b.threshold / a.threshold - 4.0).abs() < 1e-9, "{q:?}");
            assert!((b.scaling_value / a.scaling_value - 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn inconsistent_query_is_rejected() {
        let q = LowerBoundQuery::new(12, 0.05).with_rank(2).with_log_m(1.0);
        assert!(sample_lower_bound(&q).is_err());
        assert!(sample_lower_bound(&LowerBoundQuery::new(12, 0.2).with_rank(2)).is_err());
        assert!(sample_lower_bound(&LowerBoundQuery::new(12, 0.1).with_rank(5)).is_err());
        assert!(sample_lower_bound(&LowerBoundQuery::new(12, 0.1).with_outcomes(0)).is_err());
    }

    #[test]
    fn rank_r_notes_packing_range() {
        let b = sample_lower_bound(&LowerBoundQuery::new(30, 0.1).with_rank(2)).unwrap();
        assert!(b.notes.iter().any(|n| n.contains("nu < 1/4")));
        let b = sample_lower_bound(&LowerBoundQuery::new(30, 0.05).with_rank(2)).unwrap();
        assert!(!b.notes.iter().any(|n| n.contains("nu < 1/4")));
        assert_eq!(b.scaling_law, "r^2 d/eps^2");
    }

    #[test]
    fn adaptive_bound_caps_at_sup_bound() {
        // At small d the tail level exceeds eps^2 and the sup bound takes over.
        let b = sample_lower_bound(&LowerBoundQuery::new(8, 0.1).with_log_m(1.0)).unwrap();
        assert!((b.info_per_sample_bits - 0.01 / LN_2).abs() < 1e-15);
        assert!(!b.notes.is_empty());
    }

    #[test]
    fn shadow_bound_plateaus() {
        let small = shadow_lower_bound(16, 0.1, 1e3, 0.0, 1.0 / 3.0).unwrap();
        let big = shadow_lower_bound(16, 0.1, 1e300, 0.0, 1.0 / 3.0).unwrap();
        let bigger = shadow_lower_bound(16, 0.1, f64::MAX, 0.0, 1.0 / 3.0).unwrap();
        assert!(small.threshold < big.threshold);
        assert_eq!(big.threshold, bigger.threshold);
        assert!((big.log2_states - 8.0 / LN_2).abs() < 1e-12);
    }
}
