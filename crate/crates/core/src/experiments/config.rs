//! TOML configuration for every experiment. Each section falls back to its
//! defaults, and unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    RandomBasis,
    Pauli,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::RandomBasis => "random-basis",
            Self::Pauli => "pauli",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub risk: RiskConfig,
    pub scaling: ScalingConfig,
    pub bounds: BoundsConfig,
    pub shadows: ShadowsConfig,
    pub discriminate: DiscriminateConfig,
    pub packing: PackingConfig,
    pub tables: TablesConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 20240601,
            risk: RiskConfig::default(),
            scaling: ScalingConfig::default(),
            bounds: BoundsConfig::default(),
            shadows: ShadowsConfig::default(),
            discriminate: DiscriminateConfig::default(),
            packing: PackingConfig::default(),
            tables: TablesConfig::default(),
        }
    }
}

/// Frobenius-risk curves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiskConfig {
    pub estimators: Vec<EstimatorKind>,
    /// (d, n) cells for random-basis tomography.
    pub random_basis_cells: Vec<(usize, usize)>,
    /// (q, s) cells for Pauli tomography; d = 2^q.
    pub pauli_cells: Vec<(usize, u64)>,
    pub trials: usize,
    /// Random states per cell; the maximally mixed state is always added for
    /// Pauli cells.
    pub random_states: usize,
    /// Cells must agree with the theory within this many standard errors.
    pub se_multiplier: f64,
    /// Relative tolerance for the maximally mixed Pauli identity.
    pub mixed_rel_tol: f64,
}

impl Default for RiskConfig {
    fn default() -> Self {
        Self {
            estimators: vec![EstimatorKind::RandomBasis, EstimatorKind::Pauli],
            random_basis_cells: vec![(2, 50), (4, 100), (8, 200)],
            pauli_cells: vec![(1, 50), (2, 50), (2, 200)],
            trials: 200,
            random_states: 3,
            se_multiplier: 3.0,
            mixed_rel_tol: 0.1,
        }
    }
}

/// Bisection for the smallest n with median trace distance ≤ ε.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingConfig {
    pub estimators: Vec<EstimatorKind>,
    pub eps: f64,
    pub random_basis_d: Vec<usize>,
    pub pauli_d: Vec<usize>,
    /// Trials per probe; the median over these is compared with ε.
    pub trials: usize,
    /// Probe budget per dimension.
    pub budget: usize,
    /// Bisection stops once hi/lo is at most this ratio.
    pub ratio: f64,
    pub random_basis_slope: (f64, f64),
    pub pauli_slope: (f64, f64),
    /// Dimension for the n*(ε)/n*(2ε) row; 0 skips it.
    pub sensitivity_d: usize,
    pub sensitivity_range: (f64, f64),
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            estimators: vec![EstimatorKind::RandomBasis, EstimatorKind::Pauli],
            eps: 0.3,
            random_basis_d: vec![2, 4, 8, 16],
            pauli_d: vec![2, 4, 8],
            trials: 31,
            budget: 20,
            ratio: 1.05,
            random_basis_slope: (2.5, 3.5),
            pauli_slope: (3.4, 4.6),
            sensitivity_d: 4,
            sensitivity_range: (3.0, 5.0),
        }
    }
}

/// Monte Carlo checks against closed forms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    pub moment_d: Vec<usize>,
    pub moment_samples: usize,
    pub moment_tol: f64,
    pub chi2_d: Vec<usize>,
    pub chi2_eps: Vec<f64>,
    /// Outcome counts; 0 stands for ℓ = d.
    pub chi2_ell: Vec<usize>,
    pub chi2_povms: usize,
    pub chi2_unitaries: usize,
    /// (d, r₁, r₂, t) for the overlap tail check.
    pub overlap: (usize, usize, usize, f64),
    pub overlap_trials: usize,
    pub variance_d: Vec<usize>,
    pub variance_observables: usize,
    pub variance_shots: usize,
    pub variance_se_multiplier: f64,
    /// Effects per (d, ε) cell for the second-moment identities.
    pub second_moment_d: Vec<usize>,
    pub second_moment_effects: usize,
    pub second_moment_samples: usize,
    /// (d, r, ν) cells for the rank-r moment bounds.
    pub rank_r_cells: Vec<(usize, usize, f64)>,
    pub info_instances: usize,
    pub info_tol: f64,
    /// Monte Carlo cells pass within this many standard errors.
    pub se_multiplier: f64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            moment_d: vec![2, 4, 8],
            moment_samples: 100_000,
            moment_tol: 0.01,
            chi2_d: vec![4, 8],
            chi2_eps: vec![0.3, 0.5],
            chi2_ell: vec![2, 0],
            chi2_povms: 50,
            chi2_unitaries: 10_000,
            overlap: (16, 8, 8, 0.5),
            overlap_trials: 10_000,
            variance_d: vec![2, 4, 8],
            variance_observables: 20,
            variance_shots: 100_000,
            variance_se_multiplier: 3.0,
            second_moment_d: vec![4, 8],
            second_moment_effects: 5,
            second_moment_samples: 20_000,
            rank_r_cells: vec![(9, 3, 0.2), (12, 2, 0.1)],
            info_instances: 1000,
            info_tol: 1e-9,
            se_multiplier: 5.0,
        }
    }
}

/// End-to-end shadow tomography at the Bernstein plan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShadowsConfig {
    pub d: usize,
    pub observables: usize,
    pub eps: f64,
    pub trials: usize,
    /// Successful trials required for a pass.
    pub min_successes: usize,
    /// Median-of-means groups reported alongside the sample mean.
    pub mom_groups: usize,
    /// Overrides the planned n.
    pub n: Option<usize>,
}

impl Default for ShadowsConfig {
    fn default() -> Self {
        Self {
            d: 8,
            observables: 50,
            eps: 0.2,
            trials: 30,
            min_successes: 20,
            mom_groups: 10,
            n: None,
        }
    }
}

/// Identification of a hidden packing state from shadow estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscriminateConfig {
    pub d: usize,
    pub states: usize,
    pub eps: f64,
    pub trials: usize,
    /// Sample sizes; empty means {0, n_plan} with the accuracy-ε/12 plan.
    pub n_grid: Vec<usize>,
    pub min_accuracy: f64,
    pub gap_tol: f64,
    pub max_draws: Option<u64>,
}

impl Default for DiscriminateConfig {
    fn default() -> Self {
        Self {
            d: 8,
            states: 20,
            eps: 0.6,
            trials: 30,
            n_grid: Vec::new(),
            min_accuracy: 0.9,
            gap_tol: 1e-9,
            max_draws: None,
        }
    }
}

/// Greedy packings and their re-verification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PackingConfig {
    /// (d, ε, N) cells for the trace packing.
    pub trace: Vec<(usize, f64, usize)>,
    /// (d, N) cells for the shadow packing.
    pub shadow: Vec<(usize, usize)>,
    /// ε used for the shadow gap identities.
    pub shadow_eps: f64,
    /// (d, r, ν, N) cells for the rank-r packing.
    pub rank_r: Vec<(usize, usize, f64, usize)>,
    /// (d, ε, N, number of POVMs, ℓ) cells for the χ²-constrained packing at
    /// the uninformative threshold.
    pub chi2: Vec<(usize, f64, usize, usize, usize)>,
    pub max_draws: Option<u64>,
    pub gap_tol: f64,
}

impl Default for PackingConfig {
    fn default() -> Self {
        Self {
            trace: vec![(8, 0.5, 50)],
            shadow: vec![(8, 20)],
            shadow_eps: 0.5,
            rank_r: vec![(9, 3, 0.16, 20)],
            chi2: vec![(8, 0.5, 20, 5, 2)],
            max_draws: None,
            gap_tol: 1e-9,
        }
    }
}

/// Rows of the lower-bound tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TablesConfig {
    pub d: Vec<usize>,
    pub eps: Vec<f64>,
    /// Outcome counts for the ℓ-outcome rows.
    pub ell: Vec<usize>,
    /// Adaptive rounds m; the adaptive row uses ln m.
    pub rounds: Vec<f64>,
    pub rank: Vec<usize>,
    /// Observable counts M for the shadow rows.
    pub observables: Vec<f64>,
    pub p_error: f64,
    /// Allowed gap between the fitted d-slope of a threshold and that of its
    /// asymptotic law.
    pub slope_tol: f64,
}

impl Default for TablesConfig {
    fn default() -> Self {
        Self {
            d: vec![16, 32, 64, 128],
            eps: vec![0.1],
            ell: vec![2],
            rounds: vec![1e3],
            rank: vec![2],
            observables: vec![1e3],
            p_error: 1.0 / 3.0,
            slope_tol: 0.35,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Small workloads for a fast end-to-end smoke run. Verdicts use the
    /// same tolerances, so some Monte Carlo cells may be noisier.
    pub fn quick() -> Self {
        let mut c = Self::default();
        c.risk.random_basis_cells = vec![(2, 50), (4, 100)];
        c.risk.pauli_cells = vec![(1, 50), (2, 50)];
        c.risk.trials = 100;
        c.risk.random_states = 1;
        c.scaling.random_basis_d = vec![2, 4, 8];
        c.scaling.pauli_d = vec![2, 4, 8];
        c.scaling.trials = 15;
        c.scaling.eps = 0.5;
        c.scaling.sensitivity_d = 0;
        c.bounds.moment_d = vec![2, 4];
        c.bounds.moment_samples = 20_000;
        c.bounds.moment_tol = 0.03;
        c.bounds.chi2_d = vec![4];
        c.bounds.chi2_eps = vec![0.5];
        c.bounds.chi2_povms = 5;
        c.bounds.chi2_unitaries = 2000;
        c.bounds.overlap = (8, 4, 4, 0.5);
        c.bounds.overlap_trials = 2000;
        c.bounds.variance_d = vec![2, 4];
        c.bounds.variance_observables = 5;
        c.bounds.variance_shots = 20_000;
        c.bounds.second_moment_d = vec![4];
        c.bounds.second_moment_effects = 2;
        c.bounds.second_moment_samples = 5000;
        c.bounds.rank_r_cells = vec![(9, 3, 0.2)];
        c.bounds.info_instances = 100;
        c.shadows.d = 4;
        c.shadows.observables = 10;
        c.shadows.eps = 0.3;
        c.shadows.trials = 10;
        c.shadows.min_successes = 7;
        c.discriminate.d = 6;
        c.discriminate.states = 6;
        c.discriminate.trials = 10;
        c.packing.trace = vec![(6, 0.5, 10)];
        c.packing.shadow = vec![(8, 8)];
        c.packing.rank_r = vec![(9, 3, 0.16, 6)];
        c.packing.chi2 = vec![(6, 0.5, 6, 3, 2)];
        c
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let r = &self.risk;
        if r.trials < 2 {
            return bad("risk.trials must be at least 2".into());
        }
        if r.random_basis_cells.iter().any(|&(d, n)| d == 0 || n == 0) {
            return bad("risk.random_basis_cells needs d, n >= 1".into());
        }
        if r.pauli_cells.iter().any(|&(q, s)| q == 0 || q > 6 || s == 0) {
            return bad("risk.pauli_cells needs 1 <= q <= 6 and s >= 1".into());
        }
        let s = &self.scaling;
        if !(s.eps > 0.0 && s.eps < 2.0) {
            return bad(format!("scaling.eps must lie in (0, 2), got {}", s.eps));
        }
        if s.trials == 0 || s.budget < 2 || !(s.ratio > 1.0) {
            return bad("scaling needs trials >= 1, budget >= 2 and ratio > 1".into());
        }
        if s.random_basis_d.iter().chain(&s.pauli_d).any(|&d| d < 2) {
            return bad("scaling dimensions must be at least 2".into());
        }
        if s.pauli_d.iter().any(|d| !d.is_power_of_two()) {
            return bad("scaling.pauli_d entries must be powers of two".into());
        }
        let b = &self.bounds;
        if b.moment_samples < 2 || b.chi2_unitaries < 2 || b.overlap_trials == 0 || b.variance_shots < 2 {
            return bad("bounds sample counts must be at least 2".into());
        }
        if b.chi2_d.iter().chain(&b.second_moment_d).any(|d| d % 2 == 1) {
            return bad("bounds.chi2_d and bounds.second_moment_d must be even".into());
        }
        if b.chi2_eps.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return bad("bounds.chi2_eps entries must lie in (0, 1]".into());
        }
        let (d, r1, r2, _) = b.overlap;
        if r1 > d || r2 > d {
            return bad("bounds.overlap ranks exceed d".into());
        }
        if b.rank_r_cells.iter().any(|&(d, r, nu)| r == 0 || 3 * r > d || !(0.0..=1.0).contains(&nu)) {
            return bad("bounds.rank_r_cells need 1 <= r <= d/3 and nu in [0, 1]".into());
        }
        let sh = &self.shadows;
        if sh.d < 2 || sh.observables == 0 || sh.trials == 0 || !(sh.eps > 0.0) {
            return bad("shadows needs d >= 2, observables >= 1, trials >= 1, eps > 0".into());
        }
        if sh.min_successes > sh.trials {
            return bad("shadows.min_successes exceeds shadows.trials".into());
        }
        let di = &self.discriminate;
        if di.d < 2 || di.d % 2 == 1 || di.states < 2 || di.trials == 0 || !(di.eps > 0.0 && di.eps <= 1.0) {
            return bad("discriminate needs even d >= 2, states >= 2, trials >= 1, eps in (0, 1]".into());
        }
        if self.tables.d.iter().any(|&d| d < 2) || !(self.tables.slope_tol >= 0.0) {
            return bad("tables.d entries must be at least 2 and tables.slope_tol nonnegative".into());
        }
        if self.tables.eps.iter().any(|e| !(*e > 0.0)) || !(self.tables.p_error >= 0.0 && self.tables.p_error < 1.0) {
            return bad("tables.eps must be positive and tables.p_error in [0, 1)".into());
        }
        Ok(())
    }
}
