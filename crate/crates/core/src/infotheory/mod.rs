//! Divergences, entropies and mutual information (all in bits), plus the
//! chi-squared machinery, exact Haar moments and lower-bound calculators in
//! the submodules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod bounds;
mod chi2;
mod haar;

pub use bounds::{
    adaptive_packing_log_states, fano_required_mi, sample_lower_bound, shadow_lower_bound,
    LowerBound, LowerBoundQuery, FULL_RANK_PACKING_RATE, RANK_R_NU_PER_EPS2, RANK_R_PACKING_RATE,
};
pub use chi2::{
    check_effect, exact_expected_f_chi2, expected_chi2_bound, f_chi2, f_chi2_from_projector,
    rank_r_first_moment, rank_r_second_moment_bound, second_moment_bound, second_moment_exact,
    uninformative_threshold, Chi2TailParams,
};
pub use haar::{
    haar_first_moment_exact, haar_first_moment_monte_carlo, haar_odd_moments_monte_carlo,
    haar_outer_moment_exact, haar_outer_moment_monte_carlo, haar_second_moment_exact,
    haar_second_moment_monte_carlo, monte_carlo_matrix, MatrixEstimate,
};

const SUM_TOL: f64 = 1e-9;

/// A probability mass function on {0, …, n−1}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pmf {
    probs: Vec<f64>,
}

impl Pmf {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        validate_mass(&probs)?;
        Ok(Self { probs })
    }

    /// Normalises nonnegative weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidParameter("weights must be nonnegative with positive sum".into()));
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

fn validate_mass(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::InvalidParameter("empty distribution".into()));
    }
    if let Some(p) = probs.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
        return Err(Error::InvalidParameter(format!("invalid probability {p}")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > SUM_TOL {
        return Err(Error::InvalidParameter(format!("probabilities sum to {total}")));
    }
    Ok(())
}

/// Joint distribution of (x, y) stored row-major: `table[x * ny + y]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointPmf {
    nx: usize,
    ny: usize,
    table: Vec<f64>,
}

impl JointPmf {
    pub fn new(nx: usize, ny: usize, table: Vec<f64>) -> Result<Self> {
        if table.len() != nx * ny {
            return Err(Error::BadShape {
                rows: nx,
                cols: ny,
                len: table.len(),
            });
        }
        validate_mass(&table)?;
        Ok(Self { nx, ny, table })
    }

    /// p(x, y) = p(x)·p(y|x) from a prior and a row-stochastic channel.
    pub fn from_channel(prior: &Pmf, channel: &[Pmf]) -> Result<Self> {
        if channel.len() != prior.len() {
            return Err(Error::DimensionMismatch {
                expected: prior.len(),
                found: channel.len(),
            });
        }
        let ny = channel[0].len();
        let mut table = Vec::with_capacity(prior.len() * ny);
        for (px, row) in prior.probs().iter().zip(channel) {
            if row.len() != ny {
                return Err(Error::DimensionMismatch {
                    expected: ny,
                    found: row.len(),
                });
            }
            table.extend(row.probs().iter().map(|q| px * q));
        }
        Self::new(prior.len(), ny, table)
    }

    pub fn product(px: &Pmf, py: &Pmf) -> Self {
        let table = px
            .probs()
            .iter()
            .flat_map(|a| py.probs().iter().map(move |b| a * b))
            .collect();
        Self {
            nx: px.len(),
            ny: py.len(),
            table,
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.table[x * self.ny + y]
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn marginal_x(&self) -> Pmf {
        Pmf {
            probs: (0..self.nx).map(|x| (0..self.ny).map(|y| self.get(x, y)).sum()).collect(),
        }
    }

    pub fn marginal_y(&self) -> Pmf {
        Pmf {
            probs: (0..self.ny).map(|y| (0..self.nx).map(|x| self.get(x, y)).sum()).collect(),
        }
    }

    /// p(y | x), or `None` when p(x) = 0.
    pub fn conditional_y(&self, x: usize) -> Option<Pmf> {
        let row = &self.table[x * self.ny..(x + 1) * self.ny];
        let px: f64 = row.iter().sum();
        (px > 0.0).then(|| Pmf {
            probs: row.iter().map(|p| p / px).collect(),
        })
    }
}

/// Joint distribution of (x, y₁, y₂), `table[(x * n1 + y1) * n2 + y2]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointPmf3 {
    nx: usize,
    n1: usize,
    n2: usize,
    table: Vec<f64>,
}

impl JointPmf3 {
    pub fn new(nx: usize, n1: usize, n2: usize, table: Vec<f64>) -> Result<Self> {
        if table.len() != nx * n1 * n2 {
            return Err(Error::BadShape {
                rows: nx,
                cols: n1 * n2,
                len: table.len(),
            });
        }
        validate_mass(&table)?;
        Ok(Self { nx, n1, n2, table })
    }

    /// p(x)·p(y₁|x)·p(y₂|x): the y's are independent given x.
    pub fn conditionally_independent(prior: &Pmf, ch1: &[Pmf], ch2: &[Pmf]) -> Result<Self> {
        let (nx, n1, n2) = (prior.len(), ch1[0].len(), ch2[0].len());
        if ch1.len() != nx || ch2.len() != nx {
            return Err(Error::DimensionMismatch {
                expected: nx,
                found: ch1.len().min(ch2.len()),
            });
        }
        let mut table = Vec::with_capacity(nx * n1 * n2);
        for x in 0..nx {
            for a in ch1[x].probs() {
                for b in ch2[x].probs() {
                    table.push(prior.probs()[x] * a * b);
                }
            }
        }
        Self::new(nx, n1, n2, table)
    }

    pub fn get(&self, x: usize, y1: usize, y2: usize) -> f64 {
        self.table[(x * self.n1 + y1) * self.n2 + y2]
    }

    /// x against the pair (y₁, y₂).
    pub fn x_vs_both(&self) -> JointPmf {
        JointPmf {
            nx: self.nx,
            ny: self.n1 * self.n2,
            table: self.table.clone(),
        }
    }

    pub fn x_vs_first(&self) -> JointPmf {
        let mut t = vec![0.0; self.nx * self.n1];
        for x in 0..self.nx {
            for a in 0..self.n1 {
                t[x * self.n1 + a] = (0..self.n2).map(|b| self.get(x, a, b)).sum();
            }
        }
        JointPmf {
            nx: self.nx,
            ny: self.n1,
            table: t,
        }
    }

    pub fn x_vs_second(&self) -> JointPmf {
        let mut t = vec![0.0; self.nx * self.n2];
        for x in 0..self.nx {
            for b in 0..self.n2 {
                t[x * self.n2 + b] = (0..self.n1).map(|a| self.get(x, a, b)).sum();
            }
        }
        JointPmf {
            nx: self.nx,
            ny: self.n2,
            table: t,
        }
    }

    /// I(x : y₂ | y₁) = H(x,y₁) + H(y₁,y₂) − H(y₁) − H(x,y₁,y₂).
    pub fn conditional_mi_second_given_first(&self) -> f64 {
        let (nx, n1, n2) = (self.nx, self.n1, self.n2);
        let mut h_xy1 = vec![0.0; nx * n1];
        let mut h_y1y2 = vec![0.0; n1 * n2];
        let mut h_y1 = vec![0.0; n1];
        for x in 0..nx {
            for a in 0..n1 {
                for b in 0..n2 {
                    let p = self.get(x, a, b);
                    h_xy1[x * n1 + a] += p;
                    h_y1y2[a * n2 + b] += p;
                    h_y1[a] += p;
                }
            }
        }
        let h = |v: &[f64]| entropy_of(v);
        h(&h_xy1) + h(&h_y1y2) - h(&h_y1) - h(&self.table)
    }
}

fn entropy_of(probs: &[f64]) -> f64 {
    -probs.iter().filter(|&&p| p > 0.0).map(|p| p * p.log2()).sum::<f64>()
}

/// Shannon entropy in bits.
pub fn entropy(p: &Pmf) -> f64 {
    entropy_of(&p.probs)
}

pub fn joint_entropy(j: &JointPmf) -> f64 {
    entropy_of(&j.table)
}

fn same_len(p: &Pmf, q: &Pmf) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    Ok(())
}

/// D_KL(p ‖ q) in bits; +∞ when p has mass outside the support of q.
pub fn kl_divergence(p: &Pmf, q: &Pmf) -> Result<f64> {
    same_len(p, q)?;
    let mut acc = 0.0;
    for (&a, &b) in p.probs.iter().zip(&q.probs) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Ok(f64::INFINITY);
        }
        acc += a * (a / b).log2();
    }
    Ok(acc.max(0.0))
}

/// D_χ²(p ‖ q) = Σ q (p/q − 1)², summed as Σ (p − q)²/q.
pub fn chi2_divergence(p: &Pmf, q: &Pmf) -> Result<f64> {
    same_len(p, q)?;
    let mut acc = 0.0;
    for (z, (&a, &b)) in p.probs.iter().zip(&q.probs).enumerate() {
        if b == 0.0 {
            if a > 0.0 {
                return Err(Error::SupportViolation(z));
            }
            continue;
        }
        acc += (a - b) * (a - b) / b;
    }
    Ok(acc)
}

/// I(x : y) = Σ p(x,y) log₂ [p(x,y) / (p(x) p(y))].
pub fn mutual_information(j: &JointPmf) -> f64 {
    let px = j.marginal_x();
    let py = j.marginal_y();
    let mut acc = 0.0;
    for x in 0..j.nx {
        for y in 0..j.ny {
            let p = j.get(x, y);
            if p > 0.0 {
                acc += p * (p / (px.probs[x] * py.probs[y])).log2();
            }
        }
    }
    acc.max(0.0)
}

/// (1/ln 2)·E_x D_χ²(p_{y|x} ‖ q), an upper bound on I(x : y) for any q.
pub fn mi_chi2_upper_bound(j: &JointPmf, q: &Pmf) -> Result<f64> {
    if q.len() != j.ny {
        return Err(Error::DimensionMismatch {
            expected: j.ny,
            found: q.len(),
        });
    }
    let px = j.marginal_x();
    let mut acc = 0.0;
    for x in 0..j.nx {
        if let Some(cond) = j.conditional_y(x) {
            acc += px.probs[x] * chi2_divergence(&cond, q)?;
        }
    }
    Ok(acc / std::f64::consts::LN_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randomness::RngStream;
    use rand::Rng;

    fn pmf(v: &[f64]) -> Pmf {
        Pmf::new(v.to_vec()).unwrap()
    }

    fn random_pmf(n: usize, rng: &mut impl Rng) -> Pmf {
        let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        Pmf::from_weights(&w).unwrap()
    }

    #[test]
    fn kl_examples() {
        let p = pmf(&[0.2, 0.3, 0.5]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        assert!((kl_divergence(&pmf(&[1.0, 0.0]), &pmf(&[0.5, 0.5])).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(kl_divergence(&pmf(&[0.5, 0.5]), &pmf(&[1.0, 0.0])).unwrap(), f64::INFINITY);
        assert!(kl_divergence(&pmf(&[1.0]), &pmf(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn chi2_examples() {
        let p = pmf(&[0.2, 0.3, 0.5]);
        assert_eq!(chi2_divergence(&p, &p).unwrap(), 0.0);
        // ½(2−1)² + ½(0−1)² = 1.
        assert!((chi2_divergence(&pmf(&[1.0, 0.0]), &pmf(&[0.5, 0.5])).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            chi2_divergence(&pmf(&[0.5, 0.5]), &pmf(&[1.0, 0.0])),
            Err(Error::SupportViolation(1))
        ));
    }

    #[test]
    fn chi2_dominates_scaled_kl() {
        let mut rng = RngStream::new(1).rng();
        for _ in 0..1000 {
            let n = rng.random_range(2..8);
            let p = random_pmf(n, &mut rng);
            let q = random_pmf(n, &mut rng);
            let kl = kl_divergence(&p, &q).unwrap();
            let chi = chi2_divergence(&p, &q).unwrap();
            assert!(std::f64::consts::LN_2 * kl <= chi + 1e-12);
        }
    }

    #[test]
    fn mutual_information_examples() {
        let j = JointPmf::product(&pmf(&[0.3, 0.7]), &pmf(&[0.1, 0.4, 0.5]));
        assert!(mutual_information(&j).abs() < 1e-15);
        let corr = JointPmf::new(2, 2, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert!((mutual_information(&corr) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mutual_information_entropy_identity() {
        let mut rng = RngStream::new(2).rng();
        for _ in 0..200 {
            let w: Vec<f64> = (0..12).map(|_| rng.random::<f64>()).collect();
            let t = Pmf::from_weights(&w).unwrap();
            let j = JointPmf::new(3, 4, t.probs().to_vec()).unwrap();
            let i = mutual_information(&j);
            let hx = entropy(&j.marginal_x());
            let hy = entropy(&j.marginal_y());
            assert!((i - (hx + hy - joint_entropy(&j))).abs() < 1e-10);
            assert!(i <= hx.min(hy) + 1e-12);
        }
    }

    #[test]
    fn chi2_bound_on_mutual_information() {
        let mut rng = RngStream::new(3).rng();
        let independent = JointPmf::product(&pmf(&[0.5, 0.5]), &pmf(&[0.25, 0.75]));
        let b = mi_chi2_upper_bound(&independent, &independent.marginal_y()).unwrap();
        assert!(b.abs() < 1e-15);

        for _ in 0..50 {
            let w: Vec<f64> = (0..16).map(|_| rng.random::<f64>()).collect();
            let j = JointPmf::new(4, 4, Pmf::from_weights(&w).unwrap().probs().to_vec()).unwrap();
            let i = mutual_information(&j);
            assert!(i <= mi_chi2_upper_bound(&j, &j.marginal_y()).unwrap() + 1e-12);
            for _ in 0..10 {
                let q = random_pmf(4, &mut rng);
                assert!(i <= mi_chi2_upper_bound(&j, &q).unwrap() + 1e-12);
            }
        }
    }

    #[test]
    fn chain_rule_and_subadditivity() {
        let mut rng = RngStream::new(4).rng();
        for _ in 0..200 {
            let w: Vec<f64> = (0..24).map(|_| rng.random::<f64>()).collect();
            let j = JointPmf3::new(2, 3, 4, Pmf::from_weights(&w).unwrap().probs().to_vec()).unwrap();
            let lhs = mutual_information(&j.x_vs_both());
            let rhs = mutual_information(&j.x_vs_first()) + j.conditional_mi_second_given_first();
            assert!((lhs - rhs).abs() < 1e-9);

            let prior = random_pmf(3, &mut rng);
            let ch1: Vec<Pmf> = (0..3).map(|_| random_pmf(2, &mut rng)).collect();
            let ch2: Vec<Pmf> = (0..3).map(|_| random_pmf(3, &mut rng)).collect();
            let ci = JointPmf3::conditionally_independent(&prior, &ch1, &ch2).unwrap();
            let both = mutual_information(&ci.x_vs_both());
            let sum = mutual_information(&ci.x_vs_first()) + mutual_information(&ci.x_vs_second());
            assert!(both <= sum + 1e-9);
        }
    }

    #[test]
    fn validation() {
        assert!(Pmf::new(vec![0.5, 0.4]).is_err());
        assert!(Pmf::new(vec![1.5, -0.5]).is_err());
        assert!(JointPmf::new(2, 2, vec![1.0]).is_err());
        let j = JointPmf::new(2, 2, vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        assert!(j.conditional_y(1).is_none());
    }
}
