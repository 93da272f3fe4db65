//! Likelihood parameters for the two covariate types and the per-cell
//! sufficient statistics used by the collapsed assignment updates.
//!
//! A "cell" is one (clique, cluster) block of the data matrix. Continuous
//! cells are Gaussian around their motif value with a `N(0, τ²)` motif prior;
//! factor cells are corrupted copies of a categorical motif level with
//! corruption matrix `W` and motif prior `g`.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::random::{log_sum_exp, normal, sample_log_weights};
use crate::error::{Error, Result};

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvGammaPrior {
    pub shape: f64,
    pub scale: f64,
}

impl Default for InvGammaPrior {
    fn default() -> Self {
        Self {
            shape: 2.0,
            scale: 1.0,
        }
    }
}

/// Gaussian likelihood for continuous blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousLik {
    pub sigma2: f64,
    pub tau2: f64,
    pub sigma2_prior: InvGammaPrior,
    /// Upper truncation of the σ² prior.
    pub sigma2_upper: f64,
    pub tau2_prior: InvGammaPrior,
}

impl ContinuousLik {
    /// Default priors for a block: σ² is truncated at `(1 - r2_min)` times the
    /// pooled within-column variance, so that the motif structure explains at
    /// least `r2_min` of the variance.
    pub fn for_block(x: &DMatrix<f64>, r2_min: f64) -> Self {
        let pooled = pooled_variance(x);
        let upper = ((1.0 - r2_min) * pooled).max(1e-8);
        Self {
            sigma2: 0.5 * upper,
            tau2: 1.0,
            sigma2_prior: InvGammaPrior::default(),
            sigma2_upper: upper,
            tau2_prior: InvGammaPrior::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.sigma2 > 0.0
            && self.tau2 > 0.0
            && self.sigma2 <= self.sigma2_upper
            && self.sigma2_prior.shape > 0.0
            && self.sigma2_prior.scale > 0.0
            && self.tau2_prior.shape > 0.0
            && self.tau2_prior.scale > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid continuous likelihood {self:?}")))
        }
    }
}

/// Mean of the per-column sample variances.
pub fn pooled_variance(x: &DMatrix<f64>) -> f64 {
    let n = x.nrows();
    if n < 2 || x.ncols() == 0 {
        return 1.0;
    }
    let total: f64 = x
        .column_iter()
        .map(|c| {
            let m = c.mean();
            c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64
        })
        .sum();
    let v = total / x.ncols() as f64;
    if v > 0.0 {
        v
    } else {
        1.0
    }
}

/// Categorical-corruption likelihood for factor blocks.
///
/// Row `φ` of the corruption matrix is `l_φ 1_φ + (1 - l_φ) w̃_φ` with
/// `w̃_φ ~ Dirichlet(dir_alpha / A)` and `l_φ ~ Beta(l_alpha, l_beta)`
/// restricted to `(l_star, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorLik {
    pub n_levels: usize,
    pub g: Vec<f64>,
    pub g_prior: Vec<f64>,
    /// `A x A` row-stochastic corruption matrix; `w[(φ, x)] = P(x | motif φ)`.
    pub w: DMatrix<f64>,
    pub w_tilde: DMatrix<f64>,
    pub l: Vec<f64>,
    pub l_star: f64,
    pub l_alpha: f64,
    pub l_beta: f64,
    pub dir_alpha: f64,
}

impl FactorLik {
    pub fn new(n_levels: usize) -> Self {
        let a = n_levels;
        let l_star = 0.85;
        let mut lik = Self {
            n_levels: a,
            g: vec![1.0 / a as f64; a],
            g_prior: vec![1.0; a],
            w: DMatrix::zeros(a, a),
            w_tilde: DMatrix::from_element(a, a, 1.0 / a as f64),
            l: vec![0.5 * (1.0 + l_star); a],
            l_star,
            l_alpha: 9.0,
            l_beta: 1.0,
            dir_alpha: 1.0,
        };
        lik.rebuild_w();
        lik
    }

    /// Recompute `w` from `l` and `w_tilde`.
    pub fn rebuild_w(&mut self) {
        let a = self.n_levels;
        for phi in 0..a {
            for x in 0..a {
                let diag = if phi == x { self.l[phi] } else { 0.0 };
                self.w[(phi, x)] = diag + (1.0 - self.l[phi]) * self.w_tilde[(phi, x)];
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.n_levels;
        let mut ok = a >= 2
            && self.g.len() == a
            && self.g_prior.len() == a
            && self.l.len() == a
            && self.w.shape() == (a, a)
            && self.w_tilde.shape() == (a, a)
            && (self.g.iter().sum::<f64>() - 1.0).abs() < 1e-9
            && self.g.iter().all(|&v| v > 0.0)
            && self.l_star > 0.0
            && self.l_star < 1.0;
        for phi in 0..a {
            let row: f64 = self.w.row(phi).sum();
            ok &= (row - 1.0).abs() < 1e-12 && self.w[(phi, phi)] >= self.l_star;
        }
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid factor likelihood {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Likelihood {
    Continuous(ContinuousLik),
    Factor(FactorLik),
}

impl Likelihood {
    pub fn validate(&self) -> Result<()> {
        match self {
            Likelihood::Continuous(l) => l.validate(),
            Likelihood::Factor(l) => l.validate(),
        }
    }
}

/// Sufficient statistics of one Gaussian cell.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GaussStats {
    pub n: f64,
    pub sum: f64,
    pub sumsq: f64,
}

impl GaussStats {
    pub fn from_values(xs: impl IntoIterator<Item = f64>) -> Self {
        let mut s = Self::default();
        for x in xs {
            s.push(x);
        }
        s
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1.0;
        self.sum += x;
        self.sumsq += x * x;
    }
}

/// Operations the collapsed sampler needs from a cell model.
pub(crate) trait CellKernel {
    type Stats: Clone + Send;
    type Value: Copy + Send;

    fn zero(&self) -> Self::Stats;
    fn add_cell(&self, s: &mut Self::Stats, i: usize, j: usize);
    fn merge(&self, into: &mut Self::Stats, other: &Self::Stats);
    fn unmerge(&self, from: &mut Self::Stats, other: &Self::Stats);
    fn is_empty(&self, s: &Self::Stats) -> bool;
    /// Log marginal likelihood of the cell data with the motif integrated out.
    fn log_marginal(&self, s: &Self::Stats) -> f64;
    /// `log_marginal(a + b)` without materializing the merge.
    fn log_marginal_merged(&self, a: &Self::Stats, b: &Self::Stats) -> f64;
    /// Draw the motif value from its conditional given the cell data.
    fn draw_value<R: Rng + ?Sized>(&self, s: &Self::Stats, rng: &mut R) -> Self::Value;
}

pub(crate) struct GaussKernel<'a> {
    pub x: &'a DMatrix<f64>,
    pub sigma2: f64,
    pub tau2: f64,
}

impl GaussKernel<'_> {
    #[inline]
    fn lm(&self, n: f64, sum: f64, sumsq: f64) -> f64 {
        if n == 0.0 {
            return 0.0;
        }
        let prec = n / self.sigma2 + 1.0 / self.tau2;
        let v = 1.0 / prec;
        let b = sum / self.sigma2;
        -0.5 * n * (LN_2PI + self.sigma2.ln()) - 0.5 * sumsq / self.sigma2
            + 0.5 * (v / self.tau2).ln()
            + 0.5 * v * b * b
    }

    /// Conjugate posterior `(mean, variance)` of a motif value.
    pub fn posterior(&self, s: &GaussStats) -> (f64, f64) {
        let v = 1.0 / (s.n / self.sigma2 + 1.0 / self.tau2);
        (v * s.sum / self.sigma2, v)
    }
}

impl CellKernel for GaussKernel<'_> {
    type Stats = GaussStats;
    type Value = f64;

    fn zero(&self) -> GaussStats {
        GaussStats::default()
    }
    #[inline]
    fn add_cell(&self, s: &mut GaussStats, i: usize, j: usize) {
        s.push(self.x[(i, j)]);
    }
    #[inline]
    fn merge(&self, into: &mut GaussStats, o: &GaussStats) {
        into.n += o.n;
        into.sum += o.sum;
        into.sumsq += o.sumsq;
    }
    #[inline]
    fn unmerge(&self, from: &mut GaussStats, o: &GaussStats) {
        from.n -= o.n;
        from.sum -= o.sum;
        from.sumsq -= o.sumsq;
        if from.n == 0.0 {
            *from = GaussStats::default();
        }
    }
    fn is_empty(&self, s: &GaussStats) -> bool {
        s.n == 0.0
    }
    #[inline]
    fn log_marginal(&self, s: &GaussStats) -> f64 {
        self.lm(s.n, s.sum, s.sumsq)
    }
    #[inline]
    fn log_marginal_merged(&self, a: &GaussStats, b: &GaussStats) -> f64 {
        self.lm(a.n + b.n, a.sum + b.sum, a.sumsq + b.sumsq)
    }
    fn draw_value<R: Rng + ?Sized>(&self, s: &GaussStats, rng: &mut R) -> f64 {
        let (m, v) = self.posterior(s);
        normal(m, v, rng)
    }
}

/// Level counts of a factor cell.
pub type LevelCounts = Vec<u32>;

pub(crate) struct CategoricalKernel<'a> {
    /// Levels `1..=A`.
    pub x: &'a DMatrix<u8>,
    pub n_levels: usize,
    pub log_g: Vec<f64>,
    /// Row-major `A x A` log corruption probabilities.
    pub log_w: Vec<f64>,
}

impl<'a> CategoricalKernel<'a> {
    pub fn new(x: &'a DMatrix<u8>, lik: &FactorLik) -> Self {
        let a = lik.n_levels;
        let mut log_w = vec![0.0; a * a];
        for phi in 0..a {
            for v in 0..a {
                log_w[phi * a + v] = lik.w[(phi, v)].ln();
            }
        }
        Self {
            x,
            n_levels: a,
            log_g: lik.g.iter().map(|g| g.ln()).collect(),
            log_w,
        }
    }

    /// `log g_φ + Σ_x n_x log w_φx` for each motif level `φ`.
    pub fn level_log_weights(&self, s: &[u32]) -> Vec<f64> {
        let a = self.n_levels;
        (0..a)
            .map(|phi| {
                self.log_g[phi]
                    + s.iter()
                        .enumerate()
                        .filter(|(_, &c)| c > 0)
                        .map(|(v, &c)| c as f64 * self.log_w[phi * a + v])
                        .sum::<f64>()
            })
            .collect()
    }

    /// `Σ_x n_x log w_φx` for one motif level (zero-based).
    pub fn log_lik_level(&self, s: &[u32], phi: usize) -> f64 {
        let a = self.n_levels;
        s.iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(v, &c)| c as f64 * self.log_w[phi * a + v])
            .sum()
    }
}

impl CellKernel for CategoricalKernel<'_> {
    type Stats = LevelCounts;
    /// One-based motif level.
    type Value = u8;

    fn zero(&self) -> LevelCounts {
        vec![0; self.n_levels]
    }
    #[inline]
    fn add_cell(&self, s: &mut LevelCounts, i: usize, j: usize) {
        s[self.x[(i, j)] as usize - 1] += 1;
    }
    #[inline]
    fn merge(&self, into: &mut LevelCounts, o: &LevelCounts) {
        for (a, b) in into.iter_mut().zip(o) {
            *a += b;
        }
    }
    #[inline]
    fn unmerge(&self, from: &mut LevelCounts, o: &LevelCounts) {
        for (a, b) in from.iter_mut().zip(o) {
            *a -= b;
        }
    }
    fn is_empty(&self, s: &LevelCounts) -> bool {
        s.iter().all(|&c| c == 0)
    }
    fn log_marginal(&self, s: &LevelCounts) -> f64 {
        if self.is_empty(s) {
            return 0.0;
        }
        log_sum_exp(self.level_log_weights(s))
    }
    fn log_marginal_merged(&self, a: &LevelCounts, b: &LevelCounts) -> f64 {
        let k = self.n_levels;
        let mut best = f64::NEG_INFINITY;
        let mut terms = [0.0f64; 16];
        let mut heap;
        let terms: &mut [f64] = if k <= 16 {
            &mut terms[..k]
        } else {
            heap = vec![0.0; k];
            &mut heap
        };
        for (phi, t) in terms.iter_mut().enumerate() {
            let mut acc = self.log_g[phi];
            for v in 0..k {
                let c = a[v] + b[v];
                if c > 0 {
                    acc += c as f64 * self.log_w[phi * k + v];
                }
            }
            *t = acc;
            best = best.max(acc);
        }
        if !best.is_finite() {
            return best;
        }
        best + terms.iter().map(|t| (t - best).exp()).sum::<f64>().ln()
    }
    fn draw_value<R: Rng + ?Sized>(&self, s: &LevelCounts, rng: &mut R) -> u8 {
        (sample_log_weights(&self.level_log_weights(s), rng) + 1) as u8
    }
}
