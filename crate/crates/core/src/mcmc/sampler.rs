//! Collapsed Gibbs updates for one co-clustering chain.
//!
//! Assignment updates integrate the affected motif cells out analytically and
//! work from cached per-cell sufficient statistics. Motifs are then redrawn
//! from their conjugate conditionals and the likelihood parameters are
//! refreshed given the motifs.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use super::likelihood::{
    CategoricalKernel, CellKernel, ContinuousLik, FactorLik, GaussKernel, GaussStats, Likelihood,
};
use super::random::{dirichlet, inv_gamma_truncated, sample_log_weights, slice_sample_bounded};
use super::state::{CoClusterState, DataBlock, Motif};
use crate::error::{Error, Result};

/// Cached statistics for the collapsed updates; cells are indexed
/// `[clique][cluster]`.
pub(crate) struct Sweeper<K: CellKernel> {
    pub kernel: K,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub row_counts: Vec<usize>,
    pub col_counts: Vec<usize>,
    pub cells: Vec<Vec<K::Stats>>,
    cache: Vec<Vec<f64>>,
    pub motif: Vec<Vec<K::Value>>,
}

impl<K: CellKernel> Sweeper<K> {
    fn new(kernel: K, rows: Vec<usize>, cols: Vec<usize>, motif: Vec<Vec<K::Value>>) -> Self {
        let qr = motif.len();
        let qc = motif.first().map_or(0, Vec::len);
        let mut row_counts = vec![0; qr];
        for &r in &rows {
            row_counts[r] += 1;
        }
        let mut col_counts = vec![0; qc];
        for &c in &cols {
            col_counts[c] += 1;
        }
        let mut cells = vec![vec![kernel.zero(); qc]; qr];
        for (i, &r) in rows.iter().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                kernel.add_cell(&mut cells[r][c], i, j);
            }
        }
        let mut s = Self {
            kernel,
            rows,
            cols,
            row_counts,
            col_counts,
            cells,
            cache: Vec::new(),
            motif,
        };
        s.refresh_cache();
        s
    }

    /// Recompute every cell's statistics from scratch.
    pub fn rebuild_stats(&mut self) {
        let zero = self.kernel.zero();
        for row in self.cells.iter_mut() {
            for c in row.iter_mut() {
                *c = zero.clone();
            }
        }
        for (i, &r) in self.rows.iter().enumerate() {
            for (j, &c) in self.cols.iter().enumerate() {
                self.kernel.add_cell(&mut self.cells[r][c], i, j);
            }
        }
        self.refresh_cache();
    }

    pub fn refresh_cache(&mut self) {
        self.cache = self
            .cells
            .iter()
            .map(|row| row.iter().map(|c| self.kernel.log_marginal(c)).collect())
            .collect();
    }

    pub fn n_cliques(&self) -> usize {
        self.row_counts.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.col_counts.len()
    }

    fn remove_cluster(&mut self, u: usize) {
        let last = self.col_counts.len() - 1;
        for v in 0..self.cells.len() {
            self.cells[v].swap_remove(u);
            self.cache[v].swap_remove(u);
            self.motif[v].swap_remove(u);
        }
        self.col_counts.swap_remove(u);
        if u != last {
            for c in self.cols.iter_mut().filter(|c| **c == last) {
                *c = u;
            }
        }
    }

    fn remove_clique(&mut self, v: usize) {
        let last = self.row_counts.len() - 1;
        self.cells.swap_remove(v);
        self.cache.swap_remove(v);
        self.motif.swap_remove(v);
        self.row_counts.swap_remove(v);
        if v != last {
            for r in self.rows.iter_mut().filter(|r| **r == last) {
                *r = v;
            }
        }
    }

    /// Reassign column `j` from its collapsed full conditional.
    pub fn update_col<R: Rng + ?Sized>(&mut self, j: usize, col_mass: f64, rng: &mut R) {
        let qr = self.n_cliques();
        let mut col_stats = vec![self.kernel.zero(); qr];
        for (i, &r) in self.rows.iter().enumerate() {
            self.kernel.add_cell(&mut col_stats[r], i, j);
        }
        let u0 = self.cols[j];
        for v in 0..qr {
            self.kernel.unmerge(&mut self.cells[v][u0], &col_stats[v]);
            self.cache[v][u0] = self.kernel.log_marginal(&self.cells[v][u0]);
        }
        self.col_counts[u0] -= 1;
        if self.col_counts[u0] == 0 {
            self.remove_cluster(u0);
        }
        let qc = self.n_clusters();
        let mut lw = Vec::with_capacity(qc + 1);
        for u in 0..qc {
            let mut w = (self.col_counts[u] as f64).ln();
            for v in 0..qr {
                w += self.kernel.log_marginal_merged(&self.cells[v][u], &col_stats[v])
                    - self.cache[v][u];
            }
            lw.push(w);
        }
        let fresh: f64 = col_stats.iter().map(|s| self.kernel.log_marginal(s)).sum();
        lw.push(col_mass.ln() + fresh);
        let k = sample_log_weights(&lw, rng);
        if k == qc {
            for (v, s) in col_stats.into_iter().enumerate() {
                let value = self.kernel.draw_value(&s, rng);
                self.cache[v].push(self.kernel.log_marginal(&s));
                self.cells[v].push(s);
                self.motif[v].push(value);
            }
            self.col_counts.push(1);
        } else {
            for (v, s) in col_stats.iter().enumerate() {
                self.kernel.merge(&mut self.cells[v][k], s);
                self.cache[v][k] = self.kernel.log_marginal(&self.cells[v][k]);
            }
            self.col_counts[k] += 1;
        }
        self.cols[j] = k;
    }

    /// Reassign row `i` from its collapsed full conditional.
    pub fn update_row<R: Rng + ?Sized>(&mut self, i: usize, row_mass: f64, rng: &mut R) {
        let qc = self.n_clusters();
        let mut row_stats = vec![self.kernel.zero(); qc];
        for (j, &c) in self.cols.iter().enumerate() {
            self.kernel.add_cell(&mut row_stats[c], i, j);
        }
        let v0 = self.rows[i];
        for u in 0..qc {
            self.kernel.unmerge(&mut self.cells[v0][u], &row_stats[u]);
            self.cache[v0][u] = self.kernel.log_marginal(&self.cells[v0][u]);
        }
        self.row_counts[v0] -= 1;
        if self.row_counts[v0] == 0 {
            self.remove_clique(v0);
        }
        let qr = self.n_cliques();
        let mut lw = Vec::with_capacity(qr + 1);
        for v in 0..qr {
            let mut w = (self.row_counts[v] as f64).ln();
            let (cells, cache) = (&self.cells[v], &self.cache[v]);
            for u in 0..qc {
                w += self.kernel.log_marginal_merged(&cells[u], &row_stats[u]) - cache[u];
            }
            lw.push(w);
        }
        let fresh: f64 = row_stats.iter().map(|s| self.kernel.log_marginal(s)).sum();
        lw.push(row_mass.ln() + fresh);
        let k = sample_log_weights(&lw, rng);
        if k == qr {
            let motif_row = row_stats
                .iter()
                .map(|s| self.kernel.draw_value(s, rng))
                .collect();
            self.cache
                .push(row_stats.iter().map(|s| self.kernel.log_marginal(s)).collect());
            self.cells.push(row_stats);
            self.motif.push(motif_row);
            self.row_counts.push(1);
        } else {
            for (u, s) in row_stats.iter().enumerate() {
                self.kernel.merge(&mut self.cells[k][u], s);
                self.cache[k][u] = self.kernel.log_marginal(&self.cells[k][u]);
            }
            self.row_counts[k] += 1;
        }
        self.rows[i] = k;
    }

    pub fn update_motif<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for v in 0..self.cells.len() {
            for u in 0..self.cells[v].len() {
                self.motif[v][u] = self.kernel.draw_value(&self.cells[v][u], rng);
            }
        }
    }

    fn motif_matrix(&self) -> DMatrix<K::Value>
    where
        K::Value: nalgebra::Scalar,
    {
        DMatrix::from_fn(self.n_cliques(), self.n_clusters(), |v, u| {
            self.motif[v][u].clone()
        })
    }
}

fn motif_rows<T: Copy + nalgebra::Scalar>(m: &DMatrix<T>) -> Vec<Vec<T>> {
    (0..m.nrows())
        .map(|v| (0..m.ncols()).map(|u| m[(v, u)]).collect())
        .collect()
}

impl Sweeper<GaussKernel<'_>> {
    /// Residual sum of squares of the data around the mapped motif values.
    pub fn residual_ss(&self) -> (f64, f64) {
        let mut rss = 0.0;
        let mut n = 0.0;
        for (cells, motif) in self.cells.iter().zip(&self.motif) {
            for (s, &phi) in cells.iter().zip(motif) {
                rss += s.sumsq - 2.0 * phi * s.sum + s.n * phi * phi;
                n += s.n;
            }
        }
        (rss.max(0.0), n)
    }

    pub fn log_likelihood(&self) -> f64 {
        let (rss, n) = self.residual_ss();
        let s2 = self.kernel.sigma2;
        -0.5 * n * (super::likelihood::LN_2PI + s2.ln()) - 0.5 * rss / s2
    }

    fn update_likelihood<R: Rng + ?Sized>(&mut self, lik: &mut ContinuousLik, rng: &mut R) {
        let (rss, n) = self.residual_ss();
        lik.sigma2 = inv_gamma_truncated(
            lik.sigma2_prior.shape + 0.5 * n,
            lik.sigma2_prior.scale + 0.5 * rss,
            Some(lik.sigma2_upper),
            rng,
        );
        let cells = (self.n_cliques() * self.n_clusters()) as f64;
        let ss: f64 = self.motif.iter().flatten().map(|p| p * p).sum();
        lik.tau2 = inv_gamma_truncated(
            lik.tau2_prior.shape + 0.5 * cells,
            lik.tau2_prior.scale + 0.5 * ss,
            None,
            rng,
        );
        self.kernel.sigma2 = lik.sigma2;
        self.kernel.tau2 = lik.tau2;
        self.refresh_cache();
    }
}

impl<'a> Sweeper<CategoricalKernel<'a>> {
    /// Observed-level counts per motif level: `counts[(φ, x)]`.
    pub fn corruption_counts(&self) -> DMatrix<f64> {
        let a = self.kernel.n_levels;
        let mut counts = DMatrix::zeros(a, a);
        for (cells, motif) in self.cells.iter().zip(&self.motif) {
            for (s, &phi) in cells.iter().zip(motif) {
                for (x, &c) in s.iter().enumerate() {
                    counts[(phi as usize - 1, x)] += c as f64;
                }
            }
        }
        counts
    }

    pub fn log_likelihood(&self) -> f64 {
        let mut ll = 0.0;
        for (cells, motif) in self.cells.iter().zip(&self.motif) {
            for (s, &phi) in cells.iter().zip(motif) {
                ll += self.kernel.log_lik_level(s, phi as usize - 1);
            }
        }
        ll
    }

    fn update_likelihood<R: Rng + ?Sized>(&mut self, lik: &mut FactorLik, rng: &mut R) {
        let a = lik.n_levels;
        let mut alpha = lik.g_prior.clone();
        for &phi in self.motif.iter().flatten() {
            alpha[phi as usize - 1] += 1.0;
        }
        lik.g = dirichlet(&alpha, rng);

        let counts = self.corruption_counts();
        for phi in 0..a {
            let n_match = counts[(phi, phi)];
            let n_mis: f64 = (0..a).filter(|&x| x != phi).map(|x| counts[(phi, x)]).sum();
            let l = lik.l[phi];
            let wd = lik.w_tilde[(phi, phi)];
            // Split the matches between the anchor and the Dirichlet component.
            let p_tilde = (1.0 - l) * wd / (l + (1.0 - l) * wd);
            let from_tilde = if n_match > 0.0 {
                Binomial::new(n_match as u64, p_tilde.clamp(0.0, 1.0))
                    .expect("valid binomial")
                    .sample(rng) as f64
            } else {
                0.0
            };
            let conc: Vec<f64> = (0..a)
                .map(|x| {
                    lik.dir_alpha / a as f64
                        + if x == phi { from_tilde } else { counts[(phi, x)] }
                })
                .collect();
            let wt = dirichlet(&conc, rng);
            for (x, v) in wt.iter().enumerate() {
                lik.w_tilde[(phi, x)] = *v;
            }
            let wd = wt[phi];
            let (la, lb) = (lik.l_alpha, lik.l_beta);
            let log_density = |l: f64| {
                (la - 1.0) * l.ln()
                    + (lb - 1.0) * (1.0 - l).ln()
                    + n_match * (l + (1.0 - l) * wd).ln()
                    + n_mis * (1.0 - l).ln()
            };
            let start = lik.l[phi].clamp(lik.l_star + 1e-12, 1.0 - 1e-12);
            lik.l[phi] = slice_sample_bounded(start, lik.l_star, 1.0, log_density, rng);
        }
        lik.rebuild_w();
        self.kernel = CategoricalKernel::new(self.kernel.x, lik);
        self.refresh_cache();
    }
}

/// Type-erased sweeper paired with the likelihood parameters it mirrors.
pub(crate) enum AnySweeper<'a> {
    Gauss(Sweeper<GaussKernel<'a>>, ContinuousLik),
    Cat(Sweeper<CategoricalKernel<'a>>, FactorLik),
}

impl<'a> AnySweeper<'a> {
    pub fn new(state: &CoClusterState, data: &'a DataBlock) -> Result<Self> {
        state.validate(data)?;
        let rows = state.row_assign.clone();
        let cols = state.col_assign.clone();
        match (&state.likelihood, &state.motif, data) {
            (Likelihood::Continuous(lik), Motif::Continuous(m), DataBlock::Continuous(x)) => {
                let kernel = GaussKernel {
                    x,
                    sigma2: lik.sigma2,
                    tau2: lik.tau2,
                };
                Ok(AnySweeper::Gauss(
                    Sweeper::new(kernel, rows, cols, motif_rows(m)),
                    lik.clone(),
                ))
            }
            (Likelihood::Factor(lik), Motif::Factor(m), DataBlock::Factor { levels, .. }) => {
                let kernel = CategoricalKernel::new(levels, lik);
                Ok(AnySweeper::Cat(
                    Sweeper::new(kernel, rows, cols, motif_rows(m)),
                    lik.clone(),
                ))
            }
            _ => Err(Error::invalid("state and data block types differ")),
        }
    }

    pub fn update_col<R: Rng + ?Sized>(&mut self, j: usize, mass: f64, rng: &mut R) {
        match self {
            AnySweeper::Gauss(s, _) => s.update_col(j, mass, rng),
            AnySweeper::Cat(s, _) => s.update_col(j, mass, rng),
        }
    }

    pub fn update_row<R: Rng + ?Sized>(&mut self, i: usize, mass: f64, rng: &mut R) {
        match self {
            AnySweeper::Gauss(s, _) => s.update_row(i, mass, rng),
            AnySweeper::Cat(s, _) => s.update_row(i, mass, rng),
        }
    }

    pub fn update_motif<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        match self {
            AnySweeper::Gauss(s, _) => s.update_motif(rng),
            AnySweeper::Cat(s, _) => s.update_motif(rng),
        }
    }

    pub fn rebuild_stats(&mut self) {
        match self {
            AnySweeper::Gauss(s, _) => s.rebuild_stats(),
            AnySweeper::Cat(s, _) => s.rebuild_stats(),
        }
    }

    pub fn update_likelihood<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        match self {
            AnySweeper::Gauss(s, lik) => s.update_likelihood(lik, rng),
            AnySweeper::Cat(s, lik) => s.update_likelihood(lik, rng),
        }
    }

    pub fn n_rows(&self) -> usize {
        match self {
            AnySweeper::Gauss(s, _) => s.rows.len(),
            AnySweeper::Cat(s, _) => s.rows.len(),
        }
    }

    pub fn n_cols(&self) -> usize {
        match self {
            AnySweeper::Gauss(s, _) => s.cols.len(),
            AnySweeper::Cat(s, _) => s.cols.len(),
        }
    }

    pub fn rows(&self) -> &[usize] {
        match self {
            AnySweeper::Gauss(s, _) => &s.rows,
            AnySweeper::Cat(s, _) => &s.rows,
        }
    }

    pub fn cols(&self) -> &[usize] {
        match self {
            AnySweeper::Gauss(s, _) => &s.cols,
            AnySweeper::Cat(s, _) => &s.cols,
        }
    }

    pub fn n_cliques(&self) -> usize {
        match self {
            AnySweeper::Gauss(s, _) => s.n_cliques(),
            AnySweeper::Cat(s, _) => s.n_cliques(),
        }
    }

    pub fn n_clusters(&self) -> usize {
        match self {
            AnySweeper::Gauss(s, _) => s.n_clusters(),
            AnySweeper::Cat(s, _) => s.n_clusters(),
        }
    }

    pub fn likelihood(&self) -> Likelihood {
        match self {
            AnySweeper::Gauss(_, l) => Likelihood::Continuous(l.clone()),
            AnySweeper::Cat(_, l) => Likelihood::Factor(l.clone()),
        }
    }

    pub fn motif(&self) -> Motif {
        match self {
            AnySweeper::Gauss(s, _) => Motif::Continuous(s.motif_matrix()),
            AnySweeper::Cat(s, _) => Motif::Factor(s.motif_matrix()),
        }
    }

    pub fn log_likelihood(&self) -> f64 {
        match self {
            AnySweeper::Gauss(s, _) => s.log_likelihood(),
            AnySweeper::Cat(s, _) => s.log_likelihood(),
        }
    }

    /// True when every likelihood parameter and motif value is finite.
    pub fn is_finite(&self) -> bool {
        match self {
            AnySweeper::Gauss(s, l) => {
                l.sigma2.is_finite()
                    && l.tau2.is_finite()
                    && s.motif.iter().flatten().all(|v| v.is_finite())
            }
            AnySweeper::Cat(_, l) => {
                l.g.iter().chain(l.l.iter()).all(|v| v.is_finite())
                    && l.w.iter().all(|v| v.is_finite())
            }
        }
    }

    /// Visit every cell as `(clique, cluster, motif value as f64)`; factor
    /// motif levels are reported one-based.
    pub fn for_each_motif(&self, mut f: impl FnMut(usize, usize, f64)) {
        match self {
            AnySweeper::Gauss(s, _) => {
                for (v, row) in s.motif.iter().enumerate() {
                    for (u, &m) in row.iter().enumerate() {
                        f(v, u, m);
                    }
                }
            }
            AnySweeper::Cat(s, _) => {
                for (v, row) in s.motif.iter().enumerate() {
                    for (u, &m) in row.iter().enumerate() {
                        f(v, u, m as f64);
                    }
                }
            }
        }
    }

    pub fn to_state(&self, row_mass: f64, col_mass: f64) -> CoClusterState {
        CoClusterState {
            row_assign: self.rows().to_vec(),
            col_assign: self.cols().to_vec(),
            motif: self.motif(),
            row_mass,
            col_mass,
            likelihood: self.likelihood(),
        }
    }
}

/// Reassign column `j` of the state from its collapsed full conditional.
pub fn gibbs_update_col<R: Rng + ?Sized>(
    state: &mut CoClusterState,
    data: &DataBlock,
    j: usize,
    rng: &mut R,
) -> Result<()> {
    if j >= data.ncols() {
        return Err(Error::invalid(format!("column {j} out of range")));
    }
    let mut sw = AnySweeper::new(state, data)?;
    sw.update_col(j, state.col_mass, rng);
    *state = sw.to_state(state.row_mass, state.col_mass);
    Ok(())
}

/// Reassign row `i` of the state from its collapsed full conditional.
pub fn gibbs_update_row<R: Rng + ?Sized>(
    state: &mut CoClusterState,
    data: &DataBlock,
    i: usize,
    rng: &mut R,
) -> Result<()> {
    if i >= data.nrows() {
        return Err(Error::invalid(format!("row {i} out of range")));
    }
    let mut sw = AnySweeper::new(state, data)?;
    sw.update_row(i, state.row_mass, rng);
    *state = sw.to_state(state.row_mass, state.col_mass);
    Ok(())
}

/// Redraw every motif cell from its conjugate conditional.
pub fn update_motif<R: Rng + ?Sized>(
    state: &mut CoClusterState,
    data: &DataBlock,
    rng: &mut R,
) -> Result<()> {
    let mut sw = AnySweeper::new(state, data)?;
    sw.update_motif(rng);
    state.motif = sw.motif();
    Ok(())
}

/// Normal-normal conjugate motif refresh for a continuous block.
pub fn update_motif_continuous<R: Rng + ?Sized>(
    state: &mut CoClusterState,
    data: &DataBlock,
    rng: &mut R,
) -> Result<()> {
    if !matches!(data, DataBlock::Continuous(_)) {
        return Err(Error::invalid("expected a continuous block"));
    }
    update_motif(state, data, rng)
}

/// Discrete full-conditional motif refresh for a factor block.
pub fn update_motif_factor<R: Rng + ?Sized>(
    state: &mut CoClusterState,
    data: &DataBlock,
    rng: &mut R,
) -> Result<()> {
    if !matches!(data, DataBlock::Factor { .. }) {
        return Err(Error::invalid("expected a factor block"));
    }
    update_motif(state, data, rng)
}

/// Refresh σ², τ² (continuous) or g, W (factor) given the current motifs.
pub fn update_likelihood_params<R: Rng + ?Sized>(
    state: &mut CoClusterState,
    data: &DataBlock,
    rng: &mut R,
) -> Result<()> {
    let mut sw = AnySweeper::new(state, data)?;
    sw.update_likelihood(rng);
    state.likelihood = sw.likelihood();
    Ok(())
}

/// Conjugate posterior `(mean, variance)` of a continuous motif value for
/// `n` mapped cells with sum `sum`.
pub fn motif_posterior(lik: &ContinuousLik, n: usize, sum: f64) -> (f64, f64) {
    let x = DMatrix::zeros(0, 0);
    let k = GaussKernel {
        x: &x,
        sigma2: lik.sigma2,
        tau2: lik.tau2,
    };
    k.posterior(&GaussStats {
        n: n as f64,
        sum,
        sumsq: 0.0,
    })
}

/// Full-conditional probabilities of a factor motif cell given the observed
/// level counts of its mapped cells (index `k` is level `k + 1`).
pub fn motif_level_probs(lik: &FactorLik, counts: &[u32]) -> Vec<f64> {
    let x = DMatrix::zeros(0, 0);
    let k = CategoricalKernel::new(&x, lik);
    super::random::softmax(&k.level_log_weights(counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmc::likelihood::InvGammaPrior;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cont_state(rows: Vec<usize>, cols: Vec<usize>, lik: ContinuousLik) -> CoClusterState {
        let qr = rows.iter().max().unwrap() + 1;
        let qc = cols.iter().max().unwrap() + 1;
        CoClusterState {
            row_assign: rows,
            col_assign: cols,
            motif: Motif::Continuous(DMatrix::zeros(qr, qc)),
            row_mass: 1.0,
            col_mass: 1.0,
            likelihood: Likelihood::Continuous(lik),
        }
    }

    fn lik(sigma2: f64, tau2: f64) -> ContinuousLik {
        ContinuousLik {
            sigma2,
            tau2,
            sigma2_prior: InvGammaPrior::default(),
            sigma2_upper: 10.0,
            tau2_prior: InvGammaPrior::default(),
        }
    }

    #[test]
    fn single_column_stays_alone() {
        let data = DataBlock::Continuous(DMatrix::from_column_slice(3, 1, &[0.1, 0.5, -0.3]));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut st = cont_state(vec![0, 0, 1], vec![0], lik(0.5, 1.0));
        for _ in 0..50 {
            gibbs_update_col(&mut st, &data, 0, &mut rng).unwrap();
            assert_eq!(st.col_assign, vec![0]);
            st.validate(&data).unwrap();
        }
    }

    #[test]
    fn single_row_single_clique() {
        let data = DataBlock::Continuous(DMatrix::from_row_slice(1, 3, &[0.1, 0.5, -0.3]));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut st = cont_state(vec![0], vec![0, 1, 1], lik(0.5, 1.0));
        for _ in 0..50 {
            gibbs_update_row(&mut st, &data, 0, &mut rng).unwrap();
            assert_eq!(st.row_assign, vec![0]);
        }
    }

    #[test]
    fn identical_columns_co_cluster_under_low_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base: Vec<f64> = (0..6).map(|i| (i as f64 - 2.5) * 0.8).collect();
        let other: Vec<f64> = (0..6).map(|i| if i % 2 == 0 { 1.5 } else { -1.5 }).collect();
        let mut m = DMatrix::zeros(6, 3);
        for i in 0..6 {
            m[(i, 0)] = base[i];
            m[(i, 1)] = base[i];
            m[(i, 2)] = other[i];
        }
        let data = DataBlock::Continuous(m);
        let mut st = cont_state((0..6).collect(), vec![0, 1, 2], lik(1e-4, 4.0));
        let mut together = 0;
        let sweeps = 1000;
        for _ in 0..sweeps {
            gibbs_update_col(&mut st, &data, 0, &mut rng).unwrap();
            gibbs_update_col(&mut st, &data, 1, &mut rng).unwrap();
            together += (st.col_assign[0] == st.col_assign[1]) as usize;
        }
        assert!(together as f64 / sweeps as f64 >= 0.99, "{together}");
    }

    #[test]
    fn identical_rows_share_a_clique_under_low_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut m = DMatrix::zeros(3, 6);
        for j in 0..6 {
            m[(0, j)] = (j as f64 - 2.5) * 0.7;
            m[(1, j)] = m[(0, j)];
            m[(2, j)] = if j % 2 == 0 { 2.0 } else { -2.0 };
        }
        let data = DataBlock::Continuous(m);
        let mut st = cont_state(vec![0, 1, 2], (0..6).collect(), lik(1e-4, 4.0));
        let mut together = 0;
        for _ in 0..1000 {
            for i in 0..3 {
                gibbs_update_row(&mut st, &data, i, &mut rng).unwrap();
            }
            together += (st.row_assign[0] == st.row_assign[1]) as usize;
        }
        assert!(together >= 990, "{together}");
    }

    #[test]
    fn huge_mass_opens_new_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = DataBlock::Continuous(DMatrix::from_fn(4, 4, |i, j| (i + j) as f64 * 0.1));
        let mut st = cont_state(vec![0; 4], vec![0; 4], lik(0.5, 1.0));
        st.col_mass = 1e12;
        st.row_mass = 1e12;
        for j in 0..4 {
            gibbs_update_col(&mut st, &data, j, &mut rng).unwrap();
        }
        for i in 0..4 {
            gibbs_update_row(&mut st, &data, i, &mut rng).unwrap();
        }
        assert_eq!(st.n_clusters(), 4);
        assert_eq!(st.n_cliques(), 4);
        st.validate(&data).unwrap();
    }

    #[test]
    fn continuous_motif_posterior_and_limits() {
        let l = lik(1.0, 1e6);
        let (m, v) = motif_posterior(&l, 4, 8.0);
        assert!((m - 2.0).abs() < 1e-2 && (v - 0.25).abs() < 1e-5);
        let (m0, v0) = motif_posterior(&l, 0, 0.0);
        assert_eq!((m0, v0), (0.0, 1e6));
        let (m, _) = motif_posterior(&lik(1.0, 1e-12), 4, 8.0);
        assert!(m.abs() < 1e-9);
    }

    #[test]
    fn factor_motif_conditional() {
        let mut f = FactorLik::new(2);
        f.l = vec![0.95, 0.95];
        f.w_tilde = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        f.rebuild_w();
        let p = motif_level_probs(&f, &[0, 5]);
        assert!(p[1] >= 0.99, "{p:?}");
        assert_eq!(motif_level_probs(&f, &[0, 0]), vec![0.5, 0.5]);
        let mut u = FactorLik::new(2);
        u.w = DMatrix::from_element(2, 2, 0.5);
        let p = motif_level_probs(&u, &[3, 7]);
        assert!((p[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sigma2_draws_respect_truncation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = DMatrix::from_element(4, 4, 1.0);
        let data = DataBlock::Continuous(x.clone());
        let mut l = lik(0.1, 1.0);
        l.sigma2_upper = 0.2;
        let mut st = cont_state(vec![0; 4], vec![0; 4], l);
        st.motif = Motif::Continuous(DMatrix::from_element(1, 1, 1.0));
        for _ in 0..200 {
            update_likelihood_params(&mut st, &data, &mut rng).unwrap();
            let Likelihood::Continuous(l) = &st.likelihood else { unreachable!() };
            assert!(l.sigma2 <= 0.2 && l.sigma2 > 0.0);
            // Zero residuals: draws sit well below the bound.
            assert!(l.sigma2 < 0.2);
        }
    }

    #[test]
    fn factor_anchor_stays_above_truncation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let levels = DMatrix::from_element(6, 5, 2u8);
        let data = DataBlock::Factor {
            levels,
            n_levels: 2,
        };
        let mut st = CoClusterState::with_partitions(
            &data,
            vec![0; 6],
            vec![0; 5],
            1.0,
            1.0,
            Likelihood::Factor(FactorLik::new(2)),
            &mut rng,
        )
        .unwrap();
        let mut mean_l = 0.0;
        for _ in 0..500 {
            update_motif(&mut st, &data, &mut rng).unwrap();
            update_likelihood_params(&mut st, &data, &mut rng).unwrap();
            let Likelihood::Factor(f) = &st.likelihood else { unreachable!() };
            f.validate().unwrap();
            assert!(f.l.iter().all(|&l| l > 0.85));
            mean_l += f.l[1];
        }
        // Prior mean of the truncated Beta(9, 1) is about 0.93; data push it up.
        assert!(mean_l / 500.0 > 0.93);
    }

    #[test]
    fn g_posterior_is_conjugate() {
        // Ten motif cells at level 1, Dirichlet(1, 1) prior: g_1 ~ Beta(11, 1).
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let levels = DMatrix::from_element(10, 1, 1u8);
        let data = DataBlock::Factor {
            levels,
            n_levels: 2,
        };
        let mut st = CoClusterState {
            row_assign: (0..10).collect(),
            col_assign: vec![0],
            motif: Motif::Factor(DMatrix::from_element(10, 1, 1)),
            row_mass: 1.0,
            col_mass: 1.0,
            likelihood: Likelihood::Factor(FactorLik::new(2)),
        };
        let n = 20_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            update_likelihood_params(&mut st, &data, &mut rng).unwrap();
            let Likelihood::Factor(f) = &st.likelihood else { unreachable!() };
            s1 += f.g[0];
            s2 += f.g[0] * f.g[0];
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!((mean - 11.0 / 12.0).abs() < 0.003, "{mean}");
        let beta_var = 11.0 / (144.0 * 13.0);
        assert!((var - beta_var).abs() < 0.1 * beta_var, "{var}");
    }
}
