use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::crp::canonicalize;
use super::likelihood::{ContinuousLik, FactorLik, Likelihood};
use super::sampler::AnySweeper;
use super::state::{CoClusterState, DataBlock, Motif};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub burn_in: usize,
    pub samples: usize,
    pub thin: usize,
    pub seed: u64,
    pub trace_hyperparams: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            burn_in: 10_000,
            samples: 50_000,
            thin: 1,
            seed: 0,
            trace_hyperparams: false,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.thin == 0 {
            return Err(Error::invalid("samples and thin must be positive"));
        }
        Ok(())
    }
}

/// One recorded draw of the scalar chain summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperSample {
    pub iteration: u64,
    pub n_cliques: usize,
    pub n_clusters: usize,
    pub log_lik: f64,
    /// Values named by [`McmcTrace::hyper_names`].
    pub values: Vec<f64>,
}

/// Running posterior sums of the motif cells under frozen assignments.
#[derive(Debug, Clone, PartialEq)]
pub enum MotifSums {
    Continuous(DMatrix<f64>),
    /// `counts[k][(v, u)]` = draws of level `k + 1` in cell `(v, u)`.
    Factor(Vec<DMatrix<f64>>),
}

#[derive(Debug, Clone)]
pub struct McmcTrace {
    pub n_samples: usize,
    /// Normalized co-clique frequencies, `N x N`.
    pub row_coassign: DMatrix<f64>,
    /// Normalized co-cluster frequencies, `p x p`.
    pub col_coassign: DMatrix<f64>,
    /// Distinct sampled row partitions in canonical labels, in order of first
    /// appearance.
    pub row_partitions: Vec<Vec<usize>>,
    pub col_partitions: Vec<Vec<usize>>,
    /// Present only for chains with frozen assignments.
    pub motif_sums: Option<MotifSums>,
    pub hyper_names: Vec<String>,
    pub hyper_trace: Vec<HyperSample>,
    likelihood_sum: Likelihood,
    pub final_state: CoClusterState,
}

impl McmcTrace {
    /// Posterior-mean motif (continuous) or per-cell posterior mode (factor,
    /// ties to the lower level).
    pub fn motif_estimate(&self) -> Option<Motif> {
        let n = self.n_samples as f64;
        match self.motif_sums.as_ref()? {
            MotifSums::Continuous(s) => Some(Motif::Continuous(s / n)),
            MotifSums::Factor(counts) => {
                let (qr, qc) = counts[0].shape();
                Some(Motif::Factor(DMatrix::from_fn(qr, qc, |v, u| {
                    let mut best = 0;
                    for k in 1..counts.len() {
                        if counts[k][(v, u)] > counts[best][(v, u)] {
                            best = k;
                        }
                    }
                    (best + 1) as u8
                })))
            }
        }
    }

    /// Posterior means of the likelihood parameters.
    pub fn mean_likelihood(&self) -> Likelihood {
        let n = self.n_samples as f64;
        match &self.likelihood_sum {
            Likelihood::Continuous(l) => Likelihood::Continuous(ContinuousLik {
                sigma2: l.sigma2 / n,
                tau2: l.tau2 / n,
                ..l.clone()
            }),
            Likelihood::Factor(l) => {
                let g: Vec<f64> = l.g.iter().map(|v| v / n).collect();
                let gs: f64 = g.iter().sum();
                let mut m = FactorLik {
                    g: g.iter().map(|v| v / gs).collect(),
                    w_tilde: &l.w_tilde / n,
                    l: l.l.iter().map(|v| v / n).collect(),
                    ..l.clone()
                };
                m.rebuild_w();
                Likelihood::Factor(m)
            }
        }
    }

    /// Hyperparameter trace as CSV: iteration, block counts, log-likelihood
    /// and one column per named parameter.
    pub fn write_hyper_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        let mut header = vec![
            "iteration".to_string(),
            "n_cliques".into(),
            "n_clusters".into(),
            "log_lik".into(),
        ];
        header.extend(self.hyper_names.iter().cloned());
        w.write_record(&header).map_err(|e| Error::csv(path, e))?;
        for h in &self.hyper_trace {
            let mut rec = vec![
                h.iteration.to_string(),
                h.n_cliques.to_string(),
                h.n_clusters.to_string(),
                h.log_lik.to_string(),
            ];
            rec.extend(h.values.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

const COASSIGN_MAGIC: &[u8; 8] = b"MPSCOASN";

/// Write a square co-assignment matrix as `MPSCOASN`, `n: u64`, then `n * n`
/// little-endian `f64` in row-major order.
pub fn write_coassign(m: &DMatrix<f64>, path: &Path) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension("co-assignment matrix must be square".into()));
    }
    let n = m.nrows();
    let mut buf = Vec::with_capacity(16 + 8 * n * n);
    buf.extend_from_slice(COASSIGN_MAGIC);
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    for i in 0..n {
        for j in 0..n {
            buf.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_coassign(path: &Path) -> Result<DMatrix<f64>> {
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    let bad = || Error::invalid(format!("{}: not a co-assignment file", path.display()));
    if buf.len() < 16 || &buf[..8] != COASSIGN_MAGIC {
        return Err(bad());
    }
    let n = u64::from_le_bytes(buf[8..16].try_into().expect("8 bytes")) as usize;
    if buf.len() != 16 + 8 * n * n {
        return Err(bad());
    }
    let vals = buf[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    Ok(DMatrix::from_row_iterator(n, n, vals))
}

/// Serializable snapshot sufficient to resume a chain bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub iteration: u64,
    pub frozen: bool,
    pub state: CoClusterState,
    pub rng: ChaCha8Rng,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let s = serde_json::to_string(self).map_err(|e| Error::json("checkpoint", e))?;
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&s).map_err(|e| Error::json(path.display().to_string(), e))
    }
}

/// A running chain over one data block.
pub struct Chain<'a> {
    sweeper: AnySweeper<'a>,
    row_mass: f64,
    col_mass: f64,
    rng: ChaCha8Rng,
    iteration: u64,
    frozen: bool,
}

impl<'a> Chain<'a> {
    pub fn new(data: &'a DataBlock, init: &CoClusterState, seed: u64) -> Result<Self> {
        Ok(Self {
            sweeper: AnySweeper::new(init, data)?,
            row_mass: init.row_mass,
            col_mass: init.col_mass,
            rng: ChaCha8Rng::seed_from_u64(seed),
            iteration: 0,
            frozen: false,
        })
    }

    pub fn resume(data: &'a DataBlock, ckpt: &Checkpoint) -> Result<Self> {
        Ok(Self {
            sweeper: AnySweeper::new(&ckpt.state, data)?,
            row_mass: ckpt.state.row_mass,
            col_mass: ckpt.state.col_mass,
            rng: ckpt.rng.clone(),
            iteration: ckpt.iteration,
            frozen: ckpt.frozen,
        })
    }

    /// Hold both partitions fixed; sweeps then refresh motifs and
    /// likelihood parameters only.
    pub fn frozen(mut self, frozen: bool) -> Self {
        self.frozen = frozen;
        self
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// One full sweep: every row, every column, motifs, likelihood.
    pub fn sweep(&mut self) -> Result<()> {
        self.sweeper.rebuild_stats();
        if !self.frozen {
            for i in 0..self.sweeper.n_rows() {
                self.sweeper.update_row(i, self.row_mass, &mut self.rng);
            }
            for j in 0..self.sweeper.n_cols() {
                self.sweeper.update_col(j, self.col_mass, &mut self.rng);
            }
            self.sweeper.rebuild_stats();
        }
        self.sweeper.update_motif(&mut self.rng);
        self.sweeper.update_likelihood(&mut self.rng);
        self.iteration += 1;
        if !self.sweeper.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite parameter after sweep {}: {:?}",
                self.iteration,
                self.sweeper.likelihood()
            )));
        }
        Ok(())
    }

    pub fn state(&self) -> CoClusterState {
        self.sweeper.to_state(self.row_mass, self.col_mass)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            iteration: self.iteration,
            frozen: self.frozen,
            state: self.state(),
            rng: self.rng.clone(),
        }
    }

    /// Run `config.burn_in` sweeps, then record `config.samples` draws taken
    /// every `config.thin` sweeps.
    pub fn run(&mut self, config: &McmcConfig) -> Result<McmcTrace> {
        config.validate()?;
        for _ in 0..config.burn_in {
            self.sweep()?;
        }
        let mut acc = Accumulator::new(&self.sweeper, self.frozen, config.trace_hyperparams);
        for _ in 0..config.samples {
            for _ in 0..config.thin {
                self.sweep()?;
            }
            acc.record(&self.sweeper, self.iteration);
        }
        Ok(acc.finish(self.state()))
    }
}

/// One full sweep of a standalone state.
pub fn full_sweep<R: Rng + ?Sized>(
    state: &mut CoClusterState,
    data: &DataBlock,
    rng: &mut R,
) -> Result<()> {
    let mut sw = AnySweeper::new(state, data)?;
    for i in 0..sw.n_rows() {
        sw.update_row(i, state.row_mass, rng);
    }
    for j in 0..sw.n_cols() {
        sw.update_col(j, state.col_mass, rng);
    }
    sw.rebuild_stats();
    sw.update_motif(rng);
    sw.update_likelihood(rng);
    *state = sw.to_state(state.row_mass, state.col_mass);
    Ok(())
}

/// Run a chain from `init` with `config.seed`.
pub fn run_chain(data: &DataBlock, config: &McmcConfig, init: &CoClusterState) -> Result<McmcTrace> {
    Chain::new(data, init, config.seed)?.run(config)
}

/// Run a chain with the partitions of `init` held fixed.
pub fn run_frozen_chain(
    data: &DataBlock,
    config: &McmcConfig,
    init: &CoClusterState,
) -> Result<McmcTrace> {
    Chain::new(data, init, config.seed)?.frozen(true).run(config)
}

struct Accumulator {
    n: usize,
    row_co: DMatrix<f64>,
    col_co: DMatrix<f64>,
    row_parts: Vec<Vec<usize>>,
    col_parts: Vec<Vec<usize>>,
    seen_rows: HashSet<Vec<usize>>,
    seen_cols: HashSet<Vec<usize>>,
    motif: Option<MotifSums>,
    names: Vec<String>,
    hyper: Vec<HyperSample>,
    trace_hyper: bool,
    frozen: bool,
    lik_sum: Option<Likelihood>,
}

fn add_coassign(co: &mut DMatrix<f64>, assign: &[usize]) {
    let q = assign.iter().max().map_or(0, |m| m + 1);
    let mut members = vec![Vec::new(); q];
    for (i, &a) in assign.iter().enumerate() {
        members[a].push(i);
    }
    for m in &members {
        for &i in m {
            for &j in m {
                co[(i, j)] += 1.0;
            }
        }
    }
}

fn hyper_values(lik: &Likelihood) -> (Vec<String>, Vec<f64>) {
    match lik {
        Likelihood::Continuous(l) => (vec!["sigma2".into(), "tau2".into()], vec![l.sigma2, l.tau2]),
        Likelihood::Factor(l) => {
            let a = l.n_levels;
            let mut names: Vec<String> = (1..=a).map(|k| format!("g{k}")).collect();
            names.extend((1..=a).map(|k| format!("l{k}")));
            let mut vals = l.g.clone();
            vals.extend(l.l.iter().copied());
            (names, vals)
        }
    }
}

fn add_likelihood(sum: &mut Likelihood, x: &Likelihood) {
    match (sum, x) {
        (Likelihood::Continuous(s), Likelihood::Continuous(x)) => {
            s.sigma2 += x.sigma2;
            s.tau2 += x.tau2;
        }
        (Likelihood::Factor(s), Likelihood::Factor(x)) => {
            for (a, b) in s.g.iter_mut().zip(&x.g) {
                *a += b;
            }
            for (a, b) in s.l.iter_mut().zip(&x.l) {
                *a += b;
            }
            s.w_tilde += &x.w_tilde;
        }
        _ => unreachable!("likelihood type is fixed for a chain"),
    }
}

impl Accumulator {
    fn new(sw: &AnySweeper, frozen: bool, trace_hyper: bool) -> Self {
        let (n, p) = (sw.n_rows(), sw.n_cols());
        let motif = frozen.then(|| match sw.motif() {
            Motif::Continuous(m) => MotifSums::Continuous(DMatrix::zeros(m.nrows(), m.ncols())),
            Motif::Factor(m) => {
                let a = match sw.likelihood() {
                    Likelihood::Factor(l) => l.n_levels,
                    Likelihood::Continuous(_) => unreachable!(),
                };
                MotifSums::Factor(vec![DMatrix::zeros(m.nrows(), m.ncols()); a])
            }
        });
        let names = hyper_values(&sw.likelihood()).0;
        Self {
            n: 0,
            row_co: DMatrix::zeros(n, n),
            col_co: DMatrix::zeros(p, p),
            row_parts: Vec::new(),
            col_parts: Vec::new(),
            seen_rows: HashSet::new(),
            seen_cols: HashSet::new(),
            motif,
            names,
            hyper: Vec::new(),
            trace_hyper,
            frozen,
            lik_sum: None,
        }
    }

    fn record(&mut self, sw: &AnySweeper, iteration: u64) {
        self.n += 1;
        if !self.frozen || self.n == 1 {
            add_coassign(&mut self.row_co, sw.rows());
            add_coassign(&mut self.col_co, sw.cols());
            for (parts, seen, assign) in [
                (&mut self.row_parts, &mut self.seen_rows, sw.rows()),
                (&mut self.col_parts, &mut self.seen_cols, sw.cols()),
            ] {
                let c = canonicalize(assign);
                if seen.insert(c.clone()) {
                    parts.push(c);
                }
            }
        }
        match &mut self.motif {
            Some(MotifSums::Continuous(s)) => sw.for_each_motif(|v, u, m| s[(v, u)] += m),
            Some(MotifSums::Factor(c)) => {
                sw.for_each_motif(|v, u, m| c[m as usize - 1][(v, u)] += 1.0)
            }
            None => {}
        }
        let lik = sw.likelihood();
        match &mut self.lik_sum {
            Some(s) => add_likelihood(s, &lik),
            None => self.lik_sum = Some(lik.clone()),
        }
        if self.trace_hyper {
            self.hyper.push(HyperSample {
                iteration,
                n_cliques: sw.n_cliques(),
                n_clusters: sw.n_clusters(),
                log_lik: sw.log_likelihood(),
                values: hyper_values(&lik).1,
            });
        }
    }

    fn finish(self, final_state: CoClusterState) -> McmcTrace {
        let scale = if self.frozen { 1.0 } else { self.n as f64 };
        McmcTrace {
            n_samples: self.n,
            row_coassign: self.row_co / scale,
            col_coassign: self.col_co / scale,
            row_partitions: self.row_parts,
            col_partitions: self.col_parts,
            motif_sums: self.motif,
            hyper_names: self.names,
            hyper_trace: self.hyper,
            likelihood_sum: self.lik_sum.expect("at least one sample"),
            final_state,
        }
    }
}
