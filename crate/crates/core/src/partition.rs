//! Point estimates from co-clustering chains: least-squares allocations,
//! conditional motif estimates, subject motif vectors and test-subject
//! clique assignment.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{MixedDataset, StandardizationParams};
use crate::error::{Error, Result};
use crate::mcmc::crp::{block_sizes, canonicalize};
use crate::mcmc::likelihood::{CategoricalKernel, CellKernel, GaussKernel, GaussStats};
use crate::mcmc::random::{sample_log_weights, softmax};
use crate::mcmc::{
    run_chain, run_frozen_chain, CoClusterState, DataBlock, Likelihood, McmcConfig, McmcTrace,
    Motif,
};

/// Dahl's least-squares loss of a partition against co-assignment
/// frequencies, summed over pairs `i < j`.
pub fn dahl_loss(coassign: &DMatrix<f64>, assign: &[usize]) -> f64 {
    let n = assign.len();
    let mut loss = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = coassign[(i, j)] - if assign[i] == assign[j] { 1.0 } else { 0.0 };
            loss += d * d;
        }
    }
    loss
}

/// The candidate minimizing [`dahl_loss`], earliest on ties, in canonical
/// labels, together with its loss.
pub fn least_squares_allocation(
    coassign: &DMatrix<f64>,
    candidates: &[Vec<usize>],
) -> Result<(Vec<usize>, f64)> {
    let n = coassign.nrows();
    if candidates.is_empty() {
        return Err(Error::invalid("no candidate partitions"));
    }
    let mut best: Option<(usize, f64)> = None;
    for (k, c) in candidates.iter().enumerate() {
        if c.len() != n {
            return Err(Error::Dimension(format!(
                "candidate of length {} for {n} elements",
                c.len()
            )));
        }
        let loss = dahl_loss(coassign, c);
        if best.is_none_or(|(_, b)| loss < b) {
            best = Some((k, loss));
        }
    }
    let (k, loss) = best.expect("nonempty");
    Ok((canonicalize(&candidates[k]), loss))
}

/// Point estimate for one covariate block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockFit {
    pub names: Vec<String>,
    /// Zero-based clique of every training subject.
    pub row_allocation: Vec<usize>,
    /// Zero-based cluster of every column.
    pub col_allocation: Vec<usize>,
    /// Posterior mean (continuous) or per-cell mode (factor, levels one-based).
    pub motif: Motif,
    /// Posterior means of the likelihood parameters under the allocations.
    pub likelihood: Likelihood,
    pub row_mass: f64,
    pub col_mass: f64,
}

impl BlockFit {
    pub fn n_cliques(&self) -> usize {
        self.motif.shape().0
    }

    pub fn n_clusters(&self) -> usize {
        self.motif.shape().1
    }

    pub fn n_levels(&self) -> Option<usize> {
        match &self.likelihood {
            Likelihood::Factor(l) => Some(l.n_levels),
            Likelihood::Continuous(_) => None,
        }
    }

    /// Motif values of a clique row as reals (factor levels as `f64`).
    pub fn motif_row(&self, clique: usize) -> Vec<f64> {
        match &self.motif {
            Motif::Continuous(m) => m.row(clique).iter().copied().collect(),
            Motif::Factor(m) => m.row(clique).iter().map(|&v| v as f64).collect(),
        }
    }

    /// Expand a row of cluster values to one value per column.
    pub fn map_to_columns(&self, motif_row: &[f64]) -> Vec<f64> {
        self.col_allocation.iter().map(|&c| motif_row[c]).collect()
    }
}

/// Motif estimates for all blocks of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotifFit {
    /// Continuous block first when present, then factor blocks in order.
    pub blocks: Vec<BlockFit>,
    /// Parameters used to standardize the continuous training block.
    pub standardization: Option<StandardizationParams>,
}

impl MotifFit {
    pub fn n_subjects(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.row_allocation.len())
    }

    pub fn motif_length(&self) -> usize {
        self.blocks.iter().map(BlockFit::n_clusters).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::json("motif fit", e))
    }
}

/// One entry of a subject motif vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MotifValue {
    Real(f64),
    Level { level: u8, n_levels: usize },
}

/// Cluster values for each block, in block order, from clique rows.
pub fn motif_vector_from_rows(fit: &MotifFit, rows: &[Vec<f64>]) -> Vec<MotifValue> {
    let mut out = Vec::with_capacity(fit.motif_length());
    for (b, row) in fit.blocks.iter().zip(rows) {
        match b.n_levels() {
            None => out.extend(row.iter().map(|&v| MotifValue::Real(v))),
            Some(a) => out.extend(row.iter().map(|&v| MotifValue::Level {
                level: v as u8,
                n_levels: a,
            })),
        }
    }
    out
}

/// Concatenated motif rows of training subject `i` over all blocks.
pub fn subject_motif_vector(fit: &MotifFit, i: usize) -> Result<Vec<MotifValue>> {
    if i >= fit.n_subjects() {
        return Err(Error::invalid(format!(
            "subject {i} out of range for {} training subjects",
            fit.n_subjects()
        )));
    }
    let rows: Vec<Vec<f64>> = fit
        .blocks
        .iter()
        .map(|b| b.motif_row(b.row_allocation[i]))
        .collect();
    Ok(motif_vector_from_rows(fit, &rows))
}

/// Run a frozen-assignment chain and summarize it as a block fit.
pub fn conditional_motif_estimate(
    data: &DataBlock,
    names: Vec<String>,
    row_allocation: Vec<usize>,
    col_allocation: Vec<usize>,
    likelihood: Likelihood,
    masses: (f64, f64),
    config: &McmcConfig,
) -> Result<BlockFit> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = CoClusterState::with_partitions(
        data,
        row_allocation.clone(),
        col_allocation.clone(),
        masses.0,
        masses.1,
        likelihood,
        &mut rng,
    )?;
    let tr = run_frozen_chain(data, config, &init)?;
    Ok(BlockFit {
        names,
        row_allocation,
        col_allocation,
        motif: tr.motif_estimate().expect("frozen chain keeps motif sums"),
        likelihood: tr.mean_likelihood(),
        row_mass: masses.0,
        col_mass: masses.1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub mcmc: McmcConfig,
    /// Chain settings for the frozen-assignment motif estimate; the seed is
    /// derived from `mcmc.seed`.
    pub conditional: McmcConfig,
    pub row_mass: f64,
    pub col_mass: f64,
    /// Minimum share of variance explained by the motifs, fixing the σ²
    /// truncation bound.
    pub r2_min: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            mcmc: McmcConfig::default(),
            conditional: McmcConfig {
                burn_in: 1_000,
                samples: 5_000,
                ..McmcConfig::default()
            },
            row_mass: 1.0,
            col_mass: 1.0,
            r2_min: 0.5,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        self.mcmc.validate()?;
        self.conditional.validate()?;
        if !(self.row_mass > 0.0 && self.col_mass > 0.0) {
            return Err(Error::invalid("CRP masses must be positive"));
        }
        if !(0.0..1.0).contains(&self.r2_min) {
            return Err(Error::invalid("r2_min must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Deterministic child seed for stream `k` of a run.
pub fn derive_seed(seed: u64, k: u64) -> u64 {
    let mut z = seed ^ (k.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fit one block: free chain, least-squares allocations, frozen chain.
pub fn fit_block(
    data: &DataBlock,
    names: Vec<String>,
    config: &FitConfig,
    seed: u64,
) -> Result<(BlockFit, McmcTrace)> {
    let likelihood = match (data, data.default_likelihood()) {
        (DataBlock::Continuous(x), Likelihood::Continuous(_)) => Likelihood::Continuous(
            crate::mcmc::ContinuousLik::for_block(x, config.r2_min),
        ),
        (_, l) => l,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    let init = CoClusterState::initialize_with(
        data,
        config.row_mass,
        config.col_mass,
        likelihood.clone(),
        &mut rng,
    )?;
    let mcmc = McmcConfig {
        seed: derive_seed(seed, 1),
        ..config.mcmc.clone()
    };
    let trace = run_chain(data, &mcmc, &init)?;
    let (rows, _) = least_squares_allocation(&trace.row_coassign, &trace.row_partitions)?;
    let (cols, _) = least_squares_allocation(&trace.col_coassign, &trace.col_partitions)?;
    let cond = McmcConfig {
        seed: derive_seed(seed, 2),
        ..config.conditional.clone()
    };
    let fit = conditional_motif_estimate(
        data,
        names,
        rows,
        cols,
        likelihood,
        (config.row_mass, config.col_mass),
        &cond,
    )?;
    Ok((fit, trace))
}

/// Data blocks of a dataset in fit order, with their column names.
pub fn data_blocks(ds: &MixedDataset) -> Vec<(DataBlock, Vec<String>)> {
    let mut out = Vec::new();
    if ds.p1() > 0 {
        out.push((
            DataBlock::Continuous(ds.continuous.clone()),
            ds.continuous_names.clone(),
        ));
    }
    for b in &ds.factors {
        if b.ncols() > 0 {
            out.push((
                DataBlock::Factor {
                    levels: b.levels.clone(),
                    n_levels: b.n_levels,
                },
                b.names.clone(),
            ));
        }
    }
    out
}

/// Standardize the continuous block and fit every block with its own chain;
/// blocks run concurrently.
pub fn fit_motifs(ds: &MixedDataset, config: &FitConfig) -> Result<(MotifFit, Vec<McmcTrace>)> {
    config.validate()?;
    let (ds, standardization) = if ds.p1() > 0 {
        let (s, p) = crate::data::standardize_continuous(ds)?;
        (s, Some(p))
    } else {
        (ds.clone(), None)
    };
    let blocks = data_blocks(&ds);
    if blocks.is_empty() {
        return Err(Error::invalid("dataset has no covariates"));
    }
    let seed = config.mcmc.seed;
    let results: Vec<Result<(BlockFit, McmcTrace)>> = blocks
        .into_par_iter()
        .enumerate()
        .map(|(k, (data, names))| fit_block(&data, names, config, derive_seed(seed, 100 + k as u64)))
        .collect();
    let mut fits = Vec::new();
    let mut traces = Vec::new();
    for r in results {
        let (f, t) = r?;
        fits.push(f);
        traces.push(t);
    }
    Ok((
        MotifFit {
            blocks: fits,
            standardization,
        },
        traces,
    ))
}

/// A test subject's covariates for one block.
#[derive(Debug, Clone, Copy)]
pub enum TestRow<'a> {
    Continuous(&'a [f64]),
    Factor(&'a [u8]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CliqueAssignment {
    /// Existing clique, or `None` for a new clique.
    pub clique: Option<usize>,
    /// Posterior probability of the chosen option.
    pub probability: f64,
    /// Cluster values of the subject's motif row.
    pub motif_row: Vec<f64>,
}

/// Log weights of every existing clique followed by the new-clique option,
/// and the motif row a new clique would carry.
fn clique_log_weights(fit: &BlockFit, row: TestRow) -> Result<(Vec<f64>, Vec<f64>)> {
    let p = fit.col_allocation.len();
    let qc = fit.n_clusters();
    let sizes = block_sizes(&fit.row_allocation);
    let mut lw: Vec<f64> = sizes.iter().map(|&m| (m as f64).ln()).collect();
    match (row, &fit.motif, &fit.likelihood) {
        (TestRow::Continuous(x), Motif::Continuous(m), Likelihood::Continuous(l)) => {
            if x.len() != p {
                return Err(Error::Dimension(format!("test row has {} columns, fit has {p}", x.len())));
            }
            let ln_norm = -0.5 * (crate::mcmc::likelihood::LN_2PI + l.sigma2.ln());
            for (v, w) in lw.iter_mut().enumerate() {
                *w += x
                    .iter()
                    .zip(&fit.col_allocation)
                    .map(|(xj, &c)| ln_norm - (xj - m[(v, c)]).powi(2) / (2.0 * l.sigma2))
                    .sum::<f64>();
            }
            let empty = DMatrix::zeros(0, 0);
            let k = GaussKernel {
                x: &empty,
                sigma2: l.sigma2,
                tau2: l.tau2,
            };
            let mut stats = vec![GaussStats::default(); qc];
            for (xj, &c) in x.iter().zip(&fit.col_allocation) {
                stats[c].push(*xj);
            }
            lw.push(fit.row_mass.ln() + stats.iter().map(|s| k.log_marginal(s)).sum::<f64>());
            Ok((lw, stats.iter().map(|s| k.posterior(s).0).collect()))
        }
        (TestRow::Factor(x), Motif::Factor(m), Likelihood::Factor(l)) => {
            if x.len() != p {
                return Err(Error::Dimension(format!("test row has {} columns, fit has {p}", x.len())));
            }
            if let Some(bad) = x.iter().find(|&&v| v == 0 || v as usize > l.n_levels) {
                return Err(Error::LabelOutOfRange(format!("factor level {bad}")));
            }
            let empty = DMatrix::zeros(0, 0);
            let k = CategoricalKernel::new(&empty, l);
            let mut counts = vec![vec![0u32; l.n_levels]; qc];
            for (&xj, &c) in x.iter().zip(&fit.col_allocation) {
                counts[c][xj as usize - 1] += 1;
            }
            for (v, w) in lw.iter_mut().enumerate() {
                *w += (0..qc)
                    .map(|c| k.log_lik_level(&counts[c], m[(v, c)] as usize - 1))
                    .sum::<f64>();
            }
            lw.push(fit.row_mass.ln() + counts.iter().map(|s| k.log_marginal(s)).sum::<f64>());
            let modal = counts
                .iter()
                .map(|s| {
                    let w = k.level_log_weights(s);
                    let mut best = 0;
                    for (i, v) in w.iter().enumerate() {
                        if *v > w[best] {
                            best = i;
                        }
                    }
                    (best + 1) as f64
                })
                .collect();
            Ok((lw, modal))
        }
        _ => Err(Error::invalid("test row type does not match the block fit")),
    }
}

fn finish_assignment(fit: &BlockFit, lw: &[f64], choice: usize, new_row: Vec<f64>) -> CliqueAssignment {
    let probs = softmax(lw);
    let q = fit.n_cliques();
    if choice == q {
        CliqueAssignment {
            clique: None,
            probability: probs[choice],
            motif_row: new_row,
        }
    } else {
        CliqueAssignment {
            clique: Some(choice),
            probability: probs[choice],
            motif_row: fit.motif_row(choice),
        }
    }
}

/// Maximum-a-posteriori clique of a test subject. With `allow_new`, a new
/// clique competes with prior-predictive weight `α_r`.
pub fn assign_test_clique(fit: &BlockFit, row: TestRow, allow_new: bool) -> Result<CliqueAssignment> {
    let (mut lw, new_row) = clique_log_weights(fit, row)?;
    if !allow_new {
        lw.pop();
    }
    let mut best = 0;
    for (k, w) in lw.iter().enumerate() {
        if *w > lw[best] {
            best = k;
        }
    }
    Ok(finish_assignment(fit, &lw, best, new_row))
}

/// Draw the test subject's clique from its conditional instead of taking
/// the mode.
pub fn sample_test_clique<R: Rng + ?Sized>(
    fit: &BlockFit,
    row: TestRow,
    allow_new: bool,
    rng: &mut R,
) -> Result<CliqueAssignment> {
    let (mut lw, new_row) = clique_log_weights(fit, row)?;
    if !allow_new {
        lw.pop();
    }
    let k = sample_log_weights(&lw, rng);
    Ok(finish_assignment(fit, &lw, k, new_row))
}

/// Clique rows of test subjects for every block of `fit`; continuous rows
/// are standardized with the training parameters first.
pub fn assign_test_subjects(
    fit: &MotifFit,
    test: &MixedDataset,
    allow_new: bool,
) -> Result<Vec<Vec<CliqueAssignment>>> {
    let cont = match (&fit.standardization, test.p1()) {
        (Some(p), _) => Some(p.apply(&test.continuous)?),
        (None, 0) => None,
        (None, _) => Some(test.continuous.clone()),
    };
    let n = test.n_subjects();
    let factor_blocks: Vec<_> = test.factors.iter().filter(|b| b.ncols() > 0).collect();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut fi = 0;
            fit.blocks
                .iter()
                .map(|b| match b.n_levels() {
                    None => {
                        let x = cont.as_ref().ok_or_else(|| {
                            Error::Dimension("test data lacks continuous covariates".into())
                        })?;
                        let row: Vec<f64> = x.row(i).iter().copied().collect();
                        assign_test_clique(b, TestRow::Continuous(&row), allow_new)
                    }
                    Some(_) => {
                        let fb = factor_blocks.get(fi).ok_or_else(|| {
                            Error::Dimension("test data lacks a factor block".into())
                        })?;
                        fi += 1;
                        let row: Vec<u8> = fb.levels.row(i).iter().copied().collect();
                        assign_test_clique(b, TestRow::Factor(&row), allow_new)
                    }
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmc::likelihood::{ContinuousLik, FactorLik, InvGammaPrior};
    use proptest::prelude::*;

    fn toy() -> DMatrix<f64> {
        DMatrix::from_row_slice(
            4,
            4,
            &[1.0, 0.9, 0.1, 0.1, 0.9, 1.0, 0.1, 0.1, 0.1, 0.1, 1.0, 0.8, 0.1, 0.1, 0.8, 1.0],
        )
    }

    #[test]
    fn dahl_toy_example() {
        let c = toy();
        let cands = vec![vec![0, 1, 2, 3], vec![0, 0, 1, 1]];
        let (best, loss) = least_squares_allocation(&c, &cands).unwrap();
        assert_eq!(best, vec![0, 0, 1, 1]);
        // (0.1)² + (0.2)² + 4·(0.1)² = 0.09
        assert!((loss - 0.09).abs() < 1e-12);
        assert!((dahl_loss(&c, &cands[0]) - (0.81 + 0.64 + 4.0 * 0.01)).abs() < 1e-12);
    }

    #[test]
    fn dahl_perfect_consensus_and_single_candidate() {
        let a = vec![0, 0, 1, 2, 1];
        let c = DMatrix::from_fn(5, 5, |i, j| (a[i] == a[j]) as u8 as f64);
        let (best, loss) = least_squares_allocation(&c, &[vec![0; 5], a.clone()]).unwrap();
        assert_eq!((best, loss), (a, 0.0));
        let (best, _) = least_squares_allocation(&c, &[vec![0, 1, 2, 3, 4]]).unwrap();
        assert_eq!(best, vec![0, 1, 2, 3, 4]);
        assert!(least_squares_allocation(&c, &[]).is_err());
    }

    #[test]
    fn dahl_ties_pick_earliest() {
        let c = DMatrix::from_element(2, 2, 0.5);
        let (best, _) = least_squares_allocation(&c, &[vec![0, 1], vec![0, 0]]).unwrap();
        assert_eq!(best, vec![0, 1]);
    }

    proptest! {
        #[test]
        fn dahl_label_invariant_and_minimal(
            parts in prop::collection::vec(prop::collection::vec(0usize..3, 6), 1..6),
            perm in Just([2usize, 0, 1]),
        ) {
            let parts: Vec<Vec<usize>> = parts.iter().map(|p| canonicalize(p)).collect();
            let mut co = DMatrix::zeros(6, 6);
            for p in &parts {
                for i in 0..6 { for j in 0..6 { if p[i] == p[j] { co[(i, j)] += 1.0; } } }
            }
            co /= parts.len() as f64;
            let (best, loss) = least_squares_allocation(&co, &parts).unwrap();
            for p in &parts {
                prop_assert!(loss <= dahl_loss(&co, p) + 1e-15);
            }
            let relabelled: Vec<Vec<usize>> = parts
                .iter()
                .map(|p| p.iter().map(|&l| perm[l]).collect())
                .collect();
            let (best2, loss2) = least_squares_allocation(&co, &relabelled).unwrap();
            prop_assert_eq!(best, best2);
            prop_assert_eq!(loss, loss2);
        }
    }

    fn cont_lik(sigma2: f64, tau2: f64) -> ContinuousLik {
        ContinuousLik {
            sigma2,
            tau2,
            sigma2_prior: InvGammaPrior::default(),
            sigma2_upper: 10.0,
            tau2_prior: InvGammaPrior::default(),
        }
    }

    #[test]
    fn conditional_estimate_continuous_cell() {
        let data = DataBlock::Continuous(DMatrix::from_element(5, 1, 1.0));
        let mut l = cont_lik(0.5, 1e4);
        l.tau2_prior = InvGammaPrior { shape: 2.0, scale: 1e4 };
        let cfg = McmcConfig {
            burn_in: 200,
            samples: 2000,
            seed: 3,
            ..McmcConfig::default()
        };
        let f = conditional_motif_estimate(
            &data,
            vec!["a".into()],
            vec![0; 5],
            vec![0],
            Likelihood::Continuous(l),
            (1.0, 1.0),
            &cfg,
        )
        .unwrap();
        let Motif::Continuous(m) = &f.motif else { panic!() };
        assert!((m[(0, 0)] - 1.0).abs() < 0.05, "{}", m[(0, 0)]);
    }

    #[test]
    fn conditional_estimate_factor_mode() {
        let mut col = vec![2u8; 9];
        col.push(1);
        let data = DataBlock::Factor {
            levels: DMatrix::from_column_slice(10, 1, &col),
            n_levels: 2,
        };
        let cfg = McmcConfig {
            burn_in: 50,
            samples: 500,
            seed: 4,
            ..McmcConfig::default()
        };
        let f = conditional_motif_estimate(
            &data,
            vec!["b".into()],
            vec![0; 10],
            vec![0],
            Likelihood::Factor(FactorLik::new(2)),
            (1.0, 1.0),
            &cfg,
        )
        .unwrap();
        assert_eq!(f.motif, Motif::Factor(DMatrix::from_element(1, 1, 2)));
    }

    #[test]
    fn singleton_partition_shrinks_data() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 3.0]);
        let data = DataBlock::Continuous(x.clone());
        let cfg = McmcConfig {
            burn_in: 100,
            samples: 3000,
            seed: 5,
            ..McmcConfig::default()
        };
        let f = conditional_motif_estimate(
            &data,
            vec!["a".into(), "b".into()],
            vec![0, 1],
            vec![0, 1],
            Likelihood::Continuous(ContinuousLik {
                sigma2_upper: 0.05,
                ..cont_lik(0.01, 1.0)
            }),
            (1.0, 1.0),
            &cfg,
        )
        .unwrap();
        let Motif::Continuous(m) = &f.motif else { panic!() };
        // One datum per cell: every estimate is the datum times a common
        // shrinkage factor in (0, 1].
        let ratios: Vec<f64> = x.iter().zip(m.iter()).map(|(d, e)| e / d).collect();
        for r in &ratios {
            assert!(*r > 0.0 && *r < 1.05, "{ratios:?}");
            assert!((r - ratios[0]).abs() < 0.1, "{ratios:?}");
        }
    }

    fn two_clique_fit() -> BlockFit {
        BlockFit {
            names: (0..4).map(|j| format!("c{j}")).collect(),
            row_allocation: vec![0, 0, 0, 1, 1, 1],
            col_allocation: vec![0, 0, 1, 1],
            motif: Motif::Continuous(DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0])),
            likelihood: Likelihood::Continuous(cont_lik(0.01, 1.0)),
            row_mass: 1.0,
            col_mass: 1.0,
        }
    }

    #[test]
    fn test_row_matching_a_motif_row() {
        let f = two_clique_fit();
        let a = assign_test_clique(&f, TestRow::Continuous(&[1.0, 1.0, -1.0, -1.0]), true).unwrap();
        assert_eq!(a.clique, Some(0));
        assert!(a.probability >= 0.99);
        assert_eq!(a.motif_row, vec![1.0, -1.0]);
    }

    #[test]
    fn far_test_row_opens_new_clique() {
        let f = two_clique_fit();
        let a = assign_test_clique(&f, TestRow::Continuous(&[3.0, 3.0, 3.0, 3.0]), true).unwrap();
        assert_eq!(a.clique, None);
        assert!(a.motif_row.iter().all(|&v| v > 2.5));
        let b = assign_test_clique(&f, TestRow::Continuous(&[3.0, 3.0, 3.0, 3.0]), false).unwrap();
        assert!(b.clique.is_some());
    }

    #[test]
    fn single_clique_with_tiny_mass() {
        let mut f = two_clique_fit();
        f.row_allocation = vec![0; 6];
        f.motif = Motif::Continuous(DMatrix::from_row_slice(1, 2, &[0.0, 0.0]));
        f.likelihood = Likelihood::Continuous(cont_lik(1.0, 1.0));
        f.row_mass = 1e-300;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in 0..20 {
            let x = [k as f64 * 0.3, -1.0, 0.5, 2.0];
            assert_eq!(sample_test_clique(&f, TestRow::Continuous(&x), true, &mut rng).unwrap().clique, Some(0));
        }
    }

    #[test]
    fn test_row_errors() {
        let f = two_clique_fit();
        assert!(matches!(
            assign_test_clique(&f, TestRow::Continuous(&[1.0]), true),
            Err(Error::Dimension(_))
        ));
        assert!(assign_test_clique(&f, TestRow::Factor(&[1, 1, 1, 1]), true).is_err());
    }

    #[test]
    fn factor_test_assignment() {
        let mut l = FactorLik::new(2);
        l.l = vec![0.95, 0.95];
        l.rebuild_w();
        let f = BlockFit {
            names: (0..6).map(|j| format!("f{j}")).collect(),
            row_allocation: vec![0, 0, 1, 1],
            col_allocation: vec![0, 0, 0, 1, 1, 1],
            motif: Motif::Factor(DMatrix::from_row_slice(2, 2, &[1, 2, 2, 1])),
            likelihood: Likelihood::Factor(l),
            row_mass: 1.0,
            col_mass: 1.0,
        };
        let a = assign_test_clique(&f, TestRow::Factor(&[2, 2, 2, 1, 1, 1]), true).unwrap();
        assert_eq!(a.clique, Some(1));
        assert_eq!(a.motif_row, vec![2.0, 1.0]);
    }

    #[test]
    fn motif_vectors() {
        let f = two_clique_fit();
        let mf = MotifFit {
            blocks: vec![f],
            standardization: None,
        };
        assert_eq!(subject_motif_vector(&mf, 0).unwrap(), subject_motif_vector(&mf, 2).unwrap());
        assert_eq!(subject_motif_vector(&mf, 4).unwrap().len(), 2);
        assert!(subject_motif_vector(&mf, 6).is_err());
    }
}
