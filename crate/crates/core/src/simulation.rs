//! Synthetic multi-study datasets with known o-MPS and the evaluation
//! metrics used to compare motif predictors with full covariates.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{class_labels, FactorBlock, MixedDataset, StandardizationParams};
use crate::error::{Error, Result};
use crate::mcmc::McmcConfig;
use crate::partition::{
    assign_test_subjects, derive_seed, fit_motifs, motif_vector_from_rows, subject_motif_vector,
    BlockFit, FitConfig, MotifFit,
};
use crate::regression::{fit_omps, predict_matrix, FitSpec, LambdaChoice, Penalty, PredictorCodec};

/// Planted co-clustering structure of the synthetic base covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantedConfig {
    pub cont_cliques: usize,
    pub cont_clusters: usize,
    pub motif_sd: f64,
    pub noise_sd: f64,
    pub factor_cliques: usize,
    pub factor_clusters: usize,
    pub n_levels: usize,
    /// Probability that a factor cell is replaced by another level.
    pub corruption: f64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            cont_cliques: 4,
            cont_clusters: 5,
            motif_sd: 1.0,
            noise_sd: 0.5,
            factor_cliques: 4,
            factor_clusters: 4,
            n_levels: 2,
            corruption: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_subjects: usize,
    pub p1: usize,
    pub p2: usize,
    pub n_studies: usize,
    pub n_groups: usize,
    pub mu: f64,
    pub svd_rank: usize,
    /// Probabilities of non-predictor, linear and quadratic covariates.
    pub predictor_probs: [f64; 3],
    pub train_fraction: f64,
    pub seed: u64,
    pub planted: PlantedConfig,
    pub fit: FitConfig,
    pub regressors: Vec<Penalty>,
    pub cv_folds: usize,
    pub n_lambda: usize,
    /// Let test subjects open cliques absent from the training fit.
    pub allow_new_cliques: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_subjects: 200,
            p1: 100,
            p2: 100,
            n_studies: 4,
            n_groups: 2,
            mu: 10.0,
            svd_rank: 50,
            predictor_probs: [0.5, 0.25, 0.25],
            train_fraction: 0.8,
            seed: 0,
            planted: PlantedConfig::default(),
            fit: FitConfig {
                mcmc: McmcConfig {
                    burn_in: 500,
                    samples: 1_000,
                    ..McmcConfig::default()
                },
                conditional: McmcConfig {
                    burn_in: 200,
                    samples: 500,
                    ..McmcConfig::default()
                },
                ..FitConfig::default()
            },
            regressors: vec![Penalty::Ridge, Penalty::Lasso],
            cv_folds: 5,
            n_lambda: 20,
            allow_new_cliques: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_subjects < 2 {
            return Err(Error::invalid("need at least two subjects"));
        }
        if self.svd_rank >= self.n_subjects {
            return Err(Error::invalid(format!(
                "SVD rank {} must be below the subject count {}",
                self.svd_rank, self.n_subjects
            )));
        }
        if self.svd_rank > self.p1 + self.p2 {
            return Err(Error::invalid("SVD rank exceeds the covariate count"));
        }
        if self.n_studies * self.n_groups < 2 {
            return Err(Error::invalid("need at least two study-group combinations"));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::invalid("mu must be nonnegative"));
        }
        let s: f64 = self.predictor_probs.iter().sum();
        if self.predictor_probs.iter().any(|p| !(*p >= 0.0)) || (s - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("predictor probabilities must sum to 1"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid("train fraction must lie in (0, 1)"));
        }
        let p = &self.planted;
        if p.cont_cliques == 0 || p.cont_clusters == 0 || p.factor_cliques == 0 || p.factor_clusters == 0
        {
            return Err(Error::invalid("planted block counts must be positive"));
        }
        if !(p.noise_sd >= 0.0 && p.motif_sd >= 0.0) || !(0.0..1.0).contains(&p.corruption) {
            return Err(Error::invalid("invalid planted noise settings"));
        }
        if p.n_levels < 2 || p.n_levels > u8::MAX as usize {
            return Err(Error::invalid("planted factor level count must be in 2..=255"));
        }
        if self.regressors.is_empty() {
            return Err(Error::invalid("no regressors requested"));
        }
        self.fit.validate()
    }
}

/// A continuous matrix generated from a planted motif structure.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedContinuous {
    pub values: DMatrix<f64>,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub motif: DMatrix<f64>,
}

/// A factor matrix generated from a planted motif structure.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedFactor {
    /// Levels in `1..=n_levels`.
    pub levels: DMatrix<u8>,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub motif: DMatrix<u8>,
}

fn random_labels<R: Rng + ?Sized>(n: usize, q: usize, rng: &mut R) -> Vec<usize> {
    // Every block occupied when n ≥ q.
    let mut v: Vec<usize> = (0..n).map(|i| i % q).collect();
    v.shuffle(rng);
    v
}

pub fn planted_continuous<R: Rng + ?Sized>(
    n: usize,
    p: usize,
    cliques: usize,
    clusters: usize,
    motif_sd: f64,
    noise_sd: f64,
    rng: &mut R,
) -> PlantedContinuous {
    let rows = random_labels(n, cliques, rng);
    let cols = random_labels(p, clusters, rng);
    let motif = DMatrix::from_fn(cliques, clusters, |_, _| {
        motif_sd * rng.sample::<f64, _>(StandardNormal)
    });
    let values = DMatrix::from_fn(n, p, |i, j| {
        motif[(rows[i], cols[j])] + noise_sd * rng.sample::<f64, _>(StandardNormal)
    });
    PlantedContinuous {
        values,
        rows,
        cols,
        motif,
    }
}

pub fn planted_factor<R: Rng + ?Sized>(
    n: usize,
    p: usize,
    cliques: usize,
    clusters: usize,
    n_levels: usize,
    corruption: f64,
    rng: &mut R,
) -> PlantedFactor {
    let rows = random_labels(n, cliques, rng);
    let cols = random_labels(p, clusters, rng);
    let motif = DMatrix::from_fn(cliques, clusters, |_, _| rng.random_range(1..=n_levels as u8));
    let levels = DMatrix::from_fn(n, p, |i, j| {
        let m = motif[(rows[i], cols[j])];
        if rng.random::<f64>() < corruption {
            let k = rng.random_range(1..n_levels as u8);
            if k >= m {
                k + 1
            } else {
                k
            }
        } else {
            m
        }
    });
    PlantedFactor {
        levels,
        rows,
        cols,
        motif,
    }
}

/// Where the base covariates come from.
pub enum CovariateSource<'a> {
    Resample(&'a MixedDataset),
    Planted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedTruth {
    pub continuous: Option<PlantedContinuous>,
    pub factor: Option<PlantedFactor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaseCovariates {
    pub continuous_names: Vec<String>,
    pub continuous: DMatrix<f64>,
    pub factors: Vec<FactorBlock>,
    pub truth: Option<PlantedTruth>,
}

impl BaseCovariates {
    pub fn n_subjects(&self) -> usize {
        self.continuous
            .nrows()
            .max(self.factors.first().map_or(0, |b| b.levels.nrows()))
    }

    /// All covariates as one numeric matrix; factor level `k` becomes `k − 1`.
    pub fn numeric(&self) -> DMatrix<f64> {
        let n = self.n_subjects();
        let p: usize = self.continuous.ncols() + self.factors.iter().map(|b| b.ncols()).sum::<usize>();
        let mut x = DMatrix::zeros(n, p);
        let p1 = self.continuous.ncols();
        for j in 0..p1 {
            x.set_column(j, &self.continuous.column(j));
        }
        let mut off = p1;
        for b in &self.factors {
            for j in 0..b.ncols() {
                for i in 0..n {
                    x[(i, off + j)] = (b.levels[(i, j)] - 1) as f64;
                }
            }
            off += b.ncols();
        }
        x
    }
}

pub fn generate_base_covariates<R: Rng + ?Sized>(
    config: &SimConfig,
    source: CovariateSource,
    rng: &mut R,
) -> Result<BaseCovariates> {
    let n = config.n_subjects;
    match source {
        CovariateSource::Resample(ds) => {
            let m = ds.n_subjects();
            if m == 0 {
                return Err(Error::invalid("resampling source has no subjects"));
            }
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..m)).collect();
            let sub = ds.subset(&idx);
            Ok(BaseCovariates {
                continuous_names: sub.continuous_names,
                continuous: sub.continuous,
                factors: sub.factors,
                truth: None,
            })
        }
        CovariateSource::Planted => {
            let pc = &config.planted;
            let cont = (config.p1 > 0).then(|| {
                planted_continuous(
                    n,
                    config.p1,
                    pc.cont_cliques,
                    pc.cont_clusters,
                    pc.motif_sd,
                    pc.noise_sd,
                    rng,
                )
            });
            let fac = (config.p2 > 0).then(|| {
                planted_factor(
                    n,
                    config.p2,
                    pc.factor_cliques,
                    pc.factor_clusters,
                    pc.n_levels,
                    pc.corruption,
                    rng,
                )
            });
            let continuous = cont
                .as_ref()
                .map_or_else(|| DMatrix::zeros(n, 0), |c| c.values.clone());
            let factors = match &fac {
                Some(f) => vec![FactorBlock::new(
                    (1..=config.p2).map(|j| format!("f{j}")).collect(),
                    f.levels.clone(),
                    pc.n_levels,
                )?],
                None => Vec::new(),
            };
            Ok(BaseCovariates {
                continuous_names: (1..=config.p1).map(|j| format!("x{j}")).collect(),
                continuous,
                factors,
                truth: Some(PlantedTruth {
                    continuous: cont,
                    factor: fac,
                }),
            })
        }
    }
}

/// Rank-`rank` reconstruction keeping the largest singular values.
pub fn truncated_svd_predictors(x: &DMatrix<f64>, rank: usize) -> Result<DMatrix<f64>> {
    let k = x.nrows().min(x.ncols());
    if rank > k {
        return Err(Error::invalid(format!(
            "rank {rank} exceeds the smaller matrix dimension {k}"
        )));
    }
    let svd = x.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors");
    let vt = svd.v_t.expect("right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for &j in order.iter().take(rank) {
        out += svd.singular_values[j] * u.column(j) * vt.row(j);
    }
    Ok(out)
}

/// Independent predictor categories `A_j ∈ {0, 1, 2}`.
pub fn generate_categories<R: Rng + ?Sized>(p: usize, probs: &[f64; 3], rng: &mut R) -> Vec<u8> {
    (0..p)
        .map(|_| {
            let u: f64 = rng.random();
            if u < probs[0] {
                0
            } else if u < probs[0] + probs[1] {
                1
            } else {
                2
            }
        })
        .collect()
}

/// Intercept column followed by linear and squared predictor columns.
pub fn build_regression_design(xhat: &DMatrix<f64>, categories: &[u8]) -> Result<DMatrix<f64>> {
    if categories.len() != xhat.ncols() {
        return Err(Error::Dimension(format!(
            "{} categories for {} columns",
            categories.len(),
            xhat.ncols()
        )));
    }
    if categories.iter().any(|&a| a > 2) {
        return Err(Error::invalid("predictor categories must be 0, 1 or 2"));
    }
    let used: Vec<usize> = (0..categories.len()).filter(|&j| categories[j] > 0).collect();
    let n = xhat.nrows();
    let mut q = DMatrix::zeros(n, used.len() + 1);
    q.column_mut(0).fill(1.0);
    for (c, &j) in used.iter().enumerate() {
        for i in 0..n {
            let v = xhat[(i, j)];
            q[(i, c + 1)] = if categories[j] == 1 { v } else { v * v };
        }
    }
    Ok(q)
}

/// Row-wise softmax with the first column as reference (η = 0 there).
fn softmax_rows(eta: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = eta.clone();
    for mut row in out.row_iter_mut() {
        let m = row.max();
        row.apply(|v| *v = (*v - m).exp());
        let s = row.sum();
        row /= s;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Memberships {
    /// One-based study labels.
    pub study: Vec<usize>,
    /// One-based group labels.
    pub group: Vec<usize>,
    /// `N × JK` true o-MPS, columns in class order.
    pub true_omps: DMatrix<f64>,
}

/// Study-group memberships from a multinomial logit in `Q` with random
/// coefficients `υ ~ N(0, (QᵀQ)⁺ + μ² I)`.
pub fn generate_memberships<R: Rng + ?Sized>(
    q: &DMatrix<f64>,
    mu: f64,
    n_studies: usize,
    n_groups: usize,
    rng: &mut R,
) -> Result<Memberships> {
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("design has non-finite entries"));
    }
    let c = n_studies * n_groups;
    let d = q.ncols();
    let gram = q.transpose() * q;
    let eps = 1e-10 * gram.diagonal().max().max(1.0);
    let sigma = gram
        .pseudo_inverse(eps)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let cov = sigma + DMatrix::identity(d, d) * (mu * mu);
    let eig = cov.symmetric_eigen();
    let root = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    let mut eta = DMatrix::zeros(q.nrows(), c);
    for k in 1..c {
        let e = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let ups = &root * e;
        eta.set_column(k, &(q * ups));
    }
    let true_omps = softmax_rows(&eta);
    let mut study = Vec::with_capacity(q.nrows());
    let mut group = Vec::with_capacity(q.nrows());
    for row in true_omps.row_iter() {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut cls = c - 1;
        for (k, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                cls = k;
                break;
            }
        }
        let (s, z) = class_labels(cls, n_groups);
        study.push(s);
        group.push(z);
    }
    Ok(Memberships {
        study,
        group,
        true_omps,
    })
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::Dimension(format!(
            "correlation of sequences of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return Err(Error::invalid("correlation of a constant sequence"));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// `100 ×` the correlation of one class column of estimated and true o-MPS.
pub fn omps_correlation(est: &DMatrix<f64>, truth: &DMatrix<f64>, class: usize) -> Result<f64> {
    if est.shape() != truth.shape() || class >= est.ncols() {
        return Err(Error::Dimension(format!(
            "o-MPS shapes {:?} and {:?}, class {class}",
            est.shape(),
            truth.shape()
        )));
    }
    let a: Vec<f64> = est.column(class).iter().copied().collect();
    let b: Vec<f64> = truth.column(class).iter().copied().collect();
    Ok(100.0 * pearson(&a, &b)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovariateType {
    Continuous,
    Factor,
}

/// Agreement of paired motif values: correlation for continuous values, the
/// match fraction for factor levels.
pub fn parity(train: &[f64], full: &[f64], t: CovariateType) -> Result<f64> {
    if train.len() != full.len() || train.is_empty() {
        return Err(Error::Dimension(format!(
            "parity over {} and {} values",
            train.len(),
            full.len()
        )));
    }
    match t {
        CovariateType::Continuous => pearson(train, full),
        CovariateType::Factor => Ok(train
            .iter()
            .zip(full)
            .filter(|(a, b)| a == b)
            .count() as f64
            / train.len() as f64),
    }
}

/// Adjusted Rand index of two labelings.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let c2 = |m: u64| (m * m.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.iter().flatten().map(|&m| c2(m)).sum();
    let ra: f64 = table.iter().map(|r| c2(r.iter().sum())).sum();
    let rb: f64 = (0..kb).map(|j| c2(table.iter().map(|r| r[j]).sum())).sum();
    let total = c2(n as u64);
    let expected = ra * rb / total.max(1.0);
    let max = 0.5 * (ra + rb);
    if (max - expected).abs() < 1e-12 {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// A generated dataset with its true o-MPS and split.
#[derive(Debug, Clone)]
pub struct SimDataset {
    pub data: MixedDataset,
    pub true_omps: DMatrix<f64>,
    pub predictor_categories: Vec<u8>,
    pub truth: Option<PlantedTruth>,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

pub fn generate_dataset(config: &SimConfig, source: CovariateSource, seed: u64) -> Result<SimDataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = generate_base_covariates(config, source, &mut rng)?;
    let x = base.numeric();
    let xhat = truncated_svd_predictors(&x, config.svd_rank.min(x.ncols()))?;
    let categories = generate_categories(x.ncols(), &config.predictor_probs, &mut rng);
    let q = build_regression_design(&xhat, &categories)?;
    let m = generate_memberships(&q, config.mu, config.n_studies, config.n_groups, &mut rng)?;
    let n = config.n_subjects;
    let data = MixedDataset::new(
        base.continuous_names,
        base.continuous,
        base.factors,
        m.study,
        m.group,
        config.n_studies,
        config.n_groups,
        None,
    )?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_train = ((n as f64) * config.train_fraction).round() as usize;
    let n_train = n_train.clamp(1, n - 1);
    let mut train_idx = order[..n_train].to_vec();
    let mut test_idx = order[n_train..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok(SimDataset {
        data,
        true_omps: m.true_omps,
        predictor_categories: categories,
        truth: base.truth,
        train_idx,
        test_idx,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorSet {
    Motif,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Standardized continuous columns followed by factor indicator columns.
fn full_design(ds: &MixedDataset, std: &StandardizationParams) -> Result<DMatrix<f64>> {
    let cont = if ds.p1() > 0 {
        std.apply(&ds.continuous)?
    } else {
        DMatrix::zeros(ds.n_subjects(), 0)
    };
    let width: usize = cont.ncols() + ds.factors.iter().map(|b| b.ncols() * (b.n_levels - 1)).sum::<usize>();
    let mut x = DMatrix::zeros(ds.n_subjects(), width);
    for j in 0..cont.ncols() {
        x.set_column(j, &cont.column(j));
    }
    let mut off = cont.ncols();
    for b in &ds.factors {
        for j in 0..b.ncols() {
            for i in 0..ds.n_subjects() {
                let l = b.levels[(i, j)] as usize;
                if l >= 2 {
                    x[(i, off + l - 2)] = 1.0;
                }
            }
            off += b.n_levels - 1;
        }
    }
    Ok(x)
}

/// Fit on observed classes only and embed the predictions in all classes.
fn fit_predict(
    x_train: &DMatrix<f64>,
    y: &[usize],
    n_classes: usize,
    spec: &FitSpec,
    x_eval: &[&DMatrix<f64>],
) -> Result<Vec<DMatrix<f64>>> {
    let mut present: Vec<usize> = y.to_vec();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(Error::invalid("fewer than two classes in the training rows"));
    }
    let remap: Vec<usize> = y
        .iter()
        .map(|c| present.binary_search(c).expect("present class"))
        .collect();
    let model = fit_omps(x_train, &remap, present.len(), spec)?;
    x_eval
        .iter()
        .map(|x| {
            let p = predict_matrix(&model, x)?;
            let mut out = DMatrix::zeros(x.nrows(), n_classes);
            for (k, &c) in present.iter().enumerate() {
                out.set_column(c, &p.column(k));
            }
            Ok(out)
        })
        .collect()
}

fn class_correlations(est: &DMatrix<f64>, truth: &DMatrix<f64>) -> Vec<Option<f64>> {
    (0..truth.ncols())
        .map(|k| omps_correlation(est, truth, k).ok())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSet {
    pub regressor: Penalty,
    pub predictors: PredictorSet,
    pub split: Split,
    /// Percent correlation per class; absent when undefined.
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub correlations: Vec<CorrelationSet>,
    /// Continuous parity, a correlation in [−1, 1].
    pub parity_continuous: Option<f64>,
    /// Factor parity, a match fraction in [0, 1].
    pub parity_factor: Option<f64>,
    /// Cluster counts of the training fit, per block.
    pub n_clusters: Vec<usize>,
    pub n_train: usize,
    pub n_test: usize,
}

fn block_parity(
    train_fit: &BlockFit,
    test_rows: &[Vec<f64>],
    full_fit: &BlockFit,
    test_idx: &[usize],
) -> Result<f64> {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (row, &i) in test_rows.iter().zip(test_idx) {
        a.extend(train_fit.map_to_columns(row));
        b.extend(full_fit.map_to_columns(&full_fit.motif_row(full_fit.row_allocation[i])));
    }
    let t = match train_fit.n_levels() {
        None => CovariateType::Continuous,
        Some(_) => CovariateType::Factor,
    };
    parity(&a, &b, t)
}

/// One replicate of the comparison on a generated dataset.
pub fn run_replicate(config: &SimConfig, sim: &SimDataset, seed: u64) -> Result<ReplicateResult> {
    let train = sim.data.subset(&sim.train_idx);
    let test = sim.data.subset(&sim.test_idx);
    let truth_train = sim.true_omps.select_rows(&sim.train_idx);
    let truth_test = sim.true_omps.select_rows(&sim.test_idx);
    let c = sim.data.n_classes();
    let y = train.classes();

    let mut fit_cfg = config.fit.clone();
    fit_cfg.mcmc.seed = derive_seed(seed, 1);
    let (train_fit, _) = fit_motifs(&train, &fit_cfg)?;
    fit_cfg.mcmc.seed = derive_seed(seed, 2);
    let (full_fit, _) = fit_motifs(&sim.data, &fit_cfg)?;

    let train_vecs = (0..train.n_subjects())
        .map(|i| subject_motif_vector(&train_fit, i))
        .collect::<Result<Vec<_>>>()?;
    let assignments = assign_test_subjects(&train_fit, &test, config.allow_new_cliques)?;
    let test_vecs: Vec<_> = assignments
        .iter()
        .map(|a| {
            let rows: Vec<Vec<f64>> = a.iter().map(|x| x.motif_row.clone()).collect();
            motif_vector_from_rows(&train_fit, &rows)
        })
        .collect();
    let codec = PredictorCodec::for_motif(&train_vecs[0]);
    let xm_train = codec.expand_rows(&train_vecs)?;
    let xm_test = codec.expand_rows(&test_vecs)?;

    let std = StandardizationParams::fit(&train.continuous_names, &train.continuous)?;
    let xf_train = full_design(&train, &std)?;
    let xf_test = full_design(&test, &std)?;

    let mut correlations = Vec::new();
    for &pen in &config.regressors {
        let spec = FitSpec {
            penalty: pen,
            lambda: if pen == Penalty::None {
                LambdaChoice::Fixed(0.0)
            } else {
                LambdaChoice::Cv {
                    folds: config.cv_folds,
                    n_lambda: config.n_lambda,
                    min_ratio: 1e-3,
                    seed: derive_seed(seed, 3),
                }
            },
            groups: None,
            solver: Default::default(),
        };
        let motif_spec = FitSpec {
            groups: (pen == Penalty::GroupLasso).then(|| codec.groups()),
            ..spec.clone()
        };
        for (set, xt, xe, s) in [
            (PredictorSet::Motif, &xm_train, &xm_test, &motif_spec),
            (PredictorSet::Full, &xf_train, &xf_test, &spec),
        ] {
            let pred = fit_predict(xt, &y, c, s, &[xt, xe])?;
            correlations.push(CorrelationSet {
                regressor: pen,
                predictors: set,
                split: Split::Train,
                values: class_correlations(&pred[0], &truth_train),
            });
            correlations.push(CorrelationSet {
                regressor: pen,
                predictors: set,
                split: Split::Test,
                values: class_correlations(&pred[1], &truth_test),
            });
        }
    }

    let mut parity_continuous = None;
    let mut parity_factor = None;
    for (b, (tb, fb)) in train_fit.blocks.iter().zip(&full_fit.blocks).enumerate() {
        let rows: Vec<Vec<f64>> = assignments.iter().map(|a| a[b].motif_row.clone()).collect();
        let v = block_parity(tb, &rows, fb, &sim.test_idx).ok();
        match tb.n_levels() {
            None => parity_continuous = v,
            Some(_) => parity_factor = v,
        }
    }
    Ok(ReplicateResult {
        correlations,
        parity_continuous,
        parity_factor,
        n_clusters: train_fit.blocks.iter().map(|b| b.n_clusters()).collect(),
        n_train: train.n_subjects(),
        n_test: test.n_subjects(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Standard error of the mean; absent with a single value.
    pub se: Option<f64>,
    pub n: usize,
}

impl Summary {
    pub fn of(v: &[f64]) -> Option<Self> {
        if v.is_empty() {
            return None;
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let se = (v.len() > 1).then(|| {
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        });
        Some(Self {
            mean,
            se,
            n: v.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub regressor: Penalty,
    pub predictors: PredictorSet,
    pub split: Split,
    /// One-based study and group.
    pub study: usize,
    pub group: usize,
    pub summary: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: SimConfig,
    pub replicates: usize,
    pub failures: Vec<(usize, String)>,
    pub cells: Vec<ReportCell>,
    pub parity_continuous: Option<Summary>,
    /// In percent.
    pub parity_factor: Option<Summary>,
    pub n_clusters: Vec<Option<Summary>>,
}

impl ExperimentReport {
    /// Mean over classes of the per-class mean correlations.
    pub fn mean_correlation(&self, regressor: Penalty, predictors: PredictorSet, split: Split) -> Option<f64> {
        let v: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.regressor == regressor && c.predictors == predictors && c.split == split)
            .filter_map(|c| c.summary.as_ref().map(|s| s.mean))
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::json("experiment report", e))
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["regressor", "predictors", "split", "study", "group", "mean", "se", "n"])
            .map_err(|e| Error::csv("report", e))?;
        for c in &self.cells {
            let (mean, se, n) = match &c.summary {
                Some(s) => (
                    format!("{:.6}", s.mean),
                    s.se.map_or(String::new(), |v| format!("{v:.6}")),
                    s.n.to_string(),
                ),
                None => (String::new(), String::new(), "0".into()),
            };
            w.write_record([
                c.regressor.to_string(),
                format!("{:?}", c.predictors).to_lowercase(),
                format!("{:?}", c.split).to_lowercase(),
                c.study.to_string(),
                c.group.to_string(),
                mean,
                se,
                n,
            ])
            .map_err(|e| Error::csv("report", e))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("utf-8 csv"))
    }

    /// Tables of mean (SE) percent correlations, motif vs full predictors.
    pub fn to_table(&self) -> String {
        let fmt = |s: &Option<Summary>| match s {
            Some(s) => match s.se {
                Some(se) => format!("{:.1} ({:.1})", s.mean, se),
                None => format!("{:.1}", s.mean),
            },
            None => "-".into(),
        };
        let mut out = String::new();
        out.push_str(&format!(
            "{} replicates ({} failed), mu = {}\n",
            self.replicates,
            self.failures.len(),
            self.config.mu
        ));
        for &pen in &self.config.regressors {
            out.push_str(&format!("\n{pen}\n"));
            out.push_str(&format!(
                "{:<18}{:>16}{:>16}{:>16}{:>16}\n",
                "", "train motif", "train full", "test motif", "test full"
            ));
            for s in 1..=self.config.n_studies {
                for z in 1..=self.config.n_groups {
                    let get = |p, sp| {
                        self.cells
                            .iter()
                            .find(|c| {
                                c.regressor == pen
                                    && c.predictors == p
                                    && c.split == sp
                                    && c.study == s
                                    && c.group == z
                            })
                            .and_then(|c| c.summary.clone())
                    };
                    out.push_str(&format!(
                        "{:<18}{:>16}{:>16}{:>16}{:>16}\n",
                        format!("study {s} group {z}"),
                        fmt(&get(PredictorSet::Motif, Split::Train)),
                        fmt(&get(PredictorSet::Full, Split::Train)),
                        fmt(&get(PredictorSet::Motif, Split::Test)),
                        fmt(&get(PredictorSet::Full, Split::Test)),
                    ));
                }
            }
        }
        out.push_str(&format!(
            "\nparity continuous: {}\nparity factor (%): {}\n",
            fmt(&self.parity_continuous),
            fmt(&self.parity_factor)
        ));
        out
    }
}

/// Generate, fit and evaluate `replicates` planted datasets concurrently.
pub fn run_experiment(config: &SimConfig, replicates: usize) -> Result<ExperimentReport> {
    config.validate()?;
    if replicates == 0 {
        return Err(Error::invalid("need at least one replicate"));
    }
    let results: Vec<Result<ReplicateResult>> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(config.seed, 1_000 + r);
            let sim = generate_dataset(config, CovariateSource::Planted, derive_seed(seed, 0))?;
            run_replicate(config, &sim, seed)
        })
        .collect();
    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(v) => ok.push(v),
            Err(e) => {
                log::warn!("replicate {r} failed: {e}");
                failures.push((r, e.to_string()));
            }
        }
    }
    Ok(summarize(config, replicates, failures, &ok))
}

fn summarize(
    config: &SimConfig,
    replicates: usize,
    failures: Vec<(usize, String)>,
    ok: &[ReplicateResult],
) -> ExperimentReport {
    let c = config.n_studies * config.n_groups;
    let mut cells = Vec::new();
    for &pen in &config.regressors {
        for set in [PredictorSet::Motif, PredictorSet::Full] {
            for split in [Split::Train, Split::Test] {
                for k in 0..c {
                    let v: Vec<f64> = ok
                        .iter()
                        .flat_map(|r| {
                            r.correlations
                                .iter()
                                .filter(|s| s.regressor == pen && s.predictors == set && s.split == split)
                                .filter_map(|s| s.values[k])
                        })
                        .collect();
                    let (study, group) = class_labels(k, config.n_groups);
                    cells.push(ReportCell {
                        regressor: pen,
                        predictors: set,
                        split,
                        study,
                        group,
                        summary: Summary::of(&v),
                    });
                }
            }
        }
    }
    let pc: Vec<f64> = ok.iter().filter_map(|r| r.parity_continuous).collect();
    let pf: Vec<f64> = ok.iter().filter_map(|r| r.parity_factor.map(|v| 100.0 * v)).collect();
    let n_blocks = ok.iter().map(|r| r.n_clusters.len()).max().unwrap_or(0);
    let n_clusters = (0..n_blocks)
        .map(|b| {
            let v: Vec<f64> = ok.iter().filter_map(|r| r.n_clusters.get(b).map(|&q| q as f64)).collect();
            Summary::of(&v)
        })
        .collect();
    ExperimentReport {
        config: config.clone(),
        replicates,
        failures,
        cells,
        parity_continuous: Summary::of(&pc),
        parity_factor: Summary::of(&pf),
        n_clusters,
    }
}

/// Self-parity of a fit: each block compared with its own subject rows.
pub fn self_parity(fit: &MotifFit) -> Result<Vec<f64>> {
    let idx: Vec<usize> = (0..fit.n_subjects()).collect();
    fit.blocks
        .iter()
        .map(|b| {
            let rows: Vec<Vec<f64>> = idx.iter().map(|&i| b.motif_row(b.row_allocation[i])).collect();
            block_parity(b, &rows, b, &idx)
        })
        .collect()
}
