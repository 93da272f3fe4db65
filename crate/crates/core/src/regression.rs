//! Penalized multinomial logistic regression of study-group membership.
//!
//! Class 0 is the reference; the model holds `(C - 1) x (d + 1)` coefficients
//! with the intercept in column 0. The objective is the mean negative
//! log-likelihood plus a penalty on the non-intercept coefficients, minimized
//! by monotone accelerated proximal gradient with backtracking.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::MotifValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Penalty {
    None,
    Ridge,
    Lasso,
    GroupLasso,
}

impl std::str::FromStr for Penalty {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Penalty::None),
            "ridge" => Ok(Penalty::Ridge),
            "lasso" => Ok(Penalty::Lasso),
            "group-lasso" => Ok(Penalty::GroupLasso),
            _ => Err(Error::invalid(format!("unknown penalty '{s}'"))),
        }
    }
}

impl std::fmt::Display for Penalty {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Penalty::None => "none",
            Penalty::Ridge => "ridge",
            Penalty::Lasso => "lasso",
            Penalty::GroupLasso => "group-lasso",
        })
    }
}

/// How one motif entry expands into design columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CodecEntry {
    Real,
    /// `n_levels - 1` indicators, level 1 is the reference.
    Factor { n_levels: usize },
}

impl CodecEntry {
    pub fn width(&self) -> usize {
        match self {
            CodecEntry::Real => 1,
            CodecEntry::Factor { n_levels } => n_levels - 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictorCodec {
    pub entries: Vec<CodecEntry>,
}

impl PredictorCodec {
    pub fn for_motif(v: &[MotifValue]) -> Self {
        Self {
            entries: v
                .iter()
                .map(|m| match m {
                    MotifValue::Real(_) => CodecEntry::Real,
                    MotifValue::Level { n_levels, .. } => CodecEntry::Factor {
                        n_levels: *n_levels,
                    },
                })
                .collect(),
        }
    }

    /// Number of expanded design columns.
    pub fn width(&self) -> usize {
        self.entries.iter().map(CodecEntry::width).sum()
    }

    /// Design column indices of every entry; one group per entry.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut start = 0;
        self.entries
            .iter()
            .map(|e| {
                let g = (start..start + e.width()).collect();
                start += e.width();
                g
            })
            .collect()
    }

    pub fn expand(&self, v: &[MotifValue]) -> Result<Vec<f64>> {
        if v.len() != self.entries.len() {
            return Err(Error::Dimension(format!(
                "motif vector of length {}, codec expects {}",
                v.len(),
                self.entries.len()
            )));
        }
        let mut out = Vec::with_capacity(self.width());
        for (e, m) in self.entries.iter().zip(v) {
            match (e, m) {
                (CodecEntry::Real, MotifValue::Real(x)) => out.push(*x),
                (CodecEntry::Factor { n_levels }, MotifValue::Level { level, .. }) => {
                    if *level == 0 || *level as usize > *n_levels {
                        return Err(Error::LabelOutOfRange(format!(
                            "factor level {level} outside 1..={n_levels}"
                        )));
                    }
                    out.extend((2..=*n_levels).map(|k| (*level as usize == k) as u8 as f64));
                }
                _ => return Err(Error::invalid("motif entry type does not match codec")),
            }
        }
        Ok(out)
    }

    pub fn expand_rows(&self, rows: &[Vec<MotifValue>]) -> Result<DMatrix<f64>> {
        let d = self.width();
        let mut x = DMatrix::zeros(rows.len(), d);
        for (i, r) in rows.iter().enumerate() {
            for (j, v) in self.expand(r)?.into_iter().enumerate() {
                x[(i, j)] = v;
            }
        }
        Ok(x)
    }
}

/// Expand a motif vector with a codec.
pub fn expand_predictors(v: &[MotifValue], codec: &PredictorCodec) -> Result<Vec<f64>> {
    codec.expand(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LambdaChoice {
    Fixed(f64),
    /// K-fold cross-validated deviance over a log-spaced grid from the
    /// smallest all-zero penalty down to `min_ratio` of it.
    Cv {
        folds: usize,
        n_lambda: usize,
        min_ratio: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Relative objective change on an accepted step.
    pub tol: f64,
    /// Largest gradient-mapping entry also required for convergence.
    pub grad_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 10_000,
            tol: 1e-8,
            grad_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSpec {
    pub penalty: Penalty,
    pub lambda: LambdaChoice,
    /// Design columns per penalty group; singletons when absent.
    pub groups: Option<Vec<Vec<usize>>>,
    pub solver: SolverOptions,
}

impl FitSpec {
    pub fn fixed(penalty: Penalty, lambda: f64) -> Self {
        Self {
            penalty,
            lambda: LambdaChoice::Fixed(lambda),
            groups: None,
            solver: SolverOptions::default(),
        }
    }

    pub fn cv(penalty: Penalty, folds: usize, seed: u64) -> Self {
        Self {
            penalty,
            lambda: LambdaChoice::Cv {
                folds,
                n_lambda: 20,
                min_ratio: 1e-3,
                seed,
            },
            groups: None,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmpsModel {
    pub n_classes: usize,
    /// `(n_classes - 1) x (d + 1)`, intercept in column 0.
    pub coef: DMatrix<f64>,
    pub penalty: Penalty,
    pub lambda: f64,
    pub groups: Vec<Vec<usize>>,
    pub codec: Option<PredictorCodec>,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
    /// Mean cross-validated deviance per grid value, when λ was chosen by CV.
    pub cv_path: Option<Vec<(f64, f64)>>,
}

impl OmpsModel {
    pub fn n_predictors(&self) -> usize {
        self.coef.ncols() - 1
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::json("o-MPS model", e))
    }
}

/// Probability vector for one expanded predictor row.
pub fn predict_omps(model: &OmpsModel, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != model.n_predictors() {
        return Err(Error::Dimension(format!(
            "predictor row of length {}, model expects {}",
            x.len(),
            model.n_predictors()
        )));
    }
    let mut eta = vec![0.0; model.n_classes];
    for k in 1..model.n_classes {
        let row = model.coef.row(k - 1);
        eta[k] = row[0] + x.iter().enumerate().map(|(j, v)| row[j + 1] * v).sum::<f64>();
    }
    Ok(softmax_normalized(&eta))
}

/// Probability rows for every row of a design matrix.
pub fn predict_matrix(model: &OmpsModel, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.ncols() != model.n_predictors() {
        return Err(Error::Dimension(format!(
            "design has {} columns, model expects {}",
            x.ncols(),
            model.n_predictors()
        )));
    }
    let eta = linear_predictors(&model.coef, x);
    Ok(probabilities(&eta))
}

fn softmax_normalized(eta: &[f64]) -> Vec<f64> {
    let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = eta.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `N x C` linear predictors with a zero reference column.
fn linear_predictors(coef: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let c = coef.nrows() + 1;
    let slopes = coef.columns(1, coef.ncols() - 1);
    let lin = x * slopes.transpose();
    DMatrix::from_fn(n, c, |i, k| {
        if k == 0 {
            0.0
        } else {
            coef[(k - 1, 0)] + lin[(i, k - 1)]
        }
    })
}

fn probabilities(eta: &DMatrix<f64>) -> DMatrix<f64> {
    let mut p = eta.clone();
    for mut row in p.row_iter_mut() {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.apply(|v| *v = (*v - m).exp());
        let s = row.sum();
        row /= s;
    }
    p
}

/// Mean multinomial negative log-likelihood.
pub fn mean_nll(coef: &DMatrix<f64>, x: &DMatrix<f64>, y: &[usize]) -> f64 {
    let eta = linear_predictors(coef, x);
    nll_from_eta(&eta, y)
}

fn nll_from_eta(eta: &DMatrix<f64>, y: &[usize]) -> f64 {
    let mut total = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let row = eta.row(i);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        total += lse - row[yi];
    }
    total / y.len() as f64
}

struct Problem<'a> {
    x: &'a DMatrix<f64>,
    y: &'a [usize],
    n_classes: usize,
    penalty: Penalty,
    groups: &'a [Vec<usize>],
}

impl Problem<'_> {
    fn value_grad(&self, coef: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        let n = self.y.len() as f64;
        let eta = linear_predictors(coef, self.x);
        let f = nll_from_eta(&eta, self.y);
        let mut r = probabilities(&eta);
        for (i, &yi) in self.y.iter().enumerate() {
            r[(i, yi)] -= 1.0;
        }
        let r = r.columns(1, self.n_classes - 1);
        let mut g = DMatrix::zeros(coef.nrows(), coef.ncols());
        let slope_grad = r.transpose() * self.x;
        for k in 0..coef.nrows() {
            g[(k, 0)] = r.column(k).sum() / n;
            for j in 0..self.x.ncols() {
                g[(k, j + 1)] = slope_grad[(k, j)] / n;
            }
        }
        (f, g)
    }

    fn value(&self, coef: &DMatrix<f64>) -> f64 {
        mean_nll(coef, self.x, self.y)
    }

    fn penalty_value(&self, coef: &DMatrix<f64>, lambda: f64) -> f64 {
        let slopes = coef.columns(1, coef.ncols() - 1);
        match self.penalty {
            Penalty::None => 0.0,
            Penalty::Ridge => 0.5 * lambda * slopes.norm_squared(),
            Penalty::Lasso => lambda * slopes.iter().map(|v| v.abs()).sum::<f64>(),
            Penalty::GroupLasso => {
                lambda
                    * self
                        .groups
                        .iter()
                        .map(|g| {
                            let size = (g.len() * coef.nrows()) as f64;
                            let ss: f64 = g
                                .iter()
                                .map(|&j| slopes.column(j).norm_squared())
                                .sum();
                            size.sqrt() * ss.sqrt()
                        })
                        .sum::<f64>()
            }
        }
    }

    /// Proximal map of `step * penalty` applied to the slopes.
    fn prox(&self, v: &mut DMatrix<f64>, lambda: f64, step: f64) {
        let t = lambda * step;
        let nc = v.ncols();
        match self.penalty {
            Penalty::None => {}
            Penalty::Ridge => {
                let shrink = 1.0 / (1.0 + t);
                for j in 1..nc {
                    v.column_mut(j).scale_mut(shrink);
                }
            }
            Penalty::Lasso => {
                for j in 1..nc {
                    for b in v.column_mut(j).iter_mut() {
                        *b = b.signum() * (b.abs() - t).max(0.0);
                    }
                }
            }
            Penalty::GroupLasso => {
                for g in self.groups {
                    let size = (g.len() * v.nrows()) as f64;
                    let norm = g
                        .iter()
                        .map(|&j| v.column(j + 1).norm_squared())
                        .sum::<f64>()
                        .sqrt();
                    let thr = t * size.sqrt();
                    let scale = if norm > thr { 1.0 - thr / norm } else { 0.0 };
                    for &j in g {
                        v.column_mut(j + 1).scale_mut(scale);
                    }
                }
            }
        }
    }

    /// Smallest λ at which the intercept-only fit is optimal.
    fn lambda_max(&self, intercepts: &DMatrix<f64>) -> f64 {
        let (_, g) = self.value_grad(intercepts);
        let slopes = g.columns(1, g.ncols() - 1);
        match self.penalty {
            Penalty::GroupLasso => self
                .groups
                .iter()
                .map(|gr| {
                    let size = (gr.len() * g.nrows()) as f64;
                    gr.iter()
                        .map(|&j| slopes.column(j).norm_squared())
                        .sum::<f64>()
                        .sqrt()
                        / size.sqrt()
                })
                .fold(0.0, f64::max),
            _ => slopes.iter().map(|v| v.abs()).fold(0.0, f64::max),
        }
    }

    fn intercept_only(&self) -> DMatrix<f64> {
        let mut counts = vec![0.0f64; self.n_classes];
        for &y in self.y {
            counts[y] += 1.0;
        }
        let mut c = DMatrix::zeros(self.n_classes - 1, self.x.ncols() + 1);
        let base = counts[0].max(0.5);
        for k in 1..self.n_classes {
            c[(k - 1, 0)] = (counts[k].max(0.5) / base).ln();
        }
        c
    }
}

struct Solution {
    coef: DMatrix<f64>,
    converged: bool,
    iterations: usize,
    grad_norm: f64,
    objective: Vec<f64>,
}

/// Monotone FISTA with backtracking from `start`.
fn solve(p: &Problem, lambda: f64, start: DMatrix<f64>, opts: &SolverOptions, keep_path: bool) -> Solution {
    let mut x = start;
    let mut x_prev;
    let mut y = x.clone();
    let mut t: f64 = 1.0;
    let mut lip = 1.0;
    let mut fx = p.value(&x) + p.penalty_value(&x, lambda);
    let mut path = if keep_path { vec![fx] } else { Vec::new() };
    let mut grad_norm = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let (fy, gy) = p.value_grad(&y);
        let (z, fz_smooth) = loop {
            let mut z = &y - &gy / lip;
            p.prox(&mut z, lambda, 1.0 / lip);
            let d = &z - &y;
            let fz = p.value(&z);
            let bound = fy + gy.dot(&d) + 0.5 * lip * d.norm_squared();
            if fz <= bound + 1e-12 * fy.abs().max(1.0) || lip > 1e15 {
                break (z, fz);
            }
            lip *= 2.0;
        };
        grad_norm = (&y - &z).abs().max() * lip;
        let fz = fz_smooth + p.penalty_value(&z, lambda);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let accepted = fz <= fx;
        let f_old = fx;
        let x_new = if accepted { z.clone() } else { x.clone() };
        x_prev = std::mem::replace(&mut x, x_new);
        if accepted {
            fx = fz;
        }
        y = &x + (&z - &x) * (t / t_next) + (&x - &x_prev) * ((t - 1.0) / t_next);
        t = t_next;
        if keep_path {
            path.push(fx);
        }
        let rel = (f_old - fx).abs() / f_old.abs().max(1e-300);
        if accepted && rel < opts.tol && grad_norm < opts.grad_tol {
            return Solution {
                coef: x,
                converged: true,
                iterations: it,
                grad_norm,
                objective: path,
            };
        }
        if !accepted {
            // Restart the momentum after a rejected step.
            t = 1.0;
            y = x.clone();
        }
    }
    Solution {
        coef: x,
        converged: false,
        iterations: opts.max_iter,
        grad_norm,
        objective: path,
    }
}

fn validate_inputs(x: &DMatrix<f64>, y: &[usize], n_classes: usize) -> Result<()> {
    if n_classes < 2 {
        return Err(Error::invalid("need at least two classes"));
    }
    if x.nrows() != y.len() {
        return Err(Error::Dimension(format!(
            "{} design rows for {} labels",
            x.nrows(),
            y.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite design entry"));
    }
    if y.len() < n_classes {
        return Err(Error::invalid(format!(
            "{} observations for {n_classes} classes",
            y.len()
        )));
    }
    let mut seen = vec![false; n_classes];
    for &c in y {
        if c >= n_classes {
            return Err(Error::LabelOutOfRange(format!("class {c} with {n_classes} classes")));
        }
        seen[c] = true;
    }
    if let Some(c) = seen.iter().position(|s| !s) {
        return Err(Error::invalid(format!("class {c} is not observed")));
    }
    Ok(())
}

fn lambda_grid(lmax: f64, n: usize, min_ratio: f64, penalty: Penalty) -> Vec<f64> {
    let top = if penalty == Penalty::Ridge { 10.0 * lmax } else { lmax };
    let top = if top > 0.0 { top } else { 1.0 };
    if n <= 1 {
        return vec![top];
    }
    (0..n)
        .map(|k| top * min_ratio.powf(k as f64 / (n - 1) as f64))
        .collect()
}

/// Fit the o-MPS model to a design with zero-based class labels.
pub fn fit_omps(x: &DMatrix<f64>, y: &[usize], n_classes: usize, spec: &FitSpec) -> Result<OmpsModel> {
    validate_inputs(x, y, n_classes)?;
    let d = x.ncols();
    let groups = spec
        .groups
        .clone()
        .unwrap_or_else(|| (0..d).map(|j| vec![j]).collect());
    if groups.iter().flatten().any(|&j| j >= d) {
        return Err(Error::invalid("penalty group refers to a missing column"));
    }
    let prob = Problem {
        x,
        y,
        n_classes,
        penalty: spec.penalty,
        groups: &groups,
    };
    let start = prob.intercept_only();
    let (lambda, cv_path, warm) = match &spec.lambda {
        LambdaChoice::Fixed(l) => {
            if !(*l >= 0.0) {
                return Err(Error::invalid("lambda must be nonnegative"));
            }
            (*l, None, start)
        }
        LambdaChoice::Cv {
            folds,
            n_lambda,
            min_ratio,
            seed,
        } => {
            if spec.penalty == Penalty::None {
                (0.0, None, start)
            } else {
                let grid = lambda_grid(prob.lambda_max(&start), *n_lambda, *min_ratio, spec.penalty);
                let dev = cv_deviance(x, y, n_classes, spec, &groups, &grid, *folds, *seed)?;
                let best = dev
                    .iter()
                    .enumerate()
                    .fold(0, |b, (k, v)| if *v < dev[b] { k } else { b });
                let mut coef = start;
                for &l in &grid[..best] {
                    coef = solve(&prob, l, coef, &spec.solver, false).coef;
                }
                (grid[best], Some(grid.iter().copied().zip(dev).collect()), coef)
            }
        }
    };
    let sol = solve(&prob, lambda, warm, &spec.solver, false);
    if !sol.converged {
        log::warn!(
            "o-MPS fit did not converge in {} iterations (gradient norm {:.3e})",
            sol.iterations,
            sol.grad_norm
        );
    }
    Ok(OmpsModel {
        n_classes,
        coef: sol.coef,
        penalty: spec.penalty,
        lambda,
        groups,
        codec: None,
        converged: sol.converged,
        iterations: sol.iterations,
        grad_norm: sol.grad_norm,
        cv_path,
    })
}

/// Objective values at every iteration of a fixed-λ fit, for diagnostics.
pub fn objective_path(
    x: &DMatrix<f64>,
    y: &[usize],
    n_classes: usize,
    spec: &FitSpec,
    lambda: f64,
) -> Result<Vec<f64>> {
    validate_inputs(x, y, n_classes)?;
    let groups = spec
        .groups
        .clone()
        .unwrap_or_else(|| (0..x.ncols()).map(|j| vec![j]).collect());
    let prob = Problem {
        x,
        y,
        n_classes,
        penalty: spec.penalty,
        groups: &groups,
    };
    Ok(solve(&prob, lambda, prob.intercept_only(), &spec.solver, true).objective)
}

#[allow(clippy::too_many_arguments)]
fn cv_deviance(
    x: &DMatrix<f64>,
    y: &[usize],
    n_classes: usize,
    spec: &FitSpec,
    groups: &[Vec<usize>],
    grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = y.len();
    if folds < 2 || folds > n {
        return Err(Error::invalid(format!("cannot run {folds}-fold CV on {n} rows")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0; n];
    for (k, &i) in order.iter().enumerate() {
        fold_of[i] = k % folds;
    }
    let per_fold: Vec<Vec<f64>> = (0..folds)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
            let xt = x.select_rows(&train);
            let yt: Vec<usize> = train.iter().map(|&i| y[i]).collect();
            let xv = x.select_rows(&test);
            let yv: Vec<usize> = test.iter().map(|&i| y[i]).collect();
            let prob = Problem {
                x: &xt,
                y: &yt,
                n_classes,
                penalty: spec.penalty,
                groups,
            };
            let mut coef = prob.intercept_only();
            grid.iter()
                .map(|&l| {
                    coef = solve(&prob, l, coef.clone(), &spec.solver, false).coef;
                    2.0 * mean_nll(&coef, &xv, &yv)
                })
                .collect()
        })
        .collect();
    Ok((0..grid.len())
        .map(|k| per_fold.iter().map(|d| d[k]).sum::<f64>() / folds as f64)
        .collect())
}

/// A named o-MPS regressor.
pub trait Regressor: Sync {
    fn name(&self) -> String;
    fn fit(&self, x: &DMatrix<f64>, y: &[usize], n_classes: usize) -> Result<OmpsModel>;
}

/// The built-in penalized multinomial logistic regressor.
#[derive(Debug, Clone)]
pub struct PenalizedMultinomial {
    pub spec: FitSpec,
}

impl Regressor for PenalizedMultinomial {
    fn name(&self) -> String {
        self.spec.penalty.to_string()
    }

    fn fit(&self, x: &DMatrix<f64>, y: &[usize], n_classes: usize) -> Result<OmpsModel> {
        fit_omps(x, y, n_classes, &self.spec)
    }
}

/// Look up a built-in regressor by penalty name; λ is chosen by CV.
pub fn regressor_by_name(name: &str, folds: usize, seed: u64) -> Result<Box<dyn Regressor>> {
    let penalty: Penalty = name.parse()?;
    Ok(Box::new(PenalizedMultinomial {
        spec: FitSpec::cv(penalty, folds, seed),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn data(n: usize, d: usize, c: usize, seed: u64) -> (DMatrix<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0f64..1.0));
        let y = (0..n)
            .map(|i| {
                let s: f64 = x[(i, 0)] - 0.5 * x[(i, d - 1)];
                let p = rng.random::<f64>();
                if c == 2 {
                    (p < 1.0 / (1.0 + (-s).exp())) as usize
                } else {
                    ((p + s.abs() * 0.3) * c as f64) as usize % c
                }
            })
            .collect();
        (x, y)
    }

    #[test]
    fn huge_lasso_gives_intercept_only() {
        let (x, y) = data(60, 3, 3, 1);
        let m = fit_omps(&x, &y, 3, &FitSpec::fixed(Penalty::Lasso, 1e9)).unwrap();
        assert!(m.coef.columns(1, 3).iter().all(|&v| v == 0.0));
        let mut freq = [0.0; 3];
        for &c in &y {
            freq[c] += 1.0 / 60.0;
        }
        let p = predict_omps(&m, &[0.3, -0.2, 0.9]).unwrap();
        for k in 0..3 {
            assert_abs_diff_eq!(p[k], freq[k], epsilon = 1e-6);
        }
    }

    #[test]
    fn duplicated_rows_give_same_fit() {
        let (x, y) = data(40, 3, 3, 2);
        let spec = FitSpec::fixed(Penalty::Ridge, 0.05);
        let a = fit_omps(&x, &y, 3, &spec).unwrap();
        let idx: Vec<usize> = (0..40).chain(0..40).collect();
        let x2 = x.select_rows(&idx);
        let y2: Vec<usize> = idx.iter().map(|&i| y[i]).collect();
        let b = fit_omps(&x2, &y2, 3, &spec).unwrap();
        assert!((a.coef - b.coef).abs().max() < 1e-6);
    }

    #[test]
    fn objective_is_monotone() {
        let (x, y) = data(50, 4, 4, 3);
        for pen in [Penalty::None, Penalty::Ridge, Penalty::Lasso, Penalty::GroupLasso] {
            let path = objective_path(&x, &y, 4, &FitSpec::fixed(pen, 0.01), 0.01).unwrap();
            for w in path.windows(2) {
                assert!(w[1] <= w[0], "{pen}: {} > {}", w[1], w[0]);
            }
        }
    }

    #[test]
    fn singleton_groups_match_lasso() {
        let (x, y) = data(60, 4, 2, 4);
        let mut spec = FitSpec::fixed(Penalty::Lasso, 0.02);
        spec.solver.tol = 1e-12;
        spec.solver.grad_tol = 1e-10;
        let a = fit_omps(&x, &y, 2, &spec).unwrap();
        spec.penalty = Penalty::GroupLasso;
        let b = fit_omps(&x, &y, 2, &spec).unwrap();
        assert!((a.coef - b.coef).abs().max() < 1e-6);
    }

    #[test]
    fn ridge_is_permutation_invariant() {
        let (x, y) = data(50, 4, 3, 5);
        let spec = FitSpec::fixed(Penalty::Ridge, 0.1);
        let a = fit_omps(&x, &y, 3, &spec).unwrap();
        let perm = [2, 0, 3, 1];
        let xp = DMatrix::from_fn(50, 4, |i, j| x[(i, perm[j])]);
        let b = fit_omps(&xp, &y, 3, &spec).unwrap();
        for k in 0..2 {
            for j in 0..4 {
                assert_abs_diff_eq!(a.coef[(k, perm[j] + 1)], b.coef[(k, j + 1)], epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn predictions_are_probabilities() {
        let mut coef = DMatrix::zeros(7, 3);
        let m = OmpsModel {
            n_classes: 8,
            coef: coef.clone(),
            penalty: Penalty::None,
            lambda: 0.0,
            groups: vec![],
            codec: None,
            converged: true,
            iterations: 0,
            grad_norm: 0.0,
            cv_path: None,
        };
        let p = predict_omps(&m, &[1.0, 2.0]).unwrap();
        assert_eq!(p.len(), 8);
        assert!(p.iter().all(|&v| (v - 0.125).abs() < 1e-15));
        coef[(2, 1)] = 500.0;
        let m = OmpsModel { coef, ..m };
        let p = predict_omps(&m, &[1.0, 0.0]).unwrap();
        assert!(p[3] > 1.0 - 1e-12);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(predict_omps(&m, &[1.0]).is_err());
    }

    #[test]
    fn input_errors() {
        let (x, mut y) = data(20, 2, 3, 6);
        y.iter_mut().for_each(|c| *c = (*c).min(1));
        assert!(fit_omps(&x, &y, 3, &FitSpec::fixed(Penalty::None, 0.0)).is_err());
        let mut x2 = x.clone();
        x2[(0, 0)] = f64::NAN;
        assert!(fit_omps(&x2, &y, 2, &FitSpec::fixed(Penalty::None, 0.0)).is_err());
    }

    #[test]
    fn cv_picks_a_grid_value() {
        let (x, y) = data(80, 5, 3, 7);
        let m = fit_omps(&x, &y, 3, &FitSpec::cv(Penalty::Lasso, 5, 1)).unwrap();
        let path = m.cv_path.unwrap();
        assert_eq!(path.len(), 20);
        assert!(path.iter().any(|(l, _)| *l == m.lambda));
    }

    #[test]
    fn codec_expansion() {
        let v = [MotifValue::Real(0.5), MotifValue::Level { level: 2, n_levels: 2 }];
        let c = PredictorCodec::for_motif(&v);
        assert_eq!(expand_predictors(&v, &c).unwrap(), vec![0.5, 1.0]);
        let v3 = [MotifValue::Level { level: 1, n_levels: 3 }];
        let c3 = PredictorCodec::for_motif(&v3);
        assert_eq!(c3.expand(&v3).unwrap(), vec![0.0, 0.0]);
        assert_eq!(c.groups(), vec![vec![0], vec![1]]);
        let bad = [MotifValue::Level { level: 4, n_levels: 3 }];
        assert!(c3.expand(&bad).is_err());
    }

    #[test]
    fn codec_width_for_many_clusters() {
        let mut v: Vec<MotifValue> = (0..184).map(|_| MotifValue::Real(0.0)).collect();
        v.extend((0..43).map(|_| MotifValue::Level { level: 1, n_levels: 2 }));
        assert_eq!(PredictorCodec::for_motif(&v).width(), 227);
    }
}
