//! Balancing weights built from estimated o-MPS, and balance diagnostics.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::MixedDataset;
use crate::error::{Error, Result};

/// Smallest o-MPS value used before inversion.
pub const OMPS_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ic,
    Igo,
    Flexor,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ic" => Ok(Method::Ic),
            "igo" => Ok(Method::Igo),
            "flexor" => Ok(Method::Flexor),
            _ => Err(Error::invalid(format!("unknown weighting method '{s}'"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Ic => "ic",
            Method::Igo => "igo",
            Method::Flexor => "flexor",
        })
    }
}

/// Study and group labels (one-based) of the weighted subjects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Memberships {
    pub study: Vec<usize>,
    pub group: Vec<usize>,
    pub n_studies: usize,
    pub n_groups: usize,
}

impl Memberships {
    pub fn from_dataset(ds: &MixedDataset) -> Self {
        Self {
            study: ds.study.clone(),
            group: ds.group.clone(),
            n_studies: ds.n_studies,
            n_groups: ds.n_groups,
        }
    }

    pub fn len(&self) -> usize {
        self.study.len()
    }

    pub fn is_empty(&self) -> bool {
        self.study.is_empty()
    }

    fn class(&self, i: usize) -> usize {
        (self.study[i] - 1) * self.n_groups + (self.group[i] - 1)
    }

    fn validate(&self, omps: &DMatrix<f64>) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Err(Error::invalid("no subjects to weight"));
        }
        if self.group.len() != n || omps.nrows() != n {
            return Err(Error::Dimension(format!(
                "{} o-MPS rows, {} study labels, {} group labels",
                omps.nrows(),
                n,
                self.group.len()
            )));
        }
        if omps.ncols() != self.n_studies * self.n_groups {
            return Err(Error::Dimension(format!(
                "{} o-MPS columns for {} study-group combinations",
                omps.ncols(),
                self.n_studies * self.n_groups
            )));
        }
        for (&s, &z) in self.study.iter().zip(&self.group) {
            if s == 0 || s > self.n_studies || z == 0 || z > self.n_groups {
                return Err(Error::LabelOutOfRange(format!("study {s}, group {z}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalancingWeights {
    pub method: Method,
    pub raw: Vec<f64>,
    /// Sums to the number of subjects.
    pub normalized: Vec<f64>,
    pub theta: Option<Vec<f64>>,
    pub gamma: Option<Vec<f64>>,
    pub ess_percent: f64,
    /// Number of o-MPS entries raised to [`OMPS_FLOOR`].
    pub clipped: usize,
}

/// Floor the o-MPS matrix, rejecting non-positive or non-finite entries.
fn floored(omps: &DMatrix<f64>) -> Result<(DMatrix<f64>, usize)> {
    let mut clipped = 0;
    let mut out = omps.clone();
    for v in out.iter_mut() {
        if !(v.is_finite() && *v > 0.0) {
            return Err(Error::invalid(format!("o-MPS entry {v} is not positive")));
        }
        if *v < OMPS_FLOOR {
            *v = OMPS_FLOOR;
            clipped += 1;
        }
    }
    Ok((out, clipped))
}

/// Scale nonnegative weights to sum to their count.
pub fn normalize(raw: &[f64]) -> Result<Vec<f64>> {
    let s: f64 = raw.iter().sum();
    if raw.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || !(s > 0.0) {
        return Err(Error::invalid("weights must be nonnegative with a positive sum"));
    }
    let n = raw.len() as f64;
    Ok(raw.iter().map(|w| n * w / s).collect())
}

/// Percent effective sample size `100 (Σw)² / (N Σw²)`.
pub fn ess_percent(w: &[f64]) -> Result<f64> {
    if w.is_empty() || w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::invalid("weights must be nonnegative"));
    }
    let s: f64 = w.iter().sum();
    let ss: f64 = w.iter().map(|v| v * v).sum();
    if ss == 0.0 {
        return Err(Error::invalid("all weights are zero"));
    }
    Ok((100.0 * s * s / (w.len() as f64 * ss)).min(100.0))
}

fn finish(
    method: Method,
    raw: Vec<f64>,
    normalized: Vec<f64>,
    theta: Option<Vec<f64>>,
    gamma: Option<Vec<f64>>,
    clipped: usize,
) -> Result<BalancingWeights> {
    let ess = ess_percent(&normalized)?;
    Ok(BalancingWeights {
        method,
        raw,
        normalized,
        theta,
        gamma,
        ess_percent: ess,
        clipped,
    })
}

/// Integrative combined weights `1 / δ̂_{s_i z_i}(x_i)`.
pub fn ic_weights(omps: &DMatrix<f64>, m: &Memberships) -> Result<BalancingWeights> {
    m.validate(omps)?;
    let (d, clipped) = floored(omps)?;
    let raw: Vec<f64> = (0..m.len()).map(|i| 1.0 / d[(i, m.class(i))]).collect();
    let norm = normalize(&raw)?;
    finish(Method::Ic, raw, norm, None, None, clipped)
}

/// Integrative generalized overlap weights: the IC weight divided by the
/// sum of inverse o-MPS over all study-group combinations.
pub fn igo_weights(omps: &DMatrix<f64>, m: &Memberships) -> Result<BalancingWeights> {
    m.validate(omps)?;
    let (d, clipped) = floored(omps)?;
    let raw: Vec<f64> = (0..m.len())
        .map(|i| {
            let denom: f64 = d.row(i).iter().map(|v| 1.0 / v).sum();
            (1.0 / d[(i, m.class(i))]) / denom
        })
        .collect();
    let norm = normalize(&raw)?;
    finish(Method::Igo, raw, norm, None, None, clipped)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlexorOptions {
    pub max_iter: usize,
    /// Stop when the percent ESS improves by less than this.
    pub tol: f64,
    /// Weight on the vertex of each smoothed vertex start.
    pub vertex_weight: f64,
}

impl Default for FlexorOptions {
    fn default() -> Self {
        Self {
            max_iter: 5_000,
            tol: 1e-8,
            vertex_weight: 0.9,
        }
    }
}

struct Flexor<'a> {
    d: &'a DMatrix<f64>,
    m: &'a Memberships,
    theta: &'a [f64],
    members: Vec<Vec<usize>>,
}

impl Flexor<'_> {
    fn raw(&self, gamma: &[f64]) -> Vec<f64> {
        let (j, k) = (self.m.n_studies, self.m.n_groups);
        (0..self.m.len())
            .map(|i| {
                let mut denom = 0.0;
                for s in 0..j {
                    for z in 0..k {
                        denom += gamma[s] * gamma[s] * self.theta[z] * self.theta[z]
                            / self.d[(i, s * k + z)];
                    }
                }
                (1.0 / self.d[(i, self.m.class(i))]) / denom
            })
            .collect()
    }

    /// Group-normalized weights: group `z` carries mass `N θ_z`.
    fn normalized(&self, raw: &[f64]) -> Vec<f64> {
        let n = raw.len() as f64;
        let mut out = vec![0.0; raw.len()];
        for (z, idx) in self.members.iter().enumerate() {
            let s: f64 = idx.iter().map(|&i| raw[i]).sum();
            for &i in idx {
                out[i] = n * self.theta[z] * raw[i] / s;
            }
        }
        out
    }

    fn ess(&self, gamma: &[f64]) -> f64 {
        let w = self.normalized(&self.raw(gamma));
        let n = w.len() as f64;
        100.0 * n / w.iter().map(|v| v * v).sum::<f64>()
    }

    /// Gradient of the percent ESS with respect to `gamma`.
    fn ess_grad(&self, gamma: &[f64]) -> (f64, Vec<f64>) {
        let (j, k) = (self.m.n_studies, self.m.n_groups);
        let n = self.m.len();
        let nf = n as f64;
        let mut denom = vec![0.0; n];
        // dD_i/dγ_s = 2 γ_s Σ_z θ_z² / δ_{i,sz}
        let mut dd = vec![vec![0.0; j]; n];
        for i in 0..n {
            for s in 0..j {
                let mut a = 0.0;
                for z in 0..k {
                    a += self.theta[z] * self.theta[z] / self.d[(i, s * k + z)];
                }
                denom[i] += gamma[s] * gamma[s] * a;
                dd[i][s] = 2.0 * gamma[s] * a;
            }
        }
        let raw: Vec<f64> = (0..n)
            .map(|i| (1.0 / self.d[(i, self.m.class(i))]) / denom[i])
            .collect();
        // Q = Σ_z (N θ_z)² Σ_{i∈z} r_i² / S_z², ESS = 100 N / Q.
        let mut q = 0.0;
        let mut dq = vec![0.0; j];
        for (z, idx) in self.members.iter().enumerate() {
            let c = (nf * self.theta[z]).powi(2);
            let s1: f64 = idx.iter().map(|&i| raw[i]).sum();
            let s2: f64 = idx.iter().map(|&i| raw[i] * raw[i]).sum();
            q += c * s2 / (s1 * s1);
            for (s, g) in dq.iter_mut().enumerate() {
                let mut ds1 = 0.0;
                let mut ds2 = 0.0;
                for &i in idx {
                    let dr = -raw[i] / denom[i] * dd[i][s];
                    ds1 += dr;
                    ds2 += 2.0 * raw[i] * dr;
                }
                *g += c * (ds2 / (s1 * s1) - 2.0 * s2 * ds1 / (s1 * s1 * s1));
            }
        }
        let ess = 100.0 * nf / q;
        let grad = dq.iter().map(|g| -100.0 * nf * g / (q * q)).collect();
        (ess, grad)
    }

    fn ascend(&self, start: Vec<f64>, opts: &FlexorOptions) -> (Vec<f64>, f64) {
        let mut g = start;
        let mut step = 1e-2;
        let (mut ess, mut grad) = self.ess_grad(&g);
        for _ in 0..opts.max_iter {
            let mut improved = None;
            while step > 1e-14 {
                let cand: Vec<f64> = g.iter().zip(&grad).map(|(a, b)| a + step * b).collect();
                let cand = project_simplex(&cand);
                let e = if cand.iter().any(|v| *v > 0.0) {
                    self.ess(&cand)
                } else {
                    f64::NEG_INFINITY
                };
                if e.is_finite() && e > ess {
                    improved = Some((cand, e));
                    break;
                }
                step *= 0.5;
            }
            let Some((cand, e)) = improved else { break };
            let gain = e - ess;
            g = cand;
            step *= 2.0;
            let (e2, gr) = self.ess_grad(&g);
            ess = e2;
            grad = gr;
            if gain < opts.tol {
                break;
            }
        }
        (g, ess)
    }
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (k, &x) in u.iter().enumerate() {
        css += x;
        let t = (css - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

fn check_simplex(v: &[f64], len: usize, what: &str) -> Result<()> {
    if v.len() != len
        || v.iter().any(|x| !(x.is_finite() && *x >= 0.0))
        || (v.iter().sum::<f64>() - 1.0).abs() > 1e-6
    {
        return Err(Error::invalid(format!(
            "{what} must be a probability vector of length {len}"
        )));
    }
    Ok(())
}

/// Flexible ESS-maximizing weights for target group prevalences `theta`.
///
/// The study weights `γ` are chosen on the simplex to maximize the percent
/// ESS; each group's weights are scaled to total `N θ_z`.
pub fn flexor_weights(
    omps: &DMatrix<f64>,
    m: &Memberships,
    theta: &[f64],
    gamma_init: Option<&[f64]>,
    opts: &FlexorOptions,
) -> Result<BalancingWeights> {
    m.validate(omps)?;
    check_simplex(theta, m.n_groups, "theta")?;
    let (d, clipped) = floored(omps)?;
    let mut members = vec![Vec::new(); m.n_groups];
    for (i, &z) in m.group.iter().enumerate() {
        members[z - 1].push(i);
    }
    for (z, idx) in members.iter().enumerate() {
        if idx.is_empty() && theta[z] > 0.0 {
            return Err(Error::invalid(format!("group {} has no subjects", z + 1)));
        }
    }
    let f = Flexor {
        d: &d,
        m,
        theta,
        members,
    };
    let j = m.n_studies;
    let mut starts = Vec::new();
    if let Some(g) = gamma_init {
        check_simplex(g, j, "gamma")?;
        starts.push(g.to_vec());
    }
    starts.push(vec![1.0 / j as f64; j]);
    if j > 1 {
        for s in 0..j {
            let mut g = vec![(1.0 - opts.vertex_weight) / j as f64; j];
            g[s] += opts.vertex_weight;
            starts.push(g);
        }
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in starts {
        let (g, e) = f.ascend(s, opts);
        if best.as_ref().is_none_or(|(_, b)| e > *b) {
            best = Some((g, e));
        }
    }
    let (gamma, _) = best.expect("at least one start");
    if j > 1 && gamma.iter().filter(|&&g| g > 0.0).count() == 1 {
        log::warn!("FLEXOR study weights put all mass on one study: {gamma:?}");
    }
    let raw = f.raw(&gamma);
    let norm = f.normalized(&raw);
    finish(
        Method::Flexor,
        raw,
        norm,
        Some(theta.to_vec()),
        Some(gamma),
        clipped,
    )
}

/// Compute weights with any method; `theta` is used by FLEXOR only.
pub fn compute_weights(
    method: Method,
    omps: &DMatrix<f64>,
    m: &Memberships,
    theta: Option<&[f64]>,
) -> Result<BalancingWeights> {
    match method {
        Method::Ic => ic_weights(omps, m),
        Method::Igo => igo_weights(omps, m),
        Method::Flexor => {
            let uniform = vec![1.0 / m.n_groups as f64; m.n_groups];
            flexor_weights(
                omps,
                m,
                theta.unwrap_or(&uniform),
                None,
                &FlexorOptions::default(),
            )
        }
    }
}

/// Absolute standardized bias (percent) of a covariate between groups `z1`
/// and `z2`: weighted mean difference over the unweighted pooled sd.
pub fn absolute_standardized_bias(
    x: &[f64],
    weights: &[f64],
    group: &[usize],
    z1: usize,
    z2: usize,
) -> Result<f64> {
    if x.len() != weights.len() || x.len() != group.len() {
        return Err(Error::Dimension("covariate, weights and groups differ in length".into()));
    }
    let stats = |z: usize| -> Result<(f64, f64)> {
        let idx: Vec<usize> = (0..x.len()).filter(|&i| group[i] == z).collect();
        let sw: f64 = idx.iter().map(|&i| weights[i]).sum();
        if idx.len() < 2 || !(sw > 0.0) {
            return Err(Error::invalid(format!("group {z} is empty after weighting")));
        }
        let wm = idx.iter().map(|&i| weights[i] * x[i]).sum::<f64>() / sw;
        let m = idx.iter().map(|&i| x[i]).sum::<f64>() / idx.len() as f64;
        let var = idx.iter().map(|&i| (x[i] - m).powi(2)).sum::<f64>() / (idx.len() - 1) as f64;
        Ok((wm, var))
    };
    let (m1, v1) = stats(z1)?;
    let (m2, v2) = stats(z2)?;
    let sd = (0.5 * (v1 + v2)).sqrt();
    if !(sd > 0.0) {
        return Err(Error::invalid("zero pooled standard deviation"));
    }
    Ok(100.0 * (m1 - m2).abs() / sd)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsbRow {
    pub covariate: String,
    /// Indicator level for factor covariates.
    pub level: Option<u8>,
    /// `None` when the pooled sd is zero.
    pub asb: Option<f64>,
}

/// ASB for every covariate; factor columns contribute one row per
/// non-reference level indicator.
pub fn asb_table(ds: &MixedDataset, weights: &[f64], z1: usize, z2: usize) -> Result<Vec<AsbRow>> {
    let mut rows = Vec::new();
    let run = |x: &[f64]| match absolute_standardized_bias(x, weights, &ds.group, z1, z2) {
        Ok(v) => Ok(Some(v)),
        Err(Error::InvalidArgument(msg)) if msg.contains("pooled") => Ok(None),
        Err(e) => Err(e),
    };
    for (j, name) in ds.continuous_names.iter().enumerate() {
        let x: Vec<f64> = ds.continuous.column(j).iter().copied().collect();
        rows.push(AsbRow {
            covariate: name.clone(),
            level: None,
            asb: run(&x)?,
        });
    }
    for b in &ds.factors {
        for (j, name) in b.names.iter().enumerate() {
            for level in 2..=b.n_levels as u8 {
                let x: Vec<f64> = b
                    .levels
                    .column(j)
                    .iter()
                    .map(|&v| (v == level) as u8 as f64)
                    .collect();
                rows.push(AsbRow {
                    covariate: name.clone(),
                    level: Some(level),
                    asb: run(&x)?,
                });
            }
        }
    }
    Ok(rows)
}
