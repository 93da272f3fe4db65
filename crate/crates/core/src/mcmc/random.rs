//! Random variate helpers not covered directly by `rand_distr`.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, StandardNormal};

/// Index drawn with probability proportional to `exp(log_weights[k])`.
/// Entries equal to `-inf` are never chosen unless all are.
pub fn sample_log_weights<R: Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> usize {
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return rng.random_range(0..log_weights.len());
    }
    let total: f64 = log_weights.iter().map(|w| (w - max).exp()).sum();
    let mut u = rng.random::<f64>() * total;
    for (k, w) in log_weights.iter().enumerate() {
        u -= (w - max).exp();
        if u <= 0.0 {
            return k;
        }
    }
    // Rounding left a sliver of mass; return the last positive-weight entry.
    log_weights
        .iter()
        .rposition(|w| w.is_finite())
        .unwrap_or(log_weights.len() - 1)
}

/// Normalized probabilities from log weights.
pub fn softmax(log_weights: &[f64]) -> Vec<f64> {
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = log_weights.iter().map(|w| (w - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn log_sum_exp(xs: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.into_iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn normal<R: Rng + ?Sized>(mean: f64, var: f64, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    mean + var.sqrt() * z
}

/// Gamma with the given shape and rate.
pub fn gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, 1.0 / rate)
        .expect("positive gamma parameters")
        .sample(rng)
}

/// Inverse-gamma `IG(shape, scale)` draw, optionally truncated to `(0, upper]`.
///
/// Works on the precision `1/x ~ Gamma(shape, scale)` left-truncated at
/// `1/upper`: plain rejection when the truncation point is within one standard
/// deviation above the mode, otherwise a shifted-exponential proposal whose
/// acceptance ratio is maximal at the truncation point.
pub fn inv_gamma_truncated<R: Rng + ?Sized>(
    shape: f64,
    scale: f64,
    upper: Option<f64>,
    rng: &mut R,
) -> f64 {
    let Some(upper) = upper else {
        return 1.0 / gamma(shape, scale, rng);
    };
    let lo = 1.0 / upper;
    let mode = if shape > 1.0 { (shape - 1.0) / scale } else { 0.0 };
    let sd = shape.sqrt() / scale;
    if lo <= mode + sd {
        for _ in 0..10_000 {
            let prec = gamma(shape, scale, rng);
            if prec >= lo {
                return 1.0 / prec;
            }
        }
    }
    let curvature = (shape - 1.0).max(0.0) / lo;
    let beta = scale - curvature;
    let exp = Exp::new(beta).expect("positive exponential rate");
    loop {
        let prec = lo + exp.sample(rng);
        let log_accept = (shape - 1.0) * (prec / lo).ln() - curvature * (prec - lo);
        if rng.random::<f64>().ln() <= log_accept {
            return 1.0 / prec;
        }
    }
}

/// Dirichlet draw via normalized gammas, floored at the smallest positive
/// normal value so that log-probabilities stay finite.
pub fn dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let mut g: Vec<f64> = alpha
        .iter()
        .map(|&a| gamma(a, 1.0, rng).max(f64::MIN_POSITIVE))
        .collect();
    let s: f64 = g.iter().sum();
    for v in &mut g {
        *v /= s;
    }
    g
}

/// One univariate slice-sampling update of `x0` on the bounded interval
/// `(lo, hi)`, shrinking from the whole support.
pub fn slice_sample_bounded<R, F>(x0: f64, lo: f64, hi: f64, log_density: F, rng: &mut R) -> f64
where
    R: Rng + ?Sized,
    F: Fn(f64) -> f64,
{
    let level = log_density(x0) + rng.random::<f64>().ln();
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let x = a + (b - a) * rng.random::<f64>();
        if x > lo && x < hi && log_density(x) > level {
            return x;
        }
        if x < x0 {
            a = x;
        } else {
            b = x;
        }
    }
    x0
}
