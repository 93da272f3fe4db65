//! Balance-weighted Kaplan–Meier curves and bootstrap bands.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceForm {
    /// `Ŝ² Σ d/(R(R−d))`.
    #[default]
    GreenwoodSum,
    /// `Ŝ² Π d/(R(R−d))` over times with a weighted death in the group.
    LiteralProduct,
}

impl std::str::FromStr for VarianceForm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greenwood-sum" | "sum" => Ok(Self::GreenwoodSum),
            "literal-product" | "product" => Ok(Self::LiteralProduct),
            _ => Err(Error::invalid(format!("unknown variance form '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    /// One-based group label.
    pub group: usize,
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
    pub variance: Vec<f64>,
    pub weighted_deaths: Vec<f64>,
    pub weighted_at_risk: Vec<f64>,
}

impl SurvivalCurve {
    /// Index of the last time `t_j ≤ t`.
    fn last_index(&self, t: f64) -> Option<usize> {
        let k = self.times.partition_point(|&tj| tj <= t);
        k.checked_sub(1)
    }

    /// Right-continuous step evaluation, 1 before the first time.
    pub fn survival_at(&self, t: f64) -> f64 {
        self.last_index(t).map_or(1.0, |j| self.survival[j])
    }

    pub fn variance_at(&self, t: f64) -> f64 {
        self.last_index(t).map_or(0.0, |j| self.variance[j])
    }
}

/// Step-function values of a curve on a grid.
pub fn step_eval(curve: &SurvivalCurve, grid: &[f64]) -> Vec<f64> {
    grid.iter().map(|&t| curve.survival_at(t)).collect()
}

fn check_inputs(time: &[f64], event: &[bool], group: &[usize], weights: &[f64]) -> Result<()> {
    let n = time.len();
    if event.len() != n || group.len() != n || weights.len() != n {
        return Err(Error::Dimension(format!(
            "{n} times, {} events, {} groups, {} weights",
            event.len(),
            group.len(),
            weights.len()
        )));
    }
    if n == 0 {
        return Err(Error::invalid("no subjects"));
    }
    if time.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("survival times must be finite"));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid("weights must be finite and nonnegative"));
    }
    Ok(())
}

/// Balance-weighted Kaplan–Meier estimate for group `z` (one-based).
///
/// Event times are the distinct uncensored times of all subjects. Deaths and
/// at-risk masses are weighted sums scaled by `N`.
pub fn bkme(
    time: &[f64],
    event: &[bool],
    group: &[usize],
    weights: &[f64],
    z: usize,
    form: VarianceForm,
) -> Result<SurvivalCurve> {
    check_inputs(time, event, group, weights)?;
    let n = time.len();
    let nf = n as f64;
    let mut times: Vec<f64> = (0..n).filter(|&i| event[i]).map(|i| time[i]).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();

    let mut order: Vec<usize> = (0..n).filter(|&i| group[i] == z).collect();
    order.sort_by(|&a, &b| time[a].total_cmp(&time[b]));
    let total: f64 = order.iter().map(|&i| weights[i]).sum();

    let d_len = times.len();
    let mut deaths = vec![0.0; d_len];
    let mut at_risk = vec![0.0; d_len];
    // Walk subjects in time order; mass with Y ≥ t_j is the total minus what has left.
    let mut left = 0.0;
    let mut k = 0;
    for (j, &tj) in times.iter().enumerate() {
        while k < order.len() && time[order[k]] < tj {
            left += weights[order[k]];
            k += 1;
        }
        at_risk[j] = nf * (total - left).max(0.0);
        let mut kk = k;
        while kk < order.len() && time[order[kk]] == tj {
            if event[order[kk]] {
                deaths[j] += nf * weights[order[kk]];
            }
            kk += 1;
        }
    }
    if let Some(&r1) = at_risk.first() {
        if r1 <= 0.0 {
            return Err(Error::invalid(format!(
                "group {z} has no weighted subjects at risk at the first event time"
            )));
        }
    } else if total <= 0.0 {
        return Err(Error::invalid(format!("group {z} has no weighted subjects")));
    }

    let mut survival = Vec::with_capacity(d_len);
    let mut variance = Vec::with_capacity(d_len);
    let mut s = 1.0;
    let mut sum = 0.0;
    let mut prod = 1.0;
    let mut any_death = false;
    for j in 0..d_len {
        let (d, r) = (deaths[j].min(at_risk[j]), at_risk[j]);
        deaths[j] = d;
        if r > 0.0 {
            s *= 1.0 - d / r;
            if d > 0.0 && r > d {
                let term = d / (r * (r - d));
                sum += term;
                prod *= term;
            }
            if d > 0.0 {
                any_death = true;
            }
        }
        let v = match form {
            VarianceForm::GreenwoodSum => s * s * sum,
            VarianceForm::LiteralProduct if any_death => s * s * prod,
            VarianceForm::LiteralProduct => 0.0,
        };
        survival.push(s.clamp(0.0, 1.0));
        variance.push(v);
    }
    Ok(SurvivalCurve {
        group: z,
        times,
        survival,
        variance,
        weighted_deaths: deaths,
        weighted_at_risk: at_risk,
    })
}

/// Smallest event time at which the curve reaches `1 − q`, if any.
pub fn survival_percentile(curve: &SurvivalCurve, q: f64) -> Result<Option<f64>> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(format!("percentile {q} is not in (0, 1)")));
    }
    let target = 1.0 - q;
    Ok(curve
        .times
        .iter()
        .zip(&curve.survival)
        .find(|(_, &s)| s <= target + 1e-12)
        .map(|(&t, _)| t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalBands {
    pub group: usize,
    pub times: Vec<f64>,
    pub estimate: Vec<f64>,
    pub se: Vec<f64>,
    pub percentile_lower: Vec<f64>,
    pub percentile_upper: Vec<f64>,
    pub normal_lower: Vec<f64>,
    pub normal_upper: Vec<f64>,
    pub replicates: usize,
    /// Resamples discarded because the group was empty.
    pub redraws: usize,
}

const MAX_REDRAWS: usize = 1000;

/// Linear-interpolation quantile of sorted values.
fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Nonparametric bootstrap of the group-`z` curve.
///
/// `recipe` maps resampled subject indices to normalized weights of the
/// resampled subjects, in draw order. Replicate curves are evaluated as step
/// functions on the full-sample event times.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_survival<F>(
    time: &[f64],
    event: &[bool],
    group: &[usize],
    full_weights: &[f64],
    z: usize,
    recipe: F,
    replicates: usize,
    seed: u64,
) -> Result<SurvivalBands>
where
    F: Fn(&[usize]) -> Result<Vec<f64>> + Sync,
{
    if replicates < 2 {
        return Err(Error::invalid("at least 2 bootstrap replicates are needed"));
    }
    let full = bkme(time, event, group, full_weights, z, VarianceForm::GreenwoodSum)?;
    let n = time.len();
    let grid = full.times.clone();
    let results: Vec<(Vec<f64>, usize)> = (0..replicates as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, b));
            let mut redraws = 0;
            loop {
                let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                if !idx.iter().any(|&i| group[i] == z) {
                    redraws += 1;
                    if redraws > MAX_REDRAWS {
                        return Err(Error::Numerical(format!(
                            "group {z} missing from {MAX_REDRAWS} consecutive resamples"
                        )));
                    }
                    continue;
                }
                let w = recipe(&idx)?;
                let t: Vec<f64> = idx.iter().map(|&i| time[i]).collect();
                let e: Vec<bool> = idx.iter().map(|&i| event[i]).collect();
                let g: Vec<usize> = idx.iter().map(|&i| group[i]).collect();
                let curve = bkme(&t, &e, &g, &w, z, VarianceForm::GreenwoodSum)?;
                return Ok((step_eval(&curve, &grid), redraws));
            }
        })
        .collect::<Result<_>>()?;
    let redraws = results.iter().map(|r| r.1).sum();
    let bf = replicates as f64;
    let mut se = Vec::with_capacity(grid.len());
    let mut pl = Vec::with_capacity(grid.len());
    let mut pu = Vec::with_capacity(grid.len());
    let mut nl = Vec::with_capacity(grid.len());
    let mut nu = Vec::with_capacity(grid.len());
    for j in 0..grid.len() {
        let mut col: Vec<f64> = results.iter().map(|r| r.0[j]).collect();
        let mean = col.iter().sum::<f64>() / bf;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (bf - 1.0);
        let sd = var.sqrt();
        col.sort_by(f64::total_cmp);
        pl.push(quantile_sorted(&col, 0.025));
        pu.push(quantile_sorted(&col, 0.975));
        let s = full.survival[j];
        nl.push((s - 1.96 * sd).clamp(0.0, 1.0));
        nu.push((s + 1.96 * sd).clamp(0.0, 1.0));
        se.push(sd);
    }
    Ok(SurvivalBands {
        group: z,
        times: grid,
        estimate: full.survival,
        se,
        percentile_lower: pl,
        percentile_upper: pu,
        normal_lower: nl,
        normal_upper: nu,
        replicates,
        redraws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Textbook product-limit estimate at each distinct event time.
    fn classical_km(time: &[f64], event: &[bool]) -> Vec<(f64, f64)> {
        let mut ts: Vec<f64> = time
            .iter()
            .zip(event)
            .filter(|(_, &e)| e)
            .map(|(&t, _)| t)
            .collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        let mut s = 1.0;
        ts.iter()
            .map(|&t| {
                let r = time.iter().filter(|&&y| y >= t).count() as f64;
                let d = time
                    .iter()
                    .zip(event)
                    .filter(|(&y, &e)| e && y == t)
                    .count() as f64;
                s *= 1.0 - d / r;
                (t, s)
            })
            .collect()
    }

    fn hand_data() -> (Vec<f64>, Vec<bool>) {
        let time = vec![1.0, 2.0, 3.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0];
        let event = vec![true, false, true, true, false, true, false, true, false, true];
        (time, event)
    }

    #[test]
    fn hand_computed_example() {
        let (time, event) = hand_data();
        let g = vec![1; 10];
        let w = vec![1.0; 10];
        let c = bkme(&time, &event, &g, &w, 1, VarianceForm::GreenwoodSum).unwrap();
        assert_eq!(c.times, vec![1.0, 3.0, 5.0, 7.0, 9.0]);
        let expect = [0.9, 0.675, 0.54, 0.36, 0.0];
        for (a, b) in c.survival.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert_eq!(c.weighted_at_risk, vec![100.0, 80.0, 50.0, 30.0, 10.0]);
        assert!((c.variance[0] - 0.81 * 10.0 / (100.0 * 90.0)).abs() < 1e-12);
        assert_eq!(survival_percentile(&c, 0.5).unwrap(), Some(7.0));
        assert_eq!(survival_percentile(&c, 0.1).unwrap(), Some(1.0));
    }

    #[test]
    fn trivial_curves() {
        let c = bkme(&[3.0, 4.0], &[false, false], &[1, 1], &[1.0, 1.0], 1, Default::default())
            .unwrap();
        assert!(c.times.is_empty());
        assert_eq!(c.survival_at(100.0), 1.0);
        assert_eq!(survival_percentile(&c, 0.1).unwrap(), None);

        let c = bkme(&[5.0], &[true], &[1], &[1.0], 1, Default::default()).unwrap();
        assert_eq!(c.survival_at(4.99), 1.0);
        assert_eq!(c.survival_at(5.0), 0.0);
        assert_eq!(c.survival_at(50.0), 0.0);
        assert_eq!(survival_percentile(&c, 0.5).unwrap(), Some(5.0));
    }

    #[test]
    fn events_pooled_across_groups() {
        let time = [1.0, 2.0, 3.0, 4.0];
        let event = [true, true, true, false];
        let group = [1, 2, 1, 2];
        let w = [1.0; 4];
        let c = bkme(&time, &event, &group, &w, 2, Default::default()).unwrap();
        assert_eq!(c.times, vec![1.0, 2.0, 3.0]);
        assert_eq!(c.survival, vec![1.0, 0.5, 0.5]);
        assert_eq!(c.weighted_deaths, vec![0.0, 4.0, 0.0]);
    }

    #[test]
    fn events_before_censoring_at_ties() {
        let time = [2.0, 2.0, 3.0];
        let event = [true, false, true];
        let c = bkme(&time, &event, &[1, 1, 1], &[1.0; 3], 1, Default::default()).unwrap();
        assert!((c.survival[0] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.survival[1], 0.0);
    }

    #[test]
    fn empty_group_is_an_error() {
        assert!(bkme(&[1.0, 2.0], &[true, true], &[1, 1], &[1.0, 1.0], 2, Default::default())
            .is_err());
        assert!(bkme(&[1.0], &[true], &[1], &[0.0], 1, Default::default()).is_err());
        assert!(bkme(&[1.0], &[true], &[1, 1], &[1.0], 1, Default::default()).is_err());
        let c = bkme(&[1.0], &[true], &[1], &[1.0], 1, Default::default()).unwrap();
        assert!(survival_percentile(&c, 1.0).is_err());
    }

    #[test]
    fn literal_product_variance() {
        let (time, event) = hand_data();
        let c = bkme(&time, &event, &[1; 10], &[1.0; 10], 1, VarianceForm::LiteralProduct).unwrap();
        let t0 = 10.0 / (100.0 * 90.0);
        let t1 = 20.0 / (80.0 * 60.0);
        assert!((c.variance[1] - 0.675f64.powi(2) * t0 * t1).abs() < 1e-15);
    }

    #[test]
    fn bootstrap_is_deterministic_and_degenerate_data_has_zero_se() {
        let n = 12;
        let time = vec![4.0; n];
        let event = vec![true; n];
        let group = vec![1; n];
        let w = vec![1.0; n];
        let recipe = |idx: &[usize]| Ok(vec![1.0; idx.len()]);
        let b = bootstrap_survival(&time, &event, &group, &w, 1, recipe, 20, 3).unwrap();
        assert!(b.se.iter().all(|&s| s == 0.0));

        let (time, event) = hand_data();
        let group: Vec<usize> = (0..10).map(|i| 1 + i % 2).collect();
        let w = vec![1.0; 10];
        let a = bootstrap_survival(&time, &event, &group, &w, 2, recipe, 50, 9).unwrap();
        let b = bootstrap_survival(&time, &event, &group, &w, 2, recipe, 50, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.replicates, 50);
        for j in 0..a.times.len() {
            assert!(a.percentile_lower[j] <= a.percentile_upper[j]);
            assert!((0.0..=1.0).contains(&a.normal_lower[j]));
        }
        assert!(bootstrap_survival(&time, &event, &group, &w, 2, recipe, 1, 9).is_err());
    }

    #[test]
    fn bootstrap_redraws_when_group_missing() {
        let mut group = vec![1; 9];
        group.push(2);
        let time: Vec<f64> = (1..=10).map(f64::from).collect();
        let event = vec![true; 10];
        let w = vec![1.0; 10];
        let recipe = |idx: &[usize]| Ok(vec![1.0; idx.len()]);
        let b = bootstrap_survival(&time, &event, &group, &w, 2, recipe, 40, 1).unwrap();
        assert!(b.redraws > 0);
    }

    fn dataset() -> impl Strategy<Value = (Vec<f64>, Vec<bool>, Vec<f64>)> {
        (1usize..=30).prop_flat_map(|n| {
            (
                prop::collection::vec(1u8..12, n).prop_map(|v| v.into_iter().map(f64::from).collect()),
                prop::collection::vec(any::<bool>(), n),
                prop::collection::vec(0.0f64..5.0, n),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn unit_weights_match_classical_km((time, event, _) in dataset()) {
            let n = time.len();
            let c = bkme(&time, &event, &vec![1; n], &vec![1.0; n], 1, Default::default()).unwrap();
            let oracle = classical_km(&time, &event);
            prop_assert_eq!(c.times.len(), oracle.len());
            for (j, (t, s)) in oracle.into_iter().enumerate() {
                prop_assert_eq!(c.times[j], t);
                prop_assert!((c.survival[j] - s).abs() < 1e-12);
            }
        }

        #[test]
        fn monotone_and_bounded((time, event, w) in dataset()) {
            let n = time.len();
            prop_assume!(w.iter().sum::<f64>() > 0.0);
            if let Ok(c) = bkme(&time, &event, &vec![1; n], &w, 1, Default::default()) {
                let mut prev = 1.0;
                for (j, &s) in c.survival.iter().enumerate() {
                    prop_assert!((0.0..=1.0).contains(&s));
                    prop_assert!(s <= prev + 1e-15);
                    prop_assert!(c.weighted_deaths[j] <= c.weighted_at_risk[j]);
                    prev = s;
                }
                prop_assert_eq!(c.survival_at(f64::NEG_INFINITY), 1.0);
            }
        }

        #[test]
        fn shift_and_scale_invariance((time, event, w) in dataset(), shift in 0.1f64..50.0, scale in 0.01f64..100.0) {
            let n = time.len();
            let g = vec![1; n];
            if let Ok(a) = bkme(&time, &event, &g, &w, 1, Default::default()) {
                let shifted: Vec<f64> = time.iter().map(|t| t + shift).collect();
                let b = bkme(&shifted, &event, &g, &w, 1, Default::default()).unwrap();
                prop_assert_eq!(&a.survival, &b.survival);
                let scaled: Vec<f64> = w.iter().map(|v| v * scale).collect();
                let c = bkme(&time, &event, &g, &scaled, 1, Default::default()).unwrap();
                for (x, y) in a.survival.iter().zip(&c.survival) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }
}
