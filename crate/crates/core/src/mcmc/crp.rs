//! Chinese restaurant process partitions. Assignments are zero-based block
//! labels; a partition is valid when its labels are exactly `0..q`.

use rand::Rng;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Block sizes of a contiguous assignment.
pub fn block_sizes(assign: &[usize]) -> Vec<usize> {
    let q = assign.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0; q];
    for &a in assign {
        sizes[a] += 1;
    }
    sizes
}

/// True when every label in `0..=max` is occupied.
pub fn is_contiguous(assign: &[usize]) -> bool {
    block_sizes(assign).iter().all(|&m| m > 0)
}

/// Relabel blocks in order of first appearance.
pub fn canonicalize(assign: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    assign
        .iter()
        .map(|a| {
            let next = map.len();
            *map.entry(*a).or_insert(next)
        })
        .collect()
}

/// `log[ Γ(α) α^q / Γ(α + p) · Π_u Γ(m_u) ]` for the partition `assign`.
pub fn crp_log_pmf(assign: &[usize], mass: f64) -> Result<f64> {
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(Error::invalid(format!("CRP mass must be positive, got {mass}")));
    }
    let sizes = block_sizes(assign);
    if sizes.iter().any(|&m| m == 0) {
        return Err(Error::invalid("partition labels are not contiguous"));
    }
    let p = assign.len() as f64;
    let q = sizes.len() as f64;
    let blocks: f64 = sizes.iter().map(|&m| ln_gamma(m as f64)).sum();
    Ok(ln_gamma(mass) + q * mass.ln() - ln_gamma(mass + p) + blocks)
}

/// Sequential ("customers and tables") draw of a partition of `n` items.
pub fn sample_crp<R: Rng + ?Sized>(n: usize, mass: f64, rng: &mut R) -> Vec<usize> {
    let mut assign = Vec::with_capacity(n);
    let mut sizes: Vec<usize> = Vec::new();
    for i in 0..n {
        let mut u = rng.random::<f64>() * (i as f64 + mass);
        let mut label = sizes.len();
        for (k, &m) in sizes.iter().enumerate() {
            u -= m as f64;
            if u < 0.0 {
                label = k;
                break;
            }
        }
        if label == sizes.len() {
            sizes.push(0);
        }
        sizes[label] += 1;
        assign.push(label);
    }
    assign
}
