//! Two-sample comparison of descriptor tables.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ensemble::ModelEnsemble;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

pub const DEFAULT_PERMUTATIONS: usize = 999;

/// Linear-interpolation sample quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnDiagnostic {
    pub name: String,
    /// Pooled median.
    pub location: f64,
    /// Pooled interquartile range, or standard deviation when that is zero.
    pub scale: f64,
    /// Difference of group means in scale units.
    pub mean_shift: f64,
    /// Energy statistic of this column alone, in scale units.
    pub energy: f64,
    pub dropped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub permutations: usize,
    pub p_value: f64,
    pub diagnostics: Vec<ColumnDiagnostic>,
}

impl TestResult {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value <= alpha
    }
}

fn same_columns(a: &ModelEnsemble, b: &ModelEnsemble) -> Result<()> {
    if a.names != b.names {
        return Err(Error::param(format!(
            "descriptor sets differ: {:?} vs {:?}",
            a.names, b.names
        )));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::param("both ensembles need at least one realization"));
    }
    Ok(())
}

/// `2 mean|a - b| - mean|a - a'| - mean|b - b'|` over all ordered pairs,
/// diagonal included, from a pooled distance matrix and a group labelling.
fn energy_from(dist: &[f64], total: usize, in_a: &[bool], na: usize) -> f64 {
    let nb = total - na;
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for i in 0..total {
        let row = &dist[i * total..(i + 1) * total];
        for j in (i + 1)..total {
            match (in_a[i], in_a[j]) {
                (true, true) => aa += row[j],
                (false, false) => bb += row[j],
                _ => ab += row[j],
            }
        }
    }
    let (na, nb) = (na as f64, nb as f64);
    2.0 * ab / (na * nb) - 2.0 * aa / (na * na) - 2.0 * bb / (nb * nb)
}

/// Permutation energy-distance test of equal distributions. Each column is
/// centred and scaled by pooled median and interquartile range (standard
/// deviation when the range is zero); constant columns are dropped.
pub fn energy_distance_test(a: &ModelEnsemble, b: &ModelEnsemble, n_perm: usize, seed: u64) -> Result<TestResult> {
    same_columns(a, b)?;
    if n_perm == 0 {
        return Err(Error::param("at least one permutation is needed"));
    }
    let (na, nb) = (a.len(), b.len());
    let total = na + nb;
    let pooled: Vec<&Vec<f64>> = a.rows.iter().chain(&b.rows).collect();
    let mut diagnostics = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for (k, name) in a.names.iter().enumerate() {
        let x: Vec<f64> = pooled.iter().map(|r| r[k]).collect();
        let mut sorted = x.clone();
        sorted.sort_by(f64::total_cmp);
        let location = quantile_sorted(&sorted, 0.5);
        let mut scale = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
        if !(scale > 0.0) {
            let mean = x.iter().sum::<f64>() / total as f64;
            let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / total as f64;
            scale = var.sqrt();
        }
        let dropped = !(scale > 0.0);
        let z: Vec<f64> = x.iter().map(|v| if dropped { 0.0 } else { (v - location) / scale }).collect();
        let mean_a = z[..na].iter().sum::<f64>() / na as f64;
        let mean_b = z[na..].iter().sum::<f64>() / nb as f64;
        let in_a: Vec<bool> = (0..total).map(|i| i < na).collect();
        let d1: Vec<f64> = (0..total * total).map(|m| (z[m / total] - z[m % total]).abs()).collect();
        diagnostics.push(ColumnDiagnostic {
            name: name.clone(),
            location,
            scale,
            mean_shift: mean_a - mean_b,
            energy: energy_from(&d1, total, &in_a, na),
            dropped,
        });
        if !dropped {
            cols.push(z);
        }
    }
    if cols.len() < 2 {
        return Err(Error::Refused(format!(
            "{} non-constant descriptor column(s); at least 2 are needed",
            cols.len()
        )));
    }
    let mut dist = vec![0.0; total * total];
    for i in 0..total {
        for j in (i + 1)..total {
            let d = cols.iter().map(|c| (c[i] - c[j]).powi(2)).sum::<f64>().sqrt();
            dist[i * total + j] = d;
            dist[j * total + i] = d;
        }
    }
    let labels: Vec<bool> = (0..total).map(|i| i < na).collect();
    let observed = energy_from(&dist, total, &labels, na);
    let exceed = (0..n_perm)
        .into_par_iter()
        .filter(|&k| {
            let mut perm = labels.clone();
            perm.shuffle(&mut rng_from_seed(derive_seed(seed, k as u64)));
            energy_from(&dist, total, &perm, na) >= observed - 1e-12 * (1.0 + observed.abs())
        })
        .count();
    Ok(TestResult {
        statistic: observed,
        permutations: n_perm,
        p_value: (exceed + 1) as f64 / (n_perm + 1) as f64,
        diagnostics,
    })
}

/// `P(D >= d)` for the two-sample Kolmogorov-Smirnov statistic of samples of
/// sizes `m` and `n` without ties, by lattice path counting.
pub fn ks_exact_p(d: f64, m: usize, n: usize) -> f64 {
    if d <= 0.0 {
        return 1.0;
    }
    let (m, n) = if m > n { (n, m) } else { (m, n) };
    let (md, nd) = (m as f64, n as f64);
    let q = (0.5 + (d * md * nd - 1e-7).floor()) / (md * nd);
    let mut u: Vec<f64> = (0..=n).map(|j| if j as f64 / nd > q { 0.0 } else { 1.0 }).collect();
    for i in 1..=m {
        let w = i as f64 / (i + n) as f64;
        u[0] = if i as f64 / md > q { 0.0 } else { w * u[0] };
        for j in 1..=n {
            u[j] = if (i as f64 / md - j as f64 / nd).abs() > q {
                0.0
            } else {
                w * u[j] + u[j - 1]
            };
        }
    }
    (1.0 - u[n]).clamp(0.0, 1.0)
}

/// Limiting Kolmogorov tail `P(K >= z)`.
pub fn kolmogorov_tail(z: f64) -> f64 {
    if z < 0.27 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let t = (-2.0 * (k * k) as f64 * z * z).exp();
        s += if k % 2 == 1 { t } else { -t };
        if t < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Largest ECDF gap between two samples.
pub fn ks_statistic(x: &[f64], y: &[f64]) -> f64 {
    let mut x = x.to_vec();
    let mut y = y.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / x.len() as f64 - j as f64 / y.len() as f64).abs());
    }
    d
}

/// Two-sample KS p-value: exact when `m n <= 10^6`, asymptotic otherwise.
pub fn ks_p_value(d: f64, m: usize, n: usize) -> f64 {
    if m * n <= 1_000_000 {
        ks_exact_p(d, m, n)
    } else {
        let (m, n) = (m as f64, n as f64);
        kolmogorov_tail(d * (m * n / (m + n)).sqrt())
    }
}

/// Holm step-down adjusted p-values, in input order.
pub fn holm_adjust(p: &[f64]) -> Vec<f64> {
    let k = p.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    let mut adj = vec![0.0; k];
    let mut running = 0.0f64;
    for (rank, &i) in order.iter().enumerate() {
        running = running.max(((k - rank) as f64 * p[i]).min(1.0));
        adj[i] = running;
    }
    adj
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsDecision {
    pub name: String,
    pub statistic: f64,
    pub p_value: f64,
    pub adjusted_p: f64,
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsBattery {
    pub alpha: f64,
    pub decisions: Vec<KsDecision>,
}

impl KsBattery {
    pub fn any_rejected(&self) -> bool {
        self.decisions.iter().any(|d| d.rejected)
    }

    pub fn decision(&self, name: &str) -> Option<&KsDecision> {
        self.decisions.iter().find(|d| d.name == name)
    }
}

/// Per-column two-sample KS tests at family-wise level `alpha` under Holm's
/// procedure.
pub fn ks_battery(a: &ModelEnsemble, b: &ModelEnsemble, alpha: f64) -> Result<KsBattery> {
    same_columns(a, b)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha must lie in (0, 1)"));
    }
    let stats: Vec<(f64, f64)> = (0..a.names.len())
        .map(|k| {
            let d = ks_statistic(&a.column(k), &b.column(k));
            (d, ks_p_value(d, a.len(), b.len()))
        })
        .collect();
    let p: Vec<f64> = stats.iter().map(|s| s.1).collect();
    let adj = holm_adjust(&p);
    Ok(KsBattery {
        alpha,
        decisions: a
            .names
            .iter()
            .zip(stats)
            .zip(adj)
            .map(|((name, (statistic, p_value)), adjusted_p)| KsDecision {
                name: name.clone(),
                statistic,
                p_value,
                adjusted_p,
                rejected: adjusted_p <= alpha,
            })
            .collect(),
    })
}

/// Page's statistic `L = sum_j j R_j`, where `R_j` is the sum over blocks
/// of the within-block rank of condition `j` (ties get mean ranks).
pub fn page_statistic(blocks: &[Vec<f64>]) -> f64 {
    blocks
        .iter()
        .map(|b| {
            let ranks = mid_ranks(b);
            ranks.iter().enumerate().map(|(j, r)| (j + 1) as f64 * r).sum::<f64>()
        })
        .sum()
}

fn mid_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// One-sided test for values increasing along ordered conditions: each
/// block (e.g. one realization followed through successive treatments)
/// holds one value per condition in order. The p-value comes from
/// permuting values within blocks, add-one convention.
pub fn page_trend_test(blocks: &[Vec<f64>], n_perm: usize, seed: u64) -> Result<TestResult> {
    if blocks.is_empty() || n_perm == 0 {
        return Err(Error::param("need at least one block and one permutation"));
    }
    let k = blocks[0].len();
    if k < 2 || blocks.iter().any(|b| b.len() != k || b.iter().any(|v| !v.is_finite())) {
        return Err(Error::param("blocks need equal lengths of at least two finite values"));
    }
    let observed = page_statistic(blocks);
    let exceed = (0..n_perm)
        .into_par_iter()
        .filter(|&p| {
            let mut rng = rng_from_seed(derive_seed(seed, p as u64));
            let shuffled: Vec<Vec<f64>> = blocks
                .iter()
                .map(|b| {
                    let mut b = b.clone();
                    b.shuffle(&mut rng);
                    b
                })
                .collect();
            page_statistic(&shuffled) >= observed - 1e-9
        })
        .count();
    Ok(TestResult {
        statistic: observed,
        permutations: n_perm,
        p_value: (exceed + 1) as f64 / (n_perm + 1) as f64,
        diagnostics: Vec::new(),
    })
}
