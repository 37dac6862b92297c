//! Point-process statistics of sphere centers: K, pair correlation,
//! nearest-neighbour and empty-space functions, quadrat counts.

use serde::{Deserialize, Serialize};

use super::{check_grid, PointPattern, RadialFunction, SampleDesign};
use crate::error::{Error, Result};
use crate::geometry::{unit_ball_volume, Vec3};

/// Edge correction for estimators on bounded windows. Toroidal windows
/// ignore it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeCorrection {
    /// Only reference points farther than `r` from the window edge.
    #[default]
    MinusSampling,
    /// Pairs weighted by `|W| / |W ∩ W_{x_j - x_i}|`.
    Translation,
}

impl EdgeCorrection {
    fn label(self, toroidal: bool) -> &'static str {
        match (toroidal, self) {
            (true, _) => "none (toroidal)",
            (false, EdgeCorrection::MinusSampling) => "minus-sampling",
            (false, EdgeCorrection::Translation) => "translation",
        }
    }
}

/// For every point, the displacements to all other points within `r_max`,
/// sorted by distance.
fn neighbor_lists(pattern: &PointPattern, r_max: f64) -> Vec<Vec<(f64, Vec3)>> {
    let grid = pattern.grid(r_max.max(1e-9));
    pattern
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut out = Vec::new();
            grid.for_each_within(p, r_max, |j, d| {
                if j != i {
                    out.push((d.norm(), d));
                }
            });
            out.sort_by(|a, b| a.0.total_cmp(&b.0));
            out
        })
        .collect()
}

fn check_pairs(pattern: &PointPattern, r_max: f64) -> Result<()> {
    if pattern.len() < 2 {
        return Err(Error::TooFewSpheres {
            needed: 2,
            have: pattern.len(),
        });
    }
    let max = pattern.window.max_lag();
    if r_max >= max {
        return Err(Error::Window(format!("distance {r_max} is not below half the window ({max})")));
    }
    Ok(())
}

/// Estimate of the reduced second moment function at each radius.
///
/// Intensity squared is estimated by `n (n - 1) / |W|²`, which makes all
/// three variants unbiased for the Poisson process.
pub fn k_function(pattern: &PointPattern, r_grid: &[f64], correction: EdgeCorrection) -> Result<RadialFunction> {
    check_grid(r_grid)?;
    let r_max = *r_grid.last().unwrap();
    check_pairs(pattern, r_max)?;
    let lists = neighbor_lists(pattern, r_max);
    let n = pattern.len() as f64;
    let vol = pattern.window.volume();
    let toroidal = pattern.window.toroidal;
    let mut rf = RadialFunction::new("K", correction.label(toroidal));
    rf.meta.insert("intensity".into(), pattern.intensity().to_string());
    if !toroidal && correction == EdgeCorrection::MinusSampling {
        let border: Vec<f64> = pattern.points.iter().map(|p| pattern.window.border_distance(p)).collect();
        for &r in r_grid {
            let mut inner = 0usize;
            let mut pairs = 0usize;
            for (i, list) in lists.iter().enumerate() {
                if border[i] >= r {
                    inner += 1;
                    pairs += list.partition_point(|e| e.0 <= r);
                }
            }
            let value = if inner > 0 {
                vol / (n - 1.0) * pairs as f64 / inner as f64
            } else {
                f64::NAN
            };
            rf.push(r, r, value, inner as u64);
        }
        return Ok(rf);
    }
    let mut weighted: Vec<(f64, f64)> = Vec::new();
    for list in &lists {
        for &(d, v) in list {
            let w = if toroidal { 1.0 } else { vol / pattern.window.translated_overlap(&v) };
            weighted.push((d, w));
        }
    }
    weighted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cum = Vec::with_capacity(weighted.len() + 1);
    cum.push(0.0);
    for &(_, w) in &weighted {
        cum.push(cum.last().unwrap() + w);
    }
    for &r in r_grid {
        let k = weighted.partition_point(|e| e.0 <= r);
        rf.push(r, r, vol / (n * (n - 1.0)) * cum[k], k as u64);
    }
    Ok(rf)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCorrelation {
    pub g: RadialFunction,
    /// `λ d b_d r^(d-1) g(r)` at bin midpoints.
    pub rdf: RadialFunction,
}

/// Shell-count estimate of the pair correlation function on bins of width
/// `shell_width` covering `[0, r_max]`.
pub fn pair_correlation(
    pattern: &PointPattern,
    shell_width: f64,
    r_max: f64,
    correction: EdgeCorrection,
) -> Result<PairCorrelation> {
    if !(shell_width > 0.0 && shell_width.is_finite()) {
        return Err(Error::param("shell width must be positive"));
    }
    if !(r_max > 0.0) {
        return Err(Error::param("maximum distance must be positive"));
    }
    let bins = ((r_max / shell_width) - 1e-9).ceil().max(1.0) as usize;
    let top = bins as f64 * shell_width;
    check_pairs(pattern, top)?;
    let dim = pattern.dim;
    let bd = unit_ball_volume(dim);
    let lists = neighbor_lists(pattern, top);
    let n = pattern.len() as f64;
    let vol = pattern.window.volume();
    let toroidal = pattern.window.toroidal;
    let lambda = pattern.intensity();
    let edges: Vec<f64> = (0..=bins).map(|k| k as f64 * shell_width).collect();
    let shell = |k: usize| bd * (edges[k + 1].powi(dim as i32) - edges[k].powi(dim as i32));
    let bin_of = |d: f64| ((d / shell_width).floor() as usize).min(bins - 1);
    let label = correction.label(toroidal);
    let mut g = RadialFunction::new("g", label);
    let mut rdf = RadialFunction::new("RDF", label);
    g.meta.insert("intensity".into(), lambda.to_string());
    rdf.meta.insert("intensity".into(), lambda.to_string());
    let mut values = vec![0.0; bins];
    let mut counts = vec![0u64; bins];
    if !toroidal && correction == EdgeCorrection::MinusSampling {
        let border: Vec<f64> = pattern.points.iter().map(|p| pattern.window.border_distance(p)).collect();
        let mut sums = vec![0usize; bins];
        let mut inner = vec![0usize; bins];
        for (i, list) in lists.iter().enumerate() {
            let mut local = vec![0usize; bins];
            for &(d, _) in list {
                if d < top {
                    local[bin_of(d)] += 1;
                }
            }
            for k in 0..bins {
                if border[i] >= edges[k + 1] {
                    inner[k] += 1;
                    sums[k] += local[k];
                }
            }
        }
        for k in 0..bins {
            counts[k] = inner[k] as u64;
            values[k] = if inner[k] > 0 {
                vol / (n - 1.0) * sums[k] as f64 / (inner[k] as f64 * shell(k))
            } else {
                f64::NAN
            };
        }
    } else {
        let mut sums = vec![0.0; bins];
        for list in &lists {
            for &(d, v) in list {
                if d < top {
                    let w = if toroidal { 1.0 } else { vol / pattern.window.translated_overlap(&v) };
                    let k = bin_of(d);
                    sums[k] += w;
                    counts[k] += 1;
                }
            }
        }
        for k in 0..bins {
            values[k] = vol / (n * (n - 1.0)) * sums[k] / shell(k);
        }
    }
    for k in 0..bins {
        let mid = 0.5 * (edges[k] + edges[k + 1]);
        g.push(edges[k], edges[k + 1], values[k], counts[k]);
        let scale = lambda * dim as f64 * bd * mid.powi(dim as i32 - 1);
        rdf.push(edges[k], edges[k + 1], scale * values[k], counts[k]);
    }
    Ok(PairCorrelation { g, rdf })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighbourFunctions {
    /// Nearest-neighbour distribution `D`.
    pub nearest: RadialFunction,
    /// Empty-space distribution `H_s`.
    pub empty_space: RadialFunction,
    /// `(1 - D) / (1 - H_s)`, defined where `H_s < 1`.
    pub j: RadialFunction,
    /// `k`-th nearest-neighbour distributions, `k = 1..=k_max`.
    pub kth: Vec<RadialFunction>,
}

/// Nearest-neighbour, empty-space and J functions. Off the torus, reference
/// points and sample locations are restricted to those at least the largest
/// radius from the window edge, so every estimate is a proper CDF in `r`.
pub fn neighbour_functions(
    pattern: &PointPattern,
    r_grid: &[f64],
    k_max: usize,
    design: &SampleDesign,
) -> Result<NeighbourFunctions> {
    check_grid(r_grid)?;
    if k_max == 0 {
        return Err(Error::param("k_max must be at least 1"));
    }
    if pattern.len() < k_max + 1 {
        return Err(Error::TooFewSpheres {
            needed: k_max + 1,
            have: pattern.len(),
        });
    }
    let r_max = *r_grid.last().unwrap();
    let window = &pattern.window;
    if window.toroidal && r_max >= window.max_lag() {
        return Err(Error::Window(format!("distance {r_max} is not below half the torus")));
    }
    let lists = neighbor_lists(pattern, r_max);
    let refs: Vec<usize> = (0..pattern.len())
        .filter(|&i| window.border_distance(&pattern.points[i]) >= r_max)
        .collect();
    if refs.is_empty() {
        return Err(Error::Window(format!("no point lies {r_max} inside the window")));
    }
    let grid = pattern.grid(r_max.max(1e-9));
    let empty: Vec<f64> = design
        .points(window)?
        .into_iter()
        .filter(|p| window.border_distance(p) >= r_max)
        .map(|p| {
            let mut best = f64::INFINITY;
            grid.for_each_within(&p, r_max, |_, d| best = best.min(d.norm()));
            best
        })
        .collect();
    if empty.is_empty() {
        return Err(Error::Window(format!("no sample location lies {r_max} inside the window")));
    }
    let label = EdgeCorrection::MinusSampling.label(window.toroidal);
    let ecdf = |name: &str, mut d: Vec<f64>| {
        d.sort_by(f64::total_cmp);
        let mut rf = RadialFunction::new(name, label);
        for &r in r_grid {
            let below = d.partition_point(|&x| x <= r);
            rf.push(r, r, below as f64 / d.len() as f64, d.len() as u64);
        }
        rf
    };
    let kth: Vec<RadialFunction> = (1..=k_max)
        .map(|k| {
            let d = refs
                .iter()
                .map(|&i| lists[i].get(k - 1).map_or(f64::INFINITY, |e| e.0))
                .collect();
            ecdf(&format!("D{k}"), d)
        })
        .collect();
    let nearest = RadialFunction {
        estimator: "D".into(),
        ..kth[0].clone()
    };
    let empty_space = ecdf("Hs", empty);
    let mut j = RadialFunction::new("J", label);
    for k in 0..r_grid.len() {
        let (dv, hv) = (nearest.values[k], empty_space.values[k]);
        if hv < 1.0 {
            j.push(r_grid[k], r_grid[k], (1.0 - dv) / (1.0 - hv), nearest.counts[k]);
        } else {
            j.push(r_grid[k], r_grid[k], f64::NAN, 0);
        }
    }
    Ok(NeighbourFunctions {
        nearest,
        empty_space,
        j,
        kth,
    })
}

/// Quadrat counts over a regular tiling of the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityDisorder {
    pub counts: Vec<usize>,
    pub mean: f64,
    pub variance: f64,
    /// Variance-to-mean ratio: 1 for Poisson, below 1 for regular patterns.
    pub ratio: f64,
}

pub fn local_intensity_disorder(pattern: &PointPattern, cell_size: f64) -> Result<IntensityDisorder> {
    if !(cell_size > 0.0 && cell_size.is_finite()) {
        return Err(Error::param("cell size must be positive"));
    }
    let w = &pattern.window;
    let mut m = [1usize; 3];
    for k in 0..pattern.dim {
        m[k] = (w.extent(k) / cell_size).floor() as usize;
    }
    let cells: usize = m[..pattern.dim].iter().product();
    if cells < 10 {
        return Err(Error::Window(format!("only {cells} quadrats fit in the window; need 10")));
    }
    let mut counts = vec![0usize; cells];
    for p in &pattern.points {
        let mut idx = 0usize;
        let mut stride = 1usize;
        for k in 0..pattern.dim {
            let width = w.extent(k) / m[k] as f64;
            let c = (((p[k] - w.lo[k]) / width).floor().max(0.0) as usize).min(m[k] - 1);
            idx += c * stride;
            stride *= m[k];
        }
        counts[idx] += 1;
    }
    let n = cells as f64;
    let mean = counts.iter().sum::<usize>() as f64 / n;
    let variance = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let ratio = if mean > 0.0 { variance / mean } else { f64::NAN };
    Ok(IntensityDisorder {
        counts,
        mean,
        variance,
        ratio,
    })
}
