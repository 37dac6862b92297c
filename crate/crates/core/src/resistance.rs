//! Contact networks as resistor networks: bulk resistance, potentials, edge
//! currents, conductance under sphere expansion and an anisotropy test.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::contacts::ContactNetwork;
use crate::error::{Error, Result};
use crate::geometry::{Configuration, Vec3};
use crate::rng::{derive_seed, rng_from_seed};

/// Two disjoint, non-empty sphere sets held at potentials 1 (source) and 0 (sink).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Electrodes {
    pub source: Vec<usize>,
    pub sink: Vec<usize>,
}

impl Electrodes {
    /// Spheres whose coordinate along `axis` is at or above the upper
    /// `quantile` (source) and at or below the lower one (sink).
    pub fn axis_quantile(config: &Configuration, axis: usize, quantile: f64) -> Result<Self> {
        if axis >= config.dim {
            return Err(Error::param(format!("axis {axis} outside dimension {}", config.dim)));
        }
        if !(quantile > 0.0 && quantile < 0.5) {
            return Err(Error::param("electrode quantile must lie in (0, 0.5)"));
        }
        let n = config.len();
        if n < 2 {
            return Err(Error::TooFewSpheres { needed: 2, have: n });
        }
        let mut h: Vec<f64> = config.spheres.iter().map(|s| s.center[axis]).collect();
        h.sort_by(f64::total_cmp);
        let k = ((quantile * n as f64).ceil() as usize).clamp(1, n - 1);
        let lo = h[k - 1];
        let hi = h[n - k];
        let sink: Vec<usize> = (0..n).filter(|&i| config.spheres[i].center[axis] <= lo).collect();
        let source: Vec<usize> = (0..n)
            .filter(|&i| config.spheres[i].center[axis] >= hi && config.spheres[i].center[axis] > lo)
            .collect();
        Ok(Electrodes { source, sink })
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.source.is_empty() || self.sink.is_empty() {
            return Err(Error::param("electrode sets must be non-empty"));
        }
        if self.source.iter().chain(&self.sink).any(|&i| i >= n) {
            return Err(Error::param("electrode sphere out of range"));
        }
        if self.source.iter().any(|i| self.sink.contains(i)) {
            return Err(Error::param("electrode sets must be disjoint"));
        }
        Ok(())
    }

    pub fn swapped(&self) -> Self {
        Electrodes {
            source: self.sink.clone(),
            sink: self.source.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResistorNetwork {
    pub n: usize,
    /// `(i, j, conductance)` with positive conductance.
    pub edges: Vec<(usize, usize, f64)>,
    pub electrodes: Electrodes,
}

impl ResistorNetwork {
    pub fn new(n: usize, edges: Vec<(usize, usize, f64)>, electrodes: Electrodes) -> Result<Self> {
        electrodes.validate(n)?;
        for &(i, j, c) in &edges {
            if i >= n || j >= n || i == j {
                return Err(Error::param(format!("bad resistor edge ({i}, {j})")));
            }
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::param(format!("bad conductance {c} on edge ({i}, {j})")));
            }
        }
        let edges = edges.into_iter().filter(|e| e.2 > 0.0).collect();
        Ok(ResistorNetwork { n, edges, electrodes })
    }

    fn neighbors(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j, c) in &self.edges {
            adj[i].push((j, c));
            adj[j].push((i, c));
        }
        adj
    }
}

/// Unit conductance on every contact edge.
pub fn build_resistor_network(net: &ContactNetwork, electrodes: Electrodes) -> Result<ResistorNetwork> {
    let edges = net.edges.iter().map(|e| (e.i, e.j, 1.0)).collect();
    ResistorNetwork::new(net.n, edges, electrodes)
}

/// As [`build_resistor_network`] but dropping edges that wrap around a
/// periodic boundary along `axis`, so the two electrode slabs are not shorted
/// through the periodic image.
pub fn build_axis_network(
    config: &Configuration,
    net: &ContactNetwork,
    axis: usize,
    electrodes: Electrodes,
) -> Result<ResistorNetwork> {
    let period = config.boundary.period(axis, config.dim);
    let edges = net
        .edges
        .iter()
        .filter(|e| {
            period.is_none_or(|l| {
                (config.spheres[e.j].center[axis] - config.spheres[e.i].center[axis]).abs() <= l / 2.0
            })
        })
        .map(|e| (e.i, e.j, 1.0))
        .collect();
    ResistorNetwork::new(net.n, edges, electrodes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BulkResistance {
    /// Infinite when no path joins the electrodes.
    pub resistance: f64,
    /// Node potentials; NaN for nodes in components without an electrode.
    pub potential: Vec<f64>,
    /// `(i, j, current from i to j)` per edge.
    pub currents: Vec<(usize, usize, f64)>,
    /// Largest Kirchhoff residual over free nodes.
    pub residual: f64,
    pub iterations: usize,
}

impl BulkResistance {
    pub fn connected(&self) -> bool {
        self.resistance.is_finite()
    }

    /// Lines `i j current`.
    pub fn currents_tsv(&self) -> String {
        let mut out = String::new();
        for &(i, j, c) in &self.currents {
            writeln!(out, "{i} {j} {c:.12e}").unwrap();
        }
        out
    }

    /// Lines `i potential`.
    pub fn potential_tsv(&self) -> String {
        let mut out = String::new();
        for (i, v) in self.potential.iter().enumerate() {
            writeln!(out, "{i} {v:.12e}").unwrap();
        }
        out
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    Source,
    Sink,
    Free(usize),
    Floating,
}

/// Unit potential difference between the electrodes; Jacobi-preconditioned
/// conjugate gradients on the reduced graph Laplacian.
pub fn solve_bulk_resistance(rnet: &ResistorNetwork) -> Result<BulkResistance> {
    let n = rnet.n;
    let adj = rnet.neighbors();
    let mut role = vec![Role::Floating; n];
    for &s in &rnet.electrodes.source {
        role[s] = Role::Source;
    }
    for &s in &rnet.electrodes.sink {
        role[s] = Role::Sink;
    }
    // Free nodes: those reachable from an electrode without crossing one.
    let mut free = Vec::new();
    let mut stack: Vec<usize> = rnet.electrodes.source.iter().chain(&rnet.electrodes.sink).copied().collect();
    while let Some(u) = stack.pop() {
        for &(w, _) in &adj[u] {
            if role[w] == Role::Floating {
                role[w] = Role::Free(free.len());
                free.push(w);
                stack.push(w);
            }
        }
    }
    let m = free.len();
    let mut diag = vec![0.0; m];
    let mut b = vec![0.0; m];
    for (k, &u) in free.iter().enumerate() {
        for &(w, c) in &adj[u] {
            diag[k] += c;
            if role[w] == Role::Source {
                b[k] += c;
            }
        }
    }
    let apply = |x: &[f64], y: &mut [f64]| {
        for (k, &u) in free.iter().enumerate() {
            let mut s = diag[k] * x[k];
            for &(w, c) in &adj[u] {
                if let Role::Free(q) = role[w] {
                    s -= c * x[q];
                }
            }
            y[k] = s;
        }
    };
    // Initial guess 0.5 everywhere; CG on L x = b.
    let mut x = vec![0.5; m];
    let mut r = vec![0.0; m];
    apply(&x, &mut r);
    for k in 0..m {
        r[k] = b[k] - r[k];
    }
    let mut z: Vec<f64> = (0..m).map(|k| r[k] / diag[k]).collect();
    let mut p = z.clone();
    let mut rz: f64 = (0..m).map(|k| r[k] * z[k]).sum();
    let mut ap = vec![0.0; m];
    let scale = b.iter().copied().fold(1.0, f64::max);
    let max_iter = 20 * m + 1000;
    let mut iterations = 0;
    while iterations < max_iter {
        let rmax = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if rmax <= 1e-14 * scale {
            break;
        }
        apply(&p, &mut ap);
        let pap: f64 = (0..m).map(|k| p[k] * ap[k]).sum();
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for k in 0..m {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        for k in 0..m {
            z[k] = r[k] / diag[k];
        }
        let rz_new: f64 = (0..m).map(|k| r[k] * z[k]).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..m {
            p[k] = z[k] + beta * p[k];
        }
        iterations += 1;
    }
    let potential: Vec<f64> = (0..n)
        .map(|i| match role[i] {
            Role::Source => 1.0,
            Role::Sink => 0.0,
            Role::Free(k) => x[k],
            Role::Floating => f64::NAN,
        })
        .collect();
    let mut residual: f64 = 0.0;
    for &u in &free {
        let mut s = 0.0;
        for &(w, c) in &adj[u] {
            s += c * (potential[w] - potential[u]);
        }
        residual = residual.max(s.abs());
    }
    if residual > 1e-10 {
        return Err(Error::Solver(format!(
            "conjugate gradients stalled at residual {residual:e} after {iterations} iterations"
        )));
    }
    let currents: Vec<(usize, usize, f64)> = rnet
        .edges
        .iter()
        .map(|&(i, j, c)| {
            let (vi, vj) = (potential[i], potential[j]);
            let cur = if vi.is_nan() || vj.is_nan() { 0.0 } else { c * (vi - vj) };
            (i, j, cur)
        })
        .collect();
    let mut injected = 0.0;
    for &s in &rnet.electrodes.source {
        for &(w, c) in &adj[s] {
            if role[w] != Role::Source {
                injected += c * (1.0 - potential[w]);
            }
        }
    }
    let resistance = if injected > 0.0 { 1.0 / injected } else { f64::INFINITY };
    Ok(BulkResistance {
        resistance,
        potential,
        currents,
        residual,
        iterations,
    })
}

/// Random-walk estimate of the bulk resistance: the potential of a node is
/// the probability that a walk from it, stepping along edges in proportion
/// to conductance, reaches the source before the sink.
pub fn random_walk_resistance(rnet: &ResistorNetwork, walks_per_node: usize, seed: u64) -> f64 {
    let adj = rnet.neighbors();
    let mut is_source = vec![false; rnet.n];
    let mut is_sink = vec![false; rnet.n];
    for &s in &rnet.electrodes.source {
        is_source[s] = true;
    }
    for &s in &rnet.electrodes.sink {
        is_sink[s] = true;
    }
    let mut hit = vec![f64::NAN; rnet.n];
    let mut injected = 0.0;
    for &s in &rnet.electrodes.source {
        for &(w, c) in &adj[s] {
            if is_source[w] {
                continue;
            }
            if hit[w].is_nan() {
                let mut rng = rng_from_seed(derive_seed(seed, w as u64));
                let mut wins = 0usize;
                for _ in 0..walks_per_node {
                    let mut u = w;
                    let mut steps = 0usize;
                    while !is_source[u] && !is_sink[u] && steps < 1_000_000 {
                        let total: f64 = adj[u].iter().map(|e| e.1).sum();
                        let mut t = rng.random::<f64>() * total;
                        let mut next = adj[u][adj[u].len() - 1].0;
                        for &(v, c) in &adj[u] {
                            if t < c {
                                next = v;
                                break;
                            }
                            t -= c;
                        }
                        u = next;
                        steps += 1;
                    }
                    wins += is_source[u] as usize;
                }
                hit[w] = wins as f64 / walks_per_node as f64;
            }
            injected += c * (1.0 - hit[w]);
        }
    }
    if injected > 0.0 {
        1.0 / injected
    } else {
        f64::INFINITY
    }
}

/// Radius of the circle in which spheres of radii `a` and `b` with centers
/// `d` apart intersect; zero when they do not overlap.
pub fn overlap_circle_radius(a: f64, b: f64, d: f64) -> f64 {
    if d >= a + b || d <= (a - b).abs() {
        return 0.0;
    }
    let x = (d * d + a * a - b * b) / (2.0 * d);
    (a * a - x * x).max(0.0).sqrt()
}

/// Network conductance (inverse bulk resistance) after inflating every
/// radius by each factor in `factors`; edge conductance is the radius of the
/// overlap circle. Edges wrapping a periodic boundary along `axis` are
/// dropped when `axis` is given.
pub fn conductance_vs_expansion(
    config: &Configuration,
    factors: &[f64],
    electrodes: &Electrodes,
    axis: Option<usize>,
) -> Result<Vec<(f64, f64)>> {
    electrodes.validate(config.len())?;
    if let Some(&f) = factors.iter().find(|&&f| !(f >= 1.0 && f.is_finite())) {
        return Err(Error::param(format!("expansion factor {f} must be >= 1")));
    }
    let fmax = factors.iter().copied().fold(1.0, f64::max);
    let reach = 2.0 * config.max_radius() * fmax;
    let grid = config.grid(reach);
    let period = axis.and_then(|a| config.boundary.period(a, config.dim));
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..config.len() {
        let ci = config.spheres[i].center;
        grid.for_each_within(&ci, reach, |j, d: Vec3| {
            if j <= i {
                return;
            }
            if let (Some(a), Some(l)) = (axis, period) {
                if (config.spheres[j].center[a] - ci[a]).abs() > l / 2.0 {
                    return;
                }
            }
            pairs.push((i, j, d.norm()));
        });
    }
    let mut out = Vec::with_capacity(factors.len());
    for &f in factors {
        let edges: Vec<(usize, usize, f64)> = pairs
            .iter()
            .map(|&(i, j, d)| {
                let c = overlap_circle_radius(f * config.spheres[i].radius, f * config.spheres[j].radius, d);
                (i, j, c)
            })
            .filter(|e| e.2 > 0.0)
            .collect();
        let rnet = ResistorNetwork::new(config.len(), edges, electrodes.clone())?;
        let sol = solve_bulk_resistance(&rnet)?;
        out.push((f, if sol.connected() { 1.0 / sol.resistance } else { 0.0 }));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnisotropyResult {
    /// Per realization, conductance along each tested axis.
    pub conductance: Vec<Vec<f64>>,
    pub statistic: f64,
    pub p_value: f64,
    pub n_perm: usize,
}

fn axis_spread(values: &[Vec<f64>]) -> f64 {
    let a = values[0].len();
    let means: Vec<f64> = (0..a)
        .map(|k| values.iter().map(|row| row[k]).sum::<f64>() / values.len() as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / a as f64;
    means.iter().map(|m| (m - grand).powi(2)).sum()
}

/// Permutation test for a direction effect: per realization, axis labels
/// are exchangeable under isotropy. The statistic is the spread of the
/// per-axis mean values; the p-value uses the add-one convention.
pub fn anisotropy_permutation_test(values: &[Vec<f64>], n_perm: usize, seed: u64) -> Result<AnisotropyResult> {
    if values.is_empty() {
        return Err(Error::param("no realizations"));
    }
    let a = values[0].len();
    if a < 2 {
        return Err(Error::param("anisotropy needs at least two axes"));
    }
    if values.iter().any(|row| row.len() != a || row.iter().any(|v| !v.is_finite())) {
        return Err(Error::param("ragged or non-finite axis values"));
    }
    let observed = axis_spread(values);
    let tol = 1e-12 * observed.abs().max(1e-300);
    let mut exceed = 0usize;
    let mut work = values.to_vec();
    for p in 0..n_perm {
        let mut rng = rng_from_seed(derive_seed(seed, p as u64));
        for (row, orig) in work.iter_mut().zip(values) {
            row.copy_from_slice(orig);
            row.shuffle(&mut rng);
        }
        if axis_spread(&work) >= observed - tol {
            exceed += 1;
        }
    }
    Ok(AnisotropyResult {
        conductance: values.to_vec(),
        statistic: observed,
        p_value: (1 + exceed) as f64 / (n_perm + 1) as f64,
        n_perm,
    })
}

/// Conductance along each of `axes` for every configuration (electrodes at
/// the 5%/95% coordinate quantiles), followed by the permutation test.
pub fn anisotropy_test(
    configs: &[(Configuration, ContactNetwork)],
    axes: &[usize],
    n_perm: usize,
    seed: u64,
) -> Result<AnisotropyResult> {
    if axes.len() < 2 {
        return Err(Error::param("anisotropy needs at least two axes"));
    }
    let mut values = Vec::with_capacity(configs.len());
    for (config, net) in configs {
        let mut row = Vec::with_capacity(axes.len());
        for &axis in axes {
            let el = Electrodes::axis_quantile(config, axis, 0.05)?;
            let sol = solve_bulk_resistance(&build_axis_network(config, net, axis, el)?)?;
            row.push(if sol.connected() { 1.0 / sol.resistance } else { 0.0 });
        }
        values.push(row);
    }
    anisotropy_permutation_test(&values, n_perm, seed)
}
