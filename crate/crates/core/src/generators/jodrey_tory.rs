//! Jodrey–Tory rearrangement in a periodic box.
//!
//! Every sphere carries a nominal (outer) diameter, first set so that the
//! nominal spheres fill `start_fraction` of the box. The closest pair of
//! centers is pushed apart symmetrically along its line of centers until it
//! is at the outer diameter, and the outer diameter shrinks a little with
//! every move. Once the closest pair sits within `stop_gap` of the outer
//! diameter, the outer diameter grows and the next cycle starts. After the
//! cycles, a cleanup pass repeats the moves until no pair is closer than
//! the outer diameter, and the result is rescaled to unit diameter.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::rsa::{periodic_box_for, rsa_initialize, RsaParams};
use crate::geometry::{ball_volume, Boundary, Configuration, Provenance, Sphere, Vec3};
use crate::grid::NeighborGrid;
use crate::rng::{derive_named, derive_seed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JtParams {
    pub n: usize,
    #[serde(default = "three")]
    pub dim: usize,
    /// Relative shrink of the outer diameter per sweep of `n` moves.
    #[serde(default = "default_shrink")]
    pub shrink: f64,
    /// Relative growth of the outer diameter at the end of a cycle.
    #[serde(default = "default_grow")]
    pub grow: f64,
    #[serde(default = "default_cycles")]
    pub cycles: usize,
    /// Relative gap between the outer diameter and the closest pair that
    /// ends a cycle.
    #[serde(default = "default_stop_gap")]
    pub stop_gap: f64,
    /// Solid fraction of the sequential-inhibition start.
    #[serde(default = "default_init_fraction")]
    pub init_fraction: f64,
    /// Fraction of the box filled by the nominal spheres at the start.
    #[serde(default = "default_start_fraction")]
    pub start_fraction: f64,
}

fn three() -> usize {
    3
}
fn default_shrink() -> f64 {
    1e-4
}
fn default_grow() -> f64 {
    2e-4
}
fn default_cycles() -> usize {
    2000
}
fn default_stop_gap() -> f64 {
    1e-5
}
fn default_init_fraction() -> f64 {
    0.3
}
fn default_start_fraction() -> f64 {
    1.0
}

impl JtParams {
    pub fn new(n: usize, dim: usize) -> Self {
        JtParams {
            n,
            dim,
            shrink: default_shrink(),
            grow: default_grow(),
            cycles: default_cycles(),
            stop_gap: default_stop_gap(),
            init_fraction: default_init_fraction(),
            start_fraction: default_start_fraction(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::param("n must be at least 1"));
        }
        if self.dim != 2 && self.dim != 3 {
            return Err(Error::param(format!("dimension must be 2 or 3, got {}", self.dim)));
        }
        for (name, v) in [
            ("shrink", self.shrink),
            ("grow", self.grow),
            ("stop_gap", self.stop_gap),
            ("init_fraction", self.init_fraction),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::param(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if !(self.start_fraction > 0.0 && self.start_fraction <= 1.0) {
            return Err(Error::param(format!(
                "start_fraction must lie in (0, 1], got {}",
                self.start_fraction
            )));
        }
        Ok(())
    }
}

/// Moves allowed per sphere within one relaxation before giving up.
const MOVES_PER_SPHERE: usize = 200_000;

#[derive(Clone, Copy, PartialEq, PartialOrd)]
struct Key(f64);

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

struct State {
    dim: usize,
    boundary: Boundary,
    pos: Vec<Vec3>,
    grid: NeighborGrid,
    d_out: f64,
    /// Nearest neighbour within `reach` when last refreshed, with the
    /// neighbour's move count at that time.
    nn: Vec<(f64, usize, u32)>,
    stamp: Vec<u32>,
    /// Moves made by each sphere.
    version: Vec<u32>,
    heap: BinaryHeap<Reverse<(Key, usize, u32)>>,
    reach: f64,
    moves: u64,
}

impl State {
    fn new(config: &Configuration, d_out: f64) -> Self {
        let n = config.len();
        let reach = d_out * 1.01;
        let mut s = State {
            dim: config.dim,
            boundary: config.boundary,
            pos: config.centers(),
            grid: NeighborGrid::build(config, reach),
            d_out,
            nn: vec![(f64::INFINITY, usize::MAX, 0); n],
            stamp: vec![0; n],
            version: vec![0; n],
            heap: BinaryHeap::new(),
            reach,
            moves: 0,
        };
        s.refresh_all();
        s
    }

    fn refresh(&mut self, i: usize) {
        let mut best = (f64::INFINITY, usize::MAX);
        self.grid.for_each_within(&self.pos[i], self.reach, |j, d| {
            if j != i {
                let r = d.norm();
                if r < best.0 || (r == best.0 && j < best.1) {
                    best = (r, j);
                }
            }
        });
        let version = if best.1 == usize::MAX { 0 } else { self.version[best.1] };
        self.nn[i] = (best.0, best.1, version);
        self.stamp[i] = self.stamp[i].wrapping_add(1);
        if best.0.is_finite() {
            self.heap.push(Reverse((Key(best.0), i, self.stamp[i])));
        }
    }

    fn refresh_all(&mut self) {
        self.heap.clear();
        for i in 0..self.pos.len() {
            self.refresh(i);
        }
    }

    fn ensure_reach(&mut self) {
        if self.d_out > self.reach || self.d_out * 1.2 < self.reach {
            self.reach = self.d_out * 1.01;
            let mut grid = NeighborGrid::new(self.dim, self.boundary, self.reach);
            for (i, p) in self.pos.iter().enumerate() {
                grid.insert(i, *p);
            }
            self.grid = grid;
            self.refresh_all();
        }
    }

    /// The closest pair. Entries whose neighbour has moved since are
    /// refreshed when they reach the top; the closest pair is always a
    /// mutual nearest pair, so one of its two entries is current.
    fn closest(&mut self) -> Option<(f64, usize, usize)> {
        while let Some(&Reverse((Key(d), i, st))) = self.heap.peek() {
            if st != self.stamp[i] {
                self.heap.pop();
                continue;
            }
            let (_, j, v) = self.nn[i];
            if self.version[j] != v {
                self.heap.pop();
                self.refresh(i);
                continue;
            }
            return Some((d, i, j));
        }
        None
    }

    fn compact(&mut self) {
        if self.heap.len() > 8 * self.pos.len() + 64 {
            let stamp = &self.stamp;
            let kept: Vec<_> = self.heap.drain().filter(|Reverse((_, i, st))| *st == stamp[*i]).collect();
            self.heap = kept.into();
        }
    }

    fn min_distance(&mut self) -> f64 {
        self.refresh_all();
        self.nn.iter().map(|e| e.0).fold(f64::INFINITY, f64::min)
    }

    /// Push `i` and `j` apart to the outer diameter.
    fn separate(&mut self, i: usize, j: usize) {
        let (pi, pj) = (self.pos[i], self.pos[j]);
        let delta = self.boundary.delta(&pi, &pj, self.dim);
        let dist = delta.norm();
        let u = if dist > 1e-12 {
            delta / dist
        } else {
            fallback_direction(self.dim, i, j)
        };
        let shift = 0.5 * (self.d_out - dist);
        let ni = self.boundary.wrap(&(pi - shift * u), self.dim);
        let nj = self.boundary.wrap(&(pj + shift * u), self.dim);
        self.pos[i] = ni;
        self.pos[j] = nj;
        self.grid.update(i, ni);
        self.grid.update(j, nj);
        self.version[i] = self.version[i].wrapping_add(1);
        self.version[j] = self.version[j].wrapping_add(1);
        self.moves += 1;
        self.refresh(i);
        self.refresh(j);
        self.compact();
    }

    /// Move closest pairs apart until the closest pair is within
    /// `gap` (relative) of the outer diameter.
    fn relax(&mut self, gap: f64, shrink_per_move: f64, budget: usize) -> Result<usize> {
        let mut moves = 0;
        loop {
            let Some((d, i, j)) = self.closest() else { break };
            if d >= self.d_out * (1.0 - gap) {
                break;
            }
            if moves == budget {
                return Err(Error::NonConvergence(format!(
                    "{moves} moves without closing the gap: outer diameter {:.9}, closest pair {:.9}",
                    self.d_out, d
                )));
            }
            self.separate(i, j);
            self.d_out *= 1.0 - shrink_per_move;
            moves += 1;
            if moves % self.pos.len() == 0 {
                self.ensure_reach();
            }
        }
        Ok(moves)
    }
}

fn fallback_direction(dim: usize, i: usize, j: usize) -> Vec3 {
    let h = derive_seed(i as u64, j as u64);
    let mut v = Vec3::zeros();
    for k in 0..dim {
        let bits = (h >> (20 * k)) & 0xFFFFF;
        v[k] = bits as f64 / 0xFFFFF as f64 - 0.5;
    }
    v.try_normalize(1e-12).unwrap_or_else(|| {
        let mut e = Vec3::zeros();
        e[0] = 1.0;
        e
    })
}

/// Jodrey–Tory from a sequential-inhibition start drawn with `seed`.
pub fn jodrey_tory(params: &JtParams, seed: u64) -> Result<Configuration> {
    params.validate()?;
    let region = periodic_box_for(params.n, params.dim, params.init_fraction);
    let init = rsa_initialize(
        &RsaParams {
            n: params.n,
            dim: params.dim,
            region,
        },
        derive_named(seed, "jodrey-tory start"),
    )?;
    let mut out = jodrey_tory_from(&init, params)?;
    out.provenance.seed = seed;
    Ok(out)
}

/// Jodrey–Tory from the centers of a given periodic configuration.
/// Deterministic.
pub fn jodrey_tory_from(config: &Configuration, params: &JtParams) -> Result<Configuration> {
    params.validate()?;
    let Boundary::Periodic { extents } = config.boundary else {
        return Err(Error::param("Jodrey–Tory needs a periodic box"));
    };
    if config.is_empty() {
        return Err(Error::TooFewSpheres { needed: 1, have: 0 });
    }
    let dim = config.dim;
    let n = config.len();
    let volume = config.boundary.volume(dim).expect("periodic box has a volume");
    let half_box = (0..dim).map(|k| extents[k]).fold(f64::INFINITY, f64::min) * 0.5;
    let start = (params.start_fraction * volume / (n as f64 * ball_volume(dim, 0.5)))
        .powf(1.0 / dim as f64)
        .min(0.99 * half_box);
    let mut st = State::new(config, start);
    let per_move = params.shrink / n as f64;
    let budget = MOVES_PER_SPHERE * n;
    st.relax(params.stop_gap, per_move, budget).map_err(|e| match e {
        Error::NonConvergence(msg) => Error::NonConvergence(format!("first contraction: {msg}")),
        other => other,
    })?;
    for cycle in 0..params.cycles {
        st.d_out = (st.d_out * (1.0 + params.grow)).min(0.99 * half_box);
        st.ensure_reach();
        st.relax(params.stop_gap, per_move, budget).map_err(|e| match e {
            Error::NonConvergence(msg) => Error::NonConvergence(format!("cycle {cycle}: {msg}")),
            other => other,
        })?;
    }
    st.relax(0.0, per_move, budget).map_err(|e| match e {
        Error::NonConvergence(msg) => Error::NonConvergence(format!("cleanup: {msg}")),
        other => other,
    })?;
    // Diameter: the closest pair, no larger than the box allows.
    let mut diameter = st.min_distance();
    if !diameter.is_finite() {
        diameter = st.d_out;
    }
    let scale = 1.0 / diameter;
    let new_extents = extents * scale;
    let boundary = Boundary::Periodic { extents: new_extents };
    let spheres = st
        .pos
        .iter()
        .map(|p| Sphere::new(boundary.wrap(&(p * scale), dim), 0.5))
        .collect();
    let prov = Provenance::new("jodrey-tory", config.provenance.seed)
        .with("n", n)
        .with("dim", dim)
        .with("shrink", params.shrink)
        .with("grow", params.grow)
        .with("cycles", params.cycles)
        .with("stop_gap", params.stop_gap)
        .with("start_fraction", params.start_fraction)
        .with("moves", st.moves)
        .with("start", &config.provenance.algorithm);
    Configuration::new(dim, spheres, boundary, prov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::min_gap;

    fn fraction(c: &Configuration) -> f64 {
        c.solid_volume() / c.boundary.volume(c.dim).unwrap()
    }

    #[test]
    fn two_overlapping_spheres_separate_symmetrically() {
        let boundary = Boundary::Periodic { extents: Vec3::repeat(10.0) };
        let a = Vec3::new(4.8, 5.0, 5.1);
        let b = Vec3::new(5.2, 5.3, 5.1);
        let config = Configuration::new(
            3,
            vec![Sphere::new(a, 0.5), Sphere::new(b, 0.5)],
            boundary,
            Provenance::default(),
        )
        .unwrap();
        let mut p = JtParams::new(2, 3);
        p.cycles = 0;
        p.start_fraction = 2.0 * ball_volume(3, 0.5) / 1000.0;
        let out = jodrey_tory_from(&config, &p).unwrap();
        let (qa, qb) = (out.spheres[0].center, out.spheres[1].center);
        let scale = 10.0 / out.boundary.extent(0, 3).unwrap();
        let (qa, qb) = (qa * scale, qb * scale);
        // Midpoint fixed, displacement along the original line of centers.
        assert!(((qa + qb) * 0.5 - (a + b) * 0.5).norm() < 1e-12);
        let line = (b - a).normalize();
        assert!(((qb - qa).normalize() - line).norm() < 1e-12);
        assert!((qa - a).norm() - (qb - b).norm() < 1e-12);
        assert!(((qa - qb).norm() - 1.0).abs() < 1e-12);
        assert!((out.spheres[0].center - out.spheres[1].center).norm() >= 1.0 - 1e-12);
    }

    #[test]
    fn coincident_centers_still_separate() {
        let boundary = Boundary::Periodic { extents: Vec3::repeat(6.0) };
        let c = Vec3::new(3.0, 3.0, 3.0);
        let config =
            Configuration::new(3, vec![Sphere::new(c, 0.5), Sphere::new(c, 0.5)], boundary, Provenance::default()).unwrap();
        let mut p = JtParams::new(2, 3);
        p.cycles = 0;
        let out = jodrey_tory_from(&config, &p).unwrap();
        assert!(min_gap(&out).unwrap() >= -1e-12);
    }

    #[test]
    fn output_is_overlap_free_and_deterministic() {
        for dim in [2, 3] {
            let mut p = JtParams::new(300, dim);
            p.cycles = 300;
            let a = jodrey_tory(&p, 8).unwrap();
            assert!(min_gap(&a).unwrap() >= -1e-9);
            assert_eq!(a, jodrey_tory(&p, 8).unwrap());
            let start = ball_volume(dim, 0.5) * 300.0 / periodic_box_for(300, dim, 0.3).volume(dim).unwrap();
            assert!(fraction(&a) > start + 1e-3, "{dim}D fraction did not rise");
        }
    }

    #[test]
    fn denser_with_more_cycles() {
        let mut last = 0.0;
        for cycles in [0, 200, 400] {
            let mut p = JtParams::new(250, 3);
            p.cycles = cycles;
            let phi = fraction(&jodrey_tory(&p, 2).unwrap());
            assert!(phi > last);
            last = phi;
        }
    }

    #[test]
    fn rejects_open_boundaries_and_bad_rates() {
        let c = Configuration::new(3, vec![Sphere::new(Vec3::zeros(), 0.5)], Boundary::None, Provenance::default())
            .unwrap();
        assert!(jodrey_tory_from(&c, &JtParams::new(1, 3)).is_err());
        let mut p = JtParams::new(10, 3);
        p.grow = 0.0;
        assert!(jodrey_tory(&p, 1).is_err());
    }
}
