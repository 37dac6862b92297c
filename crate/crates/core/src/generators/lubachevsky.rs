//! Lubachevsky–Stillinger growth: event-driven hard spheres in a periodic
//! box whose common diameter grows linearly in time.
//!
//! Points start uniform with Gaussian velocities and zero diameter. Pairs
//! collide when their separation equals the current diameter; the normal
//! component of the relative velocity is reflected about the growth rate so
//! the pair separates faster than it grows. Kinetic energy rises at each
//! collision and is rescaled to its starting value every `n` collisions.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ball_volume, Boundary, Configuration, Provenance, Sphere, Vec3};
use crate::rng::named_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LsParams {
    pub n: usize,
    #[serde(default = "two")]
    pub dim: usize,
    /// Diameter growth per unit time, in units of the final diameter's
    /// scale (centers start at unit number density).
    #[serde(default = "default_growth_rate")]
    pub growth_rate: f64,
    #[serde(default = "default_max_events")]
    pub max_events: u64,
}

fn two() -> usize {
    2
}
fn default_growth_rate() -> f64 {
    0.01
}
fn default_max_events() -> u64 {
    100_000_000
}

impl LsParams {
    pub fn new(n: usize, dim: usize) -> Self {
        LsParams {
            n,
            dim,
            growth_rate: default_growth_rate(),
            max_events: default_max_events(),
        }
    }
}

/// Mean time between collisions below which the packing counts as jammed.
pub const JAM_INTERVAL: f64 = 1e-9;

/// Densest fractions, used to size cells that stay wider than any diameter.
fn densest(dim: usize) -> f64 {
    if dim == 2 {
        std::f64::consts::PI / 12f64.sqrt()
    } else {
        std::f64::consts::PI / 18f64.sqrt()
    }
}

#[derive(Clone, Copy, PartialEq, PartialOrd)]
struct Time(f64);

impl Eq for Time {}

impl Ord for Time {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
enum Kind {
    Collision { partner: usize, partner_count: u64 },
    Crossing { axis: usize, up: bool },
    /// End of the window an all-pairs prediction covers.
    Recheck,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Event {
    time: Time,
    sphere: usize,
    stamp: u64,
    kind: Kind,
}

/// What one processed event did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Outcome {
    Collision {
        pair: (usize, usize),
        /// Normal relative velocity before the collision.
        approach: f64,
        energy_before: f64,
        energy_after: f64,
    },
    Crossing,
    Stale,
}

struct Cells {
    m: [usize; 3],
    width: [f64; 3],
    of: Vec<[usize; 3]>,
    members: Vec<Vec<usize>>,
}

impl Cells {
    fn flat(&self, c: &[usize; 3]) -> usize {
        (c[2] * self.m[1] + c[1]) * self.m[0] + c[0]
    }
}

pub(crate) struct Sim {
    dim: usize,
    boundary: Boundary,
    extents: Vec3,
    pos: Vec<Vec3>,
    vel: Vec<Vec3>,
    t_ref: Vec<f64>,
    t: f64,
    sigma0: f64,
    rate: f64,
    cells: Option<Cells>,
    count: Vec<u64>,
    stamp: Vec<u64>,
    heap: BinaryHeap<Reverse<Event>>,
    /// Time at which the diameter reaches half the narrowest box edge,
    /// beyond which nearest images no longer suffice.
    horizon: f64,
    pub(crate) collisions: u64,
    pub(crate) events: u64,
}

impl Sim {
    pub(crate) fn new(dim: usize, extents: Vec3, pos: Vec<Vec3>, vel: Vec<Vec3>, sigma0: f64, rate: f64) -> Self {
        let n = pos.len();
        let boundary = Boundary::Periodic { extents };
        let volume = boundary.volume(dim).expect("periodic box has a volume");
        let cap = (densest(dim) * volume / (n as f64 * ball_volume(dim, 0.5))).powf(1.0 / dim as f64);
        let mut m = [1usize; 3];
        let mut width = [0.0; 3];
        for k in 0..dim {
            m[k] = ((extents[k] / (cap * 1.001)).floor() as usize).max(1);
            width[k] = extents[k] / m[k] as f64;
        }
        let cells = (0..dim).all(|k| m[k] >= 3).then(|| {
            let mut c = Cells {
                m,
                width,
                of: Vec::with_capacity(n),
                members: vec![Vec::new(); m[0] * m[1] * m[2]],
            };
            for (i, p) in pos.iter().enumerate() {
                let mut idx = [0usize; 3];
                for k in 0..dim {
                    idx[k] = ((p[k] / width[k]).floor() as usize).min(m[k] - 1);
                }
                let f = c.flat(&idx);
                c.members[f].push(i);
                c.of.push(idx);
            }
            c
        });
        let half = (0..dim).map(|k| extents[k]).fold(f64::INFINITY, f64::min) * 0.5;
        let horizon = if rate > 0.0 { (half - sigma0) / rate } else { f64::INFINITY };
        let mut sim = Sim {
            dim,
            boundary,
            extents,
            pos,
            vel,
            t_ref: vec![0.0; n],
            t: 0.0,
            sigma0,
            rate,
            cells,
            count: vec![0; n],
            stamp: vec![0; n],
            heap: BinaryHeap::new(),
            horizon,
            collisions: 0,
            events: 0,
        };
        sim.predict_all();
        sim
    }

    pub(crate) fn diameter(&self) -> f64 {
        self.sigma0 + self.rate * self.t
    }

    fn at(&self, i: usize, t: f64) -> Vec3 {
        self.pos[i] + self.vel[i] * (t - self.t_ref[i])
    }

    fn advance(&mut self, i: usize) {
        self.pos[i] = self.at(i, self.t);
        self.t_ref[i] = self.t;
    }

    pub(crate) fn kinetic_energy(&self) -> f64 {
        0.5 * self.vel.iter().map(|v| v.norm_squared()).sum::<f64>()
    }

    #[cfg(test)]
    pub(crate) fn momentum(&self) -> Vec3 {
        self.vel.iter().sum()
    }

    fn neighbors(&self, i: usize, mut f: impl FnMut(usize)) {
        match &self.cells {
            None => (0..self.pos.len()).filter(|&j| j != i).for_each(f),
            Some(c) => {
                let home = c.of[i];
                let span = |k: usize| if k < self.dim { [c.m[k] - 1, 0, 1] } else { [0, 0, 0] };
                let (sx, sy, sz) = (span(0), span(1), span(2));
                let zs: &[usize] = if self.dim == 3 { &sz } else { &sz[..1] };
                for &dz in zs {
                    for &dy in &sy {
                        for &dx in &sx {
                            let mut idx = home;
                            idx[0] = (home[0] + dx) % c.m[0];
                            idx[1] = (home[1] + dy) % c.m[1];
                            if self.dim == 3 {
                                idx[2] = (home[2] + dz) % c.m[2];
                            }
                            for &j in &c.members[c.flat(&idx)] {
                                if j != i {
                                    f(j);
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    /// Time of the next contact of `i` and `j` from now, if any.
    /// Without a cell list nothing else refreshes predictions, and a pair
    /// can meet through an image other than the nearest one. Predictions then
    /// cover a window in which relative travel stays under half the narrowest
    /// edge, searching every image reachable within it.
    fn window(&self) -> Option<f64> {
        if self.cells.is_some() {
            return None;
        }
        let vmax = self.vel.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let edge = (0..self.dim).map(|k| self.extents[k]).fold(f64::INFINITY, f64::min);
        (vmax > 0.0).then(|| edge / (4.0 * vmax))
    }

    fn contact_time(&self, i: usize, j: usize, window: Option<f64>) -> Option<f64> {
        let dr = self.boundary.delta(&self.at(i, self.t), &self.at(j, self.t), self.dim);
        let dv = self.vel[j] - self.vel[i];
        let Some(w) = window else { return self.contact_after(&dr, &dv) };
        let reach = dv.norm() * w + self.sigma0 + self.rate * (self.t + w);
        let range = |k: usize| -> (i64, i64) {
            if k >= self.dim {
                return (0, 0);
            }
            let l = self.extents[k];
            (((-reach - dr[k]) / l).ceil() as i64, ((reach - dr[k]) / l).floor() as i64)
        };
        let (rx, ry, rz) = (range(0), range(1), range(2));
        let mut best: Option<f64> = None;
        for sz in rz.0..=rz.1 {
            for sy in ry.0..=ry.1 {
                for sx in rx.0..=rx.1 {
                    let shift = Vec3::new(
                        sx as f64 * self.extents[0],
                        sy as f64 * self.extents[1],
                        sz as f64 * self.extents[2],
                    );
                    if let Some(t) = self.contact_after(&(dr + shift), &dv) {
                        if t <= self.t + w && best.is_none_or(|b| t < b) {
                            best = Some(t);
                        }
                    }
                }
            }
        }
        best
    }

    /// Earliest time the separation `dr`, changing at `dv`, closes to the
    /// growing diameter.
    fn contact_after(&self, dr: &Vec3, dv: &Vec3) -> Option<f64> {
        let sigma = self.diameter();
        let a = dv.norm_squared() - self.rate * self.rate;
        let b = dr.dot(dv) - sigma * self.rate;
        let c = dr.norm_squared() - sigma * sigma;
        if c <= 0.0 {
            return (b < 0.0).then_some(self.t);
        }
        let disc = b * b - a * c;
        if disc < 0.0 {
            return None;
        }
        let tau = if b < 0.0 {
            c / (-b + disc.sqrt())
        } else if a < 0.0 {
            (b + disc.sqrt()) / -a
        } else {
            return None;
        };
        Some(self.t + tau)
    }

    fn crossing(&self, i: usize) -> Option<(f64, usize, bool)> {
        let c = self.cells.as_ref()?;
        let p = self.at(i, self.t);
        let mut best: Option<(f64, usize, bool)> = None;
        for k in 0..self.dim {
            let v = self.vel[i][k];
            if v == 0.0 {
                continue;
            }
            let lo = c.of[i][k] as f64 * c.width[k];
            let (edge, up) = if v > 0.0 { (lo + c.width[k], true) } else { (lo, false) };
            let tau = ((edge - p[k]) / v).max(0.0);
            if best.is_none_or(|b| tau < b.0) {
                best = Some((tau, k, up));
            }
        }
        best.map(|(tau, k, up)| (self.t + tau, k, up))
    }

    fn predict(&mut self, i: usize) {
        self.stamp[i] += 1;
        let mut best: Option<(f64, Kind)> = None;
        let mut partners = Vec::new();
        self.neighbors(i, |j| partners.push(j));
        let window = self.window();
        for j in partners {
            if let Some(t) = self.contact_time(i, j, window) {
                if best.is_none_or(|b| t < b.0) {
                    best = Some((
                        t,
                        Kind::Collision {
                            partner: j,
                            partner_count: self.count[j],
                        },
                    ));
                }
            }
        }
        if let Some((t, axis, up)) = self.crossing(i) {
            if best.is_none_or(|b| t < b.0) {
                best = Some((t, Kind::Crossing { axis, up }));
            }
        }
        if let Some(w) = window {
            let end = self.t + w;
            if end < self.horizon && best.is_none_or(|b| end < b.0) {
                best = Some((end, Kind::Recheck));
            }
        }
        if let Some((t, kind)) = best {
            self.heap.push(Reverse(Event {
                time: Time(t),
                sphere: i,
                stamp: self.stamp[i],
                kind,
            }));
        }
    }

    fn predict_all(&mut self) {
        self.heap.clear();
        for i in 0..self.pos.len() {
            self.predict(i);
        }
    }

    /// Bring every sphere to the current time.
    fn synchronize(&mut self) {
        for i in 0..self.pos.len() {
            self.advance(i);
        }
    }

    /// Rescale velocities to the given kinetic energy.
    pub(crate) fn rescale(&mut self, energy: f64) {
        self.synchronize();
        let now = self.kinetic_energy();
        if now > 0.0 {
            let s = (energy / now).sqrt();
            self.vel.iter_mut().for_each(|v| *v *= s);
        }
        self.predict_all();
    }

    fn compact(&mut self) -> Result<()> {
        let limit = 16 * self.pos.len() + 64;
        if self.heap.len() <= limit {
            return Ok(());
        }
        let stamp = &self.stamp;
        let kept: Vec<_> = self.heap.drain().filter(|Reverse(e)| e.stamp == stamp[e.sphere]).collect();
        self.heap = kept.into();
        if self.heap.len() > limit {
            return Err(Error::EventQueueOverflow(self.heap.len()));
        }
        Ok(())
    }

    /// Process the next event; `None` once nothing is scheduled before the
    /// horizon.
    pub(crate) fn step(&mut self) -> Result<Option<Outcome>> {
        let next = self.heap.peek().map_or(f64::INFINITY, |Reverse(e)| e.time.0);
        if next > self.horizon {
            if self.horizon.is_finite() {
                self.t = self.horizon;
            }
            return Ok(None);
        }
        let Some(Reverse(ev)) = self.heap.pop() else { return Ok(None) };
        let i = ev.sphere;
        if ev.stamp != self.stamp[i] {
            return Ok(Some(Outcome::Stale));
        }
        self.t = self.t.max(ev.time.0);
        self.events += 1;
        let out = match ev.kind {
            Kind::Collision { partner: j, partner_count } => {
                if self.count[j] != partner_count {
                    self.predict(i);
                    Outcome::Stale
                } else {
                    self.collide(i, j)
                }
            }
            Kind::Crossing { axis, up } => {
                self.cross(i, axis, up);
                Outcome::Crossing
            }
            Kind::Recheck => {
                self.predict(i);
                Outcome::Crossing
            }
        };
        self.compact()?;
        Ok(Some(out))
    }

    fn collide(&mut self, i: usize, j: usize) -> Outcome {
        self.advance(i);
        self.advance(j);
        let before = 0.5 * (self.vel[i].norm_squared() + self.vel[j].norm_squared());
        let dr = self.boundary.delta(&self.pos[i], &self.pos[j], self.dim);
        let normal = dr.normalize();
        let approach = (self.vel[j] - self.vel[i]).dot(&normal);
        let push = (self.rate - approach).max(0.0);
        self.vel[i] -= push * normal;
        self.vel[j] += push * normal;
        let after = 0.5 * (self.vel[i].norm_squared() + self.vel[j].norm_squared());
        self.count[i] += 1;
        self.count[j] += 1;
        self.collisions += 1;
        self.predict(i);
        self.predict(j);
        Outcome::Collision {
            pair: (i, j),
            approach,
            energy_before: before,
            energy_after: after,
        }
    }

    fn cross(&mut self, i: usize, axis: usize, up: bool) {
        self.advance(i);
        let c = self.cells.as_mut().expect("crossings need cells");
        let old = c.flat(&c.of[i]);
        let m = c.m[axis];
        let cur = c.of[i][axis];
        let next = if up { (cur + 1) % m } else { (cur + m - 1) % m };
        let slot = c.members[old].iter().position(|&k| k == i).expect("sphere in its cell");
        c.members[old].swap_remove(slot);
        c.of[i][axis] = next;
        let new = c.flat(&c.of[i]);
        c.members[new].push(i);
        self.pos[i][axis] = if up {
            next as f64 * c.width[axis]
        } else {
            (next + 1) as f64 * c.width[axis]
        };
        self.predict(i);
    }

    /// Smallest center distance, by the cell list.
    pub(crate) fn min_distance(&self) -> f64 {
        let pos: Vec<Vec3> = (0..self.pos.len()).map(|i| self.at(i, self.t)).collect();
        let mut best = f64::INFINITY;
        for i in 0..pos.len() {
            self.neighbors(i, |j| {
                if j > i {
                    best = best.min(self.boundary.distance(&pos[i], &pos[j], self.dim));
                }
            });
        }
        best
    }

    fn positions(&self) -> Vec<Vec3> {
        (0..self.pos.len()).map(|i| self.at(i, self.t)).collect()
    }
}

/// Lubachevsky–Stillinger packing in a periodic cube, rescaled to unit
/// diameter.
pub fn lubachevsky_stillinger(params: &LsParams, seed: u64) -> Result<Configuration> {
    let LsParams {
        n,
        dim,
        growth_rate,
        max_events,
    } = *params;
    if n == 0 {
        return Err(Error::param("n must be at least 1"));
    }
    if dim != 2 && dim != 3 {
        return Err(Error::param(format!("dimension must be 2 or 3, got {dim}")));
    }
    if !(growth_rate > 0.0 && growth_rate.is_finite()) {
        return Err(Error::param("growth_rate must be positive"));
    }
    let edge = (n as f64).powf(1.0 / dim as f64);
    let mut extents = Vec3::zeros();
    for k in 0..dim {
        extents[k] = edge;
    }
    let mut rng = named_rng(seed, "lubachevsky-stillinger");
    let mut pos = Vec::with_capacity(n);
    let mut vel = Vec::with_capacity(n);
    for _ in 0..n {
        let mut p = Vec3::zeros();
        for k in 0..dim {
            p[k] = rng.random::<f64>() * edge;
        }
        pos.push(p);
    }
    for _ in 0..n {
        let mut v = Vec3::zeros();
        for k in 0..dim {
            v[k] = rng.sample(StandardNormal);
        }
        vel.push(v);
    }
    let drift: Vec3 = vel.iter().sum::<Vec3>() / n as f64;
    vel.iter_mut().for_each(|v| *v -= drift);

    let mut sim = Sim::new(dim, extents, pos, vel, 0.0, growth_rate);
    let energy = sim.kinetic_energy();
    let mut mark = (sim.collisions, sim.t);
    let mut jammed = false;
    while sim.events < max_events {
        match sim.step()? {
            None => break,
            Some(Outcome::Collision { .. }) if sim.collisions - mark.0 == n as u64 => {
                let interval = (sim.t - mark.1) / n as f64;
                if interval < JAM_INTERVAL {
                    jammed = true;
                    break;
                }
                sim.rescale(energy);
                mark = (sim.collisions, sim.t);
            }
            _ => {}
        }
    }
    let diameter = sim.diameter().min(sim.min_distance());
    if !(diameter > 0.0) {
        return Err(Error::Degenerate(format!("final diameter {diameter} after {} events", sim.events)));
    }
    let scale = 1.0 / diameter;
    let boundary = Boundary::Periodic {
        extents: extents * scale,
    };
    let spheres = sim
        .positions()
        .iter()
        .map(|p| Sphere::new(boundary.wrap(&(p * scale), dim), 0.5))
        .collect();
    let prov = Provenance::new("lubachevsky-stillinger", seed)
        .with("n", n)
        .with("dim", dim)
        .with("growth_rate", growth_rate)
        .with("max_events", max_events)
        .with("events", sim.events)
        .with("collisions", sim.collisions)
        .with("jammed", jammed);
    Configuration::new(dim, spheres, boundary, prov)
}
