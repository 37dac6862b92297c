//! Sequential deposition under gravity onto a base plane with periodic
//! lateral boundaries: Vold ballistic, Visscher–Bolsterli and
//! shake-redeposit.
//!
//! A settling sphere falls vertically to its first contact and then follows
//! the steepest-descent path over the spheres it touches: along a great
//! circle when rolling on one sphere, along the intersection circle when
//! rolling on two. Every path segment ends at an exactly computed event
//! (new contact, base, release of a contact, or the lowest point).

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Boundary, Configuration, Provenance, Sphere, Vec3};
use crate::grid::NeighborGrid;
use crate::rng::{named_rng, rng_from_seed};

const TOUCH: f64 = 1e-9;
const MAX_STEPS: usize = 2000;

fn vertical(dim: usize) -> Vec3 {
    let mut e = Vec3::zeros();
    e[dim - 1] = 1.0;
    e
}

/// Default lateral extent: `n^(1/d)` diameters per lateral axis, at least 4.
pub fn default_lateral(n: usize, dim: usize) -> f64 {
    (n as f64).powf(1.0 / dim as f64).max(4.0)
}

fn lateral_vec(dim: usize, l: f64) -> Vec3 {
    let mut v = Vec3::zeros();
    for k in 0..dim - 1 {
        v[k] = l;
    }
    v
}

/// Growing pile of settled spheres.
pub(crate) struct Pile {
    dim: usize,
    boundary: Boundary,
    spheres: Vec<Sphere>,
    grid: NeighborGrid,
    columns: NeighborGrid,
    rmax: f64,
    top: f64,
    unsettled: usize,
}

impl Pile {
    pub(crate) fn new(dim: usize, lateral: Vec3, rmax: f64) -> Self {
        let boundary = Boundary::OpenWithBase { lateral };
        let columns = NeighborGrid::new(dim - 1, Boundary::Periodic { extents: lateral }, 2.0 * rmax);
        Pile {
            dim,
            boundary,
            spheres: Vec::new(),
            grid: NeighborGrid::new(dim, boundary, 2.0 * rmax),
            columns,
            rmax,
            top: 0.0,
            unsettled: 0,
        }
    }

    fn project(&self, p: &Vec3) -> Vec3 {
        let mut q = *p;
        q[self.dim - 1] = 0.0;
        q
    }

    pub(crate) fn add(&mut self, center: Vec3, radius: f64) {
        let c = self.boundary.wrap(&center, self.dim);
        let i = self.spheres.len();
        self.spheres.push(Sphere::new(c, radius));
        self.grid.insert(i, c);
        let proj = self.project(&c);
        self.columns.insert(i, proj);
        self.top = self.top.max(c[self.dim - 1]);
        self.rmax = self.rmax.max(radius);
    }

    pub(crate) fn drop_height(&self) -> f64 {
        self.top + 2.0 * self.rmax + 1.0
    }

    fn into_configuration(self, provenance: Provenance) -> Result<Configuration> {
        Configuration::new(self.dim, self.spheres, self.boundary, provenance)
    }

    /// Height at which a sphere falling from `c` first touches something,
    /// and what it touches (`None` for the base).
    fn fall(&self, c: &Vec3, r: f64) -> (f64, Option<usize>) {
        let v = self.dim - 1;
        let mut best = r;
        let mut hit = None;
        let proj = self.project(c);
        self.columns.for_each_within(&proj, r + self.rmax, |j, d| {
            let s = &self.spheres[j];
            let reach = r + s.radius;
            let lat = d.norm();
            if lat < reach - TOUCH {
                let zc = s.center[v] + (reach * reach - lat * lat).sqrt();
                if zc <= c[v] + TOUCH && zc > best {
                    best = zc;
                    hit = Some(j);
                }
            }
        });
        (best.min(c[v].max(r)), hit)
    }

    /// Settled spheres touching a sphere of radius `r` at `c`, with the
    /// image of each center nearest to `c`.
    fn touching(&self, c: &Vec3, r: f64) -> Vec<(usize, Vec3)> {
        let mut out = Vec::new();
        self.grid.for_each_within(c, r + self.rmax + TOUCH, |j, d| {
            if d.norm() - r - self.spheres[j].radius <= TOUCH {
                out.push((j, c + d));
            }
        });
        out.sort_by_key(|e| e.0);
        out
    }

    /// Candidate obstacles near `center` within `reach`, as images nearest to `center`.
    fn nearby(&self, center: &Vec3, reach: f64) -> Vec<(usize, Vec3)> {
        let mut out = Vec::new();
        self.grid.for_each_within(center, reach, |j, d| out.push((j, center + d)));
        out
    }

    /// Settle a sphere released at `start`. With `stick`, it stays at its
    /// first contact.
    pub(crate) fn settle(&mut self, start: Vec3, r: f64, stick: bool) -> Vec3 {
        let v = self.dim - 1;
        let mut c = start;
        let (z, hit) = self.fall(&c, r);
        c[v] = z;
        if hit.is_none() || stick {
            return c;
        }
        let mut stalls = 0;
        for _ in 0..MAX_STEPS {
            if c[v] - r <= TOUCH {
                return c;
            }
            let touching = self.touching(&c, r);
            let normals: Vec<Vec3> = touching.iter().map(|(_, p)| (c - p).normalize()).collect();
            let (dir, active) = descent(self.dim, &normals);
            if dir.norm() < 1e-12 {
                return c;
            }
            let before = c;
            c = match active.len() {
                0 => {
                    let (z, hit) = self.fall(&c, r);
                    c[v] = z;
                    if hit.is_none() {
                        return c;
                    }
                    c
                }
                1 => self.roll_one(c, r, touching[active[0]]),
                2 if self.dim == 3 => self.roll_two(c, r, touching[active[0]], touching[active[1]]),
                _ => return c,
            };
            if (c - before).norm() < 1e-13 {
                stalls += 1;
                if stalls >= 3 {
                    break;
                }
            } else {
                stalls = 0;
            }
        }
        self.unsettled += 1;
        c
    }

    /// Roll over the sphere at `ps` in the vertical plane through both
    /// centers, down to the first event.
    fn roll_one(&self, c: Vec3, r: f64, (s, ps): (usize, Vec3)) -> Vec3 {
        let v = self.dim - 1;
        let ev = vertical(self.dim);
        let w = c - ps;
        let radius = w.norm();
        let mut h = w;
        h[v] = 0.0;
        let hn = h.norm();
        if hn < 1e-14 {
            return c;
        }
        h /= hn;
        let th0 = w[v].atan2(hn);
        if th0 <= 0.0 {
            return c;
        }
        let at = |th: f64| ps + radius * (th.cos() * h + th.sin() * ev);
        let mut end = 0.0f64;
        let sb = (r - ps[v]) / radius;
        if sb > 0.0 && sb < th0.sin() {
            end = end.max(sb.asin());
        }
        for (k, pk) in self.nearby(&ps, radius + r + self.rmax) {
            if k == s {
                continue;
            }
            let reach = r + self.spheres[k].radius;
            let w2 = ps - pk;
            let a = 2.0 * radius * w2.dot(&h);
            let b = 2.0 * radius * w2.dot(&ev);
            let cc = reach * reach - w2.norm_squared() - radius * radius;
            if let Some(th) = entering_root(a, b, cc, end, th0) {
                end = th;
            }
        }
        at(end)
    }

    /// Roll along the circle of positions touching both `pa` and `pb`.
    fn roll_two(&self, c: Vec3, r: f64, (ia, pa): (usize, Vec3), (ib, pb): (usize, Vec3)) -> Vec3 {
        let v = self.dim - 1;
        let ev = vertical(self.dim);
        let ra = (c - pa).norm();
        let rb = (c - pb).norm();
        let mut e = pb - pa;
        let lab = e.norm();
        e /= lab;
        let x = (ra * ra - rb * rb + lab * lab) / (2.0 * lab);
        let rho2 = ra * ra - x * x;
        if rho2 <= 0.0 {
            return c;
        }
        let rho = rho2.sqrt();
        let m = pa + x * e;
        let mut p = -(ev - ev.dot(&e) * e);
        if p.norm() < 1e-12 {
            return c;
        }
        p = p.normalize();
        let q = e.cross(&p);
        let rel = c - m;
        let phi0 = rel.dot(&q).atan2(rel.dot(&p));
        if phi0.abs() < 1e-15 {
            return c;
        }
        let sgn = phi0.signum();
        let psi0 = phi0.abs();
        let at = |psi: f64| m + rho * (psi.cos() * p + sgn * psi.sin() * q);
        let mut end = 0.0f64;
        // The center height is m_z + rho p_z cos(psi), falling as psi shrinks.
        let to_psi = |z: f64| -> Option<f64> {
            let cs = (z - m[v]) / (rho * p[v]);
            (cs > psi0.cos() && cs < 1.0).then(|| cs.acos())
        };
        if let Some(psi) = to_psi(r) {
            end = end.max(psi);
        }
        let ua = (c - pa) / ra;
        let ub = (c - pb) / rb;
        let cab = ua.dot(&ub);
        for (pt, rt, po, ro) in [(pa, ra, pb, rb), (pb, rb, pa, ra)] {
            // Rolling on the other sphere alone stops pushing into this one
            // once -(z - pt_z)/rt + cab (z - po_z)/ro reaches zero.
            let slope = -1.0 / rt + cab / ro;
            if slope < 0.0 {
                let z_rel = (pt[v] / rt - cab * po[v] / ro) / (1.0 / rt - cab / ro);
                if z_rel < c[v] {
                    if let Some(psi) = to_psi(z_rel) {
                        end = end.max(psi);
                    }
                }
            }
        }
        for (k, pk) in self.nearby(&m, rho + r + self.rmax) {
            if k == ia || k == ib {
                continue;
            }
            let reach = r + self.spheres[k].radius;
            let w = m - pk;
            let a = 2.0 * rho * w.dot(&p);
            let b = 2.0 * rho * sgn * w.dot(&q);
            let cc = reach * reach - w.norm_squared() - rho * rho;
            if let Some(psi) = entering_root(a, b, cc, end, psi0) {
                end = psi;
            }
        }
        at(end)
    }
}

/// Largest angle in `[lo, hi)` where `a cos t + b sin t - c` crosses zero
/// while decreasing as `t` decreases, if it exceeds `lo`.
fn entering_root(a: f64, b: f64, c: f64, lo: f64, hi: f64) -> Option<f64> {
    let amp = a.hypot(b);
    if amp == 0.0 || c.abs() > amp {
        return None;
    }
    let phase = b.atan2(a);
    let spread = (c / amp).clamp(-1.0, 1.0).acos();
    let limit = hi - 1e-12;
    let mut best: Option<f64> = None;
    for base in [phase + spread, phase - spread] {
        for k in -2..=2 {
            let t = base + k as f64 * std::f64::consts::TAU;
            if t > lo && t <= limit {
                let slope = -a * t.sin() + b * t.cos();
                if slope > 0.0 && best.is_none_or(|bt| t > bt) {
                    best = Some(t);
                }
            }
        }
    }
    best
}

/// Projection of gravity onto the cone of directions that do not push into
/// any contact (`u · n_k >= 0`), with the contacts it keeps.
pub(crate) fn descent(dim: usize, normals: &[Vec3]) -> (Vec3, Vec<usize>) {
    let g = -vertical(dim);
    let m = normals.len();
    let mut best: Option<(f64, Vec3, Vec<usize>)> = None;
    let max_size = dim.min(m);
    let mut subsets: Vec<Vec<usize>> = vec![Vec::new()];
    for size in 1..=max_size {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            subsets.push(idx.clone());
            let mut k = size;
            while k > 0 && idx[k - 1] == m - size + k - 1 {
                k -= 1;
            }
            if k == 0 {
                break;
            }
            idx[k - 1] += 1;
            for t in k..size {
                idx[t] = idx[t - 1] + 1;
            }
        }
    }
    for s in subsets {
        let k = s.len();
        let (vdir, lambda) = if k == 0 {
            (g, Vec::new())
        } else {
            let mut gram = nalgebra::DMatrix::<f64>::zeros(k, k);
            let mut rhs = nalgebra::DVector::<f64>::zeros(k);
            for a in 0..k {
                for b in 0..k {
                    gram[(a, b)] = normals[s[a]].dot(&normals[s[b]]);
                }
                rhs[a] = normals[s[a]].dot(&g);
            }
            if gram.determinant().abs() < 1e-10 {
                continue;
            }
            let Some(sol) = gram.lu().solve(&rhs) else { continue };
            let mut proj = Vec3::zeros();
            for a in 0..k {
                proj += sol[a] * normals[s[a]];
            }
            (g - proj, sol.iter().copied().collect::<Vec<f64>>())
        };
        // Multipliers of the kept contacts must push back (lambda <= 0).
        if lambda.iter().any(|&l| l > 1e-12) {
            continue;
        }
        if normals.iter().any(|n| vdir.dot(n) < -1e-12) {
            continue;
        }
        let dist = (g - vdir).norm();
        if best.as_ref().is_none_or(|b| dist < b.0 - 1e-15) {
            best = Some((dist, vdir, s));
        }
    }
    match best {
        Some((_, v, s)) => (v, s),
        None => (Vec3::zeros(), (0..m).collect()),
    }
}

/// Parameters shared by the deposition generators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoldParams {
    pub n: usize,
    #[serde(default = "three")]
    pub dim: usize,
    pub p_stick: f64,
    /// Lateral box edge in diameters; defaults to [`default_lateral`].
    #[serde(default)]
    pub lateral: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VbParams {
    pub n: usize,
    #[serde(default = "three")]
    pub dim: usize,
    #[serde(default = "four")]
    pub k_drops: usize,
    #[serde(default)]
    pub lateral: Option<f64>,
}

fn three() -> usize {
    3
}

fn four() -> usize {
    4
}

fn check_deposition(n: usize, dim: usize, lateral: Option<f64>) -> Result<f64> {
    if n == 0 {
        return Err(Error::param("n must be at least 1"));
    }
    if dim != 2 && dim != 3 {
        return Err(Error::param(format!("dimension must be 2 or 3, got {dim}")));
    }
    let l = lateral.unwrap_or_else(|| default_lateral(n, dim));
    if !(l >= 4.0 && l.is_finite()) {
        return Err(Error::param("lateral extent must be at least 4 diameters"));
    }
    Ok(l)
}

fn random_drop(rng: &mut impl Rng, dim: usize, l: f64, height: f64) -> Vec3 {
    let mut p = Vec3::zeros();
    for k in 0..dim - 1 {
        p[k] = rng.random::<f64>() * l;
    }
    p[dim - 1] = height;
    p
}

/// Spheres dropped at uniform lateral positions; each sticks at its first
/// contact with probability `p_stick`, otherwise rolls to a stable position.
pub fn vold_ballistic(params: &VoldParams, seed: u64) -> Result<Configuration> {
    let l = check_deposition(params.n, params.dim, params.lateral)?;
    if !(0.0..=1.0).contains(&params.p_stick) {
        return Err(Error::param("p_stick must lie in [0, 1]"));
    }
    let dim = params.dim;
    let mut pile = Pile::new(dim, lateral_vec(dim, l), 0.5);
    let mut rng = rng_from_seed(seed);
    for _ in 0..params.n {
        let start = random_drop(&mut rng, dim, l, pile.drop_height());
        let stick = rng.random::<f64>() < params.p_stick;
        let c = pile.settle(start, 0.5, stick);
        pile.add(c, 0.5);
    }
    let prov = Provenance::new("vold", seed)
        .with("n", params.n)
        .with("dim", dim)
        .with("p_stick", params.p_stick)
        .with("lateral", l)
        .with("unsettled", pile.unsettled);
    pile.into_configuration(prov)
}

/// Each sphere is dropped `k_drops` times at independent lateral positions
/// and kept where it came to rest lowest (ties: lowest lateral coordinates).
/// In 2D the first layer's radii vary by up to 2% to prevent ordering.
pub fn visscher_bolsterli(params: &VbParams, seed: u64) -> Result<Configuration> {
    let l = check_deposition(params.n, params.dim, params.lateral)?;
    if params.k_drops == 0 {
        return Err(Error::param("k_drops must be at least 1"));
    }
    let dim = params.dim;
    let mut pile = Pile::new(dim, lateral_vec(dim, l), 0.51);
    let mut rng = rng_from_seed(seed);
    let first_layer = if dim == 2 { l.ceil() as usize } else { 0 };
    for i in 0..params.n {
        let r = if i < first_layer {
            0.5 * (1.0 + 0.02 * (2.0 * rng.random::<f64>() - 1.0))
        } else {
            0.5
        };
        let height = pile.drop_height();
        let mut best: Option<Vec3> = None;
        for _ in 0..params.k_drops {
            let start = random_drop(&mut rng, dim, l, height);
            let c = pile.settle(start, r, false);
            let key = |p: &Vec3| {
                let mut k = vec![p[dim - 1]];
                k.extend((0..dim - 1).map(|a| p[a]));
                k
            };
            let better = best.as_ref().is_none_or(|b| {
                key(&c).partial_cmp(&key(b)) == Some(std::cmp::Ordering::Less)
            });
            if better {
                best = Some(c);
            }
        }
        pile.add(best.unwrap(), r);
    }
    let prov = Provenance::new("visscher-bolsterli", seed)
        .with("n", params.n)
        .with("dim", dim)
        .with("k_drops", params.k_drops)
        .with("lateral", l)
        .with("unsettled", pile.unsettled);
    pile.into_configuration(prov)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShakeParams {
    /// Scale of the upward displacement, in diameters.
    pub sigma_up: f64,
    /// Scale of the random moves, in diameters.
    pub sigma_move: f64,
    /// Rejected moves after which the packing is collapsed.
    pub collision_threshold: usize,
    /// Upper bound on sweeps of random moves.
    pub sweeps: usize,
}

impl Default for ShakeParams {
    fn default() -> Self {
        ShakeParams {
            sigma_up: 0.03,
            sigma_move: 0.03,
            collision_threshold: 40_000,
            sweeps: 200,
        }
    }
}

/// Result of a shake-redeposit pass.
#[derive(Debug, Clone)]
pub struct ShakeOutcome {
    pub configuration: Configuration,
    pub moves_accepted: usize,
    pub collisions: usize,
}

/// Lift every sphere by a half-normal amount (never less than the spheres
/// beneath it), apply random moves rejected on collision until the
/// collision count reaches its threshold, then redeposit the spheres in
/// order of height at their lateral positions by Visscher–Bolsterli rolling.
pub fn shake_redeposit(config: &Configuration, params: &ShakeParams, seed: u64) -> Result<ShakeOutcome> {
    if !matches!(config.boundary, Boundary::OpenWithBase { .. }) {
        return Err(Error::param("shake-redeposit needs a configuration on a base"));
    }
    if !(params.sigma_up >= 0.0 && params.sigma_move >= 0.0) {
        return Err(Error::param("shake scales must be nonnegative"));
    }
    let dim = config.dim;
    let v = dim - 1;
    let n = config.len();
    let rmax = config.max_radius();
    let mut centers = config.centers();
    let radii: Vec<f64> = config.spheres.iter().map(|s| s.radius).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| centers[a][v].total_cmp(&centers[b][v]).then(a.cmp(&b)));

    // Lift: spheres below and nearby pass their displacement upwards.
    let mut rng = named_rng(seed, "lift");
    let grid = config.grid(2.0 * rmax);
    let mut lift = vec![0.0; n];
    let reach = 2.0 * rmax + 6.0 * params.sigma_up;
    if params.sigma_up > 0.0 {
        let half = Normal::new(0.0, params.sigma_up).map_err(|e| Error::param(e.to_string()))?;
        for &i in &order {
            let mut base: f64 = 0.0;
            grid.for_each_within(&centers[i], reach, |j, _| {
                if j != i && (centers[j][v], j) < (centers[i][v], i) {
                    base = base.max(lift[j]);
                }
            });
            lift[i] = base + half.sample(&mut rng).abs();
        }
    }
    for i in 0..n {
        centers[i][v] += lift[i];
    }

    // Random moves, rejected on overlap with a sphere or the base.
    let mut rng = named_rng(seed, "moves");
    let mut moving = NeighborGrid::new(dim, config.boundary, 2.0 * rmax);
    for (i, c) in centers.iter().enumerate() {
        moving.insert(i, *c);
    }
    let mut collisions = 0usize;
    let mut accepted = 0usize;
    if params.sigma_move > 0.0 {
        let step = Normal::new(0.0, params.sigma_move).map_err(|e| Error::param(e.to_string()))?;
        'sweeps: for _ in 0..params.sweeps {
            for i in 0..n {
                let mut trial = centers[i];
                for k in 0..dim {
                    trial[k] += step.sample(&mut rng);
                }
                trial = config.boundary.wrap(&trial, dim);
                let mut blocked = trial[v] < radii[i];
                if !blocked {
                    moving.for_each_within(&trial, radii[i] + rmax, |j, d| {
                        if j != i && d.norm() < radii[i] + radii[j] {
                            blocked = true;
                        }
                    });
                }
                if blocked {
                    collisions += 1;
                    if collisions >= params.collision_threshold {
                        break 'sweeps;
                    }
                } else {
                    centers[i] = trial;
                    moving.update(i, trial);
                    accepted += 1;
                }
            }
        }
    }

    let (spheres, unsettled) = collapse(config, &centers, &radii);
    let prov = Provenance::new("shake-redeposit", seed)
        .with("base_algorithm", &config.provenance.algorithm)
        .with("base_seed", config.provenance.seed)
        .with("sigma_up", params.sigma_up)
        .with("sigma_move", params.sigma_move)
        .with("collision_threshold", params.collision_threshold)
        .with("sweeps", params.sweeps)
        .with("collisions", collisions)
        .with("unsettled", unsettled);
    let configuration = Configuration::new(dim, spheres, config.boundary, prov)?;
    Ok(ShakeOutcome {
        configuration,
        moves_accepted: accepted,
        collisions,
    })
}

/// Redeposit spheres in order of height at their lateral positions,
/// keeping sphere indices.
fn collapse(config: &Configuration, centers: &[Vec3], radii: &[f64]) -> (Vec<Sphere>, usize) {
    let dim = config.dim;
    let v = dim - 1;
    let n = centers.len();
    let Boundary::OpenWithBase { lateral } = config.boundary else {
        unreachable!("collapse needs a base");
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| centers[a][v].total_cmp(&centers[b][v]).then(a.cmp(&b)));
    let mut pile = Pile::new(dim, lateral, config.max_radius());
    let mut placed = vec![Vec3::zeros(); n];
    for &i in &order {
        let mut start = centers[i];
        start[v] = pile.drop_height().max(centers[i][v]);
        let c = pile.settle(start, radii[i], false);
        placed[i] = config.boundary.wrap(&c, dim);
        pile.add(c, radii[i]);
    }
    let spheres = (0..n).map(|i| Sphere::new(placed[i], radii[i])).collect();
    (spheres, pile.unsettled)
}

/// Rearrangement without perturbation: order by height and redeposit each
/// sphere at its lateral position by Visscher–Bolsterli rolling.
pub fn redeposit(config: &Configuration) -> Result<Configuration> {
    if !matches!(config.boundary, Boundary::OpenWithBase { .. }) {
        return Err(Error::param("redeposition needs a configuration on a base"));
    }
    let radii: Vec<f64> = config.spheres.iter().map(|s| s.radius).collect();
    let (spheres, unsettled) = collapse(config, &config.centers(), &radii);
    let prov = Provenance::new("redeposit", config.provenance.seed)
        .with("base_algorithm", &config.provenance.algorithm)
        .with("unsettled", unsettled);
    Configuration::new(config.dim, spheres, config.boundary, prov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contacts::{build_contact_network, gravity_stable, ContactRule};
    use crate::geometry::min_gap;
    use crate::tessellation::Triangulation;
    use std::f64::consts::FRAC_PI_3;

    fn pile_with(dim: usize, spheres: &[(Vec3, f64)]) -> Pile {
        let mut p = Pile::new(dim, lateral_vec(dim, 10.0), 0.5);
        for &(c, r) in spheres {
            p.add(c, r);
        }
        p
    }

    #[test]
    fn descent_projects_gravity() {
        let (v, a) = descent(3, &[]);
        assert_eq!(v, Vec3::new(0.0, 0.0, -1.0));
        assert!(a.is_empty());
        // Resting on a base-like contact.
        let (v, _) = descent(3, &[Vec3::z()]);
        assert!(v.norm() < 1e-15);
        // Tilted single contact: slide tangentially.
        let n = Vec3::new(1.0, 0.0, 1.0).normalize();
        let (v, a) = descent(3, &[n]);
        assert_eq!(a, vec![0]);
        assert!(v.dot(&n).abs() < 1e-15 && v.z < 0.0);
        // Contact pointing down does not hold the sphere.
        let (v, a) = descent(3, &[Vec3::new(1.0, 0.0, -1.0).normalize()]);
        assert!(a.is_empty() && (v - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-15);
        // Three supports around the vertical: stable.
        let tri: Vec<Vec3> = (0..3)
            .map(|k| {
                let t = 2.0 * FRAC_PI_3 * k as f64;
                Vec3::new(t.cos(), t.sin(), 1.0).normalize()
            })
            .collect();
        assert!(descent(3, &tri).0.norm() < 1e-12);
    }

    #[test]
    fn single_sphere_rests_on_base() {
        let mut p = pile_with(3, &[]);
        let c = p.settle(Vec3::new(3.0, 4.0, 9.0), 0.5, false);
        assert_eq!(c, Vec3::new(3.0, 4.0, 0.5));
        let one = vold_ballistic(&VoldParams { n: 1, dim: 3, p_stick: 0.0, lateral: None }, 5).unwrap();
        assert_eq!(one.spheres[0].center.z, 0.5);
        let vb = visscher_bolsterli(&VbParams { n: 1, dim: 3, k_drops: 4, lateral: None }, 5).unwrap();
        assert_eq!(vb.spheres[0].center.z, 0.5);
    }

    #[test]
    fn rolls_off_a_single_sphere_to_the_base() {
        let mut p = pile_with(3, &[(Vec3::new(5.0, 5.0, 0.5), 0.5)]);
        let c = p.settle(Vec3::new(5.3, 5.4, 5.0), 0.5, false);
        assert!((c.z - 0.5).abs() < 1e-12);
        let lat = Vec3::new(c.x - 5.0, c.y - 5.0, 0.0);
        assert!((lat.norm() - 1.0).abs() < 1e-9);
        // Direction of travel preserved.
        assert!((lat.y / lat.x - 4.0 / 3.0).abs() < 1e-9);
        let stuck = p.settle(Vec3::new(5.3, 5.4, 5.0), 0.5, true);
        assert!(stuck.z > 1.0);
    }

    #[test]
    fn settles_in_the_pocket_of_three() {
        let s = 1.0;
        let base: Vec<(Vec3, f64)> = (0..3)
            .map(|k| {
                let t = 2.0 * FRAC_PI_3 * k as f64;
                (Vec3::new(5.0 + s / 3f64.sqrt() * t.cos(), 5.0 + s / 3f64.sqrt() * t.sin(), 0.5), 0.5)
            })
            .collect();
        let mut p = pile_with(3, &base);
        let c = p.settle(Vec3::new(5.2, 4.9, 6.0), 0.5, false);
        // Apex of a regular tetrahedron of unit edge.
        assert!((c.x - 5.0).abs() < 1e-9 && (c.y - 5.0).abs() < 1e-9, "{c:?}");
        assert!((c.z - (0.5 + (2.0f64 / 3.0).sqrt())).abs() < 1e-9);
    }

    #[test]
    fn two_supports_alone_do_not_hold() {
        // A raised pair 1.4 apart: the sphere rolls along their contact
        // circle, is released at the side and falls to the base.
        for z in [0.5, 3.0] {
            let mut p = pile_with(3, &[(Vec3::new(4.3, 5.0, z), 0.5), (Vec3::new(5.7, 5.0, z), 0.5)]);
            let c = p.settle(Vec3::new(4.9, 5.05, 8.0), 0.5, false);
            assert!((c.z - 0.5).abs() < 1e-12 && (c.x - 5.0).abs() < 1e-9, "{c:?}");
            assert!(c.y > 5.0);
            if z == 0.5 {
                assert!(((c.y - 5.0) - 0.51f64.sqrt()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn two_dimensional_disc_rolls_into_gap() {
        let mut p = pile_with(2, &[(Vec3::new(3.0, 0.5, 0.0), 0.5), (Vec3::new(4.5, 0.5, 0.0), 0.5)]);
        let c = p.settle(Vec3::new(3.6, 8.0, 0.0), 0.5, false);
        assert!((c.x - 3.75).abs() < 1e-9, "{c:?}");
        assert!((c.y - (0.5 + (1.0f64 - 0.5625).sqrt())).abs() < 1e-9);
    }

    #[test]
    fn deposits_are_overlap_free_and_supported() {
        for dim in [2, 3] {
            let n = if dim == 2 { 400 } else { 600 };
            let vb = visscher_bolsterli(&VbParams { n, dim, k_drops: 2, lateral: None }, 11).unwrap();
            assert!(min_gap(&vb).unwrap() >= -1e-9);
            assert_eq!(vb.provenance.params["unsettled"], "0");
            let tri = Triangulation::build(&vb).unwrap();
            let net = build_contact_network(&vb, &tri, ContactRule::HardTolerance { eps: 1e-8 }).unwrap();
            for i in 0..vb.len() {
                assert!(gravity_stable(&vb, &net, i), "{dim}D sphere {i} unsupported");
            }
            let vold = vold_ballistic(&VoldParams { n, dim, p_stick: 0.0, lateral: None }, 12).unwrap();
            assert!(min_gap(&vold).unwrap() >= -1e-9);
            let tri = Triangulation::build(&vold).unwrap();
            let net = build_contact_network(&vold, &tri, ContactRule::HardTolerance { eps: 1e-8 }).unwrap();
            assert!((0..vold.len()).all(|i| gravity_stable(&vold, &net, i)));
        }
    }

    #[test]
    fn deposition_is_deterministic() {
        let p = VbParams { n: 300, dim: 3, k_drops: 3, lateral: None };
        let a = visscher_bolsterli(&p, 77).unwrap();
        let b = visscher_bolsterli(&p, 77).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, visscher_bolsterli(&p, 78).unwrap());
    }

    #[test]
    fn two_dimensional_first_layer_is_polydisperse() {
        let c = visscher_bolsterli(&VbParams { n: 100, dim: 2, k_drops: 1, lateral: None }, 3).unwrap();
        let first: Vec<f64> = c.spheres[..10].iter().map(|s| s.radius).collect();
        assert!(first.iter().all(|r| (r - 0.5).abs() <= 0.01 + 1e-15));
        assert!(first.iter().any(|r| (r - 0.5).abs() > 1e-4));
        assert!(c.spheres[10..].iter().all(|s| s.radius == 0.5));
    }

    #[test]
    fn sticky_deposits_grow_linearly() {
        // Mean height of the top layer rises in proportion to n / area.
        let heights: Vec<f64> = [250usize, 500, 750, 1000]
            .iter()
            .map(|&n| {
                let c = vold_ballistic(&VoldParams { n, dim: 3, p_stick: 1.0, lateral: Some(8.0) }, 40).unwrap();
                c.spheres.iter().map(|s| s.center.z).sum::<f64>() / n as f64
            })
            .collect();
        let xs = [250.0, 500.0, 750.0, 1000.0];
        let mx = xs.iter().sum::<f64>() / 4.0;
        let my = heights.iter().sum::<f64>() / 4.0;
        let sxy: f64 = xs.iter().zip(&heights).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let syy: f64 = heights.iter().map(|y| (y - my).powi(2)).sum();
        let slope = sxy / sxx;
        assert!(slope > 0.0);
        assert!(sxy * sxy / (sxx * syy) > 0.99, "not linear");
    }

    #[test]
    fn zero_shake_is_plain_redeposition() {
        let vb = visscher_bolsterli(&VbParams { n: 300, dim: 3, k_drops: 1, lateral: None }, 5).unwrap();
        let params = ShakeParams {
            sigma_up: 0.0,
            sigma_move: 0.0,
            collision_threshold: 1,
            sweeps: 0,
        };
        let shaken = shake_redeposit(&vb, &params, 1).unwrap().configuration;
        assert_eq!(shaken.spheres, redeposit(&vb).unwrap().spheres);
    }

    #[test]
    fn redeposition_fixes_settled_stacks() {
        // A base layer with spheres in its pockets is already settled.
        let mut spheres = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                spheres.push(Sphere::new(Vec3::new(i as f64 + 0.5, j as f64 + 0.5, 0.5), 0.5));
            }
        }
        for i in 0..5 {
            for j in 0..5 {
                spheres.push(Sphere::new(Vec3::new(i as f64 + 1.0, j as f64 + 1.0, 0.5 + 0.5f64.sqrt()), 0.5));
            }
        }
        let config = Configuration::new(
            3,
            spheres,
            Boundary::OpenWithBase { lateral: Vec3::new(5.0, 5.0, 0.0) },
            Provenance::default(),
        )
        .unwrap();
        let again = redeposit(&config).unwrap();
        for (a, b) in config.spheres.iter().zip(&again.spheres) {
            assert!(config.boundary.distance(&a.center, &b.center, 3) < 1e-12, "{:?} vs {:?}", a.center, b.center);
        }
    }

    #[test]
    fn shaken_packing_stays_valid() {
        let vb = visscher_bolsterli(&VbParams { n: 500, dim: 3, k_drops: 4, lateral: None }, 6).unwrap();
        let out = shake_redeposit(&vb, &ShakeParams::default(), 2).unwrap();
        assert!(min_gap(&out.configuration).unwrap() >= -1e-9);
        assert!(out.collisions > 0 && out.moves_accepted > 0);
        assert_eq!(out.configuration.len(), 500);
    }
}
