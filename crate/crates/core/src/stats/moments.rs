//! Random-set moments of the solid phase: volume fraction, covariance, mixed
//! moments and the spherical contact distribution.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use super::{check_grid, Estimate, Phase, RadialFunction, SampleDesign, Window};
use crate::error::{Error, Result};
use crate::geometry::{ball_volume, Configuration, Vec3};
use crate::grid::NeighborGrid;

/// Point-membership and surface-distance queries against a configuration.
pub(crate) struct SolidIndex<'a> {
    config: &'a Configuration,
    grid: NeighborGrid,
    rmax: f64,
    reach: f64,
}

impl<'a> SolidIndex<'a> {
    pub(crate) fn new(config: &'a Configuration) -> Self {
        let rmax = config.max_radius();
        let grid = config.grid((2.0 * rmax).max(1e-6));
        let (lo, hi) = config.region_extent();
        let reach = (hi - lo).norm() + 4.0 * rmax + 1.0;
        SolidIndex {
            config,
            grid,
            rmax,
            reach,
        }
    }

    pub(crate) fn is_solid(&self, p: &Vec3) -> bool {
        let mut hit = false;
        self.grid.for_each_within(p, self.rmax, |j, d| {
            if !hit && d.norm() <= self.config.spheres[j].radius {
                hit = true;
            }
        });
        hit
    }

    /// Signed distance from `p` to the nearest sphere surface.
    pub(crate) fn surface_distance(&self, p: &Vec3) -> f64 {
        if self.config.is_empty() {
            return f64::INFINITY;
        }
        let mut search = 2.0 * self.rmax;
        loop {
            let mut best = f64::INFINITY;
            self.grid.for_each_within(p, search, |j, d| {
                best = best.min(d.norm() - self.config.spheres[j].radius);
            });
            if best + self.rmax <= search {
                return best;
            }
            if search > self.reach {
                break;
            }
            search *= 2.0;
        }
        self.config
            .spheres
            .iter()
            .map(|s| self.config.boundary.distance(p, &s.center, self.config.dim) - s.radius)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Point-sampling estimate of the solid (or void) fraction in `window`.
pub fn volume_fraction(
    config: &Configuration,
    window: &Window,
    design: &SampleDesign,
    phase: Phase,
) -> Result<Estimate> {
    window.check_inside(config)?;
    let pts = design.points(window)?;
    let index = SolidIndex::new(config);
    let hits = pts.iter().filter(|p| index.is_solid(p)).count();
    let solid = Estimate::proportion(hits, pts.len());
    Ok(match phase {
        Phase::Solid => solid,
        Phase::Void => Estimate {
            value: 1.0 - solid.value,
            ..solid
        },
    })
}

/// Per-tile volume fraction estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalField {
    pub tiles: Vec<Window>,
    pub estimates: Vec<Estimate>,
    pub mean: f64,
    pub variance: f64,
    /// Some tile is narrower than a sphere diameter.
    pub high_variance: bool,
}

pub fn local_volume_fraction(
    config: &Configuration,
    window: &Window,
    counts: &[usize],
    design: &SampleDesign,
) -> Result<LocalField> {
    window.check_inside(config)?;
    let tiles = window.tiles(counts)?;
    let index = SolidIndex::new(config);
    let mut estimates = Vec::with_capacity(tiles.len());
    for (t, tile) in tiles.iter().enumerate() {
        let pts = design.for_tile(t).points(tile)?;
        let hits = pts.iter().filter(|p| index.is_solid(p)).count();
        estimates.push(Estimate::proportion(hits, pts.len()));
    }
    let n = estimates.len() as f64;
    let mean = estimates.iter().map(|e| e.value).sum::<f64>() / n;
    let variance = if estimates.len() > 1 {
        estimates.iter().map(|e| (e.value - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let diameter = 2.0 * config.max_radius();
    let high_variance = tiles
        .iter()
        .any(|w| (0..w.dim).any(|k| w.extent(k) < diameter));
    Ok(LocalField {
        tiles,
        estimates,
        mean,
        variance,
        high_variance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covariance {
    pub m1: Estimate,
    pub m2: RadialFunction,
}

/// Translated-window estimate of the covariance at each lag, averaged over
/// lags along the coordinate axes. The sample points are shared with the
/// volume fraction, so the zero-lag value equals it exactly.
pub fn covariance(
    config: &Configuration,
    window: &Window,
    lags: &[f64],
    design: &SampleDesign,
) -> Result<Covariance> {
    window.check_inside(config)?;
    check_grid(lags)?;
    let max = window.max_lag();
    if let Some(&r) = lags.iter().find(|&&r| r >= max) {
        return Err(Error::Window(format!("lag {r} is not below half the window ({max})")));
    }
    let pts = design.points(window)?;
    let index = SolidIndex::new(config);
    let solid: Vec<bool> = pts.iter().map(|p| index.is_solid(p)).collect();
    let m1 = Estimate::proportion(solid.iter().filter(|&&s| s).count(), pts.len());
    let mut m2 = RadialFunction::new("m2", "translated-window");
    for &r in lags {
        let mut kept = 0usize;
        let mut hits = 0usize;
        for axis in 0..window.dim {
            let mut t = Vec3::zeros();
            t[axis] = r;
            for (p, &s) in pts.iter().zip(&solid) {
                let q = p + t;
                if !window.contains(&q) {
                    continue;
                }
                kept += 1;
                if s && (r == 0.0 || index.is_solid(&q)) {
                    hits += 1;
                }
            }
        }
        let value = if kept > 0 { hits as f64 / kept as f64 } else { f64::NAN };
        m2.push(r, r, value, kept as u64);
    }
    Ok(Covariance { m1, m2 })
}

/// Second, third and mixed moments at a pair of lags from shared sample points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedMoment {
    /// `P(0, x solid)`.
    pub m2: f64,
    /// `P(0, x, y solid)`.
    pub m3: f64,
    /// `P(0, x solid, y void) = m2 - m3`.
    pub m110: f64,
    pub samples: usize,
}

pub fn mixed_moment(
    config: &Configuration,
    window: &Window,
    x: &Vec3,
    y: &Vec3,
    design: &SampleDesign,
) -> Result<MixedMoment> {
    window.check_inside(config)?;
    let pts = design.points(window)?;
    let index = SolidIndex::new(config);
    let (mut kept, mut c2, mut c3) = (0usize, 0usize, 0usize);
    for p in &pts {
        let (px, py) = (p + x, p + y);
        if !(window.contains(&px) && window.contains(&py)) {
            continue;
        }
        kept += 1;
        if index.is_solid(p) && index.is_solid(&px) {
            c2 += 1;
            if index.is_solid(&py) {
                c3 += 1;
            }
        }
    }
    if kept == 0 {
        return Err(Error::Window("no sample point has both lags inside the window".into()));
    }
    let n = kept as f64;
    Ok(MixedMoment {
        m2: c2 as f64 / n,
        m3: c3 as f64 / n,
        m110: (c2 - c3) as f64 / n,
        samples: kept,
    })
}

/// Empirical CDF of the distance from void sample points to the nearest
/// sphere surface.
pub fn spherical_contact(
    config: &Configuration,
    window: &Window,
    r_grid: &[f64],
    design: &SampleDesign,
) -> Result<RadialFunction> {
    check_grid(r_grid)?;
    let (dist, samples) = void_distances(config, window, design)?;
    let n = dist.len();
    let mut rf = RadialFunction::new("S", "none");
    rf.meta.insert("samples".into(), samples.to_string());
    for &r in r_grid {
        let below = dist.partition_point(|&d| d <= r);
        rf.push(r, r, below as f64 / n as f64, n as u64);
    }
    Ok(rf)
}

/// Sorted distances from the void sample points to the nearest sphere
/// surface.
pub fn void_surface_distances(config: &Configuration, window: &Window, design: &SampleDesign) -> Result<Vec<f64>> {
    Ok(void_distances(config, window, design)?.0)
}

fn void_distances(config: &Configuration, window: &Window, design: &SampleDesign) -> Result<(Vec<f64>, usize)> {
    window.check_inside(config)?;
    let pts = design.points(window)?;
    let index = SolidIndex::new(config);
    let mut dist: Vec<f64> = pts
        .iter()
        .map(|p| index.surface_distance(p))
        .filter(|&d| d > 0.0)
        .collect();
    if dist.is_empty() {
        return Err(Error::Window("no sample point falls in the void".into()));
    }
    dist.sort_by(f64::total_cmp);
    Ok((dist, pts.len()))
}

fn gauss_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(48).unwrap()))
}

/// Area of the disc with center `(cx, cy)` and radius `r` inside the
/// rectangle `[x0, x1] × [y0, y1]`, in closed form.
pub fn disc_rect_area(cx: f64, cy: f64, r: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    if !(r > 0.0) || y1 <= y0 {
        return 0.0;
    }
    // Center-relative coordinates keep the clipped ends at exactly ±r.
    let (y0, y1) = (y0 - cy, y1 - cy);
    let a = (x0 - cx).max(-r);
    let b = (x1 - cx).min(r);
    if a >= b {
        return 0.0;
    }
    let r2 = r * r;
    // Antiderivative of sqrt(r² - t²).
    let prim = |t: f64| {
        let t = t.clamp(-r, r);
        0.5 * (t * (r2 - t * t).max(0.0).sqrt() + r2 * (t / r).asin())
    };
    let mut cuts = vec![a, b];
    for y in [y0, y1] {
        if y.abs() < r {
            let h = (r2 - y * y).sqrt();
            for x in [-h, h] {
                if x > a && x < b {
                    cuts.push(x);
                }
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    let mut area = 0.0;
    for w in cuts.windows(2) {
        let (u, v) = (w[0], w[1]);
        if v <= u {
            continue;
        }
        let m = 0.5 * (u + v);
        let h = (r2 - m * m).max(0.0).sqrt();
        let top_arc = h < y1;
        let bottom_arc = -h > y0;
        let top = if top_arc { h } else { y1 };
        let bottom = if bottom_arc { -h } else { y0 };
        if top <= bottom {
            continue;
        }
        let arc = prim(v) - prim(u);
        let upper = if top_arc { arc } else { y1 * (v - u) };
        let lower = if bottom_arc { -arc } else { y0 * (v - u) };
        area += upper - lower;
    }
    area
}

/// Volume of the ball with center `c` and radius `r` inside the box
/// `[lo, hi]`: slice areas in closed form, integrated over height between
/// the heights where the slice touches an edge line or corner of the box.
pub fn ball_box_volume(c: &Vec3, r: f64, lo: &Vec3, hi: &Vec3) -> f64 {
    let z0 = lo.z.max(c.z - r);
    let z1 = hi.z.min(c.z + r);
    if !(r > 0.0) || z0 >= z1 {
        return 0.0;
    }
    let inside = (0..3).all(|k| c[k] - r >= lo[k] && c[k] + r <= hi[k]);
    if inside {
        return ball_volume(3, r);
    }
    let dx = [c.x - lo.x, hi.x - c.x];
    let dy = [c.y - lo.y, hi.y - c.y];
    let mut ts: Vec<f64> = dx.iter().chain(&dy).map(|t| t.abs()).collect();
    for a in dx {
        for b in dy {
            ts.push(a.hypot(b));
        }
    }
    let mut cuts = vec![z0, z1];
    for t in ts {
        if t < r {
            let h = (r * r - t * t).sqrt();
            for z in [c.z - h, c.z + h] {
                if z > z0 && z < z1 {
                    cuts.push(z);
                }
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let rule = gauss_rule();
    let mut vol = 0.0;
    for w in cuts.windows(2) {
        let (u, v) = (w[0], w[1]);
        // Smoothstep substitution flattens the half-integer kinks at the cuts.
        vol += rule.integrate(0.0, 1.0, |s| {
            let z = u + (v - u) * s * s * (3.0 - 2.0 * s);
            let rho = (r * r - (z - c.z) * (z - c.z)).max(0.0).sqrt();
            let jac = 6.0 * s * (1.0 - s) * (v - u);
            disc_rect_area(c.x, c.y, rho, lo.x, hi.x, lo.y, hi.y) * jac
        });
    }
    vol
}

/// Solid fraction of `window` from exact sphere-window intersections,
/// assuming the spheres do not overlap.
pub fn exact_volume_fraction(config: &Configuration, window: &Window) -> Result<f64> {
    window.check_inside(config)?;
    if window.toroidal {
        return Ok(config.solid_volume() / window.volume());
    }
    let dim = config.dim;
    let mut shifts: Vec<Vec3> = vec![Vec3::zeros()];
    for k in 0..dim {
        if let Some(l) = config.boundary.period(k, dim) {
            let mut more = Vec::new();
            for s in &shifts {
                for sign in [-1.0, 1.0] {
                    let mut t = *s;
                    t[k] += sign * l;
                    more.push(t);
                }
            }
            shifts.extend(more);
        }
    }
    let mut solid = 0.0;
    for s in &config.spheres {
        for t in &shifts {
            let c = s.center + t;
            let r = s.radius;
            if (0..dim).any(|k| c[k] + r <= window.lo[k] || c[k] - r >= window.hi[k]) {
                continue;
            }
            solid += if dim == 2 {
                disc_rect_area(c.x, c.y, r, window.lo.x, window.hi.x, window.lo.y, window.hi.y)
            } else {
                ball_box_volume(&c, r, &window.lo, &window.hi)
            };
        }
    }
    Ok(solid / window.volume())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{lattice, Boundary, Provenance, Sphere};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn config(dim: usize, centers: &[Vec3], r: f64, boundary: Boundary) -> Configuration {
        let spheres = centers.iter().map(|&c| Sphere::new(c, r)).collect();
        Configuration::new(dim, spheres, boundary, Provenance::new("test", 0)).unwrap()
    }

    /// Non-overlapping discs (2D) by sequential rejection in a periodic square.
    fn random_discs(seed: u64, n: usize, l: f64) -> Configuration {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = Boundary::Periodic {
            extents: Vec3::new(l, l, 0.0),
        };
        let mut pts: Vec<Vec3> = Vec::new();
        while pts.len() < n {
            let p = Vec3::new(rng.random::<f64>() * l, rng.random::<f64>() * l, 0.0);
            if pts.iter().all(|q| b.distance(&p, q, 2) >= 1.0) {
                pts.push(p);
            }
        }
        config(2, &pts, 0.5, b)
    }

    fn brute_solid(c: &Configuration, p: &Vec3) -> bool {
        c.spheres
            .iter()
            .any(|s| c.boundary.distance(p, &s.center, c.dim) <= s.radius)
    }

    #[test]
    fn disc_rect_closed_form() {
        let r = 0.7;
        assert!((disc_rect_area(0.0, 0.0, r, -1.0, 1.0, -1.0, 1.0) - PI * r * r).abs() < 1e-14);
        assert!((disc_rect_area(0.0, 0.0, r, 0.0, 1.0, -1.0, 1.0) - PI * r * r / 2.0).abs() < 1e-14);
        assert!((disc_rect_area(0.0, 0.0, r, 0.0, 1.0, 0.0, 1.0) - PI * r * r / 4.0).abs() < 1e-14);
        assert_eq!(disc_rect_area(0.0, 0.0, r, 0.8, 1.0, 0.0, 1.0), 0.0);
        // Square inscribed in the disc.
        let s = r / 2f64.sqrt();
        assert!((disc_rect_area(0.0, 0.0, r, -s, s, -s, s) - 4.0 * s * s).abs() < 1e-14);
    }

    #[test]
    fn ball_box_symmetric_pieces() {
        let r = 0.5;
        let full = 4.0 / 3.0 * PI * r * r * r;
        let c = Vec3::new(1.0, 1.0, 1.0);
        let hi = Vec3::repeat(3.0);
        assert_eq!(ball_box_volume(&c, r, &Vec3::zeros(), &hi), full);
        let half = ball_box_volume(&c, r, &Vec3::new(1.0, 0.0, 0.0), &hi);
        assert!((half - full / 2.0).abs() < 1e-14, "{half}");
        let quarter = ball_box_volume(&c, r, &Vec3::new(1.0, 1.0, 0.0), &hi);
        assert!((quarter - full / 4.0).abs() < 1e-14);
        let eighth = ball_box_volume(&c, r, &Vec3::new(1.0, 1.0, 1.0), &hi);
        assert!((eighth - full / 8.0).abs() < 1e-14);
        // Spherical cap of height h: π h² (3r - h) / 3.
        let h = 0.3;
        let cap = ball_box_volume(&c, r, &Vec3::new(0.0, 0.0, 1.0 + r - h), &hi);
        assert!((cap - PI * h * h * (3.0 * r - h) / 3.0).abs() < 1e-14, "{cap}");
    }

    #[test]
    fn ball_box_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = Vec3::new(0.2, 0.3, 0.15);
        let (lo, hi) = (Vec3::new(0.0, -0.1, 0.05), Vec3::new(0.5, 0.45, 1.0));
        let r = 0.4;
        let exact = ball_box_volume(&c, r, &lo, &hi);
        let n = 2_000_000;
        let mut hits = 0;
        for _ in 0..n {
            let p = Vec3::new(
                lo.x + (hi.x - lo.x) * rng.random::<f64>(),
                lo.y + (hi.y - lo.y) * rng.random::<f64>(),
                lo.z + (hi.z - lo.z) * rng.random::<f64>(),
            );
            hits += ((p - c).norm() <= r) as usize;
        }
        let box_vol = (hi - lo).product();
        let p = hits as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt() * box_vol;
        assert!((p * box_vol - exact).abs() < 4.0 * se, "{} vs {exact}", p * box_vol);
    }

    proptest! {
        #[test]
        fn intersections_are_additive(
            cx in -1.0f64..1.0, cy in -1.0f64..1.0, cz in -1.0f64..1.0,
            r in 0.1f64..1.2, split in -0.9f64..0.9, axis in 0usize..3,
        ) {
            let c = Vec3::new(cx, cy, cz);
            let (lo, hi) = (Vec3::repeat(-1.0), Vec3::repeat(1.0));
            let mut mid_hi = hi;
            mid_hi[axis] = split;
            let mut mid_lo = lo;
            mid_lo[axis] = split;
            let whole = ball_box_volume(&c, r, &lo, &hi);
            let parts = ball_box_volume(&c, r, &lo, &mid_hi) + ball_box_volume(&c, r, &mid_lo, &hi);
            prop_assert!((whole - parts).abs() < 1e-12, "{whole} vs {parts}");
            prop_assert!(whole <= 4.0 / 3.0 * PI * r.powi(3) + 1e-12);
            let a2 = disc_rect_area(cx, cy, r, -1.0, 1.0, -1.0, 1.0);
            let b2 = disc_rect_area(cx, cy, r, -1.0, split, -1.0, 1.0)
                + disc_rect_area(cx, cy, r, split, 1.0, -1.0, 1.0);
            prop_assert!((a2 - b2).abs() < 1e-13);
        }
    }

    #[test]
    fn single_sphere_volume_fraction() {
        let b = Boundary::HardBox {
            extents: Vec3::repeat(10.0),
        };
        let c = config(3, &[Vec3::repeat(5.0)], 1.0, b);
        let w = Window::of(&c).unwrap();
        let exact = exact_volume_fraction(&c, &w).unwrap();
        assert!((exact - 4.0 * PI / 3.0 / 1000.0).abs() < 1e-15);
        let est = volume_fraction(&c, &w, &SampleDesign::Grid { spacing: 0.1 }, Phase::Solid).unwrap();
        assert!((est.value - 0.00419).abs() < 5e-5, "{}", est.value);
    }

    #[test]
    fn hex_fraction_and_complement() {
        let (pts, ext) = lattice::hex_periodic(20, 24);
        let c = config(2, &pts, 0.5, Boundary::Periodic { extents: ext });
        let w = Window::of(&c).unwrap();
        let design = SampleDesign::UniformRandom { count: 400_000, seed: 9 };
        let solid = volume_fraction(&c, &w, &design, Phase::Solid).unwrap();
        let void = volume_fraction(&c, &w, &design, Phase::Void).unwrap();
        assert!((solid.value - PI / 12f64.sqrt()).abs() < 0.002, "{}", solid.value);
        assert_eq!(solid.value + void.value, 1.0);
        assert!((exact_volume_fraction(&c, &w).unwrap() - PI / 12f64.sqrt()).abs() < 1e-12);
        // A subwindow cutting through discs, through the intersection oracle.
        let sub = Window::boxed(2, Vec3::new(1.3, 2.1, 0.0), Vec3::new(13.7, 11.9, 0.0)).unwrap();
        let exact = exact_volume_fraction(&c, &sub).unwrap();
        let est = volume_fraction(&c, &sub, &design, Phase::Solid).unwrap();
        assert!((est.value - exact).abs() < 4.0 * est.std_error, "{} vs {exact}", est.value);
    }

    #[test]
    fn complement_sums_to_one_for_any_sample() {
        for seed in 0..20 {
            let c = random_discs(seed, 40, 12.0);
            let w = Window::of(&c).unwrap();
            let d = SampleDesign::UniformRandom { count: 777, seed };
            let s = volume_fraction(&c, &w, &d, Phase::Solid).unwrap();
            let v = volume_fraction(&c, &w, &d, Phase::Void).unwrap();
            assert_eq!(s.value + v.value, 1.0);
        }
    }

    #[test]
    fn covariance_at_zero_lag_is_volume_fraction() {
        let c = random_discs(2, 80, 14.0);
        let w = Window::boxed(2, Vec3::new(1.0, 1.0, 0.0), Vec3::new(13.0, 13.0, 0.0)).unwrap();
        for design in [
            SampleDesign::Grid { spacing: 0.05 },
            SampleDesign::UniformRandom { count: 50_000, seed: 4 },
        ] {
            let cov = covariance(&c, &w, &[0.0, 0.5, 1.0, 3.0], &design).unwrap();
            let m1 = volume_fraction(&c, &w, &design, Phase::Solid).unwrap();
            assert_eq!(cov.m2.values[0].to_bits(), cov.m1.value.to_bits());
            assert_eq!(cov.m1.value.to_bits(), m1.value.to_bits());
            assert!(cov.m2.values.iter().all(|&v| v <= cov.m1.value + 0.02));
        }
        assert!(covariance(&c, &w, &[6.0], &SampleDesign::Grid { spacing: 0.1 }).is_err());
    }

    #[test]
    fn covariance_decorrelates_at_large_lag() {
        let lag = 7.0;
        let diffs: Vec<f64> = (0..20)
            .map(|seed| {
                let c = random_discs(100 + seed, 90, 20.0);
                let w = Window::of(&c).unwrap();
                let d = SampleDesign::UniformRandom { count: 20_000, seed };
                let cov = covariance(&c, &w, &[lag], &d).unwrap();
                cov.m2.values[0] - cov.m1.value * cov.m1.value
            })
            .collect();
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(mean.abs() < 3.0 * sd / n.sqrt(), "mean {mean} sd {sd}");
    }

    #[test]
    fn mixed_moment_matches_direct_triples() {
        let c = random_discs(8, 90, 16.0);
        let w = Window::of(&c).unwrap();
        let x = Vec3::new(0.3, 0.1, 0.0);
        let y = Vec3::new(-0.2, 0.9, 0.0);
        let n = 200_000;
        let mm = mixed_moment(&c, &w, &x, &y, &SampleDesign::UniformRandom { count: n, seed: 1 }).unwrap();
        assert_eq!(mm.samples, n);
        assert!((mm.m110 - (mm.m2 - mm.m3)).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut hits = 0usize;
        for _ in 0..n {
            let p = Vec3::new(rng.random::<f64>() * 16.0, rng.random::<f64>() * 16.0, 0.0);
            if brute_solid(&c, &p) && brute_solid(&c, &(p + x)) && !brute_solid(&c, &(p + y)) {
                hits += 1;
            }
        }
        let direct = hits as f64 / n as f64;
        let se = (2.0 * direct * (1.0 - direct) / n as f64).sqrt();
        assert!((mm.m110 - direct).abs() < 4.0 * se, "{} vs {direct}", mm.m110);
        // With y inside the same disc as 0 whenever 0 is solid, m110 vanishes.
        let tiny = Vec3::new(1e-12, 0.0, 0.0);
        let none = mixed_moment(&c, &w, &x, &tiny, &SampleDesign::UniformRandom { count: 20_000, seed: 2 }).unwrap();
        assert!(none.m110 < 1e-3);
    }

    #[test]
    fn spherical_contact_single_sphere() {
        let b = Boundary::HardBox {
            extents: Vec3::repeat(10.0),
        };
        let c = config(3, &[Vec3::repeat(5.0)], 0.5, b);
        let w = Window::of(&c).unwrap();
        let grid = [0.0, 0.5, 1.0, 2.0, 3.0, 4.0];
        let n = 300_000;
        let s = spherical_contact(&c, &w, &grid, &SampleDesign::UniformRandom { count: n, seed: 3 }).unwrap();
        assert_eq!(s.values[0], 0.0);
        assert!(s.values.windows(2).all(|v| v[1] >= v[0]));
        let void = 1000.0 - ball_volume(3, 0.5);
        for (k, &r) in grid.iter().enumerate() {
            let want = (ball_volume(3, 0.5 + r) - ball_volume(3, 0.5)) / void;
            let se = (want * (1.0 - want) / n as f64).sqrt();
            assert!((s.values[k] - want).abs() <= 4.0 * se + 1e-12, "r={r}: {} vs {want}", s.values[k]);
        }
    }

    #[test]
    fn lattice_local_field_is_flat() {
        let (pts, ext) = lattice::hex_periodic(12, 12);
        let c = config(2, &pts, 0.5, Boundary::Periodic { extents: ext });
        let w = Window::of(&c).unwrap();
        let field = local_volume_fraction(&c, &w, &[3, 3], &SampleDesign::Grid { spacing: 0.02 }).unwrap();
        assert_eq!(field.estimates.len(), 9);
        assert!(!field.high_variance);
        assert!(field.variance < 1e-5, "{}", field.variance);
        assert!((field.mean - PI / 12f64.sqrt()).abs() < 3e-3);
        let fine = local_volume_fraction(&c, &w, &[16, 16], &SampleDesign::Grid { spacing: 0.05 }).unwrap();
        assert!(fine.high_variance);
    }

    #[test]
    fn toroidal_shift_by_grid_steps() {
        let c = random_discs(31, 60, 12.0);
        let w = Window::of(&c).unwrap();
        let d = SampleDesign::Grid { spacing: 0.125 };
        let a = volume_fraction(&c, &w, &d, Phase::Solid).unwrap();
        let shift = Vec3::new(3.0 * 0.125, 5.0 * 0.125, 0.0);
        let moved: Vec<Vec3> = c.spheres.iter().map(|s| c.boundary.wrap(&(s.center + shift), 2)).collect();
        let c2 = config(2, &moved, 0.5, c.boundary);
        let b = volume_fraction(&c2, &w, &d, Phase::Solid).unwrap();
        assert!((a.value - b.value).abs() < 1e-12);
    }
}
