//! Random-set and point-process estimators over sphere configurations.

mod moments;
mod points;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Boundary, Configuration, Vec3};
use crate::rng::rng_from_seed;

pub use moments::{
    ball_box_volume, covariance, disc_rect_area, exact_volume_fraction, local_volume_fraction,
    mixed_moment, spherical_contact, void_surface_distances, volume_fraction, Covariance, LocalField, MixedMoment,
};
pub use points::{
    k_function, local_intensity_disorder, neighbour_functions, pair_correlation, EdgeCorrection,
    IntensityDisorder, NeighbourFunctions, PairCorrelation,
};

/// Axis-aligned observation window.
///
/// A toroidal window is the whole cell of a periodic configuration; it has
/// no edges, so estimators need no edge correction on it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub dim: usize,
    pub lo: Vec3,
    pub hi: Vec3,
    pub toroidal: bool,
}

impl Window {
    pub fn boxed(dim: usize, lo: Vec3, hi: Vec3) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::param(format!("dimension must be 2 or 3, got {dim}")));
        }
        for k in 0..dim {
            if !(lo[k].is_finite() && hi[k].is_finite() && hi[k] > lo[k]) {
                return Err(Error::Window(format!("empty window along axis {k}")));
            }
        }
        let mut lo = lo;
        let mut hi = hi;
        for k in dim..3 {
            lo[k] = 0.0;
            hi[k] = 0.0;
        }
        Ok(Window {
            dim,
            lo,
            hi,
            toroidal: false,
        })
    }

    /// The full cell of a periodic configuration.
    pub fn torus(config: &Configuration) -> Result<Self> {
        match config.boundary {
            Boundary::Periodic { extents } => {
                let mut w = Window::boxed(config.dim, Vec3::zeros(), extents)?;
                w.toroidal = true;
                Ok(w)
            }
            _ => Err(Error::Window("toroidal window needs a periodic configuration".into())),
        }
    }

    /// Natural window of a configuration: the torus for periodic boxes, the
    /// box for hard boxes, otherwise the bounding box of the centers.
    pub fn of(config: &Configuration) -> Result<Self> {
        match config.boundary {
            Boundary::Periodic { .. } => Window::torus(config),
            Boundary::HardBox { extents } => Window::boxed(config.dim, Vec3::zeros(), extents),
            _ => {
                let (lo, hi) = config.bounding_box();
                Window::boxed(config.dim, lo, hi)
            }
        }
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn min_extent(&self) -> f64 {
        (0..self.dim).map(|k| self.extent(k)).fold(f64::INFINITY, f64::min)
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|k| self.extent(k)).product()
    }

    /// Largest admissible distance argument for second-order estimators.
    pub fn max_lag(&self) -> f64 {
        self.min_extent() / 2.0
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        self.toroidal || (0..self.dim).all(|k| p[k] >= self.lo[k] && p[k] <= self.hi[k])
    }

    /// Distance from `p` to the window edge; infinite on a torus.
    pub fn border_distance(&self, p: &Vec3) -> f64 {
        if self.toroidal {
            return f64::INFINITY;
        }
        (0..self.dim)
            .map(|k| (p[k] - self.lo[k]).min(self.hi[k] - p[k]))
            .fold(f64::INFINITY, f64::min)
    }

    /// `|W ∩ (W - t)|`.
    pub fn translated_overlap(&self, t: &Vec3) -> f64 {
        if self.toroidal {
            return self.volume();
        }
        (0..self.dim)
            .map(|k| (self.extent(k) - t[k].abs()).max(0.0))
            .product()
    }

    /// The window shrunk by `margin` on every side.
    pub fn eroded(&self, margin: f64) -> Result<Window> {
        let m = Vec3::repeat(margin);
        Window::boxed(self.dim, self.lo + m, self.hi - m)
    }

    /// Regular tiling with `counts[k]` tiles along axis `k`.
    pub fn tiles(&self, counts: &[usize]) -> Result<Vec<Window>> {
        if counts.len() != self.dim || counts.contains(&0) {
            return Err(Error::param("one positive tile count per axis required"));
        }
        let mut out = Vec::new();
        let nz = if self.dim == 3 { counts[2] } else { 1 };
        for iz in 0..nz {
            for iy in 0..counts[1] {
                for ix in 0..counts[0] {
                    let idx = [ix, iy, iz];
                    let mut lo = self.lo;
                    let mut hi = self.hi;
                    for k in 0..self.dim {
                        let w = self.extent(k) / counts[k] as f64;
                        lo[k] = self.lo[k] + w * idx[k] as f64;
                        hi[k] = if idx[k] + 1 == counts[k] { self.hi[k] } else { lo[k] + w };
                    }
                    out.push(Window::boxed(self.dim, lo, hi)?);
                }
            }
        }
        Ok(out)
    }

    fn check_inside(&self, config: &Configuration) -> Result<()> {
        if config.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: config.dim,
                found: self.dim,
            });
        }
        let tol = 1e-9;
        for k in 0..self.dim {
            if let Some(l) = config.boundary.extent(k, config.dim) {
                if self.lo[k] < -tol || self.hi[k] > l + tol {
                    return Err(Error::Window(format!("window leaves the region along axis {k}")));
                }
            }
        }
        if matches!(config.boundary, Boundary::OpenWithBase { .. }) && self.lo[self.dim - 1] < -tol {
            return Err(Error::Window("window extends below the base".into()));
        }
        Ok(())
    }
}

/// Arrangement of sampling locations inside a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SampleDesign {
    /// Centered regular grid with the given spacing.
    Grid { spacing: f64 },
    /// Independent uniform locations.
    UniformRandom { count: usize, seed: u64 },
}

const MAX_SAMPLES: usize = 50_000_000;

impl SampleDesign {
    pub fn points(&self, window: &Window) -> Result<Vec<Vec3>> {
        let dim = window.dim;
        match *self {
            SampleDesign::Grid { spacing } => {
                if !(spacing > 0.0 && spacing.is_finite()) {
                    return Err(Error::param("grid spacing must be positive"));
                }
                let mut m = [1usize; 3];
                let mut offset = [0.0; 3];
                let mut total = 1usize;
                for k in 0..dim {
                    let e = window.extent(k);
                    m[k] = ((e / spacing).floor() as usize).max(1);
                    offset[k] = (e - m[k] as f64 * spacing).max(0.0) / 2.0;
                    total = total.saturating_mul(m[k]);
                }
                if total > MAX_SAMPLES {
                    return Err(Error::param(format!("grid of {total} sample points is too fine")));
                }
                let mut out = Vec::with_capacity(total);
                for iz in 0..m[2] {
                    for iy in 0..m[1] {
                        for ix in 0..m[0] {
                            let idx = [ix, iy, iz];
                            let mut p = Vec3::zeros();
                            for k in 0..dim {
                                p[k] = window.lo[k] + offset[k] + spacing * (idx[k] as f64 + 0.5);
                            }
                            out.push(p);
                        }
                    }
                }
                Ok(out)
            }
            SampleDesign::UniformRandom { count, seed } => {
                if count == 0 {
                    return Err(Error::param("sample count must be at least 1"));
                }
                if count > MAX_SAMPLES {
                    return Err(Error::param(format!("{count} sample points is too many")));
                }
                let mut rng = rng_from_seed(seed);
                Ok((0..count)
                    .map(|_| {
                        let mut p = Vec3::zeros();
                        for k in 0..dim {
                            p[k] = window.lo[k] + window.extent(k) * rng.random::<f64>();
                        }
                        p
                    })
                    .collect())
            }
        }
    }

    fn for_tile(&self, tile: usize) -> SampleDesign {
        match *self {
            SampleDesign::UniformRandom { count, seed } => SampleDesign::UniformRandom {
                count,
                seed: crate::rng::derive_seed(seed, tile as u64),
            },
            grid => grid,
        }
    }
}

/// Proportion estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl Estimate {
    fn proportion(hits: usize, n: usize) -> Self {
        let p = hits as f64 / n as f64;
        Estimate {
            value: p,
            std_error: (p * (1.0 - p) / n as f64).sqrt(),
            samples: n,
        }
    }
}

/// Solid phase (inside a sphere) or its complement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Solid,
    Void,
}

/// Sphere centers observed through a window.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPattern {
    pub dim: usize,
    pub points: Vec<Vec3>,
    pub window: Window,
    /// Periodic for toroidal windows, otherwise `None`.
    pub boundary: Boundary,
}

impl PointPattern {
    pub fn new(points: Vec<Vec3>, window: Window) -> Result<Self> {
        if window.toroidal {
            return Err(Error::Window("use PointPattern::from_config for toroidal windows".into()));
        }
        if let Some(i) = points.iter().position(|p| !window.contains(p)) {
            return Err(Error::Window(format!("point {i} lies outside the window")));
        }
        Ok(PointPattern {
            dim: window.dim,
            points,
            window,
            boundary: Boundary::None,
        })
    }

    /// Centers of `config` falling in `window`.
    pub fn from_config(config: &Configuration, window: &Window) -> Result<Self> {
        window.check_inside(config)?;
        if window.toroidal {
            return Ok(PointPattern {
                dim: config.dim,
                points: config.centers(),
                window: *window,
                boundary: config.boundary,
            });
        }
        let points = config
            .spheres
            .iter()
            .map(|s| s.center)
            .filter(|c| window.contains(c))
            .collect();
        Ok(PointPattern {
            dim: config.dim,
            points,
            window: *window,
            boundary: Boundary::None,
        })
    }

    /// Homogeneous Poisson pattern of the given intensity.
    pub fn poisson(window: &Window, intensity: f64, seed: u64) -> Result<Self> {
        if !(intensity > 0.0 && intensity.is_finite()) {
            return Err(Error::param("intensity must be positive"));
        }
        let mut rng = rng_from_seed(seed);
        let mean = intensity * window.volume();
        let n = rand_distr::Poisson::new(mean)
            .map_err(|e| Error::param(e.to_string()))
            .map(|d| rng.sample(d) as usize)?;
        let points = (0..n)
            .map(|_| {
                let mut p = Vec3::zeros();
                for k in 0..window.dim {
                    p[k] = window.lo[k] + window.extent(k) * rng.random::<f64>();
                }
                p
            })
            .collect();
        let mut w = *window;
        w.toroidal = false;
        PointPattern::new(points, w)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn intensity(&self) -> f64 {
        self.len() as f64 / self.window.volume()
    }

    fn grid(&self, cell: f64) -> crate::grid::NeighborGrid {
        let mut g = crate::grid::NeighborGrid::new(self.dim, self.boundary, cell);
        for (i, p) in self.points.iter().enumerate() {
            g.insert(i, *p);
        }
        g
    }
}

/// Binned or gridded function of distance.
///
/// Gridded functions (CDFs evaluated at given radii) have `r_low == r_high`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialFunction {
    pub r_low: Vec<f64>,
    pub r_high: Vec<f64>,
    pub values: Vec<f64>,
    pub counts: Vec<u64>,
    pub estimator: String,
    pub correction: String,
    pub meta: BTreeMap<String, String>,
}

impl RadialFunction {
    pub fn new(estimator: &str, correction: &str) -> Self {
        RadialFunction {
            r_low: Vec::new(),
            r_high: Vec::new(),
            values: Vec::new(),
            counts: Vec::new(),
            estimator: estimator.to_string(),
            correction: correction.to_string(),
            meta: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, r_low: f64, r_high: f64, value: f64, count: u64) {
        self.r_low.push(r_low);
        self.r_high.push(r_high);
        self.values.push(value);
        self.counts.push(count);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Representative radius of row `k` (bin midpoint).
    pub fn r(&self, k: usize) -> f64 {
        0.5 * (self.r_low[k] + self.r_high[k])
    }

    /// Linear interpolation at `r` over the representative radii.
    pub fn value_at(&self, r: f64) -> f64 {
        let n = self.len();
        if n == 0 {
            return f64::NAN;
        }
        if r <= self.r(0) {
            return self.values[0];
        }
        for k in 1..n {
            let (r0, r1) = (self.r(k - 1), self.r(k));
            if r <= r1 {
                let t = if r1 > r0 { (r - r0) / (r1 - r0) } else { 1.0 };
                return self.values[k - 1] + t * (self.values[k] - self.values[k - 1]);
            }
        }
        self.values[n - 1]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.values.len();
        if self.r_low.len() != n || self.r_high.len() != n || self.counts.len() != n {
            return Err(Error::param("radial function columns differ in length"));
        }
        for k in 0..n {
            if !(self.r_low[k] <= self.r_high[k]) {
                return Err(Error::param(format!("row {k}: r_low above r_high")));
            }
            if k > 0 && !(self.r_high[k] > self.r_high[k - 1]) {
                return Err(Error::param(format!("row {k}: radii not increasing")));
            }
            if self.counts[k] > 0 && !self.values[k].is_finite() {
                return Err(Error::param(format!("row {k}: non-finite value")));
            }
        }
        Ok(())
    }

    /// Tab-separated table with `#` metadata lines.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# estimator\t{}", self.estimator).unwrap();
        writeln!(out, "# correction\t{}", self.correction).unwrap();
        for (k, v) in &self.meta {
            writeln!(out, "# {k}\t{v}").unwrap();
        }
        writeln!(out, "# r_low\tr_high\tvalue\tcount").unwrap();
        for k in 0..self.len() {
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                self.r_low[k], self.r_high[k], self.values[k], self.counts[k]
            )
            .unwrap();
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut rf = RadialFunction::new("", "");
        for (ln, line) in text.lines().enumerate() {
            let line_no = ln + 1;
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim_start();
                if let Some((key, value)) = rest.split_once('\t') {
                    match key {
                        "estimator" => rf.estimator = value.to_string(),
                        "correction" => rf.correction = value.to_string(),
                        "r_low" => {}
                        _ => {
                            rf.meta.insert(key.to_string(), value.to_string());
                        }
                    }
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected 4 columns, found {}", cols.len()),
                });
            }
            let num = |s: &str| -> Result<f64> {
                s.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: line_no,
                    msg: format!("bad number {s:?}: {e}"),
                })
            };
            let count = cols[3].trim().parse::<u64>().map_err(|e| Error::Parse {
                line: line_no,
                msg: format!("bad count {:?}: {e}", cols[3]),
            })?;
            rf.push(num(cols[0])?, num(cols[1])?, num(cols[2])?, count);
        }
        rf.validate()?;
        Ok(rf)
    }
}

fn check_grid(r_grid: &[f64]) -> Result<()> {
    if r_grid.is_empty() {
        return Err(Error::param("empty distance grid"));
    }
    if r_grid.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(Error::param("distances must be finite and nonnegative"));
    }
    if r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("distance grid must be strictly increasing"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_geometry() {
        let w = Window::boxed(2, Vec3::new(0.0, 0.0, 5.0), Vec3::new(4.0, 2.0, 9.0)).unwrap();
        assert_eq!(w.volume(), 8.0);
        assert_eq!(w.lo.z, 0.0);
        assert_eq!(w.translated_overlap(&Vec3::new(1.0, -0.5, 0.0)), 4.5);
        assert_eq!(w.border_distance(&Vec3::new(1.0, 0.5, 0.0)), 0.5);
        let tiles = w.tiles(&[4, 2]).unwrap();
        assert_eq!(tiles.len(), 8);
        assert!((tiles.iter().map(Window::volume).sum::<f64>() - 8.0).abs() < 1e-12);
        assert!(w.eroded(1.0).is_err());
        assert!(Window::boxed(3, Vec3::zeros(), Vec3::new(1.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn grid_design_is_centered() {
        let w = Window::boxed(2, Vec3::zeros(), Vec3::new(1.0, 1.0, 0.0)).unwrap();
        let pts = SampleDesign::Grid { spacing: 0.3 }.points(&w).unwrap();
        assert_eq!(pts.len(), 9);
        assert!((pts[0].x - 0.2).abs() < 1e-12);
        assert!((pts[8].y - 0.8).abs() < 1e-12);
        let a = SampleDesign::UniformRandom { count: 5, seed: 1 }.points(&w).unwrap();
        let b = SampleDesign::UniformRandom { count: 5, seed: 1 }.points(&w).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn radial_function_round_trip() {
        let mut rf = RadialFunction::new("g", "translation");
        rf.meta.insert("intensity".into(), "0.5".into());
        rf.push(0.0, 0.02, 0.1 + 0.2, 3);
        rf.push(0.02, 0.04, 1.0 / 3.0, 7);
        rf.push(0.04, 0.06, f64::NAN, 0);
        let back = RadialFunction::from_tsv(&rf.to_tsv()).unwrap();
        assert_eq!(back.estimator, "g");
        assert_eq!(back.meta["intensity"], "0.5");
        assert_eq!(back.values[0].to_bits(), rf.values[0].to_bits());
        assert_eq!(back.values[1].to_bits(), rf.values[1].to_bits());
        assert!(back.values[2].is_nan());
        let empty = RadialFunction::new("K", "none");
        let text = empty.to_tsv();
        assert!(text.lines().all(|l| l.starts_with('#')));
        assert!(RadialFunction::from_tsv(&text).unwrap().is_empty());
    }
}
