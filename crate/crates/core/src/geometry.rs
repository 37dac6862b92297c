//! Geometric substrate: spheres, boundary conditions, minimum-image
//! displacements and the interior/boundary split of a configuration.
//!
//! Lengths are in units of the nominal sphere diameter, so monodisperse
//! spheres have radius 0.5. Planar configurations store their points with a
//! zero third coordinate; the vertical (gravity) axis is the last active axis
//! (`y` in 2D, `z` in 3D).

use std::collections::BTreeMap;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::contacts::{self, ContactNetwork};
use crate::error::{Error, Result};
use crate::grid::NeighborGrid;
use crate::tessellation::Triangulation;

pub type Vec3 = Vector3<f64>;

/// Overlap tolerance for generator postconditions, in diameters.
pub const TOL_OVERLAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    pub center: Vec3,
    pub radius: f64,
}

impl Sphere {
    pub fn new(center: Vec3, radius: f64) -> Self {
        Sphere { center, radius }
    }
}

/// Volume (3D) or area (2D) of a ball of radius `r`.
pub fn ball_volume(dim: usize, r: f64) -> f64 {
    match dim {
        2 => std::f64::consts::PI * r * r,
        _ => 4.0 / 3.0 * std::f64::consts::PI * r * r * r,
    }
}

/// Volume of the unit ball, `b_d`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    ball_volume(dim, 1.0)
}

/// Region and boundary condition of a configuration.
///
/// Boxed regions occupy `[0, L_k)` along each active axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Boundary {
    /// Toroidal box.
    Periodic { extents: Vec3 },
    /// Box with hard walls.
    HardBox { extents: Vec3 },
    /// Hard base plane at height 0, open above, periodic along the lateral axes.
    OpenWithBase { lateral: Vec3 },
    /// Unbounded space.
    None,
}

impl Boundary {
    /// Period along `axis`, if that axis wraps.
    #[inline]
    pub fn period(&self, axis: usize, dim: usize) -> Option<f64> {
        match self {
            Boundary::Periodic { extents } if axis < dim => Some(extents[axis]),
            Boundary::OpenWithBase { lateral } if axis + 1 < dim => Some(lateral[axis]),
            _ => None,
        }
    }

    /// Finite extent along `axis`, if the region is bounded along it.
    pub fn extent(&self, axis: usize, dim: usize) -> Option<f64> {
        match self {
            Boundary::Periodic { extents } | Boundary::HardBox { extents } if axis < dim => {
                Some(extents[axis])
            }
            Boundary::OpenWithBase { lateral } if axis + 1 < dim => Some(lateral[axis]),
            _ => None,
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, Boundary::Periodic { .. })
    }

    /// Minimum-image displacement `q - p`.
    #[inline]
    pub fn delta(&self, p: &Vec3, q: &Vec3, dim: usize) -> Vec3 {
        let mut d = q - p;
        for axis in 0..dim {
            if let Some(l) = self.period(axis, dim) {
                d[axis] -= l * (d[axis] / l).round();
            }
        }
        d
    }

    #[inline]
    pub fn distance(&self, p: &Vec3, q: &Vec3, dim: usize) -> f64 {
        self.delta(p, q, dim).norm()
    }

    /// Map a point back into the primary cell along periodic axes.
    pub fn wrap(&self, p: &Vec3, dim: usize) -> Vec3 {
        let mut w = *p;
        for axis in 0..dim {
            if let Some(l) = self.period(axis, dim) {
                w[axis] = w[axis].rem_euclid(l);
                if w[axis] >= l {
                    w[axis] = 0.0;
                }
            }
        }
        w
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let check = |v: &Vec3, n: usize| -> Result<()> {
            for k in 0..n {
                if !(v[k].is_finite() && v[k] > 0.0) {
                    return Err(Error::param(format!("boundary extent {k} must be > 0")));
                }
            }
            Ok(())
        };
        match self {
            Boundary::Periodic { extents } | Boundary::HardBox { extents } => check(extents, dim),
            Boundary::OpenWithBase { lateral } => check(lateral, dim - 1),
            Boundary::None => Ok(()),
        }
    }

    /// Whether `p` lies in the region (after wrapping periodic axes).
    pub fn contains(&self, p: &Vec3, dim: usize) -> bool {
        let w = self.wrap(p, dim);
        match self {
            Boundary::Periodic { extents } | Boundary::HardBox { extents } => {
                (0..dim).all(|k| w[k] >= 0.0 && w[k] <= extents[k])
            }
            Boundary::OpenWithBase { lateral } => {
                (0..dim - 1).all(|k| w[k] >= 0.0 && w[k] <= lateral[k]) && w[dim - 1] >= 0.0
            }
            Boundary::None => true,
        }
    }

    /// Region volume (area in 2D); `None` for unbounded regions.
    pub fn volume(&self, dim: usize) -> Option<f64> {
        match self {
            Boundary::Periodic { extents } | Boundary::HardBox { extents } => {
                Some((0..dim).map(|k| extents[k]).product())
            }
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Boundary::Periodic { .. } => "periodic",
            Boundary::HardBox { .. } => "hardbox",
            Boundary::OpenWithBase { .. } => "open-base",
            Boundary::None => "none",
        }
    }
}

/// Where a configuration came from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub algorithm: String,
    pub params: BTreeMap<String, String>,
    pub seed: u64,
}

impl Provenance {
    pub fn new(algorithm: &str, seed: u64) -> Self {
        Provenance {
            algorithm: algorithm.to_string(),
            params: BTreeMap::new(),
            seed,
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }
}

/// A finite set of spheres with its boundary and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    pub dim: usize,
    pub spheres: Vec<Sphere>,
    pub boundary: Boundary,
    pub provenance: Provenance,
}

impl Configuration {
    pub fn new(
        dim: usize,
        spheres: Vec<Sphere>,
        boundary: Boundary,
        provenance: Provenance,
    ) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::param(format!("dimension must be 2 or 3, got {dim}")));
        }
        boundary.validate(dim)?;
        for (i, s) in spheres.iter().enumerate() {
            if !(s.radius.is_finite() && s.radius > 0.0) {
                return Err(Error::param(format!("sphere {i} has non-positive radius")));
            }
            if !s.center.iter().all(|c| c.is_finite()) {
                return Err(Error::param(format!("sphere {i} has a non-finite center")));
            }
            if dim == 2 && s.center.z != 0.0 {
                return Err(Error::DimensionMismatch {
                    expected: 2,
                    found: 3,
                });
            }
            if !boundary.contains(&s.center, dim) {
                return Err(Error::param(format!("sphere {i} lies outside the region")));
            }
        }
        Ok(Configuration {
            dim,
            spheres,
            boundary,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.spheres.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spheres.is_empty()
    }

    pub fn centers(&self) -> Vec<Vec3> {
        self.spheres.iter().map(|s| s.center).collect()
    }

    pub fn max_radius(&self) -> f64 {
        self.spheres.iter().map(|s| s.radius).fold(0.0, f64::max)
    }

    #[inline]
    pub fn delta(&self, i: usize, j: usize) -> Vec3 {
        self.boundary
            .delta(&self.spheres[i].center, &self.spheres[j].center, self.dim)
    }

    /// Surface gap between spheres `i` and `j`.
    #[inline]
    pub fn gap(&self, i: usize, j: usize) -> f64 {
        self.delta(i, j).norm() - self.spheres[i].radius - self.spheres[j].radius
    }

    /// Total sphere volume (area in 2D).
    pub fn solid_volume(&self) -> f64 {
        self.spheres
            .iter()
            .map(|s| ball_volume(self.dim, s.radius))
            .sum()
    }

    /// Neighbor grid over the centers with cells no smaller than `min_cell`.
    pub fn grid(&self, min_cell: f64) -> NeighborGrid {
        NeighborGrid::build(self, min_cell)
    }

    /// Axis-aligned bounding box of the sphere centers.
    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for s in &self.spheres {
            for k in 0..self.dim {
                lo[k] = lo[k].min(s.center[k]);
                hi[k] = hi[k].max(s.center[k]);
            }
        }
        for k in self.dim..3 {
            lo[k] = 0.0;
            hi[k] = 0.0;
        }
        (lo, hi)
    }

    /// Spatial extent used to place synthetic hull points and ghost layers.
    pub fn region_extent(&self) -> (Vec3, Vec3) {
        let (mut lo, mut hi) = self.bounding_box();
        for k in 0..self.dim {
            if let Some(l) = self.boundary.extent(k, self.dim) {
                lo[k] = lo[k].min(0.0);
                hi[k] = hi[k].max(l);
            }
        }
        (lo, hi)
    }
}

/// Minimum-image displacement `q - p` for coordinate slices.
pub fn periodic_displacement(p: &[f64], q: &[f64], boundary: &Boundary) -> Result<Vec<f64>> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    let dim = p.len();
    if dim != 2 && dim != 3 {
        return Err(Error::param(format!("dimension must be 2 or 3, got {dim}")));
    }
    let to3 = |v: &[f64]| Vec3::new(v[0], v[1], if dim == 3 { v[2] } else { 0.0 });
    let d = boundary.delta(&to3(p), &to3(q), dim);
    Ok(d.iter().take(dim).copied().collect())
}

/// Smallest surface gap over all pairs; negative values are overlaps.
pub fn min_gap(config: &Configuration) -> Result<f64> {
    let n = config.len();
    if n < 2 {
        return Err(Error::TooFewSpheres { needed: 2, have: n });
    }
    min_gap_pair(config).map(|(_, _, g)| g)
}

/// Like [`min_gap`] but also reports the pair attaining it.
pub fn min_gap_pair(config: &Configuration) -> Result<(usize, usize, f64)> {
    let n = config.len();
    if n < 2 {
        return Err(Error::TooFewSpheres { needed: 2, have: n });
    }
    let rmax = config.max_radius();
    let reach = 2.0 * rmax + 1.0;
    let grid = config.grid(reach);
    let mut best = (0, 1, f64::INFINITY);
    for i in 0..n {
        grid.for_each_within(&config.spheres[i].center, reach, |j, _| {
            if j > i {
                let g = config.gap(i, j);
                if g < best.2 {
                    best = (i, j, g);
                }
            }
        });
    }
    if best.2 < reach - 2.0 * rmax {
        return Ok(best);
    }
    // Sparse pattern: no pair inside the grid reach, fall back to a full scan.
    for i in 0..n {
        for j in i + 1..n {
            let g = config.gap(i, j);
            if g < best.2 {
                best = (i, j, g);
            }
        }
    }
    Ok(best)
}

/// Interior / boundary / free-boundary split.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SpherePartition {
    pub interior: Vec<usize>,
    pub boundary: Vec<usize>,
    /// Boundary spheres that fail the local jam check.
    pub free_boundary: Vec<usize>,
}

impl SpherePartition {
    pub fn is_interior(&self, i: usize) -> bool {
        self.interior.binary_search(&i).is_ok()
    }
}

/// Interior spheres have no triangulation edge to a synthetic hull point.
pub fn classify_spheres(
    config: &Configuration,
    tri: &Triangulation,
    net: &ContactNetwork,
) -> Result<SpherePartition> {
    if tri.sphere_count() != config.len() || net.n != config.len() {
        return Err(Error::TriangulationMismatch(format!(
            "triangulation over {} spheres, network over {}, configuration has {}",
            tri.sphere_count(),
            net.n,
            config.len()
        )));
    }
    let on_hull = tri.touches_synthetic();
    let mut part = SpherePartition::default();
    for i in 0..config.len() {
        if on_hull[i] {
            part.boundary.push(i);
            if !contacts::local_jam_check(config, net, i) {
                part.free_boundary.push(i);
            }
        } else {
            part.interior.push(i);
        }
    }
    Ok(part)
}

/// Sphere centers laid out on simple lattices; used by tests, examples and
/// benchmarks.
pub mod lattice {
    use super::Vec3;

    /// Triangular (hexagonal close packed) patch of discs with unit spacing,
    /// all sites within `rings` hexagonal rings of the origin.
    pub fn hex_patch(rings: i32) -> Vec<Vec3> {
        let mut pts = Vec::new();
        for a in -rings..=rings {
            for b in -rings..=rings {
                let c = -a - b;
                if c.abs() <= rings {
                    let x = a as f64 + 0.5 * b as f64;
                    let y = b as f64 * 3f64.sqrt() / 2.0;
                    pts.push(Vec3::new(x, y, 0.0));
                }
            }
        }
        pts
    }

    /// Periodic triangular lattice filling an `nx` by `ny` box (ny even).
    pub fn hex_periodic(nx: usize, ny: usize) -> (Vec<Vec3>, Vec3) {
        let h = 3f64.sqrt() / 2.0;
        let mut pts = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let x = i as f64 + if j % 2 == 1 { 0.5 } else { 0.0 } + 0.25;
                pts.push(Vec3::new(x, j as f64 * h + h / 2.0, 0.0));
            }
        }
        (pts, Vec3::new(nx as f64, ny as f64 * h, 0.0))
    }

    /// Simple cubic block with the given spacing, `m` sites per edge.
    pub fn simple_cubic(m: usize, spacing: f64) -> Vec<Vec3> {
        let mut pts = Vec::new();
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    pts.push(Vec3::new(i as f64, j as f64, k as f64) * spacing);
                }
            }
        }
        pts
    }

    /// FCC sites with unit nearest-neighbor distance inside a ball.
    pub fn fcc_ball(radius: f64) -> Vec<Vec3> {
        let a = 2f64.sqrt();
        let m = (radius / a).ceil() as i32 + 1;
        let basis = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.5, 0.5, 0.0),
            Vec3::new(0.5, 0.0, 0.5),
            Vec3::new(0.0, 0.5, 0.5),
        ];
        let mut pts = Vec::new();
        for i in -m..=m {
            for j in -m..=m {
                for k in -m..=m {
                    for b in &basis {
                        let p = (Vec3::new(i as f64, j as f64, k as f64) + b) * a;
                        if p.norm() <= radius + 1e-9 {
                            pts.push(p);
                        }
                    }
                }
            }
        }
        pts
    }

    /// Periodic FCC crystal with `m` conventional cells per edge.
    pub fn fcc_periodic(m: usize) -> (Vec<Vec3>, Vec3) {
        let a = 2f64.sqrt();
        let basis = [
            Vec3::new(0.25, 0.25, 0.25),
            Vec3::new(0.75, 0.75, 0.25),
            Vec3::new(0.75, 0.25, 0.75),
            Vec3::new(0.25, 0.75, 0.75),
        ];
        let mut pts = Vec::new();
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for b in &basis {
                        pts.push((Vec3::new(i as f64, j as f64, k as f64) + b) * a);
                    }
                }
            }
        }
        (pts, Vec3::repeat(m as f64 * a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn unit_pair(d: f64) -> Configuration {
        Configuration::new(
            3,
            vec![
                Sphere::new(Vec3::new(0.0, 0.0, 0.0), 1.0),
                Sphere::new(Vec3::new(d, 0.0, 0.0), 1.0),
            ],
            Boundary::None,
            Provenance::default(),
        )
        .unwrap()
    }

    #[test]
    fn displacement_minimum_image() {
        let b = Boundary::Periodic {
            extents: Vec3::new(10.0, 10.0, 0.0),
        };
        let d = periodic_displacement(&[0.1, 0.1], &[9.9, 9.9], &b).unwrap();
        assert_abs_diff_eq!(d[0], -0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(d[1], -0.2, epsilon = 1e-12);
        let z = periodic_displacement(&[3.0, 4.0], &[3.0, 4.0], &b).unwrap();
        assert_eq!(z, vec![0.0, 0.0]);
    }

    #[test]
    fn displacement_hard_box_is_plain_difference() {
        let b = Boundary::HardBox {
            extents: Vec3::new(10.0, 10.0, 0.0),
        };
        let d = periodic_displacement(&[0.0, 0.0], &[3.0, 4.0], &b).unwrap();
        assert_eq!(d, vec![3.0, 4.0]);
        assert_abs_diff_eq!((d[0] * d[0] + d[1] * d[1]).sqrt(), 5.0);
    }

    #[test]
    fn displacement_dimension_mismatch() {
        let r = periodic_displacement(&[0.0, 0.0], &[1.0, 2.0, 3.0], &Boundary::None);
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn min_gap_examples() {
        assert_abs_diff_eq!(min_gap(&unit_pair(2.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(min_gap(&unit_pair(1.9)).unwrap(), -0.1, epsilon = 1e-12);
        let periodic = Configuration::new(
            3,
            vec![
                Sphere::new(Vec3::new(0.5, 5.0, 5.0), 1.0),
                Sphere::new(Vec3::new(9.5, 5.0, 5.0), 1.0),
            ],
            Boundary::Periodic {
                extents: Vec3::repeat(10.0),
            },
            Provenance::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(min_gap(&periodic).unwrap(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn min_gap_needs_two_spheres() {
        let c = Configuration::new(
            3,
            vec![Sphere::new(Vec3::zeros(), 0.5)],
            Boundary::None,
            Provenance::default(),
        )
        .unwrap();
        assert!(matches!(min_gap(&c), Err(Error::TooFewSpheres { .. })));
    }

    #[test]
    fn min_gap_sparse_pattern_falls_back() {
        assert_abs_diff_eq!(min_gap(&unit_pair(50.0)).unwrap(), 48.0);
    }

    #[test]
    fn rejects_bad_spheres() {
        let bad = Configuration::new(
            3,
            vec![Sphere::new(Vec3::zeros(), 0.0)],
            Boundary::None,
            Provenance::default(),
        );
        assert!(bad.is_err());
        let outside = Configuration::new(
            3,
            vec![Sphere::new(Vec3::new(11.0, 1.0, 1.0), 0.5)],
            Boundary::HardBox {
                extents: Vec3::repeat(10.0),
            },
            Provenance::default(),
        );
        assert!(outside.is_err());
    }

    proptest! {
        #[test]
        fn displacement_bounded_by_half_diagonal(
            p in prop::array::uniform3(0.0f64..7.0),
            q in prop::array::uniform3(0.0f64..7.0),
        ) {
            let ext = Vec3::new(7.0, 5.0, 3.0);
            let b = Boundary::Periodic { extents: ext };
            let pp = Vec3::new(p[0], p[1] * 5.0 / 7.0, p[2] * 3.0 / 7.0);
            let qq = Vec3::new(q[0], q[1] * 5.0 / 7.0, q[2] * 3.0 / 7.0);
            let d = b.delta(&pp, &qq, 3);
            prop_assert!(d.norm() <= ext.norm() / 2.0 + 1e-12);
            for k in 0..3 {
                prop_assert!(d[k].abs() <= ext[k] / 2.0 + 1e-12);
            }
        }
    }
}
