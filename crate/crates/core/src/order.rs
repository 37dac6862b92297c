//! Bond-orientational order and planar defect counts.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::contacts::ContactNetwork;
use crate::error::{Error, Result};
use crate::geometry::{Configuration, Vec3};
use crate::tessellation::Triangulation;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BondSource {
    Contacts,
    Neighbors,
}

/// Unit bond vectors of a set of scored spheres.
#[derive(Debug, Clone, PartialEq)]
pub struct BondSet {
    pub dim: usize,
    pub spheres: Vec<usize>,
    pub bonds: Vec<Vec<Vec3>>,
    pub sources: Vec<BondSource>,
}

impl BondSet {
    /// Contact bonds of `spheres`; a sphere with fewer than four contacts
    /// falls back to its Delaunay neighbors.
    pub fn from_contacts(
        config: &Configuration,
        net: &ContactNetwork,
        tri: &Triangulation,
        spheres: &[usize],
    ) -> Self {
        let adj = net.adjacency();
        let nb = tri.sphere_neighbors();
        let mut set = BondSet {
            dim: config.dim,
            spheres: spheres.to_vec(),
            bonds: Vec::with_capacity(spheres.len()),
            sources: Vec::with_capacity(spheres.len()),
        };
        for &i in spheres {
            let (list, src) = if adj[i].len() >= 4 {
                (&adj[i], BondSource::Contacts)
            } else {
                (&nb[i], BondSource::Neighbors)
            };
            set.bonds.push(unit_bonds(config, i, list));
            set.sources.push(src);
        }
        set
    }

    /// Delaunay-neighbor bonds of `spheres`.
    pub fn from_neighbors(config: &Configuration, tri: &Triangulation, spheres: &[usize]) -> Self {
        let nb = tri.sphere_neighbors();
        BondSet {
            dim: config.dim,
            spheres: spheres.to_vec(),
            bonds: spheres.iter().map(|&i| unit_bonds(config, i, &nb[i])).collect(),
            sources: vec![BondSource::Neighbors; spheres.len()],
        }
    }

    /// Three-dimensional bonds given directly (normalized here).
    pub fn from_vectors(bonds: Vec<Vec<Vec3>>) -> Self {
        let n = bonds.len();
        BondSet {
            dim: 3,
            spheres: (0..n).collect(),
            bonds: bonds
                .into_iter()
                .map(|b| b.into_iter().filter_map(|v| v.try_normalize(0.0)).collect())
                .collect(),
            sources: vec![BondSource::Neighbors; n],
        }
    }
}

fn unit_bonds(config: &Configuration, i: usize, list: &[usize]) -> Vec<Vec3> {
    list.iter()
        .filter_map(|&j| config.delta(i, j).try_normalize(0.0))
        .collect()
}

/// Associated Legendre functions `P_l^m(x)` for `0 <= m <= l`, without the
/// Condon-Shortley phase, indexed by `m`.
fn legendre_row(l: usize, x: f64) -> Vec<f64> {
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut row = vec![0.0; l + 1];
    let mut pmm = 1.0;
    for m in 0..=l {
        if m > 0 {
            pmm *= (2 * m - 1) as f64 * s;
        }
        if m == l {
            row[m] = pmm;
            break;
        }
        let mut p_prev = pmm;
        let mut p = x * (2 * m + 1) as f64 * pmm;
        for ll in m + 2..=l {
            let next = ((2 * ll - 1) as f64 * x * p - (ll + m - 1) as f64 * p_prev) / (ll - m) as f64;
            p_prev = p;
            p = next;
        }
        row[m] = if l == m { pmm } else { p };
    }
    row
}

fn norms(l: usize) -> Vec<f64> {
    (0..=l)
        .map(|m| {
            let mut ratio = 1.0;
            for k in (l - m + 1)..=(l + m) {
                ratio /= k as f64;
            }
            ((2 * l + 1) as f64 / (4.0 * PI) * ratio).sqrt()
        })
        .collect()
}

/// Sums of `Y_lm` over unit vectors for `m = 0..=l` as `(re, im)`.
fn harmonic_sums(l: usize, bonds: &[Vec3], norm: &[f64]) -> Vec<(f64, f64)> {
    let mut acc = vec![(0.0, 0.0); l + 1];
    for b in bonds {
        let row = legendre_row(l, b.z.clamp(-1.0, 1.0));
        let phi = b.y.atan2(b.x);
        for m in 0..=l {
            let a = norm[m] * row[m];
            let (sin, cos) = (m as f64 * phi).sin_cos();
            acc[m].0 += a * cos;
            acc[m].1 += a * sin;
        }
    }
    acc
}

fn invariant(l: usize, sums: &[(f64, f64)], count: usize) -> f64 {
    let c = count as f64;
    let mut total = (sums[0].0 / c).powi(2) + (sums[0].1 / c).powi(2);
    for s in &sums[1..] {
        total += 2.0 * ((s.0 / c).powi(2) + (s.1 / c).powi(2));
    }
    (4.0 * PI / (2 * l + 1) as f64 * total).sqrt()
}

/// Rotation invariant `q_l` of a set of unit vectors.
pub fn q_l(l: usize, bonds: &[Vec3]) -> f64 {
    let norm = norms(l);
    invariant(l, &harmonic_sums(l, bonds, &norm), bonds.len())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderReport {
    pub l: usize,
    /// `(sphere, q_l)` for scored spheres with at least two bonds.
    pub per_sphere: Vec<(usize, f64)>,
    /// Spheres with fewer than two bonds.
    pub excluded: Vec<usize>,
    /// Mean of the per-sphere values.
    pub average_local: f64,
    /// Invariant of the harmonic sum over all bonds of all scored spheres.
    pub global_sum: f64,
}

impl OrderReport {
    /// Lines `sphere q_l`.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("# sphere\tq{}\n", self.l);
        for &(i, q) in &self.per_sphere {
            writeln!(out, "{i}\t{q:.12e}").unwrap();
        }
        out
    }
}

pub fn bond_orientational(bonds: &BondSet, l: usize) -> Result<OrderReport> {
    if !(1..=12).contains(&l) {
        return Err(Error::param(format!("harmonic order {l} outside 1..=12")));
    }
    if bonds.dim != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            found: bonds.dim,
        });
    }
    let norm = norms(l);
    let mut total = vec![(0.0, 0.0); l + 1];
    let mut count = 0;
    let mut report = OrderReport {
        l,
        per_sphere: Vec::new(),
        excluded: Vec::new(),
        average_local: f64::NAN,
        global_sum: f64::NAN,
    };
    for (&i, b) in bonds.spheres.iter().zip(&bonds.bonds) {
        if b.len() < 2 {
            report.excluded.push(i);
            continue;
        }
        let sums = harmonic_sums(l, b, &norm);
        report.per_sphere.push((i, invariant(l, &sums, b.len()).min(1.0)));
        for (t, s) in total.iter_mut().zip(&sums) {
            t.0 += s.0;
            t.1 += s.1;
        }
        count += b.len();
    }
    if !report.per_sphere.is_empty() {
        report.average_local =
            report.per_sphere.iter().map(|&(_, q)| q).sum::<f64>() / report.per_sphere.len() as f64;
        report.global_sum = invariant(l, &total, count).min(1.0);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefectCount {
    /// Delaunay degree -> number of interior vertices with that degree.
    pub by_degree: BTreeMap<usize, usize>,
    /// Interior vertices of degree other than six.
    pub defects: usize,
    pub interior: usize,
    pub fraction: f64,
}

/// Interior vertices of a planar triangulation whose degree differs from six.
pub fn planar_defect_count(tri: &Triangulation) -> Result<DefectCount> {
    if tri.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: tri.dim(),
        });
    }
    let hull = tri.touches_synthetic();
    let nb = tri.sphere_neighbors();
    let mut by_degree = BTreeMap::new();
    let mut interior = 0;
    for i in 0..tri.sphere_count() {
        if hull[i] {
            continue;
        }
        interior += 1;
        *by_degree.entry(nb[i].len()).or_insert(0) += 1;
    }
    let defects = interior - by_degree.get(&6).copied().unwrap_or(0);
    Ok(DefectCount {
        by_degree,
        defects,
        interior,
        fraction: if interior > 0 { defects as f64 / interior as f64 } else { f64::NAN },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::lattice;
    use nalgebra::{Rotation3, Unit};
    use proptest::prelude::*;

    fn legendre(l: usize, x: f64) -> f64 {
        let (mut p0, mut p1) = (1.0, x);
        if l == 0 {
            return p0;
        }
        for k in 1..l {
            let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
            p0 = p1;
            p1 = p2;
        }
        p1
    }

    /// Addition theorem: q_l^2 = (1/N^2) sum_{a,b} P_l(a . b).
    fn q_by_addition(l: usize, bonds: &[Vec3]) -> f64 {
        let n = bonds.len() as f64;
        let mut s = 0.0;
        for a in bonds {
            for b in bonds {
                s += legendre(l, a.dot(b));
            }
        }
        (s / (n * n)).sqrt()
    }

    fn fcc_dirs() -> Vec<Vec3> {
        let mut v = Vec::new();
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            for sa in [-1.0, 1.0] {
                for sb in [-1.0, 1.0] {
                    let mut d = Vec3::zeros();
                    d[a] = sa;
                    d[b] = sb;
                    v.push(d / 2f64.sqrt());
                }
            }
        }
        v
    }

    fn sc_dirs() -> Vec<Vec3> {
        let mut v = Vec::new();
        for k in 0..3 {
            for s in [-1.0, 1.0] {
                let mut d = Vec3::zeros();
                d[k] = s;
                v.push(d);
            }
        }
        v
    }

    #[test]
    fn lattice_values() {
        let fcc = fcc_dirs();
        let sc = sc_dirs();
        // Independent evaluation first, then the harmonic implementation.
        assert!((q_by_addition(6, &fcc) - 0.5745).abs() < 1e-4);
        assert!((q_by_addition(4, &sc) - 0.7637).abs() < 1e-4);
        assert!((q_l(6, &fcc) - q_by_addition(6, &fcc)).abs() < 1e-12);
        assert!((q_l(4, &sc) - q_by_addition(4, &sc)).abs() < 1e-12);
        assert!((q_l(4, &fcc) - q_by_addition(4, &fcc)).abs() < 1e-12);
        let set = BondSet::from_vectors(vec![fcc.clone(); 5]);
        let rep = bond_orientational(&set, 6).unwrap();
        assert!((rep.average_local - rep.global_sum).abs() < 1e-12);
    }

    #[test]
    fn excludes_short_bond_lists() {
        let set = BondSet::from_vectors(vec![sc_dirs(), vec![Vec3::x()], vec![]]);
        let rep = bond_orientational(&set, 4).unwrap();
        assert_eq!(rep.excluded, vec![1, 2]);
        assert_eq!(rep.per_sphere.len(), 1);
        assert!(bond_orientational(&set, 0).is_err());
    }

    proptest! {
        #[test]
        fn matches_addition_theorem_and_rotation(
            raw in prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 2..14),
            axis in prop::array::uniform3(-1.0f64..1.0),
            angle in 0.0f64..6.28,
            scale in 0.1f64..10.0,
        ) {
            let bonds: Vec<Vec3> = raw.iter()
                .filter_map(|a| Vec3::new(a[0], a[1], a[2]).try_normalize(1e-6))
                .collect();
            prop_assume!(bonds.len() >= 2);
            let ax = Vec3::new(axis[0], axis[1], axis[2]);
            prop_assume!(ax.norm() > 1e-3);
            let rot = Rotation3::from_axis_angle(&Unit::new_normalize(ax), angle);
            for l in [4usize, 6] {
                let q = q_l(l, &bonds);
                prop_assert!((q - q_by_addition(l, &bonds)).abs() < 1e-10);
                let rotated: Vec<Vec3> = bonds.iter().map(|b| rot * b).collect();
                prop_assert!((q_l(l, &rotated) - q).abs() < 1e-10);
                let set = BondSet::from_vectors(vec![bonds.iter().map(|b| b * scale).collect()]);
                let rep = bond_orientational(&set, l).unwrap();
                prop_assert!((rep.per_sphere[0].1 - q.min(1.0)).abs() < 1e-12);
                prop_assert!((0.0..=1.0).contains(&q) || q <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn defects_in_hex_patch() {
        let pts = lattice::hex_patch(6);
        let tri = Triangulation::from_points(2, &pts).unwrap();
        assert_eq!(planar_defect_count(&tri).unwrap().defects, 0);
        let center = pts.iter().position(|p| p.norm() < 1e-12).unwrap();
        let holed: Vec<Vec3> = pts.iter().enumerate().filter(|&(i, _)| i != center).map(|(_, p)| *p).collect();
        let tri = Triangulation::from_points(2, &holed).unwrap();
        let d = planar_defect_count(&tri).unwrap();
        assert!(d.defects > 0);
        assert!(d.by_degree.keys().any(|&k| k < 6) && d.by_degree.keys().any(|&k| k > 6));
        // Degree sum of the six hole vertices is unchanged (6 x 6).
        let total: usize = d.by_degree.iter().map(|(k, v)| k * v).sum();
        assert_eq!(total, 6 * d.interior);
    }
}
