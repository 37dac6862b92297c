//! Cell-based statistics: cell summaries and gamma fits, local density,
//! escape radii, topological density and simplex shape metrics.

use std::collections::VecDeque;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use super::delaunay::Triangulation;
use super::voronoi::Tessellation;
use crate::contacts::ContactNetwork;
use crate::error::{Error, Result};
use crate::geometry::{ball_volume, Configuration, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellRecord {
    pub sphere: usize,
    pub volume: f64,
    pub surface: f64,
    pub min_angle: f64,
    pub max_angle: f64,
    pub min_edge: f64,
    pub max_edge: f64,
    pub face_count: usize,
}

impl CellRecord {
    pub const HEADER: &'static str =
        "sphere\tvolume\tsurface\tmin_angle\tmax_angle\tmin_edge\tmax_edge\tfaces";

    pub fn to_tsv(&self) -> String {
        format!(
            "{}\t{:.12e}\t{:.12e}\t{:.12e}\t{:.12e}\t{:.12e}\t{:.12e}\t{}",
            self.sphere,
            self.volume,
            self.surface,
            self.min_angle,
            self.max_angle,
            self.min_edge,
            self.max_edge,
            self.face_count
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len();
        if n == 0 {
            return Summary {
                n,
                mean: f64::NAN,
                sd: f64::NAN,
                min: f64::NAN,
                max: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Summary {
            n,
            mean,
            sd: var.sqrt(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Equal-width histogram over the data range with `bins` bins.
    pub fn of(values: &[f64], bins: usize) -> Histogram {
        let bins = bins.max(1);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if values.is_empty() {
            return Histogram { edges: vec![], counts: vec![] };
        }
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let edges: Vec<f64> = (0..=bins).map(|b| lo + b as f64 * width).collect();
        let mut counts = vec![0; bins];
        for &v in values {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Histogram { edges, counts }
    }
}

/// Method-of-moments gamma fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaFit {
    pub shape: f64,
    pub scale: f64,
    /// Set when the sample has (numerically) zero variance.
    pub degenerate: bool,
}

pub fn gamma_fit(values: &[f64]) -> GammaFit {
    let s = Summary::of(values);
    let var = s.sd * s.sd;
    if s.n < 2 || !(var > 1e-12 * s.mean * s.mean) {
        return GammaFit {
            shape: f64::INFINITY,
            scale: 0.0,
            degenerate: true,
        };
    }
    GammaFit {
        shape: s.mean * s.mean / var,
        scale: var / s.mean,
        degenerate: false,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    /// Records of bounded (interior) cells.
    pub records: Vec<CellRecord>,
    pub volume: Summary,
    pub surface: Summary,
    pub faces: Summary,
    pub volume_histogram: Histogram,
    pub gamma: GammaFit,
}

impl CellStats {
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# {}", CellRecord::HEADER).unwrap();
        for r in &self.records {
            writeln!(out, "{}", r.to_tsv()).unwrap();
        }
        out
    }
}

pub fn cell_statistics(tess: &Tessellation) -> Result<CellStats> {
    let records: Vec<CellRecord> = tess
        .bounded_cells()
        .map(|c| CellRecord {
            sphere: c.sphere,
            volume: c.volume,
            surface: c.surface,
            min_angle: c.min_angle,
            max_angle: c.max_angle,
            min_edge: c.min_edge,
            max_edge: c.max_edge,
            face_count: c.face_count,
        })
        .collect();
    if records.is_empty() {
        return Err(Error::Degenerate("no bounded cells".into()));
    }
    let vols: Vec<f64> = records.iter().map(|r| r.volume).collect();
    let surf: Vec<f64> = records.iter().map(|r| r.surface).collect();
    let faces: Vec<f64> = records.iter().map(|r| r.face_count as f64).collect();
    let bins = ((records.len() as f64).log2().ceil() as usize) + 1;
    Ok(CellStats {
        volume: Summary::of(&vols),
        surface: Summary::of(&surf),
        faces: Summary::of(&faces),
        volume_histogram: Histogram::of(&vols, bins),
        gamma: gamma_fit(&vols),
        records,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalDensity {
    /// `(sphere, sphere volume / cell volume)` for bounded cells.
    pub values: Vec<(usize, f64)>,
    /// Spheres whose cells are unbounded.
    pub excluded: Vec<usize>,
}

pub fn local_density(config: &Configuration, tess: &Tessellation) -> Result<LocalDensity> {
    if tess.cells.len() != config.len() {
        return Err(Error::TriangulationMismatch(format!(
            "{} cells for {} spheres",
            tess.cells.len(),
            config.len()
        )));
    }
    let mut out = LocalDensity {
        values: Vec::new(),
        excluded: Vec::new(),
    };
    for c in &tess.cells {
        if c.bounded {
            let v = ball_volume(config.dim, config.spheres[c.sphere].radius);
            out.values.push((c.sphere, v / c.volume));
        } else {
            out.excluded.push(c.sphere);
        }
    }
    Ok(out)
}

/// Empirical distribution of per-cell escape radii.
#[derive(Debug, Clone, PartialEq)]
pub struct EscapeDistribution {
    /// `(sphere, escape radius)` for interior cells.
    pub radii: Vec<(usize, f64)>,
    sorted: Vec<f64>,
}

impl EscapeDistribution {
    pub fn ecdf(&self, x: f64) -> f64 {
        if self.sorted.is_empty() {
            return f64::NAN;
        }
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    /// Lower empirical quantile.
    pub fn quantile(&self, p: f64) -> f64 {
        if self.sorted.is_empty() {
            return f64::NAN;
        }
        let k = ((p * self.sorted.len() as f64).ceil() as usize).clamp(1, self.sorted.len());
        self.sorted[k - 1]
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }
}

fn triangle_circumradius(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let ab = (b - a).norm();
    let bc = (c - b).norm();
    let ca = (a - c).norm();
    let area2 = (b - a).cross(&(c - a)).norm();
    ab * bc * ca / (2.0 * area2)
}

/// Escape radius of every interior cell: the largest gap radius over the
/// sphere triples of Delaunay triangles at the sphere, where the gap radius
/// is the triple's circumradius minus the mean radius. In 3D, triangles
/// lying inside a group of cospherical points are skipped.
pub fn escape_fraction(config: &Configuration, tri: &Triangulation) -> Result<EscapeDistribution> {
    if tri.sphere_count() != config.len() {
        return Err(Error::TriangulationMismatch(format!(
            "triangulation over {} spheres, configuration has {}",
            tri.sphere_count(),
            config.len()
        )));
    }
    let hull = tri.touches_synthetic();
    let radius = |v: usize| config.spheres[tri.origin(v).unwrap()].radius;
    let mut radii = Vec::new();
    for i in 0..config.len() {
        if hull[i] {
            continue;
        }
        let mut best: f64 = 0.0;
        for &t in tri.incident(i) {
            let vs = tri.simplex(t);
            if tri.dim() == 2 {
                let r = triangle_circumradius(tri.point(vs[0]), tri.point(vs[1]), tri.point(vs[2]));
                let mean_r = (radius(vs[0]) + radius(vs[1]) + radius(vs[2])) / 3.0;
                best = best.max(r - mean_r);
                continue;
            }
            let (ct, rt) = tri.circumsphere(t);
            for k in 0..4 {
                if vs[k] == i {
                    continue;
                }
                let face: Vec<usize> = (0..4).filter(|&m| m != k).map(|m| vs[m]).collect();
                let other = tri.neighbors_of_simplex(t)[k];
                if other != super::delaunay::NONE && !tri.has_synthetic(other) {
                    let (co, _) = tri.circumsphere(other);
                    if (co - ct).norm() <= 1e-9 * rt {
                        continue;
                    }
                }
                let r = triangle_circumradius(tri.point(face[0]), tri.point(face[1]), tri.point(face[2]));
                let mean_r = (radius(face[0]) + radius(face[1]) + radius(face[2])) / 3.0;
                best = best.max(r - mean_r);
            }
        }
        radii.push((i, best.max(0.0)));
    }
    let mut sorted: Vec<f64> = radii.iter().map(|&(_, r)| r).collect();
    sorted.sort_by(f64::total_cmp);
    Ok(EscapeDistribution { radii, sorted })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologicalDensity {
    /// Shell sizes for shells `1..=max_shell`, per root.
    pub shells: Vec<Vec<usize>>,
    /// Least-squares `(constant, linear, quadratic)` coefficients per root.
    pub coefficients: Vec<[f64; 3]>,
    /// Mean quadratic coefficient over roots.
    pub leading: f64,
}

/// Breadth-first shell sizes around each root and a quadratic fit of shell
/// size against shell index.
pub fn topological_density(net: &ContactNetwork, roots: &[usize], max_shell: usize) -> Result<TopologicalDensity> {
    if max_shell < 3 {
        return Err(Error::param("a quadratic fit needs at least 3 shells"));
    }
    if roots.is_empty() {
        return Err(Error::param("no roots given"));
    }
    let adj = net.adjacency();
    let mut shells = Vec::with_capacity(roots.len());
    let mut coefficients = Vec::with_capacity(roots.len());
    let mut depth = vec![usize::MAX; net.n];
    for &root in roots {
        if root >= net.n {
            return Err(Error::param(format!("root {root} out of range")));
        }
        depth.iter_mut().for_each(|d| *d = usize::MAX);
        let mut counts = vec![0usize; max_shell];
        depth[root] = 0;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            if depth[u] == max_shell {
                continue;
            }
            for &w in &adj[u] {
                if depth[w] == usize::MAX {
                    depth[w] = depth[u] + 1;
                    counts[depth[w] - 1] += 1;
                    queue.push_back(w);
                }
            }
        }
        if counts.contains(&0) {
            return Err(Error::Degenerate(format!(
                "component of root {root} has fewer than {max_shell} shells"
            )));
        }
        let design = DMatrix::from_fn(max_shell, 3, |r, c| ((r + 1) as f64).powi(c as i32));
        let y = DVector::from_iterator(max_shell, counts.iter().map(|&c| c as f64));
        let sol = design
            .clone()
            .svd(true, true)
            .solve(&y, 1e-12)
            .map_err(|e| Error::Solver(e.to_string()))?;
        coefficients.push([sol[0], sol[1], sol[2]]);
        shells.push(counts);
    }
    let leading = coefficients.iter().map(|c| c[2]).sum::<f64>() / coefficients.len() as f64;
    Ok(TopologicalDensity {
        shells,
        coefficients,
        leading,
    })
}

fn spread(lengths: &[f64; 6]) -> f64 {
    let mean = lengths.iter().sum::<f64>() / 6.0;
    let mut s = 0.0;
    for a in 0..6 {
        for b in a + 1..6 {
            s += (lengths[a] - lengths[b]).powi(2);
        }
    }
    s / (15.0 * mean * mean)
}

/// Tetrahedricity of a tetrahedron from its six edge lengths; zero exactly
/// for a regular tetrahedron.
pub fn tetrahedricity(lengths: &[f64; 6]) -> f64 {
    spread(lengths)
}

/// Quarter-octahedron deviation: the longest edge is scaled down by
/// `sqrt(2)` before measuring spread, so five equal edges plus one
/// `sqrt(2)` times longer score zero.
pub fn quadroctahedricity(lengths: &[f64; 6]) -> f64 {
    let mut l = *lengths;
    let (imax, _) = l
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    l[imax] /= 2f64.sqrt();
    spread(&l)
}

pub fn edge_lengths(p: [&Vec3; 4]) -> [f64; 6] {
    [
        (p[0] - p[1]).norm(),
        (p[0] - p[2]).norm(),
        (p[0] - p[3]).norm(),
        (p[1] - p[2]).norm(),
        (p[1] - p[3]).norm(),
        (p[2] - p[3]).norm(),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexShape {
    /// Sphere indices of the tetrahedron.
    pub spheres: [usize; 4],
    pub tetrahedricity: f64,
    pub quadroctahedricity: f64,
}

/// Shape metrics of every sphere tetrahedron of a 3D triangulation.
pub fn simplex_shape_metrics(tri: &Triangulation) -> Result<Vec<SimplexShape>> {
    if tri.dim() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            found: tri.dim(),
        });
    }
    let mut out = Vec::new();
    for s in tri.sphere_simplices() {
        let vs = tri.simplex(s);
        let p = [tri.point(vs[0]), tri.point(vs[1]), tri.point(vs[2]), tri.point(vs[3])];
        let l = edge_lengths(p);
        if l.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::Degenerate(format!("simplex {s} has a zero-length edge")));
        }
        out.push(SimplexShape {
            spheres: [
                tri.origin(vs[0]).unwrap(),
                tri.origin(vs[1]).unwrap(),
                tri.origin(vs[2]).unwrap(),
                tri.origin(vs[3]).unwrap(),
            ],
            tetrahedricity: tetrahedricity(&l),
            quadroctahedricity: quadroctahedricity(&l),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contacts::{build_contact_network, ContactRule};
    use crate::geometry::{lattice, Boundary, Provenance, Sphere};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Gamma};

    fn config(dim: usize, pts: Vec<Vec3>, r: f64, boundary: Boundary) -> Configuration {
        let spheres = pts.into_iter().map(|c| Sphere::new(c, r)).collect();
        Configuration::new(dim, spheres, boundary, Provenance::default()).unwrap()
    }

    #[test]
    fn hex_local_density_and_escape() {
        let (pts, ext) = lattice::hex_periodic(10, 10);
        let c = config(2, pts, 0.5, Boundary::Periodic { extents: ext });
        let tri = Triangulation::build(&c).unwrap();
        let tess = Tessellation::from_triangulation(&tri);
        let ld = local_density(&c, &tess).unwrap();
        assert!(ld.excluded.is_empty());
        for &(_, v) in &ld.values {
            assert_relative_eq!(v, std::f64::consts::PI / 12f64.sqrt(), max_relative = 1e-10);
        }
        let stats = cell_statistics(&tess).unwrap();
        assert_relative_eq!(stats.volume.mean, 3f64.sqrt() / 2.0, max_relative = 1e-12);
        assert!(stats.gamma.degenerate);
        // Unit radius, spacing 2: scale the lattice by two.
        let (pts, ext) = lattice::hex_periodic(10, 10);
        let c = config(2, pts.iter().map(|p| p * 2.0).collect(), 1.0, Boundary::Periodic { extents: ext * 2.0 });
        let tri = Triangulation::build(&c).unwrap();
        let esc = escape_fraction(&c, &tri).unwrap();
        for &(_, r) in &esc.radii {
            assert_relative_eq!(r, 2.0 / 3f64.sqrt() - 1.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn simple_cubic_escape_radius() {
        let pts = lattice::simple_cubic(5, 2.0);
        let c = config(3, pts, 1.0, Boundary::None);
        let tri = Triangulation::build(&c).unwrap();
        let esc = escape_fraction(&c, &tri).unwrap();
        assert_eq!(esc.radii.len(), 27);
        for &(_, r) in &esc.radii {
            assert_relative_eq!(r, 2f64.sqrt() - 1.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn fcc_local_density() {
        let (pts, ext) = lattice::fcc_periodic(3);
        let c = config(3, pts, 0.5, Boundary::Periodic { extents: ext });
        let tess = Tessellation::from_triangulation(&Triangulation::build(&c).unwrap());
        for &(_, v) in &local_density(&c, &tess).unwrap().values {
            assert_relative_eq!(v, std::f64::consts::PI / 18f64.sqrt(), max_relative = 1e-10);
        }
    }

    #[test]
    fn gamma_fit_recovers_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = Gamma::new(5.0, 0.2).unwrap();
        let xs: Vec<f64> = (0..20000).map(|_| g.sample(&mut rng)).collect();
        let fit = gamma_fit(&xs);
        assert!((fit.shape - 5.0).abs() < 0.5);
        assert!((fit.scale - 0.2).abs() < 0.02);
        assert!(gamma_fit(&[1.0, 1.0, 1.0]).degenerate);
    }

    #[test]
    fn shell_counts_hex_and_fcc() {
        let (pts, ext) = lattice::hex_periodic(30, 30);
        let c = config(2, pts, 0.5, Boundary::Periodic { extents: ext });
        let tri = Triangulation::build(&c).unwrap();
        let net = build_contact_network(&c, &tri, ContactRule::default()).unwrap();
        let td = topological_density(&net, &[0, 77], 6).unwrap();
        assert_eq!(td.shells[0], vec![6, 12, 18, 24, 30, 36]);
        assert!(td.leading.abs() < 1e-9);
        assert!((td.coefficients[0][1] - 6.0).abs() < 1e-9);
        assert!(topological_density(&net, &[0], 1).is_err());

        let (pts, ext) = lattice::fcc_periodic(8);
        let c = config(3, pts, 0.5, Boundary::Periodic { extents: ext });
        let tri = Triangulation::build(&c).unwrap();
        let net = build_contact_network(&c, &tri, ContactRule::default()).unwrap();
        let td = topological_density(&net, &[0], 6).unwrap();
        // Brute-force FCC coordination shells: graph distance of a lattice
        // vector (x, y, z) in half-lattice units is max(|x|,|y|,|z|,(|x|+|y|+|z|)/2).
        let mut want = [0usize; 6];
        for x in -12i32..=12 {
            for y in -12i32..=12 {
                for z in -12i32..=12 {
                    if (x + y + z) % 2 != 0 {
                        continue;
                    }
                    let d = x.abs().max(y.abs()).max(z.abs()).max((x.abs() + y.abs() + z.abs()) / 2);
                    if (1..=6).contains(&d) {
                        want[d as usize - 1] += 1;
                    }
                }
            }
        }
        assert_eq!(td.shells[0], want.to_vec());
        assert!((td.leading - 10.0).abs() < 1e-9);
    }

    #[test]
    fn shape_metrics() {
        let reg = [1.0; 6];
        assert_eq!(tetrahedricity(&reg), 0.0);
        let s2 = 2f64.sqrt();
        let quarter = [1.0, 1.0, 1.0, 1.0, 1.0, s2];
        assert!(quadroctahedricity(&quarter).abs() < 1e-15);
        let mean = (5.0 + s2) / 6.0;
        assert_relative_eq!(tetrahedricity(&quarter), 5.0 * (s2 - 1.0).powi(2) / (15.0 * mean * mean), max_relative = 1e-12);
        let l = [1.0, 1.3, 0.9, 1.1, 1.7, 1.2];
        let scaled = l.map(|x| x * 3.7);
        assert_relative_eq!(tetrahedricity(&l), tetrahedricity(&scaled), max_relative = 1e-12);
    }
}
