//! Voronoi cells as duals of the Delaunay triangulation.

use rustc_hash::FxHashMap;

use super::delaunay::{Triangulation, NONE};
use crate::geometry::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct VoronoiFace {
    /// Sphere on the other side of the face.
    pub neighbor: usize,
    /// Face polygon (2D: the two end points of the cell edge).
    pub vertices: Vec<Vec3>,
    /// Face area (2D: edge length).
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoronoiCell {
    pub sphere: usize,
    /// False when the cell reaches a synthetic hull point; geometric fields
    /// are then infinite or empty.
    pub bounded: bool,
    /// Volume (2D: area).
    pub volume: f64,
    /// Surface area (2D: perimeter).
    pub surface: f64,
    /// Smallest and largest polygon angle, radians.
    pub min_angle: f64,
    pub max_angle: f64,
    pub min_edge: f64,
    pub max_edge: f64,
    /// Faces of positive area.
    pub face_count: usize,
    /// Delaunay neighbors, sorted.
    pub neighbors: Vec<usize>,
    pub faces: Vec<VoronoiFace>,
}

/// Per-sphere Voronoi cells.
#[derive(Debug, Clone)]
pub struct Tessellation {
    pub dim: usize,
    pub cells: Vec<VoronoiCell>,
}

impl Tessellation {
    pub fn from_triangulation(tri: &Triangulation) -> Self {
        let centers: Vec<Vec3> = (0..tri.simplex_count()).map(|s| tri.circumsphere(s).0).collect();
        let neighbors = tri.sphere_neighbors();
        let cells = (0..tri.sphere_count())
            .map(|i| {
                let bounded = !tri.incident(i).iter().any(|&s| tri.has_synthetic(s));
                let mut cell = VoronoiCell {
                    sphere: i,
                    bounded,
                    volume: f64::INFINITY,
                    surface: f64::INFINITY,
                    min_angle: f64::NAN,
                    max_angle: f64::NAN,
                    min_edge: f64::NAN,
                    max_edge: f64::NAN,
                    face_count: 0,
                    neighbors: neighbors[i].clone(),
                    faces: Vec::new(),
                };
                if bounded {
                    if tri.dim() == 2 {
                        fill_polygon(tri, &centers, &mut cell);
                    } else {
                        fill_polyhedron(tri, &centers, &mut cell);
                    }
                }
                cell
            })
            .collect();
        Tessellation { dim: tri.dim(), cells }
    }

    pub fn bounded_cells(&self) -> impl Iterator<Item = &VoronoiCell> {
        self.cells.iter().filter(|c| c.bounded)
    }
}

fn dedupe_ring(ring: &[Vec3], tol: f64) -> Vec<Vec3> {
    let mut out: Vec<Vec3> = Vec::with_capacity(ring.len());
    for p in ring {
        if out.last().is_none_or(|q| (p - q).norm() > tol) {
            out.push(*p);
        }
    }
    while out.len() > 1 && (out[0] - out[out.len() - 1]).norm() <= tol {
        out.pop();
    }
    out
}

fn angle_at(prev: &Vec3, v: &Vec3, next: &Vec3) -> f64 {
    let a = prev - v;
    let b = next - v;
    a.cross(&b).norm().atan2(a.dot(&b))
}

struct Extremes {
    min_angle: f64,
    max_angle: f64,
    min_edge: f64,
    max_edge: f64,
}

impl Extremes {
    fn new() -> Self {
        Extremes {
            min_angle: f64::INFINITY,
            max_angle: f64::NEG_INFINITY,
            min_edge: f64::INFINITY,
            max_edge: f64::NEG_INFINITY,
        }
    }

    fn polygon(&mut self, poly: &[Vec3]) {
        let m = poly.len();
        if m < 3 {
            return;
        }
        for k in 0..m {
            let prev = &poly[(k + m - 1) % m];
            let next = &poly[(k + 1) % m];
            let e = (next - poly[k]).norm();
            self.min_edge = self.min_edge.min(e);
            self.max_edge = self.max_edge.max(e);
            let a = angle_at(prev, &poly[k], next);
            self.min_angle = self.min_angle.min(a);
            self.max_angle = self.max_angle.max(a);
        }
    }

    fn store(&self, cell: &mut VoronoiCell) {
        cell.min_angle = self.min_angle;
        cell.max_angle = self.max_angle;
        cell.min_edge = self.min_edge;
        cell.max_edge = self.max_edge;
    }
}

fn fill_polygon(tri: &Triangulation, centers: &[Vec3], cell: &mut VoronoiCell) {
    let i = cell.sphere;
    let p = *tri.point(i);
    let start = tri.incident(i)[0];
    let mut t = start;
    let mut ring = Vec::new();
    let mut across = Vec::new();
    for _ in 0..=tri.incident(i).len() {
        let vs = tri.simplex(t);
        let a = vs.iter().position(|&v| v == i).unwrap();
        ring.push(centers[t]);
        across.push(vs[(a + 2) % 3]);
        t = tri.neighbors_of_simplex(t)[(a + 1) % 3];
        if t == start || t == NONE {
            break;
        }
    }
    let scale = tri
        .incident(i)
        .iter()
        .flat_map(|&s| tri.simplex(s).iter())
        .map(|&v| (tri.point(v) - p).norm())
        .fold(0.0, f64::max);
    let tol = 1e-12 * scale.max(1e-300);
    let m = ring.len();
    let mut area2 = 0.0;
    let mut perimeter = 0.0;
    for k in 0..m {
        let a = ring[k] - p;
        let b = ring[(k + 1) % m] - p;
        area2 += a.x * b.y - a.y * b.x;
        let len = (ring[(k + 1) % m] - ring[k]).norm();
        perimeter += len;
        if len > tol {
            cell.faces.push(VoronoiFace {
                neighbor: tri.origin(across[k]).unwrap_or(usize::MAX),
                vertices: vec![ring[k], ring[(k + 1) % m]],
                area: len,
            });
        }
    }
    cell.volume = area2.abs() / 2.0;
    cell.surface = perimeter;
    cell.face_count = cell.faces.len();
    let poly = dedupe_ring(&ring, tol);
    let mut ex = Extremes::new();
    ex.polygon(&poly);
    ex.store(cell);
}

fn fill_polyhedron(tri: &Triangulation, centers: &[Vec3], cell: &mut VoronoiCell) {
    let i = cell.sphere;
    let p = *tri.point(i);
    // First incident tetrahedron containing each neighboring vertex.
    let mut first: FxHashMap<usize, usize> = FxHashMap::default();
    for &t in tri.incident(i) {
        for &v in tri.simplex(t) {
            if v != i {
                first.entry(v).or_insert(t);
            }
        }
    }
    let mut around: Vec<(usize, usize)> = first.into_iter().collect();
    around.sort_unstable();
    let mut ex = Extremes::new();
    let mut volume = 0.0;
    let mut surface = 0.0;
    for (j, t0) in around {
        let q = *tri.point(j);
        let h = (q - p).norm() / 2.0;
        let mut ring = Vec::new();
        let mut t = t0;
        let mut prev = NONE;
        for _ in 0..=tri.incident(i).len() {
            ring.push(centers[t]);
            let vs = tri.simplex(t);
            let others: Vec<usize> = (0..4).filter(|&k| vs[k] != i && vs[k] != j).collect();
            let nb = tri.neighbors_of_simplex(t);
            let next = if nb[others[0]] != prev { nb[others[0]] } else { nb[others[1]] };
            prev = t;
            t = next;
            if t == t0 || t == NONE {
                break;
            }
        }
        let poly = dedupe_ring(&ring, 1e-12 * h.max(1e-300));
        let mut sum = Vec3::zeros();
        for k in 1..poly.len().saturating_sub(1) {
            sum += (poly[k] - poly[0]).cross(&(poly[k + 1] - poly[0]));
        }
        let area = sum.norm() / 2.0;
        volume += area * h / 3.0;
        surface += area;
        if poly.len() >= 3 && area > 1e-14 * h * h {
            ex.polygon(&poly);
            cell.faces.push(VoronoiFace {
                neighbor: tri.origin(j).unwrap_or(usize::MAX),
                vertices: poly,
                area,
            });
        }
    }
    cell.volume = volume;
    cell.surface = surface;
    cell.face_count = cell.faces.len();
    ex.store(cell);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{lattice, Boundary, Configuration, Provenance, Sphere};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn periodic(dim: usize, pts: Vec<Vec3>, ext: Vec3, r: f64) -> Configuration {
        let spheres = pts.into_iter().map(|c| Sphere::new(c, r)).collect();
        Configuration::new(dim, spheres, Boundary::Periodic { extents: ext }, Provenance::default()).unwrap()
    }

    #[test]
    fn hex_cells_are_regular_hexagons() {
        let (pts, ext) = lattice::hex_periodic(8, 8);
        let config = periodic(2, pts, ext, 0.5);
        let tess = Tessellation::from_triangulation(&Triangulation::build(&config).unwrap());
        for c in &tess.cells {
            assert!(c.bounded);
            assert_relative_eq!(c.volume, 3f64.sqrt() / 2.0, max_relative = 1e-12);
            assert_eq!(c.face_count, 6);
            assert_relative_eq!(c.min_angle, 2.0 * std::f64::consts::PI / 3.0, max_relative = 1e-9);
        }
    }

    #[test]
    fn fcc_cells_are_rhombic_dodecahedra() {
        let (pts, ext) = lattice::fcc_periodic(3);
        let config = periodic(3, pts, ext, 0.5);
        let tess = Tessellation::from_triangulation(&Triangulation::build(&config).unwrap());
        for c in &tess.cells {
            // Cell volume = a^3 / 4 with a = sqrt(2).
            assert_relative_eq!(c.volume, 2f64.sqrt() / 2.0, max_relative = 1e-10);
            assert_eq!(c.face_count, 12);
        }
    }

    #[test]
    fn random_periodic_volumes_tile_the_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for dim in [2, 3] {
            let ext = if dim == 2 { Vec3::new(9.0, 7.0, 0.0) } else { Vec3::new(6.0, 5.0, 4.5) };
            let pts: Vec<Vec3> = (0..150)
                .map(|_| {
                    let mut p = Vec3::zeros();
                    for k in 0..dim {
                        p[k] = rng.random::<f64>() * ext[k];
                    }
                    p
                })
                .collect();
            let config = periodic(dim, pts, ext, 0.05);
            let tess = Tessellation::from_triangulation(&Triangulation::build(&config).unwrap());
            let total: f64 = tess.cells.iter().map(|c| c.volume).sum();
            let boxv: f64 = (0..dim).map(|k| ext[k]).product();
            assert!(((total - boxv) / boxv).abs() < 1e-8, "dim {dim}: {total} vs {boxv}");
        }
    }

    #[test]
    fn neighbors_match_delaunay_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<Vec3> = (0..200)
            .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
            .collect();
        let tri = Triangulation::from_points(3, &pts).unwrap();
        let tess = Tessellation::from_triangulation(&tri);
        let mut from_cells = Vec::new();
        for c in &tess.cells {
            for &j in &c.neighbors {
                if j > c.sphere {
                    from_cells.push((c.sphere, j));
                }
            }
        }
        assert_eq!(from_cells, tri.sphere_edges());
        for c in tess.bounded_cells() {
            assert_eq!(c.faces.len(), c.neighbors.len());
        }
    }
}
