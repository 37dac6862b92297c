//! Incremental Delaunay triangulation (Bowyer-Watson) in two and three
//! dimensions, enclosed by synthetic hull points.

use rustc_hash::FxHashMap;

use super::predicates::{incircle_sos, insphere_sos, orient2d, orient3d};
use crate::error::{Error, Result};
use crate::geometry::{Configuration, Vec3};

/// Marker for a missing vertex slot or neighbor.
pub const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexKind {
    /// A sphere center; the vertex index equals the sphere index.
    Sphere(usize),
    /// Periodic image of a sphere center.
    Ghost(usize),
    /// Hull point far outside the configuration.
    Synthetic,
}

/// Delaunay simplices over sphere centers, periodic images and synthetic
/// hull points. Vertices `0..sphere_count()` are the spheres themselves.
///
/// Simplices are stored with positive orientation; in 2D the fourth slot of
/// every simplex is [`NONE`]. `adjacency[s][k]` is the simplex across the
/// facet opposite vertex slot `k`.
#[derive(Debug, Clone)]
pub struct Triangulation {
    dim: usize,
    points: Vec<Vec3>,
    kinds: Vec<VertexKind>,
    simplices: Vec<[usize; 4]>,
    adjacency: Vec<[usize; 4]>,
    incident: Vec<Vec<usize>>,
    n_spheres: usize,
}

impl Triangulation {
    /// Triangulate the sphere centers of `config`. Periodic axes are handled
    /// by ghost images within three diameters of the box (widened if a
    /// circumsphere reaches past the ghost layer).
    pub fn build(config: &Configuration) -> Result<Self> {
        let dim = config.dim;
        let n = config.len();
        if n == 0 {
            return Err(Error::TooFewSpheres { needed: 1, have: 0 });
        }
        let centers = config.centers();
        check_input(dim, &centers)?;
        let periods: Vec<(usize, f64)> = (0..dim)
            .filter_map(|k| config.boundary.period(k, dim).map(|l| (k, l)))
            .collect();
        if periods.is_empty() {
            let kinds = (0..n).map(VertexKind::Sphere).collect();
            return construct(dim, centers, kinds, n);
        }
        let cap = periods.iter().map(|&(_, l)| l).fold(f64::INFINITY, f64::min);
        let mut margin = (6.0 * config.max_radius()).min(cap);
        loop {
            let (pts, kinds) = with_ghosts(&centers, &periods, margin);
            let tri = construct(dim, pts, kinds, n)?;
            if margin >= cap || tri.ghost_layer_suffices(&periods, margin) {
                return Ok(tri);
            }
            margin = (2.0 * margin).min(cap);
        }
    }

    /// Triangulate bare points in unbounded space.
    pub fn from_points(dim: usize, points: &[Vec3]) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::param(format!("dimension must be 2 or 3, got {dim}")));
        }
        if points.is_empty() {
            return Err(Error::TooFewSpheres { needed: 1, have: 0 });
        }
        check_input(dim, points)?;
        let kinds = (0..points.len()).map(VertexKind::Sphere).collect();
        construct(dim, points.to_vec(), kinds, points.len())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of sphere (primary) vertices.
    pub fn sphere_count(&self) -> usize {
        self.n_spheres
    }

    pub fn vertex_count(&self) -> usize {
        self.points.len()
    }

    pub fn point(&self, v: usize) -> &Vec3 {
        &self.points[v]
    }

    pub fn kind(&self, v: usize) -> VertexKind {
        self.kinds[v]
    }

    pub fn is_synthetic(&self, v: usize) -> bool {
        matches!(self.kinds[v], VertexKind::Synthetic)
    }

    /// Sphere index a vertex stands for, if it is not synthetic.
    pub fn origin(&self, v: usize) -> Option<usize> {
        match self.kinds[v] {
            VertexKind::Sphere(i) | VertexKind::Ghost(i) => Some(i),
            VertexKind::Synthetic => None,
        }
    }

    pub fn simplex_count(&self) -> usize {
        self.simplices.len()
    }

    /// Vertex indices of simplex `s` (`dim + 1` of them).
    pub fn simplex(&self, s: usize) -> &[usize] {
        &self.simplices[s][..self.dim + 1]
    }

    pub fn neighbors_of_simplex(&self, s: usize) -> &[usize] {
        &self.adjacency[s][..self.dim + 1]
    }

    /// Simplices incident to vertex `v`.
    pub fn incident(&self, v: usize) -> &[usize] {
        &self.incident[v]
    }

    pub fn has_synthetic(&self, s: usize) -> bool {
        self.simplex(s).iter().any(|&v| self.is_synthetic(v))
    }

    /// Simplices with only sphere vertices, one representative per periodic
    /// class: a simplex is kept when its lowest-index sphere appears as the
    /// primary vertex rather than as an image.
    pub fn sphere_simplices(&self) -> Vec<usize> {
        (0..self.simplices.len())
            .filter(|&s| {
                let vs = self.simplex(s);
                if vs.iter().any(|&v| self.is_synthetic(v)) {
                    return false;
                }
                let lead = vs
                    .iter()
                    .min_by_key(|&&v| (self.origin(v), matches!(self.kinds[v], VertexKind::Ghost(_))))
                    .unwrap();
                matches!(self.kinds[*lead], VertexKind::Sphere(_))
            })
            .collect()
    }

    /// Unique vertex-index edges, each as `[a, b]` with `a < b`.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let k = self.dim + 1;
        let mut out = Vec::with_capacity(self.simplices.len() * 3);
        for s in &self.simplices {
            for a in 0..k {
                for b in a + 1..k {
                    out.push([s[a].min(s[b]), s[a].max(s[b])]);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Delaunay neighbors of every sphere as sorted sphere indices (periodic
    /// images mapped back to their sphere).
    pub fn sphere_neighbors(&self) -> Vec<Vec<usize>> {
        (0..self.n_spheres)
            .map(|i| {
                let mut nb: Vec<usize> = self.incident[i]
                    .iter()
                    .flat_map(|&s| self.simplex(s).iter().copied())
                    .filter_map(|v| self.origin(v))
                    .filter(|&j| j != i)
                    .collect();
                nb.sort_unstable();
                nb.dedup();
                nb
            })
            .collect()
    }

    /// Sphere-index edges `(i, j)`, `i < j`, of the triangulation.
    pub fn sphere_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, nb) in self.sphere_neighbors().into_iter().enumerate() {
            out.extend(nb.into_iter().filter(|&j| j > i).map(|j| (i, j)));
        }
        out
    }

    /// Whether each sphere shares an edge with a synthetic hull point.
    pub fn touches_synthetic(&self) -> Vec<bool> {
        (0..self.n_spheres)
            .map(|i| self.incident[i].iter().any(|&s| self.has_synthetic(s)))
            .collect()
    }

    /// Circumcenter and circumradius of simplex `s`.
    pub fn circumsphere(&self, s: usize) -> (Vec3, f64) {
        let p: Vec<&Vec3> = self.simplex(s).iter().map(|&v| &self.points[v]).collect();
        let c = if self.dim == 2 {
            circumcenter2(p[0], p[1], p[2])
        } else {
            circumcenter3(p[0], p[1], p[2], p[3])
        };
        (c, (c - p[0]).norm())
    }

    fn ghost_layer_suffices(&self, periods: &[(usize, f64)], margin: f64) -> bool {
        for s in 0..self.simplices.len() {
            let vs = self.simplex(s);
            if vs.iter().any(|&v| self.is_synthetic(v)) {
                continue;
            }
            if !vs.iter().any(|&v| v < self.n_spheres) {
                continue;
            }
            let (c, r) = self.circumsphere(s);
            for &(k, l) in periods {
                if c[k] - r < -margin || c[k] + r > l + margin {
                    return false;
                }
            }
        }
        true
    }
}

pub fn circumcenter2(a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let (bx, by) = (b.x - a.x, b.y - a.y);
    let (cx, cy) = (c.x - a.x, c.y - a.y);
    let d = 2.0 * (bx * cy - by * cx);
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    Vec3::new(
        a.x + (cy * b2 - by * c2) / d,
        a.y + (bx * c2 - cx * b2) / d,
        0.0,
    )
}

pub fn circumcenter3(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> Vec3 {
    let u = b - a;
    let v = c - a;
    let w = d - a;
    let den = 2.0 * u.dot(&v.cross(&w));
    a + (u.norm_squared() * v.cross(&w) + v.norm_squared() * w.cross(&u) + w.norm_squared() * u.cross(&v)) / den
}

fn check_input(dim: usize, pts: &[Vec3]) -> Result<()> {
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_unstable_by(|&a, &b| {
        let (p, q) = (&pts[a], &pts[b]);
        p.x.total_cmp(&q.x)
            .then(p.y.total_cmp(&q.y))
            .then(p.z.total_cmp(&q.z))
    });
    for w in order.windows(2) {
        if pts[w[0]] == pts[w[1]] {
            return Err(Error::Degenerate(format!(
                "coincident centers {} and {}",
                w[0].min(w[1]),
                w[0].max(w[1])
            )));
        }
    }
    if pts.len() <= dim {
        return Ok(());
    }
    let p0 = &pts[0];
    let p1 = &pts[1];
    let flat = if dim == 2 {
        pts.iter().all(|q| orient2d(p0, p1, q) == 0.0)
    } else {
        let collinear = |q: &Vec3| {
            let xy = |v: &Vec3| Vec3::new(v.x, v.y, 0.0);
            let yz = |v: &Vec3| Vec3::new(v.y, v.z, 0.0);
            let xz = |v: &Vec3| Vec3::new(v.x, v.z, 0.0);
            orient2d(&xy(p0), &xy(p1), &xy(q)) == 0.0
                && orient2d(&yz(p0), &yz(p1), &yz(q)) == 0.0
                && orient2d(&xz(p0), &xz(p1), &xz(q)) == 0.0
        };
        match pts.iter().find(|q| !collinear(q)) {
            None => true,
            Some(p2) => pts.iter().all(|q| orient3d(p0, p1, p2, q) == 0.0),
        }
    };
    if flat {
        let what = if dim == 2 { "collinear" } else { "coplanar" };
        return Err(Error::Degenerate(format!("all points are {what}")));
    }
    Ok(())
}

fn with_ghosts(centers: &[Vec3], periods: &[(usize, f64)], margin: f64) -> (Vec<Vec3>, Vec<VertexKind>) {
    let mut pts = centers.to_vec();
    let mut kinds: Vec<VertexKind> = (0..centers.len()).map(VertexKind::Sphere).collect();
    let m = periods.len();
    let combos = 3usize.pow(m as u32);
    for (i, c) in centers.iter().enumerate() {
        for code in 0..combos {
            let mut rest = code;
            let mut q = *c;
            let mut moved = false;
            let mut inside = true;
            for &(k, l) in periods {
                let shift = (rest % 3) as f64 - 1.0;
                rest /= 3;
                if shift != 0.0 {
                    moved = true;
                    q[k] += shift * l;
                    if q[k] < -margin || q[k] >= l + margin {
                        inside = false;
                    }
                }
            }
            if moved && inside {
                pts.push(q);
                kinds.push(VertexKind::Ghost(i));
            }
        }
    }
    (pts, kinds)
}

fn morton_order(dim: usize, pts: &[Vec3]) -> Vec<usize> {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for p in pts {
        for k in 0..dim {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let bits: u32 = if dim == 2 { 16 } else { 10 };
    let scale = ((1u64 << bits) - 1) as f64;
    let code = |p: &Vec3| -> u64 {
        let mut q = [0u64; 3];
        for k in 0..dim {
            let span = hi[k] - lo[k];
            let t = if span > 0.0 { (p[k] - lo[k]) / span } else { 0.0 };
            q[k] = (t * scale) as u64;
        }
        let mut c = 0u64;
        for b in (0..bits).rev() {
            for qk in q.iter().take(dim) {
                c = (c << 1) | ((qk >> b) & 1);
            }
        }
        c
    };
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by_cached_key(|&i| (code(&pts[i]), i));
    order
}

fn construct(dim: usize, mut points: Vec<Vec3>, mut kinds: Vec<VertexKind>, n_spheres: usize) -> Result<Triangulation> {
    let n_real = points.len();
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for p in &points {
        for k in 0..dim {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let center = (lo + hi) / 2.0;
    let extent = (0..dim).map(|k| hi[k] - lo[k]).fold(1.0, f64::max);
    // Slightly uneven distances keep the hull points off a common sphere.
    for k in 0..dim {
        for (side, sign) in [(0.0, 1.0), (0.05, -1.0)] {
            let mut q = center;
            q[k] += sign * (10.0 + 0.1 * k as f64 + side) * extent;
            points.push(q);
            kinds.push(VertexKind::Synthetic);
        }
    }
    let mut mesh = Mesh::seed(dim, &points, n_real)?;
    for q in morton_order(dim, &points[..n_real]) {
        mesh.insert(q)?;
    }
    Ok(mesh.finish(kinds, n_spheres))
}

struct Mesh<'a> {
    dim: usize,
    pts: &'a [Vec3],
    verts: Vec<[usize; 4]>,
    nbr: Vec<[usize; 4]>,
    alive: Vec<bool>,
    free: Vec<usize>,
    mark: Vec<u32>,
    stamp: u32,
    hint: usize,
}

impl<'a> Mesh<'a> {
    /// Delaunay triangulation of the synthetic points by exhaustive search.
    fn seed(dim: usize, pts: &'a [Vec3], first: usize) -> Result<Self> {
        let k = dim + 1;
        let hull: Vec<usize> = (first..pts.len()).collect();
        let mut mesh = Mesh {
            dim,
            pts,
            verts: Vec::new(),
            nbr: Vec::new(),
            alive: Vec::new(),
            free: Vec::new(),
            mark: Vec::new(),
            stamp: 0,
            hint: 0,
        };
        let m = hull.len();
        let mut pick = vec![0usize; k];
        let mut combos = Vec::new();
        fn rec(start: usize, depth: usize, m: usize, pick: &mut [usize], out: &mut Vec<Vec<usize>>) {
            if depth == pick.len() {
                out.push(pick.to_vec());
                return;
            }
            for i in start..m {
                pick[depth] = i;
                rec(i + 1, depth + 1, m, pick, out);
            }
        }
        rec(0, 0, m, &mut pick, &mut combos);
        for c in combos {
            let mut v = [NONE; 4];
            for (slot, &i) in c.iter().enumerate() {
                v[slot] = hull[i];
            }
            let o = mesh.orient(&v);
            if o == 0.0 {
                continue;
            }
            if o < 0.0 {
                v.swap(0, 1);
            }
            let empty = hull
                .iter()
                .filter(|h| !v[..k].contains(h))
                .all(|&h| !mesh.conflicts_verts(&v, h));
            if empty {
                mesh.verts.push(v);
                mesh.nbr.push([NONE; 4]);
                mesh.alive.push(true);
                mesh.mark.push(0);
            }
        }
        let mut faces: FxHashMap<[usize; 3], (usize, usize)> = FxHashMap::default();
        for s in 0..mesh.verts.len() {
            for j in 0..k {
                let key = face_key(&mesh.verts[s], k, j, NONE);
                if let Some((t, i)) = faces.remove(&key) {
                    mesh.nbr[s][j] = t;
                    mesh.nbr[t][i] = s;
                } else {
                    faces.insert(key, (s, j));
                }
            }
        }
        if mesh.verts.is_empty() {
            return Err(Error::Degenerate("hull seeding failed".into()));
        }
        Ok(mesh)
    }

    #[inline]
    fn k(&self) -> usize {
        self.dim + 1
    }

    #[inline]
    fn orient(&self, v: &[usize; 4]) -> f64 {
        let p = self.pts;
        if self.dim == 2 {
            orient2d(&p[v[0]], &p[v[1]], &p[v[2]])
        } else {
            orient3d(&p[v[0]], &p[v[1]], &p[v[2]], &p[v[3]])
        }
    }

    #[inline]
    fn conflicts_verts(&self, v: &[usize; 4], q: usize) -> bool {
        let p = self.pts;
        if self.dim == 2 {
            incircle_sos([&p[v[0]], &p[v[1]], &p[v[2]], &p[q]], [v[0], v[1], v[2], q]) > 0
        } else {
            insphere_sos(
                [&p[v[0]], &p[v[1]], &p[v[2]], &p[v[3]], &p[q]],
                [v[0], v[1], v[2], v[3], q],
            ) > 0
        }
    }

    fn locate(&self, q: usize) -> Option<usize> {
        let k = self.k();
        let mut t = self.hint;
        let mut rot = q;
        let budget = 4 * self.verts.len() + 1000;
        'walk: for _ in 0..budget {
            let v = self.verts[t];
            for s in 0..k {
                let j = (s + rot) % k;
                let mut w = v;
                w[j] = q;
                if self.orient(&w) < 0.0 {
                    let nt = self.nbr[t][j];
                    if nt == NONE {
                        return None;
                    }
                    t = nt;
                    rot = rot.wrapping_add(1);
                    continue 'walk;
                }
            }
            return Some(t);
        }
        None
    }

    fn locate_by_scan(&self, q: usize) -> Option<usize> {
        let k = self.k();
        (0..self.verts.len()).find(|&t| {
            self.alive[t]
                && (0..k).all(|j| {
                    let mut w = self.verts[t];
                    w[j] = q;
                    self.orient(&w) >= 0.0
                })
        })
    }

    fn alloc(&mut self, v: [usize; 4]) -> usize {
        if let Some(s) = self.free.pop() {
            self.verts[s] = v;
            self.nbr[s] = [NONE; 4];
            self.alive[s] = true;
            s
        } else {
            self.verts.push(v);
            self.nbr.push([NONE; 4]);
            self.alive.push(true);
            self.mark.push(0);
            self.verts.len() - 1
        }
    }

    fn insert(&mut self, q: usize) -> Result<()> {
        let k = self.k();
        let start = self
            .locate(q)
            .or_else(|| self.locate_by_scan(q))
            .ok_or_else(|| Error::Degenerate(format!("point {q} outside the hull")))?;
        if !self.conflicts_verts(&self.verts[start], q) {
            return Err(Error::Degenerate(format!("point {q} duplicates a vertex")));
        }
        self.stamp = self.stamp.wrapping_add(1);
        let stamp = self.stamp;
        self.mark[start] = stamp;
        let mut cavity = vec![start];
        let mut boundary: Vec<(usize, usize)> = Vec::new();
        let mut i = 0;
        while i < cavity.len() {
            let t = cavity[i];
            i += 1;
            for j in 0..k {
                let o = self.nbr[t][j];
                if o != NONE && self.mark[o] == stamp {
                    continue;
                }
                if o != NONE && self.conflicts_verts(&self.verts[o], q) {
                    self.mark[o] = stamp;
                    cavity.push(o);
                } else {
                    boundary.push((t, j));
                }
            }
        }
        let created: Vec<([usize; 4], usize, usize)> = boundary
            .iter()
            .map(|&(t, j)| {
                let mut v = self.verts[t];
                v[j] = q;
                (v, self.nbr[t][j], j)
            })
            .collect();
        for &t in &cavity {
            self.alive[t] = false;
            self.free.push(t);
        }
        let mut links: FxHashMap<[usize; 3], (usize, usize)> = FxHashMap::default();
        let mut last = NONE;
        for (v, o, j) in created {
            if self.orient(&v) <= 0.0 {
                return Err(Error::Degenerate(format!("flat simplex while inserting point {q}")));
            }
            let s = self.alloc(v);
            self.nbr[s][j] = o;
            if o != NONE {
                for m in 0..k {
                    let w = self.verts[o][m];
                    if !(0..k).any(|x| x != j && v[x] == w) {
                        self.nbr[o][m] = s;
                        break;
                    }
                }
            }
            for m in 0..k {
                if m == j {
                    continue;
                }
                let key = face_key(&v, k, m, q);
                if let Some((s2, m2)) = links.remove(&key) {
                    self.nbr[s][m] = s2;
                    self.nbr[s2][m2] = s;
                } else {
                    links.insert(key, (s, m));
                }
            }
            last = s;
        }
        debug_assert!(links.is_empty(), "unmatched cavity facets");
        self.hint = last;
        Ok(())
    }

    fn finish(self, kinds: Vec<VertexKind>, n_spheres: usize) -> Triangulation {
        let mut remap = vec![NONE; self.verts.len()];
        let mut simplices = Vec::new();
        for (s, &alive) in self.alive.iter().enumerate() {
            if alive {
                remap[s] = simplices.len();
                simplices.push(self.verts[s]);
            }
        }
        let adjacency: Vec<[usize; 4]> = (0..self.verts.len())
            .filter(|&s| self.alive[s])
            .map(|s| {
                let mut a = self.nbr[s];
                for x in a.iter_mut() {
                    if *x != NONE {
                        *x = remap[*x];
                    }
                }
                a
            })
            .collect();
        let mut incident = vec![Vec::new(); self.pts.len()];
        for (s, v) in simplices.iter().enumerate() {
            for &x in &v[..self.dim + 1] {
                incident[x].push(s);
            }
        }
        Triangulation {
            dim: self.dim,
            points: self.pts.to_vec(),
            kinds,
            simplices,
            adjacency,
            incident,
            n_spheres,
        }
    }
}

/// Sorted vertices of the facet of `v` opposite slot `j`, excluding `skip`.
#[inline]
fn face_key(v: &[usize; 4], k: usize, j: usize, skip: usize) -> [usize; 3] {
    let mut key = [NONE; 3];
    let mut n = 0;
    for (x, &w) in v.iter().enumerate().take(k) {
        if x != j && w != skip {
            key[n] = w;
            n += 1;
        }
    }
    key[..n].sort_unstable();
    key
}
