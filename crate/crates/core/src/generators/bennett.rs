//! Central greedy placement: each new sphere goes to the position closest to
//! the origin among those touching `d` placed spheres without overlap.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Boundary, Configuration, Provenance, Sphere, Vec3};
use crate::grid::NeighborGrid;
use crate::rng::rng_from_seed;

/// Starting cluster.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedCluster {
    /// Greedy start from one sphere: a triangle in 2D, a tetrahedron in 3D.
    #[default]
    Simplex,
    /// Three discs at the corners of a unit right angle (2D only).
    RightAngle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BennettParams {
    pub n: usize,
    #[serde(default = "three")]
    pub dim: usize,
    #[serde(default)]
    pub seed_cluster: SeedCluster,
}

fn three() -> usize {
    3
}

/// Positions at unit distance from both points (2D).
fn touching_two(a: &Vec3, b: &Vec3) -> Option<[Vec3; 2]> {
    let d = b - a;
    let len = d.norm();
    if len >= 2.0 || len < 1e-12 {
        return None;
    }
    let h = (1.0 - 0.25 * len * len).sqrt();
    let mid = a + 0.5 * d;
    let perp = Vec3::new(-d.y, d.x, 0.0) / len;
    Some([mid + h * perp, mid - h * perp])
}

/// Positions at unit distance from three points (3D).
fn touching_three(a: &Vec3, b: &Vec3, c: &Vec3) -> Option<[Vec3; 2]> {
    let ab = b - a;
    let d = ab.norm();
    if d >= 2.0 || d < 1e-12 {
        return None;
    }
    let ex = ab / d;
    let ac = c - a;
    let i = ex.dot(&ac);
    let ey = ac - i * ex;
    let ey_len = ey.norm();
    if ey_len < 1e-9 {
        return None;
    }
    let ey = ey / ey_len;
    let ez = ex.cross(&ey);
    let j = ey.dot(&ac);
    let x = 0.5 * d;
    let y = (i * i + j * j - 2.0 * i * x) / (2.0 * j);
    let z2 = 1.0 - x * x - y * y;
    if z2 < 0.0 {
        return None;
    }
    let z = z2.sqrt();
    let base = a + x * ex + y * ey;
    Some([base + z * ez, base - z * ez])
}

fn unit_vector(rng: &mut impl Rng, dim: usize) -> Vec3 {
    loop {
        let mut v = Vec3::zeros();
        for k in 0..dim {
            v[k] = 2.0 * rng.random::<f64>() - 1.0;
        }
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

struct Cluster<R: Rng> {
    dim: usize,
    centers: Vec<Vec3>,
    grid: NeighborGrid,
    heap: BinaryHeap<Reverse<(i64, u64, usize)>>,
    candidates: Vec<Vec3>,
    rng: R,
}

impl<R: Rng> Cluster<R> {
    fn new(dim: usize, rng: R) -> Self {
        Cluster {
            dim,
            centers: Vec::new(),
            grid: NeighborGrid::new(dim, Boundary::None, 1.0),
            heap: BinaryHeap::new(),
            candidates: Vec::new(),
            rng,
        }
    }

    fn free(&self, p: &Vec3) -> bool {
        let mut ok = true;
        self.grid.for_each_within(p, 1.0, |_, d| {
            if d.norm() < 1.0 - 1e-10 {
                ok = false;
            }
        });
        ok
    }

    fn push_candidate(&mut self, p: Vec3) {
        if !self.free(&p) {
            return;
        }
        // Distances equal to within 1e-9 count as ties, broken at random.
        let key = (p.norm() * 1e9).round() as i64;
        let tie = self.rng.random::<u64>();
        self.heap.push(Reverse((key, tie, self.candidates.len())));
        self.candidates.push(p);
    }

    fn place(&mut self, p: Vec3) {
        let s = self.centers.len();
        self.centers.push(p);
        self.grid.insert(s, p);
        let near: Vec<usize> = self.grid.query(&p, 2.0).into_iter().filter(|&j| j != s).collect();
        if self.dim == 2 {
            for &a in &near {
                if let Some(ps) = touching_two(&p, &self.centers[a]) {
                    for q in ps {
                        self.push_candidate(q);
                    }
                }
            }
        } else {
            for (x, &a) in near.iter().enumerate() {
                for &b in &near[x + 1..] {
                    if (self.centers[a] - self.centers[b]).norm() >= 2.0 {
                        continue;
                    }
                    if let Some(ps) = touching_three(&p, &self.centers[a], &self.centers[b]) {
                        for q in ps {
                            self.push_candidate(q);
                        }
                    }
                }
            }
        }
    }

    fn next(&mut self) -> Option<Vec3> {
        while let Some(Reverse((_, _, idx))) = self.heap.pop() {
            let p = self.candidates[idx];
            if self.free(&p) {
                return Some(p);
            }
        }
        None
    }

    /// Greedy start: every position touching all placed spheres lies at unit
    /// distance from the first, so each choice is a seeded random tie-break.
    fn simplex_start(&mut self, n: usize) {
        let dim = self.dim;
        self.place(Vec3::zeros());
        if n == 1 {
            return;
        }
        let u = unit_vector(&mut self.rng, dim);
        self.place(u);
        if n == 2 {
            return;
        }
        let a = self.centers[0];
        let b = self.centers[1];
        if dim == 2 {
            let ps = touching_two(&a, &b).expect("touching pair");
            let pick = self.rng.random_range(0..2);
            self.place(ps[pick]);
            return;
        }
        // Circle of positions touching both, centred on the midpoint.
        let mid = 0.5 * (a + b);
        let axis = b - a;
        let w = unit_vector(&mut self.rng, 3);
        let perp = (w - w.dot(&axis) * axis).normalize();
        self.place(mid + 0.75f64.sqrt() * perp);
        if n == 3 {
            return;
        }
        let ps = touching_three(&a, &b, &self.centers[2]).expect("touching triple");
        let pick = self.rng.random_range(0..2);
        self.place(ps[pick]);
    }
}

/// Central greedy placement around the origin.
pub fn bennett_central(params: &BennettParams, seed: u64) -> Result<Configuration> {
    let BennettParams { n, dim, seed_cluster } = *params;
    if n == 0 {
        return Err(Error::param("n must be at least 1"));
    }
    if dim != 2 && dim != 3 {
        return Err(Error::param(format!("dimension must be 2 or 3, got {dim}")));
    }
    let mut cl = Cluster::new(dim, rng_from_seed(seed));
    match seed_cluster {
        SeedCluster::Simplex => cl.simplex_start(n.min(dim + 1)),
        SeedCluster::RightAngle => {
            if dim != 2 {
                return Err(Error::param("the right-angle seed is planar"));
            }
            for p in [Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)].into_iter().take(n) {
                cl.place(p);
            }
        }
    }
    while cl.centers.len() < n {
        let Some(p) = cl.next() else {
            return Err(Error::Degenerate(format!(
                "no admissible position after {} spheres",
                cl.centers.len()
            )));
        };
        cl.place(p);
    }
    let spheres = cl.centers.iter().map(|&c| Sphere::new(c, 0.5)).collect();
    let prov = Provenance::new("bennett", seed)
        .with("n", n)
        .with("dim", dim)
        .with("seed_cluster", format!("{seed_cluster:?}"));
    Configuration::new(dim, spheres, Boundary::None, prov)
}
