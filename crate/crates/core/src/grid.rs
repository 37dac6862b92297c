//! Uniform cell list over sphere centers.

use rustc_hash::FxHashMap;

use crate::geometry::{Boundary, Configuration, Vec3};

/// Bucketed spatial index. Periodic axes wrap; other axes are unbounded.
#[derive(Debug, Clone)]
pub struct NeighborGrid {
    dim: usize,
    boundary: Boundary,
    cell: [f64; 3],
    wrap: [Option<i64>; 3],
    cells: FxHashMap<[i64; 3], Vec<usize>>,
    positions: Vec<Option<Vec3>>,
}

impl NeighborGrid {
    /// Empty grid whose cells are at least `min_cell` wide.
    pub fn new(dim: usize, boundary: Boundary, min_cell: f64) -> Self {
        let min_cell = min_cell.max(1e-9);
        let mut cell = [min_cell; 3];
        let mut wrap = [None; 3];
        for axis in 0..dim {
            if let Some(l) = boundary.period(axis, dim) {
                let n = ((l / min_cell).floor() as i64).max(1);
                cell[axis] = l / n as f64;
                wrap[axis] = Some(n);
            }
        }
        NeighborGrid {
            dim,
            boundary,
            cell,
            wrap,
            cells: FxHashMap::default(),
            positions: Vec::new(),
        }
    }

    pub fn build(config: &Configuration, min_cell: f64) -> Self {
        let mut g = NeighborGrid::new(config.dim, config.boundary, min_cell);
        g.positions.reserve(config.len());
        for (i, s) in config.spheres.iter().enumerate() {
            g.insert(i, s.center);
        }
        g
    }

    pub fn cell_size(&self) -> f64 {
        self.cell[..self.dim].iter().copied().fold(f64::INFINITY, f64::min)
    }

    #[inline]
    fn key(&self, p: &Vec3) -> [i64; 3] {
        let mut k = [0i64; 3];
        for axis in 0..self.dim {
            let mut c = (p[axis] / self.cell[axis]).floor() as i64;
            if let Some(n) = self.wrap[axis] {
                c = c.rem_euclid(n);
            }
            k[axis] = c;
        }
        k
    }

    pub fn insert(&mut self, idx: usize, p: Vec3) {
        if idx >= self.positions.len() {
            self.positions.resize(idx + 1, None);
        }
        debug_assert!(self.positions[idx].is_none(), "index {idx} inserted twice");
        self.positions[idx] = Some(p);
        let k = self.key(&p);
        self.cells.entry(k).or_default().push(idx);
    }

    pub fn remove(&mut self, idx: usize) {
        if let Some(p) = self.positions.get_mut(idx).and_then(Option::take) {
            let k = self.key(&p);
            if let Some(bucket) = self.cells.get_mut(&k) {
                if let Some(pos) = bucket.iter().position(|&j| j == idx) {
                    bucket.swap_remove(pos);
                }
            }
        }
    }

    /// Move an indexed point.
    pub fn update(&mut self, idx: usize, p: Vec3) {
        let old = self.positions[idx].expect("update of unindexed point");
        if self.key(&old) == self.key(&p) {
            self.positions[idx] = Some(p);
        } else {
            self.remove(idx);
            self.insert(idx, p);
        }
    }

    pub fn position(&self, idx: usize) -> Option<Vec3> {
        self.positions.get(idx).copied().flatten()
    }

    pub fn len(&self) -> usize {
        self.positions.iter().filter(|p| p.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Visit every indexed point in cells overlapping the cube of half-width
    /// `r` around `p`, without distance filtering.
    pub fn for_each_candidate(&self, p: &Vec3, r: f64, mut f: impl FnMut(usize)) {
        let mut lo = [0i64; 3];
        let mut hi = [0i64; 3];
        for axis in 0..self.dim {
            let a = ((p[axis] - r) / self.cell[axis]).floor() as i64;
            let b = ((p[axis] + r) / self.cell[axis]).floor() as i64;
            match self.wrap[axis] {
                Some(n) if b - a + 1 >= n => {
                    lo[axis] = 0;
                    hi[axis] = n - 1;
                }
                _ => {
                    lo[axis] = a;
                    hi[axis] = b;
                }
            }
        }
        let mut key = [0i64; 3];
        for i in lo[0]..=hi[0] {
            key[0] = self.wrap[0].map_or(i, |n| i.rem_euclid(n));
            for j in lo[1]..=hi[1] {
                key[1] = self.wrap[1].map_or(j, |n| j.rem_euclid(n));
                for k in lo[2]..=hi[2] {
                    key[2] = self.wrap[2].map_or(k, |n| k.rem_euclid(n));
                    if let Some(bucket) = self.cells.get(&key) {
                        for &idx in bucket {
                            f(idx);
                        }
                    }
                }
            }
        }
    }

    /// Visit every indexed point within distance `r` of `p` (minimum image),
    /// passing its index and the displacement from `p`.
    pub fn for_each_within(&self, p: &Vec3, r: f64, mut f: impl FnMut(usize, Vec3)) {
        let r2 = r * r;
        self.for_each_candidate(p, r, |idx| {
            let q = self.positions[idx].expect("bucketed point without position");
            let d = self.boundary.delta(p, &q, self.dim);
            if d.norm_squared() <= r2 {
                f(idx, d);
            }
        });
    }

    /// Indices of points within `r` of `p`, sorted.
    pub fn query(&self, p: &Vec3, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(p, r, |j, _| out.push(j));
        out.sort_unstable();
        out
    }
}
