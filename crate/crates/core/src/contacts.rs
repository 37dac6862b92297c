//! Contact network under an explicit contact rule, local jamming and rattlers.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::geometry::{Boundary, Configuration, SpherePartition, Vec3};
use crate::rng::derive_seed;
use crate::tessellation::Triangulation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GapDecision {
    /// Accept when the gap is at most the cutoff.
    Threshold,
    /// Accept with probability `Phi((cutoff - gap) / sigma)`.
    Stochastic { seed: u64 },
}

/// When two surfaces count as touching.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ContactRule {
    HardTolerance { eps: f64 },
    Gaussian {
        sigma: f64,
        cutoff: f64,
        decision: GapDecision,
    },
}

impl Default for ContactRule {
    fn default() -> Self {
        ContactRule::HardTolerance { eps: 1e-6 }
    }
}

impl ContactRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ContactRule::HardTolerance { eps } if eps.is_finite() && eps >= 0.0 => Ok(()),
            ContactRule::Gaussian { sigma, cutoff, .. }
                if sigma.is_finite() && sigma > 0.0 && cutoff.is_finite() && cutoff >= 0.0 =>
            {
                Ok(())
            }
            _ => Err(Error::param(format!("invalid contact rule {self:?}"))),
        }
    }

    /// Decide one surface pair; `key` identifies the pair for stochastic rules.
    fn accepts(&self, gap: f64, key: u64, normal: &Normal) -> bool {
        match *self {
            ContactRule::HardTolerance { eps } => gap <= eps,
            ContactRule::Gaussian {
                cutoff,
                decision: GapDecision::Threshold,
                ..
            } => gap <= cutoff,
            ContactRule::Gaussian {
                sigma,
                cutoff,
                decision: GapDecision::Stochastic { seed },
            } => {
                let u = (derive_seed(seed, key) >> 11) as f64 / (1u64 << 53) as f64;
                u < normal.cdf((cutoff - gap) / sigma)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub i: usize,
    pub j: usize,
    pub gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallContact {
    pub sphere: usize,
    pub axis: usize,
    /// Upper wall of the axis (the base plane is the lower wall of the last axis).
    pub upper: bool,
    pub gap: f64,
}

impl WallContact {
    /// Unit vector from the sphere center towards the wall.
    pub fn normal(&self) -> Vec3 {
        let mut n = Vec3::zeros();
        n[self.axis] = if self.upper { 1.0 } else { -1.0 };
        n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactNetwork {
    pub n: usize,
    /// Sphere contacts with `i < j`, sorted.
    pub edges: Vec<Contact>,
    pub wall_contacts: Vec<WallContact>,
    pub rule: ContactRule,
}

impl ContactNetwork {
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            adj[e.i].push(e.j);
            adj[e.j].push(e.i);
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for e in &self.edges {
            d[e.i] += 1;
            d[e.j] += 1;
        }
        d
    }

    /// Unit vectors from the center of sphere `i` to its contact points,
    /// walls included.
    pub fn contact_normals(&self, config: &Configuration, i: usize) -> Vec<Vec3> {
        let mut out: Vec<Vec3> = self
            .edges
            .iter()
            .filter_map(|e| {
                if e.i == i {
                    Some(config.delta(i, e.j))
                } else if e.j == i {
                    Some(config.delta(i, e.i))
                } else {
                    None
                }
            })
            .filter_map(|d| d.try_normalize(0.0))
            .collect();
        out.extend(self.wall_contacts.iter().filter(|w| w.sphere == i).map(|w| w.normal()));
        out
    }

    /// Lines `i j gap`.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            writeln!(out, "{} {} {:.9e}", e.i, e.j, e.gap).unwrap();
        }
        out
    }
}

pub fn build_contact_network(
    config: &Configuration,
    tri: &Triangulation,
    rule: ContactRule,
) -> Result<ContactNetwork> {
    rule.validate()?;
    let n = config.len();
    if tri.sphere_count() != n {
        return Err(Error::TriangulationMismatch(format!(
            "triangulation over {} spheres, configuration has {n}",
            tri.sphere_count()
        )));
    }
    let normal = Normal::standard();
    let mut edges = Vec::new();
    for (i, j) in tri.sphere_edges() {
        let gap = config.gap(i, j);
        if rule.accepts(gap, (i * n + j) as u64, &normal) {
            edges.push(Contact { i, j, gap });
        }
    }
    let dim = config.dim;
    let mut walls = Vec::new();
    let wall_key = |i: usize, axis: usize, upper: bool| {
        ((n * n + i * 6 + axis * 2 + upper as usize) as u64) | (1 << 63)
    };
    for (i, s) in config.spheres.iter().enumerate() {
        let mut consider = |axis: usize, upper: bool, gap: f64| {
            if rule.accepts(gap, wall_key(i, axis, upper), &normal) {
                walls.push(WallContact {
                    sphere: i,
                    axis,
                    upper,
                    gap,
                });
            }
        };
        match config.boundary {
            Boundary::HardBox { extents } => {
                for axis in 0..dim {
                    consider(axis, false, s.center[axis] - s.radius);
                    consider(axis, true, extents[axis] - s.center[axis] - s.radius);
                }
            }
            Boundary::OpenWithBase { .. } => {
                consider(dim - 1, false, s.center[dim - 1] - s.radius);
            }
            _ => {}
        }
    }
    Ok(ContactNetwork {
        n,
        edges,
        wall_contacts: walls,
        rule,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinationHistogram {
    /// Coordination number -> count, interior spheres.
    pub interior: BTreeMap<usize, usize>,
    pub interior_mean: f64,
    /// Same for boundary spheres.
    pub boundary: BTreeMap<usize, usize>,
    pub boundary_mean: f64,
}

/// Coordination numbers (sphere contacts only) split by the interior/boundary
/// partition.
pub fn coordination_histogram(net: &ContactNetwork, part: &SpherePartition) -> CoordinationHistogram {
    let deg = net.degrees();
    let tally = |set: &[usize]| {
        let mut h = BTreeMap::new();
        for &i in set {
            *h.entry(deg[i]).or_insert(0) += 1;
        }
        let mean = if set.is_empty() {
            f64::NAN
        } else {
            set.iter().map(|&i| deg[i] as f64).sum::<f64>() / set.len() as f64
        };
        (h, mean)
    };
    let (interior, interior_mean) = tally(&part.interior);
    let (boundary, boundary_mean) = tally(&part.boundary);
    CoordinationHistogram {
        interior,
        interior_mean,
        boundary,
        boundary_mean,
    }
}

const DIR_TOL: f64 = 1e-9;

/// Candidate escape directions: extreme rays and lineality directions of
/// the cone `{u : u . n_k <= 0}`.
fn candidate_directions(dim: usize, normals: &[Vec3]) -> Vec<Vec3> {
    let mut out = Vec::new();
    let mut push = |v: Vec3| {
        if let Some(u) = v.try_normalize(1e-12) {
            out.push(u);
            out.push(-u);
        }
    };
    if dim == 2 {
        for n in normals {
            push(Vec3::new(-n.y, n.x, 0.0));
        }
    } else {
        for a in 0..normals.len() {
            for b in a + 1..normals.len() {
                let m = normals[a].cross(&normals[b]);
                push(m);
                push(normals[a].cross(&m));
                push(normals[b].cross(&m));
            }
            for axis in 0..3 {
                let mut e = Vec3::zeros();
                e[axis] = 1.0;
                push(normals[a].cross(&e));
            }
        }
    }
    out
}

fn blocks(u: &Vec3, normals: &[Vec3]) -> bool {
    normals.iter().any(|n| u.dot(n) > DIR_TOL)
}

/// A sphere is locally jammed when no translation moves it away from, or
/// tangentially to, all of its contacts: the contact normals (walls
/// included) must positively span space.
pub fn local_jam_check(config: &Configuration, net: &ContactNetwork, i: usize) -> bool {
    let normals = net.contact_normals(config, i);
    jammed_by(config.dim, &normals)
}

/// Positive spanning test on a set of unit normals.
pub fn jammed_by(dim: usize, normals: &[Vec3]) -> bool {
    if normals.len() <= dim {
        return false;
    }
    let cands = candidate_directions(dim, normals);
    if cands.is_empty() {
        return false;
    }
    cands.iter().all(|u| blocks(u, normals))
}

/// Gravitational stability: the contact forces can balance gravity, i.e.
/// the downward direction lies in the cone of contact normals.
pub fn gravity_stable(config: &Configuration, net: &ContactNetwork, i: usize) -> bool {
    let normals = net.contact_normals(config, i);
    supported_by(config.dim, &normals)
}

pub fn supported_by(dim: usize, normals: &[Vec3]) -> bool {
    let mut down = Vec3::zeros();
    down[dim - 1] = -1.0;
    if normals.is_empty() {
        return false;
    }
    if normals.iter().any(|n| (n - down).norm() < 1e-7) {
        return true;
    }
    let mut cands = candidate_directions(dim, normals);
    for n in normals {
        // Direction of descent tangent to a single contact.
        cands.push((down - n * n.dot(&down)).try_normalize(1e-12).unwrap_or(down));
    }
    cands.push(down);
    !cands
        .iter()
        .any(|u| u.dot(&down) > 1e-7 && !blocks(u, normals))
}

/// Spheres failing the local jam check whose Delaunay (Voronoi) neighbors
/// all pass it.
pub fn find_rattlers(config: &Configuration, net: &ContactNetwork, tri: &Triangulation) -> Vec<usize> {
    let jammed: Vec<bool> = (0..config.len()).map(|i| local_jam_check(config, net, i)).collect();
    tri.sphere_neighbors()
        .iter()
        .enumerate()
        .filter(|(i, nb)| !jammed[*i] && !nb.is_empty() && nb.iter().all(|&j| jammed[j]))
        .map(|(i, _)| i)
        .collect()
}

/// Component label per sphere (labels numbered in order of first sphere)
/// and the number of components.
pub fn connected_components(net: &ContactNetwork) -> (Vec<usize>, usize) {
    let adj = net.adjacency();
    let mut label = vec![usize::MAX; net.n];
    let mut count = 0;
    let mut stack = Vec::new();
    for s in 0..net.n {
        if label[s] != usize::MAX {
            continue;
        }
        label[s] = count;
        stack.push(s);
        while let Some(u) = stack.pop() {
            for &w in &adj[u] {
                if label[w] == usize::MAX {
                    label[w] = count;
                    stack.push(w);
                }
            }
        }
        count += 1;
    }
    (label, count)
}
