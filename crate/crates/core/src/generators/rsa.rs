//! Random sequential inhibition: uniform proposals, rejected on overlap.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ball_volume, Boundary, Configuration, Provenance, Sphere, Vec3};
use crate::grid::NeighborGrid;
use crate::rng::rng_from_seed;

/// Highest solid fraction accepted for a sequential inhibition target.
pub const MAX_RSA_FRACTION: f64 = 0.3;
/// Proposals allowed per requested sphere.
pub const ATTEMPTS_PER_SPHERE: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RsaParams {
    pub n: usize,
    #[serde(default = "three")]
    pub dim: usize,
    /// Region: a periodic box or a hard-walled box.
    pub region: Boundary,
}

fn three() -> usize {
    3
}

/// Periodic cube holding `n` unit-diameter spheres at solid fraction `fraction`.
pub fn periodic_box_for(n: usize, dim: usize, fraction: f64) -> Boundary {
    let edge = (n as f64 * ball_volume(dim, 0.5) / fraction).powf(1.0 / dim as f64);
    let mut extents = Vec3::zeros();
    for k in 0..dim {
        extents[k] = edge;
    }
    Boundary::Periodic { extents }
}

/// `n` unit-diameter spheres by sequential inhibition in a box. Hard walls
/// keep whole spheres inside.
pub fn rsa_initialize(params: &RsaParams, seed: u64) -> Result<Configuration> {
    let RsaParams { n, dim, region } = *params;
    if n == 0 {
        return Err(Error::param("n must be at least 1"));
    }
    if dim != 2 && dim != 3 {
        return Err(Error::param(format!("dimension must be 2 or 3, got {dim}")));
    }
    let (lo, hi) = match region {
        Boundary::Periodic { extents } => (Vec3::zeros(), extents),
        Boundary::HardBox { extents } => {
            let mut lo = Vec3::zeros();
            let mut hi = extents;
            for k in 0..dim {
                lo[k] = 0.5;
                hi[k] -= 0.5;
                if hi[k] <= lo[k] {
                    return Err(Error::param("box narrower than one diameter"));
                }
            }
            (lo, hi)
        }
        _ => return Err(Error::param("sequential inhibition needs a periodic or hard-walled box")),
    };
    let volume = region.volume(dim).expect("box region has a volume");
    let solid = n as f64 * ball_volume(dim, 0.5);
    if solid > MAX_RSA_FRACTION * volume * (1.0 + 1e-12) {
        return Err(Error::param(format!(
            "target fraction {:.3} exceeds {MAX_RSA_FRACTION}",
            solid / volume
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut grid = NeighborGrid::new(dim, region, 1.0);
    let mut spheres = Vec::with_capacity(n);
    let budget = ATTEMPTS_PER_SPHERE * n;
    let mut attempts = 0;
    while spheres.len() < n {
        if attempts == budget {
            return Err(Error::Saturated {
                attempts,
                placed: spheres.len(),
                target: n,
            });
        }
        attempts += 1;
        let mut p = Vec3::zeros();
        for k in 0..dim {
            p[k] = lo[k] + rng.random::<f64>() * (hi[k] - lo[k]);
        }
        let mut free = true;
        grid.for_each_within(&p, 1.0, |_, d| {
            if d.norm() < 1.0 {
                free = false;
            }
        });
        if free {
            grid.insert(spheres.len(), p);
            spheres.push(Sphere::new(p, 0.5));
        }
    }
    let prov = Provenance::new("rsa", seed)
        .with("n", n)
        .with("dim", dim)
        .with("attempts", attempts);
    Configuration::new(dim, spheres, region, prov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::min_gap;
    use proptest::prelude::*;

    #[test]
    fn single_sphere_is_uniform_in_region() {
        let region = Boundary::HardBox { extents: Vec3::new(4.0, 5.0, 6.0) };
        let c = rsa_initialize(&RsaParams { n: 1, dim: 3, region }, 3).unwrap();
        assert_eq!(c.len(), 1);
        let p = c.spheres[0].center;
        assert!((0.5..=3.5).contains(&p.x) && (0.5..=4.5).contains(&p.y) && (0.5..=5.5).contains(&p.z));
    }

    #[test]
    fn fraction_is_the_count_identity() {
        let region = periodic_box_for(500, 3, 0.25);
        let c = rsa_initialize(&RsaParams { n: 500, dim: 3, region }, 1).unwrap();
        let phi = c.solid_volume() / region.volume(3).unwrap();
        assert!((phi - 0.25).abs() < 1e-12);
    }

    #[test]
    fn rejects_dense_targets() {
        let region = periodic_box_for(100, 3, 0.31);
        assert!(matches!(
            rsa_initialize(&RsaParams { n: 100, dim: 3, region }, 1),
            Err(Error::InvalidParam(_))
        ));
    }

    #[test]
    fn saturation_is_reported() {
        // In a cube of edge 1.6 a second sphere fits only if the first sits
        // near a corner.
        let region = Boundary::HardBox { extents: Vec3::repeat(1.6) };
        let err = rsa_initialize(&RsaParams { n: 2, dim: 3, region }, 1).unwrap_err();
        assert!(
            matches!(err, Error::Saturated { attempts: 10_000, placed: 1, target: 2 }),
            "{err:?}"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn outputs_never_overlap(n in 1usize..300, dim in 2usize..=3, seed in any::<u64>(), frac in 0.05f64..0.3) {
            let region = periodic_box_for(n, dim, frac);
            let c = rsa_initialize(&RsaParams { n, dim, region }, seed).unwrap();
            prop_assert_eq!(c.len(), n);
            if n > 1 {
                prop_assert!(min_gap(&c).unwrap() >= 0.0);
            }
        }
    }
}
