//! Exact orientation and in-circumsphere predicates.
//!
//! The floating-point filters and exact fallbacks come from `robust`. Ties of
//! the in-circle/in-sphere tests are broken by symbolically perturbing the
//! lifted coordinate `w = |p|^2` of each point by `eps^(rank)`, where points
//! with larger index carry the dominant perturbation. The lifted determinant
//! is affine in every `w_i`, so the sign of the perturbed test is the sign of
//! the first non-vanishing cofactor in priority order.

use robust::{Coord, Coord3D};

use crate::geometry::Vec3;

#[inline]
fn c2(p: &Vec3) -> Coord<f64> {
    Coord { x: p.x, y: p.y }
}

#[inline]
fn c3(p: &Vec3) -> Coord3D<f64> {
    Coord3D {
        x: p.x,
        y: p.y,
        z: p.z,
    }
}

/// Positive when `a, b, c` turn counter-clockwise.
#[inline]
pub fn orient2d(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    robust::orient2d(c2(a), c2(b), c2(c))
}

/// Positive when `d` lies below the plane through `a, b, c` (counter-clockwise
/// seen from above); equals `det[a-d; b-d; c-d]`.
#[inline]
pub fn orient3d(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> f64 {
    robust::orient3d(c3(a), c3(b), c3(c), c3(d))
}

/// Positive when `d` lies inside the circle through counter-clockwise `a, b, c`.
#[inline]
pub fn incircle(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> f64 {
    robust::incircle(c2(a), c2(b), c2(c), c2(d))
}

/// Positive when `e` lies inside the sphere through `a, b, c, d`, given
/// `orient3d(a, b, c, d) > 0`.
#[inline]
pub fn insphere(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3, e: &Vec3) -> f64 {
    robust::insphere(c3(a), c3(b), c3(c), c3(d), c3(e))
}

fn priority_order<const N: usize>(ids: &[usize; N]) -> [usize; N] {
    let mut order: [usize; N] = std::array::from_fn(|i| i);
    order.sort_unstable_by(|&a, &b| ids[b].cmp(&ids[a]));
    order
}

/// Sign (+1 inside / -1 outside) of the perturbed in-circle test. Never zero
/// for distinct, non-collinear `a, b, c`.
pub fn incircle_sos(p: [&Vec3; 4], ids: [usize; 4]) -> i32 {
    let det = incircle(p[0], p[1], p[2], p[3]);
    if det != 0.0 {
        return det.signum() as i32;
    }
    // Coefficient of eps_i in det[x y w 1]: (-1)^i * orient2d(remaining rows).
    for i in priority_order(&ids) {
        let rest: Vec<&Vec3> = (0..4).filter(|&k| k != i).map(|k| p[k]).collect();
        let minor = orient2d(rest[0], rest[1], rest[2]);
        if minor != 0.0 {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            return (sign * minor).signum() as i32;
        }
    }
    0
}

/// Sign (+1 inside / -1 outside) of the perturbed in-sphere test. Never zero
/// for a positively oriented, non-flat `a, b, c, d`.
pub fn insphere_sos(p: [&Vec3; 5], ids: [usize; 5]) -> i32 {
    let det = insphere(p[0], p[1], p[2], p[3], p[4]);
    if det != 0.0 {
        return det.signum() as i32;
    }
    // Coefficient of eps_i in det[x y z w 1]: (-1)^(i+1) * orient3d(remaining rows).
    for i in priority_order(&ids) {
        let rest: Vec<&Vec3> = (0..5).filter(|&k| k != i).map(|k| p[k]).collect();
        let minor = orient3d(rest[0], rest[1], rest[2], rest[3]);
        if minor != 0.0 {
            let sign = if i % 2 == 0 { -1.0 } else { 1.0 };
            return (sign * minor).signum() as i32;
        }
    }
    0
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix4, Matrix5};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lifted4(p: [&Vec3; 4], bump: [f64; 4]) -> f64 {
        Matrix4::from_fn(|r, c| match c {
            0 => p[r].x,
            1 => p[r].y,
            2 => p[r].norm_squared() + bump[r],
            _ => 1.0,
        })
        .determinant()
    }

    fn lifted5(p: [&Vec3; 5], bump: [f64; 5]) -> f64 {
        Matrix5::from_fn(|r, c| match c {
            0 => p[r].x,
            1 => p[r].y,
            2 => p[r].z,
            3 => p[r].norm_squared() + bump[r],
            _ => 1.0,
        })
        .determinant()
    }

    #[test]
    fn lifted_determinants_match_robust_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let q: Vec<Vec3> = (0..5)
                .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
                .collect();
            let flat: Vec<Vec3> = q.iter().map(|v| Vec3::new(v.x, v.y, 0.0)).collect();
            let a = lifted4([&flat[0], &flat[1], &flat[2], &flat[3]], [0.0; 4]);
            let b = incircle(&flat[0], &flat[1], &flat[2], &flat[3]);
            assert_eq!(a.signum(), b.signum());
            let a = lifted5([&q[0], &q[1], &q[2], &q[3], &q[4]], [0.0; 5]);
            let b = insphere(&q[0], &q[1], &q[2], &q[3], &q[4]);
            assert_eq!(a.signum(), b.signum());
        }
    }

    #[test]
    fn perturbation_cofactors_match_finite_differences() {
        // Cospherical configurations: the unperturbed test is zero and the
        // sign must follow a tiny bump of the dominant point's lift.
        let square = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        for ids in [[0, 1, 2, 3], [3, 2, 1, 0], [5, 9, 2, 7], [1, 0, 3, 2]] {
            let p = [&square[0], &square[1], &square[2], &square[3]];
            assert_eq!(incircle(p[0], p[1], p[2], p[3]), 0.0);
            let top = (0..4).max_by_key(|&i| ids[i]).unwrap();
            let mut bump = [0.0; 4];
            bump[top] = 1e-6;
            let fd = lifted4(p, bump) - lifted4(p, [0.0; 4]);
            assert_eq!(incircle_sos(p, ids), fd.signum() as i32, "ids {ids:?}");
        }
        let cube: Vec<Vec3> = (0..8)
            .map(|m| Vec3::new((m & 1) as f64, ((m >> 1) & 1) as f64, ((m >> 2) & 1) as f64))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut tested = 0;
        while tested < 100 {
            let mut pick: Vec<usize> = (0..8).collect();
            for i in (1..8).rev() {
                pick.swap(i, rng.random_range(0..=i));
            }
            let mut tet = [pick[0], pick[1], pick[2], pick[3]];
            let o = orient3d(&cube[tet[0]], &cube[tet[1]], &cube[tet[2]], &cube[tet[3]]);
            if o == 0.0 {
                continue;
            }
            if o < 0.0 {
                tet.swap(0, 1);
            }
            let p = [&cube[tet[0]], &cube[tet[1]], &cube[tet[2]], &cube[tet[3]], &cube[pick[4]]];
            let picked = rand::seq::index::sample(&mut rng, 1000, 5);
            let ids: [usize; 5] = std::array::from_fn(|i| picked.index(i));
            let got = insphere_sos(p, ids);
            // Walk the priority list with finite-difference bumps.
            let mut order: Vec<usize> = (0..5).collect();
            order.sort_by(|&a, &b| ids[b].cmp(&ids[a]));
            let mut want = 0;
            for &i in &order {
                let mut bump = [0.0; 5];
                bump[i] = 1e-3;
                let fd = lifted5(p, bump) - lifted5(p, [0.0; 5]);
                if fd.abs() > 1e-9 {
                    want = fd.signum() as i32;
                    break;
                }
            }
            assert_eq!(got, want);
            assert_ne!(got, 0);
            tested += 1;
        }
    }
}
