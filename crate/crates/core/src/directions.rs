//! Deterministic unit-direction grids.
//!
//! The estimators sample the sphere of directions; reproducible reports need
//! the same grid for the same configuration. Grids are nested under count
//! doubling in 2D (same offset, refined angles) and across icosphere
//! subdivision levels in 3D, so direction-sampled maxima are monotone under
//! refinement.

use crate::space::{MatN, VecN};

/// Angular resolution (radians) of a grid with `count` directions.
pub fn angular_step(dim: usize, count: usize) -> f64 {
    match dim {
        1 => std::f64::consts::PI,
        2 => 2.0 * std::f64::consts::PI / count.max(1) as f64,
        // Mean vertex spacing of an icosphere with V vertices.
        3 => (4.0 * std::f64::consts::PI / count.max(1) as f64).sqrt(),
        _ => (2.0 * std::f64::consts::PI / (count.max(1) as f64).powf(1.0 / 3.0)).min(1.0),
    }
}

/// Deterministic grid of at least `count` unit directions in `R^dim`.
///
/// The `seed` rotates the whole grid rigidly; it never changes relative
/// geometry, so pass/fail reports are stable per seed.
pub fn unit_directions(dim: usize, count: usize, seed: u64) -> Vec<VecN> {
    match dim {
        1 => vec![VecN::from_slice(&[1.0]), VecN::from_slice(&[-1.0])],
        2 => {
            let offset = seed_angle(seed);
            (0..count.max(2))
                .map(|j| {
                    let t = 2.0 * std::f64::consts::PI * j as f64 / count.max(2) as f64 + offset;
                    VecN::new2(t.cos(), t.sin())
                })
                .collect()
        }
        3 => {
            let level = icosphere_level_for(count);
            let rot = seed_rotation(seed);
            icosphere(level)
                .into_iter()
                .map(|v| rot.mul_vec(&v))
                .collect()
        }
        4 => super_fibonacci_s3(count.max(8), seed),
        _ => panic!("direction grids support dim 1..=4, got {dim}"),
    }
}

fn seed_angle(seed: u64) -> f64 {
    if seed == 0 {
        return 0.0;
    }
    let phi = 0.618_033_988_749_894_9_f64;
    (seed as f64 * phi).fract() * 2.0 * std::f64::consts::PI
}

fn seed_rotation(seed: u64) -> MatN {
    if seed == 0 {
        return MatN::identity(3);
    }
    let a = seed_angle(seed);
    let b = seed_angle(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let rz = MatN::from_rows(&[
        vec![a.cos(), -a.sin(), 0.0],
        vec![a.sin(), a.cos(), 0.0],
        vec![0.0, 0.0, 1.0],
    ]);
    let rx = MatN::from_rows(&[
        vec![1.0, 0.0, 0.0],
        vec![0.0, b.cos(), -b.sin()],
        vec![0.0, b.sin(), b.cos()],
    ]);
    mat_mul(&rz, &rx)
}

fn mat_mul(a: &MatN, b: &MatN) -> MatN {
    let mut r = MatN::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let mut s = 0.0;
            for k in 0..3 {
                s += a.m[i][k] * b.m[k][j];
            }
            r.m[i][j] = s;
        }
    }
    r
}

/// Smallest subdivision level whose vertex count (10·4^level + 2) reaches
/// `count`. Level 4 gives the default 2562-node sphere.
fn icosphere_level_for(count: usize) -> usize {
    let mut level = 0;
    while 10 * 4usize.pow(level as u32) + 2 < count && level < 6 {
        level += 1;
    }
    level
}

/// Icosahedron subdivided `level` times, vertices projected to the unit
/// sphere. Vertex order is construction order, hence deterministic, and
/// level k vertices are a prefix of level k+1.
pub fn icosphere(level: usize) -> Vec<VecN> {
    let t = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let mut verts: Vec<VecN> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|c| VecN::from_slice(c).normalized(0.0).unwrap())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut midpoint = std::collections::HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mut mid = [0usize; 3];
            for e in 0..3 {
                let a = f[e];
                let b = f[(e + 1) % 3];
                let key = (a.min(b), a.max(b));
                mid[e] = *midpoint.entry(key).or_insert_with(|| {
                    let m = (verts[a] + verts[b]) * 0.5;
                    verts.push(m.normalized(0.0).unwrap());
                    verts.len() - 1
                });
            }
            next.push([f[0], mid[0], mid[2]]);
            next.push([f[1], mid[1], mid[0]]);
            next.push([f[2], mid[2], mid[1]]);
            next.push([mid[0], mid[1], mid[2]]);
        }
        faces = next;
    }
    verts
}

/// Near-uniform deterministic covering of the unit sphere in R^4, used for
/// epigraph direction grids when the state space is three dimensional.
fn super_fibonacci_s3(count: usize, seed: u64) -> Vec<VecN> {
    let phi1 = 2.0_f64.sqrt();
    let phi2 = 1.533_751_168_755_204_3_f64;
    let shift = seed_angle(seed) / (2.0 * std::f64::consts::PI);
    (0..count)
        .map(|k| {
            let s = (k as f64 + 0.5) / count as f64;
            let r = s.sqrt();
            let big_r = (1.0 - s).sqrt();
            let alpha = 2.0 * std::f64::consts::PI * ((k as f64 / phi1 + shift).fract());
            let beta = 2.0 * std::f64::consts::PI * ((k as f64 / phi2 + shift).fract());
            VecN::from_slice(&[
                r * alpha.sin(),
                r * alpha.cos(),
                big_r * beta.sin(),
                big_r * beta.cos(),
            ])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directions_are_unit_vectors() {
        for dim in 1..=4usize {
            for d in unit_directions(dim, 64, 7) {
                assert!((d.norm() - 1.0).abs() < 1e-12, "dim {dim}");
            }
        }
    }

    #[test]
    fn icosphere_counts() {
        assert_eq!(icosphere(0).len(), 12);
        assert_eq!(icosphere(1).len(), 42);
        assert_eq!(icosphere(4).len(), 2562);
    }

    #[test]
    fn icosphere_levels_are_nested() {
        let lo = icosphere(1);
        let hi = icosphere(2);
        for (a, b) in lo.iter().zip(hi.iter()) {
            assert!(a.dist(b) < 1e-15);
        }
    }

    #[test]
    fn planar_grid_nested_under_doubling() {
        let coarse = unit_directions(2, 90, 3);
        let fine = unit_directions(2, 180, 3);
        for c in &coarse {
            let best = fine.iter().map(|f| f.dist(c)).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-12);
        }
    }

    #[test]
    fn same_seed_same_grid() {
        assert_eq!(unit_directions(3, 300, 5), unit_directions(3, 300, 5));
        assert_ne!(unit_directions(2, 16, 1)[0], unit_directions(2, 16, 2)[0]);
    }
}
