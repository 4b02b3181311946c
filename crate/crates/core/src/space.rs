//! Small fixed-capacity vectors, matrices and the little linear algebra the
//! estimators need.
//!
//! State space dimension is a runtime parameter `n ∈ {1,2,3}`; epigraph
//! computations lift points to `n+1` coordinates, so everything is backed by
//! four f64 lanes. Unused lanes are kept at zero, which makes dot products
//! and norms dimension-agnostic.

use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

/// Hard cap on coordinates: three state dimensions plus the epigraph axis.
pub const MAX_DIM: usize = 4;

/// A point or direction with up to [`MAX_DIM`] coordinates.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VecN {
    c: [f64; MAX_DIM],
}

impl VecN {
    pub fn zeros() -> Self {
        Self::default()
    }

    pub fn from_slice(s: &[f64]) -> Self {
        assert!(s.len() <= MAX_DIM, "vector has more than {MAX_DIM} coords");
        let mut c = [0.0; MAX_DIM];
        c[..s.len()].copy_from_slice(s);
        Self { c }
    }

    pub fn new2(x: f64, y: f64) -> Self {
        Self::from_slice(&[x, y])
    }

    pub fn new3(x: f64, y: f64, z: f64) -> Self {
        Self::from_slice(&[x, y, z])
    }

    /// Basis vector `e_axis`.
    pub fn basis(axis: usize) -> Self {
        let mut v = Self::zeros();
        v.c[axis] = 1.0;
        v
    }

    pub fn coords(&self, dim: usize) -> &[f64] {
        &self.c[..dim]
    }

    pub fn to_vec(&self, dim: usize) -> Vec<f64> {
        self.c[..dim].to_vec()
    }

    pub fn dot(&self, other: &VecN) -> f64 {
        let mut s = 0.0;
        for i in 0..MAX_DIM {
            s += self.c[i] * other.c[i];
        }
        s
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist(&self, other: &VecN) -> f64 {
        (*self - *other).norm()
    }

    /// Unit vector in the same direction, or `None` below `tol`.
    pub fn normalized(&self, tol: f64) -> Option<VecN> {
        let n = self.norm();
        if n <= tol {
            None
        } else {
            Some(*self * (1.0 / n))
        }
    }

    /// Lift an `n`-vector to `n+1` coordinates with `extra` appended.
    pub fn lift(&self, dim: usize, extra: f64) -> VecN {
        assert!(dim < MAX_DIM);
        let mut v = *self;
        v.c[dim] = extra;
        v
    }

    /// Drop the lifted coordinate, returning (n-vector, last coordinate).
    pub fn split(&self, dim: usize) -> (VecN, f64) {
        let mut v = *self;
        let extra = v.c[dim];
        v.c[dim] = 0.0;
        (v, extra)
    }

    pub fn is_finite(&self, dim: usize) -> bool {
        self.c[..dim].iter().all(|x| x.is_finite())
    }
}

impl Index<usize> for VecN {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.c[i]
    }
}

impl IndexMut<usize> for VecN {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.c[i]
    }
}

impl Add for VecN {
    type Output = VecN;
    fn add(self, o: VecN) -> VecN {
        let mut r = self;
        for i in 0..MAX_DIM {
            r.c[i] += o.c[i];
        }
        r
    }
}

impl AddAssign for VecN {
    fn add_assign(&mut self, o: VecN) {
        for i in 0..MAX_DIM {
            self.c[i] += o.c[i];
        }
    }
}

impl Sub for VecN {
    type Output = VecN;
    fn sub(self, o: VecN) -> VecN {
        let mut r = self;
        for i in 0..MAX_DIM {
            r.c[i] -= o.c[i];
        }
        r
    }
}

impl Neg for VecN {
    type Output = VecN;
    fn neg(self) -> VecN {
        let mut r = self;
        for x in &mut r.c {
            *x = -*x;
        }
        r
    }
}

impl Mul<f64> for VecN {
    type Output = VecN;
    fn mul(self, s: f64) -> VecN {
        let mut r = self;
        for x in &mut r.c {
            *x *= s;
        }
        r
    }
}

/// Row-major matrix with up to 3 rows and 3 columns (state-space maps).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MatN {
    pub m: [[f64; 3]; 3],
}

impl MatN {
    pub fn zeros() -> Self {
        Self::default()
    }

    pub fn identity(dim: usize) -> Self {
        let mut a = Self::default();
        for i in 0..dim {
            a.m[i][i] = 1.0;
        }
        a
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let mut a = Self::default();
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                a.m[i][j] = *v;
            }
        }
        a
    }

    /// Planar rotation by `angle` in the (0,1) plane.
    pub fn rotation2(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::from_rows(&[vec![c, -s], vec![s, c]])
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut a = Self::default();
        for (i, v) in d.iter().enumerate() {
            a.m[i][i] = *v;
        }
        a
    }

    pub fn transpose(&self) -> Self {
        let mut a = Self::default();
        for i in 0..3 {
            for j in 0..3 {
                a.m[i][j] = self.m[j][i];
            }
        }
        a
    }

    pub fn mul_vec(&self, v: &VecN) -> VecN {
        let mut r = VecN::zeros();
        for i in 0..3 {
            let mut s = 0.0;
            for j in 0..3 {
                s += self.m[i][j] * v[j];
            }
            r[i] = s;
        }
        r
    }

    pub fn is_symmetric(&self, dim: usize, tol: f64) -> bool {
        for i in 0..dim {
            for j in (i + 1)..dim {
                if (self.m[i][j] - self.m[j][i]).abs() > tol {
                    return false;
                }
            }
        }
        true
    }
}

/// Axis-aligned box used as a sampling region.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct BoundsBox {
    pub dim: usize,
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl BoundsBox {
    pub fn new(dim: usize, lo: &[f64], hi: &[f64]) -> Self {
        let mut b = Self {
            dim,
            lo: [0.0; 3],
            hi: [0.0; 3],
        };
        b.lo[..dim].copy_from_slice(lo);
        b.hi[..dim].copy_from_slice(hi);
        b
    }

    pub fn contains(&self, x: &VecN) -> bool {
        (0..self.dim).all(|i| x[i] >= self.lo[i] && x[i] <= self.hi[i])
    }

    /// Point at parameter `u ∈ [0,1]^dim`.
    pub fn lerp(&self, u: &[f64]) -> VecN {
        let mut p = VecN::zeros();
        for i in 0..self.dim {
            p[i] = self.lo[i] + u[i] * (self.hi[i] - self.lo[i]);
        }
        p
    }

    /// Largest Euclidean norm over the box corners.
    pub fn max_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            s += self.lo[i].abs().max(self.hi[i].abs()).powi(2);
        }
        s.sqrt()
    }

    pub fn shrink(&self, margin: f64) -> Self {
        let mut b = *self;
        for i in 0..self.dim {
            b.lo[i] += margin;
            b.hi[i] -= margin;
        }
        b
    }
}

/// Eigen-decomposition of a symmetric `dim × dim` matrix (dim ≤ 4) by cyclic
/// Jacobi rotations. Returns eigenvalues in descending order with matching
/// unit eigenvectors.
pub fn sym_eigen(a: &[[f64; MAX_DIM]; MAX_DIM], dim: usize) -> (Vec<f64>, Vec<VecN>) {
    let mut a = *a;
    let mut v = [[0.0; MAX_DIM]; MAX_DIM];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _ in 0..64 {
        let mut off = 0.0;
        for i in 0..dim {
            for j in (i + 1)..dim {
                off += a[i][j] * a[i][j];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..dim {
            for q in (p + 1)..dim {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..dim {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..dim {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..dim {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, VecN)> = (0..dim)
        .map(|i| {
            let mut ev = VecN::zeros();
            for k in 0..dim {
                ev[k] = v[k][i];
            }
            (a[i][i], ev)
        })
        .collect();
    pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
    (
        pairs.iter().map(|p| p.0).collect(),
        pairs.iter().map(|p| p.1).collect(),
    )
}

/// Rank of a set of vectors in `R^dim`, with singular values thresholded at
/// `rel_tol` times the largest one.
pub fn rank_of(vectors: &[VecN], dim: usize, rel_tol: f64) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let mut gram = [[0.0; MAX_DIM]; MAX_DIM];
    for v in vectors {
        for i in 0..dim {
            for j in 0..dim {
                gram[i][j] += v[i] * v[j];
            }
        }
    }
    let (eigs, _) = sym_eigen(&gram, dim);
    // Gram eigenvalues are squared singular values.
    let smax = eigs[0].max(0.0).sqrt();
    if smax == 0.0 {
        return 0;
    }
    eigs.iter()
        .filter(|&&e| e.max(0.0).sqrt() > rel_tol * smax)
        .count()
}

/// Least-squares solve of `min ||b - B t||` for the span of `basis`
/// (at most MAX_DIM vectors). Returns `None` when the basis is numerically
/// rank deficient.
pub fn lsq_coeffs(basis: &[VecN], b: &VecN, dim: usize) -> Option<Vec<f64>> {
    let k = basis.len();
    assert!(k <= MAX_DIM);
    let mut g = [[0.0; MAX_DIM]; MAX_DIM];
    let mut rhs = [0.0; MAX_DIM];
    for i in 0..k {
        for j in 0..k {
            g[i][j] = basis[i].dot(&basis[j]);
        }
        rhs[i] = basis[i].dot(b);
    }
    let _ = dim;
    // Gaussian elimination with partial pivoting.
    let mut aug = [[0.0; MAX_DIM + 1]; MAX_DIM];
    for i in 0..k {
        aug[i][..k].copy_from_slice(&g[i][..k]);
        aug[i][k] = rhs[i];
    }
    let scale: f64 = (0..k).map(|i| g[i][i]).fold(0.0, f64::max).max(1e-300);
    for col in 0..k {
        let (piv, mag) = (col..k)
            .map(|r| (r, aug[r][col].abs()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        if mag < 1e-12 * scale {
            return None;
        }
        aug.swap(col, piv);
        for r in 0..k {
            if r == col {
                continue;
            }
            let f = aug[r][col] / aug[col][col];
            for c in col..=k {
                aug[r][c] -= f * aug[col][c];
            }
        }
    }
    Some((0..k).map(|i| aug[i][k] / aug[i][i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_and_norm_ignore_unused_lanes() {
        let a = VecN::new2(3.0, 4.0);
        assert_eq!(a.norm(), 5.0);
        assert_eq!(a.dot(&VecN::new2(1.0, 1.0)), 7.0);
    }

    #[test]
    fn lift_and_split_roundtrip() {
        let a = VecN::new2(1.0, 2.0);
        let l = a.lift(2, -1.0);
        assert_eq!(l[2], -1.0);
        let (x, extra) = l.split(2);
        assert_eq!(x, a);
        assert_eq!(extra, -1.0);
    }

    #[test]
    fn eigen_of_diagonal() {
        let mut a = [[0.0; MAX_DIM]; MAX_DIM];
        a[0][0] = 4.0;
        a[1][1] = 1.0;
        let (eigs, vecs) = sym_eigen(&a, 2);
        assert!((eigs[0] - 4.0).abs() < 1e-12);
        assert!((eigs[1] - 1.0).abs() < 1e-12);
        assert!(vecs[0][0].abs() > 0.999);
    }

    #[test]
    fn rank_detects_degeneracy() {
        let v1 = VecN::new2(1.0, 0.0);
        let v2 = VecN::new2(0.0, 1.0);
        let v3 = VecN::new2(1.0, 1.0);
        assert_eq!(rank_of(&[v1, v2, v3], 2, 1e-6), 2);
        assert_eq!(rank_of(&[v1, v1 * 2.0], 2, 1e-6), 1);
        assert_eq!(rank_of(&[], 2, 1e-6), 0);
    }

    #[test]
    fn lsq_recovers_coefficients() {
        let b1 = VecN::new3(1.0, 0.0, 1.0);
        let b2 = VecN::new3(0.0, 1.0, 1.0);
        let target = b1 * 2.0 + b2 * (-3.0);
        let t = lsq_coeffs(&[b1, b2], &target, 3).unwrap();
        assert!((t[0] - 2.0).abs() < 1e-10);
        assert!((t[1] + 3.0).abs() < 1e-10);
    }
}
