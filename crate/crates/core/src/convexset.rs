//! Compact convex bodies with exact support-function evaluation.
//!
//! Bodies are closed under translation and nonnegative Minkowski combination,
//! which is what the dynamics and the class-L certificates need. All set
//! comparisons go through support functions on a shared deterministic
//! direction grid; there is deliberately no second geometry kernel.

use crate::directions::unit_directions;
use crate::error::{Error, Result};
use crate::space::{lsq_coeffs, sym_eigen, MatN, VecN, MAX_DIM};
use serde::{Deserialize, Serialize};

/// Membership tolerance for exact variants of the support-point invariant.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

/// A nonempty compact convex set in `R^n`, `n ∈ {1,2,3}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ConvexBody {
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Polytope {
        vertices: Vec<Vec<f64>>,
    },
    Ellipsoid {
        center: Vec<f64>,
        /// Symmetric PSD matrix Q; the set is `{c + Q^{1/2} u : |u| <= 1}`,
        /// support value `<c,p> + sqrt(p^T Q p)`.
        shape: Vec<Vec<f64>>,
    },
    Translate {
        offset: Vec<f64>,
        body: Box<ConvexBody>,
    },
    ScaledSum {
        terms: Vec<ScaledTerm>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaledTerm {
    pub coeff: f64,
    pub body: ConvexBody,
}

/// Value and attaining point of a support-function evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupportEval {
    pub value: f64,
    pub point: VecN,
}

impl ConvexBody {
    pub fn ball(center: &[f64], radius: f64) -> Self {
        ConvexBody::Ball {
            center: center.to_vec(),
            radius,
        }
    }

    pub fn polytope(vertices: &[&[f64]]) -> Self {
        ConvexBody::Polytope {
            vertices: vertices.iter().map(|v| v.to_vec()).collect(),
        }
    }

    /// The square `[-1,1]^2` with the canonical vertex order used by the
    /// scenario files (counter-clockwise from the lower-left corner).
    pub fn unit_square() -> Self {
        ConvexBody::polytope(&[&[-1.0, -1.0], &[1.0, -1.0], &[1.0, 1.0], &[-1.0, 1.0]])
    }

    pub fn singleton(point: &[f64]) -> Self {
        ConvexBody::Polytope {
            vertices: vec![point.to_vec()],
        }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        ConvexBody::polytope(&[&[lo], &[hi]])
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexBody::Ball { center, .. } => center.len(),
            ConvexBody::Polytope { vertices } => vertices[0].len(),
            ConvexBody::Ellipsoid { center, .. } => center.len(),
            ConvexBody::Translate { offset, .. } => offset.len(),
            ConvexBody::ScaledSum { terms } => terms[0].body.dim(),
        }
    }

    /// Structural invariants: nonempty, bounded, dimensionally consistent,
    /// shape matrices symmetric PSD, combination coefficients nonnegative.
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Config(format!("dimension {dim} outside 1..=3")));
        }
        match self {
            ConvexBody::Ball { center, radius } => {
                if center.len() != dim {
                    return Err(Error::Config("ball center has wrong dimension".into()));
                }
                if !radius.is_finite() || *radius < 0.0 {
                    return Err(Error::Config(format!("ball radius {radius} invalid")));
                }
                if center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::Config("ball center not finite".into()));
                }
            }
            ConvexBody::Polytope { vertices } => {
                if vertices.is_empty() {
                    return Err(Error::Config("polytope needs at least one vertex".into()));
                }
                for v in vertices {
                    if v.len() != dim || v.iter().any(|c| !c.is_finite()) {
                        return Err(Error::Config("polytope vertex invalid".into()));
                    }
                }
            }
            ConvexBody::Ellipsoid { center, shape } => {
                if center.len() != dim || shape.len() != dim {
                    return Err(Error::Config("ellipsoid has wrong dimension".into()));
                }
                let q = MatN::from_rows(shape);
                if !q.is_symmetric(dim, 1e-9) {
                    return Err(Error::Config("ellipsoid shape must be symmetric".into()));
                }
                let mut a = [[0.0; MAX_DIM]; MAX_DIM];
                for i in 0..dim {
                    for j in 0..dim {
                        a[i][j] = q.m[i][j];
                        if !q.m[i][j].is_finite() {
                            return Err(Error::Config("ellipsoid shape not finite".into()));
                        }
                    }
                }
                let (eigs, _) = sym_eigen(&a, dim);
                if eigs.iter().any(|&e| e < -1e-9) {
                    return Err(Error::Config("ellipsoid shape must be PSD".into()));
                }
            }
            ConvexBody::Translate { offset, body } => {
                if offset.len() != dim || offset.iter().any(|c| !c.is_finite()) {
                    return Err(Error::Config("translate offset invalid".into()));
                }
                body.validate(dim)?;
            }
            ConvexBody::ScaledSum { terms } => {
                if terms.is_empty() {
                    return Err(Error::Config("scaled sum needs at least one term".into()));
                }
                for t in terms {
                    if !t.coeff.is_finite() || t.coeff < 0.0 {
                        return Err(Error::Config(format!(
                            "scaled-sum coefficient {} must be >= 0",
                            t.coeff
                        )));
                    }
                    t.body.validate(dim)?;
                }
            }
        }
        Ok(())
    }

    /// Support function: maximum of `<., p>` over the body together with an
    /// attaining point. Total for every p; `p = 0` returns value 0 at the
    /// canonical representative. Polytope ties break to the lowest vertex
    /// index.
    pub fn support(&self, p: &VecN) -> SupportEval {
        match self {
            ConvexBody::Ball { center, radius } => {
                let c = VecN::from_slice(center);
                match p.normalized(0.0) {
                    Some(u) => SupportEval {
                        value: c.dot(p) + radius * p.norm(),
                        point: c + u * *radius,
                    },
                    None => SupportEval {
                        value: 0.0,
                        point: c,
                    },
                }
            }
            ConvexBody::Polytope { vertices } => {
                let mut best = 0;
                let mut best_val = f64::NEG_INFINITY;
                for (i, v) in vertices.iter().enumerate() {
                    let val = dot_slice(v, p);
                    if val > best_val {
                        best_val = val;
                        best = i;
                    }
                }
                SupportEval {
                    value: best_val,
                    point: VecN::from_slice(&vertices[best]),
                }
            }
            ConvexBody::Ellipsoid { center, shape } => {
                let c = VecN::from_slice(center);
                let q = MatN::from_rows(shape);
                let qp = q.mul_vec(p);
                let quad = p.dot(&qp).max(0.0);
                if quad <= 0.0 {
                    SupportEval {
                        value: c.dot(p),
                        point: c,
                    }
                } else {
                    let s = quad.sqrt();
                    SupportEval {
                        value: c.dot(p) + s,
                        point: c + qp * (1.0 / s),
                    }
                }
            }
            ConvexBody::Translate { offset, body } => {
                let o = VecN::from_slice(offset);
                let inner = body.support(p);
                SupportEval {
                    value: inner.value + o.dot(p),
                    point: inner.point + o,
                }
            }
            ConvexBody::ScaledSum { terms } => {
                let mut value = 0.0;
                let mut point = VecN::zeros();
                for t in terms {
                    let e = t.body.support(p);
                    value += t.coeff * e.value;
                    point += e.point * t.coeff;
                }
                SupportEval { value, point }
            }
        }
    }

    /// Representative returned by `support` at `p = 0`.
    pub fn canonical_point(&self) -> VecN {
        self.support(&VecN::zeros()).point
    }

    /// True when the maximizer of `<., p>` is non-unique within `gap_tol`
    /// (used by the flow integrator to log bang-bang switch events).
    pub fn support_tie(&self, p: &VecN, gap_tol: f64) -> bool {
        match self {
            ConvexBody::Ball { radius, .. } => *radius > 0.0 && p.norm() <= gap_tol,
            ConvexBody::Ellipsoid { shape, .. } => {
                let q = MatN::from_rows(shape);
                let quad = p.dot(&q.mul_vec(p)).max(0.0);
                // Degenerate shapes tie along the null space of Q.
                let (eigs, vecs) = {
                    let mut a = [[0.0; MAX_DIM]; MAX_DIM];
                    for i in 0..3 {
                        for j in 0..3 {
                            a[i][j] = q.m[i][j];
                        }
                    }
                    sym_eigen(&a, self.dim())
                };
                let degenerate = eigs
                    .iter()
                    .zip(vecs.iter())
                    .any(|(&e, _)| e.abs() <= 1e-15 * eigs[0].abs().max(1.0));
                degenerate && quad.sqrt() <= gap_tol
            }
            ConvexBody::Polytope { vertices } => {
                let mut best = f64::NEG_INFINITY;
                let mut second = f64::NEG_INFINITY;
                let mut best_pt: Option<VecN> = None;
                let mut tie_far = false;
                for v in vertices {
                    let val = dot_slice(v, p);
                    let pt = VecN::from_slice(v);
                    if val > best {
                        second = best;
                        best = val;
                        best_pt = Some(pt);
                    } else if val > second {
                        second = val;
                    }
                    if (best - val).abs() <= gap_tol {
                        if let Some(b) = best_pt {
                            if b.dist(&pt) > 1e-9 {
                                tie_far = true;
                            }
                        }
                    }
                }
                vertices.len() > 1 && (best - second).abs() <= gap_tol && tie_far
            }
            ConvexBody::Translate { body, .. } => body.support_tie(p, gap_tol),
            ConvexBody::ScaledSum { terms } => terms
                .iter()
                .any(|t| t.coeff > 0.0 && t.body.support_tie(p, gap_tol)),
        }
    }

    /// Euclidean projection onto the body. Exact for balls, polytopes and
    /// ellipsoids; scaled sums use a support-oracle projection that refines
    /// an active vertex set until the optimality gap closes.
    pub fn project(&self, x: &VecN) -> VecN {
        match self {
            ConvexBody::Ball { center, radius } => {
                let c = VecN::from_slice(center);
                let d = *x - c;
                let n = d.norm();
                if n <= *radius {
                    *x
                } else {
                    c + d * (*radius / n)
                }
            }
            ConvexBody::Polytope { vertices } => {
                let pts: Vec<VecN> = vertices.iter().map(|v| VecN::from_slice(v)).collect();
                project_hull(&pts, x, self.dim())
            }
            ConvexBody::Ellipsoid { center, shape } => {
                project_ellipsoid(center, shape, x, self.dim())
            }
            ConvexBody::Translate { offset, body } => {
                let o = VecN::from_slice(offset);
                body.project(&(*x - o)) + o
            }
            ConvexBody::ScaledSum { .. } => self.project_by_support(x),
        }
    }

    /// Distance from `x` to the body.
    pub fn distance(&self, x: &VecN) -> f64 {
        self.project(x).dist(x)
    }

    pub fn contains(&self, x: &VecN, tol: f64) -> bool {
        self.distance(x) <= tol
    }

    /// Upper bound on `max{|v| : v in body}` (exact for the base variants).
    pub fn bounding_radius(&self) -> f64 {
        match self {
            ConvexBody::Ball { center, radius } => {
                VecN::from_slice(center).norm() + radius
            }
            ConvexBody::Polytope { vertices } => vertices
                .iter()
                .map(|v| VecN::from_slice(v).norm())
                .fold(0.0, f64::max),
            ConvexBody::Ellipsoid { center, shape } => {
                let mut a = [[0.0; MAX_DIM]; MAX_DIM];
                for i in 0..3 {
                    for j in 0..3 {
                        a[i][j] = shape.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0.0);
                    }
                }
                let (eigs, _) = sym_eigen(&a, self.dim());
                VecN::from_slice(center).norm() + eigs[0].max(0.0).sqrt()
            }
            ConvexBody::Translate { offset, body } => {
                VecN::from_slice(offset).norm() + body.bounding_radius()
            }
            ConvexBody::ScaledSum { terms } => terms
                .iter()
                .map(|t| t.coeff * t.body.bounding_radius())
                .sum(),
        }
    }

    /// Image under a linear map `g` (`out_dim × in_dim`), exact per variant:
    /// balls and ellipsoids map to ellipsoids, polytopes map vertexwise.
    pub fn linear_image(&self, g: &MatN, out_dim: usize) -> ConvexBody {
        match self {
            ConvexBody::Ball { center, radius } => {
                // g B(c, r) = ellipsoid with shape r^2 g g^T around g c.
                let c = g.mul_vec(&VecN::from_slice(center));
                let mut shape = vec![vec![0.0; out_dim]; out_dim];
                for (i, row) in shape.iter_mut().enumerate() {
                    for (j, entry) in row.iter_mut().enumerate() {
                        let mut s = 0.0;
                        for k in 0..3 {
                            s += g.m[i][k] * g.m[j][k];
                        }
                        *entry = radius * radius * s;
                    }
                }
                ConvexBody::Ellipsoid {
                    center: c.to_vec(out_dim),
                    shape,
                }
            }
            ConvexBody::Polytope { vertices } => ConvexBody::Polytope {
                vertices: vertices
                    .iter()
                    .map(|v| g.mul_vec(&VecN::from_slice(v)).to_vec(out_dim))
                    .collect(),
            },
            ConvexBody::Ellipsoid { center, shape } => {
                let c = g.mul_vec(&VecN::from_slice(center));
                let q = MatN::from_rows(shape);
                // g E(c, Q) has shape g Q g^T.
                let gq = mat_mul3(g, &q);
                let gqgt = mat_mul3(&gq, &g.transpose());
                let mut out = vec![vec![0.0; out_dim]; out_dim];
                for (i, row) in out.iter_mut().enumerate() {
                    for (j, entry) in row.iter_mut().enumerate() {
                        *entry = gqgt.m[i][j];
                    }
                }
                ConvexBody::Ellipsoid {
                    center: c.to_vec(out_dim),
                    shape: out,
                }
            }
            ConvexBody::Translate { offset, body } => ConvexBody::Translate {
                offset: g.mul_vec(&VecN::from_slice(offset)).to_vec(out_dim),
                body: Box::new(body.linear_image(g, out_dim)),
            },
            ConvexBody::ScaledSum { terms } => ConvexBody::ScaledSum {
                terms: terms
                    .iter()
                    .map(|t| ScaledTerm {
                        coeff: t.coeff,
                        body: t.body.linear_image(g, out_dim),
                    })
                    .collect(),
            },
        }
    }

    fn project_by_support(&self, x: &VecN) -> VecN {
        let dim = self.dim();
        let mut active: Vec<VecN> = vec![self.canonical_point()];
        let scale = self.bounding_radius().max(x.norm()).max(1.0);
        let mut y = active[0];
        for _ in 0..256 {
            let d = *x - y;
            if d.norm() <= 1e-13 * scale {
                return *x;
            }
            let s = self.support(&d).point;
            // Optimality gap of min ||x - y||^2 over the body.
            let gap = d.dot(&(s - y));
            if gap <= 1e-12 * scale * scale {
                break;
            }
            if active.iter().all(|a| a.dist(&s) > 1e-14 * scale) {
                active.push(s);
            }
            y = project_hull(&active, x, dim);
            if active.len() > 24 {
                // Drop vertices that no longer support the current iterate.
                active.retain(|a| a.dist(&y) < scale * 2.0);
            }
        }
        y
    }
}

fn dot_slice(v: &[f64], p: &VecN) -> f64 {
    v.iter().enumerate().map(|(i, c)| c * p[i]).sum()
}

fn mat_mul3(a: &MatN, b: &MatN) -> MatN {
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

/// Projection of `x` onto the convex hull of `pts`.
///
/// Enumerates affinely independent vertex subsets of size at most dim+1;
/// the projection lies in the convex hull of one of them (Caratheodory), so
/// the closest admissible candidate is the exact answer. Intended for the
/// small vertex counts of scenario polytopes.
fn project_hull(pts: &[VecN], x: &VecN, dim: usize) -> VecN {
    if pts.len() == 1 {
        return pts[0];
    }
    let mut best = pts[0];
    let mut best_d = x.dist(&pts[0]);
    for &p in &pts[1..] {
        let d = x.dist(&p);
        if d < best_d {
            best_d = d;
            best = p;
        }
    }
    let k_max = (dim + 1).min(pts.len());
    let mut index_buf = Vec::with_capacity(k_max);
    enumerate_subsets(pts.len(), k_max, &mut index_buf, &mut |subset| {
        if subset.len() < 2 {
            return;
        }
        let v0 = pts[subset[0]];
        let basis: Vec<VecN> = subset[1..].iter().map(|&i| pts[i] - v0).collect();
        let rel = *x - v0;
        if let Some(t) = lsq_coeffs(&basis, &rel, dim) {
            let weight0 = 1.0 - t.iter().sum::<f64>();
            if weight0 >= -1e-12 && t.iter().all(|&w| w >= -1e-12) {
                let mut proj = v0;
                for (w, b) in t.iter().zip(basis.iter()) {
                    proj += *b * *w;
                }
                let d = x.dist(&proj);
                if d < best_d {
                    best_d = d;
                    best = proj;
                }
            }
        }
    });
    best
}

fn enumerate_subsets(
    n: usize,
    k_max: usize,
    buf: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    fn rec(
        start: usize,
        n: usize,
        k_max: usize,
        buf: &mut Vec<usize>,
        visit: &mut impl FnMut(&[usize]),
    ) {
        visit(buf);
        if buf.len() == k_max {
            return;
        }
        for i in start..n {
            buf.push(i);
            rec(i + 1, n, k_max, buf, visit);
            buf.pop();
        }
    }
    rec(0, n, k_max, buf, visit);
}

fn project_ellipsoid(center: &[f64], shape: &[Vec<f64>], x: &VecN, dim: usize) -> VecN {
    let c = VecN::from_slice(center);
    let q = MatN::from_rows(shape);
    let mut a = [[0.0; MAX_DIM]; MAX_DIM];
    for i in 0..dim {
        for j in 0..dim {
            a[i][j] = q.m[i][j];
        }
    }
    let (eigs, vecs) = sym_eigen(&a, dim);
    let d = *x - c;
    // Coordinates of x - c in the eigenbasis.
    let z: Vec<f64> = vecs.iter().map(|v| v.dot(&d)).collect();
    // Inside test: (x-c)^T Q^{-1} (x-c) <= 1, degenerate axes demand z = 0.
    let scale = eigs[0].max(1e-300);
    let mut level = 0.0;
    let mut outside_null = false;
    for (zi, &li) in z.iter().zip(eigs.iter()) {
        if li <= 1e-14 * scale {
            if zi.abs() > 1e-10 * scale.sqrt().max(1.0) {
                outside_null = true;
            }
        } else {
            level += zi * zi / li;
        }
    }
    if !outside_null && level <= 1.0 + 1e-12 {
        return *x;
    }
    // KKT: y - c has eigencomponents z_i * l_i / (l_i + mu) with mu > 0 chosen
    // so the boundary constraint holds; the constraint value is monotone
    // decreasing in mu, so bisection is safe.
    let g = |mu: f64| -> f64 {
        let mut s = 0.0;
        for (zi, &li) in z.iter().zip(eigs.iter()) {
            if li > 1e-14 * scale {
                let w = zi * li / (li + mu);
                s += w * w / li;
            }
        }
        s
    };
    let mut lo = 0.0;
    let mut hi = 1.0_f64.max(scale);
    while g(hi) > 1.0 {
        hi *= 2.0;
        if hi > 1e300 {
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = 0.5 * (lo + hi);
    let mut y = c;
    for ((zi, &li), v) in z.iter().zip(eigs.iter()).zip(vecs.iter()) {
        if li > 1e-14 * scale {
            y += *v * (zi * li / (li + mu));
        }
    }
    y
}

/// Largest distance between support points of `a` and `b` over a grid of
/// `directions` unit vectors. Support points are 0-homogeneous in the
/// direction, so unit normalization loses nothing.
pub fn support_deviation(a: &ConvexBody, b: &ConvexBody, directions: usize, seed: u64) -> f64 {
    let dim = a.dim();
    unit_directions(dim, directions, seed)
        .iter()
        .map(|p| a.support(p).point.dist(&b.support(p).point))
        .fold(0.0, f64::max)
}

/// Hausdorff distance between convex bodies via the support-gap formula
/// `sup_p |h_A(p) - h_B(p)|` on a grid of unit directions.
pub fn hausdorff(a: &ConvexBody, b: &ConvexBody, directions: usize, seed: u64) -> f64 {
    let dim = a.dim();
    unit_directions(dim, directions, seed)
        .iter()
        .map(|p| (a.support(p).value - b.support(p).value).abs())
        .fold(0.0, f64::max)
}

/// Result of an a-regularity probe.
#[derive(Clone, Copy, Debug)]
pub struct ARegularity {
    pub pass: bool,
    pub worst_violation: f64,
}

/// Checks Def.-style a-regularity by sampling chords: for sampled boundary
/// pairs (x0, x1) and chord parameters λ, the ball of radius
/// `a λ(1-λ)|x1-x0|^2` about the chord point must lie inside the body.
/// Containment is tested by support-function dominance on the shared grid.
pub fn check_a_regular(
    body: &ConvexBody,
    a: f64,
    pair_samples: usize,
    directions: usize,
    seed: u64,
) -> Result<ARegularity> {
    if a <= 0.0 || !a.is_finite() {
        return Err(Error::Config(format!("a-regularity needs a > 0, got {a}")));
    }
    if pair_samples == 0 {
        return Err(Error::Config("pair_samples must be positive".into()));
    }
    let dim = body.dim();
    // Boundary candidates: support points over a coarse grid (includes the
    // extreme points that witness flat-face failures).
    let n_candidates = (2.0 * (2.0 * pair_samples as f64).sqrt()).ceil() as usize;
    let candidate_dirs = unit_directions(dim, n_candidates.max(8), seed);
    let mut candidates: Vec<VecN> = Vec::new();
    for d in &candidate_dirs {
        let p = body.support(d).point;
        if candidates.iter().all(|c| c.dist(&p) > 1e-12) {
            candidates.push(p);
        }
    }
    let test_dirs = unit_directions(dim, directions, seed);
    let lambdas: Vec<f64> = (1..10).map(|k| k as f64 / 10.0).collect();
    let mut worst = f64::NEG_INFINITY;
    let mut tested = 0usize;
    'outer: for i in 0..candidates.len() {
        for j in (i + 1)..candidates.len() {
            if tested >= pair_samples {
                break 'outer;
            }
            tested += 1;
            let (x0, x1) = (candidates[i], candidates[j]);
            let chord_sq = x0.dist(&x1).powi(2);
            for &lam in &lambdas {
                let m = x1 * lam + x0 * (1.0 - lam);
                let rho = a * lam * (1.0 - lam) * chord_sq;
                for d in &test_dirs {
                    let excess = m.dot(d) + rho - body.support(d).value;
                    if excess > worst {
                        worst = excess;
                    }
                }
            }
        }
    }
    if candidates.len() < 2 {
        // Singleton-like body: no chord, regular for every a.
        worst = 0.0;
    }
    let tol = 1e-9 * body.bounding_radius().max(1.0);
    Ok(ARegularity {
        pass: worst <= tol,
        worst_violation: worst.max(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ball_support_is_norm() {
        let b = ConvexBody::ball(&[0.0, 0.0], 1.0);
        let e = b.support(&VecN::new2(3.0, 4.0));
        assert_relative_eq!(e.value, 5.0, epsilon = 1e-12);
        assert!(e.point.dist(&VecN::new2(0.6, 0.8)) < 1e-12);
    }

    #[test]
    fn polytope_tie_breaks_to_lowest_index() {
        let sq = ConvexBody::unit_square();
        let e = sq.support(&VecN::new2(1.0, 0.0));
        assert_eq!(e.value, 1.0);
        assert_eq!(e.point, VecN::new2(1.0, -1.0));
    }

    #[test]
    fn support_at_zero_is_canonical() {
        let b = ConvexBody::ball(&[2.0, -1.0], 0.5);
        let e = b.support(&VecN::zeros());
        assert_eq!(e.value, 0.0);
        assert_eq!(e.point, VecN::new2(2.0, -1.0));
        let sq = ConvexBody::unit_square();
        assert_eq!(sq.support(&VecN::zeros()).point, VecN::new2(-1.0, -1.0));
    }

    #[test]
    fn ellipsoid_support_matches_closed_form() {
        let e = ConvexBody::Ellipsoid {
            center: vec![0.0, 0.0],
            shape: vec![vec![4.0, 0.0], vec![0.0, 1.0]],
        };
        let s = e.support(&VecN::new2(1.0, 0.0));
        assert_relative_eq!(s.value, 2.0, epsilon = 1e-12);
        assert!(s.point.dist(&VecN::new2(2.0, 0.0)) < 1e-12);
    }

    #[test]
    fn support_points_are_members() {
        let bodies = [
            ConvexBody::ball(&[0.3, -0.2], 0.7),
            ConvexBody::unit_square(),
            ConvexBody::Ellipsoid {
                center: vec![0.1, 0.0],
                shape: vec![vec![2.0, 0.3], vec![0.3, 1.0]],
            },
        ];
        for body in &bodies {
            for d in unit_directions(2, 32, 1) {
                let p = body.support(&d).point;
                assert!(body.distance(&p) <= MEMBERSHIP_TOL * 10.0, "{body:?}");
            }
        }
    }

    #[test]
    fn projection_ball_and_box() {
        let b = ConvexBody::ball(&[0.0, 0.0], 1.0);
        assert!(b.project(&VecN::new2(2.0, 0.0)).dist(&VecN::new2(1.0, 0.0)) < 1e-12);
        assert_eq!(b.project(&VecN::new2(0.2, 0.1)), VecN::new2(0.2, 0.1));
        let sq = ConvexBody::unit_square();
        let p = sq.project(&VecN::new2(3.0, 0.5));
        assert!(p.dist(&VecN::new2(1.0, 0.5)) < 1e-10);
    }

    #[test]
    fn projection_ellipsoid_boundary() {
        let e = ConvexBody::Ellipsoid {
            center: vec![0.0, 0.0],
            shape: vec![vec![4.0, 0.0], vec![0.0, 1.0]],
        };
        let p = e.project(&VecN::new2(5.0, 0.0));
        assert!(p.dist(&VecN::new2(2.0, 0.0)) < 1e-9);
        let inside = e.project(&VecN::new2(0.5, 0.2));
        assert_eq!(inside, VecN::new2(0.5, 0.2));
    }

    #[test]
    fn scaled_sum_of_balls_projects_like_ball() {
        // 0.5 B(0,1) + 0.5 B(0,1) = B(0,1).
        let s = ConvexBody::ScaledSum {
            terms: vec![
                ScaledTerm {
                    coeff: 0.5,
                    body: ConvexBody::ball(&[0.0, 0.0], 1.0),
                },
                ScaledTerm {
                    coeff: 0.5,
                    body: ConvexBody::ball(&[0.0, 0.0], 1.0),
                },
            ],
        };
        let p = s.project(&VecN::new2(0.0, 3.0));
        assert!(p.dist(&VecN::new2(0.0, 1.0)) < 1e-6);
    }

    #[test]
    fn hausdorff_of_nested_balls() {
        let a = ConvexBody::ball(&[0.0, 0.0], 1.0);
        let b = ConvexBody::ball(&[0.0, 0.0], 2.0);
        assert_relative_eq!(hausdorff(&a, &b, 360, 0), 1.0, epsilon = 1e-12);
        assert_eq!(hausdorff(&a, &a, 64, 0), 0.0);
    }

    #[test]
    fn support_deviation_of_translated_balls() {
        let a = ConvexBody::ball(&[0.0, 0.0], 1.0);
        let b = ConvexBody::ball(&[0.3, -0.4], 1.0);
        assert_relative_eq!(support_deviation(&a, &b, 360, 0), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn a_regular_singleton_and_square() {
        let s = ConvexBody::singleton(&[0.4, -0.1]);
        for a in [0.1, 1.0, 10.0] {
            assert!(check_a_regular(&s, a, 64, 256, 0).unwrap().pass);
        }
        let sq = ConvexBody::unit_square();
        for a in [0.1, 1.0, 10.0] {
            let r = check_a_regular(&sq, a, 64, 720, 0).unwrap();
            assert!(!r.pass, "square must fail a-regularity at a={a}");
            assert!(r.worst_violation > 0.0);
        }
        assert!(check_a_regular(&sq, -1.0, 8, 64, 0).is_err());
    }

    #[test]
    fn a_regular_ball_threshold() {
        // A unit ball is a-regular exactly for a <= 1/2.
        let b = ConvexBody::ball(&[0.0, 0.0], 1.0);
        assert!(check_a_regular(&b, 0.4, 128, 720, 0).unwrap().pass);
        assert!(!check_a_regular(&b, 0.8, 128, 720, 0).unwrap().pass);
    }

    #[test]
    fn linear_image_of_interval_is_segment() {
        // g = [[0],[1]] maps [-1,1] to the vertical segment.
        let g = MatN::from_rows(&[vec![0.0], vec![1.0]]);
        let seg = ConvexBody::interval(-1.0, 1.0).linear_image(&g, 2);
        let e = seg.support(&VecN::new2(0.0, 1.0));
        assert_eq!(e.value, 1.0);
        assert!(e.point.dist(&VecN::new2(0.0, 1.0)) < 1e-12);
    }

    #[test]
    fn json_roundtrip() {
        let b = ConvexBody::Translate {
            offset: vec![0.1, 0.2],
            body: Box::new(ConvexBody::unit_square()),
        };
        let json = serde_json::to_string(&b).unwrap();
        assert!(json.contains("\"type\""));
        let back: ConvexBody = serde_json::from_str(&json).unwrap();
        assert_eq!(b, back);
    }
}
