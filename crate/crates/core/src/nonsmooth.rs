//! Discrete estimation of proximal normal cones, epigraph normals, proximal
//! and horizontal subdifferentials, cone dimension, and phi-convexity
//! constants.
//!
//! A unit direction `u` is accepted as a proximal normal of a sampled set at
//! `x` when `<u, y - x> <= σ |y - x|^2` holds for all cloud points `y` near
//! `x` with `σ` below a scale-aware cap: finite clouds accept every
//! direction as `σ → ∞`, so the cap `σ_max ≈ 1/(4 Δx)` rejecting directions
//! that need more than half the grid-resolvable curvature is mandatory.
//! Accepted directions carry their measured `σ` so downstream consistency
//! checks can match tolerances instead of inventing them.

use crate::directions::{angular_step, unit_directions};
use crate::error::{Error, Result};
use crate::grid::ValueField;
use crate::space::{rank_of, VecN};
use serde::{Deserialize, Serialize};

/// Default cap: half of the grid-resolvable curvature `1/(2 Δx)`.
pub fn default_sigma_max(dx: f64) -> f64 {
    0.5 / (2.0 * dx)
}

/// One accepted proximal normal direction with its measured constant.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ConeGen {
    pub dir: VecN,
    pub sigma: f64,
}

/// Sampled generators of a proximal normal cone at a point of a set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProximalCone {
    pub base: VecN,
    pub generators: Vec<ConeGen>,
    pub radius: f64,
    pub directions_tested: usize,
}

/// One accepted epigraph normal pair `(ζ, α)`, `|(ζ,α)| = 1`, `α <= 0`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EpiPair {
    pub zeta: VecN,
    pub alpha: f64,
    pub sigma: f64,
}

/// Sampled proximal normals to the epigraph of T at `(x, T(x))`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpiNormalSample {
    pub base_point: VecN,
    pub base_value: f64,
    pub pairs: Vec<EpiPair>,
    pub radius: f64,
    pub directions_tested: usize,
}

/// Smallest σ making the proximal inequality hold for `u` against all cloud
/// points within `radius` of `base` (excluding the base itself).
fn required_sigma(u: &VecN, base: &VecN, cloud: &[VecN], radius: f64) -> (f64, usize) {
    let mut sigma = 0.0f64;
    let mut seen = 0usize;
    for y in cloud {
        let d = *y - *base;
        let dist_sq = d.norm_sq();
        if dist_sq < 1e-24 || dist_sq > radius * radius {
            continue;
        }
        seen += 1;
        let ratio = u.dot(&d) / dist_sq;
        if ratio > sigma {
            sigma = ratio;
        }
    }
    (sigma, seen)
}

/// Estimates the proximal normal cone of the point cloud at `x`.
pub fn proximal_normals(
    cloud: &[VecN],
    x: &VecN,
    dim: usize,
    radius: f64,
    directions: usize,
    sigma_max: f64,
    seed: u64,
) -> Result<ProximalCone> {
    if !cloud.iter().any(|p| p.dist(x) < 1e-9) {
        return Err(Error::Config("cone base point must belong to the cloud".into()));
    }
    let nearby = cloud
        .iter()
        .filter(|p| {
            let d = p.dist(x);
            d > 1e-12 && d <= radius
        })
        .count();
    if nearby < 8 {
        return Err(Error::InsufficientSampling {
            found: nearby,
            needed: 8,
        });
    }
    let dirs = unit_directions(dim, directions, seed);
    let mut generators = Vec::new();
    for u in &dirs {
        let (sigma, _) = required_sigma(u, x, cloud, radius);
        if sigma <= sigma_max {
            generators.push(ConeGen {
                dir: *u,
                sigma: sigma.max(0.0),
            });
        }
    }
    Ok(ProximalCone {
        base: *x,
        generators,
        radius,
        directions_tested: dirs.len(),
    })
}

/// Epigraph samples around a base point: `(y, β)` for nodes `y` near `x` and
/// `β` climbing from `T(y)` in steps of `Δβ = Δx` until it clears both
/// `T(y) + radius` and `base_value + radius` (the isotropic step keeps the
/// proximal test Euclidean in `(x, β)` space).
fn epigraph_cloud(field: &ValueField, x: &VecN, base_value: f64, radius: f64) -> Vec<VecN> {
    let dim = field.grid.dim;
    let dbeta = field.grid.max_spacing();
    let mut out = Vec::new();
    for (_, _, y) in field.nodes_near(x, radius) {
        let ty = match field.eval(&y) {
            Ok(v) if v.is_finite() => v,
            _ => continue,
        };
        let top = (ty + radius).max(base_value + radius);
        let mut beta = ty;
        while beta <= top + 1e-12 {
            out.push(y.lift(dim, beta));
            beta += dbeta;
        }
    }
    out
}

/// Estimates proximal normals to the epigraph of the field at `(x, T(x))`.
///
/// Directions with positive last coordinate are rejected outright: the
/// epigraph is unbounded upward, so they fail against sufficiently high
/// samples even though a finite β-range cannot witness that.
pub fn epi_normals(
    field: &ValueField,
    x: &VecN,
    radius: f64,
    directions: usize,
    sigma_max: f64,
    seed: u64,
) -> Result<EpiNormalSample> {
    let tx = field.eval(x)?;
    epi_normals_at(field, x, tx, radius, directions, sigma_max, seed)
}

/// Like [`epi_normals`] with an explicit base height, so points strictly
/// above the graph (interior of the epigraph) can be probed too.
pub fn epi_normals_at(
    field: &ValueField,
    x: &VecN,
    base_value: f64,
    radius: f64,
    directions: usize,
    sigma_max: f64,
    seed: u64,
) -> Result<EpiNormalSample> {
    let dim = field.grid.dim;
    let tx = base_value;
    if !tx.is_finite() {
        return Err(Error::Config("epigraph normals need a finite value at x".into()));
    }
    for i in 0..dim {
        if x[i] - radius < field.grid.lo[i] || x[i] + radius > field.grid.hi[i] {
            return Err(Error::Config(format!(
                "point must be at least the search radius {radius} inside the grid"
            )));
        }
    }
    let cloud = epigraph_cloud(field, x, tx, radius);
    let base = x.lift(dim, tx);
    let nearby = cloud
        .iter()
        .filter(|p| {
            let d = p.dist(&base);
            d > 1e-12 && d <= radius
        })
        .count();
    if nearby < 8 {
        return Err(Error::InsufficientSampling {
            found: nearby,
            needed: 8,
        });
    }
    let dirs = unit_directions(dim + 1, directions, seed);
    let mut pairs = Vec::new();
    for u in &dirs {
        if u[dim] > 1e-12 {
            continue;
        }
        let (sigma, _) = required_sigma(u, &base, &cloud, radius);
        if sigma <= sigma_max {
            let (zeta, alpha) = u.split(dim);
            pairs.push(EpiPair {
                zeta,
                alpha,
                sigma: sigma.max(0.0),
            });
        }
    }
    Ok(EpiNormalSample {
        base_point: *x,
        base_value: tx,
        pairs,
        radius,
        directions_tested: dirs.len(),
    })
}

/// Smallest σ making one epigraph pair `(ζ, α)` pass the proximal test at
/// `(x, base_value)` against the local epigraph samples. Used by the
/// verification harness to test specific pairs without direction grids.
pub fn epi_pair_required_sigma(
    field: &ValueField,
    x: &VecN,
    base_value: f64,
    zeta: &VecN,
    alpha: f64,
    radius: f64,
) -> f64 {
    let dim = field.grid.dim;
    let v = match zeta.lift(dim, alpha).normalized(1e-300) {
        Some(u) => u,
        None => return 0.0,
    };
    let base = x.lift(dim, base_value);
    let cloud = epigraph_cloud(field, x, base_value, radius);
    required_sigma(&v, &base, &cloud, radius).0
}

/// Discrete proximal-subgradient acceptance: smallest `c` making
/// `T(y) - T(x) - <ζ, y-x> >= -c |y-x|^2` hold over finite-valued nodes
/// near x.
pub fn subgradient_required_c(field: &ValueField, x: &VecN, zeta: &VecN, radius: f64) -> f64 {
    let tx = match field.eval(x) {
        Ok(v) if v.is_finite() => v,
        _ => return f64::INFINITY,
    };
    let mut worst = 0.0f64;
    for (_, _, y) in field.nodes_near(x, radius) {
        let d = y - *x;
        let dist_sq = d.norm_sq();
        if dist_sq < 1e-24 {
            continue;
        }
        let ty = match field.eval(&y) {
            Ok(v) if v.is_finite() => v,
            _ => continue,
        };
        let deficit = zeta.dot(&d) - (ty - tx);
        if deficit > 0.0 {
            worst = worst.max(deficit / dist_sq);
        }
    }
    worst
}

/// Estimates the proximal subdifferential of the field at x.
///
/// Candidates come from a direction × magnitude grid around the local
/// Lipschitz scale plus the rescaled epigraph pairs with `α < 0`; a
/// candidate is kept when its required curvature constant stays below
/// `c_max`.
pub fn prox_subdiff(
    field: &ValueField,
    x: &VecN,
    radius: f64,
    c_max: f64,
    directions: usize,
    seed: u64,
) -> Result<Vec<VecN>> {
    let dim = field.grid.dim;
    let tx = field.eval(x)?;
    if !tx.is_finite() {
        return Err(Error::Config("subdifferential needs a finite value at x".into()));
    }
    let lip = field.lipschitz_estimate(x, radius).max(1e-6);
    let dirs = unit_directions(dim, directions, seed);
    let mut candidates: Vec<VecN> = Vec::new();
    for d in &dirs {
        let mut mag = 0.5 * lip;
        while mag <= 1.5 * lip + 1e-12 {
            candidates.push(*d * mag);
            mag += 0.01 * lip;
        }
    }
    if let Ok(sample) = epi_normals(
        field,
        x,
        radius,
        default_epi_directions(dim),
        default_sigma_max(field.grid.max_spacing()),
        seed,
    ) {
        for p in &sample.pairs {
            if p.alpha < -1e-9 {
                candidates.push(p.zeta * (1.0 / -p.alpha));
            }
        }
    }
    let mut accepted = Vec::new();
    for zeta in candidates {
        if subgradient_required_c(field, x, &zeta, radius) <= c_max {
            accepted.push(zeta);
        }
    }
    Ok(accepted)
}

/// Default epigraph direction counts: 360 planar directions in the epigraph
/// plane for n=1, the 2562-node icosphere for n=2, a 4-sphere covering for
/// n=3.
pub fn default_epi_directions(dim: usize) -> usize {
    match dim {
        1 => 360,
        2 => 2562,
        _ => 3000,
    }
}

/// Default state-space direction counts per the estimator configuration:
/// 360 for n=2, the icosphere for n=3.
pub fn default_state_directions(dim: usize) -> usize {
    match dim {
        1 => 2,
        2 => 360,
        _ => 2562,
    }
}

/// Estimates the horizontal subdifferential: unit rescalings of the
/// `α = 0` slice of the accepted epigraph normals. The slice width is one
/// angular step of the direction grid.
pub fn horiz_subdiff(
    field: &ValueField,
    x: &VecN,
    radius: f64,
    sigma_max: f64,
    directions: usize,
    seed: u64,
) -> Result<Vec<VecN>> {
    let dim = field.grid.dim;
    let sample = epi_normals(field, x, radius, directions, sigma_max, seed)?;
    let slice = 1.5 * angular_step(dim + 1, sample.directions_tested);
    let mut out: Vec<VecN> = Vec::new();
    for p in &sample.pairs {
        if p.alpha.abs() <= slice {
            if let Some(u) = p.zeta.normalized(1e-12) {
                if out.iter().all(|q| q.dist(&u) > 1e-9) {
                    out.push(u);
                }
            }
        }
    }
    Ok(out)
}

/// Linear-span dimension of the accepted generators, with singular values
/// thresholded at 1e-6 of the largest.
pub fn cone_dimension(generators: &[VecN], dim: usize) -> usize {
    rank_of(generators, dim, 1e-6)
}

/// Flags cones whose positive hull visibly disagrees with their linear span
/// (two nearly opposite generators span a line positively but rank counts
/// it once); scenario cones avoid this, the report surfaces it.
pub fn positive_hull_flag(generators: &[VecN]) -> bool {
    for (i, a) in generators.iter().enumerate() {
        for b in generators.iter().skip(i + 1) {
            if a.dot(b) < -0.999 {
                return true;
            }
        }
    }
    false
}

/// Smallest uniform phi validating the phi-convexity inequality
/// `<v, y - x> <= phi |v| |y - x|^2` over the whole cloud for every cone
/// generator (the test is global, not restricted to the search ball).
pub fn phi_convexity_constant(cloud: &[VecN], cones: &[ProximalCone]) -> f64 {
    let mut phi = 0.0f64;
    for cone in cones {
        for g in &cone.generators {
            for y in cloud {
                let d = *y - cone.base;
                let dist_sq = d.norm_sq();
                if dist_sq < 1e-24 {
                    continue;
                }
                let ratio = g.dir.dot(&d) / dist_sq;
                if ratio > phi {
                    phi = ratio;
                }
            }
        }
    }
    phi
}

/// Replaces each cone's accepted fan by its best-certified directions: the
/// direction grid resolves normals only to `arcsin(σ_max · spacing)`, so raw
/// fans carry slop that a global phi test would report as curvature. For
/// each angular cluster of accepted directions the refinement scans a dense
/// sub-grid across the cluster and keeps the direction of smallest global
/// ratio.
pub fn refine_cone_for_phi(cone: &ProximalCone, cloud: &[VecN], dim: usize) -> ProximalCone {
    if cone.generators.is_empty() {
        return cone.clone();
    }
    let global_ratio = |u: &VecN| -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for y in cloud {
            let d = *y - cone.base;
            let dist_sq = d.norm_sq();
            if dist_sq < 1e-24 {
                continue;
            }
            worst = worst.max(u.dot(&d) / dist_sq);
        }
        worst
    };
    let clusters = cluster_directions(
        &cone.generators.iter().map(|g| g.dir).collect::<Vec<_>>(),
        2.5 * angular_step(dim, cone.directions_tested.max(1)),
    );
    let mut refined = Vec::new();
    for cluster in clusters {
        let mut best_dir = cluster[0];
        let mut best = global_ratio(&cluster[0]);
        for u in &cluster {
            let r = global_ratio(u);
            if r < best {
                best = r;
                best_dir = *u;
            }
        }
        // Local sub-grid scan around the cluster winner.
        let step = angular_step(dim, cone.directions_tested.max(1));
        for candidate in perturbed_directions(&best_dir, step, dim) {
            let r = global_ratio(&candidate);
            if r < best {
                best = r;
                best_dir = candidate;
            }
        }
        refined.push(ConeGen {
            dir: best_dir,
            sigma: best.max(0.0),
        });
    }
    ProximalCone {
        base: cone.base,
        generators: refined,
        radius: cone.radius,
        directions_tested: cone.directions_tested,
    }
}

fn cluster_directions(dirs: &[VecN], gap: f64) -> Vec<Vec<VecN>> {
    let mut clusters: Vec<Vec<VecN>> = Vec::new();
    for d in dirs {
        let mut joined = false;
        for cluster in clusters.iter_mut() {
            if cluster
                .iter()
                .any(|c| c.dot(d).clamp(-1.0, 1.0).acos() <= gap)
            {
                cluster.push(*d);
                joined = true;
                break;
            }
        }
        if !joined {
            clusters.push(vec![*d]);
        }
    }
    // Merge clusters that touch through later members.
    let mut merged: Vec<Vec<VecN>> = Vec::new();
    'outer: for cluster in clusters {
        for m in merged.iter_mut() {
            if m.iter().any(|a| {
                cluster
                    .iter()
                    .any(|b| a.dot(b).clamp(-1.0, 1.0).acos() <= gap)
            }) {
                m.extend(cluster.iter().copied());
                continue 'outer;
            }
        }
        merged.push(cluster);
    }
    merged
}

fn perturbed_directions(center: &VecN, step: f64, dim: usize) -> Vec<VecN> {
    let mut out = Vec::new();
    // Orthonormal tangent frame at `center`.
    let mut frame = Vec::new();
    for axis in 0..dim {
        let e = VecN::basis(axis);
        let t = e - *center * center.dot(&e);
        if let Some(u) = t.normalized(1e-9) {
            let mut v = u;
            for f in &frame {
                v = v - *f * v.dot(f);
            }
            if let Some(u2) = v.normalized(1e-9) {
                frame.push(u2);
            }
        }
    }
    let sub = 24;
    for f in &frame {
        for k in -sub..=sub {
            let angle = 1.5 * step * k as f64 / sub as f64;
            let cand = *center * angle.cos() + *f * angle.sin();
            if let Some(u) = cand.normalized(1e-12) {
                out.push(u);
            }
        }
    }
    out
}

/// Sampled phi-convexity constant of the epigraph over a region: the largest
/// normalized proximal defect
/// `[<ζ, y-x> + α (T(y)-T(x))] / [(|ζ|+|α|)(|y-x|^2 + (T(y)-T(x))^2)]`
/// over sampled pairs and accepted (refined) epigraph pairs at x.
pub fn epi_phi_convexity(
    field: &ValueField,
    base_points: &[VecN],
    probe_points: &[VecN],
    radius: f64,
    sigma_max: f64,
    directions: usize,
    min_separation: f64,
    seed: u64,
) -> Result<f64> {
    let dim = field.grid.dim;
    let mut worst = 0.0f64;
    for x in base_points {
        let sample = epi_normals(field, x, radius, directions, sigma_max, seed)?;
        let refined = refine_epi_pairs(field, &sample, radius);
        let tx = sample.base_value;
        for y in probe_points {
            if y.dist(x) < min_separation {
                continue;
            }
            let ty = match field.eval(y) {
                Ok(v) if v.is_finite() => v,
                _ => continue,
            };
            let dt = ty - tx;
            let d = *y - *x;
            let denom_geom = d.norm_sq() + dt * dt;
            if denom_geom < 1e-24 {
                continue;
            }
            for p in &refined {
                let weight = p.zeta.norm() + p.alpha.abs();
                if weight < 1e-12 {
                    continue;
                }
                let defect = p.zeta.dot(&d) + p.alpha * dt;
                let ratio = defect / (weight * denom_geom);
                if ratio > worst {
                    worst = ratio;
                }
            }
        }
    }
    Ok(worst)
}

/// Same slop-removal as `refine_cone_for_phi`, in epigraph space: scan a
/// dense sub-grid across each accepted cluster against the local epigraph
/// cloud and keep the best-certified pair per cluster.
pub fn refine_epi_pairs(
    field: &ValueField,
    sample: &EpiNormalSample,
    radius: f64,
) -> Vec<EpiPair> {
    let dim = field.grid.dim;
    if sample.pairs.is_empty() {
        return Vec::new();
    }
    let cloud = epigraph_cloud(field, &sample.base_point, sample.base_value, radius);
    let base = sample.base_point.lift(dim, sample.base_value);
    let ratio = |u: &VecN| -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for y in &cloud {
            let d = *y - base;
            let dist_sq = d.norm_sq();
            if dist_sq < 1e-24 {
                continue;
            }
            worst = worst.max(u.dot(&d) / dist_sq);
        }
        worst
    };
    let dirs: Vec<VecN> = sample
        .pairs
        .iter()
        .map(|p| p.zeta.lift(dim, p.alpha))
        .collect();
    let step = angular_step(dim + 1, sample.directions_tested.max(1));
    let clusters = cluster_directions(&dirs, 2.5 * step);
    let mut out = Vec::new();
    for cluster in clusters {
        let mut best_dir = cluster[0];
        let mut best = ratio(&cluster[0]);
        for u in &cluster {
            let r = ratio(u);
            if r < best {
                best = r;
                best_dir = *u;
            }
        }
        for cand in perturbed_directions(&best_dir, step, dim + 1) {
            // Keep the refinement inside the epigraph-normal halfspace.
            if cand[dim] > 1e-12 {
                continue;
            }
            let r = ratio(&cand);
            if r < best {
                best = r;
                best_dir = cand;
            }
        }
        let (zeta, alpha) = best_dir.split(dim);
        out.push(EpiPair {
            zeta,
            alpha,
            sigma: best.max(0.0),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    /// Builds a field with analytically prescribed values.
    fn synthetic_field(
        lo: f64,
        hi: f64,
        cells: usize,
        f: impl Fn(&VecN) -> f64,
    ) -> ValueField {
        let grid = GridSpec::new(2, &[lo, lo], &[hi, hi], &[cells, cells]).unwrap();
        let values: Vec<f64> = (0..grid.node_count())
            .map(|flat| f(&grid.node_pos(&grid.multi_index(flat))))
            .collect();
        let target_mask = values.iter().map(|&v| v == 0.0).collect();
        ValueField {
            grid,
            values,
            target_mask,
            residual: 0.0,
            sweeps: 0,
        }
    }

    fn half_plane_cloud(n: usize) -> Vec<VecN> {
        // Grid sampling of {y2 <= 0} around the origin.
        let mut cloud = Vec::new();
        let h = 1.0 / n as f64;
        for i in -(n as isize)..=(n as isize) {
            for j in -(n as isize)..=0 {
                cloud.push(VecN::new2(i as f64 * h, j as f64 * h));
            }
        }
        cloud
    }

    #[test]
    fn half_plane_cone_is_upward_ray() {
        let cloud = half_plane_cloud(20);
        let dx = 0.05;
        let cone = proximal_normals(
            &cloud,
            &VecN::zeros(),
            2,
            6.0 * dx,
            360,
            default_sigma_max(dx),
            0,
        )
        .unwrap();
        assert!(!cone.generators.is_empty());
        for g in &cone.generators {
            let ang = g.dir.dot(&VecN::new2(0.0, 1.0)).clamp(-1.0, 1.0).acos();
            assert!(ang < 0.35, "generator {:?} too far from +e2", g.dir);
        }
        assert_eq!(cone_dimension(
            &cone.generators.iter().map(|g| g.dir).collect::<Vec<_>>(),
            2,
        ), 1);
    }

    #[test]
    fn interior_point_has_empty_cone() {
        let cloud = half_plane_cloud(20);
        let dx = 0.05;
        let cone = proximal_normals(
            &cloud,
            &VecN::new2(0.0, -0.5),
            2,
            6.0 * dx,
            180,
            default_sigma_max(dx),
            0,
        )
        .unwrap();
        assert!(cone.generators.is_empty());
    }

    #[test]
    fn box_corner_cone_is_quarter_plane() {
        // Sublevel cloud of the max norm at level t: the square [-t, t]^2.
        let t = 0.5;
        let mut cloud = Vec::new();
        let n = 25;
        let h = t / n as f64;
        for i in -(n as isize)..=(n as isize) {
            for j in -(n as isize)..=(n as isize) {
                cloud.push(VecN::new2(i as f64 * h, j as f64 * h));
            }
        }
        let corner = VecN::new2(t, t);
        let cone = proximal_normals(&cloud, &corner, 2, 6.0 * h, 360, default_sigma_max(h), 0)
            .unwrap();
        let dirs: Vec<VecN> = cone.generators.iter().map(|g| g.dir).collect();
        assert_eq!(cone_dimension(&dirs, 2), 2);
        // e1 and e2 are both inside the accepted fan.
        for target in [VecN::new2(1.0, 0.0), VecN::new2(0.0, 1.0)] {
            assert!(
                dirs.iter().any(|d| d.dot(&target) > 0.99),
                "missing fan edge {target:?}"
            );
        }
        // Nothing outside the closed quarter plane (allowing grid slop).
        for d in &dirs {
            assert!(d[0] > -0.3 && d[1] > -0.3, "spurious generator {d:?}");
        }
        assert!(!positive_hull_flag(&dirs));
    }

    #[test]
    fn insufficient_sampling_is_an_error() {
        let cloud = vec![VecN::zeros(), VecN::new2(0.1, 0.0)];
        match proximal_normals(&cloud, &VecN::zeros(), 2, 0.5, 16, 10.0, 0) {
            Err(Error::InsufficientSampling { .. }) => {}
            other => panic!("expected sampling error, got {other:?}"),
        }
    }

    #[test]
    fn eikonal_epi_normals_are_gradient_ray() {
        // T = |x| away from a small target; smooth at (1, 0).
        let field = synthetic_field(0.2, 1.8, 80, |p| p.norm());
        let dx = field.grid.max_spacing();
        let x = VecN::new2(1.0, 1.0);
        let sample = epi_normals(&field, &x, 4.0 * dx, 2562, default_sigma_max(dx), 0).unwrap();
        assert!(!sample.pairs.is_empty());
        let expected = VecN::new3(
            0.5_f64.sqrt() / 2.0_f64.sqrt(),
            0.5_f64.sqrt() / 2.0_f64.sqrt(),
            -1.0 / 2.0_f64.sqrt(),
        );
        for p in &sample.pairs {
            assert!(p.alpha <= 1e-12, "alpha must be nonpositive");
            let v = p.zeta.lift(2, p.alpha);
            let ang = v.dot(&expected).clamp(-1.0, 1.0).acos();
            assert!(ang < 0.35, "pair {v:?} too far from the gradient ray");
        }
    }

    #[test]
    fn eikonal_prox_subdiff_is_gradient() {
        let field = synthetic_field(0.2, 1.8, 80, |p| p.norm());
        let dx = field.grid.max_spacing();
        let x = VecN::new2(1.0, 1.0);
        let subs = prox_subdiff(&field, &x, 4.0 * dx, 2.0, 360, 0).unwrap();
        assert!(!subs.is_empty());
        let grad = VecN::new2(0.5_f64.sqrt(), 0.5_f64.sqrt());
        for z in &subs {
            assert!(z.dist(&grad) < 0.12, "subgradient {z:?} far from {grad:?}");
        }
        // The true gradient itself is accepted.
        assert!(subgradient_required_c(&field, &x, &grad, 4.0 * dx) <= 1.0);
    }

    #[test]
    fn horizontal_subdiff_empty_at_lipschitz_points_and_found_at_sqrt() {
        let field = synthetic_field(0.2, 1.8, 80, |p| p.norm());
        let dx = field.grid.max_spacing();
        let x = VecN::new2(1.0, 1.0);
        let horiz = horiz_subdiff(&field, &x, 4.0 * dx, default_sigma_max(dx), 2562, 0).unwrap();
        assert!(horiz.is_empty(), "Lipschitz point produced {horiz:?}");

        // Square-root profile T = 2 sqrt(|x1|): at a point on {x1 = 0} every
        // linear lower bound is defeated, and (±e1, 0) passes the proximal
        // test because beta^2 >= 4 |y1| dominates <±e1, y>.
        let sqrt_field = synthetic_field(-0.8, 0.8, 80, |p| 2.0 * p[0].abs().sqrt());
        let sdx = sqrt_field.grid.max_spacing();
        let x0 = VecN::new2(0.0, 0.0);
        let horiz = horiz_subdiff(
            &sqrt_field,
            &x0,
            5.0 * sdx,
            default_sigma_max(sdx),
            2562,
            0,
        )
        .unwrap();
        assert!(
            horiz.iter().any(|u| u.dot(&VecN::new2(1.0, 0.0)) > 0.97),
            "missing +e1 horizontal direction: {horiz:?}"
        );
        assert!(
            horiz.iter().any(|u| u.dot(&VecN::new2(-1.0, 0.0)) > 0.97),
            "missing -e1 horizontal direction: {horiz:?}"
        );
        // And the proximal subdifferential there is empty.
        let subs = prox_subdiff(&sqrt_field, &x0, 5.0 * sdx, 2.0, 180, 0).unwrap();
        assert!(subs.is_empty(), "sqrt point accepted {subs:?}");
    }

    #[test]
    fn epi_pairs_rescale_to_subgradients() {
        // Consistency of the two estimators at the discrete level.
        let field = synthetic_field(0.2, 1.8, 80, |p| p.norm());
        let dx = field.grid.max_spacing();
        let x = VecN::new2(1.0, 1.0);
        let sample = epi_normals(&field, &x, 4.0 * dx, 2562, default_sigma_max(dx), 0).unwrap();
        let mut checked = 0;
        for p in &sample.pairs {
            if p.alpha < -0.2 {
                let zeta = p.zeta * (1.0 / -p.alpha);
                let c_bound = p.sigma * (1.0 + zeta.norm_sq());
                let c_req = subgradient_required_c(&field, &x, &zeta, 4.0 * dx);
                assert!(
                    c_req <= c_bound + 1e-9,
                    "pair sigma {} gives cap {c_bound} but requires {c_req}",
                    p.sigma
                );
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn generator_acceptance_is_scale_invariant() {
        let cloud = half_plane_cloud(20);
        let dx = 0.05;
        let cone = proximal_normals(
            &cloud,
            &VecN::zeros(),
            2,
            6.0 * dx,
            180,
            default_sigma_max(dx),
            0,
        )
        .unwrap();
        for g in &cone.generators {
            // Rescaling a generator and renormalizing reproduces it exactly,
            // so the acceptance test gives the same sigma.
            let rescaled = (g.dir * 7.3).normalized(0.0).unwrap();
            let (sigma, _) = required_sigma(&rescaled, &cone.base, &cloud, cone.radius);
            assert!((sigma.max(0.0) - g.sigma).abs() < 1e-12);
        }
    }

    #[test]
    fn phi_constant_of_circle_complement_cloud() {
        // Points on a circle of radius r: the inward normal needs exactly
        // phi = 1/(2r) by the chord identity.
        let r = 0.8;
        let n = 720;
        let cloud: Vec<VecN> = (0..n)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                VecN::new2(r * a.cos(), r * a.sin())
            })
            .collect();
        let base = cloud[0];
        let spacing = 2.0 * std::f64::consts::PI * r / n as f64;
        let cone = proximal_normals(
            &cloud,
            &base,
            2,
            40.0 * spacing,
            720,
            default_sigma_max(spacing),
            0,
        )
        .unwrap();
        let refined = refine_cone_for_phi(&cone, &cloud, 2);
        let phi = phi_convexity_constant(&cloud, &[refined]);
        let expected = 1.0 / (2.0 * r);
        assert!(
            (phi - expected).abs() < 0.05 * expected,
            "phi {phi} vs 1/(2r) = {expected}"
        );
    }

    #[test]
    fn phi_constant_vanishes_on_convex_cloud() {
        // Disc sampled on a grid plus exact boundary circle points.
        let r = 1.0;
        let mut cloud = Vec::new();
        let n = 40;
        for i in -(n as isize)..=(n as isize) {
            for j in -(n as isize)..=(n as isize) {
                let p = VecN::new2(i as f64 / n as f64, j as f64 / n as f64);
                if p.norm() <= r {
                    cloud.push(p);
                }
            }
        }
        let m = 360;
        let boundary: Vec<VecN> = (0..m)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                VecN::new2(r * a.cos(), r * a.sin())
            })
            .collect();
        cloud.extend(boundary.iter().copied());
        let h = 1.0 / n as f64;
        let mut cones = Vec::new();
        for base in boundary.iter().step_by(30) {
            let cone =
                proximal_normals(&cloud, base, 2, 6.0 * h, 360, default_sigma_max(h), 0).unwrap();
            cones.push(refine_cone_for_phi(&cone, &cloud, 2));
        }
        let phi = phi_convexity_constant(&cloud, &cones);
        assert!(phi < 0.6, "convex cloud reported phi = {phi}");
    }

    #[test]
    fn epi_phi_of_convex_field_is_small() {
        let field = synthetic_field(0.2, 1.8, 60, |p| p.norm());
        let dx = field.grid.max_spacing();
        let pts: Vec<VecN> = (0..8)
            .map(|k| {
                let a = 0.5 + 0.15 * k as f64;
                VecN::new2(a, 1.9 - a)
            })
            .collect();
        let c = epi_phi_convexity(
            &field,
            &pts,
            &pts,
            4.0 * dx,
            default_sigma_max(dx),
            2562,
            3.0 * dx,
            0,
        )
        .unwrap();
        assert!(c < 0.7, "convex epigraph reported C = {c}");
    }

    #[test]
    fn cone_dimension_cases() {
        assert_eq!(cone_dimension(&[], 2), 0);
        assert_eq!(cone_dimension(&[VecN::new2(1.0, 0.0)], 2), 1);
        assert_eq!(
            cone_dimension(&[VecN::new2(1.0, 0.0), VecN::new2(0.0, 1.0)], 2),
            2
        );
        assert!(positive_hull_flag(&[
            VecN::new2(1.0, 0.0),
            VecN::new2(-1.0, 0.0)
        ]));
    }
}
