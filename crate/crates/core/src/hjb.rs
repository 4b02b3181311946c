//! Semi-Lagrangian computation of the minimum time function.
//!
//! The solver iterates the optimality-principle update
//! `T(x) = min_v { τ + I[T](x + τ v) }` with `T = 0` on the target, where
//! `I` is multilinear interpolation and `v` ranges over a discretization of
//! `F(x)` by extreme points (polytope vertices plus support points along a
//! direction grid — linear objectives over convex sets attain extrema there).
//! Updates exiting the domain count as `+∞`, so the box acts as a state
//! constraint. Sweeps alternate Gauss-Seidel orderings over the `2^n`
//! lexicographic orders for fast information propagation.

use crate::convexset::ConvexBody;
use crate::directions::unit_directions;
use crate::dynamics::Multifunction;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, TargetSet, ValueField};
use crate::space::{MatN, VecN};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct SolveParams {
    /// Semi-Lagrangian step; `None` takes the CFL bound
    /// `min Δx / (γ (1 + max|x|))`.
    pub tau: Option<f64>,
    pub vel_samples: usize,
    pub max_sweeps: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            tau: None,
            vel_samples: 32,
            max_sweeps: 2000,
            tol: 1e-10,
            seed: 0,
        }
    }
}

/// CFL bound for the step: the update foot `x + τ v` must stay within one
/// cell of x for the fastest admissible velocity on the domain.
pub fn cfl_bound(f: &Multifunction, grid: &GridSpec) -> f64 {
    let max_norm = grid.bounds().max_norm();
    let speed = f.constants.growth * (1.0 + max_norm);
    grid.min_spacing() / speed.max(1e-12)
}

enum VelocityTable {
    /// F constant in x: one shared list.
    Shared(Vec<VecN>),
    /// F(x) = A x + U: per-node velocities are `A x` plus a shared list.
    DriftPlus { a: MatN, base: Vec<VecN> },
    /// General per-node list, flat storage with node offsets.
    PerNode { offsets: Vec<u32>, vels: Vec<VecN> },
}

/// Extreme-point candidates for a velocity body: explicit vertices where the
/// structure provides them, `None` otherwise.
fn explicit_vertices(body: &ConvexBody) -> Option<Vec<VecN>> {
    match body {
        ConvexBody::Polytope { vertices } => {
            Some(vertices.iter().map(|v| VecN::from_slice(v)).collect())
        }
        ConvexBody::Ball { center, radius } if *radius == 0.0 => {
            Some(vec![VecN::from_slice(center)])
        }
        ConvexBody::Translate { offset, body } => {
            let o = VecN::from_slice(offset);
            explicit_vertices(body).map(|vs| vs.into_iter().map(|v| v + o).collect())
        }
        _ => None,
    }
}

fn candidate_velocities(body: &ConvexBody, dirs: &[VecN]) -> Vec<VecN> {
    let mut out = explicit_vertices(body).unwrap_or_default();
    for d in dirs {
        out.push(body.support(d).point);
    }
    dedup_points(&mut out);
    out
}

fn dedup_points(points: &mut Vec<VecN>) {
    let mut kept: Vec<VecN> = Vec::with_capacity(points.len());
    for p in points.drain(..) {
        if kept.iter().all(|q| q.dist(&p) > 1e-12) {
            kept.push(p);
        }
    }
    *points = kept;
}

fn build_velocity_table(
    f: &Multifunction,
    grid: &GridSpec,
    vel_samples: usize,
    seed: u64,
) -> VelocityTable {
    let dirs = unit_directions(f.dim, vel_samples, seed);
    if f.is_autonomous_constant() {
        let body = f.velocity_set(&VecN::zeros());
        return VelocityTable::Shared(candidate_velocities(&body, &dirs));
    }
    if let crate::dynamics::DynamicsForm::LinearDrift { a, u } = &f.form {
        return VelocityTable::DriftPlus {
            a: MatN::from_rows(a),
            base: candidate_velocities(u, &dirs),
        };
    }
    let n = grid.node_count();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut vels = Vec::new();
    offsets.push(0u32);
    for flat in 0..n {
        let x = grid.node_pos(&grid.multi_index(flat));
        let body = f.velocity_set(&x);
        vels.extend(candidate_velocities(&body, &dirs));
        offsets.push(vels.len() as u32);
    }
    VelocityTable::PerNode { offsets, vels }
}

/// Multilinear interpolation on raw storage; +∞ outside the domain or when a
/// stencil corner with positive weight is unreached.
#[inline]
fn interp_raw(grid: &GridSpec, values: &[f64], x: &VecN) -> f64 {
    let mut base = [0usize; 3];
    let mut frac = [0.0f64; 3];
    for i in 0..grid.dim {
        let rel = x[i] - grid.lo[i];
        if rel < 0.0 || x[i] > grid.hi[i] {
            return f64::INFINITY;
        }
        let t = rel / grid.spacing(i);
        let cell = (t.floor() as usize).min(grid.cells[i] - 1);
        base[i] = cell;
        frac[i] = (t - cell as f64).clamp(0.0, 1.0);
    }
    let corners = 1usize << grid.dim;
    let mut acc = 0.0;
    for corner in 0..corners {
        let mut idx = base;
        let mut w = 1.0;
        for i in 0..grid.dim {
            if corner >> i & 1 == 1 {
                idx[i] += 1;
                w *= frac[i];
            } else {
                w *= 1.0 - frac[i];
            }
        }
        if w == 0.0 {
            continue;
        }
        let v = values[grid.flat_index(&idx)];
        if !v.is_finite() {
            return f64::INFINITY;
        }
        acc += w * v;
    }
    acc
}

/// Solves the minimum time function on the grid.
pub fn solve_min_time(
    f: &Multifunction,
    target: &TargetSet,
    grid: &GridSpec,
    params: &SolveParams,
) -> Result<ValueField> {
    grid.validate()?;
    f.validate()?;
    target.validate(grid.dim)?;
    if params.vel_samples < 4 {
        return Err(Error::Config(format!(
            "vel_samples must be at least 4, got {}",
            params.vel_samples
        )));
    }
    let bound = cfl_bound(f, grid);
    let tau = params.tau.unwrap_or(bound);
    if !(tau > 0.0 && tau <= bound * (1.0 + 1e-12)) {
        return Err(Error::CflViolation { tau, bound });
    }

    let n = grid.node_count();
    let raster_tol = 0.5 * grid.max_spacing();
    let mut values = vec![f64::INFINITY; n];
    let mut target_mask = vec![false; n];
    for flat in 0..n {
        let x = grid.node_pos(&grid.multi_index(flat));
        if target.distance(&x) <= raster_tol.max(target.tol) {
            values[flat] = 0.0;
            target_mask[flat] = true;
        }
    }
    if target_mask.iter().all(|m| !m) {
        return Err(Error::Config(
            "target rasterizes to no grid node; grid too coarse for the target".into(),
        ));
    }

    let table = build_velocity_table(f, grid, params.vel_samples, params.seed);
    let order_count = 1usize << grid.dim;
    let mut residual = f64::INFINITY;
    let mut sweeps = 0usize;

    // Node visit order per sweep direction: reverse chosen axes.
    let nodes_per_axis: Vec<usize> = (0..grid.dim).map(|i| grid.nodes(i)).collect();
    let mut scratch_vels: Vec<VecN> = Vec::new();

    while sweeps < params.max_sweeps {
        let dir_mask = sweeps % order_count;
        let mut max_change = 0.0f64;
        let mut idx = [0usize; 3];
        let mut counters = vec![0usize; grid.dim];
        'nodes: loop {
            for i in 0..grid.dim {
                idx[i] = if dir_mask >> i & 1 == 1 {
                    nodes_per_axis[i] - 1 - counters[i]
                } else {
                    counters[i]
                };
            }
            let flat = grid.flat_index(&idx);
            if !target_mask[flat] {
                let x = grid.node_pos(&idx);
                let vels: &[VecN] = match &table {
                    VelocityTable::Shared(v) => v,
                    VelocityTable::DriftPlus { a, base } => {
                        let drift = a.mul_vec(&x);
                        scratch_vels.clear();
                        scratch_vels.extend(base.iter().map(|b| *b + drift));
                        &scratch_vels
                    }
                    VelocityTable::PerNode { offsets, vels } => {
                        &vels[offsets[flat] as usize..offsets[flat + 1] as usize]
                    }
                };
                let mut best = f64::INFINITY;
                for v in vels {
                    let foot = x + *v * tau;
                    let t = interp_raw(grid, &values, &foot);
                    if t < best {
                        best = t;
                    }
                }
                let candidate = tau + best;
                let old = values[flat];
                if candidate < old {
                    let change = if old.is_finite() {
                        old - candidate
                    } else {
                        f64::INFINITY
                    };
                    if change > max_change {
                        max_change = change;
                    }
                    values[flat] = candidate;
                }
            }
            // Odometer over counters.
            let mut axis = 0;
            loop {
                if axis >= grid.dim {
                    break 'nodes;
                }
                if counters[axis] + 1 < nodes_per_axis[axis] {
                    counters[axis] += 1;
                    break;
                }
                counters[axis] = 0;
                axis += 1;
            }
        }
        sweeps += 1;
        residual = max_change;
        // Require one full cycle of orderings after the last change settles.
        if residual <= params.tol && sweeps >= order_count {
            return Ok(ValueField {
                grid: *grid,
                values,
                target_mask,
                residual,
                sweeps,
            });
        }
    }
    Err(Error::SolverBudget {
        sweeps,
        residual,
    })
}

/// Endpoints at time `t` of Euler-integrated selections of the reversed
/// inclusion `ẏ ∈ -F(y)`, started from target boundary samples. Selections
/// follow a fixed support direction per trajectory.
pub fn attainable_points(
    f: &Multifunction,
    target: &TargetSet,
    t: f64,
    trajectories: usize,
    dt: f64,
    seed: u64,
) -> Result<Vec<VecN>> {
    if trajectories == 0 {
        return Err(Error::Config("need at least one trajectory".into()));
    }
    if dt <= 0.0 {
        return Err(Error::Config("dt must be positive".into()));
    }
    let dirs = unit_directions(f.dim, trajectories.max(8), seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(trajectories);
    for j in 0..trajectories {
        let boundary_dir = dirs[j % dirs.len()];
        let body = &target.bodies[j % target.bodies.len()];
        let start = body.support(&boundary_dir).point;
        let sel_dir = dirs[rng.gen_range(0..dirs.len())];
        let mut y = start;
        let steps = (t / dt).round() as usize;
        for _ in 0..steps {
            let v = f.velocity_set(&y).support(&sel_dir).point;
            y = y - v * dt;
        }
        out.push(y);
    }
    Ok(out)
}

/// Result of the sampled sublevel-set convexity probe.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub pass: bool,
    pub worst_violation: f64,
    pub pairs_tested: usize,
    pub slack: f64,
}

/// Checks midpoint convexity of `R(t) = {T <= t}`: for sampled pairs of
/// boundary nodes the chord midpoint must satisfy `T <= t + slack` with
/// `slack = 2 Lip_est Δx` absorbing first-order grid error.
pub fn check_sublevel_convexity(
    field: &ValueField,
    t: f64,
    max_pairs: usize,
    seed: u64,
) -> ConvexityReport {
    let cloud = field.sublevel_points(t);
    let boundary: Vec<VecN> = cloud
        .points
        .iter()
        .zip(cloud.boundary.iter())
        .filter(|(_, b)| **b)
        .map(|(p, _)| *p)
        .collect();
    let dx = field.grid.max_spacing();
    let mut lip = 0.0f64;
    for p in boundary.iter().take(64) {
        lip = lip.max(field.lipschitz_estimate(p, 3.0 * dx));
    }
    let slack = 2.0 * lip * dx;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut tested = 0usize;
    if boundary.len() >= 2 {
        for _ in 0..max_pairs {
            let i = rng.gen_range(0..boundary.len());
            let j = rng.gen_range(0..boundary.len());
            if i == j {
                continue;
            }
            let mid = (boundary[i] + boundary[j]) * 0.5;
            let tv = match field.eval(&mid) {
                Ok(v) => v,
                Err(_) => f64::INFINITY,
            };
            tested += 1;
            let excess = if tv.is_finite() {
                tv - (t + slack)
            } else {
                f64::INFINITY
            };
            if excess > worst {
                worst = excess;
            }
        }
    }
    ConvexityReport {
        pass: worst <= 0.0,
        worst_violation: worst.max(0.0),
        pairs_tested: tested,
        slack,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::DeclaredConstants;

    fn eikonal_dynamics() -> Multifunction {
        Multifunction::isotropic(
            2,
            "1",
            DeclaredConstants {
                lipschitz: 0.0,
                growth: 1.0,
                ..Default::default()
            },
        )
        .unwrap()
    }

    fn eikonal_field(cells: usize) -> ValueField {
        let grid = GridSpec::new(2, &[-2.0, -2.0], &[2.0, 2.0], &[cells, cells]).unwrap();
        let target = TargetSet::single(ConvexBody::ball(&[0.0, 0.0], 0.25), 1e-9);
        solve_min_time(&eikonal_dynamics(), &target, &grid, &SolveParams::default()).unwrap()
    }

    #[test]
    fn eikonal_matches_distance_function() {
        let field = eikonal_field(100);
        let dx = field.grid.max_spacing();
        let mut worst = 0.0f64;
        for flat in 0..field.grid.node_count() {
            let v = field.values[flat];
            if !(v <= 1.5) {
                continue;
            }
            let p = field.grid.node_pos(&field.grid.multi_index(flat));
            let exact = (p.norm() - 0.25).max(0.0);
            worst = worst.max((v - exact).abs());
        }
        assert!(worst <= 2.0 * dx, "eikonal error {worst} > {}", 2.0 * dx);
    }

    #[test]
    fn refinement_tightens_eikonal_error() {
        let err = |cells: usize| {
            let field = eikonal_field(cells);
            let mut worst = 0.0f64;
            for flat in 0..field.grid.node_count() {
                let v = field.values[flat];
                if !(v <= 1.5) {
                    continue;
                }
                let p = field.grid.node_pos(&field.grid.multi_index(flat));
                worst = worst.max((v - (p.norm() - 0.25).max(0.0)).abs());
            }
            worst
        };
        let coarse = err(50);
        let fine = err(100);
        assert!(
            coarse / fine >= 1.5,
            "refinement gain {:.2} below 1.5 (coarse {coarse:.4}, fine {fine:.4})",
            coarse / fine
        );
    }

    #[test]
    fn square_velocities_give_max_norm_time() {
        let f = Multifunction::linear_drift(
            MatN::zeros(),
            2,
            ConvexBody::unit_square(),
            DeclaredConstants {
                lipschitz: 0.0,
                growth: 2.0,
                ..Default::default()
            },
        );
        let grid = GridSpec::new(2, &[-2.0, -2.0], &[2.0, 2.0], &[100, 100]).unwrap();
        let dx = grid.max_spacing();
        let target = TargetSet::single(ConvexBody::ball(&[0.0, 0.0], dx), 1e-9);
        let field = solve_min_time(&f, &target, &grid, &SolveParams::default()).unwrap();
        let mut worst = 0.0f64;
        for flat in 0..grid.node_count() {
            let v = field.values[flat];
            if !(v <= 1.5) {
                continue;
            }
            let p = grid.node_pos(&grid.multi_index(flat));
            let exact = (p[0].abs().max(p[1].abs()) - dx).max(0.0);
            worst = worst.max((v - exact).abs());
        }
        assert!(worst <= 2.0 * dx, "max-norm error {worst} > {}", 2.0 * dx);
    }

    #[test]
    fn dp_residual_holds_at_finite_cells() {
        let field = eikonal_field(60);
        let f = eikonal_dynamics();
        let tau = cfl_bound(&f, &field.grid);
        let dirs = unit_directions(2, 32, 0);
        let mut worst = 0.0f64;
        for flat in 0..field.grid.node_count() {
            if field.target_mask[flat] || !field.values[flat].is_finite() {
                continue;
            }
            let x = field.grid.node_pos(&field.grid.multi_index(flat));
            let body = f.velocity_set(&x);
            let mut best = f64::INFINITY;
            for d in &dirs {
                let foot = x + body.support(d).point * tau;
                best = best.min(interp_raw(&field.grid, &field.values, &foot));
            }
            if best.is_finite() {
                worst = worst.max((field.values[flat] - (tau + best)).abs());
            }
        }
        assert!(worst <= 1e-8, "optimality residual {worst}");
    }

    #[test]
    fn strictly_positive_off_target() {
        let field = eikonal_field(60);
        let f = eikonal_dynamics();
        let tau = cfl_bound(&f, &field.grid);
        for flat in 0..field.grid.node_count() {
            let v = field.values[flat];
            if field.target_mask[flat] {
                assert_eq!(v, 0.0);
            } else if v.is_finite() {
                assert!(v >= tau - 1e-14);
            }
        }
    }

    #[test]
    fn cfl_violation_is_reported() {
        let f = eikonal_dynamics();
        let grid = GridSpec::new(2, &[-2.0, -2.0], &[2.0, 2.0], &[50, 50]).unwrap();
        let target = TargetSet::single(ConvexBody::ball(&[0.0, 0.0], 0.25), 1e-9);
        let params = SolveParams {
            tau: Some(1.0),
            ..Default::default()
        };
        match solve_min_time(&f, &target, &grid, &params) {
            Err(Error::CflViolation { .. }) => {}
            other => panic!("expected CFL violation, got {other:?}"),
        }
    }

    #[test]
    fn budget_error_carries_residual() {
        let f = eikonal_dynamics();
        let grid = GridSpec::new(2, &[-2.0, -2.0], &[2.0, 2.0], &[50, 50]).unwrap();
        let target = TargetSet::single(ConvexBody::ball(&[0.0, 0.0], 0.25), 1e-9);
        let params = SolveParams {
            max_sweeps: 2,
            ..Default::default()
        };
        match solve_min_time(&f, &target, &grid, &params) {
            Err(Error::SolverBudget { sweeps, .. }) => assert_eq!(sweeps, 2),
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn sublevel_of_eikonal_is_annulus() {
        let field = eikonal_field(100);
        let cloud = field.sublevel_points(1.0);
        let dx = field.grid.max_spacing();
        for (p, b) in cloud.points.iter().zip(cloud.boundary.iter()) {
            assert!(p.norm() <= 1.25 + 2.0 * dx);
            if *b {
                assert!(
                    (p.norm() - 1.25).abs() <= 3.0 * dx,
                    "boundary node off the ring: {:?}",
                    p
                );
            }
        }
        // Below the smallest positive value only the target remains.
        let tiny = field.sublevel_points(1e-6);
        for (i, _) in tiny.points.iter().enumerate() {
            assert!(field.target_mask[tiny.node_indices[i]]);
        }
    }

    #[test]
    fn attainable_points_stay_in_sublevel() {
        let field = eikonal_field(100);
        let f = eikonal_dynamics();
        let target = TargetSet::single(ConvexBody::ball(&[0.0, 0.0], 0.25), 1e-9);
        let dt = 0.01;
        let pts = attainable_points(&f, &target, 1.0, 24, dt, 7).unwrap();
        assert_eq!(pts.len(), 24);
        for p in &pts {
            assert!(p.norm() <= 1.25 + dt + 1e-9);
            let t = field.eval(p).unwrap();
            assert!(t <= 1.0 + 2.0 * field.grid.max_spacing() + dt);
        }
        // t = 0 returns boundary samples of the target itself.
        for p in attainable_points(&f, &target, 0.0, 8, dt, 7).unwrap() {
            assert!((p.norm() - 0.25).abs() < 1e-9);
        }
    }

    #[test]
    fn eikonal_sublevels_are_convex() {
        let field = eikonal_field(100);
        for t in [0.5, 1.0, 1.5] {
            let r = check_sublevel_convexity(&field, t, 400, 11);
            assert!(r.pass, "eikonal sublevel at t={t} flagged nonconvex: {r:?}");
        }
    }
}
