//! Verification harness: maps each claimed property of the minimum time
//! function to a sampled pass/fail report over a solved scenario.
//!
//! Discretization note on tolerances: a proximal cone estimated from a
//! Δx-cloud resolves directions only to roughly `arcsin(σ_max Δx)`, while a
//! subgradient test at curvature cap `c` resolves to `c Δx`. Inclusion
//! checks between the two estimators therefore derive the acceptance cap of
//! the target test from the certificate (measured σ or c) of the source
//! object — the same bridge the continuous statements use — instead of
//! comparing objects estimated at incompatible resolutions. Every tolerance
//! that reaches a report comes verbatim from the configuration or from the
//! documented grid-scaled formulas here.

use crate::dynamics::{min_hamiltonian, Multifunction};
use crate::error::{Error, Result};
use crate::grid::{TargetSet, ValueField};
use crate::hamflow::{synthesize_from_target, hamiltonian_constancy, HamiltonianArc};
use crate::hjb::check_sublevel_convexity;
use crate::nonsmooth::{
    cone_dimension, default_epi_directions, default_sigma_max, default_state_directions,
    epi_normals_at, epi_pair_required_sigma, horiz_subdiff, phi_convexity_constant,
    positive_hull_flag, prox_subdiff, proximal_normals, refine_cone_for_phi,
    subgradient_required_c, ProximalCone,
};
use crate::scenario::{CheckKind, Scenario, VerifyConfig};
use crate::space::VecN;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One verification outcome. `pass` holds exactly when
/// `worst_violation <= tolerance`; `excluded + tested = samples`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub theorem: String,
    pub scenario: String,
    pub samples: usize,
    pub tested: usize,
    pub excluded: usize,
    pub pass: bool,
    pub worst_violation: f64,
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
}

impl VerificationReport {
    fn new(theorem: &str, scenario: &str) -> Self {
        VerificationReport {
            schema_version: 1,
            theorem: theorem.to_string(),
            scenario: scenario.to_string(),
            samples: 0,
            tested: 0,
            excluded: 0,
            pass: true,
            worst_violation: 0.0,
            tolerance: 0.0,
            details: serde_json::Value::Null,
        }
    }

    fn finish(mut self) -> Self {
        self.pass = self.worst_violation <= self.tolerance;
        self
    }

    fn hit(&mut self, violation: f64) {
        if violation > self.worst_violation {
            self.worst_violation = violation;
        }
    }
}

/// Serializes reports as JSON lines (one object per line, trailing newline).
pub fn reports_to_jsonl(reports: &[VerificationReport]) -> String {
    let mut out = String::new();
    for r in reports {
        out.push_str(&serde_json::to_string(r).expect("report serialization"));
        out.push('\n');
    }
    out
}

/// Human-readable summary, one line per report.
pub fn summary_table(reports: &[VerificationReport]) -> String {
    let mut out = String::new();
    let width = reports
        .iter()
        .map(|r| r.theorem.len())
        .max()
        .unwrap_or(8)
        .max(8);
    for r in reports {
        out.push_str(&format!(
            "{:>4} {:width$}  tested {:>4}  excluded {:>3}  worst {:>12.4e}  tol {:>10.3e}\n",
            if r.pass { "ok" } else { "FAIL" },
            r.theorem,
            r.tested,
            r.excluded,
            r.worst_violation,
            r.tolerance,
            width = width,
        ));
    }
    out
}

/// Everything a verification pass needs.
pub struct VerifyContext<'a> {
    pub scenario_id: String,
    pub field: &'a ValueField,
    pub dynamics: &'a Multifunction,
    pub target: &'a TargetSet,
    pub cfg: &'a VerifyConfig,
}

impl<'a> VerifyContext<'a> {
    pub fn new(scenario: &'a Scenario, field: &'a ValueField) -> Self {
        VerifyContext {
            scenario_id: scenario.id.clone(),
            field,
            dynamics: &scenario.dynamics,
            target: &scenario.target,
            cfg: &scenario.verify,
        }
    }

    fn dx(&self) -> f64 {
        self.field.grid.max_spacing()
    }

    /// Hamiltonian-value tolerance, scaled with the grid (0.05 at Δx=0.02).
    pub fn tol_h(&self) -> f64 {
        self.cfg.tol_h.unwrap_or(0.05 * self.dx() / 0.02)
    }

    pub fn sigma_max(&self) -> f64 {
        self.cfg.sigma_max.unwrap_or_else(|| default_sigma_max(self.dx()))
    }

    fn eta(&self) -> f64 {
        self.cfg.eta_cells * self.dx()
    }

    fn dirs(&self) -> usize {
        self.cfg
            .directions
            .unwrap_or_else(|| default_state_directions(self.field.grid.dim))
    }

    fn epi_dirs(&self) -> usize {
        self.cfg
            .epi_directions
            .unwrap_or_else(|| default_epi_directions(self.field.grid.dim))
    }

    fn cert_tol(&self) -> f64 {
        self.cfg
            .cert_tol
            .unwrap_or(3.0 * self.dx() + 10.0 * self.cfg.arc_dt)
    }

    /// Seeded point sampler: uniform over the region, snapped to nodes,
    /// filtered to finite values in the configured range, off the jump set
    /// and the target, at least η inside the grid. Returns accepted points
    /// with the raw-draw and excluded counts.
    pub fn sample_points(&self) -> (Vec<VecN>, usize, usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        let g = &self.field.grid;
        let eta = self.eta();
        let mut accepted: Vec<VecN> = Vec::new();
        let mut chosen_nodes: Vec<usize> = Vec::new();
        let mut raw = 0usize;
        let mut excluded = 0usize;
        let budget = self.cfg.points * 200;
        while accepted.len() < self.cfg.points && raw < budget {
            raw += 1;
            let mut u = [0.0f64; 3];
            for ui in u.iter_mut().take(g.dim) {
                *ui = rng.gen::<f64>();
            }
            let p = self.cfg.region.lerp(&u[..g.dim]);
            let idx = match g.nearest_node(&p) {
                Some(i) => i,
                None => {
                    excluded += 1;
                    continue;
                }
            };
            let flat = g.flat_index(&idx);
            let x = g.node_pos(&idx);
            let v = self.field.values[flat];
            let inside = (0..g.dim)
                .all(|i| x[i] - eta > g.lo[i] + 1e-12 && x[i] + eta < g.hi[i] - 1e-12);
            if !inside
                || !v.is_finite()
                || v < self.cfg.t_range[0]
                || v > self.cfg.t_range[1]
                || self.field.target_mask[flat]
                || self.field.near_jump(flat, self.cfg.jump_ratio_cap)
                || chosen_nodes.contains(&flat)
            {
                excluded += 1;
                continue;
            }
            chosen_nodes.push(flat);
            accepted.push(x);
        }
        (accepted, raw, excluded)
    }

    fn snap(&self, raw: &[Vec<f64>]) -> Vec<VecN> {
        raw.iter()
            .filter_map(|p| {
                self.field
                    .grid
                    .nearest_node(&VecN::from_slice(p))
                    .map(|i| self.field.grid.node_pos(&i))
            })
            .collect()
    }

    /// Local sublevel cloud `{T <= level}` near x.
    fn sublevel_cloud(&self, x: &VecN, level: f64, radius: f64) -> Vec<VecN> {
        self.field
            .nodes_near(x, radius)
            .into_iter()
            .filter(|(flat, _, _)| self.field.values[*flat] <= level)
            .map(|(_, _, p)| p)
            .collect()
    }

    fn sublevel_sigma(&self, x: &VecN, level: f64, u: &VecN, radius: f64) -> f64 {
        let mut sigma = 0.0f64;
        for y in self.sublevel_cloud(x, level, radius) {
            let d = y - *x;
            let dist_sq = d.norm_sq();
            if dist_sq < 1e-24 {
                continue;
            }
            let ratio = u.dot(&d) / dist_sq;
            if ratio > sigma {
                sigma = ratio;
            }
        }
        sigma
    }

    fn level_cone(&self, x: &VecN, level: f64) -> Result<ProximalCone> {
        let cloud = self.sublevel_cloud(x, level, self.eta());
        proximal_normals(
            &cloud,
            x,
            self.field.grid.dim,
            self.eta(),
            self.dirs(),
            self.sigma_max(),
            self.cfg.seed,
        )
    }

    fn target_cloud(&self, x: &VecN, radius: f64) -> Vec<VecN> {
        self.field
            .nodes_near(x, radius)
            .into_iter()
            .filter(|(flat, _, _)| self.field.target_mask[*flat])
            .map(|(_, _, p)| p)
            .collect()
    }

    fn h(&self, x: &VecN, zeta: &VecN) -> f64 {
        min_hamiltonian(self.dynamics, x, zeta).value
    }

    /// Pointwise characterization bundle at sampled off-target points plus
    /// target-boundary points.
    pub fn verify_pointwise(&self) -> Result<Vec<VerificationReport>> {
        let (points, raw, excluded) = self.sample_points();
        if points.is_empty() {
            return Err(Error::Config(
                "no admissible sample points in the configured region".into(),
            ));
        }
        let tol_h = self.tol_h();
        let sigma_max = self.sigma_max();
        let eta = self.eta();
        let mut r_sub_cone = VerificationReport::new("subdiff_in_level_cone", &self.scenario_id);
        let mut r_sub_h = VerificationReport::new("subdiff_h_value", &self.scenario_id);
        let mut r_back = VerificationReport::new("level_cone_to_subdiff", &self.scenario_id);
        let mut r_hsign = VerificationReport::new("level_cone_h_nonpositive", &self.scenario_id);
        let mut r_horiz = VerificationReport::new("horizontal_level_cone", &self.scenario_id);
        let mut r_decomp = VerificationReport::new("cone_decomposition", &self.scenario_id);
        r_sub_h.tolerance = tol_h;
        r_hsign.tolerance = tol_h;

        struct PointData {
            cone: ProximalCone,
            subs: Vec<VecN>,
            horiz: Vec<VecN>,
            lip: f64,
            subs_nonempty_expected: bool,
        }
        let data: Vec<(VecN, Result<PointData>)> = points
            .par_iter()
            .map(|x| {
                let level = self.field.eval(x).unwrap();
                let build = || -> Result<PointData> {
                    let cone = self.level_cone(x, level)?;
                    let subs = prox_subdiff(
                        self.field,
                        x,
                        eta,
                        self.cfg.c_max,
                        self.dirs(),
                        self.cfg.seed,
                    )?;
                    let horiz = horiz_subdiff(
                        self.field,
                        x,
                        eta,
                        sigma_max,
                        self.epi_dirs(),
                        self.cfg.seed,
                    )?;
                    let lip = self.field.lipschitz_estimate(x, eta);
                    Ok(PointData {
                        cone,
                        subs,
                        horiz,
                        lip,
                        subs_nonempty_expected: false,
                    })
                };
                (*x, build())
            })
            .collect();

        for (x, d) in &data {
            let d = match d {
                Ok(d) => d,
                Err(e) => return Err(Error::Config(format!("estimator failed at {x:?}: {e}"))),
            };
            let _ = d.subs_nonempty_expected;
            for report in [
                &mut r_sub_cone,
                &mut r_sub_h,
                &mut r_back,
                &mut r_hsign,
                &mut r_horiz,
                &mut r_decomp,
            ] {
                report.samples += 1;
                report.tested += 1;
            }
            let level = self.field.eval(x).unwrap();
            // Forward: accepted subgradients lie in the level cone with h = -1.
            for zeta in &d.subs {
                if let Some(u) = zeta.normalized(1e-12) {
                    let sreq = self.sublevel_sigma(x, level, &u, eta);
                    r_sub_cone.hit(((sreq - sigma_max) / sigma_max).max(0.0));
                }
                r_sub_h.hit((self.h(x, zeta) + 1.0).abs());
            }
            // Generator-side checks.
            let horiz_angle_tol =
                2.5 * crate::directions::angular_step(self.field.grid.dim + 1, self.epi_dirs());
            for g in &d.cone.generators {
                let hval = self.h(x, &g.dir);
                r_hsign.hit(hval);
                let mut branch_excess = f64::INFINITY;
                if hval < -tol_h {
                    // Rescale to the h = -1 slice and demand subgradient
                    // acceptance at the certificate-matched cap.
                    let zeta = g.dir * (-1.0 / hval);
                    let cap = sigma_max * (1.0 + zeta.norm_sq());
                    let creq = subgradient_required_c(self.field, x, &zeta, eta);
                    let excess = ((creq - cap) / cap).max(0.0);
                    r_back.hit(excess);
                    branch_excess = branch_excess.min(excess);
                }
                if hval.abs() <= tol_h {
                    // Must appear among the horizontal directions.
                    let best_angle = d
                        .horiz
                        .iter()
                        .map(|v| v.dot(&g.dir).clamp(-1.0, 1.0).acos())
                        .fold(f64::INFINITY, f64::min);
                    let excess = (best_angle - horiz_angle_tol).max(0.0);
                    r_horiz.hit(excess);
                    branch_excess = branch_excess.min(excess);
                }
                if hval > tol_h {
                    branch_excess = hval - tol_h;
                }
                r_decomp.hit(if branch_excess.is_finite() {
                    branch_excess
                } else {
                    0.0
                });
            }
            // Horizontal backward: every horizontal direction is a level-cone
            // direction with |h| below tolerance.
            for v in &d.horiz {
                let sreq = self.sublevel_sigma(x, level, v, eta);
                r_horiz.hit(((sreq - sigma_max * (1.0 + d.lip * d.lip)) / sigma_max).max(0.0));
                r_horiz.hit((self.h(x, v).abs() - tol_h).max(0.0));
            }
        }
        for r in [&mut r_sub_cone, &mut r_sub_h, &mut r_back, &mut r_hsign, &mut r_horiz, &mut r_decomp]
        {
            r.samples += excluded;
            r.excluded += excluded;
            let _ = raw;
        }

        let mut out = vec![
            r_sub_cone.finish(),
            r_sub_h.finish(),
            r_back.finish(),
            r_hsign.finish(),
            r_horiz.finish(),
            r_decomp.finish(),
        ];
        out.extend(self.verify_on_target()?);
        Ok(out)
    }

    /// On-target characterizations: at target boundary nodes the subgradients
    /// are the target-cone directions with `h >= -1`, horizontal ones those
    /// with `h >= 0`.
    fn verify_on_target(&self) -> Result<Vec<VerificationReport>> {
        let g = &self.field.grid;
        let eta = self.eta();
        let sigma_max = self.sigma_max();
        let tol_h = self.tol_h();
        // Target boundary nodes: masked with an unmasked axis neighbor.
        let mut boundary: Vec<VecN> = Vec::new();
        for flat in 0..g.node_count() {
            if !self.field.target_mask[flat] {
                continue;
            }
            let idx = g.multi_index(flat);
            let x = g.node_pos(&idx);
            let inside = (0..g.dim)
                .all(|i| x[i] - eta > g.lo[i] + 1e-12 && x[i] + eta < g.hi[i] - 1e-12);
            if !inside {
                continue;
            }
            let mut edge = false;
            for axis in 0..g.dim {
                for dir in [-1isize, 1] {
                    let ni = idx[axis] as isize + dir;
                    if ni >= 0 && (ni as usize) < g.nodes(axis) {
                        let mut nidx = idx;
                        nidx[axis] = ni as usize;
                        if !self.field.target_mask[g.flat_index(&nidx)] {
                            edge = true;
                        }
                    }
                }
            }
            if edge {
                boundary.push(x);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed ^ 0xdead_beef);
        let mut picks = Vec::new();
        while picks.len() < 5.min(boundary.len()) && !boundary.is_empty() {
            let k = rng.gen_range(0..boundary.len());
            picks.push(boundary.swap_remove(k));
        }
        let mut r_sub = VerificationReport::new("target_cone_subdiff", &self.scenario_id);
        let mut r_hor = VerificationReport::new("target_cone_horizontal", &self.scenario_id);
        for z in &picks {
            r_sub.samples += 1;
            r_hor.samples += 1;
            let cloud = self.target_cloud(z, eta);
            let cone = match proximal_normals(
                &cloud,
                z,
                g.dim,
                eta,
                self.dirs(),
                sigma_max,
                self.cfg.seed,
            ) {
                Ok(c) => c,
                Err(Error::InsufficientSampling { .. }) => {
                    r_sub.excluded += 1;
                    r_hor.excluded += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            r_sub.tested += 1;
            r_hor.tested += 1;
            let lip = self.field.lipschitz_estimate(z, eta);
            for gen in &cone.generators {
                let hval = self.h(z, &gen.dir);
                // Subgradient branch: scale into the admissible slice.
                let lambda = if hval < -tol_h {
                    0.9 / (-hval)
                } else {
                    1.0
                };
                if hval >= -1.0 + tol_h || lambda < 1.0 {
                    let zeta = gen.dir * lambda;
                    let cap = sigma_max * (1.0 + zeta.norm_sq());
                    let creq = subgradient_required_c(self.field, z, &zeta, eta);
                    r_sub.hit(((creq - cap) / cap).max(0.0));
                }
                // Horizontal branch: h >= 0 makes (dir, 0) an epigraph normal.
                if hval >= -tol_h {
                    let cap = sigma_max * (1.0 + lip * lip) * 2.0;
                    let sreq =
                        epi_pair_required_sigma(self.field, z, 0.0, &gen.dir, 0.0, eta);
                    r_hor.hit(((sreq - cap) / cap).max(0.0));
                }
            }
        }
        Ok(vec![r_sub.finish(), r_hor.finish()])
    }

    /// Correspondence between level-cone directions and epigraph normals,
    /// bidirectionally, plus the triviality equivalence.
    pub fn verify_epi_correspondence(&self) -> Result<Vec<VerificationReport>> {
        let (mut points, _raw, excluded) = self.sample_points();
        points.extend(self.snap(&self.cfg.corner_points));
        if points.is_empty() {
            return Err(Error::Config("no points for the correspondence check".into()));
        }
        let eta = self.eta();
        let sigma_max = self.sigma_max();
        let tol_h = self.tol_h();
        let mut r_fwd = VerificationReport::new("level_to_epi_normal", &self.scenario_id);
        let mut r_back = VerificationReport::new("epi_normal_to_level", &self.scenario_id);
        let mut r_alpha = VerificationReport::new("epi_normal_h_equals_alpha", &self.scenario_id);
        let mut r_triv = VerificationReport::new("cone_triviality_equivalence", &self.scenario_id);
        r_alpha.tolerance = tol_h;
        for report in [&mut r_fwd, &mut r_back, &mut r_alpha, &mut r_triv] {
            report.excluded = excluded;
            report.samples = excluded;
        }
        for x in &points {
            for report in [&mut r_fwd, &mut r_back, &mut r_alpha, &mut r_triv] {
                report.samples += 1;
                report.tested += 1;
            }
            let level = self.field.eval(x)?;
            let lip = self.field.lipschitz_estimate(x, eta);
            let cone = self.level_cone(x, level)?;
            let sample = epi_normals_at(
                self.field,
                x,
                level,
                eta,
                self.epi_dirs(),
                sigma_max,
                self.cfg.seed,
            )?;
            // Forward: (u, h(x,u)) normalized passes the epigraph test at a
            // certificate-matched cap.
            let cap_fwd = sigma_max * (1.0 + lip * lip) * 2.0;
            for g in &cone.generators {
                let hval = self.h(x, &g.dir);
                let sreq = epi_pair_required_sigma(self.field, x, level, &g.dir, hval, eta);
                r_fwd.hit(((sreq - cap_fwd) / cap_fwd).max(0.0));
            }
            // Backward: ζ is a level-cone direction at the pair's own σ
            // scaled by (1 + Lip^2) — an exact discrete implication — and
            // h(x,ζ) matches α after unit normalization.
            let back_radius = eta / (1.0 + lip * lip).sqrt();
            for p in &sample.pairs {
                if let Some(u) = p.zeta.normalized(1e-9) {
                    let cap = p.sigma * (1.0 + lip * lip) + 1e-9;
                    let sreq = self.sublevel_sigma(x, level, &u, back_radius);
                    r_back.hit((sreq - cap).max(0.0) / sigma_max);
                }
                let pair_norm = (p.zeta.norm_sq() + p.alpha * p.alpha).sqrt();
                if pair_norm > 1e-9 {
                    r_alpha.hit((self.h(x, &p.zeta) - p.alpha).abs() / pair_norm);
                }
            }
            // Triviality: both empty or both nonempty.
            let cone_empty = cone.generators.is_empty();
            let epi_empty = sample.pairs.is_empty();
            r_triv.hit(if cone_empty == epi_empty { 0.0 } else { 1.0 });
        }
        Ok(vec![
            r_fwd.finish(),
            r_back.finish(),
            r_alpha.finish(),
            r_triv.finish(),
        ])
    }

    /// Dimension equality between the level cone and the epigraph cone, with
    /// interior points (level boosted above the graph) as the empty case.
    pub fn verify_dimension(&self) -> Result<VerificationReport> {
        let (mut points, _raw, excluded) = self.sample_points();
        points.extend(self.snap(&self.cfg.corner_points));
        let mut report = VerificationReport::new("cone_dimension_equality", &self.scenario_id);
        report.excluded = excluded;
        report.samples = excluded;
        let eta = self.eta();
        let sigma_max = self.sigma_max();
        let mut hull_flags = 0usize;
        let mut pairs_checked: Vec<(usize, usize)> = Vec::new();
        let mut eval_point = |x: &VecN, level: f64| -> Result<(usize, usize)> {
            let cone = self.level_cone(x, level)?;
            let dirs: Vec<VecN> = cone.generators.iter().map(|g| g.dir).collect();
            if positive_hull_flag(&dirs) {
                hull_flags += 1;
            }
            let kappa = cone_dimension(&dirs, self.field.grid.dim);
            let sample = epi_normals_at(
                self.field,
                x,
                level,
                eta,
                self.epi_dirs(),
                sigma_max,
                self.cfg.seed,
            )?;
            let pair_vecs: Vec<VecN> = sample
                .pairs
                .iter()
                .map(|p| p.zeta.lift(self.field.grid.dim, p.alpha))
                .collect();
            let ell = cone_dimension(&pair_vecs, self.field.grid.dim + 1);
            Ok((kappa, ell))
        };
        for x in &points {
            report.samples += 1;
            report.tested += 1;
            let level = self.field.eval(x)?;
            let (kappa, ell) = eval_point(x, level)?;
            report.hit((kappa as f64 - ell as f64).abs());
            pairs_checked.push((kappa, ell));
        }
        // Interior probes: lift the level above the graph so both cones are
        // empty.
        for x in self.snap(&self.cfg.interior_points) {
            report.samples += 1;
            report.tested += 1;
            let level = self.field.eval(&x)? + 10.0 * self.dx();
            let (kappa, ell) = eval_point(&x, level)?;
            report.hit((kappa as f64).max(ell as f64));
            pairs_checked.push((kappa, ell));
        }
        report.details = serde_json::json!({
            "dimension_pairs": pairs_checked,
            "positive_hull_flags": hull_flags,
        });
        Ok(report.finish())
    }

    /// Builds candidate optimal arcs by backward synthesis from target
    /// boundary normals until `cfg.arcs` arcs certify against the field.
    pub fn synthesize_arcs(&self) -> Result<Vec<HamiltonianArc>> {
        let dirs = crate::directions::unit_directions(
            self.field.grid.dim,
            (self.cfg.arcs * 4).max(16),
            self.cfg.seed,
        );
        let mut certified = Vec::new();
        let mut rejected = 0usize;
        for d in &dirs {
            if certified.len() >= self.cfg.arcs {
                break;
            }
            let z = self.target.bodies[0].support(d).point;
            let arc = match synthesize_from_target(
                self.dynamics,
                self.target,
                &z,
                d,
                self.cfg.arc_horizon,
                self.cfg.arc_dt,
                Some(self.field),
                self.cert_tol(),
            ) {
                Ok(a) => a,
                Err(Error::DegenerateCostate) | Err(Error::CostateCollapse { .. }) => {
                    rejected += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            match arc.certificate {
                Some(c) if c.certified => certified.push(arc),
                _ => rejected += 1,
            }
        }
        if certified.is_empty() {
            return Err(Error::Config(format!(
                "no synthesized arc certified against the field ({rejected} rejected)"
            )));
        }
        Ok(certified)
    }

    /// Propagation along certified arcs: Hamiltonian constancy, level-cone
    /// and epigraph-normal membership of the running costate, and the
    /// subgradient/horizontal specializations picked by the initial
    /// Hamiltonian value.
    pub fn verify_propagation(&self, arcs: &[HamiltonianArc]) -> Result<Vec<VerificationReport>> {
        let mut r_const = VerificationReport::new("hamiltonian_constancy", &self.scenario_id);
        r_const.tolerance = self.cfg.constancy_tol;
        let mut r_level = VerificationReport::new("level_normal_propagation", &self.scenario_id);
        let mut r_epi = VerificationReport::new("epi_normal_propagation", &self.scenario_id);
        let mut r_sub = VerificationReport::new("subdiff_propagation", &self.scenario_id);
        let mut r_hor = VerificationReport::new("horizontal_propagation", &self.scenario_id);
        let eta = self.eta();
        let sigma_max = self.sigma_max();
        let tol_h = self.tol_h();
        let mut used = 0usize;
        for arc in arcs {
            match arc.certificate {
                Some(c) if c.certified => {}
                // Non-certified arcs are rejected, not silently scored.
                _ => {
                    for r in [&mut r_const, &mut r_level, &mut r_epi, &mut r_sub, &mut r_hor] {
                        r.samples += 1;
                        r.excluded += 1;
                    }
                    continue;
                }
            }
            used += 1;
            for r in [&mut r_const, &mut r_level, &mut r_epi, &mut r_sub, &mut r_hor] {
                r.samples += 1;
                r.tested += 1;
            }
            r_const.hit(hamiltonian_constancy(arc, self.dynamics));
            let n = arc.len();
            let h0 = self.h(&arc.states[0], &-arc.costates[0]);
            let p0n = arc.costates[0].norm().max(1e-12);
            let interior: Vec<usize> = (1..=6)
                .map(|k| (n - 1) * (2 * k + 1) / 14)
                .filter(|&k| k > 0 && k < n - 1)
                .collect();
            for &k in &interior {
                let x = arc.states[k];
                let p = arc.costates[k];
                let level = match self.field.eval(&x) {
                    Ok(v) if v.is_finite() => v,
                    _ => continue,
                };
                let lip = self.field.lipschitz_estimate(&x, eta);
                let u = match (-p).normalized(1e-12) {
                    Some(u) => u,
                    None => continue,
                };
                // Level-cone membership of -p(t).
                let cap_level = 2.0 * sigma_max;
                let sreq = self.sublevel_sigma(&x, level, &u, eta);
                r_level.hit(((sreq - cap_level) / sigma_max).max(0.0));
                // Epigraph membership of (-p(t), h(x, -p(t))) normalized.
                let hval = self.h(&x, &-p);
                let cap_epi = 2.0 * sigma_max * (1.0 + lip * lip);
                let epireq =
                    epi_pair_required_sigma(self.field, &x, level, &-p, hval, eta);
                r_epi.hit(((epireq - cap_epi) / sigma_max).max(0.0));
                // Specializations by the conserved initial value.
                if (h0 / p0n + 1.0).abs() <= tol_h {
                    let zeta = -p * (1.0 / p.norm().max(1e-12)) * (p0n / 1.0);
                    let scaled = zeta * (1.0 / (-self.h(&x, &zeta)).max(1e-9));
                    let cap = sigma_max * (1.0 + scaled.norm_sq());
                    let creq = subgradient_required_c(self.field, &x, &scaled, eta);
                    r_sub.hit(((creq - cap) / cap).max(0.0));
                }
                if (h0 / p0n).abs() <= tol_h {
                    let cap = 2.0 * sigma_max * (1.0 + lip * lip);
                    let sreq = epi_pair_required_sigma(self.field, &x, level, &u, 0.0, eta);
                    r_hor.hit(((sreq - cap) / sigma_max).max(0.0));
                }
            }
        }
        if used == 0 {
            return Err(Error::Config("propagation requires certified arcs".into()));
        }
        Ok(vec![
            r_const.finish(),
            r_level.finish(),
            r_epi.finish(),
            r_sub.finish(),
            r_hor.finish(),
        ])
    }

    /// Regularity probes: sublevel convexity over the level grid, refined
    /// sublevel phi-convexity constants, and the epigraph phi constant.
    pub fn verify_regularity(&self) -> Result<Vec<VerificationReport>> {
        let dx = self.dx();
        let mut r_conv = VerificationReport::new("sublevel_convexity", &self.scenario_id);
        let mut r_phi = VerificationReport::new("sublevel_phi_convexity", &self.scenario_id);
        let mut r_epic = VerificationReport::new("epi_phi_convexity", &self.scenario_id);
        let mut convex_results: Vec<(f64, bool, f64)> = Vec::new();
        let mut tau_est: f64 = 0.0;
        let mut prefix_ok = true;
        for &t in &self.cfg.t_grid {
            let rep = check_sublevel_convexity(self.field, t, self.cfg.convexity_pairs, self.cfg.seed);
            convex_results.push((t, rep.pass, rep.worst_violation));
            if rep.pass && prefix_ok {
                tau_est = t;
            } else {
                prefix_ok = false;
            }
            r_conv.samples += 1;
            r_conv.tested += 1;
            if let Some(expect) = self.cfg.expect_convex_up_to {
                if t <= expect + 1e-12 && !rep.pass {
                    r_conv.hit(rep.worst_violation.max(1e-300));
                }
            }
        }
        r_conv.details = serde_json::json!({
            "levels": convex_results,
            "largest_convex_prefix": tau_est,
            "enforced_up_to": self.cfg.expect_convex_up_to,
        });

        // Sublevel phi constants on sub-pixel boundary clouds.
        let mut phi_worst = 0.0f64;
        for &t in &self.cfg.t_grid {
            let crossings = self.field.level_crossings(t, self.cfg.min_separation);
            let sub = self.field.sublevel_points(t);
            let mut cloud = sub.points.clone();
            cloud.extend(crossings.iter().copied());
            let mut cones = Vec::new();
            for base in crossings.iter().take(24) {
                let inside = (0..self.field.grid.dim).all(|i| {
                    base[i] - self.eta() > self.field.grid.lo[i]
                        && base[i] + self.eta() < self.field.grid.hi[i]
                });
                if !inside {
                    continue;
                }
                match proximal_normals(
                    &cloud,
                    base,
                    self.field.grid.dim,
                    self.eta(),
                    self.dirs(),
                    self.sigma_max(),
                    self.cfg.seed,
                ) {
                    Ok(cone) => {
                        cones.push(refine_cone_for_phi(&cone, &cloud, self.field.grid.dim))
                    }
                    Err(Error::InsufficientSampling { .. }) => continue,
                    Err(e) => return Err(e),
                }
            }
            r_phi.samples += 1;
            if cones.is_empty() {
                r_phi.excluded += 1;
                continue;
            }
            r_phi.tested += 1;
            phi_worst = phi_worst.max(phi_convexity_constant(&cloud, &cones));
        }
        r_phi.worst_violation = phi_worst;
        r_phi.tolerance = self.cfg.phi0_tol.unwrap_or(f64::INFINITY);
        r_phi.details = serde_json::json!({ "phi_estimate": phi_worst });

        // Epigraph phi constant over sampled region points.
        let (points, _, excluded) = self.sample_points();
        r_epic.samples = points.len() + excluded;
        r_epic.excluded = excluded;
        r_epic.tested = points.len();
        let c_est = crate::nonsmooth::epi_phi_convexity(
            self.field,
            &points,
            &points,
            self.eta(),
            self.sigma_max(),
            self.epi_dirs(),
            self.cfg.min_separation.max(3.0 * dx),
            self.cfg.seed,
        )?;
        r_epic.worst_violation = c_est;
        r_epic.tolerance = self.cfg.epi_c_tol.unwrap_or(f64::INFINITY);
        r_epic.details = serde_json::json!({ "epi_phi_estimate": c_est });

        Ok(vec![r_conv.finish(), r_phi.finish(), r_epic.finish()])
    }

    /// Assumption certificates against the declared constants.
    pub fn verify_certificates(&self) -> Result<Vec<VerificationReport>> {
        let cbox = self
            .cfg
            .cert_box
            .unwrap_or_else(|| self.field.grid.bounds().shrink(0.0));
        let slack = self.cfg.cert_slack;
        let pairs = self.cfg.cert_pairs;
        let dirs = 180;
        let mut out = Vec::new();
        let decl = &self.dynamics.constants;

        let l_est = crate::dynamics::certify_lipschitz(self.dynamics, &cbox, pairs, dirs, self.cfg.seed);
        let mut r = VerificationReport::new("assumption_lipschitz", &self.scenario_id);
        r.samples = pairs;
        r.tested = pairs;
        r.worst_violation = l_est;
        r.tolerance = decl.lipschitz * (1.0 + slack) + 1e-9;
        r.details = serde_json::json!({ "estimate": l_est, "declared": decl.lipschitz });
        out.push(r.finish());

        let g_est = crate::dynamics::certify_growth(self.dynamics, &cbox, pairs * 2, self.cfg.seed);
        let mut r = VerificationReport::new("assumption_growth", &self.scenario_id);
        r.samples = pairs * 2;
        r.tested = pairs * 2;
        r.worst_violation = g_est;
        r.tolerance = decl.growth * (1.0 + slack) + 1e-9;
        r.details = serde_json::json!({ "estimate": g_est, "declared": decl.growth });
        out.push(r.finish());

        let cl_est =
            crate::dynamics::certify_class_l(self.dynamics, &cbox, pairs, 5, dirs, self.cfg.seed)?;
        let mut r = VerificationReport::new("class_l_constant", &self.scenario_id);
        r.samples = pairs;
        r.tested = pairs;
        r.worst_violation = cl_est;
        // Affine dynamics must certify an exactly vanishing constant; the
        // estimate is informational otherwise.
        let affine = matches!(
            self.dynamics.form,
            crate::dynamics::DynamicsForm::LinearDrift { .. }
        ) || self.dynamics.is_autonomous_constant();
        r.tolerance = if affine { 1e-9 } else { f64::INFINITY };
        r.details = serde_json::json!({ "estimate": cl_est, "affine": affine });
        out.push(r.finish());

        if let Some(c_decl) = decl.semiconvexity {
            let c_est = crate::dynamics::certify_h_semiconvexity(
                self.dynamics,
                &VecN::basis(0),
                &cbox,
                pairs,
                &[0.05, 0.1, 0.2, 0.4],
                self.cfg.seed,
            )?;
            let mut r = VerificationReport::new("assumption_semiconvexity", &self.scenario_id);
            r.samples = pairs;
            r.tested = pairs;
            r.worst_violation = c_est;
            r.tolerance = c_decl * (1.0 + slack) + 1e-9;
            r.details = serde_json::json!({ "estimate": c_est, "declared": c_decl });
            out.push(r.finish());
        }
        if let Some(k_decl) = decl.support_lipschitz {
            let k_est = crate::dynamics::certify_support_lipschitz(
                self.dynamics,
                &cbox,
                pairs,
                dirs,
                self.cfg.seed,
            );
            let mut r = VerificationReport::new("assumption_support_lipschitz", &self.scenario_id);
            r.samples = pairs;
            r.tested = pairs;
            r.worst_violation = k_est;
            r.tolerance = k_decl * (1.0 + slack) + 1e-9;
            r.details = serde_json::json!({ "estimate": k_est, "declared": k_decl });
            out.push(r.finish());
        }
        Ok(out)
    }

    /// Runs every configured check and returns the merged reports.
    pub fn run_all(&self) -> Result<Vec<VerificationReport>> {
        let mut out = Vec::new();
        for check in &self.cfg.checks {
            match check {
                CheckKind::Pointwise => out.extend(self.verify_pointwise()?),
                CheckKind::EpiCorrespondence => out.extend(self.verify_epi_correspondence()?),
                CheckKind::Dimension => out.push(self.verify_dimension()?),
                CheckKind::Propagation => {
                    let arcs = self.synthesize_arcs()?;
                    out.extend(self.verify_propagation(&arcs)?);
                }
                CheckKind::Regularity => out.extend(self.verify_regularity()?),
                CheckKind::Certificates => out.extend(self.verify_certificates()?),
            }
        }
        Ok(out)
    }
}
