//! Scenario registry: dynamics + target + grid + verification configuration.
//!
//! Scenarios are plain JSON documents; the built-ins cover an isotropic
//! eikonal problem, box velocities, the double integrator, a linear
//! rotation with ball control, a nonlinear affine-control system, a
//! degenerate-controllability profile with square-root growth, and a
//! state-dependent quadratic radius. Overrides use dotted-path keys into
//! the JSON tree, so one parser serves files and command-line edits.

use crate::convexset::ConvexBody;
use crate::dynamics::{DeclaredConstants, DynamicsForm, Multifunction};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{GridSpec, TargetSet, ValueField};
use crate::hjb::{solve_min_time, SolveParams};
use crate::space::BoundsBox;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Pointwise,
    EpiCorrespondence,
    Dimension,
    Propagation,
    Regularity,
    Certificates,
}

fn d_points() -> usize {
    20
}
fn d_arcs() -> usize {
    10
}
fn d_arc_horizon() -> f64 {
    1.0
}
fn d_arc_dt() -> f64 {
    1e-3
}
fn d_c_max() -> f64 {
    2.0
}
fn d_eta_cells() -> f64 {
    4.0
}
fn d_t_range() -> [f64; 2] {
    [0.0, f64::INFINITY]
}
fn d_jump() -> f64 {
    10.0
}
fn d_constancy() -> f64 {
    1e-6
}
fn d_minsep() -> f64 {
    0.06
}
fn d_cert_slack() -> f64 {
    0.15
}
fn d_pairs() -> usize {
    48
}
fn d_conv_pairs() -> usize {
    300
}

/// Verification knobs. Optional tolerances default to grid-scaled formulas;
/// every value used lands verbatim in the emitted reports.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct VerifyConfig {
    pub seed: u64,
    #[serde(default = "d_points")]
    pub points: usize,
    /// Explicit extra evaluation points (e.g. sublevel-corner nodes).
    #[serde(default)]
    pub corner_points: Vec<Vec<f64>>,
    #[serde(default)]
    pub interior_points: Vec<Vec<f64>>,
    #[serde(default = "d_arcs")]
    pub arcs: usize,
    #[serde(default = "d_arc_horizon")]
    pub arc_horizon: f64,
    #[serde(default = "d_arc_dt")]
    pub arc_dt: f64,
    /// Hamiltonian-value tolerance; default 0.05 scaled by Δx / 0.02.
    #[serde(default)]
    pub tol_h: Option<f64>,
    /// Proximal acceptance cap; default 1/(4 Δx).
    #[serde(default)]
    pub sigma_max: Option<f64>,
    #[serde(default = "d_c_max")]
    pub c_max: f64,
    #[serde(default = "d_eta_cells")]
    pub eta_cells: f64,
    pub region: BoundsBox,
    #[serde(default = "d_t_range")]
    pub t_range: [f64; 2],
    #[serde(default)]
    pub t_grid: Vec<f64>,
    #[serde(default = "d_jump")]
    pub jump_ratio_cap: f64,
    /// Arc certification tolerance; default 3 Δx + 10 dt.
    #[serde(default)]
    pub cert_tol: Option<f64>,
    #[serde(default)]
    pub checks: Vec<CheckKind>,
    #[serde(default = "d_constancy")]
    pub constancy_tol: f64,
    /// When set, sublevel convexity must hold for every tested t up to this.
    #[serde(default)]
    pub expect_convex_up_to: Option<f64>,
    /// When set, the refined sublevel phi estimate must stay below this.
    #[serde(default)]
    pub phi0_tol: Option<f64>,
    /// When set, the epigraph phi-convexity estimate must stay below this.
    #[serde(default)]
    pub epi_c_tol: Option<f64>,
    #[serde(default = "d_minsep")]
    pub min_separation: f64,
    #[serde(default)]
    pub directions: Option<usize>,
    #[serde(default)]
    pub epi_directions: Option<usize>,
    /// Box for assumption certificates; defaults to the grid box.
    #[serde(default)]
    pub cert_box: Option<BoundsBox>,
    #[serde(default = "d_cert_slack")]
    pub cert_slack: f64,
    #[serde(default = "d_pairs")]
    pub cert_pairs: usize,
    #[serde(default = "d_conv_pairs")]
    pub convexity_pairs: usize,
}

impl VerifyConfig {
    pub fn minimal(seed: u64, region: BoundsBox) -> Self {
        VerifyConfig {
            seed,
            points: d_points(),
            corner_points: Vec::new(),
            interior_points: Vec::new(),
            arcs: d_arcs(),
            arc_horizon: d_arc_horizon(),
            arc_dt: d_arc_dt(),
            tol_h: None,
            sigma_max: None,
            c_max: d_c_max(),
            eta_cells: d_eta_cells(),
            region,
            t_range: d_t_range(),
            t_grid: Vec::new(),
            jump_ratio_cap: d_jump(),
            cert_tol: None,
            checks: Vec::new(),
            constancy_tol: d_constancy(),
            expect_convex_up_to: None,
            phi0_tol: None,
            epi_c_tol: None,
            min_separation: d_minsep(),
            directions: None,
            epi_directions: None,
            cert_box: None,
            cert_slack: d_cert_slack(),
            cert_pairs: d_pairs(),
            convexity_pairs: d_conv_pairs(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub description: String,
    pub dynamics: Multifunction,
    pub target: TargetSet,
    pub grid: GridSpec,
    #[serde(default)]
    pub solve: SolveParams,
    pub verify: VerifyConfig,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.dynamics.validate()?;
        self.target.validate(self.grid.dim)?;
        if self.dynamics.dim != self.grid.dim {
            return Err(Error::Config("dynamics and grid dimension differ".into()));
        }
        // The CFL condition must be satisfiable by some tau.
        let bound = crate::hjb::cfl_bound(&self.dynamics, &self.grid);
        if !(bound > 0.0) {
            return Err(Error::Config("CFL bound is degenerate".into()));
        }
        if let Some(tau) = self.solve.tau {
            if !(tau > 0.0 && tau <= bound * (1.0 + 1e-12)) {
                return Err(Error::CflViolation { tau, bound });
            }
        }
        Ok(())
    }

    pub fn solve_field(&self) -> Result<ValueField> {
        solve_min_time(&self.dynamics, &self.target, &self.grid, &self.solve)
    }

    pub fn from_json(text: &str) -> Result<Scenario> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Applies dotted-path overrides (`verify.seed=7`, `solve.vel_samples=16`)
    /// through the JSON tree and re-validates.
    pub fn with_overrides(&self, overrides: &[(String, String)]) -> Result<Scenario> {
        let mut value = serde_json::to_value(self)?;
        for (path, raw) in overrides {
            let new_leaf: serde_json::Value = match serde_json::from_str(raw) {
                Ok(v) => v,
                Err(_) => serde_json::Value::String(raw.clone()),
            };
            let mut cursor = &mut value;
            let parts: Vec<&str> = path.split('.').collect();
            for (i, part) in parts.iter().enumerate() {
                if i + 1 == parts.len() {
                    match cursor {
                        serde_json::Value::Object(map) => {
                            map.insert(part.to_string(), new_leaf.clone());
                        }
                        serde_json::Value::Array(arr) => {
                            let idx: usize = part.parse().map_err(|_| {
                                Error::Config(format!("bad array index '{part}' in '{path}'"))
                            })?;
                            if idx >= arr.len() {
                                return Err(Error::Config(format!(
                                    "index {idx} out of range in '{path}'"
                                )));
                            }
                            arr[idx] = new_leaf.clone();
                        }
                        _ => {
                            return Err(Error::Config(format!(
                                "cannot set '{path}': parent is a scalar"
                            )))
                        }
                    }
                } else {
                    cursor = match cursor {
                        serde_json::Value::Object(map) => {
                            map.entry(part.to_string()).or_insert(serde_json::json!({}))
                        }
                        serde_json::Value::Array(arr) => {
                            let idx: usize = part.parse().map_err(|_| {
                                Error::Config(format!("bad array index '{part}' in '{path}'"))
                            })?;
                            arr.get_mut(idx).ok_or_else(|| {
                                Error::Config(format!("index {idx} out of range in '{path}'"))
                            })?
                        }
                        _ => {
                            return Err(Error::Config(format!(
                                "cannot descend into '{path}': hit a scalar"
                            )))
                        }
                    };
                }
            }
        }
        let s: Scenario = serde_json::from_value(value)?;
        s.validate()?;
        Ok(s)
    }
}

fn all_checks() -> Vec<CheckKind> {
    vec![
        CheckKind::Pointwise,
        CheckKind::EpiCorrespondence,
        CheckKind::Dimension,
        CheckKind::Propagation,
        CheckKind::Regularity,
        CheckKind::Certificates,
    ]
}

fn eikonal() -> Scenario {
    let grid = GridSpec::new(2, &[-2.0, -2.0], &[2.0, 2.0], &[200, 200]).unwrap();
    let mut verify = VerifyConfig::minimal(42, BoundsBox::new(2, &[-1.7, -1.7], &[1.7, 1.7]));
    verify.t_range = [0.5, 1.5];
    verify.t_grid = vec![0.5, 0.9, 1.3];
    verify.checks = all_checks();
    verify.expect_convex_up_to = Some(1.3);
    verify.arc_horizon = 1.2;
    verify.constancy_tol = 1e-12;
    verify.interior_points = vec![vec![0.05, 0.05], vec![-0.05, 0.0], vec![0.0, 0.08]];
    Scenario {
        id: "eikonal".into(),
        description: "unit-ball velocities, ball target: T is the distance function".into(),
        dynamics: Multifunction::isotropic(
            2,
            "1",
            DeclaredConstants {
                lipschitz: 1e-9,
                growth: 1.0,
                semiconvexity: Some(0.0),
                support_lipschitz: Some(0.0),
            },
        )
        .unwrap(),
        target: TargetSet::single(ConvexBody::ball(&[0.0, 0.0], 0.25), 1e-9),
        grid,
        solve: SolveParams::default(),
        verify,
    }
}

fn square() -> Scenario {
    let grid = GridSpec::new(2, &[-2.0, -2.0], &[2.0, 2.0], &[200, 200]).unwrap();
    let dx = grid.max_spacing();
    let mut verify = VerifyConfig::minimal(42, BoundsBox::new(2, &[-1.5, -1.5], &[1.5, 1.5]));
    verify.t_range = [0.4, 1.4];
    verify.t_grid = vec![0.5, 0.9];
    verify.checks = vec![
        CheckKind::Pointwise,
        CheckKind::EpiCorrespondence,
        CheckKind::Dimension,
        CheckKind::Regularity,
        CheckKind::Certificates,
    ];
    verify.expect_convex_up_to = Some(0.9);
    verify.corner_points = vec![
        vec![0.5, 0.5],
        vec![0.7, 0.7],
        vec![0.9, 0.9],
        vec![1.1, 1.1],
        vec![-0.7, 0.7],
    ];
    verify.interior_points = vec![vec![0.0, 0.05], vec![0.08, 0.0]];
    Scenario {
        id: "square".into(),
        description: "box velocities, point-like target: T is the max norm".into(),
        dynamics: Multifunction::linear_drift(
            crate::space::MatN::zeros(),
            2,
            ConvexBody::unit_square(),
            DeclaredConstants {
                lipschitz: 1e-9,
                growth: std::f64::consts::SQRT_2,
                semiconvexity: Some(0.0),
                support_lipschitz: Some(0.0),
            },
        ),
        target: TargetSet::single(ConvexBody::ball(&[0.0, 0.0], dx), 1e-9),
        grid,
        solve: SolveParams::default(),
        verify,
    }
}

fn double_integrator() -> Scenario {
    let grid = GridSpec::new(2, &[-2.0, -2.0], &[2.0, 2.0], &[160, 160]).unwrap();
    let dx = grid.max_spacing();
    let mut verify = VerifyConfig::minimal(42, BoundsBox::new(2, &[-1.4, -1.4], &[1.4, 1.4]));
    verify.t_range = [0.3, 1.6];
    verify.t_grid = vec![0.5, 1.0, 2.0];
    verify.checks = vec![
        CheckKind::Pointwise,
        CheckKind::EpiCorrespondence,
        CheckKind::Dimension,
        CheckKind::Propagation,
        CheckKind::Regularity,
        CheckKind::Certificates,
    ];
    verify.constancy_tol = 1e-3;
    verify.arc_horizon = 1.2;
    verify.c_max = 4.0;
    Scenario {
        id: "double-integrator".into(),
        description: "velocity/acceleration chain with bang-bang control".into(),
        dynamics: Multifunction {
            dim: 2,
            form: DynamicsForm::AffineControl {
                f_expr: vec![Expr::parse("x2").unwrap(), Expr::parse("0").unwrap()],
                g_expr: vec![vec![Expr::parse("0").unwrap()], vec![Expr::parse("1").unwrap()]],
                u: ConvexBody::interval(-1.0, 1.0),
            },
            constants: DeclaredConstants {
                lipschitz: 1.0,
                growth: 1.0,
                semiconvexity: Some(0.0),
                support_lipschitz: None,
            },
        },
        target: TargetSet::single(ConvexBody::ball(&[0.0, 0.0], 2.0 * dx), 1e-9),
        grid,
        solve: SolveParams::default(),
        verify,
    }
}

fn linear_rotation() -> Scenario {
    let grid = GridSpec::new(2, &[-2.0, -2.0], &[2.0, 2.0], &[200, 200]).unwrap();
    let mut verify = VerifyConfig::minimal(42, BoundsBox::new(2, &[-1.5, -1.5], &[1.5, 1.5]));
    verify.t_range = [0.3, 1.2];
    verify.t_grid = (1..=10).map(|k| k as f64 / 10.0).collect();
    verify.checks = all_checks();
    verify.expect_convex_up_to = Some(1.0);
    verify.constancy_tol = 1e-6;
    verify.arc_horizon = 1.0;
    Scenario {
        id: "linear-rotation".into(),
        description: "quarter-turn drift with ball control and convex target".into(),
        dynamics: Multifunction::linear_drift(
            crate::space::MatN::rotation2(std::f64::consts::FRAC_PI_2),
            2,
            ConvexBody::ball(&[0.0, 0.0], 1.0),
            DeclaredConstants {
                lipschitz: 1.0,
                growth: 1.0,
                semiconvexity: Some(0.0),
                support_lipschitz: Some(1.0),
            },
        ),
        target: TargetSet::single(ConvexBody::ball(&[0.0, 0.0], 0.3), 1e-9),
        grid,
        solve: SolveParams::default(),
        verify,
    }
}

fn affine_2d() -> Scenario {
    let grid = GridSpec::new(2, &[-2.0, -2.0], &[2.0, 2.0], &[160, 160]).unwrap();
    let dx = grid.max_spacing();
    let mut verify = VerifyConfig::minimal(42, BoundsBox::new(2, &[-1.2, -1.2], &[1.2, 1.2]));
    verify.t_range = [0.3, 1.4];
    verify.t_grid = vec![0.4, 0.8];
    verify.checks = vec![
        CheckKind::Pointwise,
        CheckKind::EpiCorrespondence,
        CheckKind::Dimension,
        CheckKind::Propagation,
        CheckKind::Certificates,
    ];
    verify.constancy_tol = 1e-3;
    verify.arc_horizon = 1.0;
    verify.c_max = 4.0;
    Scenario {
        id: "affine-2d".into(),
        description: "nonlinear planar affine-control system, point-like target".into(),
        dynamics: Multifunction {
            dim: 2,
            form: DynamicsForm::AffineControl {
                f_expr: vec![
                    Expr::parse("x2").unwrap(),
                    Expr::parse("-0.3 * x1 * x1").unwrap(),
                ],
                g_expr: vec![vec![Expr::parse("0").unwrap()], vec![Expr::parse("1").unwrap()]],
                u: ConvexBody::interval(-1.0, 1.0),
            },
            constants: DeclaredConstants {
                lipschitz: 1.6,
                growth: 1.4,
                semiconvexity: Some(0.7),
                support_lipschitz: None,
            },
        },
        target: TargetSet::single(ConvexBody::ball(&[0.0, 0.0], 2.0 * dx), 1e-9),
        grid,
        solve: SolveParams::default(),
        verify,
    }
}

fn non_petrov() -> Scenario {
    let grid = GridSpec::new(2, &[-2.0, -2.0], &[2.0, 2.0], &[200, 200]).unwrap();
    let mut verify = VerifyConfig::minimal(42, BoundsBox::new(2, &[0.2, -1.4], &[1.5, 1.4]));
    verify.t_range = [0.6, 2.4];
    verify.checks = vec![
        CheckKind::Pointwise,
        CheckKind::EpiCorrespondence,
        CheckKind::Dimension,
    ];
    // Certificates are excluded: the radius field is not Lipschitz at the
    // target edge, which is the point of the scenario.
    verify.corner_points = vec![vec![0.0, 0.0], vec![0.0, 0.5], vec![0.0, -0.5]];
    Scenario {
        id: "non-petrov".into(),
        description: "speed vanishing like sqrt(|x1|): square-root growth of T at the target"
            .into(),
        dynamics: Multifunction::isotropic(
            2,
            "pow(abs(x1), 0.5)",
            DeclaredConstants {
                lipschitz: 1.2,
                growth: 1.0,
                semiconvexity: None,
                support_lipschitz: None,
            },
        )
        .unwrap(),
        target: TargetSet::single(
            ConvexBody::polytope(&[&[0.0, -2.0], &[0.0, 2.0]]),
            1e-9,
        ),
        grid,
        solve: SolveParams::default(),
        verify,
    }
}

fn quadratic_radius() -> Scenario {
    let grid = GridSpec::new(2, &[-2.0, -2.0], &[2.0, 2.0], &[200, 200]).unwrap();
    let mut verify = VerifyConfig::minimal(42, BoundsBox::new(2, &[-1.4, -1.4], &[1.4, 1.4]));
    verify.t_range = [0.2, 1.0];
    verify.checks = vec![
        CheckKind::Pointwise,
        CheckKind::EpiCorrespondence,
        CheckKind::Dimension,
        CheckKind::Certificates,
    ];
    verify.cert_box = Some(BoundsBox::new(2, &[-1.5, -1.5], &[1.5, 1.5]));
    Scenario {
        id: "quadratic-radius".into(),
        description: "ball velocities with state-dependent quadratic radius (class-L positive)"
            .into(),
        dynamics: Multifunction::isotropic(
            2,
            "1 + min(x1*x1 + x2*x2, 1)",
            DeclaredConstants {
                lipschitz: 2.0,
                growth: 2.0,
                semiconvexity: None,
                support_lipschitz: Some(2.0),
            },
        )
        .unwrap(),
        target: TargetSet::single(ConvexBody::ball(&[0.0, 0.0], 0.25), 1e-9),
        grid,
        solve: SolveParams::default(),
        verify,
    }
}

/// The built-in scenario table, in registry order.
pub fn builtin_scenarios() -> Vec<Scenario> {
    vec![
        eikonal(),
        square(),
        double_integrator(),
        linear_rotation(),
        affine_2d(),
        non_petrov(),
        quadratic_radius(),
    ]
}

/// Resolves a scenario by registry id or by path to a JSON file.
pub fn resolve_scenario(name_or_path: &str) -> Result<Scenario> {
    for s in builtin_scenarios() {
        if s.id == name_or_path {
            return Ok(s);
        }
    }
    let path = std::path::Path::new(name_or_path);
    if path.exists() {
        let text = std::fs::read_to_string(path)?;
        return Scenario::from_json(&text);
    }
    Err(Error::UnknownScenario(name_or_path.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate() {
        let list = builtin_scenarios();
        assert_eq!(list.len(), 7);
        for s in &list {
            s.validate().unwrap_or_else(|e| panic!("{} invalid: {e}", s.id));
        }
        let ids: Vec<&str> = list.iter().map(|s| s.id.as_str()).collect();
        for expected in [
            "eikonal",
            "square",
            "double-integrator",
            "linear-rotation",
            "affine-2d",
            "non-petrov",
            "quadratic-radius",
        ] {
            assert!(ids.contains(&expected), "missing {expected}");
        }
    }

    #[test]
    fn json_roundtrip_preserves_scenario() {
        for s in builtin_scenarios() {
            let json = s.to_json().unwrap();
            let back = Scenario::from_json(&json).unwrap();
            assert_eq!(s, back, "roundtrip changed {}", s.id);
        }
    }

    #[test]
    fn overrides_apply_dotted_paths() {
        let s = resolve_scenario("eikonal").unwrap();
        let t = s
            .with_overrides(&[
                ("verify.seed".into(), "7".into()),
                ("solve.vel_samples".into(), "16".into()),
                ("grid.cells.0".into(), "100".into()),
            ])
            .unwrap();
        assert_eq!(t.verify.seed, 7);
        assert_eq!(t.solve.vel_samples, 16);
        assert_eq!(t.grid.cells[0], 100);
        assert!(s.with_overrides(&[("grid.cells.9".into(), "1".into())]).is_err());
    }

    #[test]
    fn bad_override_value_fails_validation() {
        let s = resolve_scenario("eikonal").unwrap();
        assert!(s
            .with_overrides(&[("solve.tau".into(), "99.0".into())])
            .is_err());
    }

    #[test]
    fn unknown_scenario_is_distinct_error() {
        match resolve_scenario("no-such-scenario") {
            Err(Error::UnknownScenario(_)) => {}
            other => panic!("expected unknown-scenario error, got {other:?}"),
        }
    }
}
