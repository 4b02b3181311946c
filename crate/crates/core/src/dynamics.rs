//! The velocity multifunction `x ↦ F(x)`, its minimized and maximized
//! Hamiltonians, and sampled certificates for the standing assumptions
//! (Lipschitz continuity, linear growth, class-L midpoint regularity,
//! semiconvexity of `H(·,p)`, support-point Lipschitz continuity).
//!
//! Certificates report estimates; they never hard-fail. Pass/fail judgment
//! lives in the verification harness configuration.

use crate::convexset::{ConvexBody, ScaledTerm};
use crate::directions::unit_directions;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::space::{BoundsBox, MatN, VecN};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Finite-difference step for the state gradient of H; on the scenarios the
/// Hamiltonian is differentiable in x along trajectories except at a
/// measure-zero set, and any selection solves the costate inclusion.
pub const GRAD_X_STEP: f64 = 1e-5;

/// Declared regularity constants of a multifunction. `lipschitz` and
/// `growth` are the standing assumptions; the optional fields feed the
/// sensitivity and regularity checks.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct DeclaredConstants {
    pub lipschitz: f64,
    pub growth: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semiconvexity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support_lipschitz: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum DynamicsForm {
    /// `F(x) = B(0, r(x))` for a nonnegative radius expression.
    Isotropic { radius_expr: Expr },
    /// `F(x) = {A x + u : u ∈ U}`.
    LinearDrift { a: Vec<Vec<f64>>, u: ConvexBody },
    /// `F(x) = {f(x) + g(x) u : u ∈ U}` with U in control space `R^m`.
    AffineControl {
        f_expr: Vec<Expr>,
        g_expr: Vec<Vec<Expr>>,
        u: ConvexBody,
    },
}

/// The dynamics map `x ↦ F(x)` with its declared constants.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Multifunction {
    pub dim: usize,
    #[serde(flatten)]
    pub form: DynamicsForm,
    #[serde(flatten)]
    pub constants: DeclaredConstants,
}

impl Multifunction {
    pub fn isotropic(dim: usize, radius_expr: &str, constants: DeclaredConstants) -> Result<Self> {
        Ok(Self {
            dim,
            form: DynamicsForm::Isotropic {
                radius_expr: Expr::parse(radius_expr)?,
            },
            constants,
        })
    }

    pub fn linear_drift(a: MatN, dim: usize, u: ConvexBody, constants: DeclaredConstants) -> Self {
        let rows = (0..dim).map(|i| a.m[i][..dim].to_vec()).collect();
        Self {
            dim,
            form: DynamicsForm::LinearDrift { a: rows, u },
            constants,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::Config(format!("dimension {} outside 1..=3", self.dim)));
        }
        match &self.form {
            DynamicsForm::Isotropic { .. } => Ok(()),
            DynamicsForm::LinearDrift { a, u } => {
                if a.len() != self.dim || a.iter().any(|r| r.len() != self.dim) {
                    return Err(Error::Config("drift matrix has wrong shape".into()));
                }
                u.validate(self.dim)
            }
            DynamicsForm::AffineControl { f_expr, g_expr, u } => {
                if f_expr.len() != self.dim {
                    return Err(Error::Config("drift field has wrong dimension".into()));
                }
                let m = u.dim();
                if g_expr.len() != self.dim || g_expr.iter().any(|r| r.len() != m) {
                    return Err(Error::Config("gain matrix has wrong shape".into()));
                }
                u.validate(m)
            }
        }
    }

    /// The velocity set `F(x)` as a convex body.
    pub fn velocity_set(&self, x: &VecN) -> ConvexBody {
        match &self.form {
            DynamicsForm::Isotropic { radius_expr } => {
                let r = radius_expr.eval(x).max(0.0);
                ConvexBody::Ball {
                    center: vec![0.0; self.dim],
                    radius: r,
                }
            }
            DynamicsForm::LinearDrift { a, u } => {
                let mat = MatN::from_rows(a);
                ConvexBody::Translate {
                    offset: mat.mul_vec(x).to_vec(self.dim),
                    body: Box::new(u.clone()),
                }
            }
            DynamicsForm::AffineControl { f_expr, g_expr, u } => {
                let drift: Vec<f64> = f_expr.iter().map(|e| e.eval(x)).collect();
                let g =
                    MatN::from_rows(&g_expr.iter().map(|row| row.iter().map(|e| e.eval(x)).collect())
                        .collect::<Vec<Vec<f64>>>());
                ConvexBody::Translate {
                    offset: drift,
                    body: Box::new(u.linear_image(&g, self.dim)),
                }
            }
        }
    }

    /// True when `F` does not depend on the state; lets the solver hoist
    /// the velocity discretization out of the node loop.
    pub fn is_autonomous_constant(&self) -> bool {
        match &self.form {
            DynamicsForm::Isotropic { radius_expr } => matches!(radius_expr, Expr::Const(_)),
            _ => false,
        }
    }
}

/// Value and extremal point of a Hamiltonian evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HamiltonianEval {
    pub value: f64,
    /// The argmin (for `h`) or argmax (for `H`) over `F(x)`; equals the
    /// gradient of H in p wherever the maximizer is unique.
    pub extremal_point: VecN,
}

/// Minimized Hamiltonian `h(x, ζ) = min_{v ∈ F(x)} <v, ζ>`.
///
/// Computed through the identity `h(x, ζ) = -H(x, -ζ)`, which then holds
/// exactly by construction.
pub fn min_hamiltonian(f: &Multifunction, x: &VecN, zeta: &VecN) -> HamiltonianEval {
    let e = max_hamiltonian(f, x, &-*zeta);
    HamiltonianEval {
        value: -e.value,
        extremal_point: e.extremal_point,
    }
}

/// Maximized Hamiltonian `H(x, p) = max_{v ∈ F(x)} <v, p>` with the support
/// point as extremal point.
pub fn max_hamiltonian(f: &Multifunction, x: &VecN, p: &VecN) -> HamiltonianEval {
    let e = f.velocity_set(x).support(p);
    HamiltonianEval {
        value: e.value,
        extremal_point: e.point,
    }
}

/// Central finite-difference gradient of `H(·, p)` at `x`.
///
/// Converges at rate `O(step^2)` where `H(·,p)` is C^{1,1}; the flow
/// integrator uses it as its costate selection.
pub fn grad_x_hamiltonian(f: &Multifunction, x: &VecN, p: &VecN, step: f64) -> Result<VecN> {
    if p.norm() < 1e-300 {
        return Err(Error::DegenerateCostate);
    }
    if step <= 0.0 {
        return Err(Error::Config(format!("finite-difference step {step} must be > 0")));
    }
    let mut g = VecN::zeros();
    for axis in 0..f.dim {
        let e = VecN::basis(axis);
        let hp = max_hamiltonian(f, &(*x + e * step), p).value;
        let hm = max_hamiltonian(f, &(*x - e * step), p).value;
        g[axis] = (hp - hm) / (2.0 * step);
    }
    Ok(g)
}

fn sample_box(rng: &mut ChaCha8Rng, b: &BoundsBox) -> VecN {
    let mut u = [0.0; 3];
    for ui in u.iter_mut().take(b.dim) {
        *ui = rng.gen::<f64>();
    }
    b.lerp(&u[..b.dim])
}

/// Sampled Lipschitz constant of `F` on `box_`: the largest ratio
/// `hausdorff(F(x), F(y)) / |x - y|` over random pairs.
pub fn certify_lipschitz(
    f: &Multifunction,
    box_: &BoundsBox,
    pairs: usize,
    directions: usize,
    seed: u64,
) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..pairs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9e3779b97f4a7c15));
        let x = sample_box(&mut rng, box_);
        let y = sample_box(&mut rng, box_);
        let d = x.dist(&y);
        if d < 1e-9 {
            continue;
        }
        let h = crate::convexset::hausdorff(&f.velocity_set(&x), &f.velocity_set(&y), directions, seed);
        worst = worst.max(h / d);
    }
    worst
}

/// Sampled growth constant: the largest `max{|v| : v ∈ F(x)} / (1 + |x|)`.
pub fn certify_growth(f: &Multifunction, box_: &BoundsBox, samples: usize, seed: u64) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9e3779b97f4a7c15));
        let x = sample_box(&mut rng, box_);
        let speed = f.velocity_set(&x).bounding_radius();
        worst = worst.max(speed / (1.0 + x.norm()));
    }
    worst
}

/// Sampled class-L constant: the largest
/// `hausdorff(F(λx + (1-λ)y), λF(x) + (1-λ)F(y)) / (λ(1-λ)|x-y|^2)`.
/// The Minkowski combination is realized by support-function addition, so
/// affine dynamics certify exactly zero.
pub fn certify_class_l(
    f: &Multifunction,
    box_: &BoundsBox,
    pairs: usize,
    lambda_grid: usize,
    directions: usize,
    seed: u64,
) -> Result<f64> {
    if lambda_grid < 3 {
        return Err(Error::Config(format!(
            "lambda grid needs at least 3 points, got {lambda_grid}"
        )));
    }
    let mut worst = 0.0_f64;
    for i in 0..pairs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9e3779b97f4a7c15));
        let x = sample_box(&mut rng, box_);
        let y = sample_box(&mut rng, box_);
        let dist_sq = x.dist(&y).powi(2);
        if dist_sq < 1e-12 {
            continue;
        }
        let fx = f.velocity_set(&x);
        let fy = f.velocity_set(&y);
        for k in 1..lambda_grid {
            let lam = k as f64 / lambda_grid as f64;
            let mid = x * lam + y * (1.0 - lam);
            let combo = ConvexBody::ScaledSum {
                terms: vec![
                    ScaledTerm {
                        coeff: lam,
                        body: fx.clone(),
                    },
                    ScaledTerm {
                        coeff: 1.0 - lam,
                        body: fy.clone(),
                    },
                ],
            };
            let h = crate::convexset::hausdorff(&f.velocity_set(&mid), &combo, directions, seed);
            worst = worst.max(h / (lam * (1.0 - lam) * dist_sq));
        }
    }
    Ok(worst)
}

/// Sampled semiconvexity constant of `x ↦ H(x,p)`: the smallest `c >= 0` with
/// `H(x+h,p) + H(x-h,p) - 2 H(x,p) >= -c |h|^2` over the sampled midpoints.
/// Step magnitudes come from `h_grid`; the reported constant depends on its
/// smallest entry wherever H has a genuine kink in x.
pub fn certify_h_semiconvexity(
    f: &Multifunction,
    p: &VecN,
    box_: &BoundsBox,
    samples: usize,
    h_grid: &[f64],
    seed: u64,
) -> Result<f64> {
    if (p.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::Config("semiconvexity certificate needs |p| = 1".into()));
    }
    let dirs = unit_directions(f.dim, 16, seed);
    let mut worst = 0.0_f64;
    for i in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9e3779b97f4a7c15));
        let x = sample_box(&mut rng, box_);
        for d in &dirs {
            for &mag in h_grid {
                let h = *d * mag;
                if !box_.contains(&(x + h)) || !box_.contains(&(x - h)) {
                    continue;
                }
                let mid = max_hamiltonian(f, &x, p).value;
                let plus = max_hamiltonian(f, &(x + h), p).value;
                let minus = max_hamiltonian(f, &(x - h), p).value;
                let defect = plus + minus - 2.0 * mid;
                if defect < 0.0 {
                    worst = worst.max(-defect / (mag * mag));
                }
            }
        }
    }
    Ok(worst)
}

/// Sampled support-point Lipschitz constant: the largest
/// `support_deviation(F(x), F(y)) / |x - y|`.
pub fn certify_support_lipschitz(
    f: &Multifunction,
    box_: &BoundsBox,
    pairs: usize,
    directions: usize,
    seed: u64,
) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..pairs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9e3779b97f4a7c15));
        let x = sample_box(&mut rng, box_);
        let y = sample_box(&mut rng, box_);
        let d = x.dist(&y);
        if d < 1e-9 {
            continue;
        }
        let s = crate::convexset::support_deviation(
            &f.velocity_set(&x),
            &f.velocity_set(&y),
            directions,
            seed,
        );
        worst = worst.max(s / d);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_ball_dynamics() -> Multifunction {
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

    pub(crate) fn double_integrator() -> Multifunction {
        Multifunction {
            dim: 2,
            form: DynamicsForm::AffineControl {
                f_expr: vec![Expr::parse("x2").unwrap(), Expr::parse("0").unwrap()],
                g_expr: vec![vec![Expr::parse("0").unwrap()], vec![Expr::parse("1").unwrap()]],
                u: ConvexBody::interval(-1.0, 1.0),
            },
            constants: DeclaredConstants {
                lipschitz: 1.0,
                growth: 1.0,
                ..Default::default()
            },
        }
    }

    #[test]
    fn min_hamiltonian_unit_ball() {
        let f = unit_ball_dynamics();
        let e = min_hamiltonian(&f, &VecN::zeros(), &VecN::new2(3.0, 4.0));
        assert_relative_eq!(e.value, -5.0, epsilon = 1e-12);
        assert!(e.extremal_point.dist(&VecN::new2(-0.6, -0.8)) < 1e-12);
        let z = min_hamiltonian(&f, &VecN::new2(0.4, 0.1), &VecN::zeros());
        assert_eq!(z.value, 0.0);
    }

    #[test]
    fn min_hamiltonian_square_vertex() {
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
        let e = min_hamiltonian(&f, &VecN::zeros(), &VecN::new2(1.0, 1.0));
        assert_relative_eq!(e.value, -2.0, epsilon = 1e-12);
        assert!(e.extremal_point.dist(&VecN::new2(-1.0, -1.0)) < 1e-12);
    }

    #[test]
    fn max_hamiltonian_double_integrator() {
        let f = double_integrator();
        let e = max_hamiltonian(&f, &VecN::new2(1.0, 2.0), &VecN::new2(1.0, 1.0));
        assert_relative_eq!(e.value, 3.0, epsilon = 1e-12);
        assert!(e.extremal_point.dist(&VecN::new2(2.0, 1.0)) < 1e-12);
    }

    #[test]
    fn max_hamiltonian_rotation_drift() {
        let f = Multifunction::linear_drift(
            MatN::rotation2(std::f64::consts::FRAC_PI_2),
            2,
            ConvexBody::ball(&[0.0, 0.0], 1.0),
            DeclaredConstants {
                lipschitz: 1.0,
                growth: 2.0,
                ..Default::default()
            },
        );
        let e = max_hamiltonian(&f, &VecN::new2(1.0, 0.0), &VecN::new2(0.0, 1.0));
        assert_relative_eq!(e.value, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn grad_x_is_zero_for_isotropic() {
        let f = unit_ball_dynamics();
        let g = grad_x_hamiltonian(&f, &VecN::new2(0.3, -0.7), &VecN::new2(1.0, 2.0), GRAD_X_STEP)
            .unwrap();
        assert!(g.norm() < 1e-9);
        assert!(grad_x_hamiltonian(&f, &VecN::zeros(), &VecN::zeros(), GRAD_X_STEP).is_err());
    }

    #[test]
    fn grad_x_matches_transpose_drift() {
        let a = MatN::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
        let f = Multifunction::linear_drift(
            a,
            2,
            ConvexBody::ball(&[0.0, 0.0], 1.0),
            DeclaredConstants {
                lipschitz: 1.0,
                growth: 2.0,
                ..Default::default()
            },
        );
        let g = grad_x_hamiltonian(&f, &VecN::new2(0.4, 0.9), &VecN::new2(1.0, 1.0), GRAD_X_STEP)
            .unwrap();
        // grad_x H = A^T p = (0, 1).
        assert!(g.dist(&VecN::new2(0.0, 1.0)) < 1e-9);
    }

    #[test]
    fn grad_x_double_integrator() {
        let f = double_integrator();
        let g = grad_x_hamiltonian(&f, &VecN::new2(0.2, -0.5), &VecN::new2(1.0, 1.0), GRAD_X_STEP)
            .unwrap();
        assert!(g.dist(&VecN::new2(0.0, 1.0)) < 1e-9);
    }

    #[test]
    fn certificates_on_constant_dynamics_vanish() {
        let f = unit_ball_dynamics();
        let b = BoundsBox::new(2, &[-1.0, -1.0], &[1.0, 1.0]);
        assert_eq!(certify_lipschitz(&f, &b, 32, 64, 1), 0.0);
        assert_relative_eq!(certify_growth(&f, &b, 64, 1), 1.0, epsilon = 1e-9);
        assert_eq!(certify_class_l(&f, &b, 16, 5, 64, 1).unwrap(), 0.0);
        assert_eq!(certify_support_lipschitz(&f, &b, 16, 64, 1), 0.0);
        let c = certify_h_semiconvexity(&f, &VecN::new2(1.0, 0.0), &b, 16, &[0.05, 0.1, 0.2], 1)
            .unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn growth_of_zero_body() {
        let f = Multifunction {
            dim: 2,
            form: DynamicsForm::LinearDrift {
                a: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
                u: ConvexBody::singleton(&[0.0, 0.0]),
            },
            constants: DeclaredConstants::default(),
        };
        let b = BoundsBox::new(2, &[-1.0, -1.0], &[1.0, 1.0]);
        assert_eq!(certify_growth(&f, &b, 32, 1), 0.0);
    }
}
