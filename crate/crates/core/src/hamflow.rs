//! Integration of the Hamiltonian system
//! `ẋ = ∇_p H(x,p)`, `-ṗ ∈ ∂_x H(x,p)`
//! with classical fourth-order Runge-Kutta, backward synthesis of candidate
//! optimal arcs from the target, and dual-arc bound checks.
//!
//! At support-point ties (bang-bang switch instants) the integrator keeps
//! the previous extremal point for the current step and logs a switch
//! event: any measurable selection solves the inclusion, and step-local
//! constancy preserves the integration order away from the measure-zero
//! switch set.

use crate::dynamics::{grad_x_hamiltonian, max_hamiltonian, min_hamiltonian, Multifunction};
use crate::error::{Error, Result};
use crate::grid::{TargetSet, ValueField};
use crate::space::VecN;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

/// Paired state/costate trajectory with switch log.
#[derive(Clone, Debug)]
pub struct HamiltonianArc {
    pub times: Vec<f64>,
    pub states: Vec<VecN>,
    pub costates: Vec<VecN>,
    pub dt: f64,
    /// Times at which the extremal velocity jumped (bang-bang switches).
    pub switch_times: Vec<f64>,
    /// Optimality certificate from `synthesize_from_target`, when run.
    pub certificate: Option<ArcCertificate>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ArcCertificate {
    pub certified: bool,
    pub worst_residual: f64,
    pub tolerance: f64,
}

impl HamiltonianArc {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap() - self.times[0]
    }

    /// CSV rows `(t, x coords, p coords, switch flag)`.
    pub fn write_csv<W: Write>(&self, dim: usize, mut w: W) -> Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend((0..dim).map(|i| format!("x{}", i + 1)));
        header.extend((0..dim).map(|i| format!("p{}", i + 1)));
        header.push("switch".to_string());
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.len() {
            let mut row = vec![format!("{}", self.times[k])];
            row.extend((0..dim).map(|i| format!("{}", self.states[k][i])));
            row.extend((0..dim).map(|i| format!("{}", self.costates[k][i])));
            let switched = self
                .switch_times
                .iter()
                .any(|&s| (s - self.times[k]).abs() <= self.dt * 0.5);
            row.push(if switched { "1" } else { "0" }.to_string());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

struct FlowState {
    last_extremal: Option<VecN>,
    switches: Vec<f64>,
}

/// Integrates the Hamiltonian system from `(x0, p0)` over `[0, horizon]`.
///
/// Backward integration runs the time-reversed field; the returned arc is
/// always indexed by forward time from the integration start.
pub fn integrate_mp(
    f: &Multifunction,
    x0: &VecN,
    p0: &VecN,
    horizon: f64,
    dt: f64,
    direction: Direction,
) -> Result<HamiltonianArc> {
    if p0.norm() < 1e-12 {
        return Err(Error::DegenerateCostate);
    }
    if !(dt > 0.0 && dt <= horizon / 10.0) {
        return Err(Error::Config(format!(
            "dt = {dt} must be positive and at most horizon/10 = {}",
            horizon / 10.0
        )));
    }
    let steps = (horizon / dt).round().max(1.0) as usize;
    let dt = horizon / steps as f64;
    let sign = match direction {
        Direction::Forward => 1.0,
        Direction::Backward => -1.0,
    };
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut costates = Vec::with_capacity(steps + 1);
    let mut x = *x0;
    let mut p = *p0;
    times.push(0.0);
    states.push(x);
    costates.push(p);
    let mut flow = FlowState {
        last_extremal: None,
        switches: Vec::new(),
    };
    let step = crate::dynamics::GRAD_X_STEP;
    for k in 0..steps {
        let t = k as f64 * dt;
        if p.norm() < 1e-12 {
            return Err(Error::CostateCollapse { time: t });
        }
        let body = f.velocity_set(&x);
        let diameter = 2.0 * body.bounding_radius();
        let tie = body.support_tie(&p, 1e-9 * p.norm().max(1.0));
        let eval = body.support(&p);
        let frozen = if tie {
            if let Some(prev) = flow.last_extremal {
                flow.switches.push(t);
                Some(prev)
            } else {
                Some(eval.point)
            }
        } else {
            if let Some(prev) = flow.last_extremal {
                if prev.dist(&eval.point) > 0.45 * diameter.max(1e-9) {
                    flow.switches.push(t);
                }
            }
            None
        };
        let deriv = |xs: &VecN, ps: &VecN| -> Result<(VecN, VecN)> {
            let v = match frozen {
                Some(v) => v,
                None => max_hamiltonian(f, xs, ps).extremal_point,
            };
            let gx = grad_x_hamiltonian(f, xs, ps, step)?;
            Ok((v * sign, -gx * sign))
        };
        let (k1x, k1p) = deriv(&x, &p)?;
        let (k2x, k2p) = deriv(&(x + k1x * (dt / 2.0)), &(p + k1p * (dt / 2.0)))?;
        let (k3x, k3p) = deriv(&(x + k2x * (dt / 2.0)), &(p + k2p * (dt / 2.0)))?;
        let (k4x, k4p) = deriv(&(x + k3x * dt), &(p + k3p * dt))?;
        x += (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (dt / 6.0);
        p += (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (dt / 6.0);
        flow.last_extremal = Some(max_hamiltonian(f, &x, &p).extremal_point);
        times.push((k + 1) as f64 * dt);
        states.push(x);
        costates.push(p);
    }
    Ok(HamiltonianArc {
        times,
        states,
        costates,
        dt,
        switch_times: flow.switches,
        certificate: None,
    })
}

/// Backward synthesis from a target boundary point `z` with outward proximal
/// normal `ν`: integrates the system backward from the terminal pair
/// `(z, ν)` and re-indexes the arc forward, so `x(horizon) = z`,
/// `p(horizon) = ν`. When a value field is supplied the arc is certified
/// against `T(x(t)) ≈ horizon - t`; failure flags the arc, it is not an
/// error.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_from_target(
    f: &Multifunction,
    target: &TargetSet,
    z: &VecN,
    nu: &VecN,
    horizon: f64,
    dt: f64,
    field: Option<&ValueField>,
    cert_tol: f64,
) -> Result<HamiltonianArc> {
    if (nu.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::Config("normal must be a unit vector".into()));
    }
    // Proximal-normal precondition via projection: z must be the projection
    // of z + λν for small λ.
    let probe = *z + *nu * (1e-3);
    let back = target.project(&probe);
    if back.dist(z) > 1e-4 {
        return Err(Error::Config(format!(
            "direction is not a proximal normal of the target at {:?}",
            z.to_vec(f.dim)
        )));
    }
    let backward = integrate_mp(f, z, nu, horizon, dt, Direction::Backward)?;
    // Re-index forward: node k of the output is backward node (N - k).
    let n = backward.len();
    let times: Vec<f64> = backward.times.clone();
    let states: Vec<VecN> = (0..n).map(|k| backward.states[n - 1 - k]).collect();
    let costates: Vec<VecN> = (0..n).map(|k| backward.costates[n - 1 - k]).collect();
    let switch_times: Vec<f64> = backward
        .switch_times
        .iter()
        .map(|s| horizon - s)
        .collect();
    let mut arc = HamiltonianArc {
        times,
        states,
        costates,
        dt: backward.dt,
        switch_times,
        certificate: None,
    };
    if let Some(field) = field {
        let mut worst = 0.0f64;
        let samples = 24.min(n - 1).max(1);
        for s in 0..=samples {
            let k = s * (n - 1) / samples;
            let expected = horizon - arc.times[k];
            let value = match field.eval(&arc.states[k]) {
                Ok(v) if v.is_finite() => v,
                _ => f64::INFINITY,
            };
            let residual = if value.is_finite() {
                (value - expected).abs()
            } else {
                f64::INFINITY
            };
            worst = worst.max(residual);
        }
        arc.certificate = Some(ArcCertificate {
            certified: worst <= cert_tol,
            worst_residual: worst,
            tolerance: cert_tol,
        });
    }
    Ok(arc)
}

/// Report of the three costate norm bounds with constant `K0`:
/// `e^{-K0 t} |p(0)| <= |p(t)| <= e^{K0 t} |p(0)|`, the same comparison
/// between any two times, and the increment bound
/// `|p(t2) - p(t1)| <= K0 e^{K0 (t2-t1)} (t2-t1) |p(t2)|`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DualBoundsReport {
    pub pass: bool,
    /// Worst relative slack over all node pairs (negative means margin).
    pub worst_slack: f64,
    pub pairs_tested: usize,
}

pub fn check_dual_bounds(arc: &HamiltonianArc, k0: f64) -> Result<DualBoundsReport> {
    if !(k0 > 0.0) {
        return Err(Error::Config(format!("K0 must be positive, got {k0}")));
    }
    let n = arc.len();
    let mut worst = f64::NEG_INFINITY;
    let mut pairs = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            let dt = arc.times[j] - arc.times[i];
            let pi = arc.costates[i].norm();
            let pj = arc.costates[j].norm();
            let growth = (k0 * dt).exp();
            // Two-sided norm comparison, relative to the allowed envelope.
            let upper = (pj - pi * growth) / (pi * growth).max(1e-300);
            let lower = (pi / growth - pj) / (pi / growth).max(1e-300);
            // Increment bound.
            let cap = k0 * growth * dt * pj;
            let inc = (arc.costates[j] - arc.costates[i]).norm();
            let inc_slack = (inc - cap) / cap.max(1e-300);
            worst = worst.max(upper).max(lower).max(inc_slack);
            pairs += 1;
        }
    }
    Ok(DualBoundsReport {
        pass: worst <= 0.0,
        worst_slack: worst,
        pairs_tested: pairs,
    })
}

/// Largest deviation of `h(x(t), -p(t))` from its initial value along the
/// arc; the minimized Hamiltonian is a first integral of optimal pairs.
pub fn hamiltonian_constancy(arc: &HamiltonianArc, f: &Multifunction) -> f64 {
    let h0 = min_hamiltonian(f, &arc.states[0], &-arc.costates[0]).value;
    arc.states
        .iter()
        .zip(arc.costates.iter())
        .map(|(x, p)| (min_hamiltonian(f, x, &-*p).value - h0).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convexset::ConvexBody;
    use crate::dynamics::DeclaredConstants;
    use crate::expr::Expr;
    use crate::space::MatN;

    fn eikonal() -> Multifunction {
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

    fn rotation_drift() -> Multifunction {
        Multifunction::linear_drift(
            MatN::rotation2(std::f64::consts::FRAC_PI_2),
            2,
            ConvexBody::ball(&[0.0, 0.0], 1.0),
            DeclaredConstants {
                lipschitz: 1.0,
                growth: 2.0,
                ..Default::default()
            },
        )
    }

    fn double_integrator() -> Multifunction {
        Multifunction {
            dim: 2,
            form: crate::dynamics::DynamicsForm::AffineControl {
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
    fn eikonal_arc_is_straight_ray() {
        let f = eikonal();
        let arc = integrate_mp(
            &f,
            &VecN::new2(2.0, 0.0),
            &VecN::new2(-1.0, 0.0),
            1.0,
            1e-3,
            Direction::Forward,
        )
        .unwrap();
        let last = arc.len() - 1;
        assert!(arc.costates[last].dist(&VecN::new2(-1.0, 0.0)) < 1e-12);
        assert!(arc.states[last].dist(&VecN::new2(1.0, 0.0)) < 1e-9);
        assert!(arc.switch_times.is_empty());
        assert!(hamiltonian_constancy(&arc, &f) < 1e-12);
    }

    #[test]
    fn linear_drift_costate_matches_matrix_exponential() {
        let f = rotation_drift();
        let p0 = VecN::new2(0.3, -0.8);
        let arc = integrate_mp(
            &f,
            &VecN::new2(1.0, 0.0),
            &p0,
            1.0,
            1e-3,
            Direction::Forward,
        )
        .unwrap();
        // p(t) = exp(-A^T t) p0; for A = rotation generator-free case the
        // matrix exponential of the pi/2-rotation transpose is its inverse
        // rotation scaled by the angle... compute numerically instead:
        // dp/dt = -A^T p, A = R(pi/2) constant, so p(t) = exp(-A^T t) p0.
        let a_t = MatN::rotation2(std::f64::consts::FRAC_PI_2).transpose();
        // Matrix exponential by scaling and squaring on the 2x2 block.
        let expm = |m: &MatN, t: f64| -> MatN {
            let mut acc = MatN::identity(2);
            let mut term = MatN::identity(2);
            for k in 1..24 {
                // term = term * (m t) / k
                let mut next = MatN::zeros();
                for i in 0..2 {
                    for j in 0..2 {
                        let mut s = 0.0;
                        for l in 0..2 {
                            s += term.m[i][l] * m.m[l][j];
                        }
                        next.m[i][j] = s * t / k as f64;
                    }
                }
                term = next;
                for i in 0..2 {
                    for j in 0..2 {
                        acc.m[i][j] += term.m[i][j];
                    }
                }
            }
            acc
        };
        for (k, &t) in arc.times.iter().enumerate().step_by(200) {
            let expected = expm(&a_t, -t).mul_vec(&p0);
            assert!(
                arc.costates[k].dist(&expected) < 1e-8,
                "costate drift at t={t}: {:?} vs {:?}",
                arc.costates[k],
                expected
            );
        }
        assert!(hamiltonian_constancy(&arc, &f) < 1e-6);
    }

    #[test]
    fn double_integrator_costate_and_single_switch() {
        let f = double_integrator();
        let p0 = VecN::new2(1.0, 0.5);
        let arc = integrate_mp(
            &f,
            &VecN::new2(0.0, -1.0),
            &p0,
            1.0,
            1e-3,
            Direction::Forward,
        )
        .unwrap();
        for (k, &t) in arc.times.iter().enumerate() {
            assert!((arc.costates[k][0] - 1.0).abs() < 1e-10, "p1 not conserved");
            assert!(
                (arc.costates[k][1] - (0.5 - t)).abs() < 1e-9,
                "p2 linear law broken at t={t}"
            );
        }
        // p2 crosses zero at t = 0.5: exactly one switch.
        assert_eq!(arc.switch_times.len(), 1, "switches: {:?}", arc.switch_times);
        assert!((arc.switch_times[0] - 0.5).abs() < 2e-3);
        assert!(hamiltonian_constancy(&arc, &f) <= 1e-3);
    }

    #[test]
    fn time_reversal_roundtrip() {
        let f = rotation_drift();
        let x0 = VecN::new2(0.9, -0.4);
        let p0 = VecN::new2(0.6, 0.8);
        let fwd = integrate_mp(&f, &x0, &p0, 0.8, 1e-3, Direction::Forward).unwrap();
        let last = fwd.len() - 1;
        let back = integrate_mp(
            &f,
            &fwd.states[last],
            &fwd.costates[last],
            0.8,
            1e-3,
            Direction::Backward,
        )
        .unwrap();
        let end = back.len() - 1;
        assert!(back.states[end].dist(&x0) < 1e-8);
        assert!(back.costates[end].dist(&p0) < 1e-8);
    }

    #[test]
    fn rk4_order_on_smooth_scenario() {
        let f = rotation_drift();
        let x0 = VecN::new2(1.0, 0.0);
        let p0 = VecN::new2(0.0, 1.0);
        let dev = |dt: f64| {
            let arc = integrate_mp(&f, &x0, &p0, 1.0, dt, Direction::Forward).unwrap();
            let h0 = max_hamiltonian(&f, &x0, &p0).value;
            arc.states
                .iter()
                .zip(arc.costates.iter())
                .map(|(x, p)| (max_hamiltonian(&f, x, p).value - h0).abs())
                .fold(0.0, f64::max)
        };
        let coarse = dev(0.02);
        let fine = dev(0.005);
        assert!(
            coarse / fine.max(1e-16) >= 100.0,
            "quartering dt gave factor {:.1} (coarse {coarse:.3e}, fine {fine:.3e})",
            coarse / fine.max(1e-16)
        );
    }

    #[test]
    fn dual_bounds_hold_and_fail_when_understated() {
        let f = rotation_drift();
        let arc = integrate_mp(
            &f,
            &VecN::new2(1.0, 0.0),
            &VecN::new2(0.0, 1.0),
            1.0,
            2e-3,
            Direction::Forward,
        )
        .unwrap();
        // |dp/dt| = |A^T p| = |p| here, so K0 = 1 is exact.
        let ok = check_dual_bounds(&arc, 1.0).unwrap();
        assert!(ok.pass, "slack {}", ok.worst_slack);
        let bad = check_dual_bounds(&arc, 0.5).unwrap();
        assert!(!bad.pass, "halved K0 must fail");
        assert!(check_dual_bounds(&arc, 0.0).is_err());
        // An eikonal arc has constant costate: zero slack against any K0.
        let e = eikonal();
        let flat = integrate_mp(
            &e,
            &VecN::new2(2.0, 0.0),
            &VecN::new2(-1.0, 0.0),
            1.0,
            1e-2,
            Direction::Forward,
        )
        .unwrap();
        let r = check_dual_bounds(&flat, 1.0).unwrap();
        assert!(r.pass && r.worst_slack <= 0.0);
    }

    #[test]
    fn degenerate_costate_is_rejected() {
        let f = eikonal();
        assert!(matches!(
            integrate_mp(
                &f,
                &VecN::new2(1.0, 0.0),
                &VecN::zeros(),
                1.0,
                1e-3,
                Direction::Forward
            ),
            Err(Error::DegenerateCostate)
        ));
    }

    #[test]
    fn arc_csv_has_header_and_switch_column() {
        let f = double_integrator();
        let arc = integrate_mp(
            &f,
            &VecN::new2(0.0, -1.0),
            &VecN::new2(1.0, 0.5),
            1.0,
            1e-2,
            Direction::Forward,
        )
        .unwrap();
        let mut buf = Vec::new();
        arc.write_csv(2, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x1,x2,p1,p2,switch\n"));
        assert!(text.lines().any(|l| l.ends_with(",1")));
    }
}
