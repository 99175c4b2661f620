//! A-priori error bounds on the measurement set and the minimality certificate.

use serde::{Deserialize, Serialize};

use crate::calculus::{highest_seminorm_sq, lp_norm_normalised};
use crate::error::{Error, Result};
use crate::functional::{check_p, energy_p, ProblemData, RegularisationParams};
use crate::grid::ScalarField;
use crate::operators::{eval_f, eval_k};

/// Relative slack on the minimality certificate.
pub const MINIMALITY_SLACK: f64 = 1e-10;

/// `2 gamma + alpha ||F[u0]||_inf + (beta/2) ||D^{n̄} u0||^2`.
pub fn bound_rhs_inf(
    u0: &ScalarField,
    params: &RegularisationParams,
    data: &ProblemData,
) -> Result<f64> {
    let f = eval_f(data.op_f(), u0)?;
    let sup = f.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(2.0 * params.gamma + params.alpha * sup + 0.5 * params.beta * highest_seminorm_sq(u0)?)
}

/// As [`bound_rhs_inf`] with the normalised `L^p` norm of `F[u0]`.
pub fn bound_rhs_p(
    u0: &ScalarField,
    params: &RegularisationParams,
    data: &ProblemData,
    p: f64,
) -> Result<f64> {
    check_p(p, data.grid().dim())?;
    let f = eval_f(data.op_f(), u0)?;
    let lp = lp_norm_normalised(f.values(), data.grid().weights(), p)?;
    Ok(2.0 * params.gamma + params.alpha * lp + 0.5 * params.beta * highest_seminorm_sq(u0)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RungCheck {
    pub p: f64,
    /// `||K[u_p] - K[u0]||_{L^p(K)}`.
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
    pub energy_at_solution: f64,
    pub energy_at_exact: f64,
    pub minimal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupCheck {
    pub p: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub slack: f64,
    pub rungs: Vec<RungCheck>,
    /// Sup-norm bound at the largest computed exponent.
    pub sup: Option<SupCheck>,
}

impl BoundReport {
    pub fn all_pass(&self) -> bool {
        self.rungs.iter().all(|r| r.pass && r.minimal) && self.sup.as_ref().map_or(true, |s| s.pass)
    }
}

/// Checks every rung `(p, u_p)` of a trajectory against the bounds implied by
/// the exact state `u0`, which must reproduce the observations within `gamma`.
pub fn verify_bounds(
    trajectory: &[(f64, ScalarField)],
    u0: &ScalarField,
    params: &RegularisationParams,
    data: &ProblemData,
    slack: f64,
) -> Result<BoundReport> {
    if !u0.same_grid(data.boundary()) {
        return Err(Error::Mismatch("exact state lives on another grid".into()));
    }
    let ks = data.measurement();
    let k0 = eval_k(data.op_k(), u0, ks)?;
    let deviation = k0
        .iter()
        .zip(data.observations())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if deviation > params.gamma * (1.0 + 1e-12) + 1e-15 {
        return Err(Error::InconsistentExact {
            deviation,
            gamma: params.gamma,
        });
    }

    let mut rungs = Vec::with_capacity(trajectory.len());
    for (p, up) in trajectory {
        let kp = eval_k(data.op_k(), up, ks)?;
        let diff: Vec<f64> = kp.iter().zip(&k0).map(|(a, b)| a - b).collect();
        let lhs = lp_norm_normalised(&diff, ks.weights(), *p)?;
        let rhs = bound_rhs_p(u0, params, data, *p)?;
        let e_up = energy_p(up, params, data, *p)?;
        let e_u0 = energy_p(u0, params, data, *p)?;
        rungs.push(RungCheck {
            p: *p,
            lhs,
            rhs,
            pass: lhs <= rhs * (1.0 + slack),
            energy_at_solution: e_up,
            energy_at_exact: e_u0,
            minimal: e_up <= e_u0 * (1.0 + MINIMALITY_SLACK),
        });
    }

    let sup = match trajectory.last() {
        Some((p, up)) => {
            let kp = eval_k(data.op_k(), up, ks)?;
            let lhs = kp
                .iter()
                .zip(&k0)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let rhs = bound_rhs_inf(u0, params, data)?;
            Some(SupCheck {
                p: *p,
                lhs,
                rhs,
                pass: lhs <= rhs * (1.0 + slack),
            })
        }
        None => None,
    };
    Ok(BoundReport { slack, rungs, sup })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::grid::{Grid, Interval, MeasurementSet};
    use crate::operators::{laplacian, obs_identity};

    fn setup(gamma: f64, shift: f64) -> (ScalarField, RegularisationParams, ProblemData) {
        let g = Arc::new(Grid::new(&[Interval::new(0.0, 1.0); 2], &[9, 9]).unwrap());
        let u0 = g.sample(|x| x[0] * x[0] + x[1]);
        let ks = MeasurementSet::points(&g, &[vec![0.5, 0.5], vec![0.25, 0.75]]).unwrap();
        let obs: Vec<f64> = eval_k(&obs_identity(), &u0, &ks)
            .unwrap()
            .iter()
            .map(|v| v + shift)
            .collect();
        let data = ProblemData::new(
            Arc::new(laplacian(2).unwrap()),
            Arc::new(obs_identity()),
            ks,
            u0.clone(),
            obs,
        )
        .unwrap();
        let params = RegularisationParams::new(0.1, 1e-3, gamma, vec![4.0, 8.0], 2).unwrap();
        (u0, params, data)
    }

    #[test]
    fn rhs_of_quadratic() {
        let (u0, params, data) = setup(0.01, 0.0);
        // F[u0] = 2, top derivatives vanish
        let inf = bound_rhs_inf(&u0, &params, &data).unwrap();
        assert!((inf - (0.02 + 0.2)).abs() < 1e-9);
        let p = bound_rhs_p(&u0, &params, &data, 8.0).unwrap();
        assert!((p - inf).abs() < 1e-9);
    }

    #[test]
    fn exact_state_passes_trivially() {
        let (u0, params, data) = setup(0.01, 0.005);
        let traj = vec![(4.0, u0.clone()), (8.0, u0.clone())];
        let rep = verify_bounds(&traj, &u0, &params, &data, 0.05).unwrap();
        assert!(rep.all_pass());
        assert_eq!(rep.rungs[0].lhs, 0.0);
        assert_eq!(rep.sup.as_ref().unwrap().p, 8.0);
    }

    #[test]
    fn far_state_fails_bound() {
        let (u0, params, data) = setup(0.01, 0.0);
        let far = u0
            .grid()
            .sample(|x| x[0] * x[0] + x[1] + 5.0 * (x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1])));
        let rep = verify_bounds(&[(4.0, far)], &u0, &params, &data, 0.05).unwrap();
        assert!(!rep.rungs[0].pass);
        assert!(!rep.sup.unwrap().pass);
    }

    #[test]
    fn inconsistent_exact_rejected() {
        let (u0, params, data) = setup(0.01, 0.02);
        assert!(matches!(
            verify_bounds(&[], &u0, &params, &data, 0.05),
            Err(Error::InconsistentExact { .. })
        ));
    }
}
