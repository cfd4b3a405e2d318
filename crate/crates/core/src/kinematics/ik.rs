use nalgebra::{DMatrix, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::RigidTransform;
use crate::scalar::{lit, Real};

use super::chain::{rotation_geodesic_angle, rotation_log, FingerChain, JointConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IkSettings<T: Real> {
    /// Weight of the squared orientation error (m^2 per rad^2).
    pub w_theta: T,
    pub lambda: T,
    pub max_iters: usize,
    pub pos_tol: T,
    pub ang_tol: T,
    pub step_scale: T,
}

impl<T: Real> Default for IkSettings<T> {
    fn default() -> Self {
        Self {
            w_theta: lit(0.5),
            lambda: lit(0.05),
            max_iters: 200,
            pos_tol: lit(1e-4),
            ang_tol: lit(1e-3),
            step_scale: T::one(),
        }
    }
}

impl<T: Real> IkSettings<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.w_theta >= T::zero()) {
            return Err(Error::InvalidArgument("w_theta must be non-negative".into()));
        }
        if !(self.lambda > T::zero()) {
            return Err(Error::InvalidArgument("lambda must be positive".into()));
        }
        if !(self.pos_tol > T::zero() && self.ang_tol > T::zero()) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if !(self.step_scale > T::zero() && self.step_scale <= T::one()) {
            return Err(Error::InvalidArgument("step_scale must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IkSolution<T: Real> {
    pub q: JointConfig<T>,
    /// Position error in meters.
    pub pos_residual: T,
    /// Geodesic orientation error in radians.
    pub ang_residual: T,
    pub converged: bool,
    pub iterations: usize,
    /// Cost after every accepted iterate, starting with the initial guess.
    pub cost_history: Vec<T>,
}

impl<T: Real> IkSolution<T> {
    pub fn cost(&self) -> T {
        *self.cost_history.last().expect("history holds the initial cost")
    }
}

struct Eval<T: Real> {
    err: Vector6<T>,
    pos: T,
    ang: T,
    cost: T,
}

fn evaluate<T: Real>(chain: &FingerChain<T>, q: &JointConfig<T>, target: &RigidTransform<T>, w_theta: T) -> Result<Eval<T>> {
    let tip = chain.forward_kinematics(q)?;
    let dp = target.translation() - tip.translation();
    let rot_err = target.rotation() * tip.rotation().transpose();
    let dw = rotation_log(&rot_err);
    let ang = rotation_geodesic_angle(tip.rotation(), target.rotation());
    let s = w_theta.sqrt();
    let err = Vector6::new(dp.x, dp.y, dp.z, dw.x * s, dw.y * s, dw.z * s);
    let pos = dp.norm();
    Ok(Eval { err, pos, ang, cost: pos * pos + w_theta * ang * ang })
}

/// Damped least-squares IK toward `target`, starting from `q0`.
///
/// Iterates `dq = J^T (J J^T + lambda^2 I)^-1 e` over the joints not pinned
/// against a limit, clamps to joint limits and
/// halves the step (up to 8 times) whenever the cost would rise. Running out
/// of halvings ends the solve unconverged.
pub fn dls_ik<T: Real>(chain: &FingerChain<T>, target: &RigidTransform<T>, settings: &IkSettings<T>, q0: &JointConfig<T>) -> Result<IkSolution<T>> {
    settings.validate()?;
    if q0.len() != chain.dof() {
        return Err(Error::Dimension { expected: chain.dof(), got: q0.len() });
    }
    let w = settings.w_theta;
    let s = w.sqrt();
    let lambda2 = settings.lambda * settings.lambda;
    let half = lit::<T>(0.5);

    let mut q = chain.clamp(q0);
    let mut cur = evaluate(chain, &q, target, w)?;
    let mut history = vec![cur.cost];
    let mut iterations = 0;
    let done = |e: &Eval<T>| e.pos < settings.pos_tol && e.ang < settings.ang_tol;

    while !done(&cur) && iterations < settings.max_iters {
        let mut jac = chain.jacobian(&q)?;
        for r in 3..6 {
            jac.row_mut(r).scale_mut(s);
        }
        let err = nalgebra::DVector::from_column_slice(cur.err.as_slice());
        // Joints resting on a limit and pushed outward drop out of the solve.
        let mut locked = vec![false; chain.dof()];
        let dq = loop {
            let mut jl = jac.clone();
            for (j, &l) in locked.iter().enumerate() {
                if l {
                    jl.column_mut(j).fill(T::zero());
                }
            }
            let jt = jl.transpose();
            let a = DMatrix::from_iterator(6, 6, (&jl * &jt).iter().copied()) + DMatrix::identity(6, 6) * lambda2;
            let Some(chol) = a.cholesky() else {
                break None;
            };
            let dq = jt * chol.solve(&err);
            let mut changed = false;
            for (j, joint) in chain.joints().iter().enumerate() {
                let [lo, hi] = joint.limits();
                if !locked[j] && ((q[j] <= lo && dq[j] < T::zero()) || (q[j] >= hi && dq[j] > T::zero())) {
                    locked[j] = true;
                    changed = true;
                }
            }
            if !changed {
                break Some(dq);
            }
        };
        let Some(dq) = dq else {
            break;
        };

        let mut step = settings.step_scale;
        let mut accepted = None;
        for _ in 0..=8 {
            let cand = chain.clamp(&(&q + &dq * step));
            let e = evaluate(chain, &cand, target, w)?;
            if e.cost <= cur.cost {
                accepted = Some((cand, e));
                break;
            }
            step *= half;
        }
        let Some((next, e)) = accepted else {
            break;
        };
        iterations += 1;
        let stalled = next == q;
        q = next;
        cur = e;
        history.push(cur.cost);
        if stalled {
            break;
        }
    }
    Ok(IkSolution {
        converged: done(&cur),
        q,
        pos_residual: cur.pos,
        ang_residual: cur.ang,
        iterations,
        cost_history: history,
    })
}
