//! Method-of-lines integration of `u_t = mu * u - k u + f(u)`.
//!
//! The convolution is a bounded operator, so the spatially discrete system is
//! a Lipschitz ODE and classical RK4 with a step cap is enough. Values outside
//! the window are the field's limits; the limits themselves evolve by the
//! scalar equation they satisfy, so a constant state stays constant.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::GridField;
use crate::kernel::DiscreteWeights;
use crate::reaction::ReactionFn;

/// Work (nodes × stencil entries) above which the convolution runs on the rayon pool.
const PARALLEL_WORK: usize = 1 << 17;

/// Largest admissible `dt * (mass + |k| + Lip f)`.
pub const STABILITY_BUDGET: f64 = 0.5;

/// The evolution `u_t = mu * u - linear_coeff * u + f(u)`.
///
/// `linear_coeff = 1` gives the nonlocal monostable equation; a problem
/// without reaction is the linear flow `v_t = mu * v - linear_coeff * v`.
#[derive(Debug, Clone)]
pub struct EvolutionProblem {
    weights: Arc<DiscreteWeights>,
    reaction: Option<ReactionFn>,
    linear_coeff: f64,
    dt: f64,
}

#[derive(Debug, Clone)]
struct State {
    values: Vec<f64>,
    left: f64,
    right: f64,
}

struct Workspace {
    ext: Vec<f64>,
    k: [State; 4],
    stage: State,
}

impl Workspace {
    fn new(n: usize, radius: usize) -> Self {
        let zero = State {
            values: vec![0.0; n],
            left: 0.0,
            right: 0.0,
        };
        Self {
            ext: vec![0.0; n + 2 * radius],
            k: [zero.clone(), zero.clone(), zero.clone(), zero.clone()],
            stage: zero,
        }
    }
}

impl EvolutionProblem {
    /// `u_t = mu * u - u + f(u)` with the default step.
    pub fn new(weights: DiscreteWeights, reaction: ReactionFn) -> Self {
        Self::general(Arc::new(weights), Some(reaction), 1.0)
    }

    /// Linear flow `v_t = mu * v - linear_coeff * v`.
    pub fn linear(weights: DiscreteWeights, linear_coeff: f64) -> Self {
        Self::general(Arc::new(weights), None, linear_coeff)
    }

    pub fn general(weights: Arc<DiscreteWeights>, reaction: Option<ReactionFn>, linear_coeff: f64) -> Self {
        let mut p = Self {
            weights,
            reaction,
            linear_coeff,
            dt: 0.0,
        };
        p.dt = 0.25 / p.stability_rate();
        p
    }

    /// Override the time step, enforcing the stability budget.
    pub fn with_dt(mut self, dt: f64) -> Result<Self> {
        let rate = self.stability_rate();
        if !(dt > 0.0) || dt * rate > STABILITY_BUDGET {
            return Err(Error::Unstable {
                dt,
                rate,
                product: dt * rate,
            });
        }
        self.dt = dt;
        Ok(self)
    }

    /// `mu(R) + |linear_coeff| + Lip f`.
    pub fn stability_rate(&self) -> f64 {
        self.weights.total_mass() + self.linear_coeff.abs() + self.reaction.as_ref().map_or(0.0, |f| f.lipschitz())
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn weights(&self) -> &DiscreteWeights {
        &self.weights
    }

    pub fn reaction(&self) -> Option<&ReactionFn> {
        self.reaction.as_ref()
    }

    pub fn linear_coeff(&self) -> f64 {
        self.linear_coeff
    }

    /// Distance over which the window edges influence the solution in one step.
    pub fn stencil_reach(&self) -> f64 {
        self.weights.radius() as f64 * self.weights.h()
    }

    fn check_grid(&self, u: &GridField) -> Result<()> {
        let h = self.weights.h();
        if (u.h() - h).abs() > 1e-12 * h {
            return Err(Error::GridMismatch(format!(
                "field spacing {} differs from stencil spacing {h}",
                u.h()
            )));
        }
        Ok(())
    }

    #[inline]
    fn local(&self, u: f64) -> f64 {
        -self.linear_coeff * u + self.reaction.as_ref().map_or(0.0, |f| f.eval(u))
    }

    fn convolve_constant(&self, value: f64) -> f64 {
        self.weights.nonzero().iter().fold(0.0, |acc, (_, w)| acc + w * value)
    }

    /// Writes the right-hand side of `state` into `out`.
    fn rhs_into(&self, state: &State, ext: &mut [f64], out: &mut State) {
        let n = state.values.len();
        let r = self.weights.radius();
        ext[..r].fill(state.left);
        ext[r..r + n].copy_from_slice(&state.values);
        ext[r + n..].fill(state.right);

        let taps = self.weights.nonzero();
        let ext: &[f64] = ext;
        let node = |i: usize, u: f64| -> f64 {
            let base = i + r;
            // increasing offsets, matching DiscreteWeights::mass
            let conv = taps
                .iter()
                .fold(0.0, |acc, (j, w)| acc + w * ext[(base as isize - j) as usize]);
            conv + self.local(u)
        };
        if n * taps.len() >= PARALLEL_WORK {
            out.values
                .par_iter_mut()
                .zip(state.values.par_iter())
                .enumerate()
                .for_each(|(i, (o, u))| *o = node(i, *u));
        } else {
            for (i, (o, u)) in out.values.iter_mut().zip(&state.values).enumerate() {
                *o = node(i, *u);
            }
        }
        out.left = self.convolve_constant(state.left) + self.local(state.left);
        out.right = self.convolve_constant(state.right) + self.local(state.right);
    }

    fn rk4_step(&self, y: &mut State, dt: f64, ws: &mut Workspace) {
        let Workspace { ext, k, stage } = ws;
        let combine = |stage: &mut State, y: &State, k: &State, a: f64| {
            for ((s, y), k) in stage.values.iter_mut().zip(&y.values).zip(&k.values) {
                *s = y + a * k;
            }
            stage.left = y.left + a * k.left;
            stage.right = y.right + a * k.right;
        };
        let [k1, k2, k3, k4] = k;
        self.rhs_into(y, ext, k1);
        combine(stage, y, k1, 0.5 * dt);
        self.rhs_into(stage, ext, k2);
        combine(stage, y, k2, 0.5 * dt);
        self.rhs_into(stage, ext, k3);
        combine(stage, y, k3, dt);
        self.rhs_into(stage, ext, k4);
        let c = dt / 6.0;
        for i in 0..y.values.len() {
            y.values[i] += c * (k1.values[i] + 2.0 * k2.values[i] + 2.0 * k3.values[i] + k4.values[i]);
        }
        y.left += c * (k1.left + 2.0 * k2.left + 2.0 * k3.left + k4.left);
        y.right += c * (k1.right + 2.0 * k2.right + 2.0 * k3.right + k4.right);
    }

    /// `mu * u - linear_coeff * u + f(u)`; the limits of the result are the
    /// same expression applied to the limits of `u`.
    pub fn rhs(&self, u: &GridField) -> Result<GridField> {
        self.check_grid(u)?;
        let state = State {
            values: u.values().to_vec(),
            left: u.left_limit(),
            right: u.right_limit(),
        };
        let mut ws = Workspace::new(u.len(), self.weights.radius());
        let mut out = ws.stage.clone();
        self.rhs_into(&state, &mut ws.ext, &mut out);
        Ok(GridField::from_parts_unchecked(u.x_min(), u.h(), out.values, out.left, out.right))
    }

    fn integrate(&self, y: &mut State, ws: &mut Workspace, t0: f64, duration: f64) -> Result<()> {
        if duration <= 0.0 {
            return Ok(());
        }
        let steps = (duration / self.dt - 1e-9).ceil().max(1.0) as usize;
        for s in 0..steps {
            let dt = if s + 1 == steps {
                duration - (steps - 1) as f64 * self.dt
            } else {
                self.dt
            };
            self.rk4_step(y, dt, ws);
            if !(y.left.is_finite() && y.right.is_finite()) || y.values.iter().any(|v| !v.is_finite()) {
                let t = t0 + (s + 1) as f64 * self.dt;
                return Err(Error::NonFinite {
                    t,
                    detail: format!("after step {} of size {dt}", s + 1),
                });
            }
        }
        Ok(())
    }

    /// State at time `t_end`; the last step is shortened to land on `t_end`.
    pub fn evolve(&self, u0: &GridField, t_end: f64) -> Result<GridField> {
        if !(t_end >= 0.0) {
            return Err(Error::Domain(format!("evolution time must be nonnegative, got {t_end}")));
        }
        self.check_grid(u0)?;
        let mut y = State {
            values: u0.values().to_vec(),
            left: u0.left_limit(),
            right: u0.right_limit(),
        };
        let mut ws = Workspace::new(u0.len(), self.weights.radius());
        self.integrate(&mut y, &mut ws, 0.0, t_end)?;
        Ok(GridField::from_parts_unchecked(u0.x_min(), u0.h(), y.values, y.left, y.right))
    }

    /// Evolve to `t_end`, handing the state to `observe` at `t = 0` and at
    /// every multiple of `snap_dt`. Returning `false` stops the run early.
    pub fn evolve_observed<F>(&self, u0: &GridField, t_end: f64, snap_dt: f64, mut observe: F) -> Result<GridField>
    where
        F: FnMut(f64, &GridField) -> Result<bool>,
    {
        if !(snap_dt > 0.0) {
            return Err(Error::Domain(format!("snapshot interval must be positive, got {snap_dt}")));
        }
        let mut u = u0.clone();
        if !observe(0.0, &u)? {
            return Ok(u);
        }
        let snaps = (t_end / snap_dt - 1e-9).ceil().max(0.0) as usize;
        let mut t = 0.0;
        for k in 1..=snaps {
            let next = (k as f64 * snap_dt).min(t_end);
            u = self.evolve(&u, next - t)?;
            t = next;
            if !observe(t, &u)? {
                break;
            }
        }
        Ok(u)
    }

    /// The time-`tau` solution map.
    pub fn time_map(&self, tau: f64) -> Result<TimeMap> {
        if !(tau > 0.0) {
            return Err(Error::Domain(format!("time map needs tau > 0, got {tau}")));
        }
        Ok(TimeMap {
            problem: self.clone(),
            tau,
        })
    }
}

/// Reusable solution operator `u -> u(tau)`.
#[derive(Debug, Clone)]
pub struct TimeMap {
    problem: EvolutionProblem,
    tau: f64,
}

impl TimeMap {
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn problem(&self) -> &EvolutionProblem {
        &self.problem
    }

    pub fn apply(&self, u: &GridField) -> Result<GridField> {
        self.problem.evolve(u, self.tau)
    }
}
