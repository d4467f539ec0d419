//! Forward-backward sweep for the optimality system.
//!
//! Each iteration integrates the state forward under the current control,
//! integrates the costate backward from a zero terminal value, and replaces
//! the control with a convex combination of itself and the projected
//! pointwise minimiser of the Hamiltonian. Iteration stops once every state,
//! costate, and the control pass the relative-change test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{
    integrate_cost, rk4_backward, rk4_forward, ControlGrid, OdeVector, TimeGrid, Trajectory,
};
use crate::model::{project_unit, AdjointMode, AdjointVec, CostKind, ModelParams, StateVec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Weight of the freshly computed control in the convex combination.
    pub relaxation: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub adjoint_mode: AdjointMode,
    pub cost: CostKind,
    /// Starting control; `None` means `u = 0` on the solve grid.
    pub initial_guess: Option<ControlGrid>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            relaxation: 0.5,
            tol: 1e-3,
            max_iters: 500,
            adjoint_mode: AdjointMode::PaperStated,
            cost: CostKind::J1,
            initial_guess: None,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::invariant("relaxation", format!("must lie in (0,1], got {}", self.relaxation)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invariant("tol", format!("must be > 0, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::invariant("max_iters", "must be >= 1"));
        }
        Ok(())
    }
}

/// Trajectories, control, and diagnostics of an optimal-control solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub state_traj: Trajectory<StateVec>,
    pub adjoint_traj: Trajectory<AdjointVec>,
    pub control: ControlGrid,
    pub cost_value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub per_iteration_residuals: Vec<f64>,
    /// Objective value of every iterate, starting with the initial guess.
    pub cost_history: Vec<f64>,
}

pub fn solve_state(p: &ModelParams, x0: StateVec, u: &ControlGrid) -> Result<Trajectory<StateVec>> {
    rk4_forward(|_, x, uk| p.state_rhs(x, uk), x0, u, u.grid())
}

pub fn solve_adjoint(
    p: &ModelParams,
    x: &Trajectory<StateVec>,
    u: &ControlGrid,
    mode: AdjointMode,
    which: CostKind,
) -> Result<Trajectory<AdjointVec>> {
    rk4_backward(
        |_, l, xk, uk| p.adjoint_rhs(xk, l, uk, mode, which),
        AdjointVec::ZERO,
        x,
        u,
        u.grid(),
    )
}

/// Relaxed projection update of the control.
pub fn update_control(
    prev: &ControlGrid,
    x: &Trajectory<StateVec>,
    l: &Trajectory<AdjointVec>,
    p: &ModelParams,
    relaxation: f64,
) -> Result<ControlGrid> {
    let values = prev
        .values()
        .iter()
        .zip(&x.samples)
        .zip(&l.samples)
        .map(|((&u_old, xk), lk)| {
            let fresh = p.pointwise_optimal_control(xk, lk)?;
            Ok(project_unit((1.0 - relaxation) * u_old + relaxation * fresh))
        })
        .collect::<Result<Vec<_>>>()?;
    ControlGrid::new(*prev.grid(), values)
}

/// `sum |next - prev| / sum |next|` for one sampled function, `0` when both
/// sums vanish.
pub fn relative_change(prev: &[f64], next: &[f64]) -> f64 {
    let diff: f64 = prev.iter().zip(next).map(|(a, b)| (b - a).abs()).sum();
    let norm: f64 = next.iter().map(|v| v.abs()).sum();
    if diff == 0.0 {
        0.0
    } else {
        diff / norm
    }
}

/// Passes iff `tol * sum|next_v| - sum|next_v - prev_v| >= 0` for every
/// tracked function `v`.
pub fn convergence_test(prev: &[Vec<f64>], next: &[Vec<f64>], tol: f64) -> bool {
    prev.iter().zip(next).all(|(a, b)| {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (y - x).abs()).sum();
        let norm: f64 = b.iter().map(|v| v.abs()).sum();
        tol * norm - diff >= 0.0
    })
}

/// Splits the state, costate, and control into the nine component series
/// tracked by the convergence test.
pub fn tracked(
    x: &Trajectory<StateVec>,
    l: &Trajectory<AdjointVec>,
    u: &ControlGrid,
) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = (0..9).map(|_| Vec::with_capacity(u.values().len())).collect();
    for (xk, lk) in x.samples.iter().zip(&l.samples) {
        for (i, v) in xk.components().chain(lk.components()).enumerate() {
            out[i].push(v);
        }
    }
    out[8] = u.values().to_vec();
    out
}

fn max_relative_change(prev: &[Vec<f64>], next: &[Vec<f64>]) -> f64 {
    prev.iter()
        .zip(next)
        .map(|(a, b)| relative_change(a, b))
        .fold(0.0, f64::max)
}

/// Runs the forward-backward sweep.
///
/// On `max_iters` without convergence the last iterate is returned inside
/// [`Error::NotConverged`].
pub fn fbs_solve(p: &ModelParams, x0: StateVec, grid: &TimeGrid, cfg: &SweepConfig) -> Result<SolveResult> {
    p.validate()?;
    cfg.validate()?;
    let mut u = match &cfg.initial_guess {
        Some(g) if g.grid() == grid => g.clone(),
        Some(g) => {
            return Err(Error::invariant(
                "initial_guess",
                format!("guess grid {:?} differs from solve grid {grid:?}", g.grid()),
            ))
        }
        None => ControlGrid::constant(*grid, 0.0),
    };
    let mut x = solve_state(p, x0, &u)?;
    let mut l = solve_adjoint(p, &x, &u, cfg.adjoint_mode, cfg.cost)?;
    let mut series = tracked(&x, &l, &u);

    let mut residuals = Vec::new();
    let mut cost_history = vec![integrate_cost(p, &x, &u, cfg.cost)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        let u_next = update_control(&u, &x, &l, p, cfg.relaxation)?;
        let x_next = solve_state(p, x0, &u_next)?;
        let l_next = solve_adjoint(p, &x_next, &u_next, cfg.adjoint_mode, cfg.cost)?;
        let next_series = tracked(&x_next, &l_next, &u_next);

        residuals.push(max_relative_change(&series, &next_series));
        converged = convergence_test(&series, &next_series, cfg.tol);
        cost_history.push(integrate_cost(p, &x_next, &u_next, cfg.cost));
        (u, x, l, series) = (u_next, x_next, l_next, next_series);
        if converged {
            break;
        }
    }

    let result = SolveResult {
        cost_value: *cost_history.last().expect("initial cost recorded"),
        state_traj: x,
        adjoint_traj: l,
        control: u,
        iterations,
        converged,
        per_iteration_residuals: residuals,
        cost_history,
    };
    if converged {
        Ok(result)
    } else {
        Err(Error::NotConverged(Box::new(result)))
    }
}
