//! Independent checks on the sweep solution.
//!
//! Two oracles live here. The first compares the costate-based control
//! gradient `dH/du` against central finite differences of the discretised
//! objective. The second is a direct method: projected gradient descent with
//! Armijo backtracking on the same grid, which never touches the control
//! law and so gives an independent estimate of the optimal cost.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{integrate_cost, l2_inner, ControlGrid, TimeGrid};
use crate::model::{AdjointMode, CostKind, ModelParams, StateVec};
use crate::parallel::Execution;
use crate::sweep::{fbs_solve, solve_adjoint, solve_state, SolveResult, SweepConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub directions_tested: usize,
    pub max_rel_error: f64,
    pub per_direction_errors: Vec<f64>,
}

impl GradCheckReport {
    /// Fraction of directions whose relative error is at most `tol`.
    pub fn fraction_within(&self, tol: f64) -> f64 {
        let ok = self.per_direction_errors.iter().filter(|&&e| e <= tol).count();
        ok as f64 / self.directions_tested as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidationReport {
    pub j_fbs: f64,
    pub j_direct: f64,
    pub rel_gap: f64,
    pub control_l2_distance: f64,
    pub fbs_iterations: usize,
    pub direct_iterations: usize,
}

impl CrossValidationReport {
    pub fn compare(fbs: &SolveResult, direct: &SolveResult) -> Self {
        let grid = fbs.control.grid();
        let diff: Vec<f64> = fbs
            .control
            .values()
            .iter()
            .zip(direct.control.values())
            .map(|(a, b)| a - b)
            .collect();
        Self {
            j_fbs: fbs.cost_value,
            j_direct: direct.cost_value,
            rel_gap: (fbs.cost_value - direct.cost_value).abs() / fbs.cost_value.abs().max(1.0),
            control_l2_distance: l2_inner(grid, &diff, &diff).sqrt(),
            fbs_iterations: fbs.iterations,
            direct_iterations: direct.iterations,
        }
    }
}

/// Objective value of `u` after a forward solve.
pub fn evaluate_cost(p: &ModelParams, x0: StateVec, u: &ControlGrid, which: CostKind) -> Result<f64> {
    let x = solve_state(p, x0, u)?;
    Ok(integrate_cost(p, &x, u, which))
}

/// Grid samples of `dH/du` along the trajectory driven by `u`, with the
/// exact costate.
pub fn cost_gradient_adjoint(
    p: &ModelParams,
    x0: StateVec,
    u: &ControlGrid,
    grid: &TimeGrid,
    which: CostKind,
) -> Result<Vec<f64>> {
    if u.grid() != grid {
        return Err(Error::invariant("grid", "control grid differs from gradient grid"));
    }
    let x = solve_state(p, x0, u)?;
    let l = solve_adjoint(p, &x, u, AdjointMode::Exact, which)?;
    gradient_along(p, &x.samples, &l.samples, u.values())
}

fn gradient_along(
    p: &ModelParams,
    x: &[StateVec],
    l: &[crate::model::AdjointVec],
    u: &[f64],
) -> Result<Vec<f64>> {
    x.iter()
        .zip(l)
        .zip(u)
        .map(|((xk, lk), &uk)| p.hamiltonian_control_derivative(xk, lk, uk))
        .collect()
}

/// Smooth random perturbations: a few low-frequency Fourier modes with
/// decaying random amplitudes, scaled to unit sup norm.
pub fn random_smooth_directions(grid: &TimeGrid, count: usize, seed: u64) -> Vec<Vec<f64>> {
    const MODES: usize = 6;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = grid.tf - grid.t0;
    (0..count)
        .map(|_| {
            let coeffs: Vec<(f64, f64)> = (0..MODES)
                .map(|j| {
                    let damp = 1.0 / (1.0 + j as f64);
                    (rng.gen_range(-1.0..1.0) * damp, rng.gen_range(-1.0..1.0) * damp)
                })
                .collect();
            let v: Vec<f64> = grid
                .times()
                .map(|t| {
                    let s = std::f64::consts::PI * (t - grid.t0) / span;
                    coeffs
                        .iter()
                        .enumerate()
                        .map(|(j, (a, b))| a * (j as f64 * s).cos() + b * (j as f64 * s).sin())
                        .sum()
                })
                .collect();
            let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if peak > 0.0 {
                v.into_iter().map(|x| x / peak).collect()
            } else {
                v
            }
        })
        .collect()
}

/// Compares `<grad, v>` with `(J(u + eps v) - J(u - eps v)) / (2 eps)` for
/// each direction. Samples where `u +- eps v` would leave `[0, 1]` are
/// zeroed in the direction first.
pub fn directional_check<J>(
    cost: J,
    gradient: &[f64],
    u: &ControlGrid,
    directions: Vec<Vec<f64>>,
    epsilon: f64,
    exec: Execution,
) -> Result<GradCheckReport>
where
    J: Fn(&ControlGrid) -> Result<f64> + Sync + Send,
{
    if !(epsilon > 0.0) {
        return Err(Error::invariant("epsilon", format!("must be > 0, got {epsilon}")));
    }
    if directions.is_empty() {
        return Err(Error::invariant("n_directions", "must be >= 1"));
    }
    let grid = *u.grid();
    let mut masked = Vec::with_capacity(directions.len());
    for (index, v) in directions.into_iter().enumerate() {
        let v: Vec<f64> = v
            .iter()
            .zip(u.values())
            .map(|(&d, &uk)| {
                if uk - epsilon * d.abs() >= 0.0 && uk + epsilon * d.abs() <= 1.0 {
                    d
                } else {
                    0.0
                }
            })
            .collect();
        if v.len() != grid.len() || v.iter().all(|&d| d == 0.0) {
            return Err(Error::DegenerateDirection { index });
        }
        masked.push(v);
    }

    let errors = exec.map(masked, |v| -> Result<f64> {
        let shifted = |sign: f64| {
            ControlGrid::new(
                grid,
                u.values().iter().zip(&v).map(|(uk, d)| uk + sign * epsilon * d).collect(),
            )
        };
        let j_plus = cost(&shifted(1.0)?)?;
        let j_minus = cost(&shifted(-1.0)?)?;
        let fd = (j_plus - j_minus) / (2.0 * epsilon);
        let adj = l2_inner(&grid, gradient, &v);
        let scale = fd.abs().max(adj.abs());
        Ok(if scale == 0.0 { 0.0 } else { (fd - adj).abs() / scale })
    });
    let per_direction_errors = errors.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(GradCheckReport {
        directions_tested: per_direction_errors.len(),
        max_rel_error: per_direction_errors.iter().copied().fold(0.0, f64::max),
        per_direction_errors,
    })
}

/// Finite-difference check of [`cost_gradient_adjoint`] along
/// `n_directions` seeded smooth random directions.
#[allow(clippy::too_many_arguments)]
pub fn finite_difference_gradient_check(
    p: &ModelParams,
    x0: StateVec,
    u: &ControlGrid,
    grid: &TimeGrid,
    which: CostKind,
    n_directions: usize,
    epsilon: f64,
    seed: u64,
    exec: Execution,
) -> Result<GradCheckReport> {
    let directions = random_smooth_directions(grid, n_directions, seed);
    check_directions(p, x0, u, grid, which, directions, epsilon, exec)
}

/// As [`finite_difference_gradient_check`] with caller-chosen directions.
#[allow(clippy::too_many_arguments)]
pub fn check_directions(
    p: &ModelParams,
    x0: StateVec,
    u: &ControlGrid,
    grid: &TimeGrid,
    which: CostKind,
    directions: Vec<Vec<f64>>,
    epsilon: f64,
    exec: Execution,
) -> Result<GradCheckReport> {
    let gradient = cost_gradient_adjoint(p, x0, u, grid, which)?;
    directional_check(|w| evaluate_cost(p, x0, w, which), &gradient, u, directions, epsilon, exec)
}

/// Settings for [`direct_solve_projected_gradient`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectConfig {
    pub max_iters: usize,
    /// First trial step; `None` uses `1 / c`.
    pub initial_step: Option<f64>,
    pub shrink: f64,
    /// Factor applied to the step after an accepted iteration.
    pub grow: f64,
    /// Armijo constant `sigma` in `J(u+) <= J(u) - sigma/alpha |u+ - u|^2`.
    pub sufficient_decrease: f64,
    pub max_backtracks: usize,
    /// Stop once `|u - P(u - grad)| <= stationarity_tol * (1 + |J|)`.
    pub stationarity_tol: f64,
    pub initial_guess: Option<ControlGrid>,
}

impl Default for DirectConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            initial_step: None,
            shrink: 0.5,
            grow: 2.0,
            sufficient_decrease: 1e-4,
            max_backtracks: 60,
            stationarity_tol: 1e-4,
            initial_guess: None,
        }
    }
}

/// Bound-aware gradient component: only the part that points into the box survives.
fn projected_component(u: f64, g: f64) -> f64 {
    if u <= 0.0 {
        g.min(0.0)
    } else if u >= 1.0 {
        g.max(0.0)
    } else {
        g
    }
}

/// Projected gradient descent on the discretised control.
pub fn direct_solve_projected_gradient(
    p: &ModelParams,
    x0: StateVec,
    grid: &TimeGrid,
    which: CostKind,
    cfg: &DirectConfig,
) -> Result<SolveResult> {
    p.validate()?;
    if !(cfg.shrink > 0.0 && cfg.shrink < 1.0) || cfg.grow < 1.0 {
        return Err(Error::invariant("shrink", "need 0 < shrink < 1 and grow >= 1"));
    }
    let mut u = match &cfg.initial_guess {
        Some(g) if g.grid() == grid => g.clone(),
        Some(_) => return Err(Error::invariant("initial_guess", "guess grid differs from solve grid")),
        None => ControlGrid::constant(*grid, 0.0),
    };
    let base_step = cfg.initial_step.unwrap_or(1.0 / p.c);
    let mut alpha = base_step;

    let mut x = solve_state(p, x0, &u)?;
    let mut cost = integrate_cost(p, &x, &u, which);
    let mut l = solve_adjoint(p, &x, &u, AdjointMode::Exact, which)?;
    let mut grad = gradient_along(p, &x.samples, &l.samples, u.values())?;

    let mut cost_history = vec![cost];
    let mut residuals = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    loop {
        let pg: Vec<f64> = u
            .values()
            .iter()
            .zip(&grad)
            .map(|(&uk, &gk)| projected_component(uk, gk))
            .collect();
        let pg_norm = l2_inner(grid, &pg, &pg).sqrt();
        residuals.push(pg_norm);
        if pg_norm <= cfg.stationarity_tol * (1.0 + cost.abs()) {
            converged = true;
            break;
        }
        if iterations >= cfg.max_iters {
            break;
        }

        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let trial = ControlGrid::projected(
                *grid,
                u.values().iter().zip(&grad).map(|(uk, gk)| uk - alpha * gk),
            )?;
            let step: Vec<f64> = trial.values().iter().zip(u.values()).map(|(a, b)| a - b).collect();
            let step_sq = l2_inner(grid, &step, &step);
            let x_trial = solve_state(p, x0, &trial)?;
            let j_trial = integrate_cost(p, &x_trial, &trial, which);
            if j_trial <= cost - cfg.sufficient_decrease / alpha * step_sq {
                accepted = Some((trial, x_trial, j_trial));
                break;
            }
            alpha *= cfg.shrink;
        }
        let Some((trial, x_trial, j_trial)) = accepted else {
            // line search stalled; the gradient no longer yields descent
            break;
        };

        iterations += 1;
        u = trial;
        x = x_trial;
        cost = j_trial;
        cost_history.push(cost);
        l = solve_adjoint(p, &x, &u, AdjointMode::Exact, which)?;
        grad = gradient_along(p, &x.samples, &l.samples, u.values())?;
        alpha *= cfg.grow;
    }

    let result = SolveResult {
        state_traj: x,
        adjoint_traj: l,
        control: u,
        cost_value: cost,
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

/// Solves with the sweep and with the direct method on the same grid and
/// cost, then compares the two.
pub fn cross_validate(
    p: &ModelParams,
    x0: StateVec,
    grid: &TimeGrid,
    cfg: &SweepConfig,
    direct: &DirectConfig,
) -> Result<CrossValidationReport> {
    let fbs = fbs_solve(p, x0, grid, cfg)?;
    let dir = direct_solve_projected_gradient(p, x0, grid, cfg.cost, direct)?;
    Ok(CrossValidationReport::compare(&fbs, &dir))
}
