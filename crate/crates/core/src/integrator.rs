//! Fixed-step classical Runge-Kutta integration on a uniform grid.
//!
//! States are integrated forward from `t0`, costates backward from `tf`.
//! Grid-valued inputs (the control, and the state trajectory when
//! integrating costates) are sampled by linear interpolation at the stage
//! times, which on a uniform grid means the node value at the step ends
//! and the average of the two nodes at the half step.

use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{project_unit, AdjointVec, CostKind, ModelParams, StateVec};

/// Forward states that dip below `-NEGATIVITY_FLOOR * (initial total)` are
/// rejected.
pub const NEGATIVITY_FLOOR: f64 = 1e-9;

/// A vector quantity the integrator can step.
pub trait OdeVector: Copy + Add<Output = Self> + Mul<f64, Output = Self> + Send + Sync {
    fn components(&self) -> impl Iterator<Item = f64>;

    fn all_finite(&self) -> bool {
        self.components().all(f64::is_finite)
    }
}

impl OdeVector for f64 {
    fn components(&self) -> impl Iterator<Item = f64> {
        std::iter::once(*self)
    }
}

impl OdeVector for StateVec {
    fn components(&self) -> impl Iterator<Item = f64> {
        self.to_array().into_iter()
    }
}

impl OdeVector for AdjointVec {
    fn components(&self) -> impl Iterator<Item = f64> {
        self.to_array().into_iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub tf: f64,
    pub n: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, tf: f64, n: usize) -> Result<Self> {
        if !(t0.is_finite() && tf.is_finite()) || tf <= t0 {
            return Err(Error::invariant("tf", format!("need finite t0 < tf, got t0 = {t0}, tf = {tf}")));
        }
        if n == 0 {
            return Err(Error::invariant("n", "grid needs n >= 1 intervals"));
        }
        Ok(Self { t0, tf, n })
    }

    pub fn step(&self) -> f64 {
        (self.tf - self.t0) / self.n as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n {
            self.tf
        } else {
            self.t0 + k as f64 * self.step()
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n).map(|k| self.time(k))
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Control samples on the nodes of a [`TimeGrid`], each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlGrid {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl ControlGrid {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invariant(
                "values",
                format!("control needs {} samples, got {}", grid.len(), values.len()),
            ));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invariant("values", format!("control sample {v} outside [0,1]")));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: TimeGrid, value: f64) -> Self {
        Self {
            grid,
            values: vec![project_unit(value); grid.len()],
        }
    }

    /// Builds a control by projecting arbitrary samples onto `[0, 1]`.
    pub fn projected(grid: TimeGrid, values: impl IntoIterator<Item = f64>) -> Result<Self> {
        Self::new(grid, values.into_iter().map(project_unit).collect())
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Samples of a state or costate on every node of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<V> {
    pub grid: TimeGrid,
    pub samples: Vec<V>,
}

impl<V: Copy> Trajectory<V> {
    pub fn first(&self) -> V {
        self.samples[0]
    }

    pub fn last(&self) -> V {
        self.samples[self.samples.len() - 1]
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &V)> {
        self.grid.times().zip(self.samples.iter())
    }
}

fn check_same_grid(a: &TimeGrid, b: &TimeGrid) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::invariant("grid", format!("grids differ: {a:?} vs {b:?}")))
    }
}

/// Integrates `x' = rhs(t, x, u(t))` forward from `x0` with classical RK4.
pub fn rk4_forward<V, F>(rhs: F, x0: V, control: &ControlGrid, grid: &TimeGrid) -> Result<Trajectory<V>>
where
    V: OdeVector,
    F: Fn(f64, &V, f64) -> Result<V>,
{
    check_same_grid(control.grid(), grid)?;
    let h = grid.step();
    let u = control.values();
    let floor = -NEGATIVITY_FLOOR * x0.components().sum::<f64>().abs();

    let mut samples = Vec::with_capacity(grid.len());
    samples.push(x0);
    let mut x = x0;
    for k in 0..grid.n {
        let t = grid.time(k);
        let u_mid = 0.5 * (u[k] + u[k + 1]);
        let k1 = rhs(t, &x, u[k])?;
        let k2 = rhs(t + 0.5 * h, &(x + k1 * (0.5 * h)), u_mid)?;
        let k3 = rhs(t + 0.5 * h, &(x + k2 * (0.5 * h)), u_mid)?;
        let k4 = rhs(t + h, &(x + k3 * h), u[k + 1])?;
        x = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);

        let t_next = grid.time(k + 1);
        if !x.all_finite() {
            return Err(Error::NonFinite { t: t_next });
        }
        if let Some((component, value)) = x.components().enumerate().find(|(_, v)| *v < floor) {
            return Err(Error::NegativeState {
                t: t_next,
                component,
                value,
                floor,
            });
        }
        samples.push(x);
    }
    Ok(Trajectory { grid: *grid, samples })
}

/// Integrates `l' = rhs(t, l, x(t), u(t))` backward from `l(tf) = l_tf`.
///
/// Samples are returned in forward time order, so the last one is `l_tf`.
pub fn rk4_backward<V, S, F>(
    rhs: F,
    l_tf: V,
    x: &Trajectory<S>,
    control: &ControlGrid,
    grid: &TimeGrid,
) -> Result<Trajectory<V>>
where
    V: OdeVector,
    S: OdeVector,
    F: Fn(f64, &V, &S, f64) -> Result<V>,
{
    check_same_grid(control.grid(), grid)?;
    check_same_grid(&x.grid, grid)?;
    let h = grid.step();
    let u = control.values();
    let xs = &x.samples;

    let mut samples = vec![l_tf; grid.len()];
    let mut l = l_tf;
    for k in (0..grid.n).rev() {
        let t = grid.time(k + 1);
        let x_mid = (xs[k] + xs[k + 1]) * 0.5;
        let u_mid = 0.5 * (u[k] + u[k + 1]);
        let k1 = rhs(t, &l, &xs[k + 1], u[k + 1])?;
        let k2 = rhs(t - 0.5 * h, &(l + k1 * (-0.5 * h)), &x_mid, u_mid)?;
        let k3 = rhs(t - 0.5 * h, &(l + k2 * (-0.5 * h)), &x_mid, u_mid)?;
        let k4 = rhs(t - h, &(l + k3 * (-h)), &xs[k], u[k])?;
        l = l + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (-h / 6.0);
        if !l.all_finite() {
            return Err(Error::NonFinite { t: grid.time(k) });
        }
        samples[k] = l;
    }
    Ok(Trajectory { grid: *grid, samples })
}

/// Composite trapezoidal rule over equally spaced samples.
pub fn trapezoid(h: f64, values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    values
        .enumerate()
        .map(|(i, v)| if i == 0 || i + 1 == n { 0.5 * v } else { v })
        .sum::<f64>()
        * h
}

/// Objective value of a state trajectory under a control, by the trapezoidal
/// rule on the grid nodes.
pub fn integrate_cost(p: &ModelParams, x: &Trajectory<StateVec>, u: &ControlGrid, which: CostKind) -> f64 {
    let integrand = x
        .samples
        .iter()
        .zip(u.values())
        .map(|(s, &uk)| p.running_cost(s, uk, which));
    trapezoid(x.grid.step(), integrand)
}

/// Trapezoid-weighted `L2` inner product of two grid functions.
pub fn l2_inner(grid: &TimeGrid, a: &[f64], b: &[f64]) -> f64 {
    trapezoid(grid.step(), a.iter().zip(b).map(|(x, y)| x * y))
}
