//! Controlled host-vector transmission model with insecticide-treated nets.
//!
//! Humans are split into susceptible and infectious classes, as are
//! mosquitoes. Net usage `b` lowers the contact rate and raises mosquito
//! mortality; the supervision control `u` scales new human infections by
//! `1 - u`.
//!
//! Everything here is a pure function of its arguments.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the tabulated ITN mortality entry enters the vector death rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItnMortalityPolicy {
    /// `mu_vb = mu_v1 + mu_max * b`
    #[default]
    Product,
    /// `mu_vb = mu_v1 + mu_max`, the tabulated entry is the whole term.
    FixedTerm,
}

/// Which costate system drives the backward sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjointMode {
    /// The published costate equations, with the forces of infection
    /// treated as frozen coefficients.
    #[default]
    PaperStated,
    /// `-dH/dx` including the state dependence of both forces of infection
    /// and of `N_h`.
    Exact,
}

/// Objective functional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    /// `A1 I_h + C/2 u^2`
    #[default]
    J1,
    /// `A1 I_h + A2 I_v + C/2 u^2`
    J2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Human recruitment, humans/day.
    pub lambda_h_rec: f64,
    /// Mosquito recruitment, mosquitoes/day.
    pub lambda_v_rec: f64,
    pub mu_h: f64,
    pub delta_h: f64,
    pub gamma_h: f64,
    pub mu_v1: f64,
    pub mu_max: f64,
    /// Proportion of ITN usage.
    pub b: f64,
    pub beta_max: f64,
    pub p1: f64,
    pub p2: f64,
    pub a1: f64,
    pub a2: f64,
    pub c: f64,
    pub itn_mortality_policy: ItnMortalityPolicy,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            lambda_h_rec: 1e3 / (70.0 * 365.0),
            lambda_v_rec: 1e4 / 21.0,
            mu_h: 1.0 / (70.0 * 365.0),
            delta_h: 1e-3,
            gamma_h: 0.25,
            mu_v1: 1.0 / 21.0,
            mu_max: 1.0 / 21.0,
            b: 0.75,
            beta_max: 0.1,
            p1: 1.0,
            p2: 1.0,
            a1: 25.0,
            a2: 25.0,
            c: 50.0,
            itn_mortality_policy: ItnMortalityPolicy::Product,
        }
    }
}

/// The seven net-usage levels of the published parameter table.
pub const TABLE_B_VALUES: [f64; 7] = [0.25, 0.3, 0.4, 0.5, 0.6, 0.7, 0.75];

macro_rules! four_vector {
    ($name:ident { $a:ident, $b:ident, $c:ident, $d:ident }) => {
        impl $name {
            pub const ZERO: Self = Self::new(0.0, 0.0, 0.0, 0.0);

            pub const fn new($a: f64, $b: f64, $c: f64, $d: f64) -> Self {
                Self { $a, $b, $c, $d }
            }

            pub const fn to_array(self) -> [f64; 4] {
                [self.$a, self.$b, self.$c, self.$d]
            }

            pub const fn from_array(v: [f64; 4]) -> Self {
                Self::new(v[0], v[1], v[2], v[3])
            }

            pub fn dot<T: Into<[f64; 4]>>(&self, other: T) -> f64 {
                let o = other.into();
                self.to_array().iter().zip(o).map(|(x, y)| x * y).sum()
            }

            pub fn is_finite(&self) -> bool {
                self.to_array().iter().all(|v| v.is_finite())
            }
        }

        impl From<$name> for [f64; 4] {
            fn from(v: $name) -> Self {
                v.to_array()
            }
        }

        impl Add for $name {
            type Output = Self;
            fn add(self, o: Self) -> Self {
                Self::new(self.$a + o.$a, self.$b + o.$b, self.$c + o.$c, self.$d + o.$d)
            }
        }

        impl Sub for $name {
            type Output = Self;
            fn sub(self, o: Self) -> Self {
                Self::new(self.$a - o.$a, self.$b - o.$b, self.$c - o.$c, self.$d - o.$d)
            }
        }

        impl Mul<f64> for $name {
            type Output = Self;
            fn mul(self, k: f64) -> Self {
                Self::new(self.$a * k, self.$b * k, self.$c * k, self.$d * k)
            }
        }
    };
}

/// Population compartments `(S_h, I_h, S_v, I_v)` at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateVec {
    pub s_h: f64,
    pub i_h: f64,
    pub s_v: f64,
    pub i_v: f64,
}

four_vector!(StateVec { s_h, i_h, s_v, i_v });

impl StateVec {
    /// Initial condition from the published parameter table.
    pub const TABLE_INITIAL: StateVec = StateVec::new(800.0, 200.0, 4000.0, 900.0);

    pub fn n_h(&self) -> f64 {
        self.s_h + self.i_h
    }

    pub fn n_v(&self) -> f64 {
        self.s_v + self.i_v
    }
}

/// Costate values `(l1, l2, l3, l4)` paired with `(S_h, I_h, S_v, I_v)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AdjointVec {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
}

four_vector!(AdjointVec { l1, l2, l3, l4 });

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("lambda_h_rec", self.lambda_h_rec),
            ("lambda_v_rec", self.lambda_v_rec),
            ("mu_h", self.mu_h),
            ("delta_h", self.delta_h),
            ("gamma_h", self.gamma_h),
            ("mu_max", self.mu_max),
            ("beta_max", self.beta_max),
            ("a1", self.a1),
            ("a2", self.a2),
        ];
        for (key, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invariant(key, format!("{key} must be finite and >= 0, got {v}")));
            }
        }
        for (key, v) in [("b", self.b), ("p1", self.p1), ("p2", self.p2)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invariant(key, format!("{key} must lie in [0,1], got {v}")));
            }
        }
        if !(self.mu_v1.is_finite() && self.mu_v1 > 0.0) {
            return Err(Error::invariant("mu_v1", format!("mu_v1 must be > 0, got {}", self.mu_v1)));
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::invariant("c", format!("c must be > 0, got {}", self.c)));
        }
        Ok(())
    }

    /// Mosquito-human contact rate `beta = beta_max (1 - b)`.
    pub fn contact_rate(&self) -> f64 {
        self.beta_max * (1.0 - self.b)
    }

    /// Mosquito death rate `mu_vb` under the configured ITN policy.
    pub fn vector_mortality(&self) -> f64 {
        match self.itn_mortality_policy {
            ItnMortalityPolicy::Product => self.mu_v1 + self.mu_max * self.b,
            ItnMortalityPolicy::FixedTerm => self.mu_v1 + self.mu_max,
        }
    }

    /// `(lambda_h, lambda_v)`: per-capita infection rates of susceptible
    /// humans and susceptible mosquitoes.
    pub fn forces_of_infection(&self, x: &StateVec) -> Result<(f64, f64)> {
        let n_h = x.n_h();
        if !(n_h > 0.0) {
            return Err(Error::NonpositivePopulation { n_h });
        }
        let beta = self.contact_rate();
        Ok((self.p1 * beta * x.i_v / n_h, self.p2 * beta * x.i_h / n_h))
    }

    /// Time derivative of the state under control value `u`.
    ///
    /// The `I_v` equation keeps the published `p2 * lambda_v * S_v` form,
    /// so `p2` appears twice there.
    pub fn state_rhs(&self, x: &StateVec, u: f64) -> Result<StateVec> {
        let (lam_h, lam_v) = self.forces_of_infection(x)?;
        let mu_vb = self.vector_mortality();
        let new_human = (1.0 - u) * lam_h * x.s_h;
        Ok(StateVec {
            s_h: self.lambda_h_rec - new_human + self.gamma_h * x.i_h - self.mu_h * x.s_h,
            i_h: new_human - (self.mu_h + self.gamma_h + self.delta_h) * x.i_h,
            s_v: self.lambda_v_rec - lam_v * x.s_v - mu_vb * x.s_v,
            i_v: self.p2 * lam_v * x.s_v - mu_vb * x.i_v,
        })
    }

    pub fn running_cost(&self, x: &StateVec, u: f64, which: CostKind) -> f64 {
        let base = self.a1 * x.i_h + 0.5 * self.c * u * u;
        match which {
            CostKind::J1 => base,
            CostKind::J2 => base + self.a2 * x.i_v,
        }
    }

    pub fn hamiltonian(&self, x: &StateVec, l: &AdjointVec, u: f64, which: CostKind) -> Result<f64> {
        let f = self.state_rhs(x, u)?;
        Ok(self.running_cost(x, u, which) + l.dot(f))
    }

    /// `dH/du = C u - lambda_h S_h (l2 - l1)`.
    pub fn hamiltonian_control_derivative(&self, x: &StateVec, l: &AdjointVec, u: f64) -> Result<f64> {
        let (lam_h, _) = self.forces_of_infection(x)?;
        Ok(self.c * u - lam_h * x.s_h * (l.l2 - l.l1))
    }

    /// Time derivative of the costate.
    pub fn adjoint_rhs(
        &self,
        x: &StateVec,
        l: &AdjointVec,
        u: f64,
        mode: AdjointMode,
        which: CostKind,
    ) -> Result<AdjointVec> {
        let a2 = match which {
            CostKind::J1 => 0.0,
            CostKind::J2 => self.a2,
        };
        let mu_vb = self.vector_mortality();
        let k_h = self.mu_h + self.gamma_h + self.delta_h;
        match mode {
            AdjointMode::PaperStated => {
                let (lam_h, lam_v) = self.forces_of_infection(x)?;
                Ok(AdjointVec {
                    l1: l.l1 * ((1.0 - u) * lam_h + self.mu_h) - l.l2 * lam_h * (1.0 - u),
                    l2: -self.a1 - l.l1 * self.gamma_h + l.l2 * k_h,
                    l3: l.l3 * (lam_v + mu_vb) - l.l4 * lam_v,
                    l4: -a2 + l.l4 * mu_vb,
                })
            }
            AdjointMode::Exact => {
                let n_h = x.n_h();
                if !(n_h > 0.0) {
                    return Err(Error::NonpositivePopulation { n_h });
                }
                let beta = self.contact_rate();
                let n2 = n_h * n_h;
                // new human infections F = (1-u) p1 beta I_v S_h / N_h
                let kf = (1.0 - u) * self.p1 * beta;
                let df_dsh = kf * x.i_v * x.i_h / n2;
                let df_dih = -kf * x.i_v * x.s_h / n2;
                let df_div = kf * x.s_h / n_h;
                // new vector infections G = p2 beta I_h S_v / N_h
                let kg = self.p2 * beta;
                let dg_dsh = -kg * x.i_h * x.s_v / n2;
                let dg_dih = kg * x.s_v * x.s_h / n2;
                let dg_dsv = kg * x.i_h / n_h;

                let wf = l.l2 - l.l1;
                let wg = self.p2 * l.l4 - l.l3;
                let dh_dsh = wf * df_dsh + wg * dg_dsh - self.mu_h * l.l1;
                let dh_dih = self.a1 + wf * df_dih + wg * dg_dih + self.gamma_h * l.l1 - k_h * l.l2;
                let dh_dsv = wg * dg_dsv - mu_vb * l.l3;
                let dh_div = a2 + wf * df_div - mu_vb * l.l4;
                Ok(AdjointVec::new(-dh_dsh, -dh_dih, -dh_dsv, -dh_div))
            }
        }
    }

    /// Pointwise minimiser of the Hamiltonian over `u` in `[0, 1]`.
    pub fn pointwise_optimal_control(&self, x: &StateVec, l: &AdjointVec) -> Result<f64> {
        let (lam_h, _) = self.forces_of_infection(x)?;
        Ok(project_unit(lam_h * x.s_h * (l.l2 - l.l1) / self.c))
    }

    /// Disease-free equilibrium of the uncontrolled system.
    pub fn disease_free_state(&self) -> StateVec {
        StateVec::new(
            self.lambda_h_rec / self.mu_h,
            0.0,
            self.lambda_v_rec / self.vector_mortality(),
            0.0,
        )
    }
}

/// Clamp to the admissible control box `[0, 1]`. NaN maps to 0.
pub fn project_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}
