//! Physical and dimensionless run parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters attached to a run: transport coefficients, averaging-domain
/// radius, analysis horizon, and the dimensionless groups derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    /// Kinematic viscosity.
    pub nu: f64,
    /// Magnetic resistivity.
    pub eta: f64,
    /// Radius of the averaging domain B(0, R0).
    pub r0: f64,
    /// Analysis time horizon.
    pub t_horizon: f64,
    /// Reynolds number.
    pub re: f64,
    /// Magnetic Reynolds number.
    pub rm: f64,
    /// Hartmann number.
    pub m: f64,
}

impl PhysParams {
    pub fn new(nu: f64, eta: f64, r0: f64, t_horizon: f64, re: f64, rm: f64, m: f64) -> Result<Self> {
        let p = Self { nu, eta, r0, t_horizon, re, rm, m };
        p.validate()?;
        Ok(p)
    }

    /// Dimensional parameters with the dimensionless groups echoing them
    /// (Re = 1/nu, Rm = 1/eta, unit Hartmann number).
    pub fn from_transport(nu: f64, eta: f64, r0: f64, t_horizon: f64) -> Result<Self> {
        Self::new(nu, eta, r0, t_horizon, 1.0 / nu, 1.0 / eta, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("nu", self.nu),
            ("eta", self.eta),
            ("r0", self.r0),
            ("t_horizon", self.t_horizon),
            ("re", self.re),
            ("rm", self.rm),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Params(format!("{name} must be finite and positive, got {v}")));
            }
        }
        if !self.m.is_finite() || self.m < 0.0 {
            return Err(Error::Params(format!(
                "hartmann number must be finite and non-negative, got {}",
                self.m
            )));
        }
        Ok(())
    }

    /// Ratio of kinematic viscosity to magnetic resistivity.
    pub fn prandtl(&self) -> f64 {
        self.nu / self.eta
    }

    /// Lorentz coupling S = M^2 / (Re Rm).
    pub fn coupling(&self) -> f64 {
        self.m * self.m / (self.re * self.rm)
    }

    /// Diffusive time across the averaging domain.
    pub fn diffusive_time(&self) -> f64 {
        self.r0 * self.r0 / self.nu
    }

    /// True when the horizon covers at least one diffusive time; stamped on
    /// every report so short runs are never silently over-interpreted.
    pub fn time_scale_ok(&self) -> bool {
        self.t_horizon >= self.diffusive_time()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_groups_are_exact() {
        let p = PhysParams::new(0.01, 0.02, 1.0, 100.0, 100.0, 50.0, 10.0).unwrap();
        assert_eq!(p.prandtl(), 0.5);
        assert_eq!(p.coupling(), 100.0 / 5000.0);
        assert_eq!(p.diffusive_time(), 100.0);
        assert!(p.time_scale_ok());
    }

    #[test]
    fn short_horizon_trips_the_flag() {
        let p = PhysParams::new(0.01, 0.01, 1.0, 99.9, 100.0, 100.0, 1.0).unwrap();
        assert!(!p.time_scale_ok());
    }

    #[test]
    fn rejects_nonpositive_transport() {
        assert!(PhysParams::new(0.0, 0.01, 1.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(PhysParams::new(0.01, -1.0, 1.0, 1.0, 1.0, 1.0, 1.0).is_err());
    }
}
