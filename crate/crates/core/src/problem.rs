//! A problem instance: dimension, exponent, data size and profile.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param::Param;
use crate::profiles::InitialProfile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub n: usize,
    pub p: Param,
    pub kappa: f64,
    pub profile: InitialProfile,
}

impl ProblemSpec {
    pub fn new(n: usize, p: Param, kappa: f64, profile: InitialProfile) -> Result<Self> {
        let spec = ProblemSpec { n, p, kappa, profile };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("N", "dimension must be at least 1"));
        }
        if !(self.p.value() > 1.0) || !self.p.value().is_finite() {
            return Err(Error::invalid("p", format!("must exceed 1, got {}", self.p)));
        }
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(Error::invalid("kappa", format!("must be positive and finite, got {}", self.kappa)));
        }
        self.profile.validate(self.n)?;
        if !self.profile.admissible(self.n) {
            return Err(Error::Inadmissible(format!(
                "{} is not locally integrable in dimension {}",
                self.profile, self.n
            )));
        }
        Ok(())
    }

    pub fn with_kappa(&self, kappa: f64) -> Self {
        ProblemSpec { kappa, ..*self }
    }

    /// p_* = 1 + 1/N
    pub fn critical_exponent(&self) -> Param {
        Param::critical_exponent(self.n)
    }

    /// Position of p relative to p_*.
    pub fn criticality(&self) -> Ordering {
        self.p.compare(&self.critical_exponent())
    }

    pub fn p_value(&self) -> f64 {
        self.p.value()
    }
}
