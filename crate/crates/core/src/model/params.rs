use serde::{Deserialize, Serialize};

use super::ModelError;

/// Absolute tolerance on `|ratio - round(ratio)|` when matching periods.
pub const REGIME_TOL: f64 = 1e-9;
/// Largest multiplicity accepted as commensurate.
pub const REGIME_K_MAX: u64 = 1_000_000;

/// How the harvest and release periods relate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "k", rename_all = "snake_case")]
pub enum Regime {
    /// `T_h = k T_r`: releases at least as frequent as harvests.
    HarvestMultiple(u32),
    /// `T_r = k T_h` with `k >= 2`.
    ReleaseMultiple(u32),
    Incommensurate,
}

impl Regime {
    pub fn k(self) -> Option<u32> {
        match self {
            Regime::HarvestMultiple(k) | Regime::ReleaseMultiple(k) => Some(k),
            Regime::Incommensurate => None,
        }
    }

    pub fn is_commensurate(self) -> bool {
        !matches!(self, Regime::Incommensurate)
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::HarvestMultiple(_) => "harvest_multiple",
            Regime::ReleaseMultiple(_) => "release_multiple",
            Regime::Incommensurate => "incommensurate",
        }
    }
}

fn integer_ratio(a: f64, b: f64) -> Option<u32> {
    let ratio = a / b;
    let k = ratio.round();
    if k >= 1.0 && k <= REGIME_K_MAX as f64 && (ratio - k).abs() < REGIME_TOL {
        Some(k as u32)
    } else {
        None
    }
}

/// Model and schedule scalars.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpulseParams {
    /// Predator mortality rate.
    pub d: f64,
    pub alpha_x: f64,
    pub alpha_y: f64,
    /// Harvest period.
    pub t_h: f64,
    /// Release period.
    pub t_r: f64,
    /// Predators bought per unit time; each release adds `mu * t_r`.
    pub mu: f64,
}

impl ImpulseParams {
    pub fn new(
        d: f64,
        alpha_x: f64,
        alpha_y: f64,
        t_h: f64,
        t_r: f64,
        mu: f64,
    ) -> Result<Self, ModelError> {
        let p = ImpulseParams { d, alpha_x, alpha_y, t_h, t_r, mu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [("d", self.d), ("T_h", self.t_h), ("T_r", self.t_r)];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::InvalidParam { name, value, reason: "must be finite and > 0" });
            }
        }
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(ModelError::InvalidParam {
                name: "mu",
                value: self.mu,
                reason: "must be finite and >= 0",
            });
        }
        for (name, value) in [("alpha_x", self.alpha_x), ("alpha_y", self.alpha_y)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ModelError::InvalidParam { name, value, reason: "must lie in [0, 1]" });
            }
        }
        Ok(())
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_release_period(mut self, t_r: f64) -> Self {
        self.t_r = t_r;
        self
    }

    pub fn regime(&self) -> Regime {
        if let Some(k) = integer_ratio(self.t_h, self.t_r) {
            Regime::HarvestMultiple(k)
        } else if let Some(k) = integer_ratio(self.t_r, self.t_h) {
            Regime::ReleaseMultiple(k)
        } else {
            Regime::Incommensurate
        }
    }

    /// Period of the pest-free solution: `T_h` when releases are more
    /// frequent, `T_r` otherwise. `None` for incommensurate schedules.
    pub fn reference_period(&self) -> Option<f64> {
        match self.regime() {
            Regime::HarvestMultiple(_) => Some(self.t_h),
            Regime::ReleaseMultiple(_) => Some(self.t_r),
            Regime::Incommensurate => None,
        }
    }

    pub fn base_period(&self) -> f64 {
        self.t_h.min(self.t_r)
    }

    /// Predators added by one release.
    pub fn release_size(&self) -> f64 {
        self.mu * self.t_r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(t_h: f64, t_r: f64) -> ImpulseParams {
        ImpulseParams::new(1.0, 0.5, 0.5, t_h, t_r, 1.0).unwrap()
    }

    #[test]
    fn detects_integer_lattices() {
        let base = 0.37;
        for k in 1..=40u32 {
            assert_eq!(params(base * k as f64, base).regime(), Regime::HarvestMultiple(k));
            if k >= 2 {
                assert_eq!(params(base, base * k as f64).regime(), Regime::ReleaseMultiple(k));
            }
        }
        assert_eq!(params(1.0, 1.0 / 3.0).regime(), Regime::HarvestMultiple(3));
        assert_eq!(params(2.0, 2.0).regime(), Regime::HarvestMultiple(1));
    }

    #[test]
    fn irrational_ratio_is_incommensurate() {
        assert_eq!(params(1.0, 2f64.sqrt()).regime(), Regime::Incommensurate);
        assert_eq!(params(2f64.sqrt(), 1.0).regime(), Regime::Incommensurate);
        assert_eq!(params(1.0, 1.5).regime(), Regime::Incommensurate);
        assert_eq!(params(1.0, 2e6).regime(), Regime::Incommensurate);
    }

    #[test]
    fn rejects_invalid_values() {
        assert!(ImpulseParams::new(0.0, 0.5, 0.5, 1.0, 1.0, 1.0).is_err());
        assert!(ImpulseParams::new(1.0, 1.5, 0.5, 1.0, 1.0, 1.0).is_err());
        assert!(ImpulseParams::new(1.0, 0.5, -0.1, 1.0, 1.0, 1.0).is_err());
        assert!(ImpulseParams::new(1.0, 0.5, 0.5, -1.0, 1.0, 1.0).is_err());
        assert!(ImpulseParams::new(1.0, 0.5, 0.5, 1.0, 1.0, -1.0).is_err());
        assert!(ImpulseParams::new(1.0, 1.0, 1.0, 1.0, 1.0, 0.0).is_ok());
    }

    #[test]
    fn reference_period_follows_regime() {
        assert_eq!(params(2.0, 1.0).reference_period(), Some(2.0));
        assert_eq!(params(1.0, 3.0).reference_period(), Some(3.0));
        assert_eq!(params(1.0, 2f64.sqrt()).reference_period(), None);
    }
}
