/// Problem constants for the hyperviscous equation.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpectralParams {
    pub beta: f64,
    pub nu: f64,
    /// Truncation radius `M` (square truncation `|j|_∞ ≤ M`).
    pub m: i64,
    pub s: f64,
    /// Absorbing-ball radius in `H^{3+ε}`.
    pub rho: f64,
    /// `2β - 17/6`.
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParamError {
    #[error("beta = {0} must exceed 17/12")]
    BetaTooSmall(f64),
    #[error("nu = {0} must be positive")]
    NonPositiveNu(f64),
    #[error("rho = {0} must be positive")]
    NonPositiveRho(f64),
    #[error("truncation radius M = {0} must be at least 2")]
    TruncationTooSmall(i64),
    #[error("s = {s} must lie in (3 - 2 beta, 1/6) = ({lower}, {upper}) for cone and averaging checks")]
    ExponentOutOfRange { s: f64, lower: f64, upper: f64 },
}

pub const BETA_MIN: f64 = 17.0 / 12.0;

impl SpectralParams {
    pub fn new(beta: f64, nu: f64, m: i64, s: f64, rho: f64) -> Result<Self, ParamError> {
        let p = Self { beta, nu, m, s, rho, epsilon: 2.0 * beta - 17.0 / 6.0 };
        p.validate()?;
        Ok(p)
    }

    /// `s` at the midpoint of `(max(3 - 2β, 0), 1/6)`.
    pub fn default_s(beta: f64) -> f64 {
        0.5 * ((3.0 - 2.0 * beta).max(0.0) + 1.0 / 6.0)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.beta > BETA_MIN) {
            return Err(ParamError::BetaTooSmall(self.beta));
        }
        if !(self.nu > 0.0) {
            return Err(ParamError::NonPositiveNu(self.nu));
        }
        if !(self.rho > 0.0) {
            return Err(ParamError::NonPositiveRho(self.rho));
        }
        if self.m < 2 {
            return Err(ParamError::TruncationTooSmall(self.m));
        }
        Ok(())
    }

    /// Additional constraint on `s` required by the cone and averaging checks.
    pub fn validate_for_checks(&self) -> Result<(), ParamError> {
        self.validate()?;
        let (lower, upper) = (3.0 - 2.0 * self.beta, 1.0 / 6.0);
        if !(self.s > lower && self.s < upper) {
            return Err(ParamError::ExponentOutOfRange { s: self.s, lower, upper });
        }
        Ok(())
    }

    /// `β < 3/2`, where the classical spectral gap condition fails.
    pub fn is_supercritical(&self) -> bool {
        self.beta < 1.5
    }

    /// Exponent `3 + ε` of the weight inside `W`.
    pub fn w_exponent(&self) -> f64 {
        3.0 + self.epsilon
    }

    pub fn with_truncation(&self, m: i64) -> Self {
        Self { m, ..*self }
    }
}
