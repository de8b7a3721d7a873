use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Base metric family on S++(n).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    /// Log-Euclidean; invariant under power deformation.
    Lem,
    /// Affine-invariant.
    Aim,
    /// Euclidean (power-Euclidean once deformed).
    Em,
    /// Log-Cholesky.
    Lcm,
    /// Bures-Wasserstein, deformed with power 2θ.
    Bwm,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::Lem, Family::Aim, Family::Em, Family::Lcm, Family::Bwm];

    pub fn name(self) -> &'static str {
        match self {
            Family::Lem => "LEM",
            Family::Aim => "AIM",
            Family::Em => "EM",
            Family::Lcm => "LCM",
            Family::Bwm => "BWM",
        }
    }

    /// Whether `(α, β)` enters the metric.
    pub fn uses_alpha_beta(self) -> bool {
        matches!(self, Family::Lem | Family::Aim | Family::Em)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lem" => Ok(Family::Lem),
            "aim" => Ok(Family::Aim),
            "em" => Ok(Family::Em),
            "lcm" => Ok(Family::Lcm),
            "bwm" => Ok(Family::Bwm),
            other => Err(Error::ParameterDomain(format!("unknown metric family '{other}'"))),
        }
    }
}

/// Metric family with its deformation power θ and the O(n)-invariant
/// Euclidean weights (α, β). Immutable once built.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricParams {
    family: Family,
    theta: f64,
    alpha: f64,
    beta: f64,
}

impl MetricParams {
    /// Rejects θ = 0 and non-finite values. For LCM and BWM the weights are
    /// stored as (1, 0) whatever is passed. The dimension-dependent
    /// condition `min(α, α + nβ) > 0` is checked by [`MetricParams::validate_dim`].
    pub fn new(family: Family, theta: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !theta.is_finite() || theta == 0.0 {
            return Err(Error::ParameterDomain(format!("theta must be finite and nonzero, got {theta}")));
        }
        let (alpha, beta) = if family.uses_alpha_beta() { (alpha, beta) } else { (1.0, 0.0) };
        if !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::ParameterDomain("alpha and beta must be finite".into()));
        }
        if family.uses_alpha_beta() && alpha <= 0.0 {
            return Err(Error::ParameterDomain(format!("alpha must be positive, got {alpha}")));
        }
        Ok(Self { family, theta, alpha, beta })
    }

    pub fn lem(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(Family::Lem, 1.0, alpha, beta)
    }

    pub fn aim(theta: f64, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(Family::Aim, theta, alpha, beta)
    }

    pub fn em(theta: f64, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(Family::Em, theta, alpha, beta)
    }

    pub fn lcm(theta: f64) -> Result<Self> {
        Self::new(Family::Lcm, theta, 1.0, 0.0)
    }

    pub fn bwm(theta: f64) -> Result<Self> {
        Self::new(Family::Bwm, theta, 1.0, 0.0)
    }

    /// Standard affine-invariant metric, used for retraction.
    pub fn aim_std() -> Self {
        Self { family: Family::Aim, theta: 1.0, alpha: 1.0, beta: 0.0 }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Exponent of the deforming power map: θ, 2θ for BWM, 1 for LEM.
    pub fn power(&self) -> f64 {
        match self.family {
            Family::Lem => 1.0,
            Family::Bwm => 2.0 * self.theta,
            _ => self.theta,
        }
    }

    /// `min(α, α + nβ) > 0` for the families that use the weights.
    pub fn validate_dim(&self, n: usize) -> Result<()> {
        if self.family.uses_alpha_beta() {
            check_alpha_beta(self.alpha, self.beta, n)?;
        }
        Ok(())
    }

    /// Same geometry with the metric multiplied by `a > 0`.
    pub fn scaled(&self, a: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::ParameterDomain(format!("scale must be positive, got {a}")));
        }
        if self.family.uses_alpha_beta() {
            Ok(Self { alpha: self.alpha * a, beta: self.beta * a, ..*self })
        } else {
            Err(Error::ParameterDomain(format!("{} has no metric weights to scale", self.family)))
        }
    }
}

impl fmt::Display for MetricParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Lem => write!(f, "({},{})-LEM", self.alpha, self.beta),
            Family::Aim | Family::Em => write!(f, "({},{},{})-{}", self.theta, self.alpha, self.beta, self.family),
            Family::Lcm => write!(f, "{}-LCM", self.theta),
            Family::Bwm => write!(f, "{}-BWM", 2.0 * self.theta),
        }
    }
}

pub(crate) fn check_alpha_beta(alpha: f64, beta: f64, n: usize) -> Result<()> {
    let m = alpha.min(alpha + n as f64 * beta);
    if !(m > 0.0) {
        return Err(Error::ParameterDomain(format!(
            "min(alpha, alpha + n*beta) must be positive: alpha={alpha}, beta={beta}, n={n}"
        )));
    }
    Ok(())
}
