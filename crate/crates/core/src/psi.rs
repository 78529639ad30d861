//! The ψ family, fractional orders, and the pointwise kernel and weight.

use std::fmt;

use thiserror::Error;

use crate::special::gamma;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PsiError {
    #[error("psi family {family}: argument {t} is outside the natural domain")]
    Domain { family: &'static str, t: f64 },
    #[error("invalid psi parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid fractional order: {0}")]
    InvalidOrder(String),
    #[error("kernel is unbounded at {what} (t = {t})")]
    Singularity { what: &'static str, t: f64 },
}

/// Monotone kernel-generating function ψ on J = [0, T].
///
/// The catalog is closed so that ψ′ and ψ⁻¹ are available in closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PsiFunction {
    /// ψ(t) = t.
    Identity,
    /// ψ(t) = t^σ, σ > 0.
    Power { sigma: f64 },
    /// ψ(t) = ln(t + shift), shift > 0. `shift = 1` gives ln(1 + t).
    Log { shift: f64 },
    /// ψ(t) = exp(rate · t), rate > 0.
    Exp { rate: f64 },
}

impl Default for PsiFunction {
    fn default() -> Self {
        PsiFunction::Identity
    }
}

impl fmt::Display for PsiFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PsiFunction::Identity => write!(f, "t"),
            PsiFunction::Power { sigma } => write!(f, "t^{sigma}"),
            PsiFunction::Log { shift } => write!(f, "ln(t + {shift})"),
            PsiFunction::Exp { rate } => write!(f, "exp({rate} t)"),
        }
    }
}

impl PsiFunction {
    pub fn power(sigma: f64) -> Result<Self, PsiError> {
        if sigma > 0.0 && sigma.is_finite() {
            Ok(PsiFunction::Power { sigma })
        } else {
            Err(PsiError::InvalidParameter(format!(
                "power exponent sigma = {sigma} must be positive"
            )))
        }
    }

    pub fn log(shift: f64) -> Result<Self, PsiError> {
        if shift > 0.0 && shift.is_finite() {
            Ok(PsiFunction::Log { shift })
        } else {
            Err(PsiError::InvalidParameter(format!(
                "log shift = {shift} must be positive"
            )))
        }
    }

    pub fn exp(rate: f64) -> Result<Self, PsiError> {
        if rate > 0.0 && rate.is_finite() {
            Ok(PsiFunction::Exp { rate })
        } else {
            Err(PsiError::InvalidParameter(format!(
                "exp rate = {rate} must be positive"
            )))
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            PsiFunction::Identity => "identity",
            PsiFunction::Power { .. } => "power",
            PsiFunction::Log { .. } => "log",
            PsiFunction::Exp { .. } => "exp",
        }
    }

    fn check_domain(&self, t: f64) -> Result<(), PsiError> {
        let ok = match self {
            PsiFunction::Identity | PsiFunction::Exp { .. } => t.is_finite(),
            PsiFunction::Power { .. } => t.is_finite() && t >= 0.0,
            PsiFunction::Log { shift } => t.is_finite() && t > -shift,
        };
        if ok {
            Ok(())
        } else {
            Err(PsiError::Domain {
                family: self.family(),
                t,
            })
        }
    }

    /// ψ(t).
    pub fn eval(&self, t: f64) -> Result<f64, PsiError> {
        self.check_domain(t)?;
        Ok(match *self {
            PsiFunction::Identity => t,
            PsiFunction::Power { sigma } => t.powf(sigma),
            PsiFunction::Log { shift } => shift.ln() + (t / shift).ln_1p(),
            PsiFunction::Exp { rate } => (rate * t).exp(),
        })
    }

    /// ψ(t) − ψ(0), computed without cancellation.
    pub fn offset(&self, t: f64) -> Result<f64, PsiError> {
        self.check_domain(t)?;
        Ok(match *self {
            PsiFunction::Identity => t,
            PsiFunction::Power { sigma } => t.powf(sigma),
            PsiFunction::Log { shift } => (t / shift).ln_1p(),
            PsiFunction::Exp { rate } => (rate * t).exp_m1(),
        })
    }

    /// ψ′(t).
    pub fn derivative(&self, t: f64) -> Result<f64, PsiError> {
        self.check_domain(t)?;
        Ok(match *self {
            PsiFunction::Identity => 1.0,
            PsiFunction::Power { sigma } => sigma * t.powf(sigma - 1.0),
            PsiFunction::Log { shift } => 1.0 / (t + shift),
            PsiFunction::Exp { rate } => rate * (rate * t).exp(),
        })
    }

    /// ψ⁻¹(u).
    pub fn inverse(&self, u: f64) -> Result<f64, PsiError> {
        let bad = || PsiError::Domain {
            family: self.family(),
            t: u,
        };
        match *self {
            PsiFunction::Identity => Ok(u),
            PsiFunction::Power { sigma } => {
                if u >= 0.0 {
                    Ok(u.powf(1.0 / sigma))
                } else {
                    Err(bad())
                }
            }
            PsiFunction::Log { shift } => Ok(shift * (u - shift.ln()).exp_m1()),
            PsiFunction::Exp { rate } => {
                if u > 0.0 {
                    Ok(u.ln() / rate)
                } else {
                    Err(bad())
                }
            }
        }
    }
}

/// Fractional order (α, β) with derived γ = α + β(1 − α).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalOrder {
    alpha: f64,
    beta: f64,
    gamma: f64,
}

impl FractionalOrder {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, PsiError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(PsiError::InvalidOrder(format!(
                "alpha = {alpha} must lie in (0, 1]"
            )));
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(PsiError::InvalidOrder(format!(
                "beta = {beta} must lie in [0, 1]"
            )));
        }
        let gamma = if alpha == 1.0 || beta == 1.0 {
            1.0
        } else {
            alpha + beta * (1.0 - alpha)
        };
        Ok(FractionalOrder { alpha, beta, gamma })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// N_ψ^α(t, s) = ψ′(s)(ψ(t) − ψ(s))^{α−1} for 0 ≤ s < t.
pub fn psi_kernel(psi: &PsiFunction, alpha: f64, t: f64, s: f64) -> Result<f64, PsiError> {
    if s > t {
        return Err(PsiError::Domain {
            family: psi.family(),
            t: s,
        });
    }
    let dpsi = psi.derivative(s)?;
    if alpha == 1.0 {
        return Ok(dpsi);
    }
    if s == t {
        return Err(PsiError::Singularity {
            what: "s = t",
            t,
        });
    }
    let gap = psi.offset(t)? - psi.offset(s)?;
    Ok(dpsi * gap.powf(alpha - 1.0))
}

/// Ψ^γ(t, 0) = (ψ(t) − ψ(0))^{γ−1} / Γ(γ).
pub fn singular_weight(psi: &PsiFunction, gamma_order: f64, t: f64) -> Result<f64, PsiError> {
    if gamma_order == 1.0 {
        psi.check_domain(t)?;
        return Ok(1.0);
    }
    if t == 0.0 {
        return Err(PsiError::Singularity { what: "t = 0", t });
    }
    if t < 0.0 {
        return Err(PsiError::Domain {
            family: psi.family(),
            t,
        });
    }
    Ok(psi.offset(t)?.powf(gamma_order - 1.0) / gamma(gamma_order))
}
