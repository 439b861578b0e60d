//! The attraction kernel `K(x) = x / |x|^{alpha+1}`, its potential, divergence,
//! and the capped variant `K_eps(x) = x / max(|x|, eps)^{alpha+1}`.
//!
//! All radial powers are evaluated from `|x|^2` in a single `powf` so that the
//! exact and capped kernels share the same arithmetic path whenever `|x| >= eps`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec2::Vec2;

/// Model constants: interaction exponent `alpha`, coupling strength `chi`,
/// and cap radius `eps` (0 selects the exact kernel).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelParams {
    pub alpha: f64,
    pub chi: f64,
    #[serde(default)]
    pub eps: f64,
}

impl KernelParams {
    /// Validates `0 < alpha < 1` (endpoints rejected: the sub-critical analysis
    /// breaks down at `alpha = 1`), `chi >= 0`, `eps >= 0`.
    pub fn new(alpha: f64, chi: f64, eps: f64) -> Result<Self> {
        let p = KernelParams { alpha, chi, eps };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParams(format!(
                "alpha must lie in the open interval (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.chi >= 0.0) || !self.chi.is_finite() {
            return Err(Error::InvalidParams(format!(
                "chi must be finite and >= 0, got {}",
                self.chi
            )));
        }
        if !(self.eps >= 0.0) || !self.eps.is_finite() {
            return Err(Error::InvalidParams(format!(
                "eps must be finite and >= 0, got {}",
                self.eps
            )));
        }
        Ok(())
    }

    fn require_eps(&self) -> Result<()> {
        if self.eps > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParams(
                "capped kernel requires eps > 0".into(),
            ))
        }
    }
}

/// `|x|^{-alpha-1}` computed as `(|x|^2)^{-(alpha+1)/2}`.
#[inline]
fn inv_pow_alpha1(r_sq: f64, alpha: f64) -> f64 {
    r_sq.powf(-0.5 * (alpha + 1.0))
}

/// `K(x) = x / |x|^{alpha+1}`. Singular-input error at `x = 0`
/// (detected by exact zero of `|x|^2`, not a tolerance).
#[inline]
pub fn eval_k(x: Vec2, p: &KernelParams) -> Result<Vec2> {
    let r_sq = x.norm_sq();
    if r_sq == 0.0 {
        return Err(Error::SingularInput(x));
    }
    Ok(x * inv_pow_alpha1(r_sq, p.alpha))
}

/// `K_eps(x) = x / max(|x|, eps)^{alpha+1}`.
///
/// `max` is inclusive: at `|x| = eps` this takes the `|x| >= eps` branch and is
/// bit-identical to [`eval_k`]. Finite everywhere, `K_eps(0) = 0`.
#[inline]
pub fn eval_k_reg(x: Vec2, p: &KernelParams) -> Result<Vec2> {
    p.require_eps()?;
    let r_sq = x.norm_sq();
    if r_sq >= p.eps * p.eps {
        Ok(x * inv_pow_alpha1(r_sq, p.alpha))
    } else {
        Ok(x * inv_pow_alpha1(p.eps * p.eps, p.alpha))
    }
}

/// The attractive potential `Phi(x) = |x|^{1-alpha} / (alpha - 1)`, with
/// `K = -grad Phi`. Negative everywhere for `alpha` in (0, 1).
pub fn eval_potential(x: Vec2, p: &KernelParams) -> Result<f64> {
    let r_sq = x.norm_sq();
    if r_sq == 0.0 {
        return Err(Error::SingularInput(x));
    }
    Ok(r_sq.powf(0.5 * (1.0 - p.alpha)) / (p.alpha - 1.0))
}

/// `div K(x) = (1 - alpha) / |x|^{alpha+1}`, strictly positive.
pub fn div_k(x: Vec2, p: &KernelParams) -> Result<f64> {
    let r_sq = x.norm_sq();
    if r_sq == 0.0 {
        return Err(Error::SingularInput(x));
    }
    Ok((1.0 - p.alpha) * inv_pow_alpha1(r_sq, p.alpha))
}

/// `div K_eps(x) = (1 - alpha)/|x|^{alpha+1}` for `|x| >= eps`, and
/// `2 / eps^{alpha+1}` inside the cap. Bounded by `2 / |x|^{alpha+1}` for all
/// `x != 0`.
pub fn div_k_reg(x: Vec2, p: &KernelParams) -> Result<f64> {
    p.require_eps()?;
    let r_sq = x.norm_sq();
    if r_sq >= p.eps * p.eps {
        Ok((1.0 - p.alpha) * inv_pow_alpha1(r_sq, p.alpha))
    } else {
        Ok(2.0 * inv_pow_alpha1(p.eps * p.eps, p.alpha))
    }
}

/// The proven Lipschitz-type bound for the kernel difference:
/// `|K(x) - K(y)| <= 2(alpha+2) |x-y| (|x|^{-alpha-1} + |y|^{-alpha-1})`.
///
/// Returns the right-hand side.
pub fn lipschitz_rhs(x: Vec2, y: Vec2, p: &KernelParams) -> Result<f64> {
    let rx_sq = x.norm_sq();
    let ry_sq = y.norm_sq();
    if rx_sq == 0.0 {
        return Err(Error::SingularInput(x));
    }
    if ry_sq == 0.0 {
        return Err(Error::SingularInput(y));
    }
    let sum = inv_pow_alpha1(rx_sq, p.alpha) + inv_pow_alpha1(ry_sq, p.alpha);
    Ok(2.0 * (p.alpha + 2.0) * (x - y).norm() * sum)
}
