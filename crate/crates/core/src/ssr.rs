//! Blinded sample-size re-estimation.
//!
//! At the interim the per-group total N̂ is recomputed from σ̂_T² with the
//! normal-approximation formula
//!
//! ```text
//! N̂ = 2 (z_{1-β/2} + z_{1-α})² σ̂_T² / (δ0 - D)²
//! ```
//!
//! rounded up, and then clamped into [n_min, n_max]. Also collects the
//! closed-form moments of N̂ under σ = 1, D = 0.

use std::fmt;

use crate::dist::normal_quantile_unchecked;
use crate::error::{Error, Result};
use crate::trial::var_total_variance;

/// Planned per-group maximum; `Unbounded` applies no cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaxSampleSize {
    Finite(u64),
    Unbounded,
}

impl MaxSampleSize {
    pub fn cap(self, n: u64) -> u64 {
        match self {
            MaxSampleSize::Finite(max) => n.min(max),
            MaxSampleSize::Unbounded => n,
        }
    }
}

impl fmt::Display for MaxSampleSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaxSampleSize::Finite(n) => write!(f, "{n}"),
            MaxSampleSize::Unbounded => f.write_str("inf"),
        }
    }
}

/// Per-group bounds on the realised total, n_min ≤ n ≤ n_max.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SsrRule {
    pub n_min: u64,
    pub n_max: MaxSampleSize,
}

impl SsrRule {
    pub fn new(n_min: u64, n_max: MaxSampleSize) -> Result<Self> {
        if n_min == 0 {
            return Err(Error::InvalidDesign("n_min must be positive".into()));
        }
        if let MaxSampleSize::Finite(max) = n_max {
            if max < n_min {
                return Err(Error::InvalidDesign(format!(
                    "n_max ({max}) is below n_min ({n_min})"
                )));
            }
        }
        Ok(Self { n_min, n_max })
    }

    /// n_min = ñ, no cap: 0 ≤ m < ∞.
    pub fn unbounded_from(n_stage1: u64) -> Self {
        Self {
            n_min: n_stage1,
            n_max: MaxSampleSize::Unbounded,
        }
    }

    /// n_min = n_max = ñ: a single-stage trial.
    pub fn fixed(n_stage1: u64) -> Self {
        Self {
            n_min: n_stage1,
            n_max: MaxSampleSize::Finite(n_stage1),
        }
    }

    pub fn check_stage1(&self, n_stage1: u64) -> Result<()> {
        if self.n_min < n_stage1 {
            return Err(Error::InvalidDesign(format!(
                "n_min ({}) is below the stage-1 size ({n_stage1})",
                self.n_min
            )));
        }
        Ok(())
    }
}

/// 2 (z_{1-β/2} + z_{1-α})², the constant of the sample-size formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSizeFormula {
    constant: f64,
}

impl SampleSizeFormula {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta < 1.0) {
            return Err(Error::domain(
                "SampleSizeFormula::new",
                format!("alpha and beta must lie in (0, 1), got {alpha}, {beta}"),
            ));
        }
        let z =
            normal_quantile_unchecked(1.0 - beta / 2.0) + normal_quantile_unchecked(1.0 - alpha);
        Ok(Self {
            constant: 2.0 * z * z,
        })
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// Pre-ceiling N̂ from a variance estimate. No argument checks.
    #[inline]
    pub fn raw(&self, margin: f64, assumed_diff: f64, total_variance: f64) -> f64 {
        let effect = margin - assumed_diff;
        self.constant * total_variance / (effect * effect)
    }

    /// Rounded-up N̂; saturates at `u64::MAX`.
    #[inline]
    pub fn per_group(&self, margin: f64, assumed_diff: f64, total_variance: f64) -> u64 {
        self.raw(margin, assumed_diff, total_variance).ceil() as u64
    }

    /// Largest σ̂_T² for which N̂ ≤ n, i.e. the interim never asks for more
    /// than `n` per group.
    pub fn variance_threshold(&self, margin: f64, assumed_diff: f64, n: u64) -> f64 {
        let effect = margin - assumed_diff;
        n as f64 * effect * effect / self.constant
    }
}

/// N̂ per group (ceiling of the normal-approximation formula).
pub fn required_sample_size(
    delta0: f64,
    assumed_diff: f64,
    sigma_hat: f64,
    alpha: f64,
    beta: f64,
) -> Result<u64> {
    if !(sigma_hat > 0.0) {
        return Err(Error::domain(
            "required_sample_size",
            format!("sigma_hat must be positive, got {sigma_hat}"),
        ));
    }
    if !(delta0 > 0.0) {
        return Err(Error::domain(
            "required_sample_size",
            format!("margin must be positive, got {delta0}"),
        ));
    }
    if assumed_diff.abs() >= delta0 {
        return Err(Error::Infeasible {
            assumed_diff: assumed_diff.abs(),
            margin: delta0,
        });
    }
    let formula = SampleSizeFormula::new(alpha, beta)?;
    Ok(formula.per_group(delta0, assumed_diff, sigma_hat * sigma_hat))
}

/// Stage-2 per-group size m for a re-estimated N̂.
pub fn apply_ssr_rule(n_hat: u64, n_stage1: u64, rule: &SsrRule) -> u64 {
    let total = if n_hat <= rule.n_min {
        rule.n_min
    } else {
        rule.n_max.cap(n_hat)
    };
    total.saturating_sub(n_stage1)
}

/// E(N̂) with σ = 1, D = 0 and true δ = δ0.
pub fn expected_n_hat(delta0: f64, n_stage1: u64, alpha: f64, beta: f64) -> Result<f64> {
    let k = SampleSizeFormula::new(alpha, beta)?.constant();
    let n = n_stage1 as f64;
    Ok(k * (1.0 / (delta0 * delta0) + n / (4.0 * n - 2.0)))
}

/// SD(N̂) with σ = 1, D = 0 and true difference `delta`.
pub fn sd_n_hat(delta0: f64, n_stage1: u64, delta: f64, alpha: f64, beta: f64) -> Result<f64> {
    let k = SampleSizeFormula::new(alpha, beta)?.constant();
    Ok(k * var_total_variance(n_stage1, delta, 1.0).sqrt() / (delta0 * delta0))
}

/// lim_{δ0→∞} E(N̂) = ñ (z_{1-β/2} + z_{1-α})² / (2ñ - 1).
pub fn limit_n_hat_infinite_margin(n_stage1: u64, alpha: f64, beta: f64) -> Result<f64> {
    let k = SampleSizeFormula::new(alpha, beta)?.constant();
    let n = n_stage1 as f64;
    Ok(0.5 * k * n / (2.0 * n - 1.0))
}
