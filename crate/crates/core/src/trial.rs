//! Two-group, two-stage trial model and the blinded "total variance".
//!
//! The interim looks at all stage-1 observations as one sample. Its sum of
//! squares about the grand mean splits as Q = Q1 + Q2 where Q1 is the
//! within-group sum of squares (σ²χ²(ñ*-2)) and Q2 the between-group part
//! (σ²χ²(1; ñ1ñ2δ²/(ñ*σ²))). Q2 is what makes the blinded estimate depend on
//! the true difference δ.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialDesign {
    /// Lower equivalence margin.
    pub delta_low: f64,
    /// Upper equivalence margin; also the margin used by the sample-size formula.
    pub delta_up: f64,
    /// True common standard deviation.
    pub sigma: f64,
    pub n1_stage1: u64,
    pub n2_stage1: u64,
    /// One-sided level of each test.
    pub alpha: f64,
    /// One minus the target power.
    pub beta: f64,
    /// Difference assumed when planning at the interim (D).
    pub assumed_diff: f64,
}

impl TrialDesign {
    /// Symmetric margins ±`margin`, equal stage-1 groups and D = 0.
    pub fn symmetric(
        margin: f64,
        sigma: f64,
        n_stage1: u64,
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        let design = Self {
            delta_low: -margin,
            delta_up: margin,
            sigma,
            n1_stage1: n_stage1,
            n2_stage1: n_stage1,
            alpha,
            beta,
            assumed_diff: 0.0,
        };
        design.validate()?;
        Ok(design)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_low < self.delta_up) {
            return Err(Error::InvalidDesign(format!(
                "delta_low ({}) must be below delta_up ({})",
                self.delta_low, self.delta_up
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::InvalidDesign(format!(
                "alpha must lie in (0, 0.5), got {}",
                self.alpha
            )));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidDesign(format!(
                "beta must lie in (0, 1), got {}",
                self.beta
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidDesign(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if self.n1_stage1 == 0 || self.n2_stage1 == 0 {
            return Err(Error::InvalidDesign(
                "stage-1 group sizes must be positive".into(),
            ));
        }
        if !self.assumed_diff.is_finite() {
            return Err(Error::InvalidDesign(
                "assumed difference D must be finite".into(),
            ));
        }
        Ok(())
    }

    /// ñ* = ñ1 + ñ2
    pub fn n_total_stage1(&self) -> u64 {
        self.n1_stage1 + self.n2_stage1
    }
}

/// Raw responses of one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageData {
    pub group1: Vec<f64>,
    pub group2: Vec<f64>,
}

impl StageData {
    pub fn new(group1: Vec<f64>, group2: Vec<f64>) -> Result<Self> {
        if group1.iter().chain(&group2).any(|v| !v.is_finite()) {
            return Err(Error::InsufficientData(
                "observations must be finite".into(),
            ));
        }
        Ok(Self { group1, group2 })
    }

    /// Checks the group lengths against the design's stage-1 sizes.
    pub fn check_against(&self, design: &TrialDesign) -> Result<()> {
        if self.group1.len() as u64 != design.n1_stage1
            || self.group2.len() as u64 != design.n2_stage1
        {
            return Err(Error::InsufficientData(format!(
                "expected {}+{} observations, got {}+{}",
                design.n1_stage1,
                design.n2_stage1,
                self.group1.len(),
                self.group2.len()
            )));
        }
        Ok(())
    }
}

/// Size, mean and centred sum of squares of one group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupStats {
    pub n: u64,
    pub mean: f64,
    pub ss: f64,
}

impl GroupStats {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                n: 0,
                mean: 0.0,
                ss: 0.0,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        Self {
            n: n as u64,
            mean,
            ss,
        }
    }

    /// Pools two samples of the same group (e.g. stage 1 and stage 2).
    pub fn combine(&self, other: &GroupStats) -> GroupStats {
        if other.n == 0 {
            return *self;
        }
        if self.n == 0 {
            return *other;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let delta = other.mean - self.mean;
        GroupStats {
            n: self.n + other.n,
            mean: self.mean + delta * nb / n,
            ss: self.ss + other.ss + delta * delta * na * nb / n,
        }
    }
}

/// Blinded interim summary of stage 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageSummary {
    pub mean1: f64,
    pub mean2: f64,
    /// ñ-weighted grand mean.
    pub pooled_mean: f64,
    /// Within-group sum of squares.
    pub q1: f64,
    /// Between-group sum of squares, Σ ñ_j (ȳ_j - ȳ)².
    pub q2: f64,
    /// σ̂_T² = (Q1 + Q2) / (ñ* - 1)
    pub total_variance: f64,
    pub n1: u64,
    pub n2: u64,
}

impl StageSummary {
    pub fn n_total_stage1(&self) -> u64 {
        self.n1 + self.n2
    }

    pub(crate) fn from_groups(g1: &GroupStats, g2: &GroupStats) -> Self {
        let (n1, n2) = (g1.n as f64, g2.n as f64);
        let n = n1 + n2;
        let pooled_mean = (n1 * g1.mean + n2 * g2.mean) / n;
        let q1 = g1.ss + g2.ss;
        let q2 = n1 * (g1.mean - pooled_mean).powi(2) + n2 * (g2.mean - pooled_mean).powi(2);
        StageSummary {
            mean1: g1.mean,
            mean2: g2.mean,
            pooled_mean,
            q1,
            q2,
            total_variance: (q1 + q2) / (n - 1.0),
            n1: g1.n,
            n2: g2.n,
        }
    }
}

pub fn summarize_stage1(data: &StageData) -> Result<StageSummary> {
    if data.group1.len() < 2 || data.group2.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "each group needs at least 2 observations, got {} and {}",
            data.group1.len(),
            data.group2.len()
        )));
    }
    Ok(StageSummary::from_groups(
        &GroupStats::from_values(&data.group1),
        &GroupStats::from_values(&data.group2),
    ))
}

/// E(σ̂_T²) = σ²(1 + ñ1ñ2δ²/(ñ*(ñ*-1)σ²)).
pub fn expected_total_variance(design: &TrialDesign, delta: f64) -> f64 {
    let n1 = design.n1_stage1 as f64;
    let n2 = design.n2_stage1 as f64;
    let n = n1 + n2;
    let s2 = design.sigma * design.sigma;
    s2 + n1 * n2 * delta * delta / (n * (n - 1.0))
}

/// Var(σ̂_T²) for equal groups of size ñ:
/// 2σ⁴ [ñ(2 + δ²/σ²) - 1] / (2ñ - 1)².
///
/// Follows from Var χ²(k; λ) = 2(k + 2λ) applied to Q1 and Q2. Note the σ⁴
/// prefactor: the variance of a variance estimate scales with the fourth
/// power of the data scale.
pub fn var_total_variance(n_per_group: u64, delta: f64, sigma: f64) -> f64 {
    let n = n_per_group as f64;
    let s2 = sigma * sigma;
    2.0 * s2 * s2 * (n * (2.0 + delta * delta / s2) - 1.0) / (2.0 * n - 1.0).powi(2)
}
