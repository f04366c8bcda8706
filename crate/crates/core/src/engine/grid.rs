//! Full-factorial sweeps over stage-1 size, n_min/n_max ratios and margin.

use rayon::prelude::*;

use super::{run_scenario, SamplingMode, Scenario, ScenarioResult};
use crate::error::{Error, Result};
use crate::ssr::{MaxSampleSize, SsrRule};
use crate::trial::TrialDesign;

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub n_stage1: Vec<u64>,
    /// n_min / ñ
    pub n_min_ratios: Vec<f64>,
    /// n_max / ñ; `None` is unbounded.
    pub n_max_ratios: Vec<Option<f64>>,
    /// Symmetric margins δ0; data are generated at δ = δ0.
    pub delta0: Vec<f64>,
    pub sigma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub replications: u64,
    pub master_seed: u64,
    pub sampling: SamplingMode,
}

impl GridSpec {
    /// ñ ∈ {10, 15, 20, 25, 30, 40, 50, 60}, n_min/ñ from 1 to 2 by 0.2,
    /// n_max/ñ ∈ {2, 2.5, 3, 3.5, 4, ∞}, δ0 from 0.05 to 1.5 by 0.05.
    pub fn standard(replications: u64, master_seed: u64) -> Self {
        GridSpec {
            n_stage1: vec![10, 15, 20, 25, 30, 40, 50, 60],
            n_min_ratios: vec![1.0, 1.2, 1.4, 1.6, 1.8, 2.0],
            n_max_ratios: vec![Some(2.0), Some(2.5), Some(3.0), Some(3.5), Some(4.0), None],
            delta0: delta0_range(0.05, 1.5, 0.05).expect("valid range"),
            sigma: 1.0,
            alpha: 0.05,
            beta: 0.10,
            replications,
            master_seed,
            sampling: SamplingMode::default(),
        }
    }

    pub fn cell_count(&self) -> usize {
        self.n_stage1.len() * self.n_min_ratios.len() * self.n_max_ratios.len() * self.delta0.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_stage1.is_empty()
            || self.n_min_ratios.is_empty()
            || self.n_max_ratios.is_empty()
            || self.delta0.is_empty()
        {
            return Err(Error::Config("every grid list must be non-empty".into()));
        }
        if let Some(&n) = self.n_stage1.iter().find(|&&n| n < 2) {
            return Err(Error::Config(format!(
                "stage-1 size must be at least 2, got {n}"
            )));
        }
        if let Some(r) = self
            .n_min_ratios
            .iter()
            .find(|r| !(r.is_finite() && **r >= 1.0))
        {
            return Err(Error::Config(format!(
                "n_min ratio must be at least 1, got {r}"
            )));
        }
        let max_min = self.n_min_ratios.iter().copied().fold(f64::MIN, f64::max);
        for r in self.n_max_ratios.iter().flatten() {
            if !(r.is_finite() && *r >= max_min) {
                return Err(Error::Config(format!(
                    "n_max ratio {r} is below the largest n_min ratio {max_min}"
                )));
            }
        }
        if let Some(d) = self.delta0.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(Error::Config(format!("margins must be positive, got {d}")));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        Ok(())
    }

    /// All cells, ordered ñ, n_min ratio, n_max ratio, δ0 (innermost).
    pub fn scenarios(&self) -> Result<Vec<Scenario>> {
        self.validate()?;
        let mut out = Vec::with_capacity(self.cell_count());
        for &n in &self.n_stage1 {
            for &rmin in &self.n_min_ratios {
                for &rmax in &self.n_max_ratios {
                    let n_min = ratio_target(n, rmin);
                    let n_max = match rmax {
                        Some(r) => MaxSampleSize::Finite(ratio_target(n, r)),
                        None => MaxSampleSize::Unbounded,
                    };
                    let rule = SsrRule::new(n_min, n_max)?;
                    for &d in &self.delta0 {
                        let d = canonical_delta0(d);
                        let scenario = Scenario {
                            design: TrialDesign::symmetric(
                                d, self.sigma, n, self.alpha, self.beta,
                            )?,
                            rule,
                            true_delta: d,
                            replications: self.replications,
                            master_seed: self.master_seed,
                            sampling: self.sampling,
                        };
                        scenario.validate()?;
                        out.push(scenario);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// ratio·ñ rounded to the nearest integer, ties up.
pub fn ratio_target(n_stage1: u64, ratio: f64) -> u64 {
    let x = ratio * n_stage1 as f64;
    // snap representation error (1.15 * 10 = 11.4999…) before rounding
    let snapped = (x * 1e9).round() / 1e9;
    (snapped + 0.5).floor() as u64
}

/// δ0 rounded to 12 decimals, so values from a range and values typed in a
/// file map to the same cell.
pub fn canonical_delta0(d: f64) -> f64 {
    (d * 1e12).round() / 1e12
}

/// start, start + step, … up to and including stop.
pub fn delta0_range(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start > 0.0 && stop >= start && step > 0.0) || !stop.is_finite() {
        return Err(Error::Config(format!(
            "invalid margin range {start}..{stop} step {step}"
        )));
    }
    let steps = (stop - start) / step;
    let k = steps.round();
    if (steps - k).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "margin range {start}..{stop} is not a whole number of steps of {step}"
        )));
    }
    Ok((0..=k as u64)
        .map(|i| canonical_delta0(start + i as f64 * step))
        .collect())
}

/// Runs every cell; results follow the order of [`GridSpec::scenarios`].
pub fn run_grid(spec: &GridSpec) -> Result<Vec<ScenarioResult>> {
    let cells = spec.scenarios()?;
    cells.par_iter().map(run_scenario).collect()
}
