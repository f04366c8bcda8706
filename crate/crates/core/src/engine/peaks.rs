//! Peak %Case1 over the margin for the unrestricted rule (n_min = ñ, no cap).

use rayon::prelude::*;

use super::grid::canonical_delta0;
use super::{run_scenario, SamplingMode, Scenario, ScenarioResult};
use crate::error::{Error, Result};
use crate::ssr::SsrRule;
use crate::tost::CaseLabel;
use crate::trial::TrialDesign;

#[derive(Debug, Clone, PartialEq)]
pub struct PeakScan {
    pub n_stage1: u64,
    pub peak_pct_case1: f64,
    /// Smallest δ0 attaining the peak.
    pub argmax_delta0: f64,
    /// One result per scanned δ0, in input order.
    pub points: Vec<ScenarioResult>,
}

/// Scans `delta0_grid` with σ = 1, α = 0.05, β = 0.10. Cells coincide with
/// the grid cells n_min/ñ = 1, n_max = ∞ of the same seed.
pub fn peak_alpha_scan(
    n_stage1: u64,
    delta0_grid: &[f64],
    replications: u64,
    master_seed: u64,
    sampling: SamplingMode,
) -> Result<PeakScan> {
    if delta0_grid.is_empty() {
        return Err(Error::Config("peak scan needs at least one margin".into()));
    }
    let scenarios = delta0_grid
        .iter()
        .map(|&d| {
            let d = canonical_delta0(d);
            let s = Scenario {
                design: TrialDesign::symmetric(d, 1.0, n_stage1, 0.05, 0.10)?,
                rule: SsrRule::unbounded_from(n_stage1),
                true_delta: d,
                replications,
                master_seed,
                sampling,
            };
            s.validate()?;
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<ScenarioResult> = scenarios
        .par_iter()
        .map(run_scenario)
        .collect::<Result<_>>()?;
    let mut best = &points[0];
    for p in &points[1..] {
        if p.pct(CaseLabel::Case1) > best.pct(CaseLabel::Case1) {
            best = p;
        }
    }
    Ok(PeakScan {
        n_stage1,
        peak_pct_case1: best.pct(CaseLabel::Case1),
        argmax_delta0: best.scenario.design.delta_up,
        points,
    })
}
