//! Monte Carlo simulation of two-stage trials with blinded sample-size
//! re-estimation.
//!
//! Replicates are processed in fixed-size chunks. Each replicate draws from
//! its own stream (see [`crate::rng`]) and chunk tallies are folded in chunk
//! order, so a result depends only on the scenario and the master seed, not
//! on the number of worker threads.

pub mod binned;
pub mod grid;
pub mod peaks;
pub mod threshold;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;

use crate::dist::student_t_quantile_unchecked;
use crate::error::{Error, Result};
use crate::rng::{replicate_rng, CellKey};
use crate::ssr::{apply_ssr_rule, MaxSampleSize, SampleSizeFormula, SsrRule};
use crate::tost::{tost_from_stats, CaseLabel, TostOutcome};
use crate::trial::{GroupStats, StageSummary, TrialDesign};

pub use binned::{binned_rejection_analysis, BinnedRejectionReport, RejectionBin};
pub use grid::{run_grid, GridSpec};
pub use peaks::{peak_alpha_scan, PeakScan};
pub use threshold::{simulate_threshold_rule, ThresholdMcResult};

/// Replicates per work unit. Part of the reproducibility contract: changing
/// it changes the floating-point summation order of `mean_sigma_t2`.
pub const CHUNK: u64 = 8192;

/// How observations are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SamplingMode {
    /// Every observation of both stages is drawn.
    Observations,
    /// Stage 1 is drawn observation by observation; stage 2 enters only
    /// through its group means and sums of squares, drawn from their exact
    /// normal and scaled χ² laws.
    #[default]
    Hybrid,
    /// Both stages are drawn as sufficient statistics.
    SufficientStatistics,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub design: TrialDesign,
    pub rule: SsrRule,
    /// Mean difference used to generate the data.
    pub true_delta: f64,
    pub replications: u64,
    pub master_seed: u64,
    pub sampling: SamplingMode,
}

impl Scenario {
    /// Type I error scenario at the upper boundary: symmetric margins ±δ0,
    /// data generated with difference δ0.
    pub fn at_boundary(
        delta0: f64,
        sigma: f64,
        n_stage1: u64,
        rule: SsrRule,
        replications: u64,
        master_seed: u64,
    ) -> Result<Self> {
        let scenario = Scenario {
            design: TrialDesign::symmetric(delta0, sigma, n_stage1, 0.05, 0.10)?,
            rule,
            true_delta: delta0,
            replications,
            master_seed,
            sampling: SamplingMode::default(),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        self.design.validate()?;
        if self.design.n1_stage1 != self.design.n2_stage1 {
            return Err(Error::InvalidDesign(
                "simulation requires equal stage-1 group sizes".into(),
            ));
        }
        if self.design.n1_stage1 < 2 {
            return Err(Error::InvalidDesign(
                "stage-1 groups need at least 2 subjects".into(),
            ));
        }
        if !(self.design.delta_up - self.design.assumed_diff.abs() > 0.0) {
            return Err(Error::Infeasible {
                assumed_diff: self.design.assumed_diff,
                margin: self.design.delta_up,
            });
        }
        self.rule.check_stage1(self.design.n1_stage1)?;
        if self.replications == 0 {
            return Err(Error::InvalidDesign(
                "replications must be at least 1".into(),
            ));
        }
        if !self.true_delta.is_finite() {
            return Err(Error::InvalidDesign(
                "true difference must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Stream key derived from every parameter that shapes the draws. The
    /// sampling mode is left out so that modes share their stage-1 data.
    pub fn cell_key(&self) -> CellKey {
        let d = &self.design;
        CellKey::from_words(&[
            d.n1_stage1,
            d.n2_stage1,
            self.rule.n_min,
            match self.rule.n_max {
                MaxSampleSize::Finite(n) => n,
                MaxSampleSize::Unbounded => u64::MAX,
            },
            d.delta_low.to_bits(),
            d.delta_up.to_bits(),
            d.sigma.to_bits(),
            d.alpha.to_bits(),
            d.beta.to_bits(),
            d.assumed_diff.to_bits(),
            self.true_delta.to_bits(),
        ])
    }
}

/// One simulated trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub outcome: TostOutcome,
    pub stage1: StageSummary,
    /// Stage-2 size per group.
    pub stage2: u64,
    /// Final per-group size ñ + m.
    pub realized_n: u64,
}

/// t_{1-α}(df) memoised by integer degrees of freedom.
#[derive(Debug, Clone)]
pub(crate) struct TQuantiles {
    alpha: f64,
    values: Vec<f64>,
}

impl TQuantiles {
    const CACHE_LIMIT: u64 = 1 << 20;

    pub(crate) fn new(alpha: f64) -> Self {
        Self {
            alpha,
            values: Vec::new(),
        }
    }

    pub(crate) fn upper(&mut self, df: u64) -> f64 {
        if df >= Self::CACHE_LIMIT {
            return student_t_quantile_unchecked(1.0 - self.alpha, df as f64);
        }
        let i = df as usize;
        if i >= self.values.len() {
            self.values.resize(i + 1, f64::NAN);
        }
        if self.values[i].is_nan() {
            self.values[i] = student_t_quantile_unchecked(1.0 - self.alpha, df as f64);
        }
        self.values[i]
    }
}

/// Draws n observations N(mean, σ²) one at a time (Welford update).
pub(crate) fn draw_observations<R: Rng>(rng: &mut R, n: u64, mean: f64, sigma: f64) -> GroupStats {
    let mut m = 0.0;
    let mut ss = 0.0;
    for i in 0..n {
        let y = mean + sigma * rng.sample::<f64, _>(StandardNormal);
        let k = (i + 1) as f64;
        let d = y - m;
        m += d / k;
        ss += d * (y - m);
    }
    GroupStats { n, mean: m, ss }
}

/// Draws the mean and centred sum of squares of n observations N(mean, σ²).
pub(crate) fn draw_summary<R: Rng>(rng: &mut R, n: u64, mean: f64, sigma: f64) -> GroupStats {
    if n == 0 {
        return GroupStats {
            n,
            mean: 0.0,
            ss: 0.0,
        };
    }
    let nf = n as f64;
    let m = mean + sigma / nf.sqrt() * rng.sample::<f64, _>(StandardNormal);
    let ss = if n >= 2 {
        let chi = ChiSquared::new(nf - 1.0).expect("positive degrees of freedom");
        sigma * sigma * chi.sample(rng)
    } else {
        0.0
    };
    GroupStats { n, mean: m, ss }
}

/// Scenario constants shared by all replicates.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Simulator {
    scenario: Scenario,
    formula: SampleSizeFormula,
    key: CellKey,
}

impl Simulator {
    pub(crate) fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        Ok(Self {
            scenario: *scenario,
            formula: SampleSizeFormula::new(scenario.design.alpha, scenario.design.beta)?,
            key: scenario.cell_key(),
        })
    }

    pub(crate) fn stage1<R: Rng>(&self, rng: &mut R) -> (GroupStats, GroupStats) {
        let d = &self.scenario.design;
        let draw = match self.scenario.sampling {
            SamplingMode::SufficientStatistics => draw_summary::<R>,
            _ => draw_observations::<R>,
        };
        let g1 = draw(rng, d.n1_stage1, self.scenario.true_delta, d.sigma);
        let g2 = draw(rng, d.n2_stage1, 0.0, d.sigma);
        (g1, g2)
    }

    pub(crate) fn stage2_size(&self, total_variance: f64) -> u64 {
        let d = &self.scenario.design;
        let n_hat = self
            .formula
            .per_group(d.delta_up, d.assumed_diff, total_variance);
        apply_ssr_rule(n_hat, d.n1_stage1, &self.scenario.rule)
    }

    pub(crate) fn stage2<R: Rng>(&self, rng: &mut R, m: u64) -> (GroupStats, GroupStats) {
        let d = &self.scenario.design;
        let draw = match self.scenario.sampling {
            SamplingMode::Observations => draw_observations::<R>,
            _ => draw_summary::<R>,
        };
        let g1 = draw(rng, m, self.scenario.true_delta, d.sigma);
        let g2 = draw(rng, m, 0.0, d.sigma);
        (g1, g2)
    }

    pub(crate) fn final_test(
        &self,
        g1: &GroupStats,
        g2: &GroupStats,
        tq: &mut TQuantiles,
    ) -> TostOutcome {
        let d = &self.scenario.design;
        let t = tq.upper(g1.n + g2.n - 2);
        tost_from_stats(g1, g2, d.delta_low, d.delta_up, t)
    }

    pub(crate) fn replicate(&self, index: u64, tq: &mut TQuantiles) -> TrialRecord {
        let mut rng = replicate_rng(self.scenario.master_seed, self.key, index);
        let (a1, a2) = self.stage1(&mut rng);
        let stage1 = StageSummary::from_groups(&a1, &a2);
        let m = self.stage2_size(stage1.total_variance);
        let (b1, b2) = self.stage2(&mut rng, m);
        let outcome = self.final_test(&a1.combine(&b1), &a2.combine(&b2), tq);
        TrialRecord {
            outcome,
            stage1,
            stage2: m,
            realized_n: a1.n + m,
        }
    }
}

/// Simulates replicate `replicate_index` of a scenario.
pub fn simulate_trial(scenario: &Scenario, replicate_index: u64) -> Result<TrialRecord> {
    let sim = Simulator::new(scenario)?;
    let mut tq = TQuantiles::new(scenario.design.alpha);
    Ok(sim.replicate(replicate_index, &mut tq))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    /// Counts of Case1..Case4.
    pub counts: [u64; 4],
    pub mean_realized_n: f64,
    /// Sample standard deviation (n - 1 denominator) of the realised
    /// per-group size.
    pub sd_realized_n: f64,
    pub mean_sigma_t2: f64,
}

impl ScenarioResult {
    pub fn replications(&self) -> u64 {
        self.scenario.replications
    }

    pub fn pct(&self, case: CaseLabel) -> f64 {
        100.0 * self.counts[case.index()] as f64 / self.replications() as f64
    }

    /// %Case1 + %Case2, the non-inferiority rejection rate.
    pub fn ni_rejection_pct(&self) -> f64 {
        self.pct(CaseLabel::Case1) + self.pct(CaseLabel::Case2)
    }

    /// Binomial standard error, in percentage points, of a rate estimated
    /// from this many replicates.
    pub fn binomial_se_pct(&self, pct: f64) -> f64 {
        let p = pct / 100.0;
        100.0 * (p * (1.0 - p) / self.replications() as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    counts: [u64; 4],
    sum_n: u128,
    sum_n2: u128,
    sum_s2: f64,
}

impl Tally {
    fn add(&mut self, rec: &TrialRecord) {
        self.counts[rec.outcome.case_label.index()] += 1;
        let n = rec.realized_n as u128;
        self.sum_n += n;
        self.sum_n2 += n * n;
        self.sum_s2 += rec.stage1.total_variance;
    }

    fn merge(mut self, other: &Tally) -> Tally {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        self.sum_n += other.sum_n;
        self.sum_n2 += other.sum_n2;
        self.sum_s2 += other.sum_s2;
        self
    }
}

pub(crate) fn chunk_ranges(total: u64) -> Vec<(u64, u64)> {
    (0..total.div_ceil(CHUNK))
        .map(|c| (c * CHUNK, ((c + 1) * CHUNK).min(total)))
        .collect()
}

/// Runs all replicates of a scenario on the current rayon pool.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioResult> {
    let sim = Simulator::new(scenario)?;
    let tallies: Vec<Tally> = chunk_ranges(scenario.replications)
        .into_par_iter()
        .map_init(
            || TQuantiles::new(scenario.design.alpha),
            |tq, (lo, hi)| {
                let mut t = Tally::default();
                for i in lo..hi {
                    t.add(&sim.replicate(i, tq));
                }
                t
            },
        )
        .collect();
    let total = tallies.iter().fold(Tally::default(), |acc, t| acc.merge(t));

    let reps = scenario.replications as u128;
    let mean_n = total.sum_n as f64 / reps as f64;
    let sd_n = if reps > 1 {
        // exact integer numerator of the sample variance
        let num = reps * total.sum_n2 - total.sum_n * total.sum_n;
        (num as f64 / (reps * (reps - 1)) as f64).sqrt()
    } else {
        0.0
    };
    Ok(ScenarioResult {
        scenario: *scenario,
        counts: total.counts,
        mean_realized_n: mean_n,
        sd_realized_n: sd_n,
        mean_sigma_t2: total.sum_s2 / reps as f64,
    })
}

/// Runs `f` on a dedicated pool of `workers` threads, or on the global pool
/// when `workers` is `None`.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::ThreadPool(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}
