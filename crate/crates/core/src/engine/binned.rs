//! Rejection rates by interval of the interim variance estimate, for the
//! fixed design and the two-stage design on the same stage-1 data.

use rayon::prelude::*;

use super::{chunk_ranges, Simulator, TQuantiles};
use crate::error::{Error, Result};
use crate::rng::replicate_rng;
use crate::ssr::{SampleSizeFormula, SsrRule};
use crate::trial::StageSummary;

use super::{SamplingMode, Scenario};

/// Equal-count bins above the m = 0 region.
pub const UPPER_BINS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RejectionBin {
    /// σ̂_T² range (lower, upper]; the first bin starts at 0.
    pub lower: f64,
    pub upper: f64,
    pub count: u64,
    pub fixed_reject_pct: f64,
    pub two_stage_reject_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinnedRejectionReport {
    pub n_stage1: u64,
    pub delta0: f64,
    pub replications: u64,
    /// Largest σ̂_T² with m = 0.
    pub first_bin_threshold: f64,
    /// Share of replicates with m = 0, in percent.
    pub first_bin_mass_pct: f64,
    /// First bin (m = 0) followed by the equal-count bins.
    pub bins: Vec<RejectionBin>,
    pub fixed_overall_pct: f64,
    pub two_stage_overall_pct: f64,
}

#[derive(Debug, Clone, Copy)]
struct Paired {
    sigma_t2: f64,
    stopped: bool,
    fixed: bool,
    two_stage: bool,
}

/// σ = 1, α = 0.05, β = 0.10, margins ±δ0, data at δ0, rule 0 ≤ m < ∞.
/// Rejection means rejection of H02 (non-inferiority).
pub fn binned_rejection_analysis(
    n_stage1: u64,
    delta0: f64,
    replications: u64,
    master_seed: u64,
) -> Result<BinnedRejectionReport> {
    if replications < (UPPER_BINS + 1) as u64 {
        return Err(Error::InvalidDesign(format!(
            "binned analysis needs at least {} replicates",
            UPPER_BINS + 1
        )));
    }
    let mut scenario = Scenario::at_boundary(
        delta0,
        1.0,
        n_stage1,
        SsrRule::unbounded_from(n_stage1),
        replications,
        master_seed,
    )?;
    scenario.sampling = SamplingMode::Hybrid;
    let sim = Simulator::new(&scenario)?;
    let key = scenario.cell_key();

    let chunks: Vec<Vec<Paired>> = chunk_ranges(replications)
        .into_par_iter()
        .map_init(
            || TQuantiles::new(0.05),
            |tq, (lo, hi)| {
                (lo..hi)
                    .map(|i| {
                        let mut rng = replicate_rng(master_seed, key, i);
                        let (a1, a2) = sim.stage1(&mut rng);
                        let summary = StageSummary::from_groups(&a1, &a2);
                        let fixed = sim.final_test(&a1, &a2, tq).reject_h02;
                        let m = sim.stage2_size(summary.total_variance);
                        let (b1, b2) = sim.stage2(&mut rng, m);
                        let two_stage = sim
                            .final_test(&a1.combine(&b1), &a2.combine(&b2), tq)
                            .reject_h02;
                        Paired {
                            sigma_t2: summary.total_variance,
                            stopped: m == 0,
                            fixed,
                            two_stage,
                        }
                    })
                    .collect()
            },
        )
        .collect();
    let mut all: Vec<Paired> = chunks.into_iter().flatten().collect();

    let threshold = SampleSizeFormula::new(0.05, 0.10)?.variance_threshold(delta0, 0.0, n_stage1);
    let (first, mut rest): (Vec<Paired>, Vec<Paired>) = all.drain(..).partition(|p| p.stopped);
    rest.sort_by(|a, b| a.sigma_t2.total_cmp(&b.sigma_t2));

    let pct = |xs: &[Paired], f: fn(&Paired) -> bool| {
        if xs.is_empty() {
            0.0
        } else {
            100.0 * xs.iter().filter(|p| f(p)).count() as f64 / xs.len() as f64
        }
    };
    let mut bins = vec![RejectionBin {
        lower: 0.0,
        upper: threshold,
        count: first.len() as u64,
        fixed_reject_pct: pct(&first, |p| p.fixed),
        two_stage_reject_pct: pct(&first, |p| p.two_stage),
    }];
    let mut lower = threshold;
    let n = rest.len();
    for b in 0..UPPER_BINS {
        let slice = &rest[b * n / UPPER_BINS..(b + 1) * n / UPPER_BINS];
        let upper = slice.last().map_or(lower, |p| p.sigma_t2);
        bins.push(RejectionBin {
            lower,
            upper,
            count: slice.len() as u64,
            fixed_reject_pct: pct(slice, |p| p.fixed),
            two_stage_reject_pct: pct(slice, |p| p.two_stage),
        });
        lower = upper;
    }

    let total = replications as f64;
    let count_of =
        |f: fn(&Paired) -> bool| first.iter().chain(&rest).filter(|p| f(p)).count() as f64;
    Ok(BinnedRejectionReport {
        n_stage1,
        delta0,
        replications,
        first_bin_threshold: threshold,
        first_bin_mass_pct: 100.0 * first.len() as f64 / total,
        bins,
        fixed_overall_pct: 100.0 * count_of(|p| p.fixed) / total,
        two_stage_overall_pct: 100.0 * count_of(|p| p.two_stage) / total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structure_and_counts() {
        let r = binned_rejection_analysis(15, 1.0, 20_003, 8).unwrap();
        assert_eq!(r.bins.len(), UPPER_BINS + 1);
        assert_eq!(r.bins.iter().map(|b| b.count).sum::<u64>(), 20_003);
        let sizes: Vec<u64> = r.bins[1..].iter().map(|b| b.count).collect();
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        assert!(hi - lo <= 1, "{sizes:?}");
        assert!((r.first_bin_threshold - 0.693).abs() < 1e-3);
        for w in r.bins.windows(2) {
            assert!(w[0].upper <= w[1].upper);
        }
        // in the m = 0 region both designs test the same data
        assert_eq!(r.bins[0].fixed_reject_pct, r.bins[0].two_stage_reject_pct);
        let weighted: f64 = r
            .bins
            .iter()
            .map(|b| b.fixed_reject_pct * b.count as f64)
            .sum::<f64>()
            / 20_003.0;
        assert!((weighted - r.fixed_overall_pct).abs() < 1e-9);
    }

    #[test]
    fn too_few_replicates() {
        assert!(binned_rejection_analysis(15, 1.0, 5, 1).is_err());
    }
}
