//! Simulation of the threshold stopping rule handled exactly in
//! [`crate::exact`]: stop after stage 1 when Q1 + Q2 ≤ c, otherwise add a
//! large stage 2.

use rayon::prelude::*;

use super::{chunk_ranges, draw_observations, draw_summary, TQuantiles};
use crate::error::{Error, Result};
use crate::exact::ExactSetting;
use crate::rng::{replicate_rng, CellKey};
use crate::tost::tost_from_stats;
use crate::trial::StageSummary;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdMcResult {
    pub replications: u64,
    /// Trials that stopped after stage 1.
    pub stopped: u64,
    /// H02 rejected.
    pub ni_rejections: u64,
    /// Both nulls rejected.
    pub eq_rejections: u64,
    /// H02 rejected and stopped.
    pub ni_joint_small: u64,
    pub eq_joint_small: u64,
}

impl ThresholdMcResult {
    pub fn ni_rate(&self) -> f64 {
        self.ni_rejections as f64 / self.replications as f64
    }

    pub fn eq_rate(&self) -> f64 {
        self.eq_rejections as f64 / self.replications as f64
    }

    pub fn stop_rate(&self) -> f64 {
        self.stopped as f64 / self.replications as f64
    }

    /// √(p(1-p)/R) for a proportion p.
    pub fn binomial_se(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.replications as f64).sqrt()
    }
}

/// `continue_factor`·n1 subjects per group are added when the trial
/// continues; stage 2 is drawn as sufficient statistics.
pub fn simulate_threshold_rule(
    setting: &ExactSetting,
    continue_factor: u64,
    replications: u64,
    master_seed: u64,
) -> Result<ThresholdMcResult> {
    setting.validate()?;
    if replications == 0 {
        return Err(Error::InvalidDesign(
            "replications must be at least 1".into(),
        ));
    }
    let n1 = setting.n1;
    let m = continue_factor * n1;
    let key = CellKey::from_words(&[
        0x7468_7265_7368, // distinguishes these streams from SSR cells
        n1,
        m,
        setting.alpha.to_bits(),
        setting.sigma.to_bits(),
        setting.delta.to_bits(),
        setting.delta_up.to_bits(),
        setting.delta_low.to_bits(),
        setting.c.to_bits(),
    ]);
    let s = *setting;
    let tallies: Vec<[u64; 5]> = chunk_ranges(replications)
        .into_par_iter()
        .map_init(
            || TQuantiles::new(s.alpha),
            |tq, (lo, hi)| {
                let mut t = [0u64; 5];
                for i in lo..hi {
                    let mut rng = replicate_rng(master_seed, key, i);
                    let a1 = draw_observations(&mut rng, n1, s.delta, s.sigma);
                    let a2 = draw_observations(&mut rng, n1, 0.0, s.sigma);
                    let summary = StageSummary::from_groups(&a1, &a2);
                    let stop = summary.q1 + summary.q2 <= s.c;
                    let (g1, g2) = if stop {
                        (a1, a2)
                    } else {
                        let b1 = draw_summary(&mut rng, m, s.delta, s.sigma);
                        let b2 = draw_summary(&mut rng, m, 0.0, s.sigma);
                        (a1.combine(&b1), a2.combine(&b2))
                    };
                    let out = tost_from_stats(
                        &g1,
                        &g2,
                        s.delta_low,
                        s.delta_up,
                        tq.upper(g1.n + g2.n - 2),
                    );
                    let eq = out.reject_h01 && out.reject_h02;
                    t[0] += stop as u64;
                    t[1] += out.reject_h02 as u64;
                    t[2] += eq as u64;
                    t[3] += (stop && out.reject_h02) as u64;
                    t[4] += (stop && eq) as u64;
                }
                t
            },
        )
        .collect();
    let mut sum = [0u64; 5];
    for t in &tallies {
        for (a, b) in sum.iter_mut().zip(t) {
            *a += b;
        }
    }
    Ok(ThresholdMcResult {
        replications,
        stopped: sum[0],
        ni_rejections: sum[1],
        eq_rejections: sum[2],
        ni_joint_small: sum[3],
        eq_joint_small: sum[4],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{ni_type1_exact, prob_small_variance};

    #[test]
    fn stopping_and_joint_rates_match_exact() {
        let setting = ExactSetting::at_boundary(12, 0.05, 0.5).unwrap();
        let r = simulate_threshold_rule(&setting, 100, 100_000, 3).unwrap();
        let p = prob_small_variance(&setting).unwrap();
        let se = r.binomial_se(p);
        assert!(
            (r.stop_rate() - p).abs() < 4.0 * se,
            "{} vs {p}",
            r.stop_rate()
        );
        let ni = ni_type1_exact(&setting).unwrap();
        let joint = r.ni_joint_small as f64 / r.replications as f64;
        assert!((joint - ni.joint_small).abs() < 4.0 * r.binomial_se(ni.joint_small));
    }
}
