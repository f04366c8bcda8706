//! Two one-sided tests (TOST) and the four-way outcome classification.
//!
//! H01: δ ≤ δ_low is rejected when the lower statistic exceeds t_{1-α}(n1+n2-2);
//! H02: δ ≥ δ_up is rejected when the upper statistic falls below t_α. The
//! non-inferiority test is the H02 half on its own.

use std::fmt;

use crate::dist;
use crate::error::{Error, Result};
use crate::trial::{GroupStats, TrialDesign};

/// Joint outcome of the two one-sided tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CaseLabel {
    /// Both nulls rejected: equivalence declared.
    Case1,
    /// H02 rejected, H01 not.
    Case2,
    /// H01 rejected, H02 not.
    Case3,
    /// Neither rejected.
    Case4,
}

impl CaseLabel {
    pub const ALL: [CaseLabel; 4] = [
        CaseLabel::Case1,
        CaseLabel::Case2,
        CaseLabel::Case3,
        CaseLabel::Case4,
    ];

    /// Zero-based position, for count arrays.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn number(self) -> u8 {
        self as u8 + 1
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Case{}", self.number())
    }
}

pub fn classify_case(reject_h01: bool, reject_h02: bool) -> CaseLabel {
    match (reject_h01, reject_h02) {
        (true, true) => CaseLabel::Case1,
        (false, true) => CaseLabel::Case2,
        (true, false) => CaseLabel::Case3,
        (false, false) => CaseLabel::Case4,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TostOutcome {
    /// ȳ1 - ȳ2
    pub diff: f64,
    pub pooled_sd: f64,
    /// Statistic against δ_low.
    pub t_low: f64,
    /// Statistic against δ_up.
    pub t_up: f64,
    /// Bounds of the (1 - 2α) confidence interval.
    pub ci_low: f64,
    pub ci_high: f64,
    pub case_label: CaseLabel,
    pub reject_h01: bool,
    pub reject_h02: bool,
}

/// Non-inferiority decision against δ_up (Case1 or Case2).
pub fn ni_reject_h02(outcome: &TostOutcome) -> bool {
    outcome.reject_h02
}

pub fn pooled_variance(group1: &[f64], group2: &[f64]) -> Result<f64> {
    if group1.len() < 2 || group2.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "pooled variance needs at least 2 observations per group, got {} and {}",
            group1.len(),
            group2.len()
        )));
    }
    let g1 = GroupStats::from_values(group1);
    let g2 = GroupStats::from_values(group2);
    Ok((g1.ss + g2.ss) / (g1.n + g2.n - 2) as f64)
}

/// Runs both one-sided tests on raw data.
///
/// When all observations within each group coincide (s = 0) the decision is
/// the s → 0 limit: H01 rejected iff d > δ_low, H02 rejected iff d < δ_up.
pub fn tost_decide(group1: &[f64], group2: &[f64], design: &TrialDesign) -> Result<TostOutcome> {
    pooled_variance(group1, group2)?;
    let g1 = GroupStats::from_values(group1);
    let g2 = GroupStats::from_values(group2);
    let df = (g1.n + g2.n - 2) as f64;
    let t_crit = dist::student_t_quantile_unchecked(1.0 - design.alpha, df);
    Ok(tost_from_stats(
        &g1,
        &g2,
        design.delta_low,
        design.delta_up,
        t_crit,
    ))
}

/// TOST from per-group sufficient statistics; `t_crit` is t_{1-α}(n1+n2-2).
pub fn tost_from_stats(
    g1: &GroupStats,
    g2: &GroupStats,
    delta_low: f64,
    delta_up: f64,
    t_crit: f64,
) -> TostOutcome {
    let (n1, n2) = (g1.n as f64, g2.n as f64);
    let diff = g1.mean - g2.mean;
    let s2 = (g1.ss + g2.ss) / (n1 + n2 - 2.0);
    let s = s2.max(0.0).sqrt();
    let scale = (n1 * n2 / (n1 + n2)).sqrt();

    let (t_low, t_up, reject_h01, reject_h02, half_width) = if s > 0.0 {
        let t_low = scale * (diff - delta_low) / s;
        let t_up = scale * (diff - delta_up) / s;
        (
            t_low,
            t_up,
            t_low > t_crit,
            t_up < -t_crit,
            t_crit * s / scale,
        )
    } else {
        let signed_inf = |v: f64| {
            if v > 0.0 {
                f64::INFINITY
            } else if v < 0.0 {
                f64::NEG_INFINITY
            } else {
                0.0
            }
        };
        (
            signed_inf(diff - delta_low),
            signed_inf(diff - delta_up),
            diff > delta_low,
            diff < delta_up,
            0.0,
        )
    };

    TostOutcome {
        diff,
        pooled_sd: s,
        t_low,
        t_up,
        ci_low: diff - half_width,
        ci_high: diff + half_width,
        case_label: classify_case(reject_h01, reject_h02),
        reject_h01,
        reject_h02,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn design(low: f64, up: f64) -> TrialDesign {
        TrialDesign {
            delta_low: low,
            delta_up: up,
            sigma: 1.0,
            n1_stage1: 2,
            n2_stage1: 2,
            alpha: 0.05,
            beta: 0.1,
            assumed_diff: 0.0,
        }
    }

    #[test]
    fn pooled_variance_values() {
        assert_eq!(pooled_variance(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(pooled_variance(&[0.0, 2.0], &[1.0, 3.0]).unwrap(), 2.0);
        assert!(pooled_variance(&[0.0], &[1.0, 3.0]).is_err());
    }

    #[test]
    fn pooled_variance_is_q1_over_n_minus_2() {
        let g1 = [0.4, 1.9, -0.3, 2.2, 0.8];
        let g2 = [1.5, -0.7, 0.1, 0.9];
        let s = crate::trial::summarize_stage1(
            &crate::trial::StageData::new(g1.to_vec(), g2.to_vec()).unwrap(),
        )
        .unwrap();
        let pv = pooled_variance(&g1, &g2).unwrap();
        assert!((pv - s.q1 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn case_mapping_is_exhaustive() {
        let mut seen = std::collections::HashSet::new();
        for r1 in [false, true] {
            for r2 in [false, true] {
                seen.insert(classify_case(r1, r2));
            }
        }
        assert_eq!(seen.len(), 4);
        assert_eq!(classify_case(true, true), CaseLabel::Case1);
        assert_eq!(classify_case(false, true), CaseLabel::Case2);
        assert_eq!(classify_case(true, false), CaseLabel::Case3);
        assert_eq!(classify_case(false, false), CaseLabel::Case4);
    }

    #[test]
    fn clear_equivalence_is_case1() {
        let g1 = [0.01, -0.01, 0.02, -0.02];
        let g2 = [0.0, 0.01, -0.01, 0.0];
        let out = tost_decide(&g1, &g2, &design(-5.0, 5.0)).unwrap();
        assert_eq!(out.case_label, CaseLabel::Case1);
        assert!(ni_reject_h02(&out));
    }

    #[test]
    fn large_negative_difference_is_case2() {
        let g1 = [-50.0, -50.5, -49.5];
        let g2 = [0.0, 0.5, -0.5];
        let out = tost_decide(&g1, &g2, &design(-1.0, 1.0)).unwrap();
        assert!(out.reject_h02 && !out.reject_h01);
        assert_eq!(out.case_label, CaseLabel::Case2);
        assert!(out.ci_low < -1.0);
    }

    #[test]
    fn large_positive_difference_is_case3() {
        let g1 = [50.0, 50.5, 49.5];
        let g2 = [0.0, 0.5, -0.5];
        let out = tost_decide(&g1, &g2, &design(-1.0, 1.0)).unwrap();
        assert_eq!(out.case_label, CaseLabel::Case3);
        assert!(!ni_reject_h02(&out));
    }

    #[test]
    fn zero_spread_uses_strict_margin_comparison() {
        let out = tost_decide(&[0.5, 0.5], &[0.0, 0.0], &design(-1.0, 1.0)).unwrap();
        assert_eq!(out.case_label, CaseLabel::Case1);
        assert_eq!((out.ci_low, out.ci_high), (0.5, 0.5));
        let out = tost_decide(&[1.0, 1.0], &[0.0, 0.0], &design(-1.0, 1.0)).unwrap();
        assert_eq!(out.case_label, CaseLabel::Case3);
        let out = tost_decide(&[-3.0, -3.0], &[0.0, 0.0], &design(-1.0, 1.0)).unwrap();
        assert_eq!(out.case_label, CaseLabel::Case2);
    }

    fn random_groups(rng: &mut Xoshiro256PlusPlus) -> (Vec<f64>, Vec<f64>) {
        let n1 = rng.random_range(2..30);
        let n2 = rng.random_range(2..30);
        let shift: f64 = rng.random_range(-1.5..1.5);
        let sd: f64 = rng.random_range(0.1..3.0);
        let g1 = (0..n1)
            .map(|_| shift + sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let g2 = (0..n2)
            .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        (g1, g2)
    }

    #[test]
    fn decision_matches_ci_containment() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(11);
        for _ in 0..10_000 {
            let (g1, g2) = random_groups(&mut rng);
            let margin: f64 = rng.random_range(0.05..2.0);
            let d = design(-margin, margin);
            let out = tost_decide(&g1, &g2, &d).unwrap();
            assert!(out.ci_low <= out.ci_high);
            let contained = out.ci_low > d.delta_low && out.ci_high < d.delta_up;
            assert_eq!(contained, out.case_label == CaseLabel::Case1);
            assert_eq!(out.ci_low > d.delta_low, out.reject_h01);
            assert_eq!(out.ci_high < d.delta_up, out.reject_h02);
        }
    }

    #[test]
    fn mirror_symmetry_swaps_cases() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(12);
        for _ in 0..2_000 {
            let (g1, g2) = random_groups(&mut rng);
            let lo: f64 = rng.random_range(-2.0..0.0);
            let hi: f64 = rng.random_range(0.01..2.0);
            let out = tost_decide(&g1, &g2, &design(lo, hi)).unwrap();
            let neg1: Vec<f64> = g1.iter().map(|v| -v).collect();
            let neg2: Vec<f64> = g2.iter().map(|v| -v).collect();
            let mirrored = tost_decide(&neg1, &neg2, &design(-hi, -lo)).unwrap();
            assert_eq!(out.reject_h01, mirrored.reject_h02);
            assert_eq!(out.reject_h02, mirrored.reject_h01);
            let swapped = match out.case_label {
                CaseLabel::Case2 => CaseLabel::Case3,
                CaseLabel::Case3 => CaseLabel::Case2,
                c => c,
            };
            assert_eq!(mirrored.case_label, swapped);
        }
    }

    #[test]
    fn larger_spread_never_creates_equivalence() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(13);
        for _ in 0..2_000 {
            let n = rng.random_range(2..40u64);
            let mean: f64 = rng.random_range(-1.0..1.0);
            let ss: f64 = rng.random_range(0.01..50.0);
            let g1 = GroupStats { n, mean, ss };
            let g2 = GroupStats { n, mean: 0.0, ss };
            let t = dist::student_t_quantile_unchecked(0.95, (2 * n - 2) as f64);
            let base = tost_from_stats(&g1, &g2, -0.8, 0.8, t);
            let wider = tost_from_stats(
                &GroupStats { ss: ss * 1.7, ..g1 },
                &GroupStats { ss: ss * 1.7, ..g2 },
                -0.8,
                0.8,
                t,
            );
            if base.case_label != CaseLabel::Case1 {
                assert_ne!(wider.case_label, CaseLabel::Case1);
            }
        }
    }

    #[test]
    fn infinite_margins_always_equivalent() {
        let out = tost_decide(
            &[0.3, -2.0, 1.0],
            &[4.0, 0.0, -1.0],
            &design(f64::NEG_INFINITY, f64::INFINITY),
        )
        .unwrap();
        assert_eq!(out.case_label, CaseLabel::Case1);
    }
}
