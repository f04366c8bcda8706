//! Quick self-checks: distribution inversions, sum-of-squares identities,
//! case bookkeeping, reproducibility, CSV round trip, exact-integral
//! reference values and fixed-design calibration.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::dist::{
    central_chi2_cdf, std_normal_cdf, std_normal_quantile, student_t_cdf, student_t_quantile,
    DegreesOfFreedom,
};
use crate::engine::{run_scenario, with_workers, Scenario};
use crate::exact::{eq_type1_exact, ni_type1_exact, ExactSetting, StoppingDf};
use crate::io::results::{read_results, write_results};
use crate::ssr::{MaxSampleSize, SsrRule};
use crate::trial::{summarize_stage1, StageData};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check {
        name,
        passed,
        detail,
    }
}

fn quantile_inversion(instances: usize, seed: u64) -> Check {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let p: f64 = rng.random_range(1e-6..1.0 - 1e-6);
        let df = DegreesOfFreedom::new(rng.random_range(1.0..500.0)).expect("positive df");
        let z = std_normal_quantile(p).expect("p in (0,1)");
        worst = worst.max((std_normal_cdf(z).expect("finite") - p).abs());
        let t = student_t_quantile(p, df).expect("p in (0,1)");
        worst = worst.max((student_t_cdf(t, df).expect("finite") - p).abs());
    }
    check(
        "quantile/CDF inversion",
        worst < 1e-9,
        format!("{instances} instances, max |F(F^-1(p)) - p| = {worst:.2e}"),
    )
}

fn chi2_reference() -> Check {
    // P(χ²_1 ≤ 3.841459) = 0.95, P(χ²_10 ≤ 18.307038) = 0.95
    let a = central_chi2_cdf(
        3.841_458_820_694_124,
        DegreesOfFreedom::new(1.0).expect("df"),
    )
    .unwrap_or(f64::NAN);
    let b = central_chi2_cdf(
        18.307_038_053_275_146,
        DegreesOfFreedom::new(10.0).expect("df"),
    )
    .unwrap_or(f64::NAN);
    let err = (a - 0.95).abs().max((b - 0.95).abs());
    check(
        "chi-squared reference points",
        err < 1e-9,
        format!("max error {err:.2e}"),
    )
}

fn cochran_identity(instances: usize, seed: u64) -> Check {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let n = rng.random_range(2..40usize);
        let shift: f64 = rng.random_range(-3.0..3.0);
        let g1: Vec<f64> = (0..n)
            .map(|_| shift + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let g2: Vec<f64> = (0..n)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let all: Vec<f64> = g1.iter().chain(&g2).copied().collect();
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        let total_ss: f64 = all.iter().map(|x| (x - mean).powi(2)).sum();
        let s = summarize_stage1(&StageData::new(g1, g2).expect("non-empty")).expect("valid");
        let scale = total_ss.max(1.0);
        worst = worst
            .max((s.q1 + s.q2 - total_ss).abs() / scale)
            .max((s.total_variance * (2 * n - 1) as f64 - total_ss).abs() / scale);
    }
    check(
        "Q1 + Q2 = total sum of squares",
        worst < 1e-12,
        format!("{instances} instances, max relative error {worst:.2e}"),
    )
}

fn case_bookkeeping(seed: u64) -> Vec<Check> {
    let scenario = Scenario::at_boundary(
        0.8,
        1.0,
        15,
        SsrRule::new(18, MaxSampleSize::Finite(30)).expect("rule"),
        20_000,
        seed,
    )
    .expect("valid scenario");
    let r = match run_scenario(&scenario) {
        Ok(r) => r,
        Err(e) => return vec![check("case partition", false, e.to_string())],
    };
    let total: u64 = r.counts.iter().sum();
    let pct_sum: f64 = crate::tost::CaseLabel::ALL.iter().map(|&c| r.pct(c)).sum();
    let ni = r.pct(crate::tost::CaseLabel::Case1) + r.pct(crate::tost::CaseLabel::Case2);
    let mut out = vec![
        check(
            "case partition",
            total == scenario.replications && (pct_sum - 100.0).abs() < 1e-9,
            format!("counts sum {total}, percentages sum {pct_sum:.12}"),
        ),
        check(
            "NI rejection = Case 1 + Case 2",
            (r.ni_rejection_pct() - ni).abs() < 1e-12,
            format!("{:.4} vs {:.4}", r.ni_rejection_pct(), ni),
        ),
    ];

    let by_workers: Vec<_> = [1usize, 2, 3]
        .iter()
        .map(|&w| with_workers(Some(w), || run_scenario(&scenario)))
        .collect();
    let same = by_workers.iter().all(|x| matches!(x, Ok(Ok(v)) if *v == r));
    out.push(check(
        "identical results for 1, 2 and 3 workers",
        same,
        format!("{} runs compared", by_workers.len()),
    ));

    let mut buf = Vec::new();
    let round_trip = write_results(&mut buf, std::slice::from_ref(&r))
        .and_then(|_| read_results(buf.as_slice()))
        .map(|back| back == vec![r]);
    out.push(check(
        "CSV round trip",
        matches!(round_trip, Ok(true)),
        format!("{round_trip:?}"),
    ));
    out
}

fn exact_reference() -> Check {
    // threshold-rule reference values, n1 = 12, 24, 40 (within-group df)
    const EXPECTED: [(u64, [f64; 7]); 3] = [
        (12, [0.0401, 0.5946, 0.0674, 0.0603, 0.0009, 0.0015, 0.0212]),
        (24, [0.0396, 0.5661, 0.0699, 0.0612, 0.0193, 0.0340, 0.0410]),
        (
            40,
            [0.0393, 0.5510, 0.07125, 0.0617, 0.0379, 0.0687, 0.0603],
        ),
    ];
    let mut worst = 0.0f64;
    for (n1, want) in EXPECTED {
        let got = ExactSetting::at_boundary(n1, 0.05, 0.5).and_then(|s| {
            let s = s.with_stop_df(StoppingDf::WithinGroup);
            let ni = ni_type1_exact(&s)?;
            let eq = eq_type1_exact(&s)?;
            Ok([
                ni.joint_small,
                ni.prob_small,
                ni.conditional,
                ni.unconditional,
                eq.joint_small,
                eq.conditional,
                eq.unconditional,
            ])
        });
        match got {
            Ok(g) => {
                for (a, b) in g.iter().zip(want) {
                    worst = worst.max((a - b).abs());
                }
            }
            Err(e) => return check("threshold-rule exact values", false, e.to_string()),
        }
    }
    check(
        "threshold-rule exact values",
        worst <= 1e-3,
        format!("max deviation {worst:.2e} from reference table"),
    )
}

fn fixed_design_calibration(reps: u64, seed: u64) -> Vec<Check> {
    [(10u64, 0.5), (15, 1.0), (30, 0.75)]
        .iter()
        .map(|&(n, d)| {
            let res = Scenario::at_boundary(d, 1.0, n, SsrRule::fixed(n), reps, seed)
                .and_then(|s| run_scenario(&s));
            match res {
                Ok(r) => {
                    let pct = r.ni_rejection_pct();
                    let se = r.binomial_se_pct(5.0);
                    check(
                        "fixed design rejects at 5%",
                        (pct - 5.0).abs() <= 3.0 * se,
                        format!("n={n} delta0={d}: {pct:.4}% (3 SE = {:.4})", 3.0 * se),
                    )
                }
                Err(e) => check("fixed design rejects at 5%", false, e.to_string()),
            }
        })
        .collect()
}

/// Runs every check. `replications` sizes the calibration simulations.
pub fn run_validation(replications: u64, seed: u64) -> Vec<Check> {
    let mut out = vec![
        quantile_inversion(10_000, seed),
        chi2_reference(),
        cochran_identity(10_000, seed),
    ];
    out.extend(case_bookkeeping(seed));
    out.push(exact_reference());
    out.extend(fixed_design_calibration(replications.max(1), seed));
    out
}
