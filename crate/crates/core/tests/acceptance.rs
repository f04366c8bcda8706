//! Acceptance criteria. Each criterion is one test and prints one
//! `[PASS]`/`[FAIL]` line (written straight to stderr so it shows without
//! `--nocapture`), followed by indented detail lines.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;

use blindssr::dist::{
    noncentral_chi2_cdf, std_normal_cdf, std_normal_quantile, student_t_cdf, student_t_quantile,
    DegreesOfFreedom, NoncentralityParameter,
};
use blindssr::engine::grid::delta0_range;
use blindssr::engine::{
    binned_rejection_analysis, peak_alpha_scan, run_scenario, simulate_threshold_rule,
    with_workers, SamplingMode, Scenario, ScenarioResult,
};
use blindssr::exact::{eq_type1_exact, ni_type1_exact, ExactSetting, StoppingDf};
use blindssr::io::results::{read_results, write_results};
use blindssr::ssr::{expected_n_hat, limit_n_hat_infinite_margin, MaxSampleSize, SsrRule};
use blindssr::tost::{classify_case, tost_decide, CaseLabel};
use blindssr::trial::{summarize_stage1, StageData, TrialDesign};

/// Master seed for every simulation below, fixed before any run.
const SEED: u64 = 0xC0FFEE;

struct Report {
    id: &'static str,
    title: &'static str,
    details: Vec<String>,
    ok: bool,
}

impl Report {
    fn new(id: &'static str, title: &'static str) -> Self {
        Report {
            id,
            title,
            details: Vec::new(),
            ok: true,
        }
    }

    /// Records one comparison against `target ± tol`.
    fn within(&mut self, what: &str, got: f64, target: f64, tol: f64) {
        let pass = (got - target).abs() <= tol;
        self.ok &= pass;
        self.details.push(format!(
            "{} {what}: {got:.6} (target {target} ± {tol}, diff {:+.6})",
            if pass { "ok  " } else { "MISS" },
            got - target
        ));
    }

    fn require(&mut self, what: String, pass: bool) {
        self.ok &= pass;
        self.details
            .push(format!("{} {what}", if pass { "ok  " } else { "MISS" }));
    }

    fn note(&mut self, what: String) {
        self.details.push(format!("info {what}"));
    }

    fn finish(self) {
        let mut text = format!(
            "[{}] criterion {}: {}\n",
            if self.ok { "PASS" } else { "FAIL" },
            self.id,
            self.title
        );
        for d in &self.details {
            text.push_str("       ");
            text.push_str(d);
            text.push('\n');
        }
        let _ = std::io::stderr().lock().write_all(text.as_bytes());
        assert!(self.ok, "criterion {} failed", self.id);
    }
}

fn within_group(n1: u64) -> ExactSetting {
    ExactSetting::at_boundary(n1, 0.05, 0.5)
        .unwrap()
        .with_stop_df(StoppingDf::WithinGroup)
}

#[test]
fn criterion_1_exact_non_inferiority() {
    let mut r = Report::new("1", "exact NI values of the threshold rule, ±1e-3, < 1 s");
    // (n1, A1, P(Q ≤ c), conditional, unconditional)
    let table = [
        (12, 0.0401, 0.5946, 0.0674, 0.0603),
        (24, 0.0396, 0.5661, 0.0699, 0.0612),
        (40, 0.0393, 0.5510, 0.07125, 0.0617),
    ];
    let start = Instant::now();
    let got: Vec<_> = table
        .iter()
        .map(|t| ni_type1_exact(&within_group(t.0)).unwrap())
        .collect();
    let secs = start.elapsed().as_secs_f64();
    for (t, g) in table.iter().zip(&got) {
        r.within(&format!("n1={} A1", t.0), g.joint_small, t.1, 1e-3);
        r.within(&format!("n1={} P(Q<=c)", t.0), g.prob_small, t.2, 1e-3);
        r.within(&format!("n1={} conditional", t.0), g.conditional, t.3, 1e-3);
        r.within(
            &format!("n1={} unconditional", t.0),
            g.unconditional,
            t.4,
            1e-3,
        );
    }
    r.require(format!("runtime {secs:.4} s < 1 s"), secs < 1.0);
    r.note("stopped-trial variance taken with n-2 df; see README for the n-1 alternative".into());
    r.finish();
}

#[test]
fn criterion_2_exact_equivalence() {
    let mut r = Report::new("2", "exact EQ values of the threshold rule, ±1e-3, < 1 s");
    // (n1, joint, conditional, unconditional)
    let table = [
        (12, 0.0009, 0.0015, 0.0212),
        (24, 0.0193, 0.0340, 0.0410),
        (40, 0.0379, 0.0687, 0.0603),
    ];
    let start = Instant::now();
    let got: Vec<_> = table
        .iter()
        .map(|t| eq_type1_exact(&within_group(t.0)).unwrap())
        .collect();
    let secs = start.elapsed().as_secs_f64();
    for (t, g) in table.iter().zip(&got) {
        r.within(&format!("n1={} joint", t.0), g.joint_small, t.1, 1e-3);
        r.within(&format!("n1={} conditional", t.0), g.conditional, t.2, 1e-3);
        r.within(
            &format!("n1={} unconditional", t.0),
            g.unconditional,
            t.3,
            1e-3,
        );
    }
    r.require(format!("runtime {secs:.4} s < 1 s"), secs < 1.0);
    r.finish();
}

#[test]
fn criterion_3_threshold_rule_simulation() {
    let mut r = Report::new(
        "3",
        "simulated threshold rule (stage 2 = 100·n1) vs criterion-1 unconditional NI, 1e6 reps, 3 SE",
    );
    let reps = 1_000_000;
    for (n1, published) in [(12u64, 0.0603), (24, 0.0612), (40, 0.0617)] {
        let setting = ExactSetting::at_boundary(n1, 0.05, 0.5).unwrap();
        let mc = simulate_threshold_rule(&setting, 100, reps, SEED).unwrap();
        let se = mc.binomial_se(published);
        r.within(
            &format!("n1={n1} NI rejection"),
            mc.ni_rate(),
            published,
            3.0 * se,
        );
        let total = ni_type1_exact(&setting.with_stop_df(StoppingDf::Total)).unwrap();
        let within = ni_type1_exact(&setting.with_stop_df(StoppingDf::WithinGroup)).unwrap();
        r.note(format!(
            "n1={n1} stop rate {:.5} (exact with n-1 df {:.5}, with n-2 df {:.5}); NI {:.5} vs exact n-1 df {:.5}",
            mc.stop_rate(),
            total.prob_small,
            within.prob_small,
            mc.ni_rate(),
            total.unconditional
        ));
    }
    r.finish();
}

fn peaks_run(r: &mut Report, reps: u64, peak_tol: f64) -> f64 {
    let targets = [
        (10u64, 6.26, 1.20),
        (15, 5.78, 0.95),
        (30, 5.45, 0.75),
        (60, 5.23, 0.55),
    ];
    let grid = delta0_range(0.05, 1.5, 0.05).unwrap();
    let start = Instant::now();
    for (n, peak, at) in targets {
        let scan = peak_alpha_scan(n, &grid, reps, SEED, SamplingMode::Hybrid).unwrap();
        r.within(
            &format!("[{reps} reps] n={n} peak %Case1"),
            scan.peak_pct_case1,
            peak,
            peak_tol,
        );
        r.within(
            &format!("[{reps} reps] n={n} argmax delta0"),
            scan.argmax_delta0,
            at,
            0.05 + 1e-9,
        );
    }
    start.elapsed().as_secs_f64()
}

#[test]
fn criterion_4_peak_inflation() {
    let mut r = Report::new(
        "4",
        "peak %Case1 and its margin for n_min = n, no cap (1e6 reps ±0.15pp; 2e5 reps ±0.3pp in < 10 min)",
    );
    let full = peaks_run(&mut r, 1_000_000, 0.15);
    r.note(format!("1e6-replicate scan took {full:.1} s"));
    let desk = peaks_run(&mut r, 200_000, 0.3);
    r.require(
        format!("2e5-replicate scan took {desk:.1} s < 600 s"),
        desk < 600.0,
    );
    r.finish();
}

#[test]
fn criterion_5_binned_diagnostics() {
    let mut r = Report::new(
        "5",
        "interim-variance bins, n = 15, delta0 = 1, unbounded rule, 1e5 reps",
    );
    let rep = binned_rejection_analysis(15, 1.0, 100_000, SEED).unwrap();
    r.within("m = 0 threshold", rep.first_bin_threshold, 0.693, 0.001);
    r.within("first-bin mass %", rep.first_bin_mass_pct, 2.3, 0.15);
    r.within(
        "first-bin rejection %",
        rep.bins[0].fixed_reject_pct,
        46.0,
        2.0,
    );
    r.within(
        "two-stage overall rejection %",
        rep.two_stage_overall_pct,
        5.83,
        0.2,
    );
    r.within(
        "fixed-design overall rejection %",
        rep.fixed_overall_pct,
        5.0,
        0.15,
    );
    // Q1 + Q2 ~ noncentral chi-square(2n - 1, n·δ²/2)
    let exact_mass = noncentral_chi2_cdf(
        rep.first_bin_threshold * 29.0,
        DegreesOfFreedom::new(29.0).unwrap(),
        NoncentralityParameter::new(7.5).unwrap(),
    )
    .unwrap();
    r.note(format!("exact first-bin mass {:.4}%", 100.0 * exact_mass));
    r.finish();
}

#[test]
fn criterion_6_sample_size_limits() {
    let mut r = Report::new(
        "6",
        "expected re-estimated size and its infinite-margin limits",
    );
    let e = expected_n_hat(0.05, 15, 0.05, 0.10).unwrap();
    r.require(
        format!("E(n_hat) at delta0 = 0.05, n = 15: {e:.2} in [8600, 8700]"),
        (8600.0..=8700.0).contains(&e),
    );
    r.within(
        "limit at n = 1",
        limit_n_hat_infinite_margin(1, 0.05, 0.10).unwrap(),
        10.82,
        0.01,
    );
    r.within(
        "limit as n grows (n = 1e9)",
        limit_n_hat_infinite_margin(1_000_000_000, 0.05, 0.10).unwrap(),
        5.41,
        0.01,
    );
    r.finish();
}

fn random_group(rng: &mut Xoshiro256PlusPlus, n: usize, shift: f64, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| shift + scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

#[test]
fn criterion_7_property_suites() {
    const INSTANCES: usize = 10_000;
    let mut r = Report::new("7", "property suites at 1e4 randomized instances");
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(SEED);

    // Cochran identity
    let mut worst = 0.0f64;
    for _ in 0..INSTANCES {
        let (n1, n2) = (rng.random_range(2..40), rng.random_range(2..40));
        let shift = rng.random_range(-5.0..5.0);
        let scale = rng.random_range(0.1..10.0);
        let g1 = random_group(&mut rng, n1, shift, scale);
        let g2 = random_group(&mut rng, n2, 0.0, scale);
        let all: Vec<f64> = g1.iter().chain(&g2).copied().collect();
        let m = all.iter().sum::<f64>() / all.len() as f64;
        let total: f64 = all.iter().map(|x| (x - m).powi(2)).sum();
        let s = summarize_stage1(&StageData::new(g1, g2).unwrap()).unwrap();
        worst = worst.max((s.q1 + s.q2 - total).abs() / total);
    }
    r.require(
        format!("Q1 + Q2 = total SS, max relative error {worst:.1e}"),
        worst < 1e-12,
    );

    // case partition and NI = Case1 + Case2, per decision
    let mut bad = 0;
    let mut seen = [0u64; 4];
    for _ in 0..INSTANCES {
        let n = rng.random_range(2..30);
        let margin = rng.random_range(0.05..2.0);
        let design = TrialDesign::symmetric(margin, 1.0, n as u64, 0.05, 0.1).unwrap();
        let shift = rng.random_range(-2.0..2.0);
        let g1 = random_group(&mut rng, n, shift, 1.0);
        let g2 = random_group(&mut rng, n, 0.0, 1.0);
        let o = tost_decide(&g1, &g2, &design).unwrap();
        seen[o.case_label.index()] += 1;
        let consistent = o.case_label == classify_case(o.reject_h01, o.reject_h02)
            && o.reject_h02 == matches!(o.case_label, CaseLabel::Case1 | CaseLabel::Case2);
        bad += usize::from(!consistent);
    }
    r.require(
        format!("case labels partition decisions and NI = Case1 + Case2 ({bad} violations, cases seen {seen:?})"),
        bad == 0 && seen.iter().all(|&c| c > 0),
    );

    // simulation-level identities and worker-count determinism
    let mut mismatches = 0;
    let mut identity = 0;
    let scenarios = 50;
    for _ in 0..scenarios {
        let n = rng.random_range(3..30u64);
        let rule = SsrRule::new(n, MaxSampleSize::Finite(n + rng.random_range(0..3 * n))).unwrap();
        let mut s =
            Scenario::at_boundary(rng.random_range(0.05..1.5), 1.0, n, rule, 200, rng.random())
                .unwrap();
        s.sampling = [
            SamplingMode::Observations,
            SamplingMode::Hybrid,
            SamplingMode::SufficientStatistics,
        ][rng.random_range(0..3usize)];
        let runs: Vec<ScenarioResult> = [1usize, 2, 4]
            .iter()
            .map(|&w| with_workers(Some(w), || run_scenario(&s)).unwrap().unwrap())
            .collect();
        mismatches += runs.windows(2).filter(|w| w[0] != w[1]).count();
        let x = &runs[0];
        let ni = x.pct(CaseLabel::Case1) + x.pct(CaseLabel::Case2);
        if x.counts.iter().sum::<u64>() != s.replications
            || (x.ni_rejection_pct() - ni).abs() > 1e-9
        {
            identity += 1;
        }
    }
    r.require(
        format!("{scenarios} scenarios (1e4 replicates) identical for 1, 2, 4 workers ({mismatches} mismatches)"),
        mismatches == 0,
    );
    r.require(format!("counts sum to replicates and NI = Case1 + Case2 in every result ({identity} violations)"), identity == 0);

    // CSV round trip
    let mut results = Vec::with_capacity(INSTANCES);
    for _ in 0..INSTANCES {
        let n = rng.random_range(2..100u64);
        let n_min = n + rng.random_range(0..n);
        let cap = if rng.random_bool(0.2) {
            MaxSampleSize::Unbounded
        } else {
            MaxSampleSize::Finite(n_min + rng.random_range(0..200))
        };
        let mut counts = [0; 4].map(|_: u64| rng.random_range(0..1_000_000u64));
        if counts.iter().sum::<u64>() == 0 {
            counts[0] = 1;
        }
        let reps = counts.iter().sum::<u64>();
        let d0 = rng.random_range(1e-3..5.0);
        results.push(ScenarioResult {
            scenario: Scenario {
                design: TrialDesign::symmetric(d0, rng.random_range(0.1..5.0), n, 0.05, 0.1)
                    .unwrap(),
                rule: SsrRule::new(n_min, cap).unwrap(),
                true_delta: d0,
                replications: reps,
                master_seed: rng.random(),
                sampling: SamplingMode::Hybrid,
            },
            counts,
            mean_realized_n: rng.random_range(0.0..1e4),
            sd_realized_n: rng.random_range(0.0..1e3),
            mean_sigma_t2: rng.random_range(0.0..10.0),
        });
    }
    let mut buf = Vec::new();
    write_results(&mut buf, &results).unwrap();
    let back = read_results(buf.as_slice()).unwrap();
    r.require(
        format!("CSV round trip of {INSTANCES} results"),
        back == results,
    );

    // quantile / CDF inversion
    let mut worst = 0.0f64;
    for _ in 0..INSTANCES {
        let p: f64 = rng.random_range(1e-8..1.0 - 1e-8);
        let df = DegreesOfFreedom::new(rng.random_range(1.0..1000.0)).unwrap();
        let z = std_normal_quantile(p).unwrap();
        let t = student_t_quantile(p, df).unwrap();
        worst = worst
            .max((std_normal_cdf(z).unwrap() - p).abs())
            .max((student_t_cdf(t, df).unwrap() - p).abs());
    }
    r.require(
        format!("normal and t quantile/CDF inversion, max error {worst:.1e}"),
        worst < 1e-10,
    );
    r.finish();
}

#[test]
fn criterion_8_fixed_design_calibration() {
    let mut r = Report::new(
        "8",
        "fixed design (n_min = n_max = n) rejects at 5% within 3 SE, 1e6 reps",
    );
    for (n, d0) in [(10u64, 0.5), (15, 1.0), (30, 0.75)] {
        let s = Scenario::at_boundary(d0, 1.0, n, SsrRule::fixed(n), 1_000_000, SEED).unwrap();
        let res = run_scenario(&s).unwrap();
        let se = res.binomial_se_pct(5.0);
        r.within(
            &format!("n={n} delta0={d0} NI rejection %"),
            res.ni_rejection_pct(),
            5.0,
            3.0 * se,
        );
    }
    r.finish();
}
