use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use blindssr::engine::grid::delta0_range;
use blindssr::engine::{
    binned_rejection_analysis, peak_alpha_scan, run_grid, run_scenario, with_workers, GridSpec,
    ScenarioResult,
};
use blindssr::exact::{eq_type1_exact, ni_type1_exact, ExactSetting, StoppingDf};
use blindssr::io::config::{
    load_config, BinnedSection, Bound, ExactSection, Overrides, PeaksSection, RunConfig,
    SamplingName, ScenarioSection, StopDfChoice, Word,
};
use blindssr::io::results::{write_binned_file, write_peaks_file, write_results_file};
use blindssr::io::svg::{curve_svg, heatmap_svg, write_svg};
use blindssr::tost::CaseLabel;
use blindssr::validate::run_validation;

/// Type I error of TOST equivalence trials with blinded sample-size
/// re-estimation.
#[derive(Parser)]
#[command(name = "blindssr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the design grid; writes grid.csv and heatmap.svg.
    Grid(GridArgs),
    /// Simulate one design at one or more margins; writes scenario.csv
    /// (and curve.svg for several margins).
    Scenario(ScenarioArgs),
    /// Rejection rates by interval of the interim variance estimate.
    Binned(BinnedArgs),
    /// Peak %Case1 over the margin for the unrestricted rule.
    Peaks(PeaksArgs),
    /// Exact type I error of the threshold stopping rule.
    Exact(ExactArgs),
    /// Run the invariant and reference-value checks.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Sampling {
    Observations,
    Hybrid,
    SufficientStatistics,
}

impl From<Sampling> for SamplingName {
    fn from(s: Sampling) -> Self {
        match s {
            Sampling::Observations => SamplingName::Observations,
            Sampling::Hybrid => SamplingName::Hybrid,
            Sampling::SufficientStatistics => SamplingName::SufficientStatistics,
        }
    }
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (required here or in the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Replicates per cell.
    #[arg(long)]
    reps: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    sampling: Option<Sampling>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => load_config(p)?,
            None => RunConfig::default(),
        };
        cfg.apply(&Overrides {
            master_seed: self.seed,
            replications: self.reps,
            workers: self.workers,
            out_dir: self.out.clone(),
        });
        if let Some(s) = self.sampling {
            cfg.sampling = s.into();
        }
        if cfg.workers == Some(0) {
            bail!("--workers must be at least 1");
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ScenarioArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    n_stage1: Option<u64>,
    #[arg(long)]
    n_min: Option<u64>,
    /// Integer cap or "inf".
    #[arg(long, value_parser = parse_bound)]
    n_max: Option<Bound>,
    /// One margin, or a comma-separated list for a curve.
    #[arg(long, value_delimiter = ',')]
    delta0: Vec<f64>,
    /// Inclusive margin range start:stop:step (alternative to --delta0).
    #[arg(long, conflicts_with = "delta0")]
    delta0_range: Option<String>,
    /// True mean difference; defaults to the margin.
    #[arg(long)]
    true_delta: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Args)]
struct BinnedArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    n_stage1: Option<u64>,
    #[arg(long)]
    delta0: Option<f64>,
}

#[derive(Args)]
struct PeaksArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',')]
    n_stage1: Vec<u64>,
    /// Inclusive margin range start:stop:step [default: 0.05:1.5:0.05].
    #[arg(long)]
    delta0_range: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StopDf {
    Total,
    Within,
    Both,
}

#[derive(Args)]
struct ExactArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    n1: Vec<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    delta_up: Option<f64>,
    /// Threshold on Q1 + Q2 [default: n - 1 + (n1/2)·delta_up²].
    #[arg(long)]
    c: Option<f64>,
    /// Degrees of freedom of the stopped trial's t test.
    #[arg(long, value_enum)]
    stop_df: Option<StopDf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Replicates for each fixed-design calibration run.
    #[arg(long, default_value_t = 100_000)]
    reps: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    workers: Option<usize>,
}

fn parse_bound(s: &str) -> std::result::Result<Bound, String> {
    match s.to_ascii_lowercase().as_str() {
        "inf" | "infinity" => Ok(Bound::Word(Word::Inf)),
        other => other
            .parse::<f64>()
            .map(Bound::Value)
            .map_err(|_| format!("expected an integer or \"inf\", got {s:?}")),
    }
}

fn parse_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, c] = parts[..] else {
        bail!("range must look like start:stop:step, got {s:?}");
    };
    let num = |x: &str| {
        x.trim()
            .parse::<f64>()
            .with_context(|| format!("bad number {x:?} in range"))
    };
    Ok(delta0_range(num(a)?, num(b)?, num(c)?)?)
}

fn prepare_out(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.out_dir();
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    Ok(dir)
}

fn print_result(r: &ScenarioResult) {
    let s = &r.scenario;
    println!(
        "n_stage1={} n_min={} n_max={} delta0={} reps={}  case1={:.4}% case2={:.4}% case3={:.4}% case4={:.4}%  ni_reject={:.4}% (se {:.4})  mean_n={:.3} sd_n={:.3}",
        s.design.n1_stage1,
        s.rule.n_min,
        s.rule.n_max,
        s.design.delta_up,
        r.replications(),
        r.pct(CaseLabel::Case1),
        r.pct(CaseLabel::Case2),
        r.pct(CaseLabel::Case3),
        r.pct(CaseLabel::Case4),
        r.ni_rejection_pct(),
        r.binomial_se_pct(5.0),
        r.mean_realized_n,
        r.sd_realized_n,
    );
}

fn wrote(path: &Path) {
    println!("wrote {}", path.display());
}

const HEATMAP_COLUMNS: [u64; 4] = [10, 15, 20, 30];
const HEATMAP_ROWS: [Option<f64>; 4] = [Some(2.0), Some(3.0), Some(4.0), None];

fn cmd_grid(a: GridArgs) -> Result<()> {
    let cfg = a.common.load()?;
    let (spec, cols, rows) = if cfg.grid.is_some() {
        let (c, r) = cfg.heatmap_facets()?;
        (cfg.grid_spec()?, c, r)
    } else {
        let mut spec = GridSpec::standard(cfg.reps()?, cfg.seed()?);
        spec.sampling = cfg.sampling.into();
        (spec, HEATMAP_COLUMNS.to_vec(), HEATMAP_ROWS.to_vec())
    };
    let out = prepare_out(&cfg)?;
    eprintln!(
        "running {} cells at {} replicates",
        spec.cell_count(),
        spec.replications
    );
    let results = with_workers(cfg.workers, || run_grid(&spec))??;
    let csv = out.join("grid.csv");
    write_results_file(&csv, &results)?;
    wrote(&csv);
    let svg = out.join("heatmap.svg");
    write_svg(&svg, &heatmap_svg(&results, &cols, &rows)?)?;
    wrote(&svg);
    Ok(())
}

fn cmd_scenario(a: ScenarioArgs) -> Result<()> {
    let mut cfg = a.common.load()?;
    let base = cfg.scenario.clone();
    let need =
        |flag: &str| anyhow::anyhow!("missing --{flag} (or a [scenario] section in the config)");
    let mut margins = if let Some(r) = &a.delta0_range {
        parse_range(r)?
    } else {
        a.delta0.clone()
    };
    if margins.is_empty() {
        margins.push(
            base.as_ref()
                .map(|s| s.delta0)
                .ok_or_else(|| need("delta0"))?,
        );
    }
    let section = ScenarioSection {
        n_stage1: a
            .n_stage1
            .or(base.as_ref().map(|s| s.n_stage1))
            .ok_or_else(|| need("n-stage1"))?,
        n_min: a
            .n_min
            .or(base.as_ref().map(|s| s.n_min))
            .ok_or_else(|| need("n-min"))?,
        n_max: a
            .n_max
            .or(base.as_ref().map(|s| s.n_max))
            .ok_or_else(|| need("n-max"))?,
        delta0: margins[0],
        true_delta: a.true_delta.or(base.as_ref().and_then(|s| s.true_delta)),
        sigma: a.sigma.or(base.as_ref().map(|s| s.sigma)).unwrap_or(1.0),
        alpha: base.as_ref().map_or(0.05, |s| s.alpha),
        beta: base.as_ref().map_or(0.10, |s| s.beta),
    };
    let mut scenarios = Vec::with_capacity(margins.len());
    for &d in &margins {
        cfg.scenario = Some(ScenarioSection {
            delta0: d,
            ..section.clone()
        });
        scenarios.push(cfg.scenario()?);
    }
    let out = prepare_out(&cfg)?;
    let results = with_workers(cfg.workers, || {
        scenarios
            .iter()
            .map(run_scenario)
            .collect::<blindssr::Result<Vec<_>>>()
    })??;
    for r in &results {
        print_result(r);
    }
    let csv = out.join("scenario.csv");
    write_results_file(&csv, &results)?;
    wrote(&csv);
    if results.len() > 1 {
        let svg = out.join("curve.svg");
        write_svg(&svg, &curve_svg(&results)?)?;
        wrote(&svg);
    }
    Ok(())
}

fn cmd_binned(a: BinnedArgs) -> Result<()> {
    let cfg = a.common.load()?;
    let base = cfg.binned.clone().unwrap_or(BinnedSection {
        n_stage1: 15,
        delta0: 1.0,
    });
    let n = a.n_stage1.unwrap_or(base.n_stage1);
    let d = a.delta0.unwrap_or(base.delta0);
    let reps = cfg.replications.unwrap_or(100_000);
    let seed = cfg.seed()?;
    let out = prepare_out(&cfg)?;
    let report = with_workers(cfg.workers, || binned_rejection_analysis(n, d, reps, seed))??;
    println!(
        "n_stage1={n} delta0={d} reps={reps}  m=0 threshold={:.6}  first-bin mass={:.4}%",
        report.first_bin_threshold, report.first_bin_mass_pct
    );
    println!(
        "{:>3} {:>10} {:>10} {:>8} {:>10} {:>10}",
        "bin", "lower", "upper", "count", "fixed%", "two-stage%"
    );
    for (i, b) in report.bins.iter().enumerate() {
        println!(
            "{i:>3} {:>10.5} {:>10.5} {:>8} {:>10.4} {:>10.4}",
            b.lower, b.upper, b.count, b.fixed_reject_pct, b.two_stage_reject_pct
        );
    }
    println!(
        "overall: fixed={:.4}% two-stage={:.4}%",
        report.fixed_overall_pct, report.two_stage_overall_pct
    );
    let csv = out.join("binned.csv");
    write_binned_file(&csv, &report)?;
    wrote(&csv);
    Ok(())
}

fn cmd_peaks(a: PeaksArgs) -> Result<()> {
    let cfg = a.common.load()?;
    let base = cfg.peaks.clone();
    let ns = if !a.n_stage1.is_empty() {
        a.n_stage1.clone()
    } else if let Some(b) = &base {
        b.n_stage1.clone()
    } else {
        vec![10, 15, 30, 60]
    };
    let grid = match (&a.delta0_range, &base) {
        (Some(r), _) => parse_range(r)?,
        (None, Some(PeaksSection { delta0, .. })) => delta0.values()?,
        (None, None) => delta0_range(0.05, 1.5, 0.05)?,
    };
    let reps = cfg.reps()?;
    let seed = cfg.seed()?;
    let sampling = cfg.sampling.into();
    let out = prepare_out(&cfg)?;
    let scans = with_workers(cfg.workers, || {
        ns.iter()
            .map(|&n| peak_alpha_scan(n, &grid, reps, seed, sampling))
            .collect::<blindssr::Result<Vec<_>>>()
    })??;
    let mut all = Vec::new();
    for s in &scans {
        println!(
            "n_stage1={:<3} peak %Case1={:.4} at delta0={:.2}",
            s.n_stage1, s.peak_pct_case1, s.argmax_delta0
        );
        let svg = out.join(format!("peaks_n{}.svg", s.n_stage1));
        write_svg(&svg, &curve_svg(&s.points)?)?;
        wrote(&svg);
        all.extend(s.points.iter().cloned());
    }
    let csv = out.join("peaks.csv");
    write_peaks_file(&csv, &scans)?;
    wrote(&csv);
    let csv = out.join("peaks_points.csv");
    write_results_file(&csv, &all)?;
    wrote(&csv);
    Ok(())
}

fn cmd_exact(a: ExactArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    let base = cfg.exact.clone().unwrap_or(ExactSection {
        n1: vec![12, 24, 40],
        alpha: 0.05,
        delta_up: 0.5,
        c: None,
        stop_df: StopDfChoice::Both,
    });
    let section = ExactSection {
        n1: if a.n1.is_empty() {
            base.n1
        } else {
            a.n1.clone()
        },
        alpha: a.alpha.unwrap_or(base.alpha),
        delta_up: a.delta_up.unwrap_or(base.delta_up),
        c: a.c.or(base.c),
        stop_df: match a.stop_df {
            Some(StopDf::Total) => StopDfChoice::Total,
            Some(StopDf::Within) => StopDfChoice::Within,
            Some(StopDf::Both) => StopDfChoice::Both,
            None => base.stop_df,
        },
    };
    cfg.exact = Some(section);
    let settings: Vec<ExactSetting> = cfg.exact_settings()?;
    println!(
        "{:>4} {:>7} {:>10}  {:>8} {:>8} {:>8} {:>8}  {:>8} {:>8} {:>8}",
        "n1", "df", "c", "NI A1", "P(Q<=c)", "NI cond", "NI", "EQ A1", "EQ cond", "EQ"
    );
    for s in &settings {
        let ni = ni_type1_exact(s)?;
        let eq = eq_type1_exact(s)?;
        let df = match s.stop_df {
            StoppingDf::Total => "n-1",
            StoppingDf::WithinGroup => "n-2",
        };
        println!(
            "{:>4} {:>7} {:>10.4}  {:>8.4} {:>8.4} {:>8.4} {:>8.4}  {:>8.4} {:>8.4} {:>8.4}",
            s.n1,
            df,
            s.c,
            ni.joint_small,
            ni.prob_small,
            ni.conditional,
            ni.unconditional,
            eq.joint_small,
            eq.conditional,
            eq.unconditional
        );
    }
    Ok(())
}

fn cmd_validate(a: ValidateArgs) -> Result<()> {
    if a.workers == Some(0) {
        bail!("--workers must be at least 1");
    }
    let checks = with_workers(a.workers, || run_validation(a.reps, a.seed))?;
    let mut failed = 0;
    for c in &checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
        failed += usize::from(!c.passed);
    }
    if failed > 0 {
        bail!("{failed} of {} checks failed", checks.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Grid(a) => cmd_grid(a),
        Command::Scenario(a) => cmd_scenario(a),
        Command::Binned(a) => cmd_binned(a),
        Command::Peaks(a) => cmd_peaks(a),
        Command::Exact(a) => cmd_exact(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
