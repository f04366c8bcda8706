//! TOML run configuration.
//!
//! Unknown keys are rejected. The master seed has no default: it must come
//! from the file or from a command-line override.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::engine::grid::{canonical_delta0, delta0_range, ratio_target};
use crate::engine::{GridSpec, SamplingMode, Scenario};
use crate::error::{Error, Result};
use crate::exact::{ExactSetting, StoppingDf};
use crate::ssr::{MaxSampleSize, SsrRule};
use crate::trial::TrialDesign;

pub const DEFAULT_REPLICATIONS: u64 = 1_000_000;

/// A number or the word "inf".
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    Value(f64),
    Word(Word),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Word {
    Inf,
    Infinity,
}

impl Bound {
    fn finite(self) -> Option<f64> {
        match self {
            Bound::Value(v) => Some(v),
            Bound::Word(_) => None,
        }
    }
}

/// Margins as an explicit list or an inclusive range.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Delta0Spec {
    List(Vec<f64>),
    Range(Delta0Range),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Delta0Range {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Delta0Spec {
    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match self {
            Delta0Spec::Range(r) => delta0_range(r.start, r.stop, r.step)?,
            Delta0Spec::List(v) => v.iter().map(|&d| canonical_delta0(d)).collect(),
        };
        if v.is_empty() {
            return Err(Error::Config("delta0 list is empty".into()));
        }
        if let Some(d) = v.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(Error::Config(format!(
                "delta0 values must be positive, got {d}"
            )));
        }
        if v.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(
                "delta0 values must be strictly increasing".into(),
            ));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingName {
    Observations,
    #[default]
    Hybrid,
    SufficientStatistics,
}

impl From<SamplingName> for SamplingMode {
    fn from(s: SamplingName) -> Self {
        match s {
            SamplingName::Observations => SamplingMode::Observations,
            SamplingName::Hybrid => SamplingMode::Hybrid,
            SamplingName::SufficientStatistics => SamplingMode::SufficientStatistics,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopDfChoice {
    Total,
    Within,
    #[default]
    Both,
}

impl StopDfChoice {
    pub fn conventions(self) -> Vec<StoppingDf> {
        match self {
            StopDfChoice::Total => vec![StoppingDf::Total],
            StopDfChoice::Within => vec![StoppingDf::WithinGroup],
            StopDfChoice::Both => vec![StoppingDf::WithinGroup, StoppingDf::Total],
        }
    }
}

fn one() -> f64 {
    1.0
}
fn alpha_default() -> f64 {
    0.05
}
fn beta_default() -> f64 {
    0.10
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_stage1: Vec<u64>,
    pub n_min_ratios: Vec<f64>,
    pub n_max_ratios: Vec<Bound>,
    pub delta0: Delta0Spec,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default = "alpha_default")]
    pub alpha: f64,
    #[serde(default = "beta_default")]
    pub beta: f64,
    /// Heatmap columns; defaults to every ñ.
    pub heatmap_n_stage1: Option<Vec<u64>>,
    /// Heatmap rows; defaults to every n_max ratio.
    pub heatmap_n_max_ratios: Option<Vec<Bound>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub n_stage1: u64,
    pub n_min: u64,
    pub n_max: Bound,
    pub delta0: f64,
    /// Defaults to delta0.
    pub true_delta: Option<f64>,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default = "alpha_default")]
    pub alpha: f64,
    #[serde(default = "beta_default")]
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinnedSection {
    pub n_stage1: u64,
    pub delta0: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeaksSection {
    pub n_stage1: Vec<u64>,
    pub delta0: Delta0Spec,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactSection {
    pub n1: Vec<u64>,
    #[serde(default = "alpha_default")]
    pub alpha: f64,
    pub delta_up: f64,
    /// Threshold on Q1 + Q2; defaults to n - 1 + (n1/2)δ_up².
    pub c: Option<f64>,
    #[serde(default)]
    pub stop_df: StopDfChoice,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub master_seed: Option<u64>,
    pub replications: Option<u64>,
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub sampling: SamplingName,
    pub grid: Option<GridSection>,
    pub scenario: Option<ScenarioSection>,
    pub binned: Option<BinnedSection>,
    pub peaks: Option<PeaksSection>,
    pub exact: Option<ExactSection>,
}

/// Command-line values that replace file values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub master_seed: Option<u64>,
    pub replications: Option<u64>,
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

impl RunConfig {
    pub fn apply(&mut self, o: &Overrides) {
        if o.master_seed.is_some() {
            self.master_seed = o.master_seed;
        }
        if o.replications.is_some() {
            self.replications = o.replications;
        }
        if o.workers.is_some() {
            self.workers = o.workers;
        }
        if o.out_dir.is_some() {
            self.out_dir.clone_from(&o.out_dir);
        }
    }

    pub fn seed(&self) -> Result<u64> {
        self.master_seed.ok_or_else(|| {
            Error::Config("master_seed is required (set it in the config or pass --seed)".into())
        })
    }

    pub fn reps(&self) -> Result<u64> {
        match self.replications.unwrap_or(DEFAULT_REPLICATIONS) {
            0 => Err(Error::Config("replications must be at least 1".into())),
            n => Ok(n),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("results"))
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        let g = self
            .grid
            .as_ref()
            .ok_or_else(|| Error::Config("missing [grid] section".into()))?;
        let spec = GridSpec {
            n_stage1: g.n_stage1.clone(),
            n_min_ratios: g.n_min_ratios.clone(),
            n_max_ratios: g.n_max_ratios.iter().map(|b| b.finite()).collect(),
            delta0: g.delta0.values()?,
            sigma: g.sigma,
            alpha: g.alpha,
            beta: g.beta,
            replications: self.reps()?,
            master_seed: self.seed()?,
            sampling: self.sampling.into(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Heatmap facet selection: (columns ñ, rows n_max ratio).
    pub fn heatmap_facets(&self) -> Result<(Vec<u64>, Vec<Option<f64>>)> {
        let g = self
            .grid
            .as_ref()
            .ok_or_else(|| Error::Config("missing [grid] section".into()))?;
        let cols = g
            .heatmap_n_stage1
            .clone()
            .unwrap_or_else(|| g.n_stage1.clone());
        let rows = g
            .heatmap_n_max_ratios
            .as_ref()
            .unwrap_or(&g.n_max_ratios)
            .iter()
            .map(|b| b.finite())
            .collect();
        Ok((cols, rows))
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let s = self
            .scenario
            .as_ref()
            .ok_or_else(|| Error::Config("missing [scenario] section".into()))?;
        let n_max = match s.n_max {
            Bound::Value(v) => {
                if v.fract() != 0.0 || v < 1.0 {
                    return Err(Error::Config(format!(
                        "n_max must be a positive integer or \"inf\", got {v}"
                    )));
                }
                MaxSampleSize::Finite(v as u64)
            }
            Bound::Word(_) => MaxSampleSize::Unbounded,
        };
        let rule = SsrRule::new(s.n_min, n_max).map_err(|e| Error::Config(e.to_string()))?;
        let delta0 = canonical_delta0(s.delta0);
        let scenario = Scenario {
            design: TrialDesign::symmetric(delta0, s.sigma, s.n_stage1, s.alpha, s.beta)?,
            rule,
            true_delta: s.true_delta.unwrap_or(delta0),
            replications: self.reps()?,
            master_seed: self.seed()?,
            sampling: self.sampling.into(),
        };
        scenario
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(scenario)
    }

    pub fn exact_settings(&self) -> Result<Vec<ExactSetting>> {
        let e = self
            .exact
            .as_ref()
            .ok_or_else(|| Error::Config("missing [exact] section".into()))?;
        let mut out = Vec::new();
        for &n1 in &e.n1 {
            let mut s = ExactSetting::at_boundary(n1, e.alpha, e.delta_up)?;
            if let Some(c) = e.c {
                s.c = c;
            }
            s.validate()?;
            for df in e.stop_df.conventions() {
                out.push(s.with_stop_df(df));
            }
        }
        Ok(out)
    }
}

/// n_max ratio of a finite cap, for matching against facet selections.
pub fn cap_matches(n_stage1: u64, cap: MaxSampleSize, ratio: Option<f64>) -> bool {
    match (cap, ratio) {
        (MaxSampleSize::Unbounded, None) => true,
        (MaxSampleSize::Finite(n), Some(r)) => ratio_target(n_stage1, r) == n,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRID: &str = r#"
master_seed = 7
replications = 100

[grid]
n_stage1 = [10, 15, 20, 25, 30, 40, 50, 60]
n_min_ratios = [1, 1.2, 1.4, 1.6, 1.8, 2]
n_max_ratios = [2, 2.5, 3, 3.5, 4, "inf"]
delta0 = { start = 0.05, stop = 1.5, step = 0.05 }
"#;

    #[test]
    fn standard_grid_parses() {
        let cfg = parse_config(GRID).unwrap();
        let spec = cfg.grid_spec().unwrap();
        assert_eq!(spec.cell_count(), 8640);
        assert_eq!(spec.n_max_ratios.last(), Some(&None));
        assert_eq!(spec, GridSpec::standard(100, 7));
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = GRID.replace("replications = 100", "replications = 100\nreplicates = 5");
        assert!(matches!(parse_config(&text), Err(Error::Config(_))));
        let text = GRID.replace("delta0 =", "sigma_typo = 1\ndelta0 =");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn missing_seed() {
        let cfg = parse_config(&GRID.replace("master_seed = 7", "")).unwrap();
        assert!(matches!(cfg.grid_spec(), Err(Error::Config(m)) if m.contains("master_seed")));
        let mut cfg = cfg;
        cfg.apply(&Overrides {
            master_seed: Some(3),
            ..Default::default()
        });
        assert_eq!(cfg.grid_spec().unwrap().master_seed, 3);
    }

    #[test]
    fn inconsistent_ratios() {
        let cfg = parse_config(&GRID.replace("[2, 2.5", "[1.5, 2.5")).unwrap();
        assert!(matches!(cfg.grid_spec(), Err(Error::Config(_))));
    }

    #[test]
    fn non_grid_margins() {
        let cfg = parse_config(&GRID.replace("stop = 1.5", "stop = 1.52")).unwrap();
        assert!(matches!(cfg.grid_spec(), Err(Error::Config(_))));
        let cfg =
            parse_config(&GRID.replace("{ start = 0.05, stop = 1.5, step = 0.05 }", "[0.5, 0.3]"))
                .unwrap();
        assert!(cfg.grid_spec().is_err());
    }

    #[test]
    fn scenario_with_unbounded_cap() {
        let cfg = parse_config(
            r#"
master_seed = 1
[scenario]
n_stage1 = 15
n_min = 15
n_max = "inf"
delta0 = 1.0
"#,
        )
        .unwrap();
        let s = cfg.scenario().unwrap();
        assert_eq!(s.rule.n_max, MaxSampleSize::Unbounded);
        assert_eq!(s.true_delta, 1.0);
        assert_eq!(s.replications, DEFAULT_REPLICATIONS);
        let bad = cfg.clone();
        let mut bad = bad;
        bad.scenario.as_mut().unwrap().n_max = Bound::Value(12.0);
        assert!(bad.scenario().is_err());
    }

    #[test]
    fn bad_infinity_word() {
        assert!(parse_config(&GRID.replace("\"inf\"", "\"unbounded\"")).is_err());
    }

    #[test]
    fn overrides_win() {
        let mut cfg = parse_config(GRID).unwrap();
        cfg.apply(&Overrides {
            replications: Some(5),
            workers: Some(2),
            out_dir: Some("x".into()),
            ..Default::default()
        });
        assert_eq!(cfg.reps().unwrap(), 5);
        assert_eq!(cfg.seed().unwrap(), 7);
        assert_eq!(cfg.workers, Some(2));
        assert_eq!(cfg.out_dir(), PathBuf::from("x"));
    }

    #[test]
    fn exact_section() {
        let cfg = parse_config(
            r#"
[exact]
n1 = [12, 24]
delta_up = 0.5
stop_df = "within"
"#,
        )
        .unwrap();
        let s = cfg.exact_settings().unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].stop_df, StoppingDf::WithinGroup);
        assert_eq!(s[0].c, 23.0 + 1.5);
    }
}
