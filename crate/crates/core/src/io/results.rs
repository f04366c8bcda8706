//! CSV persistence of scenario results.
//!
//! The file starts with a `# schema_version=N` comment line, followed by a
//! fixed header. Percentages are written with four decimals for reading;
//! the case counts are the source of truth when a file is loaded back.
//! Floats use Rust's shortest round-trip formatting, so write/read is exact.

use std::io::{Read, Write};
use std::path::Path;

use crate::engine::{BinnedRejectionReport, PeakScan, SamplingMode, Scenario, ScenarioResult};
use crate::error::{Error, Result};
use crate::ssr::{MaxSampleSize, SsrRule};
use crate::tost::CaseLabel;
use crate::trial::TrialDesign;

pub const SCHEMA_VERSION: u32 = 1;

pub const HEADER: [&str; 27] = [
    "n_stage1",
    "n_min",
    "n_max",
    "delta0",
    "delta_low",
    "sigma",
    "alpha",
    "beta",
    "assumed_diff",
    "true_delta",
    "sampling",
    "replications",
    "count_case1",
    "count_case2",
    "count_case3",
    "count_case4",
    "pct_case1",
    "pct_case2",
    "pct_case3",
    "pct_case4",
    "ni_rejection_pct",
    "mean_realized_n",
    "sd_realized_n",
    "mean_sigma_t2",
    "master_seed",
    "n2_stage1",
    "schema",
];

fn sampling_name(m: SamplingMode) -> &'static str {
    match m {
        SamplingMode::Observations => "observations",
        SamplingMode::Hybrid => "hybrid",
        SamplingMode::SufficientStatistics => "sufficient_statistics",
    }
}

fn parse_sampling(s: &str) -> Result<SamplingMode> {
    match s {
        "observations" => Ok(SamplingMode::Observations),
        "hybrid" => Ok(SamplingMode::Hybrid),
        "sufficient_statistics" => Ok(SamplingMode::SufficientStatistics),
        other => Err(Error::Record(format!("unknown sampling mode {other:?}"))),
    }
}

fn record(r: &ScenarioResult) -> Vec<String> {
    let s = &r.scenario;
    let d = &s.design;
    let mut row = vec![
        d.n1_stage1.to_string(),
        s.rule.n_min.to_string(),
        s.rule.n_max.to_string(),
        d.delta_up.to_string(),
        d.delta_low.to_string(),
        d.sigma.to_string(),
        d.alpha.to_string(),
        d.beta.to_string(),
        d.assumed_diff.to_string(),
        s.true_delta.to_string(),
        sampling_name(s.sampling).to_string(),
        s.replications.to_string(),
    ];
    row.extend(r.counts.iter().map(|c| c.to_string()));
    row.extend(CaseLabel::ALL.iter().map(|&c| format!("{:.4}", r.pct(c))));
    row.push(format!("{:.4}", r.ni_rejection_pct()));
    row.push(r.mean_realized_n.to_string());
    row.push(r.sd_realized_n.to_string());
    row.push(r.mean_sigma_t2.to_string());
    row.push(s.master_seed.to_string());
    row.push(d.n2_stage1.to_string());
    row.push(SCHEMA_VERSION.to_string());
    row
}

/// Writes results as CSV. Empty input is an error and writes nothing.
pub fn write_results<W: Write>(mut out: W, results: &[ScenarioResult]) -> Result<()> {
    if results.is_empty() {
        return Err(Error::EmptyResults);
    }
    writeln!(out, "# schema_version={SCHEMA_VERSION}").map_err(|e| Error::io("<csv>", e))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(HEADER)?;
    for r in results {
        w.write_record(record(r))?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn write_results_file(path: &Path, results: &[ScenarioResult]) -> Result<()> {
    if results.is_empty() {
        return Err(Error::EmptyResults);
    }
    let mut buf = Vec::new();
    write_results(&mut buf, results)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

fn field<T: std::str::FromStr>(row: &csv::StringRecord, i: usize) -> Result<T> {
    let raw = row
        .get(i)
        .ok_or_else(|| Error::Record(format!("missing column {}", HEADER[i])))?;
    raw.parse()
        .map_err(|_| Error::Record(format!("bad value {raw:?} in column {}", HEADER[i])))
}

pub fn read_results<R: Read>(input: R) -> Result<Vec<ScenarioResult>> {
    let mut text = String::new();
    let mut input = input;
    input
        .read_to_string(&mut text)
        .map_err(|e| Error::io("<csv>", e))?;
    let first = text.lines().next().unwrap_or_default();
    if first != format!("# schema_version={SCHEMA_VERSION}") {
        return Err(Error::Record(format!("unsupported schema line {first:?}")));
    }
    let mut rd = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = rd.headers()?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(Error::Record("unexpected CSV header".into()));
    }
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        let n_max = match row.get(2) {
            Some("inf") => MaxSampleSize::Unbounded,
            _ => MaxSampleSize::Finite(field(&row, 2)?),
        };
        let design = TrialDesign {
            delta_low: field(&row, 4)?,
            delta_up: field(&row, 3)?,
            sigma: field(&row, 5)?,
            n1_stage1: field(&row, 0)?,
            n2_stage1: field(&row, 25)?,
            alpha: field(&row, 6)?,
            beta: field(&row, 7)?,
            assumed_diff: field(&row, 8)?,
        };
        let scenario = Scenario {
            design,
            rule: SsrRule {
                n_min: field(&row, 1)?,
                n_max,
            },
            true_delta: field(&row, 9)?,
            replications: field(&row, 11)?,
            master_seed: field(&row, 24)?,
            sampling: parse_sampling(row.get(10).unwrap_or_default())?,
        };
        let counts = [
            field(&row, 12)?,
            field(&row, 13)?,
            field(&row, 14)?,
            field(&row, 15)?,
        ];
        if counts.iter().sum::<u64>() != scenario.replications {
            return Err(Error::Record(
                "case counts do not sum to replications".into(),
            ));
        }
        let result = ScenarioResult {
            scenario,
            counts,
            mean_realized_n: field(&row, 21)?,
            sd_realized_n: field(&row, 22)?,
            mean_sigma_t2: field(&row, 23)?,
        };
        for (i, &c) in CaseLabel::ALL.iter().enumerate() {
            let written: f64 = field(&row, 16 + i)?;
            if (written - result.pct(c)).abs() > 5.1e-5 {
                return Err(Error::Record(format!(
                    "pct_case{} disagrees with its count",
                    i + 1
                )));
            }
        }
        out.push(result);
    }
    Ok(out)
}

pub fn read_results_file(path: &Path) -> Result<Vec<ScenarioResult>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_results(f)
}

fn write_table<W: Write>(out: W, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut out = out;
    writeln!(out, "# schema_version={SCHEMA_VERSION}").map_err(|e| Error::io("<csv>", e))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// One row per σ̂_T² bin; bin 0 is the m = 0 region.
pub fn write_binned<W: Write>(out: W, report: &BinnedRejectionReport) -> Result<()> {
    let rows = report
        .bins
        .iter()
        .enumerate()
        .map(|(i, b)| {
            vec![
                report.n_stage1.to_string(),
                report.delta0.to_string(),
                report.replications.to_string(),
                i.to_string(),
                b.lower.to_string(),
                b.upper.to_string(),
                b.count.to_string(),
                format!("{:.4}", 100.0 * b.count as f64 / report.replications as f64),
                format!("{:.4}", b.fixed_reject_pct),
                format!("{:.4}", b.two_stage_reject_pct),
            ]
        })
        .collect();
    write_table(
        out,
        &[
            "n_stage1",
            "delta0",
            "replications",
            "bin",
            "lower",
            "upper",
            "count",
            "mass_pct",
            "fixed_reject_pct",
            "two_stage_reject_pct",
        ],
        rows,
    )
}

pub fn write_binned_file(path: &Path, report: &BinnedRejectionReport) -> Result<()> {
    write_file(path, |b| write_binned(b, report))
}

/// One row per scanned ñ.
pub fn write_peaks<W: Write>(out: W, scans: &[PeakScan]) -> Result<()> {
    if scans.is_empty() {
        return Err(Error::EmptyResults);
    }
    let rows = scans
        .iter()
        .map(|s| {
            let reps = s.points.first().map_or(0, |p| p.scenario.replications);
            let seed = s.points.first().map_or(0, |p| p.scenario.master_seed);
            vec![
                s.n_stage1.to_string(),
                format!("{:.4}", s.peak_pct_case1),
                s.argmax_delta0.to_string(),
                s.points.len().to_string(),
                reps.to_string(),
                seed.to_string(),
            ]
        })
        .collect();
    write_table(
        out,
        &[
            "n_stage1",
            "peak_pct_case1",
            "argmax_delta0",
            "points",
            "replications",
            "master_seed",
        ],
        rows,
    )
}

pub fn write_peaks_file(path: &Path, scans: &[PeakScan]) -> Result<()> {
    if scans.is_empty() {
        return Err(Error::EmptyResults);
    }
    write_file(path, |b| write_peaks(b, scans))
}
