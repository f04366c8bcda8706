//! Hand-written SVG 1.1 charts: small-multiple heatmaps of %Case1 and
//! four-panel curves of case percentages against the margin.

use std::fmt::Write as _;
use std::path::Path;

use crate::engine::ScenarioResult;
use crate::error::{Error, Result};
use crate::io::config::cap_matches;
use crate::tost::CaseLabel;

/// Shade ramp anchors, in percent: white at or below `RAMP_LOW`, darkest at
/// or above `RAMP_HIGH`.
pub const RAMP_LOW: f64 = 5.0;
pub const RAMP_HIGH: f64 = 6.5;

const DARK: (f64, f64, f64) = (8.0, 29.0, 88.0);

/// Fill colour for a %Case1 value.
pub fn shade(pct: f64) -> String {
    let t = ((pct - RAMP_LOW) / (RAMP_HIGH - RAMP_LOW)).clamp(0.0, 1.0);
    let mix = |dark: f64| (255.0 + t * (dark - 255.0)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(DARK.0), mix(DARK.1), mix(DARK.2))
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn fmt_ratio(r: Option<f64>) -> String {
    match r {
        Some(r) => format!("{r}"),
        None => "inf".into(),
    }
}

/// Facet grid: one column per ñ in `columns`, one row per n_max ratio in
/// `rows` (`None` = unbounded). Within a facet x is δ0 and y is n_min/ñ.
pub fn heatmap_svg(
    results: &[ScenarioResult],
    columns: &[u64],
    rows: &[Option<f64>],
) -> Result<String> {
    if results.is_empty() || columns.is_empty() || rows.is_empty() {
        return Err(Error::EmptyResults);
    }
    const W: f64 = 240.0;
    const H: f64 = 150.0;
    const GAP: f64 = 40.0;
    const LEFT: f64 = 80.0;
    const TOP: f64 = 50.0;
    let width = LEFT + columns.len() as f64 * (W + GAP) + 60.0;
    let height = TOP + rows.len() as f64 * (H + GAP) + 60.0;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let mut drawn = 0;
    for (ri, &ratio) in rows.iter().enumerate() {
        for (ci, &n) in columns.iter().enumerate() {
            let x0 = LEFT + ci as f64 * (W + GAP);
            let y0 = TOP + ri as f64 * (H + GAP);
            if ri == 0 {
                let _ = writeln!(
                    svg,
                    r#"<text x="{}" y="{}" text-anchor="middle">stage-1 n = {n}</text>"#,
                    x0 + W / 2.0,
                    TOP - 25.0
                );
            }
            if ci == 0 {
                let _ = writeln!(
                    svg,
                    r#"<text x="{}" y="{}" text-anchor="middle" transform="rotate(-90 {} {})">n_max/n = {}</text>"#,
                    LEFT - 50.0,
                    y0 + H / 2.0,
                    LEFT - 50.0,
                    y0 + H / 2.0,
                    fmt_ratio(ratio)
                );
            }
            let cells: Vec<&ScenarioResult> = results
                .iter()
                .filter(|r| {
                    r.scenario.design.n1_stage1 == n && cap_matches(n, r.scenario.rule.n_max, ratio)
                })
                .collect();
            let _ = writeln!(
                svg,
                r##"<rect x="{x0}" y="{y0}" width="{W}" height="{H}" fill="none" stroke="#888"/>"##
            );
            if cells.is_empty() {
                let _ = writeln!(
                    svg,
                    r##"<text x="{}" y="{}" text-anchor="middle" fill="#888">no data</text>"##,
                    x0 + W / 2.0,
                    y0 + H / 2.0
                );
                continue;
            }
            drawn += 1;
            let xs = sorted_unique(cells.iter().map(|r| r.scenario.design.delta_up).collect());
            let ys = sorted_unique(cells.iter().map(|r| r.scenario.rule.n_min as f64).collect());
            let cw = W / xs.len() as f64;
            let ch = H / ys.len() as f64;
            for r in &cells {
                let xi = xs
                    .iter()
                    .position(|&x| x == r.scenario.design.delta_up)
                    .expect("present");
                let yi = ys
                    .iter()
                    .position(|&y| y == r.scenario.rule.n_min as f64)
                    .expect("present");
                let pct = r.pct(CaseLabel::Case1);
                let _ = writeln!(
                    svg,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"><title>delta0={} n_min={} %Case1={:.4}</title></rect>"#,
                    x0 + xi as f64 * cw,
                    y0 + H - (yi + 1) as f64 * ch,
                    cw,
                    ch,
                    shade(pct),
                    r.scenario.design.delta_up,
                    r.scenario.rule.n_min,
                    pct
                );
            }
            for (yi, y) in ys.iter().enumerate() {
                let _ = writeln!(
                    svg,
                    r#"<text x="{}" y="{:.2}" text-anchor="end" font-size="9">{:.1}</text>"#,
                    x0 - 3.0,
                    y0 + H - (yi as f64 + 0.5) * ch + 3.0,
                    y / n as f64
                );
            }
            let _ = writeln!(
                svg,
                r#"<text x="{x0}" y="{}" font-size="9">{}</text><text x="{}" y="{}" text-anchor="end" font-size="9">{}</text>"#,
                y0 + H + 12.0,
                xs[0],
                x0 + W,
                y0 + H + 12.0,
                xs[xs.len() - 1]
            );
        }
    }
    if drawn == 0 {
        return Err(Error::EmptyResults);
    }
    // legend
    let ly = height - 30.0;
    for i in 0..=15 {
        let pct = RAMP_LOW + (RAMP_HIGH - RAMP_LOW) * i as f64 / 15.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{}" y="{ly}" width="12" height="10" fill="{}" stroke="none"/>"#,
            LEFT + i as f64 * 12.0,
            shade(pct)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}">%Case1: {RAMP_LOW} (white) to {RAMP_HIGH} (dark); x = delta0, y = n_min/n</text>"#,
        LEFT + 200.0,
        ly + 9.0
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

struct Panel<'a> {
    title: &'a str,
    value: fn(&ScenarioResult) -> f64,
    y_range: Option<(f64, f64)>,
}

/// Four panels for one design family: %Case1, %Case2, %Case1+2 and a
/// close-up of %Case1+2. Dashed lines mark 5% ± 3 binomial standard errors.
pub fn curve_svg(results: &[ScenarioResult]) -> Result<String> {
    if results.is_empty() {
        return Err(Error::EmptyResults);
    }
    let mut pts: Vec<&ScenarioResult> = results.iter().collect();
    pts.sort_by(|a, b| {
        a.scenario
            .design
            .delta_up
            .total_cmp(&b.scenario.design.delta_up)
    });
    let s0 = &pts[0].scenario;
    let reps = pts.iter().map(|r| r.replications()).min().unwrap_or(1) as f64;
    let band = 3.0 * 100.0 * (0.05 * 0.95 / reps).sqrt();

    let panels = [
        Panel {
            title: "A: % Case 1",
            value: |r| r.pct(CaseLabel::Case1),
            y_range: None,
        },
        Panel {
            title: "B: % Case 2",
            value: |r| r.pct(CaseLabel::Case2),
            y_range: None,
        },
        Panel {
            title: "C: % Case 1 or Case 2",
            value: |r| r.ni_rejection_pct(),
            y_range: None,
        },
        Panel {
            title: "D: % Case 1 or Case 2 (close-up)",
            value: |r| r.ni_rejection_pct(),
            y_range: Some((4.0, 7.0)),
        },
    ];

    const W: f64 = 320.0;
    const H: f64 = 200.0;
    const PAD: f64 = 60.0;
    let width = 2.0 * (W + PAD) + PAD;
    let height = 2.0 * (H + PAD) + PAD + 20.0;
    let xmin = pts[0].scenario.design.delta_up;
    let xmax = pts[pts.len() - 1].scenario.design.delta_up;
    let xspan = if xmax > xmin { xmax - xmin } else { 1.0 };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" text-anchor="middle">stage-1 n = {}, n_min = {}, n_max = {}</text>"#,
        width / 2.0,
        s0.design.n1_stage1,
        s0.rule.n_min,
        s0.rule.n_max
    );
    for (i, p) in panels.iter().enumerate() {
        let x0 = PAD + (i % 2) as f64 * (W + PAD);
        let y0 = PAD + (i / 2) as f64 * (H + PAD);
        let (ymin, ymax) = p.y_range.unwrap_or_else(|| {
            let top = pts.iter().map(|r| (p.value)(r)).fold(0.0, f64::max);
            (0.0, top.max(5.0 + band) * 1.1)
        });
        let px = |x: f64| x0 + (x - xmin) / xspan * W;
        let py = |y: f64| y0 + H - ((y.clamp(ymin, ymax) - ymin) / (ymax - ymin)) * H;

        let _ = writeln!(
            svg,
            r#"<rect x="{x0}" y="{y0}" width="{W}" height="{H}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(svg, r#"<text x="{x0}" y="{}">{}</text>"#, y0 - 8.0, p.title);
        for level in [5.0 - band, 5.0 + band] {
            let _ = writeln!(
                svg,
                r#"<line x1="{x0}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="red" stroke-dasharray="5,4"/>"#,
                x0 + W,
                y = py(level)
            );
        }
        for k in 0..=4 {
            let y = ymin + (ymax - ymin) * k as f64 / 4.0;
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{:.2}" text-anchor="end" font-size="9">{y:.1}</text>"#,
                x0 - 4.0,
                py(y) + 3.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{x0}" y="{}" font-size="9">{xmin}</text><text x="{}" y="{}" text-anchor="end" font-size="9">{xmax}</text>"#,
            y0 + H + 12.0,
            x0 + W,
            y0 + H + 12.0
        );
        let path: Vec<String> = pts
            .iter()
            .map(|r| {
                format!(
                    "{:.2},{:.2}",
                    px(r.scenario.design.delta_up),
                    py((p.value)(r))
                )
            })
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="black" stroke-width="1.5"/>"#,
            path.join(" ")
        );
        for r in &pts {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2"/>"#,
                px(r.scenario.design.delta_up),
                py((p.value)(r))
            );
        }
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">effect size delta0/sigma</text>"#,
        width / 2.0,
        height - 10.0
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn write_svg(path: &Path, svg: &str) -> Result<()> {
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}
