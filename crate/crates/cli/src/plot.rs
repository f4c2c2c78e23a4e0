//! SVG line plots computed from CSV text alone, so re-rendering a saved CSV
//! reproduces the plot byte for byte.
//!
//! The x axis is the first of `N`, `Q`, `p_X`, `p` that takes more than one
//! value (`N` on a log10 scale). Every other combination of those columns is
//! a series. Key lengths and costs are drawn as log10; STN solid, TN dashed.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::Result;
use crate::table::Table;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

/// Per-series (STN, TN) points; `None` where there is nothing to draw.
type SeriesPoints = (Vec<(f64, Option<f64>)>, Vec<(f64, Option<f64>)>);

struct Line {
    label: String,
    color: usize,
    dashed: bool,
    /// Runs of consecutive drawable points.
    runs: Vec<Vec<(f64, f64)>>,
}

fn parse_cell(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn log10_positive(s: &str) -> Option<f64> {
    parse_cell(s).filter(|v| *v > 0.0).map(f64::log10)
}

/// SVG for a keyrate or cost table; `None` for tables without a plot.
pub fn render(csv_text: &str) -> Result<Option<String>> {
    let table = Table::from_csv(csv_text)?;
    let (title, ylabel, stn_col, tn_col) = if table.column("l_stn").is_some() {
        ("Finite key length", "log10(l)", "l_stn", "l_tn")
    } else if table.column("cost_stn").is_some() {
        (
            "Cost per secret key bit",
            "log10(cost)",
            "cost_stn",
            "cost_tn",
        )
    } else {
        return Ok(None);
    };
    let (stn_i, tn_i) = (
        table.column(stn_col).unwrap(),
        table.column(tn_col).unwrap(),
    );

    let inputs: Vec<(&str, usize)> = ["N", "Q", "p_X", "p"]
        .into_iter()
        .filter_map(|c| table.column(c).map(|i| (c, i)))
        .collect();
    let distinct = |i: usize| {
        let mut v: Vec<&str> = table.rows().iter().map(|r| r[i].as_str()).collect();
        v.sort_unstable();
        v.dedup();
        v.len()
    };
    let (xname, xi) = inputs
        .iter()
        .copied()
        .find(|&(_, i)| distinct(i) > 1)
        .unwrap_or(inputs[0]);
    let log_x = xname == "N";
    let xlabel = if log_x {
        "log10(N)".to_owned()
    } else {
        xname.to_owned()
    };

    // series key -> (stn points, tn points), in first-appearance order
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, SeriesPoints> = BTreeMap::new();
    let mut tn_key: BTreeMap<String, String> = BTreeMap::new();
    for row in table.rows() {
        let Some(x) = (if log_x {
            log10_positive(&row[xi])
        } else {
            parse_cell(&row[xi])
        }) else {
            continue;
        };
        let label: Vec<String> = inputs
            .iter()
            .filter(|&&(n, i)| n != xname && distinct(i) > 1)
            .map(|&(n, i)| format!("{n}={}", short(&row[i])))
            .collect();
        let label = label.join(" ");
        if !groups.contains_key(&label) {
            order.push(label.clone());
        }
        let g = groups.entry(label.clone()).or_default();
        g.0.push((x, log10_positive(&row[stn_i])));
        g.1.push((x, log10_positive(&row[tn_i])));
        // TN does not depend on p; identical curves are drawn once
        let tn_label: Vec<String> = inputs
            .iter()
            .filter(|&&(n, i)| n != xname && n != "p" && distinct(i) > 1)
            .map(|&(n, i)| format!("{n}={}", short(&row[i])))
            .collect();
        tn_key.entry(label).or_insert(tn_label.join(" "));
    }

    let runs = |pts: &[(f64, Option<f64>)]| -> Vec<Vec<(f64, f64)>> {
        let mut out: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
        for &(x, y) in pts {
            match y {
                Some(y) => out.last_mut().unwrap().push((x, y)),
                None if !out.last().unwrap().is_empty() => out.push(Vec::new()),
                None => {}
            }
        }
        out.retain(|r| !r.is_empty());
        out
    };
    let mut lines = Vec::new();
    let mut seen_tn: Vec<String> = Vec::new();
    for (k, label) in order.iter().enumerate() {
        let (stn, tn) = &groups[label];
        let suffix = |l: &str| {
            if l.is_empty() {
                String::new()
            } else {
                format!(" {l}")
            }
        };
        lines.push(Line {
            label: format!("STN{}", suffix(label)),
            color: k % PALETTE.len(),
            dashed: false,
            runs: runs(stn),
        });
        let tl = &tn_key[label];
        if !seen_tn.contains(tl) {
            seen_tn.push(tl.clone());
            lines.push(Line {
                label: format!("TN{}", suffix(tl)),
                color: k % PALETTE.len(),
                dashed: true,
                runs: runs(tn),
            });
        }
    }
    Ok(Some(svg(title, &xlabel, ylabel, &lines)))
}

/// Shortest decimal form of a numeric cell, for legends.
fn short(cell: &str) -> String {
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => format!("{v}"),
        _ => cell.to_owned(),
    }
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_owned()
    } else {
        s.to_owned()
    }
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.04 * (hi - lo);
    (lo - pad, hi + pad)
}

fn svg(title: &str, xlabel: &str, ylabel: &str, lines: &[Line]) -> String {
    let pts = || lines.iter().flat_map(|l| l.runs.iter().flatten());
    let (x0, x1) = bounds(pts().map(|p| p.0));
    let (y0, y1) = bounds(pts().map(|p| p.1));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{title}</text>"#,
        LEFT + pw / 2.0
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for k in 0..=5 {
        let t = f64::from(k) / 5.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            s,
            r##"<line x1="{px:.2}" y1="{}" x2="{px:.2}" y2="{}" stroke="#ccc"/><text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"##,
            TOP,
            TOP + ph,
            TOP + ph + 16.0,
            tick_label(xv)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{}" y1="{py:.2}" x2="{}" y2="{py:.2}" stroke="#ccc"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT,
            LEFT + pw,
            LEFT - 6.0,
            py + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(18 {}) rotate(-90)" text-anchor="middle">{ylabel}</text>"#,
        TOP + ph / 2.0
    );
    for line in lines {
        let dash = if line.dashed {
            r#" stroke-dasharray="6 4""#
        } else {
            ""
        };
        for run in &line.runs {
            let path: Vec<String> = run
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{}" stroke-width="1.8"{dash} points="{}"/>"#,
                PALETTE[line.color],
                path.join(" ")
            );
        }
    }
    for (k, line) in lines.iter().enumerate() {
        let y = TOP + 10.0 + 18.0 * k as f64;
        let x = WIDTH - RIGHT + 14.0;
        let dash = if line.dashed {
            r#" stroke-dasharray="6 4""#
        } else {
            ""
        };
        let _ = writeln!(
            s,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="1.8"{dash}/><text x="{}" y="{}">{}</text>"#,
            x + 26.0,
            PALETTE[line.color],
            x + 32.0,
            y + 4.0,
            line.label
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "N,p,Q,p_X,l_stn,l_tn\n\
        10000,1,2e-2,2e-1,0,0\n\
        1000000,1,2e-2,2e-1,1000,5000\n\
        100000000,1,2e-2,2e-1,200000,500000\n\
        10000,2,2e-2,2e-1,0,0\n\
        1000000,2,2e-2,2e-1,0,5000\n\
        100000000,2,2e-2,2e-1,150000,500000\n";

    #[test]
    fn plots_are_a_function_of_the_csv() {
        let a = render(CSV).unwrap().unwrap();
        let b = render(CSV).unwrap().unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.contains("log10(N)"));
        assert!(a.contains("STN p=1"));
        assert!(a.contains("STN p=2"));
        // one shared TN curve
        assert_eq!(a.matches(">TN<").count(), 1);
    }

    #[test]
    fn zero_keys_break_the_line() {
        let svg = render(CSV).unwrap().unwrap();
        // p=2 STN has one drawable point only, p=1 two
        assert_eq!(svg.matches("<polyline").count(), 3);
    }

    #[test]
    fn other_tables_have_no_plot() {
        assert!(render("Q,p,w_total\n0.1,1,0.18\n").unwrap().is_none());
    }
}
