use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::DataError;
use crate::horizon::{gap_from_costs, SimulationTrace, SummaryRecord};

/// Files written by [`emit_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub table_csv: PathBuf,
    pub table_txt: PathBuf,
    pub plot_svg: PathBuf,
    pub plot_points_csv: PathBuf,
}

const COLORS: [&str; 8] = ["#000000", "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"];

fn label(r: &SummaryRecord) -> String {
    match r.horizon_days {
        Some(d) => format!("{} {d}d", r.method),
        None => r.method.clone(),
    }
}

/// Table rows: one per trace, gaps against the first benchmark trace,
/// followed by `extra` rows (e.g. infeasible runs).
pub fn summary_rows(traces: &[SimulationTrace], extra: &[SummaryRecord]) -> Vec<SummaryRecord> {
    let bench = traces.iter().find(|t| t.is_benchmark).map(|t| t.total_cost);
    let mut rows: Vec<SummaryRecord> = traces
        .iter()
        .map(|t| {
            let mut r = t.summary(bench);
            if t.is_benchmark && bench == Some(t.total_cost) {
                r.gap_pct = Some(0.0);
            }
            r
        })
        .collect();
    rows.extend(extra.iter().cloned());
    rows
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or(String::new(), |x| format!("{x:.digits$}"))
}

/// Writes the results table (CSV and aligned text), an SVG of the
/// heat-storage level of every trace, and the plotted points as CSV.
pub fn emit_report(traces: &[SimulationTrace], extra: &[SummaryRecord], dir: &Path) -> Result<ReportFiles, DataError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| DataError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let files = ReportFiles {
        table_csv: dir.join("results.csv"),
        table_txt: dir.join("results.txt"),
        plot_svg: dir.join("sh_state.svg"),
        plot_points_csv: dir.join("sh_state_points.csv"),
    };
    let rows = summary_rows(traces, extra);

    let mut csv = String::from("method,horizon_days,cost_eur,gap_pct,runtime_s,note\n");
    for r in &rows {
        writeln!(
            csv,
            "{},{},{},{},{:.3},{}",
            r.method,
            r.horizon_days.map_or(String::new(), |d| d.to_string()),
            r.cost.map_or(String::new(), |c| c.to_string()),
            fmt_opt(r.gap_pct, 2),
            r.runtime_s,
            r.note.as_deref().unwrap_or("").replace(',', ";")
        )
        .unwrap();
    }
    std::fs::write(&files.table_csv, csv).map_err(io(&files.table_csv))?;

    let header = ["Method", "T (days)", "Cost (€)", "Subopt. gap", "Runtime (s)"];
    let cells: Vec<[String; 5]> = rows
        .iter()
        .map(|r| {
            [
                r.method.clone(),
                r.horizon_days.map_or("-".into(), |d| d.to_string()),
                r.cost.map_or("Infeas.".into(), |c| format!("{c:.2}")),
                r.gap_pct.map_or("-".into(), |g| format!("{g:.2}%")),
                format!("{:.1}", r.runtime_s),
            ]
        })
        .collect();
    let mut widths = header.map(|h| h.chars().count());
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |row: &[String]| -> String {
        row.iter()
            .zip(widths)
            .enumerate()
            .map(|(i, (c, w))| {
                let pad = w - c.chars().count();
                if i == 0 {
                    format!("{c}{}", " ".repeat(pad))
                } else {
                    format!("{}{c}", " ".repeat(pad))
                }
            })
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut txt = line(&header.map(String::from));
    txt.push('\n');
    txt += &"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1));
    txt.push('\n');
    for row in &cells {
        txt += &line(row);
        txt.push('\n');
    }
    std::fs::write(&files.table_txt, txt).map_err(io(&files.table_txt))?;

    let labels: Vec<String> = traces.iter().map(|t| label(&t.summary(None))).collect();
    let n = traces.iter().map(|t| t.len()).max().unwrap_or(0);
    let mut points = String::from("hour");
    for l in &labels {
        points += &format!(",{l}");
    }
    points.push('\n');
    for t in 0..n {
        let hour = traces.iter().find(|tr| tr.len() > t).map_or(t as f64 + 1.0, |tr| (t + 1) as f64 * tr.dt_hours);
        points += &hour.to_string();
        for tr in traces {
            points.push(',');
            if let Some(v) = tr.sh.get(t) {
                points += &v.to_string();
            }
        }
        points.push('\n');
    }
    std::fs::write(&files.plot_points_csv, points).map_err(io(&files.plot_points_csv))?;

    std::fs::write(&files.plot_svg, svg_plot(traces, &labels)).map_err(io(&files.plot_svg))?;
    Ok(files)
}

fn svg_plot(traces: &[SimulationTrace], labels: &[String]) -> String {
    let (w, h) = (960.0, 420.0);
    let (left, right, top, bottom) = (70.0, 180.0, 20.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let hours = traces
        .iter()
        .map(|t| t.len() as f64 * t.dt_hours)
        .fold(1.0f64, f64::max);
    let ymax = traces
        .iter()
        .flat_map(|t| t.sh.iter().copied())
        .fold(1.0f64, f64::max)
        * 1.05;
    let x = |hr: f64| left + pw * hr / hours;
    let y = |e: f64| top + ph * (1.0 - e / ymax);

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<path d="M{left},{top} V{} H{}" fill="none" stroke="black"/>"#,
        top + ph,
        left + pw
    )
    .unwrap();
    for k in 0..=4 {
        let e = ymax * k as f64 / 4.0;
        writeln!(
            s,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{:.0}</text>"#,
            left - 6.0,
            y(e) + 4.0,
            e
        )
        .unwrap();
        let hr = hours * k as f64 / 4.0;
        writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{:.0}</text>"#,
            x(hr),
            top + ph + 18.0,
            hr
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{:.1}" y="{}" text-anchor="middle">Hour</text>"#,
        left + pw / 2.0,
        h - 8.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text transform="translate(16,{:.1}) rotate(-90)" text-anchor="middle">Heat storage level (kWh)</text>"#,
        top + ph / 2.0
    )
    .unwrap();
    for (i, (t, l)) in traces.iter().zip(labels).enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut pts = String::new();
        write!(pts, "{:.2},{:.2}", x(0.0), y(t.init.sh)).unwrap();
        for (k, e) in t.sh.iter().enumerate() {
            write!(pts, " {:.2},{:.2}", x((k + 1) as f64 * t.dt_hours), y(*e)).unwrap();
        }
        writeln!(
            s,
            r#"<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1"/>"#
        )
        .unwrap();
        let ly = top + 16.0 * (i as f64 + 1.0);
        writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            left + pw + 12.0,
            left + pw + 32.0,
            left + pw + 38.0,
            ly + 4.0,
            xml_escape(l)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Gap recomputed from a cost against the benchmark cost, in percent.
pub fn gap_pct(cost: f64, benchmark_cost: f64) -> Option<f64> {
    gap_from_costs(cost, benchmark_cost).ok().map(|g| 100.0 * g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::horizon::StoreLevels;
    use std::time::Duration;

    fn trace(method: &str, days: usize, cost: f64, bench: bool) -> SimulationTrace {
        SimulationTrace {
            method: method.into(),
            horizon_days: Some(days),
            dt_hours: 1.0,
            arcs: Vec::new(),
            flows: vec![Vec::new(); 48],
            se: vec![0.0; 48],
            sh: (0..48).map(|h| 3000.0 + h as f64).collect(),
            window_id: vec![0; 48],
            init: StoreLevels { se: 0.0, sh: 3000.0 },
            windows: Vec::new(),
            total_cost: cost,
            is_benchmark: bench,
            runtime: Duration::from_millis(1500),
        }
    }

    fn table_rows(path: &Path) -> Vec<Vec<String>> {
        std::fs::read_to_string(path)
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(String::from).collect())
            .collect()
    }

    #[test]
    fn table_and_plots() {
        let dir = tempfile::tempdir().unwrap();
        let traces = vec![
            trace("full-horizon", 365, 1362.45, true),
            trace("hybrid", 6, 1421.20, false),
            trace("fixed-level", 42, 1518.04, false),
        ];
        let extra = [SummaryRecord::infeasible("hybrid", 4, 3.0, "day 17".into())];
        let f = emit_report(&traces, &extra, dir.path()).unwrap();
        let rows = table_rows(&f.table_csv);
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0][3], "0.00");
        assert_eq!(rows[1][3], "4.31");
        assert_eq!(rows[2][3], "11.42");
        assert_eq!(rows[3][2], "");
        let bench: f64 = rows[0][2].parse().unwrap();
        for r in &rows[..3] {
            let cost: f64 = r[2].parse().unwrap();
            assert_eq!(format!("{:.2}", gap_pct(cost, bench).unwrap()), r[3]);
        }
        let txt = std::fs::read_to_string(&f.table_txt).unwrap();
        assert!(txt.contains("Infeas."));
        let svg = std::fs::read_to_string(&f.plot_svg).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 3);
        let pts = std::fs::read_to_string(&f.plot_points_csv).unwrap();
        assert_eq!(pts.lines().count(), 49);
    }

    #[test]
    fn single_benchmark_and_empty() {
        let dir = tempfile::tempdir().unwrap();
        let f = emit_report(&[trace("full-horizon", 365, 100.0, true)], &[], dir.path()).unwrap();
        let rows = table_rows(&f.table_csv);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0][3], "0.00");
        let f = emit_report(&[], &[], dir.path()).unwrap();
        assert_eq!(std::fs::read_to_string(&f.table_csv).unwrap().lines().count(), 1);
    }
}
