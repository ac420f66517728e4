//! Trace CSV: `#`-prefixed `key=value` metadata lines, then one row per
//! step with the window id, every arc flow and both storage levels.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{SimulationTrace, StoreLevels};
use crate::error::DataError;
use crate::network::{Arc, NodeId};

/// One row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub method: String,
    pub horizon_days: Option<usize>,
    /// Total cost (€); empty when the run was infeasible.
    pub cost: Option<f64>,
    /// Suboptimality gap in percent.
    pub gap_pct: Option<f64>,
    pub runtime_s: f64,
    pub note: Option<String>,
}

impl SummaryRecord {
    /// Row for a run that aborted on an infeasible window.
    pub fn infeasible(method: &str, horizon_days: usize, runtime_s: f64, note: String) -> Self {
        SummaryRecord {
            method: method.into(),
            horizon_days: Some(horizon_days),
            cost: None,
            gap_pct: None,
            runtime_s,
            note: Some(note),
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> DataError {
    DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn arc_column(arc: &Arc) -> String {
    format!("p_{}_{}", arc.from, arc.to)
}

pub fn write_trace_csv(trace: &SimulationTrace, path: &Path) -> Result<(), DataError> {
    let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let meta = [
        ("method", trace.method.clone()),
        ("horizon_days", trace.horizon_days.map_or(String::new(), |d| d.to_string())),
        ("dt_hours", trace.dt_hours.to_string()),
        ("init_se", trace.init.se.to_string()),
        ("init_sh", trace.init.sh.to_string()),
        ("total_cost", trace.total_cost.to_string()),
        ("benchmark", trace.is_benchmark.to_string()),
        ("runtime_s", trace.runtime.as_secs_f64().to_string()),
    ];
    for (k, v) in meta {
        writeln!(out, "# {k}={v}").map_err(|e| io_err(path, e))?;
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["step".to_string(), "window".to_string()];
    header.extend(trace.arcs.iter().map(arc_column));
    header.push("e_SE".into());
    header.push("e_SH".into());
    let csv_err = |e: csv::Error| DataError::File {
        path: path.to_path_buf(),
        msg: e.to_string(),
    };
    w.write_record(&header).map_err(csv_err)?;
    for t in 0..trace.len() {
        let mut row = vec![t.to_string(), trace.window_id[t].to_string()];
        row.extend(trace.flows[t].iter().map(|v| v.to_string()));
        row.push(trace.se[t].to_string());
        row.push(trace.sh[t].to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

pub fn read_trace_csv(path: &Path) -> Result<SimulationTrace, DataError> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut meta = std::collections::BTreeMap::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| io_err(path, e))?;
        let Some(rest) = line.strip_prefix('#') else { break };
        if let Some((k, v)) = rest.trim().split_once('=') {
            meta.insert(k.to_string(), v.to_string());
        }
    }
    let bad = |msg: String| DataError::File {
        path: path.to_path_buf(),
        msg,
    };
    let num = |key: &str| -> Result<f64, DataError> {
        meta.get(key)
            .ok_or_else(|| bad(format!("missing metadata {key}")))?
            .parse()
            .map_err(|_| bad(format!("metadata {key} is not a number")))
    };

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.len() < 4 || &header[0] != "step" || &header[1] != "window" {
        return Err(bad("unexpected trace header".into()));
    }
    let n_arcs = header.len() - 4;
    let mut arcs = Vec::with_capacity(n_arcs);
    for name in header.iter().skip(2).take(n_arcs) {
        let parts: Vec<&str> = name.split('_').collect();
        let (Some(from), Some(to)) = (
            parts.get(1).and_then(|s| NodeId::parse(s)),
            parts.get(2).and_then(|s| NodeId::parse(s)),
        ) else {
            return Err(bad(format!("bad flow column {name}")));
        };
        arcs.push(Arc { from, to });
    }

    let mut trace = SimulationTrace {
        method: meta.get("method").cloned().unwrap_or_default(),
        horizon_days: meta.get("horizon_days").and_then(|s| s.parse().ok()),
        dt_hours: num("dt_hours")?,
        arcs,
        flows: Vec::new(),
        se: Vec::new(),
        sh: Vec::new(),
        window_id: Vec::new(),
        init: StoreLevels {
            se: num("init_se")?,
            sh: num("init_sh")?,
        },
        windows: Vec::new(),
        total_cost: num("total_cost")?,
        is_benchmark: meta.get("benchmark").is_some_and(|v| v == "true"),
        runtime: Duration::from_secs_f64(num("runtime_s").unwrap_or(0.0).max(0.0)),
    };
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| DataError::Row {
            path: path.to_path_buf(),
            row,
            msg: e.to_string(),
        })?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| DataError::Row {
                path: path.to_path_buf(),
                row,
                msg: e.to_string(),
            })?;
        trace.window_id.push(vals[1] as usize);
        trace.flows.push(vals[2..2 + n_arcs].to_vec());
        trace.se.push(vals[2 + n_arcs]);
        trace.sh.push(vals[3 + n_arcs]);
    }
    Ok(trace)
}
