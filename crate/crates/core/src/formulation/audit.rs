use std::collections::BTreeMap;

use super::instance::{MilpInstance, RowTag, Sense};
use crate::network::NodeId;

/// A state-of-energy bound carried as variable bounds instead of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundEntry {
    pub node: NodeId,
    pub count: usize,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AuditReport {
    /// Row count per tag, keyed by the tag label.
    pub row_tallies: BTreeMap<String, usize>,
    pub bound_entries: Vec<BoundEntry>,
    /// Rows or bounds that can never be satisfied, as human-readable notes.
    pub impossible: Vec<String>,
    /// Row count implied by the window length and end rows, when the
    /// instance came from a window.
    pub expected_rows: Option<usize>,
    pub n_rows: usize,
    pub n_vars: usize,
    pub n_binaries: usize,
}

impl AuditReport {
    pub fn tally(&self, tag: RowTag) -> usize {
        self.row_tallies.get(&tag.to_string()).copied().unwrap_or(0)
    }

    pub fn matches_expected(&self) -> bool {
        self.expected_rows.is_none_or(|e| e == self.n_rows)
    }
}

/// Per-tag row counts and structurally impossible rows.
pub fn constraint_audit(inst: &MilpInstance) -> AuditReport {
    let mut report = AuditReport {
        n_rows: inst.n_rows(),
        n_vars: inst.n_vars(),
        n_binaries: inst.n_binaries(),
        ..AuditReport::default()
    };
    for (tag, n) in inst.tally_tags() {
        report.row_tallies.insert(tag.to_string(), n);
    }

    for c in &inst.constraints {
        if !c.rhs.is_finite() || c.coeffs.iter().any(|(_, a)| !a.is_finite()) {
            report.impossible.push(format!("{}: non-finite data", c.name));
            continue;
        }
        let live: Vec<_> = c.coeffs.iter().filter(|(_, a)| *a != 0.0).collect();
        if live.is_empty() {
            let ok = match c.sense {
                Sense::Eq => c.rhs == 0.0,
                Sense::Le => c.rhs >= 0.0,
                Sense::Ge => c.rhs <= 0.0,
            };
            if !ok {
                report.impossible.push(format!("{}: empty row with rhs {}", c.name, c.rhs));
            }
            continue;
        }
        // Activity range from variable bounds.
        let (mut lo, mut hi) = (0.0, 0.0);
        for &&(j, a) in &live {
            let v = &inst.variables[j];
            let (l, u) = if a > 0.0 { (v.lower, v.upper) } else { (v.upper, v.lower) };
            lo += a * l;
            hi += a * u;
        }
        let tol = 1e-9 * c.rhs.abs().max(1.0);
        let impossible = match c.sense {
            Sense::Eq => c.rhs < lo - tol || c.rhs > hi + tol,
            Sense::Le => lo > c.rhs + tol,
            Sense::Ge => hi < c.rhs - tol,
        };
        if impossible {
            report
                .impossible
                .push(format!("{}: activity range [{lo}, {hi}] cannot meet {} {}", c.name, c.sense.as_str(), c.rhs));
        }
    }
    for v in &inst.variables {
        if v.lower > v.upper {
            report.impossible.push(format!("{}: lower bound {} above upper {}", v.name, v.lower, v.upper));
        }
    }

    if let Some(layout) = &inst.layout {
        for node in NodeId::STORAGES {
            let first = &inst.variables[layout.state(node, 0)];
            report.bound_entries.push(BoundEntry {
                node,
                count: layout.steps,
                lower: first.lower,
                upper: first.upper,
            });
        }
        let end_rows = NodeId::STORAGES
            .iter()
            .map(|&n| inst.rows_tagged(RowTag::EndLevel(n)))
            .sum::<usize>();
        let cuts = inst.rows_tagged(RowTag::ObjectiveCut);
        report.expected_rows = Some(layout.steps * (9 + 4) + end_rows + cuts);
    }
    report
}
