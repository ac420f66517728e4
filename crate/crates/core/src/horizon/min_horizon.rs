use super::{solve_window, EngineConfig, StoreLevels};
use crate::error::EngineError;
use crate::formulation::{BoundaryConditions, EndPolicy, StorageBoundary, WindowFlows, WindowSpec};
use crate::network::{EnergyNetwork, NodeId, SeriesBundle};

/// Result of the minimum prediction horizon search for one day.
#[derive(Debug, Clone, PartialEq)]
pub struct MinHorizonOutcome {
    pub day: usize,
    /// Smallest sufficient horizon, or `max_days + 1` if none was found.
    pub days: usize,
    pub found: bool,
    /// Horizons skipped because forcing the minimum or maximum end level
    /// was infeasible.
    pub skipped: Vec<usize>,
    /// Whether the test also held at `days + 1`; `None` when not checked.
    pub recheck: Option<bool>,
}

/// End-of-first-day levels when forcing `end` at the end of a `days`-day
/// window starting on `day`. `None` when the window is infeasible.
fn first_day_levels(
    net: &EnergyNetwork,
    series: &SeriesBundle,
    day: usize,
    days: usize,
    init: StoreLevels,
    end: EndPolicy,
    cfg: &EngineConfig,
) -> Result<Option<StoreLevels>, EngineError> {
    let spd = cfg.steps_per_day();
    let start = day * spd;
    let win = WindowSpec {
        start_step: start,
        dt_hours: cfg.dt_hours,
        series: series.slice(start, days * spd)?,
        boundary: BoundaryConditions::new(
            StorageBoundary { init: init.se, end },
            StorageBoundary { init: init.sh, end },
        ),
    };
    match solve_window(net, &win, cfg, true, day) {
        Ok((inst, result)) => {
            let wf = WindowFlows::extract(inst.layout.as_ref().expect("layout"), &result.x);
            Ok(Some(StoreLevels {
                se: wf.se[spd - 1],
                sh: wf.sh[spd - 1],
            }))
        }
        Err(EngineError::Infeasible { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// `Some(true)` when forcing both storages empty and forcing both full at
/// the end of the window lead to the same levels at the end of the first
/// day, within `1e-6 * e_max` per storage. `None` when either is infeasible.
fn horizon_sufficient(
    net: &EnergyNetwork,
    series: &SeriesBundle,
    day: usize,
    days: usize,
    init: StoreLevels,
    cfg: &EngineConfig,
) -> Result<Option<bool>, EngineError> {
    let Some(low) = first_day_levels(net, series, day, days, init, EndPolicy::ForceMin, cfg)? else {
        return Ok(None);
    };
    let Some(high) = first_day_levels(net, series, day, days, init, EndPolicy::ForceMax, cfg)? else {
        return Ok(None);
    };
    let agree = NodeId::STORAGES.into_iter().all(|node| {
        let tol = 1e-6 * net.storage(node).e_max.abs();
        (low.get(node) - high.get(node)).abs() <= tol
    });
    Ok(Some(agree))
}

/// Smallest prediction horizon (days) for which the first day of
/// operation no longer depends on the end level of the window. Horizons
/// that run past the series are not tried.
pub fn min_prediction_horizon(
    net: &EnergyNetwork,
    series: &SeriesBundle,
    day: usize,
    init: StoreLevels,
    max_days: usize,
    cfg: &EngineConfig,
) -> Result<MinHorizonOutcome, EngineError> {
    let spd = cfg.steps_per_day();
    let available = (series.len() / spd).saturating_sub(day);
    let mut out = MinHorizonOutcome {
        day,
        days: max_days + 1,
        found: false,
        skipped: Vec::new(),
        recheck: None,
    };
    for days in 1..=max_days.min(available) {
        match horizon_sufficient(net, series, day, days, init, cfg)? {
            None => {
                log::debug!("day {day}: horizon {days} skipped, forced end level infeasible");
                out.skipped.push(days);
            }
            Some(false) => {}
            Some(true) => {
                out.days = days;
                out.found = true;
                if days < available {
                    let again = horizon_sufficient(net, series, day, days + 1, init, cfg)?;
                    let ok = again == Some(true);
                    if !ok {
                        log::warn!("day {day}: horizon {days} sufficient but {} is not", days + 1);
                    }
                    out.recheck = Some(ok);
                }
                break;
            }
        }
    }
    if !out.found && max_days > available {
        log::warn!("day {day}: series ends after {available} days, search stopped early");
    }
    Ok(out)
}

/// Runs the search for several days on worker threads. `init_of(day)`
/// gives the storage levels at the start of each day.
pub fn min_prediction_horizon_days<F>(
    net: &EnergyNetwork,
    series: &SeriesBundle,
    days: &[usize],
    init_of: F,
    max_days: usize,
    cfg: &EngineConfig,
    threads: usize,
) -> Result<Vec<MinHorizonOutcome>, EngineError>
where
    F: Fn(usize) -> StoreLevels + Sync,
{
    let threads = threads.max(1).min(days.len().max(1));
    let chunk = days.len().div_ceil(threads).max(1);
    let results: Vec<Result<Vec<MinHorizonOutcome>, EngineError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = days
            .chunks(chunk)
            .map(|part| {
                let init_of = &init_of;
                scope.spawn(move || {
                    part.iter()
                        .map(|&d| min_prediction_horizon(net, series, d, init_of(d), max_days, cfg))
                        .collect()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut all = Vec::with_capacity(days.len());
    for r in results {
        all.extend(r?);
    }
    Ok(all)
}
