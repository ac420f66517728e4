//! File-based bridge to an external solver: the model is written as an LP
//! file, a command is run, and a `name value` solution file is read back.
//!
//! The command line may contain `{lp}` and `{sol}`, replaced by the model
//! and solution paths. The solution file may carry `# status <s>` and
//! `# objective <v>` header lines.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use super::{SolveResult, SolveStatus};
use crate::error::SolverError;
use crate::formulation::lp_file::{parse_solution, write_lp_file};
use crate::formulation::MilpInstance;

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalSolver {
    pub program: String,
    pub args: Vec<String>,
}

impl ExternalSolver {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        ExternalSolver {
            program: program.into(),
            args,
        }
    }

    /// The HiGHS adapter script shipped in `scripts/`, run with `python3`.
    pub fn highs_script(script: &Path) -> Self {
        Self::new(
            "python3",
            vec![script.display().to_string(), "{lp}".into(), "{sol}".into()],
        )
    }

    /// Runs `python3 -c "import highspy"` to see whether the adapter can work.
    pub fn highs_available() -> bool {
        Command::new("python3")
            .args(["-c", "import highspy"])
            .output()
            .map(|o| o.status.success())
            .unwrap_or(false)
    }

    fn scratch_dir() -> PathBuf {
        static COUNTER: AtomicUsize = AtomicUsize::new(0);
        let n = COUNTER.fetch_add(1, Ordering::Relaxed);
        std::env::temp_dir().join(format!("seasonal-dispatch-{}-{n}", std::process::id()))
    }

    pub fn solve(&self, inst: &MilpInstance) -> Result<SolveResult, SolverError> {
        let start = Instant::now();
        let dir = Self::scratch_dir();
        std::fs::create_dir_all(&dir).map_err(|e| SolverError::External(e.to_string()))?;
        let lp = dir.join("model.lp");
        let sol = dir.join("model.sol");
        let result = self.run(inst, &lp, &sol);
        let _ = std::fs::remove_dir_all(&dir);
        let (status, objective, x) = result?;
        let objective = objective.unwrap_or_else(|| if x.is_empty() { f64::NAN } else { inst.objective(&x) });
        Ok(SolveResult {
            status,
            objective,
            best_bound: objective,
            x,
            duals: None,
            iterations: 0,
            nodes: 0,
            wall_time: start.elapsed(),
        })
    }

    fn run(&self, inst: &MilpInstance, lp: &Path, sol: &Path) -> Result<(SolveStatus, Option<f64>, Vec<f64>), SolverError> {
        write_lp_file(inst, lp)?;
        let subst = |a: &String| {
            a.replace("{lp}", &lp.display().to_string())
                .replace("{sol}", &sol.display().to_string())
        };
        let output = Command::new(&self.program)
            .args(self.args.iter().map(subst))
            .output()
            .map_err(|e| SolverError::External(format!("{}: {e}", self.program)))?;
        if !output.status.success() {
            return Err(SolverError::External(format!(
                "{} exited with {}: {}",
                self.program,
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        let text = std::fs::read_to_string(sol).map_err(|e| SolverError::External(format!("{}: {e}", sol.display())))?;
        let status = text
            .lines()
            .find_map(|l| l.strip_prefix("# status "))
            .map(str::trim)
            .unwrap_or("optimal");
        let status = match status {
            "optimal" => SolveStatus::Optimal,
            "infeasible" => SolveStatus::Infeasible,
            "unbounded" => SolveStatus::Unbounded,
            other => return Err(SolverError::External(format!("solver reported status {other}"))),
        };
        if status != SolveStatus::Optimal {
            return Ok((status, None, Vec::new()));
        }
        let (objective, x) = parse_solution(inst, &text)?;
        Ok((status, objective, x))
    }
}
