//! Thin abstraction over an external LP/MILP backend.
//!
//! Models are built backend-agnostically as a [`Model`] and handed to a
//! [`Backend`]. One backend ships with the crate ([`HighsBackend`]); another
//! can be added by implementing [`Backend`] and extending [`backend_from_env`].
//! The backend must provide row duals for continuous problems, since market
//! prices are read from them.

mod highs_backend;
pub mod lp_format;
mod model;
mod optimality;
mod tolerances;

use std::time::Duration;

use thiserror::Error;

pub use highs_backend::HighsBackend;
pub use model::{Constraint, Model, RowId, Sense, VarId, VarKind, Variable};
pub use optimality::{check_lp_optimality, LpOptimality};
pub use tolerances::{rel_close, Tolerances};

/// Environment variable naming the solver backend.
pub const BACKEND_ENV: &str = "HEATUC_SOLVER";

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("backend `{backend}` failed: {message}")]
    Backend { backend: String, message: String },
    #[error("unknown solver backend `{0}` (available: highs)")]
    UnknownBackend(String),
    #[error("solve_lp called on a model with {0} integer column(s)")]
    HasIntegers(usize),
    #[error("solver configuration: {0}")]
    Config(String),
    #[error("LP format: line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Time, iteration or numerical limit hit. A primal point may still be attached.
    Limit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub objective: f64,
    /// Column values; empty when no incumbent exists.
    pub primal: Vec<f64>,
    /// Row duals, only for continuous problems (or after a fixed-integer re-solve).
    pub row_duals: Option<Vec<f64>>,
    /// Reduced costs, alongside `row_duals`.
    pub col_duals: Option<Vec<f64>>,
    /// Relative MILP gap; `None` for LPs.
    pub gap: Option<f64>,
    pub wall_time: Duration,
}

impl SolveReport {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn has_primal(&self) -> bool {
        !self.primal.is_empty()
    }

    pub fn value(&self, var: VarId) -> f64 {
        self.primal[var.0]
    }

    pub fn dual(&self, row: RowId) -> Option<f64> {
        self.row_duals.as_ref().map(|d| d[row.0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MilpOptions {
    /// Relative gap target.
    pub rel_gap: f64,
    /// Absolute gap target.
    pub abs_gap: f64,
    pub time_limit: Option<Duration>,
    /// Re-solve with binaries fixed at the incumbent to obtain duals.
    pub with_duals: bool,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self {
            rel_gap: 1e-4,
            abs_gap: 1e-6,
            time_limit: None,
            with_duals: false,
        }
    }
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &str;

    /// Solve a problem with no integer columns, returning primal and dual values.
    fn solve_lp(&self, model: &Model, tol: &Tolerances) -> Result<SolveReport, SolverError>;

    /// Solve a problem that may contain binaries; duals are never attached here.
    /// `start` is an optional full column vector handed to the solver as a
    /// first incumbent.
    fn solve_milp_raw(
        &self,
        model: &Model,
        opts: &MilpOptions,
        tol: &Tolerances,
        start: Option<&[f64]>,
    ) -> Result<SolveReport, SolverError>;

    fn solve_milp(
        &self,
        model: &Model,
        opts: &MilpOptions,
        tol: &Tolerances,
    ) -> Result<SolveReport, SolverError> {
        self.solve_milp_from(model, opts, tol, None)
    }

    fn solve_milp_from(
        &self,
        model: &Model,
        opts: &MilpOptions,
        tol: &Tolerances,
        start: Option<&[f64]>,
    ) -> Result<SolveReport, SolverError> {
        if !model.has_integers() {
            let report = self.solve_lp(model, tol)?;
            return Ok(if opts.with_duals {
                report
            } else {
                SolveReport {
                    row_duals: None,
                    col_duals: None,
                    ..report
                }
            });
        }
        let mut report = self.solve_milp_raw(model, opts, tol, start)?;
        if opts.with_duals && report.has_primal() {
            let fixed = model.with_integers_fixed(&report.primal);
            let lp = self.solve_lp(&fixed, tol)?;
            if lp.is_optimal() {
                report.primal = lp.primal;
                report.objective = lp.objective;
                report.row_duals = lp.row_duals;
                report.col_duals = lp.col_duals;
            }
        }
        Ok(report)
    }
}

/// Backend selected by [`BACKEND_ENV`], defaulting to HiGHS.
pub fn backend_from_env() -> Result<Box<dyn Backend>, SolverError> {
    match std::env::var(BACKEND_ENV) {
        Ok(name) => backend_by_name(&name),
        Err(_) => Ok(Box::new(HighsBackend)),
    }
}

pub fn backend_by_name(name: &str) -> Result<Box<dyn Backend>, SolverError> {
    match name.trim().to_ascii_lowercase().as_str() {
        "" | "highs" => Ok(Box::new(HighsBackend)),
        other => Err(SolverError::UnknownBackend(other.to_string())),
    }
}

/// Backend plus the tolerances every solve in a run shares.
pub struct SolverContext {
    backend: Box<dyn Backend>,
    pub tol: Tolerances,
}

impl SolverContext {
    pub fn new(backend: Box<dyn Backend>, tol: Tolerances) -> Self {
        Self { backend, tol }
    }

    /// Backend from [`BACKEND_ENV`] with the given tolerances.
    pub fn from_env(tol: Tolerances) -> Result<Self, SolverError> {
        Ok(Self::new(backend_from_env()?, tol))
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    pub fn solve_lp(&self, model: &Model) -> Result<SolveReport, SolverError> {
        self.backend.solve_lp(model, &self.tol)
    }

    pub fn solve_milp(
        &self,
        model: &Model,
        opts: &MilpOptions,
    ) -> Result<SolveReport, SolverError> {
        self.backend.solve_milp(model, opts, &self.tol)
    }

    /// MILP solve seeded with a feasible point.
    pub fn solve_milp_from(
        &self,
        model: &Model,
        opts: &MilpOptions,
        start: &[f64],
    ) -> Result<SolveReport, SolverError> {
        self.backend
            .solve_milp_from(model, opts, &self.tol, Some(start))
    }
}

impl Default for SolverContext {
    fn default() -> Self {
        Self::new(Box::new(HighsBackend), Tolerances::default())
    }
}

impl std::fmt::Debug for SolverContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SolverContext")
            .field("backend", &self.backend.name())
            .field("tol", &self.tol)
            .finish()
    }
}

pub fn solve_lp(model: &Model) -> Result<SolveReport, SolverError> {
    HighsBackend.solve_lp(model, &Tolerances::default())
}

pub fn solve_milp(model: &Model, opts: &MilpOptions) -> Result<SolveReport, SolverError> {
    HighsBackend.solve_milp(model, opts, &Tolerances::default())
}
