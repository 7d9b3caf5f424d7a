use std::ffi::CString;
use std::time::Instant;

use highs::{HighsModelStatus, RowProblem, Sense as HighsSense};

use super::{
    Backend, MilpOptions, Model, Sense, SolveReport, SolveStatus, SolverError, Tolerances, VarKind,
};

/// HiGHS (dual simplex for LPs, branch-and-cut for MILPs).
#[derive(Debug, Clone, Default)]
pub struct HighsBackend;

fn row_bounds(sense: Sense, rhs: f64) -> (f64, f64) {
    match sense {
        Sense::Ge => (rhs, f64::INFINITY),
        Sense::Le => (f64::NEG_INFINITY, rhs),
        Sense::Eq => (rhs, rhs),
    }
}

/// HiGHS discards matrix entries at or below this magnitude.
const SMALL_MATRIX_VALUE: f64 = 1e-9;

fn to_highs(model: &Model, integer: bool) -> RowProblem {
    let mut pb = RowProblem::default();
    let cols: Vec<_> = model
        .vars()
        .iter()
        .map(|v| {
            let is_int = integer && v.kind == VarKind::Binary;
            pb.add_column_with_integrality(v.cost, v.lower..=v.upper, is_int)
        })
        .collect();
    let mut dropped = 0usize;
    for row in model.rows() {
        let (lo, hi) = row_bounds(row.sense, row.rhs);
        let terms: Vec<_> = row
            .terms
            .iter()
            .filter(|&&(_, a)| {
                let keep = a.abs() > SMALL_MATRIX_VALUE;
                dropped += usize::from(!keep && a != 0.0);
                keep
            })
            .map(|&(v, a)| (cols[v.0], a))
            .collect();
        pb.add_row(lo..=hi, terms);
    }
    if dropped > 0 {
        log::debug!("dropped {dropped} matrix entries below {SMALL_MATRIX_VALUE:e}");
    }
    pb
}

fn primal_solution_available(solved: &highs::SolvedModel) -> bool {
    let name = CString::new("primal_solution_status").expect("static option name");
    let mut value: highs_sys::HighsInt = 0;
    let status = unsafe {
        highs_sys::Highs_getIntInfoValue(solved.as_ptr() as *mut _, name.as_ptr(), &mut value)
    };
    status == highs_sys::STATUS_OK && value == highs_sys::SOLUTION_STATUS_FEASIBLE
}

impl HighsBackend {
    fn run(
        &self,
        model: &Model,
        integer: bool,
        opts: Option<&MilpOptions>,
        tol: &Tolerances,
        start: Option<&[f64]>,
    ) -> Result<(HighsModelStatus, highs::SolvedModel), SolverError> {
        let problem = to_highs(model, integer);
        let mut m = problem
            .try_optimise(HighsSense::Minimise)
            .map_err(|s| self.fail(format!("model rejected: {s:?}")))?;
        m.make_quiet();
        m.set_option("primal_feasibility_tolerance", tol.feasibility);
        m.set_option("dual_feasibility_tolerance", tol.feasibility);
        m.set_option("random_seed", 0);
        if integer {
            let opts = opts.copied().unwrap_or_default();
            m.set_option("mip_rel_gap", opts.rel_gap);
            m.set_option("mip_abs_gap", opts.abs_gap);
            m.set_option("mip_feasibility_tolerance", tol.feasibility);
            if let Some(limit) = opts.time_limit {
                m.set_option("time_limit", limit.as_secs_f64());
            }
            if let Some(x) = start {
                m.try_set_solution(Some(x), None, None, None)
                    .map_err(|s| self.fail(format!("start rejected: {s:?}")))?;
            }
        } else {
            m.set_option("solver", "simplex");
        }
        let solved = m
            .try_solve()
            .map_err(|s| self.fail(format!("run failed: {s:?}")))?;
        let status = solved.status();
        Ok((status, solved))
    }

    fn fail(&self, message: String) -> SolverError {
        SolverError::Backend {
            backend: self.name().to_string(),
            message,
        }
    }

    /// HiGHS sometimes cannot tell unboundedness from infeasibility; a
    /// zero-objective feasibility solve settles it.
    fn disambiguate(&self, model: &Model, tol: &Tolerances) -> Result<SolveStatus, SolverError> {
        let mut feas = model.clone();
        for i in 0..feas.num_vars() {
            feas.set_cost(super::VarId(i), 0.0);
        }
        let (status, _) = self.run(&feas, model.has_integers(), None, tol, None)?;
        Ok(match status {
            HighsModelStatus::Optimal => SolveStatus::Unbounded,
            HighsModelStatus::Infeasible => SolveStatus::Infeasible,
            _ => SolveStatus::Limit,
        })
    }

    fn map_status(
        &self,
        status: HighsModelStatus,
        model: &Model,
        tol: &Tolerances,
    ) -> Result<SolveStatus, SolverError> {
        Ok(match status {
            HighsModelStatus::Optimal | HighsModelStatus::ModelEmpty => SolveStatus::Optimal,
            HighsModelStatus::Infeasible => SolveStatus::Infeasible,
            HighsModelStatus::Unbounded => SolveStatus::Unbounded,
            HighsModelStatus::UnboundedOrInfeasible => self.disambiguate(model, tol)?,
            HighsModelStatus::ReachedTimeLimit
            | HighsModelStatus::ReachedIterationLimit
            | HighsModelStatus::ObjectiveBound
            | HighsModelStatus::ObjectiveTarget
            | HighsModelStatus::Unknown => SolveStatus::Limit,
            other => return Err(self.fail(format!("model status {other:?}"))),
        })
    }
}

impl Backend for HighsBackend {
    fn name(&self) -> &str {
        "highs"
    }

    fn solve_lp(&self, model: &Model, tol: &Tolerances) -> Result<SolveReport, SolverError> {
        let n_int = model
            .vars()
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .count();
        if n_int > 0 {
            return Err(SolverError::HasIntegers(n_int));
        }
        let start = Instant::now();
        if model.num_vars() == 0 {
            return Ok(SolveReport {
                status: SolveStatus::Optimal,
                objective: model.objective_offset(),
                primal: vec![],
                row_duals: Some(vec![0.0; model.num_rows()]),
                col_duals: Some(vec![]),
                gap: None,
                wall_time: start.elapsed(),
            });
        }
        let (raw, solved) = self.run(model, false, None, tol, None)?;
        let status = self.map_status(raw, model, tol)?;
        let mut report = SolveReport {
            status,
            objective: f64::NAN,
            primal: vec![],
            row_duals: None,
            col_duals: None,
            gap: None,
            wall_time: start.elapsed(),
        };
        if status == SolveStatus::Optimal {
            let sol = solved.get_solution();
            report.objective = solved.objective_value() + model.objective_offset();
            report.primal = sol.columns().to_vec();
            report.row_duals = Some(sol.dual_rows().to_vec());
            report.col_duals = Some(sol.dual_columns().to_vec());
        }
        Ok(report)
    }

    fn solve_milp_raw(
        &self,
        model: &Model,
        opts: &MilpOptions,
        tol: &Tolerances,
        x0: Option<&[f64]>,
    ) -> Result<SolveReport, SolverError> {
        let start = Instant::now();
        let (raw, solved) = self.run(model, true, Some(opts), tol, x0)?;
        let status = self.map_status(raw, model, tol)?;
        let mut report = SolveReport {
            status,
            objective: f64::NAN,
            primal: vec![],
            row_duals: None,
            col_duals: None,
            gap: None,
            wall_time: start.elapsed(),
        };
        let has_incumbent = match status {
            SolveStatus::Optimal => true,
            SolveStatus::Limit => primal_solution_available(&solved),
            _ => false,
        };
        if has_incumbent {
            let mut x = solved.get_solution().columns().to_vec();
            for (xi, v) in x.iter_mut().zip(model.vars()) {
                if v.kind == VarKind::Binary {
                    *xi = xi.round();
                }
            }
            report.objective = model.objective(&x);
            report.primal = x;
            report.gap = Some(solved.mip_gap());
        }
        Ok(report)
    }
}
