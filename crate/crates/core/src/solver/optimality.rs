use super::{Model, Sense, SolveReport};

/// Certificate quality of an LP solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpOptimality {
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// Largest row or bound violation of the primal point.
    pub primal_infeasibility: f64,
    /// Largest sign violation of a row dual or reduced cost.
    pub dual_infeasibility: f64,
    /// Largest `|multiplier| * slack` over rows and bounds.
    pub complementarity: f64,
}

impl LpOptimality {
    pub fn relative_duality_gap(&self) -> f64 {
        let scale = 1f64
            .max(self.primal_objective.abs())
            .max(self.dual_objective.abs());
        (self.primal_objective - self.dual_objective).abs() / scale
    }
}

const ZERO: f64 = 1e-12;

/// Bound term of the dual objective for a multiplier on `lo <= expr <= hi`;
/// a positive multiplier prices the lower bound, a negative one the upper.
fn bound_term(mult: f64, lo: f64, hi: f64) -> (f64, f64) {
    if mult > ZERO {
        if lo.is_finite() {
            (mult * lo, 0.0)
        } else {
            (0.0, mult)
        }
    } else if mult < -ZERO {
        if hi.is_finite() {
            (mult * hi, 0.0)
        } else {
            (0.0, -mult)
        }
    } else {
        (0.0, 0.0)
    }
}

fn slack_product(mult: f64, value: f64, lo: f64, hi: f64) -> f64 {
    if mult > ZERO && lo.is_finite() {
        mult * (value - lo).abs()
    } else if mult < -ZERO && hi.is_finite() {
        -mult * (hi - value).abs()
    } else {
        0.0
    }
}

/// Recompute primal/dual objectives and slackness from an LP report.
///
/// Returns `None` if the report carries no duals.
pub fn check_lp_optimality(model: &Model, report: &SolveReport) -> Option<LpOptimality> {
    let y = report.row_duals.as_ref()?;
    let d = report.col_duals.as_ref()?;
    let x = &report.primal;

    let mut dual_obj = model.objective_offset();
    let mut dual_inf: f64 = 0.0;
    let mut comp: f64 = 0.0;

    for (row, &yr) in model.rows().iter().zip(y) {
        let (lo, hi) = match row.sense {
            Sense::Ge => (row.rhs, f64::INFINITY),
            Sense::Le => (f64::NEG_INFINITY, row.rhs),
            Sense::Eq => (row.rhs, row.rhs),
        };
        let (term, inf) = bound_term(yr, lo, hi);
        dual_obj += term;
        dual_inf = dual_inf.max(inf);
        comp = comp.max(slack_product(yr, row.activity(x), lo, hi));
    }
    for ((var, &dk), &xk) in model.vars().iter().zip(d).zip(x) {
        let (term, inf) = bound_term(dk, var.lower, var.upper);
        dual_obj += term;
        dual_inf = dual_inf.max(inf);
        comp = comp.max(slack_product(dk, xk, var.lower, var.upper));
    }

    Some(LpOptimality {
        primal_objective: model.objective(x),
        dual_objective: dual_obj,
        primal_infeasibility: model.max_violation(x),
        dual_infeasibility: dual_inf,
        complementarity: comp,
    })
}
