//! Heat unit commitment: a decoupled baseline and an electricity-aware model.
//!
//! The aware model anticipates both clearings. Heat and electricity are merged
//! into one LP with weights `gamma` and `1 - gamma`, which is replaced by its
//! primal and dual feasibility plus strong duality; products of binaries with
//! continuous variables are linearized by McCormick envelopes.

mod aware;
mod compact;
mod decoupled;
mod oracle;
mod plan;

use thiserror::Error;

use crate::bidding::BiddingError;
use crate::market::MarketError;
use crate::solver::SolverError;

pub use aware::{
    build_aware_milp, period_states, solve_aware, AwareDiagnostics, AwareMilp, AwareOptions,
    AwareSolution, Consistency, PeriodStates,
};
pub use compact::{
    add_mccormick, build_bid_validity, CompactModel, DualBounds, Envelope, Formulation, LpRow,
    Part, RowTag, UcRow, ValidityLink, ValidityRow, XVar, ZVar,
};
pub use decoupled::{solve_decoupled_uc, DecoupledSolution};
pub use oracle::{enumerate_oracle, OracleMode, OracleResult};
pub use plan::{CommitmentPlan, UnitPlan};

#[derive(Debug, Error)]
pub enum UcError {
    #[error("gamma must lie strictly between 0 and 1, got {0}")]
    Gamma(f64),
    #[error("no commitment plan satisfies the heat and electricity constraints")]
    Infeasible,
    #[error("solver stopped at a limit{}", match gap { Some(g) => format!(" with gap {g:.3e}"), None => " without an incumbent".to_string() })]
    Limit {
        incumbent: Option<Box<CommitmentPlan>>,
        gap: Option<f64>,
    },
    #[error("dual `{name}` sits at its artificial bound {bound} after {escalations} escalations; larger dual bounds are needed")]
    DualBound {
        name: String,
        bound: f64,
        escalations: usize,
    },
    #[error("envelope variable deviates from its product by {0:.3e}")]
    McCormick(f64),
    #[error("strong duality violated: relative gap {0:.3e}")]
    StrongDuality(f64),
    #[error("enumeration needs {plans} plans, budget is {budget}")]
    Budget { plans: u128, budget: u64 },
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Bidding(#[from] BiddingError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}
