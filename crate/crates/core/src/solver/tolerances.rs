use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SolverError;

/// Every numerical tolerance used by the engine lives here.
///
/// MILP gaps are not part of this type: each caller picks its own.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Primal feasibility for rows and bounds.
    pub feasibility: f64,
    /// Relative primal/dual objective agreement.
    pub duality: f64,
    /// Slack allowed on a bid-validity test (price must reach marginal cost minus this).
    pub validity: f64,
    /// Envelope variable versus literal product.
    pub mccormick: f64,
    /// MILP dispatch and prices versus a sequential re-clearing at the same commitment.
    pub consistency: f64,
    /// Balance residual accepted on a cleared market.
    pub balance: f64,
    /// Coefficient of the deterministic tie-break added to every bid price.
    pub tie_break: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feasibility: 1e-7,
            duality: 1e-6,
            validity: 1e-6,
            mccormick: 1e-8,
            consistency: 1e-5,
            balance: 1e-7,
            tie_break: 1e-9,
        }
    }
}

impl Tolerances {
    /// Load from a TOML file; missing keys keep their defaults.
    pub fn from_file(path: &Path) -> Result<Self, SolverError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SolverError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| SolverError::Config(format!("{}: {e}", path.display())))
    }
}

/// `|a - b| <= tol * max(1, |a|, |b|)`
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_keeps_defaults() {
        let t: Tolerances = toml::from_str("duality = 1e-5").unwrap();
        assert_eq!(t.duality, 1e-5);
        assert_eq!(t.feasibility, 1e-7);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(toml::from_str::<Tolerances>("dualty = 1e-5").is_err());
    }
}
