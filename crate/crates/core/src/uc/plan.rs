use serde::Serialize;

use crate::system::{Case, HeatUnit, UcParams, UnitId};

/// Schedule of one heat unit. Block selection is monotone, so it is stored
/// as the number of leading blocks offered; a committed unit always offers
/// its first block.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct UnitPlan {
    pub unit: UnitId,
    pub on: Vec<bool>,
    /// Leading blocks offered in each period; 0 exactly when off.
    pub blocks: Vec<usize>,
}

impl UnitPlan {
    pub fn off(unit: UnitId, periods: usize) -> Self {
        Self {
            unit,
            on: vec![false; periods],
            blocks: vec![0; periods],
        }
    }

    pub fn startups(&self, initial_on: bool) -> Vec<bool> {
        let mut prev = initial_on;
        self.on
            .iter()
            .map(|&u| {
                let s = u && !prev;
                prev = u;
                s
            })
            .collect()
    }

    pub fn shutdowns(&self, initial_on: bool) -> Vec<bool> {
        let mut prev = initial_on;
        self.on
            .iter()
            .map(|&u| {
                let s = !u && prev;
                prev = u;
                s
            })
            .collect()
    }

    pub fn is_selected(&self, t: usize, b: usize) -> bool {
        b < self.blocks[t]
    }
}

/// Commitment and bid selection of every heat unit, in unit-id order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct CommitmentPlan {
    pub units: Vec<UnitPlan>,
    /// Hours of delay per pipe; always zero.
    pub pipe_delays: Vec<usize>,
}

impl CommitmentPlan {
    pub fn all_off(case: &Case) -> Self {
        Self {
            units: case
                .heat_units()
                .iter()
                .map(|u| UnitPlan::off(u.id().clone(), case.horizon.len))
                .collect(),
            pipe_delays: vec![0; case.heat.pipes.len()],
        }
    }

    /// Every unit on with every block offered.
    pub fn all_on(case: &Case) -> Self {
        let n = case.horizon.len;
        Self {
            units: case
                .heat_units()
                .iter()
                .map(|u| UnitPlan {
                    unit: u.id().clone(),
                    on: vec![true; n],
                    blocks: vec![u.block_shares().len(); n],
                })
                .collect(),
            pipe_delays: vec![0; case.heat.pipes.len()],
        }
    }

    pub fn unit(&self, id: &UnitId) -> Option<&UnitPlan> {
        self.units.iter().find(|u| &u.unit == id)
    }

    /// No-load, start-up and block-selection cost.
    pub fn commitment_cost(&self, case: &Case) -> f64 {
        case.heat_units()
            .iter()
            .zip(&self.units)
            .map(|(u, p)| unit_commitment_cost(u.uc(), p, case.settings.block_selection_cost))
            .sum()
    }

    /// Commitment cost incurred in period `t`; sums to
    /// [`commitment_cost`](Self::commitment_cost) over the horizon.
    pub fn period_commitment_cost(&self, case: &Case, t: usize) -> f64 {
        let block_cost = case.settings.block_selection_cost;
        case.heat_units()
            .iter()
            .zip(&self.units)
            .map(|(u, p)| {
                let uc = u.uc();
                let mut c = block_cost * p.blocks[t] as f64;
                if p.on[t] {
                    c += uc.no_load_cost;
                }
                if p.startups(uc.initial_on)[t] {
                    c += uc.startup_cost;
                }
                c
            })
            .sum()
    }

    /// Invariant breaches, empty for a usable plan.
    pub fn violations(&self, case: &Case) -> Vec<String> {
        let units = case.heat_units();
        let mut out = Vec::new();
        if units.len() != self.units.len() {
            out.push(format!(
                "plan covers {} units, case has {}",
                self.units.len(),
                units.len()
            ));
            return out;
        }
        for (u, p) in units.iter().zip(&self.units) {
            out.extend(unit_violations(*u, p, case.horizon.len));
        }
        if self.pipe_delays.iter().any(|&d| d != 0) {
            out.push("pipe delays must be zero".into());
        }
        out
    }
}

pub(crate) fn unit_commitment_cost(uc: &UcParams, p: &UnitPlan, block_cost: f64) -> f64 {
    let on = p.on.iter().filter(|&&u| u).count() as f64;
    let starts = p.startups(uc.initial_on).iter().filter(|&&s| s).count() as f64;
    let blocks: usize = p.blocks.iter().sum();
    uc.no_load_cost * on + uc.startup_cost * starts + block_cost * blocks as f64
}

/// Whether the on/off sequence honours minimum up and down times, assuming
/// the initial state has been held long enough.
pub(crate) fn respects_min_times(uc: &UcParams, on: &[bool]) -> bool {
    let n = on.len();
    let mut prev = uc.initial_on;
    for t in 0..n {
        if on[t] && !prev {
            let end = (t + uc.min_up.max(1)).min(n);
            if !on[t..end].iter().all(|&u| u) {
                return false;
            }
        }
        if !on[t] && prev {
            let end = (t + uc.min_down.max(1)).min(n);
            if on[t..end].iter().any(|&u| u) {
                return false;
            }
        }
        prev = on[t];
    }
    true
}

fn unit_violations(u: HeatUnit<'_>, p: &UnitPlan, n: usize) -> Vec<String> {
    let mut out = Vec::new();
    if &p.unit != u.id() {
        out.push(format!(
            "plan unit `{}` where `{}` expected",
            p.unit,
            u.id()
        ));
        return out;
    }
    if p.on.len() != n || p.blocks.len() != n {
        out.push(format!(
            "unit `{}`: plan length differs from horizon",
            p.unit
        ));
        return out;
    }
    let nb = u.block_shares().len();
    for t in 0..n {
        let ok = if p.on[t] {
            (1..=nb).contains(&p.blocks[t])
        } else {
            p.blocks[t] == 0
        };
        if !ok {
            out.push(format!(
                "unit `{}` period {t}: {} blocks selected while {}",
                p.unit,
                p.blocks[t],
                if p.on[t] { "on" } else { "off" }
            ));
        }
    }
    if !respects_min_times(u.uc(), &p.on) {
        out.push(format!("unit `{}`: minimum up/down time violated", p.unit));
    }
    out
}

/// Every feasible schedule of one unit: on/off sequences honouring minimum
/// times, times every block count per committed period.
pub(crate) fn unit_schedules(u: HeatUnit<'_>, n: usize) -> Vec<UnitPlan> {
    let nb = u.block_shares().len();
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << n) {
        let on: Vec<bool> = (0..n).map(|t| (mask >> t) & 1 == 1).collect();
        if !respects_min_times(u.uc(), &on) {
            continue;
        }
        let mut blocks: Vec<usize> = on.iter().map(|&o| usize::from(o)).collect();
        loop {
            out.push(UnitPlan {
                unit: u.id().clone(),
                on: on.clone(),
                blocks: blocks.clone(),
            });
            // odometer over committed periods
            let mut t = 0;
            loop {
                if t == n {
                    break;
                }
                if on[t] && blocks[t] < nb {
                    blocks[t] += 1;
                    break;
                }
                if on[t] {
                    blocks[t] = 1;
                }
                t += 1;
            }
            if t == n {
                break;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::HeatOnlyUnit;

    fn unit(min_up: usize, min_down: usize, initial_on: bool, blocks: usize) -> HeatOnlyUnit {
        HeatOnlyUnit {
            id: "HO".into(),
            node_heat: "h".into(),
            q_max: 10.0,
            marginal_cost: 1.0,
            uc: UcParams {
                no_load_cost: 2.0,
                startup_cost: 5.0,
                min_up,
                min_down,
                initial_on,
            },
            block_shares: vec![1.0 / blocks as f64; blocks],
        }
    }

    #[test]
    fn one_unit_two_periods_four_plans() {
        let u = unit(0, 0, false, 1);
        assert_eq!(unit_schedules(HeatUnit::HeatOnly(&u), 2).len(), 4);
    }

    #[test]
    fn block_choices_multiply() {
        // on/off^2 with 2 block counts when on: 1 + 2 + 2 + 4
        let u = unit(0, 0, false, 2);
        assert_eq!(unit_schedules(HeatUnit::HeatOnly(&u), 2).len(), 9);
    }

    #[test]
    fn min_up_prunes() {
        let u = unit(2, 0, false, 1);
        let plans = unit_schedules(HeatUnit::HeatOnly(&u), 3);
        // 010 is out; 001 survives because the horizon ends
        assert!(plans.iter().all(|p| p.on != vec![false, true, false]));
        assert!(plans.iter().any(|p| p.on == vec![false, false, true]));
        assert_eq!(plans.len(), 5);
    }

    #[test]
    fn min_down_with_initial_on() {
        let uc = unit(0, 2, true, 1).uc;
        assert!(!respects_min_times(&uc, &[false, true, true]));
        assert!(respects_min_times(&uc, &[true, false, false]));
        assert!(respects_min_times(&uc, &[true, true, false]));
    }

    #[test]
    fn cost_counts_starts_and_blocks() {
        let u = unit(0, 0, false, 2);
        let p = UnitPlan {
            unit: "HO".into(),
            on: vec![true, false, true],
            blocks: vec![2, 0, 1],
        };
        // 2 on-hours * 2 + 2 starts * 5 + 3 blocks * 0.5
        assert_eq!(unit_commitment_cost(&u.uc, &p, 0.5), 4.0 + 10.0 + 1.5);
        assert_eq!(p.startups(false), vec![true, false, true]);
        assert_eq!(p.shutdowns(false), vec![false, true, false]);
    }
}
