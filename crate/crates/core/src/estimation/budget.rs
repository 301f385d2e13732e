//! Circuit-execution counts of the three overlap strategies.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// s·L·r: every state measured in r shared bases.
    Randomized,
    /// s·L(L−1)/2: one U†U circuit per pair.
    Inversion,
    /// s·L(L−1)/2: one 2N+1-qubit circuit per pair.
    Swap,
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "randomized" => Ok(Strategy::Randomized),
            "inversion" => Ok(Strategy::Inversion),
            "swap" => Ok(Strategy::Swap),
            other => Err(format!("unknown strategy {other:?} (randomized, inversion, swap)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub strategy: Strategy,
    pub l: u64,
    pub s: u64,
    pub r: u64,
    pub n_circuit_executions: u128,
}

impl BudgetReport {
    /// Seconds of device time at `rate` executions per second.
    pub fn seconds_at(&self, rate: f64) -> f64 {
        self.n_circuit_executions as f64 / rate
    }

    pub fn hours_at(&self, rate: f64) -> f64 {
        self.seconds_at(rate) / 3600.0
    }
}

/// Closed-form execution counts; `r` is ignored by the pairwise strategies.
pub fn budget(strategy: Strategy, l: u64, s: u64, r: u64) -> BudgetReport {
    let (l2, s2, r2) = (l as u128, s as u128, r as u128);
    let n = match strategy {
        Strategy::Randomized => s2 * l2 * r2,
        Strategy::Inversion | Strategy::Swap => s2 * (l2 * l2.saturating_sub(1) / 2),
    };
    BudgetReport {
        strategy,
        l,
        s,
        r,
        n_circuit_executions: n,
    }
}
