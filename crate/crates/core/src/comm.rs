//! Communication modes: the no-communication baseline and full
//! trajectory-statistics averaging.
//!
//! With full communication every agent receives the team-average
//! statistics record. The average is time-weighted, so it equals the
//! statistics a single observer would have accumulated over the union of
//! all agents' trajectories; with equal elapsed times it reduces to the
//! plain mean of the per-agent coefficient vectors.

use crate::spectral::TrajectoryStats;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommMode {
    /// No information is shared; each agent plans on its own statistics.
    None,
    /// Agents average their trajectory statistics every exchange step.
    Full,
}

impl std::fmt::Display for CommMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CommMode::None => "none",
            CommMode::Full => "full",
        })
    }
}

impl std::str::FromStr for CommMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(CommMode::None),
            "full" => Ok(CommMode::Full),
            other => Err(Error::Config(format!(
                "unknown comm mode '{other}' (expected none | full)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CommConfig {
    pub mode: CommMode,
    /// Steps between exchanges; 1 averages every step.
    pub exchange_period_steps: usize,
}

impl Default for CommConfig {
    fn default() -> Self {
        Self {
            mode: CommMode::Full,
            exchange_period_steps: 1,
        }
    }
}

impl CommConfig {
    pub fn validate(&self) -> Result<()> {
        if self.exchange_period_steps < 1 {
            return Err(Error::Config("exchange_period_steps must be >= 1".into()));
        }
        Ok(())
    }
}

/// One synchronization barrier: reads every agent's statistics and returns
/// the collective record each agent plans against until the next exchange.
///
/// Mode `none` hands each agent its own record back. Mode `full` hands
/// every agent the team mean (sums and elapsed time both scaled by `1/N`),
/// whose coefficients are the time-weighted average of the team's.
pub fn exchange(stats: &[&TrajectoryStats], config: &CommConfig) -> Result<Vec<TrajectoryStats>> {
    config.validate()?;
    if stats.is_empty() {
        return Ok(Vec::new());
    }
    let modes = stats[0].num_modes();
    if let Some(bad) = stats.iter().find(|s| s.num_modes() != modes) {
        return Err(Error::DimensionMismatch {
            expected: modes,
            got: bad.num_modes(),
        });
    }
    match config.mode {
        CommMode::None => Ok(stats.iter().map(|s| (*s).clone()).collect()),
        CommMode::Full => {
            let mean = TrajectoryStats::pooled(stats.iter().copied())
                .scaled(1.0 / stats.len() as f64);
            Ok(vec![mean; stats.len()])
        }
    }
}
