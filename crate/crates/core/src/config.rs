//! Experiment configuration: defaults, validation, and a flat
//! `key = value` config-file format with CLI overrides layered on top.

use crate::comm::{CommConfig, CommMode};
use crate::controller::{ControlConfig, SafeRegion, Strategy};
use crate::swarm::{DynamicsModel, WorldConfig};
use crate::{Error, Result};
use std::path::PathBuf;

/// Full description of an experiment (one trial or a batch).
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Target names or graymap paths; batches run every target.
    pub targets: Vec<String>,
    pub invert_target: bool,
    /// Grid resolution for built-in targets.
    pub target_resolution: usize,
    pub extents: [f64; 2],
    pub modes_per_axis: usize,
    pub agents: usize,
    pub duration: f64,
    pub dt: f64,
    pub dynamics: DynamicsModel,
    pub agent_radius: f64,
    pub dimple_period: f64,
    pub escape_duration: f64,
    pub strategy: Strategy,
    pub horizon_steps: usize,
    pub descent_iters: usize,
    pub step_size: f64,
    pub u_max: f64,
    pub control_weight: f64,
    pub barrier_weight: f64,
    /// Safe-rectangle inset as a fraction of the smaller extent;
    /// 0 disables the safe region.
    pub safe_margin: f64,
    pub comm: CommMode,
    pub exchange_period_steps: usize,
    pub trials: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub render_size: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let world = WorldConfig::default();
        let control = ControlConfig::default();
        Self {
            targets: vec!["gradient".into(), "two_lobe".into()],
            invert_target: false,
            target_resolution: 128,
            extents: world.extents,
            modes_per_axis: 10,
            agents: world.team_size,
            duration: world.duration,
            dt: control.dt,
            dynamics: world.dynamics,
            agent_radius: world.agent_radius,
            dimple_period: world.dimple_period,
            escape_duration: world.escape_duration,
            strategy: control.strategy,
            horizon_steps: control.horizon_steps,
            descent_iters: control.descent_iters,
            step_size: control.step_size,
            u_max: control.u_max,
            control_weight: control.control_weight,
            barrier_weight: control.barrier_weight,
            safe_margin: 0.05,
            comm: CommMode::Full,
            exchange_period_steps: 1,
            trials: 25,
            seed: 0,
            out_dir: PathBuf::from("out"),
            render_size: 256,
        }
    }
}

fn field_err(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {msg}"))
}

impl ExperimentConfig {
    /// Loads a config file: one `key = value` per line, `#` comments.
    pub fn from_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let mut config = Self::default();
        config.merge_file(path)?;
        Ok(config)
    }

    pub fn merge_file(&mut self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: idx + 1,
                    msg: format!("expected key = value, got '{line}'"),
                });
            };
            self.set(key.trim(), value.trim()).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: idx + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    /// Sets one field from its textual form; rejects unknown keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| field_err(key, format!("invalid value '{value}'")))
        }
        match key {
            "targets" | "target" => {
                self.targets = value
                    .split(',')
                    .map(|t| t.trim().to_string())
                    .filter(|t| !t.is_empty())
                    .collect();
            }
            "invert_target" => self.invert_target = num(key, value)?,
            "target_resolution" => self.target_resolution = num(key, value)?,
            "extent_x" => self.extents[0] = num(key, value)?,
            "extent_y" => self.extents[1] = num(key, value)?,
            "modes_per_axis" | "modes" => self.modes_per_axis = num(key, value)?,
            "agents" => self.agents = num(key, value)?,
            "duration" => self.duration = num(key, value)?,
            "dt" => self.dt = num(key, value)?,
            "dynamics" => self.dynamics = value.parse()?,
            "agent_radius" => self.agent_radius = num(key, value)?,
            "dimple_period" => self.dimple_period = num(key, value)?,
            "escape_duration" => self.escape_duration = num(key, value)?,
            "strategy" => self.strategy = value.parse()?,
            "horizon_steps" => self.horizon_steps = num(key, value)?,
            "descent_iters" => self.descent_iters = num(key, value)?,
            "step_size" => self.step_size = num(key, value)?,
            "u_max" => self.u_max = num(key, value)?,
            "control_weight" => self.control_weight = num(key, value)?,
            "barrier_weight" => self.barrier_weight = num(key, value)?,
            "safe_margin" => self.safe_margin = num(key, value)?,
            "comm" => self.comm = value.parse()?,
            "exchange_period_steps" => self.exchange_period_steps = num(key, value)?,
            "trials" => self.trials = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "out_dir" | "out" => self.out_dir = PathBuf::from(value),
            "render_size" => self.render_size = num(key, value)?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Validates every field, naming the offending one.
    pub fn validate(&self) -> Result<()> {
        if self.targets.is_empty() {
            return Err(field_err("targets", "at least one target required"));
        }
        for t in &self.targets {
            if !crate::targets::BUILTIN_NAMES.contains(&t.as_str())
                && !std::path::Path::new(t).exists()
            {
                return Err(field_err(
                    "targets",
                    format!("'{t}' is neither a built-in nor an existing file"),
                ));
            }
        }
        if !(2..=1024).contains(&self.target_resolution) {
            return Err(field_err("target_resolution", "must be in 2..=1024"));
        }
        if !(self.extents[0] > 0.0 && self.extents[1] > 0.0) {
            return Err(field_err("extent_x/extent_y", "must be positive"));
        }
        if !(1..=32).contains(&self.modes_per_axis) {
            return Err(field_err("modes_per_axis", "must be in 1..=32"));
        }
        if self.agents < 1 {
            return Err(field_err("agents", "must be >= 1"));
        }
        if self.duration < 0.0 {
            return Err(field_err("duration", "must be nonnegative"));
        }
        if !(self.dt > 0.0) {
            return Err(field_err("dt", "must be positive"));
        }
        let radius_limit = self.extents[0].min(self.extents[1]) / 10.0;
        if !(self.agent_radius > 0.0 && self.agent_radius < radius_limit) {
            return Err(field_err(
                "agent_radius",
                format!("must be in (0, {radius_limit})"),
            ));
        }
        if !(self.dimple_period > 0.0) {
            return Err(field_err("dimple_period", "must be positive"));
        }
        if self.escape_duration < 0.0 {
            return Err(field_err("escape_duration", "must be nonnegative"));
        }
        if self.horizon_steps < 1 {
            return Err(field_err("horizon_steps", "must be >= 1"));
        }
        if self.descent_iters < 1 {
            return Err(field_err("descent_iters", "must be >= 1"));
        }
        if !(self.step_size > 0.0) {
            return Err(field_err("step_size", "must be positive"));
        }
        if !(self.u_max > 0.0) {
            return Err(field_err("u_max", "must be positive"));
        }
        if self.control_weight < 0.0 {
            return Err(field_err("control_weight", "must be nonnegative"));
        }
        if self.barrier_weight < 0.0 {
            return Err(field_err("barrier_weight", "must be nonnegative"));
        }
        if !(0.0..0.45).contains(&self.safe_margin) {
            return Err(field_err("safe_margin", "must be in [0, 0.45)"));
        }
        if self.exchange_period_steps < 1 {
            return Err(field_err("exchange_period_steps", "must be >= 1"));
        }
        if self.trials < 1 {
            return Err(field_err("trials", "must be >= 1"));
        }
        if !(1..=4096).contains(&self.render_size) {
            return Err(field_err("render_size", "must be in 1..=4096"));
        }
        Ok(())
    }

    pub fn world_config(&self) -> WorldConfig {
        WorldConfig {
            dynamics: self.dynamics,
            agent_radius: self.agent_radius,
            dimple_period: self.dimple_period,
            team_size: self.agents,
            duration: self.duration,
            extents: self.extents,
            escape_duration: self.escape_duration,
        }
    }

    pub fn control_config(&self) -> ControlConfig {
        ControlConfig {
            horizon_steps: self.horizon_steps,
            dt: self.dt,
            u_max: self.u_max,
            descent_iters: self.descent_iters,
            step_size: self.step_size,
            barrier_weight: self.barrier_weight,
            control_weight: self.control_weight,
            strategy: self.strategy,
        }
    }

    pub fn comm_config(&self) -> CommConfig {
        CommConfig {
            mode: self.comm,
            exchange_period_steps: self.exchange_period_steps,
        }
    }

    /// The inset safe rectangle, or `None` when disabled.
    pub fn safe_region(&self) -> Result<Option<SafeRegion>> {
        if self.safe_margin == 0.0 || self.barrier_weight == 0.0 {
            return Ok(None);
        }
        let margin = self.safe_margin * self.extents[0].min(self.extents[1]);
        Ok(Some(SafeRegion::inset(self.extents, margin)?))
    }
}
