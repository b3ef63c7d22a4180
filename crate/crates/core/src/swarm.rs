//! World stepping: agent dynamics, dimple deposition, collision detection,
//! and the post-collision de-correlation protocol.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::comm::{exchange, CommConfig, CommMode};
use crate::controller::{ControlConfig, ErgodicPlanner, SafeRegion, Strategy};
use crate::metrics::{self, METRIC_SAMPLE_EVERY};
use crate::spectral::{CoeffVector, Point, SpectralBasis, TrajectoryStats};
use crate::{Error, Result};

use std::f64::consts::{FRAC_PI_2, PI, TAU};

/// Agent motion model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynamicsModel {
    /// Velocity control: `u = (vx, vy)`.
    SingleIntegrator,
    /// Forward speed and turn rate: `u = (v, omega)`.
    Unicycle,
}

impl DynamicsModel {
    /// One Euler step without boundary handling.
    pub fn propagate(self, position: Point, heading: f64, u: Point, dt: f64) -> (Point, f64) {
        match self {
            DynamicsModel::SingleIntegrator => {
                let p = [position[0] + u[0] * dt, position[1] + u[1] * dt];
                let th = if u[0] != 0.0 || u[1] != 0.0 {
                    u[1].atan2(u[0])
                } else {
                    heading
                };
                (p, th)
            }
            DynamicsModel::Unicycle => {
                // midpoint heading keeps the step second-order on arcs
                let (s, c) = (heading + 0.5 * u[1] * dt).sin_cos();
                let p = [position[0] + u[0] * c * dt, position[1] + u[0] * s * dt];
                (p, heading + u[1] * dt)
            }
        }
    }
}

impl std::str::FromStr for DynamicsModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single_integrator" => Ok(DynamicsModel::SingleIntegrator),
            "unicycle" => Ok(DynamicsModel::Unicycle),
            other => Err(Error::Config(format!(
                "unknown dynamics '{other}' (expected single_integrator | unicycle)"
            ))),
        }
    }
}

/// World parameters for one trial.
#[derive(Debug, Clone)]
pub struct WorldConfig {
    pub dynamics: DynamicsModel,
    /// Collision distance between agent centers.
    pub agent_radius: f64,
    /// Seconds between dimple drops per agent.
    pub dimple_period: f64,
    pub team_size: usize,
    /// Trial duration in seconds.
    pub duration: f64,
    pub extents: [f64; 2],
    /// How long an agent holds its escape heading after a collision.
    pub escape_duration: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            dynamics: DynamicsModel::SingleIntegrator,
            agent_radius: 0.075,
            dimple_period: 0.5,
            team_size: 4,
            duration: 900.0,
            extents: [1.0, 1.0],
            escape_duration: 1.0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.team_size < 1 {
            return Err(Error::Config("team_size must be >= 1".into()));
        }
        if !(self.extents[0] > 0.0 && self.extents[1] > 0.0) {
            return Err(Error::Config("extents must be positive".into()));
        }
        let limit = self.extents[0].min(self.extents[1]) / 10.0;
        if !(self.agent_radius > 0.0 && self.agent_radius < limit) {
            return Err(Error::Config(format!(
                "agent_radius must lie in (0, {limit}) for these extents"
            )));
        }
        if !(self.dimple_period > 0.0) {
            return Err(Error::Config("dimple_period must be positive".into()));
        }
        if self.duration < 0.0 {
            return Err(Error::Config("duration must be nonnegative".into()));
        }
        if self.escape_duration < 0.0 {
            return Err(Error::Config("escape_duration must be nonnegative".into()));
        }
        Ok(())
    }
}

/// One dimple drop.
#[derive(Debug, Clone, PartialEq)]
pub struct DimpleEvent {
    pub position: Point,
    pub time: f64,
    pub agent_id: usize,
}

/// A detected collision between two agents.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionEvent {
    pub time: f64,
    pub agents: (usize, usize),
}

/// Per-agent simulation state.
#[derive(Debug, Clone)]
pub struct AgentState {
    pub id: usize,
    pub position: Point,
    pub heading: f64,
    pub stats: TrajectoryStats,
    /// Time since the last dimple drop.
    pub dimple_phase: f64,
    pub collided: bool,
    /// Remaining forced-heading time after a collision.
    pub escape_remaining: f64,
    rng: ChaCha8Rng,
}

impl AgentState {
    /// Creates an agent with its own disjoint random stream derived from
    /// the trial seed.
    pub fn new(id: usize, position: Point, heading: f64, basis: &SpectralBasis, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(id as u64 + 1);
        Self {
            id,
            position,
            heading,
            stats: TrajectoryStats::new(basis),
            dimple_phase: 0.0,
            collided: false,
            escape_remaining: 0.0,
            rng,
        }
    }

    /// Applies the de-correlation protocol: a fresh heading drawn (from
    /// this agent's stream only) in the half-plane opposing the current
    /// heading, held for `escape_duration`.
    pub fn decorrelate(&mut self, escape_duration: f64) {
        self.heading = sample_escape_heading(self.heading, &mut self.rng);
        self.escape_remaining = escape_duration;
    }
}

/// Uniform draw from the half-plane pointing away from `heading`.
pub fn sample_escape_heading(heading: f64, rng: &mut impl Rng) -> f64 {
    let offset = rng.gen_range(-FRAC_PI_2..FRAC_PI_2);
    normalize_angle(heading + PI + offset)
}

/// Wraps an angle into `[0, 2*pi)`.
pub fn normalize_angle(angle: f64) -> f64 {
    let a = angle % TAU;
    if a < 0.0 {
        a + TAU
    } else {
        a
    }
}

/// Steps an agent's pose, clipping to the domain and reflecting the
/// heading off any wall that was hit.
pub fn step_dynamics(
    model: DynamicsModel,
    state: &mut AgentState,
    u: Point,
    dt: f64,
    extents: [f64; 2],
) {
    let (p, th) = model.propagate(state.position, state.heading, u, dt);
    let (clipped, heading) = clip_reflect(p, th, extents);
    state.position = clipped;
    state.heading = normalize_angle(heading);
}

fn clip_reflect(p: Point, heading: f64, extents: [f64; 2]) -> (Point, f64) {
    // Clip a hair inside the walls: exactly on a wall (and especially in a
    // corner) every basis gradient vanishes and gradient-driven controllers
    // stall there.
    let margin = 1e-6 * extents[0].min(extents[1]);
    let mut out = p;
    let mut th = heading;
    if out[0] < margin || out[0] > extents[0] - margin {
        out[0] = out[0].clamp(margin, extents[0] - margin);
        th = PI - th;
    }
    if out[1] < margin || out[1] > extents[1] - margin {
        out[1] = out[1].clamp(margin, extents[1] - margin);
        th = -th;
    }
    (out, th)
}

/// All unordered agent pairs closer than `radius`.
pub fn detect_collisions(positions: &[Point], radius: f64) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            let dx = positions[i][0] - positions[j][0];
            let dy = positions[i][1] - positions[j][1];
            if (dx * dx + dy * dy).sqrt() < radius {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// Advances the dimple phase and emits one event per period crossing.
/// The phase keeps the remainder, so the long-run rate does not drift;
/// event times are the exact crossings, positions are the agent's
/// end-of-step position.
pub fn deposit_dimples(
    state: &mut AgentState,
    period: f64,
    step_start: f64,
    dt: f64,
) -> Vec<DimpleEvent> {
    state.dimple_phase += dt;
    let mut events = Vec::new();
    let eps = 1e-9 * period;
    while state.dimple_phase + eps >= period {
        state.dimple_phase -= period;
        events.push(DimpleEvent {
            position: state.position,
            time: step_start + dt - state.dimple_phase,
            agent_id: state.id,
        });
    }
    events
}

/// One logged step for one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRow {
    pub time: f64,
    pub agent_id: usize,
    pub position: Point,
    pub heading: f64,
    pub control: Point,
    pub collided: bool,
    /// Dimples dropped by this agent during this step.
    pub dimples: u32,
    /// Team ergodic metric (pooled statistics vs the target).
    pub ergodic_metric: f64,
    /// Team heterogeneity; absent for single-agent trials.
    pub heterogeneity: Option<f64>,
}

/// Periodic per-agent coefficient snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffSnapshot {
    pub time: f64,
    pub per_agent: Vec<CoeffVector>,
}

/// Complete log of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub seed: u64,
    pub dt: f64,
    pub agents: usize,
    pub rows: Vec<StepRow>,
    /// All dimples, ordered by time.
    pub dimples: Vec<DimpleEvent>,
    pub collisions: Vec<CollisionEvent>,
    pub coeff_snapshots: Vec<CoeffSnapshot>,
    pub final_stats: Vec<TrajectoryStats>,
}

impl TrialRecord {
    /// Distinct step times in order.
    pub fn step_times(&self) -> Vec<f64> {
        let mut times = Vec::new();
        for row in &self.rows {
            if times.last() != Some(&row.time) {
                times.push(row.time);
            }
        }
        times
    }

    /// Final logged team ergodic metric.
    pub fn final_ergodic_metric(&self) -> Option<f64> {
        self.rows.last().map(|r| r.ergodic_metric)
    }

    /// Final logged team heterogeneity.
    pub fn final_heterogeneity(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.heterogeneity)
    }
}

/// Everything a trial needs besides its seed.
#[derive(Debug, Clone, Copy)]
pub struct TrialSetup<'a> {
    pub world: &'a WorldConfig,
    pub control: &'a ControlConfig,
    pub comm: &'a CommConfig,
    pub basis: &'a SpectralBasis,
    pub target: &'a CoeffVector,
    pub region: Option<&'a SafeRegion>,
}

/// Runs one trial: plan, step, deposit, collide, de-correlate, accumulate,
/// exchange, log. Deterministic given the setup and seed.
pub fn run_trial(setup: &TrialSetup, seed: u64) -> Result<TrialRecord> {
    setup.world.validate()?;
    setup.control.validate()?;
    setup.comm.validate()?;
    if setup.target.len() != setup.basis.len() {
        return Err(Error::DimensionMismatch {
            expected: setup.basis.len(),
            got: setup.target.len(),
        });
    }

    let world = setup.world;
    let dt = setup.control.dt;
    let n = world.team_size;
    let n_eff = match setup.comm.mode {
        CommMode::Full => n as f64,
        CommMode::None => 1.0,
    };
    let planner = ErgodicPlanner {
        basis: setup.basis,
        target: setup.target,
        config: setup.control,
        dynamics: world.dynamics,
        region: setup.region,
        team_share: n_eff,
    };

    let mut agents = place_agents(setup, seed);
    let mut collectives: Vec<TrajectoryStats> =
        agents.iter().map(|a| a.stats.clone()).collect();
    let mut warm: Vec<Option<Vec<Point>>> = vec![None; n];

    let steps = (world.duration / dt).round() as usize;
    let mut record = TrialRecord {
        seed,
        dt,
        agents: n,
        rows: Vec::with_capacity(steps * n),
        dimples: Vec::new(),
        collisions: Vec::new(),
        coeff_snapshots: Vec::new(),
        final_stats: Vec::new(),
    };

    for step in 0..steps {
        let t0 = step as f64 * dt;
        let t1 = (step + 1) as f64 * dt;

        if step % setup.comm.exchange_period_steps == 0 {
            let own: Vec<&TrajectoryStats> = agents.iter().map(|a| &a.stats).collect();
            collectives = exchange(&own, setup.comm)?;
        }

        // Plan and move.
        let mut controls = vec![[0.0, 0.0]; n];
        let mut bypassed_planner = vec![false; n];
        for (i, agent) in agents.iter_mut().enumerate() {
            let u = if agent.escape_remaining > 0.0 {
                agent.escape_remaining -= dt;
                bypassed_planner[i] = true;
                let (s, c) = agent.heading.sin_cos();
                [setup.control.u_max * c, setup.control.u_max * s]
            } else {
                match setup.control.strategy {
                    Strategy::Mpc => {
                        let plan = planner
                            .plan_mpc(
                                agent.position,
                                agent.heading,
                                &collectives[i],
                                warm[i].as_deref(),
                            )
                            .map_err(|e| Error::Trial {
                                time: t0,
                                source: Box::new(e),
                            })?;
                        let first = plan.controls[0];
                        let mut shifted = plan.controls;
                        shifted.rotate_left(1);
                        let last = shifted.len() - 1;
                        shifted[last] = [0.0, 0.0];
                        warm[i] = Some(shifted);
                        first
                    }
                    Strategy::SpectralFeedback => planner
                        .spectral_feedback(agent.position, &collectives[i])
                        .map_err(|e| Error::Trial {
                            time: t0,
                            source: Box::new(e),
                        })?,
                }
            };
            let u = [
                u[0].clamp(-setup.control.u_max, setup.control.u_max),
                u[1].clamp(-setup.control.u_max, setup.control.u_max),
            ];
            controls[i] = u;
            step_dynamics(world.dynamics, agent, u, dt, world.extents);
        }

        // Collisions and de-correlation, so the settled positions feed the
        // statistics and logs below.
        for agent in agents.iter_mut() {
            agent.collided = false;
        }
        let positions: Vec<Point> = agents.iter().map(|a| a.position).collect();
        let pairs = detect_collisions(&positions, world.agent_radius);
        for (i, j) in &pairs {
            record.collisions.push(CollisionEvent {
                time: t1,
                agents: (*i, *j),
            });
            separate_pair(&mut agents, *i, *j, world.agent_radius, world.extents);
            agents[*i].collided = true;
            agents[*j].collided = true;
        }
        for (i, agent) in agents.iter_mut().enumerate() {
            if agent.collided {
                agent.decorrelate(world.escape_duration);
            }
            // Motion that bypassed the planner is not shaped by the barrier
            // penalty; keep it inside the safe set by projection. Planned
            // motion is left to the penalty.
            if agent.collided || bypassed_planner[i] {
                if let Some(region) = setup.region {
                    enforce_region(region, agent, world.extents);
                }
            }
        }

        // Accumulate statistics at the settled positions.
        let fold_into_collective = (step + 1) % setup.comm.exchange_period_steps != 0;
        for (i, agent) in agents.iter_mut().enumerate() {
            agent
                .stats
                .accumulate(setup.basis, agent.position, dt)
                .map_err(|e| Error::Trial {
                    time: t1,
                    source: Box::new(e),
                })?;
            if fold_into_collective {
                collectives[i]
                    .accumulate_weighted(setup.basis, agent.position, dt, 1.0 / n_eff)
                    .map_err(|e| Error::Trial {
                        time: t1,
                        source: Box::new(e),
                    })?;
            }
        }

        // Dimples.
        let mut step_dimples = vec![0u32; n];
        for (i, agent) in agents.iter_mut().enumerate() {
            let events = deposit_dimples(agent, world.dimple_period, t0, dt);
            step_dimples[i] = events.len() as u32;
            record.dimples.extend(events);
        }

        // Metrics and log rows.
        let own_coeffs: Vec<CoeffVector> = agents.iter().map(|a| a.stats.coeffs()).collect();
        let pooled = TrajectoryStats::pooled(agents.iter().map(|a| &a.stats));
        let team_metric = metrics::ergodic_metric(&pooled.coeffs(), setup.target, setup.basis)?;
        let team_het = if n >= 2 {
            Some(metrics::team_heterogeneity(&own_coeffs, setup.basis)?)
        } else {
            None
        };
        for (i, agent) in agents.iter().enumerate() {
            record.rows.push(StepRow {
                time: t1,
                agent_id: agent.id,
                position: agent.position,
                heading: agent.heading,
                control: controls[i],
                collided: agent.collided,
                dimples: step_dimples[i],
                ergodic_metric: team_metric,
                heterogeneity: team_het,
            });
        }
        if step % METRIC_SAMPLE_EVERY == 0 {
            record.coeff_snapshots.push(CoeffSnapshot {
                time: t1,
                per_agent: own_coeffs,
            });
        }
    }

    record
        .dimples
        .sort_by(|a, b| a.time.total_cmp(&b.time).then(a.agent_id.cmp(&b.agent_id)));
    record.final_stats = agents.into_iter().map(|a| a.stats).collect();
    Ok(record)
}

/// Seeded initial placement: uniform positions at least one diameter
/// apart, uniform headings. Uses the trial-level stream (stream 0).
fn place_agents(setup: &TrialSetup, seed: u64) -> Vec<AgentState> {
    let world = setup.world;
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    master.set_stream(0);
    let margin = world.agent_radius;
    let mut positions: Vec<Point> = Vec::with_capacity(world.team_size);
    while positions.len() < world.team_size {
        let candidate = [
            master.gen_range(margin..world.extents[0] - margin),
            master.gen_range(margin..world.extents[1] - margin),
        ];
        let clear = positions.iter().all(|p| {
            let dx = p[0] - candidate[0];
            let dy = p[1] - candidate[1];
            (dx * dx + dy * dy).sqrt() >= 2.0 * world.agent_radius
        });
        if clear || positions.len() * 100 > world.team_size * 10_000 {
            positions.push(candidate);
        }
    }
    positions
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let heading = master.gen_range(0.0..TAU);
            AgentState::new(i, p, heading, setup.basis, seed)
        })
        .collect()
}

/// Pushes an overlapping pair apart along their center line to exactly
/// the collision distance.
fn separate_pair(agents: &mut [AgentState], i: usize, j: usize, radius: f64, extents: [f64; 2]) {
    let (pi, pj) = (agents[i].position, agents[j].position);
    let d = [pj[0] - pi[0], pj[1] - pi[1]];
    let dist = (d[0] * d[0] + d[1] * d[1]).sqrt();
    let dir = if dist > 1e-12 {
        [d[0] / dist, d[1] / dist]
    } else {
        [1.0, 0.0]
    };
    let mid = [(pi[0] + pj[0]) / 2.0, (pi[1] + pj[1]) / 2.0];
    let half = radius / 2.0;
    agents[i].position = [
        (mid[0] - dir[0] * half).clamp(0.0, extents[0]),
        (mid[1] - dir[1] * half).clamp(0.0, extents[1]),
    ];
    agents[j].position = [
        (mid[0] + dir[0] * half).clamp(0.0, extents[0]),
        (mid[1] + dir[1] * half).clamp(0.0, extents[1]),
    ];
}

/// Keeps motion that bypassed the planner (escape runs, collision
/// separation) inside the safe set: projects the position back along the
/// barrier gradient and reflects the heading off the barrier surface.
fn enforce_region(region: &SafeRegion, agent: &mut AgentState, extents: [f64; 2]) {
    for _ in 0..4 {
        let h = region.barrier_value(agent.position);
        if h >= 0.0 {
            return;
        }
        let g = region.barrier_gradient(agent.position);
        let norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
        if norm < 1e-9 {
            return;
        }
        let push = -h / norm;
        agent.position = [
            (agent.position[0] + g[0] / norm * push).clamp(0.0, extents[0]),
            (agent.position[1] + g[1] / norm * push).clamp(0.0, extents[1]),
        ];
        // reflect the heading about the barrier normal
        let (s, c) = agent.heading.sin_cos();
        let vn = (c * g[0] + s * g[1]) / norm;
        if vn < 0.0 {
            let rx = c - 2.0 * vn * g[0] / norm;
            let ry = s - 2.0 * vn * g[1] / norm;
            agent.heading = normalize_angle(ry.atan2(rx));
        }
    }
}
