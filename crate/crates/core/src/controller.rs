//! Per-agent receding-horizon ergodic controller with a barrier penalty,
//! plus a closed-form spectral feedback fallback.
//!
//! The planner minimizes a weighted coefficient distance between the
//! target and the statistics the team would have after executing the
//! candidate horizon, together with quadratic control effort and a
//! penalty on leaving the safe region. Optimization is projected gradient
//! descent with a backtracking line search; the descent direction comes
//! from an exact adjoint pass through the rollout dynamics.

use crate::spectral::{CoeffVector, Point, SpectralBasis, TrajectoryStats};
use crate::swarm::DynamicsModel;
use crate::{Error, Result};

/// Which control law an agent runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Mpc,
    SpectralFeedback,
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mpc" => Ok(Strategy::Mpc),
            "spectral_feedback" => Ok(Strategy::SpectralFeedback),
            other => Err(Error::Config(format!(
                "unknown strategy '{other}' (expected mpc | spectral_feedback)"
            ))),
        }
    }
}

/// Planner parameters.
#[derive(Debug, Clone)]
pub struct ControlConfig {
    /// Horizon length in steps; the horizon duration is `horizon_steps * dt`.
    pub horizon_steps: usize,
    pub dt: f64,
    /// Per-axis control bound.
    pub u_max: f64,
    /// Gradient iterations per replan.
    pub descent_iters: usize,
    /// Initial line-search step; halved until the cost decreases.
    pub step_size: f64,
    pub barrier_weight: f64,
    pub control_weight: f64,
    pub strategy: Strategy,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            horizon_steps: 20,
            dt: 0.1,
            u_max: 0.08,
            descent_iters: 30,
            step_size: 1.0,
            barrier_weight: 1e3,
            control_weight: 0.05,
            strategy: Strategy::Mpc,
        }
    }
}

impl ControlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon_steps < 1 {
            return Err(Error::Config("horizon_steps must be >= 1".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config("dt must be positive".into()));
        }
        if !(self.u_max > 0.0) {
            return Err(Error::Config("u_max must be positive".into()));
        }
        if self.descent_iters < 1 {
            return Err(Error::Config("descent_iters must be >= 1".into()));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::Config("step_size must be positive".into()));
        }
        if self.barrier_weight < 0.0 || self.control_weight < 0.0 {
            return Err(Error::Config("cost weights must be nonnegative".into()));
        }
        Ok(())
    }
}

const MAX_HALVINGS: usize = 20;
const GRAD_EPS: f64 = 1e-14;

/// Safe subset of the coverage domain. The barrier value is positive
/// strictly inside, zero on the boundary, and negative outside.
#[derive(Debug, Clone)]
pub enum SafeRegion {
    /// Rectangle inset from the domain edges by per-side margins
    /// (left, right, bottom, top).
    InsetRect {
        extents: [f64; 2],
        margins: [f64; 4],
    },
    /// Signed distance sampled on a grid (from a binary mask) and
    /// bilinearly interpolated. `smoothing` is the finite-difference
    /// length used for barrier gradients.
    Mask {
        rows: usize,
        cols: usize,
        extents: [f64; 2],
        sdf: Vec<f64>,
        smoothing: f64,
    },
}

impl SafeRegion {
    /// Rectangle inset by the same margin on every side.
    pub fn inset(extents: [f64; 2], margin: f64) -> Result<Self> {
        Self::inset_rect(extents, [margin; 4])
    }

    pub fn inset_rect(extents: [f64; 2], margins: [f64; 4]) -> Result<Self> {
        if margins.iter().any(|m| *m < 0.0) {
            return Err(Error::Config("margins must be nonnegative".into()));
        }
        if margins[0] + margins[1] >= extents[0] || margins[2] + margins[3] >= extents[1] {
            return Err(Error::Config("margins leave an empty safe set".into()));
        }
        Ok(SafeRegion::InsetRect { extents, margins })
    }

    /// Builds a mask region from a row-major boolean grid (`true` = safe,
    /// row 0 at the top of the domain). The signed distance transform is
    /// computed once; queries interpolate it.
    pub fn from_mask(
        mask: &[bool],
        rows: usize,
        cols: usize,
        extents: [f64; 2],
        smoothing: f64,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 || mask.len() != rows * cols {
            return Err(Error::Config("mask shape mismatch".into()));
        }
        if !mask.iter().any(|m| *m) {
            return Err(Error::Config("mask has an empty safe set".into()));
        }
        if !(smoothing > 0.0) {
            return Err(Error::Config("smoothing length must be positive".into()));
        }
        let sx = extents[0] / cols as f64;
        let sy = extents[1] / rows as f64;
        let inset = 0.5 * sx.min(sy);
        let dist_to_unsafe = euclidean_distance_field(mask, rows, cols, sx, sy, false);
        let dist_to_safe = euclidean_distance_field(mask, rows, cols, sx, sy, true);
        let cap = (extents[0].powi(2) + extents[1].powi(2)).sqrt();
        let sdf = (0..rows * cols)
            .map(|i| {
                if mask[i] {
                    (dist_to_unsafe[i] - inset).min(cap)
                } else {
                    -(dist_to_safe[i] - inset).max(-cap)
                }
            })
            .collect();
        Ok(SafeRegion::Mask {
            rows,
            cols,
            extents,
            sdf,
            smoothing,
        })
    }

    /// Signed distance-like barrier value at `x`.
    pub fn barrier_value(&self, x: Point) -> f64 {
        match self {
            SafeRegion::InsetRect { extents, margins } => {
                side_distances(x, *extents, *margins)
                    .into_iter()
                    .fold(f64::INFINITY, f64::min)
            }
            SafeRegion::Mask {
                rows,
                cols,
                extents,
                sdf,
                ..
            } => bilinear(sdf, *rows, *cols, *extents, x),
        }
    }

    /// Spatial gradient of the barrier value. For the rectangle this is
    /// the unit normal of the nearest (most violated) margin; for masks it
    /// is a central difference at the configured smoothing length.
    pub fn barrier_gradient(&self, x: Point) -> Point {
        match self {
            SafeRegion::InsetRect { extents, margins } => {
                let d = side_distances(x, *extents, *margins);
                let mut best = 0;
                for i in 1..4 {
                    if d[i] < d[best] {
                        best = i;
                    }
                }
                [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]][best]
            }
            SafeRegion::Mask { smoothing, .. } => {
                let e = *smoothing;
                let dx = self.barrier_value([x[0] + e, x[1]])
                    - self.barrier_value([x[0] - e, x[1]]);
                let dy = self.barrier_value([x[0], x[1] + e])
                    - self.barrier_value([x[0], x[1] - e]);
                [dx / (2.0 * e), dy / (2.0 * e)]
            }
        }
    }
}

fn side_distances(x: Point, extents: [f64; 2], margins: [f64; 4]) -> [f64; 4] {
    [
        x[0] - margins[0],
        (extents[0] - margins[1]) - x[0],
        x[1] - margins[2],
        (extents[1] - margins[3]) - x[1],
    ]
}

/// Exact Euclidean distance (in domain units) from every cell center to
/// the nearest cell matching `target_state`, by the two-pass separable
/// parabola method on squared distances.
fn euclidean_distance_field(
    mask: &[bool],
    rows: usize,
    cols: usize,
    sx: f64,
    sy: f64,
    target_state: bool,
) -> Vec<f64> {
    const INF: f64 = 1e30;
    let mut field = vec![INF; rows * cols];
    for (f, m) in field.iter_mut().zip(mask) {
        if *m != target_state {
            // keep INF
        } else {
            *f = 0.0;
        }
    }
    let mut row_buf = vec![0.0; cols.max(rows)];
    for r in 0..rows {
        let row = &mut field[r * cols..(r + 1) * cols];
        row_buf[..cols].copy_from_slice(row);
        dt_1d(&row_buf[..cols], row, sx);
    }
    let mut col_in = vec![0.0; rows];
    let mut col_out = vec![0.0; rows];
    for c in 0..cols {
        for r in 0..rows {
            col_in[r] = field[r * cols + c];
        }
        dt_1d(&col_in, &mut col_out, sy);
        for r in 0..rows {
            field[r * cols + c] = col_out[r];
        }
    }
    field.iter().map(|d| d.sqrt()).collect()
}

/// 1D squared-distance transform of a sampled function with grid spacing
/// `s` (lower envelope of parabolas).
fn dt_1d(f: &[f64], out: &mut [f64], s: f64) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let sq = |q: usize| (q as f64) * s;
    for q in 1..n {
        loop {
            let p = v[k];
            let sep = (f[q] + sq(q).powi(2) - f[p] - sq(p).powi(2)) / (2.0 * sq(q) - 2.0 * sq(p));
            if sep <= z[k] {
                if k == 0 {
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = sep;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for q in 0..n {
        while z[k + 1] < sq(q) {
            k += 1;
        }
        out[q] = (sq(q) - sq(v[k])).powi(2) + f[v[k]];
    }
}

fn bilinear(grid: &[f64], rows: usize, cols: usize, extents: [f64; 2], x: Point) -> f64 {
    let sx = extents[0] / cols as f64;
    let sy = extents[1] / rows as f64;
    let gx = (x[0] / sx - 0.5).clamp(0.0, (cols - 1) as f64);
    let gy = ((extents[1] - x[1]) / sy - 0.5).clamp(0.0, (rows - 1) as f64);
    let c0 = gx.floor() as usize;
    let r0 = gy.floor() as usize;
    let c1 = (c0 + 1).min(cols - 1);
    let r1 = (r0 + 1).min(rows - 1);
    let fx = gx - c0 as f64;
    let fy = gy - r0 as f64;
    let v00 = grid[r0 * cols + c0];
    let v01 = grid[r0 * cols + c1];
    let v10 = grid[r1 * cols + c0];
    let v11 = grid[r1 * cols + c1];
    v00 * (1.0 - fx) * (1.0 - fy) + v01 * fx * (1.0 - fy) + v10 * (1.0 - fx) * fy + v11 * fx * fy
}

/// One planning problem: the target, basis, weights, dynamics, and safe
/// region an agent plans against. Cheap to construct per step.
#[derive(Debug, Clone, Copy)]
pub struct ErgodicPlanner<'a> {
    pub basis: &'a SpectralBasis,
    pub target: &'a CoeffVector,
    pub config: &'a ControlConfig,
    pub dynamics: DynamicsModel,
    pub region: Option<&'a SafeRegion>,
    /// Effective team size: horizon samples carry weight `1 / team_share`
    /// in the blended statistics (team size when communicating, else 1).
    pub team_share: f64,
}

/// Result of one replan.
#[derive(Debug, Clone)]
pub struct MpcPlan {
    pub controls: Vec<Point>,
    /// Cost after each accepted descent iteration, starting with the
    /// warm-start cost. Non-increasing.
    pub cost_history: Vec<f64>,
}

impl<'a> ErgodicPlanner<'a> {
    fn check(&self, past: &TrajectoryStats) -> Result<()> {
        if self.target.len() != self.basis.len() {
            return Err(Error::DimensionMismatch {
                expected: self.basis.len(),
                got: self.target.len(),
            });
        }
        if past.num_modes() != self.basis.len() {
            return Err(Error::DimensionMismatch {
                expected: self.basis.len(),
                got: past.num_modes(),
            });
        }
        Ok(())
    }

    /// Plans a control sequence over the horizon by projected gradient
    /// descent, warm-started from `warm_start` when given (else zeros).
    pub fn plan_mpc(
        &self,
        position: Point,
        heading: f64,
        past: &TrajectoryStats,
        warm_start: Option<&[Point]>,
    ) -> Result<MpcPlan> {
        self.check(past)?;
        let cfg = self.config;
        let h = cfg.horizon_steps;
        let mut controls = vec![[0.0, 0.0]; h];
        if let Some(ws) = warm_start {
            for (c, w) in controls.iter_mut().zip(ws) {
                *c = [
                    w[0].clamp(-cfg.u_max, cfg.u_max),
                    w[1].clamp(-cfg.u_max, cfg.u_max),
                ];
            }
        }
        let past_coeffs = past.coeffs();
        let mut grad = vec![[0.0, 0.0]; h];
        let mut cost = self.cost_and_grad(
            position,
            heading,
            &past_coeffs,
            past.elapsed(),
            &controls,
            Some(&mut grad),
        );
        let mut cost_history = vec![cost];
        let mut candidate = vec![[0.0, 0.0]; h];
        for iter in 0..cfg.descent_iters {
            if grad.iter().any(|g| !g[0].is_finite() || !g[1].is_finite()) {
                return Err(Error::NonFiniteGradient(iter));
            }
            let gmax = grad
                .iter()
                .map(|g| g[0].abs().max(g[1].abs()))
                .fold(0.0, f64::max);
            if gmax < GRAD_EPS {
                break;
            }
            let mut sigma = cfg.step_size;
            let mut accepted = false;
            for _ in 0..=MAX_HALVINGS {
                for (c, (u, g)) in candidate.iter_mut().zip(controls.iter().zip(&grad)) {
                    *c = [
                        (u[0] - sigma * g[0]).clamp(-cfg.u_max, cfg.u_max),
                        (u[1] - sigma * g[1]).clamp(-cfg.u_max, cfg.u_max),
                    ];
                }
                let candidate_cost = self.cost_and_grad(
                    position,
                    heading,
                    &past_coeffs,
                    past.elapsed(),
                    &candidate,
                    None,
                );
                if candidate_cost < cost {
                    std::mem::swap(&mut controls, &mut candidate);
                    cost = candidate_cost;
                    accepted = true;
                    break;
                }
                sigma *= 0.5;
            }
            if !accepted {
                break;
            }
            cost_history.push(cost);
            if iter + 1 < cfg.descent_iters {
                cost = self.cost_and_grad(
                    position,
                    heading,
                    &past_coeffs,
                    past.elapsed(),
                    &controls,
                    Some(&mut grad),
                );
            }
        }
        Ok(MpcPlan {
            controls,
            cost_history,
        })
    }

    /// Horizon cost of a control sequence (the planner's objective).
    pub fn cost(
        &self,
        position: Point,
        heading: f64,
        past: &TrajectoryStats,
        controls: &[Point],
    ) -> Result<f64> {
        self.check(past)?;
        Ok(self.cost_and_grad(
            position,
            heading,
            &past.coeffs(),
            past.elapsed(),
            controls,
            None,
        ))
    }

    /// Horizon cost and its analytic gradient with respect to the controls.
    pub fn cost_gradient(
        &self,
        position: Point,
        heading: f64,
        past: &TrajectoryStats,
        controls: &[Point],
    ) -> Result<(f64, Vec<Point>)> {
        self.check(past)?;
        let mut grad = vec![[0.0, 0.0]; controls.len()];
        let cost = self.cost_and_grad(
            position,
            heading,
            &past.coeffs(),
            past.elapsed(),
            controls,
            Some(&mut grad),
        );
        Ok((cost, grad))
    }

    /// Forward rollout, cost terms, and (optionally) the adjoint pass.
    fn cost_and_grad(
        &self,
        position: Point,
        heading: f64,
        past: &CoeffVector,
        past_elapsed: f64,
        controls: &[Point],
        grad: Option<&mut Vec<Point>>,
    ) -> f64 {
        let cfg = self.config;
        let nm = self.basis.len();
        let h = controls.len();
        let dt = cfg.dt;
        let share = dt / self.team_share;
        let denom = past_elapsed + h as f64 * share;

        // Rollout (no clipping: the barrier and bounds shape the plan).
        let mut positions = Vec::with_capacity(h);
        let mut headings = Vec::with_capacity(h);
        let mut pos = position;
        let mut th = heading;
        for u in controls {
            let (p, t) = self.dynamics.propagate(pos, th, *u, dt);
            positions.push(p);
            headings.push(t);
            pos = p;
            th = t;
        }

        let want_grad = grad.is_some();
        let mut basis_sums = vec![0.0; nm];
        let mut vals = vec![0.0; nm];
        let mut grads = vec![[0.0, 0.0]; nm];
        let mut state_grads: Vec<Vec<Point>> = Vec::new();
        let mut barrier_cost = 0.0;
        let mut barrier_grads: Vec<Point> = Vec::new();
        for p in &positions {
            if want_grad {
                self.basis.eval_all_with_grad_into(*p, &mut vals, &mut grads);
                state_grads.push(grads.clone());
            } else {
                self.basis.eval_all_into(*p, &mut vals);
            }
            for (acc, v) in basis_sums.iter_mut().zip(&vals) {
                *acc += v;
            }
            if let Some(region) = self.region {
                if cfg.barrier_weight > 0.0 {
                    let b = (-region.barrier_value(*p)).max(0.0);
                    barrier_cost += b * b;
                    if want_grad {
                        let g = region.barrier_gradient(*p);
                        barrier_grads.push([-2.0 * b * g[0], -2.0 * b * g[1]]);
                    }
                } else if want_grad {
                    barrier_grads.push([0.0, 0.0]);
                }
            } else if want_grad {
                barrier_grads.push([0.0, 0.0]);
            }
        }

        // Blended statistics over past plus planned horizon.
        let mut ergodic = 0.0;
        let mut coeff_weights = vec![0.0; if want_grad { nm } else { 0 }];
        for i in 0..nm {
            let blended = (past_elapsed * past.values()[i] + share * basis_sums[i]) / denom;
            let diff = blended - self.target.values()[i];
            let w = self.basis.weights()[i];
            ergodic += w * diff * diff;
            if want_grad {
                coeff_weights[i] = 2.0 * w * diff * share / denom;
            }
        }

        let control_cost: f64 = controls.iter().map(|u| u[0] * u[0] + u[1] * u[1]).sum();
        let total = ergodic
            + cfg.control_weight * control_cost * dt
            + cfg.barrier_weight * barrier_cost * dt;

        let Some(grad_out) = grad else {
            return total;
        };

        // Direct gradient of the cost with respect to each planned state.
        let mut gx: Vec<Point> = Vec::with_capacity(h);
        for m in 0..h {
            let mut g = [0.0, 0.0];
            for (cw, bg) in coeff_weights.iter().zip(&state_grads[m]) {
                g[0] += cw * bg[0];
                g[1] += cw * bg[1];
            }
            g[0] += cfg.barrier_weight * dt * barrier_grads[m][0];
            g[1] += cfg.barrier_weight * dt * barrier_grads[m][1];
            gx.push(g);
        }

        // Adjoint pass through the dynamics.
        grad_out.resize(h, [0.0, 0.0]);
        let mut lx = [0.0, 0.0];
        let mut lth = 0.0;
        for m in (0..h).rev() {
            lx[0] += gx[m][0];
            lx[1] += gx[m][1];
            let th_prev = if m == 0 { heading } else { headings[m - 1] };
            match self.dynamics {
                DynamicsModel::SingleIntegrator => {
                    grad_out[m] = [
                        dt * lx[0] + 2.0 * cfg.control_weight * dt * controls[m][0],
                        dt * lx[1] + 2.0 * cfg.control_weight * dt * controls[m][1],
                    ];
                }
                DynamicsModel::Unicycle => {
                    let (s, c) = (th_prev + 0.5 * controls[m][1] * dt).sin_cos();
                    let v = controls[m][0];
                    let swirl = -s * lx[0] + c * lx[1];
                    grad_out[m] = [
                        dt * (c * lx[0] + s * lx[1])
                            + 2.0 * cfg.control_weight * dt * controls[m][0],
                        dt * lth
                            + 0.5 * v * dt * dt * swirl
                            + 2.0 * cfg.control_weight * dt * controls[m][1],
                    ];
                    lth += v * dt * swirl;
                }
            }
        }
        total
    }

    /// Closed-form feedback: descend the weighted coefficient mismatch at
    /// the current position and saturate. Returns the zero vector when the
    /// mismatch field vanishes.
    pub fn spectral_feedback(&self, position: Point, past: &TrajectoryStats) -> Result<Point> {
        self.check(past)?;
        let coeffs = past.coeffs();
        let nm = self.basis.len();
        let mut vals = vec![0.0; nm];
        let mut grads = vec![[0.0, 0.0]; nm];
        self.basis
            .eval_all_with_grad_into(position, &mut vals, &mut grads);
        let mut b = [0.0, 0.0];
        for i in 0..nm {
            let w = self.basis.weights()[i] * (coeffs.values()[i] - self.target.values()[i]);
            b[0] += w * grads[i][0];
            b[1] += w * grads[i][1];
        }
        let norm = (b[0] * b[0] + b[1] * b[1]).sqrt();
        if norm < 1e-12 {
            return Ok([0.0, 0.0]);
        }
        let scale = -self.config.u_max / norm;
        Ok([b[0] * scale, b[1] * scale])
    }
}
