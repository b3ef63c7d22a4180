//! Cosine basis machinery: basis evaluation, target-density transforms,
//! and incremental trajectory-statistics accumulation.
//!
//! The basis on a rectangle `[0, L1] x [0, L2]` is
//! `F_k(x) = cos(k1 pi x1 / L1) cos(k2 pi x2 / L2) / h_k`, with `h_k`
//! chosen so the family is orthonormal under the L2 inner product. Each
//! mode also carries a Sobolev-style weight that decays with `|k|`, so
//! weighted squared distances between coefficient vectors emphasize
//! large-scale structure.

use crate::{Error, Result};

/// Mode index pair `(k1, k2)`.
pub type Mode = [usize; 2];

/// 2D point or vector in workspace units.
pub type Point = [f64; 2];

/// Cosine basis on a rectangular domain.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    extents: [f64; 2],
    modes_per_axis: usize,
    modes: Vec<Mode>,
    normalizers: Vec<f64>,
    weights: Vec<f64>,
}

impl SpectralBasis {
    /// Builds the basis with all modes `(k1, k2)`, `0 <= k_i < modes_per_axis`,
    /// enumerated with `k1` as the major index.
    pub fn new(extents: [f64; 2], modes_per_axis: usize) -> Result<Self> {
        if !(extents[0] > 0.0 && extents[1] > 0.0) {
            return Err(Error::Config(format!(
                "extents must be positive, got ({}, {})",
                extents[0], extents[1]
            )));
        }
        if modes_per_axis < 1 {
            return Err(Error::Config("modes_per_axis must be >= 1".into()));
        }
        let mut modes = Vec::with_capacity(modes_per_axis * modes_per_axis);
        let mut normalizers = Vec::with_capacity(modes.capacity());
        let mut weights = Vec::with_capacity(modes.capacity());
        for k1 in 0..modes_per_axis {
            for k2 in 0..modes_per_axis {
                let mut h = 1.0;
                for (ki, li) in [k1, k2].into_iter().zip(extents) {
                    h *= if ki == 0 { li } else { li / 2.0 };
                }
                let norm_sq = (k1 * k1 + k2 * k2) as f64;
                modes.push([k1, k2]);
                normalizers.push(h.sqrt());
                weights.push((1.0 + norm_sq).powf(-1.5));
            }
        }
        Ok(Self {
            extents,
            modes_per_axis,
            modes,
            normalizers,
            weights,
        })
    }

    pub fn extents(&self) -> [f64; 2] {
        self.extents
    }

    pub fn modes_per_axis(&self) -> usize {
        self.modes_per_axis
    }

    /// Number of modes `|K|`.
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    /// Flat index of a mode pair in enumeration order.
    pub fn mode_index(&self, k: Mode) -> usize {
        k[0] * self.modes_per_axis + k[1]
    }

    /// Orthonormality constant `h_k` for the given mode.
    pub fn normalizer(&self, k: Mode) -> f64 {
        self.normalizers[self.mode_index(k)]
    }

    /// Convergence weight for the given mode (1 at the constant mode,
    /// strictly decreasing in `|k|`).
    pub fn weight(&self, k: Mode) -> f64 {
        self.weights[self.mode_index(k)]
    }

    /// Per-mode weights in enumeration order.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn contains(&self, x: Point) -> bool {
        x[0] >= 0.0 && x[0] <= self.extents[0] && x[1] >= 0.0 && x[1] <= self.extents[1]
    }

    fn check_domain(&self, x: Point) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::OutOfDomain(x[0], x[1]))
        }
    }

    /// Evaluates `F_k(x)`.
    pub fn eval(&self, k: Mode, x: Point) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.eval_unchecked(k, x))
    }

    fn eval_unchecked(&self, k: Mode, x: Point) -> f64 {
        let h = self.normalizers[self.mode_index(k)];
        let c1 = (k[0] as f64 * std::f64::consts::PI * x[0] / self.extents[0]).cos();
        let c2 = (k[1] as f64 * std::f64::consts::PI * x[1] / self.extents[1]).cos();
        c1 * c2 / h
    }

    /// Evaluates the spatial gradient of `F_k` at `x`.
    pub fn eval_gradient(&self, k: Mode, x: Point) -> Result<Point> {
        self.check_domain(x)?;
        let h = self.normalizers[self.mode_index(k)];
        let w1 = k[0] as f64 * std::f64::consts::PI / self.extents[0];
        let w2 = k[1] as f64 * std::f64::consts::PI / self.extents[1];
        let (s1, c1) = (w1 * x[0]).sin_cos();
        let (s2, c2) = (w2 * x[1]).sin_cos();
        Ok([-w1 * s1 * c2 / h, -w2 * s2 * c1 / h])
    }

    /// Evaluates every basis function at `x` into `out` (enumeration order).
    ///
    /// The cosine extends smoothly beyond the rectangle, so no domain check
    /// is performed; planners rely on this when probing candidate states.
    pub fn eval_all_into(&self, x: Point, out: &mut [f64]) {
        assert_eq!(out.len(), self.len());
        let table = AxisTable::new(self, x);
        for (i, k) in self.modes.iter().enumerate() {
            out[i] = table.cos1[k[0]] * table.cos2[k[1]] / self.normalizers[i];
        }
    }

    /// Evaluates every basis function and its gradient at `x`.
    pub fn eval_all_with_grad_into(&self, x: Point, vals: &mut [f64], grads: &mut [Point]) {
        assert_eq!(vals.len(), self.len());
        assert_eq!(grads.len(), self.len());
        let table = AxisTable::new(self, x);
        let w1 = std::f64::consts::PI / self.extents[0];
        let w2 = std::f64::consts::PI / self.extents[1];
        for (i, k) in self.modes.iter().enumerate() {
            let h = self.normalizers[i];
            let (c1, s1) = (table.cos1[k[0]], table.sin1[k[0]]);
            let (c2, s2) = (table.cos2[k[1]], table.sin2[k[1]]);
            vals[i] = c1 * c2 / h;
            grads[i] = [
                -(k[0] as f64) * w1 * s1 * c2 / h,
                -(k[1] as f64) * w2 * s2 * c1 / h,
            ];
        }
    }
}

/// Per-axis cosine/sine tables shared across all modes at one point.
struct AxisTable {
    cos1: Vec<f64>,
    sin1: Vec<f64>,
    cos2: Vec<f64>,
    sin2: Vec<f64>,
}

impl AxisTable {
    fn new(basis: &SpectralBasis, x: Point) -> Self {
        let n = basis.modes_per_axis;
        let mut cos1 = Vec::with_capacity(n);
        let mut sin1 = Vec::with_capacity(n);
        let mut cos2 = Vec::with_capacity(n);
        let mut sin2 = Vec::with_capacity(n);
        for k in 0..n {
            let (s1, c1) =
                (k as f64 * std::f64::consts::PI * x[0] / basis.extents[0]).sin_cos();
            let (s2, c2) =
                (k as f64 * std::f64::consts::PI * x[1] / basis.extents[1]).sin_cos();
            cos1.push(c1);
            sin1.push(s1);
            cos2.push(c2);
            sin2.push(s2);
        }
        Self {
            cos1,
            sin1,
            cos2,
            sin2,
        }
    }
}

/// Real coefficient vector over a basis's mode set.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffVector {
    values: Vec<f64>,
}

impl CoeffVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Config(format!("non-finite coefficient {bad}")));
        }
        Ok(Self { values })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Coefficient for a mode pair.
    pub fn get(&self, basis: &SpectralBasis, k: Mode) -> f64 {
        self.values[basis.mode_index(k)]
    }

    /// Element-wise linear combination `a*self + b*other`.
    pub fn lin_comb(&self, a: f64, other: &CoeffVector, b: f64) -> Result<CoeffVector> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(CoeffVector {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }
}

impl From<Vec<f64>> for CoeffVector {
    fn from(values: Vec<f64>) -> Self {
        Self { values }
    }
}

/// Discretized nonnegative target density on the rectangle, stored
/// row-major with row 0 at the **top** of the domain (image convention).
#[derive(Debug, Clone)]
pub struct DensityMap {
    rows: usize,
    cols: usize,
    extents: [f64; 2],
    values: Vec<f64>,
}

/// Tolerance on `sum(cells) * cell_area` for a map to count as normalized.
pub const MASS_TOL: f64 = 1e-9;

impl DensityMap {
    /// Wraps a raw grid. Cells must be nonnegative and at least one must
    /// be positive; the grid is normalized to unit mass.
    pub fn from_grid(
        rows: usize,
        cols: usize,
        extents: [f64; 2],
        mut values: Vec<f64>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 || values.len() != rows * cols {
            return Err(Error::Config(format!(
                "grid shape {rows}x{cols} does not match {} values",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config(
                "density cells must be finite and nonnegative".into(),
            ));
        }
        let cell_area = extents[0] * extents[1] / (rows * cols) as f64;
        let mass: f64 = values.iter().sum::<f64>() * cell_area;
        if mass <= 0.0 {
            return Err(Error::ZeroMass);
        }
        for v in &mut values {
            *v /= mass;
        }
        Ok(Self {
            rows,
            cols,
            extents,
            values,
        })
    }

    /// Uniform unit-mass density.
    pub fn uniform(rows: usize, cols: usize, extents: [f64; 2]) -> Self {
        let v = 1.0 / (extents[0] * extents[1]);
        Self {
            rows,
            cols,
            extents,
            values: vec![v; rows * cols],
        }
    }

    /// Builds a map by sampling `f` at cell centers, then normalizing.
    pub fn from_fn(
        rows: usize,
        cols: usize,
        extents: [f64; 2],
        f: impl Fn(Point) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                values.push(f(cell_center(r, c, rows, cols, extents)));
            }
        }
        Self::from_grid(rows, cols, extents, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn extents(&self) -> [f64; 2] {
        self.extents
    }

    pub fn cell_area(&self) -> f64 {
        self.extents[0] * self.extents[1] / (self.rows * self.cols) as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    /// Domain coordinates of a cell center. Row 0 maps to `x2 = L2` (top).
    pub fn cell_center(&self, r: usize, c: usize) -> Point {
        cell_center(r, c, self.rows, self.cols, self.extents)
    }

    /// Total mass under midpoint quadrature.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_area()
    }

    fn check_normalized(&self) -> Result<()> {
        let mass = self.mass();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::NotNormalized(mass));
        }
        Ok(())
    }
}

fn cell_center(r: usize, c: usize, rows: usize, cols: usize, extents: [f64; 2]) -> Point {
    [
        (c as f64 + 0.5) / cols as f64 * extents[0],
        (1.0 - (r as f64 + 0.5) / rows as f64) * extents[1],
    ]
}

/// Fourier transform of a normalized density by midpoint quadrature over
/// its grid.
///
/// The constant mode is the total mass scaled by the constant basis value,
/// so it is written analytically as `1 / h_(0,0)` rather than summed.
pub fn transform_density(basis: &SpectralBasis, density: &DensityMap) -> Result<CoeffVector> {
    density.check_normalized()?;
    let cell_area = density.cell_area();
    let mut coeffs = vec![0.0; basis.len()];
    let mut vals = vec![0.0; basis.len()];
    for r in 0..density.rows() {
        for c in 0..density.cols() {
            let phi = density.get(r, c);
            if phi == 0.0 {
                continue;
            }
            basis.eval_all_into(density.cell_center(r, c), &mut vals);
            let w = phi * cell_area;
            for (acc, v) in coeffs.iter_mut().zip(&vals) {
                *acc += w * v;
            }
        }
    }
    coeffs[basis.mode_index([0, 0])] = 1.0 / basis.normalizer([0, 0]);
    Ok(CoeffVector::from(coeffs))
}

/// Running trajectory statistics: unnormalized sums `S_k` of basis values
/// weighted by dwell time, plus the elapsed time `T`. The normalized
/// coefficients are `S_k / T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStats {
    sums: Vec<f64>,
    elapsed: f64,
}

impl TrajectoryStats {
    pub fn new(basis: &SpectralBasis) -> Self {
        Self {
            sums: vec![0.0; basis.len()],
            elapsed: 0.0,
        }
    }

    /// Builds a stats record whose coefficients equal `coeffs` after
    /// `elapsed` seconds of accumulation.
    pub fn from_coeffs(coeffs: &CoeffVector, elapsed: f64) -> Self {
        Self {
            sums: coeffs.values().iter().map(|c| c * elapsed).collect(),
            elapsed,
        }
    }

    pub fn elapsed(&self) -> f64 {
        self.elapsed
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    pub fn num_modes(&self) -> usize {
        self.sums.len()
    }

    /// Folds a dwell of `dt` at `x` into the sums. `weight` scales the
    /// sample's share of both mass and time (1 for an agent's own record;
    /// `1/N` when folding into a team-average record).
    pub fn accumulate_weighted(
        &mut self,
        basis: &SpectralBasis,
        x: Point,
        dt: f64,
        weight: f64,
    ) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {dt}")));
        }
        if self.sums.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                got: self.sums.len(),
            });
        }
        basis.check_domain(x)?;
        let wdt = weight * dt;
        let table = AxisTable::new(basis, x);
        for (i, k) in basis.modes().iter().enumerate() {
            self.sums[i] += table.cos1[k[0]] * table.cos2[k[1]] / basis.normalizers[i] * wdt;
        }
        self.elapsed += wdt;
        Ok(())
    }

    /// Folds a dwell of `dt` at `x` into the sums.
    pub fn accumulate(&mut self, basis: &SpectralBasis, x: Point, dt: f64) -> Result<()> {
        self.accumulate_weighted(basis, x, dt, 1.0)
    }

    /// Normalized coefficients `S_k / T` (zeros when nothing accumulated).
    pub fn coeffs(&self) -> CoeffVector {
        if self.elapsed > 0.0 {
            CoeffVector::from(self.sums.iter().map(|s| s / self.elapsed).collect::<Vec<_>>())
        } else {
            CoeffVector::zeros(self.sums.len())
        }
    }

    /// Scales both the sums and the elapsed time; the coefficients are
    /// unchanged. Used to turn pooled team sums into a per-agent share.
    pub fn scaled(&self, factor: f64) -> TrajectoryStats {
        TrajectoryStats {
            sums: self.sums.iter().map(|s| s * factor).collect(),
            elapsed: self.elapsed * factor,
        }
    }

    /// Pools several stats records into one, as if their trajectories had
    /// been accumulated by a single record.
    pub fn pooled<'a>(records: impl IntoIterator<Item = &'a TrajectoryStats>) -> TrajectoryStats {
        let mut iter = records.into_iter();
        let first = iter.next().expect("pooled() needs at least one record");
        let mut sums = first.sums.clone();
        let mut elapsed = first.elapsed;
        for rec in iter {
            assert_eq!(rec.sums.len(), sums.len(), "mismatched mode counts");
            for (acc, s) in sums.iter_mut().zip(&rec.sums) {
                *acc += s;
            }
            elapsed += rec.elapsed;
        }
        TrajectoryStats { sums, elapsed }
    }
}
