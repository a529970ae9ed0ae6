//! Scalar Holder drivers and their level-2 lifts.
//!
//! Paths live on uniform grids over [0, T]. Fractional Brownian motion is
//! sampled either by Cholesky factorization of the increment covariance
//! (exact, quadratic memory, capped at 4096 steps) or by circulant embedding
//! for longer grids. A lift stores per-step second-level areas plus prefix
//! areas so that any pair evaluation is O(1) through the Chen relation.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Largest step count for which the dense Cholesky sampler is allowed.
pub const CHOLESKY_STEP_BUDGET: usize = 4096;

/// Uniform grid 0 = t_0 < ... < t_N = T.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "horizon {horizon} must be positive and finite"
            )));
        }
        if steps == 0 {
            return Err(Error::InvalidArgument("grid needs at least one step".into()));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of grid points, `steps + 1`.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn h(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn point(&self, k: usize) -> f64 {
        debug_assert!(k <= self.steps);
        k as f64 * self.horizon / self.steps as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.point(k)).collect()
    }

    /// Half-resolution grid, keeping every second point.
    pub fn coarsen(&self) -> Result<Self> {
        if self.steps % 2 != 0 {
            return Err(Error::GridMismatch(format!(
                "cannot halve a grid with {} steps",
                self.steps
            )));
        }
        Self::new(self.horizon, self.steps / 2)
    }
}

/// Scalar path sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarPath {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl ScalarPath {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} grid points",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite path value".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|k| f(grid.point(k))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }

    /// Linear interpolation between grid points, constant extension outside.
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.values[0];
        }
        if t >= self.grid.horizon() {
            return *self.values.last().unwrap();
        }
        let s = t / self.grid.h();
        let k = (s.floor() as usize).min(self.grid.steps() - 1);
        let w = s - k as f64;
        (1.0 - w) * self.values[k] + w * self.values[k + 1]
    }

    /// Step increments x(t_{k+1}) - x(t_k).
    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Restriction to every second grid point.
    pub fn coarsen(&self) -> Result<Self> {
        let grid = self.grid.coarsen()?;
        let values = self.values.iter().step_by(2).copied().collect();
        Self::new(grid, values)
    }

    /// Discrete Holder seminorm: sup over grid pairs of |dx| / (t-s)^eta.
    pub fn holder_seminorm(&self, eta: f64) -> f64 {
        let n = self.grid.steps();
        let h = self.grid.h();
        let lag_pow: Vec<f64> = (0..=n).map(|l| (l as f64 * h).powf(eta)).collect();
        let mut sup: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..=n {
                let r = (self.values[j] - self.values[i]).abs() / lag_pow[j - i];
                sup = sup.max(r);
            }
        }
        sup
    }

    /// Symmetric moving average over a window of total width `width`,
    /// with constant extension at the endpoints. Requires width >= 2h.
    pub fn mollify(&self, width: f64) -> Result<Self> {
        let h = self.grid.h();
        if width < 2.0 * h {
            return Err(Error::InvalidArgument(format!(
                "mollification width {width} below resolution 2h = {}",
                2.0 * h
            )));
        }
        let m = (width / (2.0 * h)).round() as i64;
        let n = self.grid.steps() as i64;
        let values = (0..=n)
            .map(|k| {
                let mut acc = 0.0;
                for o in -m..=m {
                    let idx = (k + o).clamp(0, n) as usize;
                    acc += self.values[idx];
                }
                acc / (2 * m + 1) as f64
            })
            .collect();
        Self::new(self.grid, values)
    }
}

/// Fractional Gaussian noise autocovariance at integer lag `n` for step `h`.
fn fgn_cov(hurst: f64, h: f64, n: usize) -> f64 {
    let two_h = 2.0 * hurst;
    let n = n as f64;
    0.5 * h.powf(two_h) * ((n + 1.0).powf(two_h) + (n - 1.0).abs().powf(two_h) - 2.0 * n.powf(two_h))
}

fn check_hurst(hurst: f64) -> Result<()> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "Hurst parameter {hurst} outside (0, 1)"
        )));
    }
    Ok(())
}

/// Exact fBm sampler holding a reusable Cholesky factor of the increment
/// covariance.
pub struct FbmSampler {
    grid: TimeGrid,
    factor: DMatrix<f64>,
}

impl FbmSampler {
    pub fn new(grid: TimeGrid, hurst: f64) -> Result<Self> {
        check_hurst(hurst)?;
        let n = grid.steps();
        if n > CHOLESKY_STEP_BUDGET {
            return Err(Error::InvalidArgument(format!(
                "{n} steps exceed the Cholesky budget of {CHOLESKY_STEP_BUDGET}; \
                 use sample_fbm_circulant for long grids"
            )));
        }
        let h = grid.h();
        let cov = DMatrix::from_fn(n, n, |i, j| fgn_cov(hurst, h, i.abs_diff(j)));
        let chol = cov
            .cholesky()
            .ok_or_else(|| Error::Covariance("increment covariance is not positive definite".into()))?;
        Ok(Self {
            grid,
            factor: chol.unpack(),
        })
    }

    pub fn sample(&self, seed: u64) -> ScalarPath {
        let n = self.grid.steps();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut values = Vec::with_capacity(n + 1);
        values.push(0.0);
        let mut acc = 0.0;
        for i in 0..n {
            let row = self.factor.row(i);
            let inc: f64 = (0..=i).map(|j| row[j] * z[j]).sum();
            acc += inc;
            values.push(acc);
        }
        ScalarPath {
            grid: self.grid,
            values,
        }
    }
}

/// One-shot exact fBm sample starting at zero.
pub fn sample_fbm(grid: TimeGrid, hurst: f64, seed: u64) -> Result<ScalarPath> {
    Ok(FbmSampler::new(grid, hurst)?.sample(seed))
}

/// fBm sample via circulant embedding of the increment covariance. Handles
/// grids beyond the Cholesky budget at O(N log N) cost; the embedding
/// eigenvalues are clamped at zero when round-off makes them slightly
/// negative.
pub fn sample_fbm_circulant(grid: TimeGrid, hurst: f64, seed: u64) -> Result<ScalarPath> {
    check_hurst(hurst)?;
    let n = grid.steps();
    let m = 2 * n;
    let h = grid.h();

    let mut row: Vec<Complex<f64>> = (0..m)
        .map(|j| Complex::new(fgn_cov(hurst, h, j.min(m - j)), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut row);

    let max_eig = row.iter().map(|c| c.re.abs()).fold(0.0f64, f64::max);
    let mut eigs = Vec::with_capacity(m);
    for c in &row {
        if c.re < -1e-8 * max_eig {
            return Err(Error::Covariance(format!(
                "circulant embedding eigenvalue {} is negative",
                c.re
            )));
        }
        eigs.push(c.re.max(0.0));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };
    let mut v = vec![Complex::new(0.0, 0.0); m];
    v[0] = Complex::new(eigs[0].sqrt() * gauss(), 0.0);
    v[n] = Complex::new(eigs[n].sqrt() * gauss(), 0.0);
    for j in 1..n {
        let s = (eigs[j] / 2.0).sqrt();
        let re = s * gauss();
        let im = s * gauss();
        v[j] = Complex::new(re, im);
        v[m - j] = Complex::new(re, -im);
    }
    planner.plan_fft_forward(m).process(&mut v);

    let scale = 1.0 / (m as f64).sqrt();
    let mut values = Vec::with_capacity(n + 1);
    values.push(0.0);
    let mut acc = 0.0;
    for vj in v.iter().take(n) {
        acc += vj.re * scale;
        values.push(acc);
    }
    ScalarPath::new(grid, values)
}

/// Grid function `h` perturbing the second level of a lift, optionally with a
/// pointwise derivative used by quadrature diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftFunction {
    values: Vec<f64>,
    derivative: Option<Vec<f64>>,
}

impl ShiftFunction {
    pub fn new(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: (0..grid.len()).map(|k| f(grid.point(k))).collect(),
            derivative: None,
        }
    }

    pub fn with_derivative(
        grid: TimeGrid,
        f: impl Fn(f64) -> f64,
        df: impl Fn(f64) -> f64,
    ) -> Self {
        Self {
            values: (0..grid.len()).map(|k| f(grid.point(k))).collect(),
            derivative: Some((0..grid.len()).map(|k| df(grid.point(k))).collect()),
        }
    }

    /// h(t) = t / 2: shifts a geometric lift to its Ito counterpart.
    pub fn half_t(grid: TimeGrid) -> Self {
        Self::with_derivative(grid, |t| 0.5 * t, |_| 0.5)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn derivative(&self) -> Option<&[f64]> {
        self.derivative.as_deref()
    }

    fn coarsen(&self) -> Self {
        Self {
            values: self.values.iter().step_by(2).copied().collect(),
            derivative: self
                .derivative
                .as_ref()
                .map(|d| d.iter().step_by(2).copied().collect()),
        }
    }
}

/// Which second level a lift carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiftKind {
    Geometric,
    Ito,
    Shifted,
}

/// Level-2 rough path over a grid path.
///
/// Only per-step areas XX(t_k, t_{k+1}) and prefix areas XX(0, t_k) are
/// stored; any pair is reconstructed in O(1) through the Chen relation
/// XX(s, u) = XX(s, t) + XX(t, u) + dx(s, t) dx(t, u).
#[derive(Debug, Clone, PartialEq)]
pub struct Lift {
    path: ScalarPath,
    kind: LiftKind,
    step_areas: Vec<f64>,
    prefix_areas: Vec<f64>,
    shift: Option<ShiftFunction>,
}

impl Lift {
    fn assemble(path: ScalarPath, kind: LiftKind, step_areas: Vec<f64>, shift: Option<ShiftFunction>) -> Self {
        let n = path.grid().steps();
        debug_assert_eq!(step_areas.len(), n);
        let x0 = path.value(0);
        let mut prefix_areas = Vec::with_capacity(n + 1);
        prefix_areas.push(0.0);
        for k in 0..n {
            let prev = prefix_areas[k];
            let cross = (path.value(k) - x0) * (path.value(k + 1) - path.value(k));
            prefix_areas.push(prev + step_areas[k] + cross);
        }
        Self {
            path,
            kind,
            step_areas,
            prefix_areas,
            shift,
        }
    }

    /// Geometric lift: XX(s, t) = dx(s, t)^2 / 2.
    pub fn geometric(path: ScalarPath) -> Self {
        let areas = path.increments().iter().map(|dx| 0.5 * dx * dx).collect();
        Self::assemble(path, LiftKind::Geometric, areas, None)
    }

    /// Ito-type lift: XX(s, t) = dx(s, t)^2 / 2 + (t - s) / 2.
    pub fn ito(path: ScalarPath) -> Self {
        let h = path.grid().h();
        let areas = path
            .increments()
            .iter()
            .map(|dx| 0.5 * dx * dx + 0.5 * h)
            .collect();
        Self::assemble(path, LiftKind::Ito, areas, None)
    }

    /// Geometric lift shifted by the increment of `shift`:
    /// XX(s, t) = dx(s, t)^2 / 2 + h(t) - h(s).
    pub fn shifted(path: ScalarPath, shift: ShiftFunction) -> Result<Self> {
        if shift.values.len() != path.grid().len() {
            return Err(Error::GridMismatch("shift function length".into()));
        }
        let areas = path
            .increments()
            .iter()
            .enumerate()
            .map(|(k, dx)| 0.5 * dx * dx + shift.values[k + 1] - shift.values[k])
            .collect();
        Ok(Self::assemble(path, LiftKind::Shifted, areas, Some(shift)))
    }

    pub fn path(&self) -> &ScalarPath {
        &self.path
    }

    pub fn grid(&self) -> TimeGrid {
        self.path.grid()
    }

    pub fn kind(&self) -> LiftKind {
        self.kind
    }

    pub fn shift(&self) -> Option<&ShiftFunction> {
        self.shift.as_ref()
    }

    /// Path increment x(t_j) - x(t_i).
    pub fn dx(&self, i: usize, j: usize) -> f64 {
        self.path.value(j) - self.path.value(i)
    }

    /// Second-level evaluation XX(t_i, t_j), i <= j, in O(1).
    pub fn xx_eval(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i <= j);
        let x0 = self.path.value(0);
        self.prefix_areas[j]
            - self.prefix_areas[i]
            - (self.path.value(i) - x0) * (self.path.value(j) - self.path.value(i))
    }

    /// Largest Chen defect |XX(i,k) - XX(i,j) - XX(j,k) - dx(i,j) dx(j,k)|
    /// over the given index triples.
    pub fn chen_defect(&self, triples: &[(usize, usize, usize)]) -> f64 {
        triples
            .iter()
            .map(|&(i, j, k)| {
                (self.xx_eval(i, k)
                    - self.xx_eval(i, j)
                    - self.xx_eval(j, k)
                    - self.dx(i, j) * self.dx(j, k))
                .abs()
            })
            .fold(0.0, f64::max)
    }

    /// All consecutive index triples (k, k+1, k+2).
    pub fn consecutive_triples(&self) -> Vec<(usize, usize, usize)> {
        (0..self.grid().steps().saturating_sub(1))
            .map(|k| (k, k + 1, k + 2))
            .collect()
    }

    /// Half-resolution lift; pairs of step areas are merged through the Chen
    /// relation, so coarse evaluations agree with the fine lift exactly.
    pub fn coarsen(&self) -> Result<Self> {
        let path = self.path.coarsen()?;
        let areas = (0..path.grid().steps())
            .map(|k| {
                let a = self.step_areas[2 * k];
                let b = self.step_areas[2 * k + 1];
                a + b + self.dx(2 * k, 2 * k + 1) * self.dx(2 * k + 1, 2 * k + 2)
            })
            .collect();
        let shift = self.shift.as_ref().map(|s| s.coarsen());
        Ok(Self::assemble(path, self.kind, areas, shift))
    }

    /// Discrete 2 eta-Holder seminorm of the second level.
    pub fn xx_holder_seminorm(&self, eta: f64) -> f64 {
        let n = self.grid().steps();
        let h = self.grid().h();
        let lag_pow: Vec<f64> = (0..=n).map(|l| (l as f64 * h).powf(2.0 * eta)).collect();
        let mut sup: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..=n {
                let r = self.xx_eval(i, j).abs() / lag_pow[j - i];
                sup = sup.max(r);
            }
        }
        sup
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn grid_basics() {
        let g = TimeGrid::new(1.0, 8).unwrap();
        assert_eq!(g.h(), 0.125);
        assert_eq!(g.point(0), 0.0);
        assert_eq!(g.point(8), 1.0);
        assert_eq!(g.times().len(), 9);
        let c = g.coarsen().unwrap();
        assert_eq!(c.steps(), 4);
        assert_eq!(c.h(), 0.25);
        assert!(TimeGrid::new(1.0, 5).unwrap().coarsen().is_err());
        assert!(TimeGrid::new(0.0, 4).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
    }

    #[test]
    fn eval_interpolates_and_extends() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let p = ScalarPath::new(g, vec![0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        assert_relative_eq!(p.eval(0.125), 0.5);
        assert_relative_eq!(p.eval(0.25), 1.0);
        assert_eq!(p.eval(-1.0), 0.0);
        assert_eq!(p.eval(2.0), 0.0);
    }

    #[test]
    fn holder_seminorm_linear_path() {
        let g = TimeGrid::new(1.0, 64).unwrap();
        let p = ScalarPath::from_fn(g, |t| 3.0 * t).unwrap();
        // |3 dt| / dt^eta maximized at the full interval: 3 * 1^(1-eta) = 3.
        assert_relative_eq!(p.holder_seminorm(0.38), 3.0, max_relative = 1e-12);
    }

    #[test]
    fn fbm_deterministic_and_budgeted() {
        let g = TimeGrid::new(1.0, 64).unwrap();
        let a = sample_fbm(g, 0.4, 42).unwrap();
        let b = sample_fbm(g, 0.4, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_fbm(g, 0.4, 43).unwrap();
        assert_ne!(a, c);
        assert_eq!(a.value(0), 0.0);

        let long = TimeGrid::new(1.0, 8192).unwrap();
        let err = sample_fbm(long, 0.4, 1).unwrap_err();
        assert!(err.to_string().contains("circulant"));
        assert!(sample_fbm(g, 1.0, 1).is_err());
    }

    /// Monte Carlo oracle: terminal variance of fBm is T^{2H}, and for
    /// H = 1/2 consecutive increments are uncorrelated.
    #[test]
    fn fbm_moments_monte_carlo() {
        let g = TimeGrid::new(1.0, 32).unwrap();
        let hurst = 0.4;
        let sampler = FbmSampler::new(g, hurst).unwrap();
        let trials = 4000;
        let mut var = 0.0;
        let mut cross = 0.0;
        for seed in 0..trials {
            let x = sampler.sample(seed);
            let xt = x.value(32);
            var += xt * xt;
            let inc = x.increments();
            cross += inc[0] * inc[1];
        }
        var /= trials as f64;
        cross /= trials as f64;
        // 3 sigma of the sample variance of a Gaussian is about 0.07 here.
        assert!((var - 1.0f64.powf(2.0 * hurst)).abs() < 0.08, "var = {var}");
        // H < 1/2: negatively correlated increments.
        let gamma1 = fgn_cov(hurst, g.h(), 1);
        assert!(gamma1 < 0.0);
        assert!((cross - gamma1).abs() < 3.0 * fgn_cov(hurst, g.h(), 0) / (trials as f64).sqrt() * 3.0);
    }

    #[test]
    fn circulant_matches_cholesky_in_distribution() {
        let g = TimeGrid::new(1.0, 64).unwrap();
        let hurst = 0.4;
        let trials = 2000;
        let mut var = 0.0;
        for seed in 0..trials {
            let x = sample_fbm_circulant(g, hurst, seed).unwrap();
            let xt = x.value(64);
            var += xt * xt;
        }
        var /= trials as f64;
        assert!((var - 1.0).abs() < 0.12, "circulant terminal var = {var}");

        // Long grid runs within the same call budget.
        let long = TimeGrid::new(1.0, 16384).unwrap();
        let x = sample_fbm_circulant(long, hurst, 42).unwrap();
        assert_eq!(x.values().len(), 16385);
        assert!(x.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn geometric_lift_square_rule() {
        let g = TimeGrid::new(1.0, 128).unwrap();
        let x = sample_fbm(g, 0.4, 42).unwrap();
        let lift = Lift::geometric(x.clone());
        for &(i, j) in &[(0usize, 128usize), (3, 77), (50, 51), (10, 10)] {
            let dx = x.value(j) - x.value(i);
            assert_relative_eq!(lift.xx_eval(i, j), 0.5 * dx * dx, epsilon = 1e-12);
        }
    }

    #[test]
    fn ito_lift_adds_half_elapsed_time() {
        let g = TimeGrid::new(2.0, 64).unwrap();
        let x = sample_fbm(g, 0.45, 7).unwrap();
        let geo = Lift::geometric(x.clone());
        let ito = Lift::ito(x.clone());
        for &(i, j) in &[(0usize, 64usize), (5, 40), (20, 21)] {
            let gap = ito.xx_eval(i, j) - geo.xx_eval(i, j);
            assert_relative_eq!(gap, 0.5 * (g.point(j) - g.point(i)), epsilon = 1e-12);
        }
        // Ito equals the geometric lift shifted by h(t) = t/2.
        let shifted = Lift::shifted(x, ShiftFunction::half_t(g)).unwrap();
        for &(i, j) in &[(0usize, 64usize), (5, 40)] {
            assert_relative_eq!(shifted.xx_eval(i, j), ito.xx_eval(i, j), epsilon = 1e-12);
        }
    }

    #[test]
    fn chen_defect_roundoff_for_all_kinds() {
        let g = TimeGrid::new(1.0, 256).unwrap();
        let x = sample_fbm(g, 0.4, 42).unwrap();
        let triples: Vec<_> = (0..254).map(|k| (k, k + 1, k + 2)).chain([(0, 100, 256), (17, 64, 200)]).collect();
        for lift in [
            Lift::geometric(x.clone()),
            Lift::ito(x.clone()),
            Lift::shifted(x.clone(), ShiftFunction::new(g, |t| (5.0 * t).sin())).unwrap(),
        ] {
            assert!(lift.chen_defect(&triples) <= 1e-12);
        }
    }

    #[test]
    fn coarsening_is_consistent() {
        let g = TimeGrid::new(1.0, 128).unwrap();
        let x = sample_fbm(g, 0.4, 9).unwrap();
        let lift = Lift::ito(x);
        let coarse = lift.coarsen().unwrap();
        for &(i, j) in &[(0usize, 64usize), (3, 50), (10, 11)] {
            assert_relative_eq!(
                coarse.xx_eval(i, j),
                lift.xx_eval(2 * i, 2 * j),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn mollify_behaviour() {
        let g = TimeGrid::new(1.0, 64).unwrap();
        let flat = ScalarPath::from_fn(g, |_| 2.5).unwrap();
        assert_eq!(flat.mollify(0.1).unwrap(), flat);
        let x = sample_fbm(g, 0.4, 3).unwrap();
        assert!(x.mollify(0.5 * g.h()).is_err());
        // Averaging shrinks the Holder seminorm of a rough path.
        let smooth = x.mollify(0.2).unwrap();
        assert!(smooth.holder_seminorm(0.38) < x.holder_seminorm(0.38));
    }

    proptest! {
        #[test]
        fn chen_relation_random_triples(seed in 0u64..64, split in 0usize..129) {
            let g = TimeGrid::new(1.0, 128).unwrap();
            let x = sample_fbm(g, 0.4, seed).unwrap();
            let lift = Lift::ito(x);
            let j = split.clamp(0, 128);
            let defect = lift.chen_defect(&[(0, j, 128)]);
            prop_assert!(defect <= 1e-12);
        }

        #[test]
        fn holder_seminorm_monotone_under_coarsening(seed in 0u64..32) {
            let g = TimeGrid::new(1.0, 64).unwrap();
            let x = sample_fbm(g, 0.4, seed).unwrap();
            let coarse = x.coarsen().unwrap();
            prop_assert!(coarse.holder_seminorm(0.38) <= x.holder_seminorm(0.38) + 1e-15);
        }
    }
}
