//! Diagonal semigroup testbed on a truncated sine eigenbasis.
//!
//! The generator is the 1-D Dirichlet Laplacian on (0, pi) truncated to `K`
//! modes, so `A` acts as `-mu_k` with `mu_k = k^2`, the semigroup `S(t)` is
//! the diagonal exponential `exp(-mu_k t)`, and the scale of spaces `E_lambda`
//! is realized through the spectral weights `(1 + mu_k)^lambda`.

use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Element of the coefficient space `E`: coordinates in the sine eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    coeffs: Vec<f64>,
}

impl StateVector {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidArgument("empty coefficient vector".into()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Numerical("non-finite coefficient".into()));
        }
        Ok(Self { coeffs })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            coeffs: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Plain Euclidean norm, i.e. the `E_0` norm.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim(), other.dim());
        Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim(), other.dim());
        Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }

    /// `self += c * other`, in place.
    pub fn add_scaled(&mut self, c: f64, other: &Self) {
        debug_assert_eq!(self.dim(), other.dim());
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += c * b;
        }
    }

    /// Componentwise multiplication in place; used to apply precomputed
    /// diagonal semigroup factors in step loops.
    pub fn mul_components(&mut self, factors: &[f64]) {
        debug_assert_eq!(self.dim(), factors.len());
        for (a, f) in self.coeffs.iter_mut().zip(factors) {
            *a *= f;
        }
    }
}

/// Admissible index into the scale of spaces `E_lambda`, `lambda` in [0, 3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleIndex(f64);

impl ScaleIndex {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(0.0..3.0).contains(&lambda) {
            return Err(Error::InvalidArgument(format!(
                "scale index {lambda} outside [0, 3)"
            )));
        }
        Ok(Self(lambda))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Truncated spectral model: eigenvalues, collocation nodes and the
/// (unnormalized) discrete sine synthesis matrix.
#[derive(Debug, Clone)]
pub struct ScaleModel {
    eigenvalues: Vec<f64>,
    nodes: Vec<f64>,
    /// synth[j * K + (k-1)] = sin(k * xi_j)
    synth: Vec<f64>,
}

impl ScaleModel {
    /// Dirichlet Laplacian on (0, pi) truncated to `modes` eigenmodes.
    pub fn dirichlet(modes: usize) -> Self {
        let eigenvalues = (1..=modes).map(|k| (k * k) as f64).collect();
        Self::build(eigenvalues, modes)
    }

    /// Custom nonnegative, strictly increasing eigenvalues (test scaffolding
    /// for degenerate one-mode scenarios such as `mu = 0`).
    pub fn with_eigenvalues(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::InvalidArgument("no eigenvalues".into()));
        }
        if eigenvalues[0] < 0.0 || eigenvalues.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "eigenvalues must be nonnegative and strictly increasing".into(),
            ));
        }
        let modes = eigenvalues.len();
        Ok(Self::build(eigenvalues, modes))
    }

    fn build(eigenvalues: Vec<f64>, modes: usize) -> Self {
        let nodes: Vec<f64> = (1..=modes)
            .map(|j| j as f64 * std::f64::consts::PI / (modes + 1) as f64)
            .collect();
        let mut synth = vec![0.0; modes * modes];
        for (j, &xi) in nodes.iter().enumerate() {
            for k in 1..=modes {
                synth[j * modes + (k - 1)] = (k as f64 * xi).sin();
            }
        }
        Self {
            eigenvalues,
            nodes,
            synth,
        }
    }

    pub fn modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn collocation_points(&self) -> &[f64] {
        &self.nodes
    }

    fn check_dim(&self, v: &StateVector) -> Result<()> {
        if v.dim() != self.modes() {
            return Err(Error::GridMismatch(format!(
                "state has {} coefficients, model has {} modes",
                v.dim(),
                self.modes()
            )));
        }
        Ok(())
    }

    /// `S(t) v`, componentwise `exp(-mu_k t) v_k`.
    pub fn semigroup_apply(&self, t: f64, v: &StateVector) -> Result<StateVector> {
        if t < 0.0 {
            return Err(Error::InvalidArgument(format!("negative time {t}")));
        }
        self.check_dim(v)?;
        let coeffs = self
            .eigenvalues
            .iter()
            .zip(v.coeffs())
            .map(|(mu, c)| (-mu * t).exp() * c)
            .collect();
        Ok(StateVector { coeffs })
    }

    /// `A v`, componentwise `-mu_k v_k`.
    pub fn apply_generator(&self, v: &StateVector) -> Result<StateVector> {
        self.check_dim(v)?;
        let coeffs = self
            .eigenvalues
            .iter()
            .zip(v.coeffs())
            .map(|(mu, c)| -mu * c)
            .collect();
        Ok(StateVector { coeffs })
    }

    /// Weighted norm of `E_lambda`: `(sum_k (1+mu_k)^{2 lambda} v_k^2)^{1/2}`.
    pub fn scale_norm(&self, lambda: ScaleIndex, v: &StateVector) -> f64 {
        debug_assert_eq!(v.dim(), self.modes());
        self.eigenvalues
            .iter()
            .zip(v.coeffs())
            .map(|(mu, c)| (1.0 + mu).powf(2.0 * lambda.value()) * c * c)
            .sum::<f64>()
            .sqrt()
    }

    /// Coefficients -> point values at the collocation nodes.
    pub fn to_point_values(&self, v: &StateVector) -> Vec<f64> {
        let k = self.modes();
        (0..k)
            .map(|j| {
                let row = &self.synth[j * k..(j + 1) * k];
                row.iter().zip(v.coeffs()).map(|(s, c)| s * c).sum()
            })
            .collect()
    }

    /// Point values at the collocation nodes -> coefficients (DST-I analysis).
    pub fn from_point_values(&self, u: &[f64]) -> Result<StateVector> {
        let k = self.modes();
        if u.len() != k {
            return Err(Error::GridMismatch(format!(
                "{} point values for {} nodes",
                u.len(),
                k
            )));
        }
        let scale = 2.0 / (k + 1) as f64;
        let coeffs = (0..k)
            .map(|m| {
                scale
                    * u.iter()
                        .enumerate()
                        .map(|(j, uj)| self.synth[j * k + m] * uj)
                        .sum::<f64>()
            })
            .collect();
        Ok(StateVector { coeffs })
    }

    /// Residual of `A int_0^t S(r) v dr = S(t) v - v`, measured in `E_0`.
    ///
    /// The integral is evaluated in closed form per mode, so the residual is
    /// pure round-off for this model.
    pub fn generator_integral_identity(&self, t: f64, v: &StateVector) -> Result<f64> {
        if t <= 0.0 {
            return Err(Error::InvalidArgument(format!("nonpositive time {t}")));
        }
        self.check_dim(v)?;
        let mut sq = 0.0;
        for (mu, c) in self.eigenvalues.iter().zip(v.coeffs()) {
            // A * int_0^t e^{-mu r} dr * v_k = -(1 - e^{-mu t}) v_k
            let lhs = -(1.0 - (-mu * t).exp()) * c;
            let rhs = ((-mu * t).exp() - 1.0) * c;
            sq += (lhs - rhs) * (lhs - rhs);
        }
        Ok(sq.sqrt())
    }

    /// Measured smoothing constant: `sup t^{lambda-zeta} |S(t)v|_lambda / |v|_zeta`
    /// over a time grid and a probe set.
    pub fn semigroup_smoothing_constant(
        &self,
        zeta: ScaleIndex,
        lambda: ScaleIndex,
        t_grid: &[f64],
        probes: &[StateVector],
    ) -> Result<f64> {
        if zeta.value() > lambda.value() {
            return Err(Error::InvalidArgument(
                "smoothing constant requires zeta <= lambda".into(),
            ));
        }
        if probes.is_empty() {
            return Err(Error::InvalidArgument("empty probe set".into()));
        }
        let mut sup: f64 = 0.0;
        for v in probes {
            let denom = self.scale_norm(zeta, v);
            if denom == 0.0 {
                continue;
            }
            for &t in t_grid {
                let sv = self.semigroup_apply(t, v)?;
                let ratio = t.powf(lambda.value() - zeta.value()) * self.scale_norm(lambda, &sv)
                    / denom;
                sup = sup.max(ratio);
            }
        }
        Ok(sup)
    }

    /// Measured increment constant: `sup t^{nu-mu} |(S(t)-I)v|_nu / |v|_mu`,
    /// `mu > nu`, over a time grid and a probe set.
    pub fn semigroup_increment_constant(
        &self,
        mu: ScaleIndex,
        nu: ScaleIndex,
        t_grid: &[f64],
        probes: &[StateVector],
    ) -> Result<f64> {
        if mu.value() <= nu.value() {
            return Err(Error::InvalidArgument(
                "increment constant requires mu > nu".into(),
            ));
        }
        if probes.is_empty() {
            return Err(Error::InvalidArgument("empty probe set".into()));
        }
        let mut sup: f64 = 0.0;
        for v in probes {
            let denom = self.scale_norm(mu, v);
            if denom == 0.0 {
                continue;
            }
            for &t in t_grid {
                if t <= 0.0 {
                    continue;
                }
                let diff = self.semigroup_apply(t, v)?.sub(v);
                let ratio =
                    t.powf(nu.value() - mu.value()) * self.scale_norm(nu, &diff) / denom;
                sup = sup.max(ratio);
            }
        }
        Ok(sup)
    }

    /// Both measured constants of the semigroup scale estimates for the index
    /// pair `(zeta, lambda)`: the smoothing constant for `zeta -> lambda` and
    /// the increment constant with the arguments reused as `(mu, nu) =
    /// (lambda, zeta)`.
    pub fn verify_semigroup_bounds(
        &self,
        zeta: ScaleIndex,
        lambda: ScaleIndex,
        t_grid: &[f64],
        probes: &[StateVector],
    ) -> Result<(f64, f64)> {
        let l_hat = self.semigroup_smoothing_constant(zeta, lambda, t_grid, probes)?;
        let c_hat = self.semigroup_increment_constant(lambda, zeta, t_grid, probes)?;
        Ok((l_hat, c_hat))
    }
}

/// Pointwise multiplication operator `G`.
#[derive(Debug, Clone, PartialEq)]
pub enum MultOperator {
    /// Acts mode-by-mode: `(g_k v_k)`. Commutes with the semigroup exactly.
    Diagonal(Vec<f64>),
    /// Acts on point values at the collocation nodes: synthesize, multiply by
    /// the stored symbol values, analyze back. Aliasing at truncation level is
    /// accepted and quantified by the fine-quadrature oracle.
    Collocation(Vec<f64>),
}

impl MultOperator {
    pub fn diagonal(data: Vec<f64>) -> Self {
        Self::Diagonal(data)
    }

    pub fn collocation(model: &ScaleModel, symbol: impl Fn(f64) -> f64) -> Self {
        Self::Collocation(model.collocation_points().iter().map(|&xi| symbol(xi)).collect())
    }

    pub fn zero(modes: usize) -> Self {
        Self::Diagonal(vec![0.0; modes])
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self, Self::Diagonal(_))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Diagonal(d) => d.iter().all(|&g| g == 0.0),
            Self::Collocation(d) => d.iter().all(|&g| g == 0.0),
        }
    }

    pub fn apply(&self, model: &ScaleModel, v: &StateVector) -> Result<StateVector> {
        model.check_dim(v)?;
        match self {
            Self::Diagonal(data) => {
                if data.len() != model.modes() {
                    return Err(Error::GridMismatch("diagonal symbol length".into()));
                }
                StateVector::new(data.iter().zip(v.coeffs()).map(|(g, c)| g * c).collect())
            }
            Self::Collocation(data) => {
                if data.len() != model.modes() {
                    return Err(Error::GridMismatch("collocation symbol length".into()));
                }
                let mut u = model.to_point_values(v);
                for (uj, g) in u.iter_mut().zip(data) {
                    *uj *= g;
                }
                model.from_point_values(&u)
            }
        }
    }

    /// `G` applied twice.
    pub fn apply_squared(&self, model: &ScaleModel, v: &StateVector) -> Result<StateVector> {
        let gv = self.apply(model, v)?;
        self.apply(model, &gv)
    }
}

/// Commutator `[G, a(s,t)] v` with `a(s,t) = S(t-s) - I`; identically zero for
/// diagonal `G`.
pub fn commutator_apply(
    model: &ScaleModel,
    g: &MultOperator,
    s: f64,
    t: f64,
    v: &StateVector,
) -> Result<StateVector> {
    if s > t {
        return Err(Error::InvalidArgument(format!(
            "unordered times s={s} > t={t}"
        )));
    }
    // [G, S(dt)-I] = [G, S(dt)] = G S(dt) - S(dt) G
    let dt = t - s;
    let sv = model.semigroup_apply(dt, v)?;
    let gsv = g.apply(model, &sv)?;
    let gv = g.apply(model, v)?;
    let sgv = model.semigroup_apply(dt, &gv)?;
    Ok(gsv.sub(&sgv))
}

/// Seeded Gaussian probe vectors, each normalized to unit norm in `E_source`.
pub fn gaussian_probes(
    model: &ScaleModel,
    source: ScaleIndex,
    count: usize,
    seed: u64,
) -> Vec<StateVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probes = Vec::with_capacity(count);
    for _ in 0..count {
        let coeffs: Vec<f64> = (0..model.modes())
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let v = StateVector { coeffs };
        let n = model.scale_norm(source, &v);
        probes.push(v.scaled(1.0 / n));
    }
    probes
}

/// Gaussian probes plus the eigenbasis vectors; the basis vectors pin the
/// exact per-mode suprema, which keeps the measured constants stable under
/// probe-set doubling.
pub fn probe_set(model: &ScaleModel, source: ScaleIndex, count: usize, seed: u64) -> Vec<StateVector> {
    let mut probes = gaussian_probes(model, source, count, seed);
    for k in 0..model.modes() {
        let mut coeffs = vec![0.0; model.modes()];
        coeffs[k] = 1.0;
        let v = StateVector { coeffs };
        let n = model.scale_norm(source, &v);
        probes.push(v.scaled(1.0 / n));
    }
    probes
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn probe(model: &ScaleModel, seed: u64) -> StateVector {
        gaussian_probes(model, ScaleIndex::new(0.0).unwrap(), 1, seed)
            .pop()
            .unwrap()
    }

    #[test]
    fn semigroup_identity_at_zero() {
        let m = ScaleModel::dirichlet(8);
        let v = probe(&m, 1);
        let sv = m.semigroup_apply(0.0, &v).unwrap();
        assert_eq!(sv, v);
    }

    #[test]
    fn semigroup_one_mode_analytic() {
        let m = ScaleModel::dirichlet(1);
        let v = StateVector::new(vec![1.0]).unwrap();
        let sv = m.semigroup_apply(1.0, &v).unwrap();
        assert_relative_eq!(sv.coeffs()[0], (-1.0f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn semigroup_law() {
        let m = ScaleModel::dirichlet(16);
        for seed in 0..10u64 {
            let v = probe(&m, seed);
            for &s in &[0.1, 0.3] {
                for &t in &[0.1, 0.3] {
                    let a = m
                        .semigroup_apply(s, &m.semigroup_apply(t, &v).unwrap())
                        .unwrap();
                    let b = m.semigroup_apply(s + t, &v).unwrap();
                    assert!(a.sub(&b).norm() <= 1e-14 * v.norm());
                }
            }
        }
    }

    #[test]
    fn negative_time_rejected() {
        let m = ScaleModel::dirichlet(2);
        let v = StateVector::zeros(2);
        assert!(m.semigroup_apply(-0.1, &v).is_err());
    }

    #[test]
    fn scale_norm_values() {
        let m = ScaleModel::dirichlet(1);
        let v = StateVector::new(vec![1.0]).unwrap();
        let l0 = ScaleIndex::new(0.0).unwrap();
        let l1 = ScaleIndex::new(1.0).unwrap();
        assert_relative_eq!(m.scale_norm(l0, &v), 1.0);
        assert_relative_eq!(m.scale_norm(l1, &v), 2.0);
        assert!(ScaleIndex::new(3.0).is_err());
        assert!(ScaleIndex::new(-0.1).is_err());
    }

    #[test]
    fn scale_norm_monotone_in_index() {
        let m = ScaleModel::dirichlet(16);
        let lo = ScaleIndex::new(0.25).unwrap();
        let hi = ScaleIndex::new(0.75).unwrap();
        for seed in 0..100u64 {
            let v = probe(&m, seed);
            assert!(m.scale_norm(lo, &v) <= m.scale_norm(hi, &v));
        }
    }

    #[test]
    fn mult_identity_and_diagonal() {
        let m = ScaleModel::dirichlet(4);
        let one = MultOperator::diagonal(vec![1.0; 4]);
        let v = StateVector::new(vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        assert_eq!(one.apply(&m, &v).unwrap(), v);

        let g = MultOperator::diagonal(vec![2.0, 0.0, 0.0, 0.0]);
        let w = StateVector::new(vec![1.0; 4]).unwrap();
        let gw = g.apply(&m, &w).unwrap();
        assert_eq!(gw.coeffs(), &[2.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn collocation_roundtrip_is_identity() {
        let m = ScaleModel::dirichlet(16);
        let v = probe(&m, 7);
        let u = m.to_point_values(&v);
        let back = m.from_point_values(&u).unwrap();
        assert!(back.sub(&v).norm() <= 1e-12);
    }

    /// Fine-quadrature oracle for a collocation product whose sine expansion
    /// is exactly band-limited: g(xi) = cos(xi) sends mode k to modes k-1 and
    /// k+1, and mode K+1 vanishes at the K collocation nodes, so the K-node
    /// result matches the dense analysis to round-off.
    #[test]
    fn collocation_cos_matches_fine_quadrature() {
        let k = 16usize;
        let m = ScaleModel::dirichlet(k);
        let g = MultOperator::collocation(&m, |xi| xi.cos());
        let v = probe(&m, 3);
        let gv = g.apply(&m, &v).unwrap();

        // Dense oracle: synthesize on a 4x finer node set, multiply, analyze.
        let fine = 4 * (k + 1) - 1;
        let pi = std::f64::consts::PI;
        let mut coeffs = vec![0.0; k];
        for (mode, c) in coeffs.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 1..=fine {
                let xi = j as f64 * pi / (fine + 1) as f64;
                let u: f64 = v
                    .coeffs()
                    .iter()
                    .enumerate()
                    .map(|(i, vi)| vi * ((i + 1) as f64 * xi).sin())
                    .sum();
                acc += u * xi.cos() * (((mode + 1) as f64) * xi).sin();
            }
            *c = 2.0 / (fine + 1) as f64 * acc;
        }
        let oracle = StateVector::new(coeffs).unwrap();
        assert!(gv.sub(&oracle).norm() / oracle.norm() <= 1e-8);
    }

    /// With g(xi) = sin(xi) the product leaves the truncated sine span, so the
    /// collocation result only agrees with the dense oracle up to aliasing;
    /// the gap must shrink roughly like K^-2 under mode doubling.
    #[test]
    fn collocation_sin_aliasing_decays_with_modes() {
        let pi = std::f64::consts::PI;
        let mut errs = Vec::new();
        for &k in &[16usize, 32, 64] {
            let m = ScaleModel::dirichlet(k);
            let g = MultOperator::collocation(&m, |xi| xi.sin());
            // Fixed smooth test function, independent of K.
            let u_fun = |xi: f64| xi.sin() + 0.5 * (2.0 * xi).sin();
            let u: Vec<f64> = m.collocation_points().iter().map(|&xi| u_fun(xi)).collect();
            let v = m.from_point_values(&u).unwrap();
            let gv = g.apply(&m, &v).unwrap();

            let fine = 16 * (k + 1) - 1;
            let mut coeffs = vec![0.0; k];
            for (mode, c) in coeffs.iter_mut().enumerate() {
                let mut acc = 0.0;
                for j in 1..=fine {
                    let xi = j as f64 * pi / (fine + 1) as f64;
                    acc += u_fun(xi) * xi.sin() * (((mode + 1) as f64) * xi).sin();
                }
                *c = 2.0 / (fine + 1) as f64 * acc;
            }
            let oracle = StateVector::new(coeffs).unwrap();
            errs.push(gv.sub(&oracle).norm() / oracle.norm());
        }
        assert!(errs[1] < errs[0] && errs[2] < errs[1], "errs = {errs:?}");
        assert!(errs[2] < 0.5 * errs[0]);
    }

    #[test]
    fn commutator_zero_for_diagonal_and_coincident_times() {
        let m = ScaleModel::dirichlet(8);
        let v = probe(&m, 11);
        let gd = MultOperator::diagonal((1..=8).map(|k| 1.0 / k as f64).collect());
        let c = commutator_apply(&m, &gd, 0.1, 0.7, &v).unwrap();
        assert!(c.norm() <= 1e-14);

        let gc = MultOperator::collocation(&m, |xi| xi.sin());
        let c0 = commutator_apply(&m, &gc, 0.4, 0.4, &v).unwrap();
        assert!(c0.norm() <= 1e-14);
        assert!(commutator_apply(&m, &gc, 0.5, 0.4, &v).is_err());
    }

    /// Empirical commutator bound: |[G, a(s,t)] v|_0 <= C (t-s)^alpha for v
    /// normalized in E_alpha, with C stable across dyadic gaps.
    #[test]
    fn commutator_scale_bound_stable() {
        let m = ScaleModel::dirichlet(16);
        let g = MultOperator::collocation(&m, |xi| xi.sin());
        let alpha = ScaleIndex::new(0.25).unwrap();
        let probes = gaussian_probes(&m, alpha, 20, 5);
        let mut ratios = Vec::new();
        for p in 4..=10u32 {
            let dt = 2.0f64.powi(-(p as i32));
            let mut sup: f64 = 0.0;
            for v in &probes {
                let c = commutator_apply(&m, &g, 0.0, dt, v).unwrap();
                sup = sup.max(c.norm() / dt.powf(alpha.value()));
            }
            ratios.push(sup);
        }
        let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
        let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max.is_finite() && max / min < 10.0, "ratios = {ratios:?}");
    }

    #[test]
    fn smoothing_constants_finite_and_bounded() {
        let m = ScaleModel::dirichlet(16);
        let l0 = ScaleIndex::new(0.0).unwrap();
        let lh = ScaleIndex::new(0.5).unwrap();
        let t_grid: Vec<f64> = (0..64).map(|i| 1e-4 * 1.2f64.powi(i)).collect();
        let probes = probe_set(&m, l0, 32, 9);
        // zeta = lambda: diagonal entries <= 1, so L-hat <= 1.
        let same = m
            .semigroup_smoothing_constant(l0, l0, &t_grid, &probes)
            .unwrap();
        assert!(same <= 1.0 + 1e-12);

        let (l_hat, c_hat) = m.verify_semigroup_bounds(l0, lh, &t_grid, &probes).unwrap();
        assert!(l_hat.is_finite() && l_hat > 0.0);
        assert!(c_hat.is_finite() && c_hat > 0.0);
        // Scalar calculus bound for mu=1, nu=0: sup (1-e^-x)/x = 1 modulo the
        // weight (1+mu_k)/mu_k <= 2 on the first mode.
        let l1 = ScaleIndex::new(1.0).unwrap();
        let c10 = m
            .semigroup_increment_constant(l1, l0, &t_grid, &probes)
            .unwrap();
        assert!(c10 <= 2.0 + 1e-12, "c10 = {c10}");
    }

    #[test]
    fn generator_integral_identity_roundoff() {
        let m = ScaleModel::dirichlet(16);
        let v = probe(&m, 2);
        assert!(m.generator_integral_identity(1.0, &v).unwrap() <= 1e-13);
        assert_eq!(
            m.generator_integral_identity(0.5, &StateVector::zeros(16))
                .unwrap(),
            0.0
        );
        assert!(m.generator_integral_identity(0.0, &v).is_err());
    }

    /// Quadrature cross-check of the closed-form integral of the semigroup:
    /// trapezoid with 2^12 points against (1 - e^{-mu t}) / mu per mode.
    #[test]
    fn semigroup_integral_quadrature_oracle() {
        let m = ScaleModel::dirichlet(16);
        let t = 1.0;
        let n = 1 << 12;
        let dt = t / n as f64;
        for (k, &mu) in m.eigenvalues().iter().enumerate() {
            let mut acc = 0.0;
            for i in 0..n {
                let a = (-(mu) * (i as f64 * dt)).exp();
                let b = (-(mu) * ((i + 1) as f64 * dt)).exp();
                acc += 0.5 * (a + b) * dt;
            }
            let closed = (1.0 - (-mu * t).exp()) / mu;
            // trapezoid error bound: relative error about (h mu)^2 / 12
            let bound = dt * dt * mu * mu / 6.0 + 1e-12;
            assert!(
                (acc - closed).abs() / closed <= bound,
                "mode {k}: {acc} vs {closed}"
            );
        }
    }
}
