//! Cross-checks connecting the rough machinery to classical calculus:
//! smooth-path approximation, the integral representation of the solution,
//! lift sensitivity, a change-of-variable (Ito-type) residual, and
//! convergence-rate fitting.

use crate::error::{Error, Result};
use crate::rough_path::{Lift, LiftKind, ScalarPath, ShiftFunction};
use crate::scale_model::{MultOperator, ScaleIndex, ScaleModel, StateVector};
use crate::sewing::{conv_integral, xx_continuous, ControlFlag, ControlledFunction, Propagator};
use crate::solver::{euler_solve, MildSolution, Provenance, SolverConfig};

/// Observables F : E -> E for the change-of-variable formula, with explicit
/// first and second derivatives acting through collocation point values.
/// The quadratic observable violates global boundedness but satisfies the
/// needed bounds on the range of desk-scale solutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservableF {
    Linear,
    /// v -> v^2 pointwise on the collocation nodes.
    QuadraticPointwise,
}

impl ObservableF {
    pub fn eval(&self, model: &ScaleModel, v: &StateVector) -> Result<StateVector> {
        match self {
            Self::Linear => Ok(v.clone()),
            Self::QuadraticPointwise => {
                let mut u = model.to_point_values(v);
                for p in u.iter_mut() {
                    *p *= *p;
                }
                model.from_point_values(&u)
            }
        }
    }

    /// Derivative action F_x(v)[w].
    pub fn fx_apply(&self, model: &ScaleModel, v: &StateVector, w: &StateVector) -> Result<StateVector> {
        match self {
            Self::Linear => Ok(w.clone()),
            Self::QuadraticPointwise => {
                let pv = model.to_point_values(v);
                let mut pw = model.to_point_values(w);
                for (a, b) in pw.iter_mut().zip(&pv) {
                    *a *= 2.0 * b;
                }
                model.from_point_values(&pw)
            }
        }
    }

    /// Second-derivative action F_xx(v)[w1, w2].
    pub fn fxx_apply(
        &self,
        model: &ScaleModel,
        _v: &StateVector,
        w1: &StateVector,
        w2: &StateVector,
    ) -> Result<StateVector> {
        match self {
            Self::Linear => Ok(StateVector::zeros(w1.dim())),
            Self::QuadraticPointwise => {
                let p1 = model.to_point_values(w1);
                let mut p2 = model.to_point_values(w2);
                for (a, b) in p2.iter_mut().zip(&p1) {
                    *a *= 2.0 * b;
                }
                model.from_point_values(&p2)
            }
        }
    }
}

/// Sup over collocation nodes, the native norm when E is a space of bounded
/// functions.
pub fn sup_point_norm(model: &ScaleModel, v: &StateVector) -> f64 {
    model
        .to_point_values(v)
        .iter()
        .fold(0.0f64, |m, p| m.max(p.abs()))
}

/// Classical mild solve for a C^1-grade driver: exponential Euler with
/// `refine` substeps per grid cell, the driver read off by linear
/// interpolation. Serves as the smooth-path oracle.
pub fn classical_solve(
    model: &ScaleModel,
    g: &MultOperator,
    psi: &StateVector,
    x_smooth: &ScalarPath,
    refine: usize,
) -> Result<MildSolution> {
    if refine < 4 {
        return Err(Error::InvalidArgument(format!(
            "refine {refine} below the minimum of 4 substeps"
        )));
    }
    let grid = x_smooth.grid();
    let hs = grid.h() / refine as f64;
    let factors: Vec<f64> = model
        .eigenvalues()
        .iter()
        .map(|mu| (-mu * hs).exp())
        .collect();
    let mut values = Vec::with_capacity(grid.len());
    values.push(psi.clone());
    let mut y = psi.clone();
    for k in 0..grid.steps() {
        let t0 = grid.point(k);
        for j in 0..refine {
            let a = t0 + j as f64 * hs;
            let b = a + hs;
            let dx = x_smooth.eval(b) - x_smooth.eval(a);
            let gy = g.apply(model, &y)?;
            let ggy = g.apply(model, &gy)?;
            y.add_scaled(dx, &gy);
            y.add_scaled(0.5 * dx * dx, &ggy);
            y.mul_components(&factors);
            if !y.is_finite() {
                return Err(Error::Numerical(format!(
                    "classical solve overflow in cell {k}"
                )));
            }
        }
        values.push(y.clone());
    }
    let deriv = values
        .iter()
        .map(|v| g.apply(model, v))
        .collect::<Result<Vec<_>>>()?;
    Ok(MildSolution::from_parts(
        grid,
        values,
        deriv,
        Provenance::Euler,
    ))
}

/// Rows of (parameter, error) with a fitted log-log slope.
#[derive(Debug, Clone)]
pub struct RateTable {
    pub rows: Vec<(f64, f64)>,
    pub slope: f64,
    /// Root mean square residual of the log-log fit.
    pub fit_residual: f64,
}

/// Least-squares slope of log(error) against log(parameter).
pub fn rate_fit(rows: &[(f64, f64)]) -> Result<(f64, f64)> {
    if rows.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "rate fit needs at least 3 rows, got {}",
            rows.len()
        )));
    }
    if rows.iter().any(|&(p, e)| p <= 0.0 || e <= 0.0) {
        return Err(Error::InvalidArgument(
            "rate fit requires positive parameters and errors".into(),
        ));
    }
    let n = rows.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(p, e) in rows {
        let x = p.ln();
        let y = e.ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-14 {
        return Err(Error::InvalidArgument(
            "rate fit parameters are degenerate".into(),
        ));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let mut rss = 0.0;
    for &(p, e) in rows {
        let r = e.ln() - (slope * p.ln() + intercept);
        rss += r * r;
    }
    Ok((slope, (rss / n).sqrt()))
}

impl RateTable {
    pub fn fit(rows: Vec<(f64, f64)>) -> Result<Self> {
        let (slope, fit_residual) = rate_fit(&rows)?;
        Ok(Self {
            rows,
            slope,
            fit_residual,
        })
    }
}

/// Adaptive Simpson quadrature for a vector-valued integrand; the local
/// acceptance test is on the Euclidean norm of the Richardson gap.
pub fn adaptive_simpson(
    f: &dyn Fn(f64) -> Result<StateVector>,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<StateVector> {
    fn simpson(fa: &StateVector, fm: &StateVector, fb: &StateVector, len: f64) -> StateVector {
        let mut s = fa.add(fb);
        s.add_scaled(4.0, fm);
        s.scaled(len / 6.0)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> Result<StateVector>,
        a: f64,
        b: f64,
        fa: &StateVector,
        fm: &StateVector,
        fb: &StateVector,
        whole: &StateVector,
        tol: f64,
        depth: usize,
    ) -> Result<StateVector> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm)?;
        let frm = f(rm)?;
        let left = simpson(fa, &flm, fm, m - a);
        let right = simpson(fm, &frm, fb, b - m);
        let refined = left.add(&right);
        let gap = refined.sub(whole).norm();
        if gap <= 15.0 * tol || depth == 0 {
            // standard Richardson correction
            let correction = refined.sub(whole);
            let mut out = refined;
            out.add_scaled(1.0 / 15.0, &correction);
            return Ok(out);
        }
        let l = recurse(f, a, m, fa, &flm, fm, &left, 0.5 * tol, depth - 1)?;
        let r = recurse(f, m, b, fm, &frm, fb, &right, 0.5 * tol, depth - 1)?;
        Ok(l.add(&r))
    }
    if !(a < b) {
        return Err(Error::InvalidArgument("empty quadrature interval".into()));
    }
    let fa = f(a)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let fb = f(b)?;
    let whole = simpson(&fa, &fm, &fb, b - a);
    recurse(f, a, b, &fa, &fm, &fb, &whole, tol, 40)
}

/// y inside the first grid cell, reached by `substeps` exponential Euler
/// steps from psi along the interpolated driver.
fn first_cell_value(
    model: &ScaleModel,
    g: &MultOperator,
    lift: &Lift,
    psi: &StateVector,
    t: f64,
    substeps: usize,
) -> Result<StateVector> {
    let mut y = psi.clone();
    let hs = t / substeps as f64;
    let factors: Vec<f64> = model
        .eigenvalues()
        .iter()
        .map(|mu| (-mu * hs).exp())
        .collect();
    for j in 0..substeps {
        let a = j as f64 * hs;
        let b = a + hs;
        let dx = lift.path().eval(b) - lift.path().eval(a);
        let xx = xx_continuous(lift, a, b);
        let gy = g.apply(model, &y)?;
        let ggy = g.apply(model, &gy)?;
        y.add_scaled(dx, &gy);
        y.add_scaled(xx, &ggy);
        y.mul_components(&factors);
    }
    Ok(y)
}

/// Cumulative plain time integral of phi(y(u)) over [0, t_k] for every k.
/// Trapezoid on whole cells; the first cell is refined geometrically down to
/// t_1 / 2^8 to resolve the integrable start-up singularity of Ay.
fn time_integral_profile(
    model: &ScaleModel,
    g: &MultOperator,
    lift: &Lift,
    sol: &MildSolution,
    phi: &dyn Fn(&StateVector) -> Result<StateVector>,
) -> Result<Vec<StateVector>> {
    let grid = sol.grid();
    let dim = sol.value(0).dim();
    let mut out = Vec::with_capacity(grid.len());
    out.push(StateVector::zeros(dim));

    // graded nodes t_1 * 2^{-8}, ..., t_1, plus 0 itself
    let t1 = grid.point(1);
    let mut acc = StateVector::zeros(dim);
    let mut prev_t = 0.0;
    let mut prev_phi = phi(sol.value(0))?;
    for j in (0..=8u32).rev() {
        let t = t1 * 0.5f64.powi(j as i32);
        let y = if j == 0 {
            sol.value(1).clone()
        } else {
            first_cell_value(model, g, lift, sol.value(0), t, 8)?
        };
        let cur_phi = phi(&y)?;
        let w = 0.5 * (t - prev_t);
        acc.add_scaled(w, &prev_phi);
        acc.add_scaled(w, &cur_phi);
        prev_t = t;
        prev_phi = cur_phi;
    }
    out.push(acc.clone());

    let h = grid.h();
    let mut phi_prev = prev_phi;
    for k in 2..grid.len() {
        let phi_cur = phi(sol.value(k))?;
        acc.add_scaled(0.5 * h, &phi_prev);
        acc.add_scaled(0.5 * h, &phi_cur);
        out.push(acc.clone());
        phi_prev = phi_cur;
    }
    Ok(out)
}

/// Residual profile of the pathwise representation
/// y(t) = psi + int_0^t A y ds + rough_integral(G y)(0, t).
#[derive(Debug, Clone)]
pub struct ReprResidual {
    /// (t_k, absolute residual in E_0) for k >= 1.
    pub profile: Vec<(f64, f64)>,
    pub max_abs: f64,
    /// max_abs relative to the solution's sup norm.
    pub max_rel: f64,
}

pub fn integral_representation_residual(
    model: &ScaleModel,
    g: &MultOperator,
    sol: &MildSolution,
    lift: &Lift,
    _cfg: &SolverConfig,
) -> Result<ReprResidual> {
    if lift.kind() != LiftKind::Geometric {
        return Err(Error::InvalidArgument(
            "the integral representation requires a geometric lift".into(),
        ));
    }
    if sol.grid() != lift.grid() {
        return Err(Error::GridMismatch("solution and lift grids differ".into()));
    }
    let drift = time_integral_profile(model, g, lift, sol, &|y| model.apply_generator(y))?;
    // rough term: integrand Gy with plain (untwisted) derivative G^2 y
    let gy = sol.controlled().compose_mult(model, g)?;
    let ggy_values = gy
        .values()
        .iter()
        .map(|v| g.apply(model, v))
        .collect::<Result<Vec<_>>>()?;
    let f = ControlledFunction::new(sol.grid(), gy.values().to_vec(), ggy_values, ControlFlag::Plain)?;
    let rough = conv_integral(&Propagator::Identity, &f, lift)?;

    let psi = sol.value(0);
    let sup_y = sol
        .values()
        .iter()
        .map(StateVector::norm)
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let mut profile = Vec::with_capacity(sol.grid().steps());
    let mut max_abs: f64 = 0.0;
    for k in 1..sol.grid().len() {
        let mut rhs = psi.add(&drift[k]);
        rhs = rhs.add(rough.value(k));
        let r = sol.value(k).sub(&rhs).norm();
        max_abs = max_abs.max(r);
        profile.push((sol.grid().point(k), r));
    }
    Ok(ReprResidual {
        profile,
        max_abs,
        max_rel: max_abs / sup_y,
    })
}

/// Gap between the convolution integrals under a shifted and a geometric
/// lift, compared against the trapezoid quadrature of
/// int_0^t S(t-r) f-check(r) h'(r) dr.
#[derive(Debug, Clone)]
pub struct LiftGap {
    pub sup_gap: f64,
    /// sup_k |gap_k - quadrature_k| relative to sup_k |quadrature_k|.
    pub rel_err: f64,
}

pub fn lift_sensitivity(
    model: &ScaleModel,
    f: &ControlledFunction,
    x: &ScalarPath,
    shift: &ShiftFunction,
) -> Result<LiftGap> {
    let hprime = shift.derivative().ok_or_else(|| {
        Error::InvalidArgument("lift sensitivity needs a shift with a known derivative".into())
    })?;
    let grid = f.grid();
    if grid != x.grid() {
        return Err(Error::GridMismatch("integrand and path grids differ".into()));
    }
    let prop = Propagator::Semigroup(model);
    let geo = conv_integral(&prop, f, &Lift::geometric(x.clone()))?;
    let shifted = conv_integral(&prop, f, &Lift::shifted(x.clone(), shift.clone())?)?;

    // quadrature of the drift correction, trapezoid in r per terminal time
    let h = grid.h();
    let factors: Vec<f64> = model
        .eigenvalues()
        .iter()
        .map(|mu| (-mu * h).exp())
        .collect();
    let mut quad = Vec::with_capacity(grid.len());
    quad.push(StateVector::zeros(f.value(0).dim()));
    for k in 0..grid.steps() {
        // Q_{k+1} = S(h) (Q_k + trapezoid of f-check h' over [t_k, t_{k+1}])
        let mut inc = f.deriv(k).scaled(0.5 * h * hprime[k]);
        inc.add_scaled(0.5 * h * hprime[k + 1], f.deriv(k + 1));
        let mut q: StateVector = quad[k].add(&inc);
        q.mul_components(&factors);
        quad.push(q);
    }

    let mut sup_gap: f64 = 0.0;
    let mut sup_err: f64 = 0.0;
    let mut sup_quad: f64 = 0.0;
    for k in 0..grid.len() {
        let gap = shifted.value(k).sub(geo.value(k));
        sup_gap = sup_gap.max(gap.norm());
        sup_err = sup_err.max(gap.sub(&quad[k]).norm());
        sup_quad = sup_quad.max(quad[k].norm());
    }
    let rel_err = if sup_quad == 0.0 {
        sup_err
    } else {
        sup_err / sup_quad
    };
    Ok(LiftGap { sup_gap, rel_err })
}

/// Residual of the change-of-variable formula between grid times s and t:
/// F(y(t)) - F(y(s)) - int_s^t <F_x, Ay> du - rough_integral of <F_x, Gy>.
#[derive(Debug, Clone)]
pub struct ItoResidual {
    pub residual: f64,
    /// Residual relative to the sup of |F(y(t))| and |F(y(s))|.
    pub relative: f64,
}

pub fn ito_residual(
    model: &ScaleModel,
    g: &MultOperator,
    fobs: ObservableF,
    sol: &MildSolution,
    lift: &Lift,
    s_idx: usize,
    t_idx: usize,
) -> Result<ItoResidual> {
    if lift.kind() != LiftKind::Geometric {
        return Err(Error::InvalidArgument(
            "the change-of-variable residual requires a geometric lift".into(),
        ));
    }
    if s_idx >= t_idx || t_idx >= sol.grid().len() {
        return Err(Error::InvalidArgument(format!(
            "invalid index pair ({s_idx}, {t_idx})"
        )));
    }
    let ys = sol.value(s_idx);
    let yt = sol.value(t_idx);
    let lhs = fobs.eval(model, yt)?.sub(&fobs.eval(model, ys)?);

    // time integral of <F_x(y), A y>
    let phi = |y: &StateVector| -> Result<StateVector> {
        let ay = model.apply_generator(y)?;
        fobs.fx_apply(model, y, &ay)
    };
    let drift_profile = time_integral_profile(model, g, lift, sol, &phi)?;
    let drift = drift_profile[t_idx].sub(&drift_profile[s_idx]);

    // rough integral of h(r) = <F_x(y), Gy> with plain derivative
    // <F_x, G^2 y> + <F_xx Gy, Gy>
    let grid = sol.grid();
    let mut hv = Vec::with_capacity(grid.len());
    let mut hd = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let y = sol.value(k);
        let gy = g.apply(model, y)?;
        let ggy = g.apply(model, &gy)?;
        hv.push(fobs.fx_apply(model, y, &gy)?);
        let mut d = fobs.fx_apply(model, y, &ggy)?;
        d = d.add(&fobs.fxx_apply(model, y, &gy, &gy)?);
        hd.push(d);
    }
    let hf = ControlledFunction::new(grid, hv, hd, ControlFlag::Plain)?;
    let rough_profile = conv_integral(&Propagator::Identity, &hf, lift)?;
    let rough = rough_profile.value(t_idx).sub(rough_profile.value(s_idx));

    let res = lhs.sub(&drift).sub(&rough);
    let residual = sup_point_norm(model, &res);
    let scale = sup_point_norm(model, &fobs.eval(model, yt)?)
        .max(sup_point_norm(model, &fobs.eval(model, ys)?))
        .max(1e-300);
    Ok(ItoResidual {
        residual,
        relative: residual / scale,
    })
}

/// Smooth-path approximation study: for each mollification width, solve
/// classically along the smoothed driver and compare against the rough
/// solution with the geometric lift of the raw driver.
#[derive(Debug, Clone)]
pub struct WongZakaiStudy {
    /// (width, sup error in E_0, sup error in E_alpha).
    pub rows: Vec<(f64, f64, f64)>,
    pub table: RateTable,
}

pub fn wong_zakai(
    model: &ScaleModel,
    g: &MultOperator,
    psi: &StateVector,
    x: &ScalarPath,
    widths: &[f64],
    cfg: &SolverConfig,
) -> Result<WongZakaiStudy> {
    if widths.len() < 3 || widths.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument(
            "need at least 3 strictly decreasing widths".into(),
        ));
    }
    let lift = Lift::geometric(x.clone());
    let rough = euler_solve(model, g, &lift, psi)?;
    let alpha = ScaleIndex::new(cfg.alpha)?;
    let zero = ScaleIndex::new(0.0)?;
    let mut rows = Vec::with_capacity(widths.len());
    for &w in widths {
        let xm = x.mollify(w)?;
        let smooth = classical_solve(model, g, psi, &xm, 4)?;
        let mut e0: f64 = 0.0;
        let mut ea: f64 = 0.0;
        for k in 0..x.grid().len() {
            let d = smooth.value(k).sub(rough.value(k));
            e0 = e0.max(model.scale_norm(zero, &d));
            ea = ea.max(model.scale_norm(alpha, &d));
        }
        rows.push((w, e0, ea));
    }
    let table = RateTable::fit(rows.iter().map(|&(w, e0, _)| (w, e0)).collect())?;
    Ok(WongZakaiStudy { rows, table })
}
