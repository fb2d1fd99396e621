//! Numerical checks that do not rely on the Darboux construction: right-hand
//! sides of the nonlinear equations, an RK4 integrator with step-doubling
//! error control, finite-difference residuals and partial-trace monitors.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolution::{homogeneity_constant, TimeSeries};
use crate::matrix::{
    c64, commutator, ensure_same_dim, hermitian_spectrum, hermiticity_defect, kron, partial_trace,
    symmetrize, CMatrix, Subsystem, C64,
};

/// Right-hand side family; each returns `dU/dt` with `i dU/dt = R(U)`.
#[derive(Debug, Clone, PartialEq)]
pub enum RhsKind {
    /// `R = [H, U^2]`.
    Quadratic,
    /// `R = [H, U] + eps [H, U^2]`.
    LinearPlusQuadratic { epsilon: f64 },
    /// `R = C(U) [H, U^2]`, `C = (Tr U / Tr U^3)^(1/2)`.
    Homogeneous,
    /// `R = [H^2 U + H U H + U H^2, U]`.
    Cubic,
    /// `R = [H, U^2] + i U' H + i H U'` with the tau-derivative supplied.
    FullWithTau { u_prime: CMatrix },
}

impl RhsKind {
    pub fn name(&self) -> &'static str {
        match self {
            RhsKind::Quadratic => "quadratic",
            RhsKind::LinearPlusQuadratic { .. } => "linear_plus_quadratic",
            RhsKind::Homogeneous => "homogeneous",
            RhsKind::Cubic => "cubic",
            RhsKind::FullWithTau { .. } => "full_with_tau",
        }
    }

    /// Whether Hermitian data stays Hermitian, so re-symmetrising is exact.
    fn preserves_hermiticity(&self) -> bool {
        !matches!(self, RhsKind::FullWithTau { .. })
    }
}

/// The bracketed right side `R(U)`.
pub fn bracket(kind: &RhsKind, h: &CMatrix, u: &CMatrix) -> Result<CMatrix> {
    ensure_same_dim(h, u, "rhs")?;
    let u2 = u * u;
    Ok(match kind {
        RhsKind::Quadratic => commutator(h, &u2)?,
        RhsKind::LinearPlusQuadratic { epsilon } => {
            commutator(h, u)? + commutator(h, &u2)? * c64(*epsilon, 0.0)
        }
        RhsKind::Homogeneous => commutator(h, &u2)? * c64(homogeneity_constant(u)?, 0.0),
        RhsKind::Cubic => {
            let h2 = h * h;
            commutator(&(&h2 * u + h * u * h + u * &h2), u)?
        }
        RhsKind::FullWithTau { u_prime } => {
            ensure_same_dim(u, u_prime, "rhs u_prime")?;
            let i = c64(0.0, 1.0);
            commutator(h, &u2)? + (u_prime * h + h * u_prime) * i
        }
    })
}

/// `dU/dt = -i R(U)`.
pub fn rhs(kind: &RhsKind, h: &CMatrix, u: &CMatrix) -> Result<CMatrix> {
    Ok(bracket(kind, h, u)? * c64(0.0, -1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rk4Config {
    /// Largest step taken.
    pub step: f64,
    /// Per-step budget on the step-doubling estimate, relative to `1 + |y|`.
    pub tolerance: f64,
    /// Halving stops here with [`Error::StepRejected`].
    pub min_step: f64,
    /// Replace `y` by `(y + y^dagger)/2` after each step.
    pub symmetrize: bool,
}

impl Default for Rk4Config {
    fn default() -> Self {
        Self {
            step: 1e-3,
            tolerance: 1e-9,
            min_step: 1e-8,
            symmetrize: true,
        }
    }
}

/// Trajectory plus integrator diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub series: TimeSeries,
    /// Hermiticity defect removed at each grid point (before re-symmetrising).
    pub hermiticity_defects: Vec<f64>,
    pub steps_taken: usize,
    pub max_error_estimate: f64,
}

fn rk4_step(
    f: &impl Fn(f64, &CMatrix) -> Result<CMatrix>,
    t: f64,
    y: &CMatrix,
    h: f64,
) -> Result<CMatrix> {
    let hc = c64(h, 0.0);
    let half = c64(h / 2.0, 0.0);
    let k1 = f(t, y)?;
    let k2 = f(t + h / 2.0, &(y + &k1 * half))?;
    let k3 = f(t + h / 2.0, &(y + &k2 * half))?;
    let k4 = f(t + h, &(y + &k3 * hc))?;
    Ok(y + (k1 + k2 * c64(2.0, 0.0) + k3 * c64(2.0, 0.0) + k4) * c64(h / 6.0, 0.0))
}

/// Integrates `dy/dt = f(t, y)` from `grid[0]` through every grid point.
/// The grid may run forwards or backwards but must be monotone.
pub fn rk4_path(
    f: impl Fn(f64, &CMatrix) -> Result<CMatrix>,
    y0: &CMatrix,
    grid: &[f64],
    config: &Rk4Config,
) -> Result<Trajectory> {
    if !(config.step > 0.0 && config.min_step > 0.0 && config.tolerance > 0.0) {
        return Err(Error::InvalidArgument(
            "RK4 step, minimum step and tolerance must be positive".into(),
        ));
    }
    let increasing = grid.windows(2).all(|w| w[0] <= w[1]);
    let decreasing = grid.windows(2).all(|w| w[0] >= w[1]);
    if !(increasing || decreasing) {
        return Err(Error::InvalidArgument(
            "integration grid must be monotone".into(),
        ));
    }
    let mut y = y0.clone();
    let mut defects = Vec::with_capacity(grid.len());
    let mut out = Vec::with_capacity(grid.len());
    let mut steps_taken = 0;
    let mut max_err: f64 = 0.0;
    if config.symmetrize {
        defects.push(hermiticity_defect(&y));
        y = symmetrize(&y);
    } else {
        defects.push(0.0);
    }
    out.push(y.clone());
    for w in grid.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let span = t1 - t0;
        let mut t = t0;
        let n = (span.abs() / config.step)
            .ceil()
            .max(if span == 0.0 { 0.0 } else { 1.0 }) as usize;
        let nominal = if n == 0 { 0.0 } else { span / n as f64 };
        let mut defect: f64 = 0.0;
        for k in 0..n {
            let target = if k + 1 == n {
                t1
            } else {
                t0 + nominal * (k + 1) as f64
            };
            // advance from t to target, halving on rejection
            let mut h = target - t;
            while (target - t).abs() > 0.0 {
                if h.abs() > (target - t).abs() {
                    h = target - t;
                }
                let full = rk4_step(&f, t, &y, h)?;
                let mid = rk4_step(&f, t, &y, h / 2.0)?;
                let two = rk4_step(&f, t + h / 2.0, &mid, h / 2.0)?;
                let estimate = (&two - &full).norm() / 15.0;
                let budget = config.tolerance * (1.0 + y.norm());
                if !(estimate <= budget) {
                    if h.abs() / 2.0 < config.min_step {
                        return Err(Error::StepRejected {
                            t,
                            step: h.abs(),
                            estimate,
                        });
                    }
                    h /= 2.0;
                    continue;
                }
                max_err = max_err.max(estimate);
                y = two;
                if config.symmetrize {
                    defect = defect.max(hermiticity_defect(&y));
                    y = symmetrize(&y);
                }
                t = if (target - t - h).abs() <= 1e-15 * target.abs().max(1.0) {
                    target
                } else {
                    t + h
                };
                steps_taken += 1;
            }
        }
        defects.push(defect);
        out.push(y.clone());
    }
    let series = TimeSeries::new(grid.to_vec(), out)?;
    Ok(Trajectory {
        series,
        hermiticity_defects: defects,
        steps_taken,
        max_error_estimate: max_err,
    })
}

/// Integrates `i dU/dt = R(U)` from `u_init` at `grid[0]`.
pub fn rk4_integrate(
    kind: &RhsKind,
    h: &CMatrix,
    u_init: &CMatrix,
    grid: &[f64],
    config: &Rk4Config,
) -> Result<Trajectory> {
    ensure_same_dim(h, u_init, "rk4_integrate")?;
    let mut cfg = *config;
    cfg.symmetrize = config.symmetrize && kind.preserves_hermiticity();
    let mut traj = rk4_path(|_, u| rhs(kind, h, u), u_init, grid, &cfg)?;
    traj.series.labels.insert("rhs".into(), kind.name().into());
    traj.series.labels.insert("source".into(), "rk4".into());
    Ok(traj)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ResidualReport {
    pub times: Vec<f64>,
    pub ode_residual: Vec<f64>,
    pub hermiticity_defect: Vec<f64>,
    pub spectrum_drift: Vec<f64>,
    pub trace_drift: Vec<f64>,
    pub max_ode_residual: f64,
}

impl ResidualReport {
    pub fn max_hermiticity_defect(&self) -> f64 {
        self.hermiticity_defect.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_spectrum_drift(&self) -> f64 {
        self.spectrum_drift.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_trace_drift(&self) -> f64 {
        self.trace_drift.iter().cloned().fold(0.0, f64::max)
    }
}

fn tracks(matrices: &[CMatrix]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mut herm = Vec::with_capacity(matrices.len());
    let mut spec = Vec::with_capacity(matrices.len());
    let mut tr = Vec::with_capacity(matrices.len());
    let Some(first) = matrices.first() else {
        return Ok((herm, spec, tr));
    };
    let s0 = hermitian_spectrum(first)?;
    let tr0 = first.trace();
    for m in matrices {
        herm.push(hermiticity_defect(m));
        let s = hermitian_spectrum(m)?;
        spec.push(
            s.iter()
                .zip(&s0)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        );
        tr.push((m.trace() - tr0).norm());
    }
    Ok((herm, spec, tr))
}

fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "residuals need at least 3 grid points, got {}",
            times.len()
        )));
    }
    let h = times[1] - times[0];
    let scale = (times[times.len() - 1] - times[0]).abs();
    if !(h > 0.0)
        || times
            .windows(2)
            .any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * scale.max(1.0))
    {
        return Err(Error::InvalidArgument(
            "residuals need a uniform increasing grid".into(),
        ));
    }
    Ok(h)
}

/// Residuals of a sampled series: second-order differences on the grid
/// itself (central inside, one-sided at the ends).
pub fn residual_of_closed_form(
    kind: &RhsKind,
    h: &CMatrix,
    series: &TimeSeries,
) -> Result<ResidualReport> {
    let dt = uniform_step(&series.times)?;
    let m = &series.matrices;
    let n = m.len();
    let i = c64(0.0, 1.0);
    let mut ode = Vec::with_capacity(n);
    for k in 0..n {
        let d = if k == 0 {
            (&m[1] * c64(4.0, 0.0) - &m[0] * c64(3.0, 0.0) - &m[2]) / c64(2.0 * dt, 0.0)
        } else if k == n - 1 {
            (&m[n - 1] * c64(3.0, 0.0) - &m[n - 2] * c64(4.0, 0.0) + &m[n - 3]) / c64(2.0 * dt, 0.0)
        } else {
            (&m[k + 1] - &m[k - 1]) / c64(2.0 * dt, 0.0)
        };
        ode.push((d * i - bracket(kind, h, &m[k])?).norm());
    }
    build_report(series.times.clone(), ode, m)
}

/// Residuals of a closed form evaluated at `times`, differentiated with the
/// five-point central stencil of step `fd_step`.
pub fn residual_of_function(
    kind: &RhsKind,
    h: &CMatrix,
    f: impl Fn(f64) -> Result<CMatrix>,
    times: &[f64],
    fd_step: f64,
) -> Result<ResidualReport> {
    if !(fd_step > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step must be positive, got {fd_step}"
        )));
    }
    let i = c64(0.0, 1.0);
    let mut ode = Vec::with_capacity(times.len());
    let mut values = Vec::with_capacity(times.len());
    for &t in times {
        let u = f(t)?;
        let d = (f(t - 2.0 * fd_step)? - f(t - fd_step)? * c64(8.0, 0.0)
            + f(t + fd_step)? * c64(8.0, 0.0)
            - f(t + 2.0 * fd_step)?)
            / c64(12.0 * fd_step, 0.0);
        ode.push((d * i - bracket(kind, h, &u)?).norm());
        values.push(u);
    }
    build_report(times.to_vec(), ode, &values)
}

fn build_report(times: Vec<f64>, ode: Vec<f64>, m: &[CMatrix]) -> Result<ResidualReport> {
    let (hermiticity_defect, spectrum_drift, trace_drift) = tracks(m)?;
    let max_ode_residual = ode.iter().cloned().fold(0.0, f64::max);
    Ok(ResidualReport {
        times,
        ode_residual: ode,
        hermiticity_defect,
        spectrum_drift,
        trace_drift,
        max_ode_residual,
    })
}

/// Largest pointwise Frobenius distance between two series on the same grid.
pub fn max_deviation(a: &TimeSeries, b: &TimeSeries) -> Result<f64> {
    if a.times.len() != b.times.len() {
        return Err(Error::DimensionMismatch("series lengths differ".into()));
    }
    let mut worst: f64 = 0.0;
    for (x, y) in a.matrices.iter().zip(&b.matrices) {
        ensure_same_dim(x, y, "max_deviation")?;
        worst = worst.max((x - y).norm());
    }
    Ok(worst)
}

/// Reduced-state data at one time of a bipartite trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsystemRecord {
    pub t: f64,
    /// Eigenvalues of `Tr_2 rho / Tr rho`, ascending.
    pub reduced_first: Vec<f64>,
    /// Eigenvalues of `Tr_1 rho / Tr rho`, ascending.
    pub reduced_second: Vec<f64>,
    /// `Tr((H_1 x 1) rho)`.
    pub energy_first: f64,
    /// `Tr((1 x H_2) rho)`.
    pub energy_second: f64,
    /// `Tr((Tr_2 rho)^2)`.
    pub purity_first: f64,
    /// `i d/dt Tr((Tr_2 rho)^2)` by finite differences.
    pub balance_lhs: C64,
    /// `2 Tr([Tr_2 rho^2, Tr_2 rho] H_1)`.
    pub balance_rhs: C64,
}

/// Partial-trace monitor of a uniformly sampled trajectory on a `d1 x d2` space.
pub fn subsystem_monitor(
    series: &TimeSeries,
    dims: (usize, usize),
    h1: &CMatrix,
    h2: &CMatrix,
) -> Result<Vec<SubsystemRecord>> {
    let (d1, d2) = dims;
    if h1.nrows() != d1 || h1.ncols() != d1 || h2.nrows() != d2 || h2.ncols() != d2 {
        return Err(Error::DimensionMismatch(format!(
            "H_1 is {}x{} and H_2 is {}x{} for dims ({d1}, {d2})",
            h1.nrows(),
            h1.ncols(),
            h2.nrows(),
            h2.ncols()
        )));
    }
    if series.dim() != d1 * d2 {
        return Err(Error::DimensionMismatch(format!(
            "series dimension {} is not {d1} x {d2}",
            series.dim()
        )));
    }
    let dt = uniform_step(&series.times)?;
    let big1 = kron(h1, &CMatrix::identity(d2, d2));
    let big2 = kron(&CMatrix::identity(d1, d1), h2);
    let purity: Vec<f64> = series
        .matrices
        .iter()
        .map(|rho| {
            let r = partial_trace(rho, dims, Subsystem::First)?;
            Ok((&r * &r).trace().re)
        })
        .collect::<Result<_>>()?;
    let n = purity.len();
    let mut out = Vec::with_capacity(n);
    for (k, rho) in series.matrices.iter().enumerate() {
        let tr = rho.trace();
        let r1 = partial_trace(rho, dims, Subsystem::First)?;
        let r2 = partial_trace(rho, dims, Subsystem::Second)?;
        let s1 = partial_trace(&(rho * rho), dims, Subsystem::First)?;
        let deriv = if k == 0 {
            (4.0 * purity[1] - 3.0 * purity[0] - purity[2]) / (2.0 * dt)
        } else if k == n - 1 {
            (3.0 * purity[n - 1] - 4.0 * purity[n - 2] + purity[n - 3]) / (2.0 * dt)
        } else {
            (purity[k + 1] - purity[k - 1]) / (2.0 * dt)
        };
        let balance_rhs = (commutator(&s1, &r1)? * h1).trace() * c64(2.0, 0.0);
        out.push(SubsystemRecord {
            t: series.times[k],
            reduced_first: hermitian_spectrum(&(&r1 / tr))?,
            reduced_second: hermitian_spectrum(&(&r2 / tr))?,
            energy_first: (&big1 * rho).trace().re,
            energy_second: (&big2 * rho).trace().re,
            purity_first: purity[k],
            balance_lhs: c64(0.0, deriv),
            balance_rhs,
        });
    }
    Ok(out)
}
