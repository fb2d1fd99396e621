//! Closed-form time evolution of Darboux-transformed solutions of
//! `i dU/dt = [H, U^2]` on the shift branch `[U0^2 - a U0, H] = 0`.
//!
//! In the frame rotating with `exp(-i a H t)` the solution is
//!
//! ```text
//! U_int(t) = U0 + (mu - conj mu) / F(t) * E(t) [|phi0><phi0|, H] E(t)^dagger
//! E(t)     = exp(-(i/mu) Delta t)
//! F(t)     = <phi0| E(t)^dagger E(t) |phi0>
//! ```
//!
//! Exponentials of `Delta` are applied to vectors in its eigenbasis after
//! subtracting the largest growth rate, so `e^{9t}`-sized intermediates never
//! materialise.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::darboux::{
    build_projector_rank1, transform_column, untransform_column, Projector, ProjectorSource,
};
use crate::error::{Error, Result};
use crate::matrix::{
    apply_spectral, c64, commutator, ensure_same_dim, herm_eig, symmetrize, CMatrix, CVector,
    EigenSystem, Hermitian, C64,
};
use crate::seed::{build_shift, pencil_tolerance, Selection, ShiftData, SpectralSeed};

/// `F(t)` (after rescaling) below this is treated as singular.
pub const F_FLOOR: f64 = 1e-300;

/// Components of a propagated vector below this fraction of its norm are
/// treated as outside its support.
pub const SUPPORT_TOL: f64 = 1e-13;

/// How the plain Darboux solution is turned into the reported one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Plain,
    /// `exp(-2i lambda H t) (U[1] + lambda) exp(2i lambda H t)`.
    Gauge { lambda: f64 },
    /// Solution of `i drho/dt = [H, rho] + eps [H, rho^2]`; the Darboux step
    /// runs with `eps H`.
    Epsilon { epsilon: f64 },
    /// Solution of `i drho/dt = C(rho) [H, rho^2]` with `C = (Tr rho / Tr rho^3)^(1/2)`.
    Homogeneous { normalize: bool },
}

/// Hamiltonian used in the Lax pair: `eps H` for the perturbed variant, `H` otherwise.
pub fn lax_hamiltonian(h: &CMatrix, variant: &Variant) -> Result<CMatrix> {
    match *variant {
        Variant::Epsilon { epsilon } => {
            if epsilon == 0.0 || !epsilon.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "epsilon must be finite and nonzero, got {epsilon}"
                )));
            }
            Ok(h * c64(epsilon, 0.0))
        }
        _ => Ok(h.clone()),
    }
}

/// `(Tr rho / Tr rho^3)^(1/2)`.
pub fn homogeneity_constant(rho: &CMatrix) -> Result<f64> {
    let tr1 = rho.trace().re;
    let tr3 = (rho * rho * rho).trace().re;
    if !(tr3 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Tr rho^3 = {tr3} must be positive"
        )));
    }
    let ratio = tr1 / tr3;
    if !(ratio >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Tr rho / Tr rho^3 = {ratio} is negative"
        )));
    }
    Ok(ratio.sqrt())
}

/// One further transformation applied on top of the first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct IterationSpec {
    pub mu: C64,
    #[serde(default = "first_cluster")]
    pub selection: Selection,
}

fn first_cluster() -> Selection {
    Selection::Index { index: 0 }
}

/// A dressing level: spectral parameter and the background seed vector whose
/// Lax evolution, dressed by all earlier levels, gives this level's projector.
#[derive(Debug, Clone)]
struct Stage {
    mu: C64,
    seed: CVector,
}

/// Result of propagating a vector with `exp(-(i/mu) Delta t)` after removing
/// the growth factor `exp(log_scale)`.
struct Propagated {
    vector: CVector,
    log_scale: f64,
}

#[derive(Debug, Clone)]
pub struct EvolutionContext {
    /// Physical Hamiltonian.
    pub h: CMatrix,
    /// Hamiltonian of the Lax pair.
    pub lax_h: CMatrix,
    pub u0: CMatrix,
    pub shift: ShiftData,
    pub seed: SpectralSeed,
    pub variant: Variant,
    h_eig: EigenSystem,
    delta_eig: EigenSystem,
    stages: Vec<Stage>,
    homogeneity: Option<f64>,
}

impl EvolutionContext {
    /// `seed` must be an eigen-seed of `U0 - mu lax_h`, where `lax_h` is
    /// [`lax_hamiltonian`] of `h`.
    pub fn new(
        h: &CMatrix,
        u0: &CMatrix,
        seed: SpectralSeed,
        a: f64,
        variant: Variant,
    ) -> Result<Self> {
        ensure_same_dim(h, u0, "EvolutionContext")?;
        if seed.phi0.len() != h.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "seed of length {} for dimension {}",
                seed.phi0.len(),
                h.nrows()
            )));
        }
        let h_herm = Hermitian::new(h.clone())?;
        let u0 = Hermitian::new(u0.clone())?.into_inner();
        let lax_h = lax_hamiltonian(h_herm.matrix(), &variant)?;
        let shift = build_shift(&u0, &lax_h, a)?;
        if !shift.valid {
            return Err(Error::ScenarioInvalid(format!(
                "[U0^2 - a U0, H] does not vanish for a = {a} (defect {:.3e})",
                shift.commutation_defect
            )));
        }
        let tol = pencil_tolerance(&u0, &lax_h, seed.mu);
        let residual = seed.eigen_residual(&u0, &lax_h);
        if residual > tol.max(1e-10) {
            return Err(Error::InvalidArgument(format!(
                "seed is not an eigenvector of U0 - mu H (residual {residual:.3e})"
            )));
        }
        if seed.mu.im == 0.0 {
            return Err(Error::TrivialTransformation(format!(
                "mu = {} is real",
                seed.mu
            )));
        }
        let h_eig = herm_eig(&Hermitian::symmetrized(&lax_h))?;
        let delta_eig = herm_eig(&Hermitian::symmetrized(&shift.delta))?;
        let stages = vec![Stage {
            mu: seed.mu,
            seed: seed.phi0.clone(),
        }];
        let mut ctx = Self {
            h: h_herm.into_inner(),
            lax_h,
            u0,
            shift,
            seed,
            variant,
            h_eig,
            delta_eig,
            stages,
            homogeneity: None,
        };
        ctx.refresh_homogeneity()?;
        Ok(ctx)
    }

    /// Builds the seed from `(U0, lax_h, mu)` with a degenerate eigenspace.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parameters(
        h: &CMatrix,
        u0: &CMatrix,
        a: f64,
        mu: C64,
        selection: Selection,
        coef_a: C64,
        coef_b: C64,
        variant: Variant,
    ) -> Result<Self> {
        let lax_h = lax_hamiltonian(h, &variant)?;
        let seed = SpectralSeed::new(u0, &lax_h, mu, selection, coef_a, coef_b)?;
        Self::new(h, u0, seed, a, variant)
    }

    fn refresh_homogeneity(&mut self) -> Result<()> {
        self.homogeneity = match self.variant {
            Variant::Homogeneous { .. } => Some(homogeneity_constant(&self.transformed(0.0)?)?),
            _ => None,
        };
        Ok(())
    }

    /// Appends another transformation with spectral parameter `spec.mu`. Its
    /// seed is an eigenvector of `U[n](0) - mu' H`, pulled back through the
    /// existing dressing to an eigenvector of `U0 - mu' H`.
    pub fn push_iteration(&mut self, spec: IterationSpec) -> Result<()> {
        let mu = spec.mu;
        if mu.im == 0.0 {
            return Err(Error::TrivialTransformation(format!("mu = {mu} is real")));
        }
        if self
            .stages
            .iter()
            .any(|s| (s.mu - mu).norm() < 1e-12 || (s.mu.conj() - mu).norm() < 1e-12)
        {
            return Err(Error::InvalidArgument(format!(
                "spectral parameter {mu} is already in use"
            )));
        }
        let current = self.transformed(0.0)?;
        let next = SpectralSeed::simple(&current, &self.lax_h, mu, spec.selection)?;
        let projectors = self.projectors_int(0.0)?;
        let mut v = next.phi0.clone();
        for proj in projectors.iter().rev() {
            v = untransform_column(&v, mu, proj)?;
        }
        let m = &self.u0 - &self.lax_h * mu;
        let defect = (&m * &v - &v * next.z_degenerate).norm() / v.norm();
        let tol = pencil_tolerance(&self.u0, &self.lax_h, mu).max(1e-10);
        if defect > tol {
            return Err(Error::NoDegeneracy(format!(
                "pulled-back seed is not an eigenvector of U0 - mu H (residual {defect:.3e})"
            )));
        }
        self.stages.push(Stage {
            mu,
            seed: &v / c64(v.norm(), 0.0),
        });
        self.refresh_homogeneity()
    }

    /// Number of Darboux transformations applied.
    /// Transformations applied, the first included.
    pub fn iterations(&self) -> usize {
        self.stages.len()
    }

    pub fn a(&self) -> f64 {
        self.shift.a
    }

    pub fn mu(&self) -> C64 {
        self.seed.mu
    }

    /// `exp(-(i/mu) d t)` for each eigenvalue `d` of `Delta`, applied to `w`
    /// with the largest growth among `support` removed.
    fn propagate(&self, mu: C64, t: f64, w: &CVector, support: &CVector) -> Propagated {
        let rate = c64(0.0, -1.0) / mu;
        let n = self.delta_eig.len();
        let support_coef: Vec<C64> = (0..n)
            .map(|k| self.delta_eig.vectors[k].dotc(support))
            .collect();
        let cut = SUPPORT_TOL * support.norm();
        let exps: Vec<C64> = (0..n)
            .map(|k| rate * self.delta_eig.values[k].re * t)
            .collect();
        let log_scale = (0..n)
            .filter(|&k| support_coef[k].norm() > cut)
            .map(|k| exps[k].re)
            .fold(f64::NEG_INFINITY, f64::max);
        let log_scale = if log_scale.is_finite() {
            log_scale
        } else {
            0.0
        };
        let mut out = CVector::zeros(w.len());
        let wcut = SUPPORT_TOL * w.norm();
        for (k, &rate) in exps.iter().enumerate().take(n) {
            let coef = self.delta_eig.vectors[k].dotc(w);
            if coef.norm() <= wcut {
                continue;
            }
            let e = rate - log_scale;
            if e.re > 1e-9 * (1.0 + log_scale.abs()) {
                // outside the seed's growth support; vanishes when [Delta, H] = 0
                continue;
            }
            out += &self.delta_eig.vectors[k] * (coef * e.exp());
        }
        Propagated {
            vector: out,
            log_scale,
        }
    }

    /// `ln F(t)`, finite where `F` itself would overflow.
    pub fn ln_f_a(&self, t: f64) -> Result<f64> {
        let p = self.propagate(self.seed.mu, t, &self.seed.phi0, &self.seed.phi0);
        let n2 = p.vector.norm_squared();
        if !(n2 >= F_FLOOR) {
            return Err(Error::SingularF { t, value: n2 });
        }
        Ok(2.0 * p.log_scale + n2.ln())
    }

    /// `F(t) = <phi0| exp(i (mu - conj mu)/|mu|^2 Delta t) |phi0>`.
    pub fn f_a(&self, t: f64) -> Result<C64> {
        Ok(c64(self.ln_f_a(t)?.exp(), 0.0))
    }

    /// `exp(-i s H)` for the Lax Hamiltonian.
    fn frame(&self, s: f64) -> CMatrix {
        apply_spectral(&self.h_eig, |e| C64::from_polar(1.0, -e * s))
    }

    /// `exp(-i s H)` for the physical Hamiltonian.
    fn physical_frame(&self, s: f64) -> Result<CMatrix> {
        let es = herm_eig(&Hermitian::symmetrized(&self.h))?;
        Ok(apply_spectral(&es, |e| C64::from_polar(1.0, -e * s)))
    }

    fn conjugate(frame: &CMatrix, m: &CMatrix) -> CMatrix {
        frame * m * frame.adjoint()
    }

    /// First-transformation interaction-frame solution, evaluated term by term
    /// from the closed form.
    pub fn u_int(&self, t: f64) -> Result<CMatrix> {
        let phi0 = &self.seed.phi0;
        let h_phi = &self.lax_h * phi0;
        let x = self.propagate(self.seed.mu, t, phi0, phi0);
        let y = self.propagate(self.seed.mu, t, &h_phi, phi0);
        let f_scaled = x.vector.norm_squared();
        if !(f_scaled >= F_FLOOR) {
            return Err(Error::SingularF { t, value: f_scaled });
        }
        let gap = self.seed.mu - self.seed.mu.conj();
        // E [|phi0><phi0|, H] E^dagger = x y^dagger - y x^dagger
        let bracket = &x.vector * y.vector.adjoint() - &y.vector * x.vector.adjoint();
        Ok(symmetrize(&(&self.u0 + bracket * (gap / f_scaled))))
    }

    /// Interaction-frame projector of the first transformation.
    pub fn projector_int(&self, t: f64) -> Result<CMatrix> {
        Ok(self.projectors_int(t)?.remove(0).p)
    }

    /// Lab-frame projector `P(t)` of the first transformation.
    pub fn projector_at(&self, t: f64) -> Result<CMatrix> {
        let frame = self.frame(self.a() * t);
        Ok(Self::conjugate(&frame, &self.projector_int(t)?))
    }

    /// Lab-frame projectors of every level, first transformation first.
    /// `U[n](t) = U(t) + sum_k (mu_k - conj mu_k) [P_k, lax_h]` without
    /// any re-symmetrisation.
    pub fn projectors_at(&self, t: f64) -> Result<Vec<Projector>> {
        let frame = self.frame(self.a() * t);
        self.projectors_int(t)?
            .into_iter()
            .map(|p| match &p.source {
                ProjectorSource::Rank1 { phi } => {
                    build_projector_rank1(&(&frame * phi), p.mu, p.nu)
                }
                _ => unreachable!("dressing levels are rank one"),
            })
            .collect()
    }

    /// Interaction-frame projectors of every level at time `t`.
    fn projectors_int(&self, t: f64) -> Result<Vec<Projector>> {
        let mut out: Vec<Projector> = Vec::with_capacity(self.stages.len());
        for stage in &self.stages {
            let p = self.propagate(stage.mu, t, &stage.seed, &stage.seed);
            let mut phi = p.vector;
            for earlier in &out {
                phi = transform_column(&phi, stage.mu, earlier)?;
                let n = phi.norm();
                if !(n * n >= F_FLOOR) {
                    return Err(Error::SingularF { t, value: n * n });
                }
                phi /= c64(n, 0.0);
            }
            let n2 = phi.norm_squared();
            if !(n2 >= F_FLOOR) {
                return Err(Error::SingularF { t, value: n2 });
            }
            out.push(build_projector_rank1(&phi, stage.mu, stage.mu.conj())?);
        }
        Ok(out)
    }

    /// Interaction-frame `U[n](t)` including every iteration.
    pub fn u_int_iterated(&self, t: f64) -> Result<CMatrix> {
        if self.stages.len() == 1 {
            return self.u_int(t);
        }
        let mut u = self.u0.clone();
        for proj in self.projectors_int(t)? {
            u += commutator(&proj.p, &self.lax_h)? * proj.gap();
        }
        Ok(symmetrize(&u))
    }

    /// `U[n](t)` of the Lax problem, before any variant is applied.
    pub fn transformed(&self, t: f64) -> Result<CMatrix> {
        let frame = self.frame(self.a() * t);
        Ok(symmetrize(&Self::conjugate(
            &frame,
            &self.u_int_iterated(t)?,
        )))
    }

    /// `U[1](t)`, or `U[n](t)` after iterations, with the context's variant applied.
    pub fn u1_of_t(&self, t: f64) -> Result<CMatrix> {
        self.evaluate(t)
    }

    /// Background solution `exp(-i a H t) U0 exp(i a H t)` of the Lax problem.
    pub fn u_linear_of_t(&self, t: f64) -> Result<CMatrix> {
        let frame = self.frame(self.a() * t);
        Ok(symmetrize(&Self::conjugate(&frame, &self.u0)))
    }

    /// The background with the context's variant applied.
    pub fn background(&self, t: f64) -> Result<CMatrix> {
        self.apply_variant(t, |s| self.u_linear_of_t(s))
    }

    /// `exp(-2i lambda H t) (U[n](t) + lambda) exp(2i lambda H t)`.
    pub fn gauge_shift(&self, lambda: f64, t: f64) -> Result<CMatrix> {
        let u = self.transformed(t)?;
        let n = u.nrows();
        let frame = self.frame(2.0 * lambda * t);
        Ok(symmetrize(&Self::conjugate(
            &frame,
            &(u + CMatrix::identity(n, n) * c64(lambda, 0.0)),
        )))
    }

    /// `exp(-i H t) U_lax(t) exp(i H t)`, where `U_lax` solves the quadratic
    /// equation with `eps H`.
    pub fn epsilon_variant(&self, t: f64) -> Result<CMatrix> {
        match self.variant {
            Variant::Epsilon { .. } => {
                let frame = self.physical_frame(t)?;
                Ok(symmetrize(&Self::conjugate(&frame, &self.transformed(t)?)))
            }
            _ => Err(Error::InvalidArgument(
                "context has no epsilon variant".into(),
            )),
        }
    }

    /// `U[n](C t)`, divided by its trace when normalising.
    pub fn homogeneous_variant(&self, t: f64) -> Result<CMatrix> {
        match self.variant {
            Variant::Homogeneous { .. } => self.apply_variant(t, |s| self.transformed(s)),
            _ => Err(Error::InvalidArgument(
                "context has no homogeneous variant".into(),
            )),
        }
    }

    /// `C(rho)` evaluated on `U[n](0)` for the homogeneous variant.
    pub fn homogeneity(&self) -> Option<f64> {
        self.homogeneity
    }

    fn apply_variant(&self, t: f64, base: impl Fn(f64) -> Result<CMatrix>) -> Result<CMatrix> {
        match self.variant {
            Variant::Plain => base(t),
            Variant::Gauge { lambda } => {
                let u = base(t)?;
                let n = u.nrows();
                let frame = self.frame(2.0 * lambda * t);
                Ok(symmetrize(&Self::conjugate(
                    &frame,
                    &(u + CMatrix::identity(n, n) * c64(lambda, 0.0)),
                )))
            }
            Variant::Epsilon { .. } => {
                let frame = self.physical_frame(t)?;
                Ok(symmetrize(&Self::conjugate(&frame, &base(t)?)))
            }
            Variant::Homogeneous { normalize } => {
                let c = self
                    .homogeneity
                    .expect("homogeneity constant computed at construction");
                let u = base(c * t)?;
                if normalize {
                    let tr = u.trace();
                    Ok(u / tr)
                } else {
                    Ok(u)
                }
            }
        }
    }

    /// Solution reported for the context's variant.
    pub fn evaluate(&self, t: f64) -> Result<CMatrix> {
        self.apply_variant(t, |s| self.transformed(s))
    }

    /// `alpha(t, tau) = (1/mu) z (a - z) t + z tau` with `z` the seed eigenvalue.
    pub fn alpha(&self, t: f64, tau: f64) -> C64 {
        let z = self.seed.z_degenerate;
        let mu = self.seed.mu;
        z * (c64(self.a(), 0.0) - z) * t / mu + z * tau
    }

    /// Unscaled Lax wavefunction `exp(-i a H t) exp(-i alpha) exp(-(i/mu) Delta t) phi0`.
    pub fn lax_wavefunction(&self, t: f64, tau: f64) -> CVector {
        let rate = c64(0.0, -1.0) / self.seed.mu;
        let e = apply_spectral(&self.delta_eig, |d| (rate * d * t).exp());
        let phase = (c64(0.0, -1.0) * self.alpha(t, tau)).exp();
        self.frame(self.a() * t) * e * &self.seed.phi0 * phase
    }

    /// Samples [`EvolutionContext::evaluate`] on `grid`.
    pub fn evolve_series(&self, grid: &[f64]) -> Result<TimeSeries> {
        if grid.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::InvalidArgument("time grid must be sorted".into()));
        }
        let matrices = grid
            .iter()
            .map(|&t| self.evaluate(t))
            .collect::<Result<Vec<_>>>()?;
        let mut labels = BTreeMap::new();
        labels.insert("variant".to_string(), format!("{:?}", self.variant));
        labels.insert("iterations".to_string(), self.iterations().to_string());
        labels.insert("a".to_string(), self.a().to_string());
        labels.insert("mu".to_string(), self.seed.mu.to_string());
        Ok(TimeSeries {
            times: grid.to_vec(),
            matrices,
            labels,
        })
    }
}

/// Matrices sampled on a time grid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub matrices: Vec<CMatrix>,
    pub labels: BTreeMap<String, String>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, matrices: Vec<CMatrix>) -> Result<Self> {
        if times.len() != matrices.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} times but {} matrices",
                times.len(),
                matrices.len()
            )));
        }
        if let Some(first) = matrices.first() {
            if matrices.iter().any(|m| m.shape() != first.shape()) {
                return Err(Error::DimensionMismatch(
                    "matrices in a series must share their shape".into(),
                ));
            }
        }
        Ok(Self {
            times,
            matrices,
            labels: BTreeMap::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrices.first().map_or(0, |m| m.nrows())
    }
}

/// `n + 1` equally spaced points from `start` to `end`.
pub fn uniform_grid(start: f64, end: f64, steps: usize) -> Vec<f64> {
    if steps == 0 {
        return vec![start];
    }
    let h = (end - start) / steps as f64;
    (0..=steps)
        .map(|i| {
            if i == steps {
                end
            } else {
                start + h * i as f64
            }
        })
        .collect()
}
