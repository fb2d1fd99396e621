//! Binary Darboux transformation: projectors built from direct and conjugate
//! solutions, the dressing of potentials and wavefunctions, and residuals of
//! the identities the transformation satisfies.
//!
//! With spectral parameters `mu`, `nu`, a column solution block `phi`, a row
//! solution block `chi` and a constant projector `p`, the transformation uses
//!
//! ```text
//! P      = phi (p chi phi p)^-1 chi
//! U[1]   = U + (mu - nu) [P, H]
//! psi[1] = psi (1 - (nu - mu)/(lambda - mu) P)
//! ```
//!
//! The Hermitian branch takes `nu = conj(mu)` and `chi = phi^dagger`; then
//! `P` is an orthogonal projector and Hermiticity of `U` is preserved.

use crate::error::{Error, Result};
use crate::matrix::{c64, commutator, ensure_same_dim, CMatrix, CRow, CVector, C64};
use crate::seed::SpectralSeed;

/// Seeds with `<phi|phi>` below this are rejected.
pub const NORM_FLOOR: f64 = 1e-13;

/// Relative floor on the smallest singular value of the restricted `p chi phi p`.
pub const RESTRICTED_SINGULAR_FLOOR: f64 = 1e-10;

/// Tolerance used when recognising the Hermitian branch `nu = conj(mu)`.
const BRANCH_TOL: f64 = 1e-14;

/// Where a projector came from.
#[derive(Debug, Clone)]
pub enum ProjectorSource {
    /// `P = |phi><phi| / <phi|phi>`.
    Rank1 { phi: CVector },
    /// `P = phi (p chi phi p)^-1 chi`.
    General {
        phi: CMatrix,
        chi: CMatrix,
        p: CMatrix,
    },
}

#[derive(Debug, Clone)]
pub struct Projector {
    pub p: CMatrix,
    pub mu: C64,
    pub nu: C64,
    pub rank: usize,
    pub source: ProjectorSource,
}

impl Projector {
    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.p
    }

    /// `1 - P`.
    pub fn complement(&self) -> CMatrix {
        CMatrix::identity(self.dim(), self.dim()) - &self.p
    }

    /// `|P^2 - P|_F`.
    pub fn idempotence_defect(&self) -> f64 {
        (&self.p * &self.p - &self.p).norm()
    }

    /// `mu - nu`.
    pub fn gap(&self) -> C64 {
        self.mu - self.nu
    }

    pub fn is_hermitian_branch(&self) -> bool {
        (self.nu - self.mu.conj()).norm() <= BRANCH_TOL * (1.0 + self.mu.norm())
    }
}

/// Rank-one projector `|phi><phi| / <phi|phi>` (conjugate solution `phi^dagger`).
///
/// On the Hermitian branch a real `mu` makes `mu - nu` vanish and the
/// transformation trivial, which is rejected.
pub fn build_projector_rank1(phi: &CVector, mu: C64, nu: C64) -> Result<Projector> {
    let norm_sqr = phi.norm_squared();
    if !(norm_sqr >= NORM_FLOOR) {
        return Err(Error::ZeroVector(norm_sqr));
    }
    let branch = (nu - mu.conj()).norm() <= BRANCH_TOL * (1.0 + mu.norm());
    if branch && mu.im == 0.0 {
        return Err(Error::TrivialTransformation(format!(
            "mu = {mu} is real, so nu = conj(mu) = mu"
        )));
    }
    let p = (phi * phi.adjoint()) / c64(norm_sqr, 0.0);
    Ok(Projector {
        p,
        mu,
        nu,
        rank: 1,
        source: ProjectorSource::Rank1 { phi: phi.clone() },
    })
}

/// General projector `phi (p chi phi p)^-1 chi` where the inverse is taken on
/// the `p`-invariant subspace, `(pXp)^-1 pXp = pXp (pXp)^-1 = p`.
pub fn build_projector_general(
    phi_block: &CMatrix,
    chi_block: &CMatrix,
    p: &CMatrix,
    mu: C64,
    nu: C64,
) -> Result<Projector> {
    ensure_same_dim(phi_block, chi_block, "build_projector_general")?;
    ensure_same_dim(phi_block, p, "build_projector_general")?;
    let n = p.nrows();
    let p_defect = (p * p - p).norm();
    if p_defect > 1e-12 * p.norm().max(1.0) {
        return Err(Error::NotProjector(p_defect));
    }
    // p = R L^dagger with L^dagger R = 1_r, read off from the SVD of p
    let svd = p.clone().svd(true, true);
    let (u, v_t) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > 1e-10 * sigma_max.max(f64::MIN_POSITIVE))
        .collect();
    let r = keep.len();
    if r == 0 {
        return Err(Error::InvalidArgument("p is the zero projector".into()));
    }
    let right = CMatrix::from_fn(n, r, |i, k| u[(i, keep[k])]);
    let left_adj = CMatrix::from_fn(r, n, |k, j| {
        v_t[(keep[k], j)] * svd.singular_values[keep[k]]
    });

    let restricted = &left_adj * chi_block * phi_block * &right;
    let rs = restricted.clone().svd(false, false).singular_values;
    let smallest = rs.iter().cloned().fold(f64::INFINITY, f64::min);
    let largest = rs.iter().cloned().fold(0.0, f64::max);
    if !(smallest >= RESTRICTED_SINGULAR_FLOOR * largest) || largest == 0.0 {
        return Err(Error::Singular {
            smallest,
            norm: largest,
        });
    }
    let inv = restricted.try_inverse().ok_or(Error::Singular {
        smallest,
        norm: largest,
    })?;
    let pseudo = &right * inv * &left_adj;
    let proj = phi_block * pseudo * chi_block;
    Ok(Projector {
        p: proj,
        mu,
        nu,
        rank: r,
        source: ProjectorSource::General {
            phi: phi_block.clone(),
            chi: chi_block.clone(),
            p: p.clone(),
        },
    })
}

/// `U + (mu - nu) [P, H]`.
pub fn transform_potential(u: &CMatrix, h: &CMatrix, proj: &Projector) -> Result<CMatrix> {
    ensure_same_dim(u, h, "transform_potential")?;
    ensure_same_dim(u, &proj.p, "transform_potential")?;
    Ok(u + commutator(&proj.p, h)? * proj.gap())
}

/// Row solution dressing `psi (1 - (nu - mu)/(lambda - mu) P)`.
pub fn transform_wavefunction(psi: &CRow, lambda: C64, proj: &Projector) -> Result<CRow> {
    if psi.len() != proj.dim() {
        return Err(Error::DimensionMismatch(format!(
            "row of length {} vs projector {}",
            psi.len(),
            proj.dim()
        )));
    }
    if lambda == proj.mu {
        return Err(Error::Pole);
    }
    let coeff = (proj.nu - proj.mu) / (lambda - proj.mu);
    Ok(psi - (psi * &proj.p) * coeff)
}

/// Column solution dressing `(1 - (mu - nu)/(kappa - nu) P) phi`, the
/// counterpart of [`transform_wavefunction`] for direct solutions.
pub fn transform_column(phi: &CVector, kappa: C64, proj: &Projector) -> Result<CVector> {
    if phi.len() != proj.dim() {
        return Err(Error::DimensionMismatch(format!(
            "column of length {} vs projector {}",
            phi.len(),
            proj.dim()
        )));
    }
    if kappa == proj.nu {
        return Err(Error::Pole);
    }
    let coeff = proj.gap() / (kappa - proj.nu);
    Ok(phi - (&proj.p * phi) * coeff)
}

/// Inverse of the column dressing at `kappa`: `(1 - cP)^-1 = 1 + c/(1-c) P`.
pub fn untransform_column(phi: &CVector, kappa: C64, proj: &Projector) -> Result<CVector> {
    if kappa == proj.nu || kappa == proj.mu {
        return Err(Error::Pole);
    }
    let coeff = proj.gap() / (kappa - proj.nu);
    let back = coeff / (c64(1.0, 0.0) - coeff);
    Ok(phi + (&proj.p * phi) * back)
}

/// Frobenius norm of `i dP - (V - mu J) P + P (V - nu J) - (mu - nu) P J P`.
pub fn master_residual(proj: &Projector, p_dot: &CMatrix, v: &CMatrix, j: &CMatrix) -> Result<f64> {
    ensure_same_dim(v, j, "master_residual")?;
    ensure_same_dim(v, &proj.p, "master_residual")?;
    ensure_same_dim(v, p_dot, "master_residual")?;
    let p = &proj.p;
    let i = c64(0.0, 1.0);
    let left = v - j * proj.mu;
    let right = v - j * proj.nu;
    let r = p_dot * i - &left * p + p * &right - p * j * p * proj.gap();
    Ok(r.norm())
}

/// One applied transformation `U_in -> U_out`.
#[derive(Debug, Clone)]
pub struct DarbouxStep {
    pub projector: Projector,
    pub u_in: CMatrix,
    pub u_out: CMatrix,
    pub h: CMatrix,
    pub iteration_index: usize,
}

impl DarbouxStep {
    pub fn first(u: &CMatrix, h: &CMatrix, projector: Projector) -> Result<Self> {
        let u_out = transform_potential(u, h, &projector)?;
        Ok(Self {
            projector,
            u_in: u.clone(),
            u_out,
            h: h.clone(),
            iteration_index: 1,
        })
    }

    /// `|Tr U_out - Tr U_in|`.
    pub fn trace_drift(&self) -> f64 {
        (self.u_out.trace() - self.u_in.trace()).norm()
    }
}

/// Applies the next transformation on top of `step.u_out`. `next_seed` must be
/// an eigen-seed of `U_out - mu' H`; its `phi0` defines the new projector on
/// the Hermitian branch.
pub fn iterate_darboux(step: &DarbouxStep, next_seed: &SpectralSeed) -> Result<DarbouxStep> {
    let scale = step.u_out.norm() + next_seed.mu.norm() * step.h.norm();
    let residual = next_seed.eigen_residual(&step.u_out, &step.h);
    if residual > 1e-8 * scale.max(1.0) {
        return Err(Error::NoDegeneracy(format!(
            "seed is not an eigenvector of the transformed potential (residual {residual:.3e})"
        )));
    }
    let projector = build_projector_rank1(&next_seed.phi0, next_seed.mu, next_seed.mu.conj())?;
    let u_out = transform_potential(&step.u_out, &step.h, &projector)?;
    Ok(DarbouxStep {
        projector,
        u_in: step.u_out.clone(),
        u_out,
        h: step.h.clone(),
        iteration_index: step.iteration_index + 1,
    })
}

/// `|[P_perp (U - mu H) P - P (U - nu H) P_perp, H^2]|_F`; zero means the
/// constraint `U'H + HU' = 0` is inherited by `U[1]`.
pub fn constraint_hereditary_residual(u: &CMatrix, h: &CMatrix, proj: &Projector) -> Result<f64> {
    ensure_same_dim(u, h, "constraint_hereditary_residual")?;
    ensure_same_dim(u, &proj.p, "constraint_hereditary_residual")?;
    let p = &proj.p;
    let q = proj.complement();
    let x = &q * (u - h * proj.mu) * p - p * (u - h * proj.nu) * &q;
    Ok(commutator(&x, &(h * h))?.norm())
}

/// Residuals of the identities satisfied by a stationary projector.
#[derive(Debug, Clone, serde::Serialize)]
pub struct LemmaReport {
    /// `|i P'|` implied by the tau-direction master equation; the lemmas
    /// assume this vanishes.
    pub stationarity_defect: f64,
    /// `|U[1]^2 - U^2 - (mu-nu)(P(HU+UH-nu H^2)P_perp - P_perp(HU+UH-mu H^2)P)|`.
    pub lemma1: f64,
    /// `|U[1]^2 - U^2 + (mu-nu) i dP/dt|`.
    pub lemma2: f64,
    /// Present when `U^2 = U`.
    pub lemma3: Option<Lemma3Report>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct Lemma3Report {
    /// `|U[1]^2 - U[1]|`.
    pub idempotence_defect: f64,
    /// `|i dP/dt - [H, P]|`.
    pub linear_defect: f64,
    /// Whether both sides of the equivalence agree at `threshold`.
    pub consistent: bool,
    pub threshold: f64,
}

/// Evaluates the three lemmas for `U[1] = U + (mu - nu)[P, H]` with the time
/// derivative `p_dot` of the projector.
pub fn lemma_checks(
    u: &CMatrix,
    h: &CMatrix,
    proj: &Projector,
    p_dot: &CMatrix,
) -> Result<LemmaReport> {
    ensure_same_dim(u, h, "lemma_checks")?;
    ensure_same_dim(u, &proj.p, "lemma_checks")?;
    ensure_same_dim(u, p_dot, "lemma_checks")?;
    let i = c64(0.0, 1.0);
    let p = &proj.p;
    let q = proj.complement();
    let gap = proj.gap();
    let u1 = transform_potential(u, h, proj)?;
    let u1_sq = &u1 * &u1;
    let u_sq = u * u;
    let h_sq = h * h;
    let anti = h * u + u * h;

    // tau-direction: i P' = (U - mu H)P - P(U - nu H) + (mu - nu) P H P
    let stationarity_defect =
        ((u - h * proj.mu) * p - p * (u - h * proj.nu) + p * h * p * gap).norm();

    let l1_rhs =
        &u_sq + (p * (&anti - &h_sq * proj.nu) * &q - &q * (&anti - &h_sq * proj.mu) * p) * gap;
    let lemma1 = (&u1_sq - l1_rhs).norm();

    let lemma2 = (&u1_sq - &u_sq + p_dot * (i * gap)).norm();

    let scale = 1.0 + u.norm();
    let lemma3 = if (&u_sq - u).norm() <= 1e-10 * scale {
        let threshold = 1e-6 * scale;
        let idempotence_defect = (&u1_sq - &u1).norm();
        let linear_defect = (p_dot * i - commutator(h, p)?).norm();
        let consistent = (idempotence_defect <= threshold) == (linear_defect <= threshold);
        Some(Lemma3Report {
            idempotence_defect,
            linear_defect,
            consistent,
            threshold,
        })
    } else {
        None
    };
    Ok(LemmaReport {
        stationarity_defect,
        lemma1,
        lemma2,
        lemma3,
    })
}
