//! Spectral seeds: the eigenproblem of `U(0) - mu H`, selection of a
//! (degenerate) eigenspace, the seed vector `A phi_1 + B phi_2`, and the
//! algebraic admissibility checks on the initial data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::matrix::{
    c64, commutator, ensure_same_dim, general_eig_with_tol, lex_cmp, CMatrix, CVector, EigenSystem,
    C64, CLUSTER_TOL,
};

/// Residual below which a projected basis vector is considered dependent.
const PIVOT_FLOOR: f64 = 1e-8;

/// Relative distance at which a requested eigenvalue matches a cluster.
const MATCH_TOL: f64 = 1e-6;

/// Relative tolerance for `[Delta_a, H] = 0`.
pub const SHIFT_COMMUTATION_TOL: f64 = 1e-10;

/// How to choose the eigenspace of `U(0) - mu H` that feeds the seed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum Selection {
    /// The cluster with the largest multiplicity (first in sort order on ties).
    #[default]
    MostDegenerate,
    /// The cluster closest to a given eigenvalue.
    MatchValue { value: C64 },
    /// A cluster by position in the sorted list of distinct eigenvalues.
    Index { index: usize },
}

/// Eigenvalue together with the canonical orthonormal basis of its eigenspace.
#[derive(Debug, Clone)]
pub struct Eigenspace {
    pub value: C64,
    pub basis: Vec<CVector>,
}

impl Eigenspace {
    pub fn multiplicity(&self) -> usize {
        self.basis.len()
    }
}

/// Clustering band for the pencil `U0 - mu H`.
pub fn pencil_tolerance(u0: &CMatrix, h: &CMatrix, mu: C64) -> f64 {
    CLUSTER_TOL * (u0.norm() + mu.norm() * h.norm()).max(f64::MIN_POSITIVE)
}

/// Full eigensystem of `U0 - mu H`, clustered with [`pencil_tolerance`].
pub fn solve_seed_spectrum(u0: &CMatrix, h: &CMatrix, mu: C64) -> Result<EigenSystem> {
    ensure_same_dim(u0, h, "seed pencil")?;
    let m = u0 - h * mu;
    general_eig_with_tol(&m, pencil_tolerance(u0, h, mu))
}

/// Canonical orthonormal basis of `span(vectors)`.
///
/// Standard basis vectors `e_n, e_{n-1}, ..., e_1` are projected onto the
/// span and Gram-Schmidt orthonormalized in that order; dependent ones are
/// skipped. Each returned vector has a real positive component at the index
/// of the basis vector it came from.
pub fn canonical_basis(vectors: &[CVector]) -> Vec<CVector> {
    let k = vectors.len();
    if k == 0 {
        return vec![];
    }
    let n = vectors[0].len();
    // orthonormalize the input first so the projector is well defined
    let mut span: Vec<CVector> = Vec::with_capacity(k);
    for v in vectors {
        let mut r = v.clone();
        for q in &span {
            let coeff = q.dotc(&r);
            r -= q * coeff;
        }
        let norm = r.norm();
        if norm > PIVOT_FLOOR {
            span.push(r / c64(norm, 0.0));
        }
    }
    let mut out: Vec<CVector> = Vec::with_capacity(span.len());
    for j in (0..n).rev() {
        if out.len() == span.len() {
            break;
        }
        // Q e_j = sum_q q conj(q_j)
        let mut r = CVector::zeros(n);
        for q in &span {
            r += q * q[j].conj();
        }
        for b in &out {
            let coeff = b.dotc(&r);
            r -= b * coeff;
        }
        let norm = r.norm();
        if norm > PIVOT_FLOOR {
            let mut v = r / c64(norm, 0.0);
            // pivot component is real positive up to rounding; remove the residue
            let phase = v[j] / v[j].norm();
            v /= phase;
            out.push(v);
        }
    }
    out
}

fn select_cluster(es: &EigenSystem, which: Selection, tol: f64) -> Result<(C64, Vec<usize>)> {
    let mut clusters = es.clusters(tol);
    clusters.sort_by(|a, b| lex_cmp(a.value, b.value, tol));
    match which {
        Selection::MostDegenerate => {
            let mut best: Option<&crate::matrix::Cluster> = None;
            for cl in &clusters {
                if best.is_none_or(|b| cl.multiplicity() > b.multiplicity()) {
                    best = Some(cl);
                }
            }
            let best = best.ok_or_else(|| Error::NoDegeneracy("empty spectrum".into()))?;
            Ok((best.value, best.indices.clone()))
        }
        Selection::MatchValue { value } => {
            let scale = es.values.iter().map(|z| z.norm()).fold(1.0, f64::max);
            let best = clusters
                .iter()
                .min_by(|a, b| {
                    (a.value - value)
                        .norm()
                        .total_cmp(&(b.value - value).norm())
                })
                .ok_or_else(|| Error::NoDegeneracy("empty spectrum".into()))?;
            let dist = (best.value - value).norm();
            if dist > MATCH_TOL * scale {
                return Err(Error::NoDegeneracy(format!(
                    "no eigenvalue matches {value} (closest {} at distance {dist:.3e})",
                    best.value
                )));
            }
            Ok((best.value, best.indices.clone()))
        }
        Selection::Index { index } => {
            let cl = clusters.get(index).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "eigenvalue index {index} out of range ({} distinct)",
                    clusters.len()
                ))
            })?;
            Ok((cl.value, cl.indices.clone()))
        }
    }
}

/// Selects an eigenspace of any multiplicity and returns its canonical basis.
pub fn pick_eigenspace(es: &EigenSystem, which: Selection, tol: f64) -> Result<Eigenspace> {
    let (value, indices) = select_cluster(es, which, tol)?;
    let vectors: Vec<CVector> = indices.iter().map(|&i| es.vectors[i].clone()).collect();
    Ok(Eigenspace {
        value,
        basis: canonical_basis(&vectors),
    })
}

/// Selects a degenerate eigenspace (multiplicity at least two).
///
/// A nondegenerate choice only produces a projector that is block diagonal
/// in the eigenbasis of `H`, so it is rejected here.
pub fn pick_degenerate_basis(es: &EigenSystem, which: Selection, tol: f64) -> Result<Eigenspace> {
    let space = pick_eigenspace(es, which, tol)?;
    if space.multiplicity() < 2 {
        return Err(Error::NoDegeneracy(format!(
            "eigenvalue {} is simple; the seed needs a degenerate eigenspace",
            space.value
        )));
    }
    Ok(space)
}

/// Eigen-data of `U(0) - mu H` producing the seed vector `phi(0,0)`.
#[derive(Debug, Clone)]
pub struct SpectralSeed {
    pub mu: C64,
    pub z_degenerate: C64,
    pub basis: Vec<CVector>,
    pub a: C64,
    pub b: C64,
    pub phi0: CVector,
}

impl SpectralSeed {
    /// Degenerate seed: `phi0 = A basis[0] + B basis[1]` with `|A|^2 + |B|^2 = 1`.
    pub fn new(
        u0: &CMatrix,
        h: &CMatrix,
        mu: C64,
        which: Selection,
        a: C64,
        b: C64,
    ) -> Result<Self> {
        let es = solve_seed_spectrum(u0, h, mu)?;
        let space = pick_degenerate_basis(&es, which, pencil_tolerance(u0, h, mu))?;
        Self::from_space(mu, space, a, b)
    }

    /// Seed from an eigenspace of any multiplicity. For a simple eigenvalue
    /// `B` must vanish.
    pub fn from_space(mu: C64, space: Eigenspace, a: C64, b: C64) -> Result<Self> {
        let norm = a.norm_sqr() + b.norm_sqr();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "|A|^2 + |B|^2 = {norm}, expected 1"
            )));
        }
        let phi0 = match space.basis.len() {
            0 => return Err(Error::NoDegeneracy("empty eigenspace".into())),
            1 => {
                if b.norm() > 0.0 {
                    return Err(Error::InvalidArgument(
                        "B must be zero for a simple eigenvalue".into(),
                    ));
                }
                &space.basis[0] * a
            }
            _ => &space.basis[0] * a + &space.basis[1] * b,
        };
        Ok(Self {
            mu,
            z_degenerate: space.value,
            basis: space.basis,
            a,
            b,
            phi0,
        })
    }

    /// Seed on a possibly simple eigenspace, `phi0 = basis[0]`.
    pub fn simple(u0: &CMatrix, h: &CMatrix, mu: C64, which: Selection) -> Result<Self> {
        let es = solve_seed_spectrum(u0, h, mu)?;
        let space = pick_eigenspace(&es, which, pencil_tolerance(u0, h, mu))?;
        Self::from_space(mu, space, c64(1.0, 0.0), C64::default())
    }

    /// Largest `|(U0 - mu H) v - z v|` over the stored basis.
    pub fn eigen_residual(&self, u0: &CMatrix, h: &CMatrix) -> f64 {
        let m = u0 - h * self.mu;
        self.basis
            .iter()
            .map(|v| (&m * v - v * self.z_degenerate).norm())
            .fold(0.0, f64::max)
    }
}

/// `Delta_a = U0^2 - a U0` and how well it commutes with `H`.
#[derive(Debug, Clone)]
pub struct ShiftData {
    pub a: f64,
    pub delta: CMatrix,
    pub commutation_defect: f64,
    pub valid: bool,
}

pub fn build_shift(u0: &CMatrix, h: &CMatrix, a: f64) -> Result<ShiftData> {
    ensure_same_dim(u0, h, "build_shift")?;
    let delta = u0 * u0 - u0 * c64(a, 0.0);
    let commutation_defect = commutator(&delta, h)?.norm();
    // scaled by the terms of Delta, which may cancel to zero (U0^2 = a U0)
    let scale = (u0 * u0).norm() + a.abs() * u0.norm();
    let valid = commutation_defect <= SHIFT_COMMUTATION_TOL * scale * h.norm();
    Ok(ShiftData {
        a,
        delta,
        commutation_defect,
        valid,
    })
}

/// Which root the degenerate eigenvalue `z_0 = c - i(k+m)` coincides with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

/// Parameters of the three-level scenario with equally spaced `H` spectrum
/// `k, k+m, k+2m` and initial density `diag((a+s)/2, (a-s)/2, c)`,
/// `s = sqrt(a^2 + 4b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquallySpaced {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub m: f64,
    pub k: f64,
}

impl EquallySpaced {
    /// The `c` satisfying `z_0 = z_plus` or `z_0 = z_minus`.
    pub fn degenerate_c(a: f64, b: f64, m: f64, branch: Branch) -> f64 {
        let root = (a * a + 4.0 * (b - m * m)).sqrt();
        match branch {
            Branch::Plus => 0.5 * (a + root),
            Branch::Minus => 0.5 * (a - root),
        }
    }

    pub fn branch(&self) -> Branch {
        let plus = Self::degenerate_c(self.a, self.b, self.m, Branch::Plus);
        let minus = Self::degenerate_c(self.a, self.b, self.m, Branch::Minus);
        if (self.c - plus).abs() <= (self.c - minus).abs() {
            Branch::Plus
        } else {
            Branch::Minus
        }
    }

    fn s(&self) -> f64 {
        (self.a * self.a + 4.0 * self.b).sqrt()
    }

    /// `H` in the basis where the initial density is diagonal.
    pub fn hamiltonian(&self) -> CMatrix {
        let (k, m) = (self.k, self.m);
        crate::matrix::from_real_rows(&[&[k + m, -m, 0.0], &[-m, k + m, 0.0], &[0.0, 0.0, k + m]])
    }

    pub fn initial_density(&self) -> CMatrix {
        let s = self.s();
        crate::matrix::diag_real(&[0.5 * (self.a + s), 0.5 * (self.a - s), self.c])
    }

    /// `b 1 - m^2 P_{k+m}` in the same basis (`P_{k+m}` projects on the third axis).
    pub fn delta_spectral_form(&self) -> CMatrix {
        crate::matrix::diag_real(&[self.b, self.b, self.b - self.m * self.m])
    }

    /// Initial density written in the eigenbasis of `H`, ordered
    /// `|k>, |k+m>, |k+2m>`: `a/2` on `|k>`, `|k+2m>`, `c` on `|k+m>` and
    /// `-s/2` coupling `|k>` and `|k+2m>`.
    pub fn initial_density_energy_basis(&self) -> CMatrix {
        let s = self.s();
        crate::matrix::from_real_rows(&[
            &[self.a / 2.0, 0.0, -s / 2.0],
            &[0.0, self.c, 0.0],
            &[-s / 2.0, 0.0, self.a / 2.0],
        ])
    }
}

/// Checks the admissibility conditions of an equally spaced scenario and
/// reports every violated rule by name.
pub fn validate_equally_spaced_scenario(
    a: f64,
    b: f64,
    c: f64,
    m: f64,
    k: f64,
) -> Result<EquallySpaced> {
    let mut bad = Vec::new();
    let four_m2 = 4.0 * m * m;
    let disc = a * a + 4.0 * b;
    if ![a, b, c, m, k].iter().all(|x| x.is_finite()) {
        bad.push(Violation::new("finite", "all parameters must be finite"));
        return Err(Error::Validation(bad));
    }
    if b == 0.0 {
        bad.push(Violation::new(
            "b-nonzero",
            "b = 0 gives a trivial transformed density",
        ));
    }
    if four_m2 <= 0.0 {
        bad.push(Violation::new("m-nonzero", "need 0 < 4m^2"));
    }
    if four_m2 >= disc {
        bad.push(Violation::new(
            "4m2-below-a2+4b",
            format!("need 4m^2 < a^2 + 4b, got {four_m2} >= {disc}"),
        ));
    }
    if disc >= a * a {
        bad.push(Violation::new(
            "a2+4b-below-a2",
            format!("need a^2 + 4b < a^2, got {disc} >= {}", a * a),
        ));
    }
    if a <= 0.0 {
        bad.push(Violation::new("a-positive", format!("need a > 0, got {a}")));
    }
    if disc >= 0.0 && a - disc.sqrt() < 0.0 {
        bad.push(Violation::new("positivity", "need a - sqrt(a^2 + 4b) >= 0"));
    }
    if c < 0.0 {
        bad.push(Violation::new(
            "c-nonnegative",
            format!("need c >= 0, got {c}"),
        ));
    }
    let lhs = c * (c - a);
    let rhs = b - m * m;
    if (lhs - rhs).abs() > 1e-12 * (1.0 + a * a + b.abs() + m * m) {
        bad.push(Violation::new(
            "degeneracy",
            format!("need c(c - a) = b - m^2, got {lhs} vs {rhs}"),
        ));
    }
    if bad.is_empty() {
        Ok(EquallySpaced { a, b, c, m, k })
    } else {
        Err(Error::Validation(bad))
    }
}
