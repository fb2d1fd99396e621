//! Dense complex matrix helpers: commutators, Hermitian and general
//! eigendecomposition, spectral functions of Hermitian matrices and partial
//! traces over bipartite index spaces.
//!
//! Matrices are plain `nalgebra` dynamic matrices over `Complex64`. A
//! [`Hermitian`] wrapper certifies Hermiticity once at construction and keeps
//! the symmetrized copy, so every eigendecomposition downstream runs on an
//! exactly Hermitian input.

use nalgebra::{DMatrix, DVector, RowDVector, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;
pub type CRow = RowDVector<C64>;

/// Relative Hermiticity tolerance, scaled by the Frobenius norm.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Relative clustering tolerance for eigenvalues of general matrices.
pub const CLUSTER_TOL: f64 = 1e-8;

/// Singular values of `M - zI` below this fraction of `|M|` count as null.
const NULL_TOL: f64 = 1e-6;

const EIG_MAX_ITER: usize = 10_000;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(n: usize) -> CMatrix {
    CMatrix::zeros(n, n)
}

/// Builds a matrix from real-valued rows.
pub fn from_real_rows(rows: &[&[f64]]) -> CMatrix {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    CMatrix::from_fn(n, m, |i, j| c64(rows[i][j], 0.0))
}

pub fn diag_real(values: &[f64]) -> CMatrix {
    let n = values.len();
    CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            c64(values[i], 0.0)
        } else {
            C64::default()
        }
    })
}

pub fn diag(values: &[C64]) -> CMatrix {
    let n = values.len();
    CMatrix::from_fn(n, n, |i, j| if i == j { values[i] } else { C64::default() })
}

fn ensure_square(m: &CMatrix, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

pub(crate) fn ensure_same_dim(a: &CMatrix, b: &CMatrix, what: &str) -> Result<()> {
    ensure_square(a, what)?;
    ensure_square(b, what)?;
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{what}: {}x{} vs {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(())
}

/// `AB - BA`.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    ensure_same_dim(a, b, "commutator")?;
    Ok(a * b - b * a)
}

/// `max_jk |M_jk - conj(M_kj)|`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows().min(m.ncols());
    let mut worst = 0.0_f64;
    for j in 0..n {
        for k in j..n {
            worst = worst.max((m[(j, k)] - m[(k, j)].conj()).norm());
        }
    }
    worst
}

pub fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn is_hermitian(m: &CMatrix) -> bool {
    m.is_square() && hermiticity_defect(m) <= HERMITICITY_TOL * m.norm()
}

/// A matrix certified Hermitian at construction and stored symmetrized.
#[derive(Debug, Clone, PartialEq)]
pub struct Hermitian(CMatrix);

impl Hermitian {
    pub fn new(m: CMatrix) -> Result<Self> {
        ensure_square(&m, "Hermitian matrix")?;
        let defect = hermiticity_defect(&m);
        let tolerance = HERMITICITY_TOL * m.norm();
        if defect > tolerance {
            return Err(Error::NotHermitian { defect, tolerance });
        }
        Ok(Self(symmetrize(&m)))
    }

    /// Symmetrizes without the certification check. For matrices that are
    /// Hermitian by construction but carry accumulated rounding.
    pub fn symmetrized(m: &CMatrix) -> Self {
        Self(symmetrize(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    pub fn eig(&self) -> Result<EigenSystem> {
        herm_eig(self)
    }
}

impl AsRef<CMatrix> for Hermitian {
    fn as_ref(&self) -> &CMatrix {
        &self.0
    }
}

/// Eigenvalues with column-matched eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub values: Vec<C64>,
    pub vectors: Vec<CVector>,
    pub is_hermitian_input: bool,
}

/// A group of numerically coincident eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub value: C64,
    pub indices: Vec<usize>,
}

impl Cluster {
    pub fn multiplicity(&self) -> usize {
        self.indices.len()
    }
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Real parts of the eigenvalues, in stored order.
    pub fn real_values(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }

    /// Groups eigenvalues lying within `tol` of each other (single linkage),
    /// preserving the stored order of first appearance.
    pub fn clusters(&self, tol: f64) -> Vec<Cluster> {
        let n = self.values.len();
        let mut label: Vec<usize> = (0..n).collect();
        fn root(label: &mut [usize], mut i: usize) -> usize {
            while label[i] != i {
                label[i] = label[label[i]];
                i = label[i];
            }
            i
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if (self.values[i] - self.values[j]).norm() <= tol {
                    let (ri, rj) = (root(&mut label, i), root(&mut label, j));
                    if ri != rj {
                        label[ri.max(rj)] = ri.min(rj);
                    }
                }
            }
        }
        let mut out: Vec<Cluster> = Vec::new();
        let mut slot: Vec<Option<usize>> = vec![None; n];
        for i in 0..n {
            let r = root(&mut label, i);
            match slot[r] {
                Some(k) => out[k].indices.push(i),
                None => {
                    slot[r] = Some(out.len());
                    out.push(Cluster {
                        value: C64::default(),
                        indices: vec![i],
                    });
                }
            }
        }
        for cl in &mut out {
            let sum: C64 = cl.indices.iter().map(|&i| self.values[i]).sum();
            cl.value = sum / cl.indices.len() as f64;
        }
        out
    }

    /// `V diag(values) V^-1`, using `V^dagger` in place of the inverse for
    /// Hermitian inputs.
    pub fn reconstruct(&self) -> Option<CMatrix> {
        let n = self.values.len();
        if n == 0 {
            return Some(CMatrix::zeros(0, 0));
        }
        let v = CMatrix::from_columns(&self.vectors);
        let d = diag(&self.values);
        if self.is_hermitian_input {
            Some(&v * d * v.adjoint())
        } else {
            let inv = v.clone().try_inverse()?;
            Some(&v * d * inv)
        }
    }
}

/// Eigendecomposition of a Hermitian matrix: ascending real eigenvalues and
/// orthonormal eigenvectors.
pub fn herm_eig(m: &Hermitian) -> Result<EigenSystem> {
    let n = m.dim();
    if n == 0 {
        return Ok(EigenSystem {
            values: vec![],
            vectors: vec![],
            is_hermitian_input: true,
        });
    }
    let eig = nalgebra::SymmetricEigen::try_new(m.matrix().clone(), f64::EPSILON, EIG_MAX_ITER)
        .ok_or(Error::NoConvergence)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order
        .iter()
        .map(|&i| c64(eig.eigenvalues[i], 0.0))
        .collect();
    let vectors = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();
    Ok(EigenSystem {
        values,
        vectors,
        is_hermitian_input: true,
    })
}

/// Checks Hermiticity, then decomposes.
pub fn herm_eig_checked(m: &CMatrix) -> Result<EigenSystem> {
    herm_eig(&Hermitian::new(m.clone())?)
}

/// Ascending eigenvalues of the Hermitian part of `m`.
pub fn hermitian_spectrum(m: &CMatrix) -> Result<Vec<f64>> {
    Ok(herm_eig(&Hermitian::symmetrized(m))?.real_values())
}

fn schur_eigenvalues(m: &CMatrix) -> Result<Vec<C64>> {
    let n = m.nrows();
    let schur =
        Schur::try_new(m.clone(), f64::EPSILON, EIG_MAX_ITER).ok_or(Error::NoConvergence)?;
    let (_, t) = schur.unpack();
    let scale = t.norm().max(f64::MIN_POSITIVE);
    let mut values = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)].norm() > f64::EPSILON * scale {
            // leftover 2x2 block
            let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            let half_tr = (a + d) * 0.5;
            let disc = ((a - d) * 0.5 * ((a - d) * 0.5) + b * c).sqrt();
            values.push(half_tr + disc);
            values.push(half_tr - disc);
            i += 2;
        } else {
            values.push(t[(i, i)]);
            i += 1;
        }
    }
    Ok(values)
}

/// Lexicographic (real, imag) comparison treating real parts within `tol` as
/// equal.
pub(crate) fn lex_cmp(a: C64, b: C64, tol: f64) -> std::cmp::Ordering {
    if (a.re - b.re).abs() > tol {
        a.re.total_cmp(&b.re)
    } else {
        a.im.total_cmp(&b.im)
    }
}

/// Orthonormal basis of the numerical null space of `m`, taking exactly the
/// `k` smallest singular directions. Returns the basis and the largest of the
/// `k` singular values used.
pub(crate) fn null_space(m: &CMatrix, k: usize) -> (Vec<CVector>, Vec<f64>) {
    let n = m.ncols();
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested v_t");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let mut basis = Vec::with_capacity(k);
    let mut sigmas = Vec::with_capacity(k);
    for &i in order.iter().take(k.min(n)) {
        basis.push(v_t.row(i).adjoint());
        sigmas.push(svd.singular_values[i]);
    }
    (basis, sigmas)
}

/// Eigensystem of a general square matrix with the default clustering band
/// `CLUSTER_TOL * |M|_F`.
pub fn general_eig(m: &CMatrix) -> Result<EigenSystem> {
    let tol = CLUSTER_TOL * m.norm().max(f64::MIN_POSITIVE);
    general_eig_with_tol(m, tol)
}

/// Eigensystem of a general square matrix. Eigenvalues within `cluster_tol`
/// of each other are treated as one eigenvalue whose eigenspace is recovered
/// from the null space of `M - zI`; a cluster with fewer independent
/// eigenvectors than its size is reported as [`Error::Defective`].
///
/// Eigenvalues are sorted lexicographically by (real, imag); each cluster
/// appears as a run of equal values with an orthonormal eigenspace basis.
pub fn general_eig_with_tol(m: &CMatrix, cluster_tol: f64) -> Result<EigenSystem> {
    ensure_square(m, "general_eig input")?;
    let n = m.nrows();
    if n == 0 {
        return Ok(EigenSystem {
            values: vec![],
            vectors: vec![],
            is_hermitian_input: false,
        });
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidArgument(
            "matrix has non-finite entries".into(),
        ));
    }
    let raw = EigenSystem {
        values: schur_eigenvalues(m)?,
        vectors: vec![],
        is_hermitian_input: false,
    };
    let scale = m.norm().max(f64::MIN_POSITIVE);
    let null_tol = NULL_TOL * scale;

    let mut groups: Vec<(C64, Vec<CVector>)> = Vec::new();
    for cl in raw.clusters(cluster_tol) {
        let k = cl.multiplicity();
        let shifted = m - CMatrix::identity(n, n) * cl.value;
        let (basis, sigmas) = null_space(&shifted, k);
        let geometric = sigmas.iter().filter(|&&s| s <= null_tol).count();
        if geometric < k {
            return Err(Error::Defective {
                value: cl.value,
                algebraic: k,
                geometric,
            });
        }
        // refine the cluster value from the recovered invariant subspace
        let v = CMatrix::from_columns(&basis);
        let z = (v.adjoint() * m * &v).trace() / k as f64;
        groups.push((z, basis));
    }
    groups.sort_by(|a, b| lex_cmp(a.0, b.0, cluster_tol));

    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for (z, basis) in groups {
        for v in basis {
            values.push(z);
            vectors.push(v);
        }
    }
    Ok(EigenSystem {
        values,
        vectors,
        is_hermitian_input: false,
    })
}

/// `f(H) = V diag(f(lambda)) V^dagger` for a Hermitian `H`.
pub fn hermitian_function(h: &Hermitian, f: impl Fn(f64) -> C64) -> Result<CMatrix> {
    let es = herm_eig(h)?;
    Ok(apply_spectral(&es, f))
}

/// Applies `f` to a precomputed Hermitian eigensystem.
pub fn apply_spectral(es: &EigenSystem, f: impl Fn(f64) -> C64) -> CMatrix {
    let n = es.values.len();
    let mut out = CMatrix::zeros(n, n);
    for (z, v) in es.values.iter().zip(&es.vectors) {
        let w = f(z.re);
        out += (v * v.adjoint()) * w;
    }
    out
}

/// `exp(-i s H)` for Hermitian `H`.
pub fn matexp_hermitian_phase(h: &Hermitian, s: f64) -> Result<CMatrix> {
    hermitian_function(h, |lambda| C64::from_polar(1.0, -s * lambda))
}

/// Which tensor factor a partial trace keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subsystem {
    First,
    Second,
}

/// Partial trace over a `d1 x d2` bipartite space with Kronecker ordering
/// (index `i1 * d2 + i2`). `keep` names the factor that survives.
pub fn partial_trace(m: &CMatrix, dims: (usize, usize), keep: Subsystem) -> Result<CMatrix> {
    ensure_square(m, "partial_trace input")?;
    let (d1, d2) = dims;
    if d1 == 0 || d2 == 0 || d1 * d2 != m.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "cannot factor dimension {} as {d1} x {d2}",
            m.nrows()
        )));
    }
    Ok(match keep {
        Subsystem::First => CMatrix::from_fn(d1, d1, |i, j| {
            (0..d2).map(|k| m[(i * d2 + k, j * d2 + k)]).sum()
        }),
        Subsystem::Second => CMatrix::from_fn(d2, d2, |i, j| {
            (0..d1).map(|k| m[(k * d2 + i, k * d2 + j)]).sum()
        }),
    })
}

/// Kronecker product `A (x) B`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn pauli_x() -> CMatrix {
    from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(
        2,
        2,
        &[
            C64::default(),
            c64(0.0, -1.0),
            c64(0.0, 1.0),
            C64::default(),
        ],
    )
}

pub fn pauli_z() -> CMatrix {
    diag_real(&[1.0, -1.0])
}

/// Largest absolute entrywise difference.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}
