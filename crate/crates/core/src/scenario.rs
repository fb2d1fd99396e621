//! Scenario registry, scenario files and the run pipeline
//! seed -> transformation -> closed-form evolution -> oracle.
//!
//! Scenario files are JSON. Complex numbers are `[re, im]` pairs and matrices
//! are arrays of rows.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result, Violation};
use crate::evolution::{uniform_grid, EvolutionContext, IterationSpec, TimeSeries, Variant};
use crate::matrix::{
    c64, diag_real, from_real_rows, hermitian_spectrum, hermiticity_defect, kron, pauli_x, pauli_z,
    CMatrix, C64, HERMITICITY_TOL,
};
use crate::oracle::{
    max_deviation, residual_of_function, rk4_integrate, subsystem_monitor, ResidualReport, RhsKind,
    Rk4Config, SubsystemRecord,
};
use crate::seed::{validate_equally_spaced_scenario, Branch, EquallySpaced, Selection};

/// Largest finite-difference residual accepted by `verify`.
pub const VERIFY_RESIDUAL_TOL: f64 = 1e-5;
/// Largest RK4 deviation from the closed form accepted by `verify`.
pub const VERIFY_RK4_TOL: f64 = 1e-6;

pub(crate) mod cmatrix_rows {
    use super::{CMatrix, C64};
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<C64>> = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMatrix, D::Error> {
        let rows: Vec<Vec<C64>> = Vec::deserialize(d)?;
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != m) {
            return Err(D::Error::custom("matrix rows have different lengths"));
        }
        Ok(CMatrix::from_fn(n, m, |i, j| rows[i][j]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub start: f64,
    pub end: f64,
    pub steps: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        uniform_grid(self.start, self.end, self.steps)
    }
}

/// Which eigenspace of `U0 - mu H` seeds the transformation and how the
/// seed mixes its first two canonical basis vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedSpec {
    #[serde(default)]
    pub selection: Selection,
    pub a: C64,
    pub b: C64,
}

/// Bipartite structure `H = H_1 x 1 + 1 x H_2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub dims: (usize, usize),
    #[serde(with = "cmatrix_rows")]
    pub h1: CMatrix,
    #[serde(with = "cmatrix_rows")]
    pub h2: CMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(with = "cmatrix_rows")]
    pub h: CMatrix,
    #[serde(with = "cmatrix_rows")]
    pub u0: CMatrix,
    pub mu: C64,
    pub a: f64,
    pub seed: SeedSpec,
    #[serde(default)]
    pub variant: Variant,
    /// Equally spaced parameters, checked against their admissibility rules.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equally_spaced: Option<EquallySpaced>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tensor: Option<TensorSpec>,
    pub grid: Grid,
    /// Transformations applied after the first.
    #[serde(default)]
    pub iterations: usize,
    /// Spectral parameters of the extra transformations; missing entries
    /// default to `(j + 2) mu` for the `j`-th one.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub iteration_mu: Vec<C64>,
    /// Informational constants (`k`, `m`, `omega`, ...), carried into provenance.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub parameters: BTreeMap<String, f64>,
}

impl ScenarioSpec {
    pub fn iteration_specs(&self) -> Vec<IterationSpec> {
        (0..self.iterations)
            .map(|j| IterationSpec {
                mu: self
                    .iteration_mu
                    .get(j)
                    .copied()
                    .unwrap_or(self.mu * c64((j + 2) as f64, 0.0)),
                selection: Selection::Index { index: 0 },
            })
            .collect()
    }

    /// Equation solved by the reported series.
    pub fn rhs_kind(&self) -> RhsKind {
        match self.variant {
            Variant::Plain | Variant::Gauge { .. } => RhsKind::Quadratic,
            Variant::Epsilon { epsilon } => RhsKind::LinearPlusQuadratic { epsilon },
            Variant::Homogeneous { .. } => RhsKind::Homogeneous,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Every failed rule, by name. An empty list means the scenario can run.
    pub fn violations(&self) -> Vec<Violation> {
        let mut bad = Vec::new();
        let n = self.h.nrows();
        if n == 0 || self.h.ncols() != n {
            bad.push(Violation::new(
                "h-square",
                format!("H is {}x{}", self.h.nrows(), self.h.ncols()),
            ));
            return bad;
        }
        if self.u0.shape() != self.h.shape() {
            bad.push(Violation::new(
                "dims",
                format!("U0 is {:?}, H is {:?}", self.u0.shape(), self.h.shape()),
            ));
            return bad;
        }
        let finite = |m: &CMatrix| m.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite(&self.h)
            || !finite(&self.u0)
            || !self.a.is_finite()
            || !(self.mu.re.is_finite() && self.mu.im.is_finite())
        {
            bad.push(Violation::new("finite", "all entries must be finite"));
            return bad;
        }
        for (rule, m) in [("hermitian-h", &self.h), ("hermitian-u0", &self.u0)] {
            let d = hermiticity_defect(m);
            if d > HERMITICITY_TOL * m.norm().max(1.0) {
                bad.push(Violation::new(rule, format!("Hermiticity defect {d:.3e}")));
            }
        }
        if self.mu.im == 0.0 {
            bad.push(Violation::new(
                "mu-nonreal",
                "mu must have a nonzero imaginary part",
            ));
        }
        let norm = self.seed.a.norm_sqr() + self.seed.b.norm_sqr();
        if (norm - 1.0).abs() > 1e-12 {
            bad.push(Violation::new(
                "seed-normalized",
                format!("|A|^2 + |B|^2 = {norm}"),
            ));
        }
        if !(self.grid.start.is_finite()
            && self.grid.end.is_finite()
            && self.grid.start <= self.grid.end)
        {
            bad.push(Violation::new("grid", "need finite start <= end"));
        }
        match self.variant {
            Variant::Epsilon { epsilon } if epsilon == 0.0 || !epsilon.is_finite() => {
                bad.push(Violation::new(
                    "epsilon-nonzero",
                    "epsilon must be finite and nonzero",
                ));
            }
            Variant::Gauge { lambda } if !lambda.is_finite() => {
                bad.push(Violation::new("gauge-finite", "lambda must be finite"));
            }
            _ => {}
        }
        if let Some(t) = &self.tensor {
            let (d1, d2) = t.dims;
            if d1 * d2 != n || t.h1.shape() != (d1, d1) || t.h2.shape() != (d2, d2) {
                bad.push(Violation::new(
                    "tensor-dims",
                    format!("dims ({d1}, {d2}) do not fit H of size {n}"),
                ));
            } else {
                let sum = kron(&t.h1, &CMatrix::identity(d2, d2))
                    + kron(&CMatrix::identity(d1, d1), &t.h2);
                let d = (&sum - &self.h).norm();
                if d > 1e-12 * self.h.norm().max(1.0) {
                    bad.push(Violation::new(
                        "tensor-sum",
                        format!("H differs from H_1 x 1 + 1 x H_2 by {d:.3e}"),
                    ));
                }
            }
        }
        if let Some(p) = &self.equally_spaced {
            if let Err(Error::Validation(v)) =
                validate_equally_spaced_scenario(p.a, p.b, p.c, p.m, p.k)
            {
                bad.extend(v);
            }
        }
        if !bad.is_empty() {
            return bad;
        }
        match self.context() {
            Ok(_) => {}
            Err(Error::ScenarioInvalid(msg)) => bad.push(Violation::new("shift-commutes", msg)),
            Err(Error::NoDegeneracy(msg)) => bad.push(Violation::new("seed-degenerate", msg)),
            Err(e) => bad.push(Violation::new("construction", e.to_string())),
        }
        bad
    }

    pub fn validate(&self) -> Result<()> {
        let bad = self.violations();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }

    /// Evolution context including every requested iteration.
    pub fn context(&self) -> Result<EvolutionContext> {
        let mut ctx = EvolutionContext::from_parameters(
            &self.h,
            &self.u0,
            self.a,
            self.mu,
            self.seed.selection,
            self.seed.a,
            self.seed.b,
            self.variant,
        )?;
        for spec in self.iteration_specs() {
            ctx.push_iteration(spec)?;
        }
        Ok(ctx)
    }
}

fn s(x: f64) -> f64 {
    x.sqrt()
}

fn half_pair() -> SeedSpec {
    let h = c64(1.0 / s(2.0), 0.0);
    SeedSpec {
        selection: Selection::MostDegenerate,
        a: h,
        b: h,
    }
}

fn ex51() -> ScenarioSpec {
    ScenarioSpec {
        name: "ex51".into(),
        description: "3x3 Hamiltonian, a = 1".into(),
        h: from_real_rows(&[
            &[0.0, 1.0, 0.0],
            &[1.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0 / s(2.0)],
        ]),
        u0: diag_real(&[0.5 + s(2.0) / 2.0, 0.5 - s(2.0) / 2.0, 0.5]),
        mu: c64(0.0, 1.0),
        a: 1.0,
        seed: half_pair(),
        variant: Variant::Plain,
        equally_spaced: None,
        tensor: None,
        grid: Grid {
            start: -5.0,
            end: 5.0,
            steps: 200,
        },
        iterations: 0,
        iteration_mu: Vec::new(),
        parameters: BTreeMap::new(),
    }
}

/// Equally spaced three-level scenario in the basis where `rho(0)` is diagonal.
pub fn equally_spaced(k: f64, m: f64, a: f64, b: f64, branch: Branch) -> Result<ScenarioSpec> {
    let c = EquallySpaced::degenerate_c(a, b, m, branch);
    let p = validate_equally_spaced_scenario(a, b, c, m, k)?;
    let parameters = BTreeMap::from([
        ("k".into(), k),
        ("m".into(), m),
        ("b".into(), b),
        ("c".into(), c),
    ]);
    Ok(ScenarioSpec {
        name: "ex52".into(),
        description: "equally spaced spectrum k, k+m, k+2m".into(),
        h: p.hamiltonian(),
        u0: p.initial_density(),
        mu: c64(0.0, 1.0),
        a,
        seed: half_pair(),
        variant: Variant::Plain,
        equally_spaced: Some(p),
        tensor: None,
        grid: Grid {
            start: -5.0,
            end: 5.0,
            steps: 200,
        },
        iterations: 0,
        iteration_mu: Vec::new(),
        parameters,
    })
}

/// Harmonic oscillator `H = omega (n + 1/2)` truncated to `levels` states,
/// with `rho(0)` acting on `|l>, |l+m>, |l+2m>`.
pub fn oscillator(
    levels: usize,
    l: usize,
    m: usize,
    a: f64,
    b: f64,
    omega: f64,
) -> Result<ScenarioSpec> {
    if m == 0 || l + 2 * m >= levels {
        return Err(Error::InvalidArgument(format!(
            "need 0 < m and l + 2m < levels, got l = {l}, m = {m}, levels = {levels}"
        )));
    }
    let k = omega * (l as f64 + 0.5);
    let mw = omega * m as f64;
    let c = EquallySpaced::degenerate_c(a, b, mw, Branch::Plus);
    let p = validate_equally_spaced_scenario(a, b, c, mw, k)?;
    let energies: Vec<f64> = (0..levels).map(|n| omega * (n as f64 + 0.5)).collect();
    let block = p.initial_density_energy_basis();
    let idx = [l, l + m, l + 2 * m];
    let mut u0 = CMatrix::zeros(levels, levels);
    for (bi, &i) in idx.iter().enumerate() {
        for (bj, &j) in idx.iter().enumerate() {
            u0[(i, j)] = block[(bi, bj)];
        }
    }
    let parameters = BTreeMap::from([
        ("l".into(), l as f64),
        ("m".into(), m as f64),
        ("b".into(), b),
        ("c".into(), c),
        ("omega".into(), omega),
        ("levels".into(), levels as f64),
    ]);
    Ok(ScenarioSpec {
        name: "ex53".into(),
        description: "harmonic oscillator, truncated".into(),
        h: diag_real(&energies),
        u0,
        mu: c64(0.0, 1.0 / omega),
        a,
        seed: half_pair(),
        variant: Variant::Plain,
        equally_spaced: Some(p),
        tensor: None,
        grid: Grid {
            start: -25.0,
            end: 5.0,
            steps: 300,
        },
        iterations: 0,
        iteration_mu: Vec::new(),
        parameters,
    })
}

fn ex53() -> ScenarioSpec {
    oscillator(6, 0, 1, 5.0, -4.0, 1.0).expect("oscillator parameters are admissible")
}

fn ex54() -> ScenarioSpec {
    let epsilon = 0.1;
    let omega = 1.0;
    let mut spec = ex53();
    spec.name = "ex54".into();
    spec.description = "linear equation with quadratic perturbation".into();
    spec.variant = Variant::Epsilon { epsilon };
    spec.mu = c64(0.0, 1.0 / (epsilon * omega));
    spec.parameters.insert("epsilon".into(), epsilon);
    spec.grid = Grid {
        start: -30.0,
        end: 30.0,
        steps: 300,
    };
    spec
}

fn ex55() -> ScenarioSpec {
    let mut spec = ex53();
    spec.name = "ex55".into();
    spec.description = "homogeneous modification, trace normalised".into();
    spec.variant = Variant::Homogeneous { normalize: true };
    spec.grid = Grid {
        start: -5.0,
        end: 5.0,
        steps: 200,
    };
    spec
}

fn ex56() -> ScenarioSpec {
    let h1 = pauli_z();
    let h2 = pauli_x() * c64(2.0, 0.0);
    let h = kron(&h1, &CMatrix::identity(2, 2)) + kron(&CMatrix::identity(2, 2), &h2);
    let (s7, s15) = (s(7.0), s(15.0));
    ScenarioSpec {
        name: "ex56".into(),
        description: "two spin-1/2 particles, a = 5".into(),
        h,
        u0: diag_real(&[
            (5.0 + s7) / 2.0,
            (5.0 - s7) / 2.0,
            (5.0 + s15) / 2.0,
            (5.0 - s15) / 2.0,
        ]),
        mu: c64(0.0, 1.0),
        a: 5.0,
        seed: half_pair(),
        variant: Variant::Plain,
        equally_spaced: None,
        tensor: Some(TensorSpec {
            dims: (2, 2),
            h1,
            h2,
        }),
        grid: Grid {
            start: -3.0,
            end: 3.0,
            steps: 300,
        },
        iterations: 0,
        iteration_mu: Vec::new(),
        parameters: BTreeMap::from([("spin_a".into(), 2.0), ("spin_b".into(), 1.0)]),
    }
}

pub fn builtin_scenarios() -> Vec<ScenarioSpec> {
    vec![
        ex51(),
        equally_spaced(1.0, 1.0, 5.0, -4.0, Branch::Plus)
            .expect("equally spaced parameters are admissible"),
        ex53(),
        ex54(),
        ex55(),
        ex56(),
    ]
}

pub fn builtin(name: &str) -> Result<ScenarioSpec> {
    builtin_scenarios()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::UnknownScenario(name.to_string()))
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioSpec> {
    let text = std::fs::read_to_string(path.as_ref())?;
    let spec = ScenarioSpec::from_json(&text)?;
    spec.validate()?;
    Ok(spec)
}

/// A builtin name or a path to a scenario file.
pub fn resolve_scenario(name_or_path: &str) -> Result<ScenarioSpec> {
    match builtin(name_or_path) {
        Ok(s) => Ok(s),
        Err(_) if Path::new(name_or_path).exists() => load_scenario(name_or_path),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Evolve,
    Verify,
    Subsystem,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "evolve" => Ok(Mode::Evolve),
            "verify" => Ok(Mode::Verify),
            "subsystem" => Ok(Mode::Subsystem),
            other => Err(Error::InvalidArgument(format!("unknown mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunOptions {
    pub fd_step: f64,
    pub rk4: Rk4Config,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            fd_step: 1e-4,
            rk4: Rk4Config::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    /// SHA-256 of the canonical JSON of scenario, mode and options.
    pub hash: String,
    pub scenario: String,
    pub mode: Mode,
    pub options: RunOptions,
    pub crate_version: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifySummary {
    pub max_ode_residual: f64,
    pub rk4_max_deviation: f64,
    pub rk4_steps: usize,
    pub residual_tolerance: f64,
    pub rk4_tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub series: TimeSeries,
    pub residuals: ResidualReport,
    pub verify: Option<VerifySummary>,
    pub subsystem: Option<Vec<SubsystemRecord>>,
    pub provenance: Provenance,
}

impl RunOutput {
    /// `false` only when verify mode found a tolerance failure.
    pub fn passed(&self) -> bool {
        self.verify.as_ref().is_none_or(|v| v.passed)
    }
}

#[derive(Serialize)]
struct HashInput<'a> {
    scenario: &'a ScenarioSpec,
    mode: Mode,
    options: &'a RunOptions,
}

pub fn provenance(spec: &ScenarioSpec, mode: Mode, options: &RunOptions) -> Result<Provenance> {
    let canonical = serde_json::to_vec(&HashInput {
        scenario: spec,
        mode,
        options,
    })
    .map_err(|e| Error::Parse(e.to_string()))?;
    Ok(Provenance {
        hash: hex::encode(Sha256::digest(&canonical)),
        scenario: spec.name.clone(),
        mode,
        options: *options,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
    })
}

pub fn run(spec: &ScenarioSpec, mode: Mode, options: &RunOptions) -> Result<RunOutput> {
    spec.validate()?;
    if mode == Mode::Subsystem && spec.tensor.is_none() {
        return Err(Error::Unsupported(format!(
            "scenario '{}' has no tensor structure",
            spec.name
        )));
    }
    let ctx = spec.context()?;
    let grid = spec.grid.points();
    let mut series = ctx.evolve_series(&grid)?;
    series.labels.insert("scenario".into(), spec.name.clone());
    let kind = spec.rhs_kind();
    let residuals =
        residual_of_function(&kind, &spec.h, |t| ctx.evaluate(t), &grid, options.fd_step)?;
    let verify = if mode == Mode::Verify {
        let traj = rk4_integrate(&kind, &spec.h, &series.matrices[0], &grid, &options.rk4)?;
        let dev = max_deviation(&traj.series, &series)?;
        let passed = residuals.max_ode_residual < VERIFY_RESIDUAL_TOL && dev < VERIFY_RK4_TOL;
        Some(VerifySummary {
            max_ode_residual: residuals.max_ode_residual,
            rk4_max_deviation: dev,
            rk4_steps: traj.steps_taken,
            residual_tolerance: VERIFY_RESIDUAL_TOL,
            rk4_tolerance: VERIFY_RK4_TOL,
            passed,
        })
    } else {
        None
    };
    let subsystem = match (&spec.tensor, mode) {
        (Some(t), Mode::Subsystem) => Some(subsystem_monitor(&series, t.dims, &t.h1, &t.h2)?),
        _ => None,
    };
    Ok(RunOutput {
        series,
        residuals,
        verify,
        subsystem,
        provenance: provenance(spec, mode, options)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::InvalidArgument(format!("unknown format '{other}'"))),
        }
    }
}

#[derive(Serialize)]
struct JsonPoint<'a> {
    t: f64,
    #[serde(with = "cmatrix_rows")]
    matrix: &'a CMatrix,
    eigenvalues: Vec<f64>,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    provenance: &'a Provenance,
    labels: &'a BTreeMap<String, String>,
    series: Vec<JsonPoint<'a>>,
    residuals: &'a ResidualReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    verify: &'a Option<VerifySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    subsystem: &'a Option<Vec<SubsystemRecord>>,
}

/// Serialises the output in `format`.
pub fn render(out: &RunOutput, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => {
            let series = out
                .series
                .times
                .iter()
                .zip(&out.series.matrices)
                .map(|(&t, m)| {
                    Ok(JsonPoint {
                        t,
                        matrix: m,
                        eigenvalues: hermitian_spectrum(m)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let report = JsonReport {
                provenance: &out.provenance,
                labels: &out.series.labels,
                series,
                residuals: &out.residuals,
                verify: &out.verify,
                subsystem: &out.subsystem,
            };
            let mut v =
                serde_json::to_vec_pretty(&report).map_err(|e| Error::Parse(e.to_string()))?;
            v.push(b'\n');
            Ok(v)
        }
        Format::Csv => render_csv(out),
    }
}

fn render_csv(out: &RunOutput) -> Result<Vec<u8>> {
    let n = out.series.dim();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    for i in 0..n {
        for j in 0..n {
            header.push(format!("u_{i}_{j}_re"));
            header.push(format!("u_{i}_{j}_im"));
        }
    }
    header.extend((0..n).map(|k| format!("eig_{k}")));
    header.extend(
        [
            "ode_residual",
            "hermiticity_defect",
            "spectrum_drift",
            "trace_drift",
        ]
        .map(String::from),
    );
    let sub_width = out
        .subsystem
        .as_ref()
        .and_then(|s| s.first())
        .map(|r| (r.reduced_first.len(), r.reduced_second.len()));
    if let Some((w1, w2)) = sub_width {
        header.extend((0..w1).map(|k| format!("p1_{k}")));
        header.extend((0..w2).map(|k| format!("p2_{k}")));
        header
            .extend(["energy_1", "energy_2", "balance_lhs_im", "balance_rhs_im"].map(String::from));
    }
    w.write_record(&header)?;
    let r = &out.residuals;
    for (k, (&t, m)) in out
        .series
        .times
        .iter()
        .zip(&out.series.matrices)
        .enumerate()
    {
        let mut row = vec![format!("{t}")];
        for i in 0..n {
            for j in 0..n {
                row.push(format!("{}", m[(i, j)].re));
                row.push(format!("{}", m[(i, j)].im));
            }
        }
        row.extend(hermitian_spectrum(m)?.iter().map(|x| format!("{x}")));
        for v in [
            &r.ode_residual,
            &r.hermiticity_defect,
            &r.spectrum_drift,
            &r.trace_drift,
        ] {
            row.push(v.get(k).map_or(String::new(), |x| format!("{x}")));
        }
        if let Some(sub) = &out.subsystem {
            let rec = &sub[k];
            row.extend(
                rec.reduced_first
                    .iter()
                    .chain(&rec.reduced_second)
                    .map(|x| format!("{x}")),
            );
            row.push(format!("{}", rec.energy_first));
            row.push(format!("{}", rec.energy_second));
            row.push(format!("{}", rec.balance_lhs.im));
            row.push(format!("{}", rec.balance_rhs.im));
        }
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
