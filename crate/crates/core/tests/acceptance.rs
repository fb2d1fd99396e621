//! Acceptance criteria AC1-AC10. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::f64::consts::SQRT_2;
use std::process::ExitCode;
use std::time::Instant;

use lvn_darboux::darboux::{
    build_projector_general, build_projector_rank1, lemma_checks, transform_potential,
    transform_wavefunction, Projector,
};
use lvn_darboux::evolution::{uniform_grid, EvolutionContext, IterationSpec, Variant};
use lvn_darboux::matrix::{
    c64, commutator, hermitian_spectrum, hermiticity_defect, identity, kron, max_abs_diff,
    partial_trace, CMatrix, CRow, CVector, Subsystem, C64,
};
use lvn_darboux::oracle::{
    max_deviation, residual_of_closed_form, residual_of_function, rk4_integrate, rk4_path, RhsKind,
    Rk4Config,
};
use lvn_darboux::scenario::builtin;
use lvn_darboux::seed::{Selection, SpectralSeed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Check);

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn ex51() -> Result<EvolutionContext, String> {
    builtin("ex51").and_then(|s| s.context()).map_err(err)
}

fn five_point(f: impl Fn(f64) -> CMatrix, t: f64, h: f64) -> CMatrix {
    (f(t - 2.0 * h) - f(t - h) * c64(8.0, 0.0) + f(t + h) * c64(8.0, 0.0) - f(t + 2.0 * h))
        / c64(12.0 * h, 0.0)
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// `exp(-i s H)` for diagonal `H`.
fn diag_phase(h: &CMatrix, s: f64) -> CMatrix {
    CMatrix::from_fn(h.nrows(), h.ncols(), |i, j| {
        if i == j {
            (c64(0.0, -s) * h[(i, i)]).exp()
        } else {
            c64(0.0, 0.0)
        }
    })
}

fn rand_c(rng: &mut ChaCha8Rng) -> C64 {
    c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

fn rand_matrix(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| rand_c(rng))
}

fn rand_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let m = rand_matrix(rng, n);
    (&m + m.adjoint()) * c64(0.5, 0.0)
}

fn rand_vector(rng: &mut ChaCha8Rng, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| rand_c(rng))
}

fn rand_mu(rng: &mut ChaCha8Rng) -> C64 {
    let im = rng.random_range(0.3..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    c64(rng.random_range(-1.5..1.5), im)
}

/// Projector source recovered from a rank-one matrix: its largest column.
fn rank1_from_matrix(p: &CMatrix, mu: C64) -> Result<Projector, String> {
    let j = (0..p.ncols())
        .max_by(|&a, &b| p.column(a).norm().partial_cmp(&p.column(b).norm()).unwrap())
        .unwrap();
    let phi: CVector = p.column(j).into_owned();
    build_projector_rank1(&phi, mu, mu.conj()).map_err(err)
}

fn ac1() -> Check {
    let start = Instant::now();
    let ctx = ex51()?;
    let r2 = SQRT_2;
    let mut worst: f64 = 0.0;
    let mut worst_f: f64 = 0.0;
    for t in [-3.0, -1.0, 0.0, 1.0, 3.0] {
        let ch = f64::cosh(t / 2.0);
        let e = f64::exp(t);
        let z = c64(0.0, 0.0);
        let re = |x: f64| c64(x, 0.0);
        let expected = CMatrix::from_row_slice(
            3,
            3,
            &[
                re((1.0 + r2) / 2.0 - r2 / (1.0 + e)),
                z,
                c64(-1.0, -1.0) / (2.0 * r2 * ch),
                z,
                re((1.0 - r2) / 2.0 + r2 / (1.0 + e)),
                re(1.0 / (2.0 * ch)),
                c64(-1.0, 1.0) / (2.0 * r2 * ch),
                re(1.0 / (2.0 * ch)),
                re(0.5),
            ],
        );
        let got = ctx.u_int(t).map_err(err)?;
        worst = worst.max(max_abs_diff(&got, &expected));
        let f = ctx.f_a(t).map_err(err)?;
        worst_f = worst_f.max((f - c64(ch, 0.0)).norm());
    }
    let elapsed = start.elapsed().as_secs_f64();
    Ok((
        worst < 1e-10 && worst_f < 1e-12 && elapsed < 1.0,
        format!("max entry error {worst:.2e} (< 1e-10), |F - cosh(t/2)| {worst_f:.2e} (< 1e-12), {elapsed:.3} s (< 1 s)"),
    ))
}

fn ac2() -> Check {
    let start = Instant::now();
    let ctx = ex51()?;
    let series = ctx
        .evolve_series(&uniform_grid(-5.0, 5.0, 10_000))
        .map_err(err)?;
    let report = residual_of_closed_form(&RhsKind::Quadratic, &ctx.h, &series).map_err(err)?;
    let grid = uniform_grid(0.0, 5.0, 500);
    let closed = ctx.evolve_series(&grid).map_err(err)?;
    let traj = rk4_integrate(
        &RhsKind::Quadratic,
        &ctx.h,
        &closed.matrices[0],
        &grid,
        &Rk4Config::default(),
    )
    .map_err(err)?;
    let dev = max_deviation(&closed, &traj.series).map_err(err)?;
    let elapsed = start.elapsed().as_secs_f64();
    Ok((
        report.max_ode_residual < 1e-5 && dev < 1e-6 && elapsed < 10.0,
        format!(
            "max residual {:.2e} (< 1e-5), RK4 deviation {dev:.2e} (< 1e-6), {elapsed:.2} s (< 10 s)",
            report.max_ode_residual
        ),
    ))
}

fn ac3() -> Check {
    let ctx = ex51()?;
    let expected = sorted(vec![0.5 - SQRT_2 / 2.0, 0.5, 0.5 + SQRT_2 / 2.0]);
    let mut worst: f64 = 0.0;
    for t in uniform_grid(-5.0, 5.0, 49) {
        let spec = sorted(hermitian_spectrum(&ctx.evaluate(t).map_err(err)?).map_err(err)?);
        worst = worst.max(max_diff(&spec, &expected));
    }
    Ok((
        worst < 1e-8,
        format!("max eigenvalue error over 50 points {worst:.2e} (< 1e-8)"),
    ))
}

fn ac4() -> Check {
    let spec = builtin("ex53").map_err(err)?;
    let ctx = spec.context().map_err(err)?;
    let s5 = 5f64.sqrt();
    let tr_err = (ctx.u0.trace() - c64((15.0 + s5) / 2.0, 0.0)).norm();
    let active = [0usize, 1, 2];
    let block = CMatrix::from_fn(3, 3, |i, j| ctx.u0[(active[i], active[j])]);
    let eig = sorted(hermitian_spectrum(&block).map_err(err)?);
    let eig_err = max_diff(&eig, &sorted(vec![4.0, 1.0, (5.0 + s5) / 2.0]));

    // second seed vector, given in the basis diagonalising rho(0), moved to
    // the energy basis: e1 = (|0> - |2>)/sqrt2, e2 = (|0> + |2>)/sqrt2
    let f1 = c64(0.0, -((3.0 + s5) / 6.0).sqrt());
    let f2 = c64((2.0 / (9.0 + 3.0 * s5)).sqrt(), 0.0);
    let n = ctx.h.nrows();
    let mut v = CVector::zeros(n);
    v[0] = (f1 + f2) / SQRT_2;
    v[2] = (f2 - f1) / SQRT_2;
    let pencil = &ctx.u0 - &ctx.h * ctx.mu();
    let z = (v.adjoint() * &pencil * &v)[(0, 0)] / v.norm_squared();
    let eigen_res = (&pencil * &v - &v * z).norm();

    // t -> -infinity limit: U0 + (mu - conj mu)[|v><v|, H] / <v|v>
    let gap = ctx.mu() - ctx.mu().conj();
    let pv = &v * v.adjoint() / c64(v.norm_squared(), 0.0);
    let limit = &ctx.u0 + commutator(&pv, &ctx.h).map_err(err)? * gap;
    let corner = limit[(0, 2)];
    let corner_err = (corner - c64(-1.0 / 6.0, -2.0 * s5 / 3.0)).norm();
    let mut asym: f64 = 0.0;
    let mut off: f64 = 0.0;
    for t in [-20.0, -22.5, -25.0, -30.0] {
        let rho = ctx.evaluate(t).map_err(err)?;
        let frame = diag_phase(&ctx.h, -ctx.a() * t);
        let stripped = &frame * &rho * frame.adjoint();
        asym = asym.max(max_abs_diff(&stripped, &limit));
    }
    for t in uniform_grid(-25.0, 5.0, 60) {
        let d = ctx.u_int(t).map_err(err)? - &ctx.u0;
        for i in 0..n {
            for j in 0..n {
                if !(active.contains(&i) && active.contains(&j)) {
                    off = off.max(d[(i, j)].norm());
                }
            }
        }
    }
    // literal product of the printed display, for the record
    let literal = c64(0.0, 2.0) * (f2.conj() + f1.conj()) * (f2 - f1);
    Ok((
        tr_err < 1e-10 && eig_err < 1e-10 && eigen_res < 1e-10 && corner_err < 1e-12 && asym < 5e-4 && off < 1e-14,
        format!(
            "trace {tr_err:.1e}, eigenvalues {eig_err:.1e} (< 1e-10); asymptote {asym:.2e} (< 5e-4), \
             corner {corner:.4} (display product {:.4}); off-active {off:.1e} (< 1e-14)",
            literal + ctx.u0[(0, 2)]
        ),
    ))
}

fn ac5() -> Check {
    let spec = builtin("ex54").map_err(err)?;
    let ctx = spec.context().map_err(err)?;
    let eps = 0.1;
    let h = ctx.h.clone();
    let kind = RhsKind::LinearPlusQuadratic { epsilon: eps };
    let times = uniform_grid(-30.0, 30.0, 120);
    let report = residual_of_function(&kind, &h, |t| ctx.evaluate(t), &times, 1e-4).map_err(err)?;

    // derived coefficients: x(t) ~ w + A e^{eps m^2 t} |1>
    let (k, km, k2m) = (0usize, 1usize, 2usize);
    let big_a = ctx.seed.phi0[km];
    let mut w = ctx.seed.phi0.clone();
    w[km] = c64(0.0, 0.0);
    let rate = eps * 1.0;
    let gap = (ctx.mu() - ctx.mu().conj()) * eps;
    let n = h.nrows();
    let x_at = |i: usize| if i == km { big_a } else { w[i] };
    let env = |i: usize, j: usize, t: f64| {
        if (i == km) != (j == km) {
            (rate * t).exp()
        } else {
            1.0
        }
    };
    let mut worst: f64 = 0.0;
    let mut wrong_frame: f64 = 0.0;
    let frame_rate = 1.0 + ctx.a() * eps;
    for &t in &times {
        let rho = ctx.evaluate(t).map_err(err)?;
        let den = w.norm_squared() + big_a.norm_sqr() * (2.0 * rate * t).exp();
        for (s, target) in [(frame_rate, &mut worst), (1.0, &mut wrong_frame)] {
            let frame = diag_phase(&h, -s * t);
            let stripped = &frame * &rho * frame.adjoint() - &ctx.u0;
            for i in 0..n {
                for j in 0..n {
                    let expected = if [k, km, k2m].contains(&i) && [k, km, k2m].contains(&j) {
                        gap * (h[(j, j)] - h[(i, i)]) * x_at(i) * x_at(j).conj()
                    } else {
                        c64(0.0, 0.0)
                    };
                    let got = stripped[(i, j)] * den / env(i, j, t);
                    *target = target.max((got - expected).norm());
                }
            }
        }
    }
    Ok((
        report.max_ode_residual < 1e-5 && worst < 1e-8,
        format!(
            "residual {:.2e} (< 1e-5); envelope coefficients after stripping exp(-i(1+a eps)Ht) \
             constant within {worst:.2e} (< 1e-8), plain exp(-iHt) leaves {wrong_frame:.1e}",
            report.max_ode_residual
        ),
    ))
}

fn purity_first(rho: &CMatrix) -> f64 {
    let r = partial_trace(rho, (2, 2), Subsystem::First).unwrap();
    (&r * &r).trace().re
}

fn ac6() -> Check {
    let spec = builtin("ex56").map_err(err)?;
    let ctx = spec.context().map_err(err)?;
    let tensor = spec.tensor.clone().ok_or("ex56 has no tensor data")?;
    let (s7, s15) = (7f64.sqrt(), 15f64.sqrt());
    let c1 = (s15 - s7) / 20.0;
    let c2 = (26.0 + 2.0 * 105f64.sqrt()).sqrt() / 40.0;
    let big1 = kron(&tensor.h1, &identity(2));
    let big2 = kron(&identity(2), &tensor.h2);
    let (mut f_rel, mut p1, mut p2, mut energy, mut bb): (f64, f64, f64, f64, f64) =
        (0.0, 0.0, 0.0, 0.0, 0.0);
    for t in uniform_grid(-3.0, 3.0, 300) {
        let f = ctx.f_a(t).map_err(err)?.re;
        let expected = ((5.0 * t).exp() + (9.0 * t).exp()) / 2.0;
        f_rel = f_rel.max((f - expected).abs() / expected);
        let rho = ctx.evaluate(t).map_err(err)?;
        let tr = rho.trace();
        let r1 = partial_trace(&rho, (2, 2), Subsystem::First).map_err(err)?;
        let r2 = partial_trace(&rho, (2, 2), Subsystem::Second).map_err(err)?;
        let q1 = c1 * (2.0 * t).tanh();
        let q2 = c2 / (2.0 * t).cosh();
        // p(1) belongs to the factor kept by tracing out the first one
        let e_second = sorted(hermitian_spectrum(&(&r2 / tr)).map_err(err)?);
        let e_first = sorted(hermitian_spectrum(&(&r1 / tr)).map_err(err)?);
        p1 = p1.max(max_diff(&e_second, &sorted(vec![0.5 + q1, 0.5 - q1])));
        p2 = p2.max(max_diff(&e_first, &sorted(vec![0.5 + q2, 0.5 - q2])));
        energy = energy
            .max((&big1 * &rho).trace().norm())
            .max((&big2 * &rho).trace().norm());
        if t.abs() < 2.9 {
            let hs = 1e-3;
            let p = |s: f64| purity_first(&ctx.evaluate(s).unwrap());
            let deriv = (p(t - 2.0 * hs) - 8.0 * p(t - hs) + 8.0 * p(t + hs) - p(t + 2.0 * hs))
                / (12.0 * hs);
            let s1 = partial_trace(&(&rho * &rho), (2, 2), Subsystem::First).map_err(err)?;
            let rhs = (commutator(&s1, &r1).map_err(err)? * &tensor.h1).trace() * c64(2.0, 0.0);
            bb = bb.max((c64(0.0, deriv) - rhs).norm());
        }
    }
    Ok((
        f_rel < 1e-10 && p1 < 1e-10 && p2 < 1e-10 && energy < 1e-9 && bb < 1e-5,
        format!(
            "F relative {f_rel:.1e}; p(1) {p1:.1e}, p(2) {p2:.1e} (< 1e-10); energies {energy:.1e} (< 1e-9); \
             purity balance {bb:.1e} (< 1e-5)"
        ),
    ))
}

fn ac7() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    // (a) U^2 = U: random rank-2 orthogonal projector in 4 dimensions
    let n = 4;
    let q = rand_matrix(&mut rng, n).qr().q();
    let basis = q.columns(0, 2).into_owned();
    let u0 = &basis * basis.adjoint();
    let h = rand_hermitian(&mut rng, n);
    let mu = rand_mu(&mut rng);
    let seed = SpectralSeed::simple(&u0, &h, mu, Selection::Index { index: 0 }).map_err(err)?;
    let ctx = EvolutionContext::new(&h, &u0, seed, 1.0, Variant::Plain).map_err(err)?;
    let mut idem: f64 = 0.0;
    let mut linear: f64 = 0.0;
    for t in uniform_grid(-2.0, 2.0, 8) {
        let u1 = ctx.evaluate(t).map_err(err)?;
        idem = idem.max((&u1 * &u1 - &u1).norm());
        let p = ctx.projector_at(t).map_err(err)?;
        let p_dot = five_point(|s| ctx.projector_at(s).unwrap(), t, 1e-3);
        linear = linear.max((p_dot * c64(0.0, 1.0) - commutator(&h, &p).map_err(err)?).norm());
    }

    // (b), (c) on the stationary seed of the 3x3 example
    let ctx = ex51()?;
    let mut l1: f64 = 0.0;
    let mut l2: f64 = 0.0;
    for t in [-2.0, -0.5, 0.0, 1.0, 2.5] {
        let u = ctx.background(t).map_err(err)?;
        let proj = rank1_from_matrix(&ctx.projector_at(t).map_err(err)?, ctx.mu())?;
        let p_dot = five_point(|s| ctx.projector_at(s).unwrap(), t, 1e-3);
        let report = lemma_checks(&u, &ctx.h, &proj, &p_dot).map_err(err)?;
        l1 = l1.max(report.lemma1);
        l2 = l2.max(report.lemma2);
    }
    Ok((
        idem < 1e-9 && l2 < 1e-8 && l1 < 1e-8,
        format!(
            "(a) |U[1]^2 - U[1]| {idem:.1e} (< 1e-9) with |i dP/dt - [H,P]| {linear:.1e}; \
             (b) {l2:.1e} (< 1e-8); (c) {l1:.1e} (< 1e-8)"
        ),
    ))
}

fn ac8() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 3;
    let v = rand_matrix(&mut rng, n);
    let j = rand_matrix(&mut rng, n);
    let (mu, nu, lambda) = (rand_c(&mut rng), rand_c(&mut rng), rand_c(&mut rng));
    let i = c64(0.0, 1.0);
    let grid = uniform_grid(0.0, 1.0, 1000);
    let cfg = Rk4Config {
        step: 1e-3,
        tolerance: 1e-14,
        min_step: 1e-9,
        symmetrize: false,
    };
    let a = &v - &j * mu;
    let b = &v - &j * nu;
    let c = &v - &j * lambda;
    let phi = rk4_path(
        |_, y| Ok(&a * y * (-i)),
        &rand_matrix(&mut rng, n),
        &grid,
        &cfg,
    )
    .map_err(err)?;
    let chi = rk4_path(
        |_, y| Ok(y * &b * i),
        &rand_matrix(&mut rng, n),
        &grid,
        &cfg,
    )
    .map_err(err)?;
    let psi0 = CMatrix::from_fn(1, n, |_, _| rand_c(&mut rng));
    let psi = rk4_path(|_, y| Ok(y * &c * i), &psi0, &grid, &cfg).map_err(err)?;
    let p = CMatrix::from_diagonal(&CVector::from_vec(vec![
        c64(1.0, 0.0),
        c64(1.0, 0.0),
        c64(0.0, 0.0),
    ]));

    let dressed = |k: usize| -> Result<(CRow, CMatrix), String> {
        let proj =
            build_projector_general(&phi.series.matrices[k], &chi.series.matrices[k], &p, mu, nu)
                .map_err(err)?;
        let row: CRow = psi.series.matrices[k].row(0).into_owned();
        let psi1 = transform_wavefunction(&row, lambda, &proj).map_err(err)?;
        let v1 = transform_potential(&v, &j, &proj).map_err(err)?;
        Ok((psi1, v1))
    };
    let h = grid[1] - grid[0];
    let mut worst: f64 = 0.0;
    for k in (2..grid.len() - 2).step_by(25) {
        let rows: Vec<CRow> = (k - 2..=k + 2)
            .map(|m| dressed(m).map(|d| d.0))
            .collect::<Result<_, _>>()?;
        let d = (&rows[0] - &rows[1] * c64(8.0, 0.0) + &rows[3] * c64(8.0, 0.0) - &rows[4])
            / c64(12.0 * h, 0.0);
        let (psi1, v1) = dressed(k)?;
        let res = d * (-i) - &psi1 * (&v1 - &j * lambda);
        worst = worst.max(res.norm());
    }
    Ok((
        worst < 1e-7,
        format!("max residual of -i d psi[1] - psi[1](V[1] - lambda J) {worst:.2e} (< 1e-7)"),
    ))
}

fn ac9() -> Check {
    const CASES: usize = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut idem, mut herm, mut trace, mut proj_inv, mut gauge, mut casimir): (
        f64,
        f64,
        f64,
        f64,
        f64,
        f64,
    ) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..CASES {
        let n = rng.random_range(2..=6);
        let u = rand_hermitian(&mut rng, n);
        let h = rand_hermitian(&mut rng, n);
        let phi = rand_vector(&mut rng, n);
        let mu = rand_mu(&mut rng);
        let proj = build_projector_rank1(&phi, mu, mu.conj()).map_err(err)?;
        idem = idem.max(proj.idempotence_defect());
        let block = rand_matrix(&mut rng, n);
        let r = rng.random_range(1..n);
        let mut p = CMatrix::zeros(n, n);
        for d in 0..r {
            p[(d, d)] = c64(1.0, 0.0);
        }
        let general =
            build_projector_general(&block, &block.adjoint(), &p, mu, mu.conj()).map_err(err)?;
        idem = idem.max(general.idempotence_defect() / general.p.norm().max(1.0));
        let u1 = transform_potential(&u, &h, &proj).map_err(err)?;
        herm = herm.max(hermiticity_defect(&u1));
        trace = trace.max((u1.trace() - u.trace()).norm());
        let scale = rand_c(&mut rng) * 3.0 + c64(0.1, 0.0);
        let scaled = build_projector_rank1(&(&phi * scale), mu, mu.conj()).map_err(err)?;
        proj_inv = proj_inv.max(max_abs_diff(&scaled.p, &proj.p));
    }
    let ctx = ex51()?;
    for _ in 0..CASES {
        let t = rng.random_range(-5.0..5.0);
        let lambda = rng.random_range(-2.0..2.0);
        let base = sorted(hermitian_spectrum(&ctx.evaluate(t).map_err(err)?).map_err(err)?);
        let shifted =
            sorted(hermitian_spectrum(&ctx.gauge_shift(lambda, t).map_err(err)?).map_err(err)?);
        let expected: Vec<f64> = base.iter().map(|x| x + lambda).collect();
        gauge = gauge.max(max_diff(&shifted, &expected));
    }
    let cfg = Rk4Config {
        step: 1e-2,
        ..Rk4Config::default()
    };
    for case in 0..CASES {
        let n = 3;
        let u = rand_hermitian(&mut rng, n);
        let h = rand_hermitian(&mut rng, n);
        let end = if case % 2 == 0 { 10.0 } else { -10.0 };
        let grid = uniform_grid(0.0, end, 20);
        let traj = rk4_integrate(&RhsKind::Quadratic, &h, &u, &grid, &cfg).map_err(err)?;
        let powers = |m: &CMatrix| [m.trace(), (m * m).trace(), (m * m * m).trace()];
        let start = powers(&u);
        for m in &traj.series.matrices {
            for (a, b) in powers(m).iter().zip(&start) {
                casimir = casimir.max((a - b).norm());
            }
        }
    }
    Ok((
        idem <= 1e-11 && herm <= 1e-11 && trace <= 1e-10 && proj_inv <= 1e-12 && gauge <= 1e-9 && casimir <= 1e-7,
        format!(
            "{CASES} cases each: idempotence {idem:.1e}, Hermiticity {herm:.1e}, trace {trace:.1e}, \
             projective invariance {proj_inv:.1e}, gauge shift {gauge:.1e}, Casimirs {casimir:.1e}"
        ),
    ))
}

fn ac10() -> Check {
    let mut ctx = ex51()?;
    ctx.push_iteration(IterationSpec {
        mu: c64(0.0, 2.0),
        selection: Selection::Index { index: 0 },
    })
    .map_err(err)?;
    let tr0 = ctx.evaluate(0.0).map_err(err)?.trace();
    let spec0 = sorted(hermitian_spectrum(&ctx.evaluate(0.0).map_err(err)?).map_err(err)?);
    let (mut herm, mut trace, mut spec): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let grid = uniform_grid(-5.0, 5.0, 100);
    for &t in &grid {
        // assembled from the level projectors, with no re-symmetrisation
        let mut u2 = ctx.background(t).map_err(err)?;
        for proj in ctx.projectors_at(t).map_err(err)? {
            u2 += commutator(&proj.p, &ctx.h).map_err(err)? * proj.gap();
        }
        herm = herm.max(hermiticity_defect(&u2));
        if max_abs_diff(&u2, &ctx.evaluate(t).map_err(err)?) > 1e-10 {
            return Err(format!(
                "assembled U[2] disagrees with the closed form at t = {t}"
            ));
        }
        trace = trace.max((u2.trace() - tr0).norm());
        let u2s = (&u2 + u2.adjoint()) * c64(0.5, 0.0);
        spec = spec.max(max_diff(
            &sorted(hermitian_spectrum(&u2s).map_err(err)?),
            &spec0,
        ));
    }
    let report = residual_of_function(
        &RhsKind::Quadratic,
        &ctx.h,
        |t| ctx.evaluate(t),
        &grid,
        1e-4,
    )
    .map_err(err)?;
    Ok((
        herm <= 1e-10 && trace <= 1e-10 && spec <= 1e-7 && report.max_ode_residual < 1e-5,
        format!(
            "Hermiticity {herm:.1e} (<= 1e-10), trace drift {trace:.1e}, spectrum drift {spec:.1e} (<= 1e-7), \
             residual {:.1e}",
            report.max_ode_residual
        ),
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("AC1", ac1),
        ("AC2", ac2),
        ("AC3", ac3),
        ("AC4", ac4),
        ("AC5", ac5),
        ("AC6", ac6),
        ("AC7", ac7),
        ("AC8", ac8),
        ("AC9", ac9),
        ("AC10", ac10),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let (ok, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
