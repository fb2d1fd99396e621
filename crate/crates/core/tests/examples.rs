use lvn_darboux::darboux::{build_projector_rank1, master_residual};
use lvn_darboux::evolution::{uniform_grid, IterationSpec};
use lvn_darboux::matrix::{
    c64, hermitian_spectrum, matexp_hermitian_phase, max_abs_diff, CMatrix, CVector, Hermitian,
};
use lvn_darboux::oracle::{residual_of_function, RhsKind};
use lvn_darboux::scenario::{builtin, load_scenario, run, Mode, RunOptions, ScenarioSpec};
use lvn_darboux::seed::Selection;

fn rank1_at(
    ctx: &lvn_darboux::evolution::EvolutionContext,
    t: f64,
) -> lvn_darboux::darboux::Projector {
    let p = ctx.projector_at(t).unwrap();
    let j = (0..3)
        .max_by(|&a, &b| p.column(a).norm().partial_cmp(&p.column(b).norm()).unwrap())
        .unwrap();
    let phi: CVector = p.column(j).into_owned();
    build_projector_rank1(&phi, ctx.mu(), ctx.mu().conj()).unwrap()
}

#[test]
fn master_equation_holds_along_the_time_flow() {
    let ctx = builtin("ex51").unwrap().context().unwrap();
    let h = ctx.h.clone();
    let fd = 1e-6;
    for t in [-2.0, 0.0, 0.7, 3.0] {
        let u = ctx.background(t).unwrap();
        let v = &u * &h + &h * &u;
        let j = &h * &h;
        let proj = rank1_at(&ctx, t);
        let p_dot = (ctx.projector_at(t + fd).unwrap() - ctx.projector_at(t - fd).unwrap())
            / c64(2.0 * fd, 0.0);
        assert!(
            master_residual(&proj, &p_dot, &v, &j).unwrap() < 1e-7,
            "t = {t}"
        );
        // a projector held fixed in time is not a solution
        let frozen = CMatrix::zeros(3, 3);
        assert!(
            master_residual(&proj, &frozen, &v, &j).unwrap() > 1e-2,
            "t = {t}"
        );
    }
}

#[test]
fn epsilon_limit_approaches_linear_dynamics() {
    // at fixed t the solution tends to exp(-iHt) rho[1](0) exp(iHt), at rate O(eps)
    let mut spec = builtin("ex54").unwrap();
    let t = 1.0;
    let mut gap = Vec::new();
    for eps in [1e-4, 1e-5] {
        spec.variant = lvn_darboux::evolution::Variant::Epsilon { epsilon: eps };
        spec.mu = c64(0.0, 1.0 / eps);
        let ctx = spec.context().unwrap();
        let frame = matexp_hermitian_phase(&Hermitian::new(ctx.h.clone()).unwrap(), t).unwrap();
        let linear = &frame * ctx.evaluate(0.0).unwrap() * frame.adjoint();
        gap.push(max_abs_diff(&ctx.evaluate(t).unwrap(), &linear));
        let res = residual_of_function(
            &RhsKind::LinearPlusQuadratic { epsilon: eps },
            &ctx.h,
            |s| ctx.evaluate(s),
            &[t],
            1e-4,
        )
        .unwrap();
        assert!(res.max_ode_residual < 1e-6);
    }
    let ratio = gap[0] / gap[1];
    assert!(gap[0] < 1e-2 && (5.0..20.0).contains(&ratio), "{gap:?}");
}

#[test]
fn homogeneous_variant_is_scale_free() {
    let spec = builtin("ex55").unwrap();
    let ctx = spec.context().unwrap();
    for t in uniform_grid(-3.0, 3.0, 12) {
        let rho = ctx.evaluate(t).unwrap();
        assert!((rho.trace() - c64(1.0, 0.0)).norm() < 1e-12);
    }
    let res = residual_of_function(
        &RhsKind::Homogeneous,
        &ctx.h,
        |s| ctx.evaluate(s),
        &uniform_grid(-3.0, 3.0, 30),
        1e-4,
    )
    .unwrap();
    assert!(res.max_ode_residual < 1e-6, "{}", res.max_ode_residual);
    // C(c rho) rho scales like c^0 on the right side: rescaled data solves the same equation
    let scaled = |s: f64| ctx.evaluate(s).map(|m| m * c64(3.0, 0.0));
    let res = residual_of_function(&RhsKind::Homogeneous, &ctx.h, scaled, &[0.5], 1e-4).unwrap();
    assert!(res.max_ode_residual < 1e-6);
}

#[test]
fn gauge_shift_makes_the_solution_positive() {
    let ctx = builtin("ex51").unwrap().context().unwrap();
    let lambda = 0.21;
    for t in uniform_grid(-5.0, 5.0, 20) {
        let spec = hermitian_spectrum(&ctx.gauge_shift(lambda, t).unwrap()).unwrap();
        assert!(spec.iter().all(|&x| x > 0.0), "{spec:?}");
    }
    let res = residual_of_function(
        &RhsKind::Quadratic,
        &ctx.h,
        |s| ctx.gauge_shift(lambda, s),
        &uniform_grid(-3.0, 3.0, 12),
        1e-4,
    )
    .unwrap();
    assert!(res.max_ode_residual < 1e-7);
}

#[test]
fn second_transformation_keeps_the_spectrum() {
    let mut ctx = builtin("ex51").unwrap().context().unwrap();
    let before = hermitian_spectrum(&ctx.evaluate(0.0).unwrap()).unwrap();
    ctx.push_iteration(IterationSpec {
        mu: c64(0.0, 2.0),
        selection: Selection::Index { index: 0 },
    })
    .unwrap();
    assert_eq!(ctx.iterations(), 2);
    for t in [-4.0, 0.0, 4.0] {
        let after = hermitian_spectrum(&ctx.evaluate(t).unwrap()).unwrap();
        for (a, b) in after.iter().zip(&before) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn every_builtin_passes_verify_mode() {
    for name in ["ex51", "ex52", "ex53", "ex55", "ex56"] {
        let mut spec = builtin(name).unwrap();
        spec.grid.steps = 40;
        let out = run(&spec, Mode::Verify, &RunOptions::default()).unwrap();
        assert!(out.passed(), "{name}: {:?}", out.verify);
    }
}

#[test]
fn scenario_file_round_trip() {
    let spec = builtin("ex56").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ex56.json");
    std::fs::write(&path, spec.to_json().unwrap()).unwrap();
    let loaded = load_scenario(&path).unwrap();
    assert_eq!(loaded.to_json().unwrap(), spec.to_json().unwrap());
    let a = spec.context().unwrap().evaluate(0.4).unwrap();
    let b = loaded.context().unwrap().evaluate(0.4).unwrap();
    assert_eq!(a, b);
}

#[test]
fn invalid_scenarios_name_the_broken_rule() {
    let mut spec: ScenarioSpec = builtin("ex51").unwrap();
    spec.mu = c64(2.0, 0.0);
    let rules: Vec<String> = spec
        .violations()
        .iter()
        .map(|v| v.rule.to_string())
        .collect();
    assert!(rules.iter().any(|r| r == "mu-nonreal"), "{rules:?}");
    assert!(spec.validate().is_err());
}
