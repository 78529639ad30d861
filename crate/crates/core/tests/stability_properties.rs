use proptest::prelude::*;
use uhrfrac_core::expr::Expr;
use uhrfrac_core::stability::Inequality;
use uhrfrac_core::*;

const TOL: f64 = 1e-10;

fn solved(name: &str, n: usize) -> (Scenario, std::sync::Arc<Mesh>, SolveResult) {
    let s = builtin_scenario(name).unwrap();
    let mesh = s.problem.mesh(n, 2.0).unwrap();
    let r = picard_solve(&s.problem, mesh.clone(), &SolveOptions { tol: TOL, ..Default::default() }).unwrap();
    assert!(r.converged);
    (s, mesh, r)
}

#[test]
fn fixed_point_has_negligible_residuals() {
    for name in SCENARIO_NAMES {
        let (s, _, r) = solved(name, 64);
        let rep = residual_check(&s.problem, &s.hypotheses, &r.y0).unwrap();
        assert!(rep.satisfied);
        assert!(rep.max_defect() <= 10.0 * TOL, "{name}: {:e}", rep.max_defect());
        let kinds: Vec<Inequality> = rep.entries.iter().map(|e| e.inequality).collect();
        assert_eq!(kinds, vec![Inequality::Head, Inequality::Impulse]);
    }
}

#[test]
fn small_perturbation_satisfies_the_inequalities() {
    for name in SCENARIO_NAMES {
        let (s, _, r) = solved(name, 64);
        let y = perturb(&s.problem, &s.hypotheses, &r.y0, 1e-3).unwrap();
        let rep = residual_check(&s.problem, &s.hypotheses, &y).unwrap();
        assert!(rep.satisfied, "{name}: {rep:?}");
    }
}

#[test]
fn large_perturbation_violates_an_inequality() {
    for name in SCENARIO_NAMES {
        let (s, _, r) = solved(name, 64);
        let y = perturb(&s.problem, &s.hypotheses, &r.y0, 10.0).unwrap();
        let rep = residual_check(&s.problem, &s.hypotheses, &y).unwrap();
        assert!(!rep.satisfied);
        assert!(rep.entries.iter().any(|e| !e.satisfied && e.max_excess > 0.0));
    }
}

/// Head defect of inequality (5) for α = γ = 1 computed directly with the
/// composite trapezoid rule on raw node values.
fn trapezoid_head_defect(s: &Scenario, mesh: &Mesh, y: &GridFunction) -> f64 {
    let env = s.problem.env();
    let t = mesh.nodes();
    let t1 = mesh.impulse_nodes(1).0;
    let yv = y.raw_values();
    let mut w = vec![0.0; t1 + 1];
    let kernel: Vec<f64> = (0..=t1).map(|k| s.problem.kernel.eval(&env, t[k], yv[k], 0.0).unwrap()).collect();
    for k in 1..=t1 {
        w[k] = w[k - 1] + 0.5 * (t[k] - t[k - 1]) * (kernel[k] + kernel[k - 1]);
    }
    let f: Vec<f64> = (0..=t1).map(|k| s.problem.f.eval(&env, t[k], yv[k], w[k]).unwrap()).collect();
    let mut integral = 0.0;
    let mut worst: f64 = 0.0;
    for k in 1..=t1 {
        integral += 0.5 * (t[k] - t[k - 1]) * (f[k] + f[k - 1]);
        worst = worst.max((yv[k] - yv[0] - integral).abs());
    }
    worst
}

#[test]
fn perturbed_head_defect_matches_independent_quadrature() {
    let (s, mesh, r) = solved("example-integer", 64);
    let eps = 1e-3;
    let y = perturb(&s.problem, &s.hypotheses, &r.y0, eps).unwrap();
    let rep = residual_check(&s.problem, &s.hypotheses, &y).unwrap();
    let head = rep.entries.iter().find(|e| e.inequality == Inequality::Head).unwrap();
    let oracle = trapezoid_head_defect(&s, &mesh, &y);
    assert!((head.max_defect - oracle).abs() < 1e-12, "{} vs {oracle}", head.max_defect);
    // Defect is ε(eᵗ − 1) less the change in ∫f, which L_f = 1/5 keeps within 30 %.
    let nominal = eps * (1f64.exp() - 1.0);
    assert!(head.max_defect > 0.7 * nominal && head.max_defect < 1.3 * nominal);
}

#[test]
fn envelope_checks() {
    let (s, mesh, r) = solved("example-integer", 64);
    let cert = StabilityCertificate::new(&s.problem, &s.hypotheses).unwrap();
    let same = verify_envelope(&r.y0, &r.y0, &cert, &s.hypotheses.phi, &mesh).unwrap();
    assert!(same.satisfied);
    assert_eq!(same.max_violation, 0.0);

    let coeff = cert.envelope_coeff.unwrap();
    let half = perturb(&s.problem, &s.hypotheses, &r.y0, 0.5 * coeff).unwrap();
    let inside = verify_envelope(&half, &r.y0, &cert, &s.hypotheses.phi, &mesh).unwrap();
    assert!(inside.satisfied && inside.min_margin > 0.0);

    let outside = perturb(&s.problem, &s.hypotheses, &r.y0, 1.5 * coeff).unwrap();
    let out = verify_envelope(&outside, &r.y0, &cert, &s.hypotheses.phi, &mesh).unwrap();
    assert!(!out.satisfied && out.max_violation > 0.0);

    let y = perturb(&s.problem, &s.hypotheses, &r.y0, 1e-3).unwrap();
    assert!(residual_check(&s.problem, &s.hypotheses, &y).unwrap().satisfied);
    let near = verify_envelope(&y, &r.y0, &cert, &s.hypotheses.phi, &mesh).unwrap();
    assert!(near.satisfied && near.min_margin > 0.0);
}

#[test]
fn envelope_needs_a_contraction() {
    let (s, mesh, r) = solved("example-integer", 16);
    let mut h = s.hypotheses.clone();
    h.l_f *= 10.0;
    h.l_g[0] *= 10.0;
    let cert = StabilityCertificate::new(&s.problem, &h).unwrap();
    assert!(matches!(
        verify_envelope(&r.y0, &r.y0, &cert, &h.phi, &mesh),
        Err(StabilityError::ContractionViolation { .. })
    ));
}

#[test]
fn h6_for_the_example_weights() {
    let mesh = build_mesh(&[], 2.0, 128, 2.0).unwrap();
    let exp = Expr::parse("mitlef(1, t)").unwrap();
    assert!(verify_h6(&PsiFunction::Identity, 1.0, &exp, &mesh).unwrap() <= 1.0 + 1e-6);
    let ml = Expr::parse("mitlef(0.5, t)").unwrap();
    let sup = verify_h6(&PsiFunction::Identity, 0.5, &ml, &mesh).unwrap();
    assert!(sup <= 1.0 + 1e-3);
    // Independent value of max over [0, 2] of I^{1/2}E_{1/2}(t)/E_{1/2}(t) is about 0.687.
    assert!((sup - 0.687).abs() < 0.01, "{sup}");
}

#[test]
fn h6_constant_weight_closed_form_for_each_psi() {
    let one = Expr::parse("1").unwrap();
    let mesh = build_mesh(&[], 2.0, 64, 2.0).unwrap();
    for psi in [PsiFunction::Identity, PsiFunction::power(2.0).unwrap(), PsiFunction::log(1.0).unwrap(), PsiFunction::exp(0.5).unwrap()] {
        for alpha in [0.3, 0.5, 1.0] {
            let exact = psi.offset(2.0).unwrap().powf(alpha) / gamma(alpha + 1.0);
            let got = verify_h6(&psi, alpha, &one, &mesh).unwrap();
            assert!((got - exact).abs() < 1e-10 * exact, "{psi} {alpha}: {got} vs {exact}");
        }
    }
}

proptest! {
    #[test]
    fn phi_grows_with_every_constant(
        l_f in 0.01f64..2.0, l_g in 0.01f64..2.0, k_bar in 0.01f64..2.0,
        l_ell in 0.01f64..2.0, c_phi in 0.01f64..2.0, horizon in 0.1f64..5.0,
        alpha in 0.05f64..=1.0, which in 0usize..6, factor in 1.0f64..3.0,
    ) {
        let s = builtin_scenario("example-rl").unwrap();
        let mut h = s.hypotheses.clone();
        h.l_f = l_f; h.l_g = vec![l_g]; h.k_bar = k_bar; h.l_ell = l_ell; h.c_phi = c_phi;
        let order = FractionalOrder::new(alpha, 0.0).unwrap();
        let base = phi_constant(&h, order, &PsiFunction::Identity, horizon).unwrap();
        let mut t_end = horizon;
        match which {
            0 => h.l_f *= factor,
            1 => h.l_g[0] *= factor,
            2 => h.k_bar *= factor,
            3 => h.l_ell *= factor,
            4 => h.c_phi *= factor,
            _ => t_end *= factor,
        }
        let bumped = phi_constant(&h, order, &PsiFunction::Identity, t_end).unwrap();
        prop_assert!(bumped >= base);
        prop_assert!(base >= 0.0);
    }

    #[test]
    fn envelope_blows_up_near_one(phi in 0.0f64..0.999_999, c in 0.01f64..10.0) {
        let e = envelope_coeff(phi, c).unwrap();
        prop_assert!(e >= 1.0 + c);
        prop_assert!(envelope_coeff(1.0 + phi, c).is_err());
    }
}
