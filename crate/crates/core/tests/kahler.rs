use std::f64::consts::PI;

use conical::action::ActionOptions;
use conical::field::FieldEvaluator;
use conical::kahler::{
    dbar_solve_check, gram, kernel_r, metric, metric_entry, verify_kahler_potential, verify_theorem2,
    KernelEvaluator, PairingConvention, PAIRING,
};
use conical::monodromy::SolverOptions;
use conical::quadrature::QuadratureBudget;
use conical::{Configuration, OrderData};
use num_complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn solved(free: Vec<Complex64>, alpha: f64) -> FieldEvaluator {
    let orders = OrderData::new(&vec![alpha; free.len() + 3]).unwrap();
    let config = Configuration::new(free).unwrap();
    FieldEvaluator::solve(&config, &orders, &SolverOptions::default()).unwrap().1
}

fn f0(z: Complex64) -> Complex64 {
    z * (z - 1.0) * (-z.norm_sqr()).exp()
}

/// `∂f₀/∂z̄` for the fixture above.
fn g0(z: Complex64) -> Complex64 {
    -z * z * (z - 1.0) * (-z.norm_sqr()).exp()
}

#[test]
fn kernel_decays_like_inverse_cube() {
    let z = c(0.3, 0.2);
    for dir in [c(1.0, 0.0), c(-0.6, 0.8)] {
        let zeta = dir * 1e4;
        let v = zeta.powi(3) * kernel_r(zeta, z).unwrap();
        let want = -(z * z - z) / PI;
        assert!((v - want).norm() < 1e-3 * want.norm(), "{v} vs {want}");
    }
}

#[test]
fn dbar_fixture_is_recovered() {
    let budget = QuadratureBudget::default();
    for z in [c(0.3, 0.2), c(-0.5, 0.7), c(1.4, -0.3)] {
        let (f, err) = dbar_solve_check(&g0, z, &budget).unwrap();
        assert!((f - f0(z)).norm() < 1e-4, "{z}: {f} vs {} (±{err})", f0(z));
    }
    assert_eq!(dbar_solve_check(&g0, c(0.0, 0.0), &budget).unwrap().0, c(0.0, 0.0));
    assert_eq!(dbar_solve_check(&g0, c(1.0, 0.0), &budget).unwrap().0, c(0.0, 0.0));
}

#[test]
fn dbar_solution_is_linear() {
    let budget = QuadratureBudget::default();
    let g1 = |z: Complex64| z * (-2.0 * z.norm_sqr()).exp();
    let sum = |z: Complex64| g0(z) + g1(z);
    let z = c(0.4, -0.6);
    let a = dbar_solve_check(&g0, z, &budget).unwrap().0;
    let b = dbar_solve_check(&g1, z, &budget).unwrap().0;
    let s = dbar_solve_check(&sum, z, &budget).unwrap().0;
    assert!((s - a - b).norm() < 1e-12, "{}", (s - a - b).norm());
}

#[test]
fn gram_is_scalar_and_reflection_symmetric() {
    let budget = QuadratureBudget::default();
    let g = gram(&solved(vec![c(0.3, 0.2)], 0.7), &budget).unwrap();
    let h = gram(&solved(vec![c(0.7, 0.2)], 0.7), &budget).unwrap();
    assert_eq!(g.matrix.dim(), 1);
    let (a, b) = (g.matrix.entries[0][0], h.matrix.entries[0][0]);
    assert!(a.re > 0.0 && a.im == 0.0);
    assert!((a - b).norm() < 1e-6 * a.norm(), "{a} vs {b}");
    let m = metric(&g).unwrap();
    assert!(m.inverse_residual < 1e-10 * m.condition);
}

#[test]
fn gram_integrand_exponent_near_the_free_point() {
    let ev = solved(vec![c(0.3, 0.2)], 0.7);
    let kernel = KernelEvaluator::new(ev.tensor().config());
    let z1 = c(0.3, 0.2);
    let dir = c(0.6, 0.8);
    let sample = |r: f64| {
        let z = z1 + dir * r;
        let q = kernel.q(0, z).unwrap();
        (q.norm_sqr() / ev.field_at(z).unwrap().e_phi).ln()
    };
    let (r1, r2) = (1e-4, 1e-5);
    let slope = (sample(r1) - sample(r2)) / (r1.ln() - r2.ln());
    let want = 2.0 * 0.7 - 2.0;
    assert!((slope - want).abs() < 0.05, "{slope} vs {want}");
}

#[test]
fn gram_positive_definite_for_five_points() {
    let g = gram(&solved(vec![c(0.3, 0.4), c(0.6, -0.5)], 0.7), &QuadratureBudget::default()).unwrap();
    let m = &g.matrix.entries;
    assert_eq!(m.len(), 2);
    assert_eq!(m[0][1], m[1][0].conj());
    assert!(g.eigenvalues.iter().all(|&e| e > 0.0));
    assert!(g.hermitian_defect < 1e-8);
}

#[test]
fn pairing_convention_fixed_by_five_points() {
    let orders = OrderData::new(&[0.7; 5]).unwrap();
    let config = Configuration::new(vec![c(0.3, 0.4), c(0.6, -0.5)]).unwrap();
    let r = verify_theorem2(&config, &orders, 1e-3, &SolverOptions::default(), &QuadratureBudget::default())
        .unwrap();
    assert_eq!(r.best, PAIRING);
    assert_eq!(PAIRING, PairingConvention::Transposed);
    assert!(r.residual < 1e-3, "{}", r.residual);
    assert!(r.residual_direct > 10.0 * r.residual, "{} vs {}", r.residual_direct, r.residual);
}

#[test]
fn derivative_positive_at_symmetric_point() {
    let orders = OrderData::new(&[0.7; 4]).unwrap();
    let config = Configuration::new(vec![c(0.5, 0.0)]).unwrap();
    let r = verify_theorem2(&config, &orders, 1e-3, &SolverOptions::default(), &QuadratureBudget::default())
        .unwrap();
    assert!(r.dc_dzbar[0][0].re > 0.0);
    assert!(r.residual < 1e-2, "{}", r.residual);
}

#[test]
fn residual_shrinks_under_joint_refinement() {
    let orders = OrderData::new(&[0.7; 4]).unwrap();
    let config = Configuration::new(vec![c(0.3, 0.0)]).unwrap();
    let solver = SolverOptions::default();
    let budget = QuadratureBudget::default();
    let coarse = verify_theorem2(&config, &orders, 2e-2, &solver, &budget).unwrap();
    let fine = verify_theorem2(&config, &orders, 2e-3, &solver, &budget.refined()).unwrap();
    assert!(fine.residual < coarse.residual, "{} vs {}", fine.residual, coarse.residual);
}

#[test]
fn potential_and_gram_metric_agree() {
    let orders = OrderData::new(&[0.7; 4]).unwrap();
    let config = Configuration::new(vec![c(0.3, 0.0)]).unwrap();
    let solver = SolverOptions::default();
    let p = verify_kahler_potential(&config, &orders, 1e-3, &solver, &ActionOptions::default()).unwrap();
    let t = verify_theorem2(&config, &orders, 1e-3, &solver, &QuadratureBudget::default()).unwrap();
    let from_potential = p.hessian[0][0];
    let from_derivative = 2.0 * PI * t.dc_dzbar[0][0];
    let from_gram = metric_entry(&p.metric, 0, 0);
    assert!(p.relative_mismatch < 5e-2);
    let tol = 5e-2 * from_gram.norm();
    assert!((from_potential - from_gram).norm() < tol);
    assert!((from_derivative - from_gram).norm() < tol, "{from_derivative} vs {from_gram}");
}

#[test]
fn potential_mismatch_shrinks_with_budget() {
    let orders = OrderData::new(&[0.7; 4]).unwrap();
    let config = Configuration::new(vec![c(0.3, 0.0)]).unwrap();
    let solver = SolverOptions::default();
    let coarse_budget = QuadratureBudget {
        gauss: 4,
        sigma: 6,
        radial_step: 0.5,
        ..QuadratureBudget::default()
    };
    let coarse = ActionOptions {
        budget: coarse_budget,
        ..ActionOptions::default()
    };
    let a = verify_kahler_potential(&config, &orders, 1e-3, &solver, &coarse).unwrap();
    let b = verify_kahler_potential(&config, &orders, 1e-3, &solver, &ActionOptions::default()).unwrap();
    assert!(a.noise_dominated);
    assert!(b.relative_mismatch < a.relative_mismatch, "{} vs {}", b.relative_mismatch, a.relative_mismatch);
}
