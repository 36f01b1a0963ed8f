use conical::action::{action_of, ladder, remainder_exponents, total_area, write_ladder_csv, ActionOptions};
use conical::field::FieldEvaluator;
use conical::monodromy::SolverOptions;
use conical::quadrature::QuadratureBudget;
use conical::{Configuration, OrderData};
use num_complex::Complex64;

fn solved(free: Vec<Complex64>, alphas: &[f64]) -> FieldEvaluator {
    let orders = OrderData::new(alphas).unwrap();
    let config = Configuration::new(free).unwrap();
    FieldEvaluator::solve(&config, &orders, &SolverOptions::default()).unwrap().1
}

fn action_at(free: Vec<Complex64>, alphas: &[f64]) -> f64 {
    action_of(&solved(free, alphas), &ActionOptions::default()).unwrap().value
}

#[test]
fn gauss_bonnet_with_unequal_orders() {
    let alphas = [0.6, 0.75, 0.85, 0.9];
    let ev = solved(vec![Complex64::new(0.4, 0.6)], &alphas);
    let (area, err) = total_area(&ev, &QuadratureBudget::default()).unwrap();
    let want = OrderData::new(&alphas).unwrap().gauss_bonnet_area();
    assert!((area - want).abs() < 1e-6 * want, "{area} vs {want} (±{err})");
}

#[test]
fn invariant_under_complex_conjugation() {
    let a = action_at(vec![Complex64::new(0.3, 0.4)], &[0.7; 4]);
    let b = action_at(vec![Complex64::new(0.3, -0.4)], &[0.7; 4]);
    assert!((a - b).abs() < 1e-8 * a.abs(), "{a} vs {b}");
}

#[test]
fn symmetric_about_one_half() {
    let a = action_at(vec![Complex64::new(0.3, 0.0)], &[0.7; 4]);
    let b = action_at(vec![Complex64::new(0.7, 0.0)], &[0.7; 4]);
    assert!((a - b).abs() < 1e-8 * a.abs(), "{a} vs {b}");
}

#[test]
fn ladder_extrapolates_to_the_action() {
    let ev = solved(vec![Complex64::new(0.3, 0.0)], &[0.7; 4]);
    let eps = [2e-2, 1e-2, 5e-3, 2.5e-3];
    let opts = ActionOptions {
        epsilon_ladder: Some(eps.to_vec()),
        ..ActionOptions::default()
    };
    let s = action_of(&ev, &opts).unwrap();
    let diag = s.ladder.as_ref().unwrap();
    assert!((diag.value - s.value).abs() < 1e-4 * s.value.abs(), "{} vs {}", diag.value, s.value);
    // raw differences shrink like ε^{2(1−α)}
    let v: Vec<f64> = diag.samples.iter().map(|x| x.value).collect();
    let d: Vec<f64> = v.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let expected = 2f64.powf(2.0 * 0.3);
    for w in d.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio - expected).abs() < 0.1 * expected, "ratio {ratio} vs {expected}");
    }
    let mut csv = Vec::new();
    write_ladder_csv(diag, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("epsilon,value,extrapolant\n"));
    assert_eq!(text.lines().count(), eps.len() + 1);
}

#[test]
fn ladder_rejects_oversized_epsilon() {
    let ev = solved(vec![Complex64::new(0.3, 0.0)], &[0.7; 4]);
    assert!(ladder(&ev, &[0.5, 0.25], &QuadratureBudget::default()).is_err());
}

#[test]
fn remainder_exponents_are_sorted() {
    let o = OrderData::new(&[0.7, 0.6, 0.9, 0.8]).unwrap();
    let e = remainder_exponents(&o, 5);
    assert_eq!(e.len(), 5);
    assert!(e.windows(2).all(|w| w[0] < w[1]));
    assert!((e[0] - 0.2).abs() < 1e-12);
}

#[test]
fn refined_budget_stays_within_error_estimate() {
    let ev = solved(vec![Complex64::new(0.3, 0.2)], &[0.7; 4]);
    let coarse = action_of(&ev, &ActionOptions::default()).unwrap();
    let fine = action_of(
        &ev,
        &ActionOptions {
            budget: QuadratureBudget::default().refined(),
            ..ActionOptions::default()
        },
    )
    .unwrap();
    let diff = (coarse.value - fine.value).abs();
    assert!(diff <= coarse.error_estimate.max(1e-10 * coarse.value.abs()), "{diff} vs {}", coarse.error_estimate);
    assert!(fine.error_estimate <= coarse.error_estimate);
}

#[test]
fn rejects_orders_outside_unit_interval() {
    assert!(OrderData::new(&[1.2, 0.5, 0.5, 0.5]).is_err());
    let orders = OrderData::new(&[-0.2, 0.8, 0.8, 0.8]).unwrap();
    let config = Configuration::new(vec![Complex64::new(0.3, 0.0)]).unwrap();
    let (_, ev) = FieldEvaluator::solve(&config, &orders, &SolverOptions::default()).unwrap();
    assert!(action_of(&ev, &ActionOptions::default()).is_err());
}
