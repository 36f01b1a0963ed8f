//! Acceptance suite. Run with
//! `cargo test -p conical-core --test acceptance -- --nocapture --test-threads 1`
//! to see one PASS/FAIL line per criterion.

use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use conical::action::{total_area, verify_theorem1, ActionOptions};
use conical::field::{lemma3_check, FieldEvaluator};
use conical::kahler::{gram, kernel_r, verify_kahler_potential, verify_theorem2};
use conical::monodromy::{
    invariant_form, reality_residual, LoopGeometry, MonodromyRep, PairSet, Signature, SolveReport,
    SolverOptions,
};
use conical::ode::{transport, FrameTransport, PathPolyline, TaylorPatch, DEFAULT_TOL};
use conical::quadrature::QuadratureBudget;
use conical::{AccessoryVector, Configuration, OrderData, StressTensor};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::gamma;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn verdict(id: u32, name: &str, ok: bool, detail: String, elapsed: Duration, limit: Duration) {
    let in_time = elapsed <= limit;
    let status = if ok && in_time { "PASS" } else { "FAIL" };
    println!(
        "criterion {id:>2} {status} {name}: {detail} ({:.2} s, limit {} s)",
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    assert!(ok, "criterion {id} ({name}) failed: {detail}");
    assert!(in_time, "criterion {id} ({name}) exceeded its time limit");
}

fn testbed() -> &'static (Configuration, OrderData, SolveReport, FieldEvaluator) {
    static CELL: OnceLock<(Configuration, OrderData, SolveReport, FieldEvaluator)> = OnceLock::new();
    CELL.get_or_init(|| {
        let orders = OrderData::new(&[0.7; 4]).unwrap();
        let config = Configuration::new(vec![c(0.3, 0.0)]).unwrap();
        let (report, ev) = FieldEvaluator::solve(&config, &orders, &SolverOptions::default()).unwrap();
        (config, orders, report, ev)
    })
}

#[test]
fn criterion_01_forced_triple() {
    let t0 = Instant::now();
    let orders = OrderData::new(&[0.8; 3]).unwrap();
    let config = Configuration::triple();
    let acc = AccessoryVector::complete(&config, &orders, &[]).unwrap();
    let want = [c(0.48, 0.0), c(-0.48, 0.0), c(0.48, 0.0)];
    let got = [acc.at_zero, acc.at_one, acc.at_infinity];
    let err = got.iter().zip(&want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    let tensor = StressTensor::new(config.clone(), orders, acc).unwrap();
    let geo = LoopGeometry::new(&config, None).unwrap();
    let rep = MonodromyRep::compute(&tensor, &geo, DEFAULT_TOL).unwrap();
    let reality = reality_residual(&rep, PairSet::All)
        .into_iter()
        .map(f64::abs)
        .fold(0.0, f64::max);
    verdict(
        1,
        "forced three-point accessories",
        err < 1e-14 && reality < 1e-8,
        format!("value error {err:.2e}, reality residual {reality:.2e}"),
        t0.elapsed(),
        Duration::from_secs(10),
    );
}

#[test]
fn criterion_02_local_traces() {
    let t0 = Instant::now();
    let orders = OrderData::new(&[0.8; 5]).unwrap();
    let config = Configuration::new(vec![c(0.3, 0.4), c(-0.6, 1.1)]).unwrap();
    let geo = LoopGeometry::new(&config, None).unwrap();
    let expect = 2.0 * (0.2 * PI).cos();
    assert!((expect - 1.6180340).abs() < 1e-7);
    let mut trace_err: f64 = 0.0;
    let mut product: f64 = 0.0;
    for free in [
        vec![c(0.0, 0.0), c(0.0, 0.0)],
        vec![c(1.3, -0.7), c(-0.4, 2.2)],
        vec![c(-3.0, 0.5), c(0.25, 0.0)],
    ] {
        let tensor = StressTensor::from_free(&config, &orders, &free).unwrap();
        let rep = MonodromyRep::compute(&tensor, &geo, 1e-14).unwrap();
        for g in &rep.generators {
            trace_err = trace_err.max((g.trace().norm() - expect).abs());
        }
        product = product.max(rep.product_residual());
    }
    verdict(
        2,
        "local monodromy traces",
        trace_err < 1e-7 && product < 1e-8,
        format!("trace error {trace_err:.2e}, product residual {product:.2e}"),
        t0.elapsed(),
        Duration::from_secs(10),
    );
}

#[test]
fn criterion_03_symmetric_point() {
    let t0 = Instant::now();
    let orders = OrderData::new(&[0.7; 4]).unwrap();
    let config = Configuration::new(vec![c(0.5, 0.0)]).unwrap();
    let (report, _) = FieldEvaluator::solve(&config, &orders, &SolverOptions::default()).unwrap();
    let c1 = report.accessory.free[0].norm();
    let sig = report.form.signature;
    verdict(
        3,
        "symmetry oracle",
        c1 < 1e-6 && sig == Signature::PositiveNegative,
        format!("|c_1| = {c1:.2e}, signature {sig:?}"),
        t0.elapsed(),
        Duration::from_secs(60),
    );
}

#[test]
fn criterion_04_reality() {
    let t0 = Instant::now();
    let (_, _, report, _) = testbed();
    let im = report.accessory.free[0].im.abs();
    verdict(
        4,
        "reality oracle",
        im < 1e-6,
        format!("c_1 = {:.10}, |Im c_1| = {im:.2e}", report.accessory.free[0]),
        t0.elapsed(),
        Duration::from_secs(60),
    );
}

fn hyp2f1(a: f64, b: f64, cc: f64, z: Complex64) -> Complex64 {
    let mut term = c(1.0, 0.0);
    let mut sum = term;
    for k in 0..5000 {
        let k = k as f64;
        term *= z * ((a + k) * (b + k) / ((cc + k) * (k + 1.0)));
        sum += term;
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
    }
    sum
}

fn hypergeometric_e_phi(alpha: f64, z: Complex64) -> f64 {
    let a = alpha / 2.0;
    let b = 1.5 * alpha - 1.0;
    let cc = alpha;
    let s = cc - a - b;
    let a_1 = gamma(cc) * gamma(s) / (gamma(cc - a) * gamma(cc - b));
    let b_1 = gamma(cc) * gamma(-s) / (gamma(a) * gamma(b));
    let a_2 = gamma(2.0 - cc) * gamma(s) / (gamma(1.0 - a) * gamma(1.0 - b));
    let b_2 = gamma(2.0 - cc) * gamma(-s) / (gamma(a - cc + 1.0) * gamma(b - cc + 1.0));
    let k = a_1 * b_1 / (a_2 * b_2);
    let pre = z.powf(alpha / 2.0) * (1.0 - z).powf(alpha / 2.0);
    let u1 = pre * hyp2f1(a, b, cc, z);
    let u2 = pre * z.powf(1.0 - cc) * hyp2f1(a - cc + 1.0, b - cc + 1.0, 2.0 - cc, z);
    let d = u1.norm_sqr() - k * u2.norm_sqr();
    4.0 * k * (1.0 - alpha).powi(2) / (d * d)
}

#[test]
fn criterion_05_hypergeometric() {
    let t0 = Instant::now();
    let orders = OrderData::new(&[0.8; 3]).unwrap();
    let (_, ev) = FieldEvaluator::solve(&Configuration::triple(), &orders, &SolverOptions::default()).unwrap();
    let mut worst: f64 = 0.0;
    for z in [c(0.3, 0.3), c(0.5, -0.2), c(-0.4, 0.1)] {
        let want = hypergeometric_e_phi(0.8, z);
        let got = ev.field_at(z).unwrap().e_phi;
        worst = worst.max((got - want).abs() / want);
    }
    verdict(
        5,
        "hypergeometric field oracle",
        worst < 1e-6,
        format!("max relative error {worst:.2e}"),
        t0.elapsed(),
        Duration::from_secs(60),
    );
}

#[test]
fn criterion_06_gauss_bonnet() {
    let t0 = Instant::now();
    let budget = QuadratureBudget::default();
    let triple_orders = OrderData::new(&[0.8; 3]).unwrap();
    let (_, triple) =
        FieldEvaluator::solve(&Configuration::triple(), &triple_orders, &SolverOptions::default()).unwrap();
    let (_, orders, _, quad) = testbed();
    let mut worst: f64 = 0.0;
    for (ev, o) in [(&triple, &triple_orders), (quad, orders)] {
        let (area, _) = total_area(ev, &budget).unwrap();
        let want = o.gauss_bonnet_area();
        worst = worst.max((area - want).abs() / want);
    }
    verdict(
        6,
        "Gauss-Bonnet area",
        worst < 1e-3,
        format!("max relative error {worst:.2e}"),
        t0.elapsed(),
        Duration::from_secs(300),
    );
}

#[test]
fn criterion_07_action_gradient() {
    let t0 = Instant::now();
    let (config, orders, _, _) = testbed();
    let r = verify_theorem1(config, orders, 1e-3, &SolverOptions::default(), &ActionOptions::default()).unwrap();
    let e = &r.entries[0];
    // ∂S/∂z₁ = −2π c₁ in the normalization used here
    verdict(
        7,
        "action gradient",
        r.sign < 0.0 && e.relative_minus < 1e-3,
        format!(
            "2πc_1 = {:.8}, dS/dz_1 = {:.8}, relative mismatch {:.2e} (sign {})",
            2.0 * PI * e.c,
            e.ds_dz,
            e.relative_minus,
            r.sign
        ),
        t0.elapsed(),
        Duration::from_secs(1800),
    );
}

#[test]
fn criterion_08_metric_derivative() {
    let t0 = Instant::now();
    let (config, orders, _, _) = testbed();
    let r = verify_theorem2(config, orders, 1e-3, &SolverOptions::default(), &QuadratureBudget::default()).unwrap();
    let d = r.dc_dzbar[0][0];
    verdict(
        8,
        "accessory derivative against Gram matrix",
        r.residual < 1e-2 && d.re > 0.0,
        format!(
            "dc_1/dz̄_1 = {d:.8}, G_11 = {:.8}, residual {:.2e}",
            r.gram.matrix.entries[0][0], r.residual
        ),
        t0.elapsed(),
        Duration::from_secs(1800),
    );
}

#[test]
fn criterion_09_kahler_potential() {
    let t0 = Instant::now();
    let (config, orders, _, _) = testbed();
    let r = verify_kahler_potential(config, orders, 1e-3, &SolverOptions::default(), &ActionOptions::default())
        .unwrap();
    verdict(
        9,
        "Kähler potential",
        r.relative_mismatch < 5e-2,
        format!(
            "-d²S = {:.8}, metric = {:.8}, relative mismatch {:.2e}",
            r.hessian[0][0], r.metric.matrix.entries[0][0], r.relative_mismatch
        ),
        t0.elapsed(),
        Duration::from_secs(3600),
    );
}

fn schwarzian_error(ev: &FieldEvaluator, z: Complex64) -> f64 {
    let t = ev.tensor();
    let radius = 0.5 * t.singular_distance(z);
    let patch = TaylorPatch::new(t, &ev.frame_at(z).unwrap(), radius, 1e-14).unwrap();
    let d = patch.derivatives(z, 3);
    let fact = [1.0, 1.0, 2.0, 6.0];
    let num: Vec<Complex64> = (0..4).map(|k| d[k][0] / fact[k]).collect();
    let den: Vec<Complex64> = (0..4).map(|k| d[k][1] / fact[k]).collect();
    let mut q = [c(0.0, 0.0); 4];
    for k in 0..4 {
        let mut acc = num[k];
        for j in 0..k {
            acc -= q[j] * den[k - j];
        }
        q[k] = acc / den[0];
    }
    let (w1, w2, w3) = (q[1], 2.0 * q[2], 6.0 * q[3]);
    let s = w3 / w1 - 1.5 * (w2 / w1) * (w2 / w1);
    (s - t.eval(z).unwrap()).norm()
}

#[test]
fn criterion_10_invariants() {
    let t0 = Instant::now();
    let (_, _, _, ev) = testbed();
    let t = ev.tensor();
    let geo = ev.geometry();

    let mut drift: f64 = 0.0;
    for lp in &geo.loops {
        let end = transport(t, &FrameTransport::standard(geo.base_point), lp, DEFAULT_TOL).unwrap();
        drift = drift.max(end.wronskian_drift());
    }

    let mut single: f64 = 0.0;
    for probe in [c(0.6, -0.7), c(-0.4, 0.5), c(2.0, 1.5)] {
        let direct = ev.field_at(probe).unwrap().e_phi;
        let path = PathPolyline {
            vertices: vec![geo.base_point, probe],
            clearance: geo.clearance,
        };
        for lp in &geo.loops {
            let around = transport(t, ev.base_frame(), lp, DEFAULT_TOL).unwrap();
            let there = transport(t, &around, &path, DEFAULT_TOL).unwrap();
            let e = ev.frame_field(&there).unwrap().e_phi;
            single = single.max((e - direct).abs() / direct);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut schwarz: f64 = 0.0;
    let mut count = 0;
    while count < 20 {
        let z = c(rng.gen_range(-1.5..2.5), rng.gen_range(-2.0..2.0));
        if t.singular_distance(z) < 0.1 {
            continue;
        }
        schwarz = schwarz.max(schwarzian_error(ev, z));
        count += 1;
    }

    let orders5 = OrderData::new(&[0.7; 5]).unwrap();
    let sweep = [
        vec![c(0.3, 0.4), c(0.6, -0.5)],
        vec![c(0.35, 0.45), c(0.6, -0.5)],
        vec![c(0.4, 0.5), c(0.62, -0.48)],
        vec![c(0.3, 0.6), c(0.7, -0.5)],
        vec![c(0.25, 0.55), c(0.65, -0.6)],
    ];
    let mut gram_defect: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    for free in sweep {
        let cfg = Configuration::new(free).unwrap();
        let (_, ev5) = FieldEvaluator::solve(&cfg, &orders5, &SolverOptions::default()).unwrap();
        let g = gram(&ev5, &QuadratureBudget::default()).unwrap();
        let m = &g.matrix.entries;
        for i in 0..m.len() {
            for k in 0..m.len() {
                gram_defect = gram_defect.max((m[i][k] - m[k][i].conj()).norm());
            }
        }
        min_eig = min_eig.min(g.eigenvalues[0]);
    }

    let mut expansion: f64 = 0.0;
    for i in 0..4 {
        expansion = expansion.max(lemma3_check(ev, i).unwrap().error);
    }

    let mut kernel_exact = true;
    for zeta in [c(0.3, 0.7), c(-2.0, 1.0), c(5.0, -3.0), c(1e-3, 1e3)] {
        kernel_exact &= kernel_r(zeta, c(0.0, 0.0)).unwrap() == c(0.0, 0.0);
        kernel_exact &= kernel_r(zeta, c(1.0, 0.0)).unwrap() == c(0.0, 0.0);
    }

    let form = invariant_form(&MonodromyRep::compute(t, geo, DEFAULT_TOL).unwrap()).unwrap();
    let ok = drift < 1e-10
        && single < 1e-9
        && schwarz < 1e-7
        && gram_defect == 0.0
        && min_eig > 0.0
        && expansion < 1e-4
        && kernel_exact
        && form.signature == Signature::PositiveNegative;
    verdict(
        10,
        "invariant suites",
        ok,
        format!(
            "wronskian drift {drift:.1e}, single-valuedness {single:.1e}, schwarzian {schwarz:.1e}, \
             gram hermitian defect {gram_defect:.1e} with min eigenvalue {min_eig:.3e}, \
             expansion consistency {expansion:.1e}, kernel identities {kernel_exact}"
        ),
        t0.elapsed(),
        Duration::from_secs(600),
    );
}
