use std::collections::BTreeMap;

use iohd::interconnect::positive_feedback;
use iohd::linalg::{Mat, Tolerances, Vector};
use iohd::nonlinear::catalog::{catalog, linear_wrap, MassSpring2Dof};
use iohd::nonlinear::{positive_feedback_nl, simulate, NonlinearIohd};
use iohd::random;
use nalgebra::dvector;
use proptest::prelude::*;

fn tol() -> Tolerances {
    Tolerances::default()
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

fn catalog_model(which: usize, a: f64, b: f64) -> NonlinearIohd {
    match which {
        0 => catalog("mass_spring_2dof", &params(&[("d1", a), ("d2", b)]), &tol()),
        1 => catalog("oscillator", &params(&[("k", 1.0 + a), ("d", b)]), &tol()),
        _ => catalog("duffing", &params(&[("beta", a), ("d", b)]), &tol()),
    }
    .unwrap()
}

/// Central-difference gradient of `f` with step `h` scaled by `max(1, |x_i|)`.
fn fd_gradient(f: impl Fn(&Vector) -> f64, x: &Vector, h: f64) -> Vector {
    Vector::from_fn(x.len(), |i, _| {
        let step = h * x[i].abs().max(1.0);
        let mut hi = x.clone();
        let mut lo = x.clone();
        hi[i] += step;
        lo[i] -= step;
        (f(&hi) - f(&lo)) / (2.0 * step)
    })
}

fn state(n: usize, coords: &[f64]) -> Vector {
    Vector::from_fn(n, |i, _| coords[i % coords.len()])
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn catalog_gradients_are_consistent(
        which in 0usize..3,
        a in 0.0f64..2.0,
        b in 0.0f64..2.0,
        coords in prop::collection::vec(-2.0f64..2.0, 4),
    ) {
        let sys = catalog_model(which, a, b);
        let x = state(sys.n(), &coords);
        let fd = fd_gradient(|x| sys.hamiltonian(x), &x, 1e-5);
        let exact = sys.grad_h(&x);
        prop_assert!((&fd - &exact).amax() <= 1e-6 * exact.amax().max(1.0));
        for k in 0..sys.m() {
            let fd = fd_gradient(|x| sys.output(x)[k], &x, 1e-5);
            let exact = sys.jac_ct(&x).column(k).into_owned();
            prop_assert!((&fd - &exact).amax() <= 1e-6 * exact.amax().max(1.0));
        }
    }

    #[test]
    fn passivity_identity_holds_along_traces(
        which in 0usize..3,
        a in 0.0f64..1.0,
        b in 0.0f64..1.0,
        amp in 0.0f64..2.0,
        freq in 0.1f64..3.0,
        coords in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        let sys = catalog_model(which, a, b);
        let x0 = state(sys.n(), &coords);
        let m = sys.m();
        let input = move |t: f64| Vector::from_element(m, amp * (freq * t).sin());
        let trace = simulate(&sys, &x0, &input, 1e-2, 2.0).unwrap();
        prop_assert!(trace.max_passivity_violation() <= 1e-9);
        prop_assert!(trace.min_dissipation() >= -1e-9);
    }

    #[test]
    fn port_hamiltonian_output_matches_output_derivative(
        d1 in 0.0f64..2.0,
        d2 in 0.0f64..2.0,
        coords in prop::collection::vec(-2.0f64..2.0, 4),
        u in prop::collection::vec(-2.0f64..2.0, 2),
    ) {
        let sys = MassSpring2Dof { d1, d2, ..Default::default() }.nonlinear(&tol()).unwrap();
        let x = state(4, &coords);
        let u = Vector::from_vec(u);
        let snap = sys.to_port_hamiltonian(&x).unwrap();
        let y_ph = (&snap.g + &snap.p).transpose() * sys.grad_h(&x) + (&snap.m + &snap.s) * &u;
        let z = sys.diff_output(&x, &u).unwrap();
        prop_assert!((&y_ph - &z).amax() <= 1e-10);
    }

    #[test]
    fn composite_hessian_is_interconnection_energy(seed: u64, n1 in 1usize..4, n2 in 1usize..4, m in 1usize..3) {
        let mut rng = random::rng(seed);
        let s1 = random::linear_iohd(&mut rng, n1, m, true);
        let s2 = random::linear_iohd(&mut rng, n2, m, true);
        let nl = positive_feedback_nl(&linear_wrap(&s1, &tol()).unwrap(), &linear_wrap(&s2, &tol()).unwrap()).unwrap();
        let n = n1 + n2;
        let x = Vector::from_fn(n, |i, _| 0.3 * i as f64 - 0.5);
        let h = 1e-5;
        let hessian = Mat::from_fn(n, n, |i, j| {
            let mut hi = x.clone();
            let mut lo = x.clone();
            hi[j] += h;
            lo[j] -= h;
            (nl.grad_h(&hi)[i] - nl.grad_h(&lo)[i]) / (2.0 * h)
        });
        let q = positive_feedback(&s1, &s2).unwrap().q().clone();
        prop_assert!((&hessian - &q).amax() <= 1e-6 * q.amax().max(1.0));
    }
}

#[test]
fn diff_output_converges_at_second_order() {
    let sys = MassSpring2Dof {
        d1: 0.5,
        d2: 0.5,
        ..Default::default()
    }
    .nonlinear(&tol())
    .unwrap();
    let x0 = dvector![1.0, -0.5, 0.3, 0.8];
    let errors: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
        .iter()
        .map(|&dt| {
            let trace = simulate(&sys, &x0, &|_| Vector::zeros(2), dt, 1.0).unwrap();
            (1..trace.len() - 1)
                .map(|k| {
                    let fd = (&trace.outputs[k + 1] - &trace.outputs[k - 1]) / (2.0 * dt);
                    (fd - &trace.diff_outputs[k]).amax()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    for pair in errors.windows(2) {
        let slope = (pair[0] / pair[1]).log2();
        assert!((1.8..=2.2).contains(&slope), "slope {slope}");
    }
}
