use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;

use super::*;

fn sv(v: &[f64]) -> StateVector {
    StateVector::new(v.to_vec()).unwrap()
}

fn pv(v: &[f64]) -> ParameterVector {
    ParameterVector::new(v.to_vec()).unwrap()
}

fn all_models() -> Vec<Arc<dyn OdeModel>> {
    vec![
        Arc::new(LotkaVolterra),
        Arc::new(FitzHughNagumo),
        Arc::new(FitzHughNagumoLinear),
        Arc::new(Rossler),
        Arc::new(Lorenz96::new(6)),
    ]
}

fn field_at(model: &dyn OdeModel, x: &[f64], theta: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; model.state_dim()];
    model.field(x, theta, &mut out);
    out
}

/// Central differences of the field; column k is the derivative w.r.t. `z[k]`.
fn fd_jacobian(model: &dyn OdeModel, x: &[f64], theta: &[f64], wrt_state: bool) -> DMatrix<f64> {
    let d = model.state_dim();
    let n = if wrt_state { d } else { model.param_dim() };
    let mut jac = DMatrix::zeros(d, n);
    for k in 0..n {
        let base = if wrt_state { x[k] } else { theta[k] };
        let h = 1e-6 * (1.0 + base.abs());
        let eval = |delta: f64| {
            let (mut xs, mut ts) = (x.to_vec(), theta.to_vec());
            if wrt_state {
                xs[k] += delta;
            } else {
                ts[k] += delta;
            }
            field_at(model, &xs, &ts)
        };
        let (plus, minus) = (eval(h), eval(-h));
        for i in 0..d {
            jac[(i, k)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    jac
}

fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / (1.0 + b.amax())
}

fn probe(model: &dyn OdeModel, seed: u64) -> (Vec<f64>, Vec<f64>) {
    use rand::Rng;
    let mut rng = crate::rng::stream(seed, 0, crate::rng::Purpose::Probe);
    let x = (0..model.state_dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
    // FHN divides by θ₂, keep it away from zero.
    let theta = (0..model.param_dim()).map(|_| rng.random_range(0.5..3.0)).collect();
    (x, theta)
}

#[test]
fn lotka_volterra_field_example() {
    let f = eval_field(&LotkaVolterra, &sv(&[5.0, 3.0]), &pv(&[2.0, 1.0, 4.0, 1.0])).unwrap();
    assert_eq!(f.as_slice(), &[-5.0, 57.0]);
}

#[test]
fn fitzhugh_nagumo_field_example() {
    let f = eval_field(&FitzHughNagumo, &sv(&[-1.0, 1.0]), &pv(&[0.5, 0.2, 3.0])).unwrap();
    assert!((f.as_slice()[0] - 1.0).abs() < 1e-15);
    assert!((f.as_slice()[1] - 1.3 / 3.0).abs() < 1e-15);
}

#[test]
fn lotka_volterra_param_jacobian_example() {
    let j = eval_param_jacobian(&LotkaVolterra, &sv(&[5.0, 3.0]), &pv(&[2.0, 1.0, 4.0, 1.0])).unwrap();
    let want = DMatrix::from_row_slice(2, 4, &[5.0, -15.0, 0.0, 0.0, 0.0, 0.0, 15.0, -3.0]);
    assert_eq!(j, want);
}

#[test]
fn lorenz96_param_jacobian_is_ones() {
    let model = Lorenz96::new(40);
    let x: Vec<f64> = (0..40).map(|k| (k as f64 * 0.37).sin()).collect();
    let j = eval_param_jacobian(&model, &sv(&x), &pv(&[8.0])).unwrap();
    assert_eq!(j, DMatrix::from_element(40, 1, 1.0));
}

#[test]
fn cancelling_parameters_give_zero_field() {
    // LV at x = (1, 1): f₁θ = (θ0 − θ1, θ2 − θ3), zero when θ0 = θ1 and θ2 = θ3.
    let f = eval_field(&LotkaVolterra, &sv(&[1.0, 1.0]), &pv(&[3.0, 3.0, 0.5, 0.5])).unwrap();
    assert_eq!(f.as_slice(), &[0.0, 0.0]);
}

#[test]
fn jacobians_match_finite_differences() {
    for model in all_models() {
        for seed in 0..20 {
            let (x, theta) = probe(model.as_ref(), seed);
            for wrt_state in [true, false] {
                let d = model.state_dim();
                let n = if wrt_state { d } else { model.param_dim() };
                let mut jac = DMatrix::zeros(d, n);
                if wrt_state {
                    model.state_jacobian(&x, &theta, &mut jac);
                } else {
                    model.param_jacobian(&x, &theta, &mut jac);
                }
                let fd = fd_jacobian(model.as_ref(), &x, &theta, wrt_state);
                let err = rel_err(&jac, &fd);
                assert!(err <= 1e-6, "{} wrt_state={wrt_state} seed={seed}: {err}", model.name());
            }
        }
    }
}

#[test]
fn vjps_agree_with_dense_jacobians() {
    for model in all_models() {
        let (d, p) = (model.state_dim(), model.param_dim());
        for seed in 0..10 {
            let (x, theta) = probe(model.as_ref(), seed);
            let v: Vec<f64> = (0..d).map(|k| 0.3 * k as f64 - 0.7).collect();
            let mut jx = DMatrix::zeros(d, d);
            let mut jt = DMatrix::zeros(d, p);
            model.state_jacobian(&x, &theta, &mut jx);
            model.param_jacobian(&x, &theta, &mut jt);
            let vv = nalgebra::DVector::from_vec(v.clone());
            // vjps accumulate, so start from a nonzero offset.
            let mut gx = vec![1.0; d];
            let mut gt = vec![1.0; p];
            model.state_vjp(&x, &theta, &v, &mut gx);
            model.param_vjp(&x, &theta, &v, &mut gt);
            let want_x = jx.tr_mul(&vv).add_scalar(1.0);
            let want_t = jt.tr_mul(&vv).add_scalar(1.0);
            for (a, b) in gx.iter().zip(want_x.iter()).chain(gt.iter().zip(want_t.iter())) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{}: {a} vs {b}", model.name());
            }
        }
    }
}

#[test]
fn param_jacobian_ignores_theta_for_linear_models() {
    for model in all_models().into_iter().filter(|m| m.linear_form().is_some()) {
        let (x, theta) = probe(model.as_ref(), 3);
        let other: Vec<f64> = theta.iter().map(|t| -2.0 * t + 1.0).collect();
        let (d, p) = (model.state_dim(), model.param_dim());
        let (mut a, mut b, mut c) = (DMatrix::zeros(d, p), DMatrix::zeros(d, p), DMatrix::zeros(d, p));
        model.param_jacobian(&x, &theta, &mut a);
        model.param_jacobian(&x, &other, &mut b);
        model.linear_form().unwrap().coupling(&x, &mut c);
        assert_eq!(a, b, "{}", model.name());
        assert_eq!(a, c, "{}", model.name());
    }
}

#[test]
fn original_fitzhugh_nagumo_is_not_linear() {
    assert!(FitzHughNagumo.linear_form().is_none());
    assert!(FitzHughNagumoLinear.linear_form().is_some());
}

#[test]
fn fitzhugh_nagumo_reparameterization_matches() {
    let linear = FitzHughNagumo.linear_reparameterization();
    for seed in 0..10 {
        let (x, theta) = probe(&FitzHughNagumo, seed);
        let phi = FitzHughNagumo::linear_coefficients(&theta);
        let a = field_at(&FitzHughNagumo, &x, &theta);
        let b = field_at(&linear, &x, &phi);
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() <= 1e-12 * (1.0 + u.abs()), "{u} vs {v}");
        }
    }
}

#[test]
fn registry_lookups() {
    let lv = benchmark_registry("lotka_volterra", 0).unwrap();
    assert_eq!((lv.model.state_dim(), lv.model.param_dim()), (2, 4));
    assert_eq!(lv.theta_true.as_slice(), &[2.0, 1.0, 4.0, 1.0]);
    assert_eq!(lv.grid().unwrap().len(), 20);

    let l96 = benchmark_registry("lorenz96", 7).unwrap();
    assert_eq!((l96.model.state_dim(), l96.model.param_dim()), (40, 1));
    assert_eq!(l96.theta_true.as_slice(), &[8.0]);
    assert_eq!(l96.grid().unwrap().len(), 400);
    let again = benchmark_registry("lorenz96", 7).unwrap();
    assert_eq!(l96.initial_state, again.initial_state);
    assert_ne!(l96.initial_state, benchmark_registry("lorenz96", 8).unwrap().initial_state);

    let ro = benchmark_registry("rossler", 0).unwrap();
    assert_eq!(ro.initial_state.as_slice(), &[1.13, -1.74, 0.02]);
    assert_eq!(ro.grid().unwrap().len(), 400);

    for name in BENCHMARK_NAMES {
        assert_eq!(benchmark_registry(name, 1).unwrap().model.name(), name);
    }
}

#[test]
fn unknown_model_is_rejected() {
    assert!(matches!(benchmark_registry("van_der_pol", 0), Err(Error::UnknownModel(_))));
}

#[test]
fn dimension_mismatch_is_rejected() {
    assert!(matches!(
        eval_field(&LotkaVolterra, &sv(&[1.0]), &pv(&[2.0, 1.0, 4.0, 1.0])),
        Err(Error::Contract(_))
    ));
    assert!(matches!(
        eval_param_jacobian(&Rossler, &sv(&[1.0, 2.0, 3.0]), &pv(&[1.0])),
        Err(Error::Contract(_))
    ));
}

#[test]
fn non_finite_vectors_are_rejected() {
    assert!(StateVector::new(vec![1.0, f64::NAN]).is_err());
    assert!(ParameterVector::try_from(&[f64::INFINITY][..]).is_err());
}

proptest! {
    #[test]
    fn linear_split_reproduces_field(
        x in prop::collection::vec(-3.0f64..3.0, 6),
        theta in prop::collection::vec(-5.0f64..5.0, 4),
    ) {
        for model in all_models() {
            let Some(lin) = model.linear_form() else { continue };
            let (d, p) = (model.state_dim(), model.param_dim());
            let (x, theta) = (&x[..d], &theta[..p]);
            let f = field_at(model.as_ref(), x, theta);
            let mut f0 = vec![0.0; d];
            let mut f1 = DMatrix::zeros(d, p);
            lin.drift(x, &mut f0);
            lin.coupling(x, &mut f1);
            let split = nalgebra::DVector::from_vec(f0) + f1 * nalgebra::DVector::from_column_slice(theta);
            let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
            let diff = f.iter().zip(split.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            prop_assert!(diff <= 1e-12 * (1.0 + norm), "{}: {diff}", model.name());
        }
    }

    #[test]
    fn lorenz96_is_rotation_equivariant(
        x in prop::collection::vec(-3.0f64..3.0, 7),
        theta in -10.0f64..10.0,
        shift in 1usize..7,
    ) {
        let model = Lorenz96::new(7);
        let rotated: Vec<f64> = (0..7).map(|k| x[(k + shift) % 7]).collect();
        let f = field_at(&model, &x, &[theta]);
        let g = field_at(&model, &rotated, &[theta]);
        for k in 0..7 {
            prop_assert_eq!(g[k], f[(k + shift) % 7]);
        }
    }
}
