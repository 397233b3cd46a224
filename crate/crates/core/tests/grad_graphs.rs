mod common;

use common::random_tensor;
use neutral_core::losses::{dcl_loss, simclr_loss, tp_loss};
use neutral_core::model::Model;
use neutral_core::nn::{ConvEncoderSpec, EncoderSpec, Parametrization};
use neutral_tensor::{grad_check, grad_check_many, Tensor, TensorError};

const TOL: f64 = 1e-4;
const H: f64 = 1e-5;
const POINTS: u64 = 10;

fn lift<T>(r: neutral_core::Result<T>) -> neutral_tensor::Result<T> {
    r.map_err(|e| TensorError::Contract(e.to_string()))
}

#[test]
fn dcl_graph() {
    for p in 0..POINTS {
        let z = random_tensor(&[3, 5, 4], p, 1);
        let err = grad_check(|_, z| lift(dcl_loss(z, 0.5)), &z, H).unwrap();
        assert!(err < TOL, "point {p}: {err}");
    }
}

#[test]
fn transformation_prediction_graph() {
    for p in 0..POINTS {
        let logits = random_tensor(&[2, 4, 4], p, 2);
        let err = grad_check(|_, l| lift(tp_loss(l)), &logits, H).unwrap();
        assert!(err < TOL, "point {p}: {err}");
    }
}

#[test]
fn minibatch_contrastive_graph() {
    for p in 0..POINTS {
        let z = [random_tensor(&[3, 4], p, 3), random_tensor(&[3, 4], p, 4)];
        let err = grad_check_many(|_, v| lift(simclr_loss(v[0], v[1], 0.5)), &z, H).unwrap();
        assert!(err < TOL, "point {p}: {err}");
    }
}

fn check_model(spec: EncoderSpec, mode: Parametrization, input: &[usize]) {
    for p in 0..POINTS {
        let model = Model::dcl(spec.clone(), 3, mode, 0.5, p).unwrap();
        let batch = random_tensor(input, p, 5);
        let err = grad_check_many(|tape, vars| lift(model.loss(tape, vars, &batch)), &model.params(), H).unwrap();
        assert!(err < TOL, "{mode} point {p}: {err}");
    }
}

#[test]
fn full_dense_model_graph() {
    let spec = EncoderSpec::dense(3, 4);
    for mode in Parametrization::ALL {
        check_model(spec.clone(), mode, &[4, 3]);
    }
}

#[test]
fn full_conv_model_graph() {
    let spec = EncoderSpec::Conv {
        channels: 2,
        length: 8,
        conv: ConvEncoderSpec { stem: 3, stages: vec![4], top_kernel: 4, top_channels: 4 },
    };
    check_model(spec, Parametrization::Residual, &[2, 2, 8]);
}

#[test]
fn dcl_is_scale_invariant() {
    let z = random_tensor(&[2, 4, 6], 9, 6);
    let scaled = z.map(|v| 7.5 * v);
    let eval = |t: &Tensor| {
        let tape = neutral_tensor::Tape::new();
        dcl_loss(tape.constant(t.clone()), 0.1).unwrap().value().item().unwrap()
    };
    assert!((eval(&z) - eval(&scaled)).abs() < 1e-10);
}
