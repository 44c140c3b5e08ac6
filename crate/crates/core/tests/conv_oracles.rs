mod common;

use blm_probe::tensor::{Graph, Tensor};
use common::*;

const TOL: f64 = 1e-6;

fn run_conv(dims: usize, transposed: bool, x: &Tensor<f64>, w: &Tensor<f64>, b: &[f64]) -> Tensor<f64> {
    let mut g = Graph::new();
    let (xv, wv) = (g.input(x.clone()), g.input(w.clone()));
    let bv = g.input(Tensor::new(vec![b.len()], b.to_vec()).unwrap());
    let y = match (dims, transposed) {
        (2, false) => g.conv2d(xv, wv, bv),
        (3, false) => g.conv3d(xv, wv, bv),
        (2, true) => g.conv_transpose2d(xv, wv, bv),
        _ => g.conv_transpose3d(xv, wv, bv),
    }
    .unwrap();
    g.value(y).clone()
}

fn random_cases(dims: usize, transposed: bool, seed: u64) {
    let mut r = rng(seed);
    for case in 0..25 {
        let c = conv_case(dims, &mut r);
        let x = uniform(&c.input_shape(c.cin), -1.0, 1.0, &mut r);
        let w = if transposed {
            uniform(&c.weight_shape(c.cin, c.cout), -1.0, 1.0, &mut r)
        } else {
            uniform(&c.weight_shape(c.cout, c.cin), -1.0, 1.0, &mut r)
        };
        let b: Vec<f64> = uniform(&[c.cout], -1.0, 1.0, &mut r).into_data();
        let got = run_conv(dims, transposed, &x, &w, &b);
        let want = if transposed { conv_transpose_oracle(&x, &w, &b) } else { conv_oracle(&x, &w, &b) };
        assert_eq!(got.shape(), want.shape(), "case {case}");
        let err = max_abs_diff(got.data(), want.data());
        assert!(err < TOL, "case {case}: max deviation {err}");
    }
}

pub fn check_oracles() {
    for (i, (dims, transposed)) in [(2, false), (3, false), (2, true), (3, true)].into_iter().enumerate() {
        random_cases(dims, transposed, 100 + i as u64);
    }
}

pub fn check_adjoints() {
    adjoint_identity(2, 120);
    adjoint_identity(3, 121);
}

#[test]
fn conv2d_matches_nested_loops() {
    random_cases(2, false, 1);
}

#[test]
fn conv3d_matches_nested_loops() {
    random_cases(3, false, 2);
}

#[test]
fn conv_transpose2d_matches_scatter_oracle() {
    random_cases(2, true, 3);
}

#[test]
fn conv_transpose3d_matches_scatter_oracle() {
    random_cases(3, true, 4);
}

#[test]
fn conv3d_small_fixed_case() {
    let mut r = rng(10);
    let x = uniform(&[1, 1, 4, 5, 5], -1.0, 1.0, &mut r);
    let w = uniform(&[1, 1, 2, 3, 3], -1.0, 1.0, &mut r);
    let got = run_conv(3, false, &x, &w, &[0.25]);
    assert_eq!(got.shape(), [1, 1, 3, 3, 3]);
    assert!(max_abs_diff(got.data(), conv_oracle(&x, &w, &[0.25]).data()) < TOL);
}

#[test]
fn linear_matches_nested_loops() {
    let mut r = rng(11);
    let x = uniform(&[2, 3], -1.0, 1.0, &mut r);
    let w = uniform(&[4, 3], -1.0, 1.0, &mut r);
    let b = uniform(&[4], -1.0, 1.0, &mut r);
    let mut g = Graph::new();
    let (xv, wv, bv) = (g.input(x.clone()), g.input(w.clone()), g.input(b.clone()));
    let y = g.linear(xv, wv, bv).unwrap();
    for n in 0..2 {
        for o in 0..4 {
            let mut s = b.data()[o];
            for i in 0..3 {
                s += x.data()[n * 3 + i] * w.data()[o * 3 + i];
            }
            assert!((g.value(y).data()[n * 4 + o] - s).abs() < TOL);
        }
    }
}

/// `<conv(x), y> = <x, conv_transpose(y)>` with a shared kernel and zero bias.
fn adjoint_identity(dims: usize, seed: u64) {
    let mut r = rng(seed);
    for case in 0..25 {
        let c = conv_case(dims, &mut r);
        let x = uniform(&c.input_shape(c.cin), -1.0, 1.0, &mut r);
        let w = uniform(&c.weight_shape(c.cout, c.cin), -1.0, 1.0, &mut r);
        let cx = run_conv(dims, false, &x, &w, &vec![0.0; c.cout]);
        let y = uniform(cx.shape(), -1.0, 1.0, &mut r);
        let ty = run_conv(dims, true, &y, &w, &vec![0.0; c.cin]);
        assert_eq!(ty.shape(), x.shape());
        let (lhs, rhs) = (dot(cx.data(), y.data()), dot(x.data(), ty.data()));
        assert!((lhs - rhs).abs() <= 1e-5 * (1.0 + lhs.abs()), "case {case}: {lhs} vs {rhs}");
    }
}

#[test]
fn conv_transpose2d_is_adjoint_of_conv2d() {
    adjoint_identity(2, 20);
}

#[test]
fn conv_transpose3d_is_adjoint_of_conv3d() {
    adjoint_identity(3, 21);
}

#[test]
fn conv_transpose3d_equals_input_gradient_of_conv3d() {
    let mut r = rng(22);
    let x = uniform(&[1, 2, 3, 4, 4], -1.0, 1.0, &mut r);
    let w = uniform(&[3, 2, 2, 2, 3], -1.0, 1.0, &mut r);
    let mut g = Graph::new();
    let xv = g.leaf(x);
    let wv = g.input(w.clone());
    let bv = g.input(Tensor::zeros(&[3]));
    let y = g.conv3d(xv, wv, bv).unwrap();
    let upstream = uniform(g.shape(y), -1.0, 1.0, &mut r);
    let u = g.input(upstream.clone());
    let p = g.mul(y, u).unwrap();
    let loss = g.sum_all(p);
    let grads = g.backward(loss).unwrap();
    let fwd = run_conv(3, true, &upstream, &w, &[0.0, 0.0]);
    assert!(max_abs_diff(grads.wrt(xv).unwrap().data(), fwd.data()) < 1e-12);
}

#[test]
fn f32_paths_agree_with_f64() {
    let mut r = rng(30);
    let c = ConvCase { batch: 2, cin: 3, cout: 4, spatial: vec![5, 9, 7], kernel: vec![3, 4, 2] };
    let x = uniform(&c.input_shape(3), -1.0, 1.0, &mut r);
    let w = uniform(&c.weight_shape(4, 3), -1.0, 1.0, &mut r);
    let want = conv_oracle(&x, &w, &[0.0; 4]);
    let mut g = Graph::<f32>::new();
    let (xv, wv, bv) = (g.input(x.cast()), g.input(w.cast()), g.input(Tensor::zeros(&[4])));
    let y = g.conv3d(xv, wv, bv).unwrap();
    let got: Tensor<f64> = g.value(y).cast();
    assert!(max_abs_diff(got.data(), want.data()) < 1e-4);
}
