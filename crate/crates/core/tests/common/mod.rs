//! Independent reference implementations shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use blm_probe::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut impl Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(lo..hi))
}

/// Uniform values kept at least `gap` away from zero.
pub fn away_from_zero(shape: &[usize], gap: f64, rng: &mut impl Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| {
        let m = rng.random_range(gap..1.0);
        if rng.random_bool(0.5) {
            m
        } else {
            -m
        }
    })
}

fn pad3(s: &[usize]) -> [usize; 3] {
    let mut a = [1; 3];
    a[3 - s.len()..].copy_from_slice(s);
    a
}

/// Direct valid cross-correlation. `x: [B, Cin, sp..]`, `w: [Cout, Cin, k..]`.
pub fn conv_oracle(x: &Tensor<f64>, w: &Tensor<f64>, b: &[f64]) -> Tensor<f64> {
    let (xs, ws) = (x.shape(), w.shape());
    let dims = xs.len() - 2;
    let (batch, cin, cout) = (xs[0], xs[1], ws[0]);
    let [d, h, wd] = pad3(&xs[2..]);
    let [kd, kh, kw] = pad3(&ws[2..]);
    let (od, oh, ow) = (d - kd + 1, h - kh + 1, wd - kw + 1);
    let mut out_shape = vec![batch, cout];
    out_shape.extend_from_slice(&[od, oh, ow][3 - dims..]);
    let xi = |n, c, z, y, x_| (((n * cin + c) * d + z) * h + y) * wd + x_;
    let wi = |o, c, a, bb, e| (((o * cin + c) * kd + a) * kh + bb) * kw + e;
    let mut out = vec![0.0; batch * cout * od * oh * ow];
    let mut idx = 0;
    for n in 0..batch {
        for o in 0..cout {
            for z in 0..od {
                for y in 0..oh {
                    for q in 0..ow {
                        let mut s = b[o];
                        for c in 0..cin {
                            for a in 0..kd {
                                for bb in 0..kh {
                                    for e in 0..kw {
                                        s += x.data()[xi(n, c, z + a, y + bb, q + e)] * w.data()[wi(o, c, a, bb, e)];
                                    }
                                }
                            }
                        }
                        out[idx] = s;
                        idx += 1;
                    }
                }
            }
        }
    }
    Tensor::new(out_shape, out).unwrap()
}

/// Direct scatter form of the transposed convolution.
/// `x: [B, Cin, sp..]`, `w: [Cin, Cout, k..]`.
pub fn conv_transpose_oracle(x: &Tensor<f64>, w: &Tensor<f64>, b: &[f64]) -> Tensor<f64> {
    let (xs, ws) = (x.shape(), w.shape());
    let dims = xs.len() - 2;
    let (batch, cin, cout) = (xs[0], xs[1], ws[1]);
    let [d, h, wd] = pad3(&xs[2..]);
    let [kd, kh, kw] = pad3(&ws[2..]);
    let (od, oh, ow) = (d + kd - 1, h + kh - 1, wd + kw - 1);
    let mut out_shape = vec![batch, cout];
    out_shape.extend_from_slice(&[od, oh, ow][3 - dims..]);
    let oi = |n, o, z, y, q| (((n * cout + o) * od + z) * oh + y) * ow + q;
    let wi = |c, o, a, bb, e| (((c * cout + o) * kd + a) * kh + bb) * kw + e;
    let mut out = vec![0.0; batch * cout * od * oh * ow];
    for n in 0..batch {
        for o in 0..cout {
            for z in 0..od {
                for y in 0..oh {
                    for q in 0..ow {
                        out[oi(n, o, z, y, q)] = b[o];
                    }
                }
            }
        }
        for c in 0..cin {
            for z in 0..d {
                for y in 0..h {
                    for q in 0..wd {
                        let v = x.data()[(((n * cin + c) * d + z) * h + y) * wd + q];
                        for o in 0..cout {
                            for a in 0..kd {
                                for bb in 0..kh {
                                    for e in 0..kw {
                                        out[oi(n, o, z + a, y + bb, q + e)] += v * w.data()[wi(c, o, a, bb, e)];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::new(out_shape, out).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Random conv problem: `(dims, batch, cin, cout, spatial, kernel)`.
pub struct ConvCase {
    pub batch: usize,
    pub cin: usize,
    pub cout: usize,
    pub spatial: Vec<usize>,
    pub kernel: Vec<usize>,
}

pub fn conv_case(dims: usize, rng: &mut impl Rng) -> ConvCase {
    let kernel: Vec<usize> = (0..dims).map(|_| rng.random_range(1..=3)).collect();
    let spatial = kernel.iter().map(|k| k + rng.random_range(0..=3)).collect();
    ConvCase {
        batch: rng.random_range(1..=2),
        cin: rng.random_range(1..=3),
        cout: rng.random_range(1..=3),
        spatial,
        kernel,
    }
}

impl ConvCase {
    pub fn input_shape(&self, channels: usize) -> Vec<usize> {
        let mut s = vec![self.batch, channels];
        s.extend_from_slice(&self.spatial);
        s
    }

    pub fn weight_shape(&self, first: usize, second: usize) -> Vec<usize> {
        let mut s = vec![first, second];
        s.extend_from_slice(&self.kernel);
        s
    }
}
