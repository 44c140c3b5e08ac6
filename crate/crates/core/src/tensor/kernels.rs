//! Valid (unpadded, stride-1) cross-correlation over three spatial axes,
//! lowered to GEMM through im2col. Two-dimensional convolutions are the
//! depth-1 case.
//!
//! A transposed convolution is the adjoint of a convolution with the same
//! kernel tensor, so both share one [`ConvGeometry`]: the *wide* side is the
//! convolution input (and transposed-convolution output), the *narrow* side
//! the convolution output. Kernels are stored `[narrow, wide, kd, kh, kw]`,
//! which is PyTorch's layout for `Conv3d` (`[out, in, ..]`) and for
//! `ConvTranspose3d` (`[in, out, ..]`) alike.

use super::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub wide_channels: usize,
    pub narrow_channels: usize,
    /// Spatial extents `[d, h, w]` of the wide side.
    pub wide: [usize; 3],
    pub kernel: [usize; 3],
}

impl ConvGeometry {
    pub fn narrow(&self) -> [usize; 3] {
        [0, 1, 2].map(|i| self.wide[i] + 1 - self.kernel[i])
    }

    pub fn kernel_volume(&self) -> usize {
        self.kernel.iter().product()
    }

    /// Rows of the im2col matrix.
    pub fn patch_len(&self) -> usize {
        self.wide_channels * self.kernel_volume()
    }

    pub fn wide_len(&self) -> usize {
        self.wide_channels * self.wide.iter().product::<usize>()
    }

    pub fn narrow_spatial(&self) -> usize {
        self.narrow().iter().product()
    }

    pub fn narrow_len(&self) -> usize {
        self.narrow_channels * self.narrow_spatial()
    }

    pub fn weight_len(&self) -> usize {
        self.narrow_channels * self.patch_len()
    }
}

/// Unfold one wide-side sample into a `[patch_len, narrow_spatial]` matrix.
pub fn im2col<T: Real>(g: &ConvGeometry, x: &[T], col: &mut [T]) {
    let [d, h, w] = g.wide;
    let [kd, kh, kw] = g.kernel;
    let [od, oh, ow] = g.narrow();
    let p = od * oh * ow;
    let mut row = 0;
    for c in 0..g.wide_channels {
        for a in 0..kd {
            for b in 0..kh {
                for e in 0..kw {
                    let dst = &mut col[row * p..(row + 1) * p];
                    let mut o = 0;
                    for z in 0..od {
                        for y in 0..oh {
                            let src = ((c * d + z + a) * h + y + b) * w + e;
                            dst[o..o + ow].copy_from_slice(&x[src..src + ow]);
                            o += ow;
                        }
                    }
                    row += 1;
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-add columns back into a wide-side sample.
pub fn col2im_add<T: Real>(g: &ConvGeometry, col: &[T], x: &mut [T]) {
    let [d, h, w] = g.wide;
    let [kd, kh, kw] = g.kernel;
    let [od, oh, ow] = g.narrow();
    let p = od * oh * ow;
    let mut row = 0;
    for c in 0..g.wide_channels {
        for a in 0..kd {
            for b in 0..kh {
                for e in 0..kw {
                    let src = &col[row * p..(row + 1) * p];
                    let mut o = 0;
                    for z in 0..od {
                        for y in 0..oh {
                            let dst = ((c * d + z + a) * h + y + b) * w + e;
                            for (t, s) in x[dst..dst + ow].iter_mut().zip(&src[o..o + ow]) {
                                *t += *s;
                            }
                            o += ow;
                        }
                    }
                    row += 1;
                }
            }
        }
    }
}

/// `narrow = W * im2col(wide)` for every sample, overwriting `narrow`.
pub fn correlate<T: Real>(g: &ConvGeometry, batch: usize, wide: &[T], weight: &[T], narrow: &mut [T]) {
    let (k, p) = (g.patch_len(), g.narrow_spatial());
    let mut col = vec![T::zero(); k * p];
    for s in 0..batch {
        im2col(g, &wide[s * g.wide_len()..(s + 1) * g.wide_len()], &mut col);
        let out = &mut narrow[s * g.narrow_len()..(s + 1) * g.narrow_len()];
        T::gemm(g.narrow_channels, k, p, T::one(), weight, false, &col, false, T::zero(), out);
    }
}

/// `wide += col2im(W^T * narrow)` for every sample.
pub fn correlate_adjoint<T: Real>(g: &ConvGeometry, batch: usize, narrow: &[T], weight: &[T], wide: &mut [T]) {
    let (k, p) = (g.patch_len(), g.narrow_spatial());
    let mut col = vec![T::zero(); k * p];
    for s in 0..batch {
        let ns = &narrow[s * g.narrow_len()..(s + 1) * g.narrow_len()];
        T::gemm(k, g.narrow_channels, p, T::one(), weight, true, ns, false, T::zero(), &mut col);
        col2im_add(g, &col, &mut wide[s * g.wide_len()..(s + 1) * g.wide_len()]);
    }
}

/// `dweight += sum_s narrow_s * im2col(wide_s)^T`.
pub fn weight_grad<T: Real>(g: &ConvGeometry, batch: usize, wide: &[T], narrow: &[T], dweight: &mut [T]) {
    let (k, p) = (g.patch_len(), g.narrow_spatial());
    let mut col = vec![T::zero(); k * p];
    for s in 0..batch {
        im2col(g, &wide[s * g.wide_len()..(s + 1) * g.wide_len()], &mut col);
        let ns = &narrow[s * g.narrow_len()..(s + 1) * g.narrow_len()];
        T::gemm(g.narrow_channels, p, k, T::one(), ns, false, &col, true, T::one(), dweight);
    }
}

/// Add `bias[c]` to every element of channel `c` in `[batch, channels, spatial]` data.
pub fn add_channel_bias<T: Real>(data: &mut [T], bias: &[T], spatial: usize) {
    let channels = bias.len();
    for (i, chunk) in data.chunks_mut(spatial).enumerate() {
        let b = bias[i % channels];
        chunk.iter_mut().for_each(|v| *v += b);
    }
}

/// `acc[c] += sum` of channel `c` over batch and space.
pub fn channel_sums_add<T: Real>(data: &[T], acc: &mut [T], spatial: usize) {
    let channels = acc.len();
    for (i, chunk) in data.chunks(spatial).enumerate() {
        let mut s = T::zero();
        for v in chunk {
            s += *v;
        }
        acc[i % channels] += s;
    }
}
