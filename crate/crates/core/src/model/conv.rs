//! Direct 2-D convolution and its lowering to sparse affine rows.
//!
//! Tensors are stored channel-major: the flat index of `(c, h, w)` in a `C x H x W`
//! image is `(c * H + h) * W + w`.

use super::network::{AffineLayer, ConvKernel, Layer, Padding, SparseRow};
use crate::error::{Error, Result};

/// Output spatial dims, or `None` when they would be empty.
pub fn conv_output_dims(
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: (usize, usize),
    padding: Padding,
) -> Option<(usize, usize)> {
    let dim = |n: usize, k: usize, s: usize| match padding {
        Padding::Valid => (n >= k).then(|| (n - k) / s + 1),
        Padding::Same => Some(n.div_ceil(s)),
    };
    let oh = dim(h, kh, stride.0)?;
    let ow = dim(w, kw, stride.1)?;
    (oh > 0 && ow > 0).then_some((oh, ow))
}

/// Leading (top, left) zero padding.
fn leading_padding(h: usize, w: usize, k: &ConvKernel, stride: (usize, usize), padding: Padding) -> (usize, usize) {
    match padding {
        Padding::Valid => (0, 0),
        Padding::Same => {
            let (oh, ow) = (h.div_ceil(stride.0), w.div_ceil(stride.1));
            let th = ((oh - 1) * stride.0 + k.kh).saturating_sub(h);
            let tw = ((ow - 1) * stride.1 + k.kw).saturating_sub(w);
            (th / 2, tw / 2)
        }
    }
}

/// Geometry shared by the direct and lowered evaluations.
struct Geometry {
    in_c: usize,
    in_h: usize,
    in_w: usize,
    out_h: usize,
    out_w: usize,
    pad_top: usize,
    pad_left: usize,
    stride: (usize, usize),
}

impl Geometry {
    fn new(kernel: &ConvKernel, in_shape: &[usize], stride: (usize, usize), padding: Padding) -> Result<Self> {
        if in_shape.len() != 3 {
            return Err(Error::InvalidArgument(format!("conv input shape must be [C, H, W], got {in_shape:?}")));
        }
        let (in_c, in_h, in_w) = (in_shape[0], in_shape[1], in_shape[2]);
        if in_c != kernel.in_channels {
            return Err(Error::InvalidArgument("kernel/input channel mismatch".into()));
        }
        let (out_h, out_w) = conv_output_dims(in_h, in_w, kernel.kh, kernel.kw, stride, padding)
            .ok_or_else(|| Error::InvalidArgument("empty convolution output".into()))?;
        let (pad_top, pad_left) = leading_padding(in_h, in_w, kernel, stride, padding);
        Ok(Geometry {
            in_c,
            in_h,
            in_w,
            out_h,
            out_w,
            pad_top,
            pad_left,
            stride,
        })
    }

    /// Calls `f(input_flat_index, kernel_value)` for each tap of output `(oc, oh, ow)`.
    fn for_each_tap(&self, k: &ConvKernel, oc: usize, oh: usize, ow: usize, mut f: impl FnMut(usize, f64)) {
        for ic in 0..self.in_c {
            for r in 0..k.kh {
                let ih = (oh * self.stride.0 + r) as isize - self.pad_top as isize;
                if ih < 0 || ih as usize >= self.in_h {
                    continue;
                }
                for c in 0..k.kw {
                    let iw = (ow * self.stride.1 + c) as isize - self.pad_left as isize;
                    if iw < 0 || iw as usize >= self.in_w {
                        continue;
                    }
                    let idx = (ic * self.in_h + ih as usize) * self.in_w + iw as usize;
                    f(idx, k.at(oc, ic, r, c));
                }
            }
        }
    }
}

fn unpack(layer: &Layer) -> Result<(&ConvKernel, &[f64], (usize, usize), Padding, bool)> {
    match layer {
        Layer::Conv2d {
            kernel,
            bias,
            stride,
            padding,
            relu,
        } => Ok((kernel, bias, *stride, *padding, *relu)),
        _ => Err(Error::InvalidArgument("expected a conv2d layer".into())),
    }
}

/// Lowers a conv layer to sparse affine rows over the channel-major flattened input.
pub fn lower_conv(layer: &Layer, in_shape: &[usize]) -> Result<AffineLayer> {
    let (kernel, bias, stride, padding, relu) = unpack(layer)?;
    let g = Geometry::new(kernel, in_shape, stride, padding)?;
    let mut rows: Vec<SparseRow> = Vec::with_capacity(kernel.out_channels * g.out_h * g.out_w);
    let mut biases = Vec::with_capacity(rows.capacity());
    for oc in 0..kernel.out_channels {
        for oh in 0..g.out_h {
            for ow in 0..g.out_w {
                let mut row = SparseRow::new();
                g.for_each_tap(kernel, oc, oh, ow, |idx, w| {
                    if w != 0.0 {
                        row.push((idx, w));
                    }
                });
                row.sort_by_key(|&(c, _)| c);
                rows.push(row);
                biases.push(bias[oc]);
            }
        }
    }
    Ok(AffineLayer {
        rows,
        bias: biases,
        in_dim: g.in_c * g.in_h * g.in_w,
        relu,
    })
}

/// Direct convolution (pre-activation) of a channel-major input.
pub fn conv_forward(layer: &Layer, in_shape: &[usize], input: &[f64]) -> Result<Vec<f64>> {
    let (kernel, bias, stride, padding, _) = unpack(layer)?;
    let g = Geometry::new(kernel, in_shape, stride, padding)?;
    let mut out = Vec::with_capacity(kernel.out_channels * g.out_h * g.out_w);
    for oc in 0..kernel.out_channels {
        for oh in 0..g.out_h {
            for ow in 0..g.out_w {
                let mut acc = bias[oc];
                g.for_each_tap(kernel, oc, oh, ow, |idx, w| acc += w * input[idx]);
                out.push(acc);
            }
        }
    }
    Ok(out)
}

/// Vector-Jacobian product of [`conv_forward`]: maps an output gradient to an input gradient.
pub fn conv_backward(layer: &Layer, in_shape: &[usize], grad_out: &[f64]) -> Result<Vec<f64>> {
    let (kernel, _, stride, padding, _) = unpack(layer)?;
    let g = Geometry::new(kernel, in_shape, stride, padding)?;
    let mut grad_in = vec![0.0; g.in_c * g.in_h * g.in_w];
    let mut o = 0;
    for oc in 0..kernel.out_channels {
        for oh in 0..g.out_h {
            for ow in 0..g.out_w {
                let up = grad_out[o];
                o += 1;
                if up != 0.0 {
                    g.for_each_tap(kernel, oc, oh, ow, |idx, w| grad_in[idx] += w * up);
                }
            }
        }
    }
    Ok(grad_in)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn conv(kernel: ConvKernel, stride: (usize, usize), padding: Padding) -> Layer {
        let bias = vec![0.0; kernel.out_channels];
        Layer::Conv2d {
            kernel,
            bias,
            stride,
            padding,
            relu: false,
        }
    }

    #[test]
    fn unit_kernel_lowers_to_identity() {
        let layer = conv(ConvKernel::new(1, 1, 1, 1, vec![1.0]).unwrap(), (1, 1), Padding::Valid);
        let aff = lower_conv(&layer, &[1, 3, 3]).unwrap();
        assert_eq!(aff.out_dim(), 9);
        for (r, row) in aff.rows.iter().enumerate() {
            assert_eq!(row, &vec![(r, 1.0)]);
        }
    }

    #[test]
    fn averaging_kernel_receptive_fields() {
        let layer = conv(ConvKernel::new(1, 1, 2, 2, vec![0.25; 4]).unwrap(), (1, 1), Padding::Valid);
        let aff = lower_conv(&layer, &[1, 3, 3]).unwrap();
        assert_eq!((aff.out_dim(), aff.in_dim), (4, 9));
        // receptive fields enumerated by hand on a 3x3 image
        let fields = [[0, 1, 3, 4], [1, 2, 4, 5], [3, 4, 6, 7], [4, 5, 7, 8]];
        for (row, field) in aff.rows.iter().zip(fields) {
            assert_eq!(row.iter().map(|&(c, _)| c).collect::<Vec<_>>(), field);
            assert!(row.iter().all(|&(_, w)| w == 0.25));
        }
    }

    #[test]
    fn same_padding_keeps_spatial_size() {
        assert_eq!(conv_output_dims(5, 5, 3, 3, (1, 1), Padding::Same), Some((5, 5)));
        assert_eq!(conv_output_dims(5, 5, 3, 3, (2, 2), Padding::Same), Some((3, 3)));
        assert_eq!(conv_output_dims(5, 5, 3, 3, (2, 2), Padding::Valid), Some((2, 2)));
        assert_eq!(conv_output_dims(2, 5, 3, 3, (1, 1), Padding::Valid), None);
    }

    #[test]
    fn lowering_matches_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (stride, padding) in [((1, 1), Padding::Valid), ((2, 1), Padding::Same), ((2, 2), Padding::Valid)] {
            let data = (0..3 * 2 * 3 * 2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let kernel = ConvKernel::new(3, 2, 3, 2, data).unwrap();
            let layer = Layer::Conv2d {
                kernel,
                bias: vec![0.1, -0.2, 0.3],
                stride,
                padding,
                relu: false,
            };
            let shape = [2, 5, 6];
            let aff = lower_conv(&layer, &shape).unwrap();
            for _ in 0..50 {
                let x: Vec<f64> = (0..60).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let direct = conv_forward(&layer, &shape, &x).unwrap();
                let lowered = aff.eval(&x);
                assert_eq!(direct.len(), lowered.len());
                for (a, b) in direct.iter().zip(&lowered) {
                    assert!((a - b).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn backward_is_transpose_of_lowered_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = (0..2 * 2 * 2 * 2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let layer = conv(ConvKernel::new(2, 2, 2, 2, data).unwrap(), (1, 1), Padding::Same);
        let shape = [2, 3, 3];
        let aff = lower_conv(&layer, &shape).unwrap();
        let up: Vec<f64> = (0..aff.out_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let back = conv_backward(&layer, &shape, &up).unwrap();
        let mut expect = vec![0.0; aff.in_dim];
        for (r, row) in aff.rows.iter().enumerate() {
            for &(c, w) in row {
                expect[c] += w * up[r];
            }
        }
        for (a, b) in back.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
