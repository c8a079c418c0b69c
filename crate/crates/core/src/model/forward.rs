use super::conv::{conv_backward, conv_forward};
use super::network::{Layer, Network};
use crate::error::{Error, Result};

/// Per-layer values of one forward pass, indexed by affine layer (0 = input).
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    /// `y^(i)`; entry 0 repeats the input.
    pub pre: Vec<Vec<f64>>,
    /// `x^(i)`; entry 0 is the input.
    pub post: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.post.last().unwrap()
    }
}

fn relu_in_place(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Evaluates one file layer's pre-activation on a flat input of shape `in_shape`.
fn layer_pre(layer: &Layer, in_shape: &[usize], input: &[f64]) -> Result<Vec<f64>> {
    match layer {
        Layer::Dense { weights, bias, .. } => Ok(weights
            .iter()
            .zip(bias)
            .map(|(row, b)| row.iter().zip(input).fold(*b, |acc, (w, x)| acc + w * x))
            .collect()),
        Layer::Conv2d { .. } => conv_forward(layer, in_shape, input),
        Layer::Flatten => Ok(input.to_vec()),
    }
}

pub fn forward(net: &Network, input: &[f64]) -> Result<Trace> {
    if input.len() != net.input_dim() {
        return Err(Error::InvalidArgument(format!(
            "input length {} != network input dimension {}",
            input.len(),
            net.input_dim()
        )));
    }
    let mut trace = Trace {
        pre: vec![input.to_vec()],
        post: vec![input.to_vec()],
    };
    let mut current = input.to_vec();
    for (k, layer) in net.layers().iter().enumerate() {
        if matches!(layer, Layer::Flatten) {
            continue;
        }
        let y = layer_pre(layer, &net.shapes()[k], &current)?;
        let mut x = y.clone();
        if layer.relu() {
            relu_in_place(&mut x);
        }
        trace.pre.push(y);
        trace.post.push(x.clone());
        current = x;
    }
    Ok(trace)
}

/// Convenience: the network output `F(x)`.
pub fn evaluate(net: &Network, input: &[f64]) -> Result<Vec<f64>> {
    Ok(forward(net, input)?.post.pop().unwrap())
}

/// `dF_j / dx^(0)` by reverse-mode accumulation. ReLU kinks (`y = 0`) get subgradient 0.
pub fn gradient(net: &Network, input: &[f64], output_index: usize) -> Result<Vec<f64>> {
    if output_index >= net.output_dim() {
        return Err(Error::OutOfRange(format!(
            "output index {output_index} >= output dimension {}",
            net.output_dim()
        )));
    }
    let trace = forward(net, input)?;
    let mut grad = vec![0.0; net.output_dim()];
    grad[output_index] = 1.0;
    let mut affine_idx = net.depth();
    for (k, layer) in net.layers().iter().enumerate().rev() {
        if matches!(layer, Layer::Flatten) {
            continue;
        }
        if layer.relu() {
            for (g, &y) in grad.iter_mut().zip(&trace.pre[affine_idx]) {
                if y <= 0.0 {
                    *g = 0.0;
                }
            }
        }
        grad = match layer {
            Layer::Dense { weights, .. } => {
                let mut back = vec![0.0; weights[0].len()];
                for (row, &g) in weights.iter().zip(&grad) {
                    if g != 0.0 {
                        for (b, w) in back.iter_mut().zip(row) {
                            *b += w * g;
                        }
                    }
                }
                back
            }
            Layer::Conv2d { .. } => conv_backward(layer, &net.shapes()[k], &grad)?,
            Layer::Flatten => unreachable!(),
        };
        affine_idx -= 1;
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy::toy_network;

    #[test]
    fn toy_forward_by_hand() {
        let net = toy_network();
        let t = forward(&net, &[1.0, 0.0]).unwrap();
        assert_eq!(t.pre[1], vec![1.0, -0.5]);
        assert_eq!(t.post[1], vec![1.0, 0.0]);
        assert_eq!(t.output(), &[1.0]);
        assert_eq!(evaluate(&net, &[0.0, 0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn rejects_wrong_input_length() {
        assert!(matches!(forward(&toy_network(), &[1.0]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn toy_gradient_follows_active_path() {
        let net = toy_network();
        assert_eq!(gradient(&net, &[1.0, 0.0], 0).unwrap(), vec![1.0, 0.5]);
        assert!(matches!(gradient(&net, &[1.0, 0.0], 1), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn linear_gradient_is_weight_row() {
        let net = Network::new(
            "lin",
            vec![2],
            vec![Layer::Dense {
                weights: vec![vec![2.0, 3.0]],
                bias: vec![0.0],
                relu: false,
            }],
        )
        .unwrap();
        for x in [[0.0, 0.0], [5.0, -3.0]] {
            assert_eq!(gradient(&net, &x, 0).unwrap(), vec![2.0, 3.0]);
        }
    }
}
