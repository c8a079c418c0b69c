use std::path::Path;

use serde::{Deserialize, Serialize};

use super::conv::{conv_output_dims, lower_conv};
use crate::error::{Error, Result};

/// Zero-padding rule for 2-D convolutions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    #[default]
    Valid,
    /// Output spatial size is `ceil(input / stride)`; the extra padding row/column goes to the
    /// bottom/right when the total padding is odd.
    Same,
}

/// Convolution kernel stored flat in `[out][in][kh][kw]` order.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvKernel {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kh: usize,
    pub kw: usize,
    pub data: Vec<f64>,
}

impl ConvKernel {
    pub fn new(out_channels: usize, in_channels: usize, kh: usize, kw: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != out_channels * in_channels * kh * kw {
            return Err(Error::InvalidArgument(format!(
                "kernel data length {} does not match {}x{}x{}x{}",
                data.len(),
                out_channels,
                in_channels,
                kh,
                kw
            )));
        }
        Ok(ConvKernel {
            out_channels,
            in_channels,
            kh,
            kw,
            data,
        })
    }

    #[inline]
    pub fn at(&self, oc: usize, ic: usize, r: usize, c: usize) -> f64 {
        self.data[((oc * self.in_channels + ic) * self.kh + r) * self.kw + c]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Dense {
        /// Row-major, one row per output neuron.
        weights: Vec<Vec<f64>>,
        bias: Vec<f64>,
        relu: bool,
    },
    Conv2d {
        kernel: ConvKernel,
        bias: Vec<f64>,
        stride: (usize, usize),
        padding: Padding,
        relu: bool,
    },
    Flatten,
}

impl Layer {
    pub fn relu(&self) -> bool {
        match self {
            Layer::Dense { relu, .. } | Layer::Conv2d { relu, .. } => *relu,
            Layer::Flatten => false,
        }
    }
}

/// A sparse row: `(input column, weight)` pairs with exact zeros removed.
pub type SparseRow = Vec<(usize, f64)>;

/// One affine layer `y = W x + b` (optionally followed by ReLU) in sparse row form.
///
/// Every dense and conv layer lowers to one of these; flatten layers vanish because the
/// channel-major storage order already is the flattened order.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineLayer {
    pub rows: Vec<SparseRow>,
    pub bias: Vec<f64>,
    pub in_dim: usize,
    pub relu: bool,
}

impl AffineLayer {
    pub fn out_dim(&self) -> usize {
        self.rows.len()
    }

    pub fn eval_row(&self, row: usize, input: &[f64]) -> f64 {
        self.rows[row].iter().fold(self.bias[row], |acc, &(c, w)| acc + w * input[c])
    }

    pub fn eval(&self, input: &[f64]) -> Vec<f64> {
        (0..self.out_dim()).map(|r| self.eval_row(r, input)).collect()
    }
}

/// A validated feedforward network.
///
/// Layer indices used by the certification machinery refer to [`Network::affine`]:
/// index 0 is the input, index `i >= 1` the `i`-th affine layer.
#[derive(Clone, Debug)]
pub struct Network {
    name: String,
    input_shape: Vec<usize>,
    layers: Vec<Layer>,
    shapes: Vec<Vec<usize>>,
    affine: Vec<AffineLayer>,
}

impl Network {
    pub fn new(name: impl Into<String>, input_shape: Vec<usize>, layers: Vec<Layer>) -> Result<Self> {
        if input_shape.is_empty() || input_shape.iter().any(|&d| d == 0) {
            return Err(Error::shape(0, format!("input shape {input_shape:?} must be non-empty and positive")));
        }
        if layers.is_empty() {
            return Err(Error::shape(0, "network has no layers"));
        }
        let mut shapes = vec![input_shape.clone()];
        let mut affine = Vec::new();
        for (k, layer) in layers.iter().enumerate() {
            let idx = k + 1;
            let in_shape = shapes.last().unwrap().clone();
            let in_dim: usize = in_shape.iter().product();
            let out_shape = match layer {
                Layer::Dense { weights, bias, relu } => {
                    if weights.is_empty() {
                        return Err(Error::shape(idx, "dense layer has no rows"));
                    }
                    if bias.len() != weights.len() {
                        return Err(Error::shape(
                            idx,
                            format!("bias length {} != {} weight rows", bias.len(), weights.len()),
                        ));
                    }
                    for (r, row) in weights.iter().enumerate() {
                        if row.len() != in_dim {
                            return Err(Error::shape(
                                idx,
                                format!("weight row {r} has length {} but the previous width is {in_dim}", row.len()),
                            ));
                        }
                    }
                    check_finite(idx, weights.iter().flatten().chain(bias.iter()))?;
                    affine.push(AffineLayer {
                        rows: weights
                            .iter()
                            .map(|row| {
                                row.iter()
                                    .enumerate()
                                    .filter(|(_, &w)| w != 0.0)
                                    .map(|(c, &w)| (c, w))
                                    .collect()
                            })
                            .collect(),
                        bias: bias.clone(),
                        in_dim,
                        relu: *relu,
                    });
                    vec![weights.len()]
                }
                Layer::Conv2d {
                    kernel,
                    bias,
                    stride,
                    padding,
                    ..
                } => {
                    if in_shape.len() != 3 {
                        return Err(Error::shape(
                            idx,
                            format!("conv2d expects a [channels, height, width] input, got {in_shape:?}"),
                        ));
                    }
                    if kernel.in_channels != in_shape[0] {
                        return Err(Error::shape(
                            idx,
                            format!("kernel expects {} input channels, input has {}", kernel.in_channels, in_shape[0]),
                        ));
                    }
                    if bias.len() != kernel.out_channels {
                        return Err(Error::shape(
                            idx,
                            format!("bias length {} != {} output channels", bias.len(), kernel.out_channels),
                        ));
                    }
                    if kernel.kh == 0 || kernel.kw == 0 || stride.0 == 0 || stride.1 == 0 {
                        return Err(Error::shape(idx, "kernel size and stride must be positive"));
                    }
                    check_finite(idx, kernel.data.iter().chain(bias.iter()))?;
                    let (oh, ow) = conv_output_dims(in_shape[1], in_shape[2], kernel.kh, kernel.kw, *stride, *padding)
                        .ok_or_else(|| Error::shape(idx, "convolution output would be empty"))?;
                    affine.push(lower_conv(layer, &in_shape)?);
                    vec![kernel.out_channels, oh, ow]
                }
                Layer::Flatten => vec![in_dim],
            };
            shapes.push(out_shape);
        }
        if affine.is_empty() {
            return Err(Error::shape(0, "network has no dense or conv layers"));
        }
        Ok(Network {
            name: name.into(),
            input_shape,
            layers,
            shapes,
            affine,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Shape after each file layer; entry 0 is the input shape.
    pub fn shapes(&self) -> &[Vec<usize>] {
        &self.shapes
    }

    pub fn input_dim(&self) -> usize {
        self.input_shape.iter().product()
    }

    pub fn output_dim(&self) -> usize {
        self.affine.last().unwrap().out_dim()
    }

    /// Lowered affine layers (flatten removed).
    pub fn affine(&self) -> &[AffineLayer] {
        &self.affine
    }

    /// Number of affine layers `n`.
    pub fn depth(&self) -> usize {
        self.affine.len()
    }

    /// Width `m_i` of affine layer `i` (`m_0` is the input dimension).
    pub fn width(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_dim()
        } else {
            self.affine[layer - 1].out_dim()
        }
    }

    /// Affine layer `i` (1-based).
    pub fn affine_layer(&self, layer: usize) -> &AffineLayer {
        &self.affine[layer - 1]
    }

    /// A copy with the last affine layer's weights and bias multiplied by `factor`.
    pub fn with_scaled_output(&self, factor: f64) -> Result<Network> {
        let mut layers = self.layers.clone();
        let last = layers
            .iter_mut()
            .rev()
            .find(|l| !matches!(l, Layer::Flatten))
            .expect("validated network has an affine layer");
        match last {
            Layer::Dense { weights, bias, .. } => {
                weights.iter_mut().flatten().for_each(|w| *w *= factor);
                bias.iter_mut().for_each(|b| *b *= factor);
            }
            Layer::Conv2d { kernel, bias, .. } => {
                kernel.data.iter_mut().for_each(|w| *w *= factor);
                bias.iter_mut().for_each(|b| *b *= factor);
            }
            Layer::Flatten => unreachable!(),
        }
        Network::new(self.name.clone(), self.input_shape.clone(), layers)
    }

    pub fn from_json(text: &str) -> Result<Network> {
        let file: NetworkFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.into_network()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&NetworkFile::from(self)).expect("network serializes");
        s.push('\n');
        s
    }
}

fn check_finite<'a>(layer: usize, values: impl Iterator<Item = &'a f64>) -> Result<()> {
    for v in values {
        if !v.is_finite() {
            return Err(Error::shape(layer, "weights and biases must be finite"));
        }
    }
    Ok(())
}

/// Reads and validates a network file.
pub fn load_network(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Network::from_json(&text)
}

pub fn save_network(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, net.to_json()).map_err(|e| Error::io(path, e))
}

// On-disk representation.

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    name: String,
    input_shape: Vec<usize>,
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum LayerFile {
    Dense {
        weights: Vec<Vec<f64>>,
        bias: Vec<f64>,
        #[serde(default)]
        relu: bool,
    },
    Conv2d {
        weights: Vec<Vec<Vec<Vec<f64>>>>,
        bias: Vec<f64>,
        #[serde(default = "unit_stride")]
        stride: [usize; 2],
        #[serde(default)]
        padding: Padding,
        #[serde(default)]
        relu: bool,
    },
    Flatten,
}

fn unit_stride() -> [usize; 2] {
    [1, 1]
}

impl NetworkFile {
    fn into_network(self) -> Result<Network> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for (k, l) in self.layers.into_iter().enumerate() {
            layers.push(match l {
                LayerFile::Dense { weights, bias, relu } => Layer::Dense { weights, bias, relu },
                LayerFile::Conv2d {
                    weights,
                    bias,
                    stride,
                    padding,
                    relu,
                } => {
                    let oc = weights.len();
                    let ic = weights.first().map_or(0, |w| w.len());
                    let kh = weights.first().and_then(|w| w.first()).map_or(0, |w| w.len());
                    let kw = weights
                        .first()
                        .and_then(|w| w.first())
                        .and_then(|w| w.first())
                        .map_or(0, |w| w.len());
                    let mut data = Vec::with_capacity(oc * ic * kh * kw);
                    for o in &weights {
                        if o.len() != ic {
                            return Err(Error::shape(k + 1, "ragged conv kernel (input channels)"));
                        }
                        for i in o {
                            if i.len() != kh {
                                return Err(Error::shape(k + 1, "ragged conv kernel (rows)"));
                            }
                            for r in i {
                                if r.len() != kw {
                                    return Err(Error::shape(k + 1, "ragged conv kernel (columns)"));
                                }
                                data.extend_from_slice(r);
                            }
                        }
                    }
                    let kernel = ConvKernel::new(oc, ic, kh, kw, data).map_err(|e| Error::shape(k + 1, e.to_string()))?;
                    Layer::Conv2d {
                        kernel,
                        bias,
                        stride: (stride[0], stride[1]),
                        padding,
                        relu,
                    }
                }
                LayerFile::Flatten => Layer::Flatten,
            });
        }
        Network::new(self.name, self.input_shape, layers)
    }
}

impl From<&Network> for NetworkFile {
    fn from(net: &Network) -> Self {
        NetworkFile {
            name: net.name.clone(),
            input_shape: net.input_shape.clone(),
            layers: net
                .layers
                .iter()
                .map(|l| match l {
                    Layer::Dense { weights, bias, relu } => LayerFile::Dense {
                        weights: weights.clone(),
                        bias: bias.clone(),
                        relu: *relu,
                    },
                    Layer::Conv2d {
                        kernel,
                        bias,
                        stride,
                        padding,
                        relu,
                    } => LayerFile::Conv2d {
                        weights: (0..kernel.out_channels)
                            .map(|o| {
                                (0..kernel.in_channels)
                                    .map(|i| {
                                        (0..kernel.kh)
                                            .map(|r| (0..kernel.kw).map(|c| kernel.at(o, i, r, c)).collect())
                                            .collect()
                                    })
                                    .collect()
                            })
                            .collect(),
                        bias: bias.clone(),
                        stride: [stride.0, stride.1],
                        padding: *padding,
                        relu: *relu,
                    },
                    Layer::Flatten => LayerFile::Flatten,
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = r#"{"name":"toy","input_shape":[2],"layers":[
        {"kind":"dense","weights":[[1,0.5],[-0.5,1]],"bias":[0,0],"relu":true},
        {"kind":"dense","weights":[[1,-1]],"bias":[0],"relu":true}]}"#;

    #[test]
    fn parses_toy_network() {
        let net = Network::from_json(TOY).unwrap();
        assert_eq!(net.depth(), 2);
        assert_eq!((net.width(0), net.width(1), net.width(2)), (2, 2, 1));
        assert_eq!(net.affine_layer(1).rows[1], vec![(0, -0.5), (1, 1.0)]);
    }

    #[test]
    fn rejects_row_length_mismatch() {
        let bad = r#"{"name":"bad","input_shape":[2],"layers":[
            {"kind":"dense","weights":[[1,0.5,3]],"bias":[0],"relu":true}]}"#;
        match Network::from_json(bad) {
            Err(Error::Shape { layer, .. }) => assert_eq!(layer, 1),
            other => panic!("expected shape error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_malformed_json() {
        assert!(matches!(Network::from_json("{\"name\": 3"), Err(Error::Parse(_))));
    }

    #[test]
    fn accepts_exponent_notation() {
        let text = r#"{"name":"e","input_shape":[1],"layers":[
            {"kind":"dense","weights":[[1e0]],"bias":[-2.5E-1],"relu":false}]}"#;
        let net = Network::from_json(text).unwrap();
        assert_eq!(net.affine_layer(1).bias, vec![-0.25]);
    }

    #[test]
    fn conv_round_trips_through_json() {
        let text = r#"{"name":"c","input_shape":[1,3,3],"layers":[
            {"kind":"conv2d","weights":[[[[1,2],[3,4]]],[[[0,1],[1,0]]]],"bias":[0.5,-1],
             "stride":[1,1],"padding":"valid","relu":true},
            {"kind":"flatten"},
            {"kind":"dense","weights":[[1,1,1,1,1,1,1,1]],"bias":[0],"relu":false}]}"#;
        let net = Network::from_json(text).unwrap();
        assert_eq!(net.shapes()[1], vec![2, 2, 2]);
        assert_eq!(net.depth(), 2);
        let again = Network::from_json(&net.to_json()).unwrap();
        assert_eq!(again.layers(), net.layers());
    }

    #[test]
    fn rejects_non_finite_weights() {
        let layers = vec![Layer::Dense {
            weights: vec![vec![f64::NAN]],
            bias: vec![0.0],
            relu: false,
        }];
        assert!(matches!(Network::new("n", vec![1], layers), Err(Error::Shape { .. })));
    }
}
