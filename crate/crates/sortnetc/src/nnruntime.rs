//! Dense feed-forward networks: representation, evaluation, counting.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Identity => z,
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Slope at preactivation `z`, reusing the already computed output `a`
    /// so the sigmoid case costs no extra exp.
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
            Activation::Sigmoid => a * (1.0 - a),
        }
    }
}

/// One affine layer followed by an activation. Weights are out×in.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    weights: Array2<f64>,
    biases: Array1<f64>,
    activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Array2<f64>, biases: Array1<f64>, activation: Activation) -> Result<Self> {
        if weights.nrows() != biases.len() {
            return Err(Error::InvalidArgument(format!(
                "{} weight rows but {} biases",
                weights.nrows(),
                biases.len()
            )));
        }
        if weights.iter().chain(biases.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite parameter".into()));
        }
        Ok(DenseLayer { weights, biases, activation })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn biases(&self) -> &Array1<f64> {
        &self.biases
    }

    pub(crate) fn weights_mut(&mut self) -> &mut Array2<f64> {
        &mut self.weights
    }

    pub(crate) fn biases_mut(&mut self) -> &mut Array1<f64> {
        &mut self.biases
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }
}

#[derive(Serialize, Deserialize)]
struct RawLayer {
    activation: Activation,
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawNetwork {
    layers: Vec<RawLayer>,
}

/// A chain of dense layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNetwork", into = "RawNetwork")]
pub struct DenseNetwork {
    layers: Vec<DenseLayer>,
}

/// Which parameters to count: the affine maps alone, or biases as well.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Counting {
    WeightsOnly,
    WeightsAndBiases,
}

impl DenseNetwork {
    /// Builds a network, checking that consecutive layer dimensions chain.
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].out_dim(),
                    actual: pair[1].in_dim(),
                });
            }
        }
        Ok(DenseNetwork { layers })
    }

    pub fn empty() -> Self {
        DenseNetwork { layers: Vec::new() }
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub(crate) fn set_final_activation(&mut self, activation: Activation) {
        if let Some(last) = self.layers.last_mut() {
            last.activation = activation;
        }
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.layers.first().map(DenseLayer::in_dim)
    }

    pub fn output_dim(&self) -> Option<usize> {
        self.layers.last().map(DenseLayer::out_dim)
    }

    /// Affine-then-activation composition. The empty network is the identity.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if let Some(dim) = self.input_dim() {
            if input.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, actual: input.len() });
            }
        }
        let mut a = Array1::from(input.to_vec());
        for layer in &self.layers {
            let z = layer.weights.dot(&a) + &layer.biases;
            a = z.mapv(|v| layer.activation.apply(v));
        }
        Ok(a.to_vec())
    }

    pub fn parameter_count(&self, counting: Counting) -> usize {
        self.layers
            .iter()
            .map(|l| {
                let w = l.out_dim() * l.in_dim();
                match counting {
                    Counting::WeightsOnly => w,
                    Counting::WeightsAndBiases => w + l.out_dim(),
                }
            })
            .sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl TryFrom<RawNetwork> for DenseNetwork {
    type Error = Error;

    fn try_from(raw: RawNetwork) -> Result<Self> {
        let mut layers = Vec::with_capacity(raw.layers.len());
        for l in raw.layers {
            let rows = l.weights.len();
            let cols = l.weights.first().map_or(0, Vec::len);
            if l.weights.iter().any(|r| r.len() != cols) {
                return Err(Error::InvalidArgument("ragged weight matrix".into()));
            }
            let flat: Vec<f64> = l.weights.into_iter().flatten().collect();
            let weights = Array2::from_shape_vec((rows, cols), flat)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            layers.push(DenseLayer::new(weights, Array1::from(l.biases), l.activation)?);
        }
        DenseNetwork::new(layers)
    }
}

impl From<DenseNetwork> for RawNetwork {
    fn from(net: DenseNetwork) -> Self {
        RawNetwork {
            layers: net
                .layers
                .iter()
                .map(|l| RawLayer {
                    activation: l.activation,
                    weights: l.weights.rows().into_iter().map(|r| r.to_vec()).collect(),
                    biases: l.biases.to_vec(),
                })
                .collect(),
        }
    }
}
