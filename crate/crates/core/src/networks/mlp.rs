use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NetworkError;
use crate::autodiff::{AutodiffError, Matrix, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, tape: &mut Tape, x: Var) -> Result<Var, AutodiffError> {
        match self {
            Activation::Relu => tape.relu(x),
            Activation::Sigmoid => tape.sigmoid(x),
            Activation::Tanh => tape.tanh(x),
            Activation::Identity => Ok(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpSpec {
    /// Input width first.
    pub layer_widths: Vec<usize>,
    /// Applied between layers.
    pub activation: Activation,
    pub output_activation: Option<Activation>,
}

impl MlpSpec {
    pub fn new(
        layer_widths: Vec<usize>,
        activation: Activation,
        output_activation: Option<Activation>,
    ) -> Self {
        Self {
            layer_widths,
            activation,
            output_activation,
        }
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.layer_widths.len() < 2 {
            return Err(NetworkError::Config(format!(
                "an MLP needs at least two widths, got {:?}",
                self.layer_widths
            )));
        }
        if self.layer_widths.contains(&0) {
            return Err(NetworkError::Config(format!(
                "zero-width layer in {:?}",
                self.layer_widths
            )));
        }
        Ok(())
    }
}

/// Affine layer `y = x W + b` with `W` stored as `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub activation: Activation,
    pub output_activation: Option<Activation>,
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng>(spec: &MlpSpec, rng: &mut R) -> Result<Self, NetworkError> {
        spec.validate()?;
        let layers = spec
            .layer_widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-limit..=limit))
                    .collect();
                Dense {
                    weight: Matrix::new(fan_in, fan_out, data).expect("sized"),
                    bias: Matrix::zeros(1, fan_out),
                }
            })
            .collect();
        Ok(Self {
            layers,
            activation: spec.activation,
            output_activation: spec.output_activation,
        })
    }

    pub fn from_layers(
        layers: Vec<Dense>,
        activation: Activation,
        output_activation: Option<Activation>,
    ) -> Self {
        Self {
            layers,
            activation,
            output_activation,
        }
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].weight.rows()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("non-empty").weight.cols()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    pub(crate) fn push_named<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Matrix)>) {
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("{prefix}.{i}.w"), &l.weight));
            out.push((format!("{prefix}.{i}.b"), &l.bias));
        }
    }

    pub(crate) fn push_named_mut<'a>(
        &'a mut self,
        prefix: &str,
        out: &mut Vec<(String, &'a mut Matrix)>,
    ) {
        for (i, l) in self.layers.iter_mut().enumerate() {
            out.push((format!("{prefix}.{i}.w"), &mut l.weight));
            out.push((format!("{prefix}.{i}.b"), &mut l.bias));
        }
    }

    /// Records this network's parameters on `tape`, as leaves when `trainable`.
    pub fn bind(
        &self,
        tape: &mut Tape,
        prefix: &str,
        trainable: bool,
        leaves: &mut Vec<(String, Var)>,
    ) -> BoundMlp {
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| {
                if trainable {
                    let w = tape.leaf(l.weight.clone());
                    let b = tape.leaf(l.bias.clone());
                    leaves.push((format!("{prefix}.{i}.w"), w));
                    leaves.push((format!("{prefix}.{i}.b"), b));
                    (w, b)
                } else {
                    (
                        tape.constant(l.weight.clone()),
                        tape.constant(l.bias.clone()),
                    )
                }
            })
            .collect();
        BoundMlp {
            layers,
            activation: self.activation,
            output_activation: self.output_activation,
        }
    }

    /// Tape-free evaluation.
    pub fn forward(&self, x: &Matrix) -> Result<Matrix, NetworkError> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, "", false, &mut Vec::new());
        let xv = tape.constant(x.clone());
        let y = bound.forward(&mut tape, xv)?;
        Ok(tape.value(y).clone())
    }
}

/// An [`Mlp`] whose parameters live on a tape.
#[derive(Debug, Clone)]
pub struct BoundMlp {
    layers: Vec<(Var, Var)>,
    activation: Activation,
    output_activation: Option<Activation>,
}

impl BoundMlp {
    /// Assembles a network from `(weight, bias)` nodes already on a tape.
    pub fn from_vars(
        layers: Vec<(Var, Var)>,
        activation: Activation,
        output_activation: Option<Activation>,
    ) -> Self {
        assert!(!layers.is_empty(), "at least one layer");
        Self {
            layers,
            activation,
            output_activation,
        }
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var, AutodiffError> {
        let last = self.layers.len() - 1;
        let mut h = x;
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            let xw = tape.matmul(h, w)?;
            h = tape.add(xw, b)?;
            if i < last {
                h = self.activation.apply(tape, h)?;
            } else if let Some(act) = self.output_activation {
                h = act.apply(tape, h)?;
            }
        }
        Ok(h)
    }
}
