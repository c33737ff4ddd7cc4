use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

use super::params::Initializer;
use super::{ParamStore, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Silu,
    LeakyRelu(f64),
    Identity,
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Silu => write!(f, "silu"),
            Activation::LeakyRelu(_) => write!(f, "leaky_relu"),
            Activation::Identity => write!(f, "identity"),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "silu" => Ok(Activation::Silu),
            "leaky_relu" | "leakyrelu" => Ok(Activation::LeakyRelu(0.2)),
            "identity" | "linear" => Ok(Activation::Identity),
            other => Err(Error::Config(format!("unknown activation `{other}`"))),
        }
    }
}

/// Layer sizes `[in, hidden.., out]`; the activation follows every layer
/// except the last.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpSpec {
    pub sizes: Vec<usize>,
    pub activation: Activation,
}

impl MlpSpec {
    pub fn new(sizes: Vec<usize>, activation: Activation) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least input and output sizes");
        Self { sizes, activation }
    }

    /// A single affine map.
    pub fn linear(input: usize, output: usize) -> Self {
        Self::new(vec![input, output], Activation::Identity)
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn weight_name(prefix: &str, layer: usize) -> String {
        format!("{prefix}.{layer}.weight")
    }

    pub fn bias_name(prefix: &str, layer: usize) -> String {
        format!("{prefix}.{layer}.bias")
    }

    /// Registers weights under `prefix`. `final_gain` scales the last layer's
    /// init range (0 gives an exactly-zero output layer).
    pub fn init(&self, store: &mut ParamStore, init: &mut Initializer, prefix: &str, final_gain: f64) -> Result<()> {
        for layer in 0..self.n_layers() {
            let gain = if layer + 1 == self.n_layers() { final_gain } else { 1.0 };
            let (w, b) = init.linear(self.sizes[layer], self.sizes[layer + 1], gain);
            store.insert(Self::weight_name(prefix, layer), w)?;
            store.insert(Self::bias_name(prefix, layer), b)?;
        }
        Ok(())
    }
}

/// Applies the MLP stored under `prefix` to the rows of `input`.
pub fn mlp_forward(tape: &mut Tape, store: &ParamStore, prefix: &str, input: Var, spec: &MlpSpec) -> Result<Var> {
    let mut h = input;
    for layer in 0..spec.n_layers() {
        let w_name = MlpSpec::weight_name(prefix, layer);
        let w = tape.param(store, &w_name)?;
        let (fan_in, fan_out) = tape.value(w).dims2();
        let width = tape.value(h).cols();
        if fan_in != width || fan_in != spec.sizes[layer] || fan_out != spec.sizes[layer + 1] {
            return Err(Error::dim(
                &w_name,
                format!(
                    "input width {width}, weight {fan_in}x{fan_out}, expected {}x{}",
                    spec.sizes[layer],
                    spec.sizes[layer + 1]
                ),
            ));
        }
        let b = tape.param(store, &MlpSpec::bias_name(prefix, layer))?;
        let z = tape.matmul(h, w)?;
        let z = tape.add_bias(z, b)?;
        h = if layer + 1 == spec.n_layers() {
            z
        } else {
            match spec.activation {
                Activation::Silu => tape.silu(z),
                Activation::LeakyRelu(slope) => tape.leaky_relu(z, slope),
                Activation::Identity => z,
            }
        };
    }
    Ok(h)
}
