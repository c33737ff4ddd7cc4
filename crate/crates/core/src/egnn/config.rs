use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// How message weights move coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoordUpdateForm {
    /// `x_i + 1/max(|N(i)|,1) · Σ (x_i − x_j)·φ_x(m_ij)` with scalar φ_x.
    #[default]
    RelativeVector,
    /// `x_i + Σ ‖x_i − x_j‖²·φ_x(m_ij)` with 3-vector φ_x. Not equivariant;
    /// kept for ablation.
    LiteralScalar,
}

impl fmt::Display for CoordUpdateForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoordUpdateForm::RelativeVector => "relative_vector",
            CoordUpdateForm::LiteralScalar => "literal_scalar",
        })
    }
}

impl FromStr for CoordUpdateForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relative_vector" => Ok(CoordUpdateForm::RelativeVector),
            "literal_scalar" => Ok(CoordUpdateForm::LiteralScalar),
            other => Err(Error::Config(format!("unknown coord_update_form `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerConfig {
    /// Width `d` of the node states.
    pub feature_dim: usize,
    /// Hidden width of φ_e and φ_x (two hidden layers each).
    pub hidden_dim: usize,
    /// Hidden layers inside φ_aggr and Φ^n; 0 makes them single affine maps.
    pub mix_hidden_layers: usize,
    pub n_layers: usize,
    /// Cross-attention cutoff in Å (strict `<`).
    pub th_dist: f64,
    pub coord_update_form: CoordUpdateForm,
    pub attention_heads: usize,
    pub leaky_slope: f64,
    /// Skip coordinate updates entirely.
    pub freeze_coords: bool,
    /// Init range of φ_x's output layer relative to the usual bound.
    pub coord_gain: f64,
}

impl Default for LayerConfig {
    fn default() -> Self {
        Self {
            feature_dim: 64,
            hidden_dim: 64,
            mix_hidden_layers: 0,
            n_layers: 3,
            th_dist: 5.0,
            coord_update_form: CoordUpdateForm::RelativeVector,
            attention_heads: 1,
            leaky_slope: 0.2,
            freeze_coords: false,
            coord_gain: 1e-3,
        }
    }
}

impl LayerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::Config("feature_dim and hidden_dim must be positive".into()));
        }
        if self.n_layers == 0 {
            return Err(Error::Config("n_layers must be at least 1".into()));
        }
        if !(self.th_dist > 0.0) {
            return Err(Error::Config(format!("th_dist must be positive, got {}", self.th_dist)));
        }
        if self.attention_heads == 0 || !self.feature_dim.is_multiple_of(self.attention_heads) {
            return Err(Error::Config(format!(
                "attention_heads ({}) must divide feature_dim ({})",
                self.attention_heads, self.feature_dim
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.feature_dim / self.attention_heads
    }
}
