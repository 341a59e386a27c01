use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ConvArch {
    #[default]
    Vgg13,
    Vgg16,
}

impl ConvArch {
    /// Conv layers per stage.
    pub fn stage_depths(self) -> [usize; 5] {
        match self {
            ConvArch::Vgg13 => [2, 2, 2, 2, 2],
            ConvArch::Vgg16 => [2, 2, 3, 3, 3],
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RnnKind {
    #[default]
    Gru,
    Lstm,
    None,
}

impl RnnKind {
    pub fn gates(self) -> usize {
        match self {
            RnnKind::Gru => 3,
            RnnKind::Lstm => 4,
            RnnKind::None => 0,
        }
    }
}

/// Architecture hyperparameters. Defaults are the tuned optimum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HybridConfig {
    pub conv_arch: ConvArch,
    /// Width of the first conv stage; stages use `base · [1, 2, 4, 8, 8]`.
    pub conv_base_width: usize,
    pub batch_norm: bool,
    pub rnn_kind: RnnKind,
    pub rnn_layers: usize,
    pub rnn_units: usize,
    pub bidirectional: bool,
    pub attention_enabled: bool,
    pub attention_nodes: usize,
    pub fc_layers: usize,
    pub fc_nodes: usize,
    pub dropout_p: f64,
    pub threshold: f64,
    /// Single linear map from the context to the output unit, no hidden FC.
    pub direct_head: bool,
    pub input_channels: usize,
    pub input_samples: usize,
}

impl Default for HybridConfig {
    fn default() -> Self {
        HybridConfig {
            conv_arch: ConvArch::Vgg13,
            conv_base_width: 64,
            batch_norm: true,
            rnn_kind: RnnKind::Gru,
            rnn_layers: 1,
            rnn_units: 125,
            bidirectional: true,
            attention_enabled: true,
            attention_nodes: 256,
            fc_layers: 1,
            fc_nodes: 512,
            dropout_p: 0.5,
            threshold: 0.5,
            direct_head: false,
            input_channels: 32,
            input_samples: 512,
        }
    }
}

impl HybridConfig {
    pub const POOLS: usize = 5;

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Config(m));
        if !(1..=64).contains(&self.conv_base_width) {
            return bad(format!("conv_base_width {} outside 1..=64", self.conv_base_width));
        }
        if self.rnn_kind != RnnKind::None {
            if !(1..=3).contains(&self.rnn_layers) {
                return bad(format!("rnn_layers {} outside 1..=3", self.rnn_layers));
            }
            if !(16..=512).contains(&self.rnn_units) {
                return bad(format!("rnn_units {} outside 16..=512", self.rnn_units));
            }
        }
        if self.attention_enabled && self.rnn_kind != RnnKind::None && !(64..=512).contains(&self.attention_nodes) {
            return bad(format!("attention_nodes {} outside 64..=512", self.attention_nodes));
        }
        if !self.direct_head {
            if !(1..=3).contains(&self.fc_layers) {
                return bad(format!("fc_layers {} outside 1..=3", self.fc_layers));
            }
            if !(128..=1024).contains(&self.fc_nodes) {
                return bad(format!("fc_nodes {} outside 128..=1024", self.fc_nodes));
            }
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return bad(format!("dropout_p {} outside [0, 1)", self.dropout_p));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold {} outside (0, 1)", self.threshold));
        }
        let div = 1usize << Self::POOLS;
        if self.input_channels == 0 || self.input_samples == 0 || self.input_samples % div != 0 {
            return bad(format!(
                "input {}x{} must be non-empty with samples divisible by {div}",
                self.input_channels, self.input_samples
            ));
        }
        Ok(())
    }

    pub fn stage_widths(&self) -> [usize; 5] {
        let b = self.conv_base_width;
        [b, 2 * b, 4 * b, 8 * b, 8 * b]
    }

    /// Output channels of every conv layer, in order.
    pub fn conv_layers(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut cin = self.input_channels;
        for (w, d) in self.stage_widths().iter().zip(self.conv_arch.stage_depths()) {
            for _ in 0..d {
                out.push((cin, *w));
                cin = *w;
            }
        }
        out
    }

    /// Encoder output `(features, time steps)`.
    pub fn encoder_shape(&self) -> (usize, usize) {
        (self.stage_widths()[4], self.input_samples >> Self::POOLS)
    }

    pub fn directions(&self) -> usize {
        if self.bidirectional {
            2
        } else {
            1
        }
    }

    /// Per-step width of the recurrent output.
    pub fn rnn_output_width(&self) -> usize {
        match self.rnn_kind {
            RnnKind::None => 0,
            _ => self.rnn_units * self.directions(),
        }
    }

    pub fn uses_attention(&self) -> bool {
        self.attention_enabled && self.rnn_kind != RnnKind::None
    }

    /// Width of the vector entering the head.
    pub fn head_input_width(&self) -> usize {
        match self.rnn_kind {
            RnnKind::None => self.encoder_shape().0,
            _ => self.rnn_output_width(),
        }
    }

    /// Short architecture name, e.g. `VGG13-BiGRU-Attn`.
    pub fn arch_name(&self) -> String {
        let mut s = match self.conv_arch {
            ConvArch::Vgg13 => "VGG13".to_string(),
            ConvArch::Vgg16 => "VGG16".to_string(),
        };
        let dir = if self.bidirectional { "Bi" } else { "" };
        match self.rnn_kind {
            RnnKind::Gru => s += &format!("-{dir}GRU"),
            RnnKind::Lstm => s += &format!("-{dir}LSTM"),
            RnnKind::None => return s,
        }
        if self.attention_enabled {
            s += "-Attn";
        }
        s
    }
}
