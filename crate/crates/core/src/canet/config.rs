use serde::{Deserialize, Serialize};

use crate::attention::{ChannelAttentionSpec, PixelAttentionSpec};
use crate::error::{Error, Result};
use crate::nn::WeightInit;

/// How consecutive block outputs are merged, locally and globally.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Combine {
    ElementWise,
    Concatenation,
}

/// The four component-ablation rows, from the plain element-wise network
/// to the full model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ablation {
    ElementWise,
    Concatenation,
    FeatureSelection,
    FeatureAttention,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [
        Ablation::ElementWise,
        Ablation::Concatenation,
        Ablation::FeatureSelection,
        Ablation::FeatureAttention,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Ablation::ElementWise => "element-wise",
            Ablation::Concatenation => "+concatenation",
            Ablation::FeatureSelection => "+feature-selection",
            Ablation::FeatureAttention => "+feature-attention",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub blocks: usize,
    pub layers_per_block: usize,
    pub channels: usize,
    /// Hidden widths of the pixel attention branch; `None` means
    /// `C/2, C/8`.
    pub pa_hidden: Option<Vec<usize>>,
    pub ca_ratio: usize,
    pub combine: Combine,
    /// 1x1 projections after the local and global merges.
    pub feature_selection: bool,
    /// Pixel and channel attention inside every A-layer.
    pub feature_attention: bool,
    pub in_channels: usize,
    pub weight_init: WeightInit,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            blocks: 5,
            layers_per_block: 6,
            channels: 64,
            pa_hidden: None,
            ca_ratio: 8,
            combine: Combine::Concatenation,
            feature_selection: true,
            feature_attention: true,
            in_channels: 3,
            weight_init: WeightInit::default(),
        }
    }
}

impl ModelConfig {
    /// 2 blocks x 2 layers, 16 channels, PA 16->8->4->1, CA ratio 4.
    pub fn tiny() -> Self {
        ModelConfig {
            blocks: 2,
            layers_per_block: 2,
            channels: 16,
            pa_hidden: Some(vec![8, 4]),
            ca_ratio: 4,
            ..Self::default()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "default" => Some(Self::default()),
            "tiny" => Some(Self::tiny()),
            _ => None,
        }
    }

    pub fn with_ablation(mut self, row: Ablation) -> Self {
        let (combine, fs, fa) = match row {
            Ablation::ElementWise => (Combine::ElementWise, false, false),
            Ablation::Concatenation => (Combine::Concatenation, false, false),
            Ablation::FeatureSelection => (Combine::Concatenation, true, false),
            Ablation::FeatureAttention => (Combine::Concatenation, true, true),
        };
        self.combine = combine;
        self.feature_selection = fs;
        self.feature_attention = fa;
        self
    }

    pub fn pixel_attention(&self) -> PixelAttentionSpec {
        match &self.pa_hidden {
            Some(hidden) => PixelAttentionSpec::with_hidden(self.channels, hidden),
            None => PixelAttentionSpec::tapered(self.channels),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks == 0 || self.layers_per_block == 0 || self.channels == 0 {
            return Err(Error::config(format!(
                "blocks, layers_per_block and channels must be positive: {self:?}"
            )));
        }
        if self.in_channels != 1 && self.in_channels != 3 {
            return Err(Error::config(format!(
                "in_channels must be 1 or 3, got {}",
                self.in_channels
            )));
        }
        if self.feature_attention {
            self.pixel_attention().validate()?;
            ChannelAttentionSpec {
                channels: self.channels,
                ratio: self.ca_ratio,
            }
            .validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        ModelConfig::default().validate().unwrap();
        ModelConfig::tiny().validate().unwrap();
        assert_eq!(ModelConfig::tiny().pixel_attention().widths, vec![16, 8, 4, 1]);
        assert_eq!(ModelConfig::default().pixel_attention().widths, vec![64, 32, 8, 1]);
        assert!(ModelConfig::preset("huge").is_none());
    }

    #[test]
    fn invalid_configs() {
        let mut c = ModelConfig::tiny();
        c.ca_ratio = 3;
        assert!(c.validate().is_err());
        // Attention off: the ratio is irrelevant.
        c.feature_attention = false;
        assert!(c.validate().is_ok());
        let c = ModelConfig {
            blocks: 0,
            ..ModelConfig::tiny()
        };
        assert!(c.validate().is_err());
        let c = ModelConfig {
            in_channels: 2,
            ..ModelConfig::tiny()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn toml_round_trip_and_partial_files() {
        let c = ModelConfig::tiny().with_ablation(Ablation::ElementWise);
        let text = toml::to_string(&c).unwrap();
        assert!(text.contains("combine = \"element-wise\""));
        assert_eq!(toml::from_str::<ModelConfig>(&text).unwrap(), c);
        let partial: ModelConfig = toml::from_str("blocks = 3").unwrap();
        assert_eq!(partial.blocks, 3);
        assert_eq!(partial.channels, 64);
        assert!(toml::from_str::<ModelConfig>("blokcs = 3").is_err());
    }
}
