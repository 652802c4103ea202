use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::PropagationKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConvKind {
    /// `σ(P H W)`
    GCN,
    /// `P H`
    SGC,
    /// `σ(P_rw H W_nb + H W_self)`
    SageMean,
    /// `σ(H W)`, no propagation. Used as the feed-forward control.
    Dense,
}

impl ConvKind {
    pub fn has_weight(self) -> bool {
        !matches!(self, ConvKind::SGC)
    }

    pub fn name(self) -> &'static str {
        match self {
            ConvKind::GCN => "gcn",
            ConvKind::SGC => "sgc",
            ConvKind::SageMean => "sage",
            ConvKind::Dense => "dense",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Some(ConvKind::GCN),
            "sgc" => Some(ConvKind::SGC),
            "sage" | "sagemean" | "sage-mean" => Some(ConvKind::SageMean),
            "dense" => Some(ConvKind::Dense),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SkipKind {
    NoSkip,
    Residual,
    Initial,
    JK,
    Drive,
}

impl SkipKind {
    pub const ALL: [SkipKind; 5] = [
        SkipKind::NoSkip,
        SkipKind::Residual,
        SkipKind::Initial,
        SkipKind::JK,
        SkipKind::Drive,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub conv_kind: ConvKind,
    pub skip_kind: SkipKind,
    #[serde(default)]
    pub with_ffn: bool,
    pub depth: usize,
    pub hidden_dim: usize,
    #[serde(default)]
    pub alpha_init: f64,
    #[serde(default)]
    pub beta_init: f64,
    #[serde(default)]
    pub linear_mode: bool,
    #[serde(default)]
    pub dropout_rate: f64,
    #[serde(default)]
    pub propagation_kind: PropagationKind,
}

impl ModelSpec {
    /// Gated block with feed-forward module, gates cold-started at zero.
    pub fn udgnn(conv_kind: ConvKind, depth: usize, hidden_dim: usize) -> Self {
        Self {
            conv_kind,
            skip_kind: SkipKind::Drive,
            with_ffn: true,
            depth,
            hidden_dim,
            alpha_init: 0.0,
            beta_init: 0.0,
            linear_mode: false,
            dropout_rate: 0.0,
            propagation_kind: PropagationKind::SymNorm,
        }
    }

    pub fn plain(conv_kind: ConvKind, skip_kind: SkipKind, depth: usize, hidden_dim: usize) -> Self {
        Self {
            with_ffn: false,
            skip_kind,
            ..Self::udgnn(conv_kind, depth, hidden_dim)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason: &str| Err(Error::config("model spec", field, reason));
        if self.hidden_dim == 0 {
            return bad("hidden_dim", "must be at least 1");
        }
        if self.with_ffn && self.skip_kind != SkipKind::Drive {
            return bad("with_ffn", "requires skip_kind = Drive");
        }
        if self.skip_kind == SkipKind::JK && self.depth == 0 {
            return bad("depth", "JK readout needs at least one layer");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate", "must lie in [0, 1)");
        }
        if !self.alpha_init.is_finite() {
            return bad("alpha_init", "must be finite");
        }
        if !self.beta_init.is_finite() {
            return bad("beta_init", "must be finite");
        }
        Ok(())
    }

    /// Short label used in sweep output, e.g. `drive-ffn`.
    pub fn variant_name(&self) -> &'static str {
        match (self.skip_kind, self.with_ffn) {
            (SkipKind::NoSkip, _) => "noskip",
            (SkipKind::Residual, _) => "residual",
            (SkipKind::Initial, _) => "initial",
            (SkipKind::JK, _) => "jk",
            (SkipKind::Drive, false) => "drive",
            (SkipKind::Drive, true) => "drive-ffn",
        }
    }

    /// Inverse of [`ModelSpec::variant_name`]: `(skip_kind, with_ffn)`.
    pub fn parse_variant(name: &str) -> Option<(SkipKind, bool)> {
        match name.to_ascii_lowercase().as_str() {
            "noskip" | "none" | "plain" => Some((SkipKind::NoSkip, false)),
            "residual" | "res" => Some((SkipKind::Residual, false)),
            "initial" | "init" => Some((SkipKind::Initial, false)),
            "jk" => Some((SkipKind::JK, false)),
            "drive" => Some((SkipKind::Drive, false)),
            "drive-ffn" | "driveffn" | "udgnn" => Some((SkipKind::Drive, true)),
            _ => None,
        }
    }

    pub const VARIANT_NAMES: [&'static str; 6] = ["noskip", "residual", "initial", "jk", "drive", "drive-ffn"];
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_uses_documented_field_names() {
        let spec = ModelSpec::udgnn(ConvKind::GCN, 4, 16);
        let v: serde_json::Value = serde_json::to_value(&spec).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        for k in [
            "conv_kind",
            "skip_kind",
            "with_ffn",
            "depth",
            "hidden_dim",
            "alpha_init",
            "beta_init",
            "linear_mode",
            "dropout_rate",
            "propagation_kind",
        ] {
            assert!(keys.contains(&k), "missing {k}");
        }
        assert_eq!(v["conv_kind"], "GCN");
        assert_eq!(v["skip_kind"], "Drive");
        assert_eq!(v["propagation_kind"], "SymNorm");
        let back: ModelSpec = serde_json::from_value(v).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn ffn_requires_drive() {
        let mut spec = ModelSpec::udgnn(ConvKind::GCN, 2, 8);
        spec.skip_kind = SkipKind::Residual;
        assert!(spec.validate().unwrap_err().to_string().contains("with_ffn"));
    }

    #[test]
    fn variant_names_round_trip() {
        for name in ModelSpec::VARIANT_NAMES {
            let (skip, ffn) = ModelSpec::parse_variant(name).unwrap();
            let spec = ModelSpec {
                skip_kind: skip,
                with_ffn: ffn,
                ..ModelSpec::udgnn(ConvKind::GCN, 1, 1)
            };
            assert_eq!(spec.variant_name(), name);
        }
        assert!(ModelSpec::parse_variant("bogus").is_none());
    }
}
