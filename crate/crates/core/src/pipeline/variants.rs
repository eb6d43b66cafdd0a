use serde::{Deserialize, Serialize};

use crate::candidates::RerankWeights;
use crate::decoder::LossMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Search {
    Greedy,
    /// Beam search without the sibling-rank penalty.
    Beam,
    /// Beam search with the configured penalty.
    Diverse,
}

/// One system configuration: which loss the scorer was trained with, how
/// candidates are produced, whether they are clustered, and how they are
/// reranked (`None` keeps the single greedy output).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub name: String,
    pub loss: LossMode,
    pub search: Search,
    pub cluster: bool,
    pub weights: Option<RerankWeights>,
}

pub const VARIANT_NAMES: [&str; 7] = [
    "S2S",
    "S2S-Loss",
    "S2S-FA",
    "S2S-Cluster-FA",
    "S2S-Diverse-FA",
    "S2S-All-FAS",
    "S2S-All-FA",
];

impl VariantSpec {
    pub fn new(name: &str, loss: LossMode, search: Search, cluster: bool, weights: Option<RerankWeights>) -> Self {
        Self {
            name: name.to_string(),
            loss,
            search,
            cluster,
            weights,
        }
    }

    pub fn named(name: &str) -> Option<Self> {
        use LossMode::{Standard, Weighted};
        use Search::{Beam, Diverse, Greedy};
        let fa = Some(RerankWeights::FA);
        let spec = match name {
            "S2S" => Self::new(name, Standard, Greedy, false, None),
            "S2S-Loss" => Self::new(name, Weighted, Greedy, false, None),
            "S2S-FA" => Self::new(name, Standard, Beam, false, fa),
            "S2S-Cluster-FA" => Self::new(name, Standard, Beam, true, fa),
            "S2S-Diverse-FA" => Self::new(name, Standard, Diverse, false, fa),
            "S2S-All-FAS" => Self::new(name, Weighted, Diverse, true, Some(RerankWeights::FAS)),
            "S2S-All-FA" => Self::new(name, Weighted, Diverse, true, fa),
            _ => return None,
        };
        Some(spec)
    }

    pub fn all_named() -> Vec<Self> {
        VARIANT_NAMES.iter().filter_map(|n| Self::named(n)).collect()
    }

    /// File-name form of the variant name.
    pub fn slug(&self) -> String {
        self.name.to_ascii_lowercase()
    }
}
