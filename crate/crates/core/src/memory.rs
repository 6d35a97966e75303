//! Peak-memory estimate for a mixed-precision deployment.
//!
//! Byte counts are exact integers. `GIB` is 2^30 bytes; the shipped budget
//! is 2.2 GiB.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kvconfig::KvConfig;

pub const GIB: f64 = (1u64 << 30) as f64;
pub const ALLOWED_BITS: [u32; 4] = [4, 8, 16, 32];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentBits {
    pub llm: u32,
    pub vit: u32,
    pub projector: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemorySpec {
    pub llm_params: u64,
    pub vit_params: u64,
    /// Two-layer MLP projector; its size is a placeholder assumption.
    pub projector_params: u64,
    pub weight_bits: ComponentBits,
    pub activation_bits: ComponentBits,
    pub kv_bits: u32,
    pub kv_tokens: u64,
    /// Cached K and V elements per token summed over layers. Architecture
    /// dependent; the default assumes 28 layers with a 512-wide K and V.
    pub kv_values_per_token: u64,
    pub activation_workspace: u64,
    pub budget: u64,
}

impl Default for MemorySpec {
    fn default() -> Self {
        Self {
            llm_params: 2_700_000_000,
            vit_params: 400_000_000,
            projector_params: 15_000_000,
            weight_bits: ComponentBits {
                llm: 4,
                vit: 8,
                projector: 8,
            },
            activation_bits: ComponentBits {
                llm: 16,
                vit: 16,
                projector: 16,
            },
            kv_bits: 8,
            kv_tokens: 2048,
            kv_values_per_token: 28 * 2 * 512,
            activation_workspace: 256 << 20,
            budget: (2.2 * GIB) as u64,
        }
    }
}

fn bytes(count: u64, bits: u32) -> u64 {
    (count as u128 * bits as u128).div_ceil(8) as u64
}

impl MemorySpec {
    /// Reads a `key = number` file; absent keys keep their defaults.
    pub fn from_config(cfg: &KvConfig) -> Result<Self> {
        let d = Self::default();
        let int = |key: &str, default: u64| -> Result<u64> {
            match cfg.get(key) {
                None => Ok(default),
                Some(v) if v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64 => Ok(v as u64),
                Some(v) => Err(Error::Parse {
                    path: cfg.source().to_path_buf(),
                    line: 0,
                    message: format!("{key} must be a non-negative integer, got {v}"),
                }),
            }
        };
        let bits = |key: &str, default: u32| -> Result<u32> { Ok(int(key, default as u64)? as u32) };
        let budget = match cfg.get("budget.gib") {
            Some(g) => (g * GIB) as u64,
            None => int("budget.bytes", d.budget)?,
        };
        let spec = Self {
            llm_params: int("llm.params", d.llm_params)?,
            vit_params: int("vit.params", d.vit_params)?,
            projector_params: int("projector.params", d.projector_params)?,
            weight_bits: ComponentBits {
                llm: bits("llm.weight_bits", d.weight_bits.llm)?,
                vit: bits("vit.weight_bits", d.weight_bits.vit)?,
                projector: bits("projector.weight_bits", d.weight_bits.projector)?,
            },
            activation_bits: ComponentBits {
                llm: bits("llm.activation_bits", d.activation_bits.llm)?,
                vit: bits("vit.activation_bits", d.activation_bits.vit)?,
                projector: bits("projector.activation_bits", d.activation_bits.projector)?,
            },
            kv_bits: bits("kv.bits", d.kv_bits)?,
            kv_tokens: int("kv.tokens", d.kv_tokens)?,
            kv_values_per_token: int("kv.values_per_token", d.kv_values_per_token)?,
            activation_workspace: int("workspace.bytes", d.activation_workspace)?,
            budget,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_config(&KvConfig::load(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("llm weights", self.weight_bits.llm),
            ("vit weights", self.weight_bits.vit),
            ("projector weights", self.weight_bits.projector),
            ("llm activations", self.activation_bits.llm),
            ("vit activations", self.activation_bits.vit),
            ("projector activations", self.activation_bits.projector),
            ("kv cache", self.kv_bits),
        ];
        for (component, bits) in checks {
            if !ALLOWED_BITS.contains(&bits) {
                return Err(Error::InvalidPrecision {
                    component: component.into(),
                    bits,
                });
            }
        }
        if self.llm_params == 0 || self.vit_params == 0 || self.projector_params == 0 {
            return Err(Error::Degenerate("parameter counts must be positive".into()));
        }
        Ok(())
    }

    pub fn kv_bytes_per_token(&self) -> u64 {
        bytes(self.kv_values_per_token, self.kv_bits)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryBreakdown {
    /// Weight bytes keyed by `llm`, `projector`, `vit`.
    pub weights: BTreeMap<String, u64>,
    pub kv_cache: u64,
    pub workspace: u64,
    /// Everything resident while the vision encoder is loaded.
    pub total: u64,
    /// Total after the vision encoder is released.
    pub post_free_total: u64,
    pub budget: u64,
    pub within_budget: bool,
    pub post_free_within_budget: bool,
}

impl MemoryBreakdown {
    pub fn weights_total(&self) -> u64 {
        self.weights.values().sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("breakdown serializes")
    }
}

pub fn estimate_peak(spec: &MemorySpec) -> Result<MemoryBreakdown> {
    spec.validate()?;
    let llm = bytes(spec.llm_params, spec.weight_bits.llm);
    let vit = bytes(spec.vit_params, spec.weight_bits.vit);
    let projector = bytes(spec.projector_params, spec.weight_bits.projector);
    let weights: BTreeMap<String, u64> = [("llm", llm), ("vit", vit), ("projector", projector)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    let kv_cache = spec.kv_tokens * spec.kv_bytes_per_token();
    let total = llm + vit + projector + kv_cache + spec.activation_workspace;
    let post_free_total = total - vit;
    Ok(MemoryBreakdown {
        weights,
        kv_cache,
        workspace: spec.activation_workspace,
        total,
        post_free_total,
        budget: spec.budget,
        within_budget: total <= spec.budget,
        post_free_within_budget: post_free_total <= spec.budget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_weight_bytes() {
        let b = estimate_peak(&MemorySpec::default()).unwrap();
        assert_eq!(b.weights["llm"], 1_350_000_000);
        assert_eq!(b.weights["vit"], 400_000_000);
        assert!(b.within_budget);
        assert_eq!(b.total, b.weights_total() + b.kv_cache + b.workspace);
    }

    #[test]
    fn zero_kv_and_workspace_leave_weights() {
        let spec = MemorySpec {
            kv_tokens: 0,
            activation_workspace: 0,
            ..MemorySpec::default()
        };
        let b = estimate_peak(&spec).unwrap();
        assert_eq!(b.total, b.weights_total());
    }

    #[test]
    fn invalid_precision_rejected() {
        let mut spec = MemorySpec::default();
        spec.weight_bits.vit = 6;
        assert!(matches!(
            estimate_peak(&spec),
            Err(Error::InvalidPrecision { bits: 6, .. })
        ));
    }

    #[test]
    fn config_overrides() {
        let cfg = KvConfig::parse("llm.weight_bits = 8\nbudget.gib = 4\n", "mem.cfg").unwrap();
        let spec = MemorySpec::from_config(&cfg).unwrap();
        assert_eq!(spec.weight_bits.llm, 8);
        assert_eq!(spec.budget, 4 << 30);
        assert!(MemorySpec::from_config(&KvConfig::parse("kv.tokens = 1.5\n", "m").unwrap()).is_err());
    }
}
