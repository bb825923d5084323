use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use hypertree::format::Caps;
use hypertree::geodetic::TieBreak;
use hypertree::visual::ChainPoints;
use hypertree::{Family, FORMAT_VERSION};

/// `auto` (ln sqrt 2 / delta) or an explicit value.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum EpsilonPolicy {
    #[default]
    Auto,
    Explicit(f64),
}

impl EpsilonPolicy {
    pub fn resolve(self, delta2x: u32) -> f64 {
        match self {
            EpsilonPolicy::Auto => hypertree::visual::auto_epsilon(delta2x),
            EpsilonPolicy::Explicit(e) => e,
        }
    }
}

impl fmt::Display for EpsilonPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EpsilonPolicy::Auto => f.write_str("auto"),
            EpsilonPolicy::Explicit(e) => write!(f, "{e}"),
        }
    }
}

impl FromStr for EpsilonPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(EpsilonPolicy::Auto);
        }
        match s.parse::<f64>() {
            Ok(e) if e.is_finite() && e > 0.0 => Ok(EpsilonPolicy::Explicit(e)),
            _ => Err(format!("epsilon must be `auto` or a positive number, got `{s}`")),
        }
    }
}

impl Serialize for EpsilonPolicy {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EpsilonPolicy {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    /// Family tag, e.g. `example1:depth=10`.
    pub family: String,
    /// Base point of the Gromov products; the root when absent.
    pub base: Option<usize>,
    pub epsilon: EpsilonPolicy,
    /// Sphere radius of the boundary cells; the family default when absent.
    pub radius: Option<u32>,
    /// Doubled clustering threshold; `2R - 1` when absent.
    pub threshold2x: Option<u32>,
    pub chain_points: ChainPoints,
    /// One faithful tree per seed.
    pub seeds: Vec<u64>,
    pub kappa: Option<u32>,
    pub stage_cap: usize,
    pub tie_break: TieBreak,
    /// Seed of the sampled scans.
    pub scan_seed: u64,
    pub caps: Caps,
    /// Bundle directory; not part of the hash.
    #[serde(skip)]
    pub out_dir: Option<std::path::PathBuf>,
}

impl ExperimentConfig {
    pub fn new(family: Family) -> Self {
        Self {
            version: FORMAT_VERSION,
            family: family.to_string(),
            base: None,
            epsilon: EpsilonPolicy::Auto,
            radius: None,
            threshold2x: None,
            chain_points: ChainPoints::Sphere,
            seeds: vec![0],
            kappa: None,
            stage_cap: 32,
            tie_break: TieBreak::LeastId,
            scan_seed: 0,
            caps: Caps::default(),
            out_dir: None,
        }
    }

    pub fn family(&self) -> hypertree::Result<Family> {
        self.family.parse()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.version != FORMAT_VERSION {
            return Err(format!("unsupported config version {}", self.version));
        }
        self.family().map_err(|e| e.to_string())?;
        let c = &self.caps;
        let caps = [
            c.basepoint_cap,
            c.basepoint_samples,
            c.thin_triangle_cap,
            c.thin_triangle_samples,
            c.product_cap,
            c.product_samples,
            c.visual_points,
            self.stage_cap,
        ];
        if caps.contains(&0) {
            return Err("scan caps and the stage cap must be positive".into());
        }
        if self.seeds.is_empty() {
            return Err("at least one seed is required".into());
        }
        Ok(())
    }

    /// Canonical JSON, pretty with trailing newline.
    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("config serializes");
        out.push(b'\n');
        out
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, String> {
        #[derive(Deserialize)]
        struct Probe {
            version: u32,
        }
        let probe: Probe = serde_json::from_slice(bytes).map_err(|e| format!("config: {e}"))?;
        if probe.version != FORMAT_VERSION {
            return Err(format!("unsupported config version {}", probe.version));
        }
        let cfg: Self = serde_json::from_slice(bytes).map_err(|e| format!("config: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 of the canonical JSON, hex.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json()))
    }
}
