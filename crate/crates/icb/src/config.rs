//! Recorded benchmark configuration.
//!
//! Every bench run writes its [`RunConfig`] next to its report; feeding that
//! file back with `--config` repeats the run with the same inputs.

use std::path::{Path, PathBuf};

use icb_core::energy::parse_positive;
use icb_core::EnergyParams;
use serde::{Deserialize, Serialize};

use crate::codecs;
use crate::dataset::Dataset;
use crate::harness::{Environment, Mode, SweepPlan, DEFAULT_BATCH_SIZES};
use crate::transport::{LinkSpec, DEFAULT_RATE_BITS_PER_S};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum LinkChoice {
    Inproc,
    Tcp,
}

/// Everything a bench run depends on except the clock.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub dataset: Dataset,
    pub batch_sizes: Vec<usize>,
    pub modes: Vec<Mode>,
    pub repetitions: usize,
    pub warmup: bool,
    pub codec: String,
    pub link: LinkChoice,
    /// For `tcp`: the address of a running `icb serve`. Without it the sink
    /// runs in this process on a loopback port.
    pub addr: Option<String>,
    pub rate_bits_per_s: u64,
    pub pipelined: bool,
    /// Energy parameters as exact rationals (`"480"`, `"2.5"`, `"3/4"`).
    pub tx_cost_per_bit: String,
    pub instructions_per_byte: String,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: "bench".into(),
            dataset: Dataset::Synthetic {
                seed: 7,
                count: 100_000,
            },
            batch_sizes: DEFAULT_BATCH_SIZES.to_vec(),
            modes: Mode::ALL.to_vec(),
            repetitions: 5,
            warmup: true,
            codec: "snappy".into(),
            link: LinkChoice::Inproc,
            addr: None,
            rate_bits_per_s: DEFAULT_RATE_BITS_PER_S,
            pipelined: false,
            tx_cost_per_bit: "480".into(),
            instructions_per_byte: "10".into(),
            out: None,
            format: Format::Csv,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("invalid configuration: {0}")]
pub struct ConfigError(pub String);

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError(m));
        if self.command != "bench" {
            return bad(format!("unsupported command {:?}", self.command));
        }
        if self.batch_sizes.is_empty() || self.batch_sizes.contains(&0) {
            return bad("batch sizes must be a non-empty list of positive counts".into());
        }
        if self.modes.is_empty() {
            return bad("at least one mode is required".into());
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if let Dataset::Synthetic { count: 0, .. } = self.dataset {
            return bad("synthetic dataset needs at least one reading".into());
        }
        codecs::by_name(&self.codec).map_err(|e| ConfigError(e.to_string()))?;
        self.energy()?;
        self.link_spec().validate().map_err(|e| ConfigError(e.to_string()))?;
        if self.link == LinkChoice::Inproc && self.addr.is_some() {
            return bad("--addr needs --link tcp".into());
        }
        Ok(())
    }

    pub fn energy(&self) -> Result<EnergyParams, ConfigError> {
        let tx = parse_positive(&self.tx_cost_per_bit).map_err(|e| ConfigError(format!("tx cost per bit: {e}")))?;
        let ipb = parse_positive(&self.instructions_per_byte)
            .map_err(|e| ConfigError(format!("instructions per byte: {e}")))?;
        EnergyParams::new(tx, ipb).map_err(|e| ConfigError(e.to_string()))
    }

    /// Whether the sink is a separate `icb serve` process.
    pub fn remote(&self) -> bool {
        self.link == LinkChoice::Tcp && self.addr.is_some()
    }

    pub fn link_spec(&self) -> LinkSpec {
        let spec = match (self.link, &self.addr) {
            (LinkChoice::Inproc, _) => LinkSpec::inproc("icb-bench"),
            (LinkChoice::Tcp, Some(addr)) => LinkSpec::tcp(addr.clone()),
            (LinkChoice::Tcp, None) => LinkSpec::tcp("127.0.0.1:0"),
        };
        spec.with_rate(self.rate_bits_per_s)
    }

    pub fn plan(&self) -> SweepPlan {
        SweepPlan {
            batch_sizes: self.batch_sizes.clone(),
            modes: self.modes.clone(),
            repetitions: self.repetitions,
            warmup: self.warmup,
        }
    }

    /// Reads a config file: either a bare config or a recorded
    /// `{"config": …, "environment": …}` document.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let inner = match value.get("config") {
            Some(c) => c.clone(),
            None => value,
        };
        serde_json::from_value(inner).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }
}

/// The document written next to a report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RunConfig,
    pub environment: Environment,
}

/// Where the record for report `out` goes: `<out>.env.json`.
pub fn record_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".env.json");
    PathBuf::from(s)
}
