//! Run configuration, loaded from TOML with `[game]`, `[agent]`, `[opponent]`
//! and `[run]` sections.
//!
//! ```toml
//! [game]
//! source = "prior"          # "file" | "random" | "chain" | "prior"
//! n_states = 3
//! n_actions_1 = 2
//! n_actions_2 = 2
//!
//! [agent]
//! prior_pseudo_count = 1.0  # symmetric Dirichlet prior
//! planner_tol = 1e-8
//! damping = 0.2
//! max_iter = 1000000
//!
//! [opponent]
//! kind = "best_responder"   # oracle_maximin | best_responder | switcher | uniform | selfplay_psrl
//! window = 500
//! informed = true
//!
//! [run]
//! horizon = 100000
//! seed = 7
//! checkpoint_stride = 100
//! ```

use std::path::{Path, PathBuf};

use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::opponents::OpponentSpec;
use crate::psrl::PsrlConfig;

fn default_mixing() -> f64 {
    0.1
}

fn default_slip() -> f64 {
    0.05
}

/// Where the true game comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum GameSource {
    /// JSON file in the documented nested layout.
    File { path: PathBuf },
    /// `gen_random_game`; `seed` defaults to a draw from the game stream.
    Random {
        n_states: usize,
        n_actions_1: usize,
        n_actions_2: usize,
        #[serde(default = "default_mixing")]
        mixing: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// `gen_chain_game`.
    Chain {
        n_states: usize,
        #[serde(default = "default_slip")]
        slip: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// Kernel drawn from the agent's own Dirichlet prior, rewards uniform on
    /// `[-1, 0]`; both from the game stream. This is the Bayesian-regret setting.
    Prior {
        n_states: usize,
        n_actions_1: usize,
        n_actions_2: usize,
    },
}

impl Default for GameSource {
    fn default() -> Self {
        GameSource::Prior {
            n_states: 3,
            n_actions_1: 2,
            n_actions_2: 2,
        }
    }
}

fn default_horizon() -> u64 {
    100_000
}

fn default_stride() -> u64 {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    /// Horizon `T`.
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default)]
    pub seed: u64,
    /// Steps between rows of `trace.csv`; the final step is always written.
    #[serde(default = "default_stride")]
    pub checkpoint_stride: u64,
    #[serde(default)]
    pub initial_state: usize,
    /// Write `steps.csv` with every step.
    #[serde(default)]
    pub per_step_log: bool,
    /// Compute per-episode confidence radii and membership of the true kernel.
    #[serde(default)]
    pub diagnostics: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            horizon: default_horizon(),
            seed: 0,
            checkpoint_stride: default_stride(),
            initial_state: 0,
            per_step_log: false,
            diagnostics: false,
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RunConfig {
    #[serde(default)]
    pub game: GameSource,
    #[serde(default)]
    pub agent: PsrlConfig,
    #[serde(default)]
    pub opponent: OpponentSpec,
    #[serde(default)]
    pub run: RunSettings,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::parse(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.run.horizon < 1 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        if self.run.checkpoint_stride < 1 {
            return Err(Error::InvalidParameter("checkpoint_stride must be at least 1".into()));
        }
        self.agent.validate()?;
        self.opponent.validate()
    }

    /// Same config with a different run seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.run.seed = seed;
        c
    }

    /// SHA-256 of the canonical TOML form, ignoring the output directory.
    pub fn digest(&self) -> String {
        let mut canonical = self.clone();
        canonical.run.out_dir = None;
        let text = toml::to_string(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// Independent random streams of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Game = 0,
    Agent = 1,
    Opponent = 2,
    Environment = 3,
}

/// ChaCha8 keyed by `seed` with the stream id selecting one of four
/// non-overlapping sequences, so changing one role's consumption never shifts
/// another's draws.
pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
