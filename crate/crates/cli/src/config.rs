//! Experiment configuration, loaded from TOML. Every field has a default so a
//! config file only needs the values it changes.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use srspmd_core::demand::DemandParams;
use srspmd_core::dispatch::SimParams;
use srspmd_core::mincover::CoverVariant;
use srspmd_core::pathnet::SpeedProfile;
use srspmd_core::synthetic::TripGenParams;
use srspmd_core::trips::FilterPolicy;
use srspmd_core::upgrade::{EvalMode, DEFAULT_FRACTIONS};

use crate::cost::CostModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pipeline {
    Oracle,
    Online,
    Lookahead,
    Upgrade,
    Demand,
    Stats,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Oracle => "oracle",
            Pipeline::Online => "online",
            Pipeline::Lookahead => "lookahead",
            Pipeline::Upgrade => "upgrade",
            Pipeline::Demand => "demand",
            Pipeline::Stats => "stats",
        }
    }
}

/// Data files. When `trips` is absent, trips come from the synthetic generator;
/// when the network is absent, a synthetic grid is used.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub nodes: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    pub trips: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub grid_cols: usize,
    pub grid_rows: usize,
    pub spacing_m: u32,
    pub trips: TripGenParams,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            grid_cols: 20,
            grid_rows: 20,
            spacing_m: 100,
            trips: TripGenParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub variant: CoverVariant,
    /// Longest idle gap between chained trips, hours. Absent means unlimited.
    pub connection_limit_h: Option<f64>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            variant: CoverVariant::Weighted,
            connection_limit_h: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub t_b: f64,
    pub t_w: f64,
    pub d_walk: f64,
    pub walk_speed_kmh: f64,
    /// Fixed fleet size; absent means the fleet grows on demand.
    pub fleet: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        let p = SimParams::online(SpeedProfile::uniform(1.0));
        Self {
            t_b: p.t_b,
            t_w: p.t_w,
            d_walk: p.d_walk,
            walk_speed_kmh: p.walk_speed_kmh,
            fleet: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LookaheadConfig {
    pub t_b: f64,
    pub t_la: f64,
}

impl Default for LookaheadConfig {
    fn default() -> Self {
        Self {
            t_b: 300.0,
            t_la: 4.0 * 3600.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemandConfig {
    /// Bus OD counts, stops and optional buildings. Without them a synthetic
    /// OD table on the network is used.
    pub od: Option<PathBuf>,
    pub stops: Option<PathBuf>,
    pub buildings: Option<PathBuf>,
    pub params: DemandParams,
    pub n_t_grid: Vec<usize>,
    pub reps: usize,
    pub speed_kmh: f64,
    /// Largest n_t included in the logarithmic fit.
    pub fit_max_n_t: Option<usize>,
}

impl Default for DemandConfig {
    fn default() -> Self {
        Self {
            od: None,
            stops: None,
            buildings: None,
            params: DemandParams::default(),
            n_t_grid: vec![100, 200, 500, 1000, 2000],
            reps: 100,
            speed_kmh: 2.5,
            fit_max_n_t: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UpgradeConfig {
    pub upgraded_kmh: f64,
    pub fractions: Vec<f64>,
    pub mode: EvalMode,
}

impl Default for UpgradeConfig {
    fn default() -> Self {
        Self {
            upgraded_kmh: SpeedProfile::DEFAULT_UPGRADED_KMH,
            fractions: DEFAULT_FRACTIONS.to_vec(),
            mode: EvalMode::Oracle,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    /// Connection-time caps, hours, compared against the uncapped solution.
    pub connection_limits_h: Vec<f64>,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            connection_limits_h: vec![0.5, 1.0, 2.0, 4.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Output directory.
    pub out: PathBuf,
    /// Worker threads; 0 uses all cores.
    pub jobs: usize,
    pub pipelines: Vec<Pipeline>,
    /// Day indices (days since the epoch of the trip clock). Synthetic runs
    /// generate one independent day per index.
    pub days: Vec<i64>,
    pub speeds_kmh: Vec<f64>,
    pub input: InputConfig,
    pub synthetic: SyntheticConfig,
    pub filter: FilterPolicy,
    pub oracle: OracleConfig,
    pub sim: SimConfig,
    pub lookahead: LookaheadConfig,
    pub demand: DemandConfig,
    pub upgrade: UpgradeConfig,
    pub stats: StatsConfig,
    pub cost: CostModel,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            jobs: 0,
            pipelines: vec![Pipeline::Oracle],
            days: vec![0],
            speeds_kmh: vec![1.0, 2.5, 5.0, 10.0],
            input: InputConfig::default(),
            synthetic: SyntheticConfig::default(),
            filter: FilterPolicy::default(),
            oracle: OracleConfig::default(),
            sim: SimConfig::default(),
            lookahead: LookaheadConfig::default(),
            demand: DemandConfig::default(),
            upgrade: UpgradeConfig::default(),
            stats: StatsConfig::default(),
            cost: CostModel::default(),
        }
    }
}

fn check_file(label: &str, path: &Option<PathBuf>) -> Result<()> {
    if let Some(p) = path {
        if !p.is_file() {
            bail!("{label} file {} does not exist", p.display());
        }
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).context("invalid config")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.pipelines.is_empty() {
            bail!("no pipeline selected");
        }
        if self.days.is_empty() {
            bail!("day selection is empty");
        }
        if self.speeds_kmh.is_empty() {
            bail!("relocation speed list is empty");
        }
        if self.speeds_kmh.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            bail!("relocation speeds must be positive");
        }
        check_file("nodes", &self.input.nodes)?;
        check_file("edges", &self.input.edges)?;
        check_file("trips", &self.input.trips)?;
        if self.input.nodes.is_some() != self.input.edges.is_some() {
            bail!("nodes and edges files must be given together");
        }
        if self.input.trips.is_some() && self.input.nodes.is_none() {
            bail!("a trips file needs a network");
        }
        if self.input.nodes.is_none() && (self.synthetic.grid_cols < 2 || self.synthetic.grid_rows < 1) {
            bail!("synthetic grid needs at least two nodes");
        }
        self.filter.validate()?;
        if let Some(h) = self.oracle.connection_limit_h {
            if !(h >= 0.0) {
                bail!("connection limit must be non-negative");
            }
        }
        self.sim_params(self.speeds_kmh[0]).validate()?;
        self.lookahead_params(self.speeds_kmh[0]).validate()?;
        if self.lookahead.t_la < self.lookahead.t_b {
            bail!("look-ahead window must be at least one batch interval");
        }
        if self.pipelines.contains(&Pipeline::Demand) {
            let d = &self.demand;
            if d.n_t_grid.is_empty() {
                bail!("demand n_t grid is empty");
            }
            if d.reps == 0 {
                bail!("demand repetitions must be at least 1");
            }
            if !(d.speed_kmh > 0.0) {
                bail!("demand relocation speed must be positive");
            }
            if d.od.is_some() != d.stops.is_some() {
                bail!("bus OD and stops files must be given together");
            }
            if d.od.is_some() && self.input.nodes.is_none() {
                bail!("bus OD data needs a network");
            }
            check_file("bus OD", &d.od)?;
            check_file("stops", &d.stops)?;
            check_file("buildings", &d.buildings)?;
            d.params.validate()?;
        }
        if self.pipelines.contains(&Pipeline::Upgrade) {
            let u = &self.upgrade;
            if u.fractions.is_empty() {
                bail!("upgrade fraction list is empty");
            }
            if u.fractions.iter().any(|r| !(0.0..=1.0).contains(r)) {
                bail!("upgrade fractions must lie in [0, 1]");
            }
            for &v in &self.speeds_kmh {
                SpeedProfile::two_tier(v, u.upgraded_kmh).validate()?;
            }
        }
        if self.stats.connection_limits_h.iter().any(|h| !(*h >= 0.0)) {
            bail!("connection limits must be non-negative");
        }
        self.cost.validate()?;
        Ok(())
    }

    pub fn sim_params(&self, speed_kmh: f64) -> SimParams {
        SimParams {
            t_b: self.sim.t_b,
            t_w: self.sim.t_w,
            d_walk: self.sim.d_walk,
            walk_speed_kmh: self.sim.walk_speed_kmh,
            t_la: 0.0,
            seed: self.seed,
            profile: SpeedProfile::uniform(speed_kmh),
        }
    }

    pub fn lookahead_params(&self, speed_kmh: f64) -> SimParams {
        SimParams {
            t_b: self.lookahead.t_b,
            t_la: self.lookahead.t_la,
            ..self.sim_params(speed_kmh)
        }
    }

    /// Copy with the output directory and worker count cleared.
    pub fn canonical(&self) -> Self {
        Self {
            out: PathBuf::new(),
            jobs: 0,
            ..self.clone()
        }
    }

    /// Hash of every setting that affects results. The output directory and
    /// the worker count are excluded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(&self.canonical()).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(&digest[..8])
    }
}
