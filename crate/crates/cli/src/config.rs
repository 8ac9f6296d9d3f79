//! Flat key/value config files.
//!
//! Every key is optional and falls back to the reference parameter set.
//! Keys mirror the field names of the core config types, so validation
//! messages name the key to fix.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sidelink_core::channel::{dbm_to_mw, PathlossModel};
use sidelink_core::{FreewayConfig, Policy, Scenario, SimConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Invalid {
        path: PathBuf,
        #[source]
        source: sidelink_core::Error,
    },
    #[error("{0}")]
    Unrepresentable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Freeway,
    Trace,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    // resource grid
    pub sub_bands: Option<u32>,
    pub subframes: Option<u32>,
    pub rbs_per_subchannel: Option<u32>,
    pub window_ms: Option<u32>,

    // channel
    pub carrier_frequency_hz: Option<f64>,
    pub tx_power_per_rb_mw: Option<f64>,
    pub antenna_gain_tx_db: Option<f64>,
    pub antenna_gain_rx_db: Option<f64>,
    pub shadow_sigma_db: Option<f64>,
    pub shadow_corr_distance_m: Option<f64>,
    pub noise_floor_per_rb_mw: Option<f64>,
    pub noise_floor_dbm: Option<f64>,
    pub ibe_vector: Option<Vec<f64>>,
    pub antenna_height_tx_m: Option<f64>,
    pub antenna_height_rx_m: Option<f64>,
    pub pathloss: Option<PathlossModel>,

    // decoding
    pub rho: Option<f64>,
    pub lambda: Option<f64>,
    pub cam_size_bytes: Option<u32>,

    // scheduling
    pub alpha: Option<f64>,
    pub p_keep: Option<f64>,
    pub gamma_rsrp_dbm: Option<f64>,
    pub threshold_step_db: Option<f64>,
    pub candidate_floor_fraction: Option<f64>,
    pub selection_pool_fraction: Option<f64>,
    pub t_sps_set: Option<Vec<u32>>,
    pub policy: Option<Policy>,

    // scenario
    pub scenario: Option<ScenarioKind>,
    pub trace_path: Option<PathBuf>,
    pub lanes_per_direction: Option<u32>,
    pub lane_width_m: Option<f64>,
    pub median_width_m: Option<f64>,
    pub road_length_m: Option<f64>,
    pub density_per_km: Option<f64>,
    pub speed_min_kmh: Option<f64>,
    pub speed_max_kmh: Option<f64>,
    pub wraparound: Option<bool>,

    // run
    pub duration_ms: Option<u64>,
    pub warmup_ms: Option<u64>,
    pub seed: Option<u64>,
    pub awareness_distances_m: Option<Vec<f64>>,
}

impl ConfigFile {
    /// Resolves against the defaults. Relative trace paths are taken
    /// relative to `base_dir`.
    pub fn into_sim_config(self, base_dir: &Path) -> Result<SimConfig, String> {
        let mut c = SimConfig::default();
        macro_rules! set {
            ($($src:ident => $($dst:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$src { c.$($dst).+ = v; })*
            };
        }
        set! {
            sub_bands => grid.sub_bands,
            subframes => grid.subframes,
            rbs_per_subchannel => grid.rbs_per_subchannel,
            carrier_frequency_hz => channel.carrier_frequency_hz,
            tx_power_per_rb_mw => channel.tx_power_per_rb_mw,
            antenna_gain_tx_db => channel.antenna_gain_tx_db,
            antenna_gain_rx_db => channel.antenna_gain_rx_db,
            shadow_sigma_db => channel.shadow_sigma_db,
            shadow_corr_distance_m => channel.shadow_corr_distance_m,
            antenna_height_tx_m => channel.antenna_height_tx_m,
            antenna_height_rx_m => channel.antenna_height_rx_m,
            pathloss => channel.pathloss,
            rho => rho,
            lambda => lambda,
            cam_size_bytes => cam_size_bytes,
            alpha => sps.alpha,
            p_keep => sps.p_keep,
            gamma_rsrp_dbm => sps.rsrp_threshold_dbm,
            threshold_step_db => sps.threshold_step_db,
            candidate_floor_fraction => sps.candidate_floor_fraction,
            selection_pool_fraction => sps.selection_pool_fraction,
            t_sps_set => sps.t_sps_set_ms,
            policy => sps.policy,
            duration_ms => duration_ms,
            warmup_ms => warmup_ms,
            seed => seed,
            awareness_distances_m => awareness_distances_m,
        }
        // window length follows the subframe count unless given explicitly
        c.grid.window_ms = self.window_ms.unwrap_or(c.grid.subframes);
        match (self.noise_floor_per_rb_mw, self.noise_floor_dbm) {
            (Some(_), Some(_)) => return Err("set only one of `noise_floor_per_rb_mw` and `noise_floor_dbm`".into()),
            (Some(mw), None) => c.channel.noise_floor_per_rb_mw = mw,
            (None, Some(dbm)) => c.channel.noise_floor_per_rb_mw = dbm_to_mw(dbm),
            (None, None) => {}
        }
        match self.ibe_vector {
            Some(v) => c.channel.ibe_vector = v,
            None if c.grid.sub_bands != 3 => {
                if let Some(v) = sidelink_core::ChannelConfig::reference_ibe_vector(c.grid.sub_bands) {
                    c.channel.ibe_vector = v;
                }
            }
            None => {}
        }
        let freeway_keys = self.lanes_per_direction.is_some()
            || self.lane_width_m.is_some()
            || self.median_width_m.is_some()
            || self.road_length_m.is_some()
            || self.density_per_km.is_some()
            || self.speed_min_kmh.is_some()
            || self.speed_max_kmh.is_some()
            || self.wraparound.is_some();
        let kind = self.scenario.unwrap_or(if self.trace_path.is_some() {
            ScenarioKind::Trace
        } else {
            ScenarioKind::Freeway
        });
        c.scenario = match kind {
            ScenarioKind::Freeway => {
                if self.trace_path.is_some() {
                    return Err("`trace_path` requires scenario = \"trace\"".into());
                }
                let d = FreewayConfig::default();
                Scenario::Freeway(FreewayConfig {
                    lanes_per_direction: self.lanes_per_direction.unwrap_or(d.lanes_per_direction),
                    lane_width_m: self.lane_width_m.unwrap_or(d.lane_width_m),
                    median_width_m: self.median_width_m.unwrap_or(d.median_width_m),
                    road_length_m: self.road_length_m.unwrap_or(d.road_length_m),
                    density_per_km: self.density_per_km.unwrap_or(d.density_per_km),
                    speed_min_kmh: self.speed_min_kmh.unwrap_or(d.speed_min_kmh),
                    speed_max_kmh: self.speed_max_kmh.unwrap_or(d.speed_max_kmh),
                    wraparound: self.wraparound.unwrap_or(d.wraparound),
                })
            }
            ScenarioKind::Trace => {
                if freeway_keys {
                    return Err("freeway keys are not allowed with scenario = \"trace\"".into());
                }
                let path = self
                    .trace_path
                    .ok_or("scenario = \"trace\" requires `trace_path`")?;
                Scenario::Trace {
                    path: if path.is_relative() { base_dir.join(path) } else { path },
                }
            }
        };
        Ok(c)
    }

    /// Every key spelled out, for echoing a resolved config.
    pub fn from_sim_config(c: &SimConfig) -> Result<Self, ConfigError> {
        let mut f = ConfigFile {
            sub_bands: Some(c.grid.sub_bands),
            subframes: Some(c.grid.subframes),
            rbs_per_subchannel: Some(c.grid.rbs_per_subchannel),
            window_ms: Some(c.grid.window_ms),
            carrier_frequency_hz: Some(c.channel.carrier_frequency_hz),
            tx_power_per_rb_mw: Some(c.channel.tx_power_per_rb_mw),
            antenna_gain_tx_db: Some(c.channel.antenna_gain_tx_db),
            antenna_gain_rx_db: Some(c.channel.antenna_gain_rx_db),
            shadow_sigma_db: Some(c.channel.shadow_sigma_db),
            shadow_corr_distance_m: Some(c.channel.shadow_corr_distance_m),
            noise_floor_per_rb_mw: Some(c.channel.noise_floor_per_rb_mw),
            noise_floor_dbm: None,
            ibe_vector: Some(c.channel.ibe_vector.clone()),
            antenna_height_tx_m: Some(c.channel.antenna_height_tx_m),
            antenna_height_rx_m: Some(c.channel.antenna_height_rx_m),
            pathloss: Some(c.channel.pathloss),
            rho: Some(c.rho),
            lambda: Some(c.lambda),
            cam_size_bytes: Some(c.cam_size_bytes),
            alpha: Some(c.sps.alpha),
            p_keep: Some(c.sps.p_keep),
            gamma_rsrp_dbm: Some(c.sps.rsrp_threshold_dbm),
            threshold_step_db: Some(c.sps.threshold_step_db),
            candidate_floor_fraction: Some(c.sps.candidate_floor_fraction),
            selection_pool_fraction: Some(c.sps.selection_pool_fraction),
            t_sps_set: Some(c.sps.t_sps_set_ms.clone()),
            policy: Some(c.sps.policy),
            duration_ms: Some(c.duration_ms),
            warmup_ms: Some(c.warmup_ms),
            seed: Some(c.seed),
            awareness_distances_m: Some(c.awareness_distances_m.clone()),
            ..ConfigFile::default()
        };
        match &c.scenario {
            Scenario::Freeway(w) => {
                f.scenario = Some(ScenarioKind::Freeway);
                f.lanes_per_direction = Some(w.lanes_per_direction);
                f.lane_width_m = Some(w.lane_width_m);
                f.median_width_m = Some(w.median_width_m);
                f.road_length_m = Some(w.road_length_m);
                f.density_per_km = Some(w.density_per_km);
                f.speed_min_kmh = Some(w.speed_min_kmh);
                f.speed_max_kmh = Some(w.speed_max_kmh);
                f.wraparound = Some(w.wraparound);
            }
            Scenario::Trace { path } => {
                f.scenario = Some(ScenarioKind::Trace);
                f.trace_path = Some(path.clone());
            }
            Scenario::Fixed { .. } => {
                return Err(ConfigError::Unrepresentable(
                    "fixed-vehicle scenarios have no config-file form".into(),
                ))
            }
        }
        Ok(f)
    }
}

pub fn parse_config_str(text: &str, path: &Path) -> Result<SimConfig, ConfigError> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let cfg = file.into_sim_config(base).map_err(|message| ConfigError::Parse {
        path: path.to_path_buf(),
        message,
    })?;
    cfg.validate().map_err(|source| ConfigError::Invalid {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(cfg)
}

/// Reads, resolves and validates a config file.
pub fn parse_config(path: &Path) -> Result<SimConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text, path)
}

pub fn echo_config(cfg: &SimConfig) -> Result<String, ConfigError> {
    let file = ConfigFile::from_sim_config(cfg)?;
    toml::to_string(&file).map_err(|e| ConfigError::Unrepresentable(e.to_string()))
}
