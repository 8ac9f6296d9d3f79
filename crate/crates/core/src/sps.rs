//! Semi-persistent scheduling: sensing history, weighted power averaging,
//! candidate exclusion (stage 2), ranked random selection (stage 3),
//! reservation lifetimes and the greedy/random baseline policies.

use std::collections::VecDeque;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{dbm_to_mw, SensedPowerGrid, SATURATED};
use crate::error::{Error, Result};
use crate::grid::{GridConfig, SubchannelId};

/// Windows of sensing kept for averaging.
pub const HISTORY_WINDOWS: usize = 10;

pub fn default_t_sps_set() -> Vec<u32> {
    (5..=15).map(|i| i * 100).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Sensing-based exclusion then random pick among the best ranked.
    #[default]
    Standard,
    /// Lowest averaged RSSI, ties by flat index.
    Greedy,
    /// Uniform over every subchannel outside the vehicle's own transmit
    /// subframes.
    Random,
}

impl Policy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Policy::Standard => "standard",
            Policy::Greedy => "greedy",
            Policy::Random => "random",
        }
    }
}

impl std::str::FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "standard" => Ok(Policy::Standard),
            "greedy" => Ok(Policy::Greedy),
            "random" => Ok(Policy::Random),
            other => Err(format!("unknown policy `{other}` (expected standard, greedy or random)")),
        }
    }
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpsPolicyConfig {
    /// Exponential weight in (0, 1]; 1 gives the plain linear average.
    /// Values below 0.4 are accepted but tend to hurt reception.
    pub alpha: f64,
    pub p_keep: f64,
    pub rsrp_threshold_dbm: f64,
    pub threshold_step_db: f64,
    pub candidate_floor_fraction: f64,
    /// Size of the stage-3 pool as a fraction of `|S|` (`0.2 * 100F = 20F`).
    pub selection_pool_fraction: f64,
    pub t_sps_set_ms: Vec<u32>,
    pub policy: Policy,
}

impl Default for SpsPolicyConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            p_keep: 0.0,
            rsrp_threshold_dbm: -128.0,
            threshold_step_db: 3.0,
            candidate_floor_fraction: 0.2,
            selection_pool_fraction: 0.2,
            t_sps_set_ms: default_t_sps_set(),
            policy: Policy::Standard,
        }
    }
}

fn fraction_of(fraction: f64, n: usize) -> usize {
    // fractions like 0.07 * 100 land just above the integer
    ((fraction * n as f64 - 1e-9).ceil().max(1.0) as usize).min(n)
}

impl SpsPolicyConfig {
    pub fn validate(&self, grid: &GridConfig) -> Result<()> {
        validate_alpha(self.alpha)?;
        if !(0.0..1.0).contains(&self.p_keep) {
            return Err(Error::config("p_keep", format!("must be in [0, 1), got {}", self.p_keep)));
        }
        if !self.rsrp_threshold_dbm.is_finite() {
            return Err(Error::config("gamma_rsrp_dbm", "must be finite"));
        }
        if !(self.threshold_step_db > 0.0) || !self.threshold_step_db.is_finite() {
            return Err(Error::config("threshold_step_db", "must be positive"));
        }
        for (key, v) in [
            ("candidate_floor_fraction", self.candidate_floor_fraction),
            ("selection_pool_fraction", self.selection_pool_fraction),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::config(key, format!("must be in (0, 1], got {v}")));
            }
        }
        if self.t_sps_set_ms.is_empty() {
            return Err(Error::config("t_sps_set", "must not be empty"));
        }
        if let Some(bad) = self
            .t_sps_set_ms
            .iter()
            .find(|&&t| t == 0 || t % grid.window_ms != 0)
        {
            return Err(Error::config(
                "t_sps_set",
                format!("{bad} ms is not a positive multiple of the {} ms window", grid.window_ms),
            ));
        }
        Ok(())
    }

    /// Minimum stage-2 candidate count, `ceil(0.2 |S|)` by default.
    pub fn candidate_floor(&self, grid: &GridConfig) -> usize {
        fraction_of(self.candidate_floor_fraction, grid.total_subchannels())
    }

    /// Stage-3 pool size, `20F` by default.
    pub fn pool_size(&self, grid: &GridConfig) -> usize {
        fraction_of(self.selection_pool_fraction, grid.total_subchannels())
    }
}

pub fn validate_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::config("alpha", format!("must be in (0, 1], got {alpha}")))
    }
}

/// Normalized weights `alpha^l / sum(alpha^l)` for `l = 1..=n`.
fn weights(alpha: f64, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (1..=n as i32).map(|l| alpha.powi(l)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Exponentially weighted average of samples ordered most recent first.
///
/// Sample `l` (1-based) gets weight `alpha^l`. With `alpha = 1` this is
/// the arithmetic mean. Any [`SATURATED`] sample makes the result
/// saturated.
pub fn weighted_average(samples: &[f64], alpha: f64) -> Result<f64> {
    validate_alpha(alpha)?;
    if samples.is_empty() {
        return Err(Error::domain("sample count", ">= 1", 0.0));
    }
    if samples.contains(&SATURATED) {
        return Ok(SATURATED);
    }
    if alpha == 1.0 {
        return Ok(samples.iter().sum::<f64>() / samples.len() as f64);
    }
    Ok(weights(alpha, samples.len())
        .iter()
        .zip(samples)
        .map(|(w, x)| w * x)
        .sum())
}

/// Ring of the most recent per-window sensing snapshots, newest first.
///
/// Transmit power is spread evenly across a subchannel, so the RSRP and
/// RSSI readings of a snapshot coincide; both accessors read the same grid.
#[derive(Debug, Clone, Default)]
pub struct SensingHistory {
    snapshots: VecDeque<SensedPowerGrid>,
}

impl SensingHistory {
    pub fn new() -> Self {
        Self {
            snapshots: VecDeque::with_capacity(HISTORY_WINDOWS),
        }
    }

    pub fn push(&mut self, snapshot: SensedPowerGrid) {
        if self.snapshots.len() == HISTORY_WINDOWS {
            self.snapshots.pop_back();
        }
        self.snapshots.push_front(snapshot);
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.snapshots.len() == HISTORY_WINDOWS
    }

    /// PSSCH-RSRP snapshot of window `n - l`, `l` in `1..=len`.
    pub fn rsrp(&self, l: usize) -> Option<&SensedPowerGrid> {
        l.checked_sub(1).and_then(|i| self.snapshots.get(i))
    }

    /// RSSI snapshot of window `n - l`.
    pub fn rssi(&self, l: usize) -> Option<&SensedPowerGrid> {
        self.rsrp(l)
    }

    pub fn iter(&self) -> impl Iterator<Item = &SensedPowerGrid> {
        self.snapshots.iter()
    }
}

/// Averaged RSRP and RSSI grids.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedGrids {
    pub rsrp: SensedPowerGrid,
    pub rssi: SensedPowerGrid,
}

/// Element-wise [`weighted_average`] over every snapshot in the history.
pub fn average_grids(history: &SensingHistory, alpha: f64, grid: &GridConfig) -> Result<AveragedGrids> {
    validate_alpha(alpha)?;
    if history.is_empty() {
        return Err(Error::domain("history length", ">= 1 window", 0.0));
    }
    let w = weights(alpha, history.len());
    let linear = alpha == 1.0;
    let n = history.len() as f64;
    let mut out = SensedPowerGrid::filled(grid, 0.0);
    let mut saturated = vec![false; grid.total_subchannels()];
    for (snap, wl) in history.iter().zip(&w) {
        for ((acc, sat), &x) in out.values_mut().iter_mut().zip(saturated.iter_mut()).zip(snap.values()) {
            if x == SATURATED {
                *sat = true;
            } else if linear {
                *acc += x;
            } else {
                *acc += wl * x;
            }
        }
    }
    for (acc, sat) in out.values_mut().iter_mut().zip(&saturated) {
        if *sat {
            *acc = SATURATED;
        } else if linear {
            *acc /= n;
        }
    }
    Ok(AveragedGrids {
        rssi: out.clone(),
        rsrp: out,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage2Outcome {
    /// Candidates in flat-index order.
    pub candidates: Vec<SubchannelId>,
    /// Threshold at which the floor was met.
    pub threshold_dbm: f64,
    pub relaxations: u32,
}

/// Keeps subchannels whose averaged RSRP is below the threshold, raising
/// the threshold by one step until at least the candidate floor qualifies.
/// Saturated subchannels never qualify; if fewer finite subchannels exist
/// than the floor, all of them are returned.
pub fn stage2_candidates(avg_rsrp: &SensedPowerGrid, cfg: &SpsPolicyConfig, grid: &GridConfig) -> Stage2Outcome {
    let floor = cfg.candidate_floor(grid);
    let finite = avg_rsrp.values().iter().filter(|v| v.is_finite()).count();
    let target = floor.min(finite);
    let mut threshold_dbm = cfg.rsrp_threshold_dbm;
    let mut relaxations = 0;
    loop {
        let limit = dbm_to_mw(threshold_dbm);
        let count = avg_rsrp.values().iter().filter(|&&v| v < limit).count();
        if count >= target {
            let candidates = grid
                .subchannels()
                .zip(avg_rsrp.values())
                .filter(|(_, &v)| v < limit)
                .map(|(id, _)| id)
                .collect();
            return Stage2Outcome {
                candidates,
                threshold_dbm,
                relaxations,
            };
        }
        threshold_dbm += cfg.threshold_step_db;
        relaxations += 1;
    }
}

fn rank_key(avg_rssi: &SensedPowerGrid, grid: &GridConfig, id: SubchannelId) -> (f64, usize) {
    (avg_rssi.get(id.f, id.k), grid.linear_index(id).unwrap_or(usize::MAX))
}

/// Candidates sorted by ascending averaged RSSI (ties by flat index),
/// truncated to the pool size.
pub fn stage3_pool(
    candidates: &[SubchannelId],
    avg_rssi: &SensedPowerGrid,
    cfg: &SpsPolicyConfig,
    grid: &GridConfig,
) -> Vec<SubchannelId> {
    let mut ranked: Vec<(f64, usize, SubchannelId)> = candidates
        .iter()
        .map(|&id| {
            let (v, i) = rank_key(avg_rssi, grid, id);
            (v, i, id)
        })
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    ranked.truncate(cfg.pool_size(grid));
    ranked.into_iter().map(|(_, _, id)| id).collect()
}

pub fn stage3_select<R: Rng + ?Sized>(
    candidates: &[SubchannelId],
    avg_rssi: &SensedPowerGrid,
    cfg: &SpsPolicyConfig,
    grid: &GridConfig,
    rng: &mut R,
) -> Result<SubchannelId> {
    stage3_pool(candidates, avg_rssi, cfg, grid)
        .choose(rng)
        .copied()
        .ok_or(Error::NoCandidates)
}

pub fn baseline_select<R: Rng + ?Sized>(
    policy: Policy,
    avg_rssi: &SensedPowerGrid,
    grid: &GridConfig,
    rng: &mut R,
) -> Result<SubchannelId> {
    let open = grid.subchannels().zip(avg_rssi.values()).filter(|(_, v)| v.is_finite());
    match policy {
        Policy::Random => {
            let open: Vec<SubchannelId> = open.map(|(id, _)| id).collect();
            open.choose(rng).copied().ok_or(Error::NoCandidates)
        }
        // `min_by` keeps the first of equal elements, i.e. the lowest index.
        Policy::Greedy => open
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(id, _)| id)
            .ok_or(Error::NoCandidates),
        Policy::Standard => Err(Error::config("policy", "standard is not a baseline policy")),
    }
}

pub fn draw_tsps<R: Rng + ?Sized>(set_ms: &[u32], rng: &mut R) -> u32 {
    *set_ms.choose(rng).expect("validated non-empty T_SPS set")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reservation {
    pub subchannel: SubchannelId,
    /// Transmissions left on this grant, counting the current window.
    pub windows_remaining: u32,
    pub t_sps_ms: u32,
}

impl Reservation {
    pub fn new(subchannel: SubchannelId, t_sps_ms: u32, window_ms: u32) -> Self {
        Self {
            subchannel,
            windows_remaining: t_sps_ms / window_ms,
            t_sps_ms,
        }
    }

    pub fn expired(&self) -> bool {
        self.windows_remaining == 0
    }
}

/// Outcome of one expiry, with enough detail to audit the decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Reselection {
    pub reservation: Reservation,
    pub kept: bool,
    /// Present for the standard policy when a new subchannel was chosen.
    pub stage2: Option<Stage2Outcome>,
    pub pool: Option<Vec<SubchannelId>>,
}

/// Handles an expired reservation: keep it with probability `p_keep`,
/// otherwise choose afresh from the averaged history. A new `T_SPS` is
/// drawn either way.
pub fn maybe_reselect<R: Rng + ?Sized>(
    current: &Reservation,
    history: &SensingHistory,
    cfg: &SpsPolicyConfig,
    grid: &GridConfig,
    rng: &mut R,
) -> Result<Reselection> {
    let u: f64 = rng.random();
    if u < cfg.p_keep {
        let t = draw_tsps(&cfg.t_sps_set_ms, rng);
        return Ok(Reselection {
            reservation: Reservation::new(current.subchannel, t, grid.window_ms),
            kept: true,
            stage2: None,
            pool: None,
        });
    }
    let avg = average_grids(history, cfg.alpha, grid)?;
    let (subchannel, stage2, pool) = match cfg.policy {
        Policy::Standard => {
            let s2 = stage2_candidates(&avg.rsrp, cfg, grid);
            let pool = stage3_pool(&s2.candidates, &avg.rssi, cfg, grid);
            let chosen = *pool.choose(rng).ok_or(Error::NoCandidates)?;
            (chosen, Some(s2), Some(pool))
        }
        baseline => (baseline_select(baseline, &avg.rssi, grid, rng)?, None, None),
    };
    let t = draw_tsps(&cfg.t_sps_set_ms, rng);
    Ok(Reselection {
        reservation: Reservation::new(subchannel, t, grid.window_ms),
        kept: false,
        stage2,
        pool,
    })
}
