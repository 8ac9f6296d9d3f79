//! Link-level channel model: pathloss, correlated shadowing, in-band
//! emission leakage, per-RB received power, sensing and SINR.
//!
//! All powers are linear mW per resource block unless a name says `_db`
//! or `_dbm`. Transmit power is uniform across the RBs of a subchannel, so
//! per-RB ratios equal per-subchannel ratios.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridConfig;
use crate::mobility::{Metric, Position};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Marker for a subframe the receiver could not monitor because it was
/// transmitting.
pub const SATURATED: f64 = f64::INFINITY;

/// Below this separation the B1 model is evaluated at this distance.
pub const B1_MIN_DISTANCE_M: f64 = 3.0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    db_to_linear(dbm)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    linear_to_db(mw)
}

/// Thermal noise per RB: -174 dBm/Hz over 180 kHz plus a 9 dB noise figure.
pub fn default_noise_floor_dbm() -> f64 {
    -174.0 + 10.0 * 180e3f64.log10() + 9.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathlossModel {
    /// `max(free space, WINNER+ B1 LOS)`.
    #[default]
    Effective,
    FreeSpace,
    WinnerB1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub carrier_frequency_hz: f64,
    /// `P_T`, mW per RB.
    pub tx_power_per_rb_mw: f64,
    pub antenna_gain_tx_db: f64,
    pub antenna_gain_rx_db: f64,
    pub shadow_sigma_db: f64,
    pub shadow_corr_distance_m: f64,
    /// `P_sigma`, mW per RB.
    pub noise_floor_per_rb_mw: f64,
    /// Linear leakage factor by sub-band offset; element 0 is the same
    /// sub-band and must be exactly 1.
    pub ibe_vector: Vec<f64>,
    pub antenna_height_tx_m: f64,
    pub antenna_height_rx_m: f64,
    pub pathloss: PathlossModel,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            carrier_frequency_hz: 5.9e9,
            tx_power_per_rb_mw: 6.67,
            antenna_gain_tx_db: 3.0,
            antenna_gain_rx_db: 3.0,
            shadow_sigma_db: 7.0,
            shadow_corr_distance_m: 10.0,
            noise_floor_per_rb_mw: dbm_to_mw(default_noise_floor_dbm()),
            ibe_vector: vec![1.0, 0.0047, 0.0015],
            antenna_height_tx_m: 1.5,
            antenna_height_rx_m: 1.5,
            pathloss: PathlossModel::Effective,
        }
    }
}

fn finite(key: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be finite, got {v}")))
    }
}

impl ChannelConfig {
    /// The leakage vector from the reference configuration for `F` sub-bands
    /// (3 or 4 entries).
    pub fn reference_ibe_vector(sub_bands: u32) -> Option<Vec<f64>> {
        match sub_bands {
            1 => Some(vec![1.0]),
            2 => Some(vec![1.0, 0.0047]),
            3 => Some(vec![1.0, 0.0047, 0.0015]),
            4 => Some(vec![1.0, 0.0047, 0.0015, 0.0005]),
            _ => None,
        }
    }

    pub fn validate(&self, grid: &GridConfig) -> Result<()> {
        for (key, v) in [
            ("carrier_frequency_hz", self.carrier_frequency_hz),
            ("tx_power_per_rb_mw", self.tx_power_per_rb_mw),
            ("antenna_gain_tx_db", self.antenna_gain_tx_db),
            ("antenna_gain_rx_db", self.antenna_gain_rx_db),
            ("shadow_sigma_db", self.shadow_sigma_db),
            ("shadow_corr_distance_m", self.shadow_corr_distance_m),
            ("noise_floor_per_rb_mw", self.noise_floor_per_rb_mw),
            ("antenna_height_tx_m", self.antenna_height_tx_m),
            ("antenna_height_rx_m", self.antenna_height_rx_m),
        ] {
            finite(key, v)?;
        }
        if self.carrier_frequency_hz <= 0.0 {
            return Err(Error::config("carrier_frequency_hz", "must be positive"));
        }
        if self.tx_power_per_rb_mw <= 0.0 {
            return Err(Error::config("tx_power_per_rb_mw", "must be positive"));
        }
        if self.noise_floor_per_rb_mw <= 0.0 {
            return Err(Error::config("noise_floor_per_rb_mw", "must be positive"));
        }
        if self.shadow_sigma_db < 0.0 {
            return Err(Error::config("shadow_sigma_db", "must be >= 0"));
        }
        if self.shadow_corr_distance_m <= 0.0 {
            return Err(Error::config("shadow_corr_distance_m", "must be positive"));
        }
        if self.antenna_height_tx_m <= 1.0 || self.antenna_height_rx_m <= 1.0 {
            return Err(Error::config(
                "antenna_height_m",
                "must exceed 1 m (the B1 model uses effective heights h - 1)",
            ));
        }
        let ibe = &self.ibe_vector;
        if ibe.first() != Some(&1.0) {
            return Err(Error::config("ibe_vector", "first element must be exactly 1"));
        }
        if ibe.len() < grid.sub_bands as usize {
            return Err(Error::config(
                "ibe_vector",
                format!(
                    "needs at least {} entries for {} sub-bands, got {}",
                    grid.sub_bands,
                    grid.sub_bands,
                    ibe.len()
                ),
            ));
        }
        if ibe.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::config("ibe_vector", "entries must be finite and >= 0"));
        }
        if ibe.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::config("ibe_vector", "must be non-increasing"));
        }
        Ok(())
    }

    pub fn gain_linear(&self) -> f64 {
        db_to_linear(self.antenna_gain_tx_db + self.antenna_gain_rx_db)
    }

    pub fn pathloss_db(&self, distance_m: f64) -> Result<f64> {
        let fc = self.carrier_frequency_hz;
        match self.pathloss {
            PathlossModel::Effective => {
                effective_pathloss_db(distance_m, fc, self.antenna_height_tx_m, self.antenna_height_rx_m)
            }
            PathlossModel::FreeSpace => free_space_pathloss_db(distance_m, fc),
            PathlossModel::WinnerB1 => {
                winner_b1_pathloss_db(distance_m, fc, self.antenna_height_tx_m, self.antenna_height_rx_m)
            }
        }
    }

    /// Leakage from an interferer in sub-band `p` into sensed sub-band `f`.
    pub fn ibe_factor(&self, p: u32, f: u32) -> Result<f64> {
        if p == 0 || f == 0 {
            return Err(Error::domain("sub-band index", ">= 1", p.min(f) as f64));
        }
        let offset = p.abs_diff(f) as usize;
        self.ibe_vector
            .get(offset)
            .copied()
            .ok_or_else(|| Error::config("ibe_vector", format!("no entry for sub-band offset {offset}")))
    }

    /// Per-RB received power `I * P_T * G_t G_r / (X * PL)` of one link.
    pub fn received_rb_power_mw(&self, pathloss_db: f64, shadow_db: f64, ibe_factor: f64) -> f64 {
        ibe_factor * self.tx_power_per_rb_mw * self.gain_linear() / (db_to_linear(shadow_db) * db_to_linear(pathloss_db))
    }
}

pub fn free_space_pathloss_db(distance_m: f64, fc_hz: f64) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(Error::domain("distance", "> 0 m", distance_m));
    }
    Ok(20.0 * distance_m.log10() + 20.0 * fc_hz.log10() + 20.0 * (4.0 * std::f64::consts::PI / SPEED_OF_LIGHT).log10())
}

/// Breakpoint distance of the B1 LOS model, using effective heights `h - 1`.
pub fn winner_b1_breakpoint_m(fc_hz: f64, h_tx: f64, h_rx: f64) -> f64 {
    4.0 * (h_tx - 1.0) * (h_rx - 1.0) * fc_hz / SPEED_OF_LIGHT
}

/// WINNER+ B1 (urban micro, LOS) pathloss, two-slope with breakpoint.
///
/// Below the breakpoint: `22.7 log10(d) + 41.0 + 20 log10(fc_GHz / 5)`.
/// Above it: `40 log10(d) + 9.45 - 17.3 log10(h'_tx) - 17.3 log10(h'_rx)
/// + 2.7 log10(fc_GHz / 5)`, with `h' = h - 1`. Distances under 3 m are
/// evaluated at 3 m.
pub fn winner_b1_pathloss_db(distance_m: f64, fc_hz: f64, h_tx: f64, h_rx: f64) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(Error::domain("distance", "> 0 m", distance_m));
    }
    let d = distance_m.max(B1_MIN_DISTANCE_M);
    let fc_ghz = fc_hz / 1e9;
    let (he_tx, he_rx) = (h_tx - 1.0, h_rx - 1.0);
    if d < winner_b1_breakpoint_m(fc_hz, h_tx, h_rx) {
        Ok(22.7 * d.log10() + 41.0 + 20.0 * (fc_ghz / 5.0).log10())
    } else {
        Ok(40.0 * d.log10() + 9.45 - 17.3 * he_tx.log10() - 17.3 * he_rx.log10() + 2.7 * (fc_ghz / 5.0).log10())
    }
}

pub fn effective_pathloss_db(distance_m: f64, fc_hz: f64, h_tx: f64, h_rx: f64) -> Result<f64> {
    let fs = free_space_pathloss_db(distance_m, fc_hz)?;
    let b1 = winner_b1_pathloss_db(distance_m, fc_hz, h_tx, h_rx)?;
    Ok(fs.max(b1))
}

/// `10 log10(2^(rho/lambda) - 1)` in dB.
pub fn decode_threshold_db(rho: f64, lambda: f64) -> Result<f64> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::domain("rho", "> 0 bps/Hz", rho));
    }
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::domain("lambda", "in (0, 1]", lambda));
    }
    Ok(linear_to_db(2f64.powf(rho / lambda) - 1.0))
}

/// Correlated log-normal shadowing of one (unordered) link.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkShadowState {
    pub last_value_db: f64,
    pub last_positions: Option<(Position, Position)>,
}

impl LinkShadowState {
    pub fn initialized(&self) -> bool {
        self.last_positions.is_some()
    }

    /// Draws the shadowing value for the link at its new endpoint
    /// positions. The first draw is `N(0, sigma^2)`; later draws follow a
    /// Gauss-Markov update with correlation `exp(-dd / d_corr)` where `dd`
    /// is the summed displacement of both endpoints.
    pub fn sample<R: Rng + ?Sized>(
        &mut self,
        a: Position,
        b: Position,
        metric: &Metric,
        sigma_db: f64,
        corr_distance_m: f64,
        rng: &mut R,
    ) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        let value = match self.last_positions {
            None => sigma_db * z,
            Some((pa, pb)) => {
                let moved = metric.distance(pa, a) + metric.distance(pb, b);
                let rho = (-moved / corr_distance_m).exp();
                rho * self.last_value_db + (1.0 - rho * rho).sqrt() * sigma_db * z
            }
        };
        self.last_value_db = value;
        self.last_positions = Some((a, b));
        value
    }
}

/// Per-RB sensed power over one window, laid out like
/// [`GridConfig::linear_index`]. Entries are [`SATURATED`] or at least the
/// noise floor.
#[derive(Debug, Clone, PartialEq)]
pub struct SensedPowerGrid {
    sub_bands: u32,
    subframes: u32,
    values: Vec<f64>,
}

impl SensedPowerGrid {
    pub fn filled(grid: &GridConfig, value: f64) -> Self {
        Self {
            sub_bands: grid.sub_bands,
            subframes: grid.subframes,
            values: vec![value; grid.total_subchannels()],
        }
    }

    pub fn from_values(grid: &GridConfig, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.total_subchannels() {
            return Err(Error::IndexOutOfRange {
                index: values.len(),
                len: grid.total_subchannels(),
            });
        }
        Ok(Self {
            sub_bands: grid.sub_bands,
            subframes: grid.subframes,
            values,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, f: u32, k: u32) -> f64 {
        self.values[self.offset(f, k)]
    }

    pub fn set(&mut self, f: u32, k: u32, v: f64) {
        let i = self.offset(f, k);
        self.values[i] = v;
    }

    /// Writes one subframe column (`F` values, sub-band order).
    pub fn set_subframe(&mut self, k: u32, column: &[f64]) {
        for (f, &v) in (1..=self.sub_bands).zip(column) {
            self.set(f, k, v);
        }
    }

    pub fn is_saturated(&self, f: u32, k: u32) -> bool {
        self.get(f, k) == SATURATED
    }

    fn offset(&self, f: u32, k: u32) -> usize {
        debug_assert!((1..=self.sub_bands).contains(&f) && (1..=self.subframes).contains(&k));
        (f as usize - 1) * self.subframes as usize + (k as usize - 1)
    }
}

/// One transmitter as seen by a given receiver: its sub-band and the
/// received per-RB power before IBE scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub sub_band: u32,
    pub power_mw: f64,
}

/// Sensed per-RB power in every sub-band of one subframe.
///
/// When the receiver transmitted in this subframe, every sub-band is
/// [`SATURATED`]. Otherwise each entry is the noise floor plus all
/// arrivals scaled by their IBE factor. `out` must hold `F` entries.
pub fn sense_subframe(
    cfg: &ChannelConfig,
    receiver_transmitted: bool,
    arrivals: &[Arrival],
    out: &mut [f64],
) -> Result<()> {
    if receiver_transmitted {
        out.fill(SATURATED);
        return Ok(());
    }
    for (i, slot) in out.iter_mut().enumerate() {
        let f = i as u32 + 1;
        let mut total = cfg.noise_floor_per_rb_mw;
        for a in arrivals {
            total += cfg.ibe_factor(a.sub_band, f)? * a.power_mw;
        }
        *slot = total;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinrBreakdown {
    pub signal_mw: f64,
    pub cci_mw: f64,
    pub ibe_mw: f64,
    pub noise_mw: f64,
    pub sinr_db: f64,
}

impl SinrBreakdown {
    pub fn new(signal_mw: f64, cci_mw: f64, ibe_mw: f64, noise_mw: f64) -> Self {
        Self {
            signal_mw,
            cci_mw,
            ibe_mw,
            noise_mw,
            sinr_db: linear_to_db(signal_mw / (cci_mw + ibe_mw + noise_mw)),
        }
    }

    pub fn snr_db(&self) -> f64 {
        linear_to_db(self.signal_mw / self.noise_mw)
    }

    pub fn sinr_cci_only_db(&self) -> f64 {
        linear_to_db(self.signal_mw / (self.noise_mw + self.cci_mw))
    }
}

/// SINR of a packet sent on sub-band `f` and received with per-RB power
/// `signal_mw`, against the other transmitters of the same subframe.
pub fn sinr(cfg: &ChannelConfig, f: u32, signal_mw: f64, others: &[Arrival]) -> Result<SinrBreakdown> {
    let mut cci = 0.0;
    let mut ibe = 0.0;
    for a in others {
        if a.sub_band == f {
            cci += a.power_mw;
        } else {
            ibe += cfg.ibe_factor(a.sub_band, f)? * a.power_mw;
        }
    }
    Ok(SinrBreakdown::new(signal_mw, cci, ibe, cfg.noise_floor_per_rb_mw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const FC: f64 = 5.9e9;

    // Reference values computed independently from the closed forms.
    const FSPL_100M_DB: f64 = 87.864_823_454_726_26;
    const B1_50M_DB: f64 = 88.018_519_443_141_06;
    const B1_300M_DB: f64 = 119.144_569_458_481_68;
    const FSPL_300M_DB: f64 = 97.407_248_549_119_52;

    #[test]
    fn free_space_reference_point() {
        assert!((free_space_pathloss_db(100.0, FC).unwrap() - FSPL_100M_DB).abs() < 1e-9);
    }

    #[test]
    fn free_space_doubling_adds_6db() {
        let a = free_space_pathloss_db(37.0, FC).unwrap();
        let b = free_space_pathloss_db(74.0, FC).unwrap();
        assert!((b - a - 20.0 * 2f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn free_space_root() {
        let d = SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * FC);
        assert!(free_space_pathloss_db(d, FC).unwrap().abs() < 1e-9);
    }

    #[test]
    fn non_positive_distance_rejected() {
        assert!(free_space_pathloss_db(0.0, FC).is_err());
        assert!(free_space_pathloss_db(-1.0, FC).is_err());
        assert!(winner_b1_pathloss_db(0.0, FC, 1.5, 1.5).is_err());
        assert!(effective_pathloss_db(f64::NAN, FC, 1.5, 1.5).is_err());
    }

    #[test]
    fn b1_reference_and_continuity() {
        assert!((winner_b1_pathloss_db(50.0, FC, 1.5, 1.5).unwrap() - B1_50M_DB).abs() < 1e-9);
        let bp = winner_b1_breakpoint_m(FC, 1.5, 1.5);
        let below = winner_b1_pathloss_db(bp * (1.0 - 1e-12), FC, 1.5, 1.5).unwrap();
        let above = winner_b1_pathloss_db(bp, FC, 1.5, 1.5).unwrap();
        assert!((below - above).abs() < 0.1, "{below} vs {above}");
        assert!(winner_b1_pathloss_db(200.0, FC, 1.5, 1.5).unwrap() > winner_b1_pathloss_db(100.0, FC, 1.5, 1.5).unwrap());
    }

    #[test]
    fn b1_clamped_below_three_metres() {
        let at3 = winner_b1_pathloss_db(3.0, FC, 1.5, 1.5).unwrap();
        assert_eq!(winner_b1_pathloss_db(0.5, FC, 1.5, 1.5).unwrap(), at3);
    }

    #[test]
    fn effective_is_max_of_components() {
        // short range: free space dominates
        let fs = free_space_pathloss_db(3.0, FC).unwrap();
        assert_eq!(effective_pathloss_db(3.0, FC, 1.5, 1.5).unwrap(), fs);
        // long range: B1 upper branch
        let eff = effective_pathloss_db(300.0, FC, 1.5, 1.5).unwrap();
        assert!((eff - B1_300M_DB).abs() < 1e-9);
        assert!(B1_300M_DB > FSPL_300M_DB);
        for i in 1..2000 {
            let d = i as f64 * 0.5;
            let e = effective_pathloss_db(d, FC, 1.5, 1.5).unwrap();
            assert!(e >= free_space_pathloss_db(d, FC).unwrap());
            assert!(e >= winner_b1_pathloss_db(d, FC, 1.5, 1.5).unwrap());
        }
    }

    #[test]
    fn ibe_factor_lookup() {
        let c = ChannelConfig::default();
        assert_eq!(c.ibe_factor(2, 2).unwrap(), 1.0);
        assert_eq!(c.ibe_factor(1, 2).unwrap(), 0.0047);
        assert_eq!(c.ibe_factor(3, 2).unwrap(), 0.0047);
        assert_eq!(c.ibe_factor(1, 3).unwrap(), 0.0015);
        let c4 = ChannelConfig {
            ibe_vector: ChannelConfig::reference_ibe_vector(4).unwrap(),
            ..ChannelConfig::default()
        };
        assert_eq!(c4.ibe_factor(1, 4).unwrap(), 0.0005);
        assert!(c.ibe_factor(1, 4).is_err());
        for p in 1..=3 {
            for f in 1..=3 {
                assert_eq!(c.ibe_factor(p, f).unwrap(), c.ibe_factor(f, p).unwrap());
            }
        }
    }

    #[test]
    fn received_power_factors() {
        let c = ChannelConfig {
            antenna_gain_tx_db: 0.0,
            antenna_gain_rx_db: 0.0,
            ..ChannelConfig::default()
        };
        assert_eq!(c.received_rb_power_mw(0.0, 0.0, 1.0), c.tx_power_per_rb_mw);
        let same = c.received_rb_power_mw(90.0, 2.0, 1.0);
        let adj = c.received_rb_power_mw(90.0, 2.0, 0.0047);
        assert!((adj - same * 0.0047).abs() <= 1e-15 * same);
        let double = c.received_rb_power_mw(90.0 + linear_to_db(2.0), 2.0, 1.0);
        assert!((double - same / 2.0).abs() < 1e-12 * same);
    }

    #[test]
    fn decode_threshold_values() {
        assert!((decode_threshold_db(0.9402, 0.6).unwrap() - 2.9293).abs() < 1e-3);
        assert!(decode_threshold_db(0.6, 0.6).unwrap().abs() < 1e-12);
        assert!((decode_threshold_db(1.0, 0.5).unwrap() - 4.771_212_547_196_624).abs() < 1e-12);
        assert!(decode_threshold_db(0.0, 0.6).is_err());
        assert!(decode_threshold_db(1.0, 0.0).is_err());
        assert!(decode_threshold_db(1.0, 1.5).is_err());
    }

    #[test]
    fn sensing_half_duplex_and_empty() {
        let c = ChannelConfig::default();
        let mut out = [0.0; 3];
        sense_subframe(&c, true, &[Arrival { sub_band: 1, power_mw: 1.0 }], &mut out).unwrap();
        assert!(out.iter().all(|&v| v == SATURATED));
        sense_subframe(&c, false, &[], &mut out).unwrap();
        assert!(out.iter().all(|&v| v == c.noise_floor_per_rb_mw));
    }

    #[test]
    fn sensing_adjacent_band_scaling() {
        let c = ChannelConfig::default();
        let p = 3.0e-10;
        let mut out = [0.0; 3];
        sense_subframe(&c, false, &[Arrival { sub_band: 2, power_mw: p }], &mut out).unwrap();
        let n = c.noise_floor_per_rb_mw;
        assert_eq!(out[1], n + p);
        assert_eq!(out[0], n + 0.0047 * p);
        assert_eq!(out[2], n + 0.0047 * p);
        assert!(((out[0] - n) / (out[1] - n) - 0.0047).abs() < 1e-12);
    }

    #[test]
    fn sinr_identities() {
        let c = ChannelConfig::default();
        let n = c.noise_floor_per_rb_mw;
        assert!(sinr(&c, 1, n, &[]).unwrap().sinr_db.abs() < 1e-12);
        let s = 1e-6;
        let b = sinr(&c, 1, s, &[Arrival { sub_band: 1, power_mw: s }]).unwrap();
        assert!(b.sinr_db.abs() < 1e-4);
        let b = sinr(
            &c,
            2,
            s,
            &[
                Arrival { sub_band: 2, power_mw: s / 3.0 },
                Arrival { sub_band: 1, power_mw: s * 7.0 },
                Arrival { sub_band: 3, power_mw: s * 11.0 },
            ],
        )
        .unwrap();
        assert_eq!(b.cci_mw, s / 3.0);
        assert_eq!(b.ibe_mw, 0.0047 * s * 7.0 + 0.0047 * s * 11.0);
        assert_eq!(b.sinr_db, 10.0 * (b.signal_mw / (b.cci_mw + b.ibe_mw + b.noise_mw)).log10());
    }

    #[test]
    fn shadowing_zero_displacement_keeps_value() {
        let m = Metric::plane();
        let mut st = LinkShadowState::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Position::new(0.0, 0.0);
        let b = Position::new(50.0, 3.5);
        let first = st.sample(a, b, &m, 7.0, 10.0, &mut rng);
        assert!(st.initialized());
        for _ in 0..10 {
            assert_eq!(st.sample(a, b, &m, 7.0, 10.0, &mut rng), first);
        }
    }

    #[test]
    fn shadowing_large_displacement_is_fresh() {
        let m = Metric::plane();
        let mut st = LinkShadowState {
            last_value_db: 1000.0,
            last_positions: Some((Position::new(0.0, 0.0), Position::new(1.0, 0.0))),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut fresh = ChaCha8Rng::seed_from_u64(2);
        let v = st.sample(Position::new(1e5, 0.0), Position::new(1e5 + 1.0, 0.0), &m, 7.0, 10.0, &mut rng);
        let z: f64 = fresh.sample(StandardNormal);
        assert!((v - 7.0 * z).abs() < 1e-9);
    }

    #[test]
    fn shadowing_marginal_variance() {
        let m = Metric::plane();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| LinkShadowState::default().sample(Position::new(0.0, 0.0), Position::new(1.0, 0.0), &m, 7.0, 10.0, &mut rng))
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var / 49.0 - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn shadowing_autocorrelation_matches_exponential() {
        // Each step moves one endpoint by 2.5 m -> rho = exp(-0.25).
        let m = Metric::plane();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut st = LinkShadowState::default();
        let n = 100_000;
        let rx = Position::new(0.0, 0.0);
        let xs: Vec<f64> = (0..n)
            .map(|i| st.sample(Position::new(2.5 * i as f64, 0.0), rx, &m, 7.0, 10.0, &mut rng))
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let cov = xs.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / (n - 1) as f64;
        let expected = (-2.5f64 / 10.0).exp();
        assert!((cov / var - expected).abs() < 0.02, "lag-1 autocorrelation {}", cov / var);
    }

    #[test]
    fn config_validation() {
        let g = GridConfig::default();
        assert!(ChannelConfig::default().validate(&g).is_ok());
        let g4 = GridConfig { sub_bands: 4, ..g };
        assert!(ChannelConfig::default().validate(&g4).is_err());
        let bad_head = ChannelConfig {
            ibe_vector: vec![0.9, 0.0047, 0.0015],
            ..ChannelConfig::default()
        };
        assert!(bad_head.validate(&g).is_err());
        let increasing = ChannelConfig {
            ibe_vector: vec![1.0, 0.0015, 0.0047],
            ..ChannelConfig::default()
        };
        assert!(increasing.validate(&g).is_err());
        let neg_sigma = ChannelConfig {
            shadow_sigma_db: -1.0,
            ..ChannelConfig::default()
        };
        assert!(neg_sigma.validate(&g).is_err());
    }

    #[test]
    fn noise_floor_default() {
        assert!((mw_to_dbm(ChannelConfig::default().noise_floor_per_rb_mw) + 112.447_274_948_966_94).abs() < 1e-9);
    }
}
