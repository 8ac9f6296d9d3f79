//! Vehicle placement and kinematics: the Poisson freeway generator and
//! playback of external position traces.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Planar Euclidean distance, optionally periodic along x (a road that
/// wraps around).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric {
    period_x: Option<f64>,
}

impl Metric {
    pub fn plane() -> Self {
        Self { period_x: None }
    }

    pub fn periodic(length: f64) -> Self {
        Self { period_x: Some(length) }
    }

    pub fn distance(&self, a: Position, b: Position) -> f64 {
        let mut dx = a.x - b.x;
        if let Some(l) = self.period_x {
            dx -= l * (dx / l).round();
        }
        dx.hypot(a.y - b.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: u32,
    pub position: Position,
    pub lane: u32,
    /// Signed by direction of travel along x.
    pub speed_mps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreewayConfig {
    pub lanes_per_direction: u32,
    pub lane_width_m: f64,
    pub median_width_m: f64,
    pub road_length_m: f64,
    /// Vehicles per km summed over all lanes of both directions.
    pub density_per_km: f64,
    pub speed_min_kmh: f64,
    pub speed_max_kmh: f64,
    pub wraparound: bool,
}

impl Default for FreewayConfig {
    fn default() -> Self {
        Self {
            lanes_per_direction: 3,
            lane_width_m: 3.5,
            median_width_m: 4.0,
            road_length_m: 6000.0,
            density_per_km: 100.0,
            speed_min_kmh: 100.0,
            speed_max_kmh: 140.0,
            wraparound: true,
        }
    }
}

impl FreewayConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lanes_per_direction == 0 {
            return Err(Error::config("lanes_per_direction", "must be at least 1"));
        }
        if !(self.lane_width_m > 0.0) || !self.lane_width_m.is_finite() {
            return Err(Error::config("lane_width_m", "must be positive"));
        }
        if !(self.median_width_m >= 0.0) || !self.median_width_m.is_finite() {
            return Err(Error::config("median_width_m", "must be >= 0"));
        }
        if !(self.road_length_m >= 0.0) || !self.road_length_m.is_finite() {
            return Err(Error::config("road_length_m", "must be >= 0"));
        }
        if !(self.density_per_km > 0.0) || !self.density_per_km.is_finite() {
            return Err(Error::config("density_per_km", "must be positive"));
        }
        if !(self.speed_min_kmh >= 0.0 && self.speed_min_kmh <= self.speed_max_kmh) || !self.speed_max_kmh.is_finite() {
            return Err(Error::config("speed_range_kmh", "need 0 <= speed_min_kmh <= speed_max_kmh"));
        }
        Ok(())
    }

    pub fn lane_count(&self) -> u32 {
        2 * self.lanes_per_direction
    }

    /// Lanes `0..L` travel towards +x, lanes `L..2L` towards -x.
    pub fn lane_y(&self, lane: u32) -> f64 {
        let l = self.lanes_per_direction;
        let offset = self.median_width_m / 2.0 + (((lane % l) as f64) + 0.5) * self.lane_width_m;
        if lane < l {
            offset
        } else {
            -offset
        }
    }

    pub fn metric(&self) -> Metric {
        if self.wraparound && self.road_length_m > 0.0 {
            Metric::periodic(self.road_length_m)
        } else {
            Metric::plane()
        }
    }
}

/// Places vehicles lane by lane as independent 1-D Poisson processes with
/// rate `density / (2 * lanes_per_direction)` per km.
pub fn generate_freeway<R: Rng + ?Sized>(cfg: &FreewayConfig, rng: &mut R) -> Result<Vec<Vehicle>> {
    cfg.validate()?;
    let mut vehicles = Vec::new();
    if cfg.road_length_m == 0.0 {
        return Ok(vehicles);
    }
    let rate_per_m = cfg.density_per_km / cfg.lane_count() as f64 / 1000.0;
    let gap = Exp::new(rate_per_m).map_err(|e| Error::config("density_per_km", e.to_string()))?;
    let (vmin, vmax) = (cfg.speed_min_kmh / 3.6, cfg.speed_max_kmh / 3.6);
    for lane in 0..cfg.lane_count() {
        let sign = if lane < cfg.lanes_per_direction { 1.0 } else { -1.0 };
        let mut x = gap.sample(rng);
        while x < cfg.road_length_m {
            let speed = if vmax > vmin { rng.random_range(vmin..=vmax) } else { vmin };
            vehicles.push(Vehicle {
                id: vehicles.len() as u32,
                position: Position::new(x, cfg.lane_y(lane)),
                lane,
                speed_mps: sign * speed,
            });
            x += gap.sample(rng);
        }
    }
    Ok(vehicles)
}

/// Moves every vehicle along x by `speed * dt`. With wraparound positions
/// are taken modulo the road length; otherwise vehicles leaving
/// `[0, road_length)` are dropped.
pub fn advance(vehicles: &mut Vec<Vehicle>, dt_s: f64, road_length_m: f64, wraparound: bool) {
    debug_assert!(dt_s >= 0.0);
    if dt_s == 0.0 {
        return;
    }
    for v in vehicles.iter_mut() {
        v.position.x += v.speed_mps * dt_s;
        if wraparound && road_length_m > 0.0 {
            v.position.x = v.position.x.rem_euclid(road_length_m);
        }
    }
    if !wraparound {
        vehicles.retain(|v| (0.0..road_length_m).contains(&v.position.x));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub vehicle_id: u32,
    pub position: Position,
    pub speed_mps: f64,
}

/// Time-indexed vehicle positions read from a CSV trace.
///
/// Format: header `t_ms,vehicle_id,x_m,y_m,speed_mps`, one row per vehicle
/// per sampled window, `t_ms` a multiple of the window length and
/// non-decreasing down the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    window_ms: u32,
    frames: BTreeMap<u64, Vec<TraceSample>>,
}

pub const TRACE_HEADER: [&str; 5] = ["t_ms", "vehicle_id", "x_m", "y_m", "speed_mps"];

impl Trace {
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn window_ms(&self) -> u32 {
        self.window_ms
    }

    /// Vehicles present in window `n` (at `t = n * window_ms`), sorted by id.
    pub fn window(&self, n: u64) -> &[TraceSample] {
        self.frames
            .get(&(n * self.window_ms as u64))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn windows(&self) -> impl Iterator<Item = (u64, &[TraceSample])> {
        self.frames.iter().map(|(t, v)| (t / self.window_ms as u64, v.as_slice()))
    }

    pub fn last_window(&self) -> Option<u64> {
        self.frames.keys().next_back().map(|t| t / self.window_ms as u64)
    }

    pub fn from_reader<R: Read>(reader: R, window_ms: u32, label: &Path) -> Result<Self> {
        let err = |row: usize, reason: String| Error::Trace {
            path: label.to_path_buf(),
            row,
            reason,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut records = rdr.records();
        let mut frames: BTreeMap<u64, Vec<TraceSample>> = BTreeMap::new();
        match records.next() {
            None => {
                return Ok(Self { window_ms, frames });
            }
            Some(header) => {
                let header = header.map_err(|e| err(1, e.to_string()))?;
                let got: Vec<&str> = header.iter().collect();
                if got != TRACE_HEADER {
                    return Err(err(1, format!("expected header `{}`, got `{}`", TRACE_HEADER.join(","), got.join(","))));
                }
            }
        }
        let mut last_t: Option<u64> = None;
        for (i, record) in records.enumerate() {
            let row = i + 2;
            let record = record.map_err(|e| err(row, e.to_string()))?;
            if record.len() == 1 && record.get(0) == Some("") {
                continue;
            }
            let field = |col: usize| -> Result<&str> {
                match record.get(col) {
                    Some(s) if !s.is_empty() => Ok(s),
                    _ => Err(err(row, format!("missing column `{}`", TRACE_HEADER[col]))),
                }
            };
            let parse_f64 = |col: usize| -> Result<f64> {
                let s = field(col)?;
                let v: f64 = s
                    .parse()
                    .map_err(|_| err(row, format!("column `{}`: cannot parse `{s}` as a number", TRACE_HEADER[col])))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(err(row, format!("column `{}`: value must be finite", TRACE_HEADER[col])))
                }
            };
            if record.len() > TRACE_HEADER.len() {
                return Err(err(row, format!("expected {} columns, got {}", TRACE_HEADER.len(), record.len())));
            }
            let t_str = field(0)?;
            let t: u64 = t_str
                .parse()
                .map_err(|_| err(row, format!("column `t_ms`: `{t_str}` is not a non-negative integer")))?;
            let id_str = field(1)?;
            let vehicle_id: u32 = id_str
                .parse()
                .map_err(|_| err(row, format!("column `vehicle_id`: `{id_str}` is not a non-negative integer")))?;
            let sample = TraceSample {
                vehicle_id,
                position: Position::new(parse_f64(2)?, parse_f64(3)?),
                speed_mps: parse_f64(4)?,
            };
            if window_ms == 0 || t % window_ms as u64 != 0 {
                return Err(err(row, format!("t_ms {t} is not a multiple of the {window_ms} ms window")));
            }
            if let Some(prev) = last_t {
                if t < prev {
                    return Err(err(row, format!("timestamp {t} ms goes back in time (previous row {prev} ms)")));
                }
            }
            last_t = Some(t);
            let frame = frames.entry(t).or_default();
            if frame.iter().any(|s| s.vehicle_id == vehicle_id) {
                return Err(err(row, format!("duplicate vehicle {vehicle_id} at t_ms {t}")));
            }
            frame.push(sample);
        }
        for frame in frames.values_mut() {
            frame.sort_by_key(|s| s.vehicle_id);
        }
        Ok(Self { window_ms, frames })
    }
}

pub fn load_trace(path: &Path, window_ms: u32) -> Result<Trace> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Trace::from_reader(std::io::BufReader::new(file), window_ms, path)
}
