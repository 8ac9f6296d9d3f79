//! Reception verdicts, the five-way loss taxonomy and PRR tables over
//! disks and rings of awareness distance.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::channel::SinrBreakdown;
use crate::engine::SimConfig;
use crate::error::{Error, Result};
use crate::grid::SubchannelId;

/// Width of the annulus used by ring PRR.
pub const RING_WIDTH_M: f64 = 50.0;

/// Why a packet was not decoded. Listed in precedence order: the first
/// matching cause is the one recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorClass {
    /// Receiver was transmitting on the very same subchannel.
    HdSc,
    /// Receiver was transmitting in the same subframe on another sub-band.
    HdSf,
    /// Below threshold even without interference.
    Propagation,
    Cci,
    Ibe,
}

impl ErrorClass {
    pub const ALL: [ErrorClass; 5] = [
        ErrorClass::HdSc,
        ErrorClass::HdSf,
        ErrorClass::Propagation,
        ErrorClass::Cci,
        ErrorClass::Ibe,
    ];

    fn slot(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Decoded,
    Lost(ErrorClass),
}

impl Verdict {
    pub fn decoded(&self) -> bool {
        matches!(self, Verdict::Decoded)
    }
}

/// Outcome of one transmitter-receiver packet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceptionEvent {
    pub window: u64,
    pub tx: u32,
    pub rx: u32,
    pub distance_m: f64,
    pub subchannel: SubchannelId,
    /// `None` when the receiver was transmitting in the same subframe.
    pub sinr: Option<SinrBreakdown>,
    pub rx_transmit: Option<SubchannelId>,
    pub verdict: Verdict,
}

/// Assigns a verdict with the hierarchy HD-SC, HD-SF, propagation, CCI,
/// IBE. Interference terms are added one at a time; the first one that
/// pushes the SINR below `threshold_db` names the loss.
pub fn classify(
    subchannel: SubchannelId,
    rx_transmit: Option<SubchannelId>,
    sinr: Option<&SinrBreakdown>,
    threshold_db: f64,
) -> Result<Verdict> {
    if let Some(own) = rx_transmit {
        if own == subchannel {
            return Ok(Verdict::Lost(ErrorClass::HdSc));
        }
        if own.same_subframe(subchannel) {
            return Ok(Verdict::Lost(ErrorClass::HdSf));
        }
    }
    let b = sinr.ok_or(Error::domain("SINR breakdown", "present for non-half-duplex events", f64::NAN))?;
    Ok(if b.snr_db() < threshold_db {
        Verdict::Lost(ErrorClass::Propagation)
    } else if b.sinr_cci_only_db() < threshold_db {
        Verdict::Lost(ErrorClass::Cci)
    } else if b.sinr_db < threshold_db {
        Verdict::Lost(ErrorClass::Ibe)
    } else {
        Verdict::Decoded
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Disk,
    Ring,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Disk => "disk",
            Variant::Ring => "ring",
        }
    }

    /// Membership of a receiver at `distance` in the region of radius
    /// `dx`. A ring whose inner edge is at or below zero is the full disk.
    pub fn contains(&self, dx: f64, distance: f64) -> bool {
        let inner = dx - RING_WIDTH_M;
        match self {
            Variant::Ring if inner > 0.0 => distance > inner && distance <= dx,
            _ => distance <= dx,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub total: u64,
    pub decoded: u64,
    /// Indexed like [`ErrorClass::ALL`].
    pub lost: [u64; 5],
}

impl Counts {
    pub fn add(&mut self, verdict: Verdict) {
        self.total += 1;
        match verdict {
            Verdict::Decoded => self.decoded += 1,
            Verdict::Lost(c) => self.lost[c.slot()] += 1,
        }
    }

    pub fn merge(&mut self, other: &Counts) {
        self.total += other.total;
        self.decoded += other.decoded;
        for (a, b) in self.lost.iter_mut().zip(other.lost) {
            *a += b;
        }
    }

    pub fn lost(&self, class: ErrorClass) -> u64 {
        self.lost[class.slot()]
    }

    pub fn prr(&self) -> Option<f64> {
        (self.total > 0).then(|| self.decoded as f64 / self.total as f64)
    }

    pub fn fraction(&self, class: ErrorClass) -> Option<f64> {
        (self.total > 0).then(|| self.lost(class) as f64 / self.total as f64)
    }
}

/// Streaming per-distance counts. Merging is associative, so shards of an
/// event stream can be aggregated independently.
#[derive(Debug, Clone, PartialEq)]
pub struct PrrAccumulator {
    distances: Vec<f64>,
    disk: Vec<Counts>,
    ring: Vec<Counts>,
}

impl PrrAccumulator {
    pub fn new(distances: &[f64]) -> Self {
        Self {
            distances: distances.to_vec(),
            disk: vec![Counts::default(); distances.len()],
            ring: vec![Counts::default(); distances.len()],
        }
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn record(&mut self, distance_m: f64, verdict: Verdict) {
        for (i, &dx) in self.distances.iter().enumerate() {
            if Variant::Disk.contains(dx, distance_m) {
                self.disk[i].add(verdict);
            }
            if Variant::Ring.contains(dx, distance_m) {
                self.ring[i].add(verdict);
            }
        }
    }

    pub fn record_event(&mut self, event: &ReceptionEvent) {
        self.record(event.distance_m, event.verdict);
    }

    pub fn merge(&mut self, other: &PrrAccumulator) {
        assert_eq!(self.distances, other.distances, "merging accumulators over different distances");
        for (a, b) in self.disk.iter_mut().zip(&other.disk) {
            a.merge(b);
        }
        for (a, b) in self.ring.iter_mut().zip(&other.ring) {
            a.merge(b);
        }
    }

    pub fn counts(&self, dx: f64, variant: Variant) -> Result<&Counts> {
        let i = self
            .distances
            .iter()
            .position(|&d| d == dx)
            .ok_or(Error::UnknownDistance(dx))?;
        Ok(match variant {
            Variant::Disk => &self.disk[i],
            Variant::Ring => &self.ring[i],
        })
    }

    /// `None` when no packet fell in the region.
    pub fn prr(&self, dx: f64, variant: Variant) -> Result<Option<f64>> {
        Ok(self.counts(dx, variant)?.prr())
    }

    pub fn table(&self) -> PrrTable {
        let mut rows = Vec::with_capacity(2 * self.distances.len());
        for (i, &dx) in self.distances.iter().enumerate() {
            for (variant, c) in [(Variant::Disk, &self.disk[i]), (Variant::Ring, &self.ring[i])] {
                rows.push(PrrRow {
                    distance_m: dx,
                    variant,
                    packets: c.total,
                    prr: c.prr(),
                    hd_sf: c.fraction(ErrorClass::HdSf),
                    hd_sc: c.fraction(ErrorClass::HdSc),
                    propagation: c.fraction(ErrorClass::Propagation),
                    cci: c.fraction(ErrorClass::Cci),
                    ibe: c.fraction(ErrorClass::Ibe),
                });
            }
        }
        PrrTable { rows }
    }
}

/// PRR over a finished event list.
pub fn prr(events: &[ReceptionEvent], distances: &[f64], dx: f64, variant: Variant) -> Result<Option<f64>> {
    aggregate(events, distances).prr(dx, variant)
}

pub fn aggregate(events: &[ReceptionEvent], distances: &[f64]) -> PrrAccumulator {
    let mut acc = PrrAccumulator::new(distances);
    for e in events {
        acc.record_event(e);
    }
    acc
}

/// One table row; fractions are in `[0, 1]` and `None` for empty regions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrrRow {
    pub distance_m: f64,
    pub variant: Variant,
    pub packets: u64,
    pub prr: Option<f64>,
    pub hd_sf: Option<f64>,
    pub hd_sc: Option<f64>,
    pub propagation: Option<f64>,
    pub cci: Option<f64>,
    pub ibe: Option<f64>,
}

impl PrrRow {
    pub fn is_empty(&self) -> bool {
        self.packets == 0
    }

    /// PRR then losses, in printed column order.
    pub fn columns(&self) -> [Option<f64>; 6] {
        [self.prr, self.hd_sf, self.hd_sc, self.propagation, self.cci, self.ibe]
    }

    /// PRR plus every loss fraction; 1 for any non-empty row.
    pub fn partition_sum(&self) -> Option<f64> {
        self.columns().into_iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrrTable {
    pub rows: Vec<PrrRow>,
}

impl PrrTable {
    pub fn row(&self, dx: f64, variant: Variant) -> Option<&PrrRow> {
        self.rows.iter().find(|r| r.distance_m == dx && r.variant == variant)
    }
}

pub const CSV_HEADER: &str = "distance_m,variant,packets,prr,hd_sf,hd_sc,propagation,cci,ibe";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub config: SimConfig,
    pub measured_windows: u64,
    pub events: u64,
    pub table: PrrTable,
}

impl SimulationReport {
    /// Long-form CSV, one row per (distance, variant), values in percent
    /// with four decimals. Empty regions leave the value cells blank.
    pub fn to_csv(&self) -> String {
        table_to_csv(&self.table)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn serialize(&self, format: Format) -> Result<Vec<u8>> {
        Ok(match format {
            Format::Csv => self.to_csv().into_bytes(),
            Format::Json => self.to_json()?.into_bytes(),
        })
    }
}

pub fn table_to_csv(table: &PrrTable) -> String {
    let mut out = String::with_capacity(64 * (table.rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &table.rows {
        let _ = write!(out, "{},{},{}", r.distance_m, r.variant.as_str(), r.packets);
        for v in r.columns() {
            match v {
                Some(x) => {
                    let _ = write!(out, ",{:.4}", 100.0 * x);
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}
