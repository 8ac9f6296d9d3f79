//! Time/frequency resource grid of one scheduling window.
//!
//! A window is `K` subframes of 1 ms, each split into `F` sub-bands. One
//! subchannel is a (sub-band, subframe) cell. Domain coordinates are
//! 1-based; flat indices are 0-based and sub-band-major.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Subframe duration in milliseconds.
pub const SUBFRAME_MS: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Number of sub-bands `F`.
    pub sub_bands: u32,
    /// Subframes per window `K`.
    pub subframes: u32,
    pub rbs_per_subchannel: u32,
    pub window_ms: u32,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            sub_bands: 3,
            subframes: 100,
            rbs_per_subchannel: 30,
            window_ms: 100,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sub_bands == 0 {
            return Err(Error::config("sub_bands", "must be at least 1"));
        }
        if self.subframes == 0 {
            return Err(Error::config("subframes", "must be at least 1"));
        }
        if self.rbs_per_subchannel == 0 {
            return Err(Error::config("rbs_per_subchannel", "must be at least 1"));
        }
        if self.window_ms != self.subframes * SUBFRAME_MS {
            return Err(Error::config(
                "window_ms",
                format!(
                    "must equal subframes x {SUBFRAME_MS} ms ({}), got {}",
                    self.subframes * SUBFRAME_MS,
                    self.window_ms
                ),
            ));
        }
        Ok(())
    }

    /// `|S| = F * K`.
    pub fn total_subchannels(&self) -> usize {
        self.sub_bands as usize * self.subframes as usize
    }

    pub fn linear_index(&self, id: SubchannelId) -> Result<usize> {
        if !self.contains(id) {
            return Err(Error::OutOfGrid {
                f: id.f,
                k: id.k,
                sub_bands: self.sub_bands,
                subframes: self.subframes,
            });
        }
        Ok((id.f as usize - 1) * self.subframes as usize + (id.k as usize - 1))
    }

    pub fn from_linear(&self, index: usize) -> Result<SubchannelId> {
        if index >= self.total_subchannels() {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.total_subchannels(),
            });
        }
        let k = self.subframes as usize;
        Ok(SubchannelId {
            f: (index / k) as u32 + 1,
            k: (index % k) as u32 + 1,
        })
    }

    pub fn contains(&self, id: SubchannelId) -> bool {
        (1..=self.sub_bands).contains(&id.f) && (1..=self.subframes).contains(&id.k)
    }

    /// Every subchannel in flat-index order.
    pub fn subchannels(&self) -> impl Iterator<Item = SubchannelId> + '_ {
        (1..=self.sub_bands).flat_map(move |f| (1..=self.subframes).map(move |k| SubchannelId { f, k }))
    }
}

/// Grid coordinate: sub-band `f` in `1..=F`, subframe `k` in `1..=K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubchannelId {
    pub f: u32,
    pub k: u32,
}

impl SubchannelId {
    pub const fn new(f: u32, k: u32) -> Self {
        Self { f, k }
    }

    pub fn same_subframe(self, other: SubchannelId) -> bool {
        self.k == other.k
    }
}

impl std::fmt::Display for SubchannelId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "s({},{})", self.f, self.k)
    }
}
