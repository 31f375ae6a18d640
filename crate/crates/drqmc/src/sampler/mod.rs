//! Deterministic, seeded point streams in [0,1)^d.
//!
//! Four kinds are supported behind one interface: pseudo-random `Mc`
//! (counter-based SplitMix64, 53-bit mantissa fill), plain Sobol'
//! `QmcSobol`, digitally shifted Sobol' `RqmcShift`, and hash-based
//! Owen-scrambled Sobol' `RqmcScramble`. The point at global index `i`
//! is a pure function of `(kind, seed, d, i)` for every kind, so streams
//! are restartable and replicable.

mod diagnostics;
pub mod sobol;

pub use diagnostics::{one_dim_projection_balance, star_discrepancy_exact};
pub use sobol::{sobol_point, DirectionTable, TABLE_VERSION};

use crate::error::{Error, Result};
use crate::util::{splitmix64_at, u64_to_unit_f64};
use serde::{Deserialize, Serialize};

/// Which generator a stream uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SamplerTag {
    Mc,
    QmcSobol,
    RqmcShift,
    RqmcScramble,
}

impl SamplerTag {
    pub fn is_randomized(self) -> bool {
        matches!(self, SamplerTag::Mc | SamplerTag::RqmcShift | SamplerTag::RqmcScramble)
    }

    pub fn is_net_based(self) -> bool {
        !matches!(self, SamplerTag::Mc)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SamplerTag::Mc => "mc",
            SamplerTag::QmcSobol => "sobol",
            SamplerTag::RqmcShift => "rqmc-shift",
            SamplerTag::RqmcScramble => "rqmc-scramble",
        }
    }
}

impl std::str::FromStr for SamplerTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mc" => Ok(SamplerTag::Mc),
            "sobol" => Ok(SamplerTag::QmcSobol),
            "rqmc-shift" => Ok(SamplerTag::RqmcShift),
            "rqmc-scramble" => Ok(SamplerTag::RqmcScramble),
            other => Err(Error::Config(format!(
                "unknown sampler `{other}` (expected mc|sobol|rqmc-shift|rqmc-scramble)"
            ))),
        }
    }
}

/// Generator tag plus randomization seed. The seed is ignored for
/// `QmcSobol`, which is fully deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerKind {
    pub tag: SamplerTag,
    pub seed: u64,
}

impl SamplerKind {
    pub fn new(tag: SamplerTag, seed: u64) -> Self {
        SamplerKind { tag, seed }
    }
}

/// A contiguous block of `n = 2^tau` points for iteration `k`, stored
/// row-major (`n` rows of `d` coordinates).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBlock {
    data: Vec<f64>,
    n: usize,
    d: usize,
    /// Block index: the block covers global indices `k*n .. (k+1)*n`.
    pub iteration: u64,
    /// log2 of the block size for power-of-two blocks; 0 for free-size MC blocks.
    pub tau: u32,
}

impl SampleBlock {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.data[j * self.d..(j + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.d)
    }

    /// Build a block directly from points (for fixed evaluation sets).
    pub fn from_rows(rows: Vec<Vec<f64>>, iteration: u64, tau: u32) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Config("empty point set".into()));
        }
        let d = rows[0].len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Config("ragged point set".into()));
        }
        let n = rows.len();
        let mut data = Vec::with_capacity(n * d);
        for r in rows {
            data.extend_from_slice(&r);
        }
        Ok(SampleBlock { data, n, d, iteration, tau })
    }
}

/// Salt separating the per-dimension randomization words from other
/// consumers of the same seed.
const DIM_RANDOMIZATION_SALT: u64 = 0x5157_4d43_5348_4654;

/// A deterministic indexed stream of points in [0,1)^d.
#[derive(Debug, Clone)]
pub struct SampleStream {
    kind: SamplerKind,
    d: usize,
    cursor: u64,
    /// Per-dimension 32-bit randomization words (shift vector or Owen keys),
    /// drawn once from the seed at construction.
    words: Vec<u32>,
}

impl SampleStream {
    pub fn new(kind: SamplerKind, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        if kind.tag.is_net_based() {
            let cap = DirectionTable::embedded().max_dim();
            if d > cap {
                return Err(Error::Unsupported(format!(
                    "dimension {d} exceeds direction-number table capacity {cap}"
                )));
            }
        }
        let words = match kind.tag {
            SamplerTag::RqmcShift | SamplerTag::RqmcScramble => (0..d)
                .map(|j| splitmix64_at(kind.seed ^ DIM_RANDOMIZATION_SALT, j as u64) as u32)
                .collect(),
            _ => Vec::new(),
        };
        Ok(SampleStream { kind, d, cursor: 0, words })
    }

    pub fn kind(&self) -> SamplerKind {
        self.kind
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn cursor(&self) -> u64 {
        self.cursor
    }

    pub fn set_cursor(&mut self, cursor: u64) {
        self.cursor = cursor;
    }

    /// The point at a global index, independent of the cursor.
    pub fn point(&self, index: u64) -> Result<Vec<f64>> {
        match self.kind.tag {
            SamplerTag::Mc => {
                let base = index
                    .checked_mul(self.d as u64)
                    .ok_or_else(|| Error::IndexOverflow(format!("MC index {index}")))?;
                Ok((0..self.d)
                    .map(|j| u64_to_unit_f64(splitmix64_at(self.kind.seed, base + j as u64)))
                    .collect())
            }
            SamplerTag::QmcSobol => sobol_point(self.d, index),
            SamplerTag::RqmcShift => {
                let table = DirectionTable::embedded();
                let idx = u32::try_from(index)
                    .map_err(|_| Error::IndexOverflow(format!("Sobol' index {index} >= 2^32")))?;
                Ok((1..=self.d)
                    .map(|j| {
                        let raw = table.raw(j, idx) ^ self.words[j - 1];
                        raw as f64 * (1.0 / 4294967296.0)
                    })
                    .collect())
            }
            SamplerTag::RqmcScramble => {
                let table = DirectionTable::embedded();
                let idx = u32::try_from(index)
                    .map_err(|_| Error::IndexOverflow(format!("Sobol' index {index} >= 2^32")))?;
                Ok((1..=self.d)
                    .map(|j| {
                        let raw = sobol::owen_scramble(table.raw(j, idx), self.words[j - 1]);
                        raw as f64 * (1.0 / 4294967296.0)
                    })
                    .collect())
            }
        }
    }

    /// The next `2^tau` points, advancing the cursor.
    ///
    /// For net-based kinds the cursor must sit on a multiple of `2^tau`
    /// (blocks are requested sequentially from 0 or after an explicit
    /// cursor set), so every block is a digitally shifted (t, tau, d)-net.
    pub fn next_block(&mut self, tau: u32) -> Result<SampleBlock> {
        let n = 1u64 << tau;
        if self.kind.tag.is_net_based() && self.cursor % n != 0 {
            return Err(Error::Config(format!(
                "cursor {} is not aligned to block size 2^{tau}",
                self.cursor
            )));
        }
        let iteration = self.cursor / n;
        let block = self.block_at(iteration, tau)?;
        self.cursor = self
            .cursor
            .checked_add(n)
            .ok_or_else(|| Error::IndexOverflow("cursor".into()))?;
        Ok(block)
    }

    /// Block `k` of size `2^tau` (global indices `k*2^tau .. (k+1)*2^tau`),
    /// independent of the cursor.
    pub fn block_at(&self, k: u64, tau: u32) -> Result<SampleBlock> {
        let n = 1u64 << tau;
        let start = k
            .checked_mul(n)
            .ok_or_else(|| Error::IndexOverflow(format!("block {k} at tau {tau}")))?;
        let mut data = Vec::with_capacity((n as usize) * self.d);
        for i in start..start + n {
            data.extend_from_slice(&self.point(i)?);
        }
        Ok(SampleBlock { data, n: n as usize, d: self.d, iteration: k, tau })
    }

    /// A block of arbitrary size; MC only (net-based kinds need 2^tau blocks).
    pub fn next_points(&mut self, n: usize) -> Result<SampleBlock> {
        if self.kind.tag.is_net_based() {
            return Err(Error::Config(
                "free-size blocks are only available for the MC sampler".into(),
            ));
        }
        if n == 0 {
            return Err(Error::Config("block size must be positive".into()));
        }
        let start = self.cursor;
        let mut data = Vec::with_capacity(n * self.d);
        for i in start..start + n as u64 {
            data.extend_from_slice(&self.point(i)?);
        }
        self.cursor += n as u64;
        Ok(SampleBlock { data, n, d: self.d, iteration: start, tau: 0 })
    }
}
