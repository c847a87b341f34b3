use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::optics::{decode_binary9, decode_csv, split_channels};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagFormat {
    Binary9,
    Csv,
}

impl std::str::FromStr for TagFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary9" => Ok(TagFormat::Binary9),
            "csv" => Ok(TagFormat::Csv),
            other => Err(Error::Ingest { offset: 0, message: format!("unknown tag format `{other}`") }),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagStreams {
    /// Sorted timestamps (ps) per channel.
    pub channels: BTreeMap<u8, Vec<i64>>,
    pub malformed: u64,
}

impl TagStreams {
    pub fn channel(&self, ch: u8) -> &[i64] {
        self.channels.get(&ch).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn total(&self) -> usize {
        self.channels.values().map(Vec::len).sum()
    }
}

pub fn ingest_bytes(bytes: &[u8], format: TagFormat) -> Result<TagStreams> {
    let decoded = match format {
        TagFormat::Binary9 => decode_binary9(bytes)?,
        TagFormat::Csv => decode_csv(bytes)?,
    };
    if decoded.malformed > 0 {
        log::warn!("{} malformed time-tag records skipped", decoded.malformed);
    }
    Ok(TagStreams { channels: split_channels(&decoded.tags), malformed: decoded.malformed })
}

pub fn ingest_tags(path: &Path, format: TagFormat) -> Result<TagStreams> {
    let bytes = std::fs::read(path)?;
    ingest_bytes(&bytes, format)
}
