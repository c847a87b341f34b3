//! Time-tag records: 9-byte little-endian binary (u8 channel, i64 ps) and
//! CSV "channel,timestamp_ps".

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const BINARY9_RECORD: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TimeTag {
    pub timestamp_ps: i64,
    pub channel: u8,
}

impl TimeTag {
    pub fn new(channel: u8, timestamp_ps: i64) -> Self {
        Self { timestamp_ps, channel }
    }
}

/// Tags decoded from a file. Records with negative timestamps or
/// unparseable fields are skipped and counted.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecodedTags {
    pub tags: Vec<TimeTag>,
    pub malformed: u64,
}

pub fn encode_binary9<W: Write>(tags: &[TimeTag], mut w: W) -> Result<()> {
    let mut buf = Vec::with_capacity(tags.len() * BINARY9_RECORD);
    for t in tags {
        buf.push(t.channel);
        buf.extend_from_slice(&t.timestamp_ps.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn decode_binary9(bytes: &[u8]) -> Result<DecodedTags> {
    let whole = bytes.len() / BINARY9_RECORD * BINARY9_RECORD;
    if whole != bytes.len() {
        return Err(Error::Ingest {
            offset: whole as u64,
            message: format!("truncated record: {} trailing bytes", bytes.len() - whole),
        });
    }
    let mut out = DecodedTags::default();
    out.tags.reserve(bytes.len() / BINARY9_RECORD);
    for rec in bytes.chunks_exact(BINARY9_RECORD) {
        let ts = i64::from_le_bytes(rec[1..9].try_into().expect("8-byte slice"));
        if ts < 0 {
            out.malformed += 1;
        } else {
            out.tags.push(TimeTag::new(rec[0], ts));
        }
    }
    Ok(out)
}

pub fn encode_csv<W: Write>(tags: &[TimeTag], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["channel", "timestamp_ps"])?;
    for t in tags {
        wr.write_record([t.channel.to_string(), t.timestamp_ps.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn decode_csv(bytes: &[u8]) -> Result<DecodedTags> {
    let mut out = DecodedTags::default();
    if bytes.is_empty() {
        return Ok(out);
    }
    let mut rd = csv::ReaderBuilder::new().flexible(true).from_reader(bytes);
    let headers = rd.headers().map_err(|e| Error::Ingest { offset: 0, message: e.to_string() })?;
    if headers.len() != 2 || headers[0].trim() != "channel" || headers[1].trim() != "timestamp_ps" {
        return Err(Error::Ingest { offset: 0, message: "expected header \"channel,timestamp_ps\"".into() });
    }
    let mut rec = csv::StringRecord::new();
    loop {
        match rd.read_record(&mut rec) {
            Ok(false) => break,
            Ok(true) => {
                let parsed = (rec.len() == 2)
                    .then(|| (rec[0].trim().parse::<u8>().ok(), rec[1].trim().parse::<i64>().ok()))
                    .and_then(|(c, t)| Some((c?, t?)))
                    .filter(|&(_, t)| t >= 0);
                match parsed {
                    Some((c, t)) => out.tags.push(TimeTag::new(c, t)),
                    None => out.malformed += 1,
                }
            }
            Err(e) => {
                if let csv::ErrorKind::Utf8 { .. } = e.kind() {
                    out.malformed += 1;
                    continue;
                }
                let offset = e.position().map(|p| p.byte()).unwrap_or(0);
                return Err(Error::Ingest { offset, message: e.to_string() });
            }
        }
    }
    Ok(out)
}

/// Channel-separated, time-sorted timestamp streams.
pub fn split_channels(tags: &[TimeTag]) -> BTreeMap<u8, Vec<i64>> {
    let mut map: BTreeMap<u8, Vec<i64>> = BTreeMap::new();
    for t in tags {
        map.entry(t.channel).or_default().push(t.timestamp_ps);
    }
    for v in map.values_mut() {
        if !v.windows(2).all(|w| w[0] <= w[1]) {
            v.sort_unstable();
        }
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn binary_layout_is_little_endian() {
        let mut buf = Vec::new();
        encode_binary9(&[TimeTag::new(1, 0x0102_0304_0506_0708)], &mut buf).unwrap();
        assert_eq!(buf, [1, 8, 7, 6, 5, 4, 3, 2, 1]);
    }

    #[test]
    fn truncated_binary_reports_offset() {
        let mut buf = Vec::new();
        encode_binary9(&[TimeTag::new(0, 5), TimeTag::new(1, 6)], &mut buf).unwrap();
        buf.pop();
        match decode_binary9(&buf) {
            Err(Error::Ingest { offset, .. }) => assert_eq!(offset, 9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_timestamp_is_malformed() {
        let mut buf = Vec::new();
        encode_binary9(&[TimeTag::new(0, 5), TimeTag::new(0, -1), TimeTag::new(1, 7)], &mut buf).unwrap();
        let d = decode_binary9(&buf).unwrap();
        assert_eq!(d.tags.len(), 2);
        assert_eq!(d.malformed, 1);
    }

    #[test]
    fn csv_header_and_bad_rows() {
        assert!(matches!(decode_csv(b"chan,ts\n0,1\n"), Err(Error::Ingest { offset: 0, .. })));
        let d = decode_csv(b"channel,timestamp_ps\n0,10\nx,11\n1,12,3\n1,-4\n1,13\n").unwrap();
        assert_eq!(d.tags, vec![TimeTag::new(0, 10), TimeTag::new(1, 13)]);
        assert_eq!(d.malformed, 3);
        assert_eq!(decode_csv(b"").unwrap(), DecodedTags::default());
    }

    #[test]
    fn split_sorts_each_channel() {
        let m = split_channels(&[TimeTag::new(1, 5), TimeTag::new(0, 3), TimeTag::new(1, 2)]);
        assert_eq!(m[&0], vec![3]);
        assert_eq!(m[&1], vec![2, 5]);
    }

    proptest! {
        #[test]
        fn binary_round_trip(raw in proptest::collection::vec((any::<u8>(), 0i64..i64::MAX), 0..200)) {
            let tags: Vec<_> = raw.iter().map(|&(c, t)| TimeTag::new(c, t)).collect();
            let mut buf = Vec::new();
            encode_binary9(&tags, &mut buf).unwrap();
            prop_assert_eq!(buf.len(), tags.len() * BINARY9_RECORD);
            let d = decode_binary9(&buf).unwrap();
            prop_assert_eq!(d.tags, tags);
            prop_assert_eq!(d.malformed, 0);
        }

        #[test]
        fn csv_round_trip(raw in proptest::collection::vec((any::<u8>(), 0i64..i64::MAX), 0..200)) {
            let tags: Vec<_> = raw.iter().map(|&(c, t)| TimeTag::new(c, t)).collect();
            let mut buf = Vec::new();
            encode_csv(&tags, &mut buf).unwrap();
            let d = decode_csv(&buf).unwrap();
            prop_assert_eq!(d.tags, tags);
        }
    }
}
