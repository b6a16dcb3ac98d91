//! JSON Lines packet traces.
//!
//! One packet per line:
//!
//! ```text
//! {"ts":<ns>, "stream":"pkts"|"ctrl", "meta":{...}, "headers":{"ipv4.src":...}}
//! ```
//!
//! `stream` defaults to `pkts`; `meta` keys are `input_port`, `output_port`,
//! `size`, `in_queue_length` and `switch_id`. An optional `hop_meta` object
//! maps a switch id to metadata that replaces `meta` fields at that switch,
//! e.g. `"hop_meta":{"2":{"in_queue_length":17}}`. Header names may use any
//! alias known to the schema; they are stored under their canonical name.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::schema::width_mask;
use crate::model::{FieldRef, Meta, MetaPatch, Packet, Schema};

fn default_stream() -> String {
    "pkts".into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub ts: u64,
    #[serde(default = "default_stream")]
    pub stream: String,
    #[serde(default)]
    pub meta: Meta,
    #[serde(default)]
    pub headers: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub hop_meta: BTreeMap<u16, MetaPatch>,
}

impl TraceRecord {
    pub fn new(ts: u64) -> Self {
        TraceRecord {
            ts,
            stream: default_stream(),
            meta: Meta::default(),
            headers: BTreeMap::new(),
            hop_meta: BTreeMap::new(),
        }
    }

    pub fn header(mut self, name: &str, v: u64) -> Self {
        self.headers.insert(name.to_string(), v);
        self
    }

    /// The packet as it arrives at switch `switch_id`.
    pub fn packet_at(&self, switch_id: u16) -> Packet {
        let mut meta = self.meta;
        if let Some(patch) = self.hop_meta.get(&switch_id) {
            meta.apply(patch);
        }
        meta.switch_id = switch_id;
        Packet {
            ts: self.ts,
            stream: self.stream.clone(),
            meta,
            headers: self.headers.clone(),
        }
    }
}

/// Parses a whole trace, canonicalising header names and checking widths and
/// timestamp order.
pub fn read_trace(reader: impl BufRead, schema: &Schema) -> Result<Vec<TraceRecord>> {
    let mut out = Vec::new();
    let mut last_ts = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::TraceFormat { line: lineno, message };
        let mut rec: TraceRecord = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        if rec.ts < last_ts {
            return Err(err(format!("timestamp {} is before {}", rec.ts, last_ts)));
        }
        last_ts = rec.ts;
        if rec.stream.is_empty() {
            return Err(err("empty stream name".into()));
        }
        let mut headers = BTreeMap::new();
        for (name, v) in rec.headers {
            let field = schema
                .resolve(&name)
                .ok_or_else(|| err(format!("unknown header field `{name}`")))?;
            let FieldRef::Header(canon) = field else {
                return Err(err(format!("`{name}` is metadata; put it under \"meta\"")));
            };
            let width = schema.width(&FieldRef::Header(canon.clone()));
            if v & !width_mask(width) != 0 {
                return Err(err(format!("value {v} does not fit {width}-bit field `{canon}`")));
            }
            headers.insert(canon, v);
        }
        rec.headers = headers;
        out.push(rec);
    }
    Ok(out)
}

pub fn parse_trace(text: &str, schema: &Schema) -> Result<Vec<TraceRecord>> {
    read_trace(text.as_bytes(), schema)
}

pub fn write_trace(records: &[TraceRecord], mut w: impl Write) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aliases_and_defaults() {
        let t = parse_trace(
            "{\"ts\":5,\"meta\":{\"size\":1500},\"headers\":{\"ip.src\":1}}\n\n{\"ts\":5,\"stream\":\"ctrl\"}\n",
            &Schema::default(),
        )
        .unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].stream, "pkts");
        assert_eq!(t[0].headers.get("ipv4.src"), Some(&1));
        assert_eq!(t[1].stream, "ctrl");
    }

    #[test]
    fn rejects_bad_records() {
        let s = Schema::default();
        let e = parse_trace("{\"ts\":5}\n{\"ts\":4}\n", &s).unwrap_err();
        assert!(matches!(e, Error::TraceFormat { line: 2, .. }));
        assert!(parse_trace("{\"ts\":1,\"headers\":{\"ipv4.tos\":256}}", &s).is_err());
        assert!(parse_trace("{\"ts\":1,\"headers\":{\"nope.x\":1}}", &s).is_err());
        assert!(parse_trace("not json", &s).is_err());
    }

    #[test]
    fn hop_meta_overrides_one_switch() {
        let t = parse_trace(
            "{\"ts\":1,\"meta\":{\"in_queue_length\":3},\"hop_meta\":{\"2\":{\"in_queue_length\":9}}}",
            &Schema::default(),
        )
        .unwrap();
        assert_eq!(t[0].packet_at(1).meta.in_queue_length, 3);
        assert_eq!(t[0].packet_at(2).meta.in_queue_length, 9);
        assert_eq!(t[0].packet_at(2).meta.switch_id, 2);
    }
}
