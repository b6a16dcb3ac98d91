use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::model::{Meta, Packet};

/// A packet handed to `collect(endpoint)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SinkRecord {
    pub endpoint: String,
    /// Trace timestamp of the packet that caused the emission.
    pub ts: u64,
    pub packet_index: usize,
    pub switch_id: u16,
    /// Stream the collected packet was travelling on.
    pub stream: String,
    pub meta: Meta,
    pub headers: BTreeMap<String, u64>,
}

impl SinkRecord {
    pub fn new(endpoint: String, packet_index: usize, switch_id: u16, p: Packet) -> Self {
        SinkRecord {
            endpoint,
            ts: p.ts,
            packet_index,
            switch_id,
            stream: p.stream,
            meta: p.meta,
            headers: p.headers,
        }
    }

    pub fn header(&self, name: &str) -> u64 {
        self.headers.get(name).copied().unwrap_or(0)
    }
}

/// Records grouped by endpoint, in emission order.
pub type Sinks = BTreeMap<String, Vec<SinkRecord>>;

/// The JSON Lines file content for one endpoint.
pub fn to_jsonl(records: &[SinkRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).expect("sink records serialize");
        out.push(b'\n');
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Per-endpoint digests of the JSON Lines content.
pub fn digests(sinks: &Sinks) -> BTreeMap<String, String> {
    sinks
        .iter()
        .map(|(k, v)| (k.clone(), sha256_hex(&to_jsonl(v))))
        .collect()
}

/// One digest over every endpoint, in endpoint-name order.
pub fn combined_digest(sinks: &Sinks) -> String {
    let mut h = Sha256::new();
    for (name, records) in sinks {
        h.update(name.as_bytes());
        h.update(b"\n");
        h.update(to_jsonl(records));
    }
    hex::encode(h.finalize())
}

pub fn write_jsonl(path: &Path, records: &[SinkRecord]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&to_jsonl(records))?;
    Ok(())
}

/// Streams records as JSON Lines to a TCP listener.
pub fn send_tcp(addr: &str, sinks: &Sinks) -> Result<()> {
    let mut s = std::net::TcpStream::connect(addr)?;
    for records in sinks.values() {
        s.write_all(&to_jsonl(records))?;
    }
    s.flush()?;
    Ok(())
}
