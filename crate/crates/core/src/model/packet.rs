use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::schema::{width_mask, FieldRef, MetaField};

/// Per-hop switch metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Meta {
    pub input_port: u16,
    pub output_port: u16,
    pub size: u32,
    pub in_queue_length: u32,
    pub switch_id: u16,
}

/// Partial metadata override applied when a packet reaches one switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetaPatch {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_port: Option<u16>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_port: Option<u16>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub size: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub in_queue_length: Option<u32>,
}

impl Meta {
    pub fn apply(&mut self, patch: &MetaPatch) {
        if let Some(v) = patch.input_port {
            self.input_port = v;
        }
        if let Some(v) = patch.output_port {
            self.output_port = v;
        }
        if let Some(v) = patch.size {
            self.size = v;
        }
        if let Some(v) = patch.in_queue_length {
            self.in_queue_length = v;
        }
    }
}

/// A parsed packet: header fields, switch metadata and the stream it travels on.
///
/// Header fields absent from the packet read as 0.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Packet {
    pub ts: u64,
    pub stream: String,
    #[serde(default)]
    pub meta: Meta,
    #[serde(default)]
    pub headers: BTreeMap<String, u64>,
}

impl Packet {
    pub fn new(stream: &str, ts: u64) -> Self {
        Packet {
            ts,
            stream: stream.to_string(),
            ..Packet::default()
        }
    }

    pub fn get(&self, field: &FieldRef) -> u64 {
        match field {
            FieldRef::Meta(m) => match m {
                MetaField::InputPort => self.meta.input_port as u64,
                MetaField::OutputPort => self.meta.output_port as u64,
                MetaField::Size => self.meta.size as u64,
                MetaField::InQueueLength => self.meta.in_queue_length as u64,
                MetaField::SwitchId => self.meta.switch_id as u64,
                MetaField::Ts => self.ts,
            },
            FieldRef::Header(h) => self.headers.get(h).copied().unwrap_or(0),
        }
    }

    /// Writes a header field, truncating `value` to `width` bits.
    pub fn set_header(&mut self, name: &str, width: u32, value: u64) {
        self.headers.insert(name.to_string(), value & width_mask(width));
    }

    pub fn with_header(mut self, name: &str, value: u64) -> Self {
        self.headers.insert(name.to_string(), value);
        self
    }

    pub fn with_meta(mut self, meta: Meta) -> Self {
        self.meta = meta;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn absent_headers_read_zero_and_tags_truncate() {
        let mut p = Packet::new("pkts", 5);
        let id = FieldRef::Header("ipv4.id".into());
        assert_eq!(p.get(&id), 0);
        p.set_header("ipv4.id", 16, 0x1_2345);
        assert_eq!(p.get(&id), 0x2345);
        assert_eq!(p.get(&FieldRef::Meta(MetaField::Ts)), 5);
    }

    #[test]
    fn meta_patch_overrides_only_given_fields() {
        let mut m = Meta {
            input_port: 1,
            output_port: 2,
            size: 100,
            in_queue_length: 7,
            switch_id: 0,
        };
        m.apply(&MetaPatch {
            in_queue_length: Some(9),
            ..MetaPatch::default()
        });
        assert_eq!((m.input_port, m.in_queue_length), (1, 9));
    }
}
