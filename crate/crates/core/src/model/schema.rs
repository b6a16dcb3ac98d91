//! Header schema: the set of packet fields a program may reference.
//!
//! A schema file is a flat JSON object. Integer values declare a header field
//! and its bit width; string values declare an alias for another field:
//!
//! ```json
//! { "vxlan.vni": 24, "vni": "vxlan.vni" }
//! ```
//!
//! Switch metadata (`pkt.size`, `pkt.input_port`, `pkt.output_port`,
//! `pkt.in_queue_length`, `pkt.ts`, `switch.id`) is always available and
//! cannot be redefined.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Switch metadata attached to every packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetaField {
    InputPort,
    OutputPort,
    Size,
    InQueueLength,
    SwitchId,
    Ts,
}

impl MetaField {
    pub const ALL: [MetaField; 6] = [
        MetaField::InputPort,
        MetaField::OutputPort,
        MetaField::Size,
        MetaField::InQueueLength,
        MetaField::SwitchId,
        MetaField::Ts,
    ];

    /// Name used in program text.
    pub fn name(self) -> &'static str {
        match self {
            MetaField::InputPort => "pkt.input_port",
            MetaField::OutputPort => "pkt.output_port",
            MetaField::Size => "pkt.size",
            MetaField::InQueueLength => "pkt.in_queue_length",
            MetaField::SwitchId => "switch.id",
            MetaField::Ts => "pkt.ts",
        }
    }

    /// Key used in the `meta` object of trace and sink records.
    pub fn json_key(self) -> &'static str {
        match self {
            MetaField::InputPort => "input_port",
            MetaField::OutputPort => "output_port",
            MetaField::Size => "size",
            MetaField::InQueueLength => "in_queue_length",
            MetaField::SwitchId => "switch_id",
            MetaField::Ts => "ts",
        }
    }

    pub fn width(self) -> u32 {
        match self {
            MetaField::InputPort | MetaField::OutputPort | MetaField::SwitchId => 16,
            MetaField::Size | MetaField::InQueueLength => 32,
            MetaField::Ts => 64,
        }
    }

    pub fn from_name(name: &str) -> Option<MetaField> {
        MetaField::ALL.into_iter().find(|m| m.name() == name)
    }

    pub fn from_json_key(key: &str) -> Option<MetaField> {
        MetaField::ALL.into_iter().find(|m| m.json_key() == key)
    }
}

/// A resolved reference to a packet field.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FieldRef {
    Meta(MetaField),
    Header(String),
}

impl FieldRef {
    pub fn name(&self) -> &str {
        match self {
            FieldRef::Meta(m) => m.name(),
            FieldRef::Header(h) => h,
        }
    }

    /// Parses a canonical name without consulting a schema.
    pub fn from_canonical(name: &str) -> FieldRef {
        match MetaField::from_name(name) {
            Some(m) => FieldRef::Meta(m),
            None => FieldRef::Header(name.to_string()),
        }
    }
}

impl fmt::Display for FieldRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for FieldRef {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for FieldRef {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        Ok(FieldRef::from_canonical(&name))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum SchemaEntry {
    Width(u32),
    Alias(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    headers: BTreeMap<String, u32>,
    aliases: BTreeMap<String, String>,
}

const DEFAULT_HEADERS: &[(&str, u32)] = &[
    ("ipv4.src", 32),
    ("ipv4.dst", 32),
    ("ipv4.proto", 8),
    ("ipv4.tos", 8),
    ("ipv4.id", 16),
    ("ipv4.checksum", 16),
    ("ipv4.ttl", 8),
    ("ipv4.len", 16),
    ("tcp.src", 16),
    ("tcp.dst", 16),
    ("tcp.flags", 8),
    ("pkt.request", 32),
    ("pkt.hh_volume", 32),
    ("segway_header.msg", 8),
    ("segway_header.ts", 32),
    ("segway_header.time", 64),
];

const DEFAULT_ALIASES: &[(&str, &str)] = &[
    ("ip.src", "ipv4.src"),
    ("ip.dst", "ipv4.dst"),
    ("ip.dest", "ipv4.dst"),
    ("ipv4.dest", "ipv4.dst"),
    ("ip.proto", "ipv4.proto"),
    ("ip.tos", "ipv4.tos"),
    ("ip.id", "ipv4.id"),
    ("ipv4.identification", "ipv4.id"),
    ("ip.checksum", "ipv4.checksum"),
    ("tcp.dest", "tcp.dst"),
];

impl Default for Schema {
    fn default() -> Self {
        Schema {
            headers: DEFAULT_HEADERS.iter().map(|(n, w)| (n.to_string(), *w)).collect(),
            aliases: DEFAULT_ALIASES
                .iter()
                .map(|(a, t)| (a.to_string(), t.to_string()))
                .collect(),
        }
    }
}

impl Schema {
    /// A schema with no header fields; metadata remains available.
    pub fn empty() -> Self {
        Schema {
            headers: BTreeMap::new(),
            aliases: BTreeMap::new(),
        }
    }

    /// Adds the entries of a schema file on top of `self`.
    pub fn extend_from_json(&mut self, text: &str) -> Result<()> {
        let entries: BTreeMap<String, SchemaEntry> = serde_json::from_str(text)?;
        for (name, entry) in &entries {
            if MetaField::from_name(name).is_some() {
                return Err(Error::Schema(format!("`{name}` is reserved metadata")));
            }
            if let SchemaEntry::Width(w) = entry {
                self.add_header(name, *w)?;
            }
        }
        for (name, entry) in entries {
            if let SchemaEntry::Alias(target) = entry {
                if self.resolve(&target).is_none() {
                    return Err(Error::Schema(format!(
                        "alias `{name}` points at unknown field `{target}`"
                    )));
                }
                self.aliases.insert(name, target);
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Schema> {
        let mut schema = Schema::default();
        schema.extend_from_json(&std::fs::read_to_string(path)?)?;
        Ok(schema)
    }

    pub fn add_header(&mut self, name: &str, width: u32) -> Result<()> {
        if !(1..=64).contains(&width) {
            return Err(Error::Schema(format!(
                "field `{name}` has width {width}, expected 1..=64"
            )));
        }
        self.headers.insert(name.to_string(), width);
        Ok(())
    }

    /// Resolves a name as written in a program or trace to its canonical field.
    ///
    /// Lookup order: metadata, header, alias, then the same name with a
    /// leading `pkt.` removed (`pkt.ipv4.tos` is `ipv4.tos`).
    pub fn resolve(&self, name: &str) -> Option<FieldRef> {
        if let Some(m) = MetaField::from_name(name) {
            return Some(FieldRef::Meta(m));
        }
        if self.headers.contains_key(name) {
            return Some(FieldRef::Header(name.to_string()));
        }
        if let Some(target) = self.aliases.get(name) {
            return self.resolve(target);
        }
        name.strip_prefix("pkt.")
            .and_then(|rest| if rest.contains('.') { self.resolve(rest) } else { None })
    }

    pub fn width(&self, field: &FieldRef) -> u32 {
        match field {
            FieldRef::Meta(m) => m.width(),
            FieldRef::Header(h) => self.headers.get(h).copied().unwrap_or(64),
        }
    }

    pub fn headers(&self) -> impl Iterator<Item = (&str, u32)> {
        self.headers.iter().map(|(n, w)| (n.as_str(), *w))
    }
}

/// Bit mask for a field of `width` bits.
pub fn width_mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aliases_resolve_to_canonical_names() {
        let s = Schema::default();
        assert_eq!(s.resolve("ip.src"), s.resolve("ipv4.src"));
        assert_eq!(
            s.resolve("ipv4.identification"),
            Some(FieldRef::Header("ipv4.id".into()))
        );
        assert_eq!(s.resolve("pkt.ipv4.tos"), Some(FieldRef::Header("ipv4.tos".into())));
        assert_eq!(s.resolve("switch.id"), Some(FieldRef::Meta(MetaField::SwitchId)));
        assert_eq!(s.resolve("pkt.bogus"), None);
    }

    #[test]
    fn schema_file_extends_defaults() {
        let mut s = Schema::default();
        s.extend_from_json(r#"{"vxlan.vni": 24, "vni": "vxlan.vni"}"#).unwrap();
        assert_eq!(s.resolve("vni"), Some(FieldRef::Header("vxlan.vni".into())));
        assert_eq!(s.width(&FieldRef::Header("vxlan.vni".into())), 24);
        assert!(s.extend_from_json(r#"{"x": 65}"#).is_err());
        assert!(s.extend_from_json(r#"{"pkt.size": 8}"#).is_err());
        assert!(s.extend_from_json(r#"{"y": "nowhere"}"#).is_err());
    }

    #[test]
    fn masks() {
        assert_eq!(width_mask(1), 1);
        assert_eq!(width_mask(8), 0xff);
        assert_eq!(width_mask(64), u64::MAX);
    }
}
