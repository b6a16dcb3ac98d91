use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BloomAlg {
    Membership,
    Counting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SketchAlg {
    CountMin,
    Pcsa,
    Hyperloglog,
    Store,
}

impl BloomAlg {
    pub fn name(self) -> &'static str {
        match self {
            BloomAlg::Membership => "membership",
            BloomAlg::Counting => "counting",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "membership" => Some(BloomAlg::Membership),
            "counting" => Some(BloomAlg::Counting),
            _ => None,
        }
    }
}

impl SketchAlg {
    pub fn name(self) -> &'static str {
        match self {
            SketchAlg::CountMin => "count-min",
            SketchAlg::Pcsa => "pcsa",
            SketchAlg::Hyperloglog => "hyperloglog",
            SketchAlg::Store => "store",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "count-min" | "countmin" => Some(SketchAlg::CountMin),
            "pcsa" => Some(SketchAlg::Pcsa),
            "hyperloglog" | "hll" => Some(SketchAlg::Hyperloglog),
            "store" => Some(SketchAlg::Store),
            _ => None,
        }
    }
}

/// Default cell width for counting Bloom filters and count-min/store sketches.
pub const DEFAULT_CELL_WIDTH: u32 = 32;
pub const PCSA_BITMAP_WIDTH: u32 = 32;
pub const HLL_REGISTER_WIDTH: u32 = 6;

/// The kind of a declared state variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Counter {
        width: u32,
    },
    Timestamp,
    BloomFilter {
        alg: BloomAlg,
        key: String,
        nhash: u32,
        size: u32,
        width: u32,
    },
    Sketch {
        alg: SketchAlg,
        key: String,
        nhash: u32,
        size: u32,
        width: u32,
    },
    HashMap {
        key: String,
        size: u32,
        inner: Box<StateKind>,
    },
}

/// Cell layout of one instance: `rows x cols` cells of `width` bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Geometry {
    pub rows: u32,
    pub cols: u32,
    pub width: u32,
}

impl Geometry {
    pub fn cells(&self) -> usize {
        self.rows as usize * self.cols as usize
    }
}

impl StateKind {
    /// Layout of a single instance (for a HashMap, of one slot).
    pub fn geometry(&self) -> Geometry {
        match self {
            StateKind::Counter { width } => Geometry {
                rows: 1,
                cols: 1,
                width: *width,
            },
            StateKind::Timestamp => Geometry {
                rows: 1,
                cols: 1,
                width: 64,
            },
            StateKind::BloomFilter { alg, size, width, .. } => Geometry {
                rows: 1,
                cols: *size,
                width: match alg {
                    BloomAlg::Membership => 1,
                    BloomAlg::Counting => *width,
                },
            },
            StateKind::Sketch {
                alg,
                nhash,
                size,
                width,
                ..
            } => match alg {
                SketchAlg::CountMin | SketchAlg::Store => Geometry {
                    rows: *nhash,
                    cols: *size,
                    width: *width,
                },
                SketchAlg::Pcsa => Geometry {
                    rows: 1,
                    cols: *size,
                    width: PCSA_BITMAP_WIDTH,
                },
                SketchAlg::Hyperloglog => Geometry {
                    rows: 1,
                    cols: *size,
                    width: HLL_REGISTER_WIDTH,
                },
            },
            StateKind::HashMap { inner, .. } => inner.geometry(),
        }
    }

    /// Number of HashMap slots (1 for plain variables).
    pub fn slots(&self) -> u32 {
        match self {
            StateKind::HashMap { size, .. } => *size,
            _ => 1,
        }
    }

    /// The kind of each instance, looking through HashMap.
    pub fn instance(&self) -> &StateKind {
        match self {
            StateKind::HashMap { inner, .. } => inner.instance(),
            other => other,
        }
    }

    pub fn total_cells(&self) -> usize {
        self.slots() as usize * self.geometry().cells()
    }

    pub fn memory_bits(&self) -> u64 {
        self.total_cells() as u64 * self.geometry().width as u64
    }

    /// Name of the flow key the instance hashes with, if any.
    pub fn hash_key(&self) -> Option<&str> {
        match self.instance() {
            StateKind::BloomFilter { key, .. } | StateKind::Sketch { key, .. } => Some(key),
            _ => None,
        }
    }

    pub fn nhash(&self) -> u32 {
        match self.instance() {
            StateKind::BloomFilter { nhash, .. } | StateKind::Sketch { nhash, .. } => *nhash,
            _ => 0,
        }
    }

    pub fn is_membership(&self) -> bool {
        matches!(
            self.instance(),
            StateKind::BloomFilter {
                alg: BloomAlg::Membership,
                ..
            }
        )
    }

    pub fn type_name(&self) -> &'static str {
        match self.instance() {
            StateKind::Counter { .. } => "Counter",
            StateKind::Timestamp => "Timestamp",
            StateKind::BloomFilter { .. } => "BloomFilter",
            StateKind::Sketch { .. } => "Sketch",
            StateKind::HashMap { .. } => unreachable!(),
        }
    }

    /// Checks the declaration invariants; returns a message on failure.
    pub fn check(&self) -> Result<(), String> {
        let width_ok = |w: u32| {
            if (1..=64).contains(&w) {
                Ok(())
            } else {
                Err(format!("width must be in 1..=64, got {w}"))
            }
        };
        match self {
            StateKind::Counter { width } => width_ok(*width),
            StateKind::Timestamp => Ok(()),
            StateKind::BloomFilter { nhash, size, width, .. } => {
                if *nhash < 1 {
                    return Err("nhash must be at least 1".into());
                }
                if *size < 1 {
                    return Err("size must be at least 1".into());
                }
                width_ok(*width)
            }
            StateKind::Sketch {
                alg,
                nhash,
                size,
                width,
                ..
            } => {
                if *nhash < 1 {
                    return Err("nhash must be at least 1".into());
                }
                if *size < 1 {
                    return Err("size must be at least 1".into());
                }
                if matches!(alg, SketchAlg::Pcsa | SketchAlg::Hyperloglog) && !size.is_power_of_two() {
                    return Err(format!("{} size must be a power of two", alg.name()));
                }
                width_ok(*width)
            }
            StateKind::HashMap { size, inner, .. } => {
                if *size < 1 {
                    return Err("size must be at least 1".into());
                }
                if matches!(**inner, StateKind::HashMap { .. }) {
                    return Err("HashMap of HashMap is not supported".into());
                }
                inner.check()
            }
        }
    }
}

impl fmt::Display for StateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateKind::Counter { width } => write!(f, "Counter(width={width})"),
            StateKind::Timestamp => write!(f, "Timestamp()"),
            StateKind::BloomFilter {
                alg,
                key,
                nhash,
                size,
                width,
            } => {
                write!(
                    f,
                    "BloomFilter(alg=\"{}\", key={key}, nhash={nhash}, size={size}",
                    alg.name()
                )?;
                if *alg == BloomAlg::Counting || *width != DEFAULT_CELL_WIDTH {
                    write!(f, ", width={width}")?;
                }
                write!(f, ")")
            }
            StateKind::Sketch {
                alg,
                key,
                nhash,
                size,
                width,
            } => {
                write!(
                    f,
                    "Sketch(alg=\"{}\", key={key}, nhash={nhash}, size={size}",
                    alg.name()
                )?;
                if matches!(alg, SketchAlg::CountMin | SketchAlg::Store) || *width != DEFAULT_CELL_WIDTH {
                    write!(f, ", width={width}")?;
                }
                write!(f, ")")
            }
            StateKind::HashMap { key, size, inner } => {
                write!(f, "HashMap(key={key}, size={size}, type={inner})")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashmap_memory_includes_slots() {
        let k = StateKind::HashMap {
            key: "flowid".into(),
            size: 1024,
            inner: Box::new(StateKind::Counter { width: 32 }),
        };
        assert_eq!(k.total_cells(), 1024);
        assert_eq!(k.memory_bits(), 1024 * 32);
    }

    #[test]
    fn sketch_geometry() {
        let cm = StateKind::Sketch {
            alg: SketchAlg::CountMin,
            key: "k".into(),
            nhash: 4,
            size: 256,
            width: 32,
        };
        assert_eq!(cm.total_cells(), 1024);
        let hll = StateKind::Sketch {
            alg: SketchAlg::Hyperloglog,
            key: "k".into(),
            nhash: 1,
            size: 100,
            width: 32,
        };
        assert!(hll.check().is_err());
        assert_eq!(hll.geometry().width, HLL_REGISTER_WIDTH);
    }

    #[test]
    fn width_bounds() {
        assert!(StateKind::Counter { width: 0 }.check().is_err());
        assert!(StateKind::Counter { width: 65 }.check().is_err());
        assert!(StateKind::Counter { width: 64 }.check().is_ok());
    }
}
