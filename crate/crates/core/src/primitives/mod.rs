//! Stateful data structures: counters, timestamps, Bloom filters, count-min,
//! store, PCSA and HyperLogLog sketches, and the per-switch [`StateStore`].

pub mod bloom;
pub mod cardinality;
pub mod cells;
pub mod sketch;
pub mod store;

pub use bloom::BloomFilter;
pub use cardinality::Cardinality;
pub use cells::{CellAccess, Cells, CellsRead, Overlay};
pub use sketch::CountMin;
pub use store::{StateLayout, StateStore, VarDump, VarInfo, DEFAULT_RESET_CHUNK};
