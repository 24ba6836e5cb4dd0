//! Workload-driven replicated data placement.

pub mod algos;
pub mod error;
pub mod harness;
pub mod hgr;
pub mod hypergraph;
pub mod oracle;
pub mod partitioner;
pub mod placement;
pub mod span;
pub mod workload;

pub use error::{Error, Result};
pub use hypergraph::{build_hypergraph, build_hypergraph_with_items, DataItem, EdgeId, Hyperedge, Hypergraph, IdMap, ItemId, Weight};
pub use placement::{PartId, Placement, PlacementFile, ReplicaLedger};
