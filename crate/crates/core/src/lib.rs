//! Deterministic discrete-event simulator of NDN nodes running the
//! nTorrent peer-to-peer file distribution protocol.
//!
//! The crate is layered bottom-up:
//!
//! - [`name`], [`time`], [`packet`]: names, simulated time and the three
//!   packet types (interest / data / nack).
//! - [`torrent`]: the torrent model — torrent-file segments, file
//!   manifests and data packets chained by digest-qualified names.
//! - [`forwarder`], [`strategy`]: the per-node forwarding pipelines
//!   (content store, PIT, FIB) and the pluggable forwarding strategies.
//! - [`routing`]: global shortest-path route computation over the
//!   topology and the announced prefix origins.
//! - [`apps`]: the producer (seeder) and consumer (leecher/peer)
//!   applications.
//! - [`engine`]: the event loop, link transmission model and node
//!   assembly.
//! - [`trace`]: periodic packet counters and CSV output.
//! - [`scenario`]: built-in topologies, TOML topology files and run
//!   helpers.

pub mod apps;
pub mod engine;
pub mod forwarder;
pub mod name;
pub mod packet;
pub mod routing;
pub mod scenario;
pub mod strategy;
pub mod time;
pub mod torrent;
pub mod trace;

pub use apps::{AppCmd, ConsumerAborted, ConsumerApp, ProducerApp};
pub use engine::{
    ConsumerSummary, EngineError, Node, NodeRole, NodeSpec, RunReport, SimConfig, Simulator,
};
pub use forwarder::{Emission, FaceKind, FibEntry, Forwarder, TableDump};
pub use name::{Name, NameError};
pub use packet::{Data, Interest, Nack, NackReason, NodeId, Packet};
pub use routing::{calculate_routes, LinkSpec, NextHop, RouteTable, Topology};
pub use scenario::{ScenarioConfig, ScenarioError};
pub use strategy::{FaceId, Metrics, Strategy, StrategyKind};
pub use time::SimTime;
pub use torrent::{build_torrent, TorrentBundle, TorrentParams};
pub use trace::{CounterType, RateSample, Tracer};
