//! Named scenarios: builtin topologies with app placement and start
//! schedules, TOML topology files, and the run/output helpers shared by
//! the CLI and tests.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::engine::{EngineError, NodeRole, NodeSpec, RunReport, SimConfig, Simulator};
use crate::strategy::StrategyKind;
use crate::time::SimTime;
use crate::torrent::{TorrentError, TorrentParams};
use crate::trace::DEFAULT_TRACE_INTERVAL;

pub const BUILTIN_SCENARIOS: &[&str] = &[
    "ntorrent-simple",
    "multi-consumer",
    "fully-connected",
    "forwarding-scenario",
    "router-node-degree-3",
    "router-node-degree-4",
];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario '{0}' (expected one of {}, or from-file)", BUILTIN_SCENARIOS.join(", "))]
    UnknownScenario(String),
    #[error("scenario 'from-file' requires --topology-file")]
    MissingTopologyFile,
    #[error("unknown node '{0}' in start override")]
    UnknownStartNode(String),
    #[error("unknown node '{0}' referenced by a link")]
    UnknownLinkNode(String),
    #[error("unknown role '{0}' (expected seeder, leecher or router)")]
    UnknownRole(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Torrent(#[from] TorrentError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("topology file error: {0}")]
    Io(#[from] io::Error),
    #[error("topology file parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

/// Everything needed to build and run one simulation.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub torrent: TorrentParams,
    /// Default link data rate, used where a scenario does not pin one.
    pub data_rate_bps: u64,
    /// Default link delay, used where a scenario does not pin one.
    pub delay: SimTime,
    pub strategy: StrategyKind,
    pub seed: u64,
    pub max_sim_time: SimTime,
    pub trace_interval: SimTime,
    pub strict_phase_barrier: bool,
    pub router_cs_disabled: bool,
    /// Per-node start-time overrides, milliseconds.
    pub start_overrides: BTreeMap<String, u64>,
    pub topology_file: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scenario: "ntorrent-simple".to_string(),
            torrent: TorrentParams::default(),
            data_rate_bps: 1_000_000,
            delay: SimTime::from_ms(10),
            strategy: StrategyKind::Ntorrent,
            seed: 1,
            max_sim_time: crate::engine::DEFAULT_MAX_SIM_TIME,
            trace_interval: DEFAULT_TRACE_INTERVAL,
            strict_phase_barrier: false,
            router_cs_disabled: false,
            start_overrides: BTreeMap::new(),
            topology_file: None,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.torrent.validate()?;
        if self.data_rate_bps == 0 {
            return Err(ScenarioError::Invalid("data rate must be positive".into()));
        }
        if self.delay.as_ns() == 0 {
            return Err(ScenarioError::Invalid("link delay must be positive".into()));
        }
        if self.max_sim_time.as_ns() == 0 {
            return Err(ScenarioError::Invalid("max sim time must be positive".into()));
        }
        if self.trace_interval.as_ns() == 0 {
            return Err(ScenarioError::Invalid("trace interval must be positive".into()));
        }
        Ok(())
    }

    fn sim_config(&self) -> SimConfig {
        SimConfig {
            torrent: self.torrent.clone(),
            strategy: self.strategy,
            seed: self.seed,
            max_sim_time: self.max_sim_time,
            trace_interval: self.trace_interval,
            strict_phase_barrier: self.strict_phase_barrier,
            router_cs_disabled: self.router_cs_disabled,
        }
    }
}

/// Declarative description consumed by the builder: nodes with roles and
/// start times, links with per-link rate/delay.
struct Blueprint {
    nodes: Vec<NodeSpec>,
    /// (a name, b name, rate bps, delay)
    links: Vec<(&'static str, &'static str, u64, SimTime)>,
}

const CONSUMER_START_MS: u64 = 1_000;
const ACCESS_DELAY: SimTime = SimTime(5_000_000);

fn node(name: &str, role: NodeRole, start_ms: u64) -> NodeSpec {
    NodeSpec {
        name: name.to_string(),
        role,
        start_time: SimTime::from_ms(start_ms),
    }
}

/// One seeder and one consumer on a direct link.
fn ntorrent_simple(cfg: &ScenarioConfig) -> Blueprint {
    Blueprint {
        nodes: vec![
            node("S", NodeRole::Seeder, 0),
            node("C", NodeRole::Leecher, CONSUMER_START_MS),
        ],
        links: vec![("S", "C", cfg.data_rate_bps, cfg.delay)],
    }
}

/// A seeder and a late consumer behind an earlier one, so the late
/// consumer's objects come from its completed peer.
fn multi_consumer(cfg: &ScenarioConfig) -> Blueprint {
    Blueprint {
        nodes: vec![
            node("S", NodeRole::Seeder, 0),
            node("R1", NodeRole::Router, 0),
            node("C1", NodeRole::Leecher, CONSUMER_START_MS),
            node("C2", NodeRole::Leecher, 8_000),
        ],
        links: vec![
            ("S", "R1", cfg.data_rate_bps, cfg.delay),
            ("R1", "C1", cfg.data_rate_bps, ACCESS_DELAY),
            ("C1", "C2", cfg.data_rate_bps, ACCESS_DELAY),
        ],
    }
}

/// Seeder plus three consumers, every pair directly connected.
fn fully_connected(cfg: &ScenarioConfig) -> Blueprint {
    let names = ["S", "P1", "P2", "P3"];
    let mut links = Vec::new();
    for i in 0..names.len() {
        for j in (i + 1)..names.len() {
            links.push((names[i], names[j], cfg.data_rate_bps, cfg.delay));
        }
    }
    Blueprint {
        nodes: vec![
            node("S", NodeRole::Seeder, 0),
            node("P1", NodeRole::Leecher, CONSUMER_START_MS),
            node("P2", NodeRole::Leecher, CONSUMER_START_MS),
            node("P3", NodeRole::Leecher, CONSUMER_START_MS),
        ],
        links,
    }
}

/// A diamond between producer and consumer: two router paths with
/// asymmetric delays.
fn forwarding_scenario(cfg: &ScenarioConfig) -> Blueprint {
    let r = cfg.data_rate_bps;
    Blueprint {
        nodes: vec![
            node("S", NodeRole::Seeder, 0),
            node("R1", NodeRole::Router, 0),
            node("R2", NodeRole::Router, 0),
            node("R3", NodeRole::Router, 0),
            node("R4", NodeRole::Router, 0),
            node("C", NodeRole::Leecher, CONSUMER_START_MS),
        ],
        links: vec![
            ("S", "R1", r, ACCESS_DELAY),
            ("R1", "R2", r, SimTime::from_ms(10)),
            ("R1", "R3", r, SimTime::from_ms(30)),
            ("R2", "R4", r, SimTime::from_ms(10)),
            ("R3", "R4", r, SimTime::from_ms(5)),
            ("R4", "C", r, ACCESS_DELAY),
        ],
    }
}

/// Router chain R1-R2-R3 with bottleneck inter-router links; five peers,
/// the first of which seeds. Every router has degree 3.
fn degree_3(cfg: &ScenarioConfig) -> Blueprint {
    let access = cfg.data_rate_bps;
    let bottleneck = 256_000;
    Blueprint {
        nodes: vec![
            node("P1", NodeRole::Seeder, 0),
            node("P2", NodeRole::Leecher, CONSUMER_START_MS),
            node("P3", NodeRole::Leecher, CONSUMER_START_MS),
            node("P4", NodeRole::Leecher, CONSUMER_START_MS),
            node("P5", NodeRole::Leecher, CONSUMER_START_MS),
            node("R1", NodeRole::Router, 0),
            node("R2", NodeRole::Router, 0),
            node("R3", NodeRole::Router, 0),
        ],
        links: vec![
            ("P1", "R1", access, ACCESS_DELAY),
            ("P2", "R1", access, ACCESS_DELAY),
            ("P3", "R2", access, ACCESS_DELAY),
            ("P4", "R3", access, ACCESS_DELAY),
            ("P5", "R3", access, ACCESS_DELAY),
            ("R1", "R2", bottleneck, SimTime::from_ms(10)),
            ("R2", "R3", bottleneck, SimTime::from_ms(10)),
        ],
    }
}

/// Four routers in a full mesh with unequal delays, one peer per router
/// (router degree 4); staggered consumer starts.
fn degree_4(cfg: &ScenarioConfig) -> Blueprint {
    let r = cfg.data_rate_bps;
    Blueprint {
        nodes: vec![
            node("S", NodeRole::Seeder, 0),
            node("P1", NodeRole::Leecher, 1_000),
            node("P2", NodeRole::Leecher, 11_000),
            node("P3", NodeRole::Leecher, 6_000),
            node("R1", NodeRole::Router, 0),
            node("R2", NodeRole::Router, 0),
            node("R3", NodeRole::Router, 0),
            node("R4", NodeRole::Router, 0),
        ],
        links: vec![
            ("R1", "R2", r, SimTime::from_ms(10)),
            ("R1", "R3", r, SimTime::from_ms(20)),
            ("R1", "R4", r, SimTime::from_ms(30)),
            ("R2", "R3", r, SimTime::from_ms(15)),
            ("R2", "R4", r, SimTime::from_ms(25)),
            ("R3", "R4", r, SimTime::from_ms(10)),
            ("P1", "R1", r, ACCESS_DELAY),
            ("P2", "R2", r, ACCESS_DELAY),
            ("P3", "R3", r, ACCESS_DELAY),
            ("S", "R4", r, ACCESS_DELAY),
        ],
    }
}

// --- topology files -------------------------------------------------------

#[derive(Debug, Deserialize)]
struct TopologyFile {
    #[serde(default, rename = "node")]
    nodes: Vec<NodeEntry>,
    #[serde(default, rename = "link")]
    links: Vec<LinkEntry>,
}

#[derive(Debug, Deserialize)]
struct NodeEntry {
    name: String,
    role: String,
    #[serde(default)]
    start_ms: u64,
}

#[derive(Debug, Deserialize)]
struct LinkEntry {
    a: String,
    b: String,
    rate: Option<u64>,
    delay_ms: Option<f64>,
}

fn parse_role(role: &str) -> Result<NodeRole, ScenarioError> {
    match role {
        "seeder" => Ok(NodeRole::Seeder),
        "leecher" | "consumer" => Ok(NodeRole::Leecher),
        "router" => Ok(NodeRole::Router),
        other => Err(ScenarioError::UnknownRole(other.to_string())),
    }
}

fn build_from_file(cfg: &ScenarioConfig, path: &Path) -> Result<Simulator, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    let file: TopologyFile = toml::from_str(&text)?;
    let mut sim = Simulator::new(cfg.sim_config());
    let mut ids = BTreeMap::new();
    for entry in &file.nodes {
        let id = sim.create_and_install(NodeSpec {
            name: entry.name.clone(),
            role: parse_role(&entry.role)?,
            start_time: SimTime::from_ms(entry.start_ms),
        })?;
        ids.insert(entry.name.clone(), id);
    }
    for link in &file.links {
        let a = *ids
            .get(&link.a)
            .ok_or_else(|| ScenarioError::UnknownLinkNode(link.a.clone()))?;
        let b = *ids
            .get(&link.b)
            .ok_or_else(|| ScenarioError::UnknownLinkNode(link.b.clone()))?;
        let rate = link.rate.unwrap_or(cfg.data_rate_bps);
        let delay = link
            .delay_ms
            .map(SimTime::from_ms_f64)
            .unwrap_or(cfg.delay);
        sim.create_link(a, b, rate, delay)?;
    }
    Ok(sim)
}

// --- builder --------------------------------------------------------------

fn build_from_blueprint(cfg: &ScenarioConfig, bp: Blueprint) -> Result<Simulator, ScenarioError> {
    let mut sim = Simulator::new(cfg.sim_config());
    let mut ids = BTreeMap::new();
    for spec in bp.nodes {
        let name = spec.name.clone();
        let id = sim.create_and_install(spec)?;
        ids.insert(name, id);
    }
    for (a, b, rate, delay) in bp.links {
        sim.create_link(ids[a], ids[b], rate, delay)?;
    }
    Ok(sim)
}

/// Builds the simulator for a validated config, applying start overrides.
pub fn build_scenario(cfg: &ScenarioConfig) -> Result<Simulator, ScenarioError> {
    cfg.validate()?;
    let mut sim = match cfg.scenario.as_str() {
        "ntorrent-simple" => build_from_blueprint(cfg, ntorrent_simple(cfg))?,
        "multi-consumer" => build_from_blueprint(cfg, multi_consumer(cfg))?,
        "fully-connected" => build_from_blueprint(cfg, fully_connected(cfg))?,
        "forwarding-scenario" => build_from_blueprint(cfg, forwarding_scenario(cfg))?,
        "router-node-degree-3" => build_from_blueprint(cfg, degree_3(cfg))?,
        "router-node-degree-4" => build_from_blueprint(cfg, degree_4(cfg))?,
        "from-file" => {
            let path = cfg
                .topology_file
                .as_deref()
                .ok_or(ScenarioError::MissingTopologyFile)?;
            build_from_file(cfg, path)?
        }
        other => return Err(ScenarioError::UnknownScenario(other.to_string())),
    };
    for (name, ms) in &cfg.start_overrides {
        sim.set_start_time(name, SimTime::from_ms(*ms))
            .map_err(|_| ScenarioError::UnknownStartNode(name.clone()))?;
    }
    Ok(sim)
}

/// Runs a config end to end; returns the simulator (for traces and table
/// dumps) together with the report.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<(Simulator, RunReport), ScenarioError> {
    let mut sim = build_scenario(cfg)?;
    let report = sim.run();
    Ok((sim, report))
}

/// End-of-run summary: one CSV row per app node, then one JSON completion
/// line per consumer.
pub fn write_metrics<W: Write>(sim: &Simulator, report: &RunReport, mut out: W) -> io::Result<()> {
    writeln!(
        out,
        "node,role,interests_sent,interests_satisfied,isr,avg_delay_ms,finish_ms"
    )?;
    let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_default();
    for node in sim.nodes() {
        match node.role {
            NodeRole::Seeder => {
                writeln!(out, "{},seeder,0,0,,,", node.name)?;
            }
            NodeRole::Leecher => {
                let c = report
                    .consumers
                    .iter()
                    .find(|c| c.node == node.id)
                    .expect("every leecher has a summary");
                writeln!(
                    out,
                    "{},leecher,{},{},{},{},{}",
                    node.name,
                    c.interests_sent,
                    c.interests_satisfied,
                    c.isr.map(|x| format!("{x:.4}")).unwrap_or_default(),
                    fmt_opt(c.avg_delay_ms),
                    fmt_opt(c.finish_ms),
                )?;
            }
            NodeRole::Router => {}
        }
    }
    for c in &report.consumers {
        let line = serde_json::json!({
            "node": c.name,
            "start_ms": c.start_ms,
            "finish_ms": c.finish_ms,
            "interests_sent": c.interests_sent,
            "isr": c.isr,
            "avg_delay_ms": c.avg_delay_ms,
            "completed": c.completed,
        });
        writeln!(out, "{line}")?;
    }
    Ok(())
}
