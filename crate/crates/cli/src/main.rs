//! Command-line scenario runner.
//!
//! Exit codes: 0 when every consumer completed, 1 on configuration
//! errors, 2 when the run ended incomplete (time limit or a consumer
//! giving up), with a per-consumer progress report on stderr.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ntorrent_sim_core::scenario::{run_scenario, write_metrics, ScenarioConfig, BUILTIN_SCENARIOS};
use ntorrent_sim_core::strategy::StrategyKind;
use ntorrent_sim_core::time::SimTime;

#[derive(Parser, Debug)]
#[command(
    name = "ntorrent-sim",
    about = "Discrete-event simulator of NDN nodes running the nTorrent file distribution protocol",
    after_help = "Builtin scenarios: ntorrent-simple, multi-consumer, fully-connected, \
forwarding-scenario, router-node-degree-3, router-node-degree-4; use 'from-file' with \
--topology-file for custom topologies."
)]
struct Args {
    /// Scenario name (builtin, or 'from-file')
    #[arg(long, default_value = "ntorrent-simple")]
    scenario: String,

    /// Forwarding strategy: ntorrent | client-control
    #[arg(long, default_value = "ntorrent")]
    strategy: String,

    /// PRNG seed for interest nonces
    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Number of files in the torrent
    #[arg(long, default_value_t = 2)]
    file_count: u32,

    /// Size of each file in bytes
    #[arg(long, default_value_t = 512)]
    file_size: u32,

    /// Data packet payload size in bytes
    #[arg(long, default_value_t = 64)]
    packet_size: u32,

    /// Packet names per file manifest
    #[arg(long, default_value_t = 4)]
    names_per_manifest: u32,

    /// Manifest names per torrent-file segment
    #[arg(long, default_value_t = 2)]
    names_per_segment: u32,

    /// Default link data rate, bits per second
    #[arg(long, default_value_t = 1_000_000)]
    data_rate: u64,

    /// Default link propagation delay, milliseconds
    #[arg(long, default_value_t = 10.0)]
    delay_ms: f64,

    /// Write per-interval packet rate samples (CSV) to this path
    #[arg(long)]
    trace_out: Option<PathBuf>,

    /// Write the end-of-run per-node summary to this path
    #[arg(long)]
    metrics_out: Option<PathBuf>,

    /// Rate sampling interval, milliseconds
    #[arg(long, default_value_t = 500)]
    trace_interval_ms: u64,

    /// Simulated time limit, milliseconds
    #[arg(long, default_value_t = 60_000)]
    max_sim_time: u64,

    /// Fetch all torrent-file segments before any manifest, and all
    /// manifests before any data packet
    #[arg(long)]
    strict_phase_barrier: bool,

    /// Print each node's CS/PIT/FIB as JSON lines after the run
    #[arg(long)]
    dump_tables: bool,

    /// TOML topology file (requires --scenario from-file)
    #[arg(long)]
    topology_file: Option<PathBuf>,

    /// Override a node's app start time: <node>=<ms> (repeatable)
    #[arg(long, value_name = "NODE=MS")]
    start: Vec<String>,

    /// Debug logging
    #[arg(long, short)]
    verbose: bool,
}

fn parse_starts(args: &[String]) -> Result<BTreeMap<String, u64>, String> {
    let mut out = BTreeMap::new();
    for item in args {
        let (node, ms) = item
            .split_once('=')
            .ok_or_else(|| format!("--start expects <node>=<ms>, got '{item}'"))?;
        let ms: u64 = ms
            .parse()
            .map_err(|_| format!("--start {node}: '{ms}' is not a millisecond count"))?;
        out.insert(node.to_string(), ms);
    }
    Ok(out)
}

fn build_config(args: &Args) -> Result<ScenarioConfig, String> {
    let strategy = StrategyKind::parse(&args.strategy)
        .ok_or_else(|| format!("unknown strategy '{}' (expected ntorrent or client-control)", args.strategy))?;
    let mut config = ScenarioConfig {
        scenario: args.scenario.clone(),
        strategy,
        seed: args.seed,
        data_rate_bps: args.data_rate,
        delay: SimTime::from_ms_f64(args.delay_ms),
        max_sim_time: SimTime::from_ms(args.max_sim_time),
        trace_interval: SimTime::from_ms(args.trace_interval_ms),
        strict_phase_barrier: args.strict_phase_barrier,
        start_overrides: parse_starts(&args.start)?,
        topology_file: args.topology_file.clone(),
        ..ScenarioConfig::default()
    };
    config.torrent.file_count = args.file_count;
    config.torrent.file_size_bytes = args.file_size;
    config.torrent.packet_size_bytes = args.packet_size;
    config.torrent.names_per_manifest = args.names_per_manifest;
    config.torrent.names_per_segment = args.names_per_segment;
    if !args.scenario.as_str().eq("from-file")
        && !BUILTIN_SCENARIOS.contains(&args.scenario.as_str())
    {
        return Err(format!(
            "unknown scenario '{}' (expected one of {}, or from-file)",
            args.scenario,
            BUILTIN_SCENARIOS.join(", ")
        ));
    }
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

fn main() -> ExitCode {
    let args = Args::parse();
    env_logger::Builder::new()
        .filter_level(if args.verbose {
            log::LevelFilter::Debug
        } else {
            log::LevelFilter::Info
        })
        .init();

    let config = match build_config(&args) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("configuration error: {msg}");
            return ExitCode::from(1);
        }
    };

    let (sim, report) = match run_scenario(&config) {
        Ok(pair) => pair,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(1);
        }
    };

    if let Some(path) = &args.trace_out {
        if let Err(e) = sim.tracer().write_csv_to_path(path, &sim.node_names()) {
            eprintln!("failed to write trace {}: {e}", path.display());
            return ExitCode::from(1);
        }
    }
    if let Some(path) = &args.metrics_out {
        let write = std::fs::File::create(path)
            .map_err(|e| e.to_string())
            .and_then(|f| {
                write_metrics(&sim, &report, std::io::BufWriter::new(f)).map_err(|e| e.to_string())
            });
        if let Err(e) = write {
            eprintln!("failed to write metrics {}: {e}", path.display());
            return ExitCode::from(1);
        }
    }
    if args.dump_tables {
        for dump in sim.dump_tables() {
            println!("{}", serde_json::to_string(&dump).expect("table dumps serialize"));
        }
    }

    for v in &report.violations {
        eprintln!("invariant violation: {v}");
    }

    if report.completed_all && report.violations.is_empty() {
        println!(
            "completed at {}: {} consumer(s) finished",
            report.end_time,
            report.consumers.len()
        );
        for c in &report.consumers {
            println!(
                "  {}: finished at {:.3} ms, {} interests, isr {}, avg delay {} ms",
                c.name,
                c.finish_ms.unwrap_or_default(),
                c.interests_sent,
                c.isr.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into()),
                c.avg_delay_ms.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into()),
            );
        }
        ExitCode::SUCCESS
    } else {
        eprintln!("incomplete at {}:", report.end_time);
        if let Some(abort) = &report.aborted {
            eprintln!("  {abort}");
        }
        let total_objects = config.torrent.segment_count()
            + config.torrent.manifest_count()
            + config.torrent.packet_count();
        for c in &report.consumers {
            eprintln!(
                "  {}: {}/{total_objects} objects ({} packets), {} interests sent, completed={}",
                c.name, c.objects_held, c.packets_held, c.interests_sent, c.completed
            );
        }
        ExitCode::from(2)
    }
}
