use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ntorrent_sim_core::name::Name;
use ntorrent_sim_core::routing::{calculate_routes, LinkSpec, Topology};
use ntorrent_sim_core::scenario::{run_scenario, ScenarioConfig};
use ntorrent_sim_core::time::SimTime;
use ntorrent_sim_core::torrent::{build_torrent, TorrentParams};

fn bench_build_torrent(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_torrent");
    for file_count in [2u32, 8, 32] {
        let params = TorrentParams {
            file_count,
            ..TorrentParams::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(file_count), &params, |b, p| {
            b.iter(|| build_torrent(p).unwrap())
        });
    }
    group.finish();
}

fn mesh_topology(n: usize) -> Topology {
    let mut topo = Topology::new(n);
    for a in 0..n {
        for b in (a + 1)..n {
            topo.links.push(LinkSpec {
                a,
                b,
                data_rate_bps: 1_000_000,
                delay: SimTime::from_ms(((a + b) % 7 + 1) as u64),
            });
        }
    }
    for o in 0..n.min(4) {
        topo.add_origin(Name::parse(&format!("/p/{o}")).unwrap(), o)
            .unwrap();
    }
    topo
}

fn bench_calculate_routes(c: &mut Criterion) {
    let mut group = c.benchmark_group("calculate_routes");
    for n in [4usize, 8, 16] {
        let topo = mesh_topology(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &topo, |b, t| {
            b.iter(|| calculate_routes(t))
        });
    }
    group.finish();
}

fn bench_scenario_run(c: &mut Criterion) {
    let mut group = c.benchmark_group("scenario_run");
    group.sample_size(10);
    for scenario in ["ntorrent-simple", "router-node-degree-4"] {
        let cfg = ScenarioConfig {
            scenario: scenario.to_string(),
            ..ScenarioConfig::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(scenario), &cfg, |b, cfg| {
            b.iter(|| {
                let (_, report) = run_scenario(cfg).unwrap();
                assert!(report.completed_all);
            })
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_build_torrent,
    bench_calculate_routes,
    bench_scenario_run
);
criterion_main!(benches);
