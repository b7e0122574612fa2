//! Properties of the multi-commodity network model.

use proptest::prelude::*;

use trafficflow::network::{
    example_corridor, ConnectorSpec, Network, NetworkSpec, OriginMode, OriginSpec, SinkPolicy, Vehicles, ZoneRole,
    ZoneSpec,
};
use trafficflow::FundamentalDiagram;

fn newell() -> FundamentalDiagram {
    FundamentalDiagram::newell(60.0, -10.0, 250.0).unwrap()
}

/// Straight road whose lane counts are given per zone; zone 0 is the origin and
/// the last zone an unlimited sink.
fn road(lanes: &[f64], mode: OriginMode<f64>, platoons: Vec<(usize, f64)>, seed: u64) -> NetworkSpec<f64> {
    let n = lanes.len();
    let zones = lanes
        .iter()
        .enumerate()
        .map(|(z, &l)| ZoneSpec {
            lanes: l,
            length: 0.6,
            fd: newell(),
            role: if z == 0 {
                ZoneRole::Origin(OriginSpec {
                    platoons: platoons.clone(),
                    mode: mode.clone(),
                })
            } else if z == n - 1 {
                ZoneRole::Destination {
                    dest: 0,
                    sink: SinkPolicy::Infinite,
                }
            } else {
                ZoneRole::Interior
            },
        })
        .collect();
    NetworkSpec {
        zones,
        connectors: (1..n).map(|k| ConnectorSpec::new(vec![k - 1], vec![k])).collect(),
        dt: 30.0 / 3600.0,
        seed,
        diverge_skip_blocked: false,
    }
}

/// Two origins merging into one road that splits into two destinations.
fn merge_diverge(rate_a: f64, rate_b: f64, seed: u64) -> NetworkSpec<f64> {
    let zone = |lanes: f64, role: ZoneRole<f64>| ZoneSpec {
        lanes,
        length: 0.6,
        fd: newell(),
        role,
    };
    let origin = |rate: f64| {
        ZoneRole::Origin(OriginSpec {
            platoons: vec![(0, 4.0), (1, 3.0)],
            mode: OriginMode::Rate(rate),
        })
    };
    NetworkSpec {
        zones: vec![
            zone(2.0, origin(rate_a)),
            zone(1.0, origin(rate_b)),
            zone(2.0, ZoneRole::Interior),
            zone(
                1.0,
                ZoneRole::Destination {
                    dest: 0,
                    sink: SinkPolicy::Infinite,
                },
            ),
            zone(
                1.0,
                ZoneRole::Destination {
                    dest: 1,
                    sink: SinkPolicy::Infinite,
                },
            ),
        ],
        connectors: vec![
            ConnectorSpec::new(vec![0, 1], vec![2]),
            ConnectorSpec::new(vec![2], vec![3, 4]),
        ],
        dt: 30.0 / 3600.0,
        seed,
        diverge_skip_blocked: false,
    }
}

fn check_invariants(net: &Network<f64>, n_zones: usize) {
    assert_eq!(net.conservation_residual(), Vehicles::ZERO);
    for z in 0..n_zones {
        let particles: Vec<_> = net.zone_particles(z).collect();
        let sum = particles.iter().fold(Vehicles::ZERO, |acc, p| acc + p.count);
        assert_eq!(sum, net.zone_count(z), "zone {z} particle total");
        let by_dest = net.zone_dest_counts(z).iter().fold(Vehicles::ZERO, |acc, &v| acc + v);
        assert_eq!(by_dest, net.zone_count(z), "zone {z} destination split");
        assert!(particles.windows(2).all(|w| w[0].seq <= w[1].seq), "zone {z} order");
        assert!(net.zone_count(z) >= Vehicles::ZERO);
    }
}

#[test]
fn corridor_keeps_both_levels_consistent() {
    let mut net = Network::new(example_corridor(3)).unwrap();
    for _ in 0..300 {
        net.step().unwrap();
        check_invariants(&net, 24);
    }
}

#[test]
fn same_seed_same_history() {
    let run = |seed| {
        let mut net = Network::new(example_corridor(seed)).unwrap();
        net.run(200).unwrap()
    };
    assert_eq!(run(9), run(9));
}

#[test]
fn lane_drop_discharges_at_one_lane_capacity() {
    let spec = road(&[3.0, 3.0, 3.0, 1.0, 1.0, 1.0], OriginMode::Jammed, vec![(0, 10.0)], 1);
    let expected = newell().capacity() * spec.dt;
    let mut net = Network::new(spec).unwrap();
    let records = net.run(600).unwrap();
    for r in &records[400..] {
        let flux = r.connector_flux[2].to_f64();
        assert!((flux - expected).abs() < 1e-6 * expected, "flux {flux} vs {expected}");
    }
    assert!(net.is_overcritical(2));
    assert!(!net.is_overcritical(4));
}

#[test]
fn uncongested_road_carries_the_arrival_rate() {
    let rate = 900.0;
    let spec = road(&[1.0; 6], OriginMode::Rate(rate), vec![(0, 5.0)], 1);
    let per_step = rate * spec.dt;
    let mut net = Network::new(spec).unwrap();
    let records = net.run(400).unwrap();
    // Sink output is cumulative.
    for w in records[200..].windows(2) {
        let out = (w[1].sink_output - w[0].sink_output).to_f64();
        assert!((out - per_step).abs() < 1e-6, "{out} vs {per_step}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn merge_diverge_invariants_hold(seed in any::<u64>(), a in 0.0f64..4000.0, b in 0.0f64..2000.0) {
        let spec = merge_diverge(a, b, seed);
        let mut first = Network::new(spec.clone()).unwrap();
        let mut history = Vec::new();
        for _ in 0..80 {
            history.push(first.step().unwrap());
            check_invariants(&first, 5);
        }
        // Nothing reaches the wrong exit.
        prop_assert_eq!(first.moved_through(1, 3, 1), Vehicles::ZERO);
        prop_assert_eq!(first.moved_through(1, 4, 0), Vehicles::ZERO);
        let mut second = Network::new(spec).unwrap();
        prop_assert_eq!(second.run(80).unwrap(), history);
    }
}
