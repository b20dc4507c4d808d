//! Small scenarios whose every event can be followed by hand.

use lwsim::mac::NodeId;
use lwsim::metrics::TxOutcome;
use lwsim::phy::{Bandwidth, Direction, Frequency, RadioParams, Shadowing, SpreadingFactor};
use lwsim::scenario::{NodePlacement, Topology, TrafficMode};
use lwsim::sim::run_with_topology;
use lwsim::{ScenarioConfig, SimTime};

fn node(id: u32, distance_m: f64) -> NodePlacement {
    NodePlacement {
        id: NodeId(id),
        position: (distance_m, 0.0),
        distance_m,
        shadow_db: 0.0,
        radio: RadioParams::new(
            SpreadingFactor::SF7,
            Bandwidth::Khz125,
            Frequency::from_mhz(868.1),
        ),
    }
}

fn two_nodes() -> Topology {
    Topology {
        radius_m: 500.0,
        nodes: vec![node(0, 40.0), node(1, 100.0)],
    }
}

/// Both devices send every 1000 s, confirmed, with a fixed 1 s backoff and
/// no shadowing; the run stops generating at 1500 s.
fn config() -> ScenarioConfig {
    let mut cfg = ScenarioConfig {
        n_nodes: 2,
        sim_days: 1500.0 / 86_400.0,
        confirmed_fraction: 1.0,
        traffic_mode: TrafficMode::Periodic { jitter: 0.0 },
        ..ScenarioConfig::default()
    };
    cfg.link.shadow_sigma_db = 0.0;
    cfg.link.shadowing = Shadowing::PerTransmission;
    cfg.mac.max_attempts = 2;
    cfg.mac.backoff_min = SimTime::from_secs(1.0);
    cfg.mac.backoff_max = SimTime::from_secs(1.0);
    cfg
}

// Hand trace:
//   t=1000 s    both devices send SF7 on 868.1 MHz (56.576 ms). Node 0 at
//               40 m is 8.28 dB stronger than node 1 at 100 m, so it is
//               captured and node 1 collides.
//   t=1001.057  ACK to node 0 in RX1 (SF7, 0 B, 25.856 ms), received.
//   node 1      RX1, RX2 empty; timeout at RX2 + 663.552 ms. Its gate
//               reopens at 1000 s + 100 x 56.576 ms = 1005.6576 s, so the
//               retransmission goes out at 1006.6576 s, alone, decoded.
//   t=1007.714  ACK for attempt 2 in RX1; the gateway's g1 gate reopened at
//               1001.056576 + 100 x 25.856 ms = 1003.642176 s.
#[test]
fn capture_then_retransmission() {
    let out = run_with_topology(&config(), two_nodes()).unwrap();
    let l = &out.ledger;
    assert_eq!(l.sent_total, 3);
    assert_eq!(l.sent_fresh, 2);
    assert_eq!(l.received_unique, 2);
    assert!((l.goodput().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(l.acked_by_attempt, vec![1, 1]);
    assert_eq!(l.gave_up, 0);
    assert_eq!(l.downlink_attempted, 2);
    assert_eq!(l.downlink_delivered, 2);

    let ups: Vec<_> = out.log.uplinks().collect();
    assert_eq!(ups[0].outcome, TxOutcome::Decoded);
    assert_eq!(ups[0].device, NodeId(0));
    assert_eq!(ups[1].outcome, TxOutcome::Collided);
    assert_eq!(ups[2].device, NodeId(1));
    assert_eq!(ups[2].attempt, 2);
    assert!((ups[2].start.as_ms() - 1_006_657.6).abs() < 1e-6);

    let downs: Vec<_> = out.log.downlinks().collect();
    assert_eq!(downs.len(), 2);
    assert!(downs.iter().all(|d| d.direction == Direction::Downlink));
    assert!((downs[0].start.as_ms() - 1_001_056.576).abs() < 1e-6);
    assert!((downs[0].airtime.as_ms() - 25.856).abs() < 1e-9);
    assert!((downs[1].start.as_ms() - 1_007_714.176).abs() < 1e-6);

    // Events: 4 arrivals (two at 1000 s, two ignored at 2000 s), SimEnd,
    // 3 TxEnd, RX1 for node 0, RX1 + RX2 + timeout for node 1's first try,
    // the retransmission's UplinkDue and its RX1. Acknowledged cycles cancel
    // their pending RX2 and timeout.
    assert_eq!(out.events_dispatched, 4 + 1 + 3 + 1 + 3 + 1 + 1);

    // Energy: 3 SF7 frames at 14 dBm, 8.2148352 mJ each.
    let total: f64 = l.energy_mj_per_node.iter().sum();
    assert!((total - 3.0 * 8.214_835_2).abs() < 1e-9);
}

#[test]
fn equal_power_collision_exhausts_attempts() {
    let topo = Topology {
        radius_m: 500.0,
        nodes: vec![node(0, 100.0), node(1, 100.0)],
    };
    let out = run_with_topology(&config(), topo).unwrap();
    let l = &out.ledger;
    // Identical gates and backoffs: every attempt collides again.
    assert_eq!(l.sent_total, 4);
    assert_eq!(l.received_unique, 0);
    assert_eq!(l.gave_up, 2);
    assert_eq!(l.acked_by_attempt, vec![0, 0]);
    assert_eq!(l.goodput().unwrap(), 0.0);
    assert!(out.log.uplinks().all(|r| r.outcome == TxOutcome::Collided));
}

#[test]
fn unconfirmed_cycle_ends_after_rx2() {
    let mut cfg = config();
    cfg.confirmed_fraction = 0.0;
    let out = run_with_topology(&cfg, two_nodes()).unwrap();
    let l = &out.ledger;
    assert_eq!(l.sent_total, 2);
    assert_eq!(l.unconfirmed_received, 1);
    assert_eq!(l.unconfirmed_lost, 1);
    assert_eq!(l.downlink_attempted, 0);
    // 4 arrivals, SimEnd, 2 TxEnd, 2 x (RX1 + RX2).
    assert_eq!(out.events_dispatched, 4 + 1 + 2 + 4);
}
