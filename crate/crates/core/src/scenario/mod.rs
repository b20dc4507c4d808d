//! Experiment construction: node placement, data-rate assignment and
//! traffic generation.

mod config;

pub use config::{ScenarioConfig, TrafficMode, KEYS};

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::engine::{RngStream, SimTime};
use crate::mac::NodeId;
use crate::phy::{RadioParams, Shadowing, SpreadingFactor};

#[derive(Debug, Clone, PartialEq)]
pub struct NodePlacement {
    pub id: NodeId,
    /// Metres from the gateway at the origin.
    pub position: (f64, f64),
    pub distance_m: f64,
    /// Fixed shadowing on this device's link; zero unless shadowing is
    /// drawn per link.
    pub shadow_db: f64,
    pub radio: RadioParams,
}

/// One gateway at the origin and the end devices around it.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub radius_m: f64,
    pub nodes: Vec<NodePlacement>,
}

impl Topology {
    /// Node count per spreading factor, SF7 first.
    pub fn sf_histogram(&self) -> [usize; 6] {
        let mut h = [0; 6];
        for n in &self.nodes {
            h[usize::from(n.radio.sf.value() - 7)] += 1;
        }
        h
    }
}

/// Places nodes uniformly over the disc inside which SF12 closes the link
/// without shadowing, and gives each the fastest SF that reaches the gateway
/// and a uniformly chosen channel.
///
/// With per-link shadowing each device also draws its fixed shadowing term
/// here; the SF is then chosen on the shadowed loss and positions whose
/// shadowed link cannot close at SF12 are redrawn.
pub fn generate_topology(config: &ScenarioConfig, rng: &mut RngStream) -> Topology {
    let link = &config.link;
    let radius = link.range_m(SpreadingFactor::SF12, config.bw, config.tx_power_dbm);
    let shadow = (link.shadowing == Shadowing::PerLink && link.shadow_sigma_db > 0.0)
        .then(|| Normal::new(0.0, link.shadow_sigma_db).expect("validated sigma"));
    let mut nodes = Vec::with_capacity(config.n_nodes as usize);
    for i in 0..config.n_nodes {
        let (x, y, d, shadow_db, sf) = loop {
            let x = rng.gen_range(-radius..=radius);
            let y = rng.gen_range(-radius..=radius);
            let d = x.hypot(y);
            if !(d > 0.0 && d <= radius) {
                continue;
            }
            let s = shadow.as_ref().map_or(0.0, |n| n.sample(rng));
            let loss = link.path_loss(d, s).expect("positive distance");
            if let Some(sf) = link.fastest_decodable(config.tx_power_dbm - loss, config.bw) {
                break (x, y, d, s, sf);
            }
        };
        let channel = config.channels[rng.gen_range(0..config.channels.len())];
        let radio = RadioParams {
            sf,
            bw: config.bw,
            cr: config.cr,
            freq: channel,
            tx_power_dbm: config.tx_power_dbm,
        };
        nodes.push(NodePlacement {
            id: NodeId(i),
            position: (x, y),
            distance_m: d,
            shadow_db,
            radio,
        });
    }
    Topology {
        radius_m: radius,
        nodes,
    }
}

/// Arrival instant of a node's next fresh uplink.
pub fn next_uplink_time(
    mode: TrafficMode,
    mean_interval_s: f64,
    now: SimTime,
    rng: &mut RngStream,
) -> SimTime {
    debug_assert!(mean_interval_s > 0.0);
    let gap_s = match mode {
        TrafficMode::Exponential => Exp::new(1.0 / mean_interval_s)
            .expect("positive rate")
            .sample(rng),
        TrafficMode::Periodic { jitter } => {
            if jitter > 0.0 {
                mean_interval_s * (1.0 + rng.gen_range(-jitter..=jitter))
            } else {
                mean_interval_s
            }
        }
    };
    now + SimTime::from_secs(gap_s)
}

/// Marks a fresh uplink confirmed with the configured probability.
pub fn mark_confirmed(confirmed_fraction: f64, rng: &mut RngStream) -> bool {
    confirmed_fraction > 0.0 && rng.gen_bool(confirmed_fraction)
}
