//! One simulation run: wires the scenario, MAC and PHY models into the
//! event loop and fills the metrics ledger and transmission log.

use std::collections::{HashMap, VecDeque};

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::engine::{rng_stream, EventHandle, RngStream, Scheduler, SimTime, StreamId};
use crate::error::{ConfigError, MacError, PhyError};
use crate::mac::{
    AckTimeoutOutcome, BookedDownlink, DeviceState, DownlinkFailure, DownlinkOutcome, EnergyModel,
    FreshFrame, GatewayState, MacConfig, NodeId, QueuedDownlink, WindowSlot,
};
use crate::metrics::{EventLog, MetricsLedger, Transmitter, TxOutcome, TxRecord};
use crate::phy::{
    airtime, resolve_receptions, Direction, Frequency, LinkModel, RadioParams, Reception,
    Shadowing, SpreadingFactor,
};
use crate::scenario::{
    generate_topology, mark_confirmed, next_uplink_time, ScenarioConfig, Topology,
};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Phy(#[from] PhyError),
    #[error(transparent)]
    Mac(#[from] MacError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// `arrival` marks a new application frame; otherwise the pending
    /// frame's (re)transmission is due.
    UplinkDue {
        node: NodeId,
        arrival: bool,
    },
    TxEnd {
        node: NodeId,
        log_idx: usize,
    },
    Rx1Open {
        node: NodeId,
    },
    Rx2Open {
        node: NodeId,
    },
    AckTimeout {
        node: NodeId,
    },
    DownlinkDue,
    SimEnd,
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub ledger: MetricsLedger,
    pub log: EventLog,
    pub topology: Topology,
    pub events_dispatched: u64,
    /// Clock when the last pending cycle drained.
    pub finished_at: SimTime,
}

struct AirEntry {
    log_idx: usize,
    start: SimTime,
    end: SimTime,
    rssi_dbm: f64,
}

struct Booking {
    downlink: BookedDownlink,
    log_idx: usize,
    data: Option<QueuedDownlink>,
}

#[derive(Default)]
struct RxState {
    booking: Option<Booking>,
    rx2: Option<EventHandle>,
    timeout: Option<EventHandle>,
}

enum CycleEnd {
    Acked,
    GaveUp,
    Unconfirmed,
}

struct NodeRngs {
    traffic: RngStream,
    marking: RngStream,
    shadowing: RngStream,
    backoff: RngStream,
}

struct Simulation<'a> {
    cfg: &'a ScenarioConfig,
    mac: MacConfig,
    link: &'a LinkModel,
    energy: &'a EnergyModel,
    devices: Vec<DeviceState>,
    rx: Vec<RxState>,
    rngs: Vec<NodeRngs>,
    downlink_rng: RngStream,
    /// Per-transmission shadowing law, if any.
    shadow: Option<Normal<f64>>,
    link_shadow: Vec<f64>,
    gateway: GatewayState,
    air: HashMap<(Frequency, SpreadingFactor), VecDeque<AirEntry>>,
    max_airtime: SimTime,
    ledger: MetricsLedger,
    log: EventLog,
    generating: bool,
    next_frame_id: u64,
    next_downlink_id: u64,
}

/// Runs one replication of `cfg` with `cfg.seed`.
///
/// Fresh traffic stops at the horizon; cycles still in progress then run to
/// completion so every fresh frame reaches a terminal outcome.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput, SimError> {
    cfg.validate()?;
    let topology = generate_topology(cfg, &mut rng_stream(cfg.seed, StreamId::Placement));
    run_with_topology(cfg, topology)
}

/// Like [`run`] but on a caller-supplied topology.
pub fn run_with_topology(cfg: &ScenarioConfig, topology: Topology) -> Result<RunOutput, SimError> {
    cfg.validate()?;
    let mut sim = Simulation::new(cfg, &topology)?;
    let mut sched = Scheduler::new();
    sim.prime(&mut sched);
    sched.run_until(SimTime::MAX, |s, ev| sim.handle(s, ev));
    let finished_at = sched.now();
    Ok(sim.finish(topology, sched.dispatched(), finished_at))
}

impl<'a> Simulation<'a> {
    fn new(cfg: &'a ScenarioConfig, topology: &Topology) -> Result<Self, SimError> {
        let mac = cfg.mac_config();
        let g1_limit = mac.bands.band(crate::mac::SubBandId(0)).limit;
        let devices: Vec<DeviceState> = topology
            .nodes
            .iter()
            .map(|n| {
                let mut d = DeviceState::new(n.id, n.position, n.radio, g1_limit);
                d.distance_m = n.distance_m;
                d
            })
            .collect();

        // Anything that could fail mid-run is checked here once.
        let slowest = RadioParams {
            sf: SpreadingFactor::SF12,
            ..devices.first().map_or(
                RadioParams::new(SpreadingFactor::SF12, cfg.bw, cfg.channels[0]),
                |d| d.radio,
            )
        };
        let max_airtime = airtime(&slowest, cfg.payload_len, &mac.frame_format)?;
        for d in &devices {
            if mac.bands.band_of(d.radio.freq).is_none() {
                return Err(ConfigError::value(
                    "channels",
                    &d.radio.freq.to_string(),
                    "unregulated",
                )
                .into());
            }
            cfg.energy.tx_energy(&d.radio, max_airtime)?;
        }

        let seed = cfg.seed;
        let rngs = devices
            .iter()
            .map(|d| NodeRngs {
                traffic: rng_stream(seed, StreamId::Traffic(d.id.0)),
                marking: rng_stream(seed, StreamId::Marking(d.id.0)),
                shadowing: rng_stream(seed, StreamId::Shadowing(d.id.0)),
                backoff: rng_stream(seed, StreamId::Backoff(d.id.0)),
            })
            .collect();
        let link_shadow = topology.nodes.iter().map(|n| n.shadow_db).collect();
        let shadow = (cfg.link.shadowing == Shadowing::PerTransmission
            && cfg.link.shadow_sigma_db > 0.0)
            .then(|| Normal::new(0.0, cfg.link.shadow_sigma_db).expect("validated sigma"));

        Ok(Simulation {
            cfg,
            gateway: GatewayState::new(&mac),
            ledger: MetricsLedger::new(mac.max_attempts, devices.len()),
            rx: devices.iter().map(|_| RxState::default()).collect(),
            mac,
            link: &cfg.link,
            energy: &cfg.energy,
            devices,
            rngs,
            downlink_rng: rng_stream(seed, StreamId::Downlink),
            shadow,
            link_shadow,
            air: HashMap::new(),
            max_airtime,
            log: EventLog::default(),
            generating: true,
            next_frame_id: 0,
            next_downlink_id: 0,
        })
    }

    fn prime(&mut self, sched: &mut Scheduler<EventKind>) {
        for i in 0..self.devices.len() {
            let at = self.next_arrival(i, SimTime::ZERO);
            sched
                .schedule(
                    at,
                    EventKind::UplinkDue {
                        node: NodeId(i as u32),
                        arrival: true,
                    },
                )
                .expect("future arrival");
        }
        if let Some(first) = self.next_downlink_data(SimTime::ZERO) {
            sched
                .schedule(first, EventKind::DownlinkDue)
                .expect("future");
        }
        sched
            .schedule(self.cfg.horizon(), EventKind::SimEnd)
            .expect("horizon is positive");
    }

    fn finish(mut self, topology: Topology, dispatched: u64, finished_at: SimTime) -> RunOutput {
        self.ledger.energy_mj_per_node = self.devices.iter().map(|d| d.energy_mj).collect();
        RunOutput {
            ledger: self.ledger,
            log: self.log,
            topology,
            events_dispatched: dispatched,
            finished_at,
        }
    }

    fn next_arrival(&mut self, i: usize, now: SimTime) -> SimTime {
        next_uplink_time(
            self.cfg.traffic_mode,
            self.cfg.mean_send_interval,
            now,
            &mut self.rngs[i].traffic,
        )
    }

    fn next_downlink_data(&mut self, now: SimTime) -> Option<SimTime> {
        if self.cfg.downlink_fraction <= 0.0 || self.devices.is_empty() {
            return None;
        }
        // Downlink data rate = fraction x aggregate fresh-uplink rate.
        let rate_per_s =
            self.cfg.downlink_fraction * self.devices.len() as f64 / self.cfg.mean_send_interval;
        let gap = Exp::new(rate_per_s)
            .expect("positive rate")
            .sample(&mut self.downlink_rng);
        Some(now + SimTime::from_secs(gap))
    }

    fn draw_shadow(&mut self, i: usize) -> f64 {
        match &self.shadow {
            Some(n) => n.sample(&mut self.rngs[i].shadowing),
            None => self.link_shadow[i],
        }
    }

    fn handle(&mut self, sched: &mut Scheduler<EventKind>, ev: EventKind) {
        match ev {
            EventKind::UplinkDue {
                node,
                arrival: true,
            } => self.on_arrival(sched, node),
            EventKind::UplinkDue {
                node,
                arrival: false,
            } => self.transmit_or_defer(sched, node),
            EventKind::TxEnd { node, log_idx } => self.on_tx_end(sched, node, log_idx),
            EventKind::Rx1Open { node } => self.on_window(sched, node, WindowSlot::Rx1),
            EventKind::Rx2Open { node } => self.on_window(sched, node, WindowSlot::Rx2),
            EventKind::AckTimeout { node } => self.on_ack_timeout(sched, node),
            EventKind::DownlinkDue => self.on_downlink_due(sched),
            EventKind::SimEnd => self.generating = false,
        }
    }

    fn on_arrival(&mut self, sched: &mut Scheduler<EventKind>, node: NodeId) {
        if !self.generating {
            return;
        }
        let i = node.0 as usize;
        let now = sched.now();
        let confirmed = mark_confirmed(self.cfg.confirmed_fraction, &mut self.rngs[i].marking);
        let id = self.next_frame_id;
        self.next_frame_id += 1;
        self.devices[i].backlog.push_back(FreshFrame {
            id,
            confirmed,
            payload_len: self.cfg.payload_len,
        });
        let next = self.next_arrival(i, now);
        sched
            .schedule(
                next,
                EventKind::UplinkDue {
                    node,
                    arrival: true,
                },
            )
            .expect("arrivals move forward");
        self.start_next(sched, node);
    }

    fn start_next(&mut self, sched: &mut Scheduler<EventKind>, node: NodeId) {
        let i = node.0 as usize;
        if let Some(frame) = self.devices[i].begin_next() {
            if frame.confirmed {
                self.ledger.confirmed_fresh += 1;
            }
            self.transmit_or_defer(sched, node);
        }
    }

    fn transmit_or_defer(&mut self, sched: &mut Scheduler<EventKind>, node: NodeId) {
        let i = node.0 as usize;
        let now = sched.now();
        let start = self.devices[i].next_start(now);
        if start > now {
            sched
                .schedule(
                    start,
                    EventKind::UplinkDue {
                        node,
                        arrival: false,
                    },
                )
                .expect("gate opens in the future");
            return;
        }
        let tx = self.devices[i]
            .on_uplink_due(now, &self.mac, self.energy)
            .expect("airtime and current validated at setup");
        let shadow = self.draw_shadow(i);
        let loss = self
            .link
            .path_loss(self.devices[i].distance_m, shadow)
            .expect("placement keeps distances positive");
        let rssi_dbm = tx.params.tx_power_dbm - loss;

        self.ledger.sent_total += 1;
        if tx.frame.attempt == 1 {
            self.ledger.sent_fresh += 1;
        }
        let log_idx = self.log.push(TxRecord {
            start: tx.start,
            airtime: tx.airtime,
            transmitter: Transmitter::Device(node),
            device: node,
            direction: Direction::Uplink,
            params: tx.params,
            kind: tx.frame.kind,
            frame_id: tx.frame.id,
            attempt: tx.frame.attempt,
            confirmed: tx.frame.confirmed,
            outcome: TxOutcome::Pending,
        });

        let horizon = self.max_airtime;
        let bucket = self.air.entry((tx.params.freq, tx.params.sf)).or_default();
        while bucket.front().is_some_and(|e| e.start + horizon < now) {
            bucket.pop_front();
        }
        bucket.push_back(AirEntry {
            log_idx,
            start: tx.start,
            end: tx.end(),
            rssi_dbm,
        });
        sched
            .schedule(tx.end(), EventKind::TxEnd { node, log_idx })
            .expect("end follows start");
    }

    /// Gateway-side verdict for the uplink logged at `log_idx`.
    fn resolve_uplink(&self, log_idx: usize) -> TxOutcome {
        let rec = &self.log.records[log_idx];
        let bucket = &self.air[&(rec.params.freq, rec.params.sf)];
        let as_reception = |e: &AirEntry| Reception {
            id: e.log_idx as u64,
            direction: Direction::Uplink,
            freq: rec.params.freq,
            sf: rec.params.sf,
            bw: rec.params.bw,
            rssi_dbm: e.rssi_dbm,
        };
        let me = bucket
            .iter()
            .find(|e| e.log_idx == log_idx)
            .expect("own entry outlives its airtime");
        let mut set = vec![as_reception(me)];
        set.extend(
            bucket
                .iter()
                .filter(|e| e.log_idx != log_idx && e.start < me.end && me.start < e.end)
                .map(as_reception),
        );
        let sensitivity = self.link.sensitivity.get(rec.params.sf, rec.params.bw);
        if me.rssi_dbm < sensitivity {
            return TxOutcome::BelowSensitivity;
        }
        let decoded =
            resolve_receptions(&set, &self.link.sensitivity, self.cfg.capture_threshold_db);
        if decoded.iter().any(|r| r.id == log_idx as u64) {
            TxOutcome::Decoded
        } else {
            TxOutcome::Collided
        }
    }

    fn on_tx_end(&mut self, sched: &mut Scheduler<EventKind>, node: NodeId, log_idx: usize) {
        let i = node.0 as usize;
        let now = sched.now();
        let outcome = self.resolve_uplink(log_idx);
        self.log.records[log_idx].outcome = outcome;
        let frame = self.devices[i].pending.expect("uplink in flight");

        let windows = self.devices[i].open_rx_windows(now, &self.mac);
        if outcome == TxOutcome::Decoded {
            if !self.devices[i].pending_decoded {
                self.devices[i].pending_decoded = true;
                self.ledger.received_unique += 1;
            }
            let ack_for = frame.confirmed.then_some(&frame);
            if let Some((dl, data)) = self.gateway.compose(node, ack_for, &self.mac) {
                self.ledger.downlink_attempted += 1;
                let decision = self
                    .gateway
                    .schedule_downlink(now, dl, &windows, &self.mac)
                    .expect("downlink airtime validated at setup");
                match decision {
                    DownlinkOutcome::Delivered(booked) => {
                        let log_idx = self.log.push(TxRecord {
                            start: booked.tx.start,
                            airtime: booked.tx.airtime,
                            transmitter: Transmitter::Gateway,
                            device: node,
                            direction: Direction::Downlink,
                            params: booked.tx.params,
                            kind: dl.kind,
                            frame_id: dl.id,
                            attempt: dl.attempt,
                            confirmed: false,
                            outcome: TxOutcome::Pending,
                        });
                        self.rx[i].booking = Some(Booking {
                            downlink: booked,
                            log_idx,
                            data,
                        });
                    }
                    DownlinkOutcome::Failed(cause) => {
                        self.ledger.record_failure(cause);
                        if let Some(d) = data {
                            self.data_missed(node, d);
                        }
                    }
                }
            }
        }

        sched
            .schedule(windows[0].opens_at, EventKind::Rx1Open { node })
            .expect("RX1 follows the uplink");
        self.rx[i].rx2 = Some(
            sched
                .schedule(windows[1].opens_at, EventKind::Rx2Open { node })
                .expect("RX2 follows RX1"),
        );
        if frame.confirmed {
            // The device gives up listening once an ACK-sized RX2 frame
            // would have finished.
            let window = airtime(
                &windows[1].params,
                self.mac.ack_payload_len,
                &self.mac.frame_format,
            )
            .expect("validated");
            self.rx[i].timeout = Some(
                sched
                    .schedule(windows[1].opens_at + window, EventKind::AckTimeout { node })
                    .expect("timeout follows RX2"),
            );
        }
    }

    /// A queued data frame missed this cycle; keep it for the next one or drop it.
    fn data_missed(&mut self, node: NodeId, mut data: QueuedDownlink) {
        data.cycles_left = data.cycles_left.saturating_sub(1);
        if data.cycles_left > 0 {
            self.gateway.requeue(node, data);
        } else {
            self.ledger.downlink_data_dropped += 1;
        }
    }

    fn on_window(&mut self, sched: &mut Scheduler<EventKind>, node: NodeId, slot: WindowSlot) {
        let i = node.0 as usize;
        if slot == WindowSlot::Rx2 {
            self.rx[i].rx2 = None;
        }
        let mine = self.rx[i]
            .booking
            .as_ref()
            .is_some_and(|b| b.downlink.slot == slot);
        let mut acked = false;
        let mut received = false;
        if mine {
            let booking = self.rx[i].booking.take().expect("checked");
            received = self.receive_downlink(node, &booking);
            acked = received && booking.downlink.tx.frame.kind.carries_ack();
        }
        let confirmed = self.devices[i].pending.expect("cycle open").confirmed;
        if acked {
            if let Some(h) = self.rx[i].rx2.take() {
                sched.cancel_unchecked(h);
            }
            if let Some(h) = self.rx[i].timeout.take() {
                sched.cancel_unchecked(h);
            }
            self.finish_cycle(sched, node, CycleEnd::Acked);
        } else if !confirmed && (received || slot == WindowSlot::Rx2) {
            if let Some(h) = self.rx[i].rx2.take() {
                sched.cancel_unchecked(h);
            }
            self.finish_cycle(sched, node, CycleEnd::Unconfirmed);
        }
    }

    fn receive_downlink(&mut self, node: NodeId, booking: &Booking) -> bool {
        let i = node.0 as usize;
        let tx = booking.downlink.tx;
        let shadow = self.draw_shadow(i);
        let loss = self
            .link
            .path_loss(self.devices[i].distance_m, shadow)
            .expect("positive distance");
        let rx = Reception {
            id: booking.log_idx as u64,
            direction: Direction::Downlink,
            freq: tx.params.freq,
            sf: tx.params.sf,
            bw: tx.params.bw,
            rssi_dbm: tx.params.tx_power_dbm - loss,
        };
        let ok = !resolve_receptions(&[rx], &self.link.sensitivity, self.cfg.capture_threshold_db)
            .is_empty();
        self.log.records[booking.log_idx].outcome = if ok {
            TxOutcome::Received
        } else {
            TxOutcome::Missed
        };
        if ok {
            self.ledger.downlink_delivered += 1;
            if tx.frame.kind.carries_ack() {
                self.ledger.acked_by_attempt[usize::from(tx.frame.attempt) - 1] += 1;
            }
            if booking.data.is_some() {
                self.ledger.downlink_data_delivered += 1;
            }
        } else {
            self.ledger.record_failure(DownlinkFailure::Link);
            if let Some(d) = booking.data {
                self.data_missed(node, d);
            }
        }
        ok
    }

    fn on_ack_timeout(&mut self, sched: &mut Scheduler<EventKind>, node: NodeId) {
        let i = node.0 as usize;
        self.rx[i].timeout = None;
        match self.devices[i].on_ack_timeout(&self.mac) {
            AckTimeoutOutcome::Retransmit(_) => {
                let now = sched.now();
                let (lo, hi) = (self.mac.backoff_min.as_ms(), self.mac.backoff_max.as_ms());
                let backoff = if hi > lo {
                    self.rngs[i].backoff.gen_range(lo..=hi)
                } else {
                    lo
                };
                let at = self.devices[i].next_start(now) + SimTime::from_ms(backoff);
                sched
                    .schedule(
                        at,
                        EventKind::UplinkDue {
                            node,
                            arrival: false,
                        },
                    )
                    .expect("retransmission lies ahead");
            }
            AckTimeoutOutcome::GiveUp => self.finish_cycle(sched, node, CycleEnd::GaveUp),
        }
    }

    fn finish_cycle(&mut self, sched: &mut Scheduler<EventKind>, node: NodeId, end: CycleEnd) {
        let i = node.0 as usize;
        let decoded = self.devices[i].pending_decoded;
        self.devices[i].finish_cycle().expect("cycle open");
        match end {
            CycleEnd::Acked => {}
            CycleEnd::GaveUp => self.ledger.gave_up += 1,
            CycleEnd::Unconfirmed if decoded => self.ledger.unconfirmed_received += 1,
            CycleEnd::Unconfirmed => self.ledger.unconfirmed_lost += 1,
        }
        self.start_next(sched, node);
    }

    fn on_downlink_due(&mut self, sched: &mut Scheduler<EventKind>) {
        if !self.generating {
            return;
        }
        let now = sched.now();
        let target = NodeId(self.downlink_rng.gen_range(0..self.devices.len() as u32));
        let id = self.next_downlink_id;
        self.next_downlink_id += 1;
        self.gateway.enqueue(
            target,
            QueuedDownlink {
                id,
                payload_len: self.mac.downlink_payload_len,
                cycles_left: self.mac.downlink_retry_cycles,
            },
        );
        self.ledger.downlink_data_generated += 1;
        if let Some(next) = self.next_downlink_data(now) {
            sched
                .schedule(next, EventKind::DownlinkDue)
                .expect("future");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{audit_duty_cycle, audit_gateway_serialization, reconcile};

    fn small(n: u32, confirmed: f64, downlink: f64) -> ScenarioConfig {
        ScenarioConfig {
            n_nodes: n,
            sim_days: 0.5,
            confirmed_fraction: confirmed,
            downlink_fraction: downlink,
            seed: 3,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn pure_aloha_has_no_downlinks() {
        let out = run(&small(50, 0.0, 0.0)).unwrap();
        assert!(out.log.downlinks().next().is_none());
        assert_eq!(out.ledger.downlink_attempted, 0);
        assert_eq!(out.ledger.sent_total, out.ledger.sent_fresh);
        assert!(!out.log.records.is_empty());
    }

    #[test]
    fn ledger_matches_log() {
        let cfg = small(200, 0.3, 0.05);
        let out = run(&cfg).unwrap();
        let issues = reconcile(&out.ledger, &out.log, &cfg.energy, cfg.mac.max_attempts);
        assert!(issues.is_empty(), "{issues:?}");
        assert!(audit_duty_cycle(&out.log, &cfg.bands()).is_empty());
        assert_eq!(audit_gateway_serialization(&out.log), 0);
        assert!(out.ledger.downlink_data_generated > 0);
    }

    #[test]
    fn unconfirmed_traffic_never_times_out() {
        let cfg = small(30, 0.0, 0.1);
        let out = run(&cfg).unwrap();
        assert_eq!(out.ledger.confirmed_fresh, 0);
        assert_eq!(out.ledger.gave_up, 0);
        assert!(out.log.downlinks().all(|r| !r.kind.carries_ack()));
    }

    #[test]
    fn same_seed_same_ledger() {
        let cfg = small(100, 0.2, 0.02);
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a.ledger, b.ledger);
        assert_eq!(a.log.records, b.log.records);
        assert_eq!(a.events_dispatched, b.events_dispatched);
    }
}
