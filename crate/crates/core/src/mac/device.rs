use std::collections::VecDeque;

use super::{
    DutyCycleGate, EnergyModel, Frame, FrameKind, MacConfig, NodeId, Rx2Mode, RxWindow,
    Transmission, WindowSlot,
};
use crate::engine::SimTime;
use crate::error::MacError;
use crate::phy::{airtime, Direction, RadioParams};

/// A fresh application frame waiting for its first transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FreshFrame {
    pub id: u64,
    pub confirmed: bool,
    pub payload_len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AckTimeoutOutcome {
    Retransmit(RadioParams),
    GiveUp,
}

/// Class-A end device.
#[derive(Debug, Clone)]
pub struct DeviceState {
    pub id: NodeId,
    pub position: (f64, f64),
    pub distance_m: f64,
    /// Assigned radio settings; every fresh frame starts with these.
    pub radio: RadioParams,
    /// Settings for the current attempt (differs from `radio` under data
    /// rate decay).
    pub current: RadioParams,
    pub gate: DutyCycleGate,
    pub pending: Option<Frame>,
    /// Whether the gateway has decoded any attempt of the pending frame.
    pub pending_decoded: bool,
    pub backlog: VecDeque<FreshFrame>,
    pub energy_mj: f64,
}

impl DeviceState {
    pub fn new(id: NodeId, position: (f64, f64), radio: RadioParams, duty_limit: f64) -> Self {
        DeviceState {
            id,
            position,
            distance_m: position.0.hypot(position.1),
            radio,
            current: radio,
            gate: DutyCycleGate::new(duty_limit),
            pending: None,
            pending_decoded: false,
            backlog: VecDeque::new(),
            energy_mj: 0.0,
        }
    }

    pub fn is_idle(&self) -> bool {
        self.pending.is_none()
    }

    /// Promotes the oldest backlog frame to the pending slot. Does nothing
    /// while another frame is still pending.
    pub fn begin_next(&mut self) -> Option<Frame> {
        if self.pending.is_some() {
            return None;
        }
        let fresh = self.backlog.pop_front()?;
        let frame = Frame {
            id: fresh.id,
            direction: Direction::Uplink,
            kind: FrameKind::Data,
            confirmed: fresh.confirmed,
            payload_len: fresh.payload_len,
            device: self.id,
            attempt: 1,
        };
        self.pending = Some(frame);
        self.pending_decoded = false;
        self.current = self.radio;
        Some(frame)
    }

    /// Earliest instant at or after `now` the duty-cycle gate allows.
    pub fn next_start(&self, now: SimTime) -> SimTime {
        now.max(self.gate.blocked_until)
    }

    /// Puts the pending frame on the air at the earliest gate-compliant
    /// instant, closes the gate behind it and charges the energy.
    pub fn on_uplink_due(
        &mut self,
        now: SimTime,
        cfg: &MacConfig,
        energy: &EnergyModel,
    ) -> Result<Transmission, MacError> {
        let frame = self.pending.expect("uplink due without a pending frame");
        let start = self.next_start(now);
        let air = airtime(&self.current, frame.payload_len, &cfg.frame_format)?;
        let tx = Transmission {
            frame,
            params: self.current,
            start,
            airtime: air,
        };
        self.gate.advance(tx.end(), air);
        self.energy_mj += energy.tx_energy(&self.current, air)?;
        Ok(tx)
    }

    pub fn open_rx_windows(&self, tx_end: SimTime, cfg: &MacConfig) -> [RxWindow; 2] {
        let rx1 = RxWindow {
            slot: WindowSlot::Rx1,
            opens_at: tx_end + cfg.rx1_delay,
            params: RadioParams {
                tx_power_dbm: cfg.gateway_tx_power_dbm,
                ..self.current
            },
        };
        let (sf, bw) = match cfg.rx2_mode {
            Rx2Mode::Default => (cfg.rx2_sf, cfg.rx2_bw),
            Rx2Mode::SameAsRx1 => (self.current.sf, self.current.bw),
        };
        let rx2 = RxWindow {
            slot: WindowSlot::Rx2,
            opens_at: tx_end + cfg.rx2_delay,
            params: RadioParams {
                sf,
                bw,
                freq: cfg.rx2_freq,
                ..rx1.params
            },
        };
        [rx1, rx2]
    }

    /// No acknowledgement arrived in either window.
    pub fn on_ack_timeout(&mut self, cfg: &MacConfig) -> AckTimeoutOutcome {
        let frame = self
            .pending
            .as_mut()
            .expect("ack timeout without a pending frame");
        debug_assert!(frame.confirmed);
        if frame.attempt >= cfg.max_attempts {
            return AckTimeoutOutcome::GiveUp;
        }
        frame.attempt += 1;
        if cfg.dr_decay {
            self.current.sf = self.radio.sf.slower((frame.attempt - 1) / 2);
        }
        AckTimeoutOutcome::Retransmit(self.current)
    }

    /// Ends the pending frame's cycle and restores the assigned data rate.
    pub fn finish_cycle(&mut self) -> Option<Frame> {
        self.current = self.radio;
        self.pending.take()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::{Bandwidth, Frequency, SpreadingFactor};

    fn device(sf: SpreadingFactor) -> DeviceState {
        let radio = RadioParams::new(sf, Bandwidth::Khz125, Frequency::from_mhz(868.1));
        DeviceState::new(NodeId(0), (30.0, 40.0), radio, 0.01)
    }

    fn queue(d: &mut DeviceState, confirmed: bool) {
        d.backlog.push_back(FreshFrame {
            id: 1,
            confirmed,
            payload_len: 20,
        });
        d.begin_next().unwrap();
    }

    #[test]
    fn unconfirmed_frame_goes_out_immediately() {
        let mut d = device(SpreadingFactor::SF7);
        queue(&mut d, false);
        let now = SimTime::from_secs(10.0);
        let tx = d
            .on_uplink_due(now, &MacConfig::default(), &EnergyModel::default())
            .unwrap();
        assert_eq!(tx.start, now);
        assert!(!tx.frame.confirmed);
        assert!((d.distance_m - 50.0).abs() < 1e-12);
    }

    #[test]
    fn blocked_gate_defers_start() {
        let mut d = device(SpreadingFactor::SF7);
        queue(&mut d, true);
        let now = SimTime::from_secs(10.0);
        d.gate.blocked_until = SimTime::from_secs(12.0);
        let tx = d
            .on_uplink_due(now, &MacConfig::default(), &EnergyModel::default())
            .unwrap();
        assert_eq!(tx.start, SimTime::from_secs(12.0));
    }

    #[test]
    fn gate_closes_for_ninety_nine_airtimes() {
        let mut d = device(SpreadingFactor::SF7);
        queue(&mut d, false);
        let tx = d
            .on_uplink_due(
                SimTime::ZERO,
                &MacConfig::default(),
                &EnergyModel::default(),
            )
            .unwrap();
        let expect = tx.end().as_ms() + 5_601.024;
        assert!((d.gate.blocked_until.as_ms() - expect).abs() < 1e-6);
        assert!((d.energy_mj - 8.2148352).abs() < 1e-9);
    }

    #[test]
    fn receive_windows() {
        let mut d = device(SpreadingFactor::new(8).unwrap());
        queue(&mut d, true);
        let end = SimTime::from_secs(5.0);
        let cfg = MacConfig::default();
        let [rx1, rx2] = d.open_rx_windows(end, &cfg);
        assert_eq!(rx1.opens_at, SimTime::from_secs(6.0));
        assert_eq!(rx1.params.freq, Frequency::from_mhz(868.1));
        assert_eq!(rx1.params.sf.value(), 8);
        assert_eq!(rx2.opens_at, SimTime::from_secs(7.0));
        assert_eq!(rx2.params.freq, Frequency::from_mhz(869.545));
        assert_eq!(rx2.params.sf, SpreadingFactor::SF12);
        assert_eq!(rx2.params.bw, Bandwidth::Khz125);

        let same = MacConfig {
            rx2_mode: Rx2Mode::SameAsRx1,
            ..cfg
        };
        let [_, rx2] = d.open_rx_windows(end, &same);
        assert_eq!(rx2.params.sf.value(), 8);
        assert_eq!(rx2.params.freq, Frequency::from_mhz(869.545));
    }

    #[test]
    fn retransmission_keeps_rate_without_decay() {
        let mut d = device(SpreadingFactor::SF7);
        queue(&mut d, true);
        let cfg = MacConfig::default();
        assert_eq!(
            d.on_ack_timeout(&cfg),
            AckTimeoutOutcome::Retransmit(d.radio)
        );
        assert_eq!(d.pending.unwrap().attempt, 2);
    }

    #[test]
    fn decay_steps_every_two_failures() {
        let mut d = device(SpreadingFactor::SF7);
        queue(&mut d, true);
        let cfg = MacConfig {
            dr_decay: true,
            ..MacConfig::default()
        };
        let mut sfs = vec![d.current.sf.value()];
        while let AckTimeoutOutcome::Retransmit(p) = d.on_ack_timeout(&cfg) {
            sfs.push(p.sf.value());
        }
        assert_eq!(sfs, vec![7, 7, 8, 8, 9, 9, 10, 10]);
        d.finish_cycle();
        assert_eq!(d.current.sf, SpreadingFactor::SF7);
    }

    #[test]
    fn decay_caps_at_sf12() {
        let mut d = device(SpreadingFactor::new(11).unwrap());
        queue(&mut d, true);
        let cfg = MacConfig {
            dr_decay: true,
            ..MacConfig::default()
        };
        let mut last = d.current.sf;
        while let AckTimeoutOutcome::Retransmit(p) = d.on_ack_timeout(&cfg) {
            last = p.sf;
        }
        assert_eq!(last, SpreadingFactor::SF12);
    }

    #[test]
    fn gives_up_after_max_attempts() {
        let mut d = device(SpreadingFactor::SF7);
        queue(&mut d, true);
        let cfg = MacConfig::default();
        let mut retries = 0;
        while d.on_ack_timeout(&cfg) != AckTimeoutOutcome::GiveUp {
            retries += 1;
        }
        assert_eq!(retries, 7);
        assert_eq!(d.pending.unwrap().attempt, 8);
    }

    #[test]
    fn stop_and_wait() {
        let mut d = device(SpreadingFactor::SF7);
        queue(&mut d, true);
        d.backlog.push_back(FreshFrame {
            id: 2,
            confirmed: true,
            payload_len: 20,
        });
        assert!(d.begin_next().is_none());
        d.finish_cycle();
        assert_eq!(d.begin_next().unwrap().id, 2);
    }
}
