use std::collections::{BTreeMap, VecDeque};

use super::{
    DutyCycleGate, Frame, FrameKind, MacConfig, NodeId, RxWindow, Transmission, WindowSlot,
};
use crate::engine::SimTime;
use crate::error::PhyError;
use crate::phy::{airtime, Direction};

/// Why a downlink did not reach its device. Variants are in attribution
/// priority order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DownlinkFailure {
    DutyCycle,
    Busy,
    Collision,
    Link,
}

impl DownlinkFailure {
    pub const ALL: [DownlinkFailure; 4] = [
        DownlinkFailure::DutyCycle,
        DownlinkFailure::Busy,
        DownlinkFailure::Collision,
        DownlinkFailure::Link,
    ];

    pub fn label(self) -> &'static str {
        match self {
            DownlinkFailure::DutyCycle => "duty_cycle",
            DownlinkFailure::Busy => "busy",
            DownlinkFailure::Collision => "collision",
            DownlinkFailure::Link => "link",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BookedDownlink {
    pub slot: WindowSlot,
    pub tx: Transmission,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DownlinkOutcome {
    /// The gateway committed to transmitting in this window.
    Delivered(BookedDownlink),
    Failed(DownlinkFailure),
}

/// Downlink application data waiting for its addressee to open windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueuedDownlink {
    pub id: u64,
    pub payload_len: usize,
    pub cycles_left: u32,
}

/// Single gateway: per-sub-band duty-cycle gates, transmit reservations and
/// per-device downlink queues.
#[derive(Debug, Clone)]
pub struct GatewayState {
    pub gates: Vec<DutyCycleGate>,
    /// Reserved transmit intervals, ordered by start.
    bookings: VecDeque<(SimTime, SimTime)>,
    queues: BTreeMap<NodeId, VecDeque<QueuedDownlink>>,
}

impl GatewayState {
    pub fn new(cfg: &MacConfig) -> Self {
        GatewayState {
            gates: cfg.bands.gates(),
            bookings: VecDeque::new(),
            queues: BTreeMap::new(),
        }
    }

    pub fn enqueue(&mut self, device: NodeId, item: QueuedDownlink) {
        self.queues.entry(device).or_default().push_back(item);
    }

    /// Puts an item back at the head of the device's queue.
    pub fn requeue(&mut self, device: NodeId, item: QueuedDownlink) {
        self.queues.entry(device).or_default().push_front(item);
    }

    pub fn queued(&self, device: NodeId) -> usize {
        self.queues.get(&device).map_or(0, VecDeque::len)
    }

    pub fn queued_total(&self) -> usize {
        self.queues.values().map(VecDeque::len).sum()
    }

    /// Builds the downlink for a device whose uplink was just decoded:
    /// an ACK if `ack_for` is set, queued data if any, or both merged.
    pub fn compose(
        &mut self,
        device: NodeId,
        ack_for: Option<&Frame>,
        cfg: &MacConfig,
    ) -> Option<(Frame, Option<QueuedDownlink>)> {
        let data = self.queues.get_mut(&device).and_then(VecDeque::pop_front);
        let (kind, id, attempt, payload_len) = match (ack_for, data) {
            (None, None) => return None,
            (Some(up), None) => (FrameKind::Ack, up.id, up.attempt, cfg.ack_payload_len),
            (None, Some(d)) => (FrameKind::Data, d.id, 1, d.payload_len),
            (Some(up), Some(d)) => (FrameKind::DataWithAck, up.id, up.attempt, d.payload_len),
        };
        let frame = Frame {
            id,
            direction: Direction::Downlink,
            kind,
            confirmed: false,
            payload_len,
            device,
            attempt,
        };
        Some((frame, data))
    }

    fn is_busy(&self, start: SimTime, end: SimTime) -> bool {
        self.bookings.iter().any(|&(s, e)| start < e && s < end)
    }

    fn try_window(
        &mut self,
        frame: Frame,
        window: &RxWindow,
        cfg: &MacConfig,
    ) -> Result<Result<BookedDownlink, DownlinkFailure>, PhyError> {
        let air = airtime(&window.params, frame.payload_len, &cfg.frame_format)?;
        let start = window.opens_at;
        let end = start + air;
        let band = cfg
            .bands
            .band_of(window.params.freq)
            .expect("downlink frequency outside every sub-band");
        if !self.gates[band.0].is_open(start) {
            return Ok(Err(DownlinkFailure::DutyCycle));
        }
        if self.is_busy(start, end) {
            return Ok(Err(DownlinkFailure::Busy));
        }
        self.gates[band.0].advance(end, air);
        let at = self.bookings.partition_point(|&(s, _)| s <= start);
        self.bookings.insert(at, (start, end));
        Ok(Ok(BookedDownlink {
            slot: window.slot,
            tx: Transmission {
                frame,
                params: window.params,
                start,
                airtime: air,
            },
        }))
    }

    /// Reserves a transmission in RX1, falling back to RX2. `now` must not
    /// be later than the RX1 opening.
    pub fn schedule_downlink(
        &mut self,
        now: SimTime,
        frame: Frame,
        windows: &[RxWindow; 2],
        cfg: &MacConfig,
    ) -> Result<DownlinkOutcome, PhyError> {
        while self.bookings.front().is_some_and(|&(_, e)| e <= now) {
            self.bookings.pop_front();
        }
        let mut worst: Option<DownlinkFailure> = None;
        for window in windows {
            match self.try_window(frame, window, cfg)? {
                Ok(booked) => return Ok(DownlinkOutcome::Delivered(booked)),
                Err(cause) => worst = Some(worst.map_or(cause, |w| w.min(cause))),
            }
        }
        Ok(DownlinkOutcome::Failed(worst.expect("two windows tried")))
    }
}
