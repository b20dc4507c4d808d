//! LoRaWAN Class-A MAC: device transmit/receive cycle, confirmed-traffic
//! retransmissions, gateway downlink scheduling and duty-cycle gates.

mod device;
mod duty_cycle;
mod energy;
mod frame;
mod gateway;

pub use device::{AckTimeoutOutcome, DeviceState, FreshFrame};
pub use duty_cycle::{
    duty_cycle_advance, off_period, DutyCycleGate, SubBand, SubBandId, SubBandPlan,
};
pub use energy::EnergyModel;
pub use frame::{Frame, FrameError, FrameKind, MacCommand, NodeId, Transmission};
pub use gateway::{BookedDownlink, DownlinkFailure, DownlinkOutcome, GatewayState, QueuedDownlink};

use crate::engine::SimTime;
use crate::phy::{Bandwidth, FrameFormat, Frequency, RadioParams, SpreadingFactor};

/// Data rate used in the second receive window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rx2Mode {
    /// Fixed regional RX2 parameters (869.545 MHz SF12 in EU868 by default).
    Default,
    /// RX2 frequency, but the uplink's data rate.
    SameAsRx1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WindowSlot {
    Rx1,
    Rx2,
}

/// A receive window the device opens after an uplink.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RxWindow {
    pub slot: WindowSlot,
    pub opens_at: SimTime,
    pub params: RadioParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacConfig {
    pub max_attempts: u8,
    /// Step the spreading factor up every two failed attempts.
    pub dr_decay: bool,
    pub rx1_delay: SimTime,
    pub rx2_delay: SimTime,
    pub rx2_mode: Rx2Mode,
    pub rx2_freq: Frequency,
    pub rx2_sf: SpreadingFactor,
    pub rx2_bw: Bandwidth,
    pub ack_payload_len: usize,
    pub downlink_payload_len: usize,
    pub backoff_min: SimTime,
    pub backoff_max: SimTime,
    /// Uplink cycles a queued downlink-data frame may be offered before it
    /// is dropped.
    pub downlink_retry_cycles: u32,
    pub frame_format: FrameFormat,
    pub bands: SubBandPlan,
    pub gateway_tx_power_dbm: f64,
}

impl Default for MacConfig {
    fn default() -> Self {
        MacConfig {
            max_attempts: 8,
            dr_decay: false,
            rx1_delay: SimTime::from_secs(1.0),
            rx2_delay: SimTime::from_secs(2.0),
            rx2_mode: Rx2Mode::Default,
            rx2_freq: Frequency::from_khz(869_545),
            rx2_sf: SpreadingFactor::SF12,
            rx2_bw: Bandwidth::Khz125,
            ack_payload_len: 0,
            downlink_payload_len: 20,
            backoff_min: SimTime::from_secs(1.0),
            backoff_max: SimTime::from_secs(3.0),
            downlink_retry_cycles: 1,
            frame_format: FrameFormat::default(),
            bands: SubBandPlan::default(),
            gateway_tx_power_dbm: 14.0,
        }
    }
}
