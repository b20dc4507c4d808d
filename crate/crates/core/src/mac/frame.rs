use std::fmt;

use crate::engine::SimTime;
use crate::phy::{Direction, RadioParams};

/// Index of an end device within a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// MAC command exchanges. Only used to label traffic; none of them change
/// device behaviour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MacCommand {
    LinkCheckReq,
    LinkCheckAns,
    LinkAdrReq,
    LinkAdrAns,
    DutyCycleReq,
    DutyCycleAns,
    RxParamSetupReq,
    RxParamSetupAns,
    DevStatusReq,
    DevStatusAns,
    NewChannelReq,
    NewChannelAns,
    RxTimingSetupReq,
    RxTimingSetupAns,
}

impl MacCommand {
    /// Link direction in which the command travels.
    pub fn direction(self) -> Direction {
        use MacCommand::*;
        match self {
            LinkCheckReq | LinkAdrAns | DutyCycleAns | RxParamSetupAns | DevStatusAns
            | NewChannelAns | RxTimingSetupAns => Direction::Uplink,
            LinkCheckAns | LinkAdrReq | DutyCycleReq | RxParamSetupReq | DevStatusReq
            | NewChannelReq | RxTimingSetupReq => Direction::Downlink,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameKind {
    Data,
    Ack,
    /// Downlink data with a piggybacked acknowledgement.
    DataWithAck,
    MacCommand(MacCommand),
}

impl FrameKind {
    pub fn carries_ack(self) -> bool {
        matches!(self, FrameKind::Ack | FrameKind::DataWithAck)
    }

    pub fn carries_data(self) -> bool {
        matches!(self, FrameKind::Data | FrameKind::DataWithAck)
    }

    pub fn label(self) -> &'static str {
        match self {
            FrameKind::Data => "data",
            FrameKind::Ack => "ack",
            FrameKind::DataWithAck => "data+ack",
            FrameKind::MacCommand(_) => "mac",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameError {
    AttemptOutOfRange,
    ConfirmedDownlink,
    UplinkAck,
    AckPayload,
    WrongCommandDirection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Frame {
    /// Fresh-frame id for uplinks; for ACK-bearing downlinks the id of the
    /// uplink being acknowledged.
    pub id: u64,
    pub direction: Direction,
    pub kind: FrameKind,
    pub confirmed: bool,
    pub payload_len: usize,
    /// Sender of an uplink or addressee of a downlink.
    pub device: NodeId,
    /// 1-based; for ACKs, the attempt being acknowledged.
    pub attempt: u8,
}

impl Frame {
    pub fn check(&self, max_attempts: u8, ack_payload_len: usize) -> Result<(), FrameError> {
        if self.attempt == 0 || self.attempt > max_attempts {
            return Err(FrameError::AttemptOutOfRange);
        }
        match (self.direction, self.kind) {
            (Direction::Downlink, _) if self.confirmed => Err(FrameError::ConfirmedDownlink),
            (Direction::Uplink, FrameKind::Ack | FrameKind::DataWithAck) => {
                Err(FrameError::UplinkAck)
            }
            (_, FrameKind::Ack) if self.payload_len != ack_payload_len => {
                Err(FrameError::AckPayload)
            }
            (dir, FrameKind::MacCommand(cmd)) if cmd.direction() != dir => {
                Err(FrameError::WrongCommandDirection)
            }
            _ => Ok(()),
        }
    }
}

/// One frame on the air.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmission {
    pub frame: Frame,
    pub params: RadioParams,
    pub start: SimTime,
    pub airtime: SimTime,
}

impl Transmission {
    pub fn end(&self) -> SimTime {
        self.start + self.airtime
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(direction: Direction, kind: FrameKind) -> Frame {
        Frame {
            id: 1,
            direction,
            kind,
            confirmed: false,
            payload_len: 0,
            device: NodeId(0),
            attempt: 1,
        }
    }

    #[test]
    fn piggybacked_ack_is_downlink_only() {
        assert_eq!(
            frame(Direction::Uplink, FrameKind::DataWithAck).check(8, 0),
            Err(FrameError::UplinkAck)
        );
        assert!(frame(Direction::Downlink, FrameKind::DataWithAck)
            .check(8, 0)
            .is_ok());
    }

    #[test]
    fn attempt_bounds() {
        let mut f = frame(Direction::Uplink, FrameKind::Data);
        f.attempt = 9;
        assert_eq!(f.check(8, 0), Err(FrameError::AttemptOutOfRange));
        f.attempt = 0;
        assert_eq!(f.check(8, 0), Err(FrameError::AttemptOutOfRange));
    }

    #[test]
    fn command_directions() {
        let req = FrameKind::MacCommand(MacCommand::LinkCheckReq);
        assert!(frame(Direction::Uplink, req).check(8, 0).is_ok());
        assert_eq!(
            frame(Direction::Downlink, req).check(8, 0),
            Err(FrameError::WrongCommandDirection)
        );
        assert_eq!(MacCommand::DutyCycleReq.direction(), Direction::Downlink);
    }

    #[test]
    fn ack_payload_must_match() {
        let mut f = frame(Direction::Downlink, FrameKind::Ack);
        f.payload_len = 3;
        assert_eq!(f.check(8, 0), Err(FrameError::AckPayload));
    }
}
