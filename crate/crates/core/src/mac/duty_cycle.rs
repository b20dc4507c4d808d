//! Per-transmitter, per-sub-band duty-cycle gates.

use crate::engine::SimTime;
use crate::phy::Frequency;

/// A regulatory sub-band: a frequency range with an on-air time limit.
#[derive(Debug, Clone, PartialEq)]
pub struct SubBand {
    pub name: String,
    pub lo: Frequency,
    pub hi: Frequency,
    /// Maximum fraction of time on air, in (0, 1].
    pub limit: f64,
}

impl SubBand {
    pub fn contains(&self, freq: Frequency) -> bool {
        self.lo <= freq && freq <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubBandId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct SubBandPlan {
    bands: Vec<SubBand>,
}

impl Default for SubBandPlan {
    /// EU868 g1 (868.0-868.6 MHz, 1%) and g3 (869.4-869.65 MHz, 10%).
    fn default() -> Self {
        Self::eu868(0.01, 0.10)
    }
}

impl SubBandPlan {
    pub fn eu868(g1_limit: f64, g3_limit: f64) -> Self {
        SubBandPlan {
            bands: vec![
                SubBand {
                    name: "g1".into(),
                    lo: Frequency::from_khz(868_000),
                    hi: Frequency::from_khz(868_600),
                    limit: g1_limit,
                },
                SubBand {
                    name: "g3".into(),
                    lo: Frequency::from_khz(869_400),
                    hi: Frequency::from_khz(869_650),
                    limit: g3_limit,
                },
            ],
        }
    }

    pub fn band_of(&self, freq: Frequency) -> Option<SubBandId> {
        self.bands
            .iter()
            .position(|b| b.contains(freq))
            .map(SubBandId)
    }

    pub fn band(&self, id: SubBandId) -> &SubBand {
        &self.bands[id.0]
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    /// Fresh, fully open gates, one per band.
    pub fn gates(&self) -> Vec<DutyCycleGate> {
        self.bands
            .iter()
            .map(|b| DutyCycleGate::new(b.limit))
            .collect()
    }
}

/// Tracks when a transmitter may next use a sub-band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DutyCycleGate {
    pub limit: f64,
    pub blocked_until: SimTime,
}

impl DutyCycleGate {
    pub fn new(limit: f64) -> Self {
        assert!(
            limit > 0.0 && limit <= 1.0,
            "duty-cycle limit {limit} outside (0, 1]"
        );
        DutyCycleGate {
            limit,
            blocked_until: SimTime::ZERO,
        }
    }

    pub fn is_open(&self, at: SimTime) -> bool {
        at >= self.blocked_until
    }

    /// Off-period that must follow a frame of the given airtime.
    pub fn off_period(&self, airtime: SimTime) -> SimTime {
        off_period(self.limit, airtime)
    }

    pub fn advance(&mut self, tx_end: SimTime, airtime: SimTime) {
        *self = duty_cycle_advance(*self, tx_end, airtime);
    }
}

pub fn off_period(limit: f64, airtime: SimTime) -> SimTime {
    airtime.scale(1.0 / limit - 1.0)
}

/// Gate state after a frame of `airtime` ending at `tx_end`.
pub fn duty_cycle_advance(gate: DutyCycleGate, tx_end: SimTime, airtime: SimTime) -> DutyCycleGate {
    DutyCycleGate {
        limit: gate.limit,
        blocked_until: tx_end + gate.off_period(airtime),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: SimTime, b: f64) -> bool {
        (a.as_ms() - b).abs() < 1e-6
    }

    #[test]
    fn one_percent_is_ninety_nine_times_airtime() {
        let t = SimTime::from_secs(100.0);
        let g = duty_cycle_advance(DutyCycleGate::new(0.01), t, SimTime::from_ms(56.576));
        assert!(close(g.blocked_until, 100_000.0 + 5_601.024));
    }

    #[test]
    fn ten_percent_is_nine_times_airtime() {
        let t = SimTime::from_secs(3.0);
        let g = duty_cycle_advance(DutyCycleGate::new(0.10), t, SimTime::from_ms(1318.912));
        assert!(close(g.blocked_until, 3_000.0 + 11_870.208));
    }

    #[test]
    fn unlimited_band_never_blocks() {
        let t = SimTime::from_secs(7.0);
        let g = duty_cycle_advance(DutyCycleGate::new(1.0), t, SimTime::from_ms(500.0));
        assert_eq!(g.blocked_until, t);
        assert!(g.is_open(t));
    }

    #[test]
    fn default_plan_maps_channels() {
        let plan = SubBandPlan::default();
        for mhz in [868.1, 868.3, 868.5] {
            assert_eq!(plan.band_of(Frequency::from_mhz(mhz)), Some(SubBandId(0)));
        }
        assert_eq!(
            plan.band_of(Frequency::from_mhz(869.545)),
            Some(SubBandId(1))
        );
        assert_eq!(plan.band_of(Frequency::from_mhz(867.1)), None);
    }
}
