use std::collections::BTreeMap;

use crate::engine::SimTime;
use crate::error::MacError;
use crate::phy::RadioParams;

/// Transmit-current model: supply voltage and current draw per TX power.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyModel {
    pub supply_voltage: f64,
    /// mA per integer dBm setting.
    pub tx_current_ma: BTreeMap<i32, f64>,
}

impl Default for EnergyModel {
    /// SX1272 current draw for -2..=20 dBm at 3.3 V.
    fn default() -> Self {
        const TABLE: [f64; 23] = [
            22.0, 22.0, 22.0, 23.0, 24.0, 24.0, 24.0, 25.0, 25.0, 25.0, 25.0, 26.0, 31.0, 32.0,
            34.0, 35.0, 44.0, 82.0, 85.0, 90.0, 105.0, 115.0, 125.0,
        ];
        EnergyModel {
            supply_voltage: 3.3,
            tx_current_ma: (-2..=20).zip(TABLE).collect(),
        }
    }
}

impl EnergyModel {
    /// Energy in millijoules spent transmitting for `airtime`.
    pub fn tx_energy(&self, params: &RadioParams, airtime: SimTime) -> Result<f64, MacError> {
        let dbm = params.tx_power_dbm.round() as i32;
        let current = self
            .tx_current_ma
            .get(&dbm)
            .ok_or(MacError::MissingCurrent(dbm))?;
        Ok(self.supply_voltage * current * airtime.as_ms() / 1_000.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::{airtime, Bandwidth, FrameFormat, Frequency, SpreadingFactor};

    fn params(sf: SpreadingFactor) -> RadioParams {
        RadioParams::new(sf, Bandwidth::Khz125, Frequency::from_mhz(868.1))
    }

    #[test]
    fn fourteen_dbm_reference() {
        let e = EnergyModel::default()
            .tx_energy(&params(SpreadingFactor::SF7), SimTime::from_ms(56.576))
            .unwrap();
        // 3.3 V * 44 mA * 56.576 ms
        assert!((e - 8.2148352).abs() < 1e-9);
    }

    #[test]
    fn zero_airtime_costs_nothing() {
        let e = EnergyModel::default()
            .tx_energy(&params(SpreadingFactor::SF12), SimTime::ZERO)
            .unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn energy_scales_with_airtime() {
        let m = EnergyModel::default();
        let f = FrameFormat::default();
        let slow = params(SpreadingFactor::SF12);
        let fast = params(SpreadingFactor::SF7);
        let e12 = m.tx_energy(&slow, airtime(&slow, 20, &f).unwrap()).unwrap();
        let e7 = m.tx_energy(&fast, airtime(&fast, 20, &f).unwrap()).unwrap();
        assert!((e12 / e7 - 1318.912 / 56.576).abs() < 1e-9);
        assert!((e12 / e7 - 23.31).abs() < 0.01);
    }

    #[test]
    fn missing_power_level() {
        let mut p = params(SpreadingFactor::SF7);
        p.tx_power_dbm = 27.0;
        assert_eq!(
            EnergyModel::default().tx_energy(&p, SimTime::from_ms(1.0)),
            Err(MacError::MissingCurrent(27))
        );
    }
}
