//! LoRa physical layer: modulation parameters, time on air, link budget and
//! same-receiver collision resolution.

use std::collections::HashMap;
use std::fmt;

use crate::engine::SimTime;
use crate::error::PhyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SpreadingFactor(u8);

impl SpreadingFactor {
    pub const SF7: SpreadingFactor = SpreadingFactor(7);
    pub const SF12: SpreadingFactor = SpreadingFactor(12);

    pub const ALL: [SpreadingFactor; 6] = [
        SpreadingFactor(7),
        SpreadingFactor(8),
        SpreadingFactor(9),
        SpreadingFactor(10),
        SpreadingFactor(11),
        SpreadingFactor(12),
    ];

    pub fn new(sf: u8) -> Result<Self, PhyError> {
        if (7..=12).contains(&sf) {
            Ok(SpreadingFactor(sf))
        } else {
            Err(PhyError::SpreadingFactor(sf))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// Raises the spreading factor by `steps`, capped at SF12.
    pub fn slower(self, steps: u8) -> Self {
        SpreadingFactor(self.0.saturating_add(steps).min(12))
    }

    fn index(self) -> usize {
        usize::from(self.0 - 7)
    }
}

impl fmt::Display for SpreadingFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SF{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bandwidth {
    Khz125,
    Khz250,
    Khz500,
}

impl Bandwidth {
    pub const ALL: [Bandwidth; 3] = [Bandwidth::Khz125, Bandwidth::Khz250, Bandwidth::Khz500];

    pub fn from_khz(khz: u32) -> Result<Self, PhyError> {
        match khz {
            125 => Ok(Bandwidth::Khz125),
            250 => Ok(Bandwidth::Khz250),
            500 => Ok(Bandwidth::Khz500),
            other => Err(PhyError::Bandwidth(other)),
        }
    }

    pub fn khz(self) -> u32 {
        match self {
            Bandwidth::Khz125 => 125,
            Bandwidth::Khz250 => 250,
            Bandwidth::Khz500 => 500,
        }
    }

    fn index(self) -> usize {
        match self {
            Bandwidth::Khz125 => 0,
            Bandwidth::Khz250 => 1,
            Bandwidth::Khz500 => 2,
        }
    }
}

/// Coding rate 4/(4+n) stored as the offset n in 1..=4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CodingRate(u8);

impl CodingRate {
    pub const CR4_5: CodingRate = CodingRate(1);

    pub fn new(offset: u8) -> Result<Self, PhyError> {
        if (1..=4).contains(&offset) {
            Ok(CodingRate(offset))
        } else {
            Err(PhyError::CodingRate(offset))
        }
    }

    pub fn offset(self) -> u8 {
        self.0
    }
}

/// Carrier frequency with kHz resolution, so channels compare exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Frequency(u32);

impl Frequency {
    pub const fn from_khz(khz: u32) -> Self {
        Frequency(khz)
    }

    pub fn from_mhz(mhz: f64) -> Self {
        Frequency((mhz * 1_000.0).round() as u32)
    }

    pub fn khz(self) -> u32 {
        self.0
    }

    pub fn mhz(self) -> f64 {
        f64::from(self.0) / 1_000.0
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}", self.mhz())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Uplink,
    Downlink,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Uplink => "up",
            Direction::Downlink => "down",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioParams {
    pub sf: SpreadingFactor,
    pub bw: Bandwidth,
    pub cr: CodingRate,
    pub freq: Frequency,
    pub tx_power_dbm: f64,
}

impl RadioParams {
    pub fn new(sf: SpreadingFactor, bw: Bandwidth, freq: Frequency) -> Self {
        RadioParams {
            sf,
            bw,
            cr: CodingRate::CR4_5,
            freq,
            tx_power_dbm: 14.0,
        }
    }

    /// Symbol duration in milliseconds.
    pub fn symbol_time_ms(&self) -> f64 {
        f64::from(1u32 << self.sf.value()) / f64::from(self.bw.khz())
    }
}

/// Framing options that affect time on air.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameFormat {
    pub preamble_symbols: u16,
    pub explicit_header: bool,
    pub crc: bool,
    /// Forces low-data-rate optimization. It is switched on regardless for
    /// SF11 and SF12 at 125 kHz.
    pub low_dr_optimize: bool,
}

impl Default for FrameFormat {
    fn default() -> Self {
        FrameFormat {
            preamble_symbols: 8,
            explicit_header: true,
            crc: true,
            low_dr_optimize: false,
        }
    }
}

/// Time on air of a LoRa frame carrying `payload_len` PHY payload bytes.
pub fn airtime(
    params: &RadioParams,
    payload_len: usize,
    format: &FrameFormat,
) -> Result<SimTime, PhyError> {
    if payload_len > 255 {
        return Err(PhyError::PayloadTooLong(payload_len));
    }
    if format.preamble_symbols < 6 {
        return Err(PhyError::PreambleTooShort(format.preamble_symbols));
    }
    let sf = i64::from(params.sf.value());
    let ldro = format.low_dr_optimize || (sf >= 11 && params.bw == Bandwidth::Khz125);
    let de = i64::from(ldro);
    let ih = i64::from(!format.explicit_header);
    let crc = i64::from(format.crc);

    let numerator = 8 * payload_len as i64 - 4 * sf + 28 + 16 * crc - 20 * ih;
    let denominator = 4 * (sf - 2 * de);
    // Ceiling division for a positive denominator.
    let blocks = (numerator + denominator - 1).div_euclid(denominator).max(0);
    let payload_symbols = 8 + blocks * (i64::from(params.cr.offset()) + 4);

    let t_sym = params.symbol_time_ms();
    let preamble = (f64::from(format.preamble_symbols) + 4.25) * t_sym;
    Ok(SimTime::from_ms(preamble + payload_symbols as f64 * t_sym))
}

/// Receiver sensitivity in dBm per (SF, bandwidth).
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityTable {
    // rows SF7..SF12, columns 125/250/500 kHz
    dbm: [[f64; 3]; 6],
}

impl Default for SensitivityTable {
    /// Semtech SX1276 datasheet figures.
    fn default() -> Self {
        SensitivityTable {
            dbm: [
                [-123.0, -120.0, -116.0],
                [-126.0, -123.0, -119.0],
                [-129.0, -125.0, -122.0],
                [-132.0, -128.0, -125.0],
                [-133.0, -130.0, -128.0],
                [-136.0, -133.0, -130.0],
            ],
        }
    }
}

impl SensitivityTable {
    pub fn get(&self, sf: SpreadingFactor, bw: Bandwidth) -> f64 {
        self.dbm[sf.index()][bw.index()]
    }

    pub fn set(&mut self, sf: SpreadingFactor, bw: Bandwidth, dbm: f64) {
        self.dbm[sf.index()][bw.index()] = dbm;
    }

    /// Sensitivity must strictly improve with every SF step.
    pub fn validate(&self) -> Result<(), PhyError> {
        for bw in Bandwidth::ALL {
            for pair in SpreadingFactor::ALL.windows(2) {
                if self.get(pair[1], bw) >= self.get(pair[0], bw) {
                    return Err(PhyError::LinkModel(
                        "sensitivity must decrease strictly with spreading factor",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Log-distance path loss with log-normal shadowing.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkModel {
    pub ref_distance_m: f64,
    pub ref_loss_db: f64,
    pub exponent: f64,
    /// Standard deviation of the zero-mean shadowing term.
    pub shadow_sigma_db: f64,
    pub shadowing: Shadowing,
    pub sensitivity: SensitivityTable,
}

/// How often the shadowing term is redrawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shadowing {
    /// A fresh draw for every frame on every link.
    PerTransmission,
    /// One draw per device, fixed for the whole run and seen by the
    /// data-rate assignment.
    PerLink,
}

impl Shadowing {
    pub fn label(self) -> &'static str {
        match self {
            Shadowing::PerTransmission => "per_transmission",
            Shadowing::PerLink => "per_link",
        }
    }
}

impl Default for LinkModel {
    fn default() -> Self {
        LinkModel {
            ref_distance_m: 40.0,
            ref_loss_db: 127.47,
            exponent: 2.08,
            shadow_sigma_db: 3.57,
            shadowing: Shadowing::PerLink,
            sensitivity: SensitivityTable::default(),
        }
    }
}

impl LinkModel {
    pub fn validate(&self) -> Result<(), PhyError> {
        if self.exponent.is_nan() || self.exponent <= 0.0 {
            return Err(PhyError::LinkModel("path loss exponent must be positive"));
        }
        if self.ref_distance_m.is_nan() || self.ref_distance_m <= 0.0 {
            return Err(PhyError::LinkModel("reference distance must be positive"));
        }
        if self.shadow_sigma_db.is_nan() || self.shadow_sigma_db < 0.0 {
            return Err(PhyError::LinkModel("shadowing sigma must be non-negative"));
        }
        self.sensitivity.validate()
    }

    pub fn path_loss(&self, distance_m: f64, shadow_db: f64) -> Result<f64, PhyError> {
        if distance_m.is_nan() || distance_m <= 0.0 {
            return Err(PhyError::Distance(distance_m));
        }
        Ok(self.ref_loss_db
            + 10.0 * self.exponent * (distance_m / self.ref_distance_m).log10()
            + shadow_db)
    }

    /// Distance at which the zero-shadow received power equals the
    /// sensitivity for `sf`.
    pub fn range_m(&self, sf: SpreadingFactor, bw: Bandwidth, tx_power_dbm: f64) -> f64 {
        let budget = tx_power_dbm - self.sensitivity.get(sf, bw) - self.ref_loss_db;
        self.ref_distance_m * 10f64.powf(budget / (10.0 * self.exponent))
    }

    /// Fastest spreading factor whose sensitivity the zero-shadow received
    /// power still meets, or `None` when even SF12 cannot close the link.
    pub fn min_spreading_factor(
        &self,
        distance_m: f64,
        tx_power_dbm: f64,
        bw: Bandwidth,
    ) -> Result<Option<SpreadingFactor>, PhyError> {
        let rssi = tx_power_dbm - self.path_loss(distance_m, 0.0)?;
        Ok(self.fastest_decodable(rssi, bw))
    }

    /// Fastest spreading factor whose sensitivity `rssi_dbm` meets.
    pub fn fastest_decodable(&self, rssi_dbm: f64, bw: Bandwidth) -> Option<SpreadingFactor> {
        SpreadingFactor::ALL
            .into_iter()
            .find(|&sf| rssi_dbm >= self.sensitivity.get(sf, bw))
    }
}

/// A frame as seen by one receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reception {
    pub id: u64,
    pub direction: Direction,
    pub freq: Frequency,
    pub sf: SpreadingFactor,
    pub bw: Bandwidth,
    pub rssi_dbm: f64,
}

/// Decides which of a set of time-overlapping receptions at one receiver
/// are decoded.
///
/// Frames below sensitivity are dropped and never interfere. The remainder
/// only interfere within the same (frequency, SF, direction) group, where the
/// strongest frame survives if it beats every other member by at least
/// `capture_threshold_db` (which must be positive); otherwise the whole group
/// is lost. Output preserves input order.
pub fn resolve_receptions(
    concurrent: &[Reception],
    sensitivity: &SensitivityTable,
    capture_threshold_db: f64,
) -> Vec<Reception> {
    debug_assert!(capture_threshold_db > 0.0);
    let mut groups: HashMap<(Frequency, SpreadingFactor, Direction), Vec<usize>> = HashMap::new();
    for (i, r) in concurrent.iter().enumerate() {
        if r.rssi_dbm >= sensitivity.get(r.sf, r.bw) {
            groups
                .entry((r.freq, r.sf, r.direction))
                .or_default()
                .push(i);
        }
    }

    let mut keep = vec![false; concurrent.len()];
    for members in groups.values_mut() {
        members.sort_by(|&a, &b| concurrent[b].rssi_dbm.total_cmp(&concurrent[a].rssi_dbm));
        let top = members[0];
        let margin = match members.get(1) {
            Some(&second) => concurrent[top].rssi_dbm - concurrent[second].rssi_dbm,
            None => f64::INFINITY,
        };
        if margin >= capture_threshold_db {
            keep[top] = true;
        }
    }

    concurrent
        .iter()
        .zip(keep)
        .filter_map(|(r, k)| k.then_some(*r))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(sf: u8, bw: u32) -> RadioParams {
        RadioParams::new(
            SpreadingFactor::new(sf).unwrap(),
            Bandwidth::from_khz(bw).unwrap(),
            Frequency::from_mhz(868.1),
        )
    }

    fn ms(t: SimTime) -> f64 {
        t.as_ms()
    }

    #[test]
    fn airtime_reference_points() {
        let f = FrameFormat::default();
        assert!((ms(airtime(&params(7, 125), 20, &f).unwrap()) - 56.576).abs() < 1e-9);
        assert!((ms(airtime(&params(12, 125), 20, &f).unwrap()) - 1318.912).abs() < 1e-9);
        assert!((ms(airtime(&params(9, 125), 0, &f).unwrap()) - 103.424).abs() < 1e-9);
    }

    #[test]
    fn airtime_rejects_bad_inputs() {
        let f = FrameFormat::default();
        assert_eq!(
            airtime(&params(7, 125), 256, &f),
            Err(PhyError::PayloadTooLong(256))
        );
        let short = FrameFormat {
            preamble_symbols: 5,
            ..f
        };
        assert_eq!(
            airtime(&params(7, 125), 10, &short),
            Err(PhyError::PreambleTooShort(5))
        );
        assert_eq!(SpreadingFactor::new(6), Err(PhyError::SpreadingFactor(6)));
        assert_eq!(Bandwidth::from_khz(62), Err(PhyError::Bandwidth(62)));
        assert_eq!(CodingRate::new(0), Err(PhyError::CodingRate(0)));
    }

    #[test]
    fn forced_ldro_lengthens_fast_frames() {
        let p = params(7, 125);
        let forced = FrameFormat {
            low_dr_optimize: true,
            ..FrameFormat::default()
        };
        assert!(
            airtime(&p, 51, &forced).unwrap() > airtime(&p, 51, &FrameFormat::default()).unwrap()
        );
    }

    #[test]
    fn path_loss_reference_points() {
        let m = LinkModel::default();
        assert!((m.path_loss(40.0, 0.0).unwrap() - 127.47).abs() < 1e-9);
        assert!((m.path_loss(400.0, 0.0).unwrap() - 148.27).abs() < 1e-9);
        assert!((m.path_loss(40.0, 3.0).unwrap() - 130.47).abs() < 1e-9);
        assert_eq!(m.path_loss(0.0, 0.0), Err(PhyError::Distance(0.0)));
        assert!(m.path_loss(-1.0, 0.0).is_err());
    }

    #[test]
    fn min_sf_assignment() {
        let m = LinkModel::default();
        let bw = Bandwidth::Khz125;
        assert_eq!(
            m.min_spreading_factor(40.0, 14.0, bw).unwrap(),
            Some(SpreadingFactor::SF7)
        );
        // Just inside the SF12 range but beyond SF11's.
        let r11 = m.range_m(SpreadingFactor::new(11).unwrap(), bw, 14.0);
        let r12 = m.range_m(SpreadingFactor::SF12, bw, 14.0);
        let mid = 0.5 * (r11 + r12);
        assert_eq!(
            m.min_spreading_factor(mid, 14.0, bw).unwrap(),
            Some(SpreadingFactor::SF12)
        );
        assert_eq!(m.min_spreading_factor(r12 * 1.01, 14.0, bw).unwrap(), None);
    }

    #[test]
    fn default_sensitivities_are_monotone() {
        assert!(SensitivityTable::default().validate().is_ok());
        let mut t = SensitivityTable::default();
        t.set(SpreadingFactor::SF12, Bandwidth::Khz125, -120.0);
        assert!(t.validate().is_err());
    }

    fn rx(id: u64, dir: Direction, mhz: f64, sf: u8, rssi: f64) -> Reception {
        Reception {
            id,
            direction: dir,
            freq: Frequency::from_mhz(mhz),
            sf: SpreadingFactor::new(sf).unwrap(),
            bw: Bandwidth::Khz125,
            rssi_dbm: rssi,
        }
    }

    fn decoded(set: &[Reception]) -> Vec<u64> {
        resolve_receptions(set, &SensitivityTable::default(), 6.0)
            .iter()
            .map(|r| r.id)
            .collect()
    }

    #[test]
    fn orthogonal_sfs_do_not_collide() {
        let set = [
            rx(1, Direction::Uplink, 868.1, 7, -100.0),
            rx(2, Direction::Uplink, 868.1, 9, -100.0),
        ];
        assert_eq!(decoded(&set), vec![1, 2]);
    }

    #[test]
    fn opposite_directions_do_not_collide() {
        let set = [
            rx(1, Direction::Uplink, 868.1, 7, -100.0),
            rx(2, Direction::Downlink, 868.1, 7, -100.0),
        ];
        assert_eq!(decoded(&set), vec![1, 2]);
    }

    #[test]
    fn capture_threshold() {
        let weak = [
            rx(1, Direction::Uplink, 868.1, 7, -100.0),
            rx(2, Direction::Uplink, 868.1, 7, -98.0),
        ];
        assert!(decoded(&weak).is_empty());
        let strong = [
            rx(1, Direction::Uplink, 868.1, 7, -100.0),
            rx(2, Direction::Uplink, 868.1, 7, -92.0),
        ];
        assert_eq!(decoded(&strong), vec![2]);
    }

    #[test]
    fn inaudible_frames_neither_decode_nor_interfere() {
        let set = [
            rx(1, Direction::Uplink, 868.1, 7, -110.0),
            rx(2, Direction::Uplink, 868.1, 7, -124.0),
        ];
        assert_eq!(decoded(&set), vec![1]);
    }

    #[test]
    fn equal_power_pair_is_lost() {
        let set = [
            rx(1, Direction::Uplink, 868.1, 7, -100.0),
            rx(2, Direction::Uplink, 868.1, 7, -100.0),
        ];
        assert!(decoded(&set).is_empty());
    }
}
