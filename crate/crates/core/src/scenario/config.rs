//! Scenario configuration and its flat `key = value` file format.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::engine::SimTime;
use crate::error::ConfigError;
use crate::mac::{EnergyModel, MacConfig, Rx2Mode, SubBandPlan};
use crate::phy::{Bandwidth, CodingRate, Frequency, LinkModel, Shadowing, SpreadingFactor};

/// Inter-arrival law for fresh uplinks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrafficMode {
    Exponential,
    /// Fixed period with uniform relative jitter in `[-jitter, +jitter]`.
    Periodic {
        jitter: f64,
    },
}

/// Everything needed to build and run one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n_nodes: u32,
    pub sim_days: f64,
    pub replications: u32,
    pub channels: Vec<Frequency>,
    pub bw: Bandwidth,
    pub cr: CodingRate,
    pub tx_power_dbm: f64,
    pub confirmed_fraction: f64,
    pub downlink_fraction: f64,
    /// Seconds.
    pub mean_send_interval: f64,
    pub traffic_mode: TrafficMode,
    pub payload_len: usize,
    pub seed: u64,
    pub capture_threshold_db: f64,
    pub link: LinkModel,
    pub mac: MacConfig,
    pub g1_duty_cycle: f64,
    pub rx2_duty_cycle: f64,
    pub energy: EnergyModel,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_nodes: 100,
            sim_days: 57.0,
            replications: 15,
            channels: vec![
                Frequency::from_khz(868_100),
                Frequency::from_khz(868_300),
                Frequency::from_khz(868_500),
            ],
            bw: Bandwidth::Khz125,
            cr: CodingRate::CR4_5,
            tx_power_dbm: 14.0,
            confirmed_fraction: 0.0,
            downlink_fraction: 0.0,
            mean_send_interval: 1000.0,
            traffic_mode: TrafficMode::Exponential,
            payload_len: 20,
            seed: 1,
            capture_threshold_db: 6.0,
            link: LinkModel::default(),
            mac: MacConfig::default(),
            g1_duty_cycle: 0.01,
            rx2_duty_cycle: 0.10,
            energy: EnergyModel::default(),
        }
    }
}

/// Keys accepted in scenario files and `--set` overrides.
pub const KEYS: &[&str] = &[
    "n_nodes",
    "sim_days",
    "replications",
    "channels",
    "bw",
    "cr",
    "tx_power",
    "confirmed_fraction",
    "downlink_fraction",
    "mean_send_interval",
    "traffic_mode",
    "period_jitter",
    "payload_len",
    "max_attempts",
    "dr_decay",
    "seed",
    "capture_threshold",
    "ref_distance",
    "ref_loss",
    "path_loss_exponent",
    "shadow_sigma",
    "shadowing",
    "sensitivity_sf<7-12>_bw<125|250|500>",
    "g1_duty_cycle",
    "rx2_duty_cycle",
    "rx1_delay",
    "rx2_delay",
    "rx2_mode",
    "rx2_freq",
    "rx2_sf",
    "ack_payload_len",
    "downlink_payload_len",
    "backoff_min",
    "backoff_max",
    "downlink_retry_cycles",
    "preamble_symbols",
    "gateway_tx_power",
    "supply_voltage",
    "tx_current_<dBm>",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e: T::Err| ConfigError::value(key, value, e.to_string()))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(ConfigError::value(key, value, "expected true or false")),
    }
}

fn parse_fraction(key: &str, value: &str) -> Result<f64, ConfigError> {
    let f: f64 = parse(key, value)?;
    if (0.0..=1.0).contains(&f) {
        Ok(f)
    } else {
        Err(ConfigError::value(key, value, "must lie in [0, 1]"))
    }
}

fn parse_positive(key: &str, value: &str) -> Result<f64, ConfigError> {
    let f: f64 = parse(key, value)?;
    if f > 0.0 && f.is_finite() {
        Ok(f)
    } else {
        Err(ConfigError::value(key, value, "must be positive"))
    }
}

fn parse_duty(key: &str, value: &str) -> Result<f64, ConfigError> {
    let f = parse_positive(key, value)?;
    if f <= 1.0 {
        Ok(f)
    } else {
        Err(ConfigError::value(key, value, "must lie in (0, 1]"))
    }
}

fn parse_secs(key: &str, value: &str) -> Result<SimTime, ConfigError> {
    let s: f64 = parse(key, value)?;
    if s >= 0.0 && s.is_finite() {
        Ok(SimTime::from_secs(s))
    } else {
        Err(ConfigError::value(
            key,
            value,
            "must be a non-negative number of seconds",
        ))
    }
}

fn parse_sf(key: &str, value: &str) -> Result<SpreadingFactor, ConfigError> {
    let raw: u8 = parse(key, value.trim_start_matches(['S', 's', 'F', 'f']))?;
    SpreadingFactor::new(raw).map_err(|e| ConfigError::value(key, value, e.to_string()))
}

fn parse_bw(key: &str, value: &str) -> Result<Bandwidth, ConfigError> {
    Bandwidth::from_khz(parse(key, value)?)
        .map_err(|e| ConfigError::value(key, value, e.to_string()))
}

fn parse_payload(key: &str, value: &str) -> Result<usize, ConfigError> {
    let n: usize = parse(key, value)?;
    if n <= 255 {
        Ok(n)
    } else {
        Err(ConfigError::value(
            key,
            value,
            "LoRa payloads are at most 255 bytes",
        ))
    }
}

impl ScenarioConfig {
    /// Desk-scale profile: 2 simulated days, 5 replications.
    pub fn desk() -> Self {
        ScenarioConfig {
            sim_days: 2.0,
            replications: 5,
            ..Self::default()
        }
    }

    pub fn horizon(&self) -> SimTime {
        SimTime::from_days(self.sim_days)
    }

    /// Sub-band plan with this scenario's limits.
    pub fn bands(&self) -> SubBandPlan {
        SubBandPlan::eu868(self.g1_duty_cycle, self.rx2_duty_cycle)
    }

    /// MAC parameters with derived fields (sub-band plan, frame format)
    /// filled in from the rest of the scenario.
    pub fn mac_config(&self) -> MacConfig {
        MacConfig {
            bands: self.bands(),
            ..self.mac.clone()
        }
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        match key {
            "n_nodes" | "nodes" => {
                self.n_nodes = parse(key, value)?;
                if self.n_nodes == 0 {
                    return Err(ConfigError::value(key, value, "need at least one node"));
                }
            }
            "sim_days" | "days" => self.sim_days = parse_positive(key, value)?,
            "replications" => {
                self.replications = parse(key, value)?;
                if self.replications == 0 {
                    return Err(ConfigError::value(
                        key,
                        value,
                        "need at least one replication",
                    ));
                }
            }
            "channels" => {
                let mut out = Vec::new();
                for part in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                    let mhz: f64 = parse(key, part)?;
                    out.push(Frequency::from_mhz(mhz));
                }
                if out.is_empty() {
                    return Err(ConfigError::value(key, value, "need at least one channel"));
                }
                self.channels = out;
            }
            "bw" => self.bw = parse_bw(key, value)?,
            "cr" => {
                let raw: u8 = parse(key, value.trim_start_matches("4/"))?;
                // Accept both the offset (1..=4) and the denominator (5..=8).
                let offset = if raw >= 5 { raw - 4 } else { raw };
                self.cr = CodingRate::new(offset)
                    .map_err(|e| ConfigError::value(key, value, e.to_string()))?;
            }
            "tx_power" => self.tx_power_dbm = parse(key, value)?,
            "confirmed_fraction" | "confirmed" => {
                self.confirmed_fraction = parse_fraction(key, value)?
            }
            "downlink_fraction" | "downlink" => {
                self.downlink_fraction = parse_fraction(key, value)?
            }
            "mean_send_interval" | "mean_interval" => {
                self.mean_send_interval = parse_positive(key, value)?
            }
            "traffic_mode" => {
                self.traffic_mode = match value {
                    "exponential" | "poisson" => TrafficMode::Exponential,
                    "periodic" => TrafficMode::Periodic { jitter: 0.1 },
                    _ => {
                        return Err(ConfigError::value(
                            key,
                            value,
                            "expected exponential or periodic",
                        ))
                    }
                }
            }
            "period_jitter" => {
                let jitter = parse_fraction(key, value)?;
                self.traffic_mode = TrafficMode::Periodic { jitter };
            }
            "payload_len" | "payload" => self.payload_len = parse_payload(key, value)?,
            "max_attempts" => {
                let n: u8 = parse(key, value)?;
                if !(1..=15).contains(&n) {
                    return Err(ConfigError::value(key, value, "must lie in 1..=15"));
                }
                self.mac.max_attempts = n;
            }
            "dr_decay" => self.mac.dr_decay = parse_bool(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "capture_threshold" => self.capture_threshold_db = parse_positive(key, value)?,
            "ref_distance" => self.link.ref_distance_m = parse_positive(key, value)?,
            "ref_loss" => self.link.ref_loss_db = parse(key, value)?,
            "path_loss_exponent" => self.link.exponent = parse_positive(key, value)?,
            "shadow_sigma" => {
                let s: f64 = parse(key, value)?;
                if s.is_nan() || s < 0.0 {
                    return Err(ConfigError::value(key, value, "must be non-negative"));
                }
                self.link.shadow_sigma_db = s;
            }
            "shadowing" => {
                self.link.shadowing = match value {
                    "per_link" | "per-link" => Shadowing::PerLink,
                    "per_transmission" | "per-transmission" => Shadowing::PerTransmission,
                    _ => {
                        return Err(ConfigError::value(
                            key,
                            value,
                            "expected per_link or per_transmission",
                        ))
                    }
                }
            }
            "g1_duty_cycle" => self.g1_duty_cycle = parse_duty(key, value)?,
            "rx2_duty_cycle" => self.rx2_duty_cycle = parse_duty(key, value)?,
            "rx1_delay" => self.mac.rx1_delay = parse_secs(key, value)?,
            "rx2_delay" => self.mac.rx2_delay = parse_secs(key, value)?,
            "rx2_mode" => {
                self.mac.rx2_mode = match value {
                    "default" => Rx2Mode::Default,
                    "rx1" | "same-as-rx1" | "same_as_rx1" => Rx2Mode::SameAsRx1,
                    _ => {
                        return Err(ConfigError::value(
                            key,
                            value,
                            "expected default or same-as-rx1",
                        ))
                    }
                }
            }
            "rx2_freq" => self.mac.rx2_freq = Frequency::from_mhz(parse_positive(key, value)?),
            "rx2_sf" => self.mac.rx2_sf = parse_sf(key, value)?,
            "rx2_bw" => self.mac.rx2_bw = parse_bw(key, value)?,
            "ack_payload_len" => self.mac.ack_payload_len = parse_payload(key, value)?,
            "downlink_payload_len" => self.mac.downlink_payload_len = parse_payload(key, value)?,
            "backoff_min" => self.mac.backoff_min = parse_secs(key, value)?,
            "backoff_max" => self.mac.backoff_max = parse_secs(key, value)?,
            "downlink_retry_cycles" => {
                self.mac.downlink_retry_cycles = parse(key, value)?;
                if self.mac.downlink_retry_cycles == 0 {
                    return Err(ConfigError::value(key, value, "must be at least 1"));
                }
            }
            "preamble_symbols" => {
                let n: u16 = parse(key, value)?;
                if n < 6 {
                    return Err(ConfigError::value(key, value, "at least 6 symbols"));
                }
                self.mac.frame_format.preamble_symbols = n;
            }
            "gateway_tx_power" => self.mac.gateway_tx_power_dbm = parse(key, value)?,
            "supply_voltage" => self.energy.supply_voltage = parse_positive(key, value)?,
            _ => return self.set_table_entry(key, value),
        }
        Ok(())
    }

    fn set_table_entry(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if let Some(dbm) = key.strip_prefix("tx_current_") {
            let dbm: i32 = dbm
                .parse()
                .map_err(|_| ConfigError::UnknownKey(key.to_string()))?;
            let ma = parse_positive(key, value)?;
            self.energy.tx_current_ma.insert(dbm, ma);
            return Ok(());
        }
        if let Some(rest) = key.strip_prefix("sensitivity_sf") {
            let (sf, bw) = rest
                .split_once("_bw")
                .ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
            let sf = sf
                .parse::<u8>()
                .ok()
                .and_then(|s| SpreadingFactor::new(s).ok())
                .ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
            let bw = bw
                .parse::<u32>()
                .ok()
                .and_then(|b| Bandwidth::from_khz(b).ok())
                .ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
            let dbm: f64 = parse(key, value)?;
            self.link.sensitivity.set(sf, bw, dbm);
            return Ok(());
        }
        Err(ConfigError::UnknownKey(key.to_string()))
    }

    /// Parses scenario text on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.apply_text(&text)
    }

    /// Cross-field checks that single-key parsing cannot do.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bands = self.bands();
        for ch in &self.channels {
            if bands.band_of(*ch).map(|b| b.0) != Some(0) {
                return Err(ConfigError::value(
                    "channels",
                    &ch.to_string(),
                    "uplink channels must lie in the g1 sub-band (868.0-868.6 MHz)",
                ));
            }
        }
        if bands.band_of(self.mac.rx2_freq).is_none() {
            return Err(ConfigError::value(
                "rx2_freq",
                &self.mac.rx2_freq.to_string(),
                "outside every regulated sub-band",
            ));
        }
        if self.mac.backoff_max < self.mac.backoff_min {
            return Err(ConfigError::value(
                "backoff_max",
                &self.mac.backoff_max.as_secs().to_string(),
                "must not be below backoff_min",
            ));
        }
        if self.mac.rx2_delay < self.mac.rx1_delay {
            return Err(ConfigError::value(
                "rx2_delay",
                &self.mac.rx2_delay.as_secs().to_string(),
                "RX2 must open after RX1",
            ));
        }
        if let Err(e) = self.link.validate() {
            return Err(ConfigError::value("link", "", e.to_string()));
        }
        for power in [self.tx_power_dbm, self.mac.gateway_tx_power_dbm] {
            if !self
                .energy
                .tx_current_ma
                .contains_key(&(power.round() as i32))
            {
                return Err(ConfigError::value(
                    "tx_power",
                    &power.to_string(),
                    "no tx_current entry for this power",
                ));
            }
        }
        Ok(())
    }

    /// Serializes every setting in the same format `apply_text` reads.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let channels: Vec<String> = self.channels.iter().map(|c| c.to_string()).collect();
        let lines: Vec<(&str, String)> = vec![
            ("n_nodes", self.n_nodes.to_string()),
            ("sim_days", self.sim_days.to_string()),
            ("replications", self.replications.to_string()),
            ("channels", channels.join(",")),
            ("bw", self.bw.khz().to_string()),
            ("cr", self.cr.offset().to_string()),
            ("tx_power", self.tx_power_dbm.to_string()),
            ("confirmed_fraction", self.confirmed_fraction.to_string()),
            ("downlink_fraction", self.downlink_fraction.to_string()),
            ("mean_send_interval", self.mean_send_interval.to_string()),
            (
                "traffic_mode",
                match self.traffic_mode {
                    TrafficMode::Exponential => "exponential".into(),
                    TrafficMode::Periodic { .. } => "periodic".into(),
                },
            ),
            ("payload_len", self.payload_len.to_string()),
            ("max_attempts", self.mac.max_attempts.to_string()),
            ("dr_decay", self.mac.dr_decay.to_string()),
            ("seed", self.seed.to_string()),
            ("capture_threshold", self.capture_threshold_db.to_string()),
            ("ref_distance", self.link.ref_distance_m.to_string()),
            ("ref_loss", self.link.ref_loss_db.to_string()),
            ("path_loss_exponent", self.link.exponent.to_string()),
            ("shadow_sigma", self.link.shadow_sigma_db.to_string()),
            ("shadowing", self.link.shadowing.label().to_string()),
            ("g1_duty_cycle", self.g1_duty_cycle.to_string()),
            ("rx2_duty_cycle", self.rx2_duty_cycle.to_string()),
            ("rx1_delay", self.mac.rx1_delay.as_secs().to_string()),
            ("rx2_delay", self.mac.rx2_delay.as_secs().to_string()),
            (
                "rx2_mode",
                match self.mac.rx2_mode {
                    Rx2Mode::Default => "default".into(),
                    Rx2Mode::SameAsRx1 => "same-as-rx1".into(),
                },
            ),
            ("rx2_freq", self.mac.rx2_freq.to_string()),
            ("rx2_sf", self.mac.rx2_sf.value().to_string()),
            ("rx2_bw", self.mac.rx2_bw.khz().to_string()),
            ("ack_payload_len", self.mac.ack_payload_len.to_string()),
            (
                "downlink_payload_len",
                self.mac.downlink_payload_len.to_string(),
            ),
            ("backoff_min", self.mac.backoff_min.as_secs().to_string()),
            ("backoff_max", self.mac.backoff_max.as_secs().to_string()),
            (
                "downlink_retry_cycles",
                self.mac.downlink_retry_cycles.to_string(),
            ),
            (
                "preamble_symbols",
                self.mac.frame_format.preamble_symbols.to_string(),
            ),
            (
                "gateway_tx_power",
                self.mac.gateway_tx_power_dbm.to_string(),
            ),
            ("supply_voltage", self.energy.supply_voltage.to_string()),
        ];
        for (k, v) in lines {
            let _ = writeln!(s, "{k} = {v}");
        }
        if let TrafficMode::Periodic { jitter } = self.traffic_mode {
            let _ = writeln!(s, "period_jitter = {jitter}");
        }
        for sf in SpreadingFactor::ALL {
            for bw in Bandwidth::ALL {
                let _ = writeln!(
                    s,
                    "sensitivity_sf{}_bw{} = {}",
                    sf.value(),
                    bw.khz(),
                    self.link.sensitivity.get(sf, bw)
                );
            }
        }
        for (dbm, ma) in &self.energy.tx_current_ma {
            let _ = writeln!(s, "tx_current_{dbm} = {ma}");
        }
        s
    }
}
