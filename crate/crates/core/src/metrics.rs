//! Outcome accounting, the transmission log, replay audits and CSV output.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::engine::SimTime;
use crate::error::MetricsError;
use crate::mac::{off_period, DownlinkFailure, EnergyModel, FrameKind, NodeId, SubBandPlan};
use crate::phy::{Direction, RadioParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Transmitter {
    Device(NodeId),
    Gateway,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxOutcome {
    /// Reception not yet resolved (only seen mid-run).
    Pending,
    /// Uplink decoded at the gateway.
    Decoded,
    /// Uplink lost to a same-channel, same-SF overlap.
    Collided,
    /// Uplink arrived below sensitivity.
    BelowSensitivity,
    /// Downlink decoded by its device.
    Received,
    /// Downlink arrived below the device's sensitivity.
    Missed,
}

impl TxOutcome {
    pub fn label(self) -> &'static str {
        match self {
            TxOutcome::Pending => "pending",
            TxOutcome::Decoded => "decoded",
            TxOutcome::Collided => "collided",
            TxOutcome::BelowSensitivity => "below_sensitivity",
            TxOutcome::Received => "received",
            TxOutcome::Missed => "missed",
        }
    }
}

/// One line of the append-only transmission log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxRecord {
    pub start: SimTime,
    pub airtime: SimTime,
    pub transmitter: Transmitter,
    /// Sender of an uplink or addressee of a downlink.
    pub device: NodeId,
    pub direction: Direction,
    pub params: RadioParams,
    pub kind: FrameKind,
    pub frame_id: u64,
    pub attempt: u8,
    pub confirmed: bool,
    pub outcome: TxOutcome,
}

impl TxRecord {
    pub fn end(&self) -> SimTime {
        self.start + self.airtime
    }
}

#[derive(Debug, Clone, Default)]
pub struct EventLog {
    pub records: Vec<TxRecord>,
}

impl EventLog {
    pub fn push(&mut self, rec: TxRecord) -> usize {
        self.records.push(rec);
        self.records.len() - 1
    }

    pub fn uplinks(&self) -> impl Iterator<Item = &TxRecord> {
        self.records
            .iter()
            .filter(|r| r.direction == Direction::Uplink)
    }

    pub fn downlinks(&self) -> impl Iterator<Item = &TxRecord> {
        self.records
            .iter()
            .filter(|r| r.direction == Direction::Downlink)
    }

    /// Writes one whitespace-separated line per transmission.
    pub fn write_text(&self, path: &Path) -> Result<(), MetricsError> {
        let io = |source| MetricsError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        writeln!(
            w,
            "# time_ms node direction freq_mhz sf airtime_ms kind attempt outcome"
        )
        .map_err(io)?;
        for r in &self.records {
            let node = match r.transmitter {
                Transmitter::Device(n) => n.to_string(),
                Transmitter::Gateway => format!("gw->{}", r.device),
            };
            writeln!(
                w,
                "{:.3} {} {} {} {} {:.3} {} {} {}",
                r.start.as_ms(),
                node,
                r.direction,
                r.params.freq,
                r.params.sf.value(),
                r.airtime.as_ms(),
                r.kind.label(),
                r.attempt,
                r.outcome.label()
            )
            .map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Counters behind every reported metric.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsLedger {
    /// Uplink transmissions including retransmissions.
    pub sent_total: u64,
    /// First attempts of fresh uplinks.
    pub sent_fresh: u64,
    /// Fresh uplinks decoded by the gateway at least once.
    pub received_unique: u64,
    pub confirmed_fresh: u64,
    pub unconfirmed_received: u64,
    pub unconfirmed_lost: u64,
    /// Index k counts confirmed frames acknowledged on attempt k + 1.
    pub acked_by_attempt: Vec<u64>,
    pub gave_up: u64,
    /// Downlink frames (ACK, data or both) the gateway tried to send.
    pub downlink_attempted: u64,
    pub downlink_delivered: u64,
    pub downlink_failures: BTreeMap<DownlinkFailure, u64>,
    pub downlink_data_generated: u64,
    pub downlink_data_delivered: u64,
    pub downlink_data_dropped: u64,
    pub energy_mj_per_node: Vec<f64>,
}

impl MetricsLedger {
    pub fn new(max_attempts: u8, n_nodes: usize) -> Self {
        MetricsLedger {
            sent_total: 0,
            sent_fresh: 0,
            received_unique: 0,
            confirmed_fresh: 0,
            unconfirmed_received: 0,
            unconfirmed_lost: 0,
            acked_by_attempt: vec![0; usize::from(max_attempts)],
            gave_up: 0,
            downlink_attempted: 0,
            downlink_delivered: 0,
            downlink_failures: DownlinkFailure::ALL.iter().map(|&c| (c, 0)).collect(),
            downlink_data_generated: 0,
            downlink_data_delivered: 0,
            downlink_data_dropped: 0,
            energy_mj_per_node: vec![0.0; n_nodes],
        }
    }

    pub fn record_failure(&mut self, cause: DownlinkFailure) {
        *self.downlink_failures.entry(cause).or_default() += 1;
    }

    pub fn failures(&self, cause: DownlinkFailure) -> u64 {
        self.downlink_failures.get(&cause).copied().unwrap_or(0)
    }

    pub fn acked_total(&self) -> u64 {
        self.acked_by_attempt.iter().sum()
    }

    pub fn goodput(&self) -> Result<f64, MetricsError> {
        if self.sent_total == 0 {
            return Err(MetricsError::Undefined("goodput with no transmissions"));
        }
        Ok(self.received_unique as f64 / self.sent_total as f64)
    }

    pub fn downlink_delivery_ratio(&self) -> Result<f64, MetricsError> {
        if self.downlink_attempted == 0 {
            return Err(MetricsError::Undefined("delivery ratio with no downlinks"));
        }
        Ok(self.downlink_delivered as f64 / self.downlink_attempted as f64)
    }

    /// The downlink failure cause with the highest count, if any failed.
    pub fn dominant_failure(&self) -> Option<DownlinkFailure> {
        DownlinkFailure::ALL
            .into_iter()
            .filter(|&c| self.failures(c) > 0)
            .max_by_key(|&c| (self.failures(c), std::cmp::Reverse(c)))
    }

    /// Entry k is the fraction of completed confirmed frames acknowledged
    /// within the first k + 1 attempts.
    pub fn ack_cdf_by_attempt(&self) -> Result<Vec<f64>, MetricsError> {
        let completed = self.acked_total() + self.gave_up;
        if completed == 0 {
            return Err(MetricsError::Undefined(
                "ack distribution without confirmed traffic",
            ));
        }
        let mut acc = 0;
        Ok(self
            .acked_by_attempt
            .iter()
            .map(|&n| {
                acc += n;
                acc as f64 / completed as f64
            })
            .collect())
    }

    pub fn mean_energy_mj(&self) -> f64 {
        if self.energy_mj_per_node.is_empty() {
            return 0.0;
        }
        self.energy_mj_per_node.iter().sum::<f64>() / self.energy_mj_per_node.len() as f64
    }

    /// Named scalar columns for CSV output. `ack_columns` fixes how many
    /// cumulative-ACK columns appear; the distribution is flat past this
    /// ledger's own attempt limit.
    pub fn columns(&self, ack_columns: usize) -> Vec<(String, Option<f64>)> {
        let mut out: Vec<(String, Option<f64>)> = vec![
            ("sent_total".into(), Some(self.sent_total as f64)),
            ("sent_fresh".into(), Some(self.sent_fresh as f64)),
            ("received_unique".into(), Some(self.received_unique as f64)),
            ("goodput".into(), self.goodput().ok()),
            ("confirmed_fresh".into(), Some(self.confirmed_fresh as f64)),
            ("acked".into(), Some(self.acked_total() as f64)),
            ("gave_up".into(), Some(self.gave_up as f64)),
            (
                "downlink_attempted".into(),
                Some(self.downlink_attempted as f64),
            ),
            (
                "downlink_delivered".into(),
                Some(self.downlink_delivered as f64),
            ),
            (
                "downlink_delivery_ratio".into(),
                self.downlink_delivery_ratio().ok(),
            ),
        ];
        for cause in DownlinkFailure::ALL {
            out.push((
                format!("dl_fail_{}", cause.label()),
                Some(self.failures(cause) as f64),
            ));
        }
        out.push((
            "downlink_data_generated".into(),
            Some(self.downlink_data_generated as f64),
        ));
        out.push((
            "downlink_data_delivered".into(),
            Some(self.downlink_data_delivered as f64),
        ));
        let cdf = self.ack_cdf_by_attempt().ok();
        for k in 0..ack_columns {
            let v = cdf
                .as_ref()
                .and_then(|c| c.get(k).or_else(|| c.last()).copied());
            out.push((format!("ack_cdf_{}", k + 1), v));
        }
        out.push(("mean_energy_mj".into(), Some(self.mean_energy_mj())));
        out.push((
            "total_energy_mj".into(),
            Some(self.energy_mj_per_node.iter().sum()),
        ));
        out
    }
}

/// A transmitter that started sending before its sub-band gate reopened.
#[derive(Debug, Clone, PartialEq)]
pub struct DutyViolation {
    pub transmitter: Transmitter,
    pub band: String,
    pub previous_start: SimTime,
    pub start: SimTime,
    pub earliest_allowed: SimTime,
}

/// Replays the log and reports every start that precedes the previous
/// frame's end plus its off-period on the same sub-band. A clean log also
/// satisfies the sliding-window airtime bound.
pub fn audit_duty_cycle(log: &EventLog, plan: &SubBandPlan) -> Vec<DutyViolation> {
    let mut streams: BTreeMap<(Transmitter, usize), Vec<&TxRecord>> = BTreeMap::new();
    for r in &log.records {
        let band = plan.band_of(r.params.freq).map_or(usize::MAX, |b| b.0);
        streams.entry((r.transmitter, band)).or_default().push(r);
    }
    let mut violations = Vec::new();
    for ((transmitter, band), mut recs) in streams {
        let name = if band == usize::MAX {
            "unregulated".to_string()
        } else {
            plan.band(crate::mac::SubBandId(band)).name.clone()
        };
        if band == usize::MAX {
            for r in recs {
                violations.push(DutyViolation {
                    transmitter,
                    band: name.clone(),
                    previous_start: r.start,
                    start: r.start,
                    earliest_allowed: SimTime::MAX,
                });
            }
            continue;
        }
        let limit = plan.band(crate::mac::SubBandId(band)).limit;
        recs.sort_by(|a, b| a.start.as_ms().total_cmp(&b.start.as_ms()));
        for pair in recs.windows(2) {
            let (prev, next) = (pair[0], pair[1]);
            let earliest = prev.end() + off_period(limit, prev.airtime);
            if next.start < earliest {
                violations.push(DutyViolation {
                    transmitter,
                    band: name.clone(),
                    previous_start: prev.start,
                    start: next.start,
                    earliest_allowed: earliest,
                });
            }
        }
    }
    violations
}

/// Sliding-window check: airtime summed over any window `[t, t + window)`
/// starting at a frame start stays within `limit * window`.
pub fn audit_airtime_window(log: &EventLog, plan: &SubBandPlan, window: SimTime) -> usize {
    let mut streams: BTreeMap<(Transmitter, usize), Vec<(f64, f64)>> = BTreeMap::new();
    for r in &log.records {
        if let Some(b) = plan.band_of(r.params.freq) {
            streams
                .entry((r.transmitter, b.0))
                .or_default()
                .push((r.start.as_ms(), r.airtime.as_ms()));
        }
    }
    let w = window.as_ms();
    let mut bad = 0;
    for ((_, band), mut recs) in streams {
        let limit = plan.band(crate::mac::SubBandId(band)).limit;
        recs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut j = 0;
        let mut sum = 0.0;
        for i in 0..recs.len() {
            while j < recs.len() && recs[j].0 < recs[i].0 + w {
                // Clip frames that straddle the window end.
                sum += recs[j].1;
                j += 1;
            }
            let last = recs[j - 1];
            let overshoot = (last.0 + last.1 - (recs[i].0 + w)).max(0.0);
            if sum - overshoot > limit * w * (1.0 + 1e-12) {
                bad += 1;
            }
            sum -= recs[i].1;
        }
    }
    bad
}

/// Gateway transmissions that overlap an earlier one.
pub fn audit_gateway_serialization(log: &EventLog) -> usize {
    let mut dl: Vec<&TxRecord> = log
        .records
        .iter()
        .filter(|r| r.transmitter == Transmitter::Gateway)
        .collect();
    dl.sort_by(|a, b| a.start.as_ms().total_cmp(&b.start.as_ms()));
    dl.windows(2).filter(|p| p[1].start < p[0].end()).count()
}

/// Recomputes the ledger from the log and lists every disagreement.
pub fn reconcile(
    ledger: &MetricsLedger,
    log: &EventLog,
    energy: &EnergyModel,
    max_attempts: u8,
) -> Vec<String> {
    let mut issues = Vec::new();
    fn check(issues: &mut Vec<String>, name: &str, ledger_value: u64, log_value: u64) {
        if ledger_value != log_value {
            issues.push(format!("{name}: ledger {ledger_value}, log {log_value}"));
        }
    }

    let uplinks: Vec<&TxRecord> = log.uplinks().collect();
    check(
        &mut issues,
        "sent_total",
        ledger.sent_total,
        uplinks.len() as u64,
    );
    check(
        &mut issues,
        "sent_fresh",
        ledger.sent_fresh,
        uplinks.iter().filter(|r| r.attempt == 1).count() as u64,
    );
    check(
        &mut issues,
        "confirmed_fresh",
        ledger.confirmed_fresh,
        uplinks
            .iter()
            .filter(|r| r.attempt == 1 && r.confirmed)
            .count() as u64,
    );
    let decoded: HashSet<u64> = uplinks
        .iter()
        .filter(|r| r.outcome == TxOutcome::Decoded)
        .map(|r| r.frame_id)
        .collect();
    check(
        &mut issues,
        "received_unique",
        ledger.received_unique,
        decoded.len() as u64,
    );
    check(
        &mut issues,
        "unconfirmed_received",
        ledger.unconfirmed_received,
        uplinks
            .iter()
            .filter(|r| r.attempt == 1 && !r.confirmed && decoded.contains(&r.frame_id))
            .count() as u64,
    );

    let mut acked = vec![0u64; usize::from(max_attempts)];
    let mut ack_frames = HashSet::new();
    let mut delivered = 0;
    for r in log.downlinks() {
        if r.outcome == TxOutcome::Received {
            delivered += 1;
            if r.kind.carries_ack() {
                acked[usize::from(r.attempt) - 1] += 1;
                if !ack_frames.insert(r.frame_id) {
                    issues.push(format!("frame {} acknowledged twice", r.frame_id));
                }
            }
        }
    }
    for (k, (&l, &g)) in ledger.acked_by_attempt.iter().zip(&acked).enumerate() {
        check(&mut issues, &format!("acked_by_attempt[{}]", k + 1), l, g);
    }
    check(
        &mut issues,
        "downlink_delivered",
        ledger.downlink_delivered,
        delivered,
    );
    check(
        &mut issues,
        "downlink_link_failures",
        ledger.failures(DownlinkFailure::Link),
        log.downlinks()
            .filter(|r| r.outcome == TxOutcome::Missed)
            .count() as u64,
    );
    check(
        &mut issues,
        "downlink_attempted",
        ledger.downlink_attempted,
        log.downlinks().count() as u64
            + ledger.failures(DownlinkFailure::DutyCycle)
            + ledger.failures(DownlinkFailure::Busy)
            + ledger.failures(DownlinkFailure::Collision),
    );

    // Fresh frames partition into exactly one terminal class.
    let classes = ledger.unconfirmed_received
        + ledger.unconfirmed_lost
        + ledger.acked_total()
        + ledger.gave_up;
    check(&mut issues, "outcome classes", ledger.sent_fresh, classes);
    check(
        &mut issues,
        "confirmed classes",
        ledger.confirmed_fresh,
        ledger.acked_total() + ledger.gave_up,
    );

    // Attempt bound and stop-and-wait per device.
    let mut per_device: HashMap<NodeId, Vec<&TxRecord>> = HashMap::new();
    for r in &uplinks {
        if r.attempt == 0 || r.attempt > max_attempts {
            issues.push(format!(
                "frame {} sent on attempt {}",
                r.frame_id, r.attempt
            ));
        }
        per_device.entry(r.device).or_default().push(r);
    }
    let mut energy_by_node: HashMap<NodeId, f64> = HashMap::new();
    let mut nodes: Vec<_> = per_device.keys().copied().collect();
    nodes.sort();
    for node in nodes {
        let recs = &per_device[&node];
        let mut seen = HashSet::new();
        let mut current = None;
        let mut sum = 0.0;
        for r in recs {
            if current != Some(r.frame_id) {
                if !seen.insert(r.frame_id) {
                    issues.push(format!("device {node} interleaved frame {}", r.frame_id));
                }
                current = Some(r.frame_id);
            }
            sum += energy.tx_energy(&r.params, r.airtime).unwrap_or(f64::NAN);
        }
        energy_by_node.insert(node, sum);
    }
    for (i, &e) in ledger.energy_mj_per_node.iter().enumerate() {
        let from_log = energy_by_node
            .get(&NodeId(i as u32))
            .copied()
            .unwrap_or(0.0);
        if (e - from_log).abs() > 1e-9 * e.abs().max(1.0) {
            issues.push(format!("energy of node {i}: ledger {e}, log {from_log}"));
        }
    }
    issues
}

/// Replications of one sweep point.
#[derive(Debug, Clone)]
pub struct PointResults {
    /// Sweep-axis settings that identify the point, in column order.
    pub params: Vec<(String, String)>,
    /// `(replication index, seed, ledger)` in replication order.
    pub runs: Vec<(u32, u64, MetricsLedger)>,
}

fn fmt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Mean and sample standard deviation over the defined values.
pub fn mean_std(values: &[Option<f64>]) -> (Option<f64>, Option<f64>) {
    let xs: Vec<f64> = values.iter().flatten().copied().collect();
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() < 2 {
        0.0
    } else {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (Some(mean), Some(std))
}

/// Writes one CSV with a row per replication and a `mean` row per point
/// whose `*_std` columns hold the sample standard deviation.
pub fn write_results(points: &[PointResults], path: &Path) -> Result<(), MetricsError> {
    let first = points
        .iter()
        .find(|p| !p.runs.is_empty())
        .ok_or(MetricsError::NoReplications)?;
    let ack_columns = points
        .iter()
        .flat_map(|p| p.runs.iter())
        .map(|(_, _, l)| l.acked_by_attempt.len())
        .max()
        .unwrap_or(0);
    let metric_names: Vec<String> = first.runs[0]
        .2
        .columns(ack_columns)
        .into_iter()
        .map(|(n, _)| n)
        .collect();

    let file = File::create(path).map_err(|source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));

    let mut header: Vec<String> = first.params.iter().map(|(k, _)| k.clone()).collect();
    header.push("replication".into());
    header.push("seed".into());
    header.extend(metric_names.iter().cloned());
    header.extend(metric_names.iter().map(|n| format!("{n}_std")));
    w.write_record(&header)?;

    for point in points {
        if point.runs.is_empty() {
            continue;
        }
        let param_cells: Vec<String> = point.params.iter().map(|(_, v)| v.clone()).collect();
        let mut columns: Vec<Vec<Option<f64>>> = vec![Vec::new(); metric_names.len()];
        for (rep, seed, ledger) in &point.runs {
            let values = ledger.columns(ack_columns);
            let mut row = param_cells.clone();
            row.push(rep.to_string());
            row.push(seed.to_string());
            for (i, (_, v)) in values.iter().enumerate() {
                row.push(fmt_cell(*v));
                columns[i].push(*v);
            }
            row.extend(std::iter::repeat_n(String::new(), metric_names.len()));
            w.write_record(&row)?;
        }
        let mut row = param_cells;
        row.push("mean".into());
        row.push(String::new());
        let stats: Vec<_> = columns.iter().map(|c| mean_std(c)).collect();
        row.extend(stats.iter().map(|(m, _)| fmt_cell(*m)));
        row.extend(stats.iter().map(|(_, s)| fmt_cell(*s)));
        w.write_record(&row)?;
    }
    w.flush().map_err(|source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ledger() -> MetricsLedger {
        MetricsLedger::new(8, 2)
    }

    #[test]
    fn goodput_definition() {
        let mut l = ledger();
        l.received_unique = 1000;
        l.sent_total = 1250;
        assert!((l.goodput().unwrap() - 0.8).abs() < 1e-12);
        l.received_unique = 40;
        l.sent_total = 40;
        assert_eq!(l.goodput().unwrap(), 1.0);
        l.sent_total = 0;
        assert!(l.goodput().is_err());
    }

    #[test]
    fn delivery_ratio() {
        let mut l = ledger();
        assert!(l.downlink_delivery_ratio().is_err());
        l.downlink_attempted = 10;
        l.downlink_delivered = 10;
        assert_eq!(l.downlink_delivery_ratio().unwrap(), 1.0);
    }

    #[test]
    fn ack_cdf() {
        let mut l = ledger();
        assert!(l.ack_cdf_by_attempt().is_err());
        l.acked_by_attempt[0] = 5;
        assert_eq!(l.ack_cdf_by_attempt().unwrap(), vec![1.0; 8]);
        l.acked_by_attempt[2] = 3;
        l.gave_up = 2;
        let cdf = l.ack_cdf_by_attempt().unwrap();
        assert_eq!(cdf[0], 0.5);
        assert_eq!(cdf[1], 0.5);
        assert_eq!(cdf[2], 0.8);
        assert_eq!(cdf[7], 0.8);
    }

    #[test]
    fn dominant_failure_prefers_priority_on_ties() {
        let mut l = ledger();
        assert_eq!(l.dominant_failure(), None);
        l.record_failure(DownlinkFailure::Busy);
        l.record_failure(DownlinkFailure::DutyCycle);
        assert_eq!(l.dominant_failure(), Some(DownlinkFailure::DutyCycle));
        l.record_failure(DownlinkFailure::Busy);
        assert_eq!(l.dominant_failure(), Some(DownlinkFailure::Busy));
    }

    #[test]
    fn single_replication_has_zero_std() {
        assert_eq!(mean_std(&[Some(3.0)]), (Some(3.0), Some(0.0)));
        assert_eq!(mean_std(&[None]), (None, None));
        let (m, s) = mean_std(&[Some(1.0), Some(3.0)]);
        assert_eq!(m, Some(2.0));
        assert!((s.unwrap() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let mut l = ledger();
        l.sent_total = 4;
        l.received_unique = 3;
        let point = PointResults {
            params: vec![("n_nodes".into(), "100".into())],
            runs: (0..15).map(|r| (r, 1 + u64::from(r), l.clone())).collect(),
        };
        write_results(&[point], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 15 + 1);
        assert!(lines[0].starts_with("n_nodes,replication,seed,sent_total"));
        assert!(lines[16].starts_with("100,mean,,4,"));
        let mut rdr = csv::Reader::from_path(&path).unwrap();
        let headers = rdr.headers().unwrap().clone();
        let g = headers.iter().position(|h| h == "goodput_std").unwrap();
        let agg = rdr.records().last().unwrap().unwrap();
        assert_eq!(&agg[g], "0");
    }

    #[test]
    fn unwritable_path() {
        let point = PointResults {
            params: vec![],
            runs: vec![(0, 1, ledger())],
        };
        let err = write_results(&[point], Path::new("/nonexistent/dir/x.csv")).unwrap_err();
        assert!(matches!(err, MetricsError::Io { .. }));
        assert!(matches!(
            write_results(&[], Path::new("x.csv")),
            Err(MetricsError::NoReplications)
        ));
    }
}
