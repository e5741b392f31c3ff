//! Per-slot experiment log with a tab-separated on-disk format and a
//! replay verifier.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attacker::{attacker_reward, SraPhase};
use crate::env::{TransmissionKind, TransmissionOutcome};
use crate::error::{Error, Result};
use crate::metrics::moving_average;
use crate::victim::victim_reward;

pub const FORMAT_VERSION: u8 = 1;
const MAGIC: &str = "#antijam-log";

const COLUMNS: [&str; 15] = [
    "slot:u64",
    "good_mask:hex",
    "victim_action:u16",
    "attacker_action:u16?",
    "jammed:u16?",
    "victim_reward:f64",
    "attacker_reward:f64?",
    "success:bool",
    "pre_jam_good:bool",
    "partial_reward:bool",
    "defense:str",
    "policy:u8",
    "phase:str?",
    "imitation_action:u16?",
    "accuracy_ma:f64",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DefenseKind {
    #[default]
    None,
    Pid,
    Imitation,
    Orthogonal,
}

impl DefenseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DefenseKind::None => "none",
            DefenseKind::Pid => "pid",
            DefenseKind::Imitation => "imitation",
            DefenseKind::Orthogonal => "orthogonal",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [DefenseKind::None, DefenseKind::Pid, DefenseKind::Imitation, DefenseKind::Orthogonal]
            .into_iter()
            .find(|d| d.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: u64,
    /// Bit `i` set when channel `i` was good this slot.
    pub good_mask: u64,
    pub victim_action: usize,
    /// The jammer's chosen channel, whether or not it transmitted.
    pub attacker_action: Option<usize>,
    pub jammed: Option<usize>,
    pub victim_reward: f64,
    pub attacker_reward: Option<f64>,
    pub success: bool,
    pub pre_jam_good: bool,
    pub partial_reward: bool,
    pub defense: DefenseKind,
    /// 0 for the victim's own policy, 1 or 2 for an orthogonal policy.
    pub policy: u8,
    pub phase: Option<SraPhase>,
    pub imitation_action: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEvent {
    pub slot: u64,
    pub kind: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsLog {
    pub n_channels: usize,
    pub window: usize,
    pub records: Vec<SlotRecord>,
    pub events: Vec<LogEvent>,
}

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "-".to_string(), |x| x.to_string())
}

fn parse_opt<T: std::str::FromStr>(s: &str) -> Option<Option<T>> {
    if s == "-" {
        Some(None)
    } else {
        s.parse().ok().map(Some)
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "1" => Some(true),
        "0" => Some(false),
        _ => None,
    }
}

fn phase_from_str(s: &str) -> Option<SraPhase> {
    [SraPhase::Attack, SraPhase::FrozenAttack, SraPhase::Listen, SraPhase::Retrain].into_iter().find(|p| p.as_str() == s)
}

impl MetricsLog {
    pub fn new(n_channels: usize, window: usize) -> Self {
        Self { n_channels, window, records: Vec::new(), events: Vec::new() }
    }

    pub fn push(&mut self, record: SlotRecord) {
        debug_assert_eq!(record.slot as usize, self.records.len());
        self.records.push(record);
    }

    pub fn event(&mut self, slot: usize, kind: &str, detail: impl Into<String>) {
        self.events.push(LogEvent { slot: slot as u64, kind: kind.to_string(), detail: detail.into() });
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn successes(&self) -> Vec<f64> {
        self.records.iter().map(|r| if r.success { 1.0 } else { 0.0 }).collect()
    }

    /// Moving-average accuracy, recomputed from the success flags.
    pub fn accuracy_series(&self) -> Vec<f64> {
        if self.records.is_empty() {
            return Vec::new();
        }
        moving_average(&self.successes(), self.window).expect("non-empty series and positive window")
    }

    /// Mean success rate over `[from, to)`.
    pub fn accuracy(&self, from: usize, to: usize) -> f64 {
        let to = to.min(self.records.len());
        if from >= to {
            return 0.0;
        }
        self.records[from..to].iter().filter(|r| r.success).count() as f64 / (to - from) as f64
    }

    pub fn events_of<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a LogEvent> + 'a {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn to_tsv(&self) -> String {
        let ma = self.accuracy_series();
        let mut out = format!("{MAGIC}\tversion={FORMAT_VERSION}\tn_channels={}\twindow={}\n", self.n_channels, self.window);
        out.push_str(&COLUMNS.join("\t"));
        out.push('\n');
        for (r, a) in self.records.iter().zip(&ma) {
            let _ = writeln!(
                out,
                "{}\t{:x}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.slot,
                r.good_mask,
                r.victim_action,
                opt(&r.attacker_action),
                opt(&r.jammed),
                r.victim_reward,
                opt(&r.attacker_reward),
                r.success as u8,
                r.pre_jam_good as u8,
                r.partial_reward as u8,
                r.defense.as_str(),
                r.policy,
                r.phase.map_or("-", |p| p.as_str()),
                opt(&r.imitation_action),
                a,
            );
        }
        for e in &self.events {
            let _ = writeln!(out, "#event\t{}\t{}\t{}", e.slot, e.kind, e.detail.replace(['\t', '\n'], " "));
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, first) = lines.next().ok_or_else(|| Error::Malformed("empty file".into()))?;
        let mut fields = first.split('\t');
        if fields.next() != Some(MAGIC) {
            return Err(Error::Malformed("missing log header".into()));
        }
        let mut kv = std::collections::HashMap::new();
        for f in fields {
            let (k, v) = f.split_once('=').ok_or_else(|| Error::Malformed(format!("bad header field {f:?}")))?;
            kv.insert(k, v);
        }
        let num = |k: &str| -> Result<usize> {
            kv.get(k).and_then(|v| v.parse().ok()).ok_or_else(|| Error::Malformed(format!("header lacks {k}")))
        };
        let version = num("version")?;
        if version != FORMAT_VERSION as usize {
            return Err(Error::VersionMismatch { expected: FORMAT_VERSION, found: version.min(255) as u8 });
        }
        let mut log = MetricsLog::new(num("n_channels")?, num("window")?);
        match lines.next() {
            Some((_, h)) if h == COLUMNS.join("\t") => {}
            _ => return Err(Error::Malformed("column header mismatch".into())),
        }
        for (i, line) in lines {
            let bad = || Error::Malformed(format!("line {}", i + 1));
            if let Some(rest) = line.strip_prefix("#event\t") {
                let mut p = rest.splitn(3, '\t');
                let slot = p.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
                let kind = p.next().ok_or_else(bad)?.to_string();
                let detail = p.next().unwrap_or("").to_string();
                log.events.push(LogEvent { slot, kind, detail });
                continue;
            }
            let c: Vec<&str> = line.split('\t').collect();
            if c.len() != COLUMNS.len() {
                return Err(bad());
            }
            let record = (|| {
                Some(SlotRecord {
                    slot: c[0].parse().ok()?,
                    good_mask: u64::from_str_radix(c[1], 16).ok()?,
                    victim_action: c[2].parse().ok()?,
                    attacker_action: parse_opt(c[3])?,
                    jammed: parse_opt(c[4])?,
                    victim_reward: c[5].parse().ok()?,
                    attacker_reward: parse_opt(c[6])?,
                    success: parse_bool(c[7])?,
                    pre_jam_good: parse_bool(c[8])?,
                    partial_reward: parse_bool(c[9])?,
                    defense: DefenseKind::parse(c[10])?,
                    policy: c[11].parse().ok()?,
                    phase: if c[12] == "-" { None } else { Some(phase_from_str(c[12])?) },
                    imitation_action: parse_opt(c[13])?,
                })
            })()
            .ok_or_else(bad)?;
            if record.slot as usize != log.records.len() {
                return Err(bad());
            }
            log.records.push(record);
        }
        Ok(log)
    }

    /// Writes the log and a sibling `<name>.series.tsv` with plot-ready
    /// moving-average accuracy.
    pub fn export(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_tsv())?;
        let mut series = String::from("slot\tsuccess\taccuracy_ma\n");
        for (r, a) in self.records.iter().zip(self.accuracy_series()) {
            let _ = writeln!(series, "{}\t{}\t{a}", r.slot, r.success as u8);
        }
        std::fs::write(series_path(path), series)?;
        Ok(())
    }

    pub fn import(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_tsv(&std::fs::read_to_string(path)?)
    }
}

pub fn series_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.series.tsv"))
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct VerifyReport {
    pub checked: usize,
    /// `(slot, field)` for every recomputed value that disagrees.
    pub mismatches: Vec<(u64, &'static str)>,
}

/// Recomputes success flags and both rewards from the logged actions and
/// channel states.
pub fn verify(log: &MetricsLog) -> VerifyReport {
    let mut report = VerifyReport::default();
    for r in &log.records {
        report.checked += 1;
        let good = r.good_mask >> r.victim_action & 1 == 1;
        let kind = if r.jammed == Some(r.victim_action) {
            TransmissionKind::FailJammed
        } else if good {
            TransmissionKind::Success
        } else {
            TransmissionKind::FailBadChannel
        };
        let outcome = TransmissionOutcome { kind, was_good_pre_jam: good };
        let mut check = |ok: bool, field| {
            if !ok {
                report.mismatches.push((r.slot, field));
            }
        };
        check(r.pre_jam_good == good, "pre_jam_good");
        check(r.success == outcome.success(), "success");
        check(r.victim_reward == victim_reward(&outcome, r.partial_reward), "victim_reward");
        let expected = r.attacker_action.map(|a| attacker_reward(a, r.victim_action, good));
        check(r.attacker_reward == expected, "attacker_reward");
        check(r.jammed.is_none() || r.jammed == r.attacker_action, "jammed");
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(slot: u64) -> SlotRecord {
        SlotRecord {
            slot,
            good_mask: 0b110,
            victim_action: 1,
            attacker_action: Some(1),
            jammed: Some(1),
            victim_reward: -1.0,
            attacker_reward: Some(1.0),
            success: false,
            pre_jam_good: true,
            partial_reward: false,
            defense: DefenseKind::Pid,
            policy: 0,
            phase: Some(SraPhase::Attack),
            imitation_action: None,
        }
    }

    #[test]
    fn round_trip() {
        let mut log = MetricsLog::new(16, 200);
        log.push(record(0));
        log.push(SlotRecord { slot: 1, jammed: None, success: true, victim_reward: 1.0, phase: None, imitation_action: Some(3), ..record(1) });
        log.event(1, "detector", "attack");
        let back = MetricsLog::from_tsv(&log.to_tsv()).unwrap();
        assert_eq!(back, log);
        assert!(verify(&log).mismatches.is_empty());
    }

    #[test]
    fn empty_log_is_header_only() {
        let log = MetricsLog::new(16, 200);
        let text = log.to_tsv();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(MetricsLog::from_tsv(&text).unwrap(), log);
    }

    #[test]
    fn version_mismatch() {
        let text = MetricsLog::new(16, 200).to_tsv().replace("version=1", "version=7");
        assert!(matches!(MetricsLog::from_tsv(&text), Err(Error::VersionMismatch { expected: 1, found: 7 })));
    }

    #[test]
    fn malformed_rows() {
        let mut log = MetricsLog::new(16, 200);
        log.push(record(0));
        let text = log.to_tsv().replace("\tpid\t", "\tbogus\t");
        assert!(matches!(MetricsLog::from_tsv(&text), Err(Error::Malformed(_))));
        assert!(matches!(MetricsLog::from_tsv("garbage"), Err(Error::Malformed(_))));
    }

    #[test]
    fn verifier_flags_tampering() {
        let mut log = MetricsLog::new(16, 200);
        log.push(SlotRecord { victim_reward: 1.0, ..record(0) });
        assert_eq!(verify(&log).mismatches, vec![(0, "victim_reward")]);
    }

    #[test]
    fn export_writes_series() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.tsv");
        let mut log = MetricsLog::new(16, 2);
        log.push(record(0));
        log.export(&path).unwrap();
        assert_eq!(MetricsLog::import(&path).unwrap(), log);
        assert!(dir.path().join("run.series.tsv").exists());
    }
}
