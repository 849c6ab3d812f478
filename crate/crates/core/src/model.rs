//! Scan records, fingerprints and the per-device fingerprint matrix.
//!
//! A scan log is line-delimited JSON, one [`ScanRecord`] per line:
//!
//! ```text
//! {"device_id":"d0","seq":0,"timestamp_ms":0,"label":"indoor","location":"home","scan":[{"bssid":"aa:bb:cc:dd:ee:ff","rssi_dbm":-48}]}
//! ```
//!
//! Ingest interns every BSSID into a dense [`ApKey`] (in order of first
//! appearance) and converts RSSI to linear power. The original dBm value is
//! kept next to the power because some node features average raw dBm.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Converts an RSSI reading in dBm into linear power, `10^(rssi/10)`.
pub fn rssi_to_power(rssi_dbm: i32) -> f64 {
    10f64.powf(f64::from(rssi_dbm) / 10.0)
}

/// Canonical BSSID: six lowercase hex octets separated by colons.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ApId(String);

impl ApId {
    /// Parses a MAC address, accepting either case and `:` or `-` separators.
    pub fn parse(raw: &str) -> Result<Self> {
        let parts: Vec<&str> = raw.trim().split([':', '-']).collect();
        let well_formed = parts.len() == 6
            && parts
                .iter()
                .all(|p| p.len() == 2 && p.chars().all(|c| c.is_ascii_hexdigit()));
        if !well_formed {
            return Err(Error::Format(format!("malformed BSSID {raw:?}")));
        }
        Ok(Self(parts.join(":").to_ascii_lowercase()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ApId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for ApId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl TryFrom<String> for ApId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        Self::parse(&s)
    }
}

impl From<ApId> for String {
    fn from(id: ApId) -> String {
        id.0
    }
}

/// Ground-truth environment label. Unlabeled scans are `None` at use sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Indoor,
    Outdoor,
}

impl Label {
    /// Indoor is the positive class.
    pub fn is_positive(self) -> bool {
        self == Label::Indoor
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Indoor => "indoor",
            Label::Outdoor => "outdoor",
        }
    }
}

impl FromStr for Label {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "indoor" => Ok(Label::Indoor),
            "outdoor" => Ok(Label::Outdoor),
            other => Err(Error::Format(format!("unknown label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reading {
    pub bssid: ApId,
    pub rssi_dbm: i32,
}

/// One Wi-Fi scan as reported by the device.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub device_id: String,
    pub seq: u64,
    pub timestamp_ms: i64,
    pub label: Option<Label>,
    pub location: Option<String>,
    #[serde(rename = "scan")]
    pub readings: Vec<Reading>,
}

/// Dense per-matrix access point identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ApKey(pub u32);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApReading {
    pub ap: ApKey,
    pub rssi_dbm: i32,
    pub power: f64,
}

/// Sparse fingerprint: the non-zero entries of one matrix row, sorted by AP.
#[derive(Debug, Clone, PartialEq)]
pub struct Fingerprint {
    pub seq: usize,
    pub timestamp_ms: i64,
    readings: Vec<ApReading>,
}

impl Fingerprint {
    /// Builds a fingerprint from `(ap, dBm)` pairs. Duplicate keys are rejected.
    pub fn from_dbm(seq: usize, timestamp_ms: i64, readings: &[(ApKey, i32)]) -> Result<Self> {
        let mut out: Vec<ApReading> = readings
            .iter()
            .map(|&(ap, rssi_dbm)| ApReading {
                ap,
                rssi_dbm,
                power: rssi_to_power(rssi_dbm),
            })
            .collect();
        out.sort_by_key(|r| r.ap);
        if let Some(w) = out.windows(2).find(|w| w[0].ap == w[1].ap) {
            return Err(Error::DuplicateAp {
                seq: seq as u64,
                bssid: format!("#{}", w[0].ap.0),
            });
        }
        Ok(Self {
            seq,
            timestamp_ms,
            readings: out,
        })
    }

    pub fn empty(seq: usize, timestamp_ms: i64) -> Self {
        Self {
            seq,
            timestamp_ms,
            readings: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.readings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.readings.len()
    }

    /// Readings sorted by ascending [`ApKey`].
    pub fn readings(&self) -> &[ApReading] {
        &self.readings
    }

    pub fn power(&self, ap: ApKey) -> Option<f64> {
        self.readings
            .binary_search_by_key(&ap, |r| r.ap)
            .ok()
            .map(|i| self.readings[i].power)
    }

    pub fn keys(&self) -> impl Iterator<Item = ApKey> + '_ {
        self.readings.iter().map(|r| r.ap)
    }
}

/// All fingerprints of one device, in scan order.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintMatrix {
    pub device_id: String,
    fingerprints: Vec<Fingerprint>,
    ap_universe: Vec<ApId>,
    labels: Vec<Option<Label>>,
    locations: Vec<Option<String>>,
}

impl FingerprintMatrix {
    /// Number of fingerprints, T.
    pub fn len(&self) -> usize {
        self.fingerprints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fingerprints.is_empty()
    }

    /// Number of distinct access points, N.
    pub fn ap_count(&self) -> usize {
        self.ap_universe.len()
    }

    pub fn fingerprints(&self) -> &[Fingerprint] {
        &self.fingerprints
    }

    pub fn fingerprint(&self, i: usize) -> &Fingerprint {
        &self.fingerprints[i]
    }

    pub fn ap_universe(&self) -> &[ApId] {
        &self.ap_universe
    }

    pub fn ap_id(&self, key: ApKey) -> &ApId {
        &self.ap_universe[key.0 as usize]
    }

    pub fn labels(&self) -> &[Option<Label>] {
        &self.labels
    }

    pub fn locations(&self) -> &[Option<String>] {
        &self.locations
    }

    pub fn timestamps(&self) -> Vec<i64> {
        self.fingerprints.iter().map(|f| f.timestamp_ms).collect()
    }

    /// Copy of this matrix with every label replaced.
    pub fn with_labels(&self, labels: Vec<Option<Label>>) -> Self {
        assert_eq!(labels.len(), self.len());
        Self {
            labels,
            ..self.clone()
        }
    }

    /// The first `n` fingerprints, re-interned so the AP universe only holds
    /// access points seen in the prefix.
    pub fn prefix(&self, n: usize) -> Self {
        let records: Vec<ScanRecord> = self.to_records().into_iter().take(n).collect();
        // A prefix of a valid stream is valid.
        ingest(&records).expect("prefix of a valid matrix")
    }

    /// Exports the matrix back to scan records (readings in AP-key order).
    pub fn to_records(&self) -> Vec<ScanRecord> {
        self.fingerprints
            .iter()
            .enumerate()
            .map(|(i, f)| ScanRecord {
                device_id: self.device_id.clone(),
                seq: i as u64,
                timestamp_ms: f.timestamp_ms,
                label: self.labels[i],
                location: self.locations[i].clone(),
                readings: f
                    .readings
                    .iter()
                    .map(|r| Reading {
                        bssid: self.ap_id(r.ap).clone(),
                        rssi_dbm: r.rssi_dbm,
                    })
                    .collect(),
            })
            .collect()
    }
}

/// Builds the fingerprint matrix of one device stream.
pub fn ingest(stream: &[ScanRecord]) -> Result<FingerprintMatrix> {
    let device_id = stream
        .first()
        .map(|r| r.device_id.clone())
        .unwrap_or_default();
    let mut interned: HashMap<ApId, ApKey> = HashMap::new();
    let mut ap_universe = Vec::new();
    let mut fingerprints = Vec::with_capacity(stream.len());
    let mut labels = Vec::with_capacity(stream.len());
    let mut locations = Vec::with_capacity(stream.len());
    let mut last_ts = i64::MIN;

    for (position, record) in stream.iter().enumerate() {
        if record.device_id != device_id {
            return Err(Error::MixedDevice {
                first: device_id,
                other: record.device_id.clone(),
            });
        }
        if record.seq != position as u64 {
            return Err(Error::Order {
                position,
                reason: format!("expected seq {position}, found {}", record.seq),
            });
        }
        if record.timestamp_ms < last_ts {
            return Err(Error::Order {
                position,
                reason: format!("timestamp {} precedes {last_ts}", record.timestamp_ms),
            });
        }
        last_ts = record.timestamp_ms;

        let mut readings = Vec::with_capacity(record.readings.len());
        for r in &record.readings {
            let key = *interned.entry(r.bssid.clone()).or_insert_with(|| {
                ap_universe.push(r.bssid.clone());
                ApKey(ap_universe.len() as u32 - 1)
            });
            readings.push(ApReading {
                ap: key,
                rssi_dbm: r.rssi_dbm,
                power: rssi_to_power(r.rssi_dbm),
            });
        }
        readings.sort_by_key(|r| r.ap);
        if let Some(w) = readings.windows(2).find(|w| w[0].ap == w[1].ap) {
            return Err(Error::DuplicateAp {
                seq: record.seq,
                bssid: ap_universe[w[0].ap.0 as usize].to_string(),
            });
        }
        fingerprints.push(Fingerprint {
            seq: position,
            timestamp_ms: record.timestamp_ms,
            readings,
        });
        labels.push(record.label);
        locations.push(record.location.clone());
    }

    Ok(FingerprintMatrix {
        device_id,
        fingerprints,
        ap_universe,
        labels,
        locations,
    })
}

/// Parses a line-delimited scan log. Blank lines are skipped.
pub fn read_scan_log<R: BufRead>(reader: R) -> Result<Vec<ScanRecord>> {
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Format(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ScanRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_scan_log<W: Write>(mut writer: W, records: &[ScanRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Splits a mixed log into per-device streams, preserving record order.
pub fn split_by_device(records: Vec<ScanRecord>) -> Vec<Vec<ScanRecord>> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<ScanRecord>> = HashMap::new();
    for r in records {
        if !groups.contains_key(&r.device_id) {
            order.push(r.device_id.clone());
        }
        groups.entry(r.device_id.clone()).or_default().push(r);
    }
    order
        .into_iter()
        .map(|d| groups.remove(&d).unwrap_or_default())
        .collect()
}
