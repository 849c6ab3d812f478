//! Deterministic synthetic scan streams with indoor/outdoor ground truth.
//!
//! The default world is a walk that alternates between dwelling inside one of
//! several buildings and walking along the street to the next one. Inside, the
//! walker moves between rooms; each room sees a subset of the building's APs
//! with its own attenuation, so some rooms only catch a few weak signals.
//! Outside, scans catch a handful of weak street APs that change quickly as
//! the walker moves. None of these parameters describe a real environment.
//!
//! The same spec and seed always produce the same stream.

use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ApId, Label, Reading, ScanRecord};
use crate::pipeline::parse_key_values;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// Alternating building dwells and street walks.
    Mixed,
    /// Indoors in an underground car park: at most two weak APs per scan.
    UndergroundParking,
}

impl FromStr for Profile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixed" => Ok(Profile::Mixed),
            "underground-parking" => Ok(Profile::UndergroundParking),
            other => Err(Error::Config(format!("unknown profile {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub seed: u64,
    pub device_id: String,
    pub start_ms: i64,
    pub duration_s: f64,
    pub scan_period_s: f64,
    pub profile: Profile,

    pub buildings: usize,
    pub building_aps_min: usize,
    pub building_aps_max: usize,
    pub indoor_rssi_mean: f64,
    pub indoor_rssi_sigma: f64,
    pub rooms: usize,
    /// Probability that a building AP reaches a given room at all.
    pub room_visibility: f64,
    /// Rooms attenuate every AP by up to this many dB.
    pub room_attenuation_max: f64,
    pub room_dwell_min_s: f64,
    pub room_dwell_max_s: f64,
    pub scan_noise_sigma: f64,
    /// Per-scan probability that a reachable AP is not reported.
    pub dropout: f64,

    pub outdoor_aps_min: usize,
    pub outdoor_aps_max: usize,
    pub outdoor_rssi_mean: f64,
    pub outdoor_rssi_sigma: f64,
    pub outdoor_empty_prob: f64,
    pub street_ap_spacing_m: f64,
    pub street_ap_range_m: f64,
    pub building_spacing_m: f64,

    pub indoor_dwell_min_s: f64,
    pub indoor_dwell_max_s: f64,
    pub outdoor_dwell_min_s: f64,
    pub outdoor_dwell_max_s: f64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            device_id: "synthetic".into(),
            start_ms: 1_500_000_000_000,
            duration_s: 4.0 * 3600.0,
            scan_period_s: 3.0,
            profile: Profile::Mixed,
            buildings: 6,
            building_aps_min: 8,
            building_aps_max: 25,
            indoor_rssi_mean: -55.0,
            indoor_rssi_sigma: 12.0,
            rooms: 5,
            room_visibility: 0.8,
            room_attenuation_max: 30.0,
            room_dwell_min_s: 60.0,
            room_dwell_max_s: 300.0,
            scan_noise_sigma: 3.0,
            dropout: 0.25,
            outdoor_aps_min: 0,
            outdoor_aps_max: 4,
            outdoor_rssi_mean: -82.0,
            outdoor_rssi_sigma: 8.0,
            outdoor_empty_prob: 0.05,
            street_ap_spacing_m: 8.0,
            street_ap_range_m: 30.0,
            building_spacing_m: 300.0,
            indoor_dwell_min_s: 600.0,
            indoor_dwell_max_s: 2400.0,
            outdoor_dwell_min_s: 120.0,
            outdoor_dwell_max_s: 480.0,
        }
    }
}

impl WorldSpec {
    /// Reads `key = value` lines over the defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut spec = Self::default();
        for (k, v) in parse_key_values(text)? {
            spec.set(&k, &v)?;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn p<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
        }
        match key {
            "seed" => self.seed = p(key, value)?,
            "device_id" => self.device_id = value.to_string(),
            "start_ms" => self.start_ms = p(key, value)?,
            "duration_s" => self.duration_s = p(key, value)?,
            "scan_period_s" => self.scan_period_s = p(key, value)?,
            "profile" => self.profile = value.parse()?,
            "buildings" => self.buildings = p(key, value)?,
            "building_aps_min" => self.building_aps_min = p(key, value)?,
            "building_aps_max" => self.building_aps_max = p(key, value)?,
            "indoor_rssi_mean" => self.indoor_rssi_mean = p(key, value)?,
            "indoor_rssi_sigma" => self.indoor_rssi_sigma = p(key, value)?,
            "rooms" => self.rooms = p(key, value)?,
            "room_visibility" => self.room_visibility = p(key, value)?,
            "room_attenuation_max" => self.room_attenuation_max = p(key, value)?,
            "room_dwell_min_s" => self.room_dwell_min_s = p(key, value)?,
            "room_dwell_max_s" => self.room_dwell_max_s = p(key, value)?,
            "scan_noise_sigma" => self.scan_noise_sigma = p(key, value)?,
            "dropout" => self.dropout = p(key, value)?,
            "outdoor_aps_min" => self.outdoor_aps_min = p(key, value)?,
            "outdoor_aps_max" => self.outdoor_aps_max = p(key, value)?,
            "outdoor_rssi_mean" => self.outdoor_rssi_mean = p(key, value)?,
            "outdoor_rssi_sigma" => self.outdoor_rssi_sigma = p(key, value)?,
            "outdoor_empty_prob" => self.outdoor_empty_prob = p(key, value)?,
            "street_ap_spacing_m" => self.street_ap_spacing_m = p(key, value)?,
            "street_ap_range_m" => self.street_ap_range_m = p(key, value)?,
            "building_spacing_m" => self.building_spacing_m = p(key, value)?,
            "indoor_dwell_min_s" => self.indoor_dwell_min_s = p(key, value)?,
            "indoor_dwell_max_s" => self.indoor_dwell_max_s = p(key, value)?,
            "outdoor_dwell_min_s" => self.outdoor_dwell_min_s = p(key, value)?,
            "outdoor_dwell_max_s" => self.outdoor_dwell_max_s = p(key, value)?,
            other => return Err(Error::Config(format!("unknown world key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.duration_s > 0.0 && self.scan_period_s > 0.0) {
            return err("duration and scan period must be positive");
        }
        if !(self.indoor_rssi_sigma > 0.0
            && self.outdoor_rssi_sigma > 0.0
            && self.scan_noise_sigma > 0.0)
        {
            return err("standard deviations must be positive");
        }
        if self.buildings == 0 || self.rooms == 0 || self.building_aps_min == 0 {
            return err("need at least one building, room and AP per building");
        }
        if self.building_aps_min > self.building_aps_max
            || self.outdoor_aps_min > self.outdoor_aps_max
        {
            return err("AP count range is inverted");
        }
        if !(0.0..1.0).contains(&self.dropout)
            || !(0.0..=1.0).contains(&self.outdoor_empty_prob)
            || !(self.room_visibility > 0.0 && self.room_visibility <= 1.0)
        {
            return err("probabilities out of range");
        }
        if self.indoor_dwell_min_s < 0.0
            || self.outdoor_dwell_min_s < 0.0
            || self.indoor_dwell_min_s > self.indoor_dwell_max_s
            || self.outdoor_dwell_min_s > self.outdoor_dwell_max_s
            || self.room_dwell_min_s <= 0.0
            || self.room_dwell_min_s > self.room_dwell_max_s
        {
            return err("dwell ranges must be non-negative and ordered");
        }
        if self.indoor_dwell_max_s == 0.0 && self.outdoor_dwell_max_s == 0.0 {
            return err("indoor and outdoor dwell cannot both be zero");
        }
        if !(self.street_ap_spacing_m > 0.0
            && self.street_ap_range_m > 0.0
            && self.building_spacing_m > 0.0)
        {
            return err("street geometry must be positive");
        }
        if self.room_attenuation_max < 0.0 {
            return err("room attenuation must be non-negative");
        }
        Ok(())
    }

    /// Expected share of indoor time under the dwell schedule.
    pub fn expected_indoor_fraction(&self) -> f64 {
        let indoor = (self.indoor_dwell_min_s + self.indoor_dwell_max_s) / 2.0;
        let outdoor = (self.outdoor_dwell_min_s + self.outdoor_dwell_max_s) / 2.0;
        indoor / (indoor + outdoor)
    }
}

struct Building {
    /// `(ap id, mean dBm)`
    aps: Vec<(u32, f64)>,
    /// Per room: `(index into aps, room-specific mean dBm)`
    rooms: Vec<Vec<(usize, f64)>>,
}

struct World<'a> {
    spec: &'a WorldSpec,
    rng: ChaCha8Rng,
    prefix: [u8; 3],
    next_ap: u32,
    records: Vec<ScanRecord>,
    t_s: f64,
}

impl World<'_> {
    fn new_ap(&mut self) -> u32 {
        self.next_ap += 1;
        self.next_ap
    }

    fn bssid(&self, ap: u32) -> ApId {
        let [_, _, hi, lo] = ap.to_be_bytes();
        let [a, b, c] = self.prefix;
        ApId::parse(&format!("02:{a:02x}:{b:02x}:{c:02x}:{hi:02x}:{lo:02x}")).expect("well-formed")
    }

    fn done(&self) -> bool {
        self.t_s >= self.spec.duration_s
    }

    fn emit(&mut self, readings: Vec<(u32, f64)>, label: Label, location: String) {
        let seq = self.records.len() as u64;
        let mut scan: Vec<Reading> = readings
            .into_iter()
            .map(|(ap, dbm)| Reading {
                bssid: self.bssid(ap),
                rssi_dbm: dbm.round().clamp(-100.0, -20.0) as i32,
            })
            .collect();
        scan.sort_by(|a, b| b.rssi_dbm.cmp(&a.rssi_dbm).then(a.bssid.cmp(&b.bssid)));
        self.records.push(ScanRecord {
            device_id: self.spec.device_id.clone(),
            seq,
            timestamp_ms: self.spec.start_ms + (self.t_s * 1000.0).round() as i64,
            label: Some(label),
            location: Some(location),
            readings: scan,
        });
        self.t_s += self.spec.scan_period_s;
    }

    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        if hi > lo {
            self.rng.random_range(lo..hi)
        } else {
            lo
        }
    }

    fn make_building(&mut self) -> Building {
        let s = self.spec;
        let n = self
            .rng
            .random_range(s.building_aps_min..=s.building_aps_max);
        let mean = Normal::new(s.indoor_rssi_mean, s.indoor_rssi_sigma).expect("sigma > 0");
        let aps: Vec<(u32, f64)> = (0..n)
            .map(|_| {
                let id = self.new_ap();
                (id, mean.sample(&mut self.rng).clamp(-95.0, -30.0))
            })
            .collect();
        let spread = Normal::new(0.0, 4.0).expect("positive");
        let rooms = (0..s.rooms)
            .map(|_| {
                let attenuation = self.uniform(0.0, s.room_attenuation_max);
                let mut visible: Vec<(usize, f64)> = aps
                    .iter()
                    .enumerate()
                    .filter_map(|(i, &(_, m))| {
                        if self.rng.random_bool(s.room_visibility) {
                            Some((i, m - attenuation + spread.sample(&mut self.rng)))
                        } else {
                            None
                        }
                    })
                    .collect();
                if visible.is_empty() {
                    let i = self.rng.random_range(0..aps.len());
                    visible.push((i, aps[i].1 - attenuation));
                }
                visible
            })
            .collect();
        Building { aps, rooms }
    }

    fn indoor_dwell(&mut self, b: &Building, site: usize, seconds: f64) {
        let s = self.spec;
        let end = self.t_s + seconds;
        let noise = Normal::new(0.0, s.scan_noise_sigma).expect("sigma > 0");
        while self.t_s < end && !self.done() {
            let room = self.rng.random_range(0..b.rooms.len());
            let room_end = self.t_s + self.uniform(s.room_dwell_min_s, s.room_dwell_max_s);
            while self.t_s < room_end.min(end) && !self.done() {
                let readings: Vec<(u32, f64)> = b.rooms[room]
                    .iter()
                    .filter_map(|&(i, m)| {
                        if self.rng.random_bool(s.dropout) {
                            None
                        } else {
                            Some((b.aps[i].0, m + noise.sample(&mut self.rng)))
                        }
                    })
                    .filter(|&(_, dbm)| dbm >= -99.0)
                    .collect();
                self.emit(readings, Label::Indoor, format!("site-{site}"));
            }
        }
    }

    /// Walks from `from` to `to` along the street; street APs are keyed by
    /// their slot along the line so revisited stretches reuse them.
    fn street_walk(&mut self, street: &mut Vec<u32>, from: usize, to: usize, seconds: f64) {
        let s = self.spec;
        let start_m = from as f64 * s.building_spacing_m;
        let end_m = to as f64 * s.building_spacing_m;
        let t_start = self.t_s;
        let end = self.t_s + seconds;
        let rssi = Normal::new(s.outdoor_rssi_mean, s.outdoor_rssi_sigma).expect("sigma > 0");
        while self.t_s < end && !self.done() {
            let progress = ((self.t_s - t_start) / seconds).clamp(0.0, 1.0);
            let pos = start_m + (end_m - start_m) * progress;
            let lo = ((pos - s.street_ap_range_m) / s.street_ap_spacing_m)
                .ceil()
                .max(0.0) as usize;
            let hi = ((pos + s.street_ap_range_m) / s.street_ap_spacing_m)
                .floor()
                .max(0.0) as usize;
            while street.len() <= hi {
                let id = self.new_ap();
                street.push(id);
            }
            let in_range = hi + 1 - lo;
            let count = if self.rng.random_bool(s.outdoor_empty_prob) {
                0
            } else {
                self.rng
                    .random_range(s.outdoor_aps_min..=s.outdoor_aps_max)
                    .min(in_range)
            };
            let readings: Vec<(u32, f64)> = sample(&mut self.rng, in_range, count)
                .into_iter()
                .map(|k| (street[lo + k], rssi.sample(&mut self.rng).min(-45.0)))
                .collect();
            let site = if progress < 0.5 { from } else { to };
            self.emit(readings, Label::Outdoor, format!("site-{site}"));
        }
    }

    fn parking(&mut self) {
        let pool: Vec<u32> = (0..6).map(|_| self.new_ap()).collect();
        let rssi = Normal::new(-90.0_f64, 3.0).expect("positive");
        while !self.done() {
            let count = self.rng.random_range(0..=2usize);
            let readings: Vec<(u32, f64)> = sample(&mut self.rng, pool.len(), count)
                .into_iter()
                .map(|k| (pool[k], rssi.sample(&mut self.rng).clamp(-99.0_f64, -85.0)))
                .collect();
            self.emit(readings, Label::Indoor, "parking".into());
        }
    }
}

/// Generates the scan stream described by `spec`.
pub fn generate(spec: &WorldSpec) -> Result<Vec<ScanRecord>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut prefix = [0u8; 3];
    rng.fill_bytes(&mut prefix);
    let mut world = World {
        spec,
        rng,
        prefix,
        next_ap: 0,
        records: Vec::new(),
        t_s: 0.0,
    };
    if spec.profile == Profile::UndergroundParking {
        world.parking();
        return Ok(world.records);
    }

    let buildings: Vec<Building> = (0..spec.buildings).map(|_| world.make_building()).collect();
    let mut street = Vec::new();
    let indoors_only = spec.outdoor_dwell_max_s == 0.0;
    let outdoors_only = spec.indoor_dwell_max_s == 0.0;
    let mut here = world.rng.random_range(0..spec.buildings);
    while !world.done() {
        if !outdoors_only {
            let dwell = world.uniform(spec.indoor_dwell_min_s, spec.indoor_dwell_max_s);
            world.indoor_dwell(&buildings[here], here, dwell);
        }
        if indoors_only || world.done() {
            continue;
        }
        let next = if spec.buildings == 1 {
            here
        } else {
            let k = world.rng.random_range(0..spec.buildings - 1);
            if k >= here {
                k + 1
            } else {
                k
            }
        };
        let dwell = world.uniform(spec.outdoor_dwell_min_s, spec.outdoor_dwell_max_s);
        world.street_walk(&mut street, here, next, dwell.max(spec.scan_period_s));
        here = next;
    }
    Ok(world.records)
}
