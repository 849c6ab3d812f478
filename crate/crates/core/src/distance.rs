//! Sparse-adapted Spearman rank distance between two fingerprints.
//!
//! Both fingerprints are ranked over the union of their access points, rank 1
//! being the strongest signal. An AP missing from one side is ranked below
//! every AP that side did receive; all such APs tie, so with `k` present APs
//! and `m` absent ones each absent AP gets rank `k + (m + 1) / 2`. Equal
//! readings share the average of the ranks they span.
//!
//! The distance is `6 Σd² / (n (n² - 1))`, i.e. `1 - ρ`, with special cases
//! for empty, disjoint and single-AP fingerprints. It lies in `[0, 2]` and is
//! symmetric, but it is not a metric: the triangle inequality does not hold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ApKey, ApReading, Fingerprint};

/// Which branch of the case table produced a distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceCase {
    /// A fingerprint compared with itself.
    Identity,
    /// Both empty and collected one after the other.
    EmptyAdjacent,
    /// Both empty and not consecutive.
    EmptyNonAdjacent,
    /// No access point in common (includes one side empty).
    Disjoint,
    /// Both received exactly the same single access point.
    SingleIdentical,
    Spearman,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceValue {
    pub value: f64,
    pub case: DistanceCase,
}

/// Ranks of both fingerprints over their union of access points.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseRanking {
    pub union_aps: Vec<ApKey>,
    pub ranks_x: Vec<f64>,
    pub ranks_y: Vec<f64>,
}

impl PairwiseRanking {
    pub fn n(&self) -> usize {
        self.union_aps.len()
    }

    pub fn sum_squared_differences(&self) -> f64 {
        self.ranks_x
            .iter()
            .zip(&self.ranks_y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

/// Fractional ranks of `readings` (rank 1 = strongest), in the same order.
///
/// Readings compare by integer dBm, which orders them exactly as their linear
/// powers do.
pub fn intra_ranks(readings: &[ApReading]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..readings.len()).collect();
    order.sort_by(|&a, &b| readings[b].rssi_dbm.cmp(&readings[a].rssi_dbm));
    let mut ranks = vec![0.0; readings.len()];
    let mut start = 0;
    while start < order.len() {
        let level = readings[order[start]].rssi_dbm;
        let mut end = start + 1;
        while end < order.len() && readings[order[end]].rssi_dbm == level {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// A fingerprint's AP keys (ascending) with their intra-fingerprint ranks.
#[derive(Debug, Clone, Copy)]
pub struct RankedView<'a> {
    pub keys: &'a [ApKey],
    pub ranks: &'a [f64],
}

impl RankedView<'_> {
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

fn intersection_size(a: &[ApKey], b: &[ApKey]) -> usize {
    let (mut i, mut j, mut c) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                c += 1;
                i += 1;
                j += 1;
            }
        }
    }
    c
}

/// Distance between two ranked, non-empty fingerprints. Handles the
/// disjoint, single-identical and Spearman cases.
pub fn ranked_distance(x: RankedView<'_>, y: RankedView<'_>) -> DistanceValue {
    debug_assert!(!x.is_empty() && !y.is_empty());
    let common = intersection_size(x.keys, y.keys);
    if common == 0 {
        return DistanceValue {
            value: 2.0,
            case: DistanceCase::Disjoint,
        };
    }
    let (kx, ky) = (x.len(), y.len());
    if common == 1 && kx == 1 && ky == 1 {
        return DistanceValue {
            value: 0.0,
            case: DistanceCase::SingleIdentical,
        };
    }
    // rank shared by the APs each side is missing
    let absent_in_x = kx as f64 + ((ky - common) as f64 + 1.0) / 2.0;
    let absent_in_y = ky as f64 + ((kx - common) as f64 + 1.0) / 2.0;

    let mut sum = 0.0;
    let (mut i, mut j) = (0, 0);
    while i < kx || j < ky {
        let d = if j == ky || (i < kx && x.keys[i] < y.keys[j]) {
            i += 1;
            x.ranks[i - 1] - absent_in_y
        } else if i == kx || y.keys[j] < x.keys[i] {
            j += 1;
            absent_in_x - y.ranks[j - 1]
        } else {
            i += 1;
            j += 1;
            x.ranks[i - 1] - y.ranks[j - 1]
        };
        sum += d * d;
    }
    let n = (kx + ky - common) as f64;
    DistanceValue {
        value: spearman_distance(sum, n),
        case: DistanceCase::Spearman,
    }
}

/// `6 Σd² / (n (n² - 1))`, clamped into `[0, 2]`.
pub fn spearman_distance(sum_sq: f64, n: f64) -> f64 {
    (6.0 * sum_sq / (n * (n * n - 1.0))).clamp(0.0, 2.0)
}

/// Union ranking of two fingerprints that share at least one access point.
pub fn pairwise_ranking(x: &Fingerprint, y: &Fingerprint) -> Result<PairwiseRanking> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyFingerprint);
    }
    let keys_x: Vec<ApKey> = x.keys().collect();
    let keys_y: Vec<ApKey> = y.keys().collect();
    let common = intersection_size(&keys_x, &keys_y);
    if common == 0 {
        return Err(Error::Disjoint);
    }
    let rx = intra_ranks(x.readings());
    let ry = intra_ranks(y.readings());
    let absent_in_x = keys_x.len() as f64 + ((keys_y.len() - common) as f64 + 1.0) / 2.0;
    let absent_in_y = keys_y.len() as f64 + ((keys_x.len() - common) as f64 + 1.0) / 2.0;

    let mut out = PairwiseRanking {
        union_aps: Vec::new(),
        ranks_x: Vec::new(),
        ranks_y: Vec::new(),
    };
    let (mut i, mut j) = (0, 0);
    while i < keys_x.len() || j < keys_y.len() {
        let (key, a, b) = if j == keys_y.len() || (i < keys_x.len() && keys_x[i] < keys_y[j]) {
            i += 1;
            (keys_x[i - 1], rx[i - 1], absent_in_y)
        } else if i == keys_x.len() || keys_y[j] < keys_x[i] {
            j += 1;
            (keys_y[j - 1], absent_in_x, ry[j - 1])
        } else {
            i += 1;
            j += 1;
            (keys_x[i - 1], rx[i - 1], ry[j - 1])
        };
        out.union_aps.push(key);
        out.ranks_x.push(a);
        out.ranks_y.push(b);
    }
    Ok(out)
}

/// Distance between fingerprint `x` at scan index `i` and `y` at index `j`.
pub fn distance(x: &Fingerprint, y: &Fingerprint, i: usize, j: usize) -> DistanceValue {
    match (x.is_empty(), y.is_empty()) {
        (true, true) => {
            let case = if i == j {
                DistanceCase::Identity
            } else if i.abs_diff(j) == 1 {
                DistanceCase::EmptyAdjacent
            } else {
                DistanceCase::EmptyNonAdjacent
            };
            let value = if case == DistanceCase::EmptyNonAdjacent {
                2.0
            } else {
                0.0
            };
            DistanceValue { value, case }
        }
        (true, false) | (false, true) => DistanceValue {
            value: 2.0,
            case: DistanceCase::Disjoint,
        },
        (false, false) => {
            let kx: Vec<ApKey> = x.keys().collect();
            let ky: Vec<ApKey> = y.keys().collect();
            let rx = intra_ranks(x.readings());
            let ry = intra_ranks(y.readings());
            ranked_distance(
                RankedView {
                    keys: &kx,
                    ranks: &rx,
                },
                RankedView {
                    keys: &ky,
                    ranks: &ry,
                },
            )
        }
    }
}
