//! Neighborhood features of transition-graph nodes.
//!
//! For a node `x` and hop bound `d`, the neighborhood `N_x(d)` is every node
//! reachable within `d` hops. Four feature families are computed over it:
//!
//! * `neighbors_d`: `|N_x(d)|`
//! * `power_d`: mean dBm over every reading of every fingerprint in the
//!   neighborhood's clusters ([`NO_SIGNAL_DBM`] when there are none)
//! * `aps_d`: readings per fingerprint over the same pool (empty scans count)
//! * `fps_d`: mean cluster size over the neighborhood's nodes
//!
//! The default [`FeatureSet`] uses hop bounds 2..=6 for the neighbor count and
//! 0..=4 for the other three families: 20 features in total.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::graph::TransitionGraph;
use crate::model::{FingerprintMatrix, Label};

/// Average power reported for a neighborhood with no readings at all.
pub const NO_SIGNAL_DBM: f64 = -100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureFamily {
    Neighbors,
    Power,
    Aps,
    Fingerprints,
}

impl FeatureFamily {
    pub const ALL: [FeatureFamily; 4] = [
        FeatureFamily::Neighbors,
        FeatureFamily::Power,
        FeatureFamily::Aps,
        FeatureFamily::Fingerprints,
    ];

    pub fn prefix(self) -> &'static str {
        match self {
            FeatureFamily::Neighbors => "neighbors",
            FeatureFamily::Power => "power",
            FeatureFamily::Aps => "aps",
            FeatureFamily::Fingerprints => "fps",
        }
    }

    pub fn column(self, d: usize) -> String {
        format!("{}_d{d}", self.prefix())
    }
}

/// Hop bounds used for each feature family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub neighbors: Vec<usize>,
    pub power: Vec<usize>,
    pub aps: Vec<usize>,
    pub fps: Vec<usize>,
}

impl Default for FeatureSet {
    fn default() -> Self {
        Self {
            neighbors: (2..=6).collect(),
            power: (0..=4).collect(),
            aps: (0..=4).collect(),
            fps: (0..=4).collect(),
        }
    }
}

impl FeatureSet {
    /// Node-local features only (no graph context): power, APs per scan and
    /// cluster size at hop bound 0.
    pub fn local() -> Self {
        Self {
            neighbors: vec![],
            power: vec![0],
            aps: vec![0],
            fps: vec![0],
        }
    }

    /// Every family at every hop bound in `0..=max_d`.
    pub fn exhaustive(max_d: usize) -> Self {
        let all: Vec<usize> = (0..=max_d).collect();
        Self {
            neighbors: all.clone(),
            power: all.clone(),
            aps: all.clone(),
            fps: all,
        }
    }

    pub fn bounds(&self, family: FeatureFamily) -> &[usize] {
        match family {
            FeatureFamily::Neighbors => &self.neighbors,
            FeatureFamily::Power => &self.power,
            FeatureFamily::Aps => &self.aps,
            FeatureFamily::Fingerprints => &self.fps,
        }
    }

    /// `(family, d)` per column, in column order.
    pub fn columns(&self) -> Vec<(FeatureFamily, usize)> {
        FeatureFamily::ALL
            .iter()
            .flat_map(|&f| self.bounds(f).iter().map(move |&d| (f, d)))
            .collect()
    }

    pub fn names(&self) -> Vec<String> {
        self.columns()
            .into_iter()
            .map(|(f, d)| f.column(d))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.columns().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn max_d(&self) -> usize {
        self.columns()
            .into_iter()
            .map(|(_, d)| d)
            .max()
            .unwrap_or(0)
    }

    /// Parses a column list such as `neighbors_d2,power_d0`.
    pub fn from_names(names: &[String]) -> Result<Self> {
        let mut set = Self {
            neighbors: vec![],
            power: vec![],
            aps: vec![],
            fps: vec![],
        };
        for name in names {
            let (prefix, d) = name
                .rsplit_once("_d")
                .ok_or_else(|| Error::Format(format!("bad feature column {name:?}")))?;
            let d: usize = d
                .parse()
                .map_err(|_| Error::Format(format!("bad feature column {name:?}")))?;
            let family = FeatureFamily::ALL
                .into_iter()
                .find(|f| f.prefix() == prefix)
                .ok_or_else(|| Error::Format(format!("unknown feature family {prefix:?}")))?;
            match family {
                FeatureFamily::Neighbors => set.neighbors.push(d),
                FeatureFamily::Power => set.power.push(d),
                FeatureFamily::Aps => set.aps.push(d),
                FeatureFamily::Fingerprints => set.fps.push(d),
            }
        }
        if set.names() != names {
            return Err(Error::Format(
                "feature columns are not in canonical order".into(),
            ));
        }
        Ok(set)
    }
}

/// One feature row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.names.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct NodeTotals {
    readings: u64,
    dbm_sum: i64,
    fingerprints: u64,
}

fn node_totals(g: &TransitionGraph, m: &FingerprintMatrix) -> Vec<NodeTotals> {
    (0..g.node_count())
        .map(|x| {
            let mut t = NodeTotals::default();
            for &i in g.members(x) {
                let f = m.fingerprint(i);
                t.fingerprints += 1;
                t.readings += f.len() as u64;
                t.dbm_sum += f
                    .readings()
                    .iter()
                    .map(|r| i64::from(r.rssi_dbm))
                    .sum::<i64>();
            }
            t
        })
        .collect()
}

fn node_row(
    g: &TransitionGraph,
    totals: &[NodeTotals],
    columns: &[(FeatureFamily, usize)],
    max_d: usize,
    x: usize,
) -> Vec<f64> {
    let layers = g.bfs_layers(x, max_d).expect("node in range");
    // cumulative pool per hop bound
    let mut cumulative = Vec::with_capacity(max_d + 1);
    let (mut nodes, mut acc) = (0usize, NodeTotals::default());
    for d in 0..=max_d {
        if let Some(layer) = layers.get(d) {
            for &y in layer {
                nodes += 1;
                acc.readings += totals[y].readings;
                acc.dbm_sum += totals[y].dbm_sum;
                acc.fingerprints += totals[y].fingerprints;
            }
        }
        cumulative.push((nodes, acc));
    }
    columns
        .iter()
        .map(|&(family, d)| {
            let (n, t) = cumulative[d];
            match family {
                FeatureFamily::Neighbors => n as f64,
                FeatureFamily::Power if t.readings == 0 => NO_SIGNAL_DBM,
                FeatureFamily::Power => t.dbm_sum as f64 / t.readings as f64,
                FeatureFamily::Aps => t.readings as f64 / t.fingerprints as f64,
                FeatureFamily::Fingerprints => t.fingerprints as f64 / n as f64,
            }
        })
        .collect()
}

/// Computes `set`'s features for every node of `g` (a graph over `m`).
pub fn extract_features(
    g: &TransitionGraph,
    m: &FingerprintMatrix,
    set: &FeatureSet,
) -> FeatureMatrix {
    let totals = node_totals(g, m);
    let columns = set.columns();
    let max_d = set.max_d();
    let row = |x: usize| node_row(g, &totals, &columns, max_d, x);
    #[cfg(feature = "parallel")]
    let rows = {
        use rayon::prelude::*;
        (0..g.node_count()).into_par_iter().map(row).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows = (0..g.node_count()).map(row).collect();
    FeatureMatrix {
        names: set.names(),
        rows,
    }
}

fn label_cell(l: Option<Label>) -> &'static str {
    l.map_or("", Label::as_str)
}

/// Writes the feature table as CSV with trailing `weight,label` columns.
/// Unlabeled nodes have an empty label cell.
pub fn write_feature_csv<W: Write>(
    mut w: W,
    features: &FeatureMatrix,
    weights: &[f64],
    labels: &[Option<Label>],
) -> std::io::Result<()> {
    writeln!(w, "{},weight,label", features.names.join(","))?;
    for ((row, weight), label) in features.rows.iter().zip(weights).zip(labels) {
        for v in row {
            write!(w, "{v},")?;
        }
        writeln!(w, "{weight},{}", label_cell(*label))?;
    }
    Ok(())
}

/// A feature table read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub features: FeatureMatrix,
    pub weights: Vec<f64>,
    pub labels: Vec<Option<Label>>,
}

pub fn read_feature_csv<R: BufRead>(r: R) -> Result<FeatureTable> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty feature file".into()))?
        .map_err(|e| Error::Format(e.to_string()))?;
    let mut names: Vec<String> = header.trim().split(',').map(str::to_owned).collect();
    if names.len() < 2 || names[names.len() - 2..] != ["weight", "label"] {
        return Err(Error::Format(
            "feature header must end with weight,label".into(),
        ));
    }
    names.truncate(names.len() - 2);
    let width = names.len();
    let mut table = FeatureTable {
        features: FeatureMatrix {
            names,
            rows: vec![],
        },
        weights: vec![],
        labels: vec![],
    };
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::Format(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.trim_end().split(',').collect();
        if cells.len() != width + 2 {
            return Err(Error::Format(format!(
                "row {}: expected {} cells, found {}",
                lineno + 2,
                width + 2,
                cells.len()
            )));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Format(format!("row {}: bad number {s:?}", lineno + 2)))
        };
        let row = cells[..width]
            .iter()
            .map(|c| parse(c))
            .collect::<Result<Vec<_>>>()?;
        table.features.rows.push(row);
        table.weights.push(parse(cells[width])?);
        table.labels.push(match cells[width + 1] {
            "" => None,
            s => Some(s.parse()?),
        });
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionEntry {
    pub name: String,
    pub family: FeatureFamily,
    pub d: usize,
    pub coefficient: Option<f64>,
    pub t_stat: Option<f64>,
    pub p_value: Option<f64>,
    pub selected: bool,
    /// Why a column was left out of the regression, if it was.
    pub dropped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSelectionReport {
    pub entries: Vec<SelectionEntry>,
    pub intercept: f64,
    pub residual_df: usize,
}

pub const SELECTION_ALPHA: f64 = 0.05;

impl FeatureSelectionReport {
    /// Selected hop bounds per family, as a feature set.
    pub fn selected_set(&self) -> FeatureSet {
        let mut set = FeatureSet {
            neighbors: vec![],
            power: vec![],
            aps: vec![],
            fps: vec![],
        };
        for e in self.entries.iter().filter(|e| e.selected) {
            match e.family {
                FeatureFamily::Neighbors => set.neighbors.push(e.d),
                FeatureFamily::Power => set.power.push(e.d),
                FeatureFamily::Aps => set.aps.push(e.d),
                FeatureFamily::Fingerprints => set.fps.push(e.d),
            }
        }
        set
    }
}

/// OLS fit with per-coefficient standard errors.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    pub residual_df: usize,
}

/// Ordinary least squares of `y` on the columns of `x` (which must already
/// include an intercept column if one is wanted), solved through QR, with
/// two-sided t-tests on each coefficient.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    let (n, p) = x.shape();
    if n <= p {
        return Err(Error::InsufficientData(format!(
            "{n} observations for {p} coefficients"
        )));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let rank = (0..p)
        .filter(|&i| r[(i, i)].abs() > 1e-10 * scale.max(1.0))
        .count();
    if rank < p {
        return Err(Error::RankDeficiency { rank, cols: p });
    }
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or(Error::RankDeficiency { rank, cols: p })?;
    let qty = qr.q().transpose() * y;
    let beta = &r_inv * qty;
    let residuals = y - x * &beta;
    let df = n - p;
    let sigma2 = residuals.norm_squared() / df as f64;
    let t_dist = StudentsT::new(0.0, 1.0, df as f64).expect("positive df");
    let mut fit = OlsFit {
        coefficients: beta.iter().copied().collect(),
        std_errors: Vec::with_capacity(p),
        t_stats: Vec::with_capacity(p),
        p_values: Vec::with_capacity(p),
        residual_df: df,
    };
    for j in 0..p {
        // diag of (X'X)^-1 = R^-1 R^-T
        let v: f64 = r_inv.row(j).iter().map(|a| a * a).sum();
        let se = (sigma2 * v).sqrt();
        let t = beta[j] / se;
        fit.std_errors.push(se);
        fit.t_stats.push(t);
        fit.p_values.push((2.0 * t_dist.sf(t.abs())).min(1.0));
    }
    Ok(fit)
}

/// Regresses the node label (indoor = 1, outdoor = 0) on every feature column
/// and marks the columns whose coefficient is significant at 5%.
///
/// Constant columns, and columns identical to an earlier column, are dropped
/// before fitting and reported as not selected.
pub fn select_neighborhood_sizes(
    features: &FeatureMatrix,
    labels: &[Label],
) -> Result<FeatureSelectionReport> {
    assert_eq!(features.rows.len(), labels.len());
    let indoor = labels.iter().filter(|l| l.is_positive()).count();
    if indoor == 0 || indoor == labels.len() {
        return Err(Error::DegenerateLabels);
    }
    let set = FeatureSet::from_names(&features.names)?;
    let columns = set.columns();
    let n = labels.len();
    let col = |j: usize| -> Vec<f64> { features.rows.iter().map(|r| r[j]).collect() };

    let mut kept: Vec<usize> = Vec::new();
    let mut dropped: Vec<Option<String>> = vec![None; columns.len()];
    for (j, reason) in dropped.iter_mut().enumerate() {
        let values = col(j);
        if values.iter().all(|&v| v == values[0]) {
            *reason = Some("constant".into());
        } else if let Some(&k) = kept.iter().find(|&&k| col(k) == values) {
            *reason = Some(format!("duplicate of {}", features.names[k]));
        } else {
            kept.push(j);
        }
    }

    let x = DMatrix::from_fn(n, kept.len() + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            features.rows[i][kept[j - 1]]
        }
    });
    let y = DVector::from_iterator(
        n,
        labels
            .iter()
            .map(|l| if l.is_positive() { 1.0 } else { 0.0 }),
    );
    let fit = ols(&x, &y)?;

    let entries = columns
        .iter()
        .enumerate()
        .map(|(j, &(family, d))| {
            let pos = kept.iter().position(|&k| k == j).map(|p| p + 1);
            let p_value = pos.map(|p| fit.p_values[p]);
            SelectionEntry {
                name: features.names[j].clone(),
                family,
                d,
                coefficient: pos.map(|p| fit.coefficients[p]),
                t_stat: pos.map(|p| fit.t_stats[p]),
                p_value,
                selected: p_value.is_some_and(|p| p <= SELECTION_ALPHA),
                dropped: dropped[j].clone(),
            }
        })
        .collect();
    Ok(FeatureSelectionReport {
        entries,
        intercept: fit.coefficients[0],
        residual_df: fit.residual_df,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::ClusterAssignment;
    use crate::graph::build_graph;
    use crate::model::{ingest, ApId, Reading, ScanRecord};

    fn uniform_matrix(n: usize, aps: usize, dbm: i32) -> FingerprintMatrix {
        let records: Vec<ScanRecord> = (0..n)
            .map(|i| ScanRecord {
                device_id: "d".into(),
                seq: i as u64,
                timestamp_ms: i as i64,
                label: None,
                location: None,
                readings: (0..aps)
                    .map(|a| Reading {
                        bssid: ApId::parse(&format!("00:00:00:00:00:{a:02x}")).unwrap(),
                        rssi_dbm: dbm,
                    })
                    .collect(),
            })
            .collect();
        ingest(&records).unwrap()
    }

    #[test]
    fn default_set_has_twenty_columns() {
        let set = FeatureSet::default();
        assert_eq!(set.len(), 20);
        assert_eq!(set.names()[0], "neighbors_d2");
        assert_eq!(set.names()[19], "fps_d4");
        assert_eq!(FeatureSet::from_names(&set.names()).unwrap(), set);
    }

    #[test]
    fn isolated_uniform_node() {
        let m = uniform_matrix(4, 2, -50);
        let a = ClusterAssignment::from_labels(&[0, 0, 0, 0]);
        let g = build_graph(&a, &m, None).unwrap();
        let f = extract_features(&g, &m, &FeatureSet::default());
        assert_eq!(f.column("power_d0").unwrap(), vec![-50.0]);
        assert_eq!(f.column("aps_d0").unwrap(), vec![2.0]);
        assert_eq!(f.column("fps_d0").unwrap(), vec![4.0]);
        assert_eq!(f.column("neighbors_d2").unwrap(), vec![1.0]);
    }

    #[test]
    fn mean_cluster_size_over_neighborhood() {
        let m = uniform_matrix(8, 1, -60);
        let a = ClusterAssignment::from_labels(&[0, 0, 1, 1, 1, 1, 1, 1]);
        let g = build_graph(&a, &m, None).unwrap();
        let f = extract_features(&g, &m, &FeatureSet::exhaustive(1));
        assert_eq!(f.column("fps_d1").unwrap(), vec![4.0, 4.0]);
        assert_eq!(f.column("fps_d0").unwrap(), vec![2.0, 6.0]);
    }

    #[test]
    fn all_empty_pool_uses_sentinel() {
        let m = uniform_matrix(3, 0, 0);
        let a = ClusterAssignment::from_labels(&[0, 0, 0]);
        let g = build_graph(&a, &m, None).unwrap();
        let f = extract_features(&g, &m, &FeatureSet::local());
        assert_eq!(f.rows[0], vec![NO_SIGNAL_DBM, 0.0, 3.0]);
    }

    #[test]
    fn csv_round_trip() {
        let features = FeatureMatrix {
            names: FeatureSet::local().names(),
            rows: vec![vec![-61.25, 3.5, 2.0], vec![-100.0, 0.0, 1.0]],
        };
        let mut buf = Vec::new();
        write_feature_csv(
            &mut buf,
            &features,
            &[2.0, 1.0],
            &[Some(Label::Indoor), None],
        )
        .unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("power_d0,aps_d0,fps_d0,weight,label\n-61.25,3.5,2,2,indoor\n"));
        let t = read_feature_csv(buf.as_slice()).unwrap();
        assert_eq!(t.features, features);
        assert_eq!(t.labels, vec![Some(Label::Indoor), None]);
    }

    #[test]
    fn degenerate_labels_rejected() {
        let features = FeatureMatrix {
            names: vec!["power_d0".into()],
            rows: vec![vec![1.0], vec![2.0], vec![3.0]],
        };
        assert_eq!(
            select_neighborhood_sizes(&features, &[Label::Indoor; 3]),
            Err(Error::DegenerateLabels)
        );
    }

    #[test]
    fn collinear_design_is_rank_deficient() {
        // aps_d0 = 2 * power_d0 + 1, not an exact duplicate
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|i| vec![i as f64, 2.0 * i as f64 + 1.0])
            .collect();
        let features = FeatureMatrix {
            names: vec!["power_d0".into(), "aps_d0".into()],
            rows,
        };
        let labels: Vec<Label> = (0..12)
            .map(|i| {
                if i % 2 == 0 {
                    Label::Indoor
                } else {
                    Label::Outdoor
                }
            })
            .collect();
        assert!(matches!(
            select_neighborhood_sizes(&features, &labels),
            Err(Error::RankDeficiency { .. })
        ));
    }
}
