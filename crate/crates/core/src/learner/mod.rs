//! Node labeling, weighted ensemble training and fingerprint scoring.
//!
//! Each transition-graph node is one training instance, weighted by its
//! fingerprint count and labeled by majority vote among its labeled
//! fingerprints. Scores are the probability of the indoor class; every
//! fingerprint inherits the score of its cluster's node.

mod forest;
mod gbm;
pub mod tree;

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cluster::ClusterAssignment;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::model::Label;
use tree::{Tree, TreeNode};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    /// Random forest.
    Rf,
    /// Gradient boosting machine.
    Gbm,
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LearnerKind::Rf => "rf",
            LearnerKind::Gbm => "gbm",
        })
    }
}

impl FromStr for LearnerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rf" => Ok(LearnerKind::Rf),
            "gbm" => Ok(LearnerKind::Gbm),
            other => Err(Error::Config(format!("unknown learner {other:?}"))),
        }
    }
}

/// How a node whose labeled members split evenly is labeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieRule {
    Indoor,
    Drop,
}

impl FromStr for TieRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "indoor" => Ok(TieRule::Indoor),
            "drop" => Ok(TieRule::Drop),
            other => Err(Error::Config(format!("unknown tie rule {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    /// GBM shrinkage; unused by random forests.
    pub learning_rate: f64,
    /// Features examined per split; `None` means all.
    pub mtry: Option<usize>,
    pub min_leaf: usize,
    /// Random-forest bagging; unused by GBM.
    pub bootstrap: bool,
}

impl Hyperparameters {
    /// Random forest: 100 unpruned trees, `ceil(sqrt(p))` features per split.
    /// GBM: 100 rounds of depth-3 trees at learning rate 0.1.
    pub fn default_for(kind: LearnerKind, n_features: usize) -> Self {
        match kind {
            LearnerKind::Rf => Self {
                n_trees: 100,
                max_depth: None,
                learning_rate: 0.1,
                mtry: Some((n_features as f64).sqrt().ceil() as usize),
                min_leaf: 1,
                bootstrap: true,
            },
            LearnerKind::Gbm => Self {
                n_trees: 100,
                max_depth: Some(3),
                learning_rate: 0.1,
                mtry: None,
                min_leaf: 1,
                bootstrap: false,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledNode {
    pub node: usize,
    pub label: Label,
    pub weight: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NodeLabels {
    pub labeled: Vec<LabeledNode>,
    /// Nodes left out of training: no labeled member, or a dropped tie.
    pub unlabeled: Vec<usize>,
}

impl NodeLabels {
    /// Per-node label, `None` for nodes left out of training.
    pub fn per_node(&self, nodes: usize) -> Vec<Option<Label>> {
        let mut out = vec![None; nodes];
        for l in &self.labeled {
            out[l.node] = Some(l.label);
        }
        out
    }
}

/// Majority vote of each cluster's labeled fingerprints.
pub fn label_nodes(
    assignment: &ClusterAssignment,
    labels: &[Option<Label>],
    tie: TieRule,
) -> NodeLabels {
    let mut out = NodeLabels::default();
    for c in 0..assignment.num_clusters() {
        let members = assignment.members(c);
        let (mut indoor, mut outdoor) = (0usize, 0usize);
        for &i in members {
            match labels[i] {
                Some(Label::Indoor) => indoor += 1,
                Some(Label::Outdoor) => outdoor += 1,
                None => {}
            }
        }
        let label = match indoor.cmp(&outdoor) {
            _ if indoor + outdoor == 0 => None,
            std::cmp::Ordering::Greater => Some(Label::Indoor),
            std::cmp::Ordering::Less => Some(Label::Outdoor),
            std::cmp::Ordering::Equal => match tie {
                TieRule::Indoor => Some(Label::Indoor),
                TieRule::Drop => None,
            },
        };
        match label {
            Some(label) => out.labeled.push(LabeledNode {
                node: c,
                label,
                weight: members.len(),
            }),
            None => out.unlabeled.push(c),
        }
    }
    out
}

/// A trained ensemble over named features.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub kind: LearnerKind,
    pub params: Hyperparameters,
    pub seed: u64,
    pub feature_names: Vec<String>,
    /// Initial log-odds (GBM only, 0 for forests).
    pub base_score: f64,
    pub trees: Vec<Tree>,
}

/// Trains on the rows of `features` named by `nodes`.
pub fn train(
    features: &FeatureMatrix,
    nodes: &[LabeledNode],
    kind: LearnerKind,
    params: Hyperparameters,
    seed: u64,
) -> Result<Model> {
    if nodes.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} labeled nodes, need at least 2",
            nodes.len()
        )));
    }
    let indoor = nodes.iter().filter(|n| n.label.is_positive()).count();
    if indoor == 0 || indoor == nodes.len() {
        return Err(Error::DegenerateLabels);
    }
    if params.n_trees == 0 || params.min_leaf == 0 || params.mtry == Some(0) {
        return Err(Error::Config(
            "n_trees, min_leaf and mtry must be positive".into(),
        ));
    }
    let rows: Vec<Vec<f64>> = nodes
        .iter()
        .map(|n| features.rows[n.node].clone())
        .collect();
    let targets: Vec<f64> = nodes
        .iter()
        .map(|n| if n.label.is_positive() { 1.0 } else { 0.0 })
        .collect();
    let weights: Vec<f64> = nodes.iter().map(|n| n.weight as f64).collect();
    if weights.iter().any(|&w| w <= 0.0) {
        return Err(Error::InsufficientData("node with zero weight".into()));
    }
    let (base_score, trees) = match kind {
        LearnerKind::Rf => (
            0.0,
            forest::train_forest(&rows, &targets, &weights, &params, seed),
        ),
        LearnerKind::Gbm => gbm::train_gbm(&rows, &targets, &weights, &params, seed),
    };
    Ok(Model {
        kind,
        params,
        seed,
        feature_names: features.names.clone(),
        base_score,
        trees,
    })
}

impl Model {
    /// Indoor probability of one feature vector.
    pub fn score(&self, x: &[f64]) -> f64 {
        match self.kind {
            LearnerKind::Rf => forest::forest_score(&self.trees, x),
            LearnerKind::Gbm => {
                gbm::gbm_score(self.base_score, self.params.learning_rate, &self.trees, x)
            }
        }
    }

    pub fn check_features(&self, names: &[String]) -> Result<()> {
        if self.feature_names == names {
            Ok(())
        } else {
            Err(Error::FeatureMismatch {
                expected: self.feature_names.clone(),
                found: names.to_vec(),
            })
        }
    }

    pub fn score_all(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        self.check_features(&features.names)?;
        Ok(features.rows.iter().map(|r| self.score(r)).collect())
    }
}

/// Node scores broadcast to fingerprints.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub node_scores: Vec<f64>,
    pub fingerprint_scores: Vec<f64>,
    pub threshold: f64,
}

impl Prediction {
    /// Broadcasts per-node scores to every member fingerprint.
    pub fn from_node_scores(
        node_scores: Vec<f64>,
        assignment: &ClusterAssignment,
        threshold: f64,
    ) -> Self {
        let fingerprint_scores = assignment
            .labels()
            .iter()
            .map(|&c| node_scores[c])
            .collect();
        Self {
            node_scores,
            fingerprint_scores,
            threshold,
        }
    }

    fn hard(&self, score: f64) -> Label {
        if score >= self.threshold {
            Label::Indoor
        } else {
            Label::Outdoor
        }
    }

    pub fn node_label(&self, x: usize) -> Label {
        self.hard(self.node_scores[x])
    }

    pub fn fingerprint_label(&self, i: usize) -> Label {
        self.hard(self.fingerprint_scores[i])
    }

    pub fn fingerprint_labels(&self) -> Vec<Label> {
        self.fingerprint_scores
            .iter()
            .map(|&s| self.hard(s))
            .collect()
    }
}

pub fn predict(
    model: &Model,
    features: &FeatureMatrix,
    assignment: &ClusterAssignment,
    threshold: f64,
) -> Result<Prediction> {
    let scores = model.score_all(features)?;
    if scores.len() != assignment.num_clusters() {
        return Err(Error::Coverage {
            assigned: scores.len(),
            expected: assignment.num_clusters(),
        });
    }
    Ok(Prediction::from_node_scores(scores, assignment, threshold))
}

const MODEL_MAGIC: &str = "wifio-model 1";

fn opt_usize(v: Option<usize>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

impl Model {
    /// Text serialization; floats use shortest round-trip formatting so
    /// reading it back yields an identical model.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{MODEL_MAGIC}")?;
        writeln!(w, "kind {}", self.kind)?;
        writeln!(w, "seed {}", self.seed)?;
        writeln!(w, "features {}", self.feature_names.join(","))?;
        writeln!(w, "n_trees {}", self.params.n_trees)?;
        writeln!(w, "max_depth {}", opt_usize(self.params.max_depth))?;
        writeln!(w, "learning_rate {}", self.params.learning_rate)?;
        writeln!(w, "mtry {}", opt_usize(self.params.mtry))?;
        writeln!(w, "min_leaf {}", self.params.min_leaf)?;
        writeln!(w, "bootstrap {}", self.params.bootstrap)?;
        writeln!(w, "base_score {}", self.base_score)?;
        for t in &self.trees {
            writeln!(w, "tree {}", t.nodes.len())?;
            for n in &t.nodes {
                let feature = n.feature.map_or(-1, |f| f as i64);
                writeln!(
                    w,
                    "{feature} {} {} {} {}",
                    n.threshold, n.left, n.right, n.value
                )?;
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("utf-8")
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let lines: Vec<String> = r
            .lines()
            .collect::<std::io::Result<_>>()
            .map_err(|e| Error::Format(e.to_string()))?;
        let mut it = lines
            .iter()
            .map(String::as_str)
            .filter(|l| !l.trim().is_empty());
        let bad = |what: &str| Error::Format(format!("model file: {what}"));
        if it.next() != Some(MODEL_MAGIC) {
            return Err(bad("missing header"));
        }
        fn next_field<'a>(it: &mut impl Iterator<Item = &'a str>, key: &str) -> Result<String> {
            let bad = |what: &str| Error::Format(format!("model file: {what}"));
            let line = it.next().ok_or_else(|| bad(&format!("missing {key}")))?;
            let (k, v) = line.split_once(' ').unwrap_or((line, ""));
            if k != key {
                return Err(bad(&format!("expected {key}, found {k}")));
            }
            Ok(v.to_string())
        }
        let num = |s: String, key: &str| -> Result<f64> { s.parse().map_err(|_| bad(key)) };
        let int = |s: String, key: &str| -> Result<usize> { s.parse().map_err(|_| bad(key)) };
        let opt = |s: String, key: &str| -> Result<Option<usize>> {
            if s == "none" {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(key))
            }
        };
        let kind: LearnerKind = next_field(&mut it, "kind")?.parse()?;
        let seed: u64 = next_field(&mut it, "seed")?
            .parse()
            .map_err(|_| bad("seed"))?;
        let features = next_field(&mut it, "features")?;
        let feature_names: Vec<String> = if features.is_empty() {
            vec![]
        } else {
            features.split(',').map(str::to_owned).collect()
        };
        let params = Hyperparameters {
            n_trees: int(next_field(&mut it, "n_trees")?, "n_trees")?,
            max_depth: opt(next_field(&mut it, "max_depth")?, "max_depth")?,
            learning_rate: num(next_field(&mut it, "learning_rate")?, "learning_rate")?,
            mtry: opt(next_field(&mut it, "mtry")?, "mtry")?,
            min_leaf: int(next_field(&mut it, "min_leaf")?, "min_leaf")?,
            bootstrap: next_field(&mut it, "bootstrap")?
                .parse()
                .map_err(|_| bad("bootstrap"))?,
        };
        let base_score = num(next_field(&mut it, "base_score")?, "base_score")?;
        let mut trees = Vec::with_capacity(params.n_trees);
        for _ in 0..params.n_trees {
            let count = int(next_field(&mut it, "tree")?, "tree")?;
            let mut nodes = Vec::with_capacity(count);
            for _ in 0..count {
                let line = it.next().ok_or_else(|| bad("truncated tree"))?;
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != 5 {
                    return Err(bad("tree node needs 5 fields"));
                }
                let feature: i64 = parts[0].parse().map_err(|_| bad("feature"))?;
                let node = TreeNode {
                    feature: usize::try_from(feature).ok(),
                    threshold: parts[1].parse().map_err(|_| bad("threshold"))?,
                    left: parts[2].parse().map_err(|_| bad("left"))?,
                    right: parts[3].parse().map_err(|_| bad("right"))?,
                    value: parts[4].parse().map_err(|_| bad("value"))?,
                };
                if node.feature.is_some_and(|f| f >= feature_names.len())
                    || (node.feature.is_some() && (node.left >= count || node.right >= count))
                {
                    return Err(bad("tree node out of range"));
                }
                nodes.push(node);
            }
            trees.push(Tree { nodes });
        }
        Ok(Model {
            kind,
            params,
            seed,
            feature_names,
            base_score,
            trees,
        })
    }
}
