//! End-to-end composition: cluster, graph, features, train, score.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cluster::{cluster, ClusterAssignment, ClusterParams};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport};
use crate::features::{extract_features, FeatureMatrix, FeatureSet};
use crate::graph::{build_graph, TransitionGraph};
use crate::index::FingerprintIndex;
use crate::learner::{
    label_nodes, predict, train, Hyperparameters, LearnerKind, Model, NodeLabels, Prediction,
    TieRule, DEFAULT_THRESHOLD,
};
use crate::model::{FingerprintMatrix, Label};

/// Which structure the classifier sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    /// Transition-graph neighborhoods (the full method).
    Graph,
    /// Cluster-local features only.
    Cluster,
    /// Every fingerprint is its own node; local features only.
    Fingerprint,
}

impl FromStr for FeatureMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "graph" => Ok(FeatureMode::Graph),
            "cluster" => Ok(FeatureMode::Cluster),
            "fingerprint" => Ok(FeatureMode::Fingerprint),
            other => Err(Error::Config(format!("unknown feature mode {other:?}"))),
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureMode::Graph => "graph",
            FeatureMode::Cluster => "cluster",
            FeatureMode::Fingerprint => "fingerprint",
        })
    }
}

/// Optional per-run hyperparameter overrides; unset fields take the learner's
/// defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HyperOverrides {
    pub n_trees: Option<usize>,
    pub max_depth: Option<Option<usize>>,
    pub learning_rate: Option<f64>,
    pub mtry: Option<Option<usize>>,
    pub min_leaf: Option<usize>,
    pub bootstrap: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub eps: f64,
    pub min_pts: usize,
    pub max_gap_ms: Option<i64>,
    pub features: FeatureSet,
    pub mode: FeatureMode,
    pub learner: LearnerKind,
    pub hyper: HyperOverrides,
    pub seed: u64,
    pub threshold: f64,
    pub tie_rule: TieRule,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let c = ClusterParams::default();
        Self {
            eps: c.eps,
            min_pts: c.min_pts,
            max_gap_ms: None,
            features: FeatureSet::default(),
            mode: FeatureMode::Graph,
            learner: LearnerKind::Gbm,
            hyper: HyperOverrides::default(),
            seed: 1,
            threshold: DEFAULT_THRESHOLD,
            tie_rule: TieRule::Indoor,
        }
    }
}

fn parse_bounds(v: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("bad hop-bound list {v:?}"));
    let mut out = Vec::new();
    for part in v.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once('-') {
            let (a, b): (usize, usize) = (
                a.trim().parse().map_err(|_| bad())?,
                b.trim().parse().map_err(|_| bad())?,
            );
            if a > b {
                return Err(bad());
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    Ok(out)
}

fn parse_opt_usize(v: &str) -> Result<Option<usize>> {
    if v == "none" {
        Ok(None)
    } else {
        v.parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("expected integer or none, got {v:?}")))
    }
}

/// Parses flat `key = value` lines; `#` starts a comment.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl PipelineConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || Error::Config(format!("bad value {value:?} for {key}"));
        match key {
            "eps" => self.eps = value.parse().map_err(|_| bad())?,
            "min_pts" => self.min_pts = value.parse().map_err(|_| bad())?,
            "max_gap_ms" => {
                self.max_gap_ms = if value == "none" {
                    None
                } else {
                    Some(value.parse().map_err(|_| bad())?)
                }
            }
            "neighbors_d" => self.features.neighbors = parse_bounds(value)?,
            "power_d" => self.features.power = parse_bounds(value)?,
            "aps_d" => self.features.aps = parse_bounds(value)?,
            "fps_d" => self.features.fps = parse_bounds(value)?,
            "mode" => self.mode = value.parse()?,
            "learner" => self.learner = value.parse()?,
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            "threshold" => self.threshold = value.parse().map_err(|_| bad())?,
            "tie_rule" => self.tie_rule = value.parse()?,
            "n_trees" => self.hyper.n_trees = Some(value.parse().map_err(|_| bad())?),
            "max_depth" => self.hyper.max_depth = Some(parse_opt_usize(value)?),
            "learning_rate" => self.hyper.learning_rate = Some(value.parse().map_err(|_| bad())?),
            "mtry" => self.hyper.mtry = Some(parse_opt_usize(value)?),
            "min_leaf" => self.hyper.min_leaf = Some(value.parse().map_err(|_| bad())?),
            "bootstrap" => self.hyper.bootstrap = Some(value.parse().map_err(|_| bad())?),
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in parse_key_values(text)? {
            cfg.set(&k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.cluster_params().validate()?;
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!(
                "threshold must lie in [0, 1], got {}",
                self.threshold
            )));
        }
        if self.mode == FeatureMode::Graph && self.features.is_empty() {
            return Err(Error::Config("feature set is empty".into()));
        }
        Ok(())
    }

    pub fn cluster_params(&self) -> ClusterParams {
        ClusterParams {
            eps: self.eps,
            min_pts: self.min_pts,
        }
    }

    /// Feature columns used under the configured mode.
    pub fn feature_set(&self) -> FeatureSet {
        match self.mode {
            FeatureMode::Graph => self.features.clone(),
            FeatureMode::Cluster | FeatureMode::Fingerprint => FeatureSet::local(),
        }
    }

    pub fn hyperparameters(&self) -> Hyperparameters {
        let mut p = Hyperparameters::default_for(self.learner, self.feature_set().len());
        let o = &self.hyper;
        if let Some(v) = o.n_trees {
            p.n_trees = v;
        }
        if let Some(v) = o.max_depth {
            p.max_depth = v;
        }
        if let Some(v) = o.learning_rate {
            p.learning_rate = v;
        }
        if let Some(v) = o.mtry {
            p.mtry = v;
        }
        if let Some(v) = o.min_leaf {
            p.min_leaf = v;
        }
        if let Some(v) = o.bootstrap {
            p.bootstrap = v;
        }
        p
    }
}

/// Counts logged by every stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub fingerprints: usize,
    pub aps: usize,
    pub clusters: usize,
    pub nodes: usize,
    pub edges: usize,
}

/// Clusters, graph and node features of one matrix.
#[derive(Debug, Clone)]
pub struct Structure {
    pub assignment: ClusterAssignment,
    pub graph: TransitionGraph,
    pub features: FeatureMatrix,
}

impl Structure {
    pub fn counts(&self, m: &FingerprintMatrix) -> StageCounts {
        StageCounts {
            fingerprints: m.len(),
            aps: m.ap_count(),
            clusters: self.assignment.num_clusters(),
            nodes: self.graph.node_count(),
            edges: self.graph.edge_count(),
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.graph.node_count())
            .map(|x| self.graph.weight(x) as f64)
            .collect()
    }
}

/// Clusters `m` per the configured mode.
pub fn assign(m: &FingerprintMatrix, cfg: &PipelineConfig) -> Result<ClusterAssignment> {
    cfg.validate()?;
    match cfg.mode {
        FeatureMode::Fingerprint => Ok(ClusterAssignment::singletons(m.len())),
        FeatureMode::Graph | FeatureMode::Cluster => {
            let index = FingerprintIndex::build(m);
            cluster(m, cfg.cluster_params(), &index)
        }
    }
}

/// Graph and features over an existing assignment.
pub fn structure_from(
    m: &FingerprintMatrix,
    assignment: ClusterAssignment,
    cfg: &PipelineConfig,
) -> Result<Structure> {
    let graph = build_graph(&assignment, m, cfg.max_gap_ms)?;
    let features = extract_features(&graph, m, &cfg.feature_set());
    Ok(Structure {
        assignment,
        graph,
        features,
    })
}

pub fn build_structure(m: &FingerprintMatrix, cfg: &PipelineConfig) -> Result<Structure> {
    let assignment = assign(m, cfg)?;
    structure_from(m, assignment, cfg)
}

/// Labels nodes from `labels` and trains on a prebuilt structure.
pub fn train_structure(
    structure: &Structure,
    labels: &[Option<Label>],
    cfg: &PipelineConfig,
) -> Result<(Model, NodeLabels)> {
    let node_labels = label_nodes(&structure.assignment, labels, cfg.tie_rule);
    let model = train(
        &structure.features,
        &node_labels.labeled,
        cfg.learner,
        cfg.hyperparameters(),
        cfg.seed,
    )?;
    Ok((model, node_labels))
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: Model,
    pub structure: Structure,
    pub node_labels: NodeLabels,
}

/// Full training run over one labeled matrix.
pub fn train_matrix(m: &FingerprintMatrix, cfg: &PipelineConfig) -> Result<Trained> {
    let structure = build_structure(m, cfg)?;
    let (model, node_labels) = train_structure(&structure, m.labels(), cfg)?;
    Ok(Trained {
        model,
        structure,
        node_labels,
    })
}

/// Builds the structure of `m` and scores it with `model`.
pub fn score_matrix(
    m: &FingerprintMatrix,
    model: &Model,
    cfg: &PipelineConfig,
) -> Result<(Structure, Prediction)> {
    let structure = build_structure(m, cfg)?;
    let prediction = predict(
        model,
        &structure.features,
        &structure.assignment,
        cfg.threshold,
    )?;
    Ok((structure, prediction))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub train: StageCounts,
    pub test: StageCounts,
    pub report: EvalReport,
}

/// Trains on `train_m` and evaluates on `test_m`.
pub fn run_pipeline(
    train_m: &FingerprintMatrix,
    test_m: &FingerprintMatrix,
    cfg: &PipelineConfig,
) -> Result<(Model, Prediction, PipelineReport)> {
    let trained = train_matrix(train_m, cfg)?;
    let (structure, prediction) = score_matrix(test_m, &trained.model, cfg)?;
    let report = evaluate(&prediction, test_m.labels())?;
    let summary = PipelineReport {
        train: trained.structure.counts(train_m),
        test: structure.counts(test_m),
        report,
    };
    Ok((trained.model, prediction, summary))
}
