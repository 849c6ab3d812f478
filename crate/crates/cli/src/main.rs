//! `wifio`: indoor/outdoor detection from Wi-Fi scan logs.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use wifio_core::cluster::{read_assignment, write_assignment};
use wifio_core::eval::{evaluate, location_cross_validation, switch_latency, warmup_eval};
use wifio_core::features::{
    extract_features, read_feature_csv, select_neighborhood_sizes, write_feature_csv, FeatureSet,
};
use wifio_core::learner::{label_nodes, predict, train, LabeledNode, Model, Prediction};
use wifio_core::model::{
    ingest, read_scan_log, split_by_device, write_scan_log, FingerprintMatrix, Label, ScanRecord,
};
use wifio_core::pipeline::{
    assign, structure_from, train_matrix, FeatureMode, PipelineConfig, Structure,
};
use wifio_core::synth::{generate, WorldSpec};
use wifio_core::LearnerKind;

#[derive(Parser)]
#[command(
    name = "wifio",
    version,
    about = "Indoor/outdoor detection from Wi-Fi scan logs"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Pipeline config file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Clustering radius, in [0, 2).
    #[arg(long, global = true)]
    eps: Option<f64>,
    #[arg(long, global = true)]
    min_pts: Option<usize>,
    #[arg(long, global = true, value_parser = ["rf", "gbm"])]
    learner: Option<String>,
    /// Feature mode: graph, cluster or fingerprint.
    #[arg(long, global = true, value_parser = ["graph", "cluster", "fingerprint"])]
    mode: Option<String>,
    /// Indoor when the score is at least this.
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// Device to use from a multi-device log.
    #[arg(long, global = true)]
    device: Option<String>,
    /// Output file (stdout when omitted).
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    /// Suppress stage logging.
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a scan log and summarise each device; with --out, write the
    /// log back with canonical BSSIDs.
    Ingest { scans: PathBuf },
    /// Cluster fingerprints; writes `{seq, cluster}` lines.
    Cluster { scans: PathBuf },
    /// Transition graph as an edge list.
    Graph {
        scans: PathBuf,
        #[arg(long)]
        assignment: Option<PathBuf>,
        /// Also write the node table here.
        #[arg(long)]
        nodes: Option<PathBuf>,
    },
    /// Node features as CSV, with cluster size and majority label.
    Features {
        scans: PathBuf,
        #[arg(long)]
        assignment: Option<PathBuf>,
    },
    /// Regress labels on every hop bound up to --max-d and report which are
    /// significant.
    SelectDims {
        scans: PathBuf,
        #[arg(long, default_value_t = 30)]
        max_d: usize,
    },
    /// Train a model from a feature CSV.
    Train { features: PathBuf },
    /// Score every fingerprint; writes `{seq, timestamp_ms, score, label}` lines.
    Predict {
        scans: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        assignment: Option<PathBuf>,
    },
    /// AUC, accuracy and confusion of predictions against the log's labels.
    Eval {
        predictions: PathBuf,
        #[arg(long)]
        scans: PathBuf,
    },
    /// Leave-one-location-out cross-validation.
    Xval { scans: PathBuf },
    /// Detection latency of every labelled indoor/outdoor switch.
    Latency {
        predictions: PathBuf,
        #[arg(long)]
        scans: PathBuf,
    },
    /// Per-minute accuracy of a model while a scenario's structure grows.
    Warmup {
        scans: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 10)]
        minutes: usize,
    },
    /// Generate a synthetic labelled scan log.
    Synth {
        /// World description (`key = value` lines); defaults otherwise.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Override the world's duration.
        #[arg(long)]
        hours: Option<f64>,
    },
    /// Train on one log and score another in one go.
    Pipeline {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Also save the trained model.
        #[arg(long)]
        model_out: Option<PathBuf>,
        /// Also write per-fingerprint predictions.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
}

#[derive(Serialize, Deserialize)]
struct PredictionLine {
    seq: u64,
    timestamp_ms: i64,
    score: f64,
    label: Label,
}

impl Global {
    fn pipeline_config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                PipelineConfig::from_text(&text)?
            }
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.eps {
            cfg.eps = v;
        }
        if let Some(v) = self.min_pts {
            cfg.min_pts = v;
        }
        if let Some(v) = &self.learner {
            cfg.learner = v.parse::<LearnerKind>()?;
        }
        if let Some(v) = &self.mode {
            cfg.mode = v.parse::<FeatureMode>()?;
        }
        if let Some(v) = self.threshold {
            cfg.threshold = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn output(&self) -> Result<Box<dyn Write>> {
        open_output(self.out.as_deref())
    }

    fn log(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn load_records(&self, path: &Path) -> Result<Vec<ScanRecord>> {
        let records = read_scan_log(open_input(path)?)
            .with_context(|| format!("parsing {}", path.display()))?;
        let mut devices = split_by_device(records);
        match &self.device {
            Some(id) => devices
                .into_iter()
                .find(|d| d.first().is_some_and(|r| &r.device_id == id))
                .with_context(|| format!("device {id:?} not in {}", path.display())),
            None if devices.len() <= 1 => Ok(devices.pop().unwrap_or_default()),
            None => bail!(
                "{} holds {} devices; choose one with --device",
                path.display(),
                devices.len()
            ),
        }
    }

    fn load_matrix(&self, path: &Path) -> Result<FingerprintMatrix> {
        let m = ingest(&self.load_records(path)?)
            .with_context(|| format!("ingesting {}", path.display()))?;
        self.log(format!(
            "ingest: {} fingerprints, {} APs",
            m.len(),
            m.ap_count()
        ));
        Ok(m)
    }

    fn structure(
        &self,
        m: &FingerprintMatrix,
        assignment: Option<&Path>,
        cfg: &PipelineConfig,
    ) -> Result<Structure> {
        let assignment = match assignment {
            Some(path) => {
                let a = read_assignment(open_input(path)?)?;
                if a.len() != m.len() {
                    bail!(
                        "assignment covers {} fingerprints, log has {}",
                        a.len(),
                        m.len()
                    );
                }
                a
            }
            None => assign(m, cfg)?,
        };
        let s = structure_from(m, assignment, cfg)?;
        let c = s.counts(m);
        self.log(format!(
            "structure: {} clusters (mean size {:.1}), {} nodes, {} edges",
            c.clusters,
            s.assignment.mean_cluster_size(),
            c.nodes,
            c.edges
        ));
        Ok(s)
    }
}

fn open_input(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(mut w: impl Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_predictions(mut w: impl Write, m: &FingerprintMatrix, p: &Prediction) -> Result<()> {
    for (i, f) in m.fingerprints().iter().enumerate() {
        let line = PredictionLine {
            seq: f.seq as u64,
            timestamp_ms: f.timestamp_ms,
            score: p.fingerprint_scores[i],
            label: p.fingerprint_label(i),
        };
        serde_json::to_writer(&mut w, &line)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn read_predictions(path: &Path, m: &FingerprintMatrix, threshold: f64) -> Result<Prediction> {
    let mut scores = Vec::with_capacity(m.len());
    for (lineno, line) in open_input(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p: PredictionLine = serde_json::from_str(&line)
            .with_context(|| format!("{}:{}", path.display(), lineno + 1))?;
        if p.seq as usize != scores.len() {
            bail!(
                "{}:{}: expected seq {}, found {}",
                path.display(),
                lineno + 1,
                scores.len(),
                p.seq
            );
        }
        scores.push(p.score);
    }
    if scores.len() != m.len() {
        bail!("{} predictions for {} fingerprints", scores.len(), m.len());
    }
    Ok(Prediction {
        node_scores: Vec::new(),
        fingerprint_scores: scores,
        threshold,
    })
}

fn load_model(path: &Path) -> Result<Model> {
    Model::read_from(open_input(path)?).with_context(|| format!("reading model {}", path.display()))
}

fn save_model(model: &Model, path: Option<&Path>) -> Result<()> {
    let mut w = open_output(path)?;
    model.write_to(&mut w)?;
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Ingest { scans } => {
            let records = read_scan_log(open_input(scans)?)?;
            let mut summary = Vec::new();
            let mut canonical = Vec::new();
            for device in split_by_device(records) {
                let m = ingest(&device)?;
                summary.push(serde_json::json!({
                    "device_id": m.device_id,
                    "fingerprints": m.len(),
                    "aps": m.ap_count(),
                    "empty": m.fingerprints().iter().filter(|f| f.is_empty()).count(),
                    "labeled": m.labels().iter().flatten().count(),
                }));
                canonical.extend(m.to_records());
            }
            match &g.out {
                Some(path) => {
                    let mut w = open_output(Some(path))?;
                    write_scan_log(&mut w, &canonical)?;
                    w.flush()?;
                    write_json(io::stderr(), &summary)
                }
                None => write_json(io::stdout(), &summary),
            }
        }
        Command::Cluster { scans } => {
            let cfg = g.pipeline_config()?;
            let m = g.load_matrix(scans)?;
            let a = assign(&m, &cfg)?;
            g.log(format!(
                "cluster: {} clusters, mean size {:.1}",
                a.num_clusters(),
                a.mean_cluster_size()
            ));
            let mut w = g.output()?;
            write_assignment(&mut w, &a)?;
            w.flush()?;
            Ok(())
        }
        Command::Graph {
            scans,
            assignment,
            nodes,
        } => {
            let cfg = g.pipeline_config()?;
            let m = g.load_matrix(scans)?;
            let s = g.structure(&m, assignment.as_deref(), &cfg)?;
            let mut w = g.output()?;
            s.graph.write_edge_list(&mut w)?;
            w.flush()?;
            if let Some(path) = nodes {
                let mut w = open_output(Some(path))?;
                s.graph.write_node_table(&mut w, &m)?;
                w.flush()?;
            }
            Ok(())
        }
        Command::Features { scans, assignment } => {
            let cfg = g.pipeline_config()?;
            let m = g.load_matrix(scans)?;
            let s = g.structure(&m, assignment.as_deref(), &cfg)?;
            let labels =
                label_nodes(&s.assignment, m.labels(), cfg.tie_rule).per_node(s.graph.node_count());
            let mut w = g.output()?;
            write_feature_csv(&mut w, &s.features, &s.weights(), &labels)?;
            w.flush()?;
            Ok(())
        }
        Command::SelectDims { scans, max_d } => {
            let cfg = g.pipeline_config()?;
            let m = g.load_matrix(scans)?;
            let s = g.structure(&m, None, &cfg)?;
            let features = extract_features(&s.graph, &m, &FeatureSet::exhaustive(*max_d));
            let labels = label_nodes(&s.assignment, m.labels(), cfg.tie_rule);
            let rows = labels
                .labeled
                .iter()
                .map(|l| features.rows[l.node].clone())
                .collect();
            let labeled = wifio_core::FeatureMatrix {
                names: features.names.clone(),
                rows,
            };
            let y: Vec<Label> = labels.labeled.iter().map(|l| l.label).collect();
            let report = select_neighborhood_sizes(&labeled, &y)?;
            write_json(g.output()?, &report)
        }
        Command::Train { features } => {
            let cfg = g.pipeline_config()?;
            let table = read_feature_csv(open_input(features)?)?;
            let nodes: Vec<LabeledNode> = table
                .labels
                .iter()
                .zip(&table.weights)
                .enumerate()
                .filter_map(|(node, (label, &w))| {
                    label.map(|label| LabeledNode {
                        node,
                        label,
                        weight: w as usize,
                    })
                })
                .collect();
            g.log(format!(
                "train: {} labelled nodes of {}",
                nodes.len(),
                table.labels.len()
            ));
            // hyperparameter defaults depend on the column count in the file
            let mut sized = cfg.clone();
            sized.mode = FeatureMode::Graph;
            sized.features = FeatureSet::from_names(&table.features.names)?;
            let params = sized.hyperparameters();
            let model = train(&table.features, &nodes, cfg.learner, params, cfg.seed)?;
            save_model(&model, g.out.as_deref())
        }
        Command::Predict {
            scans,
            model,
            assignment,
        } => {
            let cfg = g.pipeline_config()?;
            let model = load_model(model)?;
            let m = g.load_matrix(scans)?;
            let s = g.structure(&m, assignment.as_deref(), &cfg)?;
            let p = predict(&model, &s.features, &s.assignment, cfg.threshold)?;
            write_predictions(g.output()?, &m, &p)
        }
        Command::Eval { predictions, scans } => {
            let cfg = g.pipeline_config()?;
            let m = g.load_matrix(scans)?;
            let p = read_predictions(predictions, &m, cfg.threshold)?;
            write_json(g.output()?, &evaluate(&p, m.labels())?)
        }
        Command::Xval { scans } => {
            let cfg = g.pipeline_config()?;
            let m = g.load_matrix(scans)?;
            let cv = location_cross_validation(&m, &cfg)?;
            let folds: Vec<_> = cv
                .folds
                .iter()
                .map(|f| serde_json::json!({ "location": f.location, "report": f.report }))
                .collect();
            write_json(
                g.output()?,
                &serde_json::json!({ "folds": folds, "mean_auc": cv.mean_auc }),
            )
        }
        Command::Latency { predictions, scans } => {
            let cfg = g.pipeline_config()?;
            let m = g.load_matrix(scans)?;
            let p = read_predictions(predictions, &m, cfg.threshold)?;
            write_json(
                g.output()?,
                &switch_latency(&p, m.labels(), &m.timestamps())?,
            )
        }
        Command::Warmup {
            scans,
            model,
            minutes,
        } => {
            let cfg = g.pipeline_config()?;
            let model = load_model(model)?;
            let m = g.load_matrix(scans)?;
            let report = warmup_eval(&model, &m, *minutes, &cfg)?;
            let mut w = g.output()?;
            report.write_csv(&mut w)?;
            w.flush()?;
            Ok(())
        }
        Command::Synth { spec, hours } => {
            let mut world = match spec {
                Some(path) => WorldSpec::from_text(&std::fs::read_to_string(path)?)?,
                None => WorldSpec::default(),
            };
            if let Some(seed) = g.seed {
                world.seed = seed;
            }
            if let Some(h) = hours {
                world.duration_s = h * 3600.0;
            }
            let records = generate(&world)?;
            g.log(format!(
                "synth: {} scans over {:.1} h",
                records.len(),
                world.duration_s / 3600.0
            ));
            let mut w = g.output()?;
            write_scan_log(&mut w, &records)?;
            w.flush()?;
            Ok(())
        }
        Command::Pipeline {
            train,
            test,
            model_out,
            predictions,
        } => {
            let cfg = g.pipeline_config()?;
            let train_m = g.load_matrix(train)?;
            let trained = train_matrix(&train_m, &cfg)?;
            let c = trained.structure.counts(&train_m);
            g.log(format!(
                "train: {} clusters, {} edges, {} labelled nodes",
                c.clusters,
                c.edges,
                trained.node_labels.labeled.len()
            ));
            let test_m = g.load_matrix(test)?;
            let s = g.structure(&test_m, None, &cfg)?;
            let p = predict(&trained.model, &s.features, &s.assignment, cfg.threshold)?;
            if let Some(path) = model_out {
                save_model(&trained.model, Some(path))?;
            }
            if let Some(path) = predictions {
                write_predictions(open_output(Some(path))?, &test_m, &p)?;
            }
            let report = serde_json::json!({
                "train": c,
                "test": s.counts(&test_m),
                "report": evaluate(&p, test_m.labels())?,
            });
            write_json(g.output()?, &report)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_the_config_file() {
        let cli = Cli::parse_from([
            "wifio",
            "--eps",
            "0.3",
            "--learner",
            "rf",
            "--seed",
            "4",
            "xval",
            "a.scans",
        ]);
        let cfg = cli.global.pipeline_config().unwrap();
        assert_eq!((cfg.eps, cfg.learner, cfg.seed), (0.3, LearnerKind::Rf, 4));
    }

    #[test]
    fn eps_of_two_is_rejected() {
        let cli = Cli::parse_from(["wifio", "--eps", "2", "cluster", "a.scans"]);
        assert!(cli.global.pipeline_config().is_err());
    }
}
