//! Declarative end-to-end pipeline: matrix -> similarity -> cutoff -> graph
//! -> communities -> metrics -> layout -> report, with a reproducibility
//! manifest. All randomness flows from one top-level seed, fanned out by
//! stage name.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::affiliation::{
    load_affiliation, load_metadata, matrix_stats, AffiliationMatrix, EntityMetadata,
};
use crate::community::{louvain, LouvainConfig, LouvainResult, NodeOrder, Partition};
use crate::error::{Error, Result};
use crate::graph::{build_graph, export_graph, EdgeWeighting, ExportFormat, Graph};
use crate::layout::{fa2_run, write_positions_csv, Fa2Params};
use crate::metrics::{coopetition_report, CoopetitionReport, MetricsConfig};
use crate::similarity::{
    empirical_cdf, pairwise_distances, quantile_cutoff, reciprocal_similarity, sparsify,
    DistanceMode, SimilarityMatrix, ZeroDistancePolicy,
};
use crate::synthgen::{generate, SynthConfig};

/// Stage-name keyed seed derivation (FNV-1a over master seed and name).
pub fn derive_seed(master: u64, stage: &str) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for byte in master.to_le_bytes().iter().copied().chain(stage.bytes()) {
        h ^= byte as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSpec {
    Files {
        affiliation: PathBuf,
        metadata: Option<PathBuf>,
    },
    SynthPreset {
        preset: String,
    },
    SynthConfig {
        synth: SynthConfig,
    },
}

fn default_quantile() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub input: InputSpec,
    #[serde(default = "DistanceMode::default_plain")]
    pub distance_mode: DistanceMode,
    #[serde(default = "ZeroDistancePolicy::default_cap")]
    pub zero_policy: ZeroDistancePolicy,
    #[serde(default = "default_quantile")]
    pub quantile: f64,
    #[serde(default = "EdgeWeighting::default_similarity")]
    pub weighting: EdgeWeighting,
    #[serde(default)]
    pub louvain: LouvainConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default = "PipelineConfig::default_grade_min")]
    pub grade_min: f64,
    #[serde(default = "PipelineConfig::default_grade_max")]
    pub grade_max: f64,
    #[serde(default)]
    pub layout: Fa2Params,
    pub out_dir: PathBuf,
    #[serde(default = "PipelineConfig::default_formats")]
    pub formats: Vec<ExportFormat>,
    #[serde(default)]
    pub seed: u64,
    /// also dump the thresholded similarity matrix
    #[serde(default)]
    pub dump_similarity: bool,
}

impl DistanceMode {
    fn default_plain() -> Self {
        DistanceMode::Plain
    }
}

impl ZeroDistancePolicy {
    fn default_cap() -> Self {
        ZeroDistancePolicy::CapToOne
    }
}

impl EdgeWeighting {
    fn default_similarity() -> Self {
        EdgeWeighting::Similarity
    }
}

impl PipelineConfig {
    fn default_grade_min() -> f64 {
        0.0
    }

    fn default_grade_max() -> f64 {
        5.0
    }

    fn default_formats() -> Vec<ExportFormat> {
        vec![ExportFormat::Gexf]
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.quantile) {
            return Err(Error::Config(format!(
                "quantile {} outside [0, 1)",
                self.quantile
            )));
        }
        if self.grade_min >= self.grade_max {
            return Err(Error::Config("grade_min must be < grade_max".into()));
        }
        self.layout.validate()?;
        Ok(())
    }
}

/// Join free-standing metadata records onto entity order. Unknown entity
/// ids are a data error; entities without a record get empty metadata.
pub fn join_metadata(
    entity_ids: &[String],
    records: &[EntityMetadata],
) -> Result<Vec<EntityMetadata>> {
    let index: BTreeMap<&str, usize> = entity_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut joined: Vec<EntityMetadata> = entity_ids
        .iter()
        .map(|id| EntityMetadata {
            entity_id: id.clone(),
            grade: None,
            label: None,
        })
        .collect();
    for rec in records {
        match index.get(rec.entity_id.as_str()) {
            Some(&i) => joined[i] = rec.clone(),
            None => {
                return Err(Error::Parse {
                    line: 0,
                    message: format!("metadata entity {:?} not in entity set", rec.entity_id),
                })
            }
        }
    }
    Ok(joined)
}

/// Partition dump: `entity_id,community_id,level0_id,...`; unassigned nodes
/// carry community id -1 in every column.
pub fn write_partition_csv<W: Write>(
    entity_ids: &[String],
    detection: &LouvainResult,
    mut out: W,
) -> Result<()> {
    let n_levels = detection.levels.len();
    let mut header = String::from("entity_id,community_id");
    for l in 0..n_levels {
        header.push_str(&format!(",level{l}_id"));
    }
    writeln!(out, "{header}")?;
    // Unassigned singletons are dumped as -1, so renumber the remaining
    // communities densely to keep the id column stable under round-trips.
    let mut dense = vec![usize::MAX; detection.partition.n_communities()];
    let mut next = 0usize;
    for node in 0..entity_ids.len() {
        if detection.is_unassigned(node) {
            continue;
        }
        let c = detection.partition.community_of(node);
        if dense[c] == usize::MAX {
            dense[c] = next;
            next += 1;
        }
    }
    for (node, id) in entity_ids.iter().enumerate() {
        let mut row = String::new();
        row.push_str(id);
        if detection.is_unassigned(node) {
            row.push_str(",-1");
            for _ in 0..n_levels {
                row.push_str(",-1");
            }
        } else {
            row.push_str(&format!(",{}", dense[detection.partition.community_of(node)]));
            for level in &detection.levels {
                row.push_str(&format!(",{}", level.community_of(node)));
            }
        }
        writeln!(out, "{row}")?;
    }
    Ok(())
}

pub fn read_partition_csv<R: std::io::Read>(
    source: R,
) -> Result<(Vec<String>, Vec<i64>)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let mut ids = Vec::new();
    let mut communities = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: idx + 2,
            message: e.to_string(),
        })?;
        ids.push(record[0].to_string());
        communities.push(record[1].parse::<i64>().map_err(|_| Error::Parse {
            line: idx + 2,
            message: format!("bad community id {:?}", &record[1]),
        })?);
    }
    Ok((ids, communities))
}

/// Rebuild a detection result from a dumped assignment; -1 means unassigned.
pub fn detection_from_assignment(assignment: &[i64]) -> LouvainResult {
    let mut next = assignment
        .iter()
        .filter(|&&c| c >= 0)
        .map(|&c| c as usize + 1)
        .max()
        .unwrap_or(0);
    let mut labels = Vec::with_capacity(assignment.len());
    let mut unassigned = Vec::new();
    for (node, &c) in assignment.iter().enumerate() {
        if c < 0 {
            labels.push(next);
            next += 1;
            unassigned.push(node);
        } else {
            labels.push(c as usize);
        }
    }
    LouvainResult {
        partition: Partition::from_assignment(&labels),
        levels: Vec::new(),
        q_trace: Vec::new(),
        unassigned,
    }
}

/// Full-precision similarity dump for stage handoff (Rust's shortest
/// round-trip float formatting).
pub fn write_similarity_csv_exact<W: Write>(
    s: &SimilarityMatrix,
    entity_ids: &[String],
    mut out: W,
) -> Result<()> {
    writeln!(out, "entity_a,entity_b,similarity")?;
    for &(i, j, v) in s.pairs() {
        writeln!(out, "{},{},{}", entity_ids[i], entity_ids[j], v)?;
    }
    Ok(())
}

pub fn read_similarity_csv<R: std::io::Read>(
    source: R,
) -> Result<(Vec<String>, SimilarityMatrix)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let mut ids: Vec<String> = Vec::new();
    let mut raw = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: idx + 2,
            message: e.to_string(),
        })?;
        let mut node = |name: &str| -> usize {
            *index.entry(name.to_string()).or_insert_with(|| {
                ids.push(name.to_string());
                ids.len() - 1
            })
        };
        let a = node(&record[0]);
        let b = node(&record[1]);
        let v: f64 = record[2].parse().map_err(|_| Error::Parse {
            line: idx + 2,
            message: format!("bad similarity {:?}", &record[2]),
        })?;
        raw.push((a.min(b), a.max(b), v));
    }
    let n = ids.len();
    Ok((ids, SimilarityMatrix::from_pairs(n, raw)))
}

pub fn write_graph_jsonl<W: Write>(g: &Graph, mut out: W) -> Result<()> {
    let bytes = export_graph(g, ExportFormat::Jsonl, None, None)?;
    out.write_all(&bytes)?;
    Ok(())
}

pub fn read_graph_jsonl<R: std::io::Read>(source: R) -> Result<Graph> {
    let reader = std::io::BufReader::new(source);
    let mut ids: Vec<String> = Vec::new();
    let mut edges = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        if let Some(node) = v.get("node") {
            let n = node.as_u64().unwrap_or(0) as usize;
            let id = v["id"].as_str().unwrap_or_default().to_string();
            if n != ids.len() {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("node records out of order at index {n}"),
                });
            }
            ids.push(id);
        } else if let Some(e) = v.get("edge") {
            let i = e[0].as_u64().unwrap_or(0) as usize;
            let j = e[1].as_u64().unwrap_or(0) as usize;
            let w = v["weight"].as_f64().unwrap_or(1.0);
            edges.push((i, j, w));
        }
    }
    Ok(Graph::new(ids, edges))
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub library_version: String,
    pub config: PipelineConfig,
    pub derived_seeds: BTreeMap<String, u64>,
    pub cutoff: f64,
    pub stage_timings_ms: BTreeMap<String, u128>,
    pub layout_stop: String,
    pub modularity: Option<f64>,
}

#[derive(Debug)]
pub struct RunArtifacts {
    pub report: CoopetitionReport,
    pub written: Vec<PathBuf>,
    pub cutoff: f64,
}

struct OutputTracker {
    written: Vec<PathBuf>,
}

impl OutputTracker {
    fn write(&mut self, path: PathBuf, bytes: &[u8]) -> Result<()> {
        fs::write(&path, bytes)?;
        self.written.push(path);
        Ok(())
    }

    fn discard_all(&self) {
        for path in &self.written {
            let _ = fs::remove_file(path);
        }
    }
}

/// Run the whole pipeline, writing partition CSV, report JSON + text table,
/// positioned graph exports and a run manifest into `out_dir`. Partial
/// outputs are removed on error.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunArtifacts> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir)?;
    let mut tracker = OutputTracker { written: Vec::new() };
    match run_pipeline_inner(cfg, &mut tracker) {
        Ok(art) => Ok(art),
        Err(e) => {
            tracker.discard_all();
            Err(e)
        }
    }
}

fn run_pipeline_inner(cfg: &PipelineConfig, tracker: &mut OutputTracker) -> Result<RunArtifacts> {
    let mut timings: BTreeMap<String, u128> = BTreeMap::new();
    let mut derived_seeds = BTreeMap::new();
    let time = |name: &str, start: Instant, timings: &mut BTreeMap<String, u128>| {
        timings.insert(name.to_string(), start.elapsed().as_millis());
    };

    // ingest
    let t = Instant::now();
    let (matrix, meta) = match &cfg.input {
        InputSpec::Files {
            affiliation,
            metadata,
        } => {
            let outcome = load_affiliation(fs::File::open(affiliation)?)?;
            let meta = match metadata {
                Some(path) => {
                    let records = load_metadata(
                        fs::File::open(path)?,
                        cfg.grade_min,
                        cfg.grade_max,
                        None,
                    )?;
                    join_metadata(outcome.matrix.entity_ids(), &records)?
                }
                None => join_metadata(outcome.matrix.entity_ids(), &[])?,
            };
            (outcome.matrix, meta)
        }
        InputSpec::SynthPreset { preset } => {
            let seed = derive_seed(cfg.seed, "synth");
            derived_seeds.insert("synth".to_string(), seed);
            let synth_cfg = match preset.as_str() {
                "tseba-like" => SynthConfig::tseba_like(seed),
                other => {
                    return Err(Error::Config(format!("unknown synth preset {other:?}")));
                }
            };
            let data = generate(&synth_cfg)?;
            write_synth_inputs(cfg, tracker, &data)?;
            (data.matrix, data.metadata)
        }
        InputSpec::SynthConfig { synth } => {
            let seed = derive_seed(cfg.seed, "synth");
            derived_seeds.insert("synth".to_string(), seed);
            let mut synth_cfg = synth.clone();
            synth_cfg.seed = seed;
            let data = generate(&synth_cfg)?;
            write_synth_inputs(cfg, tracker, &data)?;
            (data.matrix, data.metadata)
        }
    };
    time("ingest", t, &mut timings);

    // distances + similarity
    let t = Instant::now();
    let distances = pairwise_distances(&matrix, cfg.distance_mode, None)?;
    time("distances", t, &mut timings);

    let t = Instant::now();
    let dense = reciprocal_similarity(&distances, cfg.zero_policy);
    let cdf = empirical_cdf(&dense)?;
    let cutoff = quantile_cutoff(&cdf, cfg.quantile);
    let thresholded = sparsify(&dense, cutoff);
    time("similarity", t, &mut timings);

    if cfg.dump_similarity {
        let mut buf = Vec::new();
        thresholded.write_csv(matrix.entity_ids(), &mut buf)?;
        tracker.write(cfg.out_dir.join("similarity_thresholded.csv"), &buf)?;
    }

    // graph
    let t = Instant::now();
    let graph = build_graph(&thresholded, matrix.entity_ids(), cfg.weighting);
    time("graph", t, &mut timings);

    // detection
    let t = Instant::now();
    let mut louvain_cfg = cfg.louvain.clone();
    if matches!(louvain_cfg.node_order, NodeOrder::Shuffle { .. }) {
        let seed = derive_seed(cfg.seed, "louvain");
        derived_seeds.insert("louvain".to_string(), seed);
        louvain_cfg.node_order = NodeOrder::Shuffle { seed };
    }
    let detection = louvain(&graph, &louvain_cfg)?;
    let q = crate::community::modularity(&graph, &detection.partition).ok();
    time("detect", t, &mut timings);

    // metrics
    let t = Instant::now();
    let report = coopetition_report(&graph, &detection, &meta, &cfg.metrics)?;
    time("metrics", t, &mut timings);

    // layout
    let t = Instant::now();
    let mut layout_params = cfg.layout.clone();
    layout_params.seed = derive_seed(cfg.seed, "layout");
    derived_seeds.insert("layout".to_string(), layout_params.seed);
    let (layout_state, stop) = fa2_run(&graph, &layout_params)?;
    time("layout", t, &mut timings);

    // outputs
    let t = Instant::now();
    let mut buf = Vec::new();
    write_partition_csv(matrix.entity_ids(), &detection, &mut buf)?;
    tracker.write(cfg.out_dir.join("partition.csv"), &buf)?;

    let json = serde_json::to_vec_pretty(&report)?;
    tracker.write(cfg.out_dir.join("report.json"), &json)?;
    tracker.write(
        cfg.out_dir.join("report.txt"),
        report.to_text_table().as_bytes(),
    )?;

    let mut buf = Vec::new();
    write_positions_csv(matrix.entity_ids(), &layout_state.positions, &mut buf)?;
    tracker.write(cfg.out_dir.join("positions.csv"), &buf)?;

    let communities: Vec<String> = (0..graph.n_nodes())
        .map(|node| {
            if detection.is_unassigned(node) {
                "-1".to_string()
            } else {
                detection.partition.community_of(node).to_string()
            }
        })
        .collect();
    for format in &cfg.formats {
        let bytes = export_graph(
            &graph,
            *format,
            Some(&layout_state.positions),
            Some(&communities),
        )?;
        tracker.write(
            cfg.out_dir.join(format!("graph.{}", format.extension())),
            &bytes,
        )?;
    }
    time("outputs", t, &mut timings);

    let manifest = RunManifest {
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        derived_seeds,
        cutoff,
        stage_timings_ms: timings,
        layout_stop: format!("{stop:?}"),
        modularity: q,
    };
    let manifest_bytes = serde_json::to_vec_pretty(&manifest)?;
    tracker.write(cfg.out_dir.join("manifest.json"), &manifest_bytes)?;

    Ok(RunArtifacts {
        report,
        written: tracker.written.clone(),
        cutoff,
    })
}

fn write_synth_inputs(
    cfg: &PipelineConfig,
    tracker: &mut OutputTracker,
    data: &crate::synthgen::SynthData,
) -> Result<()> {
    let mut buf = Vec::new();
    data.matrix.write_csv(&mut buf)?;
    tracker.write(cfg.out_dir.join("affiliation.csv"), &buf)?;
    let mut buf = Vec::new();
    crate::affiliation::write_metadata_csv(&data.metadata, &mut buf)?;
    tracker.write(cfg.out_dir.join("metadata.csv"), &buf)?;
    Ok(())
}

/// Convenience wrapper used by tests: stats as JSON.
pub fn stats_json(matrix: &AffiliationMatrix) -> Result<Vec<u8>> {
    let stats = matrix_stats(matrix);
    Ok(serde_json::to_vec_pretty(&stats)?)
}
