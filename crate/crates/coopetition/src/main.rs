use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use coopetition::affiliation::{load_affiliation, load_metadata, matrix_stats, write_metadata_csv};
use coopetition::community::{louvain, LouvainConfig, NodeOrder};
use coopetition::error::{Error, Result};
use coopetition::graph::{build_graph, export_graph, EdgeWeighting, ExportFormat};
use coopetition::layout::{fa2_run, write_positions_csv, Fa2Params};
use coopetition::metrics::{coopetition_report, EdgeCounting, MetricsConfig};
use coopetition::pipeline::{
    detection_from_assignment, join_metadata, read_graph_jsonl, read_partition_csv,
    read_similarity_csv, run_pipeline, write_partition_csv,
    write_similarity_csv_exact, PipelineConfig,
};
use coopetition::similarity::{
    empirical_cdf, pairwise_distances, quantile_cutoff, reciprocal_similarity, sparsify,
    DistanceMode, ZeroDistancePolicy,
};
use coopetition::synthgen::{generate, SynthConfig};

#[derive(Parser)]
#[command(name = "coopetition", version, about = "Co-opetition analysis of binary affiliation data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate an affiliation CSV, reporting ingest diagnostics
    Ingest {
        #[arg(long)]
        affiliation: PathBuf,
        /// write the normalized matrix back out
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Matrix summary statistics as JSON
    Stats {
        #[arg(long)]
        affiliation: PathBuf,
    },
    /// Dense pairwise similarity CSV
    Similarity {
        #[arg(long)]
        affiliation: PathBuf,
        #[arg(long, default_value = "plain")]
        mode: String,
        #[arg(long, default_value = "cap_to_one")]
        zero_policy: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Percentile cutoff value of a similarity CSV
    Cutoff {
        #[arg(long)]
        similarity: PathBuf,
        #[arg(long, default_value_t = 0.95)]
        quantile: f64,
    },
    /// Threshold a similarity CSV and export the graph
    Graph {
        #[arg(long)]
        similarity: PathBuf,
        #[arg(long)]
        cutoff: f64,
        #[arg(long, default_value = "similarity")]
        weighting: String,
        #[arg(long, default_value = "jsonl")]
        format: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Louvain community detection on a JSONL graph
    Detect {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        shuffle_seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Co-opetition report from graph + partition + metadata
    Metrics {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        partition: PathBuf,
        #[arg(long)]
        metadata: Option<PathBuf>,
        #[arg(long, default_value = "binary")]
        counting: String,
        #[arg(long, default_value_t = 0.5)]
        purity_threshold: f64,
        #[arg(long, default_value_t = 0.0)]
        grade_min: f64,
        #[arg(long, default_value_t = 5.0)]
        grade_max: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Force-directed layout of a JSONL graph
    Layout {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        iterations: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic planted-partition dataset
    Synth {
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run the full pipeline from a JSON config
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quantile: Option<f64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// override any config field: --set layout.iterations=200
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn parse_mode(s: &str) -> Result<DistanceMode> {
    match s {
        "plain" => Ok(DistanceMode::Plain),
        "weighted" => Ok(DistanceMode::Weighted),
        other => Err(Error::Config(format!("unknown distance mode {other:?}"))),
    }
}

fn parse_zero_policy(s: &str) -> Result<ZeroDistancePolicy> {
    match s {
        "cap_to_one" => Ok(ZeroDistancePolicy::CapToOne),
        "exclude_pair" => Ok(ZeroDistancePolicy::ExcludePair),
        other => Err(Error::Config(format!("unknown zero policy {other:?}"))),
    }
}

fn parse_weighting(s: &str) -> Result<EdgeWeighting> {
    match s {
        "binary" => Ok(EdgeWeighting::Binary),
        "similarity" => Ok(EdgeWeighting::Similarity),
        other => Err(Error::Config(format!("unknown weighting {other:?}"))),
    }
}

fn parse_counting(s: &str) -> Result<EdgeCounting> {
    match s {
        "binary" => Ok(EdgeCounting::Binary),
        "weighted" => Ok(EdgeCounting::Weighted),
        other => Err(Error::Config(format!("unknown counting mode {other:?}"))),
    }
}

fn apply_override(config: &mut serde_json::Value, spec: &str) -> Result<()> {
    let (key, value) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {spec:?} is not KEY=VALUE")))?;
    let parsed: serde_json::Value = serde_json::from_str(value)
        .unwrap_or_else(|_| serde_json::Value::String(value.to_string()));
    let mut cursor = config;
    let parts: Vec<&str> = key.split('.').collect();
    for (idx, part) in parts.iter().enumerate() {
        let obj = cursor
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("cannot descend into {key:?} at {part:?}")))?;
        if idx == parts.len() - 1 {
            obj.insert(part.to_string(), parsed);
            return Ok(());
        }
        cursor = obj
            .entry(part.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { affiliation, out } => {
            let outcome = load_affiliation(fs::File::open(&affiliation)?)?;
            let diag = serde_json::json!({
                "n_entities": outcome.matrix.n_entities(),
                "n_features": outcome.matrix.n_features(),
                "n_cells": outcome.matrix.n_cells(),
                "total_declarations": outcome.total_declarations,
                "duplicate_declarations": outcome.duplicate_declarations,
            });
            println!("{}", serde_json::to_string_pretty(&diag)?);
            if let Some(path) = out {
                let mut buf = Vec::new();
                outcome.matrix.write_csv(&mut buf)?;
                fs::write(path, buf)?;
            }
        }
        Command::Stats { affiliation } => {
            let outcome = load_affiliation(fs::File::open(&affiliation)?)?;
            let stats = matrix_stats(&outcome.matrix);
            println!("{}", serde_json::to_string_pretty(&stats)?);
        }
        Command::Similarity {
            affiliation,
            mode,
            zero_policy,
            out,
        } => {
            let outcome = load_affiliation(fs::File::open(&affiliation)?)?;
            let d = pairwise_distances(&outcome.matrix, parse_mode(&mode)?, None)?;
            let s = reciprocal_similarity(&d, parse_zero_policy(&zero_policy)?);
            let mut buf = Vec::new();
            write_similarity_csv_exact(&s, outcome.matrix.entity_ids(), &mut buf)?;
            fs::write(out, buf)?;
        }
        Command::Cutoff {
            similarity,
            quantile,
        } => {
            if !(0.0..1.0).contains(&quantile) {
                return Err(Error::Config(format!("quantile {quantile} outside [0, 1)")));
            }
            let (_, s) = read_similarity_csv(fs::File::open(&similarity)?)?;
            let cdf = empirical_cdf(&s)?;
            println!("{}", quantile_cutoff(&cdf, quantile));
        }
        Command::Graph {
            similarity,
            cutoff,
            weighting,
            format,
            out,
        } => {
            let (ids, s) = read_similarity_csv(fs::File::open(&similarity)?)?;
            let t = sparsify(&s, cutoff);
            let g = build_graph(&t, &ids, parse_weighting(&weighting)?);
            let format: ExportFormat = format.parse()?;
            fs::write(out, export_graph(&g, format, None, None)?)?;
        }
        Command::Detect {
            graph,
            shuffle_seed,
            out,
        } => {
            let g = read_graph_jsonl(fs::File::open(&graph)?)?;
            let cfg = LouvainConfig {
                node_order: match shuffle_seed {
                    Some(seed) => NodeOrder::Shuffle { seed },
                    None => NodeOrder::Input,
                },
                ..LouvainConfig::default()
            };
            let detection = louvain(&g, &cfg)?;
            let mut buf = Vec::new();
            write_partition_csv(g.entity_ids(), &detection, &mut buf)?;
            fs::write(out, buf)?;
        }
        Command::Metrics {
            graph,
            partition,
            metadata,
            counting,
            purity_threshold,
            grade_min,
            grade_max,
            out,
        } => {
            let g = read_graph_jsonl(fs::File::open(&graph)?)?;
            let (ids, comms) = read_partition_csv(fs::File::open(&partition)?)?;
            if ids != g.entity_ids() {
                return Err(Error::Config(
                    "partition entity order does not match graph".into(),
                ));
            }
            let detection = detection_from_assignment(&comms);
            let meta = match metadata {
                Some(path) => {
                    let records =
                        load_metadata(fs::File::open(path)?, grade_min, grade_max, None)?;
                    join_metadata(g.entity_ids(), &records)?
                }
                None => g
                    .entity_ids()
                    .iter()
                    .map(|id| coopetition::affiliation::EntityMetadata {
                        entity_id: id.clone(),
                        grade: None,
                        label: None,
                    })
                    .collect(),
            };
            let cfg = MetricsConfig {
                counting: parse_counting(&counting)?,
                purity_threshold,
            };
            let report = coopetition_report(&g, &detection, &meta, &cfg)?;
            fs::write(out, serde_json::to_vec_pretty(&report)?)?;
            println!("{}", report.to_text_table());
        }
        Command::Layout {
            graph,
            seed,
            iterations,
            out,
        } => {
            let g = read_graph_jsonl(fs::File::open(&graph)?)?;
            let params = Fa2Params {
                seed,
                iterations,
                ..Fa2Params::default()
            };
            let (state, stop) = fa2_run(&g, &params)?;
            let mut buf = Vec::new();
            write_positions_csv(g.entity_ids(), &state.positions, &mut buf)?;
            fs::write(out, buf)?;
            eprintln!("layout stopped: {stop:?}");
        }
        Command::Synth {
            preset,
            config,
            seed,
            out_dir,
        } => {
            let cfg = match (preset, config) {
                (Some(name), None) => match name.as_str() {
                    "tseba-like" => SynthConfig::tseba_like(seed),
                    other => {
                        return Err(Error::Config(format!("unknown preset {other:?}")));
                    }
                },
                (None, Some(path)) => {
                    let mut cfg: SynthConfig =
                        serde_json::from_slice(&fs::read(path)?)?;
                    cfg.seed = seed;
                    cfg
                }
                _ => {
                    return Err(Error::Config(
                        "exactly one of --preset or --config is required".into(),
                    ))
                }
            };
            let data = generate(&cfg)?;
            fs::create_dir_all(&out_dir)?;
            let mut buf = Vec::new();
            data.matrix.write_csv(&mut buf)?;
            fs::write(out_dir.join("affiliation.csv"), buf)?;
            let mut buf = Vec::new();
            write_metadata_csv(&data.metadata, &mut buf)?;
            fs::write(out_dir.join("metadata.csv"), buf)?;
            let detection = detection_from_assignment(
                &(0..data.ground_truth.n_nodes())
                    .map(|node| {
                        if data.loners.contains(&node) {
                            -1
                        } else {
                            data.ground_truth.community_of(node) as i64
                        }
                    })
                    .collect::<Vec<_>>(),
            );
            let mut buf = Vec::new();
            write_partition_csv(data.matrix.entity_ids(), &detection, &mut buf)?;
            fs::write(out_dir.join("ground_truth.csv"), buf)?;
        }
        Command::Run(args) => {
            let mut raw: serde_json::Value = serde_json::from_slice(&fs::read(&args.config)?)?;
            if let Some(seed) = args.seed {
                apply_override(&mut raw, &format!("seed={seed}"))?;
            }
            if let Some(q) = args.quantile {
                apply_override(&mut raw, &format!("quantile={q}"))?;
            }
            if let Some(dir) = &args.out_dir {
                apply_override(&mut raw, &format!("out_dir={}", dir.display()))?;
            }
            for spec in &args.overrides {
                apply_override(&mut raw, spec)?;
            }
            let cfg: PipelineConfig =
                serde_json::from_value(raw).map_err(|e| Error::Config(e.to_string()))?;
            let artifacts = run_pipeline(&cfg)?;
            println!("{}", artifacts.report.to_text_table());
            eprintln!("cutoff: {}", artifacts.cutoff);
            for path in &artifacts.written {
                eprintln!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
