use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bananas::benchmark::BenchmarkOracle;
use bananas::encoding::{to_csv_row, Encoder, EncodingKind, EncodingSpec};
use bananas::experiment::{parse_config, run_experiment};
use bananas::space::{validate, Cell, SpaceParams, NASBENCH_OPS};
use bananas::theory::{mc_path_probs, PathModel};
use bananas::Exec;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bananas", version, about = "Neural architecture search with path-encoded BO")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Override the output directory from the config.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Monte Carlo path-length statistics as CSV on stdout.
    Stats {
        /// `nasbench`, or `random_spec|gnkr|gnkr-free:n=7,k=9,r=3`.
        #[arg(long, default_value = "nasbench")]
        model: PathModel,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run on one thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Print the encoding of one cell as a CSV row.
    Encode {
        /// Cell text, e.g. `ops=[conv3x3,conv1x1,maxpool3x3,conv3x3,conv1x1];edges=[(0,1),(1,6)]`.
        #[arg(long)]
        cell: String,
        /// path, adjacency or continuous-adjacency.
        #[arg(long, default_value = "path")]
        encoding: EncodingKind,
        /// Keep only the first N path features.
        #[arg(long)]
        truncate: Option<usize>,
        /// Print a header row of feature names first.
        #[arg(long)]
        header: bool,
        #[command(flatten)]
        space: SpaceArgs,
    },
    /// Check a tabular benchmark file and report what it contains.
    ValidateData {
        file: PathBuf,
        #[command(flatten)]
        space: SpaceArgs,
    },
}

#[derive(Args)]
struct SpaceArgs {
    #[arg(long, default_value_t = 7)]
    n_nodes: usize,
    #[arg(long, default_value_t = 9)]
    max_edges: usize,
    /// Comma-separated operation names.
    #[arg(long, value_delimiter = ',', default_values_t = NASBENCH_OPS.map(String::from))]
    ops: Vec<String>,
}

impl SpaceArgs {
    fn space(&self) -> Result<SpaceParams> {
        Ok(SpaceParams::new(self.n_nodes, self.ops.len(), self.max_edges)?.with_op_names(self.ops.clone())?)
    }
}

fn feature_names(enc: &Encoder, space: &SpaceParams) -> Vec<String> {
    let edges: Vec<String> = (0..space.n_nodes)
        .flat_map(|i| (i + 1..space.n_nodes).map(move |j| format!("edge({i};{j})")))
        .collect();
    match enc.spec().kind {
        EncodingKind::Path => enc
            .table()
            .unwrap()
            .iter()
            .take(enc.dim())
            .map(|seq| {
                let ops: Vec<&str> = seq.iter().map(|&o| space.op_names[o as usize].as_str()).collect();
                format!("path[{}]", ops.join(">"))
            })
            .collect(),
        EncodingKind::Adjacency => edges
            .into_iter()
            .chain((1..space.n_nodes - 1).flat_map(|v| space.op_names.iter().map(move |op| format!("node{v}={op}"))))
            .collect(),
        EncodingKind::ContinuousAdjacency => edges
            .into_iter()
            .chain((1..space.n_nodes - 1).map(|v| format!("node{v}")))
            .collect(),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, output } => {
            let mut cfg = parse_config(&config)?;
            if let Some(out) = output {
                cfg.output = out;
            }
            let out = run_experiment(&cfg)?;
            for row in &out.summary_rows {
                if row.query == cfg.search.budget {
                    println!(
                        "{:<28} best@{} mean {:.5} std {:.5} ({} trials)",
                        row.algorithm, row.query, row.mean, row.std, row.trials
                    );
                }
            }
            println!("results written to {}", out.dir.display());
        }
        Command::Stats {
            model,
            trials,
            seed,
            sequential,
        } => {
            let exec = if sequential { Exec::Sequential } else { Exec::Parallel };
            let stats = mc_path_probs(model, trials, seed, exec)?;
            print!("{}", stats.to_csv());
        }
        Command::Encode {
            cell,
            encoding,
            truncate,
            header,
            space,
        } => {
            let space = space.space()?;
            let cell = Cell::parse(&cell, &space)?;
            if let Err(v) = validate(&cell, &space) {
                let msgs: Vec<String> = v.iter().map(ToString::to_string).collect();
                bail!("invalid cell: {}", msgs.join("; "));
            }
            let spec = EncodingSpec {
                kind: encoding,
                truncate_len: truncate,
            };
            let enc = Encoder::new(spec, &space)?;
            if header {
                println!("{}", feature_names(&enc, &space).join(","));
            }
            println!("{}", to_csv_row(&enc.encode(&cell)));
        }
        Command::ValidateData { file, space } => {
            let space = space.space()?;
            let oracle = BenchmarkOracle::load_tabular(&file, &space)
                .with_context(|| format!("validating {}", file.display()))?;
            println!(
                "{}: {} architectures, parameter counts {}",
                file.display(),
                oracle.len().unwrap_or(0),
                if oracle.params_available() { "present" } else { "missing (dual objective unavailable)" }
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
