use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mmot::clustering::Clusterer;
use mmot::constructions::theorem2_instance;
use mmot::experiment::{
    build_corpus, cmd_cluster, cmd_distances, cmd_inject, cmd_inject_file, Backend, ExperimentConfig,
};
use mmot::hash::{audit_big_h, audit_big_h_prime};
use mmot::verify::{cmd_verify, Mutation};
use mmot::Result;

#[derive(Parser)]
#[command(name = "mmot", version, about = "Exact multi-marginal transport experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample tuples per trial and write their distance tensors.
    Distances {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster the tensors of a distances directory and write a report.
    Cluster {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Directory written by `distances` or `inject`.
        #[arg(long)]
        dir: PathBuf,
        /// Report directory (defaults to `--dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Raise entries so that a fraction of them break the generalized
    /// triangle inequality.
    Inject {
        #[arg(long)]
        seed: u64,
        /// Distances directory, or a single tensor CSV.
        #[arg(long)]
        input: PathBuf,
        /// Output directory, or tensor CSV when the input is a file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        fraction: f64,
        #[arg(long, default_value_t = 1.3)]
        factor: f64,
    },
    /// Run the self-check suite; exits nonzero on any failure.
    Verify {
        #[arg(long, value_enum, default_value_t = MutationArg::None)]
        mutate: MutationArg,
    },
    Hash {
        #[command(subcommand)]
        command: HashCommand,
    },
    Constructions {
        #[command(subcommand)]
        command: ConstructionCommand,
    },
    Graphs {
        #[command(subcommand)]
        command: GraphCommand,
    },
}

#[derive(Subcommand)]
enum HashCommand {
    /// Exhaustive collision audit of the pair and triple index maps.
    Audit {
        #[arg(long)]
        n: usize,
    },
}

#[derive(Subcommand)]
enum ConstructionCommand {
    /// Transport values of the planar area-cost instance.
    Theorem2 {
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
    },
}

#[derive(Subcommand)]
enum GraphCommand {
    /// Write a perturbed synthetic corpus as edge lists, one directory per family.
    Gen {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MutationArg {
    None,
    HPrimeOffByOne,
    ZeroGamma,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    WdPairwise,
    MmotPairwise,
    MmotBarycenter,
    MmotNonmetric,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClustererArg {
    Spectral,
    Ttm,
    Nhcut,
}

/// Command-line overrides of the configuration file.
#[derive(Args)]
struct ExperimentArgs {
    /// Master seed.
    #[arg(long)]
    seed: u64,
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    #[arg(long, value_enum)]
    clusterer: Option<ClustererArg>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    triples: Option<usize>,
    #[arg(long)]
    pairs: Option<usize>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    ell: Option<u32>,
    #[arg(long)]
    graphs_per_family: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    families: Option<Vec<String>>,
    #[arg(long)]
    input_dir: Option<PathBuf>,
}

impl ExperimentArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        c.seed = Some(self.seed);
        if let Some(b) = self.backend {
            c.backend = match b {
                BackendArg::WdPairwise => Backend::WdPairwise,
                BackendArg::MmotPairwise => Backend::MmotPairwise,
                BackendArg::MmotBarycenter => Backend::MmotBarycenter,
                BackendArg::MmotNonmetric => Backend::MmotNonmetric,
            };
        }
        if let Some(k) = self.clusterer {
            c.clusterer = match k {
                ClustererArg::Spectral => Clusterer::Spectral,
                ClustererArg::Ttm => Clusterer::Ttm,
                ClustererArg::Nhcut => Clusterer::Nhcut,
            };
        }
        c.trials = self.trials.unwrap_or(c.trials);
        c.triples = self.triples.unwrap_or(c.triples);
        c.pairs = self.pairs.unwrap_or(c.pairs);
        c.top_k = self.top_k.unwrap_or(c.top_k);
        c.ell = self.ell.unwrap_or(c.ell);
        c.graphs_per_family = self.graphs_per_family.unwrap_or(c.graphs_per_family);
        if let Some(f) = &self.families {
            c.families = f.clone();
        }
        if let Some(d) = &self.input_dir {
            c.input_dir = Some(d.clone());
        }
        c.validate()?;
        Ok(c)
    }
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn write_corpus(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let corpus = build_corpus(cfg, cfg.master_seed()?)?;
    for (entry, g) in corpus.entries.iter().zip(&corpus.graphs) {
        let family = entry.family.as_ref().map_or("input", |f| f.name());
        let dir = out.join(format!("{:02}_{family}", entry.label));
        fs::create_dir_all(&dir)?;
        g.write_edge_list(fs::File::create(dir.join(format!("g{:03}.csv", entry.graph_id)))?)?;
    }
    fs::write(out.join("corpus.json"), serde_json::to_string_pretty(&corpus.entries)? + "\n")?;
    eprintln!("wrote {} graphs to {}", corpus.graphs.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Distances { exp, out } => {
            let cfg = exp.config()?;
            let t0 = std::time::Instant::now();
            let r = cmd_distances(&cfg, &out)?;
            eprintln!(
                "{} trials of order-{} {} tensors over {} objects in {:.1}s",
                r.tensors.len(),
                r.manifest.order,
                r.manifest.backend.name(),
                r.manifest.distributions.len(),
                t0.elapsed().as_secs_f64()
            );
        }
        Command::Cluster { exp, dir, out } => {
            let cfg = exp.config()?;
            let r = cmd_cluster(&cfg, &dir, out.as_deref())?;
            eprintln!(
                "{:?} on {}: median error {:.4} (mean {:.4}, random baseline {:.4}) in {:.1}s",
                r.clusterer,
                r.backend.name(),
                r.median_error,
                r.mean_error,
                r.random_baseline,
                r.runtime.total_seconds
            );
        }
        Command::Inject {
            seed,
            input,
            out,
            fraction,
            factor,
        } => {
            if input.is_dir() {
                let r = cmd_inject(&input, &out, fraction, factor, seed)?;
                for t in &r.trials {
                    eprintln!(
                        "trial {}: {} of {} entries raised; empirical C {:?} -> {:?}; targeted ratio {:?}",
                        t.trial, t.targeted, t.requested, t.empirical_c_before, t.empirical_c_after, t.targeted_min_ratio
                    );
                }
            } else {
                print_json(&cmd_inject_file(&input, &out, fraction, factor, seed)?)?;
            }
        }
        Command::Verify { mutate } => {
            let mutation = match mutate {
                MutationArg::None => Mutation::None,
                MutationArg::HPrimeOffByOne => Mutation::HPrimeOffByOne,
                MutationArg::ZeroGamma => Mutation::ZeroGamma,
            };
            let s = cmd_verify(mutation);
            for c in &s.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            return Ok(s.passed);
        }
        Command::Hash {
            command: HashCommand::Audit { n },
        } => {
            let pair = audit_big_h(n)?;
            let triple = audit_big_h_prime(n)?;
            print_json(&serde_json::json!({ "pair_map": pair, "triple_map": triple }))?;
            return Ok(pair.passes && triple.passes);
        }
        Command::Constructions {
            command: ConstructionCommand::Theorem2 { epsilon },
        } => {
            let v = theorem2_instance(epsilon)?.values()?;
            print_json(&v)?;
        }
        Command::Graphs {
            command: GraphCommand::Gen { exp, out },
        } => write_corpus(&exp.config()?, &out)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
