use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use lgae::data::{build_manifest, generate_synthetic, load_dataset, planted_partition, save_dataset};
use lgae::experiment::{
    param_table, parse_seeds, render_param_table, render_replicate, run_preprocess, run_replicate,
    run_train, RunConfig,
};
use lgae::{Error, Variant};

#[derive(Parser)]
#[command(name = "lgae", version, about = "Linear graph auto-encoders for link prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the propagated feature cache S^k X (or S^k when featureless).
    Preprocess {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long)]
        featureless: bool,
        #[arg(long, default_value = "cache")]
        out: PathBuf,
    },
    /// Train one variant over a list of seeds and aggregate test metrics.
    Train(RunArgs),
    /// Run all four variants with and without features.
    Replicate(RunArgs),
    /// Trainable-parameter counts over k = 1, 2, 3, 7.
    Params {
        #[arg(long, conflicts_with = "dataset", required_unless_present = "dataset")]
        feature_dim: Option<usize>,
        /// Read the feature dimension from a dataset manifest.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long)]
        json: bool,
    },
    /// Write a seeded synthetic dataset directory.
    Generate {
        /// erdos_renyi, path, star, complete or planted.
        #[arg(long, default_value = "erdos_renyi")]
        kind: String,
        #[arg(long)]
        n: usize,
        /// Edge probability (erdos_renyi) or within-community probability (planted).
        #[arg(long, default_value_t = 0.1)]
        p: f64,
        /// Cross-community edge probability (planted).
        #[arg(long, default_value_t = 0.005)]
        p_out: f64,
        #[arg(long, default_value_t = 4)]
        communities: usize,
        #[arg(long, default_value_t = 0)]
        feature_dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write manifest.txt for hand-converted edges.txt / features.txt files.
    Manifest {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        name: String,
        #[arg(long)]
        num_nodes: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    /// key=value file; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    featureless: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Comma list and/or ranges, e.g. 0-9 or 1,4,7.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    val_frac: Option<f64>,
    #[arg(long)]
    test_frac: Option<f64>,
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(self) -> lgae::Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        if let Some(v) = self.dataset {
            cfg.dataset = v;
        }
        if let Some(v) = self.variant {
            cfg.variant = v;
        }
        if let Some(v) = self.k {
            cfg.k = v;
        }
        if self.featureless {
            cfg.featureless = true;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.lr {
            cfg.lr = v;
        }
        if let Some(v) = self.seeds {
            cfg.seeds = parse_seeds(&v)?;
        }
        if let Some(v) = self.val_frac {
            cfg.val_frac = v;
        }
        if let Some(v) = self.test_frac {
            cfg.test_frac = v;
        }
        if let Some(v) = self.split_seed {
            cfg.split_seed = v;
        }
        if let Some(v) = self.eval_every {
            cfg.eval_every = v;
        }
        if let Some(v) = self.cache_dir {
            cfg.cache_dir = Some(v);
        }
        if let Some(v) = self.out {
            cfg.out = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(command: Command) -> lgae::Result<()> {
    match command {
        Command::Preprocess {
            dataset,
            k,
            featureless,
            out,
        } => {
            let started = Instant::now();
            let res = run_preprocess(&dataset, k, featureless, &out)?;
            println!(
                "wrote {} ({} x {}) in {:.2}s",
                res.path.display(),
                res.rows,
                res.cols,
                started.elapsed().as_secs_f64()
            );
        }
        Command::Train(args) => {
            let cfg = args.resolve()?;
            let agg = run_train(&cfg)?;
            for r in &agg.runs {
                println!("seed {:>4}  test AUC {:.4}  AP {:.4}", r.seed, r.test_auc, r.test_ap);
            }
            println!(
                "{} {}: AUC {:.4} ± {:.4}, AP {:.4} ± {:.4} (population std, {} seeds)",
                agg.variant.display_name(),
                if agg.featureless { "featureless" } else { "features" },
                agg.auc_mean,
                agg.auc_std,
                agg.ap_mean,
                agg.ap_std,
                agg.runs.len()
            );
            println!("results in {}", cfg.out.display());
        }
        Command::Replicate(args) => {
            let cfg = args.resolve()?;
            let rows = run_replicate(&cfg)?;
            print!("{}", render_replicate(&rows, cfg.seeds.len()));
        }
        Command::Params {
            feature_dim,
            dataset,
            variant,
            json,
        } => {
            let d = match (feature_dim, dataset) {
                (Some(d), _) => d,
                (None, Some(dir)) => load_dataset(&dir)?.feature_dim(),
                (None, None) => unreachable!("clap requires one of the two"),
            };
            let variants: Vec<Variant> = match variant {
                Some(v) => vec![v],
                None => Variant::ALL.to_vec(),
            };
            let rows = param_table(d, &variants)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&rows)?);
            } else {
                print!("{}", render_param_table(d, &rows));
            }
        }
        Command::Generate {
            kind,
            n,
            p,
            p_out,
            communities,
            feature_dim,
            seed,
            out,
        } => {
            let dataset = if kind == "planted" {
                planted_partition(n, communities, p, p_out, feature_dim, seed)?
            } else {
                generate_synthetic(kind.parse()?, n, p, feature_dim, seed)?
            };
            let m = save_dataset(&dataset, &out)?;
            println!(
                "wrote {} ({} nodes, {} edges, feature dim {})",
                out.display(),
                m.num_nodes,
                m.num_edges,
                m.feature_dim
            );
        }
        Command::Manifest {
            dataset,
            name,
            num_nodes,
        } => {
            let m = build_manifest(&dataset, &name, num_nodes)?;
            print!("{}", m.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
