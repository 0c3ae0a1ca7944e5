//! Reproducible runs: resolved configs, per-seed reports, aggregates and tables.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{graph_digest, load_dataset};
use crate::error::{Error, Result};
use crate::graph::{adjacency_from_edges, normalized_operator};
use crate::linkpred::{split_edges, EdgeSplit, DEFAULT_TEST_FRAC, DEFAULT_VAL_FRAC};
use crate::models::{param_count, write_checkpoint, ModelConfig, Variant};
use crate::propagation::{propagate, write_cache, write_identity_cache, CacheKey, DEFAULT_IDENTITY_BLOCK};
use crate::seed::{derive_seed, INIT, NOISE, SPLIT};
use crate::training::{train, TrainConfig, TrainInputs, TrainReport};

pub const DEFAULT_K: usize = 2;
pub const DEFAULT_SEEDS: [u64; 10] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9];
pub const PARAM_TABLE_KS: [usize; 4] = [1, 2, 3, 7];

/// One training run over a list of seeds with a single fixed split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub variant: Variant,
    pub k: usize,
    pub featureless: bool,
    pub epochs: usize,
    pub lr: f64,
    pub seeds: Vec<u64>,
    pub val_frac: f64,
    pub test_frac: f64,
    /// Master seed for the edge split, shared by every training seed.
    pub split_seed: u64,
    pub eval_every: usize,
    pub out: PathBuf,
    /// Directory for `X̄` caches; none disables caching.
    pub cache_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            dataset: PathBuf::new(),
            variant: Variant::Lgae,
            k: DEFAULT_K,
            featureless: false,
            epochs: t.epochs,
            lr: t.learning_rate,
            seeds: DEFAULT_SEEDS.to_vec(),
            val_frac: DEFAULT_VAL_FRAC,
            test_frac: DEFAULT_TEST_FRAC,
            split_seed: 0,
            eval_every: t.eval_every,
            out: PathBuf::from("runs"),
            cache_dir: None,
        }
    }
}

pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::Config(format!("bad seed list '{s}' (use e.g. 0,1,2 or 0-9)"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value '{value}' for '{key}'")))
}

impl RunConfig {
    /// Applies one `key=value` setting; keys match the long flag names with `_` for `-`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        match key.as_str() {
            "dataset" => self.dataset = PathBuf::from(value),
            "variant" => self.variant = value.parse()?,
            "k" => self.k = parse_value(&key, value)?,
            "featureless" => self.featureless = parse_value(&key, value)?,
            "epochs" => self.epochs = parse_value(&key, value)?,
            "lr" => self.lr = parse_value(&key, value)?,
            "seeds" => self.seeds = parse_seeds(value)?,
            "val_frac" => self.val_frac = parse_value(&key, value)?,
            "test_frac" => self.test_frac = parse_value(&key, value)?,
            "split_seed" => self.split_seed = parse_value(&key, value)?,
            "eval_every" => self.eval_every = parse_value(&key, value)?,
            "out" => self.out = PathBuf::from(value),
            "cache_dir" => {
                self.cache_dir = (!value.is_empty()).then(|| PathBuf::from(value));
            }
            _ => return Err(Error::Config(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Reads `key=value` lines; `#` starts a comment line.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path)?;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: format!("expected key=value, got '{line}'"),
            })?;
            self.set(k, v).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    /// The resolved config in the same `key=value` form `apply_file` reads.
    pub fn to_text(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let mut s = String::new();
        let _ = writeln!(s, "dataset={}", self.dataset.display());
        let _ = writeln!(s, "variant={}", self.variant.as_str());
        let _ = writeln!(s, "k={}", self.k);
        let _ = writeln!(s, "featureless={}", self.featureless);
        let _ = writeln!(s, "epochs={}", self.epochs);
        let _ = writeln!(s, "lr={}", self.lr);
        let _ = writeln!(s, "seeds={}", seeds.join(","));
        let _ = writeln!(s, "val_frac={}", self.val_frac);
        let _ = writeln!(s, "test_frac={}", self.test_frac);
        let _ = writeln!(s, "split_seed={}", self.split_seed);
        let _ = writeln!(s, "eval_every={}", self.eval_every);
        let _ = writeln!(s, "out={}", self.out.display());
        let _ = writeln!(
            s,
            "cache_dir={}",
            self.cache_dir.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
        );
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset.as_os_str().is_empty() {
            return Err(Error::Config("no dataset given".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("no seeds given".into()));
        }
        if self.test_frac <= 0.0 {
            return Err(Error::Config("test fraction must be positive to report test metrics".into()));
        }
        self.train_config(0).validate()
    }

    pub fn train_config(&self, noise_seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.lr,
            seed: noise_seed,
            eval_every: self.eval_every,
            ..TrainConfig::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub test_auc: f64,
    pub test_ap: f64,
}

/// Mean and population standard deviation of test metrics over seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub dataset: String,
    pub variant: Variant,
    pub k: usize,
    pub featureless: bool,
    pub split_seed: u64,
    pub runs: Vec<SeedResult>,
    pub auc_mean: f64,
    pub auc_std: f64,
    pub ap_mean: f64,
    pub ap_std: f64,
    pub std_kind: String,
}

pub fn mean_and_population_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

/// Trains every seed in `cfg.seeds` on one split and writes, under `cfg.out`:
/// `config.txt`, `split.txt`, `seed-<s>/report.json`,
/// `seed-<s>/checkpoint.bin` and `aggregate.json`.
pub fn run_train(cfg: &RunConfig) -> Result<Aggregate> {
    cfg.validate()?;
    let dataset = load_dataset(&cfg.dataset)?;
    fs::create_dir_all(&cfg.out)?;
    fs::write(cfg.out.join("config.txt"), cfg.to_text())?;

    let split = split_edges(
        &dataset,
        cfg.val_frac,
        cfg.test_frac,
        derive_seed(cfg.split_seed, SPLIT),
    )?;
    split.write(&cfg.out.join("split.txt"))?;
    let inputs = TrainInputs::prepare(
        &dataset,
        &split,
        cfg.variant,
        cfg.k,
        cfg.featureless,
        cfg.cache_dir.as_deref(),
    )?;

    let mut runs = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let report = train_one(&inputs, cfg, seed)?;
        let test = report.final_test.as_ref().ok_or_else(|| {
            Error::ContractViolation("run finished without test metrics".into())
        })?;
        runs.push(SeedResult {
            seed,
            test_auc: test.auc,
            test_ap: test.ap,
        });
    }
    let aucs: Vec<f64> = runs.iter().map(|r| r.test_auc).collect();
    let aps: Vec<f64> = runs.iter().map(|r| r.test_ap).collect();
    let (auc_mean, auc_std) = mean_and_population_std(&aucs);
    let (ap_mean, ap_std) = mean_and_population_std(&aps);
    let aggregate = Aggregate {
        dataset: dataset.name.clone(),
        variant: cfg.variant,
        k: cfg.k,
        featureless: cfg.featureless,
        split_seed: cfg.split_seed,
        runs,
        auc_mean,
        auc_std,
        ap_mean,
        ap_std,
        std_kind: "population".into(),
    };
    write_json(&cfg.out.join("aggregate.json"), &aggregate)?;
    Ok(aggregate)
}

fn train_one(inputs: &TrainInputs, cfg: &RunConfig, seed: u64) -> Result<TrainReport> {
    let model_config = inputs.model_config(derive_seed(seed, INIT))?;
    let outcome = train(inputs, &model_config, &cfg.train_config(derive_seed(seed, NOISE)))?;
    let dir_name = format!("seed-{seed}");
    let dir = cfg.out.join(&dir_name);
    fs::create_dir_all(&dir)?;
    write_checkpoint(&dir.join("checkpoint.bin"), &model_config, &outcome.params)?;
    let mut report = outcome.report;
    report.checkpoint = Some(format!("{dir_name}/checkpoint.bin"));
    write_json(&dir.join("report.json"), &report)?;
    Ok(report)
}

/// Result of preprocessing a dataset on its full graph.
#[derive(Clone, Debug, PartialEq)]
pub struct PreprocessOutput {
    pub path: PathBuf,
    pub rows: usize,
    pub cols: usize,
}

/// Writes `S^k X` (or `S^k` for the featureless stream) for the full graph
/// of the dataset at `dataset_dir` into `out_dir`.
pub fn run_preprocess(
    dataset_dir: &Path,
    k: usize,
    featureless: bool,
    out_dir: &Path,
) -> Result<PreprocessOutput> {
    let dataset = load_dataset(dataset_dir)?;
    let s = normalized_operator(&adjacency_from_edges(&dataset)?)?;
    fs::create_dir_all(out_dir)?;
    let key = CacheKey {
        content_hash: graph_digest(&dataset),
        k,
        featureless,
    };
    let path = out_dir.join(key.file_name());
    let n = dataset.num_nodes();
    let cols = if featureless {
        write_identity_cache(&path, &s, k, DEFAULT_IDENTITY_BLOCK)?;
        n
    } else {
        let x = dataset.features().ok_or_else(|| {
            Error::Config(format!(
                "dataset '{}' has no features; pass --featureless",
                dataset.name
            ))
        })?;
        write_cache(&path, &propagate(&s, x, k)?)?;
        x.n_cols()
    };
    Ok(PreprocessOutput { path, rows: n, cols })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRow {
    pub variant: Variant,
    /// `(k, count)` for every k in [`PARAM_TABLE_KS`].
    pub counts: Vec<(usize, usize)>,
}

/// Trainable-parameter counts for input dimension `d` over k ∈ {1, 2, 3, 7}.
pub fn param_table(d: usize, variants: &[Variant]) -> Result<Vec<ParamRow>> {
    variants
        .iter()
        .map(|&variant| {
            let counts = PARAM_TABLE_KS
                .iter()
                .map(|&k| Ok((k, param_count(&ModelConfig::new(variant, d, k, 0)?)?)))
                .collect::<Result<_>>()?;
            Ok(ParamRow { variant, counts })
        })
        .collect()
}

pub const VGAE_K2_NOTE: &str = "note: VGAE k=2 uses widths (32, 16) without biases; \
reference tables list 2048 more parameters for this cell, which no bias or \
width rule consistent with the other k reproduces";

pub fn render_param_table(d: usize, rows: &[ParamRow]) -> String {
    let mut s = format!("trainable parameters, input dim {d}\n");
    let _ = write!(s, "{:<8}", "model");
    for k in PARAM_TABLE_KS {
        let _ = write!(s, " {:>10}", format!("k={k}"));
    }
    s.push('\n');
    for row in rows {
        let _ = write!(s, "{:<8}", row.variant.display_name());
        for (_, c) in &row.counts {
            let _ = write!(s, " {c:>10}");
        }
        s.push('\n');
    }
    if rows.iter().any(|r| r.variant == Variant::Vgae) {
        s.push_str(VGAE_K2_NOTE);
        s.push('\n');
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub variant: Variant,
    pub featureless: bool,
    pub auc_mean: f64,
    pub auc_std: f64,
    pub ap_mean: f64,
    pub ap_std: f64,
}

/// All four variants in both feature streams, each in its own run directory
/// under `base.out`. Writes `replicate.json` and `replicate.txt`.
pub fn run_replicate(base: &RunConfig) -> Result<Vec<ReplicateRow>> {
    let mut rows = Vec::with_capacity(8);
    for featureless in [false, true] {
        for variant in Variant::ALL {
            let stream = if featureless { "featureless" } else { "features" };
            let cfg = RunConfig {
                variant,
                featureless,
                out: base.out.join(format!("{}-{stream}", variant.as_str())),
                ..base.clone()
            };
            let agg = run_train(&cfg)?;
            rows.push(ReplicateRow {
                variant,
                featureless,
                auc_mean: agg.auc_mean,
                auc_std: agg.auc_std,
                ap_mean: agg.ap_mean,
                ap_std: agg.ap_std,
            });
        }
    }
    write_json(&base.out.join("replicate.json"), &rows)?;
    fs::write(base.out.join("replicate.txt"), render_replicate(&rows, base.seeds.len()))?;
    Ok(rows)
}

/// Table of test AUC/AP in percent, mean ± population std over seeds.
/// Featureless rows are marked with `(*)`.
pub fn render_replicate(rows: &[ReplicateRow], n_seeds: usize) -> String {
    let mut s = format!("{:<12} {:>16} {:>16}\n", "model", "AUC", "AP");
    for r in rows {
        let name = format!(
            "{}{}",
            r.variant.display_name(),
            if r.featureless { " (*)" } else { "" }
        );
        let cell = |m: f64, sd: f64| format!("{:.1} ± {:.2}", 100.0 * m, 100.0 * sd);
        let _ = writeln!(
            s,
            "{name:<12} {:>16} {:>16}",
            cell(r.auc_mean, r.auc_std),
            cell(r.ap_mean, r.ap_std)
        );
    }
    let _ = writeln!(
        s,
        "(*) no node features. mean ± population std over {n_seeds} seeds, one fixed split."
    );
    s
}

/// Reads the split a run directory recorded, for exact reruns.
pub fn read_run_split(run_dir: &Path) -> Result<EdgeSplit> {
    EdgeSplit::read(&run_dir.join("split.txt"))
}
