//! Train/validation/test edge splits with frozen negative samples.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Edge, GraphDataset};

pub const DEFAULT_VAL_FRAC: f64 = 0.05;
pub const DEFAULT_TEST_FRAC: f64 = 0.10;

/// Negative sampling gives up after this many attempts per node.
const ATTEMPTS_PER_NODE: usize = 1000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeSplit {
    pub train_edges: Vec<Edge>,
    pub val_edges: Vec<Edge>,
    pub test_edges: Vec<Edge>,
    pub val_negatives: Vec<Edge>,
    pub test_negatives: Vec<Edge>,
    pub seed: u64,
}

fn split_count(m: usize, frac: f64, what: &str) -> Result<usize> {
    // tolerate representation error, e.g. 0.29 * 100 = 28.999999999999996
    let count = (m as f64 * frac + 1e-9).floor() as usize;
    if frac > 0.0 && count == 0 {
        return Err(Error::Config(format!(
            "{what} fraction {frac} of {m} edges selects no edges"
        )));
    }
    Ok(count)
}

/// Holds out `val_frac` and `test_frac` of the edges uniformly at random and
/// pairs each held-out set with as many sampled non-edges.
pub fn split_edges(
    dataset: &GraphDataset,
    val_frac: f64,
    test_frac: f64,
    seed: u64,
) -> Result<EdgeSplit> {
    if !(0.0..1.0).contains(&val_frac)
        || !(0.0..1.0).contains(&test_frac)
        || val_frac + test_frac >= 1.0
    {
        return Err(Error::Config(format!(
            "split fractions must be non-negative with sum below 1 (val {val_frac}, test {test_frac})"
        )));
    }
    let m = dataset.num_edges();
    let n_val = split_count(m, val_frac, "validation")?;
    let n_test = split_count(m, test_frac, "test")?;
    if n_val + n_test >= m && m > 0 {
        return Err(Error::Config("held-out edges leave no training edges".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng);
    let pick = |idx: &[usize]| -> Vec<Edge> {
        let mut e: Vec<Edge> = idx.iter().map(|&i| dataset.edges()[i]).collect();
        e.sort_unstable();
        e
    };
    let test_edges = pick(&order[..n_test]);
    let val_edges = pick(&order[n_test..n_test + n_val]);
    let train_edges = pick(&order[n_test + n_val..]);

    let negatives = sample_negatives(dataset, n_test + n_val, &mut rng)?;
    let (test_negatives, val_negatives) = negatives.split_at(n_test);

    Ok(EdgeSplit {
        train_edges,
        val_edges,
        test_edges,
        val_negatives: val_negatives.to_vec(),
        test_negatives: test_negatives.to_vec(),
        seed,
    })
}

/// Uniform non-edges of the full graph by rejection: no self-loops, no
/// existing edges, no repeats.
fn sample_negatives(dataset: &GraphDataset, wanted: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Edge>> {
    let n = dataset.num_nodes() as u64;
    let budget = ATTEMPTS_PER_NODE * dataset.num_nodes();
    let mut seen = HashSet::with_capacity(wanted);
    let mut out = Vec::with_capacity(wanted);
    let mut attempts = 0;
    while out.len() < wanted {
        if attempts >= budget {
            return Err(Error::SamplingExhausted {
                attempts,
                found: out.len(),
                wanted,
            });
        }
        attempts += 1;
        let u = rng.random_range(0..n) as usize;
        let v = rng.random_range(0..n) as usize;
        if u == v {
            continue;
        }
        let pair = (u.min(v), u.max(v));
        if dataset.has_edge(pair.0, pair.1) || !seen.insert(pair) {
            continue;
        }
        out.push(pair);
    }
    Ok(out)
}

impl EdgeSplit {
    /// Checks every split invariant against the graph it came from.
    pub fn validate_against(&self, dataset: &GraphDataset) -> Result<()> {
        let bad = |msg: String| Err(Error::ContractViolation(format!("edge split: {msg}")));
        let mut positives: Vec<Edge> = self
            .train_edges
            .iter()
            .chain(&self.val_edges)
            .chain(&self.test_edges)
            .copied()
            .collect();
        positives.sort_unstable();
        let before = positives.len();
        positives.dedup();
        if positives.len() != before {
            return bad("positive sets overlap".into());
        }
        if positives != dataset.edges() {
            return bad("positive sets do not partition the edge set".into());
        }
        let mut seen = HashSet::new();
        for &(u, v) in self.val_negatives.iter().chain(&self.test_negatives) {
            if u == v || u >= dataset.num_nodes() || v >= dataset.num_nodes() {
                return bad(format!("invalid negative pair ({u}, {v})"));
            }
            if dataset.has_edge(u, v) {
                return bad(format!("negative pair ({u}, {v}) is an edge"));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return bad(format!("duplicate negative pair ({u}, {v})"));
            }
        }
        if self.val_negatives.len() != self.val_edges.len()
            || self.test_negatives.len() != self.test_edges.len()
        {
            return bad("negative counts differ from positive counts".into());
        }
        Ok(())
    }

    /// Text form: a `# seed=` line, then `TRAIN`, `VAL`, `VAL_NEG`, `TEST`
    /// and `TEST_NEG` headers each followed by `u v` lines.
    pub fn to_text(&self) -> String {
        let mut s = format!("# seed={}\n", self.seed);
        for (name, edges) in self.sections() {
            s.push_str(name);
            s.push('\n');
            for (u, v) in edges {
                let _ = writeln!(s, "{u} {v}");
            }
        }
        s
    }

    fn sections(&self) -> [(&'static str, &Vec<Edge>); 5] {
        [
            ("TRAIN", &self.train_edges),
            ("VAL", &self.val_edges),
            ("VAL_NEG", &self.val_negatives),
            ("TEST", &self.test_edges),
            ("TEST_NEG", &self.test_negatives),
        ]
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        const NAMES: [&str; 5] = ["TRAIN", "VAL", "VAL_NEG", "TEST", "TEST_NEG"];
        let mut seed = 0;
        let mut sections: [Vec<Edge>; 5] = Default::default();
        let mut seen = [false; 5];
        let mut current: Option<usize> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("seed=") {
                    seed = v
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("bad seed '{v}'")))?;
                }
                continue;
            }
            if let Some(i) = NAMES.iter().position(|&n| n == line) {
                if seen[i] {
                    return Err(parse_err(line_no, format!("repeated section {line}")));
                }
                seen[i] = true;
                current = Some(i);
                continue;
            }
            let i = current
                .ok_or_else(|| parse_err(line_no, "pair before any section header".into()))?;
            let mut it = line.split_whitespace();
            let mut next = || -> Result<usize> {
                let tok = it
                    .next()
                    .ok_or_else(|| parse_err(line_no, "expected two node indices".into()))?;
                tok.parse()
                    .map_err(|_| parse_err(line_no, format!("bad node index '{tok}'")))
            };
            let (u, v) = (next()?, next()?);
            if it.next().is_some() {
                return Err(parse_err(line_no, "expected exactly two node indices".into()));
            }
            sections[i].push((u, v));
        }
        if let Some(i) = seen.iter().position(|&s| !s) {
            return Err(parse_err(0, format!("missing section {}", NAMES[i])));
        }
        let [train_edges, val_edges, val_negatives, test_edges, test_negatives] = sections;
        Ok(EdgeSplit {
            train_edges,
            val_edges,
            test_edges,
            val_negatives,
            test_negatives,
            seed,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?, path)
    }

    /// The graph made of training edges only.
    pub fn train_graph(&self, dataset: &GraphDataset) -> Result<GraphDataset> {
        dataset.with_edges(self.train_edges.iter().copied())
    }
}
