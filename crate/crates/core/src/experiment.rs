//! Experiment orchestration: graph corpora, spectral signatures as
//! distributions, sampled distance tensors under several transport
//! backends, clustering trials, violation injection, and a self-check suite.
//!
//! Every random choice draws from a ChaCha8 stream seeded by
//! [`derive_seed`]`(master, stream, index)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{tune_threshold, ClusteringSolution, Clusterer};
use crate::constructions::{min_positive_area, triangle_area_cost};
use crate::error::{Error, Result};
use crate::graphs::{generate, load_graph, perturb_and_prune, signature, CorpusEntry, Graph, GraphFamily};
use crate::linalg::DenseMatrix;
use crate::lp::{PivotRule, SimplexOptions};
use crate::metric::{check_w_tensor, combinations, inject_violations, inject_violations_completing, DistanceTensor, InjectionParams};
use crate::prob::{Atom, DiscreteDistribution};
use crate::transport::{barycenter_cost, mmot_with, pairwise_mmot_with, PairwiseCost, TransportOptions};

/// Eigenvalues closer than this in both coordinates share one atom.
pub const MERGE_TOL: f64 = 1e-6;
/// Stream index reserved for corpus generation.
pub const CORPUS_STREAM: u64 = u32::MAX as u64;
const SAMPLE_IDX: u64 = 0;
const CLUSTER_IDX: u64 = 1;
const INJECT_IDX: u64 = 2;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `master ^ splitmix64(stream * 2^32 + index)`.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    master ^ splitmix64(stream.wrapping_shl(32).wrapping_add(index))
}

pub fn stream_rng(master: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream, index))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Wasserstein distance for pairs, sum of pairwise distances for triples.
    WdPairwise,
    MmotPairwise,
    MmotBarycenter,
    /// Triangle-area cost; triples only.
    MmotNonmetric,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Self::WdPairwise => "wd_pairwise",
            Self::MmotPairwise => "mmot_pairwise",
            Self::MmotBarycenter => "mmot_barycenter",
            Self::MmotNonmetric => "mmot_nonmetric",
        }
    }
}

/// Flat experiment configuration; every field has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Synthetic family names, used when `input_dir` is unset.
    pub families: Vec<String>,
    pub graphs_per_family: usize,
    /// One subdirectory per class, each holding edge-list CSV files.
    pub input_dir: Option<PathBuf>,
    pub perturb_p: f64,
    pub top_k: usize,
    pub backend: Backend,
    pub ell: u32,
    pub pairs: usize,
    pub triples: usize,
    /// Threshold grid; deciles of the sampled values when unset.
    pub thresholds: Option<Vec<f64>>,
    pub clusterer: Clusterer,
    pub trials: usize,
    pub seed: Option<u64>,
    pub inject_fraction: f64,
    pub inject_factor: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            families: GraphFamily::defaults().iter().map(|f| f.name().to_string()).collect(),
            graphs_per_family: 5,
            input_dir: None,
            perturb_p: 0.05,
            top_k: 16,
            backend: Backend::MmotPairwise,
            ell: 1,
            pairs: 150,
            triples: 100,
            thresholds: None,
            clusterer: Clusterer::Ttm,
            trials: 20,
            seed: None,
            inject_fraction: 0.2,
            inject_factor: 1.3,
        }
    }
}

const CONFIG_KEYS: &[&str] = &[
    "families",
    "graphs_per_family",
    "input_dir",
    "perturb_p",
    "top_k",
    "backend",
    "ell",
    "pairs",
    "triples",
    "thresholds",
    "clusterer",
    "trials",
    "seed",
    "inject_fraction",
    "inject_factor",
];

fn config_err(key: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        msg: msg.into(),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| config_err("<file>", e.message()))?;
        if let Some(k) = table.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
            return Err(config_err(k, "unknown key"));
        }
        let mut cfg = Self::default();
        for (k, v) in table {
            let mut one = toml::Table::new();
            one.insert(k.clone(), v);
            let parsed: Self = one.try_into().map_err(|e: toml::de::Error| config_err(&k, e.message()))?;
            cfg.take_field(&k, parsed);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    fn take_field(&mut self, key: &str, from: Self) {
        match key {
            "families" => self.families = from.families,
            "graphs_per_family" => self.graphs_per_family = from.graphs_per_family,
            "input_dir" => self.input_dir = from.input_dir,
            "perturb_p" => self.perturb_p = from.perturb_p,
            "top_k" => self.top_k = from.top_k,
            "backend" => self.backend = from.backend,
            "ell" => self.ell = from.ell,
            "pairs" => self.pairs = from.pairs,
            "triples" => self.triples = from.triples,
            "thresholds" => self.thresholds = from.thresholds,
            "clusterer" => self.clusterer = from.clusterer,
            "trials" => self.trials = from.trials,
            "seed" => self.seed = from.seed,
            "inject_fraction" => self.inject_fraction = from.inject_fraction,
            "inject_factor" => self.inject_factor = from.inject_factor,
            _ => unreachable!("keys are checked first"),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err("<file>", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dir.is_none() {
            if self.families.is_empty() {
                return Err(config_err("families", "no families given"));
            }
            for f in &self.families {
                family_by_name(f)?;
            }
            if self.graphs_per_family == 0 {
                return Err(config_err("graphs_per_family", "must be at least 1"));
            }
        }
        if !(0.0..=1.0).contains(&self.perturb_p) {
            return Err(config_err("perturb_p", "must lie in [0, 1]"));
        }
        if self.top_k == 0 {
            return Err(config_err("top_k", "must be at least 1"));
        }
        if self.ell == 0 {
            return Err(config_err("ell", "must be at least 1"));
        }
        if self.ell > 1 && matches!(self.backend, Backend::MmotPairwise) {
            return Err(config_err("ell", "the pairwise backend requires ell = 1"));
        }
        if self.backend == Backend::MmotNonmetric && self.clusterer.order() != 3 {
            return Err(config_err("backend", "the non-metric backend only defines triple distances"));
        }
        if self.pairs == 0 {
            return Err(config_err("pairs", "must be at least 1"));
        }
        if self.triples == 0 {
            return Err(config_err("triples", "must be at least 1"));
        }
        if self.trials == 0 {
            return Err(config_err("trials", "must be at least 1"));
        }
        if let Some(g) = &self.thresholds {
            if g.is_empty() || g.iter().any(|x| x.is_nan()) {
                return Err(config_err("thresholds", "must be a nonempty list of numbers"));
            }
        }
        if !(0.0..=1.0).contains(&self.inject_fraction) {
            return Err(config_err("inject_fraction", "must lie in [0, 1]"));
        }
        if self.inject_factor <= 1.0 {
            return Err(config_err("inject_factor", "must exceed 1"));
        }
        Ok(())
    }

    pub fn master_seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| config_err("seed", "a master seed is required"))
    }

    fn order(&self) -> usize {
        self.clusterer.order()
    }

    fn budget(&self) -> usize {
        if self.order() == 2 {
            self.pairs
        } else {
            self.triples
        }
    }
}

pub fn family_by_name(name: &str) -> Result<GraphFamily> {
    GraphFamily::defaults()
        .into_iter()
        .find(|f| f.name() == name)
        .ok_or_else(|| config_err("families", format!("unknown family `{name}`")))
}

#[derive(Clone, Debug)]
pub struct Corpus {
    pub entries: Vec<CorpusEntry>,
    pub graphs: Vec<Graph>,
}

impl Corpus {
    pub fn truth(&self) -> Result<ClusteringSolution> {
        let labels: Vec<usize> = self.entries.iter().map(|e| e.label).collect();
        let k = labels.iter().max().map_or(0, |m| m + 1);
        ClusteringSolution::new(labels, k)
    }
}

/// Synthetic corpus (perturbed members of each family) or the graphs under
/// `input_dir`, labeled by subdirectory.
pub fn build_corpus(cfg: &ExperimentConfig, master: u64) -> Result<Corpus> {
    let mut entries = Vec::new();
    let mut graphs = Vec::new();
    if let Some(dir) = &cfg.input_dir {
        let mut classes: Vec<PathBuf> = fs::read_dir(dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        classes.retain(|p| p.is_dir());
        classes.sort();
        for (label, class) in classes.iter().enumerate() {
            let mut files: Vec<PathBuf> = fs::read_dir(class)?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()?;
            files.retain(|p| p.extension().is_some_and(|x| x == "csv"));
            files.sort();
            for f in files {
                let seed = derive_seed(master, CORPUS_STREAM, entries.len() as u64);
                graphs.push(load_graph(&f)?);
                entries.push(CorpusEntry {
                    graph_id: entries.len(),
                    family: None,
                    source: Some(f.strip_prefix(dir).unwrap_or(&f).display().to_string()),
                    seed,
                    label,
                });
            }
        }
        if graphs.is_empty() {
            return Err(config_err("input_dir", format!("no edge-list files under {}", dir.display())));
        }
    } else {
        for (label, name) in cfg.families.iter().enumerate() {
            let family = family_by_name(name)?;
            for _ in 0..cfg.graphs_per_family {
                let id = entries.len() as u64;
                let seed = derive_seed(master, CORPUS_STREAM, id);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let base = generate(&family, &mut rng)?;
                graphs.push(perturb_and_prune(&base, cfg.perturb_p, &mut rng)?);
                entries.push(CorpusEntry {
                    graph_id: entries.len(),
                    family: Some(family.clone()),
                    source: None,
                    seed,
                    label,
                });
            }
        }
    }
    Ok(Corpus { entries, graphs })
}

/// Uniform distribution over the `top_k` leading non-backtracking
/// eigenvalues, with near-coincident eigenvalues pooled.
pub fn signature_distribution(g: &Graph, top_k: usize) -> Result<DiscreteDistribution> {
    let atoms: Vec<Atom> = signature(g, top_k)?.values().iter().map(|&z| Atom::complex(z)).collect();
    DiscreteDistribution::from_samples(&atoms, MERGE_TOL)
}

/// `budget` distinct index tuples drawn uniformly; redrawn (up to 100
/// times) until every object appears when the budget allows it.
pub fn sample_tuples<R: Rng>(n: usize, order: usize, budget: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let all = combinations(n, order);
    if budget >= all.len() {
        return all;
    }
    let coverable = budget * order >= n;
    let mut pick = Vec::new();
    for _ in 0..100 {
        let mut idx = sample(rng, all.len(), budget).into_vec();
        idx.sort_unstable();
        pick = idx.into_iter().map(|i| all[i].clone()).collect::<Vec<_>>();
        if !coverable {
            break;
        }
        let seen: BTreeSet<usize> = pick.iter().flatten().copied().collect();
        if seen.len() == n {
            break;
        }
    }
    pick
}

fn experiment_options() -> TransportOptions {
    TransportOptions {
        simplex: SimplexOptions {
            rule: PivotRule::DantzigWithBlandFallback,
            ..SimplexOptions::default()
        },
        ..TransportOptions::default()
    }
}

/// Distance among the given distributions under `backend`; costs between
/// atoms are Euclidean distances in the complex plane.
pub fn tuple_distance(backend: Backend, dists: &[DiscreteDistribution], ell: u32) -> Result<f64> {
    let opts = experiment_options();
    let value = match backend {
        Backend::WdPairwise => {
            let d = PairwiseCost::euclidean(dists)?;
            let mut total = 0.0;
            for a in 0..dists.len() {
                for b in (a + 1)..dists.len() {
                    let pair = [dists[a].clone(), dists[b].clone()];
                    let sub = d.select(&[a, b])?;
                    total += mmot_with(&pair, &pairwise_as_tensor(&sub)?, ell, &opts)?.value;
                }
            }
            total
        }
        Backend::MmotPairwise => pairwise_mmot_with(dists, &PairwiseCost::euclidean(dists)?, ell, &opts)?.value,
        Backend::MmotBarycenter => {
            let mut omega: Vec<Atom> = Vec::new();
            for a in dists.iter().flat_map(|p| p.atoms()) {
                if !omega.contains(a) {
                    omega.push(a.clone());
                }
            }
            let base = DenseMatrix::from_fn(omega.len(), omega.len(), |s, t| {
                omega[s].distance(&omega[t]).expect("numeric atoms")
            });
            mmot_with(dists, &barycenter_cost(dists, &omega, &base)?, ell, &opts)?.value
        }
        Backend::MmotNonmetric => {
            let [a, b, c] = dists else {
                return Err(Error::Unsupported("the triangle-area cost takes exactly three distributions".into()));
            };
            let union: Vec<Atom> = dists.iter().flat_map(|p| p.atoms().iter().cloned()).collect();
            let gamma = min_positive_area(&union).unwrap_or(1.0);
            mmot_with(dists, &triangle_area_cost([a, b, c], gamma)?, ell, &opts)?.value
        }
    };
    Ok(value)
}

fn pairwise_as_tensor(d: &PairwiseCost) -> Result<crate::transport::CostTensor> {
    let m = d.pair(0, 1)?;
    crate::transport::CostTensor::new(crate::prob::DenseTensor::new(vec![m.rows(), m.cols()], m.data().to_vec())?)
}

/// Everything needed to cluster or extend a set of sampled tensors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistancesManifest {
    pub backend: Backend,
    pub order: usize,
    pub ell: u32,
    pub top_k: usize,
    pub seed: u64,
    pub trials: usize,
    pub corpus: Vec<CorpusEntry>,
    pub distributions: Vec<DiscreteDistribution>,
}

impl DistancesManifest {
    pub fn truth(&self) -> Result<ClusteringSolution> {
        Corpus {
            entries: self.corpus.clone(),
            graphs: Vec::new(),
        }
        .truth()
    }

    fn distance(&self, tuple: &[usize]) -> Result<f64> {
        let dists: Vec<DiscreteDistribution> = tuple.iter().map(|&i| self.distributions[i].clone()).collect();
        tuple_distance(self.backend, &dists, self.ell)
    }
}

#[derive(Clone, Debug)]
pub struct DistanceRun {
    pub manifest: DistancesManifest,
    pub tensors: Vec<DistanceTensor>,
}

/// Builds the corpus, samples tuples per trial, and evaluates each distinct
/// tuple once (in parallel).
pub fn compute_distances(cfg: &ExperimentConfig) -> Result<DistanceRun> {
    cfg.validate()?;
    let master = cfg.master_seed()?;
    let corpus = build_corpus(cfg, master)?;
    let distributions: Vec<DiscreteDistribution> = corpus
        .graphs
        .par_iter()
        .map(|g| signature_distribution(g, cfg.top_k))
        .collect::<Result<_>>()?;
    let n = distributions.len();
    let order = cfg.order();
    if n < order {
        return Err(config_err("families", format!("{n} graphs cannot fill an order-{order} tensor")));
    }
    let samples: Vec<Vec<Vec<usize>>> = (0..cfg.trials)
        .map(|t| sample_tuples(n, order, cfg.budget(), &mut stream_rng(master, t as u64, SAMPLE_IDX)))
        .collect();
    let manifest = DistancesManifest {
        backend: cfg.backend,
        order,
        ell: cfg.ell,
        top_k: cfg.top_k,
        seed: master,
        trials: cfg.trials,
        corpus: corpus.entries,
        distributions,
    };
    let distinct: Vec<Vec<usize>> = samples.iter().flatten().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let values: BTreeMap<Vec<usize>, f64> = distinct
        .par_iter()
        .map(|t| Ok((t.clone(), manifest.distance(t)?)))
        .collect::<Result<_>>()?;
    let tensors = samples
        .iter()
        .map(|tuples| {
            let mut t = DistanceTensor::new(order, n)?;
            for tu in tuples {
                t.set(tu, values[tu])?;
            }
            Ok(t)
        })
        .collect::<Result<_>>()?;
    Ok(DistanceRun { manifest, tensors })
}

pub const MANIFEST_FILE: &str = "distances.json";

pub fn trial_file(dir: &Path, trial: usize) -> PathBuf {
    dir.join(format!("trial_{trial:03}.csv"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_tensor(path: &Path, t: &DistanceTensor) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    t.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_run(run: &DistanceRun, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join(MANIFEST_FILE), &run.manifest)?;
    for (i, t) in run.tensors.iter().enumerate() {
        write_tensor(&trial_file(dir, i), t)?;
    }
    Ok(())
}

pub fn read_run(dir: &Path) -> Result<DistanceRun> {
    let manifest: DistancesManifest = serde_json::from_reader(File::open(dir.join(MANIFEST_FILE))?)?;
    let tensors = (0..manifest.trials)
        .map(|t| DistanceTensor::read_csv(File::open(trial_file(dir, t))?))
        .collect::<Result<Vec<_>>>()?;
    Ok(DistanceRun { manifest, tensors })
}

/// Computes the tensors of every trial and writes them with a manifest.
pub fn cmd_distances(cfg: &ExperimentConfig, out: &Path) -> Result<DistanceRun> {
    let run = compute_distances(cfg)?;
    write_run(&run, out)?;
    Ok(run)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub threshold: f64,
    pub error: f64,
    pub skipped_thresholds: usize,
    pub sampled: usize,
    pub modified: usize,
    /// Over fully sampled subsets; absent when there are none.
    pub empirical_c: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Clone, Debug, Default)]
pub struct RuntimeStats {
    pub total_seconds: f64,
    pub per_trial_seconds: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub backend: Backend,
    pub clusterer: Clusterer,
    pub k: usize,
    pub objects: usize,
    pub trials: Vec<TrialResult>,
    pub median_error: f64,
    pub mean_error: f64,
    /// Expected error of a uniformly random balanced labeling, `1 - 1/k`.
    pub random_baseline: f64,
    pub histogram: Vec<HistogramBin>,
    /// Wall-clock timings; not serialized so reports stay reproducible.
    #[serde(skip)]
    pub runtime: RuntimeStats,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => v[n / 2],
        n => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// Ten equal-width bins over [0, 1]; 1.0 falls in the last bin.
pub fn error_histogram(errors: &[f64]) -> Vec<HistogramBin> {
    let mut bins: Vec<HistogramBin> = (0..10)
        .map(|b| HistogramBin {
            lo: b as f64 / 10.0,
            hi: (b + 1) as f64 / 10.0,
            count: 0,
        })
        .collect();
    for &e in errors {
        bins[((e * 10.0).floor() as usize).min(9)].count += 1;
    }
    bins
}

/// Clusters every trial's tensor with threshold tuning against the corpus
/// labels.
pub fn cluster_run(
    run: &DistanceRun,
    clusterer: Clusterer,
    thresholds: Option<&[f64]>,
    master: u64,
) -> Result<ExperimentReport> {
    if clusterer.order() != run.manifest.order {
        return Err(config_err(
            "clusterer",
            format!("needs order-{} tensors, found order {}", clusterer.order(), run.manifest.order),
        ));
    }
    let truth = run.manifest.truth()?;
    let start = Instant::now();
    let results: Vec<(TrialResult, f64)> = run
        .tensors
        .par_iter()
        .enumerate()
        .map(|(trial, t)| {
            let t0 = Instant::now();
            let seed = derive_seed(master, trial as u64, CLUSTER_IDX);
            let tuned = tune_threshold(t, &truth, clusterer, thresholds, seed)?;
            let r = TrialResult {
                trial,
                threshold: tuned.threshold,
                error: tuned.error,
                skipped_thresholds: tuned.skipped,
                sampled: t.sampled_count(),
                modified: t.modified().len(),
                empirical_c: check_w_tensor(t, 1.0).empirical_c,
            };
            Ok((r, t0.elapsed().as_secs_f64()))
        })
        .collect::<Result<_>>()?;
    let errors: Vec<f64> = results.iter().map(|r| r.0.error).collect();
    Ok(ExperimentReport {
        backend: run.manifest.backend,
        clusterer,
        k: truth.k,
        objects: truth.len(),
        median_error: median(&errors),
        mean_error: errors.iter().sum::<f64>() / errors.len() as f64,
        random_baseline: 1.0 - 1.0 / truth.k as f64,
        histogram: error_histogram(&errors),
        runtime: RuntimeStats {
            total_seconds: start.elapsed().as_secs_f64(),
            per_trial_seconds: results.iter().map(|r| r.1).collect(),
        },
        trials: results.into_iter().map(|r| r.0).collect(),
    })
}

pub const REPORT_FILE: &str = "report.json";
pub const HISTOGRAM_FILE: &str = "histogram.dat";

/// Clusters the tensors in `dir` and writes the report and a gnuplot-ready
/// histogram there (or under `out` when given).
pub fn cmd_cluster(cfg: &ExperimentConfig, dir: &Path, out: Option<&Path>) -> Result<ExperimentReport> {
    let run = read_run(dir)?;
    if run.manifest.trials != cfg.trials {
        return Err(config_err(
            "trials",
            format!("configured {} trials, {} holds {}", cfg.trials, dir.display(), run.manifest.trials),
        ));
    }
    let report = cluster_run(&run, cfg.clusterer, cfg.thresholds.as_deref(), cfg.master_seed()?)?;
    let out = out.unwrap_or(dir);
    fs::create_dir_all(out)?;
    write_json(&out.join(REPORT_FILE), &report)?;
    let mut w = BufWriter::new(File::create(out.join(HISTOGRAM_FILE))?);
    writeln!(w, "# lo hi count")?;
    for b in &report.histogram {
        writeln!(w, "{} {} {}", b.lo, b.hi, b.count)?;
    }
    w.flush()?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InjectTrial {
    pub trial: usize,
    pub requested: usize,
    pub targeted: usize,
    pub empirical_c_before: Option<f64>,
    pub empirical_c_after: Option<f64>,
    /// Smallest (sum of other faces) / target over targeted subsets.
    pub targeted_min_ratio: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InjectReport {
    pub fraction: f64,
    pub factor: f64,
    pub trials: Vec<InjectTrial>,
}

pub const INJECT_REPORT_FILE: &str = "inject.json";

fn targeted_ratio(inj: &crate::metric::Injection) -> Option<f64> {
    inj.targeted
        .iter()
        .map(|s| {
            let total: f64 = s.values.iter().sum();
            let target = inj.tensor.get(&s.target);
            (total - target) / target
        })
        .min_by(f64::total_cmp)
}

/// Injects violations into every trial tensor of a run. Subsets whose faces
/// were not sampled are completed with the run's backend.
pub fn inject_run(run: &DistanceRun, fraction: f64, factor: f64, master: u64) -> Result<(DistanceRun, InjectReport)> {
    let params = InjectionParams {
        fraction,
        factor,
        ..InjectionParams::default()
    };
    let out: Vec<(DistanceTensor, InjectTrial)> = run
        .tensors
        .par_iter()
        .enumerate()
        .map(|(trial, t)| {
            let mut rng = stream_rng(master, trial as u64, INJECT_IDX);
            let mut complete = |tu: &[usize]| run.manifest.distance(tu);
            let inj = inject_violations_completing(t, &params, &mut rng, &mut complete)?;
            let rec = InjectTrial {
                trial,
                requested: inj.requested,
                targeted: inj.targeted.len(),
                empirical_c_before: check_w_tensor(t, 1.0).empirical_c,
                empirical_c_after: check_w_tensor(&inj.tensor, 1.0).empirical_c,
                targeted_min_ratio: targeted_ratio(&inj),
            };
            Ok((inj.tensor, rec))
        })
        .collect::<Result<_>>()?;
    let (tensors, trials): (Vec<_>, Vec<_>) = out.into_iter().unzip();
    Ok((
        DistanceRun {
            manifest: run.manifest.clone(),
            tensors,
        },
        InjectReport { fraction, factor, trials },
    ))
}

/// Reads the run in `dir`, injects violations, and writes the modified run
/// with its report to `out`.
pub fn cmd_inject(dir: &Path, out: &Path, fraction: f64, factor: f64, master: u64) -> Result<InjectReport> {
    let run = read_run(dir)?;
    let (injected, report) = inject_run(&run, fraction, factor, master)?;
    write_run(&injected, out)?;
    write_json(&out.join(INJECT_REPORT_FILE), &report)?;
    Ok(report)
}

/// Injects violations into a single tensor file using only its fully
/// sampled subsets.
pub fn cmd_inject_file(input: &Path, output: &Path, fraction: f64, factor: f64, seed: u64) -> Result<InjectTrial> {
    let t = DistanceTensor::read_csv(File::open(input)?)?;
    let params = InjectionParams {
        fraction,
        factor,
        ..InjectionParams::default()
    };
    let inj = inject_violations(&t, &params, &mut stream_rng(seed, 0, INJECT_IDX))?;
    write_tensor(output, &inj.tensor)?;
    Ok(InjectTrial {
        trial: 0,
        requested: inj.requested,
        targeted: inj.targeted.len(),
        empirical_c_before: check_w_tensor(&t, 1.0).empirical_c,
        empirical_c_after: check_w_tensor(&inj.tensor, 1.0).empirical_c,
        targeted_min_ratio: targeted_ratio(&inj),
    })
}

pub use crate::verify::{cmd_verify, Check, Mutation, VerifySummary};

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_differ_by_stream() {
        let a = derive_seed(7, 0, 0);
        assert_ne!(a, derive_seed(7, 1, 0));
        assert_ne!(a, derive_seed(7, 0, 1));
        assert_eq!(a, derive_seed(7, 0, 0));
    }

    #[test]
    fn config_parsing() {
        let c = ExperimentConfig::from_toml("trials = 3\nbackend = \"wd_pairwise\"\n").unwrap();
        assert_eq!(c.trials, 3);
        assert_eq!(c.backend, Backend::WdPairwise);
        assert_eq!(c.triples, 100);
        assert_eq!(c.pairs, 150);
        match ExperimentConfig::from_toml("trails = 3\n") {
            Err(Error::Config { key, .. }) => assert_eq!(key, "trails"),
            other => panic!("{other:?}"),
        }
        match ExperimentConfig::from_toml("trials = \"x\"\n") {
            Err(Error::Config { key, .. }) => assert_eq!(key, "trials"),
            other => panic!("{other:?}"),
        }
        match ExperimentConfig::from_toml("ell = 2\n") {
            Err(Error::Config { key, .. }) => assert_eq!(key, "ell"),
            other => panic!("{other:?}"),
        }
        let round = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(round, c);
    }

    #[test]
    fn tuple_sampling_covers() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = sample_tuples(35, 3, 60, &mut rng);
        assert_eq!(s.len(), 60);
        assert_eq!(s.iter().flatten().collect::<BTreeSet<_>>().len(), 35);
        assert_eq!(sample_tuples(3, 2, 10, &mut rng).len(), 3);
    }

    #[test]
    fn tiny_pairwise_run() {
        let cfg = ExperimentConfig {
            families: vec!["cycle".into(), "complete".into(), "hypercube".into()],
            graphs_per_family: 1,
            backend: Backend::WdPairwise,
            clusterer: Clusterer::Spectral,
            trials: 1,
            pairs: 3,
            seed: Some(5),
            ..ExperimentConfig::default()
        };
        let run = compute_distances(&cfg).unwrap();
        assert_eq!(run.tensors[0].sampled_count(), 3);
        let again = compute_distances(&cfg).unwrap();
        assert_eq!(run.tensors[0].to_csv_string().unwrap(), again.tensors[0].to_csv_string().unwrap());
    }
}
