//! Spectral clustering of pairwise distances, hypergraph clustering of
//! triple-wise distances, k-means, and the permutation-minimized error.

use std::io::Write;

use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig_symmetric, DenseMatrix, Which};
use crate::metric::DistanceTensor;

/// Three-uniform hypergraph with nonnegative distance weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Hypergraph3 {
    n: usize,
    edges: Vec<([usize; 3], f64)>,
}

impl Hypergraph3 {
    pub fn new(n: usize, edges: Vec<([usize; 3], f64)>) -> Result<Self> {
        for (e, w) in &edges {
            if !(e[0] < e[1] && e[1] < e[2] && e[2] < n) {
                return Err(Error::invalid(format!("hyperedge {e:?} is not strictly increasing below {n}")));
            }
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::invalid(format!("hyperedge {e:?} has weight {w}")));
            }
        }
        Ok(Self { n, edges })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[([usize; 3], f64)] {
        &self.edges
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusteringSolution {
    pub labels: Vec<usize>,
    pub k: usize,
}

impl ClusteringSolution {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&l) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::invalid(format!("label {l} outside [0, {k})")));
        }
        Ok(Self { labels, k })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: Self = serde_json::from_str(s)?;
        Self::new(raw.labels, raw.k)
    }
}

/// Sampled triples with value at most `threshold`.
pub fn build_hypergraph(t: &DistanceTensor, threshold: f64) -> Result<Hypergraph3> {
    if t.order() != 3 {
        return Err(Error::invalid(format!("hypergraph needs an order-3 tensor, got order {}", t.order())));
    }
    let edges: Vec<([usize; 3], f64)> = t
        .sampled()
        .filter(|&(_, v)| v <= threshold)
        .map(|(k, v)| ([k[0], k[1], k[2]], v))
        .collect();
    if edges.is_empty() {
        return Err(Error::invalid(format!("no sampled triple at or below threshold {threshold}")));
    }
    Hypergraph3::new(t.size(), edges)
}

/// Sampled pairs with value at most `threshold`; the rest become unsampled.
pub fn threshold_pairs(t: &DistanceTensor, threshold: f64) -> Result<DistanceTensor> {
    if t.order() != 2 {
        return Err(Error::invalid(format!("expected an order-2 tensor, got order {}", t.order())));
    }
    let mut out = DistanceTensor::new(2, t.size())?;
    for (k, v) in t.sampled().filter(|&(_, v)| v <= threshold) {
        out.set(k, v)?;
    }
    if out.sampled_count() == 0 {
        return Err(Error::invalid(format!("no sampled pair at or below threshold {threshold}")));
    }
    Ok(out)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `exp(-w / sigma)` with `sigma` the median weight (1 when that is 0).
fn affinities(weights: &[f64]) -> Vec<f64> {
    let m = median(weights.to_vec());
    let sigma = if m > 0.0 { m } else { 1.0 };
    weights.iter().map(|w| (-w / sigma).exp()).collect()
}

fn check_support(n: usize, k: usize, links: &[Vec<usize>], degree: &[f64]) -> Result<()> {
    if k < 1 || k > n {
        return Err(Error::invalid(format!("cluster count {k} outside [1, {n}]")));
    }
    let isolated: Vec<usize> = (0..n).filter(|&i| degree[i] <= 0.0).collect();
    if !isolated.is_empty() {
        return Err(Error::IsolatedVertices(isolated));
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for group in links {
        for w in group.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            parent[a] = b;
        }
    }
    let components = (0..n).filter(|&i| find(&mut parent, i) == i).count();
    if components > k {
        return Err(Error::DegenerateGraph(format!(
            "affinity graph has {components} components, more than the {k} requested clusters"
        )));
    }
    Ok(())
}

/// Rows of the `k` smallest eigenvectors of `I - D^{-1/2} A D^{-1/2}`.
fn normalized_embedding(a: &DenseMatrix, degree: &[f64], k: usize) -> Result<Vec<Vec<f64>>> {
    let n = degree.len();
    let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
    let lap = DenseMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - inv_sqrt[i] * a.get(i, j) * inv_sqrt[j]
    });
    let eig = eig_symmetric(&lap, k, Which::Smallest)?;
    Ok((0..n).map(|i| eig.vectors.iter().map(|v| v[i]).collect()).collect())
}

fn row_normalize(rows: &mut [Vec<f64>]) {
    for r in rows {
        let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            r.iter_mut().for_each(|x| *x /= norm);
        }
    }
}

/// Contracts the affinity tensor to `A_ij = sum_k a_ijk`, then normalized
/// spectral clustering with row-normalized embeddings.
pub fn ttm<R: Rng>(h: &Hypergraph3, k: usize, rng: &mut R) -> Result<ClusteringSolution> {
    let n = h.n;
    let aff = affinities(&h.edges.iter().map(|e| e.1).collect::<Vec<_>>());
    let mut a = DenseMatrix::zeros(n, n);
    for ((e, _), &w) in h.edges.iter().zip(&aff) {
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let (i, j) = (e[p], e[q]);
            a.set(i, j, a.get(i, j) + w);
            a.set(j, i, a.get(j, i) + w);
        }
    }
    let degree: Vec<f64> = (0..n).map(|i| a.row(i).iter().sum()).collect();
    let links: Vec<Vec<usize>> = h.edges.iter().map(|(e, _)| e.to_vec()).collect();
    check_support(n, k, &links, &degree)?;
    let mut rows = normalized_embedding(&a, &degree, k)?;
    row_normalize(&mut rows);
    ClusteringSolution::new(kmeans(&rows, k, rng, 10)?.labels, k)
}

/// Normalized hypergraph cut: `k` smallest eigenvectors of
/// `I - D_v^{-1/2} H W D_e^{-1} H^T D_v^{-1/2}`, row-normalized, k-means.
pub fn nhcut<R: Rng>(h: &Hypergraph3, k: usize, rng: &mut R) -> Result<ClusteringSolution> {
    let n = h.n;
    let aff = affinities(&h.edges.iter().map(|e| e.1).collect::<Vec<_>>());
    // H W D_e^{-1} H^T; every hyperedge has three vertices
    let mut theta = DenseMatrix::zeros(n, n);
    let mut degree = vec![0.0; n];
    for ((e, _), &w) in h.edges.iter().zip(&aff) {
        for &i in e {
            degree[i] += w;
            for &j in e {
                theta.set(i, j, theta.get(i, j) + w / 3.0);
            }
        }
    }
    let links: Vec<Vec<usize>> = h.edges.iter().map(|(e, _)| e.to_vec()).collect();
    check_support(n, k, &links, &degree)?;
    let mut rows = normalized_embedding(&theta, &degree, k)?;
    row_normalize(&mut rows);
    ClusteringSolution::new(kmeans(&rows, k, rng, 10)?.labels, k)
}

/// Random-walk spectral clustering: affinity `exp(-d / sigma)` on sampled
/// pairs (zero elsewhere), eigenvectors of `I - D^{-1} A` through the
/// symmetric normalization, k-means on their rows.
pub fn spectral_cluster<R: Rng>(d: &DistanceTensor, k: usize, rng: &mut R) -> Result<ClusteringSolution> {
    if d.order() != 2 {
        return Err(Error::invalid(format!("spectral clustering needs an order-2 tensor, got order {}", d.order())));
    }
    let n = d.size();
    let pairs: Vec<(&[usize], f64)> = d.sampled().collect();
    let aff = affinities(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
    let mut a = DenseMatrix::zeros(n, n);
    for ((key, _), &w) in pairs.iter().zip(&aff) {
        a.set(key[0], key[1], w);
        a.set(key[1], key[0], w);
    }
    let degree: Vec<f64> = (0..n).map(|i| a.row(i).iter().sum()).collect();
    let links: Vec<Vec<usize>> = pairs.iter().map(|p| p.0.to_vec()).collect();
    check_support(n, k, &links, &degree)?;
    let mut rows = normalized_embedding(&a, &degree, k)?;
    for (r, d) in rows.iter_mut().zip(&degree) {
        let s = 1.0 / d.sqrt();
        r.iter_mut().for_each(|x| *x *= s);
    }
    ClusteringSolution::new(kmeans(&rows, k, rng, 10)?.labels, k)
}

#[derive(Clone, Debug)]
pub struct KMeans {
    /// Relabeled in order of first appearance.
    pub labels: Vec<usize>,
    pub inertia: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centers = vec![points[rng.gen_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut pick = d2.iter().rposition(|&x| x > 0.0).unwrap_or(0);
            for (i, &x) in d2.iter().enumerate() {
                if u < x {
                    pick = i;
                    break;
                }
                u -= x;
            }
            pick
        } else {
            rng.gen_range(0..points.len())
        };
        centers.push(points[next].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &centers[centers.len() - 1]));
        }
    }
    centers
}

fn lloyd(points: &[Vec<f64>], mut centers: Vec<Vec<f64>>) -> (Vec<usize>, f64) {
    let dim = points[0].len();
    let k = centers.len();
    let mut labels = vec![usize::MAX; points.len()];
    for _ in 0..300 {
        let mut changed = false;
        for (p, l) in points.iter().zip(labels.iter_mut()) {
            let best = (0..k)
                .min_by(|&a, &b| sq_dist(p, &centers[a]).total_cmp(&sq_dist(p, &centers[b])))
                .expect("k >= 1");
            if *l != best {
                *l = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            sums[l].iter_mut().zip(p).for_each(|(s, x)| *s += x);
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            } else {
                // empty cluster takes the point farthest from its center
                let far = (0..points.len())
                    .max_by(|&a, &b| {
                        sq_dist(&points[a], &centers[labels[a]]).total_cmp(&sq_dist(&points[b], &centers[labels[b]]))
                    })
                    .expect("nonempty");
                centers[c] = points[far].clone();
                labels[far] = c;
            }
        }
    }
    let inertia = points.iter().zip(&labels).map(|(p, &l)| sq_dist(p, &centers[l])).sum();
    (labels, inertia)
}

/// Lloyd iterations from k-means++ seeds; best of `restarts` by inertia.
pub fn kmeans<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R, restarts: usize) -> Result<KMeans> {
    if k == 0 || k > points.len() {
        return Err(Error::invalid(format!("cannot form {k} clusters from {} points", points.len())));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim || p.iter().any(|x| !x.is_finite())) {
        return Err(Error::invalid("points must be finite and of equal dimension"));
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..restarts.max(1) {
        let centers = plus_plus(points, k, rng);
        let (labels, inertia) = lloyd(points, centers);
        if best.as_ref().is_none_or(|b| inertia < b.1) {
            best = Some((labels, inertia));
        }
    }
    let (raw, inertia) = best.expect("at least one restart");
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    let labels = raw
        .iter()
        .map(|&l| {
            if map[l] == usize::MAX {
                map[l] = next;
                next += 1;
            }
            map[l]
        })
        .collect();
    Ok(KMeans { labels, inertia })
}

/// `counts[p][t]`: points labeled `p` in `pred` and `t` in `truth`, as a
/// square matrix of side `max(pred.k, truth.k)`.
pub fn confusion_matrix(pred: &ClusteringSolution, truth: &ClusteringSolution) -> Result<Vec<Vec<usize>>> {
    if pred.len() != truth.len() {
        return Err(Error::shape(format!("{} predicted labels for {} points", pred.len(), truth.len())));
    }
    let side = pred.k.max(truth.k);
    let mut m = vec![vec![0; side]; side];
    for (&p, &t) in pred.labels.iter().zip(&truth.labels) {
        m[p][t] += 1;
    }
    Ok(m)
}

pub fn write_confusion_csv<W: Write>(m: &[Vec<usize>], mut w: W) -> Result<()> {
    let header: Vec<String> = (0..m.len()).map(|t| format!("truth_{t}")).collect();
    writeln!(w, "pred,{}", header.join(","))?;
    for (p, row) in m.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(usize::to_string).collect();
        writeln!(w, "{p},{}", cells.join(","))?;
    }
    Ok(())
}

fn best_match_brute(m: &[Vec<usize>]) -> usize {
    fn go(m: &[Vec<usize>], row: usize, used: &mut [bool]) -> usize {
        if row == m.len() {
            return 0;
        }
        let mut best = 0;
        for c in 0..m.len() {
            if !used[c] {
                used[c] = true;
                best = best.max(m[row][c] + go(m, row + 1, used));
                used[c] = false;
            }
        }
        best
    }
    go(m, 0, &mut vec![false; m.len()])
}

fn best_match_hungarian(m: &[Vec<usize>]) -> usize {
    let w = Matrix::from_rows(m.iter().map(|r| r.iter().map(|&c| c as i64).collect::<Vec<_>>()))
        .expect("square confusion matrix");
    kuhn_munkres(&w).0 as usize
}

/// Fraction of points whose truth label differs from the relabeled
/// prediction, minimized over label permutations: exhaustive for at most 8
/// labels, Hungarian assignment otherwise.
pub fn clustering_error(pred: &ClusteringSolution, truth: &ClusteringSolution) -> Result<f64> {
    let m = confusion_matrix(pred, truth)?;
    let matched = if m.len() <= 8 { best_match_brute(&m) } else { best_match_hungarian(&m) };
    Ok(error_fraction(matched, pred.len()))
}

/// [`clustering_error`] always through the Hungarian assignment.
pub fn clustering_error_hungarian(pred: &ClusteringSolution, truth: &ClusteringSolution) -> Result<f64> {
    let m = confusion_matrix(pred, truth)?;
    Ok(error_fraction(best_match_hungarian(&m), pred.len()))
}

fn error_fraction(matched: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        (n - matched) as f64 / n as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clusterer {
    Spectral,
    Ttm,
    Nhcut,
}

impl Clusterer {
    pub fn order(self) -> usize {
        match self {
            Self::Spectral => 2,
            Self::Ttm | Self::Nhcut => 3,
        }
    }

    /// Clusters the entries of `t` at or below `threshold`.
    pub fn run<R: Rng>(self, t: &DistanceTensor, threshold: f64, k: usize, rng: &mut R) -> Result<ClusteringSolution> {
        match self {
            Self::Spectral => spectral_cluster(&threshold_pairs(t, threshold)?, k, rng),
            Self::Ttm => ttm(&build_hypergraph(t, threshold)?, k, rng),
            Self::Nhcut => nhcut(&build_hypergraph(t, threshold)?, k, rng),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TunedThreshold {
    pub threshold: f64,
    pub error: f64,
    pub solution: ClusteringSolution,
    /// Grid points where the clusterer could not run.
    pub skipped: usize,
}

/// Deciles 10%, ..., 100% of the sampled values (nearest rank).
pub fn default_grid(t: &DistanceTensor) -> Vec<f64> {
    let mut v = t.sampled_values();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return Vec::new();
    }
    let mut grid: Vec<f64> = (1..=10)
        .map(|q| v[((q * v.len()).div_ceil(10)).clamp(1, v.len()) - 1])
        .collect();
    grid.dedup();
    grid
}

/// Runs the clusterer at every grid threshold with the same seed and
/// returns the first threshold of minimal error. Thresholds at which the
/// affinity support is degenerate are skipped.
pub fn tune_threshold(
    t: &DistanceTensor,
    truth: &ClusteringSolution,
    clusterer: Clusterer,
    grid: Option<&[f64]>,
    seed: u64,
) -> Result<TunedThreshold> {
    let grid = grid.map(<[f64]>::to_vec).unwrap_or_else(|| default_grid(t));
    if grid.is_empty() {
        return Err(Error::invalid("empty threshold grid"));
    }
    let runs: Vec<Result<(f64, ClusteringSolution)>> = grid
        .par_iter()
        .map(|&th| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sol = clusterer.run(t, th, truth.k, &mut rng)?;
            Ok((clustering_error(&sol, truth)?, sol))
        })
        .collect();
    let mut best: Option<TunedThreshold> = None;
    let mut skipped = 0;
    let mut last_err = None;
    for (&th, run) in grid.iter().zip(runs) {
        match run {
            Ok((error, solution)) => {
                if best.as_ref().is_none_or(|b| error < b.error) {
                    best = Some(TunedThreshold {
                        threshold: th,
                        error,
                        solution,
                        skipped: 0,
                    });
                }
            }
            Err(e @ (Error::IsolatedVertices(_) | Error::DegenerateGraph(_) | Error::InvalidArgument(_))) => {
                skipped += 1;
                last_err = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    match best {
        Some(b) => Ok(TunedThreshold { skipped, ..b }),
        None => Err(last_err.expect("nonempty grid")),
    }
}
