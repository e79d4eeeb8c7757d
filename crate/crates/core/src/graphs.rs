//! Small undirected graphs with edge weights in {1, 2}: synthetic families,
//! random edge flips, degree pruning, non-backtracking operators, and their
//! spectra.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig_general, ComplexSpectrum, DenseMatrix};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    n: usize,
    /// row-major `n x n`, symmetric, zero diagonal
    adj: Vec<u8>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Self { n, adj: vec![0; n * n] }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn weight(&self, u: usize, v: usize) -> u8 {
        self.adj[u * self.n + v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.weight(u, v) > 0
    }

    pub fn set_edge(&mut self, u: usize, v: usize, w: u8) -> Result<()> {
        if u == v {
            return Err(Error::invalid(format!("self-loop at node {u}")));
        }
        if u >= self.n || v >= self.n {
            return Err(Error::invalid(format!("edge ({u},{v}) outside {} nodes", self.n)));
        }
        if w > 2 {
            return Err(Error::invalid(format!("edge weight {w} outside {{0,1,2}}")));
        }
        self.adj[u * self.n + v] = w;
        self.adj[v * self.n + u] = w;
        Ok(())
    }

    /// Edges `(u, v, w)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize, u8)> {
        let mut out = Vec::new();
        for u in 0..self.n {
            for v in (u + 1)..self.n {
                let w = self.weight(u, v);
                if w > 0 {
                    out.push((u, v, w));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().filter(|&&w| w > 0).count() / 2
    }

    pub fn degree(&self, u: usize) -> usize {
        (0..self.n).filter(|&v| self.has_edge(u, v)).count()
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|u| self.degree(u)).collect()
    }

    /// Node `u` of `self` becomes node `perm[u]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.n];
        if perm.len() != self.n || perm.iter().any(|&p| p >= self.n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::invalid("relabeling is not a permutation"));
        }
        let mut g = Self::empty(self.n);
        for (u, v, w) in self.edges() {
            g.set_edge(perm[u], perm[v], w)?;
        }
        Ok(g)
    }

    /// Simple complement; present edges of either weight are removed.
    pub fn complement(&self) -> Self {
        let mut g = Self::empty(self.n);
        for u in 0..self.n {
            for v in (u + 1)..self.n {
                if !self.has_edge(u, v) {
                    g.adj[u * self.n + v] = 1;
                    g.adj[v * self.n + u] = 1;
                }
            }
        }
        g
    }

    fn induced(&self, keep: &[usize]) -> Self {
        let mut g = Self::empty(keep.len());
        for (a, &u) in keep.iter().enumerate() {
            for (b, &v) in keep.iter().enumerate() {
                g.adj[a * keep.len() + b] = self.weight(u, v);
            }
        }
        g
    }

    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "u,v,weight")?;
        for (u, v, wt) in self.edges() {
            writeln!(w, "{u},{v},{wt}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GraphFamily {
    Complete { n: usize },
    CompleteBipartite { a: usize, b: usize },
    Cycle { n: usize },
    Hypercube { dim: usize },
    /// Ring of `n` nodes, each joined to all nodes within `k` hops.
    KhopLattice { n: usize, k: usize },
    /// Torus grid.
    Grid2dPeriodic { rows: usize, cols: usize },
    ErdosRenyi { n: usize, p: f64 },
}

impl GraphFamily {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Complete { .. } => "complete",
            Self::CompleteBipartite { .. } => "complete_bipartite",
            Self::Cycle { .. } => "cycle",
            Self::Hypercube { .. } => "hypercube",
            Self::KhopLattice { .. } => "khop_lattice",
            Self::Grid2dPeriodic { .. } => "grid2d_periodic",
            Self::ErdosRenyi { .. } => "erdos_renyi",
        }
    }

    /// The seven default families used by the clustering experiments.
    pub fn defaults() -> Vec<GraphFamily> {
        vec![
            Self::Complete { n: 10 },
            Self::CompleteBipartite { a: 5, b: 5 },
            Self::Cycle { n: 12 },
            Self::Hypercube { dim: 3 },
            Self::KhopLattice { n: 12, k: 2 },
            Self::Grid2dPeriodic { rows: 3, cols: 4 },
            Self::ErdosRenyi { n: 10, p: 0.4 },
        ]
    }
}

pub fn generate<R: Rng>(family: &GraphFamily, rng: &mut R) -> Result<Graph> {
    let bad = |msg: String| Err(Error::invalid(msg));
    match *family {
        GraphFamily::Complete { n } => {
            if n < 2 {
                return bad(format!("complete graph needs n >= 2, got {n}"));
            }
            let mut g = Graph::empty(n);
            for u in 0..n {
                for v in (u + 1)..n {
                    g.set_edge(u, v, 1)?;
                }
            }
            Ok(g)
        }
        GraphFamily::CompleteBipartite { a, b } => {
            if a == 0 || b == 0 {
                return bad("bipartite sides must be nonempty".into());
            }
            let mut g = Graph::empty(a + b);
            for u in 0..a {
                for v in a..a + b {
                    g.set_edge(u, v, 1)?;
                }
            }
            Ok(g)
        }
        GraphFamily::Cycle { n } => {
            if n < 3 {
                return bad(format!("cycle length must be at least 3, got {n}"));
            }
            let mut g = Graph::empty(n);
            for u in 0..n {
                g.set_edge(u, (u + 1) % n, 1)?;
            }
            Ok(g)
        }
        GraphFamily::Hypercube { dim } => {
            if dim == 0 || dim > 10 {
                return bad(format!("hypercube dimension must be in 1..=10, got {dim}"));
            }
            let n = 1usize << dim;
            let mut g = Graph::empty(n);
            for u in 0..n {
                for b in 0..dim {
                    let v = u ^ (1 << b);
                    if u < v {
                        g.set_edge(u, v, 1)?;
                    }
                }
            }
            Ok(g)
        }
        GraphFamily::KhopLattice { n, k } => {
            if k == 0 || n < 2 * k + 1 {
                return bad(format!("k-hop lattice needs k >= 1 and n >= 2k + 1, got n={n}, k={k}"));
            }
            let mut g = Graph::empty(n);
            for u in 0..n {
                for h in 1..=k {
                    g.set_edge(u, (u + h) % n, 1)?;
                }
            }
            Ok(g)
        }
        GraphFamily::Grid2dPeriodic { rows, cols } => {
            if rows < 3 || cols < 3 {
                return bad(format!("periodic grid needs both sides >= 3, got {rows}x{cols}"));
            }
            let mut g = Graph::empty(rows * cols);
            for r in 0..rows {
                for c in 0..cols {
                    let u = r * cols + c;
                    g.set_edge(u, r * cols + (c + 1) % cols, 1)?;
                    g.set_edge(u, ((r + 1) % rows) * cols + c, 1)?;
                }
            }
            Ok(g)
        }
        GraphFamily::ErdosRenyi { n, p } => {
            if n < 2 || !(0.0..=1.0).contains(&p) {
                return bad(format!("Erdos-Renyi needs n >= 2 and p in [0, 1], got n={n}, p={p}"));
            }
            let mut g = Graph::empty(n);
            for u in 0..n {
                for v in (u + 1)..n {
                    if rng.gen_bool(p) {
                        g.set_edge(u, v, 1)?;
                    }
                }
            }
            Ok(g)
        }
    }
}

/// Flips each node pair independently with probability `p`; edges flipped
/// in get weight 1. No pruning.
pub fn perturb<R: Rng>(g: &Graph, p: f64, rng: &mut R) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("flip probability {p} outside [0, 1]")));
    }
    let mut out = g.clone();
    for u in 0..g.n {
        for v in (u + 1)..g.n {
            if rng.gen_bool(p) {
                let w = if g.has_edge(u, v) { 0 } else { 1 };
                out.set_edge(u, v, w)?;
            }
        }
    }
    Ok(out)
}

/// [`perturb`] followed by [`prune_min_degree`] with `dmin = 1`.
pub fn perturb_and_prune<R: Rng>(g: &Graph, p: f64, rng: &mut R) -> Result<Graph> {
    prune_min_degree(&perturb(g, p, rng)?, 1)
}

/// Repeatedly removes nodes of degree below `dmin`; survivors keep their
/// relative order.
pub fn prune_min_degree(g: &Graph, dmin: usize) -> Result<Graph> {
    let mut alive = vec![true; g.n];
    loop {
        let drop: Vec<usize> = (0..g.n)
            .filter(|&u| alive[u] && (0..g.n).filter(|&v| alive[v] && g.has_edge(u, v)).count() < dmin)
            .collect();
        if drop.is_empty() {
            break;
        }
        for u in drop {
            alive[u] = false;
        }
    }
    let keep: Vec<usize> = (0..g.n).filter(|&u| alive[u]).collect();
    if keep.is_empty() {
        return Err(Error::DegenerateGraph(format!("no node survives pruning at minimum degree {dmin}")));
    }
    Ok(g.induced(&keep))
}

/// Operator on the `2|E|` directed edges: `(u→v, x→y)` is 1 iff `v = x` and
/// `y ≠ u`. Edge `k` of [`Graph::edges`] yields directed edges `2k` (low to
/// high) and `2k + 1`. Weights are ignored.
pub fn nonbacktracking_matrix(g: &Graph) -> Result<DenseMatrix> {
    let edges = g.edges();
    if edges.is_empty() {
        return Err(Error::DegenerateGraph("graph has no edges".into()));
    }
    let directed: Vec<(usize, usize)> = edges.iter().flat_map(|&(u, v, _)| [(u, v), (v, u)]).collect();
    let mut by_tail: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, &(x, _)) in directed.iter().enumerate() {
        by_tail.entry(x).or_default().push(k);
    }
    let m = directed.len();
    let mut b = DenseMatrix::zeros(m, m);
    for (a, &(u, v)) in directed.iter().enumerate() {
        for &c in by_tail.get(&v).into_iter().flatten() {
            if directed[c].1 != u {
                b.set(a, c, 1.0);
            }
        }
    }
    Ok(b)
}

/// The `top_k` largest-modulus eigenvalues of the non-backtracking matrix.
pub fn signature(g: &Graph, top_k: usize) -> Result<ComplexSpectrum> {
    if top_k == 0 {
        return Err(Error::invalid("top_k must be at least 1"));
    }
    Ok(eig_general(&nonbacktracking_matrix(g)?)?.truncated(top_k))
}

/// Reads an edge list `u,v,weight` (weights 1 or 2, optional header).
pub fn load_graph(path: &Path) -> Result<Graph> {
    parse_edge_list(File::open(path)?, path)
}

pub fn parse_edge_list<R: Read>(r: R, path: &Path) -> Result<Graph> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut edges: BTreeMap<(usize, usize), u8> = BTreeMap::new();
    let mut n = 0;
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if lineno == 1 && fields.first().is_some_and(|f| f.parse::<usize>().is_err()) {
            continue;
        }
        if fields.len() != 3 {
            return Err(err(lineno, format!("expected u,v,weight, found {} fields", fields.len())));
        }
        let num = |f: &str, what: &str| f.parse::<usize>().map_err(|e| err(lineno, format!("{what} {f:?}: {e}")));
        let (u, v, w) = (num(fields[0], "node")?, num(fields[1], "node")?, num(fields[2], "weight")?);
        if u == v {
            return Err(err(lineno, format!("self-loop at node {u}")));
        }
        if !(1..=2).contains(&w) {
            return Err(err(lineno, format!("weight {w} outside {{1,2}}")));
        }
        let key = (u.min(v), u.max(v));
        if let Some(&old) = edges.get(&key) {
            if usize::from(old) != w {
                return Err(err(lineno, format!("edge ({u},{v}) repeated with weight {w}, earlier {old}")));
            }
        }
        edges.insert(key, w as u8);
        n = n.max(u + 1).max(v + 1);
    }
    if edges.is_empty() {
        return Err(err(1, "no edges".into()));
    }
    let mut g = Graph::empty(n);
    for ((u, v), w) in edges {
        g.set_edge(u, v, w)?;
    }
    Ok(g)
}

/// One graph of a corpus and how it was obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub graph_id: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub family: Option<GraphFamily>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub source: Option<String>,
    pub seed: u64,
    /// Ground-truth cluster.
    pub label: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn family_sizes() {
        let g = generate(&GraphFamily::Complete { n: 4 }, &mut rng()).unwrap();
        assert_eq!(g.edge_count(), 6);
        let g = generate(&GraphFamily::Hypercube { dim: 3 }, &mut rng()).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (8, 12));
        let g = generate(&GraphFamily::Cycle { n: 5 }, &mut rng()).unwrap();
        assert_eq!(g.edge_count(), 5);
        assert!(g.degrees().iter().all(|&d| d == 2));
        assert!(generate(&GraphFamily::Cycle { n: 2 }, &mut rng()).is_err());
        let g = generate(&GraphFamily::Grid2dPeriodic { rows: 3, cols: 4 }, &mut rng()).unwrap();
        assert_eq!(g.edge_count(), 24);
    }

    #[test]
    fn perturb_extremes() {
        let g = generate(&GraphFamily::Cycle { n: 6 }, &mut rng()).unwrap();
        assert_eq!(perturb(&g, 0.0, &mut rng()).unwrap(), g);
        assert_eq!(perturb(&g, 1.0, &mut rng()).unwrap(), g.complement());
    }

    #[test]
    fn pruning() {
        let k4 = generate(&GraphFamily::Complete { n: 4 }, &mut rng()).unwrap();
        assert_eq!(prune_min_degree(&k4, 1).unwrap(), k4);
        let mut star = Graph::empty(5);
        for v in 1..4 {
            star.set_edge(0, v, 1).unwrap();
        }
        assert_eq!(prune_min_degree(&star, 1).unwrap().node_count(), 4);
        let mut p3 = Graph::empty(3);
        p3.set_edge(0, 1, 1).unwrap();
        p3.set_edge(1, 2, 1).unwrap();
        assert!(matches!(prune_min_degree(&p3, 2), Err(Error::DegenerateGraph(_))));
    }

    #[test]
    fn nonbacktracking_examples() {
        let mut p2 = Graph::empty(2);
        p2.set_edge(0, 1, 1).unwrap();
        let b = nonbacktracking_matrix(&p2).unwrap();
        assert!(b.data().iter().all(|&x| x == 0.0));
        let c3 = generate(&GraphFamily::Cycle { n: 3 }, &mut rng()).unwrap();
        let s = signature(&c3, 16).unwrap();
        assert_eq!(s.len(), 6);
        let h = 3f64.sqrt() / 2.0;
        let want = [(1.0, 0.0), (1.0, 0.0), (-0.5, h), (-0.5, h), (-0.5, -h), (-0.5, -h)];
        for (z, (re, im)) in s.values().iter().zip(want) {
            assert!((z - Complex64::new(re, im)).norm() < 1e-8, "{z}");
        }
    }

    #[test]
    fn edge_list_parsing() {
        let p = Path::new("mem.csv");
        let g = parse_edge_list("0,1,1\n1,2,2\n".as_bytes(), p).unwrap();
        assert_eq!(g.weight(1, 2), 2);
        assert_eq!(g.edge_count(), 2);
        assert!(parse_edge_list("".as_bytes(), p).is_err());
        match parse_edge_list("u,v,weight\n0,1,1\n1,0,2\n".as_bytes(), p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(parse_edge_list("0,0,1\n".as_bytes(), p).is_err());
        assert!(parse_edge_list("0,1,3\n".as_bytes(), p).is_err());
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        assert_eq!(parse_edge_list(buf.as_slice(), p).unwrap(), g);
    }
}
