//! Exact optimal transport over finite spaces: two-marginal, general
//! multi-marginal, pairwise multi-marginal, and barycenter costs. Every
//! problem is one LP over the dense product space.

use std::collections::BTreeMap;

use serde_json::json;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::lp::{self, LpProblem, LpStatus, SimplexOptions};
use crate::prob::{checked_size, for_each_index, Atom, DenseTensor, DiscreteDistribution, JointMass, DEFAULT_ENTRY_CAP};

/// Stand-in for an infinite ground cost.
pub const INF_COST: f64 = 1e15;
/// Optimal values above this are reported as effectively infinite.
pub const EFFECTIVELY_INFINITE: f64 = 1e12;

/// Ground costs `d^{i,j}` for every unordered pair of spaces.
#[derive(Clone, Debug)]
pub struct PairwiseCost {
    sizes: Vec<usize>,
    mats: BTreeMap<(usize, usize), DenseMatrix>,
}

impl PairwiseCost {
    pub fn new(sizes: Vec<usize>) -> Self {
        Self {
            sizes,
            mats: BTreeMap::new(),
        }
    }

    /// Stores `d^{i,j}`; `i > j` is accepted and stored transposed.
    pub fn insert(&mut self, i: usize, j: usize, d: DenseMatrix) -> Result<()> {
        if i == j || i >= self.sizes.len() || j >= self.sizes.len() {
            return Err(Error::invalid(format!("pair ({i},{j}) out of range")));
        }
        let (i, j, d) = if i < j { (i, j, d) } else { (j, i, d.transpose()) };
        if d.rows() != self.sizes[i] || d.cols() != self.sizes[j] {
            return Err(Error::shape(format!(
                "cost ({i},{j}) is {}x{}, expected {}x{}",
                d.rows(),
                d.cols(),
                self.sizes[i],
                self.sizes[j]
            )));
        }
        if d.data().iter().any(|&x| x < 0.0) {
            return Err(Error::invalid(format!("cost ({i},{j}) has a negative entry")));
        }
        self.mats.insert((i, j), d);
        Ok(())
    }

    /// Builds all pairs from a function of the two atoms.
    pub fn from_fn(
        dists: &[DiscreteDistribution],
        f: impl Fn(usize, usize, &Atom, &Atom) -> f64,
    ) -> Result<Self> {
        let mut c = Self::new(dists.iter().map(DiscreteDistribution::len).collect());
        for i in 0..dists.len() {
            for j in (i + 1)..dists.len() {
                let (a, b) = (dists[i].atoms(), dists[j].atoms());
                let m = DenseMatrix::new(
                    a.len(),
                    b.len(),
                    a.iter().flat_map(|x| b.iter().map(|y| f(i, j, x, y))).collect(),
                )?;
                c.insert(i, j, m)?;
            }
        }
        Ok(c)
    }

    /// Euclidean (or absolute, or complex-modulus) distances between atoms.
    pub fn euclidean(dists: &[DiscreteDistribution]) -> Result<Self> {
        for d in dists {
            if d.atoms().iter().any(|a| a.coords().is_none()) {
                return Err(Error::invalid("label atoms have no intrinsic distance"));
            }
        }
        Self::from_fn(dists, |_, _, x, y| x.distance(y).unwrap_or(f64::NAN))
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn pair(&self, i: usize, j: usize) -> Result<&DenseMatrix> {
        self.mats
            .get(&(i.min(j), i.max(j)))
            .ok_or_else(|| Error::invalid(format!("missing cost for pair ({i},{j})")))
    }

    /// `d^{i,j}_{s,t}` regardless of argument order.
    pub fn get(&self, i: usize, j: usize, s: usize, t: usize) -> Result<f64> {
        let m = self.pair(i, j)?;
        Ok(if i < j { m.get(s, t) } else { m.get(t, s) })
    }

    /// Restriction to the spaces in `idx`, renumbered in the given order.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        let mut c = Self::new(idx.iter().map(|&i| self.sizes[i]).collect());
        for a in 0..idx.len() {
            for b in (a + 1)..idx.len() {
                let (i, j) = (idx[a], idx[b]);
                let m = self.pair(i, j)?;
                c.insert(a, b, if i < j { m.clone() } else { m.transpose() })?;
            }
        }
        Ok(c)
    }
}

/// Nonnegative cost over a product space.
#[derive(Clone, Debug, PartialEq)]
pub struct CostTensor(DenseTensor);

impl CostTensor {
    pub fn new(t: DenseTensor) -> Result<Self> {
        if t.entries().iter().any(|x| x.is_nan() || *x < 0.0) {
            return Err(Error::invalid("cost tensor entries must be nonnegative numbers"));
        }
        Ok(Self(t.map(|x| x.min(INF_COST))))
    }

    pub fn from_fn(shape: Vec<usize>, cap: usize, f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        Self::new(DenseTensor::from_fn(shape, cap, f)?)
    }

    /// `sum_{a<b} d^{a,b}` over the product of all spaces in `d`.
    pub fn summed_pairwise(d: &PairwiseCost, cap: usize) -> Result<Self> {
        let n = d.len();
        let mut pairs = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                pairs.push((a, b, d.pair(a, b)?));
            }
        }
        Self::from_fn(d.sizes().to_vec(), cap, |idx| {
            pairs.iter().map(|(a, b, m)| m.get(idx[*a], idx[*b])).sum()
        })
    }

    pub fn tensor(&self) -> &DenseTensor {
        &self.0
    }

    pub fn shape(&self) -> &[usize] {
        self.0.shape()
    }
}

#[derive(Clone, Debug)]
pub struct TransportResult {
    pub value: f64,
    pub coupling: JointMass,
    pub per_pair_terms: Option<BTreeMap<(usize, usize), f64>>,
    /// Every coupling must use a cell of infinite cost.
    pub effectively_infinite: bool,
}

impl TransportResult {
    pub fn to_json(&self, include_coupling: bool) -> Result<String> {
        let terms = self.per_pair_terms.as_ref().map(|m| {
            m.iter()
                .map(|(&(i, j), &v)| json!({"i": i, "j": j, "value": v}))
                .collect::<Vec<_>>()
        });
        let mut v = json!({
            "value": self.value,
            "effectively_infinite": self.effectively_infinite,
            "per_pair_terms": terms,
        });
        if include_coupling {
            v["coupling"] = serde_json::to_value(&self.coupling)?;
        }
        Ok(serde_json::to_string(&v)?)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TransportOptions {
    pub entry_cap: usize,
    pub simplex: SimplexOptions,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self {
            entry_cap: DEFAULT_ENTRY_CAP,
            simplex: SimplexOptions::default(),
        }
    }
}

fn check_ell(ell: u32) -> Result<()> {
    if ell == 0 {
        Err(Error::invalid("exponent must be a positive integer"))
    } else {
        Ok(())
    }
}

/// Minimizes `sum cost * r` over joint masses with the given univariate
/// marginals. Returns the LP optimum and the optimal joint.
fn solve_coupling(
    masses: &[&[f64]],
    cost: &[f64],
    opts: &TransportOptions,
) -> Result<(f64, JointMass, bool)> {
    let shape: Vec<usize> = masses.iter().map(|m| m.len()).collect();
    let total = checked_size(&shape, opts.entry_cap).map_err(|e| match e {
        Error::EntryCap { entries, cap } => Error::InvalidArgument(format!(
            "product space has {entries} cells, above the cap of {cap}; use fewer or smaller distributions"
        )),
        e => e,
    })?;
    debug_assert_eq!(cost.len(), total);
    let finite: Vec<usize> = (0..total).filter(|&c| cost[c] < INF_COST).collect();
    if let Some((v, x)) = transport_lp(masses, &shape, cost, &finite, opts)? {
        return Ok((v, JointMass::from_solver(shape, x, 1e-9)?, false));
    }
    let all: Vec<usize> = (0..total).collect();
    match transport_lp(masses, &shape, cost, &all, opts)? {
        Some((v, x)) => Ok((v, JointMass::from_solver(shape, x, 1e-9)?, true)),
        None => Err(Error::Construction("transport LP over all cells reported infeasible".into())),
    }
}

/// Transport LP restricted to the cells in `cols`; `None` when infeasible.
fn transport_lp(
    masses: &[&[f64]],
    shape: &[usize],
    cost: &[f64],
    cols: &[usize],
    opts: &TransportOptions,
) -> Result<Option<(f64, Vec<f64>)>> {
    let total: usize = shape.iter().product();
    if cols.is_empty() {
        return Ok(None);
    }
    let offsets: Vec<usize> = shape
        .iter()
        .scan(0, |acc, &m| {
            let o = *acc;
            *acc += m;
            Some(o)
        })
        .collect();
    let rows: usize = shape.iter().sum();
    let ncols = cols.len();
    let mut a = vec![0.0; rows * ncols];
    let mut b = Vec::with_capacity(rows);
    for m in masses {
        b.extend_from_slice(m);
    }
    let mut col_of = vec![usize::MAX; total];
    for (k, &c) in cols.iter().enumerate() {
        col_of[c] = k;
    }
    let mut flat = 0;
    for_each_index(shape, |idx| {
        let k = col_of[flat];
        if k != usize::MAX {
            for (ax, &s) in idx.iter().enumerate() {
                a[(offsets[ax] + s) * ncols + k] = 1.0;
            }
        }
        flat += 1;
    });
    let c: Vec<f64> = cols.iter().map(|&j| cost[j]).collect();
    let sol = lp::solve_with(&LpProblem::new(c, a, b)?, &opts.simplex)?;
    match sol.status {
        LpStatus::Optimal => {
            let mut x = vec![0.0; total];
            for (k, &j) in cols.iter().enumerate() {
                x[j] = sol.x[k];
            }
            Ok(Some((sol.value, x)))
        }
        LpStatus::Infeasible => Ok(None),
        LpStatus::Unbounded => Err(Error::Construction("transport LP cannot be unbounded".into())),
    }
}

fn root(v: f64, ell: u32) -> f64 {
    let v = v.max(0.0);
    if ell == 1 {
        v
    } else {
        v.powf(1.0 / f64::from(ell))
    }
}

pub fn wasserstein(p1: &DiscreteDistribution, p2: &DiscreteDistribution, d: &DenseMatrix, ell: u32) -> Result<TransportResult> {
    if d.rows() != p1.len() || d.cols() != p2.len() {
        return Err(Error::shape(format!(
            "cost is {}x{}, distributions have {} and {} atoms",
            d.rows(),
            d.cols(),
            p1.len(),
            p2.len()
        )));
    }
    let cost = CostTensor::new(DenseTensor::new(vec![p1.len(), p2.len()], d.data().to_vec())?)?;
    mmot(&[p1.clone(), p2.clone()], &cost, ell)
}

pub fn mmot(dists: &[DiscreteDistribution], d: &CostTensor, ell: u32) -> Result<TransportResult> {
    mmot_with(dists, d, ell, &TransportOptions::default())
}

pub fn mmot_with(
    dists: &[DiscreteDistribution],
    d: &CostTensor,
    ell: u32,
    opts: &TransportOptions,
) -> Result<TransportResult> {
    check_ell(ell)?;
    let shape: Vec<usize> = dists.iter().map(DiscreteDistribution::len).collect();
    if d.shape() != shape.as_slice() {
        return Err(Error::shape(format!(
            "cost tensor shape {:?} does not match distributions {shape:?}",
            d.shape()
        )));
    }
    let cost: Vec<f64> = d
        .tensor()
        .entries()
        .iter()
        .map(|&x| if x >= INF_COST { INF_COST } else { x.powi(ell as i32) })
        .collect();
    let masses: Vec<&[f64]> = dists.iter().map(DiscreteDistribution::masses).collect();
    let (v, coupling, inf) = solve_coupling(&masses, &cost, opts)?;
    let value = if inf { v } else { root(v, ell) };
    Ok(TransportResult {
        value,
        coupling,
        per_pair_terms: None,
        effectively_infinite: inf || value > EFFECTIVELY_INFINITE,
    })
}

pub fn pairwise_mmot(dists: &[DiscreteDistribution], d: &PairwiseCost, ell: u32) -> Result<TransportResult> {
    pairwise_mmot_with(dists, d, ell, &TransportOptions::default())
}

pub fn pairwise_mmot_with(
    dists: &[DiscreteDistribution],
    d: &PairwiseCost,
    ell: u32,
    opts: &TransportOptions,
) -> Result<TransportResult> {
    if ell != 1 {
        return Err(Error::Unsupported(format!(
            "pairwise multi-marginal transport is only exact for ell = 1 (got {ell})"
        )));
    }
    if d.sizes() != dists.iter().map(DiscreteDistribution::len).collect::<Vec<_>>().as_slice() {
        return Err(Error::shape("pairwise cost sizes do not match the distributions"));
    }
    let n = dists.len();
    if n < 2 {
        return Err(Error::invalid("need at least two distributions"));
    }
    let cost = CostTensor::summed_pairwise(d, opts.entry_cap)?;
    let masses: Vec<&[f64]> = dists.iter().map(DiscreteDistribution::masses).collect();
    let (v, coupling, inf) = solve_coupling(&masses, cost.tensor().entries(), opts)?;
    let mut terms = BTreeMap::new();
    for a in 0..n {
        for b in (a + 1)..n {
            let r = coupling.marginal(&[a, b])?;
            let m = d.pair(a, b)?;
            let t: f64 = r.entries().iter().zip(m.data()).map(|(r, c)| r * c).sum();
            terms.insert((a, b), t);
        }
    }
    let value = if inf { v } else { terms.values().sum() };
    Ok(TransportResult {
        value,
        coupling,
        per_pair_terms: Some(terms),
        effectively_infinite: inf || value > EFFECTIVELY_INFINITE,
    })
}

/// Index of every atom of every distribution within `omega`.
fn locate(dists: &[DiscreteDistribution], omega: &[Atom]) -> Result<Vec<Vec<usize>>> {
    dists
        .iter()
        .enumerate()
        .map(|(i, p)| {
            p.atoms()
                .iter()
                .map(|a| {
                    omega
                        .iter()
                        .position(|w| w == a)
                        .ok_or_else(|| Error::invalid(format!("atom {a} of distribution {i} is not in the shared space")))
                })
                .collect()
        })
        .collect()
}

/// Cost `min_{w in omega} sum_s base(w^s, w)` over the product of the
/// distributions' atoms.
pub fn barycenter_cost(dists: &[DiscreteDistribution], omega: &[Atom], base: &DenseMatrix) -> Result<CostTensor> {
    if base.rows() != omega.len() || base.cols() != omega.len() {
        return Err(Error::shape("base cost must be square over the shared space"));
    }
    let pos = locate(dists, omega)?;
    let shape: Vec<usize> = dists.iter().map(DiscreteDistribution::len).collect();
    CostTensor::from_fn(shape, DEFAULT_ENTRY_CAP, |idx| {
        (0..omega.len())
            .map(|w| idx.iter().enumerate().map(|(i, &s)| base.get(pos[i][s], w)).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    })
}

pub fn barycenter_mmot(dists: &[DiscreteDistribution], omega: &[Atom], base: &DenseMatrix) -> Result<TransportResult> {
    mmot(dists, &barycenter_cost(dists, omega, base)?, 1)
}

/// `sum_{a<b} W(p^a, p^b)`, a lower bound on the pairwise value.
pub fn lower_bound_pairwise(dists: &[DiscreteDistribution], d: &PairwiseCost) -> Result<f64> {
    let mut total = 0.0;
    for a in 0..dists.len() {
        for b in (a + 1)..dists.len() {
            total += wasserstein(&dists[a], &dists[b], d.pair(a, b)?, 1)?.value;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reals(xs: &[f64], ms: &[f64]) -> DiscreteDistribution {
        DiscreteDistribution::new(xs.iter().map(|&x| Atom::Real(x)).collect(), ms.to_vec()).unwrap()
    }

    fn abs_cost(p: &DiscreteDistribution, q: &DiscreteDistribution) -> DenseMatrix {
        PairwiseCost::euclidean(&[p.clone(), q.clone()]).unwrap().pair(0, 1).unwrap().clone()
    }

    #[test]
    fn wasserstein_examples() {
        let p = reals(&[0.0, 1.0], &[0.5, 0.5]);
        assert_eq!(wasserstein(&p, &p, &abs_cost(&p, &p), 1).unwrap().value, 0.0);
        let x = reals(&[0.3], &[1.0]);
        let y = reals(&[2.0], &[1.0]);
        assert!((wasserstein(&x, &y, &abs_cost(&x, &y), 2).unwrap().value - 1.7).abs() < 1e-12);
        let q = reals(&[0.0, 2.0], &[0.5, 0.5]);
        assert!((wasserstein(&p, &q, &abs_cost(&p, &q), 1).unwrap().value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pairwise_rejects_higher_powers() {
        let p = reals(&[0.0], &[1.0]);
        let d = PairwiseCost::euclidean(&[p.clone(), p.clone()]).unwrap();
        assert!(matches!(pairwise_mmot(&[p.clone(), p], &d, 2), Err(Error::Unsupported(_))));
    }

    #[test]
    fn barycenter_of_three_points() {
        let omega: Vec<Atom> = [0.0, 1.0, 2.0].iter().map(|&x| Atom::Real(x)).collect();
        let base = DenseMatrix::from_fn(3, 3, |i, j| (i as f64 - j as f64).abs());
        let dists: Vec<_> = omega.iter().map(|a| DiscreteDistribution::point_mass(a.clone())).collect();
        assert!((barycenter_mmot(&dists, &omega, &base).unwrap().value - 2.0).abs() < 1e-12);
        let outside = vec![DiscreteDistribution::point_mass(Atom::Real(7.0))];
        assert!(barycenter_mmot(&outside, &omega, &base).is_err());
    }

    #[test]
    fn infinite_cells_are_avoided_or_flagged() {
        let p = reals(&[0.0, 1.0], &[0.5, 0.5]);
        let diag = CostTensor::new(DenseTensor::new(vec![2, 2], vec![0.0, INF_COST, INF_COST, 0.0]).unwrap()).unwrap();
        let r = mmot(&[p.clone(), p.clone()], &diag, 1).unwrap();
        assert!(!r.effectively_infinite && r.value.abs() < 1e-12);
        let q = reals(&[0.0, 1.0], &[0.25, 0.75]);
        let r = mmot(&[p, q], &diag, 1).unwrap();
        assert!(r.effectively_infinite && r.value > EFFECTIVELY_INFINITE);
    }

    #[test]
    fn json_emission() {
        let p = reals(&[0.0], &[1.0]);
        let d = PairwiseCost::euclidean(&[p.clone(), p.clone()]).unwrap();
        let r = pairwise_mmot(&[p.clone(), p], &d, 1).unwrap();
        let s = r.to_json(false).unwrap();
        assert_eq!(s, r#"{"effectively_infinite":false,"per_pair_terms":[{"i":0,"j":1,"value":0.0}],"value":0.0}"#);
        assert!(r.to_json(true).unwrap().contains("\"coupling\""));
    }
}
