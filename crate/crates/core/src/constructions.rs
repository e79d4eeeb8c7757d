//! Two explicit instances: a planar triangle-area cost whose transport value
//! breaks the generalized triangle inequality, and a collinear family with
//! diagonal-only finite costs that attains the upper bound on the constant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::metric::{check_n_metric_cost, MetricReport};
use crate::prob::{Atom, DiscreteDistribution, DEFAULT_ENTRY_CAP};
use crate::transport::{mmot, pairwise_mmot, CostTensor, PairwiseCost, INF_COST};

/// Area of the triangle spanned by three planar points.
pub fn triangle_area(p: (f64, f64), q: (f64, f64), r: (f64, f64)) -> f64 {
    ((q.0 - p.0) * (r.1 - p.1) - (q.1 - p.1) * (r.0 - p.0)).abs() / 2.0
}

/// 0 if all three atoms coincide, `gamma` if exactly two do, the triangle
/// area otherwise.
pub fn area_cost(x: &Atom, y: &Atom, z: &Atom, gamma: f64) -> f64 {
    let equal = [x == y, y == z, x == z];
    match equal.iter().filter(|&&e| e).count() {
        3 => 0.0,
        0 => {
            let c = |a: &Atom| a.coords().expect("planar atom");
            triangle_area(c(x), c(y), c(z))
        }
        _ => gamma,
    }
}

/// Triangle-area cost over the product of three distributions' atoms.
pub fn triangle_area_cost(dists: [&DiscreteDistribution; 3], gamma: f64) -> Result<CostTensor> {
    let shape = dists.iter().map(|d| d.len()).collect();
    CostTensor::from_fn(shape, DEFAULT_ENTRY_CAP, |idx| {
        area_cost(&dists[0].atoms()[idx[0]], &dists[1].atoms()[idx[1]], &dists[2].atoms()[idx[2]], gamma)
    })
}

/// Smallest positive triangle area among distinct atoms (`None` for fewer
/// than three non-collinear atoms).
pub fn min_positive_area(atoms: &[Atom]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = atoms.iter().filter_map(Atom::coords).collect();
    let mut best: Option<f64> = None;
    for a in 0..pts.len() {
        for b in (a + 1)..pts.len() {
            for c in (b + 1)..pts.len() {
                let v = triangle_area(pts[a], pts[b], pts[c]);
                if v > 1e-12 {
                    best = Some(best.map_or(v, |m| m.min(v)));
                }
            }
        }
    }
    best
}

/// Six planar points and four distributions on them: a point mass at the
/// first point, a point mass at the second, uniform on points 3-4, and
/// uniform on points 5-6.
#[derive(Clone, Debug)]
pub struct PlanarInstance {
    pub epsilon: f64,
    pub gamma: f64,
    pub points: Vec<Atom>,
    pub distributions: Vec<DiscreteDistribution>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Values {
    pub epsilon: f64,
    pub gamma: f64,
    pub w123: f64,
    pub w124: f64,
    pub w134: f64,
    pub w234: f64,
    /// `w123 - (w124 + w134 + w234)`; positive means violated.
    pub violation_margin: f64,
}

impl PlanarInstance {
    /// Transport value among three of the four distributions (0-based).
    pub fn w(&self, idx: [usize; 3]) -> Result<f64> {
        let d = idx.map(|i| &self.distributions[i]);
        let cost = triangle_area_cost(d, self.gamma)?;
        Ok(mmot(&[d[0].clone(), d[1].clone(), d[2].clone()], &cost, 1)?.value)
    }

    pub fn values(&self) -> Result<Theorem2Values> {
        let w123 = self.w([0, 1, 2])?;
        let w124 = self.w([0, 1, 3])?;
        let w134 = self.w([0, 2, 3])?;
        let w234 = self.w([1, 2, 3])?;
        Ok(Theorem2Values {
            epsilon: self.epsilon,
            gamma: self.gamma,
            w123,
            w124,
            w134,
            w234,
            violation_margin: w123 - (w124 + w134 + w234),
        })
    }

    /// Exhaustive `(3, 1)`-metric audit of the area cost over the six points.
    pub fn audit_cost(&self) -> MetricReport {
        let spaces = vec![self.points.clone()];
        let pts = &self.points;
        let gamma = self.gamma;
        check_n_metric_cost(&spaces, 3, 1.0, |_, at| area_cost(&pts[at[0]], &pts[at[1]], &pts[at[2]], gamma))
    }
}

/// Unvalidated layout for a given `epsilon` and `gamma`.
pub fn planar_layout(epsilon: f64, gamma: f64) -> Result<PlanarInstance> {
    if !(epsilon > 0.0 && epsilon <= 0.1) {
        return Err(Error::invalid(format!("epsilon = {epsilon} outside (0, 0.1]")));
    }
    let e = epsilon;
    let points = vec![
        Atom::Point(0.0, 0.0),
        Atom::Point(1.0, 0.0),
        Atom::Point(-4.0 * e, 1.0),
        Atom::Point(1.0 + 4.0 * e, 1.0),
        Atom::Point(0.5, e),
        Atom::Point(0.5, 0.5 - e),
    ];
    let distributions = vec![
        DiscreteDistribution::point_mass(points[0].clone()),
        DiscreteDistribution::point_mass(points[1].clone()),
        DiscreteDistribution::uniform(points[2..4].to_vec())?,
        DiscreteDistribution::uniform(points[4..6].to_vec())?,
    ];
    Ok(PlanarInstance {
        epsilon,
        gamma,
        points,
        distributions,
    })
}

/// The planar counterexample with `gamma = epsilon / 4`, validated by
/// solving all four transport problems against their closed forms.
pub fn theorem2_instance(epsilon: f64) -> Result<PlanarInstance> {
    let inst = planar_layout(epsilon, epsilon / 4.0)?;
    let min_area = min_positive_area(&inst.points).unwrap_or(0.0);
    if inst.gamma > min_area {
        return Err(Error::Construction(format!(
            "gamma {} exceeds the smallest triangle area {min_area}",
            inst.gamma
        )));
    }
    let v = inst.values()?;
    let want = [0.5, 0.125, 0.125 + epsilon / 4.0, 0.125 + epsilon / 4.0];
    let got = [v.w123, v.w124, v.w134, v.w234];
    if got.iter().zip(want).any(|(g, w)| (g - w).abs() > 1e-8) {
        return Err(Error::Construction(format!("layout gives {got:?}, expected {want:?}")));
    }
    Ok(inst)
}

/// Collinear instance with `m` atoms `c_i + s` per space, uniform masses,
/// cost `|x - y|` between equally indexed atoms and infinite otherwise.
#[derive(Clone, Debug)]
pub struct AppendixE {
    pub offsets: Vec<f64>,
    pub m: usize,
    pub ell: u32,
    pub distributions: Vec<DiscreteDistribution>,
    pub cost: PairwiseCost,
}

pub fn appendix_e_instance(offsets: &[f64], m: usize, ell: u32) -> Result<AppendixE> {
    if offsets.len() < 3 || m < 2 || ell == 0 {
        return Err(Error::invalid("need at least three spaces, two atoms each, and ell >= 1"));
    }
    let distributions: Vec<DiscreteDistribution> = offsets
        .iter()
        .map(|&c| DiscreteDistribution::uniform((0..m).map(|s| Atom::Real(c + s as f64)).collect()))
        .collect::<Result<_>>()?;
    let mut cost = PairwiseCost::new(vec![m; offsets.len()]);
    for i in 0..offsets.len() {
        for j in (i + 1)..offsets.len() {
            let mat = DenseMatrix::from_fn(m, m, |s, t| {
                if s == t {
                    (offsets[i] - offsets[j]).abs()
                } else {
                    INF_COST
                }
            });
            cost.insert(i, j, mat)?;
        }
    }
    Ok(AppendixE {
        offsets: offsets.to_vec(),
        m,
        ell,
        distributions,
        cost,
    })
}

impl AppendixE {
    /// Pairwise value over the spaces in `idx`: the only finite coupling is
    /// diagonal, so the LP fixes it and each pair term is evaluated with
    /// exponent `ell`.
    pub fn value(&self, idx: &[usize]) -> Result<f64> {
        let dists: Vec<DiscreteDistribution> = idx.iter().map(|&i| self.distributions[i].clone()).collect();
        let cost = self.cost.select(idx)?;
        let r = pairwise_mmot(&dists, &cost, 1)?;
        if r.effectively_infinite {
            return Err(Error::Construction("diagonal coupling was not found".into()));
        }
        let mut total = 0.0;
        for a in 0..idx.len() {
            for b in (a + 1)..idx.len() {
                let marg = r.coupling.marginal(&[a, b])?;
                let d = cost.pair(a, b)?;
                let t: f64 = marg
                    .entries()
                    .iter()
                    .zip(d.data())
                    .filter(|(&p, _)| p > 0.0)
                    .map(|(p, c)| c.powi(self.ell as i32) * p)
                    .sum();
                total += t.powf(1.0 / f64::from(self.ell));
            }
        }
        Ok(total)
    }

    /// Closed form `sum_{i<j} (1/m)^{1/ell} * ||X^i - X^j||_ell`.
    pub fn closed_form(&self, idx: &[usize]) -> f64 {
        let l = f64::from(self.ell);
        let mut total = 0.0;
        for a in 0..idx.len() {
            for b in (a + 1)..idx.len() {
                let gap = (self.offsets[idx[a]] - self.offsets[idx[b]]).abs();
                let norm = (self.m as f64 * gap.powf(l)).powf(1.0 / l);
                total += (1.0 / self.m as f64).powf(1.0 / l) * norm;
            }
        }
        total
    }

    /// Minimum over roles of (sum of leave-one-out values) / (base value)
    /// across all spaces of the instance, which must number `n + 1`.
    pub fn empirical_c(&self) -> Result<Option<f64>> {
        let k = self.offsets.len();
        let faces: Vec<Vec<usize>> = (0..k).map(|r| (0..k).filter(|&q| q != r).collect()).collect();
        let vals: Vec<f64> = faces.iter().map(|f| self.value(f)).collect::<Result<_>>()?;
        let total: f64 = vals.iter().sum();
        let mut best: Option<f64> = None;
        for &v in &vals {
            if v > crate::metric::ZERO_TOL {
                let ratio = (total - v) / v;
                best = Some(best.map_or(ratio, |b| b.min(ratio)));
            }
        }
        Ok(best)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExtremalSearch {
    pub offsets: Vec<f64>,
    pub empirical_c: f64,
    pub evaluated: usize,
}

/// Exhaustive search over offsets `c_0 = 0, c_i in {0, h, .., levels*h}`
/// for the configuration minimizing the empirical constant.
pub fn search_extremal(n: usize, m: usize, levels: usize, h: f64) -> Result<ExtremalSearch> {
    let mut best: Option<ExtremalSearch> = None;
    let mut evaluated = 0;
    let shape = vec![levels + 1; n];
    let mut configs = Vec::new();
    crate::prob::for_each_index(&shape, |idx| configs.push(idx.to_vec()));
    for idx in configs {
        let mut offsets = vec![0.0];
        offsets.extend(idx.iter().map(|&q| q as f64 * h));
        let inst = appendix_e_instance(&offsets, m, 1)?;
        evaluated += 1;
        if let Some(c) = inst.empirical_c()? {
            if best.as_ref().is_none_or(|b| c < b.empirical_c) {
                best = Some(ExtremalSearch {
                    offsets,
                    empirical_c: c,
                    evaluated: 0,
                });
            }
        }
    }
    let mut best = best.ok_or_else(|| Error::Construction("no configuration with a positive value".into()))?;
    best.evaluated = evaluated;
    Ok(best)
}
