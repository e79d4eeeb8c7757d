//! Generalized-metric audits: pairwise and n-way ground costs, sampled
//! distance tensors, violation injection, and the gluing feasibility system.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{self, Feasibility};
use crate::prob::{for_each_index, Atom, JointMass, MASS_TOL};

/// Value reported for tuples that were never computed.
pub const SENTINEL: f64 = 1e9;
/// Denominators at or below this are left out of the empirical constant.
pub const ZERO_TOL: f64 = 1e-12;

/// Symmetric k-way distances over `n` objects, stored once per strictly
/// increasing index tuple. Only sampled tuples hold values.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceTensor {
    order: usize,
    n: usize,
    values: BTreeMap<Vec<usize>, f64>,
    modified: BTreeSet<Vec<usize>>,
}

impl DistanceTensor {
    pub fn new(order: usize, n: usize) -> Result<Self> {
        if !(2..=3).contains(&order) {
            return Err(Error::invalid(format!("tensor order must be 2 or 3, got {order}")));
        }
        if n < order {
            return Err(Error::invalid(format!("{n} objects cannot fill an order-{order} tensor")));
        }
        Ok(Self {
            order,
            n,
            values: BTreeMap::new(),
            modified: BTreeSet::new(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn size(&self) -> usize {
        self.n
    }

    fn key(&self, tuple: &[usize]) -> Result<Vec<usize>> {
        let mut k = tuple.to_vec();
        k.sort_unstable();
        if k.len() != self.order || k.windows(2).any(|w| w[0] == w[1]) || k.last().is_some_and(|&x| x >= self.n) {
            return Err(Error::invalid(format!(
                "{tuple:?} is not a tuple of {} distinct indices below {}",
                self.order, self.n
            )));
        }
        Ok(k)
    }

    /// Records a computed value; the tuple may be given in any order.
    pub fn set(&mut self, tuple: &[usize], value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::NonFinite("distance value"));
        }
        let k = self.key(tuple)?;
        self.values.insert(k, value);
        Ok(())
    }

    /// Stored value, or [`SENTINEL`] for unsampled tuples.
    pub fn get(&self, tuple: &[usize]) -> f64 {
        self.value(tuple).unwrap_or(SENTINEL)
    }

    pub fn value(&self, tuple: &[usize]) -> Option<f64> {
        let mut k = tuple.to_vec();
        k.sort_unstable();
        self.values.get(&k).copied()
    }

    pub fn is_sampled(&self, tuple: &[usize]) -> bool {
        self.value(tuple).is_some()
    }

    pub fn sampled(&self) -> impl Iterator<Item = (&[usize], f64)> {
        self.values.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    pub fn sampled_count(&self) -> usize {
        self.values.len()
    }

    pub fn modified(&self) -> &BTreeSet<Vec<usize>> {
        &self.modified
    }

    pub fn is_modified(&self, tuple: &[usize]) -> bool {
        let mut k = tuple.to_vec();
        k.sort_unstable();
        self.modified.contains(&k)
    }

    /// Sampled values in key order.
    pub fn sampled_values(&self) -> Vec<f64> {
        self.values.values().copied().collect()
    }

    /// Writes every tuple as `i,j[,k],value,sampled_flag` where the flag is
    /// 0 (unsampled, sentinel value), 1 (sampled) or 2 (sampled, modified).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header: Vec<&str> = ["i", "j", "k"][..self.order].to_vec();
        header.extend(["value", "sampled_flag"]);
        wr.write_record(&header)?;
        for t in combinations(self.n, self.order) {
            let flag = match self.values.get(&t) {
                None => 0,
                Some(_) if self.modified.contains(&t) => 2,
                Some(_) => 1,
            };
            let mut rec: Vec<String> = t.iter().map(usize::to_string).collect();
            rec.push(format_value(self.get(&t)));
            rec.push(flag.to_string());
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::invalid(e.to_string()))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let path = std::path::PathBuf::from("<tensor>");
        let mut rd = csv::Reader::from_reader(r);
        let order = match rd.headers()?.len() {
            4 => 2,
            5 => 3,
            c => {
                return Err(Error::Parse {
                    path,
                    line: 1,
                    msg: format!("expected 4 or 5 columns, found {c}"),
                })
            }
        };
        let mut rows = Vec::new();
        let mut n = 0;
        for (i, rec) in rd.records().enumerate() {
            let line = i + 2;
            let rec = rec?;
            let bad = |msg: String| Error::Parse {
                path: path.clone(),
                line,
                msg,
            };
            if rec.len() != order + 2 {
                return Err(bad(format!("expected {} fields", order + 2)));
            }
            let idx: Vec<usize> = rec
                .iter()
                .take(order)
                .map(|f| f.trim().parse().map_err(|e| bad(format!("index {f:?}: {e}"))))
                .collect::<Result<_>>()?;
            let v: f64 = rec[order].trim().parse().map_err(|e| bad(format!("value: {e}")))?;
            let flag: u8 = rec[order + 1].trim().parse().map_err(|e| bad(format!("flag: {e}")))?;
            if flag > 2 {
                return Err(bad(format!("sampled_flag must be 0, 1 or 2, got {flag}")));
            }
            n = n.max(idx.iter().max().map_or(0, |m| m + 1));
            rows.push((idx, v, flag, line));
        }
        if rows.is_empty() {
            return Err(Error::Parse {
                path,
                line: 1,
                msg: "no tensor entries".into(),
            });
        }
        let mut t = Self::new(order, n)?;
        for (idx, v, flag, line) in rows {
            if flag > 0 {
                t.set(&idx, v).map_err(|e| Error::Parse {
                    path: path.clone(),
                    line,
                    msg: e.to_string(),
                })?;
                if flag == 2 {
                    t.modified.insert(t.key(&idx)?);
                }
            }
        }
        Ok(t)
    }
}

/// Shortest decimal that round-trips to the same double.
fn format_value(v: f64) -> String {
    format!("{v:?}")
}

/// All strictly increasing `k`-tuples below `n`, in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        out.push(c.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if c[i] < n - k + i {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        c[i] += 1;
        for j in (i + 1)..k {
            c[j] = c[j - 1] + 1;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub property: String,
    pub tuple: Vec<usize>,
    /// How far the inequality or identity is missed (positive).
    pub margin: f64,
}

/// Outcome of a metric audit. Property flags are `None` when the audit
/// could not evaluate that property.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub nonnegativity: Option<bool>,
    pub identity: Option<bool>,
    pub symmetry: Option<bool>,
    pub triangle: Option<bool>,
    pub violations: Vec<Violation>,
    pub empirical_c: Option<f64>,
    pub audited: usize,
}

impl MetricReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn record(&mut self, property: &str, tuple: Vec<usize>, margin: f64) {
        self.violations.push(Violation {
            property: property.into(),
            tuple,
            margin,
        });
    }

    fn finish(&mut self) {
        let has = |p: &str| self.violations.iter().any(|v| v.property == p);
        let flag = |cur: Option<bool>, bad: bool| cur.map(|_| !bad);
        self.nonnegativity = flag(self.nonnegativity, has("nonnegativity"));
        self.identity = flag(self.identity, has("identity"));
        self.symmetry = flag(self.symmetry, has("symmetry"));
        self.triangle = flag(self.triangle, has("triangle"));
    }

    fn observe_ratio(&mut self, ratio: f64) {
        self.empirical_c = Some(self.empirical_c.map_or(ratio, |c| c.min(ratio)));
    }
}

fn all_checked() -> MetricReport {
    MetricReport {
        nonnegativity: Some(true),
        identity: Some(true),
        symmetry: Some(true),
        triangle: Some(true),
        ..Default::default()
    }
}

/// Exhaustive two-argument metric audit. `spaces[i]` lists the atoms of
/// space `i`; `d(i, j, s, t)` is the cost between atom `s` of space `i` and
/// atom `t` of space `j`. Violation tuples are `[i, s, j, t(, k, u)]`.
pub fn check_metric(spaces: &[Vec<Atom>], d: impl Fn(usize, usize, usize, usize) -> f64) -> MetricReport {
    let mut rep = all_checked();
    let ns = spaces.len();
    for i in 0..ns {
        for j in 0..ns {
            for (s, x) in spaces[i].iter().enumerate() {
                for (t, y) in spaces[j].iter().enumerate() {
                    let v = d(i, j, s, t);
                    rep.audited += 1;
                    if v < 0.0 {
                        rep.record("nonnegativity", vec![i, s, j, t], -v);
                    }
                    let back = d(j, i, t, s);
                    if (v - back).abs() > ZERO_TOL * (1.0 + v.abs()) {
                        rep.record("symmetry", vec![i, s, j, t], (v - back).abs());
                    }
                    if (v.abs() <= ZERO_TOL) != (x == y) {
                        rep.record("identity", vec![i, s, j, t], v.abs());
                    }
                    for k in 0..ns {
                        for u in 0..spaces[k].len() {
                            let slack = d(i, k, s, u) + d(k, j, u, t) - v;
                            if slack < -ZERO_TOL * (1.0 + v.abs()) {
                                rep.record("triangle", vec![i, s, j, t, k, u], -slack);
                            }
                        }
                    }
                }
            }
        }
    }
    rep.finish();
    rep
}

/// Exhaustive `(n, c)`-metric audit of an n-argument cost family.
/// `d(spaces, atoms)` evaluates the cost of the given atoms drawn from the
/// given spaces. Violation tuples interleave `[space, atom, space, atom, ..]`.
pub fn check_n_metric_cost(
    spaces: &[Vec<Atom>],
    n: usize,
    c: f64,
    d: impl Fn(&[usize], &[usize]) -> f64,
) -> MetricReport {
    let mut rep = all_checked();
    let ns = spaces.len();
    let perms = permutations(n);
    for_each_index(&vec![ns; n + 1], |sp| {
        let sizes: Vec<usize> = sp.iter().map(|&i| spaces[i].len()).collect();
        for_each_index(&sizes, |at| {
            rep.audited += 1;
            let tag = || sp.iter().zip(at).flat_map(|(&a, &b)| [a, b]).collect::<Vec<_>>();
            let base = d(&sp[..n], &at[..n]);
            if base < 0.0 {
                rep.record("nonnegativity", tag(), -base);
            }
            for p in &perms {
                let ps: Vec<usize> = p.iter().map(|&r| sp[r]).collect();
                let pa: Vec<usize> = p.iter().map(|&r| at[r]).collect();
                let v = d(&ps, &pa);
                if (v - base).abs() > ZERO_TOL * (1.0 + base.abs()) {
                    rep.record("symmetry", tag(), (v - base).abs());
                    break;
                }
            }
            let first = &spaces[sp[0]][at[0]];
            let all_equal = (1..n).all(|r| &spaces[sp[r]][at[r]] == first);
            if (base.abs() <= ZERO_TOL) != all_equal {
                rep.record("identity", tag(), base.abs());
            }
            let mut sum = 0.0;
            for r in 0..n {
                let keep: Vec<usize> = (0..=n).filter(|&q| q != r).collect();
                let ks: Vec<usize> = keep.iter().map(|&q| sp[q]).collect();
                let ka: Vec<usize> = keep.iter().map(|&q| at[q]).collect();
                sum += d(&ks, &ka);
            }
            if c * base > sum + ZERO_TOL * (1.0 + sum.abs()) {
                rep.record("triangle", tag(), c * base - sum);
            }
            if base > ZERO_TOL {
                rep.observe_ratio(sum / base);
            }
        });
    });
    rep.finish();
    rep
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    heap_permute(n, &mut p, &mut out);
    out
}

fn heap_permute(k: usize, p: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        out.push(p.clone());
        return;
    }
    for i in 0..k - 1 {
        heap_permute(k - 1, p, out);
        if k.is_multiple_of(2) {
            p.swap(i, k - 1);
        } else {
            p.swap(0, k - 1);
        }
    }
    heap_permute(k - 1, p, out);
}

/// All `(order+1)`-subsets whose leave-one-out tuples are all sampled.
pub fn complete_subsets(t: &DistanceTensor) -> Vec<Vec<usize>> {
    let mut found = BTreeSet::new();
    for (key, _) in t.sampled() {
        for extra in 0..t.n {
            if key.contains(&extra) {
                continue;
            }
            let mut s = key.to_vec();
            s.push(extra);
            s.sort_unstable();
            if leave_one_out(&s).iter().all(|f| t.is_sampled(f)) {
                found.insert(s);
            }
        }
    }
    found.into_iter().collect()
}

fn leave_one_out(s: &[usize]) -> Vec<Vec<usize>> {
    (0..s.len())
        .map(|r| s.iter().enumerate().filter(|&(q, _)| q != r).map(|(_, &x)| x).collect())
        .collect()
}

/// Generalized triangle audit over every fully sampled subset, in every
/// leave-one-out role. Violation tuples list the target first, then the
/// extra index.
pub fn check_w_tensor(t: &DistanceTensor, c: f64) -> MetricReport {
    let mut rep = MetricReport {
        nonnegativity: Some(true),
        symmetry: Some(true),
        triangle: Some(true),
        ..Default::default()
    };
    for (k, v) in t.sampled() {
        if v < 0.0 {
            rep.record("nonnegativity", k.to_vec(), -v);
        }
    }
    for s in complete_subsets(t) {
        rep.audited += 1;
        let faces = leave_one_out(&s);
        let vals: Vec<f64> = faces.iter().map(|f| t.get(f)).collect();
        let total: f64 = vals.iter().sum();
        for (r, f) in faces.iter().enumerate() {
            let target = vals[r];
            let others = total - target;
            if c * target > others + 1e-12 * (1.0 + others.abs()) {
                let mut tag = f.clone();
                tag.push(s[r]);
                rep.record("triangle", tag, c * target - others);
            }
            if target > ZERO_TOL {
                rep.observe_ratio(others / target);
            }
        }
    }
    rep.finish();
    rep
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountBasis {
    /// The modification count is a fraction of the sampled entries.
    #[default]
    Sampled,
    /// The modification count is a fraction of all tuples.
    AllEntries,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InjectionParams {
    pub fraction: f64,
    pub factor: f64,
    pub basis: CountBasis,
}

impl Default for InjectionParams {
    fn default() -> Self {
        Self {
            fraction: 0.2,
            factor: 1.3,
            basis: CountBasis::Sampled,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TargetedSubset {
    pub subset: Vec<usize>,
    pub target: Vec<usize>,
    /// Face values after the modification, in leave-one-out order.
    pub values: Vec<f64>,
}

impl TargetedSubset {
    /// Whether `target > sum of the other faces`.
    pub fn violates(&self) -> bool {
        let faces = leave_one_out(&self.subset);
        let r = faces.iter().position(|f| *f == self.target).expect("target is a face");
        let others: f64 = self.values.iter().enumerate().filter(|&(q, _)| q != r).map(|(_, v)| v).sum();
        self.values[r] > others
    }
}

#[derive(Clone, Debug)]
pub struct Injection {
    pub tensor: DistanceTensor,
    pub requested: usize,
    pub targeted: Vec<TargetedSubset>,
}

/// Raises entries until `ceil(fraction * basis)` fresh entries violate the
/// generalized triangle inequality inside a subset. Subsets are visited in
/// a seeded uniform order; a subset is skipped when it touches an entry
/// modified earlier, or when its target belongs to an earlier targeted
/// subset. The target of a subset is the face needing the smallest
/// increase `delta = (sum of the other faces) - face`, raised by
/// `factor * delta`.
pub fn inject_violations<R: Rng>(t: &DistanceTensor, params: &InjectionParams, rng: &mut R) -> Result<Injection> {
    inject_impl(t, params, rng, None)
}

/// As [`inject_violations`], but also visits subsets with unsampled faces,
/// evaluating those faces with `complete`. Only sampled faces are raised.
pub fn inject_violations_completing<R: Rng>(
    t: &DistanceTensor,
    params: &InjectionParams,
    rng: &mut R,
    complete: &mut dyn FnMut(&[usize]) -> Result<f64>,
) -> Result<Injection> {
    inject_impl(t, params, rng, Some(complete))
}

fn inject_impl<R: Rng>(
    t: &DistanceTensor,
    params: &InjectionParams,
    rng: &mut R,
    mut complete: Option<&mut dyn FnMut(&[usize]) -> Result<f64>>,
) -> Result<Injection> {
    if !(0.0..=1.0).contains(&params.fraction) || params.factor <= 1.0 {
        return Err(Error::invalid("fraction must lie in [0, 1] and factor must exceed 1"));
    }
    let basis = match params.basis {
        CountBasis::Sampled => t.sampled_count(),
        CountBasis::AllEntries => combinations(t.n, t.order).len(),
    };
    let requested = (params.fraction * basis as f64 - 1e-9).ceil().max(0.0) as usize;
    let mut out = t.clone();
    let mut targeted = Vec::new();
    if requested == 0 {
        return Ok(Injection {
            tensor: out,
            requested,
            targeted,
        });
    }
    let mut candidates: Vec<Vec<usize>> = if complete.is_some() {
        let mut all = BTreeSet::new();
        for (key, _) in t.sampled() {
            for extra in (0..t.n).filter(|x| !key.contains(x)) {
                let mut s = key.to_vec();
                s.push(extra);
                s.sort_unstable();
                all.insert(s);
            }
        }
        all.into_iter().collect()
    } else {
        complete_subsets(t)
    };
    candidates.shuffle(rng);
    let mut protected: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut cache: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    let mut done = 0;
    for s in candidates {
        if done == requested {
            break;
        }
        let faces = leave_one_out(&s);
        if faces.iter().any(|f| out.modified.contains(f)) {
            continue;
        }
        let mut vals = Vec::with_capacity(faces.len());
        for f in &faces {
            let v = match out.value(f) {
                Some(v) => v,
                None => match complete.as_mut() {
                    Some(cf) => match cache.get(f) {
                        Some(&v) => v,
                        None => {
                            let v = cf(f)?;
                            cache.insert(f.clone(), v);
                            v
                        }
                    },
                    None => unreachable!("complete subsets have sampled faces"),
                },
            };
            vals.push(v);
        }
        let total: f64 = vals.iter().sum();
        // smallest delta = largest face; first index on ties
        let r = (0..vals.len()).fold(0, |b, q| if vals[q] > vals[b] { q } else { b });
        let delta = total - 2.0 * vals[r];
        if delta <= 1e-12 || !out.is_sampled(&faces[r]) || protected.contains(&faces[r]) {
            continue;
        }
        vals[r] += params.factor * delta;
        out.values.insert(faces[r].clone(), vals[r]);
        out.modified.insert(faces[r].clone());
        protected.extend(faces.iter().cloned());
        targeted.push(TargetedSubset {
            subset: s,
            target: faces[r].clone(),
            values: vals,
        });
        done += 1;
    }
    if done < requested {
        return Err(Error::invalid(format!(
            "only {done} of {requested} violations could be placed; the tensor has too few usable subsets"
        )));
    }
    Ok(Injection {
        tensor: out,
        requested,
        targeted,
    })
}

/// Searches for a joint mass over three spaces with the given bivariate
/// marginals (`p12`, `p13`, `p23`).
pub fn no_gluing_check(p12: &JointMass, p13: &JointMass, p23: &JointMass) -> Result<Feasibility> {
    for (name, p) in [("p12", p12), ("p13", p13), ("p23", p23)] {
        if p.order() != 2 {
            return Err(Error::shape(format!("{name} must be bivariate")));
        }
    }
    let (m1, m2, m3) = (p12.shape()[0], p12.shape()[1], p13.shape()[1]);
    if p13.shape()[0] != m1 || p23.shape() != [m2, m3] {
        return Err(Error::shape("bivariate marginals have inconsistent sizes"));
    }
    let agree = |a: Vec<f64>, b: Vec<f64>, what: &str| -> Result<()> {
        if a.iter().zip(&b).any(|(x, y)| (x - y).abs() > MASS_TOL) {
            return Err(Error::IncompatibleMarginals(format!("{what}: {a:?} vs {b:?}")));
        }
        Ok(())
    };
    agree(p12.axis_marginal(0)?, p13.axis_marginal(0)?, "first space")?;
    agree(p12.axis_marginal(1)?, p23.axis_marginal(0)?, "second space")?;
    agree(p13.axis_marginal(1)?, p23.axis_marginal(1)?, "third space")?;
    let cols = m1 * m2 * m3;
    let rows = m1 * m2 + m1 * m3 + m2 * m3;
    let mut a = vec![0.0; rows * cols];
    let mut b = Vec::with_capacity(rows);
    b.extend_from_slice(p12.entries());
    b.extend_from_slice(p13.entries());
    b.extend_from_slice(p23.entries());
    for i in 0..m1 {
        for j in 0..m2 {
            for k in 0..m3 {
                let c = (i * m2 + j) * m3 + k;
                a[(i * m2 + j) * cols + c] = 1.0;
                a[(m1 * m2 + i * m3 + k) * cols + c] = 1.0;
                a[(m1 * m2 + m1 * m3 + j * m3 + k) * cols + c] = 1.0;
            }
        }
    }
    lp::feasible(&a, &b)
}

/// The witness of a feasible gluing as a joint mass.
pub fn gluing_witness(f: &Feasibility, shape: [usize; 3]) -> Result<Option<JointMass>> {
    match f {
        Feasibility::Feasible(x) => Ok(Some(JointMass::from_solver(shape.to_vec(), x.clone(), 1e-9)?)),
        Feasibility::Infeasible { .. } => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn combination_counts() {
        assert_eq!(combinations(5, 3).len(), 10);
        assert_eq!(combinations(4, 4), vec![vec![0, 1, 2, 3]]);
        assert_eq!(combinations(3, 2), vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
    }

    fn constant(n: usize, v: f64) -> DistanceTensor {
        let mut t = DistanceTensor::new(3, n).unwrap();
        for k in combinations(n, 3) {
            t.set(&k, v).unwrap();
        }
        t
    }

    #[test]
    fn constant_tensor_audit() {
        let r = check_w_tensor(&constant(5, 2.0), 1.0);
        assert!(r.passes());
        assert_eq!(r.empirical_c, Some(3.0));
        assert_eq!(r.audited, 5);
    }

    #[test]
    fn single_subset_injection() {
        let t = constant(4, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = InjectionParams { fraction: 0.25, ..Default::default() };
        let inj = inject_violations(&t, &p, &mut rng).unwrap();
        assert_eq!(inj.tensor.modified().len(), 1);
        let k = inj.tensor.modified().iter().next().unwrap().clone();
        assert!((inj.tensor.get(&k) - 3.6).abs() < 1e-12);
        assert!(inj.targeted[0].violates());
        let zero = InjectionParams { fraction: 0.0, ..Default::default() };
        assert_eq!(inject_violations(&t, &zero, &mut rng).unwrap().tensor, t);
    }

    #[test]
    fn csv_round_trip() {
        let mut t = DistanceTensor::new(3, 4).unwrap();
        t.set(&[2, 0, 1], 0.1).unwrap();
        t.set(&[0, 1, 3], 1.0 / 3.0).unwrap();
        t.modified.insert(vec![0, 1, 3]);
        let s = t.to_csv_string().unwrap();
        assert!(s.starts_with("i,j,k,value,sampled_flag\n0,1,2,0.1,1\n0,1,3,0.3333333333333333,2\n0,2,3,1000000000.0,0\n"));
        let back = DistanceTensor::read_csv(s.as_bytes()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_csv_string().unwrap(), s);
        assert_eq!(t.get(&[1, 2, 3]), SENTINEL);
    }

    #[test]
    fn metric_audits() {
        let pts: Vec<Atom> = [(0.0, 0.0), (1.0, 0.0), (0.0, 2.0)].iter().map(|&(x, y)| Atom::Point(x, y)).collect();
        let spaces = vec![pts.clone()];
        let euclid = |_: usize, _: usize, s: usize, t: usize| pts[s].distance(&pts[t]).unwrap();
        assert!(check_metric(&spaces, euclid).passes());
        let broken = |i: usize, j: usize, s: usize, t: usize| if (s, t) == (0, 1) { -1.0 } else { euclid(i, j, s, t) };
        let r = check_metric(&spaces, broken);
        assert_eq!(r.nonnegativity, Some(false));
        assert!(r.violations.iter().any(|v| v.property == "nonnegativity" && v.tuple == vec![0, 0, 0, 1]));
        let discrete = |_: usize, _: usize, s: usize, t: usize| f64::from(u8::from(s != t));
        assert!(check_metric(&spaces, discrete).passes());
    }

    #[test]
    fn theorem_one_instance_is_infeasible() {
        let p = JointMass::new(vec![3, 3], [1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0].map(|x| x / 3.0).to_vec()).unwrap();
        let q = JointMass::new(vec![3, 3], vec![1.0 / 9.0; 9]).unwrap();
        assert!(!no_gluing_check(&p, &p, &q).unwrap().is_feasible());
    }
}
