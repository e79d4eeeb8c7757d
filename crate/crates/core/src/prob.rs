//! Finite probability spaces: atoms, distributions, dense joint masses,
//! conditionals and the gluing map.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on total mass.
pub const MASS_TOL: f64 = 1e-9;
/// Coordinate tolerance for numeric atom equality.
pub const ATOM_TOL: f64 = 1e-12;
/// Default limit on the number of entries of a dense product space.
pub const DEFAULT_ENTRY_CAP: usize = 10_000_000;

/// A sample-space element.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Atom {
    Real(f64),
    /// Planar point; complex numbers are stored as (re, im).
    Point(f64, f64),
    /// Opaque label, only meaningful through a cost lookup.
    Label(String),
}

impl Atom {
    pub fn complex(z: Complex64) -> Self {
        Atom::Point(z.re, z.im)
    }

    /// Planar coordinates of a numeric atom. Reals sit on the x axis.
    pub fn coords(&self) -> Option<(f64, f64)> {
        match *self {
            Atom::Real(x) => Some((x, 0.0)),
            Atom::Point(x, y) => Some((x, y)),
            Atom::Label(_) => None,
        }
    }

    pub fn kind(&self) -> AtomKind {
        match self {
            Atom::Real(_) => AtomKind::Real,
            Atom::Point(..) => AtomKind::Point,
            Atom::Label(_) => AtomKind::Label,
        }
    }

    /// Euclidean distance between numeric atoms.
    pub fn distance(&self, other: &Atom) -> Option<f64> {
        let (a, b) = (self.coords()?, other.coords()?);
        Some((a.0 - b.0).hypot(a.1 - b.1))
    }
}

impl PartialEq for Atom {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Atom::Label(a), Atom::Label(b)) => a == b,
            (Atom::Label(_), _) | (_, Atom::Label(_)) => false,
            _ => {
                let (a, b) = (self.coords().unwrap(), other.coords().unwrap());
                (a.0 - b.0).abs() <= ATOM_TOL && (a.1 - b.1).abs() <= ATOM_TOL
            }
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Real(x) => write!(f, "{x}"),
            Atom::Point(x, y) => write!(f, "({x}, {y})"),
            Atom::Label(s) => f.write_str(s),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AtomKind {
    Real,
    Point,
    Label,
}

impl AtomKind {
    fn as_str(self) -> &'static str {
        match self {
            AtomKind::Real => "real",
            AtomKind::Point => "point",
            AtomKind::Label => "label",
        }
    }
}

/// Normalizes `masses` in place if the sum is within [`MASS_TOL`] of one.
fn normalize(masses: &mut [f64]) -> Result<()> {
    if let Some(bad) = masses.iter().find(|m| !m.is_finite()) {
        return Err(Error::InvalidMass(format!("non-finite mass {bad}")));
    }
    let total: f64 = masses.iter().sum();
    if (total - 1.0).abs() > MASS_TOL {
        return Err(Error::InvalidMass(format!(
            "masses sum to {total}, not 1"
        )));
    }
    if total != 1.0 {
        masses.iter_mut().for_each(|m| *m /= total);
    }
    Ok(())
}

/// Atoms of a finite sample space together with their probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    atoms: Vec<Atom>,
    masses: Vec<f64>,
}

impl DiscreteDistribution {
    /// Builds a distribution with strictly positive masses on distinct atoms.
    pub fn new(atoms: Vec<Atom>, masses: Vec<f64>) -> Result<Self> {
        Self::build(atoms, masses, false)
    }

    /// Like [`DiscreteDistribution::new`] but admits zero masses.
    pub fn new_relaxed(atoms: Vec<Atom>, masses: Vec<f64>) -> Result<Self> {
        Self::build(atoms, masses, true)
    }

    fn build(atoms: Vec<Atom>, mut masses: Vec<f64>, allow_zero: bool) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMass("empty sample space".into()));
        }
        if atoms.len() != masses.len() {
            return Err(Error::shape(format!(
                "{} atoms but {} masses",
                atoms.len(),
                masses.len()
            )));
        }
        for (s, &m) in masses.iter().enumerate() {
            if m < 0.0 || (!allow_zero && m <= 0.0) {
                return Err(Error::InvalidMass(format!("mass {m} at atom {s}")));
            }
        }
        normalize(&mut masses)?;
        for s in 0..atoms.len() {
            for t in s + 1..atoms.len() {
                if atoms[s] == atoms[t] {
                    return Err(Error::InvalidMass(format!(
                        "atoms {s} and {t} coincide ({})",
                        atoms[s]
                    )));
                }
            }
        }
        Ok(Self { atoms, masses })
    }

    pub fn uniform(atoms: Vec<Atom>) -> Result<Self> {
        let m = atoms.len();
        Self::new(atoms, vec![1.0 / m as f64; m])
    }

    pub fn point_mass(atom: Atom) -> Self {
        Self {
            atoms: vec![atom],
            masses: vec![1.0],
        }
    }

    /// Empirical distribution of `samples`; samples closer than `merge_tol`
    /// (in every coordinate) to an earlier distinct atom are pooled into it.
    pub fn from_samples(samples: &[Atom], merge_tol: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidMass("no samples".into()));
        }
        let mut atoms: Vec<Atom> = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for x in samples {
            let hit = atoms.iter().position(|a| match (a.coords(), x.coords()) {
                (Some(p), Some(q)) => (p.0 - q.0).abs() <= merge_tol && (p.1 - q.1).abs() <= merge_tol,
                _ => a == x,
            });
            match hit {
                Some(i) => counts[i] += 1,
                None => {
                    atoms.push(x.clone());
                    counts.push(1);
                }
            }
        }
        let total = samples.len() as f64;
        let masses = counts.iter().map(|&c| c as f64 / total).collect();
        Self::new(atoms, masses)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// True when both have the same atoms and masses up to a reordering.
    pub fn same_as(&self, other: &Self) -> bool {
        if self.len() != other.len() {
            return false;
        }
        let mut used = vec![false; other.len()];
        self.atoms.iter().zip(&self.masses).all(|(a, &m)| {
            let hit = (0..other.len()).find(|&t| {
                !used[t] && other.atoms[t] == *a && (other.masses[t] - m).abs() <= MASS_TOL
            });
            hit.map(|t| used[t] = true).is_some()
        })
    }

    /// Reads the CSV format: a header row `atom_kind,<real|point|label>`
    /// followed by `x,mass`, `x,y,mass` or `label,mass` rows.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut records = rdr.records();
        let header = records
            .next()
            .ok_or_else(|| Error::InvalidMass("empty distribution file".into()))??;
        if header.get(0) != Some("atom_kind") {
            return Err(Error::invalid("first row must be `atom_kind,<kind>`"));
        }
        let kind = header.get(1).unwrap_or("");
        let mut atoms = Vec::new();
        let mut masses = Vec::new();
        for (line, rec) in records.enumerate() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| Error::invalid(format!("row {}: bad field {i}", line + 2)))
            };
            let (atom, mass) = match (kind, rec.len()) {
                ("real", 2) => (Atom::Real(num(0)?), num(1)?),
                ("point", 3) => (Atom::Point(num(0)?, num(1)?), num(2)?),
                ("label", 2) => (Atom::Label(rec[0].to_string()), num(1)?),
                _ => {
                    return Err(Error::invalid(format!(
                        "row {}: {} fields do not match atom kind `{kind}`",
                        line + 2,
                        rec.len()
                    )))
                }
            };
            atoms.push(atom);
            masses.push(mass);
        }
        Self::new(atoms, masses)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let kind = self.atoms[0].kind();
        writeln!(w, "atom_kind,{}", kind.as_str())?;
        for (a, m) in self.atoms.iter().zip(&self.masses) {
            match a {
                Atom::Real(x) => writeln!(w, "{x},{m}")?,
                Atom::Point(x, y) => writeln!(w, "{x},{y},{m}")?,
                Atom::Label(s) => writeln!(w, "{s},{m}")?,
            }
        }
        Ok(())
    }
}

/// Dense real tensor in row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseTensor {
    shape: Vec<usize>,
    entries: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, entries: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::shape(format!("invalid tensor shape {shape:?}")));
        }
        let n = checked_size(&shape, usize::MAX)?;
        if n != entries.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} needs {n} entries, got {}",
                entries.len()
            )));
        }
        Ok(Self { shape, entries })
    }

    pub fn from_fn(shape: Vec<usize>, cap: usize, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let n = checked_size(&shape, cap)?;
        let mut entries = Vec::with_capacity(n);
        for_each_index(&shape, |idx| entries.push(f(idx)));
        Self::new(shape, entries)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.entries[flat_index(&self.shape, idx)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape.clone(),
            entries: self.entries.iter().map(|&x| f(x)).collect(),
        }
    }
}

/// Product of `shape`, failing above `cap`.
pub fn checked_size(shape: &[usize], cap: usize) -> Result<usize> {
    let mut n: usize = 1;
    for &m in shape {
        n = n.checked_mul(m).filter(|&n| n <= cap).ok_or(Error::EntryCap {
            entries: shape.iter().map(|&m| m as f64).product::<f64>() as usize,
            cap,
        })?;
    }
    Ok(n)
}

pub fn flat_index(shape: &[usize], idx: &[usize]) -> usize {
    debug_assert_eq!(shape.len(), idx.len());
    idx.iter().zip(shape).fold(0, |acc, (&i, &m)| acc * m + i)
}

/// Visits every multi-index of `shape` in row-major order.
pub fn for_each_index(shape: &[usize], mut f: impl FnMut(&[usize])) {
    if shape.contains(&0) {
        return;
    }
    let mut idx = vec![0usize; shape.len()];
    loop {
        f(&idx);
        let mut ax = shape.len();
        loop {
            if ax == 0 {
                return;
            }
            ax -= 1;
            idx[ax] += 1;
            if idx[ax] < shape[ax] {
                break;
            }
            idx[ax] = 0;
        }
    }
}

/// `sum_s A_s^ell * B_s`.
pub fn braket(a: &DenseTensor, b: &DenseTensor, ell: u32) -> Result<f64> {
    if a.shape != b.shape {
        return Err(Error::shape(format!(
            "bra-ket of shapes {:?} and {:?}",
            a.shape, b.shape
        )));
    }
    if ell == 0 {
        return Err(Error::invalid("exponent must be positive"));
    }
    if b.entries.iter().any(|&x| x < 0.0) {
        return Err(Error::invalid("right operand must be nonnegative"));
    }
    Ok(a.entries
        .iter()
        .zip(&b.entries)
        .map(|(&x, &w)| x.powi(ell as i32) * w)
        .sum())
}

/// Probability mass over a product of finite spaces.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JointMass {
    #[serde(flatten)]
    tensor: DenseTensor,
}

impl<'de> Deserialize<'de> for JointMass {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let t = DenseTensor::deserialize(d)?;
        JointMass::from_tensor(t).map_err(serde::de::Error::custom)
    }
}

impl JointMass {
    pub fn new(shape: Vec<usize>, entries: Vec<f64>) -> Result<Self> {
        Self::from_tensor(DenseTensor::new(shape, entries)?)
    }

    pub fn from_tensor(mut tensor: DenseTensor) -> Result<Self> {
        if let Some(x) = tensor.entries.iter().find(|&&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::InvalidMass(format!("entry {x}")));
        }
        normalize(&mut tensor.entries)?;
        Ok(Self { tensor })
    }

    /// Like [`JointMass::new`] but clamps entries in `[-tol, 0)` to zero first.
    pub fn from_solver(shape: Vec<usize>, mut entries: Vec<f64>, tol: f64) -> Result<Self> {
        for x in &mut entries {
            if *x < 0.0 && *x >= -tol {
                *x = 0.0;
            }
        }
        Self::new(shape, entries)
    }

    pub fn product(factors: &[&[f64]]) -> Result<Self> {
        let shape: Vec<usize> = factors.iter().map(|f| f.len()).collect();
        let t = DenseTensor::from_fn(shape, DEFAULT_ENTRY_CAP, |idx| {
            idx.iter().zip(factors).map(|(&i, f)| f[i]).product()
        })?;
        Self::from_tensor(t)
    }

    pub fn tensor(&self) -> &DenseTensor {
        &self.tensor
    }

    pub fn shape(&self) -> &[usize] {
        &self.tensor.shape
    }

    pub fn entries(&self) -> &[f64] {
        &self.tensor.entries
    }

    pub fn order(&self) -> usize {
        self.tensor.shape.len()
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.tensor.get(idx)
    }

    /// Sums out every axis not in `keep`. Kept axes appear in ascending order.
    pub fn marginal(&self, keep: &[usize]) -> Result<JointMass> {
        let mut axes = keep.to_vec();
        axes.sort_unstable();
        axes.dedup();
        if axes.is_empty() || axes.len() != keep.len() {
            return Err(Error::invalid(format!("bad axis set {keep:?}")));
        }
        if let Some(&ax) = axes.iter().find(|&&a| a >= self.order()) {
            return Err(Error::invalid(format!(
                "axis {ax} out of range for order {}",
                self.order()
            )));
        }
        let out_shape: Vec<usize> = axes.iter().map(|&a| self.tensor.shape[a]).collect();
        let mut out = vec![0.0; out_shape.iter().product()];
        let mut sub = vec![0usize; axes.len()];
        let mut flat = 0;
        for_each_index(&self.tensor.shape, |idx| {
            for (k, &a) in axes.iter().enumerate() {
                sub[k] = idx[a];
            }
            out[flat_index(&out_shape, &sub)] += self.tensor.entries[flat];
            flat += 1;
        });
        JointMass::new(out_shape, out)
    }

    /// Univariate marginal along one axis as a plain vector.
    pub fn axis_marginal(&self, axis: usize) -> Result<Vec<f64>> {
        Ok(self.marginal(&[axis])?.tensor.entries)
    }

    /// Conditional of axis 0 given axis 1 for a bivariate mass.
    pub fn conditional(&self) -> Result<ConditionalMass> {
        if self.order() != 2 {
            return Err(Error::shape(format!(
                "conditional needs a bivariate mass, got order {}",
                self.order()
            )));
        }
        let (mi, mk) = (self.tensor.shape[0], self.tensor.shape[1]);
        let e = &self.tensor.entries;
        let mut q = vec![0.0; mi * mk];
        for t in 0..mk {
            let col: f64 = (0..mi).map(|s| e[s * mk + t]).sum();
            if col <= 0.0 {
                return Err(Error::ZeroConditioning { index: t });
            }
            for s in 0..mi {
                q[s * mk + t] = e[s * mk + t] / col;
            }
        }
        ConditionalMass::new(mi, mk, q)
    }

    /// Serialized as `{shape, entries}`.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Column-stochastic matrix `q[s | t]` of size `rows x cols`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalMass {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl ConditionalMass {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || entries.len() != rows * cols {
            return Err(Error::shape(format!(
                "{} entries for a {rows}x{cols} conditional",
                entries.len()
            )));
        }
        if entries.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::InvalidMass("negative conditional entry".into()));
        }
        for t in 0..cols {
            let col: f64 = (0..rows).map(|s| entries[s * cols + t]).sum();
            if (col - 1.0).abs() > MASS_TOL {
                return Err(Error::InvalidMass(format!("column {t} sums to {col}")));
            }
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, s: usize, t: usize) -> f64 {
        self.entries[s * self.cols + t]
    }

    /// The bivariate mass `q[s|t] * pivot[t]`.
    pub fn joint_with(&self, pivot: &[f64]) -> Result<JointMass> {
        if pivot.len() != self.cols {
            return Err(Error::shape("pivot length differs from conditional columns"));
        }
        let e = (0..self.rows)
            .flat_map(|s| (0..self.cols).map(move |t| (s, t)))
            .map(|(s, t)| self.get(s, t) * pivot[t])
            .collect();
        JointMass::new(vec![self.rows, self.cols], e)
    }
}

/// Glues a pivot marginal and conditionals on it into one joint mass in
/// which the non-pivot coordinates are conditionally independent given the
/// pivot. `conditionals` must hold exactly the axes `0..n` other than `pivot_axis`.
pub fn glue(
    pivot: &[f64],
    conditionals: &BTreeMap<usize, ConditionalMass>,
    pivot_axis: usize,
) -> Result<JointMass> {
    let n = conditionals.len() + 1;
    if pivot_axis >= n || conditionals.contains_key(&pivot_axis) {
        return Err(Error::shape(format!(
            "pivot axis {pivot_axis} inconsistent with {} conditionals",
            n - 1
        )));
    }
    let mut shape = vec![0; n];
    shape[pivot_axis] = pivot.len();
    for (&ax, q) in conditionals {
        if ax >= n {
            return Err(Error::shape(format!("conditional axis {ax} out of range")));
        }
        if q.cols() != pivot.len() {
            return Err(Error::shape(format!(
                "conditional on axis {ax} has {} columns, pivot has {} atoms",
                q.cols(),
                pivot.len()
            )));
        }
        shape[ax] = q.rows();
    }
    let qs: Vec<Option<&ConditionalMass>> = (0..n).map(|a| conditionals.get(&a)).collect();
    let t = DenseTensor::from_fn(shape, DEFAULT_ENTRY_CAP, |idx| {
        let k = idx[pivot_axis];
        qs.iter()
            .zip(idx)
            .filter_map(|(q, &s)| q.map(|q| q.get(s, k)))
            .product::<f64>()
            * pivot[k]
    })?;
    JointMass::from_tensor(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], e: &[f64]) -> DenseTensor {
        DenseTensor::new(shape.to_vec(), e.to_vec()).unwrap()
    }

    #[test]
    fn braket_examples() {
        let a = t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let b = t(&[2, 2], &[0.25; 4]);
        assert!((braket(&a, &b, 1).unwrap() - 2.5).abs() < 1e-15);
        assert!((braket(&a, &b, 2).unwrap() - 7.5).abs() < 1e-15);
        let one_hot = t(&[2, 2], &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(braket(&a, &one_hot, 3).unwrap(), 8.0);
        assert!(braket(&a, &t(&[4], &[0.25; 4]), 1).is_err());
    }

    #[test]
    fn marginal_examples() {
        let j = JointMass::new(vec![2, 2], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let m = j.marginal(&[1]).unwrap();
        assert!((m.entries()[0] - 0.4).abs() < 1e-15 && (m.entries()[1] - 0.6).abs() < 1e-15);
        assert_eq!(j.marginal(&[0, 1]).unwrap(), j);
        let p = [0.3, 0.7];
        let q = [0.2, 0.5, 0.3];
        let pq = JointMass::product(&[&p, &q]).unwrap();
        let back = pq.axis_marginal(0).unwrap();
        assert!(back.iter().zip(&p).all(|(a, b)| (a - b).abs() < 1e-15));
        assert!(j.marginal(&[]).is_err());
        assert!(j.marginal(&[2]).is_err());
        assert!(j.marginal(&[0, 0]).is_err());
    }

    #[test]
    fn conditional_examples() {
        let j = JointMass::new(vec![2, 2], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let c = j.conditional().unwrap();
        assert!((c.get(0, 0) - 0.25).abs() < 1e-15 && (c.get(1, 0) - 0.75).abs() < 1e-15);
        assert!((c.get(0, 1) - 1.0 / 3.0).abs() < 1e-15 && (c.get(1, 1) - 2.0 / 3.0).abs() < 1e-15);

        let d = JointMass::new(vec![2, 2], vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let c = d.conditional().unwrap();
        assert_eq!((c.get(0, 0), c.get(1, 0), c.get(0, 1), c.get(1, 1)), (1.0, 0.0, 0.0, 1.0));

        let p = [0.3, 0.7];
        let ind = JointMass::product(&[&p, &[0.5, 0.5]]).unwrap().conditional().unwrap();
        for t in 0..2 {
            assert!((ind.get(0, t) - 0.3).abs() < 1e-15);
        }

        let z = JointMass::new(vec![2, 2], vec![0.5, 0.0, 0.5, 0.0]).unwrap();
        assert!(matches!(z.conditional(), Err(Error::ZeroConditioning { index: 1 })));
    }

    #[test]
    fn glue_two_axes_is_joint() {
        let q12 = JointMass::new(vec![2, 3], vec![0.1, 0.2, 0.05, 0.15, 0.3, 0.2]).unwrap();
        let q2 = q12.axis_marginal(1).unwrap();
        let cond = q12.conditional().unwrap();
        let mut m = BTreeMap::new();
        m.insert(0, cond);
        let g = glue(&q2, &m, 1).unwrap();
        for (a, b) in g.entries().iter().zip(q12.entries()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn glue_independent_conditionals_is_product() {
        let pivot = [0.4, 0.6];
        let a = [0.1, 0.9];
        let b = [0.2, 0.3, 0.5];
        let col = |v: &[f64]| {
            ConditionalMass::new(v.len(), 2, v.iter().flat_map(|&x| [x, x]).collect()).unwrap()
        };
        let mut m = BTreeMap::new();
        m.insert(0, col(&a));
        m.insert(2, col(&b));
        let g = glue(&pivot, &m, 1).unwrap();
        let p = JointMass::product(&[&a, &pivot, &b]).unwrap();
        for (x, y) in g.entries().iter().zip(p.entries()) {
            assert!((x - y).abs() < 1e-15);
        }
        let mut bad = m.clone();
        bad.insert(1, col(&a));
        assert!(glue(&pivot, &bad, 1).is_err());
        assert!(glue(&[0.2, 0.3, 0.5], &m, 1).is_err());
    }

    #[test]
    fn distribution_validation() {
        assert!(DiscreteDistribution::new(vec![Atom::Real(0.0)], vec![1.0]).is_ok());
        assert!(DiscreteDistribution::new(vec![Atom::Real(0.0), Atom::Real(1.0)], vec![1.0, 0.0]).is_err());
        assert!(DiscreteDistribution::new_relaxed(vec![Atom::Real(0.0), Atom::Real(1.0)], vec![1.0, 0.0]).is_ok());
        assert!(DiscreteDistribution::new(vec![Atom::Real(0.0), Atom::Real(5e-13)], vec![0.5, 0.5]).is_err());
        assert!(DiscreteDistribution::new(vec![Atom::Real(0.0)], vec![0.9]).is_err());
        let near = DiscreteDistribution::new(vec![Atom::Real(0.0), Atom::Real(1.0)], vec![0.5, 0.5 + 5e-10]).unwrap();
        assert!((near.masses().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_ne!(Atom::Label("a".into()), Atom::Real(0.0));
        assert_eq!(Atom::Point(1.0, 2.0), Atom::Point(1.0 + 1e-13, 2.0));
    }

    #[test]
    fn from_samples_pools_duplicates() {
        let s = [Atom::Real(1.0), Atom::Real(2.0), Atom::Real(1.0 + 1e-9)];
        let d = DiscreteDistribution::from_samples(&s, 1e-6).unwrap();
        assert_eq!(d.len(), 2);
        assert!((d.masses()[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn csv_and_json_io() {
        let d = DiscreteDistribution::new(
            vec![Atom::Point(0.0, 1.0), Atom::Point(2.5, -1.0)],
            vec![0.25, 0.75],
        )
        .unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "atom_kind,point\n0,1,0.25\n2.5,-1,0.75\n");
        assert_eq!(DiscreteDistribution::read_csv(&buf[..]).unwrap(), d);
        assert!(DiscreteDistribution::read_csv("atom_kind,real\n1,2,3\n".as_bytes()).is_err());

        let j = JointMass::new(vec![2, 2], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let s = j.to_json().unwrap();
        assert_eq!(s, r#"{"shape":[2,2],"entries":[0.1,0.2,0.3,0.4]}"#);
        assert_eq!(JointMass::from_json(&s).unwrap(), j);
        assert!(JointMass::from_json(r#"{"shape":[2],"entries":[0.1,0.2]}"#).is_err());
    }
}
