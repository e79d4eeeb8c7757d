//! Dense two-phase primal simplex for `min c.x  s.t.  A x = b, x >= 0`.
//!
//! Rows that are linear combinations of other rows (including the right-hand
//! side) are dropped before phase one. Transport constraint systems always
//! carry such rows: every marginal block sums to the same total.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feasibility threshold on the phase-one optimum.
pub const INFEASIBLE_TOL: f64 = 1e-8;
const REDUNDANT_TOL: f64 = 1e-10;
const COST_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct LpProblem {
    rows: usize,
    cols: usize,
    c: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl LpProblem {
    /// `a` is row-major with `b.len()` rows and `c.len()` columns.
    pub fn new(c: Vec<f64>, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let (rows, cols) = (b.len(), c.len());
        if rows == 0 || cols == 0 {
            return Err(Error::shape("an LP needs at least one row and one column"));
        }
        if a.len() != rows * cols {
            return Err(Error::shape(format!(
                "constraint matrix has {} entries, expected {rows}x{cols}",
                a.len()
            )));
        }
        Ok(Self { rows, cols, c, a, b })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn objective(&self) -> &[f64] {
        &self.c
    }

    pub fn matrix(&self) -> &[f64] {
        &self.a
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    fn check_finite(&self) -> Result<()> {
        if !self.c.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("objective"));
        }
        if !self.a.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("constraint matrix"));
        }
        if !self.b.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("right-hand side"));
        }
        Ok(())
    }

    /// Largest violation of `A x = b`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        (0..self.rows)
            .map(|i| {
                let row = &self.a[i * self.cols..(i + 1) * self.cols];
                let ax: f64 = row.iter().zip(x).map(|(a, x)| a * x).sum();
                (ax - self.b[i]).abs()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub value: f64,
    pub x: Vec<f64>,
    pub pivots: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PivotRule {
    /// Smallest-index entering and leaving variables throughout.
    #[default]
    Bland,
    /// Most negative reduced cost, switching to Bland's rule after a run of
    /// degenerate pivots.
    DantzigWithBlandFallback,
}

#[derive(Clone, Copy, Debug)]
pub struct SimplexOptions {
    pub max_pivots: usize,
    pub rule: PivotRule,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_pivots: 1_000_000,
            rule: PivotRule::Bland,
        }
    }
}

#[derive(Clone, Debug)]
pub enum Feasibility {
    Feasible(Vec<f64>),
    /// Phase one ended with a positive sum of artificials.
    Infeasible { phase_one_value: f64 },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }
}

pub fn solve(p: &LpProblem) -> Result<LpSolution> {
    solve_with(p, &SimplexOptions::default())
}

pub fn solve_with(p: &LpProblem, opts: &SimplexOptions) -> Result<LpSolution> {
    p.check_finite()?;
    let mut tab = Tableau::phase_one(p)?;
    let mut pivots = tab.run(opts, 0)?;
    let infeas = -tab.obj[tab.rhs_col()];
    if infeas > INFEASIBLE_TOL {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            value: f64::NAN,
            x: Vec::new(),
            pivots,
        });
    }
    tab.drop_artificials();
    tab.set_objective(&p.c);
    match tab.run(opts, pivots) {
        Ok(n) => pivots = n,
        Err(Error::Unsupported(_)) => {
            return Ok(LpSolution {
                status: LpStatus::Unbounded,
                value: f64::NEG_INFINITY,
                x: Vec::new(),
                pivots,
            })
        }
        Err(e) => return Err(e),
    }
    let x = tab.primal(p);
    let value = p.c.iter().zip(&x).map(|(c, x)| c * x).sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        value,
        x,
        pivots,
    })
}

/// Phase-one simplex only: a nonnegative solution of `A x = b`, or proof
/// that none exists.
pub fn feasible(a: &[f64], b: &[f64]) -> Result<Feasibility> {
    feasible_with(a, b, &SimplexOptions::default())
}

pub fn feasible_with(a: &[f64], b: &[f64], opts: &SimplexOptions) -> Result<Feasibility> {
    let cols = if b.is_empty() { 0 } else { a.len() / b.len() };
    let p = LpProblem::new(vec![0.0; cols], a.to_vec(), b.to_vec())?;
    p.check_finite()?;
    let mut tab = Tableau::phase_one(&p)?;
    tab.run(opts, 0)?;
    let infeas = -tab.obj[tab.rhs_col()];
    if infeas > INFEASIBLE_TOL {
        return Ok(Feasibility::Infeasible {
            phase_one_value: infeas,
        });
    }
    tab.drop_artificials();
    Ok(Feasibility::Feasible(tab.primal(&p)))
}

/// Indices of a maximal set of rows of `[A | b]` that are linearly
/// independent. Rows dropped here are consistent combinations of kept ones;
/// an inconsistent row stays and phase one detects it.
fn independent_rows(p: &LpProblem) -> Vec<usize> {
    let w = p.cols + 1;
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut keep = Vec::new();
    for i in 0..p.rows {
        let mut r: Vec<f64> = p.a[i * p.cols..(i + 1) * p.cols].to_vec();
        r.push(p.b[i]);
        let norm0 = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm0 == 0.0 {
            continue;
        }
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for q in &basis {
                let d: f64 = r.iter().zip(q).map(|(a, b)| a * b).sum();
                r.iter_mut().zip(q).for_each(|(a, b)| *a -= d * b);
            }
        }
        let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > REDUNDANT_TOL * norm0 {
            r.iter_mut().for_each(|x| *x /= norm);
            debug_assert_eq!(r.len(), w);
            basis.push(r);
            keep.push(i);
        }
    }
    keep
}

struct Tableau {
    m: usize,
    /// original variables
    n: usize,
    /// total columns including artificials (rhs excluded)
    width: usize,
    t: Vec<f64>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    rows: Vec<usize>,
    artificial_allowed: bool,
}

impl Tableau {
    fn phase_one(p: &LpProblem) -> Result<Self> {
        let rows = independent_rows(p);
        let m = rows.len();
        let n = p.cols;
        let width = n + m;
        let stride = width + 1;
        let mut t = vec![0.0; m * stride];
        let mut obj = vec![0.0; stride];
        for (r, &i) in rows.iter().enumerate() {
            let sign = if p.b[i] < 0.0 { -1.0 } else { 1.0 };
            let row = &mut t[r * stride..(r + 1) * stride];
            for j in 0..n {
                row[j] = sign * p.a[i * n + j];
            }
            row[n + r] = 1.0;
            row[width] = sign * p.b[i];
            for j in 0..n {
                obj[j] -= row[j];
            }
            obj[width] -= row[width];
        }
        Ok(Self {
            m,
            n,
            width,
            t,
            obj,
            basis: (n..n + m).collect(),
            rows,
            artificial_allowed: true,
        })
    }

    fn rhs_col(&self) -> usize {
        self.width
    }

    fn stride(&self) -> usize {
        self.width + 1
    }

    fn at(&self, r: usize, j: usize) -> f64 {
        self.t[r * self.stride() + j]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let stride = self.stride();
        let p = self.t[r * stride + c];
        let (before, rest) = self.t.split_at_mut(r * stride);
        let (prow, after) = rest.split_at_mut(stride);
        prow.iter_mut().for_each(|x| *x /= p);
        prow[c] = 1.0;
        let eliminate = |row: &mut [f64]| {
            let f = row[c];
            if f != 0.0 {
                for (x, &y) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * y;
                }
                row[c] = 0.0;
            }
        };
        before.chunks_mut(stride).for_each(eliminate);
        after.chunks_mut(stride).for_each(eliminate);
        eliminate(&mut self.obj);
        self.basis[r] = c;
    }

    fn allowed(&self, j: usize) -> bool {
        j < self.n || self.artificial_allowed
    }

    fn entering(&self, bland: bool) -> Option<usize> {
        if bland {
            (0..self.width).find(|&j| self.allowed(j) && self.obj[j] < -COST_TOL)
        } else {
            let mut best = None;
            let mut most = -COST_TOL;
            for j in 0..self.width {
                if self.allowed(j) && self.obj[j] < most {
                    most = self.obj[j];
                    best = Some(j);
                }
            }
            best
        }
    }

    /// Minimum-ratio row; ties go to the smallest basic variable index.
    fn leaving(&self, c: usize) -> Option<usize> {
        let rhs = self.rhs_col();
        let mut best_ratio = f64::INFINITY;
        for r in 0..self.m {
            let a = self.at(r, c);
            if a > PIVOT_TOL {
                best_ratio = best_ratio.min(self.at(r, rhs).max(0.0) / a);
            }
        }
        if !best_ratio.is_finite() {
            return None;
        }
        let slack = 1e-12 * (1.0 + best_ratio);
        (0..self.m)
            .filter(|&r| {
                let a = self.at(r, c);
                a > PIVOT_TOL && self.at(r, rhs).max(0.0) / a <= best_ratio + slack
            })
            .min_by_key(|&r| self.basis[r])
    }

    /// Iterates to optimality. Unboundedness is signalled as `Unsupported`.
    fn run(&mut self, opts: &SimplexOptions, mut pivots: usize) -> Result<usize> {
        let mut degenerate_run = 0usize;
        loop {
            let bland = match opts.rule {
                PivotRule::Bland => true,
                PivotRule::DantzigWithBlandFallback => degenerate_run > 50,
            };
            let Some(c) = self.entering(bland) else {
                return Ok(pivots);
            };
            let Some(r) = self.leaving(c) else {
                return Err(Error::Unsupported("unbounded".into()));
            };
            if pivots >= opts.max_pivots {
                return Err(Error::PivotLimit(opts.max_pivots));
            }
            let step = self.at(r, self.rhs_col()) / self.at(r, c);
            if step.abs() <= 1e-14 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, c);
            pivots += 1;
        }
    }

    /// Pivots basic artificials out at zero level, deleting rows where that
    /// is impossible, then bars artificials from re-entering.
    fn drop_artificials(&mut self) {
        let mut r = 0;
        while r < self.m {
            if self.basis[r] >= self.n {
                let col = (0..self.n)
                    .filter(|&j| self.at(r, j).abs() > PIVOT_TOL)
                    .max_by(|&a, &b| self.at(r, a).abs().total_cmp(&self.at(r, b).abs()));
                match col {
                    Some(j) => self.pivot(r, j),
                    None => {
                        self.remove_row(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
        self.artificial_allowed = false;
    }

    fn remove_row(&mut self, r: usize) {
        let stride = self.stride();
        self.t.drain(r * stride..(r + 1) * stride);
        self.basis.remove(r);
        self.rows.remove(r);
        self.m -= 1;
    }

    fn set_objective(&mut self, c: &[f64]) {
        let stride = self.stride();
        self.obj = vec![0.0; stride];
        self.obj[..self.n].copy_from_slice(c);
        for r in 0..self.m {
            let cb = c[self.basis[r]];
            if cb != 0.0 {
                let row = &self.t[r * stride..(r + 1) * stride];
                for (o, &x) in self.obj.iter_mut().zip(row) {
                    *o -= cb * x;
                }
            }
        }
        for r in 0..self.m {
            self.obj[self.basis[r]] = 0.0;
        }
    }

    /// Basic solution, re-solved from the original columns for accuracy.
    fn primal(&self, p: &LpProblem) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        let m = self.m;
        let mut bmat = vec![0.0; m * m];
        let mut rhs = vec![0.0; m];
        for (r, &i) in self.rows.iter().enumerate() {
            for (k, &j) in self.basis.iter().enumerate() {
                bmat[r * m + k] = p.a[i * p.cols + j];
            }
            rhs[r] = p.b[i];
        }
        match solve_dense(&mut bmat, &mut rhs, m) {
            Some(xb) => {
                for (k, &j) in self.basis.iter().enumerate() {
                    x[j] = xb[k];
                }
            }
            None => {
                for r in 0..m {
                    x[self.basis[r]] = self.at(r, self.rhs_col());
                }
            }
        }
        for v in &mut x {
            if *v < 0.0 && *v > -1e-10 {
                *v = 0.0;
            }
        }
        x
    }
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs()))?;
        if a[p * n + k].abs() < 1e-13 {
            return None;
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            b.swap(k, p);
        }
        for i in k + 1..n {
            let f = a[i * n + k] / a[k * n + k];
            if f != 0.0 {
                for j in k..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k * n + j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k * n + k];
    }
    Some(x)
}
