//! Self-check suite over the explicit constructions, the hash maps, and
//! the gluing and coupling properties, with optional deliberate faults to
//! confirm each check can fail.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constructions::{appendix_e_instance, planar_layout, search_extremal, theorem2_instance};
use crate::error::Result;
use crate::hash::{audit_big_h, audit_big_h_prime_with, h_prime_preimage, Triple, MAX_MULTIPLICITY};
use crate::metric::{gluing_witness, no_gluing_check};
use crate::prob::{glue, ConditionalMass, JointMass};

/// Largest hash size the suite audits.
pub const VERIFY_HASH_MAX_N: usize = 40;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutation {
    #[default]
    None,
    /// Shifts the three-index scalar map by one.
    HPrimeOffByOne,
    /// Sets the two-coincident-point cost of the area cost to zero.
    ZeroGamma,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifySummary {
    pub mutation: Mutation,
    pub checks: Vec<Check>,
    pub passed: bool,
}

fn check(name: &str, outcome: Result<(bool, String)>) -> Check {
    let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    Check {
        name: name.into(),
        passed,
        detail,
    }
}

pub fn random_simplex<R: Rng>(rng: &mut R, m: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..m).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

pub fn random_joint<R: Rng>(rng: &mut R, shape: &[usize]) -> Result<JointMass> {
    JointMass::new(shape.to_vec(), random_simplex(rng, shape.iter().product()))
}

fn random_conditional<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Result<ConditionalMass> {
    let cols_data: Vec<Vec<f64>> = (0..cols).map(|_| random_simplex(rng, rows)).collect();
    let e = (0..rows).flat_map(|s| cols_data.iter().map(move |c| c[s])).collect();
    ConditionalMass::new(rows, cols, e)
}

fn no_gluing() -> Result<(bool, String)> {
    let third = 1.0 / 3.0;
    let p = JointMass::new(vec![3, 3], vec![third, 0.0, third, 0.0, third, 0.0, 0.0, 0.0, 0.0])?;
    let u = JointMass::new(vec![3, 3], vec![1.0 / 9.0; 9])?;
    let bad = no_gluing_check(&p, &p, &u)?;
    let infeasible = !bad.is_feasible();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut witnessed = 0;
    for _ in 0..20 {
        let j = random_joint(&mut rng, &[2, 3, 2])?;
        let (p12, p13, p23) = (j.marginal(&[0, 1])?, j.marginal(&[0, 2])?, j.marginal(&[1, 2])?);
        let f = no_gluing_check(&p12, &p13, &p23)?;
        if let Some(w) = gluing_witness(&f, [2, 3, 2])? {
            let dev = [(&[0, 1], &p12), (&[0, 2], &p13), (&[1, 2], &p23)]
                .iter()
                .map(|(k, p)| max_dev(w.marginal(*k).map(|m| m.entries().to_vec()), p.entries()))
                .try_fold(0.0, |a: f64, b| b.map(|b| a.max(b)))?;
            if dev < 1e-8 {
                witnessed += 1;
            }
        }
    }
    Ok((
        infeasible && witnessed == 20,
        format!("obstructed instance infeasible: {infeasible}; consistent instances witnessed: {witnessed}/20"),
    ))
}

fn max_dev(a: Result<Vec<f64>>, b: &[f64]) -> Result<f64> {
    Ok(a?.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

fn planar_values() -> Result<(bool, String)> {
    let v = theorem2_instance(0.01)?.values()?;
    let ok = [(v.w123, 0.5), (v.w124, 0.125), (v.w134, 0.1275), (v.w234, 0.1275)]
        .iter()
        .all(|(g, w)| (g - w).abs() <= 1e-8)
        && v.violation_margin > 0.0;
    Ok((
        ok,
        format!(
            "values {:.10} {:.10} {:.10} {:.10}, margin {:.6}",
            v.w123, v.w124, v.w134, v.w234, v.violation_margin
        ),
    ))
}

fn pair_hash() -> Result<(bool, String)> {
    let mut failing = Vec::new();
    for n in 2..=VERIFY_HASH_MAX_N {
        if !audit_big_h(n)?.passes {
            failing.push(n);
        }
    }
    Ok((failing.is_empty(), format!("n in 2..={VERIFY_HASH_MAX_N}; failing sizes {failing:?}")))
}

fn triple_hash(mutation: Mutation) -> Result<(bool, String)> {
    let hp = move |i: usize, r: usize, n: usize| {
        let shift = usize::from(mutation == Mutation::HPrimeOffByOne);
        if i < n {
            1 + (i + r - 1 + shift) % n
        } else {
            1 + r % (n - 1)
        }
    };
    let mut worst = 0;
    let mut failing = Vec::new();
    for n in 2..=VERIFY_HASH_MAX_N {
        let a = audit_big_h_prime_with(n, &hp)?;
        worst = worst.max(a.max_multiplicity);
        // at n = 2 the only index range is too small for the exclusion rule
        let range_ok = n == 2 || a.range_violations.is_empty();
        if a.max_multiplicity > MAX_MULTIPLICITY || !range_ok {
            failing.push(n);
        }
    }
    let pre = h_prime_preimage(Triple::new(2, 3, 1), 4, None)?.len();
    let exact = mutation != Mutation::None || pre == MAX_MULTIPLICITY;
    Ok((
        failing.is_empty() && exact,
        format!("largest per-r multiplicity {worst}; failing sizes {failing:?}; pooled preimage of (2,3,1) at n=4: {pre}"),
    ))
}

fn glue_marginals() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(2..=4);
        let pivot_axis = rng.gen_range(0..n);
        let m_pivot = rng.gen_range(1..=3);
        let pivot = random_simplex(&mut rng, m_pivot);
        let mut conds = BTreeMap::new();
        for ax in (0..n).filter(|&a| a != pivot_axis) {
            let rows = rng.gen_range(1..=3);
            conds.insert(ax, random_conditional(&mut rng, rows, m_pivot)?);
        }
        let j = glue(&pivot, &conds, pivot_axis)?;
        worst = worst.max(max_dev(j.axis_marginal(pivot_axis), &pivot)?);
        for (&ax, q) in &conds {
            let want = q.joint_with(&pivot)?;
            let got = j.marginal(&[ax, pivot_axis])?;
            // marginal axes are ascending; transpose when the pivot comes first
            let got: Vec<f64> = if ax < pivot_axis {
                got.entries().to_vec()
            } else {
                let (r, c) = (q.rows(), q.cols());
                (0..r).flat_map(|s| (0..c).map(move |t| (s, t))).map(|(s, t)| got.get(&[t, s])).collect()
            };
            worst = worst.max(max_dev(Ok(got), want.entries())?);
            let uni: Vec<f64> = (0..q.rows()).map(|s| (0..q.cols()).map(|t| want.get(&[s, t])).sum()).collect();
            worst = worst.max(max_dev(j.axis_marginal(ax), &uni)?);
        }
    }
    Ok((worst <= 1e-12, format!("largest marginal deviation {worst:.3e} over 100 constructions")))
}

/// `(sum_{s,t} p_{st} |x_s - y_t|^ell)^(1/ell)` for the bivariate marginal on axes `a < b`.
fn coupled_cost(j: &JointMass, pts: &[Vec<(f64, f64)>], a: usize, b: usize, ell: u32) -> Result<f64> {
    let m = j.marginal(&[a, b])?;
    let mut total = 0.0;
    for (s, x) in pts[a].iter().enumerate() {
        for (t, y) in pts[b].iter().enumerate() {
            total += m.get(&[s, t]) * (x.0 - y.0).hypot(x.1 - y.1).powi(ell as i32);
        }
    }
    Ok(total.powf(1.0 / f64::from(ell)))
}

fn coupling_triangle() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100 {
        let shape: Vec<usize> = (0..3).map(|_| rng.gen_range(1..=3)).collect();
        let pts: Vec<Vec<(f64, f64)>> = shape
            .iter()
            .map(|&m| (0..m).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
            .collect();
        let j = random_joint(&mut rng, &shape)?;
        for ell in 1..=3 {
            let w01 = coupled_cost(&j, &pts, 0, 1, ell)?;
            let w02 = coupled_cost(&j, &pts, 0, 2, ell)?;
            let w12 = coupled_cost(&j, &pts, 1, 2, ell)?;
            for gap in [w01 - w02 - w12, w02 - w01 - w12, w12 - w01 - w02] {
                worst = worst.max(gap);
            }
        }
    }
    Ok((worst <= 1e-9, format!("largest triangle excess {worst:.3e} over 100 joints and ell in 1..=3")))
}

fn collinear_ratio() -> Result<(bool, String)> {
    let spread = appendix_e_instance(&[0.0, 1.0, 2.0, 3.0, 4.0], 3, 1)?.empirical_c()?.unwrap_or(f64::NAN);
    let s = search_extremal(4, 3, 2, 0.5)?;
    let lower_ok = s.empirical_c >= 3.0 - 1e-6;
    let attained = (s.empirical_c - 3.0).abs() <= 1e-3;
    Ok((
        lower_ok && attained && spread >= 3.0 - 1e-6,
        format!(
            "equally spaced offsets: {spread:.6}; minimum over {} grid configurations: {:.9} at {:?}",
            s.evaluated, s.empirical_c, s.offsets
        ),
    ))
}

fn area_identity(mutation: Mutation) -> Result<(bool, String)> {
    let eps = 0.01;
    let gamma = if mutation == Mutation::ZeroGamma { 0.0 } else { eps / 4.0 };
    let r = planar_layout(eps, gamma)?.audit_cost();
    Ok((
        r.identity == Some(true) && r.nonnegativity == Some(true) && r.symmetry == Some(true),
        format!("gamma {gamma}: {} violations over {} tuples", r.violations.len(), r.audited),
    ))
}

/// Runs every check; `passed` is the conjunction.
pub fn cmd_verify(mutation: Mutation) -> VerifySummary {
    let checks = vec![
        check("no_gluing_instance", no_gluing()),
        check("planar_area_values", planar_values()),
        check("pair_hash_audit", pair_hash()),
        check("triple_hash_audit", triple_hash(mutation)),
        check("glue_marginals", glue_marginals()),
        check("coupling_triangle", coupling_triangle()),
        check("collinear_ratio", collinear_ratio()),
        check("area_cost_axioms", area_identity(mutation)),
    ];
    let passed = checks.iter().all(|c| c.passed);
    VerifySummary {
        mutation,
        checks,
        passed,
    }
}
