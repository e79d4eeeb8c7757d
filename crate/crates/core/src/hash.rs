//! Index maps that distribute leave-one-out terms over triples, with
//! exhaustive audits of their collision counts. All indices are 1-based.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `n` the audits accept by default.
pub const AUDIT_CAP: usize = 60;
/// Collision bound for the three-index map.
pub const MAX_MULTIPLICITY: usize = 5;

/// `(a, b, c)` with `a <= b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub a: usize,
    pub b: usize,
    pub c: usize,
}

impl Triple {
    /// Orders the first two components.
    pub fn new(x: usize, y: usize, c: usize) -> Self {
        Self {
            a: x.min(y),
            b: x.max(y),
            c,
        }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.a, self.b, self.c)
    }
}

fn check_index(name: &str, v: usize, lo: usize, hi: usize) -> Result<()> {
    if v < lo || v > hi {
        return Err(Error::invalid(format!("{name} = {v} outside [{lo}, {hi}]")));
    }
    Ok(())
}

/// `1 + ((i - 2) mod n)` with the nonnegative residue.
pub fn h(i: usize, n: usize) -> Result<usize> {
    check_index("i", i, 1, n)?;
    Ok(1 + (i as i64 - 2).rem_euclid(n as i64) as usize)
}

/// `1 + ((i + r - 1) mod n)` for `i < n`, `1 + (r mod (n - 1))` for `i = n`.
pub fn h_prime(i: usize, r: usize, n: usize) -> Result<usize> {
    check_index("i", i, 1, n)?;
    check_index("r", r, 1, n.saturating_sub(1))?;
    Ok(h_prime_unchecked(i, r, n))
}

fn h_prime_unchecked(i: usize, r: usize, n: usize) -> usize {
    if i < n {
        1 + (i + r - 1) % n
    } else {
        1 + r % (n - 1)
    }
}

/// Image of the pair `(i, j)`, `1 <= i < j <= n`, as 2 to 4 triples over
/// `[n + 1]`.
pub fn big_h(i: usize, j: usize, n: usize) -> Result<Vec<Triple>> {
    check_index("j", j, 2, n)?;
    check_index("i", i, 1, j - 1)?;
    let (hi, hj) = (h(i, n)?, h(j, n)?);
    let mut out = Vec::with_capacity(4);
    if j == n && i == 1 {
        out.push(Triple::new(i, n + 1, hi));
    } else {
        out.push(Triple::new(i, j, hi));
        out.push(Triple::new(j, n + 1, hi));
    }
    if i == j - 1 {
        out.push(Triple::new(j, n + 1, hj));
    } else {
        out.push(Triple::new(i, j, hj));
        out.push(Triple::new(i, n + 1, hj));
    }
    Ok(out)
}

/// Image of `(i, j, r)`, `1 <= i < j <= n`, `1 <= r <= n - 1`.
pub fn big_h_prime(i: usize, j: usize, r: usize, n: usize) -> Result<Vec<Triple>> {
    big_h_prime_with(i, j, r, n, &h_prime_unchecked)
}

/// As [`big_h_prime`] with a substitute for `h'`, for mutation checks.
pub fn big_h_prime_with(
    i: usize,
    j: usize,
    r: usize,
    n: usize,
    hp: &dyn Fn(usize, usize, usize) -> usize,
) -> Result<Vec<Triple>> {
    check_index("j", j, 2, n)?;
    check_index("i", i, 1, j - 1)?;
    check_index("r", r, 1, n - 1)?;
    let half = |x: usize, y: usize| {
        let c = hp(x, r, n);
        if y == c {
            vec![Triple::new(x, r, c)]
        } else {
            vec![Triple::new(x, y, c), Triple::new(y, r, c)]
        }
    };
    let mut out = half(i, j);
    out.extend(half(j, i));
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RangeViolation {
    /// The input tuple: `(i, j)` or `(i, j, r)`.
    pub input: Vec<usize>,
    pub triple: Triple,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HashAudit {
    pub n: usize,
    pub triples: usize,
    /// Largest number of inputs sharing one output, counted per `r` for the
    /// three-index map.
    pub max_multiplicity: usize,
    /// Largest multiplicity with all `r` pooled (three-index map only).
    pub pooled_max_multiplicity: Option<usize>,
    /// multiplicity -> number of distinct triples with it.
    pub histogram: BTreeMap<usize, usize>,
    pub over_limit: Vec<(Triple, usize)>,
    pub range_violations: Vec<RangeViolation>,
    pub passes: bool,
}

fn check_n(n: usize, cap: usize) -> Result<()> {
    if n < 2 || n > cap {
        return Err(Error::invalid(format!("audit size n = {n} outside [2, {cap}]")));
    }
    Ok(())
}

/// Exhaustive check that the pair map produces no duplicate triple and
/// that each `(a, b, c)` satisfies `a < b <= n + 1`, `c <= n`, `c ∉ {a, b}`.
pub fn audit_big_h(n: usize) -> Result<HashAudit> {
    check_n(n, AUDIT_CAP)?;
    let mut counts: BTreeMap<Triple, usize> = BTreeMap::new();
    let mut range_violations = Vec::new();
    for i in 1..=n {
        for j in (i + 1)..=n {
            for t in big_h(i, j, n)? {
                if !(1 <= t.a && t.a < t.b && t.b <= n + 1 && 1 <= t.c && t.c <= n && t.c != t.a && t.c != t.b) {
                    range_violations.push(RangeViolation { input: vec![i, j], triple: t });
                }
                *counts.entry(t).or_default() += 1;
            }
        }
    }
    let over_limit: Vec<(Triple, usize)> = counts.iter().filter(|(_, &c)| c > 1).map(|(&t, &c)| (t, c)).collect();
    let mut histogram = BTreeMap::new();
    for &c in counts.values() {
        *histogram.entry(c).or_default() += 1;
    }
    Ok(HashAudit {
        n,
        triples: counts.values().sum(),
        max_multiplicity: counts.values().copied().max().unwrap_or(0),
        pooled_max_multiplicity: None,
        histogram,
        passes: over_limit.is_empty() && range_violations.is_empty(),
        over_limit,
        range_violations,
    })
}

pub fn audit_big_h_prime(n: usize) -> Result<HashAudit> {
    audit_big_h_prime_with(n, &h_prime_unchecked)
}

/// Exhaustive multiplicity audit of the three-index map: for every `r`,
/// no triple may arise from more than [`MAX_MULTIPLICITY`] inputs, and every
/// triple must satisfy `a <= b <= n`, `c <= n`, `c ∉ {a, b}`.
pub fn audit_big_h_prime_with(n: usize, hp: &dyn Fn(usize, usize, usize) -> usize) -> Result<HashAudit> {
    check_n(n, AUDIT_CAP)?;
    let mut pooled: BTreeMap<Triple, usize> = BTreeMap::new();
    let mut histogram = BTreeMap::new();
    let mut range_violations = Vec::new();
    let mut over_limit = Vec::new();
    let mut max_multiplicity = 0;
    let mut triples = 0;
    for r in 1..n {
        let mut counts: BTreeMap<Triple, usize> = BTreeMap::new();
        for i in 1..=n {
            for j in (i + 1)..=n {
                for t in big_h_prime_with(i, j, r, n, hp)? {
                    if !(1 <= t.a && t.a <= t.b && t.b <= n && 1 <= t.c && t.c <= n && t.c != t.a && t.c != t.b) {
                        range_violations.push(RangeViolation { input: vec![i, j, r], triple: t });
                    }
                    *counts.entry(t).or_default() += 1;
                }
            }
        }
        for (&t, &c) in &counts {
            triples += c;
            *histogram.entry(c).or_default() += 1;
            *pooled.entry(t).or_default() += c;
            max_multiplicity = max_multiplicity.max(c);
            if c > MAX_MULTIPLICITY {
                over_limit.push((t, c));
            }
        }
    }
    Ok(HashAudit {
        n,
        triples,
        max_multiplicity,
        pooled_max_multiplicity: pooled.values().copied().max(),
        histogram,
        passes: over_limit.is_empty() && range_violations.is_empty(),
        over_limit,
        range_violations,
    })
}

/// Inputs `(i, j, r)` whose image contains `t`; restricted to one `r` when
/// given, pooled over all `r` otherwise.
pub fn h_prime_preimage(t: Triple, n: usize, r: Option<usize>) -> Result<Vec<[usize; 3]>> {
    check_n(n, usize::MAX)?;
    let rs: Vec<usize> = match r {
        Some(r) => {
            check_index("r", r, 1, n - 1)?;
            vec![r]
        }
        None => (1..n).collect(),
    };
    let mut out = Vec::new();
    for r in rs {
        for i in 1..=n {
            for j in (i + 1)..=n {
                out.extend(
                    big_h_prime(i, j, r, n)?
                        .into_iter()
                        .filter(|&u| u == t)
                        .map(|_| [i, j, r]),
                );
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(a: usize, b: usize, c: usize) -> Triple {
        Triple::new(a, b, c)
    }

    #[test]
    fn scalar_maps() {
        assert_eq!(h(1, 3).unwrap(), 3);
        assert_eq!(h(2, 3).unwrap(), 1);
        assert_eq!(h(2, 10).unwrap(), 1);
        assert!(h(0, 3).is_err() && h(4, 3).is_err());
        assert_eq!(h_prime(1, 1, 4).unwrap(), 2);
        assert_eq!(h_prime(4, 1, 4).unwrap(), 2);
        assert_eq!(h_prime(3, 2, 5).unwrap(), 5);
        assert!(h_prime(1, 4, 4).is_err());
    }

    #[test]
    fn pair_map_small_case() {
        assert_eq!(big_h(1, 2, 3).unwrap(), vec![t(1, 2, 3), t(2, 4, 3), t(2, 4, 1)]);
        assert_eq!(big_h(1, 3, 3).unwrap(), vec![t(1, 4, 3), t(1, 3, 2), t(1, 4, 2)]);
        assert_eq!(big_h(2, 3, 3).unwrap(), vec![t(2, 3, 1), t(3, 4, 1), t(3, 4, 2)]);
        assert!(big_h(2, 2, 3).is_err());
        let a = audit_big_h(3).unwrap();
        assert!(a.passes);
        assert_eq!(a.triples, 9);
    }

    #[test]
    fn triple_map_examples() {
        for (i, j, r) in [(1, 2, 3), (1, 3, 2), (2, 3, 2), (2, 3, 3), (2, 4, 3)] {
            assert!(big_h_prime(i, j, r, 4).unwrap().contains(&t(2, 3, 1)), "{i},{j},{r}");
        }
        assert!(big_h_prime(1, 2, 1, 4).unwrap().contains(&t(1, 1, 2)));
        assert!(big_h_prime(1, 4, 1, 4).unwrap().contains(&t(1, 1, 2)));
        assert_eq!(h_prime_preimage(t(2, 3, 1), 4, None).unwrap().len(), 5);
    }

    #[test]
    fn corrupted_h_prime_fails() {
        let off_by_one = |i: usize, r: usize, n: usize| if i < n { 1 + (i + r) % n } else { 1 + r % (n - 1) };
        assert!(!audit_big_h_prime_with(8, &off_by_one).unwrap().passes);
        assert!(audit_big_h_prime(8).unwrap().passes);
    }
}
