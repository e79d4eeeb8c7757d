use proptest::prelude::*;

use mmot::lp::{solve, solve_with, LpProblem, LpStatus, PivotRule, SimplexOptions};
use mmot::transport::{lower_bound_pairwise, mmot, pairwise_mmot, wasserstein, CostTensor, PairwiseCost};
use mmot::{Atom, DiscreteDistribution};

fn dist(points: &[(f64, f64)], weights: &[f64]) -> DiscreteDistribution {
    let s: f64 = weights.iter().sum();
    DiscreteDistribution::new(
        points.iter().map(|&(x, y)| Atom::Point(x, y)).collect(),
        weights.iter().map(|w| w / s).collect(),
    )
    .unwrap()
}

fn arb_dist() -> impl Strategy<Value = DiscreteDistribution> {
    (1usize..=4).prop_flat_map(|m| {
        (
            prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), m),
            prop::collection::vec(0.05f64..1.0, m),
        )
            .prop_map(|(p, w)| dist(&p, &w))
    })
}

#[test]
fn lp_reports_unbounded_and_infeasible() {
    // min -x0 s.t. x0 - x1 = 0
    let p = LpProblem::new(vec![-1.0, 0.0], vec![1.0, -1.0], vec![0.0]).unwrap();
    assert_eq!(solve(&p).unwrap().status, LpStatus::Unbounded);
    // x0 + x1 = -1 with x >= 0
    let p = LpProblem::new(vec![1.0, 1.0], vec![1.0, 1.0], vec![-1.0]).unwrap();
    assert_eq!(solve(&p).unwrap().status, LpStatus::Infeasible);
}

#[test]
fn lp_handles_redundant_rows() {
    let p = LpProblem::new(
        vec![1.0, 2.0, 3.0],
        vec![1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 0.0, 1.0, 1.0],
        vec![1.0, 2.0, 0.5],
    )
    .unwrap();
    let s = solve(&p).unwrap();
    assert_eq!(s.status, LpStatus::Optimal);
    assert!((s.value - 1.5).abs() < 1e-12);
    assert!(p.residual(&s.x) < 1e-12);
}

#[test]
fn wasserstein_of_point_masses_is_distance() {
    let p = DiscreteDistribution::point_mass(Atom::Point(0.0, 0.0));
    let q = DiscreteDistribution::point_mass(Atom::Point(3.0, 4.0));
    let d = PairwiseCost::euclidean(&[p.clone(), q.clone()]).unwrap();
    for ell in 1..=3 {
        assert!((wasserstein(&p, &q, d.pair(0, 1).unwrap(), ell).unwrap().value - 5.0).abs() < 1e-12);
    }
}

#[test]
fn two_marginal_mmot_matches_wasserstein() {
    let p = dist(&[(0.0, 0.0), (1.0, 0.0), (0.0, 2.0)], &[1.0, 2.0, 3.0]);
    let q = dist(&[(0.5, 0.5), (2.0, 1.0)], &[1.0, 1.0]);
    let d = PairwiseCost::euclidean(&[p.clone(), q.clone()]).unwrap();
    let w = wasserstein(&p, &q, d.pair(0, 1).unwrap(), 2).unwrap().value;
    let c = CostTensor::summed_pairwise(&d, 1 << 20).unwrap();
    let m = mmot(&[p, q], &c, 2).unwrap().value;
    assert!((w - m).abs() < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pivot_rules_agree(c in prop::collection::vec(-1.0f64..1.0, 6), a in prop::collection::vec(-1.0f64..1.0, 12), b in prop::collection::vec(-0.5f64..0.5, 2)) {
        let mut rows = vec![1.0; 6];
        rows.extend(a);
        let mut rhs = vec![1.0];
        rhs.extend(b);
        let p = LpProblem::new(c, rows, rhs).unwrap();
        let bland = solve(&p).unwrap();
        let dantzig = solve_with(&p, &SimplexOptions { rule: PivotRule::DantzigWithBlandFallback, ..SimplexOptions::default() }).unwrap();
        prop_assert_eq!(bland.status, dantzig.status);
        if bland.status == LpStatus::Optimal {
            prop_assert!((bland.value - dantzig.value).abs() < 1e-9);
            prop_assert!(p.residual(&bland.x) < 1e-9);
            prop_assert!(bland.x.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn coupling_has_the_given_marginals(ds in prop::collection::vec(arb_dist(), 3)) {
        let r = pairwise_mmot(&ds, &PairwiseCost::euclidean(&ds).unwrap(), 1).unwrap();
        for (axis, d) in ds.iter().enumerate() {
            let m = r.coupling.axis_marginal(axis).unwrap();
            for (a, b) in m.iter().zip(d.masses()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
        let terms: f64 = r.per_pair_terms.unwrap().values().sum();
        prop_assert!((terms - r.value).abs() < 1e-9);
    }

    #[test]
    fn pairwise_value_bounds(ds in prop::collection::vec(arb_dist(), 3)) {
        let d = PairwiseCost::euclidean(&ds).unwrap();
        let v = pairwise_mmot(&ds, &d, 1).unwrap().value;
        prop_assert!(lower_bound_pairwise(&ds, &d).unwrap() <= v + 1e-9);
    }

    #[test]
    fn wasserstein_symmetric_and_triangular(p in arb_dist(), q in arb_dist(), r in arb_dist(), ell in 1u32..=2) {
        let all = [p, q, r];
        let w = |i: usize, j: usize| {
            let d = PairwiseCost::euclidean(&[all[i].clone(), all[j].clone()]).unwrap();
            wasserstein(&all[i], &all[j], d.pair(0, 1).unwrap(), ell).unwrap().value
        };
        prop_assert!((w(0, 1) - w(1, 0)).abs() < 1e-9);
        prop_assert!(w(0, 2) <= w(0, 1) + w(1, 2) + 1e-9);
        prop_assert!(w(0, 0).abs() < 1e-9);
    }
}
