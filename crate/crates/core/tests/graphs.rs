use std::path::Path;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mmot::graphs::{generate, nonbacktracking_matrix, parse_edge_list, perturb_and_prune, signature, Graph, GraphFamily};
use mmot::linalg::eig_general;
use mmot::Error;

fn moduli(g: &Graph) -> Vec<f64> {
    let mut m: Vec<f64> = eig_general(&nonbacktracking_matrix(g).unwrap())
        .unwrap()
        .values()
        .iter()
        .map(|z| z.norm())
        // zero has nilpotent blocks when the graph has trees attached,
        // and is only resolved to roughly eps^(1/size)
        .filter(|&r| r > 0.1)
        .collect();
    m.sort_by(f64::total_cmp);
    m
}

fn cycle(n: usize) -> Graph {
    generate(&GraphFamily::Cycle { n }, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
}

fn arb_graph() -> impl Strategy<Value = Graph> {
    (4usize..9, any::<u64>(), 0.3f64..0.8).prop_map(|(n, seed, p)| {
        generate(&GraphFamily::ErdosRenyi { n, p }, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    })
}

#[test]
fn cycle_spectra_are_roots_of_unity() {
    for n in [4, 5] {
        let s = eig_general(&nonbacktracking_matrix(&cycle(n)).unwrap()).unwrap();
        assert_eq!(s.len(), 2 * n);
        for z in s.values() {
            assert!((z.norm() - 1.0).abs() < 1e-9);
            assert!((z.powu(n as u32) - 1.0).norm() < 1e-8);
        }
    }
    let has = |n: usize, re: f64, im: f64| {
        signature(&cycle(n), 16).unwrap().values().iter().any(|z| (z.re - re).abs() < 1e-9 && (z.im - im).abs() < 1e-9)
    };
    let t = 2.0 * std::f64::consts::PI / 5.0;
    assert!(has(4, 0.0, 1.0) && !has(5, 0.0, 1.0));
    assert!(has(5, t.cos(), t.sin()) && !has(4, t.cos(), t.sin()));
}

#[test]
fn regular_graph_leading_eigenvalue_is_degree_minus_one() {
    let g = generate(&GraphFamily::Hypercube { dim: 3 }, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let lead = signature(&g, 1).unwrap().values()[0];
    assert!((lead.re - 2.0).abs() < 1e-9 && lead.im.abs() < 1e-9);
}

#[test]
fn edge_list_errors_carry_line_numbers() {
    let err = parse_edge_list("u,v,weight\n0,1,1\n1,1,1\n".as_bytes(), Path::new("g.csv")).unwrap_err();
    assert!(err.to_string().contains('3'), "{err}");
    let g = parse_edge_list("0,1,2\n1,2,1\n".as_bytes(), Path::new("g.csv")).unwrap();
    assert_eq!(g.weight(0, 1), 2);
    assert_eq!(g.edge_count(), 2);
}

#[test]
fn generated_families_have_expected_sizes() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cases = [
        (GraphFamily::Complete { n: 6 }, 6, 15),
        (GraphFamily::CompleteBipartite { a: 3, b: 4 }, 7, 12),
        (GraphFamily::Hypercube { dim: 3 }, 8, 12),
        (GraphFamily::KhopLattice { n: 12, k: 2 }, 12, 24),
        (GraphFamily::Grid2dPeriodic { rows: 3, cols: 4 }, 12, 24),
    ];
    for (f, n, m) in cases {
        let g = generate(&f, &mut rng).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (n, m), "{f:?}");
    }
}

proptest! {
    #[test]
    fn nb_row_sums_are_head_degree_minus_one(g in arb_graph()) {
        prop_assume!(g.edge_count() > 0);
        let b = nonbacktracking_matrix(&g).unwrap();
        for (k, (u, v, _)) in g.edges().into_iter().enumerate() {
            for (row, head) in [(2 * k, v), (2 * k + 1, u)] {
                let s: f64 = b.row(row).iter().sum();
                prop_assert_eq!(s, (g.degree(head) - 1) as f64);
            }
        }
    }

    #[test]
    fn spectrum_is_relabeling_invariant(g in arb_graph(), seed in any::<u64>()) {
        prop_assume!(g.edge_count() > 0);
        let mut perm: Vec<usize> = (0..g.node_count()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let h = g.relabel(&perm).unwrap();
        prop_assert_eq!(h.edge_count(), g.edge_count());
        let (a, b) = (moduli(&g), moduli(&h));
        prop_assert_eq!(a.len(), b.len());
        for (a, b) in a.iter().zip(b) {
            prop_assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn spectrum_trace_is_zero(g in arb_graph()) {
        prop_assume!(g.edge_count() > 0);
        let s = eig_general(&nonbacktracking_matrix(&g).unwrap()).unwrap();
        prop_assert!(s.sum().norm() < 1e-6);
    }

    #[test]
    fn pruned_graphs_have_no_isolated_nodes(g in arb_graph(), seed in any::<u64>()) {
        // an edgeless perturbation has no survivors
        match perturb_and_prune(&g, 0.1, &mut ChaCha8Rng::seed_from_u64(seed)) {
            Ok(h) => prop_assert!(h.degrees().iter().all(|&d| d >= 1)),
            Err(e) => prop_assert!(matches!(e, Error::DegenerateGraph(_)), "{}", e),
        }
    }
}
