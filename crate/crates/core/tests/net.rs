use nestlab_core::net::{
    custom_weights, density_tolerance, generate_geometric, generate_geometric_with_retries, is_connected,
    metropolis_weights, safeguard_weights, spectral, Graph, NetworkFile, WeightMatrix,
};
use proptest::prelude::*;

/// Connected graph: a random spanning tree plus extra edges.
fn connected_graph() -> impl Strategy<Value = Graph> {
    (2usize..12).prop_flat_map(|n| {
        let parents = proptest::collection::vec(any::<prop::sample::Index>(), n - 1);
        let extra = proptest::collection::vec((0..n, 0..n), 0..2 * n);
        (Just(n), parents, extra).prop_map(|(n, parents, extra)| {
            let mut edges: Vec<(usize, usize)> =
                parents.iter().enumerate().map(|(i, p)| (p.index(i + 1), i + 1)).collect();
            edges.extend(extra.into_iter().filter(|(a, b)| a != b));
            edges.sort_by_key(|&(a, b)| (a.min(b), a.max(b)));
            edges.dedup_by_key(|&mut (a, b)| (a.min(b), a.max(b)));
            Graph::new(n, edges).unwrap()
        })
    })
}

fn metropolis_entry(g: &Graph, i: usize, j: usize) -> f64 {
    let deg = g.degrees();
    if i != j {
        return if g.has_edge(i, j) { 1.0 / (1.0 + deg[i].max(deg[j]) as f64) } else { 0.0 };
    }
    1.0 - (0..g.n()).filter(|&l| l != i).map(|l| metropolis_entry(g, i, l)).sum::<f64>()
}

proptest! {
    #[test]
    fn metropolis_matches_degree_formula(g in connected_graph()) {
        let w = metropolis_weights(&g);
        for i in 0..g.n() {
            let row: f64 = w.row(i).iter().sum();
            prop_assert!((row - 1.0).abs() <= 1e-12);
            for j in 0..g.n() {
                prop_assert!((w.get(i, j) - metropolis_entry(&g, i, j)).abs() <= 1e-14);
                prop_assert_eq!(w.get(i, j), w.get(j, i));
                prop_assert!(w.get(i, j) >= 0.0);
            }
        }
        let s = spectral(&w);
        prop_assert!(s.assumption_1a());
        prop_assert!(s.has_unit_eigenvalue());
        prop_assert_eq!(w.support_graph().edge_count(), g.edge_count());
    }

    #[test]
    fn safeguard_maps_spectrum_affinely(g in connected_graph(), eta in 0.01f64..0.99) {
        let w = metropolis_weights(&g);
        let ws = safeguard_weights(&w, eta).unwrap();
        let mut before: Vec<f64> = spectral(&w).eigenvalues;
        let mut after: Vec<f64> = spectral(&ws).eigenvalues;
        before.iter_mut().for_each(|l| *l = (1.0 + eta) / 2.0 + (1.0 - eta) / 2.0 * *l);
        before.sort_by(f64::total_cmp);
        after.sort_by(f64::total_cmp);
        for (a, b) in before.iter().zip(&after) {
            prop_assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        }
        let s = spectral(&ws);
        prop_assert!(s.assumption_1b(eta));
        prop_assert!(s.assumption_1a());
    }

    #[test]
    fn network_file_round_trips(g in connected_graph()) {
        let file = NetworkFile { weights: metropolis_weights(&g), graph: g };
        let back = NetworkFile::parse(&file.to_text()).unwrap();
        prop_assert_eq!(back, file);
    }
}

#[test]
fn geometric_graphs_are_reproducible_and_on_target() {
    for (n, density, seed) in [(10, 0.4, 3u64), (20, 0.3, 11), (30, 0.2, 5)] {
        let a = generate_geometric(n, density, seed).unwrap();
        let b = generate_geometric(n, density, seed).unwrap();
        assert_eq!(a, b);
        assert!(is_connected(&a));
        assert!((a.relative_degree() - density).abs() <= density_tolerance(n), "n={n}: {}", a.relative_degree());
    }
    assert_ne!(generate_geometric(20, 0.3, 1).unwrap(), generate_geometric(20, 0.3, 2).unwrap());
}

#[test]
fn sparse_geometric_needs_a_retry_budget() {
    let g = generate_geometric_with_retries(30, 0.10, 7, 5000).unwrap();
    assert!(is_connected(&g));
    assert!(generate_geometric_with_retries(30, 0.01, 7, 5).is_err());
}

#[test]
fn invalid_weights_are_rejected() {
    assert!(custom_weights(2, &[vec![0.6, 0.5], vec![0.5, 0.5]]).is_err());
    assert!(custom_weights(2, &[vec![0.5, 0.5], vec![0.4, 0.6]]).is_err());
    assert!(custom_weights(2, &[vec![1.2, -0.2], vec![-0.2, 1.2]]).is_err());
    assert!(WeightMatrix::two_node(0.25).is_ok());
    assert!(safeguard_weights(&WeightMatrix::identity(3), 1.0).is_err());
}

#[test]
fn path_mu_matches_power_iteration() {
    // Power iteration restricted to the mean-zero subspace.
    let n = 6;
    let w = metropolis_weights(&Graph::path(n));
    let center = |v: &mut Vec<f64>| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter_mut().for_each(|x| *x -= mean);
    };
    let mut v: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin() + 0.1 * i as f64).collect();
    center(&mut v);
    let mut ratio = 0.0;
    for _ in 0..5000 {
        let mut next: Vec<f64> = (0..n).map(|i| (0..n).map(|j| w.get(i, j) * v[j]).sum()).collect();
        center(&mut next);
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        ratio = norm / v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = next.iter().map(|x| x / norm).collect();
    }
    assert!((spectral(&w).mu - ratio).abs() <= 1e-8, "{} vs {ratio}", spectral(&w).mu);
}
