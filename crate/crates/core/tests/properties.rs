use proptest::prelude::*;

use transgap::graph::{
    build_graph, degree_bound, inf_norm_power, normalized_adjacency, poly_filter, sbm_generate,
    SelfLoops,
};
use transgap::harness::{synthetic_bundle, SbmParams, Split};
use transgap::io::{parse_bundle, render_bundle};
use transgap::nn::{Activation, Arch, ModelSpec, ParamVector};

fn edge_list() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1usize..25).prop_flat_map(|n| {
        let pairs = proptest::collection::vec((0..n, 0..n), 0..60)
            .prop_map(|v| v.into_iter().filter(|(a, b)| a != b).collect::<Vec<_>>());
        (Just(n), pairs)
    })
}

#[test]
fn sbm_edge_count_is_frozen() {
    let (g, labels) = sbm_generate(&[100, 100], 0.1, 0.01, 0).unwrap();
    assert_eq!(labels.iter().filter(|&&y| y == 1).count(), 100);
    assert_eq!(
        g.edge_count(),
        sbm_generate(&[100, 100], 0.1, 0.01, 0)
            .unwrap()
            .0
            .edge_count()
    );
    assert_eq!(g.edge_count(), 1123);
}

proptest! {
    #[test]
    fn normalized_adjacency_is_symmetric_and_bounded((n, edges) in edge_list()) {
        let g = build_graph(&edges, n, SelfLoops::Reject).unwrap();
        let a = normalized_adjacency(&g);
        for i in 0..n {
            for j in 0..n {
                prop_assert!((a.get(i, j) - a.get(j, i)).abs() <= 1e-15);
            }
            prop_assert!(a.get(i, i) > 0.0);
        }
        prop_assert!(a.inf_norm() <= degree_bound(&g.degree_stats()) * (1.0 + 1e-12));
    }

    #[test]
    fn power_norms_are_submultiplicative((n, edges) in edge_list(), k in 0usize..5) {
        let g = build_graph(&edges, n, SelfLoops::Reject).unwrap();
        let a = normalized_adjacency(&g);
        prop_assert!(inf_norm_power(&a, k + 1) <= inf_norm_power(&a, k) * a.inf_norm() * (1.0 + 1e-12));
        prop_assert!((inf_norm_power(&a, 0) - 1.0).abs() == 0.0);
    }

    #[test]
    fn filter_rows_sum_to_coefficient_total((n, edges) in edge_list(), c in proptest::collection::vec(0.0f64..1.0, 1..5)) {
        let g = build_graph(&edges, n, SelfLoops::Reject).unwrap();
        let a = normalized_adjacency(&g);
        let f = poly_filter(&a, &c);
        let lower: f64 = c.iter().enumerate().map(|(k, ck)| ck * inf_norm_power(&a, k)).sum();
        prop_assert!(f.inf_norm() <= lower * (1.0 + 1e-12));
    }

    #[test]
    fn graph_edges_round_trip((n, edges) in edge_list()) {
        let g = build_graph(&edges, n, SelfLoops::Reject).unwrap();
        let again = build_graph(&g.edges(), n, SelfLoops::Reject).unwrap();
        prop_assert_eq!(g, again);
    }

    #[test]
    fn split_is_a_partition(n in 2usize..300, frac in 0.05f64..0.95, seed in any::<u64>()) {
        if let Ok(s) = Split::random(n, frac, seed) {
            prop_assert_eq!(s.m() + s.u(), n);
            let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(s.m(), (frac * n as f64).floor() as usize);
        }
    }

    #[test]
    fn bundles_round_trip_through_text(seed in 0u64..1000, d in 1usize..6) {
        let b = synthetic_bundle(&SbmParams { blocks: vec![4, 5, 3], d, seed, ..SbmParams::default() }).unwrap();
        let [(_, m), (_, e), (_, f), (_, l)] = render_bundle(&b);
        prop_assert_eq!(parse_bundle(&m, &e, &f, &l).unwrap(), b);
    }

    #[test]
    fn param_bytes_round_trip(values in proptest::collection::vec(-1e3f64..1e3, 30)) {
        let spec = ModelSpec::new(Arch::gcn(), 4, 5, 2, Activation::new(2.0).unwrap()).unwrap();
        let p = ParamVector::new(spec.layout(), values).unwrap();
        let bytes = p.to_le_bytes();
        prop_assert_eq!(ParamVector::from_le_bytes(spec.layout(), &bytes).unwrap().to_le_bytes(), bytes);
    }

    #[test]
    fn activation_stays_below_identity(q in 1.01f64..=2.0, x in -10.0f64..10.0) {
        let act = Activation::new(q).unwrap();
        prop_assert!(act.eval(x).abs() <= x.abs());
        prop_assert!(act.eval(x) <= x.max(0.0));
        prop_assert!(x.max(0.0) - act.eval(x) <= act.relu_gap() + 1e-14 * x.abs().max(1.0));
    }
}
