#![no_main]

use libfuzzer_sys::fuzz_target;
use transgap::graph::{build_graph, SelfLoops};
use transgap::io::parse_edges;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let n = 64;
    if let Ok(edges) = parse_edges(text, n) {
        assert!(edges.iter().all(|&(u, v)| u < n && v < n && u != v));
        let g = build_graph(&edges, n, SelfLoops::Reject).expect("parsed edges build a graph");
        assert!(g.edge_count() <= edges.len());
    }
});
