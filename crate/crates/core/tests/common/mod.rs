#![allow(dead_code)]

use proptest::prelude::*;
use rfim_core::graph::Graph;
use rfim_core::model::IsingInstance;
use rfim_core::spin::{PartialConfig, Spin};

/// Connected graph on `n` vertices: a random spanning tree plus extra edges.
pub fn connected_graph(n: usize, parents: &[usize], extra: &[bool]) -> Graph {
    let mut edges = Vec::new();
    for v in 1..n {
        edges.push((parents[v - 1] % v, v));
    }
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            if extra[k] && !edges.contains(&(i, j)) {
                edges.push((i, j));
            }
            k += 1;
        }
    }
    Graph::from_edges(n, edges).unwrap()
}

/// Random connected instance on 1..=max_n vertices with a random partial
/// boundary that leaves at least one vertex free.
pub fn arb_instance(max_n: usize, beta: f64, field: f64) -> impl Strategy<Value = IsingInstance> {
    (1usize..=max_n).prop_flat_map(move |n| {
        (
            proptest::collection::vec(any::<usize>(), n.saturating_sub(1)),
            proptest::collection::vec(prop::bool::weighted(0.3), n * (n - 1) / 2),
            proptest::collection::vec(-field..field, n),
            -beta..beta,
            proptest::collection::vec(0u8..6, n),
        )
            .prop_map(move |(parents, extra, fields, b, marks)| {
                let g = connected_graph(n, &parents, &extra);
                let boundary = PartialConfig::from_pairs(
                    n,
                    marks.iter().enumerate().skip(1).filter_map(|(v, &m)| match m {
                        0 => Some((v, Spin::Plus)),
                        1 => Some((v, Spin::Minus)),
                        _ => None,
                    }),
                )
                .unwrap();
                IsingInstance::new(g, b, fields, boundary).unwrap()
            })
    })
}
