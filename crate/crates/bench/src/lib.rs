//! Fixtures shared by the benchmarks in `benches/`.

use rfim_core::randgen::{gen_er_graph, gen_fields, FieldSpec};
use rfim_core::IsingInstance;

/// `G(n, Δ/n)` with `N(0, variance)` fields and a free boundary.
pub fn er_instance(n: usize, delta: f64, beta: f64, variance: f64, seed: u64) -> IsingInstance {
    let g = gen_er_graph(n, delta, seed).expect("valid edge probability");
    let h = gen_fields(n, &FieldSpec::Gaussian { variance }, seed, None)
        .expect("valid field spec")
        .h;
    IsingInstance::free(g, beta, h).expect("matching lengths")
}
