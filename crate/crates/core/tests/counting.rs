mod common;

use proptest::prelude::*;
use rfim_core::counting::{
    approx_partition, approx_sample, check_instance, choose_depth, strong_field_threshold, CountOptions, Depth,
    SequentialSampler,
};
use rfim_core::graph::Graph;
use rfim_core::model::{exact_distribution, exact_partition, IsingInstance};
use rfim_core::rng::seeded;
use rfim_core::spin::Spin;
use rfim_core::stats::{empirical_law, tv_distance, Estimate};

fn exact_opts() -> CountOptions {
    CountOptions::new(0.1).with_depth(Depth::Unbounded)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn full_trees_telescope_exactly(inst in common::arb_instance(10, 2.0, 5.0)) {
        let r = approx_partition(&inst, &exact_opts()).unwrap();
        let exact = exact_partition(&inst).unwrap();
        prop_assert!((r.log_z - exact).abs() < 1e-9, "{} vs {exact}", r.log_z);
        prop_assert!(r.accepted);
    }

    #[test]
    fn greedy_path_is_never_unlikely(inst in common::arb_instance(8, 2.0, 3.0)) {
        let r = approx_partition(&inst, &exact_opts()).unwrap();
        let d = exact_distribution(&inst).unwrap();
        let free = inst.free_vertices().len() as i32;
        prop_assert!(d.prob(&r.spins) >= 2f64.powi(-free) * (1.0 - 1e-12));
    }

    #[test]
    fn accepted_certificates_are_sound(
        inst in common::arb_instance(12, 1.0, 8.0),
        eps in prop::sample::select(vec![0.1, 0.01]),
    ) {
        let opts = CountOptions::new(eps);
        let check = check_instance(&inst, &opts).unwrap();
        if check.accepted {
            let r = approx_partition(&inst, &opts).unwrap();
            let exact = exact_partition(&inst).unwrap();
            prop_assert!(r.accepted);
            prop_assert!((r.log_z - exact).abs() <= r.certified_rel_err + 1e-9);
            prop_assert!((r.log_z - exact).abs() <= eps);
            prop_assert!(r.certified_rel_err <= check.plan.total_bound + 1e-12);
        }
    }

    #[test]
    fn fixed_depth_errors_are_sound(inst in common::arb_instance(8, 1.5, 4.0), depth in 1usize..5) {
        let opts = CountOptions::new(0.5).with_depth(Depth::Fixed(depth));
        if let Ok(r) = approx_partition(&inst, &opts) {
            let exact = exact_partition(&inst).unwrap();
            prop_assert!((r.log_z - exact).abs() <= r.certified_rel_err + 1e-9);
        }
    }
}

#[test]
fn depth_formula() {
    assert_eq!(choose_depth(100, 0.1, 0.1, 1.0, 0).unwrap(), ((4000f64).ln()).ceil() as usize);
    assert_eq!(choose_depth(100, 0.1, 0.1, 1.0, 0).unwrap(), 9);
}

#[test]
fn outputs_are_deterministic() {
    let g = Graph::cycle(9);
    let inst = IsingInstance::free(g, 0.7, (0..9).map(|i| 4.0 + i as f64 * 0.3).collect()).unwrap();
    let opts = CountOptions::new(0.05);
    let a = serde_json::to_string(&approx_partition(&inst, &opts).unwrap()).unwrap();
    let b = serde_json::to_string(&approx_partition(&inst, &opts).unwrap()).unwrap();
    assert_eq!(a, b);
    let s1 = approx_sample(&inst, &opts, 17).unwrap();
    let s2 = approx_sample(&inst, &opts, 17).unwrap();
    assert_eq!(s1.config, s2.config);
}

#[test]
fn independent_spins_at_zero_coupling() {
    let fields = [0.4, -0.9, 0.0, 1.3];
    let inst = IsingInstance::free(Graph::cycle(4), 0.0, fields.to_vec()).unwrap();
    let mut sampler = SequentialSampler::new(&inst, &exact_opts()).unwrap();
    let mut rng = seeded(8);
    let trials = 100_000u64;
    let mut plus = [0u64; 4];
    for _ in 0..trials {
        let s = sampler.sample(&mut rng).unwrap();
        for (v, count) in plus.iter_mut().enumerate() {
            *count += u64::from(s.config.get(v) == Spin::Plus);
        }
    }
    for (v, &h) in fields.iter().enumerate() {
        let p = 1.0 / (1.0 + (-2.0 * h).exp());
        let e = Estimate::from_counts(plus[v], trials);
        assert!((e.mean - p).abs() <= 3.0 * (p * (1.0 - p) / trials as f64).sqrt(), "v={v}: {} vs {p}", e.mean);
    }
}

#[test]
fn triangle_sampler_matches_gibbs() {
    let inst = IsingInstance::free(Graph::cycle(3), 1.0, vec![0.2, -0.3, 0.4]).unwrap();
    let exact = exact_distribution(&inst).unwrap();
    let mut sampler = SequentialSampler::new(&inst, &exact_opts()).unwrap();
    let mut rng = seeded(21);
    let masks: Vec<u64> = (0..100_000).map(|_| exact.mask_of(&sampler.sample(&mut rng).unwrap().config)).collect();
    let tv = tv_distance(&empirical_law(masks, 8), &exact.probs);
    assert!(tv <= 0.01, "tv = {tv}");
}

#[test]
fn strong_fields_pass_the_check() {
    let g = Graph::regular_tree(3, 5);
    let beta = 1.2;
    let h = strong_field_threshold(3, beta);
    let fields: Vec<f64> = (0..g.n()).map(|v| if v % 2 == 0 { h } else { -h - 0.5 }).collect();
    let inst = IsingInstance::free(g, beta, fields).unwrap();
    let r = check_instance(&inst, &CountOptions::new(0.01)).unwrap();
    assert!(r.accepted, "{:?}", r.reason);
    assert!(r.plan.certificate.accepted());
}
