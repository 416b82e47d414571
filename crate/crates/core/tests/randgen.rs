use rfim_core::graph::Graph;
use rfim_core::randgen::{bad_path_stats, gen_er_graph, gen_fields, neighborhood_growth, FieldSpec, FieldsFile};
use rfim_core::stats::MeanEstimate;

const GOLDEN_GRAPH: &str = include_str!("golden/er_30_3_seed7.json");
const GOLDEN_FIELDS: &str = include_str!("golden/gaussian_12_seed7.json");

#[test]
fn golden_outputs_are_stable() {
    let g = gen_er_graph(30, 3.0, 7).unwrap();
    assert_eq!(g.to_json(), GOLDEN_GRAPH.trim_end());
    let f = gen_fields(12, &FieldSpec::Gaussian { variance: 4.0 }, 7, None).unwrap();
    assert_eq!(serde_json::to_string(&f).unwrap(), GOLDEN_FIELDS.trim_end());
}

#[test]
fn graph_roundtrip_preserves_edges() {
    let g = gen_er_graph(50, 4.0, 11).unwrap();
    assert_eq!(Graph::from_json(&g.to_json()).unwrap(), g);
}

#[test]
fn edge_count_is_binomial() {
    let (n, delta) = (2000usize, 3.0);
    let counts: MeanEstimate = (0..100).map(|s| gen_er_graph(n, delta, s).unwrap().edge_count() as f64).collect();
    let pairs = (n * (n - 1) / 2) as f64;
    let p = delta / n as f64;
    let expect = pairs * p;
    let se = (pairs * p * (1.0 - p) / 100.0).sqrt();
    assert!((counts.mean - expect).abs() <= 3.0 * se, "{} vs {expect}", counts.mean);
}

#[test]
fn degrees_follow_binomial_law() {
    let (n, delta) = (200usize, 3.0);
    let p = delta / n as f64;
    let bins = 9;
    let mut observed = vec![0f64; bins];
    for seed in 0..1000 {
        let g = gen_er_graph(n, delta, seed).unwrap();
        for v in 0..n {
            observed[g.degree(v).min(bins - 1)] += 1.0;
        }
    }
    let total: f64 = observed.iter().sum();
    let mut pmf = Vec::with_capacity(bins);
    let mut term = (1.0 - p).powi(n as i32 - 1);
    for k in 0..bins - 1 {
        pmf.push(term);
        term *= (n - 1 - k) as f64 / (k + 1) as f64 * p / (1.0 - p);
    }
    pmf.push(1.0 - pmf.iter().sum::<f64>());
    let chi2: f64 = observed
        .iter()
        .zip(&pmf)
        .map(|(o, q)| (o - total * q).powi(2) / (total * q))
        .sum();
    // 0.999 quantile of chi-square with 8 degrees of freedom.
    assert!(chi2 < 26.12, "chi2 = {chi2}");
}

#[test]
fn gaussian_variance_and_tail() {
    let h = 9.0;
    let f = gen_fields(1_000_000, &FieldSpec::Gaussian { variance: h }, 3, None).unwrap().h;
    let stats: MeanEstimate = f.iter().copied().collect();
    assert!((stats.variance() / h - 1.0).abs() < 0.01);
    let n = f.len() as f64;
    for c in [0.1, 0.5, 1.0, 2.0] {
        let frac = f.iter().filter(|x| x.abs() < c).count() as f64 / n;
        let bound = (2.0 / std::f64::consts::PI).sqrt() * c / h.sqrt();
        assert!(frac <= bound + 3.0 * (frac * (1.0 - frac) / n).sqrt(), "c={c}: {frac} vs {bound}");
    }
    assert!(gen_fields(5, &FieldSpec::Gaussian { variance: 0.0 }, 1, None).unwrap().h.iter().all(|&x| x == 0.0));
}

#[test]
fn two_point_frequencies() {
    let spec = FieldSpec::TwoPoint { h: 1.5, weights: [0.3, 0.7] };
    let f = gen_fields(100_000, &spec, 5, None).unwrap().h;
    assert!(f.iter().all(|&x| x == 1.5 || x == -1.5));
    let frac = f.iter().filter(|&&x| x > 0.0).count() as f64 / f.len() as f64;
    assert!((frac - 0.3).abs() <= 3.0 * (0.21f64 / 1e5).sqrt());
    assert!(FieldSpec::TwoPoint { h: 1.0, weights: [0.3, 0.3] }.validate().is_err());
}

#[test]
fn fields_file_spec_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.json");
    let f = gen_fields(7, &FieldSpec::Gaussian { variance: 2.0 }, 9, None).unwrap();
    std::fs::write(&path, serde_json::to_string(&f).unwrap()).unwrap();
    assert_eq!(FieldsFile::load(&path).unwrap(), f);
    let again = gen_fields(7, &FieldSpec::File { path: "f.json".into() }, 0, Some(dir.path())).unwrap();
    assert_eq!(again.h, f.h);
    assert!(gen_fields(8, &FieldSpec::File { path: "f.json".into() }, 0, Some(dir.path())).is_err());
}

#[test]
fn saw_levels_dominate_spheres() {
    for seed in 0..20 {
        let g = gen_er_graph(60, 3.0, seed).unwrap();
        for v in [0, 17, 42] {
            let sphere = neighborhood_growth(&g, v, 8, false, usize::MAX).unwrap();
            let saw = neighborhood_growth(&g, v, 8, true, usize::MAX).unwrap();
            assert!(sphere.iter().zip(&saw).all(|(s, t)| s <= t), "{sphere:?} {saw:?}");
        }
    }
}

#[test]
fn growth_on_simple_graphs() {
    let path = neighborhood_growth(&Graph::path(20), 5, 10, true, usize::MAX).unwrap();
    assert!(path.iter().all(|&c| c <= 2));
    let tree = Graph::regular_tree(3, 6);
    let levels = neighborhood_growth(&tree, 0, 6, true, usize::MAX).unwrap();
    assert_eq!(levels, (1..=6).map(|d| 3 * 2usize.pow(d - 1)).collect::<Vec<_>>());
}

#[test]
fn sparse_graphs_rarely_exceed_growth_bound() {
    // |N(v, ℓ)| in T_v ≤ [Δ(1 + γ/2)]^ℓ with γ = 1, at a handful of roots.
    let (n, delta, ell) = (1000usize, 3.0, 12usize);
    let bound = (delta * 1.5f64).powi(ell as i32);
    let mut violations = 0;
    for seed in 0..50 {
        let g = gen_er_graph(n, delta, seed).unwrap();
        for v in 0..5 {
            let levels = neighborhood_growth(&g, v, ell, true, 50_000_000).unwrap();
            violations += u32::from(levels[ell - 1] as f64 > bound);
        }
    }
    assert_eq!(violations, 0);
}

#[test]
fn bad_paths_on_a_path_graph() {
    let g = Graph::path(6);
    let fields = vec![0.0, 5.0, 5.0, 5.0, 5.0, 5.0];
    let s = bad_path_stats(&g, &fields, 0, 4, 1, 1.0).unwrap();
    assert_eq!(s.paths, 1);
    assert_eq!(s.low_field, 1);
    assert_eq!(s.high_degree, 1);
    assert_eq!(s.bad, 1);
    let s = bad_path_stats(&g, &[5.0; 6], 0, 4, 2, 1.0).unwrap();
    assert_eq!((s.paths, s.bad), (1, 0));
}
