//! Seeded Erdős–Rényi graphs, i.i.d. field assignments and neighborhood
//! growth statistics.
//!
//! Generators are versioned: [`GENERATOR`] names the algorithm, and any
//! change to the order or number of random draws must change it.
//!
//! - Graphs draw one uniform per unordered pair `i < j` in lexicographic
//!   order and keep the edge when `u < Δ/n`.
//! - Gaussian fields draw one open uniform per vertex and apply the inverse
//!   normal CDF; two-point fields draw one uniform per vertex.

mod normal;

pub use normal::inverse_normal_cdf;

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::IsingInstance;
use crate::rng::{open_uniform, seeded, uniform, StreamRng};
use crate::sawtree::{evaluate, EvalOptions, Walk};
use crate::spin::PartialConfig;

pub const GENERATOR: &str = "chacha8-v1";
pub const FIELDS_FORMAT: &str = "rfim-fields-v1";

/// `G(n, Δ/n)`.
pub fn gen_er_graph(n: usize, delta: f64, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let p = delta / n as f64;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("edge probability Δ/n = {p} is outside [0, 1]")));
    }
    let mut rng = seeded(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if uniform(&mut rng) < p {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(n, edges)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FieldSpec {
    /// `N(0, variance)`.
    Gaussian { variance: f64 },
    /// `+h` with probability `weights[0]`, `−h` with `weights[1]`.
    TwoPoint { h: f64, weights: [f64; 2] },
    /// Fields read from an `rfim-fields-v1` file.
    File { path: PathBuf },
}

impl FieldSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            FieldSpec::Gaussian { variance } if !(*variance >= 0.0 && variance.is_finite()) => {
                Err(Error::invalid(format!("variance must be finite and non-negative, got {variance}")))
            }
            FieldSpec::TwoPoint { h, weights } => {
                if !h.is_finite() || weights.iter().any(|w| !(*w >= 0.0)) || (weights[0] + weights[1] - 1.0).abs() > 1e-12 {
                    Err(Error::invalid("two-point weights must be non-negative and sum to 1"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Draws `n` fields from `rng`; file specs are read relative to `base`.
    pub fn sample(&self, n: usize, rng: &mut StreamRng, base: Option<&Path>) -> Result<Vec<f64>> {
        self.validate()?;
        match self {
            FieldSpec::Gaussian { variance } => {
                let sd = variance.sqrt();
                Ok((0..n).map(|_| sd * inverse_normal_cdf(open_uniform(rng))).collect())
            }
            FieldSpec::TwoPoint { h, weights } => Ok((0..n)
                .map(|_| if uniform(rng) < weights[0] { *h } else { -*h })
                .collect()),
            FieldSpec::File { path } => {
                let path = match base {
                    Some(b) if path.is_relative() => b.join(path),
                    _ => path.clone(),
                };
                let file = FieldsFile::load(&path)?;
                if file.h.len() != n {
                    return Err(Error::LengthMismatch {
                        expected: n,
                        found: file.h.len(),
                    });
                }
                Ok(file.h)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldsFile {
    pub format: String,
    pub h: Vec<f64>,
    pub spec: FieldSpec,
    pub seed: u64,
    #[serde(default)]
    pub generator: Option<String>,
}

impl FieldsFile {
    pub fn load(path: &Path) -> Result<FieldsFile> {
        let file: FieldsFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if file.format != FIELDS_FORMAT {
            return Err(Error::FormatTag {
                expected: FIELDS_FORMAT,
                found: file.format,
            });
        }
        Ok(file)
    }
}

pub fn gen_fields(n: usize, spec: &FieldSpec, seed: u64, base: Option<&Path>) -> Result<FieldsFile> {
    let h = spec.sample(n, &mut seeded(seed), base)?;
    Ok(FieldsFile {
        format: FIELDS_FORMAT.to_string(),
        h,
        spec: spec.clone(),
        seed,
        generator: Some(GENERATOR.to_string()),
    })
}

/// `|N(v, d)|` for `d = 1..=max_depth`: graph spheres, or levels of the
/// self-avoiding walk tree `T_v` (cycle-closing leaves included).
pub fn neighborhood_growth(g: &Graph, v: usize, max_depth: usize, in_saw_tree: bool, node_budget: usize) -> Result<Vec<usize>> {
    if max_depth == 0 {
        return Err(Error::invalid("max_depth must be at least 1"));
    }
    if v >= g.n() {
        return Err(Error::VertexOutOfRange { vertex: v, n: g.n() });
    }
    if in_saw_tree {
        let inst = IsingInstance::new(g.clone(), 0.0, vec![0.0; g.n()], PartialConfig::free(g.n()))?;
        let opts = EvalOptions {
            cut: Some(max_depth),
            node_budget,
            ..Default::default()
        };
        let levels = evaluate(&inst, v, &opts)?.level_counts;
        Ok((1..=max_depth).map(|d| levels.get(d).copied().unwrap_or(0)).collect())
    } else {
        let dist = g.distances_from(v);
        let mut counts = vec![0; max_depth];
        for d in dist.into_iter().flatten() {
            if (1..=max_depth).contains(&d) {
                counts[d - 1] += 1;
            }
        }
        Ok(counts)
    }
}

/// Counts of self-avoiding walks `v_0 … v_ℓ` from a vertex that are bad:
/// at least `ℓ/4` of `v_0 … v_{ℓ−1}` have degree above `degree_cap`, or at
/// least `ℓ/4` have `|h| < h0`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct BadPathStats {
    pub paths: u64,
    pub high_degree: u64,
    pub low_field: u64,
    pub bad: u64,
}

pub fn bad_path_stats(g: &Graph, fields: &[f64], v: usize, len: usize, degree_cap: usize, h0: f64) -> Result<BadPathStats> {
    if v >= g.n() {
        return Err(Error::VertexOutOfRange { vertex: v, n: g.n() });
    }
    if fields.len() != g.n() {
        return Err(Error::LengthMismatch {
            expected: g.n(),
            found: fields.len(),
        });
    }
    let quota = len.div_ceil(4).max(1);
    let mut stats = BadPathStats::default();
    let mut walk = Walk::new(g.n(), v);
    fn go(
        g: &Graph,
        fields: &[f64],
        walk: &mut Walk,
        left: usize,
        (deg_hits, field_hits): (usize, usize),
        params: (usize, f64, usize),
        stats: &mut BadPathStats,
    ) {
        let (cap, h0, quota) = params;
        let tip = walk.tip();
        let hits = (
            deg_hits + usize::from(g.degree(tip) > cap),
            field_hits + usize::from(fields[tip].abs() < h0),
        );
        let kids: Vec<usize> = walk.children(g).filter(|&u| !walk.contains(u)).collect();
        for u in kids {
            if left == 1 {
                stats.paths += 1;
                let (a, b) = (hits.0 >= quota, hits.1 >= quota);
                stats.high_degree += u64::from(a);
                stats.low_field += u64::from(b);
                stats.bad += u64::from(a || b);
            } else {
                walk.push(u);
                go(g, fields, walk, left - 1, hits, params, stats);
                walk.pop();
            }
        }
    }
    if len > 0 {
        go(g, fields, &mut walk, len, (0, 0), (degree_cap, h0, quota), &mut stats);
    }
    Ok(stats)
}
