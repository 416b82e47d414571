use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};

use rfim_core::counting::{
    approx_partition, check_instance, CountOptions, Depth, SequentialSampler, COUNT_FORMAT, DEFAULT_NODE_BUDGET,
};
use rfim_core::glauber::{glauber_sample, GlauberOutcome};
use rfim_core::graph::{Graph, GraphFile};
use rfim_core::model::{exact_distribution, exact_partition, GraphSource, InstanceFile, IsingInstance};
use rfim_core::percolation::{tv_domination_check, PercConfig, SitePercolation, PERC_FORMAT};
use rfim_core::randgen::{bad_path_stats, gen_er_graph, gen_fields, neighborhood_growth, FieldSpec, FieldsFile};
use rfim_core::rng::trial_rng;
use rfim_core::spin::{PartialConfig, Spin};
use rfim_core::Error;

use crate::manifest::RunManifest;

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "subcommand", content = "params", rename_all = "kebab-case")]
pub enum Job {
    /// Erdős–Rényi graph G(n, Δ/n).
    GenGraph(GenGraphArgs),
    /// I.i.d. per-vertex fields.
    GenFields(GenFieldsArgs),
    /// Assemble an instance from a graph, fields and a boundary condition.
    Instance(InstanceArgs),
    /// Exact log Z by enumeration.
    Exact(ExactArgs),
    /// Approximate log Z with a certified error.
    Count(CountArgs),
    /// Sequential sampler driven by tree marginals.
    Sample(SampleArgs),
    /// Heat-bath Glauber dynamics for the guaranteed number of steps.
    Glauber(GlauberArgs),
    /// Decide whether the certificate covers an instance.
    Check(CountArgs),
    /// Disagreement percolation versus exact total variation.
    Perc(PercArgs),
    /// Neighborhood growth and bad-path statistics.
    Grow(GrowArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GenGraphArgs {
    #[arg(long)]
    pub n: usize,
    /// Expected degree Δ; each pair is an edge with probability Δ/n.
    #[arg(long)]
    pub avg_degree: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GenFieldsArgs {
    #[arg(long)]
    pub n: usize,
    /// Gaussian fields with this variance.
    #[arg(long, group = "kind")]
    pub variance: Option<f64>,
    /// Fields ±h.
    #[arg(long, group = "kind", value_name = "H")]
    pub two_point: Option<f64>,
    /// Probability of +h for two-point fields.
    #[arg(long, default_value_t = 0.5)]
    pub plus_weight: f64,
    /// Copy fields from an existing fields file.
    #[arg(long, group = "kind")]
    pub from: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct InstanceArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub fields: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: f64,
    /// Fixed spins as `v=+`, `v=-` pairs separated by commas.
    #[arg(long, default_value = "")]
    pub boundary: String,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ExactArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Also report every vertex's `P(σ_v = +1)`.
    #[arg(long)]
    pub marginals: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CountArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    /// Defaults to `eps`.
    #[arg(long)]
    pub delta: Option<f64>,
    /// `auto`, `inf`, or a fixed depth.
    #[arg(long, default_value = "auto")]
    pub depth: String,
    /// Strong-field threshold of the certificate.
    #[arg(long)]
    pub h0: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
    pub node_budget: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SampleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub count: CountArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of samples.
    #[arg(long, default_value_t = 1)]
    pub trials: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GlauberArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Target total-variation distance.
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub trials: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PercArgs {
    /// `rfim-perc-v1` experiment file.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the file's trial count.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Overrides the file's seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GrowArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long = "vertex", default_value = "0")]
    pub vertices: Vec<usize>,
    #[arg(long)]
    pub max_depth: usize,
    /// Count self-avoiding walk tree levels instead of graph spheres.
    #[arg(long)]
    pub saw: bool,
    #[arg(long, default_value_t = 50_000_000)]
    pub node_budget: usize,
    /// Fields for bad-path statistics.
    #[arg(long, requires = "h0")]
    pub fields: Option<PathBuf>,
    #[arg(long)]
    pub h0: Option<f64>,
    /// Vertices above this degree count as high-degree on a path.
    #[arg(long, default_value_t = 6)]
    pub degree_cap: usize,
}

fn parse_depth(s: &str) -> Result<Depth> {
    match s.trim() {
        "auto" => Ok(Depth::Auto),
        "inf" | "infinity" => Ok(Depth::Unbounded),
        n => n
            .parse()
            .map(Depth::Fixed)
            .map_err(|_| anyhow!("--depth must be auto, inf or a non-negative integer, got {s:?}")),
    }
}

fn parse_boundary(n: usize, s: &str) -> Result<PartialConfig> {
    let mut pairs = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let (v, spin) = item
            .split_once('=')
            .ok_or_else(|| anyhow!("boundary entry {item:?} is not of the form v=+ or v=-"))?;
        let v: usize = v.trim().parse().with_context(|| format!("boundary vertex {v:?}"))?;
        let spin = match spin.trim() {
            "+" | "+1" | "1" => Spin::Plus,
            "-" | "-1" => Spin::Minus,
            other => bail!("boundary spin {other:?} is not + or -"),
        };
        pairs.push((v, spin));
    }
    Ok(PartialConfig::from_pairs(n, pairs)?)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_graph(path: &Path) -> Result<Graph> {
    Graph::from_json(&read(path)?).with_context(|| format!("loading graph {}", path.display()))
}

fn instance_file(path: &Path) -> Result<InstanceFile> {
    serde_json::from_str(&read(path)?).with_context(|| format!("parsing instance {}", path.display()))
}

/// A graph referenced by an instance file, resolved like the loader does.
fn referenced_graph(path: &Path) -> Result<Option<PathBuf>> {
    Ok(match instance_file(path)?.graph {
        GraphSource::Path(p) => Some(path.parent().map_or_else(|| PathBuf::from(&p), |b| b.join(&p))),
        GraphSource::Inline(_) => None,
    })
}

fn load_instance(path: &Path) -> Result<IsingInstance> {
    IsingInstance::load(path).with_context(|| format!("loading instance {}", path.display()))
}

fn perc_config(path: &Path) -> Result<PercConfig> {
    let cfg: PercConfig = serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    if cfg.format != PERC_FORMAT {
        bail!(Error::FormatTag {
            expected: PERC_FORMAT,
            found: cfg.format
        });
    }
    Ok(cfg)
}

fn relative_to(base: &Path, p: &str) -> PathBuf {
    base.parent().map_or_else(|| PathBuf::from(p), |b| b.join(p))
}

impl CountArgs {
    fn options(&self) -> Result<CountOptions> {
        let mut opts = CountOptions::new(self.eps).with_depth(parse_depth(&self.depth)?);
        opts.delta = self.delta.unwrap_or(self.eps);
        opts.h0 = self.h0;
        opts.node_budget = self.node_budget;
        Ok(opts)
    }
}

impl Job {
    pub fn name(&self) -> &'static str {
        match self {
            Job::GenGraph(_) => "gen-graph",
            Job::GenFields(_) => "gen-fields",
            Job::Instance(_) => "instance",
            Job::Exact(_) => "exact",
            Job::Count(_) => "count",
            Job::Sample(_) => "sample",
            Job::Glauber(_) => "glauber",
            Job::Check(_) => "check",
            Job::Perc(_) => "perc",
            Job::Grow(_) => "grow",
        }
    }

    fn seed(&self) -> Result<Option<u64>> {
        Ok(match self {
            Job::GenGraph(a) => Some(a.seed),
            Job::GenFields(a) => Some(a.seed),
            Job::Sample(a) => Some(a.seed),
            Job::Glauber(a) => Some(a.seed),
            Job::Perc(a) => Some(match a.seed {
                Some(s) => s,
                None => perc_config(&a.config)?.seed,
            }),
            _ => None,
        })
    }

    fn inputs(&self) -> Result<Vec<(&'static str, PathBuf)>> {
        let mut out = Vec::new();
        let instance = |out: &mut Vec<_>, p: &Path| -> Result<()> {
            out.push(("instance", p.to_path_buf()));
            if let Some(g) = referenced_graph(p)? {
                out.push(("graph", g));
            }
            Ok(())
        };
        match self {
            Job::GenGraph(_) => {}
            Job::GenFields(a) => out.extend(a.from.clone().map(|p| ("fields", p))),
            Job::Instance(a) => {
                out.push(("graph", a.graph.clone()));
                out.push(("fields", a.fields.clone()));
            }
            Job::Exact(a) => instance(&mut out, &a.instance)?,
            Job::Count(a) | Job::Check(a) => instance(&mut out, &a.instance)?,
            Job::Sample(a) => instance(&mut out, &a.count.instance)?,
            Job::Glauber(a) => instance(&mut out, &a.instance)?,
            Job::Perc(a) => {
                out.push(("perc", a.config.clone()));
                let inst = relative_to(&a.config, &perc_config(&a.config)?.instance);
                instance(&mut out, &inst)?;
            }
            Job::Grow(a) => {
                out.push(("graph", a.graph.clone()));
                out.extend(a.fields.clone().map(|p| ("fields", p)));
            }
        }
        Ok(out)
    }

    pub fn manifest(&self) -> Result<RunManifest> {
        let tagged = serde_json::to_value(self)?;
        let mut m = RunManifest::new(self.name(), tagged["params"].clone(), self.seed()?);
        for (role, path) in self.inputs()? {
            m.record_input(role, &path)?;
        }
        Ok(m)
    }

    pub fn from_manifest(m: &RunManifest) -> Result<Job> {
        serde_json::from_value(json!({ "subcommand": m.subcommand, "params": m.params }))
            .with_context(|| format!("manifest parameters do not describe a {} run", m.subcommand))
    }

    /// The output document without its manifest, and the exit code.
    pub fn run(&self) -> Result<(Value, u8)> {
        match self {
            Job::GenGraph(a) => {
                let g = gen_er_graph(a.n, a.avg_degree, a.seed)?;
                Ok((serde_json::to_value(GraphFile::from(g))?, 0))
            }
            Job::GenFields(a) => {
                let spec = match (a.variance, a.two_point, &a.from) {
                    (Some(variance), None, None) => FieldSpec::Gaussian { variance },
                    (None, Some(h), None) => FieldSpec::TwoPoint {
                        h,
                        weights: [a.plus_weight, 1.0 - a.plus_weight],
                    },
                    (None, None, Some(p)) => FieldSpec::File { path: p.clone() },
                    _ => bail!("give exactly one of --variance, --two-point, --from"),
                };
                Ok((serde_json::to_value(gen_fields(a.n, &spec, a.seed, None)?)?, 0))
            }
            Job::Instance(a) => {
                let g = load_graph(&a.graph)?;
                let fields = FieldsFile::load(&a.fields)
                    .with_context(|| format!("loading fields {}", a.fields.display()))?
                    .h;
                let boundary = parse_boundary(g.n(), &a.boundary)?;
                let inst = IsingInstance::new(g, a.beta, fields, boundary)?;
                Ok((serde_json::to_value(inst.to_file())?, 0))
            }
            Job::Exact(a) => {
                let inst = load_instance(&a.instance)?;
                let mut out = json!({ "log_z": exact_partition(&inst)? });
                if a.marginals {
                    let d = exact_distribution(&inst)?;
                    let m: Vec<f64> = (0..inst.n())
                        .map(|v| match inst.boundary().get(v) {
                            Some(s) => f64::from(u8::from(s == Spin::Plus)),
                            None => d.marginal(v).unwrap_or(f64::NAN),
                        })
                        .collect();
                    out["marginals"] = json!(m);
                }
                Ok((out, 0))
            }
            Job::Count(a) => {
                let inst = load_instance(&a.instance)?;
                let r = approx_partition(&inst, &a.options()?)?;
                let mut out = serde_json::to_value(r)?;
                out["format"] = json!(COUNT_FORMAT);
                out["eps"] = json!(a.eps);
                Ok((out, 0))
            }
            Job::Check(a) => {
                let inst = load_instance(&a.instance)?;
                let r = check_instance(&inst, &a.options()?)?;
                let code = if r.accepted { 0 } else { 2 };
                if let Some(reason) = &r.reason {
                    eprintln!("rfim: rejected: {reason}");
                }
                Ok((serde_json::to_value(r)?, code))
            }
            Job::Sample(a) => {
                let inst = load_instance(&a.count.instance)?;
                let mut sampler = SequentialSampler::new(&inst, &a.count.options()?)?;
                let mut samples = Vec::new();
                let mut tv_bound = 0f64;
                for i in 0..a.trials {
                    let s = sampler.sample(&mut trial_rng(a.seed, i))?;
                    tv_bound = tv_bound.max(s.tv_bound);
                    samples.push(s.config);
                }
                Ok((json!({ "depth": sampler.depth(), "tv_bound": tv_bound, "samples": samples }), 0))
            }
            Job::Glauber(a) => {
                let inst = load_instance(&a.instance)?;
                let runs: Vec<GlauberOutcome> = (0..a.trials)
                    .into_par_iter()
                    .map(|i| glauber_sample(&inst, a.eps, a.seed.wrapping_add(i)))
                    .collect::<rfim_core::Result<_>>()?;
                match runs.first() {
                    Some(no @ GlauberOutcome::NoGuarantee { .. }) => {
                        eprintln!("rfim: no mixing guarantee at these fields");
                        Ok((serde_json::to_value(no)?, 3))
                    }
                    Some(GlauberOutcome::Sample { steps, .. }) => {
                        let steps = *steps;
                        let samples: Vec<_> = runs
                            .into_iter()
                            .filter_map(|r| match r {
                                GlauberOutcome::Sample { config, .. } => Some(config),
                                GlauberOutcome::NoGuarantee { .. } => None,
                            })
                            .collect();
                        Ok((json!({ "outcome": "sample", "steps": steps, "samples": samples }), 0))
                    }
                    None => Ok((json!({ "outcome": "sample", "steps": 0, "samples": [] }), 0)),
                }
            }
            Job::Perc(a) => {
                let cfg = perc_config(&a.config)?;
                let inst = load_instance(&relative_to(&a.config, &cfg.instance))?;
                let eta = PartialConfig::from_map(inst.n(), &cfg.eta)?;
                let xi = PartialConfig::from_map(inst.n(), &cfg.xi)?;
                let trials = a.trials.unwrap_or(cfg.trials);
                let seed = a.seed.unwrap_or(cfg.seed);
                let (estimate, exact_tv, holds) = match tv_domination_check(&inst, &cfg.targets, &eta, &xi, trials, seed) {
                    Ok(r) => (r.estimate, Some(r.exact_tv), Some(r.holds)),
                    Err(Error::TooLarge { .. }) => {
                        let perc = SitePercolation::for_disagreement(&inst, &eta, &xi)?;
                        (perc.connection_probability(&cfg.targets, trials, seed)?, None, None)
                    }
                    Err(e) => return Err(e.into()),
                };
                Ok((
                    json!({
                        "format": PERC_FORMAT,
                        "A": cfg.targets,
                        "trials": trials,
                        "estimate": estimate,
                        "exact_tv": exact_tv,
                        "holds": holds,
                    }),
                    0,
                ))
            }
            Job::Grow(a) => {
                let g = load_graph(&a.graph)?;
                let fields = match &a.fields {
                    Some(p) => Some(FieldsFile::load(p).with_context(|| format!("loading fields {}", p.display()))?.h),
                    None => None,
                };
                let rows = a
                    .vertices
                    .par_iter()
                    .map(|&v| {
                        let counts = neighborhood_growth(&g, v, a.max_depth, a.saw, a.node_budget)?;
                        let mut row = json!({ "vertex": v, "counts": counts });
                        if let (Some(h), Some(h0)) = (&fields, a.h0) {
                            row["bad_paths"] = serde_json::to_value(bad_path_stats(&g, h, v, a.max_depth, a.degree_cap, h0)?)?;
                        }
                        Ok(row)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((json!({ "saw": a.saw, "rows": rows }), 0))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_spellings() {
        assert_eq!(parse_depth("auto").unwrap(), Depth::Auto);
        assert_eq!(parse_depth("inf").unwrap(), Depth::Unbounded);
        assert_eq!(parse_depth("7").unwrap(), Depth::Fixed(7));
        assert!(parse_depth("-1").is_err());
    }

    #[test]
    fn boundary_spellings() {
        let b = parse_boundary(4, "0=+, 3=-1").unwrap();
        assert_eq!(b.get(0), Some(Spin::Plus));
        assert_eq!(b.get(3), Some(Spin::Minus));
        assert_eq!(b.get(1), None);
        assert!(parse_boundary(4, "5=+").is_err());
        assert!(parse_boundary(4, "1=0").is_err());
        assert_eq!(parse_boundary(4, "").unwrap().fixed_count(), 0);
    }

    #[test]
    fn params_roundtrip_through_manifest_tags() {
        let job = Job::Sample(SampleArgs {
            count: CountArgs {
                instance: "x.json".into(),
                eps: 0.05,
                delta: None,
                depth: "inf".into(),
                h0: Some(2.5),
                node_budget: 10,
            },
            seed: 4,
            trials: 3,
        });
        let v = serde_json::to_value(&job).unwrap();
        assert_eq!(v["subcommand"], "sample");
        let back: Job = serde_json::from_value(v.clone()).unwrap();
        assert_eq!(serde_json::to_value(back).unwrap(), v);
    }
}
