//! Deterministic approximation of `log Z` by telescoping tree marginals, the
//! matching sequential sampler, and the per-instance certificate.
//!
//! Free vertices are processed in ascending order. At step `i` the tree of
//! `v_i` is built under the boundary extended by the spins already chosen,
//! and its root marginal `p̂` is used as the ratio `Z_{i−1}/Z_i`. When the
//! tree is truncated with certified marginal error `e`, the logarithm of that
//! ratio is off by at most `e / (p̂ − e)` on the branch with `p̂ ≥ ½`.

use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::IsingInstance;
use crate::numeric::log_sigmoid;
use crate::rng::{seeded, uniform, StreamRng};
use crate::sawtree::{evaluate, rate_constant, CertificateReport, EvalOptions, FrontierPolicy};
use crate::spin::{Spin, SpinConfig};

pub const COUNT_FORMAT: &str = "rfim-count-v1";
pub const DEFAULT_DEPTH_CEILING: usize = 64;
pub const DEFAULT_NODE_BUDGET: usize = 2_000_000;

/// Depth used when the certificate gives no decay rate.
const FALLBACK_RATE: f64 = std::f64::consts::LN_2;

/// Truncation depth for the tree of each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "value")]
pub enum Depth {
    /// Scheduled from `ε` and the decay rate, then doubled until the
    /// certified error fits.
    Auto,
    Fixed(usize),
    /// Full trees; exact up to rounding.
    Unbounded,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CountOptions {
    pub eps: f64,
    pub delta: f64,
    pub depth: Depth,
    pub h0: Option<f64>,
    pub l0: Option<usize>,
    pub depth_ceiling: usize,
    pub node_budget: usize,
}

impl CountOptions {
    pub fn new(eps: f64) -> Self {
        CountOptions {
            eps,
            delta: eps,
            depth: Depth::Auto,
            h0: None,
            l0: None,
            depth_ceiling: DEFAULT_DEPTH_CEILING,
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }

    pub fn with_depth(mut self, depth: Depth) -> Self {
        self.depth = depth;
        self
    }

    fn validate(&self) -> Result<()> {
        check_unit("eps", self.eps)?;
        check_unit("delta", self.delta)
    }
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must lie in (0, 1), got {x}")))
    }
}

/// `|β|Δ + log Δ + 3`, a threshold at which `M(Δ, h0, β)·Δ² ≈ e^{−6}`.
pub fn strong_field_threshold(max_degree: usize, beta: f64) -> f64 {
    let d = max_degree.max(1) as f64;
    beta.abs() * d + d.ln() + 3.0
}

/// Lower median of `|h_x|` over free vertices: the largest threshold that at
/// least half of the free fields reach.
pub fn default_h0(inst: &IsingInstance) -> f64 {
    let mut mags: Vec<f64> = inst.free_vertices().iter().map(|&v| inst.field(v).abs()).collect();
    if mags.is_empty() {
        return 0.0;
    }
    mags.sort_by(f64::total_cmp);
    mags[(mags.len() - 1) / 2]
}

/// `⌈log n / c1⌉`.
pub fn default_l0(n: usize, c1: f64) -> usize {
    ((n.max(1) as f64).ln() / c1).ceil().max(0.0) as usize
}

/// `max(⌈log(4n/ε)/c1⌉, ℓ0)`, and at least 1.
pub fn choose_depth(n: usize, eps: f64, delta: f64, c1: f64, l0: usize) -> Result<usize> {
    check_unit("eps", eps)?;
    check_unit("delta", delta)?;
    if c1.is_nan() || c1 <= 0.0 {
        return Err(Error::invalid(format!("decay rate must be positive, got {c1}")));
    }
    let scheduled = ((4.0 * n.max(1) as f64 / eps).ln() / c1).ceil().max(0.0) as usize;
    Ok(scheduled.max(l0).max(1))
}

/// `e / (p − e)`: bound on `|log p − log p*|` when `|p − p*| ≤ e`.
fn log_ratio_bound(e: f64, p: f64) -> f64 {
    if e == 0.0 {
        0.0
    } else if e < p {
        e / (p - e)
    } else {
        f64::INFINITY
    }
}

/// Depth selected for an instance and the certified error it implies.
#[derive(Debug, Clone, Serialize)]
pub struct DepthPlan {
    /// `None` for full trees.
    pub depth: Option<usize>,
    /// Depth before any doubling.
    pub scheduled: Option<usize>,
    /// Truncation error of each free vertex's tree under the original
    /// boundary, in ascending vertex order.
    pub marginal_err: Vec<f64>,
    /// `Σ e/(½ − e)`; bounds the total log error of every later run.
    pub total_bound: f64,
    pub certificate: CertificateReport,
    /// The node budget stopped the doubling early.
    pub budget_exhausted: bool,
}

fn tree_options(depth: Option<usize>, opts: &CountOptions, h0: Option<f64>) -> EvalOptions {
    EvalOptions {
        cut: depth,
        policy: FrontierPolicy::Plus,
        node_budget: opts.node_budget,
        h0,
        parallel: false,
    }
}

/// Evaluates every free vertex's tree at `depth` in parallel.
fn survey(inst: &IsingInstance, depth: usize, opts: &CountOptions, h0: f64) -> Result<(Vec<f64>, usize, usize)> {
    let free = inst.free_vertices();
    let eopts = tree_options(Some(depth), opts, Some(h0));
    let evals: Vec<_> = free
        .par_iter()
        .map(|&v| evaluate(inst, v, &eopts))
        .collect::<Result<_>>()?;
    let errs = evals.iter().map(|e| e.certified_error).collect();
    let frontier = evals.iter().map(|e| e.frontier_count).sum();
    let weak = evals.iter().map(|e| e.weak_paths).sum();
    Ok((errs, frontier, weak))
}

pub fn plan_depth(inst: &IsingInstance, opts: &CountOptions) -> Result<DepthPlan> {
    opts.validate()?;
    let n = inst.n();
    let max_degree = inst.graph().max_degree();
    let h0 = opts.h0.unwrap_or_else(|| default_h0(inst));
    let free = inst.free_vertices().len();
    let total = |errs: &[f64]| errs.iter().map(|&e| log_ratio_bound(e, 0.5)).sum::<f64>();

    let (scheduled, fixed) = match opts.depth {
        Depth::Unbounded => {
            return Ok(DepthPlan {
                depth: None,
                scheduled: None,
                marginal_err: vec![0.0; free],
                total_bound: 0.0,
                certificate: CertificateReport::new(h0, inst.beta(), max_degree, 0, 0),
                budget_exhausted: false,
            })
        }
        Depth::Fixed(d) => (d, true),
        Depth::Auto => {
            let c1 = rate_constant(max_degree, h0, inst.beta()).1.unwrap_or(FALLBACK_RATE);
            let l0 = opts.l0.unwrap_or_else(|| default_l0(n, c1));
            (choose_depth(n, opts.eps, opts.delta, c1, l0)?, false)
        }
    };

    // Walks have at most n − 1 edges, so depth n never truncates.
    let mut depth = scheduled.min(n);
    let (mut errs, mut frontier, mut weak) = survey(inst, depth, opts, h0)?;
    let mut budget_exhausted = false;
    while !fixed && total(&errs) > opts.eps && depth < n && depth < opts.depth_ceiling {
        let next = (2 * depth).min(n).min(opts.depth_ceiling.max(depth));
        match survey(inst, next, opts, h0) {
            Ok(s) => {
                depth = next;
                (errs, frontier, weak) = s;
            }
            Err(Error::TreeTooLarge(_)) => {
                budget_exhausted = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(DepthPlan {
        depth: Some(depth),
        scheduled: Some(scheduled),
        total_bound: total(&errs),
        marginal_err: errs,
        certificate: CertificateReport::new(h0, inst.beta(), max_degree, frontier, weak),
        budget_exhausted,
    })
}

/// Outcome of [`check_instance`].
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub accepted: bool,
    pub reason: Option<String>,
    pub eps: f64,
    #[serde(flatten)]
    pub plan: DepthPlan,
}

/// Accepts when the certified error of [`approx_partition`] at the planned
/// depth is at most `ε`; with automatic depth, additionally requires
/// `M(Δ, h0, β) < Δ^{−2}`.
pub fn check_instance(inst: &IsingInstance, opts: &CountOptions) -> Result<CheckReport> {
    let plan = match plan_depth(inst, opts) {
        Ok(p) => p,
        Err(Error::TreeTooLarge(b)) => {
            return Ok(CheckReport {
                accepted: false,
                reason: Some(format!("tree at the scheduled depth exceeds the node budget of {b}")),
                eps: opts.eps,
                plan: DepthPlan {
                    depth: None,
                    scheduled: None,
                    marginal_err: Vec::new(),
                    total_bound: f64::INFINITY,
                    certificate: CertificateReport::new(
                        opts.h0.unwrap_or_else(|| default_h0(inst)),
                        inst.beta(),
                        inst.graph().max_degree(),
                        0,
                        0,
                    ),
                    budget_exhausted: true,
                },
            })
        }
        Err(e) => return Err(e),
    };
    let reason = if opts.depth == Depth::Auto && !plan.certificate.m_below_threshold {
        Some(format!(
            "M(Δ, h0, β)·Δ² = {} is not below 1 (Δ = {}, h0 = {})",
            plan.certificate.m_value * (plan.certificate.max_degree.pow(2)) as f64,
            plan.certificate.max_degree,
            plan.certificate.h0
        ))
    } else if plan.total_bound > opts.eps {
        Some(format!(
            "certified error {} exceeds eps = {} at depth {}",
            plan.total_bound,
            opts.eps,
            plan.depth.map_or("inf".to_string(), |d| d.to_string())
        ))
    } else {
        None
    };
    Ok(CheckReport {
        accepted: reason.is_none(),
        reason,
        eps: opts.eps,
        plan,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CountResult {
    pub log_z: f64,
    /// Truncation error of each step's root marginal.
    pub per_vertex_err: Vec<f64>,
    /// Bound on each step's error in `log r`.
    pub step_log_err: Vec<f64>,
    pub certified_rel_err: f64,
    pub depth: Option<usize>,
    pub accepted: bool,
    pub certificate: CertificateReport,
    /// The greedy configuration along which the product telescopes.
    pub spins: SpinConfig,
}

pub fn approx_partition(inst: &IsingInstance, opts: &CountOptions) -> Result<CountResult> {
    let plan = plan_depth(inst, opts)?;
    let eopts = EvalOptions {
        parallel: true,
        ..tree_options(plan.depth, opts, None)
    };
    let mut cond = inst.boundary().clone();
    let mut log_r = 0.0;
    let mut per_vertex_err = Vec::new();
    let mut step_log_err = Vec::new();
    for v in inst.free_vertices() {
        let ev = evaluate(&inst.with_boundary(cond.clone())?, v, &eopts)?;
        let l = ev.log_odds;
        let (spin, p_hat, log_p) = if l >= 0.0 {
            (Spin::Plus, ev.marginal(), log_sigmoid(l))
        } else {
            (Spin::Minus, 1.0 - ev.marginal(), log_sigmoid(-l))
        };
        let e = ev.certified_error;
        if e >= 0.25 {
            return Err(Error::StepErrorTooLarge { vertex: v, error: e });
        }
        log_r -= log_p;
        per_vertex_err.push(e);
        step_log_err.push(log_ratio_bound(e, p_hat));
        cond.set(v, Some(spin));
    }
    let spins = inst.with_boundary(cond)?.filled(Spin::Plus);
    let log_z = -inst.hamiltonian(&spins)? + log_r;
    let certified_rel_err: f64 = step_log_err.iter().sum();
    let accepted = match opts.depth {
        Depth::Auto => plan.certificate.m_below_threshold && certified_rel_err <= opts.eps,
        _ => certified_rel_err <= opts.eps,
    };
    Ok(CountResult {
        log_z,
        per_vertex_err,
        step_log_err,
        certified_rel_err,
        depth: plan.depth,
        accepted,
        certificate: plan.certificate,
        spins,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleResult {
    pub config: SpinConfig,
    pub depth: Option<usize>,
    pub per_vertex_err: Vec<f64>,
    /// `Σ` of the per-step errors; bounds the total-variation distance of
    /// the output law from the Gibbs measure.
    pub tv_bound: f64,
}

/// Sequential sampler that reuses tree evaluations across draws. Marginals
/// are cached by the prefix of spins already chosen.
#[derive(Debug)]
pub struct SequentialSampler {
    inst: IsingInstance,
    free: Vec<usize>,
    depth: Option<usize>,
    eval: EvalOptions,
    cache: HashMap<(usize, Vec<bool>), (f64, f64)>,
}

impl SequentialSampler {
    pub fn new(inst: &IsingInstance, opts: &CountOptions) -> Result<Self> {
        let plan = plan_depth(inst, opts)?;
        Ok(SequentialSampler {
            inst: inst.clone(),
            free: inst.free_vertices(),
            depth: plan.depth,
            eval: EvalOptions {
                parallel: true,
                ..tree_options(plan.depth, opts, None)
            },
            cache: HashMap::new(),
        })
    }

    pub fn depth(&self) -> Option<usize> {
        self.depth
    }

    pub fn sample(&mut self, rng: &mut StreamRng) -> Result<SampleResult> {
        let mut cond = self.inst.boundary().clone();
        let mut prefix = Vec::with_capacity(self.free.len());
        let mut per_vertex_err = Vec::with_capacity(self.free.len());
        for (i, &v) in self.free.iter().enumerate() {
            let key = (i, prefix.clone());
            let (p, e) = match self.cache.get(&key) {
                Some(&hit) => hit,
                None => {
                    let ev = evaluate(&self.inst.with_boundary(cond.clone())?, v, &self.eval)?;
                    let value = (ev.marginal(), ev.certified_error);
                    self.cache.insert(key, value);
                    value
                }
            };
            let plus = uniform(rng) < p;
            prefix.push(plus);
            per_vertex_err.push(e);
            cond.set(v, Some(if plus { Spin::Plus } else { Spin::Minus }));
        }
        Ok(SampleResult {
            config: self.inst.with_boundary(cond)?.filled(Spin::Plus),
            depth: self.depth,
            tv_bound: per_vertex_err.iter().sum(),
            per_vertex_err,
        })
    }
}

pub fn approx_sample(inst: &IsingInstance, opts: &CountOptions, seed: u64) -> Result<SampleResult> {
    SequentialSampler::new(inst, opts)?.sample(&mut seeded(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::model::exact_partition;
    use crate::spin::PartialConfig;

    #[test]
    fn depth_schedule() {
        assert_eq!(choose_depth(100, 0.1, 0.1, 1.0, 0).unwrap(), 9);
        assert_eq!(choose_depth(100, 0.1, 0.1, 1.0, 30).unwrap(), 30);
        assert_eq!(choose_depth(2, 0.9, 0.9, 50.0, 0).unwrap(), 1);
        assert!(choose_depth(10, 0.1, 0.1, 0.0, 0).is_err());
        assert!(choose_depth(10, 1.5, 0.1, 1.0, 0).is_err());
    }

    #[test]
    fn single_vertex_is_exact() {
        let h = 0.7;
        let inst = IsingInstance::free(Graph::empty(1), 1.0, vec![h]).unwrap();
        let r = approx_partition(&inst, &CountOptions::new(0.1)).unwrap();
        assert!((r.log_z - (h.exp() + (-h).exp()).ln()).abs() < 1e-14);
        assert!(r.accepted);
    }

    #[test]
    fn high_field_square() {
        let inst = IsingInstance::free(Graph::cycle(4), 0.5, vec![3.0; 4]).unwrap();
        let r = approx_partition(&inst, &CountOptions::new(0.01)).unwrap();
        let exact = exact_partition(&inst).unwrap();
        assert!(r.accepted);
        assert!((r.log_z - exact).abs() <= 0.01);
        assert!((r.log_z - exact).abs() <= r.certified_rel_err + 1e-12);
    }

    #[test]
    fn check_examples() {
        let g = Graph::regular_tree(3, 4);
        let zero = IsingInstance::free(g.clone(), 2.0, vec![0.0; g.n()]).unwrap();
        let r = check_instance(&zero, &CountOptions::new(0.1)).unwrap();
        assert!(!r.accepted && r.reason.is_some());
        let h0 = strong_field_threshold(3, 2.0);
        let strong = IsingInstance::free(g.clone(), 2.0, vec![h0; g.n()]).unwrap();
        assert!(check_instance(&strong, &CountOptions::new(0.1)).unwrap().accepted);
        let path = IsingInstance::free(Graph::path(6), 1.5, vec![0.0; 6]).unwrap();
        let r = check_instance(&path, &CountOptions::new(0.1).with_depth(Depth::Fixed(6))).unwrap();
        assert!(r.accepted && r.plan.total_bound == 0.0);
    }

    #[test]
    fn fully_fixed_instance_sample_returns_boundary() {
        let b = PartialConfig::from_pairs(3, [(0, Spin::Plus), (1, Spin::Minus), (2, Spin::Plus)]).unwrap();
        let inst = IsingInstance::new(Graph::path(3), 1.0, vec![0.0; 3], b).unwrap();
        let s = approx_sample(&inst, &CountOptions::new(0.1), 7).unwrap();
        assert_eq!(s.config.0, vec![Spin::Plus, Spin::Minus, Spin::Plus]);
        assert!(s.per_vertex_err.is_empty());
    }
}
