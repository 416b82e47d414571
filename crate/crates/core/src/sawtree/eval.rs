//! Depth-first evaluation of the tree recursion without materializing the
//! tree. Memory is proportional to the walk length; time to the node count.

use rayon::prelude::*;
use serde::Serialize;
use std::sync::atomic::{AtomicUsize, Ordering};

use super::{check_root, message, CertificateReport, FrontierPolicy, Step, Walk};
use crate::error::{Error, Result};
use crate::model::{influence_bound, IsingInstance};
use crate::numeric::sigmoid;

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    pub cut: Option<usize>,
    pub policy: FrontierPolicy,
    pub node_budget: usize,
    /// Field threshold for the path statistic of the certificate.
    pub h0: Option<f64>,
    /// Evaluate the root's subtrees on the rayon pool.
    pub parallel: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            cut: None,
            policy: FrontierPolicy::Plus,
            node_budget: usize::MAX,
            h0: None,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeEval {
    pub log_odds: f64,
    pub certified_error: f64,
    pub node_count: usize,
    pub level_counts: Vec<usize>,
    pub frontier_count: usize,
    /// Frontier paths failing the half-strong-fields test; zero without `h0`.
    pub weak_paths: usize,
    /// Per-depth sums whose minimum is `certified_error`.
    pub layer_sums: Vec<f64>,
}

impl TreeEval {
    pub fn marginal(&self) -> f64 {
        sigmoid(self.log_odds)
    }

    pub fn certificate(&self, h0: f64, beta: f64, max_degree: usize) -> CertificateReport {
        CertificateReport::new(h0, beta, max_degree, self.frontier_count, self.weak_paths)
    }
}

#[derive(Default)]
struct Tally {
    layers: Vec<f64>,
    levels: Vec<usize>,
    frontier: usize,
    weak: usize,
}

impl Tally {
    fn level(&mut self, depth: usize) {
        if self.levels.len() <= depth {
            self.levels.resize(depth + 1, 0);
        }
        self.levels[depth] += 1;
    }

    fn layer(&mut self, depth: usize, w: f64) {
        if self.layers.len() <= depth {
            self.layers.resize(depth + 1, 0.0);
        }
        self.layers[depth] += w;
    }

    fn absorb(&mut self, other: Tally) {
        for (d, c) in other.levels.into_iter().enumerate() {
            if c > 0 {
                if self.levels.len() <= d {
                    self.levels.resize(d + 1, 0);
                }
                self.levels[d] += c;
            }
        }
        for (d, w) in other.layers.into_iter().enumerate() {
            self.layer(d, w);
        }
        self.frontier += other.frontier;
        self.weak += other.weak;
    }
}

struct Ctx<'a> {
    inst: &'a IsingInstance,
    opts: &'a EvalOptions,
    counter: &'a AtomicUsize,
    walk: Walk,
    tally: Tally,
    free_on_path: usize,
    strong_on_path: usize,
}

impl<'a> Ctx<'a> {
    fn new(inst: &'a IsingInstance, opts: &'a EvalOptions, counter: &'a AtomicUsize, root: usize) -> Self {
        Ctx {
            inst,
            opts,
            counter,
            walk: Walk::new(inst.n(), root),
            tally: Tally::default(),
            free_on_path: 0,
            strong_on_path: 0,
        }
    }

    fn count(&mut self, depth: usize) -> Result<()> {
        if self.counter.fetch_add(1, Ordering::Relaxed) >= self.opts.node_budget {
            return Err(Error::TreeTooLarge(self.opts.node_budget));
        }
        self.tally.level(depth);
        Ok(())
    }

    fn enter(&mut self, v: usize) {
        self.free_on_path += 1;
        if self.opts.h0.is_some_and(|h0| self.inst.field(v).abs() >= h0) {
            self.strong_on_path += 1;
        }
    }

    fn leave(&mut self, v: usize) {
        self.free_on_path -= 1;
        if self.opts.h0.is_some_and(|h0| self.inst.field(v).abs() >= h0) {
            self.strong_on_path -= 1;
        }
    }

    /// `M` of the walk's tip. Every neighbor except the parent becomes a
    /// child, so the tree degree equals the graph degree.
    fn influence(&self) -> f64 {
        let v = self.walk.tip();
        influence_bound(self.inst.graph().degree(v), self.inst.field(v), self.inst.beta())
    }

    /// Handles child `u` of the walk's tip; `weight` is the product of `M`
    /// over the child's strict ancestors. Returns the contribution to the
    /// parent's log-odds and whether the child lies above the frontier.
    fn child(&mut self, u: usize, depth: usize, weight: f64) -> Result<(f64, bool)> {
        let beta = self.inst.beta();
        self.count(depth)?;
        match self.walk.classify(u, depth, self.inst.boundary(), self.opts.cut) {
            Step::Cycle(s) | Step::Boundary(s) => Ok((2.0 * beta * s.sign(), false)),
            Step::Frontier => {
                self.tally.frontier += 1;
                if self.opts.h0.is_some() && 2 * self.strong_on_path < self.free_on_path {
                    self.tally.weak += 1;
                }
                self.tally.layer(depth, weight);
                let contribution = match self.opts.policy.spin() {
                    Some(s) => 2.0 * beta * s.sign(),
                    None => message(2.0 * self.inst.field(u), beta),
                };
                Ok((contribution, true))
            }
            Step::Extend => {
                self.walk.push(u);
                let (l, above) = self.node(depth, weight)?;
                self.walk.pop();
                Ok((message(l, beta), above))
            }
        }
    }

    /// Log-odds of the free node at the walk's tip.
    fn node(&mut self, depth: usize, weight: f64) -> Result<(f64, bool)> {
        let v = self.walk.tip();
        let m = self.influence();
        self.enter(v);
        let mut l = 2.0 * self.inst.field(v);
        let mut above = false;
        let kids: Vec<usize> = self.walk.children(self.inst.graph()).collect();
        for u in kids {
            let (c, a) = self.child(u, depth + 1, weight * m)?;
            l += c;
            above |= a;
        }
        self.leave(v);
        if above {
            self.tally.layer(depth, weight);
        }
        Ok((l, above))
    }
}

/// Evaluates the recursion at `root` of `T_root` built under the instance's
/// boundary.
pub fn evaluate(inst: &IsingInstance, root: usize, opts: &EvalOptions) -> Result<TreeEval> {
    check_root(inst, root)?;
    let counter = AtomicUsize::new(0);
    let mut tally = Tally::default();
    let h = inst.field(root);
    let mut root_ctx = Ctx::new(inst, opts, &counter, root);
    root_ctx.count(0)?;
    tally.absorb(std::mem::take(&mut root_ctx.tally));

    if opts.cut == Some(0) {
        tally.frontier = 1;
        let log_odds = match opts.policy.spin() {
            Some(s) => s.sign() * f64::INFINITY,
            None => 2.0 * h,
        };
        return Ok(finish(log_odds, vec![1.0], tally, counter.load(Ordering::Relaxed), opts));
    }

    let m = root_ctx.influence();
    let kids: Vec<usize> = root_ctx.walk.children(inst.graph()).collect();
    let run = |u: usize| -> Result<(f64, bool, Tally)> {
        let mut ctx = Ctx::new(inst, opts, &counter, root);
        ctx.enter(root);
        let (c, a) = ctx.child(u, 1, m)?;
        Ok((c, a, ctx.tally))
    };
    let parts: Vec<Result<(f64, bool, Tally)>> = if opts.parallel {
        kids.par_iter().map(|&u| run(u)).collect()
    } else {
        kids.iter().map(|&u| run(u)).collect()
    };
    let mut l = 2.0 * h;
    let mut above = false;
    for part in parts {
        let (c, a, t) = part?;
        l += c;
        above |= a;
        tally.absorb(t);
    }
    if above {
        tally.layer(0, 1.0);
    }
    let layers = std::mem::take(&mut tally.layers);
    Ok(finish(l, layers, tally, counter.load(Ordering::Relaxed), opts))
}

fn finish(log_odds: f64, layers: Vec<f64>, tally: Tally, node_count: usize, opts: &EvalOptions) -> TreeEval {
    let certified_error = if tally.frontier == 0 {
        0.0
    } else {
        layers.iter().copied().fold(1.0, f64::min)
    };
    TreeEval {
        log_odds,
        certified_error,
        node_count,
        level_counts: tally.levels,
        frontier_count: tally.frontier,
        weak_paths: if opts.h0.is_some() { tally.weak } else { 0 },
        layer_sums: layers,
    }
}
