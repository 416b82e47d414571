//! Self-avoiding walk trees with fixed-spin leaves, and the marginal
//! recursion at their root.
//!
//! A node is a self-avoiding walk `(v_0, …, v_k)` from the root. Its children
//! are the neighbors of `v_k` other than `v_{k−1}`, in ascending order. A
//! neighbor `u = v_j` already on the walk closes a cycle and becomes a leaf
//! fixed to `+1` when `v_k > v_{j+1}` and to `−1` otherwise. Boundary vertices
//! become leaves fixed to their boundary spin. Walks that reach the cut depth
//! become frontier leaves whose spin follows a [`FrontierPolicy`].

mod eval;
mod sensitivity;

pub use eval::{evaluate, EvalOptions, TreeEval};
pub use sensitivity::frontier_sensitivity;

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::{influence_bound, IsingInstance};
use crate::numeric::{log_add_exp, sigmoid, softplus};
use crate::spin::{PartialConfig, Spin};

/// Spin placed on truncation-frontier leaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrontierPolicy {
    #[default]
    Plus,
    Minus,
    /// Leave frontier nodes free and childless.
    Free,
}

impl FrontierPolicy {
    pub fn spin(self) -> Option<Spin> {
        match self {
            FrontierPolicy::Plus => Some(Spin::Plus),
            FrontierPolicy::Minus => Some(Spin::Minus),
            FrontierPolicy::Free => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Free,
    CycleLeaf,
    BoundaryLeaf,
    Frontier,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SawNode {
    pub vertex: usize,
    pub field: f64,
    pub fixed_spin: Option<Spin>,
    pub kind: NodeKind,
    pub depth: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

/// A materialized tree; nodes are stored in pre-order, root first.
#[derive(Debug, Clone)]
pub struct SawTree {
    nodes: Vec<SawNode>,
    cut_depth: Option<usize>,
    policy: FrontierPolicy,
}

/// What a neighbor of the walk's tip turns into.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Step {
    Extend,
    Cycle(Spin),
    Boundary(Spin),
    Frontier,
}

/// The current walk with O(1) membership lookups.
#[derive(Debug, Clone)]
pub(crate) struct Walk {
    vertices: Vec<usize>,
    position: Vec<usize>,
}

impl Walk {
    pub(crate) fn new(n: usize, root: usize) -> Walk {
        let mut position = vec![usize::MAX; n];
        position[root] = 0;
        Walk {
            vertices: vec![root],
            position,
        }
    }

    pub(crate) fn push(&mut self, v: usize) {
        self.position[v] = self.vertices.len();
        self.vertices.push(v);
    }

    pub(crate) fn pop(&mut self) {
        let v = self.vertices.pop().expect("walk is never empty");
        self.position[v] = usize::MAX;
    }

    pub(crate) fn contains(&self, v: usize) -> bool {
        self.position[v] != usize::MAX
    }

    pub(crate) fn tip(&self) -> usize {
        *self.vertices.last().expect("walk is never empty")
    }

    pub(crate) fn parent(&self) -> Option<usize> {
        let k = self.vertices.len();
        (k >= 2).then(|| self.vertices[k - 2])
    }

    /// Neighbors of the tip that become children, ascending.
    pub(crate) fn children<'g>(&self, g: &'g Graph) -> impl Iterator<Item = usize> + 'g {
        let parent = self.parent();
        g.neighbors(self.tip()).iter().copied().filter(move |&u| Some(u) != parent)
    }

    /// Classifies a child `u` of the tip, to be placed at `depth`.
    pub(crate) fn classify(&self, u: usize, depth: usize, boundary: &PartialConfig, cut: Option<usize>) -> Step {
        let j = self.position[u];
        if j != usize::MAX {
            let next = self.vertices[j + 1];
            return Step::Cycle(if self.tip() > next { Spin::Plus } else { Spin::Minus });
        }
        if let Some(s) = boundary.get(u) {
            return Step::Boundary(s);
        }
        if cut == Some(depth) {
            return Step::Frontier;
        }
        Step::Extend
    }
}

/// Contribution of a free child with log-odds `l` to its parent's log-odds:
/// `log((e^{2β}q + 1 − q) / (q + e^{2β}(1 − q)))` with `q = σ(l)`.
pub(crate) fn message(l: f64, beta: f64) -> f64 {
    softplus(2.0 * beta + l) - log_add_exp(l, 2.0 * beta)
}

pub(crate) fn check_root(inst: &IsingInstance, root: usize) -> Result<()> {
    if root >= inst.n() {
        return Err(Error::VertexOutOfRange { vertex: root, n: inst.n() });
    }
    if inst.boundary().get(root).is_some() {
        return Err(Error::VertexFixed(root));
    }
    Ok(())
}

impl SawTree {
    /// Builds `T_root` under the instance's boundary, truncated at `cut_depth`
    /// (`None` for the full tree).
    pub fn build(inst: &IsingInstance, root: usize, cut_depth: Option<usize>, policy: FrontierPolicy) -> Result<SawTree> {
        Self::build_with_budget(inst, root, cut_depth, policy, usize::MAX)
    }

    pub fn build_with_budget(
        inst: &IsingInstance,
        root: usize,
        cut_depth: Option<usize>,
        policy: FrontierPolicy,
        budget: usize,
    ) -> Result<SawTree> {
        check_root(inst, root)?;
        let mut tree = SawTree {
            nodes: Vec::new(),
            cut_depth,
            policy,
        };
        let root_kind = if cut_depth == Some(0) { NodeKind::Frontier } else { NodeKind::Free };
        let root_spin = if root_kind == NodeKind::Frontier { policy.spin() } else { None };
        tree.nodes.push(SawNode {
            vertex: root,
            field: inst.field(root),
            fixed_spin: root_spin,
            kind: root_kind,
            depth: 0,
            parent: None,
            children: Vec::new(),
        });
        if root_kind == NodeKind::Free {
            let mut walk = Walk::new(inst.n(), root);
            tree.grow(inst, &mut walk, 0, budget)?;
        }
        Ok(tree)
    }

    fn grow(&mut self, inst: &IsingInstance, walk: &mut Walk, id: usize, budget: usize) -> Result<()> {
        let depth = self.nodes[id].depth + 1;
        let kids: Vec<usize> = walk.children(inst.graph()).collect();
        let mut ids = Vec::with_capacity(kids.len());
        for u in kids {
            if self.nodes.len() >= budget {
                return Err(Error::TreeTooLarge(budget));
            }
            let step = walk.classify(u, depth, inst.boundary(), self.cut_depth);
            let (kind, fixed_spin) = match step {
                Step::Extend => (NodeKind::Free, None),
                Step::Cycle(s) => (NodeKind::CycleLeaf, Some(s)),
                Step::Boundary(s) => (NodeKind::BoundaryLeaf, Some(s)),
                Step::Frontier => (NodeKind::Frontier, self.policy.spin()),
            };
            let child = self.nodes.len();
            ids.push(child);
            self.nodes.push(SawNode {
                vertex: u,
                field: inst.field(u),
                fixed_spin,
                kind,
                depth,
                parent: Some(id),
                children: Vec::new(),
            });
            if step == Step::Extend {
                walk.push(u);
                self.grow(inst, walk, child, budget)?;
                walk.pop();
            }
        }
        self.nodes[id].children = ids;
        Ok(())
    }

    pub fn root(&self) -> &SawNode {
        &self.nodes[0]
    }

    pub fn nodes(&self) -> &[SawNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &SawNode {
        &self.nodes[id]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn cut_depth(&self) -> Option<usize> {
        self.cut_depth
    }

    pub fn policy(&self) -> FrontierPolicy {
        self.policy
    }

    pub fn frontier_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Frontier).count()
    }

    pub fn height(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Number of nodes at each depth.
    pub fn level_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.height() + 1];
        for n in &self.nodes {
            counts[n.depth] += 1;
        }
        counts
    }

    /// Degree of a node within the tree.
    pub fn tree_degree(&self, id: usize) -> usize {
        let n = &self.nodes[id];
        n.children.len() + usize::from(n.parent.is_some())
    }

    /// Graph vertices from the root to `id`, inclusive.
    pub fn walk_to(&self, id: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = Some(id);
        while let Some(i) = cur {
            out.push(self.nodes[i].vertex);
            cur = self.nodes[i].parent;
        }
        out.reverse();
        out
    }

    /// Log-odds `log(p/(1−p))` of every node's marginal on its own subtree;
    /// fixed nodes get `±∞`.
    pub fn log_odds(&self, beta: f64) -> Vec<f64> {
        let mut l = vec![0.0; self.nodes.len()];
        for id in (0..self.nodes.len()).rev() {
            let node = &self.nodes[id];
            l[id] = match node.fixed_spin {
                Some(s) => s.sign() * f64::INFINITY,
                None => {
                    let mut acc = 2.0 * node.field;
                    for &c in &node.children {
                        acc += match self.nodes[c].fixed_spin {
                            Some(s) => 2.0 * beta * s.sign(),
                            None => message(l[c], beta),
                        };
                    }
                    acc
                }
            };
        }
        l
    }

    /// `P(σ_root = +1)` from the tree recursion.
    pub fn root_marginal(&self, beta: f64) -> f64 {
        sigmoid(self.log_odds(beta)[0])
    }

    /// Upper bound on how far the root marginal can move when the frontier
    /// spins are changed arbitrarily.
    ///
    /// For each depth `d`, sums over nodes at depth `d` that lie above some
    /// frontier leaf the product of `M(deg_T(a), h_a, β)` over their strict
    /// ancestors `a`; returns the smallest such sum, capped at 1.
    pub fn certified_error(&self, beta: f64) -> f64 {
        let len = self.nodes.len();
        let mut above_frontier = vec![false; len];
        for id in (0..len).rev() {
            let n = &self.nodes[id];
            above_frontier[id] = n.kind == NodeKind::Frontier || n.children.iter().any(|&c| above_frontier[c]);
        }
        if !above_frontier[0] {
            return 0.0;
        }
        let mut weight = vec![1.0; len];
        let mut layers = vec![0.0; self.height() + 1];
        for id in 0..len {
            let n = &self.nodes[id];
            if !above_frontier[id] {
                continue;
            }
            layers[n.depth] += weight[id];
            if !n.children.is_empty() {
                let m = influence_bound(self.tree_degree(id), n.field, beta);
                for &c in &n.children {
                    weight[c] = weight[id] * m;
                }
            }
        }
        layers.into_iter().fold(1.0, f64::min)
    }

    /// Strong-spatial-mixing certificate at threshold `h0` for maximum degree
    /// `max_degree`.
    pub fn ssm_certificate(&self, h0: f64, beta: f64, max_degree: usize) -> CertificateReport {
        let (mut frontier_paths, mut weak_paths) = (0, 0);
        for n in &self.nodes {
            if n.kind != NodeKind::Frontier {
                continue;
            }
            frontier_paths += 1;
            let (mut free, mut strong) = (0usize, 0usize);
            let mut cur = n.parent;
            while let Some(a) = cur {
                free += 1;
                if self.nodes[a].field.abs() >= h0 {
                    strong += 1;
                }
                cur = self.nodes[a].parent;
            }
            if 2 * strong < free {
                weak_paths += 1;
            }
        }
        CertificateReport::new(h0, beta, max_degree, frontier_paths, weak_paths)
    }

    /// Newline-separated `depth vertex spin children` records in pre-order;
    /// `spin` is `+1`, `-1` or `.` for free nodes.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            let spin = match n.fixed_spin {
                Some(Spin::Plus) => "+1",
                Some(Spin::Minus) => "-1",
                None => ".",
            };
            let _ = writeln!(out, "{} {} {} {}", n.depth, n.vertex, spin, n.children.len());
        }
        out
    }
}

/// `M(Δ, h0, β)` together with the decay rate `c₁ = −½ log(M·Δ²)` when
/// `M < Δ^{−2}`.
pub fn rate_constant(max_degree: usize, h0: f64, beta: f64) -> (f64, Option<f64>) {
    let m = influence_bound(max_degree, h0, beta);
    let d2 = (max_degree * max_degree) as f64;
    let product = m * d2;
    if product < 1.0 {
        (m, Some(if product == 0.0 { f64::INFINITY } else { -0.5 * product.ln() }))
    } else {
        (m, None)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub h0: f64,
    pub max_degree: usize,
    pub m_value: f64,
    /// `M(Δ, h0, β) < Δ^{−2}`.
    pub m_below_threshold: bool,
    pub frontier_paths: usize,
    /// Root-to-frontier paths where fewer than half of the free nodes have
    /// `|h| ≥ h0`.
    pub weak_paths: usize,
    pub c1: Option<f64>,
}

impl CertificateReport {
    pub fn new(h0: f64, beta: f64, max_degree: usize, frontier_paths: usize, weak_paths: usize) -> Self {
        let (m_value, c1) = rate_constant(max_degree, h0, beta);
        CertificateReport {
            h0,
            max_degree,
            m_value,
            m_below_threshold: c1.is_some(),
            frontier_paths,
            weak_paths,
            c1,
        }
    }

    pub fn paths_ok(&self) -> bool {
        self.weak_paths == 0
    }

    pub fn accepted(&self) -> bool {
        self.m_below_threshold && self.paths_ok()
    }
}
