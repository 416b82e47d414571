//! Site percolation with influence probabilities and the coupled exploration
//! that dominates boundary disagreement by percolation.
//!
//! Trial `i` of every Monte Carlo estimate draws from the stream
//! `seed + i`, one uniform per vertex in index order; a site is open when its
//! uniform falls below its probability. Raising any probability therefore
//! only opens more sites for the same seed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::{influence_bound, IsingInstance, Oracle};
use crate::randgen::FieldSpec;
use crate::rng::{trial_rng, uniform, StreamRng};
use crate::spin::{PartialConfig, Spin, SpinConfig};
use crate::stats::{tv_distance, Estimate, MeanEstimate};

pub const PERC_FORMAT: &str = "rfim-perc-v1";
/// Largest number of free vertices enumerated for exact conditionals.
pub const EXPLORATION_CAP: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SitePercolation {
    graph: Graph,
    probabilities: Vec<f64>,
    boundary_open: Vec<usize>,
}

impl SitePercolation {
    pub fn new(graph: Graph, probabilities: Vec<f64>, mut boundary_open: Vec<usize>) -> Result<Self> {
        if probabilities.len() != graph.n() {
            return Err(Error::LengthMismatch {
                expected: graph.n(),
                found: probabilities.len(),
            });
        }
        if let Some(p) = probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::invalid(format!("site probability {p} outside [0, 1]")));
        }
        if let Some(&v) = boundary_open.iter().find(|&&v| v >= graph.n()) {
            return Err(Error::VertexOutOfRange { vertex: v, n: graph.n() });
        }
        boundary_open.sort_unstable();
        boundary_open.dedup();
        Ok(SitePercolation {
            graph,
            probabilities,
            boundary_open,
        })
    }

    /// `p_x = M(deg x, h_x, β)` on free vertices. Boundary vertices are open
    /// where `η` and `ξ` disagree and closed elsewhere.
    pub fn for_disagreement(inst: &IsingInstance, eta: &PartialConfig, xi: &PartialConfig) -> Result<Self> {
        let g = inst.graph();
        let a = inst.boundary().merged(eta)?;
        let b = inst.boundary().merged(xi)?;
        let mut probs = vec![0.0; g.n()];
        let mut open = Vec::new();
        for v in 0..g.n() {
            match (a.get(v), b.get(v)) {
                (None, None) => probs[v] = influence_bound(g.degree(v), inst.field(v), inst.beta()),
                (Some(s), Some(t)) => {
                    if s != t {
                        open.push(v);
                    }
                }
                _ => return Err(Error::invalid(format!("vertex {v} is fixed on only one side"))),
            }
        }
        Self::new(g.clone(), probs, open)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn boundary_open(&self) -> &[usize] {
        &self.boundary_open
    }

    pub fn with_probabilities(&self, probabilities: Vec<f64>) -> Result<Self> {
        Self::new(self.graph.clone(), probabilities, self.boundary_open.clone())
    }

    pub fn open_from_uniforms(&self, u: &[f64]) -> Vec<bool> {
        let mut open: Vec<bool> = u.iter().zip(&self.probabilities).map(|(u, p)| u < p).collect();
        for &v in &self.boundary_open {
            open[v] = true;
        }
        open
    }

    pub fn sample(&self, rng: &mut StreamRng) -> Vec<bool> {
        let u: Vec<f64> = (0..self.graph.n()).map(|_| uniform(rng)).collect();
        self.open_from_uniforms(&u)
    }

    /// An open path joins the open boundary to some vertex of `targets`.
    pub fn connects(&self, open: &[bool], targets: &[bool]) -> bool {
        let mut seen = vec![false; self.graph.n()];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for &b in &self.boundary_open {
            seen[b] = true;
            queue.push_back(b);
        }
        while let Some(u) = queue.pop_front() {
            if targets[u] {
                return true;
            }
            for &w in self.graph.neighbors(u) {
                if open[w] && !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        false
    }

    fn target_mask(&self, targets: &[usize]) -> Result<Vec<bool>> {
        let mut mask = vec![false; self.graph.n()];
        for &a in targets {
            if a >= self.graph.n() {
                return Err(Error::VertexOutOfRange { vertex: a, n: self.graph.n() });
            }
            if self.boundary_open.binary_search(&a).is_ok() {
                return Err(Error::invalid(format!("target {a} is an open boundary vertex")));
            }
            mask[a] = true;
        }
        Ok(mask)
    }

    /// Monte Carlo estimate of `P_p(∂V ↔ A)`.
    pub fn connection_probability(&self, targets: &[usize], trials: u64, seed: u64) -> Result<Estimate> {
        if trials == 0 {
            return Err(Error::invalid("trials must be positive"));
        }
        let mask = self.target_mask(targets)?;
        let hits: u64 = (0..trials)
            .into_par_iter()
            .map(|i| u64::from(self.connects(&self.sample(&mut trial_rng(seed, i)), &mask)))
            .sum();
        Ok(Estimate::from_counts(hits, trials))
    }

    /// `P_p(∂V ↔ A)` by enumerating the sites with probability strictly
    /// between 0 and 1.
    pub fn exact_connection_probability(&self, targets: &[usize], cap: usize) -> Result<f64> {
        let mask = self.target_mask(targets)?;
        let random: Vec<usize> = (0..self.graph.n())
            .filter(|&v| self.probabilities[v] > 0.0 && self.probabilities[v] < 1.0 && self.boundary_open.binary_search(&v).is_err())
            .collect();
        if random.len() > cap {
            return Err(Error::TooLarge {
                free: random.len(),
                cap,
            });
        }
        let mut open: Vec<bool> = self.probabilities.iter().map(|&p| p >= 1.0).collect();
        for &v in &self.boundary_open {
            open[v] = true;
        }
        let mut total = 0.0;
        for m in 0u64..(1 << random.len()) {
            let mut weight = 1.0;
            for (i, &v) in random.iter().enumerate() {
                let on = m >> i & 1 == 1;
                open[v] = on;
                weight *= if on { self.probabilities[v] } else { 1.0 - self.probabilities[v] };
            }
            if self.connects(&open, &mask) {
                total += weight;
            }
        }
        Ok(total)
    }
}

/// Record of one coupled exploration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingTranscript {
    pub sigma_a: SpinConfig,
    pub sigma_b: SpinConfig,
    /// `S_x`: the two sides differ at `x`.
    pub disagreement: Vec<bool>,
    pub exploration_order: Vec<usize>,
}

/// Draws the two conditioned Gibbs measures jointly, one vertex at a time,
/// each vertex from a shared uniform against both exact conditionals.
///
/// Vertices are explored by increasing distance from the boundary; within a
/// distance, vertices adjacent to the current disagreement come first, then
/// smaller indices.
#[derive(Debug)]
pub struct CoupledExplorer {
    inst: IsingInstance,
    sides: [PartialConfig; 2],
    distance: Vec<usize>,
    oracle: Oracle,
    cache: HashMap<(usize, Vec<i8>), f64>,
}

fn key(cond: &PartialConfig) -> Vec<i8> {
    cond.as_slice().iter().map(|s| s.map_or(0, Spin::value)).collect()
}

impl CoupledExplorer {
    pub fn new(inst: &IsingInstance, eta: &PartialConfig, xi: &PartialConfig) -> Result<Self> {
        let a = inst.boundary().merged(eta)?;
        let b = inst.boundary().merged(xi)?;
        if a.free_vertices() != b.free_vertices() {
            return Err(Error::invalid("boundary conditions must fix the same vertices"));
        }
        let free = a.free_vertices().len();
        if free > EXPLORATION_CAP {
            return Err(Error::TooLarge {
                free,
                cap: EXPLORATION_CAP,
            });
        }
        let fixed: Vec<usize> = a.fixed().map(|(v, _)| v).collect();
        let distance = inst
            .graph()
            .distances_from_set(&fixed)
            .into_iter()
            .map(|d| d.unwrap_or(usize::MAX))
            .collect();
        Ok(CoupledExplorer {
            inst: inst.clone(),
            sides: [a, b],
            distance,
            oracle: Oracle::with_cap(EXPLORATION_CAP),
            cache: HashMap::new(),
        })
    }

    fn conditional(&mut self, x: usize, cond: &PartialConfig) -> Result<f64> {
        let k = (x, key(cond));
        if let Some(&p) = self.cache.get(&k) {
            return Ok(p);
        }
        let inst = self.inst.with_boundary(cond.clone())?;
        let p = self.oracle.marginal(&inst, x, None)?;
        self.cache.insert(k, p);
        Ok(p)
    }

    pub fn run(&mut self, rng: &mut StreamRng) -> Result<CouplingTranscript> {
        let n = self.inst.n();
        let mut cond = self.sides.clone();
        let mut disagreement: Vec<bool> = (0..n).map(|v| cond[0].get(v) != cond[1].get(v)).collect();
        let mut unexplored = cond[0].free_vertices();
        let mut order = Vec::with_capacity(unexplored.len());
        while !unexplored.is_empty() {
            let g = self.inst.graph();
            let (pos, &x) = unexplored
                .iter()
                .enumerate()
                .min_by_key(|(_, &v)| {
                    let near = g.neighbors(v).iter().any(|&w| disagreement[w]);
                    (self.distance[v], !near, v)
                })
                .expect("nonempty");
            unexplored.remove(pos);
            let u = uniform(rng);
            let mut spins = [Spin::Plus; 2];
            for side in 0..2 {
                let p = self.conditional(x, &cond[side])?;
                spins[side] = if u < p { Spin::Plus } else { Spin::Minus };
                cond[side].set(x, Some(spins[side]));
            }
            disagreement[x] = spins[0] != spins[1];
            order.push(x);
        }
        let fill = |c: &PartialConfig| SpinConfig(c.as_slice().iter().map(|s| s.expect("all explored")).collect());
        Ok(CouplingTranscript {
            sigma_a: fill(&cond[0]),
            sigma_b: fill(&cond[1]),
            disagreement,
            exploration_order: order,
        })
    }
}

pub fn coupled_exploration(inst: &IsingInstance, eta: &PartialConfig, xi: &PartialConfig, seed: u64) -> Result<CouplingTranscript> {
    CoupledExplorer::new(inst, eta, xi)?.run(&mut crate::rng::seeded(seed))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominationReport {
    pub exact_tv: f64,
    pub estimate: Estimate,
    /// `d_TV ≤ estimate + 3 s.e.`
    pub holds: bool,
}

/// Exact `d_TV` between the laws of `σ_A` under the two boundary
/// conditions, against the Monte Carlo percolation bound.
pub fn tv_domination_check(
    inst: &IsingInstance,
    targets: &[usize],
    eta: &PartialConfig,
    xi: &PartialConfig,
    trials: u64,
    seed: u64,
) -> Result<DominationReport> {
    let oracle = Oracle::default();
    let law = |c: &PartialConfig| -> Result<Vec<f64>> {
        let merged = inst.boundary().merged(c)?;
        oracle.distribution(&inst.with_boundary(merged)?)?.law_of(targets)
    };
    let exact_tv = tv_distance(&law(eta)?, &law(xi)?);
    let perc = SitePercolation::for_disagreement(inst, eta, xi)?;
    let estimate = perc.connection_probability(targets, trials, seed)?;
    Ok(DominationReport {
        exact_tv,
        holds: exact_tv <= estimate.upper,
        estimate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayRow {
    pub distance: usize,
    pub vertices: usize,
    /// `E_h[P_p(x ↔ y)]` averaged over `y` at this distance.
    pub mean: MeanEstimate,
    /// `E_h[P_p(x ↔ some y at this distance)]`.
    pub any: Estimate,
    pub envelope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayProfile {
    pub c2: f64,
    pub rows: Vec<DecayRow>,
}

/// Connection probabilities from `x` by graph distance, averaged over field
/// draws. Each trial draws fields and then sites from the same stream; `c2`
/// is `h0 − |β|Δ − log Δ` and the envelope is `4e^{−c₂d}`.
pub fn averaged_decay_profile(
    g: &Graph,
    fields: &FieldSpec,
    beta: f64,
    x: usize,
    h0: f64,
    trials: u64,
    seed: u64,
) -> Result<DecayProfile> {
    if x >= g.n() {
        return Err(Error::VertexOutOfRange { vertex: x, n: g.n() });
    }
    if trials == 0 {
        return Err(Error::invalid("trials must be positive"));
    }
    fields.validate()?;
    let dist = g.distances_from(x);
    let max_d = dist.iter().flatten().copied().max().unwrap_or(0);
    let mut by_distance = vec![Vec::new(); max_d + 1];
    for (v, d) in dist.iter().enumerate() {
        if let Some(d) = d {
            by_distance[*d].push(v);
        }
    }
    let per_trial: Vec<Result<Vec<(f64, bool)>>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let h = fields.sample(g.n(), &mut rng, None)?;
            let probs: Vec<f64> = (0..g.n()).map(|v| influence_bound(g.degree(v), h[v], beta)).collect();
            let u: Vec<f64> = (0..g.n()).map(|_| uniform(&mut rng)).collect();
            let open: Vec<bool> = u.iter().zip(&probs).map(|(u, p)| u < p).collect();
            let reached = open_cluster(g, &open, x);
            Ok(by_distance
                .iter()
                .map(|vs| {
                    let hit = vs.iter().filter(|&&v| reached[v]).count();
                    (hit as f64 / vs.len() as f64, hit > 0)
                })
                .collect())
        })
        .collect();
    let d = g.max_degree().max(1) as f64;
    let c2 = h0 - beta.abs() * d - d.ln();
    let mut means = vec![MeanEstimate::default(); max_d + 1];
    let mut any = vec![0u64; max_d + 1];
    for t in per_trial {
        for (k, (m, a)) in t?.into_iter().enumerate() {
            means[k].push(m);
            any[k] += u64::from(a);
        }
    }
    let rows = (0..=max_d)
        .map(|k| DecayRow {
            distance: k,
            vertices: by_distance[k].len(),
            mean: means[k],
            any: Estimate::from_counts(any[k], trials),
            envelope: 4.0 * (-c2 * k as f64).exp(),
        })
        .collect();
    Ok(DecayProfile { c2, rows })
}

/// Vertices joined to `x` by open sites, `x` included; empty if `x` is closed.
fn open_cluster(g: &Graph, open: &[bool], x: usize) -> Vec<bool> {
    let mut seen = vec![false; g.n()];
    if !open[x] {
        return seen;
    }
    seen[x] = true;
    let mut queue = VecDeque::from([x]);
    while let Some(u) = queue.pop_front() {
        for &w in g.neighbors(u) {
            if open[w] && !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    seen
}

/// `rfim-perc-v1` experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercConfig {
    pub format: String,
    pub instance: String,
    #[serde(rename = "A")]
    pub targets: Vec<usize>,
    pub eta: std::collections::BTreeMap<String, Spin>,
    pub xi: std::collections::BTreeMap<String, Spin>,
    pub trials: u64,
    pub seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_probabilities() {
        let g = Graph::path(5);
        let none = SitePercolation::new(g.clone(), vec![0.0; 5], vec![0]).unwrap();
        let mut rng = crate::rng::seeded(1);
        assert_eq!(none.sample(&mut rng), vec![true, false, false, false, false]);
        let all = SitePercolation::new(g, vec![1.0; 5], vec![]).unwrap();
        assert!(all.sample(&mut rng).iter().all(|&o| o));
    }

    #[test]
    fn two_site_product() {
        let q = 0.37;
        let s = SitePercolation::new(Graph::path(3), vec![0.0, q, q], vec![0]).unwrap();
        assert!((s.exact_connection_probability(&[2], 20).unwrap() - q * q).abs() < 1e-15);
        let e = s.connection_probability(&[2], 20_000, 5).unwrap();
        assert!(e.lower <= q * q && q * q <= e.upper);
        assert!(s.connection_probability(&[2], 0, 5).is_err());
        assert!(s.connection_probability(&[0], 10, 5).is_err());
    }

    #[test]
    fn adjacent_certain_target() {
        let s = SitePercolation::new(Graph::path(3), vec![0.0, 1.0, 0.0], vec![0]).unwrap();
        assert_eq!(s.connection_probability(&[1], 100, 1).unwrap().mean, 1.0);
        assert_eq!(s.connection_probability(&[2], 100, 1).unwrap().mean, 0.0);
    }

    #[test]
    fn agreeing_boundary_gives_identical_sides() {
        let inst = IsingInstance::free(Graph::cycle(5), 0.9, vec![0.2, -0.1, 0.0, 0.4, -0.6]).unwrap();
        let eta = PartialConfig::from_pairs(5, [(0, Spin::Plus)]).unwrap();
        let t = coupled_exploration(&inst, &eta, &eta, 3).unwrap();
        assert_eq!(t.sigma_a, t.sigma_b);
        assert!(t.disagreement.iter().all(|&d| !d));
        assert_eq!(t.exploration_order, vec![1, 4, 2, 3]);
    }

    #[test]
    fn zero_coupling_confines_disagreement() {
        let inst = IsingInstance::free(Graph::path(4), 0.0, vec![0.3; 4]).unwrap();
        let eta = PartialConfig::from_pairs(4, [(0, Spin::Plus)]).unwrap();
        let xi = PartialConfig::from_pairs(4, [(0, Spin::Minus)]).unwrap();
        for seed in 0..50 {
            let t = coupled_exploration(&inst, &eta, &xi, seed).unwrap();
            assert_eq!(t.disagreement, vec![true, false, false, false]);
        }
    }

    #[test]
    fn two_spin_equality_case() {
        let beta = 0.8;
        let inst = IsingInstance::free(Graph::path(2), beta, vec![0.0; 2]).unwrap();
        let eta = PartialConfig::from_pairs(2, [(0, Spin::Plus)]).unwrap();
        let xi = PartialConfig::from_pairs(2, [(0, Spin::Minus)]).unwrap();
        let r = tv_domination_check(&inst, &[1], &eta, &xi, 10_000, 2).unwrap();
        let m = influence_bound(1, 0.0, beta);
        assert!((r.exact_tv - m).abs() < 1e-12);
        let perc = SitePercolation::for_disagreement(&inst, &eta, &xi).unwrap();
        assert!((perc.exact_connection_probability(&[1], 20).unwrap() - m).abs() < 1e-12);
        assert!(r.holds);
    }

    #[test]
    fn decay_profile_at_zero_coupling() {
        let g = Graph::regular_tree(3, 4);
        let p = averaged_decay_profile(&g, &FieldSpec::Gaussian { variance: 1.0 }, 0.0, 0, 5.0, 200, 1).unwrap();
        assert!(p.rows.iter().all(|r| r.mean.mean == 0.0 && r.any.mean == 0.0));
        assert_eq!(p.rows.len(), 5);
    }
}
