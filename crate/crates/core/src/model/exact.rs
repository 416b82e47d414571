//! Brute-force enumeration of the Gibbs measure.
//!
//! Boundary spins are folded into effective fields on their free neighbors,
//! and the free vertices are split into connected components that are
//! enumerated independently. Each component is walked in Gray-code order in
//! fixed-size blocks; block sums are combined in block order, so results do
//! not depend on how many rayon workers run the blocks.

use rayon::prelude::*;

use super::IsingInstance;
use crate::error::{Error, Result};
use crate::numeric::{sigmoid, LogSumExp};
use crate::spin::{PartialConfig, Spin, SpinConfig};

pub const DEFAULT_ENUMERATION_CAP: usize = 24;

/// Low bits walked incrementally inside one block. Each block restarts from
/// a freshly computed weight, which bounds rounding drift.
const GRAY_BITS: usize = 12;

/// Enumeration oracle for log-partition functions, marginals and full laws.
#[derive(Debug, Clone, Copy)]
pub struct Oracle {
    cap: usize,
}

impl Default for Oracle {
    fn default() -> Self {
        Oracle {
            cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

/// Free vertices of one enumeration with boundary fields folded in.
struct Local {
    beta: f64,
    field: Vec<f64>,
    nbrs: Vec<Vec<usize>>,
}

impl Local {
    fn build(inst: &IsingInstance, cond: &PartialConfig, vertices: &[usize]) -> Local {
        let g = inst.graph();
        let mut index = vec![usize::MAX; g.n()];
        for (i, &v) in vertices.iter().enumerate() {
            index[v] = i;
        }
        let mut field = Vec::with_capacity(vertices.len());
        let mut nbrs = Vec::with_capacity(vertices.len());
        for &v in vertices {
            let mut h = inst.field(v);
            let mut local = Vec::new();
            for &w in g.neighbors(v) {
                if let Some(s) = cond.get(w) {
                    h += inst.beta() * s.sign();
                } else if index[w] != usize::MAX {
                    local.push(index[w]);
                }
            }
            field.push(h);
            nbrs.push(local);
        }
        Local {
            beta: inst.beta(),
            field,
            nbrs,
        }
    }

    fn len(&self) -> usize {
        self.field.len()
    }

    fn weight(&self, spins: &[f64]) -> f64 {
        let mut w = 0.0;
        for (i, s) in spins.iter().enumerate() {
            w += self.field[i] * s;
            for &j in &self.nbrs[i] {
                if j > i {
                    w += self.beta * s * spins[j];
                }
            }
        }
        w
    }

    fn walk_block(&self, block: u64, low: usize, mut visit: impl FnMut(u64, f64)) {
        let mut mask = block << low;
        let mut spins: Vec<f64> = (0..self.len())
            .map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 })
            .collect();
        let mut w = self.weight(&spins);
        visit(mask, w);
        for g in 1..(1u64 << low) {
            let j = g.trailing_zeros() as usize;
            let s = spins[j];
            let neighbor_sum: f64 = self.nbrs[j].iter().map(|&k| spins[k]).sum();
            w -= 2.0 * s * (self.field[j] + self.beta * neighbor_sum);
            spins[j] = -s;
            mask ^= 1 << j;
            visit(mask, w);
        }
    }

    fn blocks(&self) -> (u64, usize) {
        let low = self.len().min(GRAY_BITS);
        (1u64 << (self.len() - low), low)
    }

    fn log_sum(&self) -> f64 {
        let (blocks, low) = self.blocks();
        let parts: Vec<f64> = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut acc = LogSumExp::new();
                self.walk_block(b, low, |_, w| acc.push(w));
                acc.value()
            })
            .collect();
        parts.into_iter().collect::<LogSumExp>().value()
    }

    /// Unnormalized log-weights indexed by mask.
    fn log_weights(&self) -> Vec<f64> {
        let (blocks, low) = self.blocks();
        let mut out = vec![0.0; 1usize << self.len()];
        for b in 0..blocks {
            self.walk_block(b, low, |m, w| out[m as usize] = w);
        }
        out
    }
}

/// Free components of the graph after conditioning.
fn free_components(inst: &IsingInstance, cond: &PartialConfig) -> Vec<Vec<usize>> {
    let g = inst.graph();
    let mut seen = vec![false; g.n()];
    let mut out = Vec::new();
    for s in 0..g.n() {
        if seen[s] || cond.get(s).is_some() {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut i = 0;
        while i < comp.len() {
            let u = comp[i];
            i += 1;
            for &w in g.neighbors(u) {
                if !seen[w] && cond.get(w).is_none() {
                    seen[w] = true;
                    comp.push(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// `−H` restricted to terms that involve only fixed vertices.
fn fixed_weight(inst: &IsingInstance, cond: &PartialConfig) -> f64 {
    let mut w = 0.0;
    for (v, s) in cond.fixed() {
        w += inst.field(v) * s.sign();
        for &u in inst.graph().neighbors(v) {
            if u > v {
                if let Some(t) = cond.get(u) {
                    w += inst.beta() * s.sign() * t.sign();
                }
            }
        }
    }
    w
}

impl Oracle {
    pub fn with_cap(cap: usize) -> Oracle {
        Oracle { cap }
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    fn conditioning(&self, inst: &IsingInstance, extra: Option<&PartialConfig>) -> Result<PartialConfig> {
        match extra {
            Some(e) => inst.boundary().merged(e),
            None => Ok(inst.boundary().clone()),
        }
    }

    fn check_size(&self, free: usize) -> Result<()> {
        if free > self.cap {
            Err(Error::TooLarge { free, cap: self.cap })
        } else {
            Ok(())
        }
    }

    /// `log Z` over boundary-consistent configurations, also conditioned on
    /// `extra` when given.
    pub fn log_partition_given(&self, inst: &IsingInstance, extra: Option<&PartialConfig>) -> Result<f64> {
        let cond = self.conditioning(inst, extra)?;
        let comps = free_components(inst, &cond);
        for c in &comps {
            self.check_size(c.len())?;
        }
        let mut total = fixed_weight(inst, &cond);
        for c in &comps {
            total += Local::build(inst, &cond, c).log_sum();
        }
        Ok(total)
    }

    pub fn log_partition(&self, inst: &IsingInstance) -> Result<f64> {
        self.log_partition_given(inst, None)
    }

    /// `P(σ_v = +1 | boundary, extra)`.
    pub fn marginal(&self, inst: &IsingInstance, v: usize, extra: Option<&PartialConfig>) -> Result<f64> {
        if v >= inst.n() {
            return Err(Error::VertexOutOfRange { vertex: v, n: inst.n() });
        }
        let cond = self.conditioning(inst, extra)?;
        if cond.get(v).is_some() {
            return Err(Error::VertexFixed(v));
        }
        let comp = free_components(inst, &cond)
            .into_iter()
            .find(|c| c.binary_search(&v).is_ok())
            .expect("free vertex lies in some free component");
        self.check_size(comp.len())?;
        let rest: Vec<usize> = comp.into_iter().filter(|&u| u != v).collect();
        let fixed_sum: f64 = inst
            .graph()
            .neighbors(v)
            .iter()
            .filter_map(|&y| cond.get(y))
            .map(Spin::sign)
            .sum();
        let mut log_z = [0.0; 2];
        for (slot, s) in [Spin::Plus, Spin::Minus].into_iter().enumerate() {
            let mut c = cond.clone();
            c.set(v, Some(s));
            let own = s.sign() * (inst.field(v) + inst.beta() * fixed_sum);
            log_z[slot] = Local::build(inst, &c, &rest).log_sum() + own;
        }
        Ok(sigmoid(log_z[0] - log_z[1]))
    }

    /// The full law of the free spins.
    pub fn distribution(&self, inst: &IsingInstance) -> Result<ExactDistribution> {
        let free = inst.free_vertices();
        self.check_size(free.len())?;
        if free.len() >= 64 {
            return Err(Error::TooLarge { free: free.len(), cap: 63 });
        }
        let local = Local::build(inst, inst.boundary(), &free);
        let logw = local.log_weights();
        let log_z_free: LogSumExp = logw.iter().copied().collect();
        let lz = log_z_free.value();
        let probs = logw.iter().map(|w| (w - lz).exp()).collect();
        Ok(ExactDistribution {
            base: inst.filled(Spin::Plus),
            free,
            probs,
            log_z: lz + fixed_weight(inst, inst.boundary()),
        })
    }
}

/// The Gibbs law over free spins; mask bit `i` is set when `free[i]` is `+1`.
#[derive(Debug, Clone)]
pub struct ExactDistribution {
    base: SpinConfig,
    pub free: Vec<usize>,
    pub probs: Vec<f64>,
    pub log_z: f64,
}

impl ExactDistribution {
    pub fn mask_of(&self, config: &SpinConfig) -> u64 {
        config.mask_over(&self.free)
    }

    pub fn config_of(&self, mask: u64) -> SpinConfig {
        let mut c = self.base.clone();
        for (i, &v) in self.free.iter().enumerate() {
            c.set(v, if mask >> i & 1 == 1 { Spin::Plus } else { Spin::Minus });
        }
        c
    }

    pub fn prob(&self, config: &SpinConfig) -> f64 {
        self.probs[self.mask_of(config) as usize]
    }

    /// Law of the spins on `subset` (free vertices), indexed by the mask over
    /// `subset`.
    pub fn law_of(&self, subset: &[usize]) -> Result<Vec<f64>> {
        let pos: Vec<usize> = subset
            .iter()
            .map(|v| {
                self.free
                    .iter()
                    .position(|f| f == v)
                    .ok_or(Error::VertexFixed(*v))
            })
            .collect::<Result<_>>()?;
        let mut law = vec![0.0; 1usize << subset.len()];
        for (m, p) in self.probs.iter().enumerate() {
            let sub = pos
                .iter()
                .enumerate()
                .fold(0usize, |acc, (i, &b)| acc | ((m >> b & 1) << i));
            law[sub] += p;
        }
        Ok(law)
    }

    /// `P(σ_v = +1)` for a free vertex.
    pub fn marginal(&self, v: usize) -> Option<f64> {
        let b = self.free.iter().position(|&f| f == v)?;
        Some(
            self.probs
                .iter()
                .enumerate()
                .filter(|(m, _)| m >> b & 1 == 1)
                .map(|(_, p)| p)
                .sum(),
        )
    }
}

pub fn exact_partition(inst: &IsingInstance) -> Result<f64> {
    Oracle::default().log_partition(inst)
}

pub fn exact_marginal(inst: &IsingInstance, v: usize, extra: &PartialConfig) -> Result<f64> {
    Oracle::default().marginal(inst, v, Some(extra))
}

pub fn exact_distribution(inst: &IsingInstance) -> Result<ExactDistribution> {
    Oracle::default().distribution(inst)
}
