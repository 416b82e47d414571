//! Single-site heat-bath dynamics and its path-coupling mixing bound.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{conditional_plus, influence_bound, IsingInstance};
use crate::rng::{below, seeded, trial_rng, uniform, StreamRng};
use crate::spin::{Spin, SpinConfig};
use crate::stats::MeanEstimate;

/// A running chain: configuration, step count and generator.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub config: SpinConfig,
    pub steps_taken: u64,
    rng: StreamRng,
}

impl ChainState {
    /// All-plus start on the free vertices.
    pub fn new(inst: &IsingInstance, seed: u64) -> Self {
        Self::from_config(inst.filled(Spin::Plus), seed)
    }

    pub fn from_config(config: SpinConfig, seed: u64) -> Self {
        ChainState {
            config,
            steps_taken: 0,
            rng: seeded(seed),
        }
    }
}

/// Heat-bath update of `x` driven by the uniform `u`.
fn update(inst: &IsingInstance, config: &mut SpinConfig, x: usize, u: f64) {
    let s: f64 = inst.graph().neighbors(x).iter().map(|&y| config.get(y).sign()).sum();
    let plus = u < conditional_plus(inst.field(x), inst.beta(), s);
    config.set(x, if plus { Spin::Plus } else { Spin::Minus });
}

/// The dynamics on one instance; caches the free-vertex list.
#[derive(Debug, Clone)]
pub struct Glauber<'a> {
    inst: &'a IsingInstance,
    free: Vec<usize>,
}

impl<'a> Glauber<'a> {
    pub fn new(inst: &'a IsingInstance) -> Self {
        Glauber {
            inst,
            free: inst.free_vertices(),
        }
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    /// Resamples one uniformly chosen free vertex from its conditional law.
    pub fn step(&self, state: &mut ChainState) -> Result<()> {
        if self.free.is_empty() {
            return Err(Error::invalid("no free vertex to update"));
        }
        let x = self.free[below(&mut state.rng, self.free.len())];
        let u = uniform(&mut state.rng);
        update(self.inst, &mut state.config, x, u);
        state.steps_taken += 1;
        Ok(())
    }

    pub fn run(&self, state: &mut ChainState, steps: u64) -> Result<()> {
        for _ in 0..steps {
            self.step(state)?;
        }
        Ok(())
    }

    /// One step of two chains sharing the vertex and the uniform.
    pub fn coupled_step(&self, a: &mut SpinConfig, b: &mut SpinConfig, rng: &mut StreamRng) {
        let x = self.free[below(rng, self.free.len())];
        let u = uniform(rng);
        update(self.inst, a, x, u);
        update(self.inst, b, x, u);
    }
}

pub fn glauber_step(state: &mut ChainState, inst: &IsingInstance) -> Result<()> {
    Glauber::new(inst).step(state)
}

/// Steps guaranteed by path coupling, or `None` when `Δ·M(Δ, h_min, β) ≥ 1`.
pub fn mixing_time_bound(n: usize, max_degree: usize, beta: f64, h_min: f64, eps: f64) -> Result<Option<u64>> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!("eps must lie in (0, 1), got {eps}")));
    }
    let contraction = max_degree as f64 * influence_bound(max_degree, h_min, beta);
    if contraction >= 1.0 {
        return Ok(None);
    }
    let n = n.max(1) as f64;
    Ok(Some((n * (n / eps).ln() / (1.0 - contraction)).ceil().max(0.0) as u64))
}

/// `Δ|β| + ½ log Δ`, the field above which the mixing bound is finite.
pub fn glauber_threshold(max_degree: usize, beta: f64) -> f64 {
    let d = max_degree.max(1) as f64;
    d * beta.abs() + 0.5 * d.ln()
}

fn min_free_field(inst: &IsingInstance) -> f64 {
    inst.free_vertices()
        .iter()
        .map(|&v| inst.field(v).abs())
        .fold(f64::INFINITY, f64::min)
}

/// The mixing bound for an instance, over its free vertices.
pub fn instance_mixing_bound(inst: &IsingInstance, eps: f64) -> Result<Option<u64>> {
    let free = inst.free_vertices().len();
    let h_min = min_free_field(inst);
    let h_min = if h_min.is_finite() { h_min } else { 0.0 };
    mixing_time_bound(free, inst.graph().max_degree(), inst.beta(), h_min, eps)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum GlauberOutcome {
    Sample { config: SpinConfig, steps: u64 },
    NoGuarantee { contraction: f64 },
}

/// Runs the chain from all-plus for the guaranteed number of steps.
pub fn glauber_sample(inst: &IsingInstance, eps: f64, seed: u64) -> Result<GlauberOutcome> {
    let free = inst.free_vertices();
    if free.is_empty() {
        return Ok(GlauberOutcome::Sample {
            config: inst.filled(Spin::Plus),
            steps: 0,
        });
    }
    match instance_mixing_bound(inst, eps)? {
        None => {
            let d = inst.graph().max_degree();
            Ok(GlauberOutcome::NoGuarantee {
                contraction: d as f64 * influence_bound(d, min_free_field(inst), inst.beta()),
            })
        }
        Some(steps) => {
            let mut state = ChainState::new(inst, seed);
            Glauber::new(inst).run(&mut state, steps)?;
            Ok(GlauberOutcome::Sample {
                config: state.config,
                steps,
            })
        }
    }
}

/// Uniformly random boundary-consistent configuration.
pub fn random_config(inst: &IsingInstance, rng: &mut StreamRng) -> SpinConfig {
    let mut c = inst.filled(Spin::Plus);
    for v in inst.free_vertices() {
        if uniform(rng) < 0.5 {
            c.set(v, Spin::Minus);
        }
    }
    c
}

/// Mean change in Hamming distance after one coupled step from adjacent
/// configurations: a random configuration and its flip at a random free
/// vertex. Trial `i` uses the stream `seed + i`.
pub fn coupled_drift(inst: &IsingInstance, trials: u64, seed: u64) -> Result<MeanEstimate> {
    let chain = Glauber::new(inst);
    if chain.free().is_empty() {
        return Err(Error::invalid("no free vertex to update"));
    }
    let deltas: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let mut a = random_config(inst, &mut rng);
            let mut b = a.clone();
            let y = chain.free()[below(&mut rng, chain.free().len())];
            b.set(y, a.get(y).flip());
            chain.coupled_step(&mut a, &mut b, &mut rng);
            a.hamming(&b) as f64 - 1.0
        })
        .collect();
    Ok(deltas.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::model::exact_marginal;
    use crate::spin::PartialConfig;

    #[test]
    fn bound_examples() {
        let n = 10;
        let b = mixing_time_bound(n, 3, 0.0, 0.0, 0.1).unwrap().unwrap();
        assert_eq!(b, (10.0 * 100f64.ln()).ceil() as u64);
        let h = glauber_threshold(3, 1.0);
        assert!(mixing_time_bound(n, 3, 1.0, h, 0.1).unwrap().is_some());
        assert!(mixing_time_bound(n, 3, 2.0, 0.0, 0.1).unwrap().is_none());
        assert!(mixing_time_bound(n, 3, 2.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn kernel_is_the_gibbs_conditional() {
        let g = Graph::cycle(5);
        let inst = IsingInstance::free(g, -0.8, vec![0.3, -1.0, 0.0, 2.0, 0.4]).unwrap();
        for x in 0..5 {
            for mask in 0u32..32 {
                let config = SpinConfig((0..5).map(|i| if mask >> i & 1 == 1 { Spin::Plus } else { Spin::Minus }).collect());
                let nbrs = PartialConfig::from_pairs(5, inst.graph().neighbors(x).iter().map(|&y| (y, config.get(y)))).unwrap();
                let exact = exact_marginal(&inst, x, &nbrs).unwrap();
                let s: f64 = inst.graph().neighbors(x).iter().map(|&y| config.get(y).sign()).sum();
                assert!((conditional_plus(inst.field(x), inst.beta(), s) - exact).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn isolated_vertex_is_fair() {
        let inst = IsingInstance::free(Graph::empty(1), 1.0, vec![0.0]).unwrap();
        let chain = Glauber::new(&inst);
        let mut state = ChainState::new(&inst, 1);
        let mut plus = 0;
        for _ in 0..20_000 {
            chain.step(&mut state).unwrap();
            plus += usize::from(state.config.get(0) == Spin::Plus);
        }
        assert!((plus as f64 / 20_000.0 - 0.5).abs() < 3.0 * 0.5 / (20_000f64).sqrt());
    }

    #[test]
    fn fully_fixed_returns_boundary() {
        let b = PartialConfig::from_pairs(2, [(0, Spin::Minus), (1, Spin::Plus)]).unwrap();
        let inst = IsingInstance::new(Graph::path(2), 1.0, vec![0.0; 2], b).unwrap();
        match glauber_sample(&inst, 0.1, 3).unwrap() {
            GlauberOutcome::Sample { config, steps } => {
                assert_eq!(steps, 0);
                assert_eq!(config.0, vec![Spin::Minus, Spin::Plus]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let inst = IsingInstance::free(Graph::cycle(6), 0.5, vec![2.5; 6]).unwrap();
        assert_eq!(glauber_sample(&inst, 0.05, 9).unwrap(), glauber_sample(&inst, 0.05, 9).unwrap());
        let a = coupled_drift(&inst, 500, 4).unwrap();
        let b = coupled_drift(&inst, 500, 4).unwrap();
        assert_eq!(a, b);
    }
}
