//! The Ising measure on a finite graph with per-vertex fields and a
//! partial boundary condition.

mod exact;
mod influence;

pub use exact::{
    exact_distribution, exact_marginal, exact_partition, ExactDistribution, Oracle, DEFAULT_ENUMERATION_CAP,
};
pub use influence::{conditional_plus, influence_bound};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::spin::{PartialConfig, Spin, SpinConfig};

pub const INSTANCE_FORMAT: &str = "rfim-instance-v1";

/// Graph, inverse temperature, external fields and boundary condition.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingInstance {
    graph: Graph,
    beta: f64,
    fields: Vec<f64>,
    boundary: PartialConfig,
}

impl IsingInstance {
    pub fn new(graph: Graph, beta: f64, fields: Vec<f64>, boundary: PartialConfig) -> Result<Self> {
        let n = graph.n();
        if fields.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: fields.len(),
            });
        }
        if boundary.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: boundary.len(),
            });
        }
        if !beta.is_finite() {
            return Err(Error::invalid("beta must be finite"));
        }
        if let Some(v) = fields.iter().position(|h| !h.is_finite()) {
            return Err(Error::invalid(format!("field at vertex {v} is not finite")));
        }
        Ok(IsingInstance {
            graph,
            beta,
            fields,
            boundary,
        })
    }

    /// Instance without boundary condition.
    pub fn free(graph: Graph, beta: f64, fields: Vec<f64>) -> Result<Self> {
        let n = graph.n();
        Self::new(graph, beta, fields, PartialConfig::free(n))
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    pub fn field(&self, v: usize) -> f64 {
        self.fields[v]
    }

    pub fn boundary(&self) -> &PartialConfig {
        &self.boundary
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn free_vertices(&self) -> Vec<usize> {
        self.boundary.free_vertices()
    }

    /// Same model with the boundary replaced.
    pub fn with_boundary(&self, boundary: PartialConfig) -> Result<Self> {
        Self::new(self.graph.clone(), self.beta, self.fields.clone(), boundary)
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(self.graph.clone(), beta, self.fields.clone(), self.boundary.clone())
    }

    /// Configuration equal to the boundary where fixed and `fill` elsewhere.
    pub fn filled(&self, fill: Spin) -> SpinConfig {
        SpinConfig(
            (0..self.n())
                .map(|v| self.boundary.get(v).unwrap_or(fill))
                .collect(),
        )
    }

    /// `H(σ)`, with `−H(σ) = β Σ_{xy∈E} σ_x σ_y + Σ_x h_x σ_x`.
    pub fn hamiltonian(&self, config: &SpinConfig) -> Result<f64> {
        if config.len() != self.n() {
            return Err(Error::LengthMismatch {
                expected: self.n(),
                found: config.len(),
            });
        }
        if let Some((v, _)) = self.boundary.fixed().find(|&(v, s)| config.get(v) != s) {
            return Err(Error::BoundaryConflict(v));
        }
        let interaction: f64 = self
            .graph
            .edges()
            .map(|e| {
                let (a, b) = e.endpoints();
                config.get(a).sign() * config.get(b).sign()
            })
            .sum();
        let external: f64 = self
            .fields
            .iter()
            .zip(&config.0)
            .map(|(h, s)| h * s.sign())
            .sum();
        Ok(-(self.beta * interaction + external))
    }

    /// Sum of `β σ_v σ_y` over neighbors `y` of `v`, given the spins of the
    /// neighbors in `config`.
    pub fn local_field(&self, v: usize, config: &SpinConfig) -> f64 {
        let s: f64 = self.graph.neighbors(v).iter().map(|&y| config.get(y).sign()).sum();
        self.fields[v] + self.beta * s
    }

    pub fn to_file(&self) -> InstanceFile {
        InstanceFile {
            format: INSTANCE_FORMAT.to_string(),
            graph: GraphSource::Inline(self.graph.clone()),
            beta: self.beta,
            fields: self.fields.clone(),
            boundary: BTreeMap::from(&self.boundary),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("instance serialization is infallible")
    }

    /// Parses an instance; a graph given by path is resolved against `base`.
    pub fn from_json(s: &str, base: Option<&Path>) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(s)?;
        file.resolve(base)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text, path.parent())
    }
}

/// A graph embedded in an instance file or referenced by path.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSource {
    Inline(Graph),
    Path(String),
}

/// On-disk form of an instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    pub format: String,
    pub graph: GraphSource,
    pub beta: f64,
    pub fields: Vec<f64>,
    #[serde(default)]
    pub boundary: BTreeMap<String, Spin>,
}

impl InstanceFile {
    pub fn resolve(self, base: Option<&Path>) -> Result<IsingInstance> {
        if self.format != INSTANCE_FORMAT {
            return Err(Error::FormatTag {
                expected: INSTANCE_FORMAT,
                found: self.format,
            });
        }
        let graph = match self.graph {
            GraphSource::Inline(g) => g,
            GraphSource::Path(p) => {
                let path = match base {
                    Some(b) => b.join(&p),
                    None => p.into(),
                };
                Graph::from_json(&std::fs::read_to_string(path)?)?
            }
        };
        let boundary = PartialConfig::from_map(graph.n(), &self.boundary)?;
        IsingInstance::new(graph, self.beta, self.fields, boundary)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge(beta: f64) -> IsingInstance {
        IsingInstance::free(Graph::path(2), beta, vec![0.0, 0.0]).unwrap()
    }

    #[test]
    fn hamiltonian_examples() {
        let inst = edge(1.0);
        let pp = SpinConfig(vec![Spin::Plus, Spin::Plus]);
        let pm = SpinConfig(vec![Spin::Plus, Spin::Minus]);
        assert_eq!(inst.hamiltonian(&pp).unwrap(), -1.0);
        assert_eq!(inst.hamiltonian(&pm).unwrap(), 1.0);
        let single = IsingInstance::free(Graph::empty(1), 0.3, vec![2.0]).unwrap();
        assert_eq!(single.hamiltonian(&SpinConfig(vec![Spin::Plus])).unwrap(), -2.0);
    }

    #[test]
    fn hamiltonian_rejects_bad_configs() {
        let inst = edge(1.0);
        assert!(matches!(
            inst.hamiltonian(&SpinConfig(vec![Spin::Plus])),
            Err(Error::LengthMismatch { .. })
        ));
        let b = PartialConfig::from_pairs(2, [(1, Spin::Minus)]).unwrap();
        let inst = inst.with_boundary(b).unwrap();
        assert!(matches!(
            inst.hamiltonian(&SpinConfig(vec![Spin::Plus, Spin::Plus])),
            Err(Error::BoundaryConflict(1))
        ));
    }

    #[test]
    fn instance_validation() {
        assert!(IsingInstance::free(Graph::path(3), 1.0, vec![0.0; 2]).is_err());
        assert!(IsingInstance::free(Graph::path(2), f64::NAN, vec![0.0; 2]).is_err());
        assert!(IsingInstance::free(Graph::path(2), 1.0, vec![0.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn instance_json_round_trip_and_graph_path() {
        let b = PartialConfig::from_pairs(3, [(2, Spin::Minus)]).unwrap();
        let inst = IsingInstance::new(Graph::path(3), -0.5, vec![0.1, 0.2, -3.0], b).unwrap();
        let back = IsingInstance::from_json(&inst.to_json(), None).unwrap();
        assert_eq!(back, inst);

        let dir = std::env::temp_dir().join(format!("rfim-model-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("g.json"), Graph::path(3).to_json()).unwrap();
        let text = r#"{"format":"rfim-instance-v1","graph":"g.json","beta":-0.5,
                       "fields":[0.1,0.2,-3.0],"boundary":{"2":-1}}"#;
        let loaded = IsingInstance::from_json(text, Some(&dir)).unwrap();
        assert_eq!(loaded, inst);
        std::fs::remove_dir_all(&dir).ok();

        let bad = r#"{"format":"rfim-instance-v1","graph":{"format":"rfim-graph-v1","n":1,"edges":[]},
                      "beta":1,"fields":[0],"boundary":{"1":1}}"#;
        assert!(IsingInstance::from_json(bad, None).is_err());
    }
}
