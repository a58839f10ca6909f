//! Model documents: a JSON object with one section per model kind.
//!
//! ```json
//! {
//!   "variables": [{"name": "x1", "card": 2}],
//!   "factors": [{"name": "phiA", "scope": ["x1"], "values": [2, 4]}],
//!   "dag": {"b": ["a"], "a": []},
//!   "ugm": {"edges": [["a", "b"]], "nodes": ["c"]},
//!   "hmm": {"prior": [0.5, 0.5], "transitions": [[...]], "emissions": [[...]], "observations": [1]},
//!   "kalman": {"prior": {"mean": 0, "variance": 1}, "A": [...], "B": [...], "C": [...], "D": [...]},
//!   "gaussian": {"precision": [[2, 1], [1, 2]], "linear": [1, 1]},
//!   "rbm": {"weights": [[...]], "visible_bias": [...], "hidden_bias": [...]}
//! }
//! ```
//!
//! Factor tables list the first scope variable fastest. HMM matrices may be given once
//! (shared by every step) or per step.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use gmkit::factor::{Factor, Variable};
use gmkit::graph::{Dag, Ugm};
use gmkit::message_passing::FactorGraph;
use gmkit::numerics::Matrix;
use gmkit::samplers::RbmModel;
use gmkit::sequential::{DiscreteHmm, Gaussian1, KalmanModel};
use gmkit::variational::GaussianTarget;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variables: Option<Vec<VariableSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factors: Option<Vec<FactorSpec>>,
    /// Node to parent list; parents that are not keys are roots.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dag: Option<BTreeMap<String, Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ugm: Option<UgmSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hmm: Option<HmmSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kalman: Option<KalmanSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaussian: Option<GaussianSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rbm: Option<RbmSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableSpec {
    pub name: String,
    pub card: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorSpec {
    pub name: String,
    pub scope: Vec<String>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UgmSpec {
    pub edges: Vec<(String, String)>,
    /// Isolated nodes; edge endpoints are nodes implicitly.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<String>,
}

/// One stochastic matrix shared by all steps, or one per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepMatrices {
    Shared(Vec<Vec<f64>>),
    PerStep(Vec<Vec<Vec<f64>>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HmmSpec {
    pub prior: Vec<f64>,
    /// `transitions[i][j] = p(h_{t+1} = j | h_t = i)`.
    pub transitions: StepMatrices,
    /// `emissions[i][k] = p(v_t = k | h_t = i)`.
    pub emissions: StepMatrices,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observations: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSpec1 {
    pub mean: f64,
    pub variance: f64,
}

/// `h_1 ~ prior`, `h_s = A_s h_{s−1} + N(0, B_s)`, `v_s = C_s h_s + N(0, D_s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KalmanSpec {
    pub prior: GaussianSpec1,
    /// `A_2, …, A_n`.
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    /// `B_2, …, B_n`.
    #[serde(rename = "B")]
    pub b: Vec<f64>,
    #[serde(rename = "C")]
    pub c: Vec<f64>,
    #[serde(rename = "D")]
    pub d: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observations: Option<Vec<f64>>,
}

/// `log p(y) = −½yᵀΛy + ηᵀy + const`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSpec {
    pub precision: Vec<Vec<f64>>,
    pub linear: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RbmSpec {
    /// Visible × hidden coupling.
    pub weights: Vec<Vec<f64>>,
    pub visible_bias: Vec<f64>,
    pub hidden_bias: Vec<f64>,
}

fn validation(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<Matrix> {
    Matrix::from_rows(rows).map_err(|e| CliError::from(e).context(what))
}

impl ModelDocument {
    /// Parses and validates JSON text.
    pub fn from_json(text: &str) -> Result<ModelDocument> {
        let doc: ModelDocument = serde_json::from_str(text).map_err(|e| validation(format!("model document: {e}")))?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents always serialise")
    }

    /// Builds every section present so that later commands only fail on query errors.
    pub fn validate(&self) -> Result<()> {
        let sections = [
            self.factors.is_some(),
            self.dag.is_some(),
            self.ugm.is_some(),
            self.hmm.is_some(),
            self.kalman.is_some(),
            self.gaussian.is_some(),
            self.rbm.is_some(),
        ];
        if !sections.contains(&true) {
            return Err(validation("model document has no model section"));
        }
        if self.variables.is_some() || self.factors.is_some() {
            self.factor_graph()?;
        }
        if self.dag.is_some() {
            self.dag()?;
        }
        if self.ugm.is_some() {
            self.ugm()?;
        }
        if let Some(h) = &self.hmm {
            let len = h.observations.as_ref().map_or(1, Vec::len).max(1);
            self.hmm(len)?;
        }
        if self.kalman.is_some() {
            self.kalman()?;
        }
        if self.gaussian.is_some() {
            self.gaussian()?;
        }
        if self.rbm.is_some() {
            self.rbm()?;
        }
        Ok(())
    }

    fn declared(&self) -> Result<BTreeMap<&str, usize>> {
        let vars = self.variables.as_ref().ok_or_else(|| validation("model has factors but no \"variables\" section"))?;
        let mut out = BTreeMap::new();
        for v in vars {
            if out.insert(v.name.as_str(), v.card).is_some() {
                return Err(validation(format!("variable {} is declared twice", v.name)));
            }
        }
        Ok(out)
    }

    pub fn factor_graph(&self) -> Result<FactorGraph> {
        let specs = self.factors.as_ref().ok_or_else(|| validation("model has no \"factors\" section"))?;
        if specs.is_empty() {
            return Err(validation("\"factors\" is empty"));
        }
        let cards = self.declared()?;
        let mut factors = Vec::with_capacity(specs.len());
        for f in specs {
            let scope = f
                .scope
                .iter()
                .map(|v| {
                    cards
                        .get(v.as_str())
                        .map(|c| Variable::new(v.clone(), *c))
                        .ok_or_else(|| validation(format!("factor {} references undeclared variable {v}", f.name)))
                })
                .collect::<Result<Vec<_>>>()?;
            let table = Factor::new(scope, f.values.clone()).map_err(|e| CliError::from(e).context(format!("factor {}", f.name)))?;
            factors.push((f.name.clone(), table));
        }
        let variables = self.variables.iter().flatten().map(|v| Variable::new(v.name.clone(), v.card)).collect();
        Ok(FactorGraph::new(variables, factors)?)
    }

    pub fn dag(&self) -> Result<Dag> {
        let parents = self.dag.as_ref().ok_or_else(|| validation("model has no \"dag\" section"))?;
        let mut nodes: Vec<&String> = parents.keys().collect();
        let keys: BTreeSet<&String> = parents.keys().collect();
        let extra: BTreeSet<&String> = parents.values().flatten().filter(|p| !keys.contains(p)).collect();
        nodes.extend(extra);
        Ok(Dag::new(&nodes, parents).map_err(|e| CliError::from(e).context("dag"))?)
    }

    pub fn ugm(&self) -> Result<Ugm> {
        let spec = self.ugm.as_ref().ok_or_else(|| validation("model has no \"ugm\" section"))?;
        let nodes: BTreeSet<String> = spec.edges.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).chain(spec.nodes.iter().cloned()).collect();
        Ok(Ugm::from_pairs(nodes, spec.edges.clone()).map_err(|e| CliError::from(e).context("ugm"))?)
    }

    /// The chain over `len` steps when both matrix lists are shared; otherwise the per-step
    /// lists fix the length and `len` is ignored.
    pub fn hmm(&self, len: usize) -> Result<DiscreteHmm> {
        let h = self.hmm.as_ref().ok_or_else(|| validation("model has no \"hmm\" section"))?;
        let n = match (&h.transitions, &h.emissions) {
            (_, StepMatrices::PerStep(e)) => e.len(),
            (StepMatrices::PerStep(t), StepMatrices::Shared(_)) => t.len() + 1,
            (StepMatrices::Shared(_), StepMatrices::Shared(_)) => len,
        };
        let expand = |m: &StepMatrices, count: usize| match m {
            StepMatrices::Shared(one) => vec![one.clone(); count],
            StepMatrices::PerStep(all) => all.clone(),
        };
        let hmm = DiscreteHmm::new(h.prior.clone(), expand(&h.transitions, n.saturating_sub(1)), expand(&h.emissions, n));
        Ok(hmm.map_err(|e| CliError::from(e).context("hmm"))?)
    }

    pub fn kalman(&self) -> Result<KalmanModel> {
        let k = self.kalman.as_ref().ok_or_else(|| validation("model has no \"kalman\" section"))?;
        let build = || -> std::result::Result<KalmanModel, gmkit::sequential::SequentialError> {
            KalmanModel::new(Gaussian1::new(k.prior.mean, k.prior.variance)?, k.a.clone(), k.b.clone(), k.c.clone(), k.d.clone())
        };
        build().map_err(|e| CliError::from(e).context("kalman"))
    }

    pub fn gaussian(&self) -> Result<GaussianTarget> {
        let g = self.gaussian.as_ref().ok_or_else(|| validation("model has no \"gaussian\" section"))?;
        let precision = matrix(&g.precision, "gaussian precision")?;
        GaussianTarget::new(precision, g.linear.clone()).map_err(|e| CliError::from(e).context("gaussian"))
    }

    pub fn rbm(&self) -> Result<RbmModel> {
        let r = self.rbm.as_ref().ok_or_else(|| validation("model has no \"rbm\" section"))?;
        let w = matrix(&r.weights, "rbm weights")?;
        RbmModel::new(w, r.visible_bias.clone(), r.hidden_bias.clone()).map_err(|e| CliError::from(e).context("rbm"))
    }
}

/// Reads and validates a model document.
pub fn parse_model(path: &Path) -> Result<ModelDocument> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
    ModelDocument::from_json(&text).map_err(|e| e.context(path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TREE: &str = r#"{
        "variables": [{"name": "a", "card": 2}, {"name": "b", "card": 3}],
        "factors": [{"name": "f", "scope": ["a", "b"], "values": [1, 2, 3, 4, 5, 6]}]
    }"#;

    #[test]
    fn factor_tables_follow_the_declared_cards() {
        let doc = ModelDocument::from_json(TREE).unwrap();
        let fg = doc.factor_graph().unwrap();
        assert_eq!(fg.factor("f").unwrap().get(&[1, 2]), 6.0);
    }

    #[test]
    fn validation_names_the_offending_factor() {
        let short = TREE.replace("[1, 2, 3, 4, 5, 6]", "[1, 2, 3]");
        let err = ModelDocument::from_json(&short).unwrap_err();
        assert!(matches!(err, CliError::Validation(ref m) if m.contains("factor f")), "{err}");
        let undeclared = TREE.replace("[\"a\", \"b\"]", "[\"a\", \"z\"]");
        let err = ModelDocument::from_json(&undeclared).unwrap_err();
        assert!(err.to_string().contains("undeclared variable z"), "{err}");
        let empty = r#"{"variables": [{"name": "a", "card": 2}], "factors": []}"#;
        assert!(ModelDocument::from_json(empty).unwrap_err().to_string().contains("empty"));
        assert!(ModelDocument::from_json("{}").is_err());
        let err = ModelDocument::from_json("{\"dag\": {\"a\": [\"b\"]},\n \"bogus\": 1}").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn hmm_matrices_may_be_shared_or_per_step() {
        let shared = r#"{"hmm": {"prior": [0.5, 0.5], "transitions": [[0.9, 0.1], [0.2, 0.8]], "emissions": [[1, 0], [0, 1]]}}"#;
        let doc = ModelDocument::from_json(shared).unwrap();
        assert_eq!(doc.hmm(4).unwrap().len(), 4);
        let per_step = r#"{"hmm": {"prior": [1, 0], "transitions": [[[0, 1], [1, 0]]], "emissions": [[[1, 0], [0, 1]], [[0.5, 0.5], [0.5, 0.5]]]}}"#;
        let doc = ModelDocument::from_json(per_step).unwrap();
        assert_eq!(doc.hmm(9).unwrap().len(), 2);
    }

    #[test]
    fn dag_parents_need_not_be_keys() {
        let doc = ModelDocument::from_json(r#"{"dag": {"c": ["a", "b"]}}"#).unwrap();
        assert_eq!(doc.dag().unwrap().nodes().len(), 3);
        assert!(ModelDocument::from_json(r#"{"dag": {"a": ["b"], "b": ["a"]}}"#).is_err());
    }
}
