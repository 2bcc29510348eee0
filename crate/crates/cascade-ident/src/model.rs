//! Model types for independent-cascade graphs with hidden confounders:
//! node and edge storage, structural validation, and class detection.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use thiserror::Error;

/// Errors from parsing or preparing a model.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model file syntax error: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("invalid model: {0}")]
    Invalid(ValidationReport),
    #[error("stored node order is not topological: {0}")]
    OrderViolation(String),
}

/// One structural-invariant violation found by [`CausalIcModel::validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// Stable rule identifier, e.g. `probability-out-of-range`.
    pub rule: &'static str,
    /// Human-readable description.
    pub message: String,
    /// The offending node or edge, as written in the file.
    pub element: String,
}

/// Outcome of structural validation. `ok` is true iff `violations` is empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok {
            return write!(f, "ok");
        }
        let msgs: Vec<&str> = self.violations.iter().map(|v| v.message.as_str()).collect();
        write!(f, "{}", msgs.join("; "))
    }
}

/// Structural class of a model, decided purely by graph shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelClass {
    /// Every observed node has at most one hidden parent and every hidden
    /// node has exactly one outgoing edge (private confounders only).
    Markovian,
    /// Observed nodes form a single path and hidden node t points exactly
    /// to the consecutive pair (t, t+1).
    SemiMarkovianChain,
    /// Exactly one hidden node, with an edge to every observed node.
    GlobalHidden,
    /// One global hidden node plus one private hidden parent per node.
    MixedGlobalMarkovian,
    /// Anything else.
    General,
}

impl fmt::Display for ModelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelClass::Markovian => "markovian",
            ModelClass::SemiMarkovianChain => "chain",
            ModelClass::GlobalHidden => "global",
            ModelClass::MixedGlobalMarkovian => "mixed",
            ModelClass::General => "general",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct HiddenSpec {
    name: String,
    r: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VvSpec {
    from: String,
    to: String,
    p: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct UvSpec {
    from: String,
    to: String,
    q: f64,
}

/// On-disk JSON form of a model. The observed list IS the topological order.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelFile {
    #[serde(default)]
    allow_cycles: bool,
    observed: Vec<String>,
    #[serde(default)]
    hidden: Vec<HiddenSpec>,
    #[serde(default)]
    vv_edges: Vec<VvSpec>,
    #[serde(default)]
    uv_edges: Vec<UvSpec>,
}

/// A causal independent-cascade model: observed nodes in a fixed topological
/// order, hidden root nodes with activation probabilities `r`, observed-to-
/// observed edges with probabilities `p`, and hidden-to-observed edges with
/// probabilities `q`.
///
/// Construction keeps whatever it is given; call [`validate`] to check the
/// structural invariants. Edges whose endpoints cannot be resolved are kept
/// only as recorded violations.
///
/// [`validate`]: CausalIcModel::validate
#[derive(Debug, Clone)]
pub struct CausalIcModel {
    observed: Vec<String>,
    hidden: Vec<(String, f64)>,
    /// (from, to, p) with indices into `observed`.
    vv: Vec<(usize, usize, f64)>,
    /// (hidden index, observed index, q).
    uv: Vec<(usize, usize, f64)>,
    allow_cycles: bool,
    /// Problems found while resolving a file (unknown names, misdirected edges).
    resolution_violations: Vec<Violation>,
}

impl CausalIcModel {
    /// Builds a model from index-based parts. `hidden_r[k]` is the activation
    /// probability of hidden node k; edges use indices into the node lists.
    /// Node names are generated as `V1..Vn` and `U1..Um`.
    pub fn from_parts(
        n: usize,
        hidden_r: &[f64],
        vv: &[(usize, usize, f64)],
        uv: &[(usize, usize, f64)],
        allow_cycles: bool,
    ) -> Self {
        CausalIcModel {
            observed: (1..=n).map(|i| format!("V{i}")).collect(),
            hidden: hidden_r
                .iter()
                .enumerate()
                .map(|(k, &r)| (format!("U{}", k + 1), r))
                .collect(),
            vv: vv.to_vec(),
            uv: uv.to_vec(),
            allow_cycles,
            resolution_violations: Vec::new(),
        }
    }

    /// Parses the JSON model format and rejects structurally invalid input.
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let file: ModelFile = serde_json::from_str(text)?;
        let model = Self::from_file(file);
        let report = model.validate();
        if report.ok {
            Ok(model)
        } else {
            Err(ModelError::Invalid(report))
        }
    }

    /// Serializes back to the JSON model format. Inverse of [`parse`] for
    /// valid models.
    ///
    /// [`parse`]: CausalIcModel::parse
    pub fn serialize(&self) -> String {
        let file = ModelFile {
            allow_cycles: self.allow_cycles,
            observed: self.observed.clone(),
            hidden: self
                .hidden
                .iter()
                .map(|(name, r)| HiddenSpec { name: name.clone(), r: *r })
                .collect(),
            vv_edges: self
                .vv
                .iter()
                .map(|&(a, b, p)| VvSpec {
                    from: self.observed[a].clone(),
                    to: self.observed[b].clone(),
                    p,
                })
                .collect(),
            uv_edges: self
                .uv
                .iter()
                .map(|&(u, b, q)| UvSpec {
                    from: self.hidden[u].0.clone(),
                    to: self.observed[b].clone(),
                    q,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
    }

    fn from_file(file: ModelFile) -> Self {
        let mut violations = Vec::new();
        let obs_index: HashMap<&str, usize> = file
            .observed
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let hid_index: HashMap<&str, usize> = file
            .hidden
            .iter()
            .enumerate()
            .map(|(i, h)| (h.name.as_str(), i))
            .collect();
        let mut vv = Vec::new();
        for e in &file.vv_edges {
            match (obs_index.get(e.from.as_str()), obs_index.get(e.to.as_str())) {
                (Some(&a), Some(&b)) => vv.push((a, b, e.p)),
                _ => {
                    let (bad, rule) = if hid_index.contains_key(e.to.as_str()) {
                        (&e.to, "hidden-node-has-parent")
                    } else if hid_index.contains_key(e.from.as_str()) {
                        (&e.from, "hidden-node-as-cascade-source")
                    } else if obs_index.contains_key(e.from.as_str()) {
                        (&e.to, "unknown-node")
                    } else {
                        (&e.from, "unknown-node")
                    };
                    violations.push(Violation {
                        rule,
                        message: format!("edge {} -> {} names `{bad}`", e.from, e.to),
                        element: format!("{}->{}", e.from, e.to),
                    });
                }
            }
        }
        let mut uv = Vec::new();
        for e in &file.uv_edges {
            match (hid_index.get(e.from.as_str()), obs_index.get(e.to.as_str())) {
                (Some(&u), Some(&b)) => uv.push((u, b, e.q)),
                _ => {
                    let rule = if hid_index.contains_key(e.to.as_str()) {
                        "hidden-node-has-parent"
                    } else if obs_index.contains_key(e.from.as_str()) {
                        "observed-node-as-hidden-source"
                    } else {
                        "unknown-node"
                    };
                    violations.push(Violation {
                        rule,
                        message: format!("hidden edge {} -> {} is not hidden-to-observed", e.from, e.to),
                        element: format!("{}->{}", e.from, e.to),
                    });
                }
            }
        }
        CausalIcModel {
            observed: file.observed,
            hidden: file.hidden.into_iter().map(|h| (h.name, h.r)).collect(),
            vv,
            uv,
            allow_cycles: file.allow_cycles,
            resolution_violations: violations,
        }
    }

    /// Number of observed nodes.
    pub fn n(&self) -> usize {
        self.observed.len()
    }

    /// Number of hidden nodes.
    pub fn n_hidden(&self) -> usize {
        self.hidden.len()
    }

    /// Observed node names in stored (topological) order.
    pub fn observed_names(&self) -> &[String] {
        &self.observed
    }

    /// Hidden node names and activation probabilities.
    pub fn hidden_nodes(&self) -> &[(String, f64)] {
        &self.hidden
    }

    /// Observed-to-observed edges as (from, to, p) index triples.
    pub fn vv_edges(&self) -> &[(usize, usize, f64)] {
        &self.vv
    }

    /// Hidden-to-observed edges as (hidden, to, q) index triples.
    pub fn uv_edges(&self) -> &[(usize, usize, f64)] {
        &self.uv
    }

    /// Whether the stored-order check is waived for cyclic cascade graphs.
    pub fn allow_cycles(&self) -> bool {
        self.allow_cycles
    }

    /// Index of an observed node by name.
    pub fn observed_index(&self, name: &str) -> Option<usize> {
        self.observed.iter().position(|s| s == name)
    }

    /// Observed parents of each observed node, in edge-list order.
    pub fn observed_parents(&self) -> Vec<Vec<(usize, f64)>> {
        let mut out = vec![Vec::new(); self.n()];
        for &(a, b, p) in &self.vv {
            out[b].push((a, p));
        }
        out
    }

    /// Hidden parents of each observed node, in edge-list order.
    pub fn hidden_parents(&self) -> Vec<Vec<(usize, f64)>> {
        let mut out = vec![Vec::new(); self.n()];
        for &(u, b, q) in &self.uv {
            out[b].push((u, q));
        }
        out
    }

    /// Checks every structural invariant and reports all violations found.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = self.resolution_violations.clone();
        let mut seen: HashMap<&str, ()> = HashMap::new();
        for name in self
            .observed
            .iter()
            .chain(self.hidden.iter().map(|(n, _)| n))
        {
            if seen.insert(name, ()).is_some() {
                violations.push(Violation {
                    rule: "duplicate-node-name",
                    message: format!("node name `{name}` is used more than once"),
                    element: name.clone(),
                });
            }
        }
        for (k, (name, r)) in self.hidden.iter().enumerate() {
            if !(0.0..=1.0).contains(r) {
                violations.push(Violation {
                    rule: "probability-out-of-range",
                    message: format!("r={r} on hidden node `{name}` (index {k}) is outside [0,1]"),
                    element: name.clone(),
                });
            }
        }
        let mut seen_vv: HashMap<(usize, usize), ()> = HashMap::new();
        for &(a, b, p) in &self.vv {
            let label = format!("{}->{}", self.observed[a], self.observed[b]);
            if !(0.0..=1.0).contains(&p) {
                violations.push(Violation {
                    rule: "probability-out-of-range",
                    message: format!("p={p} on edge {label} is outside [0,1]"),
                    element: label.clone(),
                });
            }
            if a == b {
                violations.push(Violation {
                    rule: "self-loop",
                    message: format!("edge {label} is a self-loop"),
                    element: label.clone(),
                });
            } else if a > b && !self.allow_cycles {
                // With allow_cycles unset the stored order must be topological.
                violations.push(Violation {
                    rule: "cycle-detected",
                    message: format!("edge {label} goes against the stored node order"),
                    element: label.clone(),
                });
            }
            if seen_vv.insert((a, b), ()).is_some() {
                violations.push(Violation {
                    rule: "duplicate-edge",
                    message: format!("edge {label} appears more than once"),
                    element: label,
                });
            }
        }
        let mut seen_uv: HashMap<(usize, usize), ()> = HashMap::new();
        for &(u, b, q) in &self.uv {
            let label = format!("{}->{}", self.hidden[u].0, self.observed[b]);
            if !(0.0..=1.0).contains(&q) {
                violations.push(Violation {
                    rule: "probability-out-of-range",
                    message: format!("q={q} on edge {label} is outside [0,1]"),
                    element: label.clone(),
                });
            }
            if seen_uv.insert((u, b), ()).is_some() {
                violations.push(Violation {
                    rule: "duplicate-edge",
                    message: format!("edge {label} appears more than once"),
                    element: label,
                });
            }
        }
        ValidationReport { ok: violations.is_empty(), violations }
    }

    /// Returns the stored observed order after verifying it is topological.
    pub fn topological_order(&self) -> Result<Vec<String>, ModelError> {
        for &(a, b, _) in &self.vv {
            if a >= b {
                return Err(ModelError::OrderViolation(format!(
                    "edge {} -> {} does not point forward",
                    self.observed[a], self.observed[b]
                )));
            }
        }
        Ok(self.observed.clone())
    }

    /// Decides the structural class. Pure function of the graph shape; a
    /// single-node model with one private hidden parent reports Markovian
    /// even though the global-hidden shape also matches.
    pub fn classify(&self) -> ModelClass {
        let n = self.n();
        let mut hidden_out: Vec<Vec<usize>> = vec![Vec::new(); self.hidden.len()];
        for &(u, b, _) in &self.uv {
            hidden_out[u].push(b);
        }
        let mut hidden_parent_count = vec![0usize; n];
        for &(_, b, _) in &self.uv {
            hidden_parent_count[b] += 1;
        }

        let markovian = hidden_parent_count.iter().all(|&c| c <= 1)
            && hidden_out.iter().all(|t| t.len() == 1);
        if markovian {
            return ModelClass::Markovian;
        }

        if self.is_chain_shape(&hidden_out) {
            return ModelClass::SemiMarkovianChain;
        }

        let global_at = |targets: &[usize]| {
            let mut t = targets.to_vec();
            t.sort_unstable();
            t.dedup();
            t.len() == n && n > 0
        };
        if self.hidden.len() == 1 && global_at(&hidden_out[0]) {
            return ModelClass::GlobalHidden;
        }

        if self.hidden.len() == n + 1 {
            if let Some(g) = hidden_out.iter().position(|t| global_at(t)) {
                let mut private_targets: Vec<usize> = hidden_out
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != g)
                    .filter(|(_, t)| t.len() == 1)
                    .map(|(_, t)| t[0])
                    .collect();
                private_targets.sort_unstable();
                if private_targets.len() == n && private_targets == (0..n).collect::<Vec<_>>() {
                    return ModelClass::MixedGlobalMarkovian;
                }
            }
        }

        ModelClass::General
    }

    fn is_chain_shape(&self, hidden_out: &[Vec<usize>]) -> bool {
        let n = self.n();
        if n < 2 || self.hidden.len() != n - 1 || self.vv.len() != n - 1 {
            return false;
        }
        let mut path: Vec<(usize, usize)> = self.vv.iter().map(|&(a, b, _)| (a, b)).collect();
        path.sort_unstable();
        if path != (0..n - 1).map(|t| (t, t + 1)).collect::<Vec<_>>() {
            return false;
        }
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for targets in hidden_out {
            if targets.len() != 2 {
                return false;
            }
            let (lo, hi) = (targets[0].min(targets[1]), targets[0].max(targets[1]));
            if hi != lo + 1 {
                return false;
            }
            pairs.push((lo, hi));
        }
        pairs.sort_unstable();
        pairs == (0..n - 1).map(|t| (t, t + 1)).collect::<Vec<_>>()
    }
}
