//! JSON model files.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::CliError;
use crate::interconnect::{DirectedNetwork, SecondOrderMech, UndirectedNetwork};
use crate::linalg::{Mat, Tolerances};
use crate::linear::{Component, LinearIohd, StateSpace};

pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    StateSpace,
    LinearIohd,
    SecondOrder,
    Interconnection,
    Network,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::StateSpace => "state_space",
            Kind::LinearIohd => "linear_iohd",
            Kind::SecondOrder => "second_order",
            Kind::Interconnection => "interconnection",
            Kind::Network => "network",
        }
    }
}

/// Dense matrix with explicit dimensions; `data` is a list of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixData {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Vec<f64>>,
}

impl MatrixData {
    pub fn from_mat(m: &Mat) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.row_iter().map(|r| r.iter().copied().collect()).collect(),
        }
    }

    pub fn to_mat(&self, name: &str) -> Result<Mat, CliError> {
        if self.data.len() != self.rows {
            return Err(CliError::Input(format!(
                "matrix `{name}` declares {} rows but lists {}",
                self.rows,
                self.data.len()
            )));
        }
        if let Some((i, row)) = self
            .data
            .iter()
            .enumerate()
            .find(|(_, r)| r.len() != self.cols)
        {
            return Err(CliError::Input(format!(
                "matrix `{name}` declares {} columns but row {i} has {}",
                self.cols,
                row.len()
            )));
        }
        Ok(Mat::from_fn(self.rows, self.cols, |i, j| self.data[i][j]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Blocks {
    pub n1: usize,
    pub n2: usize,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Graph {
    Undirected {
        adjacency: MatrixData,
        port_dim: usize,
    },
    /// Edges are `[tail, head]` vertex index pairs.
    Directed {
        vertices: usize,
        edges: Vec<[usize; 2]>,
        port_dim: usize,
    },
}

pub enum Network {
    Undirected(UndirectedNetwork),
    Directed(DirectedNetwork),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub schema_version: String,
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub matrices: BTreeMap<String, MatrixData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Blocks>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<Graph>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, Value>,
}

/// A file read from disk together with its content hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

pub fn read_bytes(path: &Path) -> Result<(Vec<u8>, InputRecord), CliError> {
    let bytes =
        std::fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let record = InputRecord {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    };
    Ok((bytes, record))
}

pub fn read_model(path: &Path) -> Result<(ModelFile, InputRecord), CliError> {
    let (bytes, record) = read_bytes(path)?;
    let file: ModelFile = serde_json::from_slice(&bytes).map_err(|e| {
        CliError::Input(format!(
            "{}:{}:{}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(CliError::Input(format!(
            "{}: unsupported schema_version `{}` (expected `{SCHEMA_VERSION}`)",
            path.display(),
            file.schema_version
        )));
    }
    Ok((file, record))
}

impl ModelFile {
    fn matrix(&self, name: &str) -> Result<Mat, CliError> {
        self.matrices
            .get(name)
            .ok_or_else(|| {
                CliError::Input(format!(
                    "{} model is missing matrix `{name}`",
                    self.kind.as_str()
                ))
            })?
            .to_mat(name)
    }

    fn optional(&self, name: &str) -> Result<Option<Mat>, CliError> {
        self.matrices.get(name).map(|m| m.to_mat(name)).transpose()
    }

    fn only(&self, allowed: &[&str]) -> Result<(), CliError> {
        match self
            .matrices
            .keys()
            .find(|k| !allowed.contains(&k.as_str()))
        {
            Some(extra) => Err(CliError::Input(format!(
                "{} model has unexpected matrix `{extra}` (allowed: {})",
                self.kind.as_str(),
                allowed.join(", ")
            ))),
            None => Ok(()),
        }
    }

    fn name(&self) -> Option<&str> {
        self.metadata.get("name").and_then(Value::as_str)
    }

    pub fn second_order(&self) -> Result<SecondOrderMech, CliError> {
        self.only(&["M", "D", "K", "L"])?;
        let mass = self.matrix("M")?;
        let stiffness = self.matrix("K")?;
        let damping = match self.optional("D")? {
            Some(d) => d,
            None => Mat::zeros(mass.nrows(), mass.ncols()),
        };
        Ok(SecondOrderMech::new(
            mass,
            damping,
            stiffness,
            self.matrix("L")?,
        )?)
    }

    /// Linear IOHD model for `linear_iohd` and `second_order` files.
    pub fn linear_iohd(&self, tol: &Tolerances) -> Result<LinearIohd, CliError> {
        let model = match self.kind {
            Kind::LinearIohd => {
                self.only(&["J", "R", "Q", "C", "D"])?;
                let c = self.matrix("C")?;
                let d = match self.optional("D")? {
                    Some(d) => d,
                    None => Mat::zeros(c.nrows(), c.nrows()),
                };
                let model = LinearIohd::new(
                    self.matrix("J")?,
                    self.matrix("R")?,
                    self.matrix("Q")?,
                    c,
                    d,
                )?;
                match self.metadata.get("components") {
                    Some(v) => model.with_components(parse_components(v)?),
                    None => model,
                }
            }
            Kind::SecondOrder => self.second_order()?.to_iohd(tol)?,
            other => {
                return Err(CliError::Input(format!(
                    "expected a linear_iohd or second_order model, got {}",
                    other.as_str()
                )))
            }
        };
        Ok(match self.name() {
            Some(name) if model.components().is_empty() => model.with_name(name),
            _ => model,
        })
    }

    /// State-space realization for `state_space`, `interconnection` and linear model files.
    pub fn state_space(&self, tol: &Tolerances) -> Result<StateSpace, CliError> {
        match self.kind {
            Kind::StateSpace | Kind::Interconnection => {
                let allowed: &[&str] = if self.kind == Kind::StateSpace {
                    &["A", "B", "C", "D"]
                } else {
                    &["A", "B", "C", "P"]
                };
                self.only(allowed)?;
                let c = self.matrix("C")?;
                let d = match self.optional("D")? {
                    Some(d) => d,
                    None => Mat::zeros(c.nrows(), c.nrows()),
                };
                Ok(StateSpace::new(self.matrix("A")?, self.matrix("B")?, c, d)?)
            }
            Kind::LinearIohd | Kind::SecondOrder => Ok(self.linear_iohd(tol)?.to_state_space()),
            Kind::Network => Err(CliError::Input(
                "graph files describe no dynamics; use `network`".into(),
            )),
        }
    }

    pub fn blocks(&self) -> Result<Blocks, CliError> {
        self.blocks.ok_or_else(|| {
            CliError::Input("interconnection model needs `blocks` with n1, n2 and m".into())
        })
    }

    pub fn certificate(&self) -> Result<Option<Mat>, CliError> {
        self.optional("P")
    }

    pub fn network(&self, tol: &Tolerances) -> Result<Network, CliError> {
        if self.kind != Kind::Network {
            return Err(CliError::Input(format!(
                "expected a network file, got {}",
                self.kind.as_str()
            )));
        }
        match &self.graph {
            Some(Graph::Undirected {
                adjacency,
                port_dim,
            }) => Ok(Network::Undirected(UndirectedNetwork::new(
                adjacency.to_mat("adjacency")?,
                *port_dim,
                tol,
            )?)),
            Some(Graph::Directed {
                vertices,
                edges,
                port_dim,
            }) => {
                let pairs: Vec<(usize, usize)> = edges.iter().map(|&[t, h]| (t, h)).collect();
                Ok(Network::Directed(DirectedNetwork::from_edges(
                    *vertices, &pairs, *port_dim,
                )?))
            }
            None => Err(CliError::Input("network file needs a `graph` entry".into())),
        }
    }

    pub fn from_linear(model: &LinearIohd) -> Self {
        let mut matrices = BTreeMap::new();
        for (name, m) in [
            ("J", model.j()),
            ("R", model.r()),
            ("Q", model.q()),
            ("C", model.c()),
            ("D", model.d()),
        ] {
            matrices.insert(name.to_string(), MatrixData::from_mat(m));
        }
        let mut metadata = BTreeMap::new();
        if !model.components().is_empty() {
            let comps: Vec<Value> = model
                .components()
                .iter()
                .map(|c| {
                    serde_json::json!({
                        "name": c.name,
                        "states": [c.states.start, c.states.end],
                        "ports": [c.ports.start, c.ports.end],
                    })
                })
                .collect();
            metadata.insert("components".to_string(), Value::Array(comps));
        }
        Self {
            schema_version: SCHEMA_VERSION.into(),
            kind: Kind::LinearIohd,
            matrices,
            blocks: None,
            graph: None,
            metadata,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model files serialize");
        s.push('\n');
        s
    }
}

fn parse_components(v: &Value) -> Result<Vec<Component>, CliError> {
    #[derive(Deserialize)]
    struct Raw {
        name: String,
        states: [usize; 2],
        ports: [usize; 2],
    }
    let raw: Vec<Raw> = serde_json::from_value(v.clone())
        .map_err(|e| CliError::Input(format!("metadata.components: {e}")))?;
    Ok(raw
        .into_iter()
        .map(|r| Component {
            name: r.name,
            states: r.states[0]..r.states[1],
            ports: r.ports[0]..r.ports[1],
        })
        .collect())
}
