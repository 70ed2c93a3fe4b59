//! JSON readers and writers for graphs and models.
//!
//! Graph documents may use arbitrary integer node ids; they are remapped to
//! dense ids in order of appearance, and the original ids travel alongside
//! the graph so outputs can report them.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{Activation, GnnModel, Matrix};
use crate::graph::{Graph, NodeId};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    id: i64,
    features: Vec<f64>,
    #[serde(default)]
    label: Option<usize>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    gt: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDocument {
    nodes: Vec<NodeRecord>,
    edges: Vec<(i64, i64)>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    #[serde(rename = "L")]
    layer_count: usize,
    activation: Activation,
    layers: Vec<Matrix>,
}

/// A graph together with the ids its source document used.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedGraph {
    pub graph: Graph,
    /// `original_ids[v]` is the document id of dense node `v`.
    pub original_ids: Vec<i64>,
}

impl LoadedGraph {
    /// Wraps a graph whose ids are already dense.
    pub fn dense(graph: Graph) -> Self {
        let original_ids = (0..graph.node_count() as i64).collect();
        Self {
            graph,
            original_ids,
        }
    }

    pub fn dense_id(&self, original: i64) -> Option<NodeId> {
        self.original_ids.iter().position(|&id| id == original)
    }

    /// Whether document ids coincide with dense ids.
    pub fn is_identity(&self) -> bool {
        self.original_ids
            .iter()
            .enumerate()
            .all(|(i, &id)| id == i as i64)
    }
}

/// Parses a graph document; `path` is only used in diagnostics.
pub fn parse_graph(text: &str, path: &str) -> Result<LoadedGraph> {
    let doc: GraphDocument = serde_json::from_str(text).map_err(|e| Error::from_json(path, &e))?;
    let mut dense: HashMap<i64, NodeId> = HashMap::with_capacity(doc.nodes.len());
    for (i, node) in doc.nodes.iter().enumerate() {
        if dense.insert(node.id, i).is_some() {
            return Err(Error::InvalidGraph(format!(
                "{path}: node record {i} repeats id {}",
                node.id
            )));
        }
    }
    let mut edges = Vec::with_capacity(doc.edges.len());
    for (i, &(a, b)) in doc.edges.iter().enumerate() {
        let lookup = |id: i64| {
            dense.get(&id).copied().ok_or_else(|| {
                Error::InvalidGraph(format!(
                    "{path}: edge record {i} names unknown node id {id}"
                ))
            })
        };
        edges.push((lookup(a)?, lookup(b)?));
    }
    let original_ids = doc.nodes.iter().map(|n| n.id).collect();
    let labels = doc.nodes.iter().map(|n| n.label).collect();
    let truth: Vec<NodeId> = (0..doc.nodes.len()).filter(|&i| doc.nodes[i].gt).collect();
    let features = doc.nodes.into_iter().map(|n| n.features).collect();
    let graph = Graph::new(dense.len(), edges, features)?
        .with_labels(labels)?
        .with_ground_truth(truth)?;
    Ok(LoadedGraph {
        graph,
        original_ids,
    })
}

pub fn read_graph(path: impl AsRef<Path>) -> Result<LoadedGraph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_graph(&text, &path.display().to_string())
}

/// Serializes a graph; ids are written as the original ids when given.
pub fn graph_to_json(g: &Graph, original_ids: Option<&[i64]>) -> Result<String> {
    let id = |v: NodeId| original_ids.map_or(v as i64, |ids| ids[v]);
    if let Some(ids) = original_ids {
        if ids.len() != g.node_count() {
            return Err(Error::DimensionMismatch {
                expected: g.node_count(),
                actual: ids.len(),
                context: "original node ids",
            });
        }
    }
    let doc = GraphDocument {
        nodes: (0..g.node_count())
            .map(|v| NodeRecord {
                id: id(v),
                features: g.features(v).to_vec(),
                label: g.label(v),
                gt: g.is_ground_truth(v),
            })
            .collect(),
        edges: g.edges().iter().map(|&(a, b)| (id(a), id(b))).collect(),
    };
    Ok(serde_json::to_string(&doc).expect("graph documents always serialize"))
}

pub fn write_graph(path: impl AsRef<Path>, g: &Graph, original_ids: Option<&[i64]>) -> Result<()> {
    write_text(path, &graph_to_json(g, original_ids)?)
}

pub fn parse_model(text: &str, path: &str) -> Result<GnnModel> {
    let doc: ModelDocument = serde_json::from_str(text).map_err(|e| Error::from_json(path, &e))?;
    if doc.layer_count != doc.layers.len() {
        return Err(Error::InvalidModel(format!(
            "{path}: L = {} but {} layers are listed",
            doc.layer_count,
            doc.layers.len()
        )));
    }
    GnnModel::new(doc.layers, doc.activation)
}

pub fn read_model(path: impl AsRef<Path>) -> Result<GnnModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text, &path.display().to_string())
}

pub fn model_to_json(model: &GnnModel) -> String {
    let doc = ModelDocument {
        layer_count: model.num_layers(),
        activation: model.activation(),
        layers: model.layers().to_vec(),
    };
    serde_json::to_string(&doc).expect("model documents always serialize")
}

pub fn write_model(path: impl AsRef<Path>, model: &GnnModel) -> Result<()> {
    write_text(path, &model_to_json(model))
}

/// Writes `text`, creating parent directories as needed.
pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
