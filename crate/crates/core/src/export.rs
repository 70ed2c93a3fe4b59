//! Explanation documents and the per-state coordinate sidecar.
//!
//! Documents are deterministic for fixed inputs: wall-clock timings are left
//! out and belong in separate metrics files.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::diversify::{div_s_range, DiversityConfig};
use crate::error::{Error, Result};
use crate::explain::{ExplainOutcome, QueryConfig, RunStats};
use crate::graph::{EdgeId, Graph, Subgraph};
use crate::io::LoadedGraph;
use crate::measures::VerifiedKind;
use crate::skyline::StateId;

/// Where a run came from; together with the embedded configuration this is
/// enough to repeat it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool: String,
    pub version: String,
    pub seed: Option<u64>,
    pub graph: Option<String>,
    pub model: Option<String>,
    /// Document id of each dense node id, present when the input graph used
    /// other ids.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_ids: Option<Vec<i64>>,
}

impl RunMetadata {
    pub fn new(seed: Option<u64>) -> Self {
        Self {
            tool: "skyx".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberRecord {
    pub state: StateId,
    pub edge_ids: Vec<EdgeId>,
    /// Endpoints of each edge, in document ids.
    pub edges: Vec<(i64, i64)>,
    pub nodes: Vec<i64>,
    pub kind: VerifiedKind,
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    pub ds: usize,
    pub frontier: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationDocument {
    pub metadata: RunMetadata,
    pub config: QueryConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diversity_config: Option<DiversityConfig>,
    /// Target in document ids.
    pub target: i64,
    pub measures: Vec<String>,
    pub members: Vec<MemberRecord>,
    pub dominance_power: usize,
    pub diversity: Option<f64>,
    /// Attainable DivS interval for this `k` and α.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diversity_range: Option<(f64, f64)>,
    /// Number of verified candidates.
    pub verified_states: usize,
    pub frontier_size: usize,
    pub stats: RunStats,
}

impl ExplanationDocument {
    pub fn build(
        graph: &LoadedGraph,
        cfg: &QueryConfig,
        diversity: Option<&DiversityConfig>,
        outcome: &ExplainOutcome,
        mut metadata: RunMetadata,
    ) -> Self {
        let ids = &graph.original_ids;
        if !graph.is_identity() {
            metadata.node_ids = Some(ids.clone());
        }
        let sg = &outcome.states;
        let members = outcome
            .explanation
            .members
            .iter()
            .map(|&id| {
                let s = sg.state(id);
                MemberRecord {
                    state: id,
                    edge_ids: s.edges.clone(),
                    edges: s
                        .edges
                        .iter()
                        .map(|&e| {
                            let (a, b) = graph.graph.edge(e);
                            (ids[a], ids[b])
                        })
                        .collect(),
                    nodes: graph
                        .graph
                        .nodes_of(&s.edges)
                        .into_iter()
                        .map(|v| ids[v])
                        .collect(),
                    kind: s.kind,
                    raw: s.raw.clone(),
                    normalized: s.phi.to_vec(),
                    ds: s.ds(),
                    frontier: sg.is_frontier(id),
                }
            })
            .collect();
        Self {
            metadata,
            config: cfg.clone(),
            diversity_config: diversity.copied(),
            target: ids[cfg.target],
            measures: cfg
                .spec
                .measures()
                .iter()
                .map(|m| m.token().to_string())
                .collect(),
            members,
            dominance_power: outcome.explanation.dominance_power,
            diversity: outcome.explanation.diversity,
            diversity_range: diversity.map(|d| div_s_range(cfg.k, d.alpha)),
            verified_states: sg.len(),
            frontier_size: sg.frontier().len(),
            // timings go to the metrics sidecar, never into the document
            stats: RunStats {
                elapsed: Default::default(),
                ..outcome.stats.clone()
            },
        }
    }

    pub fn to_json(&self) -> String {
        let mut text =
            serde_json::to_string_pretty(self).expect("explanation documents always serialize");
        text.push('\n');
        text
    }

    pub fn parse(text: &str, path: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::from_json(path, &e))
    }

    /// Rebuilds every member as a subgraph of `g`, which checks that it is
    /// non-empty, connected and contains the target.
    pub fn validate(&self, g: &Graph) -> Result<Vec<Subgraph>> {
        self.members
            .iter()
            .map(|m| Subgraph::new(g, m.edge_ids.clone(), self.config.target))
            .collect()
    }
}

/// One row per verified state: id, kind, membership, frontier flag and the
/// normalized coordinates at 17 significant digits.
pub fn states_csv(outcome: &ExplainOutcome, measures: &[String]) -> String {
    let sg = &outcome.states;
    let mut out = String::from("state,kind,member,frontier");
    for m in measures {
        out.push(',');
        out.push_str(m);
    }
    out.push('\n');
    for s in sg.states() {
        let kind = serde_json::to_value(s.kind).expect("kinds serialize");
        let _ = write!(
            out,
            "{},{},{},{}",
            s.id,
            kind.as_str().unwrap_or_default(),
            outcome.explanation.members.contains(&s.id),
            sg.is_frontier(s.id)
        );
        for x in s.phi.iter() {
            let _ = write!(out, ",{x:.16e}");
        }
        out.push('\n');
    }
    out
}

/// Coordinates of every row of a sidecar written by [`states_csv`].
pub fn parse_states_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| csv_error(1, 0, "missing header"))?;
    let width = header.split(',').count();
    if width < 4 {
        return Err(csv_error(1, 0, "header has no measure columns"));
    }
    lines
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != width {
                return Err(csv_error(
                    i + 1,
                    0,
                    &format!("expected {width} fields, found {}", fields.len()),
                ));
            }
            fields[4..]
                .iter()
                .enumerate()
                .map(|(j, f)| {
                    f.parse::<f64>()
                        .map_err(|e| csv_error(i + 1, 5 + j, &e.to_string()))
                })
                .collect()
        })
        .collect()
}

fn csv_error(line: usize, column: usize, message: &str) -> Error {
    Error::Parse {
        path: "states csv".into(),
        line,
        column,
        message: message.into(),
    }
}
