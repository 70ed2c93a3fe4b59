use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use skyx_core::diversify::{div_s, dsx, subgraph_embedding, DiversityConfig};
use skyx_core::evalkit::{
    brute_force_optimal, brute_force_space, ds_objective, gen_ba_shapes, gen_tree_cycles, nigd,
    nipf, nms, BaShapesConfig, TreeCyclesConfig,
};
use skyx_core::explain::{explain as run_explain, ExplainOutcome, QueryConfig, Strategy};
use skyx_core::export::{states_csv, ExplanationDocument, RunMetadata};
use skyx_core::io::{self, LoadedGraph};
use skyx_core::measures::{ConcisenessReference, Measure, MeasureSpec};
use skyx_core::parallel::{para_sx, BatchOptions};
use skyx_core::train::{accuracy, train_gcn, TrainConfig};
use skyx_core::{neighborhood, Error, GnnModel};

use crate::metrics::Metrics;
use crate::{
    BatchArgs, ConcReference, EvalArgs, ExplainArgs, GenArgs, GraphKind, Indicator, Objective,
    OracleArgs, TrainArgs,
};

/// Failures split by exit code: bad invocations (1) and bad data (2).
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        match err {
            Error::InvalidConfig(msg) => CliError::Usage(msg),
            other => CliError::Data(other),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage: {msg}"),
            CliError::Data(err) => write!(f, "{err}"),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn load_inputs(
    graph: &Path,
    model: &Path,
    metrics: &mut Metrics,
) -> CliResult<(LoadedGraph, GnnModel)> {
    let loaded = metrics.time("load", "graph_seconds", || io::read_graph(graph))?;
    let model = metrics.time("load", "model_seconds", || io::read_model(model))?;
    Ok((loaded, model))
}

fn resolve(loaded: &LoadedGraph, node: i64) -> CliResult<usize> {
    loaded.dense_id(node).ok_or_else(|| {
        CliError::Data(Error::InvalidGraph(format!(
            "node id {node} is not in the graph"
        )))
    })
}

fn metadata(seed: u64, graph: &Path, model: &Path) -> RunMetadata {
    RunMetadata {
        graph: Some(graph.display().to_string()),
        model: Some(model.display().to_string()),
        ..RunMetadata::new(Some(seed))
    }
}

fn diversity(enabled: bool, alpha: f64) -> CliResult<Option<DiversityConfig>> {
    if !enabled {
        return Ok(None);
    }
    let div = DiversityConfig { alpha };
    div.validate()?;
    Ok(Some(div))
}

fn write_outcome(
    loaded: &LoadedGraph,
    cfg: &QueryConfig,
    div: Option<&DiversityConfig>,
    outcome: &ExplainOutcome,
    meta: RunMetadata,
    json: &Path,
    csv: &Path,
) -> CliResult {
    let doc = ExplanationDocument::build(loaded, cfg, div, outcome, meta);
    io::write_text(json, &doc.to_json())?;
    io::write_text(csv, &states_csv(outcome, &doc.measures))?;
    Ok(())
}

pub fn explain(args: &ExplainArgs, metrics: &mut Metrics) -> CliResult {
    let (loaded, model) = load_inputs(&args.graph, &args.model, metrics)?;
    let mut cfg = QueryConfig::new(resolve(&loaded, args.node)?);
    cfg.k = args.k;
    cfg.epsilon = args.epsilon;
    cfg.spec = MeasureSpec::parse(&args.measures)?;
    cfg.strategy = args.strategy.parse::<Strategy>()?;
    if let Some(n) = args.max_candidates {
        cfg.max_candidates = n;
    }
    cfg.prioritize = !args.no_prioritize;
    cfg.monotone = args
        .prune
        .iter()
        .map(|t| t.parse::<Measure>())
        .collect::<Result<_, _>>()?;
    cfg.conc_reference = match args.conc_reference {
        ConcReference::Neighborhood => ConcisenessReference::Neighborhood,
        ConcReference::Graph => ConcisenessReference::Graph,
    };
    cfg.validate()?;
    let div = diversity(args.diversify, args.alpha)?;
    if div.is_some() && cfg.strategy != Strategy::OnionPeel {
        return Err(CliError::Usage(
            "--diversify runs by onion peeling; drop --strategy insert".into(),
        ));
    }
    let outcome = metrics.time("explain", "seconds", || match &div {
        Some(d) => dsx(&loaded.graph, &model, &cfg, d),
        None => run_explain(&loaded.graph, &model, &cfg),
    })?;
    log::info!(
        "{} verified states, {} members, DS {}",
        outcome.states.len(),
        outcome.explanation.members.len(),
        outcome.explanation.dominance_power
    );
    metrics.record("explain", "verified_states", outcome.states.len());
    metrics.record("explain", "verifier_calls", outcome.stats.verifier_calls);
    let csv = args
        .csv
        .clone()
        .unwrap_or_else(|| args.out.with_extension("csv"));
    let meta = metadata(args.seed, &args.graph, &args.model);
    write_outcome(&loaded, &cfg, div.as_ref(), &outcome, meta, &args.out, &csv)?;
    if let Some(dot) = &args.dot {
        io::write_text(dot, &outcome.states.to_dot())?;
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct QueryEntry {
    node: i64,
    k: Option<usize>,
    epsilon: Option<f64>,
    measures: Option<String>,
    strategy: Option<Strategy>,
    max_candidates: Option<usize>,
}

#[derive(Debug, Serialize)]
struct BatchSummaryEntry {
    index: usize,
    node: i64,
    output: Option<String>,
    error: Option<String>,
}

pub fn batch(args: &BatchArgs, metrics: &mut Metrics) -> CliResult {
    let (loaded, model) = load_inputs(&args.graph, &args.model, metrics)?;
    let path = args.queries.display().to_string();
    let text = std::fs::read_to_string(&args.queries).map_err(|e| {
        CliError::Data(Error::Io {
            path: args.queries.clone(),
            source: e,
        })
    })?;
    let entries: Vec<QueryEntry> = serde_json::from_str(&text).map_err(|e| {
        CliError::Data(Error::Parse {
            path: path.clone(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    })?;
    let mut queries = Vec::with_capacity(entries.len());
    for entry in &entries {
        let mut cfg = QueryConfig::new(resolve(&loaded, entry.node)?);
        cfg.k = entry.k.unwrap_or(cfg.k);
        cfg.epsilon = entry.epsilon.unwrap_or(cfg.epsilon);
        if let Some(m) = &entry.measures {
            cfg.spec = MeasureSpec::parse(m)?;
        }
        cfg.strategy = entry.strategy.unwrap_or(cfg.strategy);
        cfg.max_candidates = entry.max_candidates.unwrap_or(cfg.max_candidates);
        cfg.validate()?;
        queries.push(cfg);
    }
    let opts = BatchOptions {
        threads: args.threads,
        share: !args.no_share,
        cluster: !args.no_cluster,
        seed: args.seed,
        diversify: diversity(args.diversify, args.alpha)?,
        ..BatchOptions::default()
    };
    let result = para_sx(&loaded.graph, &model, &queries, &opts)?;
    metrics.seconds("batch", "seconds", result.elapsed);
    for (t, report) in result.threads.iter().enumerate() {
        let item = format!("thread{t}");
        metrics.seconds(item.clone(), "seconds", report.elapsed);
        metrics.record(item.clone(), "queries", report.queries.len());
        metrics.record(
            item.clone(),
            "estimator_computations",
            report.estimator_computations,
        );
        metrics.record(item, "estimator_reuses", report.estimator_reuses);
    }
    let mut summary = Vec::with_capacity(queries.len());
    let mut failures = 0;
    for (i, (cfg, outcome)) in queries.iter().zip(&result.results).enumerate() {
        let mut entry = BatchSummaryEntry {
            index: i,
            node: entries[i].node,
            output: None,
            error: None,
        };
        match outcome {
            Ok(outcome) => {
                let json = args.out.join(format!("query_{i:04}.json"));
                let meta = metadata(args.seed, &args.graph, &args.model);
                write_outcome(
                    &loaded,
                    cfg,
                    opts.diversify.as_ref(),
                    outcome,
                    meta,
                    &json,
                    &json.with_extension("csv"),
                )?;
                entry.output = Some(json.file_name().unwrap().to_string_lossy().into_owned());
            }
            Err(err) => {
                log::error!("query {i} (node {}): {err}", entries[i].node);
                failures += 1;
                entry.error = Some(err.to_string());
            }
        }
        summary.push(entry);
    }
    let summary = serde_json::json!({
        "metadata": metadata(args.seed, &args.graph, &args.model),
        "threads": args.threads,
        "share": opts.share,
        "cluster": opts.cluster,
        "queries": summary,
    });
    io::write_text(
        args.out.join("summary.json"),
        &(serde_json::to_string_pretty(&summary).unwrap() + "\n"),
    )?;
    if failures > 0 {
        return Err(CliError::Data(Error::InvalidConfig(format!(
            "{failures} of {} queries failed",
            queries.len()
        ))));
    }
    Ok(())
}

pub fn gen(args: &GenArgs, metrics: &mut Metrics) -> CliResult {
    let g = metrics.time("gen", "seconds", || match args.kind {
        GraphKind::TreeCycles => {
            let d = TreeCyclesConfig::default();
            gen_tree_cycles(&TreeCyclesConfig {
                height: args.height.unwrap_or(d.height),
                motifs: args.motifs.unwrap_or(d.motifs),
                target_edges: args.target_edges,
                seed: args.seed,
            })
        }
        GraphKind::BaShapes => {
            let d = BaShapesConfig::default();
            gen_ba_shapes(&BaShapesConfig {
                base_nodes: args.base_nodes.unwrap_or(d.base_nodes),
                motifs: args.motifs.unwrap_or(d.motifs),
                attach: args.attach.unwrap_or(d.attach),
                seed: args.seed,
            })
        }
    })?;
    metrics.record("gen", "nodes", g.node_count());
    metrics.record("gen", "edges", g.edge_count());
    io::write_graph(&args.out, &g, None)?;
    Ok(())
}

pub fn train(args: &TrainArgs, metrics: &mut Metrics) -> CliResult {
    let loaded = io::read_graph(&args.graph)?;
    let g = &loaded.graph;
    let mask: Vec<bool> = g.labels().iter().map(Option::is_some).collect();
    let cfg = TrainConfig {
        hidden: args.hidden.clone(),
        epochs: args.epochs,
        learning_rate: args.lr,
        weight_decay: args.weight_decay,
        seed: args.seed,
    };
    let model = metrics.time("train", "seconds", || train_gcn(g, &mask, &cfg))?;
    let acc = accuracy(&model, g, &mask)?;
    metrics.record("train", "accuracy", acc);
    println!("training accuracy {acc:.4}");
    io::write_model(&args.out, &model)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct OracleMember {
    edge_ids: Vec<usize>,
    normalized: Vec<f64>,
}

pub fn oracle(args: &OracleArgs, metrics: &mut Metrics) -> CliResult {
    let (loaded, model) = load_inputs(&args.graph, &args.model, metrics)?;
    let g = &loaded.graph;
    let v = resolve(&loaded, args.node)?;
    let spec = MeasureSpec::parse(&args.measures)?;
    let space = metrics.time("oracle", "space_seconds", || {
        brute_force_space(g, &model, v, &spec, args.guard)
    })?;
    let points: Vec<Vec<f64>> = space.iter().map(|(_, a)| a.phi.to_vec()).collect();
    let (best, value) = match args.objective {
        Objective::Ds => brute_force_optimal(&points, args.k, ds_objective(&points, args.epsilon))?,
        Objective::Divs => {
            DiversityConfig { alpha: args.alpha }.validate()?;
            let universe = neighborhood(g, v, model.num_layers())?.nodes.len();
            let nodes: Vec<Vec<usize>> = space.iter().map(|(e, _)| g.nodes_of(e)).collect();
            let embeddings = space
                .iter()
                .map(|(e, _)| subgraph_embedding(&model, g, e))
                .collect::<Result<Vec<_>, _>>()?;
            brute_force_optimal(&points, args.k, |set: &[usize]| {
                let n: Vec<&[usize]> = set.iter().map(|&i| nodes[i].as_slice()).collect();
                let e: Vec<&[f64]> = set.iter().map(|&i| embeddings[i].as_slice()).collect();
                div_s(&n, &e, universe, args.alpha)
            })?
        }
    };
    let doc = serde_json::json!({
        "target": args.node,
        "k": args.k,
        "epsilon": args.epsilon,
        "measures": spec.measures().iter().map(|m| m.token()).collect::<Vec<_>>(),
        "objective": match args.objective { Objective::Ds => "ds", Objective::Divs => "divs" },
        "space_size": space.len(),
        "value": value,
        "members": best
            .iter()
            .map(|&i| OracleMember { edge_ids: space[i].0.clone(), normalized: points[i].clone() })
            .collect::<Vec<_>>(),
    });
    let text = serde_json::to_string_pretty(&doc).unwrap() + "\n";
    match &args.out {
        Some(path) => io::write_text(path, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

pub fn eval(args: &EvalArgs, metrics: &mut Metrics) -> CliResult {
    if args.k == 0 {
        return Err(CliError::Usage("--k must be at least 1".into()));
    }
    let mut docs: Vec<(PathBuf, ExplanationDocument)> = Vec::new();
    for path in &args.explanations {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Data(Error::Io {
                path: path.clone(),
                source: e,
            })
        })?;
        docs.push((
            path.clone(),
            ExplanationDocument::parse(&text, &path.display().to_string())?,
        ));
    }
    let measures = docs[0].1.measures.clone();
    if let Some((path, _)) = docs.iter().find(|(_, d)| d.measures != measures) {
        return Err(CliError::Data(Error::InvalidConfig(format!(
            "{} uses different measures than {}",
            path.display(),
            docs[0].0.display()
        ))));
    }
    let mut universes: BTreeMap<i64, Vec<Vec<f64>>> = BTreeMap::new();
    for (_, d) in &docs {
        universes
            .entry(d.target)
            .or_default()
            .extend(d.members.iter().map(|m| m.normalized.clone()));
    }
    let mut out = String::from("file,target");
    for qi in &args.qi {
        match qi {
            Indicator::Ipf => out.push_str(",ipf"),
            Indicator::Igd => out.push_str(",igd"),
            Indicator::Ms => measures.iter().for_each(|m| {
                let _ = write!(out, ",ms_{m}");
            }),
        }
    }
    out.push('\n');
    let fmt = |r: Result<f64, Error>| r.map_or_else(|_| String::new(), |x| format!("{x:.16e}"));
    for (path, d) in &docs {
        let members: Vec<Vec<f64>> = d.members.iter().map(|m| m.normalized.clone()).collect();
        if members.is_empty() {
            log::warn!(
                "{} has an empty explanation; its indicators are left blank",
                path.display()
            );
        }
        let universe = &universes[&d.target];
        let _ = write!(out, "{},{}", path.display(), d.target);
        for qi in &args.qi {
            match qi {
                Indicator::Ipf => {
                    let _ = write!(out, ",{}", fmt(nipf(&members)));
                }
                Indicator::Igd => {
                    let _ = write!(out, ",{}", fmt(nigd(&members, universe, args.k)));
                }
                Indicator::Ms => match nms(&members, universe) {
                    Ok(values) => values.iter().for_each(|x| {
                        let _ = write!(out, ",{x:.16e}");
                    }),
                    Err(_) => out.push_str(&",".repeat(measures.len())),
                },
            }
        }
        out.push('\n');
    }
    metrics.record("eval", "documents", docs.len());
    io::write_text(&args.out, &out)?;
    Ok(())
}
