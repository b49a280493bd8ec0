use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use clvr_core::probe::{
    aggregate, auc_pass, auc_recall, c_task, effective_rank, fit_power_law, i_eff, node_edge_counts, parse_dsl,
    stratify, tier_scores, trim, AggregateOptions, ComplexityRecord, ComplexityWeights, PassMode, Range,
    SemanticGraph, TierCurve, TierPoint, Tiering, TrimTarget, WordInterval, TIER_COUNT,
};
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{emit, pretty};
use crate::error::CliError;
use crate::io::{load_config_or_default, read_bytes, read_checkpoint, read_config, read_text};
use crate::{Ctx, Done};

#[derive(Debug, Subcommand)]
pub enum ProbeCommand {
    /// C_task for DSL prompts or graph annotations.
    Score(ScoreArgs),
    /// Split scored prompts into ten complexity tiers.
    Stratify(StratifyArgs),
    /// Remove elements until prompts fall inside a complexity window.
    Trim(TrimArgs),
    /// Area under the tier curve.
    Auc(AucArgs),
    /// Effective rank of a spectrum, or I_eff of a checkpoint.
    Erank(ErankArgs),
    /// Power-law fit of AUC against I_eff.
    Fit(FitArgs),
}

impl ProbeCommand {
    pub fn name(&self) -> &'static str {
        match self {
            ProbeCommand::Score(_) => "score",
            ProbeCommand::Stratify(_) => "stratify",
            ProbeCommand::Trim(_) => "trim",
            ProbeCommand::Auc(_) => "auc",
            ProbeCommand::Erank(_) => "erank",
            ProbeCommand::Fit(_) => "fit",
        }
    }
}

pub fn run(c: ProbeCommand, ctx: &mut Ctx) -> Result<Done, CliError> {
    match c {
        ProbeCommand::Score(a) => score(a, ctx),
        ProbeCommand::Stratify(a) => stratify_cmd(a, ctx),
        ProbeCommand::Trim(a) => trim_cmd(a, ctx),
        ProbeCommand::Auc(a) => auc(a, ctx),
        ProbeCommand::Erank(a) => erank(a, ctx),
        ProbeCommand::Fit(a) => fit(a, ctx),
    }
}

#[derive(Debug, Args)]
struct PromptSource {
    /// One prompt per line: `id<TAB>dsl`, a bare DSL line, or a JSON
    /// object `{"id": ..., "graph": {...}}`.
    #[arg(long, conflicts_with = "dsl", required_unless_present = "dsl")]
    prompts: Option<PathBuf>,
    /// A single DSL prompt.
    #[arg(long)]
    dsl: Option<String>,
    /// Complexity weights (TOML or JSON); unspecified fields keep defaults.
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Annotation {
    id: String,
    graph: SemanticGraph,
}

fn load_prompts(src: &PromptSource, ctx: &mut Ctx) -> Result<Vec<Annotation>, CliError> {
    if let Some(dsl) = &src.dsl {
        ctx.inputs.record("dsl", dsl.as_bytes());
        return Ok(vec![Annotation { id: "prompt".into(), graph: parse_dsl(dsl)? }]);
    }
    let path = src.prompts.as_ref().expect("clap requires one source");
    let text = read_text(path, "prompts", &mut ctx.inputs)?;
    let mut out = Vec::new();
    let mut ids = BTreeSet::new();
    let mut auto = 0usize;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let at = |e: String| CliError::new("probe", format!("{}:{}: {e}", path.display(), i + 1));
        let ann = if line.starts_with('{') {
            let ann: Annotation = serde_json::from_str(line).map_err(|e| at(e.to_string()))?;
            ann.graph.validate().map_err(|e| at(e.to_string()))?;
            ann
        } else {
            let (id, dsl) = match raw.split_once('\t') {
                Some((id, dsl)) => (id.trim().to_string(), dsl),
                None => {
                    auto += 1;
                    (format!("p{:06}", auto - 1), line)
                }
            };
            Annotation { id, graph: parse_dsl(dsl).map_err(|e| at(e.to_string()))? }
        };
        if !ids.insert(ann.id.clone()) {
            return Err(at(format!("duplicate id {:?}", ann.id)));
        }
        out.push(ann);
    }
    Ok(out)
}

fn load_weights(path: Option<&Path>, ctx: &mut Ctx) -> Result<ComplexityWeights, CliError> {
    let w: ComplexityWeights = load_config_or_default(path, &mut ctx.inputs)?;
    w.validate()?;
    Ok(w)
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    source: PromptSource,
    /// CSV destination (`id,c_task,words,nodes,edges`); stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ScoreLine<'a> {
    id: &'a str,
    c_task: f64,
    words: u32,
    nodes: u64,
    edges: u64,
}

fn score(a: ScoreArgs, ctx: &mut Ctx) -> Result<Done, CliError> {
    let prompts = load_prompts(&a.source, ctx)?;
    let w = load_weights(a.source.weights.as_deref(), ctx)?;
    let lines: Vec<ScoreLine> = prompts
        .iter()
        .map(|p| {
            let counts = node_edge_counts(&p.graph);
            ScoreLine {
                id: &p.id,
                c_task: c_task(&p.graph, &w),
                words: p.graph.word_count,
                nodes: counts.nodes,
                edges: counts.edges,
            }
        })
        .collect();
    let mut wtr = csv::Writer::from_writer(Vec::new());
    for l in &lines {
        wtr.serialize(l)?;
    }
    let bytes = wtr.into_inner().map_err(|e| CliError::new("io", e.to_string()))?;
    let text = emit(a.out.as_deref(), bytes)?;
    Ok(Done { text, results: json!({ "weights": w, "prompts": lines }) })
}

#[derive(Debug, Args)]
pub struct StratifyArgs {
    /// CSV with `id,c_task,words` columns, as written by `probe score`.
    #[arg(long)]
    complexity: PathBuf,
    /// Per-tier word intervals: `intervals = [{lo, hi}, ...]` with ten entries.
    #[arg(long)]
    intervals: Option<PathBuf>,
    /// Tiering JSON destination (input to `probe auc --tiers`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Intervals {
    intervals: Vec<WordInterval>,
}

fn stratify_cmd(a: StratifyArgs, ctx: &mut Ctx) -> Result<Done, CliError> {
    let bytes = read_bytes(&a.complexity, "complexity", &mut ctx.inputs)?;
    let records: Vec<ComplexityRecord> =
        csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(&bytes[..]).deserialize().collect::<Result<_, _>>()?;
    let intervals = match &a.intervals {
        Some(p) => {
            let iv: Intervals = read_config(p, &mut ctx.inputs)?;
            let n = iv.intervals.len();
            let arr: [WordInterval; TIER_COUNT] = iv
                .intervals
                .try_into()
                .map_err(|_| CliError::new("config", format!("need {TIER_COUNT} intervals, got {n}")))?;
            Some(arr)
        }
        None => None,
    };
    let tiering = stratify(&records, intervals.as_ref())?;
    if let Some(p) = &a.out {
        crate::io::write_bytes(p, pretty(&tiering)?.as_bytes())?;
    }
    let text = tiering
        .tiers
        .iter()
        .map(|t| {
            format!(
                "tier {}\tmembers {}\tmedian_c_task {}\ttrim_candidates {}",
                t.index,
                t.members.len(),
                t.median_c_task,
                t.trim_candidates.len()
            )
        })
        .collect::<Vec<_>>()
        .join("\n");
    Ok(Done { text, results: serde_json::to_value(&tiering)? })
}

#[derive(Debug, Args)]
pub struct TrimArgs {
    #[command(flatten)]
    source: PromptSource,
    #[arg(long)]
    max_c: f64,
    #[arg(long, default_value_t = 0.0)]
    min_c: f64,
    #[arg(long)]
    min_words: Option<f64>,
    #[arg(long)]
    max_words: Option<f64>,
}

fn trim_cmd(a: TrimArgs, ctx: &mut Ctx) -> Result<Done, CliError> {
    let prompts = load_prompts(&a.source, ctx)?;
    let w = load_weights(a.source.weights.as_deref(), ctx)?;
    let target = TrimTarget {
        c_task: Range { lo: a.min_c, hi: a.max_c },
        words: Range {
            lo: a.min_words.unwrap_or(f64::NEG_INFINITY),
            hi: a.max_words.unwrap_or(f64::INFINITY),
        },
    };
    ctx.inputs.param("target", target);
    let single = a.source.dsl.is_some();
    let mut lines = Vec::new();
    let mut results = Vec::new();
    for p in &prompts {
        match trim(&p.graph, &target, &w) {
            Ok(out) => {
                lines.push(format!("{}\t{}\t{}\t{}", p.id, out.c_task_before, out.c_task_after, out.removals.len()));
                results.push(json!({ "id": p.id, "outcome": out }));
            }
            Err(e) if !single => {
                lines.push(format!("{}\tinfeasible\t{e}", p.id));
                results.push(json!({ "id": p.id, "error": e.to_string() }));
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(Done { text: lines.join("\n"), results: json!({ "target": target, "prompts": results }) })
}

#[derive(Debug, Args)]
pub struct AucArgs {
    /// CSV with ten `x,pass,recall` rows.
    #[arg(long, conflicts_with_all = ["scores", "tiers"], required_unless_present = "scores")]
    curve: Option<PathBuf>,
    /// Scores CSV (`prompt_id,seed,recall,pass`); needs --tiers.
    #[arg(long, requires = "tiers")]
    scores: Option<PathBuf>,
    /// Tiering JSON written by `probe stratify --out`.
    #[arg(long, requires = "scores")]
    tiers: Option<PathBuf>,
    /// A prompt passes if any image passes, instead of the pass fraction.
    #[arg(long)]
    any_image: bool,
    #[arg(long, default_value_t = 4)]
    images_per_prompt: usize,
    #[arg(long)]
    allow_ragged: bool,
}

fn auc(a: AucArgs, ctx: &mut Ctx) -> Result<Done, CliError> {
    let curve = match (&a.curve, &a.scores, &a.tiers) {
        (Some(path), _, _) => {
            let bytes = read_bytes(path, "curve", &mut ctx.inputs)?;
            let points: Vec<TierPoint> = csv::ReaderBuilder::new()
                .trim(csv::Trim::All)
                .from_reader(&bytes[..])
                .deserialize()
                .collect::<Result<_, _>>()?;
            TierCurve::new(points)?
        }
        (None, Some(scores), Some(tiers)) => {
            let rows = clvr_core::probe::read_scores_csv(&read_bytes(scores, "scores", &mut ctx.inputs)?[..])?;
            let tiering: Tiering = serde_json::from_slice(&read_bytes(tiers, "tiers", &mut ctx.inputs)?)?;
            let opts = AggregateOptions {
                mode: if a.any_image { PassMode::AnyImage } else { PassMode::Fraction },
                images_per_prompt: Some(a.images_per_prompt),
                allow_ragged: a.allow_ragged,
            };
            ctx.inputs.param("aggregate", (a.any_image, a.images_per_prompt, a.allow_ragged));
            let prompts = aggregate(&rows, opts)?;
            TierCurve::from_tier_scores(&tier_scores(&prompts, &tiering)?)?
        }
        _ => return Err(CliError::usage("give --curve, or --scores with --tiers")),
    };
    let (ap, ar) = (auc_pass(&curve), auc_recall(&curve));
    Ok(Done {
        text: format!("auc_pass {ap}\nauc_recall {ar}"),
        results: json!({ "auc_pass": ap, "auc_recall": ar, "points": curve.points() }),
    })
}

#[derive(Debug, Args)]
pub struct ErankArgs {
    /// Singular values, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "checkpoint", required_unless_present = "checkpoint")]
    values: Vec<f64>,
    /// Checkpoint whose 2-D tensors are analysed.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Tensor-name regex selecting the matrices.
    #[arg(long, default_value = ".")]
    filter: String,
}

fn erank(a: ErankArgs, ctx: &mut Ctx) -> Result<Done, CliError> {
    match &a.checkpoint {
        None => {
            ctx.inputs.param("values", &a.values);
            let e = effective_rank(&a.values)?;
            Ok(Done { text: e.to_string(), results: json!({ "values": a.values, "effective_rank": e }) })
        }
        Some(path) => {
            let filter = Regex::new(&a.filter).map_err(|e| CliError::usage(format!("--filter: {e}")))?;
            ctx.inputs.param("filter", &a.filter);
            let map = read_checkpoint(path, "checkpoint", &mut ctx.inputs)?;
            let report = i_eff(&map, &filter)?;
            let mut text = format!("i_eff {}", report.i_eff);
            for m in &report.matrices {
                text.push_str(&format!("\n{}\t{:?}\t{}", m.name, m.shape, m.effective_rank));
            }
            Ok(Done { text, results: serde_json::to_value(&report)? })
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV with a header row. A `single_step` column, when present, drops
    /// rows marked false unless --all is given.
    #[arg(long)]
    points: PathBuf,
    #[arg(long, default_value = "i_eff")]
    x_col: String,
    #[arg(long, default_value = "auc_pass")]
    y_col: String,
    #[arg(long)]
    all: bool,
}

fn fit(a: FitArgs, ctx: &mut Ctx) -> Result<Done, CliError> {
    let bytes = read_bytes(&a.points, "points", &mut ctx.inputs)?;
    ctx.inputs.param("columns", (&a.x_col, &a.y_col, a.all));
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(&bytes[..]);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::new("probe", format!("{}: no column {name:?}", a.points.display())))
    };
    let (xi, yi) = (col(&a.x_col)?, col(&a.y_col)?);
    let step_col = headers.iter().position(|h| h == "single_step");
    let num = |rec: &csv::StringRecord, i: usize, line: u64| {
        rec[i].parse::<f64>().map_err(|_| CliError::new("probe", format!("line {line}: {:?} is not a number", &rec[i])))
    };
    let mut points = Vec::new();
    let mut dropped = 0usize;
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if let (Some(i), false) = (step_col, a.all) {
            match rec[i].to_ascii_lowercase().as_str() {
                "true" | "1" | "yes" => {}
                "false" | "0" | "no" => {
                    dropped += 1;
                    continue;
                }
                other => return Err(CliError::new("probe", format!("line {line}: single_step {other:?} is not a boolean"))),
            }
        }
        points.push((num(&rec, xi, line)?, num(&rec, yi, line)?));
    }
    let f = fit_power_law(&points)?;
    Ok(Done {
        text: format!(
            "slope {:.5}\nintercept {:.5}\nr_squared {:.5}\nspearman_rho {:.5}\npoints {}",
            f.slope,
            f.intercept,
            f.r_squared,
            f.spearman_rho,
            points.len()
        ),
        results: json!({ "fit": f, "points": points, "dropped": dropped }),
    })
}
