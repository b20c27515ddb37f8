//! Batch frontend over `drg-core`: every subcommand reads whole files,
//! processes items in parallel and writes results in input order.

use std::fmt;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use drg_core::algebra::read_am_trees;
use drg_core::alignment::{read_alignments, write_alignments};
use drg_core::coref::postprocess_coref;
use drg_core::decompose::{
    decompose_instance, DecomposabilityReport, EdgeAttachmentPolicy, MemberMode, Preprocessing,
    DEFAULT_BUDGET,
};
use drg_core::gensuite::{generate, GenParams};
use drg_core::penman::{parse_penman_at, split_blocks, Writer};
use drg_core::registry::{
    resolve_with_fallback, scope_resolver, simplifier, ResolveInput, WithCoref,
};
use drg_core::scope::{project, read_scope_file, write_scope_file};
use drg_core::smatch::{score_item, CorpusReport, ScoreOptions, DEFAULT_RESTARTS};
use drg_core::{is_well_formed, validate, Alignment, Drg, Mode, Variant};

/// Exit status for bad flags or argument combinations.
pub const EXIT_USAGE: i32 = 1;
/// Exit status for unreadable or invalid data.
pub const EXIT_DATA: i32 = 2;

/// A problem with how the tool was invoked rather than with the data.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Maps an error from [`run`] to the process exit status.
pub fn exit_code(e: &anyhow::Error) -> i32 {
    if e.is::<UsageError>() {
        EXIT_USAGE
    } else {
        EXIT_DATA
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "drgtool",
    version,
    about = "Corpus tools for discourse representation graphs"
)]
pub struct Cli {
    /// Seed for every random choice (SMATCH restarts, generators).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rewrite Penman files between the lenient and strict layouts.
    Convert(ConvertArgs),
    /// Remove redundant or all scope edges.
    Simplify(SimplifyArgs),
    /// Derive scope dependency graphs from graphs and alignments.
    ProjectScope(ProjectArgs),
    /// Restore full scope in simplified graphs.
    Resolve(ResolveArgs),
    /// Report how many graphs decompose into AM dependency trees.
    Stats(StatsArgs),
    /// SMATCH scores of predictions against gold graphs.
    Score(ScoreArgs),
    /// Write random graphs with alignments.
    Gen(GenArgs),
    /// Evaluate AM dependency trees to graphs.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Layout {
    Lenient,
    Strict,
}

impl From<Layout> for Variant {
    fn from(l: Layout) -> Self {
        match l {
            Layout::Lenient => Variant::Lenient,
            Layout::Strict => Variant::Strict,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimplifyMode {
    Cpt,
    Scpl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StatsMode {
    Noprep,
    Cpt,
    Scpl,
}

impl From<StatsMode> for Preprocessing {
    fn from(m: StatsMode) -> Self {
        match m {
            StatsMode::Noprep => Preprocessing::NoPrep,
            StatsMode::Cpt => Preprocessing::Cpt,
            StatsMode::Scpl => Preprocessing::Scpl,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ResolverName {
    Rule,
    Dep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MemberArg {
    App,
    Mod,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Layout expected in the input; the reader accepts both, this only
    /// documents the intent.
    #[arg(long, value_enum, default_value = "lenient")]
    pub from: Layout,
    #[arg(long, value_enum, default_value = "strict")]
    pub to: Layout,
    /// Input Penman file, `-` for stdin.
    pub input: PathBuf,
    /// Output file, `-` for stdout.
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimplifyArgs {
    #[arg(long, value_enum)]
    pub mode: SimplifyMode,
    /// Fold coreference edges first.
    #[arg(long)]
    pub coref: bool,
    pub input: PathBuf,
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    pub graphs: PathBuf,
    /// Alignment file, one JSON object per graph.
    pub alignments: PathBuf,
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ResolveArgs {
    #[arg(long, value_enum, default_value = "rule")]
    pub resolver: ResolverName,
    /// Scope dependency file (required by `dep`).
    #[arg(long)]
    pub deps: Option<PathBuf>,
    /// Alignment file (required by `dep`).
    #[arg(long)]
    pub align: Option<PathBuf>,
    pub input: PathBuf,
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Edge attachment policy file; the built-in policy by default.
    #[arg(long)]
    pub policy: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "noprep")]
    pub mode: StatsMode,
    /// Overrides the policy's treatment of membership edges.
    #[arg(long, value_enum)]
    pub member: Option<MemberArg>,
    /// Search steps allowed per graph.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: u64,
    /// Print the full JSON report with per-graph outcomes.
    #[arg(long)]
    pub json: bool,
    pub graphs: PathBuf,
    pub alignments: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Report scope triples only.
    #[arg(long)]
    pub scope_only: bool,
    /// Print the full JSON report with per-graph scores.
    #[arg(long)]
    pub json: bool,
    #[arg(long, default_value_t = DEFAULT_RESTARTS)]
    pub restarts: usize,
    pub gold: PathBuf,
    pub pred: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Number of graphs; seeds run from --seed upwards.
    #[arg(long, default_value_t = 100)]
    pub count: u64,
    #[arg(long, default_value_t = GenParams::default().max_boxes)]
    pub max_boxes: usize,
    #[arg(long, default_value_t = GenParams::default().max_predicates)]
    pub max_predicates: usize,
    #[arg(long, default_value_t = GenParams::default().coref_probability)]
    pub coref_probability: f64,
    #[arg(long, value_enum, default_value = "strict")]
    pub layout: Layout,
    /// Penman output file.
    pub graphs: PathBuf,
    /// Alignment output file.
    pub alignments: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// AM dependency trees, one JSON object per line.
    pub trees: PathBuf,
    pub output: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .context("cannot start worker threads")?;
    let seed = cli.seed;
    pool.install(|| match cli.command {
        Command::Convert(a) => convert(a),
        Command::Simplify(a) => simplify(a),
        Command::ProjectScope(a) => project_scope(a),
        Command::Resolve(a) => resolve(a),
        Command::Stats(a) => stats(a),
        Command::Score(a) => score(a, seed),
        Command::Gen(a) => gen(a, seed),
        Command::Evaluate(a) => evaluate(a),
    })
}

// ---------------------------------------------------------------------------
// files

fn read_input(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin()
            .read_to_string(&mut s)
            .context("cannot read stdin")?;
        return Ok(s);
    }
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write_output(path: &Path, text: &str) -> Result<()> {
    if path == Path::new("-") {
        let mut out = io::stdout().lock();
        out.write_all(text.as_bytes())?;
        return out.flush().map_err(Into::into);
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// A parsed block with the metadata lines that preceded the graph.
struct Item {
    comments: Vec<String>,
    graph: Drg,
}

fn read_graphs(path: &Path) -> Result<Vec<Item>> {
    let text = read_input(path)?;
    split_blocks(&text)
        .into_par_iter()
        .enumerate()
        .map(|(i, b)| {
            let graph = parse_penman_at(&b.text, b.line)
                .with_context(|| format!("{}: graph {}", path.display(), i + 1))?;
            let comments = b
                .text
                .lines()
                .take_while(|l| l.trim_start().starts_with('#'))
                .map(str::to_string)
                .collect();
            Ok(Item { comments, graph })
        })
        .collect()
}

fn read_alignment_file(path: &Path, expected: usize) -> Result<Vec<Alignment>> {
    let text = read_input(path)?;
    let out = read_alignments(text.as_bytes()).with_context(|| format!("{}", path.display()))?;
    if out.len() != expected {
        bail!(
            "{}: {} alignments for {} graphs",
            path.display(),
            out.len(),
            expected
        );
    }
    Ok(out)
}

fn render(items: &[(Vec<String>, String)]) -> String {
    let mut out = String::new();
    for (comments, graph) in items {
        for c in comments {
            out.push_str(c);
            out.push('\n');
        }
        out.push_str(graph.trim_end());
        out.push_str("\n\n");
    }
    out
}

fn write_graphs(path: &Path, items: Vec<(Vec<String>, Drg)>, variant: Variant) -> Result<()> {
    let writer = Writer::new(variant);
    let texts = items
        .into_par_iter()
        .enumerate()
        .map(|(i, (c, g))| {
            let text = writer
                .write(&g)
                .with_context(|| format!("graph {}", i + 1))?;
            Ok((c, text))
        })
        .collect::<Result<Vec<_>>>()?;
    write_output(path, &render(&texts))
}

// ---------------------------------------------------------------------------
// subcommands

fn convert(a: ConvertArgs) -> Result<()> {
    let items = read_graphs(&a.input)?;
    write_graphs(
        &a.output,
        items.into_iter().map(|i| (i.comments, i.graph)).collect(),
        a.to.into(),
    )
}

fn simplify(a: SimplifyArgs) -> Result<()> {
    let name = match a.mode {
        SimplifyMode::Cpt => "cpt",
        SimplifyMode::Scpl => "scpl",
    };
    let base = simplifier(name).expect("registered simplifier");
    let s = if a.coref {
        Box::new(WithCoref(base))
    } else {
        base
    };
    let items = read_graphs(&a.input)?;
    let out = items
        .into_par_iter()
        .enumerate()
        .map(|(i, it)| {
            let g = s
                .simplify(&it.graph)
                .with_context(|| format!("graph {}", i + 1))?;
            Ok((it.comments, g))
        })
        .collect::<Result<Vec<_>>>()?;
    write_graphs(&a.output, out, Variant::Strict)
}

fn project_scope(a: ProjectArgs) -> Result<()> {
    let items = read_graphs(&a.graphs)?;
    let aligns = read_alignment_file(&a.alignments, items.len())?;
    let deps = items
        .par_iter()
        .zip(&aligns)
        .enumerate()
        .map(|(i, (it, al))| project(&it.graph, al).with_context(|| format!("graph {}", i + 1)))
        .collect::<Result<Vec<_>>>()?;
    write_output(&a.output, &write_scope_file(&deps))
}

fn resolve(a: ResolveArgs) -> Result<()> {
    let name = match a.resolver {
        ResolverName::Rule => "rule",
        ResolverName::Dep => "dep",
    };
    let resolver = scope_resolver(name).expect("registered resolver");
    if resolver.needs_dependencies() && (a.deps.is_none() || a.align.is_none()) {
        return Err(UsageError(format!("resolver `{name}` needs --deps and --align")).into());
    }
    let items = read_graphs(&a.input)?;
    let deps = match &a.deps {
        Some(p) => {
            let d = read_scope_file(&read_input(p)?).with_context(|| format!("{}", p.display()))?;
            if d.len() != items.len() {
                bail!(
                    "{}: {} dependency graphs for {} graphs",
                    p.display(),
                    d.len(),
                    items.len()
                );
            }
            Some(d)
        }
        None => None,
    };
    let aligns = match &a.align {
        Some(p) => Some(read_alignment_file(p, items.len())?),
        None => None,
    };
    let out = items
        .into_par_iter()
        .enumerate()
        .map(|(i, it)| {
            let input = ResolveInput {
                deps: deps.as_ref().map(|d| &d[i]),
                alignment: aligns.as_ref().map(|a| &a[i]),
            };
            let (g, placed) = resolve_with_fallback(resolver.as_ref(), &it.graph, input)
                .with_context(|| format!("graph {}", i + 1))?;
            if !placed.is_empty() {
                log::warn!(
                    "graph {}: {} node(s) placed in the root box",
                    i + 1,
                    placed.len()
                );
            }
            let g = postprocess_coref(&g);
            if !is_well_formed(&g, Mode::Full) {
                let problems: Vec<String> = validate(&g, Mode::Full)
                    .iter()
                    .map(|v| v.to_string())
                    .collect();
                return Err(anyhow!(
                    "graph {}: output is not well-formed: {}",
                    i + 1,
                    problems.join("; ")
                ));
            }
            Ok((it.comments, g))
        })
        .collect::<Result<Vec<_>>>()?;
    write_graphs(&a.output, out, Variant::Strict)
}

fn stats(a: StatsArgs) -> Result<()> {
    let mut policy = match &a.policy {
        Some(p) => EdgeAttachmentPolicy::parse(&read_input(p)?)
            .with_context(|| format!("{}", p.display()))?,
        None => EdgeAttachmentPolicy::default(),
    };
    if let Some(m) = a.member {
        policy = policy.with_member_mode(match m {
            MemberArg::App => MemberMode::App,
            MemberArg::Mod => MemberMode::Mod,
        });
    }
    let items = read_graphs(&a.graphs)?;
    let aligns = read_alignment_file(&a.alignments, items.len())?;
    let mode: Preprocessing = a.mode.into();
    let outcomes = items
        .par_iter()
        .zip(&aligns)
        .map(|(it, al)| decompose_instance(&it.graph, al, &policy, mode, a.budget))
        .collect();
    let report = DecomposabilityReport::from_outcomes(outcomes);
    if a.json {
        return print_json(&report);
    }
    let mut text = format!(
        "graphs: {}\ndecomposable: {}\nrate: {:.1}\n",
        report.total, report.decomposable, report.rate
    );
    for (kind, n) in &report.failures {
        text.push_str(&format!("{kind}: {n}\n"));
    }
    write_output(Path::new("-"), &text)
}

fn score(a: ScoreArgs, seed: u64) -> Result<()> {
    let gold_text = read_input(&a.gold)?;
    let pred_text = read_input(&a.pred)?;
    let gold = split_blocks(&gold_text)
        .into_par_iter()
        .enumerate()
        .map(|(i, b)| {
            let g = parse_penman_at(&b.text, b.line)
                .with_context(|| format!("{}: graph {}", a.gold.display(), i + 1))?;
            if !is_well_formed(&g, Mode::Full) {
                bail!("{}: graph {} is not well-formed", a.gold.display(), i + 1);
            }
            Ok(g)
        })
        .collect::<Result<Vec<Drg>>>()?;
    let pred: Vec<Result<Drg, String>> = split_blocks(&pred_text)
        .into_par_iter()
        .map(|b| parse_penman_at(&b.text, b.line).map_err(|e| e.to_string()))
        .collect();
    if gold.len() != pred.len() {
        bail!("{} predictions for {} gold graphs", pred.len(), gold.len());
    }
    let opts = ScoreOptions {
        restarts: a.restarts,
        seed,
    };
    let items = gold
        .par_iter()
        .zip(&pred)
        .enumerate()
        .map(|(i, (g, p))| score_item(i, g, p, opts))
        .collect();
    let report = CorpusReport::from_items(items);
    if a.json {
        return print_json(&report);
    }
    write_output(Path::new("-"), &report.to_text(a.scope_only))
}

fn gen(a: GenArgs, seed: u64) -> Result<()> {
    let params = GenParams {
        max_boxes: a.max_boxes,
        max_predicates: a.max_predicates,
        coref_probability: a.coref_probability,
        ..GenParams::default()
    };
    params.validate().map_err(|e| UsageError(e.to_string()))?;
    let end = seed
        .checked_add(a.count)
        .ok_or_else(|| UsageError("--seed plus --count overflows".into()))?;
    let corpus: Vec<(Drg, Alignment)> = (seed..end)
        .into_par_iter()
        .map(|s| generate(s, &params))
        .collect();
    let mut aligns = Vec::new();
    let mut graphs = Vec::new();
    for (s, (g, al)) in (seed..end).zip(corpus) {
        graphs.push((vec![format!("# seed {s}")], g));
        aligns.push(al);
    }
    write_graphs(&a.graphs, graphs, a.layout.into())?;
    let mut buf = Vec::new();
    write_alignments(&mut buf, &aligns)?;
    write_output(
        &a.alignments,
        &String::from_utf8(buf).expect("JSON is UTF-8"),
    )
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let text = read_input(&a.trees)?;
    let trees = read_am_trees(&text).with_context(|| format!("{}", a.trees.display()))?;
    let out = trees
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let g = t
                .evaluate_to_drg()
                .with_context(|| format!("tree {}", i + 1))?;
            Ok((Vec::new(), g))
        })
        .collect::<Result<Vec<_>>>()?;
    write_graphs(&a.output, out, Variant::Strict)
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_output(Path::new("-"), &text)
}
