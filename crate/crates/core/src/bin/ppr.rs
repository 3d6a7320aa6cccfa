use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use sublinear_ppr::graph::{generate_power_law, header_mode, load_edge_list, write_edge_list, write_id_map, Mode};
use sublinear_ppr::harness::{
    self, threads_from_env, Algorithm, ScaleConfig, ScaleGraph, SourceSpec, VerifyConfig, DEFAULT_ORACLE_CAP,
};
use sublinear_ppr::oracle::{exact_ssppr, powerlaw_fit_diagnostic};
use sublinear_ppr::push::{backward_push, forward_push};
use sublinear_ppr::query::{ssppr_a, ssppr_d, QueryParams, DEFAULT_ALPHA, DEFAULT_FALLBACK_FACTOR};
use sublinear_ppr::sampling::{monte_carlo, monte_carlo_from_distribution, WalkEngine, STREAM_PHASE_ONE};
use sublinear_ppr::{AliasTable, Graph, NodeId, PprError, Result, ScoreVector};

#[derive(Parser)]
#[command(name = "ppr", version, about = "Single-source Personalized PageRank with error guarantees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an undirected preferential-attachment graph.
    Gen(GenArgs),
    /// Exact PPR vector by power iteration.
    Exact(ExactArgs),
    /// Plain Monte Carlo estimate.
    Mc(McArgs),
    /// Backward Push from a target node.
    Bp(PushArgs),
    /// Forward Push from a source node.
    Fp(PushArgs),
    /// Absolute-error single-source query.
    #[command(name = "ssppr-a")]
    SspprA(QueryArgs),
    /// Degree-normalized single-source query (undirected graphs).
    #[command(name = "ssppr-d")]
    SspprD(QueryArgs),
    /// Check the error guarantee over many seeded runs against the oracle.
    Verify(VerifyArgs),
    /// Cost-scaling experiment over graphs and error parameters.
    Scale(ScaleArgs),
    /// Log-log fit of exact PPR profiles.
    Fit(FitArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    D,
    U,
}

#[derive(Args)]
struct GraphArgs {
    /// Edge-list file.
    #[arg(long)]
    graph: PathBuf,
    /// Graph mode; defaults to the file header, else directed.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

impl GraphArgs {
    fn load(&self) -> Result<Graph> {
        let text = fs::read_to_string(&self.graph)?;
        let mode = match self.mode {
            Some(ModeArg::D) => Mode::Directed,
            Some(ModeArg::U) => Mode::Undirected,
            None => header_mode(&text).unwrap_or(Mode::Directed),
        };
        load_edge_list(text.as_bytes(), mode)
    }
}

#[derive(Args)]
struct OutArgs {
    /// Output file (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON diagnostics file.
    #[arg(long)]
    diag: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    attach: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write `external<TAB>dense` id mapping here.
    #[arg(long)]
    id_map: Option<PathBuf>,
}

#[derive(Args)]
struct ExactArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    source: u64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct McArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Node id, `uniform`, or `degree`.
    #[arg(long)]
    source: String,
    #[arg(long)]
    walks: u64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct PushArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Target node for `bp`, source node for `fp`.
    #[arg(long, alias = "target")]
    source: u64,
    #[arg(long)]
    rmax: f64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct QueryArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    source: u64,
    #[arg(long, alias = "eps-d")]
    eps: f64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    c_walk: f64,
    /// Fall back to the exact oracle once cost exceeds c_fb·n².
    #[arg(long)]
    fallback: bool,
    #[arg(long, default_value_t = DEFAULT_FALLBACK_FACTOR)]
    c_fb: f64,
    #[command(flatten)]
    out: OutArgs,
}

impl QueryArgs {
    fn params(&self) -> QueryParams {
        let mut p = QueryParams::new(self.eps).with_alpha(self.alpha).with_seed(self.seed);
        p.c_walk = self.c_walk;
        p.fallback_enabled = self.fallback;
        p.fallback_factor = self.c_fb;
        p
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    A,
    D,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::A => Algorithm::Absolute,
            AlgoArg::D => Algorithm::DegreeNormalized,
        }
    }
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    algorithm: AlgoArg,
    #[command(flatten)]
    graph: GraphArgs,
    /// Node id, `uniform`, or `degree`.
    #[arg(long, default_value = "0")]
    source: String,
    #[arg(long, alias = "eps-d")]
    eps: f64,
    #[arg(long, default_value_t = 200)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    c_walk: f64,
    #[arg(long, default_value_t = DEFAULT_ORACLE_CAP)]
    oracle_cap: usize,
    /// Include per-run records in the report.
    #[arg(long)]
    records: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScaleArgs {
    #[arg(long, value_enum)]
    algorithm: AlgoArg,
    /// Graph files (repeatable).
    #[arg(long = "graph")]
    graphs: Vec<PathBuf>,
    /// Generate power-law graphs of these sizes instead.
    #[arg(long, value_delimiter = ',')]
    gen_n: Vec<usize>,
    #[arg(long, default_value_t = 4)]
    attach: usize,
    #[arg(long, default_value_t = 1)]
    gen_seed: u64,
    #[arg(long, value_delimiter = ',', required = true)]
    eps: Vec<f64>,
    #[arg(long, default_value_t = 3)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Node id, `uniform`, `degree`, or `max-degree`.
    #[arg(long, default_value = "0")]
    source: String,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    c_walk: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long, default_value_t = 5)]
    sources: usize,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    let mut w = open_out(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let line = serde_json::to_string(value).map_err(|e| PprError::Io(e.into()))?;
    write_text(path, &format!("{line}\n"))
}

fn dense_source(g: &Graph, external: u64) -> Result<NodeId> {
    g.dense_id(external)
        .ok_or_else(|| PprError::InvalidArgument(format!("node {external} not in graph")))
}

fn parse_source(g: &Graph, spec: &str) -> Result<SourceSpec> {
    match spec {
        "uniform" => Ok(SourceSpec::Uniform),
        "degree" => Ok(SourceSpec::Degree),
        "max-degree" => Ok(SourceSpec::MaxDegree),
        other => {
            let ext: u64 = other
                .parse()
                .map_err(|_| PprError::InvalidArgument(format!("bad source spec {other:?}")))?;
            Ok(SourceSpec::Fixed(dense_source(g, ext)?))
        }
    }
}

/// `node<TAB>value` with external ids, sorted by external id.
fn scores_tsv(g: &Graph, scores: impl Iterator<Item = (NodeId, f64)>) -> String {
    let mut rows: Vec<(u64, f64)> = scores.map(|(v, x)| (g.external_id(v), x)).collect();
    rows.sort_by_key(|r| r.0);
    rows.iter().map(|(v, x)| format!("{v}\t{x}\n")).collect()
}

fn nonzero_tsv(g: &Graph, scores: &ScoreVector) -> String {
    scores_tsv(g, scores.nonzero())
}

#[derive(Serialize)]
struct PushDiag {
    kind: &'static str,
    node: u64,
    r_max: f64,
    alpha: f64,
    cost: u64,
    reserves: usize,
    residues: usize,
}

#[derive(Serialize)]
struct McDiag {
    n_walks: u64,
    steps: u64,
    support: usize,
    alpha: f64,
    seed: u64,
}

#[derive(Serialize)]
struct ExactDiag {
    source: u64,
    alpha: f64,
    tol: f64,
    residual_l1: f64,
    sum: f64,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => {
            let g = generate_power_law(a.n, a.attach, a.seed)?;
            let mut w = open_out(a.out.as_deref())?;
            write_edge_list(&g, &mut w)?;
            w.flush()?;
            if let Some(p) = a.id_map {
                write_id_map(&g, BufWriter::new(File::create(p)?))?;
            }
        }
        Command::Exact(a) => {
            let g = a.graph.load()?;
            let s = dense_source(&g, a.source)?;
            let pi = exact_ssppr(&g, s, a.alpha, a.tol)?;
            let text = scores_tsv(&g, pi.values.iter().copied().enumerate());
            write_text(a.out.out.as_deref(), &text)?;
            if let Some(p) = a.out.diag.as_deref() {
                write_json(
                    Some(p),
                    &ExactDiag {
                        source: a.source,
                        alpha: a.alpha,
                        tol: a.tol,
                        residual_l1: pi.residual_l1,
                        sum: pi.sum(),
                    },
                )?;
            }
        }
        Command::Mc(a) => {
            let g = a.graph.load()?;
            let mut engine = WalkEngine::from_seed(a.alpha, a.seed, STREAM_PHASE_ONE)?;
            let est = match parse_source(&g, &a.source)? {
                SourceSpec::Fixed(s) => monte_carlo(&g, s, a.walks, &mut engine)?,
                SourceSpec::Uniform => {
                    let table = AliasTable::new(&vec![1.0; g.n()])?;
                    monte_carlo_from_distribution(&g, &table, a.walks, &mut engine)?
                }
                SourceSpec::Degree => {
                    let w: Vec<f64> = (0..g.n()).map(|v| g.out_degree(v) as f64).collect();
                    monte_carlo_from_distribution(&g, &AliasTable::new(&w)?, a.walks, &mut engine)?
                }
                SourceSpec::MaxDegree => {
                    return Err(PprError::InvalidArgument("mc accepts a node id, uniform, or degree".into()))
                }
            };
            write_text(a.out.out.as_deref(), &nonzero_tsv(&g, &est.to_scores()))?;
            if let Some(p) = a.out.diag.as_deref() {
                write_json(
                    Some(p),
                    &McDiag {
                        n_walks: a.walks,
                        steps: engine.steps(),
                        support: est.support_len(),
                        alpha: a.alpha,
                        seed: a.seed,
                    },
                )?;
            }
        }
        Command::Bp(a) => {
            let g = a.graph.load()?;
            let t = dense_source(&g, a.source)?;
            let res = backward_push(&g, a.alpha, t, a.rmax, None)?.into_result();
            let mut text = format!("# t={} r_max={} cost={}\n", a.source, a.rmax, res.cost);
            let mut nodes: Vec<NodeId> = res.reserves.iter().chain(res.residues.iter()).map(|(v, _)| v).collect();
            nodes.sort_by_key(|&v| g.external_id(v));
            nodes.dedup();
            for v in nodes {
                text.push_str(&format!("{}\t{}\t{}\n", g.external_id(v), res.reserve(v), res.residue(v)));
            }
            write_text(a.out.out.as_deref(), &text)?;
            if let Some(p) = a.out.diag.as_deref() {
                write_json(
                    Some(p),
                    &PushDiag {
                        kind: "backward",
                        node: a.source,
                        r_max: a.rmax,
                        alpha: a.alpha,
                        cost: res.cost,
                        reserves: res.reserves.len(),
                        residues: res.residues.len(),
                    },
                )?;
            }
        }
        Command::Fp(a) => {
            let g = a.graph.load()?;
            let s = dense_source(&g, a.source)?;
            let res = forward_push(&g, a.alpha, s, a.rmax)?;
            write_text(a.out.out.as_deref(), &nonzero_tsv(&g, &res.reserves))?;
            if let Some(p) = a.out.diag.as_deref() {
                write_json(
                    Some(p),
                    &PushDiag {
                        kind: "forward",
                        node: a.source,
                        r_max: a.rmax,
                        alpha: a.alpha,
                        cost: res.cost,
                        reserves: res.reserves.len(),
                        residues: res.residues.len(),
                    },
                )?;
            }
        }
        Command::SspprA(a) => run_query(&a, false)?,
        Command::SspprD(a) => run_query(&a, true)?,
        Command::Verify(a) => {
            let g = a.graph.load()?;
            let mut params = QueryParams::new(a.eps).with_alpha(a.alpha).with_seed(a.seed);
            params.c_walk = a.c_walk;
            let cfg = VerifyConfig {
                algorithm: a.algorithm.into(),
                source: parse_source(&g, &a.source)?,
                params,
                runs: a.runs,
                oracle_cap: a.oracle_cap,
                threads: threads_from_env(),
            };
            let mut report = harness::verify(&g, &cfg)?;
            if !a.records {
                report.records.clear();
            }
            eprintln!(
                "{} runs, {} failures (rate {:.4}, allowed {:.4}), max error {:.3e}",
                report.runs, report.failures, report.failure_rate, report.allowed_rate, report.max_error
            );
            write_json(a.out.as_deref(), &report)?;
        }
        Command::Scale(a) => {
            let mut graphs = Vec::new();
            for p in &a.graphs {
                let args = GraphArgs {
                    graph: p.clone(),
                    mode: None,
                };
                graphs.push(ScaleGraph {
                    label: p.display().to_string(),
                    graph: args.load()?,
                });
            }
            for &n in &a.gen_n {
                graphs.push(ScaleGraph {
                    label: format!("pa-n{n}-k{}", a.attach),
                    graph: generate_power_law(n, a.attach, a.gen_seed)?,
                });
            }
            if graphs.is_empty() {
                return Err(PprError::InvalidArgument("give --graph or --gen-n".into()));
            }
            // fixed ids resolve against the first graph
            let source = parse_source(&graphs[0].graph, &a.source)?;
            let mut params = QueryParams::new(a.eps[0]).with_alpha(a.alpha).with_seed(a.seed);
            params.c_walk = a.c_walk;
            let cfg = ScaleConfig {
                algorithm: a.algorithm.into(),
                eps_grid: a.eps.clone(),
                seeds: a.seeds,
                source,
                params,
                threads: threads_from_env(),
            };
            let report = harness::scale(&graphs, &cfg)?;
            for s in &report.eps_slopes {
                eprintln!("cost vs 1/eps on {}: slope {:.3} (rms {:.3})", s.fixed, s.slope, s.residual);
            }
            for s in &report.m_slopes {
                eprintln!("cost vs m at eps={}: slope {:.3} (rms {:.3})", s.fixed, s.slope, s.residual);
            }
            write_json(a.out.as_deref(), &report)?;
            if let Some(p) = a.csv.as_deref() {
                write_text(Some(p), &report.to_csv())?;
            }
        }
        Command::Fit(a) => {
            let g = a.graph.load()?;
            let fit = powerlaw_fit_diagnostic(&g, a.sources, a.alpha, a.seed)?;
            write_json(None, &fit)?;
        }
    }
    Ok(())
}

fn run_query(a: &QueryArgs, degree_normalized: bool) -> Result<()> {
    let g = a.graph.load()?;
    let s = dense_source(&g, a.source)?;
    let params = a.params();
    let answer = if degree_normalized {
        ssppr_d(&g, s, &params)?
    } else {
        ssppr_a(&g, s, &params)?
    };
    write_text(a.out.out.as_deref(), &nonzero_tsv(&g, &answer.estimates))?;
    if let Some(p) = a.out.diag.as_deref() {
        write_json(Some(p), &answer.diagnostics)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
