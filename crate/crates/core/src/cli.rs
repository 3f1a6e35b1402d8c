//! Command-line entry point and the CSV/JSON output formats.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or configuration
//! error, 3 numerical divergence.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::bounds::{beta, reachable_pairs, verify_theorem1, BoundRecord, BoundReport, BoundsError, CurvatureBounds, VIOLATION_TOLERANCE};
use crate::config::{derive_seed, GraphSource, PairSelection, RunConfig, STREAM_FEATURES, STREAM_WEIGHTS};
use crate::graph::{generate, gromov_delta, load_edge_list, pairs_at_distance, Graph, GraphKind, NormalizedAdjacency};
use crate::layers::{random_unit_features, Model};
use crate::manifold::ManifoldPoint;
use crate::sensitivity::{measure_pairs, SensitivityReport};
use crate::training::{train_model, EpochLog, TrainError};

pub const SENSITIVITY_HEADER: &str = "epoch,i,j,spectral_norm,frobenius_norm";
pub const BOUND_HEADER: &str = "i,j,ell,empirical,bound,slack";
pub const TRAIN_HEADER: &str = "epoch,loss,val_auc,sens_avg,sens_min,sens_max";
pub const BETA_HEADER: &str = "k_lower,k_upper,r_exp,r_log,beta";

const SCHEMA: &str = "\
sensitivity.csv   epoch,i,j,spectral_norm,frobenius_norm
                  one row per sampled pair, then `summary,,,<mean spectral>,<mean frobenius>`
sensitivity.json  {manifold, curvature, depth, distance, pairs, avg, min, max, avg_frobenius}
bounds.csv        i,j,ell,empirical,bound,slack      (slack = bound - empirical)
bounds.json       {violations, max_slack, min_slack, w, c_sigma, beta}   (beta = max over nodes)
train.csv         epoch,loss,val_auc,sens_avg,sens_min,sens_max
                  sens_* are empty on epochs without a sensitivity measurement
train.json        {epochs, final_loss, final_val_auc, val_auc_on_train, pairs}
beta-table        k_lower,k_upper,r_exp,r_log,beta   (beta = `invalid` when undefined)
hyperbolicity     {n, m, delta}
edge lists        one `u v` pair per line, `#` comments
floats use the shortest representation that round-trips (Rust `{:?}`)
";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Verification(String),
    #[error("{0}")]
    Divergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Verification(_) => 1,
            Self::Usage(_) => 2,
            Self::Divergence(_) => 3,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "rgnn", version, about = "Sensitivity analysis of message passing on constant-curvature manifolds")]
struct Cli {
    /// Print the CSV and JSON output schemas and exit.
    #[arg(long, global = true)]
    schema: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic graph as an edge list.
    Generate {
        /// binary_tree, rary_tree, path, cycle, ring_of_cliques or random_tree
        #[arg(long)]
        kind: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        r: Option<usize>,
        #[arg(long)]
        cliques: Option<usize>,
        #[arg(long)]
        clique_size: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Gromov δ-hyperbolicity of an edge-list graph.
    Hyperbolicity {
        graph: PathBuf,
        /// Also write the JSON summary here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Jacobian norms of sampled pairs at the configured distance.
    Sensitivity { config: PathBuf },
    /// Compare measured Jacobian norms with the curvature bound.
    VerifyBounds {
        #[arg(required_unless_present = "recheck")]
        config: Option<PathBuf>,
        /// Re-validate an existing bounds CSV instead of running a model.
        #[arg(long, conflicts_with = "config")]
        recheck: Option<PathBuf>,
    },
    /// Train a link predictor and log per-epoch sensitivity.
    Train { config: PathBuf },
    /// β over a grid of curvature bounds.
    BetaTable {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        k_lower: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        k_upper: Vec<f64>,
        #[arg(long)]
        r_exp: f64,
        #[arg(long)]
        r_log: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses arguments, runs the command and maps errors to exit codes.
pub fn main() -> ExitCode {
    let stdout = std::io::stdout();
    let code = run(std::env::args_os(), &mut stdout.lock());
    ExitCode::from(code)
}

/// Testable entry point; returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code.clamp(0, 255) as u8;
        }
    };
    match dispatch(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    if cli.schema {
        return emit(out, SCHEMA);
    }
    let Some(command) = cli.command else {
        return Err(usage("no command given (see --help)"));
    };
    match command {
        Command::Generate {
            kind,
            n,
            depth,
            r,
            cliques,
            clique_size,
            seed,
            out: path,
        } => {
            let need = |v: Option<usize>, name: &str| v.ok_or_else(|| usage(format!("{kind} needs --{name}")));
            let kind = match kind.as_str() {
                "binary_tree" => GraphKind::BinaryTree { depth: need(depth, "depth")? },
                "rary_tree" => GraphKind::RaryTree {
                    r: need(r, "r")?,
                    depth: need(depth, "depth")?,
                },
                "path" => GraphKind::Path { n: need(n, "n")? },
                "cycle" => GraphKind::Cycle { n: need(n, "n")? },
                "ring_of_cliques" => GraphKind::RingOfCliques {
                    cliques: need(cliques, "cliques")?,
                    size: need(clique_size, "clique-size")?,
                },
                "random_tree" => GraphKind::RandomTree { n: need(n, "n")?, seed },
                other => return Err(usage(format!("unknown graph kind {other:?}"))),
            };
            let g = generate(kind).map_err(usage)?;
            write_file(&path, &g.to_edge_list())
        }
        Command::Hyperbolicity { graph, out: path } => {
            let g = load_edge_list(&graph).map_err(usage)?;
            let delta = gromov_delta(&g).map_err(usage)?;
            let json = to_json(&HyperbolicitySummary {
                n: g.node_count(),
                m: g.edge_count(),
                delta,
            });
            if let Some(p) = path {
                write_file(&p, &json)?;
            }
            emit(out, &json)
        }
        Command::Sensitivity { config } => cmd_sensitivity(&load_config(&config)?, out),
        Command::VerifyBounds { config, recheck } => match (config, recheck) {
            (_, Some(csv)) => cmd_recheck(&csv, out),
            (Some(config), None) => cmd_verify_bounds(&load_config(&config)?, out),
            (None, None) => Err(usage("verify-bounds needs a config or --recheck")),
        },
        Command::Train { config } => cmd_train(&load_config(&config)?, out),
        Command::BetaTable {
            k_lower,
            k_upper,
            r_exp,
            r_log,
            out: path,
        } => {
            let table = beta_table(&k_lower, &k_upper, r_exp, r_log);
            match path {
                Some(p) => write_file(&p, &table),
                None => emit(out, &table),
            }
        }
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(usage)
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serializes");
    s.push('\n');
    s
}

fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    RunConfig::load(path).map_err(usage)
}

/// Shortest round-trip rendering of a float.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

struct Prepared {
    graph: Graph,
    adj: NormalizedAdjacency,
    model: Model,
    inputs: Vec<ManifoldPoint>,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared, CliError> {
    let graph = match &cfg.graph {
        GraphSource::Generator(kind) => generate(*kind),
        GraphSource::EdgeList(p) => load_edge_list(p),
    }
    .map_err(usage)?;
    let adj = NormalizedAdjacency::new(&graph).map_err(usage)?;
    let seed = cfg.protocol.seed;
    let model = Model::random(cfg.model.clone(), derive_seed(seed, STREAM_WEIGHTS), cfg.init_gain).map_err(usage)?;
    let features = random_unit_features(graph.node_count(), cfg.model.widths[0], derive_seed(seed, STREAM_FEATURES));
    let inputs = model.embed_features(&features).map_err(usage)?;
    Ok(Prepared {
        graph,
        adj,
        model,
        inputs,
    })
}

fn output_dir(cfg: &RunConfig) -> Result<&Path, CliError> {
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| usage(format!("cannot create {}: {e}", cfg.output_dir.display())))?;
    Ok(&cfg.output_dir)
}

#[derive(Serialize)]
struct HyperbolicitySummary {
    n: usize,
    m: usize,
    delta: f64,
}

#[derive(Serialize)]
struct SensitivitySummary<'a> {
    manifold: &'a str,
    curvature: f64,
    depth: usize,
    distance: usize,
    pairs: usize,
    avg: f64,
    min: f64,
    max: f64,
    avg_frobenius: f64,
}

/// Rows for one or more reports, each followed by its summary row.
pub fn sensitivity_csv(reports: &[SensitivityReport]) -> String {
    let mut s = format!("{SENSITIVITY_HEADER}\n");
    for rep in reports {
        for (((i, j), n), f) in rep.pairs.iter().zip(&rep.norms).zip(&rep.frobenius) {
            let _ = writeln!(s, "{},{i},{j},{},{}", rep.epoch, fmt_f64(*n), fmt_f64(*f));
        }
        let _ = writeln!(s, "summary,,,{},{}", fmt_f64(rep.avg), fmt_f64(rep.avg_frobenius()));
    }
    s
}

fn cmd_sensitivity(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let depth = cfg.model.depth;
    let d = cfg.protocol.distance;
    if d != depth {
        return Err(usage(format!("protocol.distance = {d} must equal model.depth = {depth}")));
    }
    let p = prepare(cfg)?;
    let pairs = pairs_at_distance(&p.graph, d, cfg.protocol.pair_count, cfg.protocol.seed).map_err(usage)?;
    let rep = measure_pairs(&p.model, &p.adj, &p.inputs, &pairs, d, 0).map_err(usage)?;
    let dir = output_dir(cfg)?;
    write_file(&dir.join("sensitivity.csv"), &sensitivity_csv(std::slice::from_ref(&rep)))?;
    let summary = to_json(&SensitivitySummary {
        manifold: cfg.manifold.name(),
        curvature: cfg.model.curvature,
        depth,
        distance: d,
        pairs: rep.pairs.len(),
        avg: rep.avg,
        min: rep.min,
        max: rep.max,
        avg_frobenius: rep.avg_frobenius(),
    });
    write_file(&dir.join("sensitivity.json"), &summary)?;
    emit(out, &summary)
}

#[derive(Serialize)]
struct BoundSummary {
    violations: usize,
    max_slack: f64,
    min_slack: f64,
    w: f64,
    c_sigma: f64,
    beta: f64,
}

pub fn bound_report_csv(rep: &BoundReport) -> String {
    let mut s = format!("{BOUND_HEADER}\n");
    for r in &rep.records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.i,
            r.j,
            r.ell,
            fmt_f64(r.empirical),
            fmt_f64(r.bound),
            fmt_f64(r.slack)
        );
    }
    s
}

#[derive(Debug, Error, PartialEq)]
pub enum CsvError {
    #[error("expected header {expected:?}, found {found:?}")]
    Header { expected: String, found: String },
    #[error("line {line}: {message}")]
    Row { line: usize, message: String },
}

/// Parses a bounds CSV back into records. The slack column is kept as
/// written, so it can be checked against `bound − empirical`.
pub fn parse_bound_csv(text: &str) -> Result<Vec<BoundRecord>, CsvError> {
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, l)| l.trim()).unwrap_or("");
    if header != BOUND_HEADER {
        return Err(CsvError::Header {
            expected: BOUND_HEADER.into(),
            found: header.into(),
        });
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let row = |message: String| CsvError::Row { line: line_no, message };
        if fields.len() != 6 {
            return Err(row(format!("expected 6 fields, found {}", fields.len())));
        }
        let int = |k: usize| fields[k].parse::<usize>().map_err(|e| row(format!("field {}: {e}", k + 1)));
        let real = |k: usize| fields[k].parse::<f64>().map_err(|e| row(format!("field {}: {e}", k + 1)));
        records.push(BoundRecord {
            i: int(0)?,
            j: int(1)?,
            ell: int(2)?,
            empirical: real(3)?,
            bound: real(4)?,
            slack: real(5)?,
        });
    }
    Ok(records)
}

/// Problems found when re-validating bound records: violations of the
/// bound, and rows whose slack does not equal `bound − empirical`.
pub fn recheck_records(records: &[BoundRecord]) -> (usize, usize) {
    let mut violations = 0;
    let mut inconsistent = 0;
    for r in records {
        let slack = r.bound - r.empirical;
        if slack.is_nan() || slack < -VIOLATION_TOLERANCE {
            violations += 1;
        }
        let scale = r.bound.abs().max(r.empirical.abs()).max(1.0);
        let gap = (r.slack - slack).abs();
        if gap.is_nan() || gap > 1e-12 * scale {
            inconsistent += 1;
        }
    }
    (violations, inconsistent)
}

fn cmd_recheck(path: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let records = parse_bound_csv(&text).map_err(usage)?;
    let (violations, inconsistent) = recheck_records(&records);
    emit(
        out,
        &format!(
            "records = {}\nviolations = {violations}\ninconsistent_slack = {inconsistent}\n",
            records.len()
        ),
    )?;
    if violations + inconsistent > 0 {
        return Err(CliError::Verification(format!(
            "{violations} violations and {inconsistent} inconsistent rows in {}",
            path.display()
        )));
    }
    Ok(())
}

fn cmd_verify_bounds(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let ell = cfg.protocol.ell;
    if ell > cfg.model.depth {
        return Err(usage(format!("protocol.ell = {ell} exceeds model.depth = {}", cfg.model.depth)));
    }
    let p = prepare(cfg)?;
    let pairs = match cfg.protocol.pairs {
        PairSelection::All => reachable_pairs(&p.adj, ell),
        PairSelection::Distance => {
            pairs_at_distance(&p.graph, cfg.protocol.distance, cfg.protocol.pair_count, cfg.protocol.seed)
                .map_err(usage)?
        }
    };
    let rep = match verify_theorem1(&p.model, &p.graph, &p.inputs, &pairs, ell) {
        Ok(r) => r,
        Err(e @ BoundsError::BeyondFirstArch { .. }) => {
            return Err(CliError::Verification(format!("bound undefined for this run: {e}")))
        }
        Err(e) => return Err(usage(e)),
    };
    let dir = output_dir(cfg)?;
    write_file(&dir.join("bounds.csv"), &bound_report_csv(&rep))?;
    let summary = to_json(&BoundSummary {
        violations: rep.violations,
        max_slack: rep.max_slack(),
        min_slack: rep.min_slack(),
        w: rep.w,
        c_sigma: rep.c_sigma,
        beta: rep.max_beta(),
    });
    write_file(&dir.join("bounds.json"), &summary)?;
    emit(out, &summary)?;
    if rep.violations > 0 {
        return Err(CliError::Verification(format!(
            "{} of {} pairs violate the bound",
            rep.violations,
            rep.records.len()
        )));
    }
    Ok(())
}

pub fn train_csv(logs: &[EpochLog]) -> String {
    let mut s = format!("{TRAIN_HEADER}\n");
    for l in logs {
        let sens = match &l.sensitivity {
            Some(r) => format!("{},{},{}", fmt_f64(r.avg), fmt_f64(r.min), fmt_f64(r.max)),
            None => ",,".into(),
        };
        let _ = writeln!(s, "{},{},{},{sens}", l.epoch, fmt_f64(l.loss), fmt_f64(l.val_auc));
    }
    s
}

#[derive(Serialize)]
struct TrainSummary {
    epochs: usize,
    final_loss: f64,
    final_val_auc: f64,
    val_auc_on_train: bool,
    pairs: usize,
}

fn cmd_train(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let p = prepare(cfg)?;
    let run = match train_model(p.model, &cfg.train, &p.graph, &p.inputs) {
        Ok(r) => r,
        Err(e @ TrainError::Diverged { .. }) => return Err(CliError::Divergence(e.to_string())),
        Err(e) => return Err(usage(e)),
    };
    let dir = output_dir(cfg)?;
    write_file(&dir.join("train.csv"), &train_csv(&run.logs))?;
    let last = run.logs.last().expect("at least one epoch");
    let summary = to_json(&TrainSummary {
        epochs: run.logs.len(),
        final_loss: last.loss,
        final_val_auc: last.val_auc,
        val_auc_on_train: run.val_auc_on_train,
        pairs: run.sensitivity_pairs.len(),
    });
    write_file(&dir.join("train.json"), &summary)?;
    emit(out, &summary)
}

/// β for every `(k_lower, k_upper)` combination; rows where β is undefined
/// (`k_lower > k_upper`, or `r_log` past the first arch) read `invalid`.
pub fn beta_table(k_lower: &[f64], k_upper: &[f64], r_exp: f64, r_log: f64) -> String {
    let mut s = format!("{BETA_HEADER}\n");
    for &k in k_lower {
        for &big_k in k_upper {
            let value = CurvatureBounds::new(k, big_k)
                .and_then(|cb| beta(cb, r_exp, r_log))
                .map_or_else(|_| "invalid".to_string(), fmt_f64);
            let _ = writeln!(s, "{},{},{},{},{value}", fmt_f64(k), fmt_f64(big_k), fmt_f64(r_exp), fmt_f64(r_log));
        }
    }
    s
}
