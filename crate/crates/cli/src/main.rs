use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use vnfplace::benchgen::{generate_instance, run_comparison, FlowTopology, GenParams};
use vnfplace::engine::{
    self, deployment_from_json, deployment_to_json, export_deployment, group_by_placement,
    import_preallocation, load_problem, render, render_groups, Collapse, Format, Mode,
    SolveError, SolveRequest,
};
use vnfplace::model::{ChainId, NodeId, PreAllocation, ServiceId};
use vnfplace::parser::{render_chains, render_infrastructure};
use vnfplace::probability::{QosMode, DEFAULT_COMPONENT_CAP};
use vnfplace::search::{QueryConstraints, DEFAULT_RADIUS};

#[derive(Parser)]
#[command(name = "vnfplace", version, about = "Place and route VNF chains on probabilistic Cloud-Edge infrastructures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank every eligible placement and routing of a chain.
    Solve(SolveArgs),
    /// Compare exhaustive and heuristic search on a generated instance (CSV on stdout).
    Bench(BenchArgs),
    /// Write a generated chain and infrastructure as fact files.
    Gen(GenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exhaustive,
    Heuristic,
}

#[derive(Clone, Copy, ValueEnum)]
enum CollapseArg {
    Modal,
    Truncate,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Table,
}

#[derive(Clone, Copy, ValueEnum)]
enum QosArg {
    Path,
    PerLink,
}

#[derive(Clone, Copy, ValueEnum)]
enum TopologyArg {
    Line,
    Tree,
}

#[derive(Args)]
struct SolveArgs {
    /// Chain fact file; repeatable.
    #[arg(long, required = true)]
    chain: Vec<PathBuf>,
    /// Infrastructure fact file.
    #[arg(long)]
    infra: PathBuf,
    /// Chain to place when several are loaded.
    #[arg(long)]
    chain_id: Option<String>,
    #[arg(long, value_enum, default_value = "exhaustive")]
    mode: ModeArg,
    /// Hardware pruning threshold (heuristic mode).
    #[arg(long, required_if_eq("mode", "heuristic"))]
    thr_hw: Option<f64>,
    /// QoS pruning threshold (heuristic mode).
    #[arg(long, required_if_eq("mode", "heuristic"))]
    thr_qos: Option<f64>,
    /// How QoS marginals are taken in heuristic mode.
    #[arg(long, value_enum, default_value = "path")]
    qos_mode: QosArg,
    /// Maximum number of links per flow path.
    #[arg(long, default_value_t = DEFAULT_RADIUS)]
    radius: usize,
    /// Fix a service to a node: `svc=node`.
    #[arg(long, value_parser = parse_pin)]
    pin: Vec<(String, String)>,
    /// Services that must share a node: `s1,s2[,...]`.
    #[arg(long, value_parser = parse_group)]
    same_node: Vec<Vec<String>>,
    /// Two services that must be on different nodes: `s1,s2`.
    #[arg(long, value_parser = parse_pair)]
    diff_node: Vec<(String, String)>,
    /// Deployment file of chains already placed.
    #[arg(long)]
    existing: Option<PathBuf>,
    #[arg(long, value_enum)]
    collapse: Option<CollapseArg>,
    /// Keep only the K best answers.
    #[arg(long)]
    top: Option<usize>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
    /// Report the best answer of each distinct placement instead.
    #[arg(long)]
    group_by_placement: bool,
    /// Write the deployment of the best answer (plus --existing) here.
    #[arg(long)]
    export: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Largest joint state space enumerated for one group of dependent variables.
    #[arg(long, default_value_t = DEFAULT_COMPONENT_CAP)]
    component_cap: u64,
}

#[derive(Args)]
struct InstanceArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    nodes: usize,
    #[arg(long, default_value_t = 3)]
    chain_len: usize,
    /// Extra undirected edges beyond a spanning tree, per node.
    #[arg(long, default_value_t = 0.3)]
    density: f64,
    #[arg(long, value_enum, default_value = "line")]
    topology: TopologyArg,
}

impl InstanceArgs {
    fn params(&self) -> Result<GenParams, SolveError> {
        if self.nodes == 0 || self.chain_len == 0 {
            return Err(SolveError::Request("node count and chain length must be positive".into()));
        }
        if !(self.density.is_finite() && self.density >= 0.0) {
            return Err(SolveError::Request("density must be non-negative".into()));
        }
        Ok(GenParams {
            seed: self.seed,
            nodes: self.nodes,
            chain_len: self.chain_len,
            density: self.density,
            topology: match self.topology {
                TopologyArg::Line => FlowTopology::Line,
                TopologyArg::Tree => FlowTopology::Tree,
            },
            ..GenParams::default()
        })
    }
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Heuristic thresholds, applied to both pruners.
    #[arg(long, value_delimiter = ',', default_value = "0.8,0.6,0.4,0.2")]
    thresholds: Vec<f64>,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Directory receiving chain.pl and infra.pl.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn parse_pin(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((a, b)) if !a.is_empty() && !b.is_empty() => Ok((a.trim().into(), b.trim().into())),
        _ => Err(format!("expected svc=node, got {s:?}")),
    }
}

fn parse_group(s: &str) -> Result<Vec<String>, String> {
    let v: Vec<String> = s.split(',').map(|x| x.trim().to_owned()).collect();
    if v.len() < 2 || v.iter().any(String::is_empty) {
        return Err(format!("expected a comma-separated list of services, got {s:?}"));
    }
    Ok(v)
}

fn parse_pair(s: &str) -> Result<(String, String), String> {
    match parse_group(s)?.as_slice() {
        [a, b] => Ok((a.clone(), b.clone())),
        _ => Err(format!("expected exactly two services, got {s:?}")),
    }
}

fn read(path: &Path) -> Result<String, SolveError> {
    fs::read_to_string(path).map_err(|source| SolveError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), SolveError> {
    fs::write(path, text).map_err(|source| SolveError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn run_solve(args: SolveArgs) -> Result<(), SolveError> {
    let chain_files = args
        .chain
        .iter()
        .map(|p| Ok((p.display().to_string(), read(p)?)))
        .collect::<Result<Vec<_>, SolveError>>()?;
    let infra_text = read(&args.infra)?;
    let infra_name = args.infra.display().to_string();
    let (chains, infra) = load_problem(&chain_files, (&infra_name, &infra_text))?;

    let pre = match &args.existing {
        Some(p) => import_preallocation(&deployment_from_json(&read(p)?)?, &infra)?,
        None => PreAllocation::default(),
    };
    let mut query = QueryConstraints::default();
    for (s, n) in &args.pin {
        if query.pins.insert(ServiceId::new(s), NodeId::new(n)).is_some() {
            return Err(SolveError::Request(format!("service {s} pinned twice")));
        }
    }
    query.same_node = args
        .same_node
        .iter()
        .map(|g| g.iter().map(ServiceId::new).collect())
        .collect();
    query.different_node = args
        .diff_node
        .iter()
        .map(|(a, b)| (ServiceId::new(a), ServiceId::new(b)))
        .collect();

    let req = SolveRequest {
        chain_id: args.chain_id.map(ChainId::new),
        mode: match args.mode {
            ModeArg::Exhaustive => Mode::Exhaustive,
            ModeArg::Heuristic => Mode::Heuristic {
                thr_hw: args.thr_hw.unwrap_or(0.0),
                thr_qos: args.thr_qos.unwrap_or(0.0),
            },
        },
        radius: args.radius,
        query,
        pre: pre.clone(),
        top_k: args.top,
        qos_mode: match args.qos_mode {
            QosArg::Path => QosMode::Path,
            QosArg::PerLink => QosMode::PerLink,
        },
        collapse: args.collapse.map(|c| match c {
            CollapseArg::Modal => Collapse::Modal,
            CollapseArg::Truncate => Collapse::Truncate,
        }),
        workers: args.workers,
        component_cap: args.component_cap,
        ..SolveRequest::default()
    };
    let answers = engine::solve(&req, &chains, &infra)?;

    let format = match args.format {
        FormatArg::Json => Format::Json,
        FormatArg::Table => Format::Table,
    };
    let text = if args.group_by_placement {
        render_groups(&group_by_placement(&answers), format)
    } else {
        render(&answers, format)
    };
    let _ = io::stdout().write_all(text.as_bytes());

    if let Some(path) = &args.export {
        match answers.first() {
            Some(best) => {
                let chain = chains
                    .iter()
                    .find(|c| c.id == best.chain)
                    .expect("answers refer to a loaded chain");
                write(path, &deployment_to_json(&export_deployment(best, chain, &pre)))?;
            }
            None => eprintln!("no eligible placement; {} not written", path.display()),
        }
    }
    Ok(())
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Returns whether every verdict passed.
fn run_bench(args: BenchArgs) -> Result<bool, SolveError> {
    if let Some(t) = args.thresholds.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(SolveError::Request(format!("threshold {t} is outside [0, 1]")));
    }
    let (chain, infra) = generate_instance(&args.instance.params()?);
    let rows = run_comparison(&chain, &infra, &args.thresholds, &SolveRequest::default());

    let mut out = csv::Writer::from_writer(io::stdout());
    let csv_err = |e: csv::Error| SolveError::Request(format!("writing report: {e}"));
    out.write_record([
        "mode",
        "threshold",
        "answers",
        "distinct_placements",
        "millis",
        "subset_ok",
        "monotone_ok",
    ])
    .map_err(csv_err)?;
    let mut ok = true;
    for r in &rows {
        if let Some(e) = &r.error {
            eprintln!("{} {}: {e}", r.mode, fmt_opt(r.threshold));
        }
        ok &= r.subset_ok != Some(false) && r.monotone_ok != Some(false);
        out.write_record([
            r.mode.to_string(),
            fmt_opt(r.threshold),
            r.answers.to_string(),
            r.distinct_placements.to_string(),
            format!("{:.3}", r.millis),
            fmt_opt(r.subset_ok),
            fmt_opt(r.monotone_ok),
        ])
        .map_err(csv_err)?;
    }
    out.flush().map_err(|e| SolveError::Request(format!("writing report: {e}")))?;
    Ok(ok)
}

fn run_gen(args: GenArgs) -> Result<(), SolveError> {
    let (chain, infra) = generate_instance(&args.instance.params()?);
    fs::create_dir_all(&args.out_dir).map_err(|source| SolveError::Io {
        path: args.out_dir.display().to_string(),
        source,
    })?;
    write(&args.out_dir.join("chain.pl"), &render_chains(&[chain]))?;
    write(&args.out_dir.join("infra.pl"), &render_infrastructure(&infra))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => run_solve(a).map(|()| true),
        Command::Bench(a) => run_bench(a),
        Command::Gen(a) => run_gen(a).map(|()| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed: heuristic answers are not a subset of the less pruned runs");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
