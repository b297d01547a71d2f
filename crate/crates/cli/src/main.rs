//! `fieldnet` command line: run scenarios and analyse their traces.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use fieldnet::analysis::report::{
    bound_report, census_report, dualloss_report, energy_report, graph_diff_report, yield_report, Report,
};
use fieldnet::analysis::{
    bound_audit, detect_dualloss, edge_set, energy_table, graph_diff, lint_trace, node_yield, packet_census,
    snapshots, BoundOverrides, View,
};
use fieldnet::engine::{parse_trace, run, write_trace, Scenario, Trace};
use fieldnet::model::{parse_edge_list, write_graph, write_tree};

const TRACE_FILE: &str = "trace.tsv";
const SNOOP_FILE: &str = "snoop.tsv";

#[derive(Parser)]
#[command(name = "fieldnet", version, about = "Sensor network collection simulator and trace analyzer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or a canned scenario (field, tc1, tc2, tc3).
    Run {
        scenario: String,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long, default_value = "fieldnet-out")]
        out: PathBuf,
    },
    /// Analyse a trace file, or a run directory.
    Analyze {
        trace: PathBuf,
        #[arg(long)]
        round: Option<u32>,
        #[arg(long, value_enum)]
        report: ReportKind,
        /// Which record set the trace holds; picks the file in a run directory.
        #[arg(long, default_value = "truth", value_parser = parse_view)]
        view: View,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
        /// Maximum neighbour count to use instead of the measured one.
        #[arg(long)]
        degree: Option<u64>,
        /// SYNC beacons per node to use instead of the measured count.
        #[arg(long)]
        sync_rounds: Option<u64>,
    },
    /// Compare consecutive edge-list graphs.
    DiffGraphs {
        #[arg(required = true, num_args = 2..)]
        graphs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Check a trace for structural problems.
    Lint { trace: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportKind {
    Yield,
    Census,
    Dualloss,
    Energy,
    Bound,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Jsonl,
    Both,
}

fn parse_view(s: &str) -> Result<View, String> {
    s.parse()
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { scenario, seed, out } => cmd_run(&scenario, seed, &out),
        Command::Analyze {
            trace,
            round,
            report,
            view,
            format,
            degree,
            sync_rounds,
        } => cmd_analyze(&trace, round, report, view, format, BoundOverrides { degree, sync_rounds }),
        Command::DiffGraphs { graphs, format } => cmd_diff(&graphs, format),
        Command::Lint { trace } => cmd_lint(&trace),
    }
}

/// Writes to stdout; a closed pipe ends the program quietly.
fn out(text: &str) {
    let mut stdout = std::io::stdout().lock();
    if let Err(e) = stdout.write_all(text.as_bytes()).and_then(|()| stdout.flush()) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: writing output: {e}");
        std::process::exit(1);
    }
}

fn emit(report: &Report, format: Format) {
    if format != Format::Jsonl {
        out(&report.table);
    }
    if format != Format::Table {
        out(&report.records);
    }
}

fn load_scenario(spec: &str, seed: Option<u64>) -> Result<Scenario> {
    let path = Path::new(spec);
    let mut sc = if path.exists() {
        let text = fs::read_to_string(path).with_context(|| format!("reading {spec}"))?;
        Scenario::from_toml(&text).with_context(|| format!("loading {spec}"))?
    } else {
        match Scenario::canned(spec, seed.unwrap_or(1)) {
            Some(sc) => sc,
            None => bail!("{spec} is neither a scenario file nor a canned scenario (field, tc1, tc2, tc3)"),
        }
    };
    if let Some(s) = seed {
        sc.seed = s;
    }
    Ok(sc)
}

fn cmd_run(spec: &str, seed: Option<u64>, out_dir: &Path) -> Result<ExitCode> {
    let sc = load_scenario(spec, seed)?;
    let result = run(&sc)?;
    fs::create_dir_all(out_dir.join("graphs")).with_context(|| format!("creating {}", out_dir.display()))?;
    fs::write(out_dir.join("scenario.toml"), sc.to_toml())?;
    fs::write(out_dir.join(TRACE_FILE), write_trace(&result.trace))?;
    fs::write(out_dir.join(SNOOP_FILE), write_trace(&result.snoop))?;
    fs::write(out_dir.join("metrics.json"), serde_json::to_string_pretty(&result.metrics)?)?;
    for snap in snapshots(&result.trace) {
        let name = format!("round{}-epoch{}.txt", snap.round, snap.epoch);
        let body = format!("{}{}", write_tree(&snap.tree), write_graph(&snap.graph));
        fs::write(out_dir.join("graphs").join(name), body)?;
    }
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    out(&format!(
        "{}: seed {}, {} rounds, {} trace records, {} snooped, written to {}\n",
        sc.name,
        sc.seed,
        sc.rounds,
        result.trace.len(),
        result.snoop.len(),
        out_dir.display()
    ));
    for rm in &result.metrics.rounds {
        let total: u32 = rm.yields.values().sum();
        let nodes = rm.yields.len();
        out(&format!(
            "round {}: {} nodes, {} readings collected, {} transmissions\n",
            rm.round,
            nodes,
            total,
            rm.tx_by_kind.values().sum::<u64>()
        ));
    }
    Ok(ExitCode::SUCCESS)
}

fn load_trace(path: &Path, view: View) -> Result<Trace> {
    let file = if path.is_dir() {
        path.join(match view {
            View::Truth => TRACE_FILE,
            View::Snooper => SNOOP_FILE,
        })
    } else {
        path.to_path_buf()
    };
    let text = fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
    let trace = parse_trace(&text).with_context(|| format!("parsing {}", file.display()))?;
    if trace.truncated {
        eprintln!("warning: {} ends in a truncated line", file.display());
    }
    Ok(trace)
}

fn need_round(round: Option<u32>) -> Result<u32> {
    round.context("--round is required for this report")
}

fn cmd_analyze(
    path: &Path,
    round: Option<u32>,
    report: ReportKind,
    view: View,
    format: Format,
    over: BoundOverrides,
) -> Result<ExitCode> {
    let trace = load_trace(path, view)?;
    let records = &trace.records;
    match report {
        ReportKind::Yield => {
            let r = need_round(round)?;
            let y = node_yield(records, r, trace.truncated).with_context(|| format!("round {r} not in trace"))?;
            emit(&yield_report(&y), format);
        }
        ReportKind::Census => {
            let r = need_round(round)?;
            let c = packet_census(records, r).with_context(|| format!("round {r} not in trace"))?;
            emit(&census_report(r, &c), format);
        }
        ReportKind::Dualloss => {
            let mut events = detect_dualloss(records, view);
            if let Some(r) = round {
                events.retain(|e| e.round == r);
            }
            emit(&dualloss_report(&events), format);
        }
        ReportKind::Energy => {
            let curve = fieldnet::energy::SocOcvCurve::default();
            let table = energy_table(records, round.map(|r| (r, r)), &curve);
            for w in &table.warnings {
                eprintln!("warning: {w}");
            }
            emit(&energy_report(&table), format);
        }
        ReportKind::Bound => {
            let r = need_round(round)?;
            let audit = bound_audit(records, r, over)?;
            emit(&bound_report(&audit), format);
            if !audit.passed() {
                eprintln!("bound exceeded in {}", audit.violations.join(", "));
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_diff(paths: &[PathBuf], format: Format) -> Result<ExitCode> {
    let mut sets = Vec::with_capacity(paths.len());
    for p in paths {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let list = parse_edge_list(&text).with_context(|| format!("parsing {}", p.display()))?;
        let graph = list.graph().with_context(|| format!("building {}", p.display()))?;
        sets.push(edge_set(&graph));
    }
    emit(&graph_diff_report(&graph_diff(&sets)), format);
    Ok(ExitCode::SUCCESS)
}

fn cmd_lint(path: &Path) -> Result<ExitCode> {
    let trace = load_trace(path, View::Truth)?;
    let issues = lint_trace(&trace.records);
    for i in &issues {
        out(&format!("record {}: {}\n", i.index + 1, i.message));
    }
    if issues.is_empty() {
        out(&format!("{} records, no issues\n", trace.records.len()));
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(2))
    }
}
