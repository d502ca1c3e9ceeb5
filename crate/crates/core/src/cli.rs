//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::analytic::FailureType;
use crate::capacity::{
    assign_capacities, builtin_dataset, parse_dataset, remove_richest_module, CapacityAssignment, Placement, Resource,
    ServerClass,
};
use crate::classify::{classify, measurements_from_csv};
use crate::error::{Error, Result};
use crate::reachability::{accessible_server_ratio, partition, remaining_capacity_ratio};
use crate::reconcile::{reconcile_table, Status};
use crate::report::{gnuplot_script, reliability_points, Format, Point, Report, Series};
use crate::simulation::{
    classed_sweep, simulate_nmttf, survival_sweep_2d_on, survival_sweep_on, threads_from_env, ElementClass,
    ExperimentPlan, Metric,
};
use crate::topology::{build, serialize_topology, GatewayPolicy, TopologyKind, TopologyParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_RECONCILE_FAIL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "dcn-robust", version, about = "Reliability and survivability of data center network topologies")]
struct Cli {
    /// Master seed of every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo samples (per grid point for sweeps).
    #[arg(long, global = true)]
    samples: Option<u32>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// max, min or count=<g>
    #[arg(long, global = true, value_parser = parse_gateway_policy)]
    gateway_policy: Option<GatewayPolicy>,
    /// Also write a gnuplot script plotting the CSV written to --out.
    #[arg(long, global = true)]
    gnuplot: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PlacementArg {
    Balanced,
    Unbalanced,
    Both,
}

#[derive(Debug, Args)]
struct TopologyArgs {
    /// three-layer, fat-tree, bcube or dcell
    #[arg(long, value_parser = parse_kind)]
    topology: Option<TopologyKind>,
    /// Switch ports (core ports facing aggregation for three-layer).
    #[arg(long)]
    n: Option<u32>,
    /// Recursion level of BCube and DCell.
    #[arg(long)]
    l: Option<u32>,
    /// Edge switches per aggregation pair (three-layer).
    #[arg(long, default_value_t = 12)]
    n_a: u32,
    /// Servers per edge switch (three-layer).
    #[arg(long, default_value_t = 48)]
    n_e: u32,
    /// Aggregation pairs (three-layer); defaults to n/2.
    #[arg(long)]
    pairs: Option<u32>,
    /// Link the two core switches (three-layer).
    #[arg(long)]
    core_core_link: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a topology, print its element counts and optionally save it.
    Gen {
        #[command(flatten)]
        topology: TopologyArgs,
    },
    /// Simulated and closed-form mean time to the first disconnection.
    Mttf {
        #[command(flatten)]
        topology: TopologyArgs,
        #[arg(long, value_parser = parse_failure)]
        failure: Option<FailureType>,
        /// Experiment plan document (JSON); replaces the topology flags.
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Survivability metrics over a grid of failed-element ratios.
    Sweep {
        #[command(flatten)]
        topology: TopologyArgs,
        #[arg(long, value_parser = parse_failure)]
        failure: Option<FailureType>,
        /// start:stop:step or a comma separated list.
        #[arg(long, value_parser = parse_grid)]
        fer: Option<Grid>,
        /// asr, sc, aspl, rcr_cpu, rcr_mem
        #[arg(long, value_delimiter = ',', value_parser = parse_metric)]
        metrics: Vec<Metric>,
        /// google, synthetic or a CSV file; needed by the rcr metrics.
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long, value_enum, default_value_t = PlacementArg::Balanced)]
        placement: PlacementArg,
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Survivability over the product of two failure-type grids.
    Sweep2d {
        #[command(flatten)]
        topology: TopologyArgs,
        #[arg(long, value_parser = parse_grid)]
        fer_link: Option<Grid>,
        #[arg(long, value_parser = parse_grid)]
        fer_switch: Option<Grid>,
        #[arg(long, value_parser = parse_grid)]
        fer_server: Option<Grid>,
        #[arg(long, value_delimiter = ',', value_parser = parse_metric)]
        metrics: Vec<Metric>,
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Per-class failure sweep on a three-layer topology.
    ClassedSweep {
        #[command(flatten)]
        topology: TopologyArgs,
        /// edge-switch, agg-switch, core-switch, edge-link, agg-link or core-link
        #[arg(long, value_parser = parse_class)]
        swept: ElementClass,
        #[arg(long, value_parser = parse_grid)]
        fer: Grid,
        /// class=ratio, repeatable
        #[arg(long, value_parser = parse_fixed)]
        fixed: Vec<(ElementClass, f64)>,
        #[arg(long, value_delimiter = ',', value_parser = parse_metric)]
        metrics: Vec<Metric>,
    },
    /// Capacity placement, targeted module removal and random-failure RCR.
    Capacity {
        #[command(flatten)]
        topology: TopologyArgs,
        #[arg(long, default_value = "synthetic")]
        dataset: String,
        #[arg(long, value_enum, default_value_t = PlacementArg::Both)]
        placement: PlacementArg,
        /// Optional random-failure sweep reporting asr, rcr_cpu and rcr_mem.
        #[arg(long, value_parser = parse_grid)]
        fer: Option<Grid>,
        #[arg(long, value_parser = parse_failure, default_value = "switch")]
        failure: FailureType,
    },
    /// Grade topology families from sweep reports at a ratio of 0.4.
    Classify {
        /// CSV reports produced by `sweep`.
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
    },
    /// Compare generated element counts with the published configurations.
    #[command(name = "reconcile-table1")]
    ReconcileTable1,
}

fn parse_kind(s: &str) -> std::result::Result<TopologyKind, String> {
    TopologyKind::parse(s).ok_or_else(|| format!("unknown topology {s:?}"))
}

fn parse_failure(s: &str) -> std::result::Result<FailureType, String> {
    FailureType::parse(s).ok_or_else(|| format!("unknown failure type {s:?} (link, switch or server)"))
}

fn parse_metric(s: &str) -> std::result::Result<Metric, String> {
    Metric::parse(s).ok_or_else(|| format!("unknown metric {s:?}"))
}

fn parse_class(s: &str) -> std::result::Result<ElementClass, String> {
    ElementClass::parse(s).ok_or_else(|| format!("unknown element class {s:?}"))
}

fn parse_gateway_policy(s: &str) -> std::result::Result<GatewayPolicy, String> {
    GatewayPolicy::parse(s).ok_or_else(|| format!("expected max, min or count=<g>, got {s:?}"))
}

fn parse_fixed(s: &str) -> std::result::Result<(ElementClass, f64), String> {
    let (class, ratio) = s.split_once('=').ok_or("expected class=ratio")?;
    let ratio: f64 = ratio.parse().map_err(|_| format!("bad ratio {ratio:?}"))?;
    Ok((parse_class(class)?, ratio))
}

/// Failed-element ratios given on the command line.
#[derive(Debug, Clone, PartialEq)]
struct Grid(Vec<f64>);

fn parse_grid(s: &str) -> std::result::Result<Grid, String> {
    grid_points(s).map(Grid)
}

/// Parses `start:stop:step` (both ends included within 1e-9) or a comma
/// separated list of ratios.
pub fn grid_points(s: &str) -> std::result::Result<Vec<f64>, String> {
    let num = |x: &str| x.trim().parse::<f64>().map_err(|_| format!("bad number {x:?}"));
    let parts: Vec<&str> = s.split(':').collect();
    match parts.len() {
        1 => s.split(',').map(num).collect(),
        3 => {
            let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
            if !(step > 0.0) || stop < start {
                return Err(format!("grid {s:?} needs step > 0 and start <= stop"));
            }
            let mut out = Vec::new();
            let mut k = 0u32;
            loop {
                let x = start + f64::from(k) * step;
                if x > stop + 1e-9 {
                    break;
                }
                // snap accumulated binary noise: 0.1 * 3 -> 0.3
                let x = if (x - stop).abs() <= 1e-9 { stop } else { (x * 1e12).round() / 1e12 };
                out.push(x);
                k += 1;
                if k > 1_000_000 {
                    return Err(format!("grid {s:?} has too many points"));
                }
            }
            Ok(out)
        }
        _ => Err(format!("expected start:stop:step or a list, got {s:?}")),
    }
}

struct Globals {
    seed: Option<u64>,
    samples: Option<u32>,
    out: Option<PathBuf>,
    format: Format,
    gateway_policy: Option<GatewayPolicy>,
    gnuplot: Option<PathBuf>,
    threads: usize,
}

impl TopologyArgs {
    fn params(&self, g: &Globals) -> Result<TopologyParams> {
        let kind = self
            .topology
            .ok_or_else(|| Error::Config("topology: --topology is required".into()))?;
        let need = |v: Option<u32>, name: &str| {
            v.ok_or_else(|| Error::Config(format!("{name}: required for {kind}")))
        };
        let p = match kind {
            TopologyKind::ThreeLayer => {
                let pairs = match (self.pairs, self.n) {
                    (Some(p), _) => p,
                    (None, Some(n)) if n % 2 == 0 => n / 2,
                    (None, Some(n)) => return Err(Error::Config(format!("n: core ports must be even, got {n}"))),
                    (None, None) => return Err(Error::Config("pairs: required for three-layer (or --n)".into())),
                };
                TopologyParams::three_layer(self.n_a, self.n_e, pairs).with_core_core_link(self.core_core_link)
            }
            TopologyKind::FatTree => TopologyParams::fat_tree(need(self.n, "n")?),
            TopologyKind::BCube => TopologyParams::bcube(need(self.n, "n")?, need(self.l, "l")?),
            TopologyKind::DCell => TopologyParams::dcell(need(self.n, "n")?, need(self.l, "l")?),
        };
        let p = p.with_gateway_policy(g.gateway_policy.unwrap_or_default());
        p.validate().map_err(|e| Error::Config(format!("topology: {e}")))?;
        Ok(p)
    }
}

/// Runs the command line `args` (program name first) and returns the exit
/// status. Results go to `stdout` unless `--out` is given.
pub fn run(args: impl IntoIterator<Item = impl Into<OsString> + Clone>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(stdout, "{}", e.render());
            return EXIT_OK;
        }
    };
    let globals = Globals {
        seed: cli.seed,
        samples: cli.samples,
        out: cli.out,
        format: cli.format.into(),
        gateway_policy: cli.gateway_policy,
        gnuplot: cli.gnuplot,
        threads: threads_from_env(),
    };
    match dispatch(cli.command, &globals, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_CONFIG
        }
    }
}

fn dispatch(command: Command, g: &Globals, stdout: &mut dyn Write) -> Result<i32> {
    if g.gnuplot.is_some() && (g.out.is_none() || g.format != Format::Csv) {
        return Err(Error::Config("gnuplot: needs --out with --format csv".into()));
    }
    match command {
        Command::Gen { topology } => {
            let params = topology.params(g)?;
            let t = build(&params)?;
            writeln!(
                stdout,
                "servers={} switches={} links={}",
                t.server_count(),
                t.switch_count(),
                t.edge_count()
            )?;
            if let Some(path) = &g.out {
                std::fs::write(path, serialize_topology(&t))?;
            }
            Ok(EXIT_OK)
        }
        Command::Mttf { topology, failure, plan } => {
            let plan = match plan {
                Some(path) => apply_globals(load_plan(&path)?, g),
                None => {
                    let failure = failure.ok_or_else(|| Error::Config("failure: --failure is required".into()))?;
                    apply_globals(ExperimentPlan::reliability(topology.params(g)?, failure), g)
                }
            };
            let result = simulate_nmttf(&plan)?;
            let mut report = Report::new(plan.master_seed, &plan)?;
            if let Some(note) = &result.note {
                report.note(note.clone());
            }
            report.push(Series::new(&plan.topology, result.failure.name(), reliability_points(&result)));
            emit(&report, g, stdout)
        }
        Command::Sweep {
            topology,
            failure,
            fer,
            metrics,
            dataset,
            placement,
            plan,
        } => {
            let plan = match plan {
                Some(path) => apply_globals(load_plan(&path)?, g),
                None => {
                    let failure = failure.ok_or_else(|| Error::Config("failure: --failure is required".into()))?;
                    let grid = fer.ok_or_else(|| Error::Config("fer: --fer is required".into()))?.0;
                    let mut p = ExperimentPlan::sweep(topology.params(g)?, failure, grid);
                    if !metrics.is_empty() {
                        p = p.with_metrics(metrics);
                    }
                    apply_globals(p, g)
                }
            };
            plan.validate()?;
            let topo = build(&plan.topology)?;
            let placement = match placement {
                PlacementArg::Balanced | PlacementArg::Both => Placement::Balanced,
                PlacementArg::Unbalanced => Placement::Unbalanced,
            };
            let capacity = dataset
                .map(|d| assign_capacities(&topo, &load_dataset(&d)?, placement))
                .transpose()?;
            let rows = survival_sweep_on(&topo, &plan, capacity.as_ref())?;
            let mut report = Report::new(plan.master_seed, &plan)?;
            report.push(Series::new(
                &plan.topology,
                plan.failures[0].name(),
                rows.iter().map(Point::from).collect(),
            ));
            emit(&report, g, stdout)
        }
        Command::Sweep2d {
            topology,
            fer_link,
            fer_switch,
            fer_server,
            metrics,
            plan,
        } => {
            let plan = match plan {
                Some(path) => apply_globals(load_plan(&path)?, g),
                None => {
                    let axes: Vec<(FailureType, Vec<f64>)> = [
                        (FailureType::Link, fer_link),
                        (FailureType::Switch, fer_switch),
                        (FailureType::Server, fer_server),
                    ]
                    .into_iter()
                    .filter_map(|(f, grid)| grid.map(|g| (f, g.0)))
                    .collect();
                    let [a, b]: [(FailureType, Vec<f64>); 2] = axes.try_into().map_err(|_| {
                        Error::Config("fer: exactly two of --fer-link, --fer-switch, --fer-server are required".into())
                    })?;
                    let mut p = ExperimentPlan::sweep_2d(topology.params(g)?, a, b);
                    if !metrics.is_empty() {
                        p = p.with_metrics(metrics);
                    }
                    apply_globals(p, g)
                }
            };
            plan.validate()?;
            let topo = build(&plan.topology)?;
            let rows = survival_sweep_2d_on(&topo, &plan, None)?;
            let mut report = Report::new(plan.master_seed, &plan)?;
            let label = format!("{}+{}", plan.failures[0].name(), plan.failures[1].name());
            report.push(Series::new(&plan.topology, label, rows.iter().map(Point::from).collect()));
            emit(&report, g, stdout)
        }
        Command::ClassedSweep {
            mut topology,
            swept,
            fer,
            fixed,
            metrics,
        } => {
            if topology.topology.is_none() {
                topology.topology = Some(TopologyKind::ThreeLayer);
            }
            let params = topology.params(g)?;
            let fer = fer.0;
            let mut plan = ExperimentPlan::sweep(params, swept.failure_type(), fer.clone());
            if !metrics.is_empty() {
                plan = plan.with_metrics(metrics);
            }
            let plan = apply_globals(plan, g);
            let rows = classed_sweep(&plan, swept, &fer, &fixed, None)?;
            let echo = json!({
                "plan": plan,
                "swept": swept,
                "fixed": fixed.iter().map(|(c, r)| json!({"class": c, "ratio": r})).collect::<Vec<_>>(),
            });
            let mut report = Report::new(plan.master_seed, &echo)?;
            let mut label = swept.name().to_string();
            for (c, r) in &fixed {
                label.push_str(&format!(";{c}={r}"));
            }
            report.push(Series::new(&plan.topology, label, rows.iter().map(Point::from).collect()));
            emit(&report, g, stdout)
        }
        Command::Capacity {
            topology,
            dataset,
            placement,
            fer,
            failure,
        } => {
            let params = topology.params(g)?;
            let topo = build(&params)?;
            let classes = load_dataset(&dataset)?;
            let placements = match placement {
                PlacementArg::Balanced => vec![Placement::Balanced],
                PlacementArg::Unbalanced => vec![Placement::Unbalanced],
                PlacementArg::Both => vec![Placement::Balanced, Placement::Unbalanced],
            };
            let seed = g.seed.unwrap_or(0);
            let echo = json!({
                "topology": params,
                "dataset": dataset,
                "placements": placements,
                "fer": fer.as_ref().map(|g| &g.0),
                "failure": failure,
                "samples": g.samples,
            });
            let mut report = Report::new(seed, &echo)?;
            if params.kind != TopologyKind::ThreeLayer {
                report.note("targeted removal outside three-layer topologies is experimental");
            }
            for placement in placements {
                let assignment = assign_capacities(&topo, &classes, placement)?;
                report.push(Series::new(&params, format!("targeted;{placement}"), targeted_points(&topo, &assignment)?));
                if let Some(grid) = &fer {
                    let plan = apply_globals(
                        ExperimentPlan::sweep(params, failure, grid.0.clone())
                            .with_metrics(vec![Metric::Asr, Metric::RcrCpu, Metric::RcrMem]),
                        g,
                    );
                    let rows = survival_sweep_on(&topo, &plan, Some(&assignment))?;
                    report.push(Series::new(
                        &params,
                        format!("{};{placement}", failure.name()),
                        rows.iter().map(Point::from).collect(),
                    ));
                }
            }
            emit(&report, g, stdout)
        }
        Command::Classify { input } => {
            let mut measurements = Vec::new();
            for path in &input {
                let text = read(path)?;
                measurements.extend(measurements_from_csv(&text).map_err(|e| match e {
                    Error::Parse { location, message } => Error::Parse {
                        location: format!("{} {location}", path.display()),
                        message,
                    },
                    other => other,
                })?);
            }
            let table = classify(&measurements)?;
            let text = match g.format {
                Format::Csv => table.to_csv(),
                Format::Json => {
                    let mut rows = Vec::new();
                    for line in table.to_csv().lines().skip(1) {
                        let f: Vec<&str> = line.split(',').collect();
                        rows.push(json!({"failure_type": f[0], "criterion": f[1], "topology": f[2], "grade": f[3]}));
                    }
                    let mut s = serde_json::to_string_pretty(&rows).expect("strings only");
                    s.push('\n');
                    s
                }
            };
            write_output(&text, g, stdout)?;
            Ok(EXIT_OK)
        }
        Command::ReconcileTable1 => {
            let rows = reconcile_table()?;
            let failed = rows.iter().any(|r| r.status == Status::Fail);
            let text = match g.format {
                Format::Csv => {
                    let mut s: String = rows.iter().map(|r| format!("{r}\n")).collect();
                    let count = |st| rows.iter().filter(|r| r.status == st).count();
                    s.push_str(&format!(
                        "summary: {} PASS, {} NOTE, {} FAIL\n",
                        count(Status::Pass),
                        count(Status::Note),
                        count(Status::Fail)
                    ));
                    s
                }
                Format::Json => {
                    let v: Vec<_> = rows
                        .iter()
                        .map(|r| {
                            json!({
                                "size": r.entry.size,
                                "name": r.entry.name,
                                "params": r.entry.params.label(),
                                "status": r.status.to_string(),
                                "built": r.built,
                                "published": r.entry.published,
                                "diff": r.diff(),
                                "note": if r.status == Status::Note { r.entry.known_discrepancy } else { None },
                            })
                        })
                        .collect();
                    let mut s = serde_json::to_string_pretty(&v).expect("plain values");
                    s.push('\n');
                    s
                }
            };
            write_output(&text, g, stdout)?;
            Ok(if failed { EXIT_RECONCILE_FAIL } else { EXIT_OK })
        }
    }
}

fn targeted_points(topo: &crate::topology::Topology, assignment: &CapacityAssignment) -> Result<Vec<Point>> {
    let mut points = Vec::new();
    for (resource, metric) in [(Resource::Cpu, "rcr_cpu"), (Resource::Memory, "rcr_mem")] {
        let degraded = remove_richest_module(topo, assignment, resource)?;
        let part = partition(&degraded);
        let module = assignment.richest_module(resource);
        points.push(Point::scalar(format!("removed_module_{resource}"), module as f64));
        points.push(Point::scalar(metric, remaining_capacity_ratio(&degraded, &part, &assignment.weights(resource))?));
        points.push(Point::scalar(
            format!("asr_{resource}_removal"),
            accessible_server_ratio(&part, topo.server_count())?,
        ));
    }
    Ok(points)
}

fn apply_globals(mut plan: ExperimentPlan, g: &Globals) -> ExperimentPlan {
    if let Some(seed) = g.seed {
        plan.master_seed = seed;
    }
    if let Some(samples) = g.samples {
        plan.samples = Some(samples);
    }
    if let Some(policy) = g.gateway_policy {
        plan.topology.gateway_policy = policy;
    }
    plan.threads = g.threads;
    plan
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn load_plan(path: &Path) -> Result<ExperimentPlan> {
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|e| {
        Error::parse(
            format!("{} line {} column {}", path.display(), e.line(), e.column()),
            e.to_string(),
        )
    })
}

fn load_dataset(name: &str) -> Result<Vec<ServerClass>> {
    match name {
        "google" | "synthetic" => builtin_dataset(name),
        path => parse_dataset(&read(Path::new(path))?),
    }
}

fn write_output(text: &str, g: &Globals, stdout: &mut dyn Write) -> Result<()> {
    match &g.out {
        Some(path) => std::fs::write(path, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit(report: &Report, g: &Globals, stdout: &mut dyn Write) -> Result<i32> {
    write_output(&report.render(g.format), g, stdout)?;
    if let (Some(script), Some(out)) = (&g.gnuplot, &g.out) {
        std::fs::write(script, gnuplot_script(report, &out.display().to_string()))?;
    }
    Ok(EXIT_OK)
}
