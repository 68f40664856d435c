use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use geodisco::geo::{CoordinationArea, GeoPoint, NodeId};
use geodisco::sim::{
    generate_churn, generate_scenario, ChurnSpec, GenerateSpec, MetricsSeries, Placement, RadiusLaw, Region,
    Scenario, Simulation,
};
use geodisco::spectrum::{greedy_assign, total_conflict, InterferenceGraph};
use geodisco::wire::{decode_bytes, encode, DiscoveryItem, Timestamp, FRAME_LEN};

/// Exit code for bad arguments or input; clap uses the same for usage errors.
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 1;

#[derive(Parser)]
#[command(name = "geodisco", version, about = "Gossip discovery of overlapping radio coordination areas")]
struct Cli {
    /// Print per-round progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    /// Directory for outputs whose path is not given explicitly.
    #[arg(long, env = "GEODISCO_OUT_DIR", global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a scenario file.
    Gen(GenArgs),
    /// Simulate a scenario and write per-round metrics.
    Run(RunArgs),
    /// Simulate a scenario with steady join/leave churn.
    ChurnRun(ChurnArgs),
    /// Decode a hex-encoded 56-byte frame.
    Inspect { hex: String },
    /// Encode one discovery item as hex.
    Encode(EncodeArgs),
    /// Discover, then assign channels on the resulting interference graph.
    Assign(AssignArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    /// Width x height in meters, e.g. 10000x10000.
    #[arg(long, default_value = "10000x10000")]
    region: String,
    /// Fixed radius `300` or uniform range `100..500`, in meters.
    #[arg(long, default_value = "300")]
    radius: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of seed nodes.
    #[arg(long, default_value_t = 1)]
    seeds: usize,
    /// Clustered placement as `CLUSTERS:SPREAD_M`.
    #[arg(long)]
    clustered: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u64).range(1..))]
    rounds: u64,
    /// Overrides the scenario's rng seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Metrics CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Final candidate lists as CSV.
    #[arg(long)]
    candidates: Option<PathBuf>,
}

#[derive(Args)]
struct ChurnArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Fraction of the initial nodes leaving, and joining, each round.
    #[arg(long, default_value_t = 0.01)]
    rate: f64,
    /// Region the joiners are placed in, as for `gen`.
    #[arg(long, default_value = "10000x10000")]
    region: String,
    #[arg(long, default_value = "300")]
    radius: String,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    id: u64,
    #[arg(long, allow_hyphen_values = true)]
    lat: f64,
    #[arg(long, allow_hyphen_values = true)]
    lon: f64,
    #[arg(long)]
    radius: f64,
    #[arg(long, default_value = "0.0.0.0")]
    address: std::net::IpAddr,
    #[arg(long, default_value_t = 0)]
    timestamp: u64,
}

#[derive(Args)]
struct AssignArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    channels: u64,
    /// Discovery rounds to run before assigning.
    #[arg(long, default_value_t = 30)]
    rounds: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: u8,
    msg: String,
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, msg: msg.into() }
}

fn io(msg: impl Into<String>) -> Failure {
    Failure { code: EXIT_IO, msg: msg.into() }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out_dir = cli.out_dir.clone();
    let result = match cli.cmd {
        Cmd::Gen(a) => cmd_gen(a, out_dir.as_deref()),
        Cmd::Run(a) => cmd_run(a, None, out_dir.as_deref(), cli.verbose),
        Cmd::ChurnRun(a) => cmd_churn(a, out_dir.as_deref(), cli.verbose),
        Cmd::Inspect { hex } => cmd_inspect(&hex),
        Cmd::Encode(a) => cmd_encode(a),
        Cmd::Assign(a) => cmd_assign(a, out_dir.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn parse_region(text: &str) -> Result<Region, Failure> {
    let (w, h) = text
        .split_once(['x', 'X'])
        .ok_or_else(|| usage(format!("region `{text}` is not WIDTHxHEIGHT")))?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| usage(format!("region `{text}`: {e}")));
    Region::meters(num(w)?, num(h)?).map_err(|e| usage(e.to_string()))
}

fn parse_radius(text: &str) -> Result<RadiusLaw, Failure> {
    RadiusLaw::parse(text).ok_or_else(|| usage(format!("radius `{text}` is neither R nor MIN..MAX")))
}

fn output_path(explicit: Option<PathBuf>, out_dir: Option<&Path>, default_name: &str) -> Option<PathBuf> {
    explicit.or_else(|| out_dir.map(|d| d.join(default_name)))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| io(format!("cannot write {}: {e}", path.display())))
}

fn cmd_gen(a: GenArgs, out_dir: Option<&Path>) -> Result<(), Failure> {
    let region = parse_region(&a.region)?;
    let radius = parse_radius(&a.radius)?;
    let placement = match a.clustered.as_deref() {
        None => Placement::Uniform,
        Some(spec) => {
            let (c, s) = spec
                .split_once(':')
                .ok_or_else(|| usage("clustered placement is CLUSTERS:SPREAD_M"))?;
            Placement::Clustered {
                clusters: c.parse().map_err(|_| usage(format!("bad cluster count `{c}`")))?,
                spread_m: s.parse().map_err(|_| usage(format!("bad spread `{s}`")))?,
            }
        }
    };
    let spec = GenerateSpec {
        n: a.n as usize,
        region,
        radius,
        placement,
        seed_count: a.seeds,
        rng_seed: a.seed,
    };
    let scenario = generate_scenario(&spec).map_err(|e| usage(e.to_string()))?;
    let text = scenario.to_text();
    match output_path(a.out, out_dir, &format!("scenario-n{}-s{}.txt", a.n, a.seed)) {
        Some(path) => {
            write(&path, &text)?;
            println!("wrote {} nodes to {}", scenario.nodes.len(), path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io(format!("cannot read {}: {e}", path.display())))?;
    Scenario::from_text(&text).map_err(|e| io(format!("{}: {e}", path.display())))
}

fn simulate(scenario: Scenario, rounds: u64, verbose: bool) -> Result<Simulation, Failure> {
    let mut sim = Simulation::new(scenario).map_err(|e| io(e.to_string()))?;
    for _ in 0..rounds {
        let m = sim.step();
        if verbose {
            eprintln!("round {:>4}  recall {:.4}  live {}", m.round, m.mean_recall, m.live_nodes);
        }
    }
    Ok(sim)
}

fn report(series: &MetricsSeries) {
    match series.convergence_round(0.99) {
        Some(r) => println!("convergence round (recall >= 0.99): {r}"),
        None => println!("convergence round (recall >= 0.99): not reached"),
    }
    if let Some(last) = series.last() {
        println!("final recall: {:.6}", last.mean_recall);
        if let Some(settled) = last.settled_mean_recall {
            println!("final settled recall: {settled:.6}");
        }
    }
    println!("traffic per node: {:.1} B/s", series.traffic_bytes_per_second());
}

fn cmd_run(a: RunArgs, scenario: Option<Scenario>, out_dir: Option<&Path>, verbose: bool) -> Result<(), Failure> {
    let mut scenario = match scenario {
        Some(s) => s,
        None => load(&a.scenario)?,
    };
    if let Some(seed) = a.seed {
        scenario.rng_seed = seed;
    }
    let sim = simulate(scenario, a.rounds, verbose)?;
    report(sim.metrics());
    if let Some(path) = output_path(a.out, out_dir, "metrics.csv") {
        write(&path, &sim.metrics().to_csv())?;
    }
    if let Some(path) = a.candidates {
        let mut text = String::from("owner,node_id,address,utility\n");
        for (owner, cl) in sim.candidate_lists() {
            for line in cl.to_records().lines().skip(1) {
                text.push_str(&format!("{owner},{line}\n"));
            }
        }
        write(&path, &text)?;
    }
    Ok(())
}

fn cmd_churn(a: ChurnArgs, out_dir: Option<&Path>, verbose: bool) -> Result<(), Failure> {
    let mut scenario = load(&a.run.scenario)?;
    if let Some(seed) = a.run.seed {
        scenario.rng_seed = seed;
    }
    let spec = ChurnSpec {
        rate: a.rate,
        start_round: 1,
        end_round: a.run.rounds,
        region: parse_region(&a.region)?,
        radius: parse_radius(&a.radius)?,
        rng_seed: scenario.rng_seed,
    };
    generate_churn(&mut scenario, &spec).map_err(|e| usage(e.to_string()))?;
    cmd_run(a.run, Some(scenario), out_dir, verbose)
}

fn cmd_inspect(hex_text: &str) -> Result<(), Failure> {
    let bytes = hex::decode(hex_text.trim()).map_err(|e| usage(format!("malformed hex: {e}")))?;
    let item = decode_bytes(&bytes).map_err(|e| usage(e.to_string()))?;
    println!("{:<22}{}", "Identifier", item.id);
    println!("{:<22}{}, {}", "Location", item.location().lat(), item.location().lon());
    println!("{:<22}{} m", "Coordination radius", item.radius());
    println!("{:<22}{}", "IPv4 or IPv6 address", item.address());
    println!("{:<22}{} ms", "Timestamp", item.timestamp);
    Ok(())
}

fn cmd_encode(a: EncodeArgs) -> Result<(), Failure> {
    let location = GeoPoint::new(a.lat, a.lon).map_err(|e| usage(e.to_string()))?;
    let area = CoordinationArea::new(location, a.radius).map_err(|e| usage(e.to_string()))?;
    let frame = encode(&DiscoveryItem::new(NodeId(a.id), area, a.address, Timestamp(a.timestamp)));
    debug_assert_eq!(frame.as_bytes().len(), FRAME_LEN);
    println!("{}", frame.to_hex());
    Ok(())
}

fn cmd_assign(a: AssignArgs, out_dir: Option<&Path>) -> Result<(), Failure> {
    let scenario = load(&a.scenario)?;
    let sim = simulate(scenario, a.rounds, false)?;
    let lists = sim.candidate_lists();
    let graph = InterferenceGraph::from_candidate_lists(lists.values());
    let assignment = greedy_assign(&graph, a.channels as usize).map_err(|e| usage(e.to_string()))?;
    println!(
        "{} nodes, {} edges, {} channels, total conflict {:.3}",
        graph.node_count(),
        graph.edge_count(),
        a.channels,
        total_conflict(&graph, &assignment)
    );
    match output_path(a.out, out_dir, "assignment.csv") {
        Some(path) => write(&path, &assignment.to_csv(&graph))?,
        None => print!("{}", assignment.to_csv(&graph)),
    }
    Ok(())
}
