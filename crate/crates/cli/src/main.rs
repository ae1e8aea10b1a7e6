//! `pcgraph` — perfect-controllability analysis of undirected multi-agent
//! graphs from the command line.
//!
//! Exit codes: 0 perfect / controllable / success, 1 not perfect /
//! uncontrollable, 2 input error, 3 numerically indeterminate, 4 exact and
//! numeric verdicts disagree (`check --mode both`).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand, ValueEnum};

use pcgraph::census::{
    pc_census, random_census, reconstruct_base, render_census, SpectrumTarget, DEFAULT_SPECTRUM_TOL,
};
use pcgraph::construct::{enumerate_variants, run_script, ConstructionScript, Stage};
use pcgraph::exact::check_perfect_exact;
use pcgraph::leaders::{
    classify_all_leader_sets, kalman_controllable, partition_laplacian, pbh_controllable, render_classification,
    DEFAULT_PBH_TOL,
};
use pcgraph::spectral::{
    eigendecompose, render_numeric, verdict_from_report, NumericTolerances, Verdict, DEFAULT_TOL_ZERO,
};
use pcgraph::steering::{steer, FollowerSystem, SteeringStatus};
use pcgraph::{Graph, LeaderSet};

const EXIT_OK: u8 = 0;
const EXIT_NEGATIVE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_INDETERMINATE: u8 = 3;
const EXIT_DISAGREE: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "pcgraph", version, about = "Perfect controllability of multi-agent graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Exact,
    Numeric,
    Both,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide perfect controllability of a graph.
    Check {
        /// Graph file, edge list or JSON.
        graph: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        mode: Mode,
        /// Absolute eigengap tolerance [default: 1e-8 * max(1, lambda_max)].
        #[arg(long)]
        tol_gap: Option<f64>,
        /// Relative eigenvector-entry tolerance.
        #[arg(long, default_value_t = DEFAULT_TOL_ZERO)]
        tol_zero: f64,
    },
    /// Controllability for chosen leader sets.
    #[command(group(ArgGroup::new("which").required(true).args(["set", "all", "singletons"])))]
    Leaders {
        /// Graph file, edge list or JSON.
        graph: PathBuf,
        /// Comma-separated leader nodes, e.g. "1,3".
        #[arg(long)]
        set: Option<String>,
        /// Every nonempty leader set (n <= 20).
        #[arg(long)]
        all: bool,
        /// Every single-node leader set, with the perfect-controllability conclusion.
        #[arg(long)]
        singletons: bool,
        /// Tolerance of the eigenvector (PBH) test.
        #[arg(long, default_value_t = DEFAULT_PBH_TOL)]
        pbh_tol: f64,
    },
    /// Replay a construction script on a base graph.
    Construct {
        /// Construction script.
        script: PathBuf,
        /// Base graph on the 2k pair nodes.
        base: PathBuf,
        /// Enumerate every variant of a stage on the script result.
        #[arg(long)]
        enumerate: Option<Stage>,
    },
    /// Perfect-controllability census over small or random graphs.
    #[command(group(ArgGroup::new("kind").required(true).args(["n", "random"])))]
    Census {
        /// Exhaustive labeled census on n nodes (n <= 7).
        #[arg(long)]
        n: Option<usize>,
        /// Sampled census: "n,p,count,seed".
        #[arg(long)]
        random: Option<String>,
    },
    /// Base graphs whose union with an overlay has a given spectrum.
    Reconstruct {
        /// Target Laplacian spectrum, values separated by commas or whitespace.
        #[arg(long)]
        target_spectrum: PathBuf,
        /// Overlay edges as a graph file on the full node set.
        #[arg(long)]
        overlay: PathBuf,
        /// Largest allowed deviation of any sorted eigenvalue from the target.
        #[arg(long, default_value_t = DEFAULT_SPECTRUM_TOL)]
        tol: f64,
        /// Base edges range over nodes 1..=m [default: node count - 1].
        #[arg(long)]
        base_nodes: Option<usize>,
    },
    /// Minimum-energy steering of the followers.
    Steer {
        /// Graph file, edge list or JSON.
        graph: PathBuf,
        /// Comma-separated leader nodes.
        #[arg(long)]
        leaders: String,
        /// Follower target state, comma-separated, in ascending node order.
        #[arg(long, allow_hyphen_values = true)]
        target: String,
        /// Horizon.
        #[arg(long = "T")]
        horizon: f64,
        /// Follower initial state [default: zeros].
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
        /// Quadrature and integration intervals over the horizon.
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        /// Write the re-simulated follower trajectory as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Export a graph in DOT format.
    Export {
        /// Graph file, edge list or JSON.
        graph: PathBuf,
        /// Output DOT file.
        #[arg(long)]
        dot: PathBuf,
        /// Leader nodes to mark, comma-separated.
        #[arg(long)]
        leaders: Option<String>,
    },
}

/// Input problem: reported on stderr with exit code 2.
#[derive(Debug)]
struct InputError(String);

impl<E: std::fmt::Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

type CmdResult = Result<(String, u8), InputError>;

fn read(path: &Path) -> Result<String, InputError> {
    fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn read_graph(path: &Path) -> Result<Graph, InputError> {
    Graph::parse_any(&read(path)?).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn positive(name: &str, v: f64) -> Result<f64, InputError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(InputError(format!("--{name} must be a positive number, got {v}")))
    }
}

fn parse_vector(name: &str, text: &str) -> Result<Vec<f64>, InputError> {
    text.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| InputError(format!("--{name}: `{t}` is not a number")))
        })
        .collect()
}

fn cmd_check(graph: &Path, mode: Mode, tol_gap: Option<f64>, tol_zero: f64) -> CmdResult {
    if let Some(g) = tol_gap {
        positive("tol-gap", g)?;
    }
    positive("tol-zero", tol_zero)?;
    let g = read_graph(graph)?;
    let mut out = String::new();
    let exact = (mode != Mode::Numeric).then(|| check_perfect_exact(&g));
    let numeric = if mode == Mode::Exact {
        None
    } else {
        let report = eigendecompose(&g.laplacian())?;
        let verdict = verdict_from_report(&report, &NumericTolerances { gap: tol_gap, zero: tol_zero });
        Some((report, verdict))
    };
    if let Some(c) = &exact {
        out.push_str(&c.to_string());
    }
    if let Some((report, verdict)) = &numeric {
        out.push_str(&render_numeric(report, verdict));
    } else {
        let report = eigendecompose(&g.laplacian())?;
        let _ = writeln!(out, "spectrum: {}", report.render_eigenvalues());
    }
    let code = match (&exact, &numeric) {
        (Some(c), Some((_, v))) => {
            let exact_v = if c.is_perfect() { Verdict::Perfect } else { Verdict::NotPerfect };
            if v.is_decided() && v.verdict != exact_v {
                let _ = writeln!(out, "DISAGREEMENT: exact {exact_v}, numeric {}", v.verdict);
                EXIT_DISAGREE
            } else {
                let _ = writeln!(out, "verdict: {exact_v}");
                if c.is_perfect() {
                    EXIT_OK
                } else {
                    EXIT_NEGATIVE
                }
            }
        }
        (Some(c), None) => {
            if c.is_perfect() {
                EXIT_OK
            } else {
                EXIT_NEGATIVE
            }
        }
        (None, Some((_, v))) => match v.verdict {
            Verdict::Perfect => EXIT_OK,
            Verdict::NotPerfect => EXIT_NEGATIVE,
            Verdict::IndeterminateNumeric => EXIT_INDETERMINATE,
        },
        (None, None) => unreachable!("at least one mode runs"),
    };
    Ok((out, code))
}

fn cmd_leaders(graph: &Path, set: Option<&str>, all: bool, singletons: bool, pbh_tol: f64) -> CmdResult {
    positive("pbh-tol", pbh_tol)?;
    let g = read_graph(graph)?;
    let n = g.node_count();
    let mut out = String::new();
    if let Some(text) = set {
        let s = LeaderSet::parse(n, text)?;
        let kalman = kalman_controllable(&partition_laplacian(&g.laplacian(), &s)?);
        let pbh = pbh_controllable(&g, &s, pbh_tol);
        let word = |c: bool| if c { "controllable" } else { "uncontrollable" };
        let _ = writeln!(out, "{s} {}", word(kalman));
        let _ = writeln!(out, "  kalman: {}", word(kalman));
        let _ = writeln!(out, "  pbh: {} (tol={pbh_tol:e})", word(pbh.controllable));
        if let Some(lambda) = pbh.witness {
            let _ = writeln!(out, "  uncontrollable mode: eigenvalue {lambda:.4}");
        }
        if kalman != pbh.controllable {
            let _ = writeln!(out, "WARNING: kalman and pbh tests disagree");
        }
        return Ok((out, if kalman { EXIT_OK } else { EXIT_NEGATIVE }));
    }
    if all {
        let map = classify_all_leader_sets(&g)?;
        out.push_str(&render_classification(&map));
        let perfect = map.values().all(|&c| c);
        let _ = writeln!(out, "perfect: {}", if perfect { "yes" } else { "no" });
        return Ok((out, if perfect { EXIT_OK } else { EXIT_NEGATIVE }));
    }
    debug_assert!(singletons);
    let l = g.laplacian();
    let mut perfect = true;
    for v in g.nodes() {
        let s = LeaderSet::new(n, [v])?;
        let c = kalman_controllable(&partition_laplacian(&l, &s)?);
        perfect &= c;
        let _ = writeln!(out, "{v} {}", if c { "controllable" } else { "uncontrollable" });
    }
    let _ = writeln!(
        out,
        "perfect: {} (every leader set contains a singleton, and supersets of controllable sets stay controllable)",
        if perfect { "yes" } else { "no" }
    );
    Ok((out, if perfect { EXIT_OK } else { EXIT_NEGATIVE }))
}

fn cmd_construct(script: &Path, base: &Path, stage: Option<Stage>) -> CmdResult {
    let script =
        ConstructionScript::parse(&read(script)?).map_err(|e| InputError(format!("{}: {e}", script.display())))?;
    let base = read_graph(base)?;
    let run = run_script(&script, &base)?;
    let mut out = String::new();
    let _ = writeln!(out, "# validation log");
    for entry in &run.log {
        let _ = writeln!(out, "# {entry}");
    }
    match stage {
        None => {
            let _ = writeln!(out, "# result");
            out.push_str(&run.design.graph().to_edge_list());
        }
        Some(stage) => {
            let variants = enumerate_variants(&run.design, stage)?;
            let perfect = variants.iter().filter(|v| v.perfect).count();
            let _ = writeln!(out, "# stage {stage}: {} variants, {perfect} perfect", variants.len());
            for v in &variants {
                let ops: Vec<String> = v.ops.iter().map(|o| o.to_string()).collect();
                let crossings = v.crossings();
                let _ = writeln!(
                    out,
                    "# variant {}: {} | exact {} | crossings {}",
                    v.label,
                    ops.join("; "),
                    if v.perfect { "perfect" } else { "not-perfect" },
                    crossings.len()
                );
                for ((a, b), (c, d)) in crossings {
                    let _ = writeln!(out, "#   edge {a}-{b} meets edge {c}-{d}");
                }
                out.push_str(&v.design.graph().to_edge_list());
            }
        }
    }
    Ok((out, EXIT_OK))
}

fn cmd_census(n: Option<usize>, random: Option<&str>) -> CmdResult {
    if let Some(n) = n {
        let row = pc_census(n)?;
        return Ok((render_census(&[row]), EXIT_OK));
    }
    let spec = random.expect("clap enforces one of --n / --random");
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    let bad = || InputError(format!("--random expects n,p,count,seed, got `{spec}`"));
    let [n, p, count, seed] = parts[..] else {
        return Err(bad());
    };
    let n: usize = n.parse().map_err(|_| bad())?;
    let p: f64 = p.parse().map_err(|_| bad())?;
    let count: u64 = count.parse().map_err(|_| bad())?;
    let seed: u64 = seed.parse().map_err(|_| bad())?;
    let row = random_census(n, p, count, seed)?;
    let mut out = render_census(std::slice::from_ref(&row));
    match row.fraction_perfect() {
        Some(f) => {
            let _ = writeln!(out, "# sampled p={p} seed={seed} fraction_perfect={f}");
        }
        None => {
            let _ = writeln!(out, "# sampled p={p} seed={seed} fraction_perfect=undefined (no samples)");
        }
    }
    Ok((out, EXIT_OK))
}

fn cmd_reconstruct(target: &Path, overlay: &Path, tol: f64, base_nodes: Option<usize>) -> CmdResult {
    positive("tol", tol)?;
    let target = SpectrumTarget::parse(&read(target)?, tol)?;
    let overlay = read_graph(overlay)?;
    let edges: Vec<_> = overlay.edges().collect();
    let r = reconstruct_base(&target, &edges, overlay.node_count(), base_nodes)?;
    let mut out = r.render();
    if let Some(c) = r.pinned() {
        let _ = writeln!(out, "# pinned base graph");
        out.push_str(&c.base.to_edge_list());
    }
    Ok((out, EXIT_OK))
}

#[allow(clippy::too_many_arguments)]
fn cmd_steer(
    graph: &Path,
    leaders: &str,
    target: &str,
    horizon: f64,
    x0: Option<&str>,
    steps: usize,
    csv: Option<&Path>,
) -> CmdResult {
    positive("T", horizon)?;
    if steps == 0 {
        return Err(InputError("--steps must be at least 1".into()));
    }
    let target = parse_vector("target", target)?;
    let x0 = x0.map(|t| parse_vector("x0", t)).transpose()?;
    let g = read_graph(graph)?;
    let s = LeaderSet::parse(g.node_count(), leaders)?;
    let sys = FollowerSystem::new(&g, &s);
    let nf = sys.state_dim();
    if target.len() != nf {
        return Err(InputError(format!("--target has {} entries but there are {nf} followers", target.len())));
    }
    let x0 = x0.unwrap_or_else(|| vec![0.0; nf]);
    if x0.len() != nf {
        return Err(InputError(format!("--x0 has {} entries but there are {nf} followers", x0.len())));
    }
    let r = steer(&sys, &x0, &target, horizon, steps)?;
    let mut out = String::new();
    let followers: Vec<String> = sys.follower_order.iter().map(|v| v.to_string()).collect();
    let _ = writeln!(out, "leaders: {s}");
    let _ = writeln!(out, "followers: {}", followers.join(","));
    let _ = writeln!(out, "horizon: {horizon}");
    out.push_str(&r.render());
    if let (Some(path), Some(traj)) = (csv, &r.trajectory) {
        fs::write(path, traj.to_csv()).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
        let _ = writeln!(out, "trajectory: {}", path.display());
    }
    let code = match r.status {
        SteeringStatus::Steered => EXIT_OK,
        SteeringStatus::UncontrollableDetected => EXIT_NEGATIVE,
        SteeringStatus::ResidualTooLarge => EXIT_INDETERMINATE,
    };
    Ok((out, code))
}

fn cmd_export(graph: &Path, dot: &Path, leaders: Option<&str>) -> CmdResult {
    let g = read_graph(graph)?;
    let members = match leaders {
        Some(t) => LeaderSet::parse(g.node_count(), t)?.members().to_vec(),
        None => Vec::new(),
    };
    fs::write(dot, g.to_dot(&members)).map_err(|e| InputError(format!("{}: {e}", dot.display())))?;
    Ok((format!("wrote {}\n", dot.display()), EXIT_OK))
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Check { graph, mode, tol_gap, tol_zero } => cmd_check(&graph, mode, tol_gap, tol_zero),
        Command::Leaders { graph, set, all, singletons, pbh_tol } => {
            cmd_leaders(&graph, set.as_deref(), all, singletons, pbh_tol)
        }
        Command::Construct { script, base, enumerate } => cmd_construct(&script, &base, enumerate),
        Command::Census { n, random } => cmd_census(n, random.as_deref()),
        Command::Reconstruct { target_spectrum, overlay, tol, base_nodes } => {
            cmd_reconstruct(&target_spectrum, &overlay, tol, base_nodes)
        }
        Command::Steer { graph, leaders, target, horizon, x0, steps, csv } => {
            cmd_steer(&graph, &leaders, &target, horizon, x0.as_deref(), steps, csv.as_deref())
        }
        Command::Export { graph, dot, leaders } => cmd_export(&graph, &dot, leaders.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok((out, code)) => {
            print!("{out}");
            ExitCode::from(code)
        }
        Err(InputError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
