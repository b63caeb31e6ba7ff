//! Command-line front end: lattice files, circuit runs, sampling,
//! expectation values and BP error reports.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::boundary::{norm_environments, FitOptions, Partitioning, PauliString, Strategy};
use crate::bp::{loop_error, run_bp, BpOptions, LoopErrorReport, DEFAULT_BP_MAX_ITERS, DEFAULT_BP_TOL};
use crate::circuit::{heisenberg_trotter_circuit, run_circuit, BpPolicy, Circuit, RunOptions};
use crate::error::{Error, Result};
use crate::network::{Bitstring, LatticeKind, NetworkGraph, TensorNetworkState};
use crate::sampler::{draw_samples, SamplerConfig};
use crate::tensor::{DEFAULT_REG_CUTOFF, DEFAULT_SVD_CUTOFF};

#[derive(Debug, Parser)]
#[command(name = "planartn", version, about = "Planar tensor network circuit simulation and sampling")]
pub struct Cli {
    /// Worker threads for BP sweeps and sampling.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a lattice graph as JSON.
    BuildLattice(BuildLatticeArgs),
    /// Run a circuit and save the final state plus gate metrics.
    Run(RunArgs),
    /// Draw bitstrings from a saved state.
    Sample(SampleArgs),
    /// Evaluate Pauli-string expectation values at one or more ranks.
    Expect(ExpectArgs),
    /// Report the per-loop BP error of a state or of a Trotter depth sweep.
    BpError(BpErrorArgs),
}

#[derive(Debug, Args)]
pub struct BuildLatticeArgs {
    /// chain, grid, rotated-square, heavy-hex, or a bundled layout
    /// (heavyhex_164, willow_105, n2_52, fe4s4_72).
    #[arg(long)]
    pub kind: String,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    /// Heavy-hex cell counts as ROWSxCOLS.
    #[arg(long)]
    pub cells: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Circuit source shared by `run` and `bp-error`.
#[derive(Debug, Args)]
pub struct CircuitArgs {
    /// Graph JSON file or bundled layout name.
    #[arg(long)]
    pub graph: Option<String>,
    /// Circuit JSON file. Without it and without `--steps` the circuit is empty.
    #[arg(long)]
    pub circuit: Option<PathBuf>,
    /// Heisenberg Trotter steps to generate instead of reading a circuit.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub j: f64,
    #[arg(long, default_value_t = 0.1)]
    pub dt: f64,
    /// Initial product state: domain-wall, zeros, or an explicit bitstring.
    #[arg(long, default_value = "domain-wall")]
    pub initial: String,
    #[arg(long, default_value_t = 16)]
    pub chi: usize,
    #[arg(long, default_value_t = DEFAULT_SVD_CUTOFF)]
    pub cutoff: f64,
    #[arg(long, default_value_t = DEFAULT_REG_CUTOFF)]
    pub reg_cutoff: f64,
    /// per-layer, per-gate or never.
    #[arg(long, default_value = "per-layer")]
    pub bp_policy: String,
    #[arg(long, default_value_t = DEFAULT_BP_TOL)]
    pub bp_tol: f64,
    #[arg(long, default_value_t = DEFAULT_BP_MAX_ITERS)]
    pub bp_max_iters: usize,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub circuit: CircuitArgs,
    /// Rescale the final state to unit norm (exact contraction, small states only).
    #[arg(long)]
    pub normalize: bool,
    /// Final state file.
    #[arg(long)]
    pub out: PathBuf,
    /// Metrics JSON; defaults to the state path with a `.metrics.json` suffix.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub state: PathBuf,
    /// Boundary rank for both sides; several values give an R sweep.
    #[arg(long = "R", value_delimiter = ',')]
    pub r: Vec<usize>,
    /// Amplitude-side rank (overrides `--R`).
    #[arg(long = "Rx")]
    pub rx: Option<usize>,
    /// Norm-side rank (overrides `--R`).
    #[arg(long = "Rn")]
    pub rn: Option<usize>,
    /// Rank of the `p(x)` verification; defaults to twice the state's bond dimension.
    #[arg(long)]
    pub verify_chi: Option<usize>,
    /// Number of samples per rank setting.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "columns")]
    pub partition: String,
    /// Expected magnetization sector (sum of ±1 per qubit).
    #[arg(long, allow_hyphen_values = true)]
    pub magnetization: Option<i64>,
    /// JSONL output; records followed by one report line per rank setting.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExpectArgs {
    #[arg(long)]
    pub state: PathBuf,
    /// Pauli strings such as "Z5" or "X0 X1"; repeatable.
    #[arg(long = "obs", required = true)]
    pub observables: Vec<String>,
    #[arg(long = "R", value_delimiter = ',', required = true)]
    pub r: Vec<usize>,
    #[arg(long, default_value = "columns")]
    pub partition: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BpErrorArgs {
    /// Saved state to analyse; otherwise a Trotter depth sweep is run.
    #[arg(long, conflicts_with_all = ["graph", "circuit", "steps"])]
    pub state: Option<PathBuf>,
    #[command(flatten)]
    pub circuit: CircuitArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parse arguments, run, and map errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    if cli.threads == 0 {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::BuildLattice(a) => cmd_build_lattice(&a),
        Command::Run(a) => cmd_run(&a),
        Command::Sample(a) => cmd_sample(&a),
        Command::Expect(a) => cmd_expect(&a),
        Command::BpError(a) => cmd_bp_error(&a),
    })
}

fn required(v: Option<usize>, name: &str, kind: &str) -> Result<usize> {
    v.ok_or_else(|| Error::Config(format!("--{name} is required for {kind}")))
}

fn parse_cells(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("--cells expects ROWSxCOLS, got {s:?}"));
    let (r, c) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((r.trim().parse().map_err(|_| bad())?, c.trim().parse().map_err(|_| bad())?))
}

pub fn build_lattice(a: &BuildLatticeArgs) -> Result<NetworkGraph> {
    if let Some(g) = NetworkGraph::bundled(&a.kind) {
        return Ok(g);
    }
    match a.kind.parse::<LatticeKind>()? {
        LatticeKind::Chain => NetworkGraph::chain(required(a.n, "n", "a chain")?),
        LatticeKind::Grid => NetworkGraph::grid(required(a.rows, "rows", "a grid")?, required(a.cols, "cols", "a grid")?),
        LatticeKind::RotatedSquare => NetworkGraph::rotated_square(
            required(a.rows, "rows", "a rotated-square lattice")?,
            required(a.cols, "cols", "a rotated-square lattice")?,
        ),
        LatticeKind::HeavyHex => {
            let (r, c) = match &a.cells {
                Some(s) => parse_cells(s)?,
                None => (
                    required(a.rows, "rows", "a heavy-hex lattice")?,
                    required(a.cols, "cols", "a heavy-hex lattice")?,
                ),
            };
            NetworkGraph::heavy_hex(r, c)
        }
        LatticeKind::Custom => Err(Error::Config("custom graphs are written by hand, not built".into())),
    }
}

fn cmd_build_lattice(a: &BuildLatticeArgs) -> Result<()> {
    let g = build_lattice(a)?;
    match &a.out {
        Some(p) => g.save(p),
        None => {
            println!("{}", g.to_json());
            Ok(())
        }
    }
}

fn load_graph(spec: &str) -> Result<NetworkGraph> {
    let path = Path::new(spec);
    if path.exists() {
        return NetworkGraph::load(path);
    }
    NetworkGraph::bundled(spec).ok_or_else(|| Error::Config(format!("graph {spec:?} is neither a file nor a bundled layout")))
}

fn initial_bits(graph: &NetworkGraph, spec: &str) -> Result<Bitstring> {
    let x = match spec {
        "domain-wall" => Bitstring::new(graph.domain_wall_bits())?,
        "zeros" => Bitstring::zeros(graph.num_vertices()),
        bits => bits.parse()?,
    };
    if x.len() != graph.num_vertices() {
        return Err(Error::Config(format!("initial state has {} bits for {} qubits", x.len(), graph.num_vertices())));
    }
    Ok(x)
}

impl CircuitArgs {
    fn graph(&self) -> Result<NetworkGraph> {
        let spec = self.graph.as_deref().ok_or_else(|| Error::Config("--graph is required".into()))?;
        load_graph(spec)
    }

    fn options(&self) -> Result<RunOptions> {
        if self.chi == 0 {
            return Err(Error::Config("--chi must be at least 1".into()));
        }
        Ok(RunOptions {
            chi: self.chi,
            cutoff: self.cutoff,
            reg_cutoff: self.reg_cutoff,
            bp_policy: self.bp_policy.parse::<BpPolicy>()?,
            bp: BpOptions { tol: self.bp_tol, max_iters: self.bp_max_iters, ..Default::default() },
        })
    }

    fn circuit(&self, graph: &NetworkGraph, steps: Option<usize>) -> Result<Circuit> {
        match (&self.circuit, steps) {
            (Some(_), Some(_)) => Err(Error::Config("give either --circuit or --steps, not both".into())),
            (Some(p), None) => Circuit::load(p),
            (None, Some(l)) => heisenberg_trotter_circuit(graph, self.j, self.dt, l),
            (None, None) => Circuit::new(graph.num_vertices(), Vec::new()),
        }
    }
}

#[derive(Serialize)]
struct RunMetrics<'a> {
    num_qubits: usize,
    num_gates: usize,
    chi: usize,
    cutoff: f64,
    bp_policy: BpPolicy,
    fidelity: f64,
    max_gate_error: f64,
    max_bond_dim: usize,
    memory_footprint: usize,
    wall_seconds: f64,
    norm_sqr_before_normalize: Option<f64>,
    gates: &'a [crate::circuit::GateRecord],
    bp_runs: &'a [crate::circuit::BpRecord],
}

fn write_json(path: Option<&Path>, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn cmd_run(a: &RunArgs) -> Result<()> {
    let graph = a.circuit.graph()?;
    let opts = a.circuit.options()?;
    let circuit = a.circuit.circuit(&graph, a.circuit.steps)?;
    let x = initial_bits(&graph, &a.circuit.initial)?;
    let start = Instant::now();
    let (mut state, log) = run_circuit(TensorNetworkState::product_state(&graph, &x)?, &circuit, &opts)?;
    let norm_sqr = if a.normalize {
        let z = state.norm_sqr_exact()?;
        state.normalize_with(z)?;
        Some(z)
    } else {
        None
    };
    let wall_seconds = start.elapsed().as_secs_f64();
    state.save(&a.out)?;
    let metrics = RunMetrics {
        num_qubits: graph.num_vertices(),
        num_gates: circuit.num_gates(),
        chi: opts.chi,
        cutoff: opts.cutoff,
        bp_policy: opts.bp_policy,
        fidelity: log.fidelity,
        max_gate_error: log.max_error(),
        max_bond_dim: state.max_bond_dim(),
        memory_footprint: state.memory_footprint(),
        wall_seconds,
        norm_sqr_before_normalize: norm_sqr,
        gates: &log.gates,
        bp_runs: &log.bp_runs,
    };
    let metrics_path = a.metrics.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".metrics.json");
        PathBuf::from(p)
    });
    write_json(Some(&metrics_path), &metrics)
}

fn partitioning(state: &TensorNetworkState, name: &str) -> Result<Partitioning> {
    let strategy: Strategy = name.parse()?;
    if strategy == Strategy::Custom {
        return Err(Error::Config("custom partitions are only available through the library".into()));
    }
    Partitioning::new(state.graph(), strategy)
}

fn cmd_sample(a: &SampleArgs) -> Result<()> {
    let state = TensorNetworkState::load(&a.state)?;
    let part = partitioning(&state, &a.partition)?;
    let settings: Vec<(usize, usize)> = match (a.rx, a.rn) {
        (None, None) if a.r.is_empty() => return Err(Error::Config("give --R or both --Rx and --Rn".into())),
        (None, None) => a.r.iter().map(|&r| (r, r)).collect(),
        (rx, rn) => {
            let base = a.r.first().copied();
            let rx = rx.or(base).ok_or_else(|| Error::Config("--Rx needs --Rn or --R".into()))?;
            let rn = rn.or(base).ok_or_else(|| Error::Config("--Rn needs --Rx or --R".into()))?;
            vec![(rx, rn)]
        }
    };
    let mut out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    let fit = FitOptions::default();
    for (rx, rn) in settings {
        let env = norm_environments(&state, &part, rn, &fit)?;
        let mut cfg = SamplerConfig::new(rn, state.max_bond_dim(), a.n, a.seed);
        cfg.rank_x = rx;
        if let Some(v) = a.verify_chi {
            cfg.verify_rank = v;
        }
        cfg.expected_magnetization = a.magnetization;
        cfg.fit = fit;
        let report = draw_samples(&state, &env, &cfg)?;
        for rec in &report.records {
            serde_json::to_writer(&mut out, rec)?;
            writeln!(out)?;
        }
        let footer = json!({
            "report": report,
            "Rx": rx,
            "Rn": rn,
            "verify_chi": cfg.verify_rank,
            "n_samples": cfg.n_samples,
            "seed": cfg.seed,
            "partition": part.strategy(),
            "norm_sqr_boundary": env.norm_sqr(),
        });
        serde_json::to_writer(&mut out, &footer)?;
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_expect(a: &ExpectArgs) -> Result<()> {
    let state = TensorNetworkState::load(&a.state)?;
    let part = partitioning(&state, &a.partition)?;
    let observables: Vec<PauliString> = a.observables.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    let fit = FitOptions::default();
    let mut rows = Vec::with_capacity(a.r.len());
    for &r in &a.r {
        let env = norm_environments(&state, &part, r, &fit)?;
        let values = observables
            .iter()
            .map(|o| Ok(json!({ "observable": o.to_string(), "value": env.expectation(&state, o)? })))
            .collect::<Result<Vec<_>>>()?;
        rows.push(json!({ "R": r, "norm_sqr": env.norm_sqr(), "values": values }));
    }
    write_json(a.out.as_deref(), &json!({ "partition": part.strategy(), "table": rows }))
}

#[derive(Serialize)]
struct DepthError {
    steps: usize,
    fidelity: f64,
    bp_converged: bool,
    report: LoopErrorReport,
}

fn cmd_bp_error(a: &BpErrorArgs) -> Result<()> {
    let bp = BpOptions { tol: a.circuit.bp_tol, max_iters: a.circuit.bp_max_iters, ..Default::default() };
    if let Some(path) = &a.state {
        let state = TensorNetworkState::load(path)?;
        let env = run_bp(&state, &bp)?;
        return write_json(a.out.as_deref(), &loop_error(&state, &env)?);
    }
    let graph = a.circuit.graph()?;
    let opts = a.circuit.options()?;
    let x = initial_bits(&graph, &a.circuit.initial)?;
    let mut state = TensorNetworkState::product_state(&graph, &x)?;
    let steps = match (&a.circuit.circuit, a.circuit.steps) {
        (Some(_), _) => {
            let circuit = a.circuit.circuit(&graph, None)?;
            let (s, log) = run_circuit(state, &circuit, &opts)?;
            let env = run_bp(&s, &bp)?;
            let depth = DepthError { steps: 0, fidelity: log.fidelity, bp_converged: env.converged, report: loop_error(&s, &env)? };
            return write_json(a.out.as_deref(), &json!({ "sweep": [depth] }));
        }
        (None, l) => l.unwrap_or(0),
    };
    let one_step = heisenberg_trotter_circuit(&graph, a.circuit.j, a.circuit.dt, 1)?;
    let mut fidelity = 1.0;
    let mut sweep = Vec::with_capacity(steps + 1);
    for depth in 0..=steps {
        if depth > 0 {
            let (s, log) = run_circuit(state, &one_step, &opts)?;
            state = s;
            fidelity *= log.fidelity;
        }
        let env = run_bp(&state, &bp)?;
        sweep.push(DepthError { steps: depth, fidelity, bp_converged: env.converged, report: loop_error(&state, &env)? });
    }
    write_json(a.out.as_deref(), &json!({ "sweep": sweep }))
}
