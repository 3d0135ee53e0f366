//! `qcut`: partition-aware gate decomposition and circuit cutting.

use clap::{Parser, Subcommand};
use qcut_core::cut::{all_assignments, num_assignments, plan_cuts, CutError, CutLocation};
use qcut_core::estimate::{
    exact_uncut, overhead_table, reconstruct_exact, reconstruct_mc, Estimate, EstimateError,
};
use qcut_core::ir::{
    parse_circuit, serialize_circuit, Circuit, IrError, ObservableError, PauliObservable,
    QubitRef, Side,
};
use qcut_core::mcx::{
    decompose_crossings, decompose_mcx, verify_decomposition, DecomposeError, DecomposeOptions,
    Strategy,
};
use qcut_core::qpd::{overhead_per_cut, CutKind, LocalOp, LocalOpGate, QpdBasis};
use qcut_core::sim::{run_shots, SimError};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "qcut",
    version,
    about = "Cut partitioned circuits into local subcircuits and reconstruct observables"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rewrite boundary-crossing multi-controlled X gates into cuttable form.
    Decompose {
        /// Input circuit (JSON).
        #[arg(long = "in")]
        input: PathBuf,
        /// Where to write the rewritten circuit.
        #[arg(long)]
        out: PathBuf,
        /// dec1, dec2a, dec2ad, dec2ad_clean_a, or baseline.
        #[arg(long)]
        strategy: String,
        /// Rewrite only the gate at this index (default: every crossing one).
        #[arg(long)]
        gate: Option<usize>,
        /// With dec2ad and no target-side controls, cut CX(a->t) directly.
        #[arg(long)]
        fuse_b: bool,
    },
    /// Enumerate every term assignment as subcircuit pair files.
    Cut {
        #[arg(long = "in")]
        input: PathBuf,
        /// Directory for pair files and manifest.json.
        #[arg(long)]
        out: PathBuf,
        /// Refuse to write more pairs than this.
        #[arg(long, default_value_t = 4096)]
        max_pairs: u128,
    },
    /// Reconstruct a Pauli observable's expectation across the cut.
    Estimate {
        #[arg(long = "in")]
        input: PathBuf,
        /// Pauli string such as Z3 or Z0*X2.
        #[arg(long)]
        observable: String,
        /// Monte Carlo sample count (omit for exact term enumeration).
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Decompose crossing multi-controlled X gates first.
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        fuse_b: bool,
        /// Simulate the uncut circuit instead (reference value).
        #[arg(long)]
        no_cut: bool,
        /// Report the 1-norm assuming classical communication between sides.
        #[arg(long)]
        classical_comm: bool,
        /// Worker threads (0 = rayon default). Results do not depend on this.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Print the per-strategy sampling-overhead table as CSV.
    Overhead {
        /// Largest number of cut gate instances to tabulate.
        #[arg(long, default_value_t = 3)]
        n: u32,
    },
    /// Check a strategy against a plain multi-controlled X on all basis inputs.
    Verify {
        /// Controls on the far side of the partition.
        #[arg(long)]
        m1: usize,
        /// Controls sharing a side with the target.
        #[arg(long)]
        m2: usize,
        #[arg(long)]
        strategy: String,
    },
    /// Print the quasi-probability term tables.
    #[command(name = "qpd", alias = "qpd-dump")]
    Qpd {
        /// Print the tables as JSON (the default and only mode).
        #[arg(long)]
        dump: bool,
    },
    /// Sample a circuit and print outcome counts.
    Run {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 1024)]
        shots: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum AppError {
    Message(String, u8),
}

impl AppError {
    fn new(message: impl Into<String>, code: u8) -> AppError {
        AppError::Message(message.into(), code)
    }

    fn code(&self) -> u8 {
        match self {
            AppError::Message(_, code) => *code,
        }
    }

    fn message(&self) -> &str {
        match self {
            AppError::Message(m, _) => m,
        }
    }
}

const EXIT_VALIDATION: u8 = 2;
const EXIT_UNSUPPORTED_SPLIT: u8 = 3;
const EXIT_OBSERVABLE: u8 = 4;
const EXIT_SIZE_LIMIT: u8 = 5;

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> AppError {
        AppError::new(e.to_string(), EXIT_VALIDATION)
    }
}

impl From<IrError> for AppError {
    fn from(e: IrError) -> AppError {
        AppError::new(e.to_string(), EXIT_VALIDATION)
    }
}

impl From<ObservableError> for AppError {
    fn from(e: ObservableError) -> AppError {
        AppError::new(e.to_string(), EXIT_OBSERVABLE)
    }
}

impl From<SimError> for AppError {
    fn from(e: SimError) -> AppError {
        let code = match &e {
            SimError::Observable(_) => EXIT_OBSERVABLE,
            _ => EXIT_SIZE_LIMIT,
        };
        AppError::new(e.to_string(), code)
    }
}

impl From<DecomposeError> for AppError {
    fn from(e: DecomposeError) -> AppError {
        let code = match &e {
            DecomposeError::Ir(_) | DecomposeError::PartitionMissing => EXIT_VALIDATION,
            DecomposeError::Sim(inner) => return AppError::new(inner.to_string(), EXIT_SIZE_LIMIT),
            _ => EXIT_UNSUPPORTED_SPLIT,
        };
        AppError::new(e.to_string(), code)
    }
}

impl From<CutError> for AppError {
    fn from(e: CutError) -> AppError {
        let code = match &e {
            CutError::UncuttableCrossing { .. } => EXIT_UNSUPPORTED_SPLIT,
            _ => EXIT_VALIDATION,
        };
        AppError::new(e.to_string(), code)
    }
}

impl From<EstimateError> for AppError {
    fn from(e: EstimateError) -> AppError {
        match e {
            EstimateError::Cut(inner) => inner.into(),
            EstimateError::Sim(inner) => inner.into(),
            EstimateError::Observable(inner) => inner.into(),
            EstimateError::ExactEnumerationTooLarge { .. }
            | EstimateError::OverheadOverflow { .. } => {
                AppError::new(e.to_string(), EXIT_SIZE_LIMIT)
            }
            EstimateError::NoSamples => AppError::new(e.to_string(), EXIT_VALIDATION),
        }
    }
}

fn load_circuit(path: &Path) -> Result<Circuit, AppError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::new(format!("{}: {e}", path.display()), EXIT_VALIDATION))?;
    Ok(parse_circuit(&text)?)
}

fn parse_strategy(name: &str) -> Result<Strategy, AppError> {
    Strategy::from_name(name).ok_or_else(|| {
        AppError::new(
            format!(
                "unknown strategy {name:?} (expected one of {})",
                Strategy::ALL
                    .iter()
                    .map(|s| s.name())
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
            EXIT_VALIDATION,
        )
    })
}

fn side_label(side: Side) -> &'static str {
    side.label()
}

/// Writes one line to stdout, treating a closed pipe as a normal quit.
fn emit(text: &str) {
    use std::io::Write;
    if let Err(e) = writeln!(std::io::stdout(), "{text}") {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: cannot write to stdout: {e}");
        std::process::exit(i32::from(EXIT_VALIDATION));
    }
}

fn csv_error(e: csv::Error) -> AppError {
    if let csv::ErrorKind::Io(io) = e.kind() {
        if io.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
    }
    AppError::new(e.to_string(), EXIT_VALIDATION)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(command: Command) -> Result<ExitCode, AppError> {
    match command {
        Command::Decompose {
            input,
            out,
            strategy,
            gate,
            fuse_b,
        } => cmd_decompose(&input, &out, &strategy, gate, fuse_b),
        Command::Cut {
            input,
            out,
            max_pairs,
        } => cmd_cut(&input, &out, max_pairs),
        Command::Estimate {
            input,
            observable,
            samples,
            seed,
            strategy,
            fuse_b,
            no_cut,
            classical_comm,
            jobs,
        } => cmd_estimate(
            &input,
            &observable,
            samples,
            seed,
            strategy.as_deref(),
            fuse_b,
            no_cut,
            classical_comm,
            jobs,
        ),
        Command::Overhead { n } => cmd_overhead(n),
        Command::Verify { m1, m2, strategy } => cmd_verify(m1, m2, &strategy),
        Command::Qpd { dump: _ } => cmd_qpd_dump(),
        Command::Run { input, shots, seed } => cmd_run(&input, shots, seed),
    }
}

#[derive(Serialize)]
struct AncillaDesc {
    name: String,
    qubit: usize,
    dirty: bool,
}

#[derive(Serialize)]
struct DecomposeReport {
    strategy: &'static str,
    rewritten: usize,
    qubits_before: usize,
    qubits_after: usize,
    crossing_gates: usize,
    crossing_wires: usize,
    ancillas: Vec<AncillaDesc>,
    /// 1-norm of the resulting cut plan; null if a crossing has no basis.
    gamma: Option<f64>,
}

fn cmd_decompose(
    input: &Path,
    out: &Path,
    strategy: &str,
    gate: Option<usize>,
    fuse_b: bool,
) -> Result<ExitCode, AppError> {
    let circuit = load_circuit(input)?;
    let strategy = parse_strategy(strategy)?;
    let opts = DecomposeOptions { fuse_b };
    let (result, rewritten, ancillas) = match gate {
        Some(index) => {
            let r = decompose_mcx(&circuit, index, strategy, opts)?;
            (r.circuit, 1, r.ancillas)
        }
        None => decompose_crossings(&circuit, strategy, opts)?,
    };
    let report_crossings = qcut_core::ir::validate_partition(&result)?;
    let report = DecomposeReport {
        strategy: strategy.name(),
        rewritten,
        qubits_before: circuit.num_qubits(),
        qubits_after: result.num_qubits(),
        crossing_gates: report_crossings.crossing_gates.len(),
        crossing_wires: report_crossings.wire_crossings.len(),
        ancillas: ancillas
            .iter()
            .map(|a| AncillaDesc {
                name: result.qubits[a.qubit.index()].clone(),
                qubit: a.qubit.index(),
                dirty: a.dirty,
            })
            .collect(),
        gamma: plan_cuts(&result).ok().map(|p| p.gamma()),
    };
    std::fs::write(out, serialize_circuit(&result) + "\n")?;
    emit(&serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct CutDesc {
    kind: &'static str,
    gate_index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    qubit: Option<String>,
}

#[derive(Serialize)]
struct LocDesc {
    side: &'static str,
    qubit: String,
}

#[derive(Serialize)]
struct SignDesc {
    side: &'static str,
    classbit: usize,
}

#[derive(Serialize)]
struct PairDesc {
    index: usize,
    assignment: Vec<usize>,
    coefficient: f64,
    sign_rules: Vec<SignDesc>,
    file_a: String,
    file_b: String,
}

#[derive(Serialize)]
struct Manifest {
    format: &'static str,
    gamma: f64,
    num_cuts: usize,
    num_pairs: usize,
    cuts: Vec<CutDesc>,
    /// Side and qubit name holding each original qubit's final segment.
    qubit_final: BTreeMap<String, LocDesc>,
    pairs: Vec<PairDesc>,
}

fn cmd_cut(input: &Path, out: &Path, max_pairs: u128) -> Result<ExitCode, AppError> {
    let circuit = load_circuit(input)?;
    let plan = plan_cuts(&circuit)?;
    let pairs = num_assignments(&plan);
    if pairs > max_pairs {
        return Err(AppError::new(
            format!("plan expands to {pairs} pairs (limit {max_pairs})"),
            EXIT_SIZE_LIMIT,
        ));
    }
    std::fs::create_dir_all(out)?;

    let cuts = plan
        .cuts
        .iter()
        .map(|c| match c.location {
            CutLocation::Gate { index } => CutDesc {
                kind: "gate",
                gate_index: index,
                qubit: None,
            },
            CutLocation::Wire {
                marker_index,
                qubit,
            } => CutDesc {
                kind: "wire",
                gate_index: marker_index,
                qubit: Some(circuit.qubits[qubit.0].clone()),
            },
        })
        .collect();

    let mut pair_descs = Vec::new();
    let mut qubit_final = BTreeMap::new();
    for (index, assignment) in all_assignments(&plan).enumerate() {
        let pair = qcut_core::cut::instantiate(&circuit, &plan, &assignment)?;
        let file_a = format!("pair_{index:04}_a.json");
        let file_b = format!("pair_{index:04}_b.json");
        std::fs::write(out.join(&file_a), serialize_circuit(&pair.circuit_a) + "\n")?;
        std::fs::write(out.join(&file_b), serialize_circuit(&pair.circuit_b) + "\n")?;
        if index == 0 {
            for (q, name) in circuit.qubits.iter().enumerate() {
                let (side, idx) = pair.final_location(QubitRef(q));
                qubit_final.insert(
                    name.clone(),
                    LocDesc {
                        side: side_label(side),
                        qubit: pair.circuit(side).qubits[idx].clone(),
                    },
                );
            }
        }
        pair_descs.push(PairDesc {
            index,
            assignment: assignment.indices.clone(),
            coefficient: pair.coefficient,
            sign_rules: pair
                .sign_rules
                .iter()
                .map(|r| SignDesc {
                    side: side_label(r.side),
                    classbit: r.classbit,
                })
                .collect(),
            file_a,
            file_b,
        });
    }

    let manifest = Manifest {
        format: "qcut-cuts-1",
        gamma: plan.gamma(),
        num_cuts: plan.num_cuts(),
        num_pairs: pair_descs.len(),
        cuts,
        qubit_final,
        pairs: pair_descs,
    };
    let manifest_json =
        serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    std::fs::write(out.join("manifest.json"), &manifest_json)?;
    emit(manifest_json.trim_end());
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_estimate(
    input: &Path,
    observable: &str,
    samples: Option<u64>,
    seed: u64,
    strategy: Option<&str>,
    fuse_b: bool,
    no_cut: bool,
    classical_comm: bool,
    jobs: usize,
) -> Result<ExitCode, AppError> {
    let mut circuit = load_circuit(input)?;
    let obs = PauliObservable::parse(observable)?;
    if let Some(name) = strategy {
        let strategy = parse_strategy(name)?;
        let (rewritten, _, _) =
            decompose_crossings(&circuit, strategy, DecomposeOptions { fuse_b })?;
        circuit = rewritten;
    }

    let estimate: Estimate = if no_cut {
        Estimate {
            value: exact_uncut(&circuit, &obs)?,
            standard_error: 0.0,
            gamma: 1.0,
            samples: 0,
        }
    } else {
        let compute = || -> Result<Estimate, EstimateError> {
            match samples {
                Some(n) if n > 0 => reconstruct_mc(&circuit, &obs, n, seed),
                // `--samples 0` and an omitted flag both mean exact
                // term enumeration.
                _ => reconstruct_exact(&circuit, &obs),
            }
        };
        let mut estimate = if jobs > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .map_err(|e| AppError::new(e.to_string(), EXIT_VALIDATION))?
                .install(compute)?
        } else {
            compute()?
        };
        if classical_comm {
            estimate.gamma = plan_cuts(&circuit)?.gamma_assuming(true);
        }
        estimate
    };

    emit(&serde_json::to_string(&estimate).expect("estimate serializes"));
    Ok(ExitCode::SUCCESS)
}

fn cmd_overhead(n: u32) -> Result<ExitCode, AppError> {
    let rows = overhead_table(n)?;
    let mut writer = csv::Writer::from_writer(std::io::stdout());
    for row in rows {
        writer.serialize(row).map_err(csv_error)?;
    }
    writer.flush().map_err(|e| csv_error(csv::Error::from(e)))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(m1: usize, m2: usize, strategy: &str) -> Result<ExitCode, AppError> {
    let strategy = parse_strategy(strategy)?;
    let report = verify_decomposition(m1, m2, strategy)?;
    let ok = report.max_deviation <= 1e-12 && report.ancilla_states_ok;
    emit(&format!(
        "{} strategy={} m1={} m2={} max_deviation={:.3e} ancillas={}",
        if ok { "PASS" } else { "FAIL" },
        strategy.name(),
        m1,
        m2,
        report.max_deviation,
        if report.ancilla_states_ok { "ok" } else { "bad" }
    ));
    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn op_strings(op: &LocalOp) -> Vec<String> {
    op.gates
        .iter()
        .map(|g| match g {
            LocalOpGate::X => "x".to_string(),
            LocalOpGate::H => "h".to_string(),
            LocalOpGate::S => "s".to_string(),
            LocalOpGate::Sdg => "sdg".to_string(),
            LocalOpGate::Rz(angle) => format!("rz({angle})"),
            LocalOpGate::MeasureZ { sign: true } => "measure_z_signed".to_string(),
            LocalOpGate::MeasureZ { sign: false } => "measure_z".to_string(),
            LocalOpGate::Prep(state) => format!("prep({})", state.label()),
        })
        .collect()
}

fn basis_json(basis: &QpdBasis) -> serde_json::Value {
    serde_json::json!({
        "gamma": basis.gamma(),
        "overhead_no_cc": overhead_per_cut(basis.kind, false),
        "overhead_cc": overhead_per_cut(basis.kind, true),
        "terms": basis.terms.iter().map(|t| serde_json::json!({
            "coefficient": t.coefficient,
            "op_a": op_strings(&t.op_a),
            "op_b": op_strings(&t.op_b),
        })).collect::<Vec<_>>(),
    })
}

fn cmd_qpd_dump() -> Result<ExitCode, AppError> {
    let dump = serde_json::json!({
        "gate_cx": basis_json(&qcut_core::qpd::basis_for(CutKind::GateCx)),
        "wire": basis_json(&qcut_core::qpd::basis_for(CutKind::Wire)),
    });
    emit(&serde_json::to_string_pretty(&dump).expect("dump serializes"));
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct RunReport {
    shots: usize,
    counts: BTreeMap<String, usize>,
}

fn cmd_run(input: &Path, shots: usize, seed: u64) -> Result<ExitCode, AppError> {
    let circuit = load_circuit(input)?;
    let mut local = circuit.clone();
    local.gates.retain(|g| g.kind != qcut_core::ir::GateKind::CutWire);
    let outcomes = run_shots(&local, 0u64, shots, seed)?;
    let n = circuit.num_qubits();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for outcome in outcomes {
        let bits: String = (0..n)
            .rev()
            .map(|q| if outcome.bitstring >> q & 1 == 1 { '1' } else { '0' })
            .collect();
        *counts.entry(bits).or_insert(0) += 1;
    }
    let report = RunReport { shots, counts };
    emit(&serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(ExitCode::SUCCESS)
}
