//! Command-line frontend: validate, factor, compile, simulate, dwt, sample,
//! invert-oracle, cascade, report. All outputs are deterministic in
//! (inputs, flags, seed); seeds default to 0 and are echoed.

use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use crate::banded::BandStencil;
use crate::circuit::Circuit;
use crate::compiler::{compile_banded, compile_pyramid, lower_blocks};
use crate::error::{Error, Result};
use crate::simulator::{
    apply_circuit, invert_bijection_demo, sample_measure, FunctionSpec, StateVector,
};
use crate::truncation::{factorization_check, factorize, plan};
use crate::wavelet::{cascade, dwt_pyramid};
use crate::{C64, CVector};

#[derive(Parser, Debug)]
#[command(name = "bandqc", version, about = "Compile cyclic banded unitaries and wavelet pyramids into ancilla-free circuits")]
struct Cli {
    /// Optional TOML config file mirroring the flags (flags win).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Check a stencil's admissibility conditions at size N.
    Validate(CommonArgs),
    /// Factor M_N into adder-conjugated block-diagonal unitaries.
    Factor(CommonArgs),
    /// Compile a banded filter or the full pyramid to circuit JSON.
    Compile(CompileArgs),
    /// Run a circuit on a basis or file state; dump amplitudes.
    Simulate(SimulateArgs),
    /// Classical pyramid transform of a CSV signal.
    Dwt(DwtArgs),
    /// Measure a circuit output state repeatedly; histogram CSV.
    Sample(SampleArgs),
    /// Invert a bijection with one permutation-oracle application.
    InvertOracle(InvertArgs),
    /// Cascade iteration: sampled scaling and wavelet functions.
    Cascade(CascadeArgs),
    /// Aggregate JSON report of the headline measurements.
    Report(ReportArgs),
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// Builtin stencil name (identity|haar|daub4|random_qmf) or JSON file.
    #[arg(long)]
    stencil: Option<String>,
    /// Transform size N (power of two).
    #[arg(long)]
    n: Option<usize>,
    /// Override the block size K (power of two).
    #[arg(long)]
    k_override: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write primary output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompileArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// banded: one filter level; pyramid: full transform.
    #[arg(long)]
    mode: Option<String>,
    /// Smallest level size the pyramid recurses to.
    #[arg(long)]
    min_size: Option<usize>,
    /// Expand dense blocks into controlled two-level gates.
    #[arg(long)]
    lower: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Circuit JSON file.
    #[arg(long)]
    circuit: PathBuf,
    /// Input state CSV (index,re,im per line); default basis state.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Basis-state index used when no input file is given.
    #[arg(long)]
    basis: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DwtArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Input signal CSV (index,re,im per line).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    min_size: Option<usize>,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[command(flatten)]
    sim: SimulateArgs,
    #[arg(long)]
    shots: Option<u64>,
}

#[derive(Args, Debug)]
struct InvertArgs {
    /// Affine multiplier (with --c and --modulus).
    #[arg(long)]
    a: Option<usize>,
    /// Affine offset.
    #[arg(long)]
    c: Option<usize>,
    /// Affine modulus (power of two).
    #[arg(long)]
    modulus: Option<usize>,
    /// JSON file holding a permutation table instead of affine parameters.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Value to invert.
    #[arg(long)]
    y: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CascadeArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    iterations: Option<usize>,
    /// Samples per unit interval.
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Flat TOML config mirroring the flag names.
#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct Config {
    stencil: Option<String>,
    n: Option<usize>,
    k_override: Option<usize>,
    min_size: Option<usize>,
    seed: Option<u64>,
    shots: Option<u64>,
    out: Option<PathBuf>,
    mode: Option<String>,
    iterations: Option<usize>,
    grid: Option<usize>,
    basis: Option<usize>,
}

fn load_config(path: &Option<PathBuf>) -> Result<Config> {
    match path {
        None => Ok(Config::default()),
        Some(p) => {
            let text = fs::read_to_string(p)?;
            toml::from_str(&text).map_err(|e| Error::Parse(format!("config: {e}")))
        }
    }
}

fn pick<T: Clone>(flag: &Option<T>, cfg: &Option<T>) -> Option<T> {
    flag.clone().or_else(|| cfg.clone())
}

fn require<T>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| Error::Parse(format!("missing required value --{name}")))
}

fn resolve_stencil(spec: &str, seed: u64) -> Result<BandStencil<f64>> {
    match spec {
        "identity" => Ok(crate::banded::identity_stencil()),
        "haar" => Ok(crate::banded::haar_stencil()),
        "daub4" => Ok(crate::banded::daub4_stencil()),
        "random_qmf" => Ok(BandStencil::random_qmf(2, seed)),
        path => {
            if Path::new(path).exists() {
                BandStencil::from_json(&fs::read_to_string(path)?)
            } else {
                Err(Error::Parse(format!(
                    "unknown stencil '{path}' (builtin names: identity, haar, daub4, random_qmf)"
                )))
            }
        }
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => {
            use std::io::Write;
            // Ignore broken pipes so `bandqc ... | head` exits cleanly.
            let _ = writeln!(std::io::stdout(), "{text}");
        }
    }
    Ok(())
}

fn read_state_csv(path: &Path) -> Result<CVector> {
    let mut amps = Vec::new();
    for (lineno, line) in fs::read_to_string(path)?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("index") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Parse(format!("line {}: bad number '{s}'", lineno + 1)))
        };
        let (re, im) = match fields.len() {
            1 => (parse(fields[0])?, 0.0),
            2 => (parse(fields[0])?, parse(fields[1])?),
            3 => (parse(fields[1])?, parse(fields[2])?),
            _ => return Err(Error::Parse(format!("line {}: expected 1-3 fields", lineno + 1))),
        };
        amps.push(C64::new(re, im));
    }
    Ok(amps)
}

fn state_dump(amps: &[C64]) -> String {
    let mut s = String::from("index,re,im\n");
    for (i, a) in amps.iter().enumerate() {
        s.push_str(&format!("{i},{:.17e},{:.17e}\n", a.re, a.im));
    }
    s
}

fn load_input_state(c: &Circuit, input: &Option<PathBuf>, basis: usize) -> Result<StateVector> {
    match input {
        Some(p) => {
            let amps = read_state_csv(p)?;
            if amps.len() != 1 << c.n_qubits {
                return Err(Error::WidthMismatch {
                    circuit: 1 << c.n_qubits,
                    state: amps.len(),
                });
            }
            StateVector::from_amplitudes(&amps)
        }
        None => StateVector::basis(c.n_qubits, basis),
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.config)?;
    match cli.cmd {
        Cmd::Validate(args) => {
            let seed = pick(&args.seed, &cfg.seed).unwrap_or(0);
            let name = require(pick(&args.stencil, &cfg.stencil), "stencil")?;
            let n = require(pick(&args.n, &cfg.n), "n")?;
            let s = resolve_stencil(&name, seed)?;
            let diag = s.validate(n);
            let plan_result = plan(&s, n, pick(&args.k_override, &cfg.k_override));
            let doc = json!({
                "seed": seed,
                "stencil": diag,
                "plan": match &plan_result {
                    Ok(p) => json!({"K": p.block, "L_I": p.slab, "b": p.band}),
                    Err(e) => json!({"error": e.to_string()}),
                },
            });
            emit(&pick(&args.out, &cfg.out), &serde_json::to_string_pretty(&doc)?)?;
            if !diag.pass {
                return Err(Error::Inadmissible(format!(
                    "stencil '{}' fails validation at N={n}",
                    s.name
                )));
            }
            Ok(())
        }
        Cmd::Factor(args) => {
            let seed = pick(&args.seed, &cfg.seed).unwrap_or(0);
            let name = require(pick(&args.stencil, &cfg.stencil), "stencil")?;
            let n = require(pick(&args.n, &cfg.n), "n")?;
            let s = resolve_stencil(&name, seed)?;
            let r = factorize(&s, n, pick(&args.k_override, &cfg.k_override))?;
            let residual = factorization_check(&s, n)?;
            let doc = json!({
                "seed": seed,
                "stencil": s.name,
                "n": n,
                "K": r.plan.block,
                "L_I": r.plan.slab,
                "winding": r.winding,
                "shift": r.shift,
                "diagnostics": r.diagnostics,
                "factorization_residual": residual,
            });
            emit(&pick(&args.out, &cfg.out), &serde_json::to_string_pretty(&doc)?)
        }
        Cmd::Compile(args) => {
            let seed = pick(&args.common.seed, &cfg.seed).unwrap_or(0);
            let name = require(pick(&args.common.stencil, &cfg.stencil), "stencil")?;
            let n = require(pick(&args.common.n, &cfg.n), "n")?;
            let mode = pick(&args.mode, &cfg.mode).unwrap_or_else(|| "banded".into());
            let s = resolve_stencil(&name, seed)?;
            let mut c = match mode.as_str() {
                "banded" => compile_banded(&s, n, &[])?,
                "pyramid" => {
                    let min_size = pick(&args.min_size, &cfg.min_size).unwrap_or(4);
                    compile_pyramid(&s, n, min_size)?
                }
                other => return Err(Error::Parse(format!("unknown mode '{other}'"))),
            };
            if args.lower {
                c = lower_blocks(&c)?;
            }
            emit(&pick(&args.common.out, &cfg.out), &c.to_json())
        }
        Cmd::Simulate(args) => {
            let c = Circuit::from_json(&fs::read_to_string(&args.circuit)?)?;
            let basis = pick(&args.basis, &cfg.basis).unwrap_or(0);
            let psi = load_input_state(&c, &args.input, basis)?;
            let out_state = apply_circuit(&psi, &c)?;
            emit(&pick(&args.out, &cfg.out), &state_dump(&out_state.amplitudes))
        }
        Cmd::Dwt(args) => {
            let seed = pick(&args.common.seed, &cfg.seed).unwrap_or(0);
            let name = require(pick(&args.common.stencil, &cfg.stencil), "stencil")?;
            let s = resolve_stencil(&name, seed)?;
            let min_size = pick(&args.min_size, &cfg.min_size).unwrap_or(4);
            let x = read_state_csv(&args.input)?;
            let coeffs = dwt_pyramid(&x, &s, min_size)?;
            emit(&pick(&args.common.out, &cfg.out), &state_dump(&coeffs))
        }
        Cmd::Sample(args) => {
            let seed = pick(&args.sim.seed, &cfg.seed).unwrap_or(0);
            let shots = pick(&args.shots, &cfg.shots).unwrap_or(1024);
            let c = Circuit::from_json(&fs::read_to_string(&args.sim.circuit)?)?;
            let basis = pick(&args.sim.basis, &cfg.basis).unwrap_or(0);
            let psi = load_input_state(&c, &args.sim.input, basis)?;
            let out_state = apply_circuit(&psi, &c)?;
            let hist = sample_measure(&out_state, shots, seed)?;
            let mut text = format!("# seed {seed} shots {shots}\noutcome,count\n");
            for (outcome, count) in &hist.counts {
                text.push_str(&format!("{outcome},{count}\n"));
            }
            emit(&pick(&args.sim.out, &cfg.out), &text)
        }
        Cmd::InvertOracle(args) => {
            let seed = pick(&args.seed, &cfg.seed).unwrap_or(0);
            let f = match (&args.table, args.a) {
                (Some(path), _) => {
                    let table: Vec<usize> = serde_json::from_str(&fs::read_to_string(path)?)?;
                    FunctionSpec::Table(table)
                }
                (None, Some(a)) => FunctionSpec::Affine {
                    a,
                    c: args.c.unwrap_or(0),
                    modulus: require(args.modulus, "modulus")?,
                },
                (None, None) => {
                    return Err(Error::Parse("need --table or --a/--c/--modulus".into()))
                }
            };
            let y = require(args.y, "y")?;
            let x = invert_bijection_demo(&f, y, seed)?;
            let doc = json!({"seed": seed, "y": y, "x": x});
            emit(&pick(&args.out, &cfg.out), &serde_json::to_string_pretty(&doc)?)
        }
        Cmd::Cascade(args) => {
            let seed = pick(&args.common.seed, &cfg.seed).unwrap_or(0);
            let name = require(pick(&args.common.stencil, &cfg.stencil), "stencil")?;
            let s = resolve_stencil(&name, seed)?;
            let iterations = pick(&args.iterations, &cfg.iterations).unwrap_or(10);
            let grid = pick(&args.grid, &cfg.grid).unwrap_or(64);
            let out = cascade(&s, iterations, grid)?;
            let table = |xs: &[f64], vs: &[f64]| {
                let mut t = String::from("x,value\n");
                for (x, v) in xs.iter().zip(vs) {
                    t.push_str(&format!("{x:.6},{v:.17e}\n"));
                }
                t
            };
            match pick(&args.common.out, &cfg.out) {
                Some(base) => {
                    let base = base.to_string_lossy().into_owned();
                    fs::write(format!("{base}.phi.csv"), table(&out.phi_x, &out.phi))?;
                    fs::write(format!("{base}.psi.csv"), table(&out.psi_x, &out.psi))?;
                }
                None => {
                    let text = format!(
                        "# phi (iterations {iterations}, grid {grid})\n{}# psi\n{}",
                        table(&out.phi_x, &out.phi),
                        table(&out.psi_x, &out.psi)
                    );
                    emit(&None, &text)?;
                }
            }
            Ok(())
        }
        Cmd::Report(args) => {
            let seed = pick(&args.seed, &cfg.seed).unwrap_or(0);
            let report = crate::report::build_report(seed)?;
            emit(&pick(&args.out, &cfg.out), &serde_json::to_string_pretty(&report)?)
        }
    }
}

/// Entry point; returns the process exit code (0 success, 2 validation
/// failure, 1 internal error, 64 usage error).
pub fn cli_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
