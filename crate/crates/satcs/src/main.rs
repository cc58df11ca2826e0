//! Command-line front end. Machine-readable output goes to stdout, logs and
//! progress to stderr. Exit codes: 0 success/optimum, 2 usage or rejected
//! input, 3 unreadable or unwritable files, 10 unsatisfiable/infeasible.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use satcs::bench::{self, BenchError};
use satcs::cnf;
use satcs::encoder::encode_instance;
use satcs::maxsat::{solve_maxsat_with, OptResult};
use satcs::model::{self, BinarySignal, Method};

const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_INFEASIBLE: u8 = 10;

#[derive(Parser)]
#[command(name = "satcs", version, about = "Exact binary compressive sensing via weighted MaxSAT")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random sensing instance file
    Gen {
        /// Signal length N
        #[arg(long)]
        n: usize,
        /// Number of measurements m
        #[arg(long)]
        m: usize,
        /// Sparsity of the planted signal
        #[arg(long)]
        s: usize,
        /// Bernoulli parameter for matrix entries (decimal or p/q)
        #[arg(long)]
        pb: String,
        /// Generator seed
        #[arg(long)]
        seed: u64,
        /// Output instance file
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode an instance file into WCNF plus a variable map
    Encode {
        /// Input instance file
        #[arg(long = "in")]
        input: PathBuf,
        /// Output WCNF file
        #[arg(long)]
        out_wcnf: PathBuf,
        /// Output variable-map file
        #[arg(long)]
        out_map: PathBuf,
    },
    /// Solve a WCNF file to optimality
    Solve {
        /// Input WCNF file
        #[arg(long)]
        wcnf: PathBuf,
    },
    /// Recover the signal of an instance file
    Recover {
        /// Input instance file
        #[arg(long = "in")]
        input: PathBuf,
        /// Recovery method: sat, l1 or brute
        #[arg(long)]
        method: String,
    },
    /// Run a benchmark experiment and write a CSV table
    Bench {
        /// Named preset: fig3, fig4, fig5 or smoke
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// Experiment config file (key=value lines)
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
        /// Worker threads for independent cells
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Check a candidate signal against an instance
    Verify {
        /// Input instance file
        #[arg(long = "in")]
        input: PathBuf,
        /// Candidate signal as a 0/1 string, e.g. 01011
        #[arg(long)]
        x: String,
    },
}

struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, msg: msg.into() }
    }

    fn io(msg: impl Into<String>) -> Self {
        Failure { code: EXIT_IO, msg: msg.into() }
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::io(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents)
        .map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))
}

fn read_instance(path: &Path) -> Result<model::SensingInstance, Failure> {
    let text = read_file(path)?;
    model::parse_instance(&text).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn bench_failure(e: BenchError) -> Failure {
    let code = match &e {
        BenchError::Io { .. } => EXIT_IO,
        _ => EXIT_USAGE,
    };
    Failure { code, msg: e.to_string() }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Result<ExitCode, Failure> {
    match command {
        Command::Gen { n, m, s, pb, seed, out } => {
            let p = bench::parse_rational(&pb).map_err(bench_failure)?;
            let inst = bench::gen_instance(n, m, s, p, seed).map_err(bench_failure)?;
            write_file(&out, &model::write_instance(&inst))?;
            eprintln!("wrote instance {} ({m} x {n}, s = {s})", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Encode { input, out_wcnf, out_map } => {
            let inst = read_instance(&input)?;
            let enc = encode_instance(&inst);
            write_file(&out_wcnf, &cnf::emit_wcnf(&enc.wcnf))?;
            write_file(&out_map, &enc.var_map.emit())?;
            println!("vars {}", enc.wcnf.num_vars());
            println!("hard {}", enc.wcnf.hard().len());
            println!("soft {}", enc.wcnf.soft().len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Solve { wcnf } => {
            let text = read_file(&wcnf)?;
            let formula = cnf::parse_wcnf(&text)
                .map_err(|e| Failure::io(format!("{}: {e}", wcnf.display())))?;
            match solve_maxsat_with(&formula, |cost| println!("o {cost}")) {
                OptResult::Optimal(model, _cost) => {
                    println!("s OPTIMUM FOUND");
                    let lits: Vec<String> = (1..=formula.num_vars())
                        .map(|v| if model.value(v) { v.to_string() } else { format!("-{v}") })
                        .collect();
                    println!("v {}", lits.join(" "));
                    Ok(ExitCode::SUCCESS)
                }
                OptResult::Infeasible => {
                    println!("s UNSATISFIABLE");
                    Ok(ExitCode::from(EXIT_INFEASIBLE))
                }
            }
        }
        Command::Recover { input, method } => {
            let method: Method = method.parse().map_err(|e| Failure::usage(format!("{e}")))?;
            let inst = read_instance(&input)?;
            match bench::recover(method, &inst).map_err(bench_failure)? {
                Some(report) => {
                    println!("cost {}", report.cost);
                    println!("x {}", report.recovered);
                    if let Some(exact) = report.exact {
                        println!("exact {exact}");
                    }
                    eprintln!("{} recovery took {:?}", method, report.elapsed);
                    Ok(ExitCode::SUCCESS)
                }
                None => {
                    println!("infeasible");
                    Ok(ExitCode::from(EXIT_INFEASIBLE))
                }
            }
        }
        Command::Bench { preset, config, out, jobs } => {
            let cfg = match (preset, config) {
                (Some(name), None) => bench::preset(&name)
                    .ok_or_else(|| Failure::usage(format!("unknown preset `{name}`")))?,
                (None, Some(path)) => {
                    let text = read_file(&path)?;
                    bench::parse_config(&text).map_err(bench_failure)?
                }
                _ => return Err(Failure::usage("pass exactly one of --preset or --config")),
            };
            let cells = cfg.methods.len()
                * match cfg.kind {
                    bench::ExperimentKind::Oversampling => cfg.sparsity_rates.len(),
                    bench::ExperimentKind::ErrorVsCompression => cfg.compression_rates.len(),
                };
            eprintln!("running {cells} cells with {} trials each", cfg.trials);
            let rows = match jobs {
                Some(j) => {
                    let pool = rayon::ThreadPoolBuilder::new()
                        .num_threads(j)
                        .build()
                        .map_err(|e| Failure::usage(format!("cannot build worker pool: {e}")))?;
                    pool.install(|| bench::run_experiment(&cfg)).map_err(bench_failure)?
                }
                None => bench::run_experiment(&cfg).map_err(bench_failure)?,
            };
            bench::write_csv(&rows, &out.to_string_lossy()).map_err(bench_failure)?;
            eprintln!("wrote {} rows to {}", rows.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { input, x } => {
            let inst = read_instance(&input)?;
            if x.len() != inst.num_cols() {
                return Err(Failure::usage(format!(
                    "signal has {} digits but the instance has N = {}",
                    x.len(),
                    inst.num_cols()
                )));
            }
            let bits: Vec<bool> = x
                .chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    other => Err(Failure::usage(format!("signal digit `{other}` is not 0/1"))),
                })
                .collect::<Result<_, _>>()?;
            let signal = BinarySignal::new(bits).map_err(|e| Failure::usage(e.to_string()))?;
            let measured = model::measure(inst.matrix(), &signal)
                .map_err(|e| Failure::usage(e.to_string()))?;
            println!("sparsity {}", signal.sparsity());
            if &measured == inst.measurements() {
                println!("feasible true");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("feasible false");
                Ok(ExitCode::from(EXIT_INFEASIBLE))
            }
        }
    }
}
