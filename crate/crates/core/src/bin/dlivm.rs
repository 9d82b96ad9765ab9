use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use dlivm::eval::materialise;
use dlivm::harness::{
    read_delta, read_facts, read_program, run_suite, verify_update, BenchmarkSpec, HarnessError, RandomSpec,
    SspeSpec, Suite, VerifyReport,
};
use dlivm::maintain::{Algorithm, UpdateStats};
use dlivm::parser::render_facts;
use dlivm::store::CounterMode;

#[derive(Parser)]
#[command(name = "dlivm", version, about = "Stratified datalog materialisation and incremental maintenance")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Counters {
    None,
    Nr,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Dred,
    Dredc,
    Bf,
    Bfc,
}

#[derive(Clone, Copy, ValueEnum)]
enum Generator {
    Ex1,
    Ex2,
    Ex3,
    Sspe,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Scaling,
    Fuzz,
}

#[derive(Subcommand)]
enum Command {
    /// Materialise a program over a fact file.
    Mat {
        program: PathBuf,
        data: PathBuf,
        #[arg(long)]
        dump: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "both")]
        counters: Counters,
    },
    /// Materialise, then apply an update with one maintenance algorithm.
    Update {
        program: PathBuf,
        data: PathBuf,
        change: PathBuf,
        #[arg(long, value_enum)]
        algo: Algo,
        #[arg(long)]
        stats: Option<PathBuf>,
        #[arg(long)]
        verify: bool,
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Write prog.dl, data.facts and change.delta for a generated instance.
    Gen {
        #[arg(value_enum)]
        generator: Generator,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        nodes: usize,
        #[arg(long, default_value_t = 10_000)]
        edges: usize,
        #[arg(long, default_value_t = 1)]
        max_length: i64,
        #[arg(long, default_value_t = 100)]
        deletions: usize,
        #[arg(long, default_value_t = 6)]
        rules: usize,
        #[arg(long, default_value_t = 60)]
        facts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a benchmark suite under all four algorithms, checking each result.
    Bench {
        #[arg(long, value_enum)]
        suite: SuiteArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a result fact file against rematerialisation after an update.
    Verify { program: PathBuf, data: PathBuf, change: PathBuf, result: PathBuf },
}

enum Failure {
    Usage(String),
    Verify,
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<dlivm::error::EngineError> for Failure {
    fn from(e: dlivm::error::EngineError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Verify) => ExitCode::from(2),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn report_verify(report: &VerifyReport) -> Result<(), Failure> {
    println!("{report}");
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Verify)
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Mat { program, data, dump, counters } => {
            let program = read_program(&program)?;
            let facts = read_facts(&data)?;
            let mode = match counters {
                Counters::None => CounterMode::None,
                Counters::Nr => CounterMode::Nonrecursive,
                Counters::Both => CounterMode::Both,
            };
            let started = Instant::now();
            let state = materialise(program, &facts, mode)?;
            println!(
                "{} facts ({} explicit) in {:.3} ms",
                state.facts().len(),
                state.explicit().len(),
                started.elapsed().as_secs_f64() * 1000.0
            );
            if let Some(path) = dump {
                write_file(&path, &render_facts(&state.facts().to_sorted_vec()))?;
            }
        }
        Command::Update { program, data, change, algo, stats, verify, dump } => {
            let algorithm = match algo {
                Algo::Dred => Algorithm::Dred,
                Algo::Dredc => Algorithm::DredC,
                Algo::Bf => Algorithm::Bf,
                Algo::Bfc => Algorithm::BfC,
            };
            let program = read_program(&program)?;
            let facts = read_facts(&data)?;
            let delta = read_delta(&change)?;
            let mut state = materialise(program, &facts, CounterMode::Both)?;
            let report = state.update(algorithm, &delta)?;
            println!(
                "{algorithm}: -{} +{} facts, {} instances, {} backward candidates, {:.3} ms",
                report.removed.len(),
                report.inserted.len(),
                report.stats.instances(),
                report.stats.backward_candidates(),
                report.stats.wall().as_secs_f64() * 1000.0
            );
            if let Some(path) = stats {
                let mut out = BufWriter::new(File::create(&path)?);
                writeln!(out, "{}", UpdateStats::CSV_HEADER)?;
                report.stats.write_csv(algorithm.name(), &mut out)?;
                out.flush()?;
            }
            if let Some(path) = dump {
                write_file(&path, &render_facts(&state.facts().to_sorted_vec()))?;
            }
            if verify {
                report_verify(&verify_update(state.program(), &facts, &delta, &state)?)?;
            }
        }
        Command::Gen { generator, n, nodes, edges, max_length, deletions, rules, facts, seed, out } => {
            let spec = match generator {
                Generator::Ex1 => BenchmarkSpec::SelfJoin { n },
                Generator::Ex2 => BenchmarkSpec::PathEnumeration { n },
                Generator::Ex3 => BenchmarkSpec::Reachability,
                Generator::Sspe => BenchmarkSpec::Sspe(SspeSpec { nodes, edges, seed, max_length, deletions }),
                Generator::Random => BenchmarkSpec::Random(RandomSpec { seed, rules, facts, ..RandomSpec::default() }),
            };
            let instance = spec.generate()?;
            fs::create_dir_all(&out)?;
            write_file(&out.join("prog.dl"), &instance.program.to_string())?;
            write_file(&out.join("data.facts"), &render_facts(&instance.facts.to_sorted_vec()))?;
            write_file(&out.join("change.delta"), &instance.delta.to_string())?;
            println!("wrote {} in {}", spec.id(), out.display());
        }
        Command::Bench { suite, out } => {
            let suite = match suite {
                SuiteArg::Scaling => Suite::Scaling,
                SuiteArg::Fuzz => Suite::Fuzz,
            };
            let mut file = BufWriter::new(File::create(&out)?);
            let summary = run_suite(suite, &mut file)?;
            file.flush()?;
            println!("{} runs, {} failures", summary.runs, summary.failures.len());
            for f in &summary.failures {
                println!("FAIL {f}");
            }
            if !summary.failures.is_empty() {
                return Err(Failure::Verify);
            }
        }
        Command::Verify { program, data, change, result } => {
            let program = Arc::new(read_program(&program)?);
            let mut explicit = read_facts(&data)?;
            let delta = read_delta(&change)?;
            let result = read_facts(&result)?;
            for f in &delta.deletions {
                explicit.remove(f);
            }
            for f in &delta.insertions {
                explicit.insert(f);
            }
            report_verify(&VerifyReport::against_oracle(program, &explicit, &result, None)?)?;
        }
    }
    Ok(())
}
