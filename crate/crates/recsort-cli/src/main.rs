use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use recsort::error::Error;
use recsort::genval::{generate, validate, Distribution, Encoding, GenSpec};
use recsort::io::DirectIo;
use recsort::pipeline::{sort_file, ExecConfig, ModeChoice};
use recsort_cli::{bench_compare, emit, scenario, Scenario, DEFAULT_MEMORY_LIMIT, SCENARIOS};

#[derive(Parser)]
#[command(
    name = "recsort",
    version,
    about = "Sort, generate, and validate fixed-layout 100-byte record files"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DistArg {
    Uniform,
    Skewed,
}

impl From<DistArg> for Distribution {
    fn from(d: DistArg) -> Self {
        match d {
            DistArg::Uniform => Distribution::Uniform,
            DistArg::Skewed => Distribution::Skewed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EncodingArg {
    Binary,
    Ascii,
}

impl From<EncodingArg> for Encoding {
    fn from(e: EncodingArg) -> Self {
        match e {
            EncodingArg::Binary => Encoding::Binary,
            EncodingArg::Ascii => Encoding::Ascii,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Auto,
    Internal,
    External,
}

impl From<ModeArg> for ModeChoice {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Auto => ModeChoice::Auto,
            ModeArg::Internal => ModeChoice::Internal,
            ModeArg::External => ModeChoice::External,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectIoArg {
    On,
    Off,
    Auto,
}

impl From<DirectIoArg> for DirectIo {
    fn from(d: DirectIoArg) -> Self {
        match d {
            DirectIoArg::On => DirectIo::On,
            DirectIoArg::Off => DirectIo::Off,
            DirectIoArg::Auto => DirectIo::Auto,
        }
    }
}

/// Knobs shared by `sort` and `bench`.
#[derive(clap::Args)]
struct SortKnobs {
    /// Memory budget in bytes.
    #[arg(long, default_value_t = DEFAULT_MEMORY_LIMIT)]
    memory_limit: usize,
    #[arg(long, value_enum, default_value = "auto")]
    mode: ModeArg,
    /// Worker threads (default: all hardware threads).
    #[arg(long)]
    threads: Option<usize>,
    /// Concurrent read requests (default: min(threads, 10)).
    #[arg(long)]
    readers: Option<usize>,
    /// Read request size in bytes.
    #[arg(long, default_value_t = 262_144)]
    chunk_size: usize,
    /// Buckets larger than this recurse with all workers (default: adaptive).
    #[arg(long)]
    big_bucket_threshold: Option<usize>,
    /// Spans smaller than this finish with a comparison sort.
    #[arg(long, default_value_t = 64)]
    tiny_bucket_threshold: usize,
    #[arg(long, value_enum, default_value = "auto")]
    direct_io: DirectIoArg,
}

impl SortKnobs {
    fn exec_config(&self) -> ExecConfig {
        let threads = self.threads.unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        });
        let mut config = ExecConfig::with_threads(threads);
        config.readers = self.readers;
        config.chunk_size = self.chunk_size;
        config.direct_io = self.direct_io.into();
        config.radix.big_bucket_threshold = self.big_bucket_threshold;
        config.radix.tiny_bucket_threshold = self.tiny_bucket_threshold;
        config
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset of 100-byte records.
    Gen {
        #[arg(long)]
        records: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, value_enum, default_value = "uniform")]
        dist: DistArg,
        #[arg(long, value_enum, default_value = "binary")]
        encoding: EncodingArg,
        #[arg(long)]
        threads: Option<usize>,
        output: PathBuf,
    },
    /// Sort a record file.
    Sort {
        #[command(flatten)]
        knobs: SortKnobs,
        input: PathBuf,
        output: PathBuf,
    },
    /// Check key order and report the multiset checksum. Exits 0 iff sorted.
    Validate { path: PathBuf },
    /// Run a named scenario: generate, sort, validate, report timings.
    Bench {
        /// One of the shipped scenarios.
        #[arg(long)]
        scenario: String,
        /// Working directory for scenario data (default: system temp).
        #[arg(long)]
        dir: Option<PathBuf>,
        /// Also time the radix kernel against the comparison baseline.
        #[arg(long)]
        compare: bool,
        /// Only run the kernel comparison, skipping the file pipeline.
        #[arg(long)]
        compare_only: bool,
        #[command(flatten)]
        knobs: SortKnobs,
    },
}

fn main() -> ExitCode {
    // Behave like a conventional pipeline tool when stdout closes early
    // (`recsort gen ... | head`): die on SIGPIPE instead of panicking.
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            // Every variant's Display already folds in its source chain.
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

/// Usage-class errors (bad flag values) exit 2; runtime failures exit 1.
fn exit_code_for(e: &Error) -> u8 {
    let innermost = innermost(e);
    match innermost {
        Error::Usage(_) | Error::InvalidConfig(_) => 2,
        _ => 1,
    }
}

fn innermost(e: &Error) -> &Error {
    match e {
        Error::Stage { source, .. } => innermost(source),
        other => other,
    }
}

fn run(cli: Cli) -> recsort::Result<ExitCode> {
    match cli.command {
        Command::Gen {
            records,
            seed,
            dist,
            encoding,
            threads,
            output,
        } => {
            let spec = GenSpec {
                record_count: records,
                seed,
                distribution: dist.into(),
                encoding: encoding.into(),
            };
            let threads = threads.unwrap_or_else(|| {
                std::thread::available_parallelism()
                    .map(|n| n.get())
                    .unwrap_or(1)
            });
            let written = generate(&spec, &output, threads)?;
            println!("records={written}");
            println!("bytes={}", spec.file_len());
            println!("seed={seed}");
            println!("dist={}", emit::distribution(spec.distribution));
            println!("encoding={}", emit::encoding(spec.encoding));
            println!("path={}", output.display());
            Ok(ExitCode::SUCCESS)
        }

        Command::Sort {
            knobs,
            input,
            output,
        } => {
            let config = knobs.exec_config();
            config.validate()?;
            let mode: ModeChoice = knobs.mode.into();
            let report = sort_file(&input, &output, knobs.memory_limit, mode, &config)?;
            for line in emit::execution_lines(&report) {
                println!("{line}");
            }
            for line in emit::config_lines(&config, knobs.memory_limit, mode) {
                println!("{line}");
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Validate { path } => {
            let report = validate(&path)?;
            println!("ordered={}", report.ordered);
            match report.first_violation {
                Some(i) => println!("first_violation={i}"),
                None => println!("first_violation=none"),
            }
            println!("records={}", report.record_count);
            println!("checksum={}", emit::checksum(report.checksum.value()));
            if report.ordered {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }

        Command::Bench {
            scenario: name,
            dir,
            compare,
            compare_only,
            knobs,
        } => {
            let Some(scenario) = scenario(&name) else {
                let known: Vec<&str> = SCENARIOS.iter().map(|s| s.name).collect();
                return Err(Error::Usage(format!(
                    "unknown scenario `{name}`; known: {}",
                    known.join(", ")
                )));
            };
            run_bench(scenario, dir, compare, compare_only, knobs)
        }
    }
}

fn run_bench(
    scenario: Scenario,
    dir: Option<PathBuf>,
    compare: bool,
    compare_only: bool,
    knobs: SortKnobs,
) -> recsort::Result<ExitCode> {
    let config = knobs.exec_config();
    config.validate()?;
    let memory_limit = scenario.memory_limit.unwrap_or(knobs.memory_limit);
    let mode: ModeChoice = knobs.mode.into();
    let spec = scenario.gen_spec();

    println!("scenario={}", scenario.name);
    println!("seed={}", scenario.seed);
    println!("dist={}", emit::distribution(scenario.distribution));
    println!("encoding={}", emit::encoding(scenario.encoding));

    if !compare_only {
        let dir = match &dir {
            Some(d) => {
                std::fs::create_dir_all(d)
                    .map_err(|e| Error::io("cannot create bench dir", d, e))?;
                d.clone()
            }
            None => std::env::temp_dir().join("recsort-bench"),
        };
        std::fs::create_dir_all(&dir)
            .map_err(|e| Error::io("cannot create bench dir", &dir, e))?;
        let input = dir.join(format!("{}-{}.dat", scenario.name, scenario.seed));
        let output = dir.join(format!("{}.sorted", scenario.name));

        // Generation is deterministic, so an existing file of the right size
        // is the same file.
        let expected = spec.file_len();
        let reuse = std::fs::metadata(&input)
            .map(|m| m.len() == expected)
            .unwrap_or(false);
        if !reuse {
            generate(&spec, &input, config.threads)?;
        }
        println!("input={}", input.display());
        println!("input_reused={reuse}");

        let report = sort_file(&input, &output, memory_limit, mode, &config)?;
        for line in emit::execution_lines(&report) {
            println!("{line}");
        }

        let input_report = validate(&input)?;
        let output_report = validate(&output)?;
        println!("validated_ordered={}", output_report.ordered);
        println!(
            "checksum_match={}",
            input_report.checksum == output_report.checksum
                && input_report.record_count == output_report.record_count
        );
        if !output_report.ordered || input_report.checksum != output_report.checksum {
            return Err(Error::DataIntegrity(
                "benchmark output failed validation".into(),
            ));
        }
    }

    if compare || compare_only {
        let report = bench_compare(&spec, config.threads, &config.radix);
        for line in emit::compare_lines(&report) {
            println!("{line}");
        }
        if !report.identical_keys {
            return Err(Error::DataIntegrity(
                "kernel comparison produced diverging key sequences".into(),
            ));
        }
    }

    for line in emit::config_lines(&config, memory_limit, mode) {
        println!("{line}");
    }
    Ok(ExitCode::SUCCESS)
}
