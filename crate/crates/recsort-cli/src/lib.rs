//! Benchmark harness behind the `recsort` binary: named scenarios, the
//! radix-vs-comparison kernel comparison, and the line-oriented `key=value`
//! report format (stable and diff-able, so CI can track it).

use std::time::{Duration, Instant};

use rayon::slice::ParallelSliceMut;

use recsort::genval::{Distribution, Encoding, GenSpec, KeyModel};
use recsort::pipeline::{ExecConfig, ExecutionReport, ModeChoice};
use recsort::radix::{msd_radix_sort, RadixConfig};
use recsort::KeyRef;

/// Default sort memory budget: 1 GiB.
pub const DEFAULT_MEMORY_LIMIT: usize = 1 << 30;

/// A shipped benchmark scenario; scaled-down analogs of the contest-style
/// in-memory, skewed, ASCII, and external workloads.
#[derive(Debug, Clone, Copy)]
pub struct Scenario {
    pub name: &'static str,
    pub records: u64,
    pub seed: u64,
    pub distribution: Distribution,
    pub encoding: Encoding,
    /// Budget override; external-capped pins one to force the external path.
    pub memory_limit: Option<usize>,
}

pub const SCENARIOS: &[Scenario] = &[
    Scenario {
        name: "uniform-small",
        records: 100_000,
        seed: 42,
        distribution: Distribution::Uniform,
        encoding: Encoding::Binary,
        memory_limit: None,
    },
    Scenario {
        name: "uniform-large",
        records: 10_000_000,
        seed: 42,
        distribution: Distribution::Uniform,
        encoding: Encoding::Binary,
        memory_limit: None,
    },
    Scenario {
        name: "skewed-large",
        records: 10_000_000,
        seed: 43,
        distribution: Distribution::Skewed,
        encoding: Encoding::Binary,
        memory_limit: None,
    },
    Scenario {
        name: "ascii-small",
        records: 100_000,
        seed: 44,
        distribution: Distribution::Uniform,
        encoding: Encoding::Ascii,
        memory_limit: None,
    },
    Scenario {
        name: "external-capped",
        records: 2_000_000,
        seed: 45,
        distribution: Distribution::Uniform,
        encoding: Encoding::Binary,
        memory_limit: Some(64 << 20),
    },
];

pub fn scenario(name: &str) -> Option<Scenario> {
    SCENARIOS.iter().copied().find(|s| s.name == name)
}

impl Scenario {
    pub fn gen_spec(&self) -> GenSpec {
        GenSpec {
            record_count: self.records,
            seed: self.seed,
            distribution: self.distribution,
            encoding: self.encoding,
        }
    }
}

/// Outcome of running the same in-memory keyref sort with both kernels.
#[derive(Debug, Clone, Copy)]
pub struct CompareReport {
    pub records: u64,
    pub radix: Duration,
    pub comparison: Duration,
    /// Correctness gate: both kernels produced the same key sequence.
    pub identical_keys: bool,
}

impl CompareReport {
    /// Comparison time over radix time; `None` when there was nothing to
    /// sort.
    pub fn ratio(&self) -> Option<f64> {
        if self.records == 0 {
            return None;
        }
        let radix = self.radix.as_secs_f64();
        if radix <= 0.0 {
            return None;
        }
        Some(self.comparison.as_secs_f64() / radix)
    }
}

/// Synthesizes the scenario's key references in memory.
pub fn scenario_keyrefs(spec: &GenSpec) -> Vec<KeyRef> {
    let model = KeyModel::new(*spec);
    (0..spec.record_count)
        .map(|i| KeyRef {
            key: model.key(i),
            ordinal: i,
        })
        .collect()
}

/// Sorts identical keyref arrays with the radix kernel and with a parallel
/// comparison-sort baseline, timing both. The baseline is `rayon`'s parallel
/// unstable sort on the same worker count — the strongest stand-in for a
/// library parallel merge/quick sort.
pub fn bench_compare(spec: &GenSpec, threads: usize, radix_config: &RadixConfig) -> CompareReport {
    let source = scenario_keyrefs(spec);

    let mut radix_data = source.clone();
    let radix_started = Instant::now();
    msd_radix_sort(&mut radix_data, radix_config);
    let radix = radix_started.elapsed();

    let mut comparison_data = source;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .expect("baseline thread pool");
    let comparison_started = Instant::now();
    pool.install(|| {
        comparison_data.par_sort_unstable_by(|a, b| a.key.cmp(&b.key));
    });
    let comparison = comparison_started.elapsed();

    let identical_keys = radix_data.len() == comparison_data.len()
        && radix_data
            .iter()
            .zip(&comparison_data)
            .all(|(a, b)| a.key == b.key);

    CompareReport {
        records: spec.record_count,
        radix,
        comparison,
        identical_keys,
    }
}

/// `key=value` report lines.
pub mod emit {
    use super::*;

    pub fn ms(d: Duration) -> String {
        format!("{:.3}", d.as_secs_f64() * 1e3)
    }

    pub fn checksum(value: u128) -> String {
        format!("{value:#034x}")
    }

    pub fn distribution(d: Distribution) -> &'static str {
        match d {
            Distribution::Uniform => "uniform",
            Distribution::Skewed => "skewed",
        }
    }

    pub fn encoding(e: Encoding) -> &'static str {
        match e {
            Encoding::Binary => "binary",
            Encoding::Ascii => "ascii",
        }
    }

    /// The execution section of a sort/bench report.
    pub fn execution_lines(report: &ExecutionReport) -> Vec<String> {
        vec![
            format!("mode={}", report.mode),
            format!("records={}", report.record_count),
            format!("total_ms={}", ms(report.timing.total)),
            format!("read_ms={}", ms(report.timing.read)),
            format!("sort_ms={}", ms(report.timing.sort)),
            format!("merge_ms={}", ms(report.timing.merge)),
            format!("write_ms={}", ms(report.timing.write)),
            format!("runs={}", report.run_count),
            format!("partitions={}", report.partition_count),
            format!("pool_peak_bytes={}", report.pool_peak_bytes),
            format!("pool_budget_bytes={}", report.pool_budget_bytes),
            format!("direct_io_fallback={}", report.direct_io_fallback),
        ]
    }

    /// The config echo: every knob that affects execution, reproducibly.
    pub fn config_lines(config: &ExecConfig, memory_limit: usize, mode: ModeChoice) -> Vec<String> {
        let mode = match mode {
            ModeChoice::Auto => "auto",
            ModeChoice::Internal => "internal",
            ModeChoice::External => "external",
        };
        let big = match config.radix.big_bucket_threshold {
            Some(n) => n.to_string(),
            None => "auto".into(),
        };
        let direct = match config.direct_io {
            recsort::io::DirectIo::On => "on",
            recsort::io::DirectIo::Off => "off",
            recsort::io::DirectIo::Auto => "auto",
        };
        vec![
            format!("cfg.memory_limit={memory_limit}"),
            format!("cfg.mode={mode}"),
            format!("cfg.threads={}", config.threads),
            format!("cfg.readers={}", config.effective_readers()),
            format!("cfg.chunk_size={}", config.chunk_size),
            format!("cfg.scan_chunk={}", config.scan_chunk()),
            format!("cfg.direct_io={direct}"),
            format!("cfg.big_bucket_threshold={big}"),
            format!(
                "cfg.tiny_bucket_threshold={}",
                config.radix.tiny_bucket_threshold
            ),
            format!(
                "cfg.scatter_buffer_capacity={}",
                config.radix.scatter_buffer_capacity
            ),
            format!("cfg.queue_capacity={}", config.queue_capacity),
            format!("cfg.samples_per_run={}", config.samples_per_run),
        ]
    }

    pub fn compare_lines(report: &CompareReport) -> Vec<String> {
        let ratio = report
            .ratio()
            .map(|r| format!("{r:.2}"))
            .unwrap_or_else(|| "n/a".into());
        vec![
            format!("compare.records={}", report.records),
            format!("compare.radix_ms={}", ms(report.radix)),
            format!("compare.comparison_ms={}", ms(report.comparison)),
            format!("compare.ratio={ratio}"),
            format!("compare.identical_keys={}", report.identical_keys),
        ]
    }
}
