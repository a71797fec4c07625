//! `wrs`: generate weight files, time structure builds and queries, and run
//! the verification suites. Benchmark rows are written as CSV.

mod weightfile;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::collections::HashSet;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};
use wrs::verify::suites::{run_suite, Suite};
use wrs::verify::{chi_square, max_relative_error, ImpliedMass, ALPHA};
use wrs::*;

const DEFAULT_SEED: u64 = 0xC0FFEE;

#[derive(Parser)]
#[command(name = "wrs", version, about = "Weighted random sampling benchmarks")]
struct Cli {
    /// Base seed; decimal or 0x-prefixed hex.
    #[arg(long, global = true, env = "WRS_SEED", value_parser = parse_seed)]
    seed: Option<u64>,

    /// Draw a seed from the clock instead (printed to stderr).
    #[arg(long, global = true)]
    fresh_seed: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a weight file.
    Gen(GenArgs),
    /// Time structure construction.
    Build(BuildArgs),
    /// Time queries on a structure built in-process.
    Sample(SampleArgs),
    /// Run verification suites.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Dist {
    Uniform,
    Powerlaw,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "uniform")]
    dist: Dist,
    /// Power-law exponent.
    #[arg(long, default_value_t = 1.0)]
    s: f64,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum)]
enum Algo {
    Vose,
    Sweep,
    Psa,
    #[value(name = "2lvl-classic")]
    TwoLevelClassic,
    #[value(name = "2lvl-sweep")]
    TwoLevelSweep,
    Compressed,
    Grouped,
    Subset,
}

#[derive(Args)]
struct Common {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    /// CSV output; stdout when absent.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Distribution label and skew for the CSV rows.
    #[arg(long, value_enum, default_value = "uniform")]
    dist: Dist,
    #[arg(long, default_value_t = 0.0)]
    s: f64,
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    algo: Algo,
    /// Group count for the two-level tables; defaults to `--threads`.
    #[arg(long)]
    groups: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum)]
enum Problem {
    One,
    With,
    Without,
    Permute,
    Subset,
    Reservoir,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    problem: Problem,
    /// Sample size.
    #[arg(long, default_value_t = 1000)]
    k: usize,
    /// Draws for `one`; mini-batch items per PE for `reservoir`.
    #[arg(long, default_value_t = 1_000_000)]
    trials: usize,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_parser = parse_suite, default_value = "all")]
    suite: Suite,
}

fn parse_seed(s: &str) -> Result<u64, String> {
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| format!("bad seed {s:?}: {e}"))
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse()
}

#[derive(Debug, Serialize)]
struct BenchRecord {
    algorithm: String,
    n: usize,
    k: usize,
    distribution: &'static str,
    s: f64,
    threads: usize,
    repetition: usize,
    phase: &'static str,
    wall_ns: u128,
    /// Outputs (items built or sampled) per second.
    throughput: f64,
    unique_outputs: Option<usize>,
    verified: Option<bool>,
}

enum Failure {
    Usage(String),
    Io(String),
    Verify(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verify(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Io(m) | Failure::Verify(m) => m,
        }
    }
}

impl From<weightfile::WeightFileError> for Failure {
    fn from(e: weightfile::WeightFileError) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(format!("csv: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let seed = if cli.fresh_seed {
        let t = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos() as u64);
        eprintln!("seed {t:#x}");
        t
    } else {
        cli.seed.unwrap_or(DEFAULT_SEED)
    };
    let result = match cli.command {
        Command::Gen(a) => gen(a, seed),
        Command::Build(a) => build(a),
        Command::Sample(a) => sample(a, seed),
        Command::Verify(a) => verify(a, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn gen(a: GenArgs, seed: u64) -> Result<(), Failure> {
    if a.n == 0 {
        return Err(Failure::Usage("--n must be at least 1".into()));
    }
    let dist = match a.dist {
        Dist::Uniform => Distribution::Uniform,
        Dist::Powerlaw if a.s >= 0.0 && a.s.is_finite() => Distribution::PowerLaw { s: a.s },
        Dist::Powerlaw => return Err(Failure::Usage(format!("--s must be >= 0, got {}", a.s))),
    };
    let weights = inputs::generate(dist, a.n, seed);
    weightfile::write(&a.out, &weights)?;
    Ok(())
}

fn dist_label(c: &Common) -> (&'static str, f64) {
    match c.dist {
        Dist::Uniform => ("uniform", 0.0),
        Dist::Powerlaw => ("powerlaw", c.s),
    }
}

fn pool(threads: usize) -> Result<rayon::ThreadPool, Failure> {
    if threads == 0 {
        return Err(Failure::Usage("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::Usage(format!("thread pool: {e}")))
}

/// Writes rows to `--csv` or stdout with a fixed header.
fn emit(path: Option<&Path>, rows: &[BenchRecord]) -> Result<(), Failure> {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(
            std::fs::File::create(p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?,
        ),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Failure::Io(e.to_string()))
}

fn mass_check(masses: Vec<f64>, weights: &[f64]) -> bool {
    max_relative_error(&masses, weights) <= 1e-9
}

fn record(
    c: &Common,
    algorithm: String,
    n: usize,
    k: usize,
    rep: usize,
    phase: &'static str,
    elapsed: std::time::Duration,
    outputs: usize,
) -> BenchRecord {
    let (distribution, s) = dist_label(c);
    let ns = elapsed.as_nanos().max(1);
    BenchRecord {
        algorithm,
        n,
        k,
        distribution,
        s,
        threads: c.threads,
        repetition: rep,
        phase,
        wall_ns: ns,
        throughput: outputs as f64 / (ns as f64 * 1e-9),
        unique_outputs: None,
        verified: None,
    }
}

fn algo_name(a: Algo) -> String {
    a.to_possible_value().expect("named").get_name().to_string()
}

fn build(a: BuildArgs) -> Result<(), Failure> {
    let c = &a.common;
    let weights = weightfile::read(&c.input)?;
    let wt = WeightTable::new(weights)?;
    let n = wt.len();
    let threads = c.threads;
    let groups = a.groups.unwrap_or(threads).clamp(1, n);
    let pool = pool(threads)?;
    let mut rows = Vec::new();
    for rep in 0..c.reps {
        let (elapsed, verified) = pool.install(|| -> Result<_, Failure> {
            let start = Instant::now();
            let verified = match a.algo {
                Algo::Vose | Algo::Sweep | Algo::Psa => {
                    let t = match a.algo {
                        Algo::Vose => AliasTable::build_vose(&wt),
                        Algo::Sweep => AliasTable::build_sweep(&wt),
                        _ => AliasTable::build_psa(&wt, threads),
                    };
                    let e = start.elapsed();
                    (e, Some(mass_check(t.implied_masses(), wt.weights())))
                }
                Algo::TwoLevelClassic | Algo::TwoLevelSweep => {
                    let base = if a.algo == Algo::TwoLevelSweep {
                        LocalBuilder::Sweep
                    } else {
                        LocalBuilder::Vose
                    };
                    let t = TwoLevelTable::build(&wt, groups, base, threads)?;
                    let e = start.elapsed();
                    (e, Some(mass_check(t.implied_masses(), wt.weights())))
                }
                Algo::Compressed => {
                    let t = CompressedTable::build(&wt, threads)?;
                    let e = start.elapsed();
                    (e, Some(mass_check(t.implied_masses(), wt.weights())))
                }
                Algo::Grouped => {
                    let g = GroupedSampler::build(&wt, threads)?;
                    let e = start.elapsed();
                    (e, Some(g.audit().is_ok()))
                }
                Algo::Subset => {
                    let s = SubsetSampler::build(&wt, threads)?;
                    let e = start.elapsed();
                    drop(s);
                    (e, None)
                }
            };
            Ok(verified)
        })?;
        let mut r = record(c, algo_name(a.algo), n, 0, rep, "build", elapsed, n);
        r.verified = verified;
        rows.push(r);
    }
    emit(c.csv.as_deref(), &rows)?;
    if rows.iter().any(|r| r.verified == Some(false)) {
        return Err(Failure::Verify("implied masses differ from the weights".into()));
    }
    Ok(())
}

fn problem_name(p: Problem) -> String {
    p.to_possible_value().expect("named").get_name().to_string()
}

fn distinct(items: impl IntoIterator<Item = usize>) -> usize {
    items.into_iter().collect::<HashSet<_>>().len()
}

fn sample(a: SampleArgs, seed: u64) -> Result<(), Failure> {
    let c = &a.common;
    let weights = weightfile::read(&c.input)?;
    let wt = WeightTable::new(weights)?;
    let n = wt.len();
    let threads = c.threads;
    let k = a.k;
    if a.problem == Problem::Without && k > n {
        return Err(Error::SampleTooLarge { k, n }.into());
    }
    let pool = pool(threads)?;
    let name = problem_name(a.problem);
    let mut rows = Vec::new();
    pool.install(|| -> Result<(), Failure> {
        let start = Instant::now();
        enum Built {
            Alias(AliasTable),
            Grouped(GroupedSampler),
            Subset(SubsetSampler),
            Nothing,
        }
        let built = match a.problem {
            Problem::One => Built::Alias(AliasTable::build_psa(&wt, threads)),
            Problem::With | Problem::Without => Built::Grouped(GroupedSampler::build(&wt, threads)?),
            Problem::Subset => Built::Subset(SubsetSampler::build(&wt, threads)?),
            Problem::Permute | Problem::Reservoir => Built::Nothing,
        };
        let build_time = start.elapsed();
        if !matches!(built, Built::Nothing) {
            rows.push(record(c, name.clone(), n, k, 0, "build", build_time, n));
        }
        for rep in 0..c.reps {
            let rep_seed = seed ^ ((rep as u64 + 1) << 48);
            let mut rng = RngStream::new(rep_seed, 0);
            let start = Instant::now();
            let (outputs, unique, verified, k_row) = match &built {
                Built::Alias(t) => {
                    let draws = t.sample_many(a.trials, threads, rep_seed);
                    let e = start.elapsed();
                    let mut counts = vec![0u64; n];
                    for &i in &draws {
                        counts[i] += 1;
                    }
                    let ok = if n > 1 {
                        chi_square(&counts, wt.weights(), ALPHA).ok().map(|c| c.passed)
                    } else {
                        None
                    };
                    rows.push(BenchRecord {
                        unique_outputs: Some(counts.iter().filter(|&&c| c > 0).count()),
                        verified: ok,
                        ..record(c, name.clone(), n, a.trials, rep, "query", e, a.trials)
                    });
                    continue;
                }
                Built::Grouped(g) if a.problem == Problem::With => {
                    let (out, _) = g.sample_replacement_with(k as u64, &mut rng, true, threads);
                    let total: u64 = out.iter().map(|s| s.multiplicity).sum();
                    (k, out.len(), Some(total == k as u64), k)
                }
                Built::Grouped(g) => {
                    let (out, _) = sample_no_replacement(g, k, &mut rng, threads)?;
                    let u = distinct(out.iter().copied());
                    (k, u, Some(u == k), k)
                }
                Built::Subset(s) => {
                    let out = s.sample(&mut rng, threads);
                    (out.len(), out.len(), None, out.len())
                }
                Built::Nothing if a.problem == Problem::Permute => {
                    let out = weighted_permutation(&wt, &mut rng, threads);
                    let u = distinct(out.iter().copied());
                    (n, u, Some(u == n), n)
                }
                Built::Nothing => {
                    let per_pe = a.trials.clamp(1, n);
                    let mut rs = ReservoirSampler::new(k.max(1), threads, rep_seed)?;
                    for b in MiniBatch::round_robin(wt.weights(), threads, per_pe) {
                        rs.process_batch(&b, threads)?;
                    }
                    let out = rs.sample();
                    (n, out.len(), Some(out.len() == k.max(1).min(n)), k)
                }
            };
            let e = start.elapsed();
            rows.push(BenchRecord {
                unique_outputs: Some(unique),
                verified,
                ..record(c, name.clone(), n, k_row, rep, "query", e, outputs)
            });
        }
        Ok(())
    })?;
    emit(c.csv.as_deref(), &rows)?;
    if rows.iter().any(|r| r.verified == Some(false)) {
        return Err(Failure::Verify(format!("{name}: output check failed")));
    }
    Ok(())
}

fn verify(a: VerifyArgs, seed: u64) -> Result<(), Failure> {
    let reports = run_suite(a.suite, seed, |r| println!("{r}"));
    let failed: Vec<String> = reports
        .iter()
        .filter(|r| !r.ok())
        .map(|r| r.id.to_string())
        .collect();
    let passed = reports.len() - failed.len();
    println!("{passed}/{} criteria passed", reports.len());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verify(format!("criteria {} failed", failed.join(", "))))
    }
}
