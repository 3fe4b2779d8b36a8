use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use blindspot::crypto_ure::selftest::{run_selftest_seeded, Mutation, SelftestOptions};
use blindspot::crypto_ure::GroupParams;
use blindspot::experiment::{analyze_traces, read_traces, write_outcome, ExperimentSpec};
use blindspot::sim_engine::report::write_entropy_csv;
use blindspot::social_graph::{generate_ba, load_dataset, map_uploads, write_dataset, LoadOptions, SyntheticUploads};
use blindspot::Error;
use clap::{Parser, Subcommand, ValueEnum};

/// Default parent directory for experiment outputs when the experiment file names none.
const OUT_ENV: &str = "BLINDSPOT_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "blindspot", version, about = "Simulate anonymous routing over social-network uploads")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a Barabasi-Albert graph and its upload counts as CSV.
    Generate {
        /// Node count and edges per new node.
        #[arg(long, num_args = 2, value_names = ["N", "M"], required = true)]
        ba: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        months: usize,
        /// Seed of the synthetic upload counts.
        #[arg(long, default_value_t = 2)]
        upload_seed: u64,
        /// Take upload rows from this CSV instead of generating them.
        #[arg(long)]
        map_uploads: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the experiment described by a JSON spec.
    Run {
        spec: PathBuf,
        /// Overrides `sim.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the experiment file's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Path entropy from the traces of an earlier run.
    Analyze {
        /// Spec the traces came from (used to rebuild the network).
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        traces: PathBuf,
        #[arg(long, default_value_t = 10)]
        bins: usize,
        /// Where to write entropy.csv; printed summary only when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the re-encryption scheme's properties at a group size.
    CryptoSelftest {
        #[arg(long, default_value_t = 256)]
        bits: u64,
        #[arg(long, value_enum)]
        mutation: Option<MutationArg>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MutationArg {
    Identity,
    StaticPayload,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. }
        | Error::Parse { .. }
        | Error::InvalidInput(_)
        | Error::DanglingEdge { .. }
        | Error::UnknownNode(_) => 2,
        Error::Infeasible(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate {
            ba,
            seed,
            months,
            upload_seed,
            map_uploads,
            out,
        } => generate(ba[0], ba[1], seed, months, upload_seed, map_uploads.as_deref(), &out),
        Command::Run { spec, seed, out } => run(&spec, seed, out),
        Command::Analyze {
            spec,
            traces,
            bins,
            out,
        } => analyze(&spec, &traces, bins, out.as_deref()),
        Command::CryptoSelftest { bits, mutation, seed } => return selftest(bits, mutation, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn generate(
    n: usize,
    m: usize,
    seed: u64,
    months: usize,
    upload_seed: u64,
    mapped: Option<&Path>,
    out: &Path,
) -> blindspot::Result<()> {
    let graph = generate_ba(n, m, seed)?;
    let behaviours = match mapped {
        Some(p) => {
            let (records, _) = load_dataset(std::io::empty(), File::open(p)?, &LoadOptions::default())?;
            map_uploads(&graph, &records.behaviours, None)?
        }
        None => SyntheticUploads {
            months,
            ..SyntheticUploads::default()
        }
        .generate(n, upload_seed)?,
    };
    std::fs::create_dir_all(out)?;
    let (e, u) = (out.join("edges.csv"), out.join("uploads.csv"));
    write_dataset(
        &graph,
        &behaviours,
        BufWriter::new(File::create(&e)?),
        BufWriter::new(File::create(&u)?),
    )?;
    println!("{} nodes, {} edges -> {}, {}", graph.node_count(), graph.edge_count(), e.display(), u.display());
    Ok(())
}

fn output_dir(spec: &ExperimentSpec, flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| spec.outputs.clone()).unwrap_or_else(|| {
        let parent = std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("blindspot-out"), PathBuf::from);
        parent.join(&spec.name)
    })
}

fn run(path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> blindspot::Result<()> {
    let mut spec = ExperimentSpec::from_path(path)?;
    if let Some(s) = seed {
        spec = spec.with_seed(s);
    }
    let dir = output_dir(&spec, out);
    let start = Instant::now();
    let outcome = spec.run()?;
    for r in &outcome.rows {
        println!(
            "{} pairs={} removal={}:{:.2} delivery={:.3} delay={} dup={}",
            r.label,
            r.pair_count,
            r.strategy,
            r.fraction,
            r.delivery_rate,
            r.mean_delay_days.map_or("-".into(), |d| format!("{d:.2}")),
            r.dup_mean.map_or("-".into(), |d| format!("{d:.2}")),
        );
    }
    if let Some(e) = &outcome.entropy {
        println!(
            "entropy median={} of max {:.3} ({} pairs, {} excluded)",
            e.median.map_or("-".into(), |m| format!("{m:.3}")),
            e.max_entropy,
            e.pairs.len(),
            e.excluded.len()
        );
    }
    for p in write_outcome(&outcome, &dir)? {
        println!("wrote {}", p.display());
    }
    eprintln!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}

fn analyze(spec: &Path, traces: &Path, bins: usize, out: Option<&Path>) -> blindspot::Result<()> {
    let spec = ExperimentSpec::from_path(spec)?;
    let net = spec.load_network()?;
    let report = analyze_traces(read_traces(traces)?, &net.behaviours, spec.sim.days_per_month, bins)?;
    println!(
        "median entropy {} of max {:.3}; {} pairs analysed, {} excluded",
        report.median.map_or("-".into(), |m| format!("{m:.3}")),
        report.max_entropy,
        report.pairs.len(),
        report.excluded.len()
    );
    let shares: Vec<String> = report.distribution.iter().map(|s| format!("{s:.2}")).collect();
    println!("distribution by tenth of max: {}", shares.join(" "));
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let p = dir.join("entropy.csv");
        write_entropy_csv(&report, BufWriter::new(File::create(&p)?))?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn selftest(bits: u64, mutation: Option<MutationArg>, seed: u64) -> ExitCode {
    let params = match GroupParams::with_bits(bits) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let opts = SelftestOptions {
        mutation: mutation.map(|m| match m {
            MutationArg::Identity => Mutation::IdentityReencryption,
            MutationArg::StaticPayload => Mutation::StaticPayloadPair,
        }),
        ..SelftestOptions::default()
    };
    let report = run_selftest_seeded(&params, &opts, seed);
    for c in &report.checks {
        println!(
            "{:<22} {} {:>9.3}s  {}",
            c.name,
            if c.passed { "pass" } else { "FAIL" },
            c.elapsed.as_secs_f64(),
            c.detail
        );
    }
    let total: f64 = report.checks.iter().map(|c| c.elapsed.as_secs_f64()).sum();
    println!("{}-bit group, {:.3}s total", report.group_bits, total);
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
