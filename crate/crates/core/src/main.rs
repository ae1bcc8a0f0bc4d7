use std::fs;
use std::io::BufReader;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tracing_subscriber::EnvFilter;

use uitrim::dsl::{parse_library, parse_program, TransformProgram};
use uitrim::evaluation::{load_examples, Scorer, TokenCounter};
use uitrim::interpreter::{apply_library_with, lift, serialize_views, ApplyOptions};
use uitrim::profiler::{parse_log, profile, render_csv, render_table};
use uitrim::representations::{render, render_baseline, RenderKind};
use uitrim::runtime::corpus::generate_corpus;
use uitrim::runtime::replay::{concurrency_sweep, generate_workload, parse_workload, replay, workload_to_text, LatencyModel};
use uitrim::runtime::{load_trees, measure_overhead, service, LoadedLibrary};
use uitrim::synthesis::{synthesize_with, EnumerativeGenerator, ExternalGenerator, GeneratorKind, SynthesisConfig};
use uitrim::ui_tree::{parse_any, serialize_canonical};

#[derive(Parser)]
#[command(name = "uitrim", version, about = "Transform UI trees into compact agent-facing representations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply a program or library to a tree and print the resulting views.
    Apply {
        #[command(flatten)]
        programs: ProgramSource,
        #[arg(long)]
        tree: PathBuf,
        #[arg(long, value_enum, default_value_t = ApplyFormat::Views)]
        format: ApplyFormat,
        #[arg(long)]
        retain_containers: bool,
    },
    /// Score a program or library against a directory of training examples.
    Score {
        #[command(flatten)]
        programs: ProgramSource,
        #[arg(long)]
        examples: PathBuf,
        #[arg(long, default_value = "default")]
        counter: String,
        #[arg(long, default_value = "hierarchical")]
        render: RenderKind,
    },
    /// Run the synthesis loop and write the accepted library and the ledger.
    Synthesize {
        #[arg(long)]
        examples: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config's generator.
        #[arg(long)]
        generator: Option<String>,
        #[arg(long)]
        out_library: PathBuf,
        #[arg(long)]
        out_ledger: PathBuf,
        #[arg(long, default_value = "default")]
        counter: String,
    },
    /// Render a tree (optionally transformed) in one of the representations.
    Render {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        program: Option<PathBuf>,
        #[arg(long, conflicts_with = "program")]
        library: Option<PathBuf>,
        #[arg(long, default_value = "hierarchical")]
        kind: RenderKind,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "default")]
        counter: String,
    },
    /// Per-component token breakdown of a prompt log.
    Profile {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value = "default")]
        counter: String,
        #[arg(long)]
        csv: bool,
    },
    /// Serve the transform pipeline over HTTP.
    Serve {
        #[arg(long)]
        library: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        #[arg(long, default_value = "default")]
        counter: String,
    },
    /// Time library application over a directory of trees.
    Overhead {
        #[arg(long)]
        trees: PathBuf,
        #[arg(long)]
        library: PathBuf,
    },
    /// Replay a request trace with and without transformation.
    Replay {
        #[arg(long)]
        workload: PathBuf,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        concurrency: usize,
        #[arg(long)]
        library: Option<PathBuf>,
        /// Also print closed-loop curves for these client counts (comma list).
        #[arg(long, value_delimiter = ',')]
        sweep: Vec<usize>,
        #[arg(long, default_value = "default")]
        counter: String,
    },
    /// Convert any supported tree document to the canonical format.
    Convert {
        #[arg(long)]
        tree: PathBuf,
    },
    /// Write a seeded synthetic tree corpus (one canonical file per tree).
    GenCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a seeded synthetic replay workload with exact token means.
    GenWorkload {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2000)]
        count: usize,
        #[arg(long, default_value_t = 8685)]
        mean_before: u64,
        #[arg(long, default_value_t = 2010)]
        mean_after: u64,
        /// Arrivals per second.
        #[arg(long, default_value_t = 14.0)]
        rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ProgramSource {
    #[arg(long)]
    program: Option<PathBuf>,
    #[arg(long)]
    library: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ApplyFormat {
    Views,
    Canonical,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_programs(program: Option<&Path>, library: Option<&Path>) -> Result<Vec<TransformProgram>> {
    match (program, library) {
        (Some(p), _) => Ok(vec![parse_program(&read(p)?).with_context(|| p.display().to_string())?]),
        (None, Some(l)) => Ok(parse_library(&read(l)?).with_context(|| l.display().to_string())?),
        (None, None) => Ok(Vec::new()),
    }
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match cli.command {
        Command::Apply { programs, tree, format, retain_containers } => {
            let lib = load_programs(programs.program.as_deref(), programs.library.as_deref())?;
            let tree = parse_any(&read(&tree)?)?;
            let views = apply_library_with(&lib, &tree, ApplyOptions { retain_containers })?;
            match format {
                ApplyFormat::Views => print!("{}", serialize_views(&views)),
                ApplyFormat::Canonical => print!("{}", serialize_canonical(&lift(&views).tree)),
            }
        }
        Command::Score { programs, examples, counter, render } => {
            let lib = load_programs(programs.program.as_deref(), programs.library.as_deref())?;
            let examples = load_examples(&examples)?;
            let counter = TokenCounter::parse(&counter)?;
            let scorer = Scorer::new(&examples, &counter, render)?;
            print!("{}", scorer.score_library(&lib)?.to_lines());
        }
        Command::Synthesize { examples, config, generator, out_library, out_ledger, counter } => {
            let examples = load_examples(&examples)?;
            let mut cfg = match &config {
                Some(p) => SynthesisConfig::parse(&read(p)?)?,
                None => SynthesisConfig::default(),
            };
            if let Some(g) = generator {
                cfg.generator = g.parse()?;
            }
            let counter = TokenCounter::parse(&counter)?;
            let out = match &cfg.generator {
                GeneratorKind::Enumerative => {
                    let mut g = EnumerativeGenerator::new(&examples, cfg.enumeration_budget);
                    synthesize_with(&examples, &cfg, &counter, &mut g)?
                }
                GeneratorKind::External(endpoint) => {
                    let mut g = ExternalGenerator::new(endpoint.clone());
                    synthesize_with(&examples, &cfg, &counter, &mut g)?
                }
            };
            fs::write(&out_library, out.library.to_text()).with_context(|| out_library.display().to_string())?;
            fs::write(&out_ledger, out.ledger.to_jsonl()).with_context(|| out_ledger.display().to_string())?;
            println!("stop\t{:?}", out.stop);
            println!("iterations\t{}", out.ledger.iterations.len());
            println!("programs\t{}", out.library.len());
            if let Some(r) = &out.library_report {
                print!("{}", r.to_lines());
            }
        }
        Command::Render { tree, program, library, kind, seed, counter } => {
            let counter = TokenCounter::parse(&counter)?;
            let tree = parse_any(&read(&tree)?)?;
            let rendered = if kind.is_view_kind() {
                let lib = load_programs(program.as_deref(), library.as_deref())?;
                let views = apply_library_with(&lib, &tree, ApplyOptions::default())?;
                render(&views, kind, seed, &counter)?
            } else {
                if program.is_some() || library.is_some() {
                    bail!("`{kind}` renders the untransformed tree; drop --program/--library");
                }
                render_baseline(&tree, kind, &counter)?
            };
            println!("{}", rendered.text());
            eprintln!("tokens\t{}", rendered.token_count);
        }
        Command::Profile { log, counter, csv } => {
            let counter = TokenCounter::parse(&counter)?;
            let f = fs::File::open(&log).with_context(|| log.display().to_string())?;
            let rows = profile(&parse_log(BufReader::new(f))?, &counter)?;
            if csv {
                print!("{}", render_csv(&rows)?);
            } else {
                print!("{}", render_table(&rows));
            }
        }
        Command::Serve { library, bind, counter } => {
            let counter = TokenCounter::parse(&counter)?;
            tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()?
                .block_on(service::serve(&library, bind, counter))?;
        }
        Command::Overhead { trees, library } => {
            let lib = LoadedLibrary::load(&library)?;
            let trees = load_trees(&trees)?;
            let s = measure_overhead(&trees, &lib.programs)?;
            println!("trees\t{}", s.trees);
            println!("min_ms\t{:.4}", s.min_ms);
            println!("mean_ms\t{:.4}", s.mean_ms);
            println!("p95_ms\t{:.4}", s.p95_ms);
            println!("max_ms\t{:.4}", s.max_ms);
        }
        Command::Replay { workload, a, b, concurrency, library, sweep, counter } => {
            let Some(model) = LatencyModel::new(a, b) else { bail!("--a and --b must be finite and non-negative") };
            if concurrency == 0 {
                bail!("--concurrency must be at least 1");
            }
            let counter = TokenCounter::parse(&counter)?;
            let lib = match &library {
                Some(l) => LoadedLibrary::load(l)?.programs,
                None => Vec::new(),
            };
            let w = parse_workload(&read(&workload)?, workload.parent())?;
            let cmp = replay(&w, model, concurrency, &lib, &counter)?;
            println!("config\trequests\tmean_tokens\tmin_ms\tmean_ms\tmax_ms\tqpm");
            for r in [&cmp.off, &cmp.on] {
                println!(
                    "{}\t{}\t{:.1}\t{:.1}\t{:.1}\t{:.1}\t{:.2}",
                    r.label, r.requests, r.mean_tokens, r.min_latency_ms, r.mean_latency_ms, r.max_latency_ms, r.qpm
                );
            }
            println!("token_reduction\t{:.1}%", cmp.token_reduction() * 100.0);
            println!("latency_reduction\t{:.1}%", cmp.latency_reduction() * 100.0);
            println!("throughput_gain\t{:.1}%", cmp.throughput_gain() * 100.0);
            if !sweep.is_empty() {
                let before: Vec<u64> = w.records.iter().map(|r| r.tokens).collect();
                let after = uitrim::runtime::replay::transformed_tokens(&w, &lib, &counter)?;
                println!("config\tclients\tmean_ms\tqpm");
                for (label, tokens) in [("transform-off", &before), ("transform-on", &after)] {
                    for p in concurrency_sweep(tokens, model, concurrency, &sweep) {
                        println!("{label}\t{}\t{:.1}\t{:.2}", p.concurrency, p.mean_latency_ms, p.qpm);
                    }
                }
            }
        }
        Command::Convert { tree } => {
            print!("{}", serialize_canonical(&parse_any(&read(&tree)?)?));
        }
        Command::GenCorpus { out, count, seed } => {
            fs::create_dir_all(&out).with_context(|| out.display().to_string())?;
            let width = count.max(1).to_string().len();
            for (i, t) in generate_corpus(count, seed).iter().enumerate() {
                let p = out.join(format!("tree_{i:0width$}.tree"));
                fs::write(&p, serialize_canonical(t)).with_context(|| p.display().to_string())?;
            }
            println!("wrote {count} trees to {}", out.display());
        }
        Command::GenWorkload { out, count, mean_before, mean_after, rate, seed } => {
            if count == 0 || rate.is_nan() || rate <= 0.0 {
                bail!("--count and --rate must be positive");
            }
            let w = generate_workload(count, mean_before, mean_after, rate, seed);
            fs::write(&out, workload_to_text(&w)).with_context(|| out.display().to_string())?;
            println!("wrote {count} requests to {}", out.display());
        }
    }
    Ok(())
}
