use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::{Parser, Subcommand};
use geoagent::repl::Repl;
use geoagent::{bench, fixture, server, BackendChoice, Config, Mode};
use geoagent_core::bench::{BenchmarkQuestion, System};

#[derive(Parser)]
#[command(name = "geoagent", version, about = "Natural-language questions over check-in data")]
struct Cli {
    /// Path to geoagent.toml.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a TSV file into a check-in table.
    Ingest {
        file: PathBuf,
        #[arg(long)]
        table: String,
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Run one read-only SQL statement and print the rows.
    Sql { statement: String },
    /// Run the question suite and write JSON and Markdown reports.
    Bench {
        #[arg(long, default_value = "data/bench/suite.json")]
        suite: PathBuf,
        /// Replay recorded completions from this directory instead of calling live endpoints.
        #[arg(long)]
        replay: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Systems::Both)]
        system: Systems,
        /// Run only these question ids.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
    },
    /// Ask questions interactively.
    Repl {
        #[arg(long, default_value = "agentic")]
        mode: Mode,
    },
    /// Serve the JSON HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Serve replay-backed sessions whose scripts arrive with `POST /sessions`.
        #[arg(long)]
        replay: bool,
    },
    /// Write the seeded synthetic fixture files.
    Fixture {
        #[arg(long, default_value = "data/fixture")]
        out: PathBuf,
        #[arg(long, default_value_t = fixture::DEFAULT_ROWS)]
        rows: usize,
        #[arg(long, default_value_t = fixture::DEFAULT_SEED)]
        seed: u64,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Systems {
    Naive,
    Agentic,
    Both,
}

fn bench(cfg: &Config, suite: &Path, replay: Option<&Path>, systems: Systems, only: &[u32], out: &Path) -> Result<()> {
    let mut questions = bench::load_suite(suite)?;
    let choice = if replay.is_some() { BackendChoice::Replay } else { BackendChoice::Live };
    let engine = cfg.build_engine(choice)?;
    let selected: Vec<BenchmarkQuestion> = if only.is_empty() {
        questions
    } else {
        questions.retain(|q| only.contains(&q.id));
        questions
    };
    let mut runs = Vec::new();
    for system in [System::Naive, System::Agentic] {
        let wanted = match systems {
            Systems::Both => true,
            Systems::Naive => system == System::Naive,
            Systems::Agentic => system == System::Agentic,
        };
        if !wanted {
            continue;
        }
        let run = bench::run_suite(&engine, &selected, system, replay)?;
        for r in &run.runs {
            let mark = if r.verdict.correct { "ok " } else { "FAIL" };
            println!("{} Q{:02} {mark} {}", system.as_str(), r.verdict.question, r.verdict.reason);
        }
        println!(
            "{}: {} correct, mean SQL generator calls {}",
            system.title(),
            run.report.overall,
            run.report.mean_sql_gen_calls_display
        );
        runs.push(run);
    }
    let refs: Vec<&bench::SuiteRun> = runs.iter().collect();
    bench::write_reports(out, &selected, &refs)?;
    println!("reports written to {}", out.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest { file, table, limit } => {
            let report = cfg.open_store()?.ingest(&file, &table, limit)?;
            println!("{}: {} rows inserted, {} skipped", report.table, report.inserted, report.skipped);
            for (line, why) in &report.skipped_examples {
                println!("  line {line}: {why}");
            }
        }
        Command::Sql { statement } => {
            let table = cfg.open_store()?.query(&statement)?;
            println!("{}", table.columns.join("\t"));
            for row in &table.rows {
                let cells: Vec<String> = row.iter().map(|v| v.to_field()).collect();
                println!("{}", cells.join("\t"));
            }
        }
        Command::Bench {
            suite,
            replay,
            system,
            only,
            out,
        } => bench(&cfg, &suite, replay.as_deref(), system, &only, &out)?,
        Command::Repl { mode } => {
            let engine = cfg.build_engine(BackendChoice::Live)?;
            let mut repl = Repl::new(&engine, mode)?;
            repl.run(std::io::stdin().lock(), std::io::stdout())?;
        }
        Command::Serve { host, port, replay } => {
            let choice = if replay { BackendChoice::Replay } else { BackendChoice::Live };
            let engine = std::sync::Arc::new(cfg.build_engine(choice)?);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port)).await?;
                eprintln!("listening on http://{}", listener.local_addr()?);
                server::serve(engine, listener).await
            })?;
        }
        Command::Fixture { out, rows, seed } => {
            fixture::write_fixture(&out, rows, seed)?;
            println!("wrote {} and {} to {}", fixture::NYC_FILE, fixture::TOKYO_FILE, out.display());
        }
    }
    Ok(())
}
