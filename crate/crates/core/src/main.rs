use std::io::{self, BufReader};
use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use overground::bench::{self, Mode, ShotScript, Verdict};
use overground::session::{self, Output, Session, SessionConfig};
use overground::{Count, EngineOptions};

#[derive(Debug, Parser)]
#[command(name = "overground", version, about = "Multi-shot ASP with incremental overgrounding")]
struct Cli {
    /// Answer sets per run; 0 prints all of them.
    #[arg(short = 'n', default_value_t = 1)]
    models: usize,

    /// `idlv` prints the ground program instead of solving.
    #[arg(long, value_enum)]
    mode: Option<CliMode>,

    /// Text output of the ground program (with `--mode=idlv`).
    #[arg(short = 't', requires = "mode")]
    text: bool,

    /// Listen on this TCP port instead of reading standard input.
    #[arg(long)]
    port: Option<u16>,

    #[arg(long, default_value = "127.0.0.1")]
    host: String,

    /// Keep every ground rule in complete form.
    #[arg(long)]
    no_tailoring: bool,

    #[command(subcommand)]
    command: Option<Cmd>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CliMode {
    Idlv,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run a scenario script and write per-shot metrics as CSV.
    Bench {
        script: PathBuf,
        #[arg(long, value_enum, default_value = "incremental")]
        run: RunMode,
        /// Output file; standard output if absent.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Check incremental, scratch and oracle answer sets agree on a script.
    Verify { script: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RunMode {
    Incremental,
    Scratch,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let options = EngineOptions {
        tailoring: !cli.no_tailoring,
    };
    let result = match cli.command {
        Some(Cmd::Bench { script, run, csv }) => bench_command(&script, run, csv, options),
        Some(Cmd::Verify { script }) => verify_command(&script),
        None => serve_command(&cli, options),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn serve_command(cli: &Cli, options: EngineOptions) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let config = SessionConfig {
        output: if cli.mode == Some(CliMode::Idlv) {
            Output::GroundProgram
        } else {
            Output::AnswerSets
        },
        count: match cli.models {
            0 => Count::All,
            n => Count::First(n),
        },
        tailoring: options.tailoring,
        ..SessionConfig::default()
    };
    match cli.port {
        Some(port) => {
            let listener = TcpListener::bind((cli.host.as_str(), port))?;
            session::serve(listener, config)?;
        }
        None => {
            let mut s = Session::new(config);
            session::run_session(&mut s, BufReader::new(io::stdin()), io::stdout())?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn bench_command(
    script: &std::path::Path,
    run: RunMode,
    csv: Option<PathBuf>,
    options: EngineOptions,
) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let scenario = ShotScript::read(script)?.load()?;
    let mode = match run {
        RunMode::Incremental => Mode::Incremental,
        RunMode::Scratch => Mode::Scratch,
    };
    let result = bench::run_multishot(&scenario, mode, options)?;
    match csv {
        Some(path) => bench::emit_csv(&result.metrics, std::fs::File::create(path)?)?,
        None => bench::emit_csv(&result.metrics, io::stdout())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn verify_command(script: &std::path::Path) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let scenario = ShotScript::read(script)?.load()?;
    match bench::verify_equivalence(&scenario)? {
        Verdict::Pass => {
            println!("PASS {} shots", scenario.shots.len());
            Ok(ExitCode::SUCCESS)
        }
        Verdict::Fail {
            shot,
            against,
            extra,
            missing,
        } => {
            println!("FAIL shot {shot} against {against}");
            for e in extra {
                println!("+ {e}");
            }
            for m in missing {
                println!("- {m}");
            }
            Ok(ExitCode::FAILURE)
        }
    }
}
