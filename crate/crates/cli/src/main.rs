// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use bspf_cli::datagen::{generate, generate_shard, GenSpec};
use bspf_cli::driver::{bench, executor_config, verify};
use bspf_cli::ops::{Op, Workload};
use bspf_cli::report::{read_records, render_markdown, render_plot_data, summarize, write_records};
use bspf_cli::tasks::{BenchRecord, VerifyOutcome};
use bspf_cli::worker::{launch, worker_main, LaunchOptions, Task, TaskOutput};
use bspf_cli::{CliError, Result};
use bspf_comm::{Backend, RendezvousServer};
use bspf_core::{csv_io, ipc, Domain};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "bspf",
    version,
    about = "Distributed dataframe operators: data generation, verification and benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a table with controlled key cardinality.
    Generate(GenerateArgs),
    /// Run an operator distributed and compare with the serial result.
    Verify(VerifyArgs),
    /// Time an operator over a list of parallelisms.
    Bench(BenchArgs),
    /// Time the join, groupby, sort, add_scalar pipeline.
    Pipeline(PipelineArgs),
    /// Summarize a benchmark CSV.
    Report(ReportArgs),
    /// Run a rendezvous server for TCP workers.
    Rendezvous {
        #[arg(long, default_value = "127.0.0.1:29500")]
        bind: String,
    },
    /// Run one rank of a task; configured through BSPF_* variables.
    Worker,
}

#[derive(Args, Clone)]
struct DataArgs {
    #[arg(long, default_value_t = 100_000)]
    rows: usize,
    #[arg(long, default_value_t = 0.9)]
    cardinality: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long, default_value = "inproc", value_parser = parse_backend)]
    backend: Backend,
    /// Existing rendezvous server (TCP only); a private one is started otherwise.
    #[arg(long)]
    rendezvous: Option<String>,
    #[arg(long)]
    namespace: Option<String>,
    /// With the TCP backend, run ranks as threads of this process instead
    /// of separate worker processes.
    #[arg(long)]
    threads: bool,
    /// Communicator timeout in seconds.
    #[arg(long, default_value_t = 30)]
    timeout: u64,
}

#[derive(Copy, Clone, ValueEnum)]
enum Format {
    Bspf,
    Csv,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Number of shards; more than one writes `part-<rank>` files into --out.
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
    /// Column list as name:domain pairs; the first column is the key.
    #[arg(long, value_delimiter = ',', default_value = "k:int64,v:int64")]
    columns: Vec<String>,
    #[arg(long, value_enum, default_value = "bspf")]
    format: Format,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_parser = parse_op)]
    op: Op,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 4)]
    parallelism: usize,
    #[command(flatten)]
    run: RunArgs,
    /// Alter the expected result so the comparison must fail.
    #[arg(long)]
    corrupt: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_parser = parse_op)]
    op: Op,
    #[command(flatten)]
    timing: TimingArgs,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    timing: TimingArgs,
}

#[derive(Args)]
struct TimingArgs {
    #[arg(long, default_value_t = 4_000_000)]
    rows: usize,
    #[arg(long, default_value_t = 0.9)]
    cardinality: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long = "p-list", value_delimiter = ',', default_value = "1,2,4")]
    p_list: Vec<usize>,
    /// A single parallelism, instead of --p-list.
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[command(flatten)]
    run: RunArgs,
    /// CSV output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Benchmark CSV.
    input: PathBuf,
    /// Markdown output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write whitespace separated plot data here.
    #[arg(long)]
    plot_data: Option<PathBuf>,
}

fn parse_backend(s: &str) -> std::result::Result<Backend, String> {
    s.parse().map_err(|e: bspf_comm::CommError| e.to_string())
}

fn parse_op(s: &str) -> std::result::Result<Op, String> {
    s.parse().map_err(|e: CliError| e.to_string())
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn gen_spec(a: &GenerateArgs) -> Result<GenSpec> {
    let cols = a
        .columns
        .iter()
        .map(|c| {
            let (name, dom) = c
                .split_once(':')
                .ok_or_else(|| CliError::Usage(format!("column {c:?} is not name:domain")))?;
            Ok((name.to_string(), dom.parse::<Domain>()?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut spec = GenSpec::new(a.data.rows, a.data.cardinality, a.data.seed);
    spec.columns = cols;
    spec.validate()?;
    Ok(spec)
}

fn write_table(path: &Path, t: &bspf_core::Table, f: Format) -> Result<()> {
    match f {
        Format::Bspf => ipc::write_file(path, t)?,
        Format::Csv => csv_io::write_csv_file(path, t)?,
    }
    Ok(())
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let spec = gen_spec(&a)?;
    let ext = match a.format {
        Format::Bspf => "bspf",
        Format::Csv => "csv",
    };
    if a.parallelism <= 1 {
        write_table(&a.out, &generate(&spec)?, a.format)?;
    } else {
        std::fs::create_dir_all(&a.out)?;
        for r in 0..a.parallelism {
            let t = generate_shard(&spec, r, a.parallelism)?;
            write_table(&a.out.join(format!("part-{r}.{ext}")), &t, a.format)?;
        }
    }
    Ok(())
}

fn launch_options(run: &RunArgs) -> LaunchOptions {
    LaunchOptions {
        rendezvous: run.rendezvous.clone(),
        namespace: run.namespace.clone(),
        timeout: Some(Duration::from_secs(run.timeout)),
    }
}

fn use_processes(run: &RunArgs) -> bool {
    run.backend == Backend::Tcp && !run.threads
}

fn config(run: &RunArgs) -> bspf_runtime::ExecutorConfig {
    executor_config(run.backend, run.rendezvous.clone(), run.namespace.clone())
        .with_timeout(Duration::from_secs(run.timeout))
}

fn cmd_verify(a: VerifyArgs) -> Result<()> {
    let w = Workload::new(a.op, a.data.rows, a.data.cardinality, a.data.seed);
    w.left_spec().validate()?;
    let outcome: VerifyOutcome = if use_processes(&a.run) {
        let exe = std::env::current_exe()?;
        let task = Task::Verify {
            workload: w,
            corrupt: a.corrupt,
        };
        match launch(&exe, a.parallelism, &task, &launch_options(&a.run))? {
            TaskOutput::Verify(v) => v,
            TaskOutput::Bench(_) => return Err(CliError::Worker("unexpected bench result".into())),
        }
    } else {
        verify(a.parallelism, config(&a.run), &w, a.corrupt)?
    };
    println!("{}", serde_json::to_string(&outcome)?);
    match outcome.mismatch {
        None => Ok(()),
        Some(m) => Err(CliError::VerifyFailed(m)),
    }
}

fn cmd_bench(op: Op, a: TimingArgs) -> Result<()> {
    let w = Workload::new(op, a.rows, a.cardinality, a.seed);
    w.left_spec().validate()?;
    let p_list = a.parallelism.map_or(a.p_list.clone(), |p| vec![p]);
    if p_list.contains(&0) {
        return Err(CliError::Usage("parallelism must be at least 1".into()));
    }
    let records: Vec<BenchRecord> = if use_processes(&a.run) {
        let exe = std::env::current_exe()?;
        let task = Task::Bench {
            workload: w,
            repeats: a.repeats,
        };
        let mut all = Vec::new();
        for &p in &p_list {
            match launch(&exe, p, &task, &launch_options(&a.run))? {
                TaskOutput::Bench(r) => all.extend(r),
                TaskOutput::Verify(_) => {
                    return Err(CliError::Worker("unexpected verify result".into()))
                }
            }
        }
        all
    } else {
        bench(&p_list, &config(&a.run), &w, a.repeats)?
    };
    write_records(output(a.out.as_deref())?, &records)
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let records = read_records(File::open(&a.input)?)?;
    let rows = summarize(&records);
    output(a.out.as_deref())?.write_all(render_markdown(&rows).as_bytes())?;
    if let Some(p) = a.plot_data {
        std::fs::write(p, render_plot_data(&rows))?;
    }
    Ok(())
}

fn cmd_rendezvous(bind: &str) -> Result<()> {
    let server = RendezvousServer::start(bind)?;
    println!("rendezvous listening on {}", server.addr());
    server.join();
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let r = match cli.cmd {
        Cmd::Generate(a) => cmd_generate(a),
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::Bench(a) => cmd_bench(a.op, a.timing),
        Cmd::Pipeline(a) => cmd_bench(Op::Pipeline, a.timing),
        Cmd::Report(a) => cmd_report(a),
        Cmd::Rendezvous { bind } => cmd_rendezvous(&bind),
        Cmd::Worker => worker_main(),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
