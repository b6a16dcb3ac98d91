use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mafia::compiler::{self, emit_json, emit_p4, TargetModel, TARGET_ENV};
use mafia::corpus::{self, CHECK_NAMES};
use mafia::frontend::{parse_with, validate_composition, ParseOptions};
use mafia::interp::{read_trace, run_trace, sink, write_trace, EngineKind, RunOptions, SwitchConfig, Topology};
use mafia::model::Schema;
use mafia::tracegen::{generate, Scenario, TraceSpec};
use mafia::Error;

#[derive(Parser)]
#[command(name = "mafia", version, about = "Compile and simulate MAFIA measurement programs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compile a program to JSON IR, pseudo-P4 and a resource report.
    Compile(CompileArgs),
    /// Replay a trace through one program or a chain of switches.
    Run(RunArgs),
    /// Compile and run the bundled programs and print a pass/fail matrix.
    Corpus(CorpusArgs),
    /// Write a synthetic JSON Lines trace.
    TraceGen(TraceGenArgs),
}

#[derive(Args)]
struct Common {
    /// Bind a constant, e.g. `-D PORT=1`.
    #[arg(short = 'D', long = "define", value_name = "NAME=VALUE", value_parser = parse_define)]
    defines: Vec<(String, String)>,
    /// Header schema file extending the default one.
    #[arg(long)]
    schema: Option<PathBuf>,
}

impl Common {
    fn schema(&self) -> anyhow::Result<Schema> {
        Ok(match &self.schema {
            Some(p) => Schema::load(p).with_context(|| p.display().to_string())?,
            None => Schema::default(),
        })
    }

    fn defines(&self) -> BTreeMap<String, String> {
        self.defines.iter().cloned().collect()
    }
}

fn parse_define(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))
}

#[derive(Args)]
struct CompileArgs {
    program: PathBuf,
    #[command(flatten)]
    common: Common,
    /// Compile only this role.
    #[arg(long)]
    role: Option<String>,
    /// Target model file; defaults to $MAFIA_TARGET, then built-in limits.
    #[arg(long, env = TARGET_ENV)]
    target: Option<PathBuf>,
    /// Where artifacts go; defaults to the program's directory.
    #[arg(short, long)]
    out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Ast,
    Ir,
}

#[derive(Args)]
struct RunArgs {
    /// Topology file describing the switch chain.
    #[arg(long, conflicts_with_all = ["program", "role"])]
    topology: Option<PathBuf>,
    /// Single program, run on switch 1.
    #[arg(long, required_unless_present = "topology")]
    program: Option<PathBuf>,
    #[arg(long)]
    role: Option<String>,
    #[arg(long)]
    trace: PathBuf,
    /// Required when the program calls `random`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "ast")]
    engine: EngineArg,
    /// Cells cleared per packet while a window resets.
    #[arg(long, default_value_t = SwitchConfig::default().reset_chunk)]
    chunk: u32,
    #[arg(long)]
    sink_dir: Option<PathBuf>,
    /// Also stream sink records to host:port.
    #[arg(long)]
    sink_tcp: Option<String>,
    /// Write the run report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct CorpusArgs {
    /// Substring of a program name, title or category.
    filter: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    packets: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, env = TARGET_ENV)]
    target: Option<PathBuf>,
}

#[derive(Args)]
struct TraceGenArgs {
    #[arg(long, value_parser = parse_scenario, default_value = "mixed")]
    scenario: Scenario,
    #[arg(long, default_value_t = 10_000)]
    packets: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    flows: Option<usize>,
    #[arg(long)]
    heavy_share: Option<f64>,
    #[arg(long)]
    period: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    Scenario::parse(s).ok_or_else(|| {
        let names: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
        format!("unknown scenario `{s}` (one of {})", names.join(", "))
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match cli.cmd {
        Cmd::Compile(a) => compile(a),
        Cmd::Run(a) => run(a),
        Cmd::Corpus(a) => corpus_cmd(a),
        Cmd::TraceGen(a) => trace_gen(a),
    };
    match r {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load_target(path: &Option<PathBuf>) -> anyhow::Result<TargetModel> {
    Ok(match path {
        Some(p) if !p.as_os_str().is_empty() => TargetModel::load(p)?,
        _ => TargetModel::default(),
    })
}

/// `file:line:col: error: message`, or `file: error: message` without a span.
fn report_error(file: &Path, e: &Error) {
    match e.span() {
        Some(s) => eprintln!("{}:{s}: error: {}", file.display(), e.message()),
        None => eprintln!("{}: error: {e}", file.display()),
    }
}

fn compile(a: CompileArgs) -> anyhow::Result<ExitCode> {
    let src = std::fs::read_to_string(&a.program).with_context(|| a.program.display().to_string())?;
    let opts = ParseOptions {
        defines: a.common.defines(),
        schema: a.common.schema()?,
    };
    let program = match parse_with(&src, &opts) {
        Ok(p) => p,
        Err(e) => {
            report_error(&a.program, &e);
            return Ok(ExitCode::FAILURE);
        }
    };
    for d in validate_composition(&program) {
        eprintln!("{}:{}: {}: {}", a.program.display(), d.span, d.severity, d.message);
    }
    let target = load_target(&a.target)?;
    let roles: Vec<Option<String>> = match (&a.role, program.roles.is_empty()) {
        (Some(r), _) => vec![Some(r.clone())],
        (None, true) => vec![None],
        (None, false) => program.role_names().into_iter().map(|r| Some(r.to_string())).collect(),
    };
    let out_dir = a
        .out_dir
        .clone()
        .unwrap_or_else(|| a.program.parent().map(Path::to_path_buf).unwrap_or_default());
    std::fs::create_dir_all(&out_dir).ok();
    let stem = a.program.file_stem().and_then(|s| s.to_str()).unwrap_or("program");
    let mut failed = false;
    for role in roles {
        let compiled = program
            .for_role(role.as_deref())
            .and_then(|sp| compiler::compile(&sp, &target));
        let c = match compiled {
            Ok(c) => c,
            Err(e) => {
                report_error(&a.program, &e);
                failed = true;
                continue;
            }
        };
        let base = match &role {
            Some(r) => format!("{stem}.{r}"),
            None => stem.to_string(),
        };
        let write = |ext: &str, text: &str| -> anyhow::Result<PathBuf> {
            let p = out_dir.join(format!("{base}.{ext}"));
            std::fs::write(&p, text).with_context(|| p.display().to_string())?;
            Ok(p)
        };
        write("ir.json", &emit_json(&c.ir))?;
        write("p4", &emit_p4(&c.ir, Some(&c.report)))?;
        write("report.json", &(serde_json::to_string_pretty(&c.report)? + "\n"))?;
        if let Some(r) = &role {
            println!("role {r}");
        }
        print!("{}", c.report);
        for w in c.warnings() {
            eprintln!("{}: warning: {w}", a.program.display());
        }
    }
    Ok(if failed { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn run(a: RunArgs) -> anyhow::Result<ExitCode> {
    let schema = a.common.schema()?;
    let topo = match (&a.topology, &a.program) {
        (Some(t), _) => Topology::load(t)?,
        (None, Some(p)) => Topology::single(p, a.role.clone(), BTreeMap::new()),
        (None, None) => bail!("give --topology or --program"),
    };
    let file = std::fs::File::open(&a.trace).with_context(|| a.trace.display().to_string())?;
    let trace = read_trace(std::io::BufReader::new(file), &schema).with_context(|| a.trace.display().to_string())?;
    let opts = RunOptions {
        seed: a.seed,
        engine: match a.engine {
            EngineArg::Ast => EngineKind::Ast,
            EngineArg::Ir => EngineKind::Ir,
        },
        switch: SwitchConfig {
            reset_chunk: a.chunk.max(1),
            ..SwitchConfig::default()
        },
        schema,
        defines: a.common.defines(),
    };
    let out = match run_trace(&topo, &trace, &opts, a.sink_dir.as_deref()) {
        Ok(o) => o,
        Err(Error::MissingSeed) => bail!("the program calls random(); pass --seed to make the run reproducible"),
        Err(e) => return Err(e.into()),
    };
    if let Some(addr) = &a.sink_tcp {
        sink::send_tcp(addr, &out.sinks).with_context(|| format!("sending sinks to {addr}"))?;
    }
    let text = serde_json::to_string_pretty(&out.report)? + "\n";
    match &a.report {
        Some(p) => std::fs::write(p, text).with_context(|| p.display().to_string())?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn corpus_cmd(a: CorpusArgs) -> anyhow::Result<ExitCode> {
    let target = load_target(&a.target)?;
    let entries = corpus::select(a.filter.as_deref());
    print!("{:<24}", "program");
    for c in CHECK_NAMES {
        print!(" {c:<12}");
    }
    println!();
    let mut failed = 0;
    for e in &entries {
        let row = corpus::check(e, &target, a.packets, a.seed);
        print!("{:<24}", e.name);
        for name in CHECK_NAMES {
            let cell = match row.checks.iter().find(|c| c.name == name) {
                Some(c) if c.ok => "pass",
                Some(_) => "FAIL",
                None => "-",
            };
            print!(" {cell:<12}");
        }
        println!();
        for c in row.checks.iter().filter(|c| !c.ok) {
            eprintln!("{}: {}: {}", e.name, c.name, c.detail);
        }
        if !row.passed() {
            failed += 1;
        }
    }
    println!("{}/{} programs pass", entries.len() - failed, entries.len());
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn trace_gen(a: TraceGenArgs) -> anyhow::Result<ExitCode> {
    let mut spec = TraceSpec::new(a.scenario, a.packets, a.seed);
    if let Some(f) = a.flows {
        spec.flows = f;
    }
    if let Some(h) = a.heavy_share {
        if !(0.0..=1.0).contains(&h) {
            return Err(anyhow!("--heavy-share must be within [0, 1]"));
        }
        spec.heavy_share = h;
    }
    if let Some(p) = a.period {
        spec.period = p;
    }
    let trace = generate(&spec);
    match &a.output {
        Some(p) => {
            let f = std::fs::File::create(p).with_context(|| p.display().to_string())?;
            write_trace(&trace, std::io::BufWriter::new(f))?;
        }
        None => write_trace(&trace, std::io::stdout().lock())?,
    }
    Ok(ExitCode::SUCCESS)
}
