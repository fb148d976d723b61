use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pisa::{parse_pal, resolve, Machine, DEFAULT_MEMORY, DEFAULT_STEP_LIMIT};
use roopl::codegen::{compile_to_pal, CodegenOptions};
use roopl::frontend::{parse_source, print_program};
use roopl::interp::{run_program, RunOptions, DEFAULT_MAX_DEPTH};
use roopl::invert::invert_program;
use roopl::pipeline::{check_source, run_on_vm, Checked, VmRunError};

const STATIC: u8 = 1;
const RUNTIME: u8 = 2;
const DIVERGED: u8 = 3;

/// Reversible object-oriented language toolchain.
#[derive(Parser)]
#[command(name = "roopl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, analyse classes and type-check a program.
    Check {
        #[command(flatten)]
        input: Input,
        /// Print the class layout (vtable slots and field offsets).
        #[arg(long)]
        dump_layout: bool,
    },
    /// Print the inverse of every method.
    Invert {
        #[command(flatten)]
        input: Input,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Interpret a program and print its output fields.
    Run {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        json: Json,
        /// Log every statement and call to stderr.
        #[arg(long)]
        trace: bool,
        /// Statement limit.
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_MAX_DEPTH)]
        max_depth: usize,
    },
    /// Translate a program to PISA assembly.
    Compile {
        #[command(flatten)]
        input: Input,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        codegen: Codegen,
        /// Print the class layout to stderr.
        #[arg(long)]
        dump_layout: bool,
    },
    /// Load and run a PISA assembly file.
    Simulate {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        machine: MachineArgs,
        #[command(flatten)]
        json: Json,
        /// Print memory words `a` up to but excluding `b` as `addr: value`.
        #[arg(long, value_name = "A:B", value_parser = parse_range)]
        dump_memory: Option<(usize, usize)>,
        /// Log each executed instruction to stderr.
        #[arg(long)]
        trace: bool,
    },
    /// Compile, simulate and interpret; fail if the two disagree.
    Exec {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        codegen: Codegen,
        #[command(flatten)]
        machine: MachineArgs,
        #[command(flatten)]
        json: Json,
    },
}

#[derive(Args)]
struct Input {
    /// Source file, or `-` for standard input.
    file: String,
}

#[derive(Args)]
struct Json {
    /// Print the output fields as a JSON object.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct Codegen {
    /// Emit code that traps when a runtime assertion fails.
    #[arg(long)]
    runtime_checks: bool,
}

#[derive(Args)]
struct MachineArgs {
    #[arg(long, default_value_t = DEFAULT_STEP_LIMIT)]
    steps: u64,
    /// Memory size in words.
    #[arg(long, default_value_t = DEFAULT_MEMORY)]
    memory: usize,
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or("expected A:B")?;
    let a = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let b = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    if a > b {
        return Err(format!("empty range {a}:{b}"));
    }
    Ok((a, b))
}

/// Message already printed; carries the exit code.
struct Failure(u8);

type Res = Result<(), Failure>;

impl Input {
    fn name(&self) -> &str {
        if self.file == "-" {
            "<stdin>"
        } else {
            &self.file
        }
    }

    fn read(&self) -> Result<String, Failure> {
        let text = if self.file == "-" {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s).map(|_| s)
        } else {
            fs::read_to_string(&self.file)
        };
        text.map_err(|e| {
            eprintln!("{}: {e}", self.name());
            Failure(STATIC)
        })
    }

    fn checked(&self) -> Result<Checked, Failure> {
        check_source(&self.read()?).map_err(|e| {
            for (pos, msg) in e.diagnostics() {
                eprintln!("{}:{pos}: {msg}", self.name());
            }
            Failure(STATIC)
        })
    }
}

fn write_out(path: &Option<PathBuf>, text: &str) -> Res {
    let res = match path {
        Some(p) => fs::write(p, text),
        None => io::stdout().write_all(text.as_bytes()),
    };
    res.map_err(|e| {
        eprintln!("write failed: {e}");
        Failure(RUNTIME)
    })
}

fn print_fields(fields: &[(String, i32)], json: bool) {
    if json {
        let map: serde_json::Map<String, serde_json::Value> =
            fields.iter().map(|(k, v)| (k.clone(), (*v).into())).collect();
        println!("{}", serde_json::Value::Object(map));
    } else {
        for (k, v) in fields {
            println!("{k} = {v}");
        }
    }
}

fn check(input: &Input, dump_layout: bool) -> Res {
    let c = input.checked()?;
    if dump_layout {
        print!("{}", c.model.dump_layout());
    }
    Ok(())
}

fn invert(input: &Input, output: &Option<PathBuf>) -> Res {
    let p = parse_source(&input.read()?).map_err(|e| {
        eprintln!("{}:{e}", input.name());
        Failure(STATIC)
    })?;
    write_out(output, &print_program(&invert_program(&p)))
}

fn run(input: &Input, json: bool, trace: bool, steps: Option<u64>, max_depth: usize) -> Res {
    let c = input.checked()?;
    let opts = RunOptions { max_depth, step_limit: steps.unwrap_or(u64::MAX), trace, ..RunOptions::default() };
    let r = run_program(&c.model, &opts).map_err(|e| {
        eprintln!("{}:{e}", input.name());
        Failure(RUNTIME)
    })?;
    for line in &r.trace {
        eprintln!("{line}");
    }
    print_fields(&r.output.fields, json);
    Ok(())
}

fn compile(input: &Input, output: &Option<PathBuf>, codegen: &Codegen, dump_layout: bool) -> Res {
    let c = input.checked()?;
    if dump_layout {
        eprint!("{}", c.model.dump_layout());
    }
    let pal = compile_to_pal(&c.model, CodegenOptions { runtime_checks: codegen.runtime_checks }).map_err(|e| {
        eprintln!("{}:{}: {e}", input.name(), e.pos());
        Failure(STATIC)
    })?;
    write_out(output, &pal)
}

const OUTPUT_PREFIX: &str = "l_out_";

fn simulate(input: &Input, m: &MachineArgs, json: bool, dump: Option<(usize, usize)>, trace: bool) -> Res {
    let static_err = |e: &dyn std::fmt::Display| {
        eprintln!("{}: {e}", input.name());
        Failure(STATIC)
    };
    let lines = parse_pal(&input.read()?).map_err(|e| static_err(&e))?;
    let program = resolve(&lines).map_err(|e| static_err(&e))?;
    let mut machine = Machine::load(program, m.memory).map_err(|e| {
        eprintln!("{}: {e}", input.name());
        Failure(RUNTIME)
    })?;
    let mut taken = 0;
    let outcome = loop {
        if machine.state.halted {
            break Ok(());
        }
        if taken == m.steps {
            break Err(format!("step limit of {} exceeded", m.steps));
        }
        if trace {
            if let Some(i) = machine.current() {
                eprintln!("{:>8} {:>2} {i}", machine.state.pc, machine.state.dir);
            }
        }
        if let Err(e) = machine.step() {
            break Err(e.to_string());
        }
        taken += 1;
    };
    let mut outputs: Vec<(usize, String)> = machine
        .program()
        .labels()
        .iter()
        .filter_map(|(l, a)| l.strip_prefix(OUTPUT_PREFIX).map(|f| (*a, f.to_string())))
        .collect();
    outputs.sort();
    let fields: Vec<(String, i32)> = outputs.into_iter().map(|(a, f)| (f, machine.mem(a))).collect();
    print_fields(&fields, json);
    if let Some((a, b)) = dump {
        for addr in a..b.min(machine.state.mem.len()) {
            println!("{addr}: {}", machine.mem(addr));
        }
    }
    match outcome {
        Err(e) => {
            eprintln!("{}: {e}", input.name());
            Err(Failure(RUNTIME))
        }
        Ok(()) if machine.trapped() => {
            eprintln!("{}: runtime check failed (trap reached at pc {})", input.name(), machine.state.pc);
            Err(Failure(RUNTIME))
        }
        Ok(()) => Ok(()),
    }
}

/// Field-by-field disagreements between two output maps, ignoring order.
fn differences(interpreted: &[(String, i32)], compiled: &[(String, i32)]) -> Vec<String> {
    let i: BTreeMap<_, _> = interpreted.iter().cloned().collect();
    let c: BTreeMap<_, _> = compiled.iter().cloned().collect();
    let mut keys: Vec<&String> = i.keys().chain(c.keys()).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .filter(|k| i.get(*k) != c.get(*k))
        .map(|k| format!("{k}: interpreter {:?}, machine {:?}", i.get(k), c.get(k)))
        .collect()
}

fn exec(input: &Input, codegen: &Codegen, m: &MachineArgs, json: bool) -> Res {
    let c = input.checked()?;
    let opts = CodegenOptions { runtime_checks: codegen.runtime_checks };
    let vm = run_on_vm(&c.model, opts, m.memory, m.steps).map_err(|e| {
        match &e {
            VmRunError::Codegen(g) => eprintln!("{}:{}: {g}", input.name(), g.pos()),
            e => eprintln!("{}: {e}", input.name()),
        }
        Failure(if matches!(e, VmRunError::Codegen(_)) { STATIC } else { RUNTIME })
    })?;
    let interp = run_program(&c.model, &RunOptions::default()).map_err(|e| {
        eprintln!("{}:{e}", input.name());
        Failure(RUNTIME)
    })?;
    let diffs = differences(&interp.output.fields, &vm.outputs);
    if !diffs.is_empty() {
        eprintln!("{}: compiled and interpreted results differ", input.name());
        for d in diffs {
            eprintln!("  {d}");
        }
        return Err(Failure(DIVERGED));
    }
    if !vm.is_clean() {
        eprintln!("{}: machine finished with non-zero registers or memory", input.name());
        return Err(Failure(DIVERGED));
    }
    print_fields(&interp.output.fields, json);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Check { input, dump_layout } => check(input, *dump_layout),
        Command::Invert { input, output } => invert(input, output),
        Command::Run { input, json, trace, steps, max_depth } => run(input, json.json, *trace, *steps, *max_depth),
        Command::Compile { input, output, codegen, dump_layout } => compile(input, output, codegen, *dump_layout),
        Command::Simulate { input, machine, json, dump_memory, trace } => {
            simulate(input, machine, json.json, *dump_memory, *trace)
        }
        Command::Exec { input, codegen, machine, json } => exec(input, codegen, machine, json.json),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code)) => ExitCode::from(code),
    }
}
