//! Source-to-result helpers shared by the command line tool and tests.

use pisa::{resolve, Machine, ResolveError, VmError};
use thiserror::Error;

use crate::classes::{build_class_model, ClassError, ClassModel};
use crate::codegen::{compile, CodegenError, CodegenOptions, Compiled};
use crate::frontend::{desugar, parse_source, Pos, Program, SyntaxError};
use crate::types::{check_program, Diagnostic};

/// Any error found before execution.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StaticError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("{} class error(s)", .0.len())]
    Class(Vec<ClassError>),
    #[error("{} type error(s)", .0.len())]
    Type(Vec<Diagnostic>),
}

impl StaticError {
    /// One `(position, message)` per problem, in source order.
    pub fn diagnostics(&self) -> Vec<(Pos, String)> {
        let mut out: Vec<(Pos, String)> = match self {
            StaticError::Syntax(e) => {
                let text = e.to_string();
                let prefix = format!("{}: ", e.pos());
                vec![(e.pos(), text.strip_prefix(&prefix).unwrap_or(&text).to_string())]
            }
            StaticError::Class(es) => es.iter().map(|e| (e.pos, e.kind.to_string())).collect(),
            StaticError::Type(ds) => ds.iter().map(|d| (d.pos, format!("{} [{}]", d.message, d.rule))).collect(),
        };
        out.sort_by_key(|(p, _)| (p.line, p.col));
        out
    }
}

/// A checked program: the surface AST as written plus the class model of
/// its desugared form.
#[derive(Clone, Debug)]
pub struct Checked {
    pub surface: Program,
    pub model: ClassModel,
}

pub fn check_source(src: &str) -> Result<Checked, StaticError> {
    let surface = parse_source(src)?;
    let model = build_class_model(&desugar(&surface)).map_err(StaticError::Class)?;
    let diags = check_program(&model);
    if !diags.is_empty() {
        return Err(StaticError::Type(diags));
    }
    Ok(Checked { surface, model })
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VmRunError {
    #[error(transparent)]
    Codegen(#[from] CodegenError),
    #[error(transparent)]
    Resolve(#[from] ResolveError),
    #[error(transparent)]
    Vm(#[from] VmError),
    #[error("runtime check failed (trap reached at pc {pc})")]
    Trap { pc: i64 },
}

/// A finished forward run of a compiled program.
#[derive(Clone, Debug)]
pub struct VmRun {
    pub compiled: Compiled,
    pub machine: Machine,
    pub initial_mem: Vec<i32>,
    pub outputs: Vec<(String, i32)>,
}

impl VmRun {
    pub fn output(&self, name: &str) -> Option<i32> {
        self.outputs.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    /// All registers zero and all memory other than the output cells
    /// equal to the load-time image.
    pub fn is_clean(&self) -> bool {
        let st = &self.machine.state;
        if st.regs.iter().any(|&r| r != 0) || st.br != 0 {
            return false;
        }
        let outs: Vec<usize> = self
            .compiled
            .outputs
            .iter()
            .filter_map(|(_, l)| self.machine.program().address_of(l))
            .collect();
        st.mem.iter().zip(&self.initial_mem).enumerate().all(|(a, (x, y))| x == y || outs.contains(&a))
    }
}

pub fn run_on_vm(
    model: &ClassModel,
    opts: CodegenOptions,
    mem_size: usize,
    step_limit: u64,
) -> Result<VmRun, VmRunError> {
    let compiled = compile(model, opts)?;
    run_compiled(compiled, mem_size, step_limit)
}

pub fn run_compiled(compiled: Compiled, mem_size: usize, step_limit: u64) -> Result<VmRun, VmRunError> {
    let program = resolve(&compiled.lines)?;
    let mut machine = Machine::load(program, mem_size)?;
    let initial_mem = machine.state.mem.clone();
    machine.run(step_limit)?;
    if machine.trapped() {
        return Err(VmRunError::Trap { pc: machine.state.pc });
    }
    let outputs = compiled
        .outputs
        .iter()
        .map(|(f, l)| (f.clone(), machine.mem(machine.program().address_of(l).expect("output label"))))
        .collect();
    Ok(VmRun { compiled, machine, initial_mem, outputs })
}
