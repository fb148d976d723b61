//! The PISA reversible instruction set.
//!
//! [`instr`] defines instructions and their inverses, [`pal`] reads and
//! writes the textual assembly format, [`program`] resolves labels into
//! a loadable [`MachineProgram`], and [`vm`] executes it in either
//! direction.

pub mod instr;
pub mod pal;
pub mod program;
pub mod vm;

pub use instr::{invert_instruction, Instr, Operand, Reg, MNEMONICS};
pub use pal::{emit_pal, parse_pal, Line, PalError};
pub use program::{resolve, MachineProgram, ResolveError};
pub use vm::{execute, Machine, MachineState, VmError, DEFAULT_MEMORY, DEFAULT_STEP_LIMIT};
