//! Bidirectional PISA machine.
//!
//! A step executes the instruction at PC (inverted when DIR is -1) and then
//! moves PC by DIR, or by BR*DIR when BR is nonzero. Taken branches add
//! DIR*offset to BR. RBRA flips DIR and sets BR to DIR'*offset - BR, which
//! sends control to the target in the new direction and cancels an incoming
//! jump when used as a receiving branch.
//!
//! FINISH halts when running forward or when entered by a jump; START
//! halts when running backward.
//! Both still advance PC, so [`Machine::turn_around`] followed by a run
//! retraces the trace exactly.

use thiserror::Error;

use crate::instr::{Instr, Operand, Reg};
use crate::program::MachineProgram;

pub const DEFAULT_MEMORY: usize = 1 << 20;
pub const DEFAULT_STEP_LIMIT: u64 = 100_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VmError {
    #[error("pc {pc}: memory address {addr} out of range")]
    BadAddress { pc: i64, addr: i64 },
    #[error("pc {pc}: write to register $0")]
    WriteToZero { pc: i64 },
    #[error("pc {pc}: `{instr}` uses the same register in conflicting roles")]
    IllegalOperands { pc: i64, instr: String },
    #[error("pc {pc}: operand is not resolved")]
    Unresolved { pc: i64 },
    #[error("pc {pc} outside the program")]
    PcOutOfRange { pc: i64 },
    #[error("step limit {limit} exceeded")]
    StepLimitExceeded { limit: u64 },
    #[error("program of {len} words does not fit memory of {mem} words")]
    ProgramTooLarge { len: usize, mem: usize },
    #[error("program has no START")]
    NoStart,
    #[error("program has more than one START")]
    MultipleStart,
    #[error("machine is halted")]
    Halted,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MachineState {
    pub regs: [i32; 32],
    pub mem: Vec<i32>,
    pub pc: i64,
    pub br: i32,
    pub dir: i32,
    pub halted: bool,
    pub steps: u64,
}

impl MachineState {
    pub fn new(mem_size: usize) -> MachineState {
        MachineState { regs: [0; 32], mem: vec![0; mem_size], pc: 0, br: 0, dir: 1, halted: false, steps: 0 }
    }

    fn addr(&self, r: Reg) -> Result<usize, VmError> {
        let a = self.regs[r.index()] as i64;
        if a < 0 || a as usize >= self.mem.len() {
            return Err(VmError::BadAddress { pc: self.pc, addr: a });
        }
        Ok(a as usize)
    }
}

fn imm(op: &Operand, pc: i64) -> Result<i32, VmError> {
    op.num().ok_or(VmError::Unresolved { pc })
}

fn distinct(i: &Instr, pc: i64, regs: &[Reg]) -> Result<(), VmError> {
    for (k, a) in regs.iter().enumerate() {
        if regs[k + 1..].contains(a) {
            return Err(VmError::IllegalOperands { pc, instr: i.to_string() });
        }
    }
    Ok(())
}

fn dest(st: &mut MachineState, r: Reg) -> Result<&mut i32, VmError> {
    if r == Reg::ZERO {
        return Err(VmError::WriteToZero { pc: st.pc });
    }
    Ok(&mut st.regs[r.index()])
}

/// Applies one instruction to the state without moving PC. With DIR = -1
/// the inverse instruction is applied.
pub fn execute(i: &Instr, st: &mut MachineState) -> Result<(), VmError> {
    use Instr::*;
    let pc = st.pc;
    let inv = st.dir < 0;
    let r = |st: &MachineState, x: Reg| st.regs[x.index()];
    match i {
        Add(a, b) | Sub(a, b) => {
            distinct(i, pc, &[*a, *b])?;
            let v = r(st, *b);
            let sub = matches!(i, Sub(..)) != inv;
            let d = dest(st, *a)?;
            *d = if sub { d.wrapping_sub(v) } else { d.wrapping_add(v) };
        }
        Addi(a, c) => {
            let c = imm(c, pc)?;
            let d = dest(st, *a)?;
            *d = if inv { d.wrapping_sub(c) } else { d.wrapping_add(c) };
        }
        Xor(a, b) => {
            distinct(i, pc, &[*a, *b])?;
            let v = r(st, *b);
            *dest(st, *a)? ^= v;
        }
        Xori(a, c) => {
            let c = imm(c, pc)?;
            *dest(st, *a)? ^= c;
        }
        Andx(d, s, t) | Norx(d, s, t) | Orx(d, s, t) | Sllvx(d, s, t) | Sravx(d, s, t)
        | Srlvx(d, s, t) => {
            distinct(i, pc, &[*d, *s])?;
            distinct(i, pc, &[*d, *t])?;
            let (x, y) = (r(st, *s), r(st, *t));
            let sh = (y & 31) as u32;
            let v = match i {
                Andx(..) => x & y,
                Norx(..) => !(x | y),
                Orx(..) => x | y,
                Sllvx(..) => x.wrapping_shl(sh),
                Sravx(..) => x >> sh,
                _ => ((x as u32) >> sh) as i32,
            };
            *dest(st, *d)? ^= v;
        }
        Andix(d, s, c) | Orix(d, s, c) | Sllx(d, s, c) | Srax(d, s, c) | Srlx(d, s, c) => {
            distinct(i, pc, &[*d, *s])?;
            let c = imm(c, pc)?;
            let x = r(st, *s);
            let sh = (c & 31) as u32;
            let v = match i {
                Andix(..) => x & c,
                Orix(..) => x | c,
                Sllx(..) => x.wrapping_shl(sh),
                Srax(..) => x >> sh,
                _ => ((x as u32) >> sh) as i32,
            };
            *dest(st, *d)? ^= v;
        }
        Neg(a) => {
            let d = dest(st, *a)?;
            *d = d.wrapping_neg();
        }
        Rl(a, c) | Rr(a, c) => {
            let n = (imm(c, pc)? & 31) as u32;
            let left = matches!(i, Rl(..)) != inv;
            let d = dest(st, *a)?;
            *d = if left { d.rotate_left(n) } else { d.rotate_right(n) };
        }
        Rlv(a, b) | Rrv(a, b) => {
            distinct(i, pc, &[*a, *b])?;
            let n = (r(st, *b) & 31) as u32;
            let left = matches!(i, Rlv(..)) != inv;
            let d = dest(st, *a)?;
            *d = if left { d.rotate_left(n) } else { d.rotate_right(n) };
        }
        Exch(a, b) => {
            distinct(i, pc, &[*a, *b])?;
            let addr = st.addr(*b)?;
            let m = st.mem[addr];
            let d = dest(st, *a)?;
            st.mem[addr] = std::mem::replace(d, m);
        }
        Swapbr(a) => {
            let br = st.br;
            let d = dest(st, *a)?;
            st.br = std::mem::replace(d, br);
        }
        Bra(t) => {
            let off = imm(t, pc)?;
            st.br = st.br.wrapping_add(st.dir.wrapping_mul(off));
        }
        Rbra(t) => {
            let off = imm(t, pc)?;
            st.dir = -st.dir;
            st.br = st.dir.wrapping_mul(off).wrapping_sub(st.br);
        }
        Beq(a, b, t) | Bne(a, b, t) => {
            let off = imm(t, pc)?;
            let eq = r(st, *a) == r(st, *b);
            if eq == matches!(i, Beq(..)) {
                st.br = st.br.wrapping_add(st.dir.wrapping_mul(off));
            }
        }
        Bgez(a, t) | Bgtz(a, t) | Blez(a, t) | Bltz(a, t) => {
            let off = imm(t, pc)?;
            let v = r(st, *a);
            let taken = match i {
                Bgez(..) => v >= 0,
                Bgtz(..) => v > 0,
                Blez(..) => v <= 0,
                _ => v < 0,
            };
            if taken {
                st.br = st.br.wrapping_add(st.dir.wrapping_mul(off));
            }
        }
        Start | Finish | Data(_) => {}
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct Machine {
    program: MachineProgram,
    pub state: MachineState,
}

impl Machine {
    /// Materializes DATA words into memory and places PC on START.
    pub fn load(program: MachineProgram, mem_size: usize) -> Result<Machine, VmError> {
        if program.len() > mem_size {
            return Err(VmError::ProgramTooLarge { len: program.len(), mem: mem_size });
        }
        let mut starts = program.code().iter().enumerate().filter(|(_, i)| **i == Instr::Start);
        let start = starts.next().ok_or(VmError::NoStart)?.0;
        if starts.next().is_some() {
            return Err(VmError::MultipleStart);
        }
        let mut state = MachineState::new(mem_size);
        for (addr, i) in program.code().iter().enumerate() {
            if let Instr::Data(v) = i {
                state.mem[addr] = imm(v, addr as i64)?;
            }
        }
        state.pc = start as i64;
        Ok(Machine { program, state })
    }

    pub fn program(&self) -> &MachineProgram {
        &self.program
    }

    pub fn current(&self) -> Option<&Instr> {
        usize::try_from(self.state.pc).ok().and_then(|pc| self.program.code().get(pc))
    }

    pub fn step(&mut self) -> Result<(), VmError> {
        let st = &mut self.state;
        if st.halted {
            return Err(VmError::Halted);
        }
        let instr = usize::try_from(st.pc)
            .ok()
            .and_then(|pc| self.program.code().get(pc))
            .ok_or(VmError::PcOutOfRange { pc: st.pc })?;
        match instr {
            Instr::Start if st.dir < 0 => st.halted = true,
            // A FINISH entered by a jump is a trap in either direction.
            Instr::Finish if st.dir > 0 || st.br != 0 => st.halted = true,
            i => execute(i, st)?,
        }
        st.pc += if st.br == 0 { st.dir as i64 } else { st.br as i64 * st.dir as i64 };
        st.steps += 1;
        Ok(())
    }

    /// Steps until halted; at most `limit` steps are taken by this call.
    pub fn run(&mut self, limit: u64) -> Result<(), VmError> {
        let mut n = 0;
        while !self.state.halted {
            if n == limit {
                return Err(VmError::StepLimitExceeded { limit });
            }
            self.step()?;
            n += 1;
        }
        Ok(())
    }

    /// Reverses the direction of travel so the next step undoes the last one.
    pub fn turn_around(&mut self) {
        let st = &mut self.state;
        st.dir = -st.dir;
        st.pc += if st.br == 0 { st.dir as i64 } else { st.br as i64 * st.dir as i64 };
        st.halted = false;
    }

    /// Runs backward until START and then faces forward again, restoring the
    /// state the forward run began from.
    pub fn reverse_run(&mut self, limit: u64) -> Result<(), VmError> {
        self.turn_around();
        self.run(limit)?;
        self.turn_around();
        Ok(())
    }

    /// Halted on a FINISH that was jumped to: the runtime-check trap.
    pub fn trapped(&self) -> bool {
        self.state.halted && self.state.br != 0
    }

    pub fn mem(&self, addr: usize) -> i32 {
        self.state.mem[addr]
    }
}
