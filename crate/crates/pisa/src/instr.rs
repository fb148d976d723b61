use std::fmt;

/// A general purpose register, `$0` through `$31`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Reg(pub u8);

impl Reg {
    pub const ZERO: Reg = Reg(0);
    pub const SP: Reg = Reg(1);
    pub const RO: Reg = Reg(2);
    pub const THIS: Reg = Reg(3);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "${}", self.0)
    }
}

/// Immediate or branch target.
///
/// Labels appear in immediates (vtable addresses, jump-site addresses) and
/// in branch targets. [`crate::resolve`] turns immediate labels into
/// absolute addresses and branch labels into relative offsets.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Operand {
    Num(i32),
    Label(String),
    /// Negated address of a label; produced by inverting `ADDI r label`.
    NegLabel(String),
}

impl Operand {
    pub fn label(name: impl Into<String>) -> Operand {
        Operand::Label(name.into())
    }

    /// Numeric value of a resolved operand.
    pub fn num(&self) -> Option<i32> {
        match self {
            Operand::Num(n) => Some(*n),
            _ => None,
        }
    }

    pub fn negate(&self) -> Operand {
        match self {
            Operand::Num(n) => Operand::Num(n.wrapping_neg()),
            Operand::Label(l) => Operand::NegLabel(l.clone()),
            Operand::NegLabel(l) => Operand::Label(l.clone()),
        }
    }
}

impl From<i32> for Operand {
    fn from(n: i32) -> Self {
        Operand::Num(n)
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Num(n) => write!(f, "{n}"),
            Operand::Label(l) => write!(f, "{l}"),
            Operand::NegLabel(l) => write!(f, "-{l}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Instr {
    Add(Reg, Reg),
    Addi(Reg, Operand),
    Andx(Reg, Reg, Reg),
    Andix(Reg, Reg, Operand),
    Norx(Reg, Reg, Reg),
    Neg(Reg),
    Orx(Reg, Reg, Reg),
    Orix(Reg, Reg, Operand),
    Rl(Reg, Operand),
    Rlv(Reg, Reg),
    Rr(Reg, Operand),
    Rrv(Reg, Reg),
    Sllx(Reg, Reg, Operand),
    Sllvx(Reg, Reg, Reg),
    Srax(Reg, Reg, Operand),
    Sravx(Reg, Reg, Reg),
    Srlx(Reg, Reg, Operand),
    Srlvx(Reg, Reg, Reg),
    Sub(Reg, Reg),
    Xor(Reg, Reg),
    Xori(Reg, Operand),
    Beq(Reg, Reg, Operand),
    Bgez(Reg, Operand),
    Bgtz(Reg, Operand),
    Blez(Reg, Operand),
    Bltz(Reg, Operand),
    Bne(Reg, Reg, Operand),
    Bra(Operand),
    Exch(Reg, Reg),
    Swapbr(Reg),
    Rbra(Operand),
    Start,
    Finish,
    Data(Operand),
}

/// Every mnemonic, in the order of the instruction grammar.
pub const MNEMONICS: [&str; 34] = [
    "ADD", "ADDI", "ANDX", "ANDIX", "NORX", "NEG", "ORX", "ORIX", "RL", "RLV", "RR", "RRV", "SLLX",
    "SLLVX", "SRAX", "SRAVX", "SRLX", "SRLVX", "SUB", "XOR", "XORI", "BEQ", "BGEZ", "BGTZ", "BLEZ",
    "BLTZ", "BNE", "BRA", "EXCH", "SWAPBR", "RBRA", "START", "FINISH", "DATA",
];

impl Instr {
    pub fn mnemonic(&self) -> &'static str {
        use Instr::*;
        match self {
            Add(..) => "ADD",
            Addi(..) => "ADDI",
            Andx(..) => "ANDX",
            Andix(..) => "ANDIX",
            Norx(..) => "NORX",
            Neg(..) => "NEG",
            Orx(..) => "ORX",
            Orix(..) => "ORIX",
            Rl(..) => "RL",
            Rlv(..) => "RLV",
            Rr(..) => "RR",
            Rrv(..) => "RRV",
            Sllx(..) => "SLLX",
            Sllvx(..) => "SLLVX",
            Srax(..) => "SRAX",
            Sravx(..) => "SRAVX",
            Srlx(..) => "SRLX",
            Srlvx(..) => "SRLVX",
            Sub(..) => "SUB",
            Xor(..) => "XOR",
            Xori(..) => "XORI",
            Beq(..) => "BEQ",
            Bgez(..) => "BGEZ",
            Bgtz(..) => "BGTZ",
            Blez(..) => "BLEZ",
            Bltz(..) => "BLTZ",
            Bne(..) => "BNE",
            Bra(..) => "BRA",
            Exch(..) => "EXCH",
            Swapbr(..) => "SWAPBR",
            Rbra(..) => "RBRA",
            Start => "START",
            Finish => "FINISH",
            Data(..) => "DATA",
        }
    }

    /// Branch target operand, for instructions that jump.
    pub fn branch_target(&self) -> Option<&Operand> {
        use Instr::*;
        match self {
            Beq(_, _, t) | Bne(_, _, t) | Bgez(_, t) | Bgtz(_, t) | Blez(_, t) | Bltz(_, t)
            | Bra(t) | Rbra(t) => Some(t),
            _ => None,
        }
    }

    pub fn branch_target_mut(&mut self) -> Option<&mut Operand> {
        use Instr::*;
        match self {
            Beq(_, _, t) | Bne(_, _, t) | Bgez(_, t) | Bgtz(_, t) | Blez(_, t) | Bltz(_, t)
            | Bra(t) | Rbra(t) => Some(t),
            _ => None,
        }
    }

    /// Immediate operand of a non-branch instruction.
    pub fn immediate_mut(&mut self) -> Option<&mut Operand> {
        use Instr::*;
        match self {
            Addi(_, c) | Andix(_, _, c) | Orix(_, _, c) | Rl(_, c) | Rr(_, c) | Sllx(_, _, c)
            | Srax(_, _, c) | Srlx(_, _, c) | Xori(_, c) | Data(c) => Some(c),
            _ => None,
        }
    }

    /// True for instructions that touch BR, DIR or halt the machine.
    pub fn is_control(&self) -> bool {
        self.branch_target().is_some()
            || matches!(self, Instr::Swapbr(_) | Instr::Start | Instr::Finish)
    }
}

/// Inverse instruction: ADD/SUB, RL/RR and RLV/RRV swap, ADDI negates its
/// immediate, and everything else is its own inverse.
pub fn invert_instruction(i: &Instr) -> Instr {
    use Instr::*;
    match i {
        Add(a, b) => Sub(*a, *b),
        Sub(a, b) => Add(*a, *b),
        Addi(r, c) => Addi(*r, c.negate()),
        Rl(r, c) => Rr(*r, c.clone()),
        Rr(r, c) => Rl(*r, c.clone()),
        Rlv(a, b) => Rrv(*a, *b),
        Rrv(a, b) => Rlv(*a, *b),
        other => other.clone(),
    }
}

impl fmt::Display for Instr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Instr::*;
        let m = self.mnemonic();
        match self {
            Add(a, b) | Sub(a, b) | Xor(a, b) | Rlv(a, b) | Rrv(a, b) | Exch(a, b) => {
                write!(f, "{m} {a} {b}")
            }
            Andx(a, b, c) | Norx(a, b, c) | Orx(a, b, c) | Sllvx(a, b, c) | Sravx(a, b, c)
            | Srlvx(a, b, c) => write!(f, "{m} {a} {b} {c}"),
            Addi(a, c) | Rl(a, c) | Rr(a, c) | Xori(a, c) | Bgez(a, c) | Bgtz(a, c)
            | Blez(a, c) | Bltz(a, c) => write!(f, "{m} {a} {c}"),
            Andix(a, b, c) | Orix(a, b, c) | Sllx(a, b, c) | Srax(a, b, c) | Srlx(a, b, c)
            | Beq(a, b, c) | Bne(a, b, c) => write!(f, "{m} {a} {b} {c}"),
            Neg(a) | Swapbr(a) => write!(f, "{m} {a}"),
            Bra(t) | Rbra(t) | Data(t) => write!(f, "{m} {t}"),
            Start | Finish => write!(f, "{m}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_sub_swap() {
        assert_eq!(invert_instruction(&Instr::Add(Reg(1), Reg(2))), Instr::Sub(Reg(1), Reg(2)));
    }

    #[test]
    fn addi_negates() {
        assert_eq!(invert_instruction(&Instr::Addi(Reg(4), 5.into())), Instr::Addi(Reg(4), (-5).into()));
        let l = Instr::Addi(Reg(4), Operand::label("x"));
        assert_eq!(invert_instruction(&invert_instruction(&l)), l);
    }

    #[test]
    fn xor_self_inverse() {
        let x = Instr::Xor(Reg(1), Reg(2));
        assert_eq!(invert_instruction(&x), x);
    }

    #[test]
    fn display_forms() {
        assert_eq!(Instr::Beq(Reg(4), Reg(0), Operand::label("a")).to_string(), "BEQ $4 $0 a");
        assert_eq!(Instr::Start.to_string(), "START");
        assert_eq!(Instr::Andix(Reg(5), Reg(6), 1.into()).to_string(), "ANDIX $5 $6 1");
    }
}
