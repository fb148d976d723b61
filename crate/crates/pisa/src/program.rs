use std::collections::BTreeMap;

use thiserror::Error;

use crate::instr::{Instr, Operand};
use crate::pal::Line;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ResolveError {
    #[error("undefined label `{0}`")]
    UndefinedLabel(String),
    #[error("label `{0}` defined more than once")]
    DuplicateLabel(String),
    #[error("address of `{0}` does not fit an immediate")]
    AddressOverflow(String),
}

/// A program whose operands are all numeric: branch targets are offsets
/// relative to the branch, label immediates are absolute addresses.
///
/// Address `a` holds `code[a]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MachineProgram {
    code: Vec<Instr>,
    labels: BTreeMap<String, usize>,
}

impl MachineProgram {
    pub fn code(&self) -> &[Instr] {
        &self.code
    }

    pub fn len(&self) -> usize {
        self.code.len()
    }

    pub fn is_empty(&self) -> bool {
        self.code.is_empty()
    }

    pub fn labels(&self) -> &BTreeMap<String, usize> {
        &self.labels
    }

    pub fn address_of(&self, label: &str) -> Option<usize> {
        self.labels.get(label).copied()
    }
}

pub fn label_addresses(lines: &[Line]) -> Result<BTreeMap<String, usize>, ResolveError> {
    let mut labels = BTreeMap::new();
    for (addr, line) in lines.iter().enumerate() {
        if let Some(l) = &line.label {
            if labels.insert(l.clone(), addr).is_some() {
                return Err(ResolveError::DuplicateLabel(l.clone()));
            }
        }
    }
    Ok(labels)
}

fn address(labels: &BTreeMap<String, usize>, l: &str) -> Result<i32, ResolveError> {
    let a = *labels.get(l).ok_or_else(|| ResolveError::UndefinedLabel(l.to_string()))?;
    i32::try_from(a).map_err(|_| ResolveError::AddressOverflow(l.to_string()))
}

/// Rewrites label immediates to absolute addresses, leaving branch targets
/// symbolic. This is the form written out as PAL text.
pub fn resolve_immediates(lines: &[Line]) -> Result<Vec<Line>, ResolveError> {
    let labels = label_addresses(lines)?;
    let mut out = lines.to_vec();
    for line in &mut out {
        if let Some(op) = line.instr.immediate_mut() {
            match op {
                Operand::Num(_) => {}
                Operand::Label(l) => *op = Operand::Num(address(&labels, l)?),
                Operand::NegLabel(l) => *op = Operand::Num(address(&labels, l)?.wrapping_neg()),
            }
        }
    }
    Ok(out)
}

pub fn resolve(lines: &[Line]) -> Result<MachineProgram, ResolveError> {
    let labels = label_addresses(lines)?;
    let mut code = Vec::with_capacity(lines.len());
    for (addr, line) in resolve_immediates(lines)?.into_iter().enumerate() {
        let mut instr = line.instr;
        if let Some(t) = instr.branch_target_mut() {
            match t {
                Operand::Num(_) => {}
                Operand::Label(l) | Operand::NegLabel(l) => {
                    let target = address(&labels, l)?;
                    *t = Operand::Num(target - addr as i32);
                }
            }
        }
        code.push(instr);
    }
    Ok(MachineProgram { code, labels })
}
