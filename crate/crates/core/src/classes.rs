//! Class map, inheritance resolution, object and vtable layouts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::frontend::{ClassDecl, Decl, MethodDecl, Pos, Program, TypeName};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClassErrorKind {
    #[error("class `{0}` is declared more than once")]
    DuplicateClassName(String),
    #[error("class `{class}` inherits unknown class `{base}`")]
    UnknownBaseClass { class: String, base: String },
    #[error("inheritance cycle through {}", .0.join(" -> "))]
    InheritanceCycle(Vec<String>),
    #[error("`{class}::{method}` overrides `{base}::{method}` with a different signature")]
    OverrideSignatureMismatch { class: String, method: String, base: String },
    #[error("field `{field}` of `{class}` shadows a field inherited from `{base}`")]
    FieldShadowsInherited { class: String, field: String, base: String },
    #[error("field `{field}` is declared more than once in `{class}`")]
    DuplicateField { class: String, field: String },
    #[error("method `{method}` is declared more than once in `{class}`")]
    DuplicateMethod { class: String, method: String },
    #[error("parameter `{param}` appears more than once in `{method}`")]
    DuplicateParameter { method: String, param: String },
    #[error("unknown type `{0}`")]
    UnknownType(String),
    #[error("no class declares a method `main()`")]
    NoMain,
    #[error("more than one class declares `main()`: {}", .0.join(", "))]
    MultipleMain(Vec<String>),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{pos}: {kind}")]
pub struct ClassError {
    pub kind: ClassErrorKind,
    pub pos: Pos,
}

/// A method as seen from a class: which class supplies its body.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Slot {
    pub method: String,
    pub owner: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassInfo {
    pub name: String,
    pub base: Option<String>,
    /// Resolved fields, base class fields first. Field `k` lives at offset `k + 1`.
    pub fields: Vec<Decl>,
    /// Vtable slots; inherited slots keep their base-class index.
    pub vtable: Vec<Slot>,
}

impl ClassInfo {
    /// Cells per instance: the vtable pointer plus one per field.
    pub fn size(&self) -> usize {
        1 + self.fields.len()
    }

    pub fn field_offset(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name).map(|k| k + 1)
    }

    pub fn field(&self, name: &str) -> Option<&Decl> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn slot(&self, method: &str) -> Option<usize> {
        self.vtable.iter().position(|s| s.method == method)
    }
}

#[derive(Clone, Debug)]
pub struct ClassModel {
    program: Program,
    classes: BTreeMap<String, ClassInfo>,
    order: Vec<String>,
}

impl ClassModel {
    pub fn program(&self) -> &Program {
        &self.program
    }

    /// Class names in declaration order.
    pub fn class_names(&self) -> &[String] {
        &self.order
    }

    pub fn class(&self, name: &str) -> Option<&ClassInfo> {
        self.classes.get(name)
    }

    pub fn classes(&self) -> impl Iterator<Item = &ClassInfo> {
        self.order.iter().map(|n| &self.classes[n])
    }

    pub fn decl(&self, name: &str) -> Option<&ClassDecl> {
        self.program.class(name)
    }

    /// The declaration of `method` as resolved in `class`.
    pub fn method(&self, class: &str, method: &str) -> Option<(&str, &MethodDecl)> {
        let info = self.classes.get(class)?;
        let slot = &info.vtable[info.slot(method)?];
        Some((slot.owner.as_str(), self.decl(&slot.owner)?.method(method)?))
    }

    /// Reflexive, transitive closure of `inherits`.
    pub fn subtype(&self, c1: &str, c2: &str) -> bool {
        let mut cur = Some(c1);
        let mut seen = 0;
        while let Some(c) = cur {
            if c == c2 {
                return true;
            }
            seen += 1;
            if seen > self.order.len() {
                return false;
            }
            cur = self.classes.get(c).and_then(|i| i.base.as_deref());
        }
        false
    }

    pub fn find_main(&self) -> Result<(&str, &MethodDecl), ClassError> {
        let owners: Vec<&ClassDecl> = self
            .program
            .classes
            .iter()
            .filter(|c| c.methods.iter().any(|m| m.name == "main" && m.params.is_empty()))
            .collect();
        match owners.as_slice() {
            [c] => Ok((c.name.as_str(), c.method("main").expect("filtered"))),
            [] => Err(ClassError { kind: ClassErrorKind::NoMain, pos: Pos::default() }),
            [_, second, ..] => Err(ClassError {
                kind: ClassErrorKind::MultipleMain(owners.iter().map(|c| c.name.clone()).collect()),
                pos: second.pos,
            }),
        }
    }

    /// Stable, line-oriented listing of every class's size, vtable and fields.
    pub fn dump_layout(&self) -> String {
        let mut s = String::new();
        for c in self.classes() {
            match &c.base {
                Some(b) => writeln!(s, "class {} inherits {b} size {}", c.name, c.size()),
                None => writeln!(s, "class {} size {}", c.name, c.size()),
            }
            .unwrap();
            for (k, slot) in c.vtable.iter().enumerate() {
                writeln!(s, "  slot {k} {}::{}", slot.owner, slot.method).unwrap();
            }
            for (k, f) in c.fields.iter().enumerate() {
                writeln!(s, "  field {} {} {}", k + 1, f.ty, f.name).unwrap();
            }
        }
        s
    }
}

fn err(kind: ClassErrorKind, pos: Pos) -> ClassError {
    ClassError { kind, pos }
}

fn same_signature(a: &MethodDecl, b: &MethodDecl) -> bool {
    a.params.len() == b.params.len() && a.params.iter().zip(&b.params).all(|(x, y)| x.ty == y.ty)
}

pub fn build_class_model(program: &Program) -> Result<ClassModel, Vec<ClassError>> {
    let mut errors = Vec::new();
    let mut decls: BTreeMap<&str, &ClassDecl> = BTreeMap::new();
    let mut order = Vec::new();
    for c in &program.classes {
        if decls.insert(&c.name, c).is_some() {
            errors.push(err(ClassErrorKind::DuplicateClassName(c.name.clone()), c.pos));
        } else {
            order.push(c.name.clone());
        }
    }
    let known = |t: &TypeName| match t {
        TypeName::Int => true,
        TypeName::Class(c) => decls.contains_key(c.as_str()),
    };
    for c in &program.classes {
        let mut names = BTreeSet::new();
        for f in &c.fields {
            if !names.insert(&f.name) {
                errors.push(err(ClassErrorKind::DuplicateField { class: c.name.clone(), field: f.name.clone() }, f.pos));
            }
            if !known(&f.ty) {
                errors.push(err(ClassErrorKind::UnknownType(f.ty.to_string()), f.pos));
            }
        }
        let mut names = BTreeSet::new();
        for m in &c.methods {
            if !names.insert(&m.name) {
                errors.push(err(ClassErrorKind::DuplicateMethod { class: c.name.clone(), method: m.name.clone() }, m.pos));
            }
            let mut params = BTreeSet::new();
            for p in &m.params {
                if !params.insert(&p.name) {
                    errors.push(err(
                        ClassErrorKind::DuplicateParameter { method: m.name.clone(), param: p.name.clone() },
                        p.pos,
                    ));
                }
                if !known(&p.ty) {
                    errors.push(err(ClassErrorKind::UnknownType(p.ty.to_string()), p.pos));
                }
            }
        }
        if let Some(b) = &c.base {
            if !decls.contains_key(b.as_str()) {
                errors.push(err(ClassErrorKind::UnknownBaseClass { class: c.name.clone(), base: b.clone() }, c.pos));
            }
        }
    }
    // Cycle detection along the base chain of each class.
    let mut cyclic = BTreeSet::new();
    for c in &order {
        let mut chain = vec![c.clone()];
        let mut cur = decls[c.as_str()].base.as_deref();
        while let Some(b) = cur {
            if let Some(k) = chain.iter().position(|x| x == b) {
                let mut cycle: Vec<String> = chain[k..].to_vec();
                let start = cycle.iter().enumerate().min_by_key(|(_, n)| n.as_str()).map(|(i, _)| i).unwrap();
                cycle.rotate_left(start);
                if cyclic.insert(cycle.clone()) {
                    let mut shown = cycle.clone();
                    shown.push(cycle[0].clone());
                    errors.push(err(ClassErrorKind::InheritanceCycle(shown), decls[cycle[0].as_str()].pos));
                }
                break;
            }
            let Some(d) = decls.get(b) else { break };
            chain.push(b.to_string());
            cur = d.base.as_deref();
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }

    let mut classes: BTreeMap<String, ClassInfo> = BTreeMap::new();
    // Resolve bases before derived classes.
    let mut pending: Vec<&ClassDecl> = order.iter().map(|n| decls[n.as_str()]).collect();
    while !pending.is_empty() {
        let before = pending.len();
        let mut rest = Vec::new();
        for c in pending {
            let base = match &c.base {
                Some(b) => match classes.get(b) {
                    Some(info) => Some(info.clone()),
                    None => {
                        rest.push(c);
                        continue;
                    }
                },
                None => None,
            };
            let mut fields = base.as_ref().map_or_else(Vec::new, |b| b.fields.clone());
            for f in &c.fields {
                if fields.iter().any(|g| g.name == f.name) {
                    let owner = owner_of_field(&classes, base.as_ref().unwrap(), &f.name);
                    errors.push(err(
                        ClassErrorKind::FieldShadowsInherited { class: c.name.clone(), field: f.name.clone(), base: owner },
                        f.pos,
                    ));
                } else {
                    fields.push(f.clone());
                }
            }
            let mut vtable = base.as_ref().map_or_else(Vec::new, |b| b.vtable.clone());
            for m in &c.methods {
                match vtable.iter_mut().find(|s| s.method == m.name) {
                    Some(slot) => {
                        let inherited = decls[slot.owner.as_str()].method(&m.name).expect("slot owner declares method");
                        if !same_signature(inherited, m) {
                            errors.push(err(
                                ClassErrorKind::OverrideSignatureMismatch {
                                    class: c.name.clone(),
                                    method: m.name.clone(),
                                    base: slot.owner.clone(),
                                },
                                m.pos,
                            ));
                        }
                        slot.owner = c.name.clone();
                    }
                    None => vtable.push(Slot { method: m.name.clone(), owner: c.name.clone() }),
                }
            }
            classes.insert(c.name.clone(), ClassInfo { name: c.name.clone(), base: c.base.clone(), fields, vtable });
        }
        assert!(rest.len() < before, "acyclic hierarchy always makes progress");
        pending = rest;
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    Ok(ClassModel { program: program.clone(), classes, order })
}

fn owner_of_field(classes: &BTreeMap<String, ClassInfo>, from: &ClassInfo, field: &str) -> String {
    let mut cur = from;
    loop {
        let Some(b) = cur.base.as_ref().and_then(|b| classes.get(b)) else {
            return cur.name.clone();
        };
        if b.field(field).is_none() {
            return cur.name.clone();
        }
        cur = b;
    }
}
