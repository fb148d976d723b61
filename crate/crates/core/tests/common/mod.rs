#![allow(dead_code)]

use std::path::PathBuf;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use roopl::frontend::{BinOp, Expr, Invocation, ModOp, Stmt, StmtKind};
use roopl::types::vars;

pub struct CorpusProgram {
    pub name: String,
    pub source: String,
    pub expected: Vec<(String, i32)>,
}

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

pub const CORPUS: [&str; 5] = ["objblock", "fib", "date", "linkedlist", "rtm"];

pub fn parse_expected(text: &str) -> Vec<(String, i32)> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let (k, v) = l.split_once('=').expect("field = value");
            (k.trim().to_string(), v.trim().parse().expect("integer value"))
        })
        .collect()
}

pub fn corpus() -> Vec<CorpusProgram> {
    CORPUS
        .iter()
        .map(|name| {
            let dir = corpus_dir().join(name);
            CorpusProgram {
                name: name.to_string(),
                source: std::fs::read_to_string(dir.join("program.rpl")).expect("corpus program"),
                expected: parse_expected(&std::fs::read_to_string(dir.join("expected.txt")).expect("expected.txt")),
            }
        })
        .collect()
}

/// Two classes; generated statements run inside `Program::main`.
pub const MODEL_SRC: &str = "
class Cell
    int f

    method set(int x)
        f += x

    method get(int out)
        out += f

class Program
    int a
    int b
    int c

    method main()
        skip

    method bump(int x)
        x += 3

    method mix(int x, int y)
        x += y * 2
";

pub const FIELDS: [&str; 3] = ["a", "b", "c"];

/// Builds a complete program whose main body is `body`.
pub fn program_with_main(body: &str) -> String {
    MODEL_SRC.replace("    method main()\n        skip\n", &format!("    method main()\n{}", indent(body, 8)))
}

fn indent(text: &str, n: usize) -> String {
    text.lines().map(|l| format!("{}{l}\n", " ".repeat(n))).collect()
}

/// Random well-typed statements that always run to completion.
///
/// Every compound form is arranged so that its exit condition holds by
/// construction: guards only read variables frozen in the branches, local
/// and object state is restored by symmetric call pairs, and loops count a
/// frozen local up to a small bound.
pub struct Gen {
    rng: StdRng,
    ints: Vec<String>,
    locals: Vec<String>,
    objs: Vec<String>,
    frozen: Vec<String>,
    fresh: usize,
}

impl Gen {
    pub fn new(seed: u64) -> Gen {
        Gen {
            rng: StdRng::seed_from_u64(seed),
            ints: FIELDS.iter().map(|s| s.to_string()).collect(),
            locals: Vec::new(),
            objs: Vec::new(),
            frozen: Vec::new(),
            fresh: 0,
        }
    }

    fn name(&mut self, p: &str) -> String {
        self.fresh += 1;
        format!("{p}{}", self.fresh)
    }

    fn free(&self, pool: &[String]) -> Vec<String> {
        pool.iter().filter(|v| !self.frozen.contains(v)).cloned().collect()
    }

    fn constant(&mut self) -> i32 {
        match self.rng.gen_range(0..4) {
            0 => self.rng.gen(),
            _ => self.rng.gen_range(-9..10),
        }
    }

    pub fn expr(&mut self, depth: u32, avoid: &str) -> Expr {
        let readable: Vec<String> = self.ints.iter().filter(|v| *v != avoid).cloned().collect();
        if depth == 0 || self.rng.gen_bool(0.4) {
            return match readable.choose(&mut self.rng) {
                Some(v) if self.rng.gen_bool(0.6) => Expr::Var(v.clone()),
                _ => Expr::Const(self.constant()),
            };
        }
        let op = *BinOp::ALL.choose(&mut self.rng).unwrap();
        let l = self.expr(depth - 1, avoid);
        let r = if matches!(op, BinOp::Div | BinOp::Mod) {
            let mut k = self.constant();
            if k == 0 {
                k = 7;
            }
            Expr::Const(k)
        } else {
            self.expr(depth - 1, avoid)
        };
        Expr::bin(op, l, r)
    }

    pub fn seq(&mut self, depth: u32) -> Vec<Stmt> {
        let n = self.rng.gen_range(1..=3);
        (0..n).map(|_| self.stmt(depth)).collect()
    }

    fn call(uncall: bool, object: Option<&str>, method: &str, args: &[&str]) -> Stmt {
        Stmt::new(StmtKind::Call(Invocation {
            uncall,
            object: object.map(str::to_string),
            method: method.to_string(),
            args: args.iter().map(|a| Expr::var(*a)).collect(),
        }))
    }

    fn assign(&mut self) -> Stmt {
        let free = self.free(&self.ints);
        let Some(x) = free.choose(&mut self.rng).cloned() else { return Stmt::new(StmtKind::Skip) };
        let e = self.expr(2, &x);
        let op = *[ModOp::Add, ModOp::Sub, ModOp::Xor].choose(&mut self.rng).unwrap();
        Stmt::new(StmtKind::Assign(x, op, e))
    }

    pub fn stmt(&mut self, depth: u32) -> Stmt {
        let pick = if depth == 0 { self.rng.gen_range(0..5) } else { self.rng.gen_range(0..9) };
        match pick {
            0 | 1 => self.assign(),
            2 => {
                let free = self.free(&self.ints);
                match (free.choose(&mut self.rng), free.choose(&mut self.rng)) {
                    (Some(x), Some(y)) => Stmt::new(StmtKind::Swap(x.clone(), y.clone())),
                    _ => Stmt::new(StmtKind::Skip),
                }
            }
            3 => {
                // Object call that only reads the object.
                let free = self.free(&self.ints);
                match (self.objs.choose(&mut self.rng).cloned(), free.choose(&mut self.rng).cloned()) {
                    (Some(p), Some(x)) => Gen::call(self.rng.gen(), Some(&p), "get", &[&x]),
                    _ => self.assign(),
                }
            }
            4 => {
                let free = self.free(&self.locals);
                let Some(x) = free.choose(&mut self.rng).cloned() else { return self.assign() };
                let others: Vec<String> = self.locals.iter().filter(|v| **v != x).cloned().collect();
                match others.choose(&mut self.rng) {
                    Some(y) if self.rng.gen_bool(0.5) => Gen::call(self.rng.gen(), None, "mix", &[&x, y]),
                    _ => Gen::call(self.rng.gen(), None, "bump", &[&x]),
                }
            }
            5 => {
                let e = self.expr(2, "");
                let mark = self.frozen.len();
                self.frozen.extend(vars(&e));
                let s1 = self.seq(depth - 1);
                let s2 = if self.rng.gen_bool(0.3) { Vec::new() } else { self.seq(depth - 1) };
                self.frozen.truncate(mark);
                Stmt::new(StmtKind::If(e.clone(), s1, s2, e))
            }
            6 => {
                let i = self.name("i");
                let k = self.rng.gen_range(1..=3);
                self.ints.push(i.clone());
                self.frozen.push(i.clone());
                let eq = |n: i32| Expr::bin(BinOp::Eq, Expr::var(&i), Expr::Const(n));
                let mut s1 = vec![Stmt::new(StmtKind::Assign(i.clone(), ModOp::Add, Expr::Const(1)))];
                s1.extend(self.seq(depth - 1));
                let s2 = if self.rng.gen_bool(0.5) { Vec::new() } else { self.seq(depth - 1) };
                self.frozen.pop();
                self.ints.pop();
                let lp = Stmt::new(StmtKind::Loop(eq(0), s1, s2, eq(k)));
                Stmt::new(StmtKind::LocalBlock { var: i, init: Expr::Const(0), body: vec![lp], exit: Expr::Const(k) })
            }
            7 => {
                // Local block; the local may change only inside a call pair.
                let t = self.name("t");
                let init = self.expr(1, "");
                let mark = self.frozen.len();
                self.frozen.extend(vars(&init));
                self.ints.push(t.clone());
                self.locals.push(t.clone());
                let pair = if self.rng.gen_bool(0.6) {
                    let other = self.locals.iter().filter(|v| **v != t).cloned().collect::<Vec<_>>();
                    match other.choose(&mut self.rng).cloned() {
                        Some(y) => {
                            self.frozen.push(y.clone());
                            Some(("mix", vec![t.clone(), y]))
                        }
                        None => Some(("bump", vec![t.clone()])),
                    }
                } else {
                    None
                };
                let mut body = Vec::new();
                if let Some((m, args)) = &pair {
                    let a: Vec<&str> = args.iter().map(String::as_str).collect();
                    body.push(Gen::call(false, None, m, &a));
                }
                self.frozen.push(t.clone());
                body.extend(self.seq(depth - 1));
                if let Some((m, args)) = &pair {
                    let a: Vec<&str> = args.iter().map(String::as_str).collect();
                    body.push(Gen::call(true, None, m, &a));
                }
                self.frozen.truncate(mark);
                self.locals.pop();
                self.ints.pop();
                Stmt::new(StmtKind::LocalBlock { var: t, init: init.clone(), body, exit: init })
            }
            _ => {
                let p = self.name("p");
                let v = self.ints.choose(&mut self.rng).cloned().expect("fields exist");
                self.frozen.push(v.clone());
                self.objs.push(p.clone());
                let mut body = vec![Gen::call(false, Some(&p), "set", &[&v])];
                body.extend(self.seq(depth - 1));
                body.push(Gen::call(true, Some(&p), "set", &[&v]));
                self.objs.pop();
                self.frozen.pop();
                Stmt::new(StmtKind::ObjectBlock { class: "Cell".into(), var: p, body, ctor: None })
            }
        }
    }

    /// Random initial values for the fields, as statements.
    pub fn seeds(&mut self) -> Vec<Stmt> {
        FIELDS
            .iter()
            .map(|f| Stmt::new(StmtKind::Assign(f.to_string(), ModOp::Xor, Expr::Const(self.constant()))))
            .collect()
    }
}

/// A generated class in a random inheritance forest.
pub struct GenClass {
    pub name: String,
    pub base: Option<usize>,
    pub fields: Vec<String>,
    /// Methods declared here, new or overriding, with the constant each adds.
    pub methods: Vec<(String, u32)>,
}

/// Random three-level hierarchy in which every method is `m(int out)`.
pub struct Hierarchy {
    pub classes: Vec<GenClass>,
}

impl Hierarchy {
    pub fn generate(seed: u64) -> Hierarchy {
        let mut rng = StdRng::seed_from_u64(seed);
        let (mut classes, mut fresh_field, mut fresh_method) = (Vec::<GenClass>::new(), 0, 0);
        let mut level: Vec<Option<usize>> = vec![None; rng.gen_range(1..=2)];
        for _ in 0..3 {
            let mut next = Vec::new();
            for base in level {
                let k = classes.len();
                let mut methods = Vec::new();
                let inherited = base.map(|b| Hierarchy::visible_in(&classes, b)).unwrap_or_default();
                for m in inherited {
                    if rng.gen_bool(0.4) {
                        methods.push((m, rng.gen_range(1..1_000_000)));
                    }
                }
                // Every class declares at least one method.
                for _ in 0..rng.gen_range(usize::from(methods.is_empty())..=2) {
                    fresh_method += 1;
                    methods.push((format!("m{fresh_method}"), rng.gen_range(1..1_000_000)));
                }
                let fields = (0..rng.gen_range(0..=2))
                    .map(|_| {
                        fresh_field += 1;
                        format!("f{fresh_field}")
                    })
                    .collect();
                classes.push(GenClass { name: format!("C{k}"), base, fields, methods });
                next.extend(std::iter::repeat(Some(k)).take(rng.gen_range(1..=2)));
            }
            level = next;
        }
        Hierarchy { classes }
    }

    fn visible_in(classes: &[GenClass], k: usize) -> Vec<String> {
        let mut out = classes[k].base.map(|b| Hierarchy::visible_in(classes, b)).unwrap_or_default();
        for (m, _) in &classes[k].methods {
            if !out.contains(m) {
                out.push(m.clone());
            }
        }
        out
    }

    pub fn visible(&self, k: usize) -> Vec<String> {
        Hierarchy::visible_in(&self.classes, k)
    }

    pub fn ancestors(&self, k: usize) -> Vec<usize> {
        let mut out = vec![k];
        while let Some(b) = self.classes[*out.last().unwrap()].base {
            out.push(b);
        }
        out
    }

    /// Class whose body runs for `m` on an instance of class `k`, and the
    /// class that first declared `m`.
    pub fn owner_and_origin(&self, k: usize, m: &str) -> (usize, usize) {
        let chain = self.ancestors(k);
        let declares = |c: &usize| self.classes[*c].methods.iter().any(|(n, _)| n == m);
        (*chain.iter().find(|c| declares(c)).unwrap(), *chain.iter().rev().find(|c| declares(c)).unwrap())
    }

    pub fn addend(&self, k: usize, m: &str) -> u32 {
        self.classes[k].methods.iter().find(|(n, _)| n == m).unwrap().1
    }

    /// The hierarchy plus a `Program` that dispatches every visible method
    /// of every class through a parameter typed at the method's origin.
    pub fn source(&self) -> String {
        let mut s = String::new();
        for c in &self.classes {
            match c.base {
                Some(b) => s += &format!("class {} inherits {}\n", c.name, self.classes[b].name),
                None => s += &format!("class {}\n", c.name),
            }
            for f in &c.fields {
                s += &format!("    int {f}\n");
            }
            for (m, n) in &c.methods {
                s += &format!("\n    method {m}(int out)\n        out += {n}\n");
            }
            s += "\n";
        }
        s += "class Program\n    int result\n\n    method main()\n";
        for (k, c) in self.classes.iter().enumerate() {
            for m in self.visible(k) {
                let origin = &self.classes[self.owner_and_origin(k, &m).1].name;
                s += &format!(
                    "        construct {} o\n            local int t = 0\n            call probe_{origin}_{m}(o, t)\n            result += t\n            uncall probe_{origin}_{m}(o, t)\n            delocal int t = 0\n        destruct o\n",
                    c.name
                );
            }
        }
        for (k, c) in self.classes.iter().enumerate() {
            for (m, _) in &c.methods {
                if self.owner_and_origin(k, m).1 == k {
                    s += &format!("\n    method probe_{}_{m}({} o, int out)\n        call o::{m}(out)\n", c.name, c.name);
                }
            }
        }
        s
    }

    /// Expected `result`: the wrapping sum of the addends that dispatch picks.
    pub fn expected_result(&self) -> i32 {
        let mut total = 0u32;
        for k in 0..self.classes.len() {
            for m in self.visible(k) {
                total = total.wrapping_add(self.addend(self.owner_and_origin(k, &m).0, &m));
            }
        }
        total as i32
    }
}

/// Prefixing properties of the class model against the generated forest.
pub fn check_layout(model: &roopl::classes::ClassModel, h: &Hierarchy) -> Result<(), String> {
    for (k, c) in h.classes.iter().enumerate() {
        let info = model.class(&c.name).ok_or(format!("{} missing", c.name))?;
        let chain = h.ancestors(k);
        let total: usize = chain.iter().map(|a| h.classes[*a].fields.len()).sum();
        if info.size() != 1 + total {
            return Err(format!("{}: size {} but {} fields", c.name, info.size(), total));
        }
        if let Some(b) = c.base {
            let base = model.class(&h.classes[b].name).unwrap();
            if info.fields[..base.fields.len()] != base.fields[..] {
                return Err(format!("{}: base fields are not a prefix", c.name));
            }
            for f in &base.fields {
                if info.field_offset(&f.name) != base.field_offset(&f.name) {
                    return Err(format!("{}: offset of {} moved", c.name, f.name));
                }
            }
            for (i, slot) in base.vtable.iter().enumerate() {
                if info.vtable.get(i).map(|s| &s.method) != Some(&slot.method) {
                    return Err(format!("{}: slot {i} ({}) moved", c.name, slot.method));
                }
            }
        }
        let visible = h.visible(k);
        if info.vtable.len() != visible.len() {
            return Err(format!("{}: {} slots, {} methods", c.name, info.vtable.len(), visible.len()));
        }
        for m in &visible {
            let owner = &h.classes[h.owner_and_origin(k, m).0].name;
            let slot = info.slot(m).ok_or(format!("{}: no slot for {m}", c.name))?;
            if &info.vtable[slot].owner != owner {
                return Err(format!("{}: {m} owned by {} not {owner}", c.name, info.vtable[slot].owner));
            }
        }
        for a in &chain {
            if !model.subtype(&c.name, &h.classes[*a].name) {
                return Err(format!("{} not a subtype of {}", c.name, h.classes[*a].name));
            }
        }
    }
    Ok(())
}
