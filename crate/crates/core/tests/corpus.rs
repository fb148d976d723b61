mod common;

use common::{corpus, corpus_dir, CorpusProgram};
use pisa::{resolve, Machine};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use roopl::codegen::{compile, CodegenOptions};
use roopl::interp::{run_program, Dir, Interpreter, RunOptions, Store};
use roopl::invert::invert_seq;
use roopl::pipeline::{check_source, run_on_vm, Checked};
use roopl::rtm::{oracle, rtm_program_source, unary_increment};

const MEM: usize = 1 << 20;
const STEPS: u64 = 100_000_000;

fn interpret(c: &Checked) -> Vec<(String, i32)> {
    run_program(&c.model, &RunOptions::default()).unwrap().output.fields
}

fn both(src: &str) -> Vec<(String, i32)> {
    let c = check_source(src).unwrap_or_else(|e| panic!("{:?}", e.diagnostics()));
    let i = interpret(&c);
    for checks in [false, true] {
        let v = run_on_vm(&c.model, CodegenOptions { runtime_checks: checks }, MEM, STEPS).unwrap();
        assert_eq!(v.outputs, i, "checks = {checks}");
    }
    i
}

fn lookup(out: &[(String, i32)], name: &str) -> i32 {
    out.iter().find(|(n, _)| n == name).unwrap_or_else(|| panic!("no field {name}")).1
}

#[test]
fn expected_outputs_match_interpreter() {
    for p in corpus() {
        let c = check_source(&p.source).unwrap_or_else(|e| panic!("{}: {:?}", p.name, e.diagnostics()));
        assert_eq!(interpret(&c), p.expected, "{}", p.name);
    }
}

#[test]
fn compiled_programs_agree_and_leave_no_garbage() {
    for CorpusProgram { name, source, expected } in corpus() {
        let c = check_source(&source).unwrap();
        for checks in [false, true] {
            let mut v = run_on_vm(&c.model, CodegenOptions { runtime_checks: checks }, MEM, STEPS).unwrap();
            assert_eq!(v.outputs, expected, "{name}, checks = {checks}");
            assert!(v.is_clean(), "{name}, checks = {checks}");
            v.machine.reverse_run(STEPS).unwrap();
            assert_eq!(v.machine.state.mem, v.initial_mem, "{name}");
            assert!(v.machine.state.regs.iter().all(|&r| r == 0), "{name}");
        }
    }
}

#[test]
fn main_body_then_inverse_restores_store() {
    for p in corpus() {
        let c = check_source(&p.source).unwrap();
        let (class, main) = c.model.find_main().unwrap();
        let body = main.body.clone();
        let mut it = Interpreter::new(&c.model);
        let mut store = Store::new();
        let mut frame = it.instantiate(&mut store, class);
        let before = store.clone();
        it.exec_seq(&mut frame, &mut store, &body, Dir::Forward).unwrap();
        assert_ne!(store, before, "{}", p.name);
        it.exec_seq(&mut frame, &mut store, &invert_seq(&body), Dir::Forward).unwrap();
        assert_eq!(store, before, "{}", p.name);
    }
}

fn source(name: &str) -> String {
    corpus().into_iter().find(|p| p.name == name).unwrap().source
}

#[test]
fn fib_follows_the_recurrence() {
    let src = source("fib");
    for n in 0..12 {
        let (mut a, mut b) = (1i32, 1i32);
        for _ in 0..n {
            (a, b) = (b, a + b);
        }
        let out = both(&src.replace("n += 4", &format!("n += {n}")));
        assert_eq!(out, vec![("n".into(), 0), ("x1".into(), a), ("x2".into(), b)], "n = {n}");
    }
}

#[test]
fn linked_list_sums_one_to_n() {
    let src = source("linkedlist");
    for n in 1..9 {
        let s = src.replace("local int n = 5", &format!("local int n = {n}")).replace(
            "delocal int n = 5",
            &format!("delocal int n = {n}"),
        );
        let out = both(&s);
        assert_eq!(lookup(&out, "result"), n * (n + 1) / 2, "n = {n}");
        assert_eq!(lookup(&out, "empty"), 0);
    }
}

fn days_in_month(m: i32, y: i32) -> i32 {
    let leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    match m {
        2 if leap => 29,
        2 => 28,
        4 | 6 | 9 | 11 => 30,
        _ => 31,
    }
}

fn next_day((d, m, y): (i32, i32, i32)) -> (i32, i32, i32) {
    if d < days_in_month(m, y) {
        (d + 1, m, y)
    } else if m < 12 {
        (1, m + 1, y)
    } else {
        (1, 1, y + 1)
    }
}

#[test]
fn date_matches_calendar() {
    let src = source("date");
    let mut rng = StdRng::seed_from_u64(17);
    let mut starts = vec![(30, 12, 2016), (28, 2, 1904), (28, 2, 1901), (31, 12, 2098), (30, 4, 2000)];
    for _ in 0..25 {
        let (m, y) = (rng.gen_range(1..=12), rng.gen_range(1901..2099));
        let d = rng.gen_range(1..=days_in_month(m, y));
        starts.push((d, m, y));
    }
    for (k, &(d, m, y)) in starts.iter().enumerate() {
        let s = src.replace("construct Date d(30, 12, 2016)", &format!("construct Date d({d}, {m}, {y})"));
        let c = check_source(&s).unwrap();
        // The VM side is slow to compile, so only the first few go there.
        let out = if k < 5 { both(&s) } else { interpret(&c) };
        let want = next_day(next_day((d, m, y)));
        let got = (lookup(&out, "day"), lookup(&out, "month"), lookup(&out, "year"));
        assert_eq!(got, want, "from {d}/{m}/{y}");
    }
}

#[test]
fn rtm_program_is_generated_and_matches_oracle() {
    let committed = std::fs::read_to_string(corpus_dir().join("rtm").join("program.rpl")).unwrap();
    assert_eq!(committed, rtm_program_source(&unary_increment(), &[1, 1, 1]));
    let (tape, _) = oracle(&unary_increment(), &[1, 1, 1], 1000).unwrap();
    let out = both(&committed);
    assert_eq!(lookup(&out, "code"), tape.code());
    assert_eq!(lookup(&out, "length"), tape.cells.len() as i32);
    assert_eq!(lookup(&out, "head"), tape.head);
}

#[test]
fn jumps_land_on_their_partner_and_runs_are_deterministic() {
    for p in corpus() {
        let c = check_source(&p.source).unwrap();
        let compiled = compile(&c.model, CodegenOptions { runtime_checks: true }).unwrap();
        let program = resolve(&compiled.lines).unwrap();
        let mut m = Machine::load(program.clone(), MEM).unwrap();
        let mut jumping = false;
        while !m.state.halted {
            m.step().unwrap();
            // A taken jump leaves BR set for exactly one step.
            assert!(!(jumping && m.state.br != 0), "{}: BR still set at pc {}", p.name, m.state.pc);
            jumping = m.state.br != 0;
        }
        let mut again = Machine::load(program, MEM).unwrap();
        again.run(STEPS).unwrap();
        assert_eq!(again.state, m.state, "{}", p.name);
    }
}

#[test]
fn interpreter_frees_every_object() {
    for p in corpus() {
        let c = check_source(&p.source).unwrap();
        let run = run_program(&c.model, &RunOptions::default()).unwrap();
        let mut fresh = Store::new();
        Interpreter::new(&c.model).instantiate(&mut fresh, c.model.find_main().unwrap().0);
        assert_eq!(run.store.domain(), fresh.domain(), "{}", p.name);
    }
}
