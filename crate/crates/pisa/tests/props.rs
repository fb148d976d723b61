use pisa::{execute, invert_instruction, parse_pal, emit_pal, resolve, Instr, Line, Machine, MachineState, Operand, Reg};
use proptest::prelude::*;

fn reg() -> impl Strategy<Value = Reg> {
    (1u8..12).prop_map(Reg)
}

fn imm() -> impl Strategy<Value = Operand> {
    any::<i32>().prop_map(Operand::Num)
}

fn two() -> impl Strategy<Value = (Reg, Reg)> {
    (reg(), reg()).prop_filter("distinct", |(a, b)| a != b)
}

fn three() -> impl Strategy<Value = (Reg, Reg, Reg)> {
    (reg(), reg(), reg()).prop_filter("dest differs", |(a, b, c)| a != b && a != c)
}

/// Straight-line data instructions; EXCH is excluded because its address
/// register would need to stay in range.
fn data_instr() -> impl Strategy<Value = Instr> {
    use Instr::*;
    prop_oneof![
        two().prop_map(|(a, b)| Add(a, b)),
        two().prop_map(|(a, b)| Sub(a, b)),
        two().prop_map(|(a, b)| Xor(a, b)),
        two().prop_map(|(a, b)| Rlv(a, b)),
        two().prop_map(|(a, b)| Rrv(a, b)),
        (reg(), imm()).prop_map(|(a, c)| Addi(a, c)),
        (reg(), imm()).prop_map(|(a, c)| Xori(a, c)),
        (reg(), imm()).prop_map(|(a, c)| Rl(a, c)),
        (reg(), imm()).prop_map(|(a, c)| Rr(a, c)),
        reg().prop_map(Neg),
        three().prop_map(|(a, b, c)| Andx(a, b, c)),
        three().prop_map(|(a, b, c)| Norx(a, b, c)),
        three().prop_map(|(a, b, c)| Orx(a, b, c)),
        three().prop_map(|(a, b, c)| Sllvx(a, b, c)),
        three().prop_map(|(a, b, c)| Sravx(a, b, c)),
        three().prop_map(|(a, b, c)| Srlvx(a, b, c)),
        (two(), imm()).prop_map(|((a, b), c)| Andix(a, b, c)),
        (two(), imm()).prop_map(|((a, b), c)| Orix(a, b, c)),
        (two(), imm()).prop_map(|((a, b), c)| Sllx(a, b, c)),
        (two(), imm()).prop_map(|((a, b), c)| Srax(a, b, c)),
        (two(), imm()).prop_map(|((a, b), c)| Srlx(a, b, c)),
    ]
}

fn state(regs: Vec<i32>) -> MachineState {
    let mut st = MachineState::new(16);
    for (k, v) in regs.into_iter().enumerate() {
        st.regs[k + 1] = v;
    }
    st
}

proptest! {
    #[test]
    fn inversion_is_an_involution(i in data_instr()) {
        prop_assert_eq!(invert_instruction(&invert_instruction(&i)), i);
    }

    #[test]
    fn inverse_undoes_forward(i in data_instr(), regs in prop::collection::vec(any::<i32>(), 31)) {
        let mut st = state(regs);
        let before = st.clone();
        execute(&i, &mut st).unwrap();
        execute(&invert_instruction(&i), &mut st).unwrap();
        prop_assert_eq!(st, before);
    }

    #[test]
    fn straight_line_forward_then_reverse(
        body in prop::collection::vec(data_instr(), 0..40),
        seeds in prop::collection::vec(any::<i32>(), 11),
    ) {
        let mut lines = vec![Line::new(Instr::Start)];
        for (k, v) in seeds.iter().enumerate() {
            lines.push(Line::new(Instr::Xori(Reg(k as u8 + 1), Operand::Num(*v))));
        }
        lines.extend(body.into_iter().map(Line::new));
        lines.push(Line::new(Instr::Finish));
        let mut m = Machine::load(resolve(&lines).unwrap(), 64).unwrap();
        let loaded = m.state.clone();
        m.run(1000).unwrap();
        m.reverse_run(1000).unwrap();
        m.state.steps = 0;
        prop_assert_eq!(m.state, loaded);
    }

    #[test]
    fn pal_text_round_trip(body in prop::collection::vec(data_instr(), 0..30)) {
        let lines: Vec<Line> = body.into_iter().map(Line::new).collect();
        prop_assert_eq!(parse_pal(&emit_pal(&lines)).unwrap(), lines);
    }

    /// Inserting an instruction shifts only offsets of branches that jump
    /// across the insertion point, and by exactly one.
    #[test]
    fn resolve_is_stable_under_insertion(n in 4usize..30, at in 0usize..30, pairs in prop::collection::vec((0usize..30, 0usize..30), 1..6)) {
        let at = at % (n + 1);
        let mut lines: Vec<Line> = (0..n).map(|k| Line::labeled(format!("l{k}"), Instr::Xori(Reg(4), 0.into()))).collect();
        for (src, dst) in &pairs {
            let (src, dst) = (src % n, dst % n);
            lines[src].instr = Instr::Bra(Operand::label(format!("l{dst}")));
        }
        let before = resolve(&lines).unwrap();
        let mut grown = lines.clone();
        grown.insert(at, Line::new(Instr::Xori(Reg(5), 0.into())));
        let after = resolve(&grown).unwrap();
        for (addr, i) in before.code().iter().enumerate() {
            if let Some(Operand::Num(off)) = i.branch_target() {
                let target = addr as i64 + *off as i64;
                let new_addr = if addr >= at { addr + 1 } else { addr };
                let new_target = if target >= at as i64 { target + 1 } else { target };
                let new_off = after.code()[new_addr].branch_target().and_then(Operand::num).unwrap();
                prop_assert_eq!(new_off as i64, new_target - new_addr as i64);
                prop_assert!((new_off - off).abs() <= 1);
            }
        }
    }
}
