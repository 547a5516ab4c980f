use std::collections::HashMap;

use crate::frontend::{normalize, parse, TypeWidths};
use crate::logic::{BinOp, SatResult, Sign, SolverSession, Term, VarRef};

use super::*;

fn ts_of(src: &str, name: &str) -> ProcedureTS {
    let p = parse("t.mc", src, TypeWidths::default()).unwrap();
    let p = normalize(&p);
    encode(&p, p.procedure(name).unwrap())
}

fn check(t: &Term) -> SatResult {
    let mut s = SolverSession::new();
    s.assert_term(t);
    s.check(&[])
}

fn assert_unsat(parts: &[Term]) {
    let t = Term::and_all(parts.to_vec());
    assert!(matches!(check(&t), SatResult::Unsat), "expected unsat: {t}");
}

fn assert_sat(parts: &[Term]) {
    let t = Term::and_all(parts.to_vec());
    assert!(matches!(check(&t), SatResult::Sat), "expected sat: {t}");
}

/// Current/next phi pair of source variable `name` in loop `l`.
fn head(ts: &ProcedureTS, l: usize, name: &str) -> (Term, Term) {
    let i = ts.loops[l].head_names.iter().position(|n| n == name).unwrap();
    let (c, n) = &ts.loops[l].head[i];
    (Term::var_ref(c.clone()), Term::var_ref(n.clone()))
}

fn copy_of(ts: &ProcedureTS, name: &str) -> Term {
    let (_, c) = ts.input_copies.iter().find(|(i, _)| i.name.as_ref() == name).unwrap();
    Term::var_ref(c.clone())
}

const FIG1: &str = "
int h(int y) { int x; for (x = 0; x < 10; x += y) {} return x; }
int f(int z) { int w; if (z > 0) { w = h(z); return w; } return z; }
";

#[test]
fn h_loop_shape() {
    let ts = ts_of(FIG1, "h");
    assert_eq!(ts.loops.len(), 1);
    assert!(ts.calls.is_empty());
    let (x, xn) = head(&ts, 0, "x");
    let (y, yn) = head(&ts, 0, "y");
    let g = Term::var_ref(ts.loops[0].guard.0.clone());
    let ls = Term::var_ref(ts.loops[0].select.clone());

    // First arrival: x = 0, y = y_in, head reachable.
    assert_sat(&[ts.init.clone()]);
    assert_unsat(&[ts.init.clone(), Term::not(Term::eq(x.clone(), Term::iconst(32, 0)))]);
    assert_unsat(&[ts.init.clone(), Term::not(Term::eq(y.clone(), copy_of(&ts, "y")))]);
    assert_unsat(&[ts.init.clone(), Term::not(g.clone())]);

    // Back edge: x' = x + y, y framed, only enabled while x < 10.
    let step = Term::and(ts.trans.clone(), ls.clone());
    assert_sat(&[step.clone()]);
    assert_unsat(&[
        step.clone(),
        Term::not(Term::eq(xn.clone(), Term::binary(BinOp::Add, x.clone(), y.clone()))),
    ]);
    assert_unsat(&[step.clone(), Term::not(Term::eq(yn.clone(), y.clone()))]);
    assert_unsat(&[step.clone(), Term::binary(BinOp::Sle, Term::iconst(32, 10), x.clone())]);

    // Exit: only past the loop condition, and the result is x.
    let r = Term::var_ref(ts.outputs[0].clone());
    assert_unsat(&[
        ts.init.clone(),
        ts.out.clone(),
        Term::binary(BinOp::Slt, x.clone(), Term::iconst(32, 10)),
    ]);
    assert_unsat(&[ts.init.clone(), ts.out.clone(), Term::not(Term::eq(r, x))]);
}

#[test]
fn f_call_placeholder() {
    let ts = ts_of(FIG1, "f");
    assert!(ts.loops.is_empty());
    assert_eq!(ts.calls.len(), 1);
    let site = &ts.calls[0];
    assert_eq!(site.callee, "h");
    // One occurrence from init, one from the entry step.
    assert_eq!(site.instances.len(), 2);
    assert!(site.instances.iter().any(|i| i.place == Place::Init));
    assert!(site.instances.iter().any(|i| i.place == Place::Trans));
    for inst in &site.instances {
        assert_eq!(inst.args.len(), 1);
        assert_eq!(inst.rets.len(), 1);
        // The call is guarded by the branch condition z > 0.
        let z = copy_of(&ts, "z");
        assert_unsat(&[
            inst.guard.clone(),
            Term::binary(BinOp::Sle, z, Term::iconst(32, 0)),
        ]);
    }
}

#[test]
fn f_with_summary() {
    let ts = ts_of(FIG1, "f");
    // Summary over h's formals: the result is always 10.
    let y = VarRef { name: "y".into(), width: 32, sign: Sign::Signed };
    let rh = VarRef { name: "r$h".into(), width: 32, sign: Sign::Signed };
    let sum = Summary {
        inputs: vec![y],
        outputs: vec![rh.clone()],
        formula: Term::eq(Term::var_ref(rh), Term::iconst(32, 10)),
    };
    let sums = instantiate_summaries(&ts, &HashMap::from([("h".to_string(), sum)])).unwrap();
    let z = copy_of(&ts, "z");
    let r = Term::var_ref(ts.outputs[0].clone());
    let zero = Term::iconst(32, 0);
    // z > 0 returns the callee's result; z <= 0 returns z.
    assert_unsat(&[
        ts.init.clone(),
        sums.clone(),
        ts.out.clone(),
        Term::binary(BinOp::Slt, zero.clone(), z.clone()),
        Term::not(Term::eq(r.clone(), Term::iconst(32, 10))),
    ]);
    assert_unsat(&[
        ts.init.clone(),
        sums,
        ts.out.clone(),
        Term::binary(BinOp::Sle, z.clone(), zero),
        Term::not(Term::eq(r, z)),
    ]);
}

#[test]
fn summary_arity_mismatch() {
    let ts = ts_of(FIG1, "f");
    let sum = Summary { inputs: vec![], outputs: vec![], formula: Term::tt() };
    let err = instantiate_summaries(&ts, &HashMap::from([("h".to_string(), sum)]));
    assert!(err.is_err());
}

#[test]
fn no_summaries_is_true() {
    let ts = ts_of(FIG1, "f");
    let t = instantiate_summaries(&ts, &HashMap::new()).unwrap();
    assert!(matches!(check(&Term::not(t)), SatResult::Unsat));
}

#[test]
fn straight_line_add() {
    let ts = ts_of("int add(int a, int b) { return a + b; }", "add");
    assert!(ts.loops.is_empty());
    assert!(ts.calls.is_empty());
    let r = Term::var_ref(ts.outputs[0].clone());
    let sum = Term::binary(BinOp::Add, copy_of(&ts, "a"), copy_of(&ts, "b"));
    assert_unsat(&[ts.init.clone(), ts.out.clone(), Term::not(Term::eq(r, sum))]);
}

#[test]
fn nested_loops() {
    let ts = ts_of(
        "void nest(unsigned n) {
            unsigned i = 0;
            while (i < n) { unsigned j = 0; while (j < i) { j = j + 1; } i = i + 1; }
        }",
        "nest",
    );
    assert_eq!(ts.loops.len(), 2);
    let ls0 = Term::var_ref(ts.loops[0].select.clone());
    let (i_out, i_out_n) = head(&ts, 0, "i");
    let (i_in, _) = head(&ts, 1, "i");
    let (j_in, j_in_n) = head(&ts, 1, "j");
    let g1n = Term::var_ref(ts.loops[1].guard.1.clone());
    let one = Term::uconst(32, 1);

    // Stepping the outer loop consumes the inner one: it must have exited,
    // and the new i comes from the inner head's (final) value.
    let step = Term::and(ts.trans.clone(), ls0.clone());
    assert_sat(&[step.clone()]);
    assert_unsat(&[step.clone(), Term::binary(BinOp::Ult, j_in.clone(), i_in.clone())]);
    assert_unsat(&[
        step.clone(),
        Term::not(Term::eq(i_out_n.clone(), Term::binary(BinOp::Add, i_in.clone(), one))),
    ]);
    // ...and re-derives the inner head for the next iteration: j' = 0 where
    // the inner head is reached.
    assert_unsat(&[
        step.clone(),
        g1n.clone(),
        Term::not(Term::eq(j_in_n.clone(), Term::uconst(32, 0))),
    ]);

    // Stepping the inner loop frames the outer head.
    let ls1 = Term::var_ref(ts.loops[1].select.clone());
    let step1 = Term::and(ts.trans.clone(), ls1);
    assert_sat(&[step1.clone()]);
    assert_unsat(&[step1.clone(), Term::not(Term::eq(i_out_n, i_out))]);
    assert_unsat(&[
        step1.clone(),
        Term::not(Term::eq(j_in_n, Term::binary(BinOp::Add, j_in, Term::uconst(32, 1)))),
    ]);
}

#[test]
fn while_true_never_exits() {
    let ts = ts_of("void spin() { while (1) { } }", "spin");
    let gx = Term::var_ref(ts.exit_guard.0.clone());
    assert_unsat(&[ts.init.clone(), gx.clone()]);
    assert_unsat(&[ts.trans.clone(), Term::var_ref(ts.exit_guard.1.clone())]);
}

#[test]
fn inline_fig1() {
    let p = parse("t.mc", FIG1, TypeWidths::default()).unwrap();
    // Entry is f (no main; last procedure). Reorder so f is the entry.
    let mut p = p;
    p.entry = "f".to_string();
    let ts = inline_all(&p);
    assert_eq!(ts.name, "f");
    assert_eq!(ts.loops.len(), 1);
    assert!(ts.calls.is_empty());
}

#[test]
fn inline_two_calls_two_loops() {
    let src = "
int h(int y) { int x; for (x = 0; x < 10; x += y) {} return x; }
int main(int z) { int a = h(z); int b = h(a); return b; }
";
    let p = parse("t.mc", src, TypeWidths::default()).unwrap();
    let ts = inline_all(&p);
    assert_eq!(ts.loops.len(), 2);
    assert!(ts.calls.is_empty());
}

#[test]
fn inline_call_free_is_identity() {
    let src = "int add(int a, int b) { return a + b; }";
    let p = parse("t.mc", src, TypeWidths::default()).unwrap();
    let mono = inline_program(&p);
    assert_eq!(mono.procedures.len(), 1);
    assert_eq!(normalize(&p).procedures[0].body, mono.procedures[0].body);
}

#[test]
fn inline_preserves_semantics() {
    // Inlined f agrees with f-plus-summary on the final result.
    let src = "
int h(int y) { int x; for (x = 0; x < 10; x += y) {} return x; }
int main(int z) { if (z > 0) { int w = h(z); return w; } return z; }
";
    let p = parse("t.mc", src, TypeWidths::default()).unwrap();
    let ts = inline_all(&p);
    assert_eq!(ts.loops.len(), 1);
    let z = copy_of(&ts, "z");
    let r = Term::var_ref(ts.outputs[0].clone());
    // z <= 0 falls through without touching the loop.
    assert_unsat(&[
        ts.init.clone(),
        ts.out.clone(),
        Term::binary(BinOp::Sle, z.clone(), Term::iconst(32, 0)),
        Term::not(Term::eq(r, z)),
    ]);
}

#[test]
fn stable_naming() {
    let a = ts_of(FIG1, "h");
    let b = ts_of(FIG1, "h");
    assert_eq!(a.init.to_string(), b.init.to_string());
    assert_eq!(a.trans.to_string(), b.trans.to_string());
    let dump = print_ts(&a);
    assert!(dump.contains("procedure h"));
    assert!(dump.contains("loop 0"));
}
