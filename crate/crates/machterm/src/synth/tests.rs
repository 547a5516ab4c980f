use crate::absdom::{AbstractValue, Bound, Template, TemplateKind};
use crate::frontend::{normalize, parse, TypeWidths};
use crate::logic::{BinOp, BitVec, SatResult, Sign, SolverSession, Term, Valuation, VarRef};
use crate::ssa::{encode, ProcedureTS};

use super::*;

fn ts_w(src: &str, name: &str, w: u32) -> ProcedureTS {
    let widths = TypeWidths { int_width: w, char_width: w.min(8) };
    let p = parse("t.mc", src, widths).unwrap();
    let p = normalize(&p);
    encode(&p, p.procedure(name).unwrap())
}

fn ctx() -> SynthCtx {
    SynthCtx::new(SynthesisBounds::default())
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

fn head(ts: &ProcedureTS, l: usize, name: &str) -> (Term, Term) {
    let i = ts.loops[l].head_names.iter().position(|n| n == name).unwrap();
    let (c, n) = &ts.loops[l].head[i];
    (Term::var_ref(c.clone()), Term::var_ref(n.clone()))
}

fn copy_of(ts: &ProcedureTS, name: &str) -> Term {
    let (_, c) = ts.input_copies.iter().find(|(i, _)| i.name.as_ref() == name).unwrap();
    Term::var_ref(c.clone())
}

fn uvar(name: &str, w: u32) -> VarRef {
    VarRef { name: name.into(), width: w, sign: Sign::Unsigned }
}

const H_UNSIGNED: &str = "void h(unsigned y) { unsigned x; for (x = 0; x < 10; x += y) {} }";
const FOO1: &str = "void foo1(unsigned n) { for (unsigned x = 0; x <= n; x = x + 1) { } }";

#[test]
fn tighten_finds_exact_bounds() {
    let x = uvar("x", 4);
    let t = Template::intervals(TemplateKind::LoopHead, vec![(Term::tt(), x.clone())]);
    let xt = Term::var_ref(x);
    let premise = Term::and(
        Term::binary(BinOp::Ule, Term::uconst(4, 2), xt.clone()),
        Term::binary(BinOp::Ule, xt, Term::uconst(4, 11)),
    );
    let d = tighten(&t, &[Flow::seed(premise)], &ctx());
    assert_eq!(d, AbstractValue::Rows(vec![Bound::Finite(11), Bound::Finite(-2)]));
}

#[test]
fn tighten_reaches_inductive_fixpoint() {
    // x starts at 0 and counts up while x <= 9: the least fixpoint is
    // 0 <= x <= 10.
    let x = uvar("x", 4);
    let xp = uvar("x'", 4);
    let t = Template::intervals(TemplateKind::LoopHead, vec![(Term::tt(), x.clone())]);
    let xt = Term::var_ref(x.clone());
    let xpt = Term::var_ref(xp);
    let seed = Flow::seed(Term::eq(xt.clone(), Term::uconst(4, 0)));
    let step = Flow::inductive(
        Term::and(
            Term::binary(BinOp::Ule, xt.clone(), Term::uconst(4, 9)),
            Term::eq(xpt.clone(), Term::binary(BinOp::Add, xt, Term::uconst(4, 1))),
        ),
        [(x.name.to_string(), xpt)].into(),
    );
    let d = tighten(&t, &[seed, step], &ctx());
    assert_eq!(d, AbstractValue::Rows(vec![Bound::Finite(10), Bound::Finite(0)]));
}

#[test]
fn pair_rows_exclude_wrapping_states() {
    // At the head of h's loop with the about-to-iterate guard, x + y can
    // never exceed the machine maximum: otherwise the next head state
    // would be the result of a wrapped addition, which the initial states
    // cannot produce. Intervals alone cannot express this.
    let ts = ts_w(H_UNSIGNED, "h", 8);
    let t = inv_template(&ts);
    let inv = infer_invariant(&ts, &t, &Term::tt(), &ctx());
    let f = t.concretize(&inv);
    let (x, _) = head(&ts, 0, "x");
    let (y, _) = head(&ts, 0, "y");
    let g = Term::var_ref(ts.loops[0].guard.0.clone());
    assert_sat(&[f.clone(), g.clone(), ts.loops[0].cond.clone()]);
    assert_unsat(&[
        f,
        g,
        ts.loops[0].cond.clone(),
        Term::eq(x, Term::uconst(8, 3)),
        Term::eq(y, Term::uconst(8, 255)),
    ]);
}

#[test]
fn summary_bounds_h_result() {
    let src = "unsigned h(unsigned y) { unsigned x; for (x = 0; x < 10; x += y) {} return x; }";
    let ts = ts_w(src, "h", 8);
    let fr = comp_inv_sum_o(&ts, &Term::tt(), &ctx());
    let sum = fr.summary(&ts);
    // The result is the first x past the loop bound.
    let r = Term::var_ref(sum.outputs[0].clone());
    assert_unsat(&[
        sum.formula.clone(),
        Term::binary(BinOp::Ult, r, Term::uconst(8, 10)),
    ]);
    assert_sat(&[sum.formula]);
}

#[test]
fn callctx_bounds_actual_argument() {
    let src = "
int h(int y) { int x; for (x = 0; x < 10; x += y) {} return x; }
int f(int z) { int w; if (z > 0) { w = h(z); return w; } return z; }
";
    let f = ts_w(src, "f", 8);
    let h = ts_w(src, "h", 8);
    let inv_t = inv_template(&f);
    let inv = infer_invariant(&f, &inv_t, &Term::tt(), &ctx());
    let (t, d) = comp_callctx_o(&f, &inv_t, &inv, &Term::tt(), &f.calls[0], &h, &ctx());
    assert!(!d.is_bottom());
    let cf = t.concretize(&d);
    // The only call is guarded by z > 0, so the actual for y is positive.
    let y = Term::var("y", 8, Sign::Signed);
    assert_unsat(&[cf, Term::binary(BinOp::Sle, y, Term::iconst(8, 0))]);
}

#[test]
fn unreachable_site_has_false_calling_context() {
    let src = "
void foo(int y) { }
void cal(int z) { if (z > 0) { if (z < 0) { foo(z); } } }
";
    let cal = ts_w(src, "cal", 8);
    let inv_t = inv_template(&cal);
    let inv = infer_invariant(&cal, &inv_t, &Term::tt(), &ctx());
    let u = comp_callctx_u(&cal, &inv_t, &inv, &Term::tt(), &cal.calls[0], &ctx());
    assert_unsat(&[u]);
}

#[test]
fn reachable_site_has_true_calling_context() {
    let src = "
void foo(int y) { }
void cal(int z) { if (z > 0) { foo(z); } }
";
    let cal = ts_w(src, "cal", 8);
    let inv_t = inv_template(&cal);
    let inv = infer_invariant(&cal, &inv_t, &Term::tt(), &ctx());
    let u = comp_callctx_u(&cal, &inv_t, &inv, &Term::tt(), &cal.calls[0], &ctx());
    assert_unsat(&[Term::not(u)]);
}

#[test]
fn countdown_has_single_component_ranking() {
    let src = "void down(unsigned n) { unsigned x = n; while (x > 0) { x = x - 1; } }";
    let ts = ts_w(src, "down", 8);
    let t = inv_template(&ts);
    let inv = infer_invariant(&ts, &t, &Term::tt(), &ctx());
    let lr = comp_term_arg(&ts, &t.concretize(&inv), &ctx());
    assert!(lr.is_complete());
    assert_eq!(lr.max_components(), 1);
}

#[test]
fn nondet_reset_needs_two_components() {
    let src = "
void g(int x, int y) {
    while (x > 0 && y > 0) {
        if (nondet()) { x = x - 1; } else { x = (int)nondet(); y = y - 1; }
    }
}
";
    // With unit coefficients no single affine component can absorb the
    // nondet reset of x (a large coefficient on y could, since machine
    // ranges are bounded), so the argument must become lexicographic.
    let mut c = ctx();
    c.bounds.coeff_schedule = vec![CoeffRange::Limit(1)];
    let ts = ts_w(src, "g", 8);
    let t = inv_template(&ts);
    let inv = infer_invariant(&ts, &t, &Term::tt(), &c);
    let lr = comp_term_arg(&ts, &t.concretize(&inv), &c);
    assert!(lr.is_complete());
    assert_eq!(lr.max_components(), 2);
}

#[test]
fn wrapping_increment_has_no_ranking() {
    let src = "void spin() { unsigned char x = 0; while (1) { x = x + 1; } }";
    let ts = ts_w(src, "spin", 8);
    let t = inv_template(&ts);
    let inv = infer_invariant(&ts, &t, &Term::tt(), &ctx());
    let lr = comp_term_arg(&ts, &t.concretize(&inv), &ctx());
    assert!(!lr.is_complete());
}

#[test]
fn width_extension_is_load_bearing() {
    // On the wrapping step 255 -> 0 the candidate -x "decreases" when the
    // arithmetic is done at the machine width (-255 wraps to 1 > 0) but is
    // correctly rejected at the extended width.
    let src = "void spin() { unsigned char x = 0; while (1) { x = x + 1; } }";
    let ts = ts_w(src, "spin", 8);
    let comp = RankComponent { coeffs: vec![("x".to_string(), -1)], constant: 0 };
    let (cur, nxt) = {
        let i = ts.loops[0].head_names.iter().position(|n| n == "x").unwrap();
        let (c, n) = &ts.loops[0].head[i];
        (c.name.to_string(), n.name.to_string())
    };
    let sigma: Valuation =
        [(cur, BitVec::new(8, 255)), (nxt, BitVec::new(8, 0))].into();
    let machine = lr_formula(&ts, 0, std::slice::from_ref(&comp), false);
    let extended = lr_formula(&ts, 0, std::slice::from_ref(&comp), true);
    assert!(machine.evaluate(&sigma).unwrap().is_true());
    assert!(!extended.evaluate(&sigma).unwrap().is_true());
}

#[test]
fn foo1_terminates_below_the_maximum() {
    let ts = ts_w(FOO1, "foo1", 4);
    let r = comp_precond_term(&ts, &Term::tt(), &Term::ff(), &ctx());
    let n = copy_of(&ts, "n");
    // precond == (n <= 14)
    assert_unsat(&[r.precond.clone(), Term::eq(n.clone(), Term::uconst(4, 15))]);
    assert_unsat(&[
        Term::not(r.precond),
        Term::binary(BinOp::Ule, n, Term::uconst(4, 14)),
    ]);
}

#[test]
fn h_terminates_for_nonzero_step() {
    // At full width the pair row makes x + y wrap-free across repeatable
    // steps, so the violating steps are exactly the y = 0 ones. (At tiny
    // widths h genuinely wraps back into the loop and a linear argument
    // cannot cover every nonzero y.)
    let ts = ts_w(H_UNSIGNED, "h", 32);
    let r = comp_precond_term(&ts, &Term::tt(), &Term::ff(), &ctx());
    let y = copy_of(&ts, "y");
    // precond == (y != 0)
    assert_unsat(&[r.precond.clone(), Term::eq(y.clone(), Term::uconst(32, 0))]);
    assert_unsat(&[
        Term::not(r.precond),
        Term::binary(BinOp::Ule, Term::uconst(32, 1), y),
    ]);
}

#[test]
fn while_true_has_false_precondition() {
    let src = "void spin(unsigned n) { while (1) { } }";
    let ts = ts_w(src, "spin", 4);
    let r = comp_precond_term(&ts, &Term::tt(), &Term::ff(), &ctx());
    assert_unsat(&[r.precond]);
}

#[test]
fn nec_precond_covers_only_bad_inputs() {
    // With the ranking 15 - x for foo1, the only input whose executions
    // reach a ranking-violating repeatable step is n = 15.
    let ts = ts_w(FOO1, "foo1", 4);
    let inv_t = inv_template(&ts);
    let inv = infer_invariant(&ts, &inv_t, &Term::tt(), &ctx());
    let lr = LexRanking {
        loops: vec![Some(vec![RankComponent {
            coeffs: vec![("x".to_string(), -1)],
            constant: 15,
        }])],
    };
    let bad = ranking_bad(&ts, &lr, true);
    let pre = comp_nec_precond(&ts, &inv_t, &inv, &Term::tt(), &bad, &Term::tt(), &ctx());
    let n = copy_of(&ts, "n");
    assert_unsat(&[Term::not(pre.clone()), Term::eq(n.clone(), Term::uconst(4, 15))]);
    assert_unsat(&[pre, Term::binary(BinOp::Ule, n, Term::uconst(4, 14))]);
}
