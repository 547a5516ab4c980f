use crate::frontend::{parse, Program, TypeWidths};
use crate::logic::{BinOp, SatResult, Sign, SolverSession, Term, VarRef};

use super::*;

fn program(src: &str, w: u32) -> Program {
    let widths = TypeWidths { int_width: w, char_width: w.min(8) };
    parse("t.mc", src, widths).unwrap()
}

fn cfg() -> AnalysisConfig {
    AnalysisConfig::default()
}

fn uvar(name: &str, w: u32) -> VarRef {
    VarRef { name: name.into(), width: w, sign: Sign::Unsigned }
}

fn check(t: &Term) -> SatResult {
    let mut s = SolverSession::new();
    s.assert_term(t);
    s.check(&[])
}

fn assert_equiv(a: &Term, b: &Term) {
    let differ = Term::binary(BinOp::Xor, a.clone(), b.clone());
    assert!(matches!(check(&differ), SatResult::Unsat), "not equivalent: {a} vs {b}");
}

const H_UNSIGNED: &str = "void h(unsigned y) { unsigned x; for (x = 0; x < 10; x += y) {} }";

const FIG8: &str = "void main() {
    int x = 1; int y = 1;
    while (x > 0) {
        if (y < 10) { x = nondet(); } else { x = x - 1; }
        if (y < 100) { y = y + 1; }
    }
}";

#[test]
fn endless_loop_is_non_terminating_in_both_checks() {
    let p = program("void main() { while (1) { } }", 4);
    let u = analyze_universal(&p, &cfg()).unwrap();
    assert_eq!(u.status, Status::NonTerminating);
    assert_eq!(u.status.exit_code(), 10);
    let c = analyze_conditional(&p, &cfg()).unwrap();
    assert_eq!(c.status, Status::NonTerminating);
    assert!(c.precondition.is_false());
}

#[test]
fn countdown_terminates_universally() {
    let p = program("void main(unsigned n) { while (n > 0) { n = n - 1; } }", 8);
    let v = analyze_universal(&p, &cfg()).unwrap();
    assert_eq!(v.status, Status::Terminating);
    let main = v.procedures.iter().find(|pv| pv.name == "main").unwrap();
    assert_eq!(main.ranking.len(), 1);
    assert!(main.ranking[0].is_some(), "expected a ranking for the loop");
}

#[test]
fn standalone_h_needs_a_nonzero_step() {
    // At width 8 the wrapped sum stays below the loop bound only for y = 0,
    // so the loop terminates exactly when the step is nonzero.
    let p = program(H_UNSIGNED, 8);
    let v = analyze_conditional(&p, &cfg()).unwrap();
    assert_eq!(v.status, Status::PotentiallyNonTerminating);
    let y = Term::var_ref(uvar("y", 8));
    let nonzero = Term::not(Term::binary(BinOp::Eq, y, Term::uconst(8, 0)));
    assert_equiv(&v.precondition, &nonzero);
}

#[test]
fn guarded_call_makes_the_whole_program_terminate() {
    // The caller only passes strictly positive steps, so the conditional
    // verdict covers every input even though h alone does not terminate.
    let src = "void h(unsigned y) { unsigned x; for (x = 0; x < 10; x += y) {} }
        void main(unsigned z) { if (z > 0) { h(z); } }";
    let p = program(src, 8);
    let v = analyze_conditional(&p, &cfg()).unwrap();
    assert_eq!(v.status, Status::Terminating);
    assert!(matches!(check(&Term::not(v.precondition.clone())), SatResult::Unsat));
}

#[test]
fn callee_precondition_propagates_to_the_caller() {
    let src = "void h(unsigned y) { unsigned x; for (x = 0; x < 10; x += y) {} }
        void main(unsigned n) { h(n); }";
    let p = program(src, 8);
    let v = analyze_conditional(&p, &cfg()).unwrap();
    assert_eq!(v.status, Status::PotentiallyNonTerminating);
    let n = Term::var_ref(uvar("n", 8));
    let nonzero = Term::not(Term::binary(BinOp::Eq, n, Term::uconst(8, 0)));
    assert_equiv(&v.precondition, &nonzero);
}

#[test]
fn diverging_callee_dooms_an_unconditional_caller() {
    let src = "void d() { while (1) { } }
        void main() { d(); }";
    let p = program(src, 4);
    let v = analyze_universal(&p, &cfg()).unwrap();
    assert_eq!(v.status, Status::NonTerminating);
}

#[test]
fn guarded_diverging_callee_is_only_potential() {
    let src = "void d() { while (1) { } }
        void main(unsigned c) { if (c > 3) { d(); } }";
    let p = program(src, 4);
    let v = analyze_universal(&p, &cfg()).unwrap();
    assert_eq!(v.status, Status::PotentiallyNonTerminating);
}

#[test]
fn unreachable_diverging_callee_is_ignored() {
    let src = "void d() { while (1) { } }
        void main(unsigned c) { if (c > c) { d(); } }";
    let p = program(src, 4);
    let v = analyze_universal(&p, &cfg()).unwrap();
    assert_eq!(v.status, Status::Terminating);
}

#[test]
fn lexicographic_example_terminates_with_two_components() {
    // No single affine component works: the nondet assignment forces its x
    // coefficient to zero, and a pure function of y stalls once y saturates.
    let p = program(FIG8, 8);
    let config = cfg();
    let mut a = Analyzer::new(&p, &config).unwrap();
    a.forward_from_entry();
    let status = a.universal_status("main");
    assert_eq!(status, Status::Terminating);
    let lr = a.record_ranking("main").expect("ranking recorded");
    assert!(lr.is_complete());
    assert_eq!(lr.max_components(), 2);
}

#[test]
fn lexicographic_example_needs_two_components() {
    let p = program(FIG8, 8);
    let mut config = cfg();
    config.bounds.max_lex = 1;
    let v = analyze_universal(&p, &config).unwrap();
    assert_eq!(v.status, Status::PotentiallyNonTerminating);
}

#[test]
fn repeated_contexts_reuse_the_summary() {
    let src = "void g(unsigned n) { while (n > 0) { n = n - 1; } }
        void main() { g(3); g(3); g(3); }";
    let p = program(src, 8);
    let config = cfg();
    let mut a = Analyzer::new(&p, &config).unwrap();
    a.forward_from_entry();
    assert_eq!(a.forward_runs("g"), 1, "identical contexts must be subsumed");
}

#[test]
fn summaries_beat_inlining_on_shared_callees() {
    let src = "void g(unsigned n) { while (n > 0) { n = n - 1; } }
        void main(unsigned a, unsigned b) { g(a); g(b); g(a); }";
    let p = program(src, 4);
    let ipta = analyze_universal(&p, &cfg()).unwrap();
    let mono = analyze_monolithic(&p, true, &cfg()).unwrap();
    assert_eq!(ipta.status, mono.status);
    assert_eq!(ipta.status, Status::Terminating);
    assert!(
        ipta.solver_calls < mono.solver_calls,
        "expected fewer solver calls with summaries: {} vs {}",
        ipta.solver_calls,
        mono.solver_calls
    );
}

#[test]
fn monolithic_conditional_agrees_with_summaries() {
    let src = "void h(unsigned y) { unsigned x; for (x = 0; x < 10; x += y) {} }
        void main(unsigned n) { h(n); }";
    let p = program(src, 4);
    let mono = analyze_monolithic(&p, false, &cfg()).unwrap();
    let ipta = analyze_conditional(&p, &cfg()).unwrap();
    // Preconditions may differ in precision but verdicts must not conflict:
    // one side claiming universal termination while the other claims
    // universal divergence would be a soundness bug.
    let conflict = matches!(
        (mono.status, ipta.status),
        (Status::Terminating, Status::NonTerminating)
            | (Status::NonTerminating, Status::Terminating)
    );
    assert!(!conflict, "verdicts conflict: {:?} vs {:?}", mono.status, ipta.status);
}

#[test]
fn straight_line_code_terminates() {
    let p = program("void main(int a) { int b = a + 1; }", 4);
    let u = analyze_universal(&p, &cfg()).unwrap();
    assert_eq!(u.status, Status::Terminating);
    let c = analyze_conditional(&p, &cfg()).unwrap();
    assert_eq!(c.status, Status::Terminating);
    assert!(matches!(check(&Term::not(c.precondition.clone())), SatResult::Unsat));
}

#[test]
fn dbg_fig8_path() {
    use crate::frontend::normalize;
    use crate::ssa::encode;
    use crate::synth::{comp_term_arg, infer_invariant, inv_template};
    for w in [16u32] {
        let p = program(FIG8, w);
        let p = normalize(&p);
        let ts = encode(&p, p.procedure("main").unwrap());
        let sctx = SynthCtx::new(SynthesisBounds::default());
        let t0 = std::time::Instant::now();
        let inv_t = inv_template(&ts);
        let inv = infer_invariant(&ts, &inv_t, &Term::tt(), &sctx);
        let inv_f = inv_t.concretize(&inv);
        println!("w={w} inv t={:?} calls={} inv={inv_f}", t0.elapsed(), sctx.calls.get());
        let t1 = std::time::Instant::now();
        let lr = comp_term_arg(&ts, &inv_f, &sctx);
        println!("w={w} rank t={:?} calls={} ranking={:?}", t1.elapsed(), sctx.calls.get(), lr.loops);
    }
}
